#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fdal::datasets::{load_csv, make_gaussian_shift, save_csv, DADataset, GaussianShift};
use fdal::discrepancy::{variational_estimate, NetConfig, OptConfig};
use fdal::divergence::{catalog, get_spec, DivergenceKind, DivergenceSpec};
use fdal::harness::{apply_overrides, parse_seeds, run_preset, DataConfig, ExperimentConfig, MANIFEST};
use fdal::oracle::{reports_to_csv, run_corpus, tally, tally_text};
use fdal::report::align;
use fdal::trainer::{run, Method, TrainConfig};
use fdal::{Error, Result};

#[derive(Parser)]
#[command(name = "fdal", version, about = "f-divergence domain-adversarial learning at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print every shipped divergence with its conjugate and activation.
    DivergenceTable {
        /// γ used for the weighted rows.
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        /// `text` or `csv`.
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Variational lower-bound estimate of a divergence between two sample sets.
    Estimate {
        #[arg(long)]
        divergence: String,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, requires = "target_csv", conflicts_with = "synthetic")]
        source_csv: Option<PathBuf>,
        #[arg(long, requires = "source_csv")]
        target_csv: Option<PathBuf>,
        /// 1-D unit-variance Gaussians `N(0,1)` vs `N(mean_shift,1)`.
        #[arg(long)]
        synthetic: bool,
        #[arg(long, default_value_t = 1.0)]
        mean_shift: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one model and write its metrics and checkpoint.
    Train {
        /// TOML file with trainer keys at the top level.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        divergence: Option<String>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, requires = "target_csv")]
        source_csv: Option<PathBuf>,
        #[arg(long, requires = "source_csv")]
        target_csv: Option<PathBuf>,
        /// Generator for synthetic data when no CSV is given.
        #[arg(long, default_value = "rotated_moons")]
        generator: String,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value = "train_out")]
        out: PathBuf,
    },
    /// Write a synthetic source/target pair as CSV.
    Generate {
        #[arg(long, default_value = "rotated_moons")]
        generator: String,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Check the bounds and identities on random finite instances.
    Oracle {
        /// thm1, thm2, prop1, hdh, dann-opt, mdd-js or all.
        #[arg(long, default_value = "all")]
        statement: String,
        #[arg(long, default_value_t = 500)]
        n_instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write every report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run an experiment grid.
    Preset {
        /// compare-dann, divergence-sweep, gamma-sweep, label-shift or source-only.
        name: Option<String>,
        /// Comma-separated seed list.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Re-run from a manifest written by an earlier run.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::DivergenceTable { gamma, format } => divergence_table(gamma, &format),
        Command::Estimate {
            divergence,
            gamma,
            source_csv,
            target_csv,
            synthetic,
            mean_shift,
            n,
            steps,
            lr,
            seed,
        } => {
            let spec = get_spec(&divergence, gamma)?;
            let (xs, xt, reference) = match (source_csv, target_csv) {
                (Some(s), Some(t)) => (load_csv(&s)?, load_csv(&t)?, None),
                _ if synthetic => {
                    let cfg = GaussianShift {
                        separation: 0.0,
                        ..GaussianShift::new(n, 1, mean_shift, 1.0)
                    };
                    let (s, t) = make_gaussian_shift(&cfg, seed)?;
                    (s, t, gaussian_reference(&spec, mean_shift))
                }
                _ => return Err(Error::Config("give --source-csv/--target-csv or --synthetic".into())),
            };
            let value = variational_estimate(
                xs.features(),
                xt.features(),
                &spec,
                &NetConfig::default(),
                &OptConfig { steps, lr },
                seed,
            )?;
            println!("divergence  {}", spec.label());
            println!("estimate    {value:.6}");
            if let Some(r) = reference {
                println!("analytic    {r:.6}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            config,
            method,
            divergence,
            gamma,
            epochs,
            seed,
            overrides,
            source_csv,
            target_csv,
            generator,
            n,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => toml::from_str::<TrainConfig>(&std::fs::read_to_string(&p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?)
                .map_err(|e| Error::Config(e.to_string()))?,
                None => TrainConfig::default(),
            };
            cfg = apply_overrides(&cfg, &overrides)?;
            if let Some(m) = method {
                cfg.method = parse_method(&m)?;
            }
            if let Some(d) = divergence {
                cfg.divergence = d;
            }
            if gamma.is_some() {
                cfg.gamma = gamma;
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (s, t) = match (source_csv, target_csv) {
                (Some(s), Some(t)) => (load_csv(&s)?, load_csv(&t)?),
                _ => DataConfig {
                    generator,
                    n,
                    ..DataConfig::default()
                }
                .generate(cfg.seed)?,
            };
            train(&cfg, &s, &t, &out)
        }
        Command::Generate {
            generator,
            n,
            seed,
            overrides,
            out,
        } => {
            let data = apply_overrides(
                &DataConfig {
                    generator,
                    n,
                    ..DataConfig::default()
                },
                &overrides,
            )?;
            let (s, t) = data.generate(seed)?;
            mkdir(&out)?;
            save_csv(&s, &out.join("source.csv"))?;
            save_csv(&t, &out.join("target.csv"))?;
            println!("wrote {} and {}", out.join("source.csv").display(), out.join("target.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            statement,
            n_instances,
            seed,
            csv,
        } => {
            let reports = run_corpus(&statement, n_instances, seed)?;
            print!("{}", tally_text(&tally(&reports)));
            if let Some(p) = csv {
                std::fs::write(&p, reports_to_csv(&reports)).map_err(|e| Error::Io { path: p, source: e })?;
            }
            let failures: Vec<_> = reports.iter().filter(|r| r.is_failure()).collect();
            for f in &failures {
                println!("\nFAIL {} {} slack={:e}", f.statement, f.instance, f.slack);
                if let Some(c) = &f.counterexample {
                    print!("{c}");
                }
            }
            Ok(if failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Preset {
            name,
            seeds,
            jobs,
            out,
            overrides,
            manifest,
        } => {
            let mut cfg = match (&manifest, &name) {
                (Some(m), _) => ExperimentConfig::load(m)?,
                (None, Some(n)) => ExperimentConfig::preset(n)?,
                (None, None) => return Err(Error::Config("give a preset name or --manifest".into())),
            };
            if let (Some(n), Some(_)) = (&name, &manifest) {
                if *n != cfg.preset {
                    return Err(Error::Config(format!("manifest is for preset {:?}, not {n:?}", cfg.preset)));
                }
            }
            cfg = cfg.with_overrides(&overrides)?.with_seed_env()?;
            if let Some(s) = seeds {
                cfg.harness.seeds = parse_seeds(&s)?;
            }
            if let Some(j) = jobs {
                cfg.harness.jobs = j;
            }
            // A re-run writes next to its manifest and leaves the recorded
            // configuration untouched, so the new manifest is byte-identical.
            let dir = match (out, &manifest) {
                (Some(o), _) => {
                    cfg.harness.out = o.clone();
                    o
                }
                (None, Some(m)) => match m.parent() {
                    Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
                    _ => PathBuf::from("."),
                },
                (None, None) => cfg.harness.out.clone(),
            };
            let res = run_preset(&cfg, Some(&dir))?;
            print!("{}", res.table.to_text());
            if let Some(ls) = &res.label_shift {
                println!();
                for arm in ls.slopes.keys() {
                    println!("slope {arm}: {:.4}", ls.mean_slope(arm).unwrap_or(f64::NAN));
                }
            }
            println!("artifacts in {} ({} cells, manifest {})", dir.display(), res.cells.len(), MANIFEST);
            let failures = res.failures();
            for (id, msg) in &failures {
                eprintln!("cell {id} diverged: {msg}");
            }
            Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn parse_method(s: &str) -> Result<Method> {
    match s {
        "fdal" => Ok(Method::Fdal),
        "dann" => Ok(Method::Dann),
        "source_only" | "source-only" => Ok(Method::SourceOnly),
        other => Err(Error::Config(format!("unknown method {other:?}"))),
    }
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn train(cfg: &TrainConfig, s: &DADataset, t: &DADataset, out: &Path) -> Result<ExitCode> {
    let (model, metrics) = run(cfg, s, t)?;
    mkdir(out)?;
    let p = out.join("metrics.csv");
    std::fs::write(&p, metrics.to_csv()).map_err(|e| Error::Io { path: p, source: e })?;
    let p = out.join("config.toml");
    std::fs::write(&p, toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?)
        .map_err(|e| Error::Io { path: p, source: e })?;
    model.save(&out.join("model.txt"))?;
    if let Some(last) = metrics.last() {
        println!(
            "epoch {}  source acc {:.4}  target acc {:.4}  dst {:.4}",
            last.epoch, last.source_acc, last.target_acc, last.dst
        );
    }
    println!("wrote metrics.csv, config.toml and model.txt to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn divergence_table(gamma: f64, format: &str) -> Result<ExitCode> {
    let header: Vec<String> = ["name", "phi", "conjugate", "dom", "phi'(1)", "activation", "shift"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = catalog(gamma)?
        .iter()
        .map(|s| {
            vec![
                s.label(),
                s.phi_formula().to_string(),
                s.conjugate_formula().to_string(),
                s.conjugate_domain().to_string(),
                s.phi_prime_at_one().to_string(),
                s.activation_formula().to_string(),
                format!("{:.6}", s.shift_constant() + 0.0),
            ]
        })
        .collect();
    match format {
        "text" => print!("{}", align(&header, &rows)),
        "csv" => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let io = |e: csv::Error| Error::Config(e.to_string());
            w.write_record(&header).map_err(io)?;
            for r in &rows {
                w.write_record(r).map_err(io)?;
            }
            w.flush().map_err(|e| Error::Config(e.to_string()))?;
        }
        other => return Err(Error::Config(format!("unknown format {other:?}"))),
    }
    Ok(ExitCode::SUCCESS)
}

/// Closed forms for `N(0,1)` against `N(μ,1)` where they exist.
fn gaussian_reference(spec: &DivergenceSpec, mu: f64) -> Option<f64> {
    if spec.scale() != 1.0 {
        return None;
    }
    let m2 = mu * mu;
    match spec.kind() {
        DivergenceKind::Kl | DivergenceKind::KlRev => Some(m2 / 2.0),
        DivergenceKind::PearsonChi2 | DivergenceKind::NeymanChi2 => Some(m2.exp() - 1.0),
        DivergenceKind::SqHellinger => Some(2.0 * (1.0 - (-m2 / 8.0).exp())),
        DivergenceKind::Tv => Some(statrs::function::erf::erf(mu.abs() / (2.0 * 2f64.sqrt()))),
        _ => None,
    }
}
