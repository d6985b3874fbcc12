//! One test per acceptance criterion. Each writes a single `PASS`/`FAIL`
//! line to stderr (uncaptured) before asserting.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write as _;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::files::{differences, tree};
use fdal::datasets::{make_gaussian_shift, GaussianShift};
use fdal::discrepancy::{variational_estimate, NetConfig, OptConfig};
use fdal::divergence::{analytic_f_divergence, get_spec, FiniteDistribution};
use fdal::harness::{run_preset, ExperimentConfig, PresetOutput, MANIFEST, PRESETS};
use fdal::models::{dann_reduction_check, random_batch, FdalModel, ModelConfig};
use fdal::oracle::{run_corpus, tally};
use fdal::stats::wilcoxon_signed_rank;
use fdal::tensor::Tensor;
use fdal::trainer::{run, Method, TrainConfig};
use rand::distr::{weighted::WeightedIndex, Distribution};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn report(id: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{verdict} criterion {id}: {detail}");
    assert!(pass, "criterion {id}: {detail}");
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[test]
fn criterion_01_autodiff_soundness() {
    let t0 = Instant::now();
    let mut worst = (0.0f64, "", 0u64);
    let mut grl = true;
    for seed in 0..100u64 {
        for (op, err) in common::op_gradient_errors(seed) {
            if err > worst.0 {
                worst = (err, op, seed);
            }
        }
        grl &= common::grl_is_exact(seed);
    }
    let el = t0.elapsed();
    let pass = worst.0 < 1e-4 && grl && el < Duration::from_secs(30);
    report(
        "1 (autodiff soundness)",
        pass,
        format!(
            "worst relative error {:.2e} ({} seed {}), reversal exact {grl}, {:.2}s",
            worst.0,
            worst.1,
            worst.2,
            secs(el)
        ),
    );
}

#[test]
fn criterion_02_conjugate_table() {
    let t0 = Instant::now();
    let bad = common::catalog_violations();
    let el = t0.elapsed();
    let pass = bad.is_empty() && el < Duration::from_secs(10);
    let first = bad.first().cloned().unwrap_or_default();
    report(
        "2 (conjugate table)",
        pass,
        format!("{} violations {first}, {:.2}s", bad.len(), secs(el)),
    );
}

fn gaussian_pair(shift: f64, seed: u64) -> (Tensor, Tensor) {
    let cfg = GaussianShift {
        separation: 0.0,
        ..GaussianShift::new(10_000, 1, shift, 1.0)
    };
    let (s, t) = make_gaussian_shift(&cfg, seed).unwrap();
    (s.features().clone(), t.features().clone())
}

fn estimate(xs: &Tensor, xt: &Tensor, name: &str) -> (f64, Duration) {
    let t0 = Instant::now();
    let v = variational_estimate(
        xs,
        xt,
        &get_spec(name, None).unwrap(),
        &NetConfig::default(),
        &OptConfig::default(),
        0,
    )
    .unwrap();
    (v, t0.elapsed())
}

fn one_hot_samples(p: &FiniteDistribution, n: usize, seed: u64) -> Tensor {
    let w = WeightedIndex::new(p.probs()).unwrap();
    let mut r = fdal::rng::seeded(seed);
    let k = p.len();
    let mut data = vec![0.0; n * k];
    for i in 0..n {
        data[i * k + w.sample(&mut r)] = 1.0;
    }
    Tensor::matrix(n, k, data).unwrap()
}

#[test]
fn criterion_03_variational_estimation() {
    let limit = Duration::from_secs(120);
    let (xs, xt) = gaussian_pair(1.0, 0);
    let (kl, t_kl) = estimate(&xs, &xt, "kl");
    let (ys, yt) = gaussian_pair(0.0, 1);
    let (same, t_same) = estimate(&ys, &yt, "kl");
    let ps = FiniteDistribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let pt = FiniteDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let analytic = analytic_f_divergence(&ps, &pt, &get_spec("pearson_chi2", None).unwrap()).unwrap();
    let (pearson, t_p) = estimate(&one_hot_samples(&ps, 10_000, 2), &one_hot_samples(&pt, 10_000, 3), "pearson_chi2");
    let pass = (0.40..=0.52).contains(&kl)
        && same <= 0.02
        && pearson <= analytic + 0.05
        && [t_kl, t_same, t_p].iter().all(|t| *t < limit);
    report(
        "3 (variational estimation)",
        pass,
        format!(
            "KL {kl:.4} in [0.40, 0.52] ({:.0}s); identical {same:.4} <= 0.02 ({:.0}s); discrete Pearson {pearson:.4} <= {analytic:.4} + 0.05 ({:.0}s)",
            secs(t_kl),
            secs(t_same),
            secs(t_p)
        ),
    );
}

#[test]
fn criterion_04_theory_oracle() {
    let t0 = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for st in ["thm1", "thm2", "prop1", "hdh", "dann-opt", "mdd-js"] {
        let reports = run_corpus(st, 500, 0).unwrap();
        let t = &tally(&reports)[0];
        pass &= t.failed == 0 && t.passed > 0;
        parts.push(format!("{st} {}/{} ok", t.passed, t.checked - t.skipped));
    }
    let el = t0.elapsed();
    pass &= el < Duration::from_secs(120);
    report("4 (theory oracle)", pass, format!("{}, {:.1}s", parts.join(", "), secs(el)));
}

#[test]
fn criterion_05_dann_correction_identity() {
    let mut worst = 0.0f64;
    let mut checks = 0;
    for seed in 0..20u64 {
        let k = 2 + (seed as usize % 4);
        let cfg = ModelConfig {
            input_dim: 4,
            num_classes: k,
            g_hidden: vec![16, 16],
            head_hidden: vec![8],
        };
        let m = FdalModel::new(&cfg, get_spec("js_shifted", None).unwrap(), 0.6, seed).unwrap();
        let mut r = fdal::rng::seeded(500 + seed);
        let xs = random_batch(32, 4, &mut r);
        let xt = random_batch(24, 4, &mut r);
        for i in 0..k {
            worst = worst.max(dann_reduction_check(&m, &xs, &xt, i, true).unwrap().max_deviation());
            checks += 1;
        }
    }
    report(
        "5 (DANN-correction identity)",
        worst < 1e-9,
        format!("max deviation {worst:.2e} over 20 models, {checks} basis indices"),
    );
}

#[test]
fn criterion_06_gamma_equivalence() {
    let (s, t) = fdal::datasets::make_rotated_moons(2000, 30.0, 0.1, 0).unwrap();
    let a = TrainConfig {
        epochs: 5,
        ..ExperimentConfig::preset("compare-dann").unwrap().trainer
    };
    let b = TrainConfig {
        divergence: "gamma_js".into(),
        gamma: Some(1.0),
        ..a.clone()
    };
    let (sa, sb) = (a.spec().unwrap().shift_constant(), b.spec().unwrap().shift_constant());
    let (_, ma) = run(&a, &s, &t).unwrap();
    let (_, mb) = run(&b, &s, &t).unwrap();
    let mut worst = 0.0f64;
    for (x, y) in ma.steps.iter().zip(&mb.steps) {
        worst = worst
            .max(((x.dst - sa) - (y.dst - sb)).abs())
            .max((x.task_loss - y.task_loss).abs())
            .max(((x.total + a.eta * sa) - (y.total + b.eta * sb)).abs());
    }
    let pass = worst <= 1e-9 && ma.steps.len() == mb.steps.len();
    report(
        "6 (gamma equivalence)",
        pass,
        format!("max per-step deviation {worst:.2e} over {} steps", ma.steps.len()),
    );
}

/// Full-size preset runs shared by criteria 7, 8 and 10.
struct PresetRun {
    out: PresetOutput,
    dir: PathBuf,
    elapsed: Duration,
}

static WORKDIR: OnceLock<tempfile::TempDir> = OnceLock::new();
static RUNS: OnceLock<Vec<(String, PresetRun)>> = OnceLock::new();

fn preset_runs() -> &'static [(String, PresetRun)] {
    RUNS.get_or_init(|| {
        let root = WORKDIR.get_or_init(|| tempfile::tempdir().unwrap()).path().to_path_buf();
        PRESETS
            .iter()
            .map(|&p| {
                let dir = root.join(p);
                let cfg = ExperimentConfig::preset(p).unwrap();
                let t0 = Instant::now();
                let out = run_preset(&cfg, Some(&dir)).unwrap();
                (
                    p.to_string(),
                    PresetRun {
                        out,
                        dir,
                        elapsed: t0.elapsed(),
                    },
                )
            })
            .collect()
    })
}

fn preset(name: &str) -> &'static PresetRun {
    &preset_runs().iter().find(|(n, _)| n == name).unwrap().1
}

#[test]
fn criterion_07a_fdal_beats_source_only() {
    let cmp = preset("compare-dann");
    let base = preset("source-only");
    let el = cmp.elapsed + base.elapsed;
    let row = |m: &str, d: &str| cmp.out.table.row(m, d).unwrap().mean;
    let (js, pearson) = (row("fdal", "js_shifted"), row("fdal", "pearson_chi2"));
    let source_only = base.out.table.rows[0].mean;
    let fast = el < Duration::from_secs(600);
    report(
        "7a (f-DAL beats source-only)",
        pearson > source_only && js > source_only && fast,
        format!(
            "pearson {pearson:.4}, js {js:.4} vs source-only {source_only:.4} (mean target accuracy), {:.0}s",
            secs(el)
        ),
    );
}

#[test]
fn criterion_07b_fdal_js_close_to_dann() {
    let cmp = preset("compare-dann");
    let row = |m: &str, d: &str| cmp.out.table.row(m, d).unwrap().mean;
    let (dann, js) = (row("dann", "js_shifted"), row("fdal", "js_shifted"));
    report(
        "7b (f-DAL js >= DANN - 1 point)",
        js >= dann - 0.01,
        format!("f-DAL js {:.2}% vs DANN {:.2}%", 100.0 * js, 100.0 * dann),
    );
}

#[test]
fn criterion_07c_lhat_approaches_phi_prime_one() {
    let cmp = preset("compare-dann");
    let target = get_spec("js_shifted", None).unwrap().phi_prime_at_one().representative();
    let mut shrunk = 0;
    let mut detail = Vec::new();
    let runs: Vec<_> = cmp
        .out
        .cells
        .iter()
        .filter(|c| c.cell.method == Method::Fdal && c.cell.divergence == "js_shifted")
        .collect();
    for c in &runs {
        let first = (c.metrics.rows.first().unwrap().lhat_tgt - target).abs();
        let last = (c.metrics.last().unwrap().lhat_tgt - target).abs();
        if last < first {
            shrunk += 1;
        }
        detail.push(format!("s{} {first:.3}->{last:.3}", c.cell.seed));
    }
    report(
        "7c (|lhat_tgt - phi'(1)| shrinks)",
        shrunk >= 4 && runs.len() == 5,
        format!("{shrunk}/{} seeds shrink [{}]", runs.len(), detail.join(", ")),
    );
}

#[test]
fn criterion_08_label_shift_slopes() {
    let ls = preset("label-shift");
    let rep = ls.out.label_shift.as_ref().unwrap();
    let fdal = rep.mean_slope("fdal-js_shifted").unwrap();
    let dann = rep.mean_slope("dann-js_shifted").unwrap();
    let pass = fdal >= dann && ls.elapsed < Duration::from_secs(900);
    report(
        "8 (label-shift slope)",
        pass,
        format!(
            "mean slope f-DAL {fdal:.4} vs DANN {dann:.4} (accuracy per nat), {:.0}s",
            secs(ls.elapsed)
        ),
    );
}

#[test]
fn criterion_09_wilcoxon() {
    let p = wilcoxon_signed_rank(&[1.0, 2.0, 3.0]).p_value;
    let base = [0.3, -1.2, 2.5, 0.7, -0.1, 1.9, 4.0];
    let ref_p = wilcoxon_signed_rank(&base).p_value;
    let invariant = [1e-3, 0.5, 7.0, 1e4].iter().all(|c| {
        let scaled: Vec<f64> = base.iter().map(|v| v * c).collect();
        (wilcoxon_signed_rank(&scaled).p_value - ref_p).abs() < 1e-12
    });
    report(
        "9 (Wilcoxon)",
        (p - 0.25).abs() < 1e-12 && invariant,
        format!("[1,2,3] -> p = {p}, scale invariant {invariant}"),
    );
}

#[test]
fn criterion_10_reproducibility() {
    let mut bad = Vec::new();
    for (name, run) in preset_runs() {
        let again = run.dir.with_file_name(format!("{name}-rerun"));
        let cfg = ExperimentConfig::load(&run.dir.join(MANIFEST)).unwrap();
        run_preset(&cfg, Some(&again)).unwrap();
        for f in differences(&tree(&run.dir), &tree(&again)) {
            bad.push(format!("{name}/{f}"));
        }
    }
    report(
        "10 (reproducibility)",
        bad.is_empty(),
        format!("{} presets re-run from manifest, differing files {bad:?}", PRESETS.len()),
    );
}
