//! Experiment presets: configuration, grid execution and artifacts.
//!
//! A preset directory holds `manifest.toml` (the fully resolved
//! configuration), `comparison.csv` / `comparison.txt`, one
//! `cells/<id>/metrics.csv` per run and, for `label-shift`,
//! `label_shift.csv` plus `slopes.csv`. Running again from the manifest
//! rewrites every file with identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::datasets::{js_label_distance, make_gaussian_shift, make_rotated_moons, resample_label_shift, DADataset, GaussianShift};
use crate::divergence::FiniteDistribution;
use crate::error::io_err;
use crate::models::fmt_f64;
use crate::report::{ComparisonTable, Format};
use crate::stats::{mean, ols_slope};
use crate::trainer::{run, Method, RunMetrics, TrainConfig};
use crate::{Error, Result};

pub const PRESETS: &[&str] = &["compare-dann", "divergence-sweep", "gamma-sweep", "label-shift", "source-only"];

pub const MANIFEST: &str = "manifest.toml";

/// Environment variable holding a comma-separated seed list that replaces
/// `harness.seeds`.
pub const SEED_ENV: &str = "FDAL_SEED";

pub const SWEEP_DIVERGENCES: [&str; 7] = [
    "js_shifted",
    "pearson_chi2",
    "kl",
    "kl_rev",
    "tv",
    "sq_hellinger",
    "neyman_chi2",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// `rotated_moons` or `gaussian_shift`.
    pub generator: String,
    pub n: usize,
    pub rotation_deg: f64,
    pub noise: f64,
    pub dim: usize,
    pub mean_shift: f64,
    pub cov_scale: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            generator: "rotated_moons".into(),
            n: 2000,
            rotation_deg: 30.0,
            noise: 0.1,
            dim: 2,
            mean_shift: 1.0,
            cov_scale: 1.0,
        }
    }
}

impl DataConfig {
    /// Source and target sets for one seed.
    pub fn generate(&self, seed: u64) -> Result<(DADataset, DADataset)> {
        match self.generator.as_str() {
            "rotated_moons" => make_rotated_moons(self.n, self.rotation_deg, self.noise, seed),
            "gaussian_shift" => make_gaussian_shift(&GaussianShift::new(self.n, self.dim, self.mean_shift, self.cov_scale), seed),
            other => Err(Error::Config(format!("unknown generator {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub out: PathBuf,
    /// Divergences of `divergence-sweep`.
    pub divergences: Vec<String>,
    /// γ values of `gamma-sweep`.
    pub gammas: Vec<f64>,
    /// δ grid of `label-shift`; the target marginal is `[0.5+δ, 0.5−δ]`.
    pub deltas: Vec<f64>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            jobs: 1,
            out: PathBuf::from("runs"),
            divergences: SWEEP_DIVERGENCES.iter().map(|s| s.to_string()).collect(),
            gammas: vec![2.0, 3.0, 4.0],
            deltas: vec![0.0, 0.1, 0.2, 0.3, 0.4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    #[serde(default)]
    pub trainer: TrainConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub harness: HarnessConfig,
}

/// Learning rate of every preset. The trainer default of 0.01 comes from a
/// convolutional setup; the two-layer toy networks here need larger steps.
pub const PRESET_LR: f64 = 0.03;

impl ExperimentConfig {
    /// Built-in configuration of a preset.
    pub fn preset(name: &str) -> Result<Self> {
        if !PRESETS.contains(&name) {
            return Err(Error::Config(format!(
                "unknown preset {name:?}; expected one of {}",
                PRESETS.join(", ")
            )));
        }
        Ok(Self {
            preset: name.into(),
            trainer: TrainConfig {
                lr: PRESET_LR,
                ..TrainConfig::default()
            },
            data: DataConfig::default(),
            harness: HarnessConfig::default(),
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    /// Applies `key.path=value` overrides; see [`apply_overrides`].
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        apply_overrides(self, overrides)
    }

    /// Replaces the seed list from [`SEED_ENV`] when it is set.
    pub fn with_seed_env(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.harness.seeds = parse_seeds(&v)?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !PRESETS.contains(&self.preset.as_str()) {
            return Err(Error::Config(format!("unknown preset {:?}", self.preset)));
        }
        if self.harness.seeds.is_empty() {
            return Err(Error::Config("harness.seeds is empty".into()));
        }
        if self.harness.jobs == 0 {
            return Err(Error::Config("harness.jobs must be positive".into()));
        }
        if self.preset == "label-shift" {
            if self.harness.deltas.len() < 2 {
                return Err(Error::Config("label-shift needs at least two deltas".into()));
            }
            if self.harness.deltas.iter().any(|d| !(0.0..0.5).contains(d)) {
                return Err(Error::Config("label-shift deltas must lie in [0, 0.5)".into()));
            }
        }
        let mut t = self.trainer.clone();
        for c in self.cells() {
            t.method = c.method;
            t.divergence = c.divergence.clone();
            t.gamma = c.gamma;
            t.validate()?;
        }
        Ok(())
    }

    /// Grid of runs in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let arms: Vec<(Method, String, Option<f64>)> = match self.preset.as_str() {
            "compare-dann" => vec![
                (Method::Dann, "js_shifted".into(), None),
                (Method::Fdal, "js_shifted".into(), None),
                (Method::Fdal, "pearson_chi2".into(), None),
            ],
            "divergence-sweep" => self
                .harness
                .divergences
                .iter()
                .map(|d| (Method::Fdal, d.clone(), None))
                .collect(),
            "gamma-sweep" => std::iter::once((Method::Fdal, "js_shifted".to_string(), None))
                .chain(self.harness.gammas.iter().map(|&g| (Method::Fdal, "gamma_js".to_string(), Some(g))))
                .collect(),
            "label-shift" => vec![
                (Method::Dann, "js_shifted".into(), None),
                (Method::Fdal, "js_shifted".into(), None),
            ],
            "source-only" => vec![(Method::SourceOnly, self.trainer.divergence.clone(), None)],
            _ => Vec::new(),
        };
        let deltas: Vec<Option<f64>> = if self.preset == "label-shift" {
            self.harness.deltas.iter().map(|&d| Some(d)).collect()
        } else {
            vec![None]
        };
        let mut out = Vec::new();
        for (method, divergence, gamma) in &arms {
            for &delta in &deltas {
                for &seed in &self.harness.seeds {
                    out.push(Cell {
                        method: *method,
                        divergence: divergence.clone(),
                        gamma: *gamma,
                        delta,
                        seed,
                    });
                }
            }
        }
        out
    }
}

/// Applies `key.path=value` overrides to any TOML-shaped config. Values are
/// read as TOML and fall back to a bare string; unknown keys are rejected
/// by the target type.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(cfg: &T, overrides: &[String]) -> Result<T> {
    let cfg_err = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
    let mut root: toml::Table = toml::from_str(&toml::to_string(cfg).map_err(|e| cfg_err(&e))?).map_err(|e| cfg_err(&e))?;
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
        let value = parse_value(raw.trim());
        let path: Vec<&str> = key.trim().split('.').collect();
        let (last, parents) = path.split_last().ok_or_else(|| Error::Config("empty override key".into()))?;
        let mut table = &mut root;
        for p in parents {
            table = table
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("{key}: {p} is not a section")))?;
        }
        table.insert(last.to_string(), value);
    }
    let text = toml::to_string(&root).map_err(|e| cfg_err(&e))?;
    toml::from_str(&text).map_err(|e| cfg_err(&e))
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Parses `0,1,2` into a seed list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds = s
        .split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<u64>().map_err(|_| Error::Config(format!("bad seed {p:?}"))))
        .collect::<Result<Vec<u64>>>()?;
    if seeds.is_empty() {
        return Err(Error::Config("empty seed list".into()));
    }
    Ok(seeds)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub divergence: String,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub seed: u64,
}

impl Cell {
    /// Row label shared by all seeds of one arm.
    pub fn arm(&self) -> String {
        match self.gamma {
            Some(g) => format!("{}-{}-g{}", self.method.as_str(), self.divergence, g),
            None => format!("{}-{}", self.method.as_str(), self.divergence),
        }
    }

    pub fn id(&self) -> String {
        match self.delta {
            Some(d) => format!("{}-d{}-s{}", self.arm(), d, self.seed),
            None => format!("{}-s{}", self.arm(), self.seed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub cell: Cell,
    pub target_acc: f64,
    pub metrics: RunMetrics,
    /// Set when training diverged; `target_acc` is then NaN.
    pub failure: Option<String>,
}

/// Trains one cell and writes its metrics under `dir` when given.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell, dir: Option<&Path>) -> Result<CellOutcome> {
    let wrap = |e: Error| Error::Cell {
        cell: cell.id(),
        source: Box::new(e),
    };
    let (source, target) = cfg.data.generate(cell.seed).map_err(wrap)?;
    let target = match cell.delta {
        Some(d) => {
            let m = FiniteDistribution::new(vec![0.5 + d, 0.5 - d]).map_err(|e| wrap(e.into()))?;
            resample_label_shift(&target, &m, cell.seed).map_err(wrap)?
        }
        None => target,
    };
    let tc = TrainConfig {
        method: cell.method,
        divergence: cell.divergence.clone(),
        gamma: cell.gamma,
        seed: cell.seed,
        ..cfg.trainer.clone()
    };
    let (metrics, failure) = match run(&tc, &source, &target) {
        Ok((_, m)) => (m, None),
        Err(e @ Error::NonFiniteTraining { .. }) => (RunMetrics::default(), Some(e.to_string())),
        Err(e) => return Err(wrap(e)),
    };
    if let Some(dir) = dir {
        let d = dir.join("cells").join(cell.id());
        fs::create_dir_all(&d).map_err(io_err(&d)).map_err(wrap)?;
        let (p, body) = match &failure {
            None => (d.join("metrics.csv"), metrics.to_csv()),
            Some(msg) => (d.join("error.txt"), format!("{msg}\n")),
        };
        fs::write(&p, body).map_err(io_err(&p)).map_err(wrap)?;
    }
    Ok(CellOutcome {
        cell: cell.clone(),
        target_acc: if failure.is_some() { f64::NAN } else { metrics.final_target_acc() },
        metrics,
        failure,
    })
}

/// Per-δ mean accuracies and fitted slopes of the label-shift preset.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelShiftReport {
    pub deltas: Vec<f64>,
    /// `js_label_distance` between the balanced source marginal and each
    /// target marginal, in nats.
    pub js: Vec<f64>,
    /// `arm → [δ index][seed index]` target accuracies.
    pub accs: BTreeMap<String, Vec<Vec<f64>>>,
    /// `arm → per-seed slope of accuracy on js`.
    pub slopes: BTreeMap<String, Vec<f64>>,
}

impl LabelShiftReport {
    pub fn mean_slope(&self, arm: &str) -> Option<f64> {
        self.slopes.get(arm).map(|s| mean(s))
    }

    pub fn to_csv(&self, seeds: &[u64]) -> String {
        let mut out = String::from("arm,delta,js,mean");
        for s in seeds {
            out.push_str(&format!(",acc_s{s}"));
        }
        out.push('\n');
        for (arm, rows) in &self.accs {
            for (i, accs) in rows.iter().enumerate() {
                let cells: Vec<String> = accs.iter().map(|&a| fmt_f64(a)).collect();
                out.push_str(&format!(
                    "{arm},{},{},{},{}\n",
                    fmt_f64(self.deltas[i]),
                    fmt_f64(self.js[i]),
                    fmt_f64(mean(accs)),
                    cells.join(",")
                ));
            }
        }
        out
    }

    pub fn slopes_csv(&self, seeds: &[u64]) -> String {
        let mut out = String::from("arm,mean_slope");
        for s in seeds {
            out.push_str(&format!(",slope_s{s}"));
        }
        out.push('\n');
        for (arm, s) in &self.slopes {
            let cells: Vec<String> = s.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&format!("{arm},{},{}\n", fmt_f64(mean(s)), cells.join(",")));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct PresetOutput {
    pub config: ExperimentConfig,
    pub table: ComparisonTable,
    pub label_shift: Option<LabelShiftReport>,
    pub cells: Vec<CellOutcome>,
}

impl PresetOutput {
    /// `(cell id, message)` for every cell whose training diverged.
    pub fn failures(&self) -> Vec<(String, String)> {
        self.cells
            .iter()
            .filter_map(|o| o.failure.as_ref().map(|f| (o.cell.id(), f.clone())))
            .collect()
    }
}

/// Runs the grid of `cfg`, writing artifacts under `out` when given.
pub fn run_preset(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PresetOutput> {
    cfg.validate()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let p = dir.join(MANIFEST);
        fs::write(&p, cfg.to_toml()?).map_err(io_err(&p))?;
    }
    let cells = cfg.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.harness.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| run_cell(cfg, c, out))
            .collect::<Result<Vec<CellOutcome>>>()
    })?;

    let seeds = cfg.harness.seeds.clone();
    let mut arms: Vec<(String, Cell)> = Vec::new();
    for o in &outcomes {
        let arm = o.cell.arm();
        if !arms.iter().any(|(a, _)| *a == arm) {
            arms.push((arm, o.cell.clone()));
        }
    }
    let acc = |arm: &str, delta: Option<f64>, seed: u64| -> f64 {
        outcomes
            .iter()
            .find(|o| o.cell.arm() == arm && o.cell.delta == delta && o.cell.seed == seed)
            .map(|o| o.target_acc)
            .unwrap_or(f64::NAN)
    };
    // The comparison table of label-shift uses the largest shift.
    let table_delta = if cfg.preset == "label-shift" {
        cfg.harness.deltas.last().copied()
    } else {
        None
    };
    let rows = arms
        .iter()
        .map(|(arm, c)| {
            (
                c.method.as_str().to_string(),
                c.divergence.clone(),
                c.gamma,
                seeds.iter().map(|&s| acc(arm, table_delta, s)).collect(),
            )
        })
        .collect();
    let table = ComparisonTable::new(seeds.clone(), rows)?;

    let label_shift = if cfg.preset == "label-shift" {
        let uniform = FiniteDistribution::uniform(2)?;
        let js = cfg
            .harness
            .deltas
            .iter()
            .map(|&d| js_label_distance(&uniform, &FiniteDistribution::new(vec![0.5 + d, 0.5 - d])?))
            .collect::<Result<Vec<f64>>>()?;
        let mut accs = BTreeMap::new();
        let mut slopes = BTreeMap::new();
        for (arm, _) in &arms {
            let grid: Vec<Vec<f64>> = cfg
                .harness
                .deltas
                .iter()
                .map(|&d| seeds.iter().map(|&s| acc(arm, Some(d), s)).collect())
                .collect();
            let per_seed: Vec<f64> = (0..seeds.len())
                .map(|j| {
                    let y: Vec<f64> = grid.iter().map(|row| row[j]).collect();
                    ols_slope(&js, &y)
                })
                .collect();
            accs.insert(arm.clone(), grid);
            slopes.insert(arm.clone(), per_seed);
        }
        Some(LabelShiftReport {
            deltas: cfg.harness.deltas.clone(),
            js,
            accs,
            slopes,
        })
    } else {
        None
    };

    if let Some(dir) = out {
        crate::report::emit_report(&table, Format::Csv, &dir.join("comparison.csv"))?;
        crate::report::emit_report(&table, Format::Text, &dir.join("comparison.txt"))?;
        if let Some(ls) = &label_shift {
            let p = dir.join("label_shift.csv");
            fs::write(&p, ls.to_csv(&seeds)).map_err(io_err(&p))?;
            let p = dir.join("slopes.csv");
            fs::write(&p, ls.slopes_csv(&seeds)).map_err(io_err(&p))?;
        }
    }
    Ok(PresetOutput {
        config: cfg.clone(),
        table,
        label_shift,
        cells: outcomes,
    })
}
