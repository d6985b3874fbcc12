//! The adversarial training loop, its configuration and per-epoch metrics.
//!
//! Each step minimizes `task − eta·dst` with one backward pass. The
//! auxiliary branch sits behind a gradient reversal node, so ĥ' ascends the
//! discrepancy while g descends `task + eta·λ·dst` and ĥ descends `task`.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datasets::DADataset;
use crate::divergence::{get_spec, DivergenceSpec};
use crate::error::{Error, Result};
use crate::models::{
    dann_forward, fdal_forward, fmt_f64, AnyModel, DannModel, FdalModel, ForwardOptions, ModelConfig,
};
use crate::nn::{clip_grad_norm, Sgd};
use crate::rng;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fdal,
    Dann,
    SourceOnly,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fdal => "fdal",
            Method::Dann => "dann",
            Method::SourceOnly => "source_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub divergence: String,
    pub gamma: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub weight_decay: f64,
    pub eta: f64,
    pub lambda_grl: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub g_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    /// Fill the `wall_ms` column; off keeps metric files byte-stable.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Fdal,
            divergence: "js_shifted".into(),
            gamma: None,
            epochs: 30,
            batch_size: 128,
            lr: 0.01,
            momentum: 0.9,
            nesterov: true,
            weight_decay: 0.002,
            eta: 0.5,
            lambda_grl: 0.6,
            grad_clip: 10.0,
            seed: 0,
            eval_every: 1,
            g_hidden: vec![64, 64],
            head_hidden: vec![32],
            record_timing: false,
        }
    }
}

impl TrainConfig {
    pub fn spec(&self) -> Result<DivergenceSpec> {
        Ok(get_spec(&self.divergence, self.gamma)?)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        let checks = [
            (self.epochs > 0, "epochs must be positive"),
            (self.batch_size > 0, "batch_size must be positive"),
            (self.eval_every > 0, "eval_every must be positive"),
            (pos(self.lr), "lr must be positive"),
            (nonneg(self.momentum) && self.momentum < 1.0, "momentum must lie in [0, 1)"),
            (nonneg(self.weight_decay), "weight_decay must be nonnegative"),
            (nonneg(self.eta), "eta must be nonnegative"),
            (nonneg(self.lambda_grl), "lambda_grl must be nonnegative"),
            (pos(self.grad_clip), "grad_clip must be positive"),
            (!self.g_hidden.is_empty(), "g_hidden needs at least one layer"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.into()));
            }
        }
        if self.method == Method::Fdal {
            self.spec()?;
        }
        Ok(())
    }

    fn model_config(&self, input_dim: usize, k: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            num_classes: k,
            g_hidden: self.g_hidden.clone(),
            head_hidden: self.head_hidden.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub source_risk: f64,
    pub target_risk: f64,
    pub dst: f64,
    pub lhat_src: f64,
    pub lhat_tgt: f64,
    pub source_acc: f64,
    pub target_acc: f64,
    pub wall_ms: u64,
}

/// Losses recorded at one optimizer step, before the update.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub task_loss: f64,
    pub dst: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<EpochMetrics>,
    pub steps: Vec<StepRecord>,
    /// Target-label reads that happened inside update steps. Always zero
    /// for a correct loop; tests assert it.
    pub label_reads_during_updates: usize,
    pub label_reads_total: usize,
}

pub const METRICS_HEADER: &str =
    "epoch,source_risk,target_risk,dst,lhat_src,lhat_tgt,source_acc,target_acc,wall_ms";

impl RunMetrics {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{METRICS_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.epoch,
                fmt_f64(r.source_risk),
                fmt_f64(r.target_risk),
                fmt_f64(r.dst),
                fmt_f64(r.lhat_src),
                fmt_f64(r.lhat_tgt),
                fmt_f64(r.source_acc),
                fmt_f64(r.target_acc),
                r.wall_ms
            );
        }
        out
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.rows.last()
    }

    pub fn final_target_acc(&self) -> f64 {
        self.last().map_or(f64::NAN, |r| r.target_acc)
    }
}

/// Anything that maps a feature batch to class scores.
pub trait Classifier {
    fn class_scores(&self, x: &Tensor) -> Result<Tensor>;
}

impl Classifier for FdalModel {
    fn class_scores(&self, x: &Tensor) -> Result<Tensor> {
        self.scores(x)
    }
}

impl Classifier for DannModel {
    fn class_scores(&self, x: &Tensor) -> Result<Tensor> {
        self.scores(x)
    }
}

impl Classifier for AnyModel {
    fn class_scores(&self, x: &Tensor) -> Result<Tensor> {
        self.scores(x)
    }
}

/// Argmax accuracy and mean cross-entropy over a labeled dataset.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, ds: &DADataset) -> Result<(f64, f64)> {
    let labels = ds
        .eval_labels()
        .ok_or_else(|| Error::Dataset("evaluation needs labels".into()))?;
    let scores = model.class_scores(ds.features())?;
    Ok(accuracy_and_loss(&scores, labels))
}

pub fn accuracy_and_loss(scores: &Tensor, labels: &[usize]) -> (f64, f64) {
    let pred = scores.argmax_rows();
    let n = labels.len() as f64;
    let correct = pred.iter().zip(labels).filter(|(p, y)| p == y).count() as f64;
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = scores.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
    }
    (correct / n, loss / n)
}

/// Trains f-DAL with the divergence named in the config. `SourceOnly`
/// runs the same loop without the discrepancy branch.
pub fn train(cfg: &TrainConfig, source: &DADataset, target: &DADataset) -> Result<(FdalModel, RunMetrics)> {
    if cfg.method == Method::Dann {
        return Err(Error::Config("use train_dann for the dann method".into()));
    }
    match run(cfg, source, target)? {
        (AnyModel::Fdal(m), metrics) => Ok((m, metrics)),
        _ => unreachable!("fdal and source-only produce f-DAL models"),
    }
}

/// Trains the global-discriminator baseline.
pub fn train_dann(cfg: &TrainConfig, source: &DADataset, target: &DADataset) -> Result<(DannModel, RunMetrics)> {
    let cfg = TrainConfig {
        method: Method::Dann,
        ..cfg.clone()
    };
    match run(&cfg, source, target)? {
        (AnyModel::Dann(m), metrics) => Ok((m, metrics)),
        _ => unreachable!("dann produces a dann model"),
    }
}

/// Cycles through a permutation of `0..n`, reshuffling after each pass.
struct Stream {
    order: Vec<usize>,
    pos: usize,
}

impl Stream {
    fn new(n: usize, r: &mut rng::Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(r);
        Self { order, pos: 0 }
    }

    fn take(&mut self, count: usize, r: &mut rng::Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            if self.pos == self.order.len() {
                self.order.shuffle(r);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Dispatches on `cfg.method`.
pub fn run(cfg: &TrainConfig, source: &DADataset, target: &DADataset) -> Result<(AnyModel, RunMetrics)> {
    cfg.validate()?;
    let ys_all = source
        .train_labels()
        .ok_or_else(|| Error::Dataset("the source domain must be labeled".into()))?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::Dataset("empty dataset".into()));
    }
    if source.dim() != target.dim() {
        return Err(Error::Dataset(format!(
            "source has {} features, target has {}",
            source.dim(),
            target.dim()
        )));
    }
    let k = source.num_classes();
    let mcfg = cfg.model_config(source.dim(), k);
    let mut model = match cfg.method {
        Method::Fdal | Method::SourceOnly => {
            let spec = if cfg.method == Method::Fdal {
                cfg.spec()?
            } else {
                get_spec(&cfg.divergence, cfg.gamma).or_else(|_| get_spec("js_shifted", None))?
            };
            AnyModel::Fdal(FdalModel::new(&mcfg, spec, cfg.lambda_grl, cfg.seed)?)
        }
        Method::Dann => AnyModel::Dann(DannModel::new(&mcfg, cfg.lambda_grl, cfg.seed)?),
    };
    let opts = ForwardOptions {
        with_dst: cfg.method != Method::SourceOnly,
        ..ForwardOptions::default()
    };
    let mut opt = Sgd::new(cfg.lr, cfg.momentum, cfg.nesterov, cfg.weight_decay);
    let mut br = rng::stream(cfg.seed, rng::streams::BATCHES);
    let mut src_stream = Stream::new(source.len(), &mut br);
    let mut tgt_stream = Stream::new(target.len(), &mut br);
    let steps_per_epoch = source.len().div_ceil(cfg.batch_size);
    let mut metrics = RunMetrics::default();
    let mut tape = Tape::new();
    let clock = Instant::now();

    for epoch in 1..=cfg.epochs {
        let reads_before = target.label_reads();
        let (mut dst_sum, mut ls_sum, mut lt_sum) = (0.0, 0.0, 0.0);
        for step in 0..steps_per_epoch {
            let remaining = source.len() - step * cfg.batch_size;
            let b = remaining.min(cfg.batch_size);
            let si = src_stream.take(b, &mut br);
            let ti = tgt_stream.take(b, &mut br);
            let xs = source.features().select_rows(&si);
            let ys: Vec<usize> = si.iter().map(|&i| ys_all[i]).collect();
            let xt = target.features().select_rows(&ti);

            tape.clear();
            let (task, dst, ls, lt, grads) = match &model {
                AnyModel::Fdal(m) => {
                    let pass = fdal_forward(&mut tape, m, &xs, &ys, &xt, &opts)?;
                    let total = combine(&mut tape, pass.task_loss, pass.dst, cfg.eta)?;
                    check_finite(&tape, total, epoch, step)?;
                    tape.backward(total)?;
                    let g = m.grads(&tape, &pass);
                    (pass.task_loss, pass.dst, pass.lhat_src, pass.lhat_tgt, (g, total))
                }
                AnyModel::Dann(m) => {
                    let pass = dann_forward(&mut tape, m, &xs, &ys, &xt, &opts)?;
                    let total = combine(&mut tape, pass.task_loss, pass.dst, cfg.eta)?;
                    check_finite(&tape, total, epoch, step)?;
                    tape.backward(total)?;
                    let g = m.grads(&tape, &pass);
                    (pass.task_loss, pass.dst, 0.0, 0.0, (g, total))
                }
            };
            let (mut grads, total) = grads;
            let dst_v = tape.value(dst).item();
            metrics.steps.push(StepRecord {
                epoch,
                step,
                task_loss: tape.value(task).item(),
                dst: dst_v,
                total: tape.value(total).item(),
            });
            dst_sum += dst_v;
            ls_sum += ls;
            lt_sum += lt;

            clip_grad_norm(&mut grads, cfg.grad_clip);
            let mut params = match &mut model {
                AnyModel::Fdal(m) => m.params_mut(),
                AnyModel::Dann(m) => m.params_mut(),
            };
            opt.step(&mut params, &grads);
            if !model.is_finite() {
                return Err(Error::NonFiniteTraining {
                    what: "parameter",
                    epoch,
                    step,
                });
            }
        }
        metrics.label_reads_during_updates += target.label_reads() - reads_before;

        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            let (source_acc, source_risk) = evaluate(&model, source)?;
            let (target_acc, target_risk) = match target.eval_labels() {
                Some(labels) => accuracy_and_loss(&model.scores(target.features())?, labels),
                None => (f64::NAN, f64::NAN),
            };
            let n = steps_per_epoch as f64;
            metrics.rows.push(EpochMetrics {
                epoch,
                source_risk,
                target_risk,
                dst: dst_sum / n,
                lhat_src: ls_sum / n,
                lhat_tgt: lt_sum / n,
                source_acc,
                target_acc,
                wall_ms: if cfg.record_timing {
                    clock.elapsed().as_millis() as u64
                } else {
                    0
                },
            });
        }
    }
    metrics.label_reads_total = target.label_reads();
    Ok((model, metrics))
}

fn combine(tape: &mut Tape, task: Var, dst: Var, eta: f64) -> Result<Var> {
    let weighted = tape.scale(dst, eta);
    Ok(tape.sub(task, weighted)?)
}

fn check_finite(tape: &Tape, total: Var, epoch: usize, step: usize) -> Result<()> {
    if tape.value(total).item().is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteTraining {
            what: "loss",
            epoch,
            step,
        })
    }
}
