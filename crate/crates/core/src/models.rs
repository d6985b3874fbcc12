//! Featurizer, task classifier and auxiliary classifier networks, the
//! global-discriminator baseline, their forward passes and checkpoints.

use std::fmt::Write as _;
use std::path::Path;

use crate::discrepancy::dst_surrogate;
use crate::divergence::{get_spec, gamma_rescale, DivergenceSpec};
use crate::error::{io_err, Error, Result};
use crate::nn::{BoundMlp, Mlp};
use crate::rng::{self, Rng};
use crate::tensor::{Tape, Tensor, Var};

pub const CHECKPOINT_HEADER: &str = "# fdal-checkpoint v1";

/// Layer widths shared by both model families.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub num_classes: usize,
    /// Featurizer widths after the input; the last one is the feature size.
    pub g_hidden: Vec<usize>,
    /// Hidden widths of ĥ, ĥ' and the global discriminator.
    pub head_hidden: Vec<usize>,
}

impl ModelConfig {
    pub fn new(input_dim: usize, num_classes: usize) -> Self {
        Self {
            input_dim,
            num_classes,
            g_hidden: vec![64, 64],
            head_hidden: vec![32],
        }
    }

    fn g_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim];
        s.extend(&self.g_hidden);
        s
    }

    fn feat_dim(&self) -> usize {
        *self.g_hidden.last().unwrap_or(&self.input_dim)
    }

    fn head_sizes(&self, out: usize) -> Vec<usize> {
        let mut s = vec![self.feat_dim()];
        s.extend(&self.head_hidden);
        s.push(out);
        s
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes < 2 || self.g_hidden.is_empty() {
            return Err(Error::Topology(format!(
                "need input_dim > 0, at least 2 classes and one featurizer layer: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Which parameter groups receive gradients in a pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trainable {
    pub g: bool,
    pub h: bool,
    pub aux: bool,
}

impl Trainable {
    pub const ALL: Trainable = Trainable {
        g: true,
        h: true,
        aux: true,
    };
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardOptions {
    pub trainable: Trainable,
    /// With `false` the auxiliary branch sees features without the
    /// reversal node, so its gradient reaches g unmodified.
    pub reverse_gradient: bool,
    /// Replaces ĥ's scores with the constant basis vector `e_i` when
    /// selecting the auxiliary column.
    pub hhat_override: Option<usize>,
    /// With `false` only the task branch is recorded and `dst` is a
    /// constant zero.
    pub with_dst: bool,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            trainable: Trainable::ALL,
            reverse_gradient: true,
            hhat_override: None,
            with_dst: true,
        }
    }
}

/// Featurizer g, task classifier ĥ and auxiliary classifier ĥ'.
#[derive(Clone, Debug, PartialEq)]
pub struct FdalModel {
    pub g: Mlp,
    pub h_hat: Mlp,
    pub h_hat_prime: Mlp,
    pub lambda_grl: f64,
    pub spec: DivergenceSpec,
}

/// Tape handles for one f-DAL pass.
#[derive(Clone, Debug)]
pub struct FdalPass {
    pub task_loss: Var,
    pub dst: Var,
    pub lhat_src: f64,
    pub lhat_tgt: f64,
    bound: [BoundMlp; 3],
}

impl FdalModel {
    pub fn new(cfg: &ModelConfig, spec: DivergenceSpec, lambda_grl: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut r = rng::stream(seed, rng::streams::INIT);
        let g = Mlp::new(&cfg.g_sizes(), &mut r)?;
        let h_hat = Mlp::new(&cfg.head_sizes(cfg.num_classes), &mut r)?;
        let h_hat_prime = Mlp::new(&cfg.head_sizes(cfg.num_classes), &mut r)?;
        Self::from_parts(g, h_hat, h_hat_prime, lambda_grl, spec)
    }

    pub fn from_parts(
        g: Mlp,
        h_hat: Mlp,
        h_hat_prime: Mlp,
        lambda_grl: f64,
        spec: DivergenceSpec,
    ) -> Result<Self> {
        if h_hat.sizes() != h_hat_prime.sizes() {
            return Err(Error::Topology(format!(
                "auxiliary classifier {:?} must match the task classifier {:?}",
                h_hat_prime.sizes(),
                h_hat.sizes()
            )));
        }
        check_heads(&g, &h_hat, lambda_grl)?;
        Ok(Self {
            g,
            h_hat,
            h_hat_prime,
            lambda_grl,
            spec,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.h_hat.output_dim()
    }

    pub fn scores(&self, x: &Tensor) -> Result<Tensor> {
        self.h_hat.predict(&self.g.predict(x)?)
    }

    pub fn nets(&self) -> [&Mlp; 3] {
        [&self.g, &self.h_hat, &self.h_hat_prime]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.g.params_mut().iter_mut().collect();
        v.extend(self.h_hat.params_mut().iter_mut());
        v.extend(self.h_hat_prime.params_mut().iter_mut());
        v
    }

    pub fn is_finite(&self) -> bool {
        self.nets().iter().all(|n| n.is_finite())
    }

    /// Gradients in the order of [`FdalModel::params_mut`].
    pub fn grads(&self, tape: &Tape, pass: &FdalPass) -> Vec<Vec<f64>> {
        let mut out = self.g.grads(tape, &pass.bound[0]);
        out.extend(self.h_hat.grads(tape, &pass.bound[1]));
        out.extend(self.h_hat_prime.grads(tape, &pass.bound[2]));
        out
    }
}

fn check_heads(g: &Mlp, h_hat: &Mlp, lambda_grl: f64) -> Result<()> {
    if g.output_dim() != h_hat.input_dim() {
        return Err(Error::Topology(format!(
            "featurizer emits {} features but the classifier expects {}",
            g.output_dim(),
            h_hat.input_dim()
        )));
    }
    if !(lambda_grl >= 0.0 && lambda_grl.is_finite()) {
        return Err(Error::Topology(format!(
            "gradient reversal coefficient must be nonnegative, got {lambda_grl}"
        )));
    }
    Ok(())
}

fn task_branch(
    tape: &mut Tape,
    g: &Mlp,
    h: &Mlp,
    bg: &BoundMlp,
    bh: &BoundMlp,
    xs: &Tensor,
    ys: &[usize],
    xt: &Tensor,
) -> Result<(Var, Var, Var, Var)> {
    if xs.rows() == 0 || xt.rows() == 0 || ys.len() != xs.rows() {
        return Err(Error::Precondition(format!(
            "batches need rows and one label per source row: {} rows, {} labels, {} target rows",
            xs.rows(),
            ys.len(),
            xt.rows()
        )));
    }
    let xs_v = tape.constant(xs.clone());
    let xt_v = tape.constant(xt.clone());
    let zs = g.forward(tape, bg, xs_v)?;
    let zt = g.forward(tape, bg, xt_v)?;
    let hs = h.forward(tape, bh, zs)?;
    let task = tape.softmax_cross_entropy(hs, ys)?;
    Ok((task, zs, zt, hs))
}

fn reversed(tape: &mut Tape, z: Var, lambda: f64, reverse: bool) -> Result<Var> {
    Ok(if reverse { tape.grad_reversal(z, lambda)? } else { z })
}

/// Task loss on the source batch and the surrogate discrepancy between the
/// two batches, with the auxiliary branch behind a gradient reversal node.
pub fn fdal_forward(
    tape: &mut Tape,
    model: &FdalModel,
    xs: &Tensor,
    ys: &[usize],
    xt: &Tensor,
    opts: &ForwardOptions,
) -> Result<FdalPass> {
    let bg = model.g.bind(tape, opts.trainable.g);
    let bh = model.h_hat.bind(tape, opts.trainable.h);
    let bp = model.h_hat_prime.bind(tape, opts.trainable.aux);
    let (task_loss, zs, zt, hs) = task_branch(tape, &model.g, &model.h_hat, &bg, &bh, xs, ys, xt)?;
    if !opts.with_dst {
        let dst = tape.constant(Tensor::scalar(0.0));
        return Ok(FdalPass {
            task_loss,
            dst,
            lhat_src: 0.0,
            lhat_tgt: 0.0,
            bound: [bg, bh, bp],
        });
    }
    let k = model.num_classes();
    let (sel_s, sel_t) = match opts.hhat_override {
        Some(i) if i >= k => {
            return Err(Error::Precondition(format!("basis index {i} with {k} classes")))
        }
        Some(i) => (basis_rows(xs.rows(), k, i), basis_rows(xt.rows(), k, i)),
        None => (
            tape.value(hs).clone(),
            model.h_hat.predict(tape.value(zt))?,
        ),
    };
    let zs_r = reversed(tape, zs, model.lambda_grl, opts.reverse_gradient)?;
    let zt_r = reversed(tape, zt, model.lambda_grl, opts.reverse_gradient)?;
    let hp_s = model.h_hat_prime.forward(tape, &bp, zs_r)?;
    let hp_t = model.h_hat_prime.forward(tape, &bp, zt_r)?;
    let out = dst_surrogate(tape, &sel_s, hp_s, &sel_t, hp_t, &model.spec)?;
    Ok(FdalPass {
        task_loss,
        dst: out.dst,
        lhat_src: out.lhat_src,
        lhat_tgt: out.lhat_tgt,
        bound: [bg, bh, bp],
    })
}

fn basis_rows(rows: usize, k: usize, i: usize) -> Tensor {
    let mut t = Tensor::zeros(&[rows, k]);
    for r in 0..rows {
        t.data_mut()[r * k + i] = 1.0;
    }
    t
}

/// Featurizer, task classifier and one global domain discriminator.
#[derive(Clone, Debug, PartialEq)]
pub struct DannModel {
    pub g: Mlp,
    pub h_hat: Mlp,
    pub discriminator: Mlp,
    pub lambda_grl: f64,
}

#[derive(Clone, Debug)]
pub struct DannPass {
    pub task_loss: Var,
    pub dst: Var,
    /// Per-sample `log σ(D(z_s))`.
    pub src_terms: Var,
    /// Per-sample `log(1 − σ(D(z_t)))`.
    pub tgt_terms: Var,
    bound: [BoundMlp; 3],
}

impl DannModel {
    pub fn new(cfg: &ModelConfig, lambda_grl: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut r = rng::stream(seed, rng::streams::INIT);
        let g = Mlp::new(&cfg.g_sizes(), &mut r)?;
        let h_hat = Mlp::new(&cfg.head_sizes(cfg.num_classes), &mut r)?;
        let discriminator = Mlp::new(&cfg.head_sizes(1), &mut r)?;
        Self::from_parts(g, h_hat, discriminator, lambda_grl)
    }

    pub fn from_parts(g: Mlp, h_hat: Mlp, discriminator: Mlp, lambda_grl: f64) -> Result<Self> {
        if discriminator.output_dim() != 1 || discriminator.input_dim() != g.output_dim() {
            return Err(Error::Topology(format!(
                "discriminator {:?} must map {} features to one logit",
                discriminator.sizes(),
                g.output_dim()
            )));
        }
        check_heads(&g, &h_hat, lambda_grl)?;
        Ok(Self {
            g,
            h_hat,
            discriminator,
            lambda_grl,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.h_hat.output_dim()
    }

    pub fn scores(&self, x: &Tensor) -> Result<Tensor> {
        self.h_hat.predict(&self.g.predict(x)?)
    }

    pub fn nets(&self) -> [&Mlp; 3] {
        [&self.g, &self.h_hat, &self.discriminator]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.g.params_mut().iter_mut().collect();
        v.extend(self.h_hat.params_mut().iter_mut());
        v.extend(self.discriminator.params_mut().iter_mut());
        v
    }

    pub fn is_finite(&self) -> bool {
        self.nets().iter().all(|n| n.is_finite())
    }

    pub fn grads(&self, tape: &Tape, pass: &DannPass) -> Vec<Vec<f64>> {
        let mut out = self.g.grads(tape, &pass.bound[0]);
        out.extend(self.h_hat.grads(tape, &pass.bound[1]));
        out.extend(self.discriminator.grads(tape, &pass.bound[2]));
        out
    }
}

/// Task loss and `mean_s log σ(D) + mean_t log(1 − σ(D))`.
pub fn dann_forward(
    tape: &mut Tape,
    model: &DannModel,
    xs: &Tensor,
    ys: &[usize],
    xt: &Tensor,
    opts: &ForwardOptions,
) -> Result<DannPass> {
    let bg = model.g.bind(tape, opts.trainable.g);
    let bh = model.h_hat.bind(tape, opts.trainable.h);
    let bd = model.discriminator.bind(tape, opts.trainable.aux);
    let (task_loss, zs, zt, _) = task_branch(tape, &model.g, &model.h_hat, &bg, &bh, xs, ys, xt)?;
    let zs_r = reversed(tape, zs, model.lambda_grl, opts.reverse_gradient)?;
    let zt_r = reversed(tape, zt, model.lambda_grl, opts.reverse_gradient)?;
    let ds = model.discriminator.forward(tape, &bd, zs_r)?;
    let dt = model.discriminator.forward(tape, &bd, zt_r)?;
    let src_terms = tape.log_sigmoid(ds);
    let neg_dt = tape.neg(dt);
    let tgt_terms = tape.log_sigmoid(neg_dt);
    let ms = tape.mean(src_terms);
    let mt = tape.mean(tgt_terms);
    let dst = tape.add(ms, mt)?;
    Ok(DannPass {
        task_loss,
        dst,
        src_terms,
        tgt_terms,
        bound: [bg, bh, bd],
    })
}

/// Outcome of [`dann_reduction_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReductionReport {
    /// Largest per-sample gap between the two source and target terms.
    pub max_term_deviation: f64,
    pub fdal_dst: f64,
    pub dann_dst: f64,
}

impl ReductionReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_term_deviation.max((self.fdal_dst - self.dann_dst).abs())
    }
}

/// Builds the global discriminator whose logit is column `i` of ĥ'.
pub fn discriminator_from_row(h_hat_prime: &Mlp, i: usize) -> Result<Mlp> {
    let k = h_hat_prime.output_dim();
    if i >= k {
        return Err(Error::Precondition(format!("basis index {i} with {k} classes")));
    }
    let mut params = h_hat_prime.params().to_vec();
    let n = params.len();
    let w = &params[n - 2];
    let col: Vec<f64> = (0..w.rows()).map(|r| w.get(r, i)).collect();
    params[n - 2] = Tensor::matrix(w.rows(), 1, col)?;
    params[n - 1] = Tensor::matrix(1, 1, vec![params[n - 1].data()[i]])?;
    let mut sizes = h_hat_prime.sizes().to_vec();
    *sizes.last_mut().expect("sizes") = 1;
    Mlp::from_params(&sizes, params)
}

/// Compares f-DAL's surrogate under a constant task classifier `e_i` with
/// the global-discriminator objective whose discriminator is column `i` of
/// ĥ'. With `override_hhat = false` the real ĥ selects the column instead.
pub fn dann_reduction_check(
    model: &FdalModel,
    xs: &Tensor,
    xt: &Tensor,
    i: usize,
    override_hhat: bool,
) -> Result<ReductionReport> {
    let spec = &model.spec;
    let ys = vec![0; xs.rows()];
    let opts = ForwardOptions {
        hhat_override: override_hhat.then_some(i),
        ..ForwardOptions::default()
    };
    let mut tape = Tape::new();
    let pass = fdal_forward(&mut tape, model, xs, &ys, xt, &opts)?;
    let fdal_dst = tape.value(pass.dst).item();

    let dann = DannModel::from_parts(
        model.g.clone(),
        model.h_hat.clone(),
        discriminator_from_row(&model.h_hat_prime, i)?,
        model.lambda_grl,
    )?;
    let mut dtape = Tape::new();
    let dpass = dann_forward(&mut dtape, &dann, xs, &ys, xt, &ForwardOptions::default())?;
    let dann_dst = dtape.value(dpass.dst).item();

    let column = |x: &Tensor, sel: Option<Vec<usize>>| -> Result<Vec<f64>> {
        let z = model.g.predict(x)?;
        let hp = model.h_hat_prime.predict(&z)?;
        let idx = sel.unwrap_or_else(|| vec![i; x.rows()]);
        Ok((0..x.rows()).map(|r| hp.get(r, idx[r])).collect())
    };
    let sel = |x: &Tensor| -> Result<Option<Vec<usize>>> {
        Ok(if override_hhat {
            None
        } else {
            Some(model.scores(x)?.argmax_rows())
        })
    };
    let cs = column(xs, sel(xs)?)?;
    let ct = column(xt, sel(xt)?)?;
    let mut worst = 0.0_f64;
    for (c, d) in cs.iter().zip(dtape.value(dpass.src_terms).data()) {
        worst = worst.max((spec.activation(*c) - d).abs());
    }
    for (c, d) in ct.iter().zip(dtape.value(dpass.tgt_terms).data()) {
        let fdal_term = -spec.conjugate(spec.activation(*c))?;
        worst = worst.max((fdal_term - d).abs());
    }
    Ok(ReductionReport {
        max_term_deviation: worst,
        fdal_dst,
        dann_dst,
    })
}

/// Either model family; the unit of checkpointing.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Fdal(FdalModel),
    Dann(DannModel),
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_net(out: &mut String, name: &str, net: &Mlp) {
    let sizes: Vec<String> = net.sizes().iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "net {name} {}", sizes.join(" "));
    for (j, p) in net.params().iter().enumerate() {
        let kind = if j % 2 == 0 { "weight" } else { "bias" };
        let _ = writeln!(out, "tensor {name}.{}.{kind} {} {}", j / 2, p.rows(), p.cols());
        let vals: Vec<String> = p.data().iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(out, "{}", vals.join(" "));
    }
}

impl AnyModel {
    pub fn scores(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            AnyModel::Fdal(m) => m.scores(x),
            AnyModel::Dann(m) => m.scores(x),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            AnyModel::Fdal(m) => m.is_finite(),
            AnyModel::Dann(m) => m.is_finite(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_HEADER}\n");
        match self {
            AnyModel::Fdal(m) => {
                let _ = writeln!(out, "kind fdal");
                let _ = writeln!(out, "divergence {}", m.spec.name());
                let gamma = m.spec.gamma().map(fmt_f64).unwrap_or_else(|| "none".into());
                let _ = writeln!(out, "gamma {gamma}");
                let _ = writeln!(out, "scale {}", fmt_f64(m.spec.scale()));
                let _ = writeln!(out, "lambda_grl {}", fmt_f64(m.lambda_grl));
                write_net(&mut out, "g", &m.g);
                write_net(&mut out, "h_hat", &m.h_hat);
                write_net(&mut out, "h_hat_prime", &m.h_hat_prime);
            }
            AnyModel::Dann(m) => {
                let _ = writeln!(out, "kind dann");
                let _ = writeln!(out, "lambda_grl {}", fmt_f64(m.lambda_grl));
                write_net(&mut out, "g", &m.g);
                write_net(&mut out, "h_hat", &m.h_hat);
                write_net(&mut out, "discriminator", &m.discriminator);
            }
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line: line + 1,
            message,
        };
        match lines.next() {
            Some((_, h)) if h.trim() == CHECKPOINT_HEADER => {}
            _ => return Err(err(0, format!("expected header `{CHECKPOINT_HEADER}`"))),
        }
        let mut meta = std::collections::BTreeMap::new();
        let mut nets: Vec<(String, Vec<usize>, Vec<Tensor>)> = Vec::new();
        while let Some((n, line)) = lines.next() {
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else { continue };
            match key {
                "net" => {
                    let name = parts.next().ok_or_else(|| err(n, "net without name".into()))?;
                    let sizes = parts
                        .map(|s| s.parse::<usize>().map_err(|e| err(n, format!("bad size `{s}`: {e}"))))
                        .collect::<Result<Vec<_>>>()?;
                    nets.push((name.to_string(), sizes, Vec::new()));
                }
                "tensor" => {
                    let dims: Vec<&str> = parts.collect();
                    if dims.len() != 3 {
                        return Err(err(n, "tensor line needs name rows cols".into()));
                    }
                    let rows: usize = dims[1].parse().map_err(|e| err(n, format!("rows: {e}")))?;
                    let cols: usize = dims[2].parse().map_err(|e| err(n, format!("cols: {e}")))?;
                    let (vn, values) = lines.next().ok_or_else(|| err(n, "missing tensor values".into()))?;
                    let data = values
                        .split_whitespace()
                        .map(|s| s.parse::<f64>().map_err(|e| err(vn, format!("bad value `{s}`: {e}"))))
                        .collect::<Result<Vec<_>>>()?;
                    let t = Tensor::matrix(rows, cols, data).map_err(|e| err(vn, e.to_string()))?;
                    nets.last_mut()
                        .ok_or_else(|| err(n, "tensor before any net".into()))?
                        .2
                        .push(t);
                }
                _ => {
                    let value = parts.collect::<Vec<_>>().join(" ");
                    meta.insert(key.to_string(), (n, value));
                }
            }
        }
        let get = |k: &str| -> Result<&str> {
            meta.get(k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| err(0, format!("missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            let v = get(k)?;
            v.parse::<f64>().map_err(|e| err(meta[k].0, format!("{k}: {e}")))
        };
        let mut built = Vec::new();
        for (name, sizes, params) in nets {
            built.push((name, Mlp::from_params(&sizes, params)?));
        }
        let mut take = |want: &str| -> Result<Mlp> {
            let pos = built
                .iter()
                .position(|(n, _)| n == want)
                .ok_or_else(|| err(0, format!("missing net `{want}`")))?;
            Ok(built.remove(pos).1)
        };
        let lambda = num("lambda_grl")?;
        match get("kind")? {
            "fdal" => {
                let gamma = match get("gamma")? {
                    "none" => None,
                    _ => Some(num("gamma")?),
                };
                let spec = get_spec(get("divergence")?, gamma)?;
                let scale = num("scale")?;
                let spec = if scale == 1.0 { spec } else { gamma_rescale(&spec, scale)? };
                let (g, h, hp) = (take("g")?, take("h_hat")?, take("h_hat_prime")?);
                Ok(AnyModel::Fdal(FdalModel::from_parts(g, h, hp, lambda, spec)?))
            }
            "dann" => {
                let (g, h, d) = (take("g")?, take("h_hat")?, take("discriminator")?);
                Ok(AnyModel::Dann(DannModel::from_parts(g, h, d, lambda)?))
            }
            other => Err(err(meta["kind"].0, format!("unknown model kind `{other}`"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// Random batch helper for tests and probes.
pub fn random_batch(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    use rand::Rng as _;
    let data = (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}
