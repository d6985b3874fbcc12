//! Discrepancies between domains: exhaustive hypothesis-restricted sups on
//! finite instances, a sample-based variational estimator, and the batch
//! surrogate used during adversarial training.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::divergence::{DivergenceSpec, FiniteDistribution};
use crate::error::{Error, Result};
use crate::nn::{Adam, Mlp};
use crate::rng::{self, Rng};
use crate::tensor::{Tape, Tensor, Var};

/// Slack allowed when checking the triangle inequality of a loss table.
const TRIANGLE_TOL: f64 = 1e-12;

/// A finite domain adaptation problem with an explicit hypothesis set.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDAInstance {
    ps: FiniteDistribution,
    pt: FiniteDistribution,
    fs: Vec<usize>,
    ft: Vec<usize>,
    hypotheses: Vec<Vec<usize>>,
    loss: Vec<Vec<f64>>,
    loss_scale: f64,
}

/// `c·1[a ≠ b]`.
pub fn zero_one_loss(k: usize, c: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|a| (0..k).map(|b| if a == b { 0.0 } else { c }).collect())
        .collect()
}

/// `c·|a − b|/(k − 1)`.
pub fn ordinal_loss(k: usize, c: f64) -> Vec<Vec<f64>> {
    let d = (k.max(2) - 1) as f64;
    (0..k)
        .map(|a| (0..k).map(|b| c * (a as f64 - b as f64).abs() / d).collect())
        .collect()
}

/// Every map `{0..m-1} → {0..k-1}`, in lexicographic order.
pub fn all_functions(m: usize, k: usize) -> Vec<Vec<usize>> {
    let total = k.pow(m as u32);
    (0..total)
        .map(|mut code| {
            let mut f = vec![0; m];
            for slot in f.iter_mut().rev() {
                *slot = code % k;
                code /= k;
            }
            f
        })
        .collect()
}

impl FiniteDAInstance {
    pub fn new(
        ps: FiniteDistribution,
        pt: FiniteDistribution,
        fs: Vec<usize>,
        ft: Vec<usize>,
        hypotheses: Vec<Vec<usize>>,
        loss: Vec<Vec<f64>>,
        loss_scale: f64,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::Instance(m));
        let m = ps.len();
        if pt.len() != m || fs.len() != m || ft.len() != m {
            return bad(format!(
                "sizes differ: ps {m}, pt {}, fs {}, ft {}",
                pt.len(),
                fs.len(),
                ft.len()
            ));
        }
        let k = loss.len();
        if k == 0 || loss.iter().any(|r| r.len() != k) {
            return bad("loss table must be square and nonempty".into());
        }
        if !(loss_scale > 0.0 && loss_scale.is_finite()) {
            return bad(format!("loss scale must be positive, got {loss_scale}"));
        }
        for a in 0..k {
            if loss[a][a] != 0.0 {
                return bad(format!("loss({a},{a}) = {} must be 0", loss[a][a]));
            }
            for b in 0..k {
                let v = loss[a][b];
                if !(v >= 0.0 && v <= loss_scale) {
                    return bad(format!("loss({a},{b}) = {v} outside [0, {loss_scale}]"));
                }
                for c in 0..k {
                    if loss[a][c] > loss[a][b] + loss[b][c] + TRIANGLE_TOL {
                        return bad(format!("triangle inequality fails for labels {a}, {b}, {c}"));
                    }
                }
            }
        }
        if hypotheses.is_empty() {
            return bad("hypothesis set is empty".into());
        }
        for (name, f) in [("fs", &fs), ("ft", &ft)]
            .into_iter()
            .chain(hypotheses.iter().map(|h| ("hypothesis", h)))
        {
            if f.len() != m {
                return bad(format!("{name} has {} entries, expected {m}", f.len()));
            }
            if let Some(y) = f.iter().find(|&&y| y >= k) {
                return bad(format!("{name} uses label {y} with only {k} labels"));
            }
        }
        Ok(Self {
            ps,
            pt,
            fs,
            ft,
            hypotheses,
            loss,
            loss_scale,
        })
    }

    pub fn ps(&self) -> &FiniteDistribution {
        &self.ps
    }

    pub fn pt(&self) -> &FiniteDistribution {
        &self.pt
    }

    pub fn fs(&self) -> &[usize] {
        &self.fs
    }

    pub fn ft(&self) -> &[usize] {
        &self.ft
    }

    pub fn hypotheses(&self) -> &[Vec<usize>] {
        &self.hypotheses
    }

    pub fn loss_table(&self) -> &[Vec<f64>] {
        &self.loss
    }

    pub fn loss_scale(&self) -> f64 {
        self.loss_scale
    }

    pub fn num_points(&self) -> usize {
        self.ps.len()
    }

    pub fn num_labels(&self) -> usize {
        self.loss.len()
    }

    pub fn loss(&self, a: usize, b: usize) -> f64 {
        self.loss[a][b]
    }

    pub fn is_symmetric_loss(&self) -> bool {
        let k = self.num_labels();
        (0..k).all(|a| (0..k).all(|b| self.loss[a][b] == self.loss[b][a]))
    }

    /// `E_p[ℓ(f(x), g(x))]`.
    pub fn expected_loss(&self, p: &FiniteDistribution, f: &[usize], g: &[usize]) -> f64 {
        p.probs()
            .iter()
            .zip(f.iter().zip(g))
            .map(|(&w, (&a, &b))| w * self.loss[a][b])
            .sum()
    }

    pub fn source_risk(&self, h: &[usize]) -> f64 {
        self.expected_loss(&self.ps, h, &self.fs)
    }

    pub fn target_risk(&self, h: &[usize]) -> f64 {
        self.expected_loss(&self.pt, h, &self.ft)
    }

    /// `E_ps[ℓ(h,h')] − E_pt[φ*(ℓ(h,h'))]`.
    pub fn pair_gap(&self, h: &[usize], hp: &[usize], spec: &DivergenceSpec) -> Result<f64> {
        let src = self.expected_loss(&self.ps, h, hp);
        let mut tgt = 0.0;
        for ((&w, &a), &b) in self.pt.probs().iter().zip(h).zip(hp) {
            tgt += w * spec.conjugate(self.loss[a][b])?;
        }
        Ok(src - tgt)
    }

    /// Errors unless every loss value lies in the conjugate domain.
    pub fn check_loss_in_domain(&self, spec: &DivergenceSpec) -> Result<()> {
        let dom = spec.conjugate_domain();
        for row in &self.loss {
            for &v in row {
                if !dom.contains(v) {
                    return Err(Error::Precondition(format!(
                        "loss value {v} lies outside dom {}* = {dom}",
                        spec.label()
                    )));
                }
            }
        }
        Ok(())
    }

    /// One line per point: `x,ps,pt,fs,ft,h0,h1,...`, preceded by the loss
    /// table as `#loss` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("#loss_scale,{}\n", self.loss_scale);
        for row in &self.loss {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("#loss,{}\n", cells.join(",")));
        }
        let hs: Vec<String> = (0..self.hypotheses.len()).map(|i| format!("h{i}")).collect();
        out.push_str(&format!("x,ps,pt,fs,ft,{}\n", hs.join(",")));
        for x in 0..self.num_points() {
            let hv: Vec<String> = self.hypotheses.iter().map(|h| h[x].to_string()).collect();
            out.push_str(&format!(
                "{x},{},{},{},{},{}\n",
                self.ps.probs()[x],
                self.pt.probs()[x],
                self.fs[x],
                self.ft[x],
                hv.join(",")
            ));
        }
        out
    }
}

/// Shape of the random finite instances used by the fuzz corpora.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceConfig {
    pub min_points: usize,
    pub max_points: usize,
    pub label_counts: Vec<usize>,
    pub loss_scale: f64,
    /// Use `c·|a−b|/(k−1)` instead of the scaled 0-1 loss when `k ≥ 3`.
    pub ordinal_for_three: bool,
    pub max_hypotheses: usize,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            min_points: 2,
            max_points: 6,
            label_counts: vec![2, 3],
            loss_scale: 1.0,
            ordinal_for_three: false,
            max_hypotheses: 81,
        }
    }
}

fn dirichlet_uniform(m: usize, rng: &mut Rng) -> Result<FiniteDistribution> {
    let w: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let w: Vec<f64> = w.into_iter().map(|v: f64| v.max(1e-300)).collect();
    Ok(FiniteDistribution::from_weights(&w)?)
}

/// Draws a random instance: densities Dirichlet(1,..,1), labels uniform,
/// and all `k^m` hypotheses when that is at most `max_hypotheses`;
/// otherwise a random subset of that size that contains `fs` and `ft`.
pub fn random_instance(cfg: &InstanceConfig, rng: &mut Rng) -> Result<FiniteDAInstance> {
    let m = rng.random_range(cfg.min_points..=cfg.max_points);
    let k = *cfg
        .label_counts
        .choose(rng)
        .ok_or_else(|| Error::Instance("no label counts configured".into()))?;
    let ps = dirichlet_uniform(m, rng)?;
    let pt = dirichlet_uniform(m, rng)?;
    let fs: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
    let ft: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
    let total = (k as u64).saturating_pow(m as u32);
    let hypotheses = if total <= cfg.max_hypotheses as u64 {
        all_functions(m, k)
    } else {
        let mut hs = vec![fs.clone()];
        if ft != fs {
            hs.push(ft.clone());
        }
        while hs.len() < cfg.max_hypotheses {
            let h: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
            if !hs.contains(&h) {
                hs.push(h);
            }
        }
        hs
    };
    let loss = if k >= 3 && cfg.ordinal_for_three {
        ordinal_loss(k, cfg.loss_scale)
    } else {
        zero_one_loss(k, cfg.loss_scale)
    };
    FiniteDAInstance::new(ps, pt, fs, ft, hypotheses, loss, cfg.loss_scale)
}

/// `sup_{h' ∈ H}` of the pair gap for a fixed `h`, in absolute value when
/// `use_abs` is set.
pub fn dhh(instance: &FiniteDAInstance, h: &[usize], spec: &DivergenceSpec, use_abs: bool) -> Result<f64> {
    instance.check_loss_in_domain(spec)?;
    if h.len() != instance.num_points() || h.iter().any(|&y| y >= instance.num_labels()) {
        return Err(Error::Instance(format!("hypothesis {h:?} does not fit the instance")));
    }
    let mut best = f64::NEG_INFINITY;
    for hp in instance.hypotheses() {
        let g = instance.pair_gap(h, hp, spec)?;
        best = best.max(if use_abs { g.abs() } else { g });
    }
    Ok(best)
}

/// `sup_{h ∈ H} dhh(h)`.
pub fn dh(instance: &FiniteDAInstance, spec: &DivergenceSpec, use_abs: bool) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for h in instance.hypotheses() {
        best = best.max(dhh(instance, h, spec, use_abs)?);
    }
    Ok(best)
}

/// Result of [`dst_surrogate`]: the scalar on the tape plus the domain
/// means of ℓ̂ as plain numbers.
#[derive(Clone, Copy, Debug)]
pub struct DstOutput {
    pub dst: Var,
    pub lhat_src: f64,
    pub lhat_tgt: f64,
}

/// `mean_s ℓ̂ − mean_t φ*(ℓ̂)` with `ℓ̂ = a(ĥ'(z)[argmax ĥ(z)])`.
///
/// `h_src`/`h_tgt` are the task classifier's scores, used only to pick a
/// column; `hp_src`/`hp_tgt` are the auxiliary scores on the tape.
pub fn dst_surrogate(
    tape: &mut Tape,
    h_src: &Tensor,
    hp_src: Var,
    h_tgt: &Tensor,
    hp_tgt: Var,
    spec: &DivergenceSpec,
) -> Result<DstOutput> {
    for (h, hp) in [(h_src, hp_src), (h_tgt, hp_tgt)] {
        let hp_shape = tape.value(hp).shape();
        if h.shape().len() != 2 || hp_shape.len() != 2 || h.shape() != hp_shape {
            return Err(Error::Topology(format!(
                "classifier scores {:?} and auxiliary scores {:?} differ",
                h.shape(),
                hp_shape
            )));
        }
    }
    let lhat_s = lhat(tape, h_src, hp_src, spec)?;
    let lhat_t = lhat(tape, h_tgt, hp_tgt, spec)?;
    let lhat_src = mean_of(tape.value(lhat_s));
    let lhat_tgt = mean_of(tape.value(lhat_t));
    let s = *spec;
    let conj = tape.map_with_derivative(lhat_t, move |t| {
        Ok((
            s.conjugate(t).map_err(|e| e.to_string())?,
            s.conjugate_prime(t).map_err(|e| e.to_string())?,
        ))
    })?;
    let ms = tape.mean(lhat_s);
    let mt = tape.mean(conj);
    let dst = tape.sub(ms, mt)?;
    Ok(DstOutput {
        dst,
        lhat_src,
        lhat_tgt,
    })
}

fn lhat(tape: &mut Tape, h: &Tensor, hp: Var, spec: &DivergenceSpec) -> Result<Var> {
    let idx = h.argmax_rows();
    let picked = tape.gather_columns(hp, &idx)?;
    let s = *spec;
    Ok(tape.map_with_derivative(picked, move |x| Ok((s.activation(x), s.activation_prime(x))))?)
}

fn mean_of(t: &Tensor) -> f64 {
    t.data().iter().sum::<f64>() / t.len() as f64
}

/// Discriminator architecture for [`variational_estimate`].
#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptConfig {
    pub steps: usize,
    pub lr: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            lr: 0.05,
        }
    }
}

/// Lower-bound estimate of `D_φ(P_s ‖ P_t)` from samples: maximizes
/// `mean_s T − mean_t φ*(T)` over `T = a ∘ net` by full-batch Adam ascent
/// and returns the objective at the final parameters.
pub fn variational_estimate(
    samples_s: &Tensor,
    samples_t: &Tensor,
    spec: &DivergenceSpec,
    net_cfg: &NetConfig,
    opt_cfg: &OptConfig,
    seed: u64,
) -> Result<f64> {
    if samples_s.is_empty() || samples_t.is_empty() {
        return Err(Error::Precondition("both sample sets must be nonempty".into()));
    }
    if samples_s.shape().len() != 2 || samples_t.shape().len() != 2 || samples_s.cols() != samples_t.cols() {
        return Err(Error::Precondition(format!(
            "sample matrices {:?} and {:?} are incompatible",
            samples_s.shape(),
            samples_t.shape()
        )));
    }
    let mut sizes = vec![samples_s.cols()];
    sizes.extend(&net_cfg.hidden);
    sizes.push(1);
    let mut net = Mlp::new(&sizes, &mut rng::stream(seed, rng::streams::INIT))?;
    let mut opt = Adam::new(opt_cfg.lr);
    let mut tape = Tape::new();
    for step in 0..=opt_cfg.steps {
        tape.clear();
        let bound = net.bind(&mut tape, step < opt_cfg.steps);
        let xs = tape.constant(samples_s.clone());
        let xt = tape.constant(samples_t.clone());
        let ts = net.forward(&mut tape, &bound, xs)?;
        let tt = net.forward(&mut tape, &bound, xt)?;
        let objective = variational_objective(&mut tape, ts, tt, spec)?;
        let value = tape.value(objective).item();
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective { step });
        }
        if step == opt_cfg.steps {
            return Ok(value);
        }
        let neg = tape.neg(objective);
        tape.backward(neg)?;
        let grads = net.grads(&tape, &bound);
        let mut params: Vec<&mut Tensor> = net.params_mut().iter_mut().collect();
        opt.step(&mut params, &grads);
    }
    unreachable!("loop returns at the final step")
}

/// `mean(a(raw_s)) − mean(φ*(a(raw_t)))` for raw network outputs.
pub fn variational_objective(tape: &mut Tape, raw_s: Var, raw_t: Var, spec: &DivergenceSpec) -> Result<Var> {
    let s = *spec;
    let act = move |x: f64| Ok((s.activation(x), s.activation_prime(x)));
    let ts = tape.map_with_derivative(raw_s, act)?;
    let tt = tape.map_with_derivative(raw_t, act)?;
    let conj = tape.map_with_derivative(tt, move |t| {
        Ok((
            s.conjugate(t).map_err(|e| e.to_string())?,
            s.conjugate_prime(t).map_err(|e| e.to_string())?,
        ))
    })?;
    let ms = tape.mean(ts);
    let mt = tape.mean(conj);
    Ok(tape.sub(ms, mt)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{analytic_f_divergence, get_spec, gamma_rescale};

    fn dist(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(p.to_vec()).unwrap()
    }

    fn two_point(ps: &[f64], pt: &[f64], c: f64) -> FiniteDAInstance {
        FiniteDAInstance::new(
            dist(ps),
            dist(pt),
            vec![0, 1],
            vec![0, 1],
            all_functions(2, 2),
            zero_one_loss(2, c),
            c,
        )
        .unwrap()
    }

    #[test]
    fn all_functions_enumerates() {
        let fs = all_functions(2, 3);
        assert_eq!(fs.len(), 9);
        assert_eq!(fs[0], vec![0, 0]);
        assert_eq!(fs[5], vec![1, 2]);
    }

    #[test]
    fn construction_rejects_bad_losses() {
        let p = dist(&[0.5, 0.5]);
        let mk = |loss: Vec<Vec<f64>>| {
            FiniteDAInstance::new(p.clone(), p.clone(), vec![0, 0], vec![0, 0], all_functions(2, 2), loss, 1.0)
        };
        assert!(mk(vec![vec![0.1, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(mk(vec![vec![0.0, 2.0], vec![1.0, 0.0]]).is_err());
        let k3 = vec![vec![0.0, 0.1, 1.0], vec![0.1, 0.0, 0.1], vec![1.0, 0.1, 0.0]];
        let err = FiniteDAInstance::new(p.clone(), p.clone(), vec![0, 0], vec![0, 0], all_functions(2, 3), k3, 1.0);
        assert!(matches!(err, Err(Error::Instance(m)) if m.contains("triangle")));
    }

    #[test]
    fn tv_same_distribution_is_zero() {
        let inst = two_point(&[0.3, 0.7], &[0.3, 0.7], 0.5);
        let tv = get_spec("tv", None).unwrap();
        for h in inst.hypotheses() {
            assert_eq!(dhh(&inst, h, &tv, true).unwrap(), 0.0);
        }
        assert_eq!(dh(&inst, &tv, true).unwrap(), 0.0);
    }

    #[test]
    fn tv_two_points_quarter_of_event_gap() {
        // sup over events of |ps(A) − pt(A)| is 0.25, so dHΔH = 0.5.
        let inst = two_point(&[0.5, 0.5], &[0.25, 0.75], 0.5);
        let tv = get_spec("tv", None).unwrap();
        let v = dh(&inst, &tv, true).unwrap();
        assert!((v - 0.5 * 0.5 * 0.5).abs() < 1e-15);
        let inst1 = two_point(&[0.5, 0.5], &[0.25, 0.75], 1.0);
        let tv2 = gamma_rescale(&tv, 2.0).unwrap();
        assert!((dh(&inst1, &tv2, true).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn loss_outside_domain_is_named() {
        let inst = two_point(&[0.5, 0.5], &[0.25, 0.75], 1.0);
        let js = get_spec("js", None).unwrap();
        let err = dh(&inst, &js, true).unwrap_err();
        assert!(err.to_string().contains("js"), "{err}");
    }

    #[test]
    fn signed_pearson_below_analytic() {
        let mut r = rng::seeded(11);
        let p = get_spec("pearson_chi2", None).unwrap();
        for _ in 0..50 {
            let inst = random_instance(&InstanceConfig::default(), &mut r).unwrap();
            let d = dh(&inst, &p, false).unwrap();
            let a = analytic_f_divergence(inst.ps(), inst.pt(), &p).unwrap();
            assert!(d <= a + 1e-9);
        }
    }

    #[test]
    fn random_instances_respect_caps() {
        let mut r = rng::seeded(5);
        let cfg = InstanceConfig {
            min_points: 6,
            max_points: 6,
            label_counts: vec![3],
            ..InstanceConfig::default()
        };
        let inst = random_instance(&cfg, &mut r).unwrap();
        assert_eq!(inst.hypotheses().len(), 81);
        assert!(inst.hypotheses().contains(&inst.fs().to_vec()));
        assert!(inst.hypotheses().contains(&inst.ft().to_vec()));
        let csv = inst.to_csv();
        assert!(csv.lines().count() == 1 + 3 + 1 + 6);
    }

    #[test]
    fn surrogate_zero_logits_collapses() {
        let spec = get_spec("js_shifted", None).unwrap();
        let mut tape = Tape::new();
        let h = Tensor::from_rows(&[vec![0.3, -1.0], vec![2.0, 0.0]]).unwrap();
        let hp_s = tape.param(Tensor::zeros(&[2, 2]));
        let hp_t = tape.param(Tensor::zeros(&[2, 2]));
        let out = dst_surrogate(&mut tape, &h, hp_s, &h, hp_t, &spec).unwrap();
        // −log 2 − φ*(−log 2) = −2 log 2, which is the spec's φ(1) offset.
        let v = tape.value(out.dst).item();
        assert!((v - spec.shift_constant()).abs() < 1e-15, "{v}");
        assert!((out.lhat_src + 2f64.ln()).abs() < 1e-15);

        let p = get_spec("pearson_chi2", None).unwrap();
        let out = dst_surrogate(&mut tape, &h, hp_s, &h, hp_t, &p).unwrap();
        assert_eq!(tape.value(out.dst).item(), 0.0);
    }

    #[test]
    fn surrogate_rejects_width_mismatch() {
        let spec = get_spec("kl", None).unwrap();
        let mut tape = Tape::new();
        let h = Tensor::zeros(&[2, 3]);
        let hp = tape.param(Tensor::zeros(&[2, 2]));
        assert!(matches!(
            dst_surrogate(&mut tape, &h, hp, &h, hp, &spec),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn estimate_identical_samples_is_nonpositive() {
        let x = Tensor::matrix(50, 1, (0..50).map(|i| i as f64 / 25.0 - 1.0).collect()).unwrap();
        let kl = get_spec("kl", None).unwrap();
        let opt = OptConfig { steps: 100, lr: 0.05 };
        let v = variational_estimate(&x, &x, &kl, &NetConfig::default(), &opt, 0).unwrap();
        assert!(v <= 1e-12, "{v}");
    }

    #[test]
    fn estimate_rejects_mismatched_widths() {
        let kl = get_spec("kl", None).unwrap();
        let x = Tensor::zeros(&[2, 1]);
        let bad = Tensor::zeros(&[2, 3]);
        assert!(matches!(
            variational_estimate(&x, &bad, &kl, &NetConfig::default(), &OptConfig::default(), 0),
            Err(Error::Precondition(_))
        ));
    }
}
