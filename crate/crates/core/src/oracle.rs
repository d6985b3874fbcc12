//! Brute-force checks of the bounds and identities on finite instances.
//!
//! Every check returns a [`BoundReport`]. Inequalities report
//! `slack = rhs − lhs`; identities report `slack = −|lhs − rhs|`. Either
//! way a report passes iff `slack ≥ −SLACK_TOL`.

use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::discrepancy::{dh, dhh, random_instance, FiniteDAInstance, InstanceConfig};
use crate::divergence::{
    analytic_f_divergence, analytic_gamma_js, gamma_rescale, get_spec, raw_f_sum, DivergenceSpec, FiniteDistribution,
};
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const SLACK_TOL: f64 = 1e-9;

pub const STATEMENTS: &[&str] = &["thm1", "thm2", "prop1", "hdh", "dann-opt", "mdd-js"];

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub statement: String,
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    /// Set when a precondition failed; such a report is neither a pass nor
    /// a failure.
    pub skipped: Option<String>,
    /// Instance CSV and seed for a failing report.
    pub counterexample: Option<String>,
}

impl BoundReport {
    fn inequality(statement: &str, instance: String, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            statement: statement.into(),
            instance,
            lhs,
            rhs,
            slack,
            pass: slack >= -SLACK_TOL,
            skipped: None,
            counterexample: None,
        }
    }

    fn identity(statement: &str, instance: String, lhs: f64, rhs: f64) -> Self {
        let slack = -(lhs - rhs).abs();
        Self {
            slack,
            pass: slack >= -SLACK_TOL,
            ..Self::inequality(statement, instance, lhs, rhs)
        }
    }

    fn skipped(statement: &str, instance: String, reason: String) -> Self {
        Self {
            statement: statement.into(),
            instance,
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: f64::NAN,
            pass: false,
            skipped: Some(reason),
            counterexample: None,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.skipped.is_none() && !self.pass
    }

    fn with_counterexample(mut self, payload: impl FnOnce() -> String) -> Self {
        if self.is_failure() {
            self.counterexample = Some(payload());
        }
        self
    }
}

/// `½ Σ |ps − pt|`.
pub fn total_variation(ps: &FiniteDistribution, pt: &FiniteDistribution) -> f64 {
    0.5 * ps.probs().iter().zip(pt.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn describe(inst: &FiniteDAInstance) -> String {
    format!(
        "m={} k={} |H|={} c={}",
        inst.num_points(),
        inst.num_labels(),
        inst.hypotheses().len(),
        inst.loss_scale()
    )
}

fn is_zero_one(inst: &FiniteDAInstance) -> bool {
    let c = inst.loss_scale();
    let k = inst.num_labels();
    (0..k).all(|a| (0..k).all(|b| inst.loss(a, b) == if a == b { 0.0 } else { c }))
}

/// `R_T(h) ≤ R_S(h) + D_TV + min(E_ps|ft−fs|, E_pt|ft−fs|)` for binary
/// labels and `ℓ(a,b) = |a−b|`.
pub fn check_thm1(inst: &FiniteDAInstance, h: &[usize]) -> Result<BoundReport> {
    if inst.num_labels() != 2 || !is_zero_one(inst) || inst.loss_scale() != 1.0 {
        return Err(Error::Precondition(
            "the total-variation bound needs binary labels with ℓ(a,b) = |a − b|".into(),
        ));
    }
    let gap = |p: &FiniteDistribution| -> f64 {
        p.probs()
            .iter()
            .zip(inst.fs().iter().zip(inst.ft()))
            .map(|(w, (&s, &t))| w * (t as f64 - s as f64).abs())
            .sum()
    };
    let lhs = inst.target_risk(h);
    let rhs = inst.source_risk(h) + total_variation(inst.ps(), inst.pt()) + gap(inst.ps()).min(gap(inst.pt()));
    Ok(BoundReport::inequality("thm1", format!("{} h={h:?}", describe(inst)), lhs, rhs))
}

/// `λ* = min_{h ∈ H} R_S(h) + R_T(h)`.
pub fn ideal_joint_risk(inst: &FiniteDAInstance) -> f64 {
    inst.hypotheses()
        .iter()
        .map(|h| inst.source_risk(h) + inst.target_risk(h))
        .fold(f64::INFINITY, f64::min)
}

/// `R_T(h) ≤ R_S(h) + D^φ_{h,H} + λ*`, with the discrepancy taken in
/// absolute value. Reports a skip when the loss values leave dom φ* or the
/// loss is not symmetric.
pub fn check_thm2(inst: &FiniteDAInstance, h: &[usize], spec: &DivergenceSpec) -> Result<BoundReport> {
    let what = format!("{} spec={} h={h:?}", describe(inst), spec.label());
    if let Err(e) = inst.check_loss_in_domain(spec) {
        return Ok(BoundReport::skipped("thm2", what, e.to_string()));
    }
    if !inst.is_symmetric_loss() {
        return Ok(BoundReport::skipped("thm2", what, "loss is not symmetric".into()));
    }
    let lhs = inst.target_risk(h);
    let rhs = inst.source_risk(h) + dhh(inst, h, spec, true)? + ideal_joint_risk(inst);
    Ok(BoundReport::inequality("thm2", what, lhs, rhs))
}

/// Plugs `ℓ̂ = φ'(ps/pt)` into the variational objective and compares it
/// with the analytic divergence.
pub fn check_prop1(ps: &FiniteDistribution, pt: &FiniteDistribution, spec: &DivergenceSpec) -> Result<BoundReport> {
    let what = format!("m={} spec={}", ps.len(), spec.label());
    if ps.len() != pt.len() {
        return Err(Error::Precondition("ps and pt differ in length".into()));
    }
    let dom = spec.conjugate_domain();
    let mut lhs = 0.0;
    for (&s, &t) in ps.probs().iter().zip(pt.probs()) {
        if t == 0.0 {
            return Ok(BoundReport::skipped("prop1", what, "ps is not absolutely continuous w.r.t. pt".into()));
        }
        let d = spec.phi_prime(s / t)?;
        if d.subdifferential.is_some() {
            return Ok(BoundReport::skipped("prop1", what, format!("φ' is a set at ratio {}", s / t)));
        }
        if !dom.contains(d.value) {
            return Ok(BoundReport::skipped(
                "prop1",
                what,
                format!("φ'({}) = {} outside dom φ* = {dom}", s / t, d.value),
            ));
        }
        lhs += s * d.value - t * spec.conjugate(d.value)?;
    }
    lhs -= spec.shift_constant();
    let rhs = analytic_f_divergence(ps, pt, spec)?;
    Ok(BoundReport::identity("prop1", what, lhs, rhs))
}

/// `d_{H∆H} = 2 sup_{h,h'} |Ps(h ≠ h') − Pt(h ≠ h')|`.
pub fn hdh_divergence(inst: &FiniteDAInstance) -> f64 {
    let mut best = 0.0f64;
    let hs = inst.hypotheses();
    for h in hs {
        for hp in hs {
            let mut gap = 0.0;
            for (x, (a, b)) in h.iter().zip(hp).enumerate() {
                if a != b {
                    gap += inst.ps().probs()[x] - inst.pt().probs()[x];
                }
            }
            best = best.max(gap.abs());
        }
    }
    2.0 * best
}

/// The total-variation spec rescaled so that `φ*(t) = t` on `[−1, 1]`; with
/// the unscaled 0-1 loss its `D^φ_H` is exactly `½ d_{H∆H}`.
pub fn hdh_spec() -> Result<DivergenceSpec> {
    Ok(gamma_rescale(&get_spec("tv", None)?, 2.0)?)
}

/// Compares `D^φ_H` for [`hdh_spec`] with `½ d_{H∆H}` on a 0-1 instance.
pub fn check_hdh(inst: &FiniteDAInstance) -> Result<BoundReport> {
    if !is_zero_one(inst) || inst.loss_scale() != 1.0 {
        return Err(Error::Precondition("the H∆H comparison needs the unscaled 0-1 loss".into()));
    }
    let lhs = dh(inst, &hdh_spec()?, true)?;
    let rhs = 0.5 * hdh_divergence(inst);
    Ok(BoundReport::identity("hdh", describe(inst), lhs, rhs))
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `Σ ps log σ + Σ pt log(1 − σ)` for a per-atom discriminator output.
pub fn dann_objective(ps: &FiniteDistribution, pt: &FiniteDistribution, d: &[f64]) -> f64 {
    ps.probs()
        .iter()
        .zip(pt.probs())
        .zip(d)
        .map(|((&s, &t), &p)| xlogy(s, p) + xlogy(t, 1.0 - p))
        .sum()
}

/// The closed-form discriminator `ps/(ps+pt)` reaches `D_JS − 2 log 2`,
/// and 20 random perturbations of it never do better.
pub fn check_dann_optimum(ps: &FiniteDistribution, pt: &FiniteDistribution, rng: &mut Rng) -> Result<BoundReport> {
    let what = format!("m={}", ps.len());
    let opt: Vec<f64> = ps
        .probs()
        .iter()
        .zip(pt.probs())
        .map(|(&s, &t)| if s + t == 0.0 { 0.5 } else { s / (s + t) })
        .collect();
    let lhs = dann_objective(ps, pt, &opt);
    let rhs = analytic_f_divergence(ps, pt, &get_spec("js", None)?)? - 2.0 * 2f64.ln();
    let mut report = BoundReport::identity("dann-opt", what, lhs, rhs);
    for _ in 0..20 {
        let perturbed: Vec<f64> = opt
            .iter()
            .map(|&p| (p + rng.random_range(-0.1..0.1)).clamp(1e-6, 1.0 - 1e-6))
            .collect();
        let v = dann_objective(ps, pt, &perturbed);
        if v > lhs + SLACK_TOL {
            report.pass = false;
            report.slack = report.slack.min(lhs - v);
        }
    }
    Ok(report)
}

/// `max γ·d_{s,t} = (γ+1)·JS_γ + γ log γ − (γ+1) log(γ+1)`, with the
/// left side evaluated at the closed-form optimum `γps/(γps+pt)`.
pub fn check_mdd_gamma_js(ps: &FiniteDistribution, pt: &FiniteDistribution, gamma: f64) -> Result<BoundReport> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Precondition(format!("gamma must be positive, got {gamma}")));
    }
    let what = format!("m={} gamma={gamma}", ps.len());
    let mut lhs = 0.0;
    for (&s, &t) in ps.probs().iter().zip(pt.probs()) {
        let denom = gamma * s + t;
        if denom == 0.0 {
            continue;
        }
        let p = gamma * s / denom;
        lhs += gamma * xlogy(s, p) + xlogy(t, 1.0 - p);
    }
    let rhs = (gamma + 1.0) * analytic_gamma_js(ps, pt, gamma)? + gamma * gamma.ln() - (gamma + 1.0) * (gamma + 1.0).ln();
    Ok(BoundReport::identity("mdd-js", what, lhs, rhs))
}

/// Outcome of the inequality chain for one instance and spec.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport {
    /// `max_{h,h'} |R_S(h,h') − R^{φ*∘ℓ}_T(h,h')| − D^φ_{h,H}` over all `h`;
    /// at most zero by construction.
    pub pair_excess: f64,
    /// `max_h D^φ_{h,H} − D^φ_H`; at most zero.
    pub restricted_excess: f64,
    /// Signed `D^φ_H` minus the divergence, both with the constant offset
    /// removed; at most zero by the variational bound.
    pub signed_excess: f64,
    /// Absolute-value `D^φ_H` minus the divergence. Positive values are
    /// findings, not failures.
    pub abs_excess: f64,
}

/// Every link of the chain `|gap| ≤ D_{h,H} ≤ D_H ≤ D_φ` on one instance.
pub fn lemma1_chain(inst: &FiniteDAInstance, spec: &DivergenceSpec) -> Result<ChainReport> {
    inst.check_loss_in_domain(spec)?;
    let hs = inst.hypotheses();
    let mut pair_excess = f64::NEG_INFINITY;
    let mut restricted_excess = f64::NEG_INFINITY;
    let d_h = dh(inst, spec, true)?;
    for h in hs {
        let local = dhh(inst, h, spec, true)?;
        for hp in hs {
            pair_excess = pair_excess.max(inst.pair_gap(h, hp, spec)?.abs() - local);
        }
        restricted_excess = restricted_excess.max(local - d_h);
    }
    let raw = raw_f_sum(inst.ps(), inst.pt(), spec)?;
    Ok(ChainReport {
        pair_excess,
        restricted_excess,
        signed_excess: dh(inst, spec, false)? - raw,
        abs_excess: d_h - raw,
    })
}

/// Seed of the `i`-th instance in a corpus; a counterexample can be rebuilt
/// from it alone.
pub fn instance_seed(corpus_seed: u64, i: usize) -> u64 {
    corpus_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

/// Instance shape used by each statement's corpus.
pub fn corpus_config(statement: &str) -> Result<InstanceConfig> {
    Ok(match statement {
        "thm1" => InstanceConfig {
            label_counts: vec![2],
            max_hypotheses: 16,
            ..InstanceConfig::default()
        },
        "thm2" | "hdh" | "prop1" | "dann-opt" | "mdd-js" => InstanceConfig::default(),
        other => return Err(Error::Config(format!("unknown statement {other:?}"))),
    })
}

fn random_pair(rng: &mut Rng) -> Result<(FiniteDistribution, FiniteDistribution)> {
    let m = rng.random_range(2..=6);
    let mut draw = || -> Result<FiniteDistribution> {
        let w: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).map(|v: f64| v.max(1e-300)).collect();
        Ok(FiniteDistribution::from_weights(&w)?)
    };
    Ok((draw()?, draw()?))
}

/// Specs exercised by the Thm 2 corpus together with the loss scale that
/// puts the loss range inside their conjugate domain.
pub fn thm2_specs() -> Result<Vec<(DivergenceSpec, f64)>> {
    Ok(vec![
        (get_spec("pearson_chi2", None)?, 1.0),
        (get_spec("kl", None)?, 1.0),
        (get_spec("tv", None)?, 0.5),
        (hdh_spec()?, 1.0),
    ])
}

/// Catalog specs for Prop 1 (γ-parameterized rows at γ = 2).
pub fn prop1_specs() -> Result<Vec<DivergenceSpec>> {
    Ok(crate::divergence::catalog(2.0)?)
}

pub const MDD_GAMMAS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

/// Worst report over all hypotheses of an instance.
fn worst(reports: Vec<BoundReport>) -> Option<BoundReport> {
    let mut out: Option<BoundReport> = None;
    for r in reports {
        match &out {
            Some(cur) if cur.skipped.is_none() && (r.skipped.is_some() || r.slack >= cur.slack) => {}
            _ => out = Some(r),
        }
    }
    out
}

/// Reports for instance `i` of the corpus of `statement`.
pub fn corpus_instance(statement: &str, corpus_seed: u64, i: usize) -> Result<Vec<BoundReport>> {
    let seed = instance_seed(corpus_seed, i);
    let mut rng = rng::stream(seed, rng::streams::INSTANCES);
    let tag = |mut r: BoundReport| {
        r.instance = format!("#{i} seed={seed} {}", r.instance);
        r
    };
    let mut out = Vec::new();
    match statement {
        "thm1" => {
            let inst = random_instance(&corpus_config("thm1")?, &mut rng)?;
            let rs = inst
                .hypotheses()
                .iter()
                .map(|h| check_thm1(&inst, h))
                .collect::<Result<Vec<_>>>()?;
            if let Some(r) = worst(rs) {
                out.push(tag(r).with_counterexample(|| counterexample(&inst, seed)));
            }
        }
        "thm2" => {
            let base = random_instance(&corpus_config("thm2")?, &mut rng)?;
            for (spec, c) in thm2_specs()? {
                let inst = rescale_loss(&base, c)?;
                let rs = inst
                    .hypotheses()
                    .iter()
                    .map(|h| check_thm2(&inst, h, &spec))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(r) = worst(rs) {
                    out.push(tag(r).with_counterexample(|| counterexample(&inst, seed)));
                }
            }
        }
        "hdh" => {
            let inst = random_instance(&corpus_config("hdh")?, &mut rng)?;
            out.push(tag(check_hdh(&inst)?).with_counterexample(|| counterexample(&inst, seed)));
        }
        "prop1" => {
            let (ps, pt) = random_pair(&mut rng)?;
            for spec in prop1_specs()? {
                out.push(tag(check_prop1(&ps, &pt, &spec)?).with_counterexample(|| pair_csv(&ps, &pt, seed)));
            }
        }
        "dann-opt" => {
            let (ps, pt) = random_pair(&mut rng)?;
            out.push(tag(check_dann_optimum(&ps, &pt, &mut rng)?).with_counterexample(|| pair_csv(&ps, &pt, seed)));
        }
        "mdd-js" => {
            let (ps, pt) = random_pair(&mut rng)?;
            for g in MDD_GAMMAS {
                out.push(tag(check_mdd_gamma_js(&ps, &pt, g)?).with_counterexample(|| pair_csv(&ps, &pt, seed)));
            }
        }
        other => return Err(Error::Config(format!("unknown statement {other:?}"))),
    }
    Ok(out)
}

/// Runs `n` corpus instances of one statement (or of every statement for
/// `"all"`).
pub fn run_corpus(statement: &str, n: usize, corpus_seed: u64) -> Result<Vec<BoundReport>> {
    let names: Vec<&str> = if statement == "all" {
        STATEMENTS.to_vec()
    } else if STATEMENTS.contains(&statement) {
        vec![statement]
    } else {
        return Err(Error::Config(format!(
            "unknown statement {statement:?}; expected one of {} or all",
            STATEMENTS.join(", ")
        )));
    };
    let mut out = Vec::new();
    for name in names {
        for i in 0..n {
            out.extend(corpus_instance(name, corpus_seed, i)?);
        }
    }
    Ok(out)
}

/// Same instance with the loss table multiplied so that its maximum is `c`.
pub fn rescale_loss(inst: &FiniteDAInstance, c: f64) -> Result<FiniteDAInstance> {
    if c == inst.loss_scale() {
        return Ok(inst.clone());
    }
    let f = c / inst.loss_scale();
    let loss = inst
        .loss_table()
        .iter()
        .map(|row| row.iter().map(|v| v * f).collect())
        .collect();
    FiniteDAInstance::new(
        inst.ps().clone(),
        inst.pt().clone(),
        inst.fs().to_vec(),
        inst.ft().to_vec(),
        inst.hypotheses().to_vec(),
        loss,
        c,
    )
}

fn counterexample(inst: &FiniteDAInstance, seed: u64) -> String {
    format!("#seed,{seed}\n{}", inst.to_csv())
}

fn pair_csv(ps: &FiniteDistribution, pt: &FiniteDistribution, seed: u64) -> String {
    let mut out = format!("#seed,{seed}\nx,ps,pt\n");
    for (x, (a, b)) in ps.probs().iter().zip(pt.probs()).enumerate() {
        let _ = writeln!(out, "{x},{a},{b}");
    }
    out
}

/// Per-statement tally of a report list.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tally {
    pub statement: String,
    pub checked: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub min_slack: f64,
}

pub fn tally(reports: &[BoundReport]) -> Vec<Tally> {
    let mut out: Vec<Tally> = Vec::new();
    for r in reports {
        let idx = match out.iter().position(|t| t.statement == r.statement) {
            Some(i) => i,
            None => {
                out.push(Tally {
                    statement: r.statement.clone(),
                    min_slack: f64::INFINITY,
                    ..Tally::default()
                });
                out.len() - 1
            }
        };
        let t = &mut out[idx];
        t.checked += 1;
        if r.skipped.is_some() {
            t.skipped += 1;
        } else {
            if r.pass {
                t.passed += 1;
            } else {
                t.failed += 1;
            }
            t.min_slack = t.min_slack.min(r.slack);
        }
    }
    out
}

pub const REPORT_HEADER: &str = "statement,instance,lhs,rhs,slack,pass,skipped";

pub fn reports_to_csv(reports: &[BoundReport]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let _ = w.write_record(REPORT_HEADER.split(','));
    for r in reports {
        let _ = w.write_record([
            r.statement.clone(),
            r.instance.clone(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.slack.to_string(),
            r.pass.to_string(),
            r.skipped.clone().unwrap_or_default(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// Aligned text table of the per-statement tallies.
pub fn tally_text(tallies: &[Tally]) -> String {
    let rows: Vec<Vec<String>> = tallies
        .iter()
        .map(|t| {
            vec![
                t.statement.clone(),
                t.checked.to_string(),
                t.passed.to_string(),
                t.failed.to_string(),
                t.skipped.to_string(),
                if t.min_slack.is_finite() {
                    format!("{:.3e}", t.min_slack)
                } else {
                    "-".into()
                },
            ]
        })
        .collect();
    let header = ["statement", "checked", "passed", "failed", "skipped", "min_slack"].map(String::from);
    crate::report::align(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn hdh_on_two_points() {
        let inst = FiniteDAInstance::new(
            dist(&[0.5, 0.5]),
            dist(&[0.25, 0.75]),
            vec![0, 1],
            vec![0, 1],
            crate::discrepancy::all_functions(2, 2),
            crate::discrepancy::zero_one_loss(2, 1.0),
            1.0,
        )
        .unwrap();
        assert!((hdh_divergence(&inst) - 0.5).abs() < 1e-15);
        assert!(check_hdh(&inst).unwrap().pass);
    }

    #[test]
    fn prop1_kl_example() {
        let r = check_prop1(&dist(&[0.5, 0.5]), &dist(&[0.25, 0.75]), &get_spec("kl", None).unwrap()).unwrap();
        let direct = 0.5 * (2.0f64).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((r.lhs - direct).abs() < 1e-12 && (r.rhs - direct).abs() < 1e-12);
        assert!((direct - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn dann_optimum_at_equal_densities() {
        let p = dist(&[0.2, 0.3, 0.5]);
        let r = check_dann_optimum(&p, &p, &mut rng::seeded(0)).unwrap();
        assert!((r.lhs + 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(r.pass);
    }

    #[test]
    fn thm1_rejects_ternary_instances() {
        let inst = FiniteDAInstance::new(
            dist(&[1.0]),
            dist(&[1.0]),
            vec![2],
            vec![2],
            vec![vec![0]],
            crate::discrepancy::zero_one_loss(3, 1.0),
            1.0,
        )
        .unwrap();
        assert!(check_thm1(&inst, &[0]).is_err());
    }

    #[test]
    fn thm2_skips_outside_domain() {
        let inst = FiniteDAInstance::new(
            dist(&[0.5, 0.5]),
            dist(&[0.5, 0.5]),
            vec![0, 1],
            vec![0, 1],
            crate::discrepancy::all_functions(2, 2),
            crate::discrepancy::zero_one_loss(2, 1.0),
            1.0,
        )
        .unwrap();
        let r = check_thm2(&inst, &[0, 0], &get_spec("tv", None).unwrap()).unwrap();
        assert!(r.skipped.is_some() && !r.is_failure());
    }

    #[test]
    fn unknown_statement_is_an_error() {
        assert!(run_corpus("lemma9", 1, 0).is_err());
    }
}
