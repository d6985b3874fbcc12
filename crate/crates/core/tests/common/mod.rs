#![allow(dead_code)]

pub mod files;

use fdal::discrepancy::dst_surrogate;
use fdal::divergence::get_spec;
use fdal::rng;
use fdal::tensor::{finite_diff_check, value_and_grad, Tape, Tensor, Var, DEFAULT_LEAKY_SLOPE};
use rand::Rng as _;

pub const FD_EPS: f64 = 1e-5;

type Build<'a> = &'a dyn Fn(&mut Tape, Var) -> fdal::tensor::Result<Var>;

/// Relative error between the tape gradient and a central difference of
/// the same scalar function.
pub fn fd_error(shape: &[usize], point: &[f64], build: Build) -> f64 {
    let (_, g) = value_and_grad(shape, point, |t, x| build(t, x)).unwrap();
    finite_diff_check(
        |p| {
            let mut t = Tape::new();
            let x = t.param(Tensor::new(shape.to_vec(), p.to_vec()).unwrap());
            let o = build(&mut t, x).unwrap();
            t.value(o).item()
        },
        point,
        &g,
        FD_EPS,
    )
    .unwrap()
}

fn uniform(r: &mut rng::Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

/// Values bounded away from zero so piecewise-linear ops have no kink
/// within the difference stencil.
fn off_zero(r: &mut rng::Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = r.random_range(0.05..2.0);
            if r.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// `Σ w ⊙ y` with fixed random weights, so every output entry matters;
/// only the leading weights are used when `y` is smaller.
fn weighted_sum(t: &mut Tape, y: Var, w: &[f64]) -> fdal::tensor::Result<Var> {
    let shape = t.value(y).shape().to_vec();
    let len = shape.iter().product::<usize>();
    let wv = t.constant(Tensor::new(shape, w[..len].to_vec())?);
    let p = t.mul(y, wv)?;
    Ok(t.sum(p))
}

/// Worst relative finite-difference error of every differentiable op for
/// one random configuration.
pub fn op_gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut r = rng::stream(seed, rng::streams::PROBE);
    let b = r.random_range(1..5usize);
    let k = r.random_range(1..5usize);
    let n = b * k;
    let shape = [b, k];
    let x = uniform(&mut r, n, -2.0, 2.0);
    let pos = uniform(&mut r, n, 0.1, 3.0);
    let kinked = off_zero(&mut r, n);
    let w = uniform(&mut r, n, -1.0, 1.0);
    let other = uniform(&mut r, n, -1.5, 1.5);
    let c: f64 = r.random_range(-2.0..2.0);
    let m = r.random_range(1..4usize);
    let right = uniform(&mut r, k * m, -1.0, 1.0);
    let right_w = uniform(&mut r, b * m, -1.0, 1.0);
    let left = uniform(&mut r, m * b, -1.0, 1.0);
    let left_w = uniform(&mut r, m * k, -1.0, 1.0);
    let cols: Vec<usize> = (0..b).map(|_| r.random_range(0..k)).collect();
    let gather_w = uniform(&mut r, b, -1.0, 1.0);
    let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..k)).collect();
    let lambda: f64 = r.random_range(0.0..2.0);

    let mut out: Vec<(&'static str, f64)> = Vec::new();
    let mut unary = |name: &'static str, pt: &[f64], f: fn(&mut Tape, Var) -> Var| {
        out.push((
            name,
            fd_error(&shape, pt, &|t, v| {
                let y = f(t, v);
                weighted_sum(t, y, &w)
            }),
        ));
    };
    unary("neg", &x, |t, v| t.neg(v));
    unary("exp", &x, |t, v| t.exp(v));
    unary("log", &pos, |t, v| t.log(v).unwrap());
    unary("sigmoid", &x, |t, v| t.sigmoid(v));
    unary("tanh", &x, |t, v| t.tanh(v));
    unary("relu", &kinked, |t, v| t.relu(v));
    unary("leaky_relu", &kinked, |t, v| t.leaky_relu(v, DEFAULT_LEAKY_SLOPE));
    unary("log_sigmoid", &x, |t, v| t.log_sigmoid(v));
    unary("sum", &x, |t, v| t.sum(v));
    unary("mean", &x, |t, v| t.mean(v));

    out.push((
        "scale",
        fd_error(&shape, &x, &|t, v| {
            let y = t.scale(v, c);
            weighted_sum(t, y, &w)
        }),
    ));
    for (name, kind) in [("add", 0), ("sub", 1), ("mul", 2)] {
        out.push((
            name,
            fd_error(&shape, &x, &|t, v| {
                let o = t.constant(Tensor::new(shape.to_vec(), other.clone())?);
                let y = match kind {
                    0 => t.add(v, o)?,
                    1 => t.sub(o, v)?,
                    _ => t.mul(v, o)?,
                };
                weighted_sum(t, y, &w)
            }),
        ));
    }
    out.push((
        "mul_self",
        fd_error(&shape, &x, &|t, v| {
            let y = t.mul(v, v)?;
            weighted_sum(t, y, &w)
        }),
    ));
    out.push((
        "scalar_broadcast",
        fd_error(&[1], &[c], &|t, s| {
            let o = t.constant(Tensor::new(shape.to_vec(), other.clone())?);
            let y = t.mul(o, s)?;
            let z = t.add(y, s)?;
            weighted_sum(t, z, &w)
        }),
    ));
    out.push((
        "matmul_left",
        fd_error(&shape, &x, &|t, v| {
            let rm = t.constant(Tensor::new(vec![k, m], right.clone())?);
            let y = t.matmul(v, rm)?;
            weighted_sum(t, y, &right_w)
        }),
    ));
    out.push((
        "matmul_right",
        fd_error(&shape, &x, &|t, v| {
            let lm = t.constant(Tensor::new(vec![m, b], left.clone())?);
            let y = t.matmul(lm, v)?;
            weighted_sum(t, y, &left_w)
        }),
    ));
    out.push((
        "reshape",
        fd_error(&shape, &x, &|t, v| {
            let y = t.reshape(v, &[n])?;
            let y = t.reshape(y, &[1, n])?;
            let wv = t.constant(Tensor::new(vec![1, n], w.clone())?);
            let p = t.mul(y, wv)?;
            Ok(t.sum(p))
        }),
    ));
    out.push((
        "gather_columns",
        fd_error(&shape, &x, &|t, v| {
            let y = t.gather_columns(v, &cols)?;
            weighted_sum(t, y, &gather_w)
        }),
    ));
    out.push((
        "softmax_cross_entropy",
        fd_error(&shape, &x, &|t, v| t.softmax_cross_entropy(v, &labels)),
    ));
    out.push((
        "map_with_derivative",
        fd_error(&shape, &x, &|t, v| {
            let y = t.map_with_derivative(v, |z| Ok((fdal::tensor::softplus(z), fdal::tensor::sigmoid(z))))?;
            weighted_sum(t, y, &w)
        }),
    ));
    // The reversed gradient is compared with −λ times the difference
    // quotient of the plain function.
    {
        let plain = |t: &mut Tape, v: Var| {
            let y = t.tanh(v);
            weighted_sum(t, y, &w)
        };
        let (_, g) = value_and_grad(&shape, &x, |t, v| {
            let r = t.grad_reversal(v, lambda)?;
            plain(t, r)
        })
        .unwrap();
        let unscaled: Vec<f64> = g.iter().map(|v| if lambda == 0.0 { 0.0 } else { -v / lambda }).collect();
        let err = if lambda == 0.0 {
            g.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        } else {
            finite_diff_check(
                |p| {
                    let mut t = Tape::new();
                    let v = t.param(Tensor::new(shape.to_vec(), p.to_vec()).unwrap());
                    let o = plain(&mut t, v).unwrap();
                    t.value(o).item()
                },
                &x,
                &unscaled,
                FD_EPS,
            )
            .unwrap()
        };
        out.push(("grad_reversal", err));
    }
    out.push(("surrogate", surrogate_error(&mut r, b, k)));
    out.push(("mlp_composite", composite_error(&mut r, b, k)));
    out
}

/// Gradient of the discrepancy surrogate with respect to the auxiliary
/// scores on both domains.
fn surrogate_error(r: &mut rng::Rng, b: usize, k: usize) -> f64 {
    let names = ["js_shifted", "pearson_chi2", "kl", "sq_hellinger", "tv"];
    let spec = get_spec(names[r.random_range(0..names.len())], None).unwrap();
    let hs = Tensor::new(vec![b, k], uniform(r, b * k, -1.0, 1.0)).unwrap();
    let ht = Tensor::new(vec![b, k], uniform(r, b * k, -1.0, 1.0)).unwrap();
    let ps = uniform(r, b * k, -1.5, 1.5);
    let pt = uniform(r, b * k, -1.5, 1.5);
    let mut both = ps.clone();
    both.extend(&pt);
    fd_error(&[2 * b * k], &both, &|t, v| {
        let split = split_rows(t, v, b, k)?;
        Ok(dst_surrogate(t, &hs, split.0, &ht, split.1, &spec)
            .map_err(|e| fdal::tensor::TensorError::InvalidArgument(e.to_string()))?
            .dst)
    })
}

/// Splits a flat `[2bk]` vector into two `[b,k]` score blocks on the tape.
fn split_rows(t: &mut Tape, v: Var, b: usize, k: usize) -> fdal::tensor::Result<(Var, Var)> {
    let n = b * k;
    let col = t.reshape(v, &[2 * n, 1])?;
    let pick = |t: &mut Tape, offset: usize| -> fdal::tensor::Result<Var> {
        let mut sel = vec![0.0; n * 2 * n];
        for i in 0..n {
            sel[i * 2 * n + offset + i] = 1.0;
        }
        let s = t.constant(Tensor::new(vec![n, 2 * n], sel)?);
        let y = t.matmul(s, col)?;
        t.reshape(y, &[b, k])
    };
    Ok((pick(t, 0)?, pick(t, n)?))
}

/// Two-layer network with a leaky hidden layer and cross-entropy on top;
/// inputs are redrawn until no hidden pre-activation sits near the kink.
fn composite_error(r: &mut rng::Rng, b: usize, k: usize) -> f64 {
    let d = r.random_range(1..4usize);
    let h = r.random_range(1..6usize);
    let w1 = Tensor::new(vec![d, h], uniform(r, d * h, -1.0, 1.0)).unwrap();
    let b1 = Tensor::new(vec![1, h], uniform(r, h, -0.5, 0.5)).unwrap();
    let w2 = Tensor::new(vec![h, k], uniform(r, h * k, -1.0, 1.0)).unwrap();
    let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..k)).collect();
    let net = |t: &mut Tape, v: Var| -> fdal::tensor::Result<(Var, Var)> {
        let w1v = t.constant(w1.clone());
        let b1v = t.constant(b1.clone());
        let w2v = t.constant(w2.clone());
        let ones = t.constant(Tensor::filled(&[b, 1], 1.0));
        let z = t.matmul(v, w1v)?;
        let bias = t.matmul(ones, b1v)?;
        let pre = t.add(z, bias)?;
        let a = t.leaky_relu(pre, DEFAULT_LEAKY_SLOPE);
        let logits = t.matmul(a, w2v)?;
        Ok((pre, t.softmax_cross_entropy(logits, &labels)?))
    };
    loop {
        let x = uniform(r, b * d, -2.0, 2.0);
        let mut t = Tape::new();
        let v = t.param(Tensor::new(vec![b, d], x.clone()).unwrap());
        let (pre, _) = net(&mut t, v).unwrap();
        if t.value(pre).data().iter().all(|z| z.abs() > 1e-3) {
            return fd_error(&[b, d], &x, &|t, v| Ok(net(t, v)?.1));
        }
    }
}

/// `true` when the reversed gradient is exactly `−λ` times the plain one.
pub fn grl_is_exact(seed: u64) -> bool {
    let mut r = rng::stream(seed, rng::streams::PROBE);
    let n = r.random_range(1..20usize);
    let x = uniform(&mut r, n, -3.0, 3.0);
    let w = uniform(&mut r, n, -1.0, 1.0);
    let lambda: f64 = r.random_range(0.0..3.0);
    let grad = |reverse: bool| {
        value_and_grad(&[n], &x, |t, v| {
            let v = if reverse { t.grad_reversal(v, lambda)? } else { v };
            let y = t.sigmoid(v);
            weighted_sum(t, y, &w)
        })
        .unwrap()
        .1
    };
    let (plain, rev) = (grad(false), grad(true));
    plain.iter().zip(&rev).all(|(p, q)| *q == -lambda * p)
}

/// Conjugate-table checks over every shipped spec at several γ; returns
/// one message per violation.
pub fn catalog_violations() -> Vec<String> {
    use fdal::divergence::{catalog, log_grid, PhiPrimeAtOne};
    let tol = 1e-9;
    let mut bad = Vec::new();
    let xs: Vec<f64> = std::iter::once(0.0).chain(log_grid(1e-4, 1e4, 81)).collect();
    let acts: Vec<f64> = (0..=20_000).map(|i| -50.0 + i as f64 * 0.005).collect();
    for gamma in [0.5, 1.0, 2.0, 3.0, 4.0] {
        for spec in catalog(gamma).unwrap() {
            let label = spec.label();
            let dom = spec.conjugate_domain();
            let ts = dom.grid(401, 20.0);
            let shift = spec.shift_constant();
            for &x in &xs {
                let px = spec.phi(x).unwrap();
                if !px.is_finite() {
                    continue;
                }
                for &t in &ts {
                    let gap = spec.fenchel_young_gap(x, t).unwrap();
                    if gap < -tol {
                        bad.push(format!("{label}: Fenchel-Young gap {gap:e} at x={x}, t={t}"));
                    }
                }
                if x > 0.0 {
                    if let Ok(d) = spec.phi_prime_strict(x) {
                        if dom.contains(d) {
                            let gap = spec.fenchel_young_gap(x, d).unwrap();
                            let scale = 1.0 + (x * d).abs() + px.abs();
                            if gap.abs() > tol * scale {
                                bad.push(format!("{label}: equality case off by {gap:e} at x={x}"));
                            }
                        }
                    }
                }
            }
            for &t in &ts {
                let c = spec.conjugate(t).unwrap();
                if c < t - shift - tol {
                    bad.push(format!("{label}: conjugate {c} below t - phi(1) at t={t}"));
                }
            }
            if (spec.phi(1.0).unwrap() - shift).abs() > tol {
                bad.push(format!("{label}: phi(1) differs from the shift constant"));
            }
            if spec.gamma().is_none() && spec.kind().name() != "js_shifted" && shift != 0.0 {
                bad.push(format!("{label}: phi(1) = {shift}, expected 0"));
            }
            let rep = spec.phi_prime_at_one().representative();
            match spec.phi_prime_at_one() {
                PhiPrimeAtOne::Value(v) => {
                    if (v - spec.phi_prime(1.0).unwrap().value).abs() > tol {
                        bad.push(format!("{label}: phi'(1) inconsistent"));
                    }
                }
                PhiPrimeAtOne::Interval(a, b) => {
                    if !(a <= rep && rep <= b) {
                        bad.push(format!("{label}: subdifferential at 1 is empty"));
                    }
                }
            }
            for &x in &acts {
                let a = spec.activation(x);
                if !a.is_finite() || !dom.contains(a) {
                    bad.push(format!("{label}: activation({x}) = {a} outside {dom}"));
                    break;
                }
            }
        }
    }
    for (name, want) in [("js", 0.0), ("pearson_chi2", 0.0), ("kl", 1.0), ("kl_rev", -1.0)] {
        let got = get_spec(name, None).unwrap().phi_prime_at_one().representative();
        if (got - want).abs() > tol {
            bad.push(format!("{name}: phi'(1) = {got}, table says {want}"));
        }
    }
    bad
}
