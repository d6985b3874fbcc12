//! Wilcoxon signed-rank test and small descriptive helpers.

use statrs::distribution::{ContinuousCDF, Normal};

/// Largest sample size handled by exact enumeration.
pub const EXACT_MAX_N: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wilcoxon {
    /// Sum of the ranks of the positive differences.
    pub w_plus: f64,
    /// Number of non-zero differences that entered the test.
    pub n: usize,
    pub p_value: f64,
    pub method: PMethod,
}

/// Stated with every reported p-value.
pub const ZERO_CONVENTION: &str = "zero differences dropped before ranking";

/// Two-sided test on paired differences: exact for up to
/// [`EXACT_MAX_N`] non-zero differences, normal approximation above.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Wilcoxon {
    let n = diffs.iter().filter(|d| **d != 0.0).count();
    wilcoxon_with(diffs, if n <= EXACT_MAX_N { PMethod::Exact } else { PMethod::Normal })
}

/// Paired version of [`wilcoxon_signed_rank`] on `a − b`.
pub fn wilcoxon_paired(a: &[f64], b: &[f64]) -> Wilcoxon {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    wilcoxon_signed_rank(&d)
}

/// Same test with the p-value method forced.
pub fn wilcoxon_with(diffs: &[f64], method: PMethod) -> Wilcoxon {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return Wilcoxon {
            w_plus: 0.0,
            n: 0,
            p_value: 1.0,
            method,
        };
    }
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w_plus: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let mean = n as f64 * (n as f64 + 1.0) / 4.0;
    let p_value = match method {
        PMethod::Exact => {
            let dev = (w_plus - mean).abs();
            let mut extreme = 0u64;
            for mask in 0u64..(1u64 << n) {
                let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
                if (w - mean).abs() >= dev - 1e-9 {
                    extreme += 1;
                }
            }
            extreme as f64 / (1u64 << n) as f64
        }
        PMethod::Normal => {
            let nf = n as f64;
            let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
            let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
            let num = ((w_plus - mean).abs() - 0.5).max(0.0);
            if var <= 0.0 {
                1.0
            } else {
                let z = num / var.sqrt();
                let std = Normal::standard();
                2.0 * (1.0 - std.cdf(z))
            }
        }
    };
    Wilcoxon {
        w_plus,
        n,
        p_value: p_value.min(1.0),
        method,
    }
}

/// Ranks starting at 1 with ties sharing their average rank, plus the size
/// of every tie group.
fn average_ranks(v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Sample standard deviation (`n − 1` denominator); zero for one value.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_positive_differences() {
        let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0]);
        assert_eq!(w.w_plus, 6.0);
        assert_eq!(w.p_value, 0.25);
        assert_eq!(w.method, PMethod::Exact);
    }

    #[test]
    fn antisymmetric_pair() {
        assert_eq!(wilcoxon_signed_rank(&[-1.0, 1.0]).p_value, 1.0);
    }

    #[test]
    fn all_zero() {
        let w = wilcoxon_signed_rank(&[0.0, 0.0]);
        assert_eq!((w.n, w.p_value), (0, 1.0));
    }

    #[test]
    fn ties_share_ranks() {
        let (r, t) = average_ranks(&[2.0, 1.0, 2.0]);
        assert_eq!(r, vec![2.5, 1.0, 2.5]);
        assert_eq!(t, vec![1, 2]);
    }

    #[test]
    fn slope_of_a_line() {
        assert!((ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
        assert!((sample_std(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
    }
}
