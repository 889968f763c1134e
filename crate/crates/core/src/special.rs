//! Error functions and Gauss–Hermite expectations.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use crate::error::NumericError;

/// Error function, accurate to about one ulp (FreeBSD msun algorithm).
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function without cancellation for large `x`.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Upper tail of the standard normal distribution.
#[inline]
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// `ln erfc(x)`, usable far past the point where `erfc` underflows.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 25.0 {
        erfc(x).ln()
    } else {
        // erfc(x) ~ exp(-x²) / (x √π) · (1 - 1/(2x²) + 3/(4x⁴) - 15/(8x⁶))
        let inv = 0.5 / (x * x);
        -x * x - (x * PI.sqrt()).ln() + (1.0 - inv + 3.0 * inv * inv - 15.0 * inv.powi(3)).ln()
    }
}

/// An `n`-point Gauss–Hermite rule for the weight `exp(-x²)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds the rule with the Golub–Welsch method: nodes are the
    /// eigenvalues of the Jacobi matrix, weights come from the first
    /// component of each normalized eigenvector.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut diag = vec![0.0; n];
        let mut off: Vec<f64> = (1..=n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        off[n - 1] = 0.0;
        let mut first = vec![0.0; n];
        first[0] = 1.0;
        symmetric_tridiagonal_ql(&mut diag, &mut off, &mut first);

        let mut pairs: Vec<(f64, f64)> = diag
            .into_iter()
            .zip(first)
            .map(|(x, v)| (x, PI.sqrt() * v * v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // The rule is symmetric; enforce it exactly.
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-x, w);
            pairs[j] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let (nodes, weights) = pairs.into_iter().unzip();
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(U)]` for `U ~ N(0, 1)`.
    pub fn normal_expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&x, &w)| w * f(SQRT_2 * x))
            .sum();
        s / PI.sqrt()
    }
}

/// Smallest and largest rule sizes tried by [`normal_expectation`].
pub const MIN_NODES: usize = 32;
pub const MAX_NODES: usize = 1024;

fn cached_rule(level: usize) -> &'static GaussHermite {
    static RULES: [OnceLock<GaussHermite>; 6] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    RULES[level].get_or_init(|| GaussHermite::new(MIN_NODES << level))
}

/// `E[f(U)]` for a standard normal `U`, doubling the Gauss–Hermite rule
/// from 32 to 1024 nodes until two successive doublings each move the
/// estimate by at most `rel_tol` (relative).
pub fn normal_expectation(f: impl Fn(f64) -> f64, rel_tol: f64) -> Result<f64, NumericError> {
    let levels = (MAX_NODES / MIN_NODES).trailing_zeros() as usize + 1;
    let mut prev: Option<f64> = None;
    let mut agreed = 0;
    let mut gap = f64::INFINITY;
    let mut est = f64::NAN;
    for level in 0..levels {
        est = cached_rule(level).normal_expectation(&f);
        if !est.is_finite() {
            return Err(NumericError::Domain(format!(
                "integrand produced {est} at {} nodes",
                MIN_NODES << level
            )));
        }
        if let Some(p) = prev {
            gap = (est - p).abs();
            if gap <= rel_tol * est.abs() {
                agreed += 1;
                if agreed == 2 {
                    return Ok(est);
                }
            } else {
                agreed = 0;
            }
        }
        prev = Some(est);
    }
    Err(NumericError::NoConvergence {
        nodes: MAX_NODES,
        estimate: est,
        gap,
    })
}

/// `E[exp(ln_f(U))]` for a standard normal `U`.
///
/// The rule is recentred on the mode of `ln_f(u) - u²/2` and rescaled by
/// its curvature before [`normal_expectation`] is applied, so integrands
/// whose mass sits deep in a tail keep their relative accuracy.
pub fn normal_expectation_ln(ln_f: impl Fn(f64) -> f64, rel_tol: f64) -> Result<f64, NumericError> {
    let h = |u: f64| ln_f(u) - 0.5 * u * u;
    let (mut m, mut best) = (0.0, h(0.0));
    for i in -160..=160 {
        let u = i as f64 * 0.25;
        let v = h(u);
        if v > best {
            (m, best) = (u, v);
        }
    }
    if best == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if best.is_nan() {
        return Err(NumericError::Domain("integrand is NaN".into()));
    }
    let (mut a, mut b) = (m - 0.25, m + 0.25);
    for _ in 0..60 {
        let (c, d) = (a + (b - a) / 3.0, b - (b - a) / 3.0);
        if h(c) < h(d) {
            a = c;
        } else {
            b = d;
        }
    }
    let m = 0.5 * (a + b);
    let peak = h(m);
    let step = 1e-3;
    let curvature = (h(m + step) - 2.0 * peak + h(m - step)) / (step * step);
    let s = if curvature < 0.0 {
        (1.0 / (-curvature).sqrt()).min(1.0)
    } else {
        1.0
    };
    // At far nodes the exponent can pass the f64 range while the product
    // with the (subnormal) weight stays negligible; cap it there.
    let scaled = normal_expectation(
        |v| (h(m + s * v) - peak + 0.5 * v * v).min(700.0).exp(),
        rel_tol,
    )?;
    Ok(s * peak.exp() * scaled)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
/// `diag` receives the eigenvalues; `off[i]` couples rows `i` and `i + 1`
/// (`off[n-1]` is ignored); `first` holds the first row of the eigenvector
/// matrix and is rotated along.
fn symmetric_tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) {
    let n = diag.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "QL iteration failed to converge");

            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let t = first[i + 1];
                first[i + 1] = s * first[i] + c * t;
                first[i] = c * first[i] - s * t;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}
