//! Stability polynomials, the fourth-order beta conditions, and
//! real-axis stability extents.
//!
//! One step of an explicit scheme applied to `y' = lambda*y` multiplies the
//! state by
//!
//! ```text
//! R(z) = 1 + z b^T (I - zA)^{-1} 1 = sum_j beta_j z^j,   z = lambda*dt.
//! ```
//!
//! Because `A` is strictly lower triangular the Neumann series of
//! `(I - zA)^{-1}` terminates: `beta_0 = 1` and `beta_k = b^T A^(k-1) 1`
//! for `k = 1..=s`, so the polynomial has degree at most `s` and is
//! computed here by iterated matrix-vector products. Fourth-order accuracy
//! of the step forces `beta_j = 1/j!` for `j <= 4`; the extended-stability
//! property is measured as the largest `x` such that `|R(-x')| <= 1` for
//! all `x'` up to `x`.

use crate::tableau::ButcherTableau;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StabilityError {
    #[error("beta vector has {got} coefficients; the fourth-order check needs at least 5")]
    TooFewCoefficients { got: usize },
}

/// Tolerances and targets for [`validate_scheme`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    /// Allowed deviation of `beta_j` from `1/j!` for `j <= 4`.
    pub beta_tol: f64,
    /// Slack on `|R(-x)| <= 1` when scanning the negative real axis.
    pub stab_tol: f64,
    /// Required stability extent along the negative real axis.
    pub required_extent: f64,
    /// Scan cap; must exceed any extent worth reporting.
    pub x_cap: f64,
    /// Number of uniform scan samples on `[0, x_cap]`.
    pub samples: usize,
}

impl StabilityConfig {
    /// Defaults for an `s`-stage scheme. The cap `0.4 s^2` safely exceeds
    /// the extents attainable at fourth order (about `0.3 s^2`).
    pub fn for_stages(s: usize, required_extent: f64) -> Self {
        Self {
            beta_tol: 1e-10,
            stab_tol: 1e-8,
            required_extent,
            x_cap: 0.4 * (s * s) as f64,
            samples: 2048,
        }
    }
}

/// Outcome of the full stability validation of one tableau.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Coefficients `beta_0..beta_s` of `R(z)`.
    pub beta: Vec<f64>,
    /// `max_{j<=4} |beta_j - 1/j!|`.
    pub beta_error: f64,
    /// Verified stability extent along the negative real axis.
    pub real_axis_extent: f64,
    /// `-beta_{s-1} / beta_s` when `beta_s != 0`; diagnostic only.
    pub root_sum: Option<f64>,
    /// `beta_error <= beta_tol` and `real_axis_extent >= required_extent`.
    pub is_stable: bool,
}

/// `|R(z)|` sampled over a rectangle of the complex plane, for contour
/// plotting of the stability region.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGrid {
    pub re_range: [f64; 2],
    pub im_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// Row-major: `values[i][j] = |R(re_i + i*im_j)|`.
    pub values: Vec<Vec<f64>>,
}

impl StabilityGrid {
    pub fn re_at(&self, i: usize) -> f64 {
        grid_coord(self.re_range, self.nx, i)
    }

    pub fn im_at(&self, j: usize) -> f64 {
        grid_coord(self.im_range, self.ny, j)
    }
}

fn grid_coord(range: [f64; 2], n: usize, k: usize) -> f64 {
    if n == 1 {
        return range[0];
    }
    range[0] + (range[1] - range[0]) * k as f64 / (n - 1) as f64
}

/// Stability polynomial coefficients `beta_0..beta_s` of an explicit
/// tableau, via the terminating Neumann series.
pub fn stability_coefficients(t: &ButcherTableau) -> Vec<f64> {
    let s = t.s;
    let mut beta = vec![0.0; s + 1];
    beta[0] = 1.0;
    let mut v = vec![1.0; s];
    for k in 1..=s {
        beta[k] = t.b.iter().zip(&v).map(|(bi, vi)| bi * vi).sum();
        if k < s {
            let mut next = vec![0.0; s];
            for i in 0..s {
                let mut acc = 0.0;
                for j in 0..i {
                    acc += t.a[i][j] * v[j];
                }
                next[i] = acc;
            }
            v = next;
        }
    }
    beta
}

/// `max_{j=0..4} |beta_j - 1/j!|`.
pub fn check_beta_conditions(beta: &[f64]) -> Result<f64, StabilityError> {
    if beta.len() < 5 {
        return Err(StabilityError::TooFewCoefficients { got: beta.len() });
    }
    let targets = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];
    let mut err: f64 = 0.0;
    for j in 0..=4 {
        err = err.max((beta[j] - targets[j]).abs());
    }
    Ok(err)
}

/// Evaluates `R(z)` by Horner's rule in complex arithmetic.
pub fn evaluate_polynomial(beta: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(*beta.last().expect("nonempty beta"), 0.0);
    for &c in beta.iter().rev().skip(1) {
        acc = acc * z + c;
    }
    acc
}

fn real_axis_magnitude(beta: &[f64], x: f64) -> f64 {
    let mut acc = *beta.last().expect("nonempty beta");
    for &c in beta.iter().rev().skip(1) {
        acc = acc * (-x) + c;
    }
    acc.abs()
}

/// Largest verified `x` such that `|R(-x')| <= 1 + stab_tol` for every
/// sampled `x'` in `[0, x]`.
///
/// Scans `samples` uniform points on `[0, x_cap]`, stops at the first
/// failure, and refines the boundary by 20 bisection steps between the
/// last passing and first failing sample. Returns `x_cap` when the whole
/// scan passes.
pub fn real_axis_extent(beta: &[f64], x_cap: f64, samples: usize, stab_tol: f64) -> f64 {
    assert!(x_cap > 0.0 && samples >= 2);
    let bound = 1.0 + stab_tol;
    let pass = |x: f64| real_axis_magnitude(beta, x) <= bound;
    let mut last_ok = 0.0;
    let mut first_bad = None;
    for k in 0..samples {
        let x = x_cap * k as f64 / (samples - 1) as f64;
        if pass(x) {
            last_ok = x;
        } else {
            first_bad = Some(x);
            break;
        }
    }
    let Some(mut hi) = first_bad else {
        return x_cap;
    };
    let mut lo = last_ok;
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if pass(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Tabulates `|R(z)|` over a complex grid. Rows evaluate in parallel;
/// cells are independent, so the result is identical for any partition.
pub fn stability_grid(
    t: &ButcherTableau,
    re_range: [f64; 2],
    im_range: [f64; 2],
    nx: usize,
    ny: usize,
) -> StabilityGrid {
    assert!(nx >= 2 && ny >= 2);
    let beta = stability_coefficients(t);
    let values = (0..nx)
        .into_par_iter()
        .map(|i| {
            let re = grid_coord(re_range, nx, i);
            (0..ny)
                .map(|j| {
                    let im = grid_coord(im_range, ny, j);
                    evaluate_polynomial(&beta, Complex64::new(re, im)).norm()
                })
                .collect()
        })
        .collect();
    StabilityGrid {
        re_range,
        im_range,
        nx,
        ny,
        values,
    }
}

/// Full stability validation: beta conditions, real-axis extent, and the
/// root-sum diagnostic, gated into `is_stable`.
///
/// Schemes with fewer than five coefficients fail the beta conditions with
/// the absent coefficients counted as zero (`R` simply has no such term).
pub fn validate_scheme(t: &ButcherTableau, cfg: &StabilityConfig) -> StabilityReport {
    let beta = stability_coefficients(t);
    let beta_error = if beta.len() >= 5 {
        check_beta_conditions(&beta).expect("length checked")
    } else {
        let mut padded = beta.clone();
        padded.resize(5, 0.0);
        check_beta_conditions(&padded).expect("padded to length 5")
    };
    let real_extent = real_axis_extent(&beta, cfg.x_cap, cfg.samples, cfg.stab_tol);
    let degree = beta.len() - 1;
    let root_sum = if degree >= 1 && beta[degree] != 0.0 {
        Some(-beta[degree - 1] / beta[degree])
    } else {
        None
    };
    let is_stable = beta_error <= cfg.beta_tol && real_extent >= cfg.required_extent;
    StabilityReport {
        beta,
        beta_error,
        real_axis_extent: real_extent,
        root_sum,
        is_stable,
    }
}
