//! Time-integration test problems, steppers, and convergence studies.
//!
//! A problem is a plain method-of-lines right-hand side `y' = f(t, y)`
//! with an initial state and a reference solution: either an exact
//! closed form or a self-refined numeric run at a much smaller step.
//! Studies sweep a decreasing step grid, measure final-time L2 errors,
//! and fit the temporal convergence order.

mod problems;
mod steppers;

pub use problems::{
    brusselator_1d, brusselator_2d, periodic_spectral_kernel, stokes_problem, Brusselator1dParams,
    Brusselator2dParams, StokesParams,
};
pub use steppers::{low_storage_step, rk_step, LowStorageIntegrator, RkIntegrator, Stepper};

use rayon::prelude::*;

/// Right-hand side `f(t, y, dy_out)`.
pub type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Reference solution for error measurement.
pub enum Reference {
    /// Closed-form solution as a function of time.
    Exact(Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
    /// Numeric reference: the same tableau run at `min_step / refinement`.
    SelfRefined { refinement: usize },
}

/// An initial-value problem `y' = f(t, y)`, `y(t0) = y0`.
pub struct IvProblem {
    pub id: String,
    pub dimension: usize,
    pub rhs: Box<RhsFn>,
    pub y0: Vec<f64>,
    pub t_span: [f64; 2],
    pub reference: Reference,
}

impl IvProblem {
    pub fn eval_rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.rhs)(t, y, dy)
    }
}

/// Root-mean-square difference: `sqrt((1/N) sum (a_i - b_i)^2)`.
pub fn l2_error(y_num: &[f64], y_ref: &[f64]) -> f64 {
    assert_eq!(y_num.len(), y_ref.len(), "shape mismatch");
    assert!(!y_num.is_empty());
    let ss: f64 = y_num
        .iter()
        .zip(y_ref)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum();
    (ss / y_num.len() as f64).sqrt()
}

/// Observed order from two (step, error) pairs:
/// `p = log(e1/e2) / log(h1/h2)`.
pub fn convergence_order(e1: f64, e2: f64, h1: f64, h2: f64) -> f64 {
    assert!(e1 > 0.0 && e2 > 0.0 && h1 > 0.0 && h2 > 0.0 && h1 != h2);
    (e1 / e2).ln() / (h1 / h2).ln()
}

/// Result of one step-size sweep on one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub problem_id: String,
    /// Step sizes actually used (adjusted to divide the time span).
    pub steps: Vec<f64>,
    /// Final-time L2 errors; `NaN` where the trajectory diverged.
    pub errors: Vec<f64>,
    /// Per-step divergence flags.
    pub divergent: Vec<bool>,
    /// Orders from adjacent pairs; `NaN` where either neighbor diverged.
    pub pairwise_orders: Vec<f64>,
    /// Least-squares slope of `log e` against `log h` over clean points.
    pub fitted_slope: f64,
}

/// Default sweep: twenty geometrically spaced steps from `0.1` down to
/// `0.001`.
///
/// Geometric spacing is what a log-log order fit needs; an arithmetic
/// grid over the same endpoints would cluster all points near the top.
pub fn default_step_grid() -> Vec<f64> {
    geometric_step_grid(0.1, 0.001, 20)
}

/// `count` geometrically spaced steps from `h_max` down to `h_min`.
pub fn geometric_step_grid(h_max: f64, h_min: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && h_max > h_min && h_min > 0.0);
    let ratio = (h_min / h_max).powf(1.0 / (count - 1) as f64);
    (0..count).map(|k| h_max * ratio.powi(k as i32)).collect()
}

/// Runs the sweep: integrate at every step, measure final-time L2 error
/// against the reference, and fit the order.
///
/// Steps are adjusted to the nearest divisor of the time span; grid
/// entries that collapse onto the same divisor are merged. Divergent
/// runs (non-finite state) are flagged and excluded from the fit.
pub fn run_convergence_study(
    t: &crate::tableau::ButcherTableau,
    problem: &IvProblem,
    step_grid: &[f64],
) -> ConvergenceStudy {
    assert!(!step_grid.is_empty());
    assert!(
        step_grid.windows(2).all(|w| w[0] > w[1]),
        "step grid must be strictly decreasing"
    );
    let [t0, t1] = problem.t_span;
    let span = t1 - t0;
    let mut steps: Vec<f64> = step_grid
        .iter()
        .map(|&h| {
            let n = (span / h).round().max(1.0);
            span / n
        })
        .collect();
    steps.dedup();

    let reference = match &problem.reference {
        Reference::Exact(f) => f(t1),
        Reference::SelfRefined { refinement } => {
            let h_ref = steps.last().unwrap() / *refinement as f64;
            let n = (span / h_ref).round().max(1.0) as u64;
            integrate_final(t, problem, span / n as f64, n)
        }
    };

    let finals: Vec<Vec<f64>> = steps
        .par_iter()
        .map(|&h| {
            let n = (span / h).round().max(1.0) as u64;
            integrate_final(t, problem, span / n as f64, n)
        })
        .collect();

    let mut errors = Vec::with_capacity(steps.len());
    let mut divergent = Vec::with_capacity(steps.len());
    for state in &finals {
        if state.iter().all(|v| v.is_finite()) {
            errors.push(l2_error(state, &reference));
            divergent.push(false);
        } else {
            errors.push(f64::NAN);
            divergent.push(true);
        }
    }

    let mut pairwise = Vec::with_capacity(steps.len().saturating_sub(1));
    for i in 1..steps.len() {
        if !divergent[i - 1] && !divergent[i] && errors[i - 1] > 0.0 && errors[i] > 0.0 {
            pairwise.push(convergence_order(
                errors[i - 1],
                errors[i],
                steps[i - 1],
                steps[i],
            ));
        } else {
            pairwise.push(f64::NAN);
        }
    }

    let fitted_slope = fit_loglog_slope(&steps, &errors, &divergent);

    ConvergenceStudy {
        problem_id: problem.id.clone(),
        steps,
        errors,
        divergent,
        pairwise_orders: pairwise,
        fitted_slope,
    }
}

fn integrate_final(
    t: &crate::tableau::ButcherTableau,
    problem: &IvProblem,
    h: f64,
    n: u64,
) -> Vec<f64> {
    let mut stepper = RkIntegrator::new(t, problem.dimension);
    let mut y = problem.y0.clone();
    let mut time = problem.t_span[0];
    for _ in 0..n {
        stepper.step(&*problem.rhs, time, h, &mut y);
        time += h;
        if y.iter().any(|v| !v.is_finite()) {
            return y;
        }
    }
    y
}

fn fit_loglog_slope(steps: &[f64], errors: &[f64], divergent: &[bool]) -> f64 {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(errors)
        .zip(divergent)
        .filter(|((_, e), &d)| !d && **e > 0.0 && e.is_finite())
        .map(|((h, e), _)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::ButcherTableau;

    fn decay_problem() -> IvProblem {
        IvProblem {
            id: "decay".into(),
            dimension: 1,
            rhs: Box::new(|_, y, dy| dy[0] = -y[0]),
            y0: vec![1.0],
            t_span: [0.0, 1.0],
            reference: Reference::Exact(Box::new(|t| vec![(-t).exp()])),
        }
    }

    #[test]
    fn l2_error_examples() {
        assert_eq!(l2_error(&[1.0, 1.0], &[0.0, 0.0]), 1.0);
        assert_eq!(l2_error(&[0.5, 0.25], &[0.5, 0.25]), 0.0);
    }

    #[test]
    fn l2_error_matches_two_pass_recomputation() {
        let mut rng = crate::rng::seeded(8);
        use rand::Rng;
        let a: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = l2_error(&a, &b);
        // Two-pass: accumulate differences first, then reduce.
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let expect = (diffs.iter().map(|d| d * d).sum::<f64>() / 1000.0).sqrt();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn convergence_order_examples() {
        assert!((convergence_order(1e-2, 1e-6, 0.1, 0.01) - 4.0).abs() < 1e-12);
        assert_eq!(convergence_order(3.0, 3.0, 0.1, 0.05), 0.0);
        assert!((convergence_order(8.0, 1.0, 0.2, 0.1) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rk4_on_linear_decay_is_fourth_order() {
        let t = ButcherTableau::classical_rk4();
        let study = run_convergence_study(&t, &decay_problem(), &[0.1, 0.05, 0.025]);
        assert!(
            (study.fitted_slope - 4.0).abs() < 0.1,
            "slope {}",
            study.fitted_slope
        );
        assert!(study.errors.windows(2).all(|w| w[0] > w[1]));
        assert!(study.pairwise_orders.iter().all(|p| (p - 4.0).abs() < 0.3));
    }

    #[test]
    fn default_grid_shape() {
        let g = default_step_grid();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.1).abs() < 1e-15);
        assert!((g[19] - 0.001).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
        // Constant ratio between neighbors.
        let r = g[1] / g[0];
        for w in g.windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
    }

    #[test]
    fn steps_are_adjusted_to_divide_the_span() {
        let t = ButcherTableau::classical_rk4();
        let study = run_convergence_study(&t, &decay_problem(), &[0.3, 0.07]);
        for &h in &study.steps {
            let n = 1.0 / h;
            assert!((n - n.round()).abs() < 1e-9, "h {h} gives n {n}");
        }
    }

    #[test]
    fn divergent_steps_are_flagged_and_excluded() {
        // y' = y^2 from y0 = 1 blows up at t = 1; with huge steps the
        // iteration overflows to infinity for the coarse step only.
        let problem = IvProblem {
            id: "blowup".into(),
            dimension: 1,
            rhs: Box::new(|_, y, dy| dy[0] = y[0] * y[0] * 1e6),
            y0: vec![1.0],
            t_span: [0.0, 1.0],
            reference: Reference::Exact(Box::new(|_| vec![0.0])),
        };
        let t = ButcherTableau::classical_rk4();
        let study = run_convergence_study(&t, &problem, &[0.5, 0.25]);
        assert!(study.divergent.iter().any(|&d| d));
    }
}
