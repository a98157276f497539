//! Feasibility solver for the reduced order-condition system.
//!
//! Finds free coefficients that zero the eight order-condition residuals
//! and the five fourth-order beta residuals while keeping `|R(-x)| <= 1`
//! on a target stretch of the negative real axis. The backend is a damped
//! Gauss-Newton (Levenberg-Marquardt) iteration on a stacked residual
//! vector: the thirteen smooth rows plus one hinge row per stability
//! sample. Hinges act on the log magnitude of `R` and carry
//! augmented-Lagrangian shifts at a fixed penalty weight, which is what
//! lets iterates track the stability boundary instead of crawling along
//! it. Box bounds are enforced by projection; one iteration is one
//! accepted step; convergence is declared when the *unshifted* objective
//! — order rows, beta rows, and the bare hinge penalty — falls below
//! `tol^2 * len(F)`. Every converged iterate is then re-certified
//! through [`crate::order_conditions`] and [`crate::stability`], which
//! share no code with the residual assembly here.

use crate::eval::{poly_at_negative_real, Dual, Real, ReducedSystem};
use crate::heuristics::{HeuristicError, HeuristicExpression};
use crate::rng::{self, Stream};
use crate::stability::{validate_scheme, StabilityConfig, StabilityReport};
use crate::tableau::{apply_constraints, ButcherTableau, ReducedParameters};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Solver settings. `default_for(s)` gives the values used throughout:
/// residual tolerance `1e-14`, iteration budget 500 000, box `[-2, 2]`,
/// initialization scale `1/s`, and a required extent of `s^2 / 32`
/// (= 8 at sixteen stages, roughly three times the classical four-stage
/// extent and comfortably below the feasibility ceiling).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Primary residual tolerance; convergence at `Phi <= tol^2 * len(F)`.
    pub tol: f64,
    /// Budget of accepted steps.
    pub max_iter: u64,
    /// Per-coefficient box `[lo, hi]`.
    pub bounds: [f64; 2],
    /// Scale of the uniform initialization `U(0, init_scale)`.
    pub init_scale: f64,
    /// Stability target on the negative real axis.
    pub required_extent: f64,
    /// Number of penalty samples on `(0, required_extent]`.
    pub stability_samples: usize,
    /// Weight on the squared stability hinge.
    pub penalty_weight: f64,
    /// Seed for the initialization stream.
    pub seed: u64,
    /// Fresh initial points to try before giving up.
    pub multistart: u32,
}

impl SolveConfig {
    pub fn default_for(s: usize) -> Self {
        Self {
            tol: 1e-14,
            max_iter: 500_000,
            bounds: [-2.0, 2.0],
            init_scale: 1.0 / s as f64,
            required_extent: (s * s) as f64 / 32.0,
            stability_samples: 64,
            penalty_weight: 1.0,
            seed: 0,
            multistart: 1,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(SolverError::Config("tol must be positive".into()));
        }
        if self.bounds[0] >= self.bounds[1] {
            return Err(SolverError::Config("bounds must satisfy lo < hi".into()));
        }
        if self.max_iter < 1 {
            return Err(SolverError::Config("max_iter must be at least 1".into()));
        }
        if self.multistart < 1 {
            return Err(SolverError::Config("multistart must be at least 1".into()));
        }
        Ok(())
    }
}

/// Terminal state of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    BudgetExhausted,
    Infeasible,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveStatus::Converged => write!(f, "converged"),
            SolveStatus::BudgetExhausted => write!(f, "budget_exhausted"),
            SolveStatus::Infeasible => write!(f, "infeasible"),
        }
    }
}

/// Outcome of one feasibility solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Free parameters after heuristic substitution.
    pub free_dimension: usize,
    /// Accepted steps, summed over restarts.
    pub iterations: u64,
    /// Final `||F||`.
    pub residual_norm: f64,
    /// Largest order-condition residual of the final tableau, measured by
    /// the certification path.
    pub max_order_violation: f64,
    /// Stability certification of the final tableau.
    pub stability: StabilityReport,
    /// The scheme, present only when converged and certified.
    pub tableau: Option<ButcherTableau>,
    /// Seconds spent in this solve.
    pub wall_time: f64,
}

/// One line of the raw run dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub status: SolveStatus,
    pub iterations: u64,
    pub residual_norm: f64,
    pub wall_time: f64,
}

impl RunRecord {
    pub fn from_report(seed: u64, report: &SolveReport) -> Self {
        Self {
            seed,
            status: report.status,
            iterations: report.iterations,
            residual_norm: report.residual_norm,
            wall_time: report.wall_time,
        }
    }
}

/// Draws the full reduced coefficient vector from `U(0, init_scale)`.
pub fn initial_point(s: usize, cfg: &SolveConfig, rng: &mut Stream) -> ReducedParameters {
    let n = 2 * s - 1;
    let draws: Vec<f64> = (0..n)
        .map(|_| rng.random::<f64>() * cfg.init_scale)
        .collect();
    ReducedParameters {
        s,
        a_sub: draws[..s - 1].to_vec(),
        b: draws[s - 1..].to_vec(),
    }
}

/// Solves the feasibility problem for `s` stages with the given heuristics
/// substituted out.
pub fn solve(
    s: usize,
    exprs: &[HeuristicExpression],
    cfg: &SolveConfig,
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let start = Instant::now();
    let system = ReducedSystem::new(s, exprs.to_vec())?;
    let mut stream = rng::seeded(cfg.seed);

    let mut total_iterations = 0;
    let mut last: Option<SolveReport> = None;
    for _ in 0..cfg.multistart {
        let theta0 = system.theta_from_params(&initial_point(s, cfg, &mut stream));
        let outcome = levenberg_marquardt(&system, theta0, cfg, cfg.max_iter - total_iterations);
        total_iterations += outcome.iterations;
        let report = certify(&system, &outcome, cfg, total_iterations, start);
        let converged = report.status == SolveStatus::Converged;
        last = Some(report);
        if converged || total_iterations >= cfg.max_iter {
            break;
        }
    }
    Ok(last.expect("multistart >= 1"))
}

/// Descriptive statistics over the iteration counts of converged runs.
///
/// Non-converged runs are tallied separately and excluded from the
/// moments. `std` is the sample standard deviation (zero for a single
/// run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub count: usize,
    pub non_converged: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: u64,
    pub max: u64,
}

/// Computes [`RunStatistics`] from a batch of reports.
///
/// Panics on an empty batch.
pub fn run_statistics(reports: &[SolveReport]) -> RunStatistics {
    assert!(
        !reports.is_empty(),
        "run_statistics needs at least one report"
    );
    let iters: Vec<u64> = reports
        .iter()
        .filter(|r| r.status == SolveStatus::Converged)
        .map(|r| r.iterations)
        .collect();
    let non_converged = reports.len() - iters.len();
    iteration_statistics(&iters, non_converged)
}

/// Statistics core over raw converged iteration counts.
pub fn iteration_statistics(converged_iterations: &[u64], non_converged: usize) -> RunStatistics {
    let mut iters = converged_iterations.to_vec();
    iters.sort_unstable();
    if iters.is_empty() {
        return RunStatistics {
            count: 0,
            non_converged,
            mean: f64::NAN,
            median: f64::NAN,
            std: f64::NAN,
            min: 0,
            max: 0,
        };
    }
    let n = iters.len();
    let mean = iters.iter().sum::<u64>() as f64 / n as f64;
    let median = if n % 2 == 1 {
        iters[n / 2] as f64
    } else {
        (iters[n / 2 - 1] + iters[n / 2]) as f64 / 2.0
    };
    let std = if n == 1 {
        0.0
    } else {
        let ss: f64 = iters
            .iter()
            .map(|&x| {
                let d = x as f64 - mean;
                d * d
            })
            .sum();
        (ss / (n - 1) as f64).sqrt()
    };
    RunStatistics {
        count: n,
        non_converged,
        mean,
        median,
        std,
        min: iters[0],
        max: iters[n - 1],
    }
}

struct LmOutcome {
    theta: Vec<f64>,
    phi: f64,
    iterations: u64,
    converged: bool,
    stalled: bool,
}

/// Fractional margin inside the unit bound targeted by the stability
/// rows: the solve aims for `|R(-x)| <= (1 - margin)`, so the original
/// hinge `max(0, |R| - 1)` is exactly zero at a solution despite
/// finite-precision multipliers. Far below the certification slack. The
/// margin tapers to zero with `x` because `R(0) = 1` exactly.
const STABILITY_MARGIN: f64 = 1e-6;

fn margin_bound_ln(x: f64) -> f64 {
    (1.0 - STABILITY_MARGIN.min(0.1 * x)).ln()
}

/// Accepted steps between multiplier updates.
const MULTIPLIER_INTERVAL: u64 = 30;

/// Stall-driven multiplier refreshes allowed before giving up.
const MAX_STALL_RECOVERIES: u32 = 100;

fn penalty_samples(cfg: &SolveConfig) -> Vec<f64> {
    let m = cfg.stability_samples;
    (1..=m)
        .map(|k| cfg.required_extent * k as f64 / m as f64)
        .collect()
}

/// The stacked residual vector.
///
/// Rows are the eight order conditions, the five beta conditions, and one
/// stability row per sample. A stability row is a hinge on the *log*
/// magnitude, `sqrt(w/2) * max(0, ln|R(-x_m)| - ln(1 - margin) +
/// shift_m)`: log keeps gradients usable where the raw polynomial reaches
/// 1e16, and the `shift_m = lambda_m / w` terms are the
/// augmented-Lagrangian multipliers that let iterates track the active
/// boundary instead of crawling along it. At a feasible solution every
/// stability row reduces to its multiplier constant and the original
/// penalty is identically zero.
fn residuals<T: Real>(
    system: &ReducedSystem,
    theta: &[T],
    samples: &[f64],
    sqrt_half_rho: f64,
    shifts: &[f64],
    out: &mut Vec<T>,
) {
    out.clear();
    let (r, beta) = system.order_and_beta(theta);
    out.extend_from_slice(&r);
    let targets = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];
    for j in 0..=4 {
        out.push(beta[j] - T::constant(targets[j]));
    }
    let w = T::constant(sqrt_half_rho);
    for (&x, &shift) in samples.iter().zip(shifts) {
        let mag = poly_at_negative_real(&beta, x).abs();
        let c = mag.ln() - T::constant(margin_bound_ln(x));
        out.push((c + T::constant(shift)).hinge() * w);
    }
}

/// Constraint values `c_m = ln|R(-x_m)| - ln(1 - margin)` and the sum of
/// squares of the smooth (order + beta) rows, for multiplier updates and
/// the convergence test on the original objective.
fn constraint_values(system: &ReducedSystem, theta: &[f64], samples: &[f64]) -> (f64, Vec<f64>) {
    let (r, beta) = system.order_and_beta::<f64>(theta);
    let targets = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];
    let mut smooth: f64 = r.iter().map(|v| v * v).sum();
    for j in 0..=4 {
        let d = beta[j] - targets[j];
        smooth += d * d;
    }
    let cs = samples
        .iter()
        .map(|&x| poly_at_negative_real(&beta, x).abs().ln() - margin_bound_ln(x))
        .collect();
    (smooth, cs)
}

fn levenberg_marquardt(
    system: &ReducedSystem,
    mut theta: Vec<f64>,
    cfg: &SolveConfig,
    budget: u64,
) -> LmOutcome {
    let n = theta.len();
    let samples = penalty_samples(cfg);
    let rho = cfg.penalty_weight.max(1e-8);
    let sqrt_half_rho = (rho / 2.0).sqrt();
    let residual_count = 13 + samples.len();
    let phi_tol = cfg.tol * cfg.tol * residual_count as f64;
    let [lo, hi] = cfg.bounds;
    let clamp = |v: f64| v.clamp(lo, hi);
    for v in theta.iter_mut() {
        *v = clamp(*v);
    }

    // Original objective: smooth rows plus the unshifted hinge penalty.
    let original_phi = |theta: &[f64]| -> f64 {
        let (smooth, cs) = constraint_values(system, theta, &samples);
        let hinge: f64 = cs
            .iter()
            .map(|&c| {
                let v = c.max(0.0);
                v * v
            })
            .sum();
        smooth + 0.5 * rho * hinge
    };

    let mut shifts = vec![0.0; samples.len()];
    let mut f = Vec::with_capacity(residual_count);
    residuals::<f64>(system, &theta, &samples, sqrt_half_rho, &shifts, &mut f);
    let mut phi: f64 = f.iter().map(|v| v * v).sum();

    let mut iterations = 0;
    let mut since_update = 0;
    let mut stall_recoveries = 0u32;
    let mut dual_f: Vec<Dual> = Vec::with_capacity(residual_count);
    let mut jac = vec![vec![0.0; n]; residual_count];
    let mut trial = Vec::with_capacity(residual_count);

    // Nielsen damping control.
    let mut mu = f64::NAN; // initialized from the first normal matrix
    let mut nu = 2.0;

    // Updates every multiplier from the current constraint values;
    // returns true when anything moved.
    let update_multipliers = |theta: &[f64], shifts: &mut Vec<f64>| -> bool {
        let (_, cs) = constraint_values(system, theta, &samples);
        let mut moved = false;
        for (shift, &c) in shifts.iter_mut().zip(&cs) {
            let next = (*shift + c).max(0.0);
            if (next - *shift).abs() > 1e-15 {
                moved = true;
            }
            *shift = next;
        }
        moved
    };

    while iterations < budget {
        let orig = original_phi(&theta);
        if orig <= phi_tol {
            return LmOutcome {
                theta,
                phi: orig,
                iterations,
                converged: true,
                stalled: false,
            };
        }

        // Jacobian by one dual pass per free parameter.
        for m in 0..n {
            let seeded: Vec<Dual> = theta
                .iter()
                .enumerate()
                .map(|(i, &v)| Dual::seed(v, if i == m { 1.0 } else { 0.0 }))
                .collect();
            residuals::<Dual>(
                system,
                &seeded,
                &samples,
                sqrt_half_rho,
                &shifts,
                &mut dual_f,
            );
            for (row, d) in jac.iter_mut().zip(&dual_f) {
                row[m] = d.d;
            }
        }

        // Normal equations (lower triangle).
        let mut h = vec![vec![0.0; n]; n];
        let mut g = vec![0.0; n];
        for (row, &fi) in jac.iter().zip(&f) {
            for i in 0..n {
                g[i] += row[i] * fi;
                for j in 0..=i {
                    h[i][j] += row[i] * row[j];
                }
            }
        }
        if mu.is_nan() {
            let max_diag = (0..n).map(|i| h[i][i]).fold(0.0f64, f64::max);
            mu = 1e-3 * max_diag.max(1e-12);
        }

        let mut accepted = false;
        while !accepted {
            let mut damped = h.clone();
            for i in 0..n {
                damped[i][i] += mu;
            }
            let step = cholesky_solve(&mut damped, &g);
            let improved = step.as_ref().and_then(|delta| {
                let candidate: Vec<f64> = theta
                    .iter()
                    .zip(delta)
                    .map(|(&t, &d)| clamp(t - d))
                    .collect();
                residuals::<f64>(
                    system,
                    &candidate,
                    &samples,
                    sqrt_half_rho,
                    &shifts,
                    &mut trial,
                );
                let phi_new: f64 = trial.iter().map(|v| v * v).sum();
                if phi_new < phi {
                    // Gain ratio against the local quadratic model.
                    let predicted: f64 = 0.5
                        * delta
                            .iter()
                            .zip(&g)
                            .map(|(&d, &gi)| d * (mu * d + gi))
                            .sum::<f64>();
                    let rho_gain = if predicted > 0.0 {
                        (phi - phi_new) / predicted
                    } else {
                        1.0
                    };
                    Some((candidate, phi_new, rho_gain))
                } else {
                    None
                }
            });
            match improved {
                Some((candidate, phi_new, rho_gain)) => {
                    theta = candidate;
                    std::mem::swap(&mut f, &mut trial);
                    phi = phi_new;
                    mu *= (1.0 - (2.0 * rho_gain - 1.0).powi(3)).max(1.0 / 3.0);
                    nu = 2.0;
                    iterations += 1;
                    since_update += 1;
                    accepted = true;
                    if since_update >= MULTIPLIER_INTERVAL {
                        since_update = 0;
                        update_multipliers(&theta, &mut shifts);
                        residuals::<f64>(system, &theta, &samples, sqrt_half_rho, &shifts, &mut f);
                        phi = f.iter().map(|v| v * v).sum();
                    }
                }
                None => {
                    mu *= nu;
                    nu *= 2.0;
                    if mu > 1e24 {
                        // The damped step has underflowed. Refresh the
                        // multipliers; only give up when they are already
                        // consistent with this iterate.
                        stall_recoveries += 1;
                        if stall_recoveries <= MAX_STALL_RECOVERIES
                            && update_multipliers(&theta, &mut shifts)
                        {
                            residuals::<f64>(
                                system,
                                &theta,
                                &samples,
                                sqrt_half_rho,
                                &shifts,
                                &mut f,
                            );
                            phi = f.iter().map(|v| v * v).sum();
                            since_update = 0;
                            mu = f64::NAN;
                            nu = 2.0;
                            break;
                        }
                        let orig = original_phi(&theta);
                        return LmOutcome {
                            theta,
                            phi: orig,
                            iterations,
                            converged: orig <= phi_tol,
                            stalled: true,
                        };
                    }
                }
            }
        }
    }

    let orig = original_phi(&theta);
    LmOutcome {
        theta,
        phi: orig,
        iterations,
        converged: orig <= phi_tol,
        stalled: false,
    }
}

fn certify(
    system: &ReducedSystem,
    outcome: &LmOutcome,
    cfg: &SolveConfig,
    total_iterations: u64,
    start: Instant,
) -> SolveReport {
    let params = system.params_from_theta(&outcome.theta);
    let tableau = apply_constraints(&params).expect("well-formed by construction");
    let order = crate::order_conditions::order_residuals(&tableau);
    let max_order_violation = order.max_abs();
    let stability = validate_scheme(
        &tableau,
        &StabilityConfig::for_stages(system.stage_count(), cfg.required_extent),
    );
    let certified =
        outcome.converged && max_order_violation <= cfg.tol * 1e4 && stability.is_stable;
    let status = if certified {
        SolveStatus::Converged
    } else if outcome.stalled || outcome.converged {
        // Either the step underflowed, or the inner iteration met its
        // target but the independent certification disagrees.
        SolveStatus::Infeasible
    } else {
        SolveStatus::BudgetExhausted
    };
    SolveReport {
        status,
        free_dimension: system.free_len(),
        iterations: total_iterations,
        residual_norm: outcome.phi.sqrt(),
        max_order_violation,
        stability,
        tableau: certified.then_some(tableau),
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Solves `M x = g` for symmetric positive-definite `M` (lower triangle),
/// overwriting `M` with its Cholesky factor. Returns `None` when the
/// factorization breaks down.
fn cholesky_solve(m: &mut [Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[i][j];
            for k in 0..j {
                sum -= m[i][k] * m[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                m[i][j] = sum.sqrt();
            } else {
                m[i][j] = sum / m[j][j];
            }
        }
    }
    // Forward then backward substitution.
    let mut x = g.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = m[i][k] * x[k];
            x[i] -= t;
        }
        x[i] /= m[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let t = m[k][i] * x[k];
            x[i] -= t;
        }
        x[i] /= m[i][i];
    }
    Some(x)
}
