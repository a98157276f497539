//! Generic and low-storage explicit Runge-Kutta steppers.

use super::{IvProblem, RhsFn};
use crate::tableau::{ButcherTableau, ReducedParameters};

/// A fixed-step time integrator advancing `y` in place.
pub trait Stepper {
    fn step(&mut self, rhs: &RhsFn, tn: f64, h: f64, y: &mut [f64]);
}

/// Textbook explicit stepper storing all `s` stage derivatives.
pub struct RkIntegrator {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
}

impl RkIntegrator {
    pub fn new(t: &ButcherTableau, dimension: usize) -> Self {
        Self {
            a: t.a.clone(),
            b: t.b.clone(),
            c: t.c.clone(),
            k: vec![vec![0.0; dimension]; t.s],
            stage: vec![0.0; dimension],
        }
    }
}

impl Stepper for RkIntegrator {
    fn step(&mut self, rhs: &RhsFn, tn: f64, h: f64, y: &mut [f64]) {
        let s = self.b.len();
        for i in 0..s {
            self.stage.copy_from_slice(y);
            for j in 0..i {
                let w = h * self.a[i][j];
                if w != 0.0 {
                    for (sv, kv) in self.stage.iter_mut().zip(&self.k[j]) {
                        *sv += w * kv;
                    }
                }
            }
            rhs(tn + self.c[i] * h, &self.stage, &mut self.k[i]);
        }
        for i in 0..s {
            let w = h * self.b[i];
            for (yv, kv) in y.iter_mut().zip(&self.k[i]) {
                *yv += w * kv;
            }
        }
    }
}

/// Low-storage stepper for reduced Van der Houwen schemes.
///
/// Exploits the tied structure `a[i][j] = b[j]` for `j <= i - 2`: once a
/// stage derivative is folded into the running solution accumulator it is
/// never needed again, so a step holds only the stage state `u`, the
/// accumulator (the caller's `y`), and the current derivative `k` — three
/// state-sized vectors regardless of the stage count. No allocation
/// happens during stepping.
pub struct LowStorageIntegrator {
    a_sub: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    u: Vec<f64>,
    k: Vec<f64>,
}

impl LowStorageIntegrator {
    pub fn new(params: &ReducedParameters, dimension: usize) -> Self {
        let s = params.s;
        let mut c = vec![0.0; s];
        let mut prefix = 0.0;
        for i in 1..s {
            c[i] = prefix + params.a_sub[i - 1];
            prefix += params.b[i - 1];
        }
        Self {
            a_sub: params.a_sub.clone(),
            b: params.b.clone(),
            c,
            u: vec![0.0; dimension],
            k: vec![0.0; dimension],
        }
    }

    /// Number of internal state-sized work vectors.
    pub fn workspace_vectors(&self) -> usize {
        2
    }
}

impl Stepper for LowStorageIntegrator {
    fn step(&mut self, rhs: &RhsFn, tn: f64, h: f64, y: &mut [f64]) {
        let s = self.b.len();
        // Invariant entering stage i: y = y_n + h * sum_{j<i} b_j k_j,
        // which is exactly the shared prefix of every later stage state.
        self.u.copy_from_slice(y);
        for i in 0..s {
            rhs(tn + self.c[i] * h, &self.u, &mut self.k);
            if i + 1 < s {
                let w = h * self.a_sub[i];
                for (uv, (yv, kv)) in self.u.iter_mut().zip(y.iter().zip(&self.k)) {
                    *uv = yv + w * kv;
                }
            }
            let w = h * self.b[i];
            for (yv, kv) in y.iter_mut().zip(&self.k) {
                *yv += w * kv;
            }
        }
    }
}

/// One explicit step `y_{n+1} = y_n + h sum_i b_i k_i` with
/// `k_i = f(t_n + c_i h, y_n + h sum_{j<i} a_ij k_j)`.
pub fn rk_step(t: &ButcherTableau, problem: &IvProblem, tn: f64, yn: &[f64], h: f64) -> Vec<f64> {
    let mut stepper = RkIntegrator::new(t, yn.len());
    let mut y = yn.to_vec();
    stepper.step(&*problem.rhs, tn, h, &mut y);
    y
}

/// One low-storage step on a reduced scheme; bitwise-independent of, and
/// equal to, [`rk_step`] on the expanded tableau up to round-off.
pub fn low_storage_step(
    params: &ReducedParameters,
    problem: &IvProblem,
    tn: f64,
    yn: &[f64],
    h: f64,
) -> Vec<f64> {
    let mut stepper = LowStorageIntegrator::new(params, yn.len());
    let mut y = yn.to_vec();
    stepper.step(&*problem.rhs, tn, h, &mut y);
    y
}
