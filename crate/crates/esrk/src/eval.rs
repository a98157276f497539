//! Generic evaluation of the reduced system, in plain `f64` or in
//! forward-mode dual numbers for exact derivatives.
//!
//! This is the solver's residual-assembly path. It is deliberately a
//! separate implementation from the certification routines in
//! [`crate::order_conditions`] and [`crate::stability`], so a converged
//! scheme is always re-checked by code that played no part in finding it.

use crate::heuristics::{validate_set, HeuristicError, HeuristicExpression};
use crate::tableau::{CoefficientRef, ReducedParameters};
use std::ops::{Add, Mul, Neg, Sub};

/// Scalar abstraction: `f64` for values, [`Dual`] for value + derivative.
pub(crate) trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(self) -> f64;
    fn abs(self) -> Self;
    fn ln(self) -> Self;

    fn powi(self, n: u32) -> Self {
        let mut acc = self;
        for _ in 1..n {
            acc = acc * self;
        }
        acc
    }

    /// `max(0, self)`, the hinge used for stability penalties.
    fn hinge(self) -> Self {
        if self.value() > 0.0 {
            self
        } else {
            Self::constant(0.0)
        }
    }
}

impl Real for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

/// First-order dual number `v + d·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn seed(v: f64, d: f64) -> Self {
        Self { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.v * o.d + self.d * o.v,
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: -self.d,
        }
    }
}

impl Real for Dual {
    fn constant(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
    fn value(self) -> f64 {
        self.v
    }
    fn abs(self) -> Self {
        // Subgradient sign(0) := +1; the kink is measure zero.
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }
    fn ln(self) -> Self {
        Dual {
            v: self.v.ln(),
            d: self.d / self.v,
        }
    }
}

/// The reduced feasibility system with a fixed heuristic set: maps the
/// free-parameter vector `theta` (canonical reduced order, targets removed)
/// to order-condition residuals and stability-polynomial coefficients.
#[derive(Debug, Clone)]
pub(crate) struct ReducedSystem {
    s: usize,
    exprs: Vec<HeuristicExpression>,
    free_refs: Vec<CoefficientRef>,
}

impl ReducedSystem {
    pub fn new(s: usize, exprs: Vec<HeuristicExpression>) -> Result<Self, HeuristicError> {
        validate_set(s, &exprs)?;
        let targets: Vec<CoefficientRef> = exprs.iter().map(|e| e.target()).collect();
        let free_refs = CoefficientRef::all(s)
            .filter(|r| !targets.contains(r))
            .collect();
        Ok(Self {
            s,
            exprs,
            free_refs,
        })
    }

    pub fn stage_count(&self) -> usize {
        self.s
    }

    pub fn free_len(&self) -> usize {
        self.free_refs.len()
    }

    /// Reads the free coordinates out of a full reduced-parameter value.
    pub fn theta_from_params(&self, p: &ReducedParameters) -> Vec<f64> {
        self.free_refs.iter().map(|&r| p.get(r)).collect()
    }

    /// Expands `theta` to the full reduced set, heuristic targets included.
    pub fn params_from_theta(&self, theta: &[f64]) -> ReducedParameters {
        let (a_sub, b) = self.expand::<f64>(theta);
        ReducedParameters {
            s: self.s,
            a_sub,
            b,
        }
    }

    fn expand<T: Real>(&self, theta: &[T]) -> (Vec<T>, Vec<T>) {
        debug_assert_eq!(theta.len(), self.free_refs.len());
        let s = self.s;
        let zero = T::constant(0.0);
        let mut vals = vec![zero; 2 * s - 1];
        for (&r, &v) in self.free_refs.iter().zip(theta) {
            vals[r.reduced_index(s)] = v;
        }
        for e in &self.exprs {
            let value = e.evaluate_generic(&|r| vals[r.reduced_index(s)]);
            vals[e.target().reduced_index(s)] = value;
        }
        let a_sub = vals[..s - 1].to_vec();
        let b = vals[s - 1..].to_vec();
        (a_sub, b)
    }

    /// Order-condition residuals and the full stability coefficient vector
    /// `beta[0..=s]`, evaluated generically from the free vector.
    pub fn order_and_beta<T: Real>(&self, theta: &[T]) -> ([T; 8], Vec<T>) {
        let s = self.s;
        let (a_sub, b) = self.expand(theta);
        let zero = T::constant(0.0);

        // c from row sums: c[i] = b[0] + .. + b[i-2] + a_sub[i-1].
        let mut c = vec![zero; s];
        let mut prefix = zero;
        for i in 1..s {
            c[i] = prefix + a_sub[i - 1];
            prefix = prefix + b[i - 1];
        }

        // Row contractions against the implicit A.
        let contract = |v: &[T]| -> Vec<T> {
            // (A v)_i with running prefix over the b-tied columns.
            let mut out = vec![zero; s];
            let mut run = zero;
            for i in 1..s {
                out[i] = run + a_sub[i - 1] * v[i - 1];
                run = run + b[i - 1] * v[i - 1];
            }
            out
        };

        let c2: Vec<T> = c.iter().map(|&x| x * x).collect();
        let ac = contract(&c);
        let ac2 = contract(&c2);
        let aac = contract(&ac);

        let mut sums = [zero; 8];
        for i in 0..s {
            sums[0] = sums[0] + b[i];
            sums[1] = sums[1] + b[i] * c[i];
            sums[2] = sums[2] + b[i] * c2[i];
            sums[3] = sums[3] + b[i] * ac[i];
            sums[4] = sums[4] + b[i] * c2[i] * c[i];
            sums[5] = sums[5] + b[i] * ac[i] * c[i];
            sums[6] = sums[6] + b[i] * ac2[i];
            sums[7] = sums[7] + b[i] * aac[i];
        }
        let mut r = [zero; 8];
        for k in 0..8 {
            r[k] = sums[k] - T::constant(crate::order_conditions::ORDER_TARGETS[k]);
        }

        // beta[k] = b^T A^(k-1) 1, truncating exactly at the nilpotency
        // degree.
        let mut beta = vec![zero; s + 1];
        beta[0] = T::constant(1.0);
        let mut v = vec![T::constant(1.0); s];
        for k in 1..=s {
            let mut dot = zero;
            for i in 0..s {
                dot = dot + b[i] * v[i];
            }
            beta[k] = dot;
            if k < s {
                v = contract(&v);
            }
        }
        (r, beta)
    }

    /// Jacobian of the eight order residuals: row `k`, column `m` is
    /// `dr_k / dtheta_m`.
    pub fn order_jacobian(&self, theta: &[f64]) -> [Vec<f64>; 8] {
        let n = theta.len();
        let mut rows: [Vec<f64>; 8] = Default::default();
        for row in rows.iter_mut() {
            row.resize(n, 0.0);
        }
        for m in 0..n {
            let seeded: Vec<Dual> = theta
                .iter()
                .enumerate()
                .map(|(i, &v)| Dual::seed(v, if i == m { 1.0 } else { 0.0 }))
                .collect();
            let (r, _) = self.order_and_beta::<Dual>(&seeded);
            for k in 0..8 {
                rows[k][m] = r[k].d;
            }
        }
        rows
    }
}

/// Evaluates `R(-x)` for real `x >= 0` by Horner's rule on `beta`.
pub(crate) fn poly_at_negative_real<T: Real>(beta: &[T], x: f64) -> T {
    let z = T::constant(-x);
    let mut acc = *beta.last().expect("nonempty beta");
    for &coef in beta.iter().rev().skip(1) {
        acc = acc * z + coef;
    }
    acc
}
