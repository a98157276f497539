//! The eight fourth-order Butcher order conditions.
//!
//! A tableau is fourth-order accurate when all eight residuals vanish:
//!
//! ```text
//! sum b            = 1        sum b c^3        = 1/4
//! sum b c          = 1/2      sum b (Ac) c     = 1/8
//! sum b c^2        = 1/3      sum b A c^2      = 1/12
//! sum b A c        = 1/6      sum b A A c      = 1/24
//! ```
//!
//! Sums run over the strictly lower triangle only; for an explicit scheme
//! the diagonal terms are structural zeros and skipping them changes
//! nothing. Summation is fixed left to right so results are bit-reproducible
//! on a given platform.

use crate::eval::ReducedSystem;
use crate::heuristics::{HeuristicError, HeuristicExpression};
use crate::tableau::{ButcherTableau, ReducedParameters};

/// Right-hand-side constants of the eight conditions, in residual order.
pub const ORDER_TARGETS: [f64; 8] = [
    1.0,
    1.0 / 2.0,
    1.0 / 3.0,
    1.0 / 6.0,
    1.0 / 4.0,
    1.0 / 8.0,
    1.0 / 12.0,
    1.0 / 24.0,
];

/// Default certification tolerance on `max |r_k|`.
///
/// Looser than the solver's own residual target so certification is robust
/// across platforms.
pub const ORDER_TOL: f64 = 1e-10;

/// The eight order-condition residuals of one tableau.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderResiduals {
    /// `[sum b - 1, sum bc - 1/2, sum bc^2 - 1/3, sum bAc - 1/6,
    ///   sum bc^3 - 1/4, sum b(Ac)c - 1/8, sum bAc^2 - 1/12, sum bAAc - 1/24]`
    pub r: [f64; 8],
}

impl OrderResiduals {
    /// Largest residual magnitude.
    pub fn max_abs(&self) -> f64 {
        self.r.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Whether the tableau certifies as order-4 feasible at `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }
}

/// Evaluates the eight residuals by direct nested summation.
pub fn order_residuals(t: &ButcherTableau) -> OrderResiduals {
    let s = t.s;
    let b = &t.b;
    let c = &t.c;

    // Stage-wise contractions of the lower triangle.
    let mut ac = vec![0.0; s]; // (A c)_i
    let mut ac2 = vec![0.0; s]; // (A c^2)_i
    for i in 0..s {
        let mut d = 0.0;
        let mut e = 0.0;
        for j in 0..i {
            d += t.a[i][j] * c[j];
            e += t.a[i][j] * c[j] * c[j];
        }
        ac[i] = d;
        ac2[i] = e;
    }
    let mut aac = vec![0.0; s]; // (A A c)_i
    for i in 0..s {
        let mut g = 0.0;
        for j in 0..i {
            g += t.a[i][j] * ac[j];
        }
        aac[i] = g;
    }

    let mut sums = [0.0; 8];
    for i in 0..s {
        sums[0] += b[i];
        sums[1] += b[i] * c[i];
        sums[2] += b[i] * c[i] * c[i];
        sums[3] += b[i] * ac[i];
        sums[4] += b[i] * c[i] * c[i] * c[i];
        sums[5] += b[i] * ac[i] * c[i];
        sums[6] += b[i] * ac2[i];
        sums[7] += b[i] * aac[i];
    }
    let mut r = [0.0; 8];
    for k in 0..8 {
        r[k] = sums[k] - ORDER_TARGETS[k];
    }
    OrderResiduals { r }
}

/// Jacobian of the eight residuals with respect to the free parameter
/// vector, heuristic targets substituted out.
///
/// Row `k`, column `m` holds the partial of residual `k` with respect to
/// the `m`-th remaining free coefficient, where free coefficients keep the
/// canonical reduced ordering (subdiagonal entries, then weights) with the
/// heuristic targets removed. Derivatives are exact (forward-mode dual
/// numbers), not finite differences.
pub fn order_residual_jacobian(
    params: &ReducedParameters,
    active_heuristics: &[HeuristicExpression],
) -> Result<[Vec<f64>; 8], HeuristicError> {
    let system = ReducedSystem::new(params.s, active_heuristics.to_vec())?;
    let theta = system.theta_from_params(params);
    Ok(system.order_jacobian(&theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::apply_constraints;

    #[test]
    fn classical_rk4_satisfies_all_eight() {
        let r = order_residuals(&ButcherTableau::classical_rk4());
        assert!(r.max_abs() <= 1e-15, "residuals {:?}", r.r);
        assert!(r.is_feasible(ORDER_TOL));
    }

    #[test]
    fn forward_euler_residuals_are_the_targets() {
        let r = order_residuals(&ButcherTableau::forward_euler());
        let expected = [
            0.0,
            -1.0 / 2.0,
            -1.0 / 3.0,
            -1.0 / 6.0,
            -1.0 / 4.0,
            -1.0 / 8.0,
            -1.0 / 12.0,
            -1.0 / 24.0,
        ];
        for k in 0..8 {
            assert!((r.r[k] - expected[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn doubling_b_shifts_first_residual_by_one() {
        let mut t = ButcherTableau::classical_rk4();
        assert!(order_residuals(&t).r[0].abs() < 1e-15);
        for w in &mut t.b {
            *w *= 2.0;
        }
        assert!((order_residuals(&t).r[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_two_stage_analytic_entries() {
        // s = 2, theta = [x, b0, b1] with a_sub = [x]:
        // r0 = b0 + b1 - 1          -> dr0/db0 = 1, dr0/dx = 0
        // r1 = b1 * x - 1/2         -> dr1/dx  = b1
        let p = ReducedParameters::new(2, vec![0.3], vec![0.4, 0.6]).unwrap();
        let jac = order_residual_jacobian(&p, &[]).unwrap();
        // columns: [a(1,0), b(0), b(1)]
        assert_eq!(jac[0].len(), 3);
        assert!((jac[0][1] - 1.0).abs() < 1e-15, "dr0/db0");
        assert!(jac[0][0].abs() < 1e-15, "dr0/dx");
        assert!((jac[1][0] - 0.6).abs() < 1e-15, "dr1/dx = b1");
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let s = 16;
        let mut rng = crate::rng::seeded(0x0C);
        use rand::Rng;
        let a_sub: Vec<f64> = (0..s - 1).map(|_| rng.random_range(-0.5..0.5)).collect();
        let b: Vec<f64> = (0..s).map(|_| rng.random_range(-0.5..0.5)).collect();
        let p = ReducedParameters::new(s, a_sub, b).unwrap();
        let jac = order_residual_jacobian(&p, &[]).unwrap();

        let h = 1e-7;
        for m in 0..p.len() {
            let r = crate::tableau::CoefficientRef::from_reduced_index(s, m);
            let mut plus = p.clone();
            plus.set(r, plus.get(r) + h);
            let mut minus = p.clone();
            minus.set(r, minus.get(r) - h);
            let rp = order_residuals(&apply_constraints(&plus).unwrap());
            let rm = order_residuals(&apply_constraints(&minus).unwrap());
            for k in 0..8 {
                let fd = (rp.r[k] - rm.r[k]) / (2.0 * h);
                let an = jac[k][m];
                let denom = fd.abs().max(an.abs()).max(1.0);
                assert!(
                    (fd - an).abs() / denom < 1e-6,
                    "residual {k}, parameter {m}: fd {fd} vs analytic {an}"
                );
            }
        }
    }
}
