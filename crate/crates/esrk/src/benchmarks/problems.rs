//! The benchmark problem suite: Brusselator reaction(-diffusion) systems
//! and unsteady Stokes flow with Taylor-Green data.

use super::{IvProblem, Reference};

/// 1D (zero-dimensional in space) Brusselator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Brusselator1dParams {
    pub k1: f64,
    pub k2: f64,
}

impl Default for Brusselator1dParams {
    fn default() -> Self {
        Self { k1: 1.0, k2: 2.0 }
    }
}

/// The autocatalytic two-species oscillator
///
/// ```text
/// A' = k1 - (k2 + 1) A + A^2 B
/// B' = k2 A - A^2 B
/// ```
///
/// from `(A, B) = (1.5, 3.0)` over `t` in `[0, 50]`. No closed-form
/// solution exists; the reference is a self-refined run.
pub fn brusselator_1d(params: Brusselator1dParams) -> IvProblem {
    let Brusselator1dParams { k1, k2 } = params;
    IvProblem {
        id: "brusselator1d".into(),
        dimension: 2,
        rhs: Box::new(move |_, y, dy| {
            let (a, b) = (y[0], y[1]);
            dy[0] = k1 - (k2 + 1.0) * a + a * a * b;
            dy[1] = k2 * a - a * a * b;
        }),
        y0: vec![1.5, 3.0],
        t_span: [0.0, 50.0],
        reference: Reference::SelfRefined { refinement: 100 },
    }
}

/// 2D Brusselator reaction-diffusion parameters on the periodic unit
/// square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Brusselator2dParams {
    pub du: f64,
    pub dv: f64,
    pub a: f64,
    pub b: f64,
    pub grid_n: usize,
    /// Amplitude of the deterministic `sin(2 pi x) sin(2 pi y)` seed on `u`.
    pub perturbation_amplitude: f64,
    pub t_final: f64,
}

impl Default for Brusselator2dParams {
    fn default() -> Self {
        Self {
            du: 0.1,
            dv: 0.1,
            a: 1.0,
            b: 3.0,
            grid_n: 32,
            perturbation_amplitude: 1e-3,
            t_final: 1.0,
        }
    }
}

/// Method-of-lines 2D Brusselator: five-point Laplacian, periodic
/// boundaries, `dx = 1 / grid_n`, state `[u, v]` each row-major
/// `grid_n x grid_n`.
///
/// The uniform initial state `u = v = 0.1` leaves diffusion inert, so `u`
/// receives a deterministic sinusoidal perturbation that activates the
/// spatial coupling. The reference is a self-refined run.
pub fn brusselator_2d(params: Brusselator2dParams) -> IvProblem {
    assert!(params.grid_n >= 4);
    let n = params.grid_n;
    let field = n * n;
    let dx = 1.0 / n as f64;
    let inv_dx2 = 1.0 / (dx * dx);
    let Brusselator2dParams { du, dv, a, b, .. } = params;

    let mut y0 = vec![0.1; 2 * field];
    let eps = params.perturbation_amplitude;
    for iy in 0..n {
        for ix in 0..n {
            let x = ix as f64 * dx;
            let yy = iy as f64 * dx;
            y0[iy * n + ix] += eps
                * (2.0 * std::f64::consts::PI * x).sin()
                * (2.0 * std::f64::consts::PI * yy).sin();
        }
    }

    IvProblem {
        id: "brusselator2d".into(),
        dimension: 2 * field,
        rhs: Box::new(move |_, y, dy| {
            let (u, v) = y.split_at(field);
            let (dudt, dvdt) = dy.split_at_mut(field);
            for iy in 0..n {
                let up = if iy + 1 == n { 0 } else { iy + 1 };
                let dn = if iy == 0 { n - 1 } else { iy - 1 };
                for ix in 0..n {
                    let rt = if ix + 1 == n { 0 } else { ix + 1 };
                    let lf = if ix == 0 { n - 1 } else { ix - 1 };
                    let at = iy * n + ix;
                    let lap_u = (u[iy * n + rt] + u[iy * n + lf] + u[up * n + ix] + u[dn * n + ix]
                        - 4.0 * u[at])
                        * inv_dx2;
                    let lap_v = (v[iy * n + rt] + v[iy * n + lf] + v[up * n + ix] + v[dn * n + ix]
                        - 4.0 * v[at])
                        * inv_dx2;
                    let uu = u[at];
                    let vv = v[at];
                    let reaction = uu * uu * vv;
                    dudt[at] = du * lap_u + a - (b + 1.0) * uu + reaction;
                    dvdt[at] = dv * lap_v + b * uu - reaction;
                }
            }
        }),
        y0,
        t_span: [0.0, params.t_final],
        reference: Reference::SelfRefined { refinement: 100 },
    }
}

/// Unsteady Stokes parameters on the periodic square `[0, 2 pi]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesParams {
    pub nu: f64,
    pub grid_n: usize,
    pub t_final: f64,
}

impl Default for StokesParams {
    fn default() -> Self {
        Self {
            nu: 0.1,
            grid_n: 32,
            t_final: 1.0,
        }
    }
}

/// Periodic spectral differentiation kernel of the given order (1 or 2).
///
/// `out[d]` is the coefficient applied to the sample at circular offset
/// `d`, i.e. `(D f)_j = sum_d out[(j - l) mod n] f_l`. Built from the DFT
/// eigenvalues `(i k)^order` with the Nyquist mode zeroed for odd orders,
/// so differentiation of band-limited data is exact to round-off.
pub fn periodic_spectral_kernel(n: usize, order: u32) -> Vec<f64> {
    assert!(order == 1 || order == 2);
    let mut kernel = vec![0.0; n];
    for (d, k_out) in kernel.iter_mut().enumerate() {
        let mut acc = 0.0;
        for m in 0..n {
            let k = if m <= n / 2 {
                m as f64
            } else {
                m as f64 - n as f64
            };
            let k = if order == 1 && 2 * m == n { 0.0 } else { k };
            let phase = 2.0 * std::f64::consts::PI * (m * d) as f64 / n as f64;
            // Real part of (i k)^order e^{i phase} summed over modes.
            acc += match order {
                1 => -k * phase.sin(),
                _ => -k * k * phase.cos(),
            };
        }
        *k_out = acc / n as f64;
    }
    kernel
}

/// Applies the circulant kernel along x (`axis = 0`) or y (`axis = 1`) of
/// a row-major `n x n` field, overwriting or accumulating into `out`.
pub(crate) fn apply_kernel_2d(
    kernel: &[f64],
    field: &[f64],
    axis: usize,
    out: &mut [f64],
    accumulate: bool,
) {
    let n = kernel.len();
    for iy in 0..n {
        for ix in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                let d = match axis {
                    0 => (ix + n - l) % n,
                    _ => (iy + n - l) % n,
                };
                let src = match axis {
                    0 => iy * n + l,
                    _ => l * n + ix,
                };
                acc += kernel[d] * field[src];
            }
            if accumulate {
                out[iy * n + ix] += acc;
            } else {
                out[iy * n + ix] = acc;
            }
        }
    }
}

/// Unsteady Stokes flow with Taylor-Green initial data
/// `u = (sin x cos y, -cos x sin y)`.
///
/// For this divergence-free field the pressure gradient vanishes
/// identically, the evolution reduces to `u' = nu * laplacian(u)`, and —
/// because the data is a single Fourier mode resolved exactly by the
/// spectral stencil — the semi-discrete solution equals the continuous
/// one: `u(t) = e^{-2 nu t} u(0)`. That closed form is the reference.
pub fn stokes_problem(params: StokesParams) -> IvProblem {
    assert!(params.grid_n >= 4);
    let n = params.grid_n;
    let field = n * n;
    let nu = params.nu;
    let d2 = periodic_spectral_kernel(n, 2);

    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut y0 = vec![0.0; 2 * field];
    for iy in 0..n {
        for ix in 0..n {
            let x = ix as f64 * h;
            let y = iy as f64 * h;
            y0[iy * n + ix] = x.sin() * y.cos();
            y0[field + iy * n + ix] = -(x.cos()) * y.sin();
        }
    }
    let y0_ref = y0.clone();

    IvProblem {
        id: "stokes".into(),
        dimension: 2 * field,
        rhs: Box::new(move |_, y, dy| {
            for comp in 0..2 {
                let u = &y[comp * field..(comp + 1) * field];
                let out = &mut dy[comp * field..(comp + 1) * field];
                apply_kernel_2d(&d2, u, 0, out, false);
                apply_kernel_2d(&d2, u, 1, out, true);
                for o in out.iter_mut() {
                    *o *= nu;
                }
            }
        }),
        y0,
        t_span: [0.0, params.t_final],
        reference: Reference::Exact(Box::new(move |t| {
            let decay = (-2.0 * nu * t).exp();
            y0_ref.iter().map(|v| v * decay).collect()
        })),
    }
}
