//! Low-storage stepper contract: identical trajectories to the generic
//! stepper on every benchmark problem, holding three state-sized vectors
//! (stage state, solution accumulator, current derivative) and allocating
//! nothing while stepping.

use esrk::benchmarks::{
    brusselator_1d, brusselator_2d, stokes_problem, Brusselator1dParams, Brusselator2dParams,
    IvProblem, LowStorageIntegrator, RkIntegrator, Stepper, StokesParams,
};
use esrk::solver::{solve, SolveConfig, SolveStatus};
use esrk::tableau::{apply_constraints, ReducedParameters};
use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

struct CountingAllocator;

static ALLOCATIONS: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        ALLOCATIONS.fetch_add(1, Ordering::Relaxed);
        unsafe { System.alloc(layout) }
    }
    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }
}

#[global_allocator]
static COUNTER: CountingAllocator = CountingAllocator;

fn discovered_scheme() -> ReducedParameters {
    let mut cfg = SolveConfig::default_for(16);
    cfg.seed = 40;
    let report = solve(16, &[], &cfg).unwrap();
    assert_eq!(report.status, SolveStatus::Converged);
    ReducedParameters::from_tableau(&report.tableau.unwrap())
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

// One sequential test: the allocation count is process-global, so the
// audit cannot share the binary with concurrently allocating tests.
#[test]
fn low_storage_contract() {
    low_storage_matches_generic_on_all_benchmarks();
    stepping_does_not_allocate();
}

fn low_storage_matches_generic_on_all_benchmarks() {
    let params = discovered_scheme();
    let tableau = apply_constraints(&params).unwrap();
    let problems: Vec<(IvProblem, f64)> = vec![
        (brusselator_1d(Brusselator1dParams::default()), 5e-3),
        (
            brusselator_2d(Brusselator2dParams {
                grid_n: 16,
                ..Default::default()
            }),
            5e-4,
        ),
        (
            stokes_problem(StokesParams {
                grid_n: 16,
                ..Default::default()
            }),
            5e-3,
        ),
    ];
    for (problem, h) in &problems {
        let mut generic = RkIntegrator::new(&tableau, problem.dimension);
        let mut low = LowStorageIntegrator::new(&params, problem.dimension);
        let mut yg = problem.y0.clone();
        let mut yl = problem.y0.clone();
        for n in 0..120u32 {
            let tn = problem.t_span[0] + n as f64 * h;
            generic.step(&*problem.rhs, tn, *h, &mut yg);
            low.step(&*problem.rhs, tn, *h, &mut yl);
        }
        let gap = relative_gap(&yg, &yl);
        assert!(
            gap < 1e-12,
            "{}: low-storage vs generic gap {gap:.3e} after 120 steps",
            problem.id
        );
    }
}

fn stepping_does_not_allocate() {
    let params = discovered_scheme();
    let problem = brusselator_2d(Brusselator2dParams {
        grid_n: 16,
        ..Default::default()
    });
    let mut low = LowStorageIntegrator::new(&params, problem.dimension);
    let mut y = problem.y0.clone();
    // Warm-up step, then count.
    low.step(&*problem.rhs, 0.0, 1e-4, &mut y);
    let before = ALLOCATIONS.load(Ordering::SeqCst);
    for n in 0..100u32 {
        low.step(&*problem.rhs, n as f64 * 1e-4, 1e-4, &mut y);
    }
    let after = ALLOCATIONS.load(Ordering::SeqCst);
    assert_eq!(
        after - before,
        0,
        "low-storage stepping allocated {} times",
        after - before
    );
    assert!(y.iter().all(|v| v.is_finite()));
    // Workspace: stage state + derivative inside, accumulator is the
    // caller's state vector itself.
    assert_eq!(low.workspace_vectors(), 2);
}
