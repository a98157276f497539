//! Solve, certify, and benchmark one sixteen-stage scheme.
//!
//! ```console
//! cargo run --release -p esrk --example end_to_end
//! ```

use esrk::benchmarks::{
    brusselator_1d, geometric_step_grid, run_convergence_study, Brusselator1dParams,
};
use esrk::heuristics::parse_expression;
use esrk::solver::{solve, SolveConfig};

fn main() {
    let constraint = parse_expression("b(5) = a(2,1)^2", 16).expect("valid heuristic");
    let mut config = SolveConfig::default_for(16);
    config.seed = 3;

    let report = solve(16, std::slice::from_ref(&constraint), &config).expect("valid input");
    println!(
        "solve: {} after {} iterations (free dimension {})",
        report.status, report.iterations, report.free_dimension
    );
    let scheme = report.tableau.expect("certified scheme");
    println!(
        "certified: order residual {:.2e}, beta error {:.2e}, extent {:.3}",
        report.max_order_violation, report.stability.beta_error, report.stability.real_axis_extent
    );

    let problem = brusselator_1d(Brusselator1dParams::default());
    let study = run_convergence_study(&scheme, &problem, &geometric_step_grid(0.1, 0.01, 8));
    for (i, (h, e)) in study.steps.iter().zip(&study.errors).enumerate() {
        let order = if i == 0 {
            String::from("      ")
        } else {
            format!("p {:.2}", study.pairwise_orders[i - 1])
        };
        println!("h {h:.4e}  error {e:.4e}  {order}");
    }
    println!("fitted temporal order: {:.3}", study.fitted_slope);
}
