//! `esrk` — workbench for discovering, optimizing, and certifying
//! low-storage extended-stability Runge-Kutta schemes.
//!
//! Verbs: `baseline`, `discover`, `solve`, `validate`, `converge`,
//! `stability`. Every command is deterministic given (argv, config file,
//! seed); timestamps and wall times live in dedicated fields and never
//! feed computation. Exit codes: 0 success, 1 computational failure,
//! 2 usage or parse error.

mod config;

use clap::{Parser, Subcommand};
use config::{effective_config, CampaignConfig, Spacing};
use esrk::benchmarks::{
    brusselator_1d, brusselator_2d, geometric_step_grid, run_convergence_study, stokes_problem,
    Brusselator1dParams, Brusselator2dParams, IvProblem, StokesParams,
};
use esrk::heuristics::{format_expression, parse_expression, HeuristicExpression};
use esrk::persist::{self, dump_to_csv, grid_to_csv, study_to_csv, Provenance, TableauDocument};
use esrk::search::{comparison_report, discover_with, run_baseline, HeuristicRecord, RecordStatus};
use esrk::solver::{iteration_statistics, solve, RunStatistics};
use esrk::stability::{stability_grid, validate_scheme, StabilityConfig};
use esrk::tableau::{apply_constraints, validate_tableau};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "esrk", version, about = "Low-storage ESRK scheme workbench")]
struct Cli {
    /// Campaign configuration file (TOML); flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Campaign seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Stage count.
    #[arg(long, short = 's', global = true)]
    stages: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run heuristic-free solves and report iteration statistics.
    Baseline {
        #[arg(long)]
        runs: usize,
    },
    /// Run a discovery campaign, appending every evaluation to the store.
    Discover {
        /// Total number of solve evaluations.
        #[arg(long)]
        budget: u32,
        #[arg(long)]
        mutation_limit: Option<u32>,
        #[arg(long)]
        fallback_limit: Option<u32>,
        /// Mean iterations used by the stable-and-faster gate.
        #[arg(long)]
        baseline_mean: Option<f64>,
    },
    /// Solve the feasibility problem and write the scheme as a tableau file.
    Solve {
        /// Heuristic constraint in the text grammar; repeatable.
        #[arg(long = "heuristic")]
        heuristics: Vec<String>,
        #[arg(long)]
        multistart: Option<u32>,
        #[arg(long)]
        required_extent: Option<f64>,
        /// Output file; defaults to `tableau.json` in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Certify a tableau file: order conditions, beta conditions, extent.
    Validate {
        tableau: PathBuf,
        /// Also write the stability-region grid CSV.
        #[arg(long)]
        grid: bool,
        #[arg(long)]
        required_extent: Option<f64>,
    },
    /// Report the stability polynomial of a tableau file.
    Stability {
        tableau: PathBuf,
        /// Also write the stability-region grid CSV.
        #[arg(long)]
        grid: bool,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
    },
    /// Run a temporal convergence study of a tableau on a benchmark.
    Converge {
        tableau: PathBuf,
        /// One of: brusselator1d, brusselator2d, stokes.
        #[arg(long)]
        problem: String,
        #[arg(long)]
        step_max: Option<f64>,
        #[arg(long)]
        step_min: Option<f64>,
        #[arg(long)]
        step_count: Option<usize>,
        #[arg(long, value_enum)]
        spacing: Option<Spacing>,
    },
}

enum CliError {
    Usage(String),
    Compute(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
    fn compute(msg: impl Into<String>) -> Self {
        CliError::Compute(msg.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Usage(format!("{e:#}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

fn ensure_out_dir(cfg: &CampaignConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::usage(format!("cannot create output directory: {e}")))
}

fn write_text(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::compute(format!("write {path:?}: {e}")))
}

fn parse_heuristics(texts: &[String], s: usize) -> Result<Vec<HeuristicExpression>, CliError> {
    texts
        .iter()
        .map(|t| {
            parse_expression(t, s).map_err(|e| CliError::usage(format!("--heuristic \"{t}\": {e}")))
        })
        .collect()
}

fn load_tableau(path: &PathBuf) -> Result<(TableauDocument, esrk::ButcherTableau), CliError> {
    let doc = persist::read_tableau(path)
        .map_err(|e| CliError::usage(format!("cannot read tableau {path:?}: {e}")))?;
    let params = doc
        .to_params()
        .map_err(|e| CliError::usage(format!("invalid tableau document: {e}")))?;
    let tableau = apply_constraints(&params)
        .map_err(|e| CliError::usage(format!("invalid tableau document: {e}")))?;
    Ok((doc, tableau))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = effective_config(
        cli.config.as_deref(),
        cli.stages,
        cli.seed,
        cli.out.as_deref(),
    )?;
    match cli.command {
        Command::Baseline { runs } => cmd_baseline(runs, cfg),
        Command::Discover {
            budget,
            mutation_limit,
            fallback_limit,
            baseline_mean,
        } => {
            let mut cfg = cfg;
            if let Some(v) = mutation_limit {
                cfg.search.mutation_limit = v;
            }
            if let Some(v) = fallback_limit {
                cfg.search.fallback_limit = v;
            }
            if baseline_mean.is_some() {
                cfg.search.baseline_mean = baseline_mean;
            }
            cmd_discover(budget, cfg)
        }
        Command::Solve {
            heuristics,
            multistart,
            required_extent,
            output,
        } => {
            let mut cfg = cfg;
            if let Some(v) = multistart {
                cfg.solver.multistart = v;
            }
            if let Some(v) = required_extent {
                cfg.solver.required_extent = v;
            }
            cmd_solve(&heuristics, output, cfg)
        }
        Command::Validate {
            tableau,
            grid,
            required_extent,
        } => {
            let mut cfg = cfg;
            if let Some(v) = required_extent {
                cfg.solver.required_extent = v;
            }
            cmd_validate(&tableau, grid, cfg)
        }
        Command::Stability {
            tableau,
            grid,
            nx,
            ny,
        } => cmd_stability(&tableau, grid, nx.unwrap_or(181), ny.unwrap_or(121), cfg),
        Command::Converge {
            tableau,
            problem,
            step_max,
            step_min,
            step_count,
            spacing,
        } => {
            let mut cfg = cfg;
            if let Some(v) = step_max {
                cfg.benchmarks.step_max = v;
            }
            if let Some(v) = step_min {
                cfg.benchmarks.step_min = v;
            }
            if let Some(v) = step_count {
                cfg.benchmarks.step_count = v;
            }
            if let Some(v) = spacing {
                cfg.benchmarks.spacing = v;
            }
            cmd_converge(&tableau, &problem, cfg)
        }
    }
}

fn cmd_baseline(runs: usize, cfg: CampaignConfig) -> Result<(), CliError> {
    if runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    ensure_out_dir(&cfg)?;
    let (records, stats) = run_baseline(cfg.s, runs, &cfg.search_config())
        .map_err(|e| CliError::compute(e.to_string()))?;
    let echo = cfg.echo_line();
    let dump = dump_to_csv(&records, &[("config", &echo)]);
    write_text(&cfg.output_dir.join("baseline_runs.csv"), &dump)?;

    let stats_doc = serde_json::json!({
        "config": cfg.echo(),
        "statistics": stats,
    });
    write_text(
        &cfg.output_dir.join("baseline_stats.json"),
        &format!("{:#}\n", stats_doc),
    )?;
    println!(
        "baseline: {} runs, {} converged; mean {:.1} median {:.1} std {:.1} min {} max {}",
        runs, stats.count, stats.mean, stats.median, stats.std, stats.min, stats.max
    );
    Ok(())
}

fn cmd_discover(budget: u32, cfg: CampaignConfig) -> Result<(), CliError> {
    if budget == 0 {
        return Err(CliError::usage("--budget must be at least 1"));
    }
    ensure_out_dir(&cfg)?;
    let store = cfg.output_dir.join("heuristic_store.jsonl");
    let sidecar = cfg.output_dir.join("discover_config.json");
    write_text(&sidecar, &format!("{:#}\n", cfg.echo()))?;
    let mut io_error: Option<String> = None;
    discover_with(cfg.s, budget, &cfg.search_config(), |record| {
        let mut stamped: HeuristicRecord = record.clone();
        stamped.timestamp = Some(timestamp());
        if let Err(e) = persist::append_record(&store, &stamped) {
            io_error.get_or_insert(e.to_string());
        }
        println!(
            "{:?} depth {} iters {} {}",
            stamped.status, stamped.mutation_depth, stamped.iterations, stamped.expression
        );
    })
    .map_err(|e| CliError::compute(e.to_string()))?;
    if let Some(e) = io_error {
        return Err(CliError::compute(format!("store write failed: {e}")));
    }
    // Post-campaign comparison against a measured baseline, when one has
    // been run into the same output directory.
    let records: Vec<HeuristicRecord> = persist::read_records(&store)
        .map_err(|e| CliError::compute(format!("store readback failed: {e}")))?;
    let accepted: Vec<&HeuristicRecord> = records
        .iter()
        .filter(|r| r.status == RecordStatus::Accepted)
        .collect();
    println!(
        "campaign complete: {} evaluations, {} accepted -> {}",
        records.len(),
        accepted.len(),
        store.display()
    );
    let baseline_path = cfg.output_dir.join("baseline_stats.json");
    if !accepted.is_empty() && baseline_path.exists() {
        let text = std::fs::read_to_string(&baseline_path)
            .map_err(|e| CliError::compute(e.to_string()))?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::compute(e.to_string()))?;
        let baseline: RunStatistics = serde_json::from_value(doc["statistics"].clone())
            .map_err(|e| CliError::compute(format!("baseline stats unreadable: {e}")))?;
        let iters: Vec<u64> = accepted.iter().map(|r| r.iterations).collect();
        let heuristic = iteration_statistics(&iters, records.len() - iters.len());
        let cmp = comparison_report(&baseline, &heuristic);
        let doc = serde_json::json!({
            "config": cfg.echo(),
            "comparison": cmp,
            "reference": {
                "ipopt_baseline_mean": esrk::search::reference::IPOPT_BASELINE_MEAN,
                "ipopt_baseline_median": esrk::search::reference::IPOPT_BASELINE_MEDIAN,
                "ipopt_heuristic_means": esrk::search::reference::IPOPT_HEURISTIC_MEANS,
            },
        });
        let path = cfg.output_dir.join("comparison.json");
        write_text(&path, &format!("{:#}\n", doc))?;
        println!(
            "comparison vs baseline: mean ratio {:.3} ({:+.1}% iterations)",
            cmp.mean_ratio, -cmp.mean_reduction_percent
        );
    }
    Ok(())
}

fn cmd_solve(
    texts: &[String],
    output: Option<PathBuf>,
    cfg: CampaignConfig,
) -> Result<(), CliError> {
    let exprs = parse_heuristics(texts, cfg.s)?;
    ensure_out_dir(&cfg)?;
    let report = solve(cfg.s, &exprs, &cfg.solver).map_err(|e| CliError::usage(e.to_string()))?;
    println!(
        "solve: {} after {} iterations (free dimension {}, |F| {:.3e})",
        report.status, report.iterations, report.free_dimension, report.residual_norm
    );
    let Some(tableau) = report.tableau else {
        return Err(CliError::compute(format!(
            "solve did not certify: status {}, max order violation {:.3e}, extent {:.3}",
            report.status, report.max_order_violation, report.stability.real_axis_extent
        )));
    };
    println!(
        "certified: order {:.3e}, beta {:.3e}, extent {:.4}",
        report.max_order_violation, report.stability.beta_error, report.stability.real_axis_extent
    );
    let params = esrk::ReducedParameters::from_tableau(&tableau);
    let doc = TableauDocument::from_params(
        &params,
        Provenance {
            heuristics: exprs.iter().map(format_expression).collect(),
            solver_seed: cfg.solver.seed,
            timestamp: Some(timestamp()),
            config: Some(cfg.echo()),
        },
    );
    let path = output.unwrap_or_else(|| cfg.output_dir.join("tableau.json"));
    persist::write_tableau(&path, &doc).map_err(|e| CliError::compute(e.to_string()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_validate(tableau_path: &PathBuf, grid: bool, cfg: CampaignConfig) -> Result<(), CliError> {
    let (_, tableau) = load_tableau(tableau_path)?;
    ensure_out_dir(&cfg)?;
    let violations = validate_tableau(&tableau);
    for v in &violations {
        println!("structure: FAIL {v}");
    }
    let residuals = esrk::order_residuals(&tableau);
    let order_ok = residuals.is_feasible(esrk::order_conditions::ORDER_TOL);
    let names = [
        "sum b = 1",
        "sum b c = 1/2",
        "sum b c^2 = 1/3",
        "sum b A c = 1/6",
        "sum b c^3 = 1/4",
        "sum b (Ac) c = 1/8",
        "sum b A c^2 = 1/12",
        "sum b A A c = 1/24",
    ];
    for (k, (r, name)) in residuals.r.iter().zip(names).enumerate() {
        if r.abs() > esrk::order_conditions::ORDER_TOL {
            println!("order condition {}: FAIL ({name}, residual {r:.3e})", k + 1);
        }
    }
    println!(
        "order: {} (max residual {:.3e})",
        if order_ok { "PASS" } else { "FAIL" },
        residuals.max_abs()
    );
    let stab_cfg = StabilityConfig::for_stages(tableau.s, cfg.solver.required_extent);
    let report = validate_scheme(&tableau, &stab_cfg);
    println!(
        "beta: {} (error {:.3e})",
        if report.beta_error <= stab_cfg.beta_tol {
            "PASS"
        } else {
            "FAIL"
        },
        report.beta_error
    );
    println!(
        "extent: {} ({:.4} vs required {:.4})",
        if report.real_axis_extent >= stab_cfg.required_extent {
            "PASS"
        } else {
            "FAIL"
        },
        report.real_axis_extent,
        stab_cfg.required_extent
    );
    if grid {
        write_grid_csv(&tableau, &report.beta, 181, 121, &cfg)?;
    }
    if violations.is_empty() && order_ok && report.is_stable {
        println!("certification: PASS");
        Ok(())
    } else {
        println!("certification: FAIL");
        Err(CliError::compute("certification failed"))
    }
}

fn write_grid_csv(
    tableau: &esrk::ButcherTableau,
    beta: &[f64],
    nx: usize,
    ny: usize,
    cfg: &CampaignConfig,
) -> Result<(), CliError> {
    // Window sized from the measured extent so the whole region is visible.
    let extent =
        esrk::stability::real_axis_extent(beta, 0.4 * (tableau.s * tableau.s) as f64, 2048, 1e-8);
    let re_max = 0.15 * (extent + 1.0);
    let im_max = 0.6 * (extent + 1.0);
    let g = stability_grid(
        tableau,
        [-(extent * 1.15 + 1.0), re_max],
        [-im_max, im_max],
        nx,
        ny,
    );
    let echo = cfg.echo_line();
    let csv = grid_to_csv(&g, &[("config", &echo)]);
    let path = cfg.output_dir.join("stability_grid.csv");
    write_text(&path, &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_stability(
    tableau_path: &PathBuf,
    grid: bool,
    nx: usize,
    ny: usize,
    cfg: CampaignConfig,
) -> Result<(), CliError> {
    let (_, tableau) = load_tableau(tableau_path)?;
    ensure_out_dir(&cfg)?;
    let stab_cfg = StabilityConfig::for_stages(tableau.s, cfg.solver.required_extent);
    let report = validate_scheme(&tableau, &stab_cfg);
    let doc = serde_json::json!({
        "config": cfg.echo(),
        "beta": report.beta,
        "beta_error": report.beta_error,
        "real_axis_extent": report.real_axis_extent,
        "root_sum": report.root_sum,
        "is_stable": report.is_stable,
    });
    let path = cfg.output_dir.join("stability.json");
    write_text(&path, &format!("{:#}\n", doc))?;
    println!(
        "extent {:.4}, beta error {:.3e}, stable {}",
        report.real_axis_extent, report.beta_error, report.is_stable
    );
    if grid {
        write_grid_csv(&tableau, &report.beta, nx, ny, &cfg)?;
    }
    Ok(())
}

fn build_problem(name: &str, cfg: &CampaignConfig) -> Result<IvProblem, CliError> {
    let b = &cfg.benchmarks;
    match name {
        "brusselator1d" => Ok(brusselator_1d(Brusselator1dParams { k1: b.k1, k2: b.k2 })),
        "brusselator2d" => Ok(brusselator_2d(Brusselator2dParams {
            du: b.du,
            dv: b.dv,
            a: b.a,
            b: b.b,
            grid_n: b.grid_n,
            perturbation_amplitude: b.perturbation_amplitude,
            t_final: b.brusselator2d_t_final,
        })),
        "stokes" => Ok(stokes_problem(StokesParams {
            nu: b.nu,
            grid_n: b.grid_n,
            t_final: b.stokes_t_final,
        })),
        other => Err(CliError::usage(format!(
            "unknown problem \"{other}\"; expected one of brusselator1d, brusselator2d, stokes"
        ))),
    }
}

fn cmd_converge(
    tableau_path: &PathBuf,
    problem: &str,
    cfg: CampaignConfig,
) -> Result<(), CliError> {
    let (_, tableau) = load_tableau(tableau_path)?;
    let problem_def = build_problem(problem, &cfg)?;
    ensure_out_dir(&cfg)?;
    let b = &cfg.benchmarks;
    let grid = match b.spacing {
        Spacing::Geometric => geometric_step_grid(b.step_max, b.step_min, b.step_count),
        Spacing::Arithmetic => {
            let n = b.step_count;
            (0..n)
                .map(|k| b.step_max + (b.step_min - b.step_max) * k as f64 / (n - 1) as f64)
                .collect()
        }
    };
    let study = run_convergence_study(&tableau, &problem_def, &grid);
    let echo = cfg.echo_line();
    let csv = study_to_csv(&study, &[("config", &echo)]);
    let path = cfg.output_dir.join(format!("study_{problem}.csv"));
    write_text(&path, &csv)?;
    println!(
        "{problem}: fitted slope {:.3} over {} steps ({} divergent)",
        study.fitted_slope,
        study.steps.len(),
        study.divergent.iter().filter(|&&d| d).count()
    );
    println!("wrote {}", path.display());
    if study.fitted_slope.is_nan() {
        return Err(CliError::compute(
            "no clean steps survived; the study produced no order estimate",
        ));
    }
    Ok(())
}
