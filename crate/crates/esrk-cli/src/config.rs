//! Campaign configuration: file values overridden by command-line flags,
//! with the effective merged result echoed into every output.

use esrk::search::{AcceptancePolicy, SearchConfig};
use esrk::solver::SolveConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Step-grid spacing for convergence studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Geometric,
    Arithmetic,
}

/// Search-loop settings (the solver and seed live at campaign level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub mutation_limit: u32,
    pub fallback_limit: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_mean: Option<f64>,
    pub acceptance: AcceptancePolicy,
    pub max_terms: usize,
    pub max_terms_after_mutation: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        let d = SearchConfig::default_for(16);
        Self {
            mutation_limit: d.mutation_limit,
            fallback_limit: d.fallback_limit,
            baseline_mean: None,
            acceptance: d.acceptance,
            max_terms: d.max_terms,
            max_terms_after_mutation: d.max_terms_after_mutation,
        }
    }
}

/// Benchmark problem parameters and the default step grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSettings {
    pub k1: f64,
    pub k2: f64,
    pub du: f64,
    pub dv: f64,
    pub a: f64,
    pub b: f64,
    pub grid_n: usize,
    pub perturbation_amplitude: f64,
    pub brusselator2d_t_final: f64,
    pub nu: f64,
    pub stokes_t_final: f64,
    pub step_max: f64,
    pub step_min: f64,
    pub step_count: usize,
    pub spacing: Spacing,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 2.0,
            du: 0.1,
            dv: 0.1,
            a: 1.0,
            b: 3.0,
            grid_n: 32,
            perturbation_amplitude: 1e-3,
            brusselator2d_t_final: 1.0,
            nu: 0.1,
            stokes_t_final: 1.0,
            step_max: 0.1,
            step_min: 0.001,
            step_count: 20,
            spacing: Spacing::Geometric,
        }
    }
}

/// The effective campaign configuration. Serializes to and from the TOML
/// config file with round-trip identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub s: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub solver: SolveConfig,
    pub search: SearchSettings,
    pub benchmarks: BenchmarkSettings,
}

impl CampaignConfig {
    pub fn defaults(s: usize) -> Self {
        Self {
            s,
            seed: 0,
            output_dir: PathBuf::from("."),
            solver: SolveConfig::default_for(s),
            search: SearchSettings::default(),
            benchmarks: BenchmarkSettings::default(),
        }
    }

    /// Library-level search configuration for this campaign.
    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            mutation_limit: self.search.mutation_limit,
            fallback_limit: self.search.fallback_limit,
            baseline_mean: self.search.baseline_mean.unwrap_or(f64::INFINITY),
            acceptance: self.search.acceptance,
            max_terms: self.search.max_terms,
            max_terms_after_mutation: self.search.max_terms_after_mutation,
            solver: self.solver.clone(),
            seed: self.seed,
        }
    }

    /// The effective config as a JSON value for provenance echoes.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn echo_line(&self) -> String {
        self.echo().to_string()
    }
}

/// Partial form read from the config file: every field optional, layered
/// under CLI flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub s: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub search: SearchOverrides,
    #[serde(default)]
    pub benchmarks: BenchmarkOverrides,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub tol: Option<f64>,
    pub max_iter: Option<u64>,
    pub bounds: Option<[f64; 2]>,
    pub init_scale: Option<f64>,
    pub required_extent: Option<f64>,
    pub stability_samples: Option<usize>,
    pub penalty_weight: Option<f64>,
    pub multistart: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchOverrides {
    pub mutation_limit: Option<u32>,
    pub fallback_limit: Option<u32>,
    pub baseline_mean: Option<f64>,
    pub acceptance: Option<AcceptancePolicy>,
    pub max_terms: Option<usize>,
    pub max_terms_after_mutation: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkOverrides {
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub du: Option<f64>,
    pub dv: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub grid_n: Option<usize>,
    pub perturbation_amplitude: Option<f64>,
    pub brusselator2d_t_final: Option<f64>,
    pub nu: Option<f64>,
    pub stokes_t_final: Option<f64>,
    pub step_max: Option<f64>,
    pub step_min: Option<f64>,
    pub step_count: Option<usize>,
    pub spacing: Option<Spacing>,
}

fn apply<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

/// Builds the effective config: defaults, then file values, then global
/// CLI flags (`--stages`, `--seed`, `--out`). Per-command flags layer on
/// top of the result in each command handler.
pub fn effective_config(
    file: Option<&Path>,
    stages: Option<usize>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> anyhow::Result<CampaignConfig> {
    let parsed: ConfigFile = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("config parse error: {e}"))?
        }
        None => ConfigFile::default(),
    };
    let s = stages.or(parsed.s).unwrap_or(16);
    let mut cfg = CampaignConfig::defaults(s);
    apply(&mut cfg.seed, parsed.seed);
    apply(&mut cfg.output_dir, parsed.output_dir);
    apply(&mut cfg.solver.tol, parsed.solver.tol);
    apply(&mut cfg.solver.max_iter, parsed.solver.max_iter);
    apply(&mut cfg.solver.bounds, parsed.solver.bounds);
    apply(&mut cfg.solver.init_scale, parsed.solver.init_scale);
    apply(
        &mut cfg.solver.required_extent,
        parsed.solver.required_extent,
    );
    apply(
        &mut cfg.solver.stability_samples,
        parsed.solver.stability_samples,
    );
    apply(&mut cfg.solver.penalty_weight, parsed.solver.penalty_weight);
    apply(&mut cfg.solver.multistart, parsed.solver.multistart);
    apply(&mut cfg.search.mutation_limit, parsed.search.mutation_limit);
    apply(&mut cfg.search.fallback_limit, parsed.search.fallback_limit);
    if parsed.search.baseline_mean.is_some() {
        cfg.search.baseline_mean = parsed.search.baseline_mean;
    }
    apply(&mut cfg.search.acceptance, parsed.search.acceptance);
    apply(&mut cfg.search.max_terms, parsed.search.max_terms);
    apply(
        &mut cfg.search.max_terms_after_mutation,
        parsed.search.max_terms_after_mutation,
    );
    let b = &mut cfg.benchmarks;
    let o = parsed.benchmarks;
    apply(&mut b.k1, o.k1);
    apply(&mut b.k2, o.k2);
    apply(&mut b.du, o.du);
    apply(&mut b.dv, o.dv);
    apply(&mut b.a, o.a);
    apply(&mut b.b, o.b);
    apply(&mut b.grid_n, o.grid_n);
    apply(&mut b.perturbation_amplitude, o.perturbation_amplitude);
    apply(&mut b.brusselator2d_t_final, o.brusselator2d_t_final);
    apply(&mut b.nu, o.nu);
    apply(&mut b.stokes_t_final, o.stokes_t_final);
    apply(&mut b.step_max, o.step_max);
    apply(&mut b.step_min, o.step_min);
    apply(&mut b.step_count, o.step_count);
    apply(&mut b.spacing, o.spacing);

    apply(&mut cfg.seed, seed);
    if let Some(o) = out {
        cfg.output_dir = o.to_path_buf();
    }
    cfg.solver.seed = cfg.seed;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = CampaignConfig::defaults(16);
        let text = toml::to_string(&cfg).unwrap();
        let back: CampaignConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "s = 8\nseed = 5\n[solver]\ntol = 1e-12\n").unwrap();
        let cfg = effective_config(Some(&path), Some(12), Some(9), None).unwrap();
        assert_eq!(cfg.s, 12);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.solver.tol, 1e-12);
        assert_eq!(cfg.solver.seed, 9);
    }
}
