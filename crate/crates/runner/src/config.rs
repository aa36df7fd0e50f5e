//! Experiment configuration: per-experiment defaults, a TOML file on top, flags on top of that.

use std::path::{Path, PathBuf};

use clap::Args;
use dnls_core::dynamics::EvolutionConfig;
use dnls_core::perturb::PerturbationSpec;
use dnls_core::solver::SolverOptions;
use dnls_core::{GridSpec, WaveParams};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RunError};

/// Starting field of an evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    /// The discrete wave from the Newton solver.
    Eta,
    /// The continuous soliton sampled on the lattice.
    Psi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gates {
    /// Largest admissible orbital distance over a stability run.
    pub delta_max: f64,
    /// Admissible consistency slopes; `None` means `2n ± 0.3` for `n = 1` and `2n ± 0.4` above.
    pub slope_window: Option<[f64; 2]>,
    /// Admissible excess of the Sobolev growth exponent over `(n - 1)/2`.
    pub growth_margin: f64,
    /// Growth fits use saves with `t ≥ fit_from`.
    pub fit_from: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Self { delta_max: 1e-2, slope_window: None, growth_margin: 0.3, fit_from: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Speed pairs `(ξ₁, ξ₂)`.
    pub xi: Vec<[f64; 2]>,
    pub h: Vec<f64>,
    /// Lower bound on the period; the point count is rounded up to a power of two.
    pub min_length: f64,
    /// Half width `n` of the order-`2n` stencil; `None` is the three-point Laplacian.
    pub stencil_order: Option<usize>,
    /// Stencil half widths listed by `stencil-info`.
    pub orders: Vec<usize>,
    pub solver: SolverOptions,
    pub evolution: EvolutionConfig,
    /// Time between saves; overrides `evolution.save_every` when set.
    pub save_interval: Option<f64>,
    /// Final time as a multiple of `1/h`; overrides `evolution.t_final` when set.
    pub t_final_over_h: Option<f64>,
    pub initial: InitialData,
    pub perturbation: PerturbationSpec,
    /// Orders `n` whose `Ḣⁿ` norms are recorded and fitted.
    pub sobolev_orders: Vec<u32>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub snapshots: bool,
    /// Wall-clock limit for one evolution, in seconds.
    pub budget_s: Option<f64>,
    /// Turn failed checks into a failed run.
    pub gate: bool,
    pub gates: Gates,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            xi: vec![[1.0, 0.0]],
            h: vec![0.1],
            min_length: 80.0,
            stencil_order: None,
            orders: vec![1, 2, 3, 4],
            solver: SolverOptions::default(),
            evolution: EvolutionConfig::default(),
            save_interval: None,
            t_final_over_h: None,
            initial: InitialData::Eta,
            perturbation: PerturbationSpec { size: 0.0, ..Default::default() },
            sobolev_orders: vec![1],
            seed: 0,
            threads: None,
            out: PathBuf::from("out"),
            snapshots: false,
            budget_s: None,
            gate: false,
            gates: Gates::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn params(&self) -> Result<Vec<WaveParams>> {
        if self.xi.is_empty() {
            return Err(RunError::Config("no speed pair given".into()));
        }
        Ok(self.xi.iter().map(|[a, b]| WaveParams::new(*a, *b)).collect::<dnls_core::Result<_>>()?)
    }

    pub fn grids(&self) -> Result<Vec<GridSpec>> {
        if self.h.is_empty() {
            return Err(RunError::Config("no lattice step given".into()));
        }
        Ok(self.h.iter().map(|&h| GridSpec::with_min_length(h, self.min_length)).collect::<dnls_core::Result<_>>()?)
    }

    /// Evolution settings for step `h`, with the derived final time and save cadence filled in.
    pub fn evolution_for(&self, h: f64) -> EvolutionConfig {
        let mut e = self.evolution.clone();
        if let Some(c) = self.t_final_over_h {
            e.t_final = c / h;
        }
        if let Some(dt_save) = self.save_interval {
            let dt = e.resolved_dt(h);
            e.save_every = ((dt_save / dt).round() as usize).max(1);
        }
        let mut orders = e.sobolev_orders.clone();
        orders.extend(&self.sobolev_orders);
        orders.sort_unstable();
        orders.dedup();
        e.sobolev_orders = orders;
        e
    }

    /// Reject inconsistent settings before any computation.
    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.grids()?;
        if let Some(n) = self.stencil_order {
            if n == 0 {
                return Err(RunError::Config("stencil order must be at least 1".into()));
            }
        }
        if let Some(t) = self.t_final_over_h {
            if !(t > 0.0) {
                return Err(RunError::Config(format!("t_final_over_h must be positive, got {t}")));
            }
        }
        if let Some(s) = self.save_interval {
            if !(s > 0.0) {
                return Err(RunError::Config(format!("save_interval must be positive, got {s}")));
            }
        }
        if let Some(dt) = self.evolution.dt {
            if !(dt > 0.0) {
                return Err(RunError::Config(format!("dt must be positive, got {dt}")));
            }
        }
        if self.threads == Some(0) {
            return Err(RunError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Overlay `patch` on `base`, table by table.
fn merge(base: &mut toml::Value, patch: toml::Value) {
    match (base, patch) {
        (toml::Value::Table(b), toml::Value::Table(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Apply the TOML text `text` on top of `base`.
pub fn layer_toml(base: &ExperimentConfig, text: &str) -> Result<ExperimentConfig> {
    let mut value = toml::Value::try_from(base).map_err(|e| RunError::Config(e.to_string()))?;
    let patch: toml::Value = toml::from_str(text)?;
    merge(&mut value, patch);
    Ok(value.try_into()?)
}

pub fn layer_file(base: &ExperimentConfig, path: &Path) -> Result<ExperimentConfig> {
    layer_toml(base, &std::fs::read_to_string(path)?)
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let a = a.trim().parse::<f64>().map_err(|e| format!("`{a}`: {e}"))?;
    let b = b.trim().parse::<f64>().map_err(|e| format!("`{b}`: {e}"))?;
    Ok([a, b])
}

fn parse_initial(s: &str) -> std::result::Result<InitialData, String> {
    match s {
        "eta" => Ok(InitialData::Eta),
        "psi" => Ok(InitialData::Psi),
        _ => Err(format!("expected `eta` or `psi`, got `{s}`")),
    }
}

/// Command-line flags; every flag that is given replaces the file value.
#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    /// TOML file layered over the experiment defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Speed pair `xi1,xi2`; repeat for a list.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub xi: Vec<[f64; 2]>,
    /// Lattice step; repeat for a list.
    #[arg(long)]
    pub h: Vec<f64>,
    /// Lower bound on the period.
    #[arg(long = "L")]
    pub length: Option<f64>,
    /// Use the order-2n stencil of half width n.
    #[arg(long)]
    pub stencil_order: Option<usize>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Final time as a multiple of `1/h`.
    #[arg(long)]
    pub t_final_over_h: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub flow: Option<String>,
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub save_interval: Option<f64>,
    /// Start from `eta` (the solved wave) or `psi` (the sampled soliton).
    #[arg(long, value_parser = parse_initial)]
    pub initial: Option<InitialData>,
    /// Discrete H¹ size of the random perturbation.
    #[arg(long)]
    pub perturbation: Option<f64>,
    /// Write every saved field under `snapshots/`.
    #[arg(long)]
    pub snapshots: bool,
    /// Exit with code 4 when a check fails.
    #[arg(long)]
    pub gate: bool,
    /// Wall-clock limit for one evolution, in seconds.
    #[arg(long)]
    pub budget: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if !self.xi.is_empty() {
            cfg.xi = self.xi.clone();
        }
        if !self.h.is_empty() {
            cfg.h = self.h.clone();
        }
        if let Some(v) = self.length {
            cfg.min_length = v;
        }
        if self.stencil_order.is_some() {
            cfg.stencil_order = self.stencil_order;
        }
        if let Some(v) = self.t_final {
            cfg.evolution.t_final = v;
            cfg.t_final_over_h = None;
        }
        if self.t_final_over_h.is_some() {
            cfg.t_final_over_h = self.t_final_over_h;
        }
        if let Some(v) = self.initial {
            cfg.initial = v;
        }
        if self.dt.is_some() {
            cfg.evolution.dt = self.dt;
        }
        if let Some(v) = &self.flow {
            cfg.evolution.flow = v.clone();
        }
        if let Some(v) = &self.scheme {
            cfg.evolution.scheme = v.clone();
        }
        if self.save_interval.is_some() {
            cfg.save_interval = self.save_interval;
        }
        if let Some(v) = self.perturbation {
            cfg.perturbation.size = v;
        }
        if self.snapshots {
            cfg.snapshots = true;
        }
        if self.gate {
            cfg.gate = true;
        }
        if self.budget.is_some() {
            cfg.budget_s = self.budget;
        }
    }

    /// Defaults, then the config file if any, then the flags.
    pub fn resolve(&self, defaults: ExperimentConfig) -> Result<ExperimentConfig> {
        let name = defaults.experiment.clone();
        let mut cfg = match &self.config {
            Some(path) => layer_file(&defaults, path)?,
            None => defaults,
        };
        if cfg.experiment != name {
            return Err(RunError::Config(format!("config file is for `{}`, not `{name}`", cfg.experiment)));
        }
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig { experiment: "solve".into(), ..Default::default() }
    }

    #[test]
    fn toml_layers_over_defaults() {
        let text = "h = [0.4, 0.2]\nseed = 9\n[evolution]\nt_final = 3.5\n[gates]\ndelta_max = 1e-3\n";
        let cfg = layer_toml(&base(), text).unwrap();
        assert_eq!(cfg.h, vec![0.4, 0.2]);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.evolution.t_final, 3.5);
        assert_eq!(cfg.evolution.flow, "dnls");
        assert_eq!(cfg.gates.delta_max, 1e-3);
        assert_eq!(cfg.gates.growth_margin, 0.3);
        assert_eq!(cfg.xi, vec![[1.0, 0.0]]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(layer_toml(&base(), "hh = [0.1]\n").is_err());
        assert!(layer_toml(&base(), "h = \"fine\"\n").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "experiment = \"solve\"\nh = [0.4]\nseed = 1\n").unwrap();
        let o = Overrides { config: Some(path), h: vec![0.2], xi: vec![[1.2, 0.6]], ..Default::default() };
        let cfg = o.resolve(base()).unwrap();
        assert_eq!(cfg.h, vec![0.2]);
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.xi, vec![[1.2, 0.6]]);
    }

    #[test]
    fn invalid_settings_fail_before_compute() {
        let bad_xi = Overrides { xi: vec![[0.1, 1.0]], ..Default::default() };
        assert_eq!(bad_xi.resolve(base()).unwrap_err().exit_code(), 2);
        let bad_h = Overrides { h: vec![-0.1], ..Default::default() };
        assert_eq!(bad_h.resolve(base()).unwrap_err().exit_code(), 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "experiment = \"stability\"\n").unwrap();
        let wrong = Overrides { config: Some(path), ..Default::default() };
        assert!(wrong.resolve(base()).is_err());
    }

    #[test]
    fn derived_evolution_settings() {
        let mut cfg = base();
        cfg.t_final_over_h = Some(10.0);
        cfg.save_interval = Some(0.5);
        cfg.sobolev_orders = vec![3, 2];
        let e = cfg.evolution_for(0.2);
        assert!((e.t_final - 50.0).abs() < 1e-12);
        assert_eq!(e.save_every, 50);
        assert_eq!(e.sobolev_orders, vec![1, 2, 3]);
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("1,-0.5").unwrap(), [1.0, -0.5]);
        assert!(parse_pair("1").is_err());
        assert!(parse_pair("a,b").is_err());
    }
}
