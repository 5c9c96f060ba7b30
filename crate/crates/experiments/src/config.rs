//! Scenario configuration: one JSON document, validated in full before any solve.

use std::fmt;
use std::path::{Path, PathBuf};

use habopt_core::resource::{left_boundary_crenel, right_boundary_crenel};
use habopt_core::{
    io::resource_from_json, make_crenel_1d, make_random, ConstraintSet, Grid, OptimOptions, ResourceField,
    SteadyOptions, Strategy,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Scenario {
    Solve,
    Optimize,
    MuSweep,
    #[serde(rename = "crenel_study_1d")]
    #[value(name = "crenel_study_1d")]
    CrenelStudy1d,
    MuStarEstimate,
    #[serde(rename = "concentration_2d")]
    #[value(name = "concentration_2d")]
    Concentration2d,
    FragmentationSmallMu,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Solve => "solve",
            Scenario::Optimize => "optimize",
            Scenario::MuSweep => "mu_sweep",
            Scenario::CrenelStudy1d => "crenel_study_1d",
            Scenario::MuStarEstimate => "mu_star_estimate",
            Scenario::Concentration2d => "concentration_2d",
            Scenario::FragmentationSmallMu => "fragmentation_small_mu",
        }
    }

    fn default_dim(self) -> usize {
        if self == Scenario::Concentration2d {
            2
        } else {
            1
        }
    }

    fn default_n(self) -> usize {
        if self == Scenario::Concentration2d {
            64
        } else {
            256
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    /// Cells per axis.
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "default_m0")]
    pub m0: f64,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        Self {
            kappa: one(),
            m0: default_m0(),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_m0() -> f64 {
    0.4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResourceSpec {
    Constant,
    LeftCrenel,
    RightCrenel,
    /// Union of intervals in `[0, 1]` (1D only); total length must match `m0/κ`.
    Crenel { intervals: Vec<[f64; 2]> },
    /// Uniform random values projected onto the admissible set; the run seed by default.
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Resource field JSON document, relative paths resolved against the config file.
    File { path: PathBuf },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_newton_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_min: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySpec {
    ProjectedGradient,
    Thresholding,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stall_window: Option<usize>,
}

/// The config document as written; unset members take scenario defaults in [`resolve`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub constraints: ConstraintSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<ResourceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_starts: Option<usize>,
    /// Left share of the mass in the two-sided crenels of the crenel study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_fractions: Option<Vec<f64>>,
    /// Level above which a cell counts as occupied in the concentration metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect_threshold: Option<f64>,
    #[serde(default)]
    pub steady: SteadySpec,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config: {field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses a config document, naming the offending member on failure.
pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." || path == "?" { "<document>".to_string() } else { path };
        bad(&field, e.into_inner().to_string())
    })
}

pub fn load(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad("<file>", format!("{}: {e}", path.display())))?;
    parse(&text)
}

/// A validated config with every default filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub scenario: Scenario,
    pub grid: Grid<f64>,
    pub constraints: ConstraintSet<f64>,
    pub mu: f64,
    pub mu_list: Vec<f64>,
    pub resource: Option<ResourceField<f64>>,
    pub n_starts: usize,
    pub split_fractions: Vec<f64>,
    pub defect_threshold: f64,
    pub steady: SteadyOptions<f64>,
    pub optimizer: OptimOptions<f64>,
    pub seed: u64,
    /// The document with defaults made explicit, echoed into reports.
    pub echo: ScenarioConfig,
}

impl Resolved {
    pub fn cells(&self) -> usize {
        self.grid.cells_per_axis()[0]
    }
}

/// `count` points log-spaced from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| {
            let e = a + (b - a) * i as f64 / (count - 1) as f64;
            // snap to three significant digits so the grid prints cleanly
            let v = 10f64.powf(e);
            let scale = 10f64.powi(2 - v.log10().floor() as i32);
            (v * scale).round() / scale
        })
        .collect()
}

fn default_mu_list(s: Scenario) -> Vec<f64> {
    match s {
        Scenario::MuSweep => vec![1.0, 10.0, 100.0, 1000.0],
        Scenario::CrenelStudy1d => log_space(1e-3, 10.0, 13),
        Scenario::MuStarEstimate => log_space(1e-3, 10.0, 9),
        Scenario::Concentration2d => vec![0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0],
        Scenario::FragmentationSmallMu => vec![0.001, 0.002, 0.005, 0.01, 0.02, 0.05],
        Scenario::Solve | Scenario::Optimize => vec![1.0],
    }
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(field, format!("must be a positive finite number, got {v}")))
    }
}

fn at_least_one(field: &str, v: usize) -> Result<usize, ConfigError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(bad(field, "must be at least 1"))
    }
}

/// Applies CLI overrides and scenario defaults, then validates everything. `base_dir`
/// resolves relative resource file paths.
pub fn resolve(
    mut cfg: ScenarioConfig,
    scenario: Scenario,
    seed: Option<u64>,
    base_dir: &Path,
) -> Result<Resolved, ConfigError> {
    if let Some(s) = cfg.scenario {
        if s != scenario {
            return Err(bad("scenario", format!("config names {s} but {scenario} was requested")));
        }
    }
    cfg.scenario = Some(scenario);
    if let Some(seed) = seed {
        cfg.seed = seed;
    }

    let grid_spec = cfg.grid.clone().unwrap_or(GridSpec {
        dim: scenario.default_dim(),
        n: scenario.default_n(),
    });
    if grid_spec.dim < 1 || grid_spec.dim > 3 {
        return Err(bad("grid.dim", format!("must be 1, 2 or 3, got {}", grid_spec.dim)));
    }
    if grid_spec.n < 2 {
        return Err(bad("grid.n", format!("must be at least 2, got {}", grid_spec.n)));
    }
    let needs_1d = matches!(
        scenario,
        Scenario::CrenelStudy1d | Scenario::MuStarEstimate | Scenario::FragmentationSmallMu
    );
    if needs_1d && grid_spec.dim != 1 {
        return Err(bad("grid.dim", format!("{scenario} runs on 1D grids only")));
    }
    if scenario == Scenario::Concentration2d && grid_spec.dim != 2 {
        return Err(bad("grid.dim", "concentration_2d runs on 2D grids only"));
    }
    let grid = Grid::new(grid_spec.dim, &vec![grid_spec.n; grid_spec.dim])
        .map_err(|e| bad("grid", e.to_string()))?;
    cfg.grid = Some(grid_spec);

    let ConstraintSpec { kappa, m0 } = cfg.constraints;
    positive("constraints.kappa", kappa)?;
    if !(m0.is_finite() && m0 > 0.0 && m0 < kappa) {
        return Err(bad(
            "constraints.m0",
            format!("must satisfy 0 < m0 < kappa, got m0 = {m0}, kappa = {kappa}"),
        ));
    }
    let constraints = ConstraintSet::new(kappa, m0).map_err(|e| bad("constraints", e.to_string()))?;

    let mu = positive("mu", cfg.mu.unwrap_or(1.0))?;
    let mu_list = cfg.mu_list.clone().unwrap_or_else(|| default_mu_list(scenario));
    if mu_list.is_empty() {
        return Err(bad("mu_list", "must not be empty"));
    }
    for (i, &v) in mu_list.iter().enumerate() {
        positive(&format!("mu_list[{i}]"), v)?;
    }
    if scenario == Scenario::MuStarEstimate && mu_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("mu_list", "must be strictly increasing"));
    }
    match scenario {
        Scenario::Solve | Scenario::Optimize => cfg.mu = Some(mu),
        _ => cfg.mu_list = Some(mu_list.clone()),
    }

    let n_starts = at_least_one("n_starts", cfg.n_starts.unwrap_or(4))?;
    let split_fractions = cfg
        .split_fractions
        .clone()
        .unwrap_or_else(|| (1..=9).map(|k| k as f64 / 10.0).collect());
    for (i, &s) in split_fractions.iter().enumerate() {
        if !(s > 0.0 && s < 1.0) {
            return Err(bad(&format!("split_fractions[{i}]"), format!("must lie in (0, 1), got {s}")));
        }
    }
    let defect_threshold = cfg.defect_threshold.unwrap_or(kappa / 2.0);
    if !(defect_threshold > 0.0 && defect_threshold < kappa) {
        return Err(bad("defect_threshold", format!("must lie in (0, kappa), got {defect_threshold}")));
    }
    match scenario {
        Scenario::MuStarEstimate | Scenario::Concentration2d | Scenario::FragmentationSmallMu => {
            cfg.n_starts = Some(n_starts)
        }
        Scenario::CrenelStudy1d => cfg.split_fractions = Some(split_fractions.clone()),
        _ => {}
    }
    if scenario == Scenario::Concentration2d {
        cfg.defect_threshold = Some(defect_threshold);
    }

    let defaults = SteadyOptions::<f64>::default();
    let steady = SteadyOptions {
        newton_tol: positive("steady.newton_tol", cfg.steady.newton_tol.unwrap_or(defaults.newton_tol))?,
        max_newton_iters: at_least_one(
            "steady.max_newton_iters",
            cfg.steady.max_newton_iters.unwrap_or(defaults.max_newton_iters),
        )?,
        damping_min: cfg.steady.damping_min.unwrap_or(defaults.damping_min),
    };
    if !(steady.damping_min > 0.0 && steady.damping_min <= 1.0) {
        return Err(bad("steady.damping_min", format!("must lie in (0, 1], got {}", steady.damping_min)));
    }
    cfg.steady = SteadySpec {
        newton_tol: Some(steady.newton_tol),
        max_newton_iters: Some(steady.max_newton_iters),
        damping_min: Some(steady.damping_min),
    };

    let od = OptimOptions::<f64>::default();
    let strategy = cfg.optimizer.strategy.unwrap_or(StrategySpec::Thresholding);
    let optimizer = OptimOptions {
        strategy: match strategy {
            StrategySpec::ProjectedGradient => Strategy::ProjectedGradient,
            StrategySpec::Thresholding => Strategy::Thresholding,
        },
        step0: positive("optimizer.step0", cfg.optimizer.step0.unwrap_or(od.step0))?,
        max_iters: at_least_one("optimizer.max_iters", cfg.optimizer.max_iters.unwrap_or(od.max_iters))?,
        f_rel_tol: positive("optimizer.f_rel_tol", cfg.optimizer.f_rel_tol.unwrap_or(od.f_rel_tol))?,
        stall_window: at_least_one(
            "optimizer.stall_window",
            cfg.optimizer.stall_window.unwrap_or(od.stall_window),
        )?,
        seed: cfg.seed,
        steady,
    };
    if scenario != Scenario::Solve && scenario != Scenario::MuSweep && scenario != Scenario::CrenelStudy1d {
        cfg.optimizer = OptimizerSpec {
            strategy: Some(strategy),
            step0: Some(optimizer.step0),
            max_iters: Some(optimizer.max_iters),
            f_rel_tol: Some(optimizer.f_rel_tol),
            stall_window: Some(optimizer.stall_window),
        };
    }

    let resource = match scenario {
        Scenario::Solve | Scenario::MuSweep | Scenario::Optimize => {
            let spec = cfg.resource.clone().unwrap_or(match scenario {
                Scenario::Optimize => ResourceSpec::Random { seed: None },
                _ => ResourceSpec::LeftCrenel,
            });
            let m = build_resource(&spec, &grid, constraints, cfg.seed, base_dir)?;
            cfg.resource = Some(spec);
            Some(m)
        }
        _ => None,
    };

    Ok(Resolved {
        scenario,
        grid,
        constraints,
        mu,
        mu_list,
        resource,
        n_starts,
        split_fractions,
        defect_threshold,
        steady,
        optimizer,
        seed: cfg.seed,
        echo: cfg,
    })
}

fn build_resource(
    spec: &ResourceSpec,
    grid: &Grid<f64>,
    c: ConstraintSet<f64>,
    seed: u64,
    base_dir: &Path,
) -> Result<ResourceField<f64>, ConfigError> {
    let one_d = |kind: &str| {
        if grid.dim() == 1 {
            Ok(())
        } else {
            Err(bad("resource.kind", format!("{kind} needs a 1D grid")))
        }
    };
    match spec {
        ResourceSpec::Constant => Ok(ResourceField::constant(grid, c)),
        ResourceSpec::LeftCrenel => {
            one_d("left_crenel")?;
            left_boundary_crenel(grid, c).map_err(|e| bad("resource", e.to_string()))
        }
        ResourceSpec::RightCrenel => {
            one_d("right_crenel")?;
            right_boundary_crenel(grid, c).map_err(|e| bad("resource", e.to_string()))
        }
        ResourceSpec::Crenel { intervals } => {
            one_d("crenel")?;
            let iv: Vec<(f64, f64)> = intervals.iter().map(|p| (p[0], p[1])).collect();
            make_crenel_1d(grid, c, &iv).map_err(|e| bad("resource.intervals", e.to_string()))
        }
        ResourceSpec::Random { seed: s } => Ok(make_random(grid, c, s.unwrap_or(seed))),
        ResourceSpec::File { path } => {
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full)
                .map_err(|e| bad("resource.path", format!("{}: {e}", full.display())))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| bad("resource.path", e.to_string()))?;
            let m: ResourceField<f64> = resource_from_json(&value).map_err(|e| bad("resource.path", e.to_string()))?;
            if m.grid() != grid {
                return Err(bad("resource.path", "field grid differs from the configured grid"));
            }
            if m.constraints() != c {
                return Err(bad("resource.path", "field constraints differ from the configured constraints"));
            }
            Ok(m)
        }
    }
}
