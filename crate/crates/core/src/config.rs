//! Run configuration: one TOML file per run, strict schema (unknown keys are
//! rejected), explicit defaults, and a resolved form that round-trips through
//! serialization unchanged. Every command output embeds the resolved config
//! and the schema version so runs stay self-describing.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::graphs::{Branch, Breakpoint, GraphMeta, ScalarGraph};
use crate::operators::{MultiValuedOperator, SingleValuedDrift};
use crate::sde::{HCoeff, NoiseModel, Scheme, SimConfig};
use crate::spaces::{Field, GelfandTriple, Grid};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: u8,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, Error> {
        match self.dim {
            1 => Grid::new_1d(self.n),
            2 => Grid::new_2d(self.n),
            other => Err(Error::config(format!("grid dim must be 1 or 2, got {other}"))),
        }
    }
}

/// Graph definition schema used by the CLI config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Sign { rho: f64 },
    Power {
        p: f64,
        #[serde(default)]
        nu: f64,
    },
    Btw {
        #[serde(default)]
        delta: f64,
    },
    Linear { slope: f64 },
    NonNewtonian { p: f64 },
    Piecewise {
        breakpoints: Vec<Breakpoint>,
        branches: Vec<Branch>,
        meta: Option<GraphMeta>,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<ScalarGraph, Error> {
        match self {
            GraphSpec::Sign { rho } => ScalarGraph::sign(*rho),
            GraphSpec::Power { p, nu } => ScalarGraph::power(*p, *nu),
            GraphSpec::Btw { delta } => ScalarGraph::btw(*delta),
            GraphSpec::Linear { slope } => ScalarGraph::linear(*slope),
            GraphSpec::NonNewtonian { p } => ScalarGraph::non_newtonian(*p),
            GraphSpec::Piecewise { breakpoints, branches, meta } => {
                ScalarGraph::piecewise(breakpoints.clone(), branches.clone(), *meta, "piecewise")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PorousMedia,
    PhiLaplace,
    Subdifferential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub p: f64,
    /// Gauge exponent; defaults to `p`.
    pub alpha: Option<f64>,
    pub graph: GraphSpec,
}

impl ModelSpec {
    pub fn build(&self, grid: Grid) -> Result<MultiValuedOperator, Error> {
        let graph = self.graph.build()?;
        let triple = match self.kind {
            ModelKind::PorousMedia => GelfandTriple::porous_media(self.p, grid.dim())?,
            ModelKind::PhiLaplace | ModelKind::Subdifferential => {
                GelfandTriple::phi_laplace(self.p)?
            }
        };
        let triple = match self.alpha {
            Some(a) => triple.with_alpha(a)?,
            None => triple,
        };
        match self.kind {
            ModelKind::PorousMedia => MultiValuedOperator::porous_media(graph, triple),
            ModelKind::PhiLaplace => MultiValuedOperator::phi_laplace(graph, triple),
            ModelKind::Subdifferential => {
                MultiValuedOperator::subdifferential(graph, triple, grid)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub modes: Vec<HCoeff>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { modes: vec![] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Sine {
        amplitude: f64,
        #[serde(default = "default_mode")]
        mode: usize,
    },
    Constant { value: f64 },
}

fn default_mode() -> usize {
    1
}

impl InitialSpec {
    pub fn build(&self, grid: Grid) -> Field {
        match self {
            InitialSpec::Sine { amplitude, mode } => Field::sine_mode(grid, *mode, *amplitude),
            InitialSpec::Constant { value } => Field::constant(grid, *value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub horizon: f64,
    pub dt: f64,
    pub mu: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Extinction threshold relative to `‖x‖_H` (default 1e-6); `eps_abs`
    /// overrides it when set.
    #[serde(default = "default_eps_rel")]
    pub eps_rel: f64,
    pub eps_abs: Option<f64>,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    pub initial: InitialSpec,
}

fn default_scheme() -> Scheme {
    Scheme::Explicit
}

fn default_eps_rel() -> f64 {
    1e-6
}

fn default_stride() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveSpec {
    pub s: Vec<f64>,
    pub lambda: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HorizonSpec {
    /// Use `sim.horizon` as-is.
    Fixed,
    /// Choose `T` so the theoretical probability floor equals `floor`.
    BoundFloor { floor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtinctionSpec {
    pub n_traj: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default = "default_horizon_spec")]
    pub horizon: HorizonSpec,
}

fn default_checkpoints() -> usize {
    10
}

fn default_horizon_spec() -> HorizonSpec {
    HorizonSpec::Fixed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub mu_list: Vec<f64>,
    pub n_traj: u64,
    pub checkpoints: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default = "default_n_traj")]
    pub n_traj: u64,
    /// Checkpoint times for snapshot export.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

fn default_n_traj() -> u64 {
    1
}

/// The full per-run configuration file. Command blocks are optional; each
/// command checks for its own block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub grid: Option<GridSpec>,
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub drift: Option<SingleValuedDrift>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    pub sim: Option<SimSpec>,
    pub simulate: Option<SimulateSpec>,
    pub resolve: Option<ResolveSpec>,
    pub extinction: Option<ExtinctionSpec>,
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, Error> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (this build speaks {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig, Error> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    /// Fills every optional block with its default so the result serializes
    /// to a fully explicit document (the resolved config embedded in outputs).
    pub fn resolve_defaults(&self) -> RunConfig {
        let mut cfg = self.clone();
        if cfg.drift.is_none() {
            cfg.drift = Some(SingleValuedDrift::Zero);
        }
        if cfg.noise.is_none() {
            cfg.noise = Some(NoiseSpec::default());
        }
        if cfg.output.is_none() {
            cfg.output = Some(OutputSpec::default());
        }
        cfg
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, Error> {
        block
            .as_ref()
            .ok_or_else(|| Error::config(format!("config is missing the [{name}] block")))
    }

    pub fn grid(&self) -> Result<Grid, Error> {
        Self::require(&self.grid, "grid")?.build()
    }

    pub fn operator(&self) -> Result<MultiValuedOperator, Error> {
        let grid = self.grid()?;
        Self::require(&self.model, "model")?.build(grid)
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel::new(self.noise.clone().unwrap_or_default().modes)
    }

    pub fn drift(&self) -> SingleValuedDrift {
        self.drift.clone().unwrap_or(SingleValuedDrift::Zero)
    }

    /// Assembles the simulation config (the `[sim]` block plus model pieces).
    pub fn sim_config(&self) -> Result<SimConfig, Error> {
        let grid = self.grid()?;
        let op = self.operator()?;
        let sim = Self::require(&self.sim, "sim")?;
        let initial = sim.initial.build(grid);
        let h0 = op.triple().h_norm(&initial);
        let eps = match sim.eps_abs {
            Some(e) => e,
            None => sim.eps_rel * h0,
        };
        let cfg = SimConfig {
            op,
            drift: self.drift(),
            noise: self.noise_model(),
            horizon: sim.horizon,
            dt: sim.dt,
            mu: sim.mu,
            initial,
            seed: sim.seed,
            scheme: sim.scheme,
            eps_extinct: eps,
            record_stride: sim.record_stride,
            checkpoints: vec![],
            keep_snapshots: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
