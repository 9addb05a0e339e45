//! Run configuration: one JSON document, unknown keys rejected.

use std::fmt;
use std::path::Path;

use nhbrack::bracket::Layout;
use nhbrack::grid::Scheme;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ClassicalRun,
    SampleCanonical,
    QcleRun,
    StationaryCheck,
    JacobiCheck,
    BracketVerify,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        write!(f, "{}", s.as_str().unwrap())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: Option<String>,
    pub ensemble: EnsembleConfig,
    pub model: ModelConfig,
    pub classical: ClassicalConfig,
    pub sampling: SamplingConfig,
    pub qcle: QcleConfig,
    pub stationary: StationaryConfig,
    pub jacobi: JacobiConfig,
    pub bracket: BracketConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub kind: Layout,
    pub dof: usize,
    pub temperature: f64,
    /// Defaults to `dof`.
    pub g: Option<f64>,
    pub mass: f64,
    pub m_eta: f64,
    pub m_eta2: f64,
    pub m_v: f64,
    pub p_ext: f64,
    pub kb: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            kind: Layout::Nhc2,
            dof: 1,
            temperature: 1.0,
            g: None,
            mass: 1.0,
            m_eta: 1.0,
            m_eta2: 1.0,
            m_v: 1000.0,
            p_ext: 0.1,
            kb: 1.0,
        }
    }
}

impl EnsembleConfig {
    pub fn spec(&self) -> nhbrack::ensemble::EnsembleSpec<f64> {
        self.spec_as(self.kind)
    }

    pub fn spec_as(&self, kind: Layout) -> nhbrack::ensemble::EnsembleSpec<f64> {
        nhbrack::ensemble::EnsembleSpec {
            kind,
            dof: self.dof,
            temperature: self.temperature,
            g: self.g.unwrap_or(self.dof as f64),
            mass: self.mass,
            m_eta: self.m_eta,
            m_eta2: self.m_eta2,
            m_v: self.m_v,
            p_ext: self.p_ext,
            kb: self.kb,
        }
    }
}

/// Quantum subsystem, or a purely classical potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Harmonic {
        #[serde(default = "one")]
        k: f64,
        #[serde(default)]
        quartic: f64,
    },
    LinearVibronic {
        #[serde(default = "half")]
        a: f64,
        #[serde(default = "half")]
        delta: f64,
        #[serde(default = "one")]
        k: f64,
    },
    SpinBoson {
        #[serde(default = "half")]
        coupling: f64,
        #[serde(default)]
        bias: f64,
        #[serde(default = "half")]
        delta: f64,
        #[serde(default = "one")]
        k: f64,
    },
    Ladder {
        #[serde(default = "two")]
        n: usize,
        #[serde(default = "half")]
        a: f64,
        #[serde(default = "half")]
        delta: f64,
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default = "one")]
        k: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn two() -> usize {
    2
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::LinearVibronic {
            a: 0.5,
            delta: 0.5,
            k: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalConfig {
    /// Full extended phase point; a seeded default is used when absent.
    pub initial: Option<Vec<f64>>,
    pub dt: f64,
    pub steps: usize,
    pub stride: usize,
    /// Adiabatic surface used as the potential for quantum models.
    pub surface: usize,
    pub energy_tol: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            initial: None,
            dt: 1e-3,
            steps: 100_000,
            stride: 100,
            surface: 0,
            energy_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub dt: f64,
    /// Steps per trajectory.
    pub steps: usize,
    pub burn_in: usize,
    pub trajectories: usize,
    pub bins: usize,
    /// Histogram half-width in units of the expected momentum spread.
    pub span: f64,
    pub min_count: u64,
    pub ks_tol: f64,
    pub slope_tol: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            steps: 500_000,
            burn_in: 10_000,
            trajectories: 4,
            bins: 80,
            span: 5.0,
            min_count: 200,
            ks_tol: 0.02,
            slope_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl AxisConfig {
    pub fn symmetric(l: f64, n: usize) -> Self {
        Self { min: -l, max: l, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub r: AxisConfig,
    pub p: AxisConfig,
    /// Thermostat momenta (every link).
    pub p_eta: AxisConfig,
    /// Volume and its momentum (constant pressure only).
    pub volume: Option<AxisConfig>,
    pub p_volume: Option<AxisConfig>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r: AxisConfig::symmetric(6.0, 48),
            p: AxisConfig::symmetric(6.0, 48),
            p_eta: AxisConfig::symmetric(4.5, 16),
            volume: None,
            p_volume: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QcleConfig {
    /// Layout of the propagated density; thermostat and barostat parameters come from `ensemble`.
    pub kind: Layout,
    pub hbar: f64,
    pub grid: GridConfig,
    pub scheme: Scheme,
    pub jump_scheme: Scheme,
    pub frozen_nuclei: bool,
    /// Time step; 0.9 of the stability bound when absent.
    pub dt: Option<f64>,
    pub time: f64,
    pub diag_stride: usize,
    /// Initial packet: adiabatic amplitudes (real, normalized on use) and phase-space centre.
    pub amplitudes: Vec<f64>,
    pub r0: f64,
    pub p0: f64,
    pub sigma: f64,
    pub trace_tol: f64,
    /// Hermiticity growth allowed per 1000 steps.
    pub herm_tol: f64,
}

impl Default for QcleConfig {
    fn default() -> Self {
        Self {
            kind: Layout::Nve,
            hbar: 1.0,
            grid: GridConfig::default(),
            scheme: Scheme::Upwind3,
            jump_scheme: Scheme::Central4,
            frozen_nuclei: false,
            dt: None,
            time: 2.0,
            diag_stride: 10,
            amplitudes: vec![0.0, 1.0],
            r0: 1.0,
            p0: 0.0,
            sigma: 0.8,
            trace_tol: 1e-4,
            herm_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryConfig {
    pub hbar: f64,
    /// Nodes and half-width of the `R`, `P` axes for the residual checks.
    pub nodes: usize,
    pub extent: f64,
    pub thermostat_nodes: usize,
    pub thermostat_extent: f64,
    /// Shell value `C` of the delta form.
    pub shell: f64,
    pub sigma_e: Vec<f64>,
    pub residual_tol: f64,
    pub fredholm_tol: f64,
    pub marginal_tol: f64,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self {
            hbar: 0.2,
            nodes: 20,
            extent: 7.0,
            thermostat_nodes: 20,
            thermostat_extent: 7.0,
            shell: 0.0,
            sigma_e: vec![0.1, 0.05, 0.025],
            residual_tol: 1e-4,
            fredholm_tol: 1e-8,
            marginal_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JacobiConfig {
    pub trials: usize,
    pub max_dim: usize,
    pub hbar: f64,
    pub nodes: usize,
    pub tol: f64,
}

impl Default for JacobiConfig {
    fn default() -> Self {
        Self {
            trials: 500,
            max_dim: 5,
            hbar: 0.6,
            nodes: 16,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BracketConfig {
    pub points: usize,
    pub dof: usize,
    pub tol: f64,
    pub fd_tol: f64,
}

impl Default for BracketConfig {
    fn default() -> Self {
        Self {
            points: 100,
            dof: 2,
            tol: 1e-10,
            fd_tol: 1e-6,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    /// Parses a JSON document; errors name the offending key path.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    /// Canonical form: every field spelled out.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |path: &str, why: &str| Err(ConfigError(format!("at `{path}`: {why}")));
        if self.threads == Some(0) {
            return bad("threads", "must be at least 1");
        }
        if self.ensemble.dof == 0 {
            return bad("ensemble.dof", "must be at least 1");
        }
        if !(self.classical.dt > 0.0) {
            return bad("classical.dt", "must be positive");
        }
        if self.classical.stride == 0 {
            return bad("classical.stride", "must be at least 1");
        }
        if !(self.sampling.dt > 0.0) {
            return bad("sampling.dt", "must be positive");
        }
        if self.sampling.trajectories == 0 {
            return bad("sampling.trajectories", "must be at least 1");
        }
        if self.sampling.bins == 0 {
            return bad("sampling.bins", "must be at least 1");
        }
        if !(self.qcle.time >= 0.0) {
            return bad("qcle.time", "must be non-negative");
        }
        if self.qcle.diag_stride == 0 {
            return bad("qcle.diag_stride", "must be at least 1");
        }
        if let Some(dt) = self.qcle.dt {
            if !(dt > 0.0) {
                return bad("qcle.dt", "must be positive");
            }
        }
        if self.stationary.sigma_e.iter().any(|s| !(*s > 0.0)) {
            return bad("stationary.sigma_e", "widths must be positive");
        }
        if self.jacobi.max_dim == 0 {
            return bad("jacobi.max_dim", "must be at least 1");
        }
        Ok(())
    }
}
