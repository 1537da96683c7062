//! Flat key-value scenario files and the built-in presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::Axis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Trajectory,
    SteadyState,
    SweepGrid,
    ChainScaling,
    RatesPlot,
    Oracle,
}

impl RunKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RunKind::Trajectory => "trajectory",
            RunKind::SteadyState => "steady_state",
            RunKind::SweepGrid => "sweep_grid",
            RunKind::ChainScaling => "chain_scaling",
            RunKind::RatesPlot => "rates_plot",
            RunKind::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    TwoSpin,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridAxes {
    GammaBeta,
    AB,
}

fn default_a() -> f64 {
    0.8
}
fn default_b() -> f64 {
    0.5
}
fn default_one() -> f64 {
    1.0
}
fn default_sites() -> usize {
    2
}
fn default_axis() -> Axis {
    Axis::X
}
fn default_omega_factor() -> f64 {
    1.2
}
fn default_dt() -> f64 {
    crate::propagation::DEFAULT_DT
}
fn default_stride() -> usize {
    100
}
fn default_max_cycles() -> usize {
    100
}
fn default_omega_range() -> f64 {
    12.0
}
fn default_omega_points() -> usize {
    481
}
fn default_field() -> f64 {
    2.0
}
fn default_oracle_omega() -> f64 {
    4.0
}
fn default_horizon() -> f64 {
    500.0
}
fn default_samples() -> usize {
    500
}

/// One run described by a flat TOML document.
///
/// Unset bath fields follow the sweep conventions: `g` defaults to `gamma`,
/// `t_cycle` to `4/gamma` and `omega_max` to `omega_max_factor·Δ_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub kind: RunKind,

    #[serde(default)]
    pub hamiltonian: ModelKind,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_one")]
    pub j: f64,
    #[serde(default = "default_sites")]
    pub sites: usize,
    #[serde(default = "default_axis")]
    pub coupling_axis: Axis,

    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub g: Option<f64>,
    #[serde(default = "default_omega_factor")]
    pub omega_max_factor: f64,
    pub omega_max: Option<f64>,
    pub t_cycle: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Multiplies every transition rate of the reduced equation.
    #[serde(default = "default_one")]
    pub rate_scale: f64,

    /// Computational-basis bitstring such as "01", or "random".
    pub initial_state: Option<String>,
    pub t_final: Option<f64>,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    pub stop_threshold: Option<f64>,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: usize,

    pub grid: Option<GridAxes>,
    pub gammas: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub a_values: Option<Vec<f64>>,
    pub b_values: Option<Vec<f64>>,
    pub lengths: Option<Vec<usize>>,

    pub big_omega: Option<f64>,
    #[serde(default = "default_omega_range")]
    pub omega_range: f64,
    #[serde(default = "default_omega_points")]
    pub omega_points: usize,

    #[serde(default = "default_field")]
    pub oracle_field: f64,
    #[serde(default = "default_oracle_omega")]
    pub oracle_omega: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub coupling_ratios: Option<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples: usize,

    pub output_dir: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn require<T: Clone>(v: &Option<T>, field: &str, kind: RunKind) -> Result<T> {
    v.clone().ok_or_else(|| Error::Config(format!("field `{field}` is required for kind = \"{}\"", kind.as_str())))
}

fn nonempty<'a, T>(v: &'a Option<Vec<T>>, field: &str, kind: RunKind) -> Result<&'a [T]> {
    match v {
        Some(list) if !list.is_empty() => Ok(list),
        Some(_) => Err(Error::Config(format!("field `{field}` must be a nonempty list"))),
        None => Err(Error::Config(format!("field `{field}` is required for kind = \"{}\"", kind.as_str()))),
    }
}

fn positive(v: f64, field: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("field `{field}` must be finite and > 0, got {v}")))
    }
}

fn nonnegative(v: f64, field: &str) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("field `{field}` must be finite and >= 0, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn new(kind: RunKind) -> Self {
        toml::from_str(&format!("kind = \"{}\"", kind.as_str())).expect("minimal config parses")
    }

    /// Parse and validate a TOML document. Parse errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Default label used for output file names.
    pub fn label(&self) -> &str {
        if self.name.is_empty() {
            self.kind.as_str()
        } else {
            &self.name
        }
    }

    /// Check that every parameter the run kind needs is present and sensible.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind;
        positive(self.dt, "dt")?;
        positive(self.omega_max_factor, "omega_max_factor")?;
        positive(self.rate_scale, "rate_scale")?;
        if self.record_stride == 0 {
            return Err(Error::Config("field `record_stride` must be >= 1".into()));
        }
        for (field, v) in [("a", self.a), ("b", self.b), ("j", self.j)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("field `{field}` must be finite")));
            }
        }
        if let Some(v) = self.g {
            nonnegative(v, "g")?;
        }
        if let Some(v) = self.omega_max {
            positive(v, "omega_max")?;
        }
        if let Some(v) = self.t_cycle {
            positive(v, "t_cycle")?;
        }
        if self.hamiltonian == ModelKind::Chain {
            check_chain_length(self.sites)?;
        }
        match kind {
            RunKind::Trajectory | RunKind::SteadyState => {
                nonnegative(require(&self.beta, "beta", kind)?, "beta")?;
                positive(require(&self.gamma, "gamma", kind)?, "gamma")?;
                if kind == RunKind::Trajectory {
                    if let Some(s) = &self.initial_state {
                        let n = self.num_sites();
                        let bits = s.trim();
                        if bits != "random" && (bits.len() != n || !bits.chars().all(|c| c == '0' || c == '1')) {
                            return Err(Error::Config(format!(
                                "field `initial_state` must be \"random\" or a {n}-character bitstring, got {s:?}"
                            )));
                        }
                    }
                    if let Some(t) = self.t_final {
                        nonnegative(t, "t_final")?;
                    }
                    if let Some(t) = self.stop_threshold {
                        positive(t, "stop_threshold")?;
                    }
                }
            }
            RunKind::SweepGrid => match require(&self.grid, "grid", kind)? {
                GridAxes::GammaBeta => {
                    for &v in nonempty(&self.gammas, "gammas", kind)? {
                        positive(v, "gammas")?;
                    }
                    for &v in nonempty(&self.betas, "betas", kind)? {
                        nonnegative(v, "betas")?;
                    }
                }
                GridAxes::AB => {
                    nonempty(&self.a_values, "a_values", kind)?;
                    nonempty(&self.b_values, "b_values", kind)?;
                    nonnegative(require(&self.beta, "beta", kind)?, "beta")?;
                    positive(require(&self.gamma, "gamma", kind)?, "gamma")?;
                }
            },
            RunKind::ChainScaling => {
                for &l in nonempty(&self.lengths, "lengths", kind)? {
                    check_chain_length(l)?;
                }
                for &v in nonempty(&self.betas, "betas", kind)? {
                    nonnegative(v, "betas")?;
                }
                positive(require(&self.gamma, "gamma", kind)?, "gamma")?;
            }
            RunKind::RatesPlot => {
                positive(require(&self.big_omega, "big_omega", kind)?, "big_omega")?;
                positive(require(&self.gamma, "gamma", kind)?, "gamma")?;
                for &v in nonempty(&self.betas, "betas", kind)? {
                    nonnegative(v, "betas")?;
                }
                positive(self.omega_range, "omega_range")?;
                if self.omega_points < 2 {
                    return Err(Error::Config("field `omega_points` must be >= 2".into()));
                }
            }
            RunKind::Oracle => {
                for &v in nonempty(&self.coupling_ratios, "coupling_ratios", kind)? {
                    nonnegative(v, "coupling_ratios")?;
                }
                nonnegative(require(&self.beta, "beta", kind)?, "beta")?;
                positive(require(&self.gamma, "gamma", kind)?, "gamma")?;
                positive(self.oracle_omega, "oracle_omega")?;
                positive(self.horizon, "horizon")?;
                if self.samples == 0 {
                    return Err(Error::Config("field `samples` must be >= 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn num_sites(&self) -> usize {
        match self.hamiltonian {
            ModelKind::TwoSpin => 2,
            ModelKind::Chain => self.sites,
        }
    }
}

/// Chains longer than four sites are refused: the dense generator needs
/// M·N_ω·2^{4L} complex entries, already ~10⁹ bytes at L = 5.
pub fn check_chain_length(l: usize) -> Result<()> {
    if !(2..=4).contains(&l) {
        return Err(Error::Config(format!(
            "chain length {l} unsupported: only 2 <= L <= 4; the generator needs M·N_ω·2^(4L) complex \
             entries, which grows by 16x per added site"
        )));
    }
    Ok(())
}

pub const PRESET_NAMES: [&str; 8] = ["fig2a", "fig2b", "fig3", "fig5_beta1", "fig5_beta5", "fig6", "fig1b", "oracle1"];

/// Cell centres of an n-point grid over [lo, hi].
fn centres(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (2 * i + 1) as f64 / (2 * n) as f64).collect()
}

/// Fully pinned configuration for each reproduced figure.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let mut c;
    match name {
        "fig2a" | "fig2b" => {
            c = ScenarioConfig::new(RunKind::Trajectory);
            c.beta = Some(if name == "fig2a" { 1.0 } else { 5.0 });
            c.gamma = Some(0.1);
            c.g = Some(0.1);
            c.t_cycle = Some(40.0);
            c.initial_state = Some("01".into());
            c.stop_threshold = Some(0.01);
            c.max_cycles = 100;
            c.record_stride = 100;
        }
        "fig3" => {
            c = ScenarioConfig::new(RunKind::SweepGrid);
            c.grid = Some(GridAxes::GammaBeta);
            c.gammas = Some(vec![0.01, 0.02, 0.04, 0.05, 0.08, 0.1, 0.16, 0.2]);
            c.betas = Some(vec![0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0]);
        }
        "fig5_beta1" | "fig5_beta5" => {
            c = ScenarioConfig::new(RunKind::SweepGrid);
            c.grid = Some(GridAxes::AB);
            c.beta = Some(if name == "fig5_beta1" { 1.0 } else { 5.0 });
            c.gamma = Some(0.1);
            c.g = Some(0.1);
            c.t_cycle = Some(40.0);
            c.a_values = Some(centres(0.0, 1.0, 8));
            c.b_values = Some(centres(0.0, 2.0, 8));
        }
        "fig6" => {
            c = ScenarioConfig::new(RunKind::ChainScaling);
            c.hamiltonian = ModelKind::Chain;
            c.a = 0.8;
            c.b = 1.0;
            c.j = 1.0;
            c.gamma = Some(0.1);
            c.g = Some(0.1);
            c.t_cycle = Some(40.0);
            c.lengths = Some(vec![2, 3, 4]);
            c.betas = Some(vec![0.1, 1.0, 5.0]);
        }
        "fig1b" => {
            c = ScenarioConfig::new(RunKind::RatesPlot);
            c.big_omega = Some(8.0);
            c.gamma = Some(0.1);
            c.betas = Some(vec![1.0, 5.0]);
        }
        "oracle1" => {
            c = ScenarioConfig::new(RunKind::Oracle);
            c.beta = Some(1.0);
            c.gamma = Some(0.1);
            c.coupling_ratios = Some(vec![0.5, 0.2, 0.1]);
        }
        other => {
            return Err(Error::Config(format!("unknown preset `{other}`; available: {}", PRESET_NAMES.join(", "))))
        }
    }
    c.name = name.to_string();
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            let back = ScenarioConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(back, c, "{name}");
        }
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected_with_location() {
        let err = ScenarioConfig::from_toml("kind = \"trajectory\"\nbeta = 1.0\ngama = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gama"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn missing_fields_are_named() {
        let err = ScenarioConfig::from_toml("kind = \"trajectory\"\nbeta = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("`gamma`"));
        let err =
            ScenarioConfig::from_toml("kind = \"sweep_grid\"\ngrid = \"gamma_beta\"\ngammas = []\nbetas = [1.0]\n")
                .unwrap_err();
        assert!(err.to_string().contains("nonempty"));
    }

    #[test]
    fn chain_lengths_are_bounded() {
        let text = "kind = \"chain_scaling\"\nhamiltonian = \"chain\"\nlengths = [2, 5]\nbetas = [1.0]\ngamma = 0.1\n";
        let err = ScenarioConfig::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("2^(4L)"));
    }

    #[test]
    fn bad_initial_state_rejected() {
        let text = "kind = \"trajectory\"\nbeta = 1.0\ngamma = 0.1\ninitial_state = \"012\"\n";
        assert!(ScenarioConfig::from_toml(text).is_err());
        let text = "kind = \"trajectory\"\nbeta = 1.0\ngamma = 0.1\ninitial_state = \"random\"\n";
        assert!(ScenarioConfig::from_toml(text).is_ok());
    }

    #[test]
    fn centres_are_cell_midpoints() {
        assert_eq!(centres(0.0, 1.0, 4), vec![0.125, 0.375, 0.625, 0.875]);
    }
}
