use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouvillian::Frame;
use crate::model::{ChainSpec, NoiseSpec, Polarization};
use crate::solvers::SolverOptions;

pub const DEFAULT_J: f64 = 1000.0;
pub const DEFAULT_MAX_SITES: usize = 8;
pub const DEFAULT_TRIALS: usize = 20;
pub const DEFAULT_NBAR_GRID: [f64; 4] = [0.001, 0.01, 0.1, 0.5];
pub const DEFAULT_PERCENTS: [f64; 3] = [0.1, 0.2, 0.3];

/// Logarithmic grid from `10^lo` to `10^hi` with `points` entries.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..points)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
        .collect()
}

/// Default `gamma / kappa` grid for panel A: `10^0 .. 10^3`, 13 points.
pub fn default_gamma_grid() -> Vec<f64> {
    log_grid(0.0, 3.0, 13)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n: usize,
    #[serde(default = "default_j")]
    pub j: f64,
}

fn default_j() -> f64 {
    DEFAULT_J
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { n: 5, j: DEFAULT_J }
    }
}

impl ChainConfig {
    pub fn spec(&self, n: usize) -> Result<ChainSpec> {
        ChainSpec::new(n, self.j)
    }
}

/// Natural noise in units of `kappa`. Unset fields take the experiment's default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
}

impl NoiseConfig {
    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(1.0)
    }

    /// Replaces unset fields with their defaults so the config echo is complete.
    pub fn filled(&self) -> NoiseConfig {
        NoiseConfig {
            kappa: Some(self.kappa()),
            kappa_phi: Some(self.kappa_phi.unwrap_or(1.0)),
            nbar: Some(self.nbar.unwrap_or(0.001)),
        }
    }

    /// Absolute rates; `kappa_phi` is given as a ratio to `kappa`.
    pub fn resolve(&self, nbar_override: Option<f64>) -> Result<NoiseSpec> {
        let kappa = self.kappa();
        NoiseSpec::new(
            kappa,
            self.kappa_phi.unwrap_or(1.0) * kappa,
            nbar_override.or(self.nbar).unwrap_or(0.001),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub mode: usize,
    pub polarization: Polarization,
    pub gamma_over_kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "gamma_over_kappa")]
    GammaOverKappa,
    #[serde(rename = "nbar")]
    Nbar,
    #[serde(rename = "reservoir_count")]
    ReservoirCount,
    #[serde(rename = "N")]
    N,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(parameter: SweepParameter, values: Vec<f64>) -> Self {
        SweepAxis { parameter, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    /// Relative spread `p`: each rate is scaled by a uniform factor in `[1-p, 1+p]`.
    #[serde(default = "default_percent")]
    pub percent: OneOrMany,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_percent() -> OneOrMany {
    OneOrMany::Many(DEFAULT_PERCENTS.to_vec())
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig { percent: default_percent(), trials: DEFAULT_TRIALS, seed: 0 }
    }
}

/// Output times in units of the nominal engineered rate: `t = tau / gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default = "default_tau_end")]
    pub tau_end: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_tau_end() -> f64 {
    10.0
}

fn default_points() -> usize {
    200
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { tau_end: default_tau_end(), points: default_points() }
    }
}

impl TimeGrid {
    pub fn taus(&self) -> Vec<f64> {
        let m = self.points - 1;
        (0..self.points).map(|i| self.tau_end * i as f64 / m as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub chain: ChainConfig,
    pub noise: NoiseConfig,
    pub target_mode: usize,
    pub reservoir_plan: Vec<PlanEntry>,
    pub frame: Frame,
    pub sweep: Vec<SweepAxis>,
    pub robustness: Option<RobustnessConfig>,
    pub time_grid: TimeGrid,
    pub solver: SolverOptions,
    pub concurrence_pair: (usize, usize),
    pub output_path: Option<String>,
    /// Largest chain the sweep will build; larger points fail instead of allocating.
    pub max_sites: usize,
    /// When false, `wall_time_seconds` is written as 0 so output is reproducible byte for byte.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            chain: ChainConfig::default(),
            noise: NoiseConfig::default(),
            target_mode: 1,
            reservoir_plan: Vec::new(),
            frame: Frame::Lab,
            sweep: Vec::new(),
            robustness: None,
            time_grid: TimeGrid::default(),
            solver: SolverOptions::default(),
            concurrence_pair: (2, 3),
            output_path: None,
            max_sites: DEFAULT_MAX_SITES,
            record_wall_time: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Single-line JSON echo.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn axis(&self, p: SweepParameter) -> Option<&SweepAxis> {
        self.sweep.iter().find(|a| a.parameter == p)
    }

    /// Appends `axis` unless the parameter is already swept.
    pub fn with_default_axis(&mut self, p: SweepParameter, values: impl FnOnce() -> Vec<f64>) {
        if self.axis(p).is_none() {
            self.sweep.push(SweepAxis::new(p, values()));
        }
    }

    /// Chain sizes visited by the sweep.
    pub fn sizes(&self) -> Vec<usize> {
        match self.axis(SweepParameter::N) {
            Some(a) => a.values.iter().map(|v| *v as usize).collect(),
            None => vec![self.chain.n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.chain.n == 0 || !(self.chain.j > 0.0) || !self.chain.j.is_finite() {
            return bad(format!("chain needs n >= 1 and J > 0, got n = {}, J = {}", self.chain.n, self.chain.j));
        }
        let n = &self.noise;
        for v in [n.kappa, n.kappa_phi, n.nbar].into_iter().flatten() {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("noise parameters must be finite and non-negative, got {v}"));
            }
        }
        if !(self.noise.kappa() > 0.0) {
            return bad("kappa sets the unit and must be positive".into());
        }
        for (i, a) in self.sweep.iter().enumerate() {
            if a.values.is_empty() {
                return bad(format!("sweep axis {:?} has an empty grid", a.parameter));
            }
            if self.sweep[..i].iter().any(|b| b.parameter == a.parameter) {
                return bad(format!("sweep axis {:?} given twice", a.parameter));
            }
            for &v in &a.values {
                let ok = match a.parameter {
                    SweepParameter::GammaOverKappa | SweepParameter::Nbar => v >= 0.0 && v.is_finite(),
                    SweepParameter::ReservoirCount | SweepParameter::N => v >= 1.0 && v.fract() == 0.0,
                };
                if !ok {
                    return bad(format!("invalid value {v} on sweep axis {:?}", a.parameter));
                }
            }
        }
        for size in self.sizes() {
            if self.target_mode == 0 || self.target_mode > size {
                return bad(format!("target_mode {} is not a mode of a chain with {size} spins", self.target_mode));
            }
        }
        if let Some(a) = self.axis(SweepParameter::ReservoirCount) {
            let smallest = self.sizes().into_iter().min().unwrap_or(self.chain.n);
            if a.values.iter().any(|&m| m as usize > smallest) {
                return bad(format!("reservoir_count exceeds the number of modes ({smallest})"));
            }
        }
        let mut seen = Vec::new();
        for e in &self.reservoir_plan {
            if e.mode == 0 || e.mode > self.chain.n {
                return bad(format!("reservoir_plan names mode {} outside 1..={}", e.mode, self.chain.n));
            }
            if seen.contains(&e.mode) {
                return bad(format!("reservoir_plan names mode {} twice", e.mode));
            }
            seen.push(e.mode);
            if !(e.gamma_over_kappa >= 0.0) || !e.gamma_over_kappa.is_finite() {
                return bad(format!("gamma_over_kappa must be non-negative, got {}", e.gamma_over_kappa));
            }
        }
        if let Some(r) = &self.robustness {
            if r.trials == 0 {
                return bad("robustness.trials must be at least 1".into());
            }
            let ps = r.percent.values();
            if ps.is_empty() || ps.iter().any(|p| !(*p >= 0.0 && *p < 1.0)) {
                return bad("robustness.percent values must lie in [0, 1)".into());
            }
        }
        if self.time_grid.points < 2 || !(self.time_grid.tau_end > 0.0) {
            return bad("time_grid needs at least 2 points and tau_end > 0".into());
        }
        let (i, j) = self.concurrence_pair;
        if i == 0 || j == 0 || i == j {
            return bad(format!("concurrence_pair ({i}, {j}) must name two distinct sites"));
        }
        if self.max_sites == 0 {
            return bad("max_sites must be positive".into());
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"chian": {"n": 3}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"chain": {"n": 3, "J": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"solver": {"tol": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"robustness": {"trails": 3}}"#).is_err());
    }

    #[test]
    fn invariants() {
        assert!(ExperimentConfig::from_json(r#"{"sweep": [{"parameter": "nbar", "values": []}]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"robustness": {"trials": 0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"target_mode": 6}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"sweep": [{"parameter": "N", "values": [2.5]}]}"#).is_err());
        let ok = r#"{"chain": {"n": 3}, "sweep": [{"parameter": "N", "values": [2, 3]}],
                     "robustness": {"percent": 0.2, "trials": 4, "seed": 9}}"#;
        let cfg = ExperimentConfig::from_json(ok).unwrap();
        assert_eq!(cfg.sizes(), vec![2, 3]);
        assert_eq!(cfg.robustness.unwrap().percent.values(), vec![0.2]);
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.push(SweepAxis::new(SweepParameter::N, vec![2.0, 3.0]));
        let text = cfg.to_json();
        assert!(!text.contains('\n'));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn default_grids() {
        let g = default_gamma_grid();
        assert_eq!(g.len(), 13);
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[12] - 1000.0).abs() < 1e-9);
        let taus = TimeGrid::default().taus();
        assert_eq!(taus.len(), 200);
        assert_eq!(taus[199], 10.0);
    }
}
