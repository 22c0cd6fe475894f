//! Experiment configuration files.
//!
//! One TOML file holds a `[numerics]` table plus one flat table per
//! experiment. Physical parameters have no defaults; numerical settings and
//! sweep grids do.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{Method, PropagatorConfig};
use crate::fields::{JosephsonParams, DEFAULT_SAMPLES_PER_PERIOD};
use crate::gates::ReversalRule;
use crate::phases::PhaseConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub steps_per_period: usize,
    pub method: Method,
    pub tolerance: f64,
    pub max_doublings: u32,
    pub quadrature_tolerance: f64,
    pub cyclic_threshold: f64,
    /// Field samples per period for the adiabatic (field-direction) phase.
    pub adiabatic_samples: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        let p = PropagatorConfig::default();
        let q = PhaseConfig::default();
        Numerics {
            steps_per_period: p.steps_per_period,
            method: p.method,
            tolerance: p.tolerance,
            max_doublings: p.max_doublings,
            quadrature_tolerance: q.quadrature_tolerance,
            cyclic_threshold: q.cyclic_threshold,
            adiabatic_samples: DEFAULT_SAMPLES_PER_PERIOD,
        }
    }
}

impl Numerics {
    pub fn propagator(&self) -> PropagatorConfig {
        PropagatorConfig {
            steps_per_period: self.steps_per_period,
            method: self.method,
            tolerance: self.tolerance,
            max_doublings: self.max_doublings,
        }
    }

    pub fn phase_config(&self) -> PhaseConfig {
        PhaseConfig {
            propagator: self.propagator(),
            quadrature_tolerance: self.quadrature_tolerance,
            cyclic_threshold: self.cyclic_threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.propagator().validate().map_err(|e| Error::Config(e.to_string()))?;
        for (name, v) in [
            ("tolerance", self.tolerance),
            ("quadrature_tolerance", self.quadrature_tolerance),
            ("cyclic_threshold", self.cyclic_threshold),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("numerics.{name} must be positive, got {v}")));
            }
        }
        if self.adiabatic_samples < 16 {
            return Err(Error::Config("numerics.adiabatic_samples must be at least 16".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// `tau / tau0` grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    #[serde(default = "TauGrid::default_min")]
    pub tau_min: f64,
    #[serde(default = "TauGrid::default_max")]
    pub tau_max: f64,
    #[serde(default = "TauGrid::default_points")]
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Default for TauGrid {
    fn default() -> Self {
        TauGrid {
            tau_min: 1.0,
            tau_max: 200.0,
            points: 60,
            spacing: Spacing::Log,
        }
    }
}

impl TauGrid {
    fn default_min() -> f64 {
        1.0
    }
    fn default_max() -> f64 {
        200.0
    }
    fn default_points() -> usize {
        60
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_min > 0.0 && self.tau_max > self.tau_min && self.points >= 2) {
            return Err(Error::Config(format!(
                "tau grid must satisfy 0 < tau_min < tau_max with at least 2 points (got {} .. {}, {} points)",
                self.tau_min, self.tau_max, self.points
            )));
        }
        Ok(())
    }

    /// Strictly increasing grid values, endpoints included exactly.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..=n)
            .map(|k| {
                if k == 0 {
                    return self.tau_min;
                }
                if k == n {
                    return self.tau_max;
                }
                let f = k as f64 / n as f64;
                match self.spacing {
                    Spacing::Log => (self.tau_min.ln() + f * (self.tau_max.ln() - self.tau_min.ln())).exp(),
                    Spacing::Linear => self.tau_min + f * (self.tau_max - self.tau_min),
                }
            })
            .collect()
    }
}

/// Conditional-phase NMR sweep with a fixed `omega1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1aConfig {
    pub omega0: f64,
    pub omega1: f64,
    pub coupling: f64,
    #[serde(flatten)]
    pub grid: TauGrid,
}

/// NMR sweep with `omega1 = J - omega` tracking the drive frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1bConfig {
    pub omega0: f64,
    pub coupling: f64,
    #[serde(flatten)]
    pub grid: TauGrid,
}

/// Charge-qubit device constants (ueV). Exactly one of `chi0` and
/// `cos_chi0` must be given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub e1: f64,
    pub e2: f64,
    pub ech: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos_chi0: Option<f64>,
}

impl Device {
    pub fn chi0(&self) -> Result<f64> {
        match (self.chi0, self.cos_chi0) {
            (Some(c), None) => Ok(c),
            (None, Some(c)) if (-1.0..=1.0).contains(&c) => Ok(c.acos()),
            (None, Some(c)) => Err(Error::Config(format!("cos_chi0 = {c} outside [-1, 1]"))),
            _ => Err(Error::Config("give exactly one of chi0 and cos_chi0".into())),
        }
    }

    pub fn params(&self, omega: f64) -> Result<JosephsonParams> {
        let p = JosephsonParams {
            e1: self.e1,
            e2: self.e2,
            ech: self.ech,
            ei: 0.0,
            chi0: self.chi0()?,
            omega,
            nxc: 0.0,
            delta: 0,
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn tau0(&self, def: Tau0) -> f64 {
        let p = JosephsonParams {
            e1: self.e1,
            e2: self.e2,
            ech: self.ech,
            ei: 0.0,
            chi0: PI / 2.0,
            omega: 1.0,
            nxc: 0.0,
            delta: 0,
        };
        match def {
            Tau0::EPlus => 1.0 / p.e_plus(),
            Tau0::EMinus => 1.0 / p.e_minus().abs(),
            Tau0::MeanEj => 1.0 / p.mean_josephson_energy(),
        }
    }
}

/// Charge-qubit time unit `hbar / E_J` for three readings of `E_J`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tau0 {
    /// `E_J = E1 + E2`, its maximum.
    #[default]
    EPlus,
    /// `E_J = |E1 - E2|`, its minimum.
    EMinus,
    /// `E_J` averaged over one period of the flux drive.
    MeanEj,
}

impl Tau0 {
    pub const ALL: [Tau0; 3] = [Tau0::EPlus, Tau0::EMinus, Tau0::MeanEj];

    pub fn name(self) -> &'static str {
        match self {
            Tau0::EPlus => "e-plus",
            Tau0::EMinus => "e-minus",
            Tau0::MeanEj => "mean-ej",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2bConfig {
    #[serde(flatten)]
    pub device: Device,
    pub tau_over_tau0: f64,
    #[serde(default)]
    pub tau0: Tau0,
    #[serde(default = "Fig2bConfig::default_samples")]
    pub samples: usize,
}

impl Fig2bConfig {
    fn default_samples() -> usize {
        512
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2cConfig {
    #[serde(flatten)]
    pub device: Device,
    #[serde(flatten)]
    pub grid: TauGrid,
    /// `tau0` used for the sweep axis.
    #[serde(default)]
    pub tau0: Tau0,
    /// Relative deviation defining the adiabatic crossover.
    #[serde(default = "Fig2cConfig::default_threshold")]
    pub crossover_threshold: f64,
    /// Expected crossover in units of `tau0`; checked within a factor of 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossover_reference: Option<f64>,
}

impl Fig2cConfig {
    fn default_threshold() -> f64 {
        0.10
    }
}

/// Single-qubit NMR parameters without coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmrDrive {
    pub omega0: f64,
    pub omega1: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub oracle_omega0: Vec<f64>,
    pub oracle_omega1: Vec<f64>,
    pub oracle_omega: Vec<f64>,
    pub nmr: NmrDrive,
    /// Cone angles for the one-loop phase law.
    pub phase_law_chi: Vec<f64>,
    /// Field magnitude `sqrt(w0^2 + (w1 + w)^2)` used to realize each cone angle.
    pub phase_law_field: f64,
    pub phase_law_omega: f64,
    pub device: Device,
    /// Drive frequencies of the charge-qubit checks, in units of `1 / tau0`.
    pub device_tau_over_tau0: Vec<f64>,
    pub fig1b: Fig1bConfig,
    #[serde(default = "VerifyConfig::default_rotations")]
    pub rotations: Vec<f64>,
    #[serde(default = "VerifyConfig::default_pairs")]
    pub random_pairs: usize,
    #[serde(default = "VerifyConfig::default_specs")]
    pub random_specs: usize,
    #[serde(default = "VerifyConfig::default_seed")]
    pub seed: u64,
    /// Polar-angle offset of the negative control.
    #[serde(default = "VerifyConfig::default_probe")]
    pub probe_offset: f64,
}

impl VerifyConfig {
    fn default_rotations() -> Vec<f64> {
        vec![PI / 6.0, PI / 2.0, PI]
    }
    fn default_pairs() -> usize {
        10_000
    }
    fn default_specs() -> usize {
        1_000
    }
    fn default_seed() -> u64 {
        2024
    }
    fn default_probe() -> f64 {
        0.1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub omega0: f64,
    pub omega: f64,
    pub coupling: f64,
    /// Target `omega1`; the control gets `omega1 + detuning * J`.
    pub omega1_target: f64,
    #[serde(default = "SweepConfig::default_drive")]
    pub drive_on_control: bool,
    #[serde(default = "SweepConfig::default_dmin")]
    pub detuning_min: f64,
    #[serde(default = "SweepConfig::default_dmax")]
    pub detuning_max: f64,
    #[serde(default = "SweepConfig::default_points")]
    pub points: usize,
    #[serde(default = "SweepConfig::default_loops")]
    pub loops: usize,
}

impl SweepConfig {
    fn default_drive() -> bool {
        true
    }
    fn default_dmin() -> f64 {
        2.0
    }
    fn default_dmax() -> f64 {
        200.0
    }
    fn default_points() -> usize {
        12
    }
    fn default_loops() -> usize {
        1
    }

    pub fn detunings(&self) -> Result<Vec<f64>> {
        TauGrid {
            tau_min: self.detuning_min,
            tau_max: self.detuning_max,
            points: self.points,
            spacing: Spacing::Log,
        }
        .validate()
        .map_err(|_| Error::Config("sweep needs 0 < detuning_min < detuning_max and at least 2 points".into()))?;
        Ok(TauGrid {
            tau_min: self.detuning_min,
            tau_max: self.detuning_max,
            points: self.points,
            spacing: Spacing::Log,
        }
        .values())
    }
}

/// Physical platform of a one-off gate synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "platform", rename_all = "kebab-case")]
pub enum GatePlatform {
    Nmr {
        omega0: f64,
        omega1: f64,
        omega: f64,
        #[serde(default)]
        coupling: f64,
        #[serde(default)]
        delta: u8,
    },
    Josephson {
        e1: f64,
        e2: f64,
        ech: f64,
        chi0: f64,
        omega: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    #[serde(flatten)]
    pub platform: GatePlatform,
    #[serde(default)]
    pub rule: ReversalRule,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fig1a: Option<Fig1aConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fig1b: Option<Fig1bConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fig2b: Option<Fig2bConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fig2c: Option<Fig2cConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.numerics.validate()?;
        for g in [
            self.fig1a.map(|c| c.grid),
            self.fig1b.map(|c| c.grid),
            self.fig2c.map(|c| c.grid),
        ]
        .into_iter()
        .flatten()
        {
            g.validate()?;
        }
        if let Some(c) = &self.fig2c {
            if !(c.crossover_threshold > 0.0) {
                return Err(Error::Config("fig2c.crossover_threshold must be positive".into()));
            }
            c.device.chi0()?;
        }
        if let Some(c) = &self.fig2b {
            c.device.chi0()?;
            if !(c.tau_over_tau0 > 0.0) || c.samples < 2 {
                return Err(Error::Config(
                    "fig2b needs tau_over_tau0 > 0 and at least 2 samples".into(),
                ));
            }
        }
        if let Some(c) = &self.sweep {
            c.detunings()?;
            if c.loops == 0 {
                return Err(Error::Config("sweep.loops must be at least 1".into()));
            }
        }
        if let Some(v) = &self.verify {
            v.device.chi0()?;
            v.fig1b.grid.validate()?;
            if v.oracle_omega.iter().any(|w| !(*w > 0.0)) || v.oracle_omega.is_empty() {
                return Err(Error::Config(
                    "verify.oracle_omega must be non-empty and positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Applies command-line overrides of the step count and tolerance.
    pub fn with_overrides(mut self, steps: Option<usize>, tol: Option<f64>) -> Result<Self> {
        if let Some(s) = steps {
            self.numerics.steps_per_period = s;
        }
        if let Some(t) = tol {
            self.numerics.tolerance = t;
        }
        self.validate()?;
        Ok(self)
    }
}
