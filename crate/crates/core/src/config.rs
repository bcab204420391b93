//! Run configuration (TOML). Unknown keys are rejected everywhere.

use crate::device::{figures_of_merit, DeviceParams, Label};
use crate::exec::Exec;
use crate::pump::Drive;
use crate::simulation::Numerics;
use crate::squeeze::NlPath;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    pub radius_um: f64,
    pub coupler_fraction: f64,
    pub wavelength_um: f64,
    pub effective_index: f64,
    pub group_velocity: f64,
    pub ring_group_velocity: Option<f64>,
    pub delta_beta: f64,
    /// 1/(W·m).
    pub gamma_nl: f64,
    pub finesse: f64,
    pub escape_efficiency: f64,
    pub ring_phantoms: usize,
    pub branch: u32,
    /// Window half-width in linewidths.
    pub n_r: f64,
    pub n_k: usize,
    /// Grow `n_k` so the grid does not recur before a pulse has left the ring.
    pub auto_n_k: bool,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let d = DeviceParams::default();
        DeviceConfig {
            radius_um: d.radius,
            coupler_fraction: d.coupler_fraction,
            wavelength_um: d.pump_wavelength,
            effective_index: d.effective_index,
            group_velocity: d.group_velocity,
            ring_group_velocity: d.ring_group_velocity,
            delta_beta: d.delta_beta,
            gamma_nl: d.gamma_nl,
            finesse: d.finesse,
            escape_efficiency: d.escape_efficiency,
            ring_phantoms: d.ring_phantoms,
            branch: d.coupling_branch,
            n_r: 10.0,
            n_k: 41,
            auto_n_k: true,
        }
    }
}

impl DeviceConfig {
    pub fn params(&self) -> DeviceParams {
        DeviceParams {
            radius: self.radius_um,
            coupler_fraction: self.coupler_fraction,
            pump_wavelength: self.wavelength_um,
            effective_index: self.effective_index,
            group_velocity: self.group_velocity,
            ring_group_velocity: self.ring_group_velocity,
            delta_beta: self.delta_beta,
            gamma_nl: self.gamma_nl,
            finesse: self.finesse,
            escape_efficiency: self.escape_efficiency,
            ring_phantoms: self.ring_phantoms,
            coupling_branch: self.branch,
        }
    }
}

/// Pump drive. Detunings are in pump linewidths (HWHM).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveConfig {
    Gaussian {
        energy_pj: f64,
        /// Intensity standard deviation, ps.
        tau_ps: f64,
        #[serde(default)]
        detuning: f64,
        /// Pulse centre distance from the ring at t = 0, in units of τ.
        #[serde(default = "default_lead")]
        lead_tau: f64,
    },
    Cw {
        power_w: f64,
        #[serde(default)]
        detuning: f64,
    },
}

fn default_lead() -> f64 {
    5.0
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig::Gaussian { energy_pj: 100.0, tau_ps: 70.0, detuning: 0.0, lead_tau: 5.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub spm_xpm: bool,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig { spm_xpm: true }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NlPathConfig {
    Auto,
    Series,
    Closed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Fixed squeeze step, ps.
    pub dt_ps: Option<f64>,
    pub quadrature_nodes: usize,
    pub nl_path: NlPathConfig,
    /// Pulsed runs stop when ring pump photons drop below this fraction of the peak.
    pub decay: f64,
    /// CW spectrum run length as a fraction of the grid recurrence time.
    pub cw_span: f64,
    /// CW rate run length as a fraction of the grid recurrence time.
    pub rate_span: f64,
    pub rate_checkpoints: usize,
    /// Relative mismatch allowed between the two half-slopes of a CW rate fit.
    pub rate_tolerance: f64,
    /// Run the data-parallel kernels; results are identical either way.
    pub parallel: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            dt_ps: None,
            quadrature_nodes: 16,
            nl_path: NlPathConfig::Auto,
            decay: 1e-4,
            cw_span: 1.0,
            rate_span: 0.75,
            rate_checkpoints: 8,
            rate_tolerance: 0.05,
            parallel: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Single,
    FinesseSweep,
    PowerSweep,
    Detuning,
    Correlations,
    CwRates,
    CwSpectrum,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        ScenarioName::Single,
        ScenarioName::FinesseSweep,
        ScenarioName::PowerSweep,
        ScenarioName::Detuning,
        ScenarioName::Correlations,
        ScenarioName::CwRates,
        ScenarioName::CwSpectrum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Single => "single",
            ScenarioName::FinesseSweep => "finesse_sweep",
            ScenarioName::PowerSweep => "power_sweep",
            ScenarioName::Detuning => "detuning",
            ScenarioName::Correlations => "correlations",
            ScenarioName::CwRates => "cw_rates",
            ScenarioName::CwSpectrum => "cw_spectrum",
        }
    }

    pub fn parse(s: &str) -> Result<ScenarioName> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    pub finesse: Vec<f64>,
    pub energies_pj: Vec<f64>,
    pub powers_w: Vec<f64>,
    /// Pump detunings in linewidths.
    pub detunings: Vec<f64>,
    /// Spectrum half-width in signal linewidths, and number of points.
    pub spectrum_half_width: f64,
    pub spectrum_points: usize,
    /// Attach oracle comparisons to each point.
    pub oracles: bool,
    /// Write moment matrices for every point.
    pub moments: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: ScenarioName::Single,
            finesse: vec![10.0, 21.5, 46.4, 100.0, 215.0, 464.0, 1000.0],
            energies_pj: vec![25.0, 50.0, 100.0, 200.0, 400.0],
            powers_w: vec![1e-4, 2e-4, 5e-4, 1e-3],
            detunings: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            spectrum_half_width: 3.0,
            spectrum_points: 61,
            oracles: true,
            moments: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub device: DeviceConfig,
    pub drive: DriveConfig,
    pub physics: PhysicsConfig,
    pub numerics: NumericsConfig,
    pub scenario: ScenarioConfig,
    pub output: OutputConfig,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {x}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.device;
        positive("device.radius_um", d.radius_um)?;
        positive("device.wavelength_um", d.wavelength_um)?;
        positive("device.effective_index", d.effective_index)?;
        positive("device.group_velocity", d.group_velocity)?;
        positive("device.finesse", d.finesse)?;
        positive("device.n_r", d.n_r)?;
        if let Some(u) = d.ring_group_velocity {
            positive("device.ring_group_velocity", u)?;
        }
        if !(d.gamma_nl >= 0.0) {
            return Err(Error::Config("device.gamma_nl must be non-negative".into()));
        }
        if !(d.escape_efficiency > 0.0 && d.escape_efficiency <= 1.0) {
            return Err(Error::Config("device.escape_efficiency must lie in (0, 1]".into()));
        }
        if d.n_k == 0 || d.n_k % 2 == 0 {
            return Err(Error::Config(format!("device.n_k must be odd, got {}", d.n_k)));
        }
        match self.drive {
            DriveConfig::Gaussian { energy_pj, tau_ps, lead_tau, .. } => {
                positive("drive.energy_pj", energy_pj)?;
                positive("drive.tau_ps", tau_ps)?;
                positive("drive.lead_tau", lead_tau)?;
            }
            DriveConfig::Cw { power_w, .. } => positive("drive.power_w", power_w)?,
        }
        let n = &self.numerics;
        if let Some(dt) = n.dt_ps {
            positive("numerics.dt_ps", dt)?;
        }
        positive("numerics.decay", n.decay)?;
        positive("numerics.rate_tolerance", n.rate_tolerance)?;
        if !(n.cw_span > 0.0 && n.cw_span <= 1.0) || !(n.rate_span > 0.0 && n.rate_span <= 1.0) {
            return Err(Error::Config("numerics.cw_span and rate_span must lie in (0, 1]".into()));
        }
        if n.quadrature_nodes == 0 || n.rate_checkpoints < 4 {
            return Err(Error::Config("numerics.quadrature_nodes ≥ 1 and rate_checkpoints ≥ 4 required".into()));
        }
        let s = &self.scenario;
        for &f in &s.finesse {
            positive("scenario.finesse", f)?;
        }
        for &e in &s.energies_pj {
            positive("scenario.energies_pj", e)?;
        }
        for &p in &s.powers_w {
            positive("scenario.powers_w", p)?;
        }
        positive("scenario.spectrum_half_width", s.spectrum_half_width)?;
        if s.spectrum_points == 0 {
            return Err(Error::Config("scenario.spectrum_points must be positive".into()));
        }
        Ok(())
    }

    pub fn numerics(&self, n_r: f64, n_k: usize) -> Numerics {
        let n = &self.numerics;
        Numerics {
            n_r,
            n_k,
            nodes: n.quadrature_nodes,
            spm_xpm: self.physics.spm_xpm,
            dt: n.dt_ps,
            nl_path: match n.nl_path {
                NlPathConfig::Auto => NlPath::Auto,
                NlPathConfig::Series => NlPath::Series,
                NlPathConfig::Closed => NlPath::Closed,
            },
            decay: n.decay,
            exec: if n.parallel { Exec::Parallel } else { Exec::Sequential },
        }
    }

    /// Window half-width and bin count for `params`. The half-width is capped
    /// at 0.4 F linewidths so neighbouring windows stay apart; with
    /// `auto_n_k` the bin count grows until a pulse plus the ring decay fits
    /// inside one grid recurrence.
    pub fn grid_for(&self, params: &DeviceParams) -> Result<(f64, usize)> {
        let d = &self.device;
        let n_r = d.n_r.min(0.4 * params.finesse);
        let DriveConfig::Gaussian { tau_ps, lead_tau, .. } = self.drive else {
            return Ok((n_r, d.n_k));
        };
        if !d.auto_n_k {
            return Ok((n_r, d.n_k));
        }
        let spec = params.build()?;
        let gamma = Label::ALL
            .iter()
            .map(|&l| figures_of_merit(&spec, l).map(|f| f.gamma_omega))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let t_needed = 1.05 * (2.0 * lead_tau * tau_ps + (1.0 / self.numerics.decay).ln() / (2.0 * gamma));
        // recurrence 2π/(vδ) with vδ = 2 n_r Γ/(n_k − 1)
        let n = ((t_needed * n_r * gamma / std::f64::consts::PI).ceil() as usize + 1).max(d.n_k);
        Ok((n_r, if n % 2 == 0 { n + 1 } else { n }))
    }

    /// Converts a drive block to a [`Drive`] for the built device; detunings
    /// are turned into wavenumber offsets, and CW carriers are snapped to
    /// the nearest pump bin.
    pub fn drive_for(drive: &DriveConfig, problem: &crate::simulation::Problem) -> Result<Drive> {
        let fom = figures_of_merit(&problem.spec, Label::P)?;
        let w = problem.window(Label::P);
        let to_k = |det: f64| det * fom.gamma_omega / w.v;
        Ok(match *drive {
            DriveConfig::Gaussian { energy_pj, tau_ps, detuning, lead_tau } => Drive::Gaussian {
                energy: energy_pj,
                tau: tau_ps,
                k0_offset: to_k(detuning),
                lead: lead_tau * tau_ps,
            },
            DriveConfig::Cw { power_w, detuning } => {
                let k = to_k(detuning);
                let j = ((k - w.dks[0]) / w.dk).round().clamp(0.0, (w.len() - 1) as f64) as usize;
                Drive::Cw { power: power_w, k0_offset: w.dks[j] }
            }
        })
    }
}
