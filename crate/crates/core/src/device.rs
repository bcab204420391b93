//! Ring geometry, resonances, phantom loss channels and coupling calibration.

use crate::units::{gamma_from_per_watt_metre, C_LIGHT};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    S,
    P,
    I,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::S, Label::P, Label::I];

    pub fn idx(self) -> usize {
        match self {
            Label::S => 0,
            Label::P => 1,
            Label::I => 2,
        }
    }
}

/// One resonance of the ring: carrier, wavenumbers, group velocities and
/// the directional-coupler rate α₀ = ω_c/√(v u).
#[derive(Clone, Debug)]
pub struct ResonanceSpec {
    pub label: Label,
    pub mode_number: i64,
    pub omega: f64,
    pub k_wg: f64,
    pub k_ring: f64,
    pub v: f64,
    pub u: f64,
    pub alpha0: f64,
}

impl ResonanceSpec {
    pub fn delta_beta(&self) -> f64 {
        self.k_wg - self.k_ring
    }
}

/// Phantom channels. Ring phantoms sit at `ring_positions`; waveguide
/// phantoms sit at the ring positions lying inside the coupler.
///
/// Channel 0 is the real waveguide, channels `1..=n_ring` are ring phantoms
/// and `n_ring+1..=n_ring+n_wg` are waveguide phantoms.
#[derive(Clone, Debug)]
pub struct PhantomLayout {
    pub ring_positions: Vec<f64>,
    pub wg_count: usize,
    /// `[resonance][phantom]`, ring phantoms.
    pub sigma_ring: Vec<Vec<f64>>,
    /// `[resonance][phantom]`, waveguide phantoms.
    pub sigma_wg: Vec<Vec<f64>>,
}

impl PhantomLayout {
    pub fn n_ring(&self) -> usize {
        self.ring_positions.len()
    }

    /// Total number of channels including the real waveguide.
    pub fn n_channels(&self) -> usize {
        1 + self.n_ring() + self.wg_count
    }

    pub fn ring_channel(&self, j: usize) -> usize {
        1 + j
    }

    pub fn wg_channel(&self, j: usize) -> usize {
        1 + self.n_ring() + j
    }

    pub fn kappa(sigma: f64) -> f64 {
        (1.0 - sigma * sigma).max(0.0).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct DeviceSpec {
    pub ring_length: f64,
    pub coupler_length: f64,
    /// Ordered S, P, I.
    pub resonances: Vec<ResonanceSpec>,
    pub layout: PhantomLayout,
    /// Nonlinear parameter in 1/(pJ/ps·µm), ring and waveguide.
    pub gamma_nl: f64,
}

impl DeviceSpec {
    pub fn res(&self, l: Label) -> &ResonanceSpec {
        &self.resonances[l.idx()]
    }

    /// Round-trip amplitude transmission of the ring phantoms, ξ = ∏σ.
    pub fn xi(&self, l: Label) -> f64 {
        self.layout.sigma_ring[l.idx()].iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ring_length > 0.0) || !(self.coupler_length > 0.0) {
            return Err(Error::Domain("lengths must be positive".into()));
        }
        if self.coupler_length > self.ring_length {
            return Err(Error::Domain("coupler longer than ring".into()));
        }
        if self.resonances.len() != 3 {
            return Err(Error::Domain("need S, P, I resonances".into()));
        }
        for r in &self.resonances {
            if !(r.v > 0.0 && r.u > 0.0) {
                return Err(Error::Domain(format!("{:?}: group velocities must be positive", r.label)));
            }
            if !(r.alpha0 >= 0.0) {
                return Err(Error::Domain(format!("{:?}: negative coupling", r.label)));
            }
        }
        for s in self.layout.sigma_ring.iter().chain(&self.layout.sigma_wg).flatten() {
            if !(*s > 0.0 && *s <= 1.0) {
                return Err(Error::Unphysical(format!("phantom sigma {s} outside (0,1]")));
            }
        }
        Ok(())
    }
}

/// Optical path length along the waveguide coordinate, and the effective
/// ring length L̃ = l(L_r).
pub fn map_path(spec: &DeviceSpec, l: Label, z: f64) -> Result<(f64, f64)> {
    if !(0.0..=spec.ring_length).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside [0, L_r]")));
    }
    let r = spec.res(l);
    let q = r.v / r.u;
    let lc = spec.coupler_length;
    let f = |z: f64| if z <= lc { 0.5 * (1.0 + q) * z } else { q * z + 0.5 * (1.0 - q) * lc };
    Ok((f(z), f(spec.ring_length)))
}

#[derive(Clone, Copy, Debug)]
pub struct Calibration {
    pub sigma_bar: f64,
    pub xi: f64,
    pub sigma_ph: f64,
    pub kappa_ph: f64,
    pub alpha0: f64,
}

/// Round-trip amplitude ρ = σ̄ξ for a target finesse, from π√ρ = F(1−ρ).
pub fn rho_from_finesse(finesse: f64) -> Result<f64> {
    if !(finesse > 0.0) || !finesse.is_finite() {
        return Err(Error::Domain(format!("finesse {finesse} must be positive")));
    }
    let s = (-PI + (PI * PI + 4.0 * finesse * finesse).sqrt()) / (2.0 * finesse);
    Ok(s * s)
}

/// Solves for σ̄, ξ, the per-phantom σ and α₀ giving the requested finesse
/// and escape efficiency. `branch` selects how many extra 2π the coupler
/// phase αL_c winds through.
pub fn calibrate_coupling(
    finesse: f64,
    eta: f64,
    n_ring_phantoms: usize,
    branch: u32,
    coupler_length: f64,
    mu_minus: f64,
) -> Result<Calibration> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("escape efficiency {eta} outside (0,1]")));
    }
    if !(coupler_length > 0.0) {
        return Err(Error::Domain("coupler length must be positive".into()));
    }
    let rho = rho_from_finesse(finesse)?;
    let xi = (eta + rho * rho * (1.0 - eta)).sqrt();
    let sigma_bar = rho / xi;
    if eta < 1.0 && n_ring_phantoms == 0 {
        return Err(Error::Unphysical("loss requested without ring phantoms".into()));
    }
    let sigma_ph = if n_ring_phantoms == 0 { 1.0 } else { xi.powf(1.0 / n_ring_phantoms as f64) };
    let kappa_bar = (1.0 - sigma_bar * sigma_bar).sqrt();
    let alpha0 = solve_alpha0(kappa_bar, branch, coupler_length, mu_minus)?;
    Ok(Calibration { sigma_bar, xi, sigma_ph, kappa_ph: PhantomLayout::kappa(sigma_ph), alpha0 })
}

/// Finds α₀ with (α₀/α)|sin αL_c| = κ̄, α = √(μ₋² + α₀²), on the given branch.
fn solve_alpha0(kappa_bar: f64, branch: u32, lc: f64, mu: f64) -> Result<f64> {
    let f = |alpha: f64| {
        let a0 = (alpha * alpha - mu * mu).max(0.0).sqrt();
        if alpha == 0.0 { 0.0 } else { a0 / alpha * (alpha * lc).sin().abs() }
    };
    if mu == 0.0 {
        return Ok((kappa_bar.min(1.0).asin() + 2.0 * PI * branch as f64) / lc);
    }
    let lo = (2.0 * PI * branch as f64 / lc).max(mu.abs());
    let hi = (2.0 * PI * branch as f64 + 0.5 * PI) / lc;
    if lo >= hi || f(hi) < kappa_bar {
        return Err(Error::InfeasibleTarget(format!(
            "coupler cannot reach |kappa| = {kappa_bar} with phase mismatch {mu} on branch {branch}"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    if f(a) >= kappa_bar {
        return Ok((a * a - mu * mu).max(0.0).sqrt());
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) < kappa_bar { a = m } else { b = m }
    }
    let alpha = 0.5 * (a + b);
    Ok((alpha * alpha - mu * mu).sqrt())
}

#[derive(Clone, Copy, Debug)]
pub struct FiguresOfMerit {
    /// Half width at half maximum in MHz.
    pub gamma_mhz: f64,
    /// Half width at half maximum in rad/ps.
    pub gamma_omega: f64,
    pub eta_esc: f64,
    pub finesse: f64,
    pub sigma_bar: f64,
    pub xi: f64,
    /// Free spectral range in rad/ps.
    pub fsr_omega: f64,
}

pub fn figures_of_merit(spec: &DeviceSpec, l: Label) -> Result<FiguresOfMerit> {
    let r = spec.res(l);
    let env = crate::coupler::coupler_envelopes(spec, l, spec.coupler_length, r.k_wg)?;
    let sigma_bar = env.sigma.norm();
    let xi = spec.xi(l);
    let rho = sigma_bar * xi;
    if !(rho < 1.0) {
        return Err(Error::Undefined("lossless uncoupled ring has no linewidth".into()));
    }
    let (_, lt) = map_path(spec, l, spec.ring_length)?;
    let gamma_omega = r.v * (1.0 - rho) / (rho.sqrt() * lt);
    let fsr_omega = 2.0 * PI * r.v / lt;
    Ok(FiguresOfMerit {
        gamma_mhz: crate::units::rad_per_ps_to_mhz(gamma_omega),
        gamma_omega,
        eta_esc: (1.0 - sigma_bar * sigma_bar) * xi * xi / (1.0 - rho * rho),
        finesse: PI * rho.sqrt() / (1.0 - rho),
        sigma_bar,
        xi,
        fsr_omega,
    })
}

/// The bins of one resonance window: k_i = k_J + (i − c)δ.
#[derive(Clone, Debug)]
pub struct Window {
    pub label: Label,
    pub k_center: f64,
    pub dk: f64,
    pub dks: Vec<f64>,
    pub v: f64,
}

impl Window {
    pub fn len(&self) -> usize {
        self.dks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dks.is_empty()
    }

    pub fn k(&self, i: usize) -> f64 {
        self.k_center + self.dks[i]
    }

    /// Frequency offset from the carrier of bin `i`, rad/ps.
    pub fn omega(&self, i: usize) -> f64 {
        self.v * self.dks[i]
    }

    pub fn center(&self) -> usize {
        self.dks.len() / 2
    }

    /// Recurrence time of the discrete grid, 2π/(vδ).
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / (self.v * self.dk)
    }
}

/// Uniform k-grid spanning ±n_r Γ around the resonance, with an odd number of bins.
pub fn build_k_grid(spec: &DeviceSpec, l: Label, n_r: f64, n_k: usize) -> Result<Window> {
    if n_k == 0 || n_k % 2 == 0 {
        return Err(Error::Config(format!("bin count {n_k} must be odd")));
    }
    if !(n_r > 0.0) {
        return Err(Error::Config("window width must be positive".into()));
    }
    let fom = figures_of_merit(spec, l)?;
    let half = n_r * fom.gamma_omega;
    if half > 0.5 * fom.fsr_omega {
        return Err(Error::Config(format!(
            "window ±{half:.3e} rad/ps exceeds half the free spectral range {:.3e}; windows would overlap",
            0.5 * fom.fsr_omega
        )));
    }
    let r = spec.res(l);
    let c = (n_k / 2) as f64;
    let dk = if n_k == 1 { half / r.v } else { half / r.v / c };
    let dks = (0..n_k).map(|i| (i as f64 - c) * dk).collect();
    Ok(Window { label: l, k_center: r.k_wg, dk, dks, v: r.v })
}

/// Physical description from which a calibrated [`DeviceSpec`] is built.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    /// Effective ring radius, µm.
    pub radius: f64,
    /// L_c / L_r.
    pub coupler_fraction: f64,
    /// Requested pump wavelength, µm; snapped to the nearest resonance.
    pub pump_wavelength: f64,
    pub effective_index: f64,
    /// Waveguide group velocity, µm/ps.
    pub group_velocity: f64,
    /// Ring group velocity, µm/ps; defaults to the waveguide value.
    pub ring_group_velocity: Option<f64>,
    /// Waveguide minus ring wavenumber, 1/µm.
    pub delta_beta: f64,
    /// Nonlinear parameter, 1/(W·m).
    pub gamma_nl: f64,
    pub finesse: f64,
    pub escape_efficiency: f64,
    pub ring_phantoms: usize,
    pub coupling_branch: u32,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            radius: 120.0,
            coupler_fraction: 0.25,
            pump_wavelength: 1.55,
            effective_index: 2.0,
            group_velocity: 150.0,
            ring_group_velocity: None,
            delta_beta: 0.0,
            gamma_nl: 1.0,
            finesse: 780.0,
            escape_efficiency: 0.75,
            ring_phantoms: 20,
            coupling_branch: 0,
        }
    }
}

impl DeviceParams {
    pub fn ring_length(&self) -> f64 {
        2.0 * PI * self.radius
    }

    pub fn pump_mode_number(&self) -> i64 {
        (self.effective_index * self.ring_length() / self.pump_wavelength).round() as i64
    }

    pub fn build(&self) -> Result<DeviceSpec> {
        if !(self.radius > 0.0) || !(self.effective_index > 0.0) || !(self.pump_wavelength > 0.0) {
            return Err(Error::Domain("radius, index and wavelength must be positive".into()));
        }
        if !(self.coupler_fraction > 0.0 && self.coupler_fraction <= 1.0) {
            return Err(Error::Domain("coupler fraction must lie in (0,1]".into()));
        }
        let lr = self.ring_length();
        let lc = self.coupler_fraction * lr;
        let v = self.group_velocity;
        let u = self.ring_group_velocity.unwrap_or(v);
        let mu = 0.5 * self.delta_beta;
        let cal = calibrate_coupling(
            self.finesse,
            self.escape_efficiency,
            self.ring_phantoms,
            self.coupling_branch,
            lc,
            mu,
        )?;
        let mp = self.pump_mode_number();
        let resonances = Label::ALL
            .iter()
            .map(|&label| {
                let m = match label {
                    Label::S => mp + 1,
                    Label::P => mp,
                    Label::I => mp - 1,
                };
                let k_ring = 2.0 * PI * m as f64 / lr;
                ResonanceSpec {
                    label,
                    mode_number: m,
                    omega: k_ring * C_LIGHT / self.effective_index,
                    k_wg: k_ring + self.delta_beta,
                    k_ring,
                    v,
                    u,
                    alpha0: cal.alpha0,
                }
            })
            .collect();
        let n = self.ring_phantoms;
        let ring_positions: Vec<f64> = (0..n).map(|j| j as f64 * lr / n as f64).collect();
        let wg_count = ring_positions.iter().filter(|&&z| z < lc - 1e-9 * lr).count();
        let layout = PhantomLayout {
            ring_positions,
            wg_count,
            sigma_ring: vec![vec![cal.sigma_ph; n]; 3],
            sigma_wg: vec![vec![cal.sigma_ph; wg_count]; 3],
        };
        let spec = DeviceSpec {
            ring_length: lr,
            coupler_length: lc,
            resonances,
            layout,
            gamma_nl: gamma_from_per_watt_metre(self.gamma_nl),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn energy_conservation_is_exact_on_the_default_grid() {
        let spec = DeviceParams::default().build().unwrap();
        let (s, p, i) = (spec.res(Label::S), spec.res(Label::P), spec.res(Label::I));
        assert_relative_eq!(s.omega + i.omega, 2.0 * p.omega, max_relative = 1e-15);
        assert_eq!(p.mode_number, 973);
        assert!((2.0 * p.k_ring - s.k_ring - i.k_ring).abs() < 1e-12);
    }

    #[test]
    fn wg_phantoms_are_those_inside_the_coupler() {
        let mut p = DeviceParams::default();
        assert_eq!(p.build().unwrap().layout.wg_count, 5);
        p.ring_phantoms = 10;
        assert_eq!(p.build().unwrap().layout.wg_count, 3);
    }

    #[test]
    fn path_map_is_continuous_at_the_coupler_end() {
        let mut p = DeviceParams::default();
        p.ring_group_velocity = Some(120.0);
        let spec = p.build().unwrap();
        let lc = spec.coupler_length;
        let (a, _) = map_path(&spec, Label::P, lc).unwrap();
        let (b, _) = map_path(&spec, Label::P, lc + 1e-9).unwrap();
        assert!((a - b).abs() < 1e-8);
        assert!(map_path(&spec, Label::P, -1.0).is_err());
    }

    #[test]
    fn branch_one_winds_the_coupler_once_more() {
        let c0 = calibrate_coupling(780.0, 0.75, 20, 0, 100.0, 0.0).unwrap();
        let c1 = calibrate_coupling(780.0, 0.75, 20, 1, 100.0, 0.0).unwrap();
        assert_relative_eq!((c1.alpha0 - c0.alpha0) * 100.0, 2.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(matches!(calibrate_coupling(-1.0, 0.5, 20, 0, 1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(calibrate_coupling(10.0, 1.5, 20, 0, 1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(calibrate_coupling(10.0, 0.5, 0, 0, 1.0, 0.0), Err(Error::Unphysical(_))));
        assert!(matches!(
            calibrate_coupling(10.0, 0.5, 20, 0, 1.0, 50.0),
            Err(Error::InfeasibleTarget(_))
        ));
    }
}
