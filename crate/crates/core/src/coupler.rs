//! Directional coupler between waveguide and ring over `[0, L_c]`.
//!
//! Envelopes are taken relative to the waveguide carrier `k_J` (field ψ) and
//! the ring carrier `k'_J` (field φ). Inside the coupler
//!
//! ```text
//! ψ' = iΔk ψ − i(ω_c/v) φ e^{−iΔβz}
//! φ' = i(v/u)Δk φ − i(ω_c/u) ψ e^{iΔβz}
//! ```
//!
//! which after removing e^{±iΔβz/2} is a constant 2×2 system solved exactly.

use crate::device::{map_path, DeviceSpec, Label};
use crate::linalg::Mat2;
use crate::{Error, Result, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug)]
pub struct CouplerEnvelope {
    /// σ(z;k), including the e^{−iΔβz/2} factor.
    pub sigma: C64,
    /// κ(z;k), including the e^{−iΔβz/2} factor.
    pub kappa: C64,
    pub alpha: f64,
    /// |μ₋|/α, in [0, 1].
    pub gamma: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
}

fn rates(spec: &DeviceSpec, l: Label, k: f64) -> (f64, f64, f64) {
    let r = spec.res(l);
    let dk = k - r.k_wg;
    let q = r.v / r.u;
    let mu_plus = 0.5 * (1.0 + q) * dk;
    let mu_minus = 0.5 * (1.0 - q) * dk + 0.5 * r.delta_beta();
    let alpha = (mu_minus * mu_minus + r.alpha0 * r.alpha0).sqrt();
    (mu_plus, mu_minus, alpha)
}

/// Self- and cross-coupling envelopes accumulated over `[0, z]`.
pub fn coupler_envelopes(spec: &DeviceSpec, l: Label, z: f64, k: f64) -> Result<CouplerEnvelope> {
    if !(0.0..=spec.coupler_length * (1.0 + 1e-12)).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside the coupler")));
    }
    let r = spec.res(l);
    let (mu_plus, mu_minus, alpha) = rates(spec, l, k);
    let (s, c) = (alpha * z).sin_cos();
    let (ratio, a0r) = if alpha > 0.0 { (mu_minus / alpha, r.alpha0 / alpha) } else { (0.0, 0.0) };
    let ph = C64::from_polar(1.0, -0.5 * r.delta_beta() * z);
    Ok(CouplerEnvelope {
        sigma: C64::new(c, ratio * s) * ph,
        kappa: C64::new(a0r * s, 0.0) * ph,
        alpha,
        gamma: ratio.abs(),
        mu_plus,
        mu_minus,
    })
}

/// Transfer matrix taking (ψ, φ) at `za` to (ψ, φ) at `zb`, both inside the coupler.
pub fn coupler_transfer(spec: &DeviceSpec, l: Label, za: f64, zb: f64, k: f64) -> Result<Mat2> {
    let lc = spec.coupler_length * (1.0 + 1e-12);
    if !(0.0..=lc).contains(&za) || !(0.0..=lc).contains(&zb) {
        return Err(Error::Domain(format!("[{za}, {zb}] outside the coupler")));
    }
    let r = spec.res(l);
    let (mu_plus, mu_minus, alpha) = rates(spec, l, k);
    let dz = zb - za;
    let (s, c) = (alpha * dz).sin_cos();
    let sa = if alpha > 0.0 { s / alpha } else { dz };
    let q = (r.u / r.v).sqrt();
    let e = C64::from_polar(1.0, mu_plus * dz);
    let m = [
        [C64::new(c, mu_minus * sa) * e, -I * (r.alpha0 * q * sa) * e],
        [-I * (r.alpha0 / q * sa) * e, C64::new(c, -mu_minus * sa) * e],
    ];
    let db = r.delta_beta();
    let d = |z: f64| [C64::from_polar(1.0, 0.5 * db * z), C64::from_polar(1.0, -0.5 * db * z)];
    let (da, dbz) = (d(za), d(zb));
    let mut t = m;
    for i in 0..2 {
        for j in 0..2 {
            t[i][j] = m[i][j] * da[j] / dbz[i];
        }
    }
    Ok(t)
}

/// Phase picked up by the ring envelope between `za` and `zb` outside the coupler.
pub fn ring_phase(spec: &DeviceSpec, l: Label, za: f64, zb: f64, k: f64) -> C64 {
    let r = spec.res(l);
    C64::from_polar(1.0, r.v / r.u * (k - r.k_wg) * (zb - za))
}

#[derive(Clone, Copy, Debug)]
pub struct RingResponse {
    /// Ring envelope at z = 0⁺ per unit waveguide input.
    pub r: C64,
    /// Outgoing waveguide amplitude per unit input, referenced so that the
    /// free field beyond the coupler is y e^{iΔk z}.
    pub t: C64,
    pub sigma_bar: C64,
    pub kappa_bar: C64,
}

/// Evaluates 1 − σ̄* e^{ix} without cancellation when σ̄ is close to the unit circle.
pub fn resonant_denominator(sigma_bar: C64, kappa_bar: C64, x: f64) -> C64 {
    let a = sigma_bar.norm();
    let one_minus_a = kappa_bar.norm_sqr() / (1.0 + a);
    let mut th = x - sigma_bar.arg();
    th -= (th / std::f64::consts::TAU).round() * std::f64::consts::TAU;
    let e_minus_one = 2.0 * I * (0.5 * th).sin() * C64::from_polar(1.0, 0.5 * th);
    C64::new(one_minus_a, 0.0) - a * e_minus_one
}

/// Closed-form response of the lossless ring.
pub fn ring_response(spec: &DeviceSpec, l: Label, k: f64) -> Result<RingResponse> {
    let r = spec.res(l);
    let env = coupler_envelopes(spec, l, spec.coupler_length, k)?;
    let (lc_path, lt) = map_path(spec, l, spec.coupler_length)?;
    let dk = k - r.k_wg;
    let x = dk * lt;
    let den = resonant_denominator(env.sigma, env.kappa, x);
    if den.norm() < 1e-14 {
        return Err(Error::Singular("ring response at a pole".into()));
    }
    let q = (r.v / r.u).sqrt();
    let rr = -I * q * env.kappa.conj() / den * C64::from_polar(1.0, x);
    let t = (env.sigma - C64::from_polar(1.0, x)) / den * C64::from_polar(1.0, dk * (lc_path - spec.coupler_length));
    Ok(RingResponse { r: rr, t, sigma_bar: env.sigma, kappa_bar: env.kappa })
}

/// Intensity enhancement |F(Δk)|² of a ring with round-trip phantom transmission ξ.
pub fn lossy_enhancement(spec: &DeviceSpec, l: Label, k: f64) -> Result<f64> {
    let r = spec.res(l);
    let env = coupler_envelopes(spec, l, spec.coupler_length, k)?;
    let (_, lt) = map_path(spec, l, spec.ring_length)?;
    let sb = env.sigma.norm();
    let xi = spec.xi(l);
    let x = (k - r.k_wg) * lt - env.sigma.arg();
    let den = (1.0 - sb * xi).powi(2) + 4.0 * sb * xi * (0.5 * x).sin().powi(2);
    Ok(env.kappa.norm_sqr() / den)
}
