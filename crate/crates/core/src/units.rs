//! Internal units: micrometres, picoseconds, picojoules.
//! One watt is one pJ/ps.

/// Speed of light in vacuum, µm/ps.
pub const C_LIGHT: f64 = 299.792_458;

/// Reduced Planck constant, pJ·ps.
pub const HBAR: f64 = 1.054_571_817e-10;

/// Converts a nonlinear parameter in 1/(W·m) to 1/(pJ/ps·µm).
pub fn gamma_from_per_watt_metre(g: f64) -> f64 {
    g * 1e-6
}

/// Converts an angular frequency in rad/ps to a frequency in MHz.
pub fn rad_per_ps_to_mhz(w: f64) -> f64 {
    w / (2.0 * std::f64::consts::PI) * 1e6
}
