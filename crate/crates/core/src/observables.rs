//! Moments, photon numbers, correlations, CW rates and squeezing spectra
//! from the Bogoliubov blocks.
//!
//! Bin operators are normalized, b = √δ a, so every moment here is a plain
//! expectation value; densities in k are obtained by dividing by δ.

use crate::device::Window;
use crate::linalg::{adjoint, eye, hermitian_eigenvalues, max_abs, singular_values, Mat};
use crate::squeeze::Bogoliubov;
use crate::{Error, Result, C64};
use ndarray::Array2;
use std::f64::consts::PI;

/// Waveguide-output moments, N_ij = ⟨b†_i b_j⟩ and M_ij = ⟨b_i b_j⟩.
#[derive(Clone, Debug)]
pub struct Moments {
    pub n_ss: Mat,
    pub n_ii: Mat,
    pub m_si: Mat,
    pub m_is: Mat,
}

/// N = W* Wᵀ and M = V Wᵀ restricted to the rows of `sel`.
fn pick(a: &Mat, rows: &[usize], cols: &[usize]) -> Mat {
    Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| a[[rows[i], cols[j]]])
}

fn channel_rows(bog: &Bogoliubov, c: usize) -> Vec<usize> {
    (0..bog.nk).map(|i| i * bog.nc + c).collect()
}

/// Channel-`c` moments; channel 0 is the real waveguide output.
pub fn channel_moments(bog: &Bogoliubov, c: usize) -> Moments {
    let r = channel_rows(bog, c);
    let w_si = pick(&bog.w_si, &r, &(0..bog.w_si.ncols()).collect::<Vec<_>>());
    let w_is = pick(&bog.w_is, &r, &(0..bog.w_is.ncols()).collect::<Vec<_>>());
    let v_ss = pick(&bog.v_ss, &r, &(0..bog.v_ss.ncols()).collect::<Vec<_>>());
    let v_ii = pick(&bog.v_ii, &r, &(0..bog.v_ii.ncols()).collect::<Vec<_>>());
    Moments {
        n_ss: w_si.mapv(|z| z.conj()).dot(&w_si.t()),
        n_ii: w_is.mapv(|z| z.conj()).dot(&w_is.t()),
        m_si: v_ss.dot(&w_is.t()),
        m_is: v_ii.dot(&w_si.t()),
    }
}

pub fn output_moments(bog: &Bogoliubov) -> Moments {
    channel_moments(bog, 0)
}

/// Moments over every mode, ordered (S modes, I modes).
pub fn full_moments(bog: &Bogoliubov) -> (Mat, Mat) {
    let (v, w) = bog.full();
    (w.mapv(|z| z.conj()).dot(&w.t()), v.dot(&w.t()))
}

/// max |M M† − N*(N* + I)| over all modes; zero for a pure Gaussian state.
pub fn purity_defect(n: &Mat, m: &Mat) -> f64 {
    let nc = n.mapv(|z| z.conj());
    let lhs = m.dot(&adjoint(&m.view()));
    let rhs = nc.dot(&(&nc + &eye(n.nrows())));
    max_abs(&(lhs - rhs).view())
}

/// Structural defects of output moments: Hermiticity of N, M_SI = M_ISᵀ,
/// and the smallest eigenvalue of N.
pub fn moment_defects(m: &Moments) -> (f64, f64, f64) {
    let herm = max_abs(&(&m.n_ss - &adjoint(&m.n_ss.view())).view())
        .max(max_abs(&(&m.n_ii - &adjoint(&m.n_ii.view())).view()));
    let tr = max_abs(&(&m.m_si - &m.m_is.t()).view());
    let ev = hermitian_eigenvalues(&m.n_ss.view())[0].min(hermitian_eigenvalues(&m.n_ii.view())[0]);
    (herm, tr, ev)
}

fn trace(a: &Mat) -> f64 {
    (0..a.nrows()).map(|i| a[[i, i]].re).sum()
}

#[derive(Clone, Debug)]
pub struct PhotonNumbers {
    /// Signal and idler photons over all channels.
    pub total: [f64; 2],
    /// Signal and idler photons in the waveguide output.
    pub output: [f64; 2],
    /// `[channel]` photons of each phantom channel; entry 0 is unused.
    pub per_channel: Vec<[f64; 2]>,
}

impl PhotonNumbers {
    pub fn lost(&self) -> [f64; 2] {
        [self.total[0] - self.output[0], self.total[1] - self.output[1]]
    }

    /// |n_tot − n_out − Σ n_phantom| relative to n_tot.
    pub fn budget_defect(&self) -> f64 {
        let ph: f64 = self.per_channel.iter().skip(1).map(|x| x[0]).sum();
        (self.total[0] - self.output[0] - ph).abs() / self.total[0].max(f64::MIN_POSITIVE)
    }
}

pub fn photon_numbers(bog: &Bogoliubov) -> PhotonNumbers {
    let row_norms = |w: &Mat| -> Vec<f64> { w.rows().into_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect() };
    let ns = row_norms(&bog.w_si);
    let ni = row_norms(&bog.w_is);
    let mut per_channel = vec![[0.0; 2]; bog.nc];
    for i in 0..bog.nk {
        for c in 0..bog.nc {
            per_channel[c][0] += ns[i * bog.nc + c];
            per_channel[c][1] += ni[i * bog.nc + c];
        }
    }
    PhotonNumbers {
        total: [ns.iter().sum(), ni.iter().sum()],
        output: per_channel[0],
        per_channel,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Correlations {
    pub g2_s: f64,
    pub g2_i: f64,
    pub g11_si: f64,
}

pub fn correlations(m: &Moments) -> Result<Correlations> {
    let (ts, ti) = (trace(&m.n_ss), trace(&m.n_ii));
    if !(ts > 0.0 && ti > 0.0) {
        return Err(Error::Undefined("correlations need a nonzero photon number".into()));
    }
    let tr2 = |n: &Mat| trace(&n.dot(n));
    let mm = trace(&m.m_si.dot(&adjoint(&m.m_si.view())));
    Ok(Correlations {
        g2_s: (tr2(&m.n_ss) + ts * ts) / (ts * ts),
        g2_i: (tr2(&m.n_ii) + ti * ti) / (ti * ti),
        g11_si: (mm + ts * ti) / (ts * ti),
    })
}

/// Eigenvalues of N̄_SS (descending) and singular values of M̄_SI. Their
/// vectors need not coincide once the loss channels are traced out, so no
/// common Schmidt basis is implied.
pub fn spectral_decomposition(m: &Moments) -> (Vec<f64>, Vec<f64>) {
    let mut ev = hermitian_eigenvalues(&m.n_ss.view());
    ev.reverse();
    (ev, singular_values(&m.m_si.view()))
}

#[derive(Clone, Debug)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub phi_star: f64,
}

impl SpectrumPoint {
    pub fn v_min_db(&self) -> f64 {
        10.0 * self.v_min.log10()
    }

    pub fn v_max_db(&self) -> f64 {
        10.0 * self.v_max.log10()
    }
}

/// Relative quadrature variance of the two-colour homodyne signal at
/// sideband ω, from the per-mode terms n(ω) = Ñ(ω,ω) + Ñ(−ω,−ω) and
/// m(ω) = M̃(ω,−ω).
pub fn variance_extrema(n: f64, m: C64) -> (f64, f64, f64) {
    let phi = (m.arg() + PI + PI).rem_euclid(2.0 * PI) - PI;
    (1.0 + n - 2.0 * m.norm(), 1.0 + n + 2.0 * m.norm(), phi)
}

/// V(ω; φ) = 1 + n + 2 Re{m e^{−iφ}}.
pub fn variance(n: f64, m: C64, phi: f64) -> f64 {
    1.0 + n + 2.0 * (m * C64::from_polar(1.0, -phi)).re
}

/// (n(ω_i), m(ω_i)) on the bins of the signal window, pairing signal bin i
/// with the mirrored idler bin. The windows must have matching detunings.
pub fn spectrum_terms(m: &Moments, win_s: &Window, win_i: &Window) -> Result<Vec<(f64, f64, C64)>> {
    let nk = win_s.len();
    if win_i.len() != nk {
        return Err(Error::Dimension("signal and idler windows differ in size".into()));
    }
    let mirror = |i: usize| nk - 1 - i;
    Ok((0..nk)
        .map(|i| {
            let j = mirror(i);
            let nt = 0.5 * (m.n_ss[[i, i]].re + m.n_ii[[i, i]].re) + 0.5 * (m.n_ss[[j, j]].re + m.n_ii[[j, j]].re);
            let mt = 0.5 * (m.m_si[[i, j]] + m.m_is[[i, j]]);
            (win_s.omega(i), nt, mt)
        })
        .collect())
}

/// Squeezing spectrum at arbitrary sidebands, linearly interpolating n and
/// m between bins.
pub fn squeezing_spectrum(m: &Moments, win_s: &Window, win_i: &Window, omegas: &[f64]) -> Result<Vec<SpectrumPoint>> {
    let terms = spectrum_terms(m, win_s, win_i)?;
    let (lo, hi) = (terms[0].0, terms[terms.len() - 1].0);
    omegas
        .iter()
        .map(|&w| {
            if !(w >= lo - 1e-12 * hi.abs() && w <= hi + 1e-12 * hi.abs()) {
                return Err(Error::Domain(format!("sideband {w} outside the sampled window [{lo}, {hi}]")));
            }
            let x = ((w - lo) / (hi - lo) * (terms.len() - 1) as f64).clamp(0.0, (terms.len() - 1) as f64);
            let j = (x.floor() as usize).min(terms.len() - 2);
            let f = x - j as f64;
            let n = terms[j].1 * (1.0 - f) + terms[j + 1].1 * f;
            let mm = terms[j].2 * (1.0 - f) + terms[j + 1].2 * f;
            let (v_min, v_max, phi_star) = variance_extrema(n, mm);
            Ok(SpectrumPoint { omega: w, v_min, v_max, phi_star })
        })
        .collect()
}

/// Uniform sideband grid of `n` points over ±`half`.
pub fn omega_grid(half: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct CwRates {
    /// Photons per second.
    pub total: f64,
    pub output: f64,
    pub lost: f64,
    /// Relative change of the total rate between the two halves of the samples.
    pub drift: f64,
}

fn slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let num: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let den: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    num / den
}

/// Steady generation rates from samples (t ps, n_tot, n_out), by least-squares
/// slopes. Fails when the two halves of the samples disagree by more than `tol`.
pub fn cw_pair_rates(samples: &[(f64, f64, f64)], tol: f64) -> Result<CwRates> {
    if samples.len() < 4 {
        return Err(Error::NotConverged("need at least four samples for a rate".into()));
    }
    let t: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let nt: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let no: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let h = samples.len() / 2;
    let (a, b) = (slope(&t[..h], &nt[..h]), slope(&t[h..], &nt[h..]));
    let total = slope(&t, &nt);
    let drift = (a - b).abs() / total.abs().max(f64::MIN_POSITIVE);
    if drift > tol {
        return Err(Error::NotConverged(format!("generation rate drifts by {drift:.2e} across the samples")));
    }
    let output = slope(&t, &no);
    Ok(CwRates { total: total * 1e12, output: output * 1e12, lost: (total - output) * 1e12, drift })
}
