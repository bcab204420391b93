//! Classical pump: initial pulse or CW drive, and SPM propagation in the
//! local basis.

use crate::basis::BinBasis;
use crate::device::{DeviceSpec, Label, Window};
use crate::nonlinear::CouplingModel;
use crate::units::HBAR;
use crate::{Error, Result, C64};
use ndarray::Array2;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Drive {
    /// Gaussian pulse of energy `energy` (pJ) and intensity standard
    /// deviation `tau` (ps), centred `lead` ps before reaching the ring.
    Gaussian { energy: f64, tau: f64, k0_offset: f64, lead: f64 },
    /// Monochromatic drive of power `power` (pJ/ps) in the bin nearest `k0_offset`.
    Cw { power: f64, k0_offset: f64 },
}

/// Pump amplitudes β_{n,i} = √δ α^loc_n(k_i) on the pump window.
#[derive(Clone, Debug)]
pub struct PumpField {
    pub t: f64,
    /// `[channel][bin]`.
    pub beta: Array2<C64>,
}

/// Pump window, its local bases and the SPM couplings.
pub struct PumpModel<'a> {
    pub spec: &'a DeviceSpec,
    pub window: &'a Window,
    pub bases: &'a [BinBasis],
    pub coupling: &'a CouplingModel,
}

/// Sampled segment totals P_n(t) = √δ Σ_i β_{n,i}(t) on a uniform time grid.
#[derive(Clone, Debug)]
pub struct PumpTrajectory {
    pub t0: f64,
    pub h: f64,
    pub totals: Vec<Vec<C64>>,
    pub ring_photons: Vec<f64>,
}

impl PumpTrajectory {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.h * (self.totals.len() - 1) as f64
    }

    /// Totals at time `t`, linearly interpolated between samples.
    pub fn at(&self, t: f64) -> Result<Vec<C64>> {
        let x = (t - self.t0) / self.h;
        let n = self.totals.len();
        if !(x >= -1e-9 && x <= (n - 1) as f64 + 1e-9) {
            return Err(Error::Domain(format!("pump requested at t = {t} outside [{}, {}]", self.t0, self.t_end())));
        }
        let j = (x.floor().max(0.0) as usize).min(n.saturating_sub(2));
        let f = (x - j as f64).clamp(0.0, 1.0);
        if n == 1 {
            return Ok(self.totals[0].clone());
        }
        Ok(self.totals[j].iter().zip(&self.totals[j + 1]).map(|(a, b)| a * (1.0 - f) + b * f).collect())
    }
}

impl<'a> PumpModel<'a> {
    fn n_channels(&self) -> usize {
        self.spec.layout.n_channels()
    }

    /// Asymptotic-in waveguide amplitude β^in_{0,i} of the drive.
    pub fn input_amplitudes(&self, drive: &Drive) -> Result<Vec<C64>> {
        let w = self.window;
        let r = self.spec.res(Label::P);
        let delta = w.dk;
        let half = w.dks[w.len() - 1];
        match *drive {
            Drive::Gaussian { energy, tau, k0_offset, lead } => {
                if !(energy > 0.0 && tau > 0.0 && lead >= 0.0) {
                    return Err(Error::Config("pulse energy, duration and lead must be positive".into()));
                }
                if k0_offset.abs() > half {
                    return Err(Error::Config("pulse carrier lies outside the pump window".into()));
                }
                let mu_z = -lead * r.v;
                let amp = (2.0 / PI).powf(0.25) * (energy * tau * r.v / (HBAR * r.omega)).sqrt();
                Ok(w.dks
                    .iter()
                    .map(|&dk| {
                        let x = dk - k0_offset;
                        delta.sqrt() * amp * (-(r.v * tau * x).powi(2)).exp() * C64::from_polar(1.0, -x * mu_z)
                    })
                    .collect())
            }
            Drive::Cw { power, k0_offset } => {
                if !(power > 0.0) {
                    return Err(Error::Config("CW power must be positive".into()));
                }
                let j = w.dks
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - k0_offset).abs().partial_cmp(&(b.1 - k0_offset).abs()).unwrap())
                    .map(|x| x.0)
                    .unwrap();
                if (w.dks[j] - k0_offset).abs() > 1e-6 * delta {
                    return Err(Error::Config("CW carrier must sit on a pump bin".into()));
                }
                let mut b = vec![C64::default(); w.len()];
                b[j] = C64::new((2.0 * PI * power / (HBAR * r.omega * r.v * delta)).sqrt(), 0.0);
                Ok(b)
            }
        }
    }

    /// Photons carried by the drive inside the window, Σ|β^in|².
    pub fn captured_photons(&self, drive: &Drive) -> Result<f64> {
        Ok(self.input_amplitudes(drive)?.iter().map(|b| b.norm_sqr()).sum())
    }

    pub fn init(&self, drive: &Drive) -> Result<PumpField> {
        let b_in = self.input_amplitudes(drive)?;
        let n = self.n_channels();
        let mut beta = Array2::zeros((n, self.window.len()));
        for (i, bb) in self.bases.iter().enumerate() {
            let q = bb.transform.q_in();
            for c in 0..n {
                beta[[c, i]] = q[[c, 0]] * b_in[i];
            }
        }
        Ok(PumpField { t: 0.0, beta })
    }

    pub fn segment_totals(&self, beta: &Array2<C64>) -> Vec<C64> {
        let s = self.window.dk.sqrt();
        beta.rows().into_iter().map(|r| s * r.iter().sum::<C64>()).collect()
    }

    /// Amplitudes in the asymptotic-in basis, β^in = Lᵀ β^loc per bin.
    pub fn to_in_basis(&self, beta: &Array2<C64>) -> Array2<C64> {
        let n = self.n_channels();
        let mut out = Array2::zeros(beta.raw_dim());
        for (i, bb) in self.bases.iter().enumerate() {
            let l = &bb.transform.l_in;
            for m in 0..n {
                out[[m, i]] = (0..n).map(|c| l[[c, m]] * beta[[c, i]]).sum();
            }
        }
        out
    }

    fn nonlinear(&self, beta: &Array2<C64>) -> Array2<C64> {
        let p = self.segment_totals(beta);
        let s = self.coupling.spm_source(&p);
        let n = self.n_channels();
        let pref = I * self.window.dk.sqrt() / (4.0 * PI * PI);
        let mut out = Array2::zeros(beta.raw_dim());
        if s.iter().all(|x| *x == C64::default()) {
            return out;
        }
        for (i, bb) in self.bases.iter().enumerate() {
            let c = &bb.commutator;
            for m in 0..n {
                out[[m, i]] = pref * (0..n).map(|k| c[[m, k]] * s[k]).sum::<C64>();
            }
        }
        out
    }

    fn phase(&self, beta: &Array2<C64>, dt: f64) -> Array2<C64> {
        let mut out = beta.clone();
        for (i, mut col) in out.columns_mut().into_iter().enumerate() {
            let e = C64::from_polar(1.0, -self.window.omega(i) * dt);
            col.mapv_inplace(|z| z * e);
        }
        out
    }

    /// One Lawson–RK4 step: linear phases exact, SPM by RK4 in the rotating frame.
    pub fn step(&self, f: &mut PumpField, h: f64) {
        let y = &f.beta;
        let k1 = self.nonlinear(y);
        let e_y = self.phase(y, 0.5 * h);
        let k2 = self.nonlinear(&(&e_y + &self.phase(&k1, 0.5 * h) * C64::new(0.5 * h, 0.0)));
        let k3 = self.nonlinear(&(&e_y + &k2 * C64::new(0.5 * h, 0.0)));
        let e2_y = self.phase(y, h);
        let k4 = self.nonlinear(&(&e2_y + &self.phase(&k3, 0.5 * h) * C64::new(h, 0.0)));
        let incr = &self.phase(&k1, h) + &(&self.phase(&(&k2 + &k3), 0.5 * h) * C64::new(2.0, 0.0)) + &k4;
        f.beta = &e2_y + &(incr * C64::new(h / 6.0, 0.0));
        f.t += h;
    }

    /// Propagates from `f` with step `h`, sampling totals every step, until
    /// `stop` returns true or `max_steps` is reached.
    pub fn propagate(
        &self,
        f: &mut PumpField,
        h: f64,
        max_steps: usize,
        mut stop: impl FnMut(usize, &PumpTrajectory) -> bool,
    ) -> PumpTrajectory {
        let p0 = self.segment_totals(&f.beta);
        let mut traj = PumpTrajectory {
            t0: f.t,
            h,
            ring_photons: vec![self.coupling.ring_photons(&p0)],
            totals: vec![p0],
        };
        for j in 0..max_steps {
            if stop(j, &traj) {
                break;
            }
            self.step(f, h);
            let p = self.segment_totals(&f.beta);
            traj.ring_photons.push(self.coupling.ring_photons(&p));
            traj.totals.push(p);
        }
        traj
    }
}

/// Stop rule for pulses: past the peak and the ring photon number has
/// fallen below `frac` of it.
pub fn decayed(frac: f64) -> impl FnMut(usize, &PumpTrajectory) -> bool {
    move |_, tr| {
        let peak = tr.ring_photons.iter().copied().fold(0.0, f64::max);
        let last = *tr.ring_photons.last().unwrap();
        let (imax, _) = tr
            .ring_photons
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
        peak > 0.0 && imax + 1 < tr.ring_photons.len() && last < frac * peak
    }
}
