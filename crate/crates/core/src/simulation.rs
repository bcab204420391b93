//! End-to-end runs: device windows and bases, pump trajectory, and the
//! signal/idler transfer matrix in the asymptotic-out basis.

use crate::basis::{build_window, BinBasis};
use crate::device::{build_k_grid, DeviceSpec, Label, Window};
use crate::exec::Exec;
use crate::linalg::norm1;
use crate::nonlinear::{CouplingModel, CouplingOptions};
use crate::pump::{decayed, Drive, PumpModel, PumpTrajectory};
use crate::squeeze::{Bogoliubov, NlPath, PairSystem, Transfer};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug)]
pub struct Numerics {
    /// Window half-width in linewidths.
    pub n_r: f64,
    pub n_k: usize,
    pub nodes: usize,
    pub spm_xpm: bool,
    /// Fixed squeeze step; chosen from the pump when `None`.
    pub dt: Option<f64>,
    pub nl_path: NlPath,
    /// Pulsed runs stop once the ring pump photon number falls below this
    /// fraction of its peak.
    pub decay: f64,
    pub exec: Exec,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            n_r: 10.0,
            n_k: 41,
            nodes: 16,
            spm_xpm: true,
            dt: None,
            nl_path: NlPath::Auto,
            decay: 1e-4,
            exec: Exec::Parallel,
        }
    }
}

/// Windows, bases and couplings of one device.
pub struct Problem {
    pub spec: DeviceSpec,
    /// Ordered S, P, I.
    pub windows: Vec<Window>,
    pub bases: Vec<Vec<BinBasis>>,
    pub coupling: CouplingModel,
    pub numerics: Numerics,
}

impl Problem {
    pub fn new(spec: DeviceSpec, numerics: Numerics) -> Result<Problem> {
        let windows = Label::ALL
            .iter()
            .map(|&l| build_k_grid(&spec, l, numerics.n_r, numerics.n_k))
            .collect::<Result<Vec<_>>>()?;
        let bases = windows
            .iter()
            .map(|w| build_window(&spec, w, numerics.exec))
            .collect::<Result<Vec<_>>>()?;
        let coupling = CouplingModel::new(&spec, CouplingOptions { nodes: numerics.nodes, spm_xpm: numerics.spm_xpm })?;
        Ok(Problem { spec, windows, bases, coupling, numerics })
    }

    pub fn window(&self, l: Label) -> &Window {
        &self.windows[l.idx()]
    }

    pub fn pump(&self) -> PumpModel<'_> {
        PumpModel {
            spec: &self.spec,
            window: self.window(Label::P),
            bases: &self.bases[Label::P.idx()],
            coupling: &self.coupling,
        }
    }

    pub fn pairs(&self) -> PairSystem<'_> {
        PairSystem {
            win_s: self.window(Label::S),
            win_i: self.window(Label::I),
            bases_s: &self.bases[Label::S.idx()],
            bases_i: &self.bases[Label::I.idx()],
            coupling: &self.coupling,
        }
    }

    /// Largest bin detuning over the three windows, rad/ps.
    pub fn max_detuning(&self) -> f64 {
        self.windows.iter().map(|w| w.omega(w.len() - 1).abs()).fold(0.0, f64::max)
    }

    /// max ‖K G(P)‖₁ over a pump trajectory.
    pub fn max_generator_norm(&self, traj: &PumpTrajectory) -> f64 {
        let pairs = self.pairs();
        let k = pairs.k_sum();
        traj.totals.iter().map(|p| norm1(&k.dot(&pairs.generator(p)).view())).fold(0.0, f64::max)
    }
}

/// Diagnostics shared by pulsed and CW runs.
#[derive(Clone, Debug)]
pub struct RunInfo {
    pub dt: f64,
    pub steps: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub generator_norm: f64,
    /// Fraction of the drive's photons that fall inside the pump window.
    pub captured_fraction: f64,
    pub peak_ring_photons: f64,
    /// Relative drift of Σ|β^in|² over the pump trajectory.
    pub pump_drift: f64,
    /// max |V V† − W W† − I|, max |V Wᵀ − W Vᵀ...| of the final transfer.
    pub symplectic_defect: (f64, f64),
}

pub struct PulsedRun {
    pub bog: Bogoliubov,
    pub info: RunInfo,
}

fn step_size(problem: &Problem, norm: f64, extra: Option<f64>) -> f64 {
    let mut dt = 0.1 / problem.max_detuning();
    if norm > 0.0 {
        dt = dt.min(1.0 / (20.0 * norm));
    }
    if let Some(x) = extra {
        dt = dt.min(x);
    }
    dt
}

fn total_in_photons(problem: &Problem, beta: &ndarray::Array2<C64>) -> f64 {
    problem.pump().to_in_basis(beta).iter().map(|z| z.norm_sqr()).sum()
}

fn analytic_photons(drive: &Drive, problem: &Problem) -> f64 {
    let r = problem.spec.res(Label::P);
    match *drive {
        Drive::Gaussian { energy, .. } => energy / (crate::units::HBAR * r.omega),
        Drive::Cw { .. } => 1.0,
    }
}

/// Propagates the pump with step `h` until `stop`, returning the trajectory
/// and the relative drift of the in-basis photon number.
fn pump_trajectory(
    problem: &Problem,
    drive: &Drive,
    h: f64,
    max_steps: usize,
    stop: impl FnMut(usize, &PumpTrajectory) -> bool,
) -> Result<(PumpTrajectory, f64)> {
    let pump = problem.pump();
    let mut f = pump.init(drive)?;
    let n0 = total_in_photons(problem, &f.beta);
    let traj = pump.propagate(&mut f, h, max_steps, stop);
    let n1 = total_in_photons(problem, &f.beta);
    Ok((traj, if n0 > 0.0 { (n1 - n0).abs() / n0 } else { 0.0 }))
}

/// Full non-perturbative run for a pulsed drive.
pub fn run_pulsed(problem: &Problem, drive: &Drive) -> Result<PulsedRun> {
    let Drive::Gaussian { tau, lead, .. } = *drive else {
        return Err(Error::Config("pulsed run needs a Gaussian drive".into()));
    };
    let num = &problem.numerics;
    let horizon = problem.window(Label::P).recurrence_time();
    let h0 = step_size(problem, 0.0, Some(tau / 20.0)) / 2.0;
    let max_steps = (horizon / h0).ceil() as usize;
    let (probe, _) = pump_trajectory(problem, drive, h0, max_steps, decayed(num.decay))?;
    let norm = problem.max_generator_norm(&probe);
    let dt = num.dt.unwrap_or_else(|| step_size(problem, norm, Some(tau / 20.0)));
    let t_needed = probe.t_end().max(2.0 * lead);
    let steps = (t_needed / dt).ceil() as usize;
    if steps as f64 * dt > horizon {
        return Err(Error::NotConverged(format!(
            "pulse needs {:.1} ps but the bin grid recurs after {horizon:.1} ps; raise n_k",
            steps as f64 * dt
        )));
    }
    let (traj, drift) = pump_trajectory(problem, drive, dt / 2.0, 2 * steps, |_, _| false)?;
    let pairs = problem.pairs();
    let nc = pairs.nc();
    let mut u = Transfer::identity(nc, pairs.nk(), 0.0);
    pairs.propagate(&mut u, dt, steps, num.nl_path, num.exec, |t| traj.at(t), |_, _| {})?;
    let out = pairs.to_out(&u, num.exec);
    let bog = Bogoliubov::from_transfer(&out);
    let symplectic_defect = bog.symplectic_defect();
    let captured = problem.pump().captured_photons(drive)? / analytic_photons(drive, problem);
    Ok(PulsedRun {
        bog,
        info: RunInfo {
            dt,
            steps,
            t_start: 0.0,
            t_end: u.t,
            generator_norm: norm,
            captured_fraction: captured,
            peak_ring_photons: traj.ring_photons.iter().copied().fold(0.0, f64::max),
            pump_drift: drift,
            symplectic_defect,
        },
    })
}

/// Photon numbers sampled during a CW run.
#[derive(Clone, Debug)]
pub struct CwCheckpoint {
    pub t: f64,
    pub n_tot_s: f64,
    pub n_out_s: f64,
}

pub struct CwRun {
    pub bog: Bogoliubov,
    pub checkpoints: Vec<CwCheckpoint>,
    pub info: RunInfo,
}

/// CW run over `duration` ps, sampling photon numbers `n_checkpoints` times
/// evenly over the second half.
pub fn run_cw(problem: &Problem, drive: &Drive, duration: f64, n_checkpoints: usize) -> Result<CwRun> {
    if !matches!(drive, Drive::Cw { .. }) {
        return Err(Error::Config("CW run needs a CW drive".into()));
    }
    let num = &problem.numerics;
    let horizon = problem.window(Label::P).recurrence_time();
    if duration > horizon {
        return Err(Error::Config(format!(
            "CW duration {duration:.1} ps exceeds the grid recurrence time {horizon:.1} ps"
        )));
    }
    let h0 = step_size(problem, 0.0, None) / 2.0;
    let (probe, _) = pump_trajectory(problem, drive, h0, 4, |_, _| false)?;
    let norm = problem.max_generator_norm(&probe);
    let dt = num.dt.unwrap_or_else(|| step_size(problem, norm, None));
    let steps = (duration / dt).ceil().max(1.0) as usize;
    let dt = duration / steps as f64;
    let (traj, drift) = pump_trajectory(problem, drive, dt / 2.0, 2 * steps, |_, _| false)?;
    let pairs = problem.pairs();
    let nc = pairs.nc();
    let mut u = Transfer::identity(nc, pairs.nk(), 0.0);
    let marks: Vec<usize> = (1..=n_checkpoints.max(1))
        .map(|j| steps / 2 + (j * (steps - steps / 2)) / n_checkpoints.max(1))
        .collect();
    let mut checkpoints = Vec::new();
    let mut err = None;
    pairs.propagate(&mut u, dt, steps, num.nl_path, num.exec, |t| traj.at(t), |j, cur| {
        if err.is_none() && marks.contains(&(j + 1)) {
            let out = pairs.to_out(cur, num.exec);
            let b = Bogoliubov::from_transfer(&out);
            let n = crate::observables::photon_numbers(&b);
            checkpoints.push(CwCheckpoint { t: cur.t, n_tot_s: n.total[0], n_out_s: n.output[0] });
        }
        if err.is_none() && !cur.blocks[0].iter().all(|z| z.is_finite()) {
            err = Some(Error::StepSize(format!("transfer matrix diverged at t = {}", cur.t)));
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let out = pairs.to_out(&u, num.exec);
    let bog = Bogoliubov::from_transfer(&out);
    let symplectic_defect = bog.symplectic_defect();
    Ok(CwRun {
        bog,
        checkpoints,
        info: RunInfo {
            dt,
            steps,
            t_start: 0.0,
            t_end: u.t,
            generator_norm: norm,
            captured_fraction: 1.0,
            peak_ring_photons: traj.ring_photons.iter().copied().fold(0.0, f64::max),
            pump_drift: drift,
            symplectic_defect,
        },
    })
}
