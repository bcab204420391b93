//! Independent reference models: first-order pair estimate, brute-force ODE
//! propagation at toy size, and a point-coupled single-mode (CM-IO) ring.

use crate::device::{figures_of_merit, Label, Window};
use crate::linalg::Mat;
use crate::nonlinear::strength;
use crate::observables::Moments;
use crate::pump::Drive;
use crate::simulation::Problem;
use crate::squeeze::{PairSystem, Transfer};
use crate::{Error, Result, C64};
use ndarray::{s, Array2};
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Outcome of one oracle comparison.
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub oracle: String,
    pub quantity: String,
    pub main: f64,
    pub reference: f64,
    pub deviation: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl OracleReport {
    /// Relative comparison; `tolerance = None` records the values only.
    pub fn relative(oracle: &str, quantity: &str, main: f64, reference: f64, tolerance: Option<f64>) -> Self {
        let deviation = (main - reference).abs() / reference.abs().max(f64::MIN_POSITIVE);
        Self::build(oracle, quantity, main, reference, deviation, tolerance)
    }

    pub fn absolute(oracle: &str, quantity: &str, main: f64, reference: f64, tolerance: Option<f64>) -> Self {
        Self::build(oracle, quantity, main, reference, (main - reference).abs(), tolerance)
    }

    fn build(oracle: &str, quantity: &str, main: f64, reference: f64, deviation: f64, tolerance: Option<f64>) -> Self {
        OracleReport {
            oracle: oracle.into(),
            quantity: quantity.into(),
            main,
            reference,
            deviation,
            pass: deviation.is_finite() && tolerance.map_or(true, |t| deviation <= t),
            tolerance,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Dormand–Prince 5(4) with standard step control, on complex state vectors.
pub fn dopri5<F>(mut f: F, t0: f64, t1: f64, y0: Vec<C64>, rtol: f64, atol: f64) -> Result<(Vec<C64>, OdeStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let n = y0.len();
    let mut y = y0;
    let mut t = t0;
    let span = t1 - t0;
    if span < 0.0 || !span.is_finite() {
        return Err(Error::Domain(format!("ODE oracle integrates forward only, got [{t0}, {t1}]")));
    }
    if span == 0.0 {
        return Ok((y, OdeStats { accepted: 0, rejected: 0 }));
    }
    let mut h = span / 100.0;
    let mut k: Vec<Vec<C64>> = vec![vec![C64::default(); n]; 7];
    let mut tmp = vec![C64::default(); n];
    let mut stats = OdeStats { accepted: 0, rejected: 0 };
    f(t, &y, &mut k[0]);
    while t < t1 {
        if stats.accepted + stats.rejected > 2_000_000 {
            return Err(Error::NotConverged("ODE oracle exceeded its step budget".into()));
        }
        h = h.min(t1 - t);
        for st in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..st {
                    if A[st][j] != 0.0 {
                        acc += k[j][i] * (h * A[st][j]);
                    }
                }
                tmp[i] = acc;
            }
            f(t + C[st] * h, &tmp, &mut k[st]);
        }
        // tmp holds the 5th-order solution (FSAL stage 7 input).
        let mut err = 0.0;
        for i in 0..n {
            let mut e = C64::default();
            for j in 0..7 {
                e += k[j][i] * (h * E[j]);
            }
            let sc = atol + rtol * y[i].norm().max(tmp[i].norm());
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&tmp);
            k.swap(0, 6);
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < 1e-14 * span {
            return Err(Error::NotConverged("ODE oracle step size underflow".into()));
        }
    }
    Ok((y, stats))
}

/// Largest transfer dimension the direct oracle accepts.
pub const DIRECT_ODE_MAX_DIM: usize = 96;

/// Integrates the unsplit equations ∂x_i = iΩ_i x_i + iK_i G(t) Σ_j x_j for
/// the full transfer matrix from `t0` to `t1`, starting from the identity.
pub fn direct_ode(
    pairs: &PairSystem,
    pump_at: impl Fn(f64) -> Vec<C64>,
    t0: f64,
    t1: f64,
    rtol: f64,
) -> Result<Transfer> {
    let nc = pairs.nc();
    let nk = pairs.nk();
    let n = 2 * nc;
    let d = n * nk;
    if d > DIRECT_ODE_MAX_DIM {
        return Err(Error::Dimension(format!("direct ODE oracle limited to {DIRECT_ODE_MAX_DIM}, got {d}")));
    }
    let k_blocks: Vec<Mat> = (0..nk).map(|i| pairs.k_block(i)).collect();
    let freqs: Vec<(f64, f64)> = (0..nk).map(|i| pairs.linear_freqs(i)).collect();
    let y0 = Transfer::identity(nc, nk, t0).to_dense().iter().copied().collect();
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let u = ndarray::ArrayView2::from_shape((d, d), y).unwrap();
        let g = pairs.generator(&pump_at(t));
        let mut sum = Array2::<C64>::zeros((n, d));
        for i in 0..nk {
            sum += &u.slice(s![i * n..(i + 1) * n, ..]);
        }
        let z = g.dot(&sum);
        let mut out = ndarray::ArrayViewMut2::from_shape((d, d), dy).unwrap();
        for i in 0..nk {
            let kz = k_blocks[i].dot(&z);
            for r in 0..n {
                let w = if r < nc { freqs[i].0 } else { freqs[i].1 };
                for c in 0..d {
                    out[[i * n + r, c]] = I * (w * u[[i * n + r, c]] + kz[[r, c]]);
                }
            }
        }
    };
    let (y, _) = dopri5(rhs, t0, t1, y0, rtol, rtol * 1e-3)?;
    let m = Array2::from_shape_vec((d, d), y).map_err(|e| Error::Dimension(e.to_string()))?;
    Ok(Transfer::from_dense(&m, nc, nk, t1))
}

/// First-order (in the nonlinearity) transfer: identity-plus-linear-phase
/// part and the leading Dyson term, on a uniform midpoint time grid.
pub fn first_order_transfer(
    pairs: &PairSystem,
    pump_at: impl Fn(f64) -> Result<Vec<C64>>,
    dt: f64,
    steps: usize,
) -> Result<Transfer> {
    let nc = pairs.nc();
    let nk = pairs.nk();
    let n = 2 * nc;
    let t_f = dt * steps as f64;
    // U_i(T) = Φ_i(T) E_i + i Σ_t Φ_i(T−t) K_i G(t) Σ_j Φ_j(t) E_j Δt
    let mut u = Transfer::identity(nc, nk, 0.0);
    let pairs_ref = pairs;
    for (i, b) in u.blocks.iter_mut().enumerate() {
        let (ws, wi) = pairs_ref.linear_freqs(i);
        b.slice_mut(s![..nc, ..]).mapv_inplace(|z| z * C64::from_polar(1.0, ws * t_f));
        b.slice_mut(s![nc.., ..]).mapv_inplace(|z| z * C64::from_polar(1.0, wi * t_f));
    }
    // Accumulate H_j = Σ_t e^{i(Ω_i(T−t))} ... per output bin i: since
    // Φ_i(T−t) K_i = K_i Φ_i(T−t), U_i^(1) = i K_i Σ_t Φ_i(T−t) G(t) [Φ_j(t)]_j Δt.
    let mut acc: Vec<Mat> = vec![Array2::zeros((n, n * nk)); nk];
    for s_ in 0..steps {
        let t = (s_ as f64 + 0.5) * dt;
        let g = pairs.generator(&pump_at(t)?);
        if g.iter().all(|z| *z == C64::default()) {
            continue;
        }
        let mut gcols = Array2::<C64>::zeros((n, n * nk));
        for j in 0..nk {
            let (ws, wi) = pairs.linear_freqs(j);
            let (ps, pi) = (C64::from_polar(1.0, ws * t), C64::from_polar(1.0, wi * t));
            let mut blk = gcols.slice_mut(s![.., j * n..(j + 1) * n]);
            blk.slice_mut(s![.., ..nc]).assign(&(g.slice(s![.., ..nc]).mapv(|z| z * ps)));
            blk.slice_mut(s![.., nc..]).assign(&(g.slice(s![.., nc..]).mapv(|z| z * pi)));
        }
        for (i, a) in acc.iter_mut().enumerate() {
            let (ws, wi) = pairs.linear_freqs(i);
            let (ps, pi) = (C64::from_polar(1.0, ws * (t_f - t)) * dt, C64::from_polar(1.0, wi * (t_f - t)) * dt);
            a.slice_mut(s![..nc, ..]).scaled_add(ps, &gcols.slice(s![..nc, ..]));
            a.slice_mut(s![nc.., ..]).scaled_add(pi, &gcols.slice(s![nc.., ..]));
        }
    }
    for (i, b) in u.blocks.iter_mut().enumerate() {
        let k = pairs.k_block(i);
        *b += &(k.dot(&acc[i]) * I);
    }
    u.t = t_f;
    Ok(u)
}

/// Leading-order pair number Σ|W^out|² from [`first_order_transfer`].
pub fn first_order_pairs(
    pairs: &PairSystem,
    pump_at: impl Fn(f64) -> Result<Vec<C64>>,
    dt: f64,
    steps: usize,
) -> Result<(f64, bool)> {
    let u = first_order_transfer(pairs, pump_at, dt, steps)?;
    let out = pairs.to_out(&u, crate::exec::Exec::Sequential);
    let b = crate::squeeze::Bogoliubov::from_transfer(&out);
    let n: f64 = b.w_si.iter().map(|z| z.norm_sqr()).sum();
    Ok((n, n < 1e-2))
}

/// Point-coupled single-mode ring for one resonance (coupled-mode
/// input–output theory), read out on the main model's bins.
#[derive(Clone, Debug)]
pub struct CmioResonance {
    /// Detuning of each output bin from the resonance, rad/ps.
    pub omega: Vec<f64>,
    /// Bin spacing vδ, rad/ps.
    pub dw: f64,
    /// Amplitude decay rates: total, into the waveguide, into loss.
    pub gamma: f64,
    pub gamma_ext: f64,
    pub gamma_loss: f64,
}

impl CmioResonance {
    fn new(problem: &Problem, l: Label) -> Result<Self> {
        let w: &Window = problem.window(l);
        let fom = figures_of_merit(&problem.spec, l)?;
        Ok(CmioResonance {
            omega: (0..w.len()).map(|i| w.omega(i)).collect(),
            dw: w.v * w.dk,
            gamma: fom.gamma_omega,
            gamma_ext: fom.eta_esc * fom.gamma_omega,
            gamma_loss: (1.0 - fom.eta_esc) * fom.gamma_omega,
        })
    }

    /// Temporal mode of bin `k`, normalized over one grid period.
    fn mode(&self, k: usize, t: f64) -> C64 {
        (self.dw / (2.0 * PI)).sqrt() * C64::from_polar(1.0, -self.omega[k] * t)
    }
}

/// CM-IO model built from a [`Problem`]: linewidths and escape efficiencies
/// from the calibrated device, nonlinear rates Λ/L_r with the same
/// combinatorial factors as the main path, white-noise waveguide and loss
/// inputs.
#[derive(Clone, Debug)]
pub struct Cmio {
    pub res: [CmioResonance; 3],
    pub spm: f64,
    pub xpm_s: f64,
    pub xpm_i: f64,
    pub sfwm: f64,
}

/// Output moments on the signal and idler bins, plus photon budgets.
#[derive(Clone, Debug)]
pub struct CmioResult {
    pub moments: Moments,
    /// Photons leaving through the waveguide at any frequency.
    pub n_out: [f64; 2],
    pub n_lost: [f64; 2],
    /// Photons still in the ring at the end.
    pub n_ring: [f64; 2],
}

impl CmioResult {
    pub fn n_tot(&self) -> [f64; 2] {
        [0, 1].map(|j| self.n_out[j] + self.n_lost[j] + self.n_ring[j])
    }
}

type M2 = [[C64; 2]; 2];

fn m2_mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[C64::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn m2_adj(a: &M2) -> M2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn m2_lin(a: &M2, x: f64, b: &M2) -> M2 {
    [[a[0][0] + b[0][0] * x, a[0][1] + b[0][1] * x], [a[1][0] + b[1][0] * x, a[1][1] + b[1][1] * x]]
}

impl Cmio {
    pub fn new(problem: &Problem) -> Result<Cmio> {
        use Label::{I as Id, P, S};
        let spec = &problem.spec;
        let lr = spec.ring_length;
        let on = if problem.numerics.spm_xpm { 1.0 } else { 0.0 };
        Ok(Cmio {
            res: [CmioResonance::new(problem, S)?, CmioResonance::new(problem, P)?, CmioResonance::new(problem, Id)?],
            spm: on * 2.0 * strength(spec, [P, P, P, P]) / lr,
            xpm_s: on * 2.0 * strength(spec, [S, P, S, P]) / lr,
            xpm_i: on * 2.0 * strength(spec, [Id, P, Id, P]) / lr,
            sfwm: strength(spec, [S, Id, P, P]) / lr,
        })
    }

    /// Input flux amplitude s_in(t) synthesized from the pump bins.
    fn pump_input(&self, b_in: &[C64], t: f64) -> C64 {
        let r = &self.res[1];
        b_in.iter().enumerate().map(|(k, b)| b * r.mode(k, t)).sum()
    }

    /// Ring pump amplitude sampled every `h` from t = 0 for `n` samples.
    /// At t = 0 the ring holds its linear response to the periodic input.
    pub fn pump_trajectory(&self, problem: &Problem, drive: &Drive, h: f64, n: usize) -> Result<Vec<C64>> {
        let r = &self.res[1];
        let b_in = problem.pump().input_amplitudes(drive)?;
        let kin = (2.0 * r.gamma_ext).sqrt();
        let b0: C64 = b_in
            .iter()
            .enumerate()
            .map(|(k, b)| -I * kin * b * r.mode(k, 0.0) / (r.gamma - I * r.omega[k]))
            .sum();
        if matches!(drive, Drive::Cw { .. }) {
            // single bin: SPM only rotates the phase
            return Ok((0..n).map(|j| b0 * C64::from_polar(1.0, self.spm * b0.norm_sqr() * h * j as f64)).collect());
        }
        let f = |t: f64, b: C64| -r.gamma * b + I * self.spm * b.norm_sqr() * b - I * kin * self.pump_input(&b_in, t);
        let mut out = Vec::with_capacity(n);
        let mut b = b0;
        out.push(b);
        for j in 1..n {
            let t = h * (j - 1) as f64;
            let k1 = f(t, b);
            let k2 = f(t + 0.5 * h, b + k1 * (0.5 * h));
            let k3 = f(t + 0.5 * h, b + k2 * (0.5 * h));
            let k4 = f(t + h, b + k3 * h);
            b += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
            out.push(b);
        }
        Ok(out)
    }

    /// Drift matrix of (b_S, b_I†) for ring pump amplitude `bp`.
    fn drift(&self, bp: C64) -> M2 {
        let (rs, ri) = (&self.res[0], &self.res[2]);
        let p = bp.norm_sqr();
        let kappa = self.sfwm * bp * bp;
        [
            [C64::new(-rs.gamma, self.xpm_s * p), I * kappa],
            [-I * kappa.conj(), C64::new(-ri.gamma, -self.xpm_i * p)],
        ]
    }

    /// Pulsed run from 0 to `t_end` with time step `h`.
    pub fn pulsed(&self, problem: &Problem, drive: &Drive, t_end: f64, h: f64) -> Result<CmioResult> {
        let steps = (t_end / h).ceil() as usize;
        let h = t_end / steps as f64;
        // pump on the half-step grid
        let bp = self.pump_trajectory(problem, drive, 0.5 * h, 2 * steps + 1)?;
        let drift: Vec<M2> = bp.iter().map(|&b| self.drift(b)).collect();
        let (rs, ri) = (&self.res[0], &self.res[2]);
        let (ns, ni) = (rs.omega.len(), ri.omega.len());
        let c_s = -I * (2.0 * rs.gamma_ext).sqrt();
        let c_i = I * (2.0 * ri.gamma_ext).sqrt();
        // noise inputs: (s_S, l_S) drive row 0, (s_I†, l_I†) drive row 1
        let b_s = [-I * (2.0 * rs.gamma_ext).sqrt(), -I * (2.0 * rs.gamma_loss).sqrt()];
        let b_i = [I * (2.0 * ri.gamma_ext).sqrt(), I * (2.0 * ri.gamma_loss).sqrt()];

        // Forward Lyapunov equation for Q = ⟨y y†⟩ gives the photon budget.
        let noise: M2 = [
            [C64::new(2.0 * rs.gamma, 0.0), C64::default()],
            [C64::default(), C64::default()],
        ];
        let lyap = |a: &M2, q: &M2| -> M2 {
            let aq = m2_mul(a, q);
            let qa = m2_mul(q, &m2_adj(a));
            m2_lin(&m2_lin(&aq, 1.0, &qa), 1.0, &noise)
        };
        let mut q: M2 = [[C64::new(1.0, 0.0), C64::default()], [C64::default(), C64::default()]];
        let mut occ = vec![[0.0f64; 2]; steps + 1];
        occ[0] = [q[0][0].re - 1.0, q[1][1].re];
        for j in 0..steps {
            let (a0, am, a1) = (&drift[2 * j], &drift[2 * j + 1], &drift[2 * j + 2]);
            let k1 = lyap(a0, &q);
            let k2 = lyap(am, &m2_lin(&q, 0.5 * h, &k1));
            let k3 = lyap(am, &m2_lin(&q, 0.5 * h, &k2));
            let k4 = lyap(a1, &m2_lin(&q, h, &k3));
            q = m2_lin(&q, h / 6.0, &m2_lin(&m2_lin(&k1, 2.0, &m2_lin(&k2, 1.0, &k3)), 1.0, &k4));
            occ[j + 1] = [q[0][0].re - 1.0, q[1][1].re];
        }
        let integral = |c: usize| -> f64 {
            h * (occ.iter().map(|o| o[c]).sum::<f64>() - 0.5 * (occ[0][c] + occ[steps][c]))
        };
        let (int_s, int_i) = (integral(0), integral(1));

        // Backward adjoint rows Z_k(s) = ∫_s^T f_k(t) e_rᵀ Φ(t, s) dt for every
        // output bin, accumulated into the bin moments by trapezoid quadrature.
        let mut zs = vec![[C64::default(); 2]; ns];
        let mut zi = vec![[C64::default(); 2]; ni];
        let mut n_ss = Array2::<C64>::zeros((ns, ns));
        let mut n_ii = Array2::<C64>::zeros((ni, ni));
        let mut m_si = Array2::<C64>::zeros((ns, ni));
        let rhs = |z: &[C64; 2], a: &M2, src: C64, row: usize| -> [C64; 2] {
            let mut d = [-(z[0] * a[0][0] + z[1] * a[1][0]), -(z[0] * a[0][1] + z[1] * a[1][1])];
            d[row] -= src;
            d
        };
        let rk = |z: [C64; 2], t: f64, a: [&M2; 3], f: &dyn Fn(f64) -> C64, row: usize| -> [C64; 2] {
            // backward step from t to t − h
            let nh = -h;
            let add = |z: &[C64; 2], k: &[C64; 2], x: f64| [z[0] + k[0] * x, z[1] + k[1] * x];
            let k1 = rhs(&z, a[0], f(t), row);
            let k2 = rhs(&add(&z, &k1, 0.5 * nh), a[1], f(t + 0.5 * nh), row);
            let k3 = rhs(&add(&z, &k2, 0.5 * nh), a[1], f(t + 0.5 * nh), row);
            let k4 = rhs(&add(&z, &k3, nh), a[2], f(t + nh), row);
            [0, 1].map(|c| z[c] + (k1[c] + (k2[c] + k3[c]) * 2.0 + k4[c]) * (nh / 6.0))
        };
        let mut accumulate = |zs: &[[C64; 2]], zi: &[[C64; 2]], t: f64, w: f64| {
            // coefficients on (s_S, l_S, s_I†, l_I†)
            let cs: Vec<[C64; 4]> = (0..ns)
                .map(|k| {
                    let z = zs[k];
                    [
                        rs.mode(k, t).conj() + c_s * z[0] * b_s[0],
                        c_s * z[0] * b_s[1],
                        c_s * z[1] * b_i[0],
                        c_s * z[1] * b_i[1],
                    ]
                })
                .collect();
            let ci: Vec<[C64; 4]> = (0..ni)
                .map(|k| {
                    let z = zi[k];
                    [
                        c_i * z[0] * b_s[0],
                        c_i * z[0] * b_s[1],
                        ri.mode(k, t) + c_i * z[1] * b_i[0],
                        c_i * z[1] * b_i[1],
                    ]
                })
                .collect();
            for a in 0..ns {
                for b in 0..ns {
                    n_ss[[a, b]] += (cs[a][2].conj() * cs[b][2] + cs[a][3].conj() * cs[b][3]) * w;
                }
                for b in 0..ni {
                    m_si[[a, b]] += (cs[a][0] * ci[b][0].conj() + cs[a][1] * ci[b][1].conj()) * w;
                }
            }
            for a in 0..ni {
                for b in 0..ni {
                    n_ii[[a, b]] += (ci[a][0] * ci[b][0].conj() + ci[a][1] * ci[b][1].conj()) * w;
                }
            }
        };
        accumulate(&zs, &zi, t_end, 0.5 * h);
        for j in (0..steps).rev() {
            let t = h * (j + 1) as f64;
            let a = [&drift[2 * j + 2], &drift[2 * j + 1], &drift[2 * j]];
            for (k, z) in zs.iter_mut().enumerate() {
                *z = rk(*z, t, a, &|s| rs.mode(k, s).conj(), 0);
            }
            for (k, z) in zi.iter_mut().enumerate() {
                *z = rk(*z, t, a, &|s| ri.mode(k, s), 1);
            }
            accumulate(&zs, &zi, t - h, if j == 0 { 0.5 * h } else { h });
        }
        // initial ring vacuum (b_S(0), b_I†(0))
        for a in 0..ns {
            for b in 0..ns {
                n_ss[[a, b]] += (c_s * zs[a][1]).conj() * (c_s * zs[b][1]);
            }
            for b in 0..ni {
                m_si[[a, b]] += c_s * zs[a][0] * (c_i * zi[b][0]).conj();
            }
        }
        for a in 0..ni {
            for b in 0..ni {
                n_ii[[a, b]] += (c_i * zi[a][0]) * (c_i * zi[b][0]).conj();
            }
        }
        let m_is = m_si.t().to_owned();
        Ok(CmioResult {
            moments: Moments { n_ss, n_ii, m_si, m_is },
            n_out: [2.0 * rs.gamma_ext * int_s, 2.0 * ri.gamma_ext * int_i],
            n_lost: [2.0 * rs.gamma_loss * int_s, 2.0 * ri.gamma_loss * int_i],
            n_ring: occ[steps],
        })
    }

    /// Stationary output moments for a CW drive, evaluated on the bins:
    /// diagonal occupations and the mirrored-bin pair correlations.
    pub fn cw_stationary(&self, problem: &Problem, drive: &Drive) -> Result<Moments> {
        if !matches!(drive, Drive::Cw { .. }) {
            return Err(Error::Config("stationary CM-IO needs a CW drive".into()));
        }
        let b0 = self.pump_trajectory(problem, drive, 1.0, 1)?[0];
        let (rs, ri) = (&self.res[0], &self.res[2]);
        let (ns, ni) = (rs.omega.len(), ri.omega.len());
        if ns != ni {
            return Err(Error::Dimension("signal and idler windows differ in size".into()));
        }
        // frame co-rotating with the SPM phase of the pump: b_S, b_I each pick up half
        let phi = self.spm * b0.norm_sqr();
        let mut a = self.drift(b0);
        a[0][0] -= I * phi;
        a[1][1] += I * phi;
        let b = [
            [-I * (2.0 * rs.gamma_ext).sqrt(), -I * (2.0 * rs.gamma_loss).sqrt(), C64::default(), C64::default()],
            [C64::default(), C64::default(), I * (2.0 * ri.gamma_ext).sqrt(), I * (2.0 * ri.gamma_loss).sqrt()],
        ];
        let c = [-I * (2.0 * rs.gamma_ext).sqrt(), I * (2.0 * ri.gamma_ext).sqrt()];
        let mut n_ss = Array2::<C64>::zeros((ns, ns));
        let mut n_ii = Array2::<C64>::zeros((ni, ni));
        let mut m_si = Array2::<C64>::zeros((ns, ni));
        for k in 0..ns {
            let w = rs.omega[k];
            // x(ω) = −(A + iω)⁻¹ B ξ(ω)
            let m = [[a[0][0] + I * w, a[0][1]], [a[1][0], a[1][1] + I * w]];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
            let mut d = [[C64::default(); 4]; 2];
            for r in 0..2 {
                for col in 0..4 {
                    d[r][col] = -c[r] * (inv[r][0] * b[0][col] + inv[r][1] * b[1][col]);
                }
            }
            d[0][0] += 1.0;
            d[1][2] += 1.0;
            let j = ns - 1 - k;
            n_ss[[k, k]] = C64::new(d[0][2].norm_sqr() + d[0][3].norm_sqr(), 0.0);
            n_ii[[j, j]] = C64::new(d[1][0].norm_sqr() + d[1][1].norm_sqr(), 0.0);
            m_si[[k, j]] = d[0][0] * d[1][0].conj() + d[0][1] * d[1][1].conj();
        }
        let m_is = m_si.t().to_owned();
        Ok(Moments { n_ss, n_ii, m_si, m_is })
    }
}
