//! Heisenberg propagation of the signal/idler transfer matrix in the local
//! basis, and its projection onto the asymptotic-out basis.
//!
//! Per bin i the operator vector is (b_S(k_i), b†_I(k_i)), each over all
//! channels, with b = √δ a. The equations of motion are
//! ∂x_i = i A^L_i x_i + i K_i G(t) Σ_j x_j, with K_i the commutator blocks
//! and G the bin-independent pump-dependent generator.

use crate::basis::BinBasis;
use crate::device::Window;
use crate::exec::Exec;
use crate::linalg::{eye, frob, inv, max_abs, norm1, cond1, Mat};
use crate::nonlinear::CouplingModel;
use crate::{Error, Result, C64};
use ndarray::{s, Array2};
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NlPath {
    /// Closed form when Ã is well conditioned, series otherwise.
    Auto,
    Series,
    Closed,
}

/// Y(Δt) = i Σ_n Δt^{n+1}/(n+1)! (iÃ)^n, so that the nonlinear update of
/// bin i is A_i Y applied to the summed state.
pub fn nl_series(a_tilde: &Mat, dt: f64) -> Result<Mat> {
    let n = a_tilde.nrows();
    let ia = a_tilde.mapv(|z| I * z);
    let mut term = eye(n) * C64::new(dt, 0.0);
    let mut sum = term.clone();
    for m in 1..64 {
        term = term.dot(&ia) * C64::new(dt / (m as f64 + 1.0), 0.0);
        sum = sum + &term;
        if frob(&term.view()) <= 1e-14 * frob(&sum.view()) {
            return Ok(sum * I);
        }
    }
    Err(Error::StepSize(format!(
        "nonlinear series did not converge in 64 terms; reduce the step below {:.3e} ps",
        dt / (dt * norm1(&a_tilde.view())).max(1.0)
    )))
}

/// Ã⁻¹(e^{iΔtÃ} − I), equal to [`nl_series`] when Ã is invertible.
pub fn nl_closed(a_tilde: &Mat, dt: f64) -> Result<Mat> {
    let n = a_tilde.nrows();
    let e = crate::linalg::expm(&a_tilde.mapv(|z| I * dt * z).view())?;
    Ok(inv(&a_tilde.view())?.dot(&(e - eye(n))))
}

pub fn nl_update(a_tilde: &Mat, dt: f64, path: NlPath) -> Result<Mat> {
    match path {
        NlPath::Series => nl_series(a_tilde, dt),
        NlPath::Closed => nl_closed(a_tilde, dt),
        NlPath::Auto => {
            if max_abs(&a_tilde.view()) > 0.0 && cond1(&a_tilde.view()) < 1e8 {
                nl_closed(a_tilde, dt)
            } else {
                nl_series(a_tilde, dt)
            }
        }
    }
}

/// Signal and idler windows with their local bases.
pub struct PairSystem<'a> {
    pub win_s: &'a Window,
    pub win_i: &'a Window,
    pub bases_s: &'a [BinBasis],
    pub bases_i: &'a [BinBasis],
    pub coupling: &'a CouplingModel,
}

/// Evolving transfer matrix, stored as one row block per bin.
#[derive(Clone, Debug)]
pub struct Transfer {
    pub nc: usize,
    pub nk: usize,
    pub t: f64,
    pub blocks: Vec<Mat>,
}

impl Transfer {
    pub fn identity(nc: usize, nk: usize, t: f64) -> Transfer {
        let n = 2 * nc;
        let d = n * nk;
        let blocks = (0..nk)
            .map(|i| {
                let mut b = Array2::zeros((n, d));
                for r in 0..n {
                    b[[r, i * n + r]] = C64::new(1.0, 0.0);
                }
                b
            })
            .collect();
        Transfer { nc, nk, t, blocks }
    }

    pub fn dim(&self) -> usize {
        2 * self.nc * self.nk
    }

    pub fn to_dense(&self) -> Mat {
        let n = 2 * self.nc;
        let mut m = Array2::zeros((self.dim(), self.dim()));
        for (i, b) in self.blocks.iter().enumerate() {
            m.slice_mut(s![i * n..(i + 1) * n, ..]).assign(b);
        }
        m
    }

    pub fn from_dense(m: &Mat, nc: usize, nk: usize, t: f64) -> Transfer {
        let n = 2 * nc;
        let blocks = (0..nk).map(|i| m.slice(s![i * n..(i + 1) * n, ..]).to_owned()).collect();
        Transfer { nc, nk, t, blocks }
    }
}

impl<'a> PairSystem<'a> {
    pub fn nc(&self) -> usize {
        self.bases_s[0].commutator.nrows()
    }

    pub fn nk(&self) -> usize {
        self.win_s.len()
    }

    /// Commutator block K_i = diag(C_S(k_i), C_I(k_i)*).
    pub fn k_block(&self, i: usize) -> Mat {
        let nc = self.nc();
        let mut k = Array2::zeros((2 * nc, 2 * nc));
        k.slice_mut(s![..nc, ..nc]).assign(&self.bases_s[i].commutator);
        k.slice_mut(s![nc.., nc..]).assign(&self.bases_i[i].commutator.mapv(|z| z.conj()));
        k
    }

    pub fn k_sum(&self) -> Mat {
        let nc = self.nc();
        let mut k = Array2::zeros((2 * nc, 2 * nc));
        for i in 0..self.nk() {
            k = k + self.k_block(i);
        }
        k
    }

    /// Linear frequencies (−ω_S, +ω_I) of bin i.
    pub fn linear_freqs(&self, i: usize) -> (f64, f64) {
        (-self.win_s.omega(i), self.win_i.omega(i))
    }

    /// G(P) = (2π)⁻² [[δ_S X_S, √(δ_Sδ_I) F], [−√(δ_Sδ_I) F†, −δ_I X_I*]].
    pub fn generator(&self, p: &[C64]) -> Mat {
        let (xs, xi, f) = self.coupling.pair_blocks(p);
        let nc = self.nc();
        let (ds, di) = (self.win_s.dk, self.win_i.dk);
        let dsi = (ds * di).sqrt();
        let c = 1.0 / (4.0 * PI * PI);
        let mut g = Array2::zeros((2 * nc, 2 * nc));
        g.slice_mut(s![..nc, ..nc]).assign(&(xs * C64::new(c * ds, 0.0)));
        g.slice_mut(s![..nc, nc..]).assign(&(&f * C64::new(c * dsi, 0.0)));
        g.slice_mut(s![nc.., ..nc]).assign(&f.t().mapv(|z| -c * dsi * z.conj()));
        g.slice_mut(s![nc.., nc..]).assign(&xi.mapv(|z| -c * di * z.conj()));
        g
    }

    fn phase_rows(&self, i: usize, tau: f64) -> (C64, C64) {
        let (ws, wi) = self.linear_freqs(i);
        (C64::from_polar(1.0, ws * tau), C64::from_polar(1.0, wi * tau))
    }

    /// Linear evolution by `tau`: S rows pick up e^{−iω_S τ}, I† rows e^{+iω_I τ}.
    pub fn linear_step(&self, u: &mut Transfer, tau: f64, exec: Exec) {
        let nc = self.nc();
        exec.for_each_mut(&mut u.blocks, |i, b| {
            let (ps, pi) = self.phase_rows(i, tau);
            b.slice_mut(s![..nc, ..]).mapv_inplace(|z| z * ps);
            b.slice_mut(s![nc.., ..]).mapv_inplace(|z| z * pi);
        });
        u.t += tau;
    }

    /// One Strang step with the generator `g` held over the step.
    pub fn step(&self, u: &mut Transfer, g: &Mat, k_sum: &Mat, k_blocks: &[Mat], dt: f64, path: NlPath, exec: Exec) -> Result<()> {
        let nc = self.nc();
        let a_tilde = k_sum.dot(g);
        let d = u.dim();
        let mut sum = Array2::<C64>::zeros((2 * nc, d));
        if max_abs(&g.view()) > 0.0 {
            for (i, b) in u.blocks.iter().enumerate() {
                let (ps, pi) = self.phase_rows(i, 0.5 * dt);
                sum.slice_mut(s![..nc, ..]).scaled_add(ps, &b.slice(s![..nc, ..]));
                sum.slice_mut(s![nc.., ..]).scaled_add(pi, &b.slice(s![nc.., ..]));
            }
            let y = nl_update(&a_tilde, dt, path)?;
            let z = g.dot(&y.dot(&sum));
            exec.for_each_mut(&mut u.blocks, |i, b| {
                let (ps, pi) = self.phase_rows(i, dt);
                let (hs, hi) = self.phase_rows(i, 0.5 * dt);
                let k = &k_blocks[i];
                let ks = k.slice(s![..nc, ..nc]).dot(&z.slice(s![..nc, ..]));
                let ki = k.slice(s![nc.., nc..]).dot(&z.slice(s![nc.., ..]));
                let mut top = b.slice_mut(s![..nc, ..]);
                top.mapv_inplace(|x| x * ps);
                top.scaled_add(hs, &ks);
                let mut bot = b.slice_mut(s![nc.., ..]);
                bot.mapv_inplace(|x| x * pi);
                bot.scaled_add(hi, &ki);
            });
            u.t += dt;
        } else {
            self.linear_step(u, dt, exec);
        }
        Ok(())
    }

    /// Composes `n_steps` Strang steps from `u`, with the pump totals at the
    /// midpoint of each step supplied by `pump_at`.
    pub fn propagate(
        &self,
        u: &mut Transfer,
        dt: f64,
        n_steps: usize,
        path: NlPath,
        exec: Exec,
        mut pump_at: impl FnMut(f64) -> Result<Vec<C64>>,
        mut monitor: impl FnMut(usize, &Transfer),
    ) -> Result<()> {
        let k_sum = self.k_sum();
        let k_blocks: Vec<Mat> = (0..self.nk()).map(|i| self.k_block(i)).collect();
        for j in 0..n_steps {
            let p = pump_at(u.t + 0.5 * dt)?;
            let g = self.generator(&p);
            self.step(u, &g, &k_sum, &k_blocks, dt, path, exec)?;
            monitor(j, u);
        }
        Ok(())
    }

    /// Projects a local-basis transfer matrix onto asymptotic-out operators
    /// at both ends: U^out = T⁻¹ U T with T_i = diag(Q_S(k_i), Q_I(k_i)*).
    pub fn to_out(&self, u: &Transfer, exec: Exec) -> Transfer {
        let nc = self.nc();
        let n = 2 * nc;
        let nk = self.nk();
        let t_blocks: Vec<Mat> = (0..nk)
            .map(|i| {
                let mut t = Array2::zeros((n, n));
                t.slice_mut(s![..nc, ..nc]).assign(&self.bases_s[i].transform.q_out());
                t.slice_mut(s![nc.., nc..]).assign(&self.bases_i[i].transform.q_out().mapv(|z| z.conj()));
                t
            })
            .collect();
        let mut out = u.clone();
        exec.for_each_mut(&mut out.blocks, |i, b| {
            let ls = self.bases_s[i].transform.l_out.t().to_owned();
            let li = self.bases_i[i].transform.l_out.t().mapv(|z| z.conj());
            let top = ls.dot(&b.slice(s![..nc, ..]));
            let bot = li.dot(&b.slice(s![nc.., ..]));
            let mut rows = Array2::zeros((n, b.ncols()));
            rows.slice_mut(s![..nc, ..]).assign(&top);
            rows.slice_mut(s![nc.., ..]).assign(&bot);
            for (j, t) in t_blocks.iter().enumerate() {
                let cols = rows.slice(s![.., j * n..(j + 1) * n]).dot(t);
                b.slice_mut(s![.., j * n..(j + 1) * n]).assign(&cols);
            }
        });
        out
    }
}

/// Bogoliubov blocks in the asymptotic-out basis, indexed by (bin, channel)
/// with flat index `bin * nc + channel`.
#[derive(Clone, Debug)]
pub struct Bogoliubov {
    pub nc: usize,
    pub nk: usize,
    pub v_ss: Mat,
    pub w_si: Mat,
    pub v_ii: Mat,
    pub w_is: Mat,
}

impl Bogoliubov {
    pub fn from_transfer(u: &Transfer) -> Bogoliubov {
        let (nc, nk) = (u.nc, u.nk);
        let m = nc * nk;
        let mut v_ss = Array2::zeros((m, m));
        let mut w_si = Array2::zeros((m, m));
        let mut v_ii = Array2::zeros((m, m));
        let mut w_is = Array2::zeros((m, m));
        for (i, b) in u.blocks.iter().enumerate() {
            for j in 0..nk {
                let col = j * 2 * nc;
                let r = s![i * nc..(i + 1) * nc, j * nc..(j + 1) * nc];
                v_ss.slice_mut(r).assign(&b.slice(s![..nc, col..col + nc]));
                w_si.slice_mut(r).assign(&b.slice(s![..nc, col + nc..col + 2 * nc]));
                w_is.slice_mut(r).assign(&b.slice(s![nc.., col..col + nc]).mapv(|z| z.conj()));
                v_ii.slice_mut(r).assign(&b.slice(s![nc.., col + nc..col + 2 * nc]).mapv(|z| z.conj()));
            }
        }
        Bogoliubov { nc, nk, v_ss, w_si, v_ii, w_is }
    }

    /// Full-mode V and W over (S modes, I modes).
    pub fn full(&self) -> (Mat, Mat) {
        let m = self.nc * self.nk;
        let mut v = Array2::zeros((2 * m, 2 * m));
        let mut w = Array2::zeros((2 * m, 2 * m));
        v.slice_mut(s![..m, ..m]).assign(&self.v_ss);
        v.slice_mut(s![m.., m..]).assign(&self.v_ii);
        w.slice_mut(s![..m, m..]).assign(&self.w_si);
        w.slice_mut(s![m.., ..m]).assign(&self.w_is);
        (v, w)
    }

    /// max |V V† − W W† − I| and max |V Wᵀ − (V Wᵀ)ᵀ| over the full mode set.
    pub fn symplectic_defect(&self) -> (f64, f64) {
        let (v, w) = self.full();
        let n = v.nrows();
        let a = v.dot(&crate::linalg::adjoint(&v.view())) - w.dot(&crate::linalg::adjoint(&w.view())) - eye(n);
        let b = v.dot(&w.t());
        (max_abs(&a.view()), max_abs(&(&b - &b.t()).view()))
    }
}
