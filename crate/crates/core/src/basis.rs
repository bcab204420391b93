//! Asymptotic-in/out modes of the ring, waveguide and phantom splice network,
//! and the local basis built from them.
//!
//! Envelopes are sampled at every phantom point and at the coupler end, on
//! both sides of each splice. Values between points follow from the coupler
//! transfer or the ring phase.

use crate::coupler::{coupler_transfer, ring_phase};
use crate::device::{DeviceSpec, Label, PhantomLayout, Window};
use crate::exec::Exec;
use crate::linalg::{mat2_apply, mat2_inv, Lu, Mat};
use crate::{Error, Result, C64};
use ndarray::Array2;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Guide {
    Waveguide,
    Ring,
}

#[derive(Clone, Debug)]
struct Point {
    z: f64,
    ring: Option<usize>,
    wg: Option<usize>,
    is_lc: bool,
}

/// Ordered splice points along `[0, L_r]` for one device.
#[derive(Clone, Debug)]
pub struct Path {
    points: Vec<Point>,
    lc: f64,
    lr: f64,
    tol: f64,
    /// Point index and guide of each phantom channel; `None` for channel 0.
    sites: Vec<Option<(usize, Guide)>>,
}

impl Path {
    pub fn new(spec: &DeviceSpec) -> Path {
        let lay = &spec.layout;
        let lr = spec.ring_length;
        let lc = spec.coupler_length;
        let tol = 1e-9 * lr;
        let mut zs: Vec<f64> = vec![0.0];
        zs.extend(lay.ring_positions.iter().copied());
        if lc < lr - tol {
            zs.push(lc);
        }
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut points: Vec<Point> = Vec::new();
        for z in zs {
            if points.last().map_or(true, |p| z - p.z > tol) {
                points.push(Point { z, ring: None, wg: None, is_lc: false });
            }
        }
        let zpts: Vec<f64> = points.iter().map(|p| p.z).collect();
        let find = |z: f64| zpts.iter().position(|&q| (q - z).abs() <= tol).unwrap();
        let mut sites = vec![None; lay.n_channels()];
        let assign: Vec<(usize, usize, Guide)> = lay
            .ring_positions
            .iter()
            .enumerate()
            .map(|(j, &z)| (find(z), j, Guide::Ring))
            .chain((0..lay.wg_count).map(|j| (find(lay.ring_positions[j]), j, Guide::Waveguide)))
            .collect();
        for (pi, j, g) in assign {
            match g {
                Guide::Ring => {
                    points[pi].ring = Some(j);
                    sites[lay.ring_channel(j)] = Some((pi, g));
                }
                Guide::Waveguide => {
                    points[pi].wg = Some(j);
                    sites[lay.wg_channel(j)] = Some((pi, g));
                }
            }
        }
        if lc < lr - tol {
            let i = find(lc);
            points[i].is_lc = true;
        }
        Path { points, lc, lr, tol, sites }
    }

    fn next_z(&self, i: usize) -> f64 {
        self.points.get(i + 1).map_or(self.lr, |p| p.z)
    }

    fn in_coupler(&self, i: usize) -> bool {
        self.points[i].z < self.lc - self.tol
    }

    /// Index of the last point at or before `z`.
    fn locate(&self, z: f64) -> usize {
        self.points.iter().rposition(|p| p.z <= z + self.tol).unwrap_or(0)
    }

    /// Positions of all splice points.
    pub fn point_positions(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.z).collect()
    }
}

/// Field values at one splice point, before and after its splices.
#[derive(Clone, Copy, Debug)]
pub struct Station {
    pub z: f64,
    pub ring_in: C64,
    pub ring_out: C64,
    pub wg_in: Option<C64>,
    pub wg_out: Option<C64>,
}

/// One asymptotic mode sampled at the splice points, plus its incoming and
/// outgoing channel amplitudes.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub stations: Vec<Station>,
    pub inputs: Vec<C64>,
    pub outputs: Vec<C64>,
}

impl Envelope {
    /// Amplitude right after the splice of phantom channel `c`.
    pub fn after_splice(&self, path: &Path, c: usize) -> C64 {
        let (pi, g) = path.sites[c].expect("phantom channel");
        let st = &self.stations[pi];
        match g {
            Guide::Ring => st.ring_out,
            Guide::Waveguide => st.wg_out.unwrap_or(ZERO),
        }
    }

    /// Waveguide (if inside the coupler) and ring envelopes at `z`, taking
    /// values after any splice located exactly at `z`.
    pub fn sample(&self, spec: &DeviceSpec, path: &Path, l: Label, k: f64, z: f64) -> Result<(Option<C64>, C64)> {
        let i = path.locate(z);
        let st = &self.stations[i];
        if path.in_coupler(i) {
            let t = coupler_transfer(spec, l, st.z, z.min(path.lc), k)?;
            let [w, r] = mat2_apply(&t, [st.wg_out.unwrap_or(ZERO), st.ring_out]);
            if z <= path.lc + path.tol {
                Ok((Some(w), r))
            } else {
                Ok((None, r * ring_phase(spec, l, path.lc, z, k)))
            }
        } else {
            let w = if (z - path.lc).abs() <= path.tol { st.wg_out } else { None };
            Ok((w, st.ring_out * ring_phase(spec, l, st.z, z, k)))
        }
    }
}

// The splice is unitary on flux amplitudes; `q` = √(u/v) converts a ring
// envelope to that normalization (1 in the waveguide).
fn splice(sigma: f64, q: f64, g: C64, p: C64) -> (C64, C64) {
    let kappa = PhantomLayout::kappa(sigma);
    (sigma * g - I * kappa * p / q, -I * kappa * q * g + sigma * p)
}

fn unsplice(sigma: f64, q: f64, g_out: C64, p_out: C64) -> (C64, C64) {
    let kappa = PhantomLayout::kappa(sigma);
    (sigma * g_out + I * kappa * p_out / q, I * kappa * q * g_out + sigma * p_out)
}

fn flux_scale(spec: &DeviceSpec, l: Label) -> f64 {
    let r = spec.res(l);
    (r.u / r.v).sqrt()
}

struct Ctx<'a> {
    spec: &'a DeviceSpec,
    path: &'a Path,
    l: Label,
    k: f64,
}

impl Ctx<'_> {
    fn sig_ring(&self, j: usize) -> f64 {
        self.spec.layout.sigma_ring[self.l.idx()][j]
    }

    fn sig_wg(&self, j: usize) -> f64 {
        self.spec.layout.sigma_wg[self.l.idx()][j]
    }

    fn out_phase(&self) -> C64 {
        C64::from_polar(1.0, -(self.k - self.spec.res(self.l).k_wg) * self.lc())
    }

    fn lc(&self) -> f64 {
        self.path.lc.min(self.path.lr)
    }

    fn forward(&self, x: &[C64], r0: C64) -> Result<(Vec<Station>, Vec<C64>, C64)> {
        let lay = &self.spec.layout;
        let path = self.path;
        let mut y = vec![ZERO; x.len()];
        let mut w = Some(x[0]);
        let mut r = r0;
        let mut st = Vec::with_capacity(path.points.len());
        for (i, p) in path.points.iter().enumerate() {
            let (ring_in, wg_in) = (r, w);
            if let Some(j) = p.ring {
                let (g, ph) = splice(self.sig_ring(j), flux_scale(self.spec, self.l), r, x[lay.ring_channel(j)]);
                r = g;
                y[lay.ring_channel(j)] = ph;
            }
            if let Some(j) = p.wg {
                let (g, ph) = splice(self.sig_wg(j), 1.0, w.unwrap_or(ZERO), x[lay.wg_channel(j)]);
                w = Some(g);
                y[lay.wg_channel(j)] = ph;
            }
            st.push(Station { z: p.z, ring_in, ring_out: r, wg_in, wg_out: w });
            if p.is_lc {
                y[0] = w.unwrap_or(ZERO) * self.out_phase();
                w = None;
            }
            let zn = path.next_z(i);
            if path.in_coupler(i) {
                let t = coupler_transfer(self.spec, self.l, p.z, zn.min(path.lc), self.k)?;
                let [a, b] = mat2_apply(&t, [w.unwrap_or(ZERO), r]);
                w = Some(a);
                r = b;
            } else {
                r *= ring_phase(self.spec, self.l, p.z, zn, self.k);
            }
        }
        if let Some(wv) = w {
            y[0] = wv * self.out_phase();
        }
        Ok((st, y, r))
    }

    fn backward(&self, y: &[C64], rho: C64) -> Result<(Vec<Station>, Vec<C64>, C64)> {
        let lay = &self.spec.layout;
        let path = self.path;
        let n = path.points.len();
        let mut x = vec![ZERO; y.len()];
        let wl = y[0] / self.out_phase();
        let mut r = rho;
        let mut w: Option<C64> = if path.lc >= path.lr - path.tol { Some(wl) } else { None };
        let mut st = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let p = &path.points[i];
            let zn = path.next_z(i);
            if path.in_coupler(i) {
                let t = coupler_transfer(self.spec, self.l, p.z, zn.min(path.lc), self.k)?;
                let [a, b] = mat2_apply(&mat2_inv(&t), [w.unwrap_or(ZERO), r]);
                w = Some(a);
                r = b;
            } else {
                r /= ring_phase(self.spec, self.l, p.z, zn, self.k);
            }
            if p.is_lc {
                w = Some(wl);
            }
            let (ring_out, wg_out) = (r, w);
            if let Some(j) = p.ring {
                let (g, ph) = unsplice(self.sig_ring(j), flux_scale(self.spec, self.l), r, y[lay.ring_channel(j)]);
                r = g;
                x[lay.ring_channel(j)] = ph;
            }
            if let Some(j) = p.wg {
                let (g, ph) = unsplice(self.sig_wg(j), 1.0, w.unwrap_or(ZERO), y[lay.wg_channel(j)]);
                w = Some(g);
                x[lay.wg_channel(j)] = ph;
            }
            st.push(Station { z: p.z, ring_in: r, ring_out, wg_in: w, wg_out });
        }
        st.reverse();
        x[0] = w.unwrap_or(ZERO);
        Ok((st, x, r))
    }
}

fn close_loop(f: impl Fn(C64) -> Result<C64>) -> Result<C64> {
    let b = f(ZERO)?;
    let a = f(C64::new(1.0, 0.0))? - b;
    let den = C64::new(1.0, 0.0) - a;
    if den.norm() < 1e-14 {
        return Err(Error::Singular("ring round-trip factor equals one".into()));
    }
    Ok(b / den)
}

/// Asymptotic-in modes: unit input in each channel, vacuum elsewhere.
pub fn build_asymptotic_in(spec: &DeviceSpec, path: &Path, l: Label, k: f64) -> Result<Vec<Envelope>> {
    let ctx = Ctx { spec, path, l, k };
    let n = spec.layout.n_channels();
    (0..n)
        .map(|c| {
            let mut x = vec![ZERO; n];
            x[c] = C64::new(1.0, 0.0);
            let r0 = close_loop(|r| Ok(ctx.forward(&x, r)?.2))?;
            let (stations, outputs, _) = ctx.forward(&x, r0)?;
            Ok(Envelope { stations, inputs: x, outputs })
        })
        .collect()
}

/// Asymptotic-out modes: unit outgoing wave in each channel, found by
/// running the splice network backwards.
pub fn build_asymptotic_out(spec: &DeviceSpec, path: &Path, l: Label, k: f64) -> Result<Vec<Envelope>> {
    let ctx = Ctx { spec, path, l, k };
    let n = spec.layout.n_channels();
    (0..n)
        .map(|c| {
            let mut y = vec![ZERO; n];
            y[c] = C64::new(1.0, 0.0);
            let rho = close_loop(|r| Ok(ctx.backward(&y, r)?.2))?;
            let (stations, inputs, _) = ctx.backward(&y, rho)?;
            Ok(Envelope { stations, inputs, outputs: y })
        })
        .collect()
}

/// S[m][n] is the outgoing amplitude in channel m for asymptotic-in mode n.
pub fn scattering_matrix(ins: &[Envelope]) -> Mat {
    let n = ins.len();
    Array2::from_shape_fn((n, n), |(m, c)| ins[c].outputs[m])
}

/// The segment owning each channel and the phantoms whose splices cancel it.
#[derive(Clone, Debug)]
pub struct Segment {
    pub index: usize,
    pub z_start: f64,
    pub z_end: f64,
    pub ring_channel: usize,
    pub wg_channel: Option<usize>,
    pub cancel: Vec<usize>,
}

pub fn segments(spec: &DeviceSpec) -> Vec<Segment> {
    let lay = &spec.layout;
    let n = lay.n_ring();
    if n == 0 {
        return vec![Segment {
            index: 0,
            z_start: 0.0,
            z_end: spec.ring_length,
            ring_channel: 0,
            wg_channel: None,
            cancel: Vec::new(),
        }];
    }
    (0..n)
        .map(|j| {
            let jn = (j + 1) % n;
            let mut cancel = vec![lay.ring_channel(jn)];
            if j + 1 < lay.wg_count {
                cancel.push(lay.wg_channel(j + 1));
            }
            Segment {
                index: j,
                z_start: lay.ring_positions[j],
                z_end: if j + 1 < n { lay.ring_positions[j + 1] } else { spec.ring_length },
                ring_channel: lay.ring_channel(j),
                wg_channel: (j < lay.wg_count).then(|| lay.wg_channel(j)),
                cancel,
            }
        })
        .collect()
}

/// Segment index of each channel; `None` for channel 0.
pub fn channel_segments(spec: &DeviceSpec) -> Vec<Option<usize>> {
    let lay = &spec.layout;
    (0..lay.n_channels())
        .map(|c| {
            if c == 0 {
                None
            } else if c <= lay.n_ring() {
                Some(c - 1)
            } else {
                Some(c - 1 - lay.n_ring())
            }
        })
        .collect()
}

fn channel_kappa(spec: &DeviceSpec, l: Label, c: usize) -> f64 {
    let lay = &spec.layout;
    if c == 0 {
        return 1.0;
    }
    let s = if c <= lay.n_ring() {
        lay.sigma_ring[l.idx()][c - 1]
    } else {
        lay.sigma_wg[l.idx()][c - 1 - lay.n_ring()]
    };
    PhantomLayout::kappa(s)
}

fn require_loss(spec: &DeviceSpec, l: Label) -> Result<()> {
    let n = spec.layout.n_channels();
    if (1..n).any(|c| channel_kappa(spec, l, c) == 0.0) {
        return Err(Error::Config("a phantom channel with zero coupling cannot anchor a local mode".into()));
    }
    Ok(())
}

/// Local basis from asymptotic-in modes: each row adds the channels whose
/// splices cancel the anchor's field at the end of its segment.
pub fn local_from_in(spec: &DeviceSpec, path: &Path, ins: &[Envelope], l: Label) -> Result<Mat> {
    let n = ins.len();
    let mut lm = Array2::zeros((n, n));
    if n == 1 {
        lm[[0, 0]] = C64::new(1.0, 0.0);
        return Ok(lm);
    }
    require_loss(spec, l)?;
    let segs = segments(spec);
    let chseg = channel_segments(spec);
    for c in 0..n {
        let cancel: Vec<usize> = match chseg[c] {
            None => vec![spec.layout.wg_channel(0)],
            Some(s) => segs[s].cancel.clone(),
        };
        let m = cancel.len();
        let a = Array2::from_shape_fn((m, m), |(d, e)| ins[cancel[e]].after_splice(path, cancel[d]));
        let b: Vec<C64> = cancel.iter().map(|&d| ins[c].after_splice(path, d)).collect();
        let f = Lu::new(&a.view())?.solve_vec(&b);
        lm[[c, c]] = C64::new(1.0, 0.0);
        for (e, fe) in cancel.iter().zip(f) {
            lm[[c, *e]] -= fe;
        }
    }
    Ok(lm)
}

/// Local basis from any complete set of modes by imposing the local-mode
/// field values at every splice: −iκ (in flux units) after the anchor's own splice, zero
/// after all others, and unit waveguide input for channel 0 only.
pub fn local_from_fields(spec: &DeviceSpec, path: &Path, modes: &[Envelope], l: Label) -> Result<Mat> {
    let n = modes.len();
    if n == 1 {
        let mut lm = Array2::zeros((1, 1));
        lm[[0, 0]] = C64::new(1.0, 0.0) / modes[0].inputs[0];
        return Ok(lm);
    }
    require_loss(spec, l)?;
    let m = Array2::from_shape_fn((n, n), |(d, e)| {
        if d == 0 { modes[e].inputs[0] } else { modes[e].after_splice(path, d) }
    });
    let mut t = Array2::zeros((n, n));
    for c in 0..n {
        t[[c, c]] = match c {
            0 => C64::new(1.0, 0.0),
            c if c <= spec.layout.n_ring() => -I * channel_kappa(spec, l, c) / flux_scale(spec, l),
            c => -I * channel_kappa(spec, l, c),
        };
    }
    let y = Lu::new(&m.view())?.solve(&t.view());
    Ok(y.reversed_axes())
}

#[derive(Clone, Debug)]
pub struct BasisTransform {
    pub l_in: Mat,
    pub l_in_inv: Mat,
    pub l_out: Mat,
    pub l_out_inv: Mat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    InToLocal,
    LocalToIn,
    LocalToOut,
    OutToLocal,
}

impl BasisTransform {
    pub fn new(l_in: Mat, l_out: Mat) -> Result<BasisTransform> {
        let l_in_inv = Lu::new(&l_in.view())?.inverse();
        let l_out_inv = Lu::new(&l_out.view())?.inverse();
        Ok(BasisTransform { l_in, l_in_inv, l_out, l_out_inv })
    }

    /// Q = (L⁻¹)^T, so that a^loc = Q a^in.
    pub fn q_in(&self) -> Mat {
        self.l_in_inv.t().to_owned()
    }

    pub fn q_out(&self) -> Mat {
        self.l_out_inv.t().to_owned()
    }

    /// C = Q Q†.
    pub fn commutator(&self) -> Mat {
        gram(&self.q_in())
    }

    pub fn commutator_from_out(&self) -> Mat {
        gram(&self.q_out())
    }

    pub fn change_basis(&self, v: &[C64], dir: Direction) -> Result<Vec<C64>> {
        let n = self.l_in.nrows();
        if v.len() != n {
            return Err(Error::Dimension(format!("vector of length {} for {n} channels", v.len())));
        }
        let m = match dir {
            Direction::InToLocal => self.l_in_inv.t(),
            Direction::LocalToIn => self.l_in.t(),
            Direction::LocalToOut => self.l_out.t(),
            Direction::OutToLocal => self.l_out_inv.t(),
        };
        Ok((0..n).map(|i| (0..n).map(|j| m[[i, j]] * v[j]).sum()).collect())
    }
}

fn gram(a: &Mat) -> Mat {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| (0..n).map(|m| a[[i, m]] * a[[j, m]].conj()).sum())
}

/// Without phantoms the single local mode is the ring field at mid-ring,
/// scaled so that it equals the in-mode at the resonance centre.
fn single_mode_transform(spec: &DeviceSpec, path: &Path, l: Label, k: f64) -> Result<BasisTransform> {
    let z = 0.5 * (spec.coupler_length + spec.ring_length);
    let k0 = spec.res(l).k_wg;
    let f0 = build_asymptotic_in(spec, path, l, k0)?[0].sample(spec, path, l, k0, z)?.1;
    let f_in = build_asymptotic_in(spec, path, l, k)?[0].sample(spec, path, l, k, z)?.1;
    let f_out = build_asymptotic_out(spec, path, l, k)?[0].sample(spec, path, l, k, z)?.1;
    let one = |q: C64| Array2::from_elem((1, 1), C64::new(1.0, 0.0) / q);
    BasisTransform::new(one(f_in / f0), one(f_out / f0))
}

pub fn build_local_transform(spec: &DeviceSpec, path: &Path, l: Label, k: f64) -> Result<BasisTransform> {
    if spec.layout.n_channels() == 1 {
        return single_mode_transform(spec, path, l, k);
    }
    let ins = build_asymptotic_in(spec, path, l, k)?;
    let outs = build_asymptotic_out(spec, path, l, k)?;
    BasisTransform::new(local_from_in(spec, path, &ins, l)?, local_from_fields(spec, path, &outs, l)?)
}

/// Everything the propagation needs for one bin.
#[derive(Clone, Debug)]
pub struct BinBasis {
    pub k: f64,
    pub smat: Mat,
    pub transform: BasisTransform,
    pub commutator: Mat,
}

pub fn build_bin(spec: &DeviceSpec, path: &Path, l: Label, k: f64) -> Result<BinBasis> {
    let ins = build_asymptotic_in(spec, path, l, k)?;
    let transform = build_local_transform(spec, path, l, k)?;
    Ok(BinBasis { k, smat: scattering_matrix(&ins), commutator: transform.commutator(), transform })
}

/// Bases for every bin of a window.
pub fn build_window(spec: &DeviceSpec, win: &Window, exec: Exec) -> Result<Vec<BinBasis>> {
    let path = Path::new(spec);
    exec.map(win.len(), |i| build_bin(spec, &path, win.label, win.k(i))).into_iter().collect()
}

/// Start values (waveguide, ring) of local mode `c` right after its anchor
/// splice: −iκ in the anchor guide and zero in the partner guide.
pub fn local_start(spec: &DeviceSpec, l: Label, c: usize) -> (C64, C64) {
    let lay = &spec.layout;
    let v = -I * channel_kappa(spec, l, c);
    if c >= 1 && c <= lay.n_ring() { (ZERO, v / flux_scale(spec, l)) } else { (v, ZERO) }
}
