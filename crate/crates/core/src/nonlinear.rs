//! Segment overlaps of local-basis envelopes and the effective couplings
//! built from them.
//!
//! Local modes are confined to one segment, so every four-mode overlap
//! vanishes unless all modes share a segment. Envelopes are evaluated at the
//! resonance centres, which makes the overlaps independent of k.

use crate::basis::{build_asymptotic_in, local_start, segments, Path, Segment};
use crate::coupler::{coupler_transfer, ring_phase};
use crate::device::{DeviceSpec, Label};
use crate::linalg::{gauss_legendre, mat2_apply, Mat};
use crate::units::HBAR;
use crate::{Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Waveguide,
    Ring,
}

/// Quadrature nodes of one region of one segment, with each mode's envelope
/// `h` at every node for each resonance.
#[derive(Clone, Debug)]
pub struct RegionSamples {
    pub region: Region,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// `[label][mode][node]`.
    pub h: Vec<Vec<Vec<C64>>>,
}

#[derive(Clone, Debug)]
pub struct SegmentEnvelopes {
    pub segment: Segment,
    /// Global channel index of each mode living in the segment.
    pub channels: Vec<usize>,
    pub regions: Vec<RegionSamples>,
}

fn gl_nodes(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|t| h * t).collect())
}

/// Envelope (waveguide, ring) of local mode `c` at `z` within its segment,
/// evaluated at the resonance centre. The waveguide value is `None` past the
/// coupler. Without phantoms the only mode is the asymptotic-in mode itself.
pub fn local_envelope(spec: &DeviceSpec, l: Label, c: usize, seg: &Segment, z: f64) -> Result<(Option<C64>, C64)> {
    let r = spec.res(l);
    let k = r.k_wg;
    let lc = spec.coupler_length;
    if spec.layout.n_ring() == 0 {
        let path = Path::new(spec);
        let (w, rr) = build_asymptotic_in(spec, &path, l, k)?[0].sample(spec, &path, l, k, z)?;
        return Ok((w.map(|w| w * C64::from_polar(1.0, r.delta_beta() * z)), rr));
    }
    let (w0, r0) = local_start(spec, l, c);
    let za = seg.z_start;
    if za >= lc {
        return Ok((None, r0 * ring_phase(spec, l, za, z, k)));
    }
    let zc = z.min(lc);
    let t = coupler_transfer(spec, l, za, zc, k)?;
    let [w, rr] = mat2_apply(&t, [w0, r0]);
    let hw = w * C64::from_polar(1.0, r.delta_beta() * zc);
    if z <= lc {
        Ok((Some(hw), rr))
    } else {
        Ok((None, rr * ring_phase(spec, l, lc, z, k)))
    }
}

/// Samples every local mode of every segment on Gauss–Legendre nodes,
/// splitting a segment at the coupler end.
pub fn sample_envelopes(spec: &DeviceSpec, nodes: usize) -> Result<Vec<SegmentEnvelopes>> {
    let lc = spec.coupler_length;
    let mut out = Vec::new();
    for seg in segments(spec) {
        let mut channels = vec![seg.ring_channel];
        channels.extend(seg.wg_channel);
        let (a, b) = (seg.z_start, seg.z_end);
        let mut ring_pieces = vec![(a, b)];
        if a < lc && lc < b {
            ring_pieces = vec![(a, lc), (lc, b)];
        }
        let mut regions = Vec::new();
        let mut push = |region: Region, pieces: &[(f64, f64)]| -> Result<()> {
            let (mut z, mut w) = (Vec::new(), Vec::new());
            for &(p, q) in pieces {
                let (zz, ww) = gl_nodes(p, q, nodes);
                z.extend(zz);
                w.extend(ww);
            }
            let mut h = Vec::new();
            for l in Label::ALL {
                let mut per_mode = Vec::new();
                for &c in &channels {
                    let mut vals = Vec::with_capacity(z.len());
                    for &zq in &z {
                        let (hw, hr) = local_envelope(spec, l, c, &seg, zq)?;
                        vals.push(match region {
                            Region::Ring => hr,
                            Region::Waveguide => hw.unwrap_or_default(),
                        });
                    }
                    per_mode.push(vals);
                }
                h.push(per_mode);
            }
            regions.push(RegionSamples { region, z, w, h });
            Ok(())
        };
        push(Region::Ring, &ring_pieces)?;
        if a < lc {
            push(Region::Waveguide, &[(a, b.min(lc))])?;
        }
        out.push(SegmentEnvelopes { segment: seg, channels, regions });
    }
    Ok(out)
}

/// Λ = ½ ħ ω γ v² with geometric-mean frequency and velocity.
pub fn strength(spec: &DeviceSpec, js: [Label; 4]) -> f64 {
    let w: f64 = js.iter().map(|&j| spec.res(j).omega).product::<f64>().powf(0.25);
    let v: f64 = js.iter().map(|&j| spec.res(j).v).product::<f64>().powf(0.25);
    0.5 * HBAR * w * spec.gamma_nl * v * v
}

/// k′₁ + k′₂ − k′₃ − k′₄.
pub fn detuning(spec: &DeviceSpec, js: [Label; 4]) -> f64 {
    let k = |j: Label| spec.res(j).k_ring;
    k(js[0]) + k(js[1]) - k(js[2]) - k(js[3])
}

/// Combinatorial factor: 2 when the two created modes share a resonance.
pub fn combinatorial(js: [Label; 4]) -> f64 {
    if js[0] == js[1] { 2.0 } else { 1.0 }
}

/// ∫ h*₁ h*₂ h₃ h₄ e^{−iδk⁰z} dz over one region, for modes `m` of the segment.
pub fn segment_overlap(spec: &DeviceSpec, env: &SegmentEnvelopes, js: [Label; 4], m: [usize; 4], region: Region) -> C64 {
    let dk0 = detuning(spec, js);
    env.regions
        .iter()
        .filter(|r| r.region == region)
        .map(|r| {
            let h = |i: usize| &r.h[js[i].idx()][m[i]];
            (0..r.z.len())
                .map(|q| {
                    r.w[q]
                        * h(0)[q].conj()
                        * h(1)[q].conj()
                        * h(2)[q]
                        * h(3)[q]
                        * C64::from_polar(1.0, -dk0 * r.z[q])
                })
                .sum::<C64>()
        })
        .sum()
}

/// Dense `m⁴` tensor of g·Λ·𝒥̃ summed over regions, indexed `[a][b][c][d]`.
#[derive(Clone, Debug)]
pub struct Tensor4 {
    pub m: usize,
    pub data: Vec<C64>,
}

impl Tensor4 {
    pub fn zeros(m: usize) -> Tensor4 {
        Tensor4 { m, data: vec![C64::default(); m.pow(4)] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> C64 {
        let m = self.m;
        self.data[((a * m + b) * m + c) * m + d]
    }

    fn build(spec: &DeviceSpec, env: &SegmentEnvelopes, js: [Label; 4], scale: f64) -> Tensor4 {
        let m = env.channels.len();
        let lam = scale * combinatorial(js) * strength(spec, js);
        let mut t = Tensor4::zeros(m);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let o = segment_overlap(spec, env, js, [a, b, c, d], Region::Ring)
                            + segment_overlap(spec, env, js, [a, b, c, d], Region::Waveguide);
                        t.data[((a * m + b) * m + c) * m + d] = lam * o;
                    }
                }
            }
        }
        t
    }
}

/// Couplings of one segment for the single-pump process.
#[derive(Clone, Debug)]
pub struct SegmentCoupling {
    pub channels: Vec<usize>,
    pub z_start: f64,
    /// Pump self-phase modulation, PPPP.
    pub spm: Tensor4,
    /// Cross-phase modulation on the signal, SPSP and SPPS together.
    pub xpm_s: Tensor4,
    pub xpm_i: Tensor4,
    /// Pair generation, SIPP.
    pub sfwm: Tensor4,
    /// ∫ h*_a h_b dz over the ring for the pump, used for intracavity photon counts.
    pub pump_norm_ring: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct CouplingModel {
    pub segments: Vec<SegmentCoupling>,
    /// Segment and local index of each channel; `None` for channel 0.
    pub owner: Vec<Option<(usize, usize)>>,
    pub n_channels: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct CouplingOptions {
    pub nodes: usize,
    pub spm_xpm: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        CouplingOptions { nodes: 16, spm_xpm: true }
    }
}

impl CouplingModel {
    pub fn new(spec: &DeviceSpec, opts: CouplingOptions) -> Result<CouplingModel> {
        use Label::{I, P, S};
        let envs = sample_envelopes(spec, opts.nodes)?;
        let n_channels = spec.layout.n_channels();
        let mut owner = vec![None; n_channels];
        let phase = if opts.spm_xpm { 1.0 } else { 0.0 };
        let segments = envs
            .iter()
            .enumerate()
            .map(|(si, env)| {
                for (li, &c) in env.channels.iter().enumerate() {
                    owner[c] = Some((si, li));
                }
                let m = env.channels.len();
                let mut norm = vec![C64::default(); m * m];
                for r in env.regions.iter().filter(|r| r.region == Region::Ring) {
                    let h = &r.h[P.idx()];
                    for a in 0..m {
                        for b in 0..m {
                            norm[a * m + b] += (0..r.z.len()).map(|q| r.w[q] * h[a][q].conj() * h[b][q]).sum::<C64>();
                        }
                    }
                }
                SegmentCoupling {
                    channels: env.channels.clone(),
                    z_start: env.segment.z_start,
                    spm: Tensor4::build(spec, env, [P, P, P, P], phase),
                    xpm_s: Tensor4::build(spec, env, [S, P, S, P], 2.0 * phase),
                    xpm_i: Tensor4::build(spec, env, [I, P, I, P], 2.0 * phase),
                    sfwm: Tensor4::build(spec, env, [S, I, P, P], 1.0),
                    pump_norm_ring: norm,
                }
            })
            .collect();
        Ok(CouplingModel { segments, owner, n_channels })
    }

    /// Per-channel SPM source s_a = Σ Λ̃ P*_b P_c P_d.
    pub fn spm_source(&self, p: &[C64]) -> Vec<C64> {
        let mut s = vec![C64::default(); self.n_channels];
        for seg in &self.segments {
            let m = seg.channels.len();
            let pl: Vec<C64> = seg.channels.iter().map(|&c| p[c]).collect();
            for a in 0..m {
                let mut acc = C64::default();
                for b in 0..m {
                    let pb = pl[b].conj();
                    for c in 0..m {
                        for d in 0..m {
                            acc += seg.spm.get(a, b, c, d) * pb * pl[c] * pl[d];
                        }
                    }
                }
                s[seg.channels[a]] = acc;
            }
        }
        s
    }

    /// XPM blocks X[a][c] = Σ Λ̃ P*_b P_d and the SFWM block F[a][b] = Σ Λ̃ P_c P_d,
    /// as dense channel matrices for the signal and idler.
    pub fn pair_blocks(&self, p: &[C64]) -> (Mat, Mat, Mat) {
        let n = self.n_channels;
        let mut xs = Mat::zeros((n, n));
        let mut xi = Mat::zeros((n, n));
        let mut f = Mat::zeros((n, n));
        for seg in &self.segments {
            let m = seg.channels.len();
            let ch = &seg.channels;
            let pl: Vec<C64> = ch.iter().map(|&c| p[c]).collect();
            for a in 0..m {
                for c in 0..m {
                    let (mut s1, mut s2, mut s3) = (C64::default(), C64::default(), C64::default());
                    for b in 0..m {
                        for d in 0..m {
                            let pp = pl[b].conj() * pl[d];
                            s1 += seg.xpm_s.get(a, b, c, d) * pp;
                            s2 += seg.xpm_i.get(a, b, c, d) * pp;
                            s3 += seg.sfwm.get(a, c, b, d) * pl[b] * pl[d];
                        }
                    }
                    xs[[ch[a], ch[c]]] = s1;
                    xi[[ch[a], ch[c]]] = s2;
                    f[[ch[a], ch[c]]] = s3;
                }
            }
        }
        (xs, xi, f)
    }

    /// Ring photon number of a pump configuration, (1/2π) Σ P*_a N_ab P_b.
    pub fn ring_photons(&self, p: &[C64]) -> f64 {
        let mut acc = 0.0;
        for seg in &self.segments {
            let m = seg.channels.len();
            for a in 0..m {
                for b in 0..m {
                    acc += (p[seg.channels[a]].conj() * seg.pump_norm_ring[a * m + b] * p[seg.channels[b]]).re;
                }
            }
        }
        acc / (2.0 * std::f64::consts::PI)
    }

    /// Λ̃ for output mode `m`: Σ over the segment of channel `n1` of the
    /// tensor weighted by the commutator column.
    pub fn effective_coupling(&self, t: &Tensor4, seg: usize, local: [usize; 4], commutator: &Mat, m: usize) -> C64 {
        let s = &self.segments[seg];
        t.get(local[0], local[1], local[2], local[3]) * commutator[[m, s.channels[local[0]]]]
    }
}
