use ndarray::Array2;
use ringsqz::basis::*;
use ringsqz::device::{DeviceParams, Label};
use ringsqz::linalg::{adjoint, eye, max_abs, Mat};
use ringsqz::C64;

fn spec(n: usize, u: Option<f64>, db: f64) -> ringsqz::device::DeviceSpec {
    let p = DeviceParams {
        ring_phantoms: n,
        ring_group_velocity: u,
        delta_beta: db,
        finesse: 40.0,
        ..Default::default()
    };
    p.build().unwrap()
}

fn dist(a: &Mat, b: &Mat) -> f64 {
    max_abs(&(a - b).view())
}

#[test]
fn scattering_matrix_is_unitary() {
    for (n, u, db) in [(4, None, 0.0), (20, Some(120.0), 0.0), (7, Some(170.0), 1e-3)] {
        let s = spec(n, u, db);
        let path = Path::new(&s);
        for l in Label::ALL {
            for dk in [-3e-4, 0.0, 1e-4] {
                let k = s.res(l).k_wg + dk;
                let ins = build_asymptotic_in(&s, &path, l, k).unwrap();
                let sm = scattering_matrix(&ins);
                let e = dist(&sm.dot(&adjoint(&sm.view())), &eye(sm.nrows()));
                assert!(e < 1e-10, "n={n} {l:?} dk={dk}: {e}");
            }
        }
    }
}

#[test]
fn out_modes_are_in_modes_recombined() {
    let s = spec(6, Some(130.0), 0.0);
    let path = Path::new(&s);
    let k = s.res(Label::S).k_wg + 2e-4;
    let ins = build_asymptotic_in(&s, &path, Label::S, k).unwrap();
    let outs = build_asymptotic_out(&s, &path, Label::S, k).unwrap();
    let sm = scattering_matrix(&ins);
    let n = ins.len();
    for q in 0..n {
        for (pi, st) in outs[q].stations.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..n {
                acc += sm[[q, m]].conj() * ins[m].stations[pi].ring_out;
            }
            assert!((acc - st.ring_out).norm() < 1e-10);
        }
    }
}

#[test]
fn both_local_constructions_agree() {
    for (n, u) in [(5, None), (20, Some(120.0))] {
        let s = spec(n, u, 0.0);
        let path = Path::new(&s);
        for dk in [-2e-4, 0.0, 5e-5] {
            let k = s.res(Label::I).k_wg + dk;
            let ins = build_asymptotic_in(&s, &path, Label::I, k).unwrap();
            let sm = scattering_matrix(&ins);
            let t = build_local_transform(&s, &path, Label::I, k).unwrap();
            let predicted = t.l_in.dot(&sm.t());
            assert!(dist(&predicted, &t.l_out) < 1e-9, "L_out mismatch");
            assert!(dist(&t.commutator(), &t.commutator_from_out()) < 1e-9, "C mismatch");
            let from_fields = local_from_fields(&s, &path, &ins, Label::I).unwrap();
            assert!(dist(&from_fields, &t.l_in) < 1e-9);
        }
    }
}

#[test]
fn commutator_is_hermitian_positive_with_unit_diagonal_on_channel_zero() {
    let s = spec(8, None, 0.0);
    let path = Path::new(&s);
    let t = build_local_transform(&s, &path, Label::P, s.res(Label::P).k_wg).unwrap();
    let c = t.commutator();
    assert!(dist(&c, &adjoint(&c.view())) < 1e-12);
    let ev = ringsqz::linalg::hermitian_eigenvalues(&c.view());
    assert!(ev.iter().all(|&x| x > 0.0));
}

#[test]
fn change_basis_round_trips() {
    let s = spec(5, Some(140.0), 0.0);
    let path = Path::new(&s);
    let t = build_local_transform(&s, &path, Label::S, s.res(Label::S).k_wg + 1e-4).unwrap();
    let n = t.l_in.nrows();
    let v: Vec<C64> = (0..n).map(|i| C64::new(i as f64 * 0.3, 1.0 - i as f64)).collect();
    let loc = t.change_basis(&v, Direction::InToLocal).unwrap();
    let back = t.change_basis(&loc, Direction::LocalToIn).unwrap();
    for (a, b) in v.iter().zip(&back) {
        assert!((a - b).norm() < 1e-10);
    }
    assert!(t.change_basis(&v[1..], Direction::LocalToOut).is_err());
    let _ = Array2::<C64>::zeros((1, 1));
}

#[test]
fn zero_loss_phantoms_cannot_anchor_local_modes() {
    let mut s = spec(4, None, 0.0);
    for v in s.layout.sigma_ring.iter_mut() {
        v[1] = 1.0;
    }
    let path = Path::new(&s);
    let r = build_local_transform(&s, &path, Label::S, s.res(Label::S).k_wg);
    assert!(matches!(r, Err(ringsqz::Error::Config(_))));
}

#[test]
fn local_modes_vanish_outside_their_segment() {
    for (n, frac) in [(8, 0.25), (20, 0.3), (5, 1.0)] {
        let p = DeviceParams { ring_phantoms: n, coupler_fraction: frac, finesse: 60.0, ..Default::default() };
        let s = p.build().unwrap();
        let path = Path::new(&s);
        let k = s.res(Label::S).k_wg + 1e-4;
        let ins = build_asymptotic_in(&s, &path, Label::S, k).unwrap();
        let t = build_local_transform(&s, &path, Label::S, k).unwrap();
        let segs = segments(&s);
        let owner = channel_segments(&s);
        let zs = path.point_positions();
        for c in 0..ins.len() {
            let (lo, hi) = match owner[c] {
                None => (f64::NAN, f64::NAN),
                Some(j) => (segs[j].z_start, segs[j].z_end),
            };
            for pi in 0..zs.len() {
                let mut ring = C64::new(0.0, 0.0);
                let mut wg = C64::new(0.0, 0.0);
                for e in 0..ins.len() {
                    let st = &ins[e].stations[pi];
                    ring += t.l_in[[c, e]] * st.ring_out;
                    wg += t.l_in[[c, e]] * st.wg_out.unwrap_or_default();
                }
                let z = zs[pi];
                let inside = z >= lo - 1e-9 && z < hi - 1e-9;
                // the waveguide leaves the coupler at L_c without a splice
                let wg_exit = (z - s.coupler_length).abs() < 1e-9 && z > lo && z <= hi + 1e-9;
                if !inside {
                    assert!(ring.norm() < 1e-10, "n={n} c={c} z={z}: ring {ring}");
                }
                if !inside && !wg_exit {
                    assert!(wg.norm() < 1e-10, "n={n} c={c} z={z}: wg {wg}");
                }
            }
        }
    }
}

#[test]
fn decoupled_phantoms_reproduce_the_lossless_ring() {
    for (u, db) in [(None, 0.0), (Some(125.0), 0.0), (Some(160.0), 2e-3)] {
        let p = DeviceParams { ring_phantoms: 12, ring_group_velocity: u, delta_beta: db, finesse: 100.0, ..Default::default() };
        let mut s = p.build().unwrap();
        for v in s.layout.sigma_ring.iter_mut().chain(s.layout.sigma_wg.iter_mut()) {
            v.iter_mut().for_each(|x| *x = 1.0);
        }
        let path = Path::new(&s);
        for l in Label::ALL {
            for dk in [-1e-3, -3e-5, 0.0, 4e-4] {
                let k = s.res(l).k_wg + dk;
                let closed = ringsqz::coupler::ring_response(&s, l, k).unwrap();
                let ins = build_asymptotic_in(&s, &path, l, k).unwrap();
                let m0 = &ins[0];
                let scale = closed.r.norm().max(1.0);
                assert!((m0.stations[0].ring_out - closed.r).norm() < 1e-12 * scale, "{l:?} {dk}: R {} vs {}", m0.stations[0].ring_out, closed.r);
                assert!((m0.outputs[0] - closed.t).norm() < 1e-12, "{l:?} {dk}: T {} vs {}", m0.outputs[0], closed.t);
                assert!(m0.outputs[1..].iter().all(|y| y.norm() < 1e-15));
            }
        }
    }
}

#[test]
fn ring_intensity_matches_the_lossy_enhancement() {
    for u in [None, Some(130.0)] {
        let p = DeviceParams { ring_phantoms: 20, ring_group_velocity: u, ..Default::default() };
        let s = p.build().unwrap();
        let path = Path::new(&s);
        let zs = path.point_positions();
        let at_lc = zs.iter().position(|z| (z - s.coupler_length).abs() < 1e-9).unwrap();
        let n_c = zs.iter().filter(|&&z| z > 1e-9 && z < s.coupler_length - 1e-9).count() + 1;
        for dk in [-2e-4, 0.0, 1e-5, 3e-4] {
            let l = Label::P;
            let k = s.res(l).k_wg + dk;
            let ins = build_asymptotic_in(&s, &path, l, k).unwrap();
            let r = s.res(l);
            let flux = ins[0].stations[at_lc].ring_in.norm() * (r.u / r.v).sqrt();
            let sig = s.layout.sigma_ring[l.idx()][0];
            let expect = ringsqz::coupler::lossy_enhancement(&s, l, k).unwrap().sqrt() * sig.powi(n_c as i32);
            assert!((flux - expect).abs() < 1e-10 * expect, "{u:?} {dk}: {flux} vs {expect}");
        }
    }
}
