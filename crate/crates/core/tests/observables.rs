use ndarray::Array2;
use proptest::prelude::*;
use ringsqz::device::{Label, Window};
use ringsqz::linalg::Mat;
use ringsqz::observables::*;
use ringsqz::squeeze::Bogoliubov;
use ringsqz::C64;
use std::f64::consts::PI;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Independent two-mode squeezers with one signal and one idler mode per bin.
fn tmsv(rs: &[f64]) -> Bogoliubov {
    let n = rs.len();
    let diag = |f: fn(f64) -> f64| Array2::from_shape_fn((n, n), |(i, j)| if i == j { c(f(rs[i])) } else { C64::default() });
    Bogoliubov { nc: 1, nk: n, v_ss: diag(f64::cosh), w_si: diag(f64::sinh), v_ii: diag(f64::cosh), w_is: diag(f64::sinh) }
}

/// Signal bin i paired with idler bin n−1−i, as energy conservation requires
/// around a common centre.
fn tmsv_mirrored(r: f64, n: usize) -> Bogoliubov {
    let diag = Array2::from_shape_fn((n, n), |(i, j)| if i == j { c(r.cosh()) } else { C64::default() });
    let anti = Array2::from_shape_fn((n, n), |(i, j)| if i + j == n - 1 { c(r.sinh()) } else { C64::default() });
    Bogoliubov { nc: 1, nk: n, v_ss: diag.clone(), w_si: anti.clone(), v_ii: diag, w_is: anti }
}

fn dft(n: usize) -> Mat {
    Array2::from_shape_fn((n, n), |(i, j)| C64::from_polar(1.0 / (n as f64).sqrt(), 2.0 * PI * (i * j) as f64 / n as f64))
}

fn window(n: usize) -> Window {
    let c = (n - 1) as f64 / 2.0;
    Window { label: Label::S, k_center: 1.0, dk: 1e-3, dks: (0..n).map(|i| (i as f64 - c) * 1e-3).collect(), v: 150.0 }
}

#[test]
fn single_pair_mode_statistics() {
    for r in [0.05, 0.5, 1.2] {
        let m = output_moments(&tmsv(&[r]));
        let n = r.sinh().powi(2);
        let g = correlations(&m).unwrap();
        assert!((g.g2_s - 2.0).abs() < 1e-12);
        assert!((g.g2_i - 2.0).abs() < 1e-12);
        assert!((g.g11_si - (2.0 + 1.0 / n)).abs() < 1e-9 * (1.0 + 1.0 / n));
    }
}

#[test]
fn multimode_g2_and_rotation_invariance() {
    let rs = [0.3, 0.2, 0.1, 0.05];
    let ns: Vec<f64> = rs.iter().map(|r: &f64| r.sinh().powi(2)).collect();
    let (s1, s2): (f64, f64) = (ns.iter().sum(), ns.iter().map(|x| x * x).sum());
    let expect = 1.0 + s2 / (s1 * s1);
    let mut bog = tmsv(&rs);
    let g = correlations(&output_moments(&bog)).unwrap();
    assert!((g.g2_s - expect).abs() < 1e-12);
    // mixing the output signal bins does not change g2
    let u = dft(4);
    bog.v_ss = u.dot(&bog.v_ss);
    bog.w_si = u.dot(&bog.w_si);
    let m = output_moments(&bog);
    let g = correlations(&m).unwrap();
    assert!((g.g2_s - expect).abs() < 1e-12);
    let (ev, sv) = spectral_decomposition(&m);
    let mut sorted = ns.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for (a, b) in ev.iter().zip(&sorted) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, r) in sv.iter().zip(rs) {
        assert!((a - r.sinh() * r.cosh()).abs() < 1e-12);
    }
    let (sd, sym) = bog.symplectic_defect();
    assert!(sd < 1e-12 && sym < 1e-12);
}

#[test]
fn vacuum_has_no_correlations_and_unit_variance() {
    let m = output_moments(&tmsv(&[0.0, 0.0, 0.0]));
    assert!(matches!(correlations(&m), Err(ringsqz::Error::Undefined(_))));
    let w = window(3);
    for p in squeezing_spectrum(&m, &w, &w, &omega_grid(0.15, 7)).unwrap() {
        assert_eq!(p.v_min, 1.0);
        assert_eq!(p.v_max, 1.0);
    }
}

#[test]
fn pure_squeezing_reaches_the_squeezed_variance() {
    let r = 0.7;
    let m = output_moments(&tmsv_mirrored(r, 5));
    let w = window(5);
    let sp = squeezing_spectrum(&m, &w, &w, &omega_grid(0.3, 9)).unwrap();
    for p in &sp {
        assert!((p.v_min - (-2.0 * r).exp()).abs() < 1e-12);
        assert!((p.v_max - (2.0 * r).exp()).abs() < 1e-12);
        assert!((p.v_min * p.v_max - 1.0).abs() < 1e-12);
        assert!((variance(2.0 * r.sinh().powi(2), c(r.sinh() * r.cosh()), p.phi_star) - p.v_min).abs() < 1e-12);
    }
    assert!(squeezing_spectrum(&m, &w, &w, &[0.31]).is_err());
    assert!(spectrum_terms(&m, &w, &window(3)).is_err());
}

#[test]
fn spectrum_interpolates_between_bins() {
    let base = tmsv_mirrored(0.5, 5);
    let shaped: Vec<f64> = (0..5).map(|i| 1.0 + 0.2 * i as f64).collect();
    let mut bog = base.clone();
    // unequal gains per bin, still unitary on the signal side
    for i in 0..5 {
        bog.v_ss[[i, i]] = C64::from_polar(1.0, shaped[i]) * base.v_ss[[i, i]];
        bog.w_si.row_mut(i).mapv_inplace(|z| z * C64::from_polar(1.0, shaped[i]));
    }
    let m = output_moments(&bog);
    let w = window(5);
    let terms = spectrum_terms(&m, &w, &w).unwrap();
    let mid = 0.5 * (w.omega(1) + w.omega(2));
    let p = &squeezing_spectrum(&m, &w, &w, &[mid]).unwrap()[0];
    let n = 0.5 * (terms[1].1 + terms[2].1);
    let mm = 0.5 * (terms[1].2 + terms[2].2);
    assert!((p.v_min - (1.0 + n - 2.0 * mm.norm())).abs() < 1e-12);
}

#[test]
fn pure_state_and_loss_budget() {
    let bog = tmsv(&[0.4, 0.2]);
    let (n, m) = full_moments(&bog);
    assert!(purity_defect(&n, &m) < 1e-12);
    let (herm, tr, ev) = moment_defects(&output_moments(&bog));
    assert!(herm < 1e-15 && tr < 1e-15 && ev >= 0.0);

    // two channels per bin; a beam splitter sends part of each signal into channel 1
    let (rs, t) = ([0.4, 0.2], 0.8f64);
    let base = tmsv(&rs);
    let (nk, nc) = (2, 2);
    let mut v_ss = Array2::zeros((4, 4));
    let mut w_si = Array2::zeros((4, 4));
    let mut v_ii = Array2::zeros((4, 4));
    let mut w_is = Array2::zeros((4, 4));
    let rt = (1.0 - t * t).sqrt();
    for i in 0..nk {
        let (a, b) = (i * nc, i * nc + 1);
        v_ss[[a, a]] = c(t * base.v_ss[[i, i]].re);
        v_ss[[a, b]] = c(rt);
        v_ss[[b, a]] = c(-rt * base.v_ss[[i, i]].re);
        v_ss[[b, b]] = c(t);
        w_si[[a, a]] = c(t * base.w_si[[i, i]].re);
        w_si[[b, a]] = c(-rt * base.w_si[[i, i]].re);
        v_ii[[a, a]] = base.v_ii[[i, i]];
        v_ii[[b, b]] = c(1.0);
        w_is[[a, a]] = base.w_is[[i, i]];
    }
    let lossy = Bogoliubov { nc, nk, v_ss, w_si, v_ii, w_is };
    let (sd, sym) = lossy.symplectic_defect();
    assert!(sd < 1e-12 && sym < 1e-12);
    let pn = photon_numbers(&lossy);
    let n0: f64 = rs.iter().map(|r: &f64| r.sinh().powi(2)).sum();
    assert!((pn.total[0] - n0).abs() < 1e-12);
    assert!((pn.total[1] - n0).abs() < 1e-12);
    assert!((pn.output[0] - t * t * n0).abs() < 1e-12);
    assert!((pn.lost()[0] - (1.0 - t * t) * n0).abs() < 1e-12);
    assert!(pn.budget_defect() < 1e-12);
    let (n, m) = full_moments(&lossy);
    assert!(purity_defect(&n, &m) < 1e-12);
    // loss on one arm leaves both normalized correlations unchanged
    let g = correlations(&output_moments(&lossy)).unwrap();
    let g_pure = correlations(&output_moments(&base)).unwrap();
    assert!((g.g2_s - g_pure.g2_s).abs() < 1e-12);
    assert!((g.g11_si - g_pure.g11_si).abs() < 1e-9 * g_pure.g11_si);
    // but the output state alone is no longer pure
    let out = output_moments(&lossy);
    assert!(purity_defect(&out.n_ss, &out.m_si) > 1e-3);
}

#[test]
fn rates_from_linear_growth() {
    let samples: Vec<(f64, f64, f64)> = (0..10).map(|i| (100.0 * i as f64, 1.0 + 2e-3 * i as f64, 1e-3 * i as f64)).collect();
    let r = cw_pair_rates(&samples, 1e-6).unwrap();
    assert!((r.total - 2e-5 * 1e12).abs() < 1e-3);
    assert!((r.output - 1e-5 * 1e12).abs() < 1e-3);
    assert!((r.lost - 1e-5 * 1e12).abs() < 1e-3);
    let bent: Vec<(f64, f64, f64)> = samples.iter().map(|&(t, n, o)| (t, n * n, o)).collect();
    assert!(cw_pair_rates(&bent, 1e-3).is_err());
    assert!(cw_pair_rates(&samples[..3], 1.0).is_err());
}

#[test]
fn omega_grid_is_symmetric() {
    let g = omega_grid(2.0, 5);
    assert_eq!(g, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    assert_eq!(omega_grid(2.0, 1), vec![0.0]);
}

proptest! {
    #[test]
    fn variance_lies_between_extrema(r in 0.0f64..2.0, extra in 0.0f64..3.0, arg in -PI..PI, phi in -PI..PI) {
        // physical terms satisfy |m| ≤ √(n/2 (n/2 + 1))
        let n = 2.0 * r.sinh().powi(2) + extra;
        let m = C64::from_polar(r.sinh() * r.cosh(), arg);
        let (lo, hi, phi_star) = variance_extrema(n, m);
        let v = variance(n, m, phi);
        prop_assert!(lo <= v + 1e-9 && v <= hi + 1e-9);
        prop_assert!(lo > 0.0);
        prop_assert!((variance(n, m, phi_star) - lo).abs() < 1e-9 * hi);
        prop_assert!((-PI..PI).contains(&phi_star));
    }
}
