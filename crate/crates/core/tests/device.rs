use ringsqz::coupler::lossy_enhancement;
use ringsqz::device::*;
use ringsqz::Error;
use std::f64::consts::PI;

fn device(finesse: f64, eta: f64, n: usize) -> DeviceSpec {
    DeviceParams { finesse, escape_efficiency: eta, ring_phantoms: n, ..Default::default() }.build().unwrap()
}

// plain bisection on π√ρ − F(1−ρ)
fn rho_bisect(f: f64) -> f64 {
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if PI * m.sqrt() - f * (1.0 - m) < 0.0 { a = m } else { b = m }
    }
    0.5 * (a + b)
}

#[test]
fn finesse_root_matches_bisection() {
    for f in [2.0, 10.0, 50.0, 780.0, 1e4] {
        let rho = rho_from_finesse(f).unwrap();
        assert!((rho - rho_bisect(f)).abs() < 1e-13, "F={f}");
    }
    let eps = 1.0 - rho_from_finesse(780.0).unwrap();
    assert!((eps - 4.02e-3).abs() < 0.01e-3, "{eps}");
}

#[test]
fn calibration_round_trips() {
    for (f, eta, n) in [(10.0, 0.5, 4), (100.0, 0.75, 20), (780.0, 0.75, 20), (1000.0, 0.9, 7), (50.0, 1.0, 0)] {
        let s = device(f, eta, n);
        for l in Label::ALL {
            let m = figures_of_merit(&s, l).unwrap();
            assert!((m.finesse / f - 1.0).abs() < 1e-6, "F {f}: {}", m.finesse);
            assert!((m.eta_esc / eta - 1.0).abs() < 1e-6, "eta {eta}: {}", m.eta_esc);
        }
    }
}

#[test]
fn lossless_calibration_has_unit_phantoms() {
    let c = calibrate_coupling(200.0, 1.0, 10, 0, 100.0, 0.0).unwrap();
    assert_eq!(c.xi, 1.0);
    assert_eq!(c.sigma_ph, 1.0);
}

#[test]
fn phantom_couplings_are_unitary_splices() {
    let s = device(300.0, 0.6, 13);
    for sig in s.layout.sigma_ring.iter().chain(&s.layout.sigma_wg).flatten() {
        let k = PhantomLayout::kappa(*sig);
        assert!((sig * sig + k * k - 1.0).abs() < 1e-15);
    }
    for l in Label::ALL {
        let m = figures_of_merit(&s, l).unwrap();
        assert!((s.xi(l) - m.xi).abs() < 1e-15);
    }
}

#[test]
fn operating_point_linewidth() {
    // Γ_S ≈ 128 MHz at F = 780, R = 120 µm, v = 1.5e8 m/s
    let s = device(780.0, 0.75, 20);
    let m = figures_of_merit(&s, Label::S).unwrap();
    assert!((m.gamma_mhz - 128.0).abs() < 1.5, "{}", m.gamma_mhz);
}

#[test]
fn path_map_examples() {
    let s = DeviceParams { ring_group_velocity: Some(75.0), coupler_fraction: 0.25, ..Default::default() }
        .build()
        .unwrap();
    let (l0, _) = map_path(&s, Label::P, 0.0).unwrap();
    assert_eq!(l0, 0.0);
    let (_, lt) = map_path(&s, Label::P, s.ring_length).unwrap();
    let expect = 2.0 * (s.ring_length - 0.25 * s.coupler_length);
    assert!((lt - expect).abs() < 1e-9 * expect);
    // slope integration: dl/dz = (1+q)/2 inside the coupler, q outside
    let n = 20000;
    let h = s.ring_length / n as f64;
    let integral: f64 = (0..n)
        .map(|i| {
            let z = (i as f64 + 0.5) * h;
            if z < s.coupler_length { 1.5 } else { 2.0 }
        })
        .sum::<f64>()
        * h;
    assert!((integral - lt).abs() < 1e-6 * lt);
    let m = DeviceParams::default().build().unwrap();
    let (l, lt) = map_path(&m, Label::S, 37.0).unwrap();
    assert!((l - 37.0).abs() < 1e-12 && (lt - m.ring_length).abs() < 1e-9);
    assert!(matches!(map_path(&m, Label::S, -1.0), Err(Error::Domain(_))));
    assert!(matches!(map_path(&m, Label::S, m.ring_length * 1.01), Err(Error::Domain(_))));
}

fn half_max_offset(s: &DeviceSpec, l: Label, sign: f64) -> f64 {
    let k0 = s.res(l).k_wg;
    let peak = lossy_enhancement(s, l, k0).unwrap();
    let (mut a, mut b) = (0.0, 1e-2);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if lossy_enhancement(s, l, k0 + sign * m).unwrap() > 0.5 * peak { a = m } else { b = m }
    }
    0.5 * (a + b)
}

#[test]
fn scanned_linewidth_matches_closed_form() {
    for f in [100.0, 780.0] {
        let s = device(f, 0.75, 20);
        for l in Label::ALL {
            let m = figures_of_merit(&s, l).unwrap();
            let hw = 0.5 * (half_max_offset(&s, l, 1.0) + half_max_offset(&s, l, -1.0)) * s.res(l).v;
            assert!((hw / m.gamma_omega - 1.0).abs() < 0.01, "F={f} {l:?}: {hw} vs {}", m.gamma_omega);
        }
    }
}

#[test]
fn enhancement_is_even_and_peaked() {
    let s = device(200.0, 0.8, 10);
    let k0 = s.res(Label::P).k_wg;
    let peak = lossy_enhancement(&s, Label::P, k0).unwrap();
    for j in 1..50 {
        let dk = j as f64 * 3e-6;
        let a = lossy_enhancement(&s, Label::P, k0 + dk).unwrap();
        let b = lossy_enhancement(&s, Label::P, k0 - dk).unwrap();
        assert!((a - b).abs() < 1e-9 * peak);
        assert!(a < peak);
    }
}

#[test]
fn signal_and_idler_straddle_the_pump() {
    let s = device(780.0, 0.75, 20);
    let w = |l| s.res(l).omega;
    assert!((w(Label::S) + w(Label::I) - 2.0 * w(Label::P)).abs() < 1e-12 * w(Label::P));
}

#[test]
fn k_grid_construction() {
    let s = device(100.0, 0.75, 4);
    let g = figures_of_merit(&s, Label::S).unwrap().gamma_omega;
    let w = build_k_grid(&s, Label::S, 2.0, 3).unwrap();
    let d = 2.0 * g / s.res(Label::S).v;
    assert!((w.dk - d).abs() < 1e-15 * d.max(1.0));
    assert_eq!(w.dks, vec![-w.dk, 0.0, w.dk]);
    // F = 780, n_r = 10: the window is far narrower than the FSR
    let s = device(780.0, 0.75, 4);
    let m = figures_of_merit(&s, Label::P).unwrap();
    assert!(10.0 * m.gamma_omega < 0.05 * m.fsr_omega);
    assert!(build_k_grid(&s, Label::P, 10.0, 41).is_ok());
    assert!(matches!(build_k_grid(&s, Label::P, 1.1 * 780.0, 41), Err(Error::Config(_))));
    assert!(matches!(build_k_grid(&s, Label::P, 10.0, 40), Err(Error::Config(_))));
}

#[test]
fn infeasible_and_unphysical_targets_are_rejected() {
    assert!(DeviceParams { escape_efficiency: 0.0, ..Default::default() }.build().is_err());
    assert!(DeviceParams { escape_efficiency: 1.2, ..Default::default() }.build().is_err());
    assert!(DeviceParams { finesse: -3.0, ..Default::default() }.build().is_err());
    assert!(matches!(
        DeviceParams { ring_phantoms: 0, escape_efficiency: 0.5, ..Default::default() }.build(),
        Err(Error::Unphysical(_))
    ));
}
