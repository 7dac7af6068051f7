//! End-to-end checks of the heralding pipeline: monotonicity of the click
//! statistics, loss behaviour of the Wigner negativity, and stability of the
//! results against the Fock cutoffs.

use catsim::fock::{wigner_min, wigner_point};
use catsim::herald::{click_herald, entangled_tap, heralded_state};
use catsim::ExperimentConfig;

fn lossless_config() -> ExperimentConfig {
    ExperimentConfig {
        signal_loss: 0.0,
        squeezed_fake_loss: 0.0,
        electrical_loss: 0.0,
        dark_cps: 0.0,
        stray_fake_cps: 0.0,
        signal_cutoff: 30,
        idler_cutoff: 8,
        fock_cutoff: 30,
        ..Default::default()
    }
}

#[test]
fn lossless_herald_is_odd_dominated() {
    // without losses and with a small tap the heralded state is close to an
    // odd cat: even Fock populations stay perturbative, parity is negative
    let cfg = ExperimentConfig {
        tap_ratio: 0.01,
        ..lossless_config()
    };
    let out = heralded_state(&cfg, 12.0).unwrap();
    let pops = out.state.populations();
    let even: f64 = pops.iter().step_by(2).sum();
    assert!(even < 0.02, "even population {even}");
    assert!(out.state.parity() < -0.9);
}

#[test]
fn click_probability_monotone() {
    let base = |r: f64, tap: f64, eta: f64| -> f64 {
        let psi = entangled_tap(r, tap, (40, 10)).unwrap();
        click_herald(&psi, eta).unwrap().1
    };
    // in squeezing
    let mut prev = 0.0;
    for r in [0.1, 0.3, 0.5, 0.7] {
        let p = base(r, 0.05, 0.63);
        assert!(p > prev, "p_click not increasing in r at {r}");
        prev = p;
    }
    // in tap ratio
    prev = 0.0;
    for tap in [0.01, 0.05, 0.1, 0.2] {
        let p = base(0.5, tap, 0.63);
        assert!(p > prev, "p_click not increasing in tap at {tap}");
        prev = p;
    }
    // in detector efficiency
    prev = 0.0;
    for eta in [0.2, 0.4, 0.63, 0.9] {
        let p = base(0.5, 0.05, eta);
        assert!(p > prev, "p_click not increasing in eta at {eta}");
        prev = p;
    }
}

#[test]
fn fake_fraction_decreases_with_pump() {
    // the incoherent background is fixed, so a stronger pump (higher true
    // herald rate) dilutes the fake fraction
    let cfg = ExperimentConfig::default();
    let mut prev = f64::INFINITY;
    for p in [6.0, 12.0, 25.0, 50.0] {
        let out = heralded_state(&cfg, p).unwrap();
        assert!(out.fake_fraction < prev, "fake fraction rose at {p} mW");
        assert!(out.fake_fraction > cfg.squeezed_fake_loss);
        prev = out.fake_fraction;
    }
}

#[test]
fn heralded_state_is_physical() {
    let cfg = ExperimentConfig::default();
    for p in [6.0, 50.0] {
        let out = heralded_state(&cfg, p).unwrap();
        assert!((out.state.trace() - 1.0).abs() < 1e-10);
        assert!(out.state.min_eigenvalue() > -1e-10);
        assert!(out.state.purity() <= 1.0 + 1e-10);
        assert!(out.p_click > 0.0 && out.p_click < 1.0);
    }
}

#[test]
fn negativity_degrades_monotonically_with_signal_loss() {
    let mut prev = f64::NEG_INFINITY;
    for loss in [0.0, 0.1, 0.2, 0.35] {
        let cfg = ExperimentConfig {
            signal_loss: loss,
            ..lossless_config()
        };
        let out = heralded_state(&cfg, 12.0).unwrap();
        let (wmin, _) = wigner_min(&out.state).unwrap();
        assert!(wmin > prev, "W_min did not rise with loss {loss}");
        prev = wmin;
    }
}

#[test]
fn fake_mixing_is_convex() {
    // the output state is (1-q)·heralded + q·unheralded; its Wigner function
    // must sit between the two components pointwise
    let cfg = ExperimentConfig::default();
    let out = heralded_state(&cfg, 12.0).unwrap();
    let q = out.fake_fraction;

    let pure_cfg = ExperimentConfig {
        dark_cps: 0.0,
        stray_fake_cps: 0.0,
        squeezed_fake_loss: 0.0,
        ..cfg.clone()
    };
    let pure = heralded_state(&pure_cfg, 12.0).unwrap();
    for (x, p) in [(0.0, 0.0), (0.8, 0.0), (0.0, 0.5), (-0.4, -0.4)] {
        let w = wigner_point(&out.state, x, p);
        let wh = wigner_point(&pure.state, x, p);
        let wu = wigner_point(&out.unheralded, x, p);
        let expect = (1.0 - q) * wh + q * wu;
        assert!((w - expect).abs() < 1e-10, "convexity broken at ({x},{p})");
    }
}

#[test]
fn cutoffs_are_converged_at_max_pump() {
    let cfg = ExperimentConfig::default();
    let big = ExperimentConfig {
        fock_cutoff: 60,
        signal_cutoff: 54,
        idler_cutoff: 14,
        ..cfg.clone()
    };
    let a = heralded_state(&cfg, 50.0).unwrap();
    let b = heralded_state(&big, 50.0).unwrap();
    let (wa, loc_a) = wigner_min(&a.state).unwrap();
    let (wb, _) = wigner_min(&b.state).unwrap();
    assert!((wa - wb).abs() < 1e-4, "W_min cutoff drift {}", (wa - wb).abs());
    // the minimum sits near the origin on the squeezed axis
    assert!(loc_a.0.hypot(loc_a.1) < 1.5);
    assert!((a.p_click - b.p_click).abs() / a.p_click < 1e-6);
}
