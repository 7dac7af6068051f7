//! Property-based invariants of the channel maps and analytic formulas.

use catsim::fock::{eq8_variance, loss_channel, PureState};
use catsim::herald::{loss_budget_total, LossConvention};
use ndarray::Array1;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn arb_pure_state(dim: usize) -> impl Strategy<Value = PureState> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim).prop_filter_map(
        "nonzero state vector",
        move |cs| {
            let v = Array1::from_iter(cs.iter().map(|&(re, im)| C64::new(re, im)));
            PureState::new(v).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_channel_is_trace_preserving_and_contractive(
        psi in arb_pure_state(8),
        loss in 0.0f64..1.0,
    ) {
        let rho = psi.density_matrix();
        let out = loss_channel(&rho, loss).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-10);
        prop_assert!(out.min_eigenvalue() > -1e-10);
        // mean photon number scales exactly by the transmission
        let expect = (1.0 - loss) * rho.mean_photon_number();
        prop_assert!((out.mean_photon_number() - expect).abs() < 1e-9);
    }

    #[test]
    fn quadrature_variance_formula_is_bounded(
        r in 0.0f64..1.2,
        loss in 0.0f64..1.0,
        theta in 0.0f64..std::f64::consts::PI,
    ) {
        let v = eq8_variance(r, loss, theta).unwrap();
        let lo = eq8_variance(r, loss, std::f64::consts::FRAC_PI_2).unwrap();
        let hi = eq8_variance(r, loss, 0.0).unwrap();
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        // loss mixes in vacuum, pulling every variance toward 1/2
        prop_assert!(lo <= 0.5 + 1e-12);
        prop_assert!(hi >= 0.5 - 1e-12);
        // lossless squeezed vacuum is a minimum-uncertainty state
        let pure_lo = eq8_variance(r, 0.0, std::f64::consts::FRAC_PI_2).unwrap();
        let pure_hi = eq8_variance(r, 0.0, 0.0).unwrap();
        prop_assert!((pure_lo * pure_hi - 0.25).abs() < 1e-12);
    }

    #[test]
    fn composed_losses_never_exceed_the_additive_total(
        items in prop::collection::vec(0.0f64..0.5, 1..6),
    ) {
        let add = loss_budget_total(&items, LossConvention::Additive).unwrap();
        let mul = loss_budget_total(&items, LossConvention::Multiplicative).unwrap();
        prop_assert!(mul <= add + 1e-12);
        prop_assert!((0.0..=1.0).contains(&mul));
    }
}
