//! Physics model of heralded cat generation: pump → squeezing map, tap
//! beamsplitter, idler click detection, fake counts, signal losses, and the
//! filter-determined temporal mode function.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    beamsplitter, loss_channel, squeezed_vacuum, vacuum, DensityMatrix, TwoModeState,
};

/// Single source of truth for a simulated run. JSON keys mirror the field
/// names exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Pump powers to simulate, in mW.
    pub pump_powers_mw: Vec<f64>,
    /// Fraction of the squeezed light tapped to the idler channel.
    pub tap_ratio: f64,
    /// Squeezing per √mW of pump, r = kappa·√P. The default is a placeholder
    /// calibration, not a measured value; refit it against squeezing data.
    pub kappa_per_sqrt_mw: f64,
    /// Loss of the signal channel (excluding the tap).
    pub signal_loss: f64,
    /// Loss-equivalent of fake counts from squeezed-light sideband photons,
    /// independent of pump power.
    pub squeezed_fake_loss: f64,
    /// Loss-equivalent of the electrical signal processing.
    pub electrical_loss: f64,
    /// SNSPD detection efficiency.
    pub snspd_efficiency: f64,
    /// Transmission of the idler filter chain (lumped into the click POVM
    /// efficiency together with `snspd_efficiency`).
    pub filter_transmission: f64,
    /// SNSPD dark counts, cps.
    pub dark_cps: f64,
    /// Fake counts from classical stray light, cps.
    pub stray_fake_cps: f64,
    /// HWHM of the idler filter cavity, Hz. Sets γ = 2π·HWHM.
    pub filter_hwhm_hz: f64,
    /// Homodyne LO phases, degrees.
    pub bases_deg: Vec<f64>,
    /// Quadrature samples per LO phase.
    pub events_per_basis: usize,
    /// Fock cutoff for single-mode states.
    pub fock_cutoff: usize,
    /// Signal-mode Fock cutoff of the two-mode tap state.
    pub signal_cutoff: usize,
    /// Idler-mode Fock cutoff of the two-mode tap state.
    pub idler_cutoff: usize,
    /// Homodyne trace sample rate, Hz.
    pub trace_sample_rate_hz: f64,
    /// Trace window before the herald (t = 0), seconds.
    pub trace_pre_s: f64,
    /// Trace window after the herald, seconds.
    pub trace_post_s: f64,
    /// RNG seed for all stochastic stages.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pump_powers_mw: vec![6.0, 12.0, 25.0, 50.0],
            tap_ratio: 0.05,
            kappa_per_sqrt_mw: 0.12,
            signal_loss: 0.19,
            squeezed_fake_loss: 0.03,
            electrical_loss: 0.02,
            snspd_efficiency: 0.63,
            filter_transmission: 1.0,
            dark_cps: 100.0,
            stray_fake_cps: 210.0,
            filter_hwhm_hz: 8.2e6,
            bases_deg: vec![0.0, 30.0, 60.0, 90.0, 120.0, 150.0],
            events_per_basis: 20_000,
            fock_cutoff: 50,
            signal_cutoff: 46,
            idler_cutoff: 12,
            trace_sample_rate_hz: 1e9,
            trace_pre_s: 400e-9,
            trace_post_s: 100e-9,
            seed: 7,
        }
    }
}

impl ExperimentConfig {
    /// Check field-level invariants; messages carry JSON pointer paths.
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(
                    format!("/{name}"),
                    format!("{v} outside [0, 1]"),
                ));
            }
            Ok(())
        };
        if self.pump_powers_mw.is_empty() {
            return Err(Error::config("/pump_powers_mw", "must be nonempty"));
        }
        for (i, p) in self.pump_powers_mw.iter().enumerate() {
            if *p < 0.0 {
                return Err(Error::config(
                    format!("/pump_powers_mw/{i}"),
                    "negative pump power",
                ));
            }
        }
        frac("tap_ratio", self.tap_ratio)?;
        frac("signal_loss", self.signal_loss)?;
        frac("squeezed_fake_loss", self.squeezed_fake_loss)?;
        frac("electrical_loss", self.electrical_loss)?;
        frac("snspd_efficiency", self.snspd_efficiency)?;
        frac("filter_transmission", self.filter_transmission)?;
        if self.kappa_per_sqrt_mw < 0.0 {
            return Err(Error::config("/kappa_per_sqrt_mw", "negative"));
        }
        if self.dark_cps < 0.0 {
            return Err(Error::config("/dark_cps", "negative rate"));
        }
        if self.stray_fake_cps < 0.0 {
            return Err(Error::config("/stray_fake_cps", "negative rate"));
        }
        if self.filter_hwhm_hz <= 0.0 {
            return Err(Error::config("/filter_hwhm_hz", "must be positive"));
        }
        if self.bases_deg.len() < 2 {
            return Err(Error::config("/bases_deg", "need at least 2 LO phases"));
        }
        if self.events_per_basis == 0 {
            return Err(Error::config("/events_per_basis", "must be positive"));
        }
        if self.fock_cutoff < 2 || self.signal_cutoff < 2 || self.idler_cutoff < 2 {
            return Err(Error::config("/fock_cutoff", "cutoffs must be at least 2"));
        }
        if self.trace_sample_rate_hz < 2.0 * 200e6 {
            return Err(Error::config(
                "/trace_sample_rate_hz",
                "must exceed twice the 200 MHz detector bandwidth",
            ));
        }
        if self.trace_pre_s <= 0.0 || self.trace_post_s < 0.0 {
            return Err(Error::config("/trace_pre_s", "invalid trace window"));
        }
        Ok(())
    }

    /// Angular bandwidth of the idler filter, γ = 2π·HWHM.
    pub fn gamma(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.filter_hwhm_hz
    }

    /// Lumped idler detection efficiency for the click POVM.
    pub fn idler_efficiency(&self) -> f64 {
        self.snspd_efficiency * self.filter_transmission
    }

    /// Uniform time grid for homodyne traces; the herald sits at t = 0.
    pub fn trace_time_grid(&self) -> Vec<f64> {
        let dt = 1.0 / self.trace_sample_rate_hz;
        let n_pre = (self.trace_pre_s / dt).round() as usize;
        let n_post = (self.trace_post_s / dt).round() as usize;
        (0..n_pre + n_post)
            .map(|i| (i as f64 - n_pre as f64) * dt)
            .collect()
    }
}

/// Normalized temporal mode amplitude on a uniform time grid.
#[derive(Debug, Clone)]
pub struct ModeFunction {
    times: Vec<f64>,
    amplitudes: Vec<f64>,
    /// Angular decay rate of the exponential envelope, rad/s.
    pub gamma: f64,
}

impl ModeFunction {
    /// Wrap amplitudes on a uniform grid, renormalizing Σ f² Δt = 1.
    pub fn new(times: Vec<f64>, amplitudes: Vec<f64>, gamma: f64) -> Result<Self> {
        if times.len() < 2 || times.len() != amplitudes.len() {
            return Err(Error::GridMismatch(format!(
                "times {} vs amplitudes {}",
                times.len(),
                amplitudes.len()
            )));
        }
        let dt = times[1] - times[0];
        if dt <= 0.0 {
            return Err(Error::GridMismatch("non-increasing time grid".into()));
        }
        let norm: f64 = amplitudes.iter().map(|f| f * f).sum::<f64>() * dt;
        if norm <= 0.0 {
            return Err(Error::Numerical("zero-norm mode function".into()));
        }
        let scale = 1.0 / norm.sqrt();
        Ok(Self {
            times,
            amplitudes: amplitudes.iter().map(|f| f * scale).collect(),
            gamma,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Σ f² Δt (unity up to roundoff after construction).
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|f| f * f).sum::<f64>() * self.dt()
    }
}

/// Outcome of the heralding pipeline at one pump power.
#[derive(Debug, Clone)]
pub struct HeraldOutcome {
    /// Heralded signal state after losses and fake-count mixing.
    pub state: DensityMatrix,
    /// Unconditioned (lossy squeezed) signal state; what a herald caused by a
    /// fake count leaves in the signal channel.
    pub unheralded: DensityMatrix,
    /// Click probability per temporal-mode attempt.
    pub p_click: f64,
    /// Expected herald rate including fakes, cps.
    pub herald_rate_cps: f64,
    /// Fraction of heralds not caused by idler photons of the filtered mode.
    pub fake_fraction: f64,
    /// Squeezing parameter used for this pump power.
    pub r: f64,
}

/// r = κ·√P (standard parametric gain scaling).
pub fn squeezing_from_pump(p_mw: f64, kappa: f64) -> Result<f64> {
    if p_mw < 0.0 {
        return Err(Error::NegativeInput(format!("pump power {p_mw} mW")));
    }
    if kappa < 0.0 {
        return Err(Error::NegativeInput(format!("kappa {kappa}")));
    }
    Ok(kappa * p_mw.sqrt())
}

/// Filter-determined mode function f(t) = √(2γ)·e^{γt} for t ≤ 0, zero
/// after the herald; discretized on `times` and renormalized.
pub fn mode_function(gamma: f64, times: &[f64]) -> Result<ModeFunction> {
    if times.len() < 2 {
        return Err(Error::GridMismatch("need at least 2 samples".into()));
    }
    if gamma <= 0.0 {
        return Err(Error::NegativeInput(format!("gamma {gamma}")));
    }
    let needed = 8.0 / gamma;
    let spanned = -times[0];
    if spanned < needed {
        return Err(Error::TruncatedMode { spanned, needed });
    }
    let amp = (2.0 * gamma).sqrt();
    let f: Vec<f64> = times
        .iter()
        .map(|&t| if t <= 0.0 { amp * (gamma * t).exp() } else { 0.0 })
        .collect();
    ModeFunction::new(times.to_vec(), f, gamma)
}

/// Tap beamsplitter on squeezed vacuum: signal keeps transmissivity
/// 1 - tap_ratio, the idler receives the rest.
pub fn entangled_tap(r: f64, tap_ratio: f64, dims: (usize, usize)) -> Result<TwoModeState> {
    if !(0.0..=1.0).contains(&tap_ratio) {
        return Err(Error::InvalidTransmissivity(tap_ratio));
    }
    let n_total = dims.0 + dims.1 - 1;
    let sq = squeezed_vacuum(r, n_total)?;
    let psi = TwoModeState::product(&sq, &vacuum(1)?);
    let mixed = beamsplitter(&psi, 1.0 - tap_ratio)?;
    mixed.truncate(dims)
}

/// Condition on a click of a non-photon-number-resolving detector with
/// efficiency η on the idler: POVM element E = I - (1-η)^n̂. Returns the
/// normalized reduced signal state and the click probability. Multi-photon
/// idler events are retained, so two-photon subtraction is included exactly.
pub fn click_herald(psi: &TwoModeState, eta_idler: f64) -> Result<(DensityMatrix, f64)> {
    if !(0.0..=1.0).contains(&eta_idler) {
        return Err(Error::config("/snspd_efficiency", "efficiency outside [0, 1]"));
    }
    let (ns, ni) = psi.dims();
    let weights: Vec<f64> = (0..ni)
        .map(|k| 1.0 - (1.0 - eta_idler).powi(k as i32))
        .collect();
    let mut p_click = 0.0;
    for m in 0..ns {
        for k in 0..ni {
            p_click += psi.amplitudes()[[m, k]].norm_sqr() * weights[k];
        }
    }
    if p_click < 1e-15 {
        return Err(Error::NoHerald(p_click));
    }
    let mut rho = Array2::<C64>::zeros((ns, ns));
    for k in 0..ni {
        if weights[k] == 0.0 {
            continue;
        }
        for m in 0..ns {
            for mp in 0..ns {
                rho[[m, mp]] += psi.amplitudes()[[m, k]]
                    * psi.amplitudes()[[mp, k]].conj()
                    * C64::new(weights[k], 0.0);
            }
        }
    }
    Ok((DensityMatrix::new(rho)?, p_click))
}

/// Full heralding pipeline at one pump power: squeeze, tap, click-condition,
/// apply signal and electrical losses, then mix in the fake-count background.
pub fn heralded_state(cfg: &ExperimentConfig, p_mw: f64) -> Result<HeraldOutcome> {
    cfg.validate()?;
    let r = squeezing_from_pump(p_mw, cfg.kappa_per_sqrt_mw)?;
    let psi = entangled_tap(r, cfg.tap_ratio, (cfg.signal_cutoff, cfg.idler_cutoff))?;
    let (conditioned, p_click) = click_herald(&psi, cfg.idler_efficiency())?;

    let apply_losses = |rho: &DensityMatrix| -> Result<DensityMatrix> {
        let a = loss_channel(rho, cfg.signal_loss)?;
        loss_channel(&a, cfg.electrical_loss)
    };
    let heralded = apply_losses(&conditioned)?;
    let unheralded = apply_losses(&psi.signal_state())?;

    // attempt rate: one temporal mode of duration π/γ
    let attempt_rate = cfg.gamma() / std::f64::consts::PI;
    let true_cps = p_click * attempt_rate;
    let incoherent_cps = cfg.stray_fake_cps + cfg.dark_cps;
    let q_stray = if true_cps + incoherent_cps > 0.0 {
        incoherent_cps / (true_cps + incoherent_cps)
    } else {
        1.0
    };
    let q = cfg.squeezed_fake_loss + q_stray;
    if q > 1.0 {
        return Err(Error::config(
            "/stray_fake_cps",
            format!("fake fraction {q:.3} exceeds 1; herald rate too low"),
        ));
    }

    let mixed = Array2::from_shape_fn((cfg.signal_cutoff, cfg.signal_cutoff), |(i, j)| {
        heralded.element(i, j) * C64::new(1.0 - q, 0.0)
            + unheralded.element(i, j) * C64::new(q, 0.0)
    });
    Ok(HeraldOutcome {
        state: DensityMatrix::new(mixed)?,
        unheralded,
        p_click,
        herald_rate_cps: true_cps + incoherent_cps,
        fake_fraction: q,
        r,
    })
}

/// Fraction of herald clicks caused by a background rate, given the total
/// observed click rate.
pub fn fake_fraction_from_rates(fake_cps: f64, total_cps: f64) -> f64 {
    if total_cps <= 0.0 {
        return 1.0;
    }
    fake_cps / total_cps
}

/// Convention for totalling a loss budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossConvention {
    /// Σ L_i, the presentation commonly used in budget tables.
    Additive,
    /// 1 - Π(1 - L_i), the physically composed total.
    Multiplicative,
}

/// Total a set of loss items under the chosen convention.
pub fn loss_budget_total(items: &[f64], convention: LossConvention) -> Result<f64> {
    for &l in items {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidLoss(l));
        }
    }
    Ok(match convention {
        LossConvention::Additive => items.iter().sum(),
        LossConvention::Multiplicative => 1.0 - items.iter().map(|l| 1.0 - l).product::<f64>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fidelity, fock, wigner_min};
    use std::f64::consts::PI;

    #[test]
    fn squeezing_scaling() {
        assert_eq!(squeezing_from_pump(0.0, 0.5).unwrap(), 0.0);
        let r1 = squeezing_from_pump(3.0, 0.12).unwrap();
        let r2 = squeezing_from_pump(12.0, 0.12).unwrap();
        assert!((r2 - 2.0 * r1).abs() < 1e-12);
        assert!(squeezing_from_pump(-1.0, 0.1).is_err());
    }

    #[test]
    fn mode_function_shape() {
        let gamma = 2.0 * PI * 8.2e6;
        let dt = 1e-9;
        let times: Vec<f64> = (0..500).map(|i| (i as f64 - 400.0) * dt).collect();
        let f = mode_function(gamma, &times).unwrap();
        assert!((f.norm_sqr() - 1.0).abs() < 1e-9);
        let peak = f
            .amplitudes()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .unwrap()
            .0;
        assert!((f.times()[peak]).abs() < 1.5 * dt);
        for (t, a) in f.times().iter().zip(f.amplitudes()) {
            if *t > 0.0 {
                assert_eq!(*a, 0.0);
            }
        }
        // grid too short
        let short: Vec<f64> = (0..100).map(|i| (i as f64 - 50.0) * dt).collect();
        assert!(matches!(
            mode_function(gamma, &short),
            Err(Error::TruncatedMode { .. })
        ));
    }

    #[test]
    fn mode_function_shift_overlap() {
        // ∫ f(t) f(t+1/γ) dt = e^{-1} for the one-sided exponential
        let gamma = 2.0 * PI * 8.2e6;
        let dt = 0.2e-9;
        let times: Vec<f64> = (0..10000).map(|i| (i as f64 - 9500.0) * dt).collect();
        let f = mode_function(gamma, &times).unwrap();
        let shift = (1.0 / gamma / dt).round() as usize;
        let mut ov = 0.0;
        for i in shift..f.len() {
            ov += f.amplitudes()[i] * f.amplitudes()[i - shift];
        }
        ov *= dt;
        assert!((ov - (-1.0_f64).exp()).abs() < 1e-3, "overlap {ov}");
    }

    #[test]
    fn tap_limits() {
        let psi = entangled_tap(0.3, 0.0, (20, 6)).unwrap();
        // idler vacuum, signal squeezed
        assert!((psi.idler_distribution()[0] - 1.0).abs() < 1e-12);
        let psi = entangled_tap(0.3, 1.0, (6, 20)).unwrap();
        assert!(psi.signal_mean_photon_number() < 1e-12);
    }

    #[test]
    fn tap_idler_photon_bookkeeping() {
        let r = 0.3_f64;
        let psi = entangled_tap(r, 0.05, (20, 8)).unwrap();
        let expect = 0.05 * r.sinh().powi(2);
        assert!((psi.idler_mean_photon_number() - expect).abs() < 1e-6);
        // photon-number bookkeeping oracle: signal + idler = total squeezed
        let total = psi.signal_mean_photon_number() + psi.idler_mean_photon_number();
        assert!((total - r.sinh().powi(2)).abs() < 1e-6);
    }

    #[test]
    fn click_herald_edge_cases() {
        let psi = entangled_tap(0.3, 0.0, (20, 6)).unwrap();
        assert!(matches!(click_herald(&psi, 0.63), Err(Error::NoHerald(_))));
        let psi = entangled_tap(0.3, 0.05, (20, 6)).unwrap();
        assert!(matches!(click_herald(&psi, 0.0), Err(Error::NoHerald(_))));
    }

    #[test]
    fn click_herald_single_photon_limit() {
        // two-photon subtraction leaves a vacuum admixture of about
        // tap/2 · [1-(1-η)²]/η and a |3⟩ admixture of about 1.5 tanh²r,
        // so the single-photon limit needs both a small tap and a small r
        let r = 0.01_f64;
        let psi = entangled_tap(r, 0.0005, (20, 8)).unwrap();
        let (rho, p_click) = click_herald(&psi, 0.63).unwrap();
        let one = fock(1, 20).unwrap().density_matrix();
        assert!(fidelity(&rho, &one).unwrap() >= 0.999);
        let first_order = 0.63 * 0.0005 * r.sinh().powi(2);
        assert!((p_click - first_order).abs() / first_order < 0.05);
    }

    #[test]
    fn click_herald_two_photon_contamination_at_default_tap() {
        // at the default 5% tap the vacuum (two-photon-subtracted)
        // population follows the exact ratio
        //   P(0)/P(1) = tap/(2(1-tap)) · [1-(1-η)²]/η
        let r = 0.05_f64;
        let eta = 0.63;
        let tap = 0.05;
        let psi = entangled_tap(r, tap, (20, 8)).unwrap();
        let (rho, _) = click_herald(&psi, eta).unwrap();
        let ratio = rho.element(0, 0).re / rho.element(1, 1).re;
        let expect = tap / (2.0 * (1.0 - tap)) * (1.0 - (1.0 - eta) * (1.0 - eta)) / eta;
        assert!((ratio - expect).abs() / expect < 0.01, "ratio {ratio} vs {expect}");
    }

    #[test]
    fn ideal_heralded_state_hits_minus_one_over_pi() {
        let cfg = ExperimentConfig {
            signal_loss: 0.0,
            squeezed_fake_loss: 0.0,
            electrical_loss: 0.0,
            dark_cps: 0.0,
            stray_fake_cps: 0.0,
            tap_ratio: 0.01, // the ideal subtraction limit also needs tap → 0
            signal_cutoff: 20,
            idler_cutoff: 8,
            ..Default::default()
        };
        // small r: nearly ideal single-photon subtraction
        let p_mw = (0.05 / cfg.kappa_per_sqrt_mw).powi(2);
        let out = heralded_state(&cfg, p_mw).unwrap();
        let (wmin, _) = wigner_min(&out.state).unwrap();
        let ideal = -1.0 / PI;
        assert!((wmin - ideal).abs() / ideal.abs() < 0.02, "wmin {wmin}");
        // parity-formula oracle
        assert!((wmin - out.state.parity() / PI).abs() < 1e-6);
    }

    #[test]
    fn stray_fake_fraction_band() {
        let f_low = fake_fraction_from_rates(210.0, 174_300.0);
        let f_high = fake_fraction_from_rates(210.0, 12_600.0);
        assert!((f_high - 0.0167).abs() < 2e-4);
        assert!((f_low - 0.0012).abs() < 1e-4);
    }

    #[test]
    fn loss_budget_conventions() {
        assert_eq!(
            loss_budget_total(&[0.0], LossConvention::Additive).unwrap(),
            0.0
        );
        assert_eq!(
            loss_budget_total(&[0.4], LossConvention::Multiplicative).unwrap(),
            0.4
        );
        let items = [0.03, 0.05, 0.02, 0.03, 0.01, 0.11];
        let add = loss_budget_total(&items, LossConvention::Additive).unwrap();
        let mul = loss_budget_total(&items, LossConvention::Multiplicative).unwrap();
        assert!((add - 0.25).abs() < 1e-12);
        assert!((mul - 0.2282).abs() < 1e-3);
        assert!(loss_budget_total(&[1.2], LossConvention::Additive).is_err());
    }

    #[test]
    fn config_validation_paths() {
        let mut cfg = ExperimentConfig::default();
        cfg.pump_powers_mw.clear();
        match cfg.validate() {
            Err(Error::Config { pointer, .. }) => assert_eq!(pointer, "/pump_powers_mw"),
            other => panic!("expected config error, got {other:?}"),
        }
        let cfg = ExperimentConfig {
            tap_ratio: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ExperimentConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back.pump_powers_mw, cfg.pump_powers_mw);
        assert_eq!(back.seed, cfg.seed);
        // unknown keys are rejected
        let bad = r#"{"tap_ratio": 0.05, "no_such_key": 1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
    }
}
