//! Analytic/deterministic curves over a pump grid: squeezing levels from the
//! variance law and Wigner minima from the full heralding model, with no
//! Monte Carlo stage.

use catsim::fock::{eq8_variance, wigner_min};
use catsim::herald::{heralded_state, squeezing_from_pump};
use catsim::{ExperimentConfig, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One row of the theory table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryRow {
    pub pump_mw: f64,
    pub r: f64,
    /// Squeezed-quadrature variance relative to vacuum, dB.
    pub variance_sq_db: f64,
    /// Anti-squeezed-quadrature variance relative to vacuum, dB.
    pub variance_antisq_db: f64,
    /// Wigner minimum of the modelled heralded state.
    pub wigner_min_theory: f64,
}

/// Loss seen by the squeezed light during characterization: tap, signal
/// channel, and electrical processing composed physically.
pub fn characterization_loss(cfg: &ExperimentConfig) -> f64 {
    1.0 - (1.0 - cfg.tap_ratio) * (1.0 - cfg.signal_loss) * (1.0 - cfg.electrical_loss)
}

fn db(variance: f64) -> f64 {
    10.0 * (variance / 0.5).log10()
}

/// Build the table for the given pump powers.
pub fn theory_curves(cfg: &ExperimentConfig, pumps: &[f64]) -> Result<Vec<TheoryRow>> {
    cfg.validate()?;
    let loss = characterization_loss(cfg);
    pumps
        .iter()
        .map(|&p| {
            let r = squeezing_from_pump(p, cfg.kappa_per_sqrt_mw)?;
            let outcome = heralded_state(cfg, p)?;
            let (w_min, _) = wigner_min(&outcome.state)?;
            Ok(TheoryRow {
                pump_mw: p,
                r,
                variance_sq_db: db(eq8_variance(r, loss, std::f64::consts::FRAC_PI_2)?),
                variance_antisq_db: db(eq8_variance(r, loss, 0.0)?),
                wigner_min_theory: w_min,
            })
        })
        .collect()
}

/// Write the table as CSV.
pub fn write_theory_csv(mut w: impl Write, rows: &[TheoryRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "pump_mw,r,variance_sq_db,variance_antisq_db,wigner_min_theory"
    )?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.pump_mw, row.r, row.variance_sq_db, row.variance_antisq_db, row.wigner_min_theory
        )?;
    }
    Ok(())
}
