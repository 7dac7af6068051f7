//! Iterative maximum-likelihood reconstruction of the density matrix from
//! phase-tagged quadrature data, plus Wigner-negativity reporting.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix};
use crate::tracegen::QuadratureDataset;

/// Settings for the binned-likelihood RρR iteration.
#[derive(Debug, Clone)]
pub struct TomoSettings {
    /// Fock cutoff of the reconstruction.
    pub cutoff: usize,
    /// Quadrature bin width.
    pub bin_width: f64,
    /// Half-extent of the bin range; extended automatically when data falls
    /// outside. 8 keeps the POVM complete to 1e-6 at cutoff 15.
    pub range: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the log-likelihood increase per sample.
    pub convergence_per_sample: f64,
    /// Detector efficiency correction; 1 = no loss correction.
    pub efficiency: f64,
}

impl Default for TomoSettings {
    fn default() -> Self {
        Self {
            cutoff: 15,
            bin_width: 0.1,
            range: 8.0,
            max_iterations: 2000,
            convergence_per_sample: 1e-10,
            efficiency: 1.0,
        }
    }
}

impl TomoSettings {
    pub fn validate(&self) -> Result<()> {
        if self.cutoff < 2 {
            return Err(Error::InvalidDimension(format!("cutoff {}", self.cutoff)));
        }
        if self.bin_width <= 0.0 {
            return Err(Error::Numerical(format!("bin width {}", self.bin_width)));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::Numerical(format!(
                "efficiency {} outside (0, 1]",
                self.efficiency
            )));
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
}

/// Reconstruction output with iteration diagnostics.
#[derive(Debug, Clone)]
pub struct MleReconstruction {
    pub rho: DensityMatrix,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub final_log_likelihood: f64,
    /// Log-likelihood after every iteration (nondecreasing up to 1e-12·|LL|).
    pub log_likelihood_trace: Vec<f64>,
}

impl MleReconstruction {
    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::Converged
    }
}

/// POVM element Π = ∫_bin |x_θ⟩⟨x_θ| dx in the Fock basis:
/// Π_nm = e^{i(n-m)θ} ∫_bin ψ_m(x) ψ_n(x) dx (5-point Gauss-Legendre).
pub fn povm_element(theta: f64, x_lo: f64, x_hi: f64, cutoff: usize) -> Array2<C64> {
    // Gauss-Legendre nodes/weights on [-1, 1]
    const NODES: [f64; 5] = [
        -0.906179845938664,
        -0.538469310105683,
        0.0,
        0.538469310105683,
        0.906179845938664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236926885056189,
        0.478628670499366,
        0.568888888888889,
        0.478628670499366,
        0.236926885056189,
    ];
    let mid = 0.5 * (x_lo + x_hi);
    let half = 0.5 * (x_hi - x_lo);
    let mut integral = Array2::<f64>::zeros((cutoff, cutoff));
    for (node, weight) in NODES.iter().zip(WEIGHTS.iter()) {
        let x = mid + half * node;
        let psi = fock::oscillator_eigenfunctions(cutoff, x);
        for m in 0..cutoff {
            for n in m..cutoff {
                integral[[m, n]] += weight * half * psi[m] * psi[n];
            }
        }
    }
    Array2::from_shape_fn((cutoff, cutoff), |(n, m)| {
        let i_mn = if m <= n {
            integral[[m, n]]
        } else {
            integral[[n, m]]
        };
        C64::from_polar(i_mn, (n as f64 - m as f64) * theta) // e^{i(n-m)θ} I_mn
    })
}

/// Apply the adjoint (Heisenberg-picture) loss channel with transmission η
/// to a POVM element, for efficiency-corrected reconstruction.
fn loss_adjoint(pi: &Array2<C64>, eta: f64) -> Array2<C64> {
    if eta >= 1.0 {
        return pi.clone();
    }
    let d = pi.nrows();
    let loss = 1.0 - eta;
    let mut lnf = vec![0.0_f64; d + 1];
    for k in 1..=d {
        lnf[k] = lnf[k - 1] + (k as f64).ln();
    }
    let mut out = Array2::<C64>::zeros((d, d));
    // Π' = Σ_k A_k† Π A_k with (A_k)_{n-k,n} = √(C(n,k) η^{n-k} L^k)
    for k in 0..d {
        let coef: Vec<f64> = (0..d)
            .map(|n| {
                if n < k {
                    0.0
                } else {
                    let ln_b = lnf[n] - lnf[k] - lnf[n - k];
                    (0.5 * (ln_b + (n - k) as f64 * eta.ln() + k as f64 * loss.ln())).exp()
                }
            })
            .collect();
        for m in k..d {
            for n in k..d {
                out[[m, n]] += C64::new(coef[m] * coef[n], 0.0) * pi[[m - k, n - k]];
            }
        }
    }
    out
}

struct BinnedData {
    povms: Vec<Array2<C64>>,
    counts: Vec<f64>,
    total: f64,
}

fn bin_dataset(data: &QuadratureDataset, settings: &TomoSettings) -> Result<BinnedData> {
    let phases = data.phases_deg();
    if phases.len() < 2 {
        return Err(Error::InsufficientPhases(phases.len()));
    }
    let w = settings.bin_width;
    let x_abs_max = data
        .records()
        .iter()
        .map(|&(_, x)| x.abs())
        .fold(0.0_f64, f64::max);
    let half_bins = ((settings.range.max(x_abs_max + w)) / w).ceil() as i64;
    let n_bins = (2 * half_bins) as usize;
    let lo = -(half_bins as f64) * w;

    let mut povms = Vec::new();
    let mut counts = Vec::new();
    let mut total = 0.0;
    for &phase_deg in &phases {
        let theta = phase_deg.to_radians();
        let values = data.values_at_phase(phase_deg);
        let mut hist = vec![0.0_f64; n_bins];
        for x in values {
            let idx = (((x - lo) / w).floor() as i64).clamp(0, n_bins as i64 - 1) as usize;
            hist[idx] += 1.0;
        }
        for (b, &cnt) in hist.iter().enumerate() {
            if cnt == 0.0 {
                continue;
            }
            let x_lo = lo + b as f64 * w;
            let mut pi = povm_element(theta, x_lo, x_lo + w, settings.cutoff);
            if settings.efficiency < 1.0 {
                pi = loss_adjoint(&pi, settings.efficiency);
            }
            povms.push(pi);
            counts.push(cnt);
            total += cnt;
        }
    }
    Ok(BinnedData {
        povms,
        counts,
        total,
    })
}

fn expectation(rho: &Array2<C64>, pi: &Array2<C64>) -> f64 {
    let d = rho.nrows();
    let mut s = 0.0;
    for m in 0..d {
        for n in 0..d {
            s += (rho[[m, n]] * pi[[n, m]]).re;
        }
    }
    s
}

/// Iterative RρR expectation-maximization reconstruction from binned
/// quadrature data. The log-likelihood is nondecreasing each iteration; a
/// diluted (damped) step is taken if it ever decreases.
pub fn mle_reconstruct(
    data: &QuadratureDataset,
    settings: &TomoSettings,
) -> Result<MleReconstruction> {
    settings.validate()?;
    if data.is_empty() {
        return Err(Error::Numerical("empty quadrature dataset".into()));
    }
    let binned = bin_dataset(data, settings)?;
    let d = settings.cutoff;
    let mut rho = Array2::<C64>::eye(d) / C64::new(d as f64, 0.0);

    let log_likelihood = |probs: &[f64]| -> f64 {
        probs
            .iter()
            .zip(&binned.counts)
            .map(|(&p, &n)| n * p.max(1e-300).ln())
            .sum()
    };

    let probs_of = |rho: &Array2<C64>| -> Vec<f64> {
        binned.povms.iter().map(|pi| expectation(rho, pi)).collect()
    };

    let mut probs = probs_of(&rho);
    let mut ll = log_likelihood(&probs);
    let mut trace_ll = Vec::with_capacity(64);
    let mut stop_reason = StopReason::MaxIterations;
    let mut iterations = settings.max_iterations;

    for iter in 0..settings.max_iterations {
        // R = Σ_b (n_b / N) Π_b / p_b
        let mut r_op = Array2::<C64>::zeros((d, d));
        for ((pi, &n_b), &p_b) in binned.povms.iter().zip(&binned.counts).zip(&probs) {
            let w = C64::new(n_b / binned.total / p_b.max(1e-300), 0.0);
            r_op.scaled_add(w, pi);
        }
        let candidate = normalize(&r_op.dot(&rho).dot(&r_op));
        let cand_probs = probs_of(&candidate);
        let cand_ll = log_likelihood(&cand_probs);

        let (next, next_probs, next_ll) = if cand_ll >= ll {
            (candidate, cand_probs, cand_ll)
        } else {
            // diluted step: (I + εR)/(1+ε) with ε = 0.5
            let eps = 0.5;
            let mut damped = Array2::<C64>::eye(d);
            damped.scaled_add(C64::new(eps, 0.0), &r_op);
            let dn = normalize(&damped.dot(&rho).dot(&damped));
            let dp = probs_of(&dn);
            let dll = log_likelihood(&dp);
            if dll < ll {
                // cannot improve; treat as converged at a fixed point
                iterations = iter;
                stop_reason = StopReason::Converged;
                break;
            }
            (dn, dp, dll)
        };

        let gain = next_ll - ll;
        rho = next;
        probs = next_probs;
        ll = next_ll;
        trace_ll.push(ll);
        if gain < settings.convergence_per_sample * binned.total {
            iterations = iter + 1;
            stop_reason = StopReason::Converged;
            break;
        }
    }

    // enforce exact Hermiticity against accumulated roundoff
    let herm = Array2::from_shape_fn((d, d), |(i, j)| 0.5 * (rho[[i, j]] + rho[[j, i]].conj()));
    Ok(MleReconstruction {
        rho: DensityMatrix::new(herm)?,
        stop_reason,
        iterations,
        final_log_likelihood: ll,
        log_likelihood_trace: trace_ll,
    })
}

fn normalize(m: &Array2<C64>) -> Array2<C64> {
    let tr: f64 = (0..m.nrows()).map(|i| m[[i, i]].re).sum();
    m / C64::new(tr, 0.0)
}

/// Wigner minimum of a reconstructed state together with the independent
/// parity value (1/π)Σ(-1)ⁿρ_nn at the origin.
#[derive(Debug, Clone)]
pub struct NegativityReport {
    pub wigner_min: f64,
    pub location: (f64, f64),
    pub parity_value: f64,
}

pub fn negativity_report(rho: &DensityMatrix) -> Result<NegativityReport> {
    let (wigner_min, location) = fock::wigner_min(rho)?;
    Ok(NegativityReport {
        wigner_min,
        location,
        parity_value: rho.parity() / std::f64::consts::PI,
    })
}
