//! End-to-end run orchestration: simulate each pump setting, run the
//! analysis chain (mode estimation → quadrature extraction → maximum
//! likelihood reconstruction → negativity), and emit a file manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use catsim::fock::{auto_grid_spec, wigner, wigner_min, DensityMatrix};
use catsim::herald::{heralded_state, mode_function, HeraldOutcome, ModeFunction};
use catsim::modeest::{extract_quadrature, mode_overlap, principal_mode, write_mode_csv};
use catsim::tomo::{mle_reconstruct, negativity_report, MleReconstruction, TomoSettings};
use catsim::tracegen::{sample_quadratures, synth_traces, HomodyneTrace, NoiseModel};
use catsim::{Error, ExperimentConfig, QuadratureDataset, Result};
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fit::{fit_eq8, variances_by_phase, PumpVariances};

/// Knobs of a pipeline run that live outside the experiment config.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Skip trace synthesis and sample quadratures directly in the known
    /// temporal mode (much faster; bypasses the mode-estimation stage).
    pub no_trace_stage: bool,
    /// Restrict the run to these pump powers (must be a subset of the
    /// configured ones); `None` runs all.
    pub pumps: Option<Vec<f64>>,
    /// Override the config seed.
    pub seed: Option<u64>,
    /// Reconstruction settings.
    pub tomo: TomoSettings,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            no_trace_stage: false,
            pumps: None,
            seed: None,
            tomo: TomoSettings::default(),
        }
    }
}

/// Files emitted for one pump setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PumpPaths {
    pub mode_csv: PathBuf,
    pub quadratures_csv: PathBuf,
    pub rho_json: PathBuf,
    pub wigner_csv: PathBuf,
}

/// Summary metrics for one pump setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PumpSummary {
    pub pump_mw: f64,
    /// Squeezing parameter used by the model.
    pub r: f64,
    /// Squeezing parameter recovered from the variance fit.
    pub r_fit: f64,
    pub p_click: f64,
    pub herald_rate_cps: f64,
    pub fake_fraction: f64,
    /// Wigner minimum of the reconstructed state.
    pub wigner_min: f64,
    /// Wigner minimum of the modelled (ground-truth) state.
    pub wigner_min_model: f64,
    /// (1/π)·⟨parity⟩ of the reconstruction — the origin value of W.
    pub parity_value: f64,
    /// Overlap between the estimated and planted temporal modes
    /// (absent on the no-trace path).
    pub mode_overlap: Option<f64>,
    /// Estimated mode decay rate, rad/s (absent on the no-trace path).
    pub gamma_hat: Option<f64>,
    pub mle_iterations: usize,
    pub mle_converged: bool,
    pub paths: PumpPaths,
}

/// Manifest of one complete run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the canonicalized config JSON; stable under key reordering.
    pub config_hash: String,
    pub seed: u64,
    /// Shared loss from the joint variance fit across pump settings.
    pub loss_fit: f64,
    pub pumps: Vec<PumpSummary>,
}

/// SHA-256 over the canonical (key-sorted) JSON form of the config.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    // serde_json's Value object is a sorted map, so serializing the Value
    // canonicalizes key order
    let value = serde_json::to_value(cfg)?;
    let canon = serde_json::to_string(&value)?;
    let mut h = Sha256::new();
    h.update(canon.as_bytes());
    Ok(format!("{:x}", h.finalize()))
}

/// Deterministic sub-seed for one stage, derived by hashing the run seed
/// together with a stage tag.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Serialize a density matrix as {dim, re, im}.
pub fn rho_to_json(rho: &DensityMatrix) -> serde_json::Value {
    let d = rho.dim();
    let re: Vec<Vec<f64>> = (0..d)
        .map(|m| (0..d).map(|n| rho.element(m, n).re).collect())
        .collect();
    let im: Vec<Vec<f64>> = (0..d)
        .map(|m| (0..d).map(|n| rho.element(m, n).im).collect())
        .collect();
    serde_json::json!({ "dim": d, "re": re, "im": im })
}

/// Parse a density matrix from the {dim, re, im} form.
pub fn rho_from_json(v: &serde_json::Value) -> Result<DensityMatrix> {
    let d = v["dim"]
        .as_u64()
        .ok_or_else(|| Error::Numerical("missing dim".into()))? as usize;
    let get = |key: &str, m: usize, n: usize| -> Result<f64> {
        v[key][m][n]
            .as_f64()
            .ok_or_else(|| Error::Numerical(format!("missing {key}[{m}][{n}]")))
    };
    let mut elems = Array2::<C64>::zeros((d, d));
    for m in 0..d {
        for n in 0..d {
            elems[[m, n]] = C64::new(get("re", m, n)?, get("im", m, n)?);
        }
    }
    DensityMatrix::new(elems)
}

fn write_wigner_csv(path: &Path, rho: &DensityMatrix) -> Result<()> {
    let grid = wigner(rho, &auto_grid_spec(rho))?;
    let mut out = String::from("x,p,w\n");
    let xs = grid.xs();
    let ps = grid.ps();
    for (i, x) in xs.iter().enumerate() {
        for (j, p) in ps.iter().enumerate() {
            out.push_str(&format!("{x},{p},{}\n", grid.values[[i, j]]));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Everything computed for one pump before any file is written.
struct PumpResult {
    pump_mw: f64,
    outcome: HeraldOutcome,
    mode_est: ModeFunction,
    overlap: Option<f64>,
    gamma_hat: Option<f64>,
    dataset: QuadratureDataset,
    reconstruction: MleReconstruction,
    wigner_min_model: f64,
    squeezing_variances: PumpVariances,
}

fn basis_tag(pump: f64, basis_idx: usize) -> String {
    format!("pump={pump}/basis={basis_idx}")
}

/// Simulate and analyze one pump setting.
fn run_pump(
    cfg: &ExperimentConfig,
    pump: f64,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<PumpResult> {
    let outcome = heralded_state(cfg, pump)?;
    let times = cfg.trace_time_grid();
    let planted = mode_function(cfg.gamma(), &times)?;
    let n_events = cfg.events_per_basis;

    let mut dataset = QuadratureDataset::new();
    let (mode_est, overlap, gamma_hat) = if opts.no_trace_stage {
        for (b, &deg) in cfg.bases_deg.iter().enumerate() {
            let sub = derive_seed(seed, &basis_tag(pump, b));
            let xs = sample_quadratures(&outcome.state, deg.to_radians(), n_events, sub)?;
            dataset.extend_phase(deg, &xs);
        }
        (planted.clone(), None, None)
    } else {
        // pass 1: accumulate the second-moment matrix over every basis
        let n_samples = times.len();
        let mut q = Array2::<f64>::zeros((n_samples, n_samples));
        let mut s = Array1::<f64>::zeros(n_samples);
        let mut n_total = 0usize;
        let synth_basis = |b: usize, deg: f64| -> Result<Vec<HomodyneTrace>> {
            let noise = NoiseModel {
                background_variance: outcome.unheralded.quadrature_variance(deg.to_radians()),
                lowpass_hz: None,
            };
            synth_traces(
                &outcome.state,
                &planted,
                deg.to_radians(),
                n_events,
                &noise,
                derive_seed(seed, &basis_tag(pump, b)),
            )
        };
        for (b, &deg) in cfg.bases_deg.iter().enumerate() {
            let traces = synth_basis(b, deg)?;
            let mut x = Array2::<f64>::zeros((traces.len(), n_samples));
            for (i, tr) in traces.iter().enumerate() {
                x.row_mut(i).assign(&Array1::from_vec(tr.samples.clone()));
            }
            q += &x.t().dot(&x);
            s += &x.sum_axis(ndarray::Axis(0));
            n_total += traces.len();
        }
        let mu = &s / n_total as f64;
        let c = q / n_total as f64
            - Array2::from_shape_fn((n_samples, n_samples), |(i, j)| mu[i] * mu[j]);
        let est = principal_mode(&c, &times)?;
        let ov = mode_overlap(&est, &planted)?;
        // pass 2: regenerate the same traces and extract in the estimated mode
        for (b, &deg) in cfg.bases_deg.iter().enumerate() {
            let traces = synth_basis(b, deg)?;
            for tr in &traces {
                dataset.push(deg, extract_quadrature(tr, &est)?);
            }
        }
        let g = est.gamma;
        (est, Some(ov), Some(g))
    };

    let reconstruction = mle_reconstruct(&dataset, &opts.tomo)?;
    let (wigner_min_model, _) = wigner_min(&outcome.state)?;

    // squeezing characterization: quadrature variances of the unconditioned
    // (lossy squeezed) signal beam, for the joint variance fit
    let mut records = Vec::new();
    for (b, &deg) in cfg.bases_deg.iter().enumerate() {
        let sub = derive_seed(seed, &format!("squeezing/{}", basis_tag(pump, b)));
        let xs = sample_quadratures(&outcome.unheralded, deg.to_radians(), n_events, sub)?;
        records.extend(xs.into_iter().map(|x| (deg.to_radians(), x)));
    }
    let squeezing_variances = PumpVariances {
        pump_mw: pump,
        points: variances_by_phase(&records),
    };

    Ok(PumpResult {
        pump_mw: pump,
        outcome,
        mode_est,
        overlap,
        gamma_hat,
        dataset,
        reconstruction,
        wigner_min_model,
        squeezing_variances,
    })
}

fn pump_dir_name(pump: f64) -> String {
    format!("pump_{pump}mw").replace('.', "_")
}

/// Run the full pipeline and write all artifacts under `out_dir`.
pub fn run_pipeline(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    opts: &PipelineOptions,
) -> Result<RunManifest> {
    cfg.validate()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let pumps: Vec<f64> = match &opts.pumps {
        Some(sel) => {
            for p in sel {
                if !cfg.pump_powers_mw.iter().any(|q| (q - p).abs() < 1e-12) {
                    return Err(Error::config(
                        "/pump_powers_mw",
                        format!("{p} mW not in the configured pump list"),
                    ));
                }
            }
            sel.clone()
        }
        None => cfg.pump_powers_mw.clone(),
    };

    let results: Vec<PumpResult> = pumps
        .par_iter()
        .map(|&p| run_pump(cfg, p, seed, opts))
        .collect::<Result<Vec<_>>>()?;

    let fit = fit_eq8(
        &results
            .iter()
            .map(|r| r.squeezing_variances.clone())
            .collect::<Vec<_>>(),
    )?;

    fs::create_dir_all(out_dir)?;
    let mut summaries = Vec::with_capacity(results.len());
    for (res, &r_fit) in results.iter().zip(&fit.rs) {
        let dir = out_dir.join(pump_dir_name(res.pump_mw));
        fs::create_dir_all(&dir)?;
        let paths = PumpPaths {
            mode_csv: dir.join("mode.csv"),
            quadratures_csv: dir.join("quadratures.csv"),
            rho_json: dir.join("rho.json"),
            wigner_csv: dir.join("wigner.csv"),
        };
        write_mode_csv(&paths.mode_csv, &res.mode_est)?;
        res.dataset.write_csv(&paths.quadratures_csv)?;
        fs::write(
            &paths.rho_json,
            serde_json::to_string_pretty(&rho_to_json(&res.reconstruction.rho))?,
        )?;
        write_wigner_csv(&paths.wigner_csv, &res.reconstruction.rho)?;

        let report = negativity_report(&res.reconstruction.rho)?;
        summaries.push(PumpSummary {
            pump_mw: res.pump_mw,
            r: res.outcome.r,
            r_fit,
            p_click: res.outcome.p_click,
            herald_rate_cps: res.outcome.herald_rate_cps,
            fake_fraction: res.outcome.fake_fraction,
            wigner_min: report.wigner_min,
            wigner_min_model: res.wigner_min_model,
            parity_value: report.parity_value,
            mode_overlap: res.overlap,
            gamma_hat: res.gamma_hat,
            mle_iterations: res.reconstruction.iterations,
            mle_converged: res.reconstruction.converged(),
            paths,
        });
    }

    let manifest = RunManifest {
        config_hash: config_hash(cfg)?,
        seed,
        loss_fit: fit.loss,
        pumps: summaries,
    };
    let mut f = fs::File::create(out_dir.join("manifest.json"))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Outputs of analyzing an externally supplied trace set.
#[derive(Debug)]
pub struct TraceAnalysis {
    pub mode: ModeFunction,
    pub dataset: QuadratureDataset,
    pub reconstruction: MleReconstruction,
    pub wigner_min: f64,
    pub parity_value: f64,
}

/// Analysis chain on raw traces: principal mode, quadrature extraction per
/// LO phase, reconstruction, negativity.
pub fn analyze_traces(traces: &[HomodyneTrace], tomo: &TomoSettings) -> Result<TraceAnalysis> {
    if traces.is_empty() {
        return Err(Error::Numerical("no traces to analyze".into()));
    }
    let n = traces[0].samples.len();
    let dt = 1.0 / traces[0].sample_rate_hz;
    let trigger = traces[0].trigger_index;
    let times: Vec<f64> = (0..n).map(|i| (i as f64 - trigger as f64) * dt).collect();
    let c = catsim::modeest::correlation_matrix(traces)?;
    let mode = principal_mode(&c, &times)?;
    let mut dataset = QuadratureDataset::new();
    for tr in traces {
        dataset.push(tr.lo_phase_deg, extract_quadrature(tr, &mode)?);
    }
    let reconstruction = mle_reconstruct(&dataset, tomo)?;
    let report = negativity_report(&reconstruction.rho)?;
    Ok(TraceAnalysis {
        mode,
        dataset,
        reconstruction,
        wigner_min: report.wigner_min,
        parity_value: report.parity_value,
    })
}
