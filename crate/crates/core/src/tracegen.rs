//! Synthetic CW homodyne traces: the conditioned state's quadrature
//! statistics ride on the heralded temporal mode, orthogonal modes carry the
//! unconditioned background.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix};
use crate::herald::ModeFunction;

/// Sampled homodyne detector record around one herald event.
#[derive(Debug, Clone)]
pub struct HomodyneTrace {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub lo_phase_deg: f64,
    /// Index of the herald time t = 0 within `samples`.
    pub trigger_index: usize,
}

/// Phase-tagged quadrature records, the tomography input.
#[derive(Debug, Clone, Default)]
pub struct QuadratureDataset {
    records: Vec<(f64, f64)>, // (theta_deg, x)
}

impl QuadratureDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, theta_deg: f64, x: f64) {
        self.records.push((theta_deg, x));
    }

    pub fn extend_phase(&mut self, theta_deg: f64, xs: &[f64]) {
        self.records.extend(xs.iter().map(|&x| (theta_deg, x)));
    }

    pub fn records(&self) -> &[(f64, f64)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn phases_deg(&self) -> Vec<f64> {
        let mut phases: Vec<f64> = Vec::new();
        for &(t, _) in &self.records {
            if !phases.iter().any(|&p| (p - t).abs() < 1e-9) {
                phases.push(t);
            }
        }
        phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
        phases
    }

    pub fn values_at_phase(&self, theta_deg: f64) -> Vec<f64> {
        self.records
            .iter()
            .filter(|(t, _)| (t - theta_deg).abs() < 1e-9)
            .map(|&(_, x)| x)
            .collect()
    }

    /// CSV with header `theta_deg,x`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["theta_deg", "x"])?;
        for (t, x) in &self.records {
            w.write_record([t.to_string(), x.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut ds = Self::new();
        for rec in r.records() {
            let rec = rec?;
            let t: f64 = rec
                .get(0)
                .ok_or_else(|| Error::Numerical("missing theta_deg column".into()))?
                .parse()
                .map_err(|e| Error::Numerical(format!("bad theta_deg: {e}")))?;
            let x: f64 = rec
                .get(1)
                .ok_or_else(|| Error::Numerical("missing x column".into()))?
                .parse()
                .map_err(|e| Error::Numerical(format!("bad x: {e}")))?;
            ds.push(t, x);
        }
        Ok(ds)
    }
}

/// Background model for trace synthesis.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    /// Quadrature variance carried by temporal modes orthogonal to the
    /// heralded one (the unconditioned squeezed statistics at this LO phase);
    /// 0.5 is plain vacuum.
    pub background_variance: f64,
    /// Optional single-pole low-pass cutoff emulating the detector
    /// electronics, Hz.
    pub lowpass_hz: Option<f64>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            background_variance: 0.5,
            lowpass_hz: None,
        }
    }
}

/// Draw n quadrature samples from the marginal of ρ at LO phase θ (radians)
/// by inverse-CDF on a dense grid. Deterministic for a fixed seed.
pub fn sample_quadratures(rho: &DensityMatrix, theta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = QuadratureSampler::new(rho, theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.draw(&mut rng)).collect())
}

/// Precomputed inverse-CDF table for one (ρ, θ) marginal.
pub struct QuadratureSampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuadratureSampler {
    pub fn new(rho: &DensityMatrix, theta: f64) -> Result<Self> {
        let sigma = rho.quadrature_variance(theta).sqrt();
        let mu = rho.quadrature_mean(theta).abs();
        let half = (mu + 8.0 * sigma).max(6.0);
        let xs = fock::linspace(-half, half, 4001);
        let pdf = fock::quadrature_pdf(rho, theta, &xs)?;
        let mut cdf = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (pdf[i - 1] + pdf[i]) * (xs[i] - xs[i - 1]);
        }
        let total = cdf[xs.len() - 1];
        for v in cdf.iter_mut() {
            *v /= total;
        }
        Ok(Self { xs, cdf })
    }

    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen();
        // first index with cdf >= u
        let idx = self.cdf.partition_point(|&cv| cv < u);
        if idx == 0 {
            return self.xs[0];
        }
        if idx >= self.cdf.len() {
            return *self.xs.last().unwrap();
        }
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[idx - 1] + frac * (self.xs[idx] - self.xs[idx - 1])
    }
}

/// Synthesize herald-triggered homodyne traces. Each trace carries one
/// quadrature draw of ρ in the heralded mode; orthogonal components carry
/// white Gaussian background at `noise.background_variance`. Deterministic
/// per seed; event RNG streams are independent.
pub fn synth_traces(
    rho: &DensityMatrix,
    mode: &ModeFunction,
    theta: f64,
    n_events: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<HomodyneTrace>> {
    if (mode.norm_sqr() - 1.0).abs() > 1e-6 {
        return Err(Error::GridMismatch("mode function not normalized".into()));
    }
    let sampler = QuadratureSampler::new(rho, theta)?;
    let dt = mode.dt();
    let sample_rate = 1.0 / dt;
    let f = mode.amplitudes();
    let n_samples = f.len();
    let trigger_index = mode
        .times()
        .iter()
        .position(|&t| t >= 0.0)
        .unwrap_or(n_samples - 1);
    let bg_sigma = (noise.background_variance / dt).sqrt();
    let lo_phase_deg = theta.to_degrees();

    let traces: Vec<HomodyneTrace> = (0..n_events)
        .into_par_iter()
        .map(|event| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(event as u64 + 1);
            let x_event = sampler.draw(&mut rng);
            let mut s: Vec<f64> = (0..n_samples)
                .map(|_| bg_sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            // remove the background's component along the heralded mode and
            // plant the conditioned quadrature there instead
            let proj: f64 = s.iter().zip(f).map(|(si, fi)| si * fi).sum::<f64>() * dt;
            for (si, fi) in s.iter_mut().zip(f) {
                *si += (x_event - proj) * fi;
            }
            if let Some(fc) = noise.lowpass_hz {
                single_pole_lowpass(&mut s, fc, dt);
            }
            HomodyneTrace {
                samples: s,
                sample_rate_hz: sample_rate,
                lo_phase_deg,
                trigger_index,
            }
        })
        .collect();
    Ok(traces)
}

/// In-place single-pole RC low-pass with cutoff `fc`.
pub fn single_pole_lowpass(samples: &mut [f64], fc: f64, dt: f64) {
    let a = (-2.0 * std::f64::consts::PI * fc * dt).exp();
    let mut y = 0.0;
    for s in samples.iter_mut() {
        y = a * y + (1.0 - a) * *s;
        *s = y;
    }
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    sample_rate_hz: f64,
    n_samples: usize,
    n_traces: usize,
    lo_phase_deg: f64,
    trigger_index: usize,
    seed: u64,
}

/// Binary trace dump: one JSON header line, then little-endian f32 samples,
/// trace-major.
pub fn write_traces_binary(path: &Path, traces: &[HomodyneTrace], seed: u64) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::Numerical("no traces to write".into()));
    }
    let header = TraceHeader {
        sample_rate_hz: traces[0].sample_rate_hz,
        n_samples: traces[0].samples.len(),
        n_traces: traces.len(),
        lo_phase_deg: traces[0].lo_phase_deg,
        trigger_index: traces[0].trigger_index,
        seed,
    };
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for t in traces {
        for &s in &t.samples {
            w.write_all(&(s as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_traces_binary(path: &Path) -> Result<Vec<HomodyneTrace>> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: TraceHeader = serde_json::from_str(line.trim_end())?;
    let mut traces = Vec::with_capacity(header.n_traces);
    let mut buf = vec![0u8; header.n_samples * 4];
    for _ in 0..header.n_traces {
        r.read_exact(&mut buf)?;
        let samples: Vec<f64> = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        traces.push(HomodyneTrace {
            samples,
            sample_rate_hz: header.sample_rate_hz,
            lo_phase_deg: header.lo_phase_deg,
            trigger_index: header.trigger_index,
        });
    }
    Ok(traces)
}

/// CSV alternative for small runs: first row is the sample index header,
/// then one row per trace.
pub fn write_traces_csv(path: &Path, traces: &[HomodyneTrace]) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::Numerical("no traces to write".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    let n = traces[0].samples.len();
    let mut header = vec!["lo_phase_deg".to_string()];
    header.extend((0..n).map(|i| format!("s{i}")));
    w.write_record(&header)?;
    for t in traces {
        let mut row = vec![t.lo_phase_deg.to_string()];
        row.extend(t.samples.iter().map(|s| s.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
