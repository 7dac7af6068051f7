//! Temporal-mode recovery: principal component analysis of the
//! time-correlation matrix of homodyne traces, and projection of traces onto
//! the recovered mode.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::herald::ModeFunction;
use crate::linalg;
use crate::tracegen::HomodyneTrace;

/// Mean-subtracted time-correlation matrix C_ij = ⟨s_i s_j⟩ over events.
pub fn correlation_matrix(traces: &[HomodyneTrace]) -> Result<Array2<f64>> {
    if traces.len() < 2 {
        return Err(Error::Numerical(format!(
            "need at least 2 traces, got {}",
            traces.len()
        )));
    }
    let n_samples = traces[0].samples.len();
    for (i, t) in traces.iter().enumerate() {
        if t.samples.len() != n_samples {
            return Err(Error::RaggedTraces {
                expected: n_samples,
                index: i,
                got: t.samples.len(),
            });
        }
    }
    let n_events = traces.len();
    let mut x = Array2::<f64>::zeros((n_events, n_samples));
    for (i, t) in traces.iter().enumerate() {
        for (j, &s) in t.samples.iter().enumerate() {
            x[[i, j]] = s;
        }
    }
    let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
    for mut row in x.rows_mut() {
        row -= &mean;
    }
    Ok(x.t().dot(&x) / n_events as f64)
}

/// Dominant eigenvector of the correlation matrix, returned as a normalized
/// mode function on the trace time grid. The sign is fixed so the
/// maximum-magnitude sample is positive, and γ is filled in by matching the
/// one-sided exponential template with the best overlap.
pub fn principal_mode(c: &Array2<f64>, times: &[f64]) -> Result<ModeFunction> {
    let n = c.nrows();
    if n != times.len() {
        return Err(Error::GridMismatch(format!(
            "correlation matrix {} vs time grid {}",
            n,
            times.len()
        )));
    }
    let (vals, vecs) = linalg::eigh_real(c);
    let top = vals[n - 1];
    let second = vals[n - 2];
    if top <= 0.0 {
        return Err(Error::Numerical("correlation matrix has no positive mode".into()));
    }
    let gap = (top - second) / top;
    if gap < 1e-6 {
        return Err(Error::AmbiguousMode(gap));
    }
    let mut v: Vec<f64> = (0..n).map(|i| vecs[[i, n - 1]]).collect();
    let peak = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    if v[peak] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    let gamma = fit_exponential_rate(times, &v);
    ModeFunction::new(times.to_vec(), v, gamma)
}

/// Overlap of `amps` with the template √(2γ)e^{γt}Θ(-t), both normalized.
fn template_overlap(times: &[f64], amps: &[f64], gamma: f64) -> f64 {
    let mut dot = 0.0;
    let mut norm_f = 0.0;
    let mut norm_v = 0.0;
    for (&t, &v) in times.iter().zip(amps) {
        let f = if t <= 0.0 { (gamma * t).exp() } else { 0.0 };
        dot += f * v;
        norm_f += f * f;
        norm_v += v * v;
    }
    if norm_f == 0.0 || norm_v == 0.0 {
        return 0.0;
    }
    dot.abs() / (norm_f * norm_v).sqrt()
}

/// Decay rate of the one-sided exponential template with the largest overlap
/// against `amps`; golden-section search over ln γ. Matching the full
/// template is far less noise-sensitive than a log-slope fit.
fn fit_exponential_rate(times: &[f64], amps: &[f64]) -> f64 {
    let span = times[times.len() - 1] - times[0];
    let dt = times[1] - times[0];
    let (mut lo, mut hi) = ((1.0 / span).ln(), (2.0 / dt).ln());
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let mut fa = template_overlap(times, amps, a.exp());
    let mut fb = template_overlap(times, amps, b.exp());
    for _ in 0..80 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = template_overlap(times, amps, b.exp());
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = template_overlap(times, amps, a.exp());
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// x = Σ s(t) f(t) Δt. Vacuum-level traces give variance 1/2 under the
/// synthesis convention of [`crate::tracegen`].
pub fn extract_quadrature(trace: &HomodyneTrace, mode: &ModeFunction) -> Result<f64> {
    if trace.samples.len() != mode.len() {
        return Err(Error::GridMismatch(format!(
            "trace {} samples vs mode {}",
            trace.samples.len(),
            mode.len()
        )));
    }
    let dt_trace = 1.0 / trace.sample_rate_hz;
    if (dt_trace - mode.dt()).abs() > 1e-12 * mode.dt().abs().max(1.0) {
        return Err(Error::GridMismatch(format!(
            "trace dt {dt_trace:e} vs mode dt {:e}",
            mode.dt()
        )));
    }
    Ok(trace
        .samples
        .iter()
        .zip(mode.amplitudes())
        .map(|(s, f)| s * f)
        .sum::<f64>()
        * mode.dt())
}

/// |∫ f g dt| after normalizing both modes; 1 for identical shapes, 0 for
/// orthogonal ones.
pub fn mode_overlap(f: &ModeFunction, g: &ModeFunction) -> Result<f64> {
    if f.len() != g.len() || (f.dt() - g.dt()).abs() > 1e-12 * f.dt() {
        return Err(Error::GridMismatch("mode grids differ".into()));
    }
    let dot: f64 = f
        .amplitudes()
        .iter()
        .zip(g.amplitudes())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * f.dt();
    Ok((dot / (f.norm_sqr() * g.norm_sqr()).sqrt()).abs())
}

/// Two-column CSV (t_seconds, amplitude).
pub fn write_mode_csv(path: &Path, mode: &ModeFunction) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t_seconds", "amplitude"])?;
    for (t, a) in mode.times().iter().zip(mode.amplitudes()) {
        w.write_record([t.to_string(), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mode_csv(path: &Path) -> Result<ModeFunction> {
    let mut r = csv::Reader::from_path(path)?;
    let mut times = Vec::new();
    let mut amps = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        times.push(
            rec.get(0)
                .ok_or_else(|| Error::Numerical("missing t_seconds".into()))?
                .parse::<f64>()
                .map_err(|e| Error::Numerical(format!("bad t_seconds: {e}")))?,
        );
        amps.push(
            rec.get(1)
                .ok_or_else(|| Error::Numerical("missing amplitude".into()))?
                .parse::<f64>()
                .map_err(|e| Error::Numerical(format!("bad amplitude: {e}")))?,
        );
    }
    let gamma = fit_exponential_rate(&times, &amps);
    ModeFunction::new(times, amps, gamma)
}

#[allow(dead_code)]
fn as_array(v: &[f64]) -> Array1<f64> {
    Array1::from_vec(v.to_vec())
}
