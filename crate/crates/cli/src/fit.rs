//! Joint weighted least-squares fit of the lossy squeezed-vacuum variance
//! law V(θ) = ½(1-L)[e^{2r}cos²θ + e^{-2r}sin²θ] + L/2 over several pump
//! settings, with one r per pump and a single shared loss L.

use catsim::{Error, Result};
use serde::{Deserialize, Serialize};

/// Measured quadrature variances of one pump setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PumpVariances {
    pub pump_mw: f64,
    /// (LO phase in radians, sample variance) pairs.
    pub points: Vec<(f64, f64)>,
}

/// Result of the joint fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eq8Fit {
    /// Shared loss, constrained to [0, 1).
    pub loss: f64,
    /// Squeezing parameter per pump setting, in input order.
    pub rs: Vec<f64>,
    /// Weighted sum of squared residuals at the optimum.
    pub weighted_residual: f64,
}

const L_MAX: f64 = 0.999;

/// Model variance for u = e^{2r}: linear in L, convex in u.
fn model(u: f64, loss: f64, cos2: f64, sin2: f64) -> f64 {
    0.5 * (1.0 - loss) * (u * cos2 + sin2 / u) + 0.5 * loss
}

/// Per-point weight: the sampling error of a variance scales with the
/// variance itself, so weight by 1/V².
fn weight(v: f64) -> f64 {
    if v > 0.0 {
        1.0 / (v * v)
    } else {
        0.0
    }
}

/// Best u = e^{2r} ≥ 1 for one pump at fixed loss (golden section on ln u).
fn solve_u(points: &[(f64, f64, f64)], loss: f64) -> f64 {
    let obj = |ln_u: f64| -> f64 {
        let u = ln_u.exp();
        points
            .iter()
            .map(|&(cos2, v, w)| {
                let d = model(u, loss, cos2, 1.0 - cos2) - v;
                w * d * d
            })
            .sum()
    };
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0_f64, 6.0_f64);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (obj(a), obj(b));
    for _ in 0..180 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = obj(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = obj(b);
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Closed-form weighted least-squares update of the shared loss at fixed
/// per-pump u values (the model is linear in L).
fn solve_loss(pumps: &[Vec<(f64, f64, f64)>], us: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (points, &u) in pumps.iter().zip(us) {
        for &(cos2, v, w) in points {
            let base = 0.5 * (u * cos2 + (1.0 - cos2) / u);
            let slope = 0.5 - base; // dV/dL
            num += w * slope * (v - base);
            den += w * slope * slope;
        }
    }
    if den <= 0.0 {
        return 0.0;
    }
    (num / den).clamp(0.0, L_MAX)
}

/// Starting point for the shared loss: fit each pump linearly as
/// V = A cos²θ + B sin²θ, then invert A = ½[(1-L)u + L], B = ½[(1-L)/u + L]
/// to L = (4AB - 1)/(2(A + B - 1)); average over pumps. Exact for noiseless
/// data.
fn initial_loss(pumps: &[Vec<(f64, f64, f64)>]) -> f64 {
    let mut acc = 0.0;
    let mut n = 0.0;
    for points in pumps {
        let (mut scc, mut scs, mut sss, mut scv, mut ssv) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(c, v, w) in points {
            let s = 1.0 - c;
            scc += w * c * c;
            scs += w * c * s;
            sss += w * s * s;
            scv += w * c * v;
            ssv += w * s * v;
        }
        let det = scc * sss - scs * scs;
        if det.abs() < 1e-30 {
            continue;
        }
        let a = (scv * sss - ssv * scs) / det;
        let b = (ssv * scc - scv * scs) / det;
        let denom = 2.0 * (a + b - 1.0);
        if denom.abs() < 1e-12 {
            continue;
        }
        let l = ((4.0 * a * b - 1.0) / denom).clamp(0.0, L_MAX);
        acc += l;
        n += 1.0;
    }
    if n > 0.0 {
        acc / n
    } else {
        0.2
    }
}

/// Fit the shared loss and one squeezing parameter per pump by alternating
/// exact coordinate minimizations.
pub fn fit_eq8(data: &[PumpVariances]) -> Result<Eq8Fit> {
    if data.is_empty() {
        return Err(Error::InsufficientPhases(0));
    }
    let mut pumps: Vec<Vec<(f64, f64, f64)>> = Vec::with_capacity(data.len());
    for pv in data {
        let points: Vec<(f64, f64, f64)> = pv
            .points
            .iter()
            .map(|&(theta, v)| (theta.cos().powi(2), v, weight(v)))
            .collect();
        // the fit is singular unless cos²θ takes at least two distinct values
        let distinct = points
            .iter()
            .any(|&(c, _, _)| (c - points[0].0).abs() > 1e-9);
        if points.len() < 2 || !distinct {
            return Err(Error::InsufficientPhases(points.len().min(1)));
        }
        pumps.push(points);
    }

    let mut loss = initial_loss(&pumps);
    let mut us = vec![1.0; pumps.len()];
    for _ in 0..500 {
        for (k, points) in pumps.iter().enumerate() {
            us[k] = solve_u(points, loss);
        }
        let next = solve_loss(&pumps, &us);
        let done = (next - loss).abs() < 1e-15;
        loss = next;
        if done {
            break;
        }
    }
    for (k, points) in pumps.iter().enumerate() {
        us[k] = solve_u(points, loss);
    }

    Ok(Eq8Fit {
        loss,
        rs: us.iter().map(|u| 0.5 * u.ln()).collect(),
        weighted_residual: residual(&pumps, &us, loss),
    })
}

fn residual(pumps: &[Vec<(f64, f64, f64)>], us: &[f64], loss: f64) -> f64 {
    pumps
        .iter()
        .zip(us)
        .flat_map(|(points, &u)| {
            points.iter().map(move |&(cos2, v, w)| {
                let d = model(u, loss, cos2, 1.0 - cos2) - v;
                w * d * d
            })
        })
        .sum()
}

/// Sample variances by phase from raw (θ_rad, x) quadrature records.
pub fn variances_by_phase(records: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut phases: Vec<f64> = Vec::new();
    for &(theta, _) in records {
        if !phases.iter().any(|&p| (p - theta).abs() < 1e-12) {
            phases.push(theta);
        }
    }
    phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    phases
        .into_iter()
        .map(|theta| {
            let xs: Vec<f64> = records
                .iter()
                .filter(|&&(t, _)| (t - theta).abs() < 1e-12)
                .map(|&(_, x)| x)
                .collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            (theta, var)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use catsim::fock::eq8_variance;

    fn noiseless(r: f64, loss: f64) -> PumpVariances {
        let points = [0.0_f64, 30.0, 60.0, 90.0, 120.0, 150.0]
            .iter()
            .map(|deg| {
                let th = deg.to_radians();
                (th, eq8_variance(r, loss, th).unwrap())
            })
            .collect();
        PumpVariances {
            pump_mw: 0.0,
            points,
        }
    }

    #[test]
    fn noiseless_round_trip_is_exact() {
        let data = vec![noiseless(0.4, 0.23)];
        let fit = fit_eq8(&data).unwrap();
        assert!((fit.loss - 0.23).abs() < 1e-10, "L = {}", fit.loss);
        assert!((fit.rs[0] - 0.4).abs() < 1e-10, "r = {}", fit.rs[0]);
    }

    #[test]
    fn shared_loss_across_pumps() {
        let data = vec![noiseless(0.3, 0.17), noiseless(0.6, 0.17), noiseless(0.85, 0.17)];
        let fit = fit_eq8(&data).unwrap();
        assert!((fit.loss - 0.17).abs() < 1e-9);
        for (r_hat, r) in fit.rs.iter().zip([0.3, 0.6, 0.85]) {
            assert!((r_hat - r).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_loss_stays_on_the_boundary() {
        let data = vec![noiseless(0.5, 0.0)];
        let fit = fit_eq8(&data).unwrap();
        assert!(fit.loss >= 0.0 && fit.loss < 1e-9);
    }

    #[test]
    fn single_phase_is_singular() {
        let data = vec![PumpVariances {
            pump_mw: 1.0,
            points: vec![(0.0, 1.2), (0.0, 1.3)],
        }];
        assert!(matches!(fit_eq8(&data), Err(Error::InsufficientPhases(_))));
    }
}
