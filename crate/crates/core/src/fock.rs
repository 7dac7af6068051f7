//! Truncated Fock-space engine: states, operators, channels, quadrature
//! marginals, and Wigner functions.
//!
//! Conventions: ħ = 1, x_θ = (a e^{-iθ} + a† e^{iθ})/√2, vacuum quadrature
//! variance 1/2, Wigner function normalized to ∫W dx dp = 1 (vacuum peak 1/π).
//! Squeezed vacuum squeezes the p quadrature (θ = 90°).

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;

/// Maximum truncated tail probability tolerated by state constructors.
pub const TAIL_LIMIT: f64 = 1e-8;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pure state in the truncated photon-number basis.
#[derive(Debug, Clone)]
pub struct PureState {
    amplitudes: Array1<C64>,
}

impl PureState {
    /// Wrap raw amplitudes, normalizing them.
    pub fn new(amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension("empty amplitude vector".into()));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Numerical("zero-norm state".into()));
        }
        Ok(Self {
            amplitudes: amplitudes / c(norm, 0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, n: usize) -> C64 {
        self.amplitudes[n]
    }

    /// ⟨self|other⟩
    pub fn overlap(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum()
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        let d = self.dim();
        let m = Array2::from_shape_fn((d, d), |(i, j)| {
            self.amplitudes[i] * self.amplitudes[j].conj()
        });
        DensityMatrix { elements: m }
    }

    /// Embed into a larger cutoff by zero-padding.
    pub fn pad(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(Error::InvalidDimension(format!(
                "cannot pad from {} down to {}",
                self.dim(),
                dim
            )));
        }
        let mut a = Array1::<C64>::zeros(dim);
        a.slice_mut(ndarray::s![..self.dim()])
            .assign(&self.amplitudes);
        Ok(Self { amplitudes: a })
    }
}

/// Density matrix in the truncated photon-number basis.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    elements: Array2<C64>,
}

impl DensityMatrix {
    /// Wrap a raw matrix, checking Hermiticity and normalizing the trace.
    pub fn new(elements: Array2<C64>) -> Result<Self> {
        let (r, cdim) = elements.dim();
        if r == 0 || r != cdim {
            return Err(Error::InvalidDimension(format!(
                "density matrix must be square and nonempty, got {r}x{cdim}"
            )));
        }
        let mut herm_dev = 0.0_f64;
        for i in 0..r {
            for j in 0..r {
                herm_dev = herm_dev.max((elements[[i, j]] - elements[[j, i]].conj()).norm());
            }
        }
        if herm_dev > 1e-10 {
            return Err(Error::Numerical(format!(
                "matrix is not Hermitian (max deviation {herm_dev:.3e})"
            )));
        }
        let tr: C64 = (0..r).map(|i| elements[[i, i]]).sum();
        if tr.re <= 0.0 {
            return Err(Error::Numerical("non-positive trace".into()));
        }
        Ok(Self {
            elements: elements / c(tr.re, 0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &Array2<C64> {
        &self.elements
    }

    pub fn element(&self, m: usize, n: usize) -> C64 {
        self.elements[[m, n]]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.elements[[i, i]].re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.elements.iter().map(|e| e.norm_sqr()).sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim())
            .map(|n| n as f64 * self.elements[[n, n]].re)
            .sum()
    }

    /// Diagonal photon-number populations.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.elements[[n, n]].re).collect()
    }

    /// ⟨(-1)^n̂⟩ — the displaced-parity value of the Wigner function at the
    /// origin is this divided by π.
    pub fn parity(&self) -> f64 {
        (0..self.dim())
            .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } * self.elements[[n, n]].re)
            .sum()
    }

    /// Smallest eigenvalue (negative values signal an unphysical matrix).
    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.elements)
    }

    /// Check the Hermitian / unit-trace / PSD invariants.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                let dev = (self.elements[[i, j]] - self.elements[[j, i]].conj()).norm();
                if dev > 1e-12 {
                    return Err(Error::Numerical(format!(
                        "Hermiticity violated at ({i},{j}): {dev:.3e}"
                    )));
                }
            }
        }
        if (self.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!("trace = {}", self.trace())));
        }
        let lam = self.min_eigenvalue();
        if lam < -1e-10 {
            return Err(Error::Numerical(format!("min eigenvalue {lam:.3e}")));
        }
        Ok(())
    }

    /// Mean of the quadrature x_θ.
    pub fn quadrature_mean(&self, theta: f64) -> f64 {
        // ⟨x_θ⟩ = √2 Re(e^{iθ} ⟨a†⟩); ⟨a†⟩ = Σ √(n+1) ρ_{n+1,n}
        let mut adag = c(0.0, 0.0);
        for n in 0..self.dim() - 1 {
            adag += ((n + 1) as f64).sqrt() * self.elements[[n + 1, n]];
        }
        (2.0_f64).sqrt() * (C64::from_polar(1.0, theta) * adag).re
    }

    /// Variance of the quadrature x_θ.
    pub fn quadrature_variance(&self, theta: f64) -> f64 {
        let d = self.dim();
        // ⟨x_θ²⟩ = 1/2 + ⟨n⟩ + Re(e^{2iθ} ⟨a†²⟩)
        let mut adag2 = c(0.0, 0.0);
        for n in 0..d.saturating_sub(2) {
            let w = (((n + 1) * (n + 2)) as f64).sqrt();
            adag2 += w * self.elements[[n + 2, n]];
        }
        let second = 0.5 + self.mean_photon_number() + (C64::from_polar(1.0, 2.0 * theta) * adag2).re;
        let mean = self.quadrature_mean(theta);
        second - mean * mean
    }
}

/// Pure state of a signal⊗idler pair in truncated Fock bases.
#[derive(Debug, Clone)]
pub struct TwoModeState {
    amplitudes: Array2<C64>, // [signal, idler]
}

impl TwoModeState {
    pub fn new(amplitudes: Array2<C64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Numerical("zero-norm two-mode state".into()));
        }
        Ok(Self {
            amplitudes: amplitudes / c(norm, 0.0),
        })
    }

    /// |signal⟩ ⊗ |idler⟩
    pub fn product(signal: &PureState, idler: &PureState) -> Self {
        let a = Array2::from_shape_fn((signal.dim(), idler.dim()), |(m, n)| {
            signal.amplitude(m) * idler.amplitude(n)
        });
        Self { amplitudes: a }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.amplitudes.dim()
    }

    pub fn amplitudes(&self) -> &Array2<C64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn signal_mean_photon_number(&self) -> f64 {
        let (ns, ni) = self.dims();
        let mut s = 0.0;
        for m in 0..ns {
            for k in 0..ni {
                s += m as f64 * self.amplitudes[[m, k]].norm_sqr();
            }
        }
        s
    }

    pub fn idler_mean_photon_number(&self) -> f64 {
        let (ns, ni) = self.dims();
        let mut s = 0.0;
        for m in 0..ns {
            for k in 0..ni {
                s += k as f64 * self.amplitudes[[m, k]].norm_sqr();
            }
        }
        s
    }

    /// Marginal photon-number distribution of the idler mode.
    pub fn idler_distribution(&self) -> Vec<f64> {
        let (ns, ni) = self.dims();
        (0..ni)
            .map(|k| (0..ns).map(|m| self.amplitudes[[m, k]].norm_sqr()).sum())
            .collect()
    }

    /// Reduced signal state (trace over the idler).
    pub fn signal_state(&self) -> DensityMatrix {
        let (ns, ni) = self.dims();
        let mut rho = Array2::<C64>::zeros((ns, ns));
        for k in 0..ni {
            for m in 0..ns {
                for mp in 0..ns {
                    rho[[m, mp]] += self.amplitudes[[m, k]] * self.amplitudes[[mp, k]].conj();
                }
            }
        }
        DensityMatrix::new(rho).expect("reduced state of a normalized pure state is valid")
    }

    /// Truncate to smaller per-mode cutoffs, renormalizing. Errors if the
    /// discarded probability exceeds `TAIL_LIMIT`.
    pub fn truncate(&self, dims: (usize, usize)) -> Result<Self> {
        let (ns, ni) = self.dims();
        if dims.0 > ns || dims.1 > ni {
            return Err(Error::InvalidDimension(format!(
                "truncate target {:?} exceeds current {:?}",
                dims,
                (ns, ni)
            )));
        }
        let kept = self.amplitudes.slice(ndarray::s![..dims.0, ..dims.1]);
        let kept_mass: f64 = kept.iter().map(|a| a.norm_sqr()).sum();
        let tail = self.norm_sqr() - kept_mass;
        if tail > TAIL_LIMIT {
            return Err(Error::CutoffTooSmall {
                tail,
                limit: TAIL_LIMIT,
            });
        }
        TwoModeState::new(kept.to_owned())
    }
}

/// Rectangular phase-space grid holding a sampled Wigner function.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_x: usize,
    pub n_p: usize,
    /// values[i][j] = W(x_i, p_j)
    pub values: Array2<f64>,
}

impl WignerGrid {
    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.n_x)
    }

    pub fn ps(&self) -> Vec<f64> {
        linspace(self.p_min, self.p_max, self.n_p)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n_p - 1) as f64
    }

    /// Riemann-sum normalization Σ W Δx Δp.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.dx() * self.dp()
    }
}

/// Grid extent request for [`wigner`].
#[derive(Debug, Clone, Copy)]
pub struct WignerGridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_x: usize,
    pub n_p: usize,
}

impl Default for WignerGridSpec {
    fn default() -> Self {
        Self {
            x_min: -6.0,
            x_max: 6.0,
            p_min: -6.0,
            p_max: 6.0,
            n_x: 201,
            n_p: 201,
        }
    }
}

impl WignerGridSpec {
    /// Symmetric square grid [-half, half]² with an odd point count so the
    /// origin lies on the grid.
    pub fn symmetric(half: f64, n: usize) -> Self {
        let n = if n % 2 == 0 { n + 1 } else { n };
        Self {
            x_min: -half,
            x_max: half,
            p_min: -half,
            p_max: half,
            n_x: n,
            n_p: n,
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + step * i as f64).collect()
}

fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

/// |0⟩ at the given cutoff.
pub fn vacuum(dim: usize) -> Result<PureState> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dim = 0".into()));
    }
    let mut a = Array1::<C64>::zeros(dim);
    a[0] = c(1.0, 0.0);
    Ok(PureState { amplitudes: a })
}

/// |n⟩ at the given cutoff.
pub fn fock(n: usize, dim: usize) -> Result<PureState> {
    if dim <= n {
        return Err(Error::InvalidDimension(format!("dim {dim} ≤ n {n}")));
    }
    let mut a = Array1::<C64>::zeros(dim);
    a[n] = c(1.0, 0.0);
    Ok(PureState { amplitudes: a })
}

/// Coherent state |α⟩, renormalized after truncation.
pub fn coherent(alpha: C64, dim: usize) -> Result<PureState> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dim = 0".into()));
    }
    if alpha.norm_sqr() > dim as f64 / 4.0 {
        return Err(Error::CutoffTooSmall {
            tail: f64::NAN,
            limit: TAIL_LIMIT,
        });
    }
    let mut a = Array1::<C64>::zeros(dim);
    // c_n = e^{-|α|²/2} αⁿ/√(n!), built iteratively
    let mut term = c((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    a[0] = term;
    for n in 1..dim {
        term *= alpha / c((n as f64).sqrt(), 0.0);
        a[n] = term;
    }
    let mass: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let tail = 1.0 - mass;
    if tail > TAIL_LIMIT {
        return Err(Error::CutoffTooSmall {
            tail,
            limit: TAIL_LIMIT,
        });
    }
    PureState::new(a)
}

/// Cat state ∝ |α⟩ + e^{iφ}|-α⟩ with normalization
/// N = √(2[1 + e^{-2|α|²} cos φ]).
pub fn cat(alpha: C64, phi: f64, dim: usize) -> Result<PureState> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dim = 0".into()));
    }
    let norm = (2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp() * phi.cos())).sqrt();
    if !(norm > 1e-8) {
        return Err(Error::DegenerateCat(norm));
    }
    if alpha.norm_sqr() > dim as f64 / 4.0 {
        return Err(Error::CutoffTooSmall {
            tail: f64::NAN,
            limit: TAIL_LIMIT,
        });
    }
    let phase = C64::from_polar(1.0, phi);
    let mut a = Array1::<C64>::zeros(dim);
    // αⁿ/√(n!) and (-α)ⁿ/√(n!) share magnitude; track one and apply signs
    let pref = c((-alpha.norm_sqr() / 2.0).exp() / norm, 0.0);
    let mut term = c(1.0, 0.0);
    for n in 0..dim {
        if n > 0 {
            term *= alpha / c((n as f64).sqrt(), 0.0);
        }
        let sign = if n % 2 == 0 { c(1.0, 0.0) } else { c(-1.0, 0.0) };
        a[n] = pref * term * (c(1.0, 0.0) + phase * sign);
    }
    let mass: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let tail = 1.0 - mass;
    if tail > TAIL_LIMIT {
        return Err(Error::CutoffTooSmall {
            tail,
            limit: TAIL_LIMIT,
        });
    }
    // preserve exact zeros of the parity structure through normalization
    let scale = c(1.0 / mass.sqrt(), 0.0);
    Ok(PureState {
        amplitudes: a * scale,
    })
}

/// Squeezed vacuum with the squeezed quadrature along p (θ = 90°).
pub fn squeezed_vacuum(r: f64, dim: usize) -> Result<PureState> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dim = 0".into()));
    }
    if r < 0.0 {
        return Err(Error::NegativeInput(format!("squeezing parameter r = {r}")));
    }
    let t = r.tanh();
    let mut a = Array1::<C64>::zeros(dim);
    // c_{2k} = (tanh r)^k √((2k)!)/(2^k k!) / √(cosh r); even series squeezes p
    let mut term = 1.0 / r.cosh().sqrt();
    a[0] = c(term, 0.0);
    let mut k = 1usize;
    while 2 * k < dim {
        let n = 2 * k;
        term *= t * (((n - 1) * n) as f64).sqrt() / (2.0 * k as f64);
        a[n] = c(term, 0.0);
        k += 1;
    }
    let mass: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let tail = 1.0 - mass;
    if tail > TAIL_LIMIT {
        return Err(Error::CutoffTooSmall {
            tail,
            limit: TAIL_LIMIT,
        });
    }
    let scale = c(1.0 / mass.sqrt(), 0.0);
    Ok(PureState {
        amplitudes: a * scale,
    })
}

/// Pure-loss channel: beamsplitter of transmissivity 1-L traced over the
/// environment.
pub fn loss_channel(rho: &DensityMatrix, loss: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&loss) {
        return Err(Error::InvalidLoss(loss));
    }
    if loss == 0.0 {
        return Ok(rho.clone());
    }
    let d = rho.dim();
    let eta = 1.0 - loss;
    let lnf = ln_factorial_table(d);
    let mut out = Array2::<C64>::zeros((d, d));
    // Kraus A_k with (A_k)_{n-k,n} = √(C(n,k) η^{n-k} L^k)
    for k in 0..d {
        let mut coef = vec![0.0; d]; // coef[n] for n ≥ k
        for n in k..d {
            let ln_binom = lnf[n] - lnf[k] - lnf[n - k];
            let ln_w = ln_binom
                + (n - k) as f64 * eta.max(f64::MIN_POSITIVE).ln()
                + k as f64 * loss.ln();
            coef[n] = if eta == 0.0 && n != k {
                0.0
            } else {
                (0.5 * ln_w).exp()
            };
        }
        for m in k..d {
            for n in k..d {
                out[[m - k, n - k]] += c(coef[m] * coef[n], 0.0) * rho.elements[[m, n]];
            }
        }
    }
    DensityMatrix::new(out)
}

/// Two-mode beamsplitter a†_s → √T a†_s + √(1-T) a†_i. The output cutoffs
/// expand to hold the full total-photon-number support, so the map is exactly
/// unitary on the truncated input.
pub fn beamsplitter(psi: &TwoModeState, transmissivity: f64) -> Result<TwoModeState> {
    if !(0.0..=1.0).contains(&transmissivity) {
        return Err(Error::InvalidTransmissivity(transmissivity));
    }
    let (ns, ni) = psi.dims();
    let n_out = ns + ni - 1;
    let st = transmissivity.sqrt();
    let sr = (1.0 - transmissivity).sqrt();
    let lnf = ln_factorial_table(n_out);
    let mut out = Array2::<C64>::zeros((n_out, n_out));
    for m in 0..ns {
        for n in 0..ni {
            let amp = psi.amplitudes[[m, n]];
            if amp.norm_sqr() < 1e-300 {
                continue;
            }
            // (√T a†_s + √(1-T) a†_i)^m (-√(1-T) a†_s + √T a†_i)^n |0,0⟩
            for j in 0..=m {
                for k in 0..=n {
                    let out_s = j + (n - k);
                    let out_i = (m - j) + k;
                    let ln_comb = lnf[m] - lnf[j] - lnf[m - j] + lnf[n] - lnf[k] - lnf[n - k];
                    let mut coef = ln_comb.exp()
                        * st.powi((j + k) as i32)
                        * sr.powi((m - j + n - k) as i32);
                    if (n - k) % 2 == 1 {
                        coef = -coef;
                    }
                    // ⟨out|: √(out_s! out_i!) / √(m! n!)
                    let ln_norm = 0.5 * (lnf[out_s] + lnf[out_i] - lnf[m] - lnf[n]);
                    out[[out_s, out_i]] += amp * c(coef * ln_norm.exp(), 0.0);
                }
            }
        }
    }
    Ok(TwoModeState { amplitudes: out })
}

/// Oscillator eigenfunctions ψ_0..ψ_{dim-1} at a point (ħ = 1, ground-state
/// variance 1/2).
pub fn oscillator_eigenfunctions(dim: usize, x: f64) -> Vec<f64> {
    let mut psi = vec![0.0; dim];
    let norm0 = std::f64::consts::PI.powf(-0.25);
    psi[0] = norm0 * (-x * x / 2.0).exp();
    if dim > 1 {
        psi[1] = (2.0_f64).sqrt() * x * psi[0];
    }
    for n in 2..dim {
        let nf = n as f64;
        psi[n] = (2.0 / nf).sqrt() * x * psi[n - 1] - ((nf - 1.0) / nf).sqrt() * psi[n - 2];
    }
    psi
}

/// Quadrature marginal p(x|θ) = Σ ρ_mn e^{i(n-m)θ} ψ_m(x) ψ_n(x) on a grid.
/// Errors if the grid fails to capture the distribution (trapezoid integral
/// off unity by more than 1e-6).
pub fn quadrature_pdf(rho: &DensityMatrix, theta: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let d = rho.dim();
    let pdf: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let psi = oscillator_eigenfunctions(d, x);
            let mut p = 0.0;
            for m in 0..d {
                p += rho.elements[[m, m]].re * psi[m] * psi[m];
                for n in (m + 1)..d {
                    let phase = C64::from_polar(1.0, (n as f64 - m as f64) * theta);
                    p += 2.0 * (rho.elements[[m, n]] * phase).re * psi[m] * psi[n];
                }
            }
            p.max(0.0)
        })
        .collect();
    let integral = trapezoid(xs, &pdf);
    if (integral - 1.0).abs() > 1e-6 {
        return Err(Error::CutoffTooSmall {
            tail: (integral - 1.0).abs(),
            limit: 1e-6,
        });
    }
    Ok(pdf)
}

pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum()
}

/// Quadrature variance of squeezed light with squeezing r and loss L:
/// ⟨x_θ²⟩ = ½(1-L)[e^{2r} cos²θ + e^{-2r} sin²θ] + ½L.
/// θ = 0 is anti-squeezed, θ = 90° squeezed (matching `squeezed_vacuum`).
pub fn eq8_variance(r: f64, loss: f64, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&loss) {
        return Err(Error::InvalidLoss(loss));
    }
    let ct = theta.cos();
    let st = theta.sin();
    Ok(0.5 * (1.0 - loss) * ((2.0 * r).exp() * ct * ct + (-2.0 * r).exp() * st * st) + 0.5 * loss)
}

/// W(x, p) at a single phase-space point via the displaced-parity
/// Laguerre closed form.
pub fn wigner_point(rho: &DensityMatrix, x: f64, p: f64) -> f64 {
    let d = rho.dim();
    // W = (1/π) Σ ρ_mn (-1)^m ⟨n|D(λ)|m⟩ with λ = √2 (x + ip)
    let lambda = c(x, p) * c((2.0_f64).sqrt(), 0.0);
    let a2 = lambda.norm_sqr();
    let gauss = (-a2 / 2.0).exp();
    // L_m^{(k)}(a2) for all m + k < d
    let mut lag = vec![vec![0.0; d]; d];
    for k in 0..d {
        lag[0][k] = 1.0;
        if d > 1 {
            lag[1][k] = 1.0 + k as f64 - a2;
        }
        for m in 2..d {
            let mf = m as f64;
            lag[m][k] = ((2.0 * mf - 1.0 + k as f64 - a2) * lag[m - 1][k]
                - (mf - 1.0 + k as f64) * lag[m - 2][k])
                / mf;
        }
    }
    let mut lam_pows = vec![c(1.0, 0.0); d];
    for k in 1..d {
        lam_pows[k] = lam_pows[k - 1] * lambda;
    }
    let lnf = ln_factorial_table(d);
    let mut w = 0.0;
    for m in 0..d {
        let par = if m % 2 == 0 { 1.0 } else { -1.0 };
        // diagonal
        w += par * rho.elements[[m, m]].re * gauss * lag[m][0];
        for n in (m + 1)..d {
            let k = n - m;
            // ⟨n|D(λ)|m⟩ = √(m!/n!) λ^{n-m} e^{-|λ|²/2} L_m^{(n-m)}(|λ|²)
            let ratio = (0.5 * (lnf[m] - lnf[n])).exp();
            let elem = lam_pows[k] * c(ratio * gauss * lag[m][k], 0.0);
            w += 2.0 * par * (rho.elements[[n, m]] * elem).re;
        }
    }
    w / std::f64::consts::PI
}

/// Sample the Wigner function on a grid. Errors when the grid misses too
/// much of the state (Riemann sum off unity by more than 1e-3).
pub fn wigner(rho: &DensityMatrix, spec: &WignerGridSpec) -> Result<WignerGrid> {
    let xs = linspace(spec.x_min, spec.x_max, spec.n_x);
    let ps = linspace(spec.p_min, spec.p_max, spec.n_p);
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| ps.iter().map(|&p| wigner_point(rho, x, p)).collect())
        .collect();
    let mut values = Array2::<f64>::zeros((spec.n_x, spec.n_p));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    let grid = WignerGrid {
        x_min: spec.x_min,
        x_max: spec.x_max,
        p_min: spec.p_min,
        p_max: spec.p_max,
        n_x: spec.n_x,
        n_p: spec.n_p,
        values,
    };
    if (grid.integral() - 1.0).abs() > 1e-3 {
        return Err(Error::CutoffTooSmall {
            tail: (grid.integral() - 1.0).abs(),
            limit: 1e-3,
        });
    }
    Ok(grid)
}

/// Default grid extent for a state: symmetric square covering at least
/// 6 standard deviations of the widest quadrature plus any displacement.
pub fn auto_grid_spec(rho: &DensityMatrix) -> WignerGridSpec {
    let vx = rho.quadrature_variance(0.0);
    let vp = rho.quadrature_variance(std::f64::consts::FRAC_PI_2);
    let v45 = rho.quadrature_variance(std::f64::consts::FRAC_PI_4);
    let sigma = vx.max(vp).max(v45).sqrt();
    let mu = rho
        .quadrature_mean(0.0)
        .abs()
        .max(rho.quadrature_mean(std::f64::consts::FRAC_PI_2).abs());
    let half = (mu + 6.0 * sigma).max(5.0);
    WignerGridSpec::symmetric(half, 201)
}

/// Global Wigner minimum: grid scan refined by local quadratic
/// interpolation, returning (value, (x, p)).
pub fn wigner_min(rho: &DensityMatrix) -> Result<(f64, (f64, f64))> {
    let spec = auto_grid_spec(rho);
    let grid = wigner(rho, &spec)?;
    let xs = grid.xs();
    let ps = grid.ps();
    let (mut bi, mut bj) = (0usize, 0usize);
    let mut best = f64::INFINITY;
    for i in 0..grid.n_x {
        for j in 0..grid.n_p {
            if grid.values[[i, j]] < best {
                best = grid.values[[i, j]];
                bi = i;
                bj = j;
            }
        }
    }
    let mut loc = (xs[bi], ps[bj]);
    let mut val = best;
    if bi > 0 && bi + 1 < grid.n_x && bj > 0 && bj + 1 < grid.n_p {
        let refine = |wm: f64, w0: f64, wp: f64, h: f64| -> f64 {
            let denom = wm - 2.0 * w0 + wp;
            if denom.abs() < 1e-300 {
                0.0
            } else {
                0.5 * h * (wm - wp) / denom
            }
        };
        let dx = refine(
            grid.values[[bi - 1, bj]],
            grid.values[[bi, bj]],
            grid.values[[bi + 1, bj]],
            grid.dx(),
        );
        let dp = refine(
            grid.values[[bi, bj - 1]],
            grid.values[[bi, bj]],
            grid.values[[bi, bj + 1]],
            grid.dp(),
        );
        let cand = (xs[bi] + dx, ps[bj] + dp);
        let wv = wigner_point(rho, cand.0, cand.1);
        if wv < val {
            val = wv;
            loc = cand;
        }
    }
    Ok((val, loc))
}

/// Uhlmann fidelity F(ρ, σ) = (Tr √(√ρ σ √ρ))².
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    let s = linalg::sqrtm_psd(rho.elements());
    let inner = s.dot(sigma.elements()).dot(&s);
    let f = linalg::trace_sqrt(&inner);
    Ok((f * f).clamp(0.0, 1.0 + 1e-9).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const DEG90: f64 = PI / 2.0;

    #[test]
    fn vacuum_basics() {
        let v = vacuum(10).unwrap();
        assert_eq!(v.amplitude(0), c(1.0, 0.0));
        assert!(v.amplitudes().iter().skip(1).all(|a| a.norm() == 0.0));
        assert!(vacuum(0).is_err());
        let rho = vacuum(20).unwrap().density_matrix();
        assert!((rho.quadrature_variance(0.0) - 0.5).abs() < 1e-12);
        assert!((wigner_point(&rho, 0.0, 0.0) - 1.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn coherent_basics() {
        let v = coherent(c(0.0, 0.0), 8).unwrap();
        assert!((v.amplitude(0).re - 1.0).abs() < 1e-12);
        let a = coherent(c(1.5, 0.0), 40).unwrap();
        assert!((a.mean_photon_number() - 2.25).abs() < 1e-6);
        let p = coherent(c(1.0, 0.0), 40).unwrap();
        let m = coherent(c(-1.0, 0.0), 40).unwrap();
        let ov = p.overlap(&m).unwrap().norm_sqr();
        assert!((ov - (-4.0_f64).exp()).abs() < 1e-10);
        // truncation safety
        assert!(coherent(c(3.0, 0.0), 8).is_err());
    }

    #[test]
    fn cat_parity_structure() {
        let odd = cat(c(1.2, 0.0), PI, 30).unwrap();
        for n in (0..30).step_by(2) {
            assert!(odd.amplitude(n).norm() <= 1e-12, "even amp at n={n}");
        }
        let even = cat(c(1.2, 0.0), 0.0, 30).unwrap();
        for n in (1..30).step_by(2) {
            assert!(even.amplitude(n).norm() <= 1e-12, "odd amp at n={n}");
        }
        let rho = cat(c(2.0, 0.0), PI, 40).unwrap().density_matrix();
        assert!((wigner_point(&rho, 0.0, 0.0) + 1.0 / PI).abs() < 1e-6);
        // φ=π, α→0 is degenerate
        assert!(matches!(
            cat(c(0.0, 0.0), PI, 10),
            Err(Error::DegenerateCat(_))
        ));
    }

    #[test]
    fn squeezed_vacuum_basics() {
        let v = squeezed_vacuum(0.0, 10).unwrap();
        assert!((v.amplitude(0).re - 1.0).abs() < 1e-12);
        let s = squeezed_vacuum(0.5, 40).unwrap();
        for n in (1..40).step_by(2) {
            assert!(s.amplitude(n).norm() <= 1e-12);
        }
        let rho = s.density_matrix();
        // p squeezed, x anti-squeezed
        assert!((rho.quadrature_variance(DEG90) - (-1.0_f64).exp() / 2.0).abs() < 1e-4);
        assert!((rho.quadrature_variance(0.0) - (1.0_f64).exp() / 2.0).abs() < 1e-4);
        assert!(squeezed_vacuum(2.5, 10).is_err()); // cutoff too small
    }

    #[test]
    fn loss_channel_basics() {
        let rho = cat(c(1.0, 0.0), PI, 20).unwrap().density_matrix();
        let same = loss_channel(&rho, 0.0).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                assert!((same.element(i, j) - rho.element(i, j)).norm() < 1e-14);
            }
        }
        let one = fock(1, 2).unwrap().density_matrix();
        let l = 0.3;
        let lossy = loss_channel(&one, l).unwrap();
        assert!((lossy.element(0, 0).re - l).abs() < 1e-12);
        assert!((lossy.element(1, 1).re - (1.0 - l)).abs() < 1e-12);
        let dead = loss_channel(&rho, 1.0).unwrap();
        assert!((dead.element(0, 0).re - 1.0).abs() < 1e-12);
        assert!(loss_channel(&rho, 1.5).is_err());
        // mean photon number scales by 1-L
        let lossy2 = loss_channel(&rho, 0.23).unwrap();
        assert!(
            (lossy2.mean_photon_number() - 0.77 * rho.mean_photon_number()).abs() < 1e-10
        );
    }

    #[test]
    fn loss_channel_composition() {
        let rho = squeezed_vacuum(0.4, 20).unwrap().density_matrix();
        let a = loss_channel(&loss_channel(&rho, 0.1).unwrap(), 0.2).unwrap();
        let b = loss_channel(&rho, 1.0 - 0.9 * 0.8).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                assert!((a.element(i, j) - b.element(i, j)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn beamsplitter_basics() {
        let one = fock(1, 2).unwrap();
        let vac = vacuum(1).unwrap();
        let psi = TwoModeState::product(&one, &vac);
        let id = beamsplitter(&psi, 1.0).unwrap();
        assert!((id.amplitudes()[[1, 0]].norm() - 1.0).abs() < 1e-12);
        let half = beamsplitter(&psi, 0.5).unwrap();
        assert!((half.amplitudes()[[1, 0]].norm() - 1.0 / 2.0_f64.sqrt()).abs() < 1e-12);
        assert!((half.amplitudes()[[0, 1]].norm() - 1.0 / 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn beamsplitter_unitarity_random() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a = Array2::from_shape_fn((4, 4), |_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            let psi = TwoModeState::new(a).unwrap();
            let t: f64 = rng.gen();
            let out = beamsplitter(&psi, t).unwrap();
            assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
            // total photon number distribution preserved
            let dist_in = total_photon_dist(&psi);
            let dist_out = total_photon_dist(&out);
            for (k, v) in dist_in.iter().enumerate() {
                assert!((v - dist_out[k]).abs() < 1e-12);
            }
        }
    }

    fn total_photon_dist(psi: &TwoModeState) -> Vec<f64> {
        let (ns, ni) = psi.dims();
        let mut d = vec![0.0; ns + ni - 1];
        for m in 0..ns {
            for n in 0..ni {
                d[m + n] += psi.amplitudes()[[m, n]].norm_sqr();
            }
        }
        d
    }

    #[test]
    fn wigner_known_values() {
        let vac = vacuum(20).unwrap().density_matrix();
        let g = wigner(&vac, &WignerGridSpec::default()).unwrap();
        let center = g.values[[100, 100]];
        assert!((center - 1.0 / PI).abs() < 1e-12);
        assert!(g.values.iter().all(|&v| v <= center + 1e-12));

        let one = fock(1, 10).unwrap().density_matrix();
        assert!((wigner_point(&one, 0.0, 0.0) + 1.0 / PI).abs() < 1e-12);

        // mixed parity: 0.77|1⟩⟨1| + 0.23|0⟩⟨0|
        let mixed = loss_channel(&one, 0.23).unwrap();
        assert!((wigner_point(&mixed, 0.0, 0.0) - (1.0 - 2.0 * 0.77) / PI).abs() < 1e-12);
    }

    #[test]
    fn wigner_matches_integral_transform_oracle() {
        // W(x,p) = (1/2π) ∫ e^{ipy} ⟨x - y/2|ρ|x + y/2⟩ dy, evaluated by
        // quadrature with oscillator wavefunctions
        let st = cat(c(1.3, 0.0), PI, 25).unwrap();
        let rho = st.density_matrix();
        let ys = linspace(-12.0, 12.0, 1201);
        for &(x, p) in &[(0.0, 0.0), (0.7, -0.3), (1.9, 0.4), (-1.2, 1.1)] {
            let vals: Vec<f64> = ys
                .iter()
                .map(|&y| {
                    let left = oscillator_eigenfunctions(25, x - y / 2.0);
                    let right = oscillator_eigenfunctions(25, x + y / 2.0);
                    let mut s = c(0.0, 0.0);
                    for m in 0..25 {
                        for n in 0..25 {
                            s += rho.element(m, n) * c(left[m] * right[n], 0.0);
                        }
                    }
                    (s * C64::from_polar(1.0, p * y)).re
                })
                .collect();
            let oracle = trapezoid(&ys, &vals) / (2.0 * PI);
            let got = wigner_point(&rho, x, p);
            assert!(
                (got - oracle).abs() < 1e-8,
                "W({x},{p}): {got} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn parity_identity_random_states() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let g = Array2::from_shape_fn((12, 12), |_| {
                c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let rho = DensityMatrix::new(g.dot(&crate::linalg::dagger(&g))).unwrap();
            let w0 = wigner_point(&rho, 0.0, 0.0);
            assert!((w0 - rho.parity() / PI).abs() < 1e-9);
        }
    }

    #[test]
    fn quadrature_pdf_basics() {
        let xs = linspace(-6.0, 6.0, 601);
        let vac = vacuum(20).unwrap().density_matrix();
        let pdf = quadrature_pdf(&vac, 0.3, &xs).unwrap();
        let var = pdf_variance(&xs, &pdf);
        assert!((var - 0.5).abs() < 1e-6);

        let one = fock(1, 10).unwrap().density_matrix();
        for theta in [0.0, 0.7, 2.1] {
            let pdf = quadrature_pdf(&one, theta, &xs).unwrap();
            assert!(pdf[300] < 1e-12); // node at x=0
        }

        let sq = squeezed_vacuum(0.5, 40).unwrap().density_matrix();
        let pdf = quadrature_pdf(&sq, 0.0, &xs).unwrap();
        assert!((pdf_variance(&xs, &pdf) - 1.0_f64.exp() / 2.0).abs() < 1e-3);
    }

    fn pdf_variance(xs: &[f64], pdf: &[f64]) -> f64 {
        let m: f64 = trapezoid(xs, &xs.iter().zip(pdf).map(|(x, p)| x * p).collect::<Vec<_>>());
        let m2: f64 =
            trapezoid(xs, &xs.iter().zip(pdf).map(|(x, p)| x * x * p).collect::<Vec<_>>());
        m2 - m * m
    }

    #[test]
    fn eq8_values() {
        assert!((eq8_variance(0.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((eq8_variance(0.7, 1.0, 0.3).unwrap() - 0.5).abs() < 1e-15);
        let v = eq8_variance(0.5, 0.23, DEG90).unwrap();
        assert!((v - (0.5 * 0.77 * (-1.0_f64).exp() + 0.115)).abs() < 1e-12);
        assert!(eq8_variance(0.5, -0.1, 0.0).is_err());
    }

    #[test]
    fn eq8_matches_lossy_squeezed_pdf() {
        let xs = linspace(-8.0, 8.0, 801);
        let r = 0.45;
        let l = 0.23;
        let rho = loss_channel(&squeezed_vacuum(r, 30).unwrap().density_matrix(), l).unwrap();
        for theta in [0.0, 0.6, DEG90, 2.4] {
            let pdf = quadrature_pdf(&rho, theta, &xs).unwrap();
            let var = pdf_variance(&xs, &pdf);
            let expect = eq8_variance(r, l, theta).unwrap();
            assert!((var - expect).abs() < 1e-3, "θ={theta}: {var} vs {expect}");
        }
    }

    #[test]
    fn fidelity_basics() {
        let rho = cat(c(1.0, 0.0), PI, 20).unwrap().density_matrix();
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);
        let v = vacuum(5).unwrap().density_matrix();
        let o = fock(1, 5).unwrap().density_matrix();
        assert!(fidelity(&v, &o).unwrap() < 1e-12);
        assert!(fidelity(&v, &rho).is_err());
        // pure σ: F = ⟨ψ|ρ|ψ⟩
        let sq = squeezed_vacuum(0.3, 20).unwrap();
        let lossy = loss_channel(&sq.density_matrix(), 0.2).unwrap();
        let f = fidelity(&lossy, &sq.density_matrix()).unwrap();
        let mut direct = c(0.0, 0.0);
        for m in 0..20 {
            for n in 0..20 {
                direct += sq.amplitude(m).conj() * lossy.element(m, n) * sq.amplitude(n);
            }
        }
        assert!((f - direct.re).abs() < 1e-6);
    }

    #[test]
    fn wigner_min_basics() {
        let one = fock(1, 10).unwrap().density_matrix();
        let (v, (x, p)) = wigner_min(&one).unwrap();
        assert!((v + 1.0 / PI).abs() < 1e-9);
        assert!(x.abs() < 1e-6 && p.abs() < 1e-6);
        let vac = vacuum(10).unwrap().density_matrix();
        let (v, _) = wigner_min(&vac).unwrap();
        assert!(v >= -1e-12);
    }

    #[test]
    fn trace_preserved_by_channels() {
        let rho = cat(c(1.4, 0.0), PI, 25).unwrap().density_matrix();
        for l in [0.0, 0.1, 0.5, 0.9] {
            let out = loss_channel(&rho, l).unwrap();
            assert!((out.trace() - 1.0).abs() < 1e-10);
            out.validate().unwrap();
        }
    }
}
