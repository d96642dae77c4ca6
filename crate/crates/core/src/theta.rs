//! Numerical evaluation of the Riemann theta function, its real-valued norm
//! `‖θ‖`, and the abelian invariant `I(A,Θ)` by integration over the
//! fundamental domain `[0,1)^{2g}`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thiserror::Error;

use crate::lattice::{halton, PRIMES};

/// Default cap on the dimension `g` (enumeration cost grows exponentially).
pub const DEFAULT_MAX_G: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum ThetaError {
    #[error("tau must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("tau is not symmetric at ({i},{j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("Im(tau) is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension {0} exceeds the configured cap {1}")]
    DimensionTooLarge(usize, usize),
    #[error("series truncation needs {0} terms, exceeding the budget {1}")]
    TruncationFailure(u64, u64),
    #[error("need at least {1} samples, got {0}")]
    TooFewSamples(usize, usize),
    #[error("more than 0.01% of samples produced non-finite log values")]
    NonFinite,
}

/// A point `τ` of the Siegel upper half-space: symmetric with
/// positive-definite imaginary part.
#[derive(Debug, Clone)]
pub struct PeriodMatrix {
    g: usize,
    tau: DMatrix<Complex64>,
    im: DMatrix<f64>,
    im_chol: Cholesky<f64, nalgebra::Dyn>,
    /// Smallest eigenvalue of `π·Im(τ)`, used for certified tail bounds.
    lambda_min: f64,
    log_det_im: f64,
}

/// Real coordinates `(a, b)` encoding `z = a + τ b`. Not reduced mod 1;
/// quasi-periodicity tests rely on unreduced values.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPairPoint {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl RealPairPoint {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        RealPairPoint { a, b }
    }
}

/// A truncated theta value with a certified bound on the truncation error.
#[derive(Debug, Clone, Copy)]
pub struct ThetaEvaluation {
    pub value: Complex64,
    pub tail_bound: f64,
    pub terms_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    MonteCarlo,
    LowDiscrepancy,
}

/// Estimate of `I(A,Θ)` with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct InvariantEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Samples re-drawn because they landed on the theta divisor.
    pub redrawn: u64,
}

const ENUM_BUDGET: u64 = 20_000_000;

impl PeriodMatrix {
    pub fn new(tau: DMatrix<Complex64>) -> Result<Self, ThetaError> {
        Self::with_max_g(tau, DEFAULT_MAX_G)
    }

    pub fn with_max_g(tau: DMatrix<Complex64>, max_g: usize) -> Result<Self, ThetaError> {
        let (r, c) = tau.shape();
        if r != c {
            return Err(ThetaError::NotSquare(r, c));
        }
        if r > max_g {
            return Err(ThetaError::DimensionTooLarge(r, max_g));
        }
        let scale = tau
            .iter()
            .map(|z| z.norm())
            .fold(1.0f64, f64::max);
        for i in 0..r {
            for j in (i + 1)..r {
                if (tau[(i, j)] - tau[(j, i)]).norm() > 1e-12 * scale {
                    return Err(ThetaError::NotSymmetric { i, j });
                }
            }
        }
        let im = DMatrix::from_fn(r, r, |i, j| 0.5 * (tau[(i, j)].im + tau[(j, i)].im));
        // Leading-minor Cholesky by hand to report the failing pivot.
        {
            let mut m = im.clone();
            for k in 0..r {
                let mut d = m[(k, k)];
                for l in 0..k {
                    d -= m[(l, k)] * m[(l, k)];
                }
                if d <= 0.0 || !d.is_finite() {
                    return Err(ThetaError::NotPositiveDefinite { pivot: k });
                }
                let s = d.sqrt();
                m[(k, k)] = s;
                for j in (k + 1)..r {
                    let mut v = m[(k, j)];
                    for l in 0..k {
                        v -= m[(l, k)] * m[(l, j)];
                    }
                    m[(k, j)] = v / s;
                }
            }
        }
        let im_chol = Cholesky::new(im.clone()).ok_or(ThetaError::NotPositiveDefinite { pivot: 0 })?;
        let log_det_im = 2.0 * im_chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let lambda_min = if r == 0 {
            f64::INFINITY
        } else {
            PI * im.clone().symmetric_eigen().eigenvalues.min()
        };
        Ok(PeriodMatrix {
            g: r,
            tau,
            im,
            im_chol,
            lambda_min,
            log_det_im,
        })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn tau(&self) -> &DMatrix<Complex64> {
        &self.tau
    }

    pub fn im(&self) -> &DMatrix<f64> {
        &self.im
    }

    pub fn log_det_im(&self) -> f64 {
        self.log_det_im
    }

    /// `Im(τ)^{-1} v`.
    pub fn im_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.im_chol.solve(v)
    }
}

/// `2 Σ_{m≥0} e^{-λ m²} ≤ 2(1 + e^{-λ}/(1-e^{-λ}))`, a bound on any
/// one-dimensional shifted Gaussian lattice sum.
fn axis_sum_bound(lambda: f64) -> f64 {
    let e = (-lambda).exp();
    2.0 * (1.0 + e / (1.0 - e))
}

/// Per-axis enumeration radius so that the outside-the-box tail is below
/// `eps`: `g · S(λ)^g · e^{-λρ²} ≤ eps`.
fn enum_radius(g: usize, lambda: f64, eps: f64) -> f64 {
    let s = axis_sum_bound(lambda);
    let log_c = (g as f64).ln() + g as f64 * s.ln();
    (((log_c - eps.ln()) / lambda).max(0.0)).sqrt()
}

fn tail_bound_at(g: usize, lambda: f64, rho: f64) -> f64 {
    let s = axis_sum_bound(lambda);
    (g as f64) * s.powi(g as i32) * (-lambda * rho * rho).exp()
}

/// Iterator over the integer box `|n_i + c_i| ≤ ρ`.
struct BoxIter {
    lo: Vec<i64>,
    hi: Vec<i64>,
    cur: Vec<i64>,
    done: bool,
}

impl BoxIter {
    fn new(center: &[f64], rho: f64) -> Result<Self, ThetaError> {
        let mut lo = Vec::with_capacity(center.len());
        let mut hi = Vec::with_capacity(center.len());
        let mut total: u64 = 1;
        for &c in center {
            let l = (-c - rho).ceil();
            let h = (-c + rho).floor();
            // Check the budget in floating point first: a near-degenerate
            // period matrix can make the box wider than an i64 holds.
            let width = (h - l + 1.0).max(0.0);
            if width > ENUM_BUDGET as f64 {
                return Err(ThetaError::TruncationFailure(u64::MAX, ENUM_BUDGET));
            }
            total = total.saturating_mul((width as u64).max(1));
            if total > ENUM_BUDGET {
                return Err(ThetaError::TruncationFailure(total, ENUM_BUDGET));
            }
            let (l, h) = (l as i64, h as i64);
            lo.push(l);
            hi.push(h.max(l));
        }
        let cur = lo.clone();
        Ok(BoxIter {
            lo,
            hi,
            cur,
            done: center.is_empty(),
        })
    }
}

impl Iterator for BoxIter {
    type Item = Vec<i64>;
    fn next(&mut self) -> Option<Vec<i64>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        let mut i = 0;
        loop {
            if i == self.cur.len() {
                self.done = true;
                break;
            }
            self.cur[i] += 1;
            if self.cur[i] <= self.hi[i] {
                break;
            }
            self.cur[i] = self.lo[i];
            i += 1;
        }
        Some(out)
    }
}

/// `θ(τ,z) = Σ_n exp(πi n^T τ n + 2πi n^T z)`, truncated over a box whose
/// Gaussian tail is certified to be below `eps`.
pub fn riemann_theta(
    tau: &PeriodMatrix,
    z: &[Complex64],
    eps: f64,
) -> Result<ThetaEvaluation, ThetaError> {
    assert!(eps > 0.0, "eps must be positive");
    assert_eq!(z.len(), tau.g());
    let g = tau.g();
    if g == 0 {
        return Ok(ThetaEvaluation {
            value: Complex64::new(1.0, 0.0),
            tail_bound: 0.0,
            terms_used: 1,
        });
    }
    let y = DVector::from_iterator(g, z.iter().map(|zi| zi.im));
    let c = tau.im_solve(&y);
    // |term| = exp(π y^T Y^{-1} y) · exp(-π (n+c)^T Y (n+c)).
    let prefac_log = PI * y.dot(&c);
    let lambda = tau.lambda_min;
    let rho = enum_radius(g, lambda, eps * (-prefac_log).exp());
    let center: Vec<f64> = c.iter().copied().collect();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut terms = 0u64;
    for n in BoxIter::new(&center, rho)? {
        let mut quad = Complex64::new(0.0, 0.0);
        let mut lin = Complex64::new(0.0, 0.0);
        for i in 0..g {
            let ni = n[i] as f64;
            lin += z[i] * ni;
            for j in 0..g {
                quad += tau.tau[(i, j)] * ni * n[j] as f64;
            }
        }
        let expo = Complex64::i() * PI * quad + Complex64::i() * 2.0 * PI * lin;
        sum += expo.exp();
        terms += 1;
    }
    Ok(ThetaEvaluation {
        value: sum,
        tail_bound: prefac_log.exp() * tail_bound_at(g, lambda, rho),
        terms_used: terms,
    })
}

/// Scaled value of the series `Σ_n exp(πi (n+b)^T τ (n+b) + 2πi n^T a)`:
/// the true sum is `exp(log_scale) · sum`, with `|sum|` of order one. The
/// relative truncation error is certified below `eps_rel`.
pub(crate) struct ScaledSeries {
    pub sum: Complex64,
    pub log_scale: f64,
    #[allow(dead_code)]
    pub terms_used: u64,
}

pub(crate) fn theta_ab_series(
    tau: &PeriodMatrix,
    a: &[f64],
    b: &[f64],
    eps_rel: f64,
) -> Result<ScaledSeries, ThetaError> {
    let g = tau.g();
    if g == 0 {
        return Ok(ScaledSeries {
            sum: Complex64::new(1.0, 0.0),
            log_scale: 0.0,
            terms_used: 1,
        });
    }
    // Dominant magnitude from the rounded-coordinate candidate.
    let v0: Vec<f64> = b.iter().map(|&bi| bi - bi.round()).collect();
    let mut q0 = 0.0;
    for i in 0..g {
        for j in 0..g {
            q0 += v0[i] * tau.im[(i, j)] * v0[j];
        }
    }
    let log_scale = -PI * q0;
    let lambda = tau.lambda_min;
    // Need tail ≤ eps_rel · e^{log_scale}.
    let rho = enum_radius(g, lambda, eps_rel * log_scale.exp());
    let mut sum = Complex64::new(0.0, 0.0);
    let mut terms = 0u64;
    for n in BoxIter::new(b, rho)? {
        let mut quad = Complex64::new(0.0, 0.0);
        let mut lin = 0.0;
        for i in 0..g {
            let vi = n[i] as f64 + b[i];
            lin += n[i] as f64 * a[i];
            for j in 0..g {
                quad += tau.tau[(i, j)] * vi * (n[j] as f64 + b[j]);
            }
        }
        let expo = Complex64::i() * PI * quad + Complex64::i() * 2.0 * PI * lin - log_scale;
        sum += expo.exp();
        terms += 1;
    }
    Ok(ScaledSeries {
        sum,
        log_scale,
        terms_used: terms,
    })
}

/// `log ‖θ‖(τ, a+τb)`, computed entirely in log-space so that large `Im τ`
/// neither overflows nor underflows. Returns `-∞` on the theta divisor.
pub fn theta_norm_log(tau: &PeriodMatrix, p: &RealPairPoint) -> Result<f64, ThetaError> {
    let s = theta_ab_series(tau, &p.a, &p.b, 1e-12)?;
    Ok(0.25 * tau.log_det_im + s.log_scale + s.sum.norm().ln())
}

/// `‖θ‖(τ, a+τb) = det(Im τ)^{1/4} |Σ_n exp(πi (n+b)^T τ (n+b) + 2πi n^T a)|`.
pub fn theta_norm(tau: &PeriodMatrix, p: &RealPairPoint) -> Result<f64, ThetaError> {
    Ok(theta_norm_log(tau, p)?.exp())
}

/// `I(A,Θ) = -(g log 2)/2 - 2 ∫_{[0,1)^{2g}} log‖θ‖(τ, a+τb) dλ(a,b)`.
///
/// Monte-Carlo sampling uses one counter-based substream per sample, so the
/// result is independent of any evaluation-order partitioning. Samples on
/// the theta divisor (scaled series magnitude below 1e-13) are re-drawn.
pub fn abelian_invariant(
    tau: &PeriodMatrix,
    integrator: Integrator,
    samples: usize,
    seed: u64,
) -> Result<InvariantEstimate, ThetaError> {
    const MIN_SAMPLES: usize = 1000;
    if samples < MIN_SAMPLES {
        return Err(ThetaError::TooFewSamples(samples, MIN_SAMPLES));
    }
    let g = tau.g();
    let dim = 2 * g;
    let mut redrawn = 0u64;
    let mut nonfinite = 0u64;

    let batches = 16usize;
    let mut batch_sum = vec![0.0f64; batches];
    let mut batch_cnt = vec![0usize; batches];
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;

    let mut point = vec![0.0f64; dim];
    for k in 0..samples {
        let mut attempt = 0u32;
        let val = loop {
            match integrator {
                Integrator::MonteCarlo => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    // Re-draws advance within the same substream.
                    for _ in 0..(attempt as usize * dim) {
                        let _: f64 = rng.gen();
                    }
                    for x in point.iter_mut() {
                        *x = rng.gen::<f64>();
                    }
                }
                Integrator::LowDiscrepancy => {
                    if attempt == 0 {
                        for (d, x) in point.iter_mut().enumerate() {
                            *x = halton(k as u64 + 1, PRIMES[d % PRIMES.len()]);
                        }
                    } else {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
                        rng.set_stream(k as u64 + attempt as u64 * samples as u64);
                        for x in point.iter_mut() {
                            *x = rng.gen::<f64>();
                        }
                    }
                }
            }
            let p = RealPairPoint::new(point[..g].to_vec(), point[g..].to_vec());
            let s = theta_ab_series(tau, &p.a, &p.b, 1e-12)?;
            let mag = s.sum.norm();
            if mag < 1e-13 {
                redrawn += 1;
                attempt += 1;
                if attempt > 100 {
                    nonfinite += 1;
                    break f64::NAN;
                }
                continue;
            }
            let log_norm = 0.25 * tau.log_det_im + s.log_scale + mag.ln();
            if !log_norm.is_finite() {
                nonfinite += 1;
                break f64::NAN;
            }
            break -2.0 * log_norm;
        };
        if !val.is_finite() {
            continue;
        }
        sum += val;
        sum_sq += val * val;
        let bi = k * batches / samples;
        batch_sum[bi] += val;
        batch_cnt[bi] += 1;
    }
    if nonfinite as f64 > 1e-4 * samples as f64 {
        return Err(ThetaError::NonFinite);
    }
    let n_eff = (samples as u64 - nonfinite) as f64;
    let mean = sum / n_eff;
    let stderr = match integrator {
        Integrator::MonteCarlo => {
            let var = (sum_sq / n_eff - mean * mean).max(0.0);
            (var / n_eff).sqrt()
        }
        Integrator::LowDiscrepancy => {
            let mut v = 0.0;
            let mut used = 0usize;
            for i in 0..batches {
                if batch_cnt[i] > 0 {
                    let bm = batch_sum[i] / batch_cnt[i] as f64;
                    v += (bm - mean) * (bm - mean);
                    used += 1;
                }
            }
            if used > 1 {
                (v / (used as f64 * (used - 1) as f64)).sqrt()
            } else {
                0.0
            }
        }
    };
    Ok(InvariantEstimate {
        value: mean - 0.5 * g as f64 * 2.0f64.ln(),
        stderr,
        redrawn,
    })
}

/// Builds a `g=1` period matrix from a single complex number.
pub fn tau_g1(t: Complex64) -> PeriodMatrix {
    PeriodMatrix::new(DMatrix::from_element(1, 1, t)).expect("valid g=1 tau")
}
