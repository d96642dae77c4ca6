//! Degenerating period families over the punctured disc, tropicalization of
//! sections, and the numerical probes for the determinant limit, the theta
//! limit and the asymptotic law of the abelian invariant.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::lattice::{GramLattice, LatticeError, MomentMethod, TorusCoordinate};
use crate::theta::{
    abelian_invariant, riemann_theta, theta_norm_log, Integrator, PeriodMatrix, ThetaError,
};

#[derive(Debug, Error)]
pub enum DegenerationError {
    #[error("t must satisfy 0 < |t| < 1, got |t| = {0}")]
    InvalidT(f64),
    #[error("period matrix left the Siegel upper half-space (pivot {pivot})")]
    NotInSiegelSpace { pivot: usize },
    #[error("family shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Theta(#[from] ThetaError),
    #[error("fit needs at least 5 grid points spanning 4 decades, got {points} points over {decades:.2} decades")]
    GridTooNarrow { points: usize, decades: f64 },
    #[error("design matrix condition number {0:.3e} exceeds 1e10")]
    IllConditionedFit(f64),
}

/// Polynomial in one complex variable, dense coefficient list (constant first).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly(pub Vec<Complex64>);

impl Poly {
    pub fn constant(c: Complex64) -> Self {
        Poly(vec![c])
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.0.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    pub fn at_zero(&self) -> Complex64 {
        self.0.first().copied().unwrap_or(Complex64::new(0.0, 0.0))
    }
}

/// Matrix of polynomials, evaluated entrywise.
#[derive(Debug, Clone, Default)]
pub struct PolyMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<Poly>>,
}

impl PolyMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            entries: vec![vec![Poly::default(); cols]; rows],
        }
    }

    pub fn eval(&self, s: Complex64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entries[i][j].eval(s))
    }

    pub fn at_zero(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entries[i][j].at_zero())
    }

    fn is_symmetric_identity(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let a = &self.entries[i][j].0;
                let b = &self.entries[j][i].0;
                let len = a.len().max(b.len());
                for k in 0..len {
                    let ca = a.get(k).copied().unwrap_or_default();
                    let cb = b.get(k).copied().unwrap_or_default();
                    if (ca - cb).norm() > 1e-12 {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// A degenerating family of period matrices with log-linear block
/// `(m log t)/(2πi)·B + S2` and holomorphic blocks `S1`, `S3` in the
/// chart `s = t^{1/m}`.
#[derive(Debug, Clone)]
pub struct PeriodFamily {
    g1: usize,
    g2: usize,
    m: u32,
    /// The polarized real torus of the family, `Σ_f = Σ_B` with `Q = B`.
    b_lattice: GramLattice,
    s1: PolyMatrix,
    s2: PolyMatrix,
    s3: PolyMatrix,
}

/// A section lift `z̃(t) = a + T_f(t) b` given by real vectors of length `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSpec {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl SectionSpec {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        SectionSpec { a, b }
    }
}

/// Tropicalization data of a section.
#[derive(Debug, Clone)]
pub struct TropData {
    /// `b₂ mod 1` in basis coordinates of `Σ_f`.
    pub point: TorusCoordinate,
    /// `T = ‖Ψ_f‖(trop z)`.
    pub value: f64,
    /// The argmin set `N₁`.
    pub minimizers: Vec<Vec<i64>>,
}

/// One probe sample of the normalized theta limit.
#[derive(Debug, Clone, Copy)]
pub struct ProbeSample {
    pub t: Complex64,
    pub normalized_value: f64,
}

/// Per-point record of the asymptotic fit.
#[derive(Debug, Clone, Copy)]
pub struct FitPoint {
    pub abs_t: f64,
    pub big_l: f64,
    pub invariant: f64,
    pub stderr: f64,
    pub model_value: f64,
    pub residual: f64,
}

/// Result of fitting `I(A_t) ≈ c0 + c1·L - c2·log L` with `L = -log|t|`.
#[derive(Debug, Clone)]
pub struct AsymptoticFit {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// `I(Σ_f)` from the lattice quadrature.
    pub predicted_c1: f64,
    /// `dim Σ_f / 2`.
    pub predicted_c2: f64,
    pub points: Vec<FitPoint>,
}

/// Integration settings for [`PeriodFamily::invariant_asymptotic_fit`].
#[derive(Debug, Clone, Copy)]
pub struct FitIntegrator {
    pub integrator: Integrator,
    pub samples: usize,
    pub seed: u64,
}

impl PeriodFamily {
    pub fn new(
        g1: usize,
        g2: usize,
        m: u32,
        b_lattice: GramLattice,
        s1: PolyMatrix,
        s2: PolyMatrix,
        s3: PolyMatrix,
    ) -> Result<Self, DegenerationError> {
        if g1 + g2 == 0 {
            return Err(DegenerationError::Shape("g1 + g2 must be at least 1".into()));
        }
        if m == 0 {
            return Err(DegenerationError::Shape("m must be positive".into()));
        }
        if b_lattice.rank() != g2 {
            return Err(DegenerationError::Shape(format!(
                "B has rank {} but g2 = {}",
                b_lattice.rank(),
                g2
            )));
        }
        if s1.rows != g1 || s1.cols != g1 {
            return Err(DegenerationError::Shape("S1 must be g1 x g1".into()));
        }
        if s2.rows != g2 || s2.cols != g2 {
            return Err(DegenerationError::Shape("S2 must be g2 x g2".into()));
        }
        if s3.rows != g1 || s3.cols != g2 {
            return Err(DegenerationError::Shape("S3 must be g1 x g2".into()));
        }
        if !s2.is_symmetric_identity() {
            return Err(DegenerationError::Shape(
                "S2 must be symmetric as a polynomial identity".into(),
            ));
        }
        if g1 > 0 {
            // S1(0) must lie in the Siegel upper half-space.
            PeriodMatrix::with_max_g(s1.at_zero(), g1).map_err(siegel_err)?;
        }
        Ok(PeriodFamily {
            g1,
            g2,
            m,
            b_lattice,
            s1,
            s2,
            s3,
        })
    }

    pub fn g(&self) -> usize {
        self.g1 + self.g2
    }

    pub fn g1(&self) -> usize {
        self.g1
    }

    pub fn g2(&self) -> usize {
        self.g2
    }

    pub fn b_lattice(&self) -> &GramLattice {
        &self.b_lattice
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn s1(&self) -> &PolyMatrix {
        &self.s1
    }

    pub fn s2(&self) -> &PolyMatrix {
        &self.s2
    }

    pub fn s3(&self) -> &PolyMatrix {
        &self.s3
    }

    fn log_t(&self, t: Complex64, branch: i64) -> Result<Complex64, DegenerationError> {
        let r = t.norm();
        if !(r > 0.0 && r < 1.0) {
            return Err(DegenerationError::InvalidT(r));
        }
        Ok(Complex64::new(r.ln(), t.arg() + 2.0 * PI * branch as f64))
    }

    /// Assembles `T_f(t)` on the selected branch of `log t`.
    pub fn family_period(
        &self,
        t: Complex64,
        branch: i64,
    ) -> Result<PeriodMatrix, DegenerationError> {
        let tau = self.assemble_tau(t, branch)?;
        PeriodMatrix::with_max_g(tau, self.g()).map_err(siegel_err)
    }

    fn assemble_tau(
        &self,
        t: Complex64,
        branch: i64,
    ) -> Result<DMatrix<Complex64>, DegenerationError> {
        let g1 = self.g1;
        let g2 = self.g2;
        let g = g1 + g2;
        let log_t = self.log_t(t, branch)?;
        // Single-valued blocks live in the chart s = t^{1/m}.
        let s = (log_t / self.m as f64).exp();
        let s1 = self.s1.eval(s);
        let s2 = self.s2.eval(s);
        let s3 = self.s3.eval(s);
        // (m log s)/(2πi) B = (log t)/(2πi) B.
        let factor = log_t / (Complex64::i() * 2.0 * PI);
        let mut tau = DMatrix::from_element(g, g, Complex64::new(0.0, 0.0));
        for i in 0..g1 {
            for j in 0..g1 {
                tau[(i, j)] = s1[(i, j)];
            }
            for j in 0..g2 {
                tau[(i, g1 + j)] = s3[(i, j)];
                tau[(g1 + j, i)] = s3[(i, j)];
            }
        }
        let b = self.b_lattice.gram();
        for i in 0..g2 {
            for j in 0..g2 {
                tau[(g1 + i, g1 + j)] = factor * b[(i, j)] + s2[(i, j)];
            }
        }
        Ok(tau)
    }

    /// Tropicalization of the section: `trop(z) ≡ B b₂ mod BZ^{g2}`, returned
    /// in basis coordinates, together with `T = ‖Ψ_f‖(trop z)` and `N₁`.
    pub fn family_trop(&self, section: &SectionSpec) -> Result<TropData, DegenerationError> {
        self.check_section(section)?;
        let b2 = &section.b[self.g1..];
        let point = TorusCoordinate::new(b2);
        let norm = self.b_lattice.tropical_theta_norm(&point);
        // Report minimizers relative to the unreduced b₂ so that
        // T = ½ min (b₂+n)^T B (b₂+n) is witnessed directly.
        let shift: Vec<i64> = b2.iter().map(|&x| x.div_euclid(1.0) as i64).collect();
        let minimizers = norm
            .minimizers
            .iter()
            .map(|n| n.iter().zip(&shift).map(|(ni, si)| ni - si).collect())
            .collect();
        Ok(TropData {
            point,
            value: norm.value,
            minimizers,
        })
    }

    fn check_section(&self, section: &SectionSpec) -> Result<(), DegenerationError> {
        let g = self.g();
        if section.a.len() != g || section.b.len() != g {
            return Err(DegenerationError::Shape(format!(
                "section vectors must have length {g}"
            )));
        }
        Ok(())
    }

    /// Predicted limit of `det(Im T_f(t)) / (-log|t|)^{g2}`:
    /// `(1/2π)^{g2} · det(Im S₁(0)) · det(B)`.
    pub fn det_im_limit(&self) -> f64 {
        let det_s1 = if self.g1 == 0 {
            1.0
        } else {
            let im = self.s1.at_zero().map(|z| z.im);
            im.determinant()
        };
        let det_b = self.b_lattice.gram().determinant();
        (1.0 / (2.0 * PI)).powi(self.g2 as i32) * det_s1 * det_b
    }

    /// Observed ratio `det(Im T_f(t)) / (-log|t|)^{g2}` at a given `t`.
    pub fn det_im_observed(&self, t: Complex64, branch: i64) -> Result<f64, DegenerationError> {
        let tau = self.family_period(t, branch)?;
        let l = -t.norm().ln();
        Ok(tau.log_det_im().exp() / l.powi(self.g2 as i32))
    }

    /// The limit value `α(a,b)` of the normalized theta probes:
    /// `α = (det(Im S₁(0))·det(B)/(2π)^{g2})^{1/2} · |β(a,b)|²` with `β`
    /// the finite sum over the minimizer set `N₁`.
    pub fn alpha_of_section(
        &self,
        section: &SectionSpec,
        eps: f64,
    ) -> Result<f64, DegenerationError> {
        self.check_section(section)?;
        let g1 = self.g1;
        let trop = self.family_trop(section)?;
        let a1 = &section.a[..g1];
        let a2 = &section.a[g1..];
        let b1 = DVector::from_column_slice(&section.b[..g1]).map(|x| Complex64::new(x, 0.0));
        let b2 = &section.b[g1..];

        let s1_0 = self.s1.at_zero();
        let s2_0 = self.s2.at_zero();
        let s3_0 = self.s3.at_zero();
        let tau1 = if g1 > 0 {
            Some(PeriodMatrix::with_max_g(s1_0.clone(), g1).map_err(siegel_err)?)
        } else {
            None
        };

        let mut beta = Complex64::new(0.0, 0.0);
        for n in &trop.minimizers {
            let nb2 = DVector::from_fn(self.g2, |i, _| {
                Complex64::new(n[i] as f64 + b2[i], 0.0)
            });
            // ½(b₁ᵀS₁(0)b₁ + (n+b₂)ᵀS₂(0)(n+b₂)) + b₁ᵀS₃(0)(n+b₂) + nᵀa₂
            let mut phase = Complex64::new(0.0, 0.0);
            if g1 > 0 {
                phase += 0.5 * (b1.transpose() * &s1_0 * &b1)[(0, 0)];
                phase += (b1.transpose() * &s3_0 * &nb2)[(0, 0)];
            }
            phase += 0.5 * (nb2.transpose() * &s2_0 * &nb2)[(0, 0)];
            for (ni, ai) in n.iter().zip(a2) {
                phase += Complex64::new(*ni as f64 * ai, 0.0);
            }
            let e_factor = (Complex64::i() * 2.0 * PI * phase).exp();
            let theta_factor = match &tau1 {
                None => Complex64::new(1.0, 0.0),
                Some(tau1) => {
                    let mut z = DVector::from_fn(g1, |i, _| Complex64::new(a1[i], 0.0));
                    z += &s3_0 * &nb2;
                    z += &s1_0 * &b1;
                    riemann_theta(tau1, z.as_slice(), eps)?.value
                }
            };
            beta += e_factor * theta_factor;
        }

        let det_s1 = if g1 == 0 {
            1.0
        } else {
            s1_0.map(|z| z.im).determinant()
        };
        let det_b = self.b_lattice.gram().determinant();
        let coeff = (det_s1 * det_b / (2.0 * PI).powi(self.g2 as i32)).sqrt();
        Ok(coeff * beta.norm_sqr())
    }

    /// Normalized values `(‖θ‖(T_f(t), z(t)) · |t|^{-T} · (-log|t|)^{-g2/4})²`
    /// along a decreasing sequence of `t`. Magnitudes are fused in log-space.
    pub fn theta_limit_probe(
        &self,
        section: &SectionSpec,
        t_sequence: &[Complex64],
    ) -> Result<Vec<ProbeSample>, DegenerationError> {
        self.check_section(section)?;
        let trop = self.family_trop(section)?;
        let mut out = Vec::with_capacity(t_sequence.len());
        for &t in t_sequence {
            let tau = self.family_period(t, 0)?;
            let p = crate::theta::RealPairPoint::new(section.a.clone(), section.b.clone());
            let log_norm = theta_norm_log(&tau, &p)?;
            let l = -t.norm().ln();
            let log_val = log_norm - trop.value * t.norm().ln() - (self.g2 as f64 / 4.0) * l.ln();
            out.push(ProbeSample {
                t,
                normalized_value: (2.0 * log_val).exp(),
            });
        }
        Ok(out)
    }

    /// Computes `I(A_t)` on the grid and fits `c0 + c1·L - c2·log L`.
    /// Per-point seeds are derived from the point index, so grid points are
    /// independent and order-insensitive.
    pub fn invariant_asymptotic_fit(
        &self,
        t_abs_grid: &[f64],
        spec: FitIntegrator,
    ) -> Result<AsymptoticFit, DegenerationError> {
        let decades = match (
            t_abs_grid.iter().cloned().fold(f64::INFINITY, f64::min),
            t_abs_grid.iter().cloned().fold(0.0f64, f64::max),
        ) {
            (min, max) if min > 0.0 => (max.log10() - min.log10()).abs(),
            _ => 0.0,
        };
        if t_abs_grid.len() < 5 || decades < 4.0 {
            return Err(DegenerationError::GridTooNarrow {
                points: t_abs_grid.len(),
                decades,
            });
        }

        let mut rows = Vec::with_capacity(t_abs_grid.len());
        for (idx, &abs_t) in t_abs_grid.iter().enumerate() {
            let t = Complex64::new(abs_t, 0.0);
            let tau = self.family_period(t, 0)?;
            let est = abelian_invariant(
                &tau,
                spec.integrator,
                spec.samples,
                spec.seed.wrapping_add(idx as u64),
            )?;
            rows.push((abs_t, -abs_t.ln(), est.value, est.stderr));
        }

        // Ordinary least squares on [1, L, -log L].
        let n = rows.len();
        let design = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => rows[i].1,
            _ => -rows[i].1.ln(),
        });
        let rhs = DVector::from_fn(n, |i, _| rows[i].2);
        let svd = design.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = smax / smin;
        if !cond.is_finite() || cond > 1e10 {
            return Err(DegenerationError::IllConditionedFit(cond));
        }
        let coeffs = svd.solve(&rhs, 0.0).expect("svd solve");

        let points = rows
            .iter()
            .map(|&(abs_t, l, inv, se)| {
                let model = coeffs[0] + coeffs[1] * l - coeffs[2] * l.ln();
                FitPoint {
                    abs_t,
                    big_l: l,
                    invariant: inv,
                    stderr: se,
                    model_value: model,
                    residual: inv - model,
                }
            })
            .collect();

        let predicted_c1 = self.moment_of_torus()?;
        Ok(AsymptoticFit {
            c0: coeffs[0],
            c1: coeffs[1],
            c2: coeffs[2],
            predicted_c1,
            predicted_c2: self.g2 as f64 / 2.0,
            points,
        })
    }

    /// `I(Σ_f)`: grid quadrature for small rank, Halton otherwise.
    pub fn moment_of_torus(&self) -> Result<f64, DegenerationError> {
        let est = match self.g2 {
            0 => return Ok(0.0),
            1 => self.b_lattice.tropical_moment(MomentMethod::Grid, 8192)?,
            2 => self.b_lattice.tropical_moment(MomentMethod::Grid, 1024)?,
            _ => self
                .b_lattice
                .tropical_moment(MomentMethod::LowDiscrepancy, 1 << 20)?,
        };
        Ok(est.estimate)
    }
}

fn siegel_err(e: ThetaError) -> DegenerationError {
    match e {
        ThetaError::NotPositiveDefinite { pivot } => DegenerationError::NotInSiegelSpace { pivot },
        ThetaError::NotSymmetric { i, .. } => DegenerationError::NotInSiegelSpace { pivot: i },
        other => DegenerationError::Theta(other),
    }
}

/// The Tate family: `g1 = 0`, `g2 = 1`, `m = 1`, `B = [[1]]`, all S-blocks 0.
pub fn tate_family() -> PeriodFamily {
    let b = GramLattice::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
    PeriodFamily::new(
        0,
        1,
        1,
        b,
        PolyMatrix::zero(0, 0),
        PolyMatrix::zero(1, 1),
        PolyMatrix::zero(0, 1),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::gram_from_rows;

    fn mixed_family() -> PeriodFamily {
        // g1 = 1 with S1 = i, S3 = 0, B = [[1]].
        let b = GramLattice::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let mut s1 = PolyMatrix::zero(1, 1);
        s1.entries[0][0] = Poly::constant(Complex64::i());
        PeriodFamily::new(1, 1, 1, b, s1, PolyMatrix::zero(1, 1), PolyMatrix::zero(1, 1)).unwrap()
    }

    #[test]
    fn tate_period() {
        let fam = tate_family();
        let t = Complex64::new((-2.0 * PI).exp(), 0.0);
        let tau = fam.family_period(t, 0).unwrap();
        assert!((tau.tau()[(0, 0)] - Complex64::i()).norm() < 1e-12);

        let tau1 = fam.family_period(t, 1).unwrap();
        assert!((tau1.tau()[(0, 0)].im - tau.tau()[(0, 0)].im).abs() < 1e-12);
        assert!((tau1.tau()[(0, 0)].re - tau.tau()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_block_assembly() {
        let fam = mixed_family();
        let t = Complex64::new((-2.0 * PI).exp(), 0.0);
        let tau = fam.family_period(t, 0).unwrap();
        assert!((tau.tau()[(0, 0)] - Complex64::i()).norm() < 1e-12);
        assert!((tau.tau()[(1, 1)] - Complex64::i()).norm() < 1e-12);
        assert!(tau.tau()[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn invalid_t() {
        let fam = tate_family();
        assert!(matches!(
            fam.family_period(Complex64::new(1.5, 0.0), 0),
            Err(DegenerationError::InvalidT(_))
        ));
        assert!(matches!(
            fam.family_period(Complex64::new(0.0, 0.0), 0),
            Err(DegenerationError::InvalidT(_))
        ));
    }

    #[test]
    fn trop_examples() {
        let fam = tate_family();
        let s = SectionSpec::new(vec![0.0], vec![0.0]);
        let trop = fam.family_trop(&s).unwrap();
        assert_eq!(trop.value, 0.0);
        assert_eq!(trop.minimizers, vec![vec![0]]);

        // b₂ integral is the same as zero.
        let s = SectionSpec::new(vec![0.0], vec![3.0]);
        let trop = fam.family_trop(&s).unwrap();
        assert!(trop.value.abs() < 1e-12);

        let s = SectionSpec::new(vec![0.0], vec![0.5]);
        let trop = fam.family_trop(&s).unwrap();
        assert!((trop.value - 0.125).abs() < 1e-12);
        assert_eq!(trop.minimizers, vec![vec![-1], vec![0]]);
    }

    #[test]
    fn det_limit_examples() {
        let fam = tate_family();
        let predicted = fam.det_im_limit();
        assert!((predicted - 1.0 / (2.0 * PI)).abs() < 1e-14);

        let observed = fam
            .det_im_observed(Complex64::new(1e-8, 0.0), 0)
            .unwrap();
        assert!((observed / predicted - 1.0).abs() < 1e-12);

        let mixed = mixed_family();
        assert!((mixed.det_im_limit() - 1.0 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn alpha_examples() {
        let fam = tate_family();
        let inv_sqrt_2pi = 1.0 / (2.0 * PI).sqrt();

        let a = fam
            .alpha_of_section(&SectionSpec::new(vec![0.5], vec![0.0]), 1e-10)
            .unwrap();
        assert!((a - inv_sqrt_2pi).abs() < 1e-12, "{a}");

        let a = fam
            .alpha_of_section(&SectionSpec::new(vec![0.0], vec![0.5]), 1e-10)
            .unwrap();
        assert!((a - 4.0 * inv_sqrt_2pi).abs() < 1e-12, "{a}");

        let a = fam
            .alpha_of_section(&SectionSpec::new(vec![0.5], vec![0.5]), 1e-10)
            .unwrap();
        assert!(a.abs() < 1e-12, "{a}");
    }

    #[test]
    fn probe_converges() {
        let fam = tate_family();
        let section = SectionSpec::new(vec![0.5], vec![0.0]);
        let ts: Vec<Complex64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let probes = fam.theta_limit_probe(&section, &ts).unwrap();
        let alpha = fam.alpha_of_section(&section, 1e-10).unwrap();
        let devs: Vec<f64> = probes
            .iter()
            .map(|p| (p.normalized_value - alpha).abs())
            .collect();
        assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
        // Closed form: deviation at |t| = 1e-6 is α(1-(1-2|t|^{1/2})²) ≈ 4α|t|^{1/2}.
        assert!((devs[2] - 4.0 * alpha * 1e-3).abs() < 1e-5, "{devs:?}");
    }

    #[test]
    fn fit_grid_validation() {
        let fam = tate_family();
        let spec = FitIntegrator {
            integrator: Integrator::MonteCarlo,
            samples: 1000,
            seed: 1,
        };
        assert!(matches!(
            fam.invariant_asymptotic_fit(&[1e-2, 1e-3], spec),
            Err(DegenerationError::GridTooNarrow { .. })
        ));
        assert!(matches!(
            fam.invariant_asymptotic_fit(&[1e-2, 2e-2, 3e-2, 4e-2, 5e-2], spec),
            Err(DegenerationError::GridTooNarrow { .. })
        ));
    }

    #[test]
    fn tate_fit_small() {
        let fam = tate_family();
        let grid: Vec<f64> = (0..6).map(|k| 10f64.powi(-2 - (k as i32))).collect();
        let fit = fam
            .invariant_asymptotic_fit(
                &grid,
                FitIntegrator {
                    integrator: Integrator::MonteCarlo,
                    samples: 60_000,
                    seed: 42,
                },
            )
            .unwrap();
        assert!((fit.predicted_c1 - 1.0 / 12.0).abs() < 1e-6);
        assert_eq!(fit.predicted_c2, 0.5);
        assert!(
            (fit.c1 - fit.predicted_c1).abs() < 0.05 * fit.predicted_c1.abs().max(0.01),
            "c1 = {}",
            fit.c1
        );
        assert!((fit.c2 - 0.5).abs() < 0.35, "c2 = {}", fit.c2);
    }

    #[test]
    fn branch_invariance_of_im() {
        let b = gram_from_rows(&[&[2.0, -1.0], &[-1.0, 2.0]]).unwrap();
        let fam = PeriodFamily::new(
            0,
            2,
            1,
            b,
            PolyMatrix::zero(0, 0),
            PolyMatrix::zero(2, 2),
            PolyMatrix::zero(0, 2),
        )
        .unwrap();
        let t = Complex64::new(0.3, 0.4) * 0.01;
        let t0 = fam.family_period(t, 0).unwrap();
        let t1 = fam.family_period(t, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((t0.im()[(i, j)] - t1.im()[(i, j)]).abs() < 1e-12);
                let diff = t1.tau()[(i, j)].re - t0.tau()[(i, j)].re;
                let b = fam.b_lattice().gram()[(i, j)];
                assert!((diff - 2.0 * b).abs() < 1e-10, "re shift {diff} vs {}", 2.0 * b);
            }
        }
    }
}
