//! Exact-rational evaluators for the arithmetic inequalities: the place
//! aggregators δ(X) and φ(X), the Noether-formula residual, the φ and ω̂²
//! lower bounds and the tautological-cycle height bounds.
//!
//! All coefficient algebra is done in exact rational arithmetic; floats enter
//! only where analytic inputs (ω̂², φ(X), Faltings height) are multiplied in.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::graph::{GraphError, MetrizedGraph, Polarization};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("genus must be at least 2, got {0}")]
    GenusTooSmall(u64),
    #[error("degree d_K must be positive")]
    InvalidDegree,
    #[error("residue field size N(v) must be at least 2, got {0}")]
    InvalidNorm(u64),
    #[error("invalid tautological spec: {0}")]
    InvalidSpec(String),
    #[error("place {index} is missing {field}")]
    MissingPlaceData { index: usize, field: &'static str },
    #[error("omega_sq must be non-negative, got {0}")]
    NegativeOmega(f64),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// The graph invariants of one finite place, either supplied directly or
/// resolved through the potential-theory pipeline.
#[derive(Debug, Clone, Copy)]
pub struct PlaceTriple {
    pub delta: f64,
    pub epsilon: f64,
    pub phi: f64,
}

#[derive(Debug, Clone)]
pub enum FinitePlaceSource {
    Precomputed(PlaceTriple),
    ReductionGraph {
        graph: MetrizedGraph,
        polarization: Polarization,
        subdivisions: usize,
    },
}

#[derive(Debug, Clone)]
pub struct FinitePlace {
    pub source: FinitePlaceSource,
    /// `N(v)`, the size of the residue field.
    pub norm: u64,
}

/// One embedding `K → C`; the invariants of the associated Riemann surface
/// are analytic inputs and never computed here.
#[derive(Debug, Clone, Copy, Default)]
pub struct ArchimedeanPlace {
    pub delta: Option<f64>,
    pub phi: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CurveArithmeticData {
    pub g: u64,
    pub d_k: u64,
    pub finite_places: Vec<FinitePlace>,
    pub infinite_places: Vec<ArchimedeanPlace>,
    pub omega_sq: f64,
    pub h_fal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxBranch {
    First,
    Second,
}

#[derive(Debug, Clone)]
pub struct PhiBound {
    /// `(g-1)²/(23g²+11g+2)`.
    pub coefficient: BigRational,
    pub value: f64,
    pub branch: MaxBranch,
}

#[derive(Debug, Clone)]
pub struct OmegaBound {
    /// `(g-1)³/(47g³+42g²+18g+1)`.
    pub coefficient: BigRational,
    pub value: f64,
    pub branch: MaxBranch,
    /// `(2g+1)/(g-1)`, the ω̂²-φ comparison used in the chain.
    pub omega_phi_coefficient: BigRational,
    /// `(23g²+11g+2)/(g-1)²`, the φ-δ comparison used in the chain.
    pub phi_delta_coefficient: BigRational,
    /// `1 + phi_delta·omega_phi - 1/coefficient`, exactly zero.
    pub chain_identity_residual: BigRational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossCase {
    /// `Σ_{j<k} m_j m_k ≥ 0`, case (i).
    NonNegative,
    /// `Σ_{j<k} m_j m_k < 0`, case (ii).
    Negative,
}

#[derive(Debug, Clone)]
pub struct TautologicalSpec {
    r: usize,
    m: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct TautologicalBounds {
    /// Bound from the exact height formula: `eq_omega_coeff·ω̂² + eq_phi_coeff·φ(X)`.
    pub height_value: f64,
    pub eq_omega_coefficient: BigRational,
    pub eq_phi_coefficient: BigRational,
    /// The m-free bound `(g-r)r/(24 d_K g(g-1))·ω̂²`.
    pub m_free_value: f64,
    pub m_free_coefficient: BigRational,
    /// Closed-form coefficient `(g-1)³/(24(47g⁴+42g³+18g²+g))` of the
    /// uniform bound in terms of `max(12h_Fal+c1, c2)`.
    pub uniform_coefficient: BigRational,
    pub case: CrossCase,
}

#[derive(Debug, Clone)]
pub struct MVectorEstimates {
    pub sum_cross: BigInt,
    pub sum_squares: BigInt,
    pub upper: BigRational,
    pub lower: BigRational,
    pub both_hold: bool,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn ratio(n: BigInt, d: BigInt) -> BigRational {
    BigRational::new(n, d)
}

fn gr(g: u64) -> BigRational {
    rat(g as i64)
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("rational fits in f64")
}

impl FinitePlace {
    pub fn resolve(&self) -> Result<PlaceTriple, BoundsError> {
        match &self.source {
            FinitePlaceSource::Precomputed(t) => Ok(*t),
            FinitePlaceSource::ReductionGraph {
                graph,
                polarization,
                subdivisions,
            } => {
                let inv = graph.graph_invariants(polarization, *subdivisions)?;
                Ok(PlaceTriple {
                    delta: inv.delta,
                    epsilon: inv.epsilon,
                    phi: inv.phi,
                })
            }
        }
    }
}

/// `δ(X) = Σ_v (δ+ε)(Γ_v)·log N(v) + Σ_σ (δ_σ - 4g·log 2π)` and
/// `φ(X) = Σ_v φ(Γ_v)·log N(v) + Σ_σ φ_σ`.
pub fn aggregate(data: &CurveArithmeticData) -> Result<(f64, f64), BoundsError> {
    if data.g < 2 {
        return Err(BoundsError::GenusTooSmall(data.g));
    }
    let mut delta_x = 0.0;
    let mut phi_x = 0.0;
    for place in &data.finite_places {
        if place.norm < 2 {
            return Err(BoundsError::InvalidNorm(place.norm));
        }
        let t = place.resolve()?;
        let w = (place.norm as f64).ln();
        delta_x += (t.delta + t.epsilon) * w;
        phi_x += t.phi * w;
    }
    let arch_const = 4.0 * data.g as f64 * (2.0 * std::f64::consts::PI).ln();
    for (i, place) in data.infinite_places.iter().enumerate() {
        let d = place.delta.ok_or(BoundsError::MissingPlaceData {
            index: i,
            field: "delta",
        })?;
        let p = place.phi.ok_or(BoundsError::MissingPlaceData {
            index: i,
            field: "phi",
        })?;
        delta_x += d - arch_const;
        phi_x += p;
    }
    Ok((delta_x, phi_x))
}

/// `12 d_K h_Fal - ω̂² - δ(X)`; zero on data satisfying the Noether formula.
pub fn noether_residual(data: &CurveArithmeticData) -> Result<f64, BoundsError> {
    if data.d_k == 0 {
        return Err(BoundsError::InvalidDegree);
    }
    let (delta_x, _) = aggregate(data)?;
    Ok(12.0 * data.d_k as f64 * data.h_fal - data.omega_sq - delta_x)
}

/// `(g-1)²/(23g²+11g+2)`.
pub fn phi_coefficient(g: u64) -> Result<BigRational, BoundsError> {
    if g < 2 {
        return Err(BoundsError::GenusTooSmall(g));
    }
    let gq = gr(g);
    let num = (&gq - rat(1)).pow(2);
    let den = rat(23) * &gq * &gq + rat(11) * &gq + rat(2);
    Ok(num / den)
}

/// `φ ≥ coefficient·max(δ + s·c1, s·c2)` where the scale `s` is `d_K` in the
/// arithmetic form and 1 for a single surface; `c1`, `c2` are the
/// nonconstructive constants and must be supplied by the caller.
pub fn phi_lower_bound(
    g: u64,
    delta: f64,
    c1: f64,
    c2: f64,
    arithmetic_degree: Option<u64>,
) -> Result<PhiBound, BoundsError> {
    let coefficient = phi_coefficient(g)?;
    let s = match arithmetic_degree {
        None => 1.0,
        Some(0) => return Err(BoundsError::InvalidDegree),
        Some(d) => d as f64,
    };
    let first = delta + s * c1;
    let second = s * c2;
    let (arg, branch) = if first >= second {
        (first, MaxBranch::First)
    } else {
        (second, MaxBranch::Second)
    };
    Ok(PhiBound {
        value: to_f64(&coefficient) * arg,
        coefficient,
        branch,
    })
}

/// `(g-1)³/(47g³+42g²+18g+1)`.
pub fn omega_coefficient(g: u64) -> Result<BigRational, BoundsError> {
    if g < 2 {
        return Err(BoundsError::GenusTooSmall(g));
    }
    let gq = gr(g);
    let num = (&gq - rat(1)).pow(3);
    let den = rat(47) * &gq * &gq * &gq + rat(42) * &gq * &gq + rat(18) * &gq + rat(1);
    Ok(num / den)
}

/// `ω̂² ≥ d_K·coefficient·max(12h_Fal + c1, c2)`, with the chain identity
/// behind the coefficient verified exactly.
pub fn omega_lower_bound(
    g: u64,
    d_k: u64,
    h_fal: f64,
    c1: f64,
    c2: f64,
) -> Result<OmegaBound, BoundsError> {
    if d_k == 0 {
        return Err(BoundsError::InvalidDegree);
    }
    let coefficient = omega_coefficient(g)?;
    let gq = gr(g);
    let omega_phi = (rat(2) * &gq + rat(1)) / (&gq - rat(1));
    let phi_delta = phi_coefficient(g)?.recip();
    let residual = rat(1) + &phi_delta * &omega_phi - coefficient.recip();

    let first = 12.0 * h_fal + c1;
    let (arg, branch) = if first >= c2 {
        (first, MaxBranch::First)
    } else {
        (c2, MaxBranch::Second)
    };
    Ok(OmegaBound {
        value: d_k as f64 * to_f64(&coefficient) * arg,
        coefficient,
        branch,
        omega_phi_coefficient: omega_phi,
        phi_delta_coefficient: phi_delta,
        chain_identity_residual: residual,
    })
}

impl TautologicalSpec {
    pub fn new(g: u64, m: Vec<i64>) -> Result<Self, BoundsError> {
        if g < 2 {
            return Err(BoundsError::GenusTooSmall(g));
        }
        let r = m.len();
        if r == 0 || r as u64 > g - 1 {
            return Err(BoundsError::InvalidSpec(format!(
                "dimension r = {r} must satisfy 1 <= r <= g-1 = {}",
                g - 1
            )));
        }
        if m.iter().any(|&x| x == 0) {
            return Err(BoundsError::InvalidSpec("m entries must be non-zero".into()));
        }
        Ok(TautologicalSpec { r, m })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m(&self) -> &[i64] {
        &self.m
    }
}

/// `Σ_{j<k} m_j m_k` with its two elementary bounds
/// `-½Σm² ≤ Σ_{j<k} m_j m_k ≤ (r-1)/2·Σm²`.
pub fn m_vector_estimates(m: &[i64]) -> MVectorEstimates {
    assert!(!m.is_empty(), "m must be nonempty");
    let r = m.len() as i64;
    let total: BigInt = m.iter().map(|&x| BigInt::from(x)).sum();
    let squares: BigInt = m.iter().map(|&x| BigInt::from(x) * BigInt::from(x)).sum();
    let cross: BigRational = ratio(&total * &total - &squares, BigInt::from(2));
    debug_assert!(cross.is_integer());
    let upper = ratio(BigInt::from(r - 1), BigInt::from(2)) * BigRational::from_integer(squares.clone());
    let lower = -ratio(squares.clone(), BigInt::from(2));
    let both_hold = cross <= upper && cross >= lower;
    MVectorEstimates {
        sum_cross: cross.to_integer(),
        sum_squares: squares,
        upper,
        lower,
        both_hold,
    }
}

/// Height bounds for the cycle `Z_{m,α}`: the m-dependent bound, the m-free
/// bound `(g-r)r/(24 d_K g(g-1))·ω̂²` and the closed-form uniform coefficient.
/// The terms carrying `Σ_{j<k} m_j m_k` are set to zero for `g = 2`.
pub fn tautological_height_bound(
    g: u64,
    spec: &TautologicalSpec,
    d_k: u64,
    omega_sq: f64,
    phi_x: f64,
) -> Result<TautologicalBounds, BoundsError> {
    if g < 2 {
        return Err(BoundsError::GenusTooSmall(g));
    }
    if d_k == 0 {
        return Err(BoundsError::InvalidDegree);
    }
    if omega_sq < 0.0 {
        return Err(BoundsError::NegativeOmega(omega_sq));
    }
    if spec.r as u64 > g - 1 {
        return Err(BoundsError::InvalidSpec(format!(
            "dimension r = {} exceeds g-1 = {}",
            spec.r,
            g - 1
        )));
    }

    let est = m_vector_estimates(&spec.m);
    let gq = gr(g);
    let rq = rat(spec.r as i64);
    let dq = rat(d_k as i64);
    let squares = BigRational::from_integer(est.sum_squares.clone());
    let cross = BigRational::from_integer(est.sum_cross.clone());

    let prefactor = (&gq - &rq) / (rat(2) * &dq);
    let mut omega_coeff = &squares / (rat(4) * (&gq - rat(1)).pow(2));
    let mut phi_coeff = BigRational::zero();
    if g > 2 {
        let den6 = rat(6) * &gq * (&gq - rat(1)).pow(2) * (&gq - rat(2));
        omega_coeff -= (rat(2) * &gq + rat(1)) * &cross / den6;
        phi_coeff = &cross / (rat(3) * &gq * (&gq - rat(1)) * (&gq - rat(2)));
    }
    let eq_omega = &prefactor * omega_coeff;
    let eq_phi = &prefactor * phi_coeff;
    let height_value = to_f64(&eq_omega) * omega_sq + to_f64(&eq_phi) * phi_x;

    let m_free_coeff =
        (&gq - &rq) * &rq / (rat(24) * &dq * &gq * (&gq - rat(1)));
    let m_free_value = to_f64(&m_free_coeff) * omega_sq;

    let uniform = {
        let num = (&gq - rat(1)).pow(3);
        let den = rat(24)
            * (rat(47) * &gq * &gq * &gq * &gq
                + rat(42) * &gq * &gq * &gq
                + rat(18) * &gq * &gq
                + &gq);
        num / den
    };

    let case = if est.sum_cross.is_negative() {
        CrossCase::Negative
    } else {
        CrossCase::NonNegative
    };

    Ok(TautologicalBounds {
        height_value,
        eq_omega_coefficient: eq_omega,
        eq_phi_coefficient: eq_phi,
        m_free_value,
        m_free_coefficient: m_free_coeff,
        uniform_coefficient: uniform,
        case,
    })
}
