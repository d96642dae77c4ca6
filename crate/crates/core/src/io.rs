//! JSON schemas for the domain objects and deterministic report emission.
//!
//! Inputs are strict (unknown fields rejected); all emitted floats are
//! rounded to 12 significant digits and maps serialize with sorted keys, so
//! identical configurations produce byte-identical output.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::bounds::{
    ArchimedeanPlace, CurveArithmeticData, FinitePlace, FinitePlaceSource, MVectorEstimates,
    OmegaBound, PhiBound, PlaceTriple, TautologicalBounds,
};
use crate::degeneration::{AsymptoticFit, PeriodFamily, Poly, PolyMatrix, ProbeSample, TropData};
use crate::graph::{GraphInvariants, IdentityReport, MetrizedGraph, Polarization};
use crate::lattice::{big_ratio, GramLattice, MomentEstimate, ThetaNormValue};
use crate::theta::{InvariantEstimate, PeriodMatrix, ThetaEvaluation};
use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("JSON parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error(transparent)]
    Theta(#[from] crate::theta::ThetaError),
    #[error(transparent)]
    Degeneration(#[from] crate::degeneration::DegenerationError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum NumberOrRatio {
    Ratio([i64; 2]),
    Number(f64),
}

impl NumberOrRatio {
    fn as_f64(&self) -> f64 {
        match *self {
            NumberOrRatio::Number(x) => x,
            NumberOrRatio::Ratio([n, d]) => n as f64 / d as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ComplexDto {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexDto {
    fn from(z: Complex64) -> Self {
        ComplexDto { re: z.re, im: z.im }
    }
}

impl From<ComplexDto> for Complex64 {
    fn from(z: ComplexDto) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GramDto {
    pub rank: usize,
    pub gram: Vec<Vec<NumberOrRatio>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TauDto {
    pub g: usize,
    pub tau: Vec<Vec<ComplexDto>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilyDto {
    pub g1: usize,
    pub g2: usize,
    pub m: u32,
    #[serde(rename = "B")]
    pub b: Vec<Vec<NumberOrRatio>>,
    #[serde(rename = "S1")]
    pub s1: Vec<Vec<Vec<ComplexDto>>>,
    #[serde(rename = "S2")]
    pub s2: Vec<Vec<Vec<ComplexDto>>>,
    #[serde(rename = "S3")]
    pub s3: Vec<Vec<Vec<ComplexDto>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VertexDto {
    pub id: String,
    #[serde(default)]
    pub q: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphEdgeDto {
    pub u: String,
    pub v: String,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphDto {
    pub vertices: Vec<VertexDto>,
    pub edges: Vec<GraphEdgeDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FinitePlaceDto {
    pub norm: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdivisions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ArchPlaceDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CurveDto {
    pub g: u64,
    pub d_k: u64,
    #[serde(default)]
    pub finite_places: Vec<FinitePlaceDto>,
    #[serde(default)]
    pub infinite_places: Vec<ArchPlaceDto>,
    pub omega_sq: f64,
    pub h_fal: f64,
}

pub fn parse_gram(text: &str) -> Result<GramLattice, IoError> {
    let dto: GramDto = serde_json::from_str(text)?;
    gram_from_dto(&dto)
}

pub fn gram_from_dto(dto: &GramDto) -> Result<GramLattice, IoError> {
    let r = dto.rank;
    if dto.gram.len() != r || dto.gram.iter().any(|row| row.len() != r) {
        return Err(IoError::Schema(format!(
            "gram matrix must be {r}x{r} to match \"rank\""
        )));
    }
    let all_exact = dto
        .gram
        .iter()
        .flatten()
        .all(|e| matches!(e, NumberOrRatio::Ratio(_)));
    if all_exact && r > 0 {
        let rows = dto
            .gram
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| match *e {
                        NumberOrRatio::Ratio([n, d]) => big_ratio(n, d),
                        NumberOrRatio::Number(_) => unreachable!(),
                    })
                    .collect()
            })
            .collect();
        Ok(GramLattice::new_exact(rows)?)
    } else {
        let m = DMatrix::from_fn(r, r, |i, j| dto.gram[i][j].as_f64());
        Ok(GramLattice::new(m)?)
    }
}

pub fn gram_to_dto(gram: &GramLattice) -> GramDto {
    let r = gram.rank();
    let rows = match gram.gram_exact() {
        Some(exact) => exact
            .iter()
            .map(|row| {
                row.iter()
                    .map(|q| {
                        match (q.numer().to_i64(), q.denom().to_i64()) {
                            (Some(n), Some(d)) => NumberOrRatio::Ratio([n, d]),
                            _ => NumberOrRatio::Number(q.to_f64().unwrap_or(f64::NAN)),
                        }
                    })
                    .collect()
            })
            .collect(),
        None => (0..r)
            .map(|i| {
                (0..r)
                    .map(|j| NumberOrRatio::Number(gram.gram()[(i, j)]))
                    .collect()
            })
            .collect(),
    };
    GramDto {
        rank: r,
        gram: rows,
    }
}

pub fn parse_tau(text: &str) -> Result<PeriodMatrix, IoError> {
    let dto: TauDto = serde_json::from_str(text)?;
    let g = dto.g;
    if dto.tau.len() != g || dto.tau.iter().any(|row| row.len() != g) {
        return Err(IoError::Schema(format!(
            "tau must be {g}x{g} to match \"g\""
        )));
    }
    let m = DMatrix::from_fn(g, g, |i, j| Complex64::from(dto.tau[i][j]));
    Ok(PeriodMatrix::new(m)?)
}

fn poly_matrix_from_dto(
    rows: usize,
    cols: usize,
    data: &[Vec<Vec<ComplexDto>>],
    name: &str,
) -> Result<PolyMatrix, IoError> {
    if data.len() != rows || data.iter().any(|row| row.len() != cols) {
        return Err(IoError::Schema(format!("{name} must be {rows}x{cols}")));
    }
    let entries = data
        .iter()
        .map(|row| {
            row.iter()
                .map(|coeffs| Poly(coeffs.iter().map(|&c| Complex64::from(c)).collect()))
                .collect()
        })
        .collect();
    Ok(PolyMatrix {
        rows,
        cols,
        entries,
    })
}

fn poly_matrix_to_dto(m: &PolyMatrix) -> Vec<Vec<Vec<ComplexDto>>> {
    m.entries
        .iter()
        .map(|row| {
            row.iter()
                .map(|p| p.0.iter().map(|&c| ComplexDto::from(c)).collect())
                .collect()
        })
        .collect()
}

pub fn parse_family(text: &str) -> Result<PeriodFamily, IoError> {
    let dto: FamilyDto = serde_json::from_str(text)?;
    family_from_dto(&dto)
}

pub fn family_from_dto(dto: &FamilyDto) -> Result<PeriodFamily, IoError> {
    let b = gram_from_dto(&GramDto {
        rank: dto.g2,
        gram: dto.b.clone(),
    })?;
    let s1 = poly_matrix_from_dto(dto.g1, dto.g1, &dto.s1, "S1")?;
    let s2 = poly_matrix_from_dto(dto.g2, dto.g2, &dto.s2, "S2")?;
    let s3 = poly_matrix_from_dto(dto.g1, dto.g2, &dto.s3, "S3")?;
    Ok(PeriodFamily::new(dto.g1, dto.g2, dto.m, b, s1, s2, s3)?)
}

pub fn family_to_dto(f: &PeriodFamily) -> FamilyDto {
    FamilyDto {
        g1: f.g1(),
        g2: f.g2(),
        m: f.m(),
        b: gram_to_dto(f.b_lattice()).gram,
        s1: poly_matrix_to_dto(f.s1()),
        s2: poly_matrix_to_dto(f.s2()),
        s3: poly_matrix_to_dto(f.s3()),
    }
}

pub fn parse_graph(text: &str) -> Result<(MetrizedGraph, Polarization), IoError> {
    let dto: GraphDto = serde_json::from_str(text)?;
    graph_from_dto(&dto)
}

pub fn graph_from_dto(dto: &GraphDto) -> Result<(MetrizedGraph, Polarization), IoError> {
    let vertices = dto.vertices.iter().map(|v| v.id.clone()).collect();
    let edges = dto
        .edges
        .iter()
        .map(|e| (e.u.clone(), e.v.clone(), e.length))
        .collect();
    let graph = MetrizedGraph::new(vertices, edges)?;
    let m = dto.vertices.iter().map(|v| v.q).collect();
    let pol = Polarization::new(&graph, m)?;
    Ok((graph, pol))
}

pub fn graph_to_dto(graph: &MetrizedGraph, pol: &Polarization) -> GraphDto {
    GraphDto {
        vertices: (0..graph.n_vertices())
            .map(|i| VertexDto {
                id: graph.vertex_name(i).to_string(),
                q: pol.m()[i],
            })
            .collect(),
        edges: graph
            .edges()
            .iter()
            .map(|e| GraphEdgeDto {
                u: graph.vertex_name(e.u).to_string(),
                v: graph.vertex_name(e.v).to_string(),
                length: e.length,
            })
            .collect(),
    }
}

pub fn parse_curve(text: &str) -> Result<CurveArithmeticData, IoError> {
    let dto: CurveDto = serde_json::from_str(text)?;
    curve_from_dto(&dto)
}

pub fn curve_from_dto(dto: &CurveDto) -> Result<CurveArithmeticData, IoError> {
    let mut finite = Vec::with_capacity(dto.finite_places.len());
    for p in &dto.finite_places {
        let source = match (&p.graph, p.delta, p.epsilon, p.phi) {
            (Some(gdto), None, None, None) => {
                let (graph, polarization) = graph_from_dto(gdto)?;
                FinitePlaceSource::ReductionGraph {
                    graph,
                    polarization,
                    subdivisions: p.subdivisions.unwrap_or(64),
                }
            }
            (None, Some(delta), Some(epsilon), Some(phi)) => {
                FinitePlaceSource::Precomputed(PlaceTriple {
                    delta,
                    epsilon,
                    phi,
                })
            }
            _ => {
                return Err(IoError::Schema(
                    "finite place needs either \"graph\" or the full (delta, epsilon, phi) triple"
                        .into(),
                ))
            }
        };
        finite.push(FinitePlace {
            source,
            norm: p.norm,
        });
    }
    Ok(CurveArithmeticData {
        g: dto.g,
        d_k: dto.d_k,
        finite_places: finite,
        infinite_places: dto
            .infinite_places
            .iter()
            .map(|p| ArchimedeanPlace {
                delta: p.delta,
                phi: p.phi,
            })
            .collect(),
        omega_sq: dto.omega_sq,
        h_fal: dto.h_fal,
    })
}

/// Rounds to 12 significant digits through a decimal round trip, so repeated
/// runs emit identical bytes.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

pub fn num(x: f64) -> Value {
    json!(sig12(x))
}

pub fn rational_value(q: &BigRational) -> Value {
    match (q.numer().to_i64(), q.denom().to_i64()) {
        (Some(n), Some(d)) => json!({"num": n, "den": d}),
        _ => json!({"num": q.numer().to_string(), "den": q.denom().to_string()}),
    }
}

pub fn moment_report(est: &MomentEstimate) -> Value {
    json!({"estimate": num(est.estimate), "error_estimate": num(est.error_estimate)})
}

pub fn theta_norm_report(v: &ThetaNormValue) -> Value {
    json!({"value": num(v.value), "minimizers": v.minimizers})
}

pub fn theta_eval_report(e: &ThetaEvaluation) -> Value {
    json!({
        "value": {"re": num(e.value.re), "im": num(e.value.im)},
        "tail_bound": num(e.tail_bound),
        "terms_used": e.terms_used,
    })
}

pub fn invariant_report(e: &InvariantEstimate) -> Value {
    json!({"value": num(e.value), "stderr": num(e.stderr), "redrawn": e.redrawn})
}

pub fn trop_data_report(t: &TropData) -> Value {
    json!({
        "point": t.point.coords().iter().map(|&x| num(x)).collect::<Vec<_>>(),
        "value": num(t.value),
        "minimizers": t.minimizers,
    })
}

pub fn probe_report(samples: &[ProbeSample], alpha: f64) -> Value {
    json!({
        "alpha": num(alpha),
        "probes": samples.iter().map(|s| json!({
            "t": {"re": num(s.t.re), "im": num(s.t.im)},
            "normalized_value": num(s.normalized_value),
            "deviation": num(s.normalized_value - alpha),
        })).collect::<Vec<_>>(),
    })
}

pub fn fit_report(fit: &AsymptoticFit) -> Value {
    json!({
        "c0": num(fit.c0),
        "c1": num(fit.c1),
        "c2": num(fit.c2),
        "predicted_c1": num(fit.predicted_c1),
        "predicted_c2": num(fit.predicted_c2),
        "points": fit.points.iter().map(|p| json!({
            "abs_t": num(p.abs_t),
            "L": num(p.big_l),
            "I_estimate": num(p.invariant),
            "I_stderr": num(p.stderr),
            "model_value": num(p.model_value),
            "residual": num(p.residual),
        })).collect::<Vec<_>>(),
    })
}

pub fn fit_csv(fit: &AsymptoticFit) -> String {
    let mut out = String::from("abs_t,L,I_estimate,I_stderr,model_value,residual\n");
    for p in &fit.points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig12(p.abs_t),
            sig12(p.big_l),
            sig12(p.invariant),
            sig12(p.stderr),
            sig12(p.model_value),
            sig12(p.residual)
        ));
    }
    out
}

pub fn invariants_report(inv: &GraphInvariants) -> Value {
    json!({
        "delta": num(inv.delta),
        "epsilon": num(inv.epsilon),
        "phi": num(inv.phi),
        "tau": num(inv.tau),
        "i_jac": num(inv.i_jac),
    })
}

pub fn identity_report(rep: &IdentityReport) -> Value {
    let mut m = Map::new();
    m.insert("invariants".into(), invariants_report(&rep.invariants));
    m.insert("genus".into(), json!(rep.genus));
    m.insert("identity_residual".into(), num(rep.identity_residual));
    m.insert("chain_lower_slack".into(), num(rep.chain_lower_slack));
    m.insert("chain_middle_slack".into(), num(rep.chain_middle_slack));
    if let Some(s) = rep.cinkir_slack {
        m.insert("cinkir_slack".into(), num(s));
    }
    if let Some(s) = rep.chain_upper_slack {
        m.insert("chain_upper_slack".into(), num(s));
    }
    Value::Object(m)
}

pub fn phi_bound_report(b: &PhiBound) -> Value {
    json!({
        "coefficient": rational_value(&b.coefficient),
        "value": num(b.value),
        "branch": match b.branch {
            crate::bounds::MaxBranch::First => "first",
            crate::bounds::MaxBranch::Second => "second",
        },
    })
}

pub fn omega_bound_report(b: &OmegaBound) -> Value {
    json!({
        "coefficient": rational_value(&b.coefficient),
        "value": num(b.value),
        "branch": match b.branch {
            crate::bounds::MaxBranch::First => "first",
            crate::bounds::MaxBranch::Second => "second",
        },
        "omega_phi_coefficient": rational_value(&b.omega_phi_coefficient),
        "phi_delta_coefficient": rational_value(&b.phi_delta_coefficient),
        "chain_identity_residual": rational_value(&b.chain_identity_residual),
    })
}

pub fn tautological_report(b: &TautologicalBounds) -> Value {
    json!({
        "height_value": num(b.height_value),
        "eq_omega_coefficient": rational_value(&b.eq_omega_coefficient),
        "eq_phi_coefficient": rational_value(&b.eq_phi_coefficient),
        "m_free_value": num(b.m_free_value),
        "m_free_coefficient": rational_value(&b.m_free_coefficient),
        "uniform_coefficient": rational_value(&b.uniform_coefficient),
        "case": match b.case {
            crate::bounds::CrossCase::NonNegative => "cross_sum_nonnegative",
            crate::bounds::CrossCase::Negative => "cross_sum_negative",
        },
        "note": "e'_L(Z) >= h'_L(Z): the reported values bound the essential minimum as well",
    })
}

pub fn m_estimates_report(e: &MVectorEstimates) -> Value {
    json!({
        "sum_cross": e.sum_cross.to_string(),
        "sum_squares": e.sum_squares.to_string(),
        "upper": rational_value(&e.upper),
        "lower": rational_value(&e.lower),
        "both_hold": e.both_hold,
    })
}

/// Canonical pretty emission: serde_json maps are sorted by key.
pub fn emit(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable value");
    s.push('\n');
    s
}
