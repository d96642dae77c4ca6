//! Polarized metrized graphs: resistance, the canonical measure, Green
//! functions, the invariants δ, ε, φ, τ, the tropical Jacobian and the
//! identity and inequality checks tying them together.

use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use thiserror::Error;

use crate::lattice::{GramLattice, LatticeError, MomentMethod};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate vertex id {0:?}")]
    DuplicateVertex(String),
    #[error("unknown vertex id {0:?}")]
    UnknownVertex(String),
    #[error("edge {edge} has non-positive length {length}")]
    NonPositiveLength { edge: usize, length: f64 },
    #[error("graph is not connected")]
    Disconnected,
    #[error("special fiber is not connected")]
    DisconnectedSpecialFiber,
    #[error("edge index {0} out of range")]
    UnknownEdge(usize),
    #[error("offset {offset} not strictly inside edge {edge} of length {length}")]
    InvalidOffset {
        edge: usize,
        offset: f64,
        length: f64,
    },
    #[error("polarization not effective at vertex {vertex:?}: n_p + m_p - 2 = {value}")]
    Ineffective { vertex: String, value: i64 },
    #[error("polarized genus {num}/2 + 1 is not an integer")]
    NonIntegerGenus { num: i64 },
    #[error("operation requires genus >= 1")]
    GenusZero,
    #[error("subdivisions must be at least 2, got {0}")]
    SubdivisionsTooSmall(usize),
    #[error("thickness must be a positive integer, got {0}")]
    InvalidThickness(u32),
    #[error("linear solve failed on a connected graph (internal error)")]
    SolveFailure,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
}

/// A compact connected metrized graph. Loops and multiple edges are allowed;
/// every point of valency other than 2 must be a vertex, which holds by
/// construction since only vertices carry incidences.
#[derive(Debug, Clone)]
pub struct MetrizedGraph {
    names: Vec<String>,
    edges: Vec<Edge>,
}

/// A point of the graph: a vertex, or a point strictly inside an edge at a
/// given distance from the edge's `u` endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphPoint {
    Vertex(usize),
    Interior { edge: usize, offset: f64 },
}

/// Resistance through the complement of an edge; infinite exactly on bridges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeResistance {
    Finite(f64),
    Infinite,
}

/// The polarization integers `m_p` of `K = Σ (n_p + m_p - 2) p`, together
/// with the polarized genus `g = ½ deg K + 1`.
#[derive(Debug, Clone)]
pub struct Polarization {
    m: Vec<u32>,
    genus: u64,
}

/// The canonical measure: atoms `m_p/(2g)` at vertices and a constant density
/// `1/(g(r(e)+ℓ(e)))` on each edge, zero on bridges.
#[derive(Debug, Clone)]
pub struct ZhangMeasure {
    pub atoms: Vec<f64>,
    pub densities: Vec<f64>,
    pub genus: u64,
}

/// Discrete Green data on a subdivision: node locations, the weighted
/// Laplacian, the normalized Green matrix and the lumped measure vector.
#[derive(Debug, Clone)]
pub struct GreenSystem {
    pub nodes: Vec<GraphPoint>,
    pub laplacian: DMatrix<f64>,
    pub green: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub subdivisions: usize,
}

/// Extrapolated samples of `x ↦ g_μ(x,x)` at the coarse-level nodes.
#[derive(Debug, Clone)]
pub struct GreenDiagonal {
    pub nodes: Vec<GraphPoint>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct GraphInvariants {
    pub delta: f64,
    pub epsilon: f64,
    pub phi: f64,
    pub tau: f64,
    pub i_jac: f64,
}

/// Residual and slacks of the identity `δ+ε = 12I+2φ` and the inequality
/// chain; all slacks are "bound minus value", so non-negative means pass.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub invariants: GraphInvariants,
    pub genus: u64,
    pub identity_residual: f64,
    /// `(2g(7g+5)/(g-1)²)·φ - δ`, only for g ≥ 2.
    pub cinkir_slack: Option<f64>,
    /// `δ+ε - 0`.
    pub chain_lower_slack: f64,
    /// `(3/2)δ+2φ - (δ+ε)`.
    pub chain_middle_slack: f64,
    /// `((23g²+11g+2)/(g-1)²)·φ - ((3/2)δ+2φ)`, only for g ≥ 2.
    pub chain_upper_slack: Option<f64>,
}

impl MetrizedGraph {
    pub fn new(
        vertices: Vec<String>,
        edges: Vec<(String, String, f64)>,
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::new();
        for (i, name) in vertices.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(name.clone()));
            }
        }
        let mut resolved = Vec::with_capacity(edges.len());
        for (k, (u, v, length)) in edges.into_iter().enumerate() {
            let iu = *index
                .get(&u)
                .ok_or_else(|| GraphError::UnknownVertex(u.clone()))?;
            let iv = *index
                .get(&v)
                .ok_or_else(|| GraphError::UnknownVertex(v.clone()))?;
            if !(length > 0.0) || !length.is_finite() {
                return Err(GraphError::NonPositiveLength { edge: k, length });
            }
            resolved.push(Edge {
                u: iu,
                v: iv,
                length,
            });
        }
        let g = MetrizedGraph {
            names: vertices,
            edges: resolved,
        };
        if !g.is_connected_without(usize::MAX) {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    pub fn n_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of tangent directions at a vertex; loops count twice.
    pub fn valence(&self, p: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.u == p) as usize + (e.v == p) as usize)
            .sum()
    }

    /// Cycle rank `g₀ = |E| - |V| + 1`.
    pub fn g0(&self) -> usize {
        self.edges.len() + 1 - self.names.len()
    }

    /// Total length.
    pub fn delta(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn genus_and_lengths(&self, pol: &Polarization) -> (u64, usize, f64) {
        (pol.genus, self.g0(), self.delta())
    }

    fn is_connected_without(&self, skipped_edge: usize) -> bool {
        let n = self.names.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(p) = stack.pop() {
            for (k, e) in self.edges.iter().enumerate() {
                if k == skipped_edge {
                    continue;
                }
                for q in [e.u, e.v] {
                    let other = if q == p {
                        if e.u == p {
                            e.v
                        } else {
                            e.u
                        }
                    } else {
                        continue;
                    };
                    if !seen[other] {
                        seen[other] = true;
                        stack.push(other);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn check_point(&self, p: &GraphPoint) -> Result<(), GraphError> {
        match *p {
            GraphPoint::Vertex(i) => {
                if i >= self.names.len() {
                    return Err(GraphError::UnknownVertex(format!("#{i}")));
                }
            }
            GraphPoint::Interior { edge, offset } => {
                let e = self
                    .edges
                    .get(edge)
                    .ok_or(GraphError::UnknownEdge(edge))?;
                if !(offset > 0.0 && offset < e.length) {
                    return Err(GraphError::InvalidOffset {
                        edge,
                        offset,
                        length: e.length,
                    });
                }
            }
        }
        Ok(())
    }

    /// Resistance between two points, via the weighted Laplacian with edges
    /// split at the interior points.
    pub fn effective_resistance(
        &self,
        p: &GraphPoint,
        q: &GraphPoint,
    ) -> Result<f64, GraphError> {
        self.check_point(p)?;
        self.check_point(q)?;
        if p == q {
            return Ok(0.0);
        }
        let mut extra: Vec<(usize, f64)> = Vec::new();
        let node_of = |pt: &GraphPoint, extra: &mut Vec<(usize, f64)>| match *pt {
            GraphPoint::Vertex(i) => i,
            GraphPoint::Interior { edge, offset } => {
                if let Some(pos) = extra.iter().position(|&(e, o)| e == edge && o == offset) {
                    self.names.len() + pos
                } else {
                    extra.push((edge, offset));
                    self.names.len() + extra.len() - 1
                }
            }
        };
        let a = node_of(p, &mut extra);
        let b = node_of(q, &mut extra);
        if a == b {
            return Ok(0.0);
        }
        let n = self.names.len() + extra.len();
        let mut weighted: Vec<(usize, usize, f64)> = Vec::new();
        for (k, e) in self.edges.iter().enumerate() {
            let mut cuts: Vec<(f64, usize)> = extra
                .iter()
                .enumerate()
                .filter(|(_, &(ek, _))| ek == k)
                .map(|(i, &(_, o))| (o, self.names.len() + i))
                .collect();
            cuts.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            let mut prev = (0.0, e.u);
            for (o, node) in cuts {
                weighted.push((prev.1, node, o - prev.0));
                prev = (o, node);
            }
            weighted.push((prev.1, e.v, e.length - prev.0));
        }
        let k = pseudoinverse(n, &weighted)?;
        Ok(k[(a, a)] + k[(b, b)] - 2.0 * k[(a, b)])
    }

    /// `r(e) = r(Γ∖e; endpoints of e)`; infinite exactly for bridges.
    pub fn edge_complement_resistance(&self, edge: usize) -> Result<EdgeResistance, GraphError> {
        let e = *self.edges.get(edge).ok_or(GraphError::UnknownEdge(edge))?;
        if e.u == e.v {
            return Ok(EdgeResistance::Finite(0.0));
        }
        if !self.is_connected_without(edge) {
            return Ok(EdgeResistance::Infinite);
        }
        let weighted: Vec<(usize, usize, f64)> = self
            .edges
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != edge)
            .map(|(_, e)| (e.u, e.v, e.length))
            .collect();
        let k = pseudoinverse(self.names.len(), &weighted)?;
        Ok(EdgeResistance::Finite(
            k[(e.u, e.u)] + k[(e.v, e.v)] - 2.0 * k[(e.u, e.v)],
        ))
    }

    pub fn zhang_measure(&self, pol: &Polarization) -> Result<ZhangMeasure, GraphError> {
        let g = pol.genus;
        if g == 0 {
            return Err(GraphError::GenusZero);
        }
        let gf = g as f64;
        let atoms: Vec<f64> = pol.m.iter().map(|&m| m as f64 / (2.0 * gf)).collect();
        let mut densities = Vec::with_capacity(self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            let d = match self.edge_complement_resistance(k)? {
                EdgeResistance::Infinite => 0.0,
                EdgeResistance::Finite(r) => 1.0 / (gf * (r + e.length)),
            };
            densities.push(d);
        }
        Ok(ZhangMeasure {
            atoms,
            densities,
            genus: g,
        })
    }

    /// Discrete Green system at one subdivision level: each edge split into
    /// `subdivisions` segments of conductance `subdivisions/ℓ`, the continuous
    /// part of μ lumped by the trapezoid rule, and
    /// `G = K - Kμ1ᵀ - 1(Kμ)ᵀ + (μᵀKμ)11ᵀ` for the Laplacian pseudoinverse K.
    pub fn green_system(
        &self,
        mu: &ZhangMeasure,
        subdivisions: usize,
    ) -> Result<GreenSystem, GraphError> {
        if subdivisions < 2 {
            return Err(GraphError::SubdivisionsTooSmall(subdivisions));
        }
        let s = subdivisions;
        let nv = self.names.len();
        let n = nv + self.edges.len() * (s - 1);
        let node = |e: usize, k: usize| -> usize {
            if k == 0 {
                self.edges[e].u
            } else if k == s {
                self.edges[e].v
            } else {
                nv + e * (s - 1) + (k - 1)
            }
        };

        let mut nodes: Vec<GraphPoint> = (0..nv).map(GraphPoint::Vertex).collect();
        for (ei, e) in self.edges.iter().enumerate() {
            for k in 1..s {
                nodes.push(GraphPoint::Interior {
                    edge: ei,
                    offset: e.length * k as f64 / s as f64,
                });
            }
        }

        let mut weighted = Vec::with_capacity(self.edges.len() * s);
        for (ei, e) in self.edges.iter().enumerate() {
            let h = e.length / s as f64;
            for k in 0..s {
                weighted.push((node(ei, k), node(ei, k + 1), h));
            }
        }

        let mut mu_vec = DVector::zeros(n);
        for (i, &a) in mu.atoms.iter().enumerate() {
            mu_vec[i] += a;
        }
        for (ei, e) in self.edges.iter().enumerate() {
            let h = e.length / s as f64;
            let d = mu.densities[ei];
            for k in 0..=s {
                let w = if k == 0 || k == s { 0.5 } else { 1.0 };
                mu_vec[node(ei, k)] += d * h * w;
            }
        }

        let kmat = pseudoinverse(n, &weighted)?;
        let kmu = &kmat * &mu_vec;
        let mkm = mu_vec.dot(&kmu);
        let mut green = kmat.clone();
        for i in 0..n {
            for j in 0..n {
                green[(i, j)] += mkm - kmu[i] - kmu[j];
            }
        }

        let mut laplacian = DMatrix::zeros(n, n);
        for &(a, b, len) in &weighted {
            let c = 1.0 / len;
            laplacian[(a, a)] += c;
            laplacian[(b, b)] += c;
            laplacian[(a, b)] -= c;
            laplacian[(b, a)] -= c;
        }

        Ok(GreenSystem {
            nodes,
            laplacian,
            green,
            mu: mu_vec,
            subdivisions: s,
        })
    }

    /// `g_μ(x,x)` at the level-`subdivisions` nodes, Richardson-extrapolated
    /// against the doubled level.
    pub fn green_diagonal(
        &self,
        mu: &ZhangMeasure,
        subdivisions: usize,
    ) -> Result<GreenDiagonal, GraphError> {
        let coarse = self.green_system(mu, subdivisions)?;
        let fine = self.green_system(mu, 2 * subdivisions)?;
        let values = coarse
            .nodes
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let j = fine_index(self, i, subdivisions);
                (4.0 * fine.green[(j, j)] - coarse.green[(i, i)]) / 3.0
            })
            .collect();
        Ok(GreenDiagonal {
            nodes: coarse.nodes,
            values,
        })
    }

    /// δ, ε, φ, τ and `I(Jac Γ)` via two independent pipelines: potential
    /// theory on subdivisions for ε and φ, lattice quadrature for I.
    pub fn graph_invariants(
        &self,
        pol: &Polarization,
        subdivisions: usize,
    ) -> Result<GraphInvariants, GraphError> {
        let g = pol.genus;
        if g == 0 {
            return Err(GraphError::GenusZero);
        }
        let delta = self.delta();
        let (epsilon, phi) = if self.edges.is_empty() {
            (0.0, 0.0)
        } else {
            let mu = self.zhang_measure(pol)?;
            let coarse = self.epsilon_phi_raw(pol, &mu, subdivisions)?;
            let fine = self.epsilon_phi_raw(pol, &mu, 2 * subdivisions)?;
            (
                (4.0 * fine.0 - coarse.0) / 3.0,
                (4.0 * fine.1 - coarse.1) / 3.0,
            )
        };
        let tau = (delta + 4.0 * phi - 2.0 * epsilon) / 12.0;
        let (gram, _) = self.tropical_jacobian()?;
        let i_jac = lattice_moment_auto(&gram)?;
        Ok(GraphInvariants {
            delta,
            epsilon,
            phi,
            tau,
            i_jac,
        })
    }

    /// ε and φ at a single subdivision level, no extrapolation.
    fn epsilon_phi_raw(
        &self,
        pol: &Polarization,
        mu: &ZhangMeasure,
        subdivisions: usize,
    ) -> Result<(f64, f64), GraphError> {
        let sys = self.green_system(mu, subdivisions)?;
        let s = sys.subdivisions;
        let nv = self.names.len();
        let gf = pol.genus as f64;
        let diag: Vec<f64> = (0..sys.nodes.len()).map(|i| sys.green[(i, i)]).collect();

        // Atomic parts: at vertex p, ε gets (2g-2)·atom_p + (n_p+m_p-2) and
        // the φ integral gets (10g+2)·atom_p - (n_p+m_p-2).
        let mut eps = 0.0;
        let mut phi_int = 0.0;
        for p in 0..nv {
            let mp = (self.valence(p) + pol.m[p] as usize) as f64 - 2.0;
            eps += diag[p] * ((2.0 * gf - 2.0) * mu.atoms[p] + mp);
            phi_int += diag[p] * ((10.0 * gf + 2.0) * mu.atoms[p] - mp);
        }

        // Density parts by the trapezoid rule along each edge.
        let node = |e: usize, k: usize| -> usize {
            if k == 0 {
                self.edges[e].u
            } else if k == s {
                self.edges[e].v
            } else {
                nv + e * (s - 1) + (k - 1)
            }
        };
        for (ei, e) in self.edges.iter().enumerate() {
            let h = e.length / s as f64;
            let d = mu.densities[ei];
            let mut integral = 0.0;
            for k in 0..=s {
                let w = if k == 0 || k == s { 0.5 } else { 1.0 };
                integral += w * diag[node(ei, k)];
            }
            integral *= h * d;
            eps += (2.0 * gf - 2.0) * integral;
            phi_int += (10.0 * gf + 2.0) * integral;
        }

        let phi = -self.delta() / 4.0 + phi_int / 4.0;
        Ok((eps, phi))
    }

    /// Gram matrix of `H₁(Γ,Z)` with `[e,e] = ℓ(e)`, via the fundamental
    /// cycles of a spanning tree, plus the cycle basis as edge coefficients.
    pub fn tropical_jacobian(&self) -> Result<(GramLattice, Vec<Vec<i64>>), GraphError> {
        let nv = self.names.len();
        let mut parent: Vec<Option<(usize, usize, i8)>> = vec![None; nv]; // (vertex, edge, dir)
        let mut in_tree = vec![false; self.edges.len()];
        let mut seen = vec![false; nv];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(p) = stack.pop() {
            for (k, e) in self.edges.iter().enumerate() {
                if e.u == e.v {
                    continue;
                }
                let other = if e.u == p {
                    e.v
                } else if e.v == p {
                    e.u
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    in_tree[k] = true;
                    // dir = +1 when the tree edge is traversed u→v going
                    // from `p` down to `other`.
                    parent[other] = Some((p, k, if e.u == p { 1 } else { -1 }));
                    stack.push(other);
                }
            }
        }

        let depth = |mut v: usize| -> usize {
            let mut d = 0;
            while let Some((p, _, _)) = parent[v] {
                v = p;
                d += 1;
            }
            d
        };

        let mut basis: Vec<Vec<i64>> = Vec::new();
        for (k, e) in self.edges.iter().enumerate() {
            if in_tree[k] {
                continue;
            }
            let mut coeff = vec![0i64; self.edges.len()];
            coeff[k] = 1;
            if e.u != e.v {
                // Close the cycle with the tree path from v back to u.
                let (mut a, mut b) = (e.v, e.u);
                let (mut da, mut db) = (depth(a), depth(b));
                while da > db {
                    let (p, te, dir) = parent[a].unwrap();
                    coeff[te] -= dir as i64; // traversed child→parent: against dir
                    a = p;
                    da -= 1;
                }
                while db > da {
                    let (p, te, dir) = parent[b].unwrap();
                    coeff[te] += dir as i64;
                    b = p;
                    db -= 1;
                }
                while a != b {
                    let (pa, tea, dira) = parent[a].unwrap();
                    let (pb, teb, dirb) = parent[b].unwrap();
                    coeff[tea] -= dira as i64;
                    coeff[teb] += dirb as i64;
                    a = pa;
                    b = pb;
                }
            }
            basis.push(coeff);
        }

        let r = basis.len();
        debug_assert_eq!(r, self.g0());
        let gram = DMatrix::from_fn(r, r, |i, j| {
            self.edges
                .iter()
                .enumerate()
                .map(|(k, e)| e.length * (basis[i][k] * basis[j][k]) as f64)
                .sum()
        });
        Ok((GramLattice::new(gram)?, basis))
    }

    pub fn identity_and_bounds_check(
        &self,
        pol: &Polarization,
        subdivisions: usize,
    ) -> Result<IdentityReport, GraphError> {
        let inv = self.graph_invariants(pol, subdivisions)?;
        let g = pol.genus;
        let gf = g as f64;
        let residual = inv.delta + inv.epsilon - 12.0 * inv.i_jac - 2.0 * inv.phi;
        let lower = inv.delta + inv.epsilon;
        let middle = 1.5 * inv.delta + 2.0 * inv.phi;
        let (cinkir, upper) = if g >= 2 {
            let c1 = 2.0 * gf * (7.0 * gf + 5.0) / (gf - 1.0).powi(2);
            let c2 = (23.0 * gf * gf + 11.0 * gf + 2.0) / (gf - 1.0).powi(2);
            (Some(c1 * inv.phi - inv.delta), Some(c2 * inv.phi - middle))
        } else {
            (None, None)
        };
        Ok(IdentityReport {
            invariants: inv,
            genus: g,
            identity_residual: residual,
            cinkir_slack: cinkir,
            chain_lower_slack: lower,
            chain_middle_slack: middle - lower,
            chain_upper_slack: upper,
        })
    }
}

impl Polarization {
    /// `m` lists the polarization integer per vertex, in vertex order.
    pub fn new(graph: &MetrizedGraph, m: Vec<u32>) -> Result<Self, GraphError> {
        assert_eq!(m.len(), graph.n_vertices(), "one integer per vertex");
        let mut deg = 0i64;
        for (p, &mp) in m.iter().enumerate() {
            let coeff = graph.valence(p) as i64 + mp as i64 - 2;
            if coeff < 0 {
                return Err(GraphError::Ineffective {
                    vertex: graph.vertex_name(p).to_string(),
                    value: coeff,
                });
            }
            deg += coeff;
        }
        if deg % 2 != 0 {
            return Err(GraphError::NonIntegerGenus { num: deg });
        }
        Ok(Polarization {
            m,
            genus: (deg / 2 + 1) as u64,
        })
    }

    pub fn trivial(graph: &MetrizedGraph) -> Result<Self, GraphError> {
        Polarization::new(graph, vec![0; graph.n_vertices()])
    }

    pub fn genus(&self) -> u64 {
        self.genus
    }

    pub fn m(&self) -> &[u32] {
        &self.m
    }
}

impl ZhangMeasure {
    pub fn total_mass(&self, graph: &MetrizedGraph) -> f64 {
        let atoms: f64 = self.atoms.iter().sum();
        let cont: f64 = graph
            .edges()
            .iter()
            .zip(&self.densities)
            .map(|(e, d)| e.length * d)
            .sum();
        atoms + cont
    }
}

/// Node index in the doubled subdivision matching node `i` of level `s`.
fn fine_index(graph: &MetrizedGraph, i: usize, s: usize) -> usize {
    let nv = graph.n_vertices();
    if i < nv {
        return i;
    }
    let e = (i - nv) / (s - 1);
    let k = (i - nv) % (s - 1) + 1;
    nv + e * (2 * s - 1) + (2 * k - 1)
}

/// Moore–Penrose inverse of the weighted graph Laplacian with conductances
/// `1/length`, via `(L + J/n)⁻¹ - J/n`.
fn pseudoinverse(n: usize, weighted: &[(usize, usize, f64)]) -> Result<DMatrix<f64>, GraphError> {
    let mut l = DMatrix::from_element(n, n, 1.0 / n as f64);
    for &(a, b, len) in weighted {
        let c = 1.0 / len;
        l[(a, a)] += c;
        l[(b, b)] += c;
        l[(a, b)] -= c;
        l[(b, a)] -= c;
    }
    let mut k = l.try_inverse().ok_or(GraphError::SolveFailure)?;
    k.add_scalar_mut(-1.0 / n as f64);
    Ok(k)
}

/// Quadrature policy for `I(Σ)` shared by graphs and period families.
pub(crate) fn lattice_moment_auto(gram: &GramLattice) -> Result<f64, LatticeError> {
    let est = match gram.rank() {
        0 => return Ok(0.0),
        1 => gram.tropical_moment(MomentMethod::Grid, 8192)?,
        2 => gram.tropical_moment(MomentMethod::Grid, 1024)?,
        _ => gram.tropical_moment(MomentMethod::LowDiscrepancy, 1 << 20)?,
    };
    Ok(est.estimate)
}

/// Builds the reduction graph of a semistable fiber: one vertex per component
/// with polarization `2·(component genus)`, one edge of length `thickness`
/// per node of the fiber.
pub fn reduction_graph(
    components: &[(String, u32)],
    nodes: &[(String, String, u32)],
) -> Result<(MetrizedGraph, Polarization), GraphError> {
    let vertices: Vec<String> = components.iter().map(|(n, _)| n.clone()).collect();
    let mut edges = Vec::with_capacity(nodes.len());
    for (u, v, thickness) in nodes {
        if *thickness == 0 {
            return Err(GraphError::InvalidThickness(*thickness));
        }
        edges.push((u.clone(), v.clone(), *thickness as f64));
    }
    let graph = match MetrizedGraph::new(vertices, edges) {
        Err(GraphError::Disconnected) => return Err(GraphError::DisconnectedSpecialFiber),
        other => other?,
    };
    let m = components.iter().map(|&(_, gv)| 2 * gv).collect();
    let pol = Polarization::new(&graph, m)?;
    Ok((graph, pol))
}
