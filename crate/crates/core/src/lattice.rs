//! Euclidean lattices given by Gram matrices and the associated polarized
//! real torus: tropical Riemann theta function, closest-vector enumeration,
//! tropical moment quadrature and small-rank isometry decision.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

/// Absolute tie window on `‖Ψ‖` values when collecting minimizer sets.
pub const TIE_WINDOW: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("gram matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("gram matrix is not symmetric at ({i},{j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("gram matrix is not positive definite (pivot {pivot} is {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("grid resolution {0} too small, need at least 2 points per axis")]
    ResolutionTooSmall(usize),
}

/// A rank-`r` Euclidean lattice `Z^r` with inner product given by a
/// positive-definite Gram matrix. Rank 0 is permitted and represents the
/// trivial torus.
#[derive(Debug, Clone)]
pub struct GramLattice {
    rank: usize,
    gram: DMatrix<f64>,
    gram_exact: Option<Vec<Vec<BigRational>>>,
    /// Upper-triangular Cholesky factor, `gram = U^T U`. Empty for rank 0.
    chol_upper: DMatrix<f64>,
}

/// A point of the torus in lattice-basis coordinates, entries reduced to `[0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusCoordinate {
    coords: Vec<f64>,
}

impl TorusCoordinate {
    /// Reduces the entries mod 1.
    pub fn new(coords: &[f64]) -> Self {
        TorusCoordinate {
            coords: coords.iter().map(|&c| c.rem_euclid(1.0)).collect(),
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Result of the closest-vector minimization behind `‖Ψ‖`.
#[derive(Debug, Clone)]
pub struct ThetaNormValue {
    /// `½ min_n (x+n)^T Q (x+n)`.
    pub value: f64,
    /// All integer vectors within [`TIE_WINDOW`] of the minimum.
    pub minimizers: Vec<Vec<i64>>,
}

/// Quadrature estimate of the tropical moment.
#[derive(Debug, Clone, Copy)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub error_estimate: f64,
}

/// Quadrature rule for [`GramLattice::tropical_moment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    /// Composite midpoint rule, `resolution` points per axis.
    Grid,
    /// Halton sequence, `resolution` points in total.
    LowDiscrepancy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsometryResult {
    Isometric,
    NotIsometric,
    /// Rank exceeds the decision cutoff.
    Inconclusive,
}

fn cholesky_upper(q: &DMatrix<f64>) -> Result<DMatrix<f64>, LatticeError> {
    let n = q.nrows();
    // Plain right-looking Cholesky so the failing pivot index can be reported.
    let mut u = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut d = q[(i, i)];
        for k in 0..i {
            d -= u[(k, i)] * u[(k, i)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(LatticeError::NotPositiveDefinite { pivot: i, value: d });
        }
        let uii = d.sqrt();
        u[(i, i)] = uii;
        for j in (i + 1)..n {
            let mut s = q[(i, j)];
            for k in 0..i {
                s -= u[(k, i)] * u[(k, j)];
            }
            u[(i, j)] = s / uii;
        }
    }
    Ok(u)
}

impl GramLattice {
    /// Validates a Gram matrix: square, symmetric (1e-12 relative in float
    /// mode, exact in rational mode) and positive definite.
    pub fn new(gram: DMatrix<f64>) -> Result<Self, LatticeError> {
        Self::build(gram, None)
    }

    /// Validates a Gram matrix given with exact rational entries.
    pub fn new_exact(gram_exact: Vec<Vec<BigRational>>) -> Result<Self, LatticeError> {
        let n = gram_exact.len();
        for (i, row) in gram_exact.iter().enumerate() {
            if row.len() != n {
                return Err(LatticeError::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for j in 0..n {
                if gram_exact[i][j] != gram_exact[j][i] {
                    return Err(LatticeError::NotSymmetric {
                        i,
                        j,
                        a: rational_to_f64(&gram_exact[i][j]),
                        b: rational_to_f64(&gram_exact[j][i]),
                    });
                }
            }
        }
        let gram = DMatrix::from_fn(n, n, |i, j| rational_to_f64(&gram_exact[i][j]));
        Self::build(gram, Some(gram_exact))
    }

    fn build(
        gram: DMatrix<f64>,
        gram_exact: Option<Vec<Vec<BigRational>>>,
    ) -> Result<Self, LatticeError> {
        let (rows, cols) = gram.shape();
        if rows != cols {
            return Err(LatticeError::NotSquare { rows, cols });
        }
        if gram_exact.is_none() {
            let scale = gram.amax().max(1e-300);
            for i in 0..rows {
                for j in (i + 1)..cols {
                    if (gram[(i, j)] - gram[(j, i)]).abs() > 1e-12 * scale {
                        return Err(LatticeError::NotSymmetric {
                            i,
                            j,
                            a: gram[(i, j)],
                            b: gram[(j, i)],
                        });
                    }
                }
            }
        }
        // Symmetrize so downstream arithmetic sees an exactly symmetric matrix.
        let sym = DMatrix::from_fn(rows, cols, |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]));
        let chol_upper = cholesky_upper(&sym)?;
        Ok(GramLattice {
            rank: rows,
            gram: sym,
            gram_exact,
            chol_upper,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_exact(&self) -> Option<&Vec<Vec<BigRational>>> {
        self.gram_exact.as_ref()
    }

    /// Quadratic form `v^T Q v` for a real vector in basis coordinates.
    pub fn norm_sq(&self, v: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        (v.transpose() * &self.gram * &v)[(0, 0)]
    }

    /// `‖Ψ‖` at `x`: `½ min_{n∈Z^r} (x+n)^T Q (x+n)`, with the full argmin
    /// set (all ties within [`TIE_WINDOW`]).
    ///
    /// The minimization is an exact closest-vector enumeration over the
    /// Cholesky factor of `Q`, seeded with the rounded-coordinate candidate.
    pub fn tropical_theta_norm(&self, x: &TorusCoordinate) -> ThetaNormValue {
        assert_eq!(x.len(), self.rank, "coordinate length must equal rank");
        if self.rank == 0 {
            return ThetaNormValue {
                value: 0.0,
                minimizers: vec![vec![]],
            };
        }
        let (fmin, minimizers) = self.enumerate_closest(x.coords(), 2.0 * TIE_WINDOW);
        ThetaNormValue {
            value: 0.5 * fmin,
            minimizers,
        }
    }

    /// The tropical Riemann theta function `Ψ(x) = ‖Ψ‖(x) − ½ x^T Q x ≤ 0`.
    pub fn tropical_psi(&self, x: &TorusCoordinate) -> f64 {
        let norm = self.tropical_theta_norm(x).value;
        norm - 0.5 * self.norm_sq(x.coords())
    }

    /// Depth-first enumeration of `f(n) = (x+n)^T Q (x+n)`. Returns the
    /// minimum and every `n` with `f(n) ≤ f_min + tie`.
    fn enumerate_closest(&self, x: &[f64], tie: f64) -> (f64, Vec<Vec<i64>>) {
        let r = self.rank;
        let u = &self.chol_upper;

        // Initial radius from the rounded-coordinate candidate.
        let n0: Vec<i64> = x.iter().map(|&xi| (-xi).round() as i64).collect();
        let v0: Vec<f64> = (0..r).map(|i| x[i] + n0[i] as f64).collect();
        let f0 = self.norm_sq(&v0);

        let mut best = f0;
        let mut found: Vec<(f64, Vec<i64>)> = vec![(f0, n0)];

        // DFS over levels r-1 .. 0. At level i the term is
        // (U_ii (x_i + n_i) + c_i)^2 with c_i determined by levels > i.
        let mut n = vec![0i64; r];
        self.dfs(
            r - 1,
            0.0,
            x,
            u,
            &mut n,
            &mut best,
            &mut found,
            tie,
        );

        let cutoff = best + tie;
        found.retain(|(f, _)| *f <= cutoff);
        found.sort_by(|a, b| a.1.cmp(&b.1));
        found.dedup_by(|a, b| a.1 == b.1);
        (best, found.into_iter().map(|(_, n)| n).collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        level: usize,
        partial: f64,
        x: &[f64],
        u: &DMatrix<f64>,
        n: &mut Vec<i64>,
        best: &mut f64,
        found: &mut Vec<(f64, Vec<i64>)>,
        tie: f64,
    ) {
        let i = level;
        let uii = u[(i, i)];
        let mut c = 0.0;
        for j in (i + 1)..self.rank {
            c += u[(i, j)] * (x[j] + n[j] as f64);
        }
        // The level term is a parabola in n_i, so walk outward in both
        // directions from the rounded center until the bound prunes.
        let center = -x[i] - c / uii;
        let base = center.round() as i64;
        for dir in [1i64, -1] {
            let mut k = if dir == 1 { base } else { base - 1 };
            loop {
                let t = uii * (x[i] + k as f64) + c;
                let cost = partial + t * t;
                if cost > *best + tie {
                    break;
                }
                n[i] = k;
                if i == 0 {
                    if cost < *best {
                        *best = cost;
                    }
                    found.push((cost, n.clone()));
                } else {
                    self.dfs(i - 1, cost, x, u, n, best, found, tie);
                }
                k += dir;
            }
        }
        n[i] = 0;
    }

    /// All integer vectors `v` with `v^T Q v ≤ bound` (including 0).
    pub fn vectors_below(&self, bound: f64) -> Vec<(Vec<i64>, f64)> {
        if self.rank == 0 {
            return vec![(vec![], 0.0)];
        }
        let mut out = Vec::new();
        let mut n = vec![0i64; self.rank];
        self.collect_below(self.rank - 1, 0.0, bound, &mut n, &mut out);
        out.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap()
                .then_with(|| a.0.cmp(&b.0))
        });
        out
    }

    fn collect_below(
        &self,
        level: usize,
        partial: f64,
        bound: f64,
        n: &mut Vec<i64>,
        out: &mut Vec<(Vec<i64>, f64)>,
    ) {
        let i = level;
        let u = &self.chol_upper;
        let uii = u[(i, i)];
        let mut c = 0.0;
        for j in (i + 1)..self.rank {
            c += u[(i, j)] * n[j] as f64;
        }
        let center = -c / uii;
        let base = center.round() as i64;
        for dir in [1i64, -1] {
            let mut k = if dir == 1 { base } else { base - 1 };
            loop {
                let t = uii * k as f64 + c;
                let cost = partial + t * t;
                if cost > bound + 1e-12 {
                    break;
                }
                n[i] = k;
                if i == 0 {
                    out.push((n.clone(), cost));
                } else {
                    self.collect_below(i - 1, cost, bound, n, out);
                }
                k += dir;
            }
        }
        n[i] = 0;
    }

    /// Tropical moment `I(Σ) = 2 ∫_{[0,1]^r} ‖Ψ‖(x) dλ(x)`.
    ///
    /// Grid mode uses a composite midpoint rule with `resolution` points per
    /// axis; the error estimate is the difference against the half-resolution
    /// rule. Low-discrepancy mode uses `resolution` Halton points with the
    /// batch-spread standard error.
    pub fn tropical_moment(
        &self,
        method: MomentMethod,
        resolution: usize,
    ) -> Result<MomentEstimate, LatticeError> {
        if self.rank == 0 {
            return Ok(MomentEstimate {
                estimate: 0.0,
                error_estimate: 0.0,
            });
        }
        match method {
            MomentMethod::Grid => {
                if resolution < 2 {
                    return Err(LatticeError::ResolutionTooSmall(resolution));
                }
                let fine = self.moment_grid(resolution);
                let coarse = self.moment_grid((resolution / 2).max(1));
                Ok(MomentEstimate {
                    estimate: fine,
                    error_estimate: (fine - coarse).abs(),
                })
            }
            MomentMethod::LowDiscrepancy => {
                let n = resolution.max(1);
                let batches = 16usize.min(n);
                let mut batch_means = vec![0.0f64; batches];
                let mut counts = vec![0usize; batches];
                let mut x = vec![0.0f64; self.rank];
                for k in 0..n {
                    for (d, xd) in x.iter_mut().enumerate() {
                        *xd = halton(k as u64 + 1, PRIMES[d % PRIMES.len()]);
                    }
                    let v = self
                        .tropical_theta_norm(&TorusCoordinate::new(&x))
                        .value;
                    let b = k * batches / n;
                    batch_means[b] += v;
                    counts[b] += 1;
                }
                let mut total = 0.0;
                for (bm, &c) in batch_means.iter_mut().zip(&counts) {
                    total += *bm;
                    *bm /= c.max(1) as f64;
                }
                let mean = total / n as f64;
                let mut var = 0.0;
                for &bm in &batch_means {
                    var += (bm - mean) * (bm - mean);
                }
                let spread = if batches > 1 {
                    (var / (batches as f64 * (batches - 1) as f64)).sqrt()
                } else {
                    0.0
                };
                Ok(MomentEstimate {
                    estimate: 2.0 * mean,
                    error_estimate: 2.0 * spread,
                })
            }
        }
    }

    fn moment_grid(&self, res: usize) -> f64 {
        let r = self.rank;
        let total = res.pow(r as u32);
        let mut sum = 0.0;
        let mut idx = vec![0usize; r];
        let mut x = vec![0.0f64; r];
        for _ in 0..total {
            for d in 0..r {
                x[d] = (idx[d] as f64 + 0.5) / res as f64;
            }
            sum += self.tropical_theta_norm(&TorusCoordinate::new(&x)).value;
            for d in 0..r {
                idx[d] += 1;
                if idx[d] < res {
                    break;
                }
                idx[d] = 0;
            }
        }
        2.0 * sum / total as f64
    }

    /// Decides whether two lattices are isometric by enumerating all vectors
    /// up to the larger maximal diagonal norm and searching for a basis map
    /// preserving the Gram matrix. Complete only for `rank ≤ max_rank`.
    pub fn isometry_check(
        &self,
        other: &GramLattice,
        max_rank: usize,
    ) -> Result<IsometryResult, LatticeError> {
        if self.rank != other.rank {
            return Err(LatticeError::RankMismatch(self.rank, other.rank));
        }
        let r = self.rank;
        if r == 0 {
            return Ok(IsometryResult::Isometric);
        }
        if r > max_rank {
            return Ok(IsometryResult::Inconclusive);
        }
        let tol = 1e-9;
        let c1 = (0..r).map(|i| self.gram[(i, i)]).fold(0.0, f64::max);
        let c2 = (0..r).map(|i| other.gram[(i, i)]).fold(0.0, f64::max);
        let bound = c1.max(c2) + tol;
        let s1 = self.vectors_below(bound);
        let s2 = other.vectors_below(bound);
        if s1.len() != s2.len() {
            return Ok(IsometryResult::NotIsometric);
        }
        for (a, b) in s1.iter().zip(s2.iter()) {
            if (a.1 - b.1).abs() > tol {
                return Ok(IsometryResult::NotIsometric);
            }
        }
        // Backtracking over candidate images of the basis vectors of `other`.
        let mut cols: Vec<Vec<i64>> = Vec::with_capacity(r);
        if self.find_basis_map(other, &s1, &mut cols, tol) {
            Ok(IsometryResult::Isometric)
        } else {
            Ok(IsometryResult::NotIsometric)
        }
    }

    fn find_basis_map(
        &self,
        other: &GramLattice,
        shorts: &[(Vec<i64>, f64)],
        cols: &mut Vec<Vec<i64>>,
        tol: f64,
    ) -> bool {
        let r = self.rank;
        let k = cols.len();
        if k == r {
            return unimodular(cols);
        }
        let target = other.gram[(k, k)];
        'cand: for (v, norm) in shorts {
            if (norm - target).abs() > tol {
                continue;
            }
            for (j, prev) in cols.iter().enumerate() {
                let mut ip = 0.0;
                for a in 0..r {
                    for b in 0..r {
                        ip += prev[a] as f64 * self.gram[(a, b)] * v[b] as f64;
                    }
                }
                if (ip - other.gram[(j, k)]).abs() > tol {
                    continue 'cand;
                }
            }
            cols.push(v.clone());
            if self.find_basis_map(other, shorts, cols, tol) {
                return true;
            }
            cols.pop();
        }
        false
    }
}

fn unimodular(cols: &[Vec<i64>]) -> bool {
    let r = cols.len();
    let m: Vec<Vec<i128>> = cols
        .iter()
        .map(|c| c.iter().map(|&x| x as i128).collect())
        .collect();
    let det = int_det(&m, r);
    det == 1 || det == -1
}

fn int_det(m: &[Vec<i128>], r: usize) -> i128 {
    // Fraction-free Gaussian elimination (Bareiss), exact for small ranks.
    let mut a: Vec<Vec<i128>> = (0..r).map(|i| (0..r).map(|j| m[j][i]).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..r {
        if a[k][k] == 0 {
            let swap = (k + 1..r).find(|&i| a[i][k] != 0);
            match swap {
                Some(i) => {
                    a.swap(k, i);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in (k + 1)..r {
            for j in (k + 1)..r {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
            a[i][k] = 0;
        }
        prev = a[k][k];
    }
    sign * a[r - 1][r - 1]
}

pub(crate) const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical-inverse (van der Corput) value of `k` in the given base.
pub(crate) fn halton(mut k: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Convenience constructor for integer Gram matrices in tests and fixtures.
pub fn gram_from_rows(rows: &[&[f64]]) -> Result<GramLattice, LatticeError> {
    let n = rows.len();
    let cols = rows.first().map(|r| r.len()).unwrap_or(0);
    let m = DMatrix::from_fn(n, cols, |i, j| rows[i][j]);
    GramLattice::new(m)
}

/// Exact rational from an integer, for fixture construction.
pub fn big_ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
