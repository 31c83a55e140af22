//! Smallest eigenpairs of the generalized symmetric-definite problem `K x = λ M x`.
//!
//! Two solvers are available. The dense one factors `M = L Lᵀ` and diagonalizes
//! `L⁻¹ K L⁻ᵀ`. The sparse one runs a block Krylov iteration on
//! `(K - σM)⁻¹ M` in the `M` inner product with full reorthogonalization,
//! using a sparse Cholesky factorization after reverse Cuthill-McKee
//! reordering. Block iteration recovers multiple eigenvalues, which a single
//! Krylov vector cannot see.

mod ordering;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};

pub use ordering::{bandwidth, permute_symmetric, reverse_cuthill_mckee};

/// Systems up to this size go to the dense solver in [`SolverMode::Auto`].
pub const DENSE_THRESHOLD: usize = 400;
/// Default bound on `‖Kx - λMx‖₂ / (‖K‖₁ ‖x‖₂)`.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
const CONDITION_WARNING: f64 = 1e12;
const START_SEED: u64 = 0x5eed_1e57;
/// Ritz pairs of the shift-inverted operator count as converged below this
/// relative residual.
const KRYLOV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Dense,
    ShiftInvert,
    #[default]
    Auto,
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverMode::Dense => "dense",
            SolverMode::ShiftInvert => "shift_invert",
            SolverMode::Auto => "auto",
        })
    }
}

impl std::str::FromStr for SolverMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dense" => Ok(SolverMode::Dense),
            "shift_invert" | "sparse" => Ok(SolverMode::ShiftInvert),
            "auto" => Ok(SolverMode::Auto),
            other => Err(format!("unknown solver mode '{other}' (dense, shift_invert, auto)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub mode: SolverMode,
    pub tolerance: f64,
    /// Largest Krylov basis of the sparse solver, in vectors.
    pub max_basis: usize,
    pub dense_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mode: SolverMode::Auto,
            tolerance: DEFAULT_TOLERANCE,
            max_basis: 600,
            dense_threshold: DENSE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `M`-orthonormal columns.
    pub eigenvectors: DMatrix<f64>,
    /// `‖Kx - λMx‖₂`.
    pub residuals: Vec<f64>,
    /// Method actually used (never `Auto`).
    pub method: SolverMode,
    /// Block iterations of the sparse solver; 1 for the dense solver.
    pub iterations: usize,
    pub shift: f64,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.eigenvectors.column(i).into_owned()
    }
}

/// `y = A x` for a CSC matrix.
pub fn spmv(a: &CscMatrix<f64>, x: &[f64]) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    for (j, col) in (0..a.ncols()).map(|j| (j, a.col(j))) {
        let xj = x[j];
        if xj != 0.0 {
            for (&i, &v) in col.row_indices().iter().zip(col.values()) {
                y[i] += v * xj;
            }
        }
    }
    y
}

/// Maximum absolute column sum.
pub fn norm1(a: &CscMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.col(j).values().iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn to_dense(a: &CscMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        d[(i, j)] = *v;
    }
    d
}

/// `r_i = ‖Kx_i - λ_i M x_i‖₂ / (‖K‖₁ ‖x_i‖₂)`.
pub fn residual_report(k: &CscMatrix<f64>, m: &CscMatrix<f64>, solution: &EigenSolution) -> Vec<f64> {
    let kn = norm1(k);
    (0..solution.len())
        .map(|i| {
            let x = solution.eigenvectors.column(i);
            let r = spmv(k, x.as_slice()) - spmv(m, x.as_slice()) * solution.eigenvalues[i];
            r.norm() / (kn * x.norm())
        })
        .collect()
}

/// Largest `|xᵢᵀ M xᵢ - 1|` and largest `|xᵢᵀ M xⱼ|`, `i ≠ j`.
pub fn m_orthonormality_error(m: &CscMatrix<f64>, solution: &EigenSolution) -> (f64, f64) {
    let x = &solution.eigenvectors;
    let mx = DMatrix::from_columns(
        &(0..x.ncols())
            .map(|i| spmv(m, x.column(i).as_slice()))
            .collect::<Vec<_>>(),
    );
    let g = x.transpose() * mx;
    let mut diag: f64 = 0.0;
    let mut off: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            if i == j {
                diag = diag.max((g[(i, j)] - 1.0).abs());
            } else {
                off = off.max(g[(i, j)].abs());
            }
        }
    }
    (diag, off)
}

fn check_shapes(k: &CscMatrix<f64>, m: &CscMatrix<f64>, count: usize) -> Result<usize> {
    let n = k.nrows();
    if k.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(VemError::InvalidArgument(format!(
            "K is {}x{} but M is {}x{}",
            k.nrows(),
            k.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    if n == 0 {
        return Err(VemError::InvalidArgument("system has no free dofs".into()));
    }
    if count == 0 {
        return Err(VemError::InvalidArgument("eigenvalue count must be at least 1".into()));
    }
    if count > n {
        warn!("requested {count} eigenvalues but the system has {n} dofs; returning {n}");
    }
    Ok(count.min(n))
}

/// Condition estimate of an SPD matrix from its Cholesky pivots.
fn pivot_condition(diag: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    (hi / lo).powi(2)
}

/// The `count` smallest eigenpairs of `K x = λ M x`.
pub fn solve_generalized(
    k: &CscMatrix<f64>,
    m: &CscMatrix<f64>,
    count: usize,
    options: &SolverOptions,
) -> Result<EigenSolution> {
    let count = check_shapes(k, m, count)?;
    let mode = match options.mode {
        SolverMode::Auto if k.nrows() <= options.dense_threshold => SolverMode::Dense,
        SolverMode::Auto => SolverMode::ShiftInvert,
        other => other,
    };
    match mode {
        SolverMode::Dense => solve_dense(k, m, count),
        _ => solve_shift_invert(k, m, count, options),
    }
}

fn finish(
    k: &CscMatrix<f64>,
    m: &CscMatrix<f64>,
    mut pairs: Vec<(f64, DVector<f64>)>,
    method: SolverMode,
    iterations: usize,
    shift: f64,
) -> EigenSolution {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let residuals = pairs
        .iter()
        .map(|(l, x)| (spmv(k, x.as_slice()) - spmv(m, x.as_slice()) * *l).norm())
        .collect();
    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let eigenvectors = DMatrix::from_columns(&pairs.into_iter().map(|p| p.1).collect::<Vec<_>>());
    EigenSolution {
        eigenvalues,
        eigenvectors,
        residuals,
        method,
        iterations,
        shift,
    }
}

fn solve_dense(k: &CscMatrix<f64>, m: &CscMatrix<f64>, count: usize) -> Result<EigenSolution> {
    let kd = to_dense(k);
    let chol = to_dense(m).cholesky().ok_or(VemError::MassNotPositiveDefinite)?;
    let l = chol.l();
    let cond = pivot_condition(l.diagonal().iter().copied());
    if cond > CONDITION_WARNING {
        warn!("mass matrix condition estimate {cond:e}");
    }
    // C = L⁻¹ K L⁻ᵀ
    let y = l.solve_lower_triangular(&kd).expect("nonsingular factor");
    let c = l.solve_lower_triangular(&y.transpose()).expect("nonsingular factor");
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lt = l.transpose();
    let pairs = order[..count]
        .iter()
        .map(|&i| {
            let x = lt
                .solve_upper_triangular(&eig.eigenvectors.column(i).into_owned())
                .expect("nonsingular factor");
            (eig.eigenvalues[i], x)
        })
        .collect();
    Ok(finish(k, m, pairs, SolverMode::Dense, 1, 0.0))
}

/// `K - σ M` (union of both patterns).
fn shifted(k: &CscMatrix<f64>, m: &CscMatrix<f64>, sigma: f64) -> CscMatrix<f64> {
    if sigma == 0.0 {
        return k.clone();
    }
    if k.pattern() == m.pattern() {
        let vals = k.values().iter().zip(m.values()).map(|(a, b)| a - sigma * b).collect();
        return CscMatrix::try_from_pattern_and_values(k.pattern().clone(), vals).expect("same pattern");
    }
    let mut coo = CooMatrix::new(k.nrows(), k.ncols());
    for (i, j, v) in k.triplet_iter() {
        coo.push(i, j, *v);
    }
    for (i, j, v) in m.triplet_iter() {
        coo.push(i, j, -sigma * v);
    }
    CscMatrix::from(&coo)
}

/// Sparse Cholesky factorization of `P A Pᵀ`.
struct Factor {
    perm: Vec<usize>,
    chol: CscCholesky<f64>,
}

impl Factor {
    fn new(a: &CscMatrix<f64>, perm: &[usize]) -> Option<Self> {
        let chol = CscCholesky::factor(&permute_symmetric(a, perm)).ok()?;
        Some(Factor {
            perm: perm.to_vec(),
            chol,
        })
    }

    fn pivots(&self) -> impl Iterator<Item = f64> + '_ {
        let l = self.chol.l();
        (0..l.ncols()).map(move |j| l.col(j).values()[0])
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut bp = DMatrix::from_fn(b.len(), 1, |i, _| b[self.perm[i]]);
        self.chol.solve_mut(&mut bp);
        let mut x = DVector::zeros(b.len());
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = bp[(i, 0)];
        }
        x
    }
}

/// `M`-orthogonalizes `w` against `basis` (with stored `M v`) twice.
fn m_orthogonalize(w: &mut DVector<f64>, basis: &[DVector<f64>], m_basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for (v, mv) in basis.iter().zip(m_basis) {
            let c = w.dot(mv);
            w.axpy(-c, v, 1.0);
        }
    }
}

fn solve_shift_invert(
    k: &CscMatrix<f64>,
    m: &CscMatrix<f64>,
    count: usize,
    options: &SolverOptions,
) -> Result<EigenSolution> {
    let n = k.nrows();
    let perm = reverse_cuthill_mckee(k);
    let mass = Factor::new(m, &perm).ok_or(VemError::MassNotPositiveDefinite)?;
    let cond = pivot_condition(mass.pivots());
    if cond > CONDITION_WARNING {
        warn!("mass matrix condition estimate {cond:e}");
    }
    drop(mass);

    // σ = 0 unless K is (numerically) singular
    let mut sigma = 0.0;
    let factor = match Factor::new(k, &perm) {
        Some(f) if pivot_condition(f.pivots()) < 1e28 => f,
        _ => {
            let trace: f64 = (0..n).map(|i| k.get_entry(i, i).map_or(0.0, |e| e.into_value())).sum();
            sigma = -trace / n as f64 * 1e-6;
            warn!("stiffness matrix is singular; shifting by {sigma:e}");
            Factor::new(&shifted(k, m, sigma), &perm)
                .ok_or_else(|| VemError::InvalidArgument("shifted stiffness matrix is not positive definite".into()))?
        }
    };

    let knorm = norm1(k);
    let block = (count + 2).min(n);
    let max_basis = options.max_basis.max(4 * block).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);

    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut m_basis: Vec<DVector<f64>> = Vec::new();
    let mut images: Vec<DVector<f64>> = Vec::new(); // (K - σM)⁻¹ M v
    let mut pending: Vec<DVector<f64>> = (0..block)
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let mut best = vec![f64::INFINITY; count];
    let mut iterations = 0;

    loop {
        iterations += 1;
        // extend the basis with the M-orthonormalized pending block
        let first_new = basis.len();
        for mut w in pending.drain(..) {
            if basis.len() >= max_basis {
                break;
            }
            let before = w.norm();
            m_orthogonalize(&mut w, &basis, &m_basis);
            let mw = spmv(m, w.as_slice());
            let nrm = w.dot(&mw).max(0.0).sqrt();
            if nrm <= 1e-10 * before.max(f64::MIN_POSITIVE) || nrm == 0.0 {
                continue;
            }
            let v = w / nrm;
            let mv = mw / nrm;
            images.push(factor.solve(&mv));
            basis.push(v);
            m_basis.push(mv);
        }
        let dim = basis.len();

        // Rayleigh-Ritz: H = Vᵀ M (K - σM)⁻¹ M V
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = m_basis[i].dot(&images[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let take = count.min(dim);
        let mut pairs = Vec::with_capacity(take);
        let mut krylov: f64 = 0.0;
        let mut resid = Vec::with_capacity(take);
        for &idx in &order[..take] {
            let theta = eig.eigenvalues[idx];
            let s = eig.eigenvectors.column(idx);
            let mut x = DVector::zeros(n);
            let mut ox = DVector::zeros(n);
            for (c, (v, w)) in s.iter().zip(basis.iter().zip(&images)) {
                x.axpy(*c, v, 1.0);
                ox.axpy(*c, w, 1.0);
            }
            let lambda = sigma + 1.0 / theta;
            let r = (spmv(k, x.as_slice()) - spmv(m, x.as_slice()) * lambda).norm() / (knorm * x.norm());
            // convergence of the Krylov iteration itself, relative to θ
            krylov = krylov.max((&ox - &x * theta).norm() / (theta.abs() * x.norm()));
            resid.push(r);
            pairs.push((lambda, x));
        }
        for (b, r) in best.iter_mut().zip(&resid) {
            *b = b.min(*r);
        }
        let worst = resid.iter().copied().fold(0.0, f64::max);
        debug!("shift-invert iteration {iterations}: basis {dim}, residual {worst:e}, krylov {krylov:e}");

        let exhausted = dim >= max_basis || dim == n;
        if take == count && worst <= options.tolerance && (krylov <= KRYLOV_TOL || dim == n) {
            return Ok(finish(k, m, pairs, SolverMode::ShiftInvert, iterations, sigma));
        }
        if exhausted {
            if take == count && worst <= options.tolerance {
                warn!("shift-invert basis exhausted at Krylov residual {krylov:e}; accepting");
                return Ok(finish(k, m, pairs, SolverMode::ShiftInvert, iterations, sigma));
            }
            return Err(VemError::NoConvergence {
                iterations,
                worst_residual: worst,
                best_residuals: best,
            });
        }

        // next block: images of the vectors added in this round; random
        // vectors when the Krylov space became invariant
        pending = images[first_new..].to_vec();
        if pending.is_empty() {
            pending = (0..block)
                .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
                .collect();
        }
    }
}
