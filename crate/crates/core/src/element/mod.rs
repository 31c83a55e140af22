//! Local matrices of the C1 virtual element on one polygon.
//!
//! Local dofs are ordered per vertex as `(v, ∂x v, ∂y v)` following the CCW
//! vertex order of the cell. The energy projector onto P2 is computed from
//! the dofs alone:
//!
//! * `a_K(Πv, q) = a_K(v, q)` for `q ∈ {ξ², ξη, η²}`; the right-hand side is
//!   reduced to edge terms `Σ_e (D²q n_e) · ∫_e ∇v`, where the tangential part
//!   of `∫_e ∇v` is the jump of the cubic trace between the endpoints and the
//!   normal part is the trapezoid rule on the linear normal derivative.
//! * `Σ_i Πv(P_i) q(P_i) = Σ_i v(P_i) q(P_i)` for `q ∈ P1` fixes the kernel.
//!
//! On the enhanced local space the L2 projection onto P2 coincides with this
//! projector, so the mass matrix only needs the polynomial Gram matrix `H`.

mod basis;
mod quadrature;

use std::fmt::Write as _;

use log::warn;
use nalgebra::{DMatrix, Matrix6, Point2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::mesh::CellGeometry;

pub use basis::{ScaledMonomialBasis, N_MONOMIALS};
pub use quadrature::{cell_rule, ear_clip, triangulate};

pub const DOFS_PER_VERTEX: usize = 3;
const CONDITION_WARNING: f64 = 1e12;

/// How `σ_K` and `σ_K⁰` average the eigenvalues of the projected local matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRule {
    /// `trace / (3 N_K)`, i.e. the mean over all eigenvalues including the kernel.
    #[default]
    Trace,
    /// `trace / (3 N_K - 3)` for the stiffness, ignoring the P1 kernel.
    TraceExcludingKernel,
}

/// Scaling of the stiffness stabilization weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StiffnessScaling {
    /// Weights `σ_K` on values and `σ_K h_P²` on gradients. `σ_K` already
    /// carries the `h_K⁻²` scale of `a_K`, so the stabilization scales like
    /// `a_K(v, v)` under refinement.
    #[default]
    Consistent,
    /// Weights `σ_K h_K⁻²` and `σ_K h_K⁻² h_P²`. This over-weights the
    /// stabilization by `h_K⁻²` and locks under refinement; kept for comparison.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StabilizationOptions {
    #[serde(default)]
    pub sigma_rule: SigmaRule,
    #[serde(default)]
    pub stiffness_scaling: StiffnessScaling,
}

/// All matrices of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalElementMatrices {
    pub basis: ScaledMonomialBasis,
    /// Dofs of each monomial, `3N_K x 6`.
    pub d: DMatrix<f64>,
    /// Augmented projector matrix (P1 rows replaced by the vertex pairing).
    pub g_tilde: Matrix6<f64>,
    /// Right-hand side of the projector system, `6 x 3N_K`.
    pub b_tilde: DMatrix<f64>,
    /// `a_K(m_α, m_β)`; zero on P1.
    pub g_energy: Matrix6<f64>,
    /// `∫_K m_α m_β`.
    pub h: Matrix6<f64>,
    /// Monomial coefficients of `Π φ_i`, `6 x 3N_K`.
    pub pi_star: DMatrix<f64>,
    pub k_loc: DMatrix<f64>,
    pub m_loc: DMatrix<f64>,
    pub sigma: f64,
    pub sigma0: f64,
}

pub fn basis_for(geom: &CellGeometry) -> ScaledMonomialBasis {
    ScaledMonomialBasis::new(geom.centroid, geom.diameter)
}

pub fn compute_d(geom: &CellGeometry, basis: &ScaledMonomialBasis) -> DMatrix<f64> {
    let n = geom.n_vertices();
    let mut d = DMatrix::zeros(DOFS_PER_VERTEX * n, N_MONOMIALS);
    for (i, p) in geom.vertices.iter().enumerate() {
        let vals = basis.values(p);
        let grads = basis.gradients(p);
        for a in 0..N_MONOMIALS {
            d[(3 * i, a)] = vals[a];
            d[(3 * i + 1, a)] = grads[a].x;
            d[(3 * i + 2, a)] = grads[a].y;
        }
    }
    d
}

/// `a_K(m_α, m_β) = |K| D²m_α : D²m_β` (constant Hessians).
pub fn compute_energy_gram(geom: &CellGeometry, basis: &ScaledMonomialBasis) -> Matrix6<f64> {
    let mut g = Matrix6::zeros();
    for a in 3..N_MONOMIALS {
        for b in 3..N_MONOMIALS {
            g[(a, b)] = geom.area * basis.hessian(a).dot(&basis.hessian(b));
        }
    }
    g
}

pub fn compute_g_tilde(geom: &CellGeometry, basis: &ScaledMonomialBasis) -> Matrix6<f64> {
    let mut g = compute_energy_gram(geom, basis);
    for p in &geom.vertices {
        let v = basis.values(p);
        for a in 0..3 {
            for b in 0..N_MONOMIALS {
                g[(a, b)] += v[a] * v[b];
            }
        }
    }
    g
}

pub fn compute_b_tilde(geom: &CellGeometry, basis: &ScaledMonomialBasis) -> DMatrix<f64> {
    let n = geom.n_vertices();
    let mut b = DMatrix::zeros(N_MONOMIALS, DOFS_PER_VERTEX * n);
    for (i, p) in geom.vertices.iter().enumerate() {
        let v = basis.values(p);
        for a in 0..3 {
            b[(a, 3 * i)] = v[a];
        }
    }
    for (e, edge) in geom.edges.iter().enumerate() {
        let (start, end) = (e, (e + 1) % n);
        for a in 3..N_MONOMIALS {
            let traction = basis.hessian(a) * edge.normal;
            // ∫_e ∂_t v = v(end) - v(start)
            let tt = traction.dot(&edge.tangent);
            b[(a, 3 * end)] += tt;
            b[(a, 3 * start)] -= tt;
            // ∫_e ∂_n v = |e|/2 (∇v(start) + ∇v(end)) · n
            let nn = traction.dot(&edge.normal) * 0.5 * edge.length;
            for vtx in [start, end] {
                b[(a, 3 * vtx + 1)] += nn * edge.normal.x;
                b[(a, 3 * vtx + 2)] += nn * edge.normal.y;
            }
        }
    }
    b
}

pub fn compute_h(geom: &CellGeometry, basis: &ScaledMonomialBasis) -> Matrix6<f64> {
    let mut h = Matrix6::zeros();
    for (p, w) in cell_rule(geom) {
        let m = basis.values(&p);
        for a in 0..N_MONOMIALS {
            for b in a..N_MONOMIALS {
                h[(a, b)] += w * m[a] * m[b];
            }
        }
    }
    for a in 0..N_MONOMIALS {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    h
}

/// Solves `G̃ Π* = B̃` with a column-pivoted QR; `cell` is only used in errors.
pub fn projector(g_tilde: &Matrix6<f64>, b_tilde: &DMatrix<f64>, cell: usize) -> Result<DMatrix<f64>> {
    let sv = g_tilde.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let regular = smin > smax * f64::EPSILON * 16.0;
    if !regular {
        return Err(VemError::DegenerateCell {
            cell,
            reason: format!("projector system is singular (singular values {smax:e} .. {smin:e})"),
        });
    }
    let cond = smax / smin;
    if cond > CONDITION_WARNING {
        warn!("cell {cell}: projector system condition number {cond:e}");
    }
    let qr = g_tilde.clone_owned().col_piv_qr();
    let mut out = DMatrix::zeros(N_MONOMIALS, b_tilde.ncols());
    for j in 0..b_tilde.ncols() {
        let rhs = nalgebra::Vector6::from_iterator(b_tilde.column(j).iter().copied());
        let x = qr.solve(&rhs).ok_or_else(|| VemError::DegenerateCell {
            cell,
            reason: "projector solve failed".into(),
        })?;
        out.set_column(j, &x);
    }
    Ok(out)
}

/// Copies the upper triangle onto the lower one.
fn mirror_upper(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// `Pᵀ W P` with `W` diagonal, built from the upper triangle.
fn weighted_gram(p: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let n = p.ncols();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            out[(i, j)] = (0..p.nrows()).map(|r| p[(r, i)] * w[r] * p[(r, j)]).sum();
        }
    }
    mirror_upper(&mut out);
    out
}

fn projected(pi: &DMatrix<f64>, gram: &Matrix6<f64>) -> DMatrix<f64> {
    let g = DMatrix::from_iterator(6, 6, gram.iter().copied());
    let gp = &g * pi;
    let n = pi.ncols();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            out[(i, j)] = pi.column(i).dot(&gp.column(j));
        }
    }
    mirror_upper(&mut out);
    out
}

/// `I - D Π*`: maps dofs to the dofs of `v - Πv`.
pub fn non_polynomial_part(d: &DMatrix<f64>, pi: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows();
    DMatrix::identity(n, n) - d * pi
}

fn stabilization_weights(h_p: &[f64], value_weight: f64) -> Vec<f64> {
    h_p.iter()
        .flat_map(|&hp| [value_weight, value_weight * hp * hp, value_weight * hp * hp])
        .collect()
}

/// Stabilized local stiffness and `σ_K`.
pub fn local_stiffness(
    geom: &CellGeometry,
    d: &DMatrix<f64>,
    pi: &DMatrix<f64>,
    g_energy: &Matrix6<f64>,
    h_p: &[f64],
    options: &StabilizationOptions,
) -> (DMatrix<f64>, f64) {
    let k_c = projected(pi, g_energy);
    let n_dof = d.nrows();
    let divisor = match options.sigma_rule {
        SigmaRule::Trace => n_dof,
        SigmaRule::TraceExcludingKernel => n_dof - 3,
    };
    let sigma = k_c.trace() / divisor as f64;
    let value_weight = match options.stiffness_scaling {
        StiffnessScaling::Consistent => sigma,
        StiffnessScaling::Literal => sigma / (geom.diameter * geom.diameter),
    };
    let r = non_polynomial_part(d, pi);
    let s = weighted_gram(&r, &stabilization_weights(h_p, value_weight));
    (k_c + s, sigma)
}

/// Stabilized local mass and `σ_K⁰`.
pub fn local_mass(
    geom: &CellGeometry,
    d: &DMatrix<f64>,
    pi: &DMatrix<f64>,
    h: &Matrix6<f64>,
    h_p: &[f64],
) -> (DMatrix<f64>, f64) {
    let m_c = projected(pi, h);
    let sigma0 = m_c.trace() / d.nrows() as f64;
    let value_weight = sigma0 * geom.diameter * geom.diameter;
    let r = non_polynomial_part(d, pi);
    let s = weighted_gram(&r, &stabilization_weights(h_p, value_weight));
    (m_c + s, sigma0)
}

impl LocalElementMatrices {
    /// Builds every local matrix; `h_p` holds the patch diameter of each cell vertex.
    pub fn build(cell: usize, geom: &CellGeometry, h_p: &[f64], options: &StabilizationOptions) -> Result<Self> {
        assert_eq!(h_p.len(), geom.n_vertices());
        let basis = basis_for(geom);
        let d = compute_d(geom, &basis);
        let g_tilde = compute_g_tilde(geom, &basis);
        let b_tilde = compute_b_tilde(geom, &basis);
        let g_energy = compute_energy_gram(geom, &basis);
        let h = compute_h(geom, &basis);
        let pi_star = projector(&g_tilde, &b_tilde, cell)?;
        let (k_loc, sigma) = local_stiffness(geom, &d, &pi_star, &g_energy, h_p, options);
        let (m_loc, sigma0) = local_mass(geom, &d, &pi_star, &h, h_p);
        Ok(LocalElementMatrices {
            basis,
            d,
            g_tilde,
            b_tilde,
            g_energy,
            h,
            pi_star,
            k_loc,
            m_loc,
            sigma,
            sigma0,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.d.nrows()
    }

    /// Value of the projected P2 polynomial of the local dof vector `dofs` at `p`.
    pub fn projection_at(&self, dofs: &[f64], p: &Point2<f64>) -> f64 {
        let m = self.basis.values(p);
        (0..N_MONOMIALS)
            .map(|a| m[a] * (0..dofs.len()).map(|j| self.pi_star[(a, j)] * dofs[j]).sum::<f64>())
            .sum()
    }

    /// Text dump of all matrices (row-major, 17 significant digits).
    pub fn debug_text(&self, cell: usize) -> String {
        let mut out = String::new();
        writeln!(out, "cell {cell} sigma {:.16e} sigma0 {:.16e}", self.sigma, self.sigma0).unwrap();
        let mut dump = |name: &str, rows: usize, cols: usize, at: &dyn Fn(usize, usize) -> f64| {
            writeln!(out, "{name} {rows} {cols}").unwrap();
            for i in 0..rows {
                let line: Vec<String> = (0..cols).map(|j| format!("{:.16e}", at(i, j))).collect();
                writeln!(out, "{}", line.join(" ")).unwrap();
            }
        };
        dump("D", self.d.nrows(), self.d.ncols(), &|i, j| self.d[(i, j)]);
        dump("G_tilde", 6, 6, &|i, j| self.g_tilde[(i, j)]);
        dump("B_tilde", 6, self.b_tilde.ncols(), &|i, j| self.b_tilde[(i, j)]);
        dump("H", 6, 6, &|i, j| self.h[(i, j)]);
        dump("Pi_star", 6, self.pi_star.ncols(), &|i, j| self.pi_star[(i, j)]);
        dump("K_loc", self.k_loc.nrows(), self.k_loc.ncols(), &|i, j| {
            self.k_loc[(i, j)]
        });
        dump("M_loc", self.m_loc.nrows(), self.m_loc.ncols(), &|i, j| {
            self.m_loc[(i, j)]
        });
        out
    }
}

#[cfg(test)]
mod tests;
