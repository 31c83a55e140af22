//! Global dof numbering, boundary constraints and assembly of the reduced
//! stiffness and mass matrices.
//!
//! Constraints are eliminated. At simply-supported vertices the gradient dofs
//! are rotated into the edge frame `(t, n)` before scattering, so the
//! constrained tangential derivative simply drops out.
//!
//! Assembly is reproducible bit for bit: each global entry collects its cell
//! contributions, sorts them by value and sums them in that order, so neither
//! the thread schedule nor the cell order changes the result. Only the upper
//! triangle is accumulated; the lower one is its mirror image.

mod boundary;
mod dofmap;

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;
use rayon::prelude::*;

use crate::element::{LocalElementMatrices, StabilizationOptions};
use crate::error::{Result, VemError};
use crate::mesh::{vertex_patch_diameters, PolygonalMesh};

pub use boundary::{Axis, BoundaryAssignment, BoundarySpec, EdgeRule, EdgeRules};
pub use dofmap::{DofMap, VertexConstraint};

/// Reduced global system `K x = λ M x` over the free dofs.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub k: CscMatrix<f64>,
    pub m: CscMatrix<f64>,
    pub dof_map: DofMap,
}

impl GlobalSystem {
    pub fn n_free(&self) -> usize {
        self.dof_map.n_free()
    }
}

pub fn build_dof_map(mesh: &PolygonalMesh, spec: &BoundarySpec) -> Result<DofMap> {
    DofMap::build(mesh, spec)
}

/// Local matrices of every cell, computed in parallel (output in cell order).
pub fn local_matrices(mesh: &PolygonalMesh, options: &StabilizationOptions) -> Result<Vec<LocalElementMatrices>> {
    let h_p = vertex_patch_diameters(mesh);
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let geom = mesh.cell_geometry(c);
            let hp: Vec<f64> = mesh.cells()[c].iter().map(|&v| h_p[v]).collect();
            LocalElementMatrices::build(c, &geom, &hp, options)
        })
        .collect()
}

/// Upper-triangle contributions `(row, col, k, m)` of one cell to the reduced system.
fn cell_contributions(cell: &[usize], local: &LocalElementMatrices, dof_map: &DofMap) -> Vec<(usize, usize, f64, f64)> {
    // reduced free dofs of the cell: global index and logical column
    let nl = 3 * cell.len();
    let mut dofs: Vec<(usize, DVector<f64>)> = Vec::new();
    for (i, &v) in cell.iter().enumerate() {
        let frame = dof_map.constraint(v).frame();
        for (k, slot) in dof_map.slots(v).iter().enumerate() {
            if let Some(g) = slot {
                let mut col = DVector::zeros(nl);
                for r in 0..3 {
                    col[3 * i + r] = frame[(r, k)];
                }
                dofs.push((*g, col));
            }
        }
    }
    if dofs.is_empty() {
        return Vec::new();
    }
    let t = DMatrix::from_columns(&dofs.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>());
    let kt = &local.k_loc * &t;
    let mt = &local.m_loc * &t;
    let mut out = Vec::with_capacity(dofs.len() * (dofs.len() + 1) / 2);
    for (a, (ga, _)) in dofs.iter().enumerate() {
        for (b, (gb, _)) in dofs.iter().enumerate() {
            if ga <= gb {
                let kv = t.column(a).dot(&kt.column(b));
                let mv = t.column(a).dot(&mt.column(b));
                out.push((*ga, *gb, kv, mv));
            }
        }
    }
    out
}

fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// Builds the full symmetric CSC matrix from summed upper-triangle entries.
fn symmetric_csc(n: usize, upper: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    let mut all: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * upper.len());
    for &(i, j, v) in upper {
        all.push((i, j, v));
        if i != j {
            all.push((j, i, v));
        }
    }
    all.sort_unstable_by_key(|&(i, j, _)| (j, i));
    let mut offsets = vec![0usize; n + 1];
    for &(_, j, _) in &all {
        offsets[j + 1] += 1;
    }
    for j in 0..n {
        offsets[j + 1] += offsets[j];
    }
    let rows = all.iter().map(|e| e.0).collect();
    let vals = all.iter().map(|e| e.2).collect();
    CscMatrix::try_from_csc_data(n, n, offsets, rows, vals).expect("valid CSC structure")
}

/// Assembles the reduced system from precomputed local matrices.
pub fn assemble_from_locals(mesh: &PolygonalMesh, locals: &[LocalElementMatrices], dof_map: DofMap) -> GlobalSystem {
    let mut contrib: Vec<(usize, usize, f64, f64)> = mesh
        .cells()
        .par_iter()
        .zip(locals.par_iter())
        .flat_map_iter(|(cell, local)| cell_contributions(cell, local, &dof_map))
        .collect();
    contrib.par_sort_unstable_by(|a, b| {
        (a.0, a.1)
            .cmp(&(b.0, b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.total_cmp(&b.3))
    });
    let mut k_upper = Vec::new();
    let mut m_upper = Vec::new();
    for group in contrib.chunk_by(|a, b| (a.0, a.1) == (b.0, b.1)) {
        let (i, j) = (group[0].0, group[0].1);
        let mut ks: Vec<f64> = group.iter().map(|e| e.2).collect();
        let mut ms: Vec<f64> = group.iter().map(|e| e.3).collect();
        k_upper.push((i, j, ordered_sum(&mut ks)));
        m_upper.push((i, j, ordered_sum(&mut ms)));
    }
    let n = dof_map.n_free();
    GlobalSystem {
        k: symmetric_csc(n, &k_upper),
        m: symmetric_csc(n, &m_upper),
        dof_map,
    }
}

/// `K = Σ scatter(K_loc)`, `M = Σ scatter(M_loc)` over the free dofs.
pub fn assemble(mesh: &PolygonalMesh, spec: &BoundarySpec, options: &StabilizationOptions) -> Result<GlobalSystem> {
    let dof_map = DofMap::build(mesh, spec)?;
    let locals = local_matrices(mesh, options)?;
    Ok(assemble_from_locals(mesh, &locals, dof_map))
}

/// Writes the lower triangle as `%%sym-coo n nnz` followed by 0-based `i j v` lines.
pub fn write_sym_coo(matrix: &CscMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let lower: Vec<(usize, usize, f64)> = matrix
        .triplet_iter()
        .filter(|(i, j, _)| i >= j)
        .map(|(i, j, v)| (i, j, *v))
        .collect();
    writeln!(w, "%%sym-coo {} {}", matrix.nrows(), lower.len())?;
    for (i, j, v) in lower {
        writeln!(w, "{i} {j} {v:.17e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_sym_coo`] back into a full symmetric matrix.
pub fn read_sym_coo(path: impl AsRef<Path>) -> Result<CscMatrix<f64>> {
    let path = path.as_ref();
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let err = |line: usize, message: &str| VemError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    };
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| err(1, "empty file"))??;
    let head: Vec<&str> = header.split_whitespace().collect();
    let (n, nnz) = match head.as_slice() {
        ["%%sym-coo", n, nnz] => (
            n.parse::<usize>().map_err(|_| err(1, "bad size"))?,
            nnz.parse::<usize>().map_err(|_| err(1, "bad entry count"))?,
        ),
        _ => return Err(err(1, "expected '%%sym-coo n nnz'")),
    };
    let mut upper = Vec::with_capacity(nnz);
    for (k, line) in lines.enumerate() {
        let line = line?;
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || err(k + 2, "expected 'i j v'");
        let [i, j, v] = f.as_slice() else {
            return Err(bad());
        };
        let (i, j): (usize, usize) = (i.parse().map_err(|_| bad())?, j.parse().map_err(|_| bad())?);
        let v: f64 = v.parse().map_err(|_| bad())?;
        if i >= n || j > i {
            return Err(err(k + 2, "entry outside the lower triangle"));
        }
        upper.push((j, i, v));
    }
    if upper.len() != nnz {
        return Err(err(1, "entry count does not match header"));
    }
    Ok(symmetric_csc(n, &upper))
}
