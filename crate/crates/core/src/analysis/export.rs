//! Eigenfunction export as a legacy VTK unstructured grid (ASCII).

use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Point2;

use crate::assembly::DofMap;
use crate::eigensolve::EigenSolution;
use crate::element::{triangulate, LocalElementMatrices};
use crate::error::{Result, VemError};
use crate::mesh::PolygonalMesh;

/// Sampled fields on the sub-triangles of every cell. Points are duplicated
/// per cell, so the projected field may jump across cell edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub points: Vec<Point2<f64>>,
    /// Index of the cell owning each point.
    pub cell_of_point: Vec<usize>,
    pub triangles: Vec<[usize; 3]>,
    /// Projected P2 polynomial of the owning cell.
    pub projected: Vec<f64>,
    /// Nodal displacement at cell vertices; at a fan centroid, the mean of the
    /// cell's vertex values.
    pub nodal: Vec<f64>,
}

/// Samples the displacement given by free-dof vector `x`.
pub fn sample_field(
    mesh: &PolygonalMesh,
    locals: &[LocalElementMatrices],
    dof_map: &DofMap,
    x: &[f64],
) -> Result<SampledField> {
    if locals.len() != mesh.n_cells() {
        return Err(VemError::InvalidArgument(
            "one local matrix set per cell is required".into(),
        ));
    }
    if x.len() != dof_map.n_free() {
        return Err(VemError::InvalidArgument(format!(
            "vector has {} entries, system has {} free dofs",
            x.len(),
            dof_map.n_free()
        )));
    }
    let logical = dof_map.expand(x);
    let mut out = SampledField {
        points: Vec::new(),
        cell_of_point: Vec::new(),
        triangles: Vec::new(),
        projected: Vec::new(),
        nodal: Vec::new(),
    };
    for (c, (cell, local)) in mesh.cells().iter().zip(locals).enumerate() {
        let dofs: Vec<f64> = cell.iter().flat_map(|&v| logical[3 * v..3 * v + 3].to_vec()).collect();
        let geom = mesh.cell_geometry(c);
        let vertex_value = |p: &Point2<f64>| cell.iter().position(|&v| mesh.vertices()[v] == *p).map(|i| dofs[3 * i]);
        let mean = cell.iter().map(|&v| logical[3 * v]).sum::<f64>() / cell.len() as f64;
        for tri in triangulate(&geom) {
            let base = out.points.len();
            for p in tri {
                out.points.push(p);
                out.cell_of_point.push(c);
                out.projected.push(local.projection_at(&dofs, &p));
                out.nodal.push(vertex_value(&p).unwrap_or(mean));
            }
            out.triangles.push([base, base + 1, base + 2]);
        }
    }
    Ok(out)
}

/// Writes a sampled field as a legacy VTK file with point scalars
/// `projected` and `nodal` and the cell scalar `cell`.
pub fn write_vtk(field: &SampledField, title: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", field.points.len())?;
    for (p, z) in field.points.iter().zip(&field.projected) {
        writeln!(w, "{:.16e} {:.16e} {:.16e}", p.x, p.y, z)?;
    }
    let nt = field.triangles.len();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for t in &field.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {nt}")?;
    writeln!(w, "SCALARS cell int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for t in &field.triangles {
        writeln!(w, "{}", field.cell_of_point[t[0]])?;
    }
    writeln!(w, "POINT_DATA {}", field.points.len())?;
    for (name, values) in [("projected", &field.projected), ("nodal", &field.nodal)] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(w, "{v:.16e}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Exports eigenvector `index` (0-based) of `solution`, sign-normalized so
/// that its largest-magnitude entry is positive.
pub fn export_eigenfunction(
    mesh: &PolygonalMesh,
    locals: &[LocalElementMatrices],
    dof_map: &DofMap,
    solution: &EigenSolution,
    index: usize,
    path: impl AsRef<Path>,
) -> Result<SampledField> {
    if index >= solution.len() {
        return Err(VemError::InvalidArgument(format!(
            "mode {index} requested but only {} were computed",
            solution.len()
        )));
    }
    let mut x = solution.vector(index);
    if x[x.iamax()] < 0.0 {
        x = -x;
    }
    let field = sample_field(mesh, locals, dof_map, x.as_slice())?;
    let title = format!("mode {} lambda {:.12e}", index + 1, solution.eigenvalues[index]);
    write_vtk(&field, &title, path)?;
    Ok(field)
}
