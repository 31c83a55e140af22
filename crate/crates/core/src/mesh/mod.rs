//! Polygonal meshes of the plate domain.
//!
//! A [`PolygonalMesh`] is immutable once constructed: every constructor runs the
//! full validation (orientation, simplicity, conformity, boundary coverage and
//! vertex separation), so downstream code can rely on those invariants.

mod generate;
mod geometry;
mod io;
mod quality;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};

pub use generate::{
    generate, generate_distorted_hexagonal, generate_hexagonal, generate_rectangular, generate_trapezoidal,
    generate_triangular, Domain, MeshFamily,
};
pub use geometry::{CellGeometry, EdgeGeometry};
pub use io::{read_mesh, write_mesh};
pub use quality::{
    cell_quality, check_assumptions, polygon_kernel, vertex_patch_diameters, CellQuality, MeshQualityReport,
};

/// Relative tolerance (times the domain diameter) below which two vertices coincide.
pub const VERTEX_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMarker {
    Clamped,
    SimplySupported,
    Free,
}

impl BoundaryMarker {
    pub fn code(self) -> char {
        match self {
            BoundaryMarker::Clamped => 'C',
            BoundaryMarker::SimplySupported => 'S',
            BoundaryMarker::Free => 'F',
        }
    }

    pub fn from_code(c: &str) -> Option<Self> {
        match c {
            "C" => Some(BoundaryMarker::Clamped),
            "S" => Some(BoundaryMarker::SimplySupported),
            "F" => Some(BoundaryMarker::Free),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryMarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryMarker::Clamped => "clamped",
            BoundaryMarker::SimplySupported => "simply_supported",
            BoundaryMarker::Free => "free",
        })
    }
}

impl FromStr for BoundaryMarker {
    type Err = VemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c" | "clamped" => Ok(BoundaryMarker::Clamped),
            "s" | "ss" | "simply_supported" | "simply-supported" => Ok(BoundaryMarker::SimplySupported),
            "f" | "free" => Ok(BoundaryMarker::Free),
            other => Err(VemError::InvalidArgument(format!("unknown boundary marker '{other}'"))),
        }
    }
}

/// Boundary edge `a -> b`, oriented as in its (unique) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub marker: BoundaryMarker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalMesh {
    vertices: Vec<Point2<f64>>,
    cells: Vec<Vec<usize>>,
    boundary_edges: Vec<BoundaryEdge>,
}

impl PolygonalMesh {
    /// Builds and validates a mesh from explicit boundary edges.
    pub fn new(vertices: Vec<Point2<f64>>, cells: Vec<Vec<usize>>, boundary_edges: Vec<BoundaryEdge>) -> Result<Self> {
        let mut mesh = PolygonalMesh {
            vertices,
            cells,
            boundary_edges,
        };
        let topological = mesh.validate_cells()?;
        mesh.normalize_boundary(topological)?;
        Ok(mesh)
    }

    /// Builds a mesh whose boundary edges are derived from the topology and
    /// marked clamped.
    pub fn from_cells(vertices: Vec<Point2<f64>>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let mut mesh = PolygonalMesh {
            vertices,
            cells,
            boundary_edges: Vec::new(),
        };
        let topological = mesh.validate_cells()?;
        mesh.boundary_edges = topological
            .into_iter()
            .map(|(a, b)| BoundaryEdge {
                a,
                b,
                marker: BoundaryMarker::Clamped,
            })
            .collect();
        Ok(mesh)
    }

    /// Returns a copy with every boundary edge re-marked by `marker_at(midpoint)`.
    pub fn with_boundary_markers<F>(&self, marker_at: F) -> PolygonalMesh
    where
        F: Fn(Point2<f64>) -> BoundaryMarker,
    {
        let mut out = self.clone();
        for e in &mut out.boundary_edges {
            let mid = nalgebra::center(&self.vertices[e.a], &self.vertices[e.b]);
            e.marker = marker_at(mid);
        }
        out
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_vertices(&self, cell: usize) -> Vec<Point2<f64>> {
        self.cells[cell].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_geometry(&self, cell: usize) -> CellGeometry {
        CellGeometry::from_vertices(&self.cell_vertices(cell))
    }

    /// Maximum cell diameter.
    pub fn h(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.cell_geometry(c).diameter)
            .fold(0.0, f64::max)
    }

    pub fn area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_geometry(c).area).sum()
    }

    /// Diameter of the vertex bounding box.
    pub fn domain_diameter(&self) -> f64 {
        let (mut lo, mut hi) = (self.vertices[0], self.vertices[0]);
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (hi - lo).norm()
    }

    /// Vertex indices lying on at least one boundary edge.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices()];
        for e in &self.boundary_edges {
            mask[e.a] = true;
            mask[e.b] = true;
        }
        mask
    }

    pub fn n_interior_vertices(&self) -> usize {
        self.boundary_vertex_mask().iter().filter(|b| !**b).count()
    }

    /// For each vertex, the cells that contain it (ascending).
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for (c, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                out[v].push(c);
            }
        }
        out
    }

    pub(crate) fn replace_vertex(&mut self, v: usize, p: Point2<f64>) {
        self.vertices[v] = p;
    }

    /// Checks cell-level invariants and returns the topological boundary edges
    /// (oriented as in their cell, sorted by first appearance).
    fn validate_cells(&self) -> Result<Vec<(usize, usize)>> {
        let nv = self.vertices.len();
        if nv == 0 || self.cells.is_empty() {
            return Err(VemError::InvalidMesh("mesh has no vertices or no cells".into()));
        }
        let mut used = vec![false; nv];
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(VemError::InvalidMesh(format!("cell {c} has {} vertices", cell.len())));
            }
            for &v in cell {
                if v >= nv {
                    return Err(VemError::InvalidMesh(format!(
                        "cell {c} references vertex {v} but the mesh has {nv} vertices"
                    )));
                }
                used[v] = true;
            }
            let mut sorted = cell.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(VemError::InvalidMesh(format!("cell {c} repeats a vertex")));
            }
            let pts = self.cell_vertices(c);
            let area = geometry::signed_area(&pts);
            if area <= 0.0 {
                return Err(VemError::Orientation { cell: c, area });
            }
            if !geometry::is_simple(&pts) {
                return Err(VemError::InvalidMesh(format!("cell {c} is not a simple polygon")));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(VemError::InvalidMesh(format!("vertex {v} is not used by any cell")));
        }
        self.check_vertex_separation()?;

        // edge key -> directed occurrences (cell, from, to)
        type Occurrence = (usize, usize, usize);
        let mut edges: HashMap<(usize, usize), Vec<Occurrence>> = HashMap::new();
        let mut order = Vec::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for i in 0..cell.len() {
                let (a, b) = (cell[i], cell[(i + 1) % cell.len()]);
                let key = (a.min(b), a.max(b));
                let entry = edges.entry(key).or_default();
                if entry.is_empty() {
                    order.push(key);
                }
                entry.push((a, b, c));
            }
        }
        let mut boundary = Vec::new();
        for key in order {
            let occ = &edges[&key];
            match occ.as_slice() {
                [(a, b, _)] => boundary.push((*a, *b)),
                [(a1, _, c1), (a2, _, c2)] => {
                    if a1 == a2 {
                        return Err(VemError::InvalidMesh(format!(
                            "cells {c1} and {c2} traverse edge {key:?} in the same direction"
                        )));
                    }
                }
                _ => {
                    return Err(VemError::InvalidMesh(format!(
                        "edge {key:?} is shared by {} cells",
                        occ.len()
                    )))
                }
            }
        }
        Ok(boundary)
    }

    fn normalize_boundary(&mut self, topological: Vec<(usize, usize)>) -> Result<()> {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, &(a, b)) in topological.iter().enumerate() {
            index.insert((a.min(b), a.max(b)), i);
        }
        let mut seen = vec![false; topological.len()];
        for e in &mut self.boundary_edges {
            let key = (e.a.min(e.b), e.a.max(e.b));
            let Some(&i) = index.get(&key) else {
                return Err(VemError::InvalidMesh(format!(
                    "boundary edge ({}, {}) is not on the topological boundary",
                    e.a, e.b
                )));
            };
            if seen[i] {
                return Err(VemError::InvalidMesh(format!(
                    "boundary edge ({}, {}) is listed twice",
                    e.a, e.b
                )));
            }
            seen[i] = true;
            (e.a, e.b) = topological[i];
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            let (a, b) = topological[i];
            return Err(VemError::InvalidMesh(format!(
                "topological boundary edge ({a}, {b}) carries no marker"
            )));
        }
        Ok(())
    }

    fn check_vertex_separation(&self) -> Result<()> {
        let tol = VERTEX_MERGE_TOL * self.domain_diameter().max(f64::MIN_POSITIVE);
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by(|&i, &j| self.vertices[i].x.total_cmp(&self.vertices[j].x));
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if self.vertices[j].x - self.vertices[i].x > tol {
                    break;
                }
                if (self.vertices[j] - self.vertices[i]).norm() <= tol {
                    return Err(VemError::InvalidMesh(format!("vertices {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }
}
