use log::warn;
use nalgebra::{Matrix3, Vector2};

use super::boundary::BoundarySpec;
use crate::error::{Result, VemError};
use crate::mesh::{BoundaryMarker, PolygonalMesh};

/// Two unit tangents closer than this (in |sin|) are treated as the same line.
const PARALLEL_TOL: f64 = 1e-8;

/// Constraint on the three dofs `(v, ∂x v, ∂y v)` of one vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VertexConstraint {
    Free,
    Fixed,
    /// Value fixed; the gradient is expressed in the frame `(t, n)` and its
    /// tangential component is fixed, leaving `∂n v` free.
    Rotated {
        tangent: Vector2<f64>,
    },
}

impl VertexConstraint {
    /// Columns express the vertex's reduced coordinates in logical dofs:
    /// `logical = frame * reduced`.
    pub fn frame(&self) -> Matrix3<f64> {
        match self {
            VertexConstraint::Rotated { tangent: t } => {
                let n = Vector2::new(t.y, -t.x);
                Matrix3::new(1.0, 0.0, 0.0, 0.0, t.x, n.x, 0.0, t.y, n.y)
            }
            _ => Matrix3::identity(),
        }
    }
}

/// Numbering of the free reduced dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    constraints: Vec<VertexConstraint>,
    /// Global index of each reduced slot, `None` when fixed.
    slots: Vec<[Option<usize>; 3]>,
    n_free: usize,
}

impl DofMap {
    pub fn build(mesh: &PolygonalMesh, spec: &BoundarySpec) -> Result<Self> {
        if spec.markers().len() != mesh.boundary_edges().len() {
            return Err(VemError::InvalidArgument(
                "boundary spec does not match the mesh".into(),
            ));
        }
        let nv = mesh.n_vertices();
        let mut clamped = vec![false; nv];
        let mut tangents: Vec<Vec<Vector2<f64>>> = vec![Vec::new(); nv];
        for (e, marker) in mesh.boundary_edges().iter().zip(spec.markers()) {
            match marker {
                BoundaryMarker::Clamped => {
                    clamped[e.a] = true;
                    clamped[e.b] = true;
                }
                BoundaryMarker::SimplySupported => {
                    let t = (mesh.vertices()[e.b] - mesh.vertices()[e.a]).normalize();
                    for v in [e.a, e.b] {
                        if !tangents[v].iter().any(|s| (s.x * t.y - s.y * t.x).abs() < PARALLEL_TOL) {
                            tangents[v].push(t);
                        }
                    }
                }
                BoundaryMarker::Free => {}
            }
        }

        let mut constraints = Vec::with_capacity(nv);
        for v in 0..nv {
            let c = if clamped[v] {
                VertexConstraint::Fixed
            } else {
                match tangents[v].as_slice() {
                    [] => VertexConstraint::Free,
                    [t] => VertexConstraint::Rotated { tangent: *t },
                    [_, _] => VertexConstraint::Fixed,
                    many => {
                        warn!(
                            "vertex {v}: {} distinct simply-supported tangents; fixing the whole gradient",
                            many.len()
                        );
                        VertexConstraint::Fixed
                    }
                }
            };
            constraints.push(c);
        }

        let mut n_free = 0;
        let mut next = || {
            n_free += 1;
            Some(n_free - 1)
        };
        let slots = constraints
            .iter()
            .map(|c| match c {
                VertexConstraint::Free => [next(), next(), next()],
                VertexConstraint::Fixed => [None, None, None],
                VertexConstraint::Rotated { .. } => [None, None, next()],
            })
            .collect();
        Ok(DofMap {
            constraints,
            slots,
            n_free,
        })
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_vertices(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraint(&self, vertex: usize) -> VertexConstraint {
        self.constraints[vertex]
    }

    pub fn constraints(&self) -> &[VertexConstraint] {
        &self.constraints
    }

    pub fn slots(&self, vertex: usize) -> [Option<usize>; 3] {
        self.slots[vertex]
    }

    pub fn n_fixed_vertices(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| **c == VertexConstraint::Fixed)
            .count()
    }

    /// Logical dofs (3 per vertex, Cartesian gradients) of a free-dof vector.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        assert_eq!(free.len(), self.n_free);
        let mut out = vec![0.0; 3 * self.n_vertices()];
        for (v, (c, slots)) in self.constraints.iter().zip(&self.slots).enumerate() {
            let reduced = nalgebra::Vector3::from_fn(|k, _| slots[k].map_or(0.0, |g| free[g]));
            let logical = c.frame() * reduced;
            out[3 * v..3 * v + 3].copy_from_slice(logical.as_slice());
        }
        out
    }

    /// Free-dof components of a logical dof vector (constrained parts dropped).
    pub fn restrict(&self, logical: &[f64]) -> Vec<f64> {
        assert_eq!(logical.len(), 3 * self.n_vertices());
        let mut out = vec![0.0; self.n_free];
        for (v, (c, slots)) in self.constraints.iter().zip(&self.slots).enumerate() {
            let reduced = c.frame().transpose() * nalgebra::Vector3::from_column_slice(&logical[3 * v..3 * v + 3]);
            for k in 0..3 {
                if let Some(g) = slots[k] {
                    out[g] = reduced[k];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::BoundaryAssignment;
    use crate::mesh::{generate_rectangular, generate_triangular, Domain};

    fn map(n: usize, marker: BoundaryMarker) -> DofMap {
        let mesh = generate_rectangular(n).unwrap();
        DofMap::build(&mesh, &BoundarySpec::uniform(&mesh, marker)).unwrap()
    }

    #[test]
    fn clamped_counts() {
        assert_eq!(map(4, BoundaryMarker::Clamped).n_free(), 27);
        assert_eq!(map(8, BoundaryMarker::Clamped).n_free(), 147);
        assert_eq!(map(1, BoundaryMarker::Clamped).n_free(), 0);
        assert_eq!(map(2, BoundaryMarker::Clamped).n_free(), 3);
    }

    #[test]
    fn simply_supported_counts() {
        let m = map(4, BoundaryMarker::SimplySupported);
        assert_eq!(m.n_free(), 27 + 12);
        // corners fully fixed
        assert_eq!(m.n_fixed_vertices(), 4);
    }

    #[test]
    fn free_boundary_keeps_everything() {
        let m = map(3, BoundaryMarker::Free);
        assert_eq!(m.n_free(), 3 * 16);
    }

    #[test]
    fn rotated_vertex_keeps_normal_derivative() {
        let mesh = generate_rectangular(2).unwrap();
        let m = DofMap::build(&mesh, &BoundarySpec::uniform(&mesh, BoundaryMarker::SimplySupported)).unwrap();
        // midpoint of the bottom side
        let v = mesh
            .vertices()
            .iter()
            .position(|p| (p.x - 0.5).abs() < 1e-12 && p.y.abs() < 1e-12)
            .unwrap();
        let VertexConstraint::Rotated { tangent } = m.constraint(v) else {
            panic!("expected a rotated vertex");
        };
        assert!(tangent.y.abs() < 1e-14 && (tangent.x.abs() - 1.0).abs() < 1e-14);
        let g = m.slots(v)[2].unwrap();
        let mut free = vec![0.0; m.n_free()];
        free[g] = 1.0;
        let logical = m.expand(&free);
        // ∂n v along the outward/inward normal: pure ∂y
        assert_eq!(logical[3 * v], 0.0);
        assert!(logical[3 * v + 1].abs() < 1e-14);
        assert!((logical[3 * v + 2].abs() - 1.0).abs() < 1e-14);
        assert_eq!(m.restrict(&logical), free);
    }

    #[test]
    fn lshape_partition_is_union_of_edge_rules() {
        let mesh = generate_triangular(Domain::LShape, 4).unwrap();
        let spec = BoundaryAssignment::LShapeDefault.resolve(&mesh).unwrap();
        let m = DofMap::build(&mesh, &spec).unwrap();
        for (v, p) in mesh.vertices().iter().enumerate() {
            let on_outer = p.x.abs() < 1e-12
                || p.y.abs() < 1e-12
                || ((p.x - 1.0).abs() < 1e-12 && p.y <= 0.5 + 1e-12)
                || ((p.y - 1.0).abs() < 1e-12 && p.x <= 0.5 + 1e-12);
            let expected = if on_outer {
                VertexConstraint::Fixed
            } else {
                VertexConstraint::Free
            };
            assert_eq!(m.constraint(v), expected, "vertex {v} at {p}");
        }
    }
}
