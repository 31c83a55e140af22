use nalgebra::{Point2, Vector2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometry {
    pub length: f64,
    /// Unit tangent along the CCW traversal.
    pub tangent: Vector2<f64>,
    /// Unit outward normal (tangent rotated clockwise).
    pub normal: Vector2<f64>,
}

/// Geometric data of one polygon; edge `i` runs from vertex `i` to vertex `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub vertices: Vec<Point2<f64>>,
    pub centroid: Point2<f64>,
    pub diameter: f64,
    pub area: f64,
    pub edges: Vec<EdgeGeometry>,
}

impl CellGeometry {
    pub fn from_vertices(vertices: &[Point2<f64>]) -> Self {
        let n = vertices.len();
        let mut area2 = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut edges = Vec::with_capacity(n);
        for i in 0..n {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            let cross = p.x * q.y - q.x * p.y;
            area2 += cross;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
            let d = q - p;
            let length = d.norm();
            let tangent = d / length;
            edges.push(EdgeGeometry {
                length,
                tangent,
                normal: Vector2::new(tangent.y, -tangent.x),
            });
        }
        let area = 0.5 * area2;
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                diameter = diameter.max((vertices[i] - vertices[j]).norm());
            }
        }
        CellGeometry {
            vertices: vertices.to_vec(),
            centroid: Point2::new(cx / (6.0 * area), cy / (6.0 * area)),
            diameter,
            area,
            edges,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn shortest_edge(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn signed_area(pts: &[Point2<f64>]) -> f64 {
    let n = pts.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    0.5 * a
}

pub(crate) fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn segments_intersect(p1: Point2<f64>, p2: Point2<f64>, q1: Point2<f64>, q2: Point2<f64>) -> bool {
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point2<f64>, b: Point2<f64>, p: Point2<f64>, d: f64| {
        d == 0.0 && p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    };
    on(p1, p2, q1, d1) || on(p1, p2, q2, d2) || on(q1, q2, p1, d3) || on(q1, q2, p2, d4)
}

/// True when no two non-adjacent edges touch.
pub(crate) fn is_simple(pts: &[Point2<f64>]) -> bool {
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// True when every interior angle turns left (collinear vertices rejected).
pub(crate) fn is_strictly_convex(pts: &[Point2<f64>]) -> bool {
    let n = pts.len();
    (0..n).all(|i| {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        cross(b - a, c - b) > 0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_geometry() {
        let g = CellGeometry::from_vertices(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]);
        assert_relative_eq!(g.area, 1.0);
        assert_relative_eq!(g.diameter, 2f64.sqrt());
        assert_relative_eq!(g.centroid, Point2::new(0.5, 0.5));
        assert_relative_eq!(g.edges[0].normal, Vector2::new(0.0, -1.0));
        assert_relative_eq!(g.edges[1].normal, Vector2::new(1.0, 0.0));
    }

    #[test]
    fn closed_polygon_normals_sum_to_zero() {
        let pts: Vec<_> = (0..7)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 7.0;
                Point2::new((1.0 + 0.3 * (3.0 * t).sin()) * t.cos(), t.sin())
            })
            .collect();
        let g = CellGeometry::from_vertices(&pts);
        let s: Vector2<f64> = g.edges.iter().map(|e| e.normal * e.length).sum();
        assert!(s.norm() < 1e-14);
    }

    #[test]
    fn convexity() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(is_strictly_convex(&sq));
        let dart = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(0.0, 1.0),
            Point2::new(0.3, 0.5),
        ];
        assert!(!is_strictly_convex(&dart));
        assert!(is_simple(&dart));
    }
}
