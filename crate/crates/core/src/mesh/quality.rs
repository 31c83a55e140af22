use nalgebra::{Matrix3, Point2, Vector3};
use serde::Serialize;

use super::geometry::{cross, CellGeometry};
use super::PolygonalMesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellQuality {
    /// Shortest edge over `h_K`.
    pub edge_ratio: f64,
    /// Radius of the largest ball inside the polygon kernel, over `h_K`.
    pub ball_ratio: f64,
    pub a1: bool,
    pub a2: bool,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshQualityReport {
    pub c_t: f64,
    pub h: f64,
    pub cells: Vec<CellQuality>,
    pub passed: bool,
}

impl MeshQualityReport {
    pub fn min_edge_ratio(&self) -> f64 {
        self.cells.iter().map(|c| c.edge_ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn min_ball_ratio(&self) -> f64 {
        self.cells.iter().map(|c| c.ball_ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn failing_cells(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.passes)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Kernel of a simple CCW polygon: the points from which the whole polygon is
/// visible, as a convex CCW polygon (empty when the kernel is empty).
pub fn polygon_kernel(pts: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let mut poly = vec![
        Point2::new(lo.x, lo.y),
        Point2::new(hi.x, lo.y),
        Point2::new(hi.x, hi.y),
        Point2::new(lo.x, hi.y),
    ];
    let scale = (hi - lo).norm();
    let eps = 1e-14 * scale;
    let n = pts.len();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let dir = (b - a) / (b - a).norm();
        let side = |p: &Point2<f64>| cross(dir, p - a);
        let mut next = Vec::with_capacity(poly.len() + 1);
        for k in 0..poly.len() {
            let p = poly[k];
            let q = poly[(k + 1) % poly.len()];
            let (sp, sq) = (side(&p), side(&q));
            if sp >= -eps {
                next.push(p);
            }
            if (sp > eps && sq < -eps) || (sp < -eps && sq > eps) {
                let t = sp / (sp - sq);
                next.push(p + (q - p) * t);
            }
        }
        next.dedup_by(|x, y| (*x - *y).norm() <= eps);
        while next.len() > 1 && (next[0] - next[next.len() - 1]).norm() <= eps {
            next.pop();
        }
        poly = next;
        if poly.len() < 3 {
            return Vec::new();
        }
    }
    poly
}

/// Radius of the largest disc contained in a convex CCW polygon.
fn inscribed_radius(poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    // constraint rows: n_i . c + r <= n_i . a_i
    let rows: Vec<(f64, f64, f64)> = (0..n)
        .filter_map(|i| {
            let d = poly[(i + 1) % n] - poly[i];
            let len = d.norm();
            (len > 0.0).then(|| {
                let (nx, ny) = (d.y / len, -d.x / len);
                (nx, ny, nx * poly[i].x + ny * poly[i].y)
            })
        })
        .collect();
    let scale = rows.iter().map(|r| r.2.abs()).fold(1.0, f64::max);
    let mut best: f64 = 0.0;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            for k in j + 1..rows.len() {
                let m = Matrix3::new(
                    rows[i].0, rows[i].1, 1.0, rows[j].0, rows[j].1, 1.0, rows[k].0, rows[k].1, 1.0,
                );
                let rhs = Vector3::new(rows[i].2, rows[j].2, rows[k].2);
                let Some(sol) = m.lu().solve(&rhs) else { continue };
                let r = sol[2];
                if !r.is_finite() || r <= best {
                    continue;
                }
                let feasible = rows
                    .iter()
                    .all(|&(nx, ny, b)| nx * sol[0] + ny * sol[1] + r <= b + 1e-12 * scale);
                if feasible {
                    best = r;
                }
            }
        }
    }
    best
}

pub fn cell_quality(geom: &CellGeometry, c_t: f64) -> CellQuality {
    let edge_ratio = geom.shortest_edge() / geom.diameter;
    let kernel = polygon_kernel(&geom.vertices);
    let ball_ratio = inscribed_radius(&kernel) / geom.diameter;
    let a1 = edge_ratio >= c_t;
    let a2 = ball_ratio >= c_t;
    CellQuality {
        edge_ratio,
        ball_ratio,
        a1,
        a2,
        passes: a1 && a2,
    }
}

/// Shape-regularity check: shortest-edge ratio and kernel ball ratio per cell.
pub fn check_assumptions(mesh: &PolygonalMesh, c_t: f64) -> MeshQualityReport {
    let cells: Vec<CellQuality> = (0..mesh.n_cells())
        .map(|c| cell_quality(&mesh.cell_geometry(c), c_t))
        .collect();
    MeshQualityReport {
        c_t,
        h: mesh.h(),
        passed: cells.iter().all(|c| c.passes),
        cells,
    }
}

/// `h_P` for each vertex: the largest diameter among the cells containing it.
pub fn vertex_patch_diameters(mesh: &PolygonalMesh) -> Vec<f64> {
    let mut out = vec![0.0f64; mesh.n_vertices()];
    for c in 0..mesh.n_cells() {
        let h = mesh.cell_geometry(c).diameter;
        for &v in &mesh.cells()[c] {
            out[v] = out[v].max(h);
        }
    }
    out
}
