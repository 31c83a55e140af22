use nalgebra::Point2;

use crate::mesh::CellGeometry;

/// Symmetric 6-point rule on a triangle, exact for degree 4:
/// (barycentric coordinates, weight relative to the triangle area).
const DEGREE4_RULE: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.108_103_018_168_070_23;
    const B1: f64 = 0.445_948_490_915_964_9;
    const W1: f64 = 0.223_381_589_678_011_47;
    const A2: f64 = 0.816_847_572_980_458_5;
    const B2: f64 = 0.091_576_213_509_770_74;
    const W2: f64 = 0.109_951_743_655_321_87;
    [
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

pub type Triangle = [Point2<f64>; 3];

fn tri_area(t: &Triangle) -> f64 {
    0.5 * ((t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (t[1].y - t[0].y))
}

/// Sub-triangles covering the cell: the centroid fan when the centroid sees
/// every edge, otherwise an ear-clipping triangulation.
pub fn triangulate(geom: &CellGeometry) -> Vec<Triangle> {
    let n = geom.n_vertices();
    let fan: Vec<Triangle> = (0..n)
        .map(|i| [geom.centroid, geom.vertices[i], geom.vertices[(i + 1) % n]])
        .collect();
    let tol = 1e-14 * geom.diameter * geom.diameter;
    if fan.iter().all(|t| tri_area(t) > tol) {
        fan
    } else {
        ear_clip(&geom.vertices)
    }
}

/// Ear clipping of a simple CCW polygon.
pub fn ear_clip(pts: &[Point2<f64>]) -> Vec<Triangle> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut out = Vec::with_capacity(pts.len().saturating_sub(2));
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&k| {
            let (a, b, c) = (pts[idx[(k + m - 1) % m]], pts[idx[k]], pts[idx[(k + 1) % m]]);
            if tri_area(&[a, b, c]) <= 0.0 {
                return false;
            }
            idx.iter().all(|&j| {
                let p = pts[j];
                if p == a || p == b || p == c {
                    return true;
                }
                // no other vertex may touch the closed triangle abc
                let d1 = tri_area(&[a, b, p]);
                let d2 = tri_area(&[b, c, p]);
                let d3 = tri_area(&[c, a, p]);
                !(d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0)
            })
        });
        // a simple polygon always has an ear; fall back to the first vertex on
        // numerically degenerate input
        let k = ear.unwrap_or(0);
        out.push([pts[idx[(k + m - 1) % m]], pts[idx[k]], pts[idx[(k + 1) % m]]]);
        idx.remove(k);
    }
    out.push([pts[idx[0]], pts[idx[1]], pts[idx[2]]]);
    out
}

/// Quadrature nodes and weights on the cell, exact for polynomials of degree 4.
pub fn cell_rule(geom: &CellGeometry) -> Vec<(Point2<f64>, f64)> {
    let mut out = Vec::new();
    for t in triangulate(geom) {
        let area = tri_area(&t);
        for (l, w) in DEGREE4_RULE {
            let p = Point2::from(t[0].coords * l[0] + t[1].coords * l[1] + t[2].coords * l[2]);
            out.push((p, w * area));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_one() {
        let s: f64 = DEGREE4_RULE.iter().map(|r| r.1).sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_on_reference_triangle_monomials() {
        // ∫_T x^a y^b over the unit right triangle = a! b! / (a+b+2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let t: Triangle = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let q: f64 = DEGREE4_RULE
                    .iter()
                    .map(|(l, w)| {
                        let p = t[0].coords * l[0] + t[1].coords * l[1] + t[2].coords * l[2];
                        w * 0.5 * p.x.powi(a as i32) * p.y.powi(b as i32)
                    })
                    .sum();
                assert_relative_eq!(q, fact(a) * fact(b) / fact(a + b + 2), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ear_clipping_covers_nonconvex_polygon() {
        let l = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        let tris = ear_clip(&l);
        assert_eq!(tris.len(), 4);
        assert!(tris.iter().all(|t| tri_area(t) > 0.0));
        assert_relative_eq!(tris.iter().map(tri_area).sum::<f64>(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn fan_falls_back_when_centroid_is_hidden() {
        // thin C-shape whose centroid lies outside the cell
        let c = vec![
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 0.0),
            Point2::new(3.0, 0.2),
            Point2::new(0.2, 0.2),
            Point2::new(0.2, 2.8),
            Point2::new(3.0, 2.8),
            Point2::new(3.0, 3.0),
            Point2::new(0.0, 3.0),
        ];
        let g = CellGeometry::from_vertices(&c);
        let tris = triangulate(&g);
        assert!(tris.iter().all(|t| tri_area(t) > 0.0));
        assert_relative_eq!(tris.iter().map(tri_area).sum::<f64>(), g.area, epsilon = 1e-13);
    }
}
