use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector, Point2, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::testing::{random_convex_polygon, random_star_polygon};

fn unit_square() -> CellGeometry {
    CellGeometry::from_vertices(&[
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
    ])
}

fn build(geom: &CellGeometry) -> LocalElementMatrices {
    let hp = vec![geom.diameter; geom.n_vertices()];
    LocalElementMatrices::build(0, geom, &hp, &StabilizationOptions::default()).unwrap()
}

fn random_cells(seed: u64, count: usize) -> Vec<CellGeometry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let pts = if k % 2 == 0 {
                let n = rng.random_range(3..=8);
                random_convex_polygon(&mut rng, n)
            } else {
                let c = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                let scale = rng.random_range(0.01..2.0);
                random_star_polygon(&mut rng, c, scale)
            };
            CellGeometry::from_vertices(&pts)
        })
        .collect()
}

fn rel_norm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Independent quadrature: collapsed Gauss-Legendre on triangles fanned from
/// vertex 0 (valid for convex cells).
mod oracle {
    use nalgebra::Point2;

    const GL_X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683_1,
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_664,
    ];
    const GL_W: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];

    pub fn integrate(pts: &[Point2<f64>], f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut total = 0.0;
        for i in 1..pts.len() - 1 {
            let (a, b, c) = (pts[0], pts[i], pts[i + 1]);
            let jac = ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs();
            for (u_node, wu) in GL_X.iter().zip(GL_W) {
                for (v_node, wv) in GL_X.iter().zip(GL_W) {
                    let u = 0.5 * (u_node + 1.0);
                    let v = 0.5 * (v_node + 1.0) * (1.0 - u);
                    let x = a.x + u * (b.x - a.x) + v * (c.x - a.x);
                    let y = a.y + u * (b.y - a.y) + v * (c.y - a.y);
                    total += 0.25 * wu * wv * (1.0 - u) * jac * f(x, y);
                }
            }
        }
        total
    }

    /// `m_α` written out directly from its definition.
    pub fn monomial(alpha: usize, x: f64, y: f64, cx: f64, cy: f64, h: f64) -> f64 {
        let (xi, eta) = ((x - cx) / h, (y - cy) / h);
        match alpha {
            0 => 1.0,
            1 => xi,
            2 => eta,
            3 => xi * xi,
            4 => xi * eta,
            _ => eta * eta,
        }
    }

    /// Second derivatives `(m_xx, m_xy, m_yy)` by central differences.
    pub fn hessian_fd(alpha: usize, x: f64, y: f64, cx: f64, cy: f64, h: f64) -> [f64; 3] {
        let e = 1e-3 * h;
        let f = |dx: f64, dy: f64| monomial(alpha, x + dx, y + dy, cx, cy, h);
        [
            (f(e, 0.0) - 2.0 * f(0.0, 0.0) + f(-e, 0.0)) / (e * e),
            (f(e, e) - f(e, -e) - f(-e, e) + f(-e, -e)) / (4.0 * e * e),
            (f(0.0, e) - 2.0 * f(0.0, 0.0) + f(0.0, -e)) / (e * e),
        ]
    }
}

#[test]
fn d_columns() {
    let g = unit_square();
    let basis = basis_for(&g);
    let d = compute_d(&g, &basis);
    for i in 0..4 {
        assert_eq!(d[(3 * i, 0)], 1.0);
        assert_eq!(d[(3 * i + 1, 0)], 0.0);
        assert_eq!(d[(3 * i + 2, 0)], 0.0);
        let p = g.vertices[i];
        assert_relative_eq!(d[(3 * i, 1)], (p.x - 0.5) / 2f64.sqrt(), epsilon = 1e-15);
    }
    // every column against direct evaluation at the vertices
    let h = 2f64.sqrt();
    for i in 0..4 {
        let p = g.vertices[i];
        for a in 0..6 {
            assert_relative_eq!(
                d[(3 * i, a)],
                oracle::monomial(a, p.x, p.y, 0.5, 0.5, h),
                epsilon = 1e-15
            );
            let e = 1e-6;
            let gx = (oracle::monomial(a, p.x + e, p.y, 0.5, 0.5, h) - oracle::monomial(a, p.x - e, p.y, 0.5, 0.5, h))
                / (2.0 * e);
            let gy = (oracle::monomial(a, p.x, p.y + e, 0.5, 0.5, h) - oracle::monomial(a, p.x, p.y - e, 0.5, 0.5, h))
                / (2.0 * e);
            assert_relative_eq!(d[(3 * i + 1, a)], gx, epsilon = 1e-9);
            assert_relative_eq!(d[(3 * i + 2, a)], gy, epsilon = 1e-9);
        }
    }
}

#[test]
fn energy_gram_on_unit_square() {
    let g = unit_square();
    let ga = compute_energy_gram(&g, &basis_for(&g));
    assert_relative_eq!(ga[(3, 3)], 1.0, epsilon = 1e-14);
    assert_eq!(ga[(3, 5)], 0.0);
    assert_eq!(ga[(3, 4)], 0.0);
    assert_relative_eq!(ga[(4, 4)], 0.5, epsilon = 1e-14);
}

#[test]
fn energy_gram_matches_quadrature_on_pentagons() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let pts = random_convex_polygon(&mut rng, 5);
        let g = CellGeometry::from_vertices(&pts);
        let gt = compute_g_tilde(&g, &basis_for(&g));
        let (cx, cy, h) = (g.centroid.x, g.centroid.y, g.diameter);
        for a in 3..6 {
            for b in 3..6 {
                let q = oracle::integrate(&pts, |x, y| {
                    let ha = oracle::hessian_fd(a, x, y, cx, cy, h);
                    let hb = oracle::hessian_fd(b, x, y, cx, cy, h);
                    ha[0] * hb[0] + 2.0 * ha[1] * hb[1] + ha[2] * hb[2]
                });
                assert_relative_eq!(gt[(a, b)], q, epsilon = 1e-6 * gt[(3, 3)]);
            }
        }
        // the quadrature oracle is exact once the Hessians are written in closed form
        let exact = oracle::integrate(&pts, |_, _| 4.0 / h.powi(4));
        assert_relative_eq!(gt[(3, 3)], exact, max_relative = 1e-12);
    }
}

#[test]
fn b_tilde_constant_row() {
    let g = unit_square();
    let b = compute_b_tilde(&g, &basis_for(&g));
    for i in 0..4 {
        assert_eq!(b[(0, 3 * i)], 1.0);
        assert_eq!(b[(0, 3 * i + 1)], 0.0);
        assert_eq!(b[(0, 3 * i + 2)], 0.0);
    }
    let d = compute_d(&g, &basis_for(&g));
    let first_monomial = d.column(0).into_owned();
    for a in 3..6 {
        // a_K(1, q) = 0
        assert!((b.row(a) * &first_monomial)[0].abs() < 1e-14);
    }
}

#[test]
fn b_tilde_d_reproduces_g_tilde() {
    for g in random_cells(1, 100) {
        let basis = basis_for(&g);
        let gt = compute_g_tilde(&g, &basis);
        let bd = compute_b_tilde(&g, &basis) * compute_d(&g, &basis);
        let gt = DMatrix::from_iterator(6, 6, gt.iter().copied());
        assert!(rel_norm(&bd, &gt) < 1e-10, "{}", rel_norm(&bd, &gt));
    }
}

#[test]
fn h_matrix() {
    let g = unit_square();
    let h = compute_h(&g, &basis_for(&g));
    assert_relative_eq!(h[(0, 0)], 1.0, epsilon = 1e-14);
    assert_relative_eq!(h[(0, 3)], 1.0 / 24.0, epsilon = 1e-15);
    for g in random_cells(2, 50) {
        let h = compute_h(&g, &basis_for(&g));
        assert_relative_eq!(h[(0, 0)], g.area, max_relative = 1e-13);
        assert_eq!(h, h.transpose());
        assert!(h.cholesky().is_some());
    }
}

#[test]
fn h_matches_independent_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 3..=8 {
        let pts = random_convex_polygon(&mut rng, n);
        let g = CellGeometry::from_vertices(&pts);
        let h = compute_h(&g, &basis_for(&g));
        for a in 0..6 {
            for b in 0..6 {
                let q = oracle::integrate(&pts, |x, y| {
                    oracle::monomial(a, x, y, g.centroid.x, g.centroid.y, g.diameter)
                        * oracle::monomial(b, x, y, g.centroid.x, g.centroid.y, g.diameter)
                });
                assert_relative_eq!(h[(a, b)], q, epsilon = 1e-12 * g.area);
            }
        }
    }
}

#[test]
fn projector_reproduces_polynomials() {
    for g in random_cells(3, 100) {
        let m = build(&g);
        let pd = &m.pi_star * &m.d;
        assert!((pd - DMatrix::<f64>::identity(6, 6)).norm() < 1e-10);
    }
    let m = build(&unit_square());
    let coeffs = &m.pi_star * m.d.column(4);
    assert_relative_eq!(
        coeffs,
        DVector::from_column_slice(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        epsilon = 1e-12
    );
}

#[test]
fn projector_satisfies_both_defining_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for g in random_cells(4, 40) {
        let m = build(&g);
        let n = m.n_dofs();
        let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let c = &m.pi_star * &u;
        // energy equations: a_K(Πu, q) = a_K(u, q) for q in {ξ², ξη, η²}
        let ga = DMatrix::from_iterator(6, 6, m.g_energy.iter().copied());
        let lhs = &ga * &c;
        let rhs = &m.b_tilde * &u;
        for a in 3..6 {
            assert!((lhs[a] - rhs[a]).abs() <= 1e-10 * rhs.norm().max(lhs.norm()));
        }
        // vertex pairing on P1
        for a in 0..3 {
            let mut left = 0.0;
            let mut right = 0.0;
            for (i, p) in g.vertices.iter().enumerate() {
                let q = m.basis.eval(a, p);
                left += m.projection_at(u.as_slice(), p) * q;
                right += u[3 * i] * q;
            }
            assert!((left - right).abs() <= 1e-10 * right.abs().max(1.0));
        }
    }
}

#[test]
fn stabilizations_vanish_on_polynomials() {
    for g in random_cells(6, 100) {
        let m = build(&g);
        let r = non_polynomial_part(&m.d, &m.pi_star);
        assert!((&r * &m.d).norm() < 1e-10);
        // consistency: K_loc D = K_c D, i.e. a_h(p, v) = a_K(p, v)
        let ga = DMatrix::from_iterator(6, 6, m.g_energy.iter().copied());
        let kc_d = m.pi_star.transpose() * &ga;
        let kd = &m.k_loc * &m.d;
        assert!(rel_norm(&kd, &kc_d) < 1e-9 || kc_d.norm() < 1e-12);
    }
}

#[test]
fn stiffness_is_psd_with_p1_kernel() {
    for g in random_cells(7, 60) {
        let m = build(&g);
        assert_eq!(m.k_loc, m.k_loc.transpose());
        let eig = SymmetricEigen::new(m.k_loc.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let scale = m.k_loc.trace();
        assert!(ev[0] > -1e-10 * scale);
        assert!(ev[2].abs() < 1e-10 * scale, "{:?}", &ev[..4]);
        assert!(ev[3] > 1e-8 * scale, "{:?}", &ev[..4]);
        // P1 dof vectors are in the kernel
        for a in 0..3 {
            assert!((&m.k_loc * m.d.column(a)).norm() < 1e-10 * scale);
        }
    }
}

#[test]
fn rayleigh_quotients_are_bounded() {
    // a_h against the dof norm h_K^-2 Σ (v² + h_P² |∇v|²) on the complement of P1;
    // the ratio must stay in a fixed band across shapes and sizes
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for g in random_cells(8, 60) {
        let m = build(&g);
        let n = m.n_dofs();
        let p1 = m.d.columns(0, 3).into_owned();
        let proj = DMatrix::identity(n, n) - &p1 * (p1.transpose() * &p1).try_inverse().unwrap() * p1.transpose();
        let h2 = g.diameter * g.diameter;
        for _ in 0..20 {
            let x = &proj * DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let a = (x.transpose() * &m.k_loc * &x)[0];
            let norm: f64 = (0..g.n_vertices())
                .map(|i| (x[3 * i].powi(2) + h2 * (x[3 * i + 1].powi(2) + x[3 * i + 2].powi(2))) / h2)
                .sum();
            let r = a / norm;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    assert!(lo > 1e-4, "lower {lo}");
    assert!(hi / lo < 1e5, "band {lo}..{hi}");
}

#[test]
fn mass_consistency_and_definiteness() {
    for g in random_cells(9, 60) {
        let m = build(&g);
        assert_eq!(m.m_loc, m.m_loc.transpose());
        let one = m.d.column(0).into_owned();
        assert_relative_eq!((one.transpose() * &m.m_loc * &one)[0], g.area, max_relative = 1e-12);
        assert!(m.m_loc.clone().cholesky().is_some());
    }
}

#[test]
fn mass_against_polynomial_matches_projection_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for n in 3..=7 {
        let pts = random_convex_polygon(&mut rng, n);
        let g = CellGeometry::from_vertices(&pts);
        let m = build(&g);
        let v = DVector::from_fn(m.n_dofs(), |_, _| rng.random_range(-1.0..1.0));
        let coeff = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let p_dofs = &m.d * &coeff;
        let bh = (p_dofs.transpose() * &m.m_loc * &v)[0];
        let pv = &m.pi_star * &v;
        let exact = oracle::integrate(&pts, |x, y| {
            let (cx, cy, h) = (g.centroid.x, g.centroid.y, g.diameter);
            let p: f64 = (0..6).map(|a| coeff[a] * oracle::monomial(a, x, y, cx, cy, h)).sum();
            let q: f64 = (0..6).map(|a| pv[a] * oracle::monomial(a, x, y, cx, cy, h)).sum();
            p * q
        });
        assert_relative_eq!(bh, exact, epsilon = 1e-12 * g.area.max(bh.abs()));
    }
}

#[test]
fn sigma_rules() {
    let g = unit_square();
    let hp = vec![g.diameter; 4];
    let trace = LocalElementMatrices::build(0, &g, &hp, &StabilizationOptions::default()).unwrap();
    let excl = LocalElementMatrices::build(
        0,
        &g,
        &hp,
        &StabilizationOptions {
            sigma_rule: SigmaRule::TraceExcludingKernel,
            ..Default::default()
        },
    )
    .unwrap();
    assert_relative_eq!(excl.sigma / trace.sigma, 12.0 / 9.0, epsilon = 1e-14);
    assert_relative_eq!(
        trace.sigma0,
        (&trace.pi_star.transpose() * DMatrix::from_iterator(6, 6, trace.h.iter().copied()) * &trace.pi_star).trace()
            / 12.0,
        epsilon = 1e-15
    );
}

fn permute_dofs(m: &DMatrix<f64>, shift: usize, nv: usize) -> DMatrix<f64> {
    let map = |k: usize| 3 * ((k / 3 + shift) % nv) + k % 3;
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(map(i), map(j))])
}

#[test]
fn cyclic_relabeling_permutes_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 3..=8 {
        let pts = random_convex_polygon(&mut rng, n);
        let base = build(&CellGeometry::from_vertices(&pts));
        let mut rotated = pts.clone();
        rotated.rotate_left(2 % n);
        let rot = build(&CellGeometry::from_vertices(&rotated));
        let k_perm = permute_dofs(&base.k_loc, 2 % n, n);
        let m_perm = permute_dofs(&base.m_loc, 2 % n, n);
        assert!(rel_norm(&rot.k_loc, &k_perm) < 1e-12);
        assert!(rel_norm(&rot.m_loc, &m_perm) < 1e-12);
    }
}

#[test]
fn translation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pts = random_convex_polygon(&mut rng, 6);
    let shifted: Vec<_> = pts.iter().map(|p| p + Vector2::new(7.25, -3.5)).collect();
    let a = build(&CellGeometry::from_vertices(&pts));
    let b = build(&CellGeometry::from_vertices(&shifted));
    assert!(rel_norm(&a.k_loc, &b.k_loc) < 1e-11);
    assert!(rel_norm(&a.m_loc, &b.m_loc) < 1e-11);
}

#[test]
fn projected_stiffness_scales_with_cell_size() {
    // a_K(Πu, Πv) is homogeneous: value-value c^-2, value-gradient c^-1, gradient-gradient c^0
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let pts = random_convex_polygon(&mut rng, 5);
    let c = 0.125;
    let scaled: Vec<_> = pts.iter().map(|p| Point2::from(p.coords * c)).collect();
    let a = build(&CellGeometry::from_vertices(&pts));
    let b = build(&CellGeometry::from_vertices(&scaled));
    let kc = |m: &LocalElementMatrices| {
        let ga = DMatrix::from_iterator(6, 6, m.g_energy.iter().copied());
        m.pi_star.transpose() * ga * &m.pi_star
    };
    let (ka, kb) = (kc(&a), kc(&b));
    for i in 0..ka.nrows() {
        for j in 0..ka.ncols() {
            let grad_count = (i % 3 != 0) as i32 + (j % 3 != 0) as i32;
            let expected = ka[(i, j)] * c.powi(grad_count - 2);
            assert_relative_eq!(kb[(i, j)], expected, epsilon = 1e-10 * kb.norm());
        }
    }
}
