use nalgebra::{Matrix2, Point2, Vector2};

/// Number of scaled monomials spanning P2.
pub const N_MONOMIALS: usize = 6;

/// Scaled monomials `1, ξ, η, ξ², ξη, η²` with `(ξ, η) = (x - x_K) / h_K`.
///
/// Index `α` is 0-based here: 0..3 span P1, 3..6 complete P2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMonomialBasis {
    pub centroid: Point2<f64>,
    pub h: f64,
}

impl ScaledMonomialBasis {
    pub fn new(centroid: Point2<f64>, h: f64) -> Self {
        ScaledMonomialBasis { centroid, h }
    }

    fn local(&self, p: &Point2<f64>) -> (f64, f64) {
        let d = (p - self.centroid) / self.h;
        (d.x, d.y)
    }

    pub fn values(&self, p: &Point2<f64>) -> [f64; N_MONOMIALS] {
        let (xi, eta) = self.local(p);
        [1.0, xi, eta, xi * xi, xi * eta, eta * eta]
    }

    pub fn eval(&self, alpha: usize, p: &Point2<f64>) -> f64 {
        self.values(p)[alpha]
    }

    pub fn gradients(&self, p: &Point2<f64>) -> [Vector2<f64>; N_MONOMIALS] {
        let (xi, eta) = self.local(p);
        let s = 1.0 / self.h;
        [
            Vector2::zeros(),
            Vector2::new(s, 0.0),
            Vector2::new(0.0, s),
            Vector2::new(2.0 * xi * s, 0.0),
            Vector2::new(eta * s, xi * s),
            Vector2::new(0.0, 2.0 * eta * s),
        ]
    }

    pub fn grad(&self, alpha: usize, p: &Point2<f64>) -> Vector2<f64> {
        self.gradients(p)[alpha]
    }

    /// Hessians are constant on the cell.
    pub fn hessian(&self, alpha: usize) -> Matrix2<f64> {
        let s = 1.0 / (self.h * self.h);
        match alpha {
            0..=2 => Matrix2::zeros(),
            3 => Matrix2::new(2.0 * s, 0.0, 0.0, 0.0),
            4 => Matrix2::new(0.0, s, s, 0.0),
            5 => Matrix2::new(0.0, 0.0, 0.0, 2.0 * s),
            _ => panic!("monomial index {alpha} out of range"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms() {
        let b = ScaledMonomialBasis::new(Point2::new(0.3, -0.2), 0.7);
        let p = Point2::new(1.1, 0.4);
        assert_eq!(b.eval(0, &p), 1.0);
        assert_relative_eq!(b.eval(1, &p), 0.8 / 0.7);
        assert_relative_eq!(
            b.hessian(3),
            Matrix2::new(2.0 / 0.49, 0.0, 0.0, 0.0),
            max_relative = 1e-15
        );
        assert_eq!(b.grad(4, &b.centroid), Vector2::zeros());
        for a in 0..3 {
            assert_eq!(b.hessian(a), Matrix2::zeros());
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = ScaledMonomialBasis::new(Point2::new(0.1, 0.2), 0.5);
        let p = Point2::new(0.37, -0.11);
        let e = 1e-6;
        for a in 0..N_MONOMIALS {
            let fx = (b.eval(a, &(p + Vector2::new(e, 0.0))) - b.eval(a, &(p - Vector2::new(e, 0.0)))) / (2.0 * e);
            let fy = (b.eval(a, &(p + Vector2::new(0.0, e))) - b.eval(a, &(p - Vector2::new(0.0, e)))) / (2.0 * e);
            assert_relative_eq!(b.grad(a, &p), Vector2::new(fx, fy), epsilon = 1e-8);
            let gx = (b.grad(a, &(p + Vector2::new(e, 0.0))) - b.grad(a, &(p - Vector2::new(e, 0.0)))) / (2.0 * e);
            let gy = (b.grad(a, &(p + Vector2::new(0.0, e))) - b.grad(a, &(p - Vector2::new(0.0, e)))) / (2.0 * e);
            let hess = Matrix2::from_columns(&[gx, gy]);
            assert_relative_eq!(b.hessian(a), hess, epsilon = 1e-6);
        }
    }
}
