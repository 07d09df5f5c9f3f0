//! Two-homogeneous `L_a`-harmonic polynomials `⟨Ax, x⟩ - b y²`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBlowup {
    pub n: usize,
    /// Symmetric matrix, only the leading `n x n` block is used.
    pub a_mat: [[f64; 2]; 2],
    /// Coefficient of `y²`; always `trace(A) / (1 + a)`.
    pub b: f64,
}

impl QuadraticBlowup {
    /// Builds the polynomial for weight exponent `a`, symmetrizing `A` and
    /// fixing `b` so that `L_a p = 0`.
    pub fn new(n: usize, a: f64, a_mat: [[f64; 2]; 2]) -> Self {
        let mut m = [[0.0; 2]; 2];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = 0.5 * (a_mat[i][j] + a_mat[j][i]);
            }
        }
        let tr: f64 = (0..n).map(|i| m[i][i]).sum();
        QuadraticBlowup {
            n,
            a_mat: m,
            b: tr / (1.0 + a),
        }
    }

    /// `|x|² - λ y²` with `λ = n / (1 + a)`.
    pub fn paraboloid(n: usize, a: f64) -> Self {
        Self::new(n, a, [[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = *self;
        for row in out.a_mat.iter_mut() {
            for v in row.iter_mut() {
                *v *= k;
            }
        }
        out.b *= k;
        out
    }

    pub fn trace_matrix(&self) -> f64 {
        (0..self.n).map(|i| self.a_mat[i][i]).sum()
    }

    /// `⟨A x, x⟩ - b y²`.
    pub fn eval(&self, x: &[f64], y: f64) -> f64 {
        self.eval_trace(x) - self.b * y * y
    }

    /// `⟨A x, x⟩`.
    pub fn eval_trace(&self, x: &[f64]) -> f64 {
        let mut q = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                q += self.a_mat[i][j] * x[i] * x[j];
            }
        }
        q
    }

    /// Eigenvalues of `A` in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.a_mat[0][0]];
        }
        let [[p, q], [_, r]] = self.a_mat;
        let mean = 0.5 * (p + r);
        let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        vec![mean - rad, mean + rad]
    }

    /// Projects `A` onto the positive semidefinite cone (eigenvalues clipped at 0).
    pub fn project_psd(&self, a: f64) -> Self {
        if self.n == 1 {
            return Self::new(1, a, [[self.a_mat[0][0].max(0.0), 0.0], [0.0, 0.0]]);
        }
        let m = nalgebra::Matrix2::new(
            self.a_mat[0][0],
            self.a_mat[0][1],
            self.a_mat[1][0],
            self.a_mat[1][1],
        );
        let eig = nalgebra::SymmetricEigen::new(m);
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        let r = eig.eigenvectors * nalgebra::Matrix2::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        Self::new(2, a, [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]])
    }

    /// Max-norm distance between the matrices.
    pub fn matrix_distance(&self, other: &QuadraticBlowup) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                d = d.max((self.a_mat[i][j] - other.a_mat[i][j]).abs());
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Symbolic expansion of `div(y^a ∇p)` for `p = ⟨Ax,x⟩ - b y²`:
    /// `y^a (2 tr A) - b (2 (1 + a) y^a)`, so `L_a p = 0` iff `b = tr A / (1 + a)`.
    fn weighted_divergence_coefficient(p: &QuadraticBlowup, a: f64) -> f64 {
        2.0 * p.trace_matrix() - 2.0 * (1.0 + a) * p.b
    }

    #[test]
    fn half_order_example() {
        let p = QuadraticBlowup::new(1, 0.0, [[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(p.b, 1.0);
        assert_eq!(p.eval(&[2.0], 3.0), 4.0 - 9.0);
        assert_eq!(p.eval(&[0.0], 0.0), 0.0);
    }

    #[test]
    fn paraboloid_is_weighted_harmonic() {
        for &s in &[0.25, 0.5, 0.75] {
            let a = 1.0 - 2.0 * s;
            for n in [1, 2] {
                let p = QuadraticBlowup::paraboloid(n, a);
                assert!((p.b - n as f64 / (1.0 + a)).abs() < 1e-15);
                assert!(weighted_divergence_coefficient(&p, a).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn psd_projection_clips_negative_eigenvalue() {
        let p = QuadraticBlowup::new(2, 0.0, [[1.0, 0.0], [0.0, -2.0]]).project_psd(0.0);
        let e = p.eigenvalues();
        assert!(e[0].abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
        assert!((p.b - 1.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn two_homogeneous(a00 in 0.0f64..3.0, a01 in -1.0f64..1.0, a11 in 0.0f64..3.0,
                           x0 in -2.0f64..2.0, x1 in -2.0f64..2.0, y in -2.0f64..2.0,
                           lam in 0.1f64..5.0, s in 0.05f64..0.95) {
            let a = 1.0 - 2.0 * s;
            let p = QuadraticBlowup::new(2, a, [[a00, a01], [a01, a11]]);
            let v = p.eval(&[x0, x1], y);
            let w = p.eval(&[lam * x0, lam * x1], lam * y);
            prop_assert!((w - lam * lam * v).abs() <= 1e-10 * (1.0 + w.abs()));
            prop_assert!(weighted_divergence_coefficient(&p, a).abs() < 1e-12);
        }
    }
}
