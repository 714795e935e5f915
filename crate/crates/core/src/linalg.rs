//! Tiny dense matrices for per-cell Jacobian work in dimensions 1..=3.
//!
//! Everything here is closed-form: determinants by expansion, cofactors by
//! minors, and the spectral norm through the eigenvalues of AᵀA (quadratic
//! formula in 2D, the trigonometric symmetric-3x3 formula in 3D). No
//! iteration, so results are deterministic to the last bit.

/// Row-major n x n matrix, n in 1..=3. Unused entries stay zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallMat {
    n: usize,
    a: [f64; 9],
}

impl SmallMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n), "SmallMat supports n = 1, 2, 3");
        SmallMat { n, a: [0.0; 9] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SmallMat::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(n: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), n * n);
        let mut m = SmallMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, rows[i * n + j]);
            }
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[3 * i + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[3 * i + j] = v;
    }

    pub fn det(&self) -> f64 {
        let a = &self.a;
        match self.n {
            1 => a[0],
            2 => a[0] * a[4] - a[1] * a[3],
            _ => {
                a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                    + a[2] * (a[3] * a[7] - a[4] * a[6])
            }
        }
    }

    /// Cofactor matrix C with C[i][j] = (-1)^(i+j) * minor(i, j), so that
    /// Aᵀ C = det(A) I.
    pub fn cofactor(&self) -> SmallMat {
        let mut c = SmallMat::zeros(self.n);
        match self.n {
            1 => c.set(0, 0, 1.0),
            2 => {
                c.set(0, 0, self.get(1, 1));
                c.set(0, 1, -self.get(1, 0));
                c.set(1, 0, -self.get(0, 1));
                c.set(1, 1, self.get(0, 0));
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let r = [(i + 1) % 3, (i + 2) % 3];
                        let s = [(j + 1) % 3, (j + 2) % 3];
                        // Cyclic index choice absorbs the (-1)^(i+j) sign.
                        let minor = self.get(r[0], s[0]) * self.get(r[1], s[1])
                            - self.get(r[0], s[1]) * self.get(r[1], s[0]);
                        c.set(i, j, minor);
                    }
                }
            }
        }
        c
    }

    pub fn transpose(&self) -> SmallMat {
        let mut t = SmallMat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(i, j, self.get(j, i));
            }
        }
        t
    }

    pub fn mul(&self, other: &SmallMat) -> SmallMat {
        assert_eq!(self.n, other.n);
        let mut out = SmallMat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut s = 0.0;
                for k in 0..self.n {
                    s += self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> SmallMat {
        let mut out = *self;
        for v in out.a.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Operator (spectral) norm: largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        match self.n {
            1 => self.a[0].abs(),
            2 => {
                let s: f64 = self.a.iter().map(|v| v * v).sum();
                let d = self.det();
                let m = 0.5 * s;
                let disc = (m * m - d * d).max(0.0).sqrt();
                (m + disc).sqrt()
            }
            _ => {
                let g = self.transpose().mul(self);
                lambda_max_sym3(&g).max(0.0).sqrt()
            }
        }
    }
}

/// Largest eigenvalue of a symmetric 3x3 matrix, closed form.
fn lambda_max_sym3(m: &SmallMat) -> f64 {
    let a11 = m.get(0, 0);
    let a22 = m.get(1, 1);
    let a33 = m.get(2, 2);
    let a12 = m.get(0, 1);
    let a13 = m.get(0, 2);
    let a23 = m.get(1, 2);

    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    if p1 == 0.0 {
        return a11.max(a22).max(a33);
    }
    let q = (a11 + a22 + a33) / 3.0;
    let p2 = (a11 - q).powi(2) + (a22 - q).powi(2) + (a33 - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return q;
    }
    // det((M - qI) / p) / 2, clamped against roundoff before acos.
    let b = |i: usize, j: usize| (m.get(i, j) - if i == j { q } else { 0.0 }) / p;
    let detb = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
        - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let r = (detb / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    q + 2.0 * p * phi.cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cofactor_identity_small() {
        for n in 1..=3 {
            let id = SmallMat::identity(n);
            let c = id.cofactor();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(c.get(i, j), if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn cofactor_transpose_identity() {
        let mut rng = crate::rng::SplitMix64::new(31);
        for n in 2..=3 {
            for _ in 0..50 {
                let mut m = SmallMat::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        m.set(i, j, rng.uniform(-2.0, 2.0));
                    }
                }
                let prod = m.transpose().mul(&m.cofactor());
                let d = m.det();
                for i in 0..n {
                    for j in 0..n {
                        let want = if i == j { d } else { 0.0 };
                        assert_abs_diff_eq!(prod.get(i, j), want, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn cofactor_of_diag_2x2() {
        let m = SmallMat::from_rows(2, &[2.0, 0.0, 0.0, 3.0]);
        let c = m.cofactor();
        assert_eq!(c.get(0, 0), 3.0);
        assert_eq!(c.get(1, 1), 2.0);
        assert_eq!(c.get(0, 1), 0.0);
        assert_eq!(c.get(1, 0), 0.0);
    }

    #[test]
    fn spectral_norm_known_values() {
        let m = SmallMat::from_rows(2, &[3.0, 0.0, 0.0, -4.0]);
        assert_abs_diff_eq!(m.spectral_norm(), 4.0, epsilon = 1e-12);

        // Rank one: norm is the Frobenius norm.
        let m = SmallMat::from_rows(3, &[1.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(m.spectral_norm(), 3.0, epsilon = 1e-12);

        // Rotation: norm 1.
        let (c, s) = (0.6, 0.8);
        let m = SmallMat::from_rows(2, &[c, -s, s, c]);
        assert_abs_diff_eq!(m.spectral_norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_norm_dominates_scaled_frobenius() {
        let mut rng = crate::rng::SplitMix64::new(77);
        for n in 1..=3usize {
            for _ in 0..100 {
                let mut m = SmallMat::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        m.set(i, j, rng.normal());
                    }
                }
                let s = m.spectral_norm();
                let f = m.frobenius();
                assert!(s <= f + 1e-12);
                assert!(s >= f / (n as f64).sqrt() - 1e-12);
            }
        }
    }
}
