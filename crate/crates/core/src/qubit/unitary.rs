use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A 2×2 complex matrix expected to be unitary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unitary2 {
    m: [[Complex64; 2]; 2],
}

impl Unitary2 {
    pub const IDENTITY: Unitary2 = Unitary2 {
        m: [[ONE, ZERO], [ZERO, ONE]],
    };

    pub fn from_matrix(m: [[Complex64; 2]; 2]) -> Self {
        Self { m }
    }

    pub fn matrix(&self) -> &[[Complex64; 2]; 2] {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[row][col]
    }

    /// `exp(-i θ n·σ / 2)` for a unit axis `n`.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Self {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = (0.5 * angle).sin_cos();
        Su2 {
            a: c,
            x: s * axis[0] / norm,
            y: s * axis[1] / norm,
            z: s * axis[2] / norm,
        }
        .to_unitary()
    }

    pub fn rx(angle: f64) -> Self {
        Self::rotation([1.0, 0.0, 0.0], angle)
    }

    pub fn ry(angle: f64) -> Self {
        Self::rotation([0.0, 1.0, 0.0], angle)
    }

    pub fn rz(angle: f64) -> Self {
        Self::rotation([0.0, 0.0, 1.0], angle)
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0].conj(), m[1][0].conj()],
                [m[0][1].conj(), m[1][1].conj()],
            ],
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Frobenius norm of `U†U - 1`, an upper bound on the operator-norm deviation.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.adjoint() * *self;
        let d = p - Self::IDENTITY;
        d.m.iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Nearest unitary in the polar decomposition sense, by Newton iteration
    /// `X ← (X + X^{-†}) / 2`.
    pub fn polar_projection(&self) -> Self {
        let mut x = *self;
        for _ in 0..50 {
            let det = x.det();
            // (X^{-1})† for a 2×2 matrix.
            let inv = Self {
                m: [
                    [x.m[1][1] / det, -x.m[0][1] / det],
                    [-x.m[1][0] / det, x.m[0][0] / det],
                ],
            };
            let inv_adj = inv.adjoint();
            let next = Self {
                m: [
                    [
                        0.5 * (x.m[0][0] + inv_adj.m[0][0]),
                        0.5 * (x.m[0][1] + inv_adj.m[0][1]),
                    ],
                    [
                        0.5 * (x.m[1][0] + inv_adj.m[1][0]),
                        0.5 * (x.m[1][1] + inv_adj.m[1][1]),
                    ],
                ],
            };
            let change: f64 = (next - x).m.iter().flatten().map(|z| z.norm_sqr()).sum();
            x = next;
            if change < 1e-32 {
                break;
            }
        }
        x
    }

    /// Representative with the first entry of non-negligible modulus made real positive.
    pub fn phase_normalized(&self) -> Self {
        let pivot = self
            .m
            .iter()
            .flatten()
            .copied()
            .find(|z| z.norm() > 1e-9)
            .unwrap_or(ONE);
        let phase = pivot.conj() / pivot.norm();
        let mut out = *self;
        for z in out.m.iter_mut().flatten() {
            *z *= phase;
        }
        out
    }

    /// `|⟨target|U|prepared⟩|²`.
    pub fn transition_probability(&self, prepared: [Complex64; 2], target: [Complex64; 2]) -> f64 {
        let u_psi = [
            self.m[0][0] * prepared[0] + self.m[0][1] * prepared[1],
            self.m[1][0] * prepared[0] + self.m[1][1] * prepared[1],
        ];
        (target[0].conj() * u_psi[0] + target[1].conj() * u_psi[1]).norm_sqr()
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    fn mul(self, rhs: Unitary2) -> Unitary2 {
        let a = &self.m;
        let b = &rhs.m;
        Unitary2 {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
        }
    }
}

impl std::ops::Sub for Unitary2 {
    type Output = Unitary2;

    fn sub(self, rhs: Unitary2) -> Unitary2 {
        let mut out = self;
        for (z, w) in out.m.iter_mut().flatten().zip(rhs.m.iter().flatten()) {
            *z -= *w;
        }
        out
    }
}

/// `a·1 - i(x σx + y σy + z σz)`, the SU(2) form used in the propagation loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Su2 {
    pub a: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Su2 {
    pub const IDENTITY: Su2 = Su2 {
        a: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Left-multiplies by the rotation `a_s - i(x_s σx + z_s σz)` (no σy part).
    #[inline(always)]
    pub fn left_mul_xz(&mut self, a_s: f64, x_s: f64, z_s: f64) {
        let Su2 { a, x, y, z } = *self;
        self.a = a_s * a - (x_s * x + z_s * z);
        self.x = a_s * x + a * x_s - z_s * y;
        self.y = a_s * y + z_s * x - x_s * z;
        self.z = a_s * z + a * z_s + x_s * y;
    }

    /// Rescales onto the unit 3-sphere; for matrices of this form this is the
    /// polar projection onto SU(2).
    pub fn renormalize(&mut self) {
        let n = (self.a * self.a + self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        self.a /= n;
        self.x /= n;
        self.y /= n;
        self.z /= n;
    }

    pub fn to_unitary(self) -> Unitary2 {
        let Su2 { a, x, y, z } = self;
        Unitary2 {
            m: [
                [Complex64::new(a, -z), Complex64::new(-y, -x)],
                [Complex64::new(y, -x), Complex64::new(a, z)],
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: &Unitary2, b: &Unitary2, tol: f64) -> bool {
        (*a - *b).m.iter().flatten().all(|z| z.norm() < tol)
    }

    #[test]
    fn su2_product_matches_matrix_product() {
        let mut acc = Su2 {
            a: 0.6,
            x: 0.0,
            y: 0.8,
            z: 0.0,
        };
        let before = acc.to_unitary();
        let (s, c) = 0.3f64.sin_cos();
        let (xs, zs) = (s * 0.6, s * 0.8);
        acc.left_mul_xz(c, xs, zs);
        let step = Su2 {
            a: c,
            x: xs,
            y: 0.0,
            z: zs,
        }
        .to_unitary();
        assert!(close(&acc.to_unitary(), &(step * before), 1e-15));
    }

    #[test]
    fn rotations_are_unitary_with_unit_determinant() {
        for (i, axis) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.3, -0.2, 0.9]]
            .iter()
            .enumerate()
        {
            let u = Unitary2::rotation(*axis, 0.7 + i as f64);
            assert!(u.unitarity_deviation() < 1e-15);
            assert!((u.det().norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn polar_projection_restores_unitarity() {
        let u = Unitary2::rotation([0.2, 0.5, 0.1], 1.3);
        let mut m = *u.matrix();
        m[0][1] += Complex64::new(1e-6, -2e-6);
        m[1][1] *= 1.0 + 1e-6;
        let p = Unitary2::from_matrix(m).polar_projection();
        assert!(p.unitarity_deviation() < 1e-14);
        assert!(close(&p, &u, 1e-5));
    }

    #[test]
    fn phase_normalization_picks_real_positive_pivot() {
        let u = Unitary2::rx(PI / 2.0);
        let phased = Unitary2::from_matrix({
            let mut m = *u.matrix();
            let ph = Complex64::from_polar(1.0, 0.77);
            for z in m.iter_mut().flatten() {
                *z *= ph;
            }
            m
        });
        let a = u.phase_normalized();
        let b = phased.phase_normalized();
        assert!(close(&a, &b, 1e-14));
        assert!(a.entry(0, 0).im.abs() < 1e-15 && a.entry(0, 0).re > 0.0);
        // first entry zero: pivot moves to the next one
        let x = Unitary2::rx(PI).phase_normalized();
        assert!(x.entry(0, 1).im.abs() < 1e-15 && x.entry(0, 1).re > 0.0);
    }
}
