//! Dense 2×2 complex matrices: the AKNS generators, Jost solutions, jump
//! matrices and medium matrices all live here.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex2x2<T> {
    pub m: [[Complex<T>; 2]; 2],
}

impl<T: Real> Default for Complex2x2<T> {
    fn default() -> Self {
        Self::zero()
    }
}

fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

impl<T: Real> Complex2x2<T> {
    pub fn new(a: Complex<T>, b: Complex<T>, cc: Complex<T>, d: Complex<T>) -> Self {
        Self { m: [[a, b], [cc, d]] }
    }

    pub fn zero() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self::new(z, z, z, z)
    }

    pub fn identity() -> Self {
        Self::diag(c(T::one(), T::zero()), c(T::one(), T::zero()))
    }

    pub fn diag(a: Complex<T>, d: Complex<T>) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self::new(a, z, z, d)
    }

    /// σ₃ = diag(1, −1).
    pub fn sigma3() -> Self {
        Self::diag(c(T::one(), T::zero()), c(-T::one(), T::zero()))
    }

    /// σ₂ = [[0, i], [−i, 0]].
    pub fn sigma2() -> Self {
        let z = c(T::zero(), T::zero());
        Self::new(z, c(T::zero(), T::one()), c(T::zero(), -T::one()), z)
    }

    /// exp(φσ₃) = diag(e^φ, e^−φ).
    pub fn exp_sigma3(phi: Complex<T>) -> Self {
        Self::diag(phi.exp(), (-phi).exp())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.m[i][j]
    }

    pub fn column(&self, j: usize) -> [Complex<T>; 2] {
        [self.m[0][j], self.m[1][j]]
    }

    pub fn from_columns(c0: [Complex<T>; 2], c1: [Complex<T>; 2]) -> Self {
        Self::new(c0[0], c1[0], c0[1], c1[1])
    }

    pub fn det(&self) -> Complex<T> {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> Complex<T> {
        self.m[0][0] + self.m[1][1]
    }

    /// Inverse via the adjugate; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == T::zero() || !d.norm().is_finite() {
            return None;
        }
        let inv = d.inv();
        Some(Self::new(
            self.m[1][1] * inv,
            -self.m[0][1] * inv,
            -self.m[1][0] * inv,
            self.m[0][0] * inv,
        ))
    }

    /// Adjugate; equals the inverse for unimodular matrices.
    pub fn adjugate(&self) -> Self {
        Self::new(self.m[1][1], -self.m[0][1], -self.m[1][0], self.m[0][0])
    }

    pub fn dagger(&self) -> Self {
        Self::new(
            self.m[0][0].conj(),
            self.m[1][0].conj(),
            self.m[0][1].conj(),
            self.m[1][1].conj(),
        )
    }

    pub fn conj(&self) -> Self {
        Self::new(
            self.m[0][0].conj(),
            self.m[0][1].conj(),
            self.m[1][0].conj(),
            self.m[1][1].conj(),
        )
    }

    /// σ₂ A* σ₂ = [[d*, −c*], [−b*, a*]].
    pub fn sigma2_conj(&self) -> Self {
        Self::new(
            self.m[1][1].conj(),
            -self.m[1][0].conj(),
            -self.m[0][1].conj(),
            self.m[0][0].conj(),
        )
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self::new(self.m[0][0] * s, self.m[0][1] * s, self.m[1][0] * s, self.m[1][1] * s)
    }

    pub fn scale_re(&self, s: T) -> Self {
        self.scale(c(s, T::zero()))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn mul_vec(&self, v: [Complex<T>; 2]) -> [Complex<T>; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn frobenius(&self) -> T {
        let mut s = T::zero();
        for row in &self.m {
            for x in row {
                s = s + x.norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn max_abs(&self) -> T {
        let mut s = T::zero();
        for row in &self.m {
            for x in row {
                s = s.max(x.norm());
            }
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Eigenvalues (ascending) of the Hermitian part (A + A†)/2.
    pub fn hermitian_part_eigenvalues(&self) -> (T, T) {
        let half = T::half();
        let p = self.m[0][0].re;
        let r = self.m[1][1].re;
        let q = (self.m[0][1] + self.m[1][0].conj()).scale(half);
        let mean = (p + r) * half;
        let rad = ((p - r) * half).hypot(q.norm());
        (mean - rad, mean + rad)
    }

    /// Matrix exponential. Uses exp(A) = e^{tr/2}(cosh μ I + sinh μ/μ B) with
    /// B = A − (tr/2) I and μ² = −det B.
    pub fn exp(&self) -> Self {
        let half = T::half();
        let shift = self.trace().scale(half);
        let b = Self::new(
            self.m[0][0] - shift,
            self.m[0][1],
            self.m[1][0],
            self.m[1][1] - shift,
        );
        let mu = (-b.det()).sqrt();
        let (ch, shc) = if mu.norm() < T::lit(1e-4) {
            let mu2 = mu * mu;
            let one = c(T::one(), T::zero());
            (
                one + mu2.scale(half) + mu2 * mu2 / T::lit(24.0),
                one + mu2 / T::lit(6.0) + mu2 * mu2 / T::lit(120.0),
            )
        } else {
            (mu.cosh(), mu.sinh() / mu)
        };
        let e = shift.exp();
        Self::new(
            (ch + shc * b.m[0][0]) * e,
            shc * b.m[0][1] * e,
            shc * b.m[1][0] * e,
            (ch + shc * b.m[1][1]) * e,
        )
    }

    pub fn dist(&self, other: &Self) -> T {
        (*self - *other).max_abs()
    }
}

impl<T: Real> Mul for Complex2x2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl<T: Real> Add for Complex2x2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl<T: Real> AddAssign for Complex2x2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Complex2x2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] - o.m[0][0],
            self.m[0][1] - o.m[0][1],
            self.m[1][0] - o.m[1][0],
            self.m[1][1] - o.m[1][1],
        )
    }
}

impl<T: Real> Neg for Complex2x2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_re(-T::one())
    }
}

impl<T: Real> Mul<Complex<T>> for Complex2x2<T> {
    type Output = Self;
    fn mul(self, s: Complex<T>) -> Self {
        self.scale(s)
    }
}
