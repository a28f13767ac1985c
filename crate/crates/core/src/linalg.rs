//! Dense complex LU with partial pivoting and a Hager–Higham 1-norm
//! condition estimate.

use num_complex::Complex;

use crate::scalar::Real;

/// Row-major dense square matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix<T> {
    pub n: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex::new(T::zero(), T::zero()); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.data[i * n..(i + 1) * n];
                row.iter().zip(x).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn norm1(&self) -> T {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).fold(T::zero(), |acc, i| acc + self.data[i * n + j].norm()))
            .fold(T::zero(), T::max)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
    norm1: T,
}

impl<T: Real> Lu<T> {
    /// Factor PA = LU. Returns `None` for an exactly singular pivot.
    pub fn factor(a: DenseMatrix<T>) -> Option<Self> {
        let n = a.n;
        let norm1 = a.norm1();
        let mut lu = a;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in k + 1..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return None;
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    lu.data.swap(p * n + j, k * n + j);
                }
            }
            let pivot = lu[(k, k)].inv();
            let (head, tail) = lu.data.split_at_mut((k + 1) * n);
            let krow = &head[k * n..(k + 1) * n];
            for row in tail.chunks_mut(n) {
                let l = row[k] * pivot;
                row[k] = l;
                if l.norm() != T::zero() {
                    for j in k + 1..n {
                        row[j] = row[j] - l * krow[j];
                    }
                }
            }
        }
        Some(Self { lu, perm, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.lu.n
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.lu.n;
        let mut x: Vec<Complex<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu.data[i * n..i * n + i];
            let s = row.iter().zip(&x[..i]).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * *b);
            x[i] = x[i] - s;
        }
        for i in (0..n).rev() {
            let row = &self.lu.data[i * n + i + 1..(i + 1) * n];
            let s = row.iter().zip(&x[i + 1..]).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * *b);
            x[i] = (x[i] - s) / self.lu.data[i * n + i];
        }
        x
    }

    /// Solves Aᴴx = b.
    pub fn solve_adjoint(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.lu.n;
        // Aᴴ = Uᴴ Lᴴ P
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.lu.data[k * n + i].conj() * y[k];
            }
            y[i] = s / self.lu.data[i * n + i].conj();
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - self.lu.data[k * n + i].conj() * y[k];
            }
            y[i] = s;
        }
        let mut x = vec![Complex::new(T::zero(), T::zero()); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Estimate of κ₁(A) = ‖A‖₁‖A⁻¹‖₁ (Hager's algorithm with Higham's
    /// alternating-sign safeguard).
    pub fn condition_estimate(&self) -> T {
        let n = self.lu.n;
        if n == 0 {
            return T::one();
        }
        let nf = T::from_usize(n).unwrap();
        let mut x = vec![Complex::new(T::one() / nf, T::zero()); n];
        let mut est = T::zero();
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            let ny: T = y.iter().fold(T::zero(), |a, v| a + v.norm());
            if ny <= est {
                break;
            }
            est = ny;
            let xi: Vec<Complex<T>> = y
                .iter()
                .map(|v| {
                    let r = v.norm();
                    if r == T::zero() { Complex::new(T::one(), T::zero()) } else { *v / r }
                })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, T::zero()), |acc, v| if v.1 > acc.1 { v } else { acc });
            if j == last_j {
                break;
            }
            let zx = z.iter().zip(&x).fold(Complex::new(T::zero(), T::zero()), |a, (p, q)| a + p.conj() * *q);
            if zmax <= zx.re {
                break;
            }
            last_j = j;
            x = vec![Complex::new(T::zero(), T::zero()); n];
            x[j] = Complex::new(T::one(), T::zero());
        }
        // alternating-sign probe guards against underestimates
        let alt: Vec<Complex<T>> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { T::one() } else { -T::one() };
                let v = T::one() + T::from_usize(i).unwrap() / T::from_usize((n - 1).max(1)).unwrap();
                Complex::new(s * v, T::zero())
            })
            .collect();
        let ya = self.solve(&alt);
        let alt_est = T::two() * ya.iter().fold(T::zero(), |a, v| a + v.norm()) / (T::lit(3.0) * nf);
        est.max(alt_est) * self.norm1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample(n: usize) -> DenseMatrix<f64> {
        let mut a = DenseMatrix::<f64>::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = ((i * 7 + j * 13) % 11) as f64 / 11.0;
                a[(i, j)] = cx(v, ((i + 2 * j) % 5) as f64 / 7.0);
            }
            a[(i, i)] += cx(n as f64, 0.0);
        }
        a
    }

    #[test]
    fn lu_solves_and_adjoint_solves() {
        let a = sample(12);
        let lu = Lu::factor(a.clone()).unwrap();
        let b: Vec<Complex64> = (0..12).map(|i| cx(i as f64, -(i as f64) * 0.5)).collect();
        let x = lu.solve(&b);
        let r = a.matvec(&x);
        for (u, v) in r.iter().zip(&b) {
            assert!((u - v).norm() < 1e-12);
        }
        let y = lu.solve_adjoint(&b);
        let mut ah = DenseMatrix::<f64>::zeros(12);
        for i in 0..12 {
            for j in 0..12 {
                ah[(i, j)] = a[(j, i)].conj();
            }
        }
        let r2 = ah.matvec(&y);
        for (u, v) in r2.iter().zip(&b) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn condition_of_diagonal_matrix() {
        let mut a = DenseMatrix::<f64>::identity(5);
        a[(3, 3)] = cx(1e-6, 0.0);
        a[(0, 0)] = cx(10.0, 0.0);
        let lu = Lu::factor(a).unwrap();
        let k = lu.condition_estimate();
        assert!((k - 1e7).abs() / 1e7 < 1e-9);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = DenseMatrix::<f64>::zeros(3);
        assert!(Lu::factor(a).is_none());
    }
}

/// Outcome of a GMRES solve.
#[derive(Clone, Debug)]
pub struct GmresOutcome<T> {
    pub x: Vec<Complex<T>>,
    pub iterations: usize,
    /// ‖b − Ax‖/‖b‖ at exit.
    pub relative_residual: T,
    pub converged: bool,
}

fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(Complex::new(T::zero(), T::zero()), |acc, (p, q)| acc + p.conj() * *q)
}

fn norm2<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr()).sqrt()
}

/// Restarted GMRES(m) with modified Gram–Schmidt and Givens rotations.
pub fn gmres<T: Real, F: Fn(&[Complex<T>]) -> Vec<Complex<T>>>(
    apply: F,
    b: &[Complex<T>],
    x0: Option<Vec<Complex<T>>>,
    restart: usize,
    tol: T,
    max_iter: usize,
) -> GmresOutcome<T> {
    let n = b.len();
    let zero = Complex::new(T::zero(), T::zero());
    let mut x = x0.unwrap_or_else(|| vec![zero; n]);
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        return GmresOutcome { x: vec![zero; n], iterations: 0, relative_residual: T::zero(), converged: true };
    }
    let m = restart.max(1);
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<Complex<T>> = b.iter().zip(&ax).map(|(p, q)| *p - *q).collect();
        let beta = norm2(&r);
        let rel = beta / bnorm;
        if rel <= tol || total >= max_iter {
            return GmresOutcome { x, iterations: total, relative_residual: rel, converged: rel <= tol };
        }
        let mut v: Vec<Vec<Complex<T>>> = vec![r.iter().map(|c| *c / beta).collect()];
        let mut h = vec![vec![zero; m]; m + 1];
        let mut cs = vec![T::zero(); m];
        let mut sn = vec![zero; m];
        let mut g = vec![zero; m + 1];
        g[0] = Complex::new(beta, T::zero());
        let mut k_used = 0;
        for k in 0..m {
            let mut w = apply(&v[k]);
            for (j, vj) in v.iter().enumerate() {
                let hj = dot(vj, &w);
                h[j][k] = hj;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi = *wi - hj * *vi;
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = Complex::new(hn, T::zero());
            for j in 0..k {
                let t = h[j][k];
                let u = h[j + 1][k];
                h[j][k] = t.scale(cs[j]) + sn[j] * u;
                h[j + 1][k] = -sn[j].conj() * t + u.scale(cs[j]);
            }
            let a = h[k][k];
            let bb = h[k + 1][k];
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if denom == T::zero() {
                cs[k] = T::one();
                sn[k] = zero;
            } else if a.norm() == T::zero() {
                cs[k] = T::zero();
                sn[k] = bb.conj() / bb.norm();
            } else {
                cs[k] = a.norm() / denom;
                sn[k] = (a / a.norm()) * bb.conj() / denom;
            }
            h[k][k] = a.scale(cs[k]) + sn[k] * bb;
            h[k + 1][k] = zero;
            g[k + 1] = -sn[k].conj() * g[k];
            g[k] = g[k].scale(cs[k]);
            total += 1;
            k_used = k + 1;
            if g[k + 1].norm() / bnorm <= tol || hn == T::zero() || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|c| *c / hn).collect());
        }
        // back substitution on the k_used × k_used triangle
        let mut y = vec![zero; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s = s - h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi = *xi + *yj * *vi;
            }
        }
    }
}
