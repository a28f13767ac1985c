//! Gauss–Legendre rules and adaptive Gauss–Kronrod integration of
//! complex-valued integrands on intervals, half-lines and the real line.

use num_complex::Complex64;

use crate::scalar::Real;

/// n-point Gauss–Legendre rule on [−1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Nodes by Newton iteration on P_n from Chebyshev guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let one = T::one();
        let two = T::two();
        let nn = T::from_usize(n).unwrap();
        let tol = T::epsilon() * T::lit(4.0);
        for i in 0..n.div_ceil(2) {
            let k = T::from_usize(i).unwrap();
            let mut x = (T::PI() * (k + T::lit(0.75)) / (nn + T::half())).cos();
            let mut dp = one;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x = x - dx;
                if dx.abs() <= tol {
                    let (_, d) = legendre(n, x);
                    dp = d;
                    break;
                }
            }
            let w = two / ((one - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = T::zero();
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto [a, b].
    pub fn mapped(&self, a: T, b: T) -> (Vec<T>, Vec<T>) {
        let h = (b - a) * T::half();
        let mid = (a + b) * T::half();
        let xs = self.nodes.iter().map(|&u| mid + h * u).collect();
        let ws = self.weights.iter().map(|&w| w * h).collect();
        (xs, ws)
    }

    pub fn integrate<F: Fn(T) -> T>(&self, a: T, b: T, f: F) -> T {
        let h = (b - a) * T::half();
        let mid = (a + b) * T::half();
        let mut s = T::zero();
        for (&u, &w) in self.nodes.iter().zip(&self.weights) {
            s = s + w * f(mid + h * u);
        }
        s * h
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let one = T::one();
    let mut p0 = one;
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::from_usize(k).unwrap();
        let p2 = ((T::two() * kf - one) * x * p1 - (kf - one) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (one, T::zero());
    }
    let nf = T::from_usize(n).unwrap();
    let d = nf * (x * p1 - p0) / (x * x - one);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).norm())
}

/// Why an adaptive integration gave up.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadFailure {
    pub estimate: Complex64,
    pub error: f64,
}

/// Adaptive Gauss–Kronrod on [a, b]: bisect the worst interval until the
/// summed error estimate is below max(abs_tol, rel_tol·|I|).
pub fn adaptive<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Complex64, QuadFailure> {
    adaptive_multi(f, &[a, b], abs_tol, rel_tol)
}

/// Adaptive integration over consecutive breakpoints `pts` (sorted).
pub fn adaptive_multi<F: Fn(f64) -> Complex64>(
    f: &F,
    pts: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Complex64, QuadFailure> {
    const MAX_INTERVALS: usize = 4000;
    let mut intervals: Vec<(f64, f64, Complex64, f64)> = Vec::new();
    for w in pts.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(f, w[0], w[1]);
            intervals.push((w[0], w[1], v, e));
        }
    }
    loop {
        let total: Complex64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(total);
        }
        if intervals.len() >= MAX_INTERVALS || !err.is_finite() {
            return Err(QuadFailure { estimate: total, error: err });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (a, b, _, _) = intervals.swap_remove(idx);
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            return Err(QuadFailure { estimate: total, error: err });
        }
        let (v1, e1) = gk15(f, a, m);
        let (v2, e2) = gk15(f, m, b);
        intervals.push((a, m, v1, e1));
        intervals.push((m, b, v2, e2));
    }
}

/// ∫_ℝ f over the whole line. Finite breakpoints are honoured; the parts
/// beyond [p_min − w, p_max + w] are mapped to (0, 1] by s = c ± w/τ.
pub fn real_line<F: Fn(f64) -> Complex64>(
    f: &F,
    breakpoints: &[f64],
    width: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Complex64, QuadFailure> {
    let mut pts: Vec<f64> = breakpoints.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.is_empty() {
        pts.push(0.0);
    }
    let lo = pts[0] - width;
    let hi = pts[pts.len() - 1] + width;
    let mut all = vec![lo];
    all.extend(pts.iter().copied());
    all.push(hi);
    let core = adaptive_multi(f, &all, abs_tol, rel_tol)?;
    let right = |tau: f64| {
        if tau <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        f(hi - width + width / tau) * (width / (tau * tau))
    };
    let left = |tau: f64| {
        if tau <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        f(lo + width - width / tau) * (width / (tau * tau))
    };
    let r = adaptive(&right, 0.0, 1.0, abs_tol, rel_tol)?;
    let l = adaptive(&left, 0.0, 1.0, abs_tol, rel_tol)?;
    Ok(core + r + l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::<f64>::new(16);
        // degree 31 is the exactness limit of a 16-point rule
        let v = gl.integrate(-1.0, 1.0, |x| x.powi(30));
        assert!((v - 2.0 / 31.0).abs() < 1e-14);
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_three_point_nodes() {
        let gl = GaussLegendre::<f64>::new(3);
        assert!((gl.nodes[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((gl.weights[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_in_f32() {
        let gl = GaussLegendre::<f32>::new(8);
        let v = gl.integrate(0.0, 1.0, |x| x * x);
        assert!((v - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let eps = 1e-3;
        let f = |x: f64| Complex64::new(eps / (x * x + eps * eps), 0.0);
        let v = adaptive_multi(&f, &[-1.0, 0.0, 1.0], 1e-13, 1e-13).unwrap();
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((v.re - exact).abs() < 1e-11);
    }

    #[test]
    fn real_line_lorentzian_mass() {
        let f = |x: f64| Complex64::new(1.0 / (std::f64::consts::PI * (x * x + 1.0)), 0.0);
        let v = real_line(&f, &[0.0], 4.0, 1e-14, 1e-13).unwrap();
        assert!((v.re - 1.0).abs() < 1e-12);
    }
}
