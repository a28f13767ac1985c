//! Inhomogeneous-broadening weight n(λ), the sectionally analytic phase
//! η(z) = z − ¼∫n(s)/(s−z)ds, its boundary values on ℝ and the zero-level
//! curve Im η = 0 bounding the amplifier domains D±.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{MbError, Result};
use crate::quadrature::{self, GaussLegendre};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Attenuator,
    Amplifier,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Attenuator => -1.0,
            Sign::Amplifier => 1.0,
        }
    }

    pub fn from_value(v: f64) -> Option<Self> {
        if v == -1.0 {
            Some(Sign::Attenuator)
        } else if v == 1.0 {
            Some(Sign::Amplifier)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// Box of half-width ε.
    Rectangular { eps: f64 },
    /// (l/π)/(λ² + l²).
    Lorentzian { l: f64 },
    /// Narrow box of half-width ε; ε = 0 is the exact δ-function.
    DeltaApprox { eps: f64 },
    /// Piecewise-linear interpolant of samples on an increasing grid.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

/// n(λ) = amplitude · shape(λ). Closed-form shapes have unit mass, so a
/// normalized profile has amplitude = sign; tabulated samples are rescaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BroadeningProfile {
    pub shape: Shape,
    pub sign: Sign,
    pub amplitude: f64,
}

/// η and g on both banks of ℝ at one λ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaValues {
    pub lambda: f64,
    pub eta_plus: C64,
    pub eta_minus: C64,
    pub g_plus: C64,
    pub g_minus: C64,
    /// p.v. ∫ n(s)/(s−λ) ds.
    pub pv: f64,
    pub n: f64,
}

/// Side of ℝ for boundary values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bank {
    Plus,
    Minus,
}

impl Bank {
    pub fn sign(self) -> f64 {
        match self {
            Bank::Plus => 1.0,
            Bank::Minus => -1.0,
        }
    }
}

/// Default floor on |Im z| for quadrature-based Cauchy transforms.
pub const AXIS_FLOOR: f64 = 1e-7;

impl BroadeningProfile {
    pub fn lorentzian(l: f64, sign: Sign) -> Self {
        Self { shape: Shape::Lorentzian { l }, sign, amplitude: sign.value() }
    }

    pub fn rectangular(eps: f64, sign: Sign) -> Self {
        Self { shape: Shape::Rectangular { eps }, sign, amplitude: sign.value() }
    }

    pub fn delta_approx(eps: f64, sign: Sign) -> Self {
        Self { shape: Shape::DeltaApprox { eps }, sign, amplitude: sign.value() }
    }

    /// Raw samples; call [`profile_normalize`] before use.
    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>, sign: Sign) -> Self {
        Self { shape: Shape::Tabulated { grid, values }, sign, amplitude: 1.0 }
    }

    /// n ≡ 0, bypassing normalization. Useful to isolate the bare
    /// exponentials in tests.
    pub fn vanishing() -> Self {
        Self { shape: Shape::Lorentzian { l: 1.0 }, sign: Sign::Attenuator, amplitude: 0.0 }
    }

    /// n(λ).
    pub fn n(&self, lambda: f64) -> f64 {
        let a = self.amplitude;
        match &self.shape {
            Shape::Lorentzian { l } => a * l / (PI * (lambda * lambda + l * l)),
            Shape::Rectangular { eps } | Shape::DeltaApprox { eps } => {
                if *eps > 0.0 && lambda.abs() < *eps {
                    a / (2.0 * eps)
                } else if *eps > 0.0 && lambda.abs() == *eps {
                    a / (4.0 * eps)
                } else {
                    0.0
                }
            }
            Shape::Tabulated { grid, values } => a * interp(grid, values, lambda),
        }
    }

    /// ∫ n dλ (exact for every supported shape).
    pub fn mass(&self) -> f64 {
        match &self.shape {
            Shape::Tabulated { grid, values } => self.amplitude * trapezoid(grid, values),
            _ => self.amplitude,
        }
    }

    /// Points where n has kinks or its characteristic centre, and a length scale.
    pub fn features(&self) -> (Vec<f64>, f64) {
        match &self.shape {
            Shape::Lorentzian { l } => (vec![0.0], *l),
            Shape::Rectangular { eps } | Shape::DeltaApprox { eps } => {
                if *eps > 0.0 {
                    (vec![-eps, *eps], *eps)
                } else {
                    (vec![0.0], 1.0)
                }
            }
            Shape::Tabulated { grid, .. } => {
                let w = (grid[grid.len() - 1] - grid[0]).max(1e-12);
                (grid.clone(), w)
            }
        }
    }

    /// C(z) = ∫ n(s)/(s−z) ds for z off ℝ, in closed form.
    pub fn cauchy(&self, z: C64) -> C64 {
        let a = self.amplitude;
        if a == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let up = if z.im >= 0.0 { 1.0 } else { -1.0 };
        match &self.shape {
            Shape::Lorentzian { l } => -a / (z + C64::new(0.0, up * l)),
            Shape::Rectangular { eps } | Shape::DeltaApprox { eps } => {
                if *eps == 0.0 {
                    -a / z
                } else {
                    let e = *eps;
                    (C64::new(e, 0.0) - z).ln() - (C64::new(-e, 0.0) - z).ln()
                }
                .scale(if *eps == 0.0 { 1.0 } else { a / (2.0 * eps) })
            }
            Shape::Tabulated { grid, values } => a * tabulated_cauchy(grid, values, z),
        }
    }

    /// p.v. ∫ n(s)/(s−λ) ds.
    pub fn cauchy_pv(&self, lambda: f64) -> Result<f64> {
        let a = self.amplitude;
        if a == 0.0 {
            return Ok(0.0);
        }
        match &self.shape {
            Shape::Lorentzian { l } => Ok(-a * lambda / (lambda * lambda + l * l)),
            Shape::Rectangular { eps } | Shape::DeltaApprox { eps } => {
                let e = *eps;
                if e == 0.0 {
                    if lambda == 0.0 {
                        return Err(MbError::PrincipalValueFailure {
                            lambda,
                            reason: "delta weight sits at the evaluation point".into(),
                        });
                    }
                    return Ok(-a / lambda);
                }
                if lambda.abs() == e {
                    return Err(MbError::PrincipalValueFailure {
                        lambda,
                        reason: "jump of n at the evaluation point".into(),
                    });
                }
                Ok(a / (2.0 * e) * ((e - lambda) / (e + lambda)).abs().ln())
            }
            Shape::Tabulated { grid, values } => {
                let n = grid.len();
                if (lambda == grid[0] && values[0] != 0.0) || (lambda == grid[n - 1] && values[n - 1] != 0.0) {
                    return Err(MbError::PrincipalValueFailure {
                        lambda,
                        reason: "tabulated weight is discontinuous at the grid end".into(),
                    });
                }
                Ok(a * tabulated_pv(grid, values, lambda))
            }
        }
    }

    /// η(z) for z off ℝ (closed forms; tabulated via exact product
    /// integration of the interpolant).
    pub fn eta(&self, z: C64) -> C64 {
        z - self.cauchy(z) * 0.25
    }

    /// η(z) with the Cauchy integral done by adaptive quadrature of n, for
    /// any shape. Fails below the |Im z| floor.
    pub fn eta_quadrature(&self, z: C64, floor: f64) -> Result<C64> {
        let c = cauchy_quadrature(&|s| C64::new(self.n(s), 0.0), self, z, floor)?;
        Ok(z - c * 0.25)
    }

    /// η±(λ) = λ − ¼ p.v.∫ n/(s−λ) ∓ (πi/4) n(λ), and g± = λ − η±.
    pub fn eta_boundary(&self, lambda: f64) -> Result<EtaValues> {
        let pv = self.cauchy_pv(lambda)?;
        let n = self.n(lambda);
        let g_plus = C64::new(0.25 * pv, 0.25 * PI * n);
        let g_minus = C64::new(0.25 * pv, -0.25 * PI * n);
        Ok(EtaValues {
            lambda,
            eta_plus: lambda - g_plus,
            eta_minus: lambda - g_minus,
            g_plus,
            g_minus,
            pv,
            n,
        })
    }

    /// Boundary value on one bank.
    pub fn eta_side(&self, lambda: f64, bank: Bank) -> Result<C64> {
        let v = self.eta_boundary(lambda)?;
        Ok(match bank {
            Bank::Plus => v.eta_plus,
            Bank::Minus => v.eta_minus,
        })
    }

    /// Quadrature rule (λ_k, w_k) with Σ w_k f(λ_k) ≈ ∫ n(λ) f(λ) dλ,
    /// adapted to the shape: tan-mapped midpoints for the Lorentzian,
    /// Gauss–Legendre on the box, the grid itself for tables.
    pub fn medium_nodes(&self, k: usize) -> Vec<(f64, f64)> {
        let a = self.amplitude;
        match &self.shape {
            Shape::Lorentzian { l } => (0..k)
                .map(|i| {
                    let th = -0.5 * PI + (i as f64 + 0.5) * PI / k as f64;
                    (l * th.tan(), a / k as f64)
                })
                .collect(),
            Shape::Rectangular { eps } | Shape::DeltaApprox { eps } => {
                if *eps == 0.0 {
                    return vec![(0.0, a)];
                }
                let gl = GaussLegendre::<f64>::new(k.max(1));
                let (xs, ws) = gl.mapped(-eps, *eps);
                xs.into_iter().zip(ws).map(|(x, w)| (x, w * a / (2.0 * eps))).collect()
            }
            Shape::Tabulated { grid, values } => {
                let n = grid.len();
                (0..n)
                    .map(|i| {
                        let left = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
                        let right = if i + 1 < n { grid[i + 1] - grid[i] } else { 0.0 };
                        (grid[i], a * values[i] * 0.5 * (left + right))
                    })
                    .collect()
            }
        }
    }
}

fn interp(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let n = grid.len();
    if n == 0 || x < grid[0] || x > grid[n - 1] {
        return 0.0;
    }
    let k = grid.partition_point(|&g| g <= x);
    if k == 0 {
        return values[0];
    }
    if k >= n {
        return values[n - 1];
    }
    let (x0, x1) = (grid[k - 1], grid[k]);
    let t = (x - x0) / (x1 - x0);
    values[k - 1] * (1.0 - t) + values[k] * t
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
        .sum()
}

/// Linear extension of segment k evaluated at z.
fn seg_lin<Z>(grid: &[f64], values: &[f64], k: usize, z: Z) -> Z
where
    Z: std::ops::Sub<f64, Output = Z> + std::ops::Mul<f64, Output = Z> + std::ops::Add<f64, Output = Z>,
{
    let slope = (values[k + 1] - values[k]) / (grid[k + 1] - grid[k]);
    (z - grid[k]) * slope + values[k]
}

/// Exact ∫ p(s)/(s−z) ds for the piecewise-linear interpolant p. Written as
/// a sum over nodes of jumps of the local linear extensions times Log(s_k − z).
fn tabulated_cauchy(grid: &[f64], values: &[f64], z: C64) -> C64 {
    let n = grid.len();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        let left = if k > 0 { seg_lin(grid, values, k - 1, z) } else { C64::new(0.0, 0.0) };
        let right = if k + 1 < n { seg_lin(grid, values, k, z) } else { C64::new(0.0, 0.0) };
        let coeff = left - right;
        if coeff.norm() != 0.0 {
            acc += coeff * (C64::new(grid[k], 0.0) - z).ln();
        }
        if k + 1 < n {
            acc += values[k + 1] - values[k];
        }
    }
    acc
}

fn tabulated_pv(grid: &[f64], values: &[f64], lambda: f64) -> f64 {
    let n = grid.len();
    let mut acc = 0.0;
    for k in 0..n {
        let left = if k > 0 { seg_lin(grid, values, k - 1, lambda) } else { 0.0 };
        let right = if k + 1 < n { seg_lin(grid, values, k, lambda) } else { 0.0 };
        let coeff = left - right;
        let d = (grid[k] - lambda).abs();
        if coeff != 0.0 && d > 0.0 {
            acc += coeff * d.ln();
        }
        if k + 1 < n {
            acc += values[k + 1] - values[k];
        }
    }
    acc
}

/// Normalizes so that ∫ n = sign.
pub fn profile_normalize(profile: &BroadeningProfile) -> Result<BroadeningProfile> {
    let mut out = profile.clone();
    match &profile.shape {
        Shape::Lorentzian { l } => {
            if !(*l > 0.0 && l.is_finite()) {
                return Err(MbError::InvalidInput(format!("Lorentzian scale must be positive, got {l}")));
            }
            out.amplitude = profile.sign.value();
        }
        Shape::Rectangular { eps } => {
            if !(*eps > 0.0 && eps.is_finite()) {
                return Err(MbError::InvalidInput(format!("box half-width must be positive, got {eps}")));
            }
            out.amplitude = profile.sign.value();
        }
        Shape::DeltaApprox { eps } => {
            if !(*eps >= 0.0 && eps.is_finite()) {
                return Err(MbError::InvalidInput(format!("delta half-width must be non-negative, got {eps}")));
            }
            out.amplitude = profile.sign.value();
        }
        Shape::Tabulated { grid, values } => {
            if grid.len() < 2 || grid.len() != values.len() {
                return Err(MbError::InvalidInput("tabulated profile needs matching grid and values (≥ 2)".into()));
            }
            if grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(MbError::InvalidInput("tabulated grid must be strictly increasing".into()));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(MbError::InvalidInput("tabulated values must be finite".into()));
            }
            let abs_vals: Vec<f64> = values.iter().map(|v| v.abs()).collect();
            let abs_mass = trapezoid(grid, &abs_vals);
            if abs_mass < 1e-14 {
                return Err(MbError::ZeroMass { mass: abs_mass });
            }
            let vmax = abs_vals.iter().cloned().fold(0.0, f64::max);
            let tail = abs_vals[0].max(abs_vals[abs_vals.len() - 1]);
            if tail > 1e-6 * vmax {
                return Err(MbError::NonDecaying { ratio: tail / vmax });
            }
            let raw = trapezoid(grid, values);
            if raw.abs() < 1e-14 {
                return Err(MbError::ZeroMass { mass: raw });
            }
            if values.iter().any(|v| v * raw < 0.0 && v.abs() > 1e-12 * vmax) {
                return Err(MbError::InvalidInput("tabulated profile changes sign".into()));
            }
            out.amplitude = profile.sign.value() / raw;
        }
    }
    Ok(out)
}

/// ∫ f(s)/(s−z) ds over ℝ by adaptive quadrature, for f decaying at least
/// like the profile. Breakpoints at Re z and the profile features.
pub fn cauchy_quadrature<F: Fn(f64) -> C64>(
    f: &F,
    profile: &BroadeningProfile,
    z: C64,
    floor: f64,
) -> Result<C64> {
    if z.im.abs() < floor {
        return Err(MbError::TooCloseToAxis { im: z.im.abs(), floor });
    }
    let (mut pts, scale) = profile.features();
    let d = z.im.abs();
    pts.extend([z.re, z.re - d, z.re + d, z.re - 10.0 * d, z.re + 10.0 * d]);
    let g = |s: f64| f(s) / (C64::new(s, 0.0) - z);
    quadrature::real_line(&g, &pts, scale.max(d).max(1.0), 1e-14, 1e-13).map_err(|e| {
        MbError::PrincipalValueFailure { lambda: z.re, reason: format!("Cauchy quadrature error {:e}", e.error) }
    })
}

/// p.v. ∫ f(s)/(s−λ) ds by the odd-part split on [λ−δ, λ+δ] plus adaptive
/// outer quadrature.
pub fn cauchy_pv_quadrature<F: Fn(f64) -> C64>(
    f: &F,
    profile: &BroadeningProfile,
    lambda: f64,
    delta: f64,
) -> Result<C64> {
    let fail = |e: quadrature::QuadFailure| MbError::PrincipalValueFailure {
        lambda,
        reason: format!("p.v. quadrature error {:e}", e.error),
    };
    let odd = |u: f64| (f(lambda + u) - f(lambda - u)) / u;
    let (feat, scale) = profile.features();
    let mut inner_pts = vec![0.0, delta];
    for p in &feat {
        let u = (p - lambda).abs();
        if u > 0.0 && u < delta {
            inner_pts.push(u);
        }
    }
    inner_pts.sort_by(f64::total_cmp);
    let inner = quadrature::adaptive_multi(&odd, &inner_pts, 1e-14, 1e-12).map_err(fail)?;
    let g = |s: f64| f(s) / (s - lambda);
    let hi = feat.iter().cloned().fold(lambda + delta, f64::max);
    let lo = feat.iter().cloned().fold(lambda - delta, f64::min);
    let w = scale.max(1.0);
    // right half-line [λ+δ, ∞)
    let mut rp: Vec<f64> = feat.iter().cloned().filter(|p| *p > lambda + delta).collect();
    rp.insert(0, lambda + delta);
    rp.push(hi + w);
    rp.sort_by(f64::total_cmp);
    let right_core = quadrature::adaptive_multi(&g, &rp, 1e-14, 1e-12).map_err(fail)?;
    let rtail = |tau: f64| if tau <= 0.0 { C64::new(0.0, 0.0) } else { g(hi + w / tau) * (w / (tau * tau)) };
    let right_tail = quadrature::adaptive(&rtail, 0.0, 1.0, 1e-14, 1e-12).map_err(fail)?;
    let mut lp: Vec<f64> = feat.iter().cloned().filter(|p| *p < lambda - delta).collect();
    lp.push(lambda - delta);
    lp.push(lo - w);
    lp.sort_by(f64::total_cmp);
    let left_core = quadrature::adaptive_multi(&g, &lp, 1e-14, 1e-12).map_err(fail)?;
    let ltail = |tau: f64| if tau <= 0.0 { C64::new(0.0, 0.0) } else { g(lo - w / tau) * (w / (tau * tau)) };
    let left_tail = quadrature::adaptive(&ltail, 0.0, 1.0, 1e-14, 1e-12).map_err(fail)?;
    Ok(inner + right_core + right_tail + left_core + left_tail)
}

/// Polyline of Im η(λ + iν) = 0 in the upper half-plane.
#[derive(Clone, Debug, Default)]
pub struct GammaCurve {
    pub points: Vec<(f64, f64)>,
    /// Real-axis crossings (λ−, λ+) when the curve closes inside the window.
    pub crossings: Option<(f64, f64)>,
    /// (λ, ν) of the highest point.
    pub nu_max: Option<(f64, f64)>,
    /// The curve reaches the edge of the λ-window.
    pub truncated: bool,
    /// Largest |Im η| over the stored points.
    pub max_residual: f64,
}

impl GammaCurve {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// γ̄: the mirror image ν → −ν.
    pub fn mirror(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|&(l, n)| (l, -n)).collect()
    }

    pub fn is_bounded(&self) -> bool {
        !self.truncated && !self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CurveConfig {
    pub window: (f64, f64),
    pub samples: usize,
    pub nu_min: f64,
    pub tol: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { window: (-20.0, 20.0), samples: 801, nu_min: 1e-9, tol: 1e-9 }
    }
}

/// Largest root ν ∈ (ν_min, ½] of Im η(λ + iν) at fixed λ, if any.
/// Since |C(z)| ≤ 1/ν, Im η > 0 for ν > ½ and no roots lie above.
fn curve_root(profile: &BroadeningProfile, lambda: f64, cfg: &CurveConfig) -> Option<f64> {
    let h = |nu: f64| profile.eta(C64::new(lambda, nu)).im;
    let hi = 0.5 + 1e-9;
    let steps = 160;
    let ratio = (hi / cfg.nu_min).ln() / steps as f64;
    let mut prev_nu = hi;
    let mut prev = h(hi);
    for k in 1..=steps {
        let nu = hi * (-ratio * k as f64).exp();
        let v = h(nu);
        if (v <= 0.0) != (prev <= 0.0) {
            return Some(bisect(&h, nu, prev_nu, cfg.tol));
        }
        prev = v;
        prev_nu = nu;
    }
    None
}

fn bisect<F: Fn(f64) -> f64>(h: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = h(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = h(m);
        if fm.abs() <= tol * 1e-3 || (b - a) < 1e-15 * b.abs().max(1e-300) {
            return m;
        }
        if (fm <= 0.0) == (fa <= 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Traces Im η = 0 for an amplifier by λ-scans with ν-bisection; the top of
/// the curve and the real-axis crossings are refined afterwards.
pub fn gamma_trace(profile: &BroadeningProfile, cfg: &CurveConfig) -> GammaCurve {
    if profile.sign == Sign::Attenuator || profile.amplitude == 0.0 {
        return GammaCurve::default();
    }
    let (a, b) = cfg.window;
    let m = cfg.samples.max(3);
    let lams: Vec<f64> = (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect();
    let roots: Vec<Option<f64>> = lams.iter().map(|&l| curve_root(profile, l, cfg)).collect();
    let mut curve = GammaCurve::default();
    for (l, r) in lams.iter().zip(&roots) {
        if let Some(nu) = r {
            curve.points.push((*l, *nu));
        }
    }
    if curve.points.is_empty() {
        return curve;
    }
    curve.truncated = roots[0].is_some() || roots[m - 1].is_some();

    // top of the curve by golden-section search on the sampled maximum
    let (imax, _) = roots
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|v| (i, v)))
        .fold((0, f64::MIN), |acc, v| if v.1 > acc.1 { v } else { acc });
    let lo = lams[imax.saturating_sub(1)];
    let hi = lams[(imax + 1).min(m - 1)];
    let nu_of = |l: f64| curve_root(profile, l, &CurveConfig { tol: 1e-15, ..*cfg }).unwrap_or(0.0);
    let (lstar, nstar) = golden_max(&nu_of, lo, hi, 1e-9);
    curve.nu_max = Some((lstar, nstar));

    if !curve.truncated {
        let first = roots.iter().position(|r| r.is_some()).unwrap();
        let last = roots.iter().rposition(|r| r.is_some()).unwrap();
        let has = |l: f64| curve_root(profile, l, cfg).is_some();
        let left = edge(&has, lams[first.saturating_sub(1)], lams[first]);
        let right = edge(&has, lams[(last + 1).min(m - 1)], lams[last]);
        curve.crossings = Some((left, right));
    }
    curve.max_residual = curve
        .points
        .iter()
        .map(|&(l, n)| profile.eta(C64::new(l, n)).im.abs())
        .fold(0.0, f64::max);
    curve
}

/// Bisection between `outside` (no root) and `inside` (root).
fn edge<F: Fn(f64) -> bool>(has: &F, mut outside: f64, mut inside: f64) -> f64 {
    for _ in 0..60 {
        let m = 0.5 * (outside + inside);
        if has(m) {
            inside = m;
        } else {
            outside = m;
        }
    }
    0.5 * (outside + inside)
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// The explicit curve λ(ν) = √(ε² − ν² + 2εν / tan 8εν) quoted for the box
/// profile; compared against the traced curve as a diagnostic only.
pub fn rectangular_curve_formula(eps: f64, nu: f64) -> Option<f64> {
    let v = eps * eps - nu * nu + 2.0 * eps * nu / (8.0 * eps * nu).tan();
    (v >= 0.0).then(|| v.sqrt())
}
