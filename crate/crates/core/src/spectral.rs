//! Spectral data of the mixed problem: the Jost solution Φ(0, λ) of the
//! t-equation at x = 0, the Jost solutions w±(x, λ) of the x±-equations at
//! t = 0, transition matrices T± = (w±(0))⁻¹Φ(0), reflection coefficients
//! and the zeros of a(z) in the upper half-plane.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::broadening::{Bank, BroadeningProfile, Sign};
use crate::error::{MbError, Result};
use crate::lax::{cauchy_transform_fn, f_matrix, h_matrix, SpectralPoint};
use crate::magnus::{self, MagnusConfig};
use crate::scenario::ScenarioData;
use crate::{Mat2, C64};

pub use crate::scenario::{Rho0, Signal};

#[derive(Clone, Copy, Debug)]
pub struct SpectralConfig {
    pub magnus: MagnusConfig,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { magnus: MagnusConfig { max_step: 0.05, tol: 1e-11, max_refinements: 8 } }
    }
}

/// Where the spectral parameter sits: on a bank of ℝ or off the axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Spot {
    Real(f64, Bank),
    Complex(C64),
}

impl Spot {
    pub fn z(&self) -> C64 {
        match *self {
            Spot::Real(l, _) => C64::new(l, 0.0),
            Spot::Complex(z) => z,
        }
    }
}

fn i() -> C64 {
    C64::new(0.0, 1.0)
}

/// Full matrix Φ(0, z), integrated backward from Φ(T) = e^{−izTσ₃}.
/// For complex z only the column that decays towards t = T (the second in
/// ℂ₊, the first in ℂ₋) is computed stably; see [`jost_phi_column`].
pub fn jost_phi_at(scenario: &ScenarioData, z: C64, cfg: &SpectralConfig) -> Result<Mat2> {
    if scenario.e_in.is_zero() {
        return Ok(Mat2::identity());
    }
    let t_end = scenario.horizon;
    let gen = |t: f64| Mat2::sigma3().scale(-i() * z) - h_matrix(scenario.e_in.eval(t));
    let y0 = Mat2::exp_sigma3(-i() * z * t_end);
    let out = magnus::evolve(&gen, y0, t_end, &[0.0], &cfg.magnus)?;
    Ok(out[0])
}

/// One column of Φ(0, z), evolved on its own so that the step control sees
/// only that solution.
pub fn jost_phi_column(scenario: &ScenarioData, z: C64, col: usize, cfg: &SpectralConfig) -> Result<[C64; 2]> {
    let mut v = [C64::new(0.0, 0.0); 2];
    let t_end = scenario.horizon;
    v[col] = if col == 0 { (-i() * z * t_end).exp() } else { (i() * z * t_end).exp() };
    if scenario.e_in.is_zero() {
        v[col] = C64::new(1.0, 0.0);
        return Ok(v);
    }
    let gen = |t: f64| Mat2::sigma3().scale(-i() * z) - h_matrix(scenario.e_in.eval(t));
    let out = magnus::evolve(&gen, Mat2::from_columns(v, v), t_end, &[0.0], &cfg.magnus)?;
    Ok(out[0].column(0))
}

/// Φ(0, λ) on a real grid (parallel over λ), after checking that E_in has
/// decayed at T.
pub fn jost_phi(scenario: &ScenarioData, lambdas: &[f64], cfg: &SpectralConfig) -> Result<Vec<Mat2>> {
    scenario.check_decay()?;
    lambdas.par_iter().map(|&l| jost_phi_at(scenario, C64::new(l, 0.0), cfg)).collect()
}

fn medium_is_trivial(scenario: &ScenarioData) -> bool {
    scenario.e0.is_zero() && scenario.rho0.is_zero()
}

fn check_asymptotic(scenario: &ScenarioData, lambda: f64) -> Result<()> {
    let r = scenario.rho0.eval(scenario.length, lambda).norm();
    if r > 1e-8 {
        return Err(MbError::MediumNotAsymptotic { rho: r });
    }
    Ok(())
}

/// η at a spot: the bank value on ℝ, the analytic value off it.
pub fn eta_at(profile: &BroadeningProfile, spot: Spot) -> Result<C64> {
    match spot {
        Spot::Real(l, bank) => profile.eta_side(l, bank),
        Spot::Complex(z) => Ok(profile.eta(z)),
    }
}

/// G(0, x, ·) at a spot for the initial medium.
pub fn g_initial(scenario: &ScenarioData, profile: &BroadeningProfile, x: f64, spot: Spot) -> Result<Mat2> {
    let at = match spot {
        Spot::Real(l, bank) => SpectralPoint::Boundary(l, bank),
        Spot::Complex(z) => SpectralPoint::OffAxis(z),
    };
    if scenario.rho0.is_zero() {
        return cauchy_transform_fn(None, profile, at);
    }
    let f = |s: f64| {
        let r = scenario.rho0.eval(x, s);
        f_matrix(scenario.rho0.n0(x, s), r)
    };
    cauchy_transform_fn(Some(&f), profile, at)
}

/// G(0, ·) on [0, L] as a Chebyshev interpolant (second-kind points,
/// barycentric form). The degree doubles until the new points agree with
/// the old interpolant.
struct ChebTable {
    nodes: Vec<f64>,
    vals: Vec<Mat2>,
}

impl ChebTable {
    fn points(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|j| 0.5 * (a + b) + 0.5 * (b - a) * (PI * j as f64 / n as f64).cos()).collect()
    }

    fn build(a: f64, b: f64, f: impl Fn(f64) -> Result<Mat2>, tol: f64, max_n: usize) -> Result<Option<Self>> {
        let mut n = 16;
        let mut vals: Vec<Mat2> = Self::points(a, b, n).into_iter().map(&f).collect::<Result<_>>()?;
        while 2 * n <= max_n {
            let coarse = ChebTable { nodes: Self::points(a, b, n), vals: vals.clone() };
            let fine_x = Self::points(a, b, 2 * n);
            let mut fine = Vec::with_capacity(2 * n + 1);
            let mut err: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for (j, &x) in fine_x.iter().enumerate() {
                let v = if j % 2 == 0 { vals[j / 2] } else { f(x)? };
                if j % 2 == 1 {
                    err = err.max(coarse.eval(x).dist(&v));
                }
                scale = scale.max(v.max_abs());
                fine.push(v);
            }
            vals = fine;
            n *= 2;
            if err <= tol * scale {
                return Ok(Some(ChebTable { nodes: fine_x, vals }));
            }
        }
        Ok(None)
    }

    fn eval(&self, x: f64) -> Mat2 {
        let n = self.nodes.len() - 1;
        let mut num = Mat2::zero();
        let mut den = 0.0;
        for (j, (&xj, v)) in self.nodes.iter().zip(&self.vals).enumerate() {
            let d = x - xj;
            if d == 0.0 {
                return *v;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            let c = w / d;
            num += v.scale_re(c);
            den += c;
        }
        num.scale_re(1.0 / den)
    }
}

/// Generator of the x±-equation at t = 0.
fn x_generator<'a>(
    scenario: &'a ScenarioData,
    profile: &'a BroadeningProfile,
    spot: Spot,
) -> impl Fn(f64) -> Mat2 + 'a {
    let z = spot.z();
    let sigma_part = Mat2::sigma3().scale(i() * z);
    let ground = if scenario.rho0.is_zero() { g_initial(scenario, profile, 0.0, spot).ok() } else { None };
    let table = if ground.is_none() {
        ChebTable::build(0.0, scenario.length, |x| g_initial(scenario, profile, x, spot), 1e-12, 1024).ok().flatten()
    } else {
        None
    };
    move |x: f64| {
        let g = match (ground, &table) {
            (Some(g), _) => g,
            (None, Some(tab)) => tab.eval(x),
            (None, None) => g_initial(scenario, profile, x, spot).unwrap_or_else(|_| Mat2::zero().scale_re(f64::NAN)),
        };
        sigma_part - g.scale(i()) + h_matrix(scenario.e0.eval(x))
    }
}

/// Solution of the x±-equation with terminal value `terminal` at x = L,
/// sampled at `xs` (each in [0, L], any order).
pub fn x_solution(
    scenario: &ScenarioData,
    profile: &BroadeningProfile,
    spot: Spot,
    terminal: Mat2,
    xs: &[f64],
    cfg: &SpectralConfig,
) -> Result<Vec<Mat2>> {
    if let Spot::Real(l, _) = spot {
        check_asymptotic(scenario, l)?;
    }
    let eta = eta_at(profile, spot)?;
    let l_len = scenario.length;
    if medium_is_trivial(scenario) {
        // e^{ixησ₃} e^{−iLησ₃} · terminal
        return Ok(xs.iter().map(|&x| Mat2::exp_sigma3(i() * eta * (x - l_len)) * terminal).collect());
    }
    let gen = x_generator(scenario, profile, spot);
    if gen(l_len).is_finite() == false {
        return Err(MbError::PrincipalValueFailure { lambda: spot.z().re, reason: "G(0, L) not finite".into() });
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[b].total_cmp(&xs[a]));
    let sorted: Vec<f64> = order.iter().map(|&k| xs[k]).collect();
    let vals = magnus::evolve(&gen, terminal, l_len, &sorted, &cfg.magnus)?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(MbError::PrincipalValueFailure { lambda: spot.z().re, reason: "G(0, x) not finite".into() });
    }
    let mut out = vec![Mat2::zero(); xs.len()];
    for (k, &idx) in order.iter().enumerate() {
        out[idx] = vals[k];
    }
    Ok(out)
}

/// Jost solution w±(x, ·) with w(L) = e^{iLη σ₃}, at the points `xs`.
pub fn jost_w(
    scenario: &ScenarioData,
    profile: &BroadeningProfile,
    spot: Spot,
    xs: &[f64],
    cfg: &SpectralConfig,
) -> Result<Vec<Mat2>> {
    let eta = eta_at(profile, spot)?;
    let terminal = Mat2::exp_sigma3(i() * eta * scenario.length);
    x_solution(scenario, profile, spot, terminal, xs, cfg)
}

/// One column of w(0, z) evolved on its own (for continuation off ℝ).
pub fn jost_w_column(
    scenario: &ScenarioData,
    profile: &BroadeningProfile,
    z: C64,
    col: usize,
    cfg: &SpectralConfig,
) -> Result<[C64; 2]> {
    let eta = profile.eta(z);
    let l_len = scenario.length;
    let mut v = [C64::new(0.0, 0.0); 2];
    if medium_is_trivial(scenario) {
        v[col] = C64::new(1.0, 0.0);
        return Ok(v);
    }
    v[col] = if col == 0 { (i() * eta * l_len).exp() } else { (-i() * eta * l_len).exp() };
    let gen = x_generator(scenario, profile, Spot::Complex(z));
    let out = magnus::evolve(&gen, Mat2::from_columns(v, v), l_len, &[0.0], &cfg.magnus)?;
    Ok(out[0].column(0))
}

/// Entries of T± and derived reflection coefficients at one λ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoint1 {
    pub lambda: f64,
    pub t_plus: Mat2,
    pub t_minus: Mat2,
    pub phi0: Mat2,
    pub w_plus0: Mat2,
    pub w_minus0: Mat2,
}

impl SpectralPoint1 {
    pub fn a_plus(&self) -> C64 {
        self.t_plus.get(1, 1)
    }
    pub fn b_plus(&self) -> C64 {
        self.t_plus.get(0, 1)
    }
    pub fn a_bar_minus(&self) -> C64 {
        self.t_minus.get(0, 0)
    }
    pub fn b_bar_minus(&self) -> C64 {
        -self.t_minus.get(1, 0)
    }
    pub fn r_plus(&self) -> C64 {
        self.b_plus() / self.a_plus()
    }
    /// r̄⁻ := b̄⁻/ā⁻.
    pub fn r_bar_minus(&self) -> C64 {
        self.b_bar_minus() / self.a_bar_minus()
    }
}

/// A zero z_j of a(z) in ℂ₊ with its residue constant m_j = γ_j/ȧ(z_j).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pole {
    pub z: C64,
    pub m: C64,
    pub gamma: C64,
    pub a_dot: C64,
}

#[derive(Clone, Debug, Default)]
pub struct SpectralTable {
    pub lambdas: Vec<f64>,
    pub a_plus: Vec<C64>,
    pub b_plus: Vec<C64>,
    pub a_bar_minus: Vec<C64>,
    pub b_bar_minus: Vec<C64>,
    pub r_plus: Vec<C64>,
    pub r_bar_minus: Vec<C64>,
    pub big_a: Vec<C64>,
    pub big_b: Vec<C64>,
    pub alpha_plus: Vec<C64>,
    pub beta_plus: Vec<C64>,
    pub alpha_minus: Vec<C64>,
    pub beta_minus: Vec<C64>,
    pub poles: Vec<Pole>,
    /// max |det T± − 1| over the grid.
    pub det_deviation: f64,
    /// max deviation from T⁻ = σ₂T⁺*σ₂ over the grid.
    pub reduction_deviation: f64,
}

/// T± = (w±(0))⁻¹Φ(0) at one λ.
pub fn transition_point(lambda: f64, phi0: Mat2, w_plus0: Mat2, w_minus0: Mat2) -> Result<SpectralPoint1> {
    for (name, m) in [("Phi", &phi0), ("w+", &w_plus0), ("w-", &w_minus0)] {
        let dev = (m.det() - 1.0).norm();
        if dev > 1e-6 {
            return Err(MbError::InvalidInput(format!("det {name}(0, {lambda}) deviates from 1 by {dev:e}")));
        }
    }
    let t_plus = w_plus0.adjugate() * phi0;
    let t_minus = w_minus0.adjugate() * phi0;
    Ok(SpectralPoint1 { lambda, t_plus, t_minus, phi0, w_plus0, w_minus0 })
}

/// Fills a spectral table from per-λ transition data.
pub fn transition_and_reflection(points: &[SpectralPoint1]) -> Result<SpectralTable> {
    let mut t = SpectralTable::default();
    for p in points {
        let a = p.a_plus();
        if a.norm() < 1e-8 {
            return Err(MbError::SpectralSingularity { lambda: p.lambda, abs_a: a.norm() });
        }
        t.lambdas.push(p.lambda);
        t.a_plus.push(a);
        t.b_plus.push(p.b_plus());
        t.a_bar_minus.push(p.a_bar_minus());
        t.b_bar_minus.push(p.b_bar_minus());
        t.r_plus.push(p.r_plus());
        t.r_bar_minus.push(p.r_bar_minus());
        t.big_a.push(p.phi0.get(1, 1));
        t.big_b.push(p.phi0.get(0, 1));
        t.alpha_plus.push(p.w_plus0.get(0, 0));
        t.beta_plus.push(p.w_plus0.get(1, 0));
        t.alpha_minus.push(p.w_minus0.get(0, 0));
        t.beta_minus.push(p.w_minus0.get(1, 0));
        t.det_deviation = t
            .det_deviation
            .max((p.t_plus.det() - 1.0).norm())
            .max((p.t_minus.det() - 1.0).norm());
        t.reduction_deviation = t.reduction_deviation.max(p.t_minus.dist(&p.t_plus.sigma2_conj()));
    }
    Ok(t)
}

/// Spectral table on a real grid, parallel over λ.
pub fn spectral_table(
    scenario: &ScenarioData,
    profile: &BroadeningProfile,
    lambdas: &[f64],
    cfg: &SpectralConfig,
) -> Result<SpectralTable> {
    scenario.check_decay()?;
    let points: Result<Vec<SpectralPoint1>> = lambdas
        .par_iter()
        .map(|&l| {
            let phi0 = jost_phi_at(scenario, C64::new(l, 0.0), cfg)?;
            let wp = jost_w(scenario, profile, Spot::Real(l, Bank::Plus), &[0.0], cfg)?[0];
            let wm = jost_w(scenario, profile, Spot::Real(l, Bank::Minus), &[0.0], cfg)?[0];
            transition_point(l, phi0, wp, wm)
        })
        .collect();
    transition_and_reflection(&points?)
}

/// a(z) = w₁₁Φ₂₂ − w₂₁Φ₁₂ at z ∈ ℂ₊, with the α-column (α, β) of w(0, z)
/// and the column (B, A) of Φ(0, z).
pub fn a_of_z(
    scenario: &ScenarioData,
    profile: &BroadeningProfile,
    z: C64,
    cfg: &SpectralConfig,
) -> Result<(C64, [C64; 2], [C64; 2])> {
    let ba = jost_phi_column(scenario, z, 1, cfg)?;
    let ab = jost_w_column(scenario, profile, z, 0, cfg)?;
    Ok((ab[0] * ba[1] - ab[1] * ba[0], ab, ba))
}

/// Axis-aligned rectangle in ℂ₊.
#[derive(Clone, Copy, Debug)]
pub struct Window {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct ZeroSearch {
    pub poles: Vec<Pole>,
    pub winding: i64,
}

/// Argument-principle count on the window boundary followed by Newton
/// refinement from a seed grid; residue constants from γ_j and a
/// central-difference ȧ(z_j).
pub fn locate_a_zeros(
    scenario: &ScenarioData,
    profile: &BroadeningProfile,
    window: Window,
    cfg: &SpectralConfig,
) -> Result<ZeroSearch> {
    if profile.sign == Sign::Amplifier && profile.amplitude != 0.0 {
        return Err(MbError::InvalidInput("zeros of a(z) are located for attenuators only".into()));
    }
    if window.im.0 < 1e-3 || window.im.1 <= window.im.0 || window.re.1 <= window.re.0 {
        return Err(MbError::InvalidInput("window must lie in Im z >= 1e-3 and be non-degenerate".into()));
    }
    let a = |z: C64| a_of_z(scenario, profile, z, cfg).map(|v| v.0);
    let winding = winding_number(&a, window)?;
    let mut found: Vec<C64> = Vec::new();
    if winding > 0 {
        let seeds = 7;
        for p in 0..seeds {
            for q in 0..seeds {
                let z0 = C64::new(
                    window.re.0 + (window.re.1 - window.re.0) * (p as f64 + 0.5) / seeds as f64,
                    window.im.0 + (window.im.1 - window.im.0) * (q as f64 + 0.5) / seeds as f64,
                );
                if let Some(z) = newton(&a, z0)? {
                    let inside = z.re > window.re.0 && z.re < window.re.1 && z.im > window.im.0 && z.im < window.im.1;
                    if inside && found.iter().all(|w| (w - z).norm() > 1e-6) {
                        found.push(z);
                    }
                }
            }
            if found.len() as i64 >= winding {
                break;
            }
        }
    }
    if found.len() as i64 != winding {
        return Err(MbError::CountMismatch { winding, found: found.len() });
    }
    let mut poles = Vec::new();
    for z in found {
        let (_, ab, ba) = a_of_z(scenario, profile, z, cfg)?;
        // (B, A) = γ (α, β) at a zero; divide by the larger component
        let gamma = if ab[0].norm() >= ab[1].norm() { ba[0] / ab[0] } else { ba[1] / ab[1] };
        let a_dot = derivative(&a, z)?;
        poles.push(Pole { z, m: gamma / a_dot, gamma, a_dot });
    }
    poles.sort_by(|p, q| p.z.im.total_cmp(&q.z.im).then(p.z.re.total_cmp(&q.z.re)));
    Ok(ZeroSearch { poles, winding })
}

fn derivative<F: Fn(C64) -> Result<C64>>(f: &F, z: C64) -> Result<C64> {
    let h = 1e-5 * (1.0 + z.norm());
    Ok((f(z + h)? - f(z - h)?) / (2.0 * h))
}

fn newton<F: Fn(C64) -> Result<C64>>(f: &F, z0: C64) -> Result<Option<C64>> {
    let mut z = z0;
    for _ in 0..60 {
        let fz = f(z)?;
        let d = derivative(f, z)?;
        if d.norm() == 0.0 || !d.norm().is_finite() {
            return Ok(None);
        }
        let step = fz / d;
        z -= step;
        if z.im <= 0.0 || !z.norm().is_finite() {
            return Ok(None);
        }
        if step.norm() < 1e-13 * (1.0 + z.norm()) {
            return Ok(Some(z));
        }
    }
    Ok(None)
}

/// Winding number of f around the window boundary, with adaptive sampling
/// keeping each phase increment below π/4.
fn winding_number<F: Fn(C64) -> Result<C64>>(f: &F, w: Window) -> Result<i64> {
    let corners = [
        C64::new(w.re.0, w.im.0),
        C64::new(w.re.1, w.im.0),
        C64::new(w.re.1, w.im.1),
        C64::new(w.re.0, w.im.1),
    ];
    let mut total = 0.0;
    for k in 0..4 {
        let (p, q) = (corners[k], corners[(k + 1) % 4]);
        let n0 = 32;
        let mut s_prev = 0.0;
        let mut f_prev = f(p)?;
        if f_prev.norm() == 0.0 {
            return Err(MbError::InvalidInput("a(z) vanishes on the window boundary".into()));
        }
        for j in 1..=n0 {
            let s_next = j as f64 / n0 as f64;
            total += arg_increment(f, p, q, s_prev, s_next, f_prev, 0)?;
            f_prev = f(p + (q - p) * s_next)?;
            s_prev = s_next;
        }
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

fn arg_increment<F: Fn(C64) -> Result<C64>>(
    f: &F,
    p: C64,
    q: C64,
    s0: f64,
    s1: f64,
    f0: C64,
    depth: usize,
) -> Result<f64> {
    let f1 = f(p + (q - p) * s1)?;
    if f1.norm() == 0.0 {
        return Err(MbError::InvalidInput("a(z) vanishes on the window boundary".into()));
    }
    let d = (f1 / f0).arg();
    if d.abs() < PI / 4.0 || depth > 30 {
        return Ok(d);
    }
    let sm = 0.5 * (s0 + s1);
    let fm = f(p + (q - p) * sm)?;
    Ok(arg_increment(f, p, q, s0, sm, f0, depth + 1)? + arg_increment(f, p, q, sm, s1, fm, depth + 1)?)
}
