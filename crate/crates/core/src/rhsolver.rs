//! Riemann–Hilbert solver. The contour is a union of Gauss–Legendre panels
//! on ℝ and closed curves (pole circles, Γ, amplifier ovals) sampled by the
//! periodic trapezoid rule. With μ = M₊ on Σ and W = I − J the boundary
//! values satisfy μ − C₊[μW] = I; the plus-side Cauchy operator is
//! discretized by Legendre product integration on nearby panels and by
//! singularity subtraction with spectral differentiation on closed curves.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::broadening::{gamma_trace, Bank, BroadeningProfile, CurveConfig, Sign};
use crate::error::{MbError, Result};
use crate::jump::{posdef_check, JumpData, ProblemClass};
use crate::linalg::{gmres, DenseMatrix, Lu};
use crate::quadrature::GaussLegendre;
use crate::spectral::Pole;
use crate::{Mat2, C64};

fn i() -> C64 {
    C64::new(0.0, 1.0)
}

fn c0() -> C64 {
    C64::new(0.0, 0.0)
}

/// Bernstein-ellipse parameter below which panel sources are integrated
/// with product weights instead of plain Gauss weights.
const NEAR_RHO: f64 = 2.2;

#[derive(Clone, Debug)]
pub struct ContourConfig {
    /// Truncation of ℝ.
    pub window: (f64, f64),
    /// Panel width inside `dense` (or everywhere if `dense` is None).
    pub panel_width: f64,
    /// Panel width outside `dense`.
    pub coarse_width: f64,
    pub dense: Option<(f64, f64)>,
    pub order: usize,
    pub real_line: bool,
    /// Nodes per closed curve.
    pub curve_nodes: usize,
    /// Radius of the circles around poles; None picks one from the pole
    /// configuration.
    pub pole_radius: Option<f64>,
    /// Radius of the optional circle Γ about the origin.
    pub gamma_radius: Option<f64>,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            window: (-20.0, 20.0),
            panel_width: 40.0 / 24.0,
            coarse_width: 40.0 / 24.0,
            dense: None,
            order: 16,
            real_line: true,
            curve_nodes: 128,
            pole_radius: None,
            gamma_radius: None,
        }
    }
}

impl ContourConfig {
    /// Real-line panels fine enough for jumps oscillating like
    /// e^{2i(λt − xλ)} up to the given horizon and length.
    pub fn for_lattice(window: (f64, f64), horizon: f64, length: f64) -> Self {
        let width = (7.0 / (horizon + length).max(1.0)).min(1.0);
        Self { window, panel_width: width, coarse_width: width, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurveKind {
    /// Circle about a pole z_j (`upper`) or its conjugate.
    PoleCircle { pole: usize, upper: bool, center: C64, radius: f64 },
    Gamma { radius: f64 },
    /// Amplifier oval γ ∪ γ̄; nodes with Im z > 0 lie on γ.
    Oval,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    Segment { a: f64, b: f64, first: usize, len: usize },
    Closed { first: usize, len: usize, ccw: bool, kind: CurveKind },
}

#[derive(Clone, Debug)]
pub struct ContourSigma {
    pub nodes: Vec<C64>,
    /// dz-weights: ∫f dz ≈ Σ f(z_l) dz_l.
    pub dz: Vec<C64>,
    pub piece_of: Vec<usize>,
    pub pieces: Vec<Piece>,
    pub window: (f64, f64),
    pub class: ProblemClass,
    gl: GaussLegendre<f64>,
    /// legendre[j][l] = P_j(u_l) on the reference panel
    legendre: Vec<Vec<f64>>,
    /// Row-major plus-side Cauchy matrix.
    cplus: Vec<C64>,
}

/// ζ ± √(ζ² − 1), the larger modulus.
fn bernstein(zeta: C64) -> f64 {
    let s = (zeta - 1.0).sqrt() * (zeta + 1.0).sqrt();
    (zeta + s).norm().max((zeta - s).norm())
}

fn legendre_table(gl: &GaussLegendre<f64>) -> Vec<Vec<f64>> {
    let q = gl.len();
    let mut p = vec![vec![0.0; q]; q];
    for (l, &u) in gl.nodes.iter().enumerate() {
        p[0][l] = 1.0;
        if q > 1 {
            p[1][l] = u;
        }
        for j in 1..q.saturating_sub(1) {
            p[j + 1][l] = ((2 * j + 1) as f64 * u * p[j][l] - j as f64 * p[j - 1][l]) / (j + 1) as f64;
        }
    }
    p
}

impl ContourSigma {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn real_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| matches!(self.pieces[self.piece_of[k]], Piece::Segment { .. })).collect()
    }

    pub fn cplus(&self, k: usize, l: usize) -> C64 {
        self.cplus[k * self.len() + l]
    }

    /// Product-integration weights ω_l with ∫_{−1}^{1} p(u)/(u − ζ) du =
    /// Σ ω_l p(u_l) for polynomials of degree < order.
    /// With `pv = Some(u)` the principal value at the real point u is used.
    fn product_weights(&self, zeta: C64, pv: Option<f64>) -> Vec<C64> {
        let q = self.gl.len();
        let mut qs = vec![c0(); q];
        qs[0] = match pv {
            Some(u) => C64::new(((1.0 - u) / (1.0 + u)).ln(), 0.0),
            // single cut on [−1, 1]; also safe for real ζ outside it
            None => ((zeta - 1.0) / (zeta + 1.0)).ln(),
        };
        if q > 1 {
            qs[1] = 2.0 + zeta * qs[0];
        }
        for j in 1..q.saturating_sub(1) {
            qs[j + 1] = ((2 * j + 1) as f64 * zeta * qs[j] - j as f64 * qs[j - 1]) / (j + 1) as f64;
        }
        (0..q)
            .map(|l| {
                let s: C64 = (0..q).map(|j| qs[j] * ((2 * j + 1) as f64 * 0.5 * self.legendre[j][l])).sum();
                s * self.gl.weights[l]
            })
            .collect()
    }

    /// Weights w_l with (1/2πi)∫f(s)/(s − z)ds ≈ Σ w_l f_l for z off Σ, or
    /// the plus-side boundary value when `target` is the node index of z.
    fn cauchy_weights(&self, z: C64, target: Option<usize>) -> Vec<C64> {
        let n = self.len();
        let mut w = vec![c0(); n];
        let two_pi_i = C64::new(0.0, 2.0 * PI);
        for (p, piece) in self.pieces.iter().enumerate() {
            match *piece {
                Piece::Segment { a, b, first, len } => {
                    let c = 0.5 * (a + b);
                    let h = 0.5 * (b - a);
                    let zeta = (z - c) / h;
                    let self_node = target.filter(|&k| self.piece_of[k] == p).map(|k| k - first);
                    if self_node.is_some() || bernstein(zeta) < NEAR_RHO {
                        let om = self.product_weights(zeta, self_node.map(|l| self.gl.nodes[l]));
                        for l in 0..len {
                            w[first + l] += om[l] / two_pi_i;
                        }
                        if let Some(l) = self_node {
                            w[first + l] += 0.5;
                        }
                    } else {
                        for l in first..first + len {
                            w[l] += self.dz[l] / ((self.nodes[l] - z) * two_pi_i);
                        }
                    }
                }
                Piece::Closed { first, len, ccw, .. } => {
                    let own = target.filter(|&k| self.piece_of[k] == p);
                    match own {
                        Some(k) => {
                            let dphi = 2.0 * PI / len as f64;
                            let kk = k - first;
                            let mut diag = if ccw { C64::new(1.0, 0.0) } else { c0() };
                            for l in 0..len {
                                if l == kk {
                                    continue;
                                }
                                let g = self.dz[first + l] / ((self.nodes[first + l] - z) * two_pi_i);
                                let d = diff_entry(kk, l, len) * dphi;
                                w[first + l] += g + d / two_pi_i;
                                diag -= g;
                            }
                            w[k] += diag;
                        }
                        None => {
                            for l in first..first + len {
                                w[l] += self.dz[l] / ((self.nodes[l] - z) * two_pi_i);
                            }
                        }
                    }
                }
            }
        }
        w
    }

    /// Plus-side boundary-value weights at a real λ inside a real panel
    /// (not necessarily a node), together with the interpolation weights
    /// that give f(λ) from the panel's nodal values.
    pub fn boundary_weights(&self, lambda: f64) -> Option<(Vec<C64>, Vec<(usize, f64)>)> {
        let (a, b, first, len) = self.pieces.iter().find_map(|piece| match *piece {
            Piece::Segment { a, b, first, len } if lambda >= a && lambda <= b => Some((a, b, first, len)),
            _ => None,
        })?;
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        // keep off the panel ends, where the neighbouring log moments blow up
        let u = ((lambda - c) / h).clamp(-1.0 + 1e-8, 1.0 - 1e-8);
        let lambda = c + h * u;
        let q = self.gl.len();
        // Legendre values at u for the interpolant
        let mut pu = vec![0.0; q];
        pu[0] = 1.0;
        if q > 1 {
            pu[1] = u;
        }
        for j in 1..q.saturating_sub(1) {
            pu[j + 1] = ((2 * j + 1) as f64 * u * pu[j] - j as f64 * pu[j - 1]) / (j + 1) as f64;
        }
        let interp: Vec<(usize, f64)> = (0..len)
            .map(|l| {
                let s: f64 = (0..q).map(|j| (2 * j + 1) as f64 * 0.5 * self.legendre[j][l] * pu[j]).sum();
                (first + l, s * self.gl.weights[l])
            })
            .collect();
        let z = C64::new(lambda, 0.0);
        let mut w = self.cauchy_weights(z, None);
        let two_pi_i = C64::new(0.0, 2.0 * PI);
        for l in first..first + len {
            w[l] = c0();
        }
        let om = self.product_weights(C64::new(u, 0.0), Some(u));
        for l in 0..len {
            w[first + l] = om[l] / two_pi_i;
        }
        for &(l, v) in &interp {
            w[l] += 0.5 * v;
        }
        Some((w, interp))
    }

    /// Smallest admissible distance from a closed curve for off-contour
    /// evaluation, and the distance of z from it.
    fn closed_curve_clearance(&self, z: C64) -> Option<(f64, f64)> {
        let mut worst: Option<(f64, f64)> = None;
        for piece in &self.pieces {
            if let Piece::Closed { first, len, .. } = *piece {
                let spacing = (first..first + len).map(|l| self.dz[l].norm()).fold(0.0, f64::max);
                let dist = (first..first + len).map(|l| (self.nodes[l] - z).norm()).fold(f64::INFINITY, f64::min);
                if worst.map_or(true, |(d, f)| dist / (2.0 * spacing) < d / f) {
                    worst = Some((dist, 2.0 * spacing));
                }
            }
        }
        worst
    }
}

/// Spectral differentiation matrix entry on an even periodic grid.
fn diff_entry(k: usize, l: usize, n: usize) -> f64 {
    let d = k as i64 - l as i64;
    let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    0.5 * sign / (PI * d as f64 / n as f64).tan()
}

fn push_closed(
    nodes: &mut Vec<C64>,
    dz: &mut Vec<C64>,
    pieces: &mut Vec<Piece>,
    piece_of: &mut Vec<usize>,
    pts: Vec<(C64, C64)>,
    ccw: bool,
    kind: CurveKind,
) {
    let first = nodes.len();
    let idx = pieces.len();
    let dphi = 2.0 * PI / pts.len() as f64;
    for (z, dzdphi) in &pts {
        nodes.push(*z);
        dz.push(*dzdphi * dphi);
        piece_of.push(idx);
    }
    pieces.push(Piece::Closed { first, len: pts.len(), ccw, kind });
}

/// Clockwise circle nodes with dz/dφ.
fn circle(center: C64, radius: f64, n: usize) -> Vec<(C64, C64)> {
    (0..n)
        .map(|l| {
            let e = C64::from_polar(radius, -2.0 * PI * l as f64 / n as f64);
            (center + e, -i() * e)
        })
        .collect()
}

/// Default pole-circle radius: clear of ℝ, of the other poles and of the
/// conjugate circles.
pub fn default_pole_radius(poles: &[C64]) -> f64 {
    let mut r: f64 = 0.25;
    for (j, z) in poles.iter().enumerate() {
        r = r.min(0.5 * z.im);
        for w in poles.iter().skip(j + 1) {
            r = r.min(0.4 * (z - w).norm());
        }
    }
    r
}

/// Clockwise oval γ ∪ γ̄ about the midpoint of the real crossings, with the
/// radius interpolated in angle from the traced curve.
fn oval_nodes(profile: &BroadeningProfile, n: usize) -> Result<Vec<(C64, C64)>> {
    let curve = gamma_trace(profile, &CurveConfig::default());
    let (lm, lp) = curve
        .crossings
        .filter(|_| curve.is_bounded())
        .ok_or_else(|| MbError::InvalidInput("amplifier curve Im eta = 0 is not a bounded oval".into()))?;
    let c = 0.5 * (lm + lp);
    let mut polar: Vec<(f64, f64)> = Vec::new();
    for &(l, nu) in &curve.points {
        polar.push((nu.atan2(l - c), (l - c).hypot(nu)));
        polar.push(((-nu).atan2(l - c), (l - c).hypot(nu)));
    }
    polar.push((0.0, lp - c));
    polar.push((PI, c - lm));
    polar.push((-PI, c - lm));
    polar.sort_by(|a, b| a.0.total_cmp(&b.0));
    let radius = |th: f64| {
        let k = polar.partition_point(|p| p.0 <= th).clamp(1, polar.len() - 1);
        let (a, b) = (polar[k - 1], polar[k]);
        if b.0 == a.0 {
            return a.1;
        }
        a.1 + (b.1 - a.1) * (th - a.0) / (b.0 - a.0)
    };
    // angle θ = −φ for a clockwise parametrization
    let rs: Vec<f64> = (0..n)
        .map(|l| {
            let mut th = -2.0 * PI * l as f64 / n as f64;
            if th < -PI {
                th += 2.0 * PI;
            }
            radius(th)
        })
        .collect();
    let drs: Vec<f64> = (0..n).map(|k| (0..n).filter(|&l| l != k).map(|l| diff_entry(k, l, n) * rs[l]).sum()).collect();
    Ok((0..n)
        .map(|l| {
            let e = C64::from_polar(1.0, -2.0 * PI * l as f64 / n as f64);
            let z = C64::new(c, 0.0) + e * rs[l];
            (z, e * (drs[l] - i() * rs[l]))
        })
        .collect())
}

/// Builds Σ: ℝ truncated to the window, optional circles about poles and
/// their conjugates, the amplifier oval, and the optional circle Γ.
pub fn contour_build(
    cfg: &ContourConfig,
    profile: &BroadeningProfile,
    class: ProblemClass,
    poles: &[C64],
) -> Result<ContourSigma> {
    let gl = GaussLegendre::<f64>::new(cfg.order.max(2));
    let mut nodes = Vec::new();
    let mut dz = Vec::new();
    let mut pieces = Vec::new();
    let mut piece_of = Vec::new();
    if cfg.real_line {
        let (a, b) = cfg.window;
        if !(b > a) || !(cfg.panel_width > 0.0) || !(cfg.coarse_width > 0.0) {
            return Err(MbError::EmptyContour);
        }
        let mut cuts = vec![a];
        let push_range = |lo: f64, hi: f64, width: f64, cuts: &mut Vec<f64>| {
            if hi <= lo {
                return;
            }
            let k = ((hi - lo) / width).ceil().max(1.0) as usize;
            for j in 1..=k {
                cuts.push(lo + (hi - lo) * j as f64 / k as f64);
            }
        };
        match cfg.dense {
            Some((da, db)) if db > da => {
                let (da, db) = (da.max(a), db.min(b));
                push_range(a, da, cfg.coarse_width, &mut cuts);
                push_range(da.max(a), db, cfg.panel_width, &mut cuts);
                push_range(db, b, cfg.coarse_width, &mut cuts);
            }
            _ => push_range(a, b, cfg.panel_width, &mut cuts),
        }
        cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        for win in cuts.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            let (xs, ws) = gl.mapped(lo, hi);
            let first = nodes.len();
            let idx = pieces.len();
            for (x, w) in xs.into_iter().zip(ws) {
                nodes.push(C64::new(x, 0.0));
                dz.push(C64::new(w, 0.0));
                piece_of.push(idx);
            }
            pieces.push(Piece::Segment { a: lo, b: hi, first, len: gl.len() });
        }
    }
    let n_curve = cfg.curve_nodes.max(8) & !1;
    if !poles.is_empty() {
        let radius = cfg.pole_radius.unwrap_or_else(|| default_pole_radius(poles));
        for (j, &z) in poles.iter().enumerate() {
            if z.im <= radius {
                return Err(MbError::InvalidInput(format!("pole {z} too close to the real axis for radius {radius}")));
            }
            for (upper, center) in [(true, z), (false, z.conj())] {
                let kind = CurveKind::PoleCircle { pole: j, upper, center, radius };
                push_closed(&mut nodes, &mut dz, &mut pieces, &mut piece_of, circle(center, radius, n_curve), false, kind);
            }
        }
    }
    if class == ProblemClass::AmplifierOval && profile.sign == Sign::Amplifier {
        let pts = oval_nodes(profile, n_curve)?;
        push_closed(&mut nodes, &mut dz, &mut pieces, &mut piece_of, pts, false, CurveKind::Oval);
    }
    if let Some(r) = cfg.gamma_radius {
        let kind = CurveKind::Gamma { radius: r };
        push_closed(&mut nodes, &mut dz, &mut pieces, &mut piece_of, circle(c0(), r, n_curve), false, kind);
    }
    if nodes.is_empty() {
        return Err(MbError::EmptyContour);
    }
    let legendre = legendre_table(&gl);
    let mut sigma = ContourSigma {
        nodes,
        dz,
        piece_of,
        pieces,
        window: cfg.window,
        class,
        gl,
        legendre,
        cplus: Vec::new(),
    };
    let n = sigma.len();
    let rows: Vec<Vec<C64>> = (0..n).into_par_iter().map(|k| sigma.cauchy_weights(sigma.nodes[k], Some(k))).collect();
    sigma.cplus = rows.into_iter().flatten().collect();
    debug_assert_eq!(sigma.cplus.len(), n * n);
    Ok(sigma)
}

/// Solution of the discrete singular integral equation at one (t, x).
#[derive(Clone, Debug)]
pub struct RHResult {
    pub t: f64,
    pub x: f64,
    /// μ = M₊ = I + Q at each node.
    pub mu: Vec<Mat2>,
    /// The jumps the solve used.
    pub jumps: Vec<Mat2>,
    /// μ(I − J) at each node.
    pub density: Vec<Mat2>,
    /// M = I + m/z + O(z⁻²).
    pub m: Mat2,
    pub e: C64,
    pub residual: f64,
    pub r_norm: f64,
    pub cond: f64,
}

impl RHResult {
    pub fn q(&self, k: usize) -> Mat2 {
        self.mu[k] - Mat2::identity()
    }

    /// H = −i[σ₃, m].
    pub fn h(&self) -> Mat2 {
        Mat2::sigma3().commutator(&self.m).scale(-i())
    }

    /// ‖H + H†‖.
    pub fn anti_hermitian_defect(&self) -> f64 {
        let h = self.h();
        (h + h.dagger()).max_abs()
    }

    /// M₋ = M₊J at node k.
    pub fn m_minus(&self, k: usize) -> Mat2 {
        self.mu[k] * self.jumps[k]
    }
}

fn trivial_result(contour: &ContourSigma, data: &JumpData) -> RHResult {
    let n = contour.len();
    RHResult {
        t: data.t,
        x: data.x,
        mu: vec![Mat2::identity(); n],
        jumps: data.jumps.clone(),
        density: vec![Mat2::zero(); n],
        m: Mat2::zero(),
        e: c0(),
        residual: 0.0,
        r_norm: 0.0,
        cond: 1.0,
    }
}

/// Linear solver for the collocation system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinearSolver {
    /// Dense LU with a 1-norm condition estimate (reported in RHResult).
    DenseLu,
    /// Restarted GMRES; RHResult::cond is NaN.
    Gmres { restart: usize, max_iter: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SieOptions {
    pub solver: LinearSolver,
}

impl Default for SieOptions {
    fn default() -> Self {
        Self { solver: LinearSolver::Gmres { restart: 120, max_iter: 1200 } }
    }
}

fn par_matvec(a: &DenseMatrix<f64>, x: &[C64]) -> Vec<C64> {
    let n = a.n;
    a.data.par_chunks(n).map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Collocation solve of μ − C₊[μ(I − J)] = I, i.e. Q − K[Q] = R, with the
/// default solver.
pub fn sie_solve(contour: &ContourSigma, data: &JumpData) -> Result<RHResult> {
    sie_solve_with(contour, data, &SieOptions::default())
}

pub fn sie_solve_with(contour: &ContourSigma, data: &JumpData, opts: &SieOptions) -> Result<RHResult> {
    let n = contour.len();
    if data.jumps.len() != n {
        return Err(MbError::InvalidInput(format!("{} jumps for {} nodes", data.jumps.len(), n)));
    }
    if matches!(data.class, ProblemClass::Mixed | ProblemClass::WholeLine) {
        let cert = posdef_check(data);
        if cert.real_nodes > 0 && !cert.is_positive() {
            return Err(MbError::PosdefViolated { node: cert.node, min_eig: cert.min_eigenvalue });
        }
    }
    let w: Vec<Mat2> = data.jumps.iter().map(|j| Mat2::identity() - *j).collect();
    if w.iter().all(|m| m.max_abs() == 0.0) {
        return Ok(trivial_result(contour, data));
    }
    let active: Vec<usize> = (0..n).filter(|&l| w[l].max_abs() != 0.0).collect();
    // R = C₊[W]
    let r: Vec<Mat2> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut acc = Mat2::zero();
            for &l in &active {
                acc += w[l].scale(contour.cplus(k, l));
            }
            acc
        })
        .collect();
    let r_norm = r.iter().map(|m| m.max_abs()).fold(0.0, f64::max);
    let dim = 2 * n;
    let mut a = DenseMatrix::<f64>::identity(dim);
    a.data.par_chunks_mut(2 * dim).enumerate().for_each(|(k, rows)| {
        for &l in &active {
            let ckl = contour.cplus(k, l);
            for c in 0..2 {
                for d in 0..2 {
                    rows[c * dim + 2 * l + d] -= ckl * w[l].m[d][c];
                }
            }
        }
    });
    // Solve for Q directly: rows of Q − C₊[QW] = R.
    let rhs: Vec<Vec<C64>> =
        (0..2).map(|row| (0..n).flat_map(|k| [r[k].m[row][0], r[k].m[row][1]]).collect()).collect();
    let (sols, cond) = match opts.solver {
        LinearSolver::DenseLu => {
            let lu = Lu::factor(a.clone()).ok_or(MbError::IllConditioned { cond: f64::INFINITY })?;
            let cond = lu.condition_estimate();
            if !(cond <= 1e12) {
                return Err(MbError::IllConditioned { cond });
            }
            let sols: Vec<Vec<C64>> = rhs
                .iter()
                .map(|b| {
                    let mut sol = lu.solve(b);
                    // one step of iterative refinement
                    let res = a.matvec(&sol);
                    let corr: Vec<C64> = b.iter().zip(&res).map(|(p, v)| p - v).collect();
                    for (s, d) in sol.iter_mut().zip(lu.solve(&corr)) {
                        *s += d;
                    }
                    sol
                })
                .collect();
            (sols, cond)
        }
        LinearSolver::Gmres { restart, max_iter } => {
            let mut sols = Vec::with_capacity(2);
            for b in &rhs {
                let out = gmres(|v| par_matvec(&a, v), b, None, restart, 1e-13, max_iter);
                if !out.converged {
                    return Err(MbError::IllConditioned { cond: f64::INFINITY });
                }
                sols.push(out.x);
            }
            (sols, f64::NAN)
        }
    };
    let mut q = vec![Mat2::zero(); n];
    for (row, sol) in sols.iter().enumerate() {
        for k in 0..n {
            q[k].m[row][0] = sol[2 * k];
            q[k].m[row][1] = sol[2 * k + 1];
        }
    }
    let qw: Vec<Mat2> = (0..n).map(|l| q[l] * w[l]).collect();
    let residual = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut acc = q[k] - r[k];
            for &l in &active {
                acc = acc - qw[l].scale(contour.cplus(k, l));
            }
            acc.max_abs()
        })
        .reduce(|| 0.0, f64::max);
    if residual > 1e-10 * r_norm.max(f64::MIN_POSITIVE) {
        return Err(MbError::IllConditioned { cond });
    }
    let mu: Vec<Mat2> = q.iter().map(|v| *v + Mat2::identity()).collect();
    let density: Vec<Mat2> = (0..n).map(|l| mu[l] * w[l]).collect();
    let mut m = Mat2::zero();
    for l in 0..n {
        m += density[l].scale(contour.dz[l]);
    }
    // M ≈ I − (1/2πi z)∫μW ds
    let m = m.scale(-1.0 / C64::new(0.0, 2.0 * PI));
    let e = m.get(0, 1) * C64::new(0.0, -4.0);
    Ok(RHResult { t: data.t, x: data.x, mu, jumps: data.jumps.clone(), density, m, e, residual, r_norm, cond })
}

/// E = −4i m₁₂ and m from a solved result (the same moment).
pub fn reconstruct_field(result: &RHResult) -> (Mat2, C64) {
    (result.m, result.e)
}

/// M(t, x, z) = I + (1/2πi)∫μ(I − J)/(s − z)ds for z off Σ.
pub fn evaluate_m(result: &RHResult, contour: &ContourSigma, z: C64) -> Result<Mat2> {
    if let Some((dist, floor)) = contour.closed_curve_clearance(z) {
        if dist < floor {
            return Err(MbError::TooCloseToContour { dist, floor });
        }
    }
    if z.im.abs() < 1e-12 && contour.real_nodes().len() > 0 && z.re >= contour.window.0 && z.re <= contour.window.1 {
        return Err(MbError::TooCloseToContour { dist: z.im.abs(), floor: 1e-12 });
    }
    let w = contour.cauchy_weights(z, None);
    let mut m = Mat2::identity();
    for (l, d) in result.density.iter().enumerate() {
        if w[l] != c0() {
            m += d.scale(w[l]);
        }
    }
    Ok(m)
}

/// Medium matrix from boundary values of M and their x-derivatives:
/// (πn/2)F = [M_xM⁻¹ + iηMσ₃M⁻¹]₊ − [M_xM⁻¹ + iηMσ₃M⁻¹]₋.
pub fn medium_from_boundary(
    lambda: f64,
    plus: (Mat2, Mat2),
    minus: (Mat2, Mat2),
    eta: (C64, C64),
    n: f64,
) -> Result<Mat2> {
    if n.abs() < 1e-6 {
        return Err(MbError::WeightVanishes { lambda, n });
    }
    let side = |(m, mx): (Mat2, Mat2), e: C64| -> Result<Mat2> {
        let inv = m.inverse().ok_or_else(|| MbError::InvalidInput(format!("M singular at lambda = {lambda}")))?;
        Ok(mx * inv + (m * Mat2::sigma3() * inv).scale(i() * e))
    };
    let diff = side(plus, eta.0)? - side(minus, eta.1)?;
    Ok(diff.scale_re(2.0 / (PI * n)))
}

/// (N, ρ) and the Hermiticity defect |F₁₂ − F₂₁*| of a reconstructed F.
pub fn medium_entries(f: &Mat2) -> (f64, C64, f64) {
    let n = 0.5 * (f.get(0, 0).re - f.get(1, 1).re);
    let rho = 0.5 * (f.get(0, 1) + f.get(1, 0).conj());
    (n, rho, (f.get(0, 1) - f.get(1, 0).conj()).norm())
}

/// F at real node k from three solves at x − h, x, x + h (same t).
pub fn reconstruct_f(
    results: [&RHResult; 3],
    h: f64,
    k: usize,
    contour: &ContourSigma,
    profile: &BroadeningProfile,
) -> Result<Mat2> {
    let lambda = contour.nodes[k].re;
    let [lo, mid, hi] = results;
    let mp = mid.mu[k];
    let mpx = (hi.mu[k] - lo.mu[k]).scale_re(0.5 / h);
    let mm = mid.m_minus(k);
    let mmx = (hi.m_minus(k) - lo.m_minus(k)).scale_re(0.5 / h);
    let ev = profile.eta_boundary(lambda)?;
    medium_from_boundary(lambda, (mp, mpx), (mm, mmx), (ev.eta_plus, ev.eta_minus), ev.n)
}

/// Boundary values (M₊, M₋) at a real λ inside the real window.
pub fn boundary_values(result: &RHResult, contour: &ContourSigma, lambda: f64) -> Result<(Mat2, Mat2)> {
    let (w, interp) = contour
        .boundary_weights(lambda)
        .ok_or_else(|| MbError::InvalidInput(format!("lambda = {lambda} is outside the real window")))?;
    let mut mp = Mat2::identity();
    for (l, d) in result.density.iter().enumerate() {
        if w[l] != c0() {
            mp += d.scale(w[l]);
        }
    }
    let mut jump = Mat2::zero();
    for &(l, v) in &interp {
        jump += result.density[l].scale_re(v);
    }
    Ok((mp, mp - jump))
}

/// F at any real λ from three solves at x − h, x, x + h (same t): boundary
/// values inside the real window, the smooth formula outside it.
pub fn reconstruct_f_at(
    results: [&RHResult; 3],
    h: f64,
    lambda: f64,
    contour: &ContourSigma,
    profile: &BroadeningProfile,
) -> Result<Mat2> {
    let [lo, mid, hi] = results;
    if lambda < contour.window.0 || lambda > contour.window.1 || contour.real_nodes().is_empty() {
        return reconstruct_f_smooth(mid, contour, lambda);
    }
    let (p0, m0) = boundary_values(mid, contour, lambda)?;
    let (pl, ml) = boundary_values(lo, contour, lambda)?;
    let (ph, mh) = boundary_values(hi, contour, lambda)?;
    let ev = profile.eta_boundary(lambda)?;
    medium_from_boundary(
        lambda,
        (p0, (ph - pl).scale_re(0.5 / h)),
        (m0, (mh - ml).scale_re(0.5 / h)),
        (ev.eta_plus, ev.eta_minus),
        ev.n,
    )
}

/// F at a real λ off Σ's real panels (no jump there): F = Mσ₃M⁻¹ with
/// M evaluated off the contour.
pub fn reconstruct_f_smooth(result: &RHResult, contour: &ContourSigma, lambda: f64) -> Result<Mat2> {
    let m = evaluate_m(result, contour, C64::new(lambda, 0.0))?;
    let inv = m.inverse().ok_or_else(|| MbError::InvalidInput(format!("M singular at lambda = {lambda}")))?;
    Ok(m * Mat2::sigma3() * inv)
}

/// Jumps on the pole circles: J = [[1, −c(z)/(z − z_j)], [0, 1]] about z_j
/// and [[1, 0], [c̄(z)/(z − z̄_j), 1]] about z̄_j, both clockwise, with
/// c(z) = m_j e^{−2i(zt − xη(z))} and c̄(z) = m_j* e^{2i(zt − xη(z))}.
pub fn pole_circle_jump(z: C64, pole: &Pole, upper: bool, t: f64, x: f64, profile: &BroadeningProfile) -> Mat2 {
    let theta = z * t - x * profile.eta(z);
    if upper {
        let c = pole.m * (-2.0 * i() * theta).exp();
        Mat2::new(C64::new(1.0, 0.0), -c / (z - pole.z), c0(), C64::new(1.0, 0.0))
    } else {
        let c = pole.m.conj() * (2.0 * i() * theta).exp();
        Mat2::new(C64::new(1.0, 0.0), c0(), c / (z - pole.z.conj()), C64::new(1.0, 0.0))
    }
}

/// Fills the jumps on all closed curves. `real` supplies the jump at real
/// node k; curves other than pole circles get the identity.
pub fn assemble_jumps<F: Fn(usize) -> Result<Mat2>>(
    contour: &ContourSigma,
    class: ProblemClass,
    t: f64,
    x: f64,
    poles: &[Pole],
    profile: &BroadeningProfile,
    real: F,
) -> Result<JumpData> {
    let mut jumps = Vec::with_capacity(contour.len());
    for k in 0..contour.len() {
        let j = match contour.pieces[contour.piece_of[k]] {
            Piece::Segment { .. } => real(k)?,
            Piece::Closed { kind: CurveKind::PoleCircle { pole, upper, .. }, .. } => {
                pole_circle_jump(contour.nodes[k], &poles[pole], upper, t, x, profile)
            }
            Piece::Closed { .. } => Mat2::identity(),
        };
        jumps.push(j);
    }
    Ok(JumpData { class, t, x, nodes: contour.nodes.clone(), jumps })
}

/// Pure-soliton solution M = I + Σ(A_j/(z − z_j) + B_j/(z − z̄_j)) with
/// A_j = [0 | α_j], B_j = [β_j | 0].
#[derive(Clone, Debug)]
pub struct SolitonSolution {
    pub poles: Vec<C64>,
    pub alpha: Vec<[C64; 2]>,
    pub beta: Vec<[C64; 2]>,
    pub e: C64,
}

impl SolitonSolution {
    pub fn m(&self, z: C64) -> Mat2 {
        let mut m = Mat2::identity();
        for (j, zj) in self.poles.iter().enumerate() {
            let a = Mat2::from_columns([c0(), c0()], self.alpha[j]).scale(1.0 / (z - zj));
            let b = Mat2::from_columns(self.beta[j], [c0(), c0()]).scale(1.0 / (z - zj.conj()));
            m = m + a + b;
        }
        m
    }

    /// z⁻¹ moment Σ(A_j + B_j).
    pub fn moment(&self) -> Mat2 {
        let mut m = Mat2::zero();
        for j in 0..self.poles.len() {
            m = m + Mat2::from_columns(self.beta[j], self.alpha[j]);
        }
        m
    }

    /// Medium state F = Mσ₃M⁻¹ at real λ (no jump on ℝ).
    pub fn medium(&self, lambda: f64) -> Mat2 {
        let m = self.m(C64::new(lambda, 0.0));
        m * Mat2::sigma3() * m.adjugate().scale(1.0 / m.det())
    }
}

/// Residue relations α_j = c_j M[1](z_j), β_j = −c̄_j M[2](z̄_j) with
/// c_j = m_j e^{−2i(z_j t − xη(z_j))}, solved as two 2p×2p systems.
pub fn soliton_closed_form(poles: &[Pole], profile: &BroadeningProfile, t: f64, x: f64) -> Result<SolitonSolution> {
    let p = poles.len();
    let zs: Vec<C64> = poles.iter().map(|q| q.z).collect();
    if p == 0 {
        return Ok(SolitonSolution { poles: zs, alpha: vec![], beta: vec![], e: c0() });
    }
    if zs.iter().any(|z| z.im <= 0.0) {
        return Err(MbError::InvalidInput("poles must lie in the upper half-plane".into()));
    }
    let c: Vec<C64> = poles.iter().map(|q| q.m * (-2.0 * i() * (q.z * t - x * profile.eta(q.z))).exp()).collect();
    // unknowns (α_0.., β_0..) per component; component r gets the
    // inhomogeneity from e_{r}
    let mut alpha = vec![[c0(); 2]; p];
    let mut beta = vec![[c0(); 2]; p];
    for comp in 0..2 {
        let mut a = DenseMatrix::<f64>::identity(2 * p);
        let mut rhs = vec![c0(); 2 * p];
        for j in 0..p {
            for k in 0..p {
                // α_j − c_j Σ β_k/(z_j − z̄_k) = c_j δ_{comp,0}
                a[(j, p + k)] -= c[j] / (zs[j] - zs[k].conj());
                // β_j + c̄_j Σ α_k/(z̄_j − z_k) = −c̄_j δ_{comp,1}
                a[(p + j, k)] += c[j].conj() / (zs[j].conj() - zs[k]);
            }
            if comp == 0 {
                rhs[j] = c[j];
            } else {
                rhs[p + j] = -c[j].conj();
            }
        }
        let lu = Lu::factor(a).ok_or(MbError::SingularResidueSystem { poles: p })?;
        if !(lu.condition_estimate() < 1e14) {
            return Err(MbError::SingularResidueSystem { poles: p });
        }
        let sol = lu.solve(&rhs);
        for j in 0..p {
            alpha[j][comp] = sol[j];
            beta[j][comp] = sol[p + j];
        }
    }
    let e: C64 = alpha.iter().map(|v| v[0]).sum::<C64>() * C64::new(0.0, -4.0);
    Ok(SolitonSolution { poles: zs, alpha, beta, e })
}

/// One-soliton residue constant for |E| = 4ν sech(2νt − 2x Im η(iν) + δ₀)
/// with E real positive at the peak: m = 2iν e^{δ₀}.
pub fn one_soliton_pole(nu: f64, delta0: f64) -> Pole {
    let m = C64::new(0.0, 2.0 * nu * delta0.exp());
    Pole { z: C64::new(0.0, nu), m, gamma: m, a_dot: C64::new(1.0, 0.0) }
}

/// Real-node λ's of a contour.
pub fn real_lambdas(contour: &ContourSigma) -> Vec<f64> {
    contour.real_nodes().into_iter().map(|k| contour.nodes[k].re).collect()
}

/// Which bank a real node's boundary value refers to.
pub fn bank_of_side(plus: bool) -> Bank {
    if plus {
        Bank::Plus
    } else {
        Bank::Minus
    }
}


/// Settings for the mixed-problem pipeline.
#[derive(Clone, Debug)]
pub struct MixedConfig {
    pub spectral: crate::spectral::SpectralConfig,
    /// λ-scan used to find where the reflection data live.
    pub scan: (f64, f64, usize),
    /// |r⁺| below this (relative to 1) counts as negligible.
    pub support_tol: f64,
    /// Real-panel width; None derives it from T and L.
    pub panel_width: Option<f64>,
    pub order: usize,
    pub curve_nodes: usize,
    /// Rectangle searched for zeros of a(z); None skips the search.
    pub pole_window: Option<crate::spectral::Window>,
}

impl Default for MixedConfig {
    fn default() -> Self {
        Self {
            spectral: Default::default(),
            scan: (-30.0, 30.0, 241),
            support_tol: 1e-10,
            panel_width: None,
            order: 16,
            curve_nodes: 128,
            pole_window: Some(crate::spectral::Window { re: (-4.0, 4.0), im: (0.05, 4.0) }),
        }
    }
}

/// Everything needed to solve the mixed problem at any (t, x_k): spectral
/// data on the real nodes, K± tables on the x-grid, poles and Σ.
#[derive(Clone, Debug)]
pub struct MixedProblem {
    pub profile: BroadeningProfile,
    pub contour: ContourSigma,
    pub table: crate::spectral::SpectralTable,
    pub k_table: crate::jump::MixedJumpTable,
    pub poles: Vec<Pole>,
    /// Index of each real node within `table`, by contour node.
    real_index: Vec<Option<usize>>,
}

impl MixedProblem {
    pub fn new(
        scenario: &crate::scenario::ScenarioData,
        profile: &BroadeningProfile,
        xs: &[f64],
        cfg: &MixedConfig,
    ) -> Result<Self> {
        use crate::spectral::{locate_a_zeros, spectral_table};
        scenario.validate()?;
        if profile.sign == Sign::Amplifier && profile.amplitude != 0.0 {
            return Err(MbError::InvalidInput("the mixed-problem pipeline handles attenuators".into()));
        }
        if xs.iter().any(|&x| !(0.0..=scenario.length).contains(&x)) {
            return Err(MbError::InvalidInput("x-grid must lie in [0, L]".into()));
        }
        let (lo, hi, n) = cfg.scan;
        let scan: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1).max(1) as f64).collect();
        let coarse = spectral_table(scenario, profile, &scan, &cfg.spectral)?;
        let support: Vec<f64> =
            scan.iter().zip(&coarse.r_plus).filter(|(_, r)| r.norm() > cfg.support_tol).map(|(l, _)| *l).collect();
        let step = (hi - lo) / (n - 1).max(1) as f64;
        let window = match (support.first(), support.last()) {
            (Some(&a), Some(&b)) => ((a - step).min(-2.0), (b + step).max(2.0)),
            _ => (-2.0, 2.0),
        };
        let poles = match cfg.pole_window {
            Some(w) if !scenario.is_trivial() => locate_a_zeros(scenario, profile, w, &cfg.spectral)?.poles,
            _ => Vec::new(),
        };
        let mut ccfg = ContourConfig::for_lattice(window, scenario.horizon, scenario.length);
        if let Some(w) = cfg.panel_width {
            ccfg.panel_width = w;
            ccfg.coarse_width = w;
        }
        ccfg.order = cfg.order;
        ccfg.curve_nodes = cfg.curve_nodes;
        let pole_z: Vec<C64> = poles.iter().map(|p| p.z).collect();
        let contour = contour_build(&ccfg, profile, ProblemClass::Mixed, &pole_z)?;
        let real = contour.real_nodes();
        let lambdas: Vec<f64> = real.iter().map(|&k| contour.nodes[k].re).collect();
        let table = spectral_table(scenario, profile, &lambdas, &cfg.spectral)?;
        let k_table = crate::jump::MixedJumpTable::build(scenario, profile, &table, xs, &cfg.spectral)?;
        let mut real_index = vec![None; contour.len()];
        for (m, &k) in real.iter().enumerate() {
            real_index[k] = Some(m);
        }
        Ok(Self { profile: profile.clone(), contour, table, k_table, poles, real_index })
    }

    pub fn xs(&self) -> &[f64] {
        &self.k_table.xs
    }

    pub fn jump_data(&self, t: f64, k: usize) -> Result<JumpData> {
        let x = self.k_table.xs[k];
        assemble_jumps(&self.contour, ProblemClass::Mixed, t, x, &self.poles, &self.profile, |node| {
            let m = self.real_index[node].expect("real node");
            self.k_table.jump(t, k, m)
        })
    }

    pub fn solve(&self, t: f64, k: usize) -> Result<RHResult> {
        sie_solve(&self.contour, &self.jump_data(t, k)?)
    }

    /// E at each (t, x-index), parallel over points.
    pub fn field(&self, points: &[(f64, usize)]) -> Result<Vec<C64>> {
        points.par_iter().map(|&(t, k)| self.solve(t, k).map(|r| r.e)).collect()
    }

    /// F at (t, x_k, λ of real node `node`) from solves at x_{k−1}, x_k,
    /// x_{k+1}; the x-grid must be uniform around k.
    pub fn medium(&self, t: f64, k: usize, node: usize) -> Result<Mat2> {
        let xs = &self.k_table.xs;
        if k == 0 || k + 1 >= xs.len() {
            return Err(MbError::StencilTooCoarse { axis: "x", points: xs.len() });
        }
        let h = xs[k + 1] - xs[k];
        if ((xs[k] - xs[k - 1]) - h).abs() > 1e-12 {
            return Err(MbError::InvalidInput("x-stencil around the medium point is not uniform".into()));
        }
        let r: Result<Vec<RHResult>> = [k - 1, k, k + 1].par_iter().map(|&j| self.solve(t, j)).collect();
        let r = r?;
        reconstruct_f([&r[0], &r[1], &r[2]], h, node, &self.contour, &self.profile)
    }
}
