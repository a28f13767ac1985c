//! Jump matrices: the mixed problem through the auxiliary solutions K±, the
//! explicit whole-line jump, and the amplifier oval jumps.

use rayon::prelude::*;

use crate::broadening::{Bank, BroadeningProfile};
use crate::error::{MbError, Result};
use crate::scenario::ScenarioData;
use crate::spectral::{self, SpectralConfig, SpectralTable, Spot};
use crate::{Mat2, C64};

fn i() -> C64 {
    C64::new(0.0, 1.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ProblemClass {
    Mixed,
    WholeLine,
    AmplifierOval,
}

/// S⁺ = [[1, r⁺], [0, 1]].
pub fn s_plus(r_plus: C64) -> Mat2 {
    Mat2::new(one(), r_plus, zero(), one())
}

/// S⁻ = [[1, 0], [−r̄⁻, 1]].
pub fn s_minus(r_bar_minus: C64) -> Mat2 {
    Mat2::new(one(), zero(), -r_bar_minus, one())
}

/// S₀⁺ = [[1, 0], [a⁺/b⁺, 1]] (amplifier, inside the oval's shadow on ℝ).
pub fn s0_plus(a_plus: C64, b_plus: C64) -> Mat2 {
    Mat2::new(one(), zero(), a_plus / b_plus, one())
}

/// S₀⁻ = [[1, −ā⁻/b̄⁻], [0, 1]].
pub fn s0_minus(a_bar_minus: C64, b_bar_minus: C64) -> Mat2 {
    Mat2::new(one(), -a_bar_minus / b_bar_minus, zero(), one())
}

/// K±(x, λ): solution of the x±-equation with K±(L) = e^{iLη±σ₃}S±,
/// sampled at `xs`.
pub fn k_solve(
    scenario: &ScenarioData,
    profile: &BroadeningProfile,
    lambda: f64,
    s: Mat2,
    bank: Bank,
    xs: &[f64],
    cfg: &SpectralConfig,
) -> Result<Vec<Mat2>> {
    let spot = Spot::Real(lambda, bank);
    let eta = spectral::eta_at(profile, spot)?;
    let terminal = Mat2::exp_sigma3(i() * eta * scenario.length) * s;
    spectral::x_solution(scenario, profile, spot, terminal, xs, cfg)
}

/// J(t, x, λ) = e^{−i(λt − xη₊)σ₃} (K⁺)⁻¹K⁻ e^{i(λt − xη₋)σ₃}.
pub fn jump_mixed(t: f64, x: f64, lambda: f64, eta: (C64, C64), k_plus: &Mat2, k_minus: &Mat2) -> Result<Mat2> {
    for k in [k_plus, k_minus] {
        let dev = (k.det() - 1.0).norm();
        if dev > 1e-5 || !dev.is_finite() {
            return Err(MbError::SingularK { lambda, dev });
        }
    }
    let j0 = k_plus.adjugate() * *k_minus;
    let (ep, em) = eta;
    let left = Mat2::exp_sigma3(-i() * (lambda * t - x * ep));
    let right = Mat2::exp_sigma3(i() * (lambda * t - x * em));
    Ok(left * j0 * right)
}

/// Explicit whole-line jump
/// [[1 + |r|²e^{2ix(η₊−η₋)}, −r e^{−2iλt+2ixη₊}], [−r* e^{2iλt−2ixη₋}, 1]].
pub fn jump_wholeline(t: f64, x: f64, lambda: f64, r: C64, profile: &BroadeningProfile) -> Result<Mat2> {
    let ev = profile.eta_boundary(lambda)?;
    Ok(wholeline_from_eta(t, x, lambda, r, ev.eta_plus, ev.eta_minus))
}

pub fn wholeline_from_eta(t: f64, x: f64, lambda: f64, r: C64, ep: C64, em: C64) -> Mat2 {
    let d = (2.0 * i() * x * (ep - em)).exp();
    Mat2::new(
        one() + d * r.norm_sqr(),
        -r * (i() * (-2.0 * lambda * t) + 2.0 * i() * x * ep).exp(),
        -r.conj() * (i() * (2.0 * lambda * t) - 2.0 * i() * x * em).exp(),
        one(),
    )
}

/// Oval jump at z on γ (`upper`) or γ̄, conjugated by e^{−i(zt − xη(z))σ₃}.
/// On γ: J₀ = [[0, −b/a], [a/b, 1]] with a, b continued to z.
/// On γ̄: J₀ = [[1, −ā/b̄], [b̄/ā, 0]] with ā(z) = a(z*)*, b̄(z) = b(z*)*.
pub fn jump_oval(z: C64, t: f64, x: f64, a: C64, b: C64, eta: C64, upper: bool) -> Result<Mat2> {
    for (which, v) in [("a", a), ("b", b)] {
        if v.norm() < 1e-8 {
            return Err(MbError::RegularityViolation { re: z.re, im: z.im, which, value: v.norm() });
        }
    }
    let j0 = if upper {
        Mat2::new(zero(), -b / a, a / b, one())
    } else {
        Mat2::new(one(), -a / b, b / a, zero())
    };
    let theta = z * t - x * eta;
    Ok(Mat2::exp_sigma3(-i() * theta) * j0 * Mat2::exp_sigma3(i() * theta))
}

/// Jump matrices at the nodes of a contour for one (t, x).
#[derive(Clone, Debug)]
pub struct JumpData {
    pub class: ProblemClass,
    pub t: f64,
    pub x: f64,
    pub nodes: Vec<C64>,
    pub jumps: Vec<Mat2>,
}

impl JumpData {
    pub fn identity(class: ProblemClass, t: f64, x: f64, nodes: Vec<C64>) -> Self {
        let jumps = vec![Mat2::identity(); nodes.len()];
        Self { class, t, x, nodes, jumps }
    }

    pub fn det_deviation(&self) -> f64 {
        self.jumps.iter().map(|j| (j.det() - 1.0).norm()).fold(0.0, f64::max)
    }

    /// max ‖J⁻¹(z) − J†(z*)‖ over off-axis nodes whose conjugate is also a
    /// node (matched within `tol`).
    pub fn schwartz_deviation(&self, tol: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, z) in self.nodes.iter().enumerate() {
            if z.im.abs() <= tol {
                continue;
            }
            let zc = z.conj();
            if let Some(l) = self.nodes.iter().position(|w| (w - zc).norm() <= tol) {
                let inv = self.jumps[k].adjugate();
                worst = worst.max(inv.dist(&self.jumps[l].dagger()));
            }
        }
        worst
    }

    pub fn max_deviation_from_identity(&self) -> f64 {
        self.jumps.iter().map(|j| j.dist(&Mat2::identity())).fold(0.0, f64::max)
    }

    /// Node, Re/Im of the four entries, one row per node.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,re_z,im_z,re_j11,im_j11,re_j12,im_j12,re_j21,im_j21,re_j22,im_j22\n");
        for (k, (z, j)) in self.nodes.iter().zip(&self.jumps).enumerate() {
            s.push_str(&format!("{k},{:.16e},{:.16e}", z.re, z.im));
            for e in j.m.iter().flatten() {
                s.push_str(&format!(",{:.16e},{:.16e}", e.re, e.im));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosdefCertificate {
    pub min_eigenvalue: f64,
    pub node: usize,
    pub real_nodes: usize,
}

impl PosdefCertificate {
    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue > 0.0
    }
}

/// Smallest Hermitian-part eigenvalue of J over the real-axis nodes.
pub fn posdef_check(data: &JumpData) -> PosdefCertificate {
    let mut cert = PosdefCertificate { min_eigenvalue: f64::INFINITY, node: 0, real_nodes: 0 };
    for (k, (z, j)) in data.nodes.iter().zip(&data.jumps).enumerate() {
        if z.im != 0.0 {
            continue;
        }
        cert.real_nodes += 1;
        let (lo, _) = j.hermitian_part_eigenvalues();
        if lo < cert.min_eigenvalue {
            cert.min_eigenvalue = lo;
            cert.node = k;
        }
    }
    cert
}

/// K± tables for the mixed problem on a real λ-grid and an x-grid, with
/// η± cached per λ. J at any (t, x_k, λ_m) is then a cheap product.
#[derive(Clone, Debug)]
pub struct MixedJumpTable {
    pub lambdas: Vec<f64>,
    pub xs: Vec<f64>,
    pub eta: Vec<(C64, C64)>,
    /// k_plus[m][k] = K⁺(x_k, λ_m)
    pub k_plus: Vec<Vec<Mat2>>,
    pub k_minus: Vec<Vec<Mat2>>,
}

impl MixedJumpTable {
    /// Integrates K± for every λ of the spectral table (parallel over λ).
    pub fn build(
        scenario: &ScenarioData,
        profile: &BroadeningProfile,
        table: &SpectralTable,
        xs: &[f64],
        cfg: &SpectralConfig,
    ) -> Result<Self> {
        let rows: Result<Vec<_>> = table
            .lambdas
            .par_iter()
            .enumerate()
            .map(|(m, &l)| {
                let ev = profile.eta_boundary(l)?;
                let kp = k_solve(scenario, profile, l, s_plus(table.r_plus[m]), Bank::Plus, xs, cfg)?;
                let km = k_solve(scenario, profile, l, s_minus(table.r_bar_minus[m]), Bank::Minus, xs, cfg)?;
                Ok(((ev.eta_plus, ev.eta_minus), kp, km))
            })
            .collect();
        let rows = rows?;
        let mut out = Self {
            lambdas: table.lambdas.clone(),
            xs: xs.to_vec(),
            eta: Vec::with_capacity(rows.len()),
            k_plus: Vec::with_capacity(rows.len()),
            k_minus: Vec::with_capacity(rows.len()),
        };
        for (e, kp, km) in rows {
            out.eta.push(e);
            out.k_plus.push(kp);
            out.k_minus.push(km);
        }
        Ok(out)
    }

    /// Index of `x` in the x-grid.
    pub fn x_index(&self, x: f64) -> Option<usize> {
        self.xs.iter().position(|&v| (v - x).abs() <= 1e-12 * (1.0 + x.abs()))
    }

    pub fn jump(&self, t: f64, k: usize, m: usize) -> Result<Mat2> {
        jump_mixed(t, self.xs[k], self.lambdas[m], self.eta[m], &self.k_plus[m][k], &self.k_minus[m][k])
    }

    pub fn jump_data(&self, t: f64, k: usize) -> Result<JumpData> {
        let jumps: Result<Vec<Mat2>> = (0..self.lambdas.len()).map(|m| self.jump(t, k, m)).collect();
        Ok(JumpData {
            class: ProblemClass::Mixed,
            t,
            x: self.xs[k],
            nodes: self.lambdas.iter().map(|&l| C64::new(l, 0.0)).collect(),
            jumps: jumps?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broadening::Sign;

    #[test]
    fn trivial_mixed_jump_is_identity() {
        let p = BroadeningProfile::lorentzian(1.0, Sign::Attenuator);
        let sc = ScenarioData::trivial(5.0, 10.0);
        let cfg = SpectralConfig::default();
        let xs = [0.0, 2.5, 5.0];
        for &l in &[-3.0, 0.0, 0.7] {
            let kp = k_solve(&sc, &p, l, Mat2::identity(), Bank::Plus, &xs, &cfg).unwrap();
            let km = k_solve(&sc, &p, l, Mat2::identity(), Bank::Minus, &xs, &cfg).unwrap();
            let ev = p.eta_boundary(l).unwrap();
            for k in 0..3 {
                let j = jump_mixed(3.0, xs[k], l, (ev.eta_plus, ev.eta_minus), &kp[k], &km[k]).unwrap();
                assert!(j.dist(&Mat2::identity()) < 1e-12);
            }
        }
    }

    #[test]
    fn trivial_medium_mixed_equals_wholeline() {
        // with w± = e^{ixη±σ₃} the mixed jump reduces to the explicit one
        let p = BroadeningProfile::lorentzian(1.0, Sign::Attenuator);
        let sc = ScenarioData::trivial(5.0, 10.0);
        let cfg = SpectralConfig::default();
        let r = C64::new(0.3, -0.2);
        let l = 0.4;
        let xs = [1.5];
        let kp = k_solve(&sc, &p, l, s_plus(r), Bank::Plus, &xs, &cfg).unwrap();
        let km = k_solve(&sc, &p, l, s_minus(r.conj()), Bank::Minus, &xs, &cfg).unwrap();
        let ev = p.eta_boundary(l).unwrap();
        let jm = jump_mixed(2.0, 1.5, l, (ev.eta_plus, ev.eta_minus), &kp[0], &km[0]).unwrap();
        let jw = jump_wholeline(2.0, 1.5, l, r, &p).unwrap();
        assert!(jm.dist(&jw) < 1e-13);
    }

    #[test]
    fn wholeline_posdef_example() {
        let p = BroadeningProfile::lorentzian(1.0, Sign::Attenuator);
        let j = jump_wholeline(0.0, 0.0, 0.0, C64::new(0.5, 0.0), &p).unwrap();
        assert!(j.dist(&Mat2::new(C64::new(1.25, 0.0), C64::new(-0.5, 0.0), C64::new(-0.5, 0.0), one())) < 1e-15);
        let data = JumpData { class: ProblemClass::WholeLine, t: 0.0, x: 0.0, nodes: vec![zero()], jumps: vec![j] };
        let cert = posdef_check(&data);
        // eigenvalue arithmetic: 1.125 − √(0.25 + 0.125²)
        let expect = 1.125 - (0.25f64 + 0.015625).sqrt();
        assert!((cert.min_eigenvalue - expect).abs() < 1e-14);
        assert!((expect - 0.6096).abs() < 1e-4);
    }

    #[test]
    fn wholeline_attenuation_ratio() {
        // n(λ) = −(1/π)/(λ² + 1): off-diagonal ratio between x = 10 and x = 5
        let p = BroadeningProfile::lorentzian(1.0, Sign::Attenuator);
        let r = C64::new(0.2, 0.1);
        let j5 = jump_wholeline(0.0, 5.0, 0.0, r, &p).unwrap();
        let j10 = jump_wholeline(0.0, 10.0, 0.0, r, &p).unwrap();
        let ratio = j10.get(0, 1).norm() / j5.get(0, 1).norm();
        assert!((ratio - (-2.5f64).exp()).abs() < 1e-12);
        let pa = BroadeningProfile::lorentzian(1.0, Sign::Amplifier);
        let a5 = jump_wholeline(0.0, 5.0, 0.0, r, &pa).unwrap();
        let a10 = jump_wholeline(0.0, 10.0, 0.0, r, &pa).unwrap();
        assert!((a10.get(0, 1).norm() / a5.get(0, 1).norm() - 2.5f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn oval_jump_forms() {
        let a = C64::from_polar(1.0, 0.3);
        let b = C64::from_polar(1.0, -1.1);
        let z = C64::new(0.2, 0.4);
        let j = jump_oval(z, 0.0, 0.0, a, b, z, true).unwrap();
        assert!(j.dist(&Mat2::new(zero(), -b / a, a / b, one())) < 1e-15);
        assert!((j.det() - 1.0).norm() < 1e-15);
        let jb = jump_oval(z.conj(), 0.0, 0.0, a.conj(), b.conj(), z.conj(), false).unwrap();
        assert!(jb.dist(&Mat2::new(one(), -a.conj() / b.conj(), b.conj() / a.conj(), zero())) < 1e-15);
        // Schwartz: J⁻¹(z*) = J(z)†
        assert!(jb.adjugate().dist(&j.dagger()) < 1e-14);
        assert!(matches!(jump_oval(z, 0.0, 0.0, zero(), b, z, true), Err(MbError::RegularityViolation { .. })));
    }

    #[test]
    fn singular_k_rejected() {
        let k = Mat2::identity().scale_re(2.0);
        let r = jump_mixed(0.0, 0.0, 0.0, (one(), one()), &k, &Mat2::identity());
        assert!(matches!(r, Err(MbError::SingularK { .. })));
    }
}
