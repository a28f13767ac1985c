//! AKNS matrices of the Maxwell–Bloch Lax pair, the medium matrix
//! F = [[N, ρ], [ρ*, −N]] and its Cauchy transform G, and finite-difference
//! residuals of the field equations.

use crate::broadening::{self, Bank, BroadeningProfile};
use crate::direct::FieldState;
use crate::error::{MbError, Result};
use crate::{Mat2, C64};

/// H = ½[[0, E], [−E*, 0]].
pub fn h_matrix(e: C64) -> Mat2 {
    let z = C64::new(0.0, 0.0);
    Mat2::new(z, e * 0.5, -e.conj() * 0.5, z)
}

/// F = [[N, ρ], [ρ*, −N]].
pub fn f_matrix(n: f64, rho: C64) -> Mat2 {
    Mat2::new(C64::new(n, 0.0), rho, rho.conj(), C64::new(-n, 0.0))
}

/// (N, ρ) read back from a medium matrix.
pub fn f_entries(f: &Mat2) -> (f64, C64) {
    (0.5 * (f.get(0, 0).re - f.get(1, 1).re), 0.5 * (f.get(0, 1) + f.get(1, 0).conj()))
}

/// U = −izσ₃ − H (t-equation) and V = izσ₃ + H − iG (x-equation).
pub fn akns_matrices(z: C64, e: C64, g: &Mat2) -> (Mat2, Mat2) {
    let i = C64::new(0.0, 1.0);
    let s3 = Mat2::sigma3();
    let h = h_matrix(e);
    let u = s3.scale(-i * z) - h;
    let v = s3.scale(i * z) + h - g.scale(i);
    (u, v)
}

/// Where a Cauchy transform is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralPoint {
    OffAxis(C64),
    Boundary(f64, Bank),
}

/// Medium state at fixed (t, x) on a λ quadrature rule.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MediumSlice {
    pub lambdas: Vec<f64>,
    /// Weights w_k with Σ w_k f(λ_k) ≈ ∫ n f dλ.
    pub weights: Vec<f64>,
    pub n_pop: Vec<f64>,
    pub rho: Vec<C64>,
}

impl MediumSlice {
    /// Ground state N = 1, ρ = 0 on the profile's medium rule.
    pub fn ground(profile: &BroadeningProfile, k: usize) -> Self {
        let nodes = profile.medium_nodes(k);
        let m = nodes.len();
        Self {
            lambdas: nodes.iter().map(|p| p.0).collect(),
            weights: nodes.iter().map(|p| p.1).collect(),
            n_pop: vec![1.0; m],
            rho: vec![C64::new(0.0, 0.0); m],
        }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn f(&self, k: usize) -> Mat2 {
        f_matrix(self.n_pop[k], self.rho[k])
    }

    /// Fraction of the profile mass carried by the weights.
    pub fn coverage(&self, profile: &BroadeningProfile) -> f64 {
        let m = profile.mass().abs();
        if m == 0.0 {
            return 1.0;
        }
        self.weights.iter().map(|w| w.abs()).sum::<f64>() / m
    }
}

/// max_λ |N² + |ρ|² − 1|.
pub fn conservation_check(slice: &MediumSlice) -> f64 {
    slice
        .n_pop
        .iter()
        .zip(&slice.rho)
        .map(|(n, r)| (n * n + r.norm_sqr() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn check_coverage(slice: &MediumSlice, profile: &BroadeningProfile) -> Result<()> {
    let c = slice.coverage(profile);
    if c < 0.999 {
        return Err(MbError::GridCoverage { coverage: c });
    }
    Ok(())
}

/// G(z) = ¼∫F(s)n(s)/(s−z)ds for a medium sampled on a slice. The σ₃ part
/// uses the exact scalar transform (z − η(z))σ₃; the remainder F − σ₃ is
/// summed with the slice weights off the axis, and integrated as a
/// piecewise-linear interpolant for boundary values.
pub fn cauchy_transform_slice(slice: &MediumSlice, profile: &BroadeningProfile, at: SpectralPoint) -> Result<Mat2> {
    check_coverage(slice, profile)?;
    let s3 = Mat2::sigma3();
    match at {
        SpectralPoint::OffAxis(z) => {
            let mut g = s3.scale(z - profile.eta(z));
            for k in 0..slice.len() {
                let d = slice.f(k) - s3;
                g += d.scale(C64::new(0.25 * slice.weights[k], 0.0) / (slice.lambdas[k] - z));
            }
            Ok(g)
        }
        SpectralPoint::Boundary(lambda, bank) => {
            let ev = profile.eta_boundary(lambda)?;
            let g0 = match bank {
                Bank::Plus => ev.g_plus,
                Bank::Minus => ev.g_minus,
            };
            let mut order: Vec<usize> = (0..slice.len()).collect();
            order.sort_by(|&a, &b| slice.lambdas[a].total_cmp(&slice.lambdas[b]));
            let grid: Vec<f64> = order.iter().map(|&k| slice.lambdas[k]).collect();
            let nvals: Vec<f64> = grid.iter().map(|&l| profile.n(l)).collect();
            let dn: Vec<f64> = order.iter().zip(&nvals).map(|(&k, nv)| (slice.n_pop[k] - 1.0) * nv).collect();
            let rr: Vec<f64> = order.iter().zip(&nvals).map(|(&k, nv)| slice.rho[k].re * nv).collect();
            let ri: Vec<f64> = order.iter().zip(&nvals).map(|(&k, nv)| slice.rho[k].im * nv).collect();
            let pv_of = |vals: Vec<f64>| -> Result<(f64, f64)> {
                let p = BroadeningProfile {
                    shape: broadening::Shape::Tabulated { grid: grid.clone(), values: vals },
                    sign: profile.sign,
                    amplitude: 1.0,
                };
                Ok((p.cauchy_pv(lambda)?, p.n(lambda)))
            };
            let (pn, vn) = pv_of(dn)?;
            let (pr, vr) = pv_of(rr)?;
            let (pi_, vi) = pv_of(ri)?;
            let side = C64::new(0.0, 0.25 * std::f64::consts::PI * bank.sign());
            let d11 = C64::new(0.25 * pn, 0.0) + side * vn;
            let d12 = C64::new(0.25 * pr, 0.25 * pi_) + side * C64::new(vr, vi);
            let d21 = C64::new(0.25 * pr, -0.25 * pi_) + side * C64::new(vr, -vi);
            Ok(s3.scale(g0) + Mat2::new(d11, d12, d21, -d11))
        }
    }
}

/// G for a medium given as a function of λ; `None` means F ≡ σ₃, for which
/// G = (z − η(z))σ₃ exactly. The deviation F − σ₃ goes through adaptive
/// Cauchy / principal-value quadrature.
pub fn cauchy_transform_fn(
    f: Option<&(dyn Fn(f64) -> Mat2 + Sync)>,
    profile: &BroadeningProfile,
    at: SpectralPoint,
) -> Result<Mat2> {
    let s3 = Mat2::sigma3();
    let base = match at {
        SpectralPoint::OffAxis(z) => s3.scale(z - profile.eta(z)),
        SpectralPoint::Boundary(lambda, bank) => {
            let ev = profile.eta_boundary(lambda)?;
            s3.scale(match bank {
                Bank::Plus => ev.g_plus,
                Bank::Minus => ev.g_minus,
            })
        }
    };
    let Some(f) = f else { return Ok(base) };
    let dn = |s: f64| C64::new((f(s).get(0, 0).re - 1.0) * profile.n(s), 0.0);
    let rho = |s: f64| f(s).get(0, 1) * profile.n(s);
    let rho_c = |s: f64| f(s).get(1, 0) * profile.n(s);
    let dev = match at {
        SpectralPoint::OffAxis(z) => {
            let a = broadening::cauchy_quadrature(&dn, profile, z, broadening::AXIS_FLOOR)?;
            let b = broadening::cauchy_quadrature(&rho, profile, z, broadening::AXIS_FLOOR)?;
            let c = broadening::cauchy_quadrature(&rho_c, profile, z, broadening::AXIS_FLOOR)?;
            Mat2::new(a, b, c, -a).scale_re(0.25)
        }
        SpectralPoint::Boundary(lambda, bank) => {
            let (_, scale) = profile.features();
            let delta = 0.25 * scale.min(1.0);
            let a = broadening::cauchy_pv_quadrature(&dn, profile, lambda, delta)?;
            let b = broadening::cauchy_pv_quadrature(&rho, profile, lambda, delta)?;
            let pv = Mat2::new(C64::new(a.re, 0.0), b, b.conj(), C64::new(-a.re, 0.0));
            let fl = f(lambda) - s3;
            let side = C64::new(0.0, std::f64::consts::PI * bank.sign() * profile.n(lambda));
            (pv + fl.scale(side)).scale_re(0.25)
        }
    };
    Ok(base + dev)
}

/// Sup-norm finite-difference residuals (MB1, MB2, MB3) of a sampled
/// trajectory, using second-order central differences at interior points.
pub fn mb_residual(state: &FieldState) -> Result<[f64; 3]> {
    let nt = state.t.len();
    let nx = state.x.len();
    if nt < 3 {
        return Err(MbError::StencilTooCoarse { axis: "t", points: nt });
    }
    if nx < 3 {
        return Err(MbError::StencilTooCoarse { axis: "x", points: nx });
    }
    let m = state.lambdas.len();
    let mut r = [0.0f64; 3];
    for i in 1..nt - 1 {
        let dt = state.t[i + 1] - state.t[i - 1];
        for j in 1..nx - 1 {
            let dx = state.x[j + 1] - state.x[j - 1];
            let e = state.e(i, j);
            let e_t = (state.e(i + 1, j) - state.e(i - 1, j)) / dt;
            let e_x = (state.e(i, j + 1) - state.e(i, j - 1)) / dx;
            let avg: C64 = (0..m).map(|k| state.rho(i, j, k) * state.weights[k]).sum();
            r[0] = r[0].max((e_t + e_x - avg).norm());
            for k in 0..m {
                let lam = state.lambdas[k];
                let rho = state.rho(i, j, k);
                let n = state.n_pop(i, j, k);
                let rho_t = (state.rho(i + 1, j, k) - state.rho(i - 1, j, k)) / dt;
                let n_t = (state.n_pop(i + 1, j, k) - state.n_pop(i - 1, j, k)) / dt;
                let r2 = rho_t + C64::new(0.0, 2.0 * lam) * rho - e * n;
                let r3 = n_t + 0.5 * (e.conj() * rho + e * rho.conj()).re;
                r[1] = r[1].max(r2.norm());
                r[2] = r[2].max(r3.abs());
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broadening::Sign;

    fn cx(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn free_akns() {
        let (u, v) = akns_matrices(cx(0.7, 0.0), cx(0.0, 0.0), &Mat2::zero());
        assert!(u.dist(&Mat2::sigma3().scale(cx(0.0, -0.7))) < 1e-16);
        assert!(v.dist(&Mat2::sigma3().scale(cx(0.0, 0.7))) < 1e-16);
    }

    #[test]
    fn pure_coupling() {
        let (u, _) = akns_matrices(cx(0.0, 0.0), cx(2.0, 0.0), &Mat2::zero());
        let expect = Mat2::new(cx(0.0, 0.0), cx(-1.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0));
        assert!(u.dist(&expect) < 1e-16);
    }

    #[test]
    fn h_is_anti_hermitian() {
        let h = h_matrix(cx(1.0, 1.0));
        assert!((h + h.dagger()).max_abs() < 1e-16);
        let (u, _) = akns_matrices(cx(0.3, 0.4), cx(1.0, 1.0), &Mat2::zero());
        let herm = u + u.dagger();
        // only the σ₃ part survives: −2 Re(iz) σ₃
        assert!(herm.dist(&Mat2::sigma3().scale_re(-2.0 * (cx(0.0, 1.0) * cx(0.3, 0.4)).re)) < 1e-15);
    }

    #[test]
    fn conservation_examples() {
        let mk = |n: f64, r: f64| MediumSlice {
            lambdas: vec![0.0],
            weights: vec![-1.0],
            n_pop: vec![n],
            rho: vec![cx(r, 0.0)],
        };
        assert_eq!(conservation_check(&mk(1.0, 0.0)), 0.0);
        assert!(conservation_check(&mk(0.6, 0.8)) < 1e-15);
        assert!((conservation_check(&mk(0.6, 0.9)) - 0.17).abs() < 1e-15);
    }

    #[test]
    fn ground_medium_reduces_to_eta() {
        let p = BroadeningProfile::lorentzian(1.0, Sign::Amplifier);
        let slice = MediumSlice::ground(&p, 400);
        let z = cx(0.0, 2.0);
        let g = cauchy_transform_slice(&slice, &p, SpectralPoint::OffAxis(z)).unwrap();
        assert!(g.dist(&Mat2::sigma3().scale(z - p.eta(z))) < 1e-15);
        assert!((g.get(0, 0) - cx(0.0, 1.0 / 12.0)).norm() < 1e-15);
        let gb = cauchy_transform_slice(&slice, &p, SpectralPoint::Boundary(0.3, Bank::Plus)).unwrap();
        let ev = p.eta_boundary(0.3).unwrap();
        assert!(gb.dist(&Mat2::sigma3().scale(ev.g_plus)) < 1e-15);
    }

    #[test]
    fn fn_transform_matches_slice_for_smooth_medium() {
        let p = BroadeningProfile::lorentzian(1.0, Sign::Attenuator);
        let field = |s: f64| {
            let r = cx(0.3 * (-s * s).exp(), 0.1 * s * (-s * s).exp());
            f_matrix((1.0 - r.norm_sqr()).sqrt(), r)
        };
        let z = cx(0.4, 0.7);
        let g = cauchy_transform_fn(Some(&field), &p, SpectralPoint::OffAxis(z)).unwrap();
        let mut slice = MediumSlice::ground(&p, 4000);
        for k in 0..slice.len() {
            let (n, r) = f_entries(&field(slice.lambdas[k]));
            slice.n_pop[k] = n;
            slice.rho[k] = r;
        }
        let gs = cauchy_transform_slice(&slice, &p, SpectralPoint::OffAxis(z)).unwrap();
        assert!(g.dist(&gs) < 1e-8);
        // boundary values bracket the off-axis limit
        let l = 0.2;
        let gp = cauchy_transform_fn(Some(&field), &p, SpectralPoint::Boundary(l, Bank::Plus)).unwrap();
        let near = cauchy_transform_fn(Some(&field), &p, SpectralPoint::OffAxis(cx(l, 1e-6))).unwrap();
        assert!(gp.dist(&near) < 1e-5);
        let gm = cauchy_transform_fn(Some(&field), &p, SpectralPoint::Boundary(l, Bank::Minus)).unwrap();
        let near = cauchy_transform_fn(Some(&field), &p, SpectralPoint::OffAxis(cx(l, -1e-6))).unwrap();
        assert!(gm.dist(&near) < 1e-5);
    }

    #[test]
    fn coverage_failure() {
        let p = BroadeningProfile::lorentzian(1.0, Sign::Attenuator);
        let mut slice = MediumSlice::ground(&p, 10);
        slice.weights.truncate(5);
        slice.lambdas.truncate(5);
        slice.n_pop.truncate(5);
        slice.rho.truncate(5);
        let r = cauchy_transform_slice(&slice, &p, SpectralPoint::OffAxis(cx(0.0, 1.0)));
        assert!(matches!(r, Err(MbError::GridCoverage { .. })));
    }
}
