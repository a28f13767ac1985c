use mbrh::broadening::{BroadeningProfile, Sign};
use mbrh::direct::bloch_step;
use mbrh::jump::{jump_mixed, jump_wholeline, s0_minus, s0_plus};
use mbrh::{Mat2, C64};
use proptest::prelude::*;

fn cplx(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| C64::new(a, b))
}

fn mat(r: f64) -> impl Strategy<Value = Mat2> {
    (cplx(r), cplx(r), cplx(r), cplx(r)).prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn det_is_multiplicative(a in mat(3.0), b in mat(3.0)) {
        prop_assert!(close((a * b).det(), a.det() * b.det(), 1e-12));
    }

    #[test]
    fn inverse_is_two_sided(a in mat(3.0)) {
        prop_assume!(a.det().norm() > 1e-3);
        let inv = a.inverse().unwrap();
        prop_assert!((a * inv).dist(&Mat2::identity()) < 1e-9 / a.det().norm());
        prop_assert!((inv * a).dist(&Mat2::identity()) < 1e-9 / a.det().norm());
    }

    #[test]
    fn exp_det_is_exp_trace(a in mat(2.0)) {
        // det e^A = e^{tr A}; e^A e^{-A} = I
        let e = a.exp();
        prop_assert!(close(e.det(), a.trace().exp(), 1e-12));
        prop_assert!((e * (-a).exp()).dist(&Mat2::identity()) < 1e-10 * e.frobenius().powi(2));
    }

    #[test]
    fn exp_matches_series(a in mat(0.5)) {
        let mut term = Mat2::identity();
        let mut sum = Mat2::identity();
        for k in 1..30 {
            term = (term * a).scale_re(1.0 / k as f64);
            sum = sum + term;
        }
        prop_assert!(a.exp().dist(&sum) < 1e-13);
    }

    #[test]
    fn dagger_reverses_products(a in mat(3.0), b in mat(3.0)) {
        prop_assert!((a * b).dagger().dist(&(b.dagger() * a.dagger())) < 1e-12);
        prop_assert!(a.dagger().dagger().dist(&a) == 0.0);
    }

    #[test]
    fn bloch_step_conserves_bloch_length(
        theta in 0.0..std::f64::consts::PI,
        phase in 0.0..std::f64::consts::TAU,
        lambda in -5.0..5.0f64,
        e in cplx(4.0),
        h in 1e-4..0.5f64,
    ) {
        let n = theta.cos();
        let rho = C64::from_polar(theta.sin(), phase);
        let (n1, rho1) = bloch_step(n, rho, lambda, e, h);
        prop_assert!((n1 * n1 + rho1.norm_sqr() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn wholeline_jump_is_unimodular_and_positive(
        r in cplx(0.7),
        lambda in -6.0..6.0f64,
        t in 0.0..10.0f64,
        x in 0.0..10.0f64,
        l in 0.2..3.0f64,
    ) {
        let p = BroadeningProfile::lorentzian(l, Sign::Attenuator);
        let j = jump_wholeline(t, x, lambda, r, &p).unwrap();
        prop_assert!((j.det() - 1.0).norm() < 1e-12 * j.frobenius().powi(2));
        let (lo, _) = j.hermitian_part_eigenvalues();
        prop_assert!(lo > 0.0, "min eigenvalue {lo}");
    }

    #[test]
    fn mixed_jump_is_unimodular(
        a in cplx(2.0),
        b in cplx(2.0),
        ab in cplx(2.0),
        bb in cplx(2.0),
        lambda in -4.0..4.0f64,
        t in 0.0..5.0f64,
        x in 0.0..5.0f64,
    ) {
        // triangular S0± are unimodular, and so is J
        prop_assume!(b.norm() > 0.3 && bb.norm() > 0.3);
        let kp = s0_plus(a, b);
        let km = s0_minus(ab, bb);
        prop_assume!((kp.det() - 1.0).norm() < 1e-12 && (km.det() - 1.0).norm() < 1e-12);
        let p = BroadeningProfile::lorentzian(1.0, Sign::Attenuator);
        let ev = p.eta_boundary(lambda).unwrap();
        let j = jump_mixed(t, x, lambda, (ev.eta_plus, ev.eta_minus), &kp, &km).unwrap();
        prop_assert!((j.det() - 1.0).norm() < 1e-10 * j.frobenius().powi(2));
    }

    #[test]
    fn eta_is_an_upper_half_plane_map(re in -10.0..10.0f64, im in 0.01..10.0f64, l in 0.1..4.0f64) {
        // attenuator: eta(z) = z - 1/(4(z + il))
        let z = C64::new(re, im);
        let p = BroadeningProfile::lorentzian(l, Sign::Attenuator);
        let oracle = z - 1.0 / (4.0 * (z + C64::new(0.0, l)));
        prop_assert!(close(p.eta(z), oracle, 1e-13));
        prop_assert!(p.eta(z).im > 0.0);
    }
}
