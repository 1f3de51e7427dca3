//! Cross-module properties, with independent oracles where a value is derived.

use std::f64::consts::PI;

use nonlocal_liyau::core_ops::QuadratureSpec;
use nonlocal_liyau::field::{ExtensionRule, GridField};
use nonlocal_liyau::harnack::harnack_rhs_kn;
use nonlocal_liyau::liyau_constant::{heat_kernel_liyau_margin, liyau_constant, SearchSpec};
use nonlocal_liyau::nonlocal_ops::solve_fractional;
use nonlocal_liyau::quadrature::{integrate, Tolerance};
use nonlocal_liyau::stable_density::{build_profile, eval_g, ProfileSpec, StableDensityProfile};
use nonlocal_liyau::verifier::{reduction_suite, InstanceGenerator};
use proptest::prelude::*;

fn upsilon(z: f64) -> f64 {
    z.exp_m1() - z
}

/// `Σ_y w_y H(x,y) Ψ(log H(·,y))(x) - Pf(x) Ψ(log Pf)(x)` with `w = fν`:
/// the key inequality with the linear parts cancelled through the chain rule.
fn key_margin_upsilon_form(seed: u64) -> (f64, f64, f64) {
    let inst = InstanceGenerator::new(seed).key_instance(8).unwrap();
    let q = inst.kernel.generator().unwrap();
    let (n, m) = (inst.h.nrows(), inst.f.len());
    let x = inst.x;
    let w: Vec<f64> = inst.f.iter().zip(&inst.nu).map(|(f, v)| f * v).collect();
    let pf: Vec<f64> = (0..n).map(|z| (0..m).map(|y| inst.h[(z, y)] * w[y]).sum()).collect();
    let psi = |g: &dyn Fn(usize) -> f64| -> f64 { (0..n).filter(|&z| z != x).map(|z| q[(x, z)] * upsilon(g(z) - g(x))).sum() };
    let mut rhs = 0.0;
    for y in 0..m {
        if w[y] > 0.0 {
            rhs += w[y] * inst.h[(x, y)] * psi(&|z| inst.h[(z, y)].ln());
        }
    }
    let lhs = pf[x] * psi(&|z| pf[z].ln());
    (rhs - lhs, rhs + lhs, inst.margin().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn key_margin_matches_upsilon_oracle(seed in any::<u64>()) {
        let (oracle, scale, lib) = key_margin_upsilon_form(seed);
        prop_assert!(oracle >= -1e-12 * (1.0 + scale));
        prop_assert!((oracle - lib).abs() <= 1e-10 * (1.0 + scale), "{oracle} vs {lib}");
    }

    #[test]
    fn reduction_envelope_dominates(seed in any::<u64>()) {
        prop_assert!(reduction_suite(seed, 2).unwrap().verdict().is_pass());
    }

    #[test]
    fn kn_rhs_integral_part_decreases_in_t1(n in 2usize..=10, a in 0.01f64..3.0, b in 0.01f64..3.0, t2 in 3.5f64..8.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-3);
        let part = |t1: f64| harnack_rhs_kn(n, t1, t2).unwrap().value - 2.0 / (t2 - t1);
        prop_assert!(part(lo) > part(hi));
        prop_assert!(harnack_rhs_kn(n, lo, t2).unwrap().value.is_finite());
    }
}

fn profiles() -> Vec<StableDensityProfile> {
    [0.5, 1.0, 1.5].iter().map(|&b| build_profile(b, 1, &ProfileSpec::default()).unwrap()).collect()
}

#[test]
fn kernel_symmetry_scaling_positivity() {
    for p in profiles() {
        let beta = p.beta();
        for k in 0..200 {
            let x = -20.0 + 0.2 * k as f64 + 0.013;
            let t = 0.3 + 0.01 * k as f64;
            let g = eval_g(&p, t, &[x]).unwrap();
            assert!(g > 0.0);
            assert_eq!(g, eval_g(&p, t, &[-x]).unwrap());
            for lambda in [0.5f64, 2.0] {
                let scaled = eval_g(&p, lambda.powf(beta) * t, &[lambda * x]).unwrap() * lambda;
                assert!((scaled / g - 1.0).abs() < 1e-9, "β={beta} λ={lambda} x={x}");
            }
        }
        for d in 2..=3 {
            let q = build_profile(beta, d, &ProfileSpec::default()).unwrap();
            let x = [0.3, -1.2, 0.7];
            let g = eval_g(&q, 1.3, &x[..d]).unwrap();
            let scaled = eval_g(&q, 2f64.powf(beta) * 1.3, &x[..d].iter().map(|v| 2.0 * v).collect::<Vec<_>>()).unwrap() * 2f64.powi(d as i32);
            assert!((scaled / g - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn kernel_mass_at_several_times() {
    let tol = Tolerance { abs: 1e-14, rel: 1e-11, max_panels: 8000 };
    for p in profiles() {
        for t in [0.5, 1.0, 2.0] {
            let pts = [0.0, 1.0, 10.0, 100.0, 1e4, 1e7];
            let half = integrate(|x: f64| p.eval_g(t, x).unwrap(), &pts, tol);
            // one-sided tail of Φ beyond the rescaled cutoff
            let tail = p.mass_beyond(1e7 / t.powf(1.0 / p.beta())).unwrap();
            let mass = 2.0 * (half.value + tail);
            assert!((mass - 1.0).abs() < 1e-6, "β={} t={t}: {mass}", p.beta());
        }
    }
}

fn bump_field(a: f64, b: f64) -> GridField {
    GridField::sample(801, 20.0, ExtensionRule::Constant, |x| a + b * (-x * x).exp()).unwrap()
}

#[test]
fn solver_linearity_comparison_and_time_consistency() {
    for p in profiles() {
        let beta = p.beta();
        let u = solve_fractional(&bump_field(0.5, 1.0), beta, 0.4, &p).unwrap();
        let v = solve_fractional(&bump_field(0.2, 3.0), beta, 0.4, &p).unwrap();
        let w = solve_fractional(&bump_field(0.5 * 2.0 + 0.2 * 0.5, 2.0 + 1.5), beta, 0.4, &p).unwrap();
        for i in 0..u.len() {
            let lin = 2.0 * u.values()[i] + 0.5 * v.values()[i];
            assert!((w.values()[i] - lin).abs() <= 1e-12 * lin, "linearity at {i}");
        }
        // bump_field(0.5, 1) ≤ bump_field(0.6, 1) pointwise
        let bigger = solve_fractional(&bump_field(0.6, 1.0), beta, 0.4, &p).unwrap();
        assert!(u.values().iter().zip(bigger.values()).all(|(a, b)| *a <= b + 1e-10));

        let (s, t) = (0.3, 0.5);
        let u0 = bump_field(1.0, 1.0);
        let twice = solve_fractional(&solve_fractional(&u0, beta, s, &p).unwrap(), beta, t, &p).unwrap();
        let once = solve_fractional(&u0, beta, s + t, &p).unwrap();
        let (lo, hi) = once.central(0.8);
        for i in 0..once.len() {
            if (lo..=hi).contains(&once.x(i)) {
                let rel = (twice.values()[i] / once.values()[i] - 1.0).abs();
                assert!(rel < 1e-4, "β={beta} x={} rel {rel:e}", once.x(i));
            }
        }
    }
}

#[test]
fn heat_kernel_margin_is_self_similar_and_nearly_sharp() {
    let quad = QuadratureSpec::default();
    for beta in [0.5, 1.0, 1.5] {
        let p = build_profile(beta, 1, &ProfileSpec::default()).unwrap();
        let c = liyau_constant(beta, 1, &ProfileSpec::default(), &SearchSpec::default()).unwrap();
        for y in [0.0, 0.7, 3.0] {
            let scaled: Vec<_> = [0.5, 1.0, 2.0]
                .iter()
                .map(|&t: &f64| {
                    let m = heat_kernel_liyau_margin(&p, &c, t, y * t.powf(1.0 / beta), &quad).unwrap();
                    (m.value * t, m.error * t)
                })
                .collect();
            for w in scaled.windows(2) {
                assert!((w[0].0 - w[1].0).abs() <= w[0].1 + w[1].1 + 1e-12);
            }
            assert!(scaled.iter().all(|(m, e)| *m >= -e));
        }
        // near-equality at the maximizer of J
        let m = heat_kernel_liyau_margin(&p, &c, 1.0, c.y_star, &quad).unwrap();
        assert!(m.value <= 2.0 * m.error + 1e-12, "β={beta}: {} ± {}", m.value, m.error);
    }
}

#[test]
fn poisson_liyau_constant_from_integral_identity() {
    // ∫₀^∞ log(1+σ²)/σ² dσ = π by direct quadrature, the step behind C_LY(1,1) = 2
    let v = integrate(|s: f64| (s * s).ln_1p() / (s * s), &[1e-12, 1.0, 10.0, 1e3, 1e6, 1e9], Tolerance::default());
    assert!((v.value - PI).abs() < 1e-6);
}
