//! Harnack bounds: the complete graph, the fractional heat equation with the
//! constants of its Li-Yau based proof made explicit, and the Gaussian
//! reference. All bounds are returned as logarithms of the constant `C` in
//! `u(t1, x1) ≤ C u(t2, x2)`.

use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::core_ops::Estimate;
use crate::error::{domain, Result};
use crate::liyau_constant::LiYauConstantResult;
use crate::markov_graph::{complete_graph, phi_kn};
use crate::nonlocal_ops::KernelSolution;
use crate::quadrature::{integrate, Tolerance};
use crate::stable_density::{ball_volume, normalizing_constant, StableDensityProfile};
use crate::verifier::{par_map, InstanceGenerator, VerificationReport, REDUCTION_TOL};

fn check_times(t1: f64, t2: f64) -> Result<()> {
    if !(t1 > 0.0 && t2 > t1 && t2.is_finite()) {
        return domain(format!("need 0 < t1 < t2, got t1 = {t1}, t2 = {t2}"));
    }
    Ok(())
}

/// `∫_{t1}^{t2} φ_n(t) dt + 2/(t2 - t1)` with `φ_n` the sharp Li-Yau bound on `K_n`.
pub fn harnack_rhs_kn(n: usize, t1: f64, t2: f64) -> Result<Estimate> {
    check_times(t1, t2)?;
    phi_kn(n, t1)?;
    // φ decays like e^{-nt}; log-spaced panel ends keep the adaptive rule cheap
    let decades = (t2 / t1).log10().ceil().max(1.0) as usize;
    let points: Vec<f64> = (0..=4 * decades).map(|k| t1 * (t2 / t1).powf(k as f64 / (4 * decades) as f64)).collect();
    let tol = Tolerance { abs: 1e-15, rel: 1e-13, max_panels: 4000 };
    let q = integrate(|t: f64| phi_kn(n, t).unwrap_or(f64::NAN), &points, tol);
    Ok(Estimate { value: q.value + 2.0 / (t2 - t1), error: q.error, diverged: !q.converged, off_grid: false })
}

/// `log u(t1,x1) - log u(t2,x2) ≤ harnack_rhs_kn` for all state pairs of
/// `u(t) = e^{tQ} u0` on `K_n`. `u0` may be a point mass.
pub fn harnack_check_kn(n: usize, u0: &[f64], t1: f64, t2: f64) -> Result<VerificationReport> {
    let start = Instant::now();
    check_times(t1, t2)?;
    let k = complete_graph(n)?;
    if u0.len() != n {
        return domain(format!("u0 has {} entries for {n} states", u0.len()));
    }
    if u0.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || !u0.iter().any(|v| *v > 0.0) {
        return domain("u0 must be non-negative, finite and not identically zero");
    }
    let rhs = harnack_rhs_kn(n, t1, t2)?;
    let v0 = DVector::from_column_slice(u0);
    let u1 = k.transition_matrix(t1)? * &v0;
    let u2 = k.transition_matrix(t2)? * &v0;
    let mut report = VerificationReport::new("harnack-kn", None).param("n", n).param("t1", t1).param("t2", t2).param("log_bound", rhs.value);
    for x1 in 0..n {
        for x2 in 0..n {
            let lhs = u1[x1].ln() - u2[x2].ln();
            report.push(format!("x1={x1},x2={x2}"), rhs.value - lhs, REDUCTION_TOL + rhs.error);
        }
    }
    report.set_runtime(start.elapsed());
    Ok(report)
}

/// The weight `η(t)`: `(t - t1)^α` before the midpoint `t*`, `(t2 - t)^α` after it.
pub fn eta(alpha: f64, t1: f64, t2: f64, t: f64) -> f64 {
    let mid = 0.5 * (t1 + t2);
    if t < mid {
        (t - t1).max(0.0).powf(alpha)
    } else {
        (t2 - t).max(0.0).powf(alpha)
    }
}

/// `∫_t^{t2} η` in closed form.
pub fn eta_tail_integral(alpha: f64, t1: f64, t2: f64, t: f64) -> f64 {
    let mid = 0.5 * (t1 + t2);
    let half = mid - t1;
    if t >= mid {
        (t2 - t).max(0.0).powf(1.0 + alpha) / (1.0 + alpha)
    } else {
        (2.0 * half.powf(1.0 + alpha) - (t - t1).max(0.0).powf(1.0 + alpha)) / (1.0 + alpha)
    }
}

/// `η(t)(t2 - t)/(1+α) - ∫_t^{t2} η`: zero on `[t*, t2]`, negative and
/// increasing on `[t1, t*)`. This is why the first averaged term contributes exactly one.
pub fn a1_factor(alpha: f64, t1: f64, t2: f64, t: f64) -> f64 {
    eta(alpha, t1, t2, t) * (t2 - t) / (1.0 + alpha) - eta_tail_integral(alpha, t1, t2, t)
}

/// `α > max(0, d/β - 1)/2`.
pub fn check_alpha(alpha: f64, beta: f64, d: usize) -> Result<()> {
    let lo = 0.5 * (d as f64 / beta - 1.0).max(0.0);
    if !(alpha > lo && alpha.is_finite()) {
        return domain(format!("alpha must exceed {lo} for beta = {beta}, d = {d}, got {alpha}"));
    }
    Ok(())
}

/// The suggested exponent `α = d/β`.
pub fn default_alpha(beta: f64, d: usize) -> f64 {
    d as f64 / beta
}

/// The explicit Harnack bound for `|x1 - x2| ≤ 1` and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionalHarnackBound {
    pub alpha: f64,
    pub beta: f64,
    pub d: usize,
    /// Times after the scaling that reduces the separation to one.
    pub t1: f64,
    pub t2: f64,
    pub c_ly: f64,
    /// `∫ η = 2Δ^{1+α}/(1+α)` with `Δ = (t2 - t1)/2`.
    pub eta_integral: f64,
    /// The four terms of the estimate of the second averaged term, before the prefactor.
    pub a2_terms: [f64; 4],
    /// The second averaged term's bound, `B`.
    pub a2_bound: f64,
    /// `M(α, d, β)` with `B ≤ M(1 + (t2 - t1)^{-1-d/β})`.
    pub m: f64,
    /// `C_LY log(t2/t1) + 1 + B`.
    pub log_bound: f64,
    /// `C_LY log(t2/t1) + 1 + M(1 + (t2 - t1)^{-1-d/β})`.
    pub log_bound_m: f64,
}

struct Constants {
    c: f64,
    omega: f64,
    q: f64,
}

fn constants(beta: f64, d: usize) -> Result<Constants> {
    Ok(Constants { c: normalizing_constant(beta, d)?, omega: ball_volume(d), q: d as f64 / beta })
}

/// `M(α, d, β)` from factoring `B = K (P' (t2-t1)^{-1-d/β} + Q)`.
pub fn harnack_m(alpha: f64, beta: f64, d: usize) -> Result<f64> {
    check_alpha(alpha, beta, d)?;
    let k = constants(beta, d)?;
    let (p, q, pref) = m_parts(alpha, beta, d, &k);
    Ok(pref * (2f64.powf(1.0 + k.q) * p).max(q))
}

/// `(P, Q, K)` with `B = K (P Δ^{-1-d/β} + Q)`.
fn m_parts(alpha: f64, beta: f64, d: usize, k: &Constants) -> (f64, f64, f64) {
    let a1 = 1.0 + alpha;
    let lead = a1.powf(1.0 + k.q) / (k.omega.powf(1.0 + k.q) * k.c.powf(k.q));
    let p = lead * (1.0 / alpha + 1.0 / (2.0 * alpha - k.q + 1.0));
    let q = 2.0 * k.c / alpha + k.c / (2.0 * alpha + 1.0);
    let pref = 2f64.powf(d as f64 + beta - 2.0) / k.c * a1 / 2.0;
    (p, q, pref)
}

/// The Harnack bound for `|x1 - x2| ≤ 1`, assembled from the proof's estimates.
pub fn harnack_bound_fractional(alpha: f64, beta: f64, d: usize, t1: f64, t2: f64, c_ly: f64) -> Result<FractionalHarnackBound> {
    check_times(t1, t2)?;
    check_alpha(alpha, beta, d)?;
    let k = constants(beta, d)?;
    let a1 = 1.0 + alpha;
    let half = 0.5 * (t2 - t1);
    let lead = a1.powf(1.0 + k.q) / (k.omega.powf(1.0 + k.q) * k.c.powf(k.q));
    let terms = [
        lead * half.powf(alpha - k.q) / alpha,
        2.0 * k.c / alpha * half.powf(a1),
        lead * half.powf(alpha - k.q) / (2.0 * alpha - k.q + 1.0),
        k.c / (2.0 * alpha + 1.0) * half.powf(a1),
    ];
    let eta_integral = 2.0 * half.powf(a1) / a1;
    let a2_bound = 2f64.powf(d as f64 + beta - 2.0) / k.c * terms.iter().sum::<f64>() / eta_integral;
    let m = harnack_m(alpha, beta, d)?;
    let base = c_ly * (t2 / t1).ln() + 1.0;
    Ok(FractionalHarnackBound {
        alpha,
        beta,
        d,
        t1,
        t2,
        c_ly,
        eta_integral,
        a2_terms: terms,
        a2_bound,
        m,
        log_bound: base + a2_bound,
        log_bound_m: base + m * (1.0 + (t2 - t1).powf(-1.0 - k.q)),
    })
}

/// The bound for any separation: with `λ = |x1 - x2| > 1` the times are
/// replaced by `t/λ^β`, since `u(λ^β t, λx)` solves the same equation.
pub fn harnack_bound_scaled(alpha: f64, beta: f64, d: usize, t1: f64, t2: f64, separation: f64, c_ly: f64) -> Result<FractionalHarnackBound> {
    if !(separation >= 0.0 && separation.is_finite()) {
        return domain(format!("separation must be finite and non-negative, got {separation}"));
    }
    let s = separation.max(1.0).powf(beta);
    harnack_bound_fractional(alpha, beta, d, t1 / s, t2 / s, c_ly)
}

/// `log u(t1,x1) - log u(t2,x2) ≤ bound` for a one-dimensional kernel solution.
pub fn harnack_check_fractional(
    sol: &KernelSolution,
    c_ly: &LiYauConstantResult,
    t1: f64,
    t2: f64,
    x1: f64,
    x2: f64,
    alpha: f64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let beta = sol.beta();
    if c_ly.beta != beta || c_ly.d != 1 {
        return domain(format!("Li-Yau constant is for (β, d) = ({}, {}), solution has ({beta}, 1)", c_ly.beta, c_ly.d));
    }
    let b = harnack_bound_scaled(alpha, beta, 1, t1, t2, (x1 - x2).abs(), c_ly.value)?;
    let lhs = sol.log_u(t1, x1)? - sol.log_u(t2, x2)?;
    // both log values carry the profile's relative error
    let err = 4.0 * (sol.profile().error_estimate() + f64::EPSILON) * (lhs.abs() + 1.0) + c_ly.error * (t2 / t1).ln();
    let mut report = VerificationReport::new("harnack-frac", None)
        .param("beta", beta)
        .param("alpha", alpha)
        .param("t1", t1)
        .param("t2", t2)
        .param("x1", x1)
        .param("x2", x2)
        .param("log_bound", b.log_bound)
        .param("m", b.m);
    report.push("log_bound", b.log_bound - lhs, err);
    report.push("log_bound_m", b.log_bound_m - lhs, err);
    report.set_runtime(start.elapsed());
    Ok(report)
}

/// `(d/2) log(t2/t1) + |x1 - x2|²/(4(t2 - t1))`, the classical heat equation bound.
pub fn gaussian_harnack_rhs(d: usize, t1: f64, t2: f64, x1: &[f64], x2: &[f64]) -> Result<f64> {
    check_times(t1, t2)?;
    if x1.len() != d || x2.len() != d {
        return domain(format!("points need {d} coordinates"));
    }
    let dist2: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * d as f64 * (t2 / t1).ln() + dist2 / (4.0 * (t2 - t1)))
}

/// Corollary-style check on `instances` random `(n, u0, t1, t2)`.
pub fn harnack_kn_suite(seed: u64, instances: usize) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut g = InstanceGenerator::new(seed);
    let mut report = VerificationReport::new("harnack-kn", Some(seed)).param("instances", instances);
    for i in 0..instances {
        let n = g.index(2, 10);
        let u0 = g.positive_vector(n);
        let t1 = g.log_uniform(1e-2, 5.0);
        let t2 = t1 + g.log_uniform(1e-2, 10.0);
        report.absorb(&format!("instance={i},n={n},"), &harnack_check_kn(n, &u0, t1, t2)?);
    }
    report.set_runtime(start.elapsed());
    Ok(report)
}

/// `instances` random fractional Harnack checks, cycling through the given
/// `(profile, C_LY)` pairs, with `α = d/β`.
pub fn harnack_fractional_suite(cases: &[(&StableDensityProfile, &LiYauConstantResult)], seed: u64, instances: usize) -> Result<VerificationReport> {
    if cases.is_empty() {
        return domain("no (profile, constant) pairs given");
    }
    let start = Instant::now();
    let mut g = InstanceGenerator::new(seed);
    let jobs: Vec<_> = (0..instances)
        .map(|i| {
            let data = g.initial_data();
            let t1 = g.log_uniform(0.05, 5.0);
            let t2 = t1 * (1.0 + g.log_uniform(1e-2, 10.0));
            (i, data, t1, t2, g.uniform(-4.0, 4.0), g.uniform(-4.0, 4.0))
        })
        .collect();
    let results = par_map(&jobs, |(i, data, t1, t2, x1, x2)| -> Result<VerificationReport> {
        let (profile, c) = cases[i % cases.len()];
        let sol = KernelSolution::new(profile, data.clone())?;
        harnack_check_fractional(&sol, c, *t1, *t2, *x1, *x2, default_alpha(profile.beta(), 1))
    });
    let mut report = VerificationReport::new("harnack-frac", Some(seed)).param("instances", instances);
    for (i, r) in results.into_iter().enumerate() {
        let r = r?;
        let beta = r.params().get("beta").cloned().unwrap_or_default();
        report.absorb(&format!("instance={i},beta={beta},"), &r);
    }
    report.set_runtime(start.elapsed());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liyau_constant::{liyau_constant, SearchSpec};
    use crate::nonlocal_ops::InitialData;
    use crate::stable_density::{build_profile, ProfileSpec};
    use proptest::prelude::*;

    #[test]
    fn kn_rhs_against_reference_quadrature() {
        // ∫₁² log coth t dt by a fine composite Simpson rule
        let n = 20_000;
        let h = 1.0 / n as f64;
        let f = |t: f64| (1.0 / t.tanh()).ln();
        let mut s = f(1.0) + f(2.0);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(1.0 + k as f64 * h);
        }
        let reference = s * h / 3.0 + 2.0;
        let e = harnack_rhs_kn(2, 1.0, 2.0).unwrap();
        assert!((e.value - reference).abs() < 1e-10, "{} vs {reference}", e.value);
        assert!(harnack_rhs_kn(2, 1.0, 1.0).is_err());
        assert!(harnack_rhs_kn(2, 0.0, 1.0).is_err());
    }

    #[test]
    fn kn_rhs_monotone_in_t1() {
        let mut last = f64::INFINITY;
        for t1 in [0.01, 0.1, 0.5, 1.0, 1.9] {
            // the integral part only; 2/(t2 - t1) grows as t1 → t2
            let v = harnack_rhs_kn(4, t1, 2.0).unwrap().value - 2.0 / (2.0 - t1);
            assert!(v < last);
            last = v;
        }
        // long gaps: the integral converges and 2/(t2 - t1) vanishes
        let far = harnack_rhs_kn(3, 1.0, 1e4).unwrap().value;
        let farther = harnack_rhs_kn(3, 1.0, 1e6).unwrap().value;
        assert!((far - farther).abs() < 1e-3);
    }

    #[test]
    fn kn_checks() {
        let r = harnack_check_kn(4, &[1.0; 4], 0.2, 0.9).unwrap();
        assert!(r.verdict().is_pass());
        let spike = harnack_check_kn(5, &[0.0, 0.0, 1.0, 0.0, 0.0], 0.2, 0.9).unwrap();
        assert!(spike.min_margin() > 0.0);
    }

    #[test]
    fn a1_factor_structure() {
        let (t1, t2) = (0.7, 2.3);
        for alpha in [0.3, 1.0, 2.5] {
            let mid = 0.5 * (t1 + t2);
            let mut last = f64::NEG_INFINITY;
            for k in 0..=200 {
                let t = t1 + (t2 - t1) * k as f64 / 200.0;
                let f = a1_factor(alpha, t1, t2, t);
                // closed-form tail integral against adaptive quadrature
                let q = integrate(|s: f64| eta(alpha, t1, t2, s), &[t, mid.max(t), t2], Tolerance { abs: 1e-15, rel: 1e-13, max_panels: 2000 });
                assert!((q.value - eta_tail_integral(alpha, t1, t2, t)).abs() < 1e-11);
                if t >= mid {
                    assert!(f.abs() < 1e-14, "{f}");
                } else {
                    assert!(f <= 0.0 && f >= last - 1e-15);
                    last = f;
                }
            }
        }
    }

    #[test]
    fn bound_assembly() {
        let b = harnack_bound_fractional(1.0, 1.0, 1, 1.0, 2.0, 2.0).unwrap();
        assert!(b.log_bound.is_finite() && b.log_bound > 0.0);
        assert!(b.log_bound <= b.log_bound_m + 1e-12);
        assert!((b.eta_integral - 2.0 * 0.5f64.powi(2) / 2.0).abs() < 1e-15);
        // α = β = d = 1, Δ = 1/2: c = 1/π, ω = 2, so B = 4π(π + 1/(2π) + π/2 + 1/(12π))
        let pi = std::f64::consts::PI;
        let expected = 2.0 * 2f64.ln() + 1.0 + 4.0 * pi * (pi + 0.5 / pi + 0.5 * pi + 1.0 / (12.0 * pi));
        assert!((b.log_bound - expected).abs() < 1e-12, "{} vs {expected}", b.log_bound);
        // divergence as t2 → t1
        let close = harnack_bound_fractional(1.0, 1.0, 1, 1.0, 1.001, 2.0).unwrap();
        assert!(close.log_bound > 1e5);
        assert!(harnack_bound_fractional(0.0, 1.0, 1, 1.0, 2.0, 2.0).is_err());
        assert!(harnack_bound_fractional(0.4, 0.5, 1, 1.0, 2.0, 2.0).is_err());
        assert!(harnack_bound_fractional(0.6, 0.5, 1, 1.0, 2.0, 2.0).is_ok());
    }

    #[test]
    fn scaling_reproduces_the_separation_exponent() {
        // with the M form, the gap-dependent term is M λ^{β+d} (t2-t1)^{-1-d/β}
        let (alpha, beta, d) = (1.5, 1.2, 1);
        let m = harnack_m(alpha, beta, d).unwrap();
        let q = d as f64 / beta;
        for lambda in [1.5, 3.0, 10.0] {
            let b = harnack_bound_scaled(alpha, beta, d, 1.0, 3.0, lambda, 0.0).unwrap();
            let expected = 1.0 + m * (1.0 + lambda.powf(beta + d as f64) * 2f64.powf(-1.0 - q));
            assert!((b.log_bound_m - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn gaussian_reference() {
        let e = std::f64::consts::E;
        assert!((gaussian_harnack_rhs(3, 1.0, e, &[0.0; 3], &[0.0; 3]).unwrap() - 1.5).abs() < 1e-15);
        assert!((gaussian_harnack_rhs(1, 1.0, 2.0, &[0.0], &[2.0]).unwrap() - (0.5 * 2f64.ln() + 1.0)).abs() < 1e-15);
        let heat = |t: f64, x: &[f64]| -> f64 {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (4.0 * std::f64::consts::PI * t).powf(-(x.len() as f64) / 2.0) * (-r2 / (4.0 * t)).exp()
        };
        // equality along x = v t, strict inequality elsewhere
        for (t1, t2, v) in [(0.5, 1.5, 0.7), (1.0, 4.0, -2.0)] {
            let (x1, x2) = ([v * t1, 0.3 * t1], [v * t2, 0.3 * t2]);
            let lhs = (heat(t1, &x1) / heat(t2, &x2)).ln();
            assert!((gaussian_harnack_rhs(2, t1, t2, &x1, &x2).unwrap() - lhs).abs() < 1e-6);
            let y2 = [x2[0] + 0.5, x2[1]];
            let lhs = (heat(t1, &x1) / heat(t2, &y2)).ln();
            assert!(gaussian_harnack_rhs(2, t1, t2, &x1, &y2).unwrap() > lhs);
        }
    }

    #[test]
    fn spike_solution_passes() {
        let p = build_profile(1.0, 1, &ProfileSpec::default()).unwrap();
        let c = liyau_constant(1.0, 1, &ProfileSpec::default(), &SearchSpec::default()).unwrap();
        let sol = KernelSolution::new(&p, InitialData::spike(0.0, 1.0)).unwrap();
        let r = harnack_check_fractional(&sol, &c, 1.0, 2.0, 0.5, 0.0, 1.0).unwrap();
        assert!(r.verdict().is_pass() && r.min_margin() > 0.0);
        let flat = KernelSolution::new(&p, InitialData::constant(1.0)).unwrap();
        assert!(harnack_check_fractional(&flat, &c, 1.0, 2.0, 0.5, -3.0, 1.0).unwrap().min_margin() > 0.0);
    }

    proptest! {
        #[test]
        fn kn_harnack_holds(seed in 0u64..100_000) {
            prop_assert!(harnack_kn_suite(seed, 1).unwrap().verdict().is_pass());
        }

        #[test]
        fn bound_decreases_with_gap_at_large_gaps(t1 in 0.1f64..5.0, gap in 0.1f64..5.0) {
            let c = harnack_bound_fractional(1.0, 1.0, 1, t1, t1 + gap, 0.0).unwrap();
            let wider = harnack_bound_fractional(1.0, 1.0, 1, t1, t1 + 1.1 * gap, 0.0).unwrap();
            prop_assert!(wider.log_bound_m <= c.log_bound_m + 1e-12);
        }
    }
}
