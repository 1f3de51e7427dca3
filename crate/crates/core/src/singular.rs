//! Integrals of the form `∫₀^∞ S(y) y^(-1-β) dy` where `S` is even with
//! `S(y) = O(y²)` at the origin and grows at most logarithmically at infinity.
//!
//! The range is split at `δ` and `R`. Below `δ` the integrand is replaced by
//! a fitted even polynomial `s₂y² + s₄y⁴ + s₆y⁶` and integrated exactly; the
//! middle range is integrated adaptively in the variable `ln y`; beyond `R`
//! the tail of `S` is modelled (log-linear or periodic) and integrated in
//! closed form. Each part contributes to the error estimate.

use crate::quadrature::{integrate, Tolerance};

/// How `S` behaves beyond the outer cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// `S(y) ≈ A + B ln y`, fitted at `R` and `eR`, checked at `e²R`.
    LogLinear,
    /// `S` is periodic with the given period.
    Periodic(f64),
    /// `S` vanishes beyond `R`.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpec {
    pub beta: f64,
    pub delta: f64,
    pub cutoff: f64,
    /// Points in `(δ, R)` where `S` is less smooth; they become panel ends.
    pub breakpoints: Vec<f64>,
    /// Initial panels are at most this wide in `y` up to `fine_until`.
    pub fine_width: f64,
    pub fine_until: f64,
    pub tail: TailModel,
    pub tol: Tolerance,
    /// Typical magnitude of the terms that cancel inside `S`, for rounding bounds.
    pub scale: f64,
}

impl SingularSpec {
    pub fn new(beta: f64, delta: f64, cutoff: f64) -> Self {
        Self {
            beta,
            delta,
            cutoff,
            breakpoints: Vec::new(),
            fine_width: f64::INFINITY,
            fine_until: 0.0,
            tail: TailModel::LogLinear,
            tol: Tolerance { abs: 1e-13, rel: 1e-11, max_panels: 20_000 },
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularResult {
    pub value: f64,
    pub error: f64,
    pub inner: f64,
    pub middle: f64,
    pub tail: f64,
    pub converged: bool,
    pub evaluations: usize,
}

fn inner_part(s: &dyn Fn(f64) -> f64, beta: f64, delta: f64, scale: f64) -> (f64, f64) {
    let u1 = delta * delta;
    let (u2, u3) = (u1 / 4.0, u1 / 16.0);
    let q1 = s(delta) / u1;
    let q2 = s(0.5 * delta) / u2;
    let q3 = s(0.25 * delta) / u3;
    let p2 = delta.powf(2.0 - beta) / (2.0 - beta);
    let p4 = delta.powf(4.0 - beta) / (4.0 - beta);
    let p6 = delta.powf(6.0 - beta) / (6.0 - beta);
    // two-term fit from q1, q2
    let b2 = (q1 - q2) / (u1 - u2);
    let a2 = q1 - b2 * u1;
    let two = a2 * p2 + b2 * p4;
    // three-term fit through all samples (Newton form in u)
    let d12 = (q1 - q2) / (u1 - u2);
    let d23 = (q2 - q3) / (u2 - u3);
    let c = (d12 - d23) / (u1 - u3);
    let b = d23 - c * (u2 + u3);
    let a = q3 - b * u3 - c * u3 * u3;
    let three = a * p2 + b * p4 + c * p6;
    let rounding = 200.0 * f64::EPSILON * scale.abs().max(f64::MIN_POSITIVE) / u3 * p2;
    (three, (three - two).abs() + rounding)
}

fn tail_part(s: &dyn Fn(f64) -> f64, spec: &SingularSpec) -> (f64, f64, usize) {
    let beta = spec.beta;
    let r = spec.cutoff;
    let rb = r.powf(-beta);
    match spec.tail {
        TailModel::Zero => (0.0, 0.0, 0),
        TailModel::LogLinear => {
            let l = r.ln();
            let s1 = s(r);
            let s2 = s(r * std::f64::consts::E);
            let s3 = s(r * std::f64::consts::E * std::f64::consts::E);
            let b = s2 - s1;
            let a = s1 - b * l;
            let value = a * rb / beta + b * rb * (beta * l + 1.0) / (beta * beta);
            let resid = (s3 - (a + b * (l + 2.0))).abs();
            let rounding = 8.0 * f64::EPSILON * spec.scale.abs() * rb / beta * (1.0 + l.abs());
            (value, 2.0 * resid * rb / beta + rounding, 3)
        }
        TailModel::Periodic(p) => {
            let pts: Vec<f64> = (0..=16).map(|k| r + p * k as f64 / 16.0).collect();
            let q = integrate(s, &pts, Tolerance { abs: 1e-15, rel: 1e-13, max_panels: 400 });
            let mean = q.value / p;
            let mut dev: f64 = 0.0;
            for k in 0..64 {
                dev = dev.max((s(r + p * k as f64 / 64.0) - mean).abs());
            }
            let value = mean * rb / beta;
            let err = 2.0 * p * dev * r.powf(-1.0 - beta) + q.error / p * rb / beta;
            (value, err, q.evaluations + 64)
        }
    }
}

/// Evaluates `∫₀^∞ S(y) y^(-1-β) dy`.
pub fn integrate_singular(s: &dyn Fn(f64) -> f64, spec: &SingularSpec) -> SingularResult {
    let beta = spec.beta;
    assert!(beta > 0.0 && beta < 2.0);
    assert!(spec.delta > 0.0 && spec.cutoff > spec.delta);
    let (inner, inner_err) = inner_part(s, beta, spec.delta, spec.scale);

    let s0 = spec.delta.ln();
    let s1 = spec.cutoff.ln();
    let mut pts: Vec<f64> = Vec::new();
    let n_log = ((s1 - s0) / 0.5).ceil().max(1.0) as usize;
    for k in 0..=n_log {
        pts.push(s0 + (s1 - s0) * k as f64 / n_log as f64);
    }
    for &b in &spec.breakpoints {
        if b > spec.delta && b < spec.cutoff {
            pts.push(b.ln());
        }
    }
    if spec.fine_width.is_finite() && spec.fine_until > spec.delta {
        let top = spec.fine_until.min(spec.cutoff);
        let n = ((top - spec.delta) / spec.fine_width).ceil() as usize;
        for k in 1..n {
            pts.push((spec.delta + k as f64 * spec.fine_width).ln());
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let g = |v: f64| {
        let y = v.exp();
        s(y) * (-beta * v).exp()
    };
    let mut tol = spec.tol;
    tol.max_panels = tol.max_panels.max(2 * pts.len());
    let mid = integrate(g, &pts, tol);

    let (tail, tail_err, tail_evals) = tail_part(s, spec);
    let value = inner + mid.value + tail;
    let error = inner_err + mid.error + tail_err;
    SingularResult {
        value,
        error,
        inner,
        middle: mid.value,
        tail,
        converged: mid.converged && value.is_finite() && error.is_finite(),
        evaluations: mid.evaluations + 3 + tail_evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_second_difference() {
        // symbol of the fractional Laplacian at ξ = 1: 2c∫₀^∞ (1 - cos y) y^{-1-β} dy = 1
        for beta in [0.5, 1.0, 1.5] {
            let spec = SingularSpec { tail: TailModel::Periodic(2.0 * PI), fine_width: PI / 2.0, fine_until: 4000.0 * PI, ..SingularSpec::new(beta, 0.05, 4000.0 * PI) };
            let r = integrate_singular(&|y: f64| 1.0 - y.cos(), &spec);
            let c = crate::stable_density::normalizing_constant(beta, 1).unwrap();
            let v = 2.0 * c * r.value;
            assert!((v - 1.0).abs() < 1e-6, "beta={beta} v={v} err={}", r.error);
        }
    }

    #[test]
    fn log_growth_tail() {
        // S(y) = ln(1 + y²): ∫₀^∞ ln(1+y²) y^{-2} dy = π
        let spec = SingularSpec::new(1.0, 0.05, 1e6);
        let r = integrate_singular(&|y: f64| (y * y).ln_1p(), &spec);
        assert!((r.value - PI).abs() < 1e-8, "{} {}", r.value, r.error);
        assert!(r.error < 1e-6);
    }
}
