//! Isotropic β-stable heat kernels `G(t, x) = t^(-d/β) Φ(|x| t^(-1/β))`.
//!
//! For β = 1 the Poisson kernel is used in closed form. Otherwise the radial
//! profile Φ is tabulated: small and moderate radii come from Fourier
//! inversion by adaptive quadrature, large radii from the convergent (β < 1)
//! or asymptotic (β > 1) expansion `Φ(r) ~ Σ a_k r^(-kβ-d)`. The table holds
//! `ln Φ` on nodes uniform in `u = asinh r` and is interpolated by a clamped
//! cubic spline in `u`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{domain, Error, Result};
use crate::quadrature::{gauss_legendre, gk21, integrate, Tolerance};
use crate::special::{bessel_j0, bessel_k0, gamma, ln_gamma};
use crate::spline::{EndCondition, UniformSpline};

/// Below this β the inversion integral is rotated onto the imaginary axis.
const ROTATION_THRESHOLD: f64 = 0.75;
const FORMAT_HEADER: &str = "# stable-density-profile v1";

/// `c_{β,d}` of the jump kernel `c |h|^(-d-β)` of `-(-Δ)^(β/2)`.
pub fn normalizing_constant(beta: f64, d: usize) -> Result<f64> {
    check_beta(beta)?;
    if d == 0 {
        return domain("dimension must be at least 1");
    }
    // |Γ(-β/2)| = Γ(1-β/2) / (β/2)
    let df = d as f64;
    Ok(2f64.powf(beta) * gamma(0.5 * (df + beta)) * 0.5 * beta / (PI.powf(0.5 * df) * gamma(1.0 - 0.5 * beta)))
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    let df = d as f64;
    PI.powf(0.5 * df) / gamma(0.5 * df + 1.0)
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    d as f64 * ball_volume(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    pub c: f64,
    pub omega: f64,
}

impl KernelConstants {
    pub fn new(beta: f64, d: usize) -> Result<Self> {
        Ok(Self { c: normalizing_constant(beta, d)?, omega: ball_volume(d) })
    }
}

/// Poisson kernel profile `Φ₁(r)`.
pub fn poisson_profile(d: usize, r: f64) -> f64 {
    let e = 0.5 * (d as f64 + 1.0);
    gamma(e) / PI.powf(e) * (1.0 + r * r).powf(-e)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 2.0) {
        return domain(format!("beta must lie in (0, 2), got {beta}"));
    }
    Ok(())
}

fn check_dim(d: usize) -> Result<()> {
    if !(1..=3).contains(&d) {
        return domain(format!("dimension must be 1, 2 or 3, got {d}"));
    }
    Ok(())
}

/// `Φ(0)` from the small-radius series.
pub fn profile_at_origin(beta: f64, d: usize) -> f64 {
    let df = d as f64;
    gamma(df / beta) / (beta * 2f64.powf(df - 1.0) * PI.powf(0.5 * df) * gamma(0.5 * df))
}

/// `ln` of the envelope `|a_k| / |sin(kπβ/2)|` of the large-radius expansion.
fn tail_envelope(beta: f64, d: usize, k: usize) -> f64 {
    let kf = k as f64;
    let df = d as f64;
    kf * beta * 2f64.ln() + ln_gamma(0.5 * kf * beta + 1.0) + ln_gamma(0.5 * (kf * beta + df))
        - ln_gamma(kf + 1.0)
        - (0.5 * df + 1.0) * PI.ln()
}

fn tail_sine(beta: f64, k: usize) -> f64 {
    let s = (k as f64 * PI * beta / 2.0).sin();
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    // exact zeros (β rational with small denominator) come out as rounding noise
    if s.abs() < 1e-12 {
        0.0
    } else {
        sign * s
    }
}

/// Coefficient `a_k` of `r^(-kβ-d)` in the large-radius expansion.
pub fn tail_coefficient(beta: f64, d: usize, k: usize) -> f64 {
    tail_sine(beta, k) * tail_envelope(beta, d, k).exp()
}

/// Large-radius expansion summed until the term envelope drops below
/// `rel_target` relative to the sum.
///
/// Returns `(Φ, Φ', relative error, terms used)` or `None` when the envelope
/// starts growing first (asymptotic regime not yet reached) or the sum
/// suffers cancellation.
fn tail_series(beta: f64, d: usize, r: f64, rel_target: f64) -> Option<(f64, f64, f64, usize)> {
    let df = d as f64;
    let lr = r.ln();
    let mut sum = 0.0;
    let mut dsum = 0.0;
    let mut abs_sum = 0.0;
    let mut prev_env = f64::INFINITY;
    for k in 1..2000 {
        let e = k as f64 * beta + df;
        let env = (tail_envelope(beta, d, k) - e * lr).exp();
        if env > prev_env {
            return None;
        }
        prev_env = env;
        let term = tail_sine(beta, k) * env;
        sum += term;
        dsum -= term * e / r;
        abs_sum += term.abs();
        if k >= 2 && env < rel_target * 0.1 * sum.abs() {
            if abs_sum > 8.0 * sum.abs() || sum <= 0.0 {
                return None;
            }
            return Some((sum, dsum, (env + abs_sum * 1e-16) / sum, k));
        }
    }
    None
}

fn expm1_ratio(z: f64) -> f64 {
    // (1 - e^{-z}) / z
    if z < 1e-8 {
        1.0 - 0.5 * z
    } else {
        -(-z).exp_m1() / z
    }
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// Tolerance relative to `∫|f|`, the scale of the rounding noise in an
/// oscillatory integral.
fn node_tolerance<F: Fn(f64) -> f64>(f: &F, pts: &[f64]) -> Tolerance {
    let l1: f64 = pts.windows(2).map(|w| gk21(&|x: f64| f(x).abs(), w[0], w[1]).0).sum();
    Tolerance { abs: 5e-14 * l1, rel: 1e-13, max_panels: 20_000 }
}

/// Fourier inversion of `exp(-|ξ|^β)` at radius `r` by adaptive quadrature.
/// Returns `(Φ(r), error estimate)`.
pub fn density_by_quadrature(beta: f64, d: usize, r: f64) -> Result<(f64, f64)> {
    check_beta(beta)?;
    check_dim(d)?;
    if r < 0.0 || !r.is_finite() {
        return domain("radius must be finite and non-negative");
    }
    if d == 2 && r == 0.0 {
        return Ok((profile_at_origin(beta, d), 0.0));
    }
    let q = if beta < ROTATION_THRESHOLD { rotated(beta, d, r) } else { direct(beta, d, r) };
    Ok(q)
}

fn rotated(beta: f64, d: usize, r: f64) -> (f64, f64) {
    let (sn, c) = (0.5 * PI * beta).sin_cos();
    let inv = 1.0 / beta;
    let p = d as f64 * inv - 1.0;
    let mut vmax: f64 = 45.0 / c;
    for _ in 0..30 {
        vmax = (45.0 + p * vmax.max(1.0).ln()) / c;
    }
    let f = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let s = v.powf(inv);
        let w = v.powf(p) * (-c * v).exp() * (sn * v).sin();
        match d {
            1 => w * (-r * s).exp(),
            2 => w * bessel_k0(r * s),
            _ => w * expm1_ratio(r * s),
        }
    };
    let pre = match d {
        1 => 1.0 / (PI * beta),
        2 => 1.0 / (PI * PI * beta),
        _ => -1.0 / (2.0 * PI * PI * beta),
    };
    let mut pts = vec![0.0, 1e-4, 1e-3, 1e-2, 0.1];
    let half = 0.5 * PI / sn;
    let mut v = half;
    while v < vmax {
        pts.push(v);
        v += half;
    }
    pts.push(vmax);
    if r > 0.0 {
        for j in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let b = (j / r).powf(beta);
            if b < vmax {
                pts.push(b);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let q = integrate(f, &pts, node_tolerance(&f, &pts));
    (pre * q.value, pre.abs() * q.error)
}

fn direct(beta: f64, d: usize, r: f64) -> (f64, f64) {
    let rho_max = 50f64.powf(1.0 / beta);
    let f = |rho: f64| {
        let w = (-rho.powf(beta)).exp();
        match d {
            1 => w * (rho * r).cos(),
            2 => rho * w * bessel_j0(rho * r),
            _ => rho * rho * w * sinc(rho * r),
        }
    };
    let pre = match d {
        1 => 1.0 / PI,
        2 => 1.0 / (2.0 * PI),
        _ => 1.0 / (2.0 * PI * PI),
    };
    let mut pts = vec![0.0, 1e-3, 1e-2, 0.1, 1.0];
    let width = if r > 0.0 { (0.5 * PI / r).min(1.0) } else { 1.0 };
    let mut x = 1.0 + width;
    while x < rho_max {
        pts.push(x);
        x += width;
    }
    pts.push(rho_max);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let q = integrate(f, &pts, node_tolerance(&f, &pts));
    (pre * q.value, pre * q.error)
}

/// Resolution and reach of a tabulated profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSpec {
    /// Node spacing in `u = asinh(r / a)`, where `a` is the core radius of Φ.
    pub u_step: f64,
    /// Relative accuracy required of the large-radius expansion.
    pub tail_rel: f64,
    /// Largest radius at which quadrature may still be needed.
    pub max_tail_radius: f64,
    /// Number of off-node interpolation checks.
    pub checks: usize,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self { u_step: 0.005, tail_rel: 1e-13, max_tail_radius: 200.0, checks: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// The Poisson kernel, evaluated exactly.
    ClosedForm,
    Tabulated,
}

/// `Φ(r) ≈ A r^(-d-β) (1 + Σ_{k≥2} ρ_k (r0/r)^((k-1)β))` beyond the table.
#[derive(Debug, Clone, PartialEq)]
pub struct TailModel {
    pub coefficient: f64,
    pub exponent: f64,
    pub beta: f64,
    /// Reference radius for the scaled correction ratios.
    pub r0: f64,
    /// `(a_k / a_1) r0^(-(k-1)β)` for `k ≥ 2`.
    pub ratios: Vec<f64>,
}

impl TailModel {
    /// Model with `terms` expansion terms, scaled at the radius `r0` where it takes over.
    fn new(beta: f64, d: usize, terms: usize, r0: f64) -> Self {
        let l1 = tail_envelope(beta, d, 1);
        let ratios = (2..=terms.max(1))
            .map(|k| {
                let ln = tail_envelope(beta, d, k) - l1 - (k - 1) as f64 * beta * r0.ln();
                tail_sine(beta, k) / tail_sine(beta, 1) * ln.exp()
            })
            .collect();
        Self { coefficient: tail_coefficient(beta, d, 1), exponent: d as f64 + beta, beta, r0, ratios }
    }

    fn shape(&self, r: f64) -> (f64, f64) {
        // (1 + Σ ρ_k (r0/r)^{(k-1)β}, derivative in r)
        let mut s = 1.0;
        let mut ds = 0.0;
        let x = (self.r0 / r).powf(self.beta);
        let mut p = 1.0;
        for (j, rho) in self.ratios.iter().enumerate() {
            p *= x;
            if p == 0.0 {
                break;
            }
            let e = (j + 1) as f64 * self.beta;
            s += rho * p;
            ds -= rho * p * e / r;
        }
        (s, ds)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.coefficient * r.powf(-self.exponent) * self.shape(r).0
    }

    /// `d/dr ln Φ`.
    pub fn log_slope(&self, r: f64) -> f64 {
        let (s, ds) = self.shape(r);
        -self.exponent / r + ds / s
    }

    /// `∫_r^∞ Φ` for the one-dimensional profile.
    pub fn mass_beyond(&self, r: f64) -> f64 {
        let x = (self.r0 / r).powf(self.beta);
        let mut sum = 1.0 / self.beta;
        let mut p = 1.0;
        for (j, rho) in self.ratios.iter().enumerate() {
            p *= x;
            sum += rho * p / ((j + 2) as f64 * self.beta);
        }
        self.coefficient * r.powf(-self.beta) * sum
    }
}

/// Nodes `r_i = a sinh(i h)`: linear spacing inside the core radius `a`,
/// logarithmic spacing outside.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RadialGrid {
    a: f64,
    h: f64,
}

impl RadialGrid {
    fn radius(&self, i: usize) -> f64 {
        self.a * (self.h * i as f64).sinh()
    }

    fn u(&self, r: f64) -> f64 {
        (r / self.a).asinh()
    }

    /// `dr/du` at radius `r`.
    fn jacobian(&self, r: f64) -> f64 {
        r.hypot(self.a)
    }

    fn spline(&self, values: &[f64], slope0: f64, slope_end: f64) -> UniformSpline {
        let r_end = self.radius(values.len() - 1);
        UniformSpline::new(0.0, self.h, values.to_vec(), EndCondition::Clamped(slope0 * self.a, slope_end * self.jacobian(r_end)))
    }
}

/// Radius inside which Φ is essentially flat: `√(b₀/b₁)` from the small-radius
/// series `Φ(r) = b₀ - b₁ r² + ...`, capped at 1.
pub fn core_radius(beta: f64, d: usize) -> f64 {
    let df = d as f64;
    // b₁/b₀ = Γ((2+d)/β) Γ(d/2) / (4 Γ(d/β) Γ(1+d/2))
    let ln_ratio = ln_gamma((2.0 + df) / beta) - ln_gamma(df / beta) + ln_gamma(0.5 * df) - ln_gamma(1.0 + 0.5 * df) - 4f64.ln();
    (-0.5 * ln_ratio).exp().min(1.0)
}

/// Tabulated or closed-form radial profile `Φ_β` of the stable heat kernel at `t = 1`.
#[derive(Debug, Clone)]
pub struct StableDensityProfile {
    beta: f64,
    dim: usize,
    kind: ProfileKind,
    grid: RadialGrid,
    /// `Φ(r_i)`
    values: Vec<f64>,
    r_tail: f64,
    spline: UniformSpline,
    tail: TailModel,
    error_estimate: f64,
    warnings: Vec<String>,
    /// `ln ∫_r^∞ Φ` against `u`, one-dimensional profiles only.
    tail_mass: Option<UniformSpline>,
}

impl PartialEq for StableDensityProfile {
    fn eq(&self, other: &Self) -> bool {
        let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
        same(self.beta, other.beta)
            && self.dim == other.dim
            && self.kind == other.kind
            && same(self.grid.a, other.grid.a)
            && same(self.grid.h, other.grid.h)
            && same(self.r_tail, other.r_tail)
            && same(self.error_estimate, other.error_estimate)
            && same(self.tail.coefficient, other.tail.coefficient)
            && self.tail.ratios.len() == other.tail.ratios.len()
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| same(*a, *b))
    }
}

/// Builds `Φ_β` in dimension `d ∈ {1, 2, 3}`.
pub fn build_profile(beta: f64, d: usize, spec: &ProfileSpec) -> Result<StableDensityProfile> {
    check_beta(beta)?;
    check_dim(d)?;
    if !(spec.u_step > 0.0 && spec.u_step <= 0.1) {
        return domain("u_step must lie in (0, 0.1]");
    }
    if beta == 1.0 {
        return closed_form_profile(d, spec);
    }
    // smallest radius from which the expansion is accurate on its own
    let a = core_radius(beta, d);
    let mut r_tail = None;
    let mut r = a;
    while r <= spec.max_tail_radius {
        if [1.0, 1.1, 1.25, 1.5].iter().all(|m| tail_series(beta, d, r * m, spec.tail_rel).is_some()) {
            r_tail = Some(r);
            break;
        }
        r *= 1.05;
    }
    let Some(r_tail) = r_tail else {
        return Err(Error::Construction(format!(
            "large-radius expansion for beta={beta}, d={d} does not reach {:.0e} below r={}",
            spec.tail_rel, spec.max_tail_radius
        )));
    };
    let grid = RadialGrid { a, h: spec.u_step };
    let r_max = 4.0 * r_tail;
    let n = (grid.u(r_max) / spec.u_step).ceil() as usize + 1;
    let r_last = grid.radius(n - 1);
    let (_, _, _, terms) = tail_series(beta, d, r_tail, spec.tail_rel)
        .ok_or_else(|| Error::Construction("expansion failed at the start of its range".into()))?;
    let mut values = Vec::with_capacity(n);
    let mut quad_err: f64 = 0.0;
    let mut warnings = Vec::new();
    for i in 0..n {
        let r = grid.radius(i);
        let v = if r < r_tail {
            let (v, e) = density_by_quadrature(beta, d, r)?;
            quad_err = quad_err.max(e / v.abs());
            v
        } else {
            tail_series(beta, d, r, spec.tail_rel).map_or(f64::NAN, |t| t.0)
        };
        values.push(v);
    }
    let bad = values
        .iter()
        .enumerate()
        .find(|&(i, v)| !(v.is_finite() && *v > 0.0) || (i >= 2 && *v >= values[i - 1]))
        .map(|(i, _)| i);
    if let Some(i) = bad {
        return Err(Error::Construction(format!(
            "profile value {} at r={} is not positive and decreasing (beta={beta}, d={d})",
            values[i],
            grid.radius(i)
        )));
    }
    let mut tail = TailModel::new(beta, d, terms, r_tail);
    // least-squares fit of the leading coefficient on the last decade
    let (mut num, mut den) = (0.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        let r = grid.radius(i);
        if r >= r_last / 10.0 && r >= r_tail {
            let m = tail.value(r) / tail.coefficient;
            num += v * m;
            den += m * m;
        }
    }
    if den > 0.0 {
        tail.coefficient = num / den;
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let spline = grid.spline(&logs, 0.0, tail.log_slope(r_last));

    // accuracy: expansion against quadrature where both apply, spline between nodes
    let mut overlap: f64 = 0.0;
    for m in [1.0, 1.2, 1.5, 2.0] {
        let r = r_tail * m;
        if let (Ok((q, _)), Some((s, ..))) = (density_by_quadrature(beta, d, r), tail_series(beta, d, r, spec.tail_rel)) {
            overlap = overlap.max(((q - s) / s).abs());
        }
    }
    let mut interp: f64 = 0.0;
    let n_quad = (grid.u(r_tail) / spec.u_step).floor() as usize;
    let checks = spec.checks.max(1);
    for k in 0..checks {
        let i = (k * n_quad.saturating_sub(1)) / checks;
        let u = (i as f64 + 0.5) * spec.u_step;
        let r = a * u.sinh();
        let (q, _) = density_by_quadrature(beta, d, r)?;
        let s = spline.eval(u).exp();
        let rel = ((s - q) / q).abs();
        interp = if rel.is_nan() { f64::INFINITY } else { interp.max(rel) };
    }
    let error_estimate = quad_err.max(overlap).max(interp);
    if error_estimate > 1e-8 {
        warnings.push(format!("construction error estimate {error_estimate:.2e} exceeds 1e-8"));
    }
    let mut profile = StableDensityProfile {
        beta,
        dim: d,
        kind: ProfileKind::Tabulated,
        grid,
        values,
        r_tail,
        spline,
        tail,
        error_estimate,
        warnings,
        tail_mass: None,
    };
    profile.build_tail_mass();
    let (lo, hi) = profile.comparability_ratio();
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::Construction(format!("comparability ratio out of range: [{lo}, {hi}]")));
    }
    Ok(profile)
}

fn poisson_log_slope(d: usize, r: f64) -> f64 {
    -(d as f64 + 1.0) * r / (1.0 + r * r)
}

fn closed_form_profile(d: usize, spec: &ProfileSpec) -> Result<StableDensityProfile> {
    let grid = RadialGrid { a: 1.0, h: spec.u_step };
    let r_max: f64 = 200.0;
    let n = (grid.u(r_max) / spec.u_step).ceil() as usize + 1;
    let values: Vec<f64> = (0..n).map(|i| poisson_profile(d, grid.radius(i))).collect();
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let r_last = grid.radius(n - 1);
    let spline = grid.spline(&logs, 0.0, poisson_log_slope(d, r_last));
    let mut profile = StableDensityProfile {
        beta: 1.0,
        dim: d,
        kind: ProfileKind::ClosedForm,
        grid,
        values,
        r_tail: r_last / 4.0,
        spline,
        tail: TailModel::new(1.0, d, 1, r_last),
        error_estimate: 0.0,
        warnings: Vec::new(),
        tail_mass: None,
    };
    profile.build_tail_mass();
    Ok(profile)
}

impl StableDensityProfile {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn tail_model(&self) -> &TailModel {
        &self.tail
    }

    /// Core radius `a` of the node distribution.
    pub fn core_radius(&self) -> f64 {
        self.grid.a
    }

    /// Node spacing of the table in `u = asinh(r / a)`; zero for closed forms.
    pub fn node_spacing(&self) -> f64 {
        match self.kind {
            ProfileKind::ClosedForm => 0.0,
            ProfileKind::Tabulated => self.grid.h,
        }
    }

    /// Radius beyond which the table is replaced by the tail model.
    pub fn r_max(&self) -> f64 {
        self.grid.radius(self.values.len() - 1)
    }

    /// Radius from which table values come from the large-radius expansion.
    pub fn r_tail(&self) -> f64 {
        self.r_tail
    }

    /// Table nodes `(r_i, Φ(r_i))`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, v)| (self.grid.radius(i), *v))
    }

    /// `ln Φ(r)`.
    pub fn log_density(&self, r: f64) -> f64 {
        let r = r.abs();
        if self.kind == ProfileKind::ClosedForm {
            return poisson_profile(self.dim, r).ln();
        }
        if r <= self.r_max() {
            self.spline.eval(self.grid.u(r))
        } else {
            self.tail.value(r).ln()
        }
    }

    /// `Φ(r)`.
    pub fn density(&self, r: f64) -> f64 {
        let r = r.abs();
        if self.kind == ProfileKind::ClosedForm {
            return poisson_profile(self.dim, r);
        }
        if r <= self.r_max() {
            self.spline.eval(self.grid.u(r)).exp()
        } else {
            self.tail.value(r)
        }
    }

    /// `G(t, x)` for `|x| = r`.
    pub fn eval_g(&self, t: f64, r: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return domain(format!("time must be positive, got {t}"));
        }
        let s = t.powf(1.0 / self.beta);
        Ok(self.density(r / s) * t.powf(-(self.dim as f64) / self.beta))
    }

    /// `ln G(t, x)` for `|x| = r`, `t > 0`.
    pub fn log_g(&self, t: f64, r: f64) -> f64 {
        let s = t.powf(1.0 / self.beta);
        self.log_density(r / s) - self.dim as f64 / self.beta * t.ln()
    }

    /// Min and max of `Φ(r) (1 + r²)^((d+β)/2)` over the table nodes.
    pub fn comparability_ratio(&self) -> (f64, f64) {
        let e = 0.5 * (self.dim as f64 + self.beta);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for (r, v) in self.nodes() {
            let q = v * (1.0 + r * r).powf(e);
            lo = lo.min(q);
            hi = hi.max(q);
        }
        (lo, hi)
    }

    fn build_tail_mass(&mut self) {
        if self.dim != 1 {
            return;
        }
        let n = self.values.len();
        let r_last = self.r_max();
        let m: Vec<f64> = if self.kind == ProfileKind::ClosedForm {
            (0..n).map(|i| poisson_mass_beyond(self.grid.radius(i))).collect()
        } else {
            let mut m = vec![0.0; n];
            m[n - 1] = self.tail.mass_beyond(r_last);
            for i in (0..n - 1).rev() {
                let (a, b) = (self.grid.radius(i), self.grid.radius(i + 1));
                let (v, _) = gk21(&|r: f64| self.density(r), a, b);
                m[i] = m[i + 1] + v;
            }
            m
        };
        let logs: Vec<f64> = m.iter().map(|v| v.ln()).collect();
        let slope0 = -self.values[0] / m[0];
        let slope_end = -self.values[n - 1] / m[n - 1];
        self.tail_mass = Some(self.grid.spline(&logs, slope0, slope_end));
    }

    /// `∫_r^∞ Φ` for `r ≥ 0` (one-dimensional profiles).
    pub fn mass_beyond(&self, r: f64) -> Result<f64> {
        let Some(spline) = &self.tail_mass else {
            return domain("tail mass is only tabulated for d = 1");
        };
        let r = r.max(0.0);
        if self.kind == ProfileKind::ClosedForm {
            return Ok(poisson_mass_beyond(r));
        }
        if r <= self.r_max() {
            Ok(spline.eval(self.grid.u(r)).exp())
        } else {
            Ok(self.tail.mass_beyond(r))
        }
    }

    /// `P(X ≤ z)` for the one-dimensional profile.
    pub fn cdf(&self, z: f64) -> Result<f64> {
        if z >= 0.0 {
            Ok(1.0 - self.mass_beyond(z)?)
        } else {
            self.mass_beyond(-z)
        }
    }

    /// Mass of the interval `[a, b]` under the one-dimensional profile,
    /// accurate in both tails.
    pub fn interval_mass(&self, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let (diff, scale) = if a >= 0.0 {
            let (ma, mb) = (self.mass_beyond(a)?, self.mass_beyond(b)?);
            (ma - mb, ma)
        } else if b <= 0.0 {
            let (ma, mb) = (self.mass_beyond(-b)?, self.mass_beyond(-a)?);
            (ma - mb, ma)
        } else {
            (1.0 - self.mass_beyond(-a)? - self.mass_beyond(b)?, 1.0)
        };
        if diff >= 0.1 * scale {
            return Ok(diff);
        }
        // a short interval: the difference of tail masses has cancelled, so
        // integrate Φ directly on panels narrower than its local variation
        let near = if a < 0.0 && b > 0.0 { 0.0 } else { a.abs().min(b.abs()) };
        let width = 0.5 * self.grid.a.max(0.25 * near);
        let panels = (((b - a) / width).ceil() as usize).clamp(1, 64);
        static RULES: std::sync::OnceLock<[(Vec<f64>, Vec<f64>); 2]> = std::sync::OnceLock::new();
        let rules = RULES.get_or_init(|| [gauss_legendre(4), gauss_legendre(10)]);
        let h = (b - a) / panels as f64;
        // four nodes already reach ~1e-13 on panels this small against the variation scale
        let (x, w) = if h <= 0.1 * width { &rules[0] } else { &rules[1] };
        let mut sum = 0.0;
        for k in 0..panels {
            let mid = a + (k as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(w) {
                sum += wi * self.density(mid + 0.5 * h * xi);
            }
        }
        Ok(0.5 * h * sum)
    }

    /// `∫_{R^d} Φ` by radial quadrature.
    pub fn mass(&self) -> f64 {
        let d = self.dim as i32;
        let r_last = self.r_max();
        let f = |u: f64| {
            let r = self.grid.a * u.sinh();
            self.density(r) * r.powi(d - 1) * self.grid.jacobian(r)
        };
        let tol = Tolerance { abs: 1e-15, rel: 1e-13, max_panels: 4000 };
        let q = crate::quadrature::integrate_uniform(f, 0.0, self.grid.u(r_last), 64, tol);
        // beyond the table, substitute r = R / v
        let g = |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let r = r_last / v;
            self.density(r) * r.powi(d - 1) * r_last / (v * v)
        };
        let tail = integrate(g, &[0.0, 0.25, 0.5, 1.0], tol).value;
        sphere_area(self.dim) * (q.value + tail)
    }

    /// Versioned columnar text form; reading it back reproduces the profile bit for bit.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_HEADER}");
        let _ = writeln!(s, "# beta={}", self.beta);
        let _ = writeln!(s, "# d={}", self.dim);
        let kind = match self.kind {
            ProfileKind::ClosedForm => "closed-form",
            ProfileKind::Tabulated => "tabulated",
        };
        let _ = writeln!(s, "# kind={kind}");
        let _ = writeln!(s, "# core_radius={}", self.grid.a);
        let _ = writeln!(s, "# u_step={}", self.grid.h);
        let _ = writeln!(s, "# r_tail={}", self.r_tail);
        let _ = writeln!(s, "# tail_coefficient={}", self.tail.coefficient);
        let _ = writeln!(s, "# tail_terms={}", self.tail.ratios.len() + 1);
        let _ = writeln!(s, "# error_estimate={}", self.error_estimate);
        for w in &self.warnings {
            let _ = writeln!(s, "# warning={}", w.replace('\n', " "));
        }
        let _ = writeln!(s, "r,phi");
        for (r, v) in self.nodes() {
            let _ = writeln!(s, "{r},{v}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, l)| l.trim()) != Some(FORMAT_HEADER) {
            return Err(Error::Parse { line: 1, msg: format!("expected header '{FORMAT_HEADER}'") });
        }
        let mut meta = std::collections::BTreeMap::new();
        let mut warnings = Vec::new();
        let mut values = Vec::new();
        let mut in_rows = false;
        for (ln, line) in lines {
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            if let Some(m) = line.strip_prefix("# ") {
                let (k, v) = m.split_once('=').ok_or_else(|| perr("expected key=value".into()))?;
                match k {
                    "warning" => warnings.push(v.to_string()),
                    "beta" | "d" | "kind" | "core_radius" | "u_step" | "r_tail" | "tail_coefficient" | "tail_terms"
                    | "error_estimate" => {
                        meta.insert(k.to_string(), (ln + 1, v.to_string()));
                    }
                    _ => return Err(perr(format!("unknown key {k}"))),
                }
            } else if line.trim() == "r,phi" {
                in_rows = true;
            } else if in_rows && !line.trim().is_empty() {
                let (_, v) = line.split_once(',').ok_or_else(|| perr("expected r,phi".into()))?;
                values.push(v.trim().parse::<f64>().map_err(|e| perr(e.to_string()))?);
            }
        }
        let get = |k: &str| -> Result<(usize, String)> {
            meta.get(k).cloned().ok_or_else(|| Error::Parse { line: 0, msg: format!("missing {k}") })
        };
        let num = |k: &str| -> Result<f64> {
            let (line, v) = get(k)?;
            v.parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("{k}: {e}") })
        };
        let int = |k: &str| -> Result<usize> {
            let (line, v) = get(k)?;
            v.parse::<usize>().map_err(|e| Error::Parse { line, msg: format!("{k}: {e}") })
        };
        let beta = num("beta")?;
        let dim = int("d")?;
        check_beta(beta)?;
        check_dim(dim)?;
        let kind = match get("kind")?.1.as_str() {
            "closed-form" => ProfileKind::ClosedForm,
            "tabulated" => ProfileKind::Tabulated,
            other => return Err(Error::Parse { line: get("kind")?.0, msg: format!("unknown kind {other}") }),
        };
        let grid = RadialGrid { a: num("core_radius")?, h: num("u_step")? };
        if !(grid.a > 0.0 && grid.h > 0.0) {
            return Err(Error::Parse { line: 0, msg: "grid parameters must be positive".into() });
        }
        if values.len() < 5 || values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Parse { line: 0, msg: "table needs at least five positive rows".into() });
        }
        let r_last = grid.radius(values.len() - 1);
        let r_tail = num("r_tail")?;
        let mut tail = TailModel::new(beta, dim, int("tail_terms")?, r_tail);
        tail.coefficient = num("tail_coefficient")?;
        let end_slope = match kind {
            ProfileKind::ClosedForm => poisson_log_slope(dim, r_last),
            ProfileKind::Tabulated => tail.log_slope(r_last),
        };
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let spline = grid.spline(&logs, 0.0, end_slope);
        let mut p = StableDensityProfile {
            beta,
            dim,
            kind,
            grid,
            values,
            r_tail,
            spline,
            tail,
            error_estimate: num("error_estimate")?,
            warnings,
            tail_mass: None,
        };
        p.build_tail_mass();
        Ok(p)
    }
}

fn poisson_mass_beyond(r: f64) -> f64 {
    if r > 1.0 {
        (1.0 / r).atan() / PI
    } else {
        0.5 - r.atan() / PI
    }
}

/// `G(t, x)` for a point `x ∈ R^d`.
pub fn eval_g(profile: &StableDensityProfile, t: f64, x: &[f64]) -> Result<f64> {
    if x.len() != profile.dim() {
        return domain(format!("point has {} coordinates, profile dimension is {}", x.len(), profile.dim()));
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    profile.eval_g(t, r)
}
