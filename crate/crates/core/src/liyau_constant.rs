//! The functional `J(y) = ∫ log(Φ(y)² / (Φ(y+σ)Φ(y-σ))) |σ|^(-d-β) dσ` of the
//! stable profile and the Li-Yau constant `C_LY(β, d) = (c_{β,d}/2) sup_y J(y)`.
//!
//! By radial symmetry `J` depends on `|y|` only. The `σ` integral is written
//! as `∫₀^∞ A(ρ) ρ^(-1-β) dρ` where `A` is the spherical sum of the second
//! difference of `ln Φ`; in one dimension `A(ρ) = 2(2ℓ(y) - ℓ(y+ρ) - ℓ(y-ρ))`,
//! in two and three dimensions the sphere is integrated by Gauss-Legendre
//! nodes in the polar angle.

use std::f64::consts::PI;

use serde::Serialize;

use crate::core_ops::{Estimate, QuadratureSpec};
use crate::error::{domain, Result};
use crate::quadrature::gauss_legendre_on;
use crate::singular::{integrate_singular, SingularSpec};
use crate::stable_density::{ball_volume, build_profile, normalizing_constant, ProfileSpec, StableDensityProfile};

/// How a Li-Yau constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedFormBeta1,
    Numeric,
}

/// Search for the supremum of `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    /// Largest `|y|` scanned.
    pub y_max: f64,
    /// Smallest positive `|y|` of the log-spaced scan; `y = 0` is always included.
    pub y_min: f64,
    /// Number of log-spaced nodes.
    pub nodes: usize,
    /// Golden-section stops when the bracket is narrower than this times `1 + |y|`.
    pub refine_tol: f64,
    pub quad: QuadratureSpec,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self { y_max: 50.0, y_min: 0.05, nodes: 49, refine_tol: 1e-5, quad: QuadratureSpec::default() }
    }
}

/// One scanned value of `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JSample {
    pub y: f64,
    pub j: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiYauConstantResult {
    pub beta: f64,
    pub d: usize,
    pub value: f64,
    pub error: f64,
    /// `|y|` at which the supremum is attained.
    pub y_star: f64,
    /// `J` at the scan nodes and refinement points, sorted by `|y|`.
    pub table: Vec<JSample>,
    pub method: Method,
    pub warnings: Vec<String>,
}

/// `C_LY(1, d) = π d (d+1) c_{1,d} ω_d / 2`.
pub fn liyau_constant_beta1(d: usize) -> Result<f64> {
    if d == 0 {
        return domain("dimension must be at least one");
    }
    let df = d as f64;
    Ok(PI * df * (df + 1.0) * normalizing_constant(1.0, d)? * ball_volume(d) / 2.0)
}

fn default_delta(profile: &StableDensityProfile) -> f64 {
    0.1 * profile.core_radius().min(1.0)
}

/// `J(|y|)` with its error estimate.
pub fn j_of_y(profile: &StableDensityProfile, y_norm: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    if !(y_norm >= 0.0 && y_norm.is_finite()) {
        return domain(format!("|y| must be finite and non-negative, got {y_norm}"));
    }
    let d = profile.dim();
    if !(1..=3).contains(&d) {
        return domain("J is implemented for d = 1, 2, 3");
    }
    match d {
        1 => j_with_nodes(profile, y_norm, quad, 0),
        _ => {
            let n = quad.angular_nodes.max(4);
            let fine = j_with_nodes(profile, y_norm, quad, n)?;
            let coarse = j_with_nodes(profile, y_norm, quad, n / 2)?;
            // the half-order rule bounds the angular error of the full one
            Ok(Estimate { error: fine.error + (fine.value - coarse.value).abs(), diverged: fine.diverged || coarse.diverged, ..fine })
        }
    }
}

fn j_with_nodes(profile: &StableDensityProfile, r: f64, quad: &QuadratureSpec, nodes: usize) -> Result<Estimate> {
    let d = profile.dim();
    let beta = profile.beta();
    let ell = |s: f64| profile.log_density(s);
    let l0 = ell(r);
    let (theta, weights) = match d {
        1 => (Vec::new(), Vec::new()),
        2 => gauss_legendre_on(nodes, 0.0, 0.5 * PI),
        _ => gauss_legendre_on(nodes, 0.0, 1.0),
    };
    let a = |rho: f64| -> f64 {
        match d {
            1 => 2.0 * (2.0 * l0 - ell(r + rho) - ell(r - rho)),
            _ => {
                let mut sum = 0.0;
                for (x, w) in theta.iter().zip(&weights) {
                    let c = if d == 2 { x.cos() } else { *x };
                    let base = r * r + rho * rho;
                    let plus = (base + 2.0 * r * rho * c).max(0.0).sqrt();
                    let minus = (base - 2.0 * r * rho * c).max(0.0).sqrt();
                    sum += w * (2.0 * l0 - ell(plus) - ell(minus));
                }
                if d == 2 {
                    4.0 * sum
                } else {
                    4.0 * PI * sum
                }
            }
        }
    };
    let core = profile.core_radius().min(1.0);
    let delta = quad.delta.unwrap_or_else(|| default_delta(profile));
    let cutoff = quad.cutoff.unwrap_or(1e6 * (1.0 + r));
    let mut spec = SingularSpec::new(beta, delta, cutoff);
    spec.tol = quad.tolerance();
    spec.scale = 8.0 * (l0.abs() + 1.0);
    if r > 0.0 {
        spec.breakpoints = vec![r - core, r, r + core].into_iter().filter(|b| *b > delta).collect();
    }
    let res = integrate_singular(&a, &spec);
    let rounding = 4.0 * f64::EPSILON * spec.scale * delta.powf(-beta) / beta;
    Ok(Estimate { value: res.value, error: res.error + rounding, diverged: !res.converged, off_grid: false })
}

/// `C_LY(β, d)` by scanning `J` over `[0, y_max]` and refining the best node
/// by golden-section search.
pub fn liyau_constant_numeric(profile: &StableDensityProfile, search: &SearchSpec) -> Result<LiYauConstantResult> {
    if !(search.y_max > search.y_min && search.y_min > 0.0 && search.nodes >= 2) {
        return domain("search range needs 0 < y_min < y_max and at least two nodes");
    }
    let beta = profile.beta();
    let d = profile.dim();
    let c = normalizing_constant(beta, d)?;
    let q = &search.quad;
    let mut warnings = Vec::new();

    let ratio = search.y_max / search.y_min;
    let mut ys = vec![0.0];
    ys.extend((0..search.nodes).map(|k| search.y_min * ratio.powf(k as f64 / (search.nodes - 1) as f64)));
    let mut table = Vec::with_capacity(ys.len() + 40);
    for &y in &ys {
        let e = j_of_y(profile, y, q)?;
        if e.diverged {
            warnings.push(format!("J quadrature did not converge at |y| = {y}"));
        }
        table.push(JSample { y, j: e.value, error: e.error });
    }
    let best = (0..table.len()).max_by(|&i, &k| table[i].j.total_cmp(&table[k].j)).unwrap_or(0);
    if best == table.len() - 1 {
        warnings.push(format!("J is largest at the end of the scan, |y| = {}", search.y_max));
    }

    // golden-section search on the bracket around the best node
    let lo = if best == 0 { 0.0 } else { ys[best - 1] };
    let hi = ys[(best + 1).min(ys.len() - 1)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let eval = |y: f64, table: &mut Vec<JSample>| -> Result<f64> {
        let e = j_of_y(profile, y, q)?;
        table.push(JSample { y, j: e.value, error: e.error });
        Ok(e.value)
    };
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = eval(x1, &mut table)?;
    let mut f2 = eval(x2, &mut table)?;
    let mut iterations = 0;
    while b - a > search.refine_tol * (1.0 + b) && iterations < 80 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = eval(x1, &mut table)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = eval(x2, &mut table)?;
        }
        iterations += 1;
    }
    let converged = b - a <= search.refine_tol * (1.0 + b);
    table.sort_by(|p, q| p.y.total_cmp(&q.y));
    let top = *table.iter().max_by(|p, q| p.j.total_cmp(&q.j)).expect("table is not empty");
    // the maximum over all evaluated points; its error bar covers the sampling of the sup
    let spread = if converged {
        (f1 - f2).abs()
    } else {
        warnings.push("golden-section refinement did not converge; using the scan maximum".into());
        let neighbours: Vec<f64> = table.iter().filter(|s| s.y >= lo && s.y <= hi).map(|s| s.j).collect();
        neighbours.iter().fold(0.0f64, |m, v| m.max((top.j - v).abs()))
    };
    let jerr = top.error + spread;
    Ok(LiYauConstantResult {
        beta,
        d,
        value: 0.5 * c * top.j,
        error: 0.5 * c * jerr,
        y_star: top.y,
        table,
        method: Method::Numeric,
        warnings,
    })
}

/// `C_LY(β, d)`, from the closed form when `β = 1` and numerically otherwise.
pub fn liyau_constant(beta: f64, d: usize, profile_spec: &ProfileSpec, search: &SearchSpec) -> Result<LiYauConstantResult> {
    if beta == 1.0 {
        return Ok(LiYauConstantResult {
            beta,
            d,
            value: liyau_constant_beta1(d)?,
            error: 0.0,
            y_star: 0.0,
            table: Vec::new(),
            method: Method::ClosedFormBeta1,
            warnings: Vec::new(),
        });
    }
    let profile = build_profile(beta, d, profile_spec)?;
    liyau_constant_numeric(&profile, search)
}

/// `C_LY/t - (-Δ)^(β/2)(log G(t, ·))(x)` for `|x| = x_norm`, through the
/// self-similar reduction `(c/2) J(x t^(-1/β)) / t`.
pub fn heat_kernel_liyau_margin(
    profile: &StableDensityProfile,
    c_ly: &LiYauConstantResult,
    t: f64,
    x_norm: f64,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("time must be positive, got {t}"));
    }
    let beta = profile.beta();
    let c = normalizing_constant(beta, profile.dim())?;
    let y = x_norm.abs() * t.powf(-1.0 / beta);
    let j = j_of_y(profile, y, quad)?;
    Ok(Estimate {
        value: (c_ly.value - 0.5 * c * j.value) / t,
        error: (c_ly.error + 0.5 * c * j.error) / t,
        diverged: j.diverged,
        off_grid: false,
    })
}

/// `C_LY(β, d)` for each `β` in `betas`, in order.
pub fn liyau_sweep(betas: &[f64], d: usize, profile_spec: &ProfileSpec, search: &SearchSpec) -> Result<Vec<LiYauConstantResult>> {
    betas.iter().map(|&b| liyau_constant(b, d, profile_spec, search)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(beta: f64, d: usize) -> StableDensityProfile {
        build_profile(beta, d, &ProfileSpec::default()).unwrap()
    }

    #[test]
    fn closed_form_values() {
        assert!((liyau_constant_beta1(1).unwrap() - 2.0).abs() < 1e-14);
        assert!((liyau_constant_beta1(2).unwrap() - 1.5 * PI).abs() < 1e-13);
        assert!((liyau_constant_beta1(3).unwrap() - 8.0).abs() < 1e-13);
    }

    #[test]
    fn j_at_origin_for_poisson_kernel() {
        let p = profile(1.0, 1);
        let e = j_of_y(&p, 0.0, &QuadratureSpec::default()).unwrap();
        assert!((e.value - 4.0 * PI).abs() < 1e-8, "{e:?}");
        assert!((e.value - 4.0 * PI).abs() <= e.error.max(1e-12) * 10.0);
    }

    #[test]
    fn j_for_poisson_kernel_peaks_at_origin() {
        for d in 1..=3 {
            let p = profile(1.0, d);
            let q = QuadratureSpec::default();
            let j0 = j_of_y(&p, 0.0, &q).unwrap();
            for y in [0.5, 5.0, 10.0, 20.0, 40.0] {
                let j = j_of_y(&p, y, &q).unwrap();
                assert!(j0.value >= j.value - j.error - j0.error, "d={d} y={y}");
            }
        }
    }

    #[test]
    fn heat_kernel_margin_vanishes_at_the_sup() {
        let p = profile(1.0, 1);
        let c = liyau_constant(1.0, 1, &ProfileSpec::default(), &SearchSpec::default()).unwrap();
        let q = QuadratureSpec::default();
        let m = heat_kernel_liyau_margin(&p, &c, 1.0, 0.0, &q).unwrap();
        assert!(m.value.abs() <= m.error.max(1e-12) * 10.0, "{m:?}");
        let far = heat_kernel_liyau_margin(&p, &c, 1.0, 10.0, &q).unwrap();
        assert!(far.value > 0.0);
        // self-similar collapse
        for t in [0.5, 2.0] {
            let a = heat_kernel_liyau_margin(&p, &c, t, 3.0, &q).unwrap();
            let b = heat_kernel_liyau_margin(&p, &c, 1.0, 3.0 * t.powf(-1.0), &q).unwrap();
            assert!((a.value - b.value / t).abs() <= a.error + b.error / t + 1e-12);
        }
    }
}
