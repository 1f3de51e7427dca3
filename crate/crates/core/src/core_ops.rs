//! The function `Υ(z) = e^z - z - 1`, the remainder `Λ_log`, the operator
//! `Ψ_Υ` for discrete and continuous jump kernels and the chain-rule identity
//! `L(log f) = Lf/f - Ψ_Υ(log f)`.
//!
//! Continuous kernels are the isotropic `c_{β,d} |h|^(-d-β)` kernels; the
//! pointwise operators act on one-dimensional fields through [`Field1`].

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::field::{ExtensionRule, Field1};
use crate::quadrature::Tolerance;
use crate::singular::{integrate_singular, SingularResult, SingularSpec, TailModel};
use crate::special::exp_minus_linear;
use crate::stable_density::normalizing_constant;

/// `Υ(z) = e^z - z - 1`, accurate to full relative precision near zero.
pub fn upsilon(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return domain(format!("upsilon needs a finite argument, got {z}"));
    }
    Ok(exp_minus_linear(z))
}

/// `Λ_log(w, z) = log w - log z - (w - z)/z`, evaluated as `-Υ(log w - log z)`.
pub fn lambda_log(w: f64, z: f64) -> Result<f64> {
    if !(w > 0.0 && z > 0.0 && w.is_finite() && z.is_finite()) {
        return domain(format!("lambda_log needs positive finite arguments, got ({w}, {z})"));
    }
    Ok(-exp_minus_linear(w.ln() - z.ln()))
}

/// A jump kernel `k(x, dy)`.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpKernel {
    /// `c |h|^(-d-β) dh` on `R^d`.
    Continuous { beta: f64, dim: usize, c: f64 },
    /// Rates `q(x, y)` of a finite Markov chain; the diagonal holds `-Σ_{y≠x} q(x, y)`.
    Discrete { rates: DMatrix<f64> },
}

impl JumpKernel {
    pub fn continuous(beta: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return domain("dimension must be at least one");
        }
        let c = normalizing_constant(beta, dim)?;
        Ok(JumpKernel::Continuous { beta, dim, c })
    }

    /// A discrete kernel from off-diagonal rates; the diagonal of `rates` is ignored
    /// and replaced by minus the row sum.
    pub fn discrete(mut rates: DMatrix<f64>) -> Result<Self> {
        let n = rates.nrows();
        if n == 0 || rates.ncols() != n {
            return domain(format!("rate matrix must be square and non-empty, got {}x{}", n, rates.ncols()));
        }
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                if i != j {
                    let q = rates[(i, j)];
                    if !(q >= 0.0 && q.is_finite()) {
                        return domain(format!("rate q({i},{j}) = {q} must be finite and non-negative"));
                    }
                    sum += q;
                }
            }
            rates[(i, i)] = -sum;
        }
        Ok(JumpKernel::Discrete { rates })
    }

    /// Number of states of a discrete kernel.
    pub fn states(&self) -> Option<usize> {
        match self {
            JumpKernel::Discrete { rates } => Some(rates.nrows()),
            JumpKernel::Continuous { .. } => None,
        }
    }

    /// The Q-matrix of a discrete kernel.
    pub fn generator(&self) -> Option<&DMatrix<f64>> {
        match self {
            JumpKernel::Discrete { rates } => Some(rates),
            JumpKernel::Continuous { .. } => None,
        }
    }

    fn rates(&self) -> Result<&DMatrix<f64>> {
        match self {
            JumpKernel::Discrete { rates } => Ok(rates),
            JumpKernel::Continuous { .. } => domain("operation needs a discrete kernel"),
        }
    }

    fn continuous_parts(&self) -> Result<(f64, usize, f64)> {
        match self {
            JumpKernel::Continuous { beta, dim, c } => Ok((*beta, *dim, *c)),
            JumpKernel::Discrete { .. } => domain("operation needs a continuous kernel"),
        }
    }
}

fn check_state(f: &[f64], rates: &DMatrix<f64>, x: usize) -> Result<()> {
    let n = rates.nrows();
    if f.len() != n {
        return domain(format!("vector has {} entries for {n} states", f.len()));
    }
    if x >= n {
        return Err(Error::Index { index: x, len: n });
    }
    if let Some(i) = f.iter().position(|v| !v.is_finite()) {
        return domain(format!("entry {i} is not finite"));
    }
    Ok(())
}

/// `Lf(x) = Σ_{y≠x} q(x, y)(f(y) - f(x))`.
pub fn generator_discrete(f: &[f64], kernel: &JumpKernel, x: usize) -> Result<f64> {
    let q = kernel.rates()?;
    check_state(f, q, x)?;
    Ok((0..f.len()).filter(|&y| y != x).map(|y| q[(x, y)] * (f[y] - f[x])).sum())
}

/// `Ψ_Υ(f)(x) = Σ_{y≠x} Υ(f(y) - f(x)) q(x, y)`.
pub fn psi_upsilon_discrete(f: &[f64], kernel: &JumpKernel, x: usize) -> Result<f64> {
    let q = kernel.rates()?;
    check_state(f, q, x)?;
    let mut sum = 0.0;
    for y in (0..f.len()).filter(|&y| y != x) {
        if q[(x, y)] != 0.0 {
            sum += q[(x, y)] * upsilon(f[y] - f[x])?;
        }
    }
    Ok(sum)
}

/// `L(log f)(x) - Lf(x)/f(x) + Ψ_Υ(log f)(x)` for a positive vector `f`.
pub fn chain_rule_residual_discrete(f: &[f64], kernel: &JumpKernel, x: usize) -> Result<f64> {
    if let Some(i) = f.iter().position(|v| !(*v > 0.0)) {
        return domain(format!("entry {i} of f is not positive"));
    }
    let logf: Vec<f64> = f.iter().map(|v| v.ln()).collect();
    let l_log = generator_discrete(&logf, kernel, x)?;
    let lf = generator_discrete(f, kernel, x)?;
    let psi = psi_upsilon_discrete(&logf, kernel, x)?;
    Ok(l_log - lf / f[x] + psi)
}

/// Parameters of the singular-integral quadrature behind the continuous operators.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    /// Inner split radius; defaults to the field's length scale.
    pub delta: Option<f64>,
    /// Outer cutoff; defaults to `1e6` times the field's extent, or 2000 periods.
    pub cutoff: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Angular Gauss-Legendre nodes for `d ≥ 2` integrals.
    pub angular_nodes: usize,
    /// Overrides the extension rule of grid fields.
    pub extension: Option<ExtensionRule>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { delta: None, cutoff: None, rel_tol: 1e-10, abs_tol: 1e-12, max_panels: 20_000, angular_nodes: 32, extension: None }
    }
}

impl QuadratureSpec {
    /// `key=value` lines; `auto` stands for an unset optional value.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), |v| v.to_string());
        let mut s = String::new();
        let _ = writeln!(s, "delta={}", opt(self.delta));
        let _ = writeln!(s, "cutoff={}", opt(self.cutoff));
        let _ = writeln!(s, "rel_tol={}", self.rel_tol);
        let _ = writeln!(s, "abs_tol={}", self.abs_tol);
        let _ = writeln!(s, "max_panels={}", self.max_panels);
        let _ = writeln!(s, "angular_nodes={}", self.angular_nodes);
        let _ = writeln!(s, "extension={}", self.extension.as_ref().map_or("auto".to_string(), |e| e.to_text()));
        s
    }

    /// Parses `key=value` lines; missing keys keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: i + 1, msg };
            let (k, v) = line.split_once('=').ok_or_else(|| perr("expected key=value".into()))?;
            spec.set(k.trim(), v.trim()).map_err(|e| perr(e.to_string()))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| v.parse::<f64>().map_err(|e| Error::Domain(format!("{key}: {e}")));
        let opt = |v: &str| if v == "auto" { Ok(None) } else { num(v).map(Some) };
        let int = |v: &str| v.parse::<usize>().map_err(|e| Error::Domain(format!("{key}: {e}")));
        match key {
            "delta" => self.delta = opt(value)?,
            "cutoff" => self.cutoff = opt(value)?,
            "rel_tol" => self.rel_tol = num(value)?,
            "abs_tol" => self.abs_tol = num(value)?,
            "max_panels" => self.max_panels = int(value)?,
            "angular_nodes" => self.angular_nodes = int(value)?,
            "extension" => self.extension = if value == "auto" { None } else { Some(ExtensionRule::parse(value)?) },
            _ => return domain(format!("unknown quadrature key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: Option<f64>| v.is_none_or(|v| v > 0.0 && v.is_finite());
        if !pos(self.delta) || !pos(self.cutoff) {
            return domain("delta and cutoff must be positive");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol >= 0.0) || self.max_panels == 0 || self.angular_nodes < 2 {
            return domain("tolerances must be positive and node counts nonzero");
        }
        Ok(())
    }

    pub(crate) fn tolerance(&self) -> Tolerance {
        Tolerance { abs: self.abs_tol, rel: self.rel_tol, max_panels: self.max_panels }
    }
}

/// A quadrature value with its error bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    /// The adaptive quadrature hit its panel budget or produced a non-finite value.
    pub diverged: bool,
    /// The evaluation point is not a grid node, so interpolation error is not covered.
    pub off_grid: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0, diverged: false, off_grid: false }
    }

    fn from_singular(r: &SingularResult, factor: f64, rounding: f64, off_grid: bool) -> Self {
        Self {
            value: factor * r.value,
            error: factor.abs() * (r.error + rounding),
            diverged: !r.converged,
            off_grid,
        }
    }

    pub fn neg(self) -> Self {
        Self { value: -self.value, ..self }
    }

    /// Sum of two estimates with added error bars.
    pub fn plus(self, other: Estimate) -> Self {
        Self {
            value: self.value + other.value,
            error: self.error + other.error,
            diverged: self.diverged || other.diverged,
            off_grid: self.off_grid || other.off_grid,
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self { value: self.value * factor, error: self.error * factor.abs(), ..self }
    }

    /// Whether `value` lies within `error` of `target`.
    pub fn contains(&self, target: f64) -> bool {
        (self.value - target).abs() <= self.error
    }
}

/// Integration setup for `∫₀^∞ S(y) y^(-1-β) dy` centred at `x`.
pub(crate) fn singular_spec(f: &dyn Field1, beta: f64, x: f64, quad: &QuadratureSpec, scale: f64) -> SingularSpec {
    let ls = f.length_scale();
    let delta = quad.delta.unwrap_or(ls);
    let cutoff = quad.cutoff.unwrap_or_else(|| match f.period() {
        Some(p) => 2000.0 * p,
        None => 1e6 * (f.extent() + x.abs()).max(ls),
    });
    let mut spec = SingularSpec::new(beta, delta, cutoff.max(4.0 * delta));
    spec.tol = quad.tolerance();
    spec.scale = scale;
    spec.breakpoints = f.breakpoints().iter().map(|b| (b - x).abs()).collect();
    if let Some(p) = f.period() {
        spec.tail = TailModel::Periodic(p);
    }
    if let Some((w, until)) = f.resolution() {
        spec.fine_width = w;
        spec.fine_until = until;
    }
    spec
}

/// Rounding in the middle range: each sample of `S` carries about `4ε·scale`.
fn middle_rounding(beta: f64, delta: f64, scale: f64) -> f64 {
    4.0 * f64::EPSILON * scale * delta.powf(-beta) / beta
}

fn pointwise_scale(f: &dyn Field1, x: f64, delta: f64) -> f64 {
    (f.value(x).abs() + f.value(x + delta).abs() + f.value(x - delta).abs()).max(f64::MIN_POSITIVE)
}

fn one_dimensional(kernel: &JumpKernel) -> Result<(f64, f64)> {
    let (beta, dim, c) = kernel.continuous_parts()?;
    if dim != 1 {
        return domain("pointwise continuous operators are implemented for d = 1");
    }
    Ok((beta, c))
}

/// `Lf(x) = c ∫ (f(x+y) + f(x-y) - 2f(x)) / (2|y|^(1+β)) dy = -(-Δ)^(β/2) f(x)`.
pub fn generator_continuous(f: &dyn Field1, kernel: &JumpKernel, x: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    let (beta, c) = one_dimensional(kernel)?;
    let fx = f.value(x);
    if !fx.is_finite() {
        return domain(format!("field is not finite at {x}"));
    }
    let spec0 = singular_spec(f, beta, x, quad, 1.0);
    let scale = pointwise_scale(f, x, spec0.delta);
    let spec = SingularSpec { scale, ..spec0 };
    let s = |y: f64| f.value(x + y) + f.value(x - y) - 2.0 * fx;
    let r = integrate_singular(&s, &spec);
    Ok(Estimate::from_singular(&r, c, middle_rounding(beta, spec.delta, scale), !f.is_node(x)))
}

/// `Ψ_Υ(f)(x) = c ∫ Υ(f(x+h) - f(x)) |h|^(-1-β) dh`.
pub fn psi_upsilon_continuous(f: &dyn Field1, kernel: &JumpKernel, x: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    let (beta, c) = one_dimensional(kernel)?;
    let fx = f.value(x);
    if !fx.is_finite() {
        return domain(format!("field is not finite at {x}"));
    }
    let spec0 = singular_spec(f, beta, x, quad, 1.0);
    let scale = pointwise_scale(f, x, spec0.delta);
    let spec = SingularSpec { scale, ..spec0 };
    let s = |y: f64| exp_minus_linear(f.value(x + y) - fx) + exp_minus_linear(f.value(x - y) - fx);
    let r = integrate_singular(&s, &spec);
    let mut e = Estimate::from_singular(&r, c, middle_rounding(beta, spec.delta, scale), !f.is_node(x));
    // Ψ is non-negative; an estimate below zero by more than its error bar is a failure
    e.diverged |= e.value < -e.error;
    Ok(e)
}

/// `L(log f)(x) - Lf(x)/f(x) + Ψ_Υ(log f)(x)` for a positive field, from three
/// independent quadratures.
pub fn chain_rule_residual_continuous(f: &dyn Field1, kernel: &JumpKernel, x: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    let fx = f.value(x);
    if !(fx > 0.0) {
        return domain(format!("field must be positive, f({x}) = {fx}"));
    }
    let log_f = crate::field::LogField(f);
    let l_log = generator_continuous(&log_f, kernel, x, quad)?;
    let lf = generator_continuous(f, kernel, x, quad)?.scale(1.0 / fx);
    let psi = psi_upsilon_continuous(&log_f, kernel, x, quad)?;
    Ok(l_log.plus(lf.neg()).plus(psi))
}
