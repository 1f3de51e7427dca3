//! Sampled functions on uniform grids and the [`Field1`] abstraction used by
//! the pointwise non-local operators.

use std::fmt::Write as _;

use crate::error::{domain, Error, Result};
use crate::spline::{EndCondition, UniformSpline};

const FORMAT_HEADER: &str = "# gridfield v1";

/// A real function of one variable as seen by the singular-integral operators.
pub trait Field1 {
    fn value(&self, x: f64) -> f64;

    /// Shortest length on which the function varies appreciably.
    fn length_scale(&self) -> f64;

    /// Half-width of the region that contains the function's structure.
    fn extent(&self) -> f64;

    fn period(&self) -> Option<f64> {
        None
    }

    /// Locations where the function is less smooth or changes character.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Points whose values are exact samples rather than interpolants.
    fn is_node(&self, _x: f64) -> bool {
        true
    }

    /// Width of the panels needed to resolve the function near its structure,
    /// and the half-width of the region where that resolution is needed.
    fn resolution(&self) -> Option<(f64, f64)> {
        None
    }
}

/// How a one-dimensional [`GridField`] continues beyond its grid.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtensionRule {
    /// The nearest edge value.
    Constant,
    /// `L + (f(edge) - L)(|edge|/|x|)^p` with limit `L` on each side.
    PowerLaw { exponent: f64, left_limit: f64, right_limit: f64 },
    /// `f(edge) - p ln(|x|/|edge|)`, the behaviour of the logarithm of a power law.
    LogPowerLaw { exponent: f64 },
    /// The declared expansion `Σ c_k |x|^(-p_k)` on both sides, given as `(p_k, c_k)`.
    Series { terms: Vec<(f64, f64)> },
    /// The samples are one period.
    Periodic,
}

impl ExtensionRule {
    pub fn power_law(exponent: f64) -> Self {
        ExtensionRule::PowerLaw { exponent, left_limit: 0.0, right_limit: 0.0 }
    }

    /// Text form used in configuration and field files.
    pub fn to_text(&self) -> String {
        match self {
            ExtensionRule::Constant => "constant".into(),
            ExtensionRule::PowerLaw { exponent, left_limit, right_limit } => {
                if *left_limit == 0.0 && *right_limit == 0.0 {
                    format!("power-law:{exponent}")
                } else {
                    format!("power-law:{exponent}:{left_limit}:{right_limit}")
                }
            }
            ExtensionRule::LogPowerLaw { exponent } => format!("log-power-law:{exponent}"),
            ExtensionRule::Series { terms } => {
                let parts: Vec<String> = terms.iter().map(|(p, c)| format!("{p}/{c}")).collect();
                format!("series:{}", parts.join(","))
            }
            ExtensionRule::Periodic => "periodic".into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse { line: 0, msg: format!("extension rule '{text}': {m}") };
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(&e.to_string()));
        let mut parts = text.trim().split(':');
        let rule = match parts.next().unwrap_or("") {
            "constant" => ExtensionRule::Constant,
            "periodic" => ExtensionRule::Periodic,
            "power-law" => {
                let p = num(parts.next().ok_or_else(|| bad("missing exponent"))?)?;
                let l = parts.next().map(num).transpose()?.unwrap_or(0.0);
                let r = parts.next().map(num).transpose()?.unwrap_or(0.0);
                ExtensionRule::PowerLaw { exponent: p, left_limit: l, right_limit: r }
            }
            "log-power-law" => ExtensionRule::LogPowerLaw { exponent: num(parts.next().ok_or_else(|| bad("missing exponent"))?)? },
            "series" => {
                let body = parts.next().ok_or_else(|| bad("missing terms"))?;
                let mut terms = Vec::new();
                for t in body.split(',') {
                    let (p, c) = t.split_once('/').ok_or_else(|| bad("terms are exponent/coefficient"))?;
                    terms.push((num(p)?, num(c)?));
                }
                ExtensionRule::Series { terms }
            }
            other => return Err(bad(&format!("unknown rule {other}"))),
        };
        if parts.next().is_some() {
            return Err(bad("trailing fields"));
        }
        Ok(rule)
    }
}

/// Samples on a uniform grid in one or two dimensions.
///
/// One-dimensional fields are interpolated by a cubic spline and continued
/// beyond the grid by their [`ExtensionRule`]. Nodes are `origin + i·spacing`
/// along each axis; two-dimensional values are stored row-major with the
/// first coordinate varying slowest.
#[derive(Debug, Clone)]
pub struct GridField {
    dim: usize,
    n: usize,
    origin: f64,
    spacing: f64,
    values: Vec<f64>,
    extension: ExtensionRule,
    spline: Option<UniformSpline>,
}

impl PartialEq for GridField {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && self.origin.to_bits() == other.origin.to_bits()
            && self.spacing.to_bits() == other.spacing.to_bits()
            && self.extension == other.extension
            && self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl GridField {
    pub fn new_1d(origin: f64, spacing: f64, values: Vec<f64>, extension: ExtensionRule) -> Result<Self> {
        let n = values.len();
        Self::validate(1, n, origin, spacing, &values, &extension)?;
        let spline = Some(if extension == ExtensionRule::Periodic {
            UniformSpline::new(origin, spacing, values.clone(), EndCondition::Periodic)
        } else {
            UniformSpline::new(origin, spacing, values.clone(), EndCondition::Estimated)
        });
        Ok(Self { dim: 1, n, origin, spacing, values, extension, spline })
    }

    pub fn new_2d(origin: f64, spacing: f64, n: usize, values: Vec<f64>, extension: ExtensionRule) -> Result<Self> {
        if values.len() != n * n {
            return domain(format!("expected {} values for a {n}x{n} grid, got {}", n * n, values.len()));
        }
        if !matches!(extension, ExtensionRule::Constant | ExtensionRule::Periodic) {
            return domain("two-dimensional fields support constant or periodic extension only");
        }
        Self::validate(2, n, origin, spacing, &values, &extension)?;
        Ok(Self { dim: 2, n, origin, spacing, values, extension, spline: None })
    }

    fn validate(dim: usize, n: usize, origin: f64, spacing: f64, values: &[f64], ext: &ExtensionRule) -> Result<()> {
        if n < 5 {
            return domain("a grid needs at least five points per axis");
        }
        if !(spacing > 0.0 && spacing.is_finite() && origin.is_finite()) {
            return domain("grid spacing must be positive and finite");
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("value {i} is not finite"));
        }
        if dim == 1 {
            let last = origin + spacing * (n - 1) as f64;
            let needs_straddle = matches!(ext, ExtensionRule::PowerLaw { .. } | ExtensionRule::LogPowerLaw { .. });
            if needs_straddle && !(origin < 0.0 && last > 0.0) {
                return domain("power-law extensions need a grid that straddles the origin");
            }
            if let ExtensionRule::Series { terms } = ext {
                if terms.is_empty() || terms.iter().any(|(p, c)| !(p.is_finite() && c.is_finite())) {
                    return domain("series extension needs finite terms");
                }
                if origin.abs().min(last.abs()) == 0.0 {
                    return domain("series extension needs nonzero grid edges");
                }
            }
        }
        Ok(())
    }

    /// `n` points spanning `[-half_width, half_width]` with `f` sampled at each.
    pub fn sample(n: usize, half_width: f64, extension: ExtensionRule, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 5 {
            return domain("a grid needs at least five points");
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        let values = (0..n).map(|i| f(-half_width + h * i as f64)).collect();
        Self::new_1d(-half_width, h, values, extension)
    }

    /// `n` samples of one period `[-L/2, L/2)`.
    pub fn sample_periodic(n: usize, period: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 5 {
            return domain("a grid needs at least five points");
        }
        let h = period / n as f64;
        let values = (0..n).map(|i| f(-0.5 * period + h * i as f64)).collect();
        Self::new_1d(-0.5 * period, h, values, ExtensionRule::Periodic)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extension(&self) -> &ExtensionRule {
        &self.extension
    }

    pub fn is_periodic(&self) -> bool {
        self.extension == ExtensionRule::Periodic
    }

    /// Whether every value is strictly positive.
    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|v| *v > 0.0)
    }

    /// Coordinate of node `i` along an axis.
    pub fn x(&self, i: usize) -> f64 {
        self.origin + self.spacing * i as f64
    }

    pub fn x_min(&self) -> f64 {
        self.origin
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    /// Length of one period for periodic fields.
    pub fn period_length(&self) -> Option<f64> {
        self.is_periodic().then(|| self.spacing * self.n as f64)
    }

    /// The same samples with a different extension rule.
    pub fn with_extension(&self, extension: ExtensionRule) -> Result<Self> {
        match self.dim {
            1 => Self::new_1d(self.origin, self.spacing, self.values.clone(), extension),
            _ => Self::new_2d(self.origin, self.spacing, self.n, self.values.clone(), extension),
        }
    }

    /// Central part `[lo, hi]` of the grid holding the given fraction of its width.
    pub fn central(&self, fraction: f64) -> (f64, f64) {
        let mid = 0.5 * (self.x_min() + self.x_max());
        let half = 0.5 * fraction * (self.x_max() - self.x_min());
        (mid - half, mid + half)
    }

    /// Index of the node at `x`, if `x` is one.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let s = (x - self.origin) / self.spacing;
        let i = s.round();
        ((s - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.n).then_some(i as usize)
    }

    /// Value at `x` for one-dimensional fields, including the extension.
    pub fn value_at(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let spline = self.spline.as_ref().expect("one-dimensional field");
        let (lo, hi) = (self.x_min(), self.x_max());
        if self.is_periodic() || (lo..=hi).contains(&x) {
            return spline.eval(x);
        }
        let right = x > hi;
        let (edge, fe) = if right { (hi, self.values[self.n - 1]) } else { (lo, self.values[0]) };
        match &self.extension {
            ExtensionRule::Constant | ExtensionRule::Periodic => fe,
            ExtensionRule::PowerLaw { exponent, left_limit, right_limit } => {
                let lim = if right { *right_limit } else { *left_limit };
                lim + (fe - lim) * (edge.abs() / x.abs()).powf(*exponent)
            }
            ExtensionRule::LogPowerLaw { exponent } => fe - exponent * (x.abs() / edge.abs()).ln(),
            ExtensionRule::Series { terms } => terms.iter().map(|(p, c)| c * x.abs().powf(-p)).sum(),
        }
    }

    /// Value at a grid node `(i, j)` of a two-dimensional field.
    pub fn value_2d(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// `∫ f` over the real line, including the extension; infinite when the
    /// extension is not integrable. Periodic fields integrate over one period.
    pub fn integral(&self) -> f64 {
        assert_eq!(self.dim, 1, "integral is defined for one-dimensional fields");
        let spline = self.spline.as_ref().expect("one-dimensional field");
        let inner = spline.integral();
        let (lo, hi) = (self.x_min(), self.x_max());
        let (fl, fr) = (self.values[0], self.values[self.n - 1]);
        let tails = match &self.extension {
            ExtensionRule::Periodic => 0.0,
            ExtensionRule::Constant => {
                if fl == 0.0 && fr == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ExtensionRule::PowerLaw { exponent, left_limit, right_limit } => {
                if *left_limit != 0.0 || *right_limit != 0.0 || *exponent <= 1.0 {
                    f64::INFINITY
                } else {
                    (fl * lo.abs() + fr * hi.abs()) / (exponent - 1.0)
                }
            }
            ExtensionRule::LogPowerLaw { .. } => f64::INFINITY,
            ExtensionRule::Series { terms } => {
                if terms.iter().any(|(p, c)| *p <= 1.0 && *c != 0.0) {
                    f64::INFINITY
                } else {
                    terms.iter().map(|(p, c)| c * (lo.abs().powf(1.0 - p) + hi.abs().powf(1.0 - p)) / (p - 1.0)).sum()
                }
            }
        };
        inner + tails
    }

    /// Versioned columnar text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_HEADER}");
        let _ = writeln!(s, "# dim={}", self.dim);
        let _ = writeln!(s, "# n={}", self.n);
        let _ = writeln!(s, "# origin={}", self.origin);
        let _ = writeln!(s, "# spacing={}", self.spacing);
        let _ = writeln!(s, "# extension={}", self.extension.to_text());
        let _ = writeln!(s, "# positive={}", self.is_positive());
        if self.dim == 1 {
            let _ = writeln!(s, "x,value");
            for (i, v) in self.values.iter().enumerate() {
                let _ = writeln!(s, "{},{v}", self.x(i));
            }
        } else {
            let _ = writeln!(s, "x,y,value");
            for i in 0..self.n {
                for j in 0..self.n {
                    let _ = writeln!(s, "{},{},{}", self.x(i), self.x(j), self.value_2d(i, j));
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, l)| l.trim()) != Some(FORMAT_HEADER) {
            return Err(Error::Parse { line: 1, msg: format!("expected header '{FORMAT_HEADER}'") });
        }
        let (mut dim, mut n, mut origin, mut spacing, mut ext) = (None, None, None, None, None);
        let mut values = Vec::new();
        let mut header_done = false;
        for (ln, line) in lines {
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(m) = line.strip_prefix("# ") {
                let (k, v) = m.split_once('=').ok_or_else(|| perr("expected key=value".into()))?;
                let pf = |v: &str| v.parse::<f64>().map_err(|e| perr(format!("{k}: {e}")));
                let pu = |v: &str| v.parse::<usize>().map_err(|e| perr(format!("{k}: {e}")));
                match k {
                    "dim" => dim = Some(pu(v)?),
                    "n" => n = Some(pu(v)?),
                    "origin" => origin = Some(pf(v)?),
                    "spacing" => spacing = Some(pf(v)?),
                    "extension" => ext = Some(ExtensionRule::parse(v).map_err(|e| perr(e.to_string()))?),
                    "positive" => {}
                    _ => return Err(perr(format!("unknown key {k}"))),
                }
            } else if !header_done && (line == "x,value" || line == "x,y,value") {
                header_done = true;
            } else if header_done {
                let v = line.rsplit(',').next().unwrap_or("");
                values.push(v.trim().parse::<f64>().map_err(|e| perr(e.to_string()))?);
            } else {
                return Err(perr(format!("unexpected line '{line}'")));
            }
        }
        let missing = |k: &str| Error::Parse { line: 0, msg: format!("missing {k}") };
        let dim = dim.ok_or_else(|| missing("dim"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let origin = origin.ok_or_else(|| missing("origin"))?;
        let spacing = spacing.ok_or_else(|| missing("spacing"))?;
        let ext = ext.ok_or_else(|| missing("extension"))?;
        match dim {
            1 => {
                if values.len() != n {
                    return Err(Error::Parse { line: 0, msg: format!("expected {n} rows, found {}", values.len()) });
                }
                Self::new_1d(origin, spacing, values, ext)
            }
            2 => Self::new_2d(origin, spacing, n, values, ext),
            _ => Err(Error::Parse { line: 0, msg: format!("unsupported dimension {dim}") }),
        }
    }
}

impl Field1 for GridField {
    fn value(&self, x: f64) -> f64 {
        self.value_at(x)
    }

    fn length_scale(&self) -> f64 {
        self.spacing
    }

    fn extent(&self) -> f64 {
        self.x_min().abs().max(self.x_max().abs())
    }

    fn period(&self) -> Option<f64> {
        self.period_length()
    }

    fn breakpoints(&self) -> Vec<f64> {
        if self.is_periodic() {
            Vec::new()
        } else {
            vec![self.x_min(), self.x_max()]
        }
    }

    fn is_node(&self, x: f64) -> bool {
        self.is_periodic() && {
            let p = self.spacing * self.n as f64;
            let wrapped = self.origin + (x - self.origin).rem_euclid(p);
            self.node_index(wrapped).is_some()
        } || self.node_index(x).is_some()
    }

    fn resolution(&self) -> Option<(f64, f64)> {
        let w = 16.0 * self.spacing;
        match self.period_length() {
            Some(p) => Some((w.min(0.25 * p), f64::INFINITY)),
            None => Some((w, self.x_max() - self.x_min())),
        }
    }
}

/// A field given by a closure, with its scales declared by the caller.
pub struct FnField<F: Fn(f64) -> f64> {
    pub f: F,
    pub length_scale: f64,
    pub extent: f64,
    pub period: Option<f64>,
    pub breakpoints: Vec<f64>,
}

impl<F: Fn(f64) -> f64> FnField<F> {
    pub fn new(f: F, length_scale: f64, extent: f64) -> Self {
        Self { f, length_scale, extent, period: None, breakpoints: Vec::new() }
    }
}

impl<F: Fn(f64) -> f64> Field1 for FnField<F> {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn length_scale(&self) -> f64 {
        self.length_scale
    }
    fn extent(&self) -> f64 {
        self.extent
    }
    fn period(&self) -> Option<f64> {
        self.period
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// `ln f` for a positive field.
pub struct LogField<'a, F: Field1 + ?Sized>(pub &'a F);

impl<F: Field1 + ?Sized> Field1 for LogField<'_, F> {
    fn value(&self, x: f64) -> f64 {
        self.0.value(x).ln()
    }
    fn length_scale(&self) -> f64 {
        self.0.length_scale()
    }
    fn extent(&self) -> f64 {
        self.0.extent()
    }
    fn period(&self) -> Option<f64> {
        self.0.period()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.0.breakpoints()
    }
    fn is_node(&self, x: f64) -> bool {
        self.0.is_node(x)
    }
    fn resolution(&self) -> Option<(f64, f64)> {
        self.0.resolution()
    }
}
