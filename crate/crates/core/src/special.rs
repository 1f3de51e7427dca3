//! Special functions used by the kernel constructions.

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Euler beta function.
pub fn beta_fn(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Bessel function of the first kind of order zero.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Modified Bessel function of the second kind of order zero, `x > 0`.
///
/// Trapezoidal rule on `K0(x) = ∫₀^∞ exp(-x cosh s) ds`; the integrand is
/// analytic in a strip so the rule converges geometrically in the step.
pub fn bessel_k0(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x > 700.0 {
        return 0.0;
    }
    let h = 0.2;
    let mut sum = 0.5 * (-x).exp();
    let mut k = 1;
    loop {
        let s = k as f64 * h;
        let term = (-x * s.cosh()).exp();
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        k += 1;
    }
    sum * h
}

/// exp(z) - z - 1 with full relative accuracy near zero.
pub(crate) fn exp_minus_linear(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        // series through z^6; truncation error below 1e-28 relative here
        z2 * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0))))
    } else if z.abs() < 1.0 {
        z.exp_m1() - z
    } else {
        z.exp() - z - 1.0
    }
}
