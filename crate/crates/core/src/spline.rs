//! Cubic splines on uniform grids.

/// End conditions for [`UniformSpline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndCondition {
    /// Prescribed first derivatives at both ends.
    Clamped(f64, f64),
    /// First derivatives estimated by fourth-order one-sided differences.
    Estimated,
    /// The data is one period of a periodic function (first node not repeated).
    Periodic,
}

/// Interpolating cubic spline through `(x0 + i*h, y[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
    periodic: bool,
}

impl UniformSpline {
    pub fn new(x0: f64, h: f64, y: Vec<f64>, end: EndCondition) -> Self {
        assert!(h > 0.0);
        let n = y.len();
        match end {
            EndCondition::Periodic => {
                assert!(n >= 3, "periodic spline needs three nodes");
                let m = periodic_second_derivatives(&y, h);
                Self { x0, h, y, m, periodic: true }
            }
            _ => {
                assert!(n >= 2, "spline needs two nodes");
                let (d0, dn) = match end {
                    EndCondition::Clamped(a, b) => (a, b),
                    _ => estimate_end_slopes(&y, h),
                };
                let m = clamped_second_derivatives(&y, h, d0, dn);
                Self { x0, h, y, m, periodic: false }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.y.len() - 1) as f64
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let n = self.y.len();
        let mut s = (x - self.x0) / self.h;
        if self.periodic {
            s = s.rem_euclid(n as f64);
            let i = (s.floor() as usize).min(n - 1);
            return (i, s - i as f64, 0.0);
        }
        let i = if s <= 0.0 { 0 } else { (s.floor() as usize).min(n - 2) };
        (i, s - i as f64, 0.0)
    }

    fn node(&self, i: usize) -> (f64, f64) {
        let n = self.y.len();
        let j = if self.periodic { i % n } else { i };
        (self.y[j], self.m[j])
    }

    /// Value, first and second derivative at `x`.
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let (i, t, _) = self.locate(x);
        let (y0, m0) = self.node(i);
        let (y1, m1) = self.node(i + 1);
        let h = self.h;
        let a = 1.0 - t;
        let b = t;
        let h2 = h * h;
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h2 / 6.0;
        let d = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }

    /// Integral over the whole node range (one full period when periodic).
    pub fn integral(&self) -> f64 {
        let n = self.y.len();
        let cells = if self.periodic { n } else { n - 1 };
        let h = self.h;
        let mut sum = 0.0;
        for i in 0..cells {
            let (y0, m0) = self.node(i);
            let (y1, m1) = self.node(i + 1);
            sum += 0.5 * h * (y0 + y1) - h * h * h * (m0 + m1) / 24.0;
        }
        sum
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, t, _) = self.locate(x);
        let (y0, m0) = self.node(i);
        let (y1, m1) = self.node(i + 1);
        let a = 1.0 - t;
        let b = t;
        a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * self.h * self.h / 6.0
    }
}

fn estimate_end_slopes(y: &[f64], h: f64) -> (f64, f64) {
    let n = y.len();
    if n < 5 {
        return ((y[1] - y[0]) / h, (y[n - 1] - y[n - 2]) / h);
    }
    let d0 = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h);
    let dn = (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4] + 3.0 * y[n - 5]) / (12.0 * h);
    (d0, dn)
}

fn clamped_second_derivatives(y: &[f64], h: f64, d0: f64, dn: f64) -> Vec<f64> {
    let n = y.len();
    // Tridiagonal system with rows (1, 4, 1) in the interior and (2, 1) / (1, 2) at the ends.
    let mut sub = vec![1.0; n];
    let mut diag = vec![4.0; n];
    let mut sup = vec![1.0; n];
    let mut rhs = vec![0.0; n];
    let s = 6.0 / (h * h);
    diag[0] = 2.0;
    rhs[0] = s * (y[1] - y[0] - h * d0);
    diag[n - 1] = 2.0;
    rhs[n - 1] = s * (h * dn - (y[n - 1] - y[n - 2]));
    for i in 1..n - 1 {
        rhs[i] = s * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
    }
    sub[0] = 0.0;
    sup[n - 1] = 0.0;
    solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs);
    rhs
}

fn solve_tridiagonal(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
}

fn periodic_second_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    // Cyclic tridiagonal (1, 4, 1) solved by Sherman-Morrison.
    let n = y.len();
    let s = 6.0 / (h * h);
    let rhs: Vec<f64> = (0..n)
        .map(|i| s * (y[(i + 1) % n] - 2.0 * y[i] + y[(i + n - 1) % n]))
        .collect();
    let gamma = -4.0;
    let sub = vec![1.0; n];
    let sup = vec![1.0; n];
    let mut diag = vec![4.0; n];
    diag[0] = 4.0 - gamma;
    diag[n - 1] = 4.0 - 1.0 / gamma;
    let mut x = rhs.clone();
    let mut d1 = diag.clone();
    solve_tridiagonal(&sub, &mut d1, &sup, &mut x);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = 1.0;
    let mut d2 = diag;
    solve_tridiagonal(&sub, &mut d2, &sup, &mut u);
    let fact = (x[0] + x[n - 1] / gamma) / (1.0 + u[0] + u[n - 1] / gamma);
    x.iter().zip(&u).map(|(xi, ui)| xi - fact * ui).collect()
}
