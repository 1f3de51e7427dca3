//! Finite continuous-time Markov chains and the closed forms of the complete graph `K_n`.

use std::fmt::Write as _;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::core_ops::{generator_discrete, JumpKernel};
use crate::error::{domain, Error, Result};

/// Entries of `e^{tQ}` in `[-CLIP, 0)` are rounding and are set to zero.
pub const CLIP: f64 = 1e-14;

const HEADER: &str = "# markov-chain v1";

/// A chain on the states `0..n` with Q-matrix `Q`.
#[derive(Debug)]
pub struct MarkovChain {
    kernel: JumpKernel,
    symmetric: bool,
    eigen: OnceLock<SymmetricEigen<f64, nalgebra::Dyn>>,
}

impl Clone for MarkovChain {
    fn clone(&self) -> Self {
        Self { kernel: self.kernel.clone(), symmetric: self.symmetric, eigen: OnceLock::new() }
    }
}

/// `e^{tQ}` together with the number of clipped entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub matrix: DMatrix<f64>,
    pub clipped: usize,
}

impl MarkovChain {
    /// Chain with the off-diagonal rates of `rates`; the diagonal is recomputed.
    pub fn from_rates(rates: DMatrix<f64>) -> Result<Self> {
        let kernel = JumpKernel::discrete(rates)?;
        let q = kernel.generator().expect("discrete kernel");
        let symmetric = q == &q.transpose();
        Ok(Self { kernel, symmetric, eigen: OnceLock::new() })
    }

    /// Chain on `n` states from directed edges `(src, dst, rate)`; repeated edges add up.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return domain("a chain needs at least one state");
        }
        let mut q = DMatrix::zeros(n, n);
        for &(a, b, r) in edges {
            let len = n;
            if a >= n {
                return Err(Error::Index { index: a, len });
            }
            if b >= n {
                return Err(Error::Index { index: b, len });
            }
            if a == b {
                return domain(format!("self-loop at state {a}"));
            }
            if !(r >= 0.0 && r.is_finite()) {
                return domain(format!("rate {r} on edge {a} -> {b} must be finite and non-negative"));
            }
            q[(a, b)] += r;
        }
        Self::from_rates(q)
    }

    pub fn states(&self) -> usize {
        self.generator().nrows()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        self.kernel.generator().expect("discrete kernel")
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.kernel
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Every state reaches every other one along positive rates, so `e^{tQ} > 0` for `t > 0`.
    pub fn is_irreducible(&self) -> bool {
        let q = self.generator();
        let n = q.nrows();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let r = if forward { q[(i, j)] } else { q[(j, i)] };
                    if i != j && r > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Eigenvalues of a symmetric `Q`, ascending.
    pub fn eigenvalues(&self) -> Option<Vec<f64>> {
        if !self.symmetric {
            return None;
        }
        let mut v: Vec<f64> = self.eigen().eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Some(v)
    }

    fn eigen(&self) -> &SymmetricEigen<f64, nalgebra::Dyn> {
        self.eigen.get_or_init(|| self.generator().clone().symmetric_eigen())
    }

    /// `e^{tQ}`: by the cached eigendecomposition when `Q` is symmetric, by
    /// scaling and squaring otherwise.
    pub fn transition(&self, t: f64) -> Result<Transition> {
        if !(t >= 0.0 && t.is_finite()) {
            return domain(format!("time must be finite and non-negative, got {t}"));
        }
        let n = self.states();
        if t == 0.0 {
            return Ok(Transition { matrix: DMatrix::identity(n, n), clipped: 0 });
        }
        let mut p = if self.symmetric {
            let e = self.eigen();
            let v = &e.eigenvectors;
            let scaled = DMatrix::from_fn(n, n, |i, k| v[(i, k)] * (e.eigenvalues[k] * t).exp());
            &scaled * v.transpose()
        } else {
            (self.generator() * t).exp()
        };
        let mut clipped = 0;
        for x in p.iter_mut() {
            if *x < 0.0 {
                if *x < -CLIP {
                    return Err(Error::Construction(format!("matrix exponential produced the entry {x} at t = {t}")));
                }
                *x = 0.0;
                clipped += 1;
            }
        }
        Ok(Transition { matrix: p, clipped })
    }

    pub fn transition_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        self.transition(t).map(|tr| tr.matrix)
    }

    /// `-L(log u)(x)`, the left side of the Li-Yau inequality.
    pub fn neg_l_log(&self, u: &[f64], x: usize) -> Result<f64> {
        if let Some(i) = u.iter().position(|v| !(*v > 0.0)) {
            return domain(format!("entry {i} of u is not positive"));
        }
        let logs: Vec<f64> = u.iter().map(|v| v.ln()).collect();
        generator_discrete(&logs, &self.kernel, x).map(|v| -v)
    }

    /// Edge list in the `# markov-chain v1` format.
    pub fn to_edge_list(&self) -> String {
        let q = self.generator();
        let n = q.nrows();
        let mut s = format!("{HEADER}\nstates {n}\n");
        for i in 0..n {
            for j in 0..n {
                if i != j && q[(i, j)] > 0.0 {
                    let _ = writeln!(s, "{i} {j} {}", q[(i, j)]);
                }
            }
        }
        s
    }

    /// Reads `# markov-chain v1`, a `states N` line and `src dst rate` lines.
    /// An `undirected` line makes every following edge act in both directions.
    /// Blank lines and further `#` lines are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == HEADER => {}
            _ => return Err(Error::Parse { line: 1, msg: format!("expected header '{HEADER}'") }),
        }
        let mut n = None;
        let mut undirected = false;
        let mut edges = Vec::new();
        for (i, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["states", k] => n = Some(k.parse::<usize>().map_err(|e| bad(format!("state count: {e}")))?),
                ["undirected"] => undirected = true,
                [a, b, r] => {
                    let a = a.parse::<usize>().map_err(|e| bad(format!("source: {e}")))?;
                    let b = b.parse::<usize>().map_err(|e| bad(format!("target: {e}")))?;
                    let r = r.parse::<f64>().map_err(|e| bad(format!("rate: {e}")))?;
                    edges.push((a, b, r));
                    if undirected {
                        edges.push((b, a, r));
                    }
                }
                _ => return Err(bad(format!("cannot read '{line}'"))),
            }
        }
        let n = n.ok_or(Error::Parse { line: 2, msg: "missing 'states N' line".into() })?;
        Self::from_edges(n, &edges)
    }
}

/// The unweighted complete graph: rate one between any two distinct states.
pub fn complete_graph(n: usize) -> Result<MarkovChain> {
    if n < 2 {
        return domain(format!("complete graph needs n >= 2, got {n}"));
    }
    let mut q = DMatrix::from_element(n, n, 1.0);
    q.fill_diagonal(0.0);
    MarkovChain::from_rates(q)
}

/// `u(t) = e^{tQ} u0`.
pub fn solve_markov(chain: &MarkovChain, u0: &[f64], t: f64) -> Result<Vec<f64>> {
    if u0.len() != chain.states() {
        return domain(format!("u0 has {} entries for {} states", u0.len(), chain.states()));
    }
    if let Some(i) = u0.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return domain(format!("u0[{i}] = {} must be positive", u0[i]));
    }
    let p = chain.transition_matrix(t)?;
    Ok((p * DVector::from_column_slice(u0)).iter().copied().collect())
}

fn kn_args(n: usize, t: f64) -> Result<(f64, f64, f64)> {
    if n < 2 {
        return domain(format!("complete graph needs n >= 2, got {n}"));
    }
    if !(t > 0.0) {
        return domain(format!("time must be positive, got {t}"));
    }
    let nf = n as f64;
    // e^{-nt} and 1 - e^{-nt} without cancellation
    Ok((nf, (-nf * t).exp(), -(-nf * t).exp_m1()))
}

/// `(p(t,x,x), p(t,x,y))` for `x ≠ y` on `K_n`.
pub fn transition_kn(n: usize, t: f64) -> Result<(f64, f64)> {
    if t == 0.0 && n >= 2 {
        return Ok((1.0, 0.0));
    }
    let (nf, e, one_minus) = kn_args(n, t)?;
    Ok(((1.0 + (nf - 1.0) * e) / nf, one_minus / nf))
}

/// `-L(log p(t,·,y))(x)` on `K_n`, for `x = y` when `same_site`.
pub fn l_log_p_kn(n: usize, t: f64, same_site: bool) -> Result<f64> {
    let (nf, e, one_minus) = kn_args(n, t)?;
    let ratio = ((nf - 1.0) * e).ln_1p() - one_minus.ln();
    Ok(if same_site { (nf - 1.0) * ratio } else { -ratio })
}

/// `φ(t) = (n-1) log((1+(n-1)e^{-nt}) / (1-e^{-nt}))`, the sharp Li-Yau bound on `K_n`.
pub fn phi_kn(n: usize, t: f64) -> Result<f64> {
    l_log_p_kn(n, t, true)
}

/// `φ'(t) = -n²(n-1)e^{-nt} / ((1+(n-1)e^{-nt})(1-e^{-nt}))`.
pub fn phi_kn_prime(n: usize, t: f64) -> Result<f64> {
    let (nf, e, one_minus) = kn_args(n, t)?;
    Ok(-nf * nf * (nf - 1.0) * e / ((1.0 + (nf - 1.0) * e) * one_minus))
}

/// `F(r) = (n-1)(e^{r/(n-1)} - (n-1)e^{-r/(n-1)} + n - 2)`.
pub fn cd_function_f(n: usize, r: f64) -> Result<f64> {
    if n < 2 {
        return domain(format!("complete graph needs n >= 2, got {n}"));
    }
    if !(r >= 0.0) {
        return domain(format!("F is defined for r >= 0, got {r}"));
    }
    let m = (n - 1) as f64;
    let s = r / m;
    // e^s - (n-1)e^{-s} + n - 2 = (e^s - 1) - (n-1)(e^{-s} - 1)
    Ok(m * (s.exp_m1() - m * (-s).exp_m1()))
}

/// `φ'(t) + F(φ(t))`, which vanishes because `φ` is the relaxation function of `F`.
pub fn relaxation_residual(n: usize, t: f64) -> Result<f64> {
    Ok(phi_kn_prime(n, t)? + cd_function_f(n, phi_kn(n, t)?)?)
}

/// `per_decade` log-spaced points per decade from `lo` to `hi`, both included.
pub fn log_time_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && per_decade > 0);
    let decades = (hi / lo).log10();
    let steps = ((decades * per_decade as f64).round() as usize).max(1);
    (0..=steps).map(|k| lo * (hi / lo).powf(k as f64 / steps as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn complete_graph_generator() {
        let k2 = complete_graph(2).unwrap();
        assert_eq!(k2.generator(), &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
        let ev = k2.eigenvalues().unwrap();
        assert!((ev[0] + 2.0).abs() < 1e-14 && ev[1].abs() < 1e-14);
        let k3 = complete_graph(3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k3.generator()[(i, j)], if i == j { -2.0 } else { 1.0 });
            }
        }
        assert!(complete_graph(1).is_err());
    }

    #[test]
    fn kn_transition_matches_closed_form() {
        for n in 2..=8 {
            let k = complete_graph(n).unwrap();
            assert_eq!(k.transition_matrix(0.0).unwrap(), DMatrix::identity(n, n));
            for t in [1e-3, 0.1, 0.7, 3.0, 20.0] {
                let p = k.transition_matrix(t).unwrap();
                let (d, o) = transition_kn(n, t).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        let want = if i == j { d } else { o };
                        assert!((p[(i, j)] - want).abs() < 1e-12, "n={n} t={t}");
                    }
                }
            }
        }
        let p = complete_graph(2).unwrap().transition_matrix(2f64.ln() / 2.0).unwrap();
        assert!((p[(0, 0)] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn kn_log_kernel_values() {
        let t = 3f64.ln() / 2.0;
        let ln2 = 2f64.ln();
        assert!((l_log_p_kn(2, t, true).unwrap() - ln2).abs() < 1e-14);
        assert!((l_log_p_kn(2, t, false).unwrap() + ln2).abs() < 1e-14);
        assert!((phi_kn(2, t).unwrap() - ln2).abs() < 1e-14);
        assert!(phi_kn(4, 60.0).unwrap().abs() < 1e-90);
        assert!(l_log_p_kn(4, 60.0, false).unwrap().abs() < 1e-90);
        for t in [0.01f64, 0.5, 2.0] {
            let coth = 1.0 / t.tanh();
            assert!((phi_kn(2, t).unwrap() - coth.ln()).abs() < 1e-13);
        }
        assert!(phi_kn(3, 0.0).is_err());
    }

    #[test]
    fn cd_function_values() {
        for n in 2..6 {
            assert_eq!(cd_function_f(n, 0.0).unwrap(), 0.0);
        }
        for r in [0.1, 1.0, 4.0] {
            assert!((cd_function_f(2, r).unwrap() - 2.0 * f64::sinh(r)).abs() < 1e-13 * r.cosh());
        }
        let e = std::f64::consts::E;
        assert!((cd_function_f(3, 2.0).unwrap() - 2.0 * (e - 2.0 / e + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn relaxation_residual_vanishes() {
        assert!(relaxation_residual(2, 1.0).unwrap().abs() < 1e-12);
        assert!(relaxation_residual(5, 0.1).unwrap().abs() < 1e-10);
        assert!(relaxation_residual(3, 10.0).unwrap().abs() < 1e-12);
        for n in 2..=10 {
            for t in log_time_grid(1e-3, 20.0, 20) {
                let r = relaxation_residual(n, t).unwrap();
                assert!(r.abs() < 1e-10, "n={n} t={t} r={r}");
            }
        }
    }

    #[test]
    fn solve_markov_on_k2() {
        let k = complete_graph(2).unwrap();
        for t in [0.0, 0.3, 2.0] {
            let u = solve_markov(&k, &[2.0, 1e-300], t).unwrap();
            let e = (-2.0 * t).exp();
            assert!((u[0] - (1.0 + e)).abs() < 1e-14 && (u[1] - (1.0 - e)).abs() < 1e-14);
        }
        assert_eq!(solve_markov(&k, &[1.0, 1.0], 5.0).unwrap().iter().map(|v| (v - 1.0).abs() < 1e-14).collect::<Vec<_>>(), [true, true]);
        assert!(solve_markov(&k, &[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let text = "# markov-chain v1\nstates 3\n0 1 0.5\nundirected\n1 2 2\n";
        let c = MarkovChain::parse_edge_list(text).unwrap();
        assert!(!c.is_symmetric() && !c.is_irreducible());
        assert_eq!(c.generator()[(2, 1)], 2.0);
        let back = MarkovChain::parse_edge_list(&c.to_edge_list()).unwrap();
        assert_eq!(back.generator(), c.generator());
        assert!(matches!(MarkovChain::parse_edge_list("states 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(MarkovChain::parse_edge_list("# markov-chain v1\nstates 2\n0 x 1\n"), Err(Error::Parse { line: 3, .. })));
        assert!(MarkovChain::parse_edge_list("# markov-chain v1\nstates 2\n0 5 1\n").is_err());
    }

    fn chain_strategy() -> impl Strategy<Value = (DMatrix<f64>, bool)> {
        (2usize..7, any::<bool>()).prop_flat_map(|(n, sym)| {
            prop::collection::vec(0.1f64..2.0, n * n).prop_map(move |v| {
                let mut q = DMatrix::from_vec(n, n, v);
                if sym {
                    q = (&q + q.transpose()) * 0.5;
                }
                (q, sym)
            })
        })
    }

    proptest! {
        #[test]
        fn semigroup_and_stochastic_rows((q, sym) in chain_strategy(), s in 0.01f64..3.0, t in 0.01f64..3.0) {
            let c = MarkovChain::from_rates(q).unwrap();
            prop_assert_eq!(c.is_symmetric(), sym);
            let ps = c.transition_matrix(s).unwrap();
            let pt = c.transition_matrix(t).unwrap();
            let pst = c.transition_matrix(s + t).unwrap();
            let diff = (&ps * &pt - &pst).abs().max();
            prop_assert!(diff < 1e-11, "{}", diff);
            for i in 0..c.states() {
                prop_assert!((pst.row(i).sum() - 1.0).abs() < 1e-12);
            }
            prop_assert!(pst.iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn same_site_dominates(n in 2usize..12, t in 1e-3f64..30.0) {
            prop_assert!(l_log_p_kn(n, t, true).unwrap() >= l_log_p_kn(n, t, false).unwrap());
        }

        #[test]
        fn kn_li_yau(n in 2usize..=10, seed in prop::collection::vec(-4.6f64..4.6, 10), t in 1e-2f64..10.0) {
            let k = complete_graph(n).unwrap();
            let u0: Vec<f64> = seed[..n].iter().map(|s| s.exp()).collect();
            let u = solve_markov(&k, &u0, t).unwrap();
            let phi = phi_kn(n, t).unwrap();
            for x in 0..n {
                prop_assert!(k.neg_l_log(&u, x).unwrap() <= phi + 1e-10);
            }
        }
    }
}
