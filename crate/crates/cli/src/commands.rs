//! One function per subcommand. Each writes its files and returns the
//! verdicts that decide the exit code.

use std::fmt::Write as _;
use std::fs;

use nonlocal_liyau::core_ops::QuadratureSpec;
use nonlocal_liyau::field::{ExtensionRule, GridField};
use nonlocal_liyau::harnack::{
    check_alpha, default_alpha, gaussian_harnack_rhs, harnack_bound_scaled, harnack_check_fractional, harnack_check_kn,
    harnack_fractional_suite, harnack_kn_suite, harnack_rhs_kn,
};
use nonlocal_liyau::liyau_constant::{liyau_constant, liyau_sweep, LiYauConstantResult, SearchSpec};
use nonlocal_liyau::markov_graph::{complete_graph, log_time_grid, relaxation_residual, transition_kn, MarkovChain};
use nonlocal_liyau::nonlocal_ops::{frac_laplacian_point, frac_laplacian_spectral, InitialData, KernelSolution};
use nonlocal_liyau::stable_density::{build_profile, ProfileSpec};
use nonlocal_liyau::verifier::{
    fractional_suite, key_inequality_suite, reduction_suite, reduction_theorem_check_discrete, FractionalSuite, InstanceGenerator,
    VerificationReport, Verdict,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    CheckKind, Command, DataKind, DensityArgs, FieldKind, FraclapArgs, GraphKind, HarnackArgs, MarkovArgs, SearchArgs,
    Setting, SweepArgs, VerifyArgs,
};
use crate::output::OutputDir;
use crate::CliError;

pub type Verdicts = Vec<(String, Verdict)>;

const MASS_TOL: f64 = 1e-6;
const TRANSITION_TOL: f64 = 1e-12;
const RELAXATION_TOL: f64 = 1e-10;

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn quad_spec(s: Option<&str>) -> Result<QuadratureSpec, CliError> {
    let mut q = QuadratureSpec::default();
    for item in s.unwrap_or("").split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((k, v)) = item.split_once('=') else {
            return usage(format!("--quad expects key=value items, got '{item}'"));
        };
        q.set(k.trim(), v.trim()).map_err(|e| CliError::Usage(format!("--quad: {e}")))?;
    }
    q.validate().map_err(|e| CliError::Usage(format!("--quad: {e}")))?;
    Ok(q)
}

fn parse_sweep(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Usage(format!("--sweep expects start:stop:steps, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].parse().map_err(|_| bad())?;
    let steps: usize = parts[2].parse().map_err(|_| bad())?;
    beta_grid(start, stop, steps)
}

fn beta_grid(start: f64, stop: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    for b in [start, stop] {
        if !(b > 0.0 && b < 2.0) {
            return usage(format!("β must lie in (0, 2), got {b}"));
        }
    }
    if steps == 0 || start > stop || (steps == 1 && start != stop) {
        return usage(format!("need start ≤ stop and at least one step, got {start}:{stop}:{steps}"));
    }
    if steps == 1 {
        return Ok(vec![start]);
    }
    Ok((0..steps).map(|k| start + (stop - start) * k as f64 / (steps - 1) as f64).collect())
}

fn search_spec(a: &SearchArgs, quad: QuadratureSpec) -> Result<SearchSpec, CliError> {
    if a.nodes < 3 {
        return usage("--nodes must be at least 3");
    }
    Ok(SearchSpec { y_max: a.y_max, nodes: a.nodes, quad, ..SearchSpec::default() })
}

fn read_edges(a: &MarkovArgs) -> Result<MarkovChain, CliError> {
    let Some(path) = &a.edges else {
        return usage("--graph edges needs --edges FILE");
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    MarkovChain::parse_edge_list(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Checks everything that can be checked without computing.
pub fn validate(cmd: &Command) -> Result<(), CliError> {
    quad_spec(cmd.common().quad.as_deref())?;
    match cmd {
        Command::Density(a) => {
            if a.points < 2 {
                return usage("--points must be at least 2");
            }
        }
        Command::Fraclap(a) => {
            if a.points < 16 || a.eval == 0 {
                return usage("--points must be at least 16 and --eval at least 1");
            }
        }
        Command::LiyauConst(a) => {
            if let Some(s) = &a.sweep {
                parse_sweep(s)?;
            }
            search_spec(&a.search, QuadratureSpec::default())?;
        }
        Command::Sweep(a) => {
            beta_grid(a.start, a.stop, a.steps)?;
            search_spec(&a.search, QuadratureSpec::default())?;
        }
        Command::Verify(a) => {
            if a.instances == Some(0) {
                return usage("--instances must be positive");
            }
        }
        Command::MarkovVerify(a) => {
            if a.per_decade == 0 {
                return usage("--per-decade must be positive");
            }
            match a.graph {
                GraphKind::Kn if !(2..=64).contains(&a.n) => return usage(format!("--n must lie in 2..=64, got {}", a.n)),
                GraphKind::Edges => {
                    read_edges(a)?;
                }
                _ => {}
            }
        }
        Command::Harnack(a) => {
            if a.t1 >= a.t2 {
                return usage(format!("need t1 < t2, got {} and {}", a.t1, a.t2));
            }
            match a.setting {
                Setting::Kn if !(2..=64).contains(&a.n) => return usage(format!("--n must lie in 2..=64, got {}", a.n)),
                Setting::Frac => {
                    let alpha = a.alpha.unwrap_or(default_alpha(a.beta, 1));
                    check_alpha(alpha, a.beta, 1).map_err(|e| CliError::Usage(e.to_string()))?;
                }
                _ => {}
            }
        }
    }
    Ok(())
}

pub fn dispatch(cmd: &Command, out: &mut OutputDir) -> Result<Verdicts, CliError> {
    match cmd {
        Command::Density(a) => density(a, out),
        Command::Fraclap(a) => fraclap(a, out),
        Command::LiyauConst(a) => {
            let betas = match &a.sweep {
                Some(s) => parse_sweep(s)?,
                None => vec![a.beta.expect("clap requires --beta without --sweep")],
            };
            constants(&betas, a.dim, &a.search, a.common.quad.as_deref(), a.sweep.is_some(), out)
        }
        Command::Sweep(a) => sweep(a, out),
        Command::Verify(a) => verify(a, out),
        Command::MarkovVerify(a) => markov(a, out),
        Command::Harnack(a) => harnack(a, out),
    }
}

fn emit_report(out: &mut OutputDir, stem: &str, report: &VerificationReport) -> Result<(String, Verdict), CliError> {
    out.write_json(&format!("{stem}.json"), report)?;
    out.write(&format!("{stem}.csv"), &report.to_csv())?;
    println!("{stem}: {} (min margin {:e} over {} samples)", report.verdict().as_str(), report.min_margin(), report.samples().len());
    Ok((stem.to_string(), report.verdict()))
}

fn density(a: &DensityArgs, out: &mut OutputDir) -> Result<Verdicts, CliError> {
    let p = build_profile(a.beta, a.dim, &ProfileSpec { u_step: a.u_step, ..ProfileSpec::default() })?;
    out.write("profile.txt", &p.to_text())?;
    let mut csv = format!("# stable-density v1\n# beta={} d={}\nr,phi\n", a.beta, a.dim);
    for i in 0..a.points {
        let r = a.r_max * i as f64 / (a.points - 1) as f64;
        let _ = writeln!(csv, "{r},{}", p.density(r));
    }
    out.write("density.csv", &csv)?;
    let mass = p.mass();
    let (lo, hi) = p.comparability_ratio();
    out.write_json(
        "density.json",
        &json!({
            "schema": "density-summary/1",
            "beta": a.beta,
            "d": a.dim,
            "mass": mass,
            "error_estimate": p.error_estimate(),
            "core_radius": p.core_radius(),
            "r_tail": p.r_tail(),
            "comparability": [lo, hi],
            "warnings": p.warnings(),
        }),
    )?;
    let mut report = VerificationReport::new("density", None).param("beta", a.beta).param("d", a.dim);
    report.push("mass", MASS_TOL - (mass - 1.0).abs(), 0.0);
    report.push("comparability", if hi.is_finite() { lo } else { f64::NAN }, 0.0);
    Ok(vec![emit_report(out, "density_checks", &report)?])
}

fn fraclap(a: &FraclapArgs, out: &mut OutputDir) -> Result<Verdicts, CliError> {
    let quad = quad_spec(a.common.quad.as_deref())?;
    let (f, ext): (fn(f64) -> f64, ExtensionRule) = match a.field {
        FieldKind::Gaussian => (|x| (-x * x).exp(), ExtensionRule::Constant),
        FieldKind::Cauchy => (|x| 1.0 / (1.0 + x * x), ExtensionRule::power_law(2.0)),
    };
    let grid = GridField::sample(a.points, a.half_width, ext, f)?;
    let spectral = frac_laplacian_spectral(&grid, a.beta)?;
    out.write("field.txt", &grid.to_text())?;
    out.write("fraclap_spectral.txt", &spectral.field.to_text())?;
    let (lo, hi) = (a.points / 4, 3 * a.points / 4);
    let nodes: Vec<usize> = if a.eval == 1 {
        vec![a.points / 2]
    } else {
        (0..a.eval).map(|k| lo + (hi - lo) * k / (a.eval - 1)).collect()
    };
    let mut csv = String::from("# fractional-laplacian v1\nx,f,quadrature,quad_err,spectral\n");
    let mut report = VerificationReport::new("fraclap", None).param("beta", a.beta).param("agree_tol", a.agree_tol);
    for i in nodes {
        let x = grid.x(i);
        let q = frac_laplacian_point(&grid, a.beta, x, &quad)?;
        let s = spectral.field.value_at(x);
        let _ = writeln!(csv, "{x},{},{},{},{s}", grid.values()[i], q.value, q.error);
        report.push(format!("x={x}"), a.agree_tol - (q.value - s).abs(), q.error);
    }
    if spectral.boundary_warning {
        eprintln!("warning: the field is not negligible at the edges of the padded grid; spectral values are distorted");
    }
    out.write("fraclap.csv", &csv)?;
    Ok(vec![emit_report(out, "fraclap_agreement", &report)?])
}

#[derive(Serialize)]
struct ConstantsFile<'a> {
    schema: &'static str,
    exploratory: bool,
    results: &'a [LiYauConstantResult],
}

fn constants(betas: &[f64], d: usize, search: &SearchArgs, quad: Option<&str>, exploratory: bool, out: &mut OutputDir) -> Result<Verdicts, CliError> {
    let search = search_spec(search, quad_spec(quad)?)?;
    let results = if betas.len() == 1 {
        vec![liyau_constant(betas[0], d, &ProfileSpec::default(), &search)?]
    } else {
        liyau_sweep(betas, d, &ProfileSpec::default(), &search)?
    };
    let mut csv = String::from("# liyau-constant v1\n");
    if exploratory {
        csv.push_str("# exploratory sweep: numerical estimates only, no statement about the limit β → 2\n");
    }
    csv.push_str("beta,d,c_ly,err,y_star\n");
    let mut table = String::from("# liyau-j-table v1\nbeta,d,y,j,err\n");
    for r in &results {
        let _ = writeln!(csv, "{},{},{},{},{}", r.beta, r.d, r.value, r.error, r.y_star);
        for s in &r.table {
            let _ = writeln!(table, "{},{},{},{},{}", r.beta, r.d, s.y, s.j, s.error);
        }
        for w in &r.warnings {
            eprintln!("warning (β = {}): {w}", r.beta);
        }
        println!("C_LY({}, {}) = {} ± {:e} at |y| = {}", r.beta, r.d, r.value, r.error, r.y_star);
    }
    out.write("liyau_const.csv", &csv)?;
    out.write("j_table.csv", &table)?;
    out.write_json("liyau_const.json", &ConstantsFile { schema: "liyau-constant/1", exploratory, results: &results })?;
    let mut report = VerificationReport::new("liyau-const", None).param("d", d);
    for r in &results {
        report.push(format!("beta={}", r.beta), if r.value.is_finite() && r.value > 0.0 { r.value } else { f64::NAN }, r.error);
    }
    let mut verdicts = vec![emit_report(out, "liyau_const_checks", &report)?];
    if results.len() > 1 {
        verdicts.push(emit_report(out, "monotonicity", &monotonicity(&results))?);
    }
    Ok(verdicts)
}

/// `C_LY(β_i) - C_LY(β_{i+1})` with the summed error bars.
fn monotonicity(results: &[LiYauConstantResult]) -> VerificationReport {
    let mut report = VerificationReport::new("monotone-decreasing", None);
    for w in results.windows(2) {
        report.push(format!("beta={}..{}", w[0].beta, w[1].beta), w[0].value - w[1].value, w[0].error + w[1].error);
    }
    report
}

fn sweep(a: &SweepArgs, out: &mut OutputDir) -> Result<Verdicts, CliError> {
    let betas = beta_grid(a.start, a.stop, a.steps)?;
    constants(&betas, a.dim, &a.search, a.common.quad.as_deref(), true, out)
}

fn verify(a: &VerifyArgs, out: &mut OutputDir) -> Result<Verdicts, CliError> {
    let seed = a.common.seed;
    let report = match a.check {
        CheckKind::Key => key_inequality_suite(seed, a.instances.unwrap_or(1000))?,
        CheckKind::Reduction => reduction_suite(seed, a.instances.unwrap_or(500))?,
        CheckKind::Liyau | CheckKind::Dh => {
            let quad = quad_spec(a.common.quad.as_deref())?;
            let profile = build_profile(a.beta, 1, &ProfileSpec::default())?;
            let c = liyau_constant(a.beta, 1, &ProfileSpec::default(), &SearchSpec { quad: quad.clone(), ..SearchSpec::default() })?;
            let base = FractionalSuite { seed, quad, ..FractionalSuite::default() };
            if a.check == CheckKind::Liyau {
                let cfg = FractionalSuite { solutions: a.instances.unwrap_or(50), ..base };
                fractional_suite(&profile, &c, &cfg)?.0
            } else {
                let cfg = FractionalSuite { solutions: 1, points: vec![], dh_points: a.instances.unwrap_or(20), ..base };
                fractional_suite(&profile, &c, &cfg)?.1
            }
        }
    };
    Ok(vec![emit_report(out, "verify", &report)?])
}

fn markov(a: &MarkovArgs, out: &mut OutputDir) -> Result<Verdicts, CliError> {
    let seed = a.common.seed;
    match a.graph {
        GraphKind::Kn => {
            let n = a.n;
            let k = complete_graph(n)?;
            let mut trans = VerificationReport::new("kn-transition", None).param("n", n);
            for t in log_time_grid(1e-2, 10.0, a.per_decade) {
                let p = k.transition_matrix(t)?;
                let (diag, off) = transition_kn(n, t)?;
                let mut diff: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        diff = diff.max((p[(i, j)] - if i == j { diag } else { off }).abs());
                    }
                }
                trans.push(format!("t={t:e}"), TRANSITION_TOL - diff, 0.0);
            }
            let liyau = nonlocal_liyau::verifier::kn_liyau_suite(seed, &[n], a.per_decade)?;
            let mut relax = VerificationReport::new("kn-relaxation", None).param("n", n);
            for t in log_time_grid(1e-3, 20.0, a.per_decade) {
                relax.push(format!("t={t:e}"), RELAXATION_TOL - relaxation_residual(n, t)?.abs(), 0.0);
            }
            Ok(vec![
                emit_report(out, "kn_transition", &trans)?,
                emit_report(out, "kn_liyau", &liyau)?,
                emit_report(out, "kn_relaxation", &relax)?,
            ])
        }
        GraphKind::Edges => {
            let chain = read_edges(a)?;
            out.write("chain.txt", &chain.to_edge_list())?;
            let u0 = InstanceGenerator::new(seed).positive_vector(chain.states());
            let mut report = VerificationReport::new("reduction", Some(seed)).param("states", chain.states());
            for t in log_time_grid(1e-2, 10.0, a.per_decade) {
                report.absorb(&format!("t={t:e},"), &reduction_theorem_check_discrete(&chain, &u0, t)?);
            }
            Ok(vec![emit_report(out, "reduction", &report)?])
        }
    }
}

fn gaussian_log_u(d: usize, t: f64, x: f64) -> f64 {
    -0.5 * d as f64 * (4.0 * std::f64::consts::PI * t).ln() - x * x / (4.0 * t)
}

fn harnack(a: &HarnackArgs, out: &mut OutputDir) -> Result<Verdicts, CliError> {
    let seed = a.common.seed;
    let mut g = InstanceGenerator::new(seed);
    let report = match a.setting {
        Setting::Kn => {
            let rhs = harnack_rhs_kn(a.n, a.t1, a.t2)?;
            out.write_json("harnack_bound.json", &json!({"setting": "kn", "n": a.n, "t1": a.t1, "t2": a.t2, "log_bound": rhs.value, "error": rhs.error}))?;
            if a.instances > 0 {
                harnack_kn_suite(seed, a.instances)?
            } else {
                let u0 = match a.data {
                    DataKind::Spike => (0..a.n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
                    DataKind::Random => g.positive_vector(a.n),
                };
                harnack_check_kn(a.n, &u0, a.t1, a.t2)?
            }
        }
        Setting::Frac => {
            let quad = quad_spec(a.common.quad.as_deref())?;
            let alpha = a.alpha.unwrap_or(default_alpha(a.beta, 1));
            let profile = build_profile(a.beta, 1, &ProfileSpec::default())?;
            let c = liyau_constant(a.beta, 1, &ProfileSpec::default(), &SearchSpec { quad, ..SearchSpec::default() })?;
            let bound = harnack_bound_scaled(alpha, a.beta, 1, a.t1, a.t2, (a.x1 - a.x2).abs(), c.value)?;
            out.write_json("harnack_bound.json", &json!({"setting": "frac", "c_ly_error": c.error, "bound": bound}))?;
            if a.instances > 0 {
                harnack_fractional_suite(&[(&profile, &c)], seed, a.instances)?
            } else {
                let data = match a.data {
                    DataKind::Spike => InitialData::spike(0.0, 1.0),
                    DataKind::Random => g.initial_data(),
                };
                let sol = KernelSolution::new(&profile, data)?;
                harnack_check_fractional(&sol, &c, a.t1, a.t2, a.x1, a.x2, alpha)?
            }
        }
        Setting::Gauss => {
            let d = a.dim;
            let on_axis = |x: f64| -> Vec<f64> { (0..d).map(|i| if i == 0 { x } else { 0.0 }).collect() };
            let rhs = gaussian_harnack_rhs(d, a.t1, a.t2, &on_axis(a.x1), &on_axis(a.x2))?;
            out.write_json("harnack_bound.json", &json!({"setting": "gauss", "d": d, "t1": a.t1, "t2": a.t2, "x1": a.x1, "x2": a.x2, "log_bound": rhs}))?;
            let configs: Vec<(f64, f64, f64, f64)> = if a.instances > 0 {
                (0..a.instances)
                    .map(|_| {
                        let t1 = g.log_uniform(0.05, 5.0);
                        (t1, t1 * (1.0 + g.log_uniform(1e-2, 10.0)), g.uniform(-4.0, 4.0), g.uniform(-4.0, 4.0))
                    })
                    .collect()
            } else {
                vec![(a.t1, a.t2, a.x1, a.x2)]
            };
            let mut report = VerificationReport::new("harnack-gauss", Some(seed)).param("d", d);
            for (i, (t1, t2, x1, x2)) in configs.into_iter().enumerate() {
                let rhs = gaussian_harnack_rhs(d, t1, t2, &on_axis(x1), &on_axis(x2))?;
                let lhs = gaussian_log_u(d, t1, x1) - gaussian_log_u(d, t2, x2);
                report.push(format!("instance={i}"), rhs - lhs, 1e-12 * (1.0 + lhs.abs() + rhs.abs()));
            }
            report
        }
    };
    Ok(vec![emit_report(out, "harnack", &report)?])
}
