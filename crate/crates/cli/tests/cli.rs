use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use liyau_cli::output::verify_manifest;
use serde_json::Value;

fn liyau(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liyau")).args(args).current_dir(dir).env_remove("LIYAU_OUT_DIR").output().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn body(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn closed_form_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let o = liyau(&["liyau-const", "--beta", "1", "--dim", "1", "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("run");
    let csv = body(&run.join("liyau_const.csv"));
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("beta,d,c_ly,err,y_star"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[..2], [1.0, 1.0]);
    assert!((row[2] - 2.0).abs() < 1e-12);
    let json: Value = serde_json::from_str(&body(&run.join("liyau_const.json"))).unwrap();
    assert_eq!(json["results"][0]["method"], "closed-form-beta1");
    assert!(verify_manifest(&run).unwrap().is_empty());
    assert_eq!(manifest(&run)["status"], "ok");
}

#[test]
fn out_of_range_beta_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = liyau(&["liyau-const", "--beta", "3", "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!tmp.path().join("run").exists());
    assert_eq!(liyau(&["no-such-command"], tmp.path()).status.code(), Some(1));
    assert_eq!(liyau(&["verify", "--check", "key", "--bogus", "1"], tmp.path()).status.code(), Some(1));
    assert_eq!(liyau(&["harnack", "--setting", "kn", "--t1", "2", "--t2", "1"], tmp.path()).status.code(), Some(1));
    assert_eq!(liyau(&["verify", "--check", "liyau", "--quad", "nonsense=1"], tmp.path()).status.code(), Some(1));
    assert_eq!(liyau(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let o = liyau(&["verify", "--check", "key", "--seed", "42", "--instances", "200", "--out", run], tmp.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let (a, b) = (body(&tmp.path().join("a/verify.csv")), body(&tmp.path().join("b/verify.csv")));
    assert_eq!(a, b);
    assert!(a.starts_with("# verification-margins v1\nlabel,margin,error,verdict\n"));
    assert_eq!(a.lines().count(), 202);
    let json: Value = serde_json::from_str(&body(&tmp.path().join("a/verify.json"))).unwrap();
    assert!(json["min_margin"].as_f64().unwrap() > -1e-12);
    assert!(json["verdict"].as_str().unwrap().starts_with("pass"));
    let other = liyau(&["verify", "--check", "key", "--seed", "43", "--instances", "200", "--out", "c"], tmp.path());
    assert_eq!(other.status.code(), Some(0));
    assert_ne!(a, body(&tmp.path().join("c/verify.csv")));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.cfg"), "# reduction checks\ncheck = reduction\nseed=7\ninstances=5\nout=from-file\n").unwrap();
    let o = liyau(&["verify", "--config", "run.cfg", "--seed", "9"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&tmp.path().join("from-file"));
    assert_eq!(m["config"]["verify"]["seed"], 9);
    assert_eq!(m["config"]["verify"]["check"], "reduction");
    assert_eq!(m["config"]["verify"]["instances"], 5);

    fs::write(tmp.path().join("bad.cfg"), "check=key\ncolour=blue\n").unwrap();
    let o = liyau(&["verify", "--config", "bad.cfg"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key 'colour'"));
    fs::write(tmp.path().join("typed.cfg"), "check=key\ninstances=many\n").unwrap();
    assert_eq!(liyau(&["verify", "--config", "typed.cfg"], tmp.path()).status.code(), Some(1));
}

#[test]
fn env_var_sets_the_default_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_liyau"))
        .args(["harnack", "--setting", "gauss", "--dim", "2"])
        .current_dir(tmp.path())
        .env("LIYAU_OUT_DIR", tmp.path().join("env-out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("env-out/harnack_bound.json").exists());
}

#[test]
fn unwritable_output_is_a_computation_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("blocker"), "").unwrap();
    let o = liyau(&["harnack", "--setting", "gauss", "--out", "blocker/run"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_check_exits_three_with_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = liyau(&["fraclap", "--beta", "1", "--points", "128", "--eval", "3", "--agree-tol", "1e-12", "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    let m = manifest(&tmp.path().join("run"));
    assert_eq!(m["status"], "verification-failure");
    assert_eq!(m["verdicts"]["fraclap_agreement"], "fail");
}

#[test]
fn markov_from_edge_list() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("ring.txt"), "# markov-chain v1\nstates 4\nundirected\n0 1 1.0\n1 2 0.5\n2 3 2.0\n3 0 1.0\n").unwrap();
    let o = liyau(&["markov-verify", "--graph", "edges", "--edges", "ring.txt", "--per-decade", "3", "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("run/reduction.csv").exists());
    fs::write(tmp.path().join("broken.txt"), "# markov-chain v1\nstates 2\n0 1 x\n").unwrap();
    let o = liyau(&["markov-verify", "--graph", "edges", "--edges", "broken.txt"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn complete_graph_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let o = liyau(&["markov-verify", "--graph", "Kn", "--n", "6", "--per-decade", "5", "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(&tmp.path().join("run"));
    for k in ["kn_transition", "kn_liyau", "kn_relaxation"] {
        assert!(m["verdicts"][k].as_str().unwrap().starts_with("pass"), "{k}");
    }
}

#[test]
fn harnack_settings() {
    let tmp = tempfile::tempdir().unwrap();
    for (setting, extra) in [("kn", vec!["--n", "3", "--instances", "20"]), ("frac", vec!["--x1", "-2.5"]), ("gauss", vec!["--instances", "30"])] {
        let out = format!("run-{setting}");
        let mut args = vec!["harnack", "--setting", setting, "--out", &out];
        args.extend(extra);
        let o = liyau(&args, tmp.path());
        assert_eq!(o.status.code(), Some(0), "{setting}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(verify_manifest(&tmp.path().join(&out)).unwrap().is_empty());
    }
    let b: Value = serde_json::from_str(&body(&tmp.path().join("run-frac/harnack_bound.json"))).unwrap();
    // separation 2.5 rescales the times by 2.5^β
    assert!((b["bound"]["t1"].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn exploratory_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let o = liyau(&["sweep", "--start", "1.5", "--stop", "1.9", "--steps", "3", "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = body(&tmp.path().join("run/liyau_const.csv"));
    assert!(csv.contains("# exploratory sweep"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4);
    assert_eq!(manifest(&tmp.path().join("run"))["verdicts"]["monotonicity"], "pass");
}

#[test]
fn density_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = liyau(&["density", "--beta", "1", "--points", "11", "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = body(&tmp.path().join("run/density.csv"));
    let first: Vec<f64> = csv.lines().nth(3).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // Poisson profile at the origin: 1/π
    assert!((first[1] - std::f64::consts::FRAC_1_PI).abs() < 1e-8);
    assert!(body(&tmp.path().join("run/profile.txt")).starts_with('#'));
}
