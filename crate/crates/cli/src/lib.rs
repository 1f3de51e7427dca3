//! The `liyau` command-line tool.
//!
//! Exit codes: 0 every check passed, 1 usage error, 2 computation or I/O
//! error, 3 some check failed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::time::Instant;

use clap::Parser;

pub mod commands;
pub mod config;
pub mod output;

use config::Cli;
use output::{Manifest, OutputDir, MANIFEST_SCHEMA};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_COMPUTE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Compute(m) => write!(f, "computation error: {m}"),
        }
    }
}

impl From<nonlocal_liyau::Error> for CliError {
    fn from(e: nonlocal_liyau::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Compute(format!("I/O: {e}"))
    }
}

/// Runs the tool on `args` (including the program name) and returns the exit code.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let args = match config::expand_config(args.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("liyau: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let cmd = &cli.command;
    if let Err(e) = commands::validate(cmd) {
        eprintln!("liyau: {e}");
        return EXIT_USAGE;
    }
    let start = Instant::now();
    let dir = output::resolve_out_dir(cmd.common().out.as_deref());
    let mut out = match OutputDir::create(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("liyau: cannot create output directory {}: {e}", dir.display());
            return EXIT_COMPUTE;
        }
    };
    let result = commands::dispatch(cmd, &mut out);
    let (code, status, error, verdicts) = match result {
        Ok(v) => {
            let failed = v.iter().any(|(_, verdict)| !verdict.is_pass());
            let verdicts: BTreeMap<String, String> = v.into_iter().map(|(k, verdict)| (k, verdict.as_str().to_string())).collect();
            if failed {
                (EXIT_VERIFY, "verification-failure", None, verdicts)
            } else {
                (EXIT_PASS, "ok", None, verdicts)
            }
        }
        Err(e) => {
            eprintln!("liyau: {e}");
            let code = if matches!(e, CliError::Usage(_)) { EXIT_USAGE } else { EXIT_COMPUTE };
            (code, "computation-error", Some(e.to_string()), BTreeMap::new())
        }
    };
    let config = serde_json::to_value(cmd).unwrap_or(serde_json::Value::Null);
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: cmd.name().to_string(),
        config,
        status: status.to_string(),
        error,
        verdicts,
        runtime_s: start.elapsed().as_secs_f64(),
        files: Vec::new(),
    };
    let n_files = out.files().len();
    if let Err(e) = out.finish(manifest) {
        eprintln!("liyau: cannot write manifest in {}: {e}", dir.display());
        return EXIT_COMPUTE;
    }
    println!("wrote {} files and manifest.json to {}", n_files, dir.display());
    code
}
