//! The `clipgeom` command line: argument parsing, dispatch, reports and
//! run manifests on top of `clipgeom-core`.

pub mod args;
pub mod commands;
pub mod context;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::error::ErrorKind as ClapKind;
use clap::Parser;
use serde_json::Value;

use crate::args::{Cli, Command};
use crate::context::Context;
use crate::error::{CliError, CliResult, EXIT_INPUT};
use crate::output::{json_bytes, manifest, manifest_path, sha256_hex, write_all, Artifact};

/// Runs the tool on a full argv (program name first) and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    configure_threads();
    match dispatch(&argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.code
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("CLIPGEOM_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // the global pool can only be built once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn dispatch(argv: &[String]) -> CliResult<()> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(CliError::usage(e.to_string())),
    };
    match &cli.command {
        Command::Replay(r) => replay(&r.manifest),
        cmd => execute_and_write(cmd, &argv[1.min(argv.len())..]),
    }
}

fn execute_and_write(cmd: &Command, argv: &[String]) -> CliResult<()> {
    let primary = commands::primary_out(cmd).expect("replay handled earlier").to_path_buf();
    let mut ctx = Context::default();
    let mut artifacts = commands::execute(cmd, &mut ctx)?;
    let outputs: Vec<PathBuf> = artifacts.iter().map(|a| a.path.clone()).collect();
    let manifest_file = manifest_path(&primary);
    check_paths(&outputs, &manifest_file, &ctx)?;
    let m = manifest(cmd.name(), argv, &ctx.inputs, &outputs, commands::parameters(cmd));
    artifacts.push(Artifact::raw(&manifest_file, json_bytes(m)));
    log::info!("{}: writing {} files", cmd.name(), artifacts.len());
    write_all(&artifacts)
}

/// Absolute, symlink-resolved where possible, for collision checks.
fn identity(path: &Path) -> PathBuf {
    if let Ok(p) = std::fs::canonicalize(path) {
        return p;
    }
    let abs = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
    match (abs.parent().and_then(|d| std::fs::canonicalize(d).ok()), abs.file_name()) {
        (Some(dir), Some(name)) => dir.join(name),
        _ => abs,
    }
}

fn check_paths(outputs: &[PathBuf], manifest_file: &Path, ctx: &Context) -> CliResult<()> {
    let inputs: Vec<PathBuf> = ctx.inputs.iter().map(|i| identity(&i.path)).collect();
    let mut seen: Vec<PathBuf> = Vec::new();
    for p in outputs.iter().map(PathBuf::as_path).chain([manifest_file]) {
        let id = identity(p);
        if inputs.contains(&id) {
            return Err(CliError::usage(format!("output {} would overwrite an input", p.display())));
        }
        if seen.contains(&id) {
            return Err(CliError::usage(format!("output {} is named twice", p.display())));
        }
        seen.push(id);
    }
    Ok(())
}

fn replay(path: &Path) -> CliResult<()> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let m: Value =
        serde_json::from_slice(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let bad = || CliError::input(format!("{} is not a clipgeom manifest", path.display()));
    let argv: Vec<String> = m["argv"]
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|v| v.as_str().map(str::to_owned).ok_or_else(bad))
        .collect::<CliResult<_>>()?;
    if argv.first().map(String::as_str) == Some("replay") {
        return Err(CliError::usage("a replay manifest cannot be replayed"));
    }
    for input in m["inputs"].as_array().ok_or_else(bad)? {
        let (p, want) = match (input["path"].as_str(), input["sha256"].as_str()) {
            (Some(p), Some(h)) => (p, h),
            _ => return Err(bad()),
        };
        let got = std::fs::read(p)
            .map(|b| sha256_hex(&b))
            .map_err(|e| CliError::input(format!("{p}: {e}")))?;
        if got != want {
            return Err(CliError {
                code: EXIT_INPUT,
                kind: "input",
                message: format!("{p} has changed since the manifest was written"),
            });
        }
    }
    let full: Vec<String> = std::iter::once("clipgeom".to_string()).chain(argv).collect();
    dispatch(&full)
}
