//! `sfd`: slow-fast decomposition and exact model reduction.

mod commands;
mod output;

use clap::{Parser, Subcommand};
use commands::{Overrides, Run, UsageError};
use output::OutputDir;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "sfd", version, about = "Slow-fast decomposition and exact model reduction of mechanical systems")]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "sfd-out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Reduced-model order (0 or 1).
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Small parameter.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Proceed past failed verification.
    #[arg(long, global = true)]
    force: bool,
    /// Extra configuration entry `KEY=VALUE`, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check the decomposition, critical-manifold and stability assumptions.
    Verify,
    /// Verify, then tabulate the slow-manifold chart and reduced vector field.
    Reduce,
    /// Integrate full and reduced models and check synchronization.
    Simulate,
    /// Locate fold points of the critical manifold along random rays.
    Fold,
    /// Compare static condensation, modal derivatives and the SSM cubic model.
    CompareLocal,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Reduce => "reduce",
            Command::Simulate => "simulate",
            Command::Fold => "fold",
            Command::CompareLocal => "compare-local",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_path: Option<String>,
    parameters: Option<sfd_core::presets::ParameterReport>,
    options: Option<&'a sfd_core::config::RunOptions>,
    order: Option<usize>,
    seed: Option<u64>,
    output_dir: String,
    wall_time_s: f64,
    exit_code: u8,
    error: Option<String>,
    stages: &'a [output::Stage],
    files: &'a [output::FileEntry],
}

fn dispatch(cmd: Command, run: &Run, out: &mut OutputDir) -> anyhow::Result<bool> {
    out.json("parameters.json", &run.preset.report())?;
    match cmd {
        Command::Verify => commands::verify(run, out),
        Command::Reduce => commands::reduce(run, out),
        Command::Simulate => commands::simulate(run, out),
        Command::Fold => commands::fold(run, out),
        Command::CompareLocal => commands::compare_local(run, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let overrides = Overrides {
        config: cli.config.clone(),
        set: cli.set.clone(),
        order: cli.order,
        eps: cli.eps,
        seed: cli.seed,
        jobs: cli.jobs,
        force: cli.force,
    };
    let mut out = match OutputDir::create(&cli.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", cli.out.display());
            return ExitCode::from(2);
        }
    };

    let run = Run::load(&overrides);
    let result = run.as_ref().map_err(|e| anyhow::anyhow!("{e:#}")).and_then(|run| {
        if let Some(n) = run.jobs {
            // a second initialization only fails if the pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
        dispatch(cli.command, run, &mut out)
    });
    let run_err_is_usage = matches!(&run, Err(e) if e.downcast_ref::<UsageError>().is_some());
    let (code, error) = match &result {
        Ok(true) => (0u8, None),
        Ok(false) => (1, None),
        Err(e) => {
            let usage = run_err_is_usage || e.downcast_ref::<UsageError>().is_some();
            eprintln!("error: {e:#}");
            (if usage { 2 } else { 1 }, Some(format!("{e:#}")))
        }
    };

    let run = run.ok();
    let files = out.files.clone();
    let manifest = Manifest {
        tool: "sfd",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        parameters: run.as_ref().map(|r| r.preset.report()),
        options: run.as_ref().map(|r| &r.cfg.options),
        order: run.as_ref().map(|r| r.order),
        seed: run.as_ref().map(|r| r.seed),
        output_dir: cli.out.display().to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        exit_code: code,
        error,
        stages: &out.stages,
        files: &files,
    };
    let text = match serde_json::to_string_pretty(&manifest) {
        Ok(t) => t + "\n",
        Err(e) => {
            eprintln!("error: manifest: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = std::fs::write(out.root().join("manifest.json"), text) {
        eprintln!("error: writing manifest: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
