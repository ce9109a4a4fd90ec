//! Batch front-end: read a JSON manifest describing a chart, its objects and
//! a task list, run the analyses, emit a deterministic JSON report.
//!
//! Exit codes: 0 on success (verdict failures are data, not errors),
//! 2 for an invalid manifest or usage, 3 when a task errored (the report is
//! still emitted for completed tasks).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::Parser;
use sha2::{Digest, Sha256};
use tetrad_core::Tolerances;

use tetrad_cli::manifest::Manifest;
use tetrad_cli::report::{Report, TaskOutcome, Tool, Warning};
use tetrad_cli::tasks::{run_task, Registry, RunOptions};
use tetrad_cli::{examples, grid};

#[derive(Parser, Debug)]
#[command(
    name = "tetrad",
    version,
    about = "Chart geometry engine: distributions, almost complex structures and symplectic pairs"
)]
struct Cli {
    /// Manifest to run (required unless --emit-examples is given).
    manifest: Option<PathBuf>,

    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the lattice counts, e.g. 3x3x3x3.
    #[arg(long)]
    grid: Option<String>,

    /// Override the random-point seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override a tolerance, KEY=VALUE (repeatable).
    #[arg(long = "tol")]
    tol: Vec<String>,

    /// Swap the labeling of the two canonical lines in the eigenframe
    /// invariant (flips the half-space choice).
    #[arg(long)]
    swap_ut_labels: bool,

    /// Compute frame brackets by central differences instead of exact
    /// expression brackets.
    #[arg(long)]
    numeric_bracket: bool,

    /// Write the bundled example manifests into this directory and exit.
    #[arg(long, value_name = "DIR")]
    emit_examples: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(dir) = &cli.emit_examples {
        return match examples::emit(dir) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {:#}", e);
                ExitCode::from(2)
            }
        };
    }

    let Some(manifest_path) = cli.manifest.clone() else {
        eprintln!("error: a manifest path is required (or use --emit-examples DIR)");
        return ExitCode::from(2);
    };

    match load(&cli, &manifest_path) {
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
        Ok((manifest, hash)) => match execute(&cli, &manifest, hash) {
            Err(e) => {
                eprintln!("error: {:#}", e);
                ExitCode::from(2)
            }
            Ok((report, any_task_error)) => {
                let body = serde_json::to_string_pretty(&report)
                    .expect("report serialization is infallible");
                let write_result = match &cli.out {
                    Some(path) => std::fs::write(path, body.as_bytes() as &[u8])
                        .with_context(|| format!("writing {}", path.display())),
                    None => {
                        println!("{}", body);
                        Ok(())
                    }
                };
                if let Err(e) = write_result {
                    eprintln!("error: {:#}", e);
                    return ExitCode::from(2);
                }
                if any_task_error {
                    ExitCode::from(3)
                } else {
                    ExitCode::SUCCESS
                }
            }
        },
    }
}

fn load(cli: &Cli, path: &PathBuf) -> Result<(Manifest, String)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let hash = hex::encode(Sha256::digest(&bytes));
    let mut manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| anyhow!("manifest invalid: {}", e))?;
    if let Some(spec) = &cli.grid {
        manifest.grid.lattice.counts = parse_grid_override(spec, manifest.chart.dim)?;
    }
    if let Some(seed) = cli.seed {
        manifest.grid.seed = seed;
    }
    manifest.validate()?;
    Ok((manifest, hash))
}

fn parse_grid_override(spec: &str, dim: usize) -> Result<Vec<usize>> {
    let counts: Vec<usize> = spec
        .split('x')
        .map(|part| {
            part.parse::<usize>()
                .map_err(|_| anyhow!("--grid expects counts like 3x3x3x3, got `{}`", spec))
        })
        .collect::<Result<_>>()?;
    if counts.len() != dim {
        return Err(anyhow!(
            "--grid must give {} counts for this chart, got {}",
            dim,
            counts.len()
        ));
    }
    Ok(counts)
}

fn build_tolerances(manifest: &Manifest, cli: &Cli) -> Result<Tolerances> {
    let mut tol = Tolerances::default();
    for (key, value) in &manifest.tolerances {
        if !tol.set(key, *value) {
            return Err(anyhow!("manifest tolerances: unknown key `{}`", key));
        }
    }
    for entry in &cli.tol {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| anyhow!("--tol expects KEY=VALUE, got `{}`", entry))?;
        let value: f64 = value
            .parse()
            .map_err(|_| anyhow!("--tol {}: `{}` is not a number", key, value))?;
        if !tol.set(key, value) {
            return Err(anyhow!("--tol: unknown key `{}`", key));
        }
    }
    Ok(tol)
}

fn execute(cli: &Cli, manifest: &Manifest, manifest_hash: String) -> Result<(Report, bool)> {
    let tol = build_tolerances(manifest, cli)?;
    let objects = manifest.build_objects()?;
    let grid_points = grid::build_grid(&manifest.grid);
    let opts = RunOptions {
        swap_ut_labels: cli.swap_ut_labels,
        numeric_bracket: cli.numeric_bracket,
    };

    let mut registry = Registry {
        objects,
        structures: BTreeMap::new(),
        frames: BTreeMap::new(),
    };
    let mut warnings: Vec<Warning> = Vec::new();
    let mut outcomes = Vec::new();
    let mut any_error = false;
    for task in &manifest.tasks {
        match run_task(task, &mut registry, &grid_points, &tol, &opts, &mut warnings) {
            Ok(data) => outcomes.push(TaskOutcome {
                cmd: task.cmd().to_string(),
                status: "ok",
                error: None,
                data: Some(data),
            }),
            Err(e) => {
                any_error = true;
                outcomes.push(TaskOutcome {
                    cmd: task.cmd().to_string(),
                    status: "error",
                    error: Some(format!("{:#}", e)),
                    data: None,
                });
            }
        }
    }

    let report = Report {
        schema: 1,
        tool: Tool {
            name: "tetrad",
            version: env!("CARGO_PKG_VERSION"),
        },
        manifest_hash,
        grid_points: grid_points.len(),
        seed: manifest.grid.seed,
        warnings,
        tasks: outcomes,
    };
    Ok((report, any_error))
}
