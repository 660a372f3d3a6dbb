//! `tdm`: solve, generate, verify and benchmark TDM slot allocations.

mod bench;
mod run;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tdm_core::io::{read_instance, InstanceFile, ScheduleFile};
use tdm_core::ratio::format_ratio;
use tdm_core::usecase::{generate, GenSpec};
use tdm_core::verify::slots_feasible;
use tdm_core::{DominanceClass, Status};

use crate::run::{solve, Method, SolveOptions};

#[derive(Parser)]
#[command(
    name = "tdm",
    version,
    about = "Minimal-allocation TDM schedule synthesis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print the result as JSON.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Bnp)]
        method: Method,
        #[command(flatten)]
        opts: SolverArgs,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate random instances plus a CSV manifest.
    Generate {
        #[arg(long, value_parser = parse_class)]
        class: DominanceClass,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a schedule against an instance.
    Verify {
        instance: PathBuf,
        schedule: PathBuf,
    },
    /// Run methods over a manifest and write CSV.
    Bench {
        manifest: PathBuf,
        /// Comma-separated list of methods.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Bnp, Method::Heuristic])]
        methods: Vec<Method>,
        #[command(flatten)]
        opts: SolverArgs,
        /// Parallel instances; defaults to the number of cores.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Seconds per solve.
    #[arg(long, default_value_t = 3000.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative MIP gap for `ilp`, sub-model gap for `heuristic`.
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long, value_enum)]
    branching: Option<BranchingArg>,
    /// Heuristic runs (`heuristic`) or warm-start runs (`bnp`).
    #[arg(long)]
    heuristic_runs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchingArg {
    Sequential,
    MaxProbability,
}

impl SolverArgs {
    fn options(&self) -> Result<SolveOptions> {
        anyhow::ensure!(
            self.time_limit.is_finite() && self.time_limit > 0.0,
            "time limit must be positive"
        );
        if let Some(g) = self.gap {
            anyhow::ensure!((0.0..1.0).contains(&g), "gap must lie in [0, 1)");
        }
        Ok(SolveOptions {
            time_limit: std::time::Duration::from_secs_f64(self.time_limit),
            seed: self.seed,
            gap: self.gap,
            branching: self.branching.map(|b| match b {
                BranchingArg::Sequential => tdm_core::bnp::Branching::Sequential,
                BranchingArg::MaxProbability => tdm_core::bnp::Branching::MaxProbability,
            }),
            heuristic_runs: self.heuristic_runs,
        })
    }
}

fn parse_class(s: &str) -> Result<DominanceClass, String> {
    s.parse().map_err(|e: tdm_core::CoreError| e.to_string())
}

fn exit_for(status: Status) -> u8 {
    match status {
        Status::Optimal | Status::Feasible => 0,
        Status::Infeasible | Status::NoFeasible => 2,
        Status::TimedOut => 3,
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_solve(instance: &Path, method: Method, opts: &SolverArgs, out: Option<&Path>) -> Result<u8> {
    let inst =
        read_instance(instance).with_context(|| format!("reading {}", instance.display()))?;
    let result = solve(&inst, method, &opts.options()?)?;
    let mut text = serde_json::to_string_pretty(&result)?;
    text.push('\n');
    emit(&text, out)?;
    Ok(exit_for(result.status))
}

fn cmd_generate(
    class: DominanceClass,
    n: usize,
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<u8> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = csv::Writer::from_path(out.join("manifest.csv"))?;
    manifest.write_record(bench::MANIFEST_HEADER)?;
    for i in 0..count {
        let spec = GenSpec::new(class, n, seed.wrapping_add(i as u64))?;
        let inst = match generate(&spec) {
            Ok(inst) => inst,
            Err(e) => {
                log::warn!("instance {i}: {e}");
                continue;
            }
        };
        let name = format!("{class}-n{n}-s{seed}-{i:04}.json");
        let comment = format!("{class} class, {n} clients, seed {}", spec.seed);
        fs::write(
            out.join(&name),
            InstanceFile::from_instance(&inst, Some(comment)).to_json(),
        )?;
        manifest.write_record([
            name,
            class.to_string(),
            n.to_string(),
            inst.frame_size.to_string(),
            format_ratio(&inst.total_rate()),
            format_ratio(&inst.latency_load()),
        ])?;
    }
    manifest.flush()?;
    Ok(0)
}

fn cmd_verify(instance: &Path, schedule: &Path) -> Result<u8> {
    let inst =
        read_instance(instance).with_context(|| format!("reading {}", instance.display()))?;
    let text =
        fs::read_to_string(schedule).with_context(|| format!("reading {}", schedule.display()))?;
    let file =
        ScheduleFile::parse(&text).with_context(|| format!("parsing {}", schedule.display()))?;
    let owners = file.owners(&inst)?;
    let report = slots_feasible(&owners, &inst)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.feasible { 0 } else { 2 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("TDM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.command {
        Command::Solve {
            instance,
            method,
            opts,
            out,
        } => cmd_solve(instance, *method, opts, out.as_deref()),
        Command::Generate {
            class,
            n,
            count,
            seed,
            out,
        } => cmd_generate(*class, *n, *count, *seed, out),
        Command::Verify { instance, schedule } => cmd_verify(instance, schedule),
        Command::Bench {
            manifest,
            methods,
            opts,
            workers,
            out,
        } => opts
            .options()
            .and_then(|o| bench::run(manifest, methods, &o, *workers, out.as_deref())),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
