//! Command-line runner: reads a TOML run configuration, runs the check sweep
//! on a fixed-size worker pool and writes the report files.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bifbm_core::harness::{refinement_study, run_sweep, RefinementRow, SweepConfig, SweepOutput};
use bifbm_core::kernels::Comparison;
use bifbm_core::rng::job_master;
use bifbm_core::sampling::{sample_process, write_raw, Process};
use bifbm_core::{Error, KernelParams, TimeGrid};
use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, Format, RunConfig};
pub use report::{emit_report, VerdictCounts};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "bifbm", version, about = "Monte Carlo checks of comparison inequalities for bifractional Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the checks described by a TOML configuration file.
    Run(RunArgs),
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Debug, Args)]
struct RunArgs {
    config: PathBuf,
    /// Only run checks whose id starts with this `/`-separated prefix.
    #[arg(long)]
    only: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

/// Everything a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub output: SweepOutput,
    pub refinement: Option<Vec<RefinementRow>>,
    pub files: Vec<PathBuf>,
    pub errors: Vec<String>,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::DefaultConfig => {
            print!("{}", default_config_toml());
            EXIT_OK
        }
        Command::Run(args) => match load_with_overrides(&args) {
            Ok(cfg) => {
                let outcome = execute(&cfg, args.only.as_deref());
                print_summary(&outcome);
                outcome.exit_code
            }
            Err(e) => {
                eprintln!("configuration error: {e}");
                if let Some(dir) = &args.out {
                    let echo = serde_json::json!({ "path": args.config });
                    let summary = report::summary_json(&echo, args.only.as_deref(), &[], &[], std::slice::from_ref(&e.0));
                    if fs::create_dir_all(dir).is_ok() {
                        let _ = fs::write(dir.join(report::SUMMARY_FILE), summary);
                    }
                }
                EXIT_CONFIG
            }
        },
    }
}

fn load_with_overrides(args: &RunArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.sweep.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.output.workers = Some(w);
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(f) = &args.format {
        cfg.output.format = f.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn default_config_toml() -> String {
    let text = toml::to_string(&RunConfig::default()).expect("default config serializes");
    format!("# bifbm run configuration\n{text}")
}

/// Runs a validated configuration on its own worker pool and writes the report.
pub fn execute(cfg: &RunConfig, only: Option<&str>) -> RunOutcome {
    if let Err(e) = cfg.validate() {
        return RunOutcome {
            exit_code: EXIT_CONFIG,
            output: SweepOutput::default(),
            refinement: None,
            files: Vec::new(),
            errors: vec![e.0],
        };
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers()).build() {
        Ok(p) => p,
        Err(e) => {
            return RunOutcome {
                exit_code: EXIT_NUMERICAL,
                output: SweepOutput::default(),
                refinement: None,
                files: Vec::new(),
                errors: vec![format!("cannot start worker pool: {e}")],
            }
        }
    };
    pool.install(|| execute_in_pool(cfg, only))
}

fn execute_in_pool(cfg: &RunConfig, only: Option<&str>) -> RunOutcome {
    let sweep = cfg.sweep();
    let mut errors = Vec::new();
    let mut fatal = false;

    let output = match run_sweep(&sweep, only) {
        Ok(o) => o,
        Err(e) => {
            errors.push(e.to_string());
            fatal = true;
            SweepOutput::default()
        }
    };
    if !output.errors.is_empty() {
        fatal = true;
    }

    let refinement = if cfg.refinement.enabled && only.is_none() {
        match refinement_study(&sweep, &cfg.refinement.points, cfg.refinement.paths) {
            Ok(rows) => Some(rows),
            Err(e) => {
                errors.push(format!("refinement study: {e}"));
                fatal = true;
                None
            }
        }
    } else {
        None
    };

    let dir = &cfg.output.dir;
    if cfg.export.enabled && only.is_none() {
        if let Err(e) = export_paths(&sweep, cfg.export.rows, &dir.join("paths")) {
            errors.push(format!("path export: {e}"));
            fatal = true;
        }
    }

    let files = match emit_report(
        dir,
        cfg.output.format,
        &cfg.echo(),
        only,
        &output,
        refinement.as_deref(),
        &errors,
    ) {
        Ok(f) => f,
        Err(e) => {
            errors.push(format!("writing report to {}: {e}", dir.display()));
            fatal = true;
            Vec::new()
        }
    };

    let exit_code = if fatal {
        EXIT_NUMERICAL
    } else if VerdictCounts::of(&output.records).fail > 0 {
        EXIT_FAIL
    } else {
        EXIT_OK
    };
    RunOutcome {
        exit_code,
        output,
        refinement,
        files,
        errors,
    }
}

/// Raw paths of `W`, `Y⁽¹⁾`, `Y⁽²⁾` for every `(H, K)` pair of the sweep.
fn export_paths(sweep: &SweepConfig, rows: usize, dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    let grid = TimeGrid::uniform(sweep.horizon, sweep.n)?;
    for &h in &sweep.hurst {
        for &k in &sweep.k {
            let params = KernelParams::bifbm(h, k)?;
            let roles = [
                ("W", Process::Bifbm(params)),
                ("Y1", Process::FbmScaled(Comparison::Y1.process(&params))),
                ("Y2", Process::FbmScaled(Comparison::Y2.process(&params))),
            ];
            for (role, process) in roles {
                let label = format!("export|{role}|H={h}|K={k}|T={}|n={}|M={rows}", sweep.horizon, sweep.n);
                let batch = sample_process(&process, &grid, rows, job_master(sweep.seed, &label))?;
                let file = fs::File::create(dir.join(format!("paths_H{h}_K{k}_{role}.bin")))?;
                write_raw(&batch, None, BufWriter::new(file))?;
            }
        }
    }
    Ok(())
}

fn print_summary(outcome: &RunOutcome) {
    let records = &outcome.output.records;
    let mut families: Vec<&str> = records.iter().map(|r| r.family.name()).collect();
    families.dedup();
    families.sort_unstable();
    families.dedup();
    println!("{:<22} {:>6} {:>6} {:>13}", "check", "PASS", "FAIL", "INCONCLUSIVE");
    for fam in families {
        let c = VerdictCounts::of(
            &records
                .iter()
                .filter(|r| r.family.name() == fam)
                .cloned()
                .collect::<Vec<_>>(),
        );
        println!("{fam:<22} {:>6} {:>6} {:>13}", c.pass, c.fail, c.inconclusive);
    }
    let c = VerdictCounts::of(records);
    println!("{:<22} {:>6} {:>6} {:>13}", "total", c.pass, c.fail, c.inconclusive);
    for r in records.iter().filter(|r| r.verdict == bifbm_core::Verdict::Fail) {
        println!("FAIL {} (z = {:?}, seed {})", r.check_id, r.z, r.seed);
    }
    for e in &outcome.output.errors {
        eprintln!("error at H={}, K={}: {}", e.h, e.k, e.message);
    }
    for e in &outcome.errors {
        eprintln!("error: {e}");
    }
    if let Some(f) = outcome.files.first() {
        if let Some(dir) = f.parent() {
            println!("report written to {}", dir.display());
        }
    }
}
