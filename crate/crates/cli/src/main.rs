use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subcorr_cli::config::{ExperimentConfig, OutputFormat};
use subcorr_cli::harness::{bound_table, reference_energy, run_checks};
use subcorr_cli::{build_instance, demos, emit, output, run_experiment, HarnessError};

#[derive(Parser)]
#[command(name = "subcorr", version, about = "Subspace correction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Base seed; replication k uses seed + k.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of replications M.
    #[arg(long, global = true)]
    replications: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// csv, json or both.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Run checks and replications and write the aggregate table.
    Run { config: PathBuf },
    /// Run the assumption checks only.
    Check { config: PathBuf },
    /// Write the theoretical bound table only.
    Bounds { config: PathBuf },
    /// Run a shipped configuration.
    Demo { name: String },
}

fn apply(cfg: &mut ExperimentConfig, o: &Overrides) -> Result<(), HarnessError> {
    if let Some(s) = o.seed {
        cfg.base_seed = s;
    }
    if let Some(m) = o.replications {
        cfg.replications = m;
    }
    if let Some(d) = &o.out_dir {
        cfg.output.dir = d.display().to_string();
    }
    if let Some(f) = o.format {
        cfg.output.format = f;
    }
    cfg.validate().map_err(HarnessError::Config)
}

fn run(cfg: &ExperimentConfig) -> Result<bool, HarnessError> {
    let record = run_experiment(cfg)?;
    for path in emit(&record, cfg, cfg.output.format, cfg.output.dir.as_ref())? {
        println!("wrote {}", path.display());
    }
    for c in &record.checks {
        println!(
            "{} {}: {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.summary
        );
    }
    if let Some(b) = &record.bounds {
        match b.first_violation {
            None => println!("ok   bounds: mean gap within bound + 4 std/sqrt(M) at every n"),
            Some(n) => println!("FAIL bounds: first violation at n = {n}"),
        }
        if let Some(jm) = &b.j_multiple {
            println!(
                "{} bounds at multiples of J: {} points checked",
                if jm.passed { "ok  " } else { "FAIL" },
                jm.checked
            );
        }
    }
    Ok(record.passed())
}

fn check(cfg: &ExperimentConfig) -> Result<bool, HarnessError> {
    let inst = build_instance(cfg)?;
    let outcomes = run_checks(cfg, &inst)?;
    for c in &outcomes {
        println!(
            "{} {}: {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.summary
        );
    }
    Ok(outcomes.iter().all(|c| c.passed))
}

fn bounds(cfg: &ExperimentConfig) -> Result<bool, HarnessError> {
    let inst = build_instance(cfg)?;
    let zeta0 = inst.problem.energy_unchecked(&inst.start) - reference_energy(cfg, &inst)?;
    match bound_table(cfg, &inst, zeta0)? {
        Some(t) => {
            let path = output::emit_bounds(&t, cfg, cfg.output.dir.as_ref())?;
            println!("wrote {}", path.display());
            for (k, v) in &t.sources {
                println!("{k}: {v}");
            }
            Ok(true)
        }
        None => Err(HarnessError::Config("bounds.kind is \"none\"".into())),
    }
}

type Handler = fn(&ExperimentConfig) -> Result<bool, HarnessError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let (mut cfg, cmd): (ExperimentConfig, Handler) = match &cli.command {
            Command::Run { config } => (ExperimentConfig::from_path(config)?, run),
            Command::Check { config } => (ExperimentConfig::from_path(config)?, check),
            Command::Bounds { config } => (ExperimentConfig::from_path(config)?, bounds),
            Command::Demo { name } => (demos::demo_config(name)?, run),
        };
        apply(&mut cfg, &cli.overrides)?;
        cmd(&cfg)
    })();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
