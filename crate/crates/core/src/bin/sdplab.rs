//! Command-line driver for the scenario laboratory.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdplab::io::Exporter;
use sdplab::scenario::{self, ScenarioConfig};

#[derive(Parser)]
#[command(name = "sdplab", version, about = "Stochastic Degasperis-Procesi numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run with ledger, bounds and entropy diagnostics.
    Run(Common),
    /// Vanishing-viscosity ladder on one shared noise path.
    EpsStudy(Common),
    /// Mesh refinement at fixed viscosity.
    MeshStudy(Common),
    /// Independent noise paths; mean and variance of the final state.
    Ensemble(Common),
    /// Kruzkov and half-entropy sweeps.
    EntropyCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file, or the name of a shipped scenario.
    #[arg(long)]
    config: String,
    /// Overrides `noise.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: out/<scenario>/<command>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// `key=value` override, TOML-typed; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Run(c) => ("run", c),
            Command::EpsStudy(c) => ("eps-study", c),
            Command::MeshStudy(c) => ("mesh-study", c),
            Command::Ensemble(c) => ("ensemble", c),
            Command::EntropyCheck(c) => ("entropy-check", c),
        }
    }
}

fn execute(command: &Command) -> sdplab::Result<bool> {
    let (name, common) = command.parts();
    let mut config = ScenarioConfig::load(&common.config, &common.overrides)?;
    if let Some(seed) = common.seed {
        config = config.with_seed(seed);
    }
    if common.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global()
            .map_err(|e| sdplab::Error::Usage(format!("thread pool: {e}")))?;
    }
    let threads = rayon::current_num_threads();
    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&config.name).join(name));
    let mut ex = Exporter::new(&dir)?;

    let (verdicts, text): (BTreeMap<String, bool>, String) = match command {
        Command::Run(_) => {
            let outcome = scenario::run_scenario(&config)?;
            scenario::export_run(&outcome, &mut ex)?;
            (outcome.summary.verdicts.clone(), outcome.summary.text())
        }
        Command::EpsStudy(_) => {
            let r = scenario::epsilon_study(&config, &config.study.epsilons)?;
            scenario::export_study(&r, &mut ex)?;
            (r.verdicts.clone(), r.text())
        }
        Command::MeshStudy(_) => {
            let r = scenario::mesh_study(&config, &config.study.meshes)?;
            scenario::export_study(&r, &mut ex)?;
            (r.verdicts.clone(), r.text())
        }
        Command::Ensemble(_) => {
            let r = scenario::ensemble(&config, config.study.members)?;
            scenario::export_study(&r, &mut ex)?;
            (r.verdicts.clone(), r.text())
        }
        Command::EntropyCheck(_) => {
            let r = scenario::entropy_check(&config)?;
            scenario::export_entropy_check(&r, &mut ex)?;
            (r.verdicts.clone(), r.text())
        }
    };

    let mut manifest = scenario::manifest_for(&config, name, threads)?;
    manifest.verdicts = verdicts;
    let manifest = ex.finish(manifest)?;
    print!("{text}");
    println!("wrote {} files to {}", manifest.files.len() + 1, dir.display());
    Ok(manifest.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more verdicts failed");
            ExitCode::from(2)
        }
        Err(e) => {
            let mut msg = e.to_string();
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg += &format!(": {s}");
                src = s.source();
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
