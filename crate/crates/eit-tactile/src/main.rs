use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use eit_tactile::experiment::{run_mesh_export, run_reconstruction, run_sweep};
use eit_tactile::replay::replay_file;
use eit_tactile::server::Server;
use eit_tactile::session::TouchpadModel;
use eit_tactile::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "eit-tactile",
    version,
    about = "Simulated EIT flexible tactile sensor"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (JSON). Missing fields take the default settings.
    #[arg(long, global = true, conflicts_with = "defaults")]
    config: Option<PathBuf>,
    /// Use the built-in default configuration.
    #[arg(long = "paper-defaults", global = true)]
    defaults: bool,
    /// Override the noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Export both meshes, the protocol and the Jacobian as JSON.
    Mesh,
    /// Lattice sensitivity sweep to sweep.csv.
    Sweep,
    /// Reconstruct every configured phantom with both methods.
    Recon,
    /// mesh, sweep and recon in one go.
    Run,
    /// WebSocket touchpad service.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Re-run a session event log through the event engine.
    Replay { log: PathBuf },
}

impl Global {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.noise.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let config = cli.global.config()?;
    let out = config.output_dir.clone();
    match cli.command {
        Command::Mesh => {
            for p in run_mesh_export(&config, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Sweep => println!("{}", run_sweep(&config, &out)?.display()),
        Command::Recon => recon(&config)?,
        Command::Run => {
            run_mesh_export(&config, &out)?;
            println!("{}", run_sweep(&config, &out)?.display());
            recon(&config)?;
        }
        Command::Serve { port, host } => {
            let model = TouchpadModel::new(&config).context("preparing the touchpad model")?;
            let server = Server::bind(
                (host.as_str(), port),
                Arc::new(model),
                Some(out.join("sessions")),
            )?;
            log::info!("listening on ws://{}", server.local_addr()?);
            server.run()?;
        }
        Command::Replay { log } => {
            let report = replay_file(&log, &config.hmi)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.is_consistent() {
                eprintln!("{} mismatching frames", report.mismatches.len());
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn recon(config: &ExperimentConfig) -> anyhow::Result<()> {
    let report = run_reconstruction(config, &config.output_dir)?;
    let mut failed = 0;
    for p in &report.phantoms {
        if let Some(e) = &p.error {
            eprintln!("{}: {e}", p.label);
            failed += 1;
        }
    }
    println!("{}", config.output_dir.join("report.json").display());
    anyhow::ensure!(
        failed == 0,
        "{failed} of {} phantoms failed",
        report.phantoms.len()
    );
    Ok(())
}
