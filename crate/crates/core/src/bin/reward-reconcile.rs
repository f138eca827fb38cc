use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use reward_reconcile::hvac::HvacAction;
use reward_reconcile::session::{Session, SessionConfig, SessionExport};

#[derive(Parser)]
#[command(name = "reward-reconcile", version, about = "Explain disagreements with a POMDP planner as reward reweightings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an episode following the planner's recommendations and write the log.
    Simulate {
        /// Session config JSON; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of steps; runs to the horizon when omitted.
        #[arg(long)]
        steps: Option<usize>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconcile a proposed action against a logged session.
    Reconcile {
        /// Session export written by `simulate` or the API.
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        timestep: usize,
        /// Worker assignment, e.g. "2,1".
        #[arg(long)]
        user_action: String,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<SessionConfig> {
    match path {
        Some(p) => SessionConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(SessionConfig::default()),
    }
}

fn simulate(config: SessionConfig, seed: u64, steps: Option<usize>) -> Result<Session> {
    let mut session = Session::new("simulate", config, seed)?;
    let mut remaining = steps.unwrap_or(usize::MAX);
    while remaining > 0 && !session.is_complete() {
        let rec = session.recommend()?;
        session.step(&rec.action)?;
        remaining -= 1;
    }
    Ok(session)
}

fn reconcile(path: &PathBuf, timestep: usize, user_action: &str) -> Result<String> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let export: SessionExport = serde_json::from_str(&text).context("parsing session export")?;
    if timestep == 0 || timestep > export.steps.len() + 1 {
        bail!("timestep {timestep} is outside the logged range 1..={}", export.steps.len() + 1);
    }
    let user: HvacAction = user_action.parse().map_err(anyhow::Error::msg)?;
    // verify the whole log, then rebuild the session as it stood at `timestep`
    Session::import("check", export.clone())?;
    let actions: Vec<HvacAction> = export.steps[..timestep - 1].iter().map(|s| s.action.clone()).collect();
    let mut session = Session::replay("reconcile", export.config, export.seed, &actions)?;
    let rec = session.recommend()?;
    let proposal = session.propose(&user)?;
    let out = serde_json::json!({
        "t": timestep,
        "a_a": rec.action,
        "a_h": user,
        "reconcile_result": proposal.reconcile_result,
        "explanation": proposal.explanation,
    });
    Ok(serde_json::to_string_pretty(&out)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, seed, steps, out } => {
            let session = simulate(load_config(config.as_ref())?, seed, steps)?;
            let json = session.export_json();
            match out {
                Some(p) => std::fs::write(&p, json + "\n").with_context(|| format!("writing {}", p.display()))?,
                None => println!("{json}"),
            }
        }
        Command::Reconcile { session, timestep, user_action } => println!("{}", reconcile(&session, timestep, &user_action)?),
        Command::Serve { port, config } => {
            let config = load_config(config.as_ref())?;
            tokio::runtime::Runtime::new()?.block_on(reward_reconcile::server::serve(port, config))?;
        }
    }
    Ok(())
}
