//! Command-line entry point.

use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use somnav_core::persistence;
use somnav_core::{AgentConfig, Exec, GridWorld, Heading, InputVector, Pose, SensorModel};

use crate::headless::{self, TrainSpec};
use crate::protocol::ClientMessage;
use crate::server;
use crate::session::{parse_timeline, Session, TimedMessage};

#[derive(Debug, Parser)]
#[command(
    name = "somnav",
    version,
    about = "Associative-memory robot navigation: train, run, serve"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explore a world, write the learned memory and print a report.
    Train(TrainArgs),
    /// Seek a goal snapshot from saved memory.
    Run(RunArgs),
    /// Live operator service over WebSocket.
    Serve(ServeArgs),
    /// Validate a memory file and write it out canonically.
    Export(CopyArgs),
    /// Validate an external memory file and store it as the working memory.
    Import(ImportArgs),
    /// Write the observation at a pose, for use as a goal file.
    Snapshot(SnapshotArgs),
}

#[derive(Debug, Args)]
pub struct WorldArgs {
    #[arg(long, value_name = "PATH")]
    pub world: PathBuf,
    #[arg(long, default_value = "ring16", value_name = "ring16|image8x8")]
    pub sensor: SensorModel,
    /// Sensor saturation distance in cells.
    #[arg(long, value_name = "R")]
    pub max_range: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long, default_value = "12x12", value_parser = parse_grid, value_name = "WxH")]
    pub grid: (usize, usize),
    #[arg(long, default_value_t = 0.9, value_name = "R")]
    pub alpha_winner: f64,
    #[arg(long, default_value_t = 0.4, value_name = "R")]
    pub alpha_neighbor: f64,
    /// Length of the training phase. Defaults to a third of --steps.
    #[arg(long, value_name = "N")]
    pub plastic_steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, default_value_t = 3000, value_name = "N")]
    pub steps: u64,
    #[arg(long, default_value_t = 0, value_name = "S")]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0, value_name = "R")]
    pub budget_factor: f64,
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub min_edge_count: u32,
    /// Output memory file.
    #[arg(long, value_name = "PATH")]
    pub memory: PathBuf,
    /// Report file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 100, value_name = "N")]
    pub sample_every: u64,
    /// Run navigation trials towards the observation at ROW,COL,HEADING.
    #[arg(long, value_parser = parse_pose, value_name = "ROW,COL,H")]
    pub goal_pose: Option<Pose>,
    #[arg(long, default_value_t = 20, value_name = "N")]
    pub trials: usize,
    #[arg(long, default_value_t = false)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, value_name = "PATH")]
    pub memory: PathBuf,
    /// Goal snapshot: a JSON array of observation values. Stored as
    /// snapshot 1.
    #[arg(long, value_name = "PATH")]
    pub goal: Option<PathBuf>,
    /// Cycles to run.
    #[arg(long, default_value_t = 200, value_name = "N")]
    pub steps: u64,
    #[arg(long, default_value_t = 0, value_name = "S")]
    pub seed: u64,
    /// Overrides the value stored in the memory file.
    #[arg(long, value_name = "R")]
    pub budget_factor: Option<f64>,
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub min_edge_count: u32,
    /// Timeline of operator messages, one `{"tick", "message"}` object per
    /// line. Without it the goal is set at tick 0.
    #[arg(long, value_name = "PATH")]
    pub script: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Start pose instead of the world's S cell.
    #[arg(long, value_parser = parse_pose, value_name = "ROW,COL,H")]
    pub start: Option<Pose>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, default_value_t = 8080, value_name = "P")]
    pub port: u16,
    #[arg(long, default_value_t = 100, value_name = "N")]
    pub tick_ms: u64,
    /// Start from saved memory instead of a fresh map.
    #[arg(long, value_name = "PATH")]
    pub memory: Option<PathBuf>,
    /// Goal snapshot files preloaded as snapshots 1, 2, ...
    #[arg(long, value_name = "PATH")]
    pub goal: Vec<PathBuf>,
    #[arg(long, default_value_t = 0, value_name = "S")]
    pub seed: u64,
    /// Used to size the default plastic phase of a fresh map.
    #[arg(long, default_value_t = 3000, value_name = "N")]
    pub steps: u64,
    #[arg(long, value_name = "R")]
    pub budget_factor: Option<f64>,
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub min_edge_count: u32,
}

#[derive(Debug, Args)]
pub struct CopyArgs {
    #[arg(long, value_name = "PATH")]
    pub memory: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long, value_name = "PATH")]
    pub from: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub memory: PathBuf,
}

#[derive(Debug, Args)]
pub struct SnapshotArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, value_parser = parse_pose, value_name = "ROW,COL,H")]
    pub pose: Pose,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let dim = |v: &str| match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("grid sides must be positive integers, got {s:?}")),
    };
    Ok((dim(w)?, dim(h)?))
}

fn parse_pose(s: &str) -> Result<Pose, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [row, col, heading] = parts.as_slice() else {
        return Err(format!("expected ROW,COL,HEADING, got {s:?}"));
    };
    let heading = match *heading {
        "N" | "n" => Heading::N,
        "E" | "e" => Heading::E,
        "S" | "s" => Heading::S,
        "W" | "w" => Heading::W,
        h => return Err(format!("heading must be one of N, E, S, W, got {h:?}")),
    };
    let num = |v: &str| v.parse::<usize>().map_err(|_| format!("bad coordinate {v:?}"));
    Ok(Pose::new(num(row)?, num(col)?, heading))
}

impl WorldArgs {
    fn load(&self) -> anyhow::Result<GridWorld> {
        let world = GridWorld::load(&self.world)
            .with_context(|| format!("reading world {}", self.world.display()))?
            .with_context(|| format!("world {}", self.world.display()))?;
        Ok(match self.max_range {
            Some(r) if r > 0.0 && r.is_finite() => world.with_max_range(r),
            Some(r) => bail!("--max-range must be positive, got {r}"),
            None => world,
        })
    }
}

fn read_goal(path: &Path) -> anyhow::Result<InputVector> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading goal {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("goal {}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Run(a) => run(a),
        Command::Serve(a) => serve(a),
        Command::Export(a) => copy_memory(&a.memory, &a.out),
        Command::Import(a) => copy_memory(&a.from, &a.memory),
        Command::Snapshot(a) => {
            let world = a.world.load()?;
            let obs = world
                .sense(a.pose, a.world.sensor)
                .with_context(|| format!("pose {:?}", a.pose))?;
            write_output(Some(&a.out), &serde_json::to_string(&obs)?)
        }
    }
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let world = a.world.load()?;
    let spec = TrainSpec {
        width: a.map.grid.0,
        height: a.map.grid.1,
        sensor: a.world.sensor,
        seed: a.seed,
        alpha_winner: a.map.alpha_winner,
        alpha_neighbor: a.map.alpha_neighbor,
        budget_factor: a.budget_factor,
        min_edge_count: a.min_edge_count,
        plastic_steps: a.map.plastic_steps.unwrap_or(a.steps / 3),
        goal: a.goal_pose,
        trials: a.trials,
        sample_every: a.sample_every,
        ..TrainSpec::new(a.steps, a.seed)
    };
    let exec = if a.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    let (report, sim) = headless::run_headless(&world, &spec, exec)?;
    persistence::save_memory_to_path(
        sim.agent.som(),
        sim.agent.model(),
        &headless::memory_settings(&sim),
        &a.memory,
    )
    .with_context(|| format!("writing memory {}", a.memory.display()))?;
    write_output(a.report.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn run(a: RunArgs) -> anyhow::Result<()> {
    let world = a.world.load()?;
    let loaded = persistence::load_memory_from_path(&a.memory)
        .with_context(|| format!("loading memory {}", a.memory.display()))?;
    let config = AgentConfig {
        budget_factor: a.budget_factor.unwrap_or(loaded.agent.budget_factor),
        exploration_seed: a.seed,
        plastic_steps: loaded.agent.plastic_steps,
        min_edge_count: a.min_edge_count,
    };
    let agent = headless::agent_from_file(loaded, config)?;
    let mut session = Session::new(world, a.world.sensor, agent);
    if let Some(pose) = a.start {
        session.place(pose)?;
    }
    if let Some(goal) = &a.goal {
        session.add_snapshot(read_goal(goal)?)?;
    }
    let timeline = match &a.script {
        Some(p) => parse_timeline(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None if a.goal.is_some() => vec![TimedMessage {
            tick: 0,
            message: ClientMessage::SetGoal {
                snapshot_id: 1,
                seq: None,
            },
        }],
        None => Vec::new(),
    };
    let report = headless::run_session(&mut session, &timeline, a.steps)?;
    write_output(a.report.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let world = a.world.load()?;
    let agent = match &a.memory {
        Some(path) => {
            let loaded = persistence::load_memory_from_path(path)
                .with_context(|| format!("loading memory {}", path.display()))?;
            let config = AgentConfig {
                budget_factor: a.budget_factor.unwrap_or(loaded.agent.budget_factor),
                exploration_seed: a.seed,
                plastic_steps: loaded.agent.plastic_steps,
                min_edge_count: a.min_edge_count,
            };
            headless::agent_from_file(loaded, config)?
        }
        None => {
            let spec = TrainSpec {
                width: a.map.grid.0,
                height: a.map.grid.1,
                sensor: a.world.sensor,
                alpha_winner: a.map.alpha_winner,
                alpha_neighbor: a.map.alpha_neighbor,
                budget_factor: a.budget_factor.unwrap_or(2.0),
                min_edge_count: a.min_edge_count,
                plastic_steps: a.map.plastic_steps.unwrap_or(a.steps / 3),
                ..TrainSpec::new(a.steps, a.seed)
            };
            spec.simulation(&world)?.agent
        }
    };
    let mut session = Session::new(world, a.world.sensor, agent);
    for g in &a.goal {
        session.add_snapshot(read_goal(g)?)?;
    }
    let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, a.port));
    let tick = Duration::from_millis(a.tick_ms.max(1));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let mut handle = server::serve(addr, session, tick).await?;
        eprintln!("listening on ws://{}", handle.local_addr());
        tokio::select! {
            r = tokio::signal::ctrl_c() => r?,
            _ = handle.wait() => bail!("decision loop stopped unexpectedly"),
        }
        handle.shutdown().await;
        Ok(())
    })
}

fn copy_memory(from: &Path, to: &Path) -> anyhow::Result<()> {
    let loaded = persistence::load_memory_from_path(from).with_context(|| format!("loading {}", from.display()))?;
    persistence::save_memory_to_path(&loaded.som, &loaded.model, &loaded.agent, to)
        .with_context(|| format!("writing {}", to.display()))
}
