use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use roomnet::config::{stream, RunConfig};
use roomnet::format;
use roomnet::mission::{run_mission, MissionSetup};
use roomnet::pipeline::{self, Artifacts};
use roomnet_core::rng::derive_seed;
use roomnet_core::sim::{perturb, Episode, Label, RobotPose};
use roomnet_core::{Frame, RoomGraph, RoomNetModel, World};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "roomnet", version, about = "Room-level topological navigation in a simulated indoor world")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML). Defaults describe the standard experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record the scripted mapping episodes and build the room graph.
    Map,
    /// Train the room classifier on the recorded episodes.
    Train,
    /// Run one closed-loop navigation and log its trajectory.
    Navigate(NavigateArgs),
    /// Run seeded trials over a perturbation sweep.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct NavigateArgs {
    #[arg(long)]
    start_room: Option<usize>,
    /// Room whose goal view is rendered as the goal image.
    #[arg(long)]
    goal_room: Option<usize>,
    /// Goal image file (single frame) instead of a rendered goal view.
    #[arg(long, conflicts_with = "goal_room")]
    goal_image: Option<PathBuf>,
    /// Trial index; selects the start pose and frame noise.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    /// Apply `p = q = PERTURB` to the world before navigating.
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated perturbation levels.
    #[arg(long, value_delimiter = ',')]
    perturb: Option<Vec<f64>>,
    #[arg(long)]
    start_room: Option<usize>,
    #[arg(long)]
    goal_room: Option<usize>,
}

/// Failure classes map to exit codes: bad arguments or configuration (1)
/// and failures while running (2).
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Navigate(a) => {
            if let Some(r) = a.start_room {
                cfg.navigate.start_room = r;
            }
            if let Some(r) = a.goal_room {
                cfg.navigate.goal_room = r;
            }
            if !(0.0..=1.0).contains(&a.perturb) {
                return Err(usage(anyhow::anyhow!("--perturb must lie in [0, 1]")));
            }
        }
        Command::Eval(a) => {
            if let Some(n) = a.trials {
                cfg.eval.trials = n;
            }
            if let Some(levels) = &a.perturb {
                cfg.eval.perturb = levels.clone();
            }
            if let Some(r) = a.start_room {
                cfg.navigate.start_room = r;
            }
            if let Some(r) = a.goal_room {
                cfg.navigate.goal_room = r;
            }
            if cfg.eval.trials == 0 {
                return Err(usage(anyhow::anyhow!("--trials must be at least 1")));
            }
        }
        Command::Map | Command::Train => {}
    }
    cfg.validate().map_err(usage)?;
    let world = cfg.build_world().map_err(usage)?;
    if let Command::Navigate(_) | Command::Eval(_) = cli.command {
        for room in [cfg.navigate.start_room, cfg.navigate.goal_room] {
            if room >= world.room_count() {
                return Err(usage(anyhow::anyhow!("room {room} does not exist (world has {})", world.room_count())));
            }
        }
    }
    let out = &cli.common.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match &cli.command {
        Command::Map => cmd_map(&cfg, &world, out)?,
        Command::Train => cmd_train(&cfg, &world, out)?,
        Command::Navigate(a) => cmd_navigate(&cfg, &world, out, a)?,
        Command::Eval(_) => cmd_eval(&cfg, &world, out)?,
    }
    Ok(())
}

fn episodes_dir(out: &Path) -> PathBuf {
    out.join("episodes")
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn cmd_map(cfg: &RunConfig, world: &World, out: &Path) -> Result<()> {
    let episodes = pipeline::record_episodes(cfg, world)?;
    let graph = pipeline::build_map(cfg, world, &episodes)?;
    let dir = episodes_dir(out);
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    for (i, ep) in episodes.iter().enumerate() {
        write_file(&dir.join(format!("episode_{i:03}.rnep")), |w| Ok(format::write_episode(w, ep)?))?;
    }
    write_file(&out.join("graph.rngr"), |w| Ok(format::write_graph(w, &graph)?))?;

    let frames: usize = episodes.iter().map(|e| e.frames.len()).sum();
    let transit = episodes.iter().flat_map(|e| &e.frames).filter(|f| f.label == Label::Transit).count();
    let transition_frames: usize = graph.transitions().values().map(Vec::len).sum();
    println!("rooms: {}", graph.room_count());
    println!("edges: {}", graph.edge_count());
    println!("transition frames: {transition_frames}");
    println!("episodes: {} ({frames} frames, {transit} transit)", episodes.len());
    Ok(())
}

fn load_episodes(cfg: &RunConfig, world: &World, out: &Path) -> Result<Vec<Episode>> {
    let dir = episodes_dir(out);
    let mut paths: Vec<PathBuf> = match fs::read_dir(&dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "rnep"))
            .collect(),
        Err(_) => Vec::new(),
    };
    if paths.is_empty() {
        bail!("no episodes in {} (run `map` first)", dir.display());
    }
    paths.sort();
    let camera = pipeline::start_pose(cfg, world, 0, 0)?;
    paths
        .iter()
        .map(|p| {
            let ep = format::read_episode(&mut BufReader::new(File::open(p)?), &camera)
                .with_context(|| format!("reading {}", p.display()))?;
            if ep.world_hash != world.hash() {
                bail!("{} was recorded in a different world", p.display());
            }
            Ok(ep)
        })
        .collect()
}

#[derive(Serialize)]
struct TrainReport {
    epochs: usize,
    learning_rate: f64,
    loss_curve: Vec<f64>,
    held_out_accuracy: f64,
}

fn cmd_train(cfg: &RunConfig, world: &World, out: &Path) -> Result<()> {
    let episodes = load_episodes(cfg, world, out)?;
    let outcome = pipeline::train_model(cfg, world.room_count(), &episodes)?;
    write_file(&out.join("model.rnmd"), |w| Ok(format::write_model(w, &outcome.model)?))?;
    let held_out = pipeline::held_out_episode(cfg, world)?;
    let report = TrainReport {
        epochs: cfg.train.epochs,
        learning_rate: cfg.train.learning_rate,
        loss_curve: outcome.loss_curve.clone(),
        held_out_accuracy: pipeline::accuracy(cfg, &outcome.model, &held_out)?,
    };
    write_json(&out.join("loss.json"), &report)?;
    if let (Some(first), Some(last)) = (report.loss_curve.first(), report.loss_curve.last()) {
        println!("loss: {first:.4} -> {last:.4} over {} epochs", report.epochs);
    }
    println!("held-out accuracy: {:.4}", report.held_out_accuracy);
    Ok(())
}

fn load_artifacts(cfg: &RunConfig, world: &World, out: &Path) -> Result<(RoomGraph, RoomNetModel)> {
    let graph_path = out.join("graph.rngr");
    let graph = format::read_graph(
        &mut BufReader::new(File::open(&graph_path).with_context(|| format!("opening {} (run `map` first)", graph_path.display()))?),
        &cfg.graph,
    )
    .with_context(|| format!("reading {}", graph_path.display()))?;
    let model_path = out.join("model.rnmd");
    let model = format::read_model(&mut BufReader::new(
        File::open(&model_path).with_context(|| format!("opening {} (run `train` first)", model_path.display()))?,
    ))
    .with_context(|| format!("reading {}", model_path.display()))?;
    if graph.room_count() != world.room_count() || model.dims.room_count() != world.room_count() {
        bail!("artifacts in {} do not match the configured world", out.display());
    }
    Ok((graph, model))
}

fn cmd_navigate(cfg: &RunConfig, world: &World, out: &Path, args: &NavigateArgs) -> Result<()> {
    let (graph, model) = load_artifacts(cfg, world, out)?;
    let goal: Frame = match &args.goal_image {
        Some(path) => {
            let dim = world.descriptor_dim();
            format::read_frame(&mut BufReader::new(File::open(path)?), dim)
                .with_context(|| format!("reading goal image {}", path.display()))?
        }
        None => pipeline::goal_frame(cfg, world, cfg.navigate.goal_room)?,
    };
    let goal_room = pipeline::check_goal(cfg, &graph, &goal)?;

    let nav_world = if args.perturb > 0.0 {
        perturb(world, args.perturb, args.perturb, derive_seed(cfg.derive(stream::PERTURB), args.trial))?
    } else {
        world.clone()
    };
    let start: RobotPose = pipeline::start_pose(cfg, &nav_world, cfg.navigate.start_room, args.trial)?;
    let setup = MissionSetup {
        world: &nav_world,
        model: &model,
        graph: &graph,
        policy: &cfg.policy,
        queues: &cfg.queues,
        dt: cfg.navigate.dt,
        max_steps: cfg.navigate.max_steps,
        stream: derive_seed(cfg.derive(stream::TRIAL), args.trial),
    };
    let trajectory = out.join("trajectory.jsonl");
    let mut log = BufWriter::new(File::create(&trajectory)?);
    let summary = run_mission(&setup, start, &goal, None, Some(&mut log))?;
    log.flush()?;
    write_json(&out.join("summary.json"), &summary)?;

    println!("goal room: {goal_room}");
    println!("planned: {:?}", summary.planned);
    println!("visited: {:?}", summary.visited);
    println!("steps: {}, replans: {}", summary.steps, summary.replans);
    if let Some(e) = &summary.error {
        bail!("{e}");
    }
    if !summary.success {
        bail!("goal not reached within {} steps (phase {})", summary.steps, summary.final_phase.as_str());
    }
    println!("success");
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, world: &World, out: &Path) -> Result<()> {
    let (graph, model) = load_artifacts(cfg, world, out)?;
    let art = Artifacts { world: world.clone(), graph, model };
    let report = pipeline::evaluate(cfg, &art, cfg.eval.trials, &cfg.eval.perturb)?;
    write_json(&out.join("eval.json"), &report)?;
    println!("perturbation  success  followed plan  mean steps  replans");
    for level in &report.levels {
        println!(
            "{:>12.2}  {:>3}/{:<3}  {:>13}  {:>10.1}  {:>7}",
            level.perturbation, level.successes, level.trials, level.followed_plan, level.mean_steps, level.total_replans
        );
    }
    Ok(())
}
