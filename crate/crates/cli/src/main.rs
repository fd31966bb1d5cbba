//! `echo`: command-line front end for bank synthesis, episode generation,
//! policy training, evaluation and trace plotting.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use echo_core::acoustics::{write_wav_stereo, BinauralFrame, Waveform};
use echo_core::episodes::{generate_dataset, load_dataset, DatasetManifest, Preset, Task};
use echo_core::harness::{
    aggregate, prepare, read_records, render_text, run, trace_episode, write_csv, ControllerKind, RunConfig,
};
use echo_core::learning::{evaluate, train_navigate, write_checkpoint, write_curve_csv, AudioGoalEnv, EnvConfig, PpoConfig};
use echo_core::perception::Listener;
use echo_core::planner::Backend;
use echo_core::skills::write_trace;
use echo_core::soundbank::{synthesize_bank, Split};
use echo_core::world::Category;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "echo", version, about = "Sound-triggered mobile manipulation simulator and benchmark")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Stow,
    Interact,
    Bisonic,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Stow => Task::SonicStow,
            TaskArg::Interact => Task::SonicInteract,
            TaskArg::Bisonic => Task::BiSonic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Oracle,
    Rule,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllersArg {
    Oracle,
    Trained,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the sound bank and write its manifest (and optionally WAVs).
    SynthBank {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        wav: bool,
    },
    /// Generate a validated episode dataset.
    Generate {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, value_enum, default_value = "desk")]
        preset: PresetArg,
        /// Seed of the sound bank the episodes draw clips from.
        #[arg(long, default_value_t = 0)]
        bank_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reload a dataset and re-validate every episode.
    Validate {
        /// Dataset manifest.
        dataset: PathBuf,
    },
    /// Render what the agent hears from its start pose to a stereo WAV.
    RenderAudio {
        episode: String,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of one-second observation steps.
        #[arg(long, default_value_t = 4)]
        steps: usize,
    },
    /// Train the audio-goal navigation policy with PPO.
    TrainNav {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        /// Use the full-size network and step budget.
        #[arg(long)]
        paper: bool,
        #[arg(long, default_value_t = 200)]
        eval_episodes: usize,
        #[arg(long, default_value_t = 0)]
        bank_seed: u64,
    },
    /// Evaluate a planner and controller set on a dataset split.
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum)]
        planner: Option<PlannerArg>,
        #[arg(long, value_enum)]
        controllers: Option<ControllersArg>,
        /// Navigation checkpoint for trained controllers.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Remote planner URL.
        #[arg(long, env = "ECHO_ENDPOINT")]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long)]
        retries: Option<usize>,
    },
    /// Aggregate saved episode records into a report.
    Report {
        records: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-run one episode and write its step trace and a top-down plot.
    Trace {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        episode: String,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// JSON-lines step trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "oracle")]
        controllers: ControllersArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::SynthBank { ref out, wav } => {
            let bank = synthesize_bank(cli.seed);
            fs::create_dir_all(out)?;
            bank.save_manifest(&out.join("bank.json"))?;
            if wav {
                bank.export_wavs(&out.join("wav"))?;
            }
            log::info!("{} clips written to {}", bank.clips.len(), out.display());
        }
        Command::Generate { task, preset, bank_seed, ref out } => {
            let preset = match preset {
                PresetArg::Paper => Preset::Paper,
                PresetArg::Desk => Preset::Desk,
            };
            let bank = synthesize_bank(bank_seed);
            let dataset = generate_dataset(task.into(), preset, cli.seed, &bank)?;
            dataset.save(out)?;
            log::info!(
                "{}: {} train / {} test episodes in {}",
                dataset.manifest.task,
                dataset.train.len(),
                dataset.test.len(),
                out.display()
            );
        }
        Command::Validate { ref dataset } => {
            let d = load_dataset(dataset)?;
            println!("{}: {} train and {} test episodes valid", d.manifest.task, d.train.len(), d.test.len());
        }
        Command::RenderAudio { ref episode, ref dataset, ref out, steps } => render_audio(dataset, episode, out, steps)?,
        Command::TrainNav { ref out, steps, paper, eval_episodes, bank_seed } => {
            let mut cfg = if paper { PpoConfig::paper() } else { PpoConfig::default() };
            if let Some(s) = steps {
                cfg.total_steps = s;
            }
            train_nav(out, &cfg, cli.seed, bank_seed, eval_episodes)?;
        }
        Command::Eval {
            ref dataset,
            planner,
            controllers,
            ref checkpoint,
            split,
            limit,
            ref out,
            ref endpoint,
            ref model,
            timeout,
            retries,
        } => {
            let mut cfg = match (&cli.config, dataset) {
                (Some(path), _) => RunConfig::load(path)?,
                (None, Some(manifest)) => RunConfig::new(manifest_task(manifest)?, manifest.clone()),
                (None, None) => bail!("eval needs --dataset or --config"),
            };
            if let Some(d) = dataset {
                cfg.task = manifest_task(d)?;
                cfg.dataset = d.clone();
            }
            if let Some(p) = planner {
                cfg.planner.backend = match p {
                    PlannerArg::Oracle => Backend::Oracle,
                    PlannerArg::Rule => Backend::RuleBased,
                    PlannerArg::Remote => Backend::Remote,
                };
            }
            if let Some(c) = controllers {
                cfg.controllers = controller_kind(c);
            }
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint.clone();
            }
            if let Some(s) = split {
                cfg.split = match s {
                    SplitArg::Train => Split::Train,
                    SplitArg::Test => Split::Test,
                };
            }
            cfg.limit = limit.or(cfg.limit);
            if let Some(o) = out {
                cfg.output_dir = o.clone();
            }
            if let Some(e) = endpoint {
                cfg.planner.remote.endpoint = e.clone();
            }
            if let Some(m) = model {
                cfg.planner.remote.model = m.clone();
            }
            if let Some(t) = timeout {
                cfg.planner.remote.timeout_s = t;
            }
            if let Some(r) = retries {
                cfg.planner.remote.retries = r;
            }
            if let Some(j) = cli.jobs {
                cfg.jobs = j;
            }
            if cli.seed != 0 {
                cfg.seed = cli.seed;
            }
            let result = run(&cfg)?;
            print!("{}", render_text(&result.report));
            log::info!("reports written to {}", cfg.output_dir.display());
        }
        Command::Report { ref records, ref csv } => {
            let records = read_records(BufReader::new(File::open(records)?))?;
            let report = aggregate(&records)?;
            print!("{}", render_text(&report));
            if let Some(path) = csv {
                write_csv(File::create(path)?, &report)?;
            }
        }
        Command::Trace {
            ref dataset,
            ref episode,
            ref svg,
            ref trace,
            controllers,
            ref checkpoint,
        } => {
            let mut cfg = RunConfig::new(manifest_task(dataset)?, dataset.clone());
            cfg.controllers = controller_kind(controllers);
            cfg.checkpoint = checkpoint.clone();
            cfg.seed = cli.seed;
            let prepared = prepare(&cfg)?;
            let (artifact, steps, record) = trace_episode(&prepared, episode)?;
            if let Some(path) = svg {
                let ep = prepared
                    .dataset
                    .train
                    .iter()
                    .chain(&prepared.dataset.test)
                    .find(|e| &e.episode_id == episode)
                    .ok_or_else(|| anyhow!("no episode {episode}"))?;
                let (scene, _) = prepared.dataset.pool.find(&ep.scene_id).context("episode scene")?;
                fs::write(path, artifact.to_svg(scene))?;
            }
            if let Some(path) = trace {
                write_trace(BufWriter::new(File::create(path)?), &steps)?;
            }
            println!("{}", serde_json::to_string_pretty(&record)?);
        }
    }
    Ok(())
}

fn controller_kind(c: ControllersArg) -> ControllerKind {
    match c {
        ControllersArg::Oracle => ControllerKind::Oracle,
        ControllersArg::Trained => ControllerKind::Trained,
    }
}

fn manifest_task(path: &Path) -> Result<Task> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    Ok(manifest.task)
}

fn render_audio(dataset: &Path, episode_id: &str, out: &Path, steps: usize) -> Result<()> {
    let d = load_dataset(dataset)?;
    let ep = d
        .train
        .iter()
        .chain(&d.test)
        .find(|e| e.episode_id == episode_id)
        .ok_or_else(|| anyhow!("no episode {episode_id}"))?;
    let (scene, grid) = d.pool.find(&ep.scene_id).context("episode scene")?;
    let world = ep.build_world(scene.clone(), grid.clone())?;
    let listener = Listener::new(Arc::new(synthesize_bank(d.manifest.bank_seed)));
    let (mut left, mut right, mut clipped) = (Vec::new(), Vec::new(), false);
    for t in 0..steps {
        let frame = listener.render(&world, t)?;
        left.extend_from_slice(&frame.left.samples);
        right.extend_from_slice(&frame.right.samples);
        clipped |= frame.clipped;
    }
    if clipped {
        log::warn!("rendered audio was clipped");
    }
    let frame = BinauralFrame {
        left: Waveform::new(left),
        right: Waveform::new(right),
        clipped,
    };
    write_wav_stereo(&frame, BufWriter::new(File::create(out)?))?;
    Ok(())
}

fn train_nav(out: &Path, cfg: &PpoConfig, seed: u64, bank_seed: u64, eval_episodes: usize) -> Result<()> {
    let bank = Arc::new(synthesize_bank(bank_seed));
    let factory = || AudioGoalEnv::new(bank.clone(), Category::Sink, EnvConfig::default());
    let outcome = train_navigate(factory, cfg, seed)?;
    fs::create_dir_all(out)?;
    write_checkpoint(BufWriter::new(File::create(out.join("nav.ckpt"))?), &outcome.net, cfg)?;
    write_curve_csv(File::create(out.join("curve.csv"))?, &outcome.curve)?;
    let stats = evaluate(&outcome.net, &mut factory()?, eval_episodes, seed ^ 0x5EED, false)?;
    println!(
        "evaluation: {:.1}% success over {} episodes, {:.1} mean steps",
        100.0 * stats.success_rate,
        stats.episodes,
        stats.mean_steps
    );
    Ok(())
}
