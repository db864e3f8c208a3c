//! `gesture`: command-line front end to the gesture service. Every operation
//! is an HTTP call; without `--server` a private server is started on a
//! loopback port for the duration of the command.

mod files;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gesture_client::Client;
use gesture_core::api::*;
use gesture_core::config::KvConfig;
use gesture_core::dataset::synth::{SynthDatasetConfig, SynthSpec};
use gesture_core::dataset::{load_dataset, read_sample_csv, write_dataset, write_sample_csv, GestureKind};
use gesture_core::engine::{
    write_commands_csv, write_events_csv, CommandMap, EngineConfig, GateConfig, TaskConfig, DEFAULT_TAU_D, DEFAULT_TAU_S,
};
use gesture_core::features::{write_rows_csv, FeatureSet, Timesteps};
use gesture_core::models::{ModelKind, TrainedModel};
use gesture_core::segment::{GaConfig, MotionThresholds, SegmentConfig};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "gesture", version, about = "Hand gesture recognition pipeline")]
struct Cli {
    /// Service root URL, e.g. http://127.0.0.1:8750. Without it a private
    /// server is started in-process.
    #[arg(long, global = true, env = "GESTURE_SERVER")]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the service in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8750", env = "GESTURE_BIND")]
        bind: SocketAddr,
    },
    /// Experiments, threshold sweeps and feature projections.
    #[command(subcommand)]
    Harness(HarnessCmd),
    /// Train one model on an experiment's training split and save it.
    Train(TrainArgs),
    /// Score a saved model on an experiment's test split.
    Eval(EvalArgs),
    /// Run a recorded stream through the online engine and task manager.
    Replay(ReplayArgs),
    /// Motion mask and gesture segments of a stream.
    Segment(SegmentArgs),
    /// Fit motion thresholds to streams with known motion masks.
    Calibrate(CalibrateArgs),
    /// Write the feature rows of a dataset.
    Features(FeaturesArgs),
    /// Generate synthetic data.
    #[command(subcommand)]
    Synth(SynthCmd),
}

#[derive(Subcommand)]
enum HarnessCmd {
    /// Train and score every model family of an experiment.
    Run(ExperimentArgs),
    /// Event counts and accuracy over a grid of gate thresholds.
    Sweep(ExperimentArgs),
    /// Two-dimensional projection of the feature space.
    Project(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Output directory. Defaults to the file's `output` key, then `results/<name>`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// ann, knn or rf.
    #[arg(long)]
    model: ModelKind,
    /// Override the experiment's feature set.
    #[arg(long)]
    features: Option<FeatureSet>,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Also write the full evaluation as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Stream CSV in the per-sample layout.
    #[arg(long)]
    stream: PathBuf,
    #[arg(long)]
    sg_model: Option<PathBuf>,
    #[arg(long)]
    dg_model: Option<PathBuf>,
    /// Motion thresholds file; built-in defaults otherwise.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Drive segmentation from this mask instead of the detector.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TAU_S)]
    tau_s: f64,
    #[arg(long, default_value_t = DEFAULT_TAU_D)]
    tau_d: f64,
    /// Task settings and `command.SG<n>` / `command.DG<n>` mappings.
    #[arg(long)]
    task: Option<PathBuf>,
    /// Consecutive agreeing events before a command is issued.
    #[arg(long)]
    validations: Option<usize>,
    /// Let confident provisional DG events issue commands early.
    #[arg(long)]
    anticipate: bool,
    /// Frames per request.
    #[arg(long, default_value_t = 500)]
    chunk: usize,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    commands: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    stream: PathBuf,
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Segment this mask instead of running the detector.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    min_dg_len: Option<usize>,
    #[arg(long)]
    merge_gap: Option<usize>,
    /// Write the motion mask here.
    #[arg(long)]
    mask_out: Option<PathBuf>,
    /// Write the segment table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Stream CSV; pair each with a `--mask`.
    #[arg(long)]
    stream: Vec<PathBuf>,
    #[arg(long)]
    mask: Vec<PathBuf>,
    /// Calibrate on synthetic streams from this script instead.
    #[arg(long, conflicts_with = "stream")]
    spec: Option<PathBuf>,
    /// Number of synthetic streams.
    #[arg(long, default_value_t = 8)]
    count: u64,
    /// Seed of the first synthetic stream.
    #[arg(long, default_value_t = 1000)]
    stream_seed: u64,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Thresholds file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// SG-23, CI-FULL, PV-FULL, PV-TS or RAW-<w>.
    #[arg(long)]
    features: FeatureSet,
    /// last, all or test.
    #[arg(long, default_value = "last", value_parser = parse_steps)]
    steps: Timesteps,
    /// CSV to write; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Labelled dataset tree with a manifest.
    Dataset(SynthDatasetArgs),
    /// Scripted continuous stream with its true motion mask.
    Stream(SynthStreamArgs),
}

#[derive(Args)]
struct SynthDatasetArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sg_classes: Option<u32>,
    #[arg(long)]
    sg_users: Option<u32>,
    #[arg(long)]
    sg_per_class_user: Option<usize>,
    #[arg(long)]
    dg_classes: Option<u32>,
    #[arg(long)]
    dg_users: Option<u32>,
    #[arg(long)]
    dg_per_class_user: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args)]
struct SynthStreamArgs {
    /// Script file (`blocks = pause:50, stroke:40, ...` and noise keys).
    #[arg(long, conflicts_with = "blocks")]
    spec: Option<PathBuf>,
    /// Inline block list, e.g. `pause:50, stroke:40, pause:50`.
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

fn parse_steps(s: &str) -> Result<Timesteps, String> {
    match s {
        "last" => Ok(Timesteps::Last),
        "all" => Ok(Timesteps::All),
        "test" => Ok(Timesteps::TestSubset),
        other => Err(format!("expected last, all or test, got {other:?}")),
    }
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    if let Command::Serve { bind } = cli.command {
        let (addr, handle) = gesture_server::spawn(bind).await?;
        eprintln!("listening on http://{addr}");
        return Ok(handle.await??);
    }
    let client = match cli.server {
        Some(url) => Client::new(url),
        None => {
            let (addr, _handle) = gesture_server::spawn(SocketAddr::from(([127, 0, 0, 1], 0))).await?;
            Client::new(format!("http://{addr}"))
        }
    };
    match cli.command {
        Command::Serve { .. } => unreachable!(),
        Command::Harness(cmd) => harness(&client, cmd).await,
        Command::Train(args) => train(&client, args).await,
        Command::Eval(args) => eval(&client, args).await,
        Command::Replay(args) => replay(&client, args).await,
        Command::Segment(args) => segment(&client, args).await,
        Command::Calibrate(args) => calibrate(&client, args).await,
        Command::Features(args) => features(&client, args).await,
        Command::Synth(cmd) => synth(&client, cmd).await,
    }
}

fn load_kv(path: &Path) -> Result<KvConfig> {
    KvConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn output_dir(cfg: &KvConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.get("output").map(PathBuf::from))
        .unwrap_or_else(|| Path::new("results").join(cfg.get("name").unwrap_or("experiment")))
}

async fn harness(client: &Client, cmd: HarnessCmd) -> Result<()> {
    let (args, op) = match cmd {
        HarnessCmd::Run(a) => (a, "run"),
        HarnessCmd::Sweep(a) => (a, "sweep"),
        HarnessCmd::Project(a) => (a, "project"),
    };
    let cfg = load_kv(&args.config)?;
    let dir = output_dir(&cfg, args.output);
    let text = cfg.to_string();
    let files = match op {
        "run" => {
            let resp = client.run_experiment(&text).await?;
            print!("{}", resp.report.summary());
            resp.files
        }
        "sweep" => {
            let resp = client.sweep(&text).await?;
            let sw = &resp.sweep;
            println!("sweep: {} thresholds over {} scored decisions", sw.points.len(), sw.scores.len());
            match &sw.selected {
                Some(p) => println!("selected tau {:.3}: FNR {:.4}, TNR {:.4} (max FNR {})", p.tau, p.fnr, p.tnr, sw.max_fnr),
                None => println!("no threshold keeps FNR within {}", sw.max_fnr),
            }
            resp.files
        }
        _ => {
            let resp = client.project(&text).await?;
            println!("projection: {} points", resp.rows.len());
            resp.files
        }
    };
    files::write_outputs(&dir, &files)?;
    println!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}

async fn train(client: &Client, args: TrainArgs) -> Result<()> {
    let mut cfg = load_kv(&args.config)?;
    if let Some(set) = args.features {
        cfg.set("features", set);
    }
    let info = client.train(&cfg.to_string(), args.model).await?;
    let model = client.model(&info.id).await?;
    let _ = client.delete_model(&info.id).await;
    model.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{} on {}: {} classes, saved to {}",
        info.kind,
        info.feature_set,
        info.classes.len(),
        args.out.display()
    );
    Ok(())
}

async fn eval(client: &Client, args: EvalArgs) -> Result<()> {
    let model = TrainedModel::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let mut cfg = load_kv(&args.config)?;
    cfg.set("features", model.feature_set);
    let info = client.import_model(&model).await?;
    let result = client.evaluate(&info.id, &cfg.to_string()).await;
    let _ = client.delete_model(&info.id).await;
    let ev = result?;
    println!("{} on {}: {} test samples", info.kind, info.feature_set, ev.n_test);
    println!("test (trained users): {:.4}", ev.test_trained);
    if let Some(u) = ev.test_untrained {
        println!("test (untrained user): {u:.4}");
    }
    for (c, trained, untrained) in &ev.by_completion {
        match untrained {
            Some(u) => println!("  completion {c:.2}: {trained:.4} / {u:.4}"),
            None => println!("  completion {c:.2}: {trained:.4}"),
        }
    }
    if let Some(out) = &args.out {
        files::write_text(out, &serde_json::to_string_pretty(&ev)?)?;
    }
    Ok(())
}

fn task_config(args: &ReplayArgs) -> Result<TaskConfig> {
    let mut task = TaskConfig::default();
    if let Some(path) = &args.task {
        let cfg = load_kv(path)?;
        task.validations = cfg.parse_or("validations", task.validations)?;
        task.stop_validations = cfg.parse_or("stop_validations", task.stop_validations)?;
        task.pause_timeout = cfg.parse_or("pause_timeout", task.pause_timeout)?;
        task.anticipate = cfg.parse_or("anticipate", task.anticipate)?;
        task.anticipate_min_completion = cfg.parse_or("anticipate_min_completion", task.anticipate_min_completion)?;
        task.commands = CommandMap::from_config(&cfg)?;
    }
    if let Some(v) = args.validations {
        task.validations = v;
    }
    task.anticipate |= args.anticipate;
    Ok(task)
}

async fn import(client: &Client, path: &Option<PathBuf>) -> Result<Option<String>> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Some(client.import_model_json(text).await?.id))
}

async fn replay(client: &Client, args: ReplayArgs) -> Result<()> {
    if args.sg_model.is_none() && args.dg_model.is_none() {
        bail!("replay needs --sg-model, --dg-model or both");
    }
    let frames = read_sample_csv(&args.stream)?;
    let mask = args.mask.as_deref().map(files::read_mask).transpose()?;
    if let Some(m) = &mask {
        if m.len() != frames.len() {
            bail!("mask has {} entries for {} frames", m.len(), frames.len());
        }
    }
    let req = SessionRequest {
        sg_model: import(client, &args.sg_model).await?,
        dg_model: import(client, &args.dg_model).await?,
        engine: EngineConfig {
            gate: GateConfig {
                tau_s: args.tau_s,
                tau_d: args.tau_d,
            },
            ..EngineConfig::default()
        },
        thresholds: match &args.thresholds {
            Some(p) => MotionThresholds::load(p)?,
            None => MotionThresholds::default(),
        },
        task: task_config(&args)?,
    };
    let session = client.create_session(&req).await?;
    let mut events = Vec::new();
    let mut commands = Vec::new();
    let mut frame_ms = Vec::with_capacity(frames.len());
    let chunk = args.chunk.max(1);
    for (i, batch) in frames.chunks(chunk).enumerate() {
        let motion = mask.as_ref().map(|m| m[i * chunk..i * chunk + batch.len()].to_vec());
        let resp = client
            .push_frames(&session.id, &FramesRequest { frames: batch.to_vec(), motion })
            .await?;
        events.extend(resp.output.events);
        commands.extend(resp.output.commands);
        frame_ms.extend(resp.frame_ms);
    }
    let tail = client.finish_session(&session.id).await?;
    events.extend(tail.output.events);
    commands.extend(tail.output.commands);
    let _ = client.delete_session(&session.id).await;
    for id in [&req.sg_model, &req.dg_model].into_iter().flatten() {
        let _ = client.delete_model(id).await;
    }

    let sg = events.iter().filter(|e| e.kind == GestureKind::Static).count();
    println!(
        "{} frames: {} events ({} SG, {} DG), {} commands",
        frames.len(),
        events.len(),
        sg,
        events.len() - sg,
        commands.len()
    );
    if !frame_ms.is_empty() {
        let mean = frame_ms.iter().sum::<f64>() / frame_ms.len() as f64;
        let max = frame_ms.iter().cloned().fold(0.0, f64::max);
        println!("engine time per frame: mean {mean:.3} ms, max {max:.3} ms");
    }
    if let Some(path) = &args.events {
        files::write_text(path, &files::csv_string(|b| write_events_csv(&events, b))?)?;
    }
    if let Some(path) = &args.commands {
        files::write_text(path, &files::csv_string(|b| write_commands_csv(&commands, b))?)?;
    }
    Ok(())
}

async fn segment(client: &Client, args: SegmentArgs) -> Result<()> {
    let mut config = SegmentConfig::default();
    if let Some(v) = args.min_dg_len {
        config.min_dg_len = v;
    }
    if let Some(v) = args.merge_gap {
        config.merge_gap = v;
    }
    let req = SegmentRequest {
        frames: read_sample_csv(&args.stream)?,
        thresholds: match &args.thresholds {
            Some(p) => MotionThresholds::load(p)?,
            None => MotionThresholds::default(),
        },
        segment: config,
        mask: args.mask.as_deref().map(files::read_mask).transpose()?,
    };
    let resp = client.segment(&req).await?;
    let mut table = String::from("kind,start,len,complete\n");
    for s in &resp.segments {
        table.push_str(&format!("{},{},{},{}\n", s.kind.code(), s.start, s.len, u8::from(s.complete)));
    }
    match &args.out {
        Some(path) => files::write_text(path, &table)?,
        None => print!("{table}"),
    }
    if let Some(path) = &args.mask_out {
        files::write_mask(path, &resp.mask)?;
    }
    Ok(())
}

fn block_spec(spec: Option<&Path>, blocks: Option<&str>) -> Result<SynthSpec> {
    let cfg = match (spec, blocks) {
        (Some(path), _) => load_kv(path)?,
        (None, Some(b)) => {
            let mut cfg = KvConfig::default();
            cfg.set("blocks", b);
            cfg
        }
        (None, None) => bail!("give --spec or --blocks"),
    };
    Ok(SynthSpec::from_config(&cfg)?)
}

async fn calibrate(client: &Client, args: CalibrateArgs) -> Result<()> {
    let mut streams = Vec::new();
    if let Some(spec) = &args.spec {
        let spec = block_spec(Some(spec), None)?;
        for k in 0..args.count {
            let s = client
                .synth_stream(&SynthStreamRequest {
                    spec: spec.clone(),
                    seed: args.stream_seed + k,
                })
                .await?;
            streams.push(LabeledStream {
                frames: s.stream.frames,
                mask: s.mask,
            });
        }
    } else {
        if args.stream.is_empty() || args.stream.len() != args.mask.len() {
            bail!("give one --mask per --stream, or --spec for synthetic streams");
        }
        for (s, m) in args.stream.iter().zip(&args.mask) {
            streams.push(LabeledStream {
                frames: read_sample_csv(s)?,
                mask: files::read_mask(m)?,
            });
        }
    }
    let mut ga = GaConfig {
        seed: args.seed,
        ..GaConfig::default()
    };
    if let Some(p) = args.population {
        ga.population = p;
    }
    if let Some(g) = args.generations {
        ga.generations = g;
    }
    let report = client.calibrate(&CalibrateRequest { streams, ga }).await?;
    report.thresholds.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let t = &report.thresholds;
    println!(
        "best F1 {:.4}: v_th {:.4}, a_th {:.2}, on {}, off {}; saved to {}",
        report.best_f1,
        t.v_th,
        t.a_th,
        t.on_count,
        t.off_count,
        args.out.display()
    );
    Ok(())
}

async fn features(client: &Client, args: FeaturesArgs) -> Result<()> {
    let kind = if args.features.is_dynamic() {
        GestureKind::Dynamic
    } else {
        GestureKind::Static
    };
    let samples: Vec<_> = load_dataset(&args.dataset)?.into_iter().filter(|s| s.kind == kind).collect();
    if samples.is_empty() {
        bail!("{} has no {:?} samples", args.dataset.display(), kind);
    }
    let resp = client
        .feature_rows(&RowsRequest {
            feature_set: args.features,
            samples,
            steps: args.steps,
        })
        .await?;
    let text = files::csv_string(|b| write_rows_csv(&resp.rows, b))?;
    match &args.out {
        Some(path) => {
            files::write_text(path, &text)?;
            println!("{} rows written to {}", resp.rows.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

async fn synth(client: &Client, cmd: SynthCmd) -> Result<()> {
    match cmd {
        SynthCmd::Dataset(a) => {
            let mut config = SynthDatasetConfig::default();
            macro_rules! take {
                ($($f:ident),*) => { $(if let Some(v) = a.$f { config.$f = v; })* };
            }
            take!(sg_classes, sg_users, sg_per_class_user, dg_classes, dg_users, dg_per_class_user, noise);
            let samples = client.synth_dataset(&SynthDatasetRequest { config, seed: a.seed }).await?;
            write_dataset(&a.out, &samples)?;
            println!("{} samples written to {}", samples.len(), a.out.display());
        }
        SynthCmd::Stream(a) => {
            let spec = block_spec(a.spec.as_deref(), a.blocks.as_deref())?;
            let s = client.synth_stream(&SynthStreamRequest { spec, seed: a.seed }).await?;
            if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            write_sample_csv(&a.out, &s.stream.frames)?;
            if let Some(path) = &a.mask_out {
                files::write_mask(path, &s.mask)?;
            }
            println!("{} frames written to {}", s.stream.frames.len(), a.out.display());
        }
    }
    Ok(())
}
