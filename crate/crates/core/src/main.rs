use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use camdp::cdm::{fit_noise_model, ingest_csv, write_csv, EventSeries, NoiseModel};
use camdp::config::{RunConfig, SourceKind};
use camdp::eval::{self, emit_plots_data, evaluate, AblationSpec, Policy, RunMeta, RunReport};
use camdp::policy::{self, load_params, save_params, train, TrainSource};
use camdp::simenv::generate_synthetic;
use camdp::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "camdp", version, about = "Collision-avoidance maneuver decisions as a finite-horizon MDP")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest a Kelvins-layout CDM file and fit the per-step noise model.
    Fit {
        /// CDM file; overrides `dataset`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Generate unmaneuvered synthetic events from a noise model.
    Simulate {
        #[arg(long)]
        noise_model: Option<PathBuf>,
        /// Number of events; overrides `eval.events`.
        #[arg(long)]
        events: Option<usize>,
    },
    /// Train a policy with REINFORCE.
    Train {
        #[arg(long)]
        noise_model: Option<PathBuf>,
        /// Replay the recorded series of this CDM file instead of simulating.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Evaluate a trained policy, or the cut-off baseline, on an event set.
    Eval {
        /// Checkpoint path, or `cutoff`.
        #[arg(long)]
        policy: String,
        /// Kelvins-layout events; synthetic events from the noise model when
        /// absent.
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        noise_model: Option<PathBuf>,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Run the Variation 1 grid and the η sweep.
    Ablate {
        /// TOML ablation spec; overrides the `[ablation]` section.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        noise_model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Iterations of every run except η = 1.
        #[arg(long)]
        iterations: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = e.class();
            eprintln!("error class={} code={} message={:?}", class.name(), class.exit_code(), e.to_string());
            ExitCode::from(class.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::resolve(cli.global.config.as_deref(), std::env::vars())?;
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.global.threads {
        cfg.threads = t;
    }
    apply_flags(&cli.command, &mut cfg)?;
    cfg.validate()?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let out = cli.global.out;
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.toml"), cfg.to_toml_string())?;
    let meta = |command: &str| RunMeta {
        run_id: format!("{command}-{:016x}-{}", cfg.hash(), cfg.seed),
        config_hash: format!("{:016x}", cfg.hash()),
        seed: cfg.seed,
    };

    match &cli.command {
        Command::Fit { .. } => cmd_fit(&cfg, &out),
        Command::Simulate { .. } => cmd_simulate(&cfg, &out),
        Command::Train { .. } => cmd_train(&cfg, &out),
        Command::Eval { policy, events, .. } => cmd_eval(&cfg, policy, events.as_deref(), &out, &meta("eval")),
        Command::Ablate { .. } => cmd_ablate(&cfg, &out, &meta("ablate")),
    }
}

fn apply_flags(cmd: &Command, cfg: &mut RunConfig) -> Result<()> {
    let set_path = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
        if let Some(p) = v {
            *slot = Some(p.clone());
        }
    };
    match cmd {
        Command::Fit { data } => set_path(&mut cfg.dataset, data),
        Command::Simulate { noise_model, events } => {
            set_path(&mut cfg.noise_model, noise_model);
            if let Some(n) = events {
                cfg.eval.events = *n;
            }
        }
        Command::Train { noise_model, data, iterations, eta } => {
            set_path(&mut cfg.noise_model, noise_model);
            if data.is_some() {
                set_path(&mut cfg.dataset, data);
                cfg.source = SourceKind::Historical;
            }
            if let Some(n) = iterations {
                cfg.train.iterations = *n;
            }
            if let Some(e) = eta {
                cfg.episode.eta = *e;
            }
        }
        Command::Eval { noise_model, eta, .. } => {
            set_path(&mut cfg.noise_model, noise_model);
            if let Some(e) = eta {
                cfg.episode.eta = *e;
            }
        }
        Command::Ablate { spec, noise_model, data, iterations } => {
            set_path(&mut cfg.noise_model, noise_model);
            if data.is_some() {
                set_path(&mut cfg.dataset, data);
                cfg.source = SourceKind::Historical;
            }
            if let Some(p) = spec {
                let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                cfg.ablation =
                    toml::from_str::<AblationSpec>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            }
            if let Some(n) = iterations {
                cfg.ablation.iterations = *n;
            }
        }
    }
    Ok(())
}

fn dataset(cfg: &RunConfig) -> Result<Vec<EventSeries>> {
    let path = cfg.dataset.as_ref().ok_or_else(|| Error::Config("no dataset given".into()))?;
    let (series, report) = ingest_csv(path, &cfg.ingest)?;
    log::info!(
        "ingested {}: {} rows kept of {}, {} events kept, {} series",
        path.display(),
        report.rows_kept,
        report.rows_read,
        report.events_kept,
        report.series
    );
    Ok(series)
}

fn noise_model(cfg: &RunConfig) -> Result<NoiseModel> {
    match &cfg.noise_model {
        Some(p) => Ok(NoiseModel::load(p)?),
        None => Ok(NoiseModel::reference()),
    }
}

fn train_source(cfg: &RunConfig) -> Result<TrainSource> {
    Ok(match cfg.source {
        SourceKind::Synthetic => TrainSource::Synthetic(noise_model(cfg)?),
        SourceKind::Historical => TrainSource::Historical(dataset(cfg)?),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_fit(cfg: &RunConfig, out: &Path) -> Result<()> {
    let path = cfg.dataset.as_ref().ok_or_else(|| Error::Config("fit needs --data or dataset".into()))?;
    let (series, report) = ingest_csv(path, &cfg.ingest)?;
    let mut log_text = toml::to_string(&report).map_err(|e| Error::Config(e.to_string()))?;
    log_text.push_str(&format!("mean_cdms_per_event = {}\n", report.mean_cdms_per_event()));
    fs::write(out.join("ingest_report.toml"), log_text)?;
    let model = fit_noise_model(&series)?;
    model.save(out.join("noise_model.toml"))?;
    println!("fitted noise model from {} series -> {}", series.len(), out.join("noise_model.toml").display());
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = noise_model(cfg)?;
    let events = generate_synthetic(&model, cfg.eval.events, &cfg.episode, cfg.stream("sim"));
    let path = out.join("events.csv");
    write_csv(&events, create(&path)?, &cfg.ingest)?;
    println!("wrote {} events -> {}", events.len(), path.display());
    Ok(())
}

fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let source = train_source(cfg)?;
    let mut tc = cfg.train.clone();
    tc.seed = cfg.stream("train");
    let outcome = train(&source, &cfg.episode, &tc, |b| {
        if b.batch % 100 == 0 {
            log::info!("batch {} mean reward {:.5} epsilon {:.4}", b.batch, b.mean_reward, b.epsilon);
        }
    })?;
    save_params(&outcome.params, tc.seed, out.join("policy.bin"))?;
    policy::train::write_reward_csv(&outcome.history, create(&out.join("reward.csv"))?)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    match outcome.converged_at {
        Some(i) => println!("converged at batch {i}"),
        None => println!("did not converge within {} batches", tc.iterations),
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, which: &str, events: Option<&Path>, out: &Path, meta: &RunMeta) -> Result<()> {
    let events = match events {
        Some(p) => ingest_csv(p, &cfg.ingest)?.0,
        None => generate_synthetic(&noise_model(cfg)?, cfg.eval.events, &cfg.episode, cfg.stream("eval-set")),
    };
    let seed = cfg.stream("eval");
    let params = if which == "cutoff" {
        None
    } else {
        let ck = load_params(which, None)?;
        if ck.params.arch != cfg.train.architecture {
            log::warn!("checkpoint architecture {:?} differs from the configured one", ck.params.arch);
        }
        Some(ck.params)
    };
    let mut run = RunReport {
        name: which.to_string(),
        group: None,
        episode: cfg.episode.clone(),
        iterations: 0,
        converged_at: None,
        history: Vec::new(),
        params: None,
        trained: params.as_ref().map(|p| evaluate(Policy::Trained(p), &events, &cfg.episode, seed)),
        cutoff: Some(evaluate(Policy::Cutoff, &events, &cfg.episode, seed)),
        error: None,
    };
    if params.is_some() {
        run.name = "trained".into();
    }
    for r in run.trained.iter().chain(run.cutoff.iter()) {
        print_eval(r);
    }
    emit_plots_data(meta, &[run], &events, &cfg.episode.risk, out)?;
    Ok(())
}

fn print_eval(r: &eval::EvalReport) {
    let a = &r.actions;
    println!(
        "{}: TP {} FP {} TN {} FN {} | precision {:.1}% | fuel {:.4} kg over {} maneuvers, {:.2} g/CAM",
        r.policy,
        a.tp,
        a.fp,
        a.tn,
        a.fn_,
        a.maneuver_precision_pct(),
        r.fuel.total_kg(),
        r.fuel.maneuvers,
        r.fuel.avg_per_cam_g()
    );
}

fn cmd_ablate(cfg: &RunConfig, out: &Path, meta: &RunMeta) -> Result<()> {
    let source = train_source(cfg)?;
    let report = eval::run_ablation(&cfg.ablation, &source, &cfg.episode, &cfg.train, cfg.stream("ablate"), |r| {
        match &r.error {
            Some(e) => println!("{}: failed: {e}", r.name),
            None => println!("{}: converged at {:?}", r.name, r.converged_at),
        }
    });
    let dir = out.join("checkpoints");
    fs::create_dir_all(&dir)?;
    for r in &report.runs {
        if let Some(p) = &r.params {
            let seed = camdp::seed::substream(cfg.stream("ablate"), &r.name);
            save_params(p, seed, dir.join(format!("{}.bin", r.name)))?;
        }
    }
    let poc_events = match &source {
        TrainSource::Historical(v) => v.clone(),
        TrainSource::Synthetic(m) => generate_synthetic(m, cfg.ablation.eval_events, &cfg.episode, cfg.stream("eval-set")),
    };
    emit_plots_data(meta, &report.runs, &poc_events, &cfg.episode.risk, out)?;
    Ok(())
}
