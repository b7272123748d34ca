use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hartl::config::DATASET_ROOT_ENV;
use hartl::dataset::{load_shift_spec, recording_path};
use hartl::{compare, load_run, plot, run, sweep, ExperimentConfig, HarnessError, MethodConfig, PlotKind, SweepGrid};
use hartl_core::data::{
    interpolate, load_recording, segment, write_window_cache, ChannelStats, Domain, Manifest, RunId, SensorRecording,
    SplitSpec,
};
use hartl_core::model::LayerGroup;
use hartl_core::synthgen::{generate_split_runs, ShiftSpec};

#[derive(Parser)]
#[command(name = "hartl", version, about = "Cross-subject transfer experiments for activity recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse dataset files and write normalized window caches.
    Ingest {
        #[arg(long, env = DATASET_ROOT_ENV)]
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Column layout; the OPPORTUNITY layout by default.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        source: u32,
        #[arg(long, default_value_t = 4)]
        target: u32,
    },
    /// Generate synthetic shifted recordings and write window caches.
    Generate {
        /// Shift spec; the bundled fixture by default.
        #[arg(long)]
        shift: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a baseline, loss-weighted or adversarial model.
    Train(RunArgs),
    /// Transfer convolution layers from a source model and fine-tune.
    Finetune {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated layer groups to freeze, e.g. conv1,conv2.
        #[arg(long, value_delimiter = ',')]
        frozen: Option<Vec<LayerGroup>>,
        #[arg(long)]
        source_checkpoint: Option<PathBuf>,
    },
    /// Kernel mean matching or TrAdaBoost on delimited sample files.
    Classical {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Tabulate the highest target F1 of finished runs.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Also write the table as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Draw per-iteration charts as SVG.
    Plot {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// f1_curve, lambda_trace or domain_accuracy.
        #[arg(long, default_value = "f1_curve")]
        kind: PlotKind,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Run a config over a parameter grid.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if let Some(n) = &self.name {
            cfg.name = n.clone();
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(t) = cfg.train.as_mut() {
            t.seed = self.seed.unwrap_or(t.seed);
            t.max_iterations = self.iterations.unwrap_or(t.max_iterations);
            t.batch_size = self.batch_size.unwrap_or(t.batch_size);
            t.optimizer.learning_rate = self.learning_rate.unwrap_or(t.optimizer.learning_rate);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::io(path, e)
}

/// Normalize with statistics from the source subject's training runs and
/// write one cache per recording.
fn write_caches(recs: &[SensorRecording], spec: &SplitSpec, manifest_hash: &str, out: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out).map_err(io(out))?;
    let fit: Vec<SensorRecording> = recs
        .iter()
        .filter(|r| r.subject_id == spec.source_subject && spec.train_runs.contains(&r.run))
        .map(|r| interpolate(r).0)
        .collect();
    if fit.is_empty() {
        return Err(HarnessError::MissingData(format!("no training runs for subject {}", spec.source_subject)));
    }
    let stats = ChannelStats::fit(&fit);
    for rec in recs {
        let domain = if rec.subject_id == spec.source_subject { Domain::Source } else { Domain::Target };
        let windows = segment(&stats.apply(&interpolate(rec).0), spec.window_length, spec.stride, true, domain);
        let path = out.join(format!("S{}-{}.cache", rec.subject_id, rec.run));
        write_window_cache(&path, &windows, manifest_hash)?;
        println!("{} ({} windows)", path.display(), windows.len());
    }
    Ok(())
}

fn ingest(root: &Path, out: &Path, manifest: Option<&PathBuf>, source: u32, target: u32) -> Result<(), HarnessError> {
    let manifest = match manifest {
        Some(p) => Manifest::from_path(p)?,
        None => Manifest::opportunity(),
    };
    let spec = SplitSpec { source_subject: source, target_subject: target, ..SplitSpec::paper_default() };
    let runs = [RunId::Adl(1), RunId::Adl(2), RunId::Adl(3), RunId::Adl(4), RunId::Adl(5), RunId::Drill];
    let mut recs = Vec::new();
    for subject in [source, target] {
        for run in runs {
            let path = recording_path(root, subject, run);
            if path.is_file() {
                recs.push(load_recording(&path, &manifest)?);
            } else {
                log::warn!("{} not found, skipped", path.display());
            }
        }
    }
    write_caches(&recs, &spec, &manifest.hash(), out)
}

fn generate(shift: Option<&PathBuf>, out: &Path) -> Result<(), HarnessError> {
    let spec: ShiftSpec = load_shift_spec(shift)?;
    let recs = generate_split_runs(&spec)?;
    std::fs::create_dir_all(out).map_err(io(out))?;
    let path = out.join("shift.toml");
    std::fs::write(&path, spec.to_toml_string()).map_err(io(&path))?;
    write_caches(&recs, &spec.split_spec(), "synthetic", out)
}

fn report(out: &hartl::RunOutput) {
    println!("{}", out.dir.display());
    if let Some(r) = &out.record {
        let best = r.best_row();
        println!(
            "highest target F1 {:.4}; selected iteration {} (target F1 {:.4})",
            r.max_target_f1(),
            r.best.iteration,
            best.map_or(f64::NAN, |b| b.target_test_f1)
        );
    }
}

fn write_json(path: Option<&PathBuf>, table: &hartl::ComparisonTable) -> Result<(), HarnessError> {
    if let Some(p) = path {
        std::fs::write(p, table.to_json()).map_err(io(p))?;
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Ingest { root, out, manifest, source, target } => ingest(&root, &out, manifest.as_ref(), source, target),
        Command::Generate { shift, out } => generate(shift.as_ref(), &out),
        Command::Train(args) => {
            let cfg = args.load()?;
            if cfg.method.is_classical() || matches!(cfg.method, MethodConfig::Finetune { .. }) {
                return Err(HarnessError::Usage(format!(
                    "method {} belongs to another subcommand",
                    cfg.method.name()
                )));
            }
            report(&run(&cfg)?);
            Ok(())
        }
        Command::Finetune { run: args, frozen, source_checkpoint } => {
            let mut cfg = args.load()?;
            let MethodConfig::Finetune { frozen: f, source_checkpoint: s, .. } = &mut cfg.method else {
                return Err(HarnessError::Usage("finetune needs a config with method kind = \"finetune\"".into()));
            };
            if let Some(groups) = frozen {
                *f = groups;
            }
            if let Some(p) = source_checkpoint {
                *s = Some(p);
            }
            cfg.validate()?;
            report(&run(&cfg)?);
            Ok(())
        }
        Command::Classical { config, output_dir } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if !cfg.method.is_classical() {
                return Err(HarnessError::Usage("classical needs method kind kmm or tradaboost".into()));
            }
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            report(&run(&cfg)?);
            Ok(())
        }
        Command::Compare { runs, json } => {
            let refs = runs.iter().map(|p| load_run(p)).collect::<Result<Vec<_>, _>>()?;
            let table = compare(&refs)?;
            print!("{}", table.to_text());
            write_json(json.as_ref(), &table)
        }
        Command::Plot { runs, kind, out } => {
            let refs = runs.iter().map(|p| load_run(p)).collect::<Result<Vec<_>, _>>()?;
            for p in plot(&refs, kind, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Sweep { run: args, grid, json } => {
            let cfg = args.load()?;
            let text = std::fs::read_to_string(&grid).map_err(io(&grid))?;
            let table = sweep(&cfg, &SweepGrid::from_toml_str(&text)?)?;
            print!("{}", table.to_text());
            write_json(json.as_ref(), &table)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
