use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ihc2he_core::pipeline::{
    cmd_detect_positive, cmd_evaluate, cmd_prepare, cmd_report, cmd_segment, cmd_train_translation, cmd_translate,
    Domain, ExternalBackend, PipelineConfig, ReportLayout, RunLayout,
};
use ihc2he_core::segmentation::stub_backend;
use ihc2he_core::{Error, Result};

/// IHC nuclei segmentation through virtual H&E staining.
#[derive(Parser, Debug)]
#[command(name = "ihc2he", version, about)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for patch sampling and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Bit-reproducible training (sequential per-sample processing).
    #[arg(long, global = true)]
    deterministic: bool,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Root of the run directory tree used for default output locations.
    #[arg(long, global = true, default_value = "runs", env = "IHC2HE_RUN_DIR")]
    run_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DomainArg {
    Ihc,
    He,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LayoutArg {
    /// Dice, Accuracy, Precision, Recall, F1 per run.
    Overall,
    /// F1 per method and category.
    PerCategory,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample patches from a directory of images and write a dataset manifest.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        domain: DomainArg,
        #[arg(long)]
        patch_size: Option<usize>,
        /// Patches per source image.
        #[arg(long)]
        count: Option<usize>,
        /// Use whole images instead of sampled patches.
        #[arg(long)]
        whole_image: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the IHC -> H&E translator on two manifests.
    TrainTranslation {
        /// IHC manifest (file or directory).
        #[arg(long)]
        ihc: PathBuf,
        /// H&E manifest (file or directory).
        #[arg(long)]
        he: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Produce virtual H&E images with a trained checkpoint.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tile_size: Option<usize>,
        #[arg(long)]
        overlap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment nuclei with a registered backend.
    Segment {
        /// Backend name (default from the config file).
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted label maps against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        iou_threshold: Option<f64>,
        #[arg(long)]
        iou_start: Option<f64>,
        #[arg(long)]
        iou_stop: Option<f64>,
        #[arg(long)]
        iou_step: Option<f64>,
        /// Row label in consolidated reports.
        #[arg(long)]
        method: Option<String>,
        /// Category (e.g. organ) for per-category reports.
        #[arg(long)]
        category: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detect positively stained cells and write a submission CSV.
    DetectPositive {
        #[arg(long)]
        ihc: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        hue_low: Option<f64>,
        #[arg(long)]
        hue_high: Option<f64>,
        #[arg(long)]
        min_saturation: Option<f64>,
        #[arg(long)]
        max_intensity: Option<f64>,
        #[arg(long)]
        min_fraction: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Consolidate evaluation runs into one table.
    Report {
        #[arg(required = true)]
        run_ids: Vec<String>,
        #[arg(long, value_enum, default_value = "overall")]
        layout: LayoutArg,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the resolved configuration as TOML.
    ShowConfig,
    /// Reference external backend: writes an empty label map per input PNG.
    #[command(hide = true)]
    StubBackend {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, env = "IHC2HE_STUB_OMIT", value_delimiter = ',')]
        omit: Vec<String>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.translation.seed = seed;
        config.prepare.seed = seed;
    }
    if cli.deterministic {
        config.translation.deterministic = true;
    }
    if !config.segmentation.backends.contains_key("stub") {
        let exe = std::env::current_exe().map_err(|e| Error::Config(format!("cannot locate own executable: {e}")))?;
        let exe = shell_words::quote(&exe.to_string_lossy()).into_owned();
        config.segmentation.backends.insert(
            "stub".into(),
            ExternalBackend {
                command: format!("{exe} stub-backend --input {{input}} --output {{output}}"),
                timeout_secs: 60,
                version: ihc2he_core::VERSION.into(),
            },
        );
    }
    Ok(config)
}

fn print_paths(paths: &[PathBuf], out: &Path) {
    println!("{} file(s) written to {}", paths.len(), out.display());
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set up {jobs} worker threads: {e}")))?;
    }
    let mut config = resolve_config(&cli)?;
    let layout = RunLayout::new(&cli.run_dir);
    match cli.command {
        Command::Prepare {
            input,
            domain,
            patch_size,
            count,
            whole_image,
            out,
        } => {
            let domain = match domain {
                DomainArg::Ihc => Domain::Ihc,
                DomainArg::He => Domain::He,
            };
            set(&mut config.prepare.patch_size, patch_size);
            set(&mut config.prepare.count_per_image, count);
            config.prepare.whole_image |= whole_image;
            let out = out.unwrap_or_else(|| layout.manifests(domain));
            let manifest = cmd_prepare(&input, domain, &out, &config)?;
            println!("{} {} patch(es) described in {}", manifest.entries.len(), domain, out.display());
        }
        Command::TrainTranslation {
            ihc,
            he,
            epochs,
            batch_size,
            out,
        } => {
            set(&mut config.translation.epochs, epochs);
            set(&mut config.translation.batch_size, batch_size);
            let out = out.unwrap_or_else(|| layout.checkpoints());
            let path = cmd_train_translation(&ihc, &he, &out, &config)?;
            println!("checkpoint written to {}", path.display());
        }
        Command::Translate {
            checkpoint,
            input,
            tile_size,
            overlap,
            out,
        } => {
            set(&mut config.translate.tile_size, tile_size);
            set(&mut config.translate.overlap, overlap);
            let out = out.unwrap_or_else(|| layout.virtual_he());
            let paths = cmd_translate(&checkpoint, &input, &out, &config)?;
            print_paths(&paths, &out);
        }
        Command::Segment { backend, input, out } => {
            let backend = backend.unwrap_or_else(|| config.segmentation.backend.clone());
            let out = out.unwrap_or_else(|| layout.masks(&backend));
            let paths = cmd_segment(&backend, &input, &out, &config)?;
            print_paths(&paths, &out);
        }
        Command::Evaluate {
            pred,
            gt,
            iou_threshold,
            iou_start,
            iou_stop,
            iou_step,
            method,
            category,
            out,
        } => {
            let e = &mut config.evaluation;
            set(&mut e.iou_threshold, iou_threshold);
            set(&mut e.curve_start, iou_start);
            set(&mut e.curve_stop, iou_stop);
            set(&mut e.curve_step, iou_step);
            let name = match (&method, &category) {
                (Some(m), Some(c)) => format!("{m}_{c}"),
                (Some(m), None) => m.clone(),
                (None, Some(c)) => c.clone(),
                (None, None) => "default".into(),
            };
            let out = out.unwrap_or_else(|| layout.metrics(&name));
            let report = cmd_evaluate(&pred, &gt, &out, method.as_deref(), category.as_deref(), &config)?;
            print!("{}", std::fs::read_to_string(out.join(ihc2he_core::pipeline::TABLE_FILE)).unwrap_or_default());
            println!("{} image(s) scored; report in {}", report.images, out.display());
        }
        Command::DetectPositive {
            ihc,
            masks,
            hue_low,
            hue_high,
            min_saturation,
            max_intensity,
            min_fraction,
            out,
        } => {
            let t = &mut config.positivity;
            set(&mut t.hue_low, hue_low);
            set(&mut t.hue_high, hue_high);
            set(&mut t.min_saturation, min_saturation);
            set(&mut t.max_intensity, max_intensity);
            set(&mut t.min_fraction, min_fraction);
            let out = out.unwrap_or_else(|| layout.detections());
            let detections = cmd_detect_positive(&ihc, &masks, &out, &config)?;
            println!("{} positive cell(s); submission in {}", detections.len(), out.display());
        }
        Command::Report {
            run_ids,
            layout: table,
            out,
        } => {
            let table = match table {
                LayoutArg::Overall => ReportLayout::Overall,
                LayoutArg::PerCategory => ReportLayout::PerCategory,
            };
            let text = cmd_report(&run_ids, &cli.run_dir, table)?;
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(&path, &text).map_err(|e| Error::Io { path, source: e })?;
            }
        }
        Command::ShowConfig => {
            config.validate()?;
            print!("{}", config.to_toml());
        }
        Command::StubBackend { input, output, omit } => stub_backend(&input, &output, &omit)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Backend { diagnostics, .. } = &e {
                if !diagnostics.is_empty() {
                    eprintln!("backend output:\n{diagnostics}");
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
