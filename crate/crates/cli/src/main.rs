use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use haarseg::dataset::{save_labels, synth_texture_dataset, DatasetManifest};
use haarseg::metrics::render_report;
use haarseg::model::{load_model, save_model};
use haarseg::pipeline::{self, parse_list, RunConfig, Segmenter, Split};

#[derive(Parser)]
#[command(name = "haarseg", version, about = "Haar scattering features + random Fourier features + linear SVM segmentation")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a manifest of image/label pairs.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search gamma and lambda by validation pixel accuracy.
    Tune {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated gamma grid.
        #[arg(long)]
        gammas: String,
        /// Comma-separated lambda grid.
        #[arg(long)]
        lambdas: String,
        /// k-fold cross-validation over images.
        #[arg(long, conflicts_with = "holdout")]
        folds: Option<usize>,
        /// Fraction of images held out for validation.
        #[arg(long)]
        holdout: Option<f64>,
        #[arg(long, default_value_t = 3.0)]
        boundary_radius: f64,
    },
    /// Segment one image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Output label PNG.
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-class 16-bit score images.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Evaluate a model on a manifest and print a report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Pixels within this distance of a true class boundary are ignored.
        #[arg(long, default_value_t = 3.0)]
        boundary_radius: f64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print op counts and stage timings for a synthetic image.
    Bench {
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 240)]
        height: usize,
        #[arg(long, default_value_t = 3)]
        channels: usize,
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a synthetic oriented-texture dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 25)]
        images: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 96)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Run options. A `--config` file of `key = value` lines is applied first;
/// explicit flags override it.
#[derive(Args, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated image scales, e.g. 1,2,4.
    #[arg(long)]
    scales: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mtilde: Option<usize>,
    #[arg(long)]
    sample_frac: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// yuv or raw.
    #[arg(long)]
    color: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        }
        let flags: [(&str, Option<String>); 8] = [
            ("scales", self.scales.clone()),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("mtilde", self.mtilde.map(|v| v.to_string())),
            ("sample-frac", self.sample_frac.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("color", self.color.clone()),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                cfg.set(key, &value)?;
            }
        }
        Ok(cfg)
    }
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    Ok(DatasetManifest::load(path)?)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { manifest, run, out } => {
            let cfg = run.resolve()?;
            let manifest = load_manifest(&manifest)?;
            let outcome = pipeline::train(&manifest, &cfg)?;
            save_model(&outcome.bundle, &out)?;
            println!("images = {}", manifest.len());
            println!("classes = {}", outcome.bundle.class_count());
            println!("feature_dim = {}", outcome.feature_dim);
            println!("m_tilde = {}", outcome.bundle.rff.m_tilde);
            println!("samples = {}", outcome.samples);
            println!("t0 = {}", outcome.t0);
            println!("objective = {:.6}", outcome.objective);
            println!("model = {}", out.display());
        }
        Command::Tune {
            manifest,
            run,
            gammas,
            lambdas,
            folds,
            holdout,
            boundary_radius,
        } => {
            let split = match (folds, holdout) {
                (Some(k), None) => Split::Folds(k),
                (None, Some(f)) => Split::Holdout(f),
                (None, None) => Split::Folds(5),
                (Some(_), Some(_)) => bail!("--folds and --holdout are exclusive"),
            };
            let cfg = run.resolve()?;
            let manifest = load_manifest(&manifest)?;
            let gammas: Vec<f64> = parse_list("gammas", &gammas)?;
            let lambdas: Vec<f64> = parse_list("lambdas", &lambdas)?;
            let outcome = pipeline::tune(&manifest, &cfg, &gammas, &lambdas, split, boundary_radius)?;
            println!("# gamma\tlambda\tpixel_accuracy");
            for row in &outcome.table {
                println!("{}\t{}\t{:.6}", row.gamma, row.lambda, row.pixel_accuracy);
            }
            println!("best_gamma = {}", outcome.best.gamma);
            println!("best_lambda = {}", outcome.best.lambda);
            println!("best_pixel_accuracy = {:.6}", outcome.best.pixel_accuracy);
        }
        Command::Predict { model, image, out, scores } => {
            let segmenter = Segmenter::new(load_model(&model)?)?;
            let seg = segmenter.segment_file(&image)?;
            save_labels(&seg.labels, &out)?;
            if let Some(dir) = scores {
                pipeline::write_score_planes(&dir, &seg.scores, &segmenter.bundle().class_names)?;
            }
            println!("labels = {}", out.display());
        }
        Command::Eval {
            model,
            manifest,
            boundary_radius,
            out,
        } => {
            let segmenter = Segmenter::new(load_model(&model)?)?;
            let manifest = load_manifest(&manifest)?;
            let cm = pipeline::evaluate(&segmenter, &manifest, boundary_radius)?;
            let report = render_report(&cm, &segmenter.bundle().class_names, boundary_radius);
            print!("{report}");
            if let Some(path) = out {
                fs::write(&path, &report).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Bench {
            width,
            height,
            channels,
            classes,
            run,
        } => {
            let cfg = run.resolve()?;
            let r = pipeline::bench(width, height, channels, &cfg, classes)?;
            println!("image = {width}x{height}x{channels}");
            println!("feature_dim = {}", r.feature_dim);
            println!("model_ops = {:.3} MOp", r.closed_form.total_ops / 1e6);
            println!("configured_ops = {:.3} MOp", r.configured.total_ops / 1e6);
            println!("extraction_ms = {:.1}", r.extraction.as_secs_f64() * 1e3);
            println!("random_features_ms = {:.1}", r.random_features.as_secs_f64() * 1e3);
            println!("classification_ms = {:.1}", r.classification.as_secs_f64() * 1e3);
        }
        Command::Synth {
            out,
            images,
            classes,
            size,
            seed,
        } => {
            let manifest = synth_texture_dataset(images, classes, size, seed, &out)?;
            println!("images = {}", manifest.len());
            println!("manifest = {}", out.join("manifest.txt").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .context("building worker pool")
            .and_then(|pool| pool.install(|| run(cli.command))),
        None => run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Core errors already embed their sources in the message.
            let mut message = e.to_string();
            for cause in e.chain().skip(1) {
                let cause = cause.to_string();
                if !message.contains(&cause) {
                    message = format!("{message}: {cause}");
                }
            }
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
