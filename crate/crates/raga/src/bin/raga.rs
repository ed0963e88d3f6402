//! Command-line entry point chaining the pipeline: synthesize or ingest
//! audio, extract features, render spectrogram images, train, evaluate,
//! and compare models.

use clap::{Args, Parser, Subcommand};
use raga::audio::save_wav;
use raga::dataset::{
    build_feature_table, build_image_tree, raga_scales, synth_raga_corpus,
};
use raga::eval::compare_pair_files;
use raga::experiment::{
    eval_saved_model, load_corpus, run_experiment, DataSource, ExperimentManifest,
    SEGMENT_SECONDS,
};
use raga::models::ModelName;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "raga", about = "Raga recognition experiment toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Directory of WAVs laid out as <dir>/<raga>/*.wav; omit to synthesize.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Clips per raga when synthesizing.
    #[arg(long, default_value_t = 60)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep all segments of one recording in the same split.
    #[arg(long)]
    group_by_recording: bool,
}

impl DataArgs {
    fn source(&self) -> DataSource {
        match &self.input {
            Some(dir) => DataSource::WavDir { dir: dir.clone() },
            None => DataSource::Synthetic { per_class: self.per_class },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic WAV corpus, one directory per raga.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Extract the 30-column feature table and the split manifest.
    Extract {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory for features.csv and splits.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the mel-spectrogram image tree: <out>/<split>/<raga>/<id>.png.
    Render {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model (or a manifest's model list) end to end.
    Train {
        /// Manifest JSON; overrides the other flags when given.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        model: Option<ModelNameArg>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Evaluate saved weights on a feature table's test split.
    Eval {
        #[arg(long)]
        model: ModelNameArg,
        #[arg(long)]
        weights: PathBuf,
        /// Directory holding features.csv, splits.json, and scaler.json.
        #[arg(long)]
        data_dir: PathBuf,
        /// Output confusion-matrix CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate 2x2 pair-matrix CSVs (named <model>_*.csv) into a report.
    Compare {
        /// Output report JSON path.
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        matrices: Vec<PathBuf>,
    },
}

#[derive(Clone)]
struct ModelNameArg(ModelName);

impl std::str::FromStr for ModelNameArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse::<ModelName>().map(ModelNameArg).map_err(|e| e.to_string())
    }
}

fn run(cli: Cli) -> raga::Result<()> {
    match cli.command {
        Command::Synth { out, per_class, seed } => {
            let scales = raga_scales();
            let corpus = synth_raga_corpus(&scales, per_class, SEGMENT_SECONDS, seed)?;
            for (clip, label) in &corpus {
                let dir = out.join(&scales[*label].name);
                std::fs::create_dir_all(&dir)?;
                save_wav(clip, &dir.join(format!("{}.wav", clip.source_id)))?;
            }
            println!("wrote {} clips under {}", corpus.len(), out.display());
        }
        Command::Extract { data, out } => {
            let manifest = ExperimentManifest {
                source: data.source(),
                seed: data.seed,
                models: vec![ModelName::Ann],
                overrides: BTreeMap::new(),
                out_dir: out.clone(),
                group_by_recording: data.group_by_recording,
            };
            let (segments, names) = load_corpus(&manifest)?;
            std::fs::create_dir_all(&out)?;
            let csv_path = out.join("features.csv");
            let (rows, split) =
                build_feature_table(&segments, &names, data.seed, data.group_by_recording, &csv_path)?;
            split.save_json(&out.join("splits.json"))?;
            println!("wrote {} rows to {}", rows.len(), csv_path.display());
        }
        Command::Render { data, out } => {
            let manifest = ExperimentManifest {
                source: data.source(),
                seed: data.seed,
                models: vec![ModelName::Cnn2d],
                overrides: BTreeMap::new(),
                out_dir: out.clone(),
                group_by_recording: data.group_by_recording,
            };
            let (segments, names) = load_corpus(&manifest)?;
            let split = build_image_tree(&segments, &names, data.seed, data.group_by_recording, &out)?;
            split.save_json(&out.join("splits.json"))?;
            println!("rendered {} images under {}", segments.len(), out.display());
        }
        Command::Train { manifest, model, data, out, epochs, batch_size } => {
            let manifest = match manifest {
                Some(path) => ExperimentManifest::load_json(&path)?,
                None => {
                    let model = model
                        .ok_or_else(|| raga::Error::Usage("--model or --manifest required".into()))?;
                    let mut overrides = BTreeMap::new();
                    let o = raga::experiment::TrainOverrides {
                        epochs,
                        batch_size,
                        ..Default::default()
                    };
                    overrides.insert(model.0.as_str().to_string(), o);
                    ExperimentManifest {
                        source: data.source(),
                        seed: data.seed,
                        models: vec![model.0],
                        overrides,
                        out_dir: out,
                        group_by_recording: data.group_by_recording,
                    }
                }
            };
            let outcome = run_experiment(&manifest)?;
            for run in &outcome.runs {
                println!(
                    "{}: test accuracy {:.2}% (stopped at epoch {}, best epoch {})",
                    run.model.as_str(),
                    run.test_accuracy * 100.0,
                    run.report.stopped_epoch,
                    run.report.best_epoch
                );
            }
            print!("{}", outcome.report.render_text());
        }
        Command::Eval { model, weights, data_dir, out } => {
            let cm = eval_saved_model(
                model.0,
                &weights,
                &data_dir.join("features.csv"),
                &data_dir.join("splits.json"),
                &data_dir.join("scaler.json"),
                &out,
            )?;
            println!(
                "{}: accuracy {:.2}% over {} test rows",
                model.0.as_str(),
                cm.accuracy()? * 100.0,
                cm.total()
            );
        }
        Command::Compare { out, matrices } => {
            let report = compare_pair_files(&matrices)?;
            report.save_json(&out)?;
            print!("{}", report.render_text());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error[{}]: {e}", e.class());
        std::process::exit(e.exit_code());
    }
}
