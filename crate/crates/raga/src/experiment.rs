//! Experiment orchestration: one manifest drives synthesis/ingestion,
//! extraction of both representations, training, evaluation, and the final
//! cross-model comparison report.

use crate::audio::{load_audio, resample, segment, AudioClip, ANALYSIS_RATE};
use crate::dataset::{
    build_feature_table, build_image_tree, label_names, raga_scales, synth_raga_corpus, Split,
    SplitDataset,
};
use crate::dsp::features::{FeatureVector, FEATURE_DIM};
use crate::eval::{compare_report, confusion, CompareReport, ConfusionMatrix};
use crate::models::{build, instantiate, ModelName};
use crate::nn::{
    evaluate, load_weights, save_weights, train, ClassDataset, Network, TrainConfig, TrainReport,
};
use crate::render::ImageTensor;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SEGMENT_SECONDS: f64 = 5.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum DataSource {
    /// Synthesize `per_class` clips per raga from the built-in scale table.
    Synthetic { per_class: usize },
    /// Ingest WAVs from `<dir>/<raga>/*.wav`, resampled and segmented.
    WavDir { dir: PathBuf },
}

/// Per-model overrides of the built-in training defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub source: DataSource,
    pub seed: u64,
    pub models: Vec<ModelName>,
    #[serde(default)]
    pub overrides: BTreeMap<String, TrainOverrides>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub group_by_recording: bool,
}

impl ExperimentManifest {
    pub fn load_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let m: Self = serde_json::from_reader(f)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Usage("manifest lists no models".into()));
        }
        for key in self.overrides.keys() {
            key.parse::<ModelName>()?;
        }
        Ok(())
    }

    /// Effective training configuration: model defaults, manifest seed, then
    /// any per-model overrides.
    pub fn train_config_for(&self, model: ModelName) -> TrainConfig {
        let mut cfg = build(model).train_defaults;
        cfg.seed = self.seed;
        if let Some(o) = self.overrides.get(model.as_str()) {
            if let Some(e) = o.epochs {
                cfg.epochs = e;
            }
            if let Some(b) = o.batch_size {
                cfg.batch_size = b;
            }
            if let Some(lr) = o.learning_rate {
                cfg.learning_rate = lr;
            }
            if let Some(p) = o.patience {
                cfg.patience = p;
            }
        }
        cfg
    }
}

/// Load or synthesize the labeled 5-second segments named by the manifest.
/// Returns the segments and the class label names.
pub fn load_corpus(manifest: &ExperimentManifest) -> Result<(Vec<(AudioClip, usize)>, Vec<String>)> {
    match &manifest.source {
        DataSource::Synthetic { per_class } => {
            let scales = raga_scales();
            let names = label_names(&scales);
            let corpus = synth_raga_corpus(&scales, *per_class, SEGMENT_SECONDS, manifest.seed)?;
            Ok((corpus, names))
        }
        DataSource::WavDir { dir } => {
            if !dir.is_dir() {
                return Err(Error::FileNotFound(dir.clone()));
            }
            let mut class_dirs: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            class_dirs.sort();
            if class_dirs.is_empty() {
                return Err(Error::EmptyInput(format!("no class directories in {}", dir.display())));
            }
            let names: Vec<String> = class_dirs
                .iter()
                .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
                .collect();
            let mut segments = Vec::new();
            for (label, cd) in class_dirs.iter().enumerate() {
                let mut wavs: Vec<PathBuf> = std::fs::read_dir(cd)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().map(|e| e == "wav").unwrap_or(false))
                    .collect();
                wavs.sort();
                for w in wavs {
                    let clip = load_audio(&w)?;
                    let clip = resample(&clip, ANALYSIS_RATE);
                    for seg in segment(&clip, SEGMENT_SECONDS)? {
                        segments.push((seg, label));
                    }
                }
            }
            if segments.is_empty() {
                return Err(Error::EmptyInput(format!("no wav files under {}", dir.display())));
            }
            Ok((segments, names))
        }
    }
}

/// Per-column affine rescaling fitted on the training split, applied to all
/// splits. Feature columns span several orders of magnitude; the models
/// expect roughly unit-scale inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[FeatureVector], indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySplit("train".into()));
        }
        let n = indices.len() as f64;
        let mut mean = vec![0.0; FEATURE_DIM];
        let mut std = vec![0.0; FEATURE_DIM];
        for &i in indices {
            for (j, m) in mean.iter_mut().enumerate() {
                *m += rows[i].values[j];
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        for &i in indices {
            for (j, s) in std.iter_mut().enumerate() {
                *s += (rows[i].values[j] - mean[j]).powi(2);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f32> {
        values
            .iter()
            .enumerate()
            .map(|(j, &v)| ((v - self.mean[j]) / self.std[j]) as f32)
            .collect()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(f)?)
    }
}

/// Assemble the (1, 30) feature datasets for one split.
fn feature_split(
    rows: &[FeatureVector],
    indices: &[usize],
    scaler: &Standardizer,
) -> ClassDataset<f32> {
    let mut data = Vec::with_capacity(indices.len() * FEATURE_DIM);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        data.extend(scaler.apply(&rows[i].values));
        labels.push(rows[i].label.expect("labeled rows"));
    }
    ClassDataset { sample_shape: vec![1, FEATURE_DIM], data, labels }
}

pub fn feature_datasets(
    rows: &[FeatureVector],
    split: &SplitDataset,
) -> Result<(ClassDataset<f32>, ClassDataset<f32>, ClassDataset<f32>, Standardizer)> {
    let scaler = Standardizer::fit(rows, &split.train)?;
    Ok((
        feature_split(rows, &split.train, &scaler),
        feature_split(rows, &split.val, &scaler),
        feature_split(rows, &split.test, &scaler),
        scaler,
    ))
}

/// Load one split of a rendered image tree into a (256, 256, 3) dataset.
/// Files are read in sorted order within each class for determinism.
pub fn image_split(tree: &Path, split: Split, label_names: &[String]) -> Result<ClassDataset<f32>> {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (label, name) in label_names.iter().enumerate() {
        let dir = tree.join(split.as_str()).join(name);
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|e| e == "png").unwrap_or(false))
            .collect();
        files.sort();
        for f in files {
            let img = ImageTensor::load_png(&f)?;
            data.extend(img.normalized());
            labels.push(label);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptySplit(split.as_str().to_string()));
    }
    Ok(ClassDataset { sample_shape: vec![256, 256, 3], data, labels })
}

/// Batched argmax predictions over a dataset in inference mode.
pub fn predict_labels(
    net: &mut Network<f32>,
    set: &ClassDataset<f32>,
    batch_size: usize,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(set.len());
    let indices: Vec<usize> = (0..set.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let x = set.batch(chunk);
        let probs = net.predict(&x, rng)?;
        let classes = probs.shape[1];
        for row in probs.data.chunks(classes) {
            let best = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            out.push(best);
        }
    }
    Ok(out)
}

/// Artifacts of a single trained model run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: ModelName,
    pub test_accuracy: f64,
    pub weights_path: PathBuf,
    pub confusion_path: PathBuf,
    pub report: TrainReport,
}

/// Train one model on the prepared datasets, persist its artifacts under
/// `out_dir`, and return its test confusion matrix.
pub fn train_and_evaluate(
    model: ModelName,
    cfg: &TrainConfig,
    train_set: &ClassDataset<f32>,
    val_set: &ClassDataset<f32>,
    test_set: &ClassDataset<f32>,
    label_names: &[String],
    out_dir: &Path,
) -> Result<(RunSummary, ConfusionMatrix)> {
    std::fs::create_dir_all(out_dir)?;
    let spec = build(model);
    let mut net = instantiate::<f32>(&spec, cfg.seed)?;
    let report = train(&mut net, train_set, val_set, cfg)?;

    let weights_path = out_dir.join(format!("{}.weights", model.as_str()));
    save_weights(&net, &weights_path)?;
    let report_path = out_dir.join(format!("{}_train.json", model.as_str()));
    let f = std::fs::File::create(&report_path)?;
    serde_json::to_writer_pretty(f, &report)?;

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let predicted = predict_labels(&mut net, test_set, cfg.batch_size, &mut rng)?;
    let cm = confusion(&predicted, &test_set.labels, label_names)?;
    let confusion_path = out_dir.join(format!("{}_confusion.csv", model.as_str()));
    cm.save_csv(&confusion_path)?;
    let test_accuracy = cm.accuracy()?;
    Ok((
        RunSummary { model, test_accuracy, weights_path, confusion_path, report },
        cm,
    ))
}

/// Index pairs of the ragas that share a swara set; the comparison report
/// tracks how well each model separates them.
pub fn confusable_pairs(label_names: &[String]) -> Vec<(usize, usize)> {
    let groups: [&[&str]; 3] = [
        &["ataana", "begada", "bilahari"],
        &["bhairavi", "huseni"],
        &["harikambhoji", "kamas"],
    ];
    let mut pairs = Vec::new();
    for group in groups {
        let idx: Vec<usize> = group
            .iter()
            .filter_map(|n| label_names.iter().position(|l| l == n))
            .collect();
        for i in 0..idx.len() {
            for j in i + 1..idx.len() {
                pairs.push((idx[i], idx[j]));
            }
        }
    }
    pairs
}

pub struct ExperimentOutcome {
    pub runs: Vec<RunSummary>,
    pub report: CompareReport,
    pub label_names: Vec<String>,
}

/// Run the full pipeline described by a manifest: data, both feature paths,
/// all requested models, and the comparison report.
pub fn run_experiment(manifest: &ExperimentManifest) -> Result<ExperimentOutcome> {
    manifest.validate()?;
    let out = &manifest.out_dir;
    std::fs::create_dir_all(out)?;
    let (segments, names) = load_corpus(manifest)?;

    let need_features = manifest.models.iter().any(|m| m.uses_features());
    let need_images = manifest.models.iter().any(|m| !m.uses_features());

    let mut feature_sets = None;
    if need_features {
        let csv_path = out.join("features.csv");
        let (rows, split) =
            build_feature_table(&segments, &names, manifest.seed, manifest.group_by_recording, &csv_path)?;
        split.save_json(&out.join("splits.json"))?;
        let (tr, va, te, scaler) = feature_datasets(&rows, &split)?;
        scaler.save_json(&out.join("scaler.json"))?;
        feature_sets = Some((tr, va, te));
    }

    let mut image_sets = None;
    if need_images {
        let tree = out.join("images");
        let split =
            build_image_tree(&segments, &names, manifest.seed, manifest.group_by_recording, &tree)?;
        split.save_json(&out.join("splits.json"))?;
        image_sets = Some((
            image_split(&tree, Split::Train, &names)?,
            image_split(&tree, Split::Val, &names)?,
            image_split(&tree, Split::Test, &names)?,
        ));
    }

    let mut runs = Vec::new();
    let mut matrices = Vec::new();
    for &model in &manifest.models {
        let cfg = manifest.train_config_for(model);
        let sets = if model.uses_features() {
            feature_sets.as_ref().unwrap()
        } else {
            image_sets.as_ref().unwrap()
        };
        let (summary, cm) =
            train_and_evaluate(model, &cfg, &sets.0, &sets.1, &sets.2, &names, out)?;
        runs.push(summary);
        matrices.push((model.as_str().to_string(), cm));
    }

    let pairs = confusable_pairs(&names);
    let report = compare_report(&matrices, &pairs)?;
    report.save_json(&out.join("report.json"))?;
    Ok(ExperimentOutcome { runs, report, label_names: names })
}

/// Evaluate previously saved weights on the test split of a feature table.
pub fn eval_saved_model(
    model: ModelName,
    weights_path: &Path,
    csv_path: &Path,
    splits_path: &Path,
    scaler_path: &Path,
    out_csv: &Path,
) -> Result<ConfusionMatrix> {
    let split = SplitDataset::load_json(splits_path)?;
    let rows = crate::dataset::load_feature_table(csv_path, &split.label_names)?;
    let scaler = Standardizer::load_json(scaler_path)?;
    let test = feature_split(&rows, &split.test, &scaler);
    let spec = build(model);
    let mut net = instantiate::<f32>(&spec, 0)?;
    load_weights(&mut net, weights_path)?;
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let predicted = predict_labels(&mut net, &test, 32, &mut rng)?;
    let cm = confusion(&predicted, &test.labels, &split.label_names)?;
    cm.save_csv(out_csv)?;
    Ok(cm)
}

/// Convenience wrapper used by tests: loss/accuracy of a set.
pub fn eval_set(net: &mut Network<f32>, set: &ClassDataset<f32>, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    evaluate(net, set, 32, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(dir: &Path) -> ExperimentManifest {
        ExperimentManifest {
            source: DataSource::Synthetic { per_class: 2 },
            seed: 9,
            models: vec![ModelName::Ann],
            overrides: BTreeMap::new(),
            out_dir: dir.to_path_buf(),
            group_by_recording: false,
        }
    }

    #[test]
    fn manifest_round_trip_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(dir.path());
        m.overrides.insert(
            "ann".into(),
            TrainOverrides { epochs: Some(3), learning_rate: Some(0.01), ..Default::default() },
        );
        let p = dir.path().join("manifest.json");
        m.save_json(&p).unwrap();
        let back = ExperimentManifest::load_json(&p).unwrap();
        let cfg = back.train_config_for(ModelName::Ann);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.learning_rate, 0.01);
        assert_eq!(cfg.seed, 9);
        // untouched defaults survive
        assert_eq!(cfg.batch_size, 32);
        let lstm = back.train_config_for(ModelName::Lstm);
        assert_eq!(lstm.learning_rate, 0.0009);
        assert_eq!(lstm.patience, 5);
    }

    #[test]
    fn manifest_rejects_bad_override_key() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(dir.path());
        m.overrides.insert("resnet".into(), TrainOverrides::default());
        assert!(matches!(m.validate(), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn standardizer_zero_mean_unit_variance_on_fit_split() {
        let mut rows = Vec::new();
        for i in 0..20 {
            let mut values = [0.0; FEATURE_DIM];
            for (j, v) in values.iter_mut().enumerate() {
                *v = (i * 7 + j * 13) as f64 * 0.37 + j as f64 * 100.0;
            }
            rows.push(FeatureVector { values, label: Some(0), source_id: format!("r{i}") });
        }
        let indices: Vec<usize> = (0..20).collect();
        let s = Standardizer::fit(&rows, &indices).unwrap();
        for j in 0..FEATURE_DIM {
            let col: Vec<f64> = indices
                .iter()
                .map(|&i| (rows[i].values[j] - s.mean[j]) / s.std[j])
                .collect();
            let m: f64 = col.iter().sum::<f64>() / 20.0;
            let v: f64 = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 20.0;
            assert!(m.abs() < 1e-9);
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn confusable_pairs_cover_the_three_groups() {
        let names = crate::dataset::label_names(&crate::dataset::raga_scales());
        let pairs = confusable_pairs(&names);
        assert_eq!(pairs.len(), 3 + 1 + 1);
        assert!(pairs.contains(&(6, 9)), "harikambhoji vs kamas");
        assert!(pairs.contains(&(3, 7)), "bhairavi vs huseni");
        assert!(pairs.contains(&(0, 1)) && pairs.contains(&(0, 4)) && pairs.contains(&(1, 4)));
    }
}
