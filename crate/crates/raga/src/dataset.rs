//! Labeled dataset assembly for both preprocessing paths, plus a synthetic
//! raga corpus generator so the full experiment runs from scratch.

use crate::audio::{AudioClip, ANALYSIS_RATE};
use crate::dsp::features::{extract_feature_vector, FeatureVector, FEATURE_DIM, FEATURE_NAMES};
use crate::render::{power_to_db, render, TOP_DB};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const TONIC_HZ: f64 = 261.63;
/// Probability that the phrase dwells on the current note for another beat.
const REPEAT_P: f64 = 0.15;
/// Vibrato depth in cents and rate in Hz for the gamaka-like option.
const VIBRATO_CENTS: f64 = 30.0;
const VIBRATO_HZ: f64 = 5.5;

/// One raga: its pitch-class set and ordered ascent/descent hints, all as
/// semitone offsets from the tonic (12 marks the upper tonic).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagaScale {
    pub name: String,
    pub pitch_classes: Vec<u8>,
    pub ascent: Vec<u8>,
    pub descent: Vec<u8>,
}

/// The ten ragas of the experiment, in label order. Pitch-class sets come
/// from the swara table; ascent/descent orders are the conventional scales,
/// chosen so that ragas sharing a swara set still differ in note order.
pub fn raga_scales() -> Vec<RagaScale> {
    let mk = |name: &str, pcs: &[u8], up: &[u8], down: &[u8]| RagaScale {
        name: name.to_string(),
        pitch_classes: pcs.to_vec(),
        ascent: up.to_vec(),
        descent: down.to_vec(),
    };
    vec![
        mk(
            "ataana",
            &[0, 2, 4, 5, 7, 9, 11],
            &[0, 2, 5, 7, 11, 12],
            &[12, 11, 9, 7, 5, 4, 2, 0],
        ),
        mk(
            "begada",
            &[0, 2, 4, 5, 7, 9, 11],
            &[0, 4, 2, 4, 5, 7, 9, 7, 12],
            &[12, 11, 9, 7, 5, 4, 2, 0],
        ),
        mk(
            "behag",
            &[0, 2, 4, 5, 6, 7, 9, 11],
            &[0, 4, 5, 7, 11, 12],
            &[12, 11, 9, 7, 6, 4, 5, 4, 2, 0],
        ),
        mk(
            "bhairavi",
            &[0, 2, 3, 5, 7, 8, 9, 10],
            &[0, 2, 3, 5, 7, 9, 10, 12],
            &[12, 10, 8, 7, 5, 3, 2, 0],
        ),
        mk(
            "bilahari",
            &[0, 2, 4, 5, 7, 9, 11],
            &[0, 2, 4, 7, 9, 12],
            &[12, 11, 9, 7, 5, 4, 2, 0],
        ),
        mk(
            "dhanyasi",
            &[0, 1, 3, 5, 7, 8, 10],
            &[0, 3, 5, 7, 10, 12],
            &[12, 10, 8, 7, 5, 3, 1, 0],
        ),
        mk(
            "harikambhoji",
            &[0, 2, 4, 5, 7, 9, 10],
            &[0, 2, 4, 5, 7, 9, 10, 12],
            &[12, 10, 9, 7, 5, 4, 2, 0],
        ),
        mk(
            "huseni",
            &[0, 2, 3, 5, 7, 8, 9, 10],
            &[0, 2, 3, 5, 7, 10, 9, 10, 12],
            &[12, 10, 8, 7, 5, 3, 2, 0],
        ),
        mk(
            "kalyani",
            &[0, 2, 4, 6, 7, 9, 11],
            &[0, 2, 4, 6, 7, 9, 11, 12],
            &[12, 11, 9, 7, 6, 4, 2, 0],
        ),
        mk(
            "kamas",
            &[0, 2, 4, 5, 7, 9, 10],
            &[0, 5, 4, 5, 7, 9, 10, 12],
            &[12, 10, 9, 7, 5, 4, 2, 0],
        ),
    ]
}

pub fn label_names(scales: &[RagaScale]) -> Vec<String> {
    scales.iter().map(|s| s.name.clone()).collect()
}

/// Cyclic sweep through the raga's ascent followed by its descent. Every
/// clip of a class repeats the same characteristic phrase, so clip-level
/// feature statistics cluster per raga while timing, loudness, ornament
/// repeats, and vibrato vary between clips.
struct Phrase<'a> {
    scale: &'a RagaScale,
    idx: usize,
}

impl<'a> Phrase<'a> {
    fn new(scale: &'a RagaScale) -> Self {
        Self { scale, idx: 0 }
    }

    fn next_note(&mut self, rng: &mut ChaCha20Rng) -> u8 {
        let up = self.scale.ascent.len();
        let total = up + self.scale.descent.len();
        let note = if self.idx < up {
            self.scale.ascent[self.idx]
        } else {
            self.scale.descent[self.idx - up]
        };
        // occasionally dwell on a note instead of advancing
        if rng.gen::<f64>() >= REPEAT_P {
            self.idx = (self.idx + 1) % total;
        }
        note
    }
}

/// Render one note as fundamental plus two harmonics at -6 dB and -12 dB,
/// with linear attack/release ramps and optional vibrato.
fn render_note(
    out: &mut Vec<f64>,
    semitones: u8,
    dur_secs: f64,
    amp: f64,
    vibrato: bool,
    sample_rate: u32,
) {
    let sr = sample_rate as f64;
    let f0 = TONIC_HZ * (semitones as f64 / 12.0).exp2();
    let n = (dur_secs * sr).round() as usize;
    let attack = ((0.015 * sr) as usize).min(n / 2);
    let release = ((0.040 * sr) as usize).min(n / 2);
    let mut phase = [0.0f64; 3];
    for i in 0..n {
        let t = i as f64 / sr;
        let f = if vibrato {
            f0 * (VIBRATO_CENTS / 1200.0 * (2.0 * std::f64::consts::PI * VIBRATO_HZ * t).sin())
                .exp2()
        } else {
            f0
        };
        let mut s = 0.0;
        for (h, p) in phase.iter_mut().enumerate() {
            *p += 2.0 * std::f64::consts::PI * f * (h as f64 + 1.0) / sr;
            s += 0.5f64.powi(h as i32) * p.sin();
        }
        let mut env = 1.0;
        if i < attack {
            env = i as f64 / attack as f64;
        }
        if n - i <= release {
            env = env.min((n - i) as f64 / release as f64);
        }
        out.push(amp * env * s * 0.25);
    }
}

/// Synthesize one clip of a raga: repeated ascent/descent sweeps rendered
/// to audio with randomized tempo, loudness, dwells, and vibrato.
pub fn synth_clip(scale: &RagaScale, seconds: f64, rng: &mut ChaCha20Rng, source_id: String) -> AudioClip {
    let target = (seconds * ANALYSIS_RATE as f64).round() as usize;
    let mut samples = Vec::with_capacity(target + ANALYSIS_RATE as usize / 2);
    let mut phrase = Phrase::new(scale);
    // pace the phrase so every clip covers the same 1.5 sweep cycles and
    // the full note histogram, whatever the raga's phrase length
    let cycle = (scale.ascent.len() + scale.descent.len()) as f64;
    let tempo = seconds / (1.5 * cycle * (1.0 + REPEAT_P));
    while samples.len() < target {
        let note = phrase.next_note(rng);
        let dur = tempo * rng.gen_range(0.95..1.05);
        let amp = rng.gen_range(0.8..1.0);
        render_note(&mut samples, note, dur, amp, true, ANALYSIS_RATE);
    }
    samples.truncate(target);
    AudioClip { samples, sample_rate: ANALYSIS_RATE, source_id }
}

/// Class-balanced synthetic corpus: `per_class` clips per raga, labels in
/// scale order, deterministic for a given seed.
pub fn synth_raga_corpus(
    scales: &[RagaScale],
    per_class: usize,
    seconds: f64,
    seed: u64,
) -> Result<Vec<(AudioClip, usize)>> {
    if per_class == 0 || scales.is_empty() {
        return Err(Error::EmptyInput("no segments".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(scales.len() * per_class);
    for (label, scale) in scales.iter().enumerate() {
        for k in 0..per_class {
            let id = format!("{}_{k:03}", scale.name);
            out.push((synth_clip(scale, seconds, &mut rng, id), label));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Stratified 8:1:1 partition of row indices, persisted as JSON alongside
/// the extracted artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub split_seed: u64,
    pub group_by_recording: bool,
    pub label_names: Vec<String>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitDataset {
    pub fn indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn split_of(&self, index: usize) -> Option<Split> {
        for s in Split::ALL {
            if self.indices(s).contains(&index) {
                return Some(s);
            }
        }
        None
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

/// Recording identifier: the source id with any `_segNNN` suffix removed,
/// so all segments of one recording can be grouped.
fn recording_id(source_id: &str) -> &str {
    match source_id.rfind("_seg") {
        Some(i) => &source_id[..i],
        None => source_id,
    }
}

/// Stratified 8:1:1 split by seeded shuffle within each class. With
/// `group_by_recording`, whole recordings move between splits together.
pub fn stratified_split(
    labels: &[usize],
    source_ids: &[String],
    label_names: &[String],
    seed: u64,
    group_by_recording: bool,
) -> Result<SplitDataset> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("no segments".into()));
    }
    if labels.len() != source_ids.len() {
        return Err(Error::LengthMismatch { left: labels.len(), right: source_ids.len() });
    }
    let n_classes = label_names.len();
    for &l in labels {
        if l >= n_classes {
            return Err(Error::LabelOutOfRange { label: l, classes: n_classes });
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut ds = SplitDataset {
        split_seed: seed,
        group_by_recording,
        label_names: label_names.to_vec(),
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for class in 0..n_classes {
        // units are single rows, or whole recordings when grouping
        let mut units: Vec<Vec<usize>> = Vec::new();
        if group_by_recording {
            let mut order: Vec<&str> = Vec::new();
            for (i, &l) in labels.iter().enumerate() {
                if l != class {
                    continue;
                }
                let rec = recording_id(&source_ids[i]);
                match order.iter().position(|&r| r == rec) {
                    Some(j) => units[j].push(i),
                    None => {
                        order.push(rec);
                        units.push(vec![i]);
                    }
                }
            }
        } else {
            units = labels
                .iter()
                .enumerate()
                .filter(|&(_, &l)| l == class)
                .map(|(i, _)| vec![i])
                .collect();
        }
        // Fisher-Yates over units
        for i in (1..units.len()).rev() {
            let j = rng.gen_range(0..=i);
            units.swap(i, j);
        }
        let n = units.len();
        let n_val = n / 10;
        let n_test = n / 10;
        for (u, unit) in units.into_iter().enumerate() {
            let bucket = if u < n_test {
                &mut ds.test
            } else if u < n_test + n_val {
                &mut ds.val
            } else {
                &mut ds.train
            };
            bucket.extend(unit);
        }
    }
    ds.train.sort_unstable();
    ds.val.sort_unstable();
    ds.test.sort_unstable();
    for s in Split::ALL {
        if ds.indices(s).is_empty() {
            return Err(Error::EmptySplit(s.as_str().to_string()));
        }
    }
    Ok(ds)
}

/// Extract the 30-feature row for every segment, write the CSV table, and
/// return the vectors plus the stratified split.
pub fn build_feature_table(
    segments: &[(AudioClip, usize)],
    label_names: &[String],
    seed: u64,
    group_by_recording: bool,
    csv_path: &Path,
) -> Result<(Vec<FeatureVector>, SplitDataset)> {
    if segments.is_empty() {
        return Err(Error::EmptyInput("no segments".into()));
    }
    let labels: Vec<usize> = segments.iter().map(|(_, l)| *l).collect();
    let source_ids: Vec<String> = segments.iter().map(|(c, _)| c.source_id.clone()).collect();
    let split = stratified_split(&labels, &source_ids, label_names, seed, group_by_recording)?;

    let mut rows = Vec::with_capacity(segments.len());
    for (clip, label) in segments {
        let mut fv = extract_feature_vector(clip)?;
        fv.label = Some(*label);
        rows.push(fv);
    }

    let mut w = csv::Writer::from_path(csv_path)?;
    let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
    header.push("label");
    w.write_record(&header)?;
    for fv in &rows {
        let mut rec: Vec<String> = fv.values.iter().map(|v| format!("{v:.17e}")).collect();
        rec.push(label_names[fv.label.unwrap()].clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok((rows, split))
}

/// Read a feature CSV written by `build_feature_table`.
pub fn load_feature_table(csv_path: &Path, label_names: &[String]) -> Result<Vec<FeatureVector>> {
    let mut r = csv::Reader::from_path(csv_path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != FEATURE_DIM + 1 {
            return Err(Error::ShapeMismatch(format!(
                "feature csv row {i} has {} fields, expected {}",
                rec.len(),
                FEATURE_DIM + 1
            )));
        }
        let mut values = [0.0f64; FEATURE_DIM];
        for (j, v) in values.iter_mut().enumerate() {
            *v = rec[j]
                .parse()
                .map_err(|_| Error::ShapeMismatch(format!("bad number at ({i}, {j})")))?;
        }
        let name = &rec[FEATURE_DIM];
        let label = label_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::LabelMismatch(format!("unknown label {name:?} in row {i}")))?;
        rows.push(FeatureVector { values, label: Some(label), source_id: format!("row{i:05}") });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("no segments".into()));
    }
    Ok(rows)
}

/// Render every segment's mel spectrogram to `<split>/<raga>/<id>.png` under
/// `out_dir`, using the same stratified split as the feature path.
pub fn build_image_tree(
    segments: &[(AudioClip, usize)],
    label_names: &[String],
    seed: u64,
    group_by_recording: bool,
    out_dir: &Path,
) -> Result<SplitDataset> {
    if segments.is_empty() {
        return Err(Error::EmptyInput("no segments".into()));
    }
    let labels: Vec<usize> = segments.iter().map(|(_, l)| *l).collect();
    let source_ids: Vec<String> = segments.iter().map(|(c, _)| c.source_id.clone()).collect();
    let split = stratified_split(&labels, &source_ids, label_names, seed, group_by_recording)?;
    for (i, (clip, label)) in segments.iter().enumerate() {
        let s = split.split_of(i).expect("split is exhaustive");
        let dir = out_dir.join(s.as_str()).join(&label_names[*label]);
        std::fs::create_dir_all(&dir)?;
        let mel = crate::dsp::mel::mel_spectrogram(clip)?;
        let db = power_to_db(&mel, TOP_DB);
        let img = render(&db)?;
        img.save_png(&dir.join(format!("{}.png", clip.source_id)))?;
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::chroma::{chroma_stft, pitch_class};

    #[test]
    fn ten_scales_with_valid_pitch_sets() {
        let scales = raga_scales();
        assert_eq!(scales.len(), 10);
        for s in &scales {
            assert!(s.pitch_classes.contains(&0), "{}: tonic missing", s.name);
            assert!(!s.pitch_classes.is_empty());
            for &p in &s.pitch_classes {
                assert!(p < 12);
            }
            // ascent/descent stay inside the declared set and cover it
            let mut covered: Vec<u8> = s
                .ascent
                .iter()
                .chain(&s.descent)
                .map(|&p| p % 12)
                .collect();
            covered.sort_unstable();
            covered.dedup();
            assert_eq!(covered, s.pitch_classes, "{}", s.name);
        }
    }

    #[test]
    fn same_swara_groups_share_support_but_not_order() {
        let scales = raga_scales();
        let by_name = |n: &str| scales.iter().find(|s| s.name == n).unwrap();
        let groups: [&[&str]; 3] = [
            &["ataana", "begada", "bilahari"],
            &["harikambhoji", "kamas"],
            &["bhairavi", "huseni"],
        ];
        for group in groups {
            let first = by_name(group[0]);
            for other in &group[1..] {
                let o = by_name(other);
                assert_eq!(o.pitch_classes, first.pitch_classes);
                assert!(
                    o.ascent != first.ascent || o.descent != first.descent,
                    "{} and {} have identical order hints",
                    first.name,
                    o.name
                );
            }
        }
    }

    #[test]
    fn corpus_is_deterministic_and_balanced() {
        let scales = raga_scales();
        let a = synth_raga_corpus(&scales[..2], 3, 1.0, 42).unwrap();
        let b = synth_raga_corpus(&scales[..2], 3, 1.0, 42).unwrap();
        assert_eq!(a.len(), 6);
        for ((ca, la), (cb, lb)) in a.iter().zip(&b) {
            assert_eq!(la, lb);
            assert_eq!(ca.samples, cb.samples, "same seed must be bit-identical");
        }
        let c = synth_raga_corpus(&scales[..2], 3, 1.0, 43).unwrap();
        assert_ne!(a[0].0.samples, c[0].0.samples);
        for label in 0..2 {
            assert_eq!(a.iter().filter(|(_, l)| *l == label).count(), 3);
        }
    }

    #[test]
    fn chroma_mass_stays_inside_the_pitch_class_set() {
        let scales = raga_scales();
        let mut outside_sum = 0.0;
        for scale in &scales {
            let mut rng = ChaCha20Rng::seed_from_u64(7);
            let clip = synth_clip(scale, 2.0, &mut rng, "t".into());
            let ch = chroma_stft(&clip).unwrap();
            let tonic_class = pitch_class(TONIC_HZ);
            let mut inside = 0.0;
            let mut total = 0.0;
            for bin in 0..12 {
                let mass: f64 = ch.row(bin).iter().sum();
                total += mass;
                let rel = (bin + 12 - tonic_class) % 12;
                if scale.pitch_classes.contains(&(rel as u8)) {
                    inside += mass;
                }
            }
            let outside = (total - inside) / total;
            // leakage, vibrato, and per-frame max normalization put some
            // mass outside the set; a wrong scale table lands near 50%
            assert!(
                outside < 0.30,
                "{}: {:.1}% outside the set",
                scale.name,
                outside * 100.0
            );
            outside_sum += outside;
        }
        assert!(
            outside_sum / (scales.len() as f64) < 0.20,
            "mean outside-set mass {:.1}% is too high",
            outside_sum / scales.len() as f64 * 100.0
        );
    }

    fn fake_rows(per_class: usize, n_classes: usize) -> (Vec<usize>, Vec<String>, Vec<String>) {
        let labels: Vec<usize> = (0..n_classes).flat_map(|c| vec![c; per_class]).collect();
        let ids: Vec<String> = labels
            .iter()
            .enumerate()
            .map(|(i, c)| format!("rec{c}{:02}_seg{:03}", i % 7, i))
            .collect();
        let names: Vec<String> = (0..n_classes).map(|c| format!("class{c}")).collect();
        (labels, ids, names)
    }

    #[test]
    fn single_class_hundred_rows_split_80_10_10() {
        let (labels, ids, names) = fake_rows(100, 1);
        let ds = stratified_split(&labels, &ids, &names, 1, false).unwrap();
        assert_eq!(ds.train.len(), 80);
        assert_eq!(ds.val.len(), 10);
        assert_eq!(ds.test.len(), 10);
    }

    #[test]
    fn splits_are_disjoint_exhaustive_and_deterministic() {
        let (labels, ids, names) = fake_rows(60, 3);
        let a = stratified_split(&labels, &ids, &names, 5, false).unwrap();
        let b = stratified_split(&labels, &ids, &names, 5, false).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..180).collect::<Vec<_>>());
        // stratification: every class appears in train, and per-class 48/6/6
        for class in 0..3 {
            let in_split = |idx: &[usize]| idx.iter().filter(|&&i| labels[i] == class).count();
            assert_eq!(in_split(&a.train), 48);
            assert_eq!(in_split(&a.val), 6);
            assert_eq!(in_split(&a.test), 6);
        }
        let c = stratified_split(&labels, &ids, &names, 6, false).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn grouped_split_keeps_recordings_together() {
        // 4 recordings per class, 10 segments each
        let mut labels = Vec::new();
        let mut ids = Vec::new();
        for class in 0..2 {
            for rec in 0..10 {
                for seg in 0..10 {
                    labels.push(class);
                    ids.push(format!("c{class}rec{rec}_seg{seg:03}"));
                }
            }
        }
        let names = vec!["a".to_string(), "b".to_string()];
        let ds = stratified_split(&labels, &ids, &names, 3, true).unwrap();
        for s in Split::ALL {
            for &i in ds.indices(s) {
                let rec = recording_id(&ids[i]);
                // every segment of this recording is in the same split
                for (j, id) in ids.iter().enumerate() {
                    if recording_id(id) == rec {
                        assert_eq!(ds.split_of(j), Some(s));
                    }
                }
            }
        }
        // 10 recordings per class -> 8/1/1 recordings = 80/10/10 segments
        assert_eq!(ds.train.len(), 160);
        assert_eq!(ds.val.len(), 20);
        assert_eq!(ds.test.len(), 20);
    }

    #[test]
    fn feature_table_shape_and_round_trip() {
        let scales = raga_scales();
        let corpus = synth_raga_corpus(&scales, 10, 1.0, 11).unwrap();
        let names = label_names(&scales);
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("features.csv");
        let (rows, split) = build_feature_table(&corpus, &names, 2, false, &csv_path).unwrap();
        assert_eq!(rows.len(), 100);
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 31);
        assert!(header.starts_with("mfcc00,"));
        assert!(header.ends_with(",label"));
        assert_eq!(lines.count(), 100);

        let back = load_feature_table(&csv_path, &names).unwrap();
        assert_eq!(back.len(), 100);
        for (fv, b) in rows.iter().zip(&back) {
            assert_eq!(fv.label, b.label);
            for (x, y) in fv.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
            }
        }
        // feature and image paths share split membership for a given seed
        let labels: Vec<usize> = corpus.iter().map(|(_, l)| *l).collect();
        let ids: Vec<String> = corpus.iter().map(|(c, _)| c.source_id.clone()).collect();
        let again = stratified_split(&labels, &ids, &names, 2, false).unwrap();
        assert_eq!(split, again);
    }

    #[test]
    fn image_tree_layout() {
        let scales = &raga_scales()[..2];
        let corpus = synth_raga_corpus(scales, 10, 1.0, 13).unwrap();
        let names = label_names(scales);
        let dir = tempfile::tempdir().unwrap();
        let split = build_image_tree(&corpus, &names, 4, false, dir.path()).unwrap();
        let mut count = 0;
        for s in Split::ALL {
            for name in &names {
                let d = dir.path().join(s.as_str()).join(name);
                if d.exists() {
                    count += d.read_dir().unwrap().count();
                }
            }
        }
        assert_eq!(count, 20);
        assert_eq!(split.test.len(), 2);
        // spot-check one file exists where the split says it should
        let i = split.train[0];
        let (clip, label) = &corpus[i];
        let p = dir
            .path()
            .join("train")
            .join(&names[*label])
            .join(format!("{}.png", clip.source_id));
        assert!(p.exists());
        let img = crate::render::ImageTensor::load_png(&p).unwrap();
        assert_eq!(img.bytes.len(), 256 * 256 * 3);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(
            synth_raga_corpus(&raga_scales(), 0, 1.0, 0),
            Err(Error::EmptyInput(_))
        ));
        let names = vec!["a".to_string()];
        assert!(matches!(
            stratified_split(&[], &[], &names, 0, false),
            Err(Error::EmptyInput(_))
        ));
        // too few rows to populate all three splits
        let labels = vec![0usize; 5];
        let ids: Vec<String> = (0..5).map(|i| format!("x_seg{i:03}")).collect();
        assert!(matches!(
            stratified_split(&labels, &ids, &names, 0, false),
            Err(Error::EmptySplit(_))
        ));
    }
}
