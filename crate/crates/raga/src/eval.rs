//! Confusion-matrix evaluation: overall accuracy, per-pair submatrices, and
//! misclassification rates for confusable raga pairs.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Square count matrix indexed `[predicted][actual]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    /// Row-major counts, rows = predicted class, columns = true class.
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self { labels, counts: vec![0; n * n] }
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, predicted: usize, actual: usize) -> u64 {
        self.counts[predicted * self.n_classes() + actual]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of samples on the diagonal.
    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyMatrix);
        }
        let trace: u64 = (0..self.n_classes()).map(|i| self.get(i, i)).sum();
        Ok(trace as f64 / total as f64)
    }

    /// 2x2 submatrix `[[aa, ab], [ba, bb]]` restricted to classes a and b.
    pub fn pair_submatrix(&self, a: usize, b: usize) -> Result<[[u64; 2]; 2]> {
        let n = self.n_classes();
        if a >= n || b >= n || a == b {
            return Err(Error::InvalidPair(a, b));
        }
        Ok([
            [self.get(a, a), self.get(a, b)],
            [self.get(b, a), self.get(b, b)],
        ])
    }

    /// Off-diagonal fraction of the pair submatrix.
    pub fn misclassification_rate(&self, a: usize, b: usize) -> Result<f64> {
        let m = self.pair_submatrix(a, b)?;
        let total = m[0][0] + m[0][1] + m[1][0] + m[1][1];
        if total == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok((m[0][1] + m[1][0]) as f64 / total as f64)
    }

    /// Write as CSV with a label header row and a label column.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["predicted\\actual".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend((0..self.n_classes()).map(|j| self.get(i, j).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
        let mut records = r.records();
        let header = records
            .next()
            .ok_or(Error::EmptyMatrix)??;
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        if labels.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let mut m = ConfusionMatrix::new(labels);
        let n = m.n_classes();
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            if i >= n || rec.len() != n + 1 {
                return Err(Error::ShapeMismatch(format!(
                    "confusion csv row {i} has {} fields, expected {}",
                    rec.len(),
                    n + 1
                )));
            }
            if rec.get(0) != Some(m.labels[i].as_str()) {
                return Err(Error::LabelMismatch(format!(
                    "row label {:?} does not match column label {:?}",
                    rec.get(0),
                    m.labels[i]
                )));
            }
            for j in 0..n {
                m.counts[i * n + j] = rec[j + 1]
                    .parse()
                    .map_err(|_| Error::ShapeMismatch(format!("bad count at ({i}, {j})")))?;
            }
        }
        Ok(m)
    }
}

/// Tally predictions against true labels.
pub fn confusion(
    predicted: &[usize],
    actual: &[usize],
    labels: &[String],
) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: actual.len() });
    }
    let n = labels.len();
    let mut m = ConfusionMatrix::new(labels.to_vec());
    for (&p, &a) in predicted.iter().zip(actual) {
        if p >= n || a >= n {
            return Err(Error::ClassOutOfRange { class: p.max(a), classes: n });
        }
        m.counts[p * n + a] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRate {
    pub a: String,
    pub b: String,
    /// Misclassification rate in percent.
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRun {
    pub model: String,
    /// Overall accuracy in percent.
    pub accuracy: f64,
    pub pairs: Vec<PairRate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub runs: Vec<ModelRun>,
    /// Model with the highest overall accuracy.
    pub best_overall: String,
    /// For each pair, the model with the lowest misclassification rate.
    pub best_per_pair: Vec<BestPair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestPair {
    pub a: String,
    pub b: String,
    pub model: String,
    pub rate: f64,
}

/// Build the cross-model comparison from per-model confusion matrices over a
/// shared label set and a shared list of pairs of interest.
pub fn compare_report(
    runs: &[(String, ConfusionMatrix)],
    pairs: &[(usize, usize)],
) -> Result<CompareReport> {
    if runs.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let labels = &runs[0].1.labels;
    for (name, m) in runs {
        if &m.labels != labels {
            return Err(Error::LabelMismatch(format!(
                "model {name} evaluated over a different label set"
            )));
        }
    }
    let mut report_runs = Vec::new();
    for (name, m) in runs {
        let mut pair_rates = Vec::new();
        for &(a, b) in pairs {
            // a collapsed model can route every sample of the pair into
            // other classes, leaving the 2x2 submatrix empty; report that
            // as full confusion instead of failing the whole comparison
            let rate = match m.misclassification_rate(a, b) {
                Ok(r) => r * 100.0,
                Err(Error::EmptyMatrix) => 100.0,
                Err(e) => return Err(e),
            };
            pair_rates.push(PairRate { a: labels[a].clone(), b: labels[b].clone(), rate });
        }
        report_runs.push(ModelRun {
            model: name.clone(),
            accuracy: m.accuracy()? * 100.0,
            pairs: pair_rates,
        });
    }
    let best_overall = report_runs
        .iter()
        .max_by(|x, y| x.accuracy.partial_cmp(&y.accuracy).unwrap())
        .unwrap()
        .model
        .clone();
    let mut best_per_pair = Vec::new();
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let best = report_runs
            .iter()
            .min_by(|x, y| x.pairs[k].rate.partial_cmp(&y.pairs[k].rate).unwrap())
            .unwrap();
        best_per_pair.push(BestPair {
            a: labels[a].clone(),
            b: labels[b].clone(),
            model: best.model.clone(),
            rate: best.pairs[k].rate,
        });
    }
    Ok(CompareReport { runs: report_runs, best_overall, best_per_pair })
}

impl CompareReport {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Human-readable table with rates rounded to two decimals.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for run in &self.runs {
            out.push_str(&format!("{}: accuracy {:.2}%\n", run.model, run.accuracy));
            for p in &run.pairs {
                out.push_str(&format!("  {} vs {}: {:.2}% misclassified\n", p.a, p.b, p.rate));
            }
        }
        out.push_str(&format!("best overall: {}\n", self.best_overall));
        for b in &self.best_per_pair {
            out.push_str(&format!(
                "best for {} vs {}: {} ({:.2}%)\n",
                b.a, b.b, b.model, b.rate
            ));
        }
        out
    }
}

/// Aggregate standalone 2x2 pair matrices (one CSV per model and pair) into
/// a comparison report. The model name is the file-stem prefix before the
/// first underscore; the pair is named by the matrix's own labels.
pub fn compare_pair_files(paths: &[std::path::PathBuf]) -> Result<CompareReport> {
    if paths.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    // (model, pair matrices) in first-seen order
    let mut models: Vec<(String, Vec<ConfusionMatrix>)> = Vec::new();
    for path in paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Usage(format!("bad fixture path {}", path.display())))?;
        let model = stem.split('_').next().unwrap_or(stem).to_string();
        let m = ConfusionMatrix::load_csv(path)?;
        if m.n_classes() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "{} holds a {n}x{n} matrix, pair matrices must be 2x2",
                path.display(),
                n = m.n_classes()
            )));
        }
        match models.iter_mut().find(|(name, _)| *name == model) {
            Some((_, ms)) => ms.push(m),
            None => models.push((model, vec![m])),
        }
    }
    let mut runs = Vec::new();
    for (model, ms) in &models {
        let mut correct = 0u64;
        let mut total = 0u64;
        let mut pairs = Vec::new();
        for m in ms {
            correct += m.get(0, 0) + m.get(1, 1);
            total += m.total();
            pairs.push(PairRate {
                a: m.labels[0].clone(),
                b: m.labels[1].clone(),
                rate: m.misclassification_rate(0, 1)? * 100.0,
            });
        }
        runs.push(ModelRun {
            model: model.clone(),
            accuracy: correct as f64 / total as f64 * 100.0,
            pairs,
        });
    }
    let best_overall = runs
        .iter()
        .max_by(|x, y| x.accuracy.partial_cmp(&y.accuracy).unwrap())
        .unwrap()
        .model
        .clone();
    // best model per (a, b) pair key across runs
    let mut best_per_pair: Vec<BestPair> = Vec::new();
    for run in &runs {
        for p in &run.pairs {
            match best_per_pair.iter_mut().find(|b| b.a == p.a && b.b == p.b) {
                Some(b) => {
                    if p.rate < b.rate {
                        b.model = run.model.clone();
                        b.rate = p.rate;
                    }
                }
                None => best_per_pair.push(BestPair {
                    a: p.a.clone(),
                    b: p.b.clone(),
                    model: run.model.clone(),
                    rate: p.rate,
                }),
            }
        }
    }
    Ok(CompareReport { runs, best_overall, best_per_pair })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels2() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn perfect_pair_matrix_has_unit_accuracy() {
        let m = ConfusionMatrix {
            labels: labels2(),
            counts: vec![61, 0, 0, 56],
        };
        assert_eq!(m.accuracy().unwrap(), 1.0);
        assert_eq!(m.misclassification_rate(0, 1).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_is_trace_over_total() {
        let m = ConfusionMatrix {
            labels: labels2(),
            counts: vec![50, 2, 0, 61],
        };
        assert!((m.accuracy().unwrap() - 111.0 / 113.0).abs() < 1e-12);
    }

    #[test]
    fn published_pair_rates_reproduce() {
        let cases: [([u64; 4], f64); 3] = [
            ([71, 0, 0, 55], 0.0),
            ([60, 4, 3, 55], 4.0 + 3.0),
            ([64, 1, 4, 58], 1.0 + 4.0),
        ];
        for (counts, off) in cases {
            let m = ConfusionMatrix { labels: labels2(), counts: counts.to_vec() };
            let total: u64 = counts.iter().sum();
            let want = off / total as f64;
            assert!((m.misclassification_rate(0, 1).unwrap() - want).abs() < 1e-12);
        }
        // spot-check the percentages those cases round to
        let m = ConfusionMatrix { labels: labels2(), counts: vec![60, 4, 3, 55] };
        assert!((m.misclassification_rate(0, 1).unwrap() * 100.0 - 5.7377).abs() < 1e-3);
        let m = ConfusionMatrix { labels: labels2(), counts: vec![64, 1, 4, 58] };
        assert!((m.misclassification_rate(0, 1).unwrap() * 100.0 - 3.9370).abs() < 1e-3);
    }

    #[test]
    fn confusion_counts_and_orientation() {
        let labels: Vec<String> = vec!["x".into(), "y".into(), "z".into()];
        let predicted = [0, 1, 1, 2, 0];
        let actual = [0, 0, 1, 2, 2];
        let m = confusion(&predicted, &actual, &labels).unwrap();
        assert_eq!(m.total(), 5);
        // predicted y while actually x lands at row 1, column 0
        assert_eq!(m.get(1, 0), 1);
        assert_eq!(m.get(0, 2), 1);
        assert_eq!(m.get(2, 2), 1);
        // column sums recover the true-label distribution
        let col0: u64 = (0..3).map(|i| m.get(i, 0)).sum();
        assert_eq!(col0, 2);
    }

    #[test]
    fn pair_submatrix_layout() {
        let labels: Vec<String> = vec!["x".into(), "y".into(), "z".into()];
        let mut m = ConfusionMatrix::new(labels);
        m.counts = vec![
            9, 1, 0, //
            2, 8, 0, //
            0, 0, 5,
        ];
        assert_eq!(m.pair_submatrix(0, 1).unwrap(), [[9, 1], [2, 8]]);
        assert_eq!(m.pair_submatrix(1, 0).unwrap(), [[8, 2], [1, 9]]);
        assert!(matches!(m.pair_submatrix(1, 1), Err(Error::InvalidPair(..))));
        assert!(matches!(m.pair_submatrix(0, 3), Err(Error::InvalidPair(..))));
    }

    #[test]
    fn mismatched_lengths_and_bad_classes_rejected() {
        let labels = labels2();
        assert!(matches!(
            confusion(&[0], &[0, 1], &labels),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            confusion(&[2], &[0], &labels),
            Err(Error::ClassOutOfRange { .. })
        ));
        let empty = ConfusionMatrix::new(labels);
        assert!(matches!(empty.accuracy(), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cm.csv");
        let labels: Vec<String> = vec!["x".into(), "y".into(), "z".into()];
        let mut m = ConfusionMatrix::new(labels);
        for (i, c) in m.counts.iter_mut().enumerate() {
            *c = (i * 3 + 1) as u64;
        }
        m.save_csv(&path).unwrap();
        let back = ConfusionMatrix::load_csv(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn compare_report_picks_best_model_per_pair() {
        let mk = |counts: [u64; 9]| ConfusionMatrix {
            labels: vec!["x".into(), "y".into(), "z".into()],
            counts: counts.to_vec(),
        };
        let runs = vec![
            ("m1".to_string(), mk([10, 0, 0, 0, 10, 2, 0, 0, 8])),
            ("m2".to_string(), mk([10, 1, 0, 1, 9, 0, 0, 0, 10])),
        ];
        let report = compare_report(&runs, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(report.best_overall, "m2");
        assert_eq!(report.best_per_pair[0].model, "m1");
        assert_eq!(report.best_per_pair[1].model, "m2");
        let text = report.render_text();
        assert!(text.contains("best overall: m2"));
    }

    #[test]
    fn compare_report_counts_empty_pair_as_full_confusion() {
        // every x and y sample predicted as z: the (x, y) submatrix is empty
        let m = ConfusionMatrix {
            labels: vec!["x".into(), "y".into(), "z".into()],
            counts: vec![0, 0, 0, 0, 0, 0, 5, 5, 5],
        };
        let report = compare_report(&[("m".into(), m)], &[(0, 1)]).unwrap();
        assert_eq!(report.runs[0].pairs[0].rate, 100.0);
    }

    #[test]
    fn report_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let m = ConfusionMatrix { labels: labels2(), counts: vec![5, 1, 0, 4] };
        let report = compare_report(&[("ann".into(), m)], &[(0, 1)]).unwrap();
        report.save_json(&path).unwrap();
        let back: CompareReport =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back.best_overall, "ann");
        assert!((back.runs[0].pairs[0].rate - 10.0).abs() < 1e-12);
    }
}
