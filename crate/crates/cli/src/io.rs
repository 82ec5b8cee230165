//! Reading and writing the on-disk artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use biofuse_core::classify::{CvReport, FoldResult, Model, ModelSpec, Summary, ClassificationReport, ConfusionMatrix};
use biofuse_core::features::{EEG_FEATURES, EMG_FEATURES};
use biofuse_core::fusion::ScenarioRow;
use biofuse_core::selection::{FeatureDecision, FeatureStatus, SelectionReport};
use biofuse_core::{FeatureMatrix, Modality, Recording, Scaler, StageSegmentation, Trial};
use serde::{Deserialize, Serialize};

use crate::error::{data, CliResult, PathContext};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerModality<T> {
    pub eeg: T,
    pub emg: T,
}

/// Sidecar `trial_<id>_meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialMeta {
    pub format_version: u32,
    pub trial_id: u32,
    pub source: String,
    pub sampling_rate_hz: PerModality<f64>,
    pub stage_boundaries: PerModality<[usize; 3]>,
}

fn trial_path(dir: &Path, id: u32, what: &str) -> PathBuf {
    dir.join(format!("trial_{id}_{what}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| data(format!("cannot encode {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).at(path, "write")
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).at(path, "read")?;
    serde_json::from_str(&text).at(path, "parse")
}

fn write_recording(path: &Path, rec: &Recording) -> CliResult<()> {
    let mut out = String::with_capacity(rec.len() * rec.samples.len() * 10);
    out.push_str(&rec.channel_names.join(","));
    out.push('\n');
    for i in 0..rec.len() {
        for (c, ch) in rec.samples.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("{:.6}", ch[i]));
        }
        out.push('\n');
    }
    fs::write(path, out).at(path, "write")
}

fn read_recording(path: &Path, modality: Modality, fs_hz: f64, trial_id: u32) -> CliResult<Recording> {
    let mut reader = csv::Reader::from_path(path).at(path, "open")?;
    let names: Vec<String> = reader.headers().at(path, "read the header of")?.iter().map(|h| h.trim().to_string()).collect();
    let mut samples = vec![Vec::new(); names.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.at(path, "read")?;
        if record.len() != names.len() {
            return Err(data(format!("{}: row {} has {} values, expected {}", path.display(), line + 2, record.len(), names.len())));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| data(format!("{}: row {}: `{field}` is not a number", path.display(), line + 2)))?;
            samples[c].push(v);
        }
    }
    Recording::new(modality, names, fs_hz, samples, trial_id).map_err(|e| data(format!("{}: {e}", path.display())))
}

/// Writes every trial as two CSV files plus a metadata sidecar; returns the paths written.
pub fn write_dataset(dir: &Path, trials: &[Trial], source: &str) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).at(dir, "create")?;
    let mut written = Vec::new();
    for t in trials {
        let meta = TrialMeta {
            format_version: FORMAT_VERSION,
            trial_id: t.id,
            source: source.to_string(),
            sampling_rate_hz: PerModality { eeg: t.eeg.sampling_rate_hz, emg: t.emg.sampling_rate_hz },
            stage_boundaries: PerModality { eeg: t.eeg_stages.boundaries(), emg: t.emg_stages.boundaries() },
        };
        for (rec, what) in [(&t.eeg, "eeg.csv"), (&t.emg, "emg.csv")] {
            let p = trial_path(dir, t.id, what);
            write_recording(&p, rec)?;
            written.push(p);
        }
        let p = trial_path(dir, t.id, "meta.json");
        write_json(&p, &meta)?;
        written.push(p);
    }
    Ok(written)
}

/// Trial ids found in `dir`, sorted.
pub fn dataset_ids(dir: &Path) -> CliResult<Vec<u32>> {
    let mut ids: Vec<u32> = fs::read_dir(dir)
        .at(dir, "list")?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("trial_")?.strip_suffix("_meta.json")?.parse().ok()
        })
        .collect();
    ids.sort_unstable();
    if ids.is_empty() {
        return Err(data(format!("no trial_<id>_meta.json files in {}", dir.display())));
    }
    Ok(ids)
}

/// Every file of the dataset in `dir`, in a fixed order.
pub fn dataset_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    Ok(dataset_ids(dir)?
        .into_iter()
        .flat_map(|id| ["meta.json", "eeg.csv", "emg.csv"].map(|w| trial_path(dir, id, w)))
        .collect())
}

pub fn read_trial(dir: &Path, id: u32) -> CliResult<Trial> {
    let meta_path = trial_path(dir, id, "meta.json");
    let meta: TrialMeta = read_json(&meta_path)?;
    if meta.trial_id != id {
        return Err(data(format!("{} claims trial id {}", meta_path.display(), meta.trial_id)));
    }
    let eeg = read_recording(&trial_path(dir, id, "eeg.csv"), Modality::Eeg, meta.sampling_rate_hz.eeg, id)?;
    let emg = read_recording(&trial_path(dir, id, "emg.csv"), Modality::Emg, meta.sampling_rate_hz.emg, id)?;
    let seg = |b: [usize; 3], rec: &Recording| {
        StageSegmentation::new(b, rec.len()).map_err(|e| data(format!("{}: {e}", meta_path.display())))
    };
    Ok(Trial { id, eeg_stages: seg(meta.stage_boundaries.eeg, &eeg)?, emg_stages: seg(meta.stage_boundaries.emg, &emg)?, eeg, emg })
}

/// Reads every trial in `dir`, checking a converter manifest when one is present.
pub fn read_dataset(dir: &Path) -> CliResult<Vec<Trial>> {
    let trials = dataset_ids(dir)?.into_iter().map(|id| read_trial(dir, id)).collect::<CliResult<Vec<_>>>()?;
    crate::conversion::check_dataset(dir, &trials)?;
    Ok(trials)
}

pub fn write_features(path: &Path, m: &FeatureMatrix) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).at(path, "create")?;
    let mut header = vec!["trial_id".to_string(), "window_start".into(), "label".into()];
    header.extend(m.feature_names().iter().cloned());
    w.write_record(&header).at(path, "write")?;
    for i in 0..m.n_rows() {
        let mut rec = vec![m.trial_ids()[i].to_string(), m.window_starts()[i].to_string(), m.labels()[i].to_string()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).at(path, "write")?;
    }
    w.flush().at(path, "write")
}

pub fn read_features(path: &Path) -> CliResult<FeatureMatrix> {
    let mut reader = csv::Reader::from_path(path).at(path, "open")?;
    let header: Vec<String> = reader.headers().at(path, "read the header of")?.iter().map(str::to_string).collect();
    if header.len() < 4 || header[..3] != ["trial_id", "window_start", "label"] {
        return Err(data(format!("{}: header must start with trial_id,window_start,label", path.display())));
    }
    let mut m = FeatureMatrix::empty(header[3..].to_vec());
    let mut row = Vec::with_capacity(header.len() - 3);
    for (line, record) in reader.records().enumerate() {
        let record = record.at(path, "read")?;
        let bad = |f: &str| data(format!("{}: row {}: `{f}` is not valid", path.display(), line + 2));
        let trial: u32 = record[0].parse().map_err(|_| bad(&record[0]))?;
        let start: usize = record[1].parse().map_err(|_| bad(&record[1]))?;
        let label: usize = record[2].parse().map_err(|_| bad(&record[2]))?;
        row.clear();
        for f in record.iter().skip(3) {
            row.push(f.parse::<f64>().map_err(|_| bad(f))?);
        }
        m.push_row(&row, label, trial, start).map_err(|e| data(format!("{}: row {}: {e}", path.display(), line + 2)))?;
    }
    Ok(m)
}

/// Guesses the modality from the feature suffixes of the column names,
/// falling back to the channel prefixes when only shared features are present.
pub fn infer_modality(names: &[String], eeg_channels: &[String], emg_channels: &[String]) -> Option<Modality> {
    let ends = |set: &[&str]| names.iter().all(|n| set.iter().any(|f| n.ends_with(&format!("_{f}"))));
    let starts = |chs: &[String]| names.iter().all(|n| chs.iter().any(|c| n.starts_with(&format!("{c}_"))));
    match (ends(&EEG_FEATURES), ends(&EMG_FEATURES)) {
        (true, false) => Some(Modality::Eeg),
        (false, true) => Some(Modality::Emg),
        (true, true) if starts(eeg_channels) && !starts(emg_channels) => Some(Modality::Eeg),
        (true, true) if starts(emg_channels) && !starts(eeg_channels) => Some(Modality::Emg),
        _ => None,
    }
}

pub fn write_selection(path: &Path, r: &SelectionReport) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).at(path, "create")?;
    w.write_record(["feature", "status", "hits", "iterations"]).at(path, "write")?;
    for f in &r.features {
        w.write_record([f.name.as_str(), f.status.as_str(), &f.hits.to_string(), &r.iterations.to_string()])
            .at(path, "write")?;
    }
    w.flush().at(path, "write")
}

pub fn read_selection(path: &Path) -> CliResult<SelectionReport> {
    let mut reader = csv::Reader::from_path(path).at(path, "open")?;
    let mut features = Vec::new();
    let mut iterations = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.at(path, "read")?;
        let bad = || data(format!("{}: row {} is not `feature,status,hits,iterations`", path.display(), line + 2));
        if record.len() != 4 {
            return Err(bad());
        }
        let status = FeatureStatus::parse(&record[1]).ok_or_else(bad)?;
        let hits = record[2].parse().map_err(|_| bad())?;
        iterations = record[3].parse().map_err(|_| bad())?;
        features.push(FeatureDecision { name: record[0].to_string(), status, hits });
    }
    Ok(SelectionReport { features, iterations })
}

/// A fitted model with everything needed to reproduce its predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub model_type: String,
    pub modality: Modality,
    pub hyperparameters: ModelSpec,
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub model: Model,
}

/// Cross-validation results without the per-sample predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationDocument {
    pub format_version: u32,
    pub modality: Modality,
    pub classifier: String,
    pub folds: Vec<FoldResult>,
    pub accuracy: Summary,
    pub macro_precision: Summary,
    pub macro_recall: Summary,
    pub macro_f1: Summary,
    pub pooled: ConfusionMatrix,
    pub warnings: Vec<String>,
}

impl EvaluationDocument {
    pub fn new(modality: Modality, classifier: &str, r: CvReport) -> Self {
        EvaluationDocument {
            format_version: FORMAT_VERSION,
            modality,
            classifier: classifier.to_string(),
            folds: r.folds,
            accuracy: r.accuracy,
            macro_precision: r.macro_precision,
            macro_recall: r.macro_recall,
            macro_f1: r.macro_f1,
            pooled: r.pooled,
            warnings: r.warnings,
        }
    }
}

fn report_fields(r: &ClassificationReport) -> [f64; 7] {
    [
        r.accuracy,
        r.macro_avg.precision,
        r.macro_avg.recall,
        r.macro_avg.f1,
        r.micro_avg.precision,
        r.micro_avg.recall,
        r.micro_avg.f1,
    ]
}

const REPORT_HEADER: [&str; 8] =
    ["fold", "accuracy", "macro_precision", "macro_recall", "macro_f1", "micro_precision", "micro_recall", "micro_f1"];

/// One row per fold, then the mean and standard deviation over folds.
pub fn write_report(path: &Path, folds: &[(String, ClassificationReport)]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).at(path, "create")?;
    w.write_record(REPORT_HEADER).at(path, "write")?;
    let rows: Vec<[f64; 7]> = folds.iter().map(|(_, r)| report_fields(r)).collect();
    for ((name, _), vals) in folds.iter().zip(&rows) {
        let mut rec = vec![name.clone()];
        rec.extend(vals.iter().map(f64::to_string));
        w.write_record(&rec).at(path, "write")?;
    }
    if folds.len() > 1 {
        let stats: Vec<Summary> = (0..7).map(|j| Summary::of(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
        for (name, pick) in [("mean", 0), ("std", 1)] {
            let mut rec = vec![name.to_string()];
            rec.extend(stats.iter().map(|s| if pick == 0 { s.mean } else { s.std }.to_string()));
            w.write_record(&rec).at(path, "write")?;
        }
    }
    w.flush().at(path, "write")
}

/// Per-class metrics of `r`.
pub fn write_class_report(path: &Path, r: &ClassificationReport) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).at(path, "create")?;
    w.write_record(["class", "precision", "recall", "f1", "support"]).at(path, "write")?;
    for (c, m) in r.per_class.iter().enumerate() {
        let name = biofuse_core::Stage::from_index(c).map_or_else(|| c.to_string(), |s| s.name().to_string());
        w.write_record([name, m.precision.to_string(), m.recall.to_string(), m.f1.to_string(), m.support.to_string()])
            .at(path, "write")?;
    }
    w.flush().at(path, "write")
}

pub fn write_scenarios(path: &Path, rows: &[ScenarioRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).at(path, "create")?;
    w.write_record(["case", "modality_noised", "noise_alpha", "acc_eeg", "acc_emg", "acc_fused", "mean_N_eeg", "mean_N_emg"])
        .at(path, "write")?;
    for r in rows {
        w.write_record([
            r.case.as_str().to_string(),
            r.case.modality_noised().to_string(),
            r.noise_alpha.to_string(),
            r.acc_eeg.to_string(),
            r.acc_emg.to_string(),
            r.acc_fused.to_string(),
            r.mean_n_eeg.to_string(),
            r.mean_n_emg.to_string(),
        ])
        .at(path, "write")?;
    }
    w.flush().at(path, "write")
}

pub fn write_curve(path: &Path, times: &[f64], values: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).at(path, "create")?;
    w.write_record(["t_s", "percent_change"]).at(path, "write")?;
    for (t, v) in times.iter().zip(values) {
        w.write_record([t.to_string(), v.to_string()]).at(path, "write")?;
    }
    w.flush().at(path, "write")
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = fs::File::create(path).at(path, "create")?;
    f.write_all(text.as_bytes()).at(path, "write")
}

/// Table-style summary: one row per evaluation document.
pub fn write_summary(path: &Path, docs: &BTreeMap<(String, String), EvaluationDocument>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).at(path, "create")?;
    w.write_record(["modality", "classifier", "folds", "accuracy", "accuracy_std", "precision", "recall", "f1"])
        .at(path, "write")?;
    for ((modality, classifier), d) in docs {
        w.write_record([
            modality.clone(),
            classifier.clone(),
            d.folds.len().to_string(),
            d.accuracy.mean.to_string(),
            d.accuracy.std.to_string(),
            d.macro_precision.mean.to_string(),
            d.macro_recall.mean.to_string(),
            d.macro_f1.mean.to_string(),
        ])
        .at(path, "write")?;
    }
    w.flush().at(path, "write")
}

#[cfg(test)]
mod tests {
    use super::*;
    use biofuse_core::synth::{generate_dataset, GeneratorConfig};

    #[test]
    fn dataset_round_trips_at_six_decimals() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GeneratorConfig { trial_count: 2, trial_length_s: 4.0, boundaries_s: [1.0, 2.0, 3.0], ..GeneratorConfig::default() };
        let trials = generate_dataset(&cfg).unwrap();
        write_dataset(dir.path(), &trials, "synth").unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in trials.iter().zip(&back) {
            assert_eq!(a.eeg_stages, b.eeg_stages);
            assert_eq!(a.emg.channel_names, b.emg.channel_names);
            for (x, y) in a.emg.samples.iter().flatten().zip(b.emg.samples.iter().flatten()) {
                assert!((x - y).abs() <= 5e-7);
            }
        }
    }

    #[test]
    fn features_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let mut m = FeatureMatrix::empty(vec!["C3_MAV".into(), "C3_SD".into()]);
        m.push_row(&[0.1 + 0.2, 1e-300], 2, 7, 40).unwrap();
        m.push_row(&[-3.5, 123456.789], 0, 8, 0).unwrap();
        write_features(&p, &m).unwrap();
        assert_eq!(read_features(&p).unwrap(), m);
    }

    #[test]
    fn modality_is_inferred_from_names() {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let (eeg, emg) = (names(&["C3"]), names(&["Biceps"]));
        assert_eq!(infer_modality(&names(&["C3_MAV", "C3_ASB_alpha"]), &eeg, &emg), Some(Modality::Eeg));
        assert_eq!(infer_modality(&names(&["Biceps_MAV", "Biceps_WL"]), &eeg, &emg), Some(Modality::Emg));
        assert_eq!(infer_modality(&names(&["Biceps_MAV"]), &eeg, &emg), Some(Modality::Emg));
        assert_eq!(infer_modality(&names(&["Cz_MAV"]), &eeg, &emg), None);
        assert_eq!(infer_modality(&names(&["x"]), &eeg, &emg), None);
    }

    #[test]
    fn model_documents_reload_bit_identically() {
        use biofuse_core::classify::{Classifier, KnnConfig, LstmConfig, MlpConfig, TrainConfig};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut m = FeatureMatrix::empty(vec!["C3_MAV".into(), "C3_SD".into(), "C3_V".into()]);
        for trial in 0..6u32 {
            for w in 0..12usize {
                let label = w / 3;
                let row: Vec<f64> = (0..3).map(|j| rng.random::<f64>() + (label * (j + 1)) as f64 * 0.3).collect();
                m.push_row(&row, label, trial, w * 10).unwrap();
            }
        }
        let train = TrainConfig { max_epochs: 3, ..TrainConfig::default() };
        let specs = [
            ModelSpec::Knn(KnnConfig { k: 3 }),
            ModelSpec::Mlp(MlpConfig { hidden: vec![5], train }),
            ModelSpec::Lstm(LstmConfig { hidden: 4, sequence_len: 3, train }),
        ];
        for spec in specs {
            let scaler = Scaler::fit(&m).unwrap();
            let samples = spec.samples(&scaler.apply(&m).unwrap()).unwrap();
            let model = spec.fit(&samples, 4, 9).unwrap();
            let doc = ModelDocument {
                format_version: FORMAT_VERSION,
                model_type: spec.name().into(),
                modality: Modality::Eeg,
                hyperparameters: spec.clone(),
                feature_names: m.feature_names().to_vec(),
                scaler,
                model,
            };
            let back: ModelDocument = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
            assert_eq!(back, doc);
            let re = back.hyperparameters.samples(&back.scaler.apply(&m).unwrap()).unwrap();
            for i in 0..samples.len() {
                let (a, b) = (doc.model.predict_proba(samples.sample(i)), back.model.predict_proba(re.sample(i)));
                assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()), "{}", spec.name());
            }
        }
    }
}
