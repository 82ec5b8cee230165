use std::path::PathBuf;

use biofuse_core::classify::{
    cross_validate, report_metrics, ClassificationReport, Classifier, CvConfig, CvReport, FoldResult, ModelSpec,
    Summary,
};
use biofuse_core::selection::boruta_select;
use biofuse_core::{FeatureMatrix, Modality, Scaler, Stage};
use clap::{Args, ValueEnum};

use super::{load_features, prepare_output, variant, Context};
use crate::error::{data, CliResult};
use crate::io::{self, EvaluationDocument, ModelDocument, FORMAT_VERSION};
use crate::svg;

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Feature matrix CSV.
    #[arg(long)]
    pub features: PathBuf,
    /// Selection report CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn select(ctx: &Context, args: SelectArgs) -> CliResult<()> {
    let mut inputs = Vec::new();
    let (m, _) = load_features(ctx, &args.features, None, &mut inputs)?;
    let report = boruta_select(&m, &ctx.cfg.boruta())?;
    prepare_output(&args.out, &inputs)?;
    io::write_selection(&args.out, &report)?;
    eprintln!("{} of {} features kept after {} iterations", report.selected().len(), m.n_cols(), report.iterations);
    ctx.finish(&args.out, "select", &inputs, &[args.out.clone()])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassifierKind {
    Knn,
    Mlp,
    Lstm,
}

/// The configured model for `modality`, or the default model of `kind`
/// when it names a different classifier.
fn resolve_spec(ctx: &Context, modality: Modality, kind: Option<ClassifierKind>) -> ModelSpec {
    let configured = ctx.cfg.model(modality).clone();
    let wanted = match kind {
        None => return configured,
        Some(ClassifierKind::Knn) => ModelSpec::Knn(Default::default()),
        Some(ClassifierKind::Mlp) => ModelSpec::Mlp(Default::default()),
        Some(ClassifierKind::Lstm) => ModelSpec::Lstm(Default::default()),
    };
    if wanted.name() == configured.name() {
        configured
    } else {
        wanted
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature matrix CSV.
    #[arg(long)]
    pub features: PathBuf,
    /// Keep only the features this selection report does not reject.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub classifier: Option<ClassifierKind>,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn train(ctx: &Context, args: TrainArgs) -> CliResult<()> {
    let mut inputs = Vec::new();
    let (m, modality) = load_features(ctx, &args.features, args.selection.as_deref(), &mut inputs)?;
    let spec = resolve_spec(ctx, modality, args.classifier);
    let scaler = Scaler::fit(&m)?;
    let samples = spec.samples(&scaler.apply(&m)?)?;
    if samples.is_empty() {
        return Err(data(format!("{}: too few windows per trial for a {} sample", args.features.display(), spec.name())));
    }
    let model = spec.fit(&samples, Stage::COUNT, ctx.cfg.seed)?;
    let doc = ModelDocument {
        format_version: FORMAT_VERSION,
        model_type: spec.name().to_string(),
        modality,
        hyperparameters: spec,
        feature_names: m.feature_names().to_vec(),
        scaler,
        model,
    };
    prepare_output(&args.out, &inputs)?;
    io::write_json(&args.out, &doc)?;
    ctx.finish(&args.out, "train", &inputs, &[args.out.clone()])
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Feature matrix CSV.
    #[arg(long)]
    pub features: PathBuf,
    /// Keep only the features this selection report does not reject.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "model")]
    pub classifier: Option<ClassifierKind>,
    /// Score this trained model instead of cross-validating.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Report CSV to write; the JSON report, per-class CSV and confusion
    /// plot are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn evaluate(ctx: &Context, args: EvaluateArgs) -> CliResult<()> {
    let mut inputs = Vec::new();
    let (m, modality) = load_features(ctx, &args.features, args.selection.as_deref(), &mut inputs)?;
    let (doc, label) = match &args.model {
        Some(path) => {
            inputs.push(path.clone());
            let model: ModelDocument = io::read_json(path)?;
            (score_model(&m, modality, &model, path)?, "holdout")
        }
        None => {
            let spec = resolve_spec(ctx, modality, args.classifier);
            let cv = CvConfig { folds: ctx.cfg.classifier.folds, seed: ctx.cfg.seed };
            let r: CvReport = cross_validate(&spec, &m, &cv)?;
            (EvaluationDocument::new(modality, spec.name(), r), "fold")
        }
    };
    let pooled = report_metrics(&doc.pooled)?;
    let folds: Vec<(String, ClassificationReport)> = doc
        .folds
        .iter()
        .map(|f| (if label == "fold" { f.fold.to_string() } else { label.to_string() }, f.report.clone()))
        .collect();
    let outputs = [
        args.out.clone(),
        variant(&args.out, "json"),
        variant(&args.out, "classes.csv"),
        variant(&args.out, "confusion.svg"),
    ];
    for o in &outputs {
        prepare_output(o, &inputs)?;
    }
    io::write_report(&outputs[0], &folds)?;
    io::write_json(&outputs[1], &doc)?;
    io::write_class_report(&outputs[2], &pooled)?;
    let names: Vec<String> = Stage::ALL.iter().map(|s| s.name().to_string()).collect();
    let title = format!("{} {} confusion (accuracy {:.3})", doc.modality, doc.classifier, pooled.accuracy);
    io::write_text(&outputs[3], &svg::confusion_heatmap(&title, &names, doc.pooled.counts()))?;
    eprintln!("{} {}: accuracy {:.4} ± {:.4}", doc.modality, doc.classifier, doc.accuracy.mean, doc.accuracy.std);
    ctx.finish(&args.out, "evaluate", &inputs, &outputs)
}

fn score_model(
    m: &FeatureMatrix,
    modality: Modality,
    doc: &ModelDocument,
    path: &std::path::Path,
) -> CliResult<EvaluationDocument> {
    if doc.modality != modality {
        return Err(data(format!("{} was trained on {} features, got {}", path.display(), doc.modality, modality)));
    }
    let m = m.select_features(&doc.feature_names).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let samples = doc.hyperparameters.samples(&doc.scaler.apply(&m)?)?;
    if samples.is_empty() {
        return Err(data("too few windows per trial to score the model".to_string()));
    }
    let predicted: Vec<usize> = (0..samples.len()).map(|i| doc.model.predict(samples.sample(i))).collect();
    let cm = biofuse_core::classify::ConfusionMatrix::from_predictions(
        doc.model.n_classes(),
        samples.labels(),
        &predicted,
    );
    let report = report_metrics(&cm)?;
    let one = |v: f64| Summary::of(&[v]);
    Ok(EvaluationDocument {
        format_version: FORMAT_VERSION,
        modality,
        classifier: doc.model_type.clone(),
        accuracy: one(report.accuracy),
        macro_precision: one(report.macro_avg.precision),
        macro_recall: one(report.macro_avg.recall),
        macro_f1: one(report.macro_avg.f1),
        pooled: cm,
        warnings: report.warnings.clone(),
        folds: vec![FoldResult { fold: 0, test_trials: m.unique_trials(), report }],
    })
}
