use std::collections::BTreeMap;
use std::path::PathBuf;

use biofuse_core::erders::erd_ers_curve;
use biofuse_core::fusion::{run_fusion_scenarios, NoiseCase, ScenarioConfig, SourceConfig};
use biofuse_core::{Modality, Recording};
use clap::Args;

use super::{prepare_output, variant, Context};
use crate::error::{data, usage, CliResult};
use crate::io::{self, EvaluationDocument};
use crate::svg;

#[derive(Debug, Args)]
pub struct FuseEvalArgs {
    /// Directory holding `trial_<id>_*` files.
    #[arg(long)]
    pub data: PathBuf,
    /// Noise case to run (clean, eeg-noise, emg-noise, both or all); repeatable.
    #[arg(long = "case", value_parser = parse_cases)]
    pub cases: Vec<Vec<NoiseCase>>,
    /// Noise level as a multiple of the training fluctuation.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Restrict the EEG classifier to the features this report keeps.
    #[arg(long)]
    pub eeg_selection: Option<PathBuf>,
    /// Restrict the EMG classifier to the features this report keeps.
    #[arg(long)]
    pub emg_selection: Option<PathBuf>,
    /// Scenario CSV to write; the full JSON report goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_cases(s: &str) -> Result<Vec<NoiseCase>, String> {
    if s == "all" {
        return Ok(NoiseCase::ALL.to_vec());
    }
    NoiseCase::parse(s)
        .map(|c| vec![c])
        .ok_or_else(|| format!("unknown case `{s}`; expected clean, eeg-noise, emg-noise, both or all"))
}

pub fn fuse_eval(ctx: &Context, args: FuseEvalArgs) -> CliResult<()> {
    let mut inputs = io::dataset_files(&args.data)?;
    let trials = io::read_dataset(&args.data)?;
    let cfg = &ctx.cfg;
    let mut cases: Vec<NoiseCase> = args.cases.into_iter().flatten().collect();
    if cases.is_empty() {
        cases = cfg.fusion.cases.clone();
    }
    let mut deduped = Vec::new();
    for c in cases {
        if !deduped.contains(&c) {
            deduped.push(c);
        }
    }
    let mut columns = |sel: &Option<PathBuf>| -> CliResult<Option<Vec<String>>> {
        let Some(p) = sel else { return Ok(None) };
        inputs.push(p.clone());
        let keep = io::read_selection(p)?.selected();
        if keep.is_empty() {
            return Err(data(format!("{}: every feature was rejected", p.display())));
        }
        Ok(Some(keep))
    };
    let eeg_columns = columns(&args.eeg_selection)?;
    let emg_columns = columns(&args.emg_selection)?;
    let alpha = args.alpha.unwrap_or(cfg.fusion.alpha);
    if !(alpha >= 0.0) {
        return Err(usage(format!("--alpha must be non-negative, got {alpha}")));
    }
    let scenario = ScenarioConfig {
        folds: cfg.classifier.folds,
        alpha,
        cases: deduped,
        eeg_features: cfg.eeg_features(),
        emg_features: cfg.emg_features(),
        eeg: SourceConfig { model: cfg.classifier.eeg.clone(), columns: eeg_columns },
        emg: SourceConfig { model: cfg.classifier.emg.clone(), columns: emg_columns },
        seed: cfg.seed,
    };
    let report = run_fusion_scenarios(&trials, &scenario).map_err(|e| match e {
        biofuse_core::Error::Config(m) => usage(m),
        other => data(format!("{}: {other}", args.data.display())),
    })?;
    let json = variant(&args.out, "json");
    prepare_output(&args.out, &inputs)?;
    prepare_output(&json, &inputs)?;
    io::write_scenarios(&args.out, &report.rows)?;
    io::write_json(&json, &report)?;
    for r in &report.rows {
        eprintln!(
            "{:<9} eeg {:.3}  emg {:.3}  fused {:.3}  (N eeg {:.2}, N emg {:.2})",
            r.case.as_str(),
            r.acc_eeg,
            r.acc_emg,
            r.acc_fused,
            r.mean_n_eeg,
            r.mean_n_emg
        );
    }
    ctx.finish(&args.out, "fuse-eval", &inputs, &[args.out.clone(), json])
}

#[derive(Debug, Args)]
pub struct ErdersArgs {
    /// Directory holding `trial_<id>_*` files.
    #[arg(long)]
    pub data: PathBuf,
    /// EEG channel; overrides `erders.channel`.
    #[arg(long)]
    pub channel: Option<String>,
    /// Curve CSV to write; an SVG plot goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn erders(ctx: &Context, args: ErdersArgs) -> CliResult<()> {
    let inputs = io::dataset_files(&args.data)?;
    let trials = io::read_dataset(&args.data)?;
    let channel = args.channel.unwrap_or_else(|| ctx.cfg.erders.channel.clone());
    let recs: Vec<&Recording> = trials.iter().map(|t| t.recording(Modality::Eeg)).collect();
    let curve = erd_ers_curve(&recs, &channel, &ctx.cfg.erd_ers())
        .map_err(|e| data(format!("{}: {e}", args.data.display())))?;
    let plot = variant(&args.out, "svg");
    prepare_output(&args.out, &inputs)?;
    prepare_output(&plot, &inputs)?;
    io::write_curve(&args.out, &curve.times_s, &curve.percent_change)?;
    let title = format!("ERD/ERS {channel}, {}–{} Hz, {} trials", curve.band[0], curve.band[1], curve.trial_count);
    io::write_text(&plot, &svg::line_plot(&title, "time (s)", "power change (%)", &curve.times_s, &curve.percent_change))?;
    ctx.finish(&args.out, "erders", &inputs, &[args.out.clone(), plot])
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation JSON files written by `evaluate`.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// Summary CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn report(ctx: &Context, args: ReportArgs) -> CliResult<()> {
    let mut docs = BTreeMap::new();
    for p in &args.inputs {
        let doc: EvaluationDocument = io::read_json(p)?;
        let key = (doc.modality.to_string(), doc.classifier.clone());
        if docs.insert(key.clone(), doc).is_some() {
            return Err(usage(format!("two inputs evaluate {} with {}", key.0, key.1)));
        }
    }
    prepare_output(&args.out, &args.inputs)?;
    io::write_summary(&args.out, &docs)?;
    ctx.finish(&args.out, "report", &args.inputs, &[args.out.clone()])
}
