use std::path::PathBuf;

use biofuse_core::features::FeatureExtractor;
use biofuse_core::synth::generate_dataset;
use biofuse_core::{FeatureMatrix, Modality};
use clap::Args;

use super::{prepare_output, sibling, Context};
use crate::error::{data, CliResult};
use crate::io;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for the trial files.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of trials; overrides `synth.trial_count`.
    #[arg(long)]
    pub trials: Option<usize>,
}

pub fn synth(ctx: &Context, args: SynthArgs) -> CliResult<()> {
    let mut gen = ctx.cfg.generator();
    if let Some(n) = args.trials {
        gen.trial_count = n;
    }
    let trials = generate_dataset(&gen)?;
    let written = io::write_dataset(&args.out, &trials, "synthetic")?;
    ctx.finish(&args.out, "synth", &[], &written)
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory holding `trial_<id>_*` files.
    #[arg(long)]
    pub data: PathBuf,
    /// Modality to extract: `eeg` or `emg`.
    #[arg(long, value_parser = parse_modality)]
    pub modality: Modality,
    /// Feature matrix CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse a fitted extractor (`<features>.extractor.json`) instead of fitting one.
    #[arg(long)]
    pub extractor: Option<PathBuf>,
}

pub(super) fn parse_modality(s: &str) -> Result<Modality, String> {
    s.parse::<Modality>().map_err(|e| e.to_string())
}

pub fn extract(ctx: &Context, args: ExtractArgs) -> CliResult<()> {
    let mut inputs = io::dataset_files(&args.data)?;
    let trials = io::read_dataset(&args.data)?;
    let extractor = match &args.extractor {
        Some(p) => {
            inputs.push(p.clone());
            let e: FeatureExtractor = io::read_json(p)?;
            if e.modality() != args.modality {
                return Err(data(format!("{} is a {} extractor, not {}", p.display(), e.modality(), args.modality)));
            }
            e
        }
        None => {
            let channels = match args.modality {
                Modality::Eeg => &ctx.cfg.data.eeg_channels,
                Modality::Emg => &ctx.cfg.data.emg_channels,
            };
            for t in &trials {
                for ch in channels {
                    t.recording(args.modality).channel_index(ch).map_err(|e| {
                        let file = args.data.join(format!("trial_{}_{}.csv", t.id, args.modality));
                        data(format!("{}: {e}", file.display()))
                    })?;
                }
            }
            let pairs: Vec<_> =
                trials.iter().map(|t| (t.recording(args.modality), t.stages(args.modality))).collect();
            FeatureExtractor::fit(args.modality, &ctx.cfg.eeg_features(), &ctx.cfg.emg_features(), &pairs)
                .map_err(|e| data(format!("{}: {e}", args.data.display())))?
        }
    };
    let mut m = FeatureMatrix::empty(extractor.feature_names());
    for t in &trials {
        let part = extractor
            .extract(t.recording(args.modality), t.stages(args.modality))
            .map_err(|e| data(format!("trial {} ({}): {e}", t.id, args.modality)))?;
        m.append(&part)?;
    }
    let sidecar = sibling(&args.out, ".extractor.json");
    prepare_output(&args.out, &inputs)?;
    prepare_output(&sidecar, &inputs)?;
    io::write_features(&args.out, &m)?;
    io::write_json(&sidecar, &extractor)?;
    eprintln!("{} rows × {} features from {} trials", m.n_rows(), m.n_cols(), trials.len());
    ctx.finish(&args.out, "extract", &inputs, &[args.out.clone(), sidecar])
}
