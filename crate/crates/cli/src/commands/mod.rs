mod analysis;
mod data;
mod model;

use std::path::{Path, PathBuf};

use biofuse_core::selection::SelectionReport;
use biofuse_core::{FeatureMatrix, Modality};

pub use analysis::{erders, fuse_eval, report, ErdersArgs, FuseEvalArgs, ReportArgs};
pub use data::{extract, synth, ExtractArgs, SynthArgs};
pub use model::{evaluate, select, train, EvaluateArgs, SelectArgs, TrainArgs};

use crate::config::PipelineConfig;
use crate::error::{data as data_err, usage, CliResult};
use crate::io;
use crate::manifest::write_manifest;

pub struct Context {
    pub cfg: PipelineConfig,
    pub config_path: Option<PathBuf>,
}

impl Context {
    /// Writes the manifest of `out`, counting the configuration file as an input.
    fn finish(&self, out: &Path, command: &str, inputs: &[PathBuf], outputs: &[PathBuf]) -> CliResult<()> {
        let mut all = inputs.to_vec();
        all.extend(self.config_path.iter().cloned());
        let path = write_manifest(out, command, &self.cfg, &all, outputs)?;
        eprintln!("wrote {} ({} outputs)", path.display(), outputs.len());
        Ok(())
    }
}

/// `out` with `suffix` appended to its file name.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    out.with_file_name(name)
}

/// `out` with its extension replaced.
fn variant(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

/// Refuses to overwrite any input and creates the parent directory of `out`.
fn prepare_output(out: &Path, inputs: &[PathBuf]) -> CliResult<()> {
    let canon = |p: &Path| p.canonicalize().unwrap_or_else(|_| p.to_path_buf());
    let target = canon(out);
    if inputs.iter().any(|i| canon(i) == target) {
        return Err(usage(format!("output {} would overwrite an input", out.display())));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| data_err(format!("cannot create {}: {e}", parent.display())))?;
    }
    Ok(())
}

/// Reads a feature matrix, restricts it to a selection when given, and
/// works out its modality.
fn load_features(
    ctx: &Context,
    features: &Path,
    selection: Option<&Path>,
    inputs: &mut Vec<PathBuf>,
) -> CliResult<(FeatureMatrix, Modality)> {
    let mut m = io::read_features(features)?;
    inputs.push(features.to_path_buf());
    let modality = io::infer_modality(m.feature_names(), &ctx.cfg.data.eeg_channels, &ctx.cfg.data.emg_channels)
        .ok_or_else(|| {
            data_err(format!(
                "{}: cannot tell EEG from EMG features; column names must be <channel>_<feature>",
                features.display()
            ))
        })?;
    if let Some(sel) = selection {
        let report = io::read_selection(sel)?;
        inputs.push(sel.to_path_buf());
        m = apply_selection(&m, &report, sel)?;
    }
    if m.is_empty() {
        return Err(data_err(format!("{} has no rows", features.display())));
    }
    Ok((m, modality))
}

fn apply_selection(m: &FeatureMatrix, report: &SelectionReport, path: &Path) -> CliResult<FeatureMatrix> {
    let keep = report.selected();
    if keep.is_empty() {
        return Err(data_err(format!("{}: every feature was rejected", path.display())));
    }
    if let Some(missing) = keep.iter().find(|k| m.column_index(k).is_none()) {
        return Err(data_err(format!("{}: feature `{missing}` is not in the feature matrix", path.display())));
    }
    let ordered: Vec<&String> = m.feature_names().iter().filter(|n| keep.contains(n)).collect();
    m.select_features(&ordered).map_err(|e| data_err(format!("{}: {e}", path.display())))
}
