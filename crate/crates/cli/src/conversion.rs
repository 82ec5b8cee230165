//! Manifest written by the recorded-dataset converter next to the trials it emits.

use std::path::Path;

use biofuse_core::Trial;
use serde::{Deserialize, Serialize};

use crate::error::{data, CliResult};
use crate::io::{read_json, FORMAT_VERSION};

pub const CONVERSION_FILE: &str = "conversion.json";

/// Largest accepted gap between the EEG and EMG durations of one trial.
pub const DURATION_TOLERANCE_S: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvertedTrial {
    pub trial_id: u32,
    pub eeg_samples: usize,
    pub emg_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkippedTrial {
    pub index: u32,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversionManifest {
    pub format_version: u32,
    pub participant: String,
    pub series: String,
    /// Trials in the source series, converted or not.
    pub source_trial_count: usize,
    /// Source event fields the stage boundaries were taken from, in boundary order.
    pub event_fields: [String; 3],
    pub trials: Vec<ConvertedTrial>,
    #[serde(default)]
    pub skipped: Vec<SkippedTrial>,
}

impl ConversionManifest {
    /// Checks the manifest against the trials read from its directory.
    pub fn verify(&self, trials: &[Trial]) -> CliResult<()> {
        let fail = |msg: String| Err(data(format!("{CONVERSION_FILE}: {msg}")));
        if self.format_version != FORMAT_VERSION {
            return fail(format!("format version {} is not {FORMAT_VERSION}", self.format_version));
        }
        if self.trials.len() + self.skipped.len() != self.source_trial_count {
            return fail(format!(
                "{} converted and {} skipped trials do not add up to {} source trials",
                self.trials.len(),
                self.skipped.len(),
                self.source_trial_count
            ));
        }
        if self.trials.len() != trials.len() {
            return fail(format!("lists {} trials but the directory holds {}", self.trials.len(), trials.len()));
        }
        for (want, t) in self.trials.iter().zip(trials) {
            if want.trial_id != t.id {
                return fail(format!("expected trial {} but found {}", want.trial_id, t.id));
            }
            if want.eeg_samples != t.eeg.len() || want.emg_samples != t.emg.len() {
                return fail(format!(
                    "trial {}: {}/{} EEG/EMG samples on disk, {}/{} listed",
                    t.id,
                    t.eeg.len(),
                    t.emg.len(),
                    want.eeg_samples,
                    want.emg_samples
                ));
            }
            let gap = (t.eeg.duration_s() - t.emg.duration_s()).abs();
            if gap > DURATION_TOLERANCE_S {
                return fail(format!("trial {}: EEG and EMG durations differ by {gap:.3} s", t.id));
            }
        }
        Ok(())
    }
}

/// Verifies `dir` against its conversion manifest, if it has one.
pub fn check_dataset(dir: &Path, trials: &[Trial]) -> CliResult<()> {
    let path = dir.join(CONVERSION_FILE);
    if !path.exists() {
        return Ok(());
    }
    read_json::<ConversionManifest>(&path)?.verify(trials)
}
