//! The pipeline configuration file (TOML).

use std::path::Path;

use biofuse_core::classify::{LstmConfig, ModelSpec};
use biofuse_core::dsp::WindowFn;
use biofuse_core::erders::ErdErsConfig;
use biofuse_core::features::{EegFeatureConfig, EmgFeatureConfig};
use biofuse_core::fusion::NoiseCase;
use biofuse_core::selection::{BorutaConfig, ForestConfig};
use biofuse_core::synth::GeneratorConfig;
use biofuse_core::{Modality, WindowSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{usage, CliResult};

pub const SEED_ENV: &str = "BIOFUSE_SEED";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub windows: WindowsConfig,
    pub features: FeaturesConfig,
    pub selection: SelectionConfig,
    pub classifier: ClassifierConfig,
    pub fusion: FusionConfig,
    pub erders: ErdersConfig,
    pub synth: GeneratorConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub eeg_channels: Vec<String>,
    pub emg_channels: Vec<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        let names = |m: Modality| m.preset_channels().iter().map(|c| c.to_string()).collect();
        DataConfig { eeg_channels: names(Modality::Eeg), emg_channels: names(Modality::Emg) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowsConfig {
    pub eeg: WindowSpec,
    pub emg: WindowSpec,
}

impl Default for WindowsConfig {
    fn default() -> Self {
        WindowsConfig { eeg: WindowSpec::EEG, emg: WindowSpec::EMG }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesConfig {
    pub eeg: EegFeatures,
    pub emg: EmgFeatures,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EegFeatures {
    pub alpha_band: [f64; 2],
    pub beta_band: [f64; 2],
    pub low_cut_hz: f64,
    pub nfft: usize,
    pub welch_window: WindowFn,
}

impl Default for EegFeatures {
    fn default() -> Self {
        let d = EegFeatureConfig::default();
        EegFeatures {
            alpha_band: d.alpha_band,
            beta_band: d.beta_band,
            low_cut_hz: d.low_cut_hz,
            nfft: d.nfft,
            welch_window: d.welch_window,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmgFeatures {
    pub ar_order: usize,
    pub willison_threshold: Option<f64>,
}

impl Default for EmgFeatures {
    fn default() -> Self {
        let d = EmgFeatureConfig::default();
        EmgFeatures { ar_order: d.ar_order, willison_threshold: d.willison_threshold }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub max_iterations: usize,
    pub alpha: f64,
    pub forest: ForestConfig,
    pub max_rows: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        let d = BorutaConfig::default();
        SelectionConfig { max_iterations: d.max_iterations, alpha: d.alpha, forest: d.forest, max_rows: Some(2000) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub folds: usize,
    pub eeg: ModelSpec,
    pub emg: ModelSpec,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            folds: 10,
            eeg: ModelSpec::Lstm(LstmConfig::default()),
            emg: ModelSpec::Lstm(LstmConfig::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub alpha: f64,
    pub cases: Vec<NoiseCase>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { alpha: 3.0, cases: NoiseCase::ALL.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErdersConfig {
    pub channel: String,
    pub band: [f64; 2],
    pub baseline_s: [f64; 2],
    pub filter_order: usize,
    pub smooth_window_s: f64,
    pub smooth_order: usize,
    pub edge_trim_s: f64,
}

impl Default for ErdersConfig {
    fn default() -> Self {
        let d = ErdErsConfig::default();
        ErdersConfig {
            channel: "C3".into(),
            band: d.band,
            baseline_s: d.baseline_s,
            filter_order: d.filter_order,
            smooth_window_s: d.smooth_window_s,
            smooth_order: d.smooth_order,
            edge_trim_s: d.edge_trim_s,
        }
    }
}

impl PipelineConfig {
    /// Reads `path` (or the defaults), then applies `BIOFUSE_SEED` and an
    /// explicit seed flag, in that order.
    pub fn load(path: Option<&Path>, seed_flag: Option<u64>) -> CliResult<PipelineConfig> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<PipelineConfig>(&text)
                    .map_err(|e| usage(format!("invalid config {}: {}", p.display(), e.message())))?
            }
            None => PipelineConfig::default(),
        };
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = v.trim().parse().map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?;
        }
        if let Some(s) = seed_flag {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        for (name, w) in [("eeg", self.windows.eeg), ("emg", self.windows.emg)] {
            WindowSpec::new(w.width_s, w.overlap_s).map_err(|e| usage(format!("windows.{name}: {e}")))?;
        }
        if self.data.eeg_channels.is_empty() || self.data.emg_channels.is_empty() {
            return Err(usage("data.eeg_channels and data.emg_channels must not be empty"));
        }
        if self.classifier.folds < 2 {
            return Err(usage("classifier.folds must be at least 2"));
        }
        if !(self.fusion.alpha >= 0.0) {
            return Err(usage("fusion.alpha must be non-negative"));
        }
        if self.selection.max_iterations < 10 || !(self.selection.alpha > 0.0 && self.selection.alpha < 1.0) {
            return Err(usage("selection needs max_iterations >= 10 and 0 < alpha < 1"));
        }
        self.generator().validate().map_err(|e| usage(format!("synth: {e}")))?;
        Ok(())
    }

    /// SHA-256 of the effective configuration, seed included.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("configuration serialises");
        hex::encode(Sha256::digest(json))
    }

    pub fn eeg_features(&self) -> EegFeatureConfig {
        let f = &self.features.eeg;
        EegFeatureConfig {
            window: self.windows.eeg,
            alpha_band: f.alpha_band,
            beta_band: f.beta_band,
            low_cut_hz: f.low_cut_hz,
            nfft: f.nfft,
            welch_window: f.welch_window,
            channels: self.data.eeg_channels.clone(),
        }
    }

    pub fn emg_features(&self) -> EmgFeatureConfig {
        EmgFeatureConfig {
            window: self.windows.emg,
            ar_order: self.features.emg.ar_order,
            willison_threshold: self.features.emg.willison_threshold,
            channels: self.data.emg_channels.clone(),
        }
    }

    pub fn boruta(&self) -> BorutaConfig {
        let s = &self.selection;
        BorutaConfig {
            max_iterations: s.max_iterations,
            alpha: s.alpha,
            forest: s.forest,
            max_rows: s.max_rows,
            seed: self.seed,
        }
    }

    pub fn model(&self, m: Modality) -> &ModelSpec {
        match m {
            Modality::Eeg => &self.classifier.eeg,
            Modality::Emg => &self.classifier.emg,
        }
    }

    pub fn erd_ers(&self) -> ErdErsConfig {
        let e = &self.erders;
        ErdErsConfig {
            band: e.band,
            baseline_s: e.baseline_s,
            filter_order: e.filter_order,
            smooth_window_s: e.smooth_window_s,
            smooth_order: e.smooth_order,
            edge_trim_s: e.edge_trim_s,
        }
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig { seed: self.seed, ..self.synth.clone() }
    }
}
