//! Run configuration: every simulation parameter in one TOML file.
//!
//! Missing keys take their defaults, unknown keys are rejected, and
//! [`RunConfig::validate`] checks each parameter against the invariants of
//! the module that owns it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coherence::{self, PulsePairDrive};
use crate::error::{Error, Result};
use crate::fit::FitOptions;
use crate::font::FontSource;
use crate::imaging::{self, DEFAULT_SPECTRUM_POINTS, DEFAULT_SPECTRUM_START, DEFAULT_SPECTRUM_STOP};
use crate::label::{BleachModel, Canvas, LabelConfig, LayerStack};
use crate::photon::{self, ExposureConfig, SpotProfile};
use crate::recognizer::{Charset, ReadSchedule, Sampling, TrialConfig};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MEAN_COUNTS: [f64; 6] = [10.0, 30.0, 60.0, 90.0, 120.0, 150.0];
pub const DEFAULT_SWEEP_TRIALS: usize = 500;
pub const DEFAULT_INITIAL_MOLECULES: usize = 150;
pub const DEFAULT_REPEATED_TRIALS: usize = 250;
pub const DEFAULT_DATASET_COUNT: usize = 1000;
pub const DEFAULT_BACKGROUND_PIXELS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub canvas: CanvasSection,
    pub label: LabelSection,
    pub coherence: CoherenceSection,
    pub drive: DriveSection,
    pub exposure: ExposureSection,
    pub bleach: BleachSection,
    pub spectrum: SpectrumSection,
    pub sweep: SweepSection,
    pub repeated_read: RepeatedReadSection,
    pub dataset: DatasetSection,
    pub fit: FitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanvasSection {
    pub width: u32,
    pub height: u32,
    pub extent_x_um: f64,
    pub extent_y_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    pub font: FontSource,
    pub glyph_scale: u32,
    pub molecule_count: usize,
    pub qd_count: usize,
    pub spot_radii: Vec<u32>,
    pub molecule_peak_rate: f64,
    pub qd_peak_rate: f64,
    pub layer_stack: LayerStack,
    pub qd_bleach_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceSection {
    pub inter_pulse_delay: f64,
    pub molecule_t2: f64,
    pub qd_t2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    pub theta: f64,
    pub mod_frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpotShape {
    #[default]
    UniformDisk,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExposureSection {
    pub duration: f64,
    pub dark_rate: f64,
    pub sampling: Sampling,
    pub spot_profile: SpotShape,
    pub gaussian_sigma_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BleachSection {
    pub alpha: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub background_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mean_counts: Vec<f64>,
    pub trials: usize,
    pub charset: Charset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepeatedReadSection {
    pub cumulative_ends: Vec<f64>,
    pub initial_molecules: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub count: usize,
    pub mean_counts: Vec<f64>,
    pub include_time: bool,
    pub charset: Charset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub free_c: bool,
    pub alpha_p: f64,
    pub classes: usize,
    pub max_iterations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            canvas: CanvasSection::default(),
            label: LabelSection::default(),
            coherence: CoherenceSection::default(),
            drive: DriveSection::default(),
            exposure: ExposureSection::default(),
            bleach: BleachSection::default(),
            spectrum: SpectrumSection::default(),
            sweep: SweepSection::default(),
            repeated_read: RepeatedReadSection::default(),
            dataset: DatasetSection::default(),
            fit: FitSection::default(),
        }
    }
}

impl Default for CanvasSection {
    fn default() -> Self {
        let c = Canvas::default();
        Self {
            width: c.width,
            height: c.height,
            extent_x_um: c.extent_x_um,
            extent_y_um: c.extent_y_um,
        }
    }
}

impl Default for LabelSection {
    fn default() -> Self {
        let l = LabelConfig::default();
        Self {
            font: l.font,
            glyph_scale: l.glyph_scale,
            molecule_count: l.molecule_count,
            qd_count: l.qd_count,
            spot_radii: l.spot_radii,
            molecule_peak_rate: l.molecule_peak_rate,
            qd_peak_rate: l.qd_peak_rate,
            layer_stack: l.layer_stack,
            qd_bleach_rate: l.qd_bleach_rate,
        }
    }
}

impl Default for CoherenceSection {
    fn default() -> Self {
        Self {
            inter_pulse_delay: coherence::DEFAULT_INTER_PULSE_DELAY,
            molecule_t2: coherence::DEFAULT_MOLECULE_T2,
            qd_t2: coherence::DEFAULT_QD_T2,
        }
    }
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_2,
            mod_frequency: coherence::DEFAULT_MOD_FREQUENCY,
        }
    }
}

impl Default for ExposureSection {
    fn default() -> Self {
        Self {
            duration: photon::DEFAULT_EXPOSURE,
            dark_rate: photon::DEFAULT_DARK_RATE,
            sampling: Sampling::default(),
            spot_profile: SpotShape::default(),
            gaussian_sigma_fraction: 0.5,
        }
    }
}

impl Default for BleachSection {
    fn default() -> Self {
        let b = BleachModel::default();
        Self {
            alpha: b.alpha,
            power: b.power,
        }
    }
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            start: DEFAULT_SPECTRUM_START,
            stop: DEFAULT_SPECTRUM_STOP,
            points: DEFAULT_SPECTRUM_POINTS,
            background_pixels: DEFAULT_BACKGROUND_PIXELS,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            mean_counts: DEFAULT_MEAN_COUNTS.to_vec(),
            trials: DEFAULT_SWEEP_TRIALS,
            charset: Charset::Alphanumeric,
        }
    }
}

impl Default for RepeatedReadSection {
    fn default() -> Self {
        Self {
            cumulative_ends: ReadSchedule::default().cumulative_ends,
            initial_molecules: DEFAULT_INITIAL_MOLECULES,
            trials: DEFAULT_REPEATED_TRIALS,
        }
    }
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            count: DEFAULT_DATASET_COUNT,
            mean_counts: DEFAULT_MEAN_COUNTS.to_vec(),
            include_time: false,
            charset: Charset::Alphanumeric,
        }
    }
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitOptions::default();
        Self {
            free_c: f.free_c,
            alpha_p: f.alpha_p_init,
            classes: f.classes,
            max_iterations: f.max_iterations,
        }
    }
}

const COMMENTS: &[(&str, &str)] = &[
    ("seed", "Base seed for forging, sweeps and dataset export."),
    ("canvas.width", "Image size in pixels."),
    ("canvas.extent_x_um", "Physical field of view, µm."),
    ("label.glyph_scale", "Pixels per font cell."),
    ("label.molecule_count", "Coherent molecules placed inside the glyph."),
    ("label.qd_count", "Incoherent quantum dots spread over the whole canvas."),
    ("label.spot_radii", "Spot radius of each emitter is drawn from this list, pixels."),
    ("label.molecule_peak_rate", "Photons/s of a molecule at full excitation."),
    ("label.qd_peak_rate", "Photons/s of a quantum dot at full excitation."),
    ("label.layer_stack", "\"disposable\" bleaches under readout, \"quench_inhibited\" does not."),
    ("label.qd_bleach_rate", "1/s. Quantum dots are persistent by default."),
    ("coherence.inter_pulse_delay", "Delay between the two pulses, s."),
    ("coherence.molecule_t2", "Molecule dephasing time, s."),
    ("coherence.qd_t2", "Quantum dot dephasing time, s."),
    ("drive.theta", "Pulse area of each pulse, rad."),
    ("drive.mod_frequency", "Phase modulation frequency, Hz."),
    ("exposure.duration", "Photon collection time per read, s."),
    ("exposure.dark_rate", "Detector dark counts, photons/s/pixel."),
    ("exposure.sampling", "\"exact\" simulates every photon, \"aggregated\" samples per-pixel sums."),
    ("exposure.spot_profile", "\"uniform_disk\" or \"gaussian\"."),
    ("exposure.gaussian_sigma_fraction", "Gaussian sigma as a fraction of the spot radius."),
    ("bleach.alpha", "Bleach rate k = alpha * power, 1/s."),
    ("spectrum.start", "Frequency grid for `smqc spectrum`, Hz."),
    ("spectrum.background_pixels", "Non-molecule pixels sampled for the background trace."),
    ("sweep.mean_counts", "Mean molecule counts; each trial draws a Poisson count."),
    ("sweep.charset", "\"digits\", \"letters\", \"alphanumeric\" or \"alphanumeric_with_pairs\"."),
    ("repeated_read.cumulative_ends", "Cumulative illumination at the end of each read, s."),
    ("repeated_read.initial_molecules", "Molecules per label in the repeated-read study."),
    ("dataset.mean_counts", "Each image draws its mean molecule count from this list."),
    ("dataset.include_time", "Also write time-domain images."),
    ("fit.free_c", "Fit the accuracy ceiling c instead of holding it at 1."),
    ("fit.alpha_p", "Bleach rate used when the data has no spread in illumination time, 1/s."),
];

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// The defaults as a commented TOML document.
    pub fn default_toml() -> String {
        let body = toml::to_string(&RunConfig::default()).expect("defaults serialize");
        let mut out = String::from("# smqc run configuration. Omitted keys take the values shown here.\n");
        let mut section = String::new();
        for line in body.lines() {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.to_string();
                out.push('\n');
            } else if let Some((key, _)) = line.split_once(" = ") {
                let path = if section.is_empty() {
                    key.to_string()
                } else {
                    format!("{section}.{key}")
                };
                if let Some((_, c)) = COMMENTS.iter().find(|(k, _)| *k == path) {
                    out.push_str(&format!("# {c}\n"));
                }
            }
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    /// Applies `section.key=value`. The value is read as TOML, falling back
    /// to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        let (path, raw) = (path.trim(), raw.trim());
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));

        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut node = &mut root;
        let keys: Vec<&str> = path.split('.').collect();
        for key in &keys[..keys.len() - 1] {
            node = node
                .get_mut(*key)
                .filter(|n| n.is_table())
                .ok_or_else(|| Error::Config(format!("unknown section {key:?} in {path:?}")))?;
        }
        let table = node.as_table_mut().expect("checked above");
        let last = keys[keys.len() - 1];
        if !table.contains_key(last) {
            return Err(Error::Config(format!("unknown key {path:?}")));
        }
        table.insert(last.to_string(), value);
        let updated: RunConfig = root.try_into().map_err(|e| Error::Config(format!("{path}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.trial_config()?.validate()?;
        self.schedule().validate(self.exposure.duration)?;
        let s = &self.spectrum;
        if !(s.start > 0.0 && s.stop >= s.start && s.stop.is_finite()) || s.points == 0 {
            return Err(Error::Config("spectrum grid needs 0 < start <= stop and points >= 1".into()));
        }
        for &m in self.sweep.mean_counts.iter().chain(&self.dataset.mean_counts) {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::domain("mean_n", m, ">= 0"));
            }
        }
        if self.dataset.mean_counts.is_empty() {
            return Err(Error::Config("dataset.mean_counts must not be empty".into()));
        }
        if self.fit.classes < 2 {
            return Err(Error::Config("fit.classes must be at least 2".into()));
        }
        Ok(())
    }

    pub fn canvas(&self) -> Canvas {
        Canvas {
            width: self.canvas.width,
            height: self.canvas.height,
            extent_x_um: self.canvas.extent_x_um,
            extent_y_um: self.canvas.extent_y_um,
        }
    }

    pub fn drive(&self) -> Result<PulsePairDrive> {
        PulsePairDrive::equal_pulses(self.drive.theta, self.coherence.inter_pulse_delay, self.drive.mod_frequency)
    }

    pub fn exposure(&self) -> ExposureConfig {
        ExposureConfig {
            duration: self.exposure.duration,
            dark_rate: self.exposure.dark_rate,
            pulse_area_theta: self.drive.theta,
            spot_profile: match self.exposure.spot_profile {
                SpotShape::UniformDisk => SpotProfile::UniformDisk,
                SpotShape::Gaussian => SpotProfile::Gaussian {
                    sigma_fraction: self.exposure.gaussian_sigma_fraction,
                },
            },
        }
    }

    pub fn label_config(&self) -> Result<LabelConfig> {
        let l = &self.label;
        let delay = self.coherence.inter_pulse_delay;
        Ok(LabelConfig {
            canvas: self.canvas(),
            font: l.font,
            glyph_scale: l.glyph_scale,
            molecule_count: l.molecule_count,
            qd_count: l.qd_count,
            spot_radii: l.spot_radii.clone(),
            molecule_peak_rate: l.molecule_peak_rate,
            qd_peak_rate: l.qd_peak_rate,
            molecule_visibility: coherence::visibility(delay, self.coherence.molecule_t2)?,
            qd_visibility: coherence::visibility(delay, self.coherence.qd_t2)?,
            layer_stack: l.layer_stack,
            bleach: BleachModel::new(self.bleach.alpha, self.bleach.power)?,
            qd_bleach_rate: l.qd_bleach_rate,
        })
    }

    /// Trial configuration for sweeps, with the sweep charset.
    pub fn trial_config(&self) -> Result<TrialConfig> {
        Ok(TrialConfig {
            label: self.label_config()?,
            drive: self.drive()?,
            exposure: self.exposure(),
            charset: self.sweep.charset.clone(),
            sampling: self.exposure.sampling,
        })
    }

    pub fn schedule(&self) -> ReadSchedule {
        ReadSchedule {
            cumulative_ends: self.repeated_read.cumulative_ends.clone(),
        }
    }

    pub fn frequency_grid(&self) -> Vec<f64> {
        imaging::frequency_grid(self.spectrum.start, self.spectrum.stop, self.spectrum.points)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            free_c: self.fit.free_c,
            alpha_p_init: self.fit.alpha_p,
            classes: self.fit.classes,
            max_iterations: self.fit.max_iterations,
        }
    }
}
