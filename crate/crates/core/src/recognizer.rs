//! Template decoder and the Monte-Carlo studies built on it.
//!
//! An image is decoded by a 3×3 median filter, an Otsu threshold and a
//! normalised cross-correlation against a binary template of every class.

use std::cmp::Ordering;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::PulsePairDrive;
use crate::error::{Error, Result};
use crate::font::FontSource;
use crate::imaging::{GrayImage, ModulationAccumulator};
use crate::label::{build_label, rasterize_glyph, Canvas, LabelConfig, LabelState};
use crate::photon::{simulate_read_aggregated, simulate_read_into, ExposureConfig, ReadSummary};
use crate::seed::{derive_seed, rng_from_seed};
use crate::stats::wilson95;

/// The set of classes a decoder chooses between.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Charset {
    Digits,
    Letters,
    /// 0-9 and A-Z.
    #[default]
    Alphanumeric,
    /// 0-9, A-Z and every ordered pair of letters.
    AlphanumericWithPairs,
    Custom(Vec<String>),
}

impl Charset {
    /// Class labels in ascending order, without duplicates.
    pub fn labels(&self) -> Vec<String> {
        let digits = ('0'..='9').map(String::from);
        let letters = ('A'..='Z').map(String::from);
        let mut out: Vec<String> = match self {
            Charset::Digits => digits.collect(),
            Charset::Letters => letters.collect(),
            Charset::Alphanumeric => digits.chain(letters).collect(),
            Charset::AlphanumericWithPairs => {
                let pairs = ('A'..='Z').flat_map(|a| ('A'..='Z').map(move |b| format!("{a}{b}")));
                digits.chain(letters).chain(pairs).collect()
            }
            Charset::Custom(v) => v.clone(),
        };
        out.sort();
        out.dedup();
        out
    }

    /// Smallest built-in charset that contains `text`.
    pub fn for_text(text: &str) -> Charset {
        if text.chars().count() == 2 {
            Charset::AlphanumericWithPairs
        } else {
            Charset::Alphanumeric
        }
    }
}

/// Median of the 3×3 neighbourhood, with the border replicated.
pub fn median3x3(values: &[u8], width: u32, height: u32) -> Vec<u8> {
    let (w, h) = (width as usize, height as usize);
    assert_eq!(values.len(), w * h);
    let mut out = vec![0u8; w * h];
    if w == 0 || h == 0 {
        return out;
    }
    let mut win = [0u8; 9];
    for y in 0..h {
        let rows = [y.saturating_sub(1), y, (y + 1).min(h - 1)];
        for x in 0..w {
            let cols = [x.saturating_sub(1), x, (x + 1).min(w - 1)];
            let mut k = 0;
            let mut any = 0u8;
            for &r in &rows {
                let base = r * w;
                for &c in &cols {
                    win[k] = values[base + c];
                    any |= win[k];
                    k += 1;
                }
            }
            out[y * w + x] = if any == 0 { 0 } else { median9(&mut win) };
        }
    }
    out
}

#[inline]
fn median9(p: &mut [u8; 9]) -> u8 {
    // Paeth's 19-exchange median network.
    macro_rules! s {
        ($a:expr, $b:expr) => {
            if p[$a] > p[$b] {
                p.swap($a, $b);
            }
        };
    }
    s!(1, 2); s!(4, 5); s!(7, 8); s!(0, 1); s!(3, 4); s!(6, 7);
    s!(1, 2); s!(4, 5); s!(7, 8); s!(0, 3); s!(5, 8); s!(4, 7);
    s!(3, 6); s!(1, 4); s!(2, 5); s!(4, 7); s!(4, 2); s!(6, 4);
    s!(4, 2);
    p[4]
}

/// Otsu's threshold: the level `t` maximising the between-class variance of
/// `{v ≤ t}` and `{v > t}`. `None` for a constant image.
pub fn otsu_level(values: &[u8]) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &v in values {
        hist[v as usize] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best: Option<(u8, f64)> = None;
    for t in 0..255usize {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let diff = sum0 / w0 - (sum_all - sum0) / w1;
        let between = w0 * w1 * diff * diff;
        if best.is_none_or(|(_, b)| between > b) {
            best = Some((t as u8, between));
        }
    }
    best.map(|(t, _)| t)
}

/// Packed binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitImage {
    words: Vec<u64>,
    len: usize,
    ones: u64,
}

impl BitImage {
    pub fn from_fn(len: usize, mut on: impl FnMut(usize) -> bool) -> Self {
        let mut words = vec![0u64; len.div_ceil(64)];
        let mut ones = 0;
        for i in 0..len {
            if on(i) {
                words[i / 64] |= 1 << (i % 64);
                ones += 1;
            }
        }
        Self { words, len, ones }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ones(&self) -> u64 {
        self.ones
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn overlap(&self, other: &BitImage) -> u64 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum()
    }

    /// Pearson correlation of the two bit vectors; `None` if either is constant.
    pub fn correlation(&self, other: &BitImage) -> Option<f64> {
        let n = self.len as f64;
        let (a, b) = (self.ones as f64, other.ones as f64);
        let va = a - a * a / n;
        let vb = b - b * b / n;
        if va <= 0.0 || vb <= 0.0 {
            return None;
        }
        let c = self.overlap(other) as f64;
        Some(((c - a * b / n) / (va * vb).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Median-filters and Otsu-binarises a 0..255 image. `None` when nothing
/// survives as foreground or the image is constant.
pub fn binarize(values: &[u8], width: u32, height: u32) -> Option<BitImage> {
    let filtered = median3x3(values, width, height);
    let level = otsu_level(&filtered)?;
    let bits = BitImage::from_fn(filtered.len(), |i| filtered[i] > level);
    (bits.ones() > 0 && (bits.ones() as usize) < bits.len()).then_some(bits)
}

#[derive(Debug, Clone)]
pub struct Template {
    pub label: String,
    pub bits: BitImage,
}

/// Reference masks for every class of a charset at one canvas geometry.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub canvas: Canvas,
    pub font: FontSource,
    pub glyph_scale: u32,
    templates: Vec<Template>,
}

impl TemplateSet {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.templates.iter().map(|t| t.label.as_str())
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&Template> {
        self.templates
            .binary_search_by(|t| t.label.as_str().cmp(label))
            .ok()
            .map(|i| &self.templates[i])
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }
}

/// Rasterises and median-filters every class of `charset`.
pub fn build_templates(charset: &Charset, canvas: Canvas, font: FontSource, glyph_scale: u32) -> Result<TemplateSet> {
    let labels = charset.labels();
    if labels.is_empty() {
        return Err(Error::Config("charset is empty".into()));
    }
    let templates = labels
        .into_par_iter()
        .map(|label| {
            let mask = rasterize_glyph(&label, canvas, font, glyph_scale)?;
            let raster: Vec<u8> = mask.bitmap().iter().map(|&b| if b { 255 } else { 0 }).collect();
            let filtered = median3x3(&raster, canvas.width, canvas.height);
            let bits = BitImage::from_fn(filtered.len(), |i| filtered[i] > 0);
            if bits.ones() == 0 {
                return Err(Error::EmptyMask);
            }
            Ok(Template { label, bits })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TemplateSet {
        canvas,
        font,
        glyph_scale,
        templates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: String,
    /// Normalised cross-correlation, in [−1, 1].
    pub score: f64,
    pub runner_up: Option<String>,
    pub runner_up_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum Decision {
    Decoded(Classification),
    NoSignal,
}

impl Decision {
    pub fn label(&self) -> Option<&str> {
        match self {
            Decision::Decoded(c) => Some(&c.label),
            Decision::NoSignal => None,
        }
    }

    pub fn is(&self, label: &str) -> bool {
        self.label() == Some(label)
    }
}

/// Scores a binary image against every template.
pub fn classify_bits(bits: &BitImage, templates: &TemplateSet) -> Decision {
    let mut best: Option<(usize, f64)> = None;
    let mut second: Option<(usize, f64)> = None;
    for (i, t) in templates.templates.iter().enumerate() {
        let Some(score) = bits.correlation(&t.bits) else { continue };
        // Templates are in label order, so strict comparison keeps the smaller
        // label on ties.
        if best.is_none_or(|(_, b)| score > b) {
            second = best;
            best = Some((i, score));
        } else if second.is_none_or(|(_, s)| score > s) {
            second = Some((i, score));
        }
    }
    match best {
        None => Decision::NoSignal,
        Some((i, score)) => Decision::Decoded(Classification {
            label: templates.templates[i].label.clone(),
            score,
            runner_up: second.map(|(j, _)| templates.templates[j].label.clone()),
            runner_up_score: second.map(|(_, s)| s),
        }),
    }
}

pub fn classify<I: GrayImage + ?Sized>(image: &I, templates: &TemplateSet) -> Result<Decision> {
    if image.width() != templates.canvas.width || image.height() != templates.canvas.height {
        return Err(Error::DimensionMismatch {
            expected_width: templates.canvas.width,
            expected_height: templates.canvas.height,
            actual_width: image.width(),
            actual_height: image.height(),
        });
    }
    Ok(match binarize(image.normalized(), image.width(), image.height()) {
        Some(bits) => classify_bits(&bits, templates),
        None => Decision::NoSignal,
    })
}

/// How photons are generated when only the images are needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Every photon individually.
    Exact,
    /// Per-pixel bulk sums, see [`simulate_read_aggregated`].
    #[default]
    Aggregated,
}

/// Everything a simulated read needs besides the label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialConfig {
    pub label: LabelConfig,
    pub drive: PulsePairDrive,
    pub exposure: ExposureConfig,
    pub charset: Charset,
    #[serde(default)]
    pub sampling: Sampling,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.label.validate()?;
        self.exposure.validate()
    }

    pub fn templates(&self) -> Result<TemplateSet> {
        build_templates(&self.charset, self.label.canvas, self.label.font, self.label.glyph_scale)
    }

    /// One read of `state` into a fresh accumulator.
    pub fn expose<R: Rng + ?Sized>(
        &self,
        state: &mut LabelState,
        rng: &mut R,
    ) -> Result<(ModulationAccumulator, ReadSummary)> {
        let mut acc = ModulationAccumulator::new(state.canvas.width, state.canvas.height);
        let summary = match self.sampling {
            Sampling::Exact => simulate_read_into(state, &self.drive, &self.exposure, rng, &mut acc),
            Sampling::Aggregated => simulate_read_aggregated(state, &self.drive, &self.exposure, rng, &mut acc)?,
        };
        Ok((acc, summary))
    }
}

/// Result of one simulated read of one label.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadOutcome {
    pub summary: ReadSummary,
    pub freq: Decision,
    pub time: Decision,
}

/// Reads `state` once and decodes both images.
pub fn read_and_decode<R: Rng + ?Sized>(
    state: &mut LabelState,
    config: &TrialConfig,
    templates: &TemplateSet,
    rng: &mut R,
) -> Result<ReadOutcome> {
    let (acc, summary) = config.expose(state, rng)?;
    Ok(ReadOutcome {
        summary,
        freq: classify(&acc.freq_image(), templates)?,
        time: classify(&acc.time_image(), templates)?,
    })
}

pub(crate) fn sample_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
    } else {
        0
    }
}

pub(crate) fn pick_glyph<'a, R: Rng + ?Sized>(labels: &'a [String], rng: &mut R) -> &'a str {
    &labels[rng.random_range(0..labels.len())]
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    Ok(())
}

/// Correct decodes out of `trials`, with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Tally {
    pub fn new(correct: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson95(correct, trials);
        Self {
            trials,
            correct,
            accuracy: if trials > 0 { correct as f64 / trials as f64 } else { 0.0 },
            ci_low,
            ci_high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mean_n: f64,
    pub trials: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SweepRow {
    fn from_tally(mean_n: f64, t: Tally) -> Self {
        Self {
            mean_n,
            trials: t.trials,
            correct: t.correct,
            accuracy: t.accuracy,
            ci_low: t.ci_low,
            ci_high: t.ci_high,
        }
    }
}

/// For each mean molecule count: `trials` labels with a uniformly drawn glyph
/// and a Poisson molecule count, one read each, frequency image decoded.
pub fn accuracy_sweep(mean_counts: &[f64], trials: usize, config: &TrialConfig, seed: u64) -> Result<Vec<SweepRow>> {
    check_trials(trials)?;
    config.validate()?;
    for &m in mean_counts {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::domain("mean_n", m, ">= 0"));
        }
    }
    let templates = config.templates()?;
    let labels: Vec<String> = templates.labels().map(String::from).collect();
    mean_counts
        .iter()
        .map(|&mean_n| {
            let row_seed = derive_seed(seed, mean_n.to_bits());
            let correct = (0..trials)
                .into_par_iter()
                .map(|j| {
                    let mut rng = rng_from_seed(derive_seed(row_seed, j as u64));
                    let glyph = pick_glyph(&labels, &mut rng);
                    let mut cfg = config.label.clone();
                    cfg.molecule_count = sample_count(mean_n, &mut rng);
                    let mut label = build_label(glyph, &cfg, rng.random())?;
                    let (acc, _) = config.expose(&mut label, &mut rng)?;
                    Ok(classify(&acc.freq_image(), &templates)?.is(glyph) as u64)
                })
                .sum::<Result<u64>>()?;
            Ok(SweepRow::from_tally(mean_n, Tally::new(correct, trials as u64)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcealmentReport {
    pub frequency: Tally,
    pub time: Tally,
}

impl ConcealmentReport {
    /// Frequency-image accuracy minus time-image accuracy.
    pub fn margin(&self) -> f64 {
        self.frequency.accuracy - self.time.accuracy
    }
}

/// Forges `trials` independent `text` labels with the configured molecule
/// count and decodes both images of one read of each.
pub fn concealment_study(text: &str, trials: usize, config: &TrialConfig, seed: u64) -> Result<ConcealmentReport> {
    check_trials(trials)?;
    config.validate()?;
    let templates = config.templates()?;
    if templates.get(text).is_none() {
        return Err(Error::UnsupportedText(text.to_string()));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng_from_seed(derive_seed(seed, j as u64));
            let mut label = build_label(text, &config.label, rng.random())?;
            let out = read_and_decode(&mut label, config, &templates, &mut rng)?;
            Ok((out.freq.is(text) as u64, out.time.is(text) as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let f = hits.iter().map(|h| h.0).sum();
    let t = hits.iter().map(|h| h.1).sum();
    Ok(ConcealmentReport {
        frequency: Tally::new(f, trials as u64),
        time: Tally::new(t, trials as u64),
    })
}

/// When each read ends, in cumulative illumination time. Between reads the
/// label is illuminated without collecting photons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadSchedule {
    /// s, strictly increasing.
    pub cumulative_ends: Vec<f64>,
}

pub const DEFAULT_READS: usize = 3;
pub const DEFAULT_SCHEDULE_FIRST_END: f64 = 0.1;
pub const DEFAULT_SCHEDULE_LAST_END: f64 = 1.0;

impl Default for ReadSchedule {
    fn default() -> Self {
        Self::linear(DEFAULT_READS, DEFAULT_SCHEDULE_FIRST_END, DEFAULT_SCHEDULE_LAST_END)
    }
}

impl ReadSchedule {
    /// `reads` end points evenly spaced from `first_end` to `last_end`.
    pub fn linear(reads: usize, first_end: f64, last_end: f64) -> Self {
        let cumulative_ends = match reads {
            0 => Vec::new(),
            1 => vec![first_end],
            _ => (0..reads)
                .map(|i| first_end + (last_end - first_end) * i as f64 / (reads - 1) as f64)
                .collect(),
        };
        Self { cumulative_ends }
    }

    /// Back-to-back reads of `duration` each.
    pub fn back_to_back(reads: usize, duration: f64) -> Self {
        Self {
            cumulative_ends: (1..=reads).map(|i| i as f64 * duration).collect(),
        }
    }

    pub fn reads(&self) -> usize {
        self.cumulative_ends.len()
    }

    pub fn validate(&self, duration: f64) -> Result<()> {
        if self.cumulative_ends.is_empty() {
            return Err(Error::Config("read schedule needs at least one read".into()));
        }
        let mut previous = 0.0;
        for &end in &self.cumulative_ends {
            if !(end - previous >= duration * (1.0 - 1e-9)) {
                return Err(Error::Config(format!(
                    "read ending at {end} s leaves less than one {duration} s exposure after {previous} s"
                )));
            }
            previous = end;
        }
        Ok(())
    }

    /// Extra bleach-only illumination needed before read `read_index`
    /// (1-based) when `illuminated` seconds have already elapsed.
    pub fn gap_before(&self, read_index: usize, illuminated: f64, duration: f64) -> f64 {
        match self.cumulative_ends.get(read_index.wrapping_sub(1)) {
            Some(&end) => (end - duration - illuminated).max(0.0),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatedReadRow {
    pub read_index: u32,
    /// Mean molecules alive at the start of the read.
    pub survivors: f64,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Forges `trials` labels (uniform glyph, configured molecule count) and
/// reads each repeatedly on the schedule; every read decodes the frequency
/// image of the same, progressively bleached, label.
pub fn repeated_read_trial(
    config: &TrialConfig,
    schedule: &ReadSchedule,
    trials: usize,
    seed: u64,
) -> Result<Vec<RepeatedReadRow>> {
    check_trials(trials)?;
    config.validate()?;
    schedule.validate(config.exposure.duration)?;
    let templates = config.templates()?;
    let labels: Vec<String> = templates.labels().map(String::from).collect();
    let reads = schedule.reads();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng_from_seed(derive_seed(seed, j as u64));
            let glyph = pick_glyph(&labels, &mut rng).to_string();
            let mut label = build_label(&glyph, &config.label, rng.random())?;
            let mut out = Vec::with_capacity(reads);
            for r in 1..=reads {
                let gap = schedule.gap_before(r, label.illumination_time, config.exposure.duration);
                label.bleach(gap, &mut rng);
                let survivors = label.alive_molecules();
                let (acc, _) = config.expose(&mut label, &mut rng)?;
                out.push((survivors, classify(&acc.freq_image(), &templates)?.is(&glyph)));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((0..reads)
        .map(|r| {
            let survivors = per_trial.iter().map(|t| t[r].0 as f64).sum::<f64>() / trials as f64;
            let correct = per_trial.iter().filter(|t| t[r].1).count() as u64;
            let tally = Tally::new(correct, trials as u64);
            RepeatedReadRow {
                read_index: r as u32 + 1,
                survivors,
                accuracy: tally.accuracy,
                ci_low: tally.ci_low,
                ci_high: tally.ci_high,
            }
        })
        .collect())
}

/// Linear interpolation of accuracy at `mean_n` from sweep rows.
pub fn interpolate_accuracy(rows: &[SweepRow], mean_n: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.mean_n, r.accuracy)).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    pts.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        (x0 <= mean_n && mean_n <= x1 && x1 > x0).then(|| y0 + (y1 - y0) * (mean_n - x0) / (x1 - x0))
    })
}

/// Whether accuracy never drops between consecutive rows by more than their
/// 95% intervals allow.
pub fn monotone_within_ci(rows: &[SweepRow]) -> bool {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.mean_n.partial_cmp(&b.mean_n).unwrap_or(Ordering::Equal));
    sorted.windows(2).all(|w| w[1].accuracy >= w[0].accuracy || w[1].ci_high >= w[0].ci_low)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{FrequencyDomainImage, TimeDomainImage};
    use proptest::prelude::*;
    use rand::Rng;

    fn small_canvas() -> (Canvas, u32) {
        (Canvas::new(64, 64), 6)
    }

    fn small_templates() -> TemplateSet {
        let (canvas, scale) = small_canvas();
        build_templates(&Charset::Alphanumeric, canvas, FontSource::Builtin5x7, scale).unwrap()
    }

    fn template_image(t: &TemplateSet, label: &str) -> TimeDomainImage {
        let mask = rasterize_glyph(label, t.canvas, t.font, t.glyph_scale).unwrap();
        let counts = mask.bitmap().iter().map(|&b| b as u32 * 7).collect();
        TimeDomainImage::from_counts(t.canvas.width, t.canvas.height, counts)
    }

    #[test]
    fn charset_sizes() {
        assert_eq!(Charset::Letters.labels().len(), 26);
        assert_eq!(Charset::Alphanumeric.labels().len(), 36);
        assert_eq!(Charset::AlphanumericWithPairs.labels().len(), 26 + 10 + 26 * 26);
        assert_eq!(Charset::Custom(vec!["B".into(), "A".into(), "B".into()]).labels(), vec!["A", "B"]);
        assert_eq!(Charset::for_text("QC"), Charset::AlphanumericWithPairs);
    }

    #[test]
    fn median_basics() {
        let mut img = vec![0u8; 25];
        img[12] = 200;
        assert!(median3x3(&img, 5, 5).iter().all(|&v| v == 0));
        let flat = vec![9u8; 12];
        assert_eq!(median3x3(&flat, 4, 3), flat);
        let mut p = [5, 1, 9, 3, 7, 2, 8, 4, 6];
        assert_eq!(median9(&mut p), 5);
    }

    proptest! {
        #[test]
        fn median_network_matches_sort(v in prop::array::uniform9(any::<u8>())) {
            let mut sorted = v;
            sorted.sort();
            let mut p = v;
            prop_assert_eq!(median9(&mut p), sorted[4]);
        }

        #[test]
        fn classification_ignores_positive_scaling(seed in 0u64..1000, k in 1u32..40) {
            let t = small_templates();
            let mut rng = rng_from_seed(seed);
            let counts: Vec<u32> = (0..64 * 64).map(|_| rng.random_range(0..30)).collect();
            let a = TimeDomainImage::from_counts(64, 64, counts.clone());
            let b = TimeDomainImage::from_counts(64, 64, counts.iter().map(|c| c * k).collect());
            prop_assert_eq!(classify(&a, &t).unwrap(), classify(&b, &t).unwrap());
            let raw: Vec<f64> = counts.iter().map(|&c| c as f64 * 0.37).collect();
            let f1 = FrequencyDomainImage::from_magnitudes(64, 64, raw.clone());
            let f2 = FrequencyDomainImage::from_magnitudes(64, 64, raw.iter().map(|v| v * k as f64).collect());
            prop_assert_eq!(classify(&f1, &t).unwrap(), classify(&f2, &t).unwrap());
        }
    }

    #[test]
    fn otsu_splits_two_levels() {
        let mut v = vec![10u8; 50];
        v.extend(vec![200u8; 50]);
        let t = otsu_level(&v).unwrap();
        assert!((10..200).contains(&t));
        assert_eq!(otsu_level(&[3u8; 10]), None);
    }

    #[test]
    fn templates_classify_as_themselves() {
        let t = small_templates();
        assert_eq!(t.len(), 36);
        for label in Charset::Alphanumeric.labels() {
            match classify(&template_image(&t, &label), &t).unwrap() {
                Decision::Decoded(c) => {
                    assert_eq!(c.label, label);
                    assert!((c.score - 1.0).abs() < 1e-12);
                    assert!(c.runner_up_score.unwrap() <= c.score);
                }
                Decision::NoSignal => panic!("no signal for {label}"),
            }
        }
    }

    #[test]
    fn templates_are_deterministic() {
        let a = small_templates();
        let b = small_templates();
        for (x, y) in a.templates().iter().zip(b.templates()) {
            assert_eq!(x.label, y.label);
            assert_eq!(x.bits, y.bits);
        }
        let (canvas, scale) = small_canvas();
        assert!(build_templates(&Charset::Custom(vec!["a".into()]), canvas, FontSource::Builtin5x7, scale).is_err());
    }

    #[test]
    fn blank_images_have_no_signal() {
        let t = small_templates();
        let zero = TimeDomainImage::from_counts(64, 64, vec![0; 4096]);
        assert_eq!(classify(&zero, &t).unwrap(), Decision::NoSignal);
        let flat = FrequencyDomainImage::from_magnitudes(64, 64, vec![3.0; 4096]);
        assert_eq!(classify(&flat, &t).unwrap(), Decision::NoSignal);
        let wrong = TimeDomainImage::from_counts(32, 32, vec![0; 1024]);
        assert!(classify(&wrong, &t).is_err());
    }

    #[test]
    fn classification_is_deterministic() {
        let t = small_templates();
        let mut rng = rng_from_seed(11);
        let counts: Vec<u32> = (0..4096).map(|_| rng.random_range(0..100)).collect();
        let img = TimeDomainImage::from_counts(64, 64, counts);
        assert_eq!(classify(&img, &t).unwrap(), classify(&img, &t).unwrap());
    }

    #[test]
    fn ties_go_to_the_smaller_label() {
        let canvas = Canvas::new(8, 8);
        let bits = BitImage::from_fn(64, |i| i < 16);
        let set = TemplateSet {
            canvas,
            font: FontSource::Builtin5x7,
            glyph_scale: 1,
            templates: vec![
                Template {
                    label: "A".into(),
                    bits: bits.clone(),
                },
                Template {
                    label: "B".into(),
                    bits: bits.clone(),
                },
            ],
        };
        let d = classify_bits(&bits, &set);
        assert_eq!(d.label(), Some("A"));
    }

    #[test]
    fn schedule_gaps() {
        let s = ReadSchedule::default();
        assert_eq!(s.reads(), 3);
        assert!((s.cumulative_ends[1] - 0.55).abs() < 1e-12);
        assert!(s.validate(0.1).is_ok());
        assert_eq!(s.gap_before(1, 0.0, 0.1), 0.0);
        assert!((s.gap_before(2, 0.1, 0.1) - 0.35).abs() < 1e-12);
        assert!((s.gap_before(3, 0.55, 0.1) - 0.35).abs() < 1e-12);
        assert_eq!(s.gap_before(4, 1.0, 0.1), 0.0);
        assert!(ReadSchedule::linear(3, 0.1, 0.2).validate(0.1).is_err());
        assert!(ReadSchedule::back_to_back(3, 0.1).validate(0.1).is_ok());
    }

    #[test]
    fn interpolation_and_monotonicity() {
        let row = |m, c| SweepRow::from_tally(m, Tally::new(c, 100));
        let rows = vec![row(30.0, 90), row(60.0, 99)];
        assert!((interpolate_accuracy(&rows, 50.0).unwrap() - 0.96).abs() < 1e-12);
        assert_eq!(interpolate_accuracy(&rows, 70.0), None);
        assert!(monotone_within_ci(&rows));
        assert!(!monotone_within_ci(&[row(10.0, 99), row(20.0, 10)]));
        assert!(monotone_within_ci(&[row(10.0, 99), row(20.0, 97)]));
    }

    fn small_trial_config() -> TrialConfig {
        let (canvas, scale) = small_canvas();
        TrialConfig {
            label: LabelConfig {
                canvas,
                glyph_scale: scale,
                molecule_count: 30,
                qd_count: 10,
                spot_radii: vec![1, 2],
                molecule_peak_rate: 2e4,
                qd_peak_rate: 8e4,
                ..LabelConfig::default()
            },
            ..TrialConfig::default()
        }
    }

    #[test]
    fn sweeps_are_seed_deterministic() {
        let cfg = small_trial_config();
        let a = accuracy_sweep(&[5.0, 30.0], 20, &cfg, 3).unwrap();
        let b = accuracy_sweep(&[5.0, 30.0], 20, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(accuracy_sweep(&[5.0], 0, &cfg, 3).is_err());
        // rows do not depend on their neighbours
        let c = accuracy_sweep(&[30.0], 20, &cfg, 3).unwrap();
        assert_eq!(c[0], a[1]);
    }

    #[test]
    fn no_molecules_decodes_at_chance() {
        // With no signal only the QDs and dark counts remain; the decoder still
        // returns a class (or none), and accuracy must be consistent with 1/36.
        let cfg = small_trial_config();
        let rows = accuracy_sweep(&[0.0], 300, &cfg, 5).unwrap();
        let chance: f64 = 1.0 / 36.0;
        let r = rows[0];
        let sd = (chance * (1.0 - chance) / 300.0).sqrt();
        assert!(r.accuracy <= chance + 3.0 * sd, "{r:?}");
    }

    #[test]
    fn reusable_labels_keep_their_molecules() {
        let mut cfg = small_trial_config();
        cfg.label.layer_stack = crate::label::LayerStack::QuenchInhibited;
        let rows = repeated_read_trial(&cfg, &ReadSchedule::default(), 10, 1).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.survivors == 30.0));
    }
}
