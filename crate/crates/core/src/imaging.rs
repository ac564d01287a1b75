//! Frequency-domain imaging.
//!
//! The modulation factor of a pixel is `f(ω) = |Σₙ e^(−iωtₙ)|` over its photon
//! arrival times. Coherent emitters follow the pulse-pair phase and build up
//! `f ≈ V·N/2` at the modulation frequency, while incoherent light only
//! random-walks to `~√N`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::GlyphMask;
use crate::photon::{Arrival, BulkPhotonSink, PhotonSink, PhotonStream};

pub const DEFAULT_SPECTRUM_START: f64 = 500.0;
pub const DEFAULT_SPECTRUM_STOP: f64 = 1_500.0;
pub const DEFAULT_SPECTRUM_POINTS: usize = 101;
/// Fewest modulation periods for which `2f/N` is accepted as a visibility estimate.
pub const MIN_ESTIMATION_PERIODS: f64 = 10.0;

/// `Σ e^(−iωt)` as (re, im).
pub fn phasor_sum(times: &[f64], omega: f64) -> (f64, f64) {
    times.iter().fold((0.0, 0.0), |(re, im), &t| {
        let (s, c) = (omega * t).sin_cos();
        (re + c, im - s)
    })
}

/// `|Σ e^(−iωt)|`. Zero for an empty list.
pub fn dft_magnitude(times: &[f64], omega: f64) -> f64 {
    let (re, im) = phasor_sum(times, omega);
    re.hypot(im)
}

/// `count` frequencies evenly spaced over `[start, stop]`, Hz.
pub fn frequency_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

pub fn default_frequency_grid() -> Vec<f64> {
    frequency_grid(DEFAULT_SPECTRUM_START, DEFAULT_SPECTRUM_STOP, DEFAULT_SPECTRUM_POINTS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpectrum {
    /// Hz
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl ModulationSpectrum {
    /// Magnitudes divided by their maximum; all zeros stay zero.
    pub fn normalized(&self) -> Vec<f64> {
        let max = self.magnitudes.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            self.magnitudes.iter().map(|m| m / max).collect()
        } else {
            vec![0.0; self.magnitudes.len()]
        }
    }

    /// Frequency of the largest magnitude (first one on ties).
    pub fn peak_frequency(&self) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for (&f, &m) in self.frequencies.iter().zip(&self.magnitudes) {
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((f, m));
            }
        }
        best.map(|(f, _)| f)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitudes.iter().copied().fold(0.0, f64::max)
    }
}

/// Evaluates `f(2π·ν)` for every `ν` in `grid`.
pub fn modulation_spectrum(times: &[f64], grid: &[f64]) -> Result<ModulationSpectrum> {
    if grid.is_empty() {
        return Err(Error::InsufficientData("frequency grid is empty".into()));
    }
    let magnitudes = match uniform_step(grid) {
        Some(step) => uniform_grid_magnitudes(times, grid[0], step, grid.len()),
        None => grid.par_iter().map(|&nu| dft_magnitude(times, TAU * nu)).collect(),
    };
    Ok(ModulationSpectrum {
        frequencies: grid.to_vec(),
        magnitudes,
    })
}

fn uniform_step(grid: &[f64]) -> Option<f64> {
    if grid.len() < 3 {
        return None;
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let tol = 1e-9 * grid[0].abs().max(grid[grid.len() - 1].abs());
    (step > 0.0 && grid.iter().enumerate().all(|(k, &nu)| (nu - (grid[0] + step * k as f64)).abs() <= tol))
        .then_some(step)
}

const RESYNC: usize = 32;
const TIME_CHUNK: usize = 4096;

/// Magnitudes on `start + k·step` by rotating each photon's phasor from one
/// grid point to the next, re-evaluated exactly every `RESYNC` points.
fn uniform_grid_magnitudes(times: &[f64], start: f64, step: f64, count: usize) -> Vec<f64> {
    let sums = times
        .par_chunks(TIME_CHUNK)
        .map(|chunk| {
            let mut acc = vec![(0.0, 0.0); count];
            for &t in chunk {
                let (ds, dc) = (TAU * step * t).sin_cos();
                let (mut re, mut im) = (0.0, 0.0);
                for (k, slot) in acc.iter_mut().enumerate() {
                    if k % RESYNC == 0 {
                        let (s, c) = (TAU * (start + step * k as f64) * t).sin_cos();
                        (re, im) = (c, -s);
                    } else {
                        (re, im) = (re * dc + im * ds, im * dc - re * ds);
                    }
                    slot.0 += re;
                    slot.1 += im;
                }
            }
            acc
        })
        .reduce(
            || vec![(0.0, 0.0); count],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.0 += y.0;
                    x.1 += y.1;
                }
                a
            },
        );
    sums.into_iter().map(|(re, im)| f64::hypot(re, im)).collect()
}

/// Linear max-scaling to 0..=255 with rounding. An all-zero input maps to zeros.
pub fn normalize_to_u8(raw: &[f64]) -> Vec<u8> {
    let max = raw.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return vec![0; raw.len()];
    }
    // (v·255)/max rounds the exact quotient, so rescaled inputs give identical bytes.
    raw.iter().map(|&v| (v.max(0.0) * 255.0 / max).round() as u8).collect()
}

/// Read-only access shared by both image kinds.
pub trait GrayImage {
    fn width(&self) -> u32;
    fn height(&self) -> u32;
    /// The 0..255 view.
    fn normalized(&self) -> &[u8];
    /// Un-normalised per-pixel value.
    fn raw(&self, index: usize) -> f64;
}

/// Wide-field photon-count image.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainImage {
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
    pub values: Vec<u8>,
}

impl TimeDomainImage {
    pub fn from_counts(width: u32, height: u32, counts: Vec<u32>) -> Self {
        let raw: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let values = normalize_to_u8(&raw);
        Self {
            width,
            height,
            counts,
            values,
        }
    }
}

impl GrayImage for TimeDomainImage {
    fn width(&self) -> u32 {
        self.width
    }
    fn height(&self) -> u32 {
        self.height
    }
    fn normalized(&self) -> &[u8] {
        &self.values
    }
    fn raw(&self, index: usize) -> f64 {
        self.counts[index] as f64
    }
}

/// Per-pixel modulation-factor image.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDomainImage {
    pub width: u32,
    pub height: u32,
    pub magnitudes: Vec<f64>,
    pub values: Vec<u8>,
}

impl FrequencyDomainImage {
    pub fn from_magnitudes(width: u32, height: u32, magnitudes: Vec<f64>) -> Self {
        let values = normalize_to_u8(&magnitudes);
        Self {
            width,
            height,
            magnitudes,
            values,
        }
    }
}

impl GrayImage for FrequencyDomainImage {
    fn width(&self) -> u32 {
        self.width
    }
    fn height(&self) -> u32 {
        self.height
    }
    fn normalized(&self) -> &[u8] {
        &self.values
    }
    fn raw(&self, index: usize) -> f64 {
        self.magnitudes[index]
    }
}

pub fn render_time_image(stream: &PhotonStream) -> TimeDomainImage {
    let mut counts = vec![0u32; stream.width as usize * stream.height as usize];
    for (p, ts) in stream.iter() {
        counts[p as usize] = ts.len() as u32;
    }
    TimeDomainImage::from_counts(stream.width, stream.height, counts)
}

pub fn render_freq_image(stream: &PhotonStream, omega_mod: f64) -> Result<FrequencyDomainImage> {
    if !(omega_mod > 0.0 && omega_mod.is_finite()) {
        return Err(Error::domain("omega_mod", omega_mod, "> 0"));
    }
    let pixels: Vec<(u32, &[f64])> = stream.iter().collect();
    let mags: Vec<(u32, f64)> = pixels
        .par_iter()
        .map(|&(p, ts)| (p, dft_magnitude(ts, omega_mod)))
        .collect();
    let mut magnitudes = vec![0.0; stream.width as usize * stream.height as usize];
    for (p, m) in mags {
        magnitudes[p as usize] = m;
    }
    Ok(FrequencyDomainImage::from_magnitudes(stream.width, stream.height, magnitudes))
}

/// Streaming alternative to [`PhotonStream`] when only the images are needed:
/// keeps a count and the modulation-frequency phasor sum per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationAccumulator {
    pub width: u32,
    pub height: u32,
    counts: Vec<u32>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ModulationAccumulator {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            counts: vec![0; n],
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    pub fn count(&self, pixel: u32) -> u32 {
        self.counts[pixel as usize]
    }

    pub fn phasor(&self, pixel: u32) -> (f64, f64) {
        (self.re[pixel as usize], self.im[pixel as usize])
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn time_image(&self) -> TimeDomainImage {
        TimeDomainImage::from_counts(self.width, self.height, self.counts.clone())
    }

    pub fn freq_image(&self) -> FrequencyDomainImage {
        let mags = self.re.iter().zip(&self.im).map(|(r, i)| r.hypot(*i)).collect();
        FrequencyDomainImage::from_magnitudes(self.width, self.height, mags)
    }
}

impl PhotonSink for ModulationAccumulator {
    #[inline]
    fn record(&mut self, pixel: u32, arrival: &Arrival) {
        let (re, im) = arrival.modulation_phasor();
        let p = pixel as usize;
        self.counts[p] += 1;
        self.re[p] += re;
        self.im[p] += im;
    }
}

impl BulkPhotonSink for ModulationAccumulator {
    fn record_bulk(&mut self, pixel: u32, count: u64, phasor: (f64, f64)) {
        let p = pixel as usize;
        self.counts[p] += count as u32;
        self.re[p] += phasor.0;
        self.im[p] += phasor.1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEstimate {
    pub value: f64,
    /// `2f/N` fell outside [0, 1] and was clamped.
    pub clamped: bool,
}

/// `V̂ = 2f/N`, valid when the exposure spans at least
/// [`MIN_ESTIMATION_PERIODS`] modulation periods.
pub fn estimate_visibility(magnitude: f64, photons: u64, periods: f64) -> Result<VisibilityEstimate> {
    if photons == 0 {
        return Err(Error::InsufficientData("no photons to estimate visibility from".into()));
    }
    if !(periods >= MIN_ESTIMATION_PERIODS) {
        return Err(Error::domain("modulation periods", periods, ">= 10"));
    }
    if !(magnitude >= 0.0) {
        return Err(Error::domain("magnitude", magnitude, ">= 0"));
    }
    let v = 2.0 * magnitude / photons as f64;
    Ok(VisibilityEstimate {
        value: v.min(1.0),
        clamped: v > 1.0,
    })
}

/// Mean raw value on the mask over mean raw value off it. Infinite when the
/// off-mask mean is zero.
pub fn contrast_ratio<I: GrayImage + ?Sized>(image: &I, mask: &GlyphMask) -> Result<f64> {
    let n = image.width() as usize * image.height() as usize;
    if mask.canvas.width != image.width() || mask.canvas.height != image.height() {
        return Err(Error::DimensionMismatch {
            expected_width: mask.canvas.width,
            expected_height: mask.canvas.height,
            actual_width: image.width(),
            actual_height: image.height(),
        });
    }
    let on_count = mask.area();
    if on_count == 0 {
        return Err(Error::DegenerateMask("mask is empty"));
    }
    if on_count == n {
        return Err(Error::DegenerateMask("mask covers the whole image"));
    }
    let bitmap = mask.bitmap();
    let (mut on, mut off) = (0.0, 0.0);
    for (i, &inside) in bitmap.iter().enumerate() {
        if inside {
            on += image.raw(i);
        } else {
            off += image.raw(i);
        }
    }
    let on_mean = on / on_count as f64;
    let off_mean = off / (n - on_count) as f64;
    Ok(if off_mean > 0.0 {
        on_mean / off_mean
    } else if on_mean > 0.0 {
        f64::INFINITY
    } else {
        1.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::PulsePairDrive;
    use crate::label::{Canvas, Emitter, EmitterKind, Pixel};
    use crate::photon::{simulate_emitter_into, simulate_emitter_stream, ExposureConfig};
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn source(v: f64, peak: f64) -> Emitter {
        Emitter {
            center: Pixel { x: 8, y: 8 },
            spot_radius: 3,
            kind: if v > 0.0 {
                EmitterKind::CoherentMolecule
            } else {
                EmitterKind::IncoherentQd
            },
            peak_rate: peak,
            visibility: v,
            alive: true,
            bleach_susceptible: false,
        }
    }

    /// Pooled arrival times of one emitter (all pixels).
    fn stream_times(v: f64, photons: f64, seed: u64) -> Vec<f64> {
        let exp = ExposureConfig::default();
        let peak = 2.0 * photons / exp.duration;
        let (p, _) = simulate_emitter_stream(
            &mut source(v, peak),
            0.0,
            &Canvas::new(16, 16),
            &PulsePairDrive::default(),
            &exp,
            &mut rng_from_seed(seed),
        );
        p.into_iter().map(|(t, _)| t).collect()
    }

    #[test]
    fn trivial_magnitudes() {
        assert_eq!(dft_magnitude(&[], 3.0), 0.0);
        assert!((dft_magnitude(&[0.123], 17.0) - 1.0).abs() < 1e-15);
        let w = TAU * 1000.0;
        assert!(dft_magnitude(&[0.0, PI / w], w) < 1e-12);
    }

    #[test]
    fn coherent_stream_magnitude_is_half_v_n() {
        let times = stream_times(0.8, 1e5, 5);
        let n = times.len() as f64;
        let f = dft_magnitude(&times, TAU * 1000.0);
        assert!((f / (0.4 * n) - 1.0).abs() < 0.02, "f/N = {}", f / n);
    }

    #[test]
    fn visibility_estimates_recover_v() {
        for seed in 0..20 {
            let times = stream_times(0.9, 1e5, 100 + seed);
            let f = dft_magnitude(&times, TAU * 1000.0);
            let est = estimate_visibility(f, times.len() as u64, 100.0).unwrap();
            assert!((est.value - 0.9).abs() <= 0.02, "seed {seed}: {}", est.value);
        }
    }

    #[test]
    fn estimator_edges() {
        assert_eq!(estimate_visibility(50.0, 100, 100.0).unwrap().value, 1.0);
        assert_eq!(estimate_visibility(0.0, 100, 100.0).unwrap().value, 0.0);
        let c = estimate_visibility(60.0, 100, 100.0).unwrap();
        assert!(c.clamped && c.value == 1.0);
        assert!(estimate_visibility(1.0, 0, 100.0).is_err());
        assert!(estimate_visibility(1.0, 10, 5.0).is_err());
    }

    #[test]
    fn spectrum_peaks_at_the_modulation_frequency() {
        let times = stream_times(0.9, 2e4, 3);
        let s = modulation_spectrum(&times, &frequency_grid(500.0, 2000.0, 151)).unwrap();
        assert_eq!(s.peak_frequency(), Some(1000.0));
        assert!(modulation_spectrum(&times, &[]).is_err());
        let empty = modulation_spectrum(&[], &default_frequency_grid()).unwrap();
        assert!(empty.magnitudes.iter().all(|&m| m == 0.0));
        assert_eq!(empty.normalized(), vec![0.0; 101]);
    }

    #[test]
    fn uniform_grid_recurrence_matches_direct_evaluation() {
        let mut rng = rng_from_seed(77);
        let times: Vec<f64> = (0..5000).map(|_| rand::Rng::random::<f64>(&mut rng) * 0.1).collect();
        for grid in [default_frequency_grid(), frequency_grid(10.0, 5000.0, 400)] {
            let fast = modulation_spectrum(&times, &grid).unwrap();
            for (&nu, &m) in grid.iter().zip(&fast.magnitudes) {
                assert!((m - dft_magnitude(&times, TAU * nu)).abs() < 1e-9, "{nu}");
            }
        }
        let irregular = [900.0, 1000.0, 1003.0, 1400.0];
        let s = modulation_spectrum(&times, &irregular).unwrap();
        assert_eq!(s.magnitudes[1], dft_magnitude(&times, TAU * 1000.0));
    }

    #[test]
    fn dark_spectrum_stays_below_three_root_n() {
        let canvas = Canvas::new(32, 32);
        let times: Vec<f64> = crate::photon::dark_counts(&canvas, 100.0, 0.1, 1000.0, &mut rng_from_seed(2))
            .into_iter()
            .map(|(t, _)| t)
            .collect();
        let bound = 3.0 * (times.len() as f64).sqrt();
        let s = modulation_spectrum(&times, &default_frequency_grid()).unwrap();
        assert!(s.max_magnitude() <= bound, "{} > {bound}", s.max_magnitude());
    }

    #[test]
    fn off_peak_is_suppressed() {
        // Linewidth is 1/T = 10 Hz; probe 3 kHz and 1.05 kHz.
        let mut hits = 0;
        let trials = 200;
        for seed in 0..trials {
            let times = stream_times(0.9, 5e3, 1000 + seed);
            let bound = 3.0 * (times.len() as f64).sqrt();
            if dft_magnitude(&times, TAU * 1050.0) <= bound && dft_magnitude(&times, TAU * 3000.0) <= bound {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.99 * trials as f64, "{hits}/{trials}");
    }

    #[test]
    fn incoherent_f_over_n_shrinks_like_root_n() {
        // E|Σ random unit phasors| = √(πN)/2, sd ≈ 0.52√N.
        for &n in &[1e3, 1e4, 1e5] {
            let times = stream_times(0.0, n, n as u64);
            let m = times.len() as f64;
            let f = dft_magnitude(&times, TAU * 1000.0);
            assert!(f <= (PI * m).sqrt() / 2.0 + 3.0 * 0.52 * m.sqrt(), "N={n}: f={f}");
        }
    }

    #[test]
    fn coherent_error_shrinks_like_root_n() {
        // sd(2f/N) ≈ √((2 − V²)/N); the mean over 10 seeds must sit within 3
        // standard errors of V at every N.
        let v = 0.6;
        for &n in &[1e3, 1e4, 1e5] {
            let seeds = 10;
            let mean = (0..seeds)
                .map(|s| {
                    let times = stream_times(v, n, 7 + s + n as u64);
                    2.0 * dft_magnitude(&times, TAU * 1000.0) / times.len() as f64
                })
                .sum::<f64>()
                / seeds as f64;
            let se = ((2.0 - v * v) / n).sqrt() / (seeds as f64).sqrt();
            assert!((mean - v).abs() <= 3.0 * se, "N={n}: mean V̂={mean}");
        }
    }

    #[test]
    fn time_image_normalisation() {
        let mut s = PhotonStream::new(4, 4, 0.1, 1000.0);
        assert!(render_time_image(&s).values.iter().all(|&v| v == 0));
        s.push(5, 0.01);
        s.push(5, 0.02);
        let img = render_time_image(&s);
        assert_eq!(img.values[5], 255);
        assert_eq!(img.values.iter().filter(|&&v| v != 0).count(), 1);
        let f = render_freq_image(&PhotonStream::new(4, 4, 0.1, 1000.0), 1.0).unwrap();
        assert!(f.values.iter().all(|&v| v == 0));
        assert!(render_freq_image(&s, 0.0).is_err());
    }

    #[test]
    fn accumulator_matches_stream_route() {
        let canvas = Canvas::new(16, 16);
        let drive = PulsePairDrive::default();
        let exp = ExposureConfig::default();
        let mut e1 = source(0.7, 4e4);
        let mut e2 = e1.clone();
        let mut acc = ModulationAccumulator::new(16, 16);
        let mut stream = PhotonStream::new(16, 16, exp.duration, drive.mod_frequency);
        simulate_emitter_into(&mut e1, 0.0, &canvas, &drive, &exp, &mut rng_from_seed(9), &mut acc);
        simulate_emitter_into(&mut e2, 0.0, &canvas, &drive, &exp, &mut rng_from_seed(9), &mut stream);
        stream.finish();
        let a = acc.freq_image();
        let b = render_freq_image(&stream, drive.omega_mod()).unwrap();
        for i in 0..256 {
            assert!((a.magnitudes[i] - b.magnitudes[i]).abs() < 1e-6 * (1.0 + b.magnitudes[i]));
        }
        assert_eq!(acc.time_image(), render_time_image(&stream));
    }

    /// Pooled per-pixel (count, magnitude) moments of one emitter over many seeds.
    fn pixel_moments(v: f64, aggregated: bool, bleach: f64) -> [f64; 4] {
        let canvas = Canvas::new(16, 16);
        let drive = PulsePairDrive::default();
        let exp = ExposureConfig::default();
        let (mut n1, mut n2, mut f1, mut f2, mut k) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for seed in 0..300 {
            let mut e = source(v, 1.2e5);
            let mut acc = ModulationAccumulator::new(16, 16);
            let mut rng = rng_from_seed(seed);
            if aggregated {
                crate::photon::simulate_emitter_aggregated(&mut e, bleach, &canvas, &drive, &exp, &mut rng, &mut acc)
                    .unwrap();
            } else {
                simulate_emitter_into(&mut e, bleach, &canvas, &drive, &exp, &mut rng, &mut acc);
            }
            let img = acc.freq_image();
            for p in e.spot_pixels(&canvas) {
                let (c, m) = (acc.count(p) as f64, img.magnitudes[p as usize]);
                n1 += c;
                n2 += c * c;
                f1 += m;
                f2 += m * m;
                k += 1.0;
            }
        }
        let (nm, fm) = (n1 / k, f1 / k);
        [nm, n2 / k - nm * nm, fm, f2 / k - fm * fm]
    }

    #[test]
    fn aggregated_sampling_matches_exact_moments() {
        // ~200 photons per pixel, all on the bulk path; 300 seeds × 29 pixels.
        for (v, bleach) in [(0.9, 0.0), (0.0, 0.0), (0.9, 10.0)] {
            let a = pixel_moments(v, false, bleach);
            let b = pixel_moments(v, true, bleach);
            for (i, (x, y)) in a.iter().zip(&b).enumerate() {
                let tol = if i % 2 == 0 { 0.02 } else { 0.12 };
                assert!((x / y - 1.0).abs() < tol, "V={v} k={bleach} moment {i}: exact {x} vs aggregated {y}");
            }
        }
    }

    #[test]
    fn contrast_cases() {
        let canvas = Canvas::new(4, 4);
        let mut bits = vec![false; 16];
        bits[0] = true;
        bits[1] = true;
        let mask = GlyphMask::from_bitmap(canvas, "x", bits.clone());
        let flat = FrequencyDomainImage::from_magnitudes(4, 4, vec![2.0; 16]);
        assert_eq!(contrast_ratio(&flat, &mask).unwrap(), 1.0);
        let signal: Vec<f64> = bits.iter().map(|&b| if b { 5.0 } else { 0.0 }).collect();
        let only = FrequencyDomainImage::from_magnitudes(4, 4, signal);
        assert_eq!(contrast_ratio(&only, &mask).unwrap(), f64::INFINITY);
        let empty = GlyphMask::from_bitmap(canvas, "x", vec![false; 16]);
        assert!(contrast_ratio(&flat, &empty).is_err());
        let full = GlyphMask::from_bitmap(canvas, "x", vec![true; 16]);
        assert!(contrast_ratio(&flat, &full).is_err());
    }

    proptest! {
        #[test]
        fn triangle_inequality(times in prop::collection::vec(0.0f64..0.1, 0..200), nu in 1.0f64..5000.0) {
            prop_assert!(dft_magnitude(&times, TAU * nu) <= times.len() as f64 + 1e-9);
        }

        #[test]
        fn merged_phasor_is_sum_of_parts(
            a in prop::collection::vec(0.0f64..0.1, 0..100),
            b in prop::collection::vec(0.0f64..0.1, 0..100),
            nu in 1.0f64..5000.0,
        ) {
            let w = TAU * nu;
            let (ar, ai) = phasor_sum(&a, w);
            let (br, bi) = phasor_sum(&b, w);
            let merged: Vec<f64> = a.iter().chain(&b).copied().collect();
            let m = dft_magnitude(&merged, w);
            prop_assert!((m - (ar + br).hypot(ai + bi)).abs() < 1e-9);
        }

        #[test]
        fn time_image_ignores_count_scale(counts in prop::collection::vec(0u32..1000, 16), k in 1u32..50) {
            let a = TimeDomainImage::from_counts(4, 4, counts.clone());
            let b = TimeDomainImage::from_counts(4, 4, counts.iter().map(|c| c * k).collect());
            prop_assert_eq!(a.values, b.values);
        }

        #[test]
        fn normalised_view_hits_255(raw in prop::collection::vec(0.0f64..1e6, 1..64)) {
            let v = normalize_to_u8(&raw);
            if raw.iter().any(|&x| x > 0.0) {
                prop_assert!(v.contains(&255));
            } else {
                prop_assert!(v.iter().all(|&x| x == 0));
            }
        }
    }
}
