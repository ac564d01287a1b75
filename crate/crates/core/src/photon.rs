//! Photon emission for one read.
//!
//! Each emitter is an inhomogeneous Poisson process with rate
//! `peak_rate · ρee(θ, Δφ(t), V)`, realised by thinning a homogeneous process
//! at the maximum of that rate. Arrivals are handed to a [`PhotonSink`] as a
//! whole number of modulation periods plus a unit phasor for the position
//! inside the period, so sinks that only need the modulation-frequency DFT
//! never pay for trigonometry; [`Arrival::time`] recovers the timestamp.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coherence::{self, PulsePairDrive};
use crate::error::{Error, Result};
use crate::label::{Canvas, Emitter, LabelState};
use crate::seed::{derive_seed, rng_from_seed};

pub const DEFAULT_EXPOSURE: f64 = 0.1;
pub const DEFAULT_DARK_RATE: f64 = 10.0;

const DARK_STREAM: u64 = u64::MAX;

/// How an emitter's photons are spread over pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpotProfile {
    /// Uniform over the pixels of the spot disk.
    #[default]
    UniformDisk,
    /// Gaussian with σ = `sigma_fraction` × spot radius; photons landing off
    /// the canvas are lost.
    Gaussian { sigma_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureConfig {
    /// s
    pub duration: f64,
    /// photons/s/pixel
    pub dark_rate: f64,
    /// Area of each pulse of the pair, rad.
    pub pulse_area_theta: f64,
    #[serde(default)]
    pub spot_profile: SpotProfile,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self {
            duration: DEFAULT_EXPOSURE,
            dark_rate: DEFAULT_DARK_RATE,
            pulse_area_theta: std::f64::consts::FRAC_PI_2,
            spot_profile: SpotProfile::UniformDisk,
        }
    }
}

impl ExposureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::domain("duration", self.duration, "> 0"));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::domain("dark_rate", self.dark_rate, ">= 0"));
        }
        coherence::check_pulse_area("pulse_area_theta", self.pulse_area_theta)?;
        if let SpotProfile::Gaussian { sigma_fraction } = self.spot_profile {
            if !(sigma_fraction > 0.0) {
                return Err(Error::domain("sigma_fraction", sigma_fraction, "> 0"));
            }
        }
        Ok(())
    }

    /// Number of modulation periods covered by the exposure.
    pub fn periods(&self, drive: &PulsePairDrive) -> f64 {
        self.duration * drive.mod_frequency
    }
}

/// A detected photon: `cycle` whole modulation periods after the start of the
/// exposure, plus the angle ψ ∈ [0, 2π) given as (cos ψ, sin ψ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub cycle: u32,
    pub cos: f64,
    pub sin: f64,
    /// Latest time the photon's source could emit (bleach time or end of exposure).
    pub limit: f64,
}

impl Arrival {
    /// e^(-iωt) at the modulation frequency, as (re, im).
    #[inline]
    pub fn modulation_phasor(&self) -> (f64, f64) {
        (self.cos, -self.sin)
    }

    /// Arrival time in seconds.
    pub fn time(&self, mod_frequency: f64) -> f64 {
        let mut turn = self.sin.atan2(self.cos) / TAU;
        if turn < 0.0 {
            turn += 1.0;
        }
        ((self.cycle as f64 + turn) / mod_frequency).min(self.limit)
    }
}

/// Receives photons as they are generated.
pub trait PhotonSink {
    fn record(&mut self, pixel: u32, arrival: &Arrival);
}

impl<S: PhotonSink + ?Sized> PhotonSink for &mut S {
    fn record(&mut self, pixel: u32, arrival: &Arrival) {
        (**self).record(pixel, arrival)
    }
}

impl<A: PhotonSink, B: PhotonSink> PhotonSink for (A, B) {
    fn record(&mut self, pixel: u32, arrival: &Arrival) {
        self.0.record(pixel, arrival);
        self.1.record(pixel, arrival);
    }
}

/// Counts photons and nothing else.
#[derive(Debug, Default, Clone, Copy)]
pub struct PhotonCounter(pub u64);

impl PhotonSink for PhotonCounter {
    fn record(&mut self, _pixel: u32, _arrival: &Arrival) {
        self.0 += 1;
    }
}

/// Per-pixel, time-ordered photon arrival lists.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonStream {
    pub width: u32,
    pub height: u32,
    pub duration: f64,
    pub mod_frequency: f64,
    pixels: BTreeMap<u32, Vec<f64>>,
    sorted: bool,
}

impl PhotonStream {
    pub fn new(width: u32, height: u32, duration: f64, mod_frequency: f64) -> Self {
        Self {
            width,
            height,
            duration,
            mod_frequency,
            pixels: BTreeMap::new(),
            sorted: true,
        }
    }

    pub fn for_canvas(canvas: &Canvas, exposure: &ExposureConfig, drive: &PulsePairDrive) -> Self {
        Self::new(canvas.width, canvas.height, exposure.duration, drive.mod_frequency)
    }

    /// Adds a photon by timestamp.
    pub fn push(&mut self, pixel: u32, time: f64) {
        let list = self.pixels.entry(pixel).or_default();
        if list.last().is_some_and(|&last| last > time) {
            self.sorted = false;
        }
        list.push(time.clamp(0.0, self.duration));
    }

    /// Sorts every pixel's list. Idempotent.
    pub fn finish(&mut self) {
        if !self.sorted {
            for list in self.pixels.values_mut() {
                list.sort_by(f64::total_cmp);
            }
            self.sorted = true;
        }
    }

    pub fn pixel(&self, index: u32) -> &[f64] {
        self.pixels.get(&index).map_or(&[], Vec::as_slice)
    }

    /// Non-empty pixels in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.pixels.iter().map(|(&p, v)| (p, v.as_slice()))
    }

    pub fn total_count(&self) -> usize {
        self.pixels.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// All arrivals in one list, sorted by time.
    pub fn merged_times(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.pixels.values().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// Keeps only the photons of the given pixels.
    pub fn restricted_to(&self, pixels: &[u32]) -> PhotonStream {
        let mut out = PhotonStream::new(self.width, self.height, self.duration, self.mod_frequency);
        for &p in pixels {
            if let Some(v) = self.pixels.get(&p) {
                out.pixels.insert(p, v.clone());
            }
        }
        out
    }
}

impl PhotonSink for PhotonStream {
    fn record(&mut self, pixel: u32, arrival: &Arrival) {
        let t = arrival.time(self.mod_frequency);
        self.push(pixel, t);
    }
}

/// Records only photons falling on selected pixels.
pub struct PixelFilter<S> {
    keep: Vec<bool>,
    pub inner: S,
}

impl<S: PhotonSink> PixelFilter<S> {
    pub fn new(pixel_count: usize, pixels: &[u32], inner: S) -> Self {
        let mut keep = vec![false; pixel_count];
        for &p in pixels {
            keep[p as usize] = true;
        }
        Self { keep, inner }
    }
}

impl<S: PhotonSink> PhotonSink for PixelFilter<S> {
    fn record(&mut self, pixel: u32, arrival: &Arrival) {
        if self.keep[pixel as usize] {
            self.inner.record(pixel, arrival);
        }
    }
}

/// Outcome of simulating one emitter for one exposure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterReadout {
    pub photons: u64,
    /// Bleach time inside the exposure, if the emitter died during it.
    pub bleached_at: Option<f64>,
}

/// Thinning sampler for one modulated source over `[0, t_end)`.
struct ModulatedSource {
    /// Thinning bound, photons/s.
    bound_rate: f64,
    visibility: f64,
    t_end: f64,
    mod_frequency: f64,
    /// Emission starts at the beginning of this period.
    first_cycle: u32,
}

impl ModulatedSource {
    fn emit<R, P, S>(&self, rng: &mut R, mut pixel_of: P, sink: &mut S) -> u64
    where
        R: Rng + ?Sized,
        P: FnMut(&mut R) -> Option<u32>,
        S: PhotonSink + ?Sized,
    {
        let start = self.first_cycle as f64;
        let span = self.t_end * self.mod_frequency;
        let mean = self.bound_rate * (span - start) / self.mod_frequency;
        if !(mean > 0.0) {
            return 0;
        }
        let candidates = Poisson::new(mean).expect("finite positive mean").sample(rng) as u64;
        let full = span.floor();
        let full_cycles = full as u32;
        let v = self.visibility;
        let mut kept = 0;
        for _ in 0..candidates {
            let u = start + rng.random::<f64>() * (span - start);
            let (cycle, cos, sin) = if u < full {
                // Inside a complete period the phase is uniform and independent
                // of the period index.
                let (c, s) = unit_phasor(rng);
                (u as u32, c, s)
            } else {
                let (s, c) = (TAU * (u - full)).sin_cos();
                (full_cycles, c, s)
            };
            // Δφ = ψ - π, so 1 + V·cosΔφ = 1 - V·cosψ.
            if v > 0.0 && rng.random::<f64>() * (1.0 + v) >= 1.0 - v * cos {
                continue;
            }
            let Some(pixel) = pixel_of(rng) else { continue };
            sink.record(
                pixel,
                &Arrival {
                    cycle,
                    cos,
                    sin,
                    limit: self.t_end,
                },
            );
            kept += 1;
        }
        kept
    }
}

/// Uniformly distributed point on the unit circle, as (cos ψ, sin ψ).
#[inline]
fn unit_phasor<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let x = 2.0 * rng.random::<f64>() - 1.0;
        let y = 2.0 * rng.random::<f64>() - 1.0;
        let r2 = x * x + y * y;
        if r2 <= 1.0 && r2 > 1e-300 {
            return ((x * x - y * y) / r2, 2.0 * x * y / r2);
        }
    }
}

/// Simulates one emitter for one exposure, feeding photons to `sink`.
///
/// If the emitter bleaches during the exposure (rate `bleach_rate`), emission
/// stops at the sampled bleach time and the emitter is marked dead.
pub fn simulate_emitter_into<R, S>(
    emitter: &mut Emitter,
    bleach_rate: f64,
    canvas: &Canvas,
    drive: &PulsePairDrive,
    exposure: &ExposureConfig,
    rng: &mut R,
    sink: &mut S,
) -> EmitterReadout
where
    R: Rng + ?Sized,
    S: PhotonSink + ?Sized,
{
    if !emitter.alive {
        return EmitterReadout {
            photons: 0,
            bleached_at: None,
        };
    }
    let bleached_at = if bleach_rate > 0.0 {
        let t = Exp::new(bleach_rate).expect("positive rate").sample(rng);
        (t < exposure.duration).then_some(t)
    } else {
        None
    };
    let t_end = bleached_at.unwrap_or(exposure.duration);

    let v = emitter.visibility;
    let s = exposure.pulse_area_theta.sin();
    let source = ModulatedSource {
        bound_rate: emitter.peak_rate * 0.5 * s * s * (1.0 + v),
        visibility: v,
        t_end,
        mod_frequency: drive.mod_frequency,
        first_cycle: 0,
    };

    let photons = match exposure.spot_profile {
        SpotProfile::UniformDisk => {
            let spot = emitter.spot_pixels(canvas);
            if spot.is_empty() {
                0
            } else {
                source.emit(rng, |r: &mut R| Some(spot[r.random_range(0..spot.len())]), sink)
            }
        }
        SpotProfile::Gaussian { sigma_fraction } => {
            let sigma = (sigma_fraction * emitter.spot_radius as f64).max(1e-9);
            let normal = Normal::new(0.0, sigma).expect("positive sigma");
            let (cx, cy) = (emitter.center.x as f64, emitter.center.y as f64);
            source.emit(
                rng,
                |r: &mut R| {
                    let x = (cx + normal.sample(r)).round() as i64;
                    let y = (cy + normal.sample(r)).round() as i64;
                    canvas.contains(x, y).then(|| canvas.index(x as u32, y as u32))
                },
                sink,
            )
        }
    };

    if bleached_at.is_some() {
        emitter.alive = false;
    }
    EmitterReadout { photons, bleached_at }
}

/// Collects one emitter's photons as `(time, pixel)` pairs in time order.
pub fn simulate_emitter_stream<R: Rng + ?Sized>(
    emitter: &mut Emitter,
    bleach_rate: f64,
    canvas: &Canvas,
    drive: &PulsePairDrive,
    exposure: &ExposureConfig,
    rng: &mut R,
) -> (Vec<(f64, u32)>, EmitterReadout) {
    struct Collect(Vec<(f64, u32)>, f64);
    impl PhotonSink for Collect {
        fn record(&mut self, pixel: u32, arrival: &Arrival) {
            self.0.push((arrival.time(self.1), pixel));
        }
    }
    let mut sink = Collect(Vec::new(), drive.mod_frequency);
    let readout = simulate_emitter_into(emitter, bleach_rate, canvas, drive, exposure, rng, &mut sink);
    let mut photons = sink.0;
    photons.sort_by(|a, b| a.0.total_cmp(&b.0));
    (photons, readout)
}

/// Homogeneous dark counts over the whole canvas.
pub fn dark_counts_into<R, S>(
    canvas: &Canvas,
    dark_rate: f64,
    duration: f64,
    mod_frequency: f64,
    rng: &mut R,
    sink: &mut S,
) -> u64
where
    R: Rng + ?Sized,
    S: PhotonSink + ?Sized,
{
    let source = ModulatedSource {
        bound_rate: dark_rate * canvas.pixel_count() as f64,
        visibility: 0.0,
        t_end: duration,
        mod_frequency,
        first_cycle: 0,
    };
    let n = canvas.pixel_count() as u32;
    source.emit(rng, |r: &mut R| Some(r.random_range(0..n)), sink)
}

/// Dark counts as `(time, pixel)` pairs in time order.
pub fn dark_counts<R: Rng + ?Sized>(
    canvas: &Canvas,
    dark_rate: f64,
    duration: f64,
    mod_frequency: f64,
    rng: &mut R,
) -> Vec<(f64, u32)> {
    let mut stream = PhotonStream::new(canvas.width, canvas.height, duration, mod_frequency);
    dark_counts_into(canvas, dark_rate, duration, mod_frequency, rng, &mut stream);
    stream.finish();
    let mut out: Vec<(f64, u32)> = stream.iter().flat_map(|(p, ts)| ts.iter().map(move |&t| (t, p))).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Bookkeeping for one read.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReadSummary {
    pub read_index: u32,
    pub molecules_at_start: usize,
    pub molecules_at_end: usize,
    pub emitter_photons: u64,
    pub dark_photons: u64,
}

/// Runs one read of `state`: every alive emitter plus dark counts, with
/// in-exposure bleaching. Per-emitter generators derive from one draw of `rng`.
pub fn simulate_read_into<R, S>(
    state: &mut LabelState,
    drive: &PulsePairDrive,
    exposure: &ExposureConfig,
    rng: &mut R,
    sink: &mut S,
) -> ReadSummary
where
    R: Rng + ?Sized,
    S: PhotonSink + ?Sized,
{
    let read_seed: u64 = rng.random();
    let molecules_at_start = state.alive_molecules();
    let canvas = state.canvas;
    let rates: Vec<f64> = state.emitters.iter().map(|e| state.bleach_rate(e)).collect();

    let mut emitter_photons = 0;
    for (i, (emitter, rate)) in state.emitters.iter_mut().zip(rates).enumerate() {
        if !emitter.alive {
            continue;
        }
        let mut child = rng_from_seed(derive_seed(read_seed, i as u64));
        emitter_photons += simulate_emitter_into(emitter, rate, &canvas, drive, exposure, &mut child, sink).photons;
    }

    let mut dark_rng = rng_from_seed(derive_seed(read_seed, DARK_STREAM));
    let dark_photons = dark_counts_into(
        &canvas,
        exposure.dark_rate,
        exposure.duration,
        drive.mod_frequency,
        &mut dark_rng,
        sink,
    );

    state.read_count += 1;
    state.illumination_time += exposure.duration;
    ReadSummary {
        read_index: state.read_count,
        molecules_at_start,
        molecules_at_end: state.alive_molecules(),
        emitter_photons,
        dark_photons,
    }
}

/// Runs one read and returns the full photon stream with the post-read state.
pub fn simulate_read<R: Rng + ?Sized>(
    state: &LabelState,
    drive: &PulsePairDrive,
    exposure: &ExposureConfig,
    rng: &mut R,
) -> (PhotonStream, LabelState) {
    let mut next = state.clone();
    let mut stream = PhotonStream::for_canvas(&state.canvas, exposure, drive);
    simulate_read_into(&mut next, drive, exposure, rng, &mut stream);
    stream.finish();
    (stream, next)
}

/// A sink that can also take many photons of one pixel at once, when only
/// their count and summed modulation phasor matter.
pub trait BulkPhotonSink: PhotonSink {
    fn record_bulk(&mut self, pixel: u32, count: u64, phasor: (f64, f64));
}

/// Per-pixel counts from this size up are summed in bulk by
/// [`simulate_read_aggregated`].
pub const BULK_THRESHOLD: u64 = 32;

/// (cos ψ, sin ψ) with density ∝ 1 − V·cos ψ: the in-period phase of an
/// accepted photon.
#[inline]
fn accepted_phasor<R: Rng + ?Sized>(visibility: f64, rng: &mut R) -> (f64, f64) {
    loop {
        let (c, s) = unit_phasor(rng);
        if visibility <= 0.0 || rng.random::<f64>() * (1.0 + visibility) < 1.0 - visibility * c {
            return (c, s);
        }
    }
}

/// Like [`simulate_emitter_into`], but photons emitted during whole modulation
/// periods are drawn pixel by pixel: an exact Poisson count per pixel, and for
/// counts of at least [`BULK_THRESHOLD`] a phasor sum drawn from the normal
/// law with the exact mean and covariance of the per-photon sum,
/// `(−nV/2, 0)` and `diag(n(1/2 − V²/4), n/2)`. Photons of a final partial
/// period are always simulated one by one.
pub fn simulate_emitter_aggregated<R, S>(
    emitter: &mut Emitter,
    bleach_rate: f64,
    canvas: &Canvas,
    drive: &PulsePairDrive,
    exposure: &ExposureConfig,
    rng: &mut R,
    sink: &mut S,
) -> Result<EmitterReadout>
where
    R: Rng + ?Sized,
    S: BulkPhotonSink + ?Sized,
{
    if exposure.spot_profile != SpotProfile::UniformDisk {
        return Err(Error::Config("aggregated sampling needs the uniform disk profile".into()));
    }
    if !emitter.alive {
        return Ok(EmitterReadout {
            photons: 0,
            bleached_at: None,
        });
    }
    let bleached_at = if bleach_rate > 0.0 {
        let t = Exp::new(bleach_rate).expect("positive rate").sample(rng);
        (t < exposure.duration).then_some(t)
    } else {
        None
    };
    let t_end = bleached_at.unwrap_or(exposure.duration);
    if bleached_at.is_some() {
        emitter.alive = false;
    }
    let spot = emitter.spot_pixels(canvas);
    if spot.is_empty() {
        return Ok(EmitterReadout { photons: 0, bleached_at });
    }

    let f = drive.mod_frequency;
    let v = emitter.visibility;
    let s = exposure.pulse_area_theta.sin();
    let mean_rate = emitter.peak_rate * 0.5 * s * s;
    let full = (t_end * f).floor();
    let cycles = full as u32;
    let mut photons = 0;

    let per_pixel = mean_rate * full / f / spot.len() as f64;
    if per_pixel > 0.0 {
        let poisson = Poisson::new(per_pixel).expect("finite positive mean");
        let (sd_re, sd_im) = ((0.5 - 0.25 * v * v).sqrt(), 0.5f64.sqrt());
        for &pixel in &spot {
            let n = poisson.sample(rng) as u64;
            if n == 0 {
                continue;
            }
            photons += n;
            if n < BULK_THRESHOLD {
                for _ in 0..n {
                    let (cos, sin) = accepted_phasor(v, rng);
                    let cycle = rng.random_range(0..cycles);
                    sink.record(pixel, &Arrival { cycle, cos, sin, limit: t_end });
                }
            } else {
                let nf = n as f64;
                let root = nf.sqrt();
                let z_re: f64 = rng.sample(StandardNormal);
                let z_im: f64 = rng.sample(StandardNormal);
                let re = -0.5 * nf * v + root * sd_re * z_re;
                let im = root * sd_im * z_im;
                sink.record_bulk(pixel, n, (re, im));
            }
        }
    }

    let tail = ModulatedSource {
        bound_rate: mean_rate * (1.0 + v),
        visibility: v,
        t_end,
        mod_frequency: f,
        first_cycle: cycles,
    };
    photons += tail.emit(rng, |r: &mut R| Some(spot[r.random_range(0..spot.len())]), sink);
    Ok(EmitterReadout { photons, bleached_at })
}

/// [`simulate_read_into`] with per-emitter sampling by
/// [`simulate_emitter_aggregated`]. Seeds derive exactly as in the exact path,
/// so the bleaching history of a label is the same under both.
pub fn simulate_read_aggregated<R, S>(
    state: &mut LabelState,
    drive: &PulsePairDrive,
    exposure: &ExposureConfig,
    rng: &mut R,
    sink: &mut S,
) -> Result<ReadSummary>
where
    R: Rng + ?Sized,
    S: BulkPhotonSink + ?Sized,
{
    let read_seed: u64 = rng.random();
    let molecules_at_start = state.alive_molecules();
    let canvas = state.canvas;
    let rates: Vec<f64> = state.emitters.iter().map(|e| state.bleach_rate(e)).collect();

    let mut emitter_photons = 0;
    for (i, (emitter, rate)) in state.emitters.iter_mut().zip(rates).enumerate() {
        if !emitter.alive {
            continue;
        }
        let mut child = rng_from_seed(derive_seed(read_seed, i as u64));
        emitter_photons +=
            simulate_emitter_aggregated(emitter, rate, &canvas, drive, exposure, &mut child, sink)?.photons;
    }

    let mut dark_rng = rng_from_seed(derive_seed(read_seed, DARK_STREAM));
    let dark_photons = dark_counts_into(
        &canvas,
        exposure.dark_rate,
        exposure.duration,
        drive.mod_frequency,
        &mut dark_rng,
        sink,
    );

    state.read_count += 1;
    state.illumination_time += exposure.duration;
    Ok(ReadSummary {
        read_index: state.read_count,
        molecules_at_start,
        molecules_at_end: state.alive_molecules(),
        emitter_photons,
        dark_photons,
    })
}
