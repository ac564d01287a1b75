//! Label construction: glyph rasterisation, placement of coherent signal
//! molecules inside the glyph and incoherent interference emitters over the
//! whole canvas, the layer stack, and photobleaching between reads.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coherence::{self, PulsePairDrive};
use crate::error::{Error, Result};
use crate::font::{FontSource, GLYPH_COLUMNS, GLYPH_ROWS, GLYPH_SPACING};
use crate::seed::{derive_seed, rng_from_seed};

pub const DEFAULT_CANVAS_SIZE: u32 = 512;
pub const DEFAULT_EXTENT_UM: f64 = 80.0;
/// Canvas pixels per font cell. Puts the "QC" mask near 2x10^4 pixels.
pub const DEFAULT_GLYPH_SCALE: u32 = 26;
pub const DEFAULT_MOLECULE_COUNT: usize = 100;
pub const DEFAULT_QD_COUNT: usize = 1000;
pub const DEFAULT_SPOT_RADII: [u32; 2] = [3, 4];
/// Peak emission rate of a molecule, photons/s. Yields ~3x10^4 photons per 0.1 s read.
pub const DEFAULT_MOLECULE_PEAK_RATE: f64 = 6.0e5;

const PLACEMENT_STREAM: u64 = 0x706c_6163;

/// Photobleaching rate that takes 150 molecules to 20 over 0.9 s of illumination.
pub fn calibrated_bleach_rate() -> f64 {
    (150.0f64 / 20.0).ln() / 0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    /// Physical side lengths, µm.
    pub extent_x_um: f64,
    pub extent_y_um: f64,
}

impl Default for Canvas {
    fn default() -> Self {
        Self {
            width: DEFAULT_CANVAS_SIZE,
            height: DEFAULT_CANVAS_SIZE,
            extent_x_um: DEFAULT_EXTENT_UM,
            extent_y_um: DEFAULT_EXTENT_UM,
        }
    }
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            ..Self::default()
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> u32 {
        y * self.width + x
    }

    #[inline]
    pub fn coords(&self, index: u32) -> Pixel {
        Pixel {
            x: index % self.width,
            y: index / self.width,
        }
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    pub fn um_per_pixel(&self) -> (f64, f64) {
        (
            self.extent_x_um / self.width as f64,
            self.extent_y_um / self.height as f64,
        )
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("canvas dimensions must be positive".into()));
        }
        if !(self.extent_x_um > 0.0 && self.extent_y_um > 0.0) {
            return Err(Error::Config("canvas extent must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub x: u32,
    pub y: u32,
}

/// Binary mask of the pixels covered by a rendered glyph.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphMask {
    pub canvas: Canvas,
    pub text: String,
    bitmap: Vec<bool>,
    members: Vec<u32>,
}

impl GlyphMask {
    pub fn from_bitmap(canvas: Canvas, text: impl Into<String>, bitmap: Vec<bool>) -> Self {
        assert_eq!(bitmap.len(), canvas.pixel_count());
        let members = bitmap
            .iter()
            .enumerate()
            .filter_map(|(i, &on)| on.then_some(i as u32))
            .collect();
        Self {
            canvas,
            text: text.into(),
            bitmap,
            members,
        }
    }

    /// Member-pixel count.
    pub fn area(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.canvas.width && y < self.canvas.height && self.bitmap[self.canvas.index(x, y) as usize]
    }

    /// Linear pixel indices of the members, ascending.
    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn bitmap(&self) -> &[bool] {
        &self.bitmap
    }
}

/// Whether `text` is a single 0-9/A-Z character or a pair of letters.
pub fn is_supported_text(text: &str) -> bool {
    let chars: Vec<char> = text.chars().collect();
    match chars.as_slice() {
        [c] => c.is_ascii_digit() || c.is_ascii_uppercase(),
        [a, b] => a.is_ascii_uppercase() && b.is_ascii_uppercase(),
        _ => false,
    }
}

/// Renders `text` with the given font, `scale` canvas pixels per font cell,
/// centred on the canvas.
pub fn rasterize_glyph(text: &str, canvas: Canvas, font: FontSource, scale: u32) -> Result<GlyphMask> {
    canvas.validate()?;
    if scale == 0 {
        return Err(Error::Config("glyph scale must be positive".into()));
    }
    if let Some(c) = text.chars().find(|&c| font.glyph(c).is_none()) {
        return Err(Error::UnsupportedCharacter(c));
    }
    if !is_supported_text(text) {
        return Err(Error::UnsupportedText(text.to_string()));
    }

    let glyphs: Vec<[u8; 7]> = text.chars().map(|c| font.glyph(c).unwrap()).collect();
    let n = glyphs.len() as u32;
    let cols = n * GLYPH_COLUMNS + (n - 1) * GLYPH_SPACING;
    let needed_width = cols * scale;
    let needed_height = GLYPH_ROWS * scale;
    if needed_width > canvas.width || needed_height > canvas.height {
        return Err(Error::GlyphTooLarge {
            text: text.to_string(),
            needed_width,
            needed_height,
            width: canvas.width,
            height: canvas.height,
        });
    }
    let x0 = (canvas.width - needed_width) / 2;
    let y0 = (canvas.height - needed_height) / 2;

    let mut bitmap = vec![false; canvas.pixel_count()];
    for (g, rows) in glyphs.iter().enumerate() {
        let col_offset = g as u32 * (GLYPH_COLUMNS + GLYPH_SPACING);
        for (r, bits) in rows.iter().enumerate() {
            for c in 0..GLYPH_COLUMNS {
                if bits & (0x10 >> c) == 0 {
                    continue;
                }
                let px = x0 + (col_offset + c) * scale;
                let py = y0 + r as u32 * scale;
                for y in py..py + scale {
                    let row = (y * canvas.width) as usize;
                    bitmap[row + px as usize..row + (px + scale) as usize].fill(true);
                }
            }
        }
    }
    Ok(GlyphMask::from_bitmap(canvas, text, bitmap))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitterKind {
    CoherentMolecule,
    IncoherentQd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub center: Pixel,
    pub spot_radius: u32,
    pub kind: EmitterKind,
    /// Emission rate at unit excited-state population, photons/s.
    pub peak_rate: f64,
    pub visibility: f64,
    pub alive: bool,
    pub bleach_susceptible: bool,
}

impl Emitter {
    /// Pixels of the emitter's disk, clipped to the canvas, ascending.
    pub fn spot_pixels(&self, canvas: &Canvas) -> Vec<u32> {
        disk_pixels(canvas, self.center, self.spot_radius)
    }

    pub fn is_molecule(&self) -> bool {
        self.kind == EmitterKind::CoherentMolecule
    }
}

pub(crate) fn disk_pixels(canvas: &Canvas, center: Pixel, radius: u32) -> Vec<u32> {
    let r = radius as i64;
    let mut out = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy > r * r {
                continue;
            }
            let (x, y) = (center.x as i64 + dx, center.y as i64 + dy);
            if canvas.contains(x, y) {
                out.push(canvas.index(x as u32, y as u32));
            }
        }
    }
    out
}

/// Photobleaching with rate k = α·p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleachModel {
    pub alpha: f64,
    pub power: f64,
}

impl BleachModel {
    pub fn new(alpha: f64, power: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::domain("alpha", alpha, ">= 0"));
        }
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::domain("power", power, ">= 0"));
        }
        Ok(Self { alpha, power })
    }

    pub fn with_rate(k_bleach: f64) -> Result<Self> {
        Self::new(k_bleach, 1.0)
    }

    pub fn k_bleach(&self) -> f64 {
        self.alpha * self.power
    }

    /// Expected surviving fraction after `t` seconds of illumination.
    pub fn survival(&self, t: f64) -> f64 {
        (-self.k_bleach() * t).exp()
    }
}

impl Default for BleachModel {
    fn default() -> Self {
        Self {
            alpha: calibrated_bleach_rate(),
            power: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerStack {
    /// glass / molecules / PMMA / QDs: molecules bleach under readout.
    #[default]
    Disposable,
    /// A quench-inhibiting mountant between PMMA layers stops bleaching.
    QuenchInhibited,
}

/// The persistent physical label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelState {
    pub glyph_text: String,
    pub canvas: Canvas,
    pub font: FontSource,
    pub glyph_scale: u32,
    pub emitters: Vec<Emitter>,
    pub layer_stack: LayerStack,
    pub read_count: u32,
    pub rng_seed: u64,
    pub bleach_model: BleachModel,
    /// Bleach rate of interference emitters, 1/s. Zero keeps them permanent.
    pub qd_bleach_rate: f64,
    /// Total illumination received so far, s.
    pub illumination_time: f64,
}

impl LabelState {
    pub fn molecules(&self) -> impl Iterator<Item = &Emitter> {
        self.emitters.iter().filter(|e| e.is_molecule())
    }

    pub fn interference(&self) -> impl Iterator<Item = &Emitter> {
        self.emitters.iter().filter(|e| !e.is_molecule())
    }

    pub fn alive_molecules(&self) -> usize {
        self.molecules().filter(|e| e.alive).count()
    }

    pub fn molecule_count(&self) -> usize {
        self.molecules().count()
    }

    pub fn qd_count(&self) -> usize {
        self.interference().count()
    }

    /// Bleach rate that applies to `emitter`, zero when it cannot bleach.
    pub fn bleach_rate(&self, emitter: &Emitter) -> f64 {
        if !emitter.bleach_susceptible {
            return 0.0;
        }
        match emitter.kind {
            EmitterKind::CoherentMolecule => self.bleach_model.k_bleach(),
            EmitterKind::IncoherentQd => self.qd_bleach_rate,
        }
    }

    pub fn glyph_mask(&self) -> Result<GlyphMask> {
        rasterize_glyph(&self.glyph_text, self.canvas, self.font, self.glyph_scale)
    }

    /// Illuminates the label for `t` seconds without collecting photons.
    pub fn bleach<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        if t <= 0.0 {
            return;
        }
        let rates: Vec<f64> = self.emitters.iter().map(|e| self.bleach_rate(e)).collect();
        for (e, k) in self.emitters.iter_mut().zip(rates) {
            if e.alive && k > 0.0 && rng.random::<f64>() >= (-k * t).exp() {
                e.alive = false;
            }
        }
        self.illumination_time += t;
    }
}

/// Everything needed to forge a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub canvas: Canvas,
    pub font: FontSource,
    pub glyph_scale: u32,
    pub molecule_count: usize,
    pub qd_count: usize,
    pub spot_radii: Vec<u32>,
    pub molecule_peak_rate: f64,
    pub qd_peak_rate: f64,
    pub molecule_visibility: f64,
    pub qd_visibility: f64,
    pub layer_stack: LayerStack,
    pub bleach: BleachModel,
    pub qd_bleach_rate: f64,
}

/// QD brightness relative to a molecule.
pub const DEFAULT_QD_BRIGHTNESS_RATIO: f64 = 4.0;

impl Default for LabelConfig {
    fn default() -> Self {
        let drive = PulsePairDrive::default();
        Self {
            canvas: Canvas::default(),
            font: FontSource::default(),
            glyph_scale: DEFAULT_GLYPH_SCALE,
            molecule_count: DEFAULT_MOLECULE_COUNT,
            qd_count: DEFAULT_QD_COUNT,
            spot_radii: DEFAULT_SPOT_RADII.to_vec(),
            molecule_peak_rate: DEFAULT_MOLECULE_PEAK_RATE,
            qd_peak_rate: DEFAULT_MOLECULE_PEAK_RATE * DEFAULT_QD_BRIGHTNESS_RATIO,
            molecule_visibility: coherence::visibility(drive.inter_pulse_delay, coherence::DEFAULT_MOLECULE_T2)
                .expect("default molecule dephasing time is positive"),
            qd_visibility: coherence::visibility(drive.inter_pulse_delay, coherence::DEFAULT_QD_T2)
                .expect("default QD dephasing time is positive"),
            layer_stack: LayerStack::Disposable,
            bleach: BleachModel::default(),
            qd_bleach_rate: 0.0,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        self.canvas.validate()?;
        if self.glyph_scale == 0 {
            return Err(Error::Config("glyph_scale must be positive".into()));
        }
        if self.spot_radii.is_empty() {
            return Err(Error::Config("spot_radii must not be empty".into()));
        }
        for (name, rate) in [
            ("molecule_peak_rate", self.molecule_peak_rate),
            ("qd_peak_rate", self.qd_peak_rate),
            ("qd_bleach_rate", self.qd_bleach_rate),
        ] {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::domain(name, rate, ">= 0"));
            }
        }
        coherence::check_visibility(self.molecule_visibility)?;
        coherence::check_visibility(self.qd_visibility)?;
        BleachModel::new(self.bleach.alpha, self.bleach.power)?;
        Ok(())
    }
}

/// Places `count` coherent molecules at distinct pixels drawn uniformly from the mask.
pub fn place_signal_emitters<R: Rng + ?Sized>(
    mask: &GlyphMask,
    count: usize,
    radii: &[u32],
    peak_rate: f64,
    visibility: f64,
    rng: &mut R,
) -> Result<Vec<Emitter>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if count == 0 {
        return Err(Error::InsufficientData("at least one signal emitter is required".into()));
    }
    if count > mask.area() {
        return Err(Error::MaskTooSmall {
            requested: count,
            available: mask.area(),
        });
    }
    if radii.is_empty() {
        return Err(Error::Config("spot_radii must not be empty".into()));
    }
    let chosen = index::sample(rng, mask.area(), count);
    let members = mask.members();
    Ok(chosen
        .into_iter()
        .map(|i| {
            let radius = radii[rng.random_range(0..radii.len())];
            Emitter {
                center: mask.canvas.coords(members[i]),
                spot_radius: radius,
                kind: EmitterKind::CoherentMolecule,
                peak_rate,
                visibility,
                alive: true,
                bleach_susceptible: true,
            }
        })
        .collect())
}

/// Places `count` incoherent emitters uniformly over the whole canvas.
pub fn place_interference<R: Rng + ?Sized>(
    canvas: &Canvas,
    count: usize,
    radii: &[u32],
    peak_rate: f64,
    visibility: f64,
    rng: &mut R,
) -> Vec<Emitter> {
    (0..count)
        .map(|_| {
            let center = Pixel {
                x: rng.random_range(0..canvas.width),
                y: rng.random_range(0..canvas.height),
            };
            let radius = radii[rng.random_range(0..radii.len())];
            Emitter {
                center,
                spot_radius: radius,
                kind: EmitterKind::IncoherentQd,
                peak_rate,
                visibility,
                alive: true,
                bleach_susceptible: false,
            }
        })
        .collect()
}

/// Forges a complete label. All randomness derives from `seed`.
pub fn build_label(text: &str, config: &LabelConfig, seed: u64) -> Result<LabelState> {
    config.validate()?;
    let mask = rasterize_glyph(text, config.canvas, config.font, config.glyph_scale)?;
    let mut rng = rng_from_seed(derive_seed(seed, PLACEMENT_STREAM));

    let mut emitters = if config.molecule_count > 0 {
        place_signal_emitters(
            &mask,
            config.molecule_count,
            &config.spot_radii,
            config.molecule_peak_rate,
            config.molecule_visibility,
            &mut rng,
        )?
    } else {
        Vec::new()
    };
    let molecules_bleach = config.layer_stack == LayerStack::Disposable;
    for e in &mut emitters {
        e.bleach_susceptible = molecules_bleach;
    }

    let mut qds = place_interference(
        &config.canvas,
        config.qd_count,
        &config.spot_radii,
        config.qd_peak_rate,
        config.qd_visibility,
        &mut rng,
    );
    for q in &mut qds {
        q.bleach_susceptible = config.qd_bleach_rate > 0.0;
    }
    emitters.extend(qds);

    Ok(LabelState {
        glyph_text: text.to_string(),
        canvas: config.canvas,
        font: config.font,
        glyph_scale: config.glyph_scale,
        emitters,
        layer_stack: config.layer_stack,
        read_count: 0,
        rng_seed: seed,
        bleach_model: config.bleach,
        qd_bleach_rate: config.qd_bleach_rate,
        illumination_time: 0.0,
    })
}

/// Functional form of [`LabelState::bleach`].
pub fn apply_bleaching<R: Rng + ?Sized>(mut state: LabelState, illumination_time: f64, rng: &mut R) -> LabelState {
    state.bleach(illumination_time, rng);
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use crate::stats;

    fn mask(text: &str) -> GlyphMask {
        rasterize_glyph(text, Canvas::default(), FontSource::Builtin5x7, DEFAULT_GLYPH_SCALE).unwrap()
    }

    #[test]
    fn qc_mask_area_is_near_reference() {
        let m = mask("QC");
        // 30 lit cells of 26x26 px
        assert_eq!(m.area(), 30 * 26 * 26);
        assert!((15_000..25_000).contains(&m.area()));
    }

    #[test]
    fn narrow_glyphs_have_smaller_area() {
        assert!(mask("I").area() < mask("W").area());
    }

    #[test]
    fn rasterisation_is_deterministic() {
        assert_eq!(mask("H"), mask("H"));
        assert_ne!(mask("H").bitmap(), mask("N").bitmap());
    }

    #[test]
    fn rejects_bad_text() {
        let c = Canvas::default();
        let f = FontSource::Builtin5x7;
        assert!(matches!(rasterize_glyph("h", c, f, 26), Err(Error::UnsupportedCharacter('h'))));
        assert!(matches!(rasterize_glyph("1A", c, f, 26), Err(Error::UnsupportedText(_))));
        assert!(matches!(rasterize_glyph("ABC", c, f, 26), Err(Error::UnsupportedText(_))));
        assert!(matches!(rasterize_glyph("", c, f, 26), Err(Error::UnsupportedText(_))));
        assert!(matches!(rasterize_glyph("QC", c, f, 60), Err(Error::GlyphTooLarge { .. })));
    }

    #[test]
    fn signal_emitters_land_inside_mask() {
        let m = mask("QC");
        let mut rng = rng_from_seed(1);
        let e = place_signal_emitters(&m, 100, &[3, 4], 1.0, 0.9, &mut rng).unwrap();
        assert_eq!(e.len(), 100);
        assert!(e.iter().all(|e| m.contains(e.center.x, e.center.y)));
        let mut centers: Vec<_> = e.iter().map(|e| (e.center.x, e.center.y)).collect();
        centers.sort_unstable();
        centers.dedup();
        assert_eq!(centers.len(), 100);
        assert!(e.iter().all(|e| e.spot_radius == 3 || e.spot_radius == 4));

        let one = place_signal_emitters(&m, 1, &[3], 1.0, 0.9, &mut rng).unwrap();
        assert_eq!(one.len(), 1);
        assert!(m.contains(one[0].center.x, one[0].center.y));
    }

    #[test]
    fn placement_is_seed_deterministic() {
        let m = mask("H");
        let a = place_signal_emitters(&m, 50, &[3, 4], 1.0, 0.9, &mut rng_from_seed(9)).unwrap();
        let b = place_signal_emitters(&m, 50, &[3, 4], 1.0, 0.9, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn placement_errors() {
        let m = mask("I");
        let mut rng = rng_from_seed(2);
        assert!(matches!(
            place_signal_emitters(&m, m.area() + 1, &[3], 1.0, 1.0, &mut rng),
            Err(Error::MaskTooSmall { .. })
        ));
        let empty = GlyphMask::from_bitmap(Canvas::new(4, 4), "", vec![false; 16]);
        assert!(matches!(place_signal_emitters(&empty, 1, &[3], 1.0, 1.0, &mut rng), Err(Error::EmptyMask)));
    }

    #[test]
    fn interference_counts() {
        let c = Canvas::default();
        let mut rng = rng_from_seed(3);
        let q = place_interference(&c, 1000, &[3, 4], 1.0, 0.0, &mut rng);
        assert_eq!(q.len(), 1000);
        assert!(q.iter().all(|e| e.kind == EmitterKind::IncoherentQd && e.visibility == 0.0));
        assert!(q.iter().all(|e| e.center.x < 512 && e.center.y < 512));
        assert!(place_interference(&c, 0, &[3], 1.0, 0.0, &mut rng).is_empty());
    }

    #[test]
    fn interference_is_uniform_over_canvas() {
        // 8x8 grid of cells, 200 seeds x 1000 centres.
        let c = Canvas::default();
        let mut counts = vec![0u64; 64];
        for seed in 0..200 {
            let mut rng = rng_from_seed(1000 + seed);
            for e in place_interference(&c, 1000, &[3], 1.0, 0.0, &mut rng) {
                counts[(e.center.y / 64 * 8 + e.center.x / 64) as usize] += 1;
            }
        }
        let p = stats::chi_square_uniform_p_value(&counts);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn spot_disks_are_clipped() {
        let c = Canvas::new(16, 16);
        assert_eq!(disk_pixels(&c, Pixel { x: 8, y: 8 }, 3).len(), 29);
        assert_eq!(disk_pixels(&c, Pixel { x: 8, y: 8 }, 4).len(), 49);
        let corner = disk_pixels(&c, Pixel { x: 0, y: 0 }, 3);
        assert!(corner.len() < 29);
        assert!(corner.iter().all(|&i| i < 256));
    }

    #[test]
    fn default_label_matches_reference_scenario() {
        let label = build_label("H", &LabelConfig::default(), 5).unwrap();
        assert_eq!(label.molecule_count(), 100);
        assert_eq!(label.qd_count(), 1000);
        assert_eq!(label.read_count, 0);
        let m = label.glyph_mask().unwrap();
        assert!(label.molecules().all(|e| m.contains(e.center.x, e.center.y)));
        assert!(label.molecules().all(|e| e.bleach_susceptible && e.visibility > 0.9));
        assert!(label.interference().all(|e| !e.bleach_susceptible && e.visibility < 1e-9));
    }

    #[test]
    fn reusable_stack_disables_bleaching() {
        let cfg = LabelConfig {
            layer_stack: LayerStack::QuenchInhibited,
            ..LabelConfig::default()
        };
        let mut label = build_label("H", &cfg, 5).unwrap();
        assert!(label.molecules().all(|e| !e.bleach_susceptible));
        label.bleach(100.0, &mut rng_from_seed(1));
        assert_eq!(label.alive_molecules(), 100);
    }

    #[test]
    fn plain_label_without_interference() {
        let cfg = LabelConfig {
            qd_count: 0,
            ..LabelConfig::default()
        };
        let label = build_label("QC", &cfg, 1).unwrap();
        assert_eq!(label.qd_count(), 0);
        assert_eq!(label.molecule_count(), 100);
    }

    #[test]
    fn build_is_deterministic() {
        let cfg = LabelConfig::default();
        assert_eq!(build_label("K", &cfg, 77).unwrap(), build_label("K", &cfg, 77).unwrap());
        assert_ne!(build_label("K", &cfg, 77).unwrap(), build_label("K", &cfg, 78).unwrap());
    }

    #[test]
    fn zero_illumination_is_a_no_op() {
        let label = build_label("H", &LabelConfig::default(), 5).unwrap();
        let after = apply_bleaching(label.clone(), 0.0, &mut rng_from_seed(1));
        assert_eq!(after, label);
    }

    #[test]
    fn bleaching_is_monotone() {
        let mut label = build_label("H", &LabelConfig::default(), 5).unwrap();
        let mut rng = rng_from_seed(11);
        let mut prev: Vec<bool> = label.emitters.iter().map(|e| e.alive).collect();
        for _ in 0..5 {
            label.bleach(0.2, &mut rng);
            let now: Vec<bool> = label.emitters.iter().map(|e| e.alive).collect();
            assert!(prev.iter().zip(&now).all(|(p, n)| *p || !*n));
            prev = now;
        }
        assert!(label.interference().all(|e| e.alive));
        assert!((label.illumination_time - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_life_bleaching_halves_on_average() {
        let t = 0.3;
        let cfg = LabelConfig {
            bleach: BleachModel::with_rate(std::f64::consts::LN_2 / t).unwrap(),
            qd_count: 0,
            ..LabelConfig::default()
        };
        let label = build_label("W", &cfg, 1).unwrap();
        let n0 = label.alive_molecules() as f64;
        let survivors: Vec<f64> = (0..100)
            .map(|s| apply_bleaching(label.clone(), t, &mut rng_from_seed(s)).alive_molecules() as f64)
            .collect();
        let mean = survivors.iter().sum::<f64>() / 100.0;
        // binomial(100, 1/2) per trial, mean of 100 trials
        let sigma = (n0 * 0.25 / 100.0).sqrt();
        assert!((mean - n0 / 2.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn calibrated_rate_takes_150_to_about_20() {
        let k = calibrated_bleach_rate();
        assert!((k - 2.2388).abs() < 1e-3);
        let cfg = LabelConfig {
            molecule_count: 150,
            qd_count: 0,
            ..LabelConfig::default()
        };
        let label = build_label("W", &cfg, 1).unwrap();
        let mean = (0..200)
            .map(|s| apply_bleaching(label.clone(), 0.9, &mut rng_from_seed(s)).alive_molecules() as f64)
            .sum::<f64>()
            / 200.0;
        assert!((mean - 20.0).abs() < 3.0 * (150.0 * (20.0 / 150.0) * (130.0 / 150.0) / 200.0f64).sqrt());
    }
}
