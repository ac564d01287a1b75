//! Labelled frequency-domain images for training an external classifier.
//!
//! Directory layout written by [`export_dataset`]:
//!
//! ```text
//! out/
//!   manifest.csv        filename,glyph_label,mean_n,seed
//!   freq/00000.pgm      frequency-domain image, P5
//!   time/00000.pgm      time-domain image of the same read (optional)
//! ```
//!
//! Sample `i` depends only on the base seed and `i`, so a dataset is
//! byte-identical for a given seed whatever the thread count.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{FrequencyDomainImage, TimeDomainImage};
use crate::io::{write_image_pgm, write_manifest, ManifestRow};
use crate::label::build_label;
use crate::recognizer::{pick_glyph, sample_count, TrialConfig};
use crate::seed::{derive_seed, rng_from_seed};

const CHUNK: usize = 32;

#[derive(Debug, Clone)]
pub struct DatasetSample {
    pub index: usize,
    pub seed: u64,
    pub glyph: String,
    pub mean_n: f64,
    pub molecules: usize,
    pub freq: FrequencyDomainImage,
    pub time: TimeDomainImage,
}

/// Forges and reads one label: glyph uniform over the charset, mean
/// molecule count uniform over `mean_counts`, molecule count Poisson.
pub fn generate_sample(config: &TrialConfig, labels: &[String], mean_counts: &[f64], seed: u64) -> Result<DatasetSample> {
    if labels.is_empty() || mean_counts.is_empty() {
        return Err(Error::Config("dataset needs a charset and at least one mean count".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mean_n = mean_counts[rng.random_range(0..mean_counts.len())];
    let glyph = pick_glyph(labels, &mut rng).to_string();
    let mut cfg = config.label.clone();
    cfg.molecule_count = sample_count(mean_n, &mut rng);
    let mut label = build_label(&glyph, &cfg, rng.random())?;
    let (acc, _) = config.expose(&mut label, &mut rng)?;
    Ok(DatasetSample {
        index: 0,
        seed,
        glyph,
        mean_n,
        molecules: cfg.molecule_count,
        freq: acc.freq_image(),
        time: acc.time_image(),
    })
}

pub fn sample_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, index as u64)
}

pub fn sample_filename(kind: &str, index: usize) -> String {
    format!("{kind}/{index:05}.pgm")
}

/// Writes `count` samples and the manifest under `out_dir`.
pub fn export_dataset(
    config: &TrialConfig,
    mean_counts: &[f64],
    count: usize,
    include_time: bool,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<ManifestRow>> {
    if count == 0 {
        return Err(Error::Config("dataset count must be at least 1".into()));
    }
    config.validate()?;
    let labels: Vec<String> = config.charset.labels();
    fs::create_dir_all(out_dir.join("freq"))?;
    if include_time {
        fs::create_dir_all(out_dir.join("time"))?;
    }

    let mut manifest = Vec::with_capacity(count);
    let indices: Vec<usize> = (0..count).collect();
    for chunk in indices.chunks(CHUNK) {
        let samples = chunk
            .par_iter()
            .map(|&i| {
                let mut s = generate_sample(config, &labels, mean_counts, sample_seed(seed, i))?;
                s.index = i;
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        for s in samples {
            let name = sample_filename("freq", s.index);
            write_image_pgm(&out_dir.join(&name), &s.freq)?;
            if include_time {
                write_image_pgm(&out_dir.join(sample_filename("time", s.index)), &s.time)?;
            }
            manifest.push(ManifestRow {
                filename: name,
                glyph_label: s.glyph,
                mean_n: s.mean_n,
                seed: s.seed,
            });
        }
    }
    write_manifest(&out_dir.join("manifest.csv"), &manifest)?;
    Ok(manifest)
}
