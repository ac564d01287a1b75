//! Forging, reading and decoding of fluorescent security labels whose glyph
//! is written in coherent single molecules and hidden under incoherent
//! quantum-dot background.
//!
//! A read drives every emitter with a phase-modulated pulse pair. Coherent
//! molecules emit at the modulation frequency while the background does not,
//! so the per-pixel modulation magnitude reveals a glyph that the photon-count
//! image conceals. Molecules photobleach under readout, which makes a label
//! consumable unless its layer stack inhibits quenching.
//!
//! - [`coherence`]: pulse-pair populations, visibility, dephasing times.
//! - [`label`]: glyph masks, emitter placement, bleaching.
//! - [`photon`]: per-photon and aggregated photon generation.
//! - [`imaging`]: modulation magnitudes, spectra, time and frequency images.
//! - [`recognizer`]: template decoding, accuracy sweeps, repeated reads.
//! - [`fit`]: the accuracy-versus-molecule-count model.
//! - [`io`], [`config`], [`dataset`], [`cli`]: files, configuration, dataset export and the `smqc` binary.
//!
//! Runnable examples (`cargo run --example <name>`):
//!
//! | example | shows |
//! |---|---|
//! | `coherence` | population against relative phase, visibility, dephasing geometry |
//! | `forge_label` | forging, saving and verifying a label |
//! | `photon_spectrum` | molecule and quantum-dot spectra, visibility estimates |
//! | `concealment` | time against frequency image of one read |
//! | `disposable_vs_reusable` | scheduled repeated reads of both layer stacks |
//! | `accuracy_sweep` | accuracy against mean molecule count |
//! | `fit_accuracy` | fitting the accuracy model |
//! | `export_dataset` | labelled images plus manifest |

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coherence;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fit;
pub mod font;
pub mod imaging;
pub mod io;
pub mod label;
pub mod photon;
pub mod recognizer;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
