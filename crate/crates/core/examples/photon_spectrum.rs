//! Photon streams of one coherent molecule and one quantum dot, their
//! modulation spectra and the visibility recovered from each.

use smqc::coherence::{self, PulsePairDrive};
use smqc::imaging::{default_frequency_grid, dft_magnitude, estimate_visibility, modulation_spectrum};
use smqc::label::{Canvas, Emitter, EmitterKind, Pixel};
use smqc::photon::{simulate_emitter_stream, ExposureConfig};
use smqc::seed::rng_from_seed;

fn main() -> smqc::Result<()> {
    let drive = PulsePairDrive::default();
    let exposure = ExposureConfig::default();
    let canvas = Canvas::new(32, 32);
    let delay = drive.inter_pulse_delay;

    for (name, kind, t2) in [
        ("molecule", EmitterKind::CoherentMolecule, coherence::DEFAULT_MOLECULE_T2),
        ("quantum dot", EmitterKind::IncoherentQd, coherence::DEFAULT_QD_T2),
    ] {
        let mut emitter = Emitter {
            center: Pixel { x: 16, y: 16 },
            spot_radius: 3,
            kind,
            peak_rate: 2e6,
            visibility: coherence::visibility(delay, t2)?,
            alive: true,
            bleach_susceptible: false,
        };
        let (photons, _) =
            simulate_emitter_stream(&mut emitter, 0.0, &canvas, &drive, &exposure, &mut rng_from_seed(1));
        let times: Vec<f64> = photons.iter().map(|&(t, _)| t).collect();
        let spectrum = modulation_spectrum(&times, &default_frequency_grid())?;
        let f = dft_magnitude(&times, drive.omega_mod());
        let v = estimate_visibility(f, times.len() as u64, exposure.periods(&drive))?;
        println!(
            "{name}: {} photons, spectrum peak {:?} Hz, f/N = {:.4}, estimated V = {:.3} (true {:.3})",
            times.len(),
            spectrum.peak_frequency().unwrap_or(f64::NAN),
            f / times.len() as f64,
            v.value,
            emitter.visibility
        );
    }
    Ok(())
}
