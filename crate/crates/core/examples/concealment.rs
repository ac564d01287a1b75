//! One read of a default "H" label: the glyph is hidden in the photon-count
//! image and recovered in the frequency-domain image.

use rand::Rng;
use smqc::imaging::contrast_ratio;
use smqc::io::write_image_pgm;
use smqc::label::build_label;
use smqc::recognizer::{read_and_decode, TrialConfig};
use smqc::seed::rng_from_seed;

fn main() -> smqc::Result<()> {
    let config = TrialConfig::default();
    let templates = config.templates()?;
    let mut rng = rng_from_seed(3);
    let mut label = build_label("H", &config.label, rng.random())?;
    let mask = label.glyph_mask()?;

    let (acc, summary) = config.expose(&mut label, &mut rng)?;
    let (time, freq) = (acc.time_image(), acc.freq_image());
    println!(
        "{} emitter photons, {} dark photons",
        summary.emitter_photons, summary.dark_photons
    );
    println!(
        "contrast on the glyph: time {:.2}, frequency {:.2}",
        contrast_ratio(&time, &mask)?,
        contrast_ratio(&freq, &mask)?
    );

    let dir = std::env::temp_dir();
    write_image_pgm(&dir.join("smqc-example-time.pgm"), &time)?;
    write_image_pgm(&dir.join("smqc-example-freq.pgm"), &freq)?;
    println!("images written to {}", dir.display());

    let mut again = build_label("H", &config.label, 99)?;
    let out = read_and_decode(&mut again, &config, &templates, &mut rng)?;
    println!("decoded: frequency {:?}, time {:?}", out.freq.label(), out.time.label());
    Ok(())
}
