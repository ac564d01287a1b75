//! Write a small labelled dataset of frequency-domain images.

use smqc::dataset::export_dataset;
use smqc::recognizer::TrialConfig;

fn main() -> smqc::Result<()> {
    let dir = std::env::temp_dir().join("smqc-example-dataset");
    let rows = export_dataset(&TrialConfig::default(), &[30.0, 100.0], 12, true, 7, &dir)?;
    for r in rows.iter().take(4) {
        println!("{} {:?} <N> = {} seed {}", r.filename, r.glyph_label, r.mean_n, r.seed);
    }
    println!("{} images and manifest.csv in {}", rows.len(), dir.display());
    Ok(())
}
