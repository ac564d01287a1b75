//! Forge a label, save it with its checksum and load it back.

use smqc::io::{read_label, write_label};
use smqc::label::{build_label, LabelConfig};

fn main() -> smqc::Result<()> {
    let text = std::env::args().nth(1).unwrap_or_else(|| "QC".to_string());
    let state = build_label(&text, &LabelConfig::default(), 42)?;
    let mask = state.glyph_mask()?;
    println!(
        "{text:?}: mask {} px, {} molecules inside it, {} quantum dots on a {}x{} canvas",
        mask.area(),
        state.molecule_count(),
        state.qd_count(),
        state.canvas.width,
        state.canvas.height
    );

    let path = std::env::temp_dir().join("smqc-example-label.json");
    write_label(&path, &state)?;
    assert_eq!(read_label(&path)?, state);
    println!("saved and verified {}", path.display());
    Ok(())
}
