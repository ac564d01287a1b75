//! Recognition accuracy against mean molecule count.

use smqc::config::DEFAULT_MEAN_COUNTS;
use smqc::recognizer::{accuracy_sweep, interpolate_accuracy, TrialConfig};

fn main() -> smqc::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let rows = accuracy_sweep(&DEFAULT_MEAN_COUNTS, trials, &TrialConfig::default(), 1)?;
    for r in &rows {
        println!("<N> = {:5}: {:.3} [{:.3}, {:.3}]", r.mean_n, r.accuracy, r.ci_low, r.ci_high);
    }
    if let Some(a) = interpolate_accuracy(&rows, 50.0) {
        println!("interpolated at <N> = 50: {a:.3}");
    }
    Ok(())
}
