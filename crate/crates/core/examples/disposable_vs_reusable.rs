//! Three scheduled reads of disposable and quench-inhibited labels.

use smqc::label::LayerStack;
use smqc::recognizer::{repeated_read_trial, ReadSchedule, TrialConfig};

fn main() -> smqc::Result<()> {
    let schedule = ReadSchedule::default();
    println!("reads end at {:?} s of cumulative illumination", schedule.cumulative_ends);
    for stack in [LayerStack::Disposable, LayerStack::QuenchInhibited] {
        let mut config = TrialConfig::default();
        config.label.molecule_count = 150;
        config.label.layer_stack = stack;
        println!("{stack:?}:");
        for row in repeated_read_trial(&config, &schedule, 60, 5)? {
            println!(
                "  read {}: {:6.1} molecules alive, accuracy {:.3} [{:.3}, {:.3}]",
                row.read_index, row.survivors, row.accuracy, row.ci_low, row.ci_high
            );
        }
    }
    Ok(())
}
