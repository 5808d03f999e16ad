//! Blur audits on full, foreground-only and background-only images of a
//! synthetic set whose blur radius grows with the class.
//!
//! cargo run --release --example blur_triplet

use leakprobe::synthgen::generate_with_foreground;
use leakprobe::{run_blur_triplet, BiasChannel, ForestConfig, SplitSpec, SynthConfig};

fn main() -> leakprobe::Result<()> {
    let cfg = SynthConfig { bias_channel: BiasChannel::Blur, ..SynthConfig::default() };
    let out = generate_with_foreground(&cfg)?;
    let split = SplitSpec::new(0.8, 42)?;
    let forest = ForestConfig { seed: 42, ..ForestConfig::default() };

    for report in run_blur_triplet(&out.images, &out.foreground, &split, &forest)? {
        println!("{:<32} {:5.1}% (chance {:.1}%)", report.dataset_name, report.accuracy_percent, report.chance_percent);
    }
    Ok(())
}
