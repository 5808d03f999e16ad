//! Sweep the injected background bias and watch the 8-pixel audit move
//! from chance to near-perfect.
//!
//! cargo run --release --example synth_bias_audit

use leakprobe::{generate, run_audit, ForestConfig, ProbeId, SplitSpec, SynthConfig};

fn main() -> leakprobe::Result<()> {
    let split = SplitSpec::new(0.8, 42)?;
    let forest = ForestConfig { seed: 42, ..ForestConfig::default() };
    for strength in [0.0, 0.25, 0.5, 1.0] {
        let set = generate(&SynthConfig { bias_strength: strength, ..SynthConfig::default() })?;
        let report = run_audit(&set, ProbeId::EightPixel, &split, &forest)?;
        println!(
            "bias {strength:.2}: accuracy {:5.1}% (chance {:.1}%, flagged: {})",
            report.accuracy_percent, report.chance_percent, report.bias_flag
        );
    }
    Ok(())
}
