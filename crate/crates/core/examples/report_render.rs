//! Render one audit as text and JSON, then parse the JSON back.
//!
//! cargo run --release --example report_render

use leakprobe::{generate, render_report, run_audit, AuditReport, ForestConfig, ProbeId, ReportFormat, SplitSpec, SynthConfig};

fn main() -> leakprobe::Result<()> {
    let set = generate(&SynthConfig { n_per_class: 60, bias_strength: 0.5, ..SynthConfig::default() })?;
    let report = run_audit(&set, ProbeId::EightPixel, &SplitSpec::default(), &ForestConfig::default())?;

    println!("{}", render_report(&report, ReportFormat::Text));
    let json = render_report(&report, ReportFormat::Json);
    println!("{json}");

    let parsed = AuditReport::from_json(&json)?;
    assert_eq!(parsed.model_fingerprint, report.model_fingerprint);
    Ok(())
}
