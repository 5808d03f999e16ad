//! Probe, split, fit, evaluate against chance, and report.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{random_guess_accuracy, split_indices, LabeledImageSet, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::forest::{accuracy, fit, ForestConfig, RandomForestModel};
use crate::probes::{
    build_blur_matrix, build_feature_matrix, separate_background, BlurRegion, FeatureMatrix, ProbeId, BLUR_METRIC_NAME,
    EIGHT_PIXEL_LAYOUT,
};

pub const REPORT_SCHEMA: &str = "leakprobe.report.v1";

/// Fixed probe conventions echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub blur_metric: String,
    pub blur_region: BlurRegion,
    pub pixel_coords: Vec<String>,
}

impl ProbeSettings {
    pub fn new(blur_region: BlurRegion) -> Self {
        ProbeSettings {
            blur_metric: BLUR_METRIC_NAME.to_string(),
            blur_region,
            pixel_coords: EIGHT_PIXEL_LAYOUT.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self::new(BlurRegion::FullFrame)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema: String,
    pub dataset_name: String,
    pub probe_id: ProbeId,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub per_class_test_counts: BTreeMap<String, usize>,
    pub accuracy_percent: f64,
    pub chance_percent: f64,
    pub bias_ratio: f64,
    /// Three-sigma normal band around chance for this test size, in points.
    pub chance_band_points: f64,
    pub bias_flag: bool,
    pub seed: u64,
    pub train_fraction: f64,
    pub forest_config: ForestConfig,
    pub probe_settings: ProbeSettings,
    pub model_fingerprint: String,
    pub toolkit_version: String,
}

/// `3 * sqrt(chance * (100 - chance) / n_test)`, in percentage points.
pub fn chance_band(chance_percent: f64, n_test: usize) -> f64 {
    3.0 * (chance_percent * (100.0 - chance_percent) / n_test as f64).sqrt()
}

/// Outcome of fitting on one split of a feature matrix.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub model: RandomForestModel,
    pub accuracy_percent: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub per_class_test_counts: Vec<usize>,
}

/// Fits on the train rows only and scores the test rows.
pub fn evaluate_split(matrix: &FeatureMatrix, split: &Split, config: &ForestConfig) -> Result<Evaluation> {
    let train = matrix.select(&split.train);
    let test = matrix.select(&split.test);
    let model = fit(&train, config).map_err(|e| e.at_stage("fit"))?;
    let accuracy_percent = accuracy(&model, &test).map_err(|e| e.at_stage("evaluate"))?;
    let mut per_class = vec![0; matrix.n_classes];
    for &l in &test.labels {
        per_class[l] += 1;
    }
    Ok(Evaluation {
        model,
        accuracy_percent,
        n_train: train.rows,
        n_test: test.rows,
        per_class_test_counts: per_class,
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    dataset_name: String,
    class_names: &[String],
    probe: ProbeId,
    blur_region: BlurRegion,
    n_features: usize,
    eval: &Evaluation,
    split_spec: &SplitSpec,
    config: &ForestConfig,
) -> Result<AuditReport> {
    let chance = random_guess_accuracy(class_names.len())?;
    let band = chance_band(chance, eval.n_test);
    Ok(AuditReport {
        schema: REPORT_SCHEMA.to_string(),
        dataset_name,
        probe_id: probe,
        n_features,
        n_classes: class_names.len(),
        n_train: eval.n_train,
        n_test: eval.n_test,
        per_class_test_counts: class_names
            .iter()
            .cloned()
            .zip(eval.per_class_test_counts.iter().copied())
            .collect(),
        accuracy_percent: eval.accuracy_percent,
        chance_percent: chance,
        bias_ratio: eval.accuracy_percent / chance,
        chance_band_points: band,
        bias_flag: eval.accuracy_percent - chance > band,
        seed: split_spec.seed,
        train_fraction: split_spec.train_fraction,
        forest_config: config.clone(),
        probe_settings: ProbeSettings::new(blur_region),
        model_fingerprint: eval.model.fingerprint(),
        toolkit_version: crate::VERSION.to_string(),
    })
}

fn require_classes(set: &LabeledImageSet) -> Result<()> {
    if set.n_classes() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{} has {} class(es); an audit needs at least 2",
            set.name,
            set.n_classes()
        ))
        .at_stage("ingest"));
    }
    Ok(())
}

pub fn run_audit(
    set: &LabeledImageSet,
    probe: ProbeId,
    split_spec: &SplitSpec,
    forest_config: &ForestConfig,
) -> Result<AuditReport> {
    require_classes(set)?;
    let matrix = build_feature_matrix(set, probe).map_err(|e| e.at_stage("probe"))?;
    let split = split_indices(matrix.rows, split_spec).map_err(|e| e.at_stage("split"))?;
    let eval = evaluate_split(&matrix, &split, forest_config)?;
    assemble(set.name.clone(), &set.class_names(), probe, BlurRegion::FullFrame, matrix.cols, &eval, split_spec, forest_config)
}

/// Background set: each original image with its foreground blacked out.
pub fn background_set(original: &LabeledImageSet, foreground: &LabeledImageSet) -> Result<LabeledImageSet> {
    check_aligned(original, foreground)?;
    let records = original
        .records
        .iter()
        .zip(&foreground.records)
        .map(|(o, f)| separate_background(o, f))
        .collect::<Result<Vec<_>>>()?;
    LabeledImageSet::with_class_index(format!("{}_bg", original.name), records, original.class_index.clone())
}

fn check_aligned(a: &LabeledImageSet, b: &LabeledImageSet) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Misaligned {
            index: a.len().min(b.len()),
            message: format!("{} has {} images, {} has {}", a.name, a.len(), b.name, b.len()),
        });
    }
    for (i, (x, y)) in a.records.iter().zip(&b.records).enumerate() {
        if x.label != y.label {
            return Err(Error::Misaligned {
                index: i,
                message: format!(
                    "{} is labeled {:?} but {} is labeled {:?}",
                    x.source_path.display(),
                    x.label,
                    y.source_path.display(),
                    y.label
                ),
            });
        }
        if !x.same_shape(y) {
            return Err(Error::Misaligned {
                index: i,
                message: format!(
                    "{} is {}x{}x{} but {} is {}x{}x{}",
                    x.source_path.display(),
                    x.width,
                    x.height,
                    x.channels,
                    y.source_path.display(),
                    y.width,
                    y.height,
                    y.channels
                ),
            });
        }
    }
    Ok(())
}

/// Blur-probe audits of the full, foreground-only and background-only
/// images, all evaluated on one shared split. Masked images are scored with
/// [`BlurRegion::Unmasked`]; see [`run_blur_triplet_with_region`].
pub fn run_blur_triplet(
    original: &LabeledImageSet,
    foreground: &LabeledImageSet,
    split_spec: &SplitSpec,
    forest_config: &ForestConfig,
) -> Result<[AuditReport; 3]> {
    run_blur_triplet_with_region(original, foreground, split_spec, forest_config, BlurRegion::Unmasked)
}

/// Like [`run_blur_triplet`], with an explicit blur region for the
/// foreground and background sets. The full images are always scored over
/// the full frame.
pub fn run_blur_triplet_with_region(
    original: &LabeledImageSet,
    foreground: &LabeledImageSet,
    split_spec: &SplitSpec,
    forest_config: &ForestConfig,
    masked_region: BlurRegion,
) -> Result<[AuditReport; 3]> {
    require_classes(original)?;
    let background = background_set(original, foreground).map_err(|e| e.at_stage("separate"))?;
    let split = split_indices(original.len(), split_spec).map_err(|e| e.at_stage("split"))?;
    let class_names = original.class_names();
    let base = &original.name;

    let run = |set: &LabeledImageSet, name: String, region: BlurRegion| -> Result<AuditReport> {
        let mut matrix = build_blur_matrix(set, region).map_err(|e| e.at_stage("probe"))?;
        // labels come from the original so all three share one class map
        matrix.labels = original.label_indices();
        let eval = evaluate_split(&matrix, &split, forest_config)?;
        assemble(name, &class_names, ProbeId::Blur, region, matrix.cols, &eval, split_spec, forest_config)
    };
    Ok([
        run(original, format!("{base}_blur"), BlurRegion::FullFrame)?,
        run(foreground, format!("{base}_fg_blur"), masked_region)?,
        run(&background, format!("{base}_bg_blur"), masked_region)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

pub fn render_report(report: &AuditReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes"),
        ReportFormat::Text => render_text(report),
    }
}

impl AuditReport {
    pub fn from_json(s: &str) -> Result<Self> {
        let r: AuditReport = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        if r.schema != REPORT_SCHEMA {
            return Err(Error::Serialization(format!("unsupported report schema {:?}", r.schema)));
        }
        Ok(r)
    }
}

fn render_text(r: &AuditReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14} {}", "dataset", r.dataset_name);
    let _ = writeln!(s, "{:<14} {} ({} features)", "probe", r.probe_id, r.n_features);
    if r.probe_id == ProbeId::Blur {
        let region = match r.probe_settings.blur_region {
            BlurRegion::FullFrame => "full frame",
            BlurRegion::Unmasked => "unmasked pixels only",
        };
        let _ = writeln!(s, "{:<14} {}", "blur region", region);
    }
    let _ = writeln!(s, "{:<14} {}", "classes", r.n_classes);
    let _ = writeln!(
        s,
        "{:<14} train {} / test {} (fraction {}, seed {})",
        "split", r.n_train, r.n_test, r.train_fraction, r.seed
    );
    let _ = writeln!(s, "{:<14} {} trees, seed {}", "forest", r.forest_config.n_trees, r.forest_config.seed);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<28} {:>12} {:>12}", "dataset", "random guess", "accuracy");
    let _ = writeln!(
        s,
        "{:<28} {:>11.1}% {:>11.1}%",
        r.dataset_name, r.chance_percent, r.accuracy_percent
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "bias ratio {:.1}", r.bias_ratio);
    let verdict = if r.bias_flag {
        "above chance band: label-correlated bias detected"
    } else {
        "within chance band"
    };
    let _ = writeln!(s, "chance band +/-{:.1} points: {verdict}", r.chance_band_points);
    s
}
