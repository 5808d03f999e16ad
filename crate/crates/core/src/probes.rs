//! Label-uninformative probes: eight background pixels and a scalar blur score,
//! plus mask-based foreground/background separation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ImageRecord, LabeledImageSet};
use crate::error::{Error, Result};

/// Name recorded in reports for the blur estimator.
pub const BLUR_METRIC_NAME: &str = "variance of 3x3 Laplacian [[0,1,0],[1,-4,1],[0,1,0]] over valid interior, luma 0.299/0.587/0.114";

/// Symbolic description of the sampled coordinates, in emission order.
pub const EIGHT_PIXEL_LAYOUT: [&str; 8] = [
    "(0,0)",
    "(W-1,0)",
    "(0,H-1)",
    "(W-1,H-1)",
    "(W/2,0)",
    "(W/2,H-1)",
    "(0,H/2)",
    "(W-1,H/2)",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProbeId {
    #[serde(rename = "8px")]
    EightPixel,
    #[serde(rename = "blur")]
    Blur,
}

impl ProbeId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeId::EightPixel => "8px",
            ProbeId::Blur => "blur",
        }
    }

    pub fn apply(self, image: &ImageRecord) -> Result<ProbeVector> {
        match self {
            ProbeId::EightPixel => eight_pixel_probe(image),
            ProbeId::Blur => Ok(ProbeVector {
                probe_id: ProbeId::Blur,
                features: vec![blur_metric(image)?],
            }),
        }
    }
}

impl fmt::Display for ProbeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProbeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "8px" => Ok(ProbeId::EightPixel),
            "blur" => Ok(ProbeId::Blur),
            _ => Err(Error::InvalidArgument(format!(
                "unknown probe {s:?} (valid: 8px, blur)"
            ))),
        }
    }
}

/// Which pixels the blur probe scores. `Unmasked` ignores Laplacian stencils
/// that touch pure-black mask pixels, so the artificial step at a mask
/// boundary does not dominate the score of foreground/background images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlurRegion {
    #[default]
    FullFrame,
    Unmasked,
}

impl BlurRegion {
    pub fn score(self, image: &ImageRecord) -> Result<f64> {
        match self {
            BlurRegion::FullFrame => blur_metric(image),
            BlurRegion::Unmasked => masked_blur_metric(image),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeVector {
    pub probe_id: ProbeId,
    pub features: Vec<f64>,
}

/// The eight sampled `(x, y)` positions for a `width` x `height` frame.
pub fn eight_pixel_coords(width: usize, height: usize) -> [(usize, usize); 8] {
    let (w, h) = (width - 1, height - 1);
    let (cx, cy) = (width / 2, height / 2);
    [
        (0, 0),
        (w, 0),
        (0, h),
        (w, h),
        (cx, 0),
        (cx, h),
        (0, cy),
        (w, cy),
    ]
}

/// Raw intensities of the four corners and four side centers, channels
/// emitted consecutively per pixel.
pub fn eight_pixel_probe(image: &ImageRecord) -> Result<ProbeVector> {
    if image.width < 2 || image.height < 2 {
        return Err(Error::Probe {
            path: image.source_path.clone(),
            message: format!(
                "8px probe needs at least 2x2, got {}x{}",
                image.width, image.height
            ),
        });
    }
    let features = eight_pixel_coords(image.width, image.height)
        .iter()
        .flat_map(|&(x, y)| image.pixel(x, y).iter().map(|&v| v as f64))
        .collect();
    Ok(ProbeVector {
        probe_id: ProbeId::EightPixel,
        features,
    })
}

/// Per-pixel luma as reals; grayscale passes through.
pub fn luma(image: &ImageRecord) -> Vec<f64> {
    match image.channels {
        1 => image.pixels.iter().map(|&v| v as f64).collect(),
        _ => image
            .pixels
            .chunks_exact(image.channels)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect(),
    }
}

/// Population variance of the 4-neighbour Laplacian over the valid interior.
pub fn blur_metric(image: &ImageRecord) -> Result<f64> {
    let (w, h) = (image.width, image.height);
    if w < 3 || h < 3 {
        return Err(Error::Probe {
            path: image.source_path.clone(),
            message: format!("blur metric needs at least 3x3, got {w}x{h}"),
        });
    }
    let y = luma(image);
    let mut response = Vec::with_capacity((w - 2) * (h - 2));
    for row in 1..h - 1 {
        for col in 1..w - 1 {
            let i = row * w + col;
            response.push(y[i - w] + y[i + w] + y[i - 1] + y[i + 1] - 4.0 * y[i]);
        }
    }
    let n = response.len() as f64;
    let mean = response.iter().sum::<f64>() / n;
    Ok(response.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n)
}

/// Blur score restricted to the unmasked region: like [`blur_metric`], but
/// only stencils whose five pixels are all non-black contribute. Returns 0
/// when no stencil qualifies.
pub fn masked_blur_metric(image: &ImageRecord) -> Result<f64> {
    let (w, h) = (image.width, image.height);
    if w < 3 || h < 3 {
        return Err(Error::Probe {
            path: image.source_path.clone(),
            message: format!("blur metric needs at least 3x3, got {w}x{h}"),
        });
    }
    let y = luma(image);
    let black: Vec<bool> = image
        .pixels
        .chunks_exact(image.channels)
        .map(|p| p.iter().all(|&v| v == 0))
        .collect();
    let mut response = Vec::new();
    for row in 1..h - 1 {
        for col in 1..w - 1 {
            let i = row * w + col;
            if [i, i - w, i + w, i - 1, i + 1].iter().any(|&j| black[j]) {
                continue;
            }
            response.push(y[i - w] + y[i + w] + y[i - 1] + y[i + 1] - 4.0 * y[i]);
        }
    }
    if response.is_empty() {
        return Ok(0.0);
    }
    let n = response.len() as f64;
    let mean = response.iter().sum::<f64>() / n;
    Ok(response.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n)
}

/// Keeps `original` wherever `foreground` is pure black and blacks out the rest.
pub fn separate_background(original: &ImageRecord, foreground: &ImageRecord) -> Result<ImageRecord> {
    if !original.same_shape(foreground) {
        return Err(Error::InvalidImage(format!(
            "{} is {}x{}x{} but foreground {} is {}x{}x{}",
            original.source_path.display(),
            original.width,
            original.height,
            original.channels,
            foreground.source_path.display(),
            foreground.width,
            foreground.height,
            foreground.channels
        )));
    }
    let c = original.channels;
    let mut pixels = vec![0u8; original.pixels.len()];
    for ((out, o), f) in pixels
        .chunks_exact_mut(c)
        .zip(original.pixels.chunks_exact(c))
        .zip(foreground.pixels.chunks_exact(c))
    {
        if f.iter().all(|&v| v == 0) {
            out.copy_from_slice(o);
        }
    }
    ImageRecord::new(
        original.source_path.clone(),
        original.label.clone(),
        original.width,
        original.height,
        c,
        pixels,
    )
}

/// Row-major `rows x cols` feature table with dense class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub probe_id: Option<ProbeId>,
}

impl FeatureMatrix {
    pub fn new(cols: usize, values: Vec<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidArgument("feature matrix needs at least one column".into()));
        }
        if values.len() != labels.len() * cols {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form {} rows of width {cols}",
                values.len(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidArgument(format!("label {l} out of range for {n_classes} classes")));
        }
        Ok(FeatureMatrix {
            rows: labels.len(),
            cols,
            values,
            labels,
            n_classes,
            probe_id: None,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Rows picked by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: indices.len(),
            cols: self.cols,
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            probe_id: self.probe_id,
        }
    }
}

/// Applies `probe` to every record; the first failing image aborts with its path.
pub fn build_feature_matrix(set: &LabeledImageSet, probe: ProbeId) -> Result<FeatureMatrix> {
    matrix_from(set, probe, |r| probe.apply(r).map(|v| v.features))
}

/// Blur-probe matrix scored over `region`.
pub fn build_blur_matrix(set: &LabeledImageSet, region: BlurRegion) -> Result<FeatureMatrix> {
    matrix_from(set, ProbeId::Blur, |r| region.score(r).map(|b| vec![b]))
}

fn matrix_from<F>(set: &LabeledImageSet, probe: ProbeId, features: F) -> Result<FeatureMatrix>
where
    F: Fn(&ImageRecord) -> Result<Vec<f64>> + Sync,
{
    if set.is_empty() {
        return Err(Error::InvalidArgument(format!("image set {} is empty", set.name)));
    }
    let vectors: Vec<Result<Vec<f64>>> = set.records.par_iter().map(&features).collect();
    let mut values = Vec::new();
    let mut cols = None;
    for (rec, v) in set.records.iter().zip(vectors) {
        let v = v?;
        match cols {
            None => cols = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(Error::Probe {
                    path: rec.source_path.clone(),
                    message: format!("yields {} features, earlier images yield {d}", v.len()),
                })
            }
            _ => {}
        }
        values.extend(v);
    }
    let mut m = FeatureMatrix::new(cols.unwrap_or(0), values, set.label_indices(), set.n_classes())?;
    m.probe_id = Some(probe);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> ImageRecord {
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                px.push(f(x, y));
            }
        }
        ImageRecord::new("t.png", "a", w, h, 1, px).unwrap()
    }

    #[test]
    fn constant_rgb_image() {
        let img = ImageRecord::new("c", "a", 256, 256, 3, [128u8, 64, 32].repeat(256 * 256)).unwrap();
        let p = eight_pixel_probe(&img).unwrap();
        assert_eq!(p.features.len(), 24);
        assert_eq!(p.features, [128.0, 64.0, 32.0].repeat(8));
    }

    #[test]
    fn four_by_four_coordinates() {
        let img = gray(4, 4, |x, y| (10 * x + y) as u8);
        assert_eq!(
            eight_pixel_coords(4, 4),
            [(0, 0), (3, 0), (0, 3), (3, 3), (2, 0), (2, 3), (0, 2), (3, 2)]
        );
        // value 10x + y evaluated at each listed coordinate
        let p = eight_pixel_probe(&img).unwrap();
        assert_eq!(p.features, vec![0.0, 30.0, 3.0, 33.0, 20.0, 23.0, 2.0, 32.0]);
    }

    #[test]
    fn degenerate_strips_rejected() {
        assert!(eight_pixel_probe(&gray(1, 5, |_, _| 0)).is_err());
        assert!(eight_pixel_probe(&gray(5, 1, |_, _| 0)).is_err());
        assert!(blur_metric(&gray(2, 5, |_, _| 0)).is_err());
    }

    #[test]
    fn blur_of_constant_is_zero() {
        assert_eq!(blur_metric(&gray(7, 5, |_, _| 77)).unwrap(), 0.0);
    }

    #[test]
    fn blur_of_checkerboard() {
        // Interior of a 4x4 0/255 checkerboard: responses +1020, -1020, -1020, +1020.
        let img = gray(4, 4, |x, y| if (x + y) % 2 == 1 { 255 } else { 0 });
        assert_eq!(blur_metric(&img).unwrap(), 1_040_400.0);
    }

    #[test]
    fn masked_blur_skips_black_stencils() {
        // left half black mask, right half a vertical 0/200 stripe pattern
        let img = gray(8, 5, |x, y| if x < 4 { 0 } else if (x + y) % 2 == 0 { 200 } else { 100 });
        let full = blur_metric(&img).unwrap();
        let masked = masked_blur_metric(&img).unwrap();
        // only columns 5 and 6 have black-free stencils: responses +-400 alternate
        assert_eq!(masked, 160_000.0);
        assert!(full != masked);
        assert_eq!(masked_blur_metric(&gray(5, 5, |_, _| 0)).unwrap(), 0.0);
        // without black pixels both scores agree
        let plain = gray(6, 6, |x, y| (x * 7 + y * 3) as u8 + 1);
        assert_eq!(masked_blur_metric(&plain).unwrap(), blur_metric(&plain).unwrap());
    }

    #[test]
    fn rgb_luma_weights() {
        let img = ImageRecord::new("c", "a", 1, 1, 3, vec![100, 200, 50]).unwrap();
        assert!((luma(&img)[0] - (29.9 + 117.4 + 5.7)).abs() < 1e-9);
    }

    #[test]
    fn background_separation_cases() {
        let orig = gray(2, 2, |x, y| [[10, 20], [30, 40]][y][x]);
        let fg = gray(2, 2, |x, y| [[0, 20], [0, 40]][y][x]);
        let bg = separate_background(&orig, &fg).unwrap();
        assert_eq!(bg.pixels, vec![10, 0, 30, 0]);

        let all_black = gray(2, 2, |_, _| 0);
        assert_eq!(separate_background(&orig, &all_black).unwrap().pixels, orig.pixels);
        let no_black = gray(2, 2, |_, _| 9);
        assert_eq!(separate_background(&orig, &no_black).unwrap().pixels, vec![0; 4]);
        assert!(separate_background(&orig, &gray(3, 2, |_, _| 0)).is_err());
    }

    #[test]
    fn rgb_mask_needs_all_channels_black() {
        let orig = ImageRecord::new("o", "a", 2, 1, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let fg = ImageRecord::new("f", "a", 2, 1, 3, vec![0, 0, 0, 0, 1, 0]).unwrap();
        assert_eq!(separate_background(&orig, &fg).unwrap().pixels, vec![1, 2, 3, 0, 0, 0]);
    }

    #[test]
    fn matrix_shapes() {
        let recs: Vec<_> = (0..5)
            .map(|i| {
                let mut r = gray(6, 6, |x, y| (x * y + i) as u8);
                r.label = if i % 2 == 0 { "a".into() } else { "b".into() };
                r
            })
            .collect();
        let set = LabeledImageSet::from_records("s", recs);
        let m = build_feature_matrix(&set, ProbeId::EightPixel).unwrap();
        assert_eq!((m.rows, m.cols), (5, 8));
        assert_eq!(m.labels, vec![0, 1, 0, 1, 0]);
        let b = build_feature_matrix(&set, ProbeId::Blur).unwrap();
        assert_eq!((b.rows, b.cols), (5, 1));
    }

    #[test]
    fn matrix_reports_failing_path() {
        let mut tiny = gray(1, 1, |_, _| 0);
        tiny.source_path = "tiny.png".into();
        let set = LabeledImageSet::from_records("s", vec![gray(4, 4, |_, _| 0), tiny]);
        let err = build_feature_matrix(&set, ProbeId::EightPixel).unwrap_err();
        assert!(err.to_string().contains("tiny.png"), "{err}");
    }

    #[test]
    fn probe_names_parse() {
        assert_eq!("8px".parse::<ProbeId>().unwrap(), ProbeId::EightPixel);
        assert_eq!("blur".parse::<ProbeId>().unwrap(), ProbeId::Blur);
        assert!("bogus".parse::<ProbeId>().is_err());
    }
}
