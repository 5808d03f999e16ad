//! Synthetic image sets whose capture bias is known by construction.
//!
//! Every image is a gray frame with a centered elliptical blob. The blob is
//! drawn from the same distribution for every class; only the background
//! level or the global blur depends on the label.

use serde::{Deserialize, Serialize};

use crate::dataset::{ImageRecord, LabeledImageSet};
use crate::error::{Error, Result};
use crate::rng::Stream;

pub const BACKGROUND_BASE: f64 = 120.0;
pub const OFFSET_SPREAD: f64 = 60.0;
pub const BLOB_LEVEL: f64 = 60.0;
pub const BLOB_LEVEL_JITTER: f64 = 10.0;
pub const BLOB_AXIS_RANGE: (f64, f64) = (0.2, 0.35);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasChannel {
    BackgroundLevel,
    Blur,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub width: usize,
    pub height: usize,
    pub bias_strength: f64,
    pub bias_channel: BiasChannel,
    pub background_noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_classes: 5,
            n_per_class: 200,
            width: 64,
            height: 64,
            bias_strength: 1.0,
            bias_channel: BiasChannel::BackgroundLevel,
            background_noise_sd: 5.0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.n_per_class == 0 {
            return bad("images per class must be at least 1".into());
        }
        if self.width < 16 || self.height < 16 {
            return bad(format!("synthetic images must be at least 16x16, got {}x{}", self.width, self.height));
        }
        if !(0.0..=1.0).contains(&self.bias_strength) {
            return bad(format!("bias strength {} outside [0, 1]", self.bias_strength));
        }
        if !(self.background_noise_sd >= 0.0 && self.background_noise_sd.is_finite()) {
            return bad(format!("noise sd {} must be finite and non-negative", self.background_noise_sd));
        }
        Ok(())
    }

    /// Background offset for class `k`: `strength * (k - (K-1)/2) * 60/K`.
    pub fn background_offset(&self, class: usize) -> f64 {
        if self.bias_channel != BiasChannel::BackgroundLevel {
            return 0.0;
        }
        let k = self.n_classes as f64;
        self.bias_strength * (class as f64 - (k - 1.0) / 2.0) * (OFFSET_SPREAD / k)
    }

    /// Box-blur radius for class `k`: `round(strength * k)`, so radii span `0..K-1`.
    pub fn blur_radius(&self, class: usize) -> usize {
        if self.bias_channel != BiasChannel::Blur {
            return 0;
        }
        (self.bias_strength * class as f64).round() as usize
    }

    /// Class names, zero-padded so lexicographic order matches class order.
    pub fn class_names(&self) -> Vec<String> {
        let digits = (self.n_classes - 1).to_string().len();
        (0..self.n_classes).map(|k| format!("class{k:0digits$}")).collect()
    }
}

/// A generated set plus the foreground-only companion (everything outside
/// the blob set to black), aligned record by record.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub images: LabeledImageSet,
    pub foreground: LabeledImageSet,
}

pub fn generate(config: &SynthConfig) -> Result<LabeledImageSet> {
    generate_with_foreground(config).map(|o| o.images)
}

pub fn generate_with_foreground(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let names = config.class_names();
    let (w, h) = (config.width, config.height);
    let mut images = Vec::with_capacity(config.n_classes * config.n_per_class);
    let mut foreground = Vec::with_capacity(images.capacity());

    for (class, name) in names.iter().enumerate() {
        let level = BACKGROUND_BASE + config.background_offset(class);
        let radius = config.blur_radius(class);
        for i in 0..config.n_per_class {
            let id = (class * config.n_per_class + i) as u64;
            let mut rng = Stream::substream(config.seed, id);
            let mask = blob_mask(w, h, &mut rng);
            let blob_level = rng.uniform(BLOB_LEVEL - BLOB_LEVEL_JITTER, BLOB_LEVEL + BLOB_LEVEL_JITTER);

            let mut frame = vec![0.0f64; w * h];
            for (v, &inside) in frame.iter_mut().zip(&mask) {
                *v = if inside {
                    blob_level
                } else {
                    level + config.background_noise_sd * rng.normal()
                };
            }
            let frame = box_blur_f64(&frame, w, h, radius);
            let pixels: Vec<u8> = frame.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
            // Black marks background in the foreground image, so blob pixels must stay >= 1.
            let fg: Vec<u8> = pixels
                .iter()
                .zip(&mask)
                .map(|(&p, &inside)| if inside { p.max(1) } else { 0 })
                .collect();

            let path = format!("{name}/{i:05}.png");
            images.push(ImageRecord::new(path.clone(), name.clone(), w, h, 1, pixels)?);
            foreground.push(ImageRecord::new(path, name.clone(), w, h, 1, fg)?);
        }
    }

    let label = |suffix: &str| {
        format!(
            "synth_k{}_n{}_{}_{}{}",
            config.n_classes,
            config.n_per_class,
            match config.bias_channel {
                BiasChannel::BackgroundLevel => "bg",
                BiasChannel::Blur => "blur",
            },
            config.bias_strength,
            suffix
        )
    };
    Ok(SynthOutput {
        images: LabeledImageSet::from_records(label(""), images),
        foreground: LabeledImageSet::from_records(label("_fg"), foreground),
    })
}

/// Centered ellipse with random semi-axes and orientation.
fn blob_mask(w: usize, h: usize, rng: &mut Stream) -> Vec<bool> {
    let side = w.min(h) as f64;
    let (lo, hi) = BLOB_AXIS_RANGE;
    let a = rng.uniform(lo, hi) * side;
    let b = rng.uniform(lo, hi) * side;
    let theta = rng.uniform(0.0, std::f64::consts::PI);
    let (sin, cos) = theta.sin_cos();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut mask = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let u = dx * cos + dy * sin;
            let v = -dx * sin + dy * cos;
            mask.push((u / a).powi(2) + (v / b).powi(2) <= 1.0);
        }
    }
    mask
}

/// Mean over a `(2r+1)^2` window, edges clamped. Radius 0 is the identity.
fn box_blur_f64(src: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    if radius == 0 {
        return src.to_vec();
    }
    let r = radius as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let norm = (2 * radius + 1) as f64;
    // separable: horizontal then vertical
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-r..=r).map(|d| src[y * w + clamp(x as isize + d, w)]).sum();
            tmp[y * w + x] = s / norm;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-r..=r).map(|d| tmp[clamp(y as isize + d, h) * w + x]).sum();
            out[y * w + x] = s / norm;
        }
    }
    out
}

/// Box blur of an 8-bit image, per channel, rounding back to bytes.
pub fn box_blur(image: &ImageRecord, radius: usize) -> ImageRecord {
    let (w, h, c) = (image.width, image.height, image.channels);
    let mut pixels = vec![0u8; image.pixels.len()];
    for ch in 0..c {
        let plane: Vec<f64> = image.pixels.iter().skip(ch).step_by(c).map(|&v| v as f64).collect();
        for (i, v) in box_blur_f64(&plane, w, h, radius).into_iter().enumerate() {
            pixels[i * c + ch] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    ImageRecord { pixels, ..image.clone() }
}
