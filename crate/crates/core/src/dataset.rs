//! In-memory labeled image sets, folder ingestion and seeded splitting.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GenericImageView};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// A decoded 8-bit image with its class label. Pixels are row-major with
/// channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub source_path: PathBuf,
    pub label: String,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl ImageRecord {
    pub fn new(
        source_path: impl Into<PathBuf>,
        label: impl Into<String>,
        width: usize,
        height: usize,
        channels: usize,
        pixels: Vec<u8>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero-sized image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("unsupported channel count {channels}")));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "pixel buffer holds {} bytes, expected {}x{}x{}",
                pixels.len(),
                width,
                height,
                channels
            )));
        }
        Ok(ImageRecord {
            source_path: source_path.into(),
            label: label.into(),
            width,
            height,
            channels,
            pixels,
        })
    }

    /// Channel values of the pixel at column `x`, row `y`.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let start = (y * self.width + x) * self.channels;
        &self.pixels[start..start + self.channels]
    }

    pub fn same_shape(&self, other: &ImageRecord) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImageSet {
    pub name: String,
    pub records: Vec<ImageRecord>,
    pub class_index: BTreeMap<String, usize>,
}

impl LabeledImageSet {
    /// Builds the set with class indices assigned in lexicographic label order.
    pub fn from_records(name: impl Into<String>, records: Vec<ImageRecord>) -> Self {
        let mut class_index: BTreeMap<String, usize> =
            records.iter().map(|r| (r.label.clone(), 0)).collect();
        for (i, v) in class_index.values_mut().enumerate() {
            *v = i;
        }
        LabeledImageSet {
            name: name.into(),
            records,
            class_index,
        }
    }

    /// Like [`from_records`](Self::from_records) but with an explicit class map,
    /// which must cover every record label with dense indices.
    pub fn with_class_index(
        name: impl Into<String>,
        records: Vec<ImageRecord>,
        class_index: BTreeMap<String, usize>,
    ) -> Result<Self> {
        let mut seen: Vec<usize> = class_index.values().copied().collect();
        seen.sort_unstable();
        if seen.iter().enumerate().any(|(i, &v)| i != v) {
            return Err(Error::InvalidArgument("class indices must be exactly 0..K-1".into()));
        }
        if let Some(r) = records.iter().find(|r| !class_index.contains_key(&r.label)) {
            return Err(Error::InvalidArgument(format!(
                "label {:?} of {} missing from class index",
                r.label,
                r.source_path.display()
            )));
        }
        Ok(LabeledImageSet {
            name: name.into(),
            records,
            class_index,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_index.len()
    }

    /// Dense class index of every record, in record order.
    pub fn label_indices(&self) -> Vec<usize> {
        self.records.iter().map(|r| self.class_index[&r.label]).collect()
    }

    /// Class names ordered by index.
    pub fn class_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.class_index.len()];
        for (name, &i) in &self.class_index {
            names[i] = name.clone();
        }
        names
    }

    /// Writes the `path,label,width,height,channels` manifest.
    pub fn write_manifest<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["path", "label", "width", "height", "channels"])
            .map_err(ser)?;
        for r in &self.records {
            w.write_record([
                r.source_path.display().to_string(),
                r.label.clone(),
                r.width.to_string(),
                r.height.to_string(),
                r.channels.to_string(),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn is_image_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
            .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Converts a decoded image into 1-channel gray or 3-channel RGB bytes.
/// Alpha is composited over black.
fn normalize(img: DynamicImage) -> (usize, usize, usize, Vec<u8>) {
    let (w, h) = img.dimensions();
    let (w, h) = (w as usize, h as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => (w, h, 1, buf.into_raw()),
        DynamicImage::ImageLuma16(_) => (w, h, 1, img.to_luma8().into_raw()),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            let la = img.to_luma_alpha8();
            let px = la
                .pixels()
                .map(|p| over_black(p.0[0], p.0[1]))
                .collect();
            (w, h, 1, px)
        }
        other if other.color().has_alpha() => {
            let rgba = other.to_rgba8();
            let mut px = Vec::with_capacity(w * h * 3);
            for p in rgba.pixels() {
                let [r, g, b, a] = p.0;
                px.extend([over_black(r, a), over_black(g, a), over_black(b, a)]);
            }
            (w, h, 3, px)
        }
        other => (w, h, 3, other.to_rgb8().into_raw()),
    }
}

fn over_black(v: u8, alpha: u8) -> u8 {
    ((v as u32 * alpha as u32 + 127) / 255) as u8
}

/// Decodes one image file into a record.
pub fn load_image_file(path: &Path, label: &str) -> Result<ImageRecord> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h, c, px) = normalize(img);
    ImageRecord::new(path, label, w, h, c, px)
}

/// Loads a `root/<class>/<image>` tree. Classes and files are visited in
/// lexicographic order; decoding runs in parallel but the output order does
/// not depend on scheduling.
pub fn load_image_folder(root: impl AsRef<Path>) -> Result<LabeledImageSet> {
    let root = root.as_ref();
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(Error::NoClasses(root.to_path_buf()));
    }

    let mut jobs: Vec<(PathBuf, String)> = Vec::new();
    for dir in &class_dirs {
        let label = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let files: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| is_image_file(p))
            .collect();
        if files.is_empty() {
            return Err(Error::EmptyClass(dir.clone()));
        }
        jobs.extend(files.into_iter().map(|f| (f, label.clone())));
    }

    let records = jobs
        .par_iter()
        .map(|(path, label)| load_image_file(path, label))
        .collect::<Result<Vec<_>>>()?;

    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| root.display().to_string());
    Ok(LabeledImageSet::from_records(name, records))
}

/// Writes the set as a `root/<class>/<nnnnn>.png` tree readable by
/// [`load_image_folder`].
pub fn write_image_folder(set: &LabeledImageSet, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
    let mut jobs = Vec::with_capacity(set.len());
    for class in set.class_index.keys() {
        let dir = root.join(class);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for r in &set.records {
        let n = counters.entry(r.label.as_str()).or_insert(0);
        jobs.push((r, root.join(&r.label).join(format!("{:05}.png", *n))));
        *n += 1;
    }
    jobs.par_iter().try_for_each(|(r, path)| {
        let color = if r.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::save_buffer(path, &r.pixels, r.width as u32, r.height as u32, color)
            .map_err(|e| Error::io(path, e))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        Ok(SplitSpec {
            train_fraction,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` and cuts at `floor(train_fraction * n)`. Not stratified.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<Split> {
    let spec = SplitSpec::new(spec.train_fraction, spec.seed)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} items into train and test"
        )));
    }
    let n_train = (spec.train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "train fraction {} leaves an empty partition for {n} items",
            spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Stream::new(spec.seed).shuffle(&mut order);
    let test = order.split_off(n_train);
    Ok(Split { train: order, test })
}

pub fn split(set: &LabeledImageSet, spec: &SplitSpec) -> Result<Split> {
    split_indices(set.len(), spec)
}

/// Chance accuracy in percent for `n_classes` balanced classes.
pub fn random_guess_accuracy(n_classes: usize) -> Result<f64> {
    if n_classes == 0 {
        return Err(Error::InvalidArgument("class count must be at least 1".into()));
    }
    Ok(100.0 / n_classes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(label: &str, v: u8) -> ImageRecord {
        ImageRecord::new(format!("{label}.png"), label, 2, 2, 1, vec![v; 4]).unwrap()
    }

    #[test]
    fn record_rejects_bad_buffer() {
        assert!(ImageRecord::new("x", "a", 2, 2, 3, vec![0; 11]).is_err());
        assert!(ImageRecord::new("x", "a", 0, 2, 1, vec![]).is_err());
        assert!(ImageRecord::new("x", "a", 1, 1, 4, vec![0; 4]).is_err());
    }

    #[test]
    fn class_index_is_lexicographic_and_dense() {
        let set = LabeledImageSet::from_records(
            "s",
            vec![gray("b", 1), gray("a", 2), gray("c", 3), gray("a", 4)],
        );
        assert_eq!(set.class_index["a"], 0);
        assert_eq!(set.class_index["b"], 1);
        assert_eq!(set.class_index["c"], 2);
        assert_eq!(set.label_indices(), vec![1, 0, 2, 0]);
        assert_eq!(set.class_names(), vec!["a", "b", "c"]);
    }

    #[test]
    fn explicit_class_index_must_be_dense() {
        let idx: BTreeMap<String, usize> = [("a".to_string(), 0), ("b".to_string(), 2)].into();
        assert!(LabeledImageSet::with_class_index("s", vec![gray("a", 0)], idx).is_err());
    }

    #[test]
    fn split_sizes() {
        let s = split_indices(10, &SplitSpec::new(0.8, 1).unwrap()).unwrap();
        assert_eq!(s.train.len(), 8);
        assert_eq!(s.test.len(), 2);
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
    }

    #[test]
    fn split_is_deterministic() {
        let spec = SplitSpec::new(0.8, 99).unwrap();
        assert_eq!(split_indices(100, &spec).unwrap(), split_indices(100, &spec).unwrap());
    }

    #[test]
    fn split_seeds_differ_but_cover_the_same_indices() {
        let a = split_indices(1000, &SplitSpec::new(0.8, 1).unwrap()).unwrap();
        let b = split_indices(1000, &SplitSpec::new(0.8, 2).unwrap()).unwrap();
        assert_ne!(a, b);
        let mut ua: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
        let mut ub: Vec<usize> = b.train.iter().chain(&b.test).copied().collect();
        ua.sort_unstable();
        ub.sort_unstable();
        assert_eq!(ua, ub);
    }

    #[test]
    fn split_errors() {
        let spec = SplitSpec::default();
        assert!(split_indices(1, &spec).is_err());
        assert!(split_indices(0, &spec).is_err());
        assert!(SplitSpec::new(1.0, 0).is_err());
        assert!(SplitSpec::new(0.0, 0).is_err());
        assert!(split_indices(2, &SplitSpec::new(0.2, 0).unwrap()).is_err());
    }

    #[test]
    fn chance_levels() {
        assert!((random_guess_accuracy(38).unwrap() - 2.631_578_947_368_421).abs() < 1e-12);
        assert_eq!(format!("{:.1}", random_guess_accuracy(38).unwrap()), "2.6");
        assert_eq!(random_guess_accuracy(10).unwrap(), 10.0);
        assert_eq!(random_guess_accuracy(1).unwrap(), 100.0);
        assert!(random_guess_accuracy(0).is_err());
    }

    #[test]
    fn manifest_csv() {
        let set = LabeledImageSet::from_records("s", vec![gray("a", 0)]);
        let mut buf = Vec::new();
        set.write_manifest(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "path,label,width,height,channels\na.png,a,2,2,1\n"
        );
    }

    #[test]
    fn alpha_composites_over_black() {
        assert_eq!(over_black(200, 255), 200);
        assert_eq!(over_black(200, 0), 0);
        assert_eq!(over_black(255, 128), 128);
    }
}
