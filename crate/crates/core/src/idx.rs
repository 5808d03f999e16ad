//! Big-endian IDX containers for the handwritten-digit corpus.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::dataset::{ImageRecord, LabeledImageSet};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            expected: offset + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::WrongMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], header: usize, len: usize, path: &Path) -> Result<&'a [u8]> {
    bytes.get(header..header + len).ok_or_else(|| Error::Truncated {
        path: path.to_path_buf(),
        expected: header + len,
        found: bytes.len(),
    })
}

/// Parsed images file: `(rows, cols, pixel payload)`.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    check_magic(bytes, IMAGES_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let data = payload(bytes, 16, count * rows * cols, path)?;
    Ok((count, rows, cols, data.to_vec()))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    Ok(payload(bytes, 8, count, path)?.to_vec())
}

pub fn encode_images(rows: usize, cols: usize, images: &[&[u8]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for word in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    for img in images {
        assert_eq!(img.len(), rows * cols, "image size does not match rows x cols");
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Loads an images/labels pair. Labels become the strings "0".."9" and digit
/// `d` always maps to class index `d`.
pub fn load_idx_pair(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledImageSet> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let ib = fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let lb = fs::read(lp).map_err(|e| Error::io(lp, e))?;
    let (count, rows, cols, data) = parse_images(&ib, ip)?;
    let labels = parse_labels(&lb, lp)?;
    if count != labels.len() {
        return Err(Error::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidImage(format!("{}: zero-sized items", ip.display())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::BadLabel {
            path: lp.to_path_buf(),
            value: bad,
        });
    }
    let item = rows * cols;
    let records = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            ImageRecord::new(
                ip.join(format!("#{i}")),
                l.to_string(),
                cols,
                rows,
                1,
                data[i * item..(i + 1) * item].to_vec(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let class_index: BTreeMap<String, usize> = (0..10).map(|d| (d.to_string(), d)).collect();
    let name = ip
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    LabeledImageSet::with_class_index(name, records, class_index)
}
