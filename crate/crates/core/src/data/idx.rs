//! IDX binary format (big-endian header, raw `u8` payload) for images and
//! labels. Pixels are scaled to `[0, 1]` and a bias feature is appended.

use std::path::Path;

use super::{DataError, Dataset};
use crate::loss::{Example, Features, SparseVector};

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

fn read_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32, DataError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DataError::Truncated {
            what,
            expected: at + 4,
            actual: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, what: &'static str) -> Result<(), DataError> {
    let found = read_u32(bytes, 0, what)?;
    if found != expected {
        return Err(DataError::BadMagic {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

/// Image file: returns the pixel count per image and one slice per image.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, Vec<&[u8]>), DataError> {
    const WHAT: &str = "images";
    check_magic(bytes, IDX_IMAGES_MAGIC, WHAT)?;
    let count = read_u32(bytes, 4, WHAT)? as usize;
    let rows = read_u32(bytes, 8, WHAT)? as usize;
    let cols = read_u32(bytes, 12, WHAT)? as usize;
    let pixels = rows * cols;
    let expected = 16 + count * pixels;
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            what: WHAT,
            expected,
            actual: bytes.len(),
        });
    }
    Ok((
        pixels,
        bytes[16..expected]
            .chunks_exact(pixels.max(1))
            .take(count)
            .collect(),
    ))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8], DataError> {
    const WHAT: &str = "labels";
    check_magic(bytes, IDX_LABELS_MAGIC, WHAT)?;
    let count = read_u32(bytes, 4, WHAT)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            what: WHAT,
            expected,
            actual: bytes.len(),
        });
    }
    Ok(&bytes[8..expected])
}

/// Builds a dataset from raw IDX bytes. Images are stored sparsely.
pub fn idx_dataset(images: &[u8], labels: &[u8], name: &str) -> Result<Dataset, DataError> {
    let (pixels, rows) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if rows.len() != labels.len() {
        return Err(DataError::CountMismatch {
            images: rows.len(),
            labels: labels.len(),
        });
    }
    let n_classes = labels
        .iter()
        .copied()
        .max()
        .map_or(0, |m| m as usize + 1)
        .max(10);
    let examples = rows
        .iter()
        .zip(labels)
        .map(|(row, &label)| {
            let (mut indices, mut values): (Vec<u32>, Vec<f64>) = row
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0)
                .map(|(i, &p)| (i as u32, p as f64 / 255.0))
                .unzip();
            indices.push(pixels as u32);
            values.push(1.0);
            Ok(Example::labeled(
                Features::Sparse(SparseVector::new(indices, values)?),
                label as i32,
            ))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    Dataset::new(name, examples, pixels + 1, n_classes, true)
}

pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Dataset, DataError> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = std::fs::read(ip).map_err(|e| DataError::io(ip, e))?;
    let labels = std::fs::read(lp).map_err(|e| DataError::io(lp, e))?;
    let name = ip
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    idx_dataset(&images, &labels, &name)
}
