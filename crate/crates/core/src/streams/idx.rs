//! IDX file ingestion (the MNIST on-disk format).
//!
//! Header fields are big-endian 32-bit; magic 0x00000803 for images and
//! 0x00000801 for labels. Files ending in `.gz` are decompressed
//! transparently. Pixels are scaled to [0,1] by /255 and images flattened
//! row-major.

use super::LabelledSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix32;
use flate2::read::GzDecoder;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn open(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(reader)))
    } else {
        Ok(Box::new(reader))
    }
}

fn read_u32(reader: &mut dyn Read, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader
        .read_exact(&mut buf)
        .map_err(|_| Error::IdxTruncated(what.to_string()))?;
    Ok(u32::from_be_bytes(buf))
}

fn read_payload(reader: &mut dyn Read, len: usize, what: &str) -> Result<Vec<u8>> {
    let mut data = vec![0u8; len];
    reader
        .read_exact(&mut data)
        .map_err(|_| Error::IdxTruncated(what.to_string()))?;
    Ok(data)
}

fn read_images(path: &Path) -> Result<Matrix32> {
    let what = path.display().to_string();
    let mut r = open(path)?;
    let magic = read_u32(r.as_mut(), &what)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::IdxBadMagic {
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = read_u32(r.as_mut(), &what)? as usize;
    let rows = read_u32(r.as_mut(), &what)? as usize;
    let cols = read_u32(r.as_mut(), &what)? as usize;
    let raw = read_payload(r.as_mut(), count * rows * cols, &what)?;
    let data: Vec<f32> = raw.iter().map(|&b| f32::from(b) / 255.0).collect();
    Matrix32::from_vec(count, rows * cols, data)
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let what = path.display().to_string();
    let mut r = open(path)?;
    let magic = read_u32(r.as_mut(), &what)?;
    if magic != LABEL_MAGIC {
        return Err(Error::IdxBadMagic {
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let count = read_u32(r.as_mut(), &what)? as usize;
    let raw = read_payload(r.as_mut(), count, &what)?;
    Ok(raw.into_iter().map(usize::from).collect())
}

/// Loads an image/label IDX pair into a labelled set.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabelledSet> {
    let images = read_images(images_path.as_ref())?;
    let labels = read_labels(labels_path.as_ref())?;
    if images.rows() != labels.len() {
        return Err(Error::IdxCountMismatch {
            images: images.rows(),
            labels: labels.len(),
        });
    }
    LabelledSet::new(images, labels)
}
