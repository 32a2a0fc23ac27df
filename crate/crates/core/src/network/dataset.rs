use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A labelled input with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSource {
    /// `label,pixel0,...,pixelN` rows, optional header line.
    Csv(PathBuf),
    /// MNIST-style pair of IDX files.
    Idx { images: PathBuf, labels: PathBuf },
}

pub fn load_dataset(source: &DatasetSource) -> Result<Vec<Sample>> {
    match source {
        DatasetSource::Csv(path) => load_csv(path),
        DatasetSource::Idx { images, labels } => load_idx(images, labels),
    }
}

/// A decoded unsigned-byte IDX tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

const IDX_UBYTE: u8 = 0x08;
const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Dataset("truncated IDX header".into()))
}

/// Decode one IDX file. Only the unsigned-byte element type is supported.
pub fn parse_idx_array(bytes: &[u8]) -> Result<IdxArray> {
    let magic = be_u32(bytes, 0)?;
    if magic >> 16 != 0 {
        return Err(Error::Dataset(format!("bad IDX magic {magic:#010x}")));
    }
    if bytes[2] != IDX_UBYTE {
        return Err(Error::Dataset(format!("unsupported IDX element type {:#04x}", bytes[2])));
    }
    let ndims = bytes[3] as usize;
    if ndims == 0 {
        return Err(Error::Dataset("IDX file with zero dimensions".into()));
    }
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        dims.push(be_u32(bytes, 4 + 4 * d)? as usize);
    }
    let header = 4 + 4 * ndims;
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Dataset("IDX dimensions overflow".into()))?;
    let payload = &bytes[header..];
    if payload.len() != len {
        return Err(Error::Dataset(format!(
            "IDX dimensions {dims:?} need {len} bytes, found {}",
            payload.len()
        )));
    }
    Ok(IdxArray { dims, data: payload.to_vec() })
}

/// Decode an images file (magic `0x00000803`) and a labels file (magic
/// `0x00000801`). Pixels are scaled from bytes to `[0, 1]`.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Vec<Sample>> {
    if be_u32(images, 0)? != IDX_IMAGES_MAGIC {
        return Err(Error::Dataset(format!("images file magic {:#010x}, expected 0x00000803", be_u32(images, 0)?)));
    }
    if be_u32(labels, 0)? != IDX_LABELS_MAGIC {
        return Err(Error::Dataset(format!("labels file magic {:#010x}, expected 0x00000801", be_u32(labels, 0)?)));
    }
    let images = parse_idx_array(images)?;
    let labels = parse_idx_array(labels)?;
    let count = images.dims[0];
    if labels.dims[0] != count {
        return Err(Error::Dataset(format!(
            "{count} images but {} labels",
            labels.dims[0]
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let per_image = images.data.len() / count;
    if per_image == 0 {
        return Err(Error::Dataset("IDX images have zero pixels".into()));
    }
    Ok(images
        .data
        .chunks_exact(per_image)
        .take(count)
        .zip(&labels.data)
        .map(|(pixels, &label)| Sample {
            input: pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
            label: label as usize,
        })
        .collect())
}

pub fn load_idx(images: impl AsRef<std::path::Path>, labels: impl AsRef<std::path::Path>) -> Result<Vec<Sample>> {
    parse_idx(&fs::read(images)?, &fs::read(labels)?)
}

/// Parse `label,pixel0,...,pixelN` rows. A first line whose label field is
/// not an integer is treated as a header.
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<Sample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut samples = Vec::new();
    let mut width = None;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let label = match record[0].parse::<usize>() {
            Ok(label) => label,
            Err(_) if line == 0 => continue,
            Err(_) => return Err(Error::Dataset(format!("row {}: bad label {:?}", line + 1, &record[0]))),
        };
        if record.len() < 2 {
            return Err(Error::Dataset(format!("row {}: no pixels", line + 1)));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Dataset(format!(
                    "ragged rows: row {} has {} fields, expected {w}",
                    line + 1,
                    record.len()
                )))
            }
            Some(_) => {}
        }
        let input = record
            .iter()
            .skip(1)
            .map(|field| {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Dataset(format!("row {}: bad pixel {field:?}", line + 1)))?;
                if (0.0..=1.0).contains(&v) {
                    Ok(v)
                } else {
                    Err(Error::Dataset(format!("row {}: pixel {v} outside [0, 1]", line + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(Sample { input, label });
    }
    Ok(samples)
}

pub fn load_csv(path: impl AsRef<std::path::Path>) -> Result<Vec<Sample>> {
    parse_csv(&fs::read(path)?)
}
