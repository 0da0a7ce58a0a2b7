//! IDX image/label files (the MNIST distribution format).

use std::path::Path;

use ndarray::ArrayView2;

use super::pixels::{permute_pixels, rasterize_pixel_stream};
use super::{Dataset, Input, Label, Sample};
use crate::error::{Error, Result};

fn be_u32(b: &[u8], at: usize) -> Result<u32> {
    b.get(at..at + 4)
        .map(|s| u32::from_be_bytes(s.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format("truncated IDX header"))
}

/// `(count, rows, cols, pixels)` from an `idx3-ubyte` file.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<(usize, usize, usize, Vec<u8>)> {
    let b = std::fs::read(path)?;
    if be_u32(&b, 0)? != 0x0803 {
        return Err(Error::format("not an IDX image file"));
    }
    let (n, r, c) = (be_u32(&b, 4)? as usize, be_u32(&b, 8)? as usize, be_u32(&b, 12)? as usize);
    let data = &b[16..];
    if data.len() != n * r * c {
        return Err(Error::format(format!("IDX image payload has {} bytes, expected {}", data.len(), n * r * c)));
    }
    Ok((n, r, c, data.to_vec()))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let b = std::fs::read(path)?;
    if be_u32(&b, 0)? != 0x0801 {
        return Err(Error::format("not an IDX label file"));
    }
    let n = be_u32(&b, 4)? as usize;
    let data = &b[8..];
    if data.len() != n {
        return Err(Error::format("IDX label count mismatch"));
    }
    Ok(data.to_vec())
}

/// Pixel-stream dataset from an image/label file pair: each image is scaled
/// to `[0, 1]`, flattened row-major and optionally permuted. Samples
/// `offset..offset + count` are kept.
pub fn load_pixel_stream(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    offset: usize,
    count: usize,
    permutation: Option<&[usize]>,
) -> Result<Dataset> {
    let (n, r, c, px) = read_idx_images(images)?;
    let lab = read_idx_labels(labels)?;
    if lab.len() != n {
        return Err(Error::format("image and label counts differ"));
    }
    if offset + count > n {
        return Err(Error::input(format!("requested samples {offset}..{} of {n}", offset + count)));
    }
    let num_classes = lab.iter().copied().max().map_or(0, |m| m as usize + 1).max(10);
    let samples = (offset..offset + count)
        .map(|i| {
            let img: Vec<f32> = px[i * r * c..(i + 1) * r * c].iter().map(|&v| v as f32 / 255.0).collect();
            let view = ArrayView2::from_shape((r, c), &img).expect("length matches");
            let mut seq = rasterize_pixel_stream(view);
            if let Some(p) = permutation {
                seq = permute_pixels(seq.view(), p)?;
            }
            Ok(Sample { input: Input::Dense(seq), label: Label::Class(lab[i] as u16) })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, 1, num_classes)
}
