//! IDX dataset ingestion, binarization and seeded batching.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::Image;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Grayscale images with class labels. Pixels are kept as the 8-bit
/// levels of the source file and exposed as `level / 255`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImageSet {
    side: usize,
    levels: Vec<u8>,
    labels: Vec<u8>,
}

impl LabeledImageSet {
    pub fn from_levels(side: usize, levels: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        if side == 0 || levels.len() != side * side * labels.len() {
            return Err(Error::config(
                "dataset",
                format!(
                    "{} pixel levels do not form {} images of {side}×{side}",
                    levels.len(),
                    labels.len()
                ),
            ));
        }
        Ok(Self {
            side,
            levels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().map(|&l| l as usize)
    }

    pub fn levels(&self, i: usize) -> &[u8] {
        let s = self.side * self.side;
        &self.levels[i * s..(i + 1) * s]
    }

    pub fn image(&self, i: usize) -> Image {
        let pixels = self.levels(i).iter().map(|&v| v as f64 / 255.0).collect();
        Image::new(self.side, pixels).expect("levels map into [0, 1]")
    }

    /// Largest label plus one.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    pub fn class_counts(&self, classes: usize) -> Vec<usize> {
        let mut counts = vec![0; classes];
        for l in self.labels() {
            if l < classes {
                counts[l] += 1;
            }
        }
        counts
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let s = self.side * self.side;
        let mut levels = Vec::with_capacity(indices.len() * s);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            levels.extend_from_slice(self.levels(i));
            labels.push(self.labels[i]);
        }
        Self {
            side: self.side,
            levels,
            labels,
        }
    }

    /// The first `count` items (all of them if fewer).
    pub fn take(&self, count: usize) -> Self {
        let idx: Vec<usize> = (0..count.min(self.len())).collect();
        self.select(&idx)
    }

    /// Keeps items whose label is in `classes`, relabelled to their
    /// position in `classes`.
    pub fn filter_classes(&self, classes: &[usize]) -> Self {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| classes.contains(&self.label(i)))
            .collect();
        let mut out = self.select(&idx);
        for l in out.labels.iter_mut() {
            let pos = classes
                .iter()
                .position(|&c| c == *l as usize)
                .expect("filtered label");
            *l = pos as u8;
        }
        out
    }

    pub fn binarized(&self, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        let levels = self
            .levels
            .iter()
            .map(|&v| if v as f64 / 255.0 >= threshold { 255 } else { 0 })
            .collect();
        Ok(Self {
            side: self.side,
            levels,
            labels: self.labels.clone(),
        })
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::config("threshold", "must lie in (0, 1)"))
    }
}

/// Maps pixels to 1 where `pixel ≥ threshold`, else 0.
pub fn binarize(image: &Image, threshold: f64) -> Result<Image> {
    check_threshold(threshold)?;
    let pixels = image
        .pixels()
        .iter()
        .map(|&p| if p >= threshold { 1.0 } else { 0.0 })
        .collect();
    Image::new(image.side(), pixels)
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| {
            Error::parse(
                path,
                format!("truncated header: need 4 bytes at offset {offset}"),
            )
        })
}

fn read_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<u32> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != expected {
        return Err(Error::parse(
            path,
            format!("bad magic 0x{magic:08x} at offset 0, expected 0x{expected:08x}"),
        ));
    }
    be_u32(bytes, 4, path)
}

fn payload<'a>(bytes: &'a [u8], start: usize, len: usize, path: &Path) -> Result<&'a [u8]> {
    if bytes.len() - start.min(bytes.len()) < len {
        return Err(Error::parse(
            path,
            format!(
                "truncated: need {len} bytes from offset {start}, file ends at offset {}",
                bytes.len()
            ),
        ));
    }
    Ok(&bytes[start..start + len])
}

/// Reads an IDX image/label file pair as published for MNIST and
/// Fashion-MNIST (big-endian, unsigned bytes).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledImageSet> {
    let img = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let lab = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;

    let n_img = read_magic(&img, IMAGES_MAGIC, images_path)? as usize;
    let rows = be_u32(&img, 8, images_path)? as usize;
    let cols = be_u32(&img, 12, images_path)? as usize;
    if rows != cols || rows == 0 {
        return Err(Error::parse(
            images_path,
            format!("images are {rows}×{cols} (offset 8); only square images are supported"),
        ));
    }
    let n_lab = read_magic(&lab, LABELS_MAGIC, labels_path)? as usize;
    if n_img != n_lab {
        return Err(Error::parse(
            labels_path,
            format!("label count {n_lab} (offset 4) differs from image count {n_img}"),
        ));
    }
    let levels = payload(&img, 16, n_img * rows * cols, images_path)?.to_vec();
    let labels = payload(&lab, 8, n_lab, labels_path)?.to_vec();
    LabeledImageSet::from_levels(rows, levels, labels)
}

/// Writes `set` as an IDX pair; the inverse of [`load_idx`].
pub fn write_idx(set: &LabeledImageSet, images_path: &Path, labels_path: &Path) -> Result<()> {
    let mut img = Vec::with_capacity(16 + set.levels.len());
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(set.len() as u32).to_be_bytes());
    img.extend_from_slice(&(set.side as u32).to_be_bytes());
    img.extend_from_slice(&(set.side as u32).to_be_bytes());
    img.extend_from_slice(&set.levels);
    fs::write(images_path, img).map_err(|e| Error::io(images_path, e))?;

    let mut lab = Vec::with_capacity(8 + set.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(set.len() as u32).to_be_bytes());
    lab.extend_from_slice(&set.labels);
    fs::write(labels_path, lab).map_err(|e| Error::io(labels_path, e))
}

/// A seeded permutation of `0..len` cut into batches of `batch_size`; the
/// last batch may be short. The order depends only on `(seed, epoch)`.
pub fn batches(len: usize, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::config("batch_size", "must be at least 1"));
    }
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
