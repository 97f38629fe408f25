use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::idx::{parse_idx_images, parse_idx_labels};

/// Side length of the retained center crop.
pub const CROP_SIDE: usize = 20;
pub const CROP_LEN: usize = CROP_SIDE * CROP_SIDE;
const SOURCE_SIDE: usize = 28;
const CROP_OFFSET: usize = 4;

/// Environment variable naming the directory with the four MNIST IDX files.
pub const DATA_DIR_ENV: &str = "IMAC_MNIST_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn file_stem(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Cropped 20x20 images with pixels in [0, 1], flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pixels: Vec<f32>,
    labels: Vec<u8>,
    split: Split,
}

impl Dataset {
    pub fn new(pixels: Vec<f32>, labels: Vec<u8>, split: Split) -> Result<Self> {
        if pixels.len() != labels.len() * CROP_LEN {
            return Err(Error::ShapeMismatch {
                what: "dataset pixels",
                expected: labels.len() * CROP_LEN,
                found: pixels.len(),
            });
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidInput(format!("pixel {p} outside [0, 1]")));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 9) {
            return Err(Error::InvalidInput(format!("label {l} outside 0..=9")));
        }
        Ok(Self { pixels, labels, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn image(&self, index: usize) -> &[f32] {
        &self.pixels[index * CROP_LEN..(index + 1) * CROP_LEN]
    }

    pub fn label(&self, index: usize) -> u8 {
        self.labels[index]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Input bits of one image: pixel >= 0.5 maps to 1.
    pub fn bits(&self, index: usize) -> Vec<u8> {
        self.image(index).iter().map(|&p| u8::from(p >= 0.5)).collect()
    }

    /// The first `n` images.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            pixels: self.pixels[..n * CROP_LEN].to_vec(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
        }
    }
}

/// Keeps rows 4..24 and columns 4..24 of a 28x28 image.
pub fn crop_center(image: &[f32]) -> Result<Vec<f32>> {
    if image.len() != SOURCE_SIDE * SOURCE_SIDE {
        return Err(Error::ShapeMismatch {
            what: "image pixels",
            expected: SOURCE_SIDE * SOURCE_SIDE,
            found: image.len(),
        });
    }
    let mut out = Vec::with_capacity(CROP_LEN);
    for r in CROP_OFFSET..CROP_OFFSET + CROP_SIDE {
        let row = &image[r * SOURCE_SIDE..(r + 1) * SOURCE_SIDE];
        out.extend_from_slice(&row[CROP_OFFSET..CROP_OFFSET + CROP_SIDE]);
    }
    Ok(out)
}

/// Parses a pair of IDX buffers into a cropped dataset.
pub fn dataset_from_idx(images: &[u8], labels: &[u8], split: Split) -> Result<Dataset> {
    let imgs = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if imgs.count != labels.len() {
        return Err(Error::ShapeMismatch {
            what: "label count",
            expected: imgs.count,
            found: labels.len(),
        });
    }
    if imgs.rows != SOURCE_SIDE || imgs.cols != SOURCE_SIDE {
        return Err(Error::InvalidInput(format!(
            "expected 28x28 images, found {}x{}",
            imgs.rows, imgs.cols
        )));
    }
    let mut pixels = Vec::with_capacity(imgs.count * CROP_LEN);
    for i in 0..imgs.count {
        pixels.extend(crop_center(imgs.image(i))?);
    }
    Dataset::new(pixels, labels, split)
}

/// Loads one split from `dir`, which holds the uncompressed MNIST files
/// (`train-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`, ...).
pub fn load_mnist(dir: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let dir = dir.as_ref();
    let read = |kind: &str| -> Result<Vec<u8>> {
        let path = dir.join(format!("{}-{kind}", split.file_stem()));
        std::fs::read(&path).map_err(|e| Error::io(path, e))
    };
    dataset_from_idx(&read("images-idx3-ubyte")?, &read("labels-idx1-ubyte")?, split)
}

/// `explicit` if given, else the `IMAC_MNIST_DIR` environment variable.
pub fn resolve_data_dir(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
}
