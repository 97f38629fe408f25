//! IDX container parsing (the MNIST distribution format).
//!
//! Header fields are big-endian u32: magic, item count, then the remaining
//! dimensions. Images use magic `0x00000803` (unsigned bytes, 3 dims),
//! labels `0x00000801` (unsigned bytes, 1 dim).

use crate::error::{FormatError, FormatErrorKind};

use super::reader::ByteReader;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Images as a flat row-major buffer with pixels scaled to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f32>,
}

impl IdxImages {
    pub fn image(&self, index: usize) -> &[f32] {
        let len = self.rows * self.cols;
        &self.pixels[index * len..(index + 1) * len]
    }
}

fn check_magic(r: &mut ByteReader<'_>, expected: u32) -> Result<(), FormatError> {
    let found = r.u32_be()?;
    if found != expected {
        return Err(FormatError::new(
            0,
            FormatErrorKind::BadMagic {
                expected: format!("{expected:#010x}"),
                found: format!("{found:#010x}"),
            },
        ));
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, FormatError> {
    let mut r = ByteReader::new(bytes);
    check_magic(&mut r, IMAGE_MAGIC)?;
    let count = r.u32_be()? as usize;
    let dims_at = r.position();
    let rows = r.u32_be()? as usize;
    let cols = r.u32_be()? as usize;
    if rows == 0 || cols == 0 {
        return Err(FormatError::new(
            dims_at,
            FormatErrorKind::BadDimension(format!("image size {rows}x{cols}")),
        ));
    }
    let declared = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .ok_or_else(|| FormatError::new(4, FormatErrorKind::BadDimension("payload size overflows".into())))?;
    r.expect_payload(declared)?;
    let pixels = r.take(declared)?.iter().map(|&b| b as f32 / 255.0).collect();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, FormatError> {
    let mut r = ByteReader::new(bytes);
    check_magic(&mut r, LABEL_MAGIC)?;
    let count = r.u32_be()? as usize;
    r.expect_payload(count)?;
    let start = r.position();
    let labels = r.take(count)?;
    if let Some(i) = labels.iter().position(|&l| l > 9) {
        return Err(FormatError::new(
            start + i,
            FormatErrorKind::InvalidValue {
                value: labels[i],
                reason: "label must be in 0..=9",
            },
        ));
    }
    Ok(labels.to_vec())
}
