use crate::error::{FormatError, FormatErrorKind};

/// Bounds-checked cursor over a byte slice; every failure carries the offset.
pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::new(
                self.pos,
                FormatErrorKind::Truncated {
                    needed: n - self.remaining(),
                },
            ));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32_be(&mut self) -> Result<u32, FormatError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u32_le(&mut self) -> Result<u32, FormatError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Fails unless exactly `declared` bytes remain.
    pub fn expect_payload(&self, declared: usize) -> Result<(), FormatError> {
        let available = self.remaining();
        if available < declared {
            return Err(FormatError::new(
                self.pos,
                FormatErrorKind::SizeMismatch {
                    declared,
                    available,
                },
            ));
        }
        if available > declared {
            return Err(FormatError::new(
                self.pos + declared,
                FormatErrorKind::TrailingData {
                    extra: available - declared,
                },
            ));
        }
        Ok(())
    }
}
