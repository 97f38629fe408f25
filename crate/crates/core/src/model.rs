//! Binarized multilayer perceptron and its on-disk weight format.
//!
//! Weight files are little-endian:
//!
//! ```text
//! "IMACW1"                      6 bytes
//! layer_count                   u8
//! rows, cols                    u32, u32   (repeated layer_count times)
//! payload                       rows*cols signed bytes per layer, in layer order,
//!                               row-major; +1 = 0x01, -1 = 0xFF
//! ```

use std::path::Path;

use crate::error::{Error, FormatError, FormatErrorKind, Result};
use crate::io::reader::ByteReader;
use crate::tech::Weight;

pub const WEIGHT_MAGIC: &[u8; 6] = b"IMACW1";

/// The network evaluated throughout: 400 inputs, two hidden layers, 10 classes.
pub const DEFAULT_LAYER_DIMS: [usize; 4] = [400, 120, 84, 10];

/// One fully connected layer, stored row-major as `inputs x outputs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<Weight>,
}

impl Layer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<Weight>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::InvalidModel(format!(
                "layer dimensions must be positive, got {inputs}x{outputs}"
            )));
        }
        if weights.len() != inputs * outputs {
            return Err(Error::ShapeMismatch {
                what: "layer weights",
                expected: inputs * outputs,
                found: weights.len(),
            });
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
        })
    }

    pub fn from_fn(inputs: usize, outputs: usize, mut f: impl FnMut(usize, usize) -> Weight) -> Self {
        let mut weights = Vec::with_capacity(inputs * outputs);
        for k in 0..inputs {
            for i in 0..outputs {
                weights.push(f(k, i));
            }
        }
        Self {
            inputs,
            outputs,
            weights,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    #[inline]
    pub fn weight(&self, input: usize, output: usize) -> Weight {
        self.weights[input * self.outputs + output]
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    /// Row `input` of the matrix: the weights from one input to every output.
    pub fn row(&self, input: usize) -> &[Weight] {
        &self.weights[input * self.outputs..(input + 1) * self.outputs]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarizedModel {
    layers: Vec<Layer>,
}

impl BinarizedModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("model has no layers".into()));
        }
        if layers.len() > u8::MAX as usize {
            return Err(Error::InvalidModel(format!(
                "{} layers exceed the weight format limit of 255",
                layers.len()
            )));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::InvalidModel(format!(
                    "layer {l} has {} outputs but layer {} expects {} inputs",
                    pair[0].outputs,
                    l + 1,
                    pair[1].inputs
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// `[inputs, hidden..., classes]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn class_count(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    /// Total neuron count: every layer output has one neuron.
    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(|l| l.outputs).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.layers.iter().map(|l| l.weights.len()).sum();
        let mut out = Vec::with_capacity(7 + 8 * self.layers.len() + payload);
        out.extend_from_slice(WEIGHT_MAGIC);
        out.push(self.layers.len() as u8);
        for layer in &self.layers {
            out.extend_from_slice(&(layer.inputs as u32).to_le_bytes());
            out.extend_from_slice(&(layer.outputs as u32).to_le_bytes());
        }
        for layer in &self.layers {
            out.extend(layer.weights.iter().map(|&w| w as i8 as u8));
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, FormatError> {
        let mut r = ByteReader::new(data);
        let magic = r.take(WEIGHT_MAGIC.len())?;
        if magic != WEIGHT_MAGIC {
            return Err(FormatError::new(
                0,
                FormatErrorKind::BadMagic {
                    expected: String::from_utf8_lossy(WEIGHT_MAGIC).into_owned(),
                    found: String::from_utf8_lossy(magic).into_owned(),
                },
            ));
        }
        let count_at = r.position();
        let count = r.u8()? as usize;
        if count == 0 {
            return Err(FormatError::new(
                count_at,
                FormatErrorKind::BadDimension("layer count is zero".into()),
            ));
        }
        let mut shapes = Vec::with_capacity(count);
        for l in 0..count {
            let at = r.position();
            let rows = r.u32_le()? as usize;
            let cols = r.u32_le()? as usize;
            if rows == 0 || cols == 0 {
                return Err(FormatError::new(
                    at,
                    FormatErrorKind::BadDimension(format!("layer {l} is {rows}x{cols}")),
                ));
            }
            if let Some(&(_, prev_cols)) = shapes.last() {
                if prev_cols != rows {
                    return Err(FormatError::new(
                        at,
                        FormatErrorKind::BadDimension(format!(
                            "layer {l} has {rows} rows, previous layer has {prev_cols} columns"
                        )),
                    ));
                }
            }
            shapes.push((rows, cols));
        }
        let declared = shapes
            .iter()
            .try_fold(0usize, |acc, &(r, c)| r.checked_mul(c).and_then(|n| acc.checked_add(n)))
            .ok_or_else(|| {
                FormatError::new(
                    count_at + 1,
                    FormatErrorKind::BadDimension("payload size overflows".into()),
                )
            })?;
        r.expect_payload(declared)?;

        let mut layers = Vec::with_capacity(count);
        for (rows, cols) in shapes {
            let start = r.position();
            let bytes = r.take(rows * cols)?;
            let mut weights = Vec::with_capacity(bytes.len());
            for (i, &b) in bytes.iter().enumerate() {
                weights.push(match b {
                    0x01 => Weight::Plus,
                    0xFF => Weight::Minus,
                    _ => {
                        return Err(FormatError::new(
                            start + i,
                            FormatErrorKind::InvalidValue {
                                value: b,
                                reason: "weight byte must be 0x01 or 0xFF",
                            },
                        ))
                    }
                });
            }
            layers.push(Layer {
                inputs: rows,
                outputs: cols,
                weights,
            });
        }
        Ok(Self { layers })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_bytes(&data)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> BinarizedModel {
        BinarizedModel::new(vec![
            Layer::from_fn(3, 2, |k, i| if (k + i) % 2 == 0 { Weight::Plus } else { Weight::Minus }),
            Layer::from_fn(2, 2, |k, _| if k == 0 { Weight::Minus } else { Weight::Plus }),
        ])
        .unwrap()
    }

    #[test]
    fn byte_layout() {
        let bytes = tiny().to_bytes();
        assert_eq!(&bytes[..6], b"IMACW1");
        assert_eq!(bytes[6], 2);
        assert_eq!(&bytes[7..15], &[3, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[15..23], &[2, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[23..29], &[0x01, 0xFF, 0xFF, 0x01, 0x01, 0xFF]);
        assert_eq!(bytes.len(), 23 + 6 + 4);
    }

    #[test]
    fn rejects_inconsistent_layers() {
        let err = BinarizedModel::new(vec![
            Layer::from_fn(3, 2, |_, _| Weight::Plus),
            Layer::from_fn(3, 2, |_, _| Weight::Plus),
        ]);
        assert!(err.is_err());
        assert!(Layer::new(2, 2, vec![Weight::Plus; 3]).is_err());
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let bytes = tiny().to_bytes();
        let err = BinarizedModel::from_bytes(&bytes[..bytes.len() - 1]).unwrap_err();
        assert_eq!(err.offset, 23);
        assert!(matches!(err.kind, FormatErrorKind::SizeMismatch { declared: 10, available: 9 }));

        let err = BinarizedModel::from_bytes(&bytes[..10]).unwrap_err();
        assert_eq!(err.offset, 7);
        assert!(matches!(err.kind, FormatErrorKind::Truncated { needed: 1 }));
    }

    #[test]
    fn header_only_default_dims() {
        let mut bytes = WEIGHT_MAGIC.to_vec();
        bytes.push(3);
        for (r, c) in [(400u32, 120u32), (120, 84), (84, 10)] {
            bytes.extend_from_slice(&r.to_le_bytes());
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        let err = BinarizedModel::from_bytes(&bytes).unwrap_err();
        assert_eq!(err.offset, 31);
        assert!(matches!(
            err.kind,
            FormatErrorKind::SizeMismatch { declared: 58_920, available: 0 }
        ));
    }

    #[test]
    fn bad_weight_byte_and_magic() {
        let mut bytes = tiny().to_bytes();
        bytes[25] = 0x00;
        let err = BinarizedModel::from_bytes(&bytes).unwrap_err();
        assert_eq!(err.offset, 25);
        assert!(matches!(err.kind, FormatErrorKind::InvalidValue { value: 0, .. }));

        let mut bytes = tiny().to_bytes();
        bytes[5] = b'2';
        let err = BinarizedModel::from_bytes(&bytes).unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(matches!(err.kind, FormatErrorKind::BadMagic { .. }));
    }

    proptest! {
        #[test]
        fn weight_file_round_trip(
            dims in proptest::collection::vec(1usize..12, 2..5),
            seed in any::<u64>(),
        ) {
            let mut state = seed;
            let layers = dims
                .windows(2)
                .map(|d| {
                    Layer::from_fn(d[0], d[1], |_, _| {
                        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        if state >> 63 == 1 { Weight::Plus } else { Weight::Minus }
                    })
                })
                .collect();
            let model = BinarizedModel::new(layers).unwrap();
            let bytes = model.to_bytes();
            let back = BinarizedModel::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &model);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
