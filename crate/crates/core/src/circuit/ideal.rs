//! Parasitic-free crossbar: every column sits at virtual ground, so an
//! output's current is the plain dot product of conductances and inputs.

use crate::error::{Error, Result};
use crate::tech::ConductancePair;

use super::exact::ExactSum;

/// Conductance pairs of one tile, row-major as `rows x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    rows: usize,
    outputs: usize,
    pairs: Vec<ConductancePair>,
}

impl PairMatrix {
    pub fn new(rows: usize, outputs: usize, pairs: Vec<ConductancePair>) -> Result<Self> {
        if pairs.len() != rows * outputs {
            return Err(Error::ShapeMismatch {
                what: "conductance pairs",
                expected: rows * outputs,
                found: pairs.len(),
            });
        }
        Ok(Self {
            rows,
            outputs,
            pairs,
        })
    }

    pub fn from_fn(rows: usize, outputs: usize, mut f: impl FnMut(usize, usize) -> ConductancePair) -> Self {
        let mut pairs = Vec::with_capacity(rows * outputs);
        for k in 0..rows {
            for i in 0..outputs {
                pairs.push(f(k, i));
            }
        }
        Self {
            rows,
            outputs,
            pairs,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    #[inline]
    pub fn get(&self, row: usize, output: usize) -> ConductancePair {
        self.pairs[row * self.outputs + output]
    }

    pub fn row(&self, row: usize) -> &[ConductancePair] {
        &self.pairs[row * self.outputs..(row + 1) * self.outputs]
    }
}

/// Running `I+`, `I-` and differential current of one output, summed exactly.
/// Carrying an accumulator from one tile to the next models the forwarded
/// partial current of a horizontal partition.
#[derive(Debug, Clone, Default)]
pub struct PairAccumulator {
    plus: ExactSum,
    minus: ExactSum,
    diff: ExactSum,
}

impl PairAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_currents(&mut self, i_plus: f64, i_minus: f64) {
        self.plus.add(i_plus);
        self.minus.add(i_minus);
        self.diff.add(i_plus);
        self.diff.add(-i_minus);
    }

    pub fn currents(&self) -> OutputCurrents {
        OutputCurrents {
            i_plus: self.plus.value(),
            i_minus: self.minus.value(),
            i_diff: self.diff.value(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputCurrents {
    pub i_plus: f64,
    pub i_minus: f64,
    pub i_diff: f64,
}

/// Ideal matrix-vector product `I_i = sum_k (G+_ki - G-_ki) V_k`, with the
/// `I+` and `I-` line currents alongside.
pub fn ideal_mvm(conductances: &PairMatrix, inputs: &[f64]) -> Result<Vec<OutputCurrents>> {
    let mut acc = vec![PairAccumulator::new(); conductances.outputs()];
    ideal_mvm_accumulate(conductances, inputs, &mut acc)?;
    Ok(acc.iter().map(PairAccumulator::currents).collect())
}

/// Adds one tile's ideal output currents onto running accumulators.
pub fn ideal_mvm_accumulate(
    conductances: &PairMatrix,
    inputs: &[f64],
    acc: &mut [PairAccumulator],
) -> Result<()> {
    if inputs.len() != conductances.rows() {
        return Err(Error::ShapeMismatch {
            what: "tile inputs",
            expected: conductances.rows(),
            found: inputs.len(),
        });
    }
    if acc.len() != conductances.outputs() {
        return Err(Error::ShapeMismatch {
            what: "output accumulators",
            expected: conductances.outputs(),
            found: acc.len(),
        });
    }
    for (k, &v) in inputs.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (a, p) in acc.iter_mut().zip(conductances.row(k)) {
            a.plus.add(p.g_plus * v);
            a.minus.add(p.g_minus * v);
            a.diff.add(p.difference() * v);
        }
    }
    Ok(())
}

/// Power dissipated in the cells of an ideal tile: `sum G V^2`.
pub fn ideal_power(conductances: &PairMatrix, inputs: &[f64]) -> Result<f64> {
    if inputs.len() != conductances.rows() {
        return Err(Error::ShapeMismatch {
            what: "tile inputs",
            expected: conductances.rows(),
            found: inputs.len(),
        });
    }
    let mut p = ExactSum::new();
    for (k, &v) in inputs.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for pair in conductances.row(k) {
            p.add((pair.g_plus + pair.g_minus) * v * v);
        }
    }
    Ok(p.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tech::{weight_to_conductance, BitcellType, TechnologyProfile, Weight};

    fn mram(w: Weight) -> ConductancePair {
        weight_to_conductance(w, &TechnologyProfile::mram(), BitcellType::ZeroT1R)
    }

    #[test]
    fn opposite_weights_cancel() {
        let g = PairMatrix::new(2, 1, vec![mram(Weight::Plus), mram(Weight::Minus)]).unwrap();
        let out = ideal_mvm(&g, &[0.8, 0.8]).unwrap();
        assert_eq!(out[0].i_diff, 0.0);
        assert_eq!(out[0].i_plus, out[0].i_minus);
    }

    #[test]
    fn two_plus_weights() {
        let g = PairMatrix::new(2, 1, vec![mram(Weight::Plus); 2]).unwrap();
        let out = ideal_mvm(&g, &[0.8, 0.8]).unwrap()[0];
        assert!((out.i_plus - 533.333_333e-6).abs() < 1e-12);
        assert!((out.i_minus - 177.777_778e-6).abs() < 1e-12);
        assert!((out.i_diff - 355.555_556e-6).abs() < 1e-12);
    }

    #[test]
    fn zero_inputs_and_shapes() {
        let g = PairMatrix::from_fn(3, 2, |_, _| mram(Weight::Plus));
        let out = ideal_mvm(&g, &[0.0; 3]).unwrap();
        assert!(out.iter().all(|c| c.i_plus == 0.0 && c.i_minus == 0.0 && c.i_diff == 0.0));
        assert!(ideal_mvm(&g, &[0.0; 2]).is_err());
        assert!(PairMatrix::new(2, 2, vec![mram(Weight::Plus); 3]).is_err());
        assert_eq!(ideal_power(&g, &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn power_of_single_cell() {
        let g = PairMatrix::new(1, 1, vec![mram(Weight::Plus)]).unwrap();
        let p = ideal_power(&g, &[0.8]).unwrap();
        assert!((p - 0.64 * (1.0 / 3e3 + 1.0 / 9e3)).abs() < 1e-18);
    }
}
