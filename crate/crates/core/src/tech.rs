//! Device technologies, bitcells, fabric geometry and the weight to
//! conductance mapping shared by every other module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::SolverOptions;
use crate::error::{Error, Result};

/// Electrical constants of one memristive technology and the fabric built
/// around it. All values are SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyProfile {
    pub name: String,
    pub r_low: f64,
    pub r_high: f64,
    pub vdd: f64,
    /// Interconnect resistance of one cell pitch, on both row and column wires.
    pub r_wire_seg: f64,
    /// Interconnect capacitance of one cell pitch. Stored only; the DC solve ignores it.
    pub c_wire_seg: f64,
    /// Series access-transistor resistance, used by 1T-1R bitcells.
    pub r_access: f64,
    /// Sense-node resistance from each column foot to ground.
    pub r_sense: f64,
    /// Input-referred noise standard deviation of the neuron amplifier.
    pub sigma_noise: f64,
    pub r_switch: f64,
    pub r_demux: f64,
    pub p_neuron: f64,
    pub p_demux: f64,
    pub p_switch: f64,
}

const DEFAULT_VDD: f64 = 0.8;
const DEFAULT_WIRE_SEGMENT: f64 = 3.0;

impl TechnologyProfile {
    /// A profile with the given device resistances and default fabric constants.
    pub fn with_resistances(name: impl Into<String>, r_low: f64, r_high: f64) -> Self {
        Self {
            name: name.into(),
            r_low,
            r_high,
            vdd: DEFAULT_VDD,
            r_wire_seg: DEFAULT_WIRE_SEGMENT,
            c_wire_seg: 0.1e-15,
            r_access: 2e3,
            r_sense: 10.0,
            sigma_noise: 0.5e-3,
            r_switch: 200.0,
            r_demux: 200.0,
            p_neuron: 50e-6,
            p_demux: 5e-6,
            p_switch: 2e-6,
        }
    }

    pub fn mram() -> Self {
        Self::with_resistances("MRAM", 3e3, 9e3)
    }

    pub fn cbram() -> Self {
        Self::with_resistances("CBRAM", 2e3, 200e3)
    }

    /// PCM read currents are an order of magnitude below MRAM, so the sense
    /// resistor is scaled up to keep the signal clear of the amplifier noise.
    pub fn pcm() -> Self {
        Self {
            r_sense: 40.0,
            ..Self::with_resistances("PCM", 50e3, 5e6)
        }
    }

    pub fn ratio(&self) -> f64 {
        self.r_high / self.r_low
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidTechnology {
                name: self.name.clone(),
                reason,
            })
        };
        let named = [
            ("r_low", self.r_low),
            ("r_high", self.r_high),
            ("vdd", self.vdd),
            ("r_wire_seg", self.r_wire_seg),
            ("c_wire_seg", self.c_wire_seg),
            ("r_access", self.r_access),
            ("r_sense", self.r_sense),
            ("sigma_noise", self.sigma_noise),
            ("r_switch", self.r_switch),
            ("r_demux", self.r_demux),
            ("p_neuron", self.p_neuron),
            ("p_demux", self.p_demux),
            ("p_switch", self.p_switch),
        ];
        for (key, value) in named {
            if !value.is_finite() || value < 0.0 {
                return fail(format!("{key} must be finite and non-negative, got {value}"));
            }
        }
        if self.r_low <= 0.0 {
            return fail(format!("r_low must be positive, got {}", self.r_low));
        }
        if self.r_high <= self.r_low {
            return fail(format!(
                "r_high ({}) must exceed r_low ({})",
                self.r_high, self.r_low
            ));
        }
        if self.vdd <= 0.0 {
            return fail(format!("vdd must be positive, got {}", self.vdd));
        }
        Ok(())
    }
}

/// MRAM, CBRAM and PCM with the shipped default constants.
pub fn builtin_technologies() -> Vec<TechnologyProfile> {
    vec![
        TechnologyProfile::mram(),
        TechnologyProfile::cbram(),
        TechnologyProfile::pcm(),
    ]
}

/// Case-insensitive lookup among [`builtin_technologies`].
pub fn builtin_technology(name: &str) -> Option<TechnologyProfile> {
    builtin_technologies()
        .into_iter()
        .find(|t| t.name.eq_ignore_ascii_case(name))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BitcellType {
    /// Bare resistive device.
    #[serde(rename = "0t1r")]
    ZeroT1R,
    /// Device in series with an access transistor.
    #[serde(rename = "1t1r")]
    OneT1R,
}

impl BitcellType {
    /// Series resistance the bitcell adds to the device.
    pub fn series_resistance(self, tech: &TechnologyProfile) -> f64 {
        match self {
            BitcellType::ZeroT1R => 0.0,
            BitcellType::OneT1R => tech.r_access,
        }
    }
}

impl fmt::Display for BitcellType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BitcellType::ZeroT1R => "0T1R",
            BitcellType::OneT1R => "1T1R",
        })
    }
}

impl FromStr for BitcellType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "0t1r" | "zerot1r" => Ok(BitcellType::ZeroT1R),
            "1t1r" | "onet1r" => Ok(BitcellType::OneT1R),
            _ => Err(Error::InvalidInput(format!(
                "unknown bitcell `{s}` (expected 0T1R or 1T1R)"
            ))),
        }
    }
}

/// Geometry and electrical setting of the subarrays a network is deployed on.
#[derive(Debug, Clone, PartialEq)]
pub struct FabricConfig {
    /// Subarray rows (`n`).
    pub rows: usize,
    /// Subarray physical columns (`m`); outputs use them in pairs.
    pub cols: usize,
    pub technology: TechnologyProfile,
    pub bitcell: BitcellType,
    pub parasitics_enabled: bool,
    /// Output impedance of the row drivers.
    pub r_source: f64,
    pub solver: SolverOptions,
}

impl FabricConfig {
    pub fn new(
        rows: usize,
        cols: usize,
        technology: TechnologyProfile,
        bitcell: BitcellType,
        parasitics_enabled: bool,
    ) -> Result<Self> {
        let fabric = Self {
            rows,
            cols,
            technology,
            bitcell,
            parasitics_enabled,
            r_source: 0.0,
            solver: SolverOptions::default(),
        };
        fabric.validate()?;
        Ok(fabric)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 {
            return Err(Error::InvalidFabric("subarray needs at least one row".into()));
        }
        if self.cols < 2 {
            return Err(Error::InvalidFabric(
                "subarray needs at least two columns".into(),
            ));
        }
        if self.cols % 2 != 0 {
            return Err(Error::InvalidFabric(format!(
                "columns must be even, got {}",
                self.cols
            )));
        }
        if !self.r_source.is_finite() || self.r_source < 0.0 {
            return Err(Error::InvalidFabric(format!(
                "r_source must be finite and non-negative, got {}",
                self.r_source
            )));
        }
        self.technology.validate()
    }

    /// Logical outputs per subarray (one differential column pair each).
    pub fn pairs_per_subarray(&self) -> usize {
        self.cols / 2
    }

    pub fn pair_of(&self, weight: Weight) -> ConductancePair {
        weight_to_conductance(weight, &self.technology, self.bitcell)
    }
}

/// A binarized weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum Weight {
    Minus = -1,
    Plus = 1,
}

impl Weight {
    pub fn from_sign(x: f32) -> Self {
        if x >= 0.0 {
            Weight::Plus
        } else {
            Weight::Minus
        }
    }

    pub fn value(self) -> i32 {
        self as i8 as i32
    }
}

/// Conductances of the two devices that encode one signed weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConductancePair {
    pub g_plus: f64,
    pub g_minus: f64,
}

impl ConductancePair {
    pub fn difference(&self) -> f64 {
        self.g_plus - self.g_minus
    }
}

/// `+1` puts the low-resistance state on the `I+` line, `-1` mirrors it.
pub fn weight_to_conductance(
    w: Weight,
    tech: &TechnologyProfile,
    bitcell: BitcellType,
) -> ConductancePair {
    let series = bitcell.series_resistance(tech);
    let g_on = 1.0 / (tech.r_low + series);
    let g_off = 1.0 / (tech.r_high + series);
    match w {
        Weight::Plus => ConductancePair {
            g_plus: g_on,
            g_minus: g_off,
        },
        Weight::Minus => ConductancePair {
            g_plus: g_off,
            g_minus: g_on,
        },
    }
}

/// Binarizes a pixel intensity into a row drive voltage (threshold 0.5, ties high).
pub fn binarize_input(pixel: f64, tech: &TechnologyProfile) -> Result<f64> {
    if !pixel.is_finite() {
        return Err(Error::InvalidInput(format!("pixel value {pixel} is not finite")));
    }
    Ok(if pixel >= 0.5 { tech.vdd } else { 0.0 })
}
