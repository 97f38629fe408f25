//! TOML configuration file.
//!
//! ```toml
//! [fabric]
//! rows = 32
//! cols = 32
//! bitcell = "1t1r"
//! parasitics = true
//! r_source = 0.0
//!
//! [solver]
//! tolerance = 1e-9
//! max_iter = 200000
//! preconditioner = "line"    # or "jacobi"
//!
//! [technology.MRAM]          # override fields of a builtin profile
//! r_wire_seg = 2.0
//!
//! [technology.RRAM]          # new profile; r_low and r_high are required
//! r_low = 5e3
//! r_high = 5e4
//! ```
//!
//! Unknown keys anywhere are rejected. Technology names match builtins
//! case-insensitively.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::circuit::SolverOptions;
use crate::error::{Error, Result};
use crate::tech::{builtin_technology, BitcellType, TechnologyProfile};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub fabric: FabricSection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub technology: BTreeMap<String, TechnologyOverride>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FabricSection {
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub technology: Option<String>,
    pub bitcell: Option<BitcellType>,
    pub parasitics: Option<bool>,
    pub r_source: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologyOverride {
    pub r_low: Option<f64>,
    pub r_high: Option<f64>,
    pub vdd: Option<f64>,
    pub r_wire_seg: Option<f64>,
    pub c_wire_seg: Option<f64>,
    pub r_access: Option<f64>,
    pub r_sense: Option<f64>,
    pub sigma_noise: Option<f64>,
    pub r_switch: Option<f64>,
    pub r_demux: Option<f64>,
    pub p_neuron: Option<f64>,
    pub p_demux: Option<f64>,
    pub p_switch: Option<f64>,
}

impl TechnologyOverride {
    fn apply(&self, t: &mut TechnologyProfile) {
        let fields: [(&Option<f64>, &mut f64); 13] = [
            (&self.r_low, &mut t.r_low),
            (&self.r_high, &mut t.r_high),
            (&self.vdd, &mut t.vdd),
            (&self.r_wire_seg, &mut t.r_wire_seg),
            (&self.c_wire_seg, &mut t.c_wire_seg),
            (&self.r_access, &mut t.r_access),
            (&self.r_sense, &mut t.r_sense),
            (&self.sigma_noise, &mut t.sigma_noise),
            (&self.r_switch, &mut t.r_switch),
            (&self.r_demux, &mut t.r_demux),
            (&self.p_neuron, &mut t.p_neuron),
            (&self.p_demux, &mut t.p_demux),
            (&self.p_switch, &mut t.p_switch),
        ];
        for (src, dst) in fields {
            if let Some(v) = *src {
                *dst = v;
            }
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for name in cfg.technology.keys() {
            cfg.technology(name)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Resolves a technology by name: builtin defaults with this file's
    /// overrides applied, or a profile defined entirely in the file.
    pub fn technology(&self, name: &str) -> Result<TechnologyProfile> {
        let over = self
            .technology
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v);
        let mut tech = match (builtin_technology(name), over) {
            (Some(t), _) => t,
            (None, Some(o)) => match (o.r_low, o.r_high) {
                (Some(lo), Some(hi)) => TechnologyProfile::with_resistances(name, lo, hi),
                _ => {
                    return Err(Error::InvalidTechnology {
                        name: name.into(),
                        reason: "a new technology needs r_low and r_high".into(),
                    })
                }
            },
            (None, None) => {
                return Err(Error::InvalidTechnology {
                    name: name.into(),
                    reason: "unknown technology".into(),
                })
            }
        };
        if let Some(o) = over {
            o.apply(&mut tech);
        }
        tech.validate()?;
        Ok(tech)
    }
}
