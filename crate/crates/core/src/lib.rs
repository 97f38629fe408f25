//! Circuit-level simulation of in-memory analog computing (IMAC) fabrics.
//!
//! A binarized MLP is tiled onto fixed-size memristive subarrays, each tile
//! is solved as a resistive DC network with wire parasitics, partial
//! currents are accumulated along horizontal chains, and analog neurons
//! threshold the differential column currents.

pub mod analysis;
pub mod circuit;
pub mod error;
pub mod io;
pub mod model;
pub mod neuron;
pub mod partition;
pub mod pipeline;
pub mod tech;
pub mod train;

pub use error::{Error, FormatError, FormatErrorKind, Result};
pub use model::{BinarizedModel, Layer};
pub use partition::{plan_network, plan_partitions, PartitionPlan, Tile};
pub use tech::{BitcellType, ConductancePair, FabricConfig, TechnologyProfile, Weight};
