//! File formats: MNIST IDX containers, the cropped dataset and the TOML
//! configuration file. Weight files live with the model in [`crate::model`].

pub mod config;
pub mod dataset;
pub mod idx;
pub(crate) mod reader;

pub use config::{Config, FabricSection, TechnologyOverride};
pub use dataset::{crop_center, dataset_from_idx, load_mnist, resolve_data_dir, Dataset, Split, CROP_LEN, DATA_DIR_ENV};
pub use idx::{parse_idx_images, parse_idx_labels, IdxImages};
