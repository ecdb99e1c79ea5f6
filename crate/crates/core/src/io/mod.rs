//! File formats: model specs, datasets, posterior directories, synthetic
//! data, reliability checks and result tables.

pub mod dataset;
pub mod draws;
pub mod reliability;
pub mod spec_file;
pub mod synthetic;
pub mod tables;

pub use dataset::{load_dataset, load_indicator_responses, write_dataset, DatasetPaths};
pub use draws::{read_manifest, read_population, read_posterior_dir, write_posterior_dir, Manifest};
pub use reliability::{cronbach_alpha, indicator_file_reliability, latent_reliability, Reliability};
pub use spec_file::ModelSpecFile;
pub use synthetic::{generate_synthetic, write_synthetic, Generator, SyntheticData, TruthSpec};
