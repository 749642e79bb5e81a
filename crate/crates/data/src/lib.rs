//! Data sources for succmax: published synthetic setups, row-level RCT CSV
//! ingestion, quantile bucketization, train/test splitting and bootstrap
//! estimation of the per-cell statistics the optimizer consumes.

pub mod bucketize;
pub mod dataset;
pub mod error;
pub mod estimate;
pub mod synthetic;

pub use bucketize::{assign_bucket, fit_bucketizer, BucketizerSpec};
pub use dataset::{ingest_csv, ingest_reader, split_train_test, ColumnMapping, RctDataset, RctRow};
pub use error::{DataError, Result};
pub use estimate::{estimate_stats, BootstrapSpec, Estimand, Normalization};
pub use synthetic::{generate_synthetic, CustomStats, Preset, SyntheticConfig, BUCKET_FEATURE};
