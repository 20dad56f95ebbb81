//! Basin data model, CSV ingestion, feature catalog, standardization and
//! the synthetic catchment generator.
//!
//! Dataset directory layout (all files UTF-8 CSV with a header row,
//! ISO-8601 dates, `.` decimal separator):
//!
//! ```text
//! catalog.csv            name,group
//! attributes.csv         basin_id,<static feature>...
//! forcing/<id>.csv       date,<dynamic feature>...
//! discharge/<id>.csv     date,discharge        (mm/day, >= 0)
//! ```
//!
//! Missing values and date gaps are rejected, never imputed.

mod basin;
mod catalog;
mod standardize;
pub mod synth;

pub use basin::{
    attributes_csv, dataset_files, discharge_csv, forcing_csv, load_basin, load_dataset,
    read_attributes, read_basin_ids, write_dataset, BasinRecord, DatasetLayout,
};
pub use catalog::{FeatureCatalog, FeatureEntry, FeatureGroup};
pub use standardize::{ColumnStats, StandardizedBasin, Standardizer};
pub use synth::{generate_synthetic, SynthConfig};
