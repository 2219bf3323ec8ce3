//! Dataset ingestion, splitting, preprocessing and the experiment runner.

pub mod config;
pub mod data;
pub mod preprocess;
pub mod run;
pub mod split;
pub mod synth;

pub use config::{ModelKind, PipelineConfig};
pub use data::{load_csv, read_csv, write_csv, DatasetSpec, RawDataset};
pub use preprocess::{read_encoded, write_encoded, EncodedTable, Preprocessor};
pub use run::{run_experiment, run_on_dataset, ExperimentReport};
pub use split::{stratified_split, SplitIndices, SplitProportions};
