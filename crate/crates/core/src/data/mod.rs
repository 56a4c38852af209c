//! Data pipeline: synthetic generation, CSV ingestion/export, cleaning,
//! feature engineering, extreme-event labeling, and windowed datasets with
//! chronological partitioning.

pub mod clean;
pub mod csv_io;
pub mod events;
pub mod features;
pub mod series;
pub mod synthetic;
pub mod windows;

pub use clean::{clean_series, CleanReport};
pub use csv_io::{export_csv, ingest_csv};
pub use events::{hour_kinds, label_extreme_events, EventKind, EventLabel};
pub use features::{
    engineer_features, FeatureMatrix, HolidayCalendar, Scaler, FEATURE_NAMES, N_FEATURES,
};
pub use series::{Channel, LoadSeries};
pub use synthetic::{generate_synthetic, SynthConfig};
pub use windows::{
    build_dataset, chronological_split, make_windows, thin_test_partition, Partition, Window,
    WindowDataset, WindowPlan, DEFAULT_FRACTIONS,
};
