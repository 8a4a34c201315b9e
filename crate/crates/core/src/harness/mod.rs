//! Model assembly, training, datasets, checkpoints and self-checks.

pub mod checkpoint;
pub mod checks;
pub mod config;
pub mod dataset;
pub mod model;
pub mod report;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::TrainConfig;
pub use dataset::{make_dataset, make_dataset_with_noise, Dataset, Task};
pub use model::{is_metric_param, layer_geometry, ndm_forward, Architecture, ForwardTrace, GeometryOptions, ManifoldLayer, NdmModel};
pub use report::{geometry_report, GeometryReport, LayerStats};
pub use train::{initial_model, metrics_csv, train, write_run, MetricsRow, TrainOutcome, METRICS_HEADER};
