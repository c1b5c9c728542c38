//! Seeded, reportable experiment runs: dataset construction, the four-way
//! path-loss benchmark and the pilot-ratio CSI study.

mod csi;
mod dataset;
mod latency;
mod pl_bench;

pub use csi::{
    interpolate_baseline, ls_pilot_estimate, nmse_db, normalize_csi, run_csi_experiment, CsiConfig, CsiCurve, CsiMethod, CsiPoint, CsiReport,
    PartialCsi, PilotMask, NMSE_FLOOR_DB,
};
pub use dataset::{build_dataset, Dataset, DatasetConfig, LinkRecord, Split};
pub use latency::{measure_latencies, measure_latency, WARMUP_CALLS};
pub use pl_bench::{compare, run_pl_benchmark, train_pl_model, Comparison, PlBenchConfig, PlBenchReport, StepResult};
