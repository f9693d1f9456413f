//! Reproducible studies built on the library: the bias-constant table,
//! sampling-distribution and ISE comparisons of bagged versus full-sample
//! CV, the log-log power-law fit used for extrapolation, and timings.

pub mod bench;
pub mod power_law;
pub mod study;
pub mod table1;

pub use bench::{run_timing_bench, write_bench_csv, BenchOptions, BenchRow};
pub use power_law::{extrapolate, fit_power_law, PowerLawFit};
pub use study::{run_ise_study, run_sampling_study, DensitySpec, IseStudy, MChoice, SamplingRecord, StudySpec};
pub use table1::{run_table1, run_table1_with, table1_densities, write_table1_csv, Table1Row};
