//! Differentially private synthetic data by multiplicative weights and the
//! exponential mechanism.
//!
//! A run keeps an approximation of the sensitive histogram. Each round it
//! privately picks the workload query the approximation answers worst,
//! measures that query with Laplace noise, and reweights the approximation
//! toward the measurement. The approximation is the synthetic dataset.
//!
//! ```
//! use mwem::{conjunction_workload, run_mwem, Histogram, MwemConfig, RngStream, Universe};
//!
//! let universe = Universe::from_cardinalities(&[2, 2, 2]).unwrap();
//! let data = Histogram::new(universe, vec![40.0, 0.0, 0.0, 10.0, 5.0, 5.0, 0.0, 40.0]).unwrap();
//! let workload = conjunction_workload(data.universe().schema(), 2).unwrap();
//! let config = MwemConfig { iterations: 4, epsilon: 1.0, ..Default::default() };
//! let out = run_mwem(&data, &workload, &config, &mut RngStream::new(7)).unwrap();
//! assert!((out.ledger.total() - 1.0).abs() < 1e-12);
//! assert!((out.synthetic.mass() - 100.0).abs() < 1e-9);
//! ```

pub mod access;
pub mod baseline;
pub mod domain;
pub mod encode;
pub mod error;
pub mod factored;
pub mod mech;
pub mod metrics;
pub mod mwem;
pub mod query;
pub mod synth;
pub mod workload_file;

mod rowindex;
mod select;
mod timing;

pub use access::{AccessGate, AccessReport, SensitiveSource};
pub use baseline::{run_baseline, BaselineConfig, BaselineOutput};
pub use domain::{Attribute, AttributeSchema, Histogram, RecordTable, Universe};
pub use error::{Error, Result};
pub use factored::{run_mwem_factored, FactoredDistribution, FactoredOutput};
pub use mech::{
    eps_delta_recharacterize, exponential_mechanism, exponential_probabilities, laplace_sample,
    BudgetLedger, PrivacyParams, RngStream,
};
pub use metrics::{
    avg_squared_error, cuboid_errors, error_report, max_error, relative_entropy, CuboidErrorReport,
    ErrorReport,
};
pub use mwem::{
    adaptive_run, histogram_init, mw_replay, mw_update, optimal_iterations, run_mwem,
    run_mwem_cuboids, select_query, utility_bound, AdaptiveConfig, Approximation, History,
    IterationTrace, MassMode, MwemConfig, MwemOutput, OutputMode,
};
pub use query::{
    conjunction_workload, cuboid_workload, hadamard_matrix, marginal_of, parity_row_index,
    parity_workload, random_range_workload, CuboidGroup, Interval, LinearQuery, QueryKind,
    Workload,
};
