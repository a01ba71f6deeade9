//! The exclusion process with W-conductances and its diagnostics.

mod config;
mod dynamics;
mod martingale;
mod observables;
pub mod oracle;

pub use config::{Configuration, CylinderFunction, SimParams};
pub use dynamics::{
    exchange, jump_rate, sample_bernoulli_profile, sample_bernoulli_with, simulate,
    simulate_from_profile, simulate_observed, Observer, Simulator, SumTree, TrajectoryRecord,
};
pub use martingale::{
    drift_direct, martingale_residual, martingale_with_test, quadratic_variation_bound,
    DriftDecomposition, MartingaleObserver, MartingalePath, QuadraticVariationBound,
};
pub use observables::{
    box_average, box_averages, empirical_pairing, empirical_pairing_fn, replacement_gap,
    replacement_integrand, write_density_csv, write_site_csv,
};
