//! Estimators, hypothesis tests and exact small-instance oracles.

mod exact;
mod inference;
mod moments;
mod report;

pub use exact::{exact_distribution, exact_return_law, truncated_green, LatticeDistribution, MAX_LATTICE_EXTENT};
pub use inference::{
    gaussian_lattice_marginal_test, gaussian_marginal_test, hill_tail_index, least_squares_slope, quartile_variance, llt_origin_estimate, lattice_returns,
    lorentz_returns, return_statistics, survival_loglog_slope, HillEstimate, KsOutcome, LltEstimate, ReturnCounter,
    ReturnStats, KS_MIN_SAMPLES, NON_HEAVY_ALPHA,
};
pub use moments::{
    endpoint_covariance, fdd_covariance, Compensated, CovarianceMatrix, EnsembleSummary, FddCovariance, FddSummary,
    Moments,
};
pub use report::{Outcome, Verdict, VerdictReport, REPORT_SCHEMA_VERSION};
