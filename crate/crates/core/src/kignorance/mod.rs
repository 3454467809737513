//! K-ignorance: the driver `f = −K|z|`, worst-case priors and the closed
//! form saddle points for exponential, logarithmic, deterministic-drift and
//! small-drift cases.

mod closed_form;
mod quadrature;
mod worst_case;

pub use closed_form::{
    cara_saddle, deterministic_mu_minimizer, log_saddle, small_mu_case, submartingale_check, CaraRecord,
    DeterministicMinimizer, LogRecord, SubmartingaleReport,
};
pub use quadrature::gauss_hermite_normal;
pub use worst_case::{expectation_under, kignorance_utility, KScenario, KUtilityReport, WorstCasePrior};
