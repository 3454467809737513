//! Convex duality for concave generators: transform, dual value, minimizer,
//! multiplier and saddle point.

mod control;
mod fenchel;
mod minimize;
mod multiplier;
mod saddle;
pub(crate) mod search;
mod utility;
mod value;

pub use control::ControlProcess;
pub use fenchel::{duality_relation_check, fenchel_transform, fenchel_transform_with, DualityGapReport, ExtReal, FenchelOptions};
pub use minimize::{minimize_dual, DualOptions, Minimizer, MinimizerMethod};
pub use multiplier::{solve_multiplier, MultiplierSolution};
pub use saddle::{alternative_controls, optimal_terminal_wealth, solve_dual, value_state, verify_saddle, AlternativeCheck, DualSolution, SaddleReport};
pub use utility::{Domain, ScalarFn, UtilityKind, UtilitySpec};
pub use value::{dual_value, dual_value_samples, primal_value_samples};

pub(crate) use minimize::{clamp_control, log_auxiliary_minimizer};
pub(crate) use saddle::assemble;
