//! Numerical checks of the regularity estimates and the acceptance driver.

pub mod acceptance;
pub mod checks;
pub mod decay;
pub mod interpolation;

pub use acceptance::{run_all, verify_all, AcceptanceConfig, AcceptanceReport, CriterionResult};
pub use checks::{
    harmonic_blowup_compare, harmonic_decay_check, mean_oscillation_check, morrey_iteration, taylor_excess_bound_check,
};
pub use decay::{excess_decay_sweep, DecayTable};
pub use interpolation::{interpolation_inequality_check, polynomial_battery};
