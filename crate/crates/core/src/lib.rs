//! Guaranteed-privacy-preserving H∞-optimal interval observers for
//! bounded-error LTI multi-agent systems.
//!
//! The crate is organized around the pipeline an operator would run:
//! [`plant`] assembles the coupled multi-agent system and [`scenario`]
//! loads configuration files; [`observer`] runs the interval framer and
//! exposes the set-valued release mechanism; [`hinf`] certifies stability
//! and gain levels (direct computation plus diagonal-storage LMI
//! certificates); [`synthesis`] searches for observer gains; [`audit`]
//! empirically validates guaranteed-privacy claims and provides a
//! differentially private baseline for comparison. [`matops`] holds the
//! dense kernels and the matrix-splitting calculus everything else is
//! built on.

pub mod audit;
pub mod hinf;
pub mod matops;
pub mod observer;
pub mod plant;
pub mod rng;
pub mod scenario;
pub mod synthesis;

pub use matops::{Matrix, MatrixSplit};
pub use plant::{AgentBlock, IntervalVector, PlantModel, PrivacyBudget};

/// Bundled scenario encoding the five-firm market example, including the
/// published gain pattern and perturbation factor.
pub fn market5_fixture() -> &'static str {
    include_str!("../fixtures/market5.cfg")
}

/// Bundled scalar scenario with a feasible privacy budget, used by the
/// command-line examples and the audit tests.
pub fn scalar_fixture() -> &'static str {
    include_str!("../fixtures/scalar.cfg")
}
