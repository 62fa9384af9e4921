//! Degrees-of-freedom upper bounds for the K-user interference channel with
//! CoMP transmission, where each message may be known at up to `M`
//! transmitters.

pub mod assignment;
pub mod certificate;
pub mod error;
pub mod expansion;
pub mod io;
pub mod oracle;
pub mod search;
pub mod verify;

pub use assignment::{
    canonical_form, generate, generate_trial, validate, AssignmentDoc, GeneratorKind,
    GeneratorSpec, MessageAssignment, ValidationReport,
};
pub use certificate::{
    check_counting_inequalities, construct_certificate, construct_certificate_m3, extend_step,
    extend_step_m3, find_basis, CertificateSet, InequalityVariant,
};
pub use error::{Error, Result};
pub use expansion::{
    carried_messages, dof_upper_bound, expansion_profile, i_min_of_profile, reconstruction_check,
    BoundResult, ExpansionProfile, ProfileMode,
};
pub use search::{
    epsilon_experiment, epsilon_threshold, eta_out_exact, eta_out_random, expansion_ratio,
    SearchBudget, SearchReport,
};
