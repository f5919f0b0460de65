//! Analysis toolkit for greedy sparse recovery.
//!
//! The crate studies two forward-selection solvers — orthogonal matching
//! pursuit (OMP) and orthogonal least squares (OLS) — through a single
//! projected-atom selection rule, and provides:
//!
//! * [`linalg`]: dense primitives — column normalization, Gram/coherence
//!   computation, orthogonal-complement projection, projected atoms.
//! * [`solvers`]: full iteration traces for OMP/OLS with explicit tie
//!   reporting.
//! * [`certificates`]: coherence-based sufficient conditions for k-step
//!   recovery (uniform, decay-based, noisy/compressible variants), reported
//!   with the binding condition and the implied coherence budget.
//! * [`adversarial`]: the worst-case equiangular dictionary whose projected
//!   correlations are known in closed form, plus replay demonstrations that
//!   the decay certificates are tight (exact score ties on the boundary).
//! * [`experiments`]: Monte-Carlo harness measuring how often random
//!   coefficient profiles satisfy the decay conditions, and end-to-end
//!   validation that certified instances never fail.
//!
//! All numerical tolerances live in [`linalg::tol`] and are re-exported at
//! the crate root.

pub mod adversarial;
pub mod certificates;
pub mod experiments;
pub mod linalg;
pub mod solvers;

pub use linalg::tol;
pub use linalg::{welch_bound, Dictionary, LinalgError, ProjectedState};
pub use solvers::{
    k_step_success, run_oxx, run_oxx_from, select_next, RunTrace, SolverConfig, SolverError,
    StepRecord, StopReason, TiePolicy, Variant,
};
pub use certificates::{
    alpha_g, decay_factor, gamma_k, mu_g, CertificateError, CertificateReport, SignalProfile,
    TheoremId, Verdict,
};
pub use adversarial::{
    build_dictionary, build_gram, demonstrate_converse_j, demonstrate_converse_k,
    verify_lemma5, worst_case_vector, AdversarialError, AdversarialInstance, ConverseReport,
};
pub use experiments::{
    decay_constraint_curve, emit_csv, prob_satisfy_decay, sample_coefficients,
    validate_guarantee, DistributionSpec, ExperimentError, ExperimentResult,
};
