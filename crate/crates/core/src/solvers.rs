//! Greedy forward-selection solvers with full iteration traces.
//!
//! Both solvers share one selection rule over projected atoms. With `Q` the
//! current active set, `r` the residual projected away from `span(A_Q)`,
//! `ã_i` the projected atom and `b̃_i` its normalization, the next index
//! maximizes `|⟨c̃_i, r⟩|` where `c̃_i = ã_i` for OMP and `c̃_i = b̃_i` for
//! OLS. The OLS choice is equivalent to brute-force residual minimization
//! (see [`ols_residual_bruteforce`], kept as an independent oracle).
//!
//! Score ties are first-class citizens here: the worst-case constructions in
//! [`crate::adversarial`] produce *exact* ties, so every step records the
//! full tie set and the tie-breaking policy is explicit configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::DVector;
use serde::Deserialize;
use thiserror::Error;

use crate::linalg::{tol, Dictionary, LinalgError, ProjectedState};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("every remaining atom projects to zero against the active set")]
    AllAtomsDegenerate,
    #[error("candidate {candidate} is already in the active set")]
    CandidateInActiveSet { candidate: usize },
    #[error("data vector contains non-finite entries")]
    NonFiniteInput,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which greedy solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Omp,
    Ols,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Omp => "omp",
            Variant::Ols => "ols",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What to do when several candidates score within `tie_tolerance` of the
/// maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    /// Pick the smallest tied index and continue (reproducible default).
    LowestIndex,
    /// Record the ambiguous step, then stop the run: the selection is not
    /// well defined, and downstream analysis gets the full tie set.
    ReportAmbiguous,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Number of selection steps to run (the sparsity budget k).
    pub max_iterations: usize,
    /// Absolute slack when grouping scores into a tie set.
    pub tie_tolerance: f64,
    pub tie_policy: TiePolicy,
}

impl SolverConfig {
    pub fn new(variant: Variant, max_iterations: usize) -> Self {
        Self {
            variant,
            max_iterations,
            tie_tolerance: tol::DEFAULT_TIE,
            tie_policy: TiePolicy::LowestIndex,
        }
    }
}

/// One recorded selection step.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StepRecord {
    /// Size of the active set when the step's scores were computed.
    #[serde(rename = "g")]
    pub iteration: usize,
    pub selected: usize,
    /// All indices scoring within `tie_tolerance` of the maximum, ascending.
    pub tie_set: Vec<usize>,
    /// Residual norm after adding `selected` to the active set.
    pub residual_norm: f64,
    /// `|⟨c̃_i, r⟩|` for every candidate `i` outside the active set.
    pub scores: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The full iteration budget was spent.
    CompletedAllIterations,
    /// The residual norm fell to numerical zero before the budget ran out.
    ResidualNegligible,
    /// Every remaining atom projected to zero against the active set.
    AllAtomsDegenerate,
    /// A tie was hit under [`TiePolicy::ReportAmbiguous`].
    TieAmbiguous,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::CompletedAllIterations => "completed_all_iterations",
            StopReason::ResidualNegligible => "residual_negligible",
            StopReason::AllAtomsDegenerate => "all_atoms_degenerate",
            StopReason::TieAmbiguous => "tie_ambiguous",
        }
    }
}

/// Complete record of a solver run.
#[derive(Debug, Clone, Deserialize)]
pub struct RunTrace {
    pub variant: Variant,
    pub steps: Vec<StepRecord>,
    pub final_active_set: Vec<usize>,
    pub stop_reason: StopReason,
}

/// Outcome of scoring the remaining candidates once.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Smallest index in the tie set (the canonical choice).
    pub selected: usize,
    pub tie_set: Vec<usize>,
    pub scores: BTreeMap<usize, f64>,
}

/// Signed correlations `⟨c̃_i, r⟩` for every candidate outside the active
/// set. Degenerate candidates (projected atom numerically zero) get a 0.0
/// entry. The converse demonstrations read these raw values to verify sign
/// relations that the absolute scores would hide.
pub fn raw_correlations(state: &ProjectedState, variant: Variant) -> BTreeMap<usize, f64> {
    let residual = state.residual();
    let mut raw = BTreeMap::new();
    for i in state.remaining() {
        let value = if state.is_degenerate(i) {
            0.0
        } else {
            let direction = match variant {
                Variant::Omp => state.projected_atom(i),
                Variant::Ols => state.normalized_projected_atom(i),
            }
            .expect("remaining index must have a projected atom");
            direction.dot(residual)
        };
        raw.insert(i, value);
    }
    raw
}

/// Scores every non-degenerate candidate outside the active set against the
/// attached residual and groups the top scores into a tie set.
///
/// Degenerate candidates keep a 0.0 entry in the score map but are never
/// selected.
pub fn select_next(
    state: &ProjectedState,
    variant: Variant,
    tie_tolerance: f64,
) -> Result<Selection, SolverError> {
    if tie_tolerance.is_nan() || tie_tolerance < 0.0 {
        return Err(SolverError::InvalidConfig(format!(
            "tie_tolerance must be non-negative, got {tie_tolerance}"
        )));
    }
    let scores: BTreeMap<usize, f64> = raw_correlations(state, variant)
        .into_iter()
        .map(|(i, v)| (i, v.abs()))
        .collect();
    let best = scores
        .iter()
        .filter(|&(&i, _)| !state.is_degenerate(i))
        .map(|(_, &s)| s)
        .fold(None, |acc: Option<f64>, s| {
            Some(acc.map_or(s, |b| b.max(s)))
        })
        .ok_or(SolverError::AllAtomsDegenerate)?;
    let tie_set: Vec<usize> = scores
        .iter()
        .filter(|&(&i, &s)| !state.is_degenerate(i) && s >= best - tie_tolerance)
        .map(|(&i, _)| i)
        .collect();
    let selected = tie_set[0];
    Ok(Selection {
        selected,
        tie_set,
        scores,
    })
}

/// Runs the configured solver from an empty active set.
pub fn run_oxx(
    dictionary: &Dictionary,
    y: &DVector<f64>,
    config: &SolverConfig,
) -> Result<RunTrace, SolverError> {
    run_oxx_from(dictionary, y, &[], config)
}

/// Runs the configured solver starting from an already-selected active set.
/// `config.max_iterations` counts the *additional* steps to take.
///
/// The residual is recomputed by full projection at every step; stopping
/// early (numerically zero residual, fully degenerate candidates, or an
/// ambiguous tie under [`TiePolicy::ReportAmbiguous`]) is recorded in the
/// trace's `stop_reason` rather than reported as an error.
pub fn run_oxx_from(
    dictionary: &Dictionary,
    y: &DVector<f64>,
    initial_active_set: &[usize],
    config: &SolverConfig,
) -> Result<RunTrace, SolverError> {
    if config.max_iterations == 0 {
        return Err(SolverError::InvalidConfig(
            "max_iterations must be positive".to_string(),
        ));
    }
    let budget = initial_active_set.len() + config.max_iterations;
    let cap = dictionary.m().min(dictionary.n());
    if budget > cap {
        return Err(SolverError::InvalidConfig(format!(
            "active set would grow to {budget}, beyond min(m, n) = {cap}"
        )));
    }
    if config.tie_tolerance.is_nan() || config.tie_tolerance < 0.0 {
        return Err(SolverError::InvalidConfig(format!(
            "tie_tolerance must be non-negative, got {}",
            config.tie_tolerance
        )));
    }
    if y.len() != dictionary.m() {
        return Err(LinalgError::DimensionMismatch {
            expected: dictionary.m(),
            got: y.len(),
        }
        .into());
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteInput);
    }

    let mut active: Vec<usize> = initial_active_set.to_vec();
    let mut steps = Vec::with_capacity(config.max_iterations);
    let mut stop_reason = StopReason::CompletedAllIterations;
    for _ in 0..config.max_iterations {
        let mut state = dictionary.projected_atoms(&active)?;
        state.attach_residual(y)?;
        if state.residual().norm() <= tol::RESIDUAL_STOP {
            stop_reason = StopReason::ResidualNegligible;
            break;
        }
        let selection = match select_next(&state, config.variant, config.tie_tolerance) {
            Ok(sel) => sel,
            Err(SolverError::AllAtomsDegenerate) => {
                stop_reason = StopReason::AllAtomsDegenerate;
                break;
            }
            Err(other) => return Err(other),
        };
        let g = active.len();
        active.push(selection.selected);
        let residual_norm = dictionary.project_complement(&active, y)?.norm();
        let ambiguous = selection.tie_set.len() > 1;
        steps.push(StepRecord {
            iteration: g,
            selected: selection.selected,
            tie_set: selection.tie_set,
            residual_norm,
            scores: selection.scores,
        });
        if ambiguous && config.tie_policy == TiePolicy::ReportAmbiguous {
            stop_reason = StopReason::TieAmbiguous;
            break;
        }
    }
    Ok(RunTrace {
        variant: config.variant,
        steps,
        final_active_set: active,
        stop_reason,
    })
}

/// Residual norm after adding `candidate` to the active set, computed by
/// direct projection. Independent oracle for the OLS selection rule: the
/// brute-force argmin over candidates must match the argmax of
/// `|⟨b̃_i, r⟩|`.
///
/// A candidate inside the selected span leaves the residual unchanged,
/// matching the convention that its normalized projected atom is zero.
pub fn ols_residual_bruteforce(
    dictionary: &Dictionary,
    active: &[usize],
    candidate: usize,
    y: &DVector<f64>,
) -> Result<f64, SolverError> {
    if active.contains(&candidate) {
        return Err(SolverError::CandidateInActiveSet { candidate });
    }
    let mut extended = active.to_vec();
    extended.push(candidate);
    match dictionary.project_complement(&extended, y) {
        Ok(residual) => Ok(residual.norm()),
        Err(LinalgError::RankDeficientActiveSet { index }) if index == candidate => {
            Ok(dictionary.project_complement(active, y)?.norm())
        }
        Err(other) => Err(other.into()),
    }
}

/// True when the trace selected every index of `true_support` and nothing
/// outside it. A run that stopped early on a strict subset fails, even with
/// zero residual.
pub fn k_step_success(trace: &RunTrace, true_support: &[usize]) -> bool {
    let selected: BTreeSet<usize> = trace.steps.iter().map(|s| s.selected).collect();
    let target: BTreeSet<usize> = true_support.iter().copied().collect();
    selected == target
}

fn push_f64_17(out: &mut String, value: f64) {
    // 17 significant digits: enough to reproduce any f64 exactly on parse.
    let _ = write!(out, "{:.16e}", value);
}

impl RunTrace {
    /// Serializes the trace as JSON. Scores and residual norms are written
    /// with 17 significant digits so the emitted file reproduces the run's
    /// floating-point values exactly.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\"variant\":\"");
        out.push_str(self.variant.as_str());
        out.push_str("\",\"steps\":[");
        for (si, step) in self.steps.iter().enumerate() {
            if si > 0 {
                out.push(',');
            }
            let _ = write!(out, "{{\"g\":{},\"selected\":{},\"tie_set\":[", step.iteration, step.selected);
            for (ti, idx) in step.tie_set.iter().enumerate() {
                if ti > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{idx}");
            }
            out.push_str("],\"residual_norm\":");
            push_f64_17(&mut out, step.residual_norm);
            out.push_str(",\"scores\":{");
            for (ki, (idx, score)) in step.scores.iter().enumerate() {
                if ki > 0 {
                    out.push(',');
                }
                let _ = write!(out, "\"{idx}\":");
                push_f64_17(&mut out, *score);
            }
            out.push_str("}}");
        }
        out.push_str("],\"final_active_set\":[");
        for (i, idx) in self.final_active_set.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{idx}");
        }
        out.push_str("],\"stop_reason\":\"");
        out.push_str(self.stop_reason.as_str());
        out.push_str("\"}");
        out
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
