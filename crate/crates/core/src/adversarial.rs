//! Worst-case equiangular instances: dictionaries whose k+1 atoms all pair
//! with inner product exactly −μ, plus the coefficient vectors that put the
//! decay certificate exactly on its boundary.
//!
//! On these instances the greedy selection rule ties *exactly* between a true
//! atom and the one off-support atom, which is what proves the decay
//! certificate tight: relax any inequality to non-strict and these instances
//! break it. The demonstrations here replay the solvers step by step, check
//! the predicted correlation identities (`⟨c̃_i, ã_i⟩ = α_g`,
//! `⟨c̃_i, ã_j⟩ = −μ_g`), and report every tie with scores and signs.
//!
//! All indices in reports are 0-based atom indices; the off-support atom is
//! always index k (the last column).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificates::{
    alpha_g, certify_theorem2, decay_factor, mu_g, CertificateError,
};
use crate::linalg::{tol, Dictionary, LinalgError, OrthoBasis};
use crate::solvers::{raw_correlations, run_oxx, SolverConfig, SolverError, Variant};

#[derive(Debug, Error)]
pub enum AdversarialError {
    #[error("coherence {mu} outside the admissible range (0, {limit}]")]
    InvalidCoherence { mu: f64, limit: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

/// Equiangular instance: k+1 atoms in (k+1)-dimensional space, every pair of
/// distinct atoms at inner product −μ. At μ = 1/k the Gram matrix is
/// singular and the dictionary has rank k (kept deliberately: that is the
/// boundary where ties appear).
#[derive(Debug, Clone)]
pub struct AdversarialInstance {
    pub k: usize,
    pub mu: f64,
    pub dictionary: Dictionary,
    pub gram_target: DMatrix<f64>,
    /// Boundary coefficient vector and the position whose decay inequality it
    /// turns into an equality.
    pub worst_vector: Option<(usize, DVector<f64>)>,
}

fn check_k_mu(k: usize, mu: f64) -> Result<(), AdversarialError> {
    if k == 0 {
        return Err(AdversarialError::InvalidParameters(
            "sparsity k must be at least 1".to_string(),
        ));
    }
    let limit = 1.0 / k as f64;
    if !mu.is_finite() || mu <= 0.0 || mu > limit {
        return Err(AdversarialError::InvalidCoherence { mu, limit });
    }
    Ok(())
}

/// Target Gram matrix: unit diagonal, −μ everywhere else, size (k+1)×(k+1).
/// Its eigenvalues are 1+μ (multiplicity k, orthogonal complement of the
/// all-ones vector) and 1−kμ (the all-ones direction).
pub fn build_gram(k: usize, mu: f64) -> Result<DMatrix<f64>, AdversarialError> {
    check_k_mu(k, mu)?;
    let n = k + 1;
    Ok(DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { -mu }))
}

/// Factors the target Gram matrix as AᵀA using its analytic eigensystem and
/// wraps the result as a [`Dictionary`].
///
/// The eigenvector basis is fixed deterministically: the normalized all-ones
/// vector first (eigenvalue 1−kμ, clamped at zero when μ = 1/k makes it
/// vanish), then an orthonormal completion grown from the standard basis.
/// Any orthonormal completion yields the same Gram matrix, hence identical
/// solver behavior; fixing one makes builds reproducible byte for byte.
pub fn build_dictionary(k: usize, mu: f64) -> Result<AdversarialInstance, AdversarialError> {
    let gram_target = build_gram(k, mu)?;
    let n = k + 1;
    let n_f = n as f64;

    let mut basis = OrthoBasis::new(n);
    let ones = DVector::from_element(n, 1.0 / n_f.sqrt());
    if !basis.push(&ones) {
        return Err(AdversarialError::ConstructionFailed(
            "all-ones eigenvector collapsed during orthogonalization".to_string(),
        ));
    }
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let e = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
        basis.push(&e);
    }
    if basis.len() != n {
        return Err(AdversarialError::ConstructionFailed(format!(
            "orthonormal completion stopped at {} of {n} directions",
            basis.len()
        )));
    }

    // Row i of A is √λ_i times the i-th eigenvector transposed; the all-ones
    // eigenvalue 1−kμ sits in row 0.
    let lambda_ones = (1.0 - k as f64 * mu).max(0.0);
    let lambda_rest = 1.0 + mu;
    let mut atoms = DMatrix::zeros(n, n);
    for (row, u) in basis.vectors().iter().enumerate() {
        let scale = if row == 0 { lambda_ones } else { lambda_rest }.sqrt();
        for col in 0..n {
            atoms[(row, col)] = scale * u[col];
        }
    }

    let dictionary = Dictionary::normalize_columns(atoms)?;
    let achieved = dictionary.atoms().transpose() * dictionary.atoms();
    let max_gram_error = (&achieved - &gram_target).abs().max();
    if max_gram_error > tol::ORTHOGONALITY {
        return Err(AdversarialError::ConstructionFailed(format!(
            "Gram matrix off target by {max_gram_error:.3e}"
        )));
    }
    if (dictionary.mutual_coherence() - mu).abs() > tol::ORTHOGONALITY {
        return Err(AdversarialError::ConstructionFailed(format!(
            "achieved coherence {} instead of {mu}",
            dictionary.mutual_coherence()
        )));
    }
    Ok(AdversarialInstance {
        k,
        mu,
        dictionary,
        gram_target,
        worst_vector: None,
    })
}

impl AdversarialInstance {
    /// Attaches the boundary coefficient vector for position `j`.
    pub fn with_worst_vector(mut self, j: usize, slack: f64) -> Result<Self, AdversarialError> {
        let x = worst_case_vector(self.k, j, self.mu, slack)?;
        self.worst_vector = Some((j, x));
        Ok(self)
    }

    /// Synthesizes the observation for the attached worst-case vector.
    pub fn worst_observation(&self) -> Result<DVector<f64>, AdversarialError> {
        let (_, x) = self.worst_vector.as_ref().ok_or_else(|| {
            AdversarialError::InvalidParameters("no worst-case vector attached".to_string())
        })?;
        Ok(self.dictionary.synthesize(x)?)
    }
}

/// Coefficient vector sitting exactly on the decay certificate's boundary at
/// position `j` (1-based): entries at positions j+1..k are exactly 1, the
/// off-support entry k+1 is 0, position j equals its decay threshold exactly,
/// and positions i < j exceed theirs by the factor `slack`.
///
/// At μ = 1/(2k−j) the position-j threshold is exactly 1, so the sequence is
/// non-increasing as the sorting convention requires.
pub fn worst_case_vector(
    k: usize,
    j: usize,
    mu: f64,
    slack: f64,
) -> Result<DVector<f64>, AdversarialError> {
    if k < 2 || j < 1 || j > k - 1 {
        return Err(AdversarialError::InvalidParameters(format!(
            "need 1 <= j <= k−1 with k >= 2, got k = {k}, j = {j}"
        )));
    }
    if !slack.is_finite() || slack <= 1.0 {
        return Err(AdversarialError::InvalidParameters(format!(
            "slack must exceed 1, got {slack}"
        )));
    }
    if !mu.is_finite() || mu <= 0.0 || j as f64 * mu >= 1.0 {
        return Err(AdversarialError::InvalidCoherence {
            mu,
            limit: 1.0 / j as f64,
        });
    }
    let mut x = DVector::zeros(k + 1);
    for position in (j + 1)..=k {
        x[position - 1] = 1.0;
    }
    x[j - 1] = decay_factor(j, k, 0, mu)? * x[j];
    for position in (1..j).rev() {
        x[position - 1] = slack * decay_factor(position, k, 0, mu)? * x[position];
    }
    Ok(x)
}

/// Measured agreement between projected-atom correlations and their
/// closed-form predictions after `g` selections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma5Report {
    pub g: usize,
    pub alpha_expected: f64,
    pub mu_g_expected: f64,
    pub max_diagonal_deviation: f64,
    pub max_cross_deviation: f64,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Projects the unselected atoms against the span of `active` and compares
/// every correlation `⟨c̃_i, ã_j⟩` with the predicted constants: `α_g` on the
/// diagonal, `−μ_g` off it (identical for every index pair — the instance is
/// exchangeable). Passes when the worst deviation is at most 1e-9.
pub fn verify_lemma5(
    instance: &AdversarialInstance,
    active: &[usize],
    variant: Variant,
) -> Result<Lemma5Report, AdversarialError> {
    let g = active.len();
    if g >= instance.k {
        return Err(AdversarialError::InvalidParameters(format!(
            "active set of size {g} leaves no true atom unselected (k = {})",
            instance.k
        )));
    }
    let alpha = alpha_g(g, instance.mu, variant)?;
    let mu_gq = mu_g(g, instance.mu, variant)?;
    let state = instance.dictionary.projected_atoms(active)?;
    let remaining: Vec<usize> = state.remaining().collect();

    let mut max_diag = 0.0_f64;
    let mut max_cross = 0.0_f64;
    for &i in &remaining {
        let c_i = match variant {
            Variant::Omp => state.projected_atom(i),
            Variant::Ols => state.normalized_projected_atom(i),
        }
        .ok_or_else(|| {
            AdversarialError::ConstructionFailed(format!(
                "projected atom {i} unexpectedly degenerate"
            ))
        })?
        .clone();
        for &jdx in &remaining {
            let a_j = state.projected_atom(jdx).expect("remaining atom").clone();
            let value = c_i.dot(&a_j);
            if i == jdx {
                max_diag = max_diag.max((value - alpha).abs());
            } else {
                max_cross = max_cross.max((value + mu_gq).abs());
            }
        }
    }
    let max_deviation = max_diag.max(max_cross);
    Ok(Lemma5Report {
        g,
        alpha_expected: alpha,
        mu_g_expected: mu_gq,
        max_diagonal_deviation: max_diag,
        max_cross_deviation: max_cross,
        max_deviation,
        pass: max_deviation <= tol::EXACTNESS,
    })
}

/// One recorded step of a converse demonstration: the scores and signs of
/// every candidate with the active set of size `g`, and the indices tied at
/// the top.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConverseStep {
    pub g: usize,
    pub tie_set: Vec<usize>,
    pub scores: BTreeMap<usize, f64>,
    /// Sign of the raw correlation per candidate: −1, 0, or 1.
    pub signs: BTreeMap<usize, i8>,
}

/// Outcome of a converse demonstration. `j` is absent for the final-step
/// (full-support) demonstration. `verdict` is "pass" — a demonstration that
/// fails to materialize its tie is an error, not a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConverseReport {
    pub k: usize,
    pub mu: f64,
    pub j: Option<usize>,
    pub steps: Vec<ConverseStep>,
    pub max_lemma5_deviation: f64,
    pub verdict: String,
}

impl ConverseReport {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string(self)
    }
}

fn step_from_state(
    instance: &AdversarialInstance,
    active: &[usize],
    y: &DVector<f64>,
    variant: Variant,
) -> Result<ConverseStep, AdversarialError> {
    let mut state = instance.dictionary.projected_atoms(active)?;
    state.attach_residual(y)?;
    let raw = raw_correlations(&state, variant);
    let scores: BTreeMap<usize, f64> = raw.iter().map(|(&i, &v)| (i, v.abs())).collect();
    let signs: BTreeMap<usize, i8> = raw
        .iter()
        .map(|(&i, &v)| {
            (
                i,
                if v > 0.0 {
                    1
                } else if v < 0.0 {
                    -1
                } else {
                    0
                },
            )
        })
        .collect();
    let best = scores.values().copied().fold(0.0_f64, f64::max);
    let tie_set: Vec<usize> = scores
        .iter()
        .filter(|&(_, &s)| s >= best - tol::EXACTNESS)
        .map(|(&i, _)| i)
        .collect();
    Ok(ConverseStep {
        g: active.len(),
        tie_set,
        scores,
        signs,
    })
}

/// Demonstrates that the coherence bound μ < 1/k cannot be weakened: at
/// μ = 1/k exactly, after *any* k−1 correct selections the last true atom and
/// the off-support atom tie to within 1e-9 — whatever the coefficients are.
///
/// Uses the default profile x_i = k+1−i; see
/// [`demonstrate_converse_k_with_profile`] for custom coefficients.
pub fn demonstrate_converse_k(k: usize) -> Result<ConverseReport, AdversarialError> {
    let profile: Vec<f64> = (0..k).map(|i| (k - i) as f64).collect();
    demonstrate_converse_k_with_profile(k, &profile)
}

/// Profile-parameterized form of [`demonstrate_converse_k`]. The profile is
/// normalized to unit peak before synthesis (the tie is exactly
/// scale-invariant, and working at unit scale keeps absolute tolerances
/// meaningful for strongly decaying profiles).
pub fn demonstrate_converse_k_with_profile(
    k: usize,
    profile: &[f64],
) -> Result<ConverseReport, AdversarialError> {
    if profile.len() != k {
        return Err(AdversarialError::InvalidParameters(format!(
            "profile must list k = {k} coefficients, got {}",
            profile.len()
        )));
    }
    if profile.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(AdversarialError::InvalidParameters(
            "profile coefficients must be finite and strictly positive".to_string(),
        ));
    }
    let mu = 1.0 / k as f64;
    let instance = build_dictionary(k, mu)?;
    let peak = profile.iter().cloned().fold(f64::MIN, f64::max);
    let mut x = DVector::zeros(k + 1);
    for (i, &v) in profile.iter().enumerate() {
        x[i] = v / peak;
    }
    let y = instance.dictionary.synthesize(&x)?;

    // The guaranteed tie: leave any one true atom out, select the rest, and
    // the leftover true atom ties with the off-support atom k.
    for variant in [Variant::Omp, Variant::Ols] {
        for omitted in 0..k {
            let active: Vec<usize> = (0..k).filter(|&i| i != omitted).collect();
            let mut state = instance.dictionary.projected_atoms(&active)?;
            state.attach_residual(&y)?;
            let raw = raw_correlations(&state, variant);
            let score_true = raw[&omitted].abs();
            let score_wrong = raw[&k].abs();
            if (score_true - score_wrong).abs() > tol::EXACTNESS {
                return Err(AdversarialError::ConstructionFailed(format!(
                    "tie missing ({variant}, omitted atom {omitted}): |{score_true:.12e}| vs |{score_wrong:.12e}|"
                )));
            }
        }
    }

    // A real run must also exhibit the failure: either it picks the
    // off-support atom outright, or the off-support atom shows up in a
    // recorded tie set (whichever path the tie breaking takes).
    for variant in [Variant::Omp, Variant::Ols] {
        let trace = run_oxx(&instance.dictionary, &y, &SolverConfig::new(variant, k))?;
        let exhibited = trace.steps.iter().any(|s| s.tie_set.contains(&k));
        if !exhibited {
            return Err(AdversarialError::ConstructionFailed(format!(
                "solver run ({variant}) never met the off-support atom in a tie set"
            )));
        }
    }

    // Canonical replay for the report: select true atoms in order, recording
    // scores at every depth; the last step shows the tie.
    let mut steps = Vec::with_capacity(k);
    let mut max_lemma5 = 0.0_f64;
    for g in 0..k {
        let active: Vec<usize> = (0..g).collect();
        steps.push(step_from_state(&instance, &active, &y, Variant::Omp)?);
        for variant in [Variant::Omp, Variant::Ols] {
            let report = verify_lemma5(&instance, &active, variant)?;
            max_lemma5 = max_lemma5.max(report.max_deviation);
            if !report.pass {
                return Err(AdversarialError::ConstructionFailed(format!(
                    "correlation identities off by {:.3e} at g = {g}",
                    report.max_deviation
                )));
            }
        }
    }
    let last = steps.last().expect("k >= 1 yields at least one step");
    if !(last.tie_set.contains(&(k - 1)) && last.tie_set.contains(&k)) {
        return Err(AdversarialError::ConstructionFailed(format!(
            "final-step tie set {:?} misses the expected pair {{{}, {k}}}",
            last.tie_set,
            k - 1
        )));
    }

    Ok(ConverseReport {
        k,
        mu,
        j: None,
        steps,
        max_lemma5_deviation: max_lemma5,
        verdict: "pass".to_string(),
    })
}

/// Demonstrates that the decay condition at position `j` cannot be weakened:
/// at μ = 1/(2k−j) with the boundary vector, the first j−1 selections are
/// uniquely correct and the j-th ties the true atom j with the off-support
/// atom (their raw correlations summing to zero), while the decay certificate
/// flags exactly position j as its boundary.
pub fn demonstrate_converse_j(
    k: usize,
    j: usize,
    slack: f64,
) -> Result<ConverseReport, AdversarialError> {
    if k < 2 || j < 1 || j > k - 1 {
        return Err(AdversarialError::InvalidParameters(format!(
            "need 1 <= j <= k−1 with k >= 2, got k = {k}, j = {j}"
        )));
    }
    let mu = 1.0 / (2 * k - j) as f64;
    let instance = build_dictionary(k, mu)?.with_worst_vector(j, slack)?;
    let (_, x_raw) = instance.worst_vector.as_ref().expect("just attached");
    let peak = x_raw.iter().cloned().fold(f64::MIN, f64::max);
    let mut x = x_raw / peak;
    // At μ = 1/(2k−j) the decay factor at position j is exactly 1, so the
    // boundary entry equals its successor in exact arithmetic. Evaluating the
    // factor can land one rounding step off; pin the realized vector onto the
    // boundary it is designed to sit on.
    x[j - 1] = x[j];
    let y = instance.dictionary.synthesize(&x)?;

    let mut steps = Vec::with_capacity(j);
    let mut max_lemma5 = 0.0_f64;
    for g in 0..j {
        let active: Vec<usize> = (0..g).collect();
        for variant in [Variant::Omp, Variant::Ols] {
            let report = verify_lemma5(&instance, &active, variant)?;
            max_lemma5 = max_lemma5.max(report.max_deviation);

            let step = step_from_state(&instance, &active, &y, variant)?;
            if g + 1 < j {
                if step.tie_set != vec![g] {
                    return Err(AdversarialError::ConstructionFailed(format!(
                        "step {g} ({variant}) should select atom {g} uniquely, tie set {:?}",
                        step.tie_set
                    )));
                }
            } else {
                if !(step.tie_set.contains(&(j - 1)) && step.tie_set.contains(&k)) {
                    return Err(AdversarialError::ConstructionFailed(format!(
                        "step {g} ({variant}) tie set {:?} misses {{{}, {k}}}",
                        step.tie_set,
                        j - 1
                    )));
                }
                let gap = (step.scores[&(j - 1)] - step.scores[&k]).abs();
                if gap > tol::EXACTNESS {
                    return Err(AdversarialError::ConstructionFailed(format!(
                        "step {g} ({variant}) tie gap {gap:.3e} exceeds tolerance"
                    )));
                }
                // Opposite signs: the two raw correlations cancel.
                let mut state = instance.dictionary.projected_atoms(&active)?;
                state.attach_residual(&y)?;
                let raw = raw_correlations(&state, variant);
                let cancel = (raw[&(j - 1)] + raw[&k]).abs();
                if cancel > tol::EXACTNESS {
                    return Err(AdversarialError::ConstructionFailed(format!(
                        "step {g} ({variant}) correlations sum to {cancel:.3e}, not zero"
                    )));
                }
            }
            if variant == Variant::Omp {
                steps.push(step);
            }
        }
    }

    // The decay certificate agrees: every position passes strictly except j,
    // which sits exactly on its boundary.
    let head: Vec<f64> = (0..k).map(|i| x[i]).collect();
    let profile = crate::certificates::SignalProfile::exact_sparse(head.clone())?;
    let cert = certify_theorem2(&profile, mu)?;
    if cert.verdict.pass || cert.verdict.binding_index != Some(j) || !cert.verdict.boundary {
        return Err(AdversarialError::ConstructionFailed(format!(
            "decay certificate should flag the boundary at position {j}, got {:?}",
            cert.verdict
        )));
    }
    for i in 1..k {
        if i == j {
            continue;
        }
        let margin = head[i - 1] - decay_factor(i, k, 0, mu)? * head[i];
        if margin <= 0.0 {
            return Err(AdversarialError::ConstructionFailed(format!(
                "decay condition at position {i} should hold strictly, margin {margin:.3e}"
            )));
        }
    }

    Ok(ConverseReport {
        k,
        mu,
        j: Some(j),
        steps,
        max_lemma5_deviation: max_lemma5,
        verdict: "pass".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gram_has_the_two_predicted_eigenvalues() {
        for (k, mu) in [(2usize, 0.5), (3, 0.2)] {
            let gram = build_gram(k, mu).unwrap();
            let mut eigen: Vec<f64> = gram.symmetric_eigenvalues().iter().copied().collect();
            eigen.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_relative_eq!(eigen[0], 1.0 - k as f64 * mu, epsilon = 1e-12);
            for value in &eigen[1..] {
                assert_relative_eq!(*value, 1.0 + mu, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gram_tends_to_identity_as_mu_vanishes() {
        let gram = build_gram(4, 1e-12).unwrap();
        let dev = (&gram - DMatrix::<f64>::identity(5, 5)).abs().max();
        assert!(dev <= 1e-12);
    }

    #[test]
    fn gram_rejects_out_of_range_coherence() {
        assert!(matches!(
            build_gram(4, 0.3),
            Err(AdversarialError::InvalidCoherence { .. })
        ));
        assert!(matches!(
            build_gram(4, 0.0),
            Err(AdversarialError::InvalidCoherence { .. })
        ));
    }

    #[test]
    fn dictionary_achieves_the_target_gram() {
        let instance = build_dictionary(3, 0.2).unwrap();
        assert_relative_eq!(
            instance.dictionary.mutual_coherence(),
            0.2,
            epsilon = 1e-10
        );
        let gram = instance.dictionary.gram();
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { -0.2 };
                assert_relative_eq!(gram[(i, j)], target, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn dictionary_at_the_singular_boundary_keeps_rank_k() {
        let instance = build_dictionary(2, 0.5).unwrap();
        let svd = instance.dictionary.atoms().clone().svd(false, false);
        let singular: Vec<f64> = svd.singular_values.iter().copied().collect();
        let nonzero = singular.iter().filter(|s| **s > 1e-8).count();
        assert_eq!(nonzero, 2, "rank k with one collapsed direction");
        assert_relative_eq!(
            instance.dictionary.mutual_coherence(),
            0.5,
            epsilon = 1e-10
        );
    }

    #[test]
    fn worst_vector_matches_the_worked_example() {
        // k = 3, j = 1 at μ = 1/5: the profile goes flat.
        let x = worst_case_vector(3, 1, 0.2, 1.5).unwrap();
        for i in 0..3 {
            assert_relative_eq!(x[i], 1.0, epsilon = 1e-12);
        }
        assert_eq!(x[3], 0.0);

        // k = 3, j = 2 at μ = 1/4: positions 2..3 flat at 1, position 1
        // carries the slack over its factor 4/3.
        let x = worst_case_vector(3, 2, 0.25, 1.5).unwrap();
        assert_relative_eq!(x[0], 1.5 * 4.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[2], 1.0, epsilon = 1e-12);
        assert_eq!(x[3], 0.0);
    }

    #[test]
    fn worst_vector_validates_inputs() {
        assert!(worst_case_vector(3, 0, 0.2, 1.5).is_err());
        assert!(worst_case_vector(3, 3, 0.2, 1.5).is_err());
        assert!(worst_case_vector(3, 1, 0.2, 1.0).is_err());
        assert!(worst_case_vector(3, 2, 0.6, 1.5).is_err());
    }

    #[test]
    fn lemma5_identities_hold_on_a_small_instance() {
        // k = 2, μ = 0.3, one atom selected: diagonal 0.91, cross −0.39.
        let instance = build_dictionary(2, 0.3).unwrap();
        let report = verify_lemma5(&instance, &[1], Variant::Omp).unwrap();
        assert!(report.pass);
        assert_relative_eq!(report.alpha_expected, 0.91, epsilon = 1e-12);
        assert_relative_eq!(report.mu_g_expected, 0.39, epsilon = 1e-12);

        // Nothing selected: diagonal 1, cross −μ.
        let empty = verify_lemma5(&instance, &[], Variant::Ols).unwrap();
        assert!(empty.pass);
        assert_eq!(empty.alpha_expected, 1.0);
        assert_relative_eq!(empty.mu_g_expected, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn ols_correlations_are_omp_scaled_by_projected_norm() {
        let instance = build_dictionary(3, 0.25).unwrap();
        let omp = verify_lemma5(&instance, &[0, 2], Variant::Omp).unwrap();
        let ols = verify_lemma5(&instance, &[0, 2], Variant::Ols).unwrap();
        assert!(omp.pass && ols.pass);
        let alpha = omp.alpha_expected;
        assert_relative_eq!(ols.alpha_expected, alpha.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(
            ols.mu_g_expected,
            omp.mu_g_expected / alpha.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn converse_k_demonstration_ties_at_the_last_step() {
        let report = demonstrate_converse_k(2).unwrap();
        assert_eq!(report.k, 2);
        assert_eq!(report.j, None);
        assert_relative_eq!(report.mu, 0.5, epsilon = 1e-15);
        assert!(report.max_lemma5_deviation <= 1e-9);
        let last = report.steps.last().unwrap();
        assert!(last.tie_set.contains(&1) && last.tie_set.contains(&2));
    }

    #[test]
    fn converse_k_is_profile_independent() {
        for profile in [&[1.0, 1.0, 1.0][..], &[3.0, 2.0, 1.0], &[100.0, 10.0, 1.0]] {
            let report = demonstrate_converse_k_with_profile(3, profile).unwrap();
            assert_eq!(report.verdict, "pass");
        }
    }

    #[test]
    fn converse_k_handles_the_degenerate_one_sparse_case() {
        // k = 1 forces μ = 1: the second atom is the first negated, and the
        // very first step already ties.
        let report = demonstrate_converse_k(1).unwrap();
        assert_eq!(report.steps.len(), 1);
        assert_eq!(report.steps[0].tie_set, vec![0, 1]);
    }

    #[test]
    fn converse_j_demonstration_matches_the_worked_example() {
        let report = demonstrate_converse_j(3, 2, 1.1).unwrap();
        assert_relative_eq!(report.mu, 0.25, epsilon = 1e-15);
        assert_eq!(report.j, Some(2));
        assert_eq!(report.steps.len(), 2);
        assert_eq!(report.steps[0].tie_set, vec![0]);
        let tie = &report.steps[1];
        assert!(tie.tie_set.contains(&1) && tie.tie_set.contains(&3));
        // Opposite signs between the tied true atom and the off-support atom.
        assert_eq!(tie.signs[&1] * tie.signs[&3], -1);
    }

    #[test]
    fn converse_j_ties_immediately_when_j_is_one() {
        let report = demonstrate_converse_j(5, 1, 1.5).unwrap();
        assert_relative_eq!(report.mu, 1.0 / 9.0, epsilon = 1e-15);
        assert_eq!(report.steps.len(), 1);
        let tie = &report.steps[0];
        assert!(tie.tie_set.contains(&0) && tie.tie_set.contains(&5));
    }

    #[test]
    fn converse_reports_serialize_to_json() {
        let report = demonstrate_converse_j(3, 1, 2.0).unwrap();
        let text = report.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["k"], serde_json::json!(3));
        assert_eq!(value["j"], serde_json::json!(1));
        assert_eq!(value["verdict"], serde_json::json!("pass"));
        assert!(value["steps"].as_array().unwrap().len() == 1);
        let parsed: ConverseReport = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.steps[0].tie_set, report.steps[0].tie_set);
    }
}
