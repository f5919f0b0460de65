//! Recovery certificates: sufficient conditions on (sparsity, coherence,
//! coefficient decay) under which the greedy solvers provably select only
//! true-support atoms.
//!
//! Every checker is a pure function over a [`SignalProfile`] and a coherence
//! value. Inequalities are evaluated *strictly*, matching the conditions'
//! statements; exact equality (within a relative tolerance) is reported as a
//! failure with the `boundary` flag set, because the adversarial instances in
//! [`crate::adversarial`] live precisely on these boundaries and the flag is
//! how the converse demonstrations identify them.
//!
//! Position indices in conditions are 1-based: `x_1 ≥ x_2 ≥ … ≥ x_k > 0` are
//! the sorted head magnitudes, and a failed verdict's `binding_index` is the
//! first position whose inequality broke (0 denotes the coherence
//! precondition itself).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::tol;
use crate::solvers::Variant;

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("coherence {mu} is at or beyond the admissible limit {limit}")]
    CoherenceTooLarge { mu: f64, limit: f64 },
    #[error("certificate not applicable: {0}")]
    NotApplicable(String),
    #[error("position index {index} outside valid range 1..={max}")]
    InvalidIndex { index: usize, max: usize },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid signal profile: {0}")]
    InvalidProfile(String),
}

/// Sorted description of the signal being recovered: head magnitudes on the
/// support (largest first), off-support tail mass, and a noise budget.
///
/// `selected_prefix` is the number of support atoms already (correctly)
/// selected; the head then lists only the remaining magnitudes, so the total
/// sparsity is `k = selected_prefix + head.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalProfile {
    head_magnitudes: Vec<f64>,
    tail_l1: f64,
    noise_budget: f64,
    selected_prefix: usize,
}

impl SignalProfile {
    pub fn new(
        head_magnitudes: Vec<f64>,
        tail_l1: f64,
        noise_budget: f64,
        selected_prefix: usize,
    ) -> Result<Self, CertificateError> {
        if head_magnitudes.is_empty() {
            return Err(CertificateError::InvalidProfile(
                "head must contain at least one magnitude".to_string(),
            ));
        }
        for (i, &m) in head_magnitudes.iter().enumerate() {
            if !m.is_finite() || m <= 0.0 {
                return Err(CertificateError::InvalidProfile(format!(
                    "head magnitude at position {} must be finite and strictly positive, got {m}",
                    i + 1
                )));
            }
            if i > 0 && m > head_magnitudes[i - 1] {
                return Err(CertificateError::InvalidProfile(format!(
                    "head magnitudes must be non-increasing; position {} rises {} -> {m}",
                    i + 1,
                    head_magnitudes[i - 1]
                )));
            }
        }
        for (label, v) in [("tail_l1", tail_l1), ("noise_budget", noise_budget)] {
            if !v.is_finite() || v < 0.0 {
                return Err(CertificateError::InvalidProfile(format!(
                    "{label} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self {
            head_magnitudes,
            tail_l1,
            noise_budget,
            selected_prefix,
        })
    }

    /// Noiseless, zero-tail profile with nothing selected yet.
    pub fn exact_sparse(head_magnitudes: Vec<f64>) -> Result<Self, CertificateError> {
        Self::new(head_magnitudes, 0.0, 0.0, 0)
    }

    /// Remaining (unselected) head magnitudes, largest first.
    pub fn head(&self) -> &[f64] {
        &self.head_magnitudes
    }

    /// Total sparsity: already-selected atoms plus remaining head entries.
    pub fn k(&self) -> usize {
        self.selected_prefix + self.head_magnitudes.len()
    }

    pub fn selected_prefix(&self) -> usize {
        self.selected_prefix
    }

    pub fn tail_l1(&self) -> f64 {
        self.tail_l1
    }

    pub fn noise_budget(&self) -> f64 {
        self.noise_budget
    }

    pub fn head_linf(&self) -> f64 {
        self.head_magnitudes[0]
    }

    pub fn head_l1(&self) -> f64 {
        self.head_magnitudes.iter().sum()
    }

    fn require_noiseless_zero_tail(&self, what: &str) -> Result<(), CertificateError> {
        if self.noise_budget > 0.0 || self.tail_l1 > 0.0 {
            return Err(CertificateError::NotApplicable(format!(
                "{what} assumes an exactly sparse noiseless signal (noise_budget = tail_l1 = 0)"
            )));
        }
        Ok(())
    }

    fn require_nothing_selected(&self, what: &str) -> Result<(), CertificateError> {
        if self.selected_prefix != 0 {
            return Err(CertificateError::InvalidParameters(format!(
                "{what} starts from an empty selection; selected_prefix must be 0"
            )));
        }
        Ok(())
    }
}

/// Outcome of one certificate check.
///
/// `binding_index` is set on failure: 0 when the coherence precondition broke,
/// otherwise the first 1-based head position whose inequality broke.
/// `mu_star`, when present, is the exact coherence budget: the certificate
/// passes iff `μ < mu_star`. `boundary` marks a comparison that failed by
/// exact equality (relative tolerance 1e-12) rather than a strict violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub binding_index: Option<usize>,
    pub mu_star: Option<f64>,
    pub boundary: bool,
}

impl Verdict {
    fn pass() -> Self {
        Verdict {
            pass: true,
            binding_index: None,
            mu_star: None,
            boundary: false,
        }
    }

    fn fail(binding_index: usize, boundary: bool) -> Self {
        Verdict {
            pass: false,
            binding_index: Some(binding_index),
            mu_star: None,
            boundary,
        }
    }

    fn with_mu_star(mut self, mu_star: f64) -> Self {
        self.mu_star = Some(mu_star);
        self
    }
}

/// Identifier for each certificate, used as the JSON report key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TheoremId {
    Uniform,
    UniformTermination,
    Thm1,
    Thm2,
    Thm3,
    Thm4,
    Donoho,
    Thm5,
    Lemma4Step,
}

impl TheoremId {
    pub const ALL: [TheoremId; 9] = [
        TheoremId::Uniform,
        TheoremId::UniformTermination,
        TheoremId::Thm1,
        TheoremId::Thm2,
        TheoremId::Thm3,
        TheoremId::Thm4,
        TheoremId::Donoho,
        TheoremId::Thm5,
        TheoremId::Lemma4Step,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::Uniform => "uniform",
            TheoremId::UniformTermination => "uniform_termination",
            TheoremId::Thm1 => "thm1",
            TheoremId::Thm2 => "thm2",
            TheoremId::Thm3 => "thm3",
            TheoremId::Thm4 => "thm4",
            TheoremId::Donoho => "donoho",
            TheoremId::Thm5 => "thm5",
            TheoremId::Lemma4Step => "lemma4_step",
        }
    }
}

impl std::fmt::Display for TheoremId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TheoremId {
    type Err = CertificateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized = s.trim().to_ascii_lowercase().replace('-', "_");
        TheoremId::ALL
            .into_iter()
            .find(|id| id.as_str() == normalized)
            .ok_or_else(|| {
                CertificateError::InvalidParameters(format!("unknown certificate id {s:?}"))
            })
    }
}

/// Side quantities a report may carry for inspection alongside the verdicts.
#[derive(Debug, Clone, Default)]
pub struct ReportQuantities {
    /// Peak-to-mass ratio ‖x‖∞/‖x‖₁ of the head.
    pub rho: Option<f64>,
    pub gamma_k: Option<f64>,
    /// Per-position coherence budgets from the ratio reformulation.
    pub mu_i_star: Option<Vec<f64>>,
    pub alpha_g: Option<Vec<f64>>,
    pub mu_g: Option<Vec<f64>>,
}

/// Collection of verdicts keyed by certificate id.
#[derive(Debug, Clone, Default)]
pub struct CertificateReport {
    pub verdicts: BTreeMap<TheoremId, Verdict>,
    pub quantities: ReportQuantities,
}

impl CertificateReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: TheoremId, verdict: Verdict) {
        self.verdicts.insert(id, verdict);
    }

    /// JSON object with one `{pass, binding_index, mu_star, boundary}` entry
    /// per certificate id.
    pub fn to_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for (id, v) in &self.verdicts {
            map.insert(
                id.as_str().to_string(),
                serde_json::json!({
                    "pass": v.pass,
                    "binding_index": v.binding_index,
                    "mu_star": v.mu_star,
                    "boundary": v.boundary,
                }),
            );
        }
        serde_json::Value::Object(map).to_string()
    }
}

/// Strict comparison `lhs > rhs` with boundary detection: returns
/// `(strictly_greater, boundary)` where `boundary` means the two sides agree
/// within relative tolerance [`tol::BOUNDARY`]. A boundary hit never counts
/// as strictly greater.
fn strictly_exceeds(lhs: f64, rhs: f64) -> (bool, bool) {
    let scale = lhs.abs().max(rhs.abs());
    let boundary = (lhs - rhs).abs() <= tol::BOUNDARY * scale;
    (lhs > rhs && !boundary, boundary)
}

/// Strict comparison `lhs < rhs` with the same boundary semantics.
fn strictly_below(lhs: f64, rhs: f64) -> (bool, bool) {
    let (gt, boundary) = strictly_exceeds(rhs, lhs);
    (gt, boundary)
}

fn check_mu(mu: f64) -> Result<(), CertificateError> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(CertificateError::InvalidParameters(format!(
            "coherence must be finite and non-negative, got {mu}"
        )));
    }
    Ok(())
}

fn check_positive_k(k: usize) -> Result<(), CertificateError> {
    if k == 0 {
        return Err(CertificateError::InvalidParameters(
            "sparsity k must be at least 1".to_string(),
        ));
    }
    Ok(())
}

/// Guaranteed correlation of a projected true atom with itself after `g`
/// correct selections on a coherence-μ dictionary. Equals 1 at `g = 0`.
pub fn alpha_g(g: usize, mu: f64, variant: Variant) -> Result<f64, CertificateError> {
    check_mu(mu)?;
    let g_f = g as f64;
    if g > 0 && g_f * mu >= 1.0 {
        return Err(CertificateError::CoherenceTooLarge {
            mu,
            limit: 1.0 / g_f,
        });
    }
    if g == 0 {
        return Ok(1.0);
    }
    let omp = (mu + 1.0) * (1.0 - g_f * mu) / (1.0 - (g_f - 1.0) * mu);
    Ok(match variant {
        Variant::Omp => omp,
        Variant::Ols => omp.sqrt(),
    })
}

/// Worst-case cross-correlation bound after `g` correct selections; the
/// capped form `min{1, μ/(1−gμ)·α_g}`. Equals μ at `g = 0`.
pub fn mu_g(g: usize, mu: f64, variant: Variant) -> Result<f64, CertificateError> {
    let alpha = alpha_g(g, mu, variant)?;
    let g_f = g as f64;
    let raw = mu / (1.0 - g_f * mu) * alpha;
    Ok(raw.min(1.0))
}

/// Noise amplification constant entering the noisy-decay certificate; equal
/// to `1/(α_{k−1} − μ_{k−1})`.
pub fn gamma_k(k: usize, mu: f64, variant: Variant) -> Result<f64, CertificateError> {
    check_positive_k(k)?;
    check_mu(mu)?;
    let k_f = k as f64;
    if k_f * mu >= 1.0 {
        return Err(CertificateError::CoherenceTooLarge {
            mu,
            limit: 1.0 / k_f,
        });
    }
    Ok(match variant {
        Variant::Omp => (1.0 - (k_f - 2.0) * mu) / ((mu + 1.0) * (1.0 - k_f * mu)),
        Variant::Ols => {
            ((1.0 - (k_f - 2.0) * mu) / (mu + 1.0)).sqrt() * (1.0 - (k_f - 1.0) * mu).sqrt()
                / (1.0 - k_f * mu)
        }
    })
}

/// Ratio threshold that consecutive sorted magnitudes must exceed:
/// `2μ(k−g−i)/(1−(g+i)μ)` for position `i ∈ {1..k−g}` (exactly 0 at the last
/// position). Strictly decreasing in `i` when `μ < 1/k`.
pub fn decay_factor(i: usize, k: usize, g: usize, mu: f64) -> Result<f64, CertificateError> {
    check_positive_k(k)?;
    check_mu(mu)?;
    if g >= k {
        return Err(CertificateError::InvalidParameters(format!(
            "selected prefix g = {g} must be smaller than k = {k}"
        )));
    }
    if i < 1 || i > k - g {
        return Err(CertificateError::InvalidIndex {
            index: i,
            max: k - g,
        });
    }
    let (i_f, k_f, g_f) = (i as f64, k as f64, g as f64);
    if (g_f + i_f) * mu >= 1.0 {
        return Err(CertificateError::CoherenceTooLarge {
            mu,
            limit: 1.0 / (g_f + i_f),
        });
    }
    Ok(2.0 * mu * (k_f - g_f - i_f) / (1.0 - (g_f + i_f) * mu))
}

/// Value-independent guarantee: every k-sparse vector is recovered in k steps
/// when `μ < 1/(2k−1)`.
pub fn certify_uniform(k: usize, mu: f64) -> Result<Verdict, CertificateError> {
    check_positive_k(k)?;
    check_mu(mu)?;
    let budget = 1.0 / (2.0 * k as f64 - 1.0);
    let (pass, boundary) = strictly_below(mu, budget);
    Ok(if pass {
        Verdict::pass().with_mu_star(budget)
    } else {
        Verdict::fail(0, boundary).with_mu_star(budget)
    })
}

/// Value-independent termination guarantee: after `g` correct selections the
/// remaining `k−g` steps succeed when `μ < 1/(2k−g−1)`.
pub fn certify_uniform_termination(
    k: usize,
    g: usize,
    mu: f64,
) -> Result<Verdict, CertificateError> {
    check_positive_k(k)?;
    check_mu(mu)?;
    if g >= k {
        return Err(CertificateError::InvalidParameters(format!(
            "selected prefix g = {g} must be smaller than k = {k}"
        )));
    }
    let budget = 1.0 / (2.0 * k as f64 - g as f64 - 1.0);
    let (pass, boundary) = strictly_below(mu, budget);
    Ok(if pass {
        Verdict::pass().with_mu_star(budget)
    } else {
        Verdict::fail(0, boundary).with_mu_star(budget)
    })
}

/// Peak-ratio guarantee for exactly sparse noiseless signals: recovery holds
/// for `μ < μ* = min(ρ/(2−ρ), 1/(2k−2))` with `ρ = ‖x‖∞/‖x‖₁`. Requires
/// `k ≥ 2` (at k = 1 the uniform budget is already 1).
pub fn certify_theorem1(
    profile: &SignalProfile,
    mu: f64,
) -> Result<(Verdict, f64), CertificateError> {
    check_mu(mu)?;
    profile.require_nothing_selected("the peak-ratio certificate")?;
    profile.require_noiseless_zero_tail("the peak-ratio certificate")?;
    let k = profile.k();
    if k < 2 {
        return Err(CertificateError::InvalidParameters(
            "the peak-ratio certificate needs k >= 2".to_string(),
        ));
    }
    let rho = profile.head_linf() / profile.head_l1();
    let mu_star = (rho / (2.0 - rho)).min(1.0 / (2.0 * k as f64 - 2.0));
    let (pass, boundary) = strictly_below(mu, mu_star);
    let verdict = if pass {
        Verdict::pass().with_mu_star(mu_star)
    } else {
        Verdict::fail(0, boundary).with_mu_star(mu_star)
    };
    Ok((verdict, mu_star))
}

/// Result of the decay certificate: the verdict plus the per-position
/// coherence budgets and their overall minimum.
#[derive(Debug, Clone)]
pub struct Theorem2Certificate {
    pub verdict: Verdict,
    /// Budget at each position i ∈ {1..k−1}: `r_i/(2(k−i)+i·r_i)` with
    /// `r_i = |x_i|/|x_{i+1}|`.
    pub mu_i_star: Vec<f64>,
    /// `min(1/k, μ_1*, …, μ_{k−1}*)`; the certificate passes iff μ is
    /// strictly below this.
    pub mu_star: f64,
}

/// Decay guarantee for exactly sparse noiseless signals: recovery in k steps
/// when `μ < 1/k` and every consecutive ratio beats its decay factor.
pub fn certify_theorem2(
    profile: &SignalProfile,
    mu: f64,
) -> Result<Theorem2Certificate, CertificateError> {
    check_mu(mu)?;
    profile.require_nothing_selected("the decay certificate")?;
    profile.require_noiseless_zero_tail("the decay certificate")?;
    let head = profile.head();
    let k = profile.k();
    let k_f = k as f64;

    let mut mu_i_star = Vec::with_capacity(k.saturating_sub(1));
    for i in 1..k {
        let r_i = head[i - 1] / head[i];
        let i_f = i as f64;
        mu_i_star.push(r_i / (2.0 * (k_f - i_f) + i_f * r_i));
    }
    let mu_star = mu_i_star.iter().copied().fold(1.0 / k_f, f64::min);

    let (mu_ok, mu_boundary) = strictly_below(mu, 1.0 / k_f);
    if !mu_ok {
        return Ok(Theorem2Certificate {
            verdict: Verdict::fail(0, mu_boundary).with_mu_star(mu_star),
            mu_i_star,
            mu_star,
        });
    }
    for i in 1..k {
        let factor = decay_factor(i, k, 0, mu)?;
        let (ok, boundary) = strictly_exceeds(head[i - 1], factor * head[i]);
        if !ok {
            return Ok(Theorem2Certificate {
                verdict: Verdict::fail(i, boundary).with_mu_star(mu_star),
                mu_i_star,
                mu_star,
            });
        }
    }
    Ok(Theorem2Certificate {
        verdict: Verdict::pass().with_mu_star(mu_star),
        mu_i_star,
        mu_star,
    })
}

/// Which coherence regime a partial-recovery check ran in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayBranch {
    /// `μ < 1/k`: per-position decay factors.
    PerIndex,
    /// `1/k ≤ μ < 1/(g+r)`: one constant factor `2μ(k−g−r)/(1−(g+r)μ)`.
    Constant,
}

/// Partial-recovery guarantee: after `g` correct selections, the next `p`
/// selections stay in the true support (with `r` a lookahead horizon,
/// `p ≤ r ≤ k−g`). The profile's head lists the `k−g` unselected magnitudes.
pub fn certify_theorem3(
    profile: &SignalProfile,
    p: usize,
    r: usize,
    mu: f64,
) -> Result<(Verdict, Option<DecayBranch>), CertificateError> {
    check_mu(mu)?;
    profile.require_noiseless_zero_tail("the partial-recovery certificate")?;
    let g = profile.selected_prefix();
    let k = profile.k();
    let remaining = k - g;
    if p < 1 || p > r || r > remaining {
        return Err(CertificateError::InvalidParameters(format!(
            "need 1 <= p <= r <= k−g, got p = {p}, r = {r}, k−g = {remaining}"
        )));
    }
    let head = profile.head();
    let k_f = k as f64;
    let (g_f, r_f) = (g as f64, r as f64);

    let (below_inv_k, _) = strictly_below(mu, 1.0 / k_f);
    if below_inv_k {
        // Per-position factors; the factor at i = k−g is exactly zero, so the
        // (nonexistent) magnitude beyond the head never enters.
        for i in 1..=p {
            let rhs = if i == remaining {
                0.0
            } else {
                decay_factor(i, k, g, mu)? * head[i]
            };
            let (ok, boundary) = strictly_exceeds(head[i - 1], rhs);
            if !ok {
                return Ok((Verdict::fail(i, boundary), Some(DecayBranch::PerIndex)));
            }
        }
        return Ok((Verdict::pass(), Some(DecayBranch::PerIndex)));
    }

    let upper = 1.0 / (g_f + r_f);
    let (below_upper, upper_boundary) = strictly_below(mu, upper);
    if !below_upper {
        // Neither regime admits this coherence (note 1/(g+r) = 1/k when
        // r = k−g, leaving the constant branch empty).
        return Ok((Verdict::fail(0, upper_boundary), None));
    }
    // Constant branch needs g+r < k, so i ranges strictly inside the head and
    // head[i] below is always present.
    let factor = 2.0 * mu * (k_f - g_f - r_f) / (1.0 - (g_f + r_f) * mu);
    for i in 1..=p {
        let (ok, boundary) = strictly_exceeds(head[i - 1], factor * head[i]);
        if !ok {
            return Ok((Verdict::fail(i, boundary), Some(DecayBranch::Constant)));
        }
    }
    Ok((Verdict::pass(), Some(DecayBranch::Constant)))
}

/// Noise- and tail-robust support guarantee under the uniform coherence
/// budget: `μ < 1/(2k−1)` and every head magnitude clears
/// `2(tail + ε)/(1−(2k−i)μ)`.
pub fn certify_theorem4(profile: &SignalProfile, mu: f64) -> Result<Verdict, CertificateError> {
    check_mu(mu)?;
    profile.require_nothing_selected("the robust uniform-budget certificate")?;
    let k = profile.k();
    let k_f = k as f64;
    let (mu_ok, mu_boundary) = strictly_below(mu, 1.0 / (2.0 * k_f - 1.0));
    if !mu_ok {
        return Ok(Verdict::fail(0, mu_boundary));
    }
    let disturbance = 2.0 * (profile.tail_l1() + profile.noise_budget());
    for (idx, &magnitude) in profile.head().iter().enumerate() {
        let i_f = (idx + 1) as f64;
        let threshold = disturbance / (1.0 - (2.0 * k_f - i_f) * mu);
        let (ok, boundary) = strictly_exceeds(magnitude, threshold);
        if !ok {
            return Ok(Verdict::fail(idx + 1, boundary));
        }
    }
    Ok(Verdict::pass())
}

/// Classical flat noisy baseline: `μ < 1/(2k−1)` and the *smallest* head
/// magnitude above `2ε/(1−(2k−1)μ)`. The tail-aware certificate above passes
/// whenever this one does.
pub fn certify_donoho_baseline(
    profile: &SignalProfile,
    mu: f64,
) -> Result<Verdict, CertificateError> {
    check_mu(mu)?;
    profile.require_nothing_selected("the flat noisy baseline")?;
    if profile.tail_l1() > 0.0 {
        return Err(CertificateError::NotApplicable(
            "the flat noisy baseline assumes an exactly sparse signal (tail_l1 = 0)".to_string(),
        ));
    }
    let k = profile.k();
    let k_f = k as f64;
    let (mu_ok, mu_boundary) = strictly_below(mu, 1.0 / (2.0 * k_f - 1.0));
    if !mu_ok {
        return Ok(Verdict::fail(0, mu_boundary));
    }
    let threshold = 2.0 * profile.noise_budget() / (1.0 - (2.0 * k_f - 1.0) * mu);
    let smallest = *profile.head().last().expect("head is non-empty");
    let (ok, boundary) = strictly_exceeds(smallest, threshold);
    Ok(if ok {
        Verdict::pass()
    } else {
        Verdict::fail(k, boundary)
    })
}

/// Noise- and tail-robust decay guarantee: `μ < 1/k` and every position obeys
/// `|x_i| > factor_i·|x_{i+1}| + 2γ_k(ε + tail)`, the last factor being 0.
pub fn certify_theorem5(
    profile: &SignalProfile,
    mu: f64,
    variant: Variant,
) -> Result<Verdict, CertificateError> {
    check_mu(mu)?;
    profile.require_nothing_selected("the robust decay certificate")?;
    let k = profile.k();
    let k_f = k as f64;
    let (mu_ok, mu_boundary) = strictly_below(mu, 1.0 / k_f);
    if !mu_ok {
        return Ok(Verdict::fail(0, mu_boundary));
    }
    let gamma = gamma_k(k, mu, variant)?;
    let disturbance = 2.0 * gamma * (profile.noise_budget() + profile.tail_l1());
    let head = profile.head();
    for i in 1..=k {
        let decay_term = if i == k {
            0.0
        } else {
            decay_factor(i, k, 0, mu)? * head[i]
        };
        let (ok, boundary) = strictly_exceeds(head[i - 1], decay_term + disturbance);
        if !ok {
            return Ok(Verdict::fail(i, boundary));
        }
    }
    Ok(Verdict::pass())
}

/// Single-step selection guarantee: with `g` atoms correctly selected and the
/// profile's head holding the remaining magnitudes, the next selection stays
/// in the true support when
/// `(α_g + μ_g)·‖x_rem‖∞ − 2μ_g·‖x_rem‖₁ > 2(ε + tail)`.
///
/// The profile's `selected_prefix` is not consulted; `g` is explicit so the
/// same remaining-head profile can be replayed at several depths.
pub fn check_lemma4_step(
    profile: &SignalProfile,
    g: usize,
    mu: f64,
    variant: Variant,
) -> Result<Verdict, CertificateError> {
    let alpha = alpha_g(g, mu, variant)?;
    let mu_gq = mu_g(g, mu, variant)?;
    let lhs = (alpha + mu_gq) * profile.head_linf() - 2.0 * mu_gq * profile.head_l1();
    let rhs = 2.0 * (profile.noise_budget() + profile.tail_l1());
    let (ok, boundary) = strictly_exceeds(lhs, rhs);
    Ok(if ok {
        Verdict::pass()
    } else {
        Verdict::fail(0, boundary)
    })
}
