//! Property-based invariants: projection geometry, solver/selection
//! equivalences, certificate algebra, and scale/monotonicity laws.

use greedcert_core::certificates::{
    alpha_g, certify_theorem2, certify_theorem4, certify_theorem5, certify_donoho_baseline,
    certify_uniform, check_lemma4_step, decay_factor, gamma_k, mu_g, SignalProfile,
};
use greedcert_core::experiments::satisfies_decay;
use greedcert_core::solvers::ols_residual_bruteforce;
use greedcert_core::{
    run_oxx, select_next, tol, welch_bound, Dictionary, RunTrace, SolverConfig, Variant,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn build_dictionary(m: usize, n: usize, vals: &[f64]) -> Dictionary {
    let mut raw = DMatrix::from_fn(m, n, |i, j| vals[j * m + i]);
    for j in 0..n {
        // Guarantee nonzero columns and generic geometry.
        raw[(j % m, j)] += 2.0;
    }
    Dictionary::normalize_columns(raw).expect("columns are nonzero by construction")
}

fn dict_strategy() -> impl Strategy<Value = Dictionary> {
    (4usize..8, 1usize..6).prop_flat_map(|(m, extra)| {
        let n = m + extra;
        prop::collection::vec(-1.0..1.0f64, m * n)
            .prop_map(move |vals| build_dictionary(m, n, &vals))
    })
}

fn sorted_head(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05..10.0f64, 1..=max_len).prop_map(|mut v| {
        v.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        v
    })
}

/// Head built to pass the noise-aware decay certificate with explicit
/// multiplicative margins, mirroring nothing in the library (direct formula
/// evaluation).
fn certified_noisy_head(
    k: usize,
    mu: f64,
    eps: f64,
    tail: f64,
    variant: Variant,
    margins: &[f64],
) -> Vec<f64> {
    let gamma = gamma_k(k, mu, variant).expect("mu < 1/k");
    let disturbance = 2.0 * gamma * (eps + tail);
    let mut head = vec![0.0; k];
    head[k - 1] = disturbance.max(0.25) * (1.0 + margins[k - 1]);
    for i in (1..k).rev() {
        let factor = decay_factor(i, k, 0, mu).expect("valid position");
        head[i - 1] = (factor * head[i] + disturbance).max(head[i]) * (1.0 + margins[i - 1]);
    }
    head
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn projection_is_idempotent_orthogonal_and_contractive(
        d in dict_strategy(),
        raw_active in prop::collection::vec(0usize..64, 0..4),
        raw_v in prop::collection::vec(-2.0..2.0f64, 16),
    ) {
        let mut active: Vec<usize> = raw_active.iter().map(|a| a % d.n()).collect();
        active.sort_unstable();
        active.dedup();
        let v = DVector::from_fn(d.m(), |i, _| raw_v[i % raw_v.len()] + (i as f64) * 0.01);
        let projected = match d.project_complement(&active, &v) {
            Ok(p) => p,
            Err(_) => return Ok(()), // rank-deficient draw: nothing to check
        };
        // Contraction.
        prop_assert!(projected.norm() <= v.norm() * (1.0 + 1e-12));
        // Orthogonality to every active atom.
        for &q in &active {
            prop_assert!(d.atom(q).dot(&projected).abs() <= 1e-9 * v.norm().max(1.0));
        }
        // Idempotence.
        let twice = d.project_complement(&active, &projected).unwrap();
        prop_assert!((&twice - &projected).norm() <= 1e-9 * v.norm().max(1.0));
    }

    #[test]
    fn first_selection_agrees_between_variants(
        d in dict_strategy(),
        raw_v in prop::collection::vec(-2.0..2.0f64, 16),
    ) {
        let y = DVector::from_fn(d.m(), |i, _| raw_v[i % raw_v.len()] + 0.37);
        let mut state = d.projected_atoms(&[]).unwrap();
        state.attach_residual(&y).unwrap();
        let omp = select_next(&state, Variant::Omp, tol::DEFAULT_TIE).unwrap();
        let ols = select_next(&state, Variant::Ols, tol::DEFAULT_TIE).unwrap();
        for (i, s) in &omp.scores {
            prop_assert!((s - ols.scores[i]).abs() <= 1e-12 * s.max(1.0));
        }
        // With a clear gap between the two best scores the choices coincide.
        let mut ranked: Vec<f64> = omp.scores.values().copied().collect();
        ranked.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if ranked.len() >= 2 && ranked[0] - ranked[1] > 1e-9 {
            prop_assert_eq!(omp.selected, ols.selected);
        }
    }

    #[test]
    fn ols_steps_minimize_the_bruteforce_residual(
        d in dict_strategy(),
        raw_v in prop::collection::vec(-2.0..2.0f64, 16),
        k in 1usize..4,
    ) {
        let y = DVector::from_fn(d.m(), |i, _| raw_v[i % raw_v.len()] + 0.19);
        let steps = k.min(d.m() - 1);
        let trace = run_oxx(&d, &y, &SolverConfig::new(Variant::Ols, steps)).unwrap();
        let mut active: Vec<usize> = Vec::new();
        for step in &trace.steps {
            let chosen = ols_residual_bruteforce(&d, &active, step.selected, &y).unwrap();
            for i in 0..d.n() {
                if active.contains(&i) || i == step.selected {
                    continue;
                }
                let other = ols_residual_bruteforce(&d, &active, i, &y).unwrap();
                prop_assert!(
                    chosen <= other + 1e-9,
                    "step {}: atom {} beats selected {} ({} < {})",
                    step.iteration, i, step.selected, other, chosen
                );
            }
            active.push(step.selected);
        }
    }

    #[test]
    fn atom_permutation_maps_tie_free_selections(
        d in dict_strategy(),
        raw_v in prop::collection::vec(-2.0..2.0f64, 16),
        rotation in 1usize..7,
    ) {
        let n = d.n();
        // Deterministic permutation: rotate atom order by `rotation`.
        let perm: Vec<usize> = (0..n).map(|j| (j + rotation) % n).collect();
        let mut inverse = vec![0usize; n];
        for (new_pos, &old) in perm.iter().enumerate() {
            inverse[old] = new_pos;
        }
        let permuted_raw = DMatrix::from_fn(d.m(), n, |i, j| d.atoms()[(i, perm[j])]);
        let permuted = Dictionary::normalize_columns(permuted_raw).unwrap();

        let y = DVector::from_fn(d.m(), |i, _| raw_v[i % raw_v.len()] + 0.11);
        let config = SolverConfig::new(Variant::Omp, 2.min(d.m()));
        let a = run_oxx(&d, &y, &config).unwrap();
        let b = run_oxx(&permuted, &y, &config).unwrap();
        let tie_free = a.steps.iter().chain(b.steps.iter()).all(|s| s.tie_set.len() == 1);
        if tie_free {
            prop_assert_eq!(a.steps.len(), b.steps.len());
            for (sa, sb) in a.steps.iter().zip(b.steps.iter()) {
                prop_assert_eq!(inverse[sa.selected], sb.selected);
            }
        }
    }

    #[test]
    fn trace_json_round_trips(
        d in dict_strategy(),
        raw_v in prop::collection::vec(-2.0..2.0f64, 16),
    ) {
        let y = DVector::from_fn(d.m(), |i, _| raw_v[i % raw_v.len()] - 0.23);
        let trace = run_oxx(&d, &y, &SolverConfig::new(Variant::Ols, 2)).unwrap();
        let parsed = RunTrace::from_json(&trace.to_json()).unwrap();
        prop_assert_eq!(parsed.variant, trace.variant);
        prop_assert_eq!(parsed.steps, trace.steps);
        prop_assert_eq!(parsed.final_active_set, trace.final_active_set);
        prop_assert_eq!(parsed.stop_reason, trace.stop_reason);
    }

    #[test]
    fn dictionary_coherence_respects_the_welch_floor(d in dict_strategy()) {
        let floor = welch_bound(d.m(), d.n()).unwrap();
        prop_assert!(d.mutual_coherence() >= floor - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn gamma_matches_the_step_constant_identity(
        k in 1usize..11,
        fraction in 0.02..0.95f64,
        ols in proptest::bool::ANY,
    ) {
        let variant = if ols { Variant::Ols } else { Variant::Omp };
        let mu = fraction / k as f64;
        let gamma = gamma_k(k, mu, variant).unwrap();
        let alpha = alpha_g(k - 1, mu, variant).unwrap();
        let mu_last = mu_g(k - 1, mu, variant).unwrap();
        let identity = 1.0 / (alpha - mu_last);
        prop_assert!((gamma - identity).abs() <= 1e-12 * gamma.abs().max(1.0));
    }

    #[test]
    fn alpha_strictly_exceeds_mu_g_inside_the_admissible_range(
        g in 0usize..9,
        fraction in 0.01..0.99f64,
        ols in proptest::bool::ANY,
    ) {
        let variant = if ols { Variant::Ols } else { Variant::Omp };
        let mu = fraction / (g as f64 + 1.0);
        let alpha = alpha_g(g, mu, variant).unwrap();
        let mu_gv = mu_g(g, mu, variant).unwrap();
        prop_assert!(alpha > mu_gv, "alpha {alpha} <= mu_g {mu_gv} at g = {g}, mu = {mu}");
        prop_assert!(mu_gv <= 1.0);
    }

    #[test]
    fn decay_verdicts_are_scale_invariant(
        head in sorted_head(7),
        fraction in 0.05..1.4f64,
        scale_log in -4.0..4.0f64,
    ) {
        let k = head.len();
        let mu = fraction / k as f64;
        let scale = 10.0f64.powf(scale_log);
        let scaled: Vec<f64> = head.iter().map(|x| x * scale).collect();
        let a = certify_theorem2(&SignalProfile::exact_sparse(head).unwrap(), mu).unwrap();
        let b = certify_theorem2(&SignalProfile::exact_sparse(scaled).unwrap(), mu).unwrap();
        prop_assert_eq!(a.verdict.pass, b.verdict.pass);
        prop_assert_eq!(a.verdict.binding_index, b.verdict.binding_index);
        prop_assert!((a.mu_star - b.mu_star).abs() <= 1e-12 * a.mu_star.max(1e-12));
    }

    #[test]
    fn noisy_verdicts_are_scale_invariant(
        head in sorted_head(6),
        fraction in 0.05..1.4f64,
        eps in 0.0..0.5f64,
        tail in 0.0..0.5f64,
        scale_log in -3.0..3.0f64,
        ols in proptest::bool::ANY,
    ) {
        let variant = if ols { Variant::Ols } else { Variant::Omp };
        let k = head.len();
        let mu = fraction / (2.0 * k as f64 - 1.0);
        let scale = 10.0f64.powf(scale_log);
        let scaled: Vec<f64> = head.iter().map(|x| x * scale).collect();
        let p = SignalProfile::new(head, tail, eps, 0).unwrap();
        let q = SignalProfile::new(scaled, tail * scale, eps * scale, 0).unwrap();
        let a4 = certify_theorem4(&p, mu).unwrap();
        let b4 = certify_theorem4(&q, mu).unwrap();
        prop_assert_eq!(a4.pass, b4.pass);
        prop_assert_eq!(a4.binding_index, b4.binding_index);
        let a5 = certify_theorem5(&p, mu, variant).unwrap();
        let b5 = certify_theorem5(&q, mu, variant).unwrap();
        prop_assert_eq!(a5.pass, b5.pass);
        prop_assert_eq!(a5.binding_index, b5.binding_index);
    }

    #[test]
    fn decay_pass_is_monotone_in_mu(
        head in sorted_head(7),
        fraction in 0.05..0.999f64,
        shrink in 0.05..0.95f64,
    ) {
        let k = head.len();
        let mu = fraction / k as f64;
        let profile = SignalProfile::exact_sparse(head).unwrap();
        if certify_theorem2(&profile, mu).unwrap().verdict.pass {
            let smaller = mu * shrink;
            prop_assert!(certify_theorem2(&profile, smaller).unwrap().verdict.pass);
        }
    }

    #[test]
    fn decay_budget_matches_bisection(head in sorted_head(6)) {
        let profile = SignalProfile::exact_sparse(head).unwrap();
        let reported = certify_theorem2(&profile, 1e-6).unwrap().mu_star;
        let pass_at = |mu: f64| certify_theorem2(&profile, mu).unwrap().verdict.pass;
        prop_assert!(pass_at(1e-9));
        prop_assert!(!pass_at(1.0));
        let (mut lo, mut hi) = (1e-9, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if pass_at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        prop_assert!(
            (hi - reported).abs() <= 1e-12,
            "bisection {hi} vs reported budget {reported}"
        );
    }

    #[test]
    fn noise_aware_verdict_collapses_to_the_noiseless_one(
        head in sorted_head(7),
        fraction in 0.05..1.4f64,
        ols in proptest::bool::ANY,
    ) {
        let variant = if ols { Variant::Ols } else { Variant::Omp };
        let k = head.len();
        let mu = fraction / k as f64;
        let profile = SignalProfile::exact_sparse(head).unwrap();
        let noiseless = certify_theorem2(&profile, mu).unwrap().verdict;
        let noisy = certify_theorem5(&profile, mu, variant).unwrap();
        prop_assert_eq!(noiseless.pass, noisy.pass);
        prop_assert_eq!(noiseless.binding_index, noisy.binding_index);
    }

    #[test]
    fn relaxed_uniform_certificate_dominates_the_baseline(
        head in sorted_head(6),
        fraction in 0.05..1.4f64,
        eps in 0.0..0.4f64,
    ) {
        let k = head.len();
        let mu = fraction / (2.0 * k as f64 - 1.0);
        let profile = SignalProfile::new(head, 0.0, eps, 0).unwrap();
        let baseline = certify_donoho_baseline(&profile, mu).unwrap();
        let relaxed = certify_theorem4(&profile, mu).unwrap();
        if baseline.pass {
            prop_assert!(relaxed.pass, "baseline passed but the per-index bound failed");
        }
    }

    #[test]
    fn uniform_pass_implies_decay_pass_for_any_sorted_profile(
        head in sorted_head(7),
        fraction in 0.05..2.0f64,
    ) {
        let k = head.len();
        let mu = fraction / (2.0 * k as f64);
        let profile = SignalProfile::exact_sparse(head).unwrap();
        if certify_uniform(k, mu).unwrap().pass {
            prop_assert!(certify_theorem2(&profile, mu).unwrap().verdict.pass);
        }
    }

    #[test]
    fn noise_aware_decay_implies_every_step_condition(
        k in 2usize..7,
        fraction in 0.05..0.9f64,
        eps in 0.0..0.3f64,
        tail in 0.0..0.3f64,
        margins in prop::collection::vec(0.05..1.0f64, 7),
        ols in proptest::bool::ANY,
    ) {
        let variant = if ols { Variant::Ols } else { Variant::Omp };
        let mu = fraction / k as f64;
        let head = certified_noisy_head(k, mu, eps, tail, variant, &margins);
        let profile = SignalProfile::new(head.clone(), tail, eps, 0).unwrap();
        prop_assert!(certify_theorem5(&profile, mu, variant).unwrap().pass);
        for g in 0..k {
            let suffix = SignalProfile::new(head[g..].to_vec(), tail, eps, 0).unwrap();
            let step = check_lemma4_step(&suffix, g, mu, variant).unwrap();
            prop_assert!(step.pass, "step condition failed at depth {g} (k = {k}, mu = {mu})");
        }
    }

    #[test]
    fn decay_factor_decreases_strictly_and_vanishes_at_the_end(
        k in 1usize..13,
        g_seed in 0usize..13,
        fraction in 0.02..0.999f64,
    ) {
        let g = g_seed % k;
        let mu = fraction / k as f64;
        let span = k - g;
        let factors: Vec<f64> = (1..=span)
            .map(|i| decay_factor(i, k, g, mu).unwrap())
            .collect();
        prop_assert_eq!(factors[span - 1], 0.0);
        for w in factors.windows(2) {
            prop_assert!(w[0] > w[1], "factors must strictly decrease: {:?}", factors);
        }
    }

    #[test]
    fn decay_satisfaction_is_monotone_per_realization(
        head in sorted_head(7),
        fraction in 0.05..1.0f64,
        shrink in 0.05..0.95f64,
    ) {
        let k = head.len();
        let mu = fraction / k as f64;
        if satisfies_decay(&head, mu).unwrap() {
            prop_assert!(satisfies_decay(&head, mu * shrink).unwrap());
        }
    }
}
