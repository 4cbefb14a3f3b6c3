use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::connector::draw_scores;
use crate::core::{stream_rng, SimulatorProfile};

fn features(l: f64, r: f64, tau: f64) -> MeanFeatures {
    MeanFeatures { l, r, tau }
}

fn theta(alpha: f64, beta: f64, lambda: f64) -> EthicalWeightVector {
    EthicalWeightVector { alpha, beta, lambda }
}

#[test]
fn eci_examples() {
    assert!((eci(&[0.4, 0.4, 0.4]).unwrap() - 0.4).abs() < 1e-12);
    assert!((eci(&[0.6, 0.8]).unwrap() - 0.7).abs() < 1e-12);
    assert!(matches!(eci(&[]), Err(MetaError::EmptyCycle)));
}

#[test]
fn eci_recovers_simulator_mean() {
    let profile = SimulatorProfile::default();
    let mut rng = stream_rng(21, &["meta", "eci"]);
    let es: Vec<f64> = (0..500)
        .map(|_| {
            let shared: f64 = StandardNormal.sample(&mut rng);
            draw_scores(&profile, shared, &mut rng).0
        })
        .collect();
    let mean = eci(&es).unwrap();
    assert!((mean - 0.793).abs() < 0.01, "eci = {mean}");
}

fn scored(entries: &[(&str, MoralDomain, f64)]) -> BTreeMap<String, (MoralDomain, f64)> {
    entries.iter().map(|&(id, d, c)| (id.to_string(), (d, c))).collect()
}

#[test]
fn divergence_examples() {
    use MoralDomain::*;
    let a = scored(&[("p1", Fairness, 0.8), ("p2", Privacy, 0.9)]);
    let same = moral_divergence(&a, &a).unwrap();
    assert_eq!(same.d_moral, 0.0);
    assert_eq!(same.unpaired, 0);

    let b = scored(&[("p1", Fairness, 0.7), ("p2", Privacy, 0.8)]);
    let ab = moral_divergence(&a, &b).unwrap();
    assert!((ab.d_moral - 0.1).abs() < 1e-12);
    assert!((ab.per_domain[&Fairness] - 0.1).abs() < 1e-12);
    assert!((ab.per_domain[&Privacy] - 0.1).abs() < 1e-12);

    let ba = moral_divergence(&b, &a).unwrap();
    assert_eq!(ab.d_moral, ba.d_moral);
}

#[test]
fn divergence_counts_unpaired_and_restricts_domains() {
    use MoralDomain::*;
    let a = scored(&[("p1", Fairness, 0.9), ("p2", Coercion, 0.5), ("p3", Fairness, 0.6)]);
    let b = scored(&[("p1", Fairness, 0.4), ("p4", Coercion, 0.5)]);
    let d = moral_divergence(&a, &b).unwrap();
    assert!((d.d_moral - 0.5).abs() < 1e-12);
    assert_eq!(d.unpaired, 3);
    assert_eq!(d.per_domain.len(), 1);
    assert!((d.per_domain[&Fairness] - 0.5).abs() < 1e-12);

    let disjoint = scored(&[("q1", Privacy, 0.5)]);
    assert!(matches!(moral_divergence(&a, &disjoint), Err(MetaError::NoPairs)));
}

#[test]
fn temporal_stability_examples() {
    assert_eq!(temporal_stability(&[0.7, 0.7, 0.7, 0.7]).unwrap(), 1.0);
    assert!((temporal_stability(&[0.5, 0.7, 0.5]).unwrap() - 0.8).abs() < 1e-12);
    assert!(temporal_stability(&[0.0, 1.0, 0.0, 1.0, 0.0]).unwrap().abs() < 1e-12);
    assert!(matches!(temporal_stability(&[0.5]), Err(MetaError::SeriesTooShort(1))));
}

#[test]
fn msi_examples() {
    assert!((msi(0.81, 0.083) - 0.748).abs() < 5e-4);
    assert!((msi(0.79, 0.067) - 0.740).abs() < 5e-4);
    assert_eq!(msi(0.63, 0.0), 0.63);
}

#[test]
fn coherence_ratio_examples() {
    assert!((coherence_ratio(0.067) - 0.933).abs() < 1e-12);
    assert!((coherence_ratio(0.072) - 0.928).abs() < 1e-12);
    assert_eq!(coherence_ratio(0.0), 1.0);
}

#[test]
fn utility_examples() {
    let th = theta(0.3, 0.35, 0.35);
    assert!((utility(features(1.0, 1.0, 0.0), &th) - 0.65).abs() < 1e-12);
    assert!((utility(features(0.0, 0.0, 1.0), &th) + 0.35).abs() < 1e-12);
    assert_eq!(utility(features(0.0, 0.0, 0.0), &theta(0.6, 0.3, 0.1)), 0.0);
}

#[test]
fn utility_is_linear_over_records() {
    let th = theta(0.42, 0.33, 0.25);
    let mut rng = stream_rng(7, &["meta", "lin"]);
    let recs: Vec<MeanFeatures> = (0..50)
        .map(|_| features(rng.gen(), rng.gen(), rng.gen()))
        .collect();
    let per_record = recs.iter().map(|f| utility(*f, &th)).sum::<f64>() / recs.len() as f64;
    let n = recs.len() as f64;
    let mean = features(
        recs.iter().map(|f| f.l).sum::<f64>() / n,
        recs.iter().map(|f| f.r).sum::<f64>() / n,
        recs.iter().map(|f| f.tau).sum::<f64>() / n,
    );
    assert!((per_record - utility(mean, &th)).abs() < 1e-12);
}

#[test]
fn update_theta_zero_gradient_is_identity() {
    let th = theta(0.4, 0.35, 0.25);
    let out = update_theta(&th, features(0.0, 0.0, 0.0), 0.01, 0.05, false);
    assert!((out.alpha - th.alpha).abs() < 1e-12);
    assert!((out.beta - th.beta).abs() < 1e-12);
    assert!((out.lambda - th.lambda).abs() < 1e-12);
}

#[test]
fn update_theta_uniform_features_rebalance() {
    let third = 1.0 / 3.0;
    let th = theta(third, third, third);
    let out = update_theta(&th, features(1.0, 1.0, 1.0), 0.01, 0.05, false);
    out.validate().unwrap();
    // raw step (+0.01, +0.01, -0.01); projection pulls the excess mass back
    // equally, leaving alpha = beta above 1/3 and lambda reduced
    assert!((out.alpha - out.beta).abs() < 1e-12);
    assert!(out.alpha > third);
    assert!(out.lambda < third);
}

#[test]
fn update_theta_descent_flag_flips_the_step() {
    let th = theta(0.4, 0.35, 0.25);
    let f = features(0.3, 0.2, 0.4);
    let ascent = update_theta(&th, f, 0.01, 0.05, false);
    let descent = update_theta(&th, f, 0.01, 0.05, true);
    // no clamp or floor binds here, so the interior projection is linear and
    // the two steps mirror each other around theta
    assert!((ascent.alpha - th.alpha + (descent.alpha - th.alpha)).abs() < 1e-12);
    assert!((ascent.lambda - th.lambda + (descent.lambda - th.lambda)).abs() < 1e-12);
}

#[test]
fn update_theta_is_scale_consistent_in_the_interior() {
    let th = theta(0.4, 0.35, 0.25);
    let f = features(0.1, 0.2, 0.1);
    let small = update_theta(&th, f, 1e-3, 0.05, false);
    let double = update_theta(&th, f, 2e-3, 0.05, false);
    // interior projection onto the sum-1 plane is affine, so doubling eta
    // doubles the realized displacement
    assert!(((double.alpha - th.alpha) - 2.0 * (small.alpha - th.alpha)).abs() < 1e-12);
    assert!(((double.beta - th.beta) - 2.0 * (small.beta - th.beta)).abs() < 1e-12);
    assert!(((double.lambda - th.lambda) - 2.0 * (small.lambda - th.lambda)).abs() < 1e-12);
}

#[test]
fn projection_matches_grid_search_oracle() {
    let mut rng = stream_rng(13, &["meta", "proj"]);
    for _ in 0..20 {
        let th = theta(0.4, 0.35, 0.25);
        let f = features(rng.gen(), rng.gen(), rng.gen());
        let eta = rng.gen_range(0.0..0.5);
        let out = update_theta(&th, f, eta, 0.05, rng.gen());
        out.validate().unwrap();

        // the pre-projection point the update moved to
        let sign = 1.0; // oracle re-derives both signs below
        let _ = sign;
        // replicate the moved point for both signs and keep the one whose
        // projection the update returned
        for literal in [false, true] {
            let s = if literal { -1.0 } else { 1.0 };
            let moved = [
                th.alpha + (s * eta * f.l).clamp(-0.05, 0.05),
                th.beta + (s * eta * f.r).clamp(-0.05, 0.05),
                th.lambda + (s * eta * -f.tau).clamp(-0.05, 0.05),
            ];
            let candidate = update_theta(&th, f, eta, 0.05, literal);
            let got = [candidate.alpha, candidate.beta, candidate.lambda];
            let dist =
                |x: [f64; 3]| (0..3).map(|i| (x[i] - moved[i]).powi(2)).sum::<f64>();
            let got_dist = dist(got);
            // exhaustive grid over the feasible triangle
            let mut best = f64::INFINITY;
            let step = 1e-3;
            let mut a = 0.05;
            while a <= 0.9 + 1e-12 {
                let mut b = 0.05;
                while b <= 0.95 - a + 1e-12 {
                    let lam = 1.0 - a - b;
                    if lam >= 0.05 - 1e-12 {
                        best = best.min(dist([a, b, lam]));
                    }
                    b += step;
                }
                a += step;
            }
            assert!(
                got_dist <= best + 1e-6,
                "projection distance {got_dist} worse than grid {best}"
            );
        }
    }
}

#[test]
fn convergence_examples() {
    let flat = [0.5, 0.5, 0.5, 0.5, 0.5];
    assert_eq!(check_convergence(&flat, &flat, 1e-3), ConvergenceStatus::Converged);

    let alternating = [0.5, 0.6, 0.5, 0.6, 0.5];
    assert_eq!(
        check_convergence(&alternating, &flat, 1e-3),
        ConvergenceStatus::Running
    );

    // J deltas {0.01, 0.0005, 0.0004, 0.0003} on a linearly drifting ECI:
    // converged exactly at the cycle where the third small delta lands
    let j = [0.60, 0.61, 0.6105, 0.6109, 0.6112];
    let e = [0.70, 0.71, 0.72, 0.73, 0.74];
    assert_eq!(check_convergence(&j[..4], &e[..4], 1e-3), ConvergenceStatus::Running);
    assert_eq!(check_convergence(&j, &e, 1e-3), ConvergenceStatus::Converged);

    // short series never converge
    assert_eq!(check_convergence(&j[..3], &e[..3], 1e-3), ConvergenceStatus::Running);
    assert_eq!(check_convergence(&[], &[], 1e-3), ConvergenceStatus::Running);
}

#[test]
fn convergence_requires_the_second_difference_too() {
    let j = [0.5, 0.5, 0.5, 0.5, 0.5];
    let curving = [0.1, 0.2, 0.4, 0.8, 0.2];
    assert_eq!(check_convergence(&j, &curving, 1e-3), ConvergenceStatus::Running);
}

#[test]
fn cycle_summary_round_trips() {
    use MoralDomain::*;
    let summary = CycleSummary {
        cycle: 3,
        eci: BTreeMap::from([("m1".into(), 0.79), ("m2".into(), 0.81)]),
        mean_features: BTreeMap::from([("m1".into(), features(0.7, 0.8, 0.15))]),
        j: 0.61,
        theta: theta(0.475, 0.475, 0.05),
        d_moral: 0.02,
        per_domain_divergence: BTreeMap::from([(Fairness, 0.01), (Privacy, 0.03)]),
        category_counts: BTreeMap::from([
            (crate::core::SafetyCategory::Safe, 400),
            (crate::core::SafetyCategory::Borderline, 550),
            (crate::core::SafetyCategory::Unsafe, 50),
        ]),
    };
    let json = serde_json::to_string(&summary).unwrap();
    let back: CycleSummary = serde_json::from_str(&json).unwrap();
    assert_eq!(summary, back);
}

proptest! {
    #[test]
    fn update_theta_always_lands_on_the_floored_simplex(
        a in 0.05f64..0.9, b in 0.05f64..0.9,
        l in 0.0f64..1.0, r in 0.0f64..1.0, tau in 0.0f64..1.0,
        eta in 0.0f64..0.2, literal in proptest::bool::ANY,
    ) {
        prop_assume!(a + b <= 0.95);
        let th = theta(a, b, 1.0 - a - b);
        let out = update_theta(&th, features(l, r, tau), eta, 0.05, literal);
        prop_assert!(out.validate().is_ok(), "invalid theta {out:?}");
    }
}
