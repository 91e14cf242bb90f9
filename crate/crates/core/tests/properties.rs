//! Randomized invariants for the metric, the birth-death ladder, the
//! defective generator, and the CDF layer.

use jsqps_core::closed_form::join_probabilities_birth_death;
use jsqps_core::sojourn::{assemble_cdf, build_defective_generator, w_matrix_exponential};
use jsqps_core::{
    empirical_cdf, make_time_grid, percentile, wasserstein, ArrivalRateProfile, CdfSource,
    JoinProbabilities, JoinSource, MethodId, RateSource, SojournCdf, TimeGrid,
};
use proptest::prelude::*;

const GRID_T_MAX: f64 = 12.0;
const GRID_DELTA: f64 = 0.2;

fn grid() -> TimeGrid {
    make_time_grid(GRID_T_MAX, GRID_DELTA).unwrap()
}

/// Random monotone CDF on [`grid`]: zero at the origin, capped at `scale`.
fn cdf_values() -> impl Strategy<Value = Vec<f64>> {
    let len = grid().len();
    (
        proptest::collection::vec(0.0f64..1.0, len - 1),
        0.05f64..1.0,
    )
        .prop_map(|(incs, scale)| {
            let total: f64 = incs.iter().sum();
            let norm = if total > 0.0 { scale / total } else { 0.0 };
            let mut values = Vec::with_capacity(incs.len() + 1);
            let mut acc = 0.0f64;
            values.push(0.0);
            for inc in incs {
                acc += inc * norm;
                values.push(acc.min(1.0));
            }
            values
        })
}

fn random_cdf() -> impl Strategy<Value = SojournCdf> {
    cdf_values().prop_map(|v| SojournCdf::new(grid(), v, CdfSource::Simulation).unwrap())
}

proptest! {
    #[test]
    fn wasserstein_is_symmetric(g in random_cdf(), h in random_cdf()) {
        let gh = wasserstein(&g, &h).unwrap();
        let hg = wasserstein(&h, &g).unwrap();
        prop_assert!((gh - hg).abs() <= 1e-15);
    }

    #[test]
    fn wasserstein_is_zero_exactly_on_equal_inputs(g in random_cdf(), h in random_cdf()) {
        prop_assert_eq!(wasserstein(&g, &g).unwrap(), 0.0);
        let w = wasserstein(&g, &h).unwrap();
        prop_assert!(w >= 0.0);
        if w == 0.0 {
            prop_assert_eq!(g.values(), h.values());
        }
    }

    #[test]
    fn wasserstein_satisfies_the_triangle_inequality(
        g in random_cdf(),
        h in random_cdf(),
        k in random_cdf(),
    ) {
        let direct = wasserstein(&g, &k).unwrap();
        let detour = wasserstein(&g, &h).unwrap() + wasserstein(&h, &k).unwrap();
        prop_assert!(direct <= detour + 1e-12);
    }

    #[test]
    fn wasserstein_of_a_grid_shift_is_the_shift(
        incs in proptest::collection::vec(0.0f64..1.0, 30),
        k in 1usize..=25,
    ) {
        // g saturates at exactly 1 from index 30 on; shifting all mass by
        // k grid steps moves the distribution by exactly k * delta.
        let total: f64 = incs.iter().sum();
        prop_assume!(total > 0.0);
        let g = grid();
        let mut values = vec![0.0f64];
        let mut acc = 0.0;
        for inc in &incs {
            acc += inc;
            values.push((acc / total).min(1.0));
        }
        values.resize(g.len(), 1.0);
        let base = SojournCdf::new(g.clone(), values.clone(), CdfSource::Simulation).unwrap();
        let mut shifted = vec![0.0f64; k];
        shifted.extend_from_slice(&values[..g.len() - k]);
        let shifted = SojournCdf::new(g, shifted, CdfSource::Simulation).unwrap();
        let w = wasserstein(&base, &shifted).unwrap();
        prop_assert!(
            (w - k as f64 * GRID_DELTA).abs() <= 1e-9,
            "shift by {} gave distance {}",
            k as f64 * GRID_DELTA,
            w,
        );
    }

    #[test]
    fn birth_death_join_matches_direct_products(
        rates in proptest::collection::vec(0.0f64..3.0, 2..25),
        mu in 0.3f64..3.0,
    ) {
        let profile = ArrivalRateProfile::new(rates.clone(), RateSource::ClosedForm).unwrap();
        let join = join_probabilities_birth_death(&profile, mu).unwrap();

        let mut unnorm = vec![1.0f64];
        for &lam in &rates[..rates.len() - 1] {
            let prev = *unnorm.last().unwrap();
            unnorm.push(prev * lam / mu);
        }
        let total: f64 = unnorm.iter().sum();
        for (n, (&got, raw)) in join.probs().iter().zip(unnorm).enumerate() {
            prop_assert!(
                (got - raw / total).abs() < 1e-12,
                "A_{} = {} vs direct product {}",
                n,
                got,
                raw / total,
            );
        }
    }

    #[test]
    fn generator_rows_leak_the_departure_fraction(
        rates in proptest::collection::vec(0.0f64..4.0, 3..40),
        mu in 0.2f64..3.0,
    ) {
        let l2 = rates.len();
        let profile = ArrivalRateProfile::new(rates, RateSource::ClosedForm).unwrap();
        let gen = build_defective_generator(&profile, mu, l2).unwrap();
        for n in 0..l2 {
            prop_assert!(gen.sub()[n] >= 0.0);
            prop_assert!(gen.sup()[n] >= 0.0);
            prop_assert!(gen.diag()[n] < 0.0);
            // Interior rows lose exactly the service completions that end
            // the tagged sojourn: mu / (n + 1).
            if n + 1 < l2 {
                let defect = -(gen.sub()[n] + gen.diag()[n] + gen.sup()[n]);
                prop_assert!(
                    (defect - mu / (n + 1) as f64).abs() < 1e-12,
                    "row {} leaks {} instead of {}",
                    n,
                    defect,
                    mu / (n + 1) as f64,
                );
            }
        }
    }

    #[test]
    fn percentiles_are_first_strict_crossings_and_monotone(
        g in random_cdf(),
        f1 in 0.05f64..0.9,
        f2 in 0.05f64..0.9,
    ) {
        let max = g.max_attained();
        prop_assume!(max > 0.01);
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let (e1, e2) = (lo * max * 0.99, hi * max * 0.99);
        let t1 = percentile(&g, e1).unwrap();
        let t2 = percentile(&g, e2).unwrap();
        prop_assert!(t1 <= t2);
        let idx = (t1 / GRID_DELTA).round() as usize;
        prop_assert!(g.values()[idx] > e1);
        if idx > 0 {
            prop_assert!(g.values()[idx - 1] <= e1);
        }
    }

    #[test]
    fn empirical_cdf_counts_samples_at_or_below_each_point(
        samples in proptest::collection::vec(0.001f64..15.0, 1..300),
    ) {
        let g = grid();
        let cdf = empirical_cdf(&samples, &g).unwrap();
        let n = samples.len() as f64;
        for (i, t) in g.points().enumerate() {
            let count = samples.iter().filter(|&&s| s <= t).count();
            prop_assert_eq!(cdf.values()[i], count as f64 / n);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assembly_yields_a_valid_cdf_on_random_profiles(
        mut rates in proptest::collection::vec(0.0f64..2.5, 8),
        weights in proptest::collection::vec(0.01f64..1.0, 8),
        mu in 0.5f64..2.0,
    ) {
        // Mass leaving the top retained level counts as absorbed, so the
        // window must end where the arrival rates have died off; that is
        // the same condition under which the truncation itself is sound.
        rates[7] = 1e-9;
        let profile = ArrivalRateProfile::new(rates, RateSource::ClosedForm).unwrap();
        let gen = build_defective_generator(&profile, mu, 8).unwrap();
        let g = make_time_grid(20.0, 0.1).unwrap();
        let tails = w_matrix_exponential(&gen, &g).unwrap();
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let join = JoinProbabilities::new(probs, JoinSource::BirthDeath).unwrap();
        let cdf = assemble_cdf(&join, &tails, CdfSource::Method(MethodId::A)).unwrap();
        prop_assert_eq!(cdf.values()[0], 0.0);
        prop_assert!(cdf.mean().is_finite());
        prop_assert!(cdf.mean() >= 0.0);
    }
}
