//! Invariants that must hold for arbitrary inputs.

use ce_core::efa::{adequacy, varimax, CorrelationMatrix};
use ce_core::lifespan::{partition_lifespan_quartiles, quartile_index};
use ce_core::model::{normalize_per_month, ActiveLifespan};
use ce_core::regress::{log_transform, ols_fit, Design, ZeroPolicy};
use ce_core::stats::{
    average_ranks, bootstrap_rho_literal, cliffs_delta, descriptive_stats, mann_whitney_u,
    median_split, quantile, spearman_rho,
};
use nalgebra::DMatrix;
use proptest::collection::vec;
use proptest::prelude::*;

/// Small integer-valued samples so ties are frequent.
fn tied_sample(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    vec((0i32..12).prop_map(f64::from), 1..=max_len)
}

fn brute_force_delta(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0i64;
    for x in a {
        for y in b {
            sum += match x.partial_cmp(y).unwrap() {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => 0,
            };
        }
    }
    sum as f64 / (a.len() * b.len()) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn cliffs_delta_matches_brute_force_and_u(a in tied_sample(50), b in tied_sample(50)) {
        let delta = cliffs_delta(&a, &b).unwrap();
        prop_assert!((delta - brute_force_delta(&a, &b)).abs() < 1e-12);
        let (u, p) = mann_whitney_u(&a, &b).unwrap();
        let nm = (a.len() * b.len()) as f64;
        prop_assert!((0.0..=nm).contains(&u));
        prop_assert!((delta - (2.0 * u / nm - 1.0)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn cliffs_delta_is_antisymmetric(a in tied_sample(30), b in tied_sample(30)) {
        let ab = cliffs_delta(&a, &b).unwrap();
        prop_assert!((ab + cliffs_delta(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(ab.abs() <= 1.0);
        prop_assert_eq!(cliffs_delta(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn mann_whitney_p_is_symmetric(a in tied_sample(20), b in tied_sample(20)) {
        let (u_ab, p_ab) = mann_whitney_u(&a, &b).unwrap();
        let (u_ba, p_ba) = mann_whitney_u(&b, &a).unwrap();
        prop_assert!((u_ab + u_ba - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!((p_ab - p_ba).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn average_ranks_sum_to_triangular_number(x in tied_sample(60)) {
        let n = x.len() as f64;
        let total: f64 = average_ranks(&x).iter().sum();
        prop_assert!((total - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn spearman_is_invariant_under_monotone_maps(
        pairs in vec((-50.0f64..50.0, -50.0f64..50.0), 3..80)
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let Ok(base) = spearman_rho(&x, &y) else { return Ok(()); };
        let x2: Vec<f64> = x.iter().map(|v| v.powi(3) + 4.0 * v).collect();
        let y2: Vec<f64> = y.iter().map(|v| (v / 10.0).exp()).collect();
        let mapped = spearman_rho(&x2, &y2).unwrap();
        prop_assert!((base.rho - mapped.rho).abs() < 1e-12);
        let reversed: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!((spearman_rho(&x, &reversed).unwrap().rho + base.rho).abs() < 1e-12);
        prop_assert!(base.rho.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn median_split_partitions_every_row(scores in vec(-5.0f64..5.0, 2..100)) {
        let split = median_split(&scores).unwrap();
        prop_assert_eq!(split.low.len() + split.high.len(), scores.len());
        prop_assert!(split.low.iter().all(|&i| scores[i] <= split.cutpoint));
        prop_assert!(split.high.iter().all(|&i| scores[i] > split.cutpoint));
    }

    #[test]
    fn quantiles_are_monotone_and_bounded(x in vec(-1e3f64..1e3, 1..60), q1 in 0.0f64..1.0, q2 in 0.0f64..1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let s = descriptive_stats(&x).unwrap();
        let (a, b) = (quantile(&x, lo).unwrap(), quantile(&x, hi).unwrap());
        prop_assert!(a <= b);
        prop_assert!(s.min <= a && b <= s.max);
        prop_assert!(s.p25 <= s.median && s.median <= s.p75);
    }

    #[test]
    fn standard_deviation_ignores_shifts(x in vec(-1e3f64..1e3, 2..60), shift in -1e4f64..1e4) {
        let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let (a, b) = (descriptive_stats(&x).unwrap(), descriptive_stats(&shifted).unwrap());
        prop_assert!((a.std_dev - b.std_dev).abs() < 1e-7 * (1.0 + a.std_dev));
        prop_assert!((a.mean + shift - b.mean).abs() < 1e-7 * (1.0 + shift.abs()));
    }

    #[test]
    fn per_month_rates_are_linear_in_counts(count in 0u64..1_000_000, days in 1u64..20_000) {
        let lifespan = ActiveLifespan::from_days(days).unwrap();
        let rate = normalize_per_month(count, &lifespan).unwrap();
        prop_assert!((rate - count as f64 * 30.44 / days as f64).abs() <= 1e-9 * (1.0 + rate));
    }

    #[test]
    fn varimax_preserves_communalities(
        values in vec(-0.9f64..0.9, 6 * 3),
        k in 2usize..=3,
    ) {
        let p = 6;
        let loadings = DMatrix::from_fn(p, k, |i, j| values[i * 3 + j]);
        let rotated = varimax(&loadings);
        for i in 0..p {
            let before: f64 = loadings.row(i).iter().map(|v| v * v).sum();
            let after: f64 = rotated.row(i).iter().map(|v| v * v).sum();
            prop_assert!((before - after).abs() < 1e-9, "row {i}: {before} vs {after}");
        }
        let before_total: f64 = loadings.iter().map(|v| v * v).sum();
        let after_total: f64 = rotated.iter().map(|v| v * v).sum();
        prop_assert!((before_total - after_total).abs() < 1e-9);
    }

    #[test]
    fn kmo_of_equicorrelated_matrix_has_closed_form(p in 3usize..9, r in 0.05f64..0.85) {
        let values = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { r });
        let labels = (1..=p).map(|i| format!("A{i}")).collect();
        let report = adequacy(&CorrelationMatrix::new(labels, values).unwrap(), 500).unwrap();
        let partial = r / (1.0 + (p as f64 - 2.0) * r);
        let expected = r * r / (r * r + partial * partial);
        prop_assert!((report.overall_kmo.unwrap() - expected).abs() < 1e-9);
        for attribute in &report.attributes {
            prop_assert!((attribute.msa.unwrap() - expected).abs() < 1e-9);
        }
        prop_assert_eq!(report.bartlett_df, p * (p - 1) / 2);
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_the_design(
        rows in vec((-10.0f64..10.0, -10.0f64..10.0, -50.0f64..50.0), 8..60)
    ) {
        let x1: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let x2: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let design = Design::with_intercept(&[("x1", &x1), ("x2", &x2)]).unwrap();
        let Ok(fit) = ols_fit(&design, &y) else { return Ok(()); };
        for j in 0..design.matrix.ncols() {
            let dot: f64 = design.matrix.column(j).iter().zip(&fit.residuals).map(|(a, e)| a * e).sum();
            prop_assert!(dot.abs() < 1e-8, "column {j}: {dot}");
        }
        prop_assert!((0.0..=1.0 + 1e-12).contains(&fit.r_squared));
    }

    #[test]
    fn offset_log_transform_is_order_preserving(values in vec(0u32..1000, 2..50)) {
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let Ok(t) = log_transform(&values, ZeroPolicy::Offset) else { return Ok(()); };
        prop_assert_eq!(t.offset.is_some(), values.contains(&0.0));
        for (i, j) in [(0, 1), (1, 0)] {
            if values[i] < values[j] {
                prop_assert!(t.values[i] < t.values[j]);
            }
        }
        prop_assert!(t.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lifespan_quartiles_cover_every_record(days in vec(1u64..6000, 8..200)) {
        let partition = partition_lifespan_quartiles(&days).unwrap();
        prop_assert_eq!(partition.len(), days.len());
        let [c1, c2, c3] = partition.cutpoints;
        prop_assert!(c1 <= c2 && c2 <= c3);
        for (q, group) in partition.groups.iter().enumerate() {
            for &i in group {
                prop_assert_eq!(quartile_index(days[i] as f64, &partition.cutpoints), q);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bootstrap_is_a_pure_function_of_its_seed(
        pairs in vec((0.0f64..100.0, 0.0f64..100.0), 10..40),
        seed in any::<u64>(),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = bootstrap_rho_literal(&x, &y, 200, seed).unwrap();
        let b = bootstrap_rho_literal(&x, &y, 200, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.seed, seed);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }
}
