//! Mann–Whitney U test and Cliff's delta.
//!
//! U for sample `a` counts the pairs (a_i, b_j) with a_i > b_j plus half the
//! tied pairs, so δ = 2U/(n_a·n_b) − 1 holds exactly.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CoreError, Result};
use crate::stats::rank::average_ranks;

/// Largest pooled size for which the exact permutation distribution is enumerated.
pub const EXACT_MAX_POOLED: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupComparisonResult {
    pub u_statistic: f64,
    pub p_value: f64,
    pub cliffs_delta: f64,
    pub n_a: usize,
    pub n_b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PValueMethod {
    Exact,
    NormalApproximation,
}

/// Win/tie/loss pair counts of `a` against `b`, by sorting `b` once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dominance {
    pub greater: u64,
    pub less: u64,
    pub ties: u64,
}

pub fn dominance(a: &[f64], b: &[f64]) -> Dominance {
    let mut sorted = b.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut d = Dominance {
        greater: 0,
        less: 0,
        ties: 0,
    };
    for &x in a {
        let below = sorted.partition_point(|&v| v < x);
        let at_or_below = sorted.partition_point(|&v| v <= x);
        d.greater += below as u64;
        d.ties += (at_or_below - below) as u64;
        d.less += (sorted.len() - at_or_below) as u64;
    }
    d
}

fn check_nonempty(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::EmptySample);
    }
    Ok(())
}

pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64> {
    check_nonempty(a, b)?;
    let d = dominance(a, b);
    Ok((d.greater as f64 - d.less as f64) / (a.len() as f64 * b.len() as f64))
}

pub fn u_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    check_nonempty(a, b)?;
    let d = dominance(a, b);
    Ok(d.greater as f64 + 0.5 * d.ties as f64)
}

/// Two-sided Mann–Whitney test: exact enumeration when the pooled sample has at
/// most [`EXACT_MAX_POOLED`] observations, otherwise the continuity-corrected
/// normal approximation with tie-corrected variance.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let u = u_statistic(a, b)?;
    let p = if a.len() + b.len() <= EXACT_MAX_POOLED {
        exact_p_value(a, b, u)
    } else {
        normal_p_value(a, b, u)
    };
    Ok((u, p))
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: PValueMethod) -> Result<(f64, f64)> {
    let u = u_statistic(a, b)?;
    let p = match method {
        PValueMethod::Exact => {
            if a.len() + b.len() > 24 {
                return Err(CoreError::InvalidArgument(
                    "exact enumeration limited to 24 pooled observations".into(),
                ));
            }
            exact_p_value(a, b, u)
        }
        PValueMethod::NormalApproximation => normal_p_value(a, b, u),
    };
    Ok((u, p))
}

fn pooled_ranks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    average_ranks(&pooled)
}

fn normal_p_value(a: &[f64], b: &[f64], u: f64) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j] == pooled[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let variance = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return 1.0;
    }
    let mean = na * nb / 2.0;
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}

/// Permutation p-value: fraction of all ways to assign the pooled midranks to
/// group `a` whose U is at least as far from its mean as the observed U.
fn exact_p_value(a: &[f64], b: &[f64], u_obs: f64) -> f64 {
    let ranks = pooled_ranks(a, b);
    let n = ranks.len();
    let k = a.len();
    let mean = k as f64 * b.len() as f64 / 2.0;
    let offset = k as f64 * (k as f64 + 1.0) / 2.0;
    let threshold = (u_obs - mean).abs() - 1e-9;

    let mut total = 0u64;
    let mut extreme = 0u64;
    let mut chosen: Vec<usize> = (0..k).collect();
    loop {
        let rank_sum: f64 = chosen.iter().map(|&i| ranks[i]).sum();
        total += 1;
        if (rank_sum - offset - mean).abs() >= threshold {
            extreme += 1;
        }
        // Advance to the next k-combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return extreme as f64 / total as f64;
            }
            i -= 1;
            if chosen[i] < n - k + i {
                break;
            }
        }
        chosen[i] += 1;
        for j in i + 1..k {
            chosen[j] = chosen[j - 1] + 1;
        }
    }
}

pub fn compare_two_groups(a: &[f64], b: &[f64]) -> Result<GroupComparisonResult> {
    check_nonempty(a, b)?;
    let d = dominance(a, b);
    let pairs = a.len() as f64 * b.len() as f64;
    let u = d.greater as f64 + 0.5 * d.ties as f64;
    let p_value = if a.len() + b.len() <= EXACT_MAX_POOLED {
        exact_p_value(a, b, u)
    } else {
        normal_p_value(a, b, u)
    };
    Ok(GroupComparisonResult {
        u_statistic: u,
        p_value,
        cliffs_delta: (d.greater as f64 - d.less as f64) / pairs,
        n_a: a.len(),
        n_b: b.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn brute_delta(a: &[f64], b: &[f64]) -> f64 {
        let mut score = 0.0;
        for x in a {
            for y in b {
                score += if x > y {
                    1.0
                } else if x < y {
                    -1.0
                } else {
                    0.0
                };
            }
        }
        score / (a.len() * b.len()) as f64
    }

    #[test]
    fn u_examples() {
        let (u, p) = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(u, 0.0);
        assert_relative_eq!(p, 1.0 / 3.0, epsilon = 1e-12);

        let (u, _) = mann_whitney_u(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(u, 4.5);
        assert_eq!(
            cliffs_delta(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );

        // scipy.stats.mannwhitneyu(method="exact")
        let (u, p) = mann_whitney_u(&[1.0, 2.0, 3.0, 5.0, 6.0], &[4.0, 7.0, 8.0, 9.0]).unwrap();
        assert_eq!(u, 2.0);
        assert_relative_eq!(p, 0.06349206349206349, epsilon = 1e-12);
    }

    #[test]
    fn normal_approximation_matches_reference() {
        // scipy.stats.mannwhitneyu(method="asymptotic", use_continuity=True)
        let a = [1.5, 2.0, 2.0, 3.0, 7.0, 8.0, 9.0, 9.5, 10.0, 11.0];
        let b = [0.5, 2.0, 3.0, 3.0, 4.0, 4.5, 5.0, 6.0, 6.5, 12.0, 13.0];
        let (u, p) = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(u, 61.0);
        assert_relative_eq!(p, 0.6977879395870252, epsilon = 1e-9);
    }

    #[test]
    fn delta_examples() {
        assert_eq!(cliffs_delta(&[10.0, 20.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(cliffs_delta(&[1.0, 2.0], &[1.0, 3.0]).unwrap(), -0.25);
        assert_eq!(cliffs_delta(&[], &[1.0]), Err(CoreError::EmptySample));
        assert_eq!(mann_whitney_u(&[1.0], &[]), Err(CoreError::EmptySample));
    }

    #[test]
    fn all_tied_is_not_significant() {
        let r = compare_two_groups(&[2.0; 12], &[2.0; 10]).unwrap();
        assert_eq!(r.cliffs_delta, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    fn small_sample() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec((0u8..12).prop_map(f64::from), 1..50)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn delta_properties(a in small_sample(), b in small_sample()) {
            let delta = cliffs_delta(&a, &b).unwrap();
            prop_assert!((delta - brute_delta(&a, &b)).abs() < 1e-12);
            prop_assert!((delta + cliffs_delta(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(cliffs_delta(&a, &a).unwrap().abs() < 1e-12);
            prop_assert!(delta.abs() <= 1.0);
            let r = compare_two_groups(&a, &b).unwrap();
            let pairs = (a.len() * b.len()) as f64;
            prop_assert!(r.u_statistic >= 0.0 && r.u_statistic <= pairs);
            prop_assert!((r.cliffs_delta - (2.0 * r.u_statistic / pairs - 1.0)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn exact_p_value_is_a_probability(a in proptest::collection::vec(0u8..6, 1..7), b in proptest::collection::vec(0u8..6, 1..7)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let (_, p) = mann_whitney_u_with(&a, &b, PValueMethod::Exact).unwrap();
            prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
        }
    }
}
