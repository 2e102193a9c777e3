//! Bootstrap z-tests on Spearman correlations.
//!
//! Two resampling schemes are provided:
//!
//! * [`BootstrapMode::Literal`] draws `x` and `y` independently with
//!   replacement, records ρᵢ − ρ₀ and standardizes ρ₀ by the spread of those
//!   differences.
//! * [`BootstrapMode::PairedDifference`] resamples (x, y) rows jointly inside
//!   each of two groups and standardizes the observed difference of the group
//!   correlations by the spread of the resampled differences.
//!
//! Iteration `i` always draws from stream `i` of the seeded generator, so the
//! result is identical for any thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CoreError, Result};
use crate::rng::{substream, RNG_ALGORITHM};
use crate::stats::descriptive::{quantile_sorted, sorted_copy};
use crate::stats::rank::{spearman_rho, RankIndex};

pub const MIN_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMode {
    Literal,
    PairedDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub mode: BootstrapMode,
    /// ρ₀ in literal mode, ρ_high − ρ_low in paired-difference mode.
    pub observed: f64,
    pub z: f64,
    pub p_value: f64,
    pub iterations: usize,
    pub se_bootstrap: f64,
    /// Mean and median of the recorded per-iteration statistic (Δρᵢ or the resampled difference).
    pub mean_statistic: f64,
    pub median_statistic: f64,
    /// Resamples whose ranks were constant; they carry no correlation and are skipped.
    pub skipped_resamples: usize,
    pub seed: u64,
    pub rng: String,
}

/// A pair of equally long vectors drawn from the same observations.
#[derive(Debug, Clone, Copy)]
pub struct PairedSample<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
}

fn check_iterations(iterations: usize) -> Result<()> {
    if iterations < MIN_ITERATIONS {
        return Err(CoreError::InsufficientIterations {
            min: MIN_ITERATIONS,
            got: iterations,
        });
    }
    Ok(())
}

fn two_sided_p(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * (1.0 - normal.cdf(z.abs()))
}

fn summarize(
    mode: BootstrapMode,
    observed: f64,
    draws: Vec<Option<f64>>,
    seed: u64,
) -> Result<BootstrapResult> {
    let iterations = draws.len();
    let values: Vec<f64> = draws.into_iter().flatten().collect();
    let skipped_resamples = iterations - values.len();
    if values.len() < 2 {
        return Err(CoreError::DegenerateInput(
            "every bootstrap resample was constant".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    // Population standard deviation of the recorded statistics.
    let se = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if se == 0.0 {
        return Err(CoreError::DegenerateInput(
            "bootstrap standard error is zero".into(),
        ));
    }
    let z = observed / se;
    Ok(BootstrapResult {
        mode,
        observed,
        z,
        p_value: two_sided_p(z),
        iterations,
        se_bootstrap: se,
        mean_statistic: mean,
        median_statistic: quantile_sorted(&sorted_copy(&values), 0.5),
        skipped_resamples,
        seed,
        rng: RNG_ALGORITHM.to_string(),
    })
}

fn weighted_pearson(x: &[f64], y: &[f64], weights: &[u32]) -> Option<f64> {
    let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let c = f64::from(weights[i]);
        w += c;
        sx += c * x[i];
        sy += c * y[i];
    }
    let (mx, my) = (sx / w, sy / w);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        if weights[i] == 0 {
            continue;
        }
        let c = f64::from(weights[i]);
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += c * dx * dy;
        sxx += c * dx * dx;
        syy += c * dy * dy;
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn positional_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let ones = vec![1u32; x.len()];
    weighted_pearson(x, y, &ones)
}

/// Literal mode: independent resampling of `x` and `y`.
pub fn bootstrap_rho_literal(
    x: &[f64],
    y: &[f64],
    iterations: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    check_iterations(iterations)?;
    let rho0 = spearman_rho(x, y)?.rho;
    let n = x.len();
    let x_index = RankIndex::new(x);
    let y_index = RankIndex::new(y);

    let draws: Vec<Option<f64>> = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let xi: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let yi: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let rank_draws = |index: &RankIndex, draws: &[usize]| {
                let mut counts = vec![0u32; n];
                for &d in draws {
                    counts[d] += 1;
                }
                let mut ranks = vec![0.0; n];
                index.resample_ranks(&counts, &mut ranks);
                draws.iter().map(|&d| ranks[d]).collect::<Vec<f64>>()
            };
            let rx = rank_draws(&x_index, &xi);
            let ry = rank_draws(&y_index, &yi);
            positional_pearson(&rx, &ry).map(|rho| rho - rho0)
        })
        .collect();
    summarize(BootstrapMode::Literal, rho0, draws, seed)
}

struct GroupResampler<'a> {
    sample: PairedSample<'a>,
    x_index: RankIndex,
    y_index: RankIndex,
}

impl<'a> GroupResampler<'a> {
    fn new(sample: PairedSample<'a>) -> Self {
        Self {
            sample,
            x_index: RankIndex::new(sample.x),
            y_index: RankIndex::new(sample.y),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Option<f64> {
        let n = self.sample.x.len();
        let mut counts = vec![0u32; n];
        for _ in 0..n {
            counts[rng.gen_range(0..n)] += 1;
        }
        let mut rx = vec![0.0; n];
        let mut ry = vec![0.0; n];
        self.x_index.resample_ranks(&counts, &mut rx);
        self.y_index.resample_ranks(&counts, &mut ry);
        weighted_pearson(&rx, &ry, &counts)
    }
}

/// Paired-difference mode: tests ρ(high) − ρ(low) with joint row resampling in each group.
pub fn bootstrap_rho_difference(
    high: PairedSample<'_>,
    low: PairedSample<'_>,
    iterations: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    check_iterations(iterations)?;
    let observed = spearman_rho(high.x, high.y)?.rho - spearman_rho(low.x, low.y)?.rho;
    let high_resampler = GroupResampler::new(high);
    let low_resampler = GroupResampler::new(low);
    let draws: Vec<Option<f64>> = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let h = high_resampler.draw(&mut rng)?;
            let l = low_resampler.draw(&mut rng)?;
            Some(h - l)
        })
        .collect();
    summarize(BootstrapMode::PairedDifference, observed, draws, seed)
}
