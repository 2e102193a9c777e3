//! Log-normal, exponential and Pareto fits with Kolmogorov–Smirnov distances.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CoreError, Result};
use crate::stats::descriptive::sorted_copy;

/// A location farther than this multiple of the sample maximum marks a runaway fit.
pub const DEGENERATE_LOC_FACTOR: f64 = 1e3;

const MIN_FIT_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Lognormal,
    Exponential,
    Pareto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFit {
    pub kind: DistributionKind,
    /// `s` for the log-normal, the density exponent `b` for the Pareto, unused (0) for the exponential.
    pub shape: f64,
    pub loc: f64,
    pub scale: f64,
    /// Normalization `a` of the Pareto density a·x^(−b).
    pub pareto_constant: Option<f64>,
    pub ks_statistic: f64,
    pub n: usize,
    /// Why the fit should not be trusted, when the optimizer ran away.
    pub degenerate: Option<String>,
}

impl DistributionFit {
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            DistributionKind::Lognormal => {
                if x <= self.loc {
                    return 0.0;
                }
                let z = ((x - self.loc) / self.scale).ln() / self.shape;
                standard_normal().cdf(z)
            }
            DistributionKind::Exponential => {
                if x <= self.loc {
                    0.0
                } else {
                    1.0 - (-(x - self.loc) / self.scale).exp()
                }
            }
            DistributionKind::Pareto => {
                if x <= self.scale {
                    0.0
                } else {
                    1.0 - (self.scale / x).powf(self.shape - 1.0)
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self.kind {
            DistributionKind::Lognormal => {
                self.loc + self.scale * (self.shape * standard_normal().inverse_cdf(p)).exp()
            }
            DistributionKind::Exponential => self.loc - self.scale * (1.0 - p).ln(),
            DistributionKind::Pareto => self.scale * (1.0 - p).powf(-1.0 / (self.shape - 1.0)),
        }
    }

    /// Density exponent below two signals a heavy tail.
    pub fn is_heavy_tailed(&self) -> bool {
        self.kind == DistributionKind::Pareto && self.shape < 2.0
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Kolmogorov–Smirnov distance between the sample and a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(CoreError::EmptySample);
    }
    let sorted = sorted_copy(sample);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let i = i as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max);
    Ok(d.clamp(0.0, 1.0))
}

/// Closed-form (s, scale) MLE of ln((x − loc)/scale) ~ N(0, s²) for a fixed loc.
fn lognormal_given_loc(sample: &[f64], loc: f64) -> Option<(f64, f64, f64)> {
    let n = sample.len() as f64;
    let mut logs = Vec::with_capacity(sample.len());
    for &x in sample {
        let d = x - loc;
        if d <= 0.0 {
            return None;
        }
        logs.push(d.ln());
    }
    let mu = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n;
    let s = var.sqrt();
    if s == 0.0 {
        return None;
    }
    // Profile log-likelihood up to an additive constant.
    let loglik = -logs.iter().sum::<f64>() - n * s.ln();
    Some((s, mu.exp(), loglik))
}

/// Log-normal fit with the location held fixed.
pub fn fit_lognormal_fixed_loc(sample: &[f64], loc: f64) -> Result<DistributionFit> {
    if sample.len() < MIN_FIT_SIZE {
        return Err(CoreError::InsufficientData {
            needed: MIN_FIT_SIZE,
            got: sample.len(),
        });
    }
    let (s, scale, _) = lognormal_given_loc(sample, loc)
        .ok_or_else(|| CoreError::DegenerateFit("sample not strictly above the location".into()))?;
    finish_lognormal(sample, s, loc, scale, None)
}

fn finish_lognormal(
    sample: &[f64],
    s: f64,
    loc: f64,
    scale: f64,
    degenerate: Option<String>,
) -> Result<DistributionFit> {
    let mut fit = DistributionFit {
        kind: DistributionKind::Lognormal,
        shape: s,
        loc,
        scale,
        pareto_constant: None,
        ks_statistic: 0.0,
        n: sample.len(),
        degenerate,
    };
    fit.ks_statistic = ks_statistic(sample, |x| fit.cdf(x))?;
    Ok(fit)
}

/// Three-parameter log-normal fit.
///
/// The location is chosen by profile likelihood: a log-spaced grid of offsets
/// below the sample minimum is scanned and the best bracket refined by
/// golden-section search. If the likelihood keeps rising as the location moves
/// away, the window is widened; a location beyond
/// [`DEGENERATE_LOC_FACTOR`]·max(sample) is reported as degenerate.
pub fn fit_lognormal(sample: &[f64]) -> Result<DistributionFit> {
    if sample.len() < MIN_FIT_SIZE {
        return Err(CoreError::InsufficientData {
            needed: MIN_FIT_SIZE,
            got: sample.len(),
        });
    }
    let sorted = sorted_copy(sample);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let range = max - min;
    if range <= 0.0 {
        return Err(CoreError::DegenerateFit("constant sample".into()));
    }
    let max_magnitude = DEGENERATE_LOC_FACTOR * max.abs().max(range);
    let profile = |t: f64| {
        let loc = min - range * 10f64.powf(t);
        lognormal_given_loc(&sorted, loc).map_or(f64::NEG_INFINITY, |r| r.2)
    };

    // Offsets range over 10^t·range with t from −9 up to `upper`.
    const LOWER_T: f64 = -9.0;
    const STEPS: usize = 180;
    let mut upper = 0.0;
    let mut widened_past_limit = false;
    let (best_t, step) = loop {
        let step = (upper - LOWER_T) / STEPS as f64;
        let (best_i, _) = (0..=STEPS)
            .map(|i| (i, profile(LOWER_T + step * i as f64)))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
        if best_i < STEPS {
            break (LOWER_T + step * best_i as f64, step);
        }
        if min.abs() + range * 10f64.powf(upper) > max_magnitude * 1e3 {
            widened_past_limit = true;
            break (upper, step);
        }
        upper += 1.0;
    };

    let t = if widened_past_limit {
        best_t
    } else {
        golden_section_max(&profile, best_t - step, best_t + step, 1e-10)
    };
    let loc = min - range * 10f64.powf(t);
    let (s, scale, _) = lognormal_given_loc(&sorted, loc)
        .ok_or_else(|| CoreError::DegenerateFit("no admissible location".into()))?;
    let degenerate = (loc.abs() > max_magnitude || widened_past_limit)
        .then(|| format!("location {loc:.4} diverged; the log-normal collapses toward a normal"));
    finish_lognormal(sample, s, loc, scale, degenerate)
}

fn golden_section_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Shifted exponential MLE: loc = min, scale = mean − min.
pub fn fit_exponential(sample: &[f64]) -> Result<DistributionFit> {
    if sample.len() < 2 {
        return Err(CoreError::InsufficientData {
            needed: 2,
            got: sample.len(),
        });
    }
    let loc = sample.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = sample.iter().sum::<f64>() / sample.len() as f64;
    let scale = mean - loc;
    if !(scale > 0.0) {
        return Err(CoreError::DegenerateFit("zero exponential scale".into()));
    }
    let mut fit = DistributionFit {
        kind: DistributionKind::Exponential,
        shape: 0.0,
        loc,
        scale,
        pareto_constant: None,
        ks_statistic: 0.0,
        n: sample.len(),
        degenerate: None,
    };
    fit.ks_statistic = ks_statistic(sample, |x| fit.cdf(x))?;
    Ok(fit)
}

/// Power-law fit of the density a·x^(−b) above x_min = min(sample).
///
/// The tail index comes from the Hill estimator, α = n / Σ ln(xᵢ/x_min), and
/// the density exponent is b = α + 1 with a = α·x_min^α.
pub fn fit_pareto(sample: &[f64]) -> Result<DistributionFit> {
    if sample.len() < MIN_FIT_SIZE {
        return Err(CoreError::InsufficientData {
            needed: MIN_FIT_SIZE,
            got: sample.len(),
        });
    }
    let x_min = sample.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(x_min > 0.0) {
        return Err(CoreError::DegenerateFit(
            "Pareto fit needs strictly positive values".into(),
        ));
    }
    let log_spread: f64 = sample.iter().map(|x| (x / x_min).ln()).sum();
    if log_spread <= 0.0 {
        return Err(CoreError::DegenerateFit(
            "zero log-spread: exponent is unbounded".into(),
        ));
    }
    let alpha = sample.len() as f64 / log_spread;
    let mut fit = DistributionFit {
        kind: DistributionKind::Pareto,
        shape: alpha + 1.0,
        loc: 0.0,
        scale: x_min,
        pareto_constant: Some(alpha * x_min.powf(alpha)),
        ks_statistic: 0.0,
        n: sample.len(),
        degenerate: None,
    };
    fit.ks_statistic = ks_statistic(sample, |x| fit.cdf(x))?;
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub ecdf: f64,
    pub fitted_cdf: f64,
    pub qq_theoretical: f64,
}

/// One row per sorted observation for CDF and QQ plots.
pub fn emit_distribution_plotdata(sample: &[f64], fit: &DistributionFit) -> Result<Vec<PlotRow>> {
    if sample.is_empty() {
        return Err(CoreError::EmptySample);
    }
    let sorted = sorted_copy(sample);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| PlotRow {
            x,
            ecdf: (i as f64 + 1.0) / n,
            fitted_cdf: fit.cdf(x),
            qq_theoretical: fit.quantile((i as f64 + 0.5) / n),
        })
        .collect())
}
