use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::extract::{fit_efa, FactorModel, FitIndices};
use super::{correlation_matrix, AttributeTable};
use crate::error::{CoreError, Result};
use crate::linalg::{column_moments, serde_rows};
use crate::rng::substream;

/// n × k regression-method scores Z·W with Z standardized by the table's own moments.
pub fn score_matrix(table: &AttributeTable, model: &FactorModel) -> Result<DMatrix<f64>> {
    let data = table.select(&model.attributes)?.data;
    let (means, sds) = column_moments(&data);
    standardized_scores(&data, &means, &sds, &model.score_weights)
}

fn standardized_scores(
    data: &DMatrix<f64>,
    means: &[f64],
    sds: &[f64],
    weights: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if let Some(j) = sds.iter().position(|s| !(*s > 0.0)) {
        return Err(CoreError::ZeroVariance(format!("column {j}")));
    }
    let z = DMatrix::from_fn(data.nrows(), data.ncols(), |i, j| {
        (data[(i, j)] - means[j]) / sds[j]
    });
    Ok(z * weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementScores {
    pub aes: Vec<f64>,
    pub pes: Vec<f64>,
    pub aes_factor: usize,
    pub pes_factor: usize,
}

/// Identifies the passive (WT/m) and active (TI/m, else IC/m) factors.
pub fn engagement_factors(model: &FactorModel) -> Result<(usize, usize)> {
    let pes = model
        .dominant_factor("WT/m")
        .ok_or_else(|| CoreError::UnknownMetric("WT/m".into()))?;
    let aes = ["TI/m", "IC/m"]
        .iter()
        .filter_map(|a| model.dominant_factor(a))
        .find(|&f| f != pes)
        .ok_or_else(|| {
            CoreError::DegenerateFit("no factor separates active from passive engagement".into())
        })?;
    Ok((pes, aes))
}

pub fn factor_scores(table: &AttributeTable, model: &FactorModel) -> Result<EngagementScores> {
    let (pes_factor, aes_factor) = engagement_factors(model)?;
    let scores = score_matrix(table, model)?;
    Ok(EngagementScores {
        aes: scores.column(aes_factor).iter().copied().collect(),
        pes: scores.column(pes_factor).iter().copied().collect(),
        aes_factor,
        pes_factor,
    })
}

/// Persisted model: enough to score new data without refitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub attributes: Vec<String>,
    pub k: usize,
    pub factor_labels: Vec<String>,
    #[serde(with = "serde_rows")]
    pub rotated_loadings: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    pub score_weights: DMatrix<f64>,
    pub fit: FitIndices,
    pub column_means: Vec<f64>,
    pub column_sds: Vec<f64>,
    pub seed: u64,
}

impl ModelSnapshot {
    pub fn new(model: &FactorModel, training: &AttributeTable, seed: u64) -> Result<Self> {
        let (column_means, column_sds) = column_moments(&training.select(&model.attributes)?.data);
        Ok(Self {
            attributes: model.attributes.clone(),
            k: model.k,
            factor_labels: model.factor_labels.clone(),
            rotated_loadings: model.rotated_loadings.clone(),
            score_weights: model.score_weights.clone(),
            fit: model.fit.clone(),
            column_means,
            column_sds,
            seed,
        })
    }

    /// Scores standardized with the training moments.
    pub fn score(&self, table: &AttributeTable) -> Result<DMatrix<f64>> {
        let data = table.select(&self.attributes)?.data;
        standardized_scores(
            &data,
            &self.column_means,
            &self.column_sds,
            &self.score_weights,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFit {
    pub n: usize,
    #[serde(with = "serde_rows")]
    pub loadings: DMatrix<f64>,
    pub tli: f64,
    pub rmsea: f64,
    pub srmr: f64,
    pub cfi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub split_ratio: f64,
    pub attributes: Vec<String>,
    pub train: SplitFit,
    pub test: SplitFit,
    pub seed: u64,
}

fn congruence(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let (x, y) = (a.column(i), b.column(j));
    let denom = (x.norm_squared() * y.norm_squared()).sqrt();
    if denom > 0.0 {
        x.dot(&y) / denom
    } else {
        0.0
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

/// Reorders and reflects columns of `loadings` to best match `reference` by
/// total absolute Tucker congruence.
fn align(loadings: &DMatrix<f64>, reference: &DMatrix<f64>) -> DMatrix<f64> {
    let k = reference.ncols();
    let best = permutations(k)
        .into_iter()
        .map(|perm| {
            let score: f64 = (0..k)
                .map(|j| congruence(loadings, perm[j], reference, j).abs())
                .sum();
            (perm, score)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(perm, _)| perm)
        .expect("at least one permutation");
    let mut aligned = loadings.select_columns(&best);
    for j in 0..k {
        if congruence(&aligned, j, reference, j) < 0.0 {
            aligned.column_mut(j).neg_mut();
        }
    }
    aligned
}

fn fit_subset(
    table: &AttributeTable,
    rows: &[usize],
    k: usize,
    reference: &FactorModel,
) -> Result<SplitFit> {
    let subset = table.subset_rows(rows);
    let model = fit_efa(&correlation_matrix(&subset)?, k, rows.len())?;
    Ok(SplitFit {
        n: rows.len(),
        loadings: align(&model.rotated_loadings, &reference.rotated_loadings),
        tli: model.fit.tli,
        rmsea: model.fit.rmsea,
        srmr: model.fit.srmr,
        cfi: model.fit.cfi,
    })
}

/// Fits the reference model's attributes and factor count on given train and test rows.
pub fn cross_validate_split(
    table: &AttributeTable,
    reference: &FactorModel,
    train_rows: &[usize],
    test_rows: &[usize],
    seed: u64,
) -> Result<CrossValReport> {
    let table = table.select(&reference.attributes)?;
    let (train, test) = rayon::join(
        || fit_subset(&table, train_rows, reference.k, reference),
        || fit_subset(&table, test_rows, reference.k, reference),
    );
    let total = (train_rows.len() + test_rows.len()) as f64;
    Ok(CrossValReport {
        split_ratio: train_rows.len() as f64 / total,
        attributes: reference.attributes.clone(),
        train: train?,
        test: test?,
        seed,
    })
}

/// Random split with round(ratio · n) training rows, then independent fits.
pub fn cross_validate(
    table: &AttributeTable,
    reference: &FactorModel,
    ratio: f64,
    seed: u64,
) -> Result<CrossValReport> {
    let n = table.nrows();
    if n < 100 {
        return Err(CoreError::InsufficientData {
            needed: 100,
            got: n,
        });
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "split ratio {ratio} outside (0, 1)"
        )));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut substream(seed, 0));
    let n_train = (ratio * n as f64).round() as usize;
    let (train, test) = rows.split_at(n_train);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    let mut report = cross_validate_split(table, reference, &train, &test, seed)?;
    report.split_ratio = ratio;
    Ok(report)
}
