//! Exploratory factor analysis: adequacy screening, attribute selection,
//! parallel analysis, minres extraction with varimax rotation, fit indices,
//! regression-method scores and split-sample cross-validation.

mod adequacy;
mod extract;
mod parallel;
mod scores;

pub use adequacy::{
    adequacy, select_attributes, vif, vif_from_matrix, AdequacyReport, AttributeAdequacy,
    KmoCheckpoint, Removal, RemovalReason, SelectionOutcome,
};
pub use extract::{fit_efa, varimax, FactorModel, FitIndices};
pub use parallel::{parallel_analysis, ParallelAnalysis, MIN_SIMULATIONS};
pub use scores::{
    cross_validate, cross_validate_split, engagement_factors, factor_scores, score_matrix,
    CrossValReport, EngagementScores, ModelSnapshot, SplitFit,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{column_moments, serde_rows, sorted_symmetric_eigen};

/// Observations in rows, named attributes in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    pub names: Vec<String>,
    pub data: DMatrix<f64>,
}

impl AttributeTable {
    pub fn new(names: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        if names.len() != data.ncols() {
            return Err(CoreError::LengthMismatch(data.ncols(), names.len()));
        }
        Ok(Self { names, data })
    }

    pub fn from_columns(columns: &[(String, Vec<f64>)]) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if let Some(bad) = columns.iter().find(|c| c.1.len() != n) {
            return Err(CoreError::LengthMismatch(n, bad.1.len()));
        }
        let data = DMatrix::from_fn(n, columns.len(), |i, j| columns[j].1[i]);
        Ok(Self {
            names: columns.iter().map(|c| c.0.clone()).collect(),
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Table restricted to the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| CoreError::UnknownMetric(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            names: names.to_vec(),
            data: self.data.select_columns(&idx),
        })
    }

    pub fn subset_rows(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            data: self.data.select_rows(rows),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    #[serde(with = "serde_rows")]
    pub values: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Validates symmetry, unit diagonal and positive semidefiniteness.
    pub fn new(labels: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let p = labels.len();
        if values.shape() != (p, p) {
            return Err(CoreError::LengthMismatch(p, values.nrows()));
        }
        for i in 0..p {
            if (values[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(CoreError::InvalidArgument(format!(
                    "diagonal entry {i} of a correlation matrix is {}",
                    values[(i, i)]
                )));
            }
            for j in 0..i {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-12
                    || values[(i, j)].abs() > 1.0 + 1e-12
                {
                    return Err(CoreError::InvalidArgument(format!(
                        "entry ({i}, {j}) breaks symmetry or the [-1, 1] range"
                    )));
                }
            }
        }
        let (eigenvalues, _) = sorted_symmetric_eigen(&values);
        if eigenvalues.iter().any(|&v| v < -1e-8) {
            return Err(CoreError::InvalidArgument(
                "correlation matrix is not positive semidefinite".into(),
            ));
        }
        Ok(Self { labels, values })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn subset(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.labels
                    .iter()
                    .position(|l| l == n)
                    .ok_or_else(|| CoreError::UnknownMetric(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            labels: names.to_vec(),
            values: DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.values[(idx[i], idx[j])]),
        })
    }
}

/// Pearson correlations of the table's columns.
pub fn correlation_matrix(table: &AttributeTable) -> Result<CorrelationMatrix> {
    let (n, p) = table.data.shape();
    if n < p + 1 || n < 2 {
        return Err(CoreError::TooFewRows {
            rows: n,
            columns: p,
        });
    }
    if table.data.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::DegenerateInput(
            "non-finite value in attribute table".into(),
        ));
    }
    let (means, sds) = column_moments(&table.data);
    for (j, sd) in sds.iter().enumerate() {
        if !(*sd > 0.0) || *sd <= means[j].abs() * 1e-12 {
            return Err(CoreError::ZeroVariance(table.names[j].clone()));
        }
    }
    let centered = DMatrix::from_fn(n, p, |i, j| table.data[(i, j)] - means[j]);
    let cross = centered.tr_mul(&centered);
    let values = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            let (a, b) = (i.min(j), i.max(j));
            (cross[(a, b)] / (cross[(a, a)] * cross[(b, b)]).sqrt()).clamp(-1.0, 1.0)
        }
    });
    Ok(CorrelationMatrix {
        labels: table.names.clone(),
        values,
    })
}
