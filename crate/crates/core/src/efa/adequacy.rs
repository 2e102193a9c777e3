use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{correlation_matrix, AttributeTable, CorrelationMatrix};
use crate::error::{CoreError, Result};
use crate::linalg::checked_spd_inverse;

/// R² at or above which a column counts as perfectly collinear with the rest.
const PERFECT_FIT: f64 = 1.0 - 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeAdequacy {
    pub name: String,
    /// `None` when the attribute is uncorrelated with every other one.
    pub msa: Option<f64>,
    pub vif: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyReport {
    /// `None` (not applicable) when all off-diagonal correlations vanish.
    pub overall_kmo: Option<f64>,
    pub attributes: Vec<AttributeAdequacy>,
    pub bartlett_chi2: f64,
    pub bartlett_df: usize,
    pub bartlett_p: f64,
    pub n: usize,
}

impl AdequacyReport {
    pub fn msa(&self, name: &str) -> Option<f64> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .and_then(|a| a.msa)
    }

    pub fn vif(&self, name: &str) -> Option<f64> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.vif)
    }
}

fn ratio(r2: f64, q2: f64) -> Option<f64> {
    (r2 > 0.0).then(|| r2 / (r2 + q2))
}

/// KMO and per-attribute MSA from anti-image correlations, and Bartlett's
/// sphericity test.
pub fn adequacy(matrix: &CorrelationMatrix, n: usize) -> Result<AdequacyReport> {
    let r = &matrix.values;
    let p = matrix.dim();
    let inverse = checked_spd_inverse(r)?;
    let partial = DMatrix::from_fn(p, p, |i, j| {
        -inverse[(i, j)] / (inverse[(i, i)] * inverse[(j, j)]).sqrt()
    });

    let mut row_r2 = vec![0.0; p];
    let mut row_q2 = vec![0.0; p];
    for i in 0..p {
        for j in (0..p).filter(|&j| j != i) {
            row_r2[i] += r[(i, j)].powi(2);
            row_q2[i] += partial[(i, j)].powi(2);
        }
    }
    let overall_kmo = ratio(row_r2.iter().sum(), row_q2.iter().sum());
    let vifs = vif_from_matrix(matrix);
    let attributes = (0..p)
        .map(|i| AttributeAdequacy {
            name: matrix.labels[i].clone(),
            msa: ratio(row_r2[i], row_q2[i]),
            vif: vifs[i],
        })
        .collect();

    let cholesky = r.clone().cholesky().ok_or(CoreError::SingularMatrix)?;
    let ln_det: f64 = 2.0 * cholesky.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let pf = p as f64;
    let multiplier = n as f64 - 1.0 - (2.0 * pf + 5.0) / 6.0;
    let bartlett_chi2 = (-multiplier * ln_det.min(0.0)).max(0.0);
    let bartlett_df = p * (p - 1) / 2;
    let bartlett_p = if bartlett_df == 0 {
        1.0
    } else {
        ChiSquared::new(bartlett_df as f64)
            .expect("df > 0")
            .sf(bartlett_chi2)
    };

    Ok(AdequacyReport {
        overall_kmo,
        attributes,
        bartlett_chi2,
        bartlett_df,
        bartlett_p,
        n,
    })
}

/// VIF_j = 1/(1 − R²_j) where R²_j is the squared multiple correlation of
/// column j on the others, obtained from the correlation matrix by a
/// pseudo-inverse solve so that exact collinearity yields an infinite VIF.
pub fn vif_from_matrix(matrix: &CorrelationMatrix) -> Vec<f64> {
    let r = &matrix.values;
    let p = matrix.dim();
    (0..p)
        .map(|j| {
            if p == 1 {
                return 1.0;
            }
            let others: Vec<usize> = (0..p).filter(|&i| i != j).collect();
            let sub = r.select_rows(&others).select_columns(&others);
            let rhs = r.select_rows(&others).column(j).into_owned();
            let beta = sub
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .expect("singular vectors requested");
            let r2 = rhs.dot(&beta).clamp(0.0, 1.0);
            if r2 >= PERFECT_FIT {
                f64::INFINITY
            } else {
                1.0 / (1.0 - r2)
            }
        })
        .collect()
}

/// Variance inflation factor of every column; perfect collinearity gives `f64::INFINITY`.
pub fn vif(table: &AttributeTable) -> Result<Vec<(String, f64)>> {
    if table.nrows() <= table.names.len() {
        return Err(CoreError::TooFewRows {
            rows: table.nrows(),
            columns: table.names.len(),
        });
    }
    let matrix = correlation_matrix(table)?;
    Ok(table
        .names
        .iter()
        .cloned()
        .zip(vif_from_matrix(&matrix))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    PerfectCollinearity,
    Msa,
    Vif,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub round: usize,
    pub attribute: String,
    pub reason: RemovalReason,
    /// Triggering MSA or VIF; `None` for perfect collinearity.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmoCheckpoint {
    pub attributes: Vec<String>,
    pub overall_kmo: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub retained: Vec<String>,
    pub removals: Vec<Removal>,
    /// Overall KMO of every attribute set the MSA phase examined.
    pub kmo_checkpoints: Vec<KmoCheckpoint>,
}

fn drop_attribute(
    current: &mut Vec<String>,
    removals: &mut Vec<Removal>,
    name: &str,
    reason: RemovalReason,
    value: Option<f64>,
    round: usize,
) -> Result<()> {
    current.retain(|c| c != name);
    removals.push(Removal {
        round,
        attribute: name.to_string(),
        reason,
        value,
    });
    if current.len() < 3 {
        return Err(CoreError::EverythingRemoved(current.clone()));
    }
    Ok(())
}

/// Iterative screening. Exact collinear duplicates go first; then every
/// attribute with MSA below the threshold is dropped per round until all pass;
/// then the single largest VIF above its threshold is dropped per round. The
/// two phases alternate until neither removes anything.
pub fn select_attributes(
    table: &AttributeTable,
    msa_threshold: f64,
    vif_threshold: f64,
) -> Result<SelectionOutcome> {
    let n = table.nrows();
    let mut current = table.names.clone();
    let mut removals = Vec::new();
    let mut kmo_checkpoints = Vec::new();
    let mut round = 0;

    loop {
        let removed_before = removals.len();

        loop {
            let matrix = correlation_matrix(&table.select(&current)?)?;
            let vifs = vif_from_matrix(&matrix);
            let Some(j) = vifs.iter().rposition(|v| v.is_infinite()) else {
                break;
            };
            round += 1;
            let name = current[j].clone();
            drop_attribute(
                &mut current,
                &mut removals,
                &name,
                RemovalReason::PerfectCollinearity,
                None,
                round,
            )?;
        }

        loop {
            let matrix = correlation_matrix(&table.select(&current)?)?;
            let report = adequacy(&matrix, n)?;
            kmo_checkpoints.push(KmoCheckpoint {
                attributes: current.clone(),
                overall_kmo: report.overall_kmo,
            });
            let failing: Vec<(String, f64)> = report
                .attributes
                .iter()
                .filter_map(|a| {
                    a.msa
                        .filter(|&m| m < msa_threshold)
                        .map(|m| (a.name.clone(), m))
                })
                .collect();
            if failing.is_empty() {
                break;
            }
            round += 1;
            for (name, msa) in failing {
                drop_attribute(
                    &mut current,
                    &mut removals,
                    &name,
                    RemovalReason::Msa,
                    Some(msa),
                    round,
                )?;
            }
        }

        loop {
            let matrix = correlation_matrix(&table.select(&current)?)?;
            let vifs = vif_from_matrix(&matrix);
            let (j, &worst) = vifs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("at least three attributes");
            if worst <= vif_threshold {
                break;
            }
            round += 1;
            let name = current[j].clone();
            drop_attribute(
                &mut current,
                &mut removals,
                &name,
                RemovalReason::Vif,
                Some(worst),
                round,
            )?;
        }

        if removals.len() == removed_before {
            break;
        }
    }

    Ok(SelectionOutcome {
        retained: current,
        removals,
        kmo_checkpoints,
    })
}
