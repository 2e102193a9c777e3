use nalgebra::DMatrix;
use rand::distributions::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::Normal;

use super::{correlation_matrix, AttributeTable, CorrelationMatrix};
use crate::error::{CoreError, Result};
use crate::linalg::{checked_spd_inverse, sorted_symmetric_eigen};
use crate::rng::substream;

pub const MIN_SIMULATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelAnalysis {
    pub observed: Vec<f64>,
    pub simulated_mean: Vec<f64>,
    pub suggested_factors: usize,
    pub n_sims: usize,
    pub seed: u64,
}

/// Eigenvalues of the correlation matrix with squared multiple correlations on the diagonal.
fn reduced_eigenvalues(matrix: &CorrelationMatrix) -> Result<Vec<f64>> {
    let inverse = checked_spd_inverse(&matrix.values)?;
    let mut reduced = matrix.values.clone();
    for i in 0..matrix.dim() {
        reduced[(i, i)] = 1.0 - 1.0 / inverse[(i, i)];
    }
    Ok(sorted_symmetric_eigen(&reduced).0.iter().copied().collect())
}

/// Number of leading reduced eigenvalues exceeding the mean of those from
/// `n_sims` standard-normal datasets of the same shape.
pub fn parallel_analysis(
    table: &AttributeTable,
    n_sims: usize,
    seed: u64,
) -> Result<ParallelAnalysis> {
    if n_sims < MIN_SIMULATIONS {
        return Err(CoreError::InsufficientIterations {
            min: MIN_SIMULATIONS,
            got: n_sims,
        });
    }
    let observed = reduced_eigenvalues(&correlation_matrix(table)?)?;
    let (n, p) = table.data.shape();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");

    let simulated: Vec<Vec<f64>> = (0..n_sims)
        .into_par_iter()
        .map(|sim| {
            let mut rng = substream(seed, sim as u64);
            let data = DMatrix::from_fn(n, p, |_, _| normal.sample(&mut rng));
            let noise = AttributeTable {
                names: table.names.clone(),
                data,
            };
            reduced_eigenvalues(&correlation_matrix(&noise)?)
        })
        .collect::<Result<_>>()?;

    let simulated_mean: Vec<f64> = (0..p)
        .map(|m| simulated.iter().map(|s| s[m]).sum::<f64>() / n_sims as f64)
        .collect();
    let suggested_factors = observed
        .iter()
        .zip(&simulated_mean)
        .take_while(|(o, s)| o > s)
        .count();

    Ok(ParallelAnalysis {
        observed,
        simulated_mean,
        suggested_factors,
        n_sims,
        seed,
    })
}
