use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CorrelationMatrix;
use crate::error::{CoreError, Result};
use crate::linalg::{checked_spd_inverse, serde_rows, sorted_symmetric_eigen};

const PSI_LOWER: f64 = 0.005;
const PSI_UPPER: f64 = 1.0;
const MAX_ITERATIONS: usize = 1000;
/// Projected-gradient size accepted as converged.
const TOLERANCE: f64 = 1e-6;
/// Projected-gradient size at which iteration stops early.
const TIGHT_TOLERANCE: f64 = 1e-10;
const VARIMAX_EPS: f64 = 1e-5;
const VARIMAX_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitIndices {
    pub objective: f64,
    pub chi_square: f64,
    pub df: i64,
    pub null_chi_square: f64,
    pub null_df: i64,
    pub tli: f64,
    pub rmsea: f64,
    pub srmr: f64,
    pub cfi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub attributes: Vec<String>,
    pub k: usize,
    pub n: usize,
    #[serde(with = "serde_rows")]
    pub unrotated_loadings: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    pub rotated_loadings: DMatrix<f64>,
    pub communalities: Vec<f64>,
    pub uniquenesses: Vec<f64>,
    pub complexity: Vec<f64>,
    pub unrotated_complexity: Vec<f64>,
    pub ss_loadings: Vec<f64>,
    pub proportion_var: Vec<f64>,
    pub cumulative_var: Vec<f64>,
    pub fit: FitIndices,
    #[serde(with = "serde_rows")]
    pub score_weights: DMatrix<f64>,
    /// Attributes whose communality exceeded 1 and was clamped.
    pub heywood: Vec<String>,
    pub iterations: usize,
    pub factor_labels: Vec<String>,
}

impl FactorModel {
    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == name)
    }

    /// Factor on which the attribute has its largest absolute rotated loading.
    pub fn dominant_factor(&self, name: &str) -> Option<usize> {
        let i = self.attribute_index(name)?;
        (0..self.k).max_by(|&a, &b| {
            self.rotated_loadings[(i, a)]
                .abs()
                .total_cmp(&self.rotated_loadings[(i, b)].abs())
        })
    }

    /// ΛΛᵀ + diag(u²).
    pub fn reproduced(&self) -> DMatrix<f64> {
        let mut m = &self.rotated_loadings * self.rotated_loadings.transpose();
        for i in 0..m.nrows() {
            m[(i, i)] += self.uniquenesses[i];
        }
        m
    }
}

/// Sum-of-squares residual of the reduced matrix R − Ψ against its best rank-k
/// approximation, with its gradient in Ψ.
fn uls_objective(r: &DMatrix<f64>, psi: &[f64], k: usize) -> (f64, Vec<f64>) {
    let mut reduced = r.clone();
    for (i, &u) in psi.iter().enumerate() {
        reduced[(i, i)] = 1.0 - u;
    }
    let (values, vectors) = sorted_symmetric_eigen(&reduced);
    let p = psi.len();
    let mut f = 0.0;
    let mut grad = vec![0.0; p];
    for (m, &gamma) in values.iter().enumerate() {
        // Retained modes fit exactly unless their eigenvalue is negative.
        let residual = if m < k { gamma.min(0.0) } else { gamma };
        if residual == 0.0 {
            continue;
        }
        f += 0.5 * residual * residual;
        for (i, g) in grad.iter_mut().enumerate() {
            *g -= residual * vectors[(i, m)].powi(2);
        }
    }
    (f, grad)
}

fn project(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(PSI_LOWER, PSI_UPPER);
    }
}

fn projected_gradient(x: &[f64], g: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            if (xi <= PSI_LOWER && gi > 0.0) || (xi >= PSI_UPPER && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Box-constrained quasi-Newton (projected BFGS) on the uniquenesses.
fn minimize_uniquenesses(r: &DMatrix<f64>, start: Vec<f64>, k: usize) -> Result<(Vec<f64>, usize)> {
    let p = start.len();
    let mut x = start;
    project(&mut x);
    let (mut f, mut g) = uls_objective(r, &x, k);
    let mut h = DMatrix::<f64>::identity(p, p);

    for iteration in 0..MAX_ITERATIONS {
        let pg = projected_gradient(&x, &g);
        if inf_norm(&pg) < TIGHT_TOLERANCE {
            return Ok((x, iteration));
        }
        let active: Vec<bool> = pg
            .iter()
            .zip(&g)
            .map(|(a, b)| *a == 0.0 && *b != 0.0)
            .collect();
        let gv = DVector::from_column_slice(&g);
        let mut d: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        for (di, &a) in d.iter_mut().zip(&active) {
            if a {
                *di = 0.0;
            }
        }
        if d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() >= 0.0 {
            h = DMatrix::identity(p, p);
            d = pg.iter().map(|v| -v).collect();
        }

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-14 {
            let mut candidate: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            project(&mut candidate);
            let (fc, gc) = uls_objective(r, &candidate, k);
            let decrease: f64 = g
                .iter()
                .zip(candidate.iter().zip(&x))
                .map(|(gi, (c, xi))| gi * (c - xi))
                .sum();
            if fc <= f + 1e-4 * decrease {
                accepted = Some((candidate, fc, gc));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // No descent along the quasi-Newton direction; accept if already
            // within tolerance, otherwise restart from steepest descent.
            if inf_norm(&pg) <= TOLERANCE {
                return Ok((x, iteration));
            }
            if h == DMatrix::identity(p, p) {
                return Err(CoreError::NonConvergence(iteration));
            }
            h = DMatrix::identity(p, p);
            continue;
        };

        let s = DVector::from_iterator(p, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(p, g_new.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-16 {
            let rho = 1.0 / sy;
            let identity = DMatrix::<f64>::identity(p, p);
            let left = &identity - rho * &s * y.transpose();
            let right = &identity - rho * &y * s.transpose();
            h = left * &h * right + rho * &s * s.transpose();
        }
        let stalled = (f - f_new).abs() <= 1e-16 * f.abs().max(1e-300);
        x = x_new;
        f = f_new;
        g = g_new;
        if stalled && inf_norm(&projected_gradient(&x, &g)) <= TOLERANCE {
            return Ok((x, iteration + 1));
        }
    }
    if inf_norm(&projected_gradient(&x, &g)) <= TOLERANCE {
        Ok((x, MAX_ITERATIONS))
    } else {
        Err(CoreError::NonConvergence(MAX_ITERATIONS))
    }
}

/// Flips each column so its largest-magnitude entry is positive.
fn orient_columns(loadings: &mut DMatrix<f64>) {
    for mut column in loadings.column_iter_mut() {
        let largest = column
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if largest < 0.0 {
            column.neg_mut();
        }
    }
}

/// Varimax rotation with Kaiser normalization (SVD iteration, relative
/// criterion change below 1e-5).
pub fn varimax(loadings: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, k) = loadings.shape();
    if k < 2 {
        return loadings.clone();
    }
    let scale: Vec<f64> = loadings.row_iter().map(|r| r.norm()).collect();
    let x = DMatrix::from_fn(p, k, |i, j| {
        if scale[i] > 0.0 {
            loadings[(i, j)] / scale[i]
        } else {
            0.0
        }
    });
    let mut rotation = DMatrix::<f64>::identity(k, k);
    let mut criterion = 0.0;
    for _ in 0..VARIMAX_MAX_ITERATIONS {
        let z = &x * &rotation;
        let column_ss: Vec<f64> = z.column_iter().map(|c| c.norm_squared()).collect();
        let target = DMatrix::from_fn(p, k, |i, j| {
            z[(i, j)].powi(3) - z[(i, j)] * column_ss[j] / p as f64
        });
        let b = x.tr_mul(&target);
        let svd = b.svd(true, true);
        rotation = svd.u.as_ref().expect("u requested") * svd.v_t.as_ref().expect("v_t requested");
        let previous = criterion;
        criterion = svd.singular_values.sum();
        if criterion < previous * (1.0 + VARIMAX_EPS) {
            break;
        }
    }
    let z = &x * &rotation;
    DMatrix::from_fn(p, k, |i, j| z[(i, j)] * scale[i])
}

fn row_complexity(loadings: &DMatrix<f64>) -> Vec<f64> {
    loadings
        .row_iter()
        .map(|row| {
            let s2: f64 = row.iter().map(|v| v * v).sum();
            let s4: f64 = row.iter().map(|v| v.powi(4)).sum();
            if s4 > 0.0 {
                s2 * s2 / s4
            } else {
                1.0
            }
        })
        .collect()
}

fn ln_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m.clone().cholesky().ok_or(CoreError::SingularMatrix)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

fn fit_indices(
    r: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    uniquenesses: &[f64],
    n: usize,
) -> Result<FitIndices> {
    let (p, k) = loadings.shape();
    let (pf, kf, nf) = (p as f64, k as f64, n as f64);
    let common = loadings * loadings.transpose();
    let mut sigma = common.clone();
    for i in 0..p {
        sigma[(i, i)] += uniquenesses[i].max(1e-8);
    }
    let sigma_inv = sigma
        .clone()
        .cholesky()
        .ok_or(CoreError::SingularMatrix)?
        .inverse();
    let ln_det_r = ln_det_spd(r)?;
    let objective = ((&sigma_inv * r).trace() - (ln_det_r - ln_det_spd(&sigma)?) - pf).max(0.0);

    let df = (((p - k) * (p - k)) as i64 - (p + k) as i64) / 2;
    let null_df = (p * (p - 1) / 2) as i64;
    let chi_square = (nf - 1.0 - (2.0 * pf + 5.0) / 6.0 - 2.0 * kf / 3.0) * objective;
    let null_chi_square = -(nf - 1.0 - (2.0 * pf + 5.0) / 6.0) * ln_det_r;

    let (tli, rmsea, cfi) = if df > 0 {
        let d = df as f64;
        let d0 = null_df as f64;
        let tli = (null_chi_square / d0 - chi_square / d) / (null_chi_square / d0 - 1.0);
        let rmsea = ((chi_square / d - 1.0).max(0.0) / (nf - 1.0)).sqrt();
        let denom = (chi_square - d).max(null_chi_square - d0).max(0.0);
        let cfi = if denom > 0.0 {
            1.0 - (chi_square - d).max(0.0) / denom
        } else {
            1.0
        };
        (tli, rmsea, cfi)
    } else {
        // Saturated or under-identified: no degrees of freedom left to test.
        (1.0, 0.0, 1.0)
    };

    let mut ss = 0.0;
    for i in 0..p {
        for j in 0..i {
            ss += (r[(i, j)] - common[(i, j)]).powi(2);
        }
    }
    let srmr = if p > 1 {
        (ss / null_df as f64).sqrt()
    } else {
        0.0
    };

    Ok(FitIndices {
        objective,
        chi_square,
        df,
        null_chi_square,
        null_df,
        tli,
        rmsea,
        srmr,
        cfi,
    })
}

/// Minres extraction of k factors, varimax rotation, fit indices and
/// regression-method score weights. Rotated factors are ordered by
/// decreasing sum of squared loadings. Negative model degrees of freedom are
/// accepted; the fit indices are then reported as for a saturated model.
pub fn fit_efa(matrix: &CorrelationMatrix, k: usize, n: usize) -> Result<FactorModel> {
    let p = matrix.dim();
    if k == 0 || k >= p {
        return Err(CoreError::InvalidFactorCount(format!(
            "{k} factors for {p} attributes"
        )));
    }
    let r = &matrix.values;
    let inverse = checked_spd_inverse(r)?;
    let start: Vec<f64> = (0..p).map(|i| 1.0 / inverse[(i, i)]).collect();
    let (psi, iterations) = minimize_uniquenesses(r, start, k)?;

    let mut reduced = r.clone();
    for (i, &u) in psi.iter().enumerate() {
        reduced[(i, i)] = 1.0 - u;
    }
    let (values, vectors) = sorted_symmetric_eigen(&reduced);
    let mut unrotated = DMatrix::from_fn(p, k, |i, j| vectors[(i, j)] * values[j].max(0.0).sqrt());
    orient_columns(&mut unrotated);

    let mut rotated = varimax(&unrotated);
    orient_columns(&mut rotated);
    let mut order: Vec<usize> = (0..k).collect();
    let column_ss: Vec<f64> = rotated.column_iter().map(|c| c.norm_squared()).collect();
    order.sort_by(|&a, &b| column_ss[b].total_cmp(&column_ss[a]));
    let rotated = rotated.select_columns(&order);

    let mut heywood = Vec::new();
    let mut communalities = Vec::with_capacity(p);
    for (i, row) in unrotated.row_iter().enumerate() {
        let h2 = row.norm_squared();
        if h2 > 1.0 {
            heywood.push(matrix.labels[i].clone());
        }
        communalities.push(h2.min(1.0));
    }
    let uniquenesses: Vec<f64> = communalities.iter().map(|h| 1.0 - h).collect();

    let ss_loadings: Vec<f64> = rotated.column_iter().map(|c| c.norm_squared()).collect();
    let proportion_var: Vec<f64> = ss_loadings.iter().map(|s| s / p as f64).collect();
    let cumulative_var = proportion_var
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();

    let fit = fit_indices(r, &rotated, &uniquenesses, n)?;
    let score_weights = &inverse * &rotated;

    Ok(FactorModel {
        attributes: matrix.labels.clone(),
        k,
        n,
        complexity: row_complexity(&rotated),
        unrotated_complexity: row_complexity(&unrotated),
        unrotated_loadings: unrotated,
        rotated_loadings: rotated,
        communalities,
        uniquenesses,
        ss_loadings,
        proportion_var,
        cumulative_var,
        fit,
        score_weights,
        heywood,
        iterations,
        factor_labels: (1..=k).map(|i| format!("MR{i}")).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{equicorrelated, labels, two_factor_matrix};
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn two_factor_reference_solution() {
        // factor_analyzer: method="minres", rotation="varimax"
        let loadings = [
            [0.7917069413161099, 0.12272317495337111],
            [0.7431651846382377, 0.1909601054063426],
            [0.5722901183335816, 0.02985497698387445],
            [0.08746485920960821, 0.6808139001812762],
            [0.18440425307919783, 0.652973108023827],
            [0.01636687025278133, 0.47600046442046356],
        ];
        let communalities = [
            0.641860858598746,
            0.5887602535151873,
            0.32840729919297246,
            0.4711576682765973,
            0.4603788083559933,
            0.22684431657036838,
        ];
        let model = fit_efa(&two_factor_matrix(), 2, 500).unwrap();
        for (i, row) in loadings.iter().enumerate() {
            for (j, expected) in row.iter().enumerate() {
                assert_relative_eq!(model.rotated_loadings[(i, j)], *expected, epsilon = 2e-4);
            }
            assert_relative_eq!(model.communalities[i], communalities[i], epsilon = 2e-4);
        }
        assert_eq!(model.fit.df, 4);
        // numpy evaluation of the documented fit formulas on the reference loadings
        assert_relative_eq!(model.fit.chi_square, 2.0298174052388975, epsilon = 2e-3);
        assert_relative_eq!(model.fit.tli, 1.01240045164389, epsilon = 1e-4);
        assert_eq!(model.fit.rmsea, 0.0);
        assert_eq!(model.fit.cfi, 1.0);
        assert_relative_eq!(model.fit.srmr, 0.008443638335056888, epsilon = 1e-5);
        assert!(model.heywood.is_empty());
    }

    #[test]
    fn rank_one_matrix_is_recovered() {
        let model = fit_efa(&equicorrelated(3, 0.64), 1, 100).unwrap();
        for i in 0..3 {
            assert_relative_eq!(model.rotated_loadings[(i, 0)], 0.8, epsilon = 1e-6);
        }
        assert!(model.fit.srmr < 1e-6);
        assert_eq!(model.fit.df, 0);
    }

    #[test]
    fn varimax_fixed_point() {
        let simple = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(varimax(&simple), simple);
    }

    #[test]
    fn rotation_preserves_communality_and_reconstruction() {
        let model = fit_efa(&two_factor_matrix(), 2, 500).unwrap();
        let before = &model.unrotated_loadings * model.unrotated_loadings.transpose();
        let after = &model.rotated_loadings * model.rotated_loadings.transpose();
        assert!((before - after).abs().max() < 1e-9);
        for i in 0..6 {
            let h2 = model.rotated_loadings.row(i).norm_squared();
            assert_relative_eq!(h2, model.communalities[i], epsilon = 1e-9);
            assert_relative_eq!(
                model.communalities[i] + model.uniquenesses[i],
                1.0,
                epsilon = 1e-12
            );
            assert!(model.complexity[i] >= 1.0);
        }
        let total: f64 = model.ss_loadings.iter().sum();
        assert_relative_eq!(
            total,
            model.communalities.iter().sum::<f64>(),
            epsilon = 1e-9
        );
        assert!(model.ss_loadings[0] >= model.ss_loadings[1]);
    }

    #[test]
    fn invalid_factor_counts() {
        let m = two_factor_matrix();
        assert!(matches!(
            fit_efa(&m, 0, 100),
            Err(CoreError::InvalidFactorCount(_))
        ));
        assert!(matches!(
            fit_efa(&m, 6, 100),
            Err(CoreError::InvalidFactorCount(_))
        ));
    }

    #[test]
    fn saturated_model_reports_perfect_fit() {
        let sub = two_factor_matrix().subset(&labels(4)).unwrap();
        let model = fit_efa(&sub, 2, 1000).unwrap();
        assert_eq!(model.fit.df, -1);
        assert_eq!((model.fit.tli, model.fit.rmsea), (1.0, 0.0));
    }

    #[test]
    fn model_round_trips_through_json() {
        let model = fit_efa(&two_factor_matrix(), 2, 500).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: FactorModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }

    fn loading_matrix() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((-0.7f64..0.7, -0.7f64..0.7), 2..8)
    }

    proptest! {
        #[test]
        fn varimax_is_an_orthogonal_rotation(rows in loading_matrix()) {
            let l = DMatrix::from_fn(rows.len(), 2, |i, j| if j == 0 { rows[i].0 } else { rows[i].1 });
            let rotated = varimax(&l);
            let before = &l * l.transpose();
            let after = &rotated * rotated.transpose();
            prop_assert!((before - after).abs().max() < 1e-9);
        }
    }
}
