//! Ordinary least squares on log-transformed dynamics, and the age-group
//! interaction design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CoreError, Result};
use crate::lifespan::{quartile_cutpoints, quartile_index};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroPolicy {
    Strict,
    Offset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogTransformed {
    pub values: Vec<f64>,
    /// ε added before taking logs under the offset policy.
    pub offset: Option<f64>,
}

pub fn log_transform(values: &[f64], policy: ZeroPolicy) -> Result<LogTransformed> {
    if values.is_empty() {
        return Err(CoreError::EmptySample);
    }
    match policy {
        ZeroPolicy::Strict => {
            if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                return Err(CoreError::NonPositiveValue { index, value });
            }
            Ok(LogTransformed {
                values: values.iter().map(|v| v.ln()).collect(),
                offset: None,
            })
        }
        ZeroPolicy::Offset => {
            if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
                return Err(CoreError::NonPositiveValue { index, value });
            }
            if values.iter().all(|&v| v > 0.0) {
                return Ok(LogTransformed {
                    values: values.iter().map(|v| v.ln()).collect(),
                    offset: None,
                });
            }
            let min_positive = values
                .iter()
                .copied()
                .filter(|&v| v > 0.0)
                .fold(f64::INFINITY, f64::min);
            if !min_positive.is_finite() {
                return Err(CoreError::DegenerateInput(
                    "offset log transform of an all-zero vector".into(),
                ));
            }
            let eps = min_positive / 2.0;
            Ok(LogTransformed {
                values: values.iter().map(|v| (v + eps).ln()).collect(),
                offset: Some(eps),
            })
        }
    }
}

/// Design matrix with named columns; the first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub matrix: DMatrix<f64>,
    pub names: Vec<String>,
}

impl Design {
    /// Intercept followed by the given predictors.
    pub fn with_intercept(predictors: &[(&str, &[f64])]) -> Result<Self> {
        let n = predictors.first().map_or(0, |p| p.1.len());
        if let Some(bad) = predictors.iter().find(|p| p.1.len() != n) {
            return Err(CoreError::LengthMismatch(n, bad.1.len()));
        }
        let matrix = DMatrix::from_fn(n, predictors.len() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                predictors[j - 1].1[i]
            }
        });
        let names = std::iter::once("Intercept".to_string())
            .chain(predictors.iter().map(|p| p.0.to_string()))
            .collect();
        Ok(Self { matrix, names })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTerm {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub terms: Vec<RegressionTerm>,
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub n: usize,
    pub df_residual: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    pub fn term(&self, name: &str) -> Option<&RegressionTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient).collect()
    }
}

/// Relative size of a triangular pivot below which the design counts as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Least squares via Householder QR. Standard errors come from σ²(XᵀX)⁻¹ with
/// (XᵀX)⁻¹ = R⁻¹R⁻ᵀ; p-values are two-sided t tests on n − q df.
pub fn ols_fit(design: &Design, response: &[f64]) -> Result<RegressionFit> {
    let x = &design.matrix;
    let (n, q) = x.shape();
    if response.len() != n {
        return Err(CoreError::LengthMismatch(n, response.len()));
    }
    if design.names.len() != q {
        return Err(CoreError::LengthMismatch(q, design.names.len()));
    }
    // Fewer rows than columns already caps the column rank below q.
    if n < q {
        return Err(CoreError::RankDeficient);
    }
    if n == q {
        return Err(CoreError::TooFewRows {
            rows: n,
            columns: q,
        });
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let largest = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if largest == 0.0
        || r.diagonal()
            .iter()
            .any(|v| v.abs() <= RANK_TOLERANCE * largest)
    {
        return Err(CoreError::RankDeficient);
    }

    let y = DVector::from_column_slice(response);
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let beta = r
        .solve_upper_triangular(&qty.rows(0, q).into_owned())
        .ok_or(CoreError::RankDeficient)?;
    let residuals = &y - x * &beta;
    let sse = residuals.norm_squared();

    let y_mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(CoreError::DegenerateInput("constant response".into()));
    }
    let r_squared = (1.0 - sse / sst).clamp(0.0, 1.0);
    let df = n - q;
    let adjusted_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(q, q))
        .ok_or(CoreError::RankDeficient)?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let sigma2 = sse / df as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df as f64).expect("df > 0");

    let terms = design
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let std_error = (sigma2 * xtx_inv[(j, j)]).sqrt();
            let t_value = beta[j] / std_error;
            let p_value = if std_error > 0.0 {
                (2.0 * t_dist.sf(t_value.abs())).clamp(0.0, 1.0)
            } else {
                0.0
            };
            RegressionTerm {
                name: name.clone(),
                coefficient: beta[j],
                std_error,
                t_value,
                p_value,
            }
        })
        .collect();

    Ok(RegressionFit {
        terms,
        r_squared,
        adjusted_r_squared,
        n,
        df_residual: df,
        residuals: residuals.iter().copied().collect(),
    })
}

/// Multiplicative effect of a unit change in a predictor on a log response.
pub fn percent_effect(coefficient: f64) -> f64 {
    coefficient.exp_m1()
}

pub const AGE_GROUP_LABELS: [&str; 4] = ["G1", "G2", "G3", "G4"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeGroupAssignment {
    /// Group index 0..4 per input position; `None` for inputs without a release.
    pub groups: Vec<Option<usize>>,
    pub cutpoints: [f64; 3],
    pub excluded_without_release: usize,
}

impl AgeGroupAssignment {
    pub fn group_sizes(&self) -> [usize; 4] {
        let mut sizes = [0; 4];
        for g in self.groups.iter().flatten() {
            sizes[*g] += 1;
        }
        sizes
    }

    /// Indices of the inputs that carry a group.
    pub fn assigned(&self) -> Vec<usize> {
        (0..self.groups.len())
            .filter(|&i| self.groups[i].is_some())
            .collect()
    }
}

/// Quartile groups of release age in days; ages at a cutpoint fall in the younger group.
pub fn assign_age_groups(release_ages: &[Option<i64>]) -> Result<AgeGroupAssignment> {
    let ages: Vec<f64> = release_ages.iter().flatten().map(|&a| a as f64).collect();
    if ages.is_empty() {
        return Err(CoreError::NoReleases);
    }
    let cutpoints = quartile_cutpoints(&ages)?;
    let groups = release_ages
        .iter()
        .map(|a| a.map(|a| quartile_index(a as f64, &cutpoints)))
        .collect();
    Ok(AgeGroupAssignment {
        groups,
        cutpoints,
        excluded_without_release: release_ages.len() - ages.len(),
    })
}

/// Intercept, the four metrics, G2–G4 dummies and metric × dummy interactions
/// (q = 20), with G1 as reference. `groups` holds one group index per row.
pub fn build_interaction_design(metrics: &[(&str, &[f64]); 4], groups: &[usize]) -> Result<Design> {
    let n = groups.len();
    for (_, column) in metrics {
        if column.len() != n {
            return Err(CoreError::LengthMismatch(n, column.len()));
        }
    }
    if let Some(&g) = groups.iter().find(|&&g| g > 3) {
        return Err(CoreError::InvalidArgument(format!(
            "age group index {g} out of range"
        )));
    }
    let mut names = vec!["Intercept".to_string()];
    names.extend(metrics.iter().map(|m| m.0.to_string()));
    names.extend(AGE_GROUP_LABELS[1..].iter().map(|g| g.to_string()));
    for (name, _) in metrics {
        for g in &AGE_GROUP_LABELS[1..] {
            names.push(format!("{name} x {g}"));
        }
    }
    let matrix = DMatrix::from_fn(n, names.len(), |i, j| {
        let dummy = |level: usize| if groups[i] == level { 1.0 } else { 0.0 };
        match j {
            0 => 1.0,
            1..=4 => metrics[j - 1].1[i],
            5..=7 => dummy(j - 4),
            _ => {
                let k = j - 8;
                metrics[k / 3].1[i] * dummy(k % 3 + 1)
            }
        }
    });
    Ok(Design { matrix, names })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn simple(x: &[f64]) -> Design {
        Design::with_intercept(&[("x", x)]).unwrap()
    }

    #[test]
    fn log_transform_examples() {
        let e = std::f64::consts::E;
        let out = log_transform(&[1.0, e, e * e], ZeroPolicy::Strict).unwrap();
        for (a, b) in out.values.iter().zip([0.0, 1.0, 2.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        assert_eq!(
            log_transform(&[1.0, 0.0], ZeroPolicy::Strict),
            Err(CoreError::NonPositiveValue {
                index: 1,
                value: 0.0
            })
        );
        let out = log_transform(&[0.0, 0.0105, 0.2, 3.0], ZeroPolicy::Offset).unwrap();
        assert_relative_eq!(out.offset.unwrap(), 0.00525, epsilon = 1e-15);
        assert_relative_eq!(out.values[0], 0.00525f64.ln(), epsilon = 1e-12);
        assert!(log_transform(&[-1.0], ZeroPolicy::Offset).is_err());
    }

    #[test]
    fn four_point_oracle() {
        // Normal equations: XᵀX = [[4, 6], [6, 14]], Xᵀy = [16.5, 34.5].
        let fit = ols_fit(&simple(&[0.0, 1.0, 2.0, 3.0]), &[1.0, 3.0, 5.0, 7.5]).unwrap();
        assert_relative_eq!(fit.terms[0].coefficient, 0.9, epsilon = 1e-10);
        assert_relative_eq!(fit.terms[1].coefficient, 2.15, epsilon = 1e-10);
        // statsmodels OLS
        assert_relative_eq!(fit.terms[0].std_error, 0.16201852, epsilon = 1e-8);
        assert_relative_eq!(fit.terms[1].std_error, 0.08660254, epsilon = 1e-8);
        assert_relative_eq!(fit.terms[0].p_value, 0.03091258, epsilon = 1e-8);
        assert_relative_eq!(fit.terms[1].p_value, 0.00161856, epsilon = 1e-8);
        assert_relative_eq!(fit.r_squared, 0.9967654986522911, epsilon = 1e-12);
        assert_relative_eq!(fit.adjusted_r_squared, 0.9951482479784367, epsilon = 1e-12);
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let fit = ols_fit(&simple(&x), &y).unwrap();
        assert_relative_eq!(fit.terms[0].coefficient, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.terms[1].coefficient, 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn ols_errors() {
        let x = [1.0, 2.0, 3.0];
        let dup = Design::with_intercept(&[("a", &x), ("b", &x)]).unwrap();
        assert_eq!(
            ols_fit(&dup, &[1.0, 2.0, 4.0]),
            Err(CoreError::TooFewRows {
                rows: 3,
                columns: 3
            })
        );
        let x = [1.0, 2.0, 3.0, 4.0];
        let dup = Design::with_intercept(&[("a", &x), ("b", &x)]).unwrap();
        assert_eq!(
            ols_fit(&dup, &[1.0, 2.0, 4.0, 5.0]),
            Err(CoreError::RankDeficient)
        );
    }

    #[test]
    fn percent_effect_examples() {
        assert_relative_eq!(percent_effect(0.4578), 0.581, epsilon = 1e-3);
        assert_eq!(percent_effect(0.0), 0.0);
        assert_relative_eq!(percent_effect(std::f64::consts::LN_2), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn age_group_examples() {
        let a = assign_age_groups(&[Some(10), Some(20), None, Some(30), Some(40)]).unwrap();
        assert_eq!(a.groups, vec![Some(0), Some(1), None, Some(2), Some(3)]);
        assert_eq!(a.excluded_without_release, 1);
        assert!(matches!(
            assign_age_groups(&[Some(5); 6]),
            Err(CoreError::DegeneratePartition(_))
        ));
        assert_eq!(assign_age_groups(&[None, None]), Err(CoreError::NoReleases));
    }

    #[test]
    fn interaction_design_layout() {
        let m: Vec<f64> = (0..8).map(|i| i as f64 + 1.0).collect();
        let metrics = [("A", &m[..]), ("B", &m[..]), ("C", &m[..]), ("D", &m[..])];
        let groups = [0, 1, 2, 3, 0, 1, 2, 3];
        let design = build_interaction_design(&metrics, &groups).unwrap();
        assert_eq!(design.matrix.ncols(), 20);
        assert_eq!(design.names[8], "A x G2");
        assert_eq!(design.names[19], "D x G4");
        // Row 3 is in G4: only the G4 dummy and the x G4 interactions are nonzero.
        assert_eq!(design.matrix[(3, 7)], 1.0);
        assert_eq!(design.matrix[(3, 10)], 4.0);
        assert_eq!(design.matrix[(3, 8)], 0.0);

        let all_g1 = build_interaction_design(&metrics, &[0; 8]).unwrap();
        assert!(all_g1.matrix.columns(5, 15).iter().all(|v| *v == 0.0));

        let constant = [1.0; 8];
        let flat = [
            ("A", &constant[..]),
            ("B", &constant[..]),
            ("C", &constant[..]),
            ("D", &constant[..]),
        ];
        let design = build_interaction_design(&flat, &groups).unwrap();
        let y: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        assert_eq!(ols_fit(&design, &y), Err(CoreError::RankDeficient));
        assert!(matches!(
            build_interaction_design(&metrics, &[0; 7]),
            Err(CoreError::LengthMismatch(7, 8))
        ));
    }

    fn dataset() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 8..40)
    }

    proptest! {
        #[test]
        fn ols_properties(rows in dataset(), c in prop_oneof![0.1f64..10.0, -10.0f64..-0.1]) {
            let x1: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let x2: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.2 + 0.5 * r.0).collect();
            let small = Design::with_intercept(&[("x1", &x1)]).unwrap();
            let full = Design::with_intercept(&[("x1", &x1), ("x2", &x2)]).unwrap();
            let (Ok(a), Ok(b)) = (ols_fit(&small, &y), ols_fit(&full, &y)) else {
                return Ok(());
            };
            let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for col in full.matrix.column_iter() {
                let dot: f64 = col.iter().zip(&b.residuals).map(|(u, v)| u * v).sum();
                prop_assert!(dot.abs() <= 1e-8 * y_norm.max(1.0));
            }
            prop_assert!(b.r_squared >= a.r_squared - 1e-12);
            prop_assert!(b.adjusted_r_squared <= b.r_squared + 1e-15);

            let scaled: Vec<f64> = x1.iter().map(|v| v * c).collect();
            let s = ols_fit(&Design::with_intercept(&[("x1", &scaled), ("x2", &x2)]).unwrap(), &y).unwrap();
            prop_assert!((s.terms[1].coefficient * c - b.terms[1].coefficient).abs() < 1e-9 * (1.0 + b.terms[1].coefficient.abs()));
            for (r1, r2) in s.residuals.iter().zip(&b.residuals) {
                prop_assert!((r1 - r2).abs() < 1e-10 * (1.0 + y_norm));
            }
        }

        #[test]
        fn percent_effect_is_increasing(a in -5.0f64..5.0, d in 1e-6f64..5.0) {
            prop_assert!(percent_effect(a + d) > percent_effect(a));
        }
    }
}
