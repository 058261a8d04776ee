//! Least squares with unit and period fixed effects and cluster-robust
//! (CR1) inference.
//!
//! Coefficients come from a Householder QR of the full dummy-encoded design,
//! never from the normal equations. The covariance is the sandwich
//! `(XᵀX)⁻¹ (Σ_g X_gᵀ e_g e_gᵀ X_g) (XᵀX)⁻¹` scaled by
//! `G/(G−1) · (N−1)/(N−K)`, with clusters = units and t(G−1) reference
//! distribution.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::linalg::{DependentColumn, Matrix, Qr};
use crate::panel::PanelDataset;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("design is rank deficient: column `{column}` is collinear with [{}]", collinear_with.join(", "))]
    RankDeficient { column: String, collinear_with: Vec<String> },
    #[error("{n_obs} observations cannot identify {n_params} parameters")]
    Underdetermined { n_obs: usize, n_params: usize },
    #[error("outcome has {got} rows, design has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("cluster-robust covariance needs at least 2 clusters, got {0}")]
    TooFewClusters(usize),
    #[error("no residual degrees of freedom (N = {n_obs}, K = {n_params})")]
    NoResidualDof { n_obs: usize, n_params: usize },
    #[error("outcome is constant; R² undefined")]
    ConstantOutcome,
    #[error("R² needs at least 2 observations")]
    TooFewObservations,
    #[error("unknown coefficient `{0}`")]
    UnknownCoefficient(String),
    #[error("fit carries no inference (saturated model or single cluster)")]
    NoInference,
}

/// Role of a design column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Intercept,
    /// Treatment indicator for the named phase.
    Treatment(String),
    Control,
    /// Any other non-absorbed regressor (trend terms, group indicators).
    Other,
    UnitEffect,
    PeriodEffect,
}

impl ColumnKind {
    pub fn is_fixed_effect(&self) -> bool {
        matches!(self, ColumnKind::Intercept | ColumnKind::UnitEffect | ColumnKind::PeriodEffect)
    }
}

/// A named column in panel row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor<T> {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<T>,
}

/// Which dummy blocks to add.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedEffects {
    pub unit: bool,
    pub period: bool,
}

impl FixedEffects {
    pub const TWO_WAY: Self = Self { unit: true, period: true };
    pub const NONE: Self = Self { unit: false, period: false };
}

#[derive(Debug, Clone)]
pub struct DesignMatrix<T> {
    x: Matrix<T>,
    names: Vec<String>,
    kinds: Vec<ColumnKind>,
    row_unit: Vec<usize>,
    row_period: Vec<usize>,
    n_clusters: usize,
    qr: Qr<T>,
}

impl<T: Scalar> DesignMatrix<T> {
    /// Wraps an explicit matrix. Clusters are the `row_unit` labels.
    pub fn new(
        x: Matrix<T>,
        names: Vec<String>,
        kinds: Vec<ColumnKind>,
        row_unit: Vec<usize>,
        row_period: Vec<usize>,
    ) -> Result<Self, EstimatorError> {
        assert_eq!(names.len(), x.cols());
        assert_eq!(kinds.len(), x.cols());
        assert_eq!(row_unit.len(), x.rows());
        assert_eq!(row_period.len(), x.rows());
        if x.rows() < x.cols() {
            return Err(EstimatorError::Underdetermined { n_obs: x.rows(), n_params: x.cols() });
        }
        let qr = Qr::factor(&x).map_err(|DependentColumn { column, depends_on }| EstimatorError::RankDeficient {
            column: names[column].clone(),
            collinear_with: depends_on.into_iter().map(|j| names[j].clone()).collect(),
        })?;
        let n_clusters = {
            let mut ids = row_unit.clone();
            ids.sort_unstable();
            ids.dedup();
            ids.len()
        };
        Ok(Self { x, names, kinds, row_unit, row_period, n_clusters, qr })
    }

    /// Intercept, the given regressors, then unit dummies and period dummies
    /// with the first unit and first period (sorted order) as references.
    pub fn two_way(
        panel: &PanelDataset<T>,
        regressors: Vec<Regressor<T>>,
        fixed_effects: FixedEffects,
    ) -> Result<Self, EstimatorError> {
        let (nu, np) = (panel.n_units(), panel.n_periods());
        let n = nu * np;
        let row_unit: Vec<usize> = (0..n).map(|r| r / np).collect();
        let row_period: Vec<usize> = (0..n).map(|r| r % np).collect();

        let mut names = vec!["intercept".to_string()];
        let mut kinds = vec![ColumnKind::Intercept];
        let mut columns = vec![vec![T::one(); n]];
        for reg in regressors {
            assert_eq!(reg.values.len(), n, "regressor `{}` has wrong length", reg.name);
            names.push(reg.name);
            kinds.push(reg.kind);
            columns.push(reg.values);
        }
        if fixed_effects.unit {
            for u in 1..nu {
                names.push(format!("unit[{}]", panel.units()[u]));
                kinds.push(ColumnKind::UnitEffect);
                columns.push(row_unit.iter().map(|&ru| if ru == u { T::one() } else { T::zero() }).collect());
            }
        }
        if fixed_effects.period {
            for p in 1..np {
                names.push(format!("period[{}]", panel.format_period(p)));
                kinds.push(ColumnKind::PeriodEffect);
                columns.push(row_period.iter().map(|&rp| if rp == p { T::one() } else { T::zero() }).collect());
            }
        }
        Self::new(Matrix::from_columns(n, &columns), names, kinds, row_unit, row_period)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column_kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Cluster id of each row (the unit index).
    pub fn cluster_ids(&self) -> &[usize] {
        &self.row_unit
    }

    pub fn row_periods(&self) -> &[usize] {
        &self.row_period
    }

    pub fn n_obs(&self) -> usize {
        self.x.rows()
    }

    pub fn n_params(&self) -> usize {
        self.x.cols()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// `(XᵀX)⁻¹`, from the cached factorisation.
    pub fn gram_inverse(&self) -> Matrix<T> {
        self.qr.gram_inverse()
    }

    /// Same design with rows reordered.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self, EstimatorError> {
        Self::new(
            self.x.select_rows(order),
            self.names.clone(),
            self.kinds.clone(),
            order.iter().map(|&r| self.row_unit[r]).collect(),
            order.iter().map(|&r| self.row_period[r]).collect(),
        )
    }

    /// Same design with column `j` multiplied by `factor`.
    pub fn scale_column(&self, j: usize, factor: T) -> Result<Self, EstimatorError> {
        let mut x = self.x.clone();
        for i in 0..x.rows() {
            x[(i, j)] *= factor;
        }
        Self::new(x, self.names.clone(), self.kinds.clone(), self.row_unit.clone(), self.row_period.clone())
    }
}

/// Cluster-robust inference for a fit.
#[derive(Debug, Clone)]
pub struct Inference<T> {
    pub covariance: Matrix<T>,
    pub standard_errors: Vec<T>,
    pub t_stats: Vec<T>,
    pub p_values: Vec<T>,
    /// Degrees of freedom of the t reference distribution (G − 1).
    pub dof: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub coefficients: Vec<T>,
    pub fitted: Vec<T>,
    pub residuals: Vec<T>,
    /// `None` when the outcome is constant.
    pub r_squared: Option<T>,
    pub n_obs: usize,
    pub n_params: usize,
    pub n_clusters: usize,
    /// `None` for saturated fits (N = K) or a single cluster.
    pub inference: Option<Inference<T>>,
}

/// One line of a coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow<T> {
    pub name: String,
    pub estimate: T,
    pub se: Option<T>,
    pub t: Option<T>,
    pub p: Option<T>,
}

impl<T: Scalar> CoefficientRow<T> {
    pub fn stars(&self) -> &'static str {
        self.p.map_or("", |p| significance_stars(p.as_f64()))
    }
}

impl<T: Scalar> FitResult<T> {
    pub fn index_of(&self, name: &str) -> Result<usize, EstimatorError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| EstimatorError::UnknownCoefficient(name.into()))
    }

    pub fn coefficient(&self, name: &str) -> Result<T, EstimatorError> {
        Ok(self.coefficients[self.index_of(name)?])
    }

    pub fn row(&self, name: &str) -> Result<CoefficientRow<T>, EstimatorError> {
        let k = self.index_of(name)?;
        let inf = self.inference.as_ref();
        Ok(CoefficientRow {
            name: name.to_string(),
            estimate: self.coefficients[k],
            se: inf.map(|i| i.standard_errors[k]),
            t: inf.map(|i| i.t_stats[k]),
            p: inf.map(|i| i.p_values[k]),
        })
    }

    /// Rows for every non-fixed-effect coefficient, in design order.
    pub fn table(&self) -> Vec<CoefficientRow<T>> {
        self.names
            .iter()
            .zip(&self.kinds)
            .filter(|(_, k)| !k.is_fixed_effect())
            .map(|(n, _)| self.row(n).expect("name from own list"))
            .collect()
    }

    /// Observed outcome, reassembled as fitted + residual.
    pub fn outcome(&self) -> Vec<T> {
        self.fitted.iter().zip(&self.residuals).map(|(f, e)| *f + *e).collect()
    }
}

/// Ordinary least squares on a full-rank design.
pub fn fit_ols<T: Scalar>(design: &DesignMatrix<T>, y: &[T]) -> Result<FitResult<T>, EstimatorError> {
    let (n, k) = (design.n_obs(), design.n_params());
    if y.len() != n {
        return Err(EstimatorError::LengthMismatch { expected: n, got: y.len() });
    }
    let coefficients = design.qr.solve(y);
    let fitted = design.x.matvec(&coefficients);
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(a, b)| *a - *b).collect();
    let r_squared = r_squared(y, &residuals).ok();

    let inference = match cluster_robust_covariance(design, &residuals) {
        Ok(covariance) => Some(inference_from(&coefficients, covariance, design.n_clusters() - 1)),
        Err(EstimatorError::TooFewClusters(_) | EstimatorError::NoResidualDof { .. }) => None,
        Err(e) => return Err(e),
    };

    Ok(FitResult {
        names: design.names.clone(),
        kinds: design.kinds.clone(),
        coefficients,
        fitted,
        residuals,
        r_squared,
        n_obs: n,
        n_params: k,
        n_clusters: design.n_clusters(),
        inference,
    })
}

fn inference_from<T: Scalar>(coefficients: &[T], covariance: Matrix<T>, dof: usize) -> Inference<T> {
    let standard_errors: Vec<T> = (0..coefficients.len()).map(|j| covariance[(j, j)].max(T::zero()).sqrt()).collect();
    let t_stats: Vec<T> = coefficients.iter().zip(&standard_errors).map(|(b, s)| *b / *s).collect();
    let p_values = t_stats.iter().map(|t| T::lit(two_sided_p(t.as_f64(), dof))).collect();
    Inference { covariance, standard_errors, t_stats, p_values, dof }
}

/// CR1 cluster-robust covariance of the OLS coefficients.
pub fn cluster_robust_covariance<T: Scalar>(
    design: &DesignMatrix<T>,
    residuals: &[T],
) -> Result<Matrix<T>, EstimatorError> {
    let (n, k, g) = (design.n_obs(), design.n_params(), design.n_clusters());
    if residuals.len() != n {
        return Err(EstimatorError::LengthMismatch { expected: n, got: residuals.len() });
    }
    if g < 2 {
        return Err(EstimatorError::TooFewClusters(g));
    }
    if k >= n {
        return Err(EstimatorError::NoResidualDof { n_obs: n, n_params: k });
    }

    let n_ids = design.row_unit.iter().copied().max().map_or(0, |m| m + 1);
    let mut scores = vec![vec![T::zero(); k]; n_ids];
    for (i, &e) in residuals.iter().enumerate() {
        if e == T::zero() {
            continue;
        }
        let s = &mut scores[design.row_unit[i]];
        for (sj, &xij) in s.iter_mut().zip(design.x.row(i)) {
            *sj += xij * e;
        }
    }
    let mut meat = Matrix::zeros(k, k);
    for s in &scores {
        for a in 0..k {
            if s[a] == T::zero() {
                continue;
            }
            for b in 0..k {
                meat[(a, b)] += s[a] * s[b];
            }
        }
    }

    let bread = design.qr.gram_inverse();
    let factor = T::count(g) / T::count(g - 1) * (T::count(n - 1) / T::count(n - k));
    let mut v = bread.matmul(&meat).matmul(&bread).scale(factor);
    for a in 0..k {
        for b in (a + 1)..k {
            let m = (v[(a, b)] + v[(b, a)]) / T::lit(2.0);
            v[(a, b)] = m;
            v[(b, a)] = m;
        }
    }
    Ok(v)
}

/// `1 − SSR/SST` around the mean of `y`.
pub fn r_squared<T: Scalar>(y: &[T], residuals: &[T]) -> Result<T, EstimatorError> {
    if y.len() != residuals.len() {
        return Err(EstimatorError::LengthMismatch { expected: y.len(), got: residuals.len() });
    }
    if y.len() < 2 {
        return Err(EstimatorError::TooFewObservations);
    }
    let mean = y.iter().copied().sum::<T>() / T::count(y.len());
    let sst: T = y.iter().map(|v| (*v - mean) * (*v - mean)).sum();
    let scale = y.iter().fold(T::zero(), |m, v| m.max(v.abs())).max(T::one());
    if sst <= T::epsilon() * scale * scale {
        return Err(EstimatorError::ConstantOutcome);
    }
    let ssr: T = residuals.iter().map(|e| *e * *e).sum();
    Ok(T::one() - ssr / sst)
}

/// Two-sided p-value from a t statistic.
pub fn two_sided_p(t: f64, dof: usize) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("positive degrees of freedom");
    (2.0 * dist.cdf(-t.abs())).min(1.0)
}

/// `*` p < 0.1, `**` p < 0.05, `***` p < 0.01.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Slope coefficients from the within (two-way demeaned) regression.
#[derive(Debug, Clone)]
pub struct WithinFit<T> {
    pub names: Vec<String>,
    pub coefficients: Vec<T>,
}

impl<T: Scalar> WithinFit<T> {
    pub fn coefficient(&self, name: &str) -> Option<T> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }
}

/// Two-way within estimator: sweeps unit and period means out of `y` and of
/// every non-fixed-effect column until the sweep stops changing anything,
/// then regresses without an intercept. Agrees with the dummy-variable fit
/// on the slope coefficients.
pub fn fit_within<T: Scalar>(design: &DesignMatrix<T>, y: &[T]) -> Result<WithinFit<T>, EstimatorError> {
    let n = design.n_obs();
    if y.len() != n {
        return Err(EstimatorError::LengthMismatch { expected: n, got: y.len() });
    }
    let slope_cols: Vec<usize> = (0..design.n_params()).filter(|&j| !design.kinds[j].is_fixed_effect()).collect();
    let has_unit = design.kinds.contains(&ColumnKind::UnitEffect);
    let has_period = design.kinds.contains(&ColumnKind::PeriodEffect);
    let demean = |v: Vec<T>| sweep_means(v, &design.row_unit, &design.row_period, has_unit, has_period);

    let y_w = demean(y.to_vec());
    let columns: Vec<Vec<T>> = slope_cols.iter().map(|&j| demean(design.x.column(j))).collect();
    let names: Vec<String> = slope_cols.iter().map(|&j| design.names[j].clone()).collect();
    if columns.is_empty() {
        return Ok(WithinFit { names, coefficients: Vec::new() });
    }
    let x_w = Matrix::from_columns(n, &columns);
    let qr = Qr::factor(&x_w).map_err(|d| EstimatorError::RankDeficient {
        column: names[d.column].clone(),
        collinear_with: d.depends_on.iter().map(|&j| names[j].clone()).collect(),
    })?;
    Ok(WithinFit { coefficients: qr.solve(&y_w), names })
}

fn sweep_means<T: Scalar>(
    mut v: Vec<T>,
    row_unit: &[usize],
    row_period: &[usize],
    by_unit: bool,
    by_period: bool,
) -> Vec<T> {
    let scale = v.iter().fold(T::zero(), |m, x| m.max(x.abs())).max(T::one());
    let tol = T::epsilon() * scale * T::lit(4.0);
    let groups = |ids: &[usize]| ids.iter().copied().max().map_or(0, |m| m + 1);
    let sweep = |ids: &[usize], v: &mut Vec<T>| -> T {
        let g = groups(ids);
        let mut sums = vec![T::zero(); g];
        let mut counts = vec![0usize; g];
        for (&id, &x) in ids.iter().zip(v.iter()) {
            sums[id] += x;
            counts[id] += 1;
        }
        let means: Vec<T> =
            sums.iter().zip(&counts).map(|(s, &c)| if c == 0 { T::zero() } else { *s / T::count(c) }).collect();
        let mut moved = T::zero();
        for (&id, x) in ids.iter().zip(v.iter_mut()) {
            *x -= means[id];
            moved = moved.max(means[id].abs());
        }
        moved
    };
    if !by_unit && !by_period {
        let mean = v.iter().copied().sum::<T>() / T::count(v.len());
        return v.into_iter().map(|x| x - mean).collect();
    }
    for _ in 0..10_000 {
        let mut moved = T::zero();
        if by_unit {
            moved = moved.max(sweep(row_unit, &mut v));
        }
        if by_period {
            moved = moved.max(sweep(row_period, &mut v));
        }
        if moved <= tol {
            break;
        }
    }
    v
}
