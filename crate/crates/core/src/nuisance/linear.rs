//! Coordinate-descent penalized least squares (lasso and SCAD) with
//! cross-validated penalty selection.
//!
//! Predictors are standardized to zero mean and unit (1/n) second moment
//! inside the fit; the intercept is never penalized and coefficients are
//! reported on the original scale. The penalty grid is 100 log-spaced values
//! from λ_max = max_j |⟨x̃_j, ỹ⟩| / n down to 0.001 λ_max, and 10-fold CV
//! picks the value minimizing mean squared prediction error.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::{mix, TAG_CV_SHUFFLE};

use super::NuisanceModelSpec;

/// Default convergence: stop a solve when the largest coefficient change in
/// a sweep falls below this, or after `MAX_SWEEPS` sweeps.
pub const CD_TOL: f64 = 1e-7;
pub const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Lasso,
    Scad { a: f64 },
}

/// Penalized linear fit with the standardization recorded at fit time.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub intercept: f64,
    /// Original-scale slope per covariate column.
    pub coefficients: Array1<f64>,
    /// Selected penalty λ.
    pub penalty_value: f64,
    pub feature_means: Array1<f64>,
    pub feature_scales: Array1<f64>,
}

impl LinearFit {
    pub fn p(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::ShapeMismatch(format!(
                "query has {} columns, fit expects {}",
                x.ncols(),
                self.p()
            )));
        }
        Ok(x.rows()
            .into_iter()
            .map(|row| self.intercept + row.dot(&self.coefficients))
            .collect())
    }
}

pub(crate) fn soft_threshold(z: f64, lambda: f64) -> f64 {
    let mag = z.abs() - lambda;
    if mag <= 0.0 {
        0.0
    } else {
        z.signum() * mag
    }
}

/// SCAD univariate update for a unit-second-moment column: soft-threshold up
/// to 2λ, the rescaled middle piece up to aλ, identity beyond.
pub(crate) fn scad_threshold(z: f64, lambda: f64, a: f64) -> f64 {
    let az = z.abs();
    if az <= 2.0 * lambda {
        soft_threshold(z, lambda)
    } else if az <= a * lambda {
        ((a - 1.0) * z - z.signum() * a * lambda) / (a - 2.0)
    } else {
        z
    }
}

fn univariate_update(z: f64, lambda: f64, penalty: Penalty) -> f64 {
    match penalty {
        Penalty::Lasso => soft_threshold(z, lambda),
        Penalty::Scad { a } => scad_threshold(z, lambda, a),
    }
}

fn scad_penalty_at(t: f64, lambda: f64, a: f64) -> f64 {
    let t = t.abs();
    if t <= lambda {
        lambda * t
    } else if t <= a * lambda {
        (2.0 * a * lambda * t - t * t - lambda * lambda) / (2.0 * (a - 1.0))
    } else {
        lambda * lambda * (a + 1.0) / 2.0
    }
}

/// Data standardized for coordinate descent.
pub(crate) struct Standardized {
    pub n: usize,
    pub p: usize,
    /// Standardized columns; excluded (constant) columns stay all-zero.
    pub cols: Vec<Vec<f64>>,
    /// Columns with positive variance.
    pub included: Vec<usize>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub y_mean: f64,
    pub y_centered: Vec<f64>,
}

pub(crate) fn standardize(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Standardized {
    let n = x.nrows();
    let p = x.ncols();
    let nf = n as f64;
    let y_mean = y.sum() / nf;
    let y_centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut cols = vec![vec![0.0; n]; p];
    let mut included = Vec::new();
    let mut means = vec![0.0; p];
    let mut scales = vec![0.0; p];
    for j in 0..p {
        let col = x.column(j);
        let m = col.sum() / nf;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf;
        let msq = col.iter().map(|v| v * v).sum::<f64>() / nf;
        means[j] = m;
        if var > 1e-12 * (msq + 1.0) {
            let s = var.sqrt();
            scales[j] = s;
            for i in 0..n {
                cols[j][i] = (col[i] - m) / s;
            }
            included.push(j);
        }
    }
    Standardized {
        n,
        p,
        cols,
        included,
        means,
        scales,
        y_mean,
        y_centered,
    }
}

/// λ_max: the smallest penalty at which every slope is exactly zero.
pub(crate) fn lambda_max(std: &Standardized) -> f64 {
    let nf = std.n as f64;
    std.included
        .iter()
        .map(|&j| {
            std.cols[j]
                .iter()
                .zip(std.y_centered.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs()
                / nf
        })
        .fold(0.0, f64::max)
}

pub(crate) fn lambda_grid(lmax: f64, size: usize, min_ratio: f64) -> Vec<f64> {
    if size == 1 {
        return vec![lmax];
    }
    (0..size)
        .map(|i| lmax * min_ratio.powf(i as f64 / (size as f64 - 1.0)))
        .collect()
}

/// One coordinate-descent sweep over `set`; returns the largest absolute
/// coefficient change.
pub(crate) fn cd_sweep(
    std: &Standardized,
    set: &[usize],
    lambda: f64,
    penalty: Penalty,
    beta: &mut [f64],
    residual: &mut [f64],
) -> f64 {
    let nf = std.n as f64;
    let mut max_change = 0.0f64;
    for &j in set {
        let col = &std.cols[j];
        let mut grad = 0.0;
        for i in 0..std.n {
            grad += col[i] * residual[i];
        }
        let z = beta[j] + grad / nf;
        let new = univariate_update(z, lambda, penalty);
        let delta = new - beta[j];
        if delta != 0.0 {
            for i in 0..std.n {
                residual[i] -= col[i] * delta;
            }
            beta[j] = new;
            max_change = max_change.max(delta.abs());
        }
    }
    max_change
}

/// Solve at a fixed λ, warm-starting from `beta`/`residual`. Full sweeps
/// alternate with iterations restricted to the active (nonzero) set.
pub(crate) fn cd_solve(
    std: &Standardized,
    lambda: f64,
    penalty: Penalty,
    tol: f64,
    max_sweeps: usize,
    beta: &mut [f64],
    residual: &mut [f64],
) -> usize {
    let mut sweeps = 0;
    loop {
        let change = cd_sweep(std, &std.included, lambda, penalty, beta, residual);
        sweeps += 1;
        if change < tol || sweeps >= max_sweeps {
            return sweeps;
        }
        loop {
            let active: Vec<usize> = std
                .included
                .iter()
                .copied()
                .filter(|&j| beta[j] != 0.0)
                .collect();
            if active.is_empty() {
                break;
            }
            let change = cd_sweep(std, &active, lambda, penalty, beta, residual);
            sweeps += 1;
            if change < tol || sweeps >= max_sweeps {
                break;
            }
        }
        if sweeps >= max_sweeps {
            return sweeps;
        }
    }
}

/// Standardized-scale coefficient vectors along a descending λ path.
pub(crate) fn cd_path(
    std: &Standardized,
    grid: &[f64],
    penalty: Penalty,
    tol: f64,
    max_sweeps: usize,
) -> Vec<Vec<f64>> {
    let mut beta = vec![0.0; std.p];
    let mut residual = std.y_centered.clone();
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        cd_solve(std, lambda, penalty, tol, max_sweeps, &mut beta, &mut residual);
        out.push(beta.clone());
    }
    out
}

/// Penalized objective (1/2n)‖ỹ − X̃β‖² + Σ p(βⱼ) on the standardized scale.
pub(crate) fn penalized_objective(
    std: &Standardized,
    beta: &[f64],
    lambda: f64,
    penalty: Penalty,
) -> f64 {
    let nf = std.n as f64;
    let mut rss = 0.0;
    for i in 0..std.n {
        let mut r = std.y_centered[i];
        for &j in &std.included {
            r -= std.cols[j][i] * beta[j];
        }
        rss += r * r;
    }
    let pen: f64 = std
        .included
        .iter()
        .map(|&j| match penalty {
            Penalty::Lasso => lambda * beta[j].abs(),
            Penalty::Scad { a } => scad_penalty_at(beta[j], lambda, a),
        })
        .sum();
    rss / (2.0 * nf) + pen
}

fn back_transform(std: &Standardized, beta: &[f64]) -> (f64, Array1<f64>) {
    let mut coef = Array1::zeros(std.p);
    let mut intercept = std.y_mean;
    for &j in &std.included {
        let c = beta[j] / std.scales[j];
        coef[j] = c;
        intercept -= c * std.means[j];
    }
    (intercept, coef)
}

/// Row order determined by content alone, so fits do not depend on the
/// caller's unit ordering (ties between identical rows are harmless).
pub(crate) fn canonical_order(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| {
        y[a].total_cmp(&y[b]).then_with(|| {
            for j in 0..x.ncols() {
                let c = x[[a, j]].total_cmp(&x[[b, j]]);
                if c != std::cmp::Ordering::Equal {
                    return c;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    order
}

fn gather(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    rows: &[usize],
) -> (ndarray::Array2<f64>, Array1<f64>) {
    let mut xs = ndarray::Array2::zeros((rows.len(), x.ncols()));
    let mut ys = Array1::zeros(rows.len());
    for (out, &i) in rows.iter().enumerate() {
        xs.row_mut(out).assign(&x.row(i));
        ys[out] = y[i];
    }
    (xs, ys)
}

/// Pooled-MSE cross-validation over the grid; returns the best grid index.
fn select_lambda_cv(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    grid: &[f64],
    penalty: Penalty,
    spec: &NuisanceModelSpec,
) -> usize {
    let n = x.nrows();
    let folds = spec.cv_folds.min(n).max(2);
    let mut shuffled = canonical_order(x, y);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, TAG_CV_SHUFFLE));
    shuffled.shuffle(&mut rng);
    let mut sse = vec![0.0f64; grid.len()];
    for fold in 0..folds {
        let test: Vec<usize> = shuffled
            .iter()
            .enumerate()
            .filter(|(pos, _)| pos % folds == fold)
            .map(|(_, &row)| row)
            .collect();
        let train: Vec<usize> = shuffled
            .iter()
            .enumerate()
            .filter(|(pos, _)| pos % folds != fold)
            .map(|(_, &row)| row)
            .collect();
        if train.len() < 2 || test.is_empty() {
            continue;
        }
        let (xt, yt) = gather(x, y, &train);
        let std = standardize(xt.view(), yt.view());
        let betas = cd_path(&std, grid, penalty, CD_TOL, MAX_SWEEPS);
        for (gi, beta) in betas.iter().enumerate() {
            let (intercept, coef) = back_transform(&std, beta);
            for &row in &test {
                let pred = intercept + x.row(row).dot(&coef);
                let err = y[row] - pred;
                sse[gi] += err * err;
            }
        }
    }
    sse.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn intercept_only(x: ArrayView2<f64>, y: ArrayView1<f64>) -> LinearFit {
    let std = standardize(x, y);
    LinearFit {
        intercept: std.y_mean,
        coefficients: Array1::zeros(std.p),
        penalty_value: 0.0,
        feature_means: Array1::from_vec(std.means),
        feature_scales: Array1::from_vec(std.scales),
    }
}

fn fit_penalized(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &NuisanceModelSpec,
    penalty: Penalty,
) -> Result<LinearFit> {
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch("x/y row mismatch".into()));
    }
    if x.nrows() < 3 {
        return Err(Error::InvalidConfig(format!(
            "penalized fit needs at least 3 rows, got {}",
            x.nrows()
        )));
    }
    spec.validate()?;
    let std = standardize(x, y);
    let lmax = lambda_max(&std);
    if std.included.is_empty() || lmax <= f64::MIN_POSITIVE {
        return Ok(intercept_only(x, y));
    }
    let grid = lambda_grid(lmax, spec.lambda_grid_size, spec.lambda_min_ratio);
    let best = select_lambda_cv(x, y, &grid, penalty, spec);
    let betas = cd_path(&std, &grid[..=best], penalty, CD_TOL, MAX_SWEEPS);
    let beta = betas.last().expect("nonempty path");
    let (intercept, coefficients) = back_transform(&std, beta);
    Ok(LinearFit {
        intercept,
        coefficients,
        penalty_value: grid[best],
        feature_means: Array1::from_vec(std.means),
        feature_scales: Array1::from_vec(std.scales),
    })
}

/// ℓ₁-penalized least squares with CV-selected λ.
pub fn fit_lasso(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &NuisanceModelSpec,
) -> Result<LinearFit> {
    if spec.kind != super::ModelKind::Lasso {
        return Err(Error::InvalidConfig("spec.kind must be lasso".into()));
    }
    fit_penalized(x, y, spec, Penalty::Lasso)
}

/// SCAD-penalized least squares (a = 3.7 by default) with CV-selected λ.
pub fn fit_scad(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &NuisanceModelSpec,
) -> Result<LinearFit> {
    if spec.kind != super::ModelKind::Scad {
        return Err(Error::InvalidConfig("spec.kind must be scad".into()));
    }
    fit_penalized(x, y, spec, Penalty::Scad { a: spec.scad_a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuisance::ModelKind;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn spec(kind: ModelKind) -> NuisanceModelSpec {
        NuisanceModelSpec::new(kind, 7)
    }

    /// Test-only least squares by Gaussian elimination on the normal
    /// equations (with intercept).
    fn ols_oracle(x: &Array2<f64>, y: &[f64]) -> Vec<f64> {
        let n = x.nrows();
        let p = x.ncols() + 1; // intercept first
        let mut a = vec![vec![0.0; p + 1]; p];
        let xi = |i: usize, j: usize| -> f64 {
            if j == 0 {
                1.0
            } else {
                x[[i, j - 1]]
            }
        };
        for r in 0..p {
            for c in 0..p {
                a[r][c] = (0..n).map(|i| xi(i, r) * xi(i, c)).sum();
            }
            a[r][p] = (0..n).map(|i| xi(i, r) * y[i]).sum();
        }
        for col in 0..p {
            let piv = (col..p)
                .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for r in 0..p {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..=p {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..p).map(|r| a[r][p] / a[r][r]).collect()
    }

    #[test]
    fn lambda_at_or_above_max_zeroes_all_slopes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((20, 5), |_| rng.gen::<f64>() - 0.5);
        let y = Array1::from_shape_fn(20, |i| x[[i, 0]] * 2.0 + rng.gen::<f64>());
        let std = standardize(x.view(), y.view());
        let lmax = lambda_max(&std);
        let betas = cd_path(&std, &[lmax * 1.0], Penalty::Lasso, 1e-12, MAX_SWEEPS);
        assert!(betas[0].iter().all(|&b| b == 0.0));
        let (intercept, coef) = back_transform(&std, &betas[0]);
        assert!(coef.iter().all(|&c| c == 0.0));
        assert!((intercept - y.sum() / 20.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_soft_threshold_oracle() {
        // column with zero mean, unit 1/n second moment
        let x = array![[1.0], [1.0], [-1.0], [-1.0]];
        let y = array![2.0, 1.0, -1.2, -0.8];
        let std = standardize(x.view(), y.view());
        let z = std.cols[0]
            .iter()
            .zip(std.y_centered.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / 4.0;
        for lambda in [0.1, 0.5, z.abs() + 0.1] {
            let betas = cd_path(&std, &[lambda], Penalty::Lasso, 1e-12, MAX_SWEEPS);
            let expect = soft_threshold(z, lambda);
            assert!(
                (betas[0][0] - expect).abs() < 1e-12,
                "lambda {lambda}: {} vs {}",
                betas[0][0],
                expect
            );
        }
    }

    #[test]
    fn scad_branches_on_orthonormal_design() {
        let a = 3.7;
        let lambda = 0.4;
        // large signal untouched
        let z = 3.0 * lambda * a;
        assert_eq!(scad_threshold(z, lambda, a), z);
        // inside the dead zone
        assert_eq!(scad_threshold(0.3 * lambda, lambda, a), 0.0);
        // middle region formula
        let z = 3.0 * lambda;
        let expect = ((a - 1.0) * z - a * lambda) / (a - 2.0);
        assert!((scad_threshold(z, lambda, a) - expect).abs() < 1e-15);
        // continuity at the joins
        for z0 in [2.0 * lambda, a * lambda] {
            let below = scad_threshold(z0 - 1e-9, lambda, a);
            let above = scad_threshold(z0 + 1e-9, lambda, a);
            assert!((below - above).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_penalty_matches_ols_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((40, 4), |_| rng.gen::<f64>() * 2.0 - 1.0);
        let y = Array1::from_shape_fn(40, |i| {
            1.5 + x[[i, 0]] - 2.0 * x[[i, 2]] + 0.1 * (rng.gen::<f64>() - 0.5)
        });
        let std = standardize(x.view(), y.view());
        let betas = cd_path(&std, &[0.0], Penalty::Lasso, 1e-13, MAX_SWEEPS);
        let (intercept, coef) = back_transform(&std, &betas[0]);
        let oracle = ols_oracle(&x, y.as_slice().unwrap());
        assert!((intercept - oracle[0]).abs() < 1e-8, "{intercept} vs {}", oracle[0]);
        for j in 0..4 {
            assert!(
                (coef[j] - oracle[j + 1]).abs() < 1e-8,
                "coef {j}: {} vs {}",
                coef[j],
                oracle[j + 1]
            );
        }
        // SCAD at zero penalty is the same least-squares problem
        let betas = cd_path(&std, &[0.0], Penalty::Scad { a: 3.7 }, 1e-13, MAX_SWEEPS);
        let (_, coef_scad) = back_transform(&std, &betas[0]);
        for j in 0..4 {
            assert!((coef_scad[j] - oracle[j + 1]).abs() < 1e-8);
        }
    }

    #[test]
    fn objective_never_increases_across_sweeps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((25, 8), |_| rng.gen::<f64>() - 0.5);
        let y = Array1::from_shape_fn(25, |i| x[[i, 1]] - x[[i, 5]] + rng.gen::<f64>());
        let std = standardize(x.view(), y.view());
        for penalty in [Penalty::Lasso, Penalty::Scad { a: 3.7 }] {
            let lambda = 0.05;
            let mut beta = vec![0.0; std.p];
            let mut residual = std.y_centered.clone();
            let mut prev = penalized_objective(&std, &beta, lambda, penalty);
            for _ in 0..50 {
                cd_sweep(&std, &std.included, lambda, penalty, &mut beta, &mut residual);
                let obj = penalized_objective(&std, &beta, lambda, penalty);
                assert!(obj <= prev + 1e-12, "{obj} > {prev} under {penalty:?}");
                prev = obj;
            }
        }
    }

    #[test]
    fn lasso_solution_satisfies_kkt() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let x = Array2::from_shape_fn((30, 12), |_| rng.gen::<f64>() - 0.5);
        let y = Array1::from_shape_fn(30, |i| 2.0 * x[[i, 0]] + rng.gen::<f64>() * 0.3);
        let fit = fit_lasso(x.view(), y.view(), &spec(ModelKind::Lasso)).unwrap();
        let lambda = fit.penalty_value;
        let std = standardize(x.view(), y.view());
        // reconstruct the standardized-scale solution and its residual
        let beta_std: Vec<f64> = (0..std.p)
            .map(|j| fit.coefficients[j] * std.scales[j])
            .collect();
        let mut residual = std.y_centered.clone();
        for &j in &std.included {
            for i in 0..std.n {
                residual[i] -= std.cols[j][i] * beta_std[j];
            }
        }
        for &j in &std.included {
            let g: f64 = std.cols[j]
                .iter()
                .zip(residual.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / std.n as f64;
            if beta_std[j] == 0.0 {
                assert!(g.abs() <= lambda + 1e-6, "inactive KKT: |{g}| > {lambda}");
            } else {
                assert!(
                    (g - lambda * beta_std[j].signum()).abs() <= 1e-6,
                    "active KKT at {j}: {g} vs {}",
                    lambda * beta_std[j].signum()
                );
            }
        }
    }

    #[test]
    fn constant_y_gives_intercept_only() {
        let x = Array2::from_shape_fn((10, 3), |(i, j)| (i * j) as f64);
        let y = Array1::from_elem(10, 4.2);
        let fit = fit_lasso(x.view(), y.view(), &spec(ModelKind::Lasso)).unwrap();
        assert!(fit.coefficients.iter().all(|&c| c == 0.0));
        assert!((fit.intercept - 4.2).abs() < 1e-12);
    }

    #[test]
    fn constant_column_gets_zero_coefficient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut x = Array2::from_shape_fn((15, 3), |_| rng.gen::<f64>());
        for i in 0..15 {
            x[[i, 1]] = 7.0;
        }
        let y = Array1::from_shape_fn(15, |i| x[[i, 0]] + 0.01 * rng.gen::<f64>());
        let fit = fit_lasso(x.view(), y.view(), &spec(ModelKind::Lasso)).unwrap();
        assert_eq!(fit.coefficients[1], 0.0);
        let preds = fit.predict(x.view()).unwrap();
        assert!(preds.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn predict_rejects_column_mismatch() {
        let fit = LinearFit {
            intercept: 0.0,
            coefficients: array![1.0, 2.0],
            penalty_value: 0.0,
            feature_means: array![0.0, 0.0],
            feature_scales: array![1.0, 1.0],
        };
        assert!(fit.predict(Array2::<f64>::zeros((2, 3)).view()).is_err());
        let out = fit.predict(array![[3.0, 4.0]].view()).unwrap();
        assert!((out[0] - 11.0).abs() < 1e-15);
    }

    use ndarray::Array1;
    use rand::SeedableRng;
}
