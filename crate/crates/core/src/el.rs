//! Empirical-likelihood machinery for one arm: constraint centering,
//! feasibility checking, the dual Newton solver, and weight recovery.
//!
//! For arm d with units i and centered constraints Ĝᵢ = ĝ⁽ᵈ⁾(Xᵢ) − ξ̂⁽ᵈ⁾,
//! the dual profile ℓ(λ) = Σᵢ log(1 + λᵀĜᵢ) is concave; its stationary point
//! λ̂ yields the EL weights p̂ᵢ = 1 / (m (1 + λ̂ᵀĜᵢ)). During iteration the
//! logarithm is replaced below 1/m by a quadratic continuation (log-star) so
//! every trial step has a finite objective.

use ndarray::{Array1, Array2, ArrayView2};

use crate::data::{Arm, TrialDataset};
use crate::error::{Error, Result};
use crate::folds::FoldPlan;
use crate::linalg;
use crate::predictions::NuisancePredictions;

/// Tolerance on the sup-norm of the dual estimating function.
pub const DUAL_TOL: f64 = 1e-10;
/// Newton iteration cap.
pub const MAX_NEWTON_ITER: usize = 100;
/// Step-halving cap before declaring a stall.
const MAX_HALVINGS: usize = 40;

/// Centered constraints for one arm.
///
/// `xi_hat` is the mean of each prediction column over ALL n units (both
/// arms); `active` indexes the columns whose within-arm sample variance
/// clears the degeneracy floor. The full-sample centered matrix is retained
/// because the variance estimator also needs the other arm's rows.
#[derive(Debug, Clone)]
pub struct ArmConstraints {
    arm: Arm,
    xi_hat: Array1<f64>,
    active: Vec<usize>,
    centered_all: Array2<f64>,
    arm_units: Vec<usize>,
}

impl ArmConstraints {
    pub fn arm(&self) -> Arm {
        self.arm
    }

    /// ξ̂ for every model column (before degeneracy filtering).
    pub fn xi_hat(&self) -> &Array1<f64> {
        &self.xi_hat
    }

    /// Indices of columns surviving degeneracy filtering.
    pub fn active_columns(&self) -> &[usize] {
        &self.active
    }

    pub fn is_degenerate(&self) -> bool {
        self.active.is_empty()
    }

    /// Arm size m.
    pub fn arm_size(&self) -> usize {
        self.arm_units.len()
    }

    pub fn arm_units(&self) -> &[usize] {
        &self.arm_units
    }

    /// Centered active-column rows for the arm's own units (m × r′), the
    /// matrix the EL solve runs on.
    pub fn arm_rows(&self) -> Array2<f64> {
        let mut g = Array2::zeros((self.arm_units.len(), self.active.len()));
        for (row, &unit) in self.arm_units.iter().enumerate() {
            for (col, &j) in self.active.iter().enumerate() {
                g[[row, col]] = self.centered_all[[unit, j]];
            }
        }
        g
    }

    /// Centered active-column row for an arbitrary unit (either arm).
    pub fn unit_row(&self, unit: usize) -> Array1<f64> {
        Array1::from_iter(self.active.iter().map(|&j| self.centered_all[[unit, j]]))
    }
}

/// Center one arm's prediction columns by their full-sample means and drop
/// degenerate columns (within-arm variance at or below
/// `1e-10 * (mean square + 1)`).
pub fn center_constraints(
    preds: &NuisancePredictions,
    dataset: &TrialDataset,
    arm: Arm,
) -> Result<ArmConstraints> {
    if preds.n() != dataset.n() {
        return Err(Error::ShapeMismatch(format!(
            "predictions cover {} units, dataset has {}",
            preds.n(),
            dataset.n()
        )));
    }
    let mat = preds.arm_matrix(arm);
    let n = dataset.n();
    let r = preds.r();
    let xi_hat = Array1::from_iter((0..r).map(|j| mat.column(j).sum() / n as f64));
    let mut centered_all = mat.clone();
    for j in 0..r {
        centered_all.column_mut(j).mapv_inplace(|v| v - xi_hat[j]);
    }
    let arm_units = dataset.arm_indices(arm).to_vec();
    let mut active = Vec::new();
    for j in 0..r {
        let col: Vec<f64> = arm_units.iter().map(|&u| centered_all[[u, j]]).collect();
        let floor = 1e-10 * (linalg::mean_square(&col) + 1.0);
        if linalg::sample_variance(&col) > floor {
            active.push(j);
        }
    }
    Ok(ArmConstraints {
        arm,
        xi_hat,
        active,
        centered_all,
        arm_units,
    })
}

/// Outcome of the per-column convex-hull test.
#[derive(Debug, Clone)]
pub struct Feasibility {
    pub feasible: bool,
    pub column_min: Vec<f64>,
    pub column_max: Vec<f64>,
    /// Active-column positions failing min < 0 < max.
    pub violating: Vec<usize>,
}

/// Necessary per-column feasibility: each active column must change sign
/// (0 strictly inside its 1-D hull). Joint feasibility for several columns is
/// certified only by solver convergence.
pub fn feasibility_check(g: ArrayView2<f64>) -> Feasibility {
    let r = g.ncols();
    let mut column_min = vec![f64::INFINITY; r];
    let mut column_max = vec![f64::NEG_INFINITY; r];
    for row in g.rows() {
        for j in 0..r {
            column_min[j] = column_min[j].min(row[j]);
            column_max[j] = column_max[j].max(row[j]);
        }
    }
    let violating: Vec<usize> = (0..r)
        .filter(|&j| !(column_min[j] < 0.0 && column_max[j] > 0.0))
        .collect();
    Feasibility {
        feasible: violating.is_empty(),
        column_min,
        column_max,
        violating,
    }
}

/// Converged dual solution for one arm.
#[derive(Debug, Clone)]
pub struct ELSolution {
    /// Multiplier over the active columns (empty when the arm is degenerate).
    pub lambda: Array1<f64>,
    /// Per-unit weights, aligned with `ArmConstraints::arm_units`.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Final sup-norm of the dual estimating function.
    pub max_grad: f64,
    pub feasible: bool,
}

impl ELSolution {
    /// Uniform-weight solution for a degenerate (no active constraint) arm.
    pub fn uniform(m: usize) -> Self {
        Self {
            lambda: Array1::zeros(0),
            weights: vec![1.0 / m as f64; m],
            iterations: 0,
            max_grad: 0.0,
            feasible: true,
        }
    }
}

/// log-star: log z above `eps`, quadratic continuation below, matching value
/// and first two derivatives at `eps`.
fn log_star(z: f64, eps: f64) -> f64 {
    if z >= eps {
        z.ln()
    } else {
        eps.ln() - 1.5 + 2.0 * z / eps - z * z / (2.0 * eps * eps)
    }
}

fn log_star_d1(z: f64, eps: f64) -> f64 {
    if z >= eps {
        1.0 / z
    } else {
        2.0 / eps - z / (eps * eps)
    }
}

fn log_star_d2(z: f64, eps: f64) -> f64 {
    if z >= eps {
        -1.0 / (z * z)
    } else {
        -1.0 / (eps * eps)
    }
}

/// Dual objective, gradient, and Hessian at a multiplier.
#[derive(Debug, Clone)]
pub struct DualState {
    pub lambda: Array1<f64>,
    pub objective: f64,
    pub gradient: Array1<f64>,
    pub hessian: Array2<f64>,
    pub halvings: usize,
}

/// Evaluate ℓ(λ) = Σᵢ log*(1 + λᵀGᵢ) with its gradient and Hessian. The
/// log-star threshold is 1/m with m the number of rows.
pub fn dual_state(g: ArrayView2<f64>, lambda: &Array1<f64>) -> DualState {
    let m = g.nrows();
    let r = g.ncols();
    let eps = 1.0 / m as f64;
    let mut objective = 0.0;
    let mut gradient = Array1::zeros(r);
    let mut hessian = Array2::zeros((r, r));
    for row in g.rows() {
        let z = 1.0 + row.dot(lambda);
        objective += log_star(z, eps);
        let d1 = log_star_d1(z, eps);
        let d2 = log_star_d2(z, eps);
        for a in 0..r {
            gradient[a] += d1 * row[a];
        }
        linalg::add_scaled_outer(&mut hessian, row, d2);
    }
    DualState {
        lambda: lambda.clone(),
        objective,
        gradient,
        hessian,
        halvings: 0,
    }
}

/// Sup-norm of the dual estimating function (1/m) Σᵢ Gᵢ / (1 + λᵀGᵢ),
/// infinite if any denominator is nonpositive.
fn estimating_residual(g: ArrayView2<f64>, lambda: &Array1<f64>) -> f64 {
    let m = g.nrows() as f64;
    let r = g.ncols();
    let mut acc = vec![0.0f64; r];
    for row in g.rows() {
        let z = 1.0 + row.dot(lambda);
        if z <= 0.0 {
            return f64::INFINITY;
        }
        for a in 0..r {
            acc[a] += row[a] / z;
        }
    }
    acc.iter().map(|v| (v / m).abs()).fold(0.0, f64::max)
}

/// Modified Newton-Raphson solve of the EL dual for one arm.
///
/// `g` holds the centered active-column rows of the arm (m × r′). Converges
/// when the estimating function's sup-norm drops below `tol` and every
/// 1 + λᵀGᵢ exceeds 1/(10 m); otherwise reports infeasibility.
pub fn solve_el_dual(g: ArrayView2<f64>, tol: f64, max_iter: usize) -> Result<ELSolution> {
    let m = g.nrows();
    let r = g.ncols();
    if r == 0 {
        return Ok(ELSolution::uniform(m));
    }
    if m == 0 {
        return Err(Error::Internal("empty arm in EL solve".into()));
    }
    let feas = feasibility_check(g);
    if !feas.feasible {
        return Err(Error::ElInfeasible(format!(
            "0 outside the hull of constraint column(s) {:?}",
            feas.violating
        )));
    }
    let margin = 1.0 / (10.0 * m as f64);
    let mut lambda = Array1::zeros(r);
    let mut state = dual_state(g, &lambda);
    for iter in 0..max_iter {
        let residual = estimating_residual(g, &lambda);
        let min_z = g
            .rows()
            .into_iter()
            .map(|row| 1.0 + row.dot(&lambda))
            .fold(f64::INFINITY, f64::min);
        if residual <= tol && min_z > margin {
            let weights = el_weights(&lambda, g, m)?;
            return Ok(ELSolution {
                lambda,
                weights,
                iterations: iter,
                max_grad: residual,
                feasible: true,
            });
        }
        // Newton direction on -H (PSD); null-space directions discarded.
        let neg_h = state.hessian.mapv(|v| -v);
        let dir = linalg::sym_psd_solve(neg_h.view(), state.gradient.view())
            .ok_or_else(|| Error::ElInfeasible("singular dual Hessian".into()))?;
        let ascent: f64 = dir.dot(&state.gradient);
        if !(ascent > 0.0) || !dir.iter().all(|v| v.is_finite()) {
            return Err(Error::ElInfeasible("no ascent direction; stalled".into()));
        }
        let mut t = 1.0;
        let mut halvings = 0;
        let accepted = loop {
            let cand = &lambda + &dir.mapv(|v| v * t);
            let cand_state = dual_state(g, &cand);
            if cand_state.objective.is_finite() && cand_state.objective >= state.objective {
                break Some((cand, cand_state, halvings));
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                break None;
            }
            t *= 0.5;
        };
        match accepted {
            Some((new_lambda, mut new_state, h)) => {
                new_state.halvings = h;
                lambda = new_lambda;
                state = new_state;
            }
            None => {
                return Err(Error::ElInfeasible("step-halving stalled".into()));
            }
        }
    }
    Err(Error::ElInfeasible(format!(
        "no convergence in {max_iter} Newton iterations (residual {:.3e})",
        estimating_residual(g, &lambda)
    )))
}

/// EL weights p̂ᵢ = 1 / (m (1 + λᵀGᵢ)) for a converged multiplier.
pub fn el_weights(lambda: &Array1<f64>, g: ArrayView2<f64>, m: usize) -> Result<Vec<f64>> {
    let mut weights = Vec::with_capacity(g.nrows());
    for row in g.rows() {
        let z = 1.0 + row.dot(lambda);
        if z <= 0.0 {
            return Err(Error::Internal(
                "nonpositive EL denominator; solver contract violated".into(),
            ));
        }
        weights.push(1.0 / (m as f64 * z));
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn one_col(values: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
    }

    /// Bisection on the monotone 1-D dual gradient Σ Gᵢ/(1+λGᵢ) = 0.
    fn bisect_lambda(g: &[f64]) -> f64 {
        let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(gmin < 0.0 && gmax > 0.0);
        let width = 1.0 / gmax + 1.0 / (-gmin);
        let mut lo = -1.0 / gmax + 1e-14 * width;
        let mut hi = -1.0 / gmin - 1e-14 * width;
        let f = |lam: f64| -> f64 { g.iter().map(|&gi| gi / (1.0 + lam * gi)).sum() };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn centered_rows_solve_at_zero() {
        let g = one_col(&[-1.0, 0.0, 1.0]);
        let sol = solve_el_dual(g.view(), DUAL_TOL, MAX_NEWTON_ITER).unwrap();
        assert!(sol.lambda[0].abs() < 1e-12);
        for w in &sol.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn newton_matches_bisection_oracle() {
        let vals = [-1.0, 0.5, 1.0];
        let g = one_col(&vals);
        let sol = solve_el_dual(g.view(), DUAL_TOL, MAX_NEWTON_ITER).unwrap();
        let oracle = bisect_lambda(&vals);
        assert!(
            (sol.lambda[0] - oracle).abs() < 1e-10,
            "newton {} vs bisection {}",
            sol.lambda[0],
            oracle
        );
        let s: f64 = sol.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positive_column_is_infeasible() {
        let g = one_col(&[1.0, 2.0, 3.0]);
        let err = solve_el_dual(g.view(), DUAL_TOL, MAX_NEWTON_ITER).unwrap_err();
        assert!(err.to_string().contains("EL infeasible"), "{err}");
    }

    #[test]
    fn feasibility_predicate() {
        let f = feasibility_check(one_col(&[-1.0, 2.0, 3.0]).view());
        assert!(f.feasible);
        let f = feasibility_check(one_col(&[1.0, 2.0, 3.0]).view());
        assert!(!f.feasible);
        assert_eq!(f.violating, vec![0]);
    }

    #[test]
    fn weights_satisfy_constraint_and_scaling_invariance() {
        let vals = [-2.0, -0.3, 0.4, 1.1, 0.9];
        let g = one_col(&vals);
        let sol = solve_el_dual(g.view(), DUAL_TOL, MAX_NEWTON_ITER).unwrap();
        let mut moment = 0.0;
        for (w, &gi) in sol.weights.iter().zip(vals.iter()) {
            moment += w * gi;
        }
        assert!(moment.abs() < 1e-8);
        // rescale constraints by a ≠ 0: λ scales by 1/a, weights unchanged
        let a = -3.5;
        let scaled = one_col(&vals.iter().map(|v| v * a).collect::<Vec<_>>());
        let sol2 = solve_el_dual(scaled.view(), DUAL_TOL, MAX_NEWTON_ITER).unwrap();
        assert!((sol2.lambda[0] - sol.lambda[0] / a).abs() < 1e-9);
        for (w1, w2) in sol.weights.iter().zip(sol2.weights.iter()) {
            assert!((w1 - w2).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_zero_gives_uniform_weights() {
        let g = one_col(&[-1.0, 0.2, 0.8]);
        let w = el_weights(&array![0.0], g.view(), 3).unwrap();
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn log_star_is_c2_at_threshold() {
        let eps = 0.25;
        for h in [1e-6, 1e-7] {
            let above = log_star(eps + h, eps);
            let below = log_star(eps - h, eps);
            assert!((above - below).abs() < 1e-5);
            assert!((log_star_d1(eps + h, eps) - log_star_d1(eps - h, eps)).abs() < 1e-4);
        }
        assert_eq!(log_star(0.5, 0.25), 0.5f64.ln());
    }

    #[test]
    fn two_column_solve_converges() {
        // r = 2 instance with correlated columns
        let g = Array2::from_shape_vec(
            (6, 2),
            vec![
                -1.0, -0.8, 0.5, 0.6, 1.0, 0.9, -0.2, 0.1, 0.4, -0.5, -0.7, -0.3,
            ],
        )
        .unwrap();
        let sol = solve_el_dual(g.view(), DUAL_TOL, MAX_NEWTON_ITER).unwrap();
        assert!(sol.feasible);
        let s: f64 = sol.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        for j in 0..2 {
            let m: f64 = sol
                .weights
                .iter()
                .zip(g.column(j).iter())
                .map(|(w, gi)| w * gi)
                .sum();
            assert!(m.abs() < 1e-8, "column {j} moment {m}");
        }
    }
}
