//! Small dense symmetric solves and shared summary-statistic helpers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Relative pivot tolerance shared by the dual Newton system and the
/// variance-estimator inversions.
pub const PIVOT_TOL: f64 = 1e-12;

/// Solve `a x = b` for symmetric positive semi-definite `a` through a
/// rank-revealing eigendecomposition. Directions whose eigenvalue falls below
/// `PIVOT_TOL` times the largest eigenvalue are discarded, which is equivalent
/// to dropping redundant constraints. Returns `None` when `a` has no usable
/// spectrum at all (numerically zero matrix).
pub fn sym_psd_solve(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    let r = a.nrows();
    debug_assert_eq!(r, a.ncols());
    debug_assert_eq!(r, b.len());
    if r == 0 {
        return Some(Array1::zeros(0));
    }
    let m = nalgebra::DMatrix::from_fn(r, r, |i, j| a[[i, j]]);
    let eig = m.symmetric_eigen();
    let max_eig = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_eig.is_finite() || max_eig <= 0.0 {
        return None;
    }
    let cut = PIVOT_TOL * max_eig;
    let mut x = Array1::zeros(r);
    let mut used = 0usize;
    for k in 0..r {
        let ev = eig.eigenvalues[k];
        if ev > cut {
            used += 1;
            let v = eig.eigenvectors.column(k);
            let proj: f64 = (0..r).map(|i| v[i] * b[i]).sum();
            let scale = proj / ev;
            for i in 0..r {
                x[i] += scale * v[i];
            }
        }
    }
    if used == 0 {
        None
    } else {
        Some(x)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased (n-1) sample variance; 0 for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)
}

/// Mean-square about zero.
pub fn mean_square(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64
}

/// Population (1/n) variance, used where a plug-in moment is wanted.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Pearson correlation; 0 when either side is (numerically) constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Outer-product accumulation helper: `acc += w * v vᵀ`.
pub fn add_scaled_outer(acc: &mut Array2<f64>, v: ArrayView1<f64>, w: f64) {
    let r = v.len();
    for i in 0..r {
        let wi = w * v[i];
        for j in 0..r {
            acc[[i, j]] += wi * v[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn psd_solve_matches_direct_inverse_on_full_rank() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![1.0, 2.0];
        let x = sym_psd_solve(a.view(), b.view()).unwrap();
        // solve by hand: det = 11, inv = [[3,-1],[-1,4]]/11
        assert!((x[0] - (3.0 - 2.0) / 11.0).abs() < 1e-12);
        assert!((x[1] - (-1.0 + 8.0) / 11.0).abs() < 1e-12);
    }

    #[test]
    fn psd_solve_discards_null_directions() {
        // rank-1 matrix v vᵀ with v = (1, 1); b aligned with v
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![2.0, 2.0];
        let x = sym_psd_solve(a.view(), b.view()).unwrap();
        // minimum-norm solution is (1, 1)
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
        let zero = array![[0.0, 0.0], [0.0, 0.0]];
        assert!(sym_psd_solve(zero.view(), b.view()).is_none());
    }

    #[test]
    fn correlation_of_constant_is_zero() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
        assert!((r - 1.0).abs() < 1e-12);
    }
}
