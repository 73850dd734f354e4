//! ATE estimators: difference in means, cross-fitted regression adjustment,
//! the EL estimator with its variance recovery, the no-split EL comparator,
//! and Wald intervals.

use ndarray::{Array1, Array2};

use crate::data::{Arm, TrialDataset};
use crate::el::{self, ArmConstraints, ELSolution};
use crate::error::{Error, Result};
use crate::folds::FoldPlan;
use crate::linalg;
use crate::normal::two_sided_z;
use crate::predictions::NuisancePredictions;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Wald interval θ̂ ± z·se at central `level`.
pub fn wald_ci(theta_hat: f64, se: f64, level: f64) -> Interval {
    assert!(se >= 0.0, "standard error must be nonnegative");
    assert!(level > 0.0 && level < 1.0, "level must be in (0,1)");
    let z = two_sided_z(level);
    Interval {
        lo: theta_hat - z * se,
        hi: theta_hat + z * se,
    }
}

/// Point estimate with Wald intervals and run metadata.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub method: String,
    pub model: String,
    pub theta_hat: f64,
    pub se: f64,
    pub ci95: Interval,
    pub ci99: Interval,
    pub n: usize,
    pub p: usize,
    pub k: Option<usize>,
    pub model_names: Vec<String>,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    #[allow(clippy::too_many_arguments)]
    pub fn from_point(
        method: &str,
        model: &str,
        theta_hat: f64,
        se: f64,
        n: usize,
        p: usize,
        k: Option<usize>,
        model_names: Vec<String>,
        warnings: Vec<String>,
    ) -> Self {
        Self {
            method: method.to_string(),
            model: model.to_string(),
            theta_hat,
            se,
            ci95: wald_ci(theta_hat, se, 0.95),
            ci99: wald_ci(theta_hat, se, 0.99),
            n,
            p,
            k,
            model_names,
            warnings,
        }
    }
}

/// Difference in arm means with the classical two-sample variance.
pub fn diff_in_means(dataset: &TrialDataset) -> EstimateReport {
    let y = dataset.y();
    let grab = |arm: Arm| -> Vec<f64> {
        dataset.arm_indices(arm).iter().map(|&i| y[i]).collect()
    };
    let y1 = grab(Arm::Treated);
    let y0 = grab(Arm::Control);
    let theta = linalg::mean(&y1) - linalg::mean(&y0);
    let var = linalg::sample_variance(&y1) / y1.len() as f64
        + linalg::sample_variance(&y0) / y0.len() as f64;
    EstimateReport::from_point(
        "dim",
        "",
        theta,
        var.sqrt(),
        dataset.n(),
        dataset.p(),
        None,
        Vec::new(),
        Vec::new(),
    )
}

/// Cross-fitted regression-adjusted estimator: the average over folds of the
/// fold-level solutions of the empirical efficient-score equation, with the
/// fold-conditional plug-in variance. Requires a single model per arm (r = 1).
pub fn wdtt_estimate(
    dataset: &TrialDataset,
    plan: &FoldPlan,
    preds: &NuisancePredictions,
) -> Result<EstimateReport> {
    if preds.r() != 1 {
        return Err(Error::InvalidConfig(format!(
            "wdtt needs exactly one model per arm, got r = {}",
            preds.r()
        )));
    }
    if preds.n() != dataset.n() {
        return Err(Error::ShapeMismatch("predictions/dataset size mismatch".into()));
    }
    let y = dataset.y();
    let g1 = preds.arm_matrix(Arm::Treated);
    let g0 = preds.arm_matrix(Arm::Control);
    let n = dataset.n() as f64;
    let k = plan.k();
    let mut theta_sum = 0.0;
    let mut var_sum = 0.0;
    for fold in 0..k {
        let t_units = plan.arm_fold(Arm::Treated, fold);
        let c_units = plan.arm_fold(Arm::Control, fold);
        if t_units.is_empty() || c_units.is_empty() {
            return Err(Error::Internal(format!("fold {fold} lost an arm")));
        }
        if t_units.len() < 2 || c_units.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "fold {fold} has a single-unit arm; its conditional variance is undefined"
            )));
        }
        let nk = (t_units.len() + c_units.len()) as f64;
        let nk1 = t_units.len() as f64;
        let nk0 = c_units.len() as f64;
        let delta_k = nk1 / nk;
        // fold score equation is linear in θ, so the solution is the mean of
        // the per-unit score pieces
        let mut score = 0.0;
        for &i in t_units.iter() {
            score += (y[i] - g1[[i, 0]]) / delta_k + g1[[i, 0]] - g0[[i, 0]];
        }
        for &i in c_units.iter() {
            score += -(y[i] - g0[[i, 0]]) / (1.0 - delta_k) + g1[[i, 0]] - g0[[i, 0]];
        }
        theta_sum += score / nk;
        // conditional variance of the fold estimator given the fitted models
        let adjusted = |i: usize| y[i] - (nk0 / nk) * g1[[i, 0]] - (nk1 / nk) * g0[[i, 0]];
        let z1: Vec<f64> = t_units.iter().map(|&i| adjusted(i)).collect();
        let z0: Vec<f64> = c_units.iter().map(|&i| adjusted(i)).collect();
        let var_k = linalg::sample_variance(&z1) / nk1 + linalg::sample_variance(&z0) / nk0;
        var_sum += (nk / n) * (nk / n) * var_k;
    }
    let theta = theta_sum / k as f64;
    Ok(EstimateReport::from_point(
        "wdtt",
        &preds.model_names()[0],
        theta,
        var_sum.sqrt(),
        dataset.n(),
        dataset.p(),
        Some(k),
        preds.model_names().to_vec(),
        Vec::new(),
    ))
}

/// EL fit for both arms: per-arm constraints, dual solutions, and the
/// weighted arm means.
#[derive(Debug, Clone)]
pub struct ElAteFit {
    pub theta_hat: f64,
    pub theta_treated: f64,
    pub theta_control: f64,
    /// Indexed by `Arm::index()` (0 = control, 1 = treated).
    pub constraints: [ArmConstraints; 2],
    pub solutions: [ELSolution; 2],
}

impl ElAteFit {
    pub fn degenerate_arms(&self) -> Vec<Arm> {
        Arm::BOTH
            .iter()
            .copied()
            .filter(|a| self.constraints[a.index()].is_degenerate())
            .collect()
    }

    /// EL weight of each unit under its own arm's solution.
    pub fn unit_weights(&self, dataset: &TrialDataset) -> Vec<f64> {
        let mut w = vec![0.0; dataset.n()];
        for arm in Arm::BOTH {
            let cons = &self.constraints[arm.index()];
            let sol = &self.solutions[arm.index()];
            for (pos, &unit) in cons.arm_units().iter().enumerate() {
                w[unit] = sol.weights[pos];
            }
        }
        w
    }
}

/// Solve the per-arm EL problems on cross-fitted predictions and form the
/// weighted-mean ATE. Arms whose constraint columns all degenerate fall back
/// to uniform weights (the arm mean).
pub fn el_ate_from_predictions(
    dataset: &TrialDataset,
    preds: &NuisancePredictions,
) -> Result<ElAteFit> {
    let mut constraints = Vec::with_capacity(2);
    let mut solutions = Vec::with_capacity(2);
    for arm in Arm::BOTH {
        let cons = el::center_constraints(preds, dataset, arm)?;
        let sol = if cons.is_degenerate() {
            ELSolution::uniform(cons.arm_size())
        } else {
            let g = cons.arm_rows();
            el::solve_el_dual(g.view(), el::DUAL_TOL, el::MAX_NEWTON_ITER)?
        };
        constraints.push(cons);
        solutions.push(sol);
    }
    let y = dataset.y();
    let weighted_mean = |arm: Arm, cons: &ArmConstraints, sol: &ELSolution| -> f64 {
        debug_assert_eq!(cons.arm(), arm);
        cons.arm_units()
            .iter()
            .zip(sol.weights.iter())
            .map(|(&i, w)| w * y[i])
            .sum()
    };
    let theta_control = weighted_mean(Arm::Control, &constraints[0], &solutions[0]);
    let theta_treated = weighted_mean(Arm::Treated, &constraints[1], &solutions[1]);
    let constraints: [ArmConstraints; 2] = constraints.try_into().map_err(|_| {
        Error::Internal("arm constraint assembly".into())
    })?;
    let solutions: [ELSolution; 2] = solutions
        .try_into()
        .map_err(|_| Error::Internal("arm solution assembly".into()))?;
    Ok(ElAteFit {
        theta_hat: theta_treated - theta_control,
        theta_treated,
        theta_control,
        constraints,
        solutions,
    })
}

/// The EL point estimate on cross-fitted predictions (the data-splitting EL
/// estimator). The plan is only validated for consistency; the predictions
/// already encode the fold structure.
pub fn mdel_estimate(
    dataset: &TrialDataset,
    plan: &FoldPlan,
    preds: &NuisancePredictions,
) -> Result<ElAteFit> {
    if plan.assignment().len() != dataset.n() {
        return Err(Error::ShapeMismatch("plan/dataset size mismatch".into()));
    }
    el_ate_from_predictions(dataset, preds)
}

/// Per-unit values of the estimated influence function entering the EL
/// variance estimator.
#[derive(Debug, Clone)]
pub struct InfluenceValues {
    pub values: Vec<f64>,
}

/// Influence-function values ψᵢ of the EL estimator: the efficient-score
/// plug-in with the EL-weighted correction terms Ĵᵀ Ŝ⁻¹ Ĝ for each arm.
pub fn mdel_influence(
    dataset: &TrialDataset,
    fit: &ElAteFit,
    theta_treated: f64,
    theta_control: f64,
) -> Result<InfluenceValues> {
    let n = dataset.n();
    let nf = n as f64;
    let n1 = dataset.n1() as f64;
    let n0 = dataset.n0() as f64;
    let delta_hat = n1 / nf;
    let weights = fit.unit_weights(dataset);
    // correction direction w = Ŝ⁻¹ Ĵ per arm (zero when the arm is degenerate)
    let mut corrections: Vec<Option<Array1<f64>>> = vec![None, None];
    for arm in Arm::BOTH {
        let cons = &fit.constraints[arm.index()];
        let r = cons.active_columns().len();
        if r == 0 {
            continue;
        }
        let y = dataset.y();
        let mut j_hat = Array1::<f64>::zeros(r);
        for (pos, &unit) in cons.arm_units().iter().enumerate() {
            let w = fit.solutions[arm.index()].weights[pos];
            let row = cons.unit_row(unit);
            j_hat.scaled_add(w * y[unit], &row);
        }
        let mut s_hat = Array2::<f64>::zeros((r, r));
        for v in Arm::BOTH {
            let scale = dataset.arm_size(v) as f64 / nf;
            for &unit in dataset.arm_indices(v) {
                let row = cons.unit_row(unit);
                linalg::add_scaled_outer(&mut s_hat, row.view(), scale * weights[unit]);
            }
        }
        let w_dir = linalg::sym_psd_solve(s_hat.view(), j_hat.view()).ok_or_else(|| {
            Error::VarianceNotIdentifiable(format!(
                "second-moment matrix of arm {:?} constraints is numerically zero",
                arm
            ))
        })?;
        corrections[arm.index()] = Some(w_dir);
    }
    let y = dataset.y();
    let mut values = Vec::with_capacity(n);
    for unit in 0..n {
        let di = if dataset.is_treated(unit) { 1.0 } else { 0.0 };
        let mut psi = (nf / n1) * di * (y[unit] - theta_treated)
            - (nf / n0) * (1.0 - di) * (y[unit] - theta_control);
        if let Some(w1) = &corrections[Arm::Treated.index()] {
            let g_row = fit.constraints[Arm::Treated.index()].unit_row(unit);
            psi -= (nf / n1) * (di - delta_hat) * w1.dot(&g_row);
        }
        if let Some(w0) = &corrections[Arm::Control.index()] {
            let g_row = fit.constraints[Arm::Control.index()].unit_row(unit);
            psi += (nf / n0) * (di - delta_hat) * w0.dot(&g_row);
        }
        values.push(psi);
    }
    Ok(InfluenceValues { values })
}

/// Variance estimator of the EL ATE: the EL-weighted mean square of the
/// influence values, already on the variance-of-θ̂ scale (1/n folded in).
pub fn mdel_variance(
    dataset: &TrialDataset,
    fit: &ElAteFit,
    theta_treated: f64,
    theta_control: f64,
) -> Result<f64> {
    let influence = mdel_influence(dataset, fit, theta_treated, theta_control)?;
    let nf = dataset.n() as f64;
    let weights = fit.unit_weights(dataset);
    let mut sigma2 = 0.0;
    for unit in 0..dataset.n() {
        let arm_frac = dataset.arm_size(dataset.arm_of(unit)) as f64 / nf;
        let psi = influence.values[unit];
        sigma2 += arm_frac * weights[unit] * psi * psi;
    }
    sigma2 /= nf;
    if !(sigma2 > 0.0) {
        return Err(Error::VarianceNotIdentifiable(format!(
            "nonpositive variance estimate {sigma2}"
        )));
    }
    Ok(sigma2)
}

/// Full EL report: point estimate, recovered variance, Wald intervals.
pub fn mdel_report(
    dataset: &TrialDataset,
    plan: &FoldPlan,
    preds: &NuisancePredictions,
    model_label: &str,
) -> Result<EstimateReport> {
    let fit = mdel_estimate(dataset, plan, preds)?;
    let sigma2 = mdel_variance(dataset, &fit, fit.theta_treated, fit.theta_control)?;
    let mut warnings = Vec::new();
    if !fit.degenerate_arms().is_empty() {
        warnings.push("degenerate constraints".to_string());
    }
    Ok(EstimateReport::from_point(
        "mdel",
        model_label,
        fit.theta_hat,
        sigma2.sqrt(),
        dataset.n(),
        dataset.p(),
        Some(plan.k()),
        preds.model_names().to_vec(),
        warnings,
    ))
}

/// No-splitting EL comparator: the same EL solve and variance formula run on
/// predictions from models fit once on each full arm (self-fitting). Its
/// inference is deliberately invalid with ML nuisances; it exists for the
/// undercoverage experiments.
pub fn nosplit_el(
    dataset: &TrialDataset,
    preds: &NuisancePredictions,
    model_label: &str,
) -> Result<EstimateReport> {
    let fit = el_ate_from_predictions(dataset, preds)?;
    let sigma2 = mdel_variance(dataset, &fit, fit.theta_treated, fit.theta_control)?;
    let mut warnings =
        vec!["no-split EL: split-estimator variance formula reused as a proxy".to_string()];
    if !fit.degenerate_arms().is_empty() {
        warnings.push("degenerate constraints".to_string());
    }
    Ok(EstimateReport::from_point(
        "nosplit_el",
        model_label,
        fit.theta_hat,
        sigma2.sqrt(),
        dataset.n(),
        dataset.p(),
        None,
        preds.model_names().to_vec(),
        warnings,
    ))
}
