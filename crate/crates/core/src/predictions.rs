//! Cross-fitted nuisance prediction container.

use ndarray::Array2;

use crate::data::Arm;
use crate::error::{Error, Result};

/// Per-arm matrices of cross-fitted outcome-regression predictions.
///
/// For arm `d`, entry `(i, j)` is model `j`'s prediction of the arm-`d`
/// conditional outcome mean at unit `i`'s covariates, where the fit was
/// trained on arm-`d` units outside unit `i`'s fold. Every unit gets a
/// prediction from both arms' regressions.
#[derive(Debug, Clone)]
pub struct NuisancePredictions {
    model_names: Vec<String>,
    per_arm: [Array2<f64>; 2],
}

impl NuisancePredictions {
    pub fn new(
        model_names: Vec<String>,
        control: Array2<f64>,
        treated: Array2<f64>,
    ) -> Result<Self> {
        let r = model_names.len();
        if r == 0 {
            return Err(Error::InvalidConfig("need at least one model".into()));
        }
        if control.ncols() != r || treated.ncols() != r {
            return Err(Error::ShapeMismatch(format!(
                "prediction matrices must have r = {r} columns"
            )));
        }
        if control.nrows() != treated.nrows() {
            return Err(Error::ShapeMismatch(
                "arm prediction matrices disagree on n".into(),
            ));
        }
        for m in [&control, &treated] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Internal("non-finite nuisance prediction".into()));
            }
        }
        Ok(Self {
            model_names,
            per_arm: [control, treated],
        })
    }

    pub fn n(&self) -> usize {
        self.per_arm[0].nrows()
    }

    /// Number of models r.
    pub fn r(&self) -> usize {
        self.model_names.len()
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    /// The n×r prediction matrix of arm `arm`'s outcome regressions.
    pub fn arm_matrix(&self, arm: Arm) -> &Array2<f64> {
        &self.per_arm[arm.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn shape_checks() {
        let ok = NuisancePredictions::new(
            vec!["lasso".into()],
            array![[1.0], [2.0]],
            array![[3.0], [4.0]],
        );
        assert!(ok.is_ok());
        let bad = NuisancePredictions::new(
            vec!["lasso".into()],
            array![[1.0, 2.0], [2.0, 3.0]],
            array![[3.0], [4.0]],
        );
        assert!(bad.is_err());
        let nan = NuisancePredictions::new(
            vec!["lasso".into()],
            array![[f64::NAN], [2.0]],
            array![[3.0], [4.0]],
        );
        assert!(nan.is_err());
    }
}
