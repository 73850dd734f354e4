//! Trial data container and validation.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Treatment arm indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treated];

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn flag(self) -> u8 {
        self.index() as u8
    }
}

/// Outcomes, binary treatment assignments, and covariates for `n` units.
///
/// Immutable after construction; all invariants (matching lengths, two
/// nonempty arms, finite entries, binary treatment) are enforced by
/// [`TrialDataset::new`].
#[derive(Debug, Clone)]
pub struct TrialDataset {
    y: Array1<f64>,
    d: Vec<u8>,
    x: Array2<f64>,
    treated: Vec<usize>,
    control: Vec<usize>,
}

impl TrialDataset {
    /// Validate raw arrays and assemble a dataset. On failure the error lists
    /// every violated invariant, not just the first.
    pub fn new(y: Array1<f64>, d: Array1<f64>, x: Array2<f64>) -> Result<Self> {
        let mut violations = Vec::new();
        let n = y.len();
        if d.len() != n || x.nrows() != n {
            violations.push(format!(
                "lengths disagree: |y|={}, |d|={}, rows(x)={}",
                n,
                d.len(),
                x.nrows()
            ));
        }
        if n < 2 {
            violations.push(format!("need at least 2 units, got {n}"));
        }
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                violations.push(format!("y[{i}] is not finite"));
            }
        }
        let mut flags = Vec::with_capacity(d.len());
        for (i, v) in d.iter().enumerate() {
            if *v == 0.0 {
                flags.push(0u8);
            } else if *v == 1.0 {
                flags.push(1u8);
            } else {
                violations.push(format!("d[{i}] = {v} is not 0/1"));
                flags.push(0u8);
            }
        }
        for ((i, j), v) in x.indexed_iter() {
            if !v.is_finite() {
                violations.push(format!("x[{i},{j}] is not finite"));
            }
        }
        let n1: usize = flags.iter().map(|&f| f as usize).sum();
        if violations.is_empty() {
            if n1 == 0 {
                violations.push("treated arm empty".to_string());
            }
            if n1 == flags.len() {
                violations.push("control arm empty".to_string());
            }
        }
        if !violations.is_empty() {
            return Err(Error::InvalidDataset { violations });
        }
        let treated: Vec<usize> = (0..n).filter(|&i| flags[i] == 1).collect();
        let control: Vec<usize> = (0..n).filter(|&i| flags[i] == 0).collect();
        Ok(Self {
            y,
            d: flags,
            x,
            treated,
            control,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n1(&self) -> usize {
        self.treated.len()
    }

    pub fn n0(&self) -> usize {
        self.control.len()
    }

    /// Estimated assignment probability δ̂ = n₁/n.
    pub fn delta_hat(&self) -> f64 {
        self.n1() as f64 / self.n() as f64
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn treatment_flags(&self) -> &[u8] {
        &self.d
    }

    pub fn is_treated(&self, unit: usize) -> bool {
        self.d[unit] == 1
    }

    pub fn arm_of(&self, unit: usize) -> Arm {
        if self.is_treated(unit) {
            Arm::Treated
        } else {
            Arm::Control
        }
    }

    /// Unit indices belonging to `arm`, in dataset order.
    pub fn arm_indices(&self, arm: Arm) -> &[usize] {
        match arm {
            Arm::Treated => &self.treated,
            Arm::Control => &self.control,
        }
    }

    pub fn arm_size(&self, arm: Arm) -> usize {
        self.arm_indices(arm).len()
    }

    /// New dataset keeping only the covariate columns in `keep` (order
    /// preserved as given).
    pub fn select_columns(&self, keep: &[usize]) -> Result<Self> {
        for &j in keep {
            if j >= self.p() {
                return Err(Error::ShapeMismatch(format!(
                    "column {j} out of range (p = {})",
                    self.p()
                )));
            }
        }
        let mut x = Array2::zeros((self.n(), keep.len()));
        for (jj, &j) in keep.iter().enumerate() {
            x.column_mut(jj).assign(&self.x.column(j));
        }
        Ok(Self {
            y: self.y.clone(),
            d: self.d.clone(),
            x,
            treated: self.treated.clone(),
            control: self.control.clone(),
        })
    }
}
