//! Per-arm fold assignment for cross-fitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Arm, TrialDataset};
use crate::error::{Error, Result};

/// Partition of the units into `k` folds, balanced within each arm: fold
/// sizes per arm differ by at most one.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    k: usize,
    assignment: Vec<usize>,
    // fold -> arm -> unit indices (dataset order restored after shuffling)
    members: Vec<[Vec<usize>; 2]>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Fold label (0-based) for every unit.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn fold_of(&self, unit: usize) -> usize {
        self.assignment[unit]
    }

    /// Units of `arm` inside fold `fold`.
    pub fn arm_fold(&self, arm: Arm, fold: usize) -> &[usize] {
        &self.members[fold][arm.index()]
    }

    /// All units inside fold `fold` (both arms), ascending.
    pub fn fold_units(&self, fold: usize) -> Vec<usize> {
        let mut all: Vec<usize> = self.members[fold][0]
            .iter()
            .chain(self.members[fold][1].iter())
            .copied()
            .collect();
        all.sort_unstable();
        all
    }

    /// Units of `arm` outside fold `fold` (the training complement).
    pub fn arm_complement(&self, arm: Arm, fold: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (f, per_arm) in self.members.iter().enumerate() {
            if f != fold {
                out.extend_from_slice(&per_arm[arm.index()]);
            }
        }
        out.sort_unstable();
        out
    }

    /// Rebuild a plan from an explicit assignment vector (used when replaying
    /// a plan onto permuted data). Fold labels must lie in `0..k` and every
    /// fold must be nonempty in both arms.
    pub fn from_assignment(dataset: &TrialDataset, k: usize, assignment: Vec<usize>) -> Result<Self> {
        if assignment.len() != dataset.n() {
            return Err(Error::ShapeMismatch(format!(
                "assignment length {} != n {}",
                assignment.len(),
                dataset.n()
            )));
        }
        if assignment.iter().any(|&f| f >= k) {
            return Err(Error::InvalidConfig(format!("fold label out of range 0..{k}")));
        }
        let mut members = vec![[Vec::new(), Vec::new()]; k];
        for (unit, &f) in assignment.iter().enumerate() {
            members[f][dataset.arm_of(unit).index()].push(unit);
        }
        Ok(Self { k, assignment, members })
    }
}

/// Shuffle each arm with a seeded RNG and deal units to folds round-robin,
/// so per-arm fold sizes differ by at most one. Deterministic given `seed`.
pub fn make_fold_plan(dataset: &TrialDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let (n1, n0) = (dataset.n1(), dataset.n0());
    if k < 2 || k > n1.min(n0) {
        return Err(Error::InsufficientArmSize { k, n1, n0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; dataset.n()];
    for arm in [Arm::Treated, Arm::Control] {
        let mut units = dataset.arm_indices(arm).to_vec();
        units.shuffle(&mut rng);
        for (pos, unit) in units.into_iter().enumerate() {
            assignment[unit] = pos % k;
        }
    }
    FoldPlan::from_assignment(dataset, k, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    fn dataset(n1: usize, n0: usize) -> TrialDataset {
        let n = n1 + n0;
        let y = Array1::from_shape_fn(n, |i| i as f64);
        let d = Array1::from_shape_fn(n, |i| if i < n1 { 1.0 } else { 0.0 });
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        TrialDataset::new(y, d, x).unwrap()
    }

    #[test]
    fn exact_divisibility_gives_equal_folds() {
        let ds = dataset(10, 10);
        let plan = make_fold_plan(&ds, 5, 42).unwrap();
        for f in 0..5 {
            assert_eq!(plan.arm_fold(Arm::Treated, f).len(), 2);
            assert_eq!(plan.arm_fold(Arm::Control, f).len(), 2);
        }
    }

    #[test]
    fn remainder_spread_within_one() {
        let ds = dataset(7, 9);
        let plan = make_fold_plan(&ds, 5, 3).unwrap();
        let mut sizes: Vec<usize> = (0..5).map(|f| plan.arm_fold(Arm::Treated, f).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 1, 2, 2]);
    }

    #[test]
    fn same_seed_same_assignment() {
        let ds = dataset(13, 11);
        let a = make_fold_plan(&ds, 4, 99).unwrap();
        let b = make_fold_plan(&ds, 4, 99).unwrap();
        assert_eq!(a.assignment(), b.assignment());
        let c = make_fold_plan(&ds, 4, 100).unwrap();
        assert_ne!(a.assignment(), c.assignment());
    }

    #[test]
    fn partition_covers_every_unit_once() {
        let ds = dataset(8, 6);
        let plan = make_fold_plan(&ds, 3, 7).unwrap();
        let mut seen = vec![0usize; ds.n()];
        for f in 0..3 {
            for &u in plan.fold_units(f).iter() {
                seen[u] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn k_out_of_range_rejected() {
        let ds = dataset(4, 9);
        let err = make_fold_plan(&ds, 5, 1).unwrap_err();
        assert!(err.to_string().contains("insufficient arm size"));
        assert!(make_fold_plan(&ds, 1, 1).is_err());
    }

    #[test]
    fn complement_excludes_fold() {
        let ds = dataset(6, 6);
        let plan = make_fold_plan(&ds, 3, 5).unwrap();
        for f in 0..3 {
            let comp = plan.arm_complement(Arm::Treated, f);
            for &u in plan.arm_fold(Arm::Treated, f) {
                assert!(!comp.contains(&u));
            }
            assert_eq!(comp.len() + plan.arm_fold(Arm::Treated, f).len(), 6);
        }
    }
}
