use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Dataset construction failed; `violations` lists every broken invariant.
    #[error("invalid dataset: {}", violations.join("; "))]
    InvalidDataset { violations: Vec<String> },

    #[error("insufficient arm size for {k} folds (treated {n1}, control {n0})")]
    InsufficientArmSize { k: usize, n1: usize, n0: usize },

    #[error("fold too large for nuisance fitting: arm {arm} fold {fold} leaves {left} training units (need >= 3)")]
    FoldTooLarge { arm: u8, fold: usize, left: usize },

    #[error("EL infeasible: {0}")]
    ElInfeasible(String),

    #[error("variance not identifiable: {0}")]
    VarianceNotIdentifiable(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("internal error: {0}")]
    Internal(String),
}
