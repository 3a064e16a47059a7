//! Cost model: standard contract, height dependence, time-model fitting
//! and constant time-per-gas repricing.

pub mod classify;
pub mod contract;
pub mod fit;
pub mod stats;

use thiserror::Error;

use crate::evm::Opcode;

pub use classify::{classify_bh_dependence, mean_time_series, Classification, ClassificationResult, Weighting, DEFAULT_THRESHOLD};
pub use contract::{
    avg_prog_gas, avg_prog_time, avg_prog_tpg, contract_from_windows, dependent_time_share, estimate_standard_contract,
    extrapolate, propose_gas_model, Curve, Extrapolated, FitInfo, GasModel, Materialized, ObservedGas, OpcodeModel,
    PerOpcode, StandardContract, TimeModel,
};
pub use fit::{bic, constant_time_model, fit_all, fit_time_model, polyfit, select_polynomial, split_indices, FitOptions};
pub use stats::{
    chi_square_decision, chi_square_normality, kendall, pearson, relative_difference, weighted_pearson, ChiSquareResult,
    KendallTrend,
};

/// Default target time per unit gas, nanoseconds.
pub const DEFAULT_C: f64 = 5.0;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("no model for {0}")]
    MissingModel(Opcode),
    #[error("{0} is not classified")]
    Unclassified(Opcode),
    #[error("average gas is zero")]
    ZeroGas,
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("singular least-squares system")]
    Singular,
    #[error("time per gas constant must be positive, got {0}")]
    InvalidConstant(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
