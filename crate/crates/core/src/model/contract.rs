use std::collections::BTreeMap;

use serde::Serialize;

use super::classify::ClassificationResult;
use super::ModelError;
use crate::chain::ContractTally;
use crate::evm::schedule::{eval_poly, materialize_gas};
use crate::evm::{GasRule, GasSchedule, Opcode};
use crate::instrument::WindowAggregate;

/// An idealized contract: `l_p` instructions per invocation drawn with
/// frequencies `f_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardContract {
    l_p: f64,
    f_p: BTreeMap<Opcode, f64>,
}

impl StandardContract {
    pub fn new(l_p: f64, f_p: BTreeMap<Opcode, f64>) -> Result<Self, ModelError> {
        if !(l_p > 0.0 && l_p.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("l_p {l_p}")));
        }
        if let Some((op, f)) = f_p.iter().find(|(_, f)| !(**f >= 0.0 && f.is_finite())) {
            return Err(ModelError::InvalidParameter(format!("frequency of {op} is {f}")));
        }
        let sum: f64 = f_p.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidParameter(format!("frequencies sum to {sum}")));
        }
        Ok(Self { l_p, f_p })
    }

    /// Normalizes nonnegative weights into `f_p`.
    pub fn from_counts(l_p: f64, counts: impl IntoIterator<Item = (Opcode, f64)>) -> Result<Self, ModelError> {
        let counts: BTreeMap<Opcode, f64> = counts.into_iter().filter(|(_, c)| *c > 0.0).collect();
        let total: f64 = counts.values().sum();
        if total <= 0.0 {
            return Err(ModelError::InsufficientData("no instruction counts".into()));
        }
        Self::new(l_p, counts.into_iter().map(|(op, c)| (op, c / total)).collect())
    }

    pub fn l_p(&self) -> f64 {
        self.l_p
    }

    pub fn f_p(&self) -> &BTreeMap<Opcode, f64> {
        &self.f_p
    }

    fn active(&self) -> impl Iterator<Item = (Opcode, f64)> + '_ {
        self.f_p.iter().filter(|(_, f)| **f > 0.0).map(|(op, f)| (*op, *f))
    }
}

/// `l_p` = mean instructions per successful transaction; `f_p` = pooled
/// opcode counts, normalized.
pub fn estimate_standard_contract(tally: &ContractTally) -> Result<StandardContract, ModelError> {
    if tally.transactions == 0 {
        return Err(ModelError::InsufficientData("no successful transactions".into()));
    }
    let total = tally.samples.total_count();
    StandardContract::from_counts(
        total as f64 / tally.transactions as f64,
        tally.samples.iter().map(|(op, s)| (op, s.count as f64)),
    )
}

/// Frequencies pooled over windows; `l_p` supplied by the caller.
pub fn contract_from_windows(windows: &[WindowAggregate], l_p: f64) -> Result<StandardContract, ModelError> {
    let mut counts: BTreeMap<Opcode, f64> = BTreeMap::new();
    for w in windows {
        for (op, s) in &w.opcodes {
            *counts.entry(*op).or_default() += s.count as f64;
        }
    }
    StandardContract::from_counts(l_p, counts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "coefficients", rename_all = "lowercase")]
pub enum Curve {
    Constant(f64),
    /// `c0 + c1 n + ...` in raw block height.
    Polynomial(Vec<f64>),
}

impl Curve {
    pub fn eval(&self, n: f64) -> f64 {
        match self {
            Curve::Constant(c) => *c,
            Curve::Polynomial(c) => eval_poly(c, n),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Curve::Constant(_) => 0,
            Curve::Polynomial(c) => c.len().saturating_sub(1),
        }
    }

    pub fn scale(&self, s: f64) -> Curve {
        match self {
            Curve::Constant(c) => Curve::Constant(c * s),
            Curve::Polynomial(c) => Curve::Polynomial(c.iter().map(|x| x * s).collect()),
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            Curve::Constant(c) => vec![*c],
            Curve::Polynomial(c) => c.clone(),
        }
    }
}

/// Metadata from a polynomial fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitInfo {
    pub degree: usize,
    pub rss: f64,
    pub bic: f64,
    pub train_windows: usize,
    pub validation_windows: usize,
    /// `(degree, validation BIC)` for every candidate tried.
    pub candidates: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpcodeModel {
    pub curve: Curve,
    pub fit: Option<FitInfo>,
    /// Smallest observed per-window mean; the clamp floor.
    pub min_observed: f64,
    /// Heights spanned by the data the model was built from.
    pub training_range: (u64, u64),
    /// Why a dependent opcode fell back to a constant, if it did.
    pub note: Option<String>,
}

impl OpcodeModel {
    pub fn constant(value: f64, training_range: (u64, u64)) -> Self {
        Self { curve: Curve::Constant(value), fit: None, min_observed: value, training_range, note: None }
    }
}

/// Value of a model at a height, with a flag when the clamp engaged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrapolated {
    pub value: f64,
    pub clamped: bool,
}

/// Evaluates the model; negative values become the minimum observed value.
pub fn extrapolate(model: &OpcodeModel, n: u64) -> Extrapolated {
    let v = model.curve.eval(n as f64);
    if v < 0.0 {
        Extrapolated { value: model.min_observed, clamped: true }
    } else {
        Extrapolated { value: v, clamped: false }
    }
}

/// Predicted execution time per opcode, `t_i(n)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TimeModel {
    pub models: BTreeMap<Opcode, OpcodeModel>,
}

impl TimeModel {
    pub fn insert(&mut self, op: Opcode, model: OpcodeModel) {
        self.models.insert(op, model);
    }

    pub fn get(&self, op: Opcode) -> Option<&OpcodeModel> {
        self.models.get(&op)
    }

    pub fn time(&self, op: Opcode, n: u64) -> Option<f64> {
        self.get(op).map(|m| extrapolate(m, n).value)
    }
}

/// Gas per opcode, `g_i(n)`, proposed at a target time per gas `C`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GasModel {
    pub curves: BTreeMap<Opcode, Curve>,
    pub c: f64,
    /// Clamp floors carried over from the time models, already divided by `C`.
    floors: BTreeMap<Opcode, f64>,
}

impl GasModel {
    /// Real-valued `g_i(n)`.
    pub fn gas(&self, op: Opcode, n: u64) -> Option<f64> {
        let v = self.curves.get(&op)?.eval(n as f64);
        Some(if v < 0.0 { self.floors.get(&op).copied().unwrap_or(0.0) } else { v })
    }

    /// Integer gas at `n`: round half up, at least 1.
    pub fn materialized(&self, op: Opcode, n: u64) -> Option<u64> {
        self.gas(op, n).map(materialize_gas)
    }

    /// `base` with every modeled opcode replaced by a polynomial rule.
    pub fn to_schedule(&self, base: &GasSchedule) -> GasSchedule {
        let mut s = base.clone();
        for (op, curve) in &self.curves {
            s.set_rule(*op, GasRule::Polynomial(curve.coefficients()));
        }
        s
    }
}

/// `g_i(n) = t_i(n) / C`.
pub fn propose_gas_model(times: &TimeModel, c: f64) -> Result<GasModel, ModelError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(ModelError::InvalidConstant(c));
    }
    Ok(GasModel {
        curves: times.models.iter().map(|(op, m)| (*op, m.curve.scale(1.0 / c))).collect(),
        floors: times.models.iter().map(|(op, m)| (*op, m.min_observed / c)).collect(),
        c,
    })
}

/// Anything that yields a per-opcode value at a height.
pub trait PerOpcode {
    fn at(&self, op: Opcode, n: u64) -> Option<f64>;
}

impl PerOpcode for TimeModel {
    fn at(&self, op: Opcode, n: u64) -> Option<f64> {
        self.time(op, n)
    }
}

impl PerOpcode for GasModel {
    fn at(&self, op: Opcode, n: u64) -> Option<f64> {
        self.gas(op, n)
    }
}

/// Integerized gas at each height, as a materialized schedule would charge.
pub struct Materialized<'a>(pub &'a GasModel);

impl PerOpcode for Materialized<'_> {
    fn at(&self, op: Opcode, n: u64) -> Option<f64> {
        self.0.materialized(op, n).map(|g| g as f64)
    }
}

/// Mean per-execution gas charged under the current schedule, from data.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservedGas(pub BTreeMap<Opcode, f64>);

impl ObservedGas {
    pub fn from_windows(windows: &[WindowAggregate]) -> Self {
        let mut sums: BTreeMap<Opcode, (u64, u64)> = BTreeMap::new();
        for w in windows {
            for (op, s) in &w.opcodes {
                let e = sums.entry(*op).or_default();
                e.0 += s.count;
                e.1 += s.gas;
            }
        }
        ObservedGas(
            sums.into_iter().filter(|(_, (c, _))| *c > 0).map(|(op, (c, g))| (op, g as f64 / c as f64)).collect(),
        )
    }
}

impl PerOpcode for ObservedGas {
    fn at(&self, op: Opcode, _n: u64) -> Option<f64> {
        self.0.get(&op).copied()
    }
}

fn weighted_sum(n: u64, values: &dyn PerOpcode, p: &StandardContract) -> Result<f64, ModelError> {
    let mut sum = 0.0;
    for (op, f) in p.active() {
        sum += values.at(op, n).ok_or(ModelError::MissingModel(op))? * f;
    }
    Ok(p.l_p * sum)
}

/// `l_p * sum_i t_i(n) f_i`.
pub fn avg_prog_time(n: u64, t: &dyn PerOpcode, p: &StandardContract) -> Result<f64, ModelError> {
    weighted_sum(n, t, p)
}

/// `l_p * sum_i g_i(n) f_i`.
pub fn avg_prog_gas(n: u64, g: &dyn PerOpcode, p: &StandardContract) -> Result<f64, ModelError> {
    weighted_sum(n, g, p)
}

/// Average time per unit gas.
pub fn avg_prog_tpg(n: u64, t: &dyn PerOpcode, g: &dyn PerOpcode, p: &StandardContract) -> Result<f64, ModelError> {
    let gas = avg_prog_gas(n, g, p)?;
    if gas <= 0.0 {
        return Err(ModelError::ZeroGas);
    }
    Ok(avg_prog_time(n, t, p)? / gas)
}

/// Fraction of `avg_prog_time(n)` spent in dependent opcodes.
pub fn dependent_time_share(
    n: u64,
    t: &TimeModel,
    classification: &ClassificationResult,
    p: &StandardContract,
) -> Result<f64, ModelError> {
    let total = avg_prog_time(n, t, p)?;
    let mut dependent = 0.0;
    for (op, f) in p.active() {
        let c = classification.get(op).ok_or(ModelError::Unclassified(op))?;
        if c.dependent {
            dependent += p.l_p * t.time(op, n).ok_or(ModelError::MissingModel(op))? * f;
        }
    }
    if total <= 0.0 {
        return Err(ModelError::UndefinedRatio("average program time is zero".into()));
    }
    Ok(dependent / total)
}
