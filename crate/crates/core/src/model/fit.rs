use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::classify::{mean_time_series, ClassificationResult};
use super::contract::{Curve, FitInfo, OpcodeModel, TimeModel};
use super::ModelError;
use crate::evm::Opcode;
use crate::instrument::WindowAggregate;
use crate::par::Strategy;

/// Validation RSS at or below this fraction of the validation sum of squares
/// counts as an exact fit.
const EXACT_RSS: f64 = 1e-18;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitOptions {
    pub degrees: Vec<usize>,
    /// Training fraction of the seeded random split.
    pub split: f64,
    pub seed: u64,
    pub min_windows: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { degrees: vec![1, 2, 3], split: 0.8, seed: 0, min_windows: 10 }
    }
}

/// Least-squares coefficients in `x`, lowest order first, or `None` when the
/// design matrix is rank deficient.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Option<Vec<f64>> {
    let k = degree + 1;
    if x.len() < k {
        return None;
    }
    let a = DMatrix::from_fn(x.len(), k, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    if svd.rank(max_sv * 1e-12 * x.len() as f64) < k {
        return None;
    }
    svd.solve(&b, 0.0).ok().map(|c| c.iter().copied().collect())
}

/// `m ln(RSS/m) + k ln(m)`; an exact fit scores negative infinity.
pub fn bic(rss: f64, sum_sq: f64, m: usize, k: usize) -> f64 {
    let mf = m as f64;
    if rss <= EXACT_RSS * sum_sq.max(f64::MIN_POSITIVE) {
        return f64::NEG_INFINITY;
    }
    mf * (rss / mf).ln() + k as f64 * mf.ln()
}

/// Seeded `(train, validation)` index partition.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = ((n as f64 * train_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let valid = idx.split_off(train);
    (idx, valid)
}

/// Fits each candidate degree on the training points and keeps the one with
/// the lowest validation BIC, ties going to the lower degree.
pub fn select_polynomial(x: &[f64], y: &[f64], opts: &FitOptions) -> Result<(Vec<f64>, FitInfo), ModelError> {
    let (train, valid) = split_indices(x.len(), opts.split, opts.seed);
    if valid.is_empty() {
        return Err(ModelError::InsufficientData("no validation windows".into()));
    }
    let scale = x.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if scale == 0.0 {
        return Err(ModelError::Singular);
    }
    let pick = |idx: &[usize], v: &[f64]| idx.iter().map(|i| v[*i]).collect::<Vec<f64>>();
    let (xt, yt) = (pick(&train, x), pick(&train, y));
    let (xv, yv) = (pick(&valid, x), pick(&valid, y));
    let xt_s: Vec<f64> = xt.iter().map(|v| v / scale).collect();
    let sum_sq: f64 = yv.iter().map(|v| v * v).sum();

    let mut best: Option<(f64, usize, Vec<f64>, f64)> = None;
    let mut candidates = Vec::new();
    for &d in &opts.degrees {
        let Some(scaled) = polyfit(&xt_s, &yt, d) else { continue };
        let coeffs: Vec<f64> = scaled.iter().enumerate().map(|(j, c)| c / scale.powi(j as i32)).collect();
        let rss: f64 = xv
            .iter()
            .zip(&yv)
            .map(|(xi, yi)| {
                let p = crate::evm::schedule::eval_poly(&scaled, xi / scale);
                (yi - p).powi(2)
            })
            .sum();
        let score = bic(rss, sum_sq, valid.len(), d + 1);
        candidates.push((d, score));
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, d, coeffs, rss));
        }
    }
    let (score, degree, coeffs, rss) = best.ok_or(ModelError::Singular)?;
    Ok((
        coeffs,
        FitInfo { degree, rss, bic: score, train_windows: train.len(), validation_windows: valid.len(), candidates },
    ))
}

/// Polynomial time model for one opcode from its per-window mean times.
pub fn fit_time_model(windows: &[WindowAggregate], op: Opcode, opts: &FitOptions) -> Result<OpcodeModel, ModelError> {
    let series = mean_time_series(windows, op);
    if series.len() < opts.min_windows {
        return Err(ModelError::InsufficientData(format!(
            "{op} has {} windows; need {}",
            series.len(),
            opts.min_windows
        )));
    }
    let x: Vec<f64> = series.iter().map(|s| s.0 as f64).collect();
    let y: Vec<f64> = series.iter().map(|s| s.1).collect();
    let (coeffs, info) = select_polynomial(&x, &y, opts)?;
    Ok(OpcodeModel {
        curve: Curve::Polynomial(coeffs),
        fit: Some(info),
        min_observed: y.iter().copied().fold(f64::INFINITY, f64::min),
        training_range: (series[0].0, series[series.len() - 1].0),
        note: None,
    })
}

/// Pooled mean time `sum time / sum count` as a constant model.
pub fn constant_time_model(windows: &[WindowAggregate], op: Opcode) -> Option<OpcodeModel> {
    let series = mean_time_series(windows, op);
    let (mut count, mut time) = (0u64, 0u64);
    for w in windows {
        let s = w.opcode(op);
        count += s.count;
        time += s.time_ns;
    }
    (count > 0).then(|| {
        let mut m = OpcodeModel::constant(time as f64 / count as f64, (series[0].0, series[series.len() - 1].0));
        m.min_observed = series.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        m
    })
}

/// Dependent opcodes get polynomial fits, falling back to a constant with
/// a note when a fit is not possible; everything else gets a constant.
/// Each opcode's split is seeded from `opts.seed` and its byte.
pub fn fit_all(
    windows: &[WindowAggregate],
    classification: &ClassificationResult,
    opts: &FitOptions,
    strategy: Strategy,
) -> TimeModel {
    let mut ops: Vec<Opcode> = windows.iter().flat_map(|w| w.opcodes.keys().copied()).collect();
    ops.sort();
    ops.dedup();
    let fitted = strategy.map(&ops, |op| {
        let constant = constant_time_model(windows, *op)?;
        if !classification.is_dependent(*op) {
            return Some(constant);
        }
        let per_op = FitOptions { seed: opts.seed ^ u64::from(op.0), ..opts.clone() };
        Some(match fit_time_model(windows, *op, &per_op) {
            Ok(m) => m,
            Err(e) => OpcodeModel { note: Some(format!("constant fallback: {e}")), ..constant },
        })
    });
    let mut t = TimeModel::default();
    for (op, m) in ops.into_iter().zip(fitted) {
        if let Some(m) = m {
            t.insert(op, m);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyfit_recovers_quadratic() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v + 0.5 * v * v).collect();
        let c = polyfit(&x, &y, 2).unwrap();
        for (a, b) in c.iter().zip([3.0, -2.0, 0.5]) {
            assert!((a - b).abs() < 1e-9, "{c:?}");
        }
        assert!(polyfit(&[1.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0], 1).is_none());
    }

    #[test]
    fn exact_linear_data_selects_degree_one() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 1000.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 100.0 + 0.05 * v).collect();
        let (c, info) = select_polynomial(&x, &y, &FitOptions::default()).unwrap();
        assert_eq!(info.degree, 1);
        assert!(info.rss < 1e-12);
        assert!((c[1] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn equal_heights_are_singular() {
        let x = vec![5.0; 12];
        let y: Vec<f64> = (0..12).map(f64::from).collect();
        assert!(matches!(select_polynomial(&x, &y, &FitOptions::default()), Err(ModelError::Singular)));
    }

    #[test]
    fn split_is_seeded_and_sized() {
        let (a, b) = split_indices(40, 0.8, 3);
        assert_eq!((a.len(), b.len()), (32, 8));
        assert_eq!(split_indices(40, 0.8, 3), (a, b));
    }
}
