use std::collections::BTreeMap;

use serde::Serialize;

use super::stats::weighted_pearson;
use crate::evm::Opcode;
use crate::instrument::WindowAggregate;

pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const MIN_CLASSIFY_WINDOWS: usize = 3;

/// How windows are weighted in the correlation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Weighting {
    #[default]
    Equal,
    /// Weight each window by the opcode's execution count in it.
    Count,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub correlation: f64,
    pub windows: usize,
    pub dependent: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ClassificationResult {
    pub threshold: f64,
    pub entries: BTreeMap<Opcode, Classification>,
    /// Opcodes seen in fewer than three windows.
    pub insufficient: Vec<Opcode>,
}

impl ClassificationResult {
    pub fn get(&self, op: Opcode) -> Option<&Classification> {
        self.entries.get(&op)
    }

    pub fn is_dependent(&self, op: Opcode) -> bool {
        self.get(op).is_some_and(|c| c.dependent)
    }

    pub fn dependent(&self) -> impl Iterator<Item = Opcode> + '_ {
        self.entries.iter().filter(|(_, c)| c.dependent).map(|(op, _)| *op)
    }
}

/// `(window start, mean time, count)` for windows where `op` ran.
pub fn mean_time_series(windows: &[WindowAggregate], op: Opcode) -> Vec<(u64, f64, u64)> {
    windows
        .iter()
        .filter_map(|w| {
            let s = w.opcode(op);
            (s.count > 0).then(|| (w.window_start, s.time_ns as f64 / s.count as f64, s.count))
        })
        .collect()
}

/// Correlates each opcode's per-window mean time with window start height.
pub fn classify_bh_dependence(windows: &[WindowAggregate], threshold: f64, weighting: Weighting) -> ClassificationResult {
    let mut ops: Vec<Opcode> = windows.iter().flat_map(|w| w.opcodes.keys().copied()).collect();
    ops.sort();
    ops.dedup();
    let mut out = ClassificationResult { threshold, ..Default::default() };
    for op in ops {
        let series = mean_time_series(windows, op);
        if series.len() < MIN_CLASSIFY_WINDOWS {
            out.insufficient.push(op);
            continue;
        }
        let x: Vec<f64> = series.iter().map(|s| s.0 as f64).collect();
        let y: Vec<f64> = series.iter().map(|s| s.1).collect();
        let w: Vec<f64> = series.iter().map(|s| s.2 as f64).collect();
        let r = weighted_pearson(&x, &y, (weighting == Weighting::Count).then_some(w.as_slice()));
        out.entries.insert(op, Classification { correlation: r, windows: series.len(), dependent: r > threshold });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evm::OpStats;

    fn windows(series: &[(Opcode, &[f64])]) -> Vec<WindowAggregate> {
        let n = series[0].1.len();
        (0..n)
            .map(|i| {
                let mut w = WindowAggregate::new(i as u64 * 100);
                for (op, ys) in series {
                    w.opcodes.insert(*op, OpStats { count: 10, gas: 30, time_ns: (ys[i] * 10.0) as u64 });
                }
                w
            })
            .collect()
    }

    #[test]
    fn increasing_and_constant_series() {
        let ws = windows(&[(Opcode::SLOAD, &[1.0, 2.0, 3.0, 4.0]), (Opcode::ADD, &[5.0; 4])]);
        let c = classify_bh_dependence(&ws, DEFAULT_THRESHOLD, Weighting::Equal);
        assert_eq!(c.get(Opcode::SLOAD).unwrap().correlation, 1.0);
        assert!(c.is_dependent(Opcode::SLOAD));
        assert_eq!(c.get(Opcode::ADD).unwrap().correlation, 0.0);
        assert!(!c.is_dependent(Opcode::ADD));
    }

    #[test]
    fn too_few_windows() {
        let ws = windows(&[(Opcode::SLOAD, &[1.0, 2.0])]);
        let c = classify_bh_dependence(&ws, DEFAULT_THRESHOLD, Weighting::Equal);
        assert_eq!(c.insufficient, vec![Opcode::SLOAD]);
    }
}
