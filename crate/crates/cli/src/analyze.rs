//! `analyze`: classification, time-model fits, repricing and the
//! macro/micro validation over instrumentation CSVs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use gaslab_core::evm::Opcode;
use gaslab_core::instrument::{read_macro, read_micro, resample, MacroCategory, WindowAggregate};
use gaslab_core::model::{
    avg_prog_tpg, chi_square_normality, classify_bh_dependence, contract_from_windows, dependent_time_share, extrapolate,
    fit_all, kendall, propose_gas_model, relative_difference, Classification, ClassificationResult, FitOptions,
    GasModel, ObservedGas, StandardContract, TimeModel, Weighting, DEFAULT_C, DEFAULT_THRESHOLD,
};
use gaslab_core::par::Strategy;
use serde::Serialize;

use crate::error::{read_input, CliError};
use crate::output::{csv_table, fmt_f64, fmt_opt, resolve_out, Bundle};
use crate::simulate::{load_schedule, RunSummary};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WeightingKind {
    #[default]
    Equal,
    Count,
}

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    pub micro: PathBuf,
    pub macro_csv: Option<PathBuf>,
    /// `receipts.json` from simulate; supplies `l_p`.
    pub receipts: Option<PathBuf>,
    pub threshold: f64,
    pub c: f64,
    pub weighting: WeightingKind,
    pub min_windows: usize,
    pub degrees: Vec<usize>,
    pub fit_seed: u64,
    pub chi_bins: usize,
    pub alpha: f64,
    pub early_windows: usize,
    pub extrapolate_to: Option<u64>,
    /// Base schedule for `proposed.gas`.
    pub schedule: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl AnalyzeOptions {
    pub fn new(micro: impl Into<PathBuf>) -> Self {
        Self {
            micro: micro.into(),
            macro_csv: None,
            receipts: None,
            threshold: DEFAULT_THRESHOLD,
            c: DEFAULT_C,
            weighting: WeightingKind::Equal,
            min_windows: FitOptions::default().min_windows,
            degrees: FitOptions::default().degrees,
            fit_seed: 0,
            chi_bins: 20,
            alpha: 0.05,
            early_windows: 5,
            extrapolate_to: None,
            schedule: None,
            out: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TpgRow {
    pub window_start: u64,
    /// Measured time over charged gas under the schedule the data ran with.
    pub current: Option<f64>,
    /// Measured time over the gas the proposed model charges for the same
    /// instruction counts, in real arithmetic.
    pub proposed: Option<f64>,
    pub proposed_materialized: Option<f64>,
    /// Standard-contract tpg from the time models and pooled current gas.
    pub model_current: Option<f64>,
    pub model_proposed: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trend {
    pub s: i64,
    pub tau: f64,
    pub z: f64,
    pub p_value: f64,
    pub increasing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChiSummary {
    pub statistic: f64,
    pub dof: u64,
    pub critical: f64,
    pub bins: usize,
    pub accept: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MacroMicroSummary {
    pub windows: usize,
    pub window_size: u64,
    pub max_abs_relative_difference: f64,
    pub mean_relative_difference: f64,
    pub chi_square: Option<ChiSummary>,
    pub chi_square_note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EarlyTpg {
    pub windows: usize,
    pub mean_current_tpg: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtrapolationSummary {
    pub height: u64,
    pub dependent_share: f64,
    pub clamped: Vec<String>,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub windows: usize,
    pub threshold: f64,
    pub c: f64,
    pub l_p: f64,
    pub dependent: Vec<String>,
    pub current_tpg_trend: Trend,
    pub proposed_tpg_max_rel_dev: Option<f64>,
    pub proposed_tpg_materialized_max_rel_dev: Option<f64>,
    pub early_window_tpg: EarlyTpg,
    pub macro_micro: Option<MacroMicroSummary>,
    pub extrapolation: Option<ExtrapolationSummary>,
}

pub struct AnalyzeOutcome {
    pub dir: PathBuf,
    pub classification: ClassificationResult,
    pub times: TimeModel,
    pub gas: GasModel,
    pub contract: StandardContract,
    pub tpg: Vec<TpgRow>,
    pub relative_differences: Vec<(u64, f64)>,
    pub report: AnalysisReport,
}

/// Smallest gap between consecutive window starts.
pub fn infer_window_size(windows: &[WindowAggregate]) -> Option<u64> {
    windows.windows(2).map(|p| p[1].window_start - p[0].window_start).filter(|d| *d > 0).min()
}

pub fn analyze(opts: &AnalyzeOptions) -> Result<AnalyzeOutcome, CliError> {
    if !(opts.c > 0.0 && opts.c.is_finite()) {
        return Err(CliError::input(format!("C must be positive, got {}", opts.c)));
    }
    let micro_bytes = read_input(&opts.micro)?;
    let windows = read_micro(micro_bytes.as_slice()).map_err(|e| CliError::csv(&opts.micro, e))?;
    if windows.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", opts.micro.display())));
    }
    let mut bundle = Bundle::create(resolve_out(opts.out.as_deref(), "analyze"), "analyze")?;
    bundle.input(&opts.micro, &micro_bytes);
    let macro_windows = match &opts.macro_csv {
        Some(p) => {
            let b = read_input(p)?;
            bundle.input(p, &b);
            Some(read_macro(b.as_slice()).map_err(|e| CliError::csv(p, e))?)
        }
        None => None,
    };
    let l_p = match &opts.receipts {
        Some(p) => {
            let b = read_input(p)?;
            bundle.input(p, &b);
            let s: RunSummary =
                serde_json::from_slice(&b).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            s.standard_contract.map_or(1.0, |c| c.l_p)
        }
        None => 1.0,
    };
    let (base_schedule, schedule_bytes) = load_schedule(opts.schedule.as_ref())?;
    if let (Some(p), Some(b)) = (&opts.schedule, &schedule_bytes) {
        bundle.input(p, b);
    }
    bundle.param("threshold", opts.threshold);
    bundle.param("c", opts.c);
    bundle.param("weighting", opts.weighting);
    bundle.param("min_windows", opts.min_windows);
    bundle.param("degrees", &opts.degrees);
    bundle.param("fit_seed", opts.fit_seed);
    bundle.param("chi_bins", opts.chi_bins);
    bundle.param("alpha", opts.alpha);
    bundle.param("early_windows", opts.early_windows);
    bundle.param("extrapolate_to", opts.extrapolate_to);

    let weighting = match opts.weighting {
        WeightingKind::Equal => Weighting::Equal,
        WeightingKind::Count => Weighting::Count,
    };
    let mut classification = classify_bh_dependence(&windows, opts.threshold, weighting);
    let fit_opts =
        FitOptions { degrees: opts.degrees.clone(), seed: opts.fit_seed, min_windows: opts.min_windows, ..Default::default() };
    let times = fit_all(&windows, &classification, &fit_opts, Strategy::default());
    let gas = propose_gas_model(&times, opts.c).map_err(CliError::input)?;
    let contract = contract_from_windows(&windows, l_p).map_err(CliError::input)?;
    let observed_gas = ObservedGas::from_windows(&windows);

    // Too few windows to correlate: treated as independent for the share.
    let mut share_classes = classification.clone();
    for op in &classification.insufficient {
        let n = windows.iter().filter(|w| w.opcode(*op).count > 0).count();
        share_classes.entries.insert(*op, Classification { correlation: f64::NAN, windows: n, dependent: false });
    }

    bundle.write("classification.csv", &classification_table(&classification))?;
    bundle.write_json("models.json", &models_doc(&times, &classification, opts, &fit_opts))?;
    bundle.write("proposed.gas", gas.to_schedule(&base_schedule).to_text().as_bytes())?;

    let mut mean_rows = Vec::new();
    let mut gas_rows = Vec::new();
    let mut share_rows = Vec::new();
    let mut tpg = Vec::new();
    for w in &windows {
        let n = w.window_start;
        let (mut t_sum, mut g_sum, mut dep_t, mut prop, mut prop_int) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (op, s) in &w.opcodes {
            if s.count == 0 {
                continue;
            }
            let g = gas.gas(*op, n).ok_or_else(|| CliError::input(format!("no model for {op}")))?;
            let gi = gas.materialized(*op, n).unwrap_or(0) as f64;
            t_sum += s.time_ns as f64;
            g_sum += s.gas as f64;
            prop += s.count as f64 * g;
            prop_int += s.count as f64 * gi;
            if share_classes.is_dependent(*op) {
                dep_t += s.time_ns as f64;
            }
            mean_rows.push(vec![
                n.to_string(),
                op.to_string(),
                s.count.to_string(),
                fmt_f64(s.time_ns as f64 / s.count as f64),
                fmt_opt(times.time(*op, n)),
            ]);
            gas_rows.push(vec![
                n.to_string(),
                op.to_string(),
                fmt_f64(s.gas as f64 / s.count as f64),
                fmt_f64(g),
                gi.to_string(),
            ]);
        }
        let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
        let share = dependent_time_share(n, &times, &share_classes, &contract).ok();
        share_rows.push(vec![n.to_string(), fmt_opt(share), fmt_opt(ratio(dep_t, t_sum)), String::new()]);
        tpg.push(TpgRow {
            window_start: n,
            current: ratio(t_sum, g_sum),
            proposed: ratio(t_sum, prop),
            proposed_materialized: ratio(t_sum, prop_int),
            model_current: avg_prog_tpg(n, &times, &observed_gas, &contract).ok(),
            model_proposed: avg_prog_tpg(n, &times, &gas, &contract).ok(),
        });
    }
    let extrapolation = match opts.extrapolate_to {
        Some(h) => {
            let share = dependent_time_share(h, &times, &share_classes, &contract).map_err(CliError::input)?;
            share_rows.push(vec![h.to_string(), fmt_f64(share), String::new(), "1".into()]);
            let clamped = times
                .models
                .iter()
                .filter(|(_, m)| extrapolate(m, h).clamped)
                .map(|(op, _)| op.to_string())
                .collect();
            Some(ExtrapolationSummary { height: h, dependent_share: share, clamped })
        }
        None => None,
    };
    bundle.write(
        "mean_times.csv",
        &csv_table(&["window_start", "opcode", "count", "mean_time_ns", "model_time_ns"], &mean_rows),
    )?;
    bundle.write(
        "gas_curves.csv",
        &csv_table(&["window_start", "opcode", "current_gas", "proposed_gas", "proposed_gas_materialized"], &gas_rows),
    )?;
    bundle.write(
        "dependent_share.csv",
        &csv_table(&["window_start", "model_share", "observed_share", "extrapolated"], &share_rows),
    )?;
    let tpg_rows: Vec<Vec<String>> = tpg
        .iter()
        .map(|r| {
            vec![
                r.window_start.to_string(),
                fmt_opt(r.current),
                fmt_opt(r.proposed),
                fmt_opt(r.proposed_materialized),
                fmt_opt(r.model_current),
                fmt_opt(r.model_proposed),
            ]
        })
        .collect();
    bundle.write(
        "tpg_curves.csv",
        &csv_table(
            &["window_start", "current_tpg", "proposed_tpg", "proposed_tpg_materialized", "model_current_tpg", "model_proposed_tpg"],
            &tpg_rows,
        ),
    )?;

    let (relative_differences, macro_micro) = match &macro_windows {
        Some(m) => {
            let (rows, summary) = macro_micro(&windows, m, opts)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|(start, mac, mic, rd)| vec![start.to_string(), mac.to_string(), mic.to_string(), fmt_f64(*rd)])
                .collect();
            bundle.write(
                "macro_micro.csv",
                &csv_table(&["window_start", "macro_evm_ns", "micro_ns", "relative_difference"], &table),
            )?;
            (rows.iter().map(|r| (r.0, r.3)).collect(), Some(summary))
        }
        None => (Vec::new(), None),
    };

    let current: Vec<f64> = tpg.iter().filter_map(|r| r.current).collect();
    let k = kendall(&current);
    let max_dev = |f: fn(&TpgRow) -> Option<f64>| {
        tpg.iter().filter_map(f).map(|v| (v / opts.c - 1.0).abs()).fold(None, |a: Option<f64>, b| Some(a.map_or(b, |a| a.max(b))))
    };
    let early: Vec<f64> = tpg.iter().filter_map(|r| r.current).take(opts.early_windows).collect();
    classification.insufficient.sort();
    let report = AnalysisReport {
        windows: windows.len(),
        threshold: opts.threshold,
        c: opts.c,
        l_p,
        dependent: classification.dependent().map(|o| o.to_string()).collect(),
        current_tpg_trend: Trend { s: k.s, tau: k.tau, z: k.z, p_value: k.p_value, increasing: k.increasing(opts.alpha) },
        proposed_tpg_max_rel_dev: max_dev(|r| r.proposed),
        proposed_tpg_materialized_max_rel_dev: max_dev(|r| r.proposed_materialized),
        early_window_tpg: EarlyTpg {
            windows: early.len(),
            mean_current_tpg: (!early.is_empty()).then(|| early.iter().sum::<f64>() / early.len() as f64),
        },
        macro_micro,
        extrapolation,
    };
    bundle.write_json("report.json", &report)?;
    let dir = bundle.dir().to_path_buf();
    bundle.finish()?;
    Ok(AnalyzeOutcome { dir, classification, times, gas, contract, tpg, relative_differences, report })
}

type MacroMicroRow = (u64, u64, u64, f64);

fn macro_micro(
    micro: &[WindowAggregate],
    mac: &[WindowAggregate],
    opts: &AnalyzeOptions,
) -> Result<(Vec<MacroMicroRow>, MacroMicroSummary), CliError> {
    let mi = infer_window_size(micro);
    let ma = infer_window_size(mac);
    let (micro, mac, size) = match (mi, ma) {
        (Some(a), Some(b)) if a == b => (micro.to_vec(), mac.to_vec(), a),
        (Some(a), Some(b)) if b % a == 0 => (resample(micro, b), mac.to_vec(), b),
        (Some(a), Some(b)) if a % b == 0 => (micro.to_vec(), resample(mac, a), a),
        (None, None) => (micro.to_vec(), mac.to_vec(), 0),
        (a, b) => return Err(CliError::input(format!("macro window {b:?} and micro window {a:?} do not nest"))),
    };
    let by_start: BTreeMap<u64, &WindowAggregate> = micro.iter().map(|w| (w.window_start, w)).collect();
    let mut rows = Vec::new();
    for m in &mac {
        let Some(w) = by_start.get(&m.window_start) else { continue };
        let evm = m.category(MacroCategory::EVM);
        let micro_ns = w.micro_time_ns();
        if let Ok(rd) = relative_difference(evm as f64, micro_ns as f64) {
            rows.push((m.window_start, evm, micro_ns, rd));
        }
    }
    let rds: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let (chi_square, chi_square_note) = match chi_square_normality(&rds, opts.chi_bins, opts.alpha) {
        Ok(r) => (
            Some(ChiSummary { statistic: r.statistic, dof: r.dof, critical: r.critical, bins: r.bins, accept: r.accept }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = MacroMicroSummary {
        windows: rows.len(),
        window_size: size,
        max_abs_relative_difference: rds.iter().fold(0.0f64, |a, b| a.max(b.abs())),
        mean_relative_difference: if rds.is_empty() { 0.0 } else { rds.iter().sum::<f64>() / rds.len() as f64 },
        chi_square,
        chi_square_note,
    };
    Ok((rows, summary))
}

fn classification_table(c: &ClassificationResult) -> Vec<u8> {
    let mut rows: Vec<Vec<String>> = c
        .entries
        .iter()
        .map(|(op, e)| vec![op.to_string(), fmt_f64(e.correlation), e.windows.to_string(), label(e.dependent).into()])
        .collect();
    for op in &c.insufficient {
        rows.push(vec![op.to_string(), String::new(), String::new(), "insufficient".into()]);
    }
    csv_table(&["opcode", "correlation", "windows", "class"], &rows)
}

fn label(dependent: bool) -> &'static str {
    if dependent {
        "dependent"
    } else {
        "independent"
    }
}

#[derive(Serialize)]
struct ModelsDoc<'a> {
    c: f64,
    threshold: f64,
    fit: &'a FitOptions,
    opcodes: Vec<ModelEntry<'a>>,
}

#[derive(Serialize)]
struct ModelEntry<'a> {
    opcode: String,
    class: &'static str,
    #[serde(flatten)]
    model: &'a gaslab_core::model::OpcodeModel,
}

fn models_doc<'a>(
    times: &'a TimeModel,
    c: &ClassificationResult,
    opts: &AnalyzeOptions,
    fit: &'a FitOptions,
) -> ModelsDoc<'a> {
    let class = |op: Opcode| match c.get(op) {
        Some(e) => label(e.dependent),
        None => "insufficient",
    };
    ModelsDoc {
        c: opts.c,
        threshold: opts.threshold,
        fit,
        opcodes: times
            .models
            .iter()
            .map(|(op, m)| ModelEntry { opcode: op.to_string(), class: class(*op), model: m })
            .collect(),
    }
}
