//! `plot`: render a bundle table as an SVG figure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::output::{read_table, write_atomic, Table};
use crate::svg::{Chart, Series};

/// Figure name, source table, description.
pub const FIGURES: [(&str, &str, &str); 6] = [
    ("mean-time", "mean_times.csv", "per-window mean execution time by opcode"),
    ("dependent-share", "dependent_share.csv", "share of time in height-dependent opcodes"),
    ("gas", "gas_curves.csv", "current and proposed gas per opcode"),
    ("tpg", "tpg_curves.csv", "time per gas, current and proposed schedules"),
    ("macro-micro", "macro_micro.csv", "macro/micro relative difference"),
    ("economics", "economics.csv", "fees against infrastructure cost"),
];

pub fn figure_table(name: &str) -> Option<&'static str> {
    FIGURES.iter().find(|f| f.0 == name).map(|f| f.1)
}

fn floats(t: &Table, col: &str) -> Result<Vec<Option<f64>>, CliError> {
    t.floats(col).map_err(CliError::input)
}

fn xy(t: &Table, x: &str, y: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let xs = floats(t, x)?;
    let ys = floats(t, y)?;
    Ok(xs.into_iter().zip(ys).filter_map(|(a, b)| Some((a?, b?))).collect())
}

/// Series keyed by the `opcode` column.
fn by_opcode(t: &Table, y: &str, suffix: &str) -> Result<Vec<Series>, CliError> {
    let ops = t.strings("opcode").map_err(CliError::input)?;
    let xs = floats(t, "window_start")?;
    let ys = floats(t, y)?;
    let mut m: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for i in 0..ops.len() {
        if let (Some(x), Some(v)) = (xs[i], ys[i]) {
            m.entry(ops[i]).or_default().push((x, v));
        }
    }
    Ok(m.into_iter().map(|(op, points)| Series { name: format!("{op}{suffix}"), points }).collect())
}

pub fn chart(figure: &str, t: &Table) -> Result<Chart, CliError> {
    let line = |name: &str, col: &str| -> Result<Series, CliError> {
        Ok(Series { name: name.into(), points: xy(t, "window_start", col)? })
    };
    let c = |title: &str, y: &str, log_y, series| Chart {
        title: title.into(),
        x_label: "block height".into(),
        y_label: y.into(),
        log_y,
        series,
    };
    Ok(match figure {
        "mean-time" => c("Mean execution time per window", "ns", true, by_opcode(t, "mean_time_ns", "")?),
        "dependent-share" => c(
            "Time share of height-dependent opcodes",
            "share",
            false,
            vec![line("model", "model_share")?, line("observed", "observed_share")?],
        ),
        "gas" => {
            let mut s = by_opcode(t, "current_gas", " current")?;
            s.extend(by_opcode(t, "proposed_gas", " proposed")?);
            c("Current vs proposed gas", "gas", true, s)
        }
        "tpg" => c(
            "Time per unit gas",
            "ns/gas",
            false,
            vec![
                line("current", "current_tpg")?,
                line("proposed", "proposed_tpg")?,
                line("proposed (int)", "proposed_tpg_materialized")?,
            ],
        ),
        "macro-micro" => c("(macro - micro) / macro", "ratio", false, vec![line("EVM", "relative_difference")?]),
        "economics" => c(
            "Fees vs infrastructure cost",
            "USD",
            true,
            vec![line("fees", "fee_usd")?, line("infrastructure", "infra_usd")?],
        ),
        other => return Err(CliError::input(format!("unknown figure {other:?}"))),
    })
}

/// Renders `figure` from the bundle in `dir`; returns the SVG path.
pub fn plot(dir: &Path, figure: &str, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let Some(table) = figure_table(figure) else {
        let names: Vec<&str> = FIGURES.iter().map(|f| f.0).collect();
        return Err(CliError::input(format!("unknown figure {figure:?}; expected one of {}", names.join(", "))));
    };
    let path = dir.join(table);
    if !path.exists() {
        return Err(CliError::input(format!("bundle {} has no {table}", dir.display())));
    }
    let t = read_table(&path)?;
    let svg = chart(figure, &t)?.render();
    let target = out.map(Path::to_path_buf).unwrap_or_else(|| dir.join(format!("{figure}.svg")));
    write_atomic(&target, svg.as_bytes())?;
    Ok(target)
}
