//! Transaction fees against infrastructure cost.

use std::path::PathBuf;

use serde::Serialize;

use crate::error::CliError;
use crate::output::{csv_table, fmt_f64, fmt_opt, read_table, resolve_out, Bundle, Table};

const WEI_PER_ETH: f64 = 1e18;
const NS_PER_HOUR: f64 = 3.6e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeeEconomics {
    pub fee_eth: f64,
    pub fee_usd: f64,
    pub infra_usd: f64,
    /// `None` when the infrastructure cost is zero.
    pub ratio: Option<f64>,
}

/// Fee paid for `gas_used` at `gas_price_wei`, converted at `eth_usd`, next
/// to `wall_hours` of compute at `usd_per_hour`.
pub fn fee_economics(
    gas_used: f64,
    gas_price_wei: f64,
    eth_usd: f64,
    wall_hours: f64,
    usd_per_hour: f64,
) -> Result<FeeEconomics, CliError> {
    for (name, v) in [
        ("gas used", gas_used),
        ("gas price", gas_price_wei),
        ("ETH/USD", eth_usd),
        ("wall time", wall_hours),
        ("hourly rate", usd_per_hour),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CliError::input(format!("{name} must be a nonnegative number, got {v}")));
        }
    }
    let fee_eth = gas_used * gas_price_wei / WEI_PER_ETH;
    let fee_usd = fee_eth * eth_usd;
    let infra_usd = wall_hours * usd_per_hour;
    Ok(FeeEconomics { fee_eth, fee_usd, infra_usd, ratio: (infra_usd > 0.0).then(|| fee_usd / infra_usd) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PricePoint {
    pub window_start: u64,
    pub eth_usd: f64,
    pub infra_usd_per_hour: f64,
}

/// Per-window ETH/USD price and hourly infrastructure cost.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries {
    points: Vec<PricePoint>,
}

impl PriceSeries {
    pub fn new(mut points: Vec<PricePoint>) -> Result<Self, CliError> {
        if points.is_empty() {
            return Err(CliError::input("price series is empty"));
        }
        if let Some(p) = points.iter().find(|p| !(p.eth_usd >= 0.0 && p.infra_usd_per_hour >= 0.0)) {
            return Err(CliError::input(format!("negative price at window {}", p.window_start)));
        }
        points.sort_by_key(|p| p.window_start);
        Ok(Self { points })
    }

    /// Columns `window_start,eth_usd,infra_usd_per_hour`.
    pub fn from_table(t: &Table) -> Result<Self, CliError> {
        let starts = t.floats("window_start").map_err(CliError::input)?;
        let eth = t.floats("eth_usd").map_err(CliError::input)?;
        let rate = t.floats("infra_usd_per_hour").map_err(CliError::input)?;
        let mut points = Vec::new();
        for i in 0..starts.len() {
            match (starts[i], eth[i], rate[i]) {
                (Some(s), Some(e), Some(r)) if s >= 0.0 => {
                    points.push(PricePoint { window_start: s as u64, eth_usd: e, infra_usd_per_hour: r })
                }
                _ => return Err(CliError::input(format!("line {}: incomplete price row", t.lines[i]))),
            }
        }
        Self::new(points)
    }

    /// The latest point at or before `height`, else the first point.
    pub fn at(&self, height: u64) -> PricePoint {
        let i = self.points.partition_point(|p| p.window_start <= height);
        self.points[i.saturating_sub(1)]
    }
}

#[derive(Clone, Debug)]
pub enum EconomicsInput {
    /// One calculation printed as JSON.
    Single { gas_used: f64, gas_price_wei: f64, eth_usd: f64, wall_hours: f64, usd_per_hour: f64 },
    /// Per-window fees from `usage.csv`, compute time from the macro Total
    /// span, prices from a `PriceSeries` file.
    Simulated { usage: PathBuf, macro_csv: PathBuf, prices: PathBuf },
    /// Pre-aggregated `first_block,last_block,fee_usd,infra_usd` rows.
    Summary { path: PathBuf },
}

pub struct EconomicsRow {
    pub window_start: u64,
    pub gas_used: Option<u64>,
    pub result: FeeEconomics,
}

pub fn economics(input: &EconomicsInput, out: Option<&std::path::Path>) -> Result<Vec<EconomicsRow>, CliError> {
    let mut bundle_inputs = Vec::new();
    let rows = match input {
        EconomicsInput::Single { gas_used, gas_price_wei, eth_usd, wall_hours, usd_per_hour } => {
            let r = fee_economics(*gas_used, *gas_price_wei, *eth_usd, *wall_hours, *usd_per_hour)?;
            println!("{}", serde_json::to_string(&r).expect("serializes"));
            let row = EconomicsRow { window_start: 0, gas_used: Some(*gas_used as u64), result: r };
            if out.is_none() {
                return Ok(vec![row]);
            }
            vec![row]
        }
        EconomicsInput::Simulated { usage, macro_csv, prices } => {
            let usage_t = read_table(usage)?;
            let prices_t = read_table(prices)?;
            let macro_bytes = crate::error::read_input(macro_csv)?;
            let mac = gaslab_core::instrument::read_macro(macro_bytes.as_slice()).map_err(|e| CliError::csv(macro_csv, e))?;
            let series = PriceSeries::from_table(&prices_t)?;
            let total_ns: std::collections::BTreeMap<u64, u64> = mac
                .iter()
                .map(|w| (w.window_start, w.category(gaslab_core::instrument::MacroCategory::Total)))
                .collect();
            let starts = usage_t.floats("window_start").map_err(CliError::input)?;
            let gas = usage_t.floats("gas_used").map_err(CliError::input)?;
            let fees = usage_t.strings("fees_wei").map_err(CliError::input)?;
            let mut rows = Vec::new();
            for i in 0..starts.len() {
                let (Some(start), Some(g)) = (starts[i], gas[i]) else {
                    return Err(CliError::input(format!("{}: line {}: incomplete row", usage.display(), usage_t.lines[i])));
                };
                let start = start as u64;
                let fee_wei: u128 = fees[i]
                    .parse()
                    .map_err(|e| CliError::input(format!("{}: line {}: fees_wei: {e}", usage.display(), usage_t.lines[i])))?;
                let p = series.at(start);
                let hours = total_ns.get(&start).copied().unwrap_or(0) as f64 / NS_PER_HOUR;
                // The effective price reproduces the exact fee total.
                let price = if g > 0.0 { fee_wei as f64 / g } else { 0.0 };
                let r = fee_economics(g, price, p.eth_usd, hours, p.infra_usd_per_hour)?;
                rows.push(EconomicsRow { window_start: start, gas_used: Some(g as u64), result: r });
            }
            bundle_inputs.push((usage.clone(), crate::error::read_input(usage)?));
            bundle_inputs.push((macro_csv.clone(), macro_bytes));
            bundle_inputs.push((prices.clone(), crate::error::read_input(prices)?));
            rows
        }
        EconomicsInput::Summary { path } => {
            let t = read_table(path)?;
            let first = t.floats("first_block").map_err(CliError::input)?;
            let fee = t.floats("fee_usd").map_err(CliError::input)?;
            let infra = t.floats("infra_usd").map_err(CliError::input)?;
            let mut rows = Vec::new();
            for i in 0..first.len() {
                let (Some(b), Some(f), Some(c)) = (first[i], fee[i], infra[i]) else {
                    return Err(CliError::input(format!("{}: line {}: incomplete row", path.display(), t.lines[i])));
                };
                if f < 0.0 || c < 0.0 {
                    return Err(CliError::input(format!("{}: line {}: negative cost", path.display(), t.lines[i])));
                }
                rows.push(EconomicsRow {
                    window_start: b as u64,
                    gas_used: None,
                    result: FeeEconomics { fee_eth: f64::NAN, fee_usd: f, infra_usd: c, ratio: (c > 0.0).then(|| f / c) },
                });
            }
            bundle_inputs.push((path.clone(), crate::error::read_input(path)?));
            rows
        }
    };
    let mut bundle = Bundle::create(resolve_out(out, "economics"), "economics")?;
    for (p, b) in &bundle_inputs {
        bundle.input(p, b);
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let e = &r.result;
            vec![
                r.window_start.to_string(),
                r.gas_used.map(|g| g.to_string()).unwrap_or_default(),
                if e.fee_eth.is_nan() { String::new() } else { fmt_f64(e.fee_eth) },
                fmt_f64(e.fee_usd),
                fmt_f64(e.infra_usd),
                fmt_opt(e.ratio),
            ]
        })
        .collect();
    bundle.write(
        "economics.csv",
        &csv_table(&["window_start", "gas_used", "fee_eth", "fee_usd", "infra_usd", "ratio"], &table),
    )?;
    bundle.finish()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_arithmetic() {
        let r = fee_economics(21_000.0, 20e9, 200.0, 0.0, 1.0).unwrap();
        assert!((r.fee_eth - 0.00042).abs() < 1e-18);
        assert!((r.fee_usd - 0.084).abs() < 1e-12);
        assert_eq!(r.ratio, None);
        assert!(fee_economics(-1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn step_lookup() {
        let s = PriceSeries::new(vec![
            PricePoint { window_start: 100, eth_usd: 2.0, infra_usd_per_hour: 1.0 },
            PricePoint { window_start: 0, eth_usd: 1.0, infra_usd_per_hour: 1.0 },
        ])
        .unwrap();
        assert_eq!(s.at(50).eth_usd, 1.0);
        assert_eq!(s.at(100).eth_usd, 2.0);
        assert_eq!(s.at(10_000).eth_usd, 2.0);
    }
}
