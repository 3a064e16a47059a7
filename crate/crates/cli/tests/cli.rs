use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gaslab_cli::analyze::{analyze, AnalyzeOptions};
use gaslab_cli::economics::fee_economics;
use gaslab_cli::plot::plot;
use gaslab_cli::simulate::{simulate, ClockKind, SimulateOptions};
use gaslab_core::evm::Opcode;
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn workload(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/workloads").join(format!("{name}.toml"))
}

fn gaslab(args: &[&str], out_root: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gaslab")).args(args).env("GASLAB_OUT", out_root).output().unwrap()
}

fn virtual_sim(dir: &Path, blocks: u64) -> SimulateOptions {
    let mut o = SimulateOptions::new(workload("sload_heavy"), blocks);
    o.clock = ClockKind::Virtual;
    o.micro_window = 100;
    o.macro_window = 100;
    o.out = Some(dir.to_path_buf());
    o
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let missing = gaslab(&["simulate", "--spec", "/nonexistent/spec.toml", "--blocks", "10"], root);
    assert_eq!(missing.status.code(), Some(2));

    let bad_spec = root.join("bad.toml");
    std::fs::write(&bad_spec, "txs_per_block = 1\ntx_length = 3\n[mix]\nBOGUS = 1.0\n").unwrap();
    assert_eq!(gaslab(&["simulate", "--spec", bad_spec.to_str().unwrap()], root).status.code(), Some(2));

    let header_only = root.join("empty.csv");
    std::fs::write(&header_only, "window_start,opcode,count,total_gas,total_time_ns\n").unwrap();
    assert_eq!(gaslab(&["analyze", "--micro", header_only.to_str().unwrap()], root).status.code(), Some(2));

    let malformed = root.join("bad.csv");
    std::fs::write(&malformed, "window_start,opcode,count,total_gas,total_time_ns\n0,ADD,1,3,9\n0,SLOAD,x,3,9\n").unwrap();
    let out = gaslab(&["analyze", "--micro", malformed.to_str().unwrap()], root);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));

    let unknown = gaslab(&["plot", "--bundle", root.to_str().unwrap(), "--figure", "nope"], root);
    assert_eq!(unknown.status.code(), Some(2));

    // A regular file where the output directory should go.
    let blocker = root.join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let spec = workload("add_only");
    let io = gaslab(
        &["simulate", "--spec", spec.to_str().unwrap(), "--blocks", "5", "--clock", "virtual", "--out", blocker.join("x").to_str().unwrap()],
        root,
    );
    assert_eq!(io.status.code(), Some(3));

    let ok = gaslab(&["simulate", "--spec", spec.to_str().unwrap(), "--blocks", "5", "--clock", "virtual", "--out", "rel"], root);
    assert_eq!(ok.status.code(), Some(0));
    assert!(root.join("rel/micro.csv").exists());
}

#[test]
fn simulate_is_deterministic_in_virtual_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let a = simulate(&virtual_sim(&tmp.path().join("a"), 600)).unwrap();
    let b = simulate(&virtual_sim(&tmp.path().join("b"), 600)).unwrap();
    for f in ["micro.csv", "macro.csv", "usage.csv", "receipts.json", "manifest.json"] {
        let x = std::fs::read(a.dir.join(f)).unwrap();
        let y = std::fs::read(b.dir.join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let mut other = virtual_sim(&tmp.path().join("c"), 600);
    other.seed = Some(1);
    let c = simulate(&other).unwrap();
    assert_ne!(std::fs::read(a.dir.join("micro.csv")).unwrap(), std::fs::read(c.dir.join("micro.csv")).unwrap());
}

#[test]
fn smoke_run_fits_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let mut o = SimulateOptions::new(workload("mainnet_like"), 5000);
    o.out = Some(tmp.path().to_path_buf());
    let t = Instant::now();
    let r = simulate(&o).unwrap();
    assert!(t.elapsed().as_secs() < 60, "{:?}", t.elapsed());
    assert_eq!(r.report.blocks, 5000);
    assert_eq!(r.report.receipts.successful, r.report.receipts.transactions);
}

#[test]
fn published_fixture_classification() {
    let tmp = tempfile::tempdir().unwrap();
    let mut o = AnalyzeOptions::new(fixture("published_averages_micro.csv"));
    o.min_windows = 8;
    o.out = Some(tmp.path().to_path_buf());
    let r = analyze(&o).unwrap();
    assert!(r.classification.is_dependent(Opcode::SLOAD));
    assert!(r.classification.is_dependent(Opcode::SSTORE));
    assert!(!r.classification.is_dependent(Opcode::PUSH1));
    assert!(!r.classification.is_dependent(Opcode::MSTORE));
    let table = std::fs::read_to_string(tmp.path().join("classification.csv")).unwrap();
    assert!(table.contains("SLOAD,0.96717783713753"));
}

#[test]
fn analyze_and_plot_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulate(&virtual_sim(&tmp.path().join("sim"), 2000)).unwrap();
    let run = |name: &str| {
        let mut o = AnalyzeOptions::new(sim.dir.join("micro.csv"));
        o.macro_csv = Some(sim.dir.join("macro.csv"));
        o.receipts = Some(sim.dir.join("receipts.json"));
        o.out = Some(tmp.path().join(name));
        analyze(&o).unwrap()
    };
    let a = run("a");
    let b = run("b");
    for f in ["classification.csv", "models.json", "mean_times.csv", "gas_curves.csv", "tpg_curves.csv", "dependent_share.csv", "macro_micro.csv", "report.json", "proposed.gas"] {
        assert_eq!(std::fs::read(a.dir.join(f)).unwrap(), std::fs::read(b.dir.join(f)).unwrap(), "{f}");
    }
    let p1 = plot(&a.dir, "tpg", Some(&tmp.path().join("1.svg"))).unwrap();
    let p2 = plot(&a.dir, "tpg", Some(&tmp.path().join("2.svg"))).unwrap();
    assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    for figure in ["mean-time", "dependent-share", "gas", "macro-micro"] {
        let svg = std::fs::read_to_string(plot(&a.dir, figure, None).unwrap()).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"), "{figure}");
    }
    // The table behind the tpg figure: rising current curve, flat proposed one.
    assert!(a.report.current_tpg_trend.increasing);
    assert!(a.report.proposed_tpg_max_rel_dev.unwrap() < 0.1);
    assert!(a.classification.is_dependent(Opcode::SLOAD));
    assert!(!a.classification.is_dependent(Opcode::ADD));
}

#[test]
fn schedule_materialize() {
    let tmp = tempfile::tempdir().unwrap();
    let sched = tmp.path().join("p.gas");
    let mut text = gaslab_core::evm::GasSchedule::default_schedule().to_text();
    text = text.replace("SLOAD = 200", "SLOAD = poly 200.0 0.001");
    std::fs::write(&sched, text).unwrap();
    let out = gaslab(&["schedule", "materialize", "--height", "100000", "--schedule", sched.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("@height = 100000\n"));
    assert!(stdout.contains("SLOAD = 300\n"));
    let back = gaslab_core::evm::GasSchedule::parse(&stdout).unwrap();
    assert_eq!(back.materialized_at, Some(100000));
}

#[test]
fn economics_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gaslab(
        &["economics", "--gas-used", "21000", "--gas-price", "20000000000", "--eth-usd", "200", "--hours", "1", "--rate", "0.5"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["fee_eth"].as_f64().unwrap() - 0.00042).abs() < 1e-15);
    assert!((v["fee_usd"].as_f64().unwrap() - 0.084).abs() < 1e-12);

    let summary = gaslab(
        &["economics", "--summary", fixture("fee_gap_summary.csv").to_str().unwrap(), "--out", "fees"],
        tmp.path(),
    );
    assert_eq!(summary.status.code(), Some(0));
    let table = std::fs::read_to_string(tmp.path().join("fees/economics.csv")).unwrap();
    let ratio: f64 = table.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(ratio > 1e7);

    let sim = simulate(&virtual_sim(&tmp.path().join("sim"), 300)).unwrap();
    let run = gaslab(
        &[
            "economics",
            "--usage",
            sim.dir.join("usage.csv").to_str().unwrap(),
            "--macro",
            sim.dir.join("macro.csv").to_str().unwrap(),
            "--prices",
            fixture("prices_example.csv").to_str().unwrap(),
            "--out",
            "simfees",
        ],
        tmp.path(),
    );
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let t = std::fs::read_to_string(tmp.path().join("simfees/economics.csv")).unwrap();
    assert_eq!(t.lines().count(), 4);
    let fee_usd: f64 = t.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    let wei = sim.report.usage[&0].fees_wei as f64;
    assert!((fee_usd - wei / 1e18 * 200.0).abs() < 1e-9 * fee_usd);
    assert_eq!(plot(&tmp.path().join("simfees"), "economics", None).unwrap().extension().unwrap(), "svg");
}

#[test]
fn published_chi_square_accepts() {
    let text = std::fs::read_to_string(fixture("chi_square_published.csv")).unwrap();
    let row: Vec<f64> = text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let r = gaslab_core::model::chi_square_decision(row[0], row[1] as u64, row[2]).unwrap();
    assert!(r.accept);
    assert!((r.critical - row[3]).abs() < 0.005);
}

proptest! {
    #[test]
    fn fee_economics_is_linear(
        g in 0.0f64..1e9, p in 0.0f64..1e12, e in 0.0f64..1e4, h in 0.001f64..1e3, r in 0.01f64..100.0, k in 0.0f64..50.0,
    ) {
        let base = fee_economics(g, p, e, h, r).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
        prop_assert!(close(fee_economics(k * g, p, e, h, r).unwrap().fee_usd, k * base.fee_usd));
        prop_assert!(close(fee_economics(g, k * p, e, h, r).unwrap().fee_usd, k * base.fee_usd));
        prop_assert!(close(fee_economics(g, p, k * e, h, r).unwrap().fee_usd, k * base.fee_usd));
        prop_assert!(close(fee_economics(g, p, e, k * h, r).unwrap().infra_usd, k * base.infra_usd));
        prop_assert!(close(fee_economics(g, p, e, h, k * r).unwrap().infra_usd, k * base.infra_usd));
    }
}
