use gaslab_core::chain::{generate_block, run_chain, Chain, RunConfig, TimingOrder, WorkloadSpec};
use gaslab_core::evm::{Clock, GasSchedule, Opcode, VirtualCosts};
use gaslab_core::instrument::{write_macro, write_micro, MacroCategory};
use gaslab_core::par::Strategy;

fn spec(txs: usize, rate: f64, mix: &str) -> WorkloadSpec {
    WorkloadSpec::parse(&format!(
        "txs_per_block = {txs}\ntx_length = 40\nfresh_key_rate = {rate}\ninitial_keys = 64\nseed = 17\n[mix]\n{mix}\n"
    ))
    .unwrap()
}

const STORAGE_MIX: &str = "SLOAD = 0.3\nSSTORE = 0.1\nADD = 0.2\nPUSH1 = 0.2\nMSTORE = 0.1\nCALLCODE = 0.1";

fn virtual_config() -> RunConfig {
    RunConfig { micro_window: 50, macro_window: 50, clock: Clock::Virtual(VirtualCosts::default()), ..Default::default() }
}

fn csv_bytes(s: &WorkloadSpec, blocks: u64, cfg: &RunConfig) -> (Vec<u8>, Vec<u8>) {
    let r = run_chain(s, blocks, &GasSchedule::default_schedule(), cfg).unwrap();
    let (mut micro, mut mac) = (Vec::new(), Vec::new());
    write_micro(&r.micro, &mut micro).unwrap();
    write_macro(&r.macro_windows, &mut mac).unwrap();
    (micro, mac)
}

#[test]
fn virtual_runs_are_byte_identical() {
    let s = spec(3, 0.5, STORAGE_MIX);
    let a = csv_bytes(&s, 300, &virtual_config());
    let b = csv_bytes(&s, 300, &virtual_config());
    assert_eq!(a, b);
    let seq = RunConfig { strategy: Strategy::Sequential, batch: 13, ..virtual_config() };
    assert_eq!(a, csv_bytes(&s, 300, &seq));
    let mut other = s.clone();
    other.seed += 1;
    assert_ne!(a.0, csv_bytes(&other, 300, &virtual_config()).0);
}

#[test]
fn state_grows_with_fresh_keys_only() {
    for rate in [0.0, 0.25, 1.0] {
        let s = spec(2, rate, STORAGE_MIX);
        let r = run_chain(&s, 200, &GasSchedule::default_schedule(), &virtual_config()).unwrap();
        assert_eq!(r.receipts.successful, 400);
        assert_eq!(r.key_count as u64, s.expected_keys(200), "rate {rate}");
    }
}

#[test]
fn pure_add_workload_stays_flat() {
    let s = spec(2, 1.0, "ADD = 0.5\nPUSH1 = 0.5");
    let r = run_chain(&s, 400, &GasSchedule::default_schedule(), &virtual_config()).unwrap();
    assert_eq!(r.key_count, 64);
    let means: Vec<f64> = r.micro.iter().map(|w| w.mean_time(Opcode::ADD).unwrap()).collect();
    assert!(means.windows(2).all(|p| p[0] == p[1]));
    let roots: Vec<_> = (0..3).map(|_| r.final_root).collect();
    assert!(roots.iter().all(|x| *x == roots[0]));
}

#[test]
fn virtual_sload_cost_tracks_state_size() {
    let s = spec(2, 1.0, STORAGE_MIX);
    let r = run_chain(&s, 600, &GasSchedule::default_schedule(), &virtual_config()).unwrap();
    let first = r.micro.first().unwrap().mean_time(Opcode::SLOAD).unwrap();
    let last = r.micro.last().unwrap().mean_time(Opcode::SLOAD).unwrap();
    assert!(last > first, "{first} -> {last}");
}

#[test]
fn empty_blocks_have_no_evm_time() {
    let s = spec(0, 0.5, STORAGE_MIX);
    let r = run_chain(&s, 120, &GasSchedule::default_schedule(), &virtual_config()).unwrap();
    assert_eq!(r.receipts.transactions, 0);
    assert_eq!(r.macro_windows.len(), 3);
    for w in &r.macro_windows {
        assert_eq!(w.category(MacroCategory::EVM), 0);
        assert_eq!(w.category(MacroCategory::TX), 0);
        assert!(w.category(MacroCategory::Total) > 0);
    }
    assert!(r.micro.iter().all(|w| w.opcodes.is_empty()));
}

#[test]
fn gas_is_conserved_across_the_run() {
    let s = spec(3, 0.5, STORAGE_MIX);
    let r = run_chain(&s, 150, &GasSchedule::default_schedule(), &virtual_config()).unwrap();
    assert_eq!(r.receipts.out_of_gas + r.receipts.other_failures, 0);
    assert_eq!(r.receipts.gas_used, r.receipts.intrinsic_gas + r.receipts.sampled_gas);
    let windows: u64 = r.micro.iter().map(|w| w.micro_gas()).sum();
    assert_eq!(windows, r.receipts.sampled_gas);
    assert_eq!(r.receipts.fees_wei, r.receipts.gas_used as u128 * s.gas_price as u128);
    assert_eq!(r.tally.transactions, 450);
    assert_eq!(r.usage.keys().copied().collect::<Vec<_>>(), [0, 50, 100]);
    assert_eq!(r.usage.values().map(|u| u.gas_used).sum::<u64>(), r.receipts.gas_used);
    assert_eq!(r.usage.values().map(|u| u.transactions).sum::<u64>(), 450);
}

#[test]
fn spans_nest_under_wall_clock() {
    let s = spec(2, 0.5, STORAGE_MIX);
    let r = run_chain(&s, 100, &GasSchedule::default_schedule(), &RunConfig::default()).unwrap();
    for w in &r.macro_windows {
        let c = |k| w.category(k);
        assert!(c(MacroCategory::Total) >= c(MacroCategory::Import));
        assert!(c(MacroCategory::Import) >= c(MacroCategory::TX));
        assert!(c(MacroCategory::TX) >= c(MacroCategory::EVM));
        assert!(c(MacroCategory::EVM) > 0);
    }
}

#[test]
fn replay_order_does_not_change_the_chain() {
    let s = spec(2, 1.0, STORAGE_MIX);
    let sched = GasSchedule::default_schedule();
    let a = run_chain(&s, 120, &sched, &virtual_config()).unwrap();
    let b = run_chain(&s, 120, &sched, &RunConfig { order: TimingOrder::ShuffledReplay { seed: 5 }, ..virtual_config() })
        .unwrap();
    assert_eq!(a.final_root, b.final_root);
    assert_eq!(a.receipts, b.receipts);
    // The tally comes from the untimed pass, so only counts and gas match.
    assert_eq!(a.tally.transactions, b.tally.transactions);
    for (op, x) in a.tally.samples.iter() {
        let y = b.tally.samples.get(op);
        assert_eq!((x.count, x.gas), (y.count, y.gas));
    }
}

#[test]
fn manual_import_matches_run_chain() {
    let s = spec(2, 0.5, STORAGE_MIX);
    let sched = GasSchedule::default_schedule();
    let mut chain = Chain::genesis(s.clone(), sched.clone(), virtual_config()).unwrap();
    let mut roots = Vec::new();
    for h in 0..60 {
        let b = chain.import(generate_block(&s, h)).unwrap();
        assert!(b.parent_root.is_some());
        roots.push(b.post_root.unwrap());
    }
    let direct = chain.finish();
    let r = run_chain(&s, 60, &sched, &virtual_config()).unwrap();
    assert_eq!(direct.final_root, r.final_root);
    assert_eq!(*roots.last().unwrap(), r.final_root);
    assert_eq!(direct.micro, r.micro);
}

#[test]
fn shipped_workloads_run() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/workloads");
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let s = WorkloadSpec::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let r = run_chain(&s, 20, &GasSchedule::default_schedule(), &virtual_config()).unwrap();
        assert_eq!(r.receipts.successful, r.receipts.transactions, "{}", s.name);
        assert_eq!(r.key_count as u64, s.expected_keys(20), "{}", s.name);
        names.push(s.name);
    }
    names.sort();
    assert_eq!(names, ["add_only", "mainnet_like", "sload_heavy"]);
}
