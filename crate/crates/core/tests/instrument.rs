use std::sync::Arc;

use gaslab_core::evm::{OpStats, Opcode};
use gaslab_core::instrument::{read_macro, read_micro, write_macro, write_micro, MacroCategory, SampleSink};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OPS: [Opcode; 4] = [Opcode::ADD, Opcode::SLOAD, Opcode::SSTORE, Opcode::PUSH1];

#[test]
fn concurrent_recording_matches_sequential_sums() {
    let sink = Arc::new(SampleSink::new(0));
    let plan: Vec<Vec<(usize, u64, u64, u64)>> = (0..8)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(t);
            (0..1000)
                .map(|_| (rng.random_range(0..4), rng.random_range(1..30_000), rng.random_range(0..100_000), rng.random_range(0..5_000)))
                .collect()
        })
        .collect();
    std::thread::scope(|s| {
        for events in &plan {
            let sink = Arc::clone(&sink);
            s.spawn(move || {
                for (i, gas, time, span) in events {
                    sink.record_instruction(OPS[*i], *gas, *time);
                    sink.record_span(MacroCategory::EVM, *span);
                }
            });
        }
    });
    let mut sink = Arc::try_unwrap(sink).ok().unwrap();
    let w = sink.close_window(100).clone();
    let mut expected = [OpStats::default(); 4];
    let mut span = 0;
    for (i, gas, time, s) in plan.iter().flatten() {
        expected[*i].count += 1;
        expected[*i].gas += gas;
        expected[*i].time_ns += time;
        span += s;
    }
    for (i, op) in OPS.iter().enumerate() {
        assert_eq!(w.opcode(*op), expected[i]);
    }
    assert_eq!(w.category(MacroCategory::EVM), span);
    assert_eq!(w.category(MacroCategory::DB), 0);
}

#[test]
fn csv_round_trip() {
    let mut sink = SampleSink::new(0);
    for start in [0u64, 500, 1000] {
        for (k, op) in OPS.iter().enumerate() {
            sink.record_stats(*op, OpStats { count: start + k as u64 + 1, gas: 3 * (start + 1), time_ns: 77 * start + 5 });
        }
        for c in MacroCategory::ALL {
            sink.record_span(c, start + c as u64);
        }
        sink.close_window(start + 500);
    }
    let windows = sink.into_archive();
    let mut micro = Vec::new();
    write_micro(&windows, &mut micro).unwrap();
    let mut mac = Vec::new();
    write_macro(&windows, &mut mac).unwrap();
    let back = read_micro(micro.as_slice()).unwrap();
    let back_macro = read_macro(mac.as_slice()).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in windows.iter().zip(&back) {
        assert_eq!(a.window_start, b.window_start);
        assert_eq!(a.opcodes, b.opcodes);
    }
    for (a, b) in windows.iter().zip(&back_macro) {
        assert_eq!(a.categories, b.categories);
    }
    let mut again = Vec::new();
    write_micro(&back, &mut again).unwrap();
    assert_eq!(again, micro);
}

#[test]
fn malformed_rows_name_their_line() {
    let text = format!("{}\n0,ADD,1,3,10\n0,NOPE,1,3,10\n", gaslab_core::instrument::MICRO_HEADER.join(","));
    let err = read_micro(text.as_bytes()).unwrap_err();
    assert!(err.to_string().contains('3'), "{err}");
    assert!(err.is_input_error());
}
