//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qcm::controller::QcmFlowTable;
use qcm::scenario::{Scenario, FIG8_GOLDEN_TRACE};
use qcm::sim::random::{mutation_event_count, random_topology, settle_time, RandomTopologyParams};
use qcm::sim::{run, ControllerMode, Simulation, TraceMode};
use qcm::wire::{
    decode_multipart, encode_multipart, encode_stats, fragment, reassemble, DecodeMode, Direction,
    QcmMultipart, OFPMPF_REQ_MORE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fig8_reproduction() -> Outcome {
    let scenario = Scenario::fig8();
    check(
        scenario.topology.trace_mode == TraceMode::LegacyFig8,
        || "bundled scenario is not in legacy mode".into(),
    )?;
    let start = Instant::now();
    let trace =
        run(&scenario.topology, scenario.t_end, scenario.seed).map_err(|e| e.to_string())?;
    let rendered = trace.render();
    let elapsed = start.elapsed();
    if rendered != FIG8_GOLDEN_TRACE {
        let line = rendered
            .lines()
            .zip(FIG8_GOLDEN_TRACE.lines())
            .position(|(a, b)| a != b)
            .map_or("length".to_string(), |i| format!("line {}", i + 1));
        return Err(format!("trace differs from golden at {line}"));
    }
    check(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} lines byte-identical in {elapsed:?}",
        rendered.lines().count()
    ))
}

fn wire_sizes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    const N: usize = 10_000;
    for i in 0..N {
        let r = common::gen_record(&mut rng);
        let body = encode_stats(&r).map_err(|e| e.to_string())?;
        check(body.len() == 56, || {
            format!("record {i}: {} bytes", body.len())
        })?;
        let dir = if rng.gen() {
            Direction::Request
        } else {
            Direction::Reply
        };
        let empty = encode_multipart(&QcmMultipart::new(dir, rng.gen(), Vec::new()))
            .map_err(|e| e.to_string())?;
        check(empty.len() == 16, || {
            format!("empty frame {i}: {} bytes", empty.len())
        })?;
        let one = encode_multipart(&QcmMultipart::reply(rng.gen(), vec![r]))
            .map_err(|e| e.to_string())?;
        check(one.len() == 72, || {
            format!("one-record frame {i}: {} bytes", one.len())
        })?;
    }
    Ok(format!(
        "{N} records at 56 bytes, {N} empty frames at 16 bytes"
    ))
}

fn codec_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    const N: usize = 10_000;
    for i in 0..N {
        let n = rng.gen_range(0..=100);
        let records: Vec<_> = (0..n).map(|_| common::gen_record(&mut rng)).collect();
        let dir = if rng.gen() {
            Direction::Request
        } else {
            Direction::Reply
        };
        let mut m = QcmMultipart::new(dir, rng.gen(), records);
        if rng.gen() {
            m.flags = OFPMPF_REQ_MORE;
        }
        let bytes = encode_multipart(&m).map_err(|e| format!("message {i}: {e}"))?;
        let back = decode_multipart(&bytes, DecodeMode::Strict)
            .map_err(|e| format!("message {i}: {e}"))?;
        check(back == m, || format!("message {i} did not round-trip"))?;
    }
    let pool: Vec<_> = (0..3000).map(|_| common::gen_record(&mut rng)).collect();
    for len in 0..=3000 {
        let segs = fragment(&pool[..len], 11, Direction::Reply);
        let back = reassemble(&segs).map_err(|e| format!("length {len}: {e}"))?;
        check(back == pool[..len], || {
            format!("length {len} did not reassemble")
        })?;
    }
    let one = fragment(&pool[..1169], 1, Direction::Reply);
    check(one.len() == 1 && !one[0].more(), || {
        "1169 records should fit one final segment".into()
    })?;
    check(
        encode_multipart(&one[0]).map(|b| b.len()) == Ok(65_480),
        || "1169-record segment size".into(),
    )?;
    let two = fragment(&pool[..1170], 1, Direction::Reply);
    check(two.len() == 2 && two[0].more() && !two[1].more(), || {
        "1170 records should split in two".into()
    })?;
    check(
        two[0].records.len() == 1169 && two[1].records.len() == 1,
        || "1170 split sizes".into(),
    )?;
    Ok(format!(
        "{N} messages, fragment lengths 0..=3000, 1169/1170 boundary"
    ))
}

fn convergence() -> Outcome {
    const TOPOLOGIES: u64 = 100;
    let start = Instant::now();
    let mut checked = 0;
    for mode in [
        ControllerMode::Poll,
        ControllerMode::Async,
        ControllerMode::Mixed,
    ] {
        let params = RandomTopologyParams {
            min_devices: 1,
            max_devices: 16,
            mutation_events: 100,
            mode,
            ..RandomTopologyParams::default()
        };
        for seed in 0..TOPOLOGIES {
            let topo = random_topology(seed, &params);
            let events = mutation_event_count(&topo);
            check(events >= 100, || {
                format!("{mode:?} seed {seed}: only {events} mutation events")
            })?;
            let t_end = settle_time(&topo);
            let mut sim = Simulation::new(topo, seed).map_err(|e| e.to_string())?;
            sim.run_until(t_end);
            let divergent = sim.divergent_devices();
            check(divergent.is_empty(), || {
                format!("{mode:?} seed {seed}: divergent devices {divergent:?}")
            })?;
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{checked} topologies across POLL/ASYNC/MIXED, 0 divergent, {elapsed:?}"
    ))
}

fn pipeline_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    const N: usize = 10_000;
    let mut ties = 0;
    for i in 0..N {
        let entries = common::gen_entries(&mut rng, 32);
        let mut table = QcmFlowTable::new();
        for e in &entries {
            table.install(e.clone()).map_err(|e| e.to_string())?;
        }
        let attrs = common::gen_record(&mut rng);
        let expected = common::oracle_lookup(&entries, &attrs);
        if let Some(best) = expected {
            let tied = entries
                .iter()
                .filter(|e| e.priority == best.priority && e.matcher.matches(&attrs))
                .count();
            ties += usize::from(tied > 1);
        }
        let expected = expected.map(|e| e.actions.as_slice()).unwrap_or(&[]);
        check(table.match_packet_in(&attrs) == expected, || {
            format!("instance {i} mismatched")
        })?;
    }
    check(ties > 0, || "no priority ties were exercised".into())?;
    Ok(format!(
        "{N} instances, 0 mismatches, {ties} with priority ties"
    ))
}

fn determinism() -> Outcome {
    const N: u64 = 24;
    let modes = [
        ControllerMode::Poll,
        ControllerMode::Async,
        ControllerMode::Mixed,
    ];
    for seed in 0..N {
        let params = RandomTopologyParams {
            max_devices: 8,
            mutation_events: 60,
            mode: modes[seed as usize % 3],
            trace_mode: if seed % 4 == 3 {
                TraceMode::LegacyFig8
            } else {
                TraceMode::Canonical
            },
            ..RandomTopologyParams::default()
        };
        let topo = random_topology(1000 + seed, &params);
        let t_end = settle_time(&topo);
        let a = run(&topo, t_end, seed).map_err(|e| e.to_string())?.render();
        let b = run(&topo, t_end, seed).map_err(|e| e.to_string())?.render();
        check(a == b, || {
            format!("scenario {seed} produced different traces")
        })?;
        check(a.lines().count() > 1, || {
            format!("scenario {seed} produced an empty trace")
        })?;
    }
    Ok(format!(
        "{N} randomized scenarios byte-identical across two runs"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("1 fig8 trace reproduction", fig8_reproduction),
        ("2 wire sizes", wire_sizes),
        ("3 codec round trip", codec_round_trip),
        ("4 controller/agent convergence", convergence),
        ("5 flow table vs linear scan", pipeline_oracle),
        ("6 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 6 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
