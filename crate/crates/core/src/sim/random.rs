//! Seeded random topologies for property and acceptance testing.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ControllerMode, DeviceConfig, NodeModel, ScheduledChange, Topology, TraceMode};
use crate::controller::{Action, QcmFlowEntry, QcmMatch};
use crate::devices::{MutationScript, NodeEvent, ScriptEntry};
use crate::metadata::{
    validate_record, ChannelSpec, ComProtocolId, ComSpec, EcSpec, FieldUpdate, FieldValue,
    QcmRecord,
};
use crate::time::SimTime;

#[derive(Debug, Clone)]
pub struct RandomTopologyParams {
    pub min_devices: usize,
    pub max_devices: usize,
    /// Total mutation-producing events across all devices (script entries,
    /// node events and controller changes).
    pub mutation_events: usize,
    /// Scheduled events fall in `[0, horizon)` ticks.
    pub horizon: u64,
    pub mode: ControllerMode,
    pub max_delay: u64,
    pub jitter: bool,
    pub trace_mode: TraceMode,
}

impl Default for RandomTopologyParams {
    fn default() -> Self {
        RandomTopologyParams {
            min_devices: 1,
            max_devices: 16,
            mutation_events: 100,
            horizon: 200,
            mode: ControllerMode::Mixed,
            max_delay: 3,
            jitter: true,
            trace_mode: TraceMode::Canonical,
        }
    }
}

/// A valid record drawn uniformly over small value ranges.
pub fn random_record<R: Rng>(rng: &mut R) -> QcmRecord {
    let qcom = ComProtocolId(rng.gen_range(0..6));
    let qec = rng.gen_range(0..4u16);
    let r = QcmRecord {
        qchannel: rng.gen(),
        qchannel_spec: random_channel_spec(rng),
        qcom,
        qcom_spec: if qcom.is_none() {
            ComSpec::default()
        } else {
            ComSpec(rng.gen())
        },
        qec,
        qec_spec: if qec == 0 {
            EcSpec::default()
        } else {
            random_ec_spec(rng)
        },
    };
    debug_assert!(validate_record(&r).is_empty());
    r
}

pub fn random_channel_spec<R: Rng>(rng: &mut R) -> ChannelSpec {
    ChannelSpec {
        wavelength_pm: rng.gen(),
        mean_photon_milli: rng.gen(),
        symbol_rate_hz: rng.gen(),
        reserved: 0,
    }
}

/// Nonzero code parameters.
pub fn random_ec_spec<R: Rng>(rng: &mut R) -> EcSpec {
    EcSpec::new(rng.gen_range(1..=u16::MAX), rng.gen(), rng.gen(), rng.gen())
}

/// An identifier-only update, always valid regardless of the current record
/// except for coupled id/spec rules, which it sidesteps by never clearing an id.
fn random_script_update<R: Rng>(rng: &mut R) -> FieldUpdate {
    match rng.gen_range(0..3) {
        0 => FieldUpdate::new(FieldValue::Qchannel(rng.gen())),
        1 => FieldUpdate::new(FieldValue::QchannelSpec(random_channel_spec(rng))),
        _ => FieldUpdate::new(FieldValue::Qcom(ComProtocolId(rng.gen_range(1..6)))),
    }
}

pub fn random_topology(seed: u64, params: &RandomTopologyParams) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(params.min_devices..=params.max_devices);
    let mut ids: Vec<u32> = (1..=(4 * n as u32)).collect();
    ids.shuffle(&mut rng);
    ids.truncate(n);

    let models: Vec<NodeModel> = ids
        .iter()
        .map(|_| match rng.gen_range(0..3) {
            0 => NodeModel::Scripted,
            1 => NodeModel::Memory {
                slots: rng.gen_range(1..8),
            },
            _ => NodeModel::Repeater,
        })
        .collect();

    let mut script_times: Vec<BTreeSet<u64>> = vec![BTreeSet::new(); n];
    let mut events: Vec<Vec<(SimTime, NodeEvent)>> = vec![Vec::new(); n];
    let mut changes = Vec::new();

    for _ in 0..params.mutation_events {
        let d = rng.gen_range(0..n);
        let t = rng.gen_range(0..params.horizon);
        match (rng.gen_range(0..10), &models[d]) {
            (0, _) => changes.push(ScheduledChange {
                time: SimTime::from_ticks(t),
                device: ids[d],
                record: random_record(&mut rng),
            }),
            (1..=4, NodeModel::Memory { slots }) => {
                let slot = rng.gen_range(0..*slots);
                let ev = match rng.gen_range(0..5) {
                    0 => NodeEvent::Read { slot },
                    1 => NodeEvent::Write { slot },
                    2 => NodeEvent::Measure { slot },
                    3 => NodeEvent::QecCycle,
                    _ => NodeEvent::SetQec {
                        code: rng.gen_range(1..5),
                        spec: random_ec_spec(&mut rng),
                    },
                };
                events[d].push((SimTime::from_ticks(t), ev));
            }
            (1..=4, NodeModel::Repeater) => {
                let ev = match rng.gen_range(0..3) {
                    0 => NodeEvent::AdvanceStage,
                    1 => NodeEvent::Retune {
                        spec: random_channel_spec(&mut rng),
                    },
                    _ => NodeEvent::SetQec {
                        code: rng.gen_range(1..5),
                        spec: random_ec_spec(&mut rng),
                    },
                };
                events[d].push((SimTime::from_ticks(t), ev));
            }
            _ => {
                // Script times must be distinct; redraw until free.
                let mut t = t;
                while !script_times[d].insert(t) {
                    t = rng.gen_range(0..params.horizon.max(params.mutation_events as u64));
                }
            }
        }
    }

    let devices = ids
        .iter()
        .zip(models)
        .enumerate()
        .map(|(i, (&id, model))| {
            let entries = std::mem::take(&mut script_times[i])
                .into_iter()
                .map(|t| ScriptEntry {
                    time: SimTime::from_ticks(t),
                    update: random_script_update(&mut rng),
                })
                .collect();
            DeviceConfig {
                id,
                model,
                initial: random_record(&mut rng),
                script: MutationScript::new(entries).expect("distinct times in order"),
                events: std::mem::take(&mut events[i]),
            }
        })
        .collect();

    let flow_entries = (0..rng.gen_range(0..6))
        .map(|i| QcmFlowEntry {
            entry_id: i,
            priority: rng.gen_range(0..4),
            matcher: QcmMatch {
                qchannel: None,
                qcom: rng
                    .gen_bool(0.5)
                    .then(|| ComProtocolId(rng.gen_range(0..6))),
                qec: rng.gen_bool(0.3).then(|| rng.gen_range(0..4)),
            },
            actions: vec![Action::new(format!("act{i}"))
                .with_param("port", rng.gen_range(1..9u8).to_string())],
        })
        .collect();

    let delay = rng.gen_range(0..=params.max_delay);
    Topology {
        devices,
        mode: params.mode,
        poll_period: SimTime::from_ticks(rng.gen_range(1..=10)),
        bootstrap_poll: true,
        channel_delay: SimTime::from_ticks(delay),
        channel_jitter: if params.jitter {
            SimTime::from_ratio(rng.gen_range(0..=4), 2)
        } else {
            SimTime::ZERO
        },
        changes,
        flow_entries,
        trace_mode: params.trace_mode,
    }
}

/// A run length leaving every scheduled change time to settle: at least two
/// poll periods and several worst-case channel hops past the last event.
pub fn settle_time(topology: &Topology) -> SimTime {
    let last = topology
        .devices
        .iter()
        .flat_map(|d| {
            d.script
                .entries()
                .iter()
                .map(|e| e.time)
                .chain(d.events.iter().map(|(t, _)| *t))
        })
        .chain(topology.changes.iter().map(|c| c.time))
        .max()
        .unwrap_or(SimTime::ZERO);
    let hop = topology.channel_delay + topology.channel_jitter;
    last + topology.poll_period * 2 + hop * 6 + SimTime::from_ticks(1)
}

/// Number of scheduled mutation-producing events in a topology.
pub fn mutation_event_count(topology: &Topology) -> usize {
    topology
        .devices
        .iter()
        .map(|d| d.script.entries().len() + d.events.len())
        .sum::<usize>()
        + topology.changes.len()
}
