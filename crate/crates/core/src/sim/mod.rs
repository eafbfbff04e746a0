//! Deterministic discrete-event simulation of device agents exchanging QCM
//! frames with a controller.
//!
//! Events run in `(time, seq)` order on a single thread. Every controller ↔
//! device exchange goes through [`EventQueue::deliver`], which keeps each
//! directed channel FIFO. Frames on the channels are real encoded bytes and
//! are strict-decoded on receipt.

mod queue;
pub mod random;
mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentState;
use crate::controller::{ChangeDirective, ControllerView, QcmFlowEntry, QcmFlowTable};
use crate::devices::{
    MemoryNodeState, MutationScript, NodeEvent, RepeaterNodeState, ScriptedMutationSource,
};
use crate::metadata::{apply_field_updates, diff_records, FieldUpdate, QcmRecord};
use crate::time::SimTime;
use crate::wire::{decode_multipart, encode_multipart, DecodeMode, QcmMultipart, ASYNC_XID};

pub use queue::{Endpoint, EventQueue, ScheduleError, SimEvent};
pub use trace::{Trace, TraceLine, TraceMode, BLOCK_SEPARATOR};

/// How the controller learns about device changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ControllerMode {
    /// Timer-driven polling every `poll_period`.
    Poll,
    /// Devices push full records unsolicited.
    Async,
    /// Devices send a change notice; the controller polls in response.
    #[default]
    Mixed,
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerMode::Poll => "POLL",
            ControllerMode::Async => "ASYNC",
            ControllerMode::Mixed => "MIXED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeModel {
    /// Driven only by its mutation script.
    Scripted,
    Memory {
        slots: u32,
    },
    Repeater,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceConfig {
    pub id: u32,
    pub model: NodeModel,
    pub initial: QcmRecord,
    pub script: MutationScript,
    /// Node-model events, in any order.
    pub events: Vec<(SimTime, NodeEvent)>,
}

impl DeviceConfig {
    pub fn scripted(id: u32, script: MutationScript) -> Self {
        DeviceConfig {
            id,
            model: NodeModel::Scripted,
            initial: QcmRecord::default(),
            script,
            events: Vec::new(),
        }
    }
}

/// A controller-initiated change scheduled at `time`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledChange {
    pub time: SimTime,
    pub device: u32,
    pub record: QcmRecord,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub devices: Vec<DeviceConfig>,
    pub mode: ControllerMode,
    pub poll_period: SimTime,
    /// Poll every device once at t = 0 (ASYNC and MIXED modes only; POLL mode
    /// already polls at t = 0).
    pub bootstrap_poll: bool,
    pub channel_delay: SimTime,
    /// Upper bound of a seeded uniform extra delay per message.
    pub channel_jitter: SimTime,
    pub changes: Vec<ScheduledChange>,
    pub flow_entries: Vec<QcmFlowEntry>,
    pub trace_mode: TraceMode,
}

impl Default for Topology {
    fn default() -> Self {
        Topology {
            devices: Vec::new(),
            mode: ControllerMode::Mixed,
            poll_period: SimTime::from_ticks(crate::controller::DEFAULT_POLL_PERIOD),
            bootstrap_poll: true,
            channel_delay: SimTime::ZERO,
            channel_jitter: SimTime::ZERO,
            changes: Vec::new(),
            flow_entries: Vec::new(),
            trace_mode: TraceMode::Canonical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("device id {0} appears more than once")]
    DuplicateDevice(u32),
    #[error("controller change targets unknown device {0}")]
    UnknownDevice(u32),
    #[error("poll period must be positive in POLL mode")]
    ZeroPollPeriod,
    #[error("device {device}: initial record is invalid")]
    InvalidInitial { device: u32 },
    #[error("device {device}: event {event} does not fit a {model} node")]
    EventModelMismatch {
        device: u32,
        event: String,
        model: &'static str,
    },
    #[error("flow entry {0} installed twice")]
    DuplicateFlowEntry(u32),
}

impl Topology {
    pub fn validate(&self) -> Result<(), TopologyError> {
        let mut ids = BTreeSet::new();
        for d in &self.devices {
            if !ids.insert(d.id) {
                return Err(TopologyError::DuplicateDevice(d.id));
            }
            if !d.initial.is_valid() {
                return Err(TopologyError::InvalidInitial { device: d.id });
            }
            for (_, ev) in &d.events {
                let ok = match d.model {
                    NodeModel::Scripted => false,
                    NodeModel::Memory { .. } => matches!(
                        ev,
                        NodeEvent::Read { .. }
                            | NodeEvent::Write { .. }
                            | NodeEvent::Measure { .. }
                            | NodeEvent::QecCycle
                            | NodeEvent::SetQec { .. }
                    ),
                    NodeModel::Repeater => matches!(
                        ev,
                        NodeEvent::AdvanceStage
                            | NodeEvent::SetQec { .. }
                            | NodeEvent::Retune { .. }
                    ),
                };
                if !ok {
                    return Err(TopologyError::EventModelMismatch {
                        device: d.id,
                        event: ev.to_string(),
                        model: match d.model {
                            NodeModel::Scripted => "scripted",
                            NodeModel::Memory { .. } => "memory",
                            NodeModel::Repeater => "repeater",
                        },
                    });
                }
            }
        }
        if let Some(c) = self.changes.iter().find(|c| !ids.contains(&c.device)) {
            return Err(TopologyError::UnknownDevice(c.device));
        }
        if self.mode == ControllerMode::Poll && self.poll_period == SimTime::ZERO {
            return Err(TopologyError::ZeroPollPeriod);
        }
        let mut entry_ids = BTreeSet::new();
        if let Some(e) = self
            .flow_entries
            .iter()
            .find(|e| !entry_ids.insert(e.entry_id))
        {
            return Err(TopologyError::DuplicateFlowEntry(e.entry_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Payload {
    Frame(Vec<u8>),
    /// MIXED mode: "my metadata changed", no record attached.
    ChangeNotice,
    Directive(ChangeDirective),
}

#[derive(Debug, Clone)]
enum EventKind {
    ScriptMutation {
        device: u32,
    },
    Node {
        device: u32,
        event: NodeEvent,
    },
    PollTimer,
    BootstrapPoll,
    ControllerChange {
        device: u32,
        record: QcmRecord,
    },
    Delivery {
        src: Endpoint,
        dst: Endpoint,
        payload: Payload,
    },
}

#[derive(Debug, Clone)]
enum ModelState {
    Scripted,
    Memory(MemoryNodeState),
    Repeater(RepeaterNodeState),
}

#[derive(Debug, Clone)]
struct Device {
    agent: AgentState,
    model: ModelState,
    source: ScriptedMutationSource,
}

/// Where a metadata change came from; only affects trace wording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ChangeCause {
    Script,
    NodeModel,
}

/// A running simulation. Use [`run`] for the one-shot form.
pub struct Simulation {
    topology: Topology,
    queue: EventQueue<EventKind>,
    devices: BTreeMap<u32, Device>,
    view: ControllerView,
    table: QcmFlowTable,
    next_xid: u32,
    /// Reply segments awaiting their final REQ_MORE-clear segment.
    partial: BTreeMap<(u32, u32), Vec<QcmMultipart>>,
    rng: ChaCha8Rng,
    trace: Trace,
}

impl Simulation {
    pub fn new(topology: Topology, seed: u64) -> Result<Self, TopologyError> {
        topology.validate()?;
        let async_enabled = topology.mode == ControllerMode::Async;
        let mut queue = EventQueue::new();
        let mut devices = BTreeMap::new();

        for d in &topology.devices {
            let model = match d.model {
                NodeModel::Scripted => ModelState::Scripted,
                NodeModel::Memory { slots } => ModelState::Memory(MemoryNodeState::new(slots)),
                NodeModel::Repeater => ModelState::Repeater(RepeaterNodeState::default()),
            };
            let agent = AgentState::with_record(d.id, d.initial, async_enabled)
                .map_err(|_| TopologyError::InvalidInitial { device: d.id })?;
            devices.insert(
                d.id,
                Device {
                    agent,
                    model,
                    source: ScriptedMutationSource::new(d.script.clone()),
                },
            );
        }

        if topology.bootstrap_poll
            && topology.mode != ControllerMode::Poll
            && !topology.devices.is_empty()
        {
            queue
                .schedule(SimTime::ZERO, EventKind::BootstrapPoll)
                .unwrap();
        }
        for d in &topology.devices {
            for e in d.script.entries() {
                queue
                    .schedule(e.time, EventKind::ScriptMutation { device: d.id })
                    .unwrap();
            }
            let mut events = d.events.clone();
            events.sort_by_key(|(t, _)| *t);
            for (t, event) in events {
                queue
                    .schedule(
                        t,
                        EventKind::Node {
                            device: d.id,
                            event,
                        },
                    )
                    .unwrap();
            }
        }
        for c in &topology.changes {
            queue
                .schedule(
                    c.time,
                    EventKind::ControllerChange {
                        device: c.device,
                        record: c.record,
                    },
                )
                .unwrap();
        }
        if topology.mode == ControllerMode::Poll && !topology.devices.is_empty() {
            queue.schedule(SimTime::ZERO, EventKind::PollTimer).unwrap();
        }

        let mut table = QcmFlowTable::new();
        for e in &topology.flow_entries {
            table.install(e.clone()).expect("validated unique ids");
        }

        Ok(Simulation {
            view: ControllerView::new(devices.keys().copied(), topology.poll_period),
            topology,
            queue,
            devices,
            table,
            next_xid: 1,
            partial: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            trace: Trace::default(),
        })
    }

    pub fn clock(&self) -> SimTime {
        self.queue.clock()
    }

    pub fn view(&self) -> &ControllerView {
        &self.view
    }

    pub fn device_record(&self, id: u32) -> Option<&QcmRecord> {
        self.devices.get(&id).map(|d| d.agent.local_record())
    }

    pub fn agent(&self, id: u32) -> Option<&AgentState> {
        self.devices.get(&id).map(|d| &d.agent)
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    /// Messages scheduled for delivery but not yet delivered.
    pub fn in_flight(&self) -> usize {
        self.queue
            .pending()
            .filter(|e| matches!(e.kind, EventKind::Delivery { .. }))
            .count()
    }

    /// Devices whose controller view differs from their local record.
    pub fn divergent_devices(&self) -> Vec<u32> {
        self.devices
            .iter()
            .filter(|(id, d)| self.view.query(**id) != Some(d.agent.local_record()))
            .map(|(id, _)| *id)
            .collect()
    }

    /// Executes every event with time ≤ `t_end`, then sets the clock to `t_end`.
    pub fn run_until(&mut self, t_end: SimTime) -> &Trace {
        while let Some(t) = self.queue.peek_time() {
            if t > t_end {
                break;
            }
            let ev = self.queue.pop().expect("peeked");
            self.handle(ev.time, ev.kind);
        }
        self.queue.advance_to(t_end);
        self.trace.final_clock = self.queue.clock();
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    fn legacy(&self) -> bool {
        self.topology.trace_mode == TraceMode::LegacyFig8
    }

    fn log(&mut self, now: SimTime, text: impl Into<String>) {
        self.trace.push(now, text);
    }

    /// Canonical-mode only line, prefixed with the time.
    fn note(&mut self, now: SimTime, text: impl fmt::Display) {
        if !self.legacy() {
            self.trace
                .push(now, format!("[{}] {text}", now.exact_decimal()));
        }
    }

    fn handle(&mut self, now: SimTime, kind: EventKind) {
        match kind {
            EventKind::ScriptMutation { device } => self.on_script(device, now),
            EventKind::Node { device, event } => self.on_node_event(device, event, now),
            EventKind::PollTimer => {
                let ids: Vec<u32> = self.view.devices().collect();
                for id in ids {
                    self.send_poll(id, now);
                }
                let next = now + self.topology.poll_period;
                self.queue.schedule(next, EventKind::PollTimer).unwrap();
            }
            EventKind::BootstrapPoll => {
                let ids: Vec<u32> = self.view.devices().collect();
                for id in ids {
                    self.send_poll(id, now);
                }
            }
            EventKind::ControllerChange { device, record } => {
                self.on_controller_change(device, record, now)
            }
            EventKind::Delivery { src, dst, payload } => match (dst, src) {
                (Endpoint::Device(id), Endpoint::Controller) => {
                    self.device_receive(id, payload, now)
                }
                (Endpoint::Controller, Endpoint::Device(id)) => {
                    self.controller_receive(id, payload, now)
                }
                _ => unreachable!("devices only talk to the controller"),
            },
        }
    }

    fn send(&mut self, payload: Payload, src: Endpoint, dst: Endpoint, now: SimTime) {
        let mut delay = self.topology.channel_delay;
        if self.topology.channel_jitter > SimTime::ZERO {
            let k: u64 = self.rng.gen_range(0..=1000);
            delay = delay + self.topology.channel_jitter.scaled(k, 1000);
        }
        self.queue
            .deliver(
                EventKind::Delivery { src, dst, payload },
                src,
                dst,
                now,
                delay,
            )
            .expect("deliveries are never in the past");
    }

    fn on_script(&mut self, device: u32, now: SimTime) {
        let Some(dev) = self.devices.get_mut(&device) else {
            return;
        };
        let Some(update) = dev.source.poll(now) else {
            return;
        };
        self.apply_local_change(device, &[update], ChangeCause::Script, now);
    }

    fn on_node_event(&mut self, device: u32, event: NodeEvent, now: SimTime) {
        let Some(dev) = self.devices.get_mut(&device) else {
            return;
        };
        let stepped = match &dev.model {
            ModelState::Memory(s) => s.step(&event, now).map(|(s, m)| (ModelState::Memory(s), m)),
            ModelState::Repeater(s) => s
                .step(&event, now)
                .map(|(s, m)| (ModelState::Repeater(s), m)),
            ModelState::Scripted => unreachable!("validated: scripted devices take no node events"),
        };
        match stepped {
            Ok((next, mutation)) => {
                dev.model = next;
                match mutation {
                    Some(m) => {
                        self.note(now, format_args!("device {device}: node event {event}"));
                        self.apply_local_change(device, &m.0, ChangeCause::NodeModel, now);
                    }
                    None => self.note(now, format_args!("device {device}: node event {event}")),
                }
            }
            Err(e) => self.note(
                now,
                format_args!("device {device}: node event {event} failed: {e}"),
            ),
        }
    }

    /// Middleware-side change on a device.
    fn apply_local_change(
        &mut self,
        device: u32,
        updates: &[FieldUpdate],
        cause: ChangeCause,
        now: SimTime,
    ) {
        let legacy = self.legacy();
        let dev = self.devices.get_mut(&device).expect("known device");
        let old = *dev.agent.local_record();
        let new = match apply_field_updates(&old, updates) {
            Ok(r) => r,
            Err(e) => {
                self.note(now, format_args!("device {device}: mutation rejected: {e}"));
                return;
            }
        };
        let changed = diff_records(&old, &new);
        let async_msg = match dev.agent.on_middleware_change(new, now) {
            Ok(m) => m,
            Err(e) => {
                self.note(now, format_args!("device {device}: mutation rejected: {e}"));
                return;
            }
        };

        // Legacy traces count a re-emitted identical value as a change.
        let sensed = !changed.is_empty() || (legacy && cause == ChangeCause::Script);
        if legacy {
            if sensed {
                self.log(
                    now,
                    format!(
                        "Quantum METADATA STATE change sensed. Collecting QMD attributes at {now}"
                    ),
                );
            }
        } else if changed.is_empty() {
            self.note(
                now,
                format_args!("device {device}: metadata rewritten unchanged"),
            );
        } else {
            let names: Vec<&str> = changed.iter().map(|f| f.name()).collect();
            self.note(
                now,
                format_args!(
                    "device {device}: QCM state change sensed ({})",
                    names.join(", ")
                ),
            );
        }

        let from = Endpoint::Device(device);
        if let Some(msg) = async_msg {
            let frame = encode_multipart(&msg).expect("agent emits valid single-record frames");
            self.note(now, format_args!("device {device}: async QCM update sent"));
            self.send(Payload::Frame(frame), from, Endpoint::Controller, now);
        }
        if self.topology.mode == ControllerMode::Mixed && sensed {
            self.send(Payload::ChangeNotice, from, Endpoint::Controller, now);
        }
    }

    fn on_controller_change(&mut self, device: u32, record: QcmRecord, now: SimTime) {
        match self.view.request_change(device, record) {
            Ok(directive) => {
                if self.legacy() {
                    self.log(now, "QMD Change Requested by Controller.....");
                } else {
                    self.note(
                        now,
                        format_args!("controller: change directive to device {device}"),
                    );
                }
                self.send(
                    Payload::Directive(directive),
                    Endpoint::Controller,
                    Endpoint::Device(device),
                    now,
                );
                // read back so the view picks up the acknowledged value
                self.send_poll(device, now);
            }
            Err(e) => self.note(
                now,
                format_args!("controller: change for device {device} refused: {e}"),
            ),
        }
    }

    fn alloc_xid(&mut self) -> u32 {
        let xid = self.next_xid;
        self.next_xid = self.next_xid.wrapping_add(1);
        if self.next_xid == ASYNC_XID {
            self.next_xid = 1;
        }
        xid
    }

    fn send_poll(&mut self, device: u32, now: SimTime) {
        let xid = self.alloc_xid();
        let req = self.view.poll(device, xid).expect("polling a known device");
        if self.legacy() {
            self.log(now, "QMD Requested by Controller.....");
        } else {
            self.note(
                now,
                format_args!("controller: QCM request xid={xid} to device {device}"),
            );
        }
        let frame = encode_multipart(&req).expect("empty request encodes");
        self.send(
            Payload::Frame(frame),
            Endpoint::Controller,
            Endpoint::Device(device),
            now,
        );
    }

    fn device_receive(&mut self, device: u32, payload: Payload, now: SimTime) {
        let dev = self.devices.get_mut(&device).expect("known device");
        match payload {
            Payload::Frame(frame) => match dev.agent.handle_request_frame(&frame) {
                Ok(replies) => {
                    for r in replies {
                        self.send(
                            Payload::Frame(r),
                            Endpoint::Device(device),
                            Endpoint::Controller,
                            now,
                        );
                    }
                }
                Err(e) => self.note(now, format_args!("device {device}: dropped request: {e}")),
            },
            Payload::Directive(d) => match dev.agent.apply_controller_change(d.record, now) {
                Ok(()) => self.note(
                    now,
                    format_args!("device {device}: applied controller change"),
                ),
                Err(e) => self.note(
                    now,
                    format_args!("device {device}: controller change failed: {e}"),
                ),
            },
            Payload::ChangeNotice => unreachable!("notices only flow device to controller"),
        }
    }

    fn controller_receive(&mut self, device: u32, payload: Payload, now: SimTime) {
        let frame = match payload {
            Payload::ChangeNotice => {
                self.note(
                    now,
                    format_args!("controller: change notice from device {device}"),
                );
                self.send_poll(device, now);
                return;
            }
            Payload::Frame(f) => f,
            Payload::Directive(_) => unreachable!("directives only flow controller to device"),
        };
        let msg = match decode_multipart(&frame, DecodeMode::Strict) {
            Ok(m) => m,
            Err(e) => {
                self.note(
                    now,
                    format_args!("controller: dropped frame from device {device}: {e}"),
                );
                return;
            }
        };
        let xid = msg.xid;
        let result = if xid == ASYNC_XID {
            self.view.handle_async(device, &msg, now)
        } else {
            let more = msg.more();
            let segments = self.partial.entry((device, xid)).or_default();
            segments.push(msg);
            if more {
                return;
            }
            let segments = self.partial.remove(&(device, xid)).unwrap_or_default();
            self.view.handle_reply(device, &segments, now)
        };
        match result {
            Ok(()) => self.trace_reception(device, xid, now),
            Err(e) => self.note(
                now,
                format_args!("controller: rejected update from device {device}: {e}"),
            ),
        }
    }

    fn trace_reception(&mut self, device: u32, xid: u32, now: SimTime) {
        let record = *self.view.query(device).expect("just stored");
        if self.legacy() {
            for line in [
                "Receiving QMD attributes .... begins:".to_string(),
                format!("QPROTO: {} Received", record.qcom.description()),
                "QPROTO_SPEC: ##### Received".to_string(),
                "QCHANNEL: ##### Received".to_string(),
                "QCHANNEL-SPEC: ##### Received".to_string(),
                "QPROTO_SPEC: ##### Received".to_string(),
                "Waiting for STATE change".to_string(),
                BLOCK_SEPARATOR.to_string(),
            ] {
                self.log(now, line);
            }
            return;
        }
        if xid == ASYNC_XID {
            self.note(
                now,
                format_args!("controller: async QCM update from device {device}"),
            );
        } else {
            self.note(
                now,
                format_args!("controller: QCM reply xid={xid} from device {device}"),
            );
        }
        for line in record.to_text().lines() {
            self.log(now, line.to_string());
        }
        let actions: Vec<String> = self
            .table
            .match_packet_in(&record)
            .iter()
            .map(|a| a.to_string())
            .collect();
        for a in actions {
            self.note(now, format_args!("controller: applying action {a}"));
        }
        self.note(now, "controller: waiting for state change");
        self.log(now, BLOCK_SEPARATOR);
    }
}

/// Builds a simulation, runs it to `t_end`, and returns the trace.
pub fn run(topology: &Topology, t_end: SimTime, seed: u64) -> Result<Trace, TopologyError> {
    let mut sim = Simulation::new(topology.clone(), seed)?;
    sim.run_until(t_end);
    Ok(sim.into_trace())
}
