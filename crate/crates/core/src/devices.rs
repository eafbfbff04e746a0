//! Behavioral models of quantum storage and repeater nodes.
//!
//! Only the metadata side effects of node operations are modeled. Each step
//! function is pure and deterministic and may yield a [`Mutation`] that the
//! device agent applies to its QCM row.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metadata::{ChannelSpec, EcSpec, Field, FieldUpdate, FieldValue, MetadataError};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("slot {slot} out of range for a {slots}-slot node")]
    SlotOutOfRange { slot: u32, slots: u32 },
    #[error("qec code {0} needs nonzero n, k or d")]
    MissingCodeParameters(u16),
    #[error("qec code 0 must carry an all-zero spec")]
    SpecWithoutCode,
    #[error("nonzero reserved bytes in {0}")]
    Reserved(Field),
    #[error("event {event} not supported by a {model} node")]
    Unsupported { event: String, model: &'static str },
    #[error("script times must be strictly increasing (entry {index} at {time})")]
    UnorderedScript { index: usize, time: SimTime },
    #[error(transparent)]
    Metadata(#[from] MetadataError),
}

/// Field assignments applied together to a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutation(pub Vec<FieldUpdate>);

impl Mutation {
    pub fn single(value: FieldValue) -> Self {
        Mutation(vec![FieldUpdate::new(value)])
    }

    pub fn fields(&self) -> impl Iterator<Item = Field> + '_ {
        self.0.iter().map(|u| u.field)
    }

    /// The assigned value for `field`, if this mutation touches it.
    pub fn value_of(&self, field: Field) -> Option<FieldValue> {
        self.0
            .iter()
            .rev()
            .find(|u| u.field == field)
            .map(|u| u.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StorageOp {
    Read,
    Write,
    Measure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageRequest {
    pub op: StorageOp,
    pub slot: u32,
}

/// Events accepted by either node model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeEvent {
    Read {
        slot: u32,
    },
    Write {
        slot: u32,
    },
    Measure {
        slot: u32,
    },
    QecCycle,
    SetQec {
        code: u16,
        #[serde(default, with = "ec_spec_serde")]
        spec: EcSpec,
    },
    AdvanceStage,
    Retune {
        #[serde(with = "channel_spec_serde")]
        spec: ChannelSpec,
    },
}

impl fmt::Display for NodeEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeEvent::Read { slot } => write!(f, "READ slot {slot}"),
            NodeEvent::Write { slot } => write!(f, "WRITE slot {slot}"),
            NodeEvent::Measure { slot } => write!(f, "MEASURE slot {slot}"),
            NodeEvent::QecCycle => f.write_str("QEC_CYCLE"),
            NodeEvent::SetQec { code, spec } => write!(f, "SET_QEC {code} ({spec})"),
            NodeEvent::AdvanceStage => f.write_str("ADVANCE_STAGE"),
            NodeEvent::Retune { spec } => write!(f, "RETUNE ({spec})"),
        }
    }
}

fn check_qec(code: u16, spec: &EcSpec) -> Result<(), DeviceError> {
    if spec.reserved != [0; 8] {
        return Err(DeviceError::Reserved(Field::QecSpec));
    }
    if code == 0 && !spec.is_zero() {
        return Err(DeviceError::SpecWithoutCode);
    }
    if code != 0 && spec.n == 0 && spec.k == 0 && spec.d == 0 {
        return Err(DeviceError::MissingCodeParameters(code));
    }
    Ok(())
}

fn qec_mutation(code: u16, spec: EcSpec) -> Mutation {
    Mutation(vec![
        FieldUpdate::new(FieldValue::Qec(code)),
        FieldUpdate::new(FieldValue::QecSpec(spec)),
    ])
}

/// A quantum storage (memory) node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryNodeState {
    pub slots: u32,
    pub active_qec: (u16, EcSpec),
    pub stabilization_on: bool,
    pub pending_requests: VecDeque<StorageRequest>,
}

impl MemoryNodeState {
    pub fn new(slots: u32) -> Self {
        MemoryNodeState {
            slots,
            active_qec: (0, EcSpec::default()),
            stabilization_on: true,
            pending_requests: VecDeque::new(),
        }
    }

    /// READ/WRITE/MEASURE queue a request, QEC_CYCLE services the queue.
    /// Only SET_QEC touches metadata.
    pub fn step(
        &self,
        ev: &NodeEvent,
        _now: SimTime,
    ) -> Result<(Self, Option<Mutation>), DeviceError> {
        let mut next = self.clone();
        let queue = |next: &mut Self, op, slot| {
            if slot >= next.slots {
                return Err(DeviceError::SlotOutOfRange {
                    slot,
                    slots: next.slots,
                });
            }
            next.pending_requests.push_back(StorageRequest { op, slot });
            Ok(())
        };
        match *ev {
            NodeEvent::Read { slot } => queue(&mut next, StorageOp::Read, slot)?,
            NodeEvent::Write { slot } => queue(&mut next, StorageOp::Write, slot)?,
            NodeEvent::Measure { slot } => queue(&mut next, StorageOp::Measure, slot)?,
            NodeEvent::QecCycle => next.pending_requests.clear(),
            NodeEvent::SetQec { code, spec } => {
                check_qec(code, &spec)?;
                next.active_qec = (code, spec);
                return Ok((next, Some(qec_mutation(code, spec))));
            }
            other => {
                return Err(DeviceError::Unsupported {
                    event: other.to_string(),
                    model: "memory",
                })
            }
        }
        Ok((next, None))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepeaterStage {
    Idle,
    Purification,
    Swap,
}

impl RepeaterStage {
    pub fn next(self) -> Self {
        match self {
            RepeaterStage::Idle => RepeaterStage::Purification,
            RepeaterStage::Purification => RepeaterStage::Swap,
            RepeaterStage::Swap => RepeaterStage::Idle,
        }
    }
}

/// A quantum repeater node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepeaterNodeState {
    pub stage: RepeaterStage,
    pub active_qec: (u16, EcSpec),
    /// Abstract link quality in 10^-3 units; never transmitted.
    pub link_quality_milli: u32,
}

impl Default for RepeaterNodeState {
    fn default() -> Self {
        RepeaterNodeState {
            stage: RepeaterStage::Idle,
            active_qec: (0, EcSpec::default()),
            link_quality_milli: 500,
        }
    }
}

impl RepeaterNodeState {
    pub fn step(
        &self,
        ev: &NodeEvent,
        _now: SimTime,
    ) -> Result<(Self, Option<Mutation>), DeviceError> {
        let mut next = self.clone();
        match *ev {
            NodeEvent::AdvanceStage => {
                next.stage = self.stage.next();
                if next.stage == RepeaterStage::Swap {
                    // purification finished: halve the remaining infidelity
                    next.link_quality_milli +=
                        (1000u32.saturating_sub(self.link_quality_milli)) / 2;
                }
                Ok((next, None))
            }
            NodeEvent::Retune { spec } => {
                if spec.reserved != 0 {
                    return Err(DeviceError::Reserved(Field::QchannelSpec));
                }
                Ok((next, Some(Mutation::single(FieldValue::QchannelSpec(spec)))))
            }
            NodeEvent::SetQec { code, spec } => {
                check_qec(code, &spec)?;
                next.active_qec = (code, spec);
                Ok((next, Some(qec_mutation(code, spec))))
            }
            other => Err(DeviceError::Unsupported {
                event: other.to_string(),
                model: "repeater",
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub time: SimTime,
    pub update: FieldUpdate,
}

/// Time-ordered list of scripted field assignments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MutationScript {
    entries: Vec<ScriptEntry>,
}

impl MutationScript {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, DeviceError> {
        for (index, pair) in entries.windows(2).enumerate() {
            if pair[1].time <= pair[0].time {
                return Err(DeviceError::UnorderedScript {
                    index: index + 1,
                    time: pair[1].time,
                });
            }
        }
        Ok(MutationScript { entries })
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Replays a [`MutationScript`], firing each entry at most once.
#[derive(Debug, Clone)]
pub struct ScriptedMutationSource {
    script: MutationScript,
    fired: Vec<bool>,
}

impl ScriptedMutationSource {
    pub fn new(script: MutationScript) -> Self {
        let fired = vec![false; script.entries.len()];
        ScriptedMutationSource { script, fired }
    }

    /// The entry scheduled exactly at `now`, unless it already fired.
    pub fn poll(&mut self, now: SimTime) -> Option<FieldUpdate> {
        let i = self
            .script
            .entries
            .binary_search_by(|e| e.time.cmp(&now))
            .ok()?;
        if std::mem::replace(&mut self.fired[i], true) {
            return None;
        }
        Some(self.script.entries[i].update)
    }

    pub fn script(&self) -> &MutationScript {
        &self.script
    }
}

mod ec_spec_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        #[serde(default)]
        n: u16,
        #[serde(default)]
        k: u16,
        #[serde(default)]
        d: u16,
        #[serde(default)]
        verify_circuit_id: u16,
    }

    pub fn serialize<S: Serializer>(s: &EcSpec, ser: S) -> Result<S::Ok, S::Error> {
        Repr {
            n: s.n,
            k: s.k,
            d: s.d,
            verify_circuit_id: s.verify_circuit_id,
        }
        .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<EcSpec, D::Error> {
        let r = Repr::deserialize(de)?;
        Ok(EcSpec::new(r.n, r.k, r.d, r.verify_circuit_id))
    }
}

mod channel_spec_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        #[serde(default)]
        wavelength_pm: u32,
        #[serde(default)]
        mean_photon_milli: u32,
        #[serde(default)]
        symbol_rate_hz: u32,
    }

    pub fn serialize<S: Serializer>(s: &ChannelSpec, ser: S) -> Result<S::Ok, S::Error> {
        Repr {
            wavelength_pm: s.wavelength_pm,
            mean_photon_milli: s.mean_photon_milli,
            symbol_rate_hz: s.symbol_rate_hz,
        }
        .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<ChannelSpec, D::Error> {
        let r = Repr::deserialize(de)?;
        Ok(ChannelSpec {
            wavelength_pm: r.wavelength_pm,
            mean_photon_milli: r.mean_photon_milli,
            symbol_rate_hz: r.symbol_rate_hz,
            reserved: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::ComProtocolId;

    const T0: SimTime = SimTime::ZERO;

    #[test]
    fn memory_set_qec_mutates() {
        let node = MemoryNodeState::new(4);
        let spec = EcSpec::new(7, 1, 3, 0);
        let (next, m) = node.step(&NodeEvent::SetQec { code: 2, spec }, T0).unwrap();
        let m = m.unwrap();
        assert_eq!(m.value_of(Field::Qec), Some(FieldValue::Qec(2)));
        assert_eq!(m.value_of(Field::QecSpec), Some(FieldValue::QecSpec(spec)));
        assert_eq!(next.active_qec, (2, spec));
    }

    #[test]
    fn memory_requests_do_not_mutate() {
        let node = MemoryNodeState::new(4);
        let (next, m) = node.step(&NodeEvent::Read { slot: 0 }, T0).unwrap();
        assert!(m.is_none());
        assert_eq!(next.pending_requests.len(), 1);
        let (next, m) = next.step(&NodeEvent::QecCycle, T0).unwrap();
        assert!(m.is_none());
        assert!(next.pending_requests.is_empty());
    }

    #[test]
    fn memory_slot_bounds() {
        let node = MemoryNodeState::new(4);
        assert_eq!(
            node.step(&NodeEvent::Read { slot: 9 }, T0).unwrap_err(),
            DeviceError::SlotOutOfRange { slot: 9, slots: 4 }
        );
        assert!(node.step(&NodeEvent::Measure { slot: 3 }, T0).is_ok());
        assert!(node.step(&NodeEvent::AdvanceStage, T0).is_err());
    }

    #[test]
    fn set_qec_input_checks() {
        let node = MemoryNodeState::new(1);
        assert!(node
            .step(
                &NodeEvent::SetQec {
                    code: 2,
                    spec: EcSpec::default()
                },
                T0
            )
            .is_err());
        assert!(node
            .step(
                &NodeEvent::SetQec {
                    code: 0,
                    spec: EcSpec::new(1, 1, 1, 0)
                },
                T0
            )
            .is_err());
        assert!(node
            .step(
                &NodeEvent::SetQec {
                    code: 0,
                    spec: EcSpec::default()
                },
                T0
            )
            .is_ok());
    }

    #[test]
    fn repeater_stage_cycle() {
        let node = RepeaterNodeState::default();
        let (n1, m) = node.step(&NodeEvent::AdvanceStage, T0).unwrap();
        assert_eq!(n1.stage, RepeaterStage::Purification);
        assert!(m.is_none());
        let (n2, _) = n1.step(&NodeEvent::AdvanceStage, T0).unwrap();
        let (n3, _) = n2.step(&NodeEvent::AdvanceStage, T0).unwrap();
        assert_eq!(n2.stage, RepeaterStage::Swap);
        assert_eq!(n3.stage, RepeaterStage::Idle);
    }

    #[test]
    fn repeater_retune_and_qec() {
        let node = RepeaterNodeState::default();
        let spec = ChannelSpec::with_wavelength(1_550_000);
        let (_, m) = node.step(&NodeEvent::Retune { spec }, T0).unwrap();
        assert_eq!(m, Some(Mutation::single(FieldValue::QchannelSpec(spec))));

        let ec = EcSpec::new(5, 1, 3, 0);
        let (_, m) = node
            .step(&NodeEvent::SetQec { code: 2, spec: ec }, T0)
            .unwrap();
        assert_eq!(m.unwrap().value_of(Field::Qec), Some(FieldValue::Qec(2)));
        assert!(node.step(&NodeEvent::QecCycle, T0).is_err());
    }

    fn fig8_script() -> MutationScript {
        let sdc = FieldUpdate::new(FieldValue::Qcom(ComProtocolId::SDC));
        MutationScript::new(
            [0, 5, 10]
                .into_iter()
                .map(|t| ScriptEntry {
                    time: SimTime::from_ticks(t),
                    update: sdc,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn scripted_source_fires_once_at_exact_time() {
        let mut src = ScriptedMutationSource::new(fig8_script());
        let sdc = FieldUpdate::new(FieldValue::Qcom(ComProtocolId::SDC));
        assert_eq!(src.poll(SimTime::from_ticks(5)), Some(sdc));
        assert_eq!(src.poll(SimTime::from_ticks(3)), None);
        assert_eq!(src.poll(T0), Some(sdc));
        assert_eq!(src.poll(T0), None);
    }

    #[test]
    fn script_must_be_increasing() {
        let u = FieldUpdate::new(FieldValue::Qchannel(1));
        let e = |t| ScriptEntry {
            time: SimTime::from_ticks(t),
            update: u,
        };
        assert!(MutationScript::new(vec![e(1), e(1)]).is_err());
        assert!(MutationScript::new(vec![e(2), e(1)]).is_err());
    }

    #[test]
    fn node_event_json() {
        let ev: NodeEvent =
            serde_json::from_str(r#"{"type":"SET_QEC","code":2,"spec":{"n":5,"k":1,"d":3}}"#)
                .unwrap();
        assert_eq!(
            ev,
            NodeEvent::SetQec {
                code: 2,
                spec: EcSpec::new(5, 1, 3, 0)
            }
        );
        let ev: NodeEvent = serde_json::from_str(r#"{"type":"READ","slot":2}"#).unwrap();
        assert_eq!(ev, NodeEvent::Read { slot: 2 });
        let ev: NodeEvent =
            serde_json::from_str(r#"{"type":"RETUNE","spec":{"wavelength_pm":1550000}}"#).unwrap();
        assert_eq!(
            ev,
            NodeEvent::Retune {
                spec: ChannelSpec::with_wavelength(1_550_000)
            }
        );
    }
}
