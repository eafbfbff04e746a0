//! Centralized controller: the unified per-device QCM view and the QCM flow
//! table consulted on packet-in.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::metadata::{validate_record, ComProtocolId, MetadataError, QcmRecord};
use crate::time::SimTime;
use crate::wire::{
    decode_multipart, reassemble, CodecError, DecodeMode, Direction, QcmMultipart, ASYNC_XID,
};

/// Default polling cadence in ticks.
pub const DEFAULT_POLL_PERIOD: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("device {0} is not part of the topology")]
    UnknownDevice(u32),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error("stale update for device {device}: arrived at {now}, view updated at {updated_at}")]
    Stale {
        device: u32,
        now: SimTime,
        updated_at: SimTime,
    },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("flow entry {0} already installed")]
    DuplicateEntry(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Poll,
    Async,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Poll => "POLL",
            Origin::Async => "ASYNC",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewEntry {
    pub record: QcmRecord,
    pub updated_at: SimTime,
    pub origin: Origin,
}

/// Last-known record per device plus the set of devices under control.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerView {
    devices: BTreeSet<u32>,
    entries: BTreeMap<u32, ViewEntry>,
    pub poll_period: SimTime,
}

impl Default for ControllerView {
    fn default() -> Self {
        ControllerView {
            devices: BTreeSet::new(),
            entries: BTreeMap::new(),
            poll_period: SimTime::from_ticks(DEFAULT_POLL_PERIOD),
        }
    }
}

/// A change the controller wants a device agent to apply. There is no
/// wire format for this; it travels as a simulator-level message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeDirective {
    pub device_id: u32,
    pub record: QcmRecord,
}

impl ControllerView {
    pub fn new<I: IntoIterator<Item = u32>>(devices: I, poll_period: SimTime) -> Self {
        ControllerView {
            devices: devices.into_iter().collect(),
            entries: BTreeMap::new(),
            poll_period,
        }
    }

    pub fn add_device(&mut self, device_id: u32) {
        self.devices.insert(device_id);
    }

    pub fn devices(&self) -> impl Iterator<Item = u32> + '_ {
        self.devices.iter().copied()
    }

    pub fn entry(&self, device_id: u32) -> Option<&ViewEntry> {
        self.entries.get(&device_id)
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, &ViewEntry)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    fn require_known(&self, device_id: u32) -> Result<(), ControllerError> {
        if self.devices.contains(&device_id) {
            Ok(())
        } else {
            Err(ControllerError::UnknownDevice(device_id))
        }
    }

    /// Builds an empty-bodied QCM request. The view is not touched.
    pub fn poll(&self, device_id: u32, xid: u32) -> Result<QcmMultipart, ControllerError> {
        self.require_known(device_id)?;
        if xid == ASYNC_XID {
            return Err(ControllerError::Protocol(
                "xid 0 is reserved for async updates".into(),
            ));
        }
        Ok(QcmMultipart::request(xid))
    }

    /// Absorbs a complete reply sequence for `device_id`.
    pub fn handle_reply(
        &mut self,
        device_id: u32,
        segments: &[QcmMultipart],
        now: SimTime,
    ) -> Result<(), ControllerError> {
        self.require_known(device_id)?;
        if segments.iter().any(|s| s.direction != Direction::Reply) {
            return Err(ControllerError::Protocol(
                "reply sequence contains a request".into(),
            ));
        }
        let records = reassemble(segments)?;
        let record = single_record(records)?;
        self.store(device_id, record, now, Origin::Poll)
    }

    /// Absorbs an unsolicited update (reply framing, xid 0, one record).
    pub fn handle_async(
        &mut self,
        device_id: u32,
        msg: &QcmMultipart,
        now: SimTime,
    ) -> Result<(), ControllerError> {
        self.require_known(device_id)?;
        if msg.direction != Direction::Reply {
            return Err(ControllerError::Protocol(
                "async update must use reply framing".into(),
            ));
        }
        if msg.xid != ASYNC_XID {
            return Err(ControllerError::Protocol(format!(
                "async update carries xid {}, expected 0",
                msg.xid
            )));
        }
        if msg.more() {
            return Err(ControllerError::Protocol(
                "async update flagged REQ_MORE".into(),
            ));
        }
        let record = single_record(msg.records.clone())?;
        self.store(device_id, record, now, Origin::Async)
    }

    /// Wire-level variant of [`handle_async`](Self::handle_async).
    pub fn handle_async_frame(
        &mut self,
        device_id: u32,
        frame: &[u8],
        now: SimTime,
    ) -> Result<(), ControllerError> {
        let msg = decode_multipart(frame, DecodeMode::Strict)?;
        self.handle_async(device_id, &msg, now)
    }

    fn store(
        &mut self,
        device_id: u32,
        record: QcmRecord,
        now: SimTime,
        origin: Origin,
    ) -> Result<(), ControllerError> {
        if let Some(e) = self.entries.get(&device_id) {
            if now < e.updated_at {
                return Err(ControllerError::Stale {
                    device: device_id,
                    now,
                    updated_at: e.updated_at,
                });
            }
        }
        self.entries.insert(
            device_id,
            ViewEntry {
                record,
                updated_at: now,
                origin,
            },
        );
        Ok(())
    }

    pub fn query(&self, device_id: u32) -> Option<&QcmRecord> {
        self.entries.get(&device_id).map(|e| &e.record)
    }

    /// Validates a controller-initiated change. The view only picks up the
    /// new record once the device reports it back.
    pub fn request_change(
        &self,
        device_id: u32,
        record: QcmRecord,
    ) -> Result<ChangeDirective, ControllerError> {
        self.require_known(device_id)?;
        let violations = validate_record(&record);
        if !violations.is_empty() {
            return Err(MetadataError::Invalid(violations).into());
        }
        Ok(ChangeDirective { device_id, record })
    }
}

fn single_record(records: Vec<QcmRecord>) -> Result<QcmRecord, ControllerError> {
    match <[QcmRecord; 1]>::try_from(records) {
        Ok([r]) => Ok(r),
        Err(v) => Err(ControllerError::Protocol(format!(
            "expected exactly one record, got {}",
            v.len()
        ))),
    }
}

/// Per-field exact match on the identifier fields; `None` is a wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QcmMatch {
    pub qchannel: Option<u16>,
    pub qcom: Option<ComProtocolId>,
    pub qec: Option<u16>,
}

impl QcmMatch {
    pub fn any() -> Self {
        QcmMatch::default()
    }

    pub fn matches(&self, r: &QcmRecord) -> bool {
        self.qchannel.is_none_or(|c| c == r.qchannel)
            && self.qcom.is_none_or(|p| p == r.qcom)
            && self.qec.is_none_or(|e| e == r.qec)
    }
}

/// Opaque named action; the controller never interprets it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    pub name: String,
    pub params: Vec<(String, String)>,
}

impl Action {
    pub fn new(name: impl Into<String>) -> Self {
        Action {
            name: name.into(),
            params: Vec::new(),
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.push((key.into(), value.into()));
        self
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QcmFlowEntry {
    pub entry_id: u32,
    pub priority: u16,
    pub matcher: QcmMatch,
    pub actions: Vec<Action>,
}

/// The QCM table of the controller pipeline.
///
/// Entries are kept sorted by descending priority, then ascending id, so a
/// lookup returns the first match.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QcmFlowTable {
    entries: Vec<QcmFlowEntry>,
}

impl QcmFlowTable {
    pub fn new() -> Self {
        QcmFlowTable::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, entry_id: u32) -> Option<&QcmFlowEntry> {
        self.entries.iter().find(|e| e.entry_id == entry_id)
    }

    pub fn entries(&self) -> &[QcmFlowEntry] {
        &self.entries
    }

    pub fn install(&mut self, entry: QcmFlowEntry) -> Result<(), ControllerError> {
        if self.get(entry.entry_id).is_some() {
            return Err(ControllerError::DuplicateEntry(entry.entry_id));
        }
        let key = |e: &QcmFlowEntry| (Reverse(e.priority), e.entry_id);
        let at = self.entries.partition_point(|e| key(e) < key(&entry));
        self.entries.insert(at, entry);
        Ok(())
    }

    pub fn remove(&mut self, entry_id: u32) -> Option<QcmFlowEntry> {
        let at = self.entries.iter().position(|e| e.entry_id == entry_id)?;
        Some(self.entries.remove(at))
    }

    /// Actions of the highest-priority matching entry (ties go to the lowest
    /// entry id); empty if nothing matches.
    pub fn match_packet_in(&self, attrs: &QcmRecord) -> &[Action] {
        self.entries
            .iter()
            .find(|e| e.matcher.matches(attrs))
            .map(|e| e.actions.as_slice())
            .unwrap_or(&[])
    }
}
