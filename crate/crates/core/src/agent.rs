//! OpenFlow agent resident on a quantum network device.
//!
//! The agent owns the device's QCM table (a single current row), answers
//! controller polls, pushes unsolicited updates when the local middleware
//! changes the metadata, and applies changes requested by the controller.

use thiserror::Error;

use crate::metadata::{diff_records, validate_record, MetadataError, QcmRecord};
use crate::time::SimTime;
use crate::wire::{
    decode_multipart, encode_multipart, fragment, CodecError, DecodeMode, Direction, QcmMultipart,
    ASYNC_XID,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error("expected a multipart request, got a reply")]
    NotARequest,
    #[error("time went backwards: {now} < {last}")]
    TimeRegression { now: SimTime, last: SimTime },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub device_id: u32,
    local_record: QcmRecord,
    last_change_time: SimTime,
    pub async_enabled: bool,
    /// Xid of the most recently answered request.
    last_request_xid: u32,
}

impl AgentState {
    pub fn new(device_id: u32, async_enabled: bool) -> Self {
        AgentState {
            device_id,
            local_record: QcmRecord::default(),
            last_change_time: SimTime::ZERO,
            async_enabled,
            last_request_xid: 0,
        }
    }

    pub fn with_record(
        device_id: u32,
        record: QcmRecord,
        async_enabled: bool,
    ) -> Result<Self, AgentError> {
        check_valid(&record)?;
        Ok(AgentState {
            local_record: record,
            ..AgentState::new(device_id, async_enabled)
        })
    }

    pub fn local_record(&self) -> &QcmRecord {
        &self.local_record
    }

    pub fn last_change_time(&self) -> SimTime {
        self.last_change_time
    }

    pub fn last_request_xid(&self) -> u32 {
        self.last_request_xid
    }

    /// Answers a poll with the current row, echoing the request xid.
    pub fn handle_request(&mut self, req: &QcmMultipart) -> Result<Vec<QcmMultipart>, AgentError> {
        if req.direction != Direction::Request {
            return Err(AgentError::NotARequest);
        }
        self.last_request_xid = req.xid;
        Ok(fragment(&[self.local_record], req.xid, Direction::Reply))
    }

    /// Wire-level variant of [`handle_request`](Self::handle_request):
    /// strict-decodes the frame and returns encoded reply frames. A decode
    /// failure leaves the state untouched and produces no reply.
    pub fn handle_request_frame(&mut self, frame: &[u8]) -> Result<Vec<Vec<u8>>, AgentError> {
        let req = decode_multipart(frame, DecodeMode::Strict)?;
        self.handle_request(&req)?
            .iter()
            .map(|m| encode_multipart(m).map_err(AgentError::from))
            .collect()
    }

    /// Middleware rewrote the local metadata. Returns an unsolicited reply
    /// (xid 0) iff something changed and async updates are enabled.
    pub fn on_middleware_change(
        &mut self,
        new_record: QcmRecord,
        now: SimTime,
    ) -> Result<Option<QcmMultipart>, AgentError> {
        check_valid(&new_record)?;
        self.check_time(now)?;
        if diff_records(&self.local_record, &new_record).is_empty() {
            return Ok(None);
        }
        self.local_record = new_record;
        self.last_change_time = now;
        Ok(self
            .async_enabled
            .then(|| QcmMultipart::reply(ASYNC_XID, vec![new_record])))
    }

    /// Controller-requested overwrite. Never echoed back asynchronously.
    pub fn apply_controller_change(
        &mut self,
        requested: QcmRecord,
        now: SimTime,
    ) -> Result<(), AgentError> {
        check_valid(&requested)?;
        self.check_time(now)?;
        self.local_record = requested;
        self.last_change_time = now;
        Ok(())
    }

    fn check_time(&self, now: SimTime) -> Result<(), AgentError> {
        if now < self.last_change_time {
            return Err(AgentError::TimeRegression {
                now,
                last: self.last_change_time,
            });
        }
        Ok(())
    }
}

fn check_valid(r: &QcmRecord) -> Result<(), AgentError> {
    let violations = validate_record(r);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(MetadataError::Invalid(violations).into())
    }
}

/// Statistic names in table order.
pub const STAT_NAMES: [&str; 6] = [
    "QCHANNEL",
    "QCHANNEL_SPEC",
    "QCOM",
    "QCOM_SPEC",
    "QEC",
    "QEC_SPEC",
];

/// Flattens a record into six 16-bit statistics: identifiers pass through,
/// parameter blocks become the byte sum of their 16 serialized bytes mod 2^16.
pub fn flow_module_transform(r: &QcmRecord) -> [(&'static str, u16); 6] {
    let stats = crate::wire::encode_stats_unchecked(r);
    let sum = |range: std::ops::Range<usize>| {
        stats[range]
            .iter()
            .fold(0u16, |acc, &b| acc.wrapping_add(b as u16))
    };
    [
        (STAT_NAMES[0], r.qchannel),
        (STAT_NAMES[1], sum(2..18)),
        (STAT_NAMES[2], r.qcom.0),
        (STAT_NAMES[3], sum(20..36)),
        (STAT_NAMES[4], r.qec),
        (STAT_NAMES[5], sum(38..54)),
    ]
}
