//! Test-only oracles, written independently of the library's codec and
//! lookup code.

#![allow(dead_code)]

use proptest::prelude::*;
use qcm::controller::{Action, QcmFlowEntry};
use qcm::metadata::{ChannelSpec, ComProtocolId, ComSpec, EcSpec, QcmRecord};
use rand::Rng;

/// Stats body layout written out field by field with `to_be_bytes`.
pub fn oracle_stats_bytes(r: &QcmRecord) -> Vec<u8> {
    let mut b = Vec::with_capacity(56);
    b.extend(r.qchannel.to_be_bytes());
    b.extend(r.qchannel_spec.wavelength_pm.to_be_bytes());
    b.extend(r.qchannel_spec.mean_photon_milli.to_be_bytes());
    b.extend(r.qchannel_spec.symbol_rate_hz.to_be_bytes());
    b.extend(r.qchannel_spec.reserved.to_be_bytes());
    b.extend(r.qcom.0.to_be_bytes());
    b.extend(r.qcom_spec.0);
    b.extend(r.qec.to_be_bytes());
    b.extend(r.qec_spec.n.to_be_bytes());
    b.extend(r.qec_spec.k.to_be_bytes());
    b.extend(r.qec_spec.d.to_be_bytes());
    b.extend(r.qec_spec.verify_circuit_id.to_be_bytes());
    b.extend(r.qec_spec.reserved);
    b.extend([0u8, 0]);
    b
}

/// Whole-frame layout: header, preamble, then stats bodies.
pub fn oracle_frame_bytes(msg_type: u8, xid: u32, flags: u16, records: &[QcmRecord]) -> Vec<u8> {
    let len = 16 + 56 * records.len();
    let mut b = vec![5, msg_type];
    b.extend((len as u16).to_be_bytes());
    b.extend(xid.to_be_bytes());
    b.extend(17u16.to_be_bytes());
    b.extend([0u8; 4]);
    b.extend(flags.to_be_bytes());
    for r in records {
        b.extend(oracle_stats_bytes(r));
    }
    b
}

/// Brute force over every entry in install order: highest priority wins,
/// ties go to the lowest id.
pub fn oracle_lookup<'a>(
    entries: &'a [QcmFlowEntry],
    attrs: &QcmRecord,
) -> Option<&'a QcmFlowEntry> {
    let mut best: Option<&QcmFlowEntry> = None;
    for e in entries {
        let m = &e.matcher;
        let hit = m.qchannel.is_none_or(|v| v == attrs.qchannel)
            && m.qcom.is_none_or(|v| v == attrs.qcom)
            && m.qec.is_none_or(|v| v == attrs.qec);
        if !hit {
            continue;
        }
        best = match best {
            None => Some(e),
            Some(b)
                if e.priority > b.priority
                    || (e.priority == b.priority && e.entry_id < b.entry_id) =>
            {
                Some(e)
            }
            keep => keep,
        };
    }
    best
}

/// A valid record from an rng, with values drawn from small ranges so that
/// identifier collisions are common.
pub fn gen_record<R: Rng>(rng: &mut R) -> QcmRecord {
    let qcom = ComProtocolId(rng.gen_range(0..5));
    let qec = rng.gen_range(0..4u16);
    QcmRecord {
        qchannel: rng.gen_range(0..6),
        qchannel_spec: ChannelSpec {
            wavelength_pm: rng.gen(),
            mean_photon_milli: rng.gen(),
            symbol_rate_hz: rng.gen(),
            reserved: 0,
        },
        qcom,
        qcom_spec: if qcom.0 == 0 {
            ComSpec::default()
        } else {
            ComSpec(rng.gen())
        },
        qec,
        qec_spec: if qec == 0 {
            EcSpec::default()
        } else {
            EcSpec::new(rng.gen_range(1..=u16::MAX), rng.gen(), rng.gen(), rng.gen())
        },
    }
}

/// Up to `max` entries with few distinct priorities (to force ties) and
/// shuffled ids.
pub fn gen_entries<R: Rng>(rng: &mut R, max: usize) -> Vec<QcmFlowEntry> {
    let n = rng.gen_range(0..=max);
    let mut ids: Vec<u32> = (0..(2 * max as u32 + 1)).collect();
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.gen_range(0..=i));
    }
    (0..n)
        .map(|i| QcmFlowEntry {
            entry_id: ids[i],
            priority: rng.gen_range(0..3),
            matcher: qcm::controller::QcmMatch {
                qchannel: rng.gen_bool(0.4).then(|| rng.gen_range(0..6)),
                qcom: rng
                    .gen_bool(0.4)
                    .then(|| ComProtocolId(rng.gen_range(0..5))),
                qec: rng.gen_bool(0.3).then(|| rng.gen_range(0..4)),
            },
            actions: vec![Action::new(format!("out{}", ids[i]))],
        })
        .collect()
}

pub fn arb_channel_spec() -> impl Strategy<Value = ChannelSpec> {
    (any::<u32>(), any::<u32>(), any::<u32>()).prop_map(|(w, m, s)| ChannelSpec {
        wavelength_pm: w,
        mean_photon_milli: m,
        symbol_rate_hz: s,
        reserved: 0,
    })
}

pub fn arb_code() -> impl Strategy<Value = (u16, EcSpec)> {
    prop_oneof![
        Just((0u16, EcSpec::default())),
        (
            1..=u16::MAX,
            1..=u16::MAX,
            any::<u16>(),
            any::<u16>(),
            any::<u16>()
        )
            .prop_map(|(code, n, k, d, v)| (code, EcSpec::new(n, k, d, v))),
    ]
}

pub fn arb_protocol() -> impl Strategy<Value = (ComProtocolId, ComSpec)> {
    prop_oneof![
        Just((ComProtocolId::NONE, ComSpec::default())),
        (1..=u16::MAX, any::<[u8; 16]>()).prop_map(|(id, b)| (ComProtocolId(id), ComSpec(b))),
    ]
}

pub fn arb_record() -> impl Strategy<Value = QcmRecord> {
    (any::<u16>(), arb_channel_spec(), arb_protocol(), arb_code()).prop_map(
        |(qchannel, qchannel_spec, (qcom, qcom_spec), (qec, qec_spec))| QcmRecord {
            qchannel,
            qchannel_spec,
            qcom,
            qcom_spec,
            qec,
            qec_spec,
        },
    )
}
