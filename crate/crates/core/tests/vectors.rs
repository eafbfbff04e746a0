//! Hand-assembled frames checked against the codec in both directions.

mod common;

use std::fs;
use std::path::PathBuf;

use qcm::agent::AgentState;
use qcm::controller::ControllerView;
use qcm::metadata::{ChannelSpec, ComProtocolId, ComSpec, EcSpec, QcmRecord};
use qcm::time::SimTime;
use qcm::wire::{
    decode_multipart, encode_multipart, parse_hex_dump, to_hex_dump, DecodeMode, QcmMultipart,
};

const VECTORS: [&str; 3] = ["empty_request", "one_record_reply", "async_update"];

fn vector(name: &str, ext: &str) -> String {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/vectors/{name}.{ext}"));
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn bytes(name: &str) -> Vec<u8> {
    parse_hex_dump(&vector(name, "hex")).unwrap()
}

#[test]
fn vectors_decode_to_their_text_and_reencode() {
    for name in VECTORS {
        let raw = bytes(name);
        let msg = decode_multipart(&raw, DecodeMode::Strict).unwrap();
        assert_eq!(msg.to_text(), vector(name, "txt"), "{name}");
        assert_eq!(encode_multipart(&msg).unwrap(), raw, "{name}");
        assert_eq!(parse_hex_dump(&to_hex_dump(&raw)).unwrap(), raw);
    }
}

#[test]
fn sizes() {
    assert_eq!(bytes("empty_request").len(), 16);
    assert_eq!(bytes("one_record_reply").len(), 72);
    assert_eq!(bytes("async_update").len(), 72);
}

#[test]
fn reply_vector_matches_the_reference_layout() {
    let r = QcmRecord {
        qchannel: 7,
        qchannel_spec: ChannelSpec {
            wavelength_pm: 1_550_000,
            mean_photon_milli: 100,
            symbol_rate_hz: 1_000_000,
            reserved: 0,
        },
        qcom: ComProtocolId::SDC,
        qcom_spec: ComSpec(std::array::from_fn(|i| i as u8)),
        qec: 2,
        qec_spec: EcSpec::new(5, 1, 3, 9),
    };
    let expected = bytes("one_record_reply");
    assert_eq!(common::oracle_frame_bytes(19, 42, 0, &[r]), expected);
    assert_eq!(
        encode_multipart(&QcmMultipart::reply(42, vec![r])).unwrap(),
        expected
    );
}

#[test]
fn agent_and_controller_speak_the_vectors() {
    let reply = decode_multipart(&bytes("one_record_reply"), DecodeMode::Strict).unwrap();
    let record = reply.records[0];

    let mut agent = AgentState::with_record(1, record, true).unwrap();
    let mut request = bytes("empty_request");
    request[4..8].copy_from_slice(&42u32.to_be_bytes());
    let frames = agent.handle_request_frame(&request).unwrap();
    assert_eq!(frames, vec![bytes("one_record_reply")]);

    let mut view = ControllerView::new([1], SimTime::from_ticks(5));
    view.handle_async_frame(1, &bytes("async_update"), SimTime::from_ticks(3))
        .unwrap();
    assert_eq!(view.query(1).unwrap().qcom, ComProtocolId::QKD);
}

#[test]
fn corrupted_vectors_fail_strict_decoding_at_the_right_offset() {
    let mut raw = bytes("one_record_reply");
    raw[16 + 46] = 1; // first EC reserved byte
    let err = decode_multipart(&raw, DecodeMode::Strict).unwrap_err();
    assert_eq!(err.offset(), Some(62));
    assert!(decode_multipart(&raw, DecodeMode::Lenient).is_ok());

    let raw = bytes("one_record_reply");
    let err = decode_multipart(&raw[..40], DecodeMode::Strict).unwrap_err();
    assert!(err.offset().is_some(), "{err}");
}
