use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn qcm(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qcm"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn qcm");
    if let Some(input) = stdin {
        child
            .stdin
            .take()
            .unwrap()
            .write_all(input.as_bytes())
            .unwrap();
    } else {
        drop(child.stdin.take());
    }
    child.wait_with_output().unwrap()
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const SPEC: &str = "QCHANNEL: 7
QCHANNEL_SPEC: wavelength_pm=1550000 mean_photon_milli=100 symbol_rate_hz=1000000
QCOM: SDC
QCOM_SPEC: 000102030405060708090a0b0c0d0e0f
QEC: 2
QEC_SPEC: n=5 k=1 d=3 verify_circuit_id=9
";

#[test]
fn run_fig8_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.txt");
    let fig8 = scenarios().join("fig8.json");
    let golden = scenarios().join("fig8.golden.txt");
    let o = qcm(
        &[
            "run",
            "--scenario",
            fig8.to_str().unwrap(),
            "--mode",
            "legacy-fig8",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    assert_eq!(fs::read(&out).unwrap(), fs::read(&golden).unwrap());

    let d = qcm(
        &[
            "diff-trace",
            out.to_str().unwrap(),
            golden.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(d.status.code(), Some(0));
}

#[test]
fn run_empty_topology_prints_only_the_clock() {
    let o = qcm(
        &[
            "run",
            "--scenario",
            scenarios().join("empty.json").to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "15.0\n");
}

#[test]
fn run_missing_or_invalid_scenario() {
    let o = qcm(&["run", "--scenario", "/no/such/scenario.json"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/scenario.json"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"t_end": 5, "devices": [{"id": 1}, {"id": 1}]}"#).unwrap();
    let o = qcm(&["run", "--scenario", bad.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.json"));

    let o = qcm(
        &[
            "run",
            "--scenario",
            bad.to_str().unwrap(),
            "--mode",
            "fancy",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn decode_empty_request() {
    let o = qcm(
        &["decode"],
        Some("05 12 00 10 00 00 00 07 00 11 00 00 00 00 00 00\n"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "DIRECTION: REQUEST\nVERSION: 5\nXID: 7\nFLAGS: 0x0000\nRECORDS: 0\n"
    );
}

#[test]
fn encode_then_decode_reproduces_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("record.txt");
    fs::write(&spec, SPEC).unwrap();
    let e = qcm(
        &[
            "encode",
            "--spec",
            spec.to_str().unwrap(),
            "--direction",
            "reply",
            "--xid",
            "42",
        ],
        None,
    );
    assert_eq!(e.status.code(), Some(0), "{}", stderr(&e));
    let hex = stdout(&e);
    assert_eq!(hex.split_whitespace().count(), 72);
    assert!(hex.ends_with('\n'));

    let hex_path = dir.path().join("reply.hex");
    fs::write(&hex_path, &hex).unwrap();
    let d = qcm(&["decode", "--in", hex_path.to_str().unwrap()], None);
    assert_eq!(d.status.code(), Some(0), "{}", stderr(&d));
    let text = stdout(&d);
    assert_eq!(
        text,
        format!(
            "DIRECTION: REPLY\nVERSION: 5\nXID: 42\nFLAGS: 0x0000\nRECORDS: 1\nRECORD 0\n{SPEC}"
        )
    );
    let (_, record) = text.split_once("RECORD 0\n").unwrap();
    assert_eq!(record, SPEC);
}

#[test]
fn decode_truncated_input_reports_offset() {
    let o = qcm(
        &["decode"],
        Some("05 13 00 48 00 00 00 2a 00 11 00 00 00 00 00 00\n00 07\n"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("offset 18"), "{}", stderr(&o));

    let o = qcm(&["decode"], Some("zz\n"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn encode_rejects_invalid_records() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.txt");
    fs::write(&spec, SPEC.replace("QEC: 2", "QEC: 0")).unwrap();
    let o = qcm(
        &[
            "encode",
            "--spec",
            spec.to_str().unwrap(),
            "--direction",
            "reply",
            "--xid",
            "1",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    let o = qcm(&["encode", "--direction", "reply", "--xid", "1"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = qcm(&["encode", "--direction", "sideways", "--xid", "1"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn diff_trace_reports_first_difference() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    fs::write(&a, "one\ntwo\nthree\n").unwrap();
    fs::write(&b, "one\ntwo\nthree\n").unwrap();
    let o = qcm(
        &["diff-trace", a.to_str().unwrap(), b.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(0));

    fs::write(&b, "one\nTWO\nthree\n").unwrap();
    let o = qcm(
        &["diff-trace", a.to_str().unwrap(), b.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("line 2"), "{text}");
    assert!(text.contains("\"two\"") && text.contains("\"TWO\""));

    let o = qcm(
        &["diff-trace", a.to_str().unwrap(), "/no/such/golden"],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}
