//! Commands behind the `qcm` binary. Each returns an [`ExitStatus`] and writes
//! results to `out` and diagnostics to `err`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use std::process::ExitCode;

use qcm::metadata::{MetadataError, QcmRecord};
use qcm::scenario::{Scenario, ScenarioError};
use qcm::sim::{self, TraceMode};
use qcm::wire::{self, DecodeMode, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// Validation or protocol failure.
    Domain = 1,
    /// Bad arguments or unreadable files.
    Usage = 2,
}

impl From<ExitStatus> for ExitCode {
    fn from(s: ExitStatus) -> ExitCode {
        ExitCode::from(s as u8)
    }
}

fn read_path(path: &Path, err: &mut dyn Write) -> Result<String, ExitStatus> {
    fs::read_to_string(path).map_err(|e| {
        let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
        ExitStatus::Usage
    })
}

fn write_output(
    text: &str,
    path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let result = match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    match result {
        Ok(()) => ExitStatus::Success,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitStatus::Usage
        }
    }
}

/// Runs a scenario file and writes the rendered trace. `mode` overrides the
/// trace mode named in the file.
pub fn cmd_run(
    scenario: &Path,
    mode: Option<TraceMode>,
    out_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let mut s = match Scenario::load(scenario) {
        Ok(s) => s,
        Err(e @ ScenarioError::Io { .. }) => {
            let _ = writeln!(err, "error: {e}");
            return ExitStatus::Usage;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", scenario.display());
            return ExitStatus::Domain;
        }
    };
    if let Some(m) = mode {
        s.topology.trace_mode = m;
    }
    match sim::run(&s.topology, s.t_end, s.seed) {
        Ok(trace) => write_output(&trace.render(), out_path, out, err),
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", scenario.display());
            ExitStatus::Domain
        }
    }
}

/// Decodes a hex dump holding one or more back-to-back frames.
pub fn cmd_decode(input: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let text = match input {
        Some(p) => match read_path(p, err) {
            Ok(t) => t,
            Err(s) => return s,
        },
        None => {
            let mut t = String::new();
            if let Err(e) = io::stdin().read_to_string(&mut t) {
                let _ = writeln!(err, "error: cannot read standard input: {e}");
                return ExitStatus::Usage;
            }
            t
        }
    };
    decode_text(&text, out, err)
}

/// [`cmd_decode`] on in-memory hex text.
pub fn decode_text(text: &str, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let bytes = match wire::parse_hex_dump(text) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return ExitStatus::Domain;
        }
    };
    if bytes.is_empty() {
        let _ = writeln!(err, "error: input holds no bytes");
        return ExitStatus::Domain;
    }
    let frames = match wire::split_frames(&bytes) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return ExitStatus::Domain;
        }
    };
    let mut rendered = String::new();
    for (i, (offset, frame)) in frames.iter().enumerate() {
        match wire::decode_multipart(frame, DecodeMode::Strict) {
            Ok(m) => {
                if frames.len() > 1 {
                    rendered.push_str(&format!("FRAME {i}\n"));
                }
                rendered.push_str(&m.to_text());
            }
            Err(e) => {
                let _ = writeln!(err, "error: frame {i}: {}", wire::shift_offset(e, *offset));
                return ExitStatus::Domain;
            }
        }
    }
    write_output(&rendered, None, out, err)
}

/// Parses a record spec file: empty (no records), one record, or several
/// records each introduced by a `RECORD <n>` line.
pub fn parse_record_spec(text: &str) -> Result<Vec<QcmRecord>, MetadataError> {
    let mut blocks: Vec<String> = vec![String::new()];
    for line in text.lines() {
        if line.trim_start().starts_with("RECORD ") {
            blocks.push(String::new());
        } else {
            let b = blocks.last_mut().expect("nonempty");
            b.push_str(line);
            b.push('\n');
        }
    }
    let is_blank = |b: &str| {
        b.lines()
            .all(|l| l.trim().is_empty() || l.trim_start().starts_with('#'))
    };
    let lead = blocks.remove(0);
    if blocks.is_empty() {
        return if is_blank(&lead) {
            Ok(Vec::new())
        } else {
            Ok(vec![lead.parse()?])
        };
    }
    if !is_blank(&lead) {
        return Err(MetadataError::Parse(
            "text before the first RECORD line".into(),
        ));
    }
    blocks.iter().map(|b| b.parse()).collect()
}

/// Encodes a record spec as one or more frames and prints their hex dump.
pub fn cmd_encode(
    spec: Option<&Path>,
    direction: Direction,
    xid: u32,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let records = match spec {
        Some(p) => {
            let text = match read_path(p, err) {
                Ok(t) => t,
                Err(s) => return s,
            };
            match parse_record_spec(&text) {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "error: {}: {e}", p.display());
                    return ExitStatus::Domain;
                }
            }
        }
        None if direction == Direction::Request => Vec::new(),
        None => {
            let _ = writeln!(err, "error: --spec is required for replies");
            return ExitStatus::Usage;
        }
    };
    if direction == Direction::Request && !records.is_empty() {
        let _ = writeln!(err, "error: requests carry no records");
        return ExitStatus::Domain;
    }
    let mut bytes = Vec::new();
    for seg in wire::fragment(&records, xid, direction) {
        match wire::encode_multipart(&seg) {
            Ok(b) => bytes.extend_from_slice(&b),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return ExitStatus::Domain;
            }
        }
    }
    write_output(&wire::to_hex_dump(&bytes), None, out, err)
}

/// Exit 0 iff both files are byte-identical; otherwise reports the first
/// differing line.
pub fn cmd_diff_trace(
    actual: &Path,
    golden: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> ExitStatus {
    let (a, g) = match (fs::read(actual), fs::read(golden)) {
        (Ok(a), Ok(g)) => (a, g),
        (Err(e), _) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", actual.display());
            return ExitStatus::Usage;
        }
        (_, Err(e)) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", golden.display());
            return ExitStatus::Usage;
        }
    };
    if a == g {
        return ExitStatus::Success;
    }
    let a = String::from_utf8_lossy(&a);
    let g = String::from_utf8_lossy(&g);
    let mut al = a.split_inclusive('\n');
    let mut gl = g.split_inclusive('\n');
    let mut n = 1;
    loop {
        match (al.next(), gl.next()) {
            (Some(x), Some(y)) if x == y => n += 1,
            (x, y) => {
                let show = |l: Option<&str>| match l {
                    Some(l) if l.ends_with('\n') => format!("{:?}", l.trim_end_matches('\n')),
                    Some(l) => format!("{l:?} (no trailing newline)"),
                    None => "<end of file>".to_string(),
                };
                let _ = writeln!(out, "traces differ at line {n}");
                let _ = writeln!(out, "actual: {}", show(x));
                let _ = writeln!(out, "golden: {}", show(y));
                return ExitStatus::Domain;
            }
        }
    }
}
