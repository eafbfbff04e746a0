use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Separator line closing a trace block.
pub const BLOCK_SEPARATOR: &str = "-----";

/// How trace lines are worded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TraceMode {
    /// Every event timestamped and attributed; all six record fields printed.
    #[default]
    #[serde(rename = "canonical")]
    Canonical,
    /// The older block-per-change wording, kept byte for byte.
    #[serde(rename = "legacy-fig8")]
    LegacyFig8,
}

impl fmt::Display for TraceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceMode::Canonical => "canonical",
            TraceMode::LegacyFig8 => "legacy-fig8",
        })
    }
}

impl FromStr for TraceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical" => Ok(TraceMode::Canonical),
            "legacy-fig8" => Ok(TraceMode::LegacyFig8),
            other => Err(format!(
                "unknown trace mode `{other}` (expected canonical or legacy-fig8)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLine {
    pub time: SimTime,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub lines: Vec<TraceLine>,
    pub final_clock: SimTime,
}

impl Trace {
    pub fn push(&mut self, time: SimTime, text: impl Into<String>) {
        debug_assert!(self.lines.last().is_none_or(|l| l.time <= time));
        self.lines.push(TraceLine {
            time,
            text: text.into(),
        });
    }

    /// One line per entry, then the final clock with one decimal.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(&l.text);
            out.push('\n');
        }
        out.push_str(&self.final_clock.one_decimal());
        out.push('\n');
        out
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
