//! JSON scenario files.
//!
//! ```json
//! {
//!   "t_end": 15,
//!   "trace_mode": "legacy-fig8",
//!   "controller": { "mode": "MIXED", "poll_period": 5, "bootstrap_poll": false },
//!   "devices": [
//!     { "id": 1, "model": "scripted",
//!       "script": [[0, "qcom", "SDC"], [5, "qcom", "SDC"], [10, "qcom", "SDC"]] }
//!   ]
//! }
//! ```
//!
//! Script values and record fields use the same value syntax as the textual
//! record form (`SDC`, `7`, `wavelength_pm=1550000`, 32 hex digits, ...).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{Action, QcmFlowEntry, QcmMatch};
use crate::devices::{DeviceError, MutationScript, NodeEvent, ScriptEntry};
use crate::metadata::{
    apply_field_updates, ComProtocolId, Field, FieldUpdate, MetadataError, QcmRecord,
};
use crate::sim::{
    ControllerMode, DeviceConfig, NodeModel, ScheduledChange, Topology, TopologyError, TraceMode,
};
use crate::time::SimTime;

/// The bundled single-device scenario with changes at t = 0, 5 and 10.
pub const FIG8_SCENARIO: &str = include_str!("../../../scenarios/fig8.json");
/// Expected legacy-mode trace of [`FIG8_SCENARIO`].
pub const FIG8_GOLDEN_TRACE: &str = include_str!("../../../scenarios/fig8.golden.txt");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("device {device}: {source}")]
    Script {
        device: u32,
        #[source]
        source: DeviceError,
    },
    #[error("{context}: {source}")]
    Record {
        context: String,
        #[source]
        source: MetadataError,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub t_end: SimTime,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trace_mode: TraceMode,
    #[serde(default)]
    pub channel_delay: SimTime,
    #[serde(default)]
    pub channel_jitter: SimTime,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub devices: Vec<DeviceSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default)]
    pub mode: ControllerMode,
    #[serde(default = "default_poll_period")]
    pub poll_period: SimTime,
    #[serde(default = "yes")]
    pub bootstrap_poll: bool,
    #[serde(default)]
    pub changes: Vec<ChangeSection>,
    #[serde(default)]
    pub flow_entries: Vec<FlowEntrySection>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection {
            mode: ControllerMode::default(),
            poll_period: default_poll_period(),
            bootstrap_poll: true,
            changes: Vec::new(),
            flow_entries: Vec::new(),
        }
    }
}

fn default_poll_period() -> SimTime {
    SimTime::from_ticks(crate::controller::DEFAULT_POLL_PERIOD)
}

fn yes() -> bool {
    true
}

/// Field name → value text; absent fields take their zero value.
pub type RecordSection = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeSection {
    pub at: SimTime,
    pub device: u32,
    pub record: RecordSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntrySection {
    pub id: u32,
    #[serde(default)]
    pub priority: u16,
    #[serde(default, rename = "match")]
    pub matcher: MatchSection,
    #[serde(default)]
    pub actions: Vec<ActionSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchSection {
    pub qchannel: Option<u16>,
    pub qcom: Option<String>,
    pub qec: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSection {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSection {
    Scripted,
    Memory { slots: u32 },
    Repeater,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub id: u32,
    #[serde(default = "scripted")]
    pub model: ModelSection,
    #[serde(default)]
    pub initial: RecordSection,
    /// `[time, field, value]` triples.
    #[serde(default)]
    pub script: Vec<(SimTime, String, String)>,
    #[serde(default)]
    pub events: Vec<EventSection>,
}

fn scripted() -> ModelSection {
    ModelSection::Scripted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSection {
    pub at: SimTime,
    pub event: NodeEvent,
}

/// A parsed, validated scenario ready to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: Option<String>,
    pub topology: Topology,
    pub t_end: SimTime,
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.into_scenario()
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_json(&text)
    }

    pub fn fig8() -> Scenario {
        Scenario::from_json(FIG8_SCENARIO).expect("bundled scenario parses")
    }
}

fn parse_record(section: &RecordSection, context: &str) -> Result<QcmRecord, ScenarioError> {
    let wrap = |source| ScenarioError::Record {
        context: context.to_string(),
        source,
    };
    let updates = section
        .iter()
        .map(|(name, value)| {
            let field: Field = name.parse()?;
            Ok(FieldUpdate {
                field,
                value: field.parse_value(value)?,
            })
        })
        .collect::<Result<Vec<_>, MetadataError>>()
        .map_err(wrap)?;
    apply_field_updates(&QcmRecord::default(), &updates).map_err(wrap)
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let mut devices = Vec::with_capacity(self.devices.len());
        for d in &self.devices {
            let context = format!("device {}", d.id);
            let initial = parse_record(&d.initial, &format!("{context} initial record"))?;
            let mut entries = Vec::with_capacity(d.script.len());
            for (i, (time, field, value)) in d.script.iter().enumerate() {
                let parsed = field
                    .parse::<Field>()
                    .and_then(|f| {
                        Ok(FieldUpdate {
                            field: f,
                            value: f.parse_value(value)?,
                        })
                    })
                    .map_err(|source| ScenarioError::Record {
                        context: format!("{context} script entry {i}"),
                        source,
                    })?;
                entries.push(ScriptEntry {
                    time: *time,
                    update: parsed,
                });
            }
            // Catch scripts that are invalid on their own before running.
            let mut probe = initial;
            for (i, e) in entries.iter().enumerate() {
                probe = apply_field_updates(&probe, &[e.update]).map_err(|source| {
                    ScenarioError::Record {
                        context: format!("{context} script entry {i}"),
                        source,
                    }
                })?;
            }
            let script = MutationScript::new(entries).map_err(|source| ScenarioError::Script {
                device: d.id,
                source,
            })?;
            devices.push(DeviceConfig {
                id: d.id,
                model: match d.model {
                    ModelSection::Scripted => NodeModel::Scripted,
                    ModelSection::Memory { slots } => NodeModel::Memory { slots },
                    ModelSection::Repeater => NodeModel::Repeater,
                },
                initial,
                script,
                events: d.events.iter().map(|e| (e.at, e.event)).collect(),
            });
        }

        let changes = self
            .controller
            .changes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(ScheduledChange {
                    time: c.at,
                    device: c.device,
                    record: parse_record(&c.record, &format!("controller change {i}"))?,
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;

        let flow_entries = self
            .controller
            .flow_entries
            .iter()
            .map(|e| {
                let qcom = e
                    .matcher
                    .qcom
                    .as_deref()
                    .map(str::parse::<ComProtocolId>)
                    .transpose()
                    .map_err(|source| ScenarioError::Record {
                        context: format!("flow entry {}", e.id),
                        source,
                    })?;
                Ok(QcmFlowEntry {
                    entry_id: e.id,
                    priority: e.priority,
                    matcher: QcmMatch {
                        qchannel: e.matcher.qchannel,
                        qcom,
                        qec: e.matcher.qec,
                    },
                    actions: e
                        .actions
                        .iter()
                        .map(|a| Action {
                            name: a.name.clone(),
                            params: a.params.clone().into_iter().collect(),
                        })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;

        let topology = Topology {
            devices,
            mode: self.controller.mode,
            poll_period: self.controller.poll_period,
            bootstrap_poll: self.controller.bootstrap_poll,
            channel_delay: self.channel_delay,
            channel_jitter: self.channel_jitter,
            changes,
            flow_entries,
            trace_mode: self.trace_mode,
        };
        topology.validate()?;
        Ok(Scenario {
            name: self.name,
            topology,
            t_end: self.t_end,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run;

    #[test]
    fn bundled_fig8_matches_golden() {
        let s = Scenario::fig8();
        assert_eq!(s.topology.trace_mode, TraceMode::LegacyFig8);
        let trace = run(&s.topology, s.t_end, s.seed).unwrap();
        assert_eq!(trace.render(), FIG8_GOLDEN_TRACE);
    }

    #[test]
    fn full_featured_scenario_parses() {
        let s = Scenario::from_json(
            r#"{
              "t_end": "21/2",
              "channel_delay": 0.5,
              "controller": {
                "mode": "ASYNC",
                "changes": [{"at": 4, "device": 2, "record": {"qchannel": "9", "qcom": "QKD"}}],
                "flow_entries": [{"id": 1, "priority": 3, "match": {"qcom": "QKD"},
                                  "actions": [{"name": "route", "params": {"port": "2"}}]}]
              },
              "devices": [
                {"id": 2, "model": {"memory": {"slots": 4}},
                 "initial": {"qchannel_spec": "wavelength_pm=1550000"},
                 "events": [{"at": 1, "event": {"type": "SET_QEC", "code": 1, "spec": {"n": 7, "k": 1, "d": 3}}}]},
                {"id": 3, "model": "repeater", "events": [{"at": 2, "event": {"type": "ADVANCE_STAGE"}}]}
              ]
            }"#,
        )
        .unwrap();
        assert_eq!(s.t_end, SimTime::from_ratio(21, 2));
        assert_eq!(s.topology.channel_delay, SimTime::from_ratio(1, 2));
        assert_eq!(
            s.topology.devices[0].initial.qchannel_spec.wavelength_pm,
            1_550_000
        );
        assert_eq!(s.topology.changes[0].record.qcom, ComProtocolId::QKD);
        assert_eq!(
            s.topology.flow_entries[0].actions[0].to_string(),
            "route port=2"
        );
        let trace = run(&s.topology, s.t_end, s.seed).unwrap().render();
        assert!(trace.contains("applying action route port=2"), "{trace}");
        assert!(trace.ends_with("10.5\n"));
    }

    #[test]
    fn invalid_scenarios() {
        assert!(matches!(
            Scenario::from_json("{"),
            Err(ScenarioError::Json(_))
        ));
        assert!(matches!(
            Scenario::from_json(r#"{"t_end": 1, "bogus": 1}"#),
            Err(ScenarioError::Json(_))
        ));
        let bad_script = r#"{"t_end": 1, "devices": [{"id": 1, "script": [[0, "qcom_spec", "01000000000000000000000000000000"]]}]}"#;
        assert!(matches!(
            Scenario::from_json(bad_script),
            Err(ScenarioError::Record { .. })
        ));
        let unordered = r#"{"t_end": 1, "devices": [{"id": 1, "script": [[2, "qchannel", "1"], [1, "qchannel", "2"]]}]}"#;
        assert!(matches!(
            Scenario::from_json(unordered),
            Err(ScenarioError::Script { .. })
        ));
        let dup = r#"{"t_end": 1, "devices": [{"id": 1}, {"id": 1}]}"#;
        assert!(matches!(
            Scenario::from_json(dup),
            Err(ScenarioError::Topology(TopologyError::DuplicateDevice(1)))
        ));
        let err = Scenario::load(Path::new("/nonexistent/scenario.json")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/scenario.json"));
    }
}
