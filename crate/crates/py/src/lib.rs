//! Python bindings for the `qcm` crate.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use qcm::agent::AgentState;
use qcm::controller::{Action, ControllerView, QcmFlowEntry, QcmFlowTable, QcmMatch};
use qcm::metadata::{self, ChannelSpec, ComProtocolId, ComSpec, EcSpec, Field};
use qcm::scenario::{Scenario, FIG8_GOLDEN_TRACE};
use qcm::sim::{self, TraceMode};
use qcm::time::SimTime;
use qcm::wire::{self, DecodeMode, Direction};

create_exception!(qcm_py, QcmError, PyValueError);

fn err(e: impl std::fmt::Display) -> PyErr {
    QcmError::new_err(e.to_string())
}

fn time(t: f64) -> PyResult<SimTime> {
    SimTime::from_f64(t).ok_or_else(|| err(format!("bad time {t}")))
}

fn protocol(p: &Bound<'_, PyAny>) -> PyResult<ComProtocolId> {
    if let Ok(n) = p.extract::<u16>() {
        return Ok(ComProtocolId(n));
    }
    p.extract::<String>()?.parse().map_err(err)
}

#[pyclass(name = "QcmRecord", module = "qcm_py", eq, frozen, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyRecord(metadata::QcmRecord);

#[pymethods]
impl PyRecord {
    #[new]
    #[pyo3(signature = (
        qchannel = 0, wavelength_pm = 0, mean_photon_milli = 0, symbol_rate_hz = 0,
        qcom = None, qcom_spec = None, qec = 0, n = 0, k = 0, d = 0, verify_circuit_id = 0,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        qchannel: u16,
        wavelength_pm: u32,
        mean_photon_milli: u32,
        symbol_rate_hz: u32,
        qcom: Option<&Bound<'_, PyAny>>,
        qcom_spec: Option<Vec<u8>>,
        qec: u16,
        n: u16,
        k: u16,
        d: u16,
        verify_circuit_id: u16,
    ) -> PyResult<Self> {
        let qcom_spec =
            match qcom_spec {
                None => ComSpec::default(),
                Some(b) => ComSpec(b.try_into().map_err(|b: Vec<u8>| {
                    err(format!("qcom_spec needs 16 bytes, got {}", b.len()))
                })?),
            };
        let r = metadata::QcmRecord {
            qchannel,
            qchannel_spec: ChannelSpec {
                wavelength_pm,
                mean_photon_milli,
                symbol_rate_hz,
                reserved: 0,
            },
            qcom: qcom.map(protocol).transpose()?.unwrap_or_default(),
            qcom_spec,
            qec,
            qec_spec: EcSpec::new(n, k, d, verify_circuit_id),
        };
        let violations = metadata::validate_record(&r);
        if !violations.is_empty() {
            return Err(err(metadata::MetadataError::Invalid(violations)));
        }
        Ok(PyRecord(r))
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        metadata::QcmRecord::from_text(text)
            .map(PyRecord)
            .map_err(err)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    #[getter]
    fn qchannel(&self) -> u16 {
        self.0.qchannel
    }

    #[getter]
    fn wavelength_pm(&self) -> u32 {
        self.0.qchannel_spec.wavelength_pm
    }

    #[getter]
    fn mean_photon_milli(&self) -> u32 {
        self.0.qchannel_spec.mean_photon_milli
    }

    #[getter]
    fn symbol_rate_hz(&self) -> u32 {
        self.0.qchannel_spec.symbol_rate_hz
    }

    #[getter]
    fn qcom(&self) -> u16 {
        self.0.qcom.0
    }

    /// Registry name such as `SDC`, or None for unregistered ids.
    #[getter]
    fn qcom_name(&self) -> Option<&'static str> {
        self.0.qcom.name()
    }

    #[getter]
    fn qcom_spec<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.qcom_spec.0)
    }

    #[getter]
    fn qec(&self) -> u16 {
        self.0.qec
    }

    /// `(n, k, d, verify_circuit_id)`.
    #[getter]
    fn qec_spec(&self) -> (u16, u16, u16, u16) {
        let s = self.0.qec_spec;
        (s.n, s.k, s.d, s.verify_circuit_id)
    }

    /// A copy with one field set from its textual value.
    fn with_field(&self, field: &str, value: &str) -> PyResult<Self> {
        let f: Field = field.parse().map_err(err)?;
        let v = f.parse_value(value).map_err(err)?;
        metadata::apply_field_update(&self.0, f, v)
            .map(PyRecord)
            .map_err(err)
    }

    /// Names of fields that differ from `other`.
    fn diff(&self, other: &PyRecord) -> Vec<&'static str> {
        metadata::diff_records(&self.0, &other.0)
            .into_iter()
            .map(Field::name)
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "QcmRecord(qchannel={}, qcom={}, qec={})",
            self.0.qchannel, self.0.qcom, self.0.qec
        )
    }
}

#[pyclass(name = "Multipart", module = "qcm_py", frozen)]
struct PyMultipart(wire::QcmMultipart);

#[pymethods]
impl PyMultipart {
    /// `"REQUEST"` or `"REPLY"`.
    #[getter]
    fn direction(&self) -> String {
        self.0.direction.to_string()
    }

    #[getter]
    fn xid(&self) -> u32 {
        self.0.xid
    }

    #[getter]
    fn flags(&self) -> u16 {
        self.0.flags
    }

    #[getter]
    fn more(&self) -> bool {
        self.0.more()
    }

    #[getter]
    fn records(&self) -> Vec<PyRecord> {
        self.0.records.iter().copied().map(PyRecord).collect()
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }
}

fn encode_all(segments: &[wire::QcmMultipart]) -> PyResult<Vec<Vec<u8>>> {
    segments
        .iter()
        .map(|m| wire::encode_multipart(m).map_err(err))
        .collect()
}

#[pyfunction]
fn encode_request(xid: u32) -> PyResult<Vec<u8>> {
    wire::encode_multipart(&wire::QcmMultipart::request(xid)).map_err(err)
}

/// Fragments `records` into as many reply frames as needed.
#[pyfunction]
fn encode_reply(records: Vec<PyRecord>, xid: u32) -> PyResult<Vec<Vec<u8>>> {
    let records: Vec<_> = records.into_iter().map(|r| r.0).collect();
    encode_all(&wire::fragment(&records, xid, Direction::Reply))
}

#[pyfunction]
#[pyo3(signature = (frame, strict = true))]
fn decode(frame: &[u8], strict: bool) -> PyResult<PyMultipart> {
    let mode = if strict {
        DecodeMode::Strict
    } else {
        DecodeMode::Lenient
    };
    wire::decode_multipart(frame, mode)
        .map(PyMultipart)
        .map_err(err)
}

/// Decodes a chain of frames and returns all of their records.
#[pyfunction]
fn reassemble(frames: Vec<Vec<u8>>) -> PyResult<Vec<PyRecord>> {
    let segments = frames
        .iter()
        .map(|f| wire::decode_multipart(f, DecodeMode::Strict))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let records = wire::reassemble(&segments).map_err(err)?;
    Ok(records.into_iter().map(PyRecord).collect())
}

#[pyfunction]
fn hex_dump(data: &[u8]) -> String {
    wire::to_hex_dump(data)
}

#[pyfunction]
fn parse_hex(text: &str) -> PyResult<Vec<u8>> {
    wire::parse_hex_dump(text).map_err(err)
}

#[pyclass(name = "Agent", module = "qcm_py")]
struct PyAgent(AgentState);

#[pymethods]
impl PyAgent {
    #[new]
    #[pyo3(signature = (device_id, async_enabled = true, record = None))]
    fn new(device_id: u32, async_enabled: bool, record: Option<PyRecord>) -> PyResult<Self> {
        let record = record.map(|r| r.0).unwrap_or_default();
        AgentState::with_record(device_id, record, async_enabled)
            .map(PyAgent)
            .map_err(err)
    }

    #[getter]
    fn device_id(&self) -> u32 {
        self.0.device_id
    }

    #[getter]
    fn record(&self) -> PyRecord {
        PyRecord(*self.0.local_record())
    }

    /// Answers an encoded request with encoded reply frames.
    fn handle_request(&mut self, frame: &[u8]) -> PyResult<Vec<Vec<u8>>> {
        self.0.handle_request_frame(frame).map_err(err)
    }

    /// Returns the encoded async update, or None when nothing is pushed.
    fn middleware_change(&mut self, record: PyRecord, now: f64) -> PyResult<Option<Vec<u8>>> {
        match self
            .0
            .on_middleware_change(record.0, time(now)?)
            .map_err(err)?
        {
            Some(m) => wire::encode_multipart(&m).map(Some).map_err(err),
            None => Ok(None),
        }
    }

    fn controller_change(&mut self, record: PyRecord, now: f64) -> PyResult<()> {
        self.0
            .apply_controller_change(record.0, time(now)?)
            .map_err(err)
    }
}

#[pyclass(name = "Controller", module = "qcm_py")]
struct PyController(ControllerView);

#[pymethods]
impl PyController {
    #[new]
    #[pyo3(signature = (devices, poll_period = 5.0))]
    fn new(devices: Vec<u32>, poll_period: f64) -> PyResult<Self> {
        Ok(PyController(ControllerView::new(
            devices,
            time(poll_period)?,
        )))
    }

    fn poll(&self, device_id: u32, xid: u32) -> PyResult<Vec<u8>> {
        let m = self.0.poll(device_id, xid).map_err(err)?;
        wire::encode_multipart(&m).map_err(err)
    }

    fn handle_reply(&mut self, device_id: u32, frames: Vec<Vec<u8>>, now: f64) -> PyResult<()> {
        let segments = frames
            .iter()
            .map(|f| wire::decode_multipart(f, DecodeMode::Strict))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        self.0
            .handle_reply(device_id, &segments, time(now)?)
            .map_err(err)
    }

    fn handle_async(&mut self, device_id: u32, frame: &[u8], now: f64) -> PyResult<()> {
        self.0
            .handle_async_frame(device_id, frame, time(now)?)
            .map_err(err)
    }

    fn query(&self, device_id: u32) -> Option<PyRecord> {
        self.0.query(device_id).copied().map(PyRecord)
    }
}

#[pyclass(name = "FlowTable", module = "qcm_py")]
struct PyFlowTable(QcmFlowTable);

#[pymethods]
impl PyFlowTable {
    #[new]
    fn new() -> Self {
        PyFlowTable(QcmFlowTable::new())
    }

    /// Actions are plain names. `None` match fields are wildcards.
    #[pyo3(signature = (entry_id, priority, actions, qchannel = None, qcom = None, qec = None))]
    fn install(
        &mut self,
        entry_id: u32,
        priority: u16,
        actions: Vec<String>,
        qchannel: Option<u16>,
        qcom: Option<&Bound<'_, PyAny>>,
        qec: Option<u16>,
    ) -> PyResult<()> {
        let entry = QcmFlowEntry {
            entry_id,
            priority,
            matcher: QcmMatch {
                qchannel,
                qcom: qcom.map(protocol).transpose()?,
                qec,
            },
            actions: actions.into_iter().map(Action::new).collect(),
        };
        self.0.install(entry).map_err(err)
    }

    fn remove(&mut self, entry_id: u32) -> bool {
        self.0.remove(entry_id).is_some()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn match_packet_in(&self, record: &PyRecord) -> Vec<String> {
        self.0
            .match_packet_in(&record.0)
            .iter()
            .map(|a| a.to_string())
            .collect()
    }
}

/// Runs a JSON scenario and returns the rendered trace.
#[pyfunction]
#[pyo3(signature = (scenario_json, mode = None))]
fn run_scenario(scenario_json: &str, mode: Option<&str>) -> PyResult<String> {
    let mut s = Scenario::from_json(scenario_json).map_err(err)?;
    if let Some(m) = mode {
        s.topology.trace_mode = m.parse::<TraceMode>().map_err(err)?;
    }
    sim::run(&s.topology, s.t_end, s.seed)
        .map(|t| t.render())
        .map_err(err)
}

#[pyfunction]
fn fig8_trace() -> String {
    let s = Scenario::fig8();
    sim::run(&s.topology, s.t_end, s.seed)
        .expect("bundled scenario is valid")
        .render()
}

#[pymodule]
fn qcm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QcmError", m.py().get_type::<QcmError>())?;
    m.add("FIG8_GOLDEN_TRACE", FIG8_GOLDEN_TRACE)?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PyMultipart>()?;
    m.add_class::<PyAgent>()?;
    m.add_class::<PyController>()?;
    m.add_class::<PyFlowTable>()?;
    m.add_function(wrap_pyfunction!(encode_request, m)?)?;
    m.add_function(wrap_pyfunction!(encode_reply, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(reassemble, m)?)?;
    m.add_function(wrap_pyfunction!(hex_dump, m)?)?;
    m.add_function(wrap_pyfunction!(parse_hex, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(fig8_trace, m)?)?;
    Ok(())
}
