//! The quantum communication metadata (QCM) record and its field-level
//! operations.
//!
//! A device publishes exactly one [`QcmRecord`]: three 16-bit identifiers
//! (channel, communication protocol, error-correction protocol), each paired
//! with a 16-byte parameter block. Identifier value 0 means "unassigned", and
//! an unassigned identifier must carry an all-zero parameter block.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Serialized size of every parameter block.
pub const SPEC_LEN: usize = 16;

/// Transmission/reception parameters of a quantum channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ChannelSpec {
    pub wavelength_pm: u32,
    /// Mean photon number in units of 10^-3.
    pub mean_photon_milli: u32,
    pub symbol_rate_hz: u32,
    /// Must be zero.
    pub reserved: u32,
}

impl ChannelSpec {
    pub fn is_zero(&self) -> bool {
        *self == ChannelSpec::default()
    }

    pub fn with_wavelength(wavelength_pm: u32) -> Self {
        ChannelSpec {
            wavelength_pm,
            ..Default::default()
        }
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "wavelength_pm={} mean_photon_milli={} symbol_rate_hz={}",
            self.wavelength_pm, self.mean_photon_milli, self.symbol_rate_hz
        )?;
        if self.reserved != 0 {
            write!(f, " reserved={}", self.reserved)?;
        }
        Ok(())
    }
}

impl FromStr for ChannelSpec {
    type Err = MetadataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut spec = ChannelSpec::default();
        for (key, value) in key_values(s)? {
            let v: u32 = parse_int(key, value)?;
            match key {
                "wavelength_pm" => spec.wavelength_pm = v,
                "mean_photon_milli" => spec.mean_photon_milli = v,
                "symbol_rate_hz" => spec.symbol_rate_hz = v,
                "reserved" => spec.reserved = v,
                _ => {
                    return Err(MetadataError::Parse(format!(
                        "unknown channel spec key `{key}`"
                    )))
                }
            }
        }
        Ok(spec)
    }
}

/// Error-correction code parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EcSpec {
    /// Code length.
    pub n: u16,
    /// Logical qubits.
    pub k: u16,
    /// Code distance.
    pub d: u16,
    pub verify_circuit_id: u16,
    /// Must be zero.
    pub reserved: [u8; 8],
}

impl EcSpec {
    pub fn new(n: u16, k: u16, d: u16, verify_circuit_id: u16) -> Self {
        EcSpec {
            n,
            k,
            d,
            verify_circuit_id,
            reserved: [0; 8],
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == EcSpec::default()
    }

    fn has_code_parameters(&self) -> bool {
        self.n != 0 || self.k != 0 || self.d != 0
    }
}

impl fmt::Display for EcSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} k={} d={} verify_circuit_id={}",
            self.n, self.k, self.d, self.verify_circuit_id
        )?;
        if self.reserved != [0; 8] {
            write!(f, " reserved={}", to_hex(&self.reserved))?;
        }
        Ok(())
    }
}

impl FromStr for EcSpec {
    type Err = MetadataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut spec = EcSpec::default();
        for (key, value) in key_values(s)? {
            match key {
                "n" => spec.n = parse_int(key, value)?,
                "k" => spec.k = parse_int(key, value)?,
                "d" => spec.d = parse_int(key, value)?,
                "verify_circuit_id" => spec.verify_circuit_id = parse_int(key, value)?,
                "reserved" => spec.reserved = from_hex::<8>(value)?,
                _ => return Err(MetadataError::Parse(format!("unknown ec spec key `{key}`"))),
            }
        }
        Ok(spec)
    }
}

/// Communication protocol identifier with a few registered names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ComProtocolId(pub u16);

impl ComProtocolId {
    pub const NONE: ComProtocolId = ComProtocolId(0);
    /// Quantum key distribution.
    pub const QKD: ComProtocolId = ComProtocolId(1);
    /// Quantum teleportation.
    pub const QT: ComProtocolId = ComProtocolId(2);
    /// Superdense coding.
    pub const SDC: ComProtocolId = ComProtocolId(3);

    pub fn name(self) -> Option<&'static str> {
        match self.0 {
            0 => Some("NONE"),
            1 => Some("QKD"),
            2 => Some("QT"),
            3 => Some("SDC"),
            _ => None,
        }
    }

    /// Long human-readable protocol name.
    pub fn description(self) -> String {
        match self.0 {
            0 => "None".to_string(),
            1 => "Quantum Key Distribution".to_string(),
            2 => "Quantum Teleportation".to_string(),
            3 => "Binary Dense Coding".to_string(),
            n => format!("Experimental Protocol {n}"),
        }
    }

    pub fn is_none(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for ComProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(name) => f.write_str(name),
            None => write!(f, "{}", self.0),
        }
    }
}

impl FromStr for ComProtocolId {
    type Err = MetadataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.to_ascii_uppercase().as_str() {
            "NONE" => Ok(Self::NONE),
            "QKD" => Ok(Self::QKD),
            "QT" => Ok(Self::QT),
            "SDC" => Ok(Self::SDC),
            _ => parse_int("qcom", s).map(ComProtocolId),
        }
    }
}

impl From<u16> for ComProtocolId {
    fn from(v: u16) -> Self {
        ComProtocolId(v)
    }
}

/// Opaque protocol parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ComSpec(pub [u8; SPEC_LEN]);

impl ComSpec {
    pub fn is_zero(&self) -> bool {
        self.0 == [0; SPEC_LEN]
    }
}

impl fmt::Display for ComSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_hex(&self.0))
    }
}

impl FromStr for ComSpec {
    type Err = MetadataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        from_hex::<SPEC_LEN>(s.trim()).map(ComSpec)
    }
}

/// One row of a device's QCM table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct QcmRecord {
    pub qchannel: u16,
    pub qchannel_spec: ChannelSpec,
    pub qcom: ComProtocolId,
    pub qcom_spec: ComSpec,
    pub qec: u16,
    pub qec_spec: EcSpec,
}

/// The six top-level fields of a [`QcmRecord`], in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Qchannel,
    QchannelSpec,
    Qcom,
    QcomSpec,
    Qec,
    QecSpec,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::Qchannel,
        Field::QchannelSpec,
        Field::Qcom,
        Field::QcomSpec,
        Field::Qec,
        Field::QecSpec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Qchannel => "qchannel",
            Field::QchannelSpec => "qchannel_spec",
            Field::Qcom => "qcom",
            Field::QcomSpec => "qcom_spec",
            Field::Qec => "qec",
            Field::QecSpec => "qec_spec",
        }
    }

    /// Upper-case label used in the textual record form.
    pub fn label(self) -> &'static str {
        match self {
            Field::Qchannel => "QCHANNEL",
            Field::QchannelSpec => "QCHANNEL_SPEC",
            Field::Qcom => "QCOM",
            Field::QcomSpec => "QCOM_SPEC",
            Field::Qec => "QEC",
            Field::QecSpec => "QEC_SPEC",
        }
    }

    /// Parses a value written in the textual record form.
    pub fn parse_value(self, s: &str) -> Result<FieldValue, MetadataError> {
        let s = s.trim();
        Ok(match self {
            Field::Qchannel => FieldValue::Qchannel(parse_int(self.name(), s)?),
            Field::QchannelSpec => FieldValue::QchannelSpec(s.parse()?),
            Field::Qcom => FieldValue::Qcom(s.parse()?),
            Field::QcomSpec => FieldValue::QcomSpec(s.parse()?),
            Field::Qec => FieldValue::Qec(parse_int(self.name(), s)?),
            Field::QecSpec => FieldValue::QecSpec(s.parse()?),
        })
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = MetadataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase().replace('-', "_");
        Field::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| MetadataError::UnknownField(s.to_string()))
    }
}

/// A typed value for one [`Field`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldValue {
    Qchannel(u16),
    QchannelSpec(ChannelSpec),
    Qcom(ComProtocolId),
    QcomSpec(ComSpec),
    Qec(u16),
    QecSpec(EcSpec),
}

impl FieldValue {
    pub fn field(&self) -> Field {
        match self {
            FieldValue::Qchannel(_) => Field::Qchannel,
            FieldValue::QchannelSpec(_) => Field::QchannelSpec,
            FieldValue::Qcom(_) => Field::Qcom,
            FieldValue::QcomSpec(_) => Field::QcomSpec,
            FieldValue::Qec(_) => Field::Qec,
            FieldValue::QecSpec(_) => Field::QecSpec,
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Qchannel(v) | FieldValue::Qec(v) => write!(f, "{v}"),
            FieldValue::QchannelSpec(v) => write!(f, "{v}"),
            FieldValue::Qcom(v) => write!(f, "{v}"),
            FieldValue::QcomSpec(v) => write!(f, "{v}"),
            FieldValue::QecSpec(v) => write!(f, "{v}"),
        }
    }
}

/// A single field assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldUpdate {
    pub field: Field,
    pub value: FieldValue,
}

impl FieldUpdate {
    pub fn new(value: FieldValue) -> Self {
        FieldUpdate {
            field: value.field(),
            value,
        }
    }
}

impl From<FieldValue> for FieldUpdate {
    fn from(value: FieldValue) -> Self {
        FieldUpdate::new(value)
    }
}

/// Which record invariant a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Identifier is 0 but its parameter block is not all-zero.
    SpecWithoutIdentifier,
    /// A reserved byte range is nonzero.
    ReservedNonzero,
    /// Error-correction identifier set while n, k and d are all zero.
    MissingCodeParameters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Violation {
    pub field: Field,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.rule {
            Rule::SpecWithoutIdentifier => "must be all-zero while its identifier is 0",
            Rule::ReservedNonzero => "has nonzero reserved bytes",
            Rule::MissingCodeParameters => "is set but qec_spec has n = k = d = 0",
        };
        write!(f, "{} {}", self.field, what)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetadataError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("value for {value} given to field {field}")]
    TypeMismatch { field: Field, value: Field },
    #[error("invalid record: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("parse error: {0}")]
    Parse(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// The all-zero record.
pub fn make_default_record() -> QcmRecord {
    QcmRecord::default()
}

/// Lists every invariant the record breaks; empty means valid.
pub fn validate_record(r: &QcmRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field, rule| out.push(Violation { field, rule });

    if r.qchannel_spec.reserved != 0 {
        push(Field::QchannelSpec, Rule::ReservedNonzero);
    }
    if r.qcom.is_none() && !r.qcom_spec.is_zero() {
        push(Field::QcomSpec, Rule::SpecWithoutIdentifier);
    }
    if r.qec_spec.reserved != [0; 8] {
        push(Field::QecSpec, Rule::ReservedNonzero);
    }
    if r.qec == 0 && !r.qec_spec.is_zero() {
        push(Field::QecSpec, Rule::SpecWithoutIdentifier);
    }
    if r.qec != 0 && !r.qec_spec.has_code_parameters() {
        push(Field::Qec, Rule::MissingCodeParameters);
    }
    out
}

/// Names of the top-level fields whose values differ.
pub fn diff_records(old: &QcmRecord, new: &QcmRecord) -> BTreeSet<Field> {
    Field::ALL
        .into_iter()
        .filter(|&f| old.get(f) != new.get(f))
        .collect()
}

/// Sets one field and checks the result still validates.
pub fn apply_field_update(
    r: &QcmRecord,
    field: Field,
    value: FieldValue,
) -> Result<QcmRecord, MetadataError> {
    apply_field_updates(r, &[FieldUpdate { field, value }])
}

/// Applies several assignments in order, validating only the final record.
///
/// Coupled changes such as switching the error-correction code need this:
/// setting `qec` and `qec_spec` one at a time passes through an invalid
/// intermediate record.
pub fn apply_field_updates(
    r: &QcmRecord,
    updates: &[FieldUpdate],
) -> Result<QcmRecord, MetadataError> {
    let mut next = *r;
    for u in updates {
        next.set(u.field, u.value)?;
    }
    let violations = validate_record(&next);
    if violations.is_empty() {
        Ok(next)
    } else {
        Err(MetadataError::Invalid(violations))
    }
}

impl QcmRecord {
    pub fn is_valid(&self) -> bool {
        validate_record(self).is_empty()
    }

    pub fn get(&self, field: Field) -> FieldValue {
        match field {
            Field::Qchannel => FieldValue::Qchannel(self.qchannel),
            Field::QchannelSpec => FieldValue::QchannelSpec(self.qchannel_spec),
            Field::Qcom => FieldValue::Qcom(self.qcom),
            Field::QcomSpec => FieldValue::QcomSpec(self.qcom_spec),
            Field::Qec => FieldValue::Qec(self.qec),
            Field::QecSpec => FieldValue::QecSpec(self.qec_spec),
        }
    }

    /// Unchecked assignment; only the value's type is verified.
    fn set(&mut self, field: Field, value: FieldValue) -> Result<(), MetadataError> {
        match (field, value) {
            (Field::Qchannel, FieldValue::Qchannel(v)) => self.qchannel = v,
            (Field::QchannelSpec, FieldValue::QchannelSpec(v)) => self.qchannel_spec = v,
            (Field::Qcom, FieldValue::Qcom(v)) => self.qcom = v,
            (Field::QcomSpec, FieldValue::QcomSpec(v)) => self.qcom_spec = v,
            (Field::Qec, FieldValue::Qec(v)) => self.qec = v,
            (Field::QecSpec, FieldValue::QecSpec(v)) => self.qec_spec = v,
            (field, value) => {
                return Err(MetadataError::TypeMismatch {
                    field,
                    value: value.field(),
                })
            }
        }
        Ok(())
    }

    /// Textual form: one `LABEL: value` line per field, table order, each
    /// line newline-terminated.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Parses the textual form. Every field must appear exactly once; blank
    /// lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<QcmRecord, MetadataError> {
        let mut seen = BTreeSet::new();
        let mut updates = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, value) = line.split_once(':').ok_or_else(|| {
                MetadataError::Parse(format!("expected `FIELD: value`, got `{line}`"))
            })?;
            let field: Field = label.parse()?;
            if !seen.insert(field) {
                return Err(MetadataError::Parse(format!(
                    "field {} given twice",
                    field.label()
                )));
            }
            updates.push(FieldUpdate {
                field,
                value: field.parse_value(value)?,
            });
        }
        if let Some(missing) = Field::ALL.into_iter().find(|f| !seen.contains(f)) {
            return Err(MetadataError::Parse(format!(
                "missing field {}",
                missing.label()
            )));
        }
        apply_field_updates(&QcmRecord::default(), &updates)
    }
}

impl fmt::Display for QcmRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for field in Field::ALL {
            writeln!(f, "{}: {}", field.label(), self.get(field))?;
        }
        Ok(())
    }
}

impl FromStr for QcmRecord {
    type Err = MetadataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QcmRecord::from_text(s)
    }
}

fn key_values(s: &str) -> Result<Vec<(&str, &str)>, MetadataError> {
    s.split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| MetadataError::Parse(format!("expected key=value, got `{kv}`")))
        })
        .collect()
}

fn parse_int<T: FromStr>(what: &str, s: &str) -> Result<T, MetadataError> {
    s.trim()
        .parse()
        .map_err(|_| MetadataError::Parse(format!("bad integer `{s}` for {what}")))
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn from_hex<const N: usize>(s: &str) -> Result<[u8; N], MetadataError> {
    if s.len() != 2 * N || !s.is_ascii() {
        return Err(MetadataError::Parse(format!(
            "expected {} hex digits, got `{s}`",
            2 * N
        )));
    }
    let mut out = [0u8; N];
    for (i, byte) in out.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
            .map_err(|_| MetadataError::Parse(format!("bad hex `{s}`")))?;
    }
    Ok(out)
}
