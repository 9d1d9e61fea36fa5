//! JSON documents exchanged with the command line: queries, decoded
//! outputs, traces and resource ledgers. Bank documents live in `memory`.
//!
//! All documents reject unknown fields. Real numbers are written as strings
//! with 17 significant digits so they read back to the same `f64`; query
//! documents also accept plain JSON numbers.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::encodings::QuditQState;
use crate::error::{QramError, Result};
use crate::gates::GateDescriptor;
use crate::memory::{BankDocument, MemoryBank};
use crate::notation::{parse_config, parse_qudit_config};
use crate::protocol::{Encoding, ProtocolConfig, QueryOutcome, Snapshot, Stage, Trace, TraceStep};
use crate::resources::ResourceLedger;
use crate::walker::{Bits, QState, QueryTerm};

/// Identifies the trace layout; bumped on incompatible changes.
pub const TRACE_FORMAT: &str = "walker-qram-trace/1";

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:.16e}", self.0))
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        let value = match Raw::deserialize(d)? {
            Raw::Number(x) => x,
            Raw::Text(s) => s.trim().parse().map_err(serde::de::Error::custom)?,
        };
        if !value.is_finite() {
            return Err(serde::de::Error::custom("amplitudes must be finite"));
        }
        Ok(Real(value))
    }
}

fn split(z: Complex64) -> (Real, Real) {
    (Real(z.re), Real(z.im))
}

fn join(re: Real, im: Real) -> Complex64 {
    Complex64::new(re.0, im.0)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize infallibly");
    text.push('\n');
    text
}

pub fn from_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| QramError::Validation(format!("{what} document: {e}")))
}

/// Write through a sibling temporary file and rename, so readers never see
/// a partial document.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path.file_name().ok_or_else(|| QramError::Io(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents).map_err(|e| QramError::Io(format!("writing {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        QramError::Io(format!("renaming onto {}: {e}", path.display()))
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| QramError::Io(format!("reading {}: {e}", path.display())))
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryTermDocument {
    pub address: String,
    pub re: Real,
    pub im: Real,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryDocument {
    pub n: u8,
    pub terms: Vec<QueryTermDocument>,
}

pub fn load_query(text: &str) -> Result<Vec<QueryTerm>> {
    let doc: QueryDocument = from_json(text, "query")?;
    if doc.terms.is_empty() {
        return Err(QramError::Validation("query document has no terms".into()));
    }
    doc.terms
        .iter()
        .map(|t| {
            let address: Bits = t.address.parse()?;
            if address.len() != doc.n {
                return Err(QramError::Validation(format!(
                    "query address '{}' has {} bits, document declares n = {}",
                    t.address,
                    address.len(),
                    doc.n
                )));
            }
            Ok(QueryTerm::new(address, join(t.re, t.im)))
        })
        .collect()
}

pub fn store_query(n: u8, terms: &[QueryTerm]) -> String {
    let terms = terms
        .iter()
        .map(|t| {
            let (re, im) = split(t.amplitude);
            QueryTermDocument { address: t.address.to_string(), re, im }
        })
        .collect();
    to_json(&QueryDocument { n, terms })
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputTermDocument {
    pub address: String,
    pub message: String,
    pub re: Real,
    pub im: Real,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDocument {
    pub config: ProtocolConfig,
    pub bank_checksum: String,
    pub terms: Vec<OutputTermDocument>,
}

impl OutputDocument {
    pub fn new(outcome: &QueryOutcome) -> Self {
        let terms = outcome
            .output
            .iter()
            .map(|t| {
                let (re, im) = split(t.amplitude);
                OutputTermDocument { address: t.address.to_string(), message: t.message.to_string(), re, im }
            })
            .collect();
        Self { config: outcome.trace.config, bank_checksum: format!("{:016x}", outcome.trace.bank.checksum()), terms }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDocument {
    pub ket: String,
    pub re: Real,
    pub im: Real,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDocument {
    pub index: usize,
    pub stage: Stage,
    pub level: Option<u8>,
    /// Gates applied since the previous step, in order.
    pub gates: Vec<GateDescriptor>,
    /// The same gates in trace notation, for reading.
    pub gate_names: Vec<String>,
    pub components: Vec<ComponentDocument>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDocument {
    pub format: String,
    pub config: ProtocolConfig,
    pub bank: BankDocument,
    pub steps: Vec<StepDocument>,
}

impl TraceDocument {
    pub fn new(trace: &Trace) -> Result<Self> {
        let layout = trace.config.layout()?;
        let steps = trace
            .steps
            .iter()
            .enumerate()
            .map(|(index, step)| StepDocument {
                index,
                stage: step.stage,
                level: step.level,
                gates: step.gates.clone(),
                gate_names: step.gates.iter().map(|g| g.to_string()).collect(),
                components: step
                    .snapshot
                    .render(&layout)
                    .into_iter()
                    .map(|(ket, amp)| {
                        let (re, im) = split(amp);
                        ComponentDocument { ket, re, im }
                    })
                    .collect(),
            })
            .collect();
        Ok(Self { format: TRACE_FORMAT.to_string(), config: trace.config, bank: trace.bank.to_document(), steps })
    }

    /// Rebuild the in-memory trace, parsing every recorded snapshot.
    pub fn to_trace(&self) -> Result<Trace> {
        if self.format != TRACE_FORMAT {
            return Err(QramError::Validation(format!(
                "trace format '{}' is not supported (expected '{TRACE_FORMAT}')",
                self.format
            )));
        }
        self.config.validate()?;
        let layout = self.config.layout()?;
        let bank = MemoryBank::from_document(&self.bank)?;
        if self.steps.is_empty() {
            return Err(QramError::Validation("trace has no steps".into()));
        }
        let mut steps = Vec::with_capacity(self.steps.len());
        for (i, step) in self.steps.iter().enumerate() {
            if step.index != i {
                return Err(QramError::Validation(format!("trace step {i} is labelled {}", step.index)));
            }
            let names: Vec<String> = step.gates.iter().map(|g| g.to_string()).collect();
            if names != step.gate_names {
                return Err(QramError::Validation(format!(
                    "trace step {i}: gate names {:?} do not match gates {names:?}",
                    step.gate_names
                )));
            }
            let terms = step.components.iter().map(|c| (c.ket.as_str(), join(c.re, c.im)));
            let snapshot = match self.config.encoding {
                Encoding::Base => Snapshot::Base(QState::from_terms(
                    terms.map(|(k, a)| Ok((parse_config(k, &layout)?, a))).collect::<Result<Vec<_>>>()?,
                )?),
                Encoding::Qudit | Encoding::DualRail => {
                    let dual = self.config.encoding == Encoding::DualRail;
                    let state = QuditQState::from_terms(
                        terms
                            .map(|(k, a)| Ok((parse_qudit_config(k, &layout, dual)?, a)))
                            .collect::<Result<Vec<_>>>()?,
                    )?;
                    if dual {
                        Snapshot::DualRail(state)
                    } else {
                        Snapshot::Qudit(state)
                    }
                }
            };
            steps.push(TraceStep { stage: step.stage, level: step.level, gates: step.gates.clone(), snapshot });
        }
        Ok(Trace { config: self.config, bank, steps })
    }
}

pub fn store_trace(trace: &Trace) -> Result<String> {
    Ok(to_json(&TraceDocument::new(trace)?))
}

pub fn load_trace(text: &str) -> Result<Trace> {
    from_json::<TraceDocument>(text, "trace")?.to_trace()
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerDocument {
    pub config: ProtocolConfig,
    pub ledger: ResourceLedger,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden;
    use crate::protocol::{run_query, Granularity};

    #[test]
    fn real_keeps_every_bit() {
        for x in [std::f64::consts::FRAC_1_SQRT_2, 1.0, -0.0, 1e-300, 0.1 + 0.2] {
            let text = serde_json::to_string(&Real(x)).unwrap();
            let back: Real = serde_json::from_str(&text).unwrap();
            assert_eq!(back.0.to_bits(), x.to_bits(), "{text}");
        }
        assert_eq!(serde_json::to_string(&Real(1.0)).unwrap(), "\"1.0000000000000000e0\"");
        assert_eq!(serde_json::from_str::<Real>("0.5").unwrap(), Real(0.5));
        assert!(serde_json::from_str::<Real>("\"NaN\"").is_err());
    }

    #[test]
    fn query_documents_round_trip() {
        let case = golden::entangled_case().unwrap();
        let text = store_query(2, &case.query);
        assert_eq!(load_query(&text).unwrap(), case.query);
        let plain = r#"{"n": 2, "terms": [{"address": "10", "re": 1, "im": 0}]}"#;
        assert_eq!(load_query(plain).unwrap(), vec![QueryTerm::classical("10".parse().unwrap())]);
        for bad in [
            r#"{"n": 3, "terms": [{"address": "10", "re": 1, "im": 0}]}"#,
            r#"{"n": 2, "terms": []}"#,
            r#"{"n": 2, "terms": [{"address": "10", "re": 1, "im": 0, "phase": 0}]}"#,
            r#"{"n": 2, "terms": [{"address": "1x", "re": 1, "im": 0}]}"#,
        ] {
            assert!(load_query(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn traces_round_trip_in_every_encoding() {
        let case = golden::classical_case().unwrap();
        for encoding in [Encoding::Base, Encoding::Qudit, Encoding::DualRail] {
            for g in [Granularity::Gate, Granularity::Level, Granularity::Stage] {
                let config = case.config.with_encoding(encoding).unwrap().with_snapshots(g);
                let trace = run_query(&config, &case.bank, &case.query).unwrap().trace;
                let text = store_trace(&trace).unwrap();
                let back = load_trace(&text).unwrap();
                assert_eq!(back, trace);
                assert_eq!(store_trace(&back).unwrap(), text);
                assert!(back.replay().unwrap().is_empty());
            }
        }
    }

    #[test]
    fn tampered_trace_is_rejected_or_detected() {
        let case = golden::classical_case().unwrap();
        let trace = run_query(&case.config, &case.bank, &case.query).unwrap().trace;
        let mut doc = TraceDocument::new(&trace).unwrap();
        doc.steps[3].components[0].ket = doc.steps[3].components[0].ket.replacen('R', "B", 1);
        let tampered = doc.to_trace().unwrap();
        assert_eq!(tampered.replay().unwrap(), vec![3]);
        doc.steps[2].gate_names[0] = "U(9)".into();
        assert!(doc.to_trace().is_err());
    }
}
