//! Reference walkthroughs: a classical and an entangled query on two address
//! bits, with every intermediate state written out as kets.
//!
//! Kets are written in the trace notation parsed by `notation`. The flag
//! walker D0 follows the data walker until the copy, then stays Red.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::memory::MemoryBank;
use crate::notation::parse_state;
use crate::protocol::{run_query, Granularity, ProtocolConfig};
use crate::walker::{Bits, DecodedTerm, QState, QueryTerm, NORM_TOLERANCE};

/// One expected snapshot of a walkthrough.
#[derive(Clone, Debug)]
pub struct GoldenStep {
    pub label: &'static str,
    pub state: QState,
}

#[derive(Clone, Debug)]
pub struct GoldenCase {
    pub name: &'static str,
    pub config: ProtocolConfig,
    pub bank: MemoryBank,
    pub query: Vec<QueryTerm>,
    /// Input first, then one entry per gate.
    pub steps: Vec<GoldenStep>,
    pub output: Vec<DecodedTerm>,
}

const LABELS: [&str; 10] = ["ψ_in", "ψ1", "ψ2", "ψ3", "ψ4", "ψQ", "ψ5", "ψ6", "ψ7", "ψ_out"];

fn bits(s: &str) -> Bits {
    s.parse().expect("literal bit string")
}

fn build(
    name: &'static str,
    bank: MemoryBank,
    query: Vec<QueryTerm>,
    kets: [&[(&str, Complex64)]; 10],
    output: Vec<DecodedTerm>,
) -> Result<GoldenCase> {
    let config = ProtocolConfig::standard(2, 1)?;
    let layout = config.layout()?;
    let steps = LABELS
        .iter()
        .zip(kets)
        .map(|(&label, k)| Ok(GoldenStep { label, state: parse_state(k, &layout)? }))
        .collect::<Result<_>>()?;
    Ok(GoldenCase { name, config, bank, query, steps, output })
}

/// Classical address `10` with `1` stored at cell `10`.
pub fn classical_case() -> Result<GoldenCase> {
    let one = Complex64::new(1.0, 0.0);
    let bank = MemoryBank::from_fn(2, 1, |a| bits(if a == 2 { "1" } else { "0" }))?;
    build(
        "classical",
        bank,
        vec![QueryTerm::classical(bits("10"))],
        [
            &[("R@(1,1)·D1 ⊗ R@(1,1)·D0 ⊗ ∅@1·A2 ⊗ R@(1,1)·A1", one)],
            &[("B@(1,1)·D1 ⊗ B@(1,1)·D0 ⊗ ∅@1·A2 ⊗ R@(1,1)·A1", one)],
            &[("R@(2,2)·D1 ⊗ R@(2,2)·D0 ⊗ ∅@2·A2 ⊗ R@(2,1)·A1", one)],
            &[("R@(2,2)·D1 ⊗ R@(2,2)·D0 ⊗ ∅@2·A2 ⊗ R@(2,1)·A1", one)],
            &[("R@(3,3)·D1 ⊗ R@(3,3)·D0 ⊗ ∅@3·A2 ⊗ R@(3,1)·A1", one)],
            &[("R@(3′,3)·D1 ⊗ R@(3′,3)·D0 ⊗ ∅@3′·A2 ⊗ R@(3′,1)·A1", one)],
            &[("R@(2′,2)·D1 ⊗ R@(2′,2)·D0 ⊗ ∅@2′·A2 ⊗ R@(2′,1)·A1", one)],
            &[("R@(2′,2)·D1 ⊗ R@(2′,2)·D0 ⊗ ∅@2′·A2 ⊗ R@(2′,1)·A1", one)],
            &[("B@(1′,1)·D1 ⊗ B@(1′,1)·D0 ⊗ ∅@1′·A2 ⊗ R@(1′,1)·A1", one)],
            &[("R@(1′,1)·D1 ⊗ R@(1′,1)·D0 ⊗ ∅@1′·A2 ⊗ R@(1′,1)·A1", one)],
        ],
        vec![DecodedTerm { address: bits("10"), message: bits("1"), amplitude: one }],
    )
}

/// `(|00⟩ + |11⟩)/√2` with `1` stored at cell `00` and `0` at cell `11`.
pub fn entangled_case() -> Result<GoldenCase> {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let bank = MemoryBank::from_fn(2, 1, |a| bits(if a == 0 { "1" } else { "0" }))?;
    build(
        "entangled",
        bank,
        vec![QueryTerm::new(bits("00"), h), QueryTerm::new(bits("11"), h)],
        [
            &[
                ("R@(1,1)·D1 ⊗ R@(1,1)·D0 ⊗ ∅@1·A2 ⊗ ∅@1·A1", h),
                ("R@(1,1)·D1 ⊗ R@(1,1)·D0 ⊗ R@(1,1)·A2 ⊗ R@(1,1)·A1", h),
            ],
            &[
                ("R@(1,1)·D1 ⊗ R@(1,1)·D0 ⊗ ∅@1·A2 ⊗ ∅@1·A1", h),
                ("B@(1,1)·D1 ⊗ B@(1,1)·D0 ⊗ B@(1,1)·A2 ⊗ R@(1,1)·A1", h),
            ],
            &[
                ("R@(2,1)·D1 ⊗ R@(2,1)·D0 ⊗ ∅@2·A2 ⊗ ∅@2·A1", h),
                ("R@(2,2)·D1 ⊗ R@(2,2)·D0 ⊗ R@(2,2)·A2 ⊗ R@(2,1)·A1", h),
            ],
            &[
                ("R@(2,1)·D1 ⊗ R@(2,1)·D0 ⊗ ∅@2·A2 ⊗ ∅@2·A1", h),
                ("B@(2,2)·D1 ⊗ B@(2,2)·D0 ⊗ R@(2,2)·A2 ⊗ R@(2,1)·A1", h),
            ],
            &[
                ("R@(3,1)·D1 ⊗ R@(3,1)·D0 ⊗ ∅@3·A2 ⊗ ∅@3·A1", h),
                ("R@(3,4)·D1 ⊗ R@(3,4)·D0 ⊗ R@(3,3)·A2 ⊗ R@(3,1)·A1", h),
            ],
            &[
                ("R@(3′,1)·D1 ⊗ R@(3′,1)·D0 ⊗ ∅@3′·A2 ⊗ ∅@3′·A1", h),
                ("∅@3′·D1 ⊗ R@(3′,4)·D0 ⊗ R@(3′,3)·A2 ⊗ R@(3′,1)·A1", h),
            ],
            &[
                ("R@(2′,1)·D1 ⊗ R@(2′,1)·D0 ⊗ ∅@2′·A2 ⊗ ∅@2′·A1", h),
                ("∅@2′·D1 ⊗ B@(2′,2)·D0 ⊗ R@(2′,2)·A2 ⊗ R@(2′,1)·A1", h),
            ],
            &[
                ("R@(2′,1)·D1 ⊗ R@(2′,1)·D0 ⊗ ∅@2′·A2 ⊗ ∅@2′·A1", h),
                ("∅@2′·D1 ⊗ R@(2′,2)·D0 ⊗ R@(2′,2)·A2 ⊗ R@(2′,1)·A1", h),
            ],
            &[
                ("R@(1′,1)·D1 ⊗ R@(1′,1)·D0 ⊗ ∅@1′·A2 ⊗ ∅@1′·A1", h),
                ("∅@1′·D1 ⊗ B@(1′,1)·D0 ⊗ B@(1′,1)·A2 ⊗ R@(1′,1)·A1", h),
            ],
            &[
                ("R@(1′,1)·D1 ⊗ R@(1′,1)·D0 ⊗ ∅@1′·A2 ⊗ ∅@1′·A1", h),
                ("∅@1′·D1 ⊗ R@(1′,1)·D0 ⊗ R@(1′,1)·A2 ⊗ R@(1′,1)·A1", h),
            ],
        ],
        vec![
            DecodedTerm { address: bits("00"), message: bits("1"), amplitude: h },
            DecodedTerm { address: bits("11"), message: bits("0"), amplitude: h },
        ],
    )
}

pub fn cases() -> Result<Vec<GoldenCase>> {
    Ok(vec![classical_case()?, entangled_case()?])
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct StepDiff {
    pub label: &'static str,
    /// Expected kets absent from the computed state.
    pub missing: Vec<String>,
    /// Computed kets that were not expected.
    pub unexpected: Vec<String>,
    pub max_deviation: f64,
}

impl StepDiff {
    pub fn matches(&self) -> bool {
        self.missing.is_empty() && self.unexpected.is_empty() && self.max_deviation <= NORM_TOLERANCE
    }
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct GoldenReport {
    pub case: &'static str,
    pub steps: Vec<StepDiff>,
    pub output_matches: bool,
    pub output_deviation: f64,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.output_matches && self.steps.iter().all(StepDiff::matches)
    }
}

/// Run a walkthrough with per-gate snapshots and diff every state.
pub fn check_golden(case: &GoldenCase) -> Result<GoldenReport> {
    let config = case.config.with_snapshots(Granularity::Gate);
    let layout = config.layout()?;
    let outcome = run_query(&config, &case.bank, &case.query)?;
    let mut steps = Vec::new();
    for (i, expected) in case.steps.iter().enumerate() {
        let actual = outcome.trace.steps.get(i).and_then(|s| s.snapshot.as_base());
        let empty = QState::from_terms(Vec::new())?;
        let actual = actual.unwrap_or(&empty);
        steps.push(StepDiff {
            label: expected.label,
            missing: expected
                .state
                .keys()
                .filter(|k| actual.amplitude(k) == Complex64::default())
                .map(|k| k.render(&layout))
                .collect(),
            unexpected: actual
                .keys()
                .filter(|k| expected.state.amplitude(k) == Complex64::default())
                .map(|k| k.render(&layout))
                .collect(),
            max_deviation: expected.state.max_deviation(actual),
        });
    }
    if outcome.trace.steps.len() != case.steps.len() {
        steps.push(StepDiff {
            label: "step count",
            missing: vec![format!("{} snapshots expected", case.steps.len())],
            unexpected: vec![format!("{} snapshots recorded", outcome.trace.steps.len())],
            max_deviation: f64::INFINITY,
        });
    }
    let same_terms = outcome.output.len() == case.output.len()
        && outcome.output.iter().zip(&case.output).all(|(a, b)| a.address == b.address && a.message == b.message);
    let output_deviation = if same_terms {
        outcome.output.iter().zip(&case.output).map(|(a, b)| (a.amplitude - b.amplitude).norm()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(GoldenReport {
        case: case.name,
        steps,
        output_matches: same_terms && output_deviation <= NORM_TOLERANCE,
        output_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_walkthroughs_match() {
        for case in cases().unwrap() {
            let report = check_golden(&case).unwrap();
            assert!(report.passed(), "{report:#?}");
        }
    }
}
