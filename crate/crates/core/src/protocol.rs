//! Full queries: encode, route to the cells, copy, route back, decode.
//!
//! A query is a fixed gate schedule applied to the encoded address
//! superposition. The external clock is abstracted into synchronous level
//! steps: at each level every walker sees one level gate (or its backup
//! chain) and one scatter. The return path runs the levels in reverse, each
//! as an inverse scatter followed by the level gate.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::encodings::{self, QuditQState};
use crate::error::{QramError, Result};
use crate::gates::{self, block_targets, level_backup_gates, Direction, GateDescriptor};
use crate::memory::MemoryBank;
use crate::walker::{
    decode_output, encode_query, BasisConfig, Bits, DecodedTerm, InternalState, QState, QueryTerm, RegisterLayout,
    SubsystemId, Variant,
};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CopyMode {
    /// One copy gate controlled by the flag walker.
    Global,
    /// Flag arms the cell switch, a writer copies, a terminator disarms.
    Switch,
    /// Each data walker is written under control of the preceding backup.
    BackupControlled,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    Base,
    Qudit,
    DualRail,
}

/// How often the trace records a snapshot.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    Gate,
    Level,
    Stage,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n: u8,
    pub m: u8,
    pub variant: Variant,
    pub copy_mode: CopyMode,
    pub encoding: Encoding,
    pub snapshots: Granularity,
}

impl ProtocolConfig {
    pub fn new(n: u8, m: u8, variant: Variant, copy_mode: CopyMode) -> Result<Self> {
        let config = Self { n, m, variant, copy_mode, encoding: Encoding::Base, snapshots: Granularity::Gate };
        config.validate()?;
        Ok(config)
    }

    pub fn standard(n: u8, m: u8) -> Result<Self> {
        Self::new(n, m, Variant::Standard, CopyMode::Global)
    }

    pub fn switch(n: u8, m: u8) -> Result<Self> {
        Self::new(n, m, Variant::Standard, CopyMode::Switch)
    }

    pub fn backup(n: u8, m: u8) -> Result<Self> {
        Self::new(n, m, Variant::Backup, CopyMode::BackupControlled)
    }

    /// Every supported (variant, copy mode) pair in the base encoding.
    pub fn all_modes(n: u8, m: u8) -> Result<Vec<Self>> {
        Ok(vec![Self::standard(n, m)?, Self::switch(n, m)?, Self::backup(n, m)?])
    }

    pub fn with_encoding(mut self, encoding: Encoding) -> Result<Self> {
        self.encoding = encoding;
        self.validate()?;
        Ok(self)
    }

    pub fn with_snapshots(mut self, snapshots: Granularity) -> Self {
        self.snapshots = snapshots;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.layout()?;
        match (self.variant, self.copy_mode) {
            (Variant::Standard, CopyMode::Global | CopyMode::Switch) => {}
            (Variant::Backup, CopyMode::BackupControlled) => {}
            (variant, mode) => {
                return Err(QramError::Configuration(format!(
                    "copy mode {mode:?} is not available in the {variant:?} variant"
                )))
            }
        }
        if self.encoding != Encoding::Base && self.variant != Variant::Standard {
            return Err(QramError::Configuration(format!(
                "{:?} encoding is defined for the standard variant only",
                self.encoding
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<RegisterLayout> {
        RegisterLayout::new(self.n, self.m, self.variant, self.copy_mode == CopyMode::Switch)
    }

    pub fn cells(&self) -> u64 {
        1u64 << self.n
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Input,
    Routing,
    Copy,
    InverseRouting,
}

/// One entry of the gate schedule.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ScheduledGate {
    pub stage: Stage,
    pub level: Option<u8>,
    pub gate: GateDescriptor,
}

fn level_gates(config: &ProtocolConfig, layout: &RegisterLayout, d: u8, direction: Direction) -> Vec<GateDescriptor> {
    match config.variant {
        Variant::Standard => vec![GateDescriptor::ULevel { level: d, direction }],
        Variant::Backup => level_backup_gates(layout, d, direction),
    }
}

/// The complete gate sequence of one query.
pub fn schedule(config: &ProtocolConfig) -> Result<Vec<ScheduledGate>> {
    config.validate()?;
    let layout = config.layout()?;
    let mut out = Vec::new();
    let mut push = |stage, level, gate| out.push(ScheduledGate { stage, level, gate });
    for d in 1..=config.n {
        for g in level_gates(config, &layout, d, Direction::Forward) {
            push(Stage::Routing, Some(d), g);
        }
        push(Stage::Routing, Some(d), GateDescriptor::Scatter { depth: d });
    }
    match config.copy_mode {
        CopyMode::Global => push(Stage::Copy, None, GateDescriptor::CopyGlobal),
        CopyMode::Switch => {
            push(Stage::Copy, None, GateDescriptor::SwitchToggle { trigger: SubsystemId::Data(0) });
            push(Stage::Copy, None, GateDescriptor::CopySwitch);
            push(Stage::Copy, None, GateDescriptor::SwitchToggle { trigger: SubsystemId::Data(config.m + 1) });
        }
        CopyMode::BackupControlled => push(Stage::Copy, None, GateDescriptor::CopyBackup),
    }
    for d in (1..=config.n).rev() {
        push(Stage::InverseRouting, Some(d), GateDescriptor::ScatterInverse { depth: d + 1 });
        for g in level_gates(config, &layout, d, Direction::Backward) {
            push(Stage::InverseRouting, Some(d), g);
        }
    }
    Ok(out)
}

/// A state in whichever encoding the query runs in.
#[derive(Clone, PartialEq, Debug)]
pub enum Snapshot {
    Base(QState),
    Qudit(QuditQState),
    DualRail(QuditQState),
}

impl Snapshot {
    pub fn encode(state: QState, encoding: Encoding, layout: &RegisterLayout) -> Result<Self> {
        Ok(match encoding {
            Encoding::Base => Snapshot::Base(state),
            Encoding::Qudit => Snapshot::Qudit(encodings::to_qudit_state(&state, layout)?),
            Encoding::DualRail => Snapshot::DualRail(encodings::to_qudit_state(&state, layout)?),
        })
    }

    pub fn encoding(&self) -> Encoding {
        match self {
            Snapshot::Base(_) => Encoding::Base,
            Snapshot::Qudit(_) => Encoding::Qudit,
            Snapshot::DualRail(_) => Encoding::DualRail,
        }
    }

    pub fn apply(&self, gate: &GateDescriptor, layout: &RegisterLayout, bank: &MemoryBank) -> Result<Self> {
        Ok(match self {
            Snapshot::Base(s) => Snapshot::Base(gates::apply_gate(s, layout, bank, gate)?),
            Snapshot::Qudit(s) => Snapshot::Qudit(encodings::apply_qudit_gate(s, layout, bank, gate)?),
            Snapshot::DualRail(s) => Snapshot::DualRail(encodings::apply_qudit_gate(s, layout, bank, gate)?),
        })
    }

    pub fn to_base(&self, layout: &RegisterLayout) -> Result<QState> {
        match self {
            Snapshot::Base(s) => Ok(s.clone()),
            Snapshot::Qudit(s) | Snapshot::DualRail(s) => encodings::from_qudit_state(s, layout),
        }
    }

    pub fn as_base(&self) -> Option<&QState> {
        match self {
            Snapshot::Base(s) => Some(s),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Snapshot::Base(s) => s.len(),
            Snapshot::Qudit(s) | Snapshot::DualRail(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn norm(&self) -> f64 {
        match self {
            Snapshot::Base(s) => s.norm(),
            Snapshot::Qudit(s) | Snapshot::DualRail(s) => s.norm(),
        }
    }

    /// Components as rendered kets with their amplitudes, in key order.
    pub fn render(&self, layout: &RegisterLayout) -> Vec<(String, Complex64)> {
        match self {
            Snapshot::Base(s) => s.iter().map(|(c, a)| (c.render(layout), *a)).collect(),
            Snapshot::Qudit(s) => s.iter().map(|(c, a)| (c.render(layout, false), *a)).collect(),
            Snapshot::DualRail(s) => s.iter().map(|(c, a)| (c.render(layout, true), *a)).collect(),
        }
    }
}

/// A snapshot together with the gates applied since the previous one.
#[derive(Clone, PartialEq, Debug)]
pub struct TraceStep {
    pub stage: Stage,
    pub level: Option<u8>,
    pub gates: Vec<GateDescriptor>,
    pub snapshot: Snapshot,
}

#[derive(Clone, PartialEq, Debug)]
pub struct Trace {
    pub config: ProtocolConfig,
    pub bank: MemoryBank,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn input(&self) -> &Snapshot {
        &self.steps[0].snapshot
    }

    pub fn output(&self) -> &Snapshot {
        &self.steps.last().expect("trace has an input step").snapshot
    }

    pub fn gates(&self) -> impl Iterator<Item = &GateDescriptor> {
        self.steps.iter().flat_map(|s| s.gates.iter())
    }

    /// Walk every gate with the states right before and after it. Recorded
    /// snapshots are reused where they exist; states between them are
    /// recomputed from the preceding snapshot.
    pub fn visit_gates<F>(&self, mut f: F) -> Result<()>
    where
        F: FnMut(&TraceStep, &GateDescriptor, &Snapshot, &Snapshot) -> Result<()>,
    {
        let layout = self.config.layout()?;
        let mut before = self.input().clone();
        for step in &self.steps[1..] {
            for (k, gate) in step.gates.iter().enumerate() {
                let after = if k + 1 == step.gates.len() {
                    step.snapshot.clone()
                } else {
                    before.apply(gate, &layout, &self.bank)?
                };
                f(step, gate, &before, &after)?;
                before = after;
            }
        }
        Ok(())
    }

    /// Re-apply the recorded gates from the input and return the indices of
    /// steps whose recorded snapshot differs from the recomputed one.
    pub fn replay(&self) -> Result<Vec<usize>> {
        let layout = self.config.layout()?;
        let mut current = self.input().clone();
        let mut mismatches = Vec::new();
        for (i, step) in self.steps.iter().enumerate().skip(1) {
            for gate in &step.gates {
                current = current.apply(gate, &layout, &self.bank)?;
            }
            if current != step.snapshot {
                mismatches.push(i);
            }
        }
        Ok(mismatches)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct QueryOutcome {
    pub output: Vec<DecodedTerm>,
    pub trace: Trace,
}

fn require_bank_shape(config: &ProtocolConfig, bank: &MemoryBank) -> Result<()> {
    if bank.n() != config.n || bank.m() != config.m {
        return Err(QramError::Configuration(format!(
            "bank has n={}, m={} but the query is configured for n={}, m={}",
            bank.n(),
            bank.m(),
            config.n,
            config.m
        )));
    }
    Ok(())
}

/// Run a complete query and return the decoded output with its trace.
pub fn run_query(config: &ProtocolConfig, bank: &MemoryBank, terms: &[QueryTerm]) -> Result<QueryOutcome> {
    config.validate()?;
    require_bank_shape(config, bank)?;
    let layout = config.layout()?;
    let plan = schedule(config)?;
    let input = encode_query(terms, &layout)?;
    let mut current = Snapshot::encode(input, config.encoding, &layout)?;
    let mut steps = vec![TraceStep { stage: Stage::Input, level: None, gates: Vec::new(), snapshot: current.clone() }];
    let mut pending = Vec::new();
    for (k, sg) in plan.iter().enumerate() {
        if cfg!(debug_assertions) {
            if let Snapshot::Base(s) = &current {
                for c in s.keys() {
                    check_node_coincidence(c, &layout, &sg.gate)?;
                }
            }
        }
        current = current.apply(&sg.gate, &layout, bank)?;
        pending.push(sg.gate);
        let next = plan.get(k + 1);
        let boundary = match (config.snapshots, next) {
            (_, None) | (Granularity::Gate, _) => true,
            (Granularity::Level, Some(n)) => (n.stage, n.level) != (sg.stage, sg.level),
            (Granularity::Stage, Some(n)) => n.stage != sg.stage,
        };
        if boundary {
            steps.push(TraceStep {
                stage: sg.stage,
                level: sg.level,
                gates: std::mem::take(&mut pending),
                snapshot: current.clone(),
            });
        }
    }
    let output = decode_output(&current.to_base(&layout)?, &layout)?;
    Ok(QueryOutcome { output, trace: Trace { config: *config, bank: bank.clone(), steps } })
}

/// Decoded output only, with stage-level snapshots to keep sweeps light.
pub fn execute(config: &ProtocolConfig, bank: &MemoryBank, terms: &[QueryTerm]) -> Result<Vec<DecodedTerm>> {
    run_query(&config.with_snapshots(Granularity::Stage), bank, terms).map(|o| o.output)
}

fn run_stage(state: &QState, config: &ProtocolConfig, stage: Stage, bank: Option<&MemoryBank>) -> Result<QState> {
    let layout = config.layout()?;
    let mut out = state.clone();
    for sg in schedule(config)?.iter().filter(|sg| sg.stage == stage) {
        out = match bank {
            Some(bank) => gates::apply_gate(&out, &layout, bank, &sg.gate)?,
            None => out.try_map_basis(|c| gates::apply_routing(c, &layout, &sg.gate))?,
        };
    }
    Ok(out)
}

/// Route the encoded input down to the memory cells.
pub fn forward_route(state: &QState, config: &ProtocolConfig) -> Result<QState> {
    run_stage(state, config, Stage::Routing, None)
}

pub fn copy_phase(state: &QState, config: &ProtocolConfig, bank: &MemoryBank) -> Result<QState> {
    require_bank_shape(config, bank)?;
    run_stage(state, config, Stage::Copy, Some(bank))
}

/// Route everything from the cells back to the root.
pub fn backward_route(state: &QState, config: &ProtocolConfig) -> Result<QState> {
    run_stage(state, config, Stage::InverseRouting, None)
}

/// Identity-keyed level gates are only physical if every walker they flip
/// shares the control's node. Checked before each gate in debug builds.
pub fn check_node_coincidence(cfg: &BasisConfig, layout: &RegisterLayout, gate: &GateDescriptor) -> Result<()> {
    let (control, active, targets): (usize, InternalState, Vec<usize>) = match *gate {
        GateDescriptor::ULevel { level, .. } => {
            let c = layout.address_index(level);
            (c, InternalState::Red, (c + 1..layout.len()).collect())
        }
        GateDescriptor::UIn { level } => {
            (layout.address_index(level), InternalState::Red, vec![layout.require(SubsystemId::AddressBackup(level))?])
        }
        GateDescriptor::UBlock { control } => {
            (layout.require(control)?, InternalState::Blue, block_targets(layout, control)?)
        }
        _ => return Ok(()),
    };
    let c = cfg.walker(control);
    if c.state != active {
        return Ok(());
    }
    for t in targets {
        let w = cfg.walker(t);
        if !w.is_empty() && w.node() != c.node() {
            return Err(QramError::CoherenceFault(format!(
                "{gate}: {} at {} is not at the control's node {}",
                layout.subsystem(t),
                w.render(),
                c.render()
            )));
        }
    }
    Ok(())
}

/// A level at which an address walker failed to rejoin the train.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct RecollectionViolation {
    pub address: String,
    pub level: u8,
    pub subsystem: SubsystemId,
    pub detail: String,
}

/// Levels between which an address walker was away from the data train.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct DispersalInterval {
    pub address: String,
    pub walker: SubsystemId,
    pub left_at_level: u8,
    pub rejoined_at_level: u8,
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize)]
pub struct RecollectionReport {
    pub checks: usize,
    pub violations: Vec<RecollectionViolation>,
    pub intervals: Vec<DispersalInterval>,
}

impl RecollectionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn gate_level(gate: &GateDescriptor, step: &TraceStep) -> u8 {
    match *gate {
        GateDescriptor::Scatter { depth } => depth,
        GateDescriptor::ScatterInverse { depth } => depth - 1,
        GateDescriptor::ULevel { level, .. } | GateDescriptor::UIn { level } => level,
        _ => step.level.unwrap_or(0),
    }
}

/// Check that, before each level gate of the return path, the level's
/// address walker shares its node with everything injected after it, and
/// record when each address walker leaves and rejoins the data train.
pub fn verify_recollection(trace: &Trace) -> Result<RecollectionReport> {
    let layout = trace.config.layout()?;
    if trace.config.encoding != Encoding::Base {
        return Err(QramError::Usage("recollection checks run on base-encoded traces".into()));
    }
    let n = layout.n();
    // First subsystem after the address register: always occupied, always in the train.
    let train = layout.address_index(n) + 1;
    let mut report = RecollectionReport::default();
    let mut away: BTreeMap<(Bits, u8), u8> = BTreeMap::new();
    let mut prev: Option<GateDescriptor> = None;

    trace.visit_gates(|step, gate, before, after| {
        let (before, after) = match (before, after) {
            (Snapshot::Base(b), Snapshot::Base(a)) => (b, a),
            _ => return Err(QramError::Usage("trace mixes encodings".into())),
        };
        let starts_level =
            matches!(gate, GateDescriptor::ULevel { .. } | GateDescriptor::UIn { .. } | GateDescriptor::UBlock { .. })
                && matches!(prev, Some(GateDescriptor::ScatterInverse { .. }));
        if starts_level {
            let d = gate_level(&prev.expect("checked above"), step);
            for cfg in before.keys() {
                report.checks += 1;
                let control = cfg.walker(layout.address_index(d));
                if control.is_empty() {
                    continue;
                }
                for k in layout.address_index(d) + 1..layout.len() {
                    let w = cfg.walker(k);
                    if !w.is_empty() && w.node() != control.node() {
                        report.violations.push(RecollectionViolation {
                            address: cfg.address_bits(&layout).to_string(),
                            level: d,
                            subsystem: layout.subsystem(k),
                            detail: format!("{} vs control {}", w.render(), control.render()),
                        });
                    }
                }
            }
        }
        if gate.is_scatter() {
            let level = gate_level(gate, step);
            for cfg in after.keys() {
                let address = cfg.address_bits(&layout);
                let train_node = cfg.walker(train).node();
                for i in 1..=n {
                    let w = cfg.walker(layout.address_index(i));
                    let separated = !w.is_empty() && w.node() != train_node;
                    match (separated, away.get(&(address, i)).copied()) {
                        (true, None) => {
                            away.insert((address, i), level);
                        }
                        (false, Some(left)) => {
                            away.remove(&(address, i));
                            report.intervals.push(DispersalInterval {
                                address: address.to_string(),
                                walker: SubsystemId::Address(i),
                                left_at_level: left,
                                rejoined_at_level: level,
                            });
                        }
                        _ => {}
                    }
                }
            }
        }
        prev = Some(*gate);
        Ok(())
    })?;

    for ((address, i), left) in away {
        report.violations.push(RecollectionViolation {
            address: address.to_string(),
            level: left,
            subsystem: SubsystemId::Address(i),
            detail: "never rejoined the data train".into(),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walker::{encode_address, Phase, Walker};
    use InternalState::{Blue as B, Red as R};

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    fn b4_bank() -> MemoryBank {
        MemoryBank::new(2, 1, vec![bits("0"), bits("0"), bits("1"), bits("0")]).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ProtocolConfig::new(2, 1, Variant::Backup, CopyMode::Switch).is_err());
        assert!(ProtocolConfig::new(2, 1, Variant::Backup, CopyMode::Global).is_err());
        assert!(ProtocolConfig::new(2, 1, Variant::Standard, CopyMode::BackupControlled).is_err());
        assert!(ProtocolConfig::new(0, 1, Variant::Standard, CopyMode::Global).is_err());
        assert!(ProtocolConfig::backup(2, 1).unwrap().with_encoding(Encoding::Qudit).is_err());
        assert!(ProtocolConfig::switch(2, 1).unwrap().with_encoding(Encoding::DualRail).is_ok());
        assert_eq!(ProtocolConfig::switch(2, 3).unwrap().layout().unwrap().len(), 2 + 3 + 2);
    }

    #[test]
    fn schedule_shapes() {
        let std = schedule(&ProtocolConfig::standard(2, 1).unwrap()).unwrap();
        let names: Vec<String> = std.iter().map(|g| g.gate.to_string()).collect();
        assert_eq!(names, ["U(1)", "S[1→2]", "U(2)", "S[2→3]", "Copy", "S†[3→2′]", "U(2′)", "S†[2→1′]", "U(1′)"]);
        let bk = schedule(&ProtocolConfig::backup(2, 2).unwrap()).unwrap();
        let level1: Vec<String> =
            bk.iter().filter(|g| g.stage == Stage::Routing && g.level == Some(1)).map(|g| g.gate.to_string()).collect();
        assert_eq!(level1, ["Uin(1)", "UB[~A1]", "UB[~A2]", "UB[~D1]", "S[1→2]"]);
        let back1: Vec<String> = bk
            .iter()
            .filter(|g| g.stage == Stage::InverseRouting && g.level == Some(1))
            .map(|g| g.gate.to_string())
            .collect();
        assert_eq!(back1, ["S†[2→1′]", "UB[~D1]", "UB[~A2]", "UB[~A1]", "Uin(1)"]);
        let sw = schedule(&ProtocolConfig::switch(1, 2).unwrap()).unwrap();
        assert!(sw.iter().any(|g| g.gate == GateDescriptor::SwitchToggle { trigger: SubsystemId::Data(3) }));
    }

    #[test]
    fn classical_query_end_to_end() {
        let config = ProtocolConfig::standard(2, 1).unwrap();
        let out = run_query(&config, &b4_bank(), &[QueryTerm::classical(bits("10"))]).unwrap();
        assert_eq!(out.output.len(), 1);
        assert_eq!(out.output[0].address, bits("10"));
        assert_eq!(out.output[0].message, bits("1"));
        assert_eq!(out.output[0].amplitude, Complex64::new(1.0, 0.0));
        assert_eq!(out.trace.steps.len(), 10);
        assert!(out.trace.replay().unwrap().is_empty());
    }

    #[test]
    fn forward_route_reaches_the_cell() {
        let config = ProtocolConfig::standard(2, 1).unwrap();
        let layout = config.layout().unwrap();
        let input = QState::basis(encode_address(bits("10"), &layout).unwrap());
        let at_cells = forward_route(&input, &config).unwrap();
        let c = Phase::AtCell;
        let expect = BasisConfig::new(vec![
            Walker::colored(R, 3, 1, c),
            Walker::empty(3, c),
            Walker::colored(R, 3, 3, c),
            Walker::colored(R, 3, 3, c),
        ]);
        assert_eq!(at_cells, QState::basis(expect));
        let back = backward_route(&at_cells, &config).unwrap();
        assert_eq!(back, input.try_map_basis(|c| Ok(c.retag_backward())).unwrap());
    }

    #[test]
    fn granularities_record_the_same_gates() {
        let bank = b4_bank();
        let terms = [QueryTerm::classical(bits("11"))];
        let full = run_query(&ProtocolConfig::backup(2, 1).unwrap(), &bank, &terms).unwrap();
        for g in [Granularity::Level, Granularity::Stage] {
            let config = ProtocolConfig::backup(2, 1).unwrap().with_snapshots(g);
            let coarse = run_query(&config, &bank, &terms).unwrap();
            assert_eq!(coarse.output, full.output);
            assert!(coarse.trace.steps.len() < full.trace.steps.len());
            let a: Vec<_> = coarse.trace.gates().collect();
            let b: Vec<_> = full.trace.gates().collect();
            assert_eq!(a, b);
            assert_eq!(coarse.trace.output(), full.trace.output());
            assert!(coarse.trace.replay().unwrap().is_empty());
        }
        assert_eq!(
            run_query(&ProtocolConfig::backup(2, 1).unwrap().with_snapshots(Granularity::Stage), &bank, &terms)
                .unwrap()
                .trace
                .steps
                .len(),
            4
        );
    }

    #[test]
    fn recollection_of_a_classical_query() {
        let config = ProtocolConfig::standard(2, 1).unwrap();
        let out = run_query(&config, &b4_bank(), &[QueryTerm::classical(bits("10"))]).unwrap();
        let report = verify_recollection(&out.trace).unwrap();
        assert!(report.is_clean(), "{report:?}");
        assert_eq!(
            report.intervals,
            [DispersalInterval {
                address: "10".into(),
                walker: SubsystemId::Address(1),
                left_at_level: 1,
                rejoined_at_level: 1
            }]
        );
        let zero = run_query(&config, &b4_bank(), &[QueryTerm::classical(bits("00"))]).unwrap();
        let report = verify_recollection(&zero.trace).unwrap();
        assert!(report.is_clean() && report.intervals.is_empty());
    }

    #[test]
    fn coincidence_check_flags_a_stray_target() {
        let layout = RegisterLayout::standard(2, 1).unwrap();
        let f = Phase::Forward;
        let cfg = BasisConfig::new(vec![
            Walker::colored(R, 2, 1, f),
            Walker::colored(R, 2, 1, f),
            Walker::colored(B, 2, 2, f),
            Walker::colored(R, 2, 1, f),
        ]);
        let gate = GateDescriptor::ULevel { level: 2, direction: Direction::Forward };
        assert!(matches!(check_node_coincidence(&cfg, &layout, &gate), Err(QramError::CoherenceFault(_))));
        let level1 = GateDescriptor::ULevel { level: 1, direction: Direction::Forward };
        assert!(check_node_coincidence(&cfg, &layout, &level1).is_err());
        let scatter = GateDescriptor::Scatter { depth: 2 };
        assert!(check_node_coincidence(&cfg, &layout, &scatter).is_ok());
    }

    #[test]
    fn bank_shape_must_match() {
        let config = ProtocolConfig::standard(3, 1).unwrap();
        assert!(matches!(
            run_query(&config, &b4_bank(), &[QueryTerm::classical(bits("101"))]),
            Err(QramError::Configuration(_))
        ));
    }
}
