//! Four-level qudit and dual-rail encodings of the walker register.
//!
//! In the base encoding a 0 bit is an empty subsystem. Here every subsystem
//! holds a particle with a rail bit and a color: empty becomes `(0, R)`, Red
//! becomes `(1, R)` and Blue becomes `(1, B)`. Rail-0 particles are physical,
//! so they travel the tree too; their routing mirrors rail 1 (a rail-0 control
//! flips rail-0 targets, and `(0, R)` takes the second child where `(1, R)`
//! takes the first).
//!
//! Translation back to the base encoding drops rail-0 positions. Translation
//! into the qudit encoding rebuilds them from the address bits, which is
//! exact at level-step boundaries; `(0, B)` appears only between a level gate
//! and its scatter and is rejected at a translation boundary.
//!
//! Dual rail is the same state space read as two parallel trees, tree 0 and
//! tree 1, selected by the rail bit.

use std::collections::BTreeSet;

use crate::error::{QramError, Result};
use crate::gates::{self, Direction, GateDescriptor};
use crate::memory::MemoryBank;
use crate::walker::{
    Amplitudes, BasisConfig, InternalState, Phase, QState, RegisterLayout, SubsystemId, Variant, Walker,
};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Color {
    Red,
    Blue,
}

impl Color {
    fn flip(self) -> Self {
        match self {
            Color::Red => Color::Blue,
            Color::Blue => Color::Red,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Color::Red => "R",
            Color::Blue => "B",
        }
    }
}

/// Local four-level state `(rail, color)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct QuditState {
    pub rail: bool,
    pub color: Color,
}

impl QuditState {
    pub const EMPTY: Self = Self { rail: false, color: Color::Red };
    pub const RED: Self = Self { rail: true, color: Color::Red };
    pub const BLUE: Self = Self { rail: true, color: Color::Blue };
    pub const TRANSIENT: Self = Self { rail: false, color: Color::Blue };

    pub fn from_base(state: InternalState) -> Self {
        match state {
            InternalState::Empty => Self::EMPTY,
            InternalState::Red => Self::RED,
            InternalState::Blue => Self::BLUE,
        }
    }

    pub fn to_base(self) -> Result<InternalState> {
        match (self.rail, self.color) {
            (false, Color::Red) => Ok(InternalState::Empty),
            (true, Color::Red) => Ok(InternalState::Red),
            (true, Color::Blue) => Ok(InternalState::Blue),
            (false, Color::Blue) => Err(QramError::Encoding("(0,B) has no base-encoding counterpart".into())),
        }
    }
}

/// A qudit particle: every subsystem has a branch in this encoding.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct QuditWalker {
    pub state: QuditState,
    pub depth: u8,
    pub branch: u64,
    pub phase: Phase,
}

impl QuditWalker {
    fn render(&self, dual_rail: bool) -> String {
        let depth = match self.phase {
            Phase::Backward => format!("{}′", self.depth),
            _ => self.depth.to_string(),
        };
        let rail = u8::from(self.state.rail);
        if dual_rail {
            format!("{}@T{rail}({depth},{})", self.state.color.symbol(), self.branch)
        } else {
            format!("({rail},{})@({depth},{})", self.state.color.symbol(), self.branch)
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct QuditConfig {
    walkers: Vec<QuditWalker>,
    switches_on: BTreeSet<u64>,
}

impl QuditConfig {
    pub fn new(walkers: Vec<QuditWalker>, switches_on: BTreeSet<u64>) -> Self {
        Self { walkers, switches_on }
    }

    pub fn walkers(&self) -> &[QuditWalker] {
        &self.walkers
    }

    pub fn switches_on(&self) -> &BTreeSet<u64> {
        &self.switches_on
    }

    pub fn render(&self, layout: &RegisterLayout, dual_rail: bool) -> String {
        let mut parts: Vec<String> = self
            .walkers
            .iter()
            .zip(layout.subsystems())
            .rev()
            .map(|(w, id)| format!("{}·{id}", w.render(dual_rail)))
            .collect();
        if !self.switches_on.is_empty() {
            let on: Vec<String> = self.switches_on.iter().map(|c| c.to_string()).collect();
            parts.push(format!("F[on:{}]", on.join(",")));
        }
        parts.join(" ⊗ ")
    }
}

pub type QuditQState = Amplitudes<QuditConfig>;

/// The same configuration read as two parallel trees.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct DualRailConfig(pub QuditConfig);

fn require_standard(layout: &RegisterLayout) -> Result<()> {
    if layout.variant() != Variant::Standard {
        return Err(QramError::Configuration(
            "qudit and dual-rail encodings are defined for the standard register only".into(),
        ));
    }
    Ok(())
}

/// Node the data train occupies at `depth`, given the address bits above it.
fn train_branch(cfg: &BasisConfig, layout: &RegisterLayout, depth: u8) -> u64 {
    let levels = (depth - 1).min(layout.n());
    (1..=levels).fold(0u64, |acc, i| (acc << 1) | u64::from(!cfg.walker(layout.address_index(i)).is_empty())) + 1
}

pub fn to_qudit(cfg: &BasisConfig, layout: &RegisterLayout) -> Result<QuditConfig> {
    require_standard(layout)?;
    let walkers = cfg
        .walkers()
        .iter()
        .zip(layout.subsystems())
        .map(|(w, id)| {
            let depth = w.pos.depth;
            let branch = match (w.pos.branch, id) {
                (Some(l), _) => l,
                // A 0-bit address particle leaves the train at its own level and
                // keeps taking second children from then on.
                (None, SubsystemId::Address(i)) if *i < depth => train_branch(cfg, layout, *i) << (depth - i),
                (None, _) => train_branch(cfg, layout, depth),
            };
            QuditWalker { state: QuditState::from_base(w.state), depth, branch, phase: w.pos.phase }
        })
        .collect();
    Ok(QuditConfig::new(walkers, cfg.switches_on().clone()))
}

pub fn from_qudit(q: &QuditConfig, layout: &RegisterLayout) -> Result<BasisConfig> {
    require_standard(layout)?;
    let walkers = q
        .walkers
        .iter()
        .zip(layout.subsystems())
        .map(|(w, id)| {
            let state = w.state.to_base().map_err(|e| QramError::Encoding(format!("{id}: {e}")))?;
            Ok(if state.is_empty() {
                Walker::empty(w.depth, w.phase)
            } else {
                Walker::colored(state, w.depth, w.branch, w.phase)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BasisConfig::with_switches(walkers, q.switches_on.clone()))
}

pub fn to_dualrail(cfg: &BasisConfig, layout: &RegisterLayout) -> Result<DualRailConfig> {
    to_qudit(cfg, layout).map(DualRailConfig)
}

pub fn from_dualrail(d: &DualRailConfig, layout: &RegisterLayout) -> Result<BasisConfig> {
    from_qudit(&d.0, layout)
}

/// Level gate: a `(1, R)` control flips the color of later rail-1 particles,
/// a `(0, R)` control flips later rail-0 particles, a Blue control is idle.
pub fn u_qudit(q: &QuditConfig, layout: &RegisterLayout, d: u8) -> Result<QuditConfig> {
    require_standard(layout)?;
    if d == 0 || d > layout.n() {
        return Err(QramError::Usage(format!("level {d} outside 1..={}", layout.n())));
    }
    let control = layout.address_index(d);
    let mut out = q.clone();
    let c = q.walkers[control].state;
    if c.color == Color::Red {
        for w in &mut out.walkers[control + 1..] {
            if w.state.rail == c.rail {
                w.state.color = w.state.color.flip();
            }
        }
    }
    Ok(out)
}

/// Forward scatter: `(1,R)` and `(0,B)` take the first child, `(1,B)` and
/// `(0,R)` the second; every particle leaves Red.
pub fn s_qudit(q: &QuditConfig, layout: &RegisterLayout) -> Result<QuditConfig> {
    let cell_depth = layout.cell_depth();
    let mut out = q.clone();
    for (w, id) in out.walkers.iter_mut().zip(layout.subsystems()) {
        if w.phase != Phase::Forward || w.depth >= cell_depth {
            return Err(QramError::ProtocolOrder(format!("cannot scatter {id} at {}", w.render(false))));
        }
        let first = w.state.rail == (w.state.color == Color::Red);
        w.branch = if first { 2 * w.branch - 1 } else { 2 * w.branch };
        w.state.color = Color::Red;
        w.depth += 1;
        w.phase = if w.depth == cell_depth { Phase::AtCell } else { Phase::Forward };
    }
    Ok(out)
}

/// Inverse scatter, the mirror of [`s_qudit`]: a particle arriving from the
/// child its rail would have taken when Red comes back Red, otherwise Blue.
pub fn s_dagger_qudit(q: &QuditConfig, layout: &RegisterLayout) -> Result<QuditConfig> {
    let cell_depth = layout.cell_depth();
    let mut out = q.clone();
    for (w, id) in out.walkers.iter_mut().zip(layout.subsystems()) {
        let ok = match w.phase {
            Phase::AtCell => w.depth == cell_depth,
            Phase::Backward => w.depth >= 2 && w.depth < cell_depth,
            Phase::Forward => false,
        };
        if !ok || w.state.color == Color::Blue {
            return Err(QramError::ProtocolOrder(format!("cannot inverse-scatter {id} at {}", w.render(false))));
        }
        let from_first = w.branch % 2 == 1;
        w.state.color = if from_first == w.state.rail { Color::Red } else { Color::Blue };
        w.branch = w.branch.div_ceil(2);
        w.depth -= 1;
        w.phase = Phase::Backward;
    }
    Ok(out)
}

/// Copy-stage gates act through translation to the base encoding.
fn translated(
    q: &QuditConfig,
    layout: &RegisterLayout,
    f: impl FnOnce(&BasisConfig) -> Result<BasisConfig>,
) -> Result<QuditConfig> {
    to_qudit(&f(&from_qudit(q, layout)?)?, layout)
}

pub fn apply_to_qudit_config(
    q: &QuditConfig,
    layout: &RegisterLayout,
    bank: &MemoryBank,
    gate: &GateDescriptor,
) -> Result<QuditConfig> {
    match *gate {
        GateDescriptor::ULevel { level, .. } => u_qudit(q, layout, level),
        GateDescriptor::Scatter { depth } | GateDescriptor::ScatterInverse { depth } => {
            if let Some((w, id)) = q.walkers.iter().zip(layout.subsystems()).find(|(w, _)| w.depth != depth) {
                return Err(QramError::ProtocolOrder(format!(
                    "{gate} expects depth {depth}, {id} is at {}",
                    w.render(false)
                )));
            }
            if matches!(gate, GateDescriptor::Scatter { .. }) {
                s_qudit(q, layout)
            } else {
                s_dagger_qudit(q, layout)
            }
        }
        GateDescriptor::CopyGlobal | GateDescriptor::SwitchToggle { .. } | GateDescriptor::CopySwitch => {
            translated(q, layout, |c| gates::apply_to_config(c, layout, bank, gate))
        }
        GateDescriptor::UIn { .. } | GateDescriptor::UBlock { .. } | GateDescriptor::CopyBackup => {
            Err(QramError::Configuration(format!("{gate} has no qudit counterpart")))
        }
    }
}

pub fn to_qudit_state(state: &QState, layout: &RegisterLayout) -> Result<QuditQState> {
    state.try_map_basis(|c| to_qudit(c, layout))
}

pub fn from_qudit_state(state: &QuditQState, layout: &RegisterLayout) -> Result<QState> {
    state.try_map_basis(|q| from_qudit(q, layout))
}

pub fn apply_u_qudit(
    state: &QuditQState,
    layout: &RegisterLayout,
    d: u8,
    _direction: Direction,
) -> Result<QuditQState> {
    state.try_map_basis(|q| u_qudit(q, layout, d))
}

pub fn apply_s_qudit(state: &QuditQState, layout: &RegisterLayout) -> Result<QuditQState> {
    state.try_map_basis(|q| s_qudit(q, layout))
}

pub fn apply_s_dagger_qudit(state: &QuditQState, layout: &RegisterLayout) -> Result<QuditQState> {
    state.try_map_basis(|q| s_dagger_qudit(q, layout))
}

pub fn apply_qudit_gate(
    state: &QuditQState,
    layout: &RegisterLayout,
    bank: &MemoryBank,
    gate: &GateDescriptor,
) -> Result<QuditQState> {
    state.try_map_basis(|q| apply_to_qudit_config(q, layout, bank, gate))
}

/// Split a gate sequence into steps whose endpoints are valid translation
/// boundaries: a forward level gate with its scatter, an inverse scatter with
/// the following level gate, and each copy-stage gate on its own.
pub fn level_steps(gates: &[GateDescriptor]) -> Vec<Vec<GateDescriptor>> {
    let mut steps: Vec<Vec<GateDescriptor>> = Vec::new();
    for g in gates {
        let joins = matches!(
            (steps.last().and_then(|s| s.last()), g),
            (Some(GateDescriptor::ULevel { direction: Direction::Forward, .. }), GateDescriptor::Scatter { .. })
                | (
                    Some(GateDescriptor::ScatterInverse { .. }),
                    GateDescriptor::ULevel { direction: Direction::Backward, .. }
                )
        );
        match steps.last_mut() {
            Some(last) if joins => last.push(*g),
            _ => steps.push(vec![*g]),
        }
    }
    steps
}

/// Outcome of checking one step in both encodings.
#[derive(Clone, PartialEq, Debug)]
pub struct Commutation {
    pub base_out: BasisConfig,
    pub qudit_out: QuditConfig,
    /// `from_qudit(step'(to_qudit(c))) == step(c)`.
    pub commutes: bool,
    /// `step'(to_qudit(c)) == to_qudit(step(c))`, including rail-0 positions.
    pub positions_agree: bool,
}

pub fn check_commutation(
    cfg: &BasisConfig,
    layout: &RegisterLayout,
    bank: &MemoryBank,
    step: &[GateDescriptor],
) -> Result<Commutation> {
    let mut base_out = cfg.clone();
    let mut qudit_out = to_qudit(cfg, layout)?;
    for g in step {
        base_out = gates::apply_to_config(&base_out, layout, bank, g)?;
        qudit_out = apply_to_qudit_config(&qudit_out, layout, bank, g)?;
    }
    let commutes = from_qudit(&qudit_out, layout)? == base_out;
    let positions_agree = to_qudit(&base_out, layout)? == qudit_out;
    Ok(Commutation { base_out, qudit_out, commutes, positions_agree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walker::{encode_address, Bits};

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    #[test]
    fn local_mapping() {
        assert_eq!(QuditState::from_base(InternalState::Empty), QuditState { rail: false, color: Color::Red });
        assert_eq!(QuditState::from_base(InternalState::Red), QuditState { rail: true, color: Color::Red });
        for s in [InternalState::Empty, InternalState::Red, InternalState::Blue] {
            assert_eq!(QuditState::from_base(s).to_base().unwrap(), s);
        }
        assert!(matches!(QuditState::TRANSIENT.to_base(), Err(QramError::Encoding(_))));
    }

    #[test]
    fn config_round_trip() {
        let layout = RegisterLayout::standard(3, 2).unwrap();
        for a in 0..8 {
            let c = encode_address(Bits::new(a, 3).unwrap(), &layout).unwrap();
            let q = to_qudit(&c, &layout).unwrap();
            assert!(q.walkers().iter().all(|w| w.branch == 1));
            assert_eq!(from_qudit(&q, &layout).unwrap(), c);
            assert_eq!(from_dualrail(&to_dualrail(&c, &layout).unwrap(), &layout).unwrap(), c);
        }
    }

    #[test]
    fn level_gate_flips_within_a_rail() {
        let layout = RegisterLayout::standard(2, 1).unwrap();
        let c = encode_address(bits("10"), &layout).unwrap();
        let q = u_qudit(&to_qudit(&c, &layout).unwrap(), &layout, 1).unwrap();
        let s: Vec<QuditState> = q.walkers().iter().map(|w| w.state).collect();
        assert_eq!(s, [QuditState::RED, QuditState::EMPTY, QuditState::BLUE, QuditState::BLUE]);

        let zero = encode_address(bits("01"), &layout).unwrap();
        let q0 = u_qudit(&to_qudit(&zero, &layout).unwrap(), &layout, 1).unwrap();
        let s0: Vec<QuditState> = q0.walkers().iter().map(|w| w.state).collect();
        assert_eq!(s0, [QuditState::EMPTY, QuditState::RED, QuditState::RED, QuditState::RED]);

        // A Blue control does nothing.
        let mut blue = to_qudit(&c, &layout).unwrap();
        blue.walkers[0].state = QuditState::BLUE;
        assert_eq!(u_qudit(&blue, &layout, 1).unwrap(), blue);
        let mut transient = blue.clone();
        transient.walkers[0].state = QuditState::TRANSIENT;
        assert_eq!(u_qudit(&transient, &layout, 1).unwrap(), transient);
    }

    #[test]
    fn scatter_children() {
        let layout = RegisterLayout::standard(1, 1).unwrap();
        let mk = |state| QuditWalker { state, depth: 1, branch: 1, phase: Phase::Forward };
        let q =
            QuditConfig::new(vec![mk(QuditState::RED), mk(QuditState::BLUE), mk(QuditState::EMPTY)], BTreeSet::new());
        let out = s_qudit(&q, &layout).unwrap();
        let got: Vec<(QuditState, u64)> = out.walkers().iter().map(|w| (w.state, w.branch)).collect();
        assert_eq!(got, [(QuditState::RED, 1), (QuditState::RED, 2), (QuditState::EMPTY, 2)]);
        let t = QuditConfig::new(vec![mk(QuditState::TRANSIENT); 3], BTreeSet::new());
        assert!(s_qudit(&t, &layout).unwrap().walkers().iter().all(|w| w.state == QuditState::EMPTY && w.branch == 1));
        assert!(out.walkers().iter().all(|w| w.phase == Phase::AtCell));
    }

    #[test]
    fn inverse_scatter_mirrors_scatter() {
        let layout = RegisterLayout::standard(1, 1).unwrap();
        for state in [QuditState::RED, QuditState::BLUE, QuditState::EMPTY, QuditState::TRANSIENT] {
            let w = QuditWalker { state, depth: 1, branch: 1, phase: Phase::Forward };
            let q = QuditConfig::new(vec![w; 3], BTreeSet::new());
            let back = s_dagger_qudit(&s_qudit(&q, &layout).unwrap(), &layout).unwrap();
            // The child taken on the way down is turned back into the color.
            for r in back.walkers() {
                assert_eq!((r.depth, r.branch, r.phase), (1, 1, Phase::Backward));
                assert_eq!(r.state, state);
            }
        }
    }

    #[test]
    fn backup_layouts_are_rejected() {
        let layout = RegisterLayout::backup(2, 1).unwrap();
        let c = encode_address(bits("10"), &layout).unwrap();
        assert!(matches!(to_qudit(&c, &layout), Err(QramError::Configuration(_))));
    }

    #[test]
    fn steps_group_at_translation_boundaries() {
        let u = |level, direction| GateDescriptor::ULevel { level, direction };
        let gates = [
            u(1, Direction::Forward),
            GateDescriptor::Scatter { depth: 1 },
            GateDescriptor::CopyGlobal,
            GateDescriptor::ScatterInverse { depth: 2 },
            u(1, Direction::Backward),
        ];
        let steps = level_steps(&gates);
        assert_eq!(steps.len(), 3);
        assert_eq!(steps[0].len(), 2);
        assert_eq!(steps[1], [GateDescriptor::CopyGlobal]);
        assert_eq!(steps[2].len(), 2);
    }
}
