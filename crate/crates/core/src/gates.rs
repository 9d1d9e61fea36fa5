//! The protocol's gates, each an exact permutation of basis configurations.
//!
//! Every gate is first defined on a single [`BasisConfig`] and lifted to a
//! [`QState`] by moving amplitudes along the permutation. The sparse engine
//! implements only the branches the protocol can reach; anything else (a Blue
//! walker entering an inverse scatter, a walker scattered past the cells) is
//! rejected with a protocol-order error instead of being routed silently. The
//! completed unitaries live in the dense oracle.
//!
//! Level gates are keyed on subsystem identity, not position: when the
//! control is active they act on every later subsystem in injection order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};
use crate::memory::MemoryBank;
use crate::walker::{BasisConfig, InternalState, Phase, QState, RegisterLayout, SubsystemId, Variant, Walker};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Backward,
}

/// A single gate application as recorded in traces and schedules.
///
/// Scatter gates carry the depth their inputs sit at: `Scatter { depth: d }`
/// moves walkers from depth `d` to `d + 1`, `ScatterInverse { depth: d }`
/// from `d` to `d - 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "kebab-case")]
pub enum GateDescriptor {
    ULevel { level: u8, direction: Direction },
    Scatter { depth: u8 },
    ScatterInverse { depth: u8 },
    CopyGlobal,
    SwitchToggle { trigger: SubsystemId },
    CopySwitch,
    UIn { level: u8 },
    UBlock { control: SubsystemId },
    CopyBackup,
}

impl fmt::Display for GateDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateDescriptor::ULevel { level, direction: Direction::Forward } => write!(f, "U({level})"),
            GateDescriptor::ULevel { level, direction: Direction::Backward } => {
                write!(f, "U({level}′)")
            }
            GateDescriptor::Scatter { depth } => write!(f, "S[{depth}→{}]", depth + 1),
            GateDescriptor::ScatterInverse { depth } => write!(f, "S†[{depth}→{}′]", depth - 1),
            GateDescriptor::CopyGlobal => f.write_str("Copy"),
            GateDescriptor::SwitchToggle { trigger } => write!(f, "Toggle[{trigger}]"),
            GateDescriptor::CopySwitch => f.write_str("Writer"),
            GateDescriptor::UIn { level } => write!(f, "Uin({level})"),
            GateDescriptor::UBlock { control } => write!(f, "UB[{control}]"),
            GateDescriptor::CopyBackup => f.write_str("CopyBackup"),
        }
    }
}

impl GateDescriptor {
    pub fn is_copy_stage(&self) -> bool {
        matches!(
            self,
            GateDescriptor::CopyGlobal
                | GateDescriptor::SwitchToggle { .. }
                | GateDescriptor::CopySwitch
                | GateDescriptor::CopyBackup
        )
    }

    pub fn is_scatter(&self) -> bool {
        matches!(self, GateDescriptor::Scatter { .. } | GateDescriptor::ScatterInverse { .. })
    }
}

fn order_err(msg: String) -> QramError {
    QramError::ProtocolOrder(msg)
}

fn require_variant(layout: &RegisterLayout, variant: Variant, gate: &str) -> Result<()> {
    if layout.variant() != variant {
        return Err(QramError::Configuration(format!("{gate} needs the {variant:?} register layout")));
    }
    Ok(())
}

fn require_level(layout: &RegisterLayout, d: u8) -> Result<()> {
    if d == 0 || d > layout.n() {
        return Err(QramError::Usage(format!("level {d} outside 1..={}", layout.n())));
    }
    Ok(())
}

fn require_bank(layout: &RegisterLayout, bank: &MemoryBank) -> Result<()> {
    if bank.n() != layout.n() || bank.m() != layout.m() {
        return Err(QramError::Configuration(format!(
            "bank shape (n={}, m={}) does not match register (n={}, m={})",
            bank.n(),
            bank.m(),
            layout.n(),
            layout.m()
        )));
    }
    Ok(())
}

fn require_at_cells(cfg: &BasisConfig, layout: &RegisterLayout, gate: &str) -> Result<()> {
    for (w, id) in cfg.walkers().iter().zip(layout.subsystems()) {
        if w.pos.phase != Phase::AtCell {
            return Err(order_err(format!("{gate} applied while {id} is at {}", w.render())));
        }
    }
    Ok(())
}

/// Memory cell a colored walker sits at, if it is Red at the cell level.
fn red_cell(w: &Walker) -> Option<u64> {
    match (w.state, w.pos.phase, w.pos.branch) {
        (InternalState::Red, Phase::AtCell, Some(l)) => Some(l - 1),
        _ => None,
    }
}

/// Local copy between one stored bit and a data walker at cell `a`: a stored
/// 1 leaves the walker alone, a stored 0 swaps Red and Empty.
fn local_copy(w: &mut Walker, bit: bool, a: u64, cell_depth: u8) {
    if bit {
        return;
    }
    match w.state {
        InternalState::Red => *w = Walker::empty(cell_depth, Phase::AtCell),
        InternalState::Empty => *w = Walker::colored(InternalState::Red, cell_depth, a + 1, Phase::AtCell),
        InternalState::Blue => {}
    }
}

/// Level gate: when address walker `d` is Red, negate every later subsystem.
/// The same rule applies in both directions.
pub fn u_level(cfg: &BasisConfig, layout: &RegisterLayout, d: u8) -> Result<BasisConfig> {
    require_variant(layout, Variant::Standard, "level gate")?;
    require_level(layout, d)?;
    let control = layout.address_index(d);
    let mut out = cfg.clone();
    if cfg.walker(control).state == InternalState::Red {
        for w in &mut out.walkers_mut()[control + 1..] {
            w.negate();
        }
    }
    Ok(out)
}

/// Forward scatter: Red takes the first child, Blue the second child and
/// turns Red, Empty only moves down a level.
pub fn scatter(cfg: &BasisConfig, layout: &RegisterLayout) -> Result<BasisConfig> {
    let cell_depth = layout.cell_depth();
    let mut out = cfg.clone();
    for (w, id) in out.walkers_mut().iter_mut().zip(layout.subsystems()) {
        if w.pos.phase != Phase::Forward || w.pos.depth >= cell_depth {
            return Err(order_err(format!("cannot scatter {id} at {}", w.render())));
        }
        let depth = w.pos.depth + 1;
        let phase = if depth == cell_depth { Phase::AtCell } else { Phase::Forward };
        *w = match (w.state, w.pos.branch) {
            (InternalState::Empty, _) => Walker::empty(depth, phase),
            (InternalState::Red, Some(l)) => Walker::colored(InternalState::Red, depth, 2 * l - 1, phase),
            (InternalState::Blue, Some(l)) => Walker::colored(InternalState::Red, depth, 2 * l, phase),
            (_, None) => return Err(order_err(format!("{id} is colored but has no branch"))),
        };
    }
    Ok(out)
}

/// Inverse scatter: Red from a first child returns Red, Red from a second
/// child returns Blue, Empty moves up a level. Only Red walkers may enter.
pub fn scatter_inverse(cfg: &BasisConfig, layout: &RegisterLayout) -> Result<BasisConfig> {
    let cell_depth = layout.cell_depth();
    let mut out = cfg.clone();
    for (w, id) in out.walkers_mut().iter_mut().zip(layout.subsystems()) {
        let ok = match w.pos.phase {
            Phase::AtCell => w.pos.depth == cell_depth,
            Phase::Backward => w.pos.depth >= 2 && w.pos.depth < cell_depth,
            Phase::Forward => false,
        };
        if !ok {
            return Err(order_err(format!("cannot inverse-scatter {id} at {}", w.render())));
        }
        let depth = w.pos.depth - 1;
        *w = match (w.state, w.pos.branch) {
            (InternalState::Empty, _) => Walker::empty(depth, Phase::Backward),
            (InternalState::Red, Some(l)) if l % 2 == 0 => {
                Walker::colored(InternalState::Blue, depth, l / 2, Phase::Backward)
            }
            (InternalState::Red, Some(l)) => Walker::colored(InternalState::Red, depth, l.div_ceil(2), Phase::Backward),
            (InternalState::Blue, _) => return Err(order_err(format!("Blue walker {id} at an inverse-scatter input"))),
            (_, None) => return Err(order_err(format!("{id} is colored but has no branch"))),
        };
    }
    Ok(out)
}

/// Global copy: when the flag is Red at cell `a`, copy every bit of cell `a`
/// onto the matching data walker.
pub fn copy_global(cfg: &BasisConfig, layout: &RegisterLayout, bank: &MemoryBank) -> Result<BasisConfig> {
    require_variant(layout, Variant::Standard, "global copy")?;
    require_bank(layout, bank)?;
    require_at_cells(cfg, layout, "global copy")?;
    let mut out = cfg.clone();
    if let Some(a) = red_cell(cfg.walker(layout.data_index(0))) {
        for j in 1..=layout.m() {
            local_copy(out.walker_mut(layout.data_index(j)), bank.bit(a, j), a, layout.cell_depth());
        }
    }
    Ok(out)
}

/// Switch toggle: when the trigger walker is Red at cell `a`, flip that
/// cell's switch in this component.
pub fn switch_toggle(cfg: &BasisConfig, layout: &RegisterLayout, trigger: SubsystemId) -> Result<BasisConfig> {
    let m = layout.m();
    if !matches!(trigger, SubsystemId::Data(j) if j == 0 || j == m + 1) {
        return Err(QramError::Configuration(format!(
            "switch trigger must be the flag or the terminator, got {trigger}"
        )));
    }
    let index = layout.require(trigger)?;
    require_at_cells(cfg, layout, "switch toggle")?;
    let mut out = cfg.clone();
    if let Some(a) = red_cell(cfg.walker(index)) {
        out.toggle_switch(a);
    }
    Ok(out)
}

/// Writer: copy every cell whose switch is on onto the data walkers.
pub fn copy_switch(cfg: &BasisConfig, layout: &RegisterLayout, bank: &MemoryBank) -> Result<BasisConfig> {
    require_bank(layout, bank)?;
    require_at_cells(cfg, layout, "writer")?;
    if cfg.switches_on().len() > 1 {
        return Err(order_err(format!("writer found several switches on in one component: {:?}", cfg.switches_on())));
    }
    let mut out = cfg.clone();
    for &a in cfg.switches_on() {
        for j in 1..=layout.m() {
            local_copy(out.walker_mut(layout.data_index(j)), bank.bit(a, j), a, layout.cell_depth());
        }
    }
    Ok(out)
}

/// Backup entry gate: when address walker `d` is Red, negate its backup.
pub fn u_in(cfg: &BasisConfig, layout: &RegisterLayout, d: u8) -> Result<BasisConfig> {
    require_variant(layout, Variant::Backup, "backup entry gate")?;
    require_level(layout, d)?;
    let control = layout.address_index(d);
    let target = layout.require(SubsystemId::AddressBackup(d))?;
    let mut out = cfg.clone();
    if cfg.walker(control).state == InternalState::Red {
        out.walker_mut(target).negate();
    }
    Ok(out)
}

/// Subsystems negated by the block controlled by `control`: the next
/// subsystem and, when it has one, its backup.
pub fn block_targets(layout: &RegisterLayout, control: SubsystemId) -> Result<Vec<usize>> {
    require_variant(layout, Variant::Backup, "backup block")?;
    if !control.is_backup() {
        return Err(QramError::Usage(format!("block control {control} is not a backup subsystem")));
    }
    let c = layout.require(control)?;
    let mut targets = vec![c + 1];
    if c + 2 < layout.len() && layout.subsystem(c + 2).is_backup() {
        targets.push(c + 2);
    }
    Ok(targets)
}

/// Backup block: when the control backup is Blue, negate its targets.
pub fn u_block(cfg: &BasisConfig, layout: &RegisterLayout, control: SubsystemId) -> Result<BasisConfig> {
    let targets = block_targets(layout, control)?;
    let mut out = cfg.clone();
    if cfg.walker(layout.require(control)?).state == InternalState::Blue {
        for t in targets {
            out.walker_mut(t).negate();
        }
    }
    Ok(out)
}

/// Block controls used at level `d`, in forward order.
pub fn block_controls(layout: &RegisterLayout, d: u8) -> Vec<SubsystemId> {
    (d..=layout.n()).map(SubsystemId::AddressBackup).chain((1..layout.m()).map(SubsystemId::DataBackup)).collect()
}

/// The gate sequence replacing the level gate in the backup variant. The
/// backward sequence is the exact time reversal of the forward one.
pub fn level_backup_gates(layout: &RegisterLayout, d: u8, direction: Direction) -> Vec<GateDescriptor> {
    let mut gates = vec![GateDescriptor::UIn { level: d }];
    gates.extend(block_controls(layout, d).into_iter().map(|control| GateDescriptor::UBlock { control }));
    if direction == Direction::Backward {
        gates.reverse();
    }
    gates
}

pub fn level_backup(cfg: &BasisConfig, layout: &RegisterLayout, d: u8, direction: Direction) -> Result<BasisConfig> {
    require_variant(layout, Variant::Backup, "backup level")?;
    require_level(layout, d)?;
    let mut out = cfg.clone();
    for gate in level_backup_gates(layout, d, direction) {
        out = match gate {
            GateDescriptor::UIn { level } => u_in(&out, layout, level)?,
            GateDescriptor::UBlock { control } => u_block(&out, layout, control)?,
            _ => unreachable!("level sequence holds only entry gates and blocks"),
        };
    }
    Ok(out)
}

/// Control subsystem of the copy onto data walker `j` in the backup variant.
pub fn copy_backup_control(j: u8, n: u8) -> SubsystemId {
    if j == 1 {
        SubsystemId::AddressBackup(n)
    } else {
        SubsystemId::DataBackup(j - 1)
    }
}

/// Backup-controlled copy: data walker `j` is written from cell `a` when its
/// control backup is Red there.
pub fn copy_backup(cfg: &BasisConfig, layout: &RegisterLayout, bank: &MemoryBank) -> Result<BasisConfig> {
    require_variant(layout, Variant::Backup, "backup-controlled copy")?;
    require_bank(layout, bank)?;
    require_at_cells(cfg, layout, "backup-controlled copy")?;
    let mut out = cfg.clone();
    for j in 1..=layout.m() {
        let control = layout.require(copy_backup_control(j, layout.n()))?;
        if let Some(a) = red_cell(cfg.walker(control)) {
            local_copy(out.walker_mut(layout.data_index(j)), bank.bit(a, j), a, layout.cell_depth());
        }
    }
    Ok(out)
}

/// Apply a routing-stage gate, which never reads the bank.
pub fn apply_routing(cfg: &BasisConfig, layout: &RegisterLayout, gate: &GateDescriptor) -> Result<BasisConfig> {
    match *gate {
        GateDescriptor::ULevel { level, .. } => u_level(cfg, layout, level),
        GateDescriptor::Scatter { depth } => {
            check_depth(cfg, layout, depth, gate)?;
            scatter(cfg, layout)
        }
        GateDescriptor::ScatterInverse { depth } => {
            check_depth(cfg, layout, depth, gate)?;
            scatter_inverse(cfg, layout)
        }
        GateDescriptor::UIn { level } => u_in(cfg, layout, level),
        GateDescriptor::UBlock { control } => u_block(cfg, layout, control),
        _ => Err(QramError::Usage(format!("{gate} reads the memory bank"))),
    }
}

/// Apply one gate to one basis configuration.
pub fn apply_to_config(
    cfg: &BasisConfig,
    layout: &RegisterLayout,
    bank: &MemoryBank,
    gate: &GateDescriptor,
) -> Result<BasisConfig> {
    match *gate {
        GateDescriptor::CopyGlobal => copy_global(cfg, layout, bank),
        GateDescriptor::SwitchToggle { trigger } => switch_toggle(cfg, layout, trigger),
        GateDescriptor::CopySwitch => copy_switch(cfg, layout, bank),
        GateDescriptor::CopyBackup => copy_backup(cfg, layout, bank),
        _ => apply_routing(cfg, layout, gate),
    }
}

fn check_depth(cfg: &BasisConfig, layout: &RegisterLayout, depth: u8, gate: &GateDescriptor) -> Result<()> {
    for (w, id) in cfg.walkers().iter().zip(layout.subsystems()) {
        if w.pos.depth != depth {
            return Err(order_err(format!("{gate} expects depth {depth}, {id} is at {}", w.render())));
        }
    }
    Ok(())
}

/// Apply one gate to every component of a state.
pub fn apply_gate(state: &QState, layout: &RegisterLayout, bank: &MemoryBank, gate: &GateDescriptor) -> Result<QState> {
    state.try_map_basis(|c| apply_to_config(c, layout, bank, gate))
}

pub fn apply_u_level(state: &QState, layout: &RegisterLayout, d: u8, _direction: Direction) -> Result<QState> {
    state.try_map_basis(|c| u_level(c, layout, d))
}

pub fn apply_s(state: &QState, layout: &RegisterLayout) -> Result<QState> {
    state.try_map_basis(|c| scatter(c, layout))
}

pub fn apply_s_dagger(state: &QState, layout: &RegisterLayout) -> Result<QState> {
    state.try_map_basis(|c| scatter_inverse(c, layout))
}

pub fn apply_copy_global(state: &QState, layout: &RegisterLayout, bank: &MemoryBank) -> Result<QState> {
    state.try_map_basis(|c| copy_global(c, layout, bank))
}

/// Switch state travels with each component, so only the state is returned;
/// the bank is read-only.
pub fn apply_switch_toggle(state: &QState, layout: &RegisterLayout, trigger: SubsystemId) -> Result<QState> {
    state.try_map_basis(|c| switch_toggle(c, layout, trigger))
}

pub fn apply_copy_switch(state: &QState, layout: &RegisterLayout, bank: &MemoryBank) -> Result<QState> {
    state.try_map_basis(|c| copy_switch(c, layout, bank))
}

pub fn apply_u_in(state: &QState, layout: &RegisterLayout, d: u8) -> Result<QState> {
    state.try_map_basis(|c| u_in(c, layout, d))
}

pub fn apply_u_block(state: &QState, layout: &RegisterLayout, control: SubsystemId) -> Result<QState> {
    state.try_map_basis(|c| u_block(c, layout, control))
}

pub fn apply_level_backup(state: &QState, layout: &RegisterLayout, d: u8, direction: Direction) -> Result<QState> {
    state.try_map_basis(|c| level_backup(c, layout, d, direction))
}

pub fn apply_copy_backup(state: &QState, layout: &RegisterLayout, bank: &MemoryBank) -> Result<QState> {
    state.try_map_basis(|c| copy_backup(c, layout, bank))
}
