//! Brute-force verification backend for tiny registers.
//!
//! Every gate is re-implemented here as a permutation of the *whole*
//! configuration space, including the sibling-branch completion terms of the
//! two scatter gates that the protocol never exercises. The sparse engine in
//! `gates` only handles protocol inputs; this module enumerates what the
//! protocol can reach, builds dense matrices over it and checks that the two
//! agree and that every matrix is unitary.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{QramError, Result};
use crate::gates::{apply_gate, apply_to_config, GateDescriptor};
use crate::memory::MemoryBank;
use crate::protocol::{execute, schedule, CopyMode, ProtocolConfig, ScheduledGate};
use crate::walker::{
    decode_output, encode_address, BasisConfig, Bits, InternalState, Phase, QState, QueryTerm, RegisterLayout,
    SubsystemId, Variant, Walker,
};

/// Largest register the enumeration accepts.
pub const MAX_ORACLE_N: u8 = 3;
pub const MAX_ORACLE_M: u8 = 2;
/// Cap on enumerated configurations.
pub const MAX_SPACE: usize = 50_000;
/// Cap on the side of a dense matrix.
pub const MAX_DENSE: usize = 1_500;
/// Agreement tolerance between the sparse and dense engines.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-12;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn red(depth: u8, branch: u64, phase: Phase) -> Walker {
    Walker::colored(InternalState::Red, depth, branch, phase)
}

fn blue(depth: u8, branch: u64, phase: Phase) -> Walker {
    Walker::colored(InternalState::Blue, depth, branch, phase)
}

fn scatter_phases(depth: u8, cell_depth: u8) -> (Phase, Phase) {
    let lower = if depth + 1 == cell_depth { Phase::AtCell } else { Phase::Forward };
    (Phase::Forward, lower)
}

/// Full forward scatter on one walker, for the node family at input depth
/// `d`. Besides the three routing terms it closes two 3-cycles and one
/// 2-cycle so the map is a permutation:
/// R(d,l)→R(d+1,2l−1)→B(d+1,2l)→R(d,l), B(d,l)→R(d+1,2l)→B(d+1,2l−1)→B(d,l),
/// ∅(d)↔∅(d+1). Walkers elsewhere are untouched.
pub fn scatter_walker(w: Walker, d: u8, cell_depth: u8) -> Walker {
    let (up, low) = scatter_phases(d, cell_depth);
    let Walker { state, pos } = w;
    let at_up = pos.depth == d && pos.phase == up;
    let at_low = pos.depth == d + 1 && pos.phase == low;
    match (state, pos.branch) {
        (InternalState::Empty, _) if at_up => Walker::empty(d + 1, low),
        (InternalState::Empty, _) if at_low => Walker::empty(d, up),
        (InternalState::Red, Some(l)) if at_up => red(d + 1, 2 * l - 1, low),
        (InternalState::Blue, Some(l)) if at_up => red(d + 1, 2 * l, low),
        (InternalState::Red, Some(k)) if at_low && k % 2 == 1 => blue(d + 1, k + 1, low),
        (InternalState::Red, Some(k)) if at_low => blue(d + 1, k - 1, low),
        (InternalState::Blue, Some(k)) if at_low && k % 2 == 0 => red(d, k / 2, up),
        (InternalState::Blue, Some(k)) if at_low => blue(d, k.div_ceil(2), up),
        _ => w,
    }
}

/// Full inverse scatter on one walker, for input depth `d` (returning to
/// `d − 1`). With sibling ports `l − 1` (odd) and `l` (even) and parent `p`:
/// R(d,l)→B(d−1,p)→B(d,l−1)→R(d,l), R(d,l−1)→R(d−1,p)→B(d,l)→R(d,l−1),
/// ∅(d)↔∅(d−1).
pub fn scatter_inverse_walker(w: Walker, d: u8, cell_depth: u8) -> Walker {
    let up = if d == cell_depth { Phase::AtCell } else { Phase::Backward };
    let low = Phase::Backward;
    let Walker { state, pos } = w;
    let at_up = pos.depth == d && pos.phase == up;
    let at_low = pos.depth + 1 == d && pos.phase == low;
    match (state, pos.branch) {
        (InternalState::Empty, _) if at_up => Walker::empty(d - 1, low),
        (InternalState::Empty, _) if at_low => Walker::empty(d, up),
        (InternalState::Red, Some(l)) if at_up && l % 2 == 0 => blue(d - 1, l / 2, low),
        (InternalState::Red, Some(k)) if at_up => red(d - 1, k.div_ceil(2), low),
        (InternalState::Blue, Some(k)) if at_up && k % 2 == 1 => red(d, k + 1, up),
        (InternalState::Blue, Some(l)) if at_up => red(d, l - 1, up),
        (InternalState::Blue, Some(p)) if at_low => blue(d, 2 * p - 1, up),
        (InternalState::Red, Some(p)) if at_low => blue(d, 2 * p, up),
        _ => w,
    }
}

/// Cell index of a Red walker sitting at the cell level.
fn red_at_cell(w: &Walker, cell_depth: u8) -> Option<u64> {
    match (w.state, w.pos.depth, w.pos.phase, w.pos.branch) {
        (InternalState::Red, d, Phase::AtCell, Some(l)) if d == cell_depth => Some(l - 1),
        _ => None,
    }
}

/// Local copy with position projectors: a stored 0 swaps "Red at cell a"
/// with "empty at the cell level"; anything else is left alone.
fn copy_bit(w: &mut Walker, bit: bool, a: u64, cell_depth: u8) {
    if bit {
        return;
    }
    let at_cell = w.pos.depth == cell_depth && w.pos.phase == Phase::AtCell;
    match w.state {
        InternalState::Red if at_cell && w.pos.branch == Some(a + 1) => *w = Walker::empty(cell_depth, Phase::AtCell),
        InternalState::Empty if at_cell => *w = red(cell_depth, a + 1, Phase::AtCell),
        _ => {}
    }
}

fn index(layout: &RegisterLayout, id: SubsystemId) -> Result<usize> {
    layout.index_of(id).ok_or_else(|| QramError::Configuration(format!("register has no subsystem {id}")))
}

fn check_level(layout: &RegisterLayout, d: u8) -> Result<()> {
    if d == 0 || d > layout.n() {
        return Err(QramError::Usage(format!("level {d} outside 1..={}", layout.n())));
    }
    Ok(())
}

/// The dense engine's action of `gate` on any configuration, protocol-reachable
/// or not. Every action is a permutation of the configuration space.
pub fn full_action(
    cfg: &BasisConfig,
    layout: &RegisterLayout,
    bank: &MemoryBank,
    gate: &GateDescriptor,
) -> Result<BasisConfig> {
    if cfg.walkers().len() != layout.len() {
        return Err(QramError::Configuration(format!(
            "configuration has {} walkers, register has {}",
            cfg.walkers().len(),
            layout.len()
        )));
    }
    if gate.is_copy_stage() && (bank.n() != layout.n() || bank.m() != layout.m()) {
        return Err(QramError::Configuration("bank shape does not match the register".into()));
    }
    let cell_depth = layout.cell_depth();
    let m = layout.m();
    let mut out = cfg.clone();
    match *gate {
        GateDescriptor::ULevel { level, .. } => {
            check_level(layout, level)?;
            let c = layout.address_index(level);
            if cfg.walker(c).state == InternalState::Red {
                out.walkers_mut()[c + 1..].iter_mut().for_each(Walker::negate);
            }
        }
        GateDescriptor::Scatter { depth } => {
            for w in out.walkers_mut() {
                *w = scatter_walker(*w, depth, cell_depth);
            }
        }
        GateDescriptor::ScatterInverse { depth } => {
            if depth < 2 {
                return Err(QramError::Usage(format!("no inverse scatter into depth {}", depth as i16 - 1)));
            }
            for w in out.walkers_mut() {
                *w = scatter_inverse_walker(*w, depth, cell_depth);
            }
        }
        GateDescriptor::UIn { level } => {
            check_level(layout, level)?;
            if cfg.walker(layout.address_index(level)).state == InternalState::Red {
                out.walker_mut(index(layout, SubsystemId::AddressBackup(level))?).negate();
            }
        }
        GateDescriptor::UBlock { control } => {
            if !control.is_backup() {
                return Err(QramError::Usage(format!("{control} is not a backup subsystem")));
            }
            let c = index(layout, control)?;
            if cfg.walker(c).state == InternalState::Blue {
                out.walker_mut(c + 1).negate();
                if c + 2 < layout.len() && layout.subsystem(c + 2).is_backup() {
                    out.walker_mut(c + 2).negate();
                }
            }
        }
        GateDescriptor::CopyGlobal => {
            if let Some(a) = red_at_cell(cfg.walker(index(layout, SubsystemId::Data(0))?), cell_depth) {
                for j in 1..=m {
                    copy_bit(out.walker_mut(layout.data_index(j)), bank.bit(a, j), a, cell_depth);
                }
            }
        }
        GateDescriptor::SwitchToggle { trigger } => {
            if let Some(a) = red_at_cell(cfg.walker(index(layout, trigger)?), cell_depth) {
                out.toggle_switch(a);
            }
        }
        GateDescriptor::CopySwitch => {
            // Only a single armed cell writes; the projector onto "exactly one
            // switch on" keeps the map a permutation.
            if let [a] = cfg.switches_on().iter().copied().collect::<Vec<_>>()[..] {
                for j in 1..=m {
                    copy_bit(out.walker_mut(layout.data_index(j)), bank.bit(a, j), a, cell_depth);
                }
            }
        }
        GateDescriptor::CopyBackup => {
            for j in 1..=m {
                let control =
                    if j == 1 { SubsystemId::AddressBackup(layout.n()) } else { SubsystemId::DataBackup(j - 1) };
                if let Some(a) = red_at_cell(cfg.walker(index(layout, control)?), cell_depth) {
                    copy_bit(out.walker_mut(layout.data_index(j)), bank.bit(a, j), a, cell_depth);
                }
            }
        }
    }
    Ok(out)
}

/// Configurations reached from every classical address, for every possible
/// cell content, one stage per scheduled gate.
#[derive(Clone, Debug)]
pub struct ReachableSpace {
    config: ProtocolConfig,
    layout: RegisterLayout,
    plan: Vec<ScheduledGate>,
    configs: Vec<BasisConfig>,
    index: BTreeMap<BasisConfig, usize>,
    stages: Vec<Vec<usize>>,
}

impl ReachableSpace {
    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn plan(&self) -> &[ScheduledGate] {
        &self.plan
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[BasisConfig] {
        &self.configs
    }

    pub fn index_of(&self, cfg: &BasisConfig) -> Option<usize> {
        self.index.get(cfg).copied()
    }

    pub fn contains(&self, cfg: &BasisConfig) -> bool {
        self.index.contains_key(cfg)
    }

    /// Members present just before gate `k` of the plan (`k == plan.len()`
    /// gives the outputs).
    pub fn stage(&self, k: usize) -> impl Iterator<Item = &BasisConfig> {
        self.stages[k].iter().map(|&i| &self.configs[i])
    }

    fn insert(&mut self, cfg: BasisConfig) -> Result<usize> {
        if let Some(&i) = self.index.get(&cfg) {
            return Ok(i);
        }
        if self.configs.len() >= MAX_SPACE {
            return Err(QramError::SizeCap(format!("reachable space exceeds {MAX_SPACE} configurations")));
        }
        let i = self.configs.len();
        self.index.insert(cfg.clone(), i);
        self.configs.push(cfg);
        Ok(i)
    }
}

/// Banks with the same message in every cell, one per message. For
/// classical inputs each component reads a single cell, so these cover
/// every content that cell can hold.
pub fn uniform_banks(n: u8, m: u8) -> Result<Vec<MemoryBank>> {
    (0..1u64 << m).map(|v| MemoryBank::uniform(n, m, Bits::new(v, m)?)).collect()
}

pub fn enumerate_reachable(config: &ProtocolConfig) -> Result<ReachableSpace> {
    config.validate()?;
    if config.n > MAX_ORACLE_N || config.m > MAX_ORACLE_M {
        return Err(QramError::SizeCap(format!(
            "oracle enumeration is limited to n ≤ {MAX_ORACLE_N}, m ≤ {MAX_ORACLE_M} (got n={}, m={})",
            config.n, config.m
        )));
    }
    let layout = config.layout()?;
    let plan = schedule(config)?;
    let banks = uniform_banks(config.n, config.m)?;
    let mut space = ReachableSpace {
        config: *config,
        layout: layout.clone(),
        plan: plan.clone(),
        configs: Vec::new(),
        index: BTreeMap::new(),
        stages: Vec::with_capacity(plan.len() + 1),
    };
    let mut current = Vec::new();
    for a in 0..config.cells() {
        current.push(space.insert(encode_address(Bits::new(a, config.n)?, &layout)?)?);
    }
    space.stages.push(current.clone());
    for step in &plan {
        let reads_bank = step.gate.is_copy_stage() && !matches!(step.gate, GateDescriptor::SwitchToggle { .. });
        let banks = if reads_bank { &banks[..] } else { &banks[..1] };
        let mut next = Vec::new();
        for &i in &current {
            for bank in banks {
                let image = full_action(&space.configs[i].clone(), &layout, bank, &step.gate)?;
                let k = space.insert(image)?;
                if !next.contains(&k) {
                    next.push(k);
                }
            }
        }
        space.stages.push(next.clone());
        current = next;
    }
    Ok(space)
}

/// One gate as a dense matrix over a basis that is closed under it.
#[derive(Clone, Debug)]
pub struct DenseGate {
    pub gate: GateDescriptor,
    pub basis: Vec<BasisConfig>,
    /// How many basis states were appended beyond the starting set.
    pub completions: usize,
    pub matrix: DMatrix<Complex64>,
}

/// Close `start` under the permutation `f` and record it column by column.
fn dense_from<F>(gate: GateDescriptor, start: &[BasisConfig], f: F) -> Result<DenseGate>
where
    F: Fn(&BasisConfig) -> Result<BasisConfig>,
{
    let mut basis: Vec<BasisConfig> = start.to_vec();
    let mut index: BTreeMap<BasisConfig, usize> = basis.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    if index.len() != basis.len() {
        return Err(QramError::Validation("dense basis has repeated configurations".into()));
    }
    let mut images = Vec::new();
    let mut i = 0;
    while i < basis.len() {
        let image = f(&basis[i])?;
        let k = match index.get(&image) {
            Some(&k) => k,
            None => {
                if basis.len() >= MAX_DENSE {
                    return Err(QramError::SizeCap(format!(
                        "dense matrix for {gate} exceeds {MAX_DENSE} basis states"
                    )));
                }
                index.insert(image.clone(), basis.len());
                basis.push(image);
                basis.len() - 1
            }
        };
        images.push(k);
        i += 1;
    }
    let dim = basis.len();
    let mut matrix = DMatrix::zeros(dim, dim);
    for (col, &row) in images.iter().enumerate() {
        matrix[(row, col)] += ONE;
    }
    Ok(DenseGate { gate, basis, completions: dim - start.len(), matrix })
}

/// Dense matrix of `gate` over the reachable space plus whatever completion
/// states the gate's orbits add.
pub fn dense_build(gate: &GateDescriptor, space: &ReachableSpace, bank: &MemoryBank) -> Result<DenseGate> {
    let layout = space.layout();
    dense_from(*gate, space.configs(), |c| full_action(c, layout, bank, gate))
}

/// The two scatter gates on the eight single-walker states of one node
/// family: `(depth 2, branch 1)` forward, `(depth 3, branches 3 and 4)`
/// returning.
pub fn single_walker_scatter(inverse: bool) -> Result<DenseGate> {
    let cell_depth = 6;
    let one = |w: Walker| BasisConfig::new(vec![w]);
    let (gate, start) = if inverse {
        let (d, l, p) = (3, 4, 2);
        let b = Phase::Backward;
        (
            GateDescriptor::ScatterInverse { depth: d },
            vec![
                red(d, l, b),
                red(d, l - 1, b),
                blue(d, l, b),
                blue(d, l - 1, b),
                red(d - 1, p, b),
                blue(d - 1, p, b),
                Walker::empty(d, b),
                Walker::empty(d - 1, b),
            ],
        )
    } else {
        let (d, l) = (2, 1);
        let f = Phase::Forward;
        (
            GateDescriptor::Scatter { depth: d },
            vec![
                red(d, l, f),
                red(d + 1, 2 * l - 1, f),
                red(d + 1, 2 * l, f),
                blue(d, l, f),
                blue(d + 1, 2 * l - 1, f),
                blue(d + 1, 2 * l, f),
                Walker::empty(d, f),
                Walker::empty(d + 1, f),
            ],
        )
    };
    let start: Vec<BasisConfig> = start.into_iter().map(one).collect();
    dense_from(gate, &start, |c| {
        let w = c.walker(0);
        Ok(one(match gate {
            GateDescriptor::Scatter { depth } => scatter_walker(*w, depth, cell_depth),
            GateDescriptor::ScatterInverse { depth } => scatter_inverse_walker(*w, depth, cell_depth),
            _ => unreachable!(),
        }))
    })
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct UnitarityCheck {
    pub dimension: usize,
    /// Every entry is 0 or 1 with exactly one 1 per row and per column.
    pub permutation: bool,
    /// Largest entry of `M†M − I`.
    pub max_deviation: f64,
}

impl UnitarityCheck {
    pub fn passed(&self) -> bool {
        self.permutation && self.max_deviation == 0.0
    }
}

pub fn is_permutation(m: &DMatrix<Complex64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let zero = Complex64::new(0.0, 0.0);
    if m.iter().any(|&x| x != zero && x != ONE) {
        return false;
    }
    let ones = |v: nalgebra::DVectorView<'_, Complex64>| v.iter().filter(|&&x| x == ONE).count() == 1;
    (0..m.nrows()).all(|i| ones(m.row(i).transpose().as_view())) && (0..m.ncols()).all(|j| ones(m.column(j)))
}

/// Largest entry of `M†M − I`; infinite for non-square input.
pub fn unitarity_deviation(m: &DMatrix<Complex64>) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let product = m.adjoint() * m;
    let identity = DMatrix::<Complex64>::identity(m.nrows(), m.ncols());
    (product - identity).iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn check_unitary(gate: &DenseGate) -> UnitarityCheck {
    UnitarityCheck {
        dimension: gate.matrix.nrows(),
        permutation: is_permutation(&gate.matrix),
        max_deviation: unitarity_deviation(&gate.matrix),
    }
}

/// Smallest `k ≤ limit` with `M^k = I`.
pub fn permutation_order(m: &DMatrix<Complex64>, limit: usize) -> Option<usize> {
    let identity = DMatrix::<Complex64>::identity(m.nrows(), m.ncols());
    let mut power = m.clone();
    for k in 1..=limit {
        if power == identity {
            return Some(k);
        }
        power = &power * m;
    }
    None
}

/// One gate of a sequence, restricted to the images of the previous stage.
#[derive(Clone, Debug)]
pub struct StageMatrix {
    pub gate: GateDescriptor,
    pub rows: Vec<BasisConfig>,
    /// `rows.len() × previous rows.len()`.
    pub matrix: DMatrix<Complex64>,
}

/// Follow `start` through `gates` using the dense actions. Each matrix maps
/// the previous stage's basis to the images of that basis.
pub fn stage_matrices(
    layout: &RegisterLayout,
    bank: &MemoryBank,
    gates: &[GateDescriptor],
    start: &[BasisConfig],
) -> Result<Vec<StageMatrix>> {
    let mut cols = start.to_vec();
    let mut out = Vec::with_capacity(gates.len());
    for gate in gates {
        let mut rows: Vec<BasisConfig> = Vec::with_capacity(cols.len());
        let mut index = BTreeMap::new();
        let mut entries = Vec::with_capacity(cols.len());
        for (col, cfg) in cols.iter().enumerate() {
            let image = full_action(cfg, layout, bank, gate)?;
            let row = *index.entry(image.clone()).or_insert_with(|| {
                rows.push(image);
                rows.len() - 1
            });
            entries.push((row, col));
        }
        let mut matrix = DMatrix::zeros(rows.len(), cols.len());
        for (row, col) in entries {
            matrix[(row, col)] += ONE;
        }
        out.push(StageMatrix { gate: *gate, rows: rows.clone(), matrix });
        cols = rows;
    }
    Ok(out)
}

/// The whole query as one matrix from classical inputs to outputs.
#[derive(Clone, Debug)]
pub struct ComposedQuery {
    pub addresses: Vec<Bits>,
    pub outputs: Vec<BasisConfig>,
    pub matrix: DMatrix<Complex64>,
}

pub fn compose_query(config: &ProtocolConfig, bank: &MemoryBank) -> Result<ComposedQuery> {
    let layout = config.layout()?;
    let addresses: Vec<Bits> = (0..config.cells()).map(|a| Bits::new(a, config.n)).collect::<Result<_>>()?;
    let start: Vec<BasisConfig> = addresses.iter().map(|&a| encode_address(a, &layout)).collect::<Result<_>>()?;
    let gates: Vec<GateDescriptor> = schedule(config)?.into_iter().map(|s| s.gate).collect();
    let stages = stage_matrices(&layout, bank, &gates, &start)?;
    let mut matrix = DMatrix::<Complex64>::identity(start.len(), start.len());
    let mut outputs = start;
    for s in stages {
        matrix = &s.matrix * matrix;
        outputs = s.rows;
    }
    Ok(ComposedQuery { addresses, outputs, matrix })
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct QueryCheck {
    pub unitarity_deviation: f64,
    /// Every address column holds a single 1 on the output that decodes to
    /// that address with its stored message and restored ancillas.
    pub contract_holds: bool,
    pub detail: Option<String>,
}

impl QueryCheck {
    pub fn passed(&self) -> bool {
        self.contract_holds && self.unitarity_deviation == 0.0
    }
}

pub fn check_query(config: &ProtocolConfig, bank: &MemoryBank) -> Result<QueryCheck> {
    let layout = config.layout()?;
    let q = compose_query(config, bank)?;
    let mut detail = None;
    for (col, &address) in q.addresses.iter().enumerate() {
        let nonzero: Vec<(usize, Complex64)> =
            q.matrix.column(col).iter().enumerate().filter(|(_, x)| x.norm() > 0.0).map(|(r, x)| (r, *x)).collect();
        let problem = match nonzero[..] {
            [(row, amp)] if amp == ONE => match decode_output(&QState::basis(q.outputs[row].clone()), &layout) {
                Ok(terms) => {
                    let t = terms[0];
                    let expected = bank.cell(address.value());
                    (t.address != address || t.message != expected)
                        .then(|| format!("address {address} decoded as ({}, {})", t.address, t.message))
                }
                Err(e) => Some(format!("address {address}: {e}")),
            },
            _ => Some(format!("address {address} column is not a single unit entry: {nonzero:?}")),
        };
        if problem.is_some() {
            detail = problem;
            break;
        }
    }
    Ok(QueryCheck { unitarity_deviation: unitarity_deviation(&q.matrix), contract_holds: detail.is_none(), detail })
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct Divergence {
    pub input: usize,
    pub step: usize,
    pub gate: String,
    pub deviation: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct CrossCheckReport {
    pub inputs: usize,
    pub steps: usize,
    pub max_deviation: f64,
    pub first_divergence: Option<Divergence>,
}

impl CrossCheckReport {
    pub fn passed(&self) -> bool {
        self.first_divergence.is_none()
    }
}

fn deviation(state: &QState, rows: &[BasisConfig], v: &DVector<Complex64>) -> f64 {
    let dense: f64 = rows.iter().zip(v.iter()).map(|(c, x)| (state.amplitude(c) - x).norm()).fold(0.0, f64::max);
    let missing = state.iter().filter(|(c, _)| !rows.contains(c)).map(|(_, a)| a.norm()).fold(0.0, f64::max);
    dense.max(missing)
}

/// Run `gates` on each input through the sparse engine and through dense
/// matrix products, comparing after every step.
pub fn cross_check(
    layout: &RegisterLayout,
    bank: &MemoryBank,
    gates: &[GateDescriptor],
    inputs: &[QState],
) -> Result<CrossCheckReport> {
    let mut report =
        CrossCheckReport { inputs: inputs.len(), steps: gates.len(), max_deviation: 0.0, first_divergence: None };
    for (input, state) in inputs.iter().enumerate() {
        let start: Vec<BasisConfig> = state.keys().cloned().collect();
        let stages = stage_matrices(layout, bank, gates, &start)?;
        let mut v = DVector::from_iterator(start.len(), state.iter().map(|(_, a)| *a));
        let mut sparse = state.clone();
        for (step, s) in stages.iter().enumerate() {
            v = &s.matrix * v;
            sparse = apply_gate(&sparse, layout, bank, &s.gate)?;
            let dev = deviation(&sparse, &s.rows, &v);
            report.max_deviation = report.max_deviation.max(dev);
            if dev > CROSS_CHECK_TOLERANCE && report.first_divergence.is_none() {
                report.first_divergence = Some(Divergence { input, step, gate: s.gate.to_string(), deviation: dev });
            }
        }
    }
    Ok(report)
}

/// A random normalized superposition over some of `configs`.
pub fn random_superposition<R: Rng + ?Sized>(configs: &[BasisConfig], rng: &mut R) -> Result<QState> {
    if configs.is_empty() {
        return Err(QramError::Validation("no configurations to superpose".into()));
    }
    let mut terms = Vec::new();
    for c in configs {
        if rng.gen_bool(0.5) {
            terms.push((c.clone(), Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        }
    }
    if terms.is_empty() {
        let c = configs[rng.gen_range(0..configs.len())].clone();
        terms.push((c, ONE));
    }
    let norm = terms.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
    QState::from_terms(terms.into_iter().map(|(c, a)| (c, a / norm)))
}

/// Banks to run bank-dependent checks with: every bank when there are few,
/// otherwise the uniform ones plus `extra` random ones.
pub fn oracle_banks<R: Rng + ?Sized>(n: u8, m: u8, extra: usize, rng: &mut R) -> Result<Vec<MemoryBank>> {
    match MemoryBank::count(n, m) {
        Some(count) if count <= 64 => (0..count).map(|i| MemoryBank::from_index(n, m, i)).collect(),
        _ => {
            let mut banks = uniform_banks(n, m)?;
            for _ in 0..extra {
                banks.push(MemoryBank::random(n, m, rng)?);
            }
            Ok(banks)
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct GateCheck {
    pub gate: String,
    /// Index into the bank list for gates that read memory.
    pub bank: Option<usize>,
    pub completions: usize,
    pub unitarity: UnitarityCheck,
    /// Reachable configurations where the sparse engine disagrees with the
    /// dense action.
    pub sparse_mismatches: usize,
}

impl GateCheck {
    pub fn passed(&self) -> bool {
        self.unitarity.passed() && self.sparse_mismatches == 0
    }
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct UnitarityReport {
    pub space_size: usize,
    pub gates: Vec<GateCheck>,
    pub queries: Vec<QueryCheck>,
}

impl UnitarityReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(GateCheck::passed) && self.queries.iter().all(QueryCheck::passed)
    }
}

fn reads_bank(gate: &GateDescriptor) -> bool {
    matches!(gate, GateDescriptor::CopyGlobal | GateDescriptor::CopySwitch | GateDescriptor::CopyBackup)
}

/// Sparse/dense disagreements for `gate` on the stages it is scheduled at.
fn sparse_mismatches(space: &ReachableSpace, gate: &GateDescriptor, bank: &MemoryBank) -> Result<usize> {
    let layout = space.layout();
    let mut count = 0;
    for (k, step) in space.plan().iter().enumerate() {
        if step.gate != *gate {
            continue;
        }
        for cfg in space.stage(k) {
            let dense = full_action(cfg, layout, bank, gate)?;
            if apply_to_config(cfg, layout, bank, gate).ok().as_ref() != Some(&dense) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Dense unitarity of every scheduled gate, sparse agreement on the reachable
/// space, and the composed query for each bank.
pub fn verify_unitarity(config: &ProtocolConfig, banks: &[MemoryBank]) -> Result<UnitarityReport> {
    if banks.is_empty() {
        return Err(QramError::Usage("unitarity check needs at least one bank".into()));
    }
    let space = enumerate_reachable(config)?;
    let mut seen = Vec::new();
    let mut gates = Vec::new();
    for step in space.plan() {
        if seen.contains(&step.gate) {
            continue;
        }
        seen.push(step.gate);
        let bank_indices: Vec<Option<usize>> =
            if reads_bank(&step.gate) { (0..banks.len()).map(Some).collect() } else { vec![None] };
        for b in bank_indices {
            let bank = &banks[b.unwrap_or(0)];
            let dense = dense_build(&step.gate, &space, bank)?;
            gates.push(GateCheck {
                gate: step.gate.to_string(),
                bank: b,
                completions: dense.completions,
                unitarity: check_unitary(&dense),
                sparse_mismatches: sparse_mismatches(&space, &step.gate, bank)?,
            });
        }
    }
    let queries = banks.iter().map(|b| check_query(config, b)).collect::<Result<_>>()?;
    Ok(UnitarityReport { space_size: space.len(), gates, queries })
}

/// Outcome of comparing two gate compositions configuration by configuration.
#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct EquivalenceCheck {
    pub property: String,
    pub checked: usize,
    pub mismatches: Vec<String>,
}

impl EquivalenceCheck {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.mismatches.is_empty()
    }
}

fn compose(
    cfg: &BasisConfig,
    layout: &RegisterLayout,
    bank: &MemoryBank,
    gates: &[GateDescriptor],
) -> Result<BasisConfig> {
    gates.iter().try_fold(cfg.clone(), |c, g| full_action(&c, layout, bank, g))
}

fn primaries(cfg: &BasisConfig, layout: &RegisterLayout) -> Vec<Walker> {
    let a = (1..=layout.n()).map(|i| *cfg.walker(layout.address_index(i)));
    a.chain((1..=layout.m()).map(|j| *cfg.walker(layout.data_index(j)))).collect()
}

/// The backup chain at every level and direction, restricted to address and
/// data walkers, against the single level gate on the matching standard
/// register, over every reachable backup configuration.
pub fn compare_backup_levels(n: u8, m: u8) -> Result<EquivalenceCheck> {
    let space = enumerate_reachable(&ProtocolConfig::backup(n, m)?)?;
    let layout = space.layout();
    let standard = RegisterLayout::standard(n, m)?;
    let bank = MemoryBank::zeros(n, m)?;
    let plan = space.plan();
    let mut check =
        EquivalenceCheck { property: "backup chain ≡ level gate".into(), checked: 0, mismatches: Vec::new() };
    let mut k = 0;
    while k < plan.len() {
        if !matches!(plan[k].gate, GateDescriptor::UIn { .. } | GateDescriptor::UBlock { .. }) {
            k += 1;
            continue;
        }
        let end = (k..plan.len())
            .find(|&e| (plan[e].stage, plan[e].level) != (plan[k].stage, plan[k].level) || plan[e].gate.is_scatter())
            .unwrap_or(plan.len());
        let group: Vec<GateDescriptor> = plan[k..end].iter().map(|s| s.gate).collect();
        let level = plan[k].level.expect("level gates carry their level");
        let direction = if plan[k].stage == crate::protocol::Stage::Routing {
            crate::gates::Direction::Forward
        } else {
            crate::gates::Direction::Backward
        };
        let single = GateDescriptor::ULevel { level, direction };
        for cfg in space.stage(k) {
            let chained = compose(cfg, layout, &bank, &group)?;
            let flag = Walker::empty(cfg.walker(0).pos.depth, cfg.walker(0).pos.phase);
            let lifted = BasisConfig::new(
                standard
                    .subsystems()
                    .iter()
                    .map(|&id| match id {
                        SubsystemId::Data(0) => Ok(flag),
                        _ => index(layout, id).map(|i| *cfg.walker(i)),
                    })
                    .collect::<Result<_>>()?,
            );
            let direct = full_action(&lifted, &standard, &bank, &single)?;
            check.checked += 1;
            if primaries(&chained, layout) != primaries(&direct, &standard) {
                check.mismatches.push(format!("{single} on {}", cfg.render(layout)));
            }
        }
        k = end;
    }
    Ok(check)
}

/// Arm, write and disarm against the global copy, on every reachable
/// configuration at the cells, for each bank.
pub fn compare_switch_copy(n: u8, m: u8, banks: &[MemoryBank]) -> Result<EquivalenceCheck> {
    let config = ProtocolConfig::switch(n, m)?;
    let space = enumerate_reachable(&config)?;
    let layout = space.layout();
    let arm = space
        .plan()
        .iter()
        .position(|s| s.gate == GateDescriptor::SwitchToggle { trigger: SubsystemId::Data(0) })
        .expect("switch schedule arms the cells");
    let sequence = [
        GateDescriptor::SwitchToggle { trigger: SubsystemId::Data(0) },
        GateDescriptor::CopySwitch,
        GateDescriptor::SwitchToggle { trigger: SubsystemId::Data(m + 1) },
    ];
    let mut check =
        EquivalenceCheck { property: "arm/write/disarm ≡ global copy".into(), checked: 0, mismatches: Vec::new() };
    for bank in banks {
        for cfg in space.stage(arm) {
            check.checked += 1;
            let switched = compose(cfg, layout, bank, &sequence)?;
            let global = full_action(cfg, layout, bank, &GateDescriptor::CopyGlobal)?;
            if switched != global {
                check.mismatches.push(format!("bank {:016x}: {}", bank.checksum(), cfg.render(layout)));
            }
        }
    }
    Ok(check)
}

/// Decoded outputs of every copy mode against the standard global copy, for
/// every classical address and each bank. Decoding already rejects ancillas
/// that are not Red and switches left on.
pub fn compare_modes(n: u8, m: u8, banks: &[MemoryBank]) -> Result<EquivalenceCheck> {
    let modes = ProtocolConfig::all_modes(n, m)?;
    let mut check =
        EquivalenceCheck { property: "decoded outputs agree across modes".into(), checked: 0, mismatches: Vec::new() };
    for bank in banks {
        for a in 0..1u64 << n {
            let query = [QueryTerm::classical(Bits::new(a, n)?)];
            let reference = execute(&modes[0], bank, &query)?;
            for mode in &modes[1..] {
                check.checked += 1;
                let other = execute(mode, bank, &query);
                if other.as_ref() != Ok(&reference) {
                    check.mismatches.push(format!(
                        "{:?}/{:?}, bank {:016x}, address {}: {other:?}",
                        mode.variant,
                        mode.copy_mode,
                        bank.checksum(),
                        query[0].address
                    ));
                }
            }
        }
    }
    Ok(check)
}

/// Copy-compatible protocol configurations the oracle can enumerate.
pub fn oracle_modes(n: u8, m: u8) -> Result<Vec<ProtocolConfig>> {
    Ok(ProtocolConfig::all_modes(n, m)?
        .into_iter()
        .filter(|c| c.variant == Variant::Backup || c.copy_mode != CopyMode::BackupControlled)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scatter_walker_follows_the_routing_terms() {
        let f = Phase::Forward;
        assert_eq!(scatter_walker(red(1, 1, f), 1, 4), red(2, 1, f));
        assert_eq!(scatter_walker(blue(1, 1, f), 1, 4), red(2, 2, f));
        assert_eq!(scatter_walker(Walker::empty(1, f), 1, 4), Walker::empty(2, f));
        assert_eq!(scatter_walker(red(2, 2, f), 2, 3), red(3, 3, Phase::AtCell));
        assert_eq!(scatter_walker(red(3, 1, f), 1, 4), red(3, 1, f));
    }

    #[test]
    fn inverse_walker_follows_the_routing_terms() {
        let b = Phase::Backward;
        assert_eq!(scatter_inverse_walker(red(3, 3, Phase::AtCell), 3, 3), red(2, 2, b));
        assert_eq!(scatter_inverse_walker(red(2, 2, b), 2, 3), blue(1, 1, b));
        assert_eq!(scatter_inverse_walker(red(2, 1, b), 2, 3), red(1, 1, b));
        assert_eq!(scatter_inverse_walker(Walker::empty(2, b), 2, 3), Walker::empty(1, b));
    }

    #[test]
    fn single_walker_scatters_have_order_six() {
        for inverse in [false, true] {
            let g = single_walker_scatter(inverse).unwrap();
            assert_eq!(g.basis.len(), 8);
            assert_eq!(g.completions, 0);
            assert!(check_unitary(&g).passed());
            assert_eq!(permutation_order(&g.matrix, 64), Some(6));
        }
    }

    #[test]
    fn smallest_space_is_finite_and_holds_both_addresses() {
        let space = enumerate_reachable(&ProtocolConfig::standard(1, 1).unwrap()).unwrap();
        assert!(space.len() >= 2);
        assert_eq!(space.stage(0).count(), 2);
        assert!(enumerate_reachable(&ProtocolConfig::standard(4, 1).unwrap()).is_err());
    }

    #[test]
    fn level_gate_dense_matrix_squares_to_identity() {
        let space = enumerate_reachable(&ProtocolConfig::standard(2, 1).unwrap()).unwrap();
        let bank = MemoryBank::zeros(2, 1).unwrap();
        let g = dense_build(
            &GateDescriptor::ULevel { level: 1, direction: crate::gates::Direction::Forward },
            &space,
            &bank,
        )
        .unwrap();
        let sq = &g.matrix * &g.matrix;
        assert_eq!(sq, DMatrix::identity(g.basis.len(), g.basis.len()));
    }

    #[test]
    fn unitarity_small_register() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for config in oracle_modes(1, 1).unwrap() {
            let banks = oracle_banks(1, 1, 0, &mut rng).unwrap();
            let report = verify_unitarity(&config, &banks).unwrap();
            assert!(report.passed(), "{config:?}: {report:?}");
        }
    }

    #[test]
    fn cross_check_empty_sequence() {
        let layout = RegisterLayout::standard(2, 1).unwrap();
        let bank = MemoryBank::zeros(2, 1).unwrap();
        let input = QState::basis(encode_address("10".parse().unwrap(), &layout).unwrap());
        let r = cross_check(&layout, &bank, &[], &[input]).unwrap();
        assert_eq!(r.max_deviation, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn equivalences_small() {
        assert!(compare_backup_levels(2, 1).unwrap().passed());
        let banks = oracle_banks(2, 1, 0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(compare_switch_copy(2, 1, &banks).unwrap().passed());
    }
}
