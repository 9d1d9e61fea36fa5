//! Resource counting for executed queries and whole-tree footprints.
//!
//! Only asymptotic classes are published for this architecture, so the exact
//! numbers here follow a counting convention of our own:
//!
//! * a standard level gate at level `d` costs `n + m - d` two-body operations
//!   and as many sequential steps (its decomposition into pairwise gates);
//! * in the backup variant the entry gate and every block cost one each;
//! * a copy stage writes `m` bits in parallel: `m` operations, depth 1;
//!   each switch toggle adds one operation and one step;
//! * a scatter counts one node operation per walker per node it acts at,
//!   taken over the whole superposition, and does not add two-body depth.

use std::collections::BTreeSet;
use std::ops::Add;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};
use crate::gates::GateDescriptor;
use crate::protocol::{schedule, Snapshot, Stage, Trace};
use crate::walker::{RegisterLayout, Variant};

/// Costs of one (stage, level) slice of a query.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LevelCost {
    pub stage: Stage,
    pub level: Option<u8>,
    pub two_body_ops: u64,
    pub node_ops: u64,
    pub depth: u64,
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct ResourceLedger {
    pub walker_count: u64,
    pub two_body_ops: u64,
    pub node_ops: u64,
    pub depth: u64,
    pub levels: Vec<LevelCost>,
}

impl ResourceLedger {
    /// Ledger of two traces run back to back. Walker counts do not add: the
    /// same register is reused.
    pub fn merge(&self, other: &Self) -> Self {
        let mut levels = self.levels.clone();
        levels.extend(other.levels.iter().copied());
        Self {
            walker_count: self.walker_count.max(other.walker_count),
            two_body_ops: self.two_body_ops + other.two_body_ops,
            node_ops: self.node_ops + other.node_ops,
            depth: self.depth + other.depth,
            levels,
        }
    }
}

impl Add for ResourceLedger {
    type Output = ResourceLedger;

    fn add(self, rhs: Self) -> Self {
        self.merge(&rhs)
    }
}

/// Two-body operations and sequential depth of one gate.
pub fn gate_cost(gate: &GateDescriptor, layout: &RegisterLayout) -> (u64, u64) {
    let (n, m) = (layout.n() as u64, layout.m() as u64);
    match *gate {
        GateDescriptor::ULevel { level, .. } => {
            let chain = n + m - level as u64;
            (chain, chain)
        }
        GateDescriptor::UIn { .. } | GateDescriptor::UBlock { .. } => (1, 1),
        GateDescriptor::CopyGlobal | GateDescriptor::CopySwitch | GateDescriptor::CopyBackup => (m, 1),
        GateDescriptor::SwitchToggle { .. } => (1, 1),
        GateDescriptor::Scatter { .. } | GateDescriptor::ScatterInverse { .. } => (0, 0),
    }
}

/// Node activations of one scatter: distinct (subsystem, node) pairs over
/// all components, since a node acts whenever any branch has a walker there.
fn node_activations(snapshot: &Snapshot) -> u64 {
    let mut seen = BTreeSet::new();
    match snapshot {
        Snapshot::Base(s) => {
            for c in s.keys() {
                for (i, w) in c.walkers().iter().enumerate() {
                    if let Some(node) = w.node() {
                        seen.insert((i, node));
                    }
                }
            }
        }
        // Every subsystem carries a particle in the qudit encodings.
        Snapshot::Qudit(s) | Snapshot::DualRail(s) => {
            for c in s.keys() {
                for (i, w) in c.walkers().iter().enumerate() {
                    seen.insert((i, (w.depth, w.branch)));
                }
            }
        }
    }
    seen.len() as u64
}

/// Count the resources used by a recorded query.
pub fn measure(trace: &Trace) -> Result<ResourceLedger> {
    let layout = trace.config.layout()?;
    let plan = schedule(&trace.config)?;
    let mut ledger = ResourceLedger { walker_count: layout.len() as u64, ..Default::default() };
    let mut k = 0;
    trace.visit_gates(|_, gate, before, _| {
        let sg = plan
            .get(k)
            .filter(|sg| sg.gate == *gate)
            .ok_or_else(|| QramError::Validation(format!("gate {k} ({gate}) does not match the query schedule")))?;
        k += 1;
        let (ops, depth) = gate_cost(gate, &layout);
        let nodes = if gate.is_scatter() { node_activations(before) } else { 0 };
        ledger.two_body_ops += ops;
        ledger.depth += depth;
        ledger.node_ops += nodes;
        match ledger.levels.last_mut() {
            Some(last) if (last.stage, last.level) == (sg.stage, sg.level) => {
                last.two_body_ops += ops;
                last.node_ops += nodes;
                last.depth += depth;
            }
            _ => ledger.levels.push(LevelCost {
                stage: sg.stage,
                level: sg.level,
                two_body_ops: ops,
                node_ops: nodes,
                depth,
            }),
        }
        Ok(())
    })?;
    if k != plan.len() {
        return Err(QramError::Validation(format!("trace holds {k} gates, the query schedule has {}", plan.len())));
    }
    Ok(ledger)
}

/// Gate count of the level hardware over the whole tree, one direction.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Footprint {
    pub nodes: u64,
    pub two_body_gates: u64,
}

/// Per-node chain length at level `d`.
pub fn chain_length(n: u8, m: u8, variant: Variant, d: u8) -> u64 {
    let blocks = (n + m - d) as u64;
    match variant {
        Variant::Standard => blocks,
        Variant::Backup => 1 + blocks,
    }
}

pub fn hardware_footprint(n: u8, m: u8, variant: Variant) -> Result<Footprint> {
    if n == 0 || m == 0 || n > 40 {
        return Err(QramError::Configuration(format!("no footprint for n={n}, m={m}")));
    }
    let two_body_gates = (1..=n).map(|d| (1u64 << (d - 1)) * chain_length(n, m, variant, d)).sum();
    Ok(Footprint { nodes: (1u64 << n) - 1, two_body_gates })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthClass {
    Constant,
    Linear,
    Quadratic,
    Doubling,
    Other,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    /// Least-squares quadratic `c0 + c1 x + c2 x^2`.
    pub coefficients: [f64; 3],
    /// Largest fit error relative to the largest value.
    pub relative_residual: f64,
    /// `log2(y[i+1] / y[i])` for successive points.
    pub log2_ratios: Vec<f64>,
    pub class: GrowthClass,
}

impl ScalingReport {
    pub fn mean_log2_ratio(&self) -> f64 {
        self.log2_ratios.iter().sum::<f64>() / self.log2_ratios.len() as f64
    }

    pub fn last_log2_ratio(&self) -> f64 {
        *self.log2_ratios.last().expect("at least four points")
    }
}

/// Classify the growth of `y` against `x`: quadratic fit quality plus
/// successive doubling ratios.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingReport> {
    if points.len() < 4 {
        return Err(QramError::Validation(format!("scaling fit needs at least 4 points, got {}", points.len())));
    }
    let k = points.len();
    let x = DMatrix::from_fn(k, 3, |i, j| points[i].0.powi(j as i32));
    let y = DVector::from_iterator(k, points.iter().map(|p| p.1));
    let c = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| QramError::Validation(format!("least-squares fit failed: {e}")))?;
    let fitted = &x * &c;
    let scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let worst = (&fitted - &y).amax();
    let relative_residual = if scale > 0.0 { worst / scale } else { worst };
    let log2_ratios: Vec<f64> = points.windows(2).map(|w| (w[1].1 / w[0].1).log2()).collect();

    let spread = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
        - points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let x_max = points.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    let mut report =
        ScalingReport { coefficients: [c[0], c[1], c[2]], relative_residual, log2_ratios, class: GrowthClass::Other };
    let doubling = report.log2_ratios.iter().all(|r| r.is_finite())
        && (report.mean_log2_ratio() - 1.0).abs() <= 0.1
        && (report.last_log2_ratio() - 1.0).abs() <= 0.1;
    report.class = if spread <= 1e-12 * scale.max(1.0) {
        GrowthClass::Constant
    } else if doubling {
        GrowthClass::Doubling
    } else if relative_residual < 0.01 && c[2].abs() * x_max * x_max >= 0.01 * scale {
        GrowthClass::Quadratic
    } else if relative_residual < 0.01 {
        GrowthClass::Linear
    } else {
        GrowthClass::Other
    };
    Ok(report)
}

/// One row of the published resource comparison, carried verbatim.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct ReferenceScaling {
    pub model: &'static str,
    pub particles: &'static str,
    pub circuit_depth: &'static str,
    pub binary_trees: &'static str,
    pub two_qubit_gates_classical: &'static str,
    pub two_qubit_gates_superposition: &'static str,
    pub node_ops_classical: &'static str,
    pub node_ops_superposition: &'static str,
}

pub const REFERENCE_SCALINGS: [ReferenceScaling; 3] = [
    ReferenceScaling {
        model: "bucket-brigade",
        particles: "2^n-1 qutrits, n+m qubits",
        circuit_depth: "O(n^2+nm)",
        binary_trees: "1",
        two_qubit_gates_classical: "O(n^2+nm)",
        two_qubit_gates_superposition: "O((n+m)2^n)",
        node_ops_classical: "-",
        node_ops_superposition: "-",
    },
    ReferenceScaling {
        model: "multi-tree walker",
        particles: "n+m qubits",
        circuit_depth: "O(n^2+nm)",
        binary_trees: "2(n+m)",
        two_qubit_gates_classical: "O(n^2+nm)",
        two_qubit_gates_superposition: "O((n+m)2^n)",
        node_ops_classical: "O(n^2+nm)",
        node_ops_superposition: "O((n+m)2^n)",
    },
    ReferenceScaling {
        model: "single-tree walker (this crate)",
        particles: "O(n+m) qubits",
        circuit_depth: "O(n^2+nm)",
        binary_trees: "1",
        two_qubit_gates_classical: "O(n^2+nm)",
        two_qubit_gates_superposition: "O((n+m)2^n)",
        node_ops_classical: "O(n^2+nm)",
        node_ops_superposition: "O((n+m)2^n)",
    },
];

/// The multi-tree depth drops to `O(n log(n+m))` when long-range gates are allowed.
pub const REFERENCE_NOTE: &str =
    "multi-tree walker depth assumes short-range gates; with long-range gates it becomes O(n log(n+m))";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::MemoryBank;
    use crate::protocol::{run_query, Granularity, ProtocolConfig};
    use crate::walker::{Bits, QueryTerm};

    fn classical(config: &ProtocolConfig, address: &str) -> Trace {
        let bank = MemoryBank::zeros(config.n, config.m).unwrap();
        let terms = [QueryTerm::classical(address.parse::<Bits>().unwrap())];
        run_query(config, &bank, &terms).unwrap().trace
    }

    #[test]
    fn routing_ops_for_two_address_bits() {
        let config = ProtocolConfig::standard(2, 1).unwrap();
        let ledger = measure(&classical(&config, "10")).unwrap();
        let routing: u64 = ledger.levels.iter().filter(|l| l.stage != Stage::Copy).map(|l| l.two_body_ops).sum();
        assert_eq!(routing, 6);
        assert_eq!(ledger.two_body_ops, 6 + 1);
        assert_eq!(ledger.depth, 6 + 1);
        assert_eq!(ledger.walker_count, 4);
    }

    #[test]
    fn backup_level_one_with_one_bit_each() {
        let config = ProtocolConfig::backup(1, 1).unwrap();
        let ledger = measure(&classical(&config, "1")).unwrap();
        let forward = ledger.levels.iter().find(|l| l.stage == Stage::Routing).unwrap();
        assert_eq!(forward.two_body_ops, 2);
        assert_eq!(measure(&classical(&ProtocolConfig::backup(3, 2).unwrap(), "101")).unwrap().walker_count, 9);
    }

    #[test]
    fn granularity_does_not_change_the_count() {
        let config = ProtocolConfig::switch(3, 2).unwrap();
        let fine = measure(&classical(&config, "110")).unwrap();
        for g in [Granularity::Level, Granularity::Stage] {
            let coarse = measure(&classical(&config.with_snapshots(g), "110")).unwrap();
            assert_eq!(coarse, fine);
        }
    }

    #[test]
    fn merge_is_additive() {
        let config = ProtocolConfig::standard(2, 2).unwrap();
        let a = measure(&classical(&config, "01")).unwrap();
        let b = measure(&classical(&config, "11")).unwrap();
        let sum = a.clone() + b.clone();
        assert_eq!(sum.two_body_ops, a.two_body_ops + b.two_body_ops);
        assert_eq!(sum.node_ops, a.node_ops + b.node_ops);
        assert_eq!(sum.depth, a.depth + b.depth);
        assert_eq!(sum.levels.len(), a.levels.len() + b.levels.len());
    }

    #[test]
    fn superposition_node_ops_double_per_address_bit() {
        let mut counts = Vec::new();
        for n in 2..=6 {
            let config = ProtocolConfig::standard(n, 1).unwrap().with_snapshots(Granularity::Stage);
            let bank = MemoryBank::zeros(n, 1).unwrap();
            let trace = run_query(&config, &bank, &QueryTerm::uniform(n).unwrap()).unwrap().trace;
            counts.push((n as f64, measure(&trace).unwrap().node_ops as f64));
        }
        let r = scaling_fit(&counts).unwrap();
        assert!(r.log2_ratios.iter().all(|x| *x > 0.8 && *x < 1.5), "{r:?}");
        let classical = measure(&classical(&ProtocolConfig::standard(2, 1).unwrap(), "10")).unwrap();
        // Three walkers at each forward level (A2 is empty); the zero bank
        // empties D1, leaving two on each return level.
        assert_eq!(classical.node_ops, 10);
    }

    #[test]
    fn footprints() {
        assert_eq!(hardware_footprint(3, 2, Variant::Standard).unwrap().two_body_gates, 18);
        assert_eq!(hardware_footprint(1, 1, Variant::Standard).unwrap().two_body_gates, 1);
        assert_eq!(hardware_footprint(3, 2, Variant::Standard).unwrap().nodes, 7);
        for n in 8..20 {
            let a = hardware_footprint(n, 2, Variant::Standard).unwrap().two_body_gates as f64;
            let b = hardware_footprint(n + 1, 2, Variant::Standard).unwrap().two_body_gates as f64;
            assert!((b / a - 2.0).abs() < 0.2);
        }
    }

    #[test]
    fn fit_classes() {
        let quad: Vec<(f64, f64)> = (2..=8).map(|n| (n as f64, (n * n + n + 1) as f64)).collect();
        let r = scaling_fit(&quad).unwrap();
        assert_eq!(r.class, GrowthClass::Quadratic);
        assert!(r.relative_residual < 1e-9);
        let flat: Vec<(f64, f64)> = (0..5).map(|n| (n as f64, 3.0)).collect();
        assert_eq!(scaling_fit(&flat).unwrap().class, GrowthClass::Constant);
        let exp: Vec<(f64, f64)> = (4..=10).map(|n| (n as f64, 2f64.powi(n))).collect();
        let r = scaling_fit(&exp).unwrap();
        assert_eq!(r.class, GrowthClass::Doubling);
        assert!(r.log2_ratios.iter().all(|x| (x - 1.0).abs() < 1e-12));
        let line: Vec<(f64, f64)> = (0..6).map(|n| (n as f64, 2.0 * n as f64 + 1.0)).collect();
        assert_eq!(scaling_fit(&line).unwrap().class, GrowthClass::Linear);
        assert!(scaling_fit(&quad[..3]).is_err());
    }
}
