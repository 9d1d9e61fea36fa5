//! Resource counts for growing address widths and their fitted growth.

use walker_qram::memory::MemoryBank;
use walker_qram::protocol::{run_query, Granularity, ProtocolConfig};
use walker_qram::resources::{hardware_footprint, measure, scaling_fit, REFERENCE_SCALINGS};
use walker_qram::walker::{Bits, QueryTerm, Variant};

fn main() -> walker_qram::Result<()> {
    let m = 1;
    let mut depth = Vec::new();
    let mut footprint = Vec::new();
    println!(" n  walkers  ops  depth  footprint");
    for n in 2..=10u8 {
        let config = ProtocolConfig::backup(n, m)?.with_snapshots(Granularity::Stage);
        let q = [QueryTerm::classical(Bits::ones(n))];
        let ledger = measure(&run_query(&config, &MemoryBank::zeros(n, m)?, &q)?.trace)?;
        let fp = hardware_footprint(n, m, Variant::Backup)?;
        println!(
            "{n:>2} {:>8} {:>4} {:>6} {:>10}",
            ledger.walker_count, ledger.two_body_ops, ledger.depth, fp.two_body_gates
        );
        depth.push((n as f64, ledger.depth as f64));
        footprint.push((n as f64, fp.two_body_gates as f64));
    }
    let d = scaling_fit(&depth)?;
    println!(
        "depth: {:?}, {:.2} + {:.2} n + {:.2} n^2",
        d.class, d.coefficients[0], d.coefficients[1], d.coefficients[2]
    );
    let f = scaling_fit(&footprint[2..])?;
    println!("footprint (n >= 4): {:?}, last log2 ratio {:.3}", f.class, f.last_log2_ratio());
    for r in REFERENCE_SCALINGS {
        println!("{:<32} depth {}, trees {}", r.model, r.circuit_depth, r.binary_trees);
    }
    Ok(())
}
