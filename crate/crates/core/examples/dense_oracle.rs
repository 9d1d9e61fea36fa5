//! Brute-force check of a small register: enumerate what the protocol can
//! reach, build every gate as a dense matrix, check it is a permutation.

use walker_qram::memory::MemoryBank;
use walker_qram::oracle::{
    check_query, enumerate_reachable, permutation_order, single_walker_scatter, verify_unitarity,
};
use walker_qram::protocol::ProtocolConfig;

fn main() -> walker_qram::Result<()> {
    for inverse in [false, true] {
        let g = single_walker_scatter(inverse)?;
        println!("{}: 8 single-walker states, order {:?}", g.gate, permutation_order(&g.matrix, 64));
    }

    let config = ProtocolConfig::backup(2, 1)?;
    let space = enumerate_reachable(&config)?;
    println!("reachable configurations: {}", space.len());
    let banks: Vec<MemoryBank> = (0..16).map(|i| MemoryBank::from_index(2, 1, i)).collect::<Result<_, _>>()?;
    let report = verify_unitarity(&config, &banks)?;
    for g in report.gates.iter().filter(|g| g.bank.unwrap_or(0) == 0) {
        println!(
            "{:<12} dim {:>4} (+{} completions) permutation {} mismatches {}",
            g.gate, g.unitarity.dimension, g.completions, g.unitarity.permutation, g.sparse_mismatches
        );
    }
    let q = check_query(&config, &banks[5])?;
    println!("composed query: deviation {:e}, retrieves bank: {}", q.unitarity_deviation, q.contract_holds);
    println!("all checks pass: {}", report.passed());
    Ok(())
}
