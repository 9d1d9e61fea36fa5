//! Address walkers that turn off the data path rejoin it at the mirrored
//! level on the way back.

use walker_qram::memory::MemoryBank;
use walker_qram::protocol::{run_query, verify_recollection, ProtocolConfig};
use walker_qram::walker::QueryTerm;

fn main() -> walker_qram::Result<()> {
    let config = ProtocolConfig::standard(3, 1)?;
    let bank = MemoryBank::zeros(3, 1)?;
    let trace = run_query(&config, &bank, &QueryTerm::uniform(3)?)?.trace;
    let report = verify_recollection(&trace)?;
    for i in &report.intervals {
        println!(
            "address {}: {} left at level {}, rejoined at level {}",
            i.address, i.walker, i.left_at_level, i.rejoined_at_level
        );
    }
    println!("{} checks, {} violations", report.checks, report.violations.len());
    Ok(())
}
