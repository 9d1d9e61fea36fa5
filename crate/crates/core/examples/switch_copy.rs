//! Copy through per-cell switches: the flag arms the cell it reaches, the
//! writer copies into armed cells, the terminator disarms.

use walker_qram::memory::MemoryBank;
use walker_qram::protocol::{run_query, ProtocolConfig, Stage};
use walker_qram::walker::{Bits, QueryTerm};

fn main() -> walker_qram::Result<()> {
    let config = ProtocolConfig::switch(2, 1)?;
    let layout = config.layout()?;
    let bank = MemoryBank::from_fn(2, 1, |a| Bits::new(a & 1, 1).expect("one bit"))?;
    let query = QueryTerm::uniform(2)?;
    let outcome = run_query(&config, &bank, &query)?;
    for step in outcome.trace.steps.iter().filter(|s| s.stage == Stage::Copy) {
        println!("after {}:", step.gates[0]);
        for (ket, _) in step.snapshot.render(&layout) {
            println!("  {ket}");
        }
    }
    for t in &outcome.output {
        println!("{} -> {}", t.address, t.message);
    }
    Ok(())
}
