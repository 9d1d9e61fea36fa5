//! The backup register: level gates decomposed into nearest-neighbour
//! blocks, at the cost of one extra walker per address and data bit.

use walker_qram::memory::MemoryBank;
use walker_qram::protocol::{execute, schedule, ProtocolConfig, Stage};
use walker_qram::walker::{Bits, QueryTerm};

fn main() -> walker_qram::Result<()> {
    let (n, m) = (3, 2);
    let config = ProtocolConfig::backup(n, m)?;
    let layout = config.layout()?;
    let order: Vec<String> = layout.subsystems().iter().map(|s| s.to_string()).collect();
    println!("{} walkers: {}", layout.len(), order.join(" "));

    for level in 1..=n {
        let gates: Vec<String> = schedule(&config)?
            .iter()
            .filter(|s| s.stage == Stage::Routing && s.level == Some(level))
            .map(|s| s.gate.to_string())
            .collect();
        println!("level {level}: {}", gates.join(" "));
    }

    let bank = MemoryBank::from_fn(n, m, |a| Bits::new(a % 4, m).expect("two bits"))?;
    let standard = ProtocolConfig::standard(n, m)?;
    for a in 0..8 {
        let q = [QueryTerm::classical(Bits::new(a, n)?)];
        let (b, s) = (execute(&config, &bank, &q)?, execute(&standard, &bank, &q)?);
        println!("{} -> {} (standard agrees: {})", q[0].address, b[0].message, b == s);
    }
    Ok(())
}
