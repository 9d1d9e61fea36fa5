//! The same query in the qudit and dual-rail encodings, and the per-step
//! commutation with the base encoding.

use walker_qram::encodings::{check_commutation, level_steps};
use walker_qram::golden::classical_case;
use walker_qram::protocol::{run_query, schedule, Encoding};
use walker_qram::walker::encode_address;

fn main() -> walker_qram::Result<()> {
    let case = classical_case()?;
    let layout = case.config.layout()?;
    for encoding in [Encoding::Qudit, Encoding::DualRail] {
        let config = case.config.with_encoding(encoding)?;
        let outcome = run_query(&config, &case.bank, &case.query)?;
        println!("{encoding:?}");
        for (ket, _) in outcome.trace.input().render(&layout) {
            println!("  in  {ket}");
        }
        for (ket, _) in outcome.trace.output().render(&layout) {
            println!("  out {ket}");
        }
        let t = &outcome.output[0];
        println!("  decoded ({}, {})", t.address, t.message);
    }

    let gates: Vec<_> = schedule(&case.config)?.into_iter().map(|s| s.gate).collect();
    let mut cfg = encode_address(case.query[0].address, &layout)?;
    for step in level_steps(&gates) {
        let c = check_commutation(&cfg, &layout, &case.bank, &step)?;
        let names: Vec<String> = step.iter().map(|g| g.to_string()).collect();
        println!("{:<16} commutes: {}", names.join(" "), c.commutes && c.positions_agree);
        cfg = c.base_out;
    }
    Ok(())
}
