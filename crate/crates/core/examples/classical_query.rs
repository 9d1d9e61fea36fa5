//! One classical address through the standard protocol, printing every
//! intermediate state.

use walker_qram::golden::classical_case;
use walker_qram::protocol::run_query;

fn main() -> walker_qram::Result<()> {
    let case = classical_case()?;
    let layout = case.config.layout()?;
    let outcome = run_query(&case.config, &case.bank, &case.query)?;
    for (i, step) in outcome.trace.steps.iter().enumerate() {
        let gates: Vec<String> = step.gates.iter().map(|g| g.to_string()).collect();
        for (ket, amp) in step.snapshot.render(&layout) {
            println!("{i:>2} {:<14} {:+.3} {ket}", gates.join(" "), amp.re);
        }
    }
    for t in &outcome.output {
        println!("address {} -> message {} (amplitude {})", t.address, t.message, t.amplitude);
    }
    Ok(())
}
