//! A two-term address superposition: each branch picks up its own cell.

use walker_qram::golden::entangled_case;
use walker_qram::protocol::{run_query, Stage};

fn main() -> walker_qram::Result<()> {
    let case = entangled_case()?;
    let layout = case.config.layout()?;
    let outcome = run_query(&case.config, &case.bank, &case.query)?;
    for step in outcome.trace.steps.iter().filter(|s| matches!(s.stage, Stage::Input | Stage::Copy)) {
        println!("{:?}:", step.stage);
        for (ket, amp) in step.snapshot.render(&layout) {
            println!("  {:+.4} {ket}", amp.re);
        }
    }
    for t in &outcome.output {
        println!("({}, {}, {:.6})", t.address, t.message, t.amplitude.re);
    }
    Ok(())
}
