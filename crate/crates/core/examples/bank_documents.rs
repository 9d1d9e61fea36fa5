//! Bank, query and trace documents: write them, read them back, replay.

use std::path::Path;

use walker_qram::documents::{load_query, load_trace, store_trace};
use walker_qram::memory::load_bank;
use walker_qram::protocol::{run_query, ProtocolConfig};

fn main() -> walker_qram::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let read = |name: &str| std::fs::read_to_string(data.join(name)).map_err(walker_qram::QramError::from);
    let bank = load_bank(&read("entangled.bank.json")?)?;
    let query = load_query(&read("entangled.query.json")?)?;
    println!("bank {:016x}, {} query terms", bank.checksum(), query.len());

    let config = ProtocolConfig::standard(bank.n(), bank.m())?;
    let trace = run_query(&config, &bank, &query)?.trace;
    let text = store_trace(&trace)?;
    println!("trace document: {} bytes, {} steps", text.len(), trace.steps.len());
    let back = load_trace(&text)?;
    println!("round trip identical: {}", back == trace);
    println!("replay mismatches: {:?}", back.replay()?);
    Ok(())
}
