//! Runs simulate, train, evaluate and curves into a temporary directory
//! and prints the RMAE table. Equivalent to `credit-response run`.
use credit_response::pipeline::{format_table, run_all, RunConfig};

fn main() -> credit_response::Result<()> {
    let out = std::env::temp_dir().join("credit-response-example");
    let cfg = RunConfig {
        output: out.clone(),
        ..Default::default()
    };
    let rows = run_all(&cfg)?;
    print!("{}", format_table(&rows));
    println!("outputs in {}", out.display());
    Ok(())
}
