//! Print a scenario's workflow trace and report.
//!
//! cargo run --example trace -- scenarios/twohop.json

use freightledger::sim::{run, Scenario};

fn main() {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: trace SCENARIO.json");
        std::process::exit(2);
    };
    let out = Scenario::from_path(path.as_ref()).and_then(|s| run(&s));
    match out {
        Ok(out) => {
            for line in &out.trace {
                println!("{line}");
            }
            println!("{}", out.report);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
