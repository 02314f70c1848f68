use std::process::ExitCode;

use tikflow::verify::{run_criterion, selected, VerifyOptions};

fn main() -> ExitCode {
    let quick = std::env::args().any(|a| a == "--quick");
    let opts = match VerifyOptions::from_env(quick) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let mut failed = 0;
    for id in selected(&opts) {
        let r = run_criterion(id, &opts);
        println!("{}", r.summary());
        for line in &r.lines {
            println!("        {line}");
        }
        if !r.passed {
            failed += 1;
        }
    }
    println!("acceptance: {failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
