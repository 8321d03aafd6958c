//! Toy ideal-gas equation of state: prints `V = N * kT / p`.

use std::env;
use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = env::args().skip(1).collect();
    let parsed: Result<Vec<f64>, _> = args.iter().map(|a| a.parse::<f64>()).collect();
    match parsed.as_deref() {
        Ok([n, kt, p]) if *p != 0.0 => {
            println!("{:?}", n * kt / p);
            ExitCode::SUCCESS
        }
        _ => {
            eprintln!("usage: idg N kT p   (numbers, p != 0)");
            ExitCode::from(2)
        }
    }
}
