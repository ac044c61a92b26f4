//! Writes a synthetic meta-unit library CSV.
//!
//! cargo run --release --example synth_library -- <steps> <out.csv>

use std::path::PathBuf;
use std::process::ExitCode;

use metanet::metasurface::synth_library;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (steps, out) = match args.as_slice() {
        [s, o] => match s.parse::<usize>() {
            Ok(s) => (s, PathBuf::from(o)),
            Err(_) => {
                eprintln!("steps must be a positive integer, got {s}");
                return ExitCode::from(2);
            }
        },
        _ => {
            eprintln!("usage: synth_library <steps> <out.csv>");
            return ExitCode::from(2);
        }
    };
    match synth_library(steps).and_then(|lib| lib.save(&out)) {
        Ok(()) => {
            println!("{} entries written to {}", steps * steps, out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
