//! Reference external objective speaking the line protocol: each stdin
//! line carries one point as space-separated coordinates; each reply line
//! is the objective value. Serves a built-in function (default camel3).
//!
//! Usage: hei-objective-demo [function-name]

use std::io::{BufRead, Write};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "camel3".to_string());
    let function = match hei_core::builtin(&name) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in stdin.lock().lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        if line.trim().is_empty() {
            continue;
        }
        let point: Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let value = match point {
            Ok(x) if x.len() == function.dim() => function.eval(&x),
            _ => {
                eprintln!("error: expected {} numbers, got `{line}`", function.dim());
                std::process::exit(2);
            }
        };
        match value {
            Ok(y) => {
                if writeln!(out, "{y}").and_then(|_| out.flush()).is_err() {
                    break;
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                std::process::exit(2);
            }
        }
    }
}
