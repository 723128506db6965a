//! Minimal end-to-end usage: optimize the built-in Branin function with
//! the hierarchical criterion and print the trace summary.

use hei_core::{bench, run_bo, Method, RunConfig};

fn main() {
    let func = bench::branin();
    let config = RunConfig::for_method(Method::HeiDsd, func.domain().clone(), 2024);
    let mut objective = func.objective();

    let start = std::time::Instant::now();
    let trace = run_bo(&config, &mut objective).expect("run completes");
    let elapsed = start.elapsed();

    println!(
        "{} evaluations in {:.2?} (trend order {:?})",
        trace.records.len(),
        elapsed,
        trace.trend_order
    );
    println!("best y = {:.9} at {:?}", trace.best_y, trace.best_x);
    println!("gap to known minimum = {:.3e}", trace.best_y - func.f_min());
    for w in &trace.warnings {
        println!("warning: {w}");
    }
}
