//! Replication-suite probe: runs the benchmark protocol on the two
//! 2-dimensional built-ins and prints final-iteration gap summaries.

use hei_core::bench::{run_suite, SuiteEntry};
use hei_core::{bench, Method, RunConfig};

fn entries(methods: &[Method], domain: &hei_core::Domain, seed: u64) -> Vec<SuiteEntry> {
    methods
        .iter()
        .map(|&m| {
            let mut cfg = RunConfig::for_method(m, domain.clone(), seed);
            cfg.n_ini = 20;
            cfg.n_tot = 120;
            SuiteEntry { label: m.name().to_string(), config: cfg }
        })
        .collect()
}

fn main() {
    let reps = 20;
    for (func, methods) in [
        (
            bench::branin(),
            vec![Method::EiOk, Method::UcbOk, Method::HeiWeak, Method::HeiMmap, Method::HeiDsd],
        ),
        (
            bench::camel3(),
            vec![Method::EiOk, Method::HeiWeak, Method::HeiMmap, Method::HeiDsd],
        ),
    ] {
        let start = std::time::Instant::now();
        let es = entries(&methods, func.domain(), 20240801);
        let result = run_suite(&func, &es, reps, 1).expect("suite completes");
        println!("== {} ({:.1?}) ==", func.name(), start.elapsed());
        for e in &es {
            let rows = result.rows_for(&e.label);
            let last = rows.last().expect("rows exist");
            println!(
                "{:10} final mean gap {:.6e}  median {:.6e}  mean log10 {:+.3}  n_ok {}",
                e.label, last.mean_gap, last.median_gap, last.mean_log10_gap, last.n_ok
            );
        }
    }
}
