//! Built-in test functions with known minima, replication suites with
//! per-iteration optimality-gap tables, and the stability-ratio diagnostic.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use crate::design::Domain;
use crate::driver::{run_bo, RunConfig, RunTrace};
use crate::error::{Error, Result};

/// How a built-in minimum value was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FminProvenance {
    /// Exact cancellation at a known minimizer.
    Analytic,
    /// Dense grid or quasi-random search plus local refinement.
    Numerical,
}

impl std::fmt::Display for FminProvenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FminProvenance::Analytic => write!(f, "analytic"),
            FminProvenance::Numerical => write!(f, "grid+refinement"),
        }
    }
}

/// A benchmark objective with its domain and known minimum.
#[derive(Debug, Clone)]
pub struct TestFunction {
    name: &'static str,
    domain: Domain,
    f_min: f64,
    minimizers: Vec<Vec<f64>>,
    provenance: FminProvenance,
    f: fn(&[f64]) -> f64,
}

impl TestFunction {
    fn new(
        name: &'static str,
        domain: Domain,
        minimizers: Vec<Vec<f64>>,
        provenance: FminProvenance,
        f: fn(&[f64]) -> f64,
    ) -> Self {
        // Evaluating at the stated minimizer keeps f_min bit-consistent
        // with this build's arithmetic.
        let f_min = f(&minimizers[0]);
        TestFunction { name, domain, f_min, minimizers, provenance, f }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// The known minimum value over the domain.
    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn minimizers(&self) -> &[Vec<f64>] {
        &self.minimizers
    }

    pub fn provenance(&self) -> FminProvenance {
        self.provenance
    }

    /// Evaluate with dimension and domain checks. Points may exceed the
    /// box by a relative sliver to absorb affine-scaling round-off.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let inside = x.iter().enumerate().all(|(j, &v)| {
            let (lo, hi) = (self.domain.lower()[j], self.domain.upper()[j]);
            let slack = 1e-12 * (hi - lo);
            v >= lo - slack && v <= hi + slack
        });
        if !inside {
            return Err(Error::invalid(format!(
                "point {x:?} lies outside the {} domain",
                self.name
            )));
        }
        Ok((self.f)(x))
    }

    /// The raw evaluator as an objective closure for the run loop, which
    /// only ever queries inside the domain by construction.
    pub fn objective(&self) -> impl FnMut(&[f64]) -> f64 + '_ {
        |x: &[f64]| (self.f)(x)
    }
}

fn eval_branin(x: &[f64]) -> f64 {
    let pi = std::f64::consts::PI;
    let (x1, x2) = (x[0], x[1]);
    let u = x2 - 5.1 / (4.0 * pi * pi) * x1 * x1 + 5.0 / pi * x1 - 6.0;
    u * u + 10.0 * (1.0 - 1.0 / (8.0 * pi)) * x1.cos() + 10.0
}

fn eval_camel3(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    2.0 * x1 * x1 - 1.05 * x1.powi(4) + x1.powi(6) / 6.0 + x1 * x2 + x2 * x2
}

fn eval_camel6(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    (4.0 - 2.1 * x1 * x1 + x1.powi(4) / 3.0) * x1 * x1
        + x1 * x2
        + (-4.0 + 4.0 * x2 * x2) * x2 * x2
}

fn eval_levy6(x: &[f64]) -> f64 {
    let pi = std::f64::consts::PI;
    let w: Vec<f64> = x.iter().map(|&v| 1.0 + (v - 1.0) / 4.0).collect();
    let mut f = (pi * w[0]).sin().powi(2);
    for i in 0..5 {
        let t = (pi * w[i] + 1.0).sin();
        f += (w[i] - 1.0).powi(2) * (1.0 + 10.0 * t * t);
    }
    let t = (2.0 * pi * w[5]).sin();
    f + (w[5] - 1.0).powi(2) * (1.0 + t * t)
}

fn eval_ackley10(x: &[f64]) -> f64 {
    let pi = std::f64::consts::PI;
    let norm = x.iter().map(|&v| v * v).sum::<f64>().sqrt();
    let cosmean = x.iter().map(|&v| (2.0 * pi * v).cos()).sum::<f64>() / 10.0;
    // Grouped so both exponential terms cancel exactly at the origin.
    (20.0 - 20.0 * (-0.2 / 10f64.sqrt() * norm).exp()) + (std::f64::consts::E - cosmean.exp())
}

/// The two-dimensional multimodal benchmark on the unit square.
pub fn branin() -> TestFunction {
    TestFunction::new(
        "branin",
        Domain::new(vec![0.0, 0.0], vec![1.0, 1.0]).expect("static bounds"),
        vec![vec![1.0, 1.0]],
        FminProvenance::Numerical,
        eval_branin,
    )
}

/// Three-hump camel on `[-2, 2]^2`.
pub fn camel3() -> TestFunction {
    TestFunction::new(
        "camel3",
        Domain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).expect("static bounds"),
        vec![vec![0.0, 0.0]],
        FminProvenance::Analytic,
        eval_camel3,
    )
}

/// Six-hump camel on `[-2, 2]^2`.
pub fn camel6() -> TestFunction {
    TestFunction::new(
        "camel6",
        Domain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).expect("static bounds"),
        vec![
            vec![0.08984201181742917, -0.7126564056224669],
            vec![-0.08984201181742917, 0.7126564056224669],
        ],
        FminProvenance::Numerical,
        eval_camel6,
    )
}

/// Six-dimensional Levy function on `[-10, 10]^6`.
pub fn levy6() -> TestFunction {
    TestFunction::new(
        "levy6",
        Domain::new(vec![-10.0; 6], vec![10.0; 6]).expect("static bounds"),
        vec![vec![1.0; 6]],
        FminProvenance::Analytic,
        eval_levy6,
    )
}

/// Ten-dimensional Ackley function on `[-5, 5]^10`.
pub fn ackley10() -> TestFunction {
    TestFunction::new(
        "ackley10",
        Domain::new(vec![-5.0; 10], vec![5.0; 10]).expect("static bounds"),
        vec![vec![0.0; 10]],
        FminProvenance::Analytic,
        eval_ackley10,
    )
}

/// Look up a built-in function by name.
pub fn builtin(name: &str) -> Result<TestFunction> {
    all_builtins()
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| {
            let names: Vec<&str> = all_builtins().iter().map(|f| f.name).collect();
            Error::invalid(format!(
                "unknown test function '{name}'; expected one of {}",
                names.join(", ")
            ))
        })
}

pub fn all_builtins() -> Vec<TestFunction> {
    vec![branin(), camel3(), camel6(), levy6(), ackley10()]
}

/// Seed for replication `r` of a suite entry with base seed `base`.
pub fn derived_seed(base: u64, replication: usize) -> u64 {
    base.wrapping_add((replication as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One labeled method configuration inside a suite.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub label: String,
    pub config: RunConfig,
}

/// Outcome of a single replication.
#[derive(Debug, Clone)]
pub struct ReplicationStatus {
    pub label: String,
    /// Zero-based replication index.
    pub replication: usize,
    pub seed: u64,
    /// None on success.
    pub error: Option<String>,
}

/// Per-method, per-iteration summary of the optimality gap over the
/// successful replications.
#[derive(Debug, Clone)]
pub struct GapRow {
    pub label: String,
    /// 1-based, counting the initial design.
    pub iteration: usize,
    pub mean_gap: f64,
    pub median_gap: f64,
    pub mean_log10_gap: f64,
    pub median_log10_gap: f64,
    /// Successful replications contributing to this row.
    pub n_ok: usize,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub rows: Vec<GapRow>,
    pub statuses: Vec<ReplicationStatus>,
}

impl SuiteResult {
    /// Rows for one label, ordered by iteration.
    pub fn rows_for(&self, label: &str) -> Vec<&GapRow> {
        self.rows.iter().filter(|r| r.label == label).collect()
    }

    /// Successful / total replication counts per entry label, in entry
    /// order.
    pub fn success_counts(&self) -> Vec<(String, usize, usize)> {
        let mut out: Vec<(String, usize, usize)> = Vec::new();
        for st in &self.statuses {
            match out.iter_mut().find(|(l, _, _)| *l == st.label) {
                Some((_, ok, total)) => {
                    *total += 1;
                    if st.error.is_none() {
                        *ok += 1;
                    }
                }
                None => out.push((
                    st.label.clone(),
                    usize::from(st.error.is_none()),
                    1,
                )),
            }
        }
        out
    }
}

/// Floor applied to gaps before taking logs.
const GAP_LOG_FLOOR: f64 = 1e-300;

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Run every entry for `replications` independent repetitions (replication
/// `r` of an entry uses [`derived_seed`] of the entry's configured seed)
/// and summarize the per-iteration optimality gap `best_y - f_min`.
/// Replications execute on up to `workers` threads; the table is
/// assembled in deterministic (entry, replication, iteration) order.
pub fn run_suite(
    function: &TestFunction,
    entries: &[SuiteEntry],
    replications: usize,
    workers: usize,
) -> Result<SuiteResult> {
    if entries.is_empty() {
        return Err(Error::invalid("suite needs at least one method entry"));
    }
    if replications == 0 {
        return Err(Error::invalid("suite needs at least one replication"));
    }
    for e in entries {
        if e.config.domain != *function.domain() {
            return Err(Error::invalid(format!(
                "entry '{}' is configured on a different domain than {}",
                e.label,
                function.name()
            )));
        }
        e.config.validate()?;
    }

    struct Job {
        entry: usize,
        rep: usize,
        seed: u64,
    }
    let jobs: Vec<Job> = (0..entries.len())
        .flat_map(|entry| {
            (0..replications).map(move |rep| Job { entry, rep, seed: 0 })
        })
        .map(|mut j| {
            j.seed = derived_seed(entries[j.entry].config.seed, j.rep);
            j
        })
        .collect();

    let workers = workers.clamp(1, jobs.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, std::result::Result<Vec<f64>, String>)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let jobs = &jobs;
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= jobs.len() {
                    break;
                }
                let job = &jobs[k];
                let mut cfg = entries[job.entry].config.clone();
                cfg.seed = job.seed;
                let mut obj = function.objective();
                let outcome = match run_bo(&cfg, &mut obj) {
                    Ok(trace) => Ok(trace.records.iter().map(|r| r.best_y).collect()),
                    Err(e) => Err(e.to_string()),
                };
                let _ = tx.send((k, outcome));
            });
        }
    });
    drop(tx);

    let mut slots: Vec<Option<std::result::Result<Vec<f64>, String>>> =
        (0..jobs.len()).map(|_| None).collect();
    for (k, outcome) in rx {
        slots[k] = Some(outcome);
    }

    let f_min = function.f_min();
    let mut statuses = Vec::with_capacity(jobs.len());
    let mut rows = Vec::new();
    for (entry_idx, entry) in entries.iter().enumerate() {
        let mut ok_traces: Vec<&Vec<f64>> = Vec::new();
        for rep in 0..replications {
            let k = entry_idx * replications + rep;
            let outcome = slots[k].as_ref().expect("every job reports");
            statuses.push(ReplicationStatus {
                label: entry.label.clone(),
                replication: rep,
                seed: jobs[k].seed,
                error: outcome.as_ref().err().cloned(),
            });
            if let Ok(trace) = outcome {
                ok_traces.push(trace);
            }
        }
        if ok_traces.is_empty() {
            continue;
        }
        let n_iter = ok_traces.iter().map(|t| t.len()).min().unwrap();
        for it in 0..n_iter {
            let mut gaps: Vec<f64> =
                ok_traces.iter().map(|t| (t[it] - f_min).max(0.0)).collect();
            let mut logs: Vec<f64> =
                gaps.iter().map(|&g| g.max(GAP_LOG_FLOOR).log10()).collect();
            gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            logs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let k = gaps.len() as f64;
            rows.push(GapRow {
                label: entry.label.clone(),
                iteration: it + 1,
                mean_gap: gaps.iter().sum::<f64>() / k,
                median_gap: median_of(&gaps),
                mean_log10_gap: logs.iter().sum::<f64>() / k,
                median_log10_gap: median_of(&logs),
                n_ok: gaps.len(),
            });
        }
    }
    Ok(SuiteResult { rows, statuses })
}

/// One point of the stability diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct StabilityPoint {
    /// 1-based iteration the chosen point was evaluated at.
    pub iteration: usize,
    /// Natural log of `s_n(x_next) / s_max_est`.
    pub log_ratio: f64,
    /// The iteration used the epsilon-greedy uniform draw.
    pub eps_draw: bool,
}

/// Per-iteration log-ratio of the chosen point's predictive deviation to
/// the estimated maximum deviation. Initial-design records carry no
/// diagnostics and are skipped; a trace with none at all is an error.
pub fn stability_trace(trace: &RunTrace) -> Result<Vec<StabilityPoint>> {
    let pts: Vec<StabilityPoint> = trace
        .records
        .iter()
        .filter_map(|r| match (r.s_next, r.s_max_est) {
            (Some(s), Some(m)) => Some(StabilityPoint {
                iteration: r.iteration,
                log_ratio: (s / m).ln(),
                eps_draw: r.eps_draw,
            }),
            _ => None,
        })
        .collect();
    if pts.is_empty() {
        return Err(Error::invalid(
            "trace records no predictive-deviation diagnostics (initial design only?)",
        ));
    }
    Ok(pts)
}

/// Coordinate-descent minimization of a raw evaluator inside a box.
fn compass_min(
    f: fn(&[f64]) -> f64,
    domain: &Domain,
    mut x: Vec<f64>,
    mut val: f64,
    step_frac: f64,
    tol_frac: f64,
) -> (Vec<f64>, f64) {
    let d = domain.dim();
    let ranges: Vec<f64> =
        (0..d).map(|j| domain.upper()[j] - domain.lower()[j]).collect();
    let mut step = step_frac;
    while step > tol_frac {
        let mut moved = false;
        for c in 0..d {
            for sgn in [1.0, -1.0] {
                let nc = (x[c] + sgn * step * ranges[c])
                    .clamp(domain.lower()[c], domain.upper()[c]);
                if nc == x[c] {
                    continue;
                }
                let mut cand = x.clone();
                cand[c] = nc;
                let v = f(&cand);
                if v < val {
                    x = cand;
                    val = v;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (x, val)
}

/// Dense-grid minimum of a two-dimensional function, polished by
/// coordinate descent from the `refine_from` best grid points.
pub fn grid_min_2d(
    function: &TestFunction,
    per_axis: usize,
    refine_from: usize,
) -> Result<(Vec<f64>, f64)> {
    if function.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: function.dim() });
    }
    if per_axis < 2 {
        return Err(Error::invalid("grid needs at least two points per axis"));
    }
    let dom = function.domain();
    let (lo, hi) = (dom.lower(), dom.upper());
    let f = function.f;
    let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
    let keep = refine_from.max(1);
    for i in 0..per_axis {
        let x1 = lo[0] + (hi[0] - lo[0]) * i as f64 / (per_axis - 1) as f64;
        for k in 0..per_axis {
            let x2 = lo[1] + (hi[1] - lo[1]) * k as f64 / (per_axis - 1) as f64;
            let v = f(&[x1, x2]);
            if best.len() < keep || v < best.last().unwrap().0 {
                let pos = best.partition_point(|(bv, _)| *bv < v);
                best.insert(pos, (v, vec![x1, x2]));
                best.truncate(keep);
            }
        }
    }
    let spacing = 1.0 / (per_axis - 1) as f64;
    let mut winner = (best[0].1.clone(), best[0].0);
    for (v, x) in best {
        let (rx, rv) = compass_min(f, dom, x, v, spacing, 1e-13);
        if rv < winner.1 {
            winner = (rx, rv);
        }
    }
    Ok(winner)
}

const HALTON_PRIMES: [usize; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

fn radical_inverse(mut index: usize, base: usize) -> f64 {
    let mut inv = 0.0;
    let mut frac = 1.0 / base as f64;
    while index > 0 {
        inv += (index % base) as f64 * frac;
        index /= base;
        frac /= base as f64;
    }
    inv
}

/// Quasi-random (Halton) search over the domain, polished by coordinate
/// descent from the `refine_from` best points. Supports up to 10
/// dimensions.
pub fn quasi_min(
    function: &TestFunction,
    n_points: usize,
    refine_from: usize,
) -> Result<(Vec<f64>, f64)> {
    let d = function.dim();
    if d > HALTON_PRIMES.len() {
        return Err(Error::invalid(format!(
            "quasi-random search supports at most {} dimensions, got {d}",
            HALTON_PRIMES.len()
        )));
    }
    if n_points == 0 {
        return Err(Error::EmptyCandidates);
    }
    let dom = function.domain();
    let (lo, hi) = (dom.lower(), dom.upper());
    let f = function.f;
    let keep = refine_from.max(1);
    let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut x = vec![0.0; d];
    for idx in 1..=n_points {
        for (j, xj) in x.iter_mut().enumerate() {
            let u = radical_inverse(idx, HALTON_PRIMES[j]);
            *xj = lo[j] + (hi[j] - lo[j]) * u;
        }
        let v = f(&x);
        if best.len() < keep || v < best.last().unwrap().0 {
            let pos = best.partition_point(|(bv, _)| *bv < v);
            best.insert(pos, (v, x.clone()));
            best.truncate(keep);
        }
    }
    let mut winner = (best[0].1.clone(), best[0].0);
    for (v, x) in best {
        let (rx, rv) = compass_min(f, dom, x, v, 0.05, 1e-12);
        if rv < winner.1 {
            winner = (rx, rv);
        }
    }
    Ok(winner)
}
