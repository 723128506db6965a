//! Trace and gap-table serialization. Numbers are written with Rust's
//! default float formatting, which round-trips `f64` exactly; missing
//! diagnostics (design rows, methods without a variance prior) are `NaN`.

use std::io::Write;

use hei_core::{GapRow, IterationRecord};

use crate::CliError;

pub fn trace_header(dim: usize) -> String {
    let mut cols = vec!["run_id".to_string(), "method".to_string(), "iteration".to_string()];
    cols.extend((1..=dim).map(|i| format!("x_{i}")));
    cols.extend(["y", "best_y", "gap", "s_next", "s_max_est", "a", "b"].map(String::from));
    cols.extend((1..=dim).map(|i| format!("theta_{i}")));
    cols.join(",")
}

fn fmt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NaN".to_string(),
    }
}

/// One CSV row for an iteration record. `f_min = None` leaves the gap NaN
/// (external objectives have no known minimum).
pub fn trace_row(run_id: u64, method: &str, record: &IterationRecord, f_min: Option<f64>) -> String {
    let mut fields = vec![
        run_id.to_string(),
        method.to_string(),
        record.iteration.to_string(),
    ];
    fields.extend(record.x.iter().map(|v| format!("{v}")));
    fields.push(format!("{}", record.y));
    fields.push(format!("{}", record.best_y));
    fields.push(fmt(f_min.map(|fm| (record.best_y - fm).max(0.0))));
    fields.push(fmt(record.s_next));
    fields.push(fmt(record.s_max_est));
    fields.push(fmt(record.prior_ab.map(|(a, _)| a)));
    fields.push(fmt(record.prior_ab.map(|(_, b)| b)));
    match &record.theta {
        Some(theta) => fields.extend(theta.iter().map(|v| format!("{v}"))),
        None => fields.extend(std::iter::repeat("NaN".to_string()).take(record.x.len())),
    }
    fields.join(",")
}

pub const GAP_HEADER: &str =
    "method,iteration,mean_gap,median_gap,mean_log10_gap,median_log10_gap,n_ok";

pub fn gap_row(row: &GapRow) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        row.label,
        row.iteration,
        row.mean_gap,
        row.median_gap,
        row.mean_log10_gap,
        row.median_log10_gap,
        row.n_ok
    )
}

/// Parsed subset of a saved trace needed by the `ratio` subcommand.
pub struct TraceRatios {
    /// `(iteration, ln(s_next / s_max_est))` for rows carrying both values.
    pub points: Vec<(usize, f64)>,
}

pub fn read_ratios(path: &std::path::Path) -> Result<TraceRatios, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read trace {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        return Err(CliError::config(format!("{}: empty file", path.display())));
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| CliError::config(format!("{}: no `{name}` column", path.display())))
    };
    let it_col = col("iteration")?;
    let s_col = col("s_next")?;
    let m_col = col("s_max_est")?;
    let mut points = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let need = it_col.max(s_col).max(m_col);
        if fields.len() <= need {
            return Err(CliError::config(format!(
                "{}:{}: row has {} fields, need at least {}",
                path.display(),
                lineno + 2,
                fields.len(),
                need + 1
            )));
        }
        let parse = |idx: usize, name: &str| {
            fields[idx].trim().parse::<f64>().map_err(|_| {
                CliError::config(format!(
                    "{}:{}: cannot parse `{name}` value `{}`",
                    path.display(),
                    lineno + 2,
                    fields[idx]
                ))
            })
        };
        let iteration = fields[it_col].trim().parse::<usize>().map_err(|_| {
            CliError::config(format!(
                "{}:{}: cannot parse iteration `{}`",
                path.display(),
                lineno + 2,
                fields[it_col]
            ))
        })?;
        let s_next = parse(s_col, "s_next")?;
        let s_max = parse(m_col, "s_max_est")?;
        if s_next.is_nan() || s_max.is_nan() {
            continue;
        }
        points.push((iteration, (s_next / s_max).ln()));
    }
    if points.is_empty() {
        return Err(CliError::config(format!(
            "{}: no rows with predictive-deviation diagnostics",
            path.display()
        )));
    }
    Ok(TraceRatios { points })
}

/// Buffered writer that flushes after every row so partial traces survive
/// an aborted run.
pub struct RowWriter<W: Write> {
    inner: W,
}

impl<W: Write> RowWriter<W> {
    pub fn new(mut inner: W, header: &str) -> std::io::Result<Self> {
        writeln!(inner, "{header}")?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn row(&mut self, line: &str) -> std::io::Result<()> {
        writeln!(self.inner, "{line}")?;
        self.inner.flush()
    }
}
