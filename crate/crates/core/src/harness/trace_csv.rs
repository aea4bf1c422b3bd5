use crate::error::Result;
use crate::estimator::{Branch, StepRecord, Trace};

pub const CSV_HEADER: [&str; 6] = [
    "t",
    "branch",
    "grad_norm",
    "f_gap",
    "grad_evals",
    "estimator_err_sq",
];

/// Traces with more records than this are thinned.
pub const MAX_FULL_ROWS: usize = 10_000;

/// Rows written for a trace: all of them up to [`MAX_FULL_ROWS`]; beyond
/// that every `⌈T/10⁴⌉`-th iterate, every fresh-batch iterate, and the last.
pub fn decimate(records: &[StepRecord]) -> Vec<&StepRecord> {
    if records.len() <= MAX_FULL_ROWS {
        return records.iter().collect();
    }
    let last_t = records.last().map_or(0, |r| r.t);
    let stride = last_t.div_ceil(MAX_FULL_ROWS).max(1);
    records
        .iter()
        .filter(|r| r.t % stride == 0 || r.branch == Branch::Full || r.t == last_t)
        .collect()
}

/// Shortest decimal that reads back to the same `f64` (exponent form for
/// very large or small magnitudes).
fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite floats serialize")
    } else {
        x.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// CSV text for a trace. `grad_evals` is the oracle-call counter (`2b'` per
/// correction step); absent diagnostics are empty fields.
pub fn render_trace_csv(trace: &Trace) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in decimate(&trace.records) {
        w.write_record([
            r.t.to_string(),
            r.branch.as_str().to_string(),
            opt(r.grad_norm),
            opt(r.f_gap),
            r.grad_evals_after.to_string(),
            opt(r.estimator_err_sq),
        ])?;
    }
    w.into_inner()
        .map_err(|e| crate::error::Error::Io(e.into_error()))
}
