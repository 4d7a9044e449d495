//! Event-indexed run records and their CSV form.
//!
//! The CSV is long format, one row per (event, agent):
//! `event,agent,x,xbar,lambda,dropped`, followed by `xbar_window` when the run
//! kept a window average and `wallclock_step` when it came from the agent
//! simulation. `lambda` and `dropped` are the probabilities and decisions that
//! produced the row's state.

use std::io::Write;

use serde::Serialize;

/// Counts of clamped drop-probability evaluations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClampCounts {
    pub evaluations: u64,
    pub floor: u64,
    pub ceiling: u64,
}

impl ClampCounts {
    /// Fraction of evaluations that hit either clamp.
    pub fn fraction(&self) -> f64 {
        if self.evaluations == 0 {
            0.0
        } else {
            (self.floor + self.ceiling) as f64 / self.evaluations as f64
        }
    }

    pub fn merge(&mut self, other: &ClampCounts) {
        self.evaluations += other.evaluations;
        self.floor += other.floor;
        self.ceiling += other.ceiling;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub event: u64,
    pub x: Vec<f64>,
    pub xbar: Vec<f64>,
    pub lambda: Vec<f64>,
    pub dropped: Vec<bool>,
    pub window_average: Option<Vec<f64>>,
    pub wallclock_step: Option<u64>,
}

/// `‖S̄(k) - ξ eᵀ‖₁` at a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SbarPoint {
    pub event: u64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub variant: String,
    pub initial: Vec<f64>,
    pub records: Vec<TraceRecord>,
    /// Number of events actually run.
    pub events: u64,
    /// Mean of all visited states `x(0), …, x(events)`.
    pub time_average: Vec<f64>,
    pub renormalizations: u64,
    pub clamps: ClampCounts,
    pub sbar: Vec<SbarPoint>,
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn n(&self) -> usize {
        self.initial.len()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Last record whose event index is at most `event`.
    pub fn at_or_before(&self, event: u64) -> Option<&TraceRecord> {
        let idx = self.records.partition_point(|r| r.event <= event);
        idx.checked_sub(1).map(|i| &self.records[i])
    }
}

/// Whether event `e` of a run of `total` events is recorded at `stride`.
pub fn is_recorded(e: u64, stride: u64, total: u64) -> bool {
    e == total || e.is_multiple_of(stride.max(1))
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> csv::Result<()> {
    let window = trace.records.iter().any(|r| r.window_average.is_some());
    let wallclock = trace.records.iter().any(|r| r.wallclock_step.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["event", "agent", "x", "xbar", "lambda", "dropped"];
    if window {
        header.push("xbar_window");
    }
    if wallclock {
        header.push("wallclock_step");
    }
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for rec in &trace.records {
        for i in 0..rec.x.len() {
            row.clear();
            row.push(rec.event.to_string());
            row.push(i.to_string());
            row.push(format!("{}", rec.x[i]));
            row.push(format!("{}", rec.xbar[i]));
            row.push(format!("{}", rec.lambda[i]));
            row.push(if rec.dropped[i] { "1" } else { "0" }.to_string());
            if window {
                row.push(
                    rec.window_average
                        .as_ref()
                        .map(|v| format!("{}", v[i]))
                        .unwrap_or_default(),
                );
            }
            if wallclock {
                row.push(
                    rec.wallclock_step
                        .map(|s| s.to_string())
                        .unwrap_or_default(),
                );
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
