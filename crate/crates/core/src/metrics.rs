//! Error and consensus series of a run against the KKT point.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kkt::{consensus_residual, KktSolution};
use crate::problem::CostFunction;
use crate::simplex::linf_distance;
use crate::trace::Trace;

/// Per logged event (the initial state is event 0): the averaged shares and
/// their distance to the optimal shares.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSeries {
    pub events: Vec<u64>,
    pub xbar: Vec<Vec<f64>>,
    pub abs_error: Vec<Vec<f64>>,
    /// `f'_i(C x̄_i)`.
    pub derivative: Vec<Vec<f64>>,
    /// `‖x̄ - x*‖_∞`.
    pub max_abs_error: Vec<f64>,
    /// `max_i f'_i - min_j f'_j` at `C x̄`.
    pub consensus_spread: Vec<f64>,
    pub x_star: Vec<f64>,
}

impl MetricSeries {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Index of the last logged event at or before `event`.
    pub fn index_at(&self, event: u64) -> Option<usize> {
        self.events.partition_point(|e| *e <= event).checked_sub(1)
    }

    pub fn final_max_abs_error(&self) -> f64 {
        self.max_abs_error.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_consensus_spread(&self) -> f64 {
        self.consensus_spread.last().copied().unwrap_or(f64::NAN)
    }
}

pub fn compute_metrics(
    trace: &Trace,
    kkt: &KktSolution,
    costs: &[CostFunction],
) -> Result<MetricSeries> {
    let n = kkt.point.len();
    if costs.len() != n || trace.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: if costs.len() != n {
                costs.len()
            } else {
                trace.n()
            },
        });
    }
    let x_star = kkt.point.as_slice().to_vec();
    let c = kkt.capacity;
    let rows = std::iter::once((0u64, &trace.initial))
        .chain(trace.records.iter().map(|r| (r.event, &r.xbar)));
    let mut m = MetricSeries {
        events: Vec::new(),
        xbar: Vec::new(),
        abs_error: Vec::new(),
        derivative: Vec::new(),
        max_abs_error: Vec::new(),
        consensus_spread: Vec::new(),
        x_star: x_star.clone(),
    };
    for (event, xbar) in rows {
        let alloc: Vec<f64> = xbar.iter().map(|v| v * c).collect();
        m.events.push(event);
        m.abs_error.push(
            xbar.iter()
                .zip(&x_star)
                .map(|(a, b)| (a - b).abs())
                .collect(),
        );
        m.derivative.push(
            costs
                .iter()
                .zip(&alloc)
                .map(|(f, w)| f.derivative_at(*w))
                .collect(),
        );
        m.max_abs_error.push(linf_distance(xbar, &x_star));
        m.consensus_spread.push(consensus_residual(costs, &alloc));
        m.xbar.push(xbar.clone());
    }
    Ok(m)
}

/// Smallest and largest `‖x̄_T - x*‖_∞` over window averages logged after
/// `from_event`.
pub fn window_band(trace: &Trace, x_star: &[f64], from_event: u64) -> Option<(f64, f64)> {
    trace
        .records
        .iter()
        .filter(|r| r.event >= from_event)
        .filter_map(|r| r.window_average.as_ref())
        .map(|w| linf_distance(w, x_star))
        .fold(None, |acc, d| match acc {
            None => Some((d, d)),
            Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
        })
}

pub fn write_metrics_csv<W: Write>(m: &MetricSeries, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "event",
        "agent",
        "xbar",
        "xstar",
        "abs_error",
        "derivative",
        "max_abs_error",
        "consensus_spread",
    ])?;
    for k in 0..m.len() {
        for i in 0..m.x_star.len() {
            w.write_record([
                m.events[k].to_string(),
                i.to_string(),
                format!("{}", m.xbar[k][i]),
                format!("{}", m.x_star[i]),
                format!("{}", m.abs_error[k][i]),
                format!("{}", m.derivative[k][i]),
                format!("{}", m.max_abs_error[k]),
                format!("{}", m.consensus_spread[k]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
