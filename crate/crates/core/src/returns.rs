//! Per-second midpoint prices and log-returns.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::{IntradayGrid, QuoteEvent};

/// Forward-filled midpoint price per grid slot.
///
/// Slots before the first in-session quote are missing (stored as NaN);
/// every later slot is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointSeries {
    pub symbol: String,
    pub date: NaiveDate,
    values: Vec<f64>,
    first_defined: Option<usize>,
}

impl MidpointSeries {
    /// Builds a series from raw slot values; NaN entries before the first
    /// finite value are missing, and later gaps are forward filled.
    pub fn from_values(symbol: impl Into<String>, date: NaiveDate, raw: Vec<f64>) -> Self {
        let mut values = raw;
        let mut first_defined = None;
        let mut last = f64::NAN;
        for (t, v) in values.iter_mut().enumerate() {
            if v.is_finite() && *v > 0.0 {
                last = *v;
                first_defined.get_or_insert(t);
            } else {
                *v = last;
            }
        }
        MidpointSeries {
            symbol: symbol.into(),
            date,
            values,
            first_defined,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_defined_slot(&self) -> Option<usize> {
        self.first_defined
    }

    /// True when the day had no usable quote at all.
    pub fn is_fully_missing(&self) -> bool {
        self.first_defined.is_none()
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        match self.first_defined {
            Some(f) if t >= f && t < self.values.len() => Some(self.values[t]),
            _ => None,
        }
    }

    /// Raw slot values with NaN for missing slots.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_midpoints(&self) -> LogMidpoints {
        LogMidpoints {
            first_defined: self.first_defined,
            values: self.values.iter().map(|v| v.ln()).collect(),
        }
    }
}

/// Natural logarithm of a midpoint series, the form the estimators consume.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMidpoints {
    pub first_defined: Option<usize>,
    pub values: Vec<f64>,
}

impl LogMidpoints {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `log m(t + tau) - log m(t)`, or `None` outside the defined range.
    #[inline]
    pub fn log_return(&self, t: usize, tau: usize) -> Option<f64> {
        let first = self.first_defined?;
        let end = t.checked_add(tau)?;
        (t >= first && end < self.values.len()).then(|| self.values[end] - self.values[t])
    }
}

/// Midpoint of the last in-session quote at or before each slot.
pub fn build_midpoints(
    symbol: &str,
    date: NaiveDate,
    quotes: &[QuoteEvent],
    grid: &IntradayGrid,
) -> MidpointSeries {
    let mut raw = vec![f64::NAN; grid.slots()];
    for q in quotes {
        if let Some(slot) = grid.slot(q.second_of_day) {
            raw[slot] = q.midpoint();
        }
    }
    MidpointSeries::from_values(symbol, date, raw)
}

/// Log-return `log m(t + tau) - log m(t)` within one day.
///
/// Missing when either endpoint is missing or `t + tau` falls past the close.
pub fn log_return(m: &MidpointSeries, t: usize, tau: usize) -> Option<f64> {
    let end = t.checked_add(tau)?;
    Some(m.get(end)?.ln() - m.get(t)?.ln())
}
