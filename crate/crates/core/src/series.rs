//! Fixed-step multivariate time series.
//!
//! Storage is column-major: the `Q` state values of time step `t` are
//! contiguous, so a single state vector is always a plain slice.

use crate::error::{Error, Result};

/// A `Q`-dimensional state sequence sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    q: usize,
    dt: f64,
    origin_time: f64,
    data: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series from column-major data (`data.len()` must be a
    /// positive multiple of `q`).
    pub fn new(q: usize, dt: f64, origin_time: f64, data: Vec<f64>) -> Result<Self> {
        if q == 0 {
            return Err(Error::config("series dimension must be at least 1"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        if data.is_empty() || data.len() % q != 0 {
            return Err(Error::mismatch(format!(
                "{} values cannot be split into columns of {q}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(format!(
                "non-finite value at dimension {} of step {}",
                bad % q,
                bad / q
            )));
        }
        Ok(Self {
            q,
            dt,
            origin_time,
            data,
        })
    }

    /// Builds a series from a list of state vectors.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C], dt: f64, origin_time: f64) -> Result<Self> {
        let q = columns.first().map(|c| c.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(q * columns.len());
        for (t, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != q {
                return Err(Error::mismatch(format!(
                    "column {t} has dimension {}, expected {q}",
                    c.len()
                )));
            }
            data.extend_from_slice(c);
        }
        Self::new(q, dt, origin_time, data)
    }

    /// Builds a series from dimension-major rows (`rows[i][t]`).
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], dt: f64, origin_time: f64) -> Result<Self> {
        let q = rows.len();
        let len = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != len) {
            return Err(Error::mismatch("rows have unequal length"));
        }
        let mut data = vec![0.0; q * len];
        for (i, row) in rows.iter().enumerate() {
            for (t, v) in row.as_ref().iter().enumerate() {
                data[t * q + i] = *v;
            }
        }
        Self::new(q, dt, origin_time, data)
    }

    pub(crate) fn from_parts_unchecked(q: usize, dt: f64, origin_time: f64, data: Vec<f64>) -> Self {
        debug_assert!(q > 0 && data.len() % q == 0);
        Self {
            q,
            dt,
            origin_time,
            data,
        }
    }

    /// State dimension `Q`.
    pub fn dim(&self) -> usize {
        self.q
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn origin_time(&self) -> f64 {
        self.origin_time
    }

    /// Absolute time of step `t`.
    pub fn time(&self, t: usize) -> f64 {
        self.origin_time + t as f64 * self.dt
    }

    pub fn column(&self, t: usize) -> &[f64] {
        &self.data[t * self.q..(t + 1) * self.q]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.q)
    }

    pub fn get(&self, dim: usize, t: usize) -> f64 {
        self.data[t * self.q + dim]
    }

    /// Raw column-major values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// One dimension across all time steps.
    pub fn row(&self, dim: usize) -> Vec<f64> {
        self.columns().map(|c| c[dim]).collect()
    }

    /// Sub-series over `start..end` with the origin time shifted to match.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::mismatch(format!(
                "slice {start}..{end} out of range for series of length {}",
                self.len()
            )));
        }
        Ok(Self {
            q: self.q,
            dt: self.dt,
            origin_time: self.time(start),
            data: self.data[start * self.q..end * self.q].to_vec(),
        })
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Root-mean-square over all entries.
    pub fn rms(&self) -> f64 {
        let ss: f64 = self.data.iter().map(|v| v * v).sum();
        (ss / self.data.len() as f64).sqrt()
    }
}
