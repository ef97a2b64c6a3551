use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Fixed-width regret histogram.
///
/// Bin `i` covers `[origin + i * bin_width, origin + (i + 1) * bin_width)`.
/// Samples outside the optional `range`, and non-finite samples, go to the
/// under/overflow counters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretHistogram {
    bin_width: f64,
    origin: f64,
    range: Option<(f64, f64)>,
    counts: BTreeMap<i64, u64>,
    trials: u64,
    underflow: u64,
    overflow: u64,
}

impl RegretHistogram {
    pub fn new(bin_width: f64, origin: f64) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) || !origin.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "histogram needs a positive bin width and finite origin, got ({bin_width}, {origin})"
            )));
        }
        Ok(Self {
            bin_width,
            origin,
            range: None,
            counts: BTreeMap::new(),
            trials: 0,
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn counts(&self) -> &BTreeMap<i64, u64> {
        &self.counts
    }

    pub fn bin_index(&self, r: f64) -> i64 {
        ((r - self.origin) / self.bin_width).floor() as i64
    }

    pub fn bin_lower(&self, index: i64) -> f64 {
        self.origin + index as f64 * self.bin_width
    }

    pub fn bin_center(&self, index: i64) -> f64 {
        self.origin + (index as f64 + 0.5) * self.bin_width
    }

    pub fn count_at(&self, r: f64) -> u64 {
        self.counts.get(&self.bin_index(r)).copied().unwrap_or(0)
    }

    #[inline]
    pub fn record(&mut self, r: f64) {
        self.trials += 1;
        if !r.is_finite() {
            self.overflow += 1;
            return;
        }
        if let Some((lo, hi)) = self.range {
            if r < lo {
                self.underflow += 1;
                return;
            }
            if r >= hi {
                self.overflow += 1;
                return;
            }
        }
        *self.counts.entry(self.bin_index(r)).or_insert(0) += 1;
    }

    /// Adds `other` into `self`. Both must share the binning.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.bin_width != other.bin_width || self.origin != other.origin || self.range != other.range {
            return Err(Error::InvalidSpec("cannot merge histograms with different binning".into()));
        }
        for (&i, &c) in &other.counts {
            *self.counts.entry(i).or_insert(0) += c;
        }
        self.trials += other.trials;
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }

    /// Empirical density `count / (trials * bin_width)` of non-empty bins.
    pub fn density(&self) -> Vec<(f64, f64)> {
        let norm = self.trials as f64 * self.bin_width;
        self.counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&i, &c)| (self.bin_center(i), c as f64 / norm))
            .collect()
    }
}

/// `-log P(r)` shifted so its minimum is exactly zero, one point per
/// non-empty bin, at the bin centers.
pub fn empirical_action(hist: &RegretHistogram) -> Result<Vec<(f64, f64)>> {
    let density = hist.density();
    if density.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    let neg_log: Vec<(f64, f64)> = density.into_iter().map(|(r, p)| (r, -p.ln())).collect();
    let min = neg_log.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
    Ok(neg_log.into_iter().map(|(r, v)| (r, v - min)).collect())
}
