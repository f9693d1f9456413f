//! Binned cross-validation. Each observation is moved to the nearest of `nb`
//! equally spaced bin centres, so the pair sum collapses to a sum over
//! distance classes `d` with integer weights
//! `weight(0) = sum c_j (c_j - 1)`, `weight(d) = 2 sum_j c_j c_{j+d}`.
//!
//! With few bins the criterion keeps decreasing as h shrinks and the
//! minimiser lands on the lower end of the search interval; callers should
//! check [`CvResult::boundary_hit`].

use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::cv::{minimize_criterion, rule_of_thumb, CvResult, Interval, TRUNCATION};
use crate::error::{domain, Result};
use crate::kernel::{gamma_n, INV_2_SQRT_PI};
use crate::sample::Sample;

/// Distance classes handled per block when building weights.
const BLOCK: usize = 2048;

#[derive(Debug, Serialize)]
pub struct BinnedSample {
    pub lo: f64,
    pub hi: f64,
    pub nb: usize,
    pub counts: Vec<u64>,
    n: usize,
    /// Normal-reference bandwidth of the unbinned data, for the default
    /// search interval.
    reference_bandwidth: f64,
    #[serde(skip)]
    weights: Mutex<Vec<f64>>,
}

impl Clone for BinnedSample {
    fn clone(&self) -> Self {
        Self {
            lo: self.lo,
            hi: self.hi,
            nb: self.nb,
            counts: self.counts.clone(),
            n: self.n,
            reference_bandwidth: self.reference_bandwidth,
            weights: Mutex::new(self.weights.lock().unwrap().clone()),
        }
    }
}

/// Bins `data` into `nb` equal-width bins over `[min, max]`.
pub fn bin_sample(data: &Sample, nb: usize) -> Result<BinnedSample> {
    if nb < 2 {
        return domain(format!("need at least 2 bins, got {nb}"));
    }
    let (lo, hi) = (data.min(), data.max());
    if hi <= lo {
        return domain("binning needs a sample with positive range");
    }
    let delta = (hi - lo) / nb as f64;
    let mut counts = vec![0u64; nb];
    for &x in data.values() {
        let k = (((x - lo) / delta) as usize).min(nb - 1);
        counts[k] += 1;
    }
    Ok(BinnedSample {
        lo,
        hi,
        nb,
        counts,
        n: data.len(),
        reference_bandwidth: rule_of_thumb(data)?,
        weights: Mutex::new(Vec::new()),
    })
}

impl BinnedSample {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Bin width.
    pub fn delta(&self) -> f64 {
        (self.hi - self.lo) / self.nb as f64
    }

    /// `[h_rot / 20, 2 h_rot]` from the unbinned data.
    pub fn default_interval(&self) -> Result<Interval> {
        Interval::new(self.reference_bandwidth / 20.0, 2.0 * self.reference_bandwidth)
    }

    /// Largest distance class that contributes at bandwidth `h`.
    fn reach(&self, h: f64) -> usize {
        let d = (TRUNCATION * h / self.delta()).floor();
        if d >= (self.nb - 1) as f64 {
            self.nb - 1
        } else {
            d as usize
        }
    }

    /// Pair weights for distance classes `0..=d_max` (computed on first use
    /// and cached).
    pub fn pair_weights(&self, d_max: usize) -> Vec<f64> {
        let d_max = d_max.min(self.nb - 1);
        let mut cache = self.weights.lock().unwrap();
        if cache.len() <= d_max {
            let c: Vec<f64> = self.counts.iter().map(|&v| v as f64).collect();
            let start = cache.len();
            let fresh = autocorrelation(&c, start, d_max + 1);
            for (offset, s) in fresh.into_iter().enumerate() {
                let d = start + offset;
                cache.push(if d == 0 { s - self.n as f64 } else { 2.0 * s });
            }
        }
        cache[..=d_max].to_vec()
    }

    fn criterion(&self, h: f64, weights: &[f64]) -> f64 {
        let nf = self.n as f64;
        let step = self.delta() / h;
        let top = self.reach(h).min(weights.len() - 1);
        let mut s = 0.0;
        for (d, &w) in weights[..=top].iter().enumerate() {
            if w != 0.0 {
                s += w * gamma_n(d as f64 * step, nf);
            }
        }
        INV_2_SQRT_PI / (nf * h) + s / (nf * (nf - 1.0) * h)
    }
}

/// `s[d - start] = sum_j c_j c_{j+d}` for `d` in `start..end`, blocked so the
/// block of outputs and the slice of `c` it touches stay in cache. Empty bins
/// are skipped. All products are integers below 2^53, so the result is exact.
fn autocorrelation(c: &[f64], start: usize, end: usize) -> Vec<f64> {
    let nb = c.len();
    let nonzero: Vec<usize> = (0..nb).filter(|&j| c[j] != 0.0).collect();
    let blocks: Vec<usize> = (start..end).step_by(BLOCK).collect();
    let parts: Vec<Vec<f64>> = blocks
        .par_iter()
        .map(|&a| {
            let b = (a + BLOCK).min(end);
            let mut out = vec![0.0; b - a];
            for &j in &nonzero {
                if j + a >= nb {
                    break;
                }
                let len = (b - a).min(nb - j - a);
                let cj = c[j];
                let src = &c[j + a..j + a + len];
                for (o, s) in out[..len].iter_mut().zip(src) {
                    *o += cj * s;
                }
            }
            out
        })
        .collect();
    parts.concat()
}

/// Binned CV(h).
pub fn cv_score_binned(b: &BinnedSample, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("bandwidth must be positive, got {h}"));
    }
    let w = b.pair_weights(b.reach(h));
    Ok(b.criterion(h, &w))
}

/// Minimiser of the binned criterion; same optimiser as
/// [`crate::cv::cv_minimize`].
pub fn cv_minimize_binned(b: &BinnedSample, interval: Option<Interval>) -> Result<CvResult> {
    let interval = match interval {
        Some(i) => i,
        None => b.default_interval()?,
    };
    let w = b.pair_weights(b.reach(interval.hi));
    minimize_criterion(|h| b.criterion(h, &w), interval)
}
