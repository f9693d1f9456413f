//! Evaluation of the Gaussian kernel density estimate and its integrated
//! squared error against a known density.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::kernel::kernel_eval;
use crate::mixture::GaussianMixture;
use crate::quadrature::{simpson, trapezoid};
use crate::sample::Sample;

/// Observations further than this many bandwidths from x are ignored.
const REACH: f64 = 10.0;

/// `points` equally spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2);
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect()
}

/// f_h(x) at every point of `xs`.
pub fn kde_eval(data: &Sample, h: f64, xs: &[f64]) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("bandwidth must be positive, got {h}"));
    }
    let v = data.values();
    let norm = 1.0 / (v.len() as f64 * h);
    Ok(xs
        .par_iter()
        .map(|&x| {
            let start = v.partition_point(|&d| d < x - REACH * h);
            let mut s = 0.0;
            for &d in &v[start..] {
                if d > x + REACH * h {
                    break;
                }
                s += kernel_eval((x - d) / h);
            }
            s * norm
        })
        .collect())
}

/// Integration grid for ISE: `points` values over mean +- 8 sd of `f`.
pub fn ise_grid(f: &GaussianMixture, points: usize) -> Vec<f64> {
    let (mu, sd) = (f.mean(), f.sd());
    linspace(mu - 8.0 * sd, mu + 8.0 * sd, points)
}

/// Integrated squared error of the estimate with bandwidth h on an equally
/// spaced `grid`: Simpson's rule for odd lengths, trapezoid otherwise.
pub fn ise(data: &Sample, h: f64, f: &GaussianMixture, grid: &[f64]) -> Result<f64> {
    let est = kde_eval(data, h, grid)?;
    let sq: Vec<f64> = est.iter().zip(grid).map(|(e, &x)| (e - f.pdf(x)).powi(2)).collect();
    let dx = grid[1] - grid[0];
    Ok(if grid.len() % 2 == 1 {
        simpson(&sq, dx)
    } else {
        trapezoid(&sq, dx)
    })
}

/// Indices i with values[i-1] < values[i] >= values[i+1].
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i - 1] < values[i] && values[i] >= values[i + 1])
        .collect()
}
