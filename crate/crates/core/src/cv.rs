//! Least-squares (leave-one-out) cross-validation for the Gaussian kernel.
//!
//! The criterion is evaluated through its pairwise form
//! `CV(h) = R(K)/(nh) + 1/(n(n-1)h) sum_{i != j} gamma_n((X_i - X_j)/h)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, numerical, Result};
use crate::kernel::{gamma_n, INV_2_SQRT_PI};
use crate::optimize::grid_golden;
use crate::sample::Sample;

/// Pairs further apart than this many bandwidths are skipped.
pub const TRUNCATION: f64 = 40.0;
/// Log-spaced grid points before golden-section refinement.
pub const GRID_POINTS: usize = 25;
/// Relative width at which refinement stops.
pub const REL_TOL: f64 = 1e-4;

const ROWS_PER_CHUNK: usize = 256;

/// Which end of the search interval the grid minimum sat on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvResult {
    pub h_opt: f64,
    pub cv_min: f64,
    pub search_lo: f64,
    pub search_hi: f64,
    pub boundary_hit: bool,
    pub edge: Option<Edge>,
    pub evaluations: usize,
}

/// A bandwidth search interval `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return domain(format!("search interval must satisfy 0 < lo < hi, got [{lo}, {hi}]"));
        }
        Ok(Self { lo, hi })
    }
}

/// Normal-reference bandwidth 1.06 min(sd, IQR/1.349) n^{-1/5}.
pub fn rule_of_thumb(data: &Sample) -> Result<f64> {
    let sd = data.sd();
    let iqr = data.iqr() / 1.349;
    let spread = if iqr > 0.0 { sd.min(iqr) } else { sd };
    if spread <= 0.0 {
        return domain("data have zero spread; no default bandwidth interval");
    }
    Ok(1.06 * spread * (data.len() as f64).powf(-0.2))
}

/// `[h_rot / 20, 2 h_rot]`.
pub fn default_interval(data: &Sample) -> Result<Interval> {
    let h = rule_of_thumb(data)?;
    Interval::new(h / 20.0, 2.0 * h)
}

/// Sum of gamma_n((x_j - x_i)/h) over ordered pairs i != j of sorted `x`.
/// Rows are split in fixed chunks whose partial sums are added in index
/// order, so the result does not depend on the thread count.
fn pair_sum(x: &[f64], h: f64) -> f64 {
    let n = x.len();
    let nf = n as f64;
    let reach = TRUNCATION * h;
    let inv_h = 1.0 / h;
    let partials: Vec<f64> = (0..n.div_ceil(ROWS_PER_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = 0.0;
            for i in c * ROWS_PER_CHUNK..((c + 1) * ROWS_PER_CHUNK).min(n) {
                let xi = x[i];
                for &xj in &x[i + 1..] {
                    let d = xj - xi;
                    if d > reach {
                        break;
                    }
                    s += gamma_n(d * inv_h, nf);
                }
            }
            s
        })
        .collect();
    2.0 * partials.iter().sum::<f64>()
}

/// CV(h) for the sample.
pub fn cv_score(data: &Sample, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("bandwidth must be positive, got {h}"));
    }
    let n = data.len();
    if n < 2 {
        return domain("cross-validation needs at least 2 observations");
    }
    let nf = n as f64;
    Ok(INV_2_SQRT_PI / (nf * h) + pair_sum(data.values(), h) / (nf * (nf - 1.0) * h))
}

/// Grid-plus-golden minimisation of any CV-type criterion over `interval`.
pub(crate) fn minimize_criterion<F: FnMut(f64) -> f64>(criterion: F, interval: Interval) -> Result<CvResult> {
    let min = grid_golden(criterion, interval.lo, interval.hi, GRID_POINTS, REL_TOL)?;
    if !min.value.is_finite() {
        return numerical("cross-validation criterion has no finite value on the interval");
    }
    let edge = match min.grid_index {
        0 => Some(Edge::Lower),
        i if i + 1 == GRID_POINTS => Some(Edge::Upper),
        _ => None,
    };
    Ok(CvResult {
        h_opt: min.x,
        cv_min: min.value,
        search_lo: interval.lo,
        search_hi: interval.hi,
        boundary_hit: min.boundary_hit,
        edge,
        evaluations: min.evaluations,
    })
}

/// Minimiser of CV(h) over `interval` (default: [`default_interval`]).
pub fn cv_minimize(data: &Sample, interval: Option<Interval>) -> Result<CvResult> {
    let interval = match interval {
        Some(i) => i,
        None => default_interval(data)?,
    };
    minimize_criterion(|h| cv_score(data, h).unwrap_or(f64::NAN), interval)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::kernel::kernel_eval;
    use crate::mixture::Preset;
    use crate::quadrature::{integrate, Tolerance};

    /// Integral of the squared estimate minus twice the mean leave-one-out
    /// estimate at the data, by quadrature.
    pub(crate) fn cv_definitional(x: &[f64], h: f64) -> f64 {
        let n = x.len() as f64;
        let fhat = |t: f64| x.iter().map(|xi| kernel_eval((t - xi) / h)).sum::<f64>() / (n * h);
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min) - 12.0 * h;
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 12.0 * h;
        let int_sq = integrate(|t| fhat(t).powi(2), lo, hi, Tolerance::default())
            .unwrap()
            .value;
        let mut loo = 0.0;
        for (i, xi) in x.iter().enumerate() {
            let s: f64 = x
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, xj)| kernel_eval((xi - xj) / h))
                .sum();
            loo += s / ((n - 1.0) * h);
        }
        int_sq - 2.0 * loo / n
    }

    #[test]
    fn two_point_value() {
        let data = Sample::new(vec![0.0, 1.0]).unwrap();
        let cv = cv_score(&data, 1.0).unwrap();
        assert!((cv - cv_definitional(&[0.0, 1.0], 1.0)).abs() < 1e-10);
        assert!((cv + 0.23304).abs() < 1e-5, "{cv}");
    }

    #[test]
    fn pairwise_equals_definition() {
        for seed in 0..10u64 {
            let n = 3 + (seed as usize * 3) % 28;
            let data = Preset::D1.mixture().sample(n, seed).unwrap();
            for h in [0.05, 0.3, 1.5] {
                let a = cv_score(&data, h).unwrap();
                let b = cv_definitional(data.values(), h);
                assert!((a - b).abs() < 1e-6, "n={n} h={h}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_bad_bandwidth() {
        let data = Sample::new(vec![0.0, 1.0]).unwrap();
        assert!(cv_score(&data, 0.0).is_err());
        assert!(cv_score(&data, -1.0).is_err());
        assert!(cv_score(&data, f64::NAN).is_err());
        assert!(Interval::new(1.0, 0.5).is_err());
    }

    #[test]
    fn translation_invariance() {
        // dyadic data and shift: differences are exact
        let v: Vec<f64> = (0..64).map(|i| ((i * 37) % 64) as f64 / 16.0).collect();
        let a = Sample::new(v.clone()).unwrap();
        let b = Sample::new(v.iter().map(|x| x + 8.0).collect()).unwrap();
        assert_eq!(cv_score(&a, 0.4).unwrap(), cv_score(&b, 0.4).unwrap());
        let c = Preset::StdNormal.mixture().sample(300, 1).unwrap();
        let d = c.affine(3.7, 1.0).unwrap();
        assert!((cv_score(&c, 0.3).unwrap() - cv_score(&d, 0.3).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn default_interval_contains_typical_minimiser() {
        let mut hits = 0;
        for seed in 0..40 {
            let data = Preset::StdNormal.mixture().sample(200, seed).unwrap();
            let r = cv_minimize(&data, None).unwrap();
            if (0.1..=1.0).contains(&r.h_opt) && !r.boundary_hit {
                hits += 1;
            }
        }
        assert!(hits >= 38, "{hits}/40");
    }

    #[test]
    fn scale_equivariance_of_minimiser() {
        let data = Preset::D1.mixture().sample(400, 8).unwrap();
        let scaled = data.affine(0.0, 2.5).unwrap();
        let a = cv_minimize(&data, None).unwrap();
        let b = cv_minimize(&scaled, None).unwrap();
        assert!(
            (b.h_opt / (2.5 * a.h_opt) - 1.0).abs() < 2.0 * REL_TOL,
            "{} {}",
            a.h_opt,
            b.h_opt
        );
    }

    #[test]
    fn near_tied_data_hit_lower_edge() {
        let v: Vec<f64> = (0..20).map(|i| 1.0 + i as f64 * 5e-11).collect();
        let data = Sample::new(v).unwrap();
        let r = cv_minimize(&data, Some(Interval::new(1e-3, 1.0).unwrap())).unwrap();
        assert!(r.boundary_hit);
        assert_eq!(r.edge, Some(Edge::Lower));
    }

    #[test]
    fn interior_minimum_is_first_order_optimal() {
        let data = Preset::Claw.mixture().sample(500, 3).unwrap();
        let r = cv_minimize(&data, None).unwrap();
        assert!(!r.boundary_hit);
        assert!(r.search_lo < r.h_opt && r.h_opt < r.search_hi);
        for f in [1.0 - 10.0 * REL_TOL, 1.0 + 10.0 * REL_TOL] {
            assert!(cv_score(&data, r.h_opt * f).unwrap() >= r.cv_min);
        }
    }

    #[test]
    fn criterion_expectation_tracks_mise() {
        // 400 replicates: a quick version of the acceptance check
        let f = Preset::StdNormal.mixture();
        let h = 0.5;
        let vals: Vec<f64> = (0..400)
            .map(|s| cv_score(&f.sample(100, 1000 + s).unwrap(), h).unwrap())
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        let se = (var / vals.len() as f64).sqrt();
        let target = f.mise_exact(100, h).unwrap() - f.functionals().r_f;
        assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target} (se {se})");
    }
}
