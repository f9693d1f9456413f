//! Bagged cross-validation bandwidth: the mean over N subsamples of size m
//! (drawn without replacement) of the subsample CV bandwidth rescaled by
//! `(m/n)^{1/5}`.

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::binned::{bin_sample, cv_minimize_binned};
use crate::cv::{cv_minimize, CvResult, Interval};
use crate::error::{domain, Error, Result};
use crate::optimize::grid_golden;
use crate::rng::{stream, Domain};
use crate::sample::Sample;

/// Share of failed resamples above which the bagged bandwidth is refused.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BagConfig {
    /// Subsample size.
    pub m: usize,
    /// Number of subsamples N.
    pub n_resamples: usize,
    pub seed: u64,
    /// Search interval for every subsample; `None` uses each subsample's
    /// default interval.
    pub interval: Option<Interval>,
    /// Use binned CV on the subsamples.
    pub binned_sub: bool,
    /// Bins per subsample when binned (default m).
    pub nb_sub: Option<usize>,
}

impl BagConfig {
    pub fn new(m: usize, n_resamples: usize, seed: u64) -> Self {
        Self {
            m,
            n_resamples,
            seed,
            interval: None,
            binned_sub: true,
            nb_sub: None,
        }
    }

    pub fn exact(self) -> Self {
        Self {
            binned_sub: false,
            ..self
        }
    }

    pub fn with_interval(self, interval: Interval) -> Self {
        Self {
            interval: Some(interval),
            ..self
        }
    }

    pub fn with_nb_sub(self, nb: usize) -> Self {
        Self {
            nb_sub: Some(nb),
            ..self
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.m < 2 || self.m > n {
            return domain(format!("subsample size must satisfy 2 <= m <= n = {n}, got {}", self.m));
        }
        if self.n_resamples == 0 {
            return domain("need at least one resample");
        }
        if self.binned_sub && self.nb_sub.is_some_and(|nb| nb < 2) {
            return domain("nb_sub must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BagResult {
    pub h_bag: f64,
    /// Rescaled bandwidths of the successful resamples, in resample order.
    pub per_resample: Vec<f64>,
    pub boundary_hits: usize,
    pub failures: usize,
    pub elapsed_seconds: f64,
}

/// `m` distinct indices in `0..n` for resample `i`: a partial Fisher-Yates
/// shuffle over a sparse map, so memory is O(m).
pub fn subsample_indices(n: usize, m: usize, seed: u64, i: u64) -> Result<Vec<usize>> {
    if m > n {
        return domain(format!("subsample size {m} exceeds sample size {n}"));
    }
    let mut rng = stream(seed, Domain::Subsample, i);
    let mut moved: HashMap<usize, usize> = HashMap::with_capacity(2 * m);
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let r = rng.random_range(k..n);
        let at_r = *moved.get(&r).unwrap_or(&r);
        let at_k = *moved.get(&k).unwrap_or(&k);
        moved.insert(r, at_k);
        out.push(at_r);
    }
    Ok(out)
}

fn one_resample(data: &Sample, cfg: &BagConfig, i: u64) -> Result<CvResult> {
    let idx = subsample_indices(data.len(), cfg.m, cfg.seed, i)?;
    let sub = data.select(&idx);
    if cfg.binned_sub {
        let b = bin_sample(&sub, cfg.nb_sub.unwrap_or(cfg.m))?;
        cv_minimize_binned(&b, cfg.interval)
    } else {
        cv_minimize(&sub, cfg.interval)
    }
}

/// The bagged bandwidth h(m, N).
pub fn bagged_bandwidth(data: &Sample, cfg: &BagConfig) -> Result<BagResult> {
    cfg.validate(data.len())?;
    let start = Instant::now();
    let scale = (cfg.m as f64 / data.len() as f64).powf(0.2);
    let results: Vec<Result<CvResult>> = (0..cfg.n_resamples as u64)
        .into_par_iter()
        .map(|i| one_resample(data, cfg, i))
        .collect();
    let mut per_resample = Vec::with_capacity(results.len());
    let mut boundary_hits = 0;
    let mut failures = 0;
    let mut first_error = None;
    for r in results {
        match r {
            Ok(cv) => {
                boundary_hits += usize::from(cv.boundary_hit);
                per_resample.push(scale * cv.h_opt);
            }
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if failures as f64 > MAX_FAILURE_SHARE * cfg.n_resamples as f64 || per_resample.is_empty() {
        return Err(Error::Numerical(format!(
            "{failures} of {} resamples failed; first error: {}",
            cfg.n_resamples,
            first_error.map(|e| e.to_string()).unwrap_or_default()
        )));
    }
    let h_bag = per_resample.iter().sum::<f64>() / per_resample.len() as f64;
    Ok(BagResult {
        h_bag,
        per_resample,
        boundary_hits,
        failures,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Number of subsamples; `None` stands for N = infinity.
pub type Resamples = Option<usize>;

/// Leading variance of h(m, N) relative to h_{n0}^2:
/// `A C^2 m^{-1/5} n^{-2/5} (1/N + (m/n)^2)`.
pub fn variance_formula(m: f64, n: f64, big_n: Resamples, a: f64, c: f64) -> f64 {
    let inv_n = big_n.map_or(0.0, |v| 1.0 / v as f64);
    a * c * c * m.powf(-0.2) * n.powf(-0.4) * (inv_n + (m / n).powi(2))
}

/// Covariance of two rescaled subsample bandwidths: `var (m/n)^2`.
pub fn covariance_formula(m: f64, n: f64, var_single: f64) -> f64 {
    var_single * (m / n).powi(2)
}

/// Numerical minimiser over m in [2, n] of `m^{-1/5} (1/N + (m/n)^2)`; it
/// equals n / (3 sqrt N) when that lies inside the range.
pub fn variance_optimal_m(n: usize, big_n: usize) -> Result<f64> {
    let (nf, inv) = (n as f64, 1.0 / big_n as f64);
    let min = grid_golden(|m| m.powf(-0.2) * (inv + (m / nf).powi(2)), 2.0, nf, 200, 1e-12)?;
    Ok(min.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binned::bin_sample;
    use crate::mixture::Preset;

    #[test]
    fn full_subsample_is_a_permutation() {
        let mut idx = subsample_indices(5, 5, 3, 0).unwrap();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
        assert!(subsample_indices(5, 6, 3, 0).is_err());
    }

    #[test]
    fn subsamples_are_deterministic_and_distinct() {
        let a = subsample_indices(10_000, 100, 42, 7).unwrap();
        assert_eq!(a, subsample_indices(10_000, 100, 42, 7).unwrap());
        assert_ne!(a, subsample_indices(10_000, 100, 42, 8).unwrap());
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 100);
        assert!(a.iter().all(|&i| i < 10_000));
    }

    #[test]
    fn inclusion_frequencies_are_uniform() {
        let draws = 100_000u64;
        let mut hits = [0u64; 10];
        for i in 0..draws {
            for j in subsample_indices(10, 3, 5, i).unwrap() {
                hits[j] += 1;
            }
        }
        for h in hits {
            let p = h as f64 / draws as f64;
            assert!((p - 0.3).abs() < 0.005, "{p}");
        }
    }

    #[test]
    fn degenerate_bagging_is_plain_cv() {
        let data = Preset::StdNormal.mixture().sample(300, 9).unwrap();
        let exact = bagged_bandwidth(&data, &BagConfig::new(300, 1, 1).exact()).unwrap();
        assert_eq!(exact.h_bag, cv_minimize(&data, None).unwrap().h_opt);
        let binned = bagged_bandwidth(&data, &BagConfig::new(300, 1, 1)).unwrap();
        let b = bin_sample(&data, 300).unwrap();
        assert_eq!(binned.h_bag, cv_minimize_binned(&b, None).unwrap().h_opt);
    }

    #[test]
    fn single_resample_is_rescaled_subsample_cv() {
        let data = Preset::D1.mixture().sample(2_000, 2).unwrap();
        let cfg = BagConfig::new(400, 1, 77).exact();
        let r = bagged_bandwidth(&data, &cfg).unwrap();
        let sub = data.select(&subsample_indices(2_000, 400, 77, 0).unwrap());
        let h = cv_minimize(&sub, None).unwrap().h_opt;
        assert_eq!(r.h_bag, (400.0f64 / 2_000.0).powf(0.2) * h);
        assert_eq!(r.per_resample.len(), 1);
    }

    #[test]
    fn independent_of_thread_count() {
        let data = Preset::Claw.mixture().sample(5_000, 4).unwrap();
        let cfg = BagConfig::new(500, 40, 8);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| bagged_bandwidth(&data, &cfg).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.per_resample, b.per_resample);
        assert_eq!(a.h_bag.to_bits(), b.h_bag.to_bits());
        assert_eq!(a.h_bag, a.per_resample.iter().sum::<f64>() / 40.0);
    }

    #[test]
    fn scale_equivariance() {
        let data = Preset::D1.mixture().sample(3_000, 6).unwrap();
        let cfg = BagConfig::new(300, 20, 3).exact();
        let a = bagged_bandwidth(&data, &cfg).unwrap().h_bag;
        let b = bagged_bandwidth(&data.affine(1.0, 2.5).unwrap(), &cfg).unwrap().h_bag;
        assert!((b / (2.5 * a) - 1.0).abs() < 2e-4, "{a} {b}");
    }

    #[test]
    fn rejects_bad_configs() {
        let data = Preset::D1.mixture().sample(100, 6).unwrap();
        assert!(bagged_bandwidth(&data, &BagConfig::new(101, 5, 0)).is_err());
        assert!(bagged_bandwidth(&data, &BagConfig::new(1, 5, 0)).is_err());
        assert!(bagged_bandwidth(&data, &BagConfig::new(50, 0, 0)).is_err());
        assert!(bagged_bandwidth(&data, &BagConfig::new(50, 5, 0).with_nb_sub(1)).is_err());
    }

    #[test]
    fn too_many_failures_is_an_error() {
        // mostly tied data: many subsamples have zero range and cannot be binned
        let mut v = vec![0.0; 95];
        v.extend((1..=5).map(f64::from));
        let data = Sample::new(v).unwrap();
        let err = bagged_bandwidth(&data, &BagConfig::new(5, 50, 1)).unwrap_err();
        assert!(err.to_string().contains("resamples failed"), "{err}");
    }

    #[test]
    fn variance_formulas() {
        let (a, c) = (0.2, 1.06);
        let inf = variance_formula(1_000.0, 1e5, None, a, c);
        let big = variance_formula(1_000.0, 1e5, Some(1_000_000_000), a, c);
        assert!((big / inf - 1.0).abs() < 1e-4);
        // N = infinity closed form
        assert!((inf - a * c * c * 1_000f64.powf(1.8) * 1e5f64.powf(-2.4)).abs() < 1e-15 * inf.abs().max(1.0));
        assert_eq!(covariance_formula(10.0, 10.0, 0.7), 0.7);
        assert!((covariance_formula(1.0, 10.0, 1.0) - 0.01).abs() < 1e-15);
        let m = variance_optimal_m(100_000, 500).unwrap();
        assert!((m - 1_490.7).abs() < 0.5, "{m}");
    }
}
