//! Maximum-likelihood Gaussian mixtures by EM, with the number of components
//! chosen by BIC. These fits are the pilot densities for the subsample-size
//! estimate.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::sqrt_2pi;
use crate::mixture::GaussianMixture;
use crate::rng::{stream, Domain};
use crate::sample::Sample;

/// Settings for a single EM run and for BIC selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iterations: usize,
    /// Stop when |l_t - l_{t-1}| < rel_tol * |l_t|.
    pub rel_tol: f64,
    pub restarts: usize,
    /// Component sds may not fall below `sd_floor * sd(data)`.
    pub sd_floor: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tol: 1e-8,
            restarts: 5,
            sd_floor: 1e-4,
        }
    }
}

/// One converged (or iteration-capped) EM run.
#[derive(Debug, Clone, Serialize)]
pub struct EmFit {
    pub mixture: GaussianMixture,
    pub loglik: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every E-step.
    pub trace: Vec<f64>,
}

/// The outcome for one candidate number of components.
#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub k: usize,
    pub fit: Option<EmFit>,
    pub warning: Option<String>,
}

/// All candidates and the index of the BIC winner.
#[derive(Debug, Clone, Serialize)]
pub struct BicSelection {
    pub candidates: Vec<Candidate>,
    pub selected: usize,
}

impl BicSelection {
    pub fn best(&self) -> &EmFit {
        self.candidates[self.selected]
            .fit
            .as_ref()
            .expect("selected candidate has a fit")
    }

    pub fn into_mixture(self) -> GaussianMixture {
        let selected = self.selected;
        self.candidates
            .into_iter()
            .nth(selected)
            .and_then(|c| c.fit)
            .expect("selected candidate has a fit")
            .mixture
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().filter_map(|c| c.warning.as_deref())
    }
}

/// BIC = 2 loglik - (3k - 1) ln n.
pub fn bic(loglik: f64, k: usize, n: usize) -> f64 {
    2.0 * loglik - (3 * k - 1) as f64 * (n as f64).ln()
}

/// Fits k = 1..=max_components and returns the mixture with the largest BIC.
pub fn fit_mixture_bic(data: &Sample, max_components: usize, seed: u64) -> Result<GaussianMixture> {
    Ok(select_mixture(data, max_components, seed, EmOptions::default())?.into_mixture())
}

/// Like [`fit_mixture_bic`] but keeps every candidate. Candidates with more
/// than n/10 components are not attempted (k = 1 always is).
pub fn select_mixture(data: &Sample, max_components: usize, seed: u64, opts: EmOptions) -> Result<BicSelection> {
    if max_components == 0 {
        return Err(Error::Config("max_components must be at least 1".into()));
    }
    let usable = (data.len() / 10).clamp(1, max_components);
    let candidates: Vec<Candidate> = (1..=max_components)
        .into_par_iter()
        .map(|k| {
            if k > usable {
                return Candidate {
                    k,
                    fit: None,
                    warning: Some(format!("k={k} skipped: needs at least {} observations", 10 * k)),
                };
            }
            match fit_em(data, k, seed, opts) {
                Ok(fit) => Candidate {
                    k,
                    fit: Some(fit),
                    warning: None,
                },
                Err(e) => Candidate {
                    k,
                    fit: None,
                    warning: Some(format!("k={k} skipped: {e}")),
                },
            }
        })
        .collect();
    let mut selected: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if let Some(fit) = &c.fit {
            if selected.is_none_or(|s| fit.bic > candidates[s].fit.as_ref().unwrap().bic) {
                selected = Some(i);
            }
        }
    }
    let selected = selected.ok_or_else(|| {
        let reasons: Vec<String> = candidates.iter().filter_map(|c| c.warning.clone()).collect();
        Error::Fit(format!("every candidate failed: {}", reasons.join("; ")))
    })?;
    Ok(BicSelection { candidates, selected })
}

/// Best of `opts.restarts` EM runs with k components. A run is discarded
/// when a component empties or its sd collapses below the floor.
pub fn fit_em(data: &Sample, k: usize, seed: u64, opts: EmOptions) -> Result<EmFit> {
    let x = data.values();
    if k == 0 || x.len() < 2 * k {
        return Err(Error::Domain(format!(
            "cannot fit {k} components to {} points",
            x.len()
        )));
    }
    let floor = opts.sd_floor * data.sd();
    if floor <= 0.0 {
        return Err(Error::Fit("data have zero spread".into()));
    }
    let mut best: Option<EmFit> = None;
    let mut last_error = None;
    for restart in 0..opts.restarts.max(1) {
        let mut rng = stream(seed, Domain::EmInit, (k as u64) << 16 | restart as u64);
        let run = initial_params(x, k, floor, data.sd(), &mut rng).and_then(|p| run_em(x, p, floor, opts));
        match run {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
                    best = Some(fit);
                }
            }
            Err(e) => last_error = Some(e),
        }
        if k == 1 {
            break;
        }
    }
    best.ok_or_else(|| last_error.unwrap_or_else(|| Error::Fit("no EM run completed".into())))
}

#[derive(Debug, Clone)]
struct Params {
    w: Vec<f64>,
    mu: Vec<f64>,
    sd: Vec<f64>,
}

/// k-means++ centres, then one hard-assignment M-step.
fn initial_params<R: Rng>(x: &[f64], k: usize, floor: f64, data_sd: f64, rng: &mut R) -> Result<Params> {
    let n = x.len();
    let mut centres = vec![x[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = x.iter().map(|v| (v - centres[0]).powi(2)).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            x[pick]
        } else {
            x[rng.random_range(0..n)]
        };
        centres.push(next);
        for (d, v) in d2.iter_mut().zip(x) {
            *d = d.min((v - next).powi(2));
        }
    }
    let mut count = vec![0usize; k];
    let mut sum = vec![0.0; k];
    let mut sum2 = vec![0.0; k];
    for &v in x {
        let j = (0..k)
            .min_by(|&a, &b| (v - centres[a]).abs().total_cmp(&(v - centres[b]).abs()))
            .unwrap();
        count[j] += 1;
        sum[j] += v;
        sum2[j] += v * v;
    }
    if count.contains(&0) {
        return Err(Error::Fit("k-means++ initialisation left an empty cluster".into()));
    }
    let mut p = Params {
        w: vec![0.0; k],
        mu: vec![0.0; k],
        sd: vec![0.0; k],
    };
    for j in 0..k {
        let c = count[j] as f64;
        let mean = sum[j] / c;
        let var = (sum2[j] / c - mean * mean).max(0.0);
        p.w[j] = c / n as f64;
        p.mu[j] = mean;
        p.sd[j] = if count[j] < 2 || var.sqrt() < floor {
            data_sd / k as f64
        } else {
            var.sqrt()
        };
    }
    Ok(p)
}

fn run_em(x: &[f64], mut p: Params, floor: f64, opts: EmOptions) -> Result<EmFit> {
    let n = x.len();
    let k = p.w.len();
    let ln_sqrt_2pi = sqrt_2pi().ln();
    let mut resp = vec![0.0; n * k];
    let mut logp = vec![0.0; k];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut loglik = f64::NEG_INFINITY;
    for it in 0..opts.max_iterations {
        iterations = it + 1;
        // E-step with log-sum-exp.
        let offsets: Vec<f64> = (0..k).map(|j| p.w[j].ln() - p.sd[j].ln() - ln_sqrt_2pi).collect();
        let inv: Vec<f64> = p.sd.iter().map(|s| 1.0 / s).collect();
        let mut ll = 0.0;
        for (i, &v) in x.iter().enumerate() {
            let mut top = f64::NEG_INFINITY;
            for j in 0..k {
                let z = (v - p.mu[j]) * inv[j];
                logp[j] = offsets[j] - 0.5 * z * z;
                top = top.max(logp[j]);
            }
            let row = &mut resp[i * k..(i + 1) * k];
            let mut total = 0.0;
            for j in 0..k {
                row[j] = (logp[j] - top).exp();
                total += row[j];
            }
            for r in row.iter_mut() {
                *r /= total;
            }
            ll += top + total.ln();
        }
        if !ll.is_finite() {
            return Err(Error::Fit(format!("log-likelihood became {ll}")));
        }
        trace.push(ll);
        let change = (ll - loglik).abs();
        loglik = ll;
        if change < opts.rel_tol * ll.abs() {
            converged = true;
            break;
        }
        // M-step.
        for j in 0..k {
            let mut nj = 0.0;
            let mut s1 = 0.0;
            for (i, &v) in x.iter().enumerate() {
                let r = resp[i * k + j];
                nj += r;
                s1 += r * v;
            }
            if nj < 1.0 {
                return Err(Error::Fit(format!("component {j} of {k} emptied")));
            }
            let mean = s1 / nj;
            let mut s2 = 0.0;
            for (i, &v) in x.iter().enumerate() {
                s2 += resp[i * k + j] * (v - mean).powi(2);
            }
            let sd = (s2 / nj).sqrt();
            if sd < floor {
                return Err(Error::Fit(format!("component {j} of {k} collapsed (sd {sd:.3e})")));
            }
            p.w[j] = nj / n as f64;
            p.mu[j] = mean;
            p.sd[j] = sd;
        }
        let total: f64 = p.w.iter().sum();
        p.w.iter_mut().for_each(|w| *w /= total);
    }
    let mixture = GaussianMixture::new(p.w, p.mu, p.sd)?;
    Ok(EmFit {
        mixture,
        loglik,
        bic: bic(loglik, k, n),
        iterations,
        converged,
        trace,
    })
}
