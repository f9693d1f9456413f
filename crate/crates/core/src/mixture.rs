//! Univariate Gaussian mixtures: test-bed presets, evaluation, sampling,
//! closed-form derivative functionals and the exact MISE of a Gaussian-kernel
//! estimator.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{sqrt_2pi, KernelConstants, INV_2_SQRT_PI};
use crate::optimize::grid_golden;
use crate::rng::{stream, Domain};
use crate::sample::Sample;

/// `f(x) = sum_i w_i phi((x - mu_i) / sigma_i) / sigma_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureParams", into = "MixtureParams")]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

/// Wire form of a mixture: `{"weights": [...], "means": [...], "sds": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl TryFrom<MixtureParams> for GaussianMixture {
    type Error = Error;

    fn try_from(p: MixtureParams) -> Result<Self> {
        GaussianMixture::new(p.weights, p.means, p.sds)
    }
}

impl From<GaussianMixture> for MixtureParams {
    fn from(m: GaussianMixture) -> Self {
        MixtureParams {
            weights: m.weights,
            means: m.means,
            sds: m.sds,
        }
    }
}

/// R(f), R(f'') and R(f''').
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityFunctionals {
    pub r_f: f64,
    pub r_f2: f64,
    pub r_f3: f64,
}

impl DensityFunctionals {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("R(f)", self.r_f), ("R(f'')", self.r_f2), ("R(f''')", self.r_f3)] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }
}

/// Named test-bed densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "D1")]
    D1,
    #[serde(rename = "D2_claw", alias = "claw", alias = "D2")]
    Claw,
    #[serde(rename = "bimodal_T1", alias = "bimodal")]
    BimodalT1,
    #[serde(rename = "std_normal", alias = "normal")]
    StdNormal,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::D1, Preset::Claw, Preset::BimodalT1, Preset::StdNormal];

    pub fn name(self) -> &'static str {
        match self {
            Preset::D1 => "D1",
            Preset::Claw => "D2_claw",
            Preset::BimodalT1 => "bimodal_T1",
            Preset::StdNormal => "std_normal",
        }
    }

    pub fn mixture(self) -> GaussianMixture {
        let (w, m, s): (Vec<f64>, Vec<f64>, Vec<f64>) = match self {
            Preset::D1 => (vec![0.75, 0.25], vec![0.0, 1.5], vec![1.0, 1.0 / 3.0]),
            Preset::Claw => (
                vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
                vec![0.0, -1.0, -0.5, 0.0, 0.5, 1.0],
                vec![1.0, 0.1, 0.1, 0.1, 0.1, 0.1],
            ),
            Preset::BimodalT1 => (vec![0.5, 0.5], vec![-1.5, 1.5], vec![0.5, 0.5]),
            Preset::StdNormal => (vec![1.0], vec![0.0], vec![1.0]),
        };
        GaussianMixture::new(w, m, s).expect("preset parameters are valid")
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D1" | "d1" => Ok(Preset::D1),
            "D2_claw" | "D2" | "claw" => Ok(Preset::Claw),
            "bimodal_T1" | "bimodal" => Ok(Preset::BimodalT1),
            "std_normal" | "normal" => Ok(Preset::StdNormal),
            other => Err(Error::Config(format!(
                "unknown density preset {other:?} (expected D1, D2_claw, bimodal_T1 or std_normal)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn preset(name: &str) -> Result<GaussianMixture> {
    Ok(name.parse::<Preset>()?.mixture())
}

/// N(0, s^2) density at x.
#[inline]
pub fn normal_pdf(x: f64, s: f64) -> f64 {
    let z = x / s;
    (-0.5 * z * z).exp() / (s * sqrt_2pi())
}

/// k-th derivative of the N(0, s^2) density at x, via probabilists' Hermite
/// polynomials: phi_s^(k)(x) = (-1)^k He_k(x/s) phi(x/s) / s^(k+1).
pub fn normal_pdf_deriv(k: u32, x: f64, s: f64) -> f64 {
    let z = x / s;
    let (mut prev, mut cur) = (1.0, z);
    let he = match k {
        0 => 1.0,
        _ => {
            for j in 1..k {
                let next = z * cur - j as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    };
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * he * (-0.5 * z * z).exp() / (sqrt_2pi() * s.powi(k as i32 + 1))
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || sds.len() != k {
            return Err(Error::Config(format!(
                "mixture vectors must have equal nonzero length (weights {}, means {}, sds {})",
                k,
                means.len(),
                sds.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config("mixture weights must be positive".into()));
        }
        if sds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("mixture sds must be positive".into()));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("mixture means must be finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { weights, means, sds })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.iter().map(|(w, m, s)| w * normal_pdf(x - m, s)).sum()
    }

    /// r-th derivative of the density.
    pub fn pdf_deriv(&self, r: u32, x: f64) -> f64 {
        self.iter().map(|(w, m, s)| w * normal_pdf_deriv(r, x - m, s)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(w, m, _)| w * m).sum()
    }

    pub fn sd(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self.iter().map(|(w, m, s)| w * (s * s + m * m)).sum();
        (second - mean * mean).sqrt()
    }

    fn iter(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, m), s)| (*w, *m, *s))
    }

    /// Draws `n` observations (unsorted): component by inverse CDF on the
    /// weights, then a normal draw.
    pub fn draw(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, Domain::MixtureSample, 0);
        let mut cumulative = Vec::with_capacity(self.components());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cumulative.push(acc);
        }
        let last = self.components() - 1;
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * acc;
                let j = cumulative.iter().position(|&c| u < c).unwrap_or(last);
                let z: f64 = rng.sample(StandardNormal);
                self.means[j] + self.sds[j] * z
            })
            .collect()
    }

    /// [`draw`](Self::draw) wrapped as a sorted [`Sample`]; needs `n >= 2`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        Sample::new(self.draw(n, seed))
    }

    /// Closed-form R(f^(r)) for r = 0, 2, 3.
    pub fn functionals(&self) -> DensityFunctionals {
        DensityFunctionals {
            r_f: self.derivative_functional(0),
            r_f2: self.derivative_functional(2),
            r_f3: self.derivative_functional(3),
        }
    }

    /// R(f^(r)) = (-1)^r sum_ij w_i w_j phi^(2r)_{s_ij}(mu_i - mu_j), s_ij^2 = sigma_i^2 + sigma_j^2.
    pub fn derivative_functional(&self, r: u32) -> f64 {
        let sign = if r.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut total = 0.0;
        for (wi, mi, si) in self.iter() {
            for (wj, mj, sj) in self.iter() {
                let s = (si * si + sj * sj).sqrt();
                total += wi * wj * normal_pdf_deriv(2 * r, mi - mj, s);
            }
        }
        sign * total
    }

    /// sum_ij w_i w_j phi_{sqrt(a h^2 + sigma_i^2 + sigma_j^2)}(mu_i - mu_j).
    fn omega(&self, a: f64, h: f64) -> f64 {
        let mut total = 0.0;
        for (wi, mi, si) in self.iter() {
            for (wj, mj, sj) in self.iter() {
                total += wi * wj * normal_pdf(mi - mj, (a * h * h + si * si + sj * sj).sqrt());
            }
        }
        total
    }

    /// Exact MISE of the Gaussian-kernel estimator with bandwidth `h` from `n`
    /// observations of this mixture.
    pub fn mise_exact(&self, n: usize, h: f64) -> Result<f64> {
        if !(h > 0.0 && h.is_finite()) {
            return domain(format!("bandwidth must be positive, got {h}"));
        }
        if n < 2 {
            return domain(format!("sample size must be at least 2, got {n}"));
        }
        let nf = n as f64;
        Ok(
            INV_2_SQRT_PI / (nf * h) + (1.0 - 1.0 / nf) * self.omega(2.0, h) - 2.0 * self.omega(1.0, h)
                + self.omega(0.0, h),
        )
    }

    /// Minimiser h_{n0} of the exact MISE, searched on
    /// `[1e-3 n^{-1/5}, 10 n^{-1/5}]`.
    pub fn h_mise(&self, n: usize) -> Result<f64> {
        if n < 2 {
            return domain(format!("sample size must be at least 2, got {n}"));
        }
        let scale = (n as f64).powf(-0.2);
        let (lo, hi) = (1e-3 * scale, 10.0 * scale);
        let min = grid_golden(|h| self.mise_exact(n, h).unwrap_or(f64::INFINITY), lo, hi, 200, 1e-10)?;
        if min.boundary_hit {
            return Err(Error::Numerical(format!(
                "MISE minimiser for n={n} lies at the edge of [{lo:.4e}, {hi:.4e}]"
            )));
        }
        Ok(min.x)
    }
}

/// R(K)/(nh) + h^4 mu_2^2 R(f'')/4.
pub fn mise_asymptotic(functionals: &DensityFunctionals, kc: &KernelConstants, n: usize, h: f64) -> f64 {
    kc.r_k / (n as f64 * h) + 0.25 * h.powi(4) * kc.mu2 * kc.mu2 * functionals.r_f2
}

/// Minimiser of [`mise_asymptotic`]: (R(K) / (n mu_2^2 R(f'')))^{1/5}.
pub fn h_amise(functionals: &DensityFunctionals, kc: &KernelConstants, n: usize) -> f64 {
    (kc.r_k / (n as f64 * kc.mu2 * kc.mu2 * functionals.r_f2)).powf(0.2)
}
