use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amse::{estimate_m0, minimize_amse, AmseInputs, PilotConfig};
use crate::bagging::{bagged_bandwidth, BagConfig};
use crate::binned::{bin_sample, cv_minimize_binned};
use crate::cv::Interval;
use crate::error::{domain, Error, Result};
use crate::kde::{ise, ise_grid};
use crate::kernel::gaussian_constants;
use crate::mixture::{GaussianMixture, Preset};
use crate::rng::{derive_seed, Domain};
use crate::sample::Sample;

/// A preset name or explicit mixture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensitySpec {
    Preset(Preset),
    Mixture(GaussianMixture),
}

impl DensitySpec {
    pub fn mixture(&self) -> GaussianMixture {
        match self {
            DensitySpec::Preset(p) => p.mixture(),
            DensitySpec::Mixture(m) => m.clone(),
        }
    }
}

/// A subsample size, or `"analytic"` for the AMSE minimiser computed from the
/// true density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MChoice {
    Fixed(usize),
    Named(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M0Params {
    pub s: usize,
    pub r: usize,
}

fn default_true() -> bool {
    true
}

fn default_grid() -> usize {
    2048
}

/// A replicated simulation: `reps` samples of size `n` from `density`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub density: DensitySpec,
    pub n: usize,
    pub reps: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub m_list: Vec<MChoice>,
    pub seed: u64,
    #[serde(default)]
    pub estimate_m0_params: Option<M0Params>,
    /// Binned CV on the subsamples (nb = m).
    #[serde(default = "default_true")]
    pub binned_sub: bool,
    /// Bins for the full-sample CV bandwidth (default n).
    #[serde(default)]
    pub nb_loo: Option<usize>,
    /// Search interval for every CV minimisation (default: data-driven).
    #[serde(default)]
    pub interval: Option<Interval>,
    #[serde(default = "default_grid")]
    pub ise_grid_points: usize,
}

impl StudySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: StudySpec = serde_json::from_str(text)?;
        spec.resolve_m_list()?;
        Ok(spec)
    }

    /// Concrete subsample sizes, validated against n.
    pub fn resolve_m_list(&self) -> Result<Vec<usize>> {
        if self.reps == 0 || self.big_n == 0 || self.n < 2 {
            return Err(Error::Config(format!(
                "study needs reps >= 1, N >= 1, n >= 2 (got {}, {}, {})",
                self.reps, self.big_n, self.n
            )));
        }
        if self.ise_grid_points < 3 {
            return Err(Error::Config("ise_grid_points must be at least 3".into()));
        }
        self.m_list
            .iter()
            .map(|c| {
                let m = match c {
                    MChoice::Fixed(m) => *m,
                    MChoice::Named(s) if s == "analytic" => {
                        let f = self.density.mixture().functionals();
                        minimize_amse(AmseInputs::from_functionals(
                            &f,
                            &gaussian_constants(),
                            self.n,
                            self.big_n,
                        ))?
                        .m_hat
                    }
                    MChoice::Named(s) => return Err(Error::Config(format!("unknown m choice {s:?}"))),
                };
                if m < 2 || m > self.n {
                    return Err(Error::Config(format!("subsample size {m} outside [2, {}]", self.n)));
                }
                Ok(m)
            })
            .collect()
    }

    fn replicate_seed(&self, rep: usize) -> u64 {
        derive_seed(derive_seed(self.seed, Domain::Replicate as u64), rep as u64)
    }
}

/// Bandwidths from one replicate.
struct Replicate {
    data: Sample,
    loo: f64,
    bagged: Vec<(usize, f64)>,
    m0: Option<(usize, f64)>,
}

fn run_replicate(spec: &StudySpec, f: &GaussianMixture, ms: &[usize], rep: usize) -> Result<Replicate> {
    let seed = spec.replicate_seed(rep);
    let data = f.sample(spec.n, seed)?;
    let b = bin_sample(&data, spec.nb_loo.unwrap_or(spec.n))?;
    let loo = cv_minimize_binned(&b, spec.interval)?.h_opt;
    let bag = |m: usize| -> Result<f64> {
        let mut cfg = BagConfig::new(m, spec.big_n, derive_seed(seed, 1));
        cfg.binned_sub = spec.binned_sub;
        cfg.interval = spec.interval;
        Ok(bagged_bandwidth(&data, &cfg)?.h_bag)
    };
    let bagged = ms.iter().map(|&m| Ok((m, bag(m)?))).collect::<Result<Vec<_>>>()?;
    let m0 = match spec.estimate_m0_params {
        Some(p) => {
            let pilot = PilotConfig {
                s: p.s,
                r: p.r,
                ..PilotConfig::recommended(spec.n, derive_seed(seed, 2))
            };
            let m = estimate_m0(&data, spec.n, spec.big_n, pilot)?.model.m_hat;
            Some((m, bag(m)?))
        }
        None => None,
    };
    Ok(Replicate { data, loo, bagged, m0 })
}

/// One row of the sampling-study CSV. `value` is log(h / h_{n0}) for
/// bandwidth methods and the estimate itself for `m0_hat`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingRecord {
    pub rep: usize,
    pub method: String,
    pub m: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingStudy {
    pub h_n0: f64,
    pub records: Vec<SamplingRecord>,
    /// (replicate, error message) for replicates that failed.
    pub failures: Vec<(usize, String)>,
}

impl SamplingStudy {
    /// log(h / h_{n0}) values of one method, optionally at one m.
    pub fn values(&self, method: &str, m: Option<usize>) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method && m.is_none_or(|m| r.m == m))
            .map(|r| r.value)
            .collect()
    }

    /// CSV with header `rep,method,m,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_all<T: Send>(spec: &StudySpec, work: impl Fn(usize) -> Result<T> + Sync) -> Vec<(usize, Result<T>)> {
    (0..spec.reps).into_par_iter().map(|rep| (rep, work(rep))).collect()
}

/// Sampling distributions of log(h / h_{n0}) for full-sample CV (`loo`,
/// binned with nb = n) and the bagged bandwidth at every m.
pub fn run_sampling_study(spec: &StudySpec) -> Result<SamplingStudy> {
    let ms = spec.resolve_m_list()?;
    let f = spec.density.mixture();
    let h_n0 = f.h_mise(spec.n)?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rep, out) in run_all(spec, |rep| run_replicate(spec, &f, &ms, rep)) {
        match out {
            Ok(r) => {
                let rec = |method: &str, m: usize, value: f64| SamplingRecord {
                    rep,
                    method: method.into(),
                    m,
                    value,
                };
                records.push(rec("loo", spec.n, (r.loo / h_n0).ln()));
                for (m, h) in r.bagged {
                    records.push(rec("bagged", m, (h / h_n0).ln()));
                }
                if let Some((m, h)) = r.m0 {
                    records.push(rec("m0_hat", m, m as f64));
                    records.push(rec("bagged_m0", m, (h / h_n0).ln()));
                }
            }
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    if records.is_empty() {
        return domain(format!("every replicate failed: {:?}", failures.first()));
    }
    Ok(SamplingStudy {
        h_n0,
        records,
        failures,
    })
}

/// ISE(bagged at m) / ISE(full-sample CV) for one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IseRecord {
    pub rep: usize,
    pub m: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IseSummary {
    pub m: usize,
    pub mean_ratio: f64,
    pub proportion_below_one: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IseStudy {
    pub records: Vec<IseRecord>,
    pub summary: Vec<IseSummary>,
    pub failures: Vec<(usize, String)>,
}

impl IseStudy {
    /// CSV with header `rep,m,ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run_ise_study(spec: &StudySpec) -> Result<IseStudy> {
    let ms = spec.resolve_m_list()?;
    let f = spec.density.mixture();
    let grid = ise_grid(&f, spec.ise_grid_points);
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let outcomes = run_all(spec, |rep| {
        let r = run_replicate(spec, &f, &ms, rep)?;
        let base = ise(&r.data, r.loo, &f, &grid)?;
        r.bagged
            .iter()
            .map(|&(m, h)| Ok((m, ise(&r.data, h, &f, &grid)? / base)))
            .collect::<Result<Vec<_>>>()
    });
    for (rep, out) in outcomes {
        match out {
            Ok(ratios) => records.extend(ratios.into_iter().map(|(m, ratio)| IseRecord { rep, m, ratio })),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    let summary = ms
        .iter()
        .map(|&m| {
            let r: Vec<f64> = records.iter().filter(|x| x.m == m).map(|x| x.ratio).collect();
            let k = r.len().max(1) as f64;
            IseSummary {
                m,
                mean_ratio: r.iter().sum::<f64>() / k,
                proportion_below_one: r.iter().filter(|&&x| x < 1.0).count() as f64 / k,
            }
        })
        .collect();
    Ok(IseStudy {
        records,
        summary,
        failures,
    })
}
