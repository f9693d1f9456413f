//! Bias and variance constants of the bagged bandwidth, its asymptotic mean
//! squared error as a function of the subsample size m, and the data-driven
//! choice of m.

use rayon::prelude::*;
use serde::Serialize;

use crate::bagging::subsample_indices;
use crate::cv::cv_minimize;
use crate::em::fit_mixture_bic;
use crate::error::{domain, Error, Result};
use crate::kernel::{gaussian_constants, KernelConstants};
use crate::mixture::{DensityFunctionals, Preset};
use crate::optimize::{golden_section, log_grid};
use crate::rng::{derive_seed, Domain};
use crate::sample::Sample;

/// Points of the AMSE curve kept in an [`AmseModel`].
pub const CURVE_POINTS: usize = 50;
const SEARCH_GRID: usize = 400;
/// Share of failed pilot fits above which m0 estimation is refused.
pub const MAX_PILOT_FAILURE_SHARE: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasConstants {
    pub mu_rescale: f64,
    pub mu_cv: f64,
}

impl BiasConstants {
    /// mu_rescale / |mu_cv|.
    pub fn ratio(&self) -> f64 {
        self.mu_rescale / self.mu_cv.abs()
    }
}

/// mu_rescale = R(K)^{3/5} R(f''') mu_4 / (20 R(f'')^{8/5}) and
/// mu_cv = -8 R(f) int VW / (25 R(K)^{8/5} R(f'')^{2/5}).
pub fn bias_constants(f: &DensityFunctionals, kc: &KernelConstants) -> BiasConstants {
    BiasConstants {
        mu_rescale: kc.r_k.powf(0.6) * f.r_f3 * kc.mu4 / (20.0 * f.r_f2.powf(1.6)),
        mu_cv: -8.0 * f.r_f * kc.int_vw / (25.0 * kc.r_k.powf(1.6) * f.r_f2.powf(0.4)),
    }
}

/// C = (R(K) / (mu_2^2 R(f'')))^{1/5}, so that h_{n0} ~ C n^{-1/5}.
pub fn c_constant(f: &DensityFunctionals, kc: &KernelConstants) -> f64 {
    (kc.r_k / (kc.mu2 * kc.mu2 * f.r_f2)).powf(0.2)
}

/// A = 8 R(V) R(f) mu_2^{4/5} / (25 R(K)^{9/5} R(f'')^{1/5}), the
/// scale-free constant in var(h_m) / h_{m0}^2 ~ A m^{-1/5}.
pub fn a_constant(f: &DensityFunctionals, kc: &KernelConstants) -> f64 {
    8.0 * kc.r_v * f.r_f * kc.mu2.powf(0.8) / (25.0 * kc.r_k.powf(1.8) * f.r_f2.powf(0.2))
}

/// Smallest m at which mu_cv + mu_rescale m^{-1/5} <= 0.
pub fn m_crit(bias: &BiasConstants) -> Result<u64> {
    if !(bias.mu_cv < 0.0 && bias.mu_rescale > 0.0) {
        return domain(format!(
            "m_crit needs mu_cv < 0 < mu_rescale, got mu_cv={}, mu_rescale={}",
            bias.mu_cv, bias.mu_rescale
        ));
    }
    let m = bias.ratio().powi(5).ceil();
    if m >= u64::MAX as f64 {
        return domain("m_crit overflows");
    }
    Ok(m as u64)
}

/// The constants that define the AMSE curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmseInputs {
    pub a: f64,
    pub c: f64,
    pub bias: BiasConstants,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
}

impl AmseInputs {
    pub fn from_functionals(f: &DensityFunctionals, kc: &KernelConstants, n: usize, big_n: usize) -> Self {
        Self {
            a: a_constant(f, kc),
            c: c_constant(f, kc),
            bias: bias_constants(f, kc),
            n,
            big_n,
        }
    }

    /// AMSE at real-valued m.
    pub fn curve(&self, m: f64) -> f64 {
        let (n, big_n) = (self.n as f64, self.big_n as f64);
        let variance = self.a * self.c * self.c * m.powf(-0.2) * n.powf(-0.4) * (1.0 / big_n + (m / n).powi(2));
        let bias = self.bias.mu_cv + self.bias.mu_rescale * m.powf(-0.2);
        variance + m.powf(-0.4) * n.powf(-0.4) * bias * bias
    }

    /// The variance part of [`curve`](Self::curve).
    pub fn variance_part(&self, m: f64) -> f64 {
        let (n, big_n) = (self.n as f64, self.big_n as f64);
        self.a * self.c * self.c * m.powf(-0.2) * n.powf(-0.4) * (1.0 / big_n + (m / n).powi(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmseModel {
    #[serde(flatten)]
    pub inputs: AmseInputs,
    pub m_hat: usize,
    /// The minimiser is at m = n, i.e. bagging brings nothing.
    pub boundary: bool,
    /// (m, AMSE) at log-spaced m over [2, n].
    pub curve: Vec<(f64, f64)>,
}

/// Minimises the AMSE over m in [2, n]: log grid, golden-section refinement
/// in log m, then the better of the two neighbouring integers (ties go to the
/// smaller one).
pub fn minimize_amse(inputs: AmseInputs) -> Result<AmseModel> {
    if inputs.n < 2 || inputs.big_n < 1 {
        return domain(format!(
            "need n >= 2 and N >= 1, got n={}, N={}",
            inputs.n, inputs.big_n
        ));
    }
    if !(inputs.a > 0.0 && inputs.c > 0.0) {
        return domain(format!("A and C must be positive, got A={}, C={}", inputs.a, inputs.c));
    }
    let n = inputs.n as f64;
    let m_best = if inputs.n == 2 {
        2.0
    } else {
        let grid = log_grid(2.0, n, SEARCH_GRID);
        let values: Vec<f64> = grid.iter().map(|&m| inputs.curve(m)).collect();
        let k = (0..grid.len())
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap();
        let left = grid[k.saturating_sub(1)].ln();
        let right = grid[(k + 1).min(grid.len() - 1)].ln();
        let (t, _, _) = golden_section(|t| inputs.curve(t.exp()), left, right, 1e-12);
        t.exp().clamp(2.0, n)
    };
    let (lo, hi) = (m_best.floor().max(2.0), m_best.ceil().min(n));
    let m_hat = if inputs.curve(hi) < inputs.curve(lo) { hi } else { lo } as usize;
    let curve = log_grid(2.0, n.max(3.0), CURVE_POINTS)
        .into_iter()
        .map(|m| (m, inputs.curve(m)))
        .collect();
    Ok(AmseModel {
        inputs,
        m_hat,
        boundary: m_hat == inputs.n,
        curve,
    })
}

/// Settings of the pilot stage of m0 estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PilotConfig {
    /// Number of pilot subsamples.
    pub s: usize,
    /// Pilot subsample size.
    pub r: usize,
    pub max_components: usize,
    pub seed: u64,
}

impl PilotConfig {
    /// s = 50, r = max(500, n/100) (capped at n - 1), up to 9 components.
    pub fn recommended(n: usize, seed: u64) -> Self {
        Self {
            s: 50,
            r: (n / 100).max(500).min(n.saturating_sub(1)),
            max_components: 9,
            seed,
        }
    }
}

/// Constants estimated from one pilot subsample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PilotConstants {
    pub components: usize,
    pub a: f64,
    pub c: f64,
    pub mu_rescale: f64,
    pub mu_cv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct M0Estimate {
    pub model: AmseModel,
    pub pilot: PilotConfig,
    pub pilots: Vec<PilotConstants>,
    pub failures: usize,
    pub warnings: Vec<String>,
}

/// Estimates the AMSE-optimal subsample size for bagging with `big_n`
/// resamples on a sample of size `n` (usually `data.len()`): fits a normal
/// mixture to each of `s` pilot subsamples of size `r`, averages the
/// resulting constants and minimises the AMSE.
pub fn estimate_m0(data: &Sample, n: usize, big_n: usize, pilot: PilotConfig) -> Result<M0Estimate> {
    estimate_m0_with(data, n, big_n, pilot, &gaussian_constants())
}

pub fn estimate_m0_with(
    data: &Sample,
    n: usize,
    big_n: usize,
    pilot: PilotConfig,
    kc: &KernelConstants,
) -> Result<M0Estimate> {
    if pilot.s == 0 {
        return domain("need at least one pilot subsample");
    }
    if pilot.r < 2 || pilot.r >= data.len() {
        return domain(format!("pilot size r={} must be in [2, {})", pilot.r, data.len()));
    }
    let fits: Vec<Result<PilotConstants>> = (0..pilot.s as u64)
        .into_par_iter()
        .map(|i| {
            let idx = subsample_indices(
                data.len(),
                pilot.r,
                derive_seed(pilot.seed, Domain::PilotSubsample as u64),
                i,
            )?;
            let sub = data.select(&idx);
            let mixture = fit_mixture_bic(&sub, pilot.max_components, derive_seed(pilot.seed, i))?;
            let f = mixture.functionals();
            let b = bias_constants(&f, kc);
            Ok(PilotConstants {
                components: mixture.components(),
                a: a_constant(&f, kc),
                c: c_constant(&f, kc),
                mu_rescale: b.mu_rescale,
                mu_cv: b.mu_cv,
            })
        })
        .collect();
    let mut pilots = Vec::with_capacity(fits.len());
    let mut warnings = Vec::new();
    for (i, f) in fits.into_iter().enumerate() {
        match f {
            Ok(p) => pilots.push(p),
            Err(e) => warnings.push(format!("pilot {i}: {e}")),
        }
    }
    let failures = warnings.len();
    if failures as f64 > MAX_PILOT_FAILURE_SHARE * pilot.s as f64 || pilots.is_empty() {
        return Err(Error::Estimation(format!(
            "{failures} of {} pilot fits failed: {}",
            pilot.s,
            warnings.first().cloned().unwrap_or_default()
        )));
    }
    let mean = |g: fn(&PilotConstants) -> f64| pilots.iter().map(g).sum::<f64>() / pilots.len() as f64;
    let inputs = AmseInputs {
        a: mean(|p| p.a),
        c: mean(|p| p.c),
        bias: BiasConstants {
            mu_rescale: mean(|p| p.mu_rescale),
            mu_cv: mean(|p| p.mu_cv),
        },
        n,
        big_n,
    };
    let model = minimize_amse(inputs)?;
    if model.boundary {
        warnings.push(format!(
            "AMSE minimiser is m = n = {n}; bagging degenerates to plain CV"
        ));
    }
    Ok(M0Estimate {
        model,
        pilot,
        pilots,
        failures,
        warnings,
    })
}

/// Monte Carlo estimate of A at one subsample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationLevel {
    pub m: usize,
    pub replicates: usize,
    pub h_m0: f64,
    pub mean_h: f64,
    pub var_h: f64,
    pub a_hat: f64,
    pub r_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub seed: u64,
    pub levels: Vec<CalibrationLevel>,
    /// Average of the per-level R(V) estimates.
    pub r_v: f64,
    /// R(V) from the kernel constants, for comparison.
    pub r_v_reference: f64,
    /// max/min of the per-level A estimates.
    pub a_spread: f64,
    /// D1 at (n = 1e5, N = 500) with the calibrated R(V).
    pub d1_m_hat: usize,
    pub d1_target: usize,
    pub d1_within_10pct: bool,
}

/// Subsample sizes used by [`calibrate_rv`].
pub const CALIBRATION_SIZES: [usize; 2] = [1_000, 2_000];

/// Estimates R(V) by Monte Carlo: for standard normal samples of size m the
/// CV bandwidth has var(h_m) / h_{m0}^2 ~ A m^{-1/5}; solving for R(V) at
/// two sizes and averaging.
pub fn calibrate_rv(seed: u64, replicates: usize) -> Result<CalibrationReport> {
    if replicates < 500 {
        return domain(format!("calibration needs at least 500 replicates, got {replicates}"));
    }
    calibrate_rv_at(seed, replicates, &CALIBRATION_SIZES)
}

pub(crate) fn calibrate_rv_at(seed: u64, replicates: usize, sizes: &[usize]) -> Result<CalibrationReport> {
    let kc = gaussian_constants();
    let normal = Preset::StdNormal.mixture();
    let f = normal.functionals();
    // A with R(V) = 1
    let a_unit = a_constant(&f, &kc.with_r_v(1.0));
    let mut levels = Vec::new();
    for &m in sizes {
        let h_m0 = normal.h_mise(m)?;
        let base = derive_seed(seed, Domain::Calibration as u64 ^ (m as u64) << 8);
        let hs: Vec<f64> = (0..replicates as u64)
            .into_par_iter()
            .map(|i| {
                let data = normal.sample(m, derive_seed(base, i))?;
                Ok(cv_minimize(&data, None)?.h_opt)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean_h = hs.iter().sum::<f64>() / hs.len() as f64;
        let var_h = hs.iter().map(|h| (h - mean_h).powi(2)).sum::<f64>() / (hs.len() - 1) as f64;
        let a_hat = var_h / (h_m0 * h_m0) * (m as f64).powf(0.2);
        levels.push(CalibrationLevel {
            m,
            replicates,
            h_m0,
            mean_h,
            var_h,
            a_hat,
            r_v: a_hat / a_unit,
        });
    }
    let a_max = levels.iter().map(|l| l.a_hat).fold(f64::NEG_INFINITY, f64::max);
    let a_min = levels.iter().map(|l| l.a_hat).fold(f64::INFINITY, f64::min);
    let a_spread = a_max / a_min;
    if a_spread > 1.25 {
        return Err(Error::Numerical(format!(
            "calibration failed: A estimates {:?} disagree by more than 25%",
            levels.iter().map(|l| l.a_hat).collect::<Vec<_>>()
        )));
    }
    let r_v = levels.iter().map(|l| l.r_v).sum::<f64>() / levels.len() as f64;
    let d1 = Preset::D1.mixture().functionals();
    let d1_m_hat = minimize_amse(AmseInputs::from_functionals(&d1, &kc.with_r_v(r_v), 100_000, 500))?.m_hat;
    let d1_target = 13_081;
    Ok(CalibrationReport {
        seed,
        levels,
        r_v,
        r_v_reference: kc.r_v,
        a_spread,
        d1_m_hat,
        d1_target,
        d1_within_10pct: (d1_m_hat as f64 / d1_target as f64 - 1.0).abs() <= 0.10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::AnalyticDensity;

    fn preset_inputs(p: Preset, n: usize, big_n: usize) -> AmseInputs {
        AmseInputs::from_functionals(&p.mixture().functionals(), &gaussian_constants(), n, big_n)
    }

    #[test]
    fn table_constants_for_mixtures() {
        let kc = gaussian_constants();
        let normal = bias_constants(&Preset::StdNormal.mixture().functionals(), &kc);
        assert!((normal.mu_rescale - 0.44565).abs() < 5e-4);
        assert!((normal.mu_cv + 0.18216).abs() < 5e-4);
        let claw = bias_constants(&Preset::Claw.mixture().functionals(), &kc);
        assert!((claw.mu_rescale - 0.22774).abs() < 5e-4);
        assert!((claw.mu_cv + 0.00766).abs() < 5e-4);
        assert_eq!(m_crit(&normal).unwrap(), 88);
        assert!(m_crit(&claw).unwrap() > 10_000_000);
    }

    #[test]
    fn table_constants_by_quadrature() {
        let kc = gaussian_constants();
        let cauchy = bias_constants(&AnalyticDensity::Cauchy.functionals().unwrap(), &kc);
        assert!((cauchy.mu_rescale - 1.24349).abs() < 1e-3);
        assert!((cauchy.mu_cv + 0.09793).abs() < 1e-3);
        let beta = bias_constants(&AnalyticDensity::Beta { a: 5.0, b: 5.0 }.functionals().unwrap(), &kc);
        assert_eq!(m_crit(&beta).unwrap(), 45);
    }

    #[test]
    fn ratio_is_affine_invariant() {
        let kc = gaussian_constants();
        let base = bias_constants(&Preset::StdNormal.mixture().functionals(), &kc).ratio();
        for (mu, sd) in [(3.0, 0.1), (-7.0, 12.0)] {
            let m = crate::mixture::GaussianMixture::new(vec![1.0], vec![mu], vec![sd]).unwrap();
            let r = bias_constants(&m.functionals(), &kc).ratio();
            assert!((r / base - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn ratio_exceeds_two_for_presets() {
        for p in Preset::ALL {
            let b = bias_constants(&p.mixture().functionals(), &gaussian_constants());
            assert!(b.ratio() >= 2.0, "{p}");
        }
    }

    #[test]
    fn constants_scale_as_expected() {
        let kc = gaussian_constants();
        let f = Preset::StdNormal.mixture().functionals();
        assert!((c_constant(&f, &kc) - 1.0592).abs() < 1e-3);
        let a = a_constant(&f, &kc);
        assert!((a_constant(&f, &kc.with_r_v(2.0 * kc.r_v)) - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn m_crit_rejects_wrong_signs() {
        assert!(m_crit(&BiasConstants {
            mu_rescale: 1.0,
            mu_cv: 0.1
        })
        .is_err());
        assert!(m_crit(&BiasConstants {
            mu_rescale: -1.0,
            mu_cv: -0.1
        })
        .is_err());
    }

    #[test]
    fn m0_anchors() {
        let d1 = minimize_amse(preset_inputs(Preset::D1, 100_000, 500)).unwrap();
        assert!((d1.m_hat as f64 / 13_081.0 - 1.0).abs() < 0.02, "{}", d1.m_hat);
        let claw = minimize_amse(preset_inputs(Preset::Claw, 100_000, 500)).unwrap();
        assert!((claw.m_hat as f64 / 20_326.0 - 1.0).abs() < 0.02, "{}", claw.m_hat);
        assert!(!d1.boundary && !claw.boundary);
        assert_eq!(d1.curve.len(), CURVE_POINTS);
    }

    #[test]
    fn minimiser_beats_every_curve_point_and_neighbours() {
        for p in Preset::ALL {
            for (n, big_n) in [(10_000, 10), (10_000, 100), (1_000_000, 100)] {
                let model = minimize_amse(preset_inputs(p, n, big_n)).unwrap();
                let best = model.inputs.curve(model.m_hat as f64);
                assert!(
                    model.curve.iter().all(|&(_, v)| best <= v + 1e-15 * v.abs()),
                    "{p} {n} {big_n}"
                );
                for m in [model.m_hat - 1, model.m_hat + 1] {
                    if (2..=n).contains(&m) {
                        assert!(best <= model.inputs.curve(m as f64));
                    }
                }
                assert!(model.m_hat < n, "{p} n={n} N={big_n} interior minimiser");
            }
        }
    }

    #[test]
    fn more_resamples_never_increase_variance() {
        let base = preset_inputs(Preset::D1, 100_000, 10);
        for m in [10.0, 1e3, 5e4] {
            let mut last = f64::INFINITY;
            for big_n in [1, 10, 100, 1000] {
                let v = AmseInputs { big_n, ..base }.variance_part(m);
                assert!(v <= last);
                last = v;
            }
        }
    }

    #[test]
    fn curve_falls_from_small_m_towards_the_minimiser() {
        for p in Preset::ALL {
            let i = preset_inputs(p, 100_000, 100);
            let m_hat = minimize_amse(i).unwrap().m_hat as f64;
            let grid = log_grid(2.0, m_hat / 20.0, 30);
            assert!(grid.windows(2).all(|w| i.curve(w[1]) < i.curve(w[0])), "{p}");
            assert!(i.curve(2.0) > 2.0 * i.curve(m_hat), "{p}");
        }
    }

    #[test]
    fn pilot_on_nearly_all_data_tracks_truth() {
        let data = Preset::StdNormal.mixture().sample(20_000, 31).unwrap();
        let pilot = PilotConfig {
            s: 1,
            r: 19_999,
            max_components: 3,
            seed: 4,
        };
        let est = estimate_m0(&data, 20_000, 100, pilot).unwrap();
        let truth = minimize_amse(preset_inputs(Preset::StdNormal, 20_000, 100)).unwrap();
        let rel = est.model.m_hat as f64 / truth.m_hat as f64 - 1.0;
        assert!(rel.abs() < 0.05, "{} vs {}", est.model.m_hat, truth.m_hat);
    }

    #[test]
    fn estimate_is_deterministic_and_validates() {
        let data = Preset::D1.mixture().sample(5_000, 2).unwrap();
        let pilot = PilotConfig {
            s: 4,
            r: 500,
            max_components: 4,
            seed: 10,
        };
        let a = estimate_m0(&data, 5_000, 50, pilot).unwrap();
        let b = estimate_m0(&data, 5_000, 50, pilot).unwrap();
        assert_eq!(a, b);
        assert!(estimate_m0(&data, 5_000, 50, PilotConfig { s: 0, ..pilot }).is_err());
        assert!(estimate_m0(&data, 5_000, 50, PilotConfig { r: 6_000, ..pilot }).is_err());
    }

    #[test]
    fn calibration_needs_enough_replicates() {
        assert!(calibrate_rv(1, 100).is_err());
    }
}
