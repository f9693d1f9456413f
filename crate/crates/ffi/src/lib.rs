//! C interface to `bagcv`.
//!
//! Every function returns a [`BcvStatus`]; results go through out-pointers.
//! On failure a message is kept per thread and can be read with
//! [`bcv_last_error_message`]. Handles are opaque and must be released with
//! their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bagcv::amse::{estimate_m0, minimize_amse, AmseInputs, PilotConfig};
use bagcv::bagging::{bagged_bandwidth, BagConfig};
use bagcv::cv::{cv_minimize, cv_score, Interval};
use bagcv::em::fit_mixture_bic;
use bagcv::kde::kde_eval;
use bagcv::kernel::gaussian_constants;
use bagcv::mixture::{preset, GaussianMixture};
use bagcv::{Error, Sample};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcvStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument is outside the domain of the operation.
    InvalidArgument = 2,
    /// The input data are unusable (non-finite values, too few points).
    Data = 3,
    /// A numerical routine failed.
    Numerical = 4,
    /// No mixture could be fitted.
    Fit = 5,
    /// Pilot estimation of the subsample size failed.
    Estimation = 6,
    /// Internal error; the library caught a panic.
    Panic = 7,
}

/// Sorted, finite univariate sample.
pub struct BcvSample(Sample);

/// Gaussian mixture density.
pub struct BcvMixture(GaussianMixture);

/// Outcome of full-sample cross-validation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BcvCvResult {
    pub h_opt: f64,
    pub cv_min: f64,
    pub search_lo: f64,
    pub search_hi: f64,
    /// Nonzero when the coarse grid minimum was at an interval end.
    pub boundary_hit: i32,
    pub evaluations: usize,
}

/// Settings of the bagged selector. Zero `lower` and `upper` select the
/// default search interval; zero `nb_sub` means `m` bins.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BcvBagOptions {
    pub m: usize,
    pub n_resamples: usize,
    pub seed: u64,
    pub lower: f64,
    pub upper: f64,
    /// Nonzero for binned CV on subsamples, zero for exact.
    pub binned: i32,
    pub nb_sub: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BcvBagResult {
    pub h_bag: f64,
    pub boundary_hits: usize,
    pub failures: usize,
    pub elapsed_seconds: f64,
}

/// Minimiser of the AMSE and the constants behind it.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BcvAmseResult {
    pub m_hat: usize,
    /// Nonzero when the minimiser is m = n.
    pub boundary: i32,
    pub a: f64,
    pub c: f64,
    pub mu_rescale: f64,
    pub mu_cv: f64,
    /// Pilot fits that failed (always 0 for known densities).
    pub pilot_failures: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Invalid(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> BcvStatus {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Json(_) => BcvStatus::InvalidArgument,
        Error::Data(_) | Error::Io(_) | Error::Csv(_) => BcvStatus::Data,
        Error::Numerical(_) => BcvStatus::Numerical,
        Error::Fit(_) => BcvStatus::Fit,
        Error::Estimation(_) => BcvStatus::Estimation,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BcvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BcvStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            BcvStatus::NullPointer
        }
        Ok(Err(Fail::Invalid(msg))) => {
            set_last_error(msg);
            BcvStatus::InvalidArgument
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {msg}"));
            BcvStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn interval(lower: f64, upper: f64) -> Result<Option<Interval>, Fail> {
    if lower == 0.0 && upper == 0.0 {
        Ok(None)
    } else {
        Ok(Some(Interval::new(lower, upper)?))
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bcv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bcv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `len` values into a new sample.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bcv_sample_new(values: *const f64, len: usize, out_sample: *mut *mut BcvSample) -> BcvStatus {
    guard(|| {
        let dst = out(out_sample, "out_sample")?;
        let v = slice(values, len, "values")?;
        let s = Sample::new(v.to_vec())?;
        *dst = Box::into_raw(Box::new(BcvSample(s)));
        Ok(())
    })
}

/// # Safety
/// `sample` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn bcv_sample_free(sample: *mut BcvSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of observations, or 0 for NULL.
///
/// # Safety
/// `sample` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bcv_sample_len(sample: *const BcvSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.len())
}

/// Least-squares CV criterion at bandwidth `h`.
///
/// # Safety
/// Pointers must be live/writable.
#[no_mangle]
pub unsafe extern "C" fn bcv_cv_score(sample: *const BcvSample, h: f64, out_score: *mut f64) -> BcvStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let dst = out(out_score, "out_score")?;
        *dst = cv_score(&s.0, h)?;
        Ok(())
    })
}

/// Full-sample CV bandwidth on `[lower, upper]` (both 0: default interval).
///
/// # Safety
/// Pointers must be live/writable.
#[no_mangle]
pub unsafe extern "C" fn bcv_cv_minimize(
    sample: *const BcvSample,
    lower: f64,
    upper: f64,
    out_result: *mut BcvCvResult,
) -> BcvStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let dst = out(out_result, "out_result")?;
        let r = cv_minimize(&s.0, interval(lower, upper)?)?;
        *dst = BcvCvResult {
            h_opt: r.h_opt,
            cv_min: r.cv_min,
            search_lo: r.search_lo,
            search_hi: r.search_hi,
            boundary_hit: r.boundary_hit as i32,
            evaluations: r.evaluations,
        };
        Ok(())
    })
}

/// Default options: binned subsamples, default interval.
#[no_mangle]
pub extern "C" fn bcv_bag_options_default(m: usize, n_resamples: usize, seed: u64) -> BcvBagOptions {
    BcvBagOptions {
        m,
        n_resamples,
        seed,
        lower: 0.0,
        upper: 0.0,
        binned: 1,
        nb_sub: 0,
    }
}

/// Bagged CV bandwidth. When `per_resample` is not NULL it receives the
/// `n_resamples` rescaled subsample bandwidths (NaN for failed ones).
///
/// # Safety
/// Pointers must be live; `per_resample` must hold `n_resamples` doubles.
#[no_mangle]
pub unsafe extern "C" fn bcv_bagged_bandwidth(
    sample: *const BcvSample,
    options: *const BcvBagOptions,
    out_result: *mut BcvBagResult,
    per_resample: *mut f64,
) -> BcvStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let o = *deref(options, "options")?;
        let dst = out(out_result, "out_result")?;
        let cfg = BagConfig {
            m: o.m,
            n_resamples: o.n_resamples,
            seed: o.seed,
            interval: interval(o.lower, o.upper)?,
            binned_sub: o.binned != 0,
            nb_sub: (o.nb_sub > 0).then_some(o.nb_sub),
        };
        let r = bagged_bandwidth(&s.0, &cfg)?;
        if !per_resample.is_null() {
            let buf = std::slice::from_raw_parts_mut(per_resample, o.n_resamples);
            for (d, v) in buf.iter_mut().zip(&r.per_resample) {
                *d = *v;
            }
        }
        *dst = BcvBagResult {
            h_bag: r.h_bag,
            boundary_hits: r.boundary_hits,
            failures: r.failures,
            elapsed_seconds: r.elapsed_seconds,
        };
        Ok(())
    })
}

/// Estimates the AMSE-optimal subsample size from `s` pilot mixture fits on
/// subsamples of size `r` (0: default).
///
/// # Safety
/// Pointers must be live/writable.
#[no_mangle]
pub unsafe extern "C" fn bcv_estimate_m0(
    sample: *const BcvSample,
    n_resamples: usize,
    s: usize,
    r: usize,
    seed: u64,
    out_result: *mut BcvAmseResult,
) -> BcvStatus {
    guard(|| {
        let data = deref(sample, "sample")?;
        let dst = out(out_result, "out_result")?;
        let n = data.0.len();
        let base = PilotConfig::recommended(n, seed);
        let pilot = PilotConfig {
            s,
            r: if r == 0 { base.r } else { r },
            ..base
        };
        let e = estimate_m0(&data.0, n, n_resamples, pilot)?;
        let i = e.model.inputs;
        *dst = BcvAmseResult {
            m_hat: e.model.m_hat,
            boundary: e.model.boundary as i32,
            a: i.a,
            c: i.c,
            mu_rescale: i.bias.mu_rescale,
            mu_cv: i.bias.mu_cv,
            pilot_failures: e.failures,
        };
        Ok(())
    })
}

/// Mixture from `k` weights, means and standard deviations.
///
/// # Safety
/// The arrays must hold `k` doubles; `out_mixture` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bcv_mixture_new(
    weights: *const f64,
    means: *const f64,
    sds: *const f64,
    k: usize,
    out_mixture: *mut *mut BcvMixture,
) -> BcvStatus {
    guard(|| {
        let dst = out(out_mixture, "out_mixture")?;
        let m = GaussianMixture::new(
            slice(weights, k, "weights")?.to_vec(),
            slice(means, k, "means")?.to_vec(),
            slice(sds, k, "sds")?.to_vec(),
        )?;
        *dst = Box::into_raw(Box::new(BcvMixture(m)));
        Ok(())
    })
}

/// Named reference mixture ("D1", "claw", "bimodal", "std_normal", ...).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out_mixture` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bcv_mixture_preset(name: *const c_char, out_mixture: *mut *mut BcvMixture) -> BcvStatus {
    guard(|| {
        let dst = out(out_mixture, "out_mixture")?;
        if name.is_null() {
            return Err(Fail::Null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Fail::Invalid("preset name is not UTF-8".into()))?;
        *dst = Box::into_raw(Box::new(BcvMixture(preset(name)?)));
        Ok(())
    })
}

/// Fits a mixture with at most `max_components` components by EM, choosing
/// the number of components by BIC.
///
/// # Safety
/// Pointers must be live/writable.
#[no_mangle]
pub unsafe extern "C" fn bcv_mixture_fit(
    sample: *const BcvSample,
    max_components: usize,
    seed: u64,
    out_mixture: *mut *mut BcvMixture,
) -> BcvStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let dst = out(out_mixture, "out_mixture")?;
        *dst = Box::into_raw(Box::new(BcvMixture(fit_mixture_bic(&s.0, max_components, seed)?)));
        Ok(())
    })
}

/// # Safety
/// `mixture` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn bcv_mixture_free(mixture: *mut BcvMixture) {
    if !mixture.is_null() {
        drop(Box::from_raw(mixture));
    }
}

/// Number of components, or 0 for NULL.
///
/// # Safety
/// `mixture` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bcv_mixture_components(mixture: *const BcvMixture) -> usize {
    mixture.as_ref().map_or(0, |m| m.0.components())
}

/// Density at each of `len` points.
///
/// # Safety
/// `xs` and `out_values` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bcv_mixture_pdf(
    mixture: *const BcvMixture,
    xs: *const f64,
    len: usize,
    out_values: *mut f64,
) -> BcvStatus {
    guard(|| {
        let m = deref(mixture, "mixture")?;
        let xs = slice(xs, len, "xs")?;
        if len > 0 && out_values.is_null() {
            return Err(Fail::Null("out_values"));
        }
        for (i, &x) in xs.iter().enumerate() {
            *out_values.add(i) = m.0.pdf(x);
        }
        Ok(())
    })
}

/// Draws `n` observations.
///
/// # Safety
/// Pointers must be live/writable.
#[no_mangle]
pub unsafe extern "C" fn bcv_mixture_sample(
    mixture: *const BcvMixture,
    n: usize,
    seed: u64,
    out_sample: *mut *mut BcvSample,
) -> BcvStatus {
    guard(|| {
        let m = deref(mixture, "mixture")?;
        let dst = out(out_sample, "out_sample")?;
        *dst = Box::into_raw(Box::new(BcvSample(m.0.sample(n, seed)?)));
        Ok(())
    })
}

/// Bandwidth minimising the exact MISE at sample size `n`.
///
/// # Safety
/// Pointers must be live/writable.
#[no_mangle]
pub unsafe extern "C" fn bcv_mixture_h_mise(mixture: *const BcvMixture, n: usize, out_h: *mut f64) -> BcvStatus {
    guard(|| {
        let m = deref(mixture, "mixture")?;
        let dst = out(out_h, "out_h")?;
        *dst = m.0.h_mise(n)?;
        Ok(())
    })
}

/// AMSE-optimal subsample size when the density is known.
///
/// # Safety
/// Pointers must be live/writable.
#[no_mangle]
pub unsafe extern "C" fn bcv_mixture_optimal_m(
    mixture: *const BcvMixture,
    n: usize,
    n_resamples: usize,
    out_result: *mut BcvAmseResult,
) -> BcvStatus {
    guard(|| {
        let m = deref(mixture, "mixture")?;
        let dst = out(out_result, "out_result")?;
        let inputs = AmseInputs::from_functionals(&m.0.functionals(), &gaussian_constants(), n, n_resamples);
        let model = minimize_amse(inputs)?;
        *dst = BcvAmseResult {
            m_hat: model.m_hat,
            boundary: model.boundary as i32,
            a: inputs.a,
            c: inputs.c,
            mu_rescale: inputs.bias.mu_rescale,
            mu_cv: inputs.bias.mu_cv,
            pilot_failures: 0,
        };
        Ok(())
    })
}

/// Kernel density estimate with bandwidth `h` at `len` points.
///
/// # Safety
/// `xs` and `out_values` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bcv_kde_eval(
    sample: *const BcvSample,
    h: f64,
    xs: *const f64,
    len: usize,
    out_values: *mut f64,
) -> BcvStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let xs = slice(xs, len, "xs")?;
        if len > 0 && out_values.is_null() {
            return Err(Fail::Null("out_values"));
        }
        let ys = kde_eval(&s.0, h, xs)?;
        ptr::copy_nonoverlapping(ys.as_ptr(), out_values, len);
        Ok(())
    })
}
