//! Adaptive Gauss–Kronrod quadrature and fixed-grid rules.

use crate::error::{numerical, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub segments: usize,
}

/// Convergence targets for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
    pub initial_segments: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-10,
            max_segments: 4000,
            initial_segments: 16,
        }
    }
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self { rel, ..Self::default() }
    }
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Segment { a, b, value, error }
}

/// Integrates `f` over `[lo, hi]`; either bound may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<Quadrature> {
    if lo.is_nan() || hi.is_nan() {
        return numerical("quadrature bounds are NaN");
    }
    if lo == hi {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            segments: 0,
        });
    }
    if lo > hi {
        let q = integrate(f, hi, lo, tol)?;
        return Ok(Quadrature { value: -q.value, ..q });
    }
    let guard = |x: f64, w: f64| {
        if !x.is_finite() || w == 0.0 {
            0.0
        } else {
            let y = f(x) * w;
            if y.is_finite() {
                y
            } else {
                0.0
            }
        }
    };
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(&f, lo, hi, tol),
        (false, false) => adaptive(
            &|t: f64| {
                let d = 1.0 - t * t;
                guard(t / d, (1.0 + t * t) / (d * d))
            },
            -1.0,
            1.0,
            tol,
        ),
        (true, false) => adaptive(
            &|t: f64| {
                let d = 1.0 - t;
                guard(lo + t / d, 1.0 / (d * d))
            },
            0.0,
            1.0,
            tol,
        ),
        (false, true) => adaptive(
            &|t: f64| {
                let d = 1.0 - t;
                guard(hi - t / d, 1.0 / (d * d))
            },
            0.0,
            1.0,
            tol,
        ),
    }
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<Quadrature> {
    let k = tol.initial_segments.max(1);
    let width = (b - a) / k as f64;
    let mut segments: Vec<Segment> = (0..k)
        .map(|i| {
            let sa = a + width * i as f64;
            let sb = if i + 1 == k { b } else { a + width * (i + 1) as f64 };
            kronrod(f, sa, sb)
        })
        .collect();
    let mut evaluations = 15 * k;
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return numerical(format!(
                "quadrature over [{a}, {b}] produced a non-finite value after {evaluations} evaluations"
            ));
        }
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Quadrature {
                value,
                error,
                evaluations,
                segments: segments.len(),
            });
        }
        if segments.len() >= tol.max_segments {
            return numerical(format!(
                "quadrature over [{a}, {b}] did not converge: estimate {value:.6e}, error {error:.3e}, \
                 {} segments, {evaluations} evaluations",
                segments.len()
            ));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("segment list is never empty");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return numerical(format!(
                "quadrature over [{a}, {b}] hit floating-point resolution near {mid:.6e}"
            ));
        }
        segments.push(kronrod(f, s.a, mid));
        segments.push(kronrod(f, mid, s.b));
        evaluations += 30;
    }
}

/// Composite Simpson rule on an equally spaced grid with an even number of
/// intervals (`ys.len()` odd).
pub fn simpson(ys: &[f64], dx: f64) -> f64 {
    debug_assert!(ys.len() >= 3 && ys.len() % 2 == 1);
    let last = ys.len() - 1;
    let mut sum = ys[0] + ys[last];
    for (i, y) in ys.iter().enumerate().take(last).skip(1) {
        sum += if i % 2 == 1 { 4.0 * y } else { 2.0 * y };
    }
    sum * dx / 3.0
}

pub fn trapezoid(ys: &[f64], dx: f64) -> f64 {
    if ys.len() < 2 {
        return 0.0;
    }
    let inner: f64 = ys[1..ys.len() - 1].iter().sum();
    dx * (inner + 0.5 * (ys[0] + ys[ys.len() - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_gaussian() {
        let q = integrate(|x| x * x, 0.0, 3.0, Tolerance::default()).unwrap();
        assert!((q.value - 9.0).abs() < 1e-12);
        let g = integrate(
            |x| (-0.5 * x * x).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            Tolerance::default(),
        )
        .unwrap();
        assert!((g.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn half_lines_and_reversed_bounds() {
        let q = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, Tolerance::default()).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
        let q = integrate(|x| x.exp(), f64::NEG_INFINITY, 0.0, Tolerance::default()).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
        let r = integrate(|x| x, 1.0, 0.0, Tolerance::default()).unwrap();
        assert!((r.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn non_convergence_reports_diagnostics() {
        let tol = Tolerance {
            max_segments: 20,
            ..Tolerance::default()
        };
        let err = integrate(|x| (1.0 / x).sin(), 1e-8, 1.0, tol).unwrap_err();
        assert!(err.to_string().contains("did not converge"));
    }

    #[test]
    fn fixed_grid_rules() {
        let n = 101;
        let dx = 1.0 / (n - 1) as f64;
        let ys: Vec<f64> = (0..n).map(|i| (i as f64 * dx).powi(3)).collect();
        assert!((simpson(&ys, dx) - 0.25).abs() < 1e-14);
        assert!((trapezoid(&ys, dx) - 0.25).abs() < 1e-4);
    }
}
