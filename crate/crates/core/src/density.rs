//! Derivative functionals R(f), R(f''), R(f''') of arbitrary densities by
//! adaptive quadrature over Richardson-extrapolated central differences.
//! Used for the densities that are not normal mixtures (Beta, logistic,
//! Cauchy).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{DensityFunctionals, GaussianMixture};
use crate::quadrature::{integrate, Tolerance};

/// Closed interval of support; bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub const REAL_LINE: Support = Support {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Domain(format!("invalid support [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    fn distance_to_edge(&self, x: f64) -> f64 {
        (x - self.lo).min(self.hi - x)
    }
}

/// Richardson-extrapolated central differences for f'' and f'''.
struct Differentiator<'a, F> {
    pdf: &'a F,
    support: Support,
    step: f64,
}

impl<F: Fn(f64) -> f64> Differentiator<'_, F> {
    fn eval(&self, x: f64) -> f64 {
        if x < self.support.lo || x > self.support.hi {
            0.0
        } else {
            (self.pdf)(x)
        }
    }

    /// Step at x: the nominal step, shrunk so the widest stencil (+-2h) stays
    /// inside the support.
    fn step_at(&self, x: f64) -> f64 {
        let edge = self.support.distance_to_edge(x);
        if edge.is_finite() {
            self.step.min(edge / 2.1)
        } else {
            self.step
        }
    }

    fn second(&self, x: f64) -> f64 {
        let h = self.step_at(x);
        if h <= 0.0 {
            return 0.0;
        }
        let d = |h: f64| (self.eval(x + h) - 2.0 * self.eval(x) + self.eval(x - h)) / (h * h);
        let (coarse, fine) = (d(h), d(0.5 * h));
        fine + (fine - coarse) / 3.0
    }

    fn third(&self, x: f64) -> f64 {
        let h = self.step_at(x);
        if h <= 0.0 {
            return 0.0;
        }
        let d = |h: f64| {
            (self.eval(x + 2.0 * h) - 2.0 * self.eval(x + h) + 2.0 * self.eval(x - h) - self.eval(x - 2.0 * h))
                / (2.0 * h * h * h)
        };
        let (coarse, fine) = (d(h), d(0.5 * h));
        fine + (fine - coarse) / 3.0
    }
}

/// R(f), R(f'') and R(f''') of `pdf` over `support`. `scale` is the
/// density's natural length scale; the finite-difference step is
/// `eps^(1/7) * scale`, balancing the O(h^4) truncation of the
/// extrapolated third difference against eps/h^3 rounding.
pub fn functionals_quadrature<F: Fn(f64) -> f64>(pdf: F, support: Support, scale: f64) -> Result<DensityFunctionals> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("scale must be positive, got {scale}")));
    }
    let diff = Differentiator {
        pdf: &pdf,
        support,
        step: f64::EPSILON.powf(1.0 / 7.0) * scale,
    };
    let tol = Tolerance {
        rel: 1e-7,
        abs: 0.0,
        max_segments: 6000,
        initial_segments: 32,
    };
    let run = |name: &str, g: &dyn Fn(f64) -> f64| -> Result<f64> {
        integrate(g, support.lo, support.hi, tol)
            .map(|q| q.value)
            .map_err(|e| Error::Numerical(format!("{name}: {e}")))
    };
    let functionals = DensityFunctionals {
        r_f: run("R(f)", &|x| diff.eval(x).powi(2))?,
        r_f2: run("R(f'')", &|x| diff.second(x).powi(2))?,
        r_f3: run("R(f''')", &|x| diff.third(x).powi(2))?,
    };
    functionals.validate()?;
    Ok(functionals)
}

/// Densities with known formulas, used for the bias-constant table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AnalyticDensity {
    Beta { a: f64, b: f64 },
    Logistic,
    Cauchy,
    Mixture(GaussianMixture),
}

impl AnalyticDensity {
    pub fn name(&self) -> String {
        match self {
            AnalyticDensity::Beta { a, b } => format!("Beta({a},{b})"),
            AnalyticDensity::Logistic => "std_logistic".into(),
            AnalyticDensity::Cauchy => "std_cauchy".into(),
            AnalyticDensity::Mixture(m) => format!("mixture[{}]", m.components()),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            AnalyticDensity::Beta { .. } => Support { lo: 0.0, hi: 1.0 },
            _ => Support::REAL_LINE,
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            AnalyticDensity::Beta { a, b } => {
                let s = a + b;
                (a * b / (s * s * (s + 1.0))).sqrt()
            }
            AnalyticDensity::Logistic | AnalyticDensity::Cauchy => 1.0,
            AnalyticDensity::Mixture(m) => m.sds().iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// A pdf closure; the Beta normalising constant is found by quadrature.
    pub fn pdf(&self) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        Ok(match self.clone() {
            AnalyticDensity::Beta { a, b } => {
                if !(a >= 1.0 && b >= 1.0) {
                    return Err(Error::Domain(format!("Beta({a},{b}) needs a, b >= 1")));
                }
                let kernel = move |x: f64| x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0);
                let norm = integrate(kernel, 0.0, 1.0, Tolerance::default())?.value;
                Box::new(move |x: f64| {
                    if (0.0..=1.0).contains(&x) {
                        kernel(x) / norm
                    } else {
                        0.0
                    }
                })
            }
            AnalyticDensity::Logistic => Box::new(|x: f64| {
                let c = (0.5 * x).cosh();
                0.25 / (c * c)
            }),
            AnalyticDensity::Cauchy => Box::new(|x: f64| 1.0 / (PI * (1.0 + x * x))),
            AnalyticDensity::Mixture(m) => Box::new(move |x| m.pdf(x)),
        })
    }

    /// Closed form for mixtures, quadrature otherwise.
    pub fn functionals(&self) -> Result<DensityFunctionals> {
        match self {
            AnalyticDensity::Mixture(m) => Ok(m.functionals()),
            other => functionals_quadrature(other.pdf()?, other.support(), other.scale()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::Preset;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn quadrature_agrees_with_closed_form_for_mixtures() {
        for p in Preset::ALL {
            let m = p.mixture();
            let scale = m.sds().iter().copied().fold(f64::INFINITY, f64::min);
            let q = functionals_quadrature(|x| m.pdf(x), Support::REAL_LINE, scale).unwrap();
            let c = m.functionals();
            assert!(rel(q.r_f, c.r_f) < 1e-5, "{p} R(f)");
            assert!(rel(q.r_f2, c.r_f2) < 1e-5, "{p} R(f'') {} vs {}", q.r_f2, c.r_f2);
            assert!(rel(q.r_f3, c.r_f3) < 1e-5, "{p} R(f''') {} vs {}", q.r_f3, c.r_f3);
        }
    }

    #[test]
    fn cauchy_and_logistic_closed_forms() {
        let c = AnalyticDensity::Cauchy.functionals().unwrap();
        assert!(rel(c.r_f, 1.0 / (2.0 * PI)) < 1e-7);
        // logistic: R(f) = 1/6, R(f'') = 1/42, R(f''') = 1/30
        let l = AnalyticDensity::Logistic.functionals().unwrap();
        assert!(rel(l.r_f, 1.0 / 6.0) < 1e-7);
        assert!(rel(l.r_f2, 1.0 / 42.0) < 1e-6);
        assert!(rel(l.r_f3, 1.0 / 30.0) < 1e-6);
    }

    #[test]
    fn beta_functionals_match_polynomial_integrals() {
        // f = 630 x^4 (1-x)^4; exact values from symbolic integration.
        let b = AnalyticDensity::Beta { a: 5.0, b: 5.0 }.functionals().unwrap();
        assert!(rel(b.r_f, 1.814_068_284_656_52) < 1e-7);
        assert!(rel(b.r_f2, 1_903.216_783_216_783) < 1e-5);
        assert!(rel(b.r_f3, 164_945.454_545_454_5) < 1e-5);
    }

    #[test]
    fn invalid_inputs() {
        assert!(Support::new(1.0, 0.0).is_err());
        assert!(functionals_quadrature(|x: f64| x, Support::REAL_LINE, 0.0).is_err());
        assert!(AnalyticDensity::Beta { a: 0.5, b: 2.0 }.pdf().is_err());
    }
}
