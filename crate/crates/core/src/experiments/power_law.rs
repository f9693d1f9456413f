use serde::Serialize;

use crate::error::{domain, Result};

/// `y = beta0 n^beta1`, fitted by least squares on the log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub beta0: f64,
    pub beta1: f64,
    /// Residual sum of squares of the log-scale regression.
    pub residual_ss: f64,
}

pub fn fit_power_law(ns: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if ns.len() != ys.len() || ns.len() < 2 {
        return domain(format!(
            "need at least two (n, y) pairs, got {} and {}",
            ns.len(),
            ys.len()
        ));
    }
    if ns.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return domain("power-law fit needs positive finite inputs");
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return domain("power-law fit needs at least two distinct n");
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let beta1 = sxy / sxx;
    let intercept = my - beta1 * mx;
    let residual_ss = x.iter().zip(&y).map(|(a, b)| (b - intercept - beta1 * a).powi(2)).sum();
    Ok(PowerLawFit {
        beta0: intercept.exp(),
        beta1,
        residual_ss,
    })
}

pub fn extrapolate(fit: &PowerLawFit, n: f64) -> f64 {
    fit.beta0 * n.powf(fit.beta1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_series() {
        let fit = fit_power_law(&[557.0, 5_579.0, 55_793.0], &[3.606, 2.129, 1.352]).unwrap();
        assert!((fit.beta0 / 13.69 - 1.0).abs() < 0.005, "{fit:?}");
        assert!((fit.beta1 / -0.213 - 1.0).abs() < 0.005, "{fit:?}");
        assert!((extrapolate(&fit, 5_579_346.0) - 0.501).abs() < 0.005);
    }

    #[test]
    fn timing_series() {
        let fit = fit_power_law(&[5_579.0, 55_793.0, 557_934.0], &[0.0102, 0.959, 103.08]).unwrap();
        assert!((fit.beta1 / 2.002 - 1.0).abs() < 0.005, "{fit:?}");
    }

    #[test]
    fn exact_power_law_and_normal_equations() {
        let ns = [10.0, 100.0, 2_500.0, 40_000.0];
        let ys: Vec<f64> = ns.iter().map(|n: &f64| 2.0 * n.sqrt()).collect();
        let fit = fit_power_law(&ns, &ys).unwrap();
        assert!((fit.beta0 - 2.0).abs() < 1e-10 && (fit.beta1 - 0.5).abs() < 1e-10);

        let noisy = [3.0, 2.2, 1.4, 1.1];
        let fit = fit_power_law(&ns, &noisy).unwrap();
        let resid: Vec<f64> = ns
            .iter()
            .zip(&noisy)
            .map(|(n, y)| y.ln() - fit.beta0.ln() - fit.beta1 * n.ln())
            .collect();
        assert!(resid.iter().sum::<f64>().abs() < 1e-10);
        assert!(resid.iter().zip(&ns).map(|(r, n)| r * n.ln()).sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_power_law(&[1.0], &[1.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, -1.0]).is_err());
        assert!(fit_power_law(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }
}
