use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// An immutable, sorted sample of finite observations with at least two values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    /// Sorts `values` and checks that there are at least two finite entries.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return domain(format!("a sample needs at least 2 values, got {}", values.len()));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("sample value at position {bad} is not finite"));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { values })
    }

    /// Wraps values already known to be sorted and finite.
    pub(crate) fn from_sorted(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2);
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample standard deviation (n - 1 denominator).
    pub fn sd(&self) -> f64 {
        let mean = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (self.len() - 1) as f64).sqrt()
    }

    /// Quantile with linear interpolation between order statistics.
    pub fn quantile(&self, p: f64) -> f64 {
        let pos = p.clamp(0.0, 1.0) * (self.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        self.values[lo] + frac * (self.values[hi] - self.values[lo])
    }

    pub fn iqr(&self) -> f64 {
        self.quantile(0.75) - self.quantile(0.25)
    }

    /// Number of values equal to their predecessor in sorted order.
    pub fn ties(&self) -> usize {
        self.values.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// The sample at the given indices (any order), re-sorted.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut values: Vec<f64> = indices.iter().map(|&i| self.values[i]).collect();
        values.sort_unstable_by(f64::total_cmp);
        Self::from_sorted(values)
    }

    /// `a + c x` for every observation.
    pub fn affine(&self, shift: f64, scale: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| shift + scale * v).collect())
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = crate::Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Sample> for Vec<f64> {
    fn from(s: Sample) -> Self {
        s.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_validates() {
        let s = Sample::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(s.ties(), 1);
        assert!(Sample::new(vec![1.0]).is_err());
        assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
        assert!(Sample::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn summaries() {
        let s = Sample::new((1..=5).map(f64::from).collect()).unwrap();
        assert_eq!(s.mean(), 3.0);
        assert!((s.sd() - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.quantile(0.5), 3.0);
        assert_eq!(s.iqr(), 2.0);
        let t = s.affine(1.0, -2.0).unwrap();
        assert_eq!(t.values(), &[-9.0, -7.0, -5.0, -3.0, -1.0]);
        assert_eq!(s.select(&[4, 0]).values(), &[1.0, 5.0]);
    }

    #[test]
    fn serde_rejects_short_samples() {
        assert!(serde_json::from_str::<Sample>("[1.0]").is_err());
        let s: Sample = serde_json::from_str("[2.0, 1.0]").unwrap();
        assert_eq!(s.values(), &[1.0, 2.0]);
    }
}
