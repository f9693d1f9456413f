//! The Gaussian smoothing kernel and the kernel-only constants that enter the
//! bias and variance expressions of the bagged bandwidth.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// 1 / (2 sqrt(pi)), the N(0, 2) density at the origin and R(K).
pub const INV_2_SQRT_PI: f64 = 0.282_094_791_773_878_14;

/// The constants file shipped with the crate.
pub const GAUSSIAN_CONSTANTS_FILE: &str = include_str!("../data/gaussian_kernel.txt");

/// Standard normal kernel K(u).
#[inline]
pub fn kernel_eval(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// K'(u) = -u K(u).
#[inline]
pub fn kernel_deriv(u: f64) -> f64 {
    -u * kernel_eval(u)
}

/// (K*K)(u), the N(0, 2) density.
#[inline]
pub fn kernel_selfconv(u: f64) -> f64 {
    INV_2_SQRT_PI * (-0.25 * u * u).exp()
}

/// gamma_n(u) = (n-1)/n (K*K)(u) - 2 K(u), the pair function of the
/// cross-validation criterion.
#[inline]
pub fn gamma_n(u: f64, n: f64) -> f64 {
    // exp(-u^2/2) = exp(-u^2/4)^2 saves one exponential per pair.
    let e = (-0.25 * u * u).exp();
    (n - 1.0) / n * INV_2_SQRT_PI * e - 2.0 * INV_SQRT_2PI * e * e
}

/// V(u) = 1/2 d/du [u gamma(u)] with gamma the large-n limit of `gamma_n`.
pub fn v_function(u: f64) -> f64 {
    let u2 = u * u;
    0.5 * (kernel_selfconv(u) * (1.0 - 0.5 * u2) - 2.0 * kernel_eval(u) * (1.0 - u2))
}

/// W(u) = 1/2 d^2/du^2 [u^2 gamma(u)].
pub fn w_function(u: f64) -> f64 {
    let u2 = u * u;
    let u4 = u2 * u2;
    0.5 * (kernel_selfconv(u) * (2.0 - 2.5 * u2 + 0.25 * u4) - 2.0 * kernel_eval(u) * (2.0 - 5.0 * u2 + u4))
}

/// Kernel-only scalars: R(K), mu_2(K), mu_4(K), int V W and R(V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub r_k: f64,
    pub mu2: f64,
    pub mu4: f64,
    pub int_vw: f64,
    pub r_v: f64,
}

impl KernelConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("r_k", self.r_k),
            ("mu2", self.mu2),
            ("mu4", self.mu4),
            ("int_vw", self.int_vw),
            ("r_v", self.r_v),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "kernel constant {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Same constants with a different R(V).
    pub fn with_r_v(self, r_v: f64) -> Self {
        Self { r_v, ..self }
    }

    pub fn from_constants_file(file: &ConstantsFile) -> Result<Self> {
        let kc = Self {
            r_k: file.get_f64("r_k")?,
            mu2: file.get_f64("mu2")?,
            mu4: file.get_f64("mu4")?,
            int_vw: file.get_f64("int_vw")?,
            r_v: file.get_f64("r_v")?,
        };
        kc.validate()?;
        Ok(kc)
    }
}

/// Constants of the standard Gaussian kernel, read from the shipped
/// constants file.
pub fn gaussian_constants() -> KernelConstants {
    static CONSTANTS: OnceLock<KernelConstants> = OnceLock::new();
    *CONSTANTS.get_or_init(|| {
        let file = ConstantsFile::parse(GAUSSIAN_CONSTANTS_FILE).expect("shipped constants file parses");
        KernelConstants::from_constants_file(&file).expect("shipped constants file is complete")
    })
}

/// Plain `key=value` text with `#` comments. Keys keep their sorted order
/// when written back.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstantsFile {
    entries: BTreeMap<String, String>,
}

impl ConstantsFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Data(format!(
                    "constants file line {}: expected key=value, got {raw:?}",
                    lineno + 1
                ))
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Data(format!("constants file is missing key {key}")))?;
        raw.parse()
            .map_err(|_| Error::Data(format!("constants file key {key}: {raw:?} is not a number")))
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl fmt::Display for ConstantsFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// sqrt(2 pi); exposed for the mixture code.
pub(crate) fn sqrt_2pi() -> f64 {
    (2.0 * PI).sqrt()
}
