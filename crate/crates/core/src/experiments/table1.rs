use std::io::Write;

use serde::Serialize;

use crate::amse::{bias_constants, m_crit};
use crate::density::AnalyticDensity;
use crate::error::Result;
use crate::kernel::{gaussian_constants, KernelConstants};
use crate::mixture::Preset;

/// m_crit values above this are reported as ">1e7".
pub const M_CRIT_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub density: String,
    pub mu_rescale: Option<f64>,
    pub mu_cv: Option<f64>,
    pub m_crit: Option<u64>,
    /// Set when the functionals of this row could not be computed.
    pub error: Option<String>,
}

impl Table1Row {
    pub fn m_crit_label(&self) -> String {
        match self.m_crit {
            Some(m) if m > M_CRIT_CAP => ">1e7".into(),
            Some(m) => m.to_string(),
            None => "NA".into(),
        }
    }
}

/// The six densities of the table, in order.
pub fn table1_densities() -> Vec<(&'static str, AnalyticDensity)> {
    vec![
        ("Beta(5,5)", AnalyticDensity::Beta { a: 5.0, b: 5.0 }),
        ("std_normal", AnalyticDensity::Mixture(Preset::StdNormal.mixture())),
        ("std_logistic", AnalyticDensity::Logistic),
        ("bimodal_T1", AnalyticDensity::Mixture(Preset::BimodalT1.mixture())),
        ("std_cauchy", AnalyticDensity::Cauchy),
        ("D2_claw", AnalyticDensity::Mixture(Preset::Claw.mixture())),
    ]
}

pub fn run_table1() -> Vec<Table1Row> {
    run_table1_with(&gaussian_constants())
}

pub fn run_table1_with(kc: &KernelConstants) -> Vec<Table1Row> {
    table1_densities()
        .into_iter()
        .map(|(name, d)| match d.functionals() {
            Ok(f) => {
                let b = bias_constants(&f, kc);
                let (m, error) = match m_crit(&b) {
                    Ok(m) => (Some(m), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                Table1Row {
                    density: name.into(),
                    mu_rescale: Some(b.mu_rescale),
                    mu_cv: Some(b.mu_cv),
                    m_crit: m,
                    error,
                }
            }
            Err(e) => Table1Row {
                density: name.into(),
                mu_rescale: None,
                mu_cv: None,
                m_crit: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// CSV with header `density,mu_rescale,mu_cv,m_crit`.
pub fn write_table1_csv<W: Write>(rows: &[Table1Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["density", "mu_rescale", "mu_cv", "m_crit"])?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.8}"));
    for r in rows {
        w.write_record([r.density.clone(), fmt(r.mu_rescale), fmt(r.mu_cv), r.m_crit_label()])?;
    }
    w.flush()?;
    Ok(())
}
