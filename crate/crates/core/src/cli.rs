//! Plumbing behind the `bagcv` binary: data ingestion with optional tie
//! jittering, and the machine-readable reports of each command.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::amse::{estimate_m0, AmseModel, M0Estimate, PilotConfig};
use crate::bagging::{bagged_bandwidth, BagConfig, BagResult};
use crate::cv::Interval;
use crate::error::{Error, Result};
use crate::kde::{kde_eval, linspace};
use crate::rng::{stream, Domain};
use crate::sample::Sample;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status of the binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 2,
    Data = 3,
    Numerical = 4,
}

impl ExitStatus {
    pub fn of(err: &Error) -> Self {
        match err {
            Error::Data(_) | Error::Io(_) | Error::Csv(_) => ExitStatus::Data,
            Error::Config(_) | Error::Domain(_) | Error::Json(_) => ExitStatus::Usage,
            Error::Numerical(_) | Error::Fit(_) | Error::Estimation(_) => ExitStatus::Numerical,
        }
    }
}

/// A loaded sample plus what ingestion saw.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub sample: Sample,
    /// Values equal to their predecessor (sorted), counted before jittering.
    pub ties: usize,
    pub jitter: Option<f64>,
}

const BAD_LINES_SHOWN: usize = 5;

/// Reads numbers from `reader`. With `column` the input is CSV with a header
/// row and the named column is used; otherwise the first field of every
/// line is used and a non-numeric first line is taken as a header.
pub fn read_values<R: Read>(reader: R, column: Option<&str>) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(column.is_some())
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let index = match column {
        Some(name) => {
            let headers = rdr.headers()?;
            match headers.iter().position(|h| h == name) {
                Some(i) => i,
                None => {
                    return Err(Error::Data(format!(
                        "column {name:?} not found; header has {:?}",
                        headers.iter().collect::<Vec<_>>()
                    )))
                }
            }
        }
        None => 0,
    };
    let mut values = Vec::new();
    let mut bad = Vec::new();
    let mut bad_total = 0usize;
    let mut record = csv::StringRecord::new();
    let mut first = true;
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        let field = record.get(index).unwrap_or("");
        if field.is_empty() && record.len() <= 1 {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ if first && column.is_none() => {}
            _ => {
                bad_total += 1;
                if bad.len() < BAD_LINES_SHOWN {
                    bad.push(line);
                }
            }
        }
        first = false;
    }
    if bad_total > 0 {
        return Err(Error::Data(format!(
            "{bad_total} unparsable row(s); first at line(s) {}",
            bad.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(values)
}

/// Loads a sample from `path`, adding Uniform(-j, j) noise when `jitter = j
/// > 0` (deterministic in `seed`).
pub fn ingest(path: &Path, column: Option<&str>, jitter: Option<f64>, seed: u64) -> Result<Ingested> {
    if let Some(j) = jitter {
        if !(j >= 0.0 && j.is_finite()) {
            return Err(Error::Config(format!("jitter half-width must be >= 0, got {j}")));
        }
    }
    let file = File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut values = read_values(BufReader::with_capacity(1 << 20, file), column)?;
    if values.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 observations, found {}",
            values.len()
        )));
    }
    let mut sorted = values.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let ties = sorted.windows(2).filter(|w| w[0] == w[1]).count();
    drop(sorted);
    let jitter = jitter.filter(|&j| j > 0.0);
    if let Some(j) = jitter {
        let mut rng = stream(seed, Domain::Jitter, 0);
        for v in &mut values {
            *v += rng.random_range(-j..j);
        }
    }
    Ok(Ingested {
        sample: Sample::new(values)?,
        ties,
        jitter,
    })
}

/// Options shared by `select` and `m0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectOptions {
    pub m: Option<usize>,
    pub big_n: usize,
    pub s: usize,
    pub r: Option<usize>,
    pub nb_sub: Option<usize>,
    pub binned: bool,
    pub interval: Option<Interval>,
    pub seed: u64,
}

/// The m0 part of a report.
#[derive(Debug, Clone, Serialize)]
pub struct M0Report {
    pub m_hat: usize,
    pub s: usize,
    pub r: usize,
    pub pilot_failures: usize,
    pub boundary: bool,
    pub model: AmseModel,
    pub warnings: Vec<String>,
}

impl From<&M0Estimate> for M0Report {
    fn from(e: &M0Estimate) -> Self {
        M0Report {
            m_hat: e.model.m_hat,
            s: e.pilot.s,
            r: e.pilot.r,
            pilot_failures: e.failures,
            boundary: e.model.boundary,
            model: e.model.clone(),
            warnings: e.warnings.clone(),
        }
    }
}

/// JSON report of `select`; field order is the output key order.
#[derive(Debug, Clone, Serialize)]
pub struct SelectReport {
    pub version: &'static str,
    pub command: &'static str,
    pub n: usize,
    pub ties: usize,
    pub jitter: Option<f64>,
    pub seed: u64,
    pub bandwidth: f64,
    pub m: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub binned: bool,
    pub nb_sub: Option<usize>,
    pub interval: Option<Interval>,
    pub boundary_hits: usize,
    pub failures: usize,
    pub m0: Option<M0Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

impl SelectReport {
    /// More than half of the subsample minimisers sat on an interval edge.
    pub fn unreliable(&self) -> bool {
        2 * self.boundary_hits > self.big_n
    }
}

fn pilot_config(n: usize, opts: &SelectOptions) -> PilotConfig {
    let base = PilotConfig::recommended(n, opts.seed);
    PilotConfig {
        s: opts.s,
        r: opts.r.unwrap_or(base.r),
        ..base
    }
}

pub fn run_m0(data: &Ingested, opts: &SelectOptions) -> Result<M0Estimate> {
    let n = data.sample.len();
    estimate_m0(&data.sample, n, opts.big_n, pilot_config(n, opts))
}

/// Bagged bandwidth; estimates m first when it is not given.
pub fn run_select(data: &Ingested, opts: &SelectOptions) -> Result<(SelectReport, BagResult)> {
    let n = data.sample.len();
    let m0 = match opts.m {
        Some(_) => None,
        None => Some(run_m0(data, opts)?),
    };
    let m = opts.m.unwrap_or_else(|| m0.as_ref().unwrap().model.m_hat);
    let cfg = BagConfig {
        m,
        n_resamples: opts.big_n,
        seed: opts.seed,
        interval: opts.interval,
        binned_sub: opts.binned,
        nb_sub: opts.nb_sub,
    };
    let bag = bagged_bandwidth(&data.sample, &cfg)?;
    let report = SelectReport {
        version: VERSION,
        command: "select",
        n,
        ties: data.ties,
        jitter: data.jitter,
        seed: opts.seed,
        bandwidth: bag.h_bag,
        m,
        big_n: opts.big_n,
        binned: opts.binned,
        nb_sub: if opts.binned {
            Some(opts.nb_sub.unwrap_or(m))
        } else {
            None
        },
        interval: opts.interval,
        boundary_hits: bag.boundary_hits,
        failures: bag.failures,
        m0: m0.as_ref().map(M0Report::from),
        elapsed_seconds: Some(bag.elapsed_seconds),
    };
    Ok((report, bag))
}

/// JSON report of `m0`.
#[derive(Debug, Clone, Serialize)]
pub struct M0CommandReport {
    pub version: &'static str,
    pub command: &'static str,
    pub n: usize,
    pub ties: usize,
    pub jitter: Option<f64>,
    pub seed: u64,
    #[serde(rename = "N")]
    pub big_n: usize,
    #[serde(flatten)]
    pub m0: M0Report,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

/// `(x, f_h(x))` on 512 points over [min - 3h, max + 3h].
pub fn density_grid(data: &Sample, h: f64) -> Result<Vec<(f64, f64)>> {
    let xs = linspace(data.min() - 3.0 * h, data.max() + 3.0 * h, 512);
    let ys = kde_eval(data, h, &xs)?;
    Ok(xs.into_iter().zip(ys).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cv::cv_minimize;
    use crate::mixture::Preset;
    use crate::quadrature::trapezoid;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn jitter_breaks_ties_within_the_half_width() {
        let f = write_tmp("1\n1\n1\n");
        let d = ingest(f.path(), None, Some(0.5), 3).unwrap();
        assert_eq!(d.ties, 2);
        let v = d.sample.values();
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(v.iter().all(|x| (0.5..1.5).contains(x)));
    }

    #[test]
    fn named_column_with_header() {
        let f = write_tmp("carrier,delay\nAA,3.5\nUA,-2\nDL,10\n");
        let d = ingest(f.path(), Some("delay"), None, 0).unwrap();
        assert_eq!(d.sample.values(), &[-2.0, 3.5, 10.0]);
        assert!(matches!(ingest(f.path(), Some("nope"), None, 0), Err(Error::Data(_))));
    }

    #[test]
    fn header_without_column_and_bad_rows() {
        let f = write_tmp("x\n1\n2\n\n3\n");
        assert_eq!(ingest(f.path(), None, None, 0).unwrap().sample.len(), 3);
        let text = "1\n".to_string() + &"oops\n".repeat(7) + "2\n";
        let g = write_tmp(&text);
        let err = ingest(g.path(), None, None, 0).unwrap_err().to_string();
        assert!(err.contains("7 unparsable") && err.contains("2, 3, 4, 5, 6"), "{err}");
        let h = write_tmp("5\n");
        assert!(matches!(ingest(h.path(), None, None, 0), Err(Error::Data(_))));
    }

    #[test]
    fn degenerate_select_matches_library_cv() {
        let sample = Preset::StdNormal.mixture().sample(500, 4).unwrap();
        let data = Ingested {
            sample: sample.clone(),
            ties: 0,
            jitter: None,
        };
        let opts = SelectOptions {
            m: Some(500),
            big_n: 1,
            s: 50,
            r: None,
            nb_sub: None,
            binned: false,
            interval: None,
            seed: 1,
        };
        let (report, _) = run_select(&data, &opts).unwrap();
        assert_eq!(report.bandwidth, cv_minimize(&sample, None).unwrap().h_opt);
    }

    #[test]
    fn density_grid_integrates_to_one() {
        let sample = Preset::D1.mixture().sample(800, 2).unwrap();
        let g = density_grid(&sample, 0.25).unwrap();
        assert_eq!(g.len(), 512);
        let ys: Vec<f64> = g.iter().map(|p| p.1).collect();
        assert!((trapezoid(&ys, g[1].0 - g[0].0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(ExitStatus::of(&Error::Data("x".into())), ExitStatus::Data);
        assert_eq!(ExitStatus::of(&Error::Numerical("x".into())), ExitStatus::Numerical);
        assert_eq!(ExitStatus::of(&Error::Config("x".into())), ExitStatus::Usage);
    }
}
