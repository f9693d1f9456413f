use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::bagging::{bagged_bandwidth, BagConfig};
use crate::binned::{bin_sample, cv_minimize_binned};
use crate::error::Result;
use crate::mixture::Preset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    /// `binned_full` (nb = n) or `bagged` (nb = m per subsample).
    pub mode: String,
    pub m: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub repeats: usize,
    /// One untimed run before timing.
    pub warmup: bool,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            repeats: 3,
            warmup: true,
            seed: 1,
        }
    }
}

fn median_seconds(opts: &BenchOptions, mut run: impl FnMut() -> Result<()>) -> Result<f64> {
    if opts.warmup {
        run()?;
    }
    let mut times = Vec::with_capacity(opts.repeats.max(1));
    for _ in 0..opts.repeats.max(1) {
        let t = Instant::now();
        run()?;
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

/// Wall-clock time of binned full-sample CV (nb = n) and of the bagged
/// bandwidth (nb = m per subsample) on standard normal samples.
pub fn run_timing_bench(n_list: &[usize], m: usize, big_n: usize, opts: BenchOptions) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in n_list {
        let data = Preset::StdNormal.mixture().sample(n, opts.seed)?;
        let full = median_seconds(&opts, || {
            let b = bin_sample(&data, n)?;
            cv_minimize_binned(&b, None).map(|_| ())
        })?;
        rows.push(BenchRow {
            n,
            mode: "binned_full".into(),
            m: n,
            big_n: 1,
            seconds: full,
        });
        let cfg = BagConfig::new(m.min(n), big_n, opts.seed);
        let bagged = median_seconds(&opts, || bagged_bandwidth(&data, &cfg).map(|_| ()))?;
        rows.push(BenchRow {
            n,
            mode: "bagged".into(),
            m: m.min(n),
            big_n,
            seconds: bagged,
        });
    }
    Ok(rows)
}

/// CSV with header `n,mode,m,N,seconds`.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
