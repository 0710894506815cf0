//! The `bench` subcommand: wall times for the statistic estimators and
//! fitted scaling exponents in n.
//!
//! Each grid cell draws a fresh null dataset, then times the Lancaster
//! statistic, the Streitberg statistic with its contraction plans and
//! factor cache, and the same statistic recomputed term by term without
//! cache reuse. The cached and uncached values are compared so cache
//! transparency is visible in the output.

use crate::config::{load_file_config, pick};
use crate::{core_usage, open_output, Failure, OutFormat, RunOpts};
use clap::Args;
use hoi_core::estimator::{lancaster_stat, streitberg_stat, streitberg_stat_uncached};
use hoi_core::kernel::GramSet;
use hoi_core::streams::derive_seed;
use hoi_core::synth::gen_null;
use serde_json::json;
use std::io::Write;
use std::time::Instant;

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated dimensions to time (2..=8).
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,

    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,

    #[command(flatten)]
    pub run: RunOpts,
}

struct Timing {
    statistic: &'static str,
    variant: &'static str,
    d: usize,
    n: usize,
    wall_ms: f64,
    value: f64,
}

/// Least-squares slope of log(ms) against log(n).
fn fitted_exponent(points: &[(usize, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, ms)| ((n as f64).ln(), ms.max(1e-3).ln()))
        .collect();
    let m = logs.len() as f64;
    let (sx, sy): (f64, f64) = logs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let sxx: f64 = logs.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = logs.iter().map(|(x, y)| x * y).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

pub fn run(args: BenchArgs) -> Result<(), Failure> {
    let file = load_file_config(args.run.config.as_deref())?;
    let dims = args.d.clone().unwrap_or_else(|| vec![4, 5]);
    let sizes = args.n.clone().unwrap_or_else(|| vec![100, 200, 400]);
    for &d in &dims {
        if !(2..=8).contains(&d) {
            return Err(Failure::Usage(format!(
                "--d must lie in 2..=8 for the full-lattice statistic, got {d}"
            )));
        }
    }
    for &n in &sizes {
        if n < 4 {
            return Err(Failure::Usage(format!("--n must be at least 4, got {n}")));
        }
    }
    let base_seed = pick(args.run.seed, file.seed, 0);
    let format = pick(args.run.format, file.format_parsed()?, OutFormat::Csv);

    let mut timings = Vec::new();
    let mut cell = 0u64;
    for &d in &dims {
        for &n in &sizes {
            let data = gen_null(n, d, derive_seed(base_seed, cell)).map_err(core_usage)?;
            cell += 1;
            let grams = GramSet::gaussian(&data).map_err(core_usage)?;

            let started = Instant::now();
            let lancaster = lancaster_stat(&grams).map_err(core_usage)?;
            timings.push(Timing {
                statistic: "lancaster",
                variant: "optimized",
                d,
                n,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
                value: lancaster,
            });

            let started = Instant::now();
            let cached = streitberg_stat(&grams).map_err(core_usage)?;
            timings.push(Timing {
                statistic: "streitberg",
                variant: "optimized",
                d,
                n,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
                value: cached,
            });

            let started = Instant::now();
            let uncached = streitberg_stat_uncached(&grams).map_err(core_usage)?;
            timings.push(Timing {
                statistic: "streitberg",
                variant: "uncached",
                d,
                n,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
                value: uncached,
            });

            if (cached - uncached).abs() > 1e-12 * cached.abs().max(1.0) {
                eprintln!(
                    "warning: cached and uncached streitberg differ at d={d} n={n}: \
                     {cached:.17e} vs {uncached:.17e}"
                );
            }
        }
    }

    let mut exponents: Vec<(String, String, usize, f64)> = Vec::new();
    if sizes.len() >= 2 {
        for &d in &dims {
            for (statistic, variant) in [
                ("lancaster", "optimized"),
                ("streitberg", "optimized"),
                ("streitberg", "uncached"),
            ] {
                let points: Vec<(usize, f64)> = timings
                    .iter()
                    .filter(|t| t.statistic == statistic && t.variant == variant && t.d == d)
                    .map(|t| (t.n, t.wall_ms))
                    .collect();
                exponents.push((
                    statistic.to_string(),
                    variant.to_string(),
                    d,
                    fitted_exponent(&points),
                ));
            }
        }
    }

    let effective = json!({
        "command": "bench",
        "d": dims,
        "n": sizes,
        "seed": base_seed,
    });

    let mut out = open_output(args.run.output.as_ref())?;
    let fail = |e: std::io::Error| Failure::Data(format!("writing benchmark: {e}"));
    match format {
        OutFormat::Json => {
            let timing_rows: Vec<serde_json::Value> = timings
                .iter()
                .map(|t| {
                    json!({
                        "statistic": t.statistic,
                        "variant": t.variant,
                        "d": t.d,
                        "n": t.n,
                        "wall_ms": t.wall_ms,
                        "value": t.value,
                    })
                })
                .collect();
            let exponent_rows: Vec<serde_json::Value> = exponents
                .iter()
                .map(|(s, v, d, e)| {
                    json!({ "statistic": s, "variant": v, "d": d, "exponent": e })
                })
                .collect();
            let payload = json!({
                "config": effective,
                "timings": timing_rows,
                "exponents": exponent_rows,
            });
            serde_json::to_writer_pretty(&mut out, &payload)
                .map_err(|e| Failure::Data(format!("writing benchmark: {e}")))?;
            writeln!(out).map_err(fail)?;
        }
        OutFormat::Csv => {
            writeln!(out, "# config: {effective}").map_err(fail)?;
            let mut writer = csv::Writer::from_writer(out);
            let werr = |e: csv::Error| Failure::Data(format!("writing benchmark: {e}"));
            writer
                .write_record(["statistic", "variant", "d", "n", "wall_ms", "value"])
                .map_err(werr)?;
            for t in &timings {
                writer
                    .write_record([
                        t.statistic.to_string(),
                        t.variant.to_string(),
                        t.d.to_string(),
                        t.n.to_string(),
                        format!("{:.3}", t.wall_ms),
                        format!("{:.16e}", t.value),
                    ])
                    .map_err(werr)?;
            }
            let mut inner = writer.into_inner().map_err(|e| {
                Failure::Data(format!("writing benchmark: {e}"))
            })?;
            for (s, v, d, e) in &exponents {
                writeln!(inner, "# exponent statistic={s} variant={v} d={d} slope={e:.3}")
                    .map_err(fail)?;
            }
        }
    }
    Ok(())
}
