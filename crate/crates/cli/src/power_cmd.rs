//! The `power` subcommand: rejection-rate sweeps over a generator grid.
//!
//! Each grid point runs `trials` independently seeded datasets through
//! the selected tests. Per-trial seeds derive from the base seed and the
//! trial index through a splitmix-style mix, so rows are reproducible
//! and independent of the worker count; trials run on a rayon pool and
//! rows are assembled in grid order afterwards.

use crate::config::{load_file_config, parse_correction, pick};
use crate::{core_usage, open_output, Failure, OutFormat, RunOpts};
use clap::Args;
use hoi_core::hypothesis::{
    joint_independence_test, run_test, Statistic, TestConfig, TestKind,
};
use hoi_core::kernel::{Dataset, GramSet};
use hoi_core::streams::derive_seed;
use hoi_core::synth::{gen_gaussian, gen_null, gen_xor, GaussianCase, GaussianVariant, XorCase};
use rayon::prelude::*;
use serde_json::json;
use std::io::Write;
use std::time::Instant;

#[derive(Args, Debug)]
pub struct PowerArgs {
    /// Data generator: null, xor, sigma1, sigma2.
    #[arg(long)]
    pub generator: String,

    /// Swept parameter: proportion (xor), beta (sigma1/sigma2), n.
    #[arg(long)]
    pub sweep: String,

    /// Comma-separated grid values for the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,

    /// Sample size when n is not the swept parameter.
    #[arg(long)]
    pub n: Option<usize>,

    /// Dimension for the null generator (the others are five-variable).
    #[arg(long)]
    pub d: Option<usize>,

    /// Fixed xor interaction proportion when sweeping n.
    #[arg(long)]
    pub proportion: Option<f64>,

    /// Fixed within-block correlation when sweeping n.
    #[arg(long)]
    pub beta: Option<f64>,

    /// Comma-separated tests per grid point: streitberg, lancaster,
    /// modified-dhsic (composite factorisation tests), or dhsic,
    /// joint-lancaster, joint-streitberg (joint-independence tests).
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,

    /// Datasets per grid point.
    #[arg(long)]
    pub trials: Option<usize>,

    /// Sub-test level correction for composite kinds: none, bonferroni.
    #[arg(long)]
    pub correction: Option<String>,

    #[command(flatten)]
    pub run: RunOpts,
}

/// One test to run per grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
enum PowerKind {
    Composite(TestKind),
    Joint(Statistic),
}

fn parse_power_kind(token: &str) -> Result<PowerKind, Failure> {
    match token {
        "streitberg" => Ok(PowerKind::Composite(TestKind::Streitberg)),
        "lancaster" => Ok(PowerKind::Composite(TestKind::Lancaster)),
        "modified-dhsic" => Ok(PowerKind::Composite(TestKind::ModifiedDhsic)),
        "joint" | "dhsic" | "joint-dhsic" => Ok(PowerKind::Joint(Statistic::Dhsic)),
        "joint-lancaster" => Ok(PowerKind::Joint(Statistic::Lancaster)),
        "joint-streitberg" => Ok(PowerKind::Joint(Statistic::Streitberg)),
        other => Err(Failure::Usage(format!(
            "unknown kind `{other}` (expected streitberg, lancaster, modified-dhsic, \
             dhsic, joint-lancaster or joint-streitberg)"
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Generator {
    Null,
    Xor,
    Sigma1,
    Sigma2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SweepParam {
    Proportion,
    Beta,
    N,
}

/// Everything fixed about one sweep, so a grid value plus a seed fully
/// determines a dataset.
struct SweepPlan {
    generator: Generator,
    sweep: SweepParam,
    n: usize,
    d: usize,
    proportion: f64,
    beta: f64,
}

impl SweepPlan {
    fn dataset(&self, value: f64, seed: u64) -> Result<Dataset, Failure> {
        let n = match self.sweep {
            SweepParam::N => value as usize,
            _ => self.n,
        };
        let proportion = match self.sweep {
            SweepParam::Proportion => value,
            _ => self.proportion,
        };
        let beta = match self.sweep {
            SweepParam::Beta => value,
            _ => self.beta,
        };
        match self.generator {
            Generator::Null => gen_null(n, self.d, seed).map_err(core_usage),
            Generator::Xor => gen_xor(&XorCase::new(n, proportion, seed)).map_err(core_usage),
            Generator::Sigma1 => gen_gaussian(&GaussianCase {
                variant: GaussianVariant::SingletonQuad,
                beta,
                n,
                seed,
            })
            .map_err(core_usage),
            Generator::Sigma2 => gen_gaussian(&GaussianCase {
                variant: GaussianVariant::PairTriple,
                beta,
                n,
                seed,
            })
            .map_err(core_usage),
        }
    }
}

struct Row {
    sweep_value: f64,
    kind: String,
    rejection_rate: f64,
    trials: usize,
    mean_statistic: Option<f64>,
    wall_ms: f64,
}

pub fn run(args: PowerArgs) -> Result<(), Failure> {
    let file = load_file_config(args.run.config.as_deref())?;

    let generator = match args.generator.as_str() {
        "null" => Generator::Null,
        "xor" => Generator::Xor,
        "sigma1" => Generator::Sigma1,
        "sigma2" => Generator::Sigma2,
        other => {
            return Err(Failure::Usage(format!(
                "unknown generator `{other}` (expected null, xor, sigma1 or sigma2)"
            )))
        }
    };
    let sweep = match args.sweep.as_str() {
        "proportion" => SweepParam::Proportion,
        "beta" => SweepParam::Beta,
        "n" => SweepParam::N,
        other => {
            return Err(Failure::Usage(format!(
                "unknown sweep parameter `{other}` (expected proportion, beta or n)"
            )))
        }
    };
    match (generator, sweep) {
        (Generator::Xor, SweepParam::Beta) | (Generator::Null, SweepParam::Beta) => {
            return Err(Failure::Usage("beta only applies to sigma1/sigma2".into()))
        }
        (Generator::Sigma1 | Generator::Sigma2 | Generator::Null, SweepParam::Proportion) => {
            return Err(Failure::Usage("proportion only applies to xor".into()))
        }
        _ => {}
    }
    if args.grid.is_empty() {
        return Err(Failure::Usage("the grid is empty".into()));
    }
    if sweep == SweepParam::N {
        for &v in &args.grid {
            if v.fract() != 0.0 || v < 2.0 {
                return Err(Failure::Usage(format!(
                    "n grid values must be integers ≥ 2, found {v}"
                )));
            }
        }
    }

    let n = match sweep {
        SweepParam::N => 0,
        _ => args.n.ok_or_else(|| Failure::Usage("--n is required".into()))?,
    };
    if generator != Generator::Null && args.d.is_some() {
        return Err(Failure::Usage("--d only applies to the null generator".into()));
    }
    let d = args.d.unwrap_or(5);
    let needs_fixed = |have: Option<f64>, name: &str| {
        have.ok_or_else(|| Failure::Usage(format!("--{name} is required when sweeping n")))
    };
    let proportion = match (generator, sweep) {
        (Generator::Xor, SweepParam::N) => needs_fixed(args.proportion, "proportion")?,
        _ => args.proportion.unwrap_or(1.0),
    };
    let beta = match (generator, sweep) {
        (Generator::Sigma1 | Generator::Sigma2, SweepParam::N) => needs_fixed(args.beta, "beta")?,
        _ => args.beta.unwrap_or(0.0),
    };
    let plan = SweepPlan {
        generator,
        sweep,
        n,
        d,
        proportion,
        beta,
    };

    let kind_tokens = args
        .kinds
        .clone()
        .unwrap_or_else(|| vec!["streitberg".to_string()]);
    let mut kinds = Vec::with_capacity(kind_tokens.len());
    for token in &kind_tokens {
        kinds.push(parse_power_kind(token)?);
    }

    let alpha = pick(args.run.alpha, file.alpha, 0.05);
    let permutations = pick(args.run.permutations, file.permutations, 500);
    let base_seed = pick(args.run.seed, file.seed, 0);
    let trials = pick(args.trials, file.trials, 100);
    if trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let workers = pick(args.run.workers, file.workers, 0);
    let correction_token = pick(args.correction.clone(), file.correction.clone(), "none".into());
    let correction = parse_correction(&correction_token)?;
    let format = pick(args.run.format, file.format_parsed()?, OutFormat::Csv);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Usage(format!("building the worker pool: {e}")))?;

    let mut rows: Vec<Row> = Vec::with_capacity(args.grid.len() * kinds.len());
    for &value in &args.grid {
        for (kind, token) in kinds.iter().zip(&kind_tokens) {
            let started = Instant::now();
            let outcomes: Result<Vec<(bool, Option<f64>)>, Failure> = pool.install(|| {
                (0..trials)
                    .into_par_iter()
                    .map(|trial| {
                        let seed = derive_seed(base_seed, trial as u64);
                        let data = plan.dataset(value, seed)?;
                        let mut config = TestConfig::new(match kind {
                            PowerKind::Composite(k) => *k,
                            PowerKind::Joint(_) => TestKind::JointIndependence,
                        });
                        config.alpha = alpha;
                        config.permutations = permutations;
                        config.seed = seed;
                        config.correction = correction;
                        // Early exit cannot change the composite verdict,
                        // only skip doomed sub-tests.
                        config.early_exit = matches!(kind, PowerKind::Composite(_));
                        let report = match kind {
                            PowerKind::Composite(_) => {
                                run_test(&data, &config).map_err(core_usage)?
                            }
                            PowerKind::Joint(statistic) => {
                                let grams = GramSet::gaussian(&data).map_err(core_usage)?;
                                joint_independence_test(&grams, *statistic, &config)
                                    .map_err(core_usage)?
                            }
                        };
                        Ok((report.composite_rejected, report.observed_statistic))
                    })
                    .collect()
            });
            let outcomes = outcomes?;
            let rejections = outcomes.iter().filter(|(r, _)| *r).count();
            let stats: Vec<f64> = outcomes.iter().filter_map(|(_, s)| *s).collect();
            let mean_statistic = if stats.len() == outcomes.len() {
                Some(stats.iter().sum::<f64>() / stats.len() as f64)
            } else {
                None
            };
            rows.push(Row {
                sweep_value: value,
                kind: token.clone(),
                rejection_rate: rejections as f64 / trials as f64,
                trials,
                mean_statistic,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        }
    }

    let effective = json!({
        "command": "power",
        "generator": args.generator,
        "sweep": args.sweep,
        "grid": args.grid,
        "n": args.n,
        "d": if generator == Generator::Null { Some(d) } else { None },
        "proportion": proportion,
        "beta": beta,
        "kinds": kind_tokens,
        "trials": trials,
        "alpha": alpha,
        "permutations": permutations,
        "seed": base_seed,
        "correction": correction_token,
        "workers": workers,
    });

    let mut out = open_output(args.run.output.as_ref())?;
    match format {
        OutFormat::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "sweep_value": r.sweep_value,
                        "kind": r.kind,
                        "rejection_rate": r.rejection_rate,
                        "trials": r.trials,
                        "mean_statistic": r.mean_statistic,
                        "wall_ms": r.wall_ms,
                    })
                })
                .collect();
            let payload = json!({ "config": effective, "rows": rows });
            serde_json::to_writer_pretty(&mut out, &payload)
                .map_err(|e| Failure::Data(format!("writing sweep: {e}")))?;
            writeln!(out).map_err(|e| Failure::Data(format!("writing sweep: {e}")))?;
        }
        OutFormat::Csv => {
            writeln!(out, "# config: {effective}")
                .map_err(|e| Failure::Data(format!("writing sweep: {e}")))?;
            let mut writer = csv::Writer::from_writer(out);
            writer
                .write_record([
                    "sweep_value",
                    "kind",
                    "rejection_rate",
                    "trials",
                    "mean_statistic",
                    "wall_ms",
                ])
                .map_err(|e| Failure::Data(format!("writing sweep: {e}")))?;
            for r in &rows {
                writer
                    .write_record([
                        format!("{}", r.sweep_value),
                        r.kind.clone(),
                        format!("{}", r.rejection_rate),
                        format!("{}", r.trials),
                        r.mean_statistic.map(|s| format!("{s:.16e}")).unwrap_or_default(),
                        format!("{:.3}", r.wall_ms),
                    ])
                    .map_err(|e| Failure::Data(format!("writing sweep: {e}")))?;
            }
            writer
                .flush()
                .map_err(|e| Failure::Data(format!("writing sweep: {e}")))?;
        }
    }
    Ok(())
}
