//! The `test` subcommand: one dataset in, one JSON report out.

use crate::config::{load_file_config, parse_correction, parse_kind, parse_statistic, pick};
use crate::{core_data, core_usage, dataio, open_output, Failure, OutFormat, RunOpts};
use clap::Args;
use hoi_core::hypothesis::{joint_independence_test, run_test, Statistic, TestConfig, TestKind};
use hoi_core::kernel::GramSet;
use serde_json::json;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct TestArgs {
    /// Input dataset CSV (header row with variable names; columns of a
    /// multi-dimensional variable are suffixed `name:0, name:1, …`).
    #[arg(long)]
    pub input: PathBuf,

    /// Comma-separated variable names to test (all, in file order, when
    /// omitted).
    #[arg(long, value_delimiter = ',')]
    pub variables: Option<Vec<String>>,

    /// Test family: streitberg, lancaster, joint, modified-dhsic.
    #[arg(long)]
    pub kind: Option<String>,

    /// Statistic for the joint kind: dhsic, lancaster, streitberg.
    #[arg(long)]
    pub statistic: Option<String>,

    /// Stop launching sub-tests after the first non-rejection.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub early_exit: Option<bool>,

    /// Sub-test level correction: none, bonferroni.
    #[arg(long)]
    pub correction: Option<String>,

    #[command(flatten)]
    pub run: RunOpts,
}

pub fn run(args: TestArgs) -> Result<(), Failure> {
    let file = load_file_config(args.run.config.as_deref())?;

    let kind_token = pick(args.kind.clone(), file.kind.clone(), "streitberg".into());
    let kind = parse_kind(&kind_token)?;
    if args.statistic.is_some() && kind != TestKind::JointIndependence {
        return Err(Failure::Usage(
            "--statistic only applies to --kind joint".into(),
        ));
    }
    let statistic_token = match kind {
        TestKind::JointIndependence => Some(pick(
            args.statistic.clone(),
            file.statistic.clone(),
            "dhsic".into(),
        )),
        _ => None,
    };
    let statistic = statistic_token
        .as_deref()
        .map(parse_statistic)
        .transpose()?;

    let correction_token = pick(args.correction.clone(), file.correction.clone(), "none".into());
    let mut config = TestConfig::new(kind);
    config.alpha = pick(args.run.alpha, file.alpha, config.alpha);
    config.permutations = pick(args.run.permutations, file.permutations, config.permutations);
    config.seed = pick(args.run.seed, file.seed, config.seed);
    config.early_exit = pick(args.early_exit, file.early_exit, false);
    config.correction = parse_correction(&correction_token)?;
    config.validate().map_err(core_usage)?;

    let format = pick(args.run.format, file.format_parsed()?, OutFormat::Json);
    if format != OutFormat::Json {
        return Err(Failure::Usage("the test report is JSON-only".into()));
    }

    let data = dataio::read_dataset_from(&args.input, args.variables.as_deref())?;
    if data.n() < 20 {
        eprintln!(
            "warning: only {} observations; permutation p-values will be coarse",
            data.n()
        );
    }

    let report = match statistic {
        Some(s) if s != Statistic::Dhsic => {
            let grams = GramSet::gaussian(&data).map_err(core_data)?;
            joint_independence_test(&grams, s, &config).map_err(core_data)?
        }
        _ => run_test(&data, &config).map_err(core_data)?,
    };

    let effective = json!({
        "command": "test",
        "input": args.input.display().to_string(),
        "variables": data.variables().iter().map(|v| v.name()).collect::<Vec<_>>(),
        "kind": kind_token,
        "statistic": statistic_token,
        "alpha": config.alpha,
        "permutations": config.permutations,
        "seed": config.seed,
        "early_exit": config.early_exit,
        "correction": correction_token,
        "workers": args.run.workers,
    });
    let payload = json!({ "config": effective, "report": report });

    let mut out = open_output(args.run.output.as_ref())?;
    serde_json::to_writer_pretty(&mut out, &payload)
        .and_then(|()| {
            use std::io::Write;
            writeln!(out).map_err(serde_json::Error::io)
        })
        .map_err(|e| Failure::Data(format!("writing report: {e}")))
}
