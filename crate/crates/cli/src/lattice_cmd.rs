//! The `lattice` subcommand: partition counts, sub-hypothesis counts,
//! and (for small d) the full zeta and Möbius matrices.

use crate::{core_usage, open_output, Failure, OutFormat};
use clap::Args;
use hoi_core::lattice::{
    bell_number, enumerate_partitions, mobius_matrix, no_singleton_count, zeta_matrix,
};
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;

/// Full matrices above this dimension would be 877×877 or larger.
const MAX_MATRIX_DIMENSION: usize = 6;

#[derive(Args, Debug)]
pub struct LatticeArgs {
    /// Number of variables (counting up to 12; matrices up to 6).
    #[arg(long)]
    pub d: usize,

    /// Include the full zeta and Möbius matrices.
    #[arg(long)]
    pub matrices: bool,

    /// Output format (text when omitted).
    #[arg(long, value_enum)]
    pub format: Option<OutFormat>,

    /// Output file (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: LatticeArgs) -> Result<(), Failure> {
    if args.d < 1 || args.d > 12 {
        return Err(Failure::Usage(format!(
            "--d must lie in 1..=12, got {}",
            args.d
        )));
    }
    if args.matrices && args.d > MAX_MATRIX_DIMENSION {
        return Err(Failure::Usage(format!(
            "--matrices needs d ≤ {MAX_MATRIX_DIMENSION} (the d={} lattice has {} elements)",
            args.d,
            bell_number(args.d).map_err(core_usage)?
        )));
    }

    let bell = bell_number(args.d).map_err(core_usage)?;
    let no_singleton = no_singleton_count(args.d).map_err(core_usage)?;
    let bipartitions = (1u64 << (args.d - 1)) - 1;

    let matrices = if args.matrices {
        let elements = enumerate_partitions(args.d).map_err(core_usage)?;
        let zeta = zeta_matrix(&elements).map_err(core_usage)?;
        let mobius = mobius_matrix(&elements).map_err(core_usage)?;
        let labels: Vec<String> = elements.iter().map(|p| p.to_string()).collect();
        Some((labels, zeta, mobius))
    } else {
        None
    };

    let mut out = open_output(args.output.as_ref())?;
    let fail = |e: std::io::Error| Failure::Data(format!("writing listing: {e}"));
    match args.format {
        Some(OutFormat::Csv) => {
            return Err(Failure::Usage(
                "the lattice listing is text or JSON (use --format json)".into(),
            ))
        }
        Some(OutFormat::Json) => {
            let mut payload = json!({
                "d": args.d,
                "partitions": bell,
                "no_singleton_partitions": no_singleton,
                "sub_hypotheses": {
                    "streitberg": bipartitions,
                    "modified-dhsic": bipartitions,
                    "lancaster": args.d,
                    "joint": 1,
                },
            });
            if let Some((labels, zeta, mobius)) = matrices {
                payload["elements"] = json!(labels);
                payload["zeta"] = json!(zeta);
                payload["mobius"] = json!(mobius);
            }
            serde_json::to_writer_pretty(&mut out, &payload)
                .map_err(|e| Failure::Data(format!("writing listing: {e}")))?;
            writeln!(out).map_err(fail)?;
        }
        None => {
            writeln!(out, "d = {}", args.d).map_err(fail)?;
            writeln!(out, "partitions (Bell) = {bell}").map_err(fail)?;
            writeln!(out, "no-singleton partitions = {no_singleton}").map_err(fail)?;
            writeln!(
                out,
                "sub-hypotheses: streitberg/modified-dhsic = {bipartitions}, lancaster = {}, joint = 1",
                args.d
            )
            .map_err(fail)?;
            if let Some((labels, zeta, mobius)) = matrices {
                let width = labels.iter().map(|l| l.len()).max().unwrap_or(1);
                for (name, matrix) in [("zeta", &zeta), ("mobius", &mobius)] {
                    writeln!(out, "\n{name}:").map_err(fail)?;
                    for (label, row) in labels.iter().zip(matrix) {
                        let cells: Vec<String> =
                            row.iter().map(|v| format!("{v:>4}")).collect();
                        writeln!(out, "  {label:<width$} {}", cells.join(""))
                            .map_err(fail)?;
                    }
                }
            }
        }
    }
    Ok(())
}
