//! The `synth` subcommand: seeded synthetic datasets as CSV.

use crate::{core_usage, dataio, Failure};
use clap::Args;
use hoi_core::synth::{gen_gaussian, gen_null, gen_xor, GaussianCase, GaussianVariant, XorCase};
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Data generator: null, xor, sigma1, sigma2.
    #[arg(long)]
    pub generator: String,

    /// Number of observations.
    #[arg(long)]
    pub n: usize,

    /// Dimension for the null generator (the others are five-variable).
    #[arg(long)]
    pub d: Option<usize>,

    /// Fraction of xor samples constrained by the gate.
    #[arg(long)]
    pub proportion: Option<f64>,

    /// Gate modulus for xor.
    #[arg(long)]
    pub modulus: Option<u32>,

    /// Within-block correlation for sigma1/sigma2.
    #[arg(long)]
    pub beta: Option<f64>,

    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output file (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: SynthArgs) -> Result<(), Failure> {
    let reject = |flag: Option<bool>, name: &str, gen: &str| -> Result<(), Failure> {
        if flag.is_some_and(|set| set) {
            return Err(Failure::Usage(format!("--{name} does not apply to {gen}")));
        }
        Ok(())
    };
    let data = match args.generator.as_str() {
        "null" => {
            reject(args.proportion.map(|_| true), "proportion", "null")?;
            reject(args.beta.map(|_| true), "beta", "null")?;
            reject(args.modulus.map(|_| true), "modulus", "null")?;
            gen_null(args.n, args.d.unwrap_or(5), args.seed).map_err(core_usage)?
        }
        "xor" => {
            reject(args.beta.map(|_| true), "beta", "xor")?;
            reject(args.d.map(|_| true), "d", "xor")?;
            let mut case = XorCase::new(args.n, args.proportion.unwrap_or(1.0), args.seed);
            if let Some(m) = args.modulus {
                case.modulus = m;
            }
            gen_xor(&case).map_err(core_usage)?
        }
        "sigma1" | "sigma2" => {
            reject(args.proportion.map(|_| true), "proportion", "sigma1/sigma2")?;
            reject(args.modulus.map(|_| true), "modulus", "sigma1/sigma2")?;
            reject(args.d.map(|_| true), "d", "sigma1/sigma2")?;
            let beta = args
                .beta
                .ok_or_else(|| Failure::Usage("--beta is required for sigma1/sigma2".into()))?;
            let variant = if args.generator == "sigma1" {
                GaussianVariant::SingletonQuad
            } else {
                GaussianVariant::PairTriple
            };
            gen_gaussian(&GaussianCase {
                variant,
                beta,
                n: args.n,
                seed: args.seed,
            })
            .map_err(core_usage)?
        }
        other => {
            return Err(Failure::Usage(format!(
                "unknown generator `{other}` (expected null, xor, sigma1 or sigma2)"
            )))
        }
    };
    dataio::write_dataset_to(&data, args.output.as_deref())
}
