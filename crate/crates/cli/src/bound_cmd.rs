use std::path::PathBuf;

use anyhow::{bail, Result};
use blocksense::linbound::{run_trials, TrialConfig, TrialSummary};
use serde::Serialize;

use crate::config::{ConfigFile, Embedded};
use crate::output::write_json;

#[derive(clap::Args, Debug, Default)]
pub struct Args {
    #[arg(long)]
    trials: Option<usize>,
    /// Window sizes, cycled across trials.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    max_n: Option<usize>,
    /// Alphabet size.
    #[arg(long)]
    radix: Option<usize>,
    #[arg(long)]
    feature_dim: Option<usize>,
    /// Cap on feature vector norms.
    #[arg(long)]
    c_cap: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the certificate JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Args {
    fn resolve(self, file: &ConfigFile) -> Result<TrialConfig> {
        let mut c: TrialConfig = file.section("verify_bound")?;
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(
            trials => c.trials,
            k => c.ks,
            max_n => c.max_n,
            radix => c.radix,
            feature_dim => c.feature_dim,
            c_cap => c.c_cap,
            seed => c.seed,
        );
        Ok(c)
    }
}

#[derive(Serialize)]
struct CertificateFile<'a> {
    run_config: Embedded<'a, TrialConfig>,
    summary: &'a TrialSummary,
}

pub fn run(args: Args, file: &ConfigFile) -> Result<()> {
    let out = args.out.clone();
    let c = args.resolve(file)?;
    let summary = run_trials(&c)?;
    if let Some(p) = &out {
        write_json(
            p,
            &CertificateFile {
                run_config: Embedded {
                    command: "verify-bound",
                    config: &c,
                },
                summary: &summary,
            },
        )?;
    }
    println!(
        "trials = {}, violations = {}, block violations = {}, max bs/bound = {:.6}",
        summary.trials, summary.violations, summary.block_violations, summary.max_ratio
    );
    for (head, slope) in &summary.lipschitz_audit {
        println!("lipschitz audit {head:?}: max slope {slope:.9}");
    }
    if summary.violations + summary.block_violations > 0 {
        bail!("the bound was violated");
    }
    Ok(())
}
