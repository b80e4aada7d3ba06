use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use blocksense::seqsens::{DatasetSummary, SensitivityReport};
use blocksense::stats::{histogram, histogram_csv, pearson, PairedSeries, DEFAULT_BIN_WIDTH};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// reports.jsonl written by `estimate`.
    #[arg(long)]
    reports: PathBuf,
    /// A second reports file; estimates are paired by input id and correlated.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: f64,
}

/// Reports from a file, skipping the leading configuration line.
pub fn read_reports(path: &Path) -> Result<Vec<SensitivityReport>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: invalid JSON", path.display(), i + 1))?;
        if value.get("run_config").is_some() {
            continue;
        }
        out.push(
            serde_json::from_value(value).with_context(|| format!("{}:{}: not a report", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub fn run(a: Args) -> Result<()> {
    let reports = read_reports(&a.reports)?;
    let s = DatasetSummary::from_reports(&reports, Vec::new());
    match (s.mean, s.std_error) {
        (Some(m), Some(se)) => println!("inputs = {}, bs-hat = {m:.6} (se {se:.6})", s.succeeded),
        _ => println!("inputs = 0"),
    }
    println!("length,count,mean");
    for (n, l) in &s.per_length {
        println!("{n},{},{:.6}", l.count, l.mean);
    }
    let values: Vec<f64> = reports.iter().map(|r| r.bs_estimate).collect();
    print!("{}", histogram_csv(&histogram(&values, a.bin_width)?));
    if let Some(other) = &a.compare {
        let theirs: HashMap<String, f64> = read_reports(other)?
            .into_iter()
            .map(|r| (r.id, r.bs_estimate))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = reports
            .iter()
            .filter_map(|r| theirs.get(&r.id).map(|&v| (r.bs_estimate, v)))
            .unzip();
        if x.len() < 3 {
            bail!("only {} inputs appear in both files", x.len());
        }
        let r = pearson(&PairedSeries::new(x.clone(), y)?)?;
        println!("paired inputs = {}, pearson r = {:.6} (p {:.3e})", x.len(), r.r, r.p);
    }
    Ok(())
}
