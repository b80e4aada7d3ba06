use std::path::PathBuf;

use anyhow::{bail, Result};
use blocksense::boolfn::{
    read_table, sample_random_boolean, sample_spectrum_concentrated, walsh_hadamard, write_table, TableFormat,
    TruthTable, MAX_EXHAUSTIVE_AVERAGE_ARITY,
};
use serde::Serialize;

use crate::output::write_atomic;

#[derive(clap::Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true))]
pub struct Args {
    /// Parity on N inputs.
    #[arg(long, group = "source", value_name = "N")]
    parity: Option<usize>,
    /// Majority on N inputs; ties go to +1.
    #[arg(long, group = "source", value_name = "N")]
    majority: Option<usize>,
    /// Uniformly random Boolean function on N inputs.
    #[arg(long, group = "source", value_name = "N")]
    random: Option<usize>,
    /// Real-valued function on N inputs with spectrum near --level.
    #[arg(long, group = "source", value_name = "N", requires = "level")]
    spectrum: Option<usize>,
    #[arg(long)]
    level: Option<usize>,
    /// Table file (JSON, or binary when the name ends in .bin).
    #[arg(long, group = "source")]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print s, bs and as.
    #[arg(long)]
    stats: bool,
    /// Print s(f,x), bs(f,x) and the best partition at this input index.
    #[arg(long, value_name = "INDEX")]
    at: Option<usize>,
    /// Inputs sampled for bs-hat when n > 10.
    #[arg(long)]
    sample_size: Option<usize>,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
    /// Write the table here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the Fourier coefficients here.
    #[arg(long)]
    fourier_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Stats {
    arity: usize,
    boolean: bool,
    average_sensitivity: f64,
    bs_hat: f64,
    bs_hat_std_error: Option<f64>,
    /// Pointwise extremes, over all inputs when `n <= 10`.
    s_min: Option<f64>,
    s_max: Option<f64>,
    bs_min: Option<f64>,
    bs_max: Option<f64>,
}

#[derive(Serialize)]
struct AtInput {
    index: usize,
    sensitivity: f64,
    block_sensitivity: f64,
    blocks: Vec<Vec<usize>>,
}

fn load(a: &Args) -> Result<TruthTable> {
    Ok(if let Some(n) = a.parity {
        TruthTable::parity(n)?
    } else if let Some(n) = a.majority {
        TruthTable::majority(n)?
    } else if let Some(n) = a.random {
        sample_random_boolean(n, a.seed)?
    } else if let Some(n) = a.spectrum {
        sample_spectrum_concentrated(n, a.level.expect("required by clap"), a.seed)?
    } else if let Some(p) = &a.table {
        read_table(p)?
    } else {
        bail!("no function given")
    })
}

fn fmt(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v}")
    } else {
        format!("{v:.6}")
    }
}

fn range(lo: Option<f64>, hi: Option<f64>) -> String {
    match (lo, hi) {
        (Some(a), Some(b)) if a == b => fmt(a),
        (Some(a), Some(b)) => format!("{} .. {}", fmt(a), fmt(b)),
        _ => "-".into(),
    }
}

pub fn run(a: Args) -> Result<()> {
    let t = load(&a)?;
    if let Some(p) = &a.out {
        write_table(&t, p)?;
    }
    if let Some(p) = &a.fourier_out {
        write_atomic(p, &walsh_hadamard(&t).to_bytes(TableFormat::from_path(p))?)?;
    }
    if a.stats {
        let avg = t.average_block_sensitivity(a.sample_size, a.seed)?;
        let (mut s_min, mut s_max, mut bs_min, mut bs_max) = (None, None, None, None);
        if t.arity() <= MAX_EXHAUSTIVE_AVERAGE_ARITY {
            let s: Vec<f64> = (0..t.len()).map(|x| t.sensitivity_at(x)).collect::<Result<_, _>>()?;
            let bs: Vec<f64> = (0..t.len())
                .map(|x| t.block_sensitivity_exact(x).map(|b| b.value))
                .collect::<Result<_, _>>()?;
            let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (s_min, s_max, bs_min, bs_max) = (Some(lo(&s)), Some(hi(&s)), Some(lo(&bs)), Some(hi(&bs)));
        }
        let stats = Stats {
            arity: t.arity(),
            boolean: t.is_boolean(),
            average_sensitivity: t.average_sensitivity(),
            bs_hat: avg.mean,
            bs_hat_std_error: avg.std_error,
            s_min,
            s_max,
            bs_min,
            bs_max,
        };
        if a.json {
            println!("{}", serde_json::to_string_pretty(&stats)?);
        } else {
            println!("arity = {}", stats.arity);
            println!("s = {}", range(s_min, s_max));
            println!("bs = {}", range(bs_min, bs_max));
            println!("as = {}", fmt(stats.average_sensitivity));
            match stats.bs_hat_std_error {
                Some(se) => println!("bs-hat = {} (se {se:.6}, {} sampled inputs)", fmt(stats.bs_hat), avg.inputs),
                None => println!("bs-hat = {}", fmt(stats.bs_hat)),
            }
        }
    }
    if let Some(x) = a.at {
        let best = t.block_sensitivity_exact(x)?;
        let at = AtInput {
            index: x,
            sensitivity: t.sensitivity_at(x)?,
            block_sensitivity: best.value,
            blocks: best.blocks.iter().map(|b| b.positions()).collect(),
        };
        if a.json {
            println!("{}", serde_json::to_string_pretty(&at)?);
        } else {
            println!("s(f, x={x}) = {}", fmt(at.sensitivity));
            println!("bs(f, x={x}) = {}", fmt(at.block_sensitivity));
            println!("blocks = {:?}", at.blocks);
        }
    }
    if !a.stats && a.at.is_none() && a.out.is_none() && a.fourier_out.is_none() {
        println!("{}", String::from_utf8(t.to_bytes(TableFormat::Json)?)?);
    }
    Ok(())
}
