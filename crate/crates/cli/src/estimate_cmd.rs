use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use blocksense::boolfn::read_table;
use blocksense::seqsens::protocol::{Connection, MockConfig, OracleClient, RemoteModel, RemoteSampler};
use blocksense::seqsens::{
    average_block_sensitivity_dataset, read_jsonl, read_text, ConstantModel, DfaModel, DfaSpec, EstimateConfig,
    Example, ExhaustiveSampler, FallbackSampler, FocusWindow, LexiconModel, LexiconSpec, MajorityTokenModel,
    MarkovGibbsSampler, MarkovModel, NeighborSampler, PackingMode, ParityModel, Sequence, SequenceLogWeight,
    SubsetFamilyConfig, TableModel, TaskModel, TokenId, UniformSampler, Vocabulary, WindowCenter, DEFAULT_BURN_IN,
    DEFAULT_ENUMERATION_CAP, DEFAULT_THINNING, UNKNOWN_ID,
};
use blocksense::stats::{histogram, histogram_csv, DEFAULT_BIN_WIDTH};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigFile, Embedded};
use crate::output::{write_atomic, write_csv_with_config, write_json};
use crate::ProtocolFailure;

/// Everything an estimation run depends on. Thread count is deliberately
/// absent: it must not change the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateRun {
    pub dataset: Option<PathBuf>,
    pub text: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub sampler: String,
    pub model: String,
    pub smoothing: f64,
    pub burn_in: usize,
    pub thinning: usize,
    pub enumeration_cap: u128,
    pub timeout_secs: u64,
    pub out: PathBuf,
    pub seed: u64,
    pub mode: PackingMode,
    pub family: SubsetFamilyConfig,
}

impl Default for EstimateRun {
    fn default() -> Self {
        Self {
            dataset: None,
            text: None,
            corpus: None,
            sampler: "uniform".into(),
            model: String::new(),
            smoothing: 1.0,
            burn_in: DEFAULT_BURN_IN,
            thinning: DEFAULT_THINNING,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            timeout_secs: 30,
            out: PathBuf::from("out"),
            seed: 0,
            mode: PackingMode::Auto,
            family: SubsetFamilyConfig::default(),
        }
    }
}

#[derive(clap::Args, Debug, Default)]
pub struct Args {
    /// JSON-lines dataset: {"id", "tokens", "label"?} per line.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Plain-text dataset, one whitespace-tokenized sequence per line.
    #[arg(long, conflicts_with = "dataset")]
    text: Option<PathBuf>,
    /// Plain-text corpus for Markov samplers (default: the dataset).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// uniform | exhaustive | markov:k=K | markov-exact:k=K | mock | cmd:COMMAND | tcp:ADDR
    #[arg(long)]
    sampler: Option<String>,
    /// parity[:MAP.json] | lexicon:FILE | dfa:FILE | majority:A,B | table:FILE | constant:V,.. | mock | cmd:COMMAND | tcp:ADDR
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    smoothing: Option<f64>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thinning: Option<usize>,
    #[arg(long)]
    enumeration_cap: Option<u128>,
    /// Seconds to wait for an external oracle reply.
    #[arg(long)]
    timeout: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// exact | greedy | auto
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PackingMode>,
    /// Neighbor samples per subset.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    max_span_len: Option<usize>,
    #[arg(long)]
    num_chunks: Option<usize>,
    /// Add every subset of a window of this width.
    #[arg(long)]
    window_width: Option<usize>,
    /// median or a 1-based position.
    #[arg(long, requires = "window_width")]
    window_center: Option<String>,
    /// Score every nonempty subset (short sequences only).
    #[arg(long)]
    full_family: bool,
    /// Enumerate neighborhoods exactly instead of sampling.
    #[arg(long)]
    enumerate: bool,
    /// Leave the original input out of each variance.
    #[arg(long)]
    exclude_original: bool,
}

fn parse_mode(s: &str) -> std::result::Result<PackingMode, String> {
    serde_json::from_value(serde_json::Value::from(s)).map_err(|_| format!("unknown packing mode {s:?}"))
}

fn parse_center(s: &str) -> Result<WindowCenter> {
    if s == "median" {
        return Ok(WindowCenter::Median);
    }
    Ok(WindowCenter::Position(
        s.parse().with_context(|| format!("window center must be 'median' or a position, got {s:?}"))?,
    ))
}

impl Args {
    fn resolve(self, file: &ConfigFile) -> Result<EstimateRun> {
        let mut c: EstimateRun = file.section("estimate")?;
        if self.dataset.is_some() || self.text.is_some() {
            c.dataset = self.dataset;
            c.text = self.text;
        }
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(
            sampler => c.sampler,
            model => c.model,
            smoothing => c.smoothing,
            burn_in => c.burn_in,
            thinning => c.thinning,
            enumeration_cap => c.enumeration_cap,
            timeout => c.timeout_secs,
            out => c.out,
            seed => c.seed,
            mode => c.mode,
            samples => c.family.samples_per_subset,
            max_span_len => c.family.max_span_len,
            num_chunks => c.family.num_chunks,
        );
        if self.corpus.is_some() {
            c.corpus = self.corpus;
        }
        if let Some(width) = self.window_width {
            let center = match self.window_center {
                Some(s) => parse_center(&s)?,
                None => c.family.window.map_or(WindowCenter::Median, |w| w.center),
            };
            c.family.window = Some(FocusWindow { center, width });
        }
        c.family.full_family |= self.full_family;
        c.family.enumerate |= self.enumerate;
        if self.exclude_original {
            c.family.include_original = false;
        }
        if c.dataset.is_some() == c.text.is_some() {
            bail!("give exactly one of --dataset or --text");
        }
        if c.model.is_empty() {
            bail!("--model is required");
        }
        c.family.validate()?;
        Ok(c)
    }
}

/// External endpoints keyed by their spec, so a sampler and a model naming
/// the same endpoint share one connection.
struct Endpoints {
    clients: HashMap<String, Arc<OracleClient>>,
    timeout: Duration,
}

impl Endpoints {
    fn get(&mut self, spec: &str) -> Result<Option<Arc<OracleClient>>> {
        if let Some(c) = self.clients.get(spec) {
            return Ok(Some(c.clone()));
        }
        let conn = if spec == "mock" {
            Connection::in_process(MockConfig::default())?
        } else if let Some(cmd) = spec.strip_prefix("cmd:") {
            Connection::spawn(cmd)?
        } else if let Some(addr) = spec.strip_prefix("tcp:") {
            Connection::connect_tcp(addr)?
        } else {
            return Ok(None);
        };
        let client = Arc::new(
            OracleClient::new(conn.with_timeout(self.timeout))
                .with_context(|| format!("hello to oracle {spec:?}"))?,
        );
        self.clients.insert(spec.to_string(), client.clone());
        Ok(Some(client))
    }

    fn shutdown(&self) {
        for c in self.clients.values() {
            c.shutdown();
        }
    }
}

fn read_dataset(c: &EstimateRun, vocab: &Vocabulary) -> Result<Vec<Example>> {
    let open = |p: &Path| -> Result<BufReader<File>> {
        Ok(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?))
    };
    if let Some(p) = &c.dataset {
        Ok(read_jsonl(open(p)?, &p.display().to_string(), vocab)?)
    } else {
        let p = c.text.as_ref().expect("resolved");
        Ok(read_text(open(p)?, vocab)?)
    }
}

/// Dataset (and corpus) tokens sorted by their text.
fn alphabet(vocab: &Vocabulary, seqs: &[&Sequence]) -> Result<Vec<TokenId>> {
    let mut ids: Vec<TokenId> = seqs.iter().flat_map(|s| s.ids().iter().copied()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.retain(|&i| i != UNKNOWN_ID);
    ids.sort_by_key(|&i| vocab.token(i).map(|t| t.to_string()).unwrap_or_default());
    if ids.len() < 2 {
        bail!("the dataset uses fewer than two distinct tokens; nothing to substitute");
    }
    Ok(ids)
}

fn markov_order(spec: &str, prefix: &str) -> Result<usize> {
    spec.strip_prefix(prefix)
        .and_then(|rest| rest.strip_prefix("k="))
        .and_then(|k| k.parse().ok())
        .filter(|&k| k >= 1)
        .with_context(|| format!("sampler {spec:?} needs the form {prefix}k=K with K >= 1"))
}

fn build_sampler(
    c: &EstimateRun,
    vocab: &Arc<Vocabulary>,
    examples: &[Example],
    endpoints: &mut Endpoints,
) -> Result<Box<dyn NeighborSampler>> {
    let spec = c.sampler.as_str();
    if let Some(client) = endpoints.get(spec)? {
        return Ok(Box::new(RemoteSampler::new(client, vocab.clone())?));
    }
    let corpus: Vec<Sequence> = match &c.corpus {
        Some(p) => read_text(
            BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?),
            vocab,
        )?
        .into_iter()
        .map(|e| e.sequence)
        .collect(),
        None => examples.iter().map(|e| e.sequence.clone()).collect(),
    };
    let seqs: Vec<&Sequence> = examples.iter().map(|e| &e.sequence).chain(&corpus).collect();
    let markov = |prefix: &str| -> Result<Arc<MarkovModel>> {
        let k = markov_order(spec, prefix)?;
        Ok(Arc::new(MarkovModel::fit(k, c.smoothing, &corpus, vocab)?))
    };
    let gibbs = |m: Arc<MarkovModel>| MarkovGibbsSampler::new(m).with_schedule(c.burn_in, c.thinning);
    Ok(match spec {
        "uniform" => Box::new(UniformSampler::new(alphabet(vocab, &seqs)?)?),
        "exhaustive" => {
            let a = alphabet(vocab, &seqs)?;
            Box::new(FallbackSampler {
                primary: ExhaustiveSampler::uniform(a.clone())?.with_cap(c.enumeration_cap),
                fallback: UniformSampler::new(a)?,
            })
        }
        s if s.starts_with("markov:") => Box::new(gibbs(markov("markov:")?)?),
        s if s.starts_with("markov-exact:") => {
            let m = markov("markov-exact:")?;
            Box::new(FallbackSampler {
                primary: ExhaustiveSampler::new(m.alphabet().to_vec(), m.clone() as Arc<dyn SequenceLogWeight>)?
                    .with_cap(c.enumeration_cap),
                fallback: gibbs(m)?,
            })
        }
        other => bail!("unknown sampler {other:?}"),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {path}"))
}

fn build_model(c: &EstimateRun, vocab: &Arc<Vocabulary>, endpoints: &mut Endpoints) -> Result<Box<dyn TaskModel>> {
    let spec = c.model.as_str();
    if let Some(client) = endpoints.get(spec)? {
        return Ok(Box::new(RemoteModel::new(client, vocab.clone())?));
    }
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match (kind, arg) {
        ("parity", "") => Box::new(ParityModel::over_signs(vocab)),
        ("parity", path) => Box::new(ParityModel::new(&read_json::<BTreeMap<String, f64>>(path)?, vocab)?),
        ("lexicon", path) if !path.is_empty() => Box::new(LexiconModel::new(&read_json::<LexiconSpec>(path)?, vocab)?),
        ("dfa", path) if !path.is_empty() => Box::new(DfaModel::new(&read_json::<DfaSpec>(path)?, vocab)?),
        ("majority", pair) => {
            let Some((a, b)) = pair.split_once(',') else {
                bail!("majority model needs two tokens: majority:A,B");
            };
            Box::new(MajorityTokenModel::new(a, b, vocab)?)
        }
        ("table", path) if !path.is_empty() => Box::new(TableModel::new(read_table(Path::new(path))?, vocab)),
        ("constant", values) if !values.is_empty() => {
            let scores = values
                .split(',')
                .map(|v| v.parse::<f64>().with_context(|| format!("bad constant score {v:?}")))
                .collect::<Result<Vec<_>>>()?;
            Box::new(ConstantModel::new(scores)?)
        }
        _ => bail!("unknown model {spec:?}"),
    })
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    run_config: Embedded<'a, EstimateRun>,
    sampler: String,
    model: String,
    summary: &'a blocksense::seqsens::DatasetSummary,
}

pub fn run(args: Args, file: &ConfigFile) -> Result<()> {
    let c = args.resolve(file)?;
    let vocab = Arc::new(Vocabulary::new());
    let examples = read_dataset(&c, &vocab)?;
    if examples.is_empty() {
        bail!("the dataset is empty");
    }
    let mut endpoints = Endpoints {
        clients: HashMap::new(),
        timeout: Duration::from_secs(c.timeout_secs),
    };
    let sampler = build_sampler(&c, &vocab, &examples, &mut endpoints)?;
    let model = build_model(&c, &vocab, &mut endpoints)?;
    let config = EstimateConfig {
        family: c.family.clone(),
        mode: c.mode,
        seed: c.seed,
    };
    let result = average_block_sensitivity_dataset(&examples, &sampler, &model, &config);
    endpoints.shutdown();
    let result = result?;

    let embedded = Embedded {
        command: "estimate",
        config: &c,
    };
    let mut jsonl = serde_json::to_string(&serde_json::json!({ "run_config": &embedded }))?;
    jsonl.push('\n');
    for r in &result.reports {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    write_atomic(&c.out.join("reports.jsonl"), jsonl.as_bytes())?;
    write_json(
        &c.out.join("summary.json"),
        &SummaryFile {
            run_config: Embedded {
                command: "estimate",
                config: &c,
            },
            sampler: sampler.name(),
            model: model.name(),
            summary: &result.summary,
        },
    )?;
    let values: Vec<f64> = result.reports.iter().map(|r| r.bs_estimate).collect();
    let bins = histogram(&values, DEFAULT_BIN_WIDTH)?;
    write_csv_with_config(&c.out.join("histogram.csv"), &embedded, &histogram_csv(&bins))?;

    let s = &result.summary;
    match (s.mean, s.std_error) {
        (Some(m), Some(se)) => println!("bs-hat = {m:.6} (se {se:.6}) over {} of {} inputs", s.succeeded, s.inputs),
        _ => println!("no input succeeded ({} inputs)", s.inputs),
    }
    for f in &s.failed {
        eprintln!("failed {}: {}", f.id, f.error);
    }
    println!("wrote {}", c.out.display());
    if s.any_protocol_violation() {
        return Err(ProtocolFailure(format!(
            "{} input(s) failed with oracle protocol violations",
            s.failed.iter().filter(|f| f.protocol_violation).count()
        ))
        .into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = ConfigFile::parse(r#"{"estimate": {"seed": 4, "model": "parity", "family": {"max_span_len": 3}}}"#)
            .unwrap();
        let args = Args {
            text: Some("x.txt".into()),
            seed: Some(9),
            samples: Some(5),
            ..Default::default()
        };
        let c = args.resolve(&file).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.model, "parity");
        assert_eq!(c.family.max_span_len, 3);
        assert_eq!(c.family.samples_per_subset, 5);
    }

    #[test]
    fn resolution_errors() {
        let none = ConfigFile::default();
        assert!(Args {
            model: Some("parity".into()),
            ..Default::default()
        }
        .resolve(&none)
        .is_err());
        assert!(Args {
            text: Some("x".into()),
            ..Default::default()
        }
        .resolve(&none)
        .is_err());
        assert!(Args {
            text: Some("x".into()),
            model: Some("parity".into()),
            samples: Some(1),
            ..Default::default()
        }
        .resolve(&none)
        .is_err());
    }

    #[test]
    fn markov_specs() {
        assert_eq!(markov_order("markov:k=2", "markov:").unwrap(), 2);
        assert!(markov_order("markov:k=0", "markov:").is_err());
        assert!(markov_order("markov:2", "markov:").is_err());
    }
}
