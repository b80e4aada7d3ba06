//! Built-in task models.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Sequence, TaskModel, TokenId, Vocabulary};
use crate::boolfn::TruthTable;
use crate::error::{Error, Result};

/// Multiplies per-token signs; tokens outside the dictionary count as 0.
pub struct ParityModel {
    signs: HashMap<TokenId, f64>,
}

impl ParityModel {
    pub fn new(signs: &BTreeMap<String, f64>, vocab: &Vocabulary) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::invalid("parity dictionary is empty"));
        }
        let mut map = HashMap::new();
        for (tok, &v) in signs {
            if v != 1.0 && v != -1.0 {
                return Err(Error::invalid(format!("parity sign for {tok:?} must be +1 or -1, got {v}")));
            }
            map.insert(vocab.intern(tok), v);
        }
        Ok(Self { signs: map })
    }

    /// The dictionary `{"1": +1, "-1": -1}`.
    pub fn over_signs(vocab: &Vocabulary) -> Self {
        let signs = BTreeMap::from([("1".to_string(), 1.0), ("-1".to_string(), -1.0)]);
        Self::new(&signs, vocab).expect("fixed dictionary is valid")
    }
}

impl TaskModel for ParityModel {
    fn name(&self) -> String {
        "parity".into()
    }

    fn num_classes(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &Sequence) -> Result<Vec<f64>> {
        Ok(vec![x.ids().iter().map(|id| self.signs.get(id).copied().unwrap_or(0.0)).product()])
    }
}

/// Squashing head of the bag-of-embeddings model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Squash {
    #[default]
    Tanh,
    /// Clip to `[-1,1]`.
    Clip,
}

impl Squash {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Squash::Tanh => z.tanh(),
            Squash::Clip => z.clamp(-1.0, 1.0),
        }
    }
}

/// JSON form of a lexicon: `{"dim": d, "scores": {"good": [0.8], ...}, "head": "tanh"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconSpec {
    #[serde(default = "one")]
    pub dim: usize,
    pub scores: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub head: Squash,
}

fn one() -> usize {
    1
}

/// Averages per-token score vectors and squashes each coordinate.
pub struct LexiconModel {
    dim: usize,
    scores: HashMap<TokenId, Vec<f64>>,
    head: Squash,
}

impl LexiconModel {
    pub fn new(spec: &LexiconSpec, vocab: &Vocabulary) -> Result<Self> {
        if spec.dim == 0 {
            return Err(Error::invalid("lexicon dimension must be at least 1"));
        }
        let mut scores = HashMap::new();
        for (tok, v) in &spec.scores {
            if v.len() != spec.dim {
                return Err(Error::invalid(format!(
                    "lexicon entry {tok:?} has {} scores, expected {}",
                    v.len(),
                    spec.dim
                )));
            }
            if v.iter().any(|s| !s.is_finite()) {
                return Err(Error::invalid(format!("lexicon entry {tok:?} is not finite")));
            }
            scores.insert(vocab.intern(tok), v.clone());
        }
        Ok(Self {
            dim: spec.dim,
            scores,
            head: spec.head,
        })
    }
}

impl TaskModel for LexiconModel {
    fn name(&self) -> String {
        "lexicon_boe".into()
    }

    fn num_classes(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &Sequence) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.dim];
        for id in x.ids() {
            if let Some(v) = self.scores.get(id) {
                acc.iter_mut().zip(v).for_each(|(a, s)| *a += s);
            }
        }
        let n = x.len() as f64;
        Ok(acc.into_iter().map(|a| self.head.apply(a / n)).collect())
    }
}

/// JSON form of an automaton. Missing transitions leave the state unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfaSpec {
    pub start: String,
    pub accept: Vec<String>,
    pub transitions: BTreeMap<String, BTreeMap<String, String>>,
}

/// Runs a deterministic automaton: +1 if it ends in an accepting state, else -1.
pub struct DfaModel {
    start: usize,
    accept: Vec<bool>,
    delta: Vec<HashMap<TokenId, usize>>,
}

impl DfaModel {
    pub fn new(spec: &DfaSpec, vocab: &Vocabulary) -> Result<Self> {
        let mut names: Vec<&str> = vec![spec.start.as_str()];
        names.extend(spec.accept.iter().map(String::as_str));
        for (from, edges) in &spec.transitions {
            names.push(from);
            names.extend(edges.values().map(String::as_str));
        }
        names.sort_unstable();
        names.dedup();
        let index = |s: &str| names.binary_search(&s).expect("collected above");
        let mut delta = vec![HashMap::new(); names.len()];
        for (from, edges) in &spec.transitions {
            for (tok, to) in edges {
                delta[index(from)].insert(vocab.intern(tok), index(to));
            }
        }
        let mut accept = vec![false; names.len()];
        for a in &spec.accept {
            accept[index(a)] = true;
        }
        Ok(Self {
            start: index(&spec.start),
            accept,
            delta,
        })
    }

    /// Accepts strings with an even number of `token`.
    pub fn even_count(token: &str, vocab: &Vocabulary) -> Self {
        let spec = DfaSpec {
            start: "even".into(),
            accept: vec!["even".into()],
            transitions: BTreeMap::from([
                ("even".into(), BTreeMap::from([(token.to_string(), "odd".to_string())])),
                ("odd".into(), BTreeMap::from([(token.to_string(), "even".to_string())])),
            ]),
        };
        Self::new(&spec, vocab).expect("fixed automaton is valid")
    }
}

impl TaskModel for DfaModel {
    fn name(&self) -> String {
        "dfa".into()
    }

    fn num_classes(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &Sequence) -> Result<Vec<f64>> {
        let state = x
            .ids()
            .iter()
            .fold(self.start, |q, id| self.delta[q].get(id).copied().unwrap_or(q));
        Ok(vec![if self.accept[state] { 1.0 } else { -1.0 }])
    }
}

/// Sign of `count(a) - count(b)`; 0 on a tie.
pub struct MajorityTokenModel {
    a: TokenId,
    b: TokenId,
}

impl MajorityTokenModel {
    pub fn new(a: &str, b: &str, vocab: &Vocabulary) -> Result<Self> {
        if a == b {
            return Err(Error::invalid("majority needs two different tokens"));
        }
        Ok(Self {
            a: vocab.intern(a),
            b: vocab.intern(b),
        })
    }
}

impl TaskModel for MajorityTokenModel {
    fn name(&self) -> String {
        "majority_token".into()
    }

    fn num_classes(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &Sequence) -> Result<Vec<f64>> {
        let diff: i64 = x
            .ids()
            .iter()
            .map(|&id| i64::from(id == self.a) - i64::from(id == self.b))
            .sum();
        Ok(vec![diff.signum() as f64])
    }
}

/// A truth table read over the tokens `"1"` and `"-1"`.
pub struct TableModel {
    table: TruthTable,
    plus: TokenId,
    minus: TokenId,
}

impl TableModel {
    pub fn new(table: TruthTable, vocab: &Vocabulary) -> Self {
        Self {
            table,
            plus: vocab.intern("1"),
            minus: vocab.intern("-1"),
        }
    }
}

impl TaskModel for TableModel {
    fn name(&self) -> String {
        format!("table:n={}", self.table.arity())
    }

    fn num_classes(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &Sequence) -> Result<Vec<f64>> {
        if x.len() != self.table.arity() {
            return Err(Error::invalid(format!(
                "table model has arity {} but the input has length {}",
                self.table.arity(),
                x.len()
            )));
        }
        let mut index = 0usize;
        for (i, &id) in x.ids().iter().enumerate() {
            if id == self.minus {
                index |= 1 << i;
            } else if id != self.plus {
                return Err(Error::invalid("table model inputs must be the tokens 1 and -1"));
            }
        }
        Ok(vec![self.table.value(index)?])
    }
}

/// The same scores for every input.
pub struct ConstantModel {
    scores: Vec<f64>,
}

impl ConstantModel {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() || scores.iter().any(|s| !(-1.0..=1.0).contains(s)) {
            return Err(Error::invalid("constant scores must be nonempty and within [-1,1]"));
        }
        Ok(Self { scores })
    }
}

impl TaskModel for ConstantModel {
    fn name(&self) -> String {
        "constant".into()
    }

    fn num_classes(&self) -> usize {
        self.scores.len()
    }

    fn evaluate(&self, _x: &Sequence) -> Result<Vec<f64>> {
        Ok(self.scores.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc(v: &Vocabulary, s: &str) -> Sequence {
        v.encode(&s.split_whitespace().collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn parity_matches_truth_table() {
        let v = Vocabulary::new();
        let p = ParityModel::over_signs(&v);
        let t = TableModel::new(TruthTable::parity(4).unwrap(), &v);
        for idx in 0..16usize {
            let toks: Vec<&str> = (0..4).map(|i| if idx >> i & 1 == 1 { "-1" } else { "1" }).collect();
            let x = v.encode(&toks).unwrap();
            assert_eq!(p.evaluate(&x).unwrap(), t.evaluate(&x).unwrap());
        }
        assert_eq!(p.evaluate(&enc(&v, "1 zz")).unwrap(), vec![0.0]);
    }

    #[test]
    fn lexicon_averages_and_squashes() {
        let v = Vocabulary::new();
        let spec: LexiconSpec = serde_json::from_str(r#"{"scores":{"good":[2.0],"bad":[-2.0]}}"#).unwrap();
        let m = LexiconModel::new(&spec, &v).unwrap();
        assert_eq!(m.evaluate(&enc(&v, "good movie")).unwrap(), vec![1.0f64.tanh()]);
        assert_eq!(m.evaluate(&enc(&v, "good bad")).unwrap(), vec![0.0]);
        let zero: LexiconSpec = serde_json::from_str(r#"{"scores":{"good":[0.0]}}"#).unwrap();
        let z = LexiconModel::new(&zero, &v).unwrap();
        assert_eq!(z.evaluate(&enc(&v, "good x y")).unwrap(), vec![0.0]);
        let bad: LexiconSpec = serde_json::from_str(r#"{"dim":2,"scores":{"good":[0.0]}}"#).unwrap();
        assert!(LexiconModel::new(&bad, &v).is_err());
    }

    #[test]
    fn dfa_even_count() {
        let v = Vocabulary::new();
        let d = DfaModel::even_count("b", &v);
        assert_eq!(d.evaluate(&enc(&v, "a a a")).unwrap(), vec![1.0]);
        assert_eq!(d.evaluate(&enc(&v, "a b a")).unwrap(), vec![-1.0]);
        assert_eq!(d.evaluate(&enc(&v, "b c b")).unwrap(), vec![1.0]);
    }

    #[test]
    fn majority_sign() {
        let v = Vocabulary::new();
        let m = MajorityTokenModel::new("a", "b", &v).unwrap();
        assert_eq!(m.evaluate(&enc(&v, "a a b")).unwrap(), vec![1.0]);
        assert_eq!(m.evaluate(&enc(&v, "a b")).unwrap(), vec![0.0]);
        assert_eq!(m.evaluate(&enc(&v, "b c")).unwrap(), vec![-1.0]);
        assert!(MajorityTokenModel::new("a", "a", &v).is_err());
    }

    #[test]
    fn table_rejects_foreign_tokens() {
        let v = Vocabulary::new();
        let t = TableModel::new(TruthTable::parity(2).unwrap(), &v);
        assert!(t.evaluate(&enc(&v, "1 x")).is_err());
        assert!(t.evaluate(&enc(&v, "1")).is_err());
    }
}
