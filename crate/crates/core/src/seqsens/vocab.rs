use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Id reserved for tokens the vocabulary cannot name.
pub const UNKNOWN_ID: TokenId = 0;
pub const UNKNOWN_TOKEN: &str = "<unk>";

#[derive(Debug, Default)]
struct Inner {
    tokens: Vec<Arc<str>>,
    ids: HashMap<Arc<str>, TokenId>,
}

/// Append-only token interner shared by datasets, samplers and models.
///
/// Ids are internal: reports never contain them, so the order in which
/// concurrent oracles intern new tokens does not leak into outputs.
#[derive(Debug)]
pub struct Vocabulary {
    inner: RwLock<Inner>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let vocab = Vocabulary {
            inner: RwLock::new(Inner::default()),
        };
        vocab.intern(UNKNOWN_TOKEN);
        vocab
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Vocabulary over a fixed token list; tokens must be nonempty and distinct.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let vocab = Self::new();
        let mut count = 0;
        for tok in tokens {
            let tok = tok.as_ref();
            if tok == UNKNOWN_TOKEN || vocab.id(tok).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {tok:?}")));
            }
            vocab.intern(tok);
            count += 1;
        }
        if count == 0 {
            return Err(Error::invalid("vocabulary needs at least one token"));
        }
        Ok(vocab)
    }

    pub fn intern(&self, token: &str) -> TokenId {
        if let Some(id) = self.id(token) {
            return id;
        }
        let mut inner = self.inner.write().expect("vocabulary lock poisoned");
        if let Some(&id) = inner.ids.get(token) {
            return id;
        }
        let id = inner.tokens.len() as TokenId;
        let shared: Arc<str> = Arc::from(token);
        inner.tokens.push(shared.clone());
        inner.ids.insert(shared, id);
        id
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.inner.read().expect("vocabulary lock poisoned").ids.get(token).copied()
    }

    pub fn id_or_unknown(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNKNOWN_ID)
    }

    pub fn token(&self, id: TokenId) -> Option<Arc<str>> {
        self.inner
            .read()
            .expect("vocabulary lock poisoned")
            .tokens
            .get(id as usize)
            .cloned()
    }

    /// Number of ids, the unknown sentinel included.
    pub fn len(&self) -> usize {
        self.inner.read().expect("vocabulary lock poisoned").tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 1
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Sequence> {
        Sequence::new(tokens.iter().map(|t| self.intern(t.as_ref())).collect())
    }

    pub fn decode(&self, sequence: &Sequence) -> Vec<String> {
        let inner = self.inner.read().expect("vocabulary lock poisoned");
        sequence
            .ids()
            .iter()
            .map(|&id| {
                inner
                    .tokens
                    .get(id as usize)
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| UNKNOWN_TOKEN.to_string())
            })
            .collect()
    }
}

/// Nonempty sequence of token ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sequence {
    ids: Vec<TokenId>,
}

impl Sequence {
    pub fn new(ids: Vec<TokenId>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::invalid("sequences must contain at least one token"));
        }
        Ok(Self { ids })
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Token at a 1-based position.
    pub fn at(&self, position: usize) -> TokenId {
        self.ids[position - 1]
    }

    pub(crate) fn ids_mut(&mut self) -> &mut [TokenId] {
        &mut self.ids
    }
}
