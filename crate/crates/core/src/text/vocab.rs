use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{DialogueExample, TextError, TokenizeMode};

pub const SEP: &str = "[SEP]";
pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const SEP_ID: u32 = 0;
pub const PAD_ID: u32 = 1;
pub const UNK_ID: u32 = 2;

const RESERVED: [&str; 3] = [SEP, PAD, UNK];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub id: u32,
}

/// Bijective surface/id mapping with the three reserved ids first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    ids: HashMap<String, u32>,
    mode: TokenizeMode,
}

impl Vocabulary {
    pub fn new(mode: TokenizeMode) -> Self {
        let mut vocab = Self {
            surfaces: Vec::new(),
            ids: HashMap::new(),
            mode,
        };
        for s in RESERVED {
            vocab.insert(s);
        }
        vocab
    }

    /// Adds `surface` if unseen and returns its id.
    pub fn insert(&mut self, surface: &str) -> u32 {
        if let Some(&id) = self.ids.get(surface) {
            return id;
        }
        let id = self.surfaces.len() as u32;
        self.surfaces.push(surface.to_string());
        self.ids.insert(surface.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn mode(&self) -> TokenizeMode {
        self.mode
    }

    /// Unknown surfaces map to `[UNK]`.
    pub fn id(&self, surface: &str) -> u32 {
        self.ids.get(surface).copied().unwrap_or(UNK_ID)
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    pub fn token(&self, surface: &str) -> Token {
        let id = self.id(surface);
        Token {
            surface: self.surfaces[id as usize].clone(),
            id,
        }
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.surface(id).unwrap_or(UNK).to_string())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, s) in self.surfaces.iter().enumerate() {
            let _ = writeln!(out, "{id}\t{s}");
        }
        out
    }

    pub fn from_text(text: &str, mode: TokenizeMode) -> Result<Self, TextError> {
        let mut surfaces = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let bad = |reason: &str| TextError::BadVocab {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (id, surface) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            let id: usize = id.parse().map_err(|_| bad("id is not an integer"))?;
            if id != surfaces.len() {
                return Err(bad("ids must be dense and ascending"));
            }
            if surface.is_empty() {
                return Err(bad("empty surface"));
            }
            surfaces.push(surface.to_string());
        }
        if surfaces.len() < RESERVED.len() || surfaces[..3] != RESERVED {
            return Err(TextError::BadVocab {
                line: 1,
                reason: "reserved tokens must occupy ids 0..3".into(),
            });
        }
        let mut ids = HashMap::with_capacity(surfaces.len());
        for (id, s) in surfaces.iter().enumerate() {
            if ids.insert(s.clone(), id as u32).is_some() {
                return Err(TextError::BadVocab {
                    line: id + 1,
                    reason: format!("duplicate surface {s:?}"),
                });
            }
        }
        Ok(Self {
            surfaces,
            ids,
            mode,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        std::fs::write(path, self.to_text()).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path, mode: TokenizeMode) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text, mode)
    }
}

/// Ids are assigned in order of first occurrence: context, incomplete, rewrite.
pub fn build_vocab(
    corpus: &[DialogueExample],
    mode: TokenizeMode,
) -> Result<Vocabulary, TextError> {
    if corpus.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let mut vocab = Vocabulary::new(mode);
    for example in corpus {
        let tokens = example
            .context
            .iter()
            .flatten()
            .chain(&example.incomplete)
            .chain(example.rewrite.iter().flatten());
        for t in tokens {
            vocab.insert(t);
        }
    }
    Ok(vocab)
}
