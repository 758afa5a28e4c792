//! Decoder vocabularies and their text file format.
//!
//! ```text
//! s2t-vocab 1 symbols 57
//! "<pad>"
//! ...
//! ```
//!
//! A BPE file has header `s2t-vocab 1 bpe <size> <merges>`, then `size`
//! token lines in id order, then one merge per line as two JSON strings.

mod bpe;
mod symbols;

use std::path::Path;

pub use bpe::{bpe_train, BpeVocab, WORD_START};
pub use symbols::SymbolVocab;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const CONTROL_TOKENS: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

const MAGIC: &str = "s2t-vocab";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Vocab {
    Symbols(SymbolVocab),
    Bpe(BpeVocab),
}

impl Vocab {
    pub fn len(&self) -> usize {
        match self {
            Vocab::Symbols(v) => v.len(),
            Vocab::Bpe(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Vocab::Symbols(_) => "symbols",
            Vocab::Bpe(_) => "bpe",
        }
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        match self {
            Vocab::Symbols(v) => v.encode(text),
            Vocab::Bpe(v) => v.encode(text),
        }
    }

    pub fn decode(&self, ids: &[usize]) -> Result<String> {
        match self {
            Vocab::Symbols(v) => v.decode(ids),
            Vocab::Bpe(v) => v.decode(ids),
        }
    }

    /// Display form of one token.
    pub fn token(&self, id: usize) -> Option<String> {
        if let Some(c) = CONTROL_TOKENS.get(id) {
            return Some(c.to_string());
        }
        match self {
            Vocab::Symbols(v) => v.symbol(id).map(String::from),
            Vocab::Bpe(v) => v.token(id).map(String::from),
        }
    }

    pub fn to_text(&self) -> String {
        let q = |s: &str| serde_json::to_string(s).expect("strings serialize");
        let mut out = String::new();
        match self {
            Vocab::Symbols(v) => {
                out.push_str(&format!("{MAGIC} {VERSION} symbols {}\n", v.len()));
                for t in CONTROL_TOKENS {
                    out.push_str(&q(t));
                    out.push('\n');
                }
                for c in v.symbols() {
                    out.push_str(&q(&c.to_string()));
                    out.push('\n');
                }
            }
            Vocab::Bpe(v) => {
                out.push_str(&format!("{MAGIC} {VERSION} bpe {} {}\n", v.len(), v.merges().len()));
                for t in v.tokens() {
                    out.push_str(&q(t));
                    out.push('\n');
                }
                for (a, b) in v.merges() {
                    out.push_str(&format!("{} {}\n", q(a), q(b)));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        let bad = |msg: String| Error::Vocab(msg);
        if header.len() < 4 || header[0] != MAGIC {
            return Err(bad("missing vocabulary header".into()));
        }
        if header[1] != VERSION.to_string() {
            return Err(bad(format!("unsupported vocabulary version {}", header[1])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad count {s:?}")));
        let size = num(header[3])?;
        let mut tokens = Vec::with_capacity(size);
        for i in 0..size {
            let line = lines.next().ok_or_else(|| bad(format!("expected {size} tokens, found {i}")))?;
            tokens.push(serde_json::from_str::<String>(line).map_err(|e| bad(format!("token {i}: {e}")))?);
        }
        match header[2] {
            "symbols" => {
                if tokens.len() < 4 || tokens[..4] != CONTROL_TOKENS {
                    return Err(bad("control tokens must come first".into()));
                }
                let mut chars = Vec::with_capacity(size - 4);
                for t in &tokens[4..] {
                    let mut it = t.chars();
                    match (it.next(), it.next()) {
                        (Some(c), None) => chars.push(c),
                        _ => return Err(bad(format!("symbol token {t:?} is not one character"))),
                    }
                }
                Ok(Vocab::Symbols(SymbolVocab::new(chars)?))
            }
            "bpe" => {
                let n_merges = num(header.get(4).ok_or_else(|| bad("missing merge count".into()))?)?;
                let mut merges = Vec::with_capacity(n_merges);
                for i in 0..n_merges {
                    let line = lines.next().ok_or_else(|| bad(format!("expected {n_merges} merges, found {i}")))?;
                    let parts = serde_json::Deserializer::from_str(line)
                        .into_iter::<String>()
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| bad(format!("merge {i}: {e}")))?;
                    match <[String; 2]>::try_from(parts) {
                        Ok([a, b]) => merges.push((a, b)),
                        Err(_) => return Err(bad(format!("merge {i}: expected two tokens"))),
                    }
                }
                Ok(Vocab::Bpe(BpeVocab::from_parts(tokens, merges)?))
            }
            other => Err(bad(format!("unknown vocabulary kind {other:?}"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
