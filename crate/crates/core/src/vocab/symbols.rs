use std::collections::HashMap;

use super::{CONTROL_TOKENS, UNK};
use crate::error::{Error, Result};

/// Character-level vocabulary: the four control tokens, then one id per
/// symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolVocab {
    symbols: Vec<char>,
    index: HashMap<char, usize>,
}

impl SymbolVocab {
    pub fn new(symbols: impl IntoIterator<Item = char>) -> Result<Self> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if index.insert(c, CONTROL_TOKENS.len() + i).is_some() {
                return Err(Error::Vocab(format!("duplicate symbol {c:?}")));
            }
        }
        Ok(SymbolVocab { symbols, index })
    }

    /// a–z, A–Z and space: 57 ids with the control tokens.
    pub fn letters() -> Self {
        Self::with_punctuation("").expect("letters are distinct")
    }

    /// The twelve desk-task glyph classes, space and period: 18 ids.
    pub fn desk() -> Self {
        Self::new(crate::dataset::DESK_ALPHABET.chars().chain([' ', '.'])).expect("desk symbols are distinct")
    }

    pub fn with_punctuation(punctuation: &str) -> Result<Self> {
        Self::new(('a'..='z').chain('A'..='Z').chain([' ']).chain(punctuation.chars()))
    }

    pub fn len(&self) -> usize {
        CONTROL_TOKENS.len() + self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn id(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<char> {
        id.checked_sub(CONTROL_TOKENS.len()).and_then(|i| self.symbols.get(i)).copied()
    }

    /// One id per character; unknown characters map to `<unk>`. No framing
    /// tokens are added.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.id(c).unwrap_or(UNK)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Result<String> {
        let mut out = String::with_capacity(ids.len());
        for &id in ids {
            if id >= self.len() {
                return Err(Error::UnknownTokenId(id));
            }
            match self.symbol(id) {
                Some(c) => out.push(c),
                None if id == UNK => out.push('\u{FFFD}'),
                None => {}
            }
        }
        Ok(out)
    }
}
