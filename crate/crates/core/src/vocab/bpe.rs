use std::collections::{BTreeSet, HashMap};

use super::{CONTROL_TOKENS, UNK};
use crate::error::{Error, Result};

/// Marks the start of every word; decoding turns it back into a space.
pub const WORD_START: &str = "\u{2581}";

/// Subword vocabulary: control tokens, base characters, then one token per
/// merge in training order.
#[derive(Clone, Debug, PartialEq)]
pub struct BpeVocab {
    tokens: Vec<String>,
    merges: Vec<(String, String)>,
    index: HashMap<String, usize>,
    ranks: HashMap<(String, String), usize>,
}

fn split_words(text: &str) -> impl Iterator<Item = &str> {
    // split on single spaces so that runs of spaces survive a round trip
    text.split(' ')
}

fn word_symbols(word: &str) -> Vec<String> {
    std::iter::once(WORD_START.to_string()).chain(word.chars().map(String::from)).collect()
}

impl BpeVocab {
    pub(crate) fn from_parts(tokens: Vec<String>, merges: Vec<(String, String)>) -> Result<Self> {
        if tokens.len() < CONTROL_TOKENS.len() || tokens[..CONTROL_TOKENS.len()] != CONTROL_TOKENS {
            return Err(Error::Vocab("control tokens must come first".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Vocab(format!("duplicate token {t:?}")));
            }
        }
        let mut ranks = HashMap::with_capacity(merges.len());
        for (r, (a, b)) in merges.iter().enumerate() {
            for part in [a, b] {
                if !index.contains_key(part) {
                    return Err(Error::Vocab(format!("merge {r} uses unknown token {part:?}")));
                }
            }
            if !index.contains_key(&format!("{a}{b}")) {
                return Err(Error::Vocab(format!("merge {r} produces a token missing from the vocabulary")));
            }
            ranks.entry((a.clone(), b.clone())).or_insert(r);
        }
        Ok(BpeVocab { tokens, merges, index, ranks })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    fn merge_word(&self, mut symbols: Vec<String>) -> Vec<String> {
        loop {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| self.ranks.get(&(w[0].clone(), w[1].clone())).map(|&r| (r, i)))
                .min();
            let Some((rank, _)) = best else { return symbols };
            let (a, b) = &self.merges[rank];
            let mut out = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == a && &symbols[i + 1] == b {
                    out.push(format!("{a}{b}"));
                    i += 2;
                } else {
                    out.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = out;
        }
    }

    /// Splits every word into characters behind a word-start marker and
    /// applies the merges in training order. Characters outside the base
    /// alphabet become `<unk>`.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        if text.is_empty() {
            return Vec::new();
        }
        split_words(text)
            .flat_map(|w| self.merge_word(word_symbols(w)))
            .map(|t| self.id(&t).unwrap_or(UNK))
            .collect()
    }

    /// Concatenates token strings, turning word-start markers into spaces
    /// (the first one is dropped). Control tokens render as nothing, except
    /// `<unk>` which renders as U+FFFD.
    pub fn decode(&self, ids: &[usize]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            let tok = self.token(id).ok_or(Error::UnknownTokenId(id))?;
            match id {
                UNK => out.push('\u{FFFD}'),
                _ if id < CONTROL_TOKENS.len() => {}
                _ => out.push_str(&tok.replace(WORD_START, " ")),
            }
        }
        Ok(out.strip_prefix(' ').map(str::to_string).unwrap_or(out))
    }
}

/// Greedy pair-merge training. Each step merges the most frequent adjacent
/// pair (ties go to the lexicographically smallest pair) until the vocabulary
/// holds `target_size` tokens, control tokens included, or no pair occurs at
/// least twice.
pub fn bpe_train<S: AsRef<str>>(corpus: &[S], target_size: usize) -> Result<BpeVocab> {
    if corpus.is_empty() {
        return Err(Error::Vocab("empty corpus".into()));
    }
    let mut word_counts: HashMap<&str, usize> = HashMap::new();
    for line in corpus {
        for w in split_words(line.as_ref()) {
            *word_counts.entry(w).or_default() += 1;
        }
    }
    let mut base: BTreeSet<String> = BTreeSet::new();
    base.insert(WORD_START.to_string());
    for w in word_counts.keys() {
        base.extend(w.chars().map(String::from));
    }
    let mut tokens: Vec<String> = CONTROL_TOKENS.iter().map(|s| s.to_string()).collect();
    tokens.extend(base);
    if target_size < tokens.len() {
        return Err(Error::Vocab(format!(
            "target size {target_size} is smaller than the base alphabet ({} tokens)",
            tokens.len()
        )));
    }
    let mut known: BTreeSet<String> = tokens.iter().cloned().collect();
    // sorted so that training is independent of hash order
    let mut words: Vec<(Vec<String>, usize)> = word_counts.into_iter().map(|(w, c)| (word_symbols(w), c)).collect();
    words.sort();
    let mut merges = Vec::new();
    while tokens.len() < target_size {
        let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
        for (syms, c) in &words {
            for w in syms.windows(2) {
                *pairs.entry((w[0].as_str(), w[1].as_str())).or_default() += c;
            }
        }
        let best = pairs
            .into_iter()
            .filter(|&(_, c)| c >= 2)
            .max_by(|(p, c), (q, d)| c.cmp(d).then_with(|| q.cmp(p)));
        let Some(((a, b), _)) = best else { break };
        let (a, b) = (a.to_string(), b.to_string());
        let merged = format!("{a}{b}");
        for (syms, _) in &mut words {
            let mut i = 0;
            while i + 1 < syms.len() {
                if syms[i] == a && syms[i + 1] == b {
                    syms[i] = merged.clone();
                    syms.remove(i + 1);
                }
                i += 1;
            }
        }
        if known.insert(merged.clone()) {
            tokens.push(merged);
        }
        merges.push((a, b));
    }
    BpeVocab::from_parts(tokens, merges)
}
