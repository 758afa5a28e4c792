//! Synthetic handwriting data: glyph bank, subject styles, sentence
//! composition, subject-level splits and JSONL persistence.

mod compose;
pub mod corpus;
mod glyphs;
mod jsonl;
mod split;
mod text;

use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use compose::{compose_sentence, generate_glyph, StyleBounds, SubjectProfile};
pub use corpus::{CorpusSpec, DeskLanguage, DESK_ALPHABET};
pub use glyphs::{GlyphBank, GlyphTemplate, Polyline};
pub use jsonl::{load_jsonl, save_jsonl, to_line};
pub use split::{split_subjects, SplitConfig, SubjectSplit};
pub use text::{has_glyph, preprocess_text, Language};

use crate::error::{Error, Result};
use crate::seed;
use crate::stroke::StrokeSequence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub subjects: usize,
    pub sentences_per_subject: usize,
    pub max_strokes: usize,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub style: StyleBounds,
    pub seed: u64,
    #[serde(default)]
    pub timestamps: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<StrokeSequence>,
    pub val: Vec<StrokeSequence>,
    pub test: Vec<StrokeSequence>,
}

impl Dataset {
    pub fn split(&self, name: &str) -> Option<&[StrokeSequence]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

pub fn subject_id(index: usize) -> String {
    format!("s{index:03}")
}

fn subject_examples(
    sentences: &[String],
    bank: &GlyphBank,
    config: &GenConfig,
    subject: &SubjectProfile,
    index: usize,
) -> Result<Vec<StrokeSequence>> {
    (0..config.sentences_per_subject)
        .map(|j| {
            let mut rng = seed::rng(&[config.seed, index as u64, j as u64, 0x5e17]);
            let variant = seed::derive(&[config.seed, index as u64, j as u64]);
            let mut last_err = None;
            for _ in 0..32 {
                let text = &sentences[rng.random_range(0..sentences.len())];
                match compose_sentence(text, bank, subject, variant, config.max_strokes, config.timestamps) {
                    Ok(seq) => return Ok(seq),
                    Err(e @ Error::SentenceTooLong { .. }) => last_err = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(last_err.expect("at least one attempt"))
        })
        .collect()
}

/// Renders `sentences_per_subject` corpus sentences for each synthetic
/// subject and splits the result by subject. Output is independent of the
/// number of worker threads.
pub fn generate_dataset(sentences: &[String], bank: &GlyphBank, config: &GenConfig) -> Result<Dataset> {
    if sentences.is_empty() {
        return Err(Error::Config("empty corpus".into()));
    }
    let ids: Vec<String> = (0..config.subjects).map(subject_id).collect();
    let split = split_subjects(&ids, &config.split, config.seed)?;
    let per_subject: Vec<Vec<StrokeSequence>> = ids
        .par_iter()
        .enumerate()
        .map(|(i, id)| {
            let profile = SubjectProfile::sample(id, config.seed, &config.style);
            subject_examples(sentences, bank, config, &profile, i)
        })
        .collect::<Result<_>>()?;
    let gather = |members: &[String]| -> Vec<StrokeSequence> {
        let mut idx: Vec<usize> = members.iter().map(|m| ids.iter().position(|x| x == m).unwrap()).collect();
        idx.sort_unstable();
        idx.into_iter().flat_map(|i| per_subject[i].iter().cloned()).collect()
    };
    Ok(Dataset { train: gather(&split.train), val: gather(&split.val), test: gather(&split.test) })
}
