use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::stroke::{normalize_sequence, tokenize_sequence, StrokeSequence, TokenMatrix};
use crate::vocab::{Vocab, CONTROL_TOKENS};

/// A stroke sequence prepared for one model: normalized, tokenized with the
/// pad columns dropped, and its transcription encoded.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub tokens: TokenMatrix,
    /// Target ids without framing.
    pub target: Vec<usize>,
    pub reference: String,
    pub subject_id: String,
    /// One label per unmasked input column: `<bos>`, stroke glyphs, `<eos>`.
    pub labels: Vec<String>,
    /// The normalized sequence, kept for augmentation.
    pub sequence: StrokeSequence,
}

pub fn prepare_example(seq: &StrokeSequence, vocab: &Vocab, config: &ModelConfig) -> Result<Example> {
    let sequence = normalize_sequence(seq)?;
    let tokens = tokenize_sequence(&sequence, config.n, config.d_f)?.truncated();
    let target = vocab.encode(&seq.text);
    if target.len() + 1 > config.m {
        return Err(Error::InvalidArgument {
            op: "prepare_example",
            msg: format!("{:?} encodes to {} tokens; m = {} leaves room for {}", seq.text, target.len(), config.m, config.m - 1),
        });
    }
    let mut labels = vec![CONTROL_TOKENS[crate::vocab::BOS].to_string()];
    labels.extend(sequence.stroke_labels().iter().map(char::to_string));
    labels.push(CONTROL_TOKENS[crate::vocab::EOS].to_string());
    Ok(Example {
        tokens,
        target,
        reference: seq.text.clone(),
        subject_id: seq.subject_id.clone(),
        labels,
        sequence,
    })
}

pub fn prepare_examples(seqs: &[StrokeSequence], vocab: &Vocab, config: &ModelConfig) -> Result<Vec<Example>> {
    seqs.par_iter().map(|s| prepare_example(s, vocab, config)).collect()
}
