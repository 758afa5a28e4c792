//! Metrics, robustness harness and attention export.

mod ablation;
mod attention;
mod metrics;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ablation::{ablate, AblationMode, AblationSpec};
pub use attention::{export_attention, monotone_tracking, pixel, read_pgm, write_pgm, AttentionExport, LayerExport};
pub use metrics::{cer, edit_distance, example_la, la, levenshtein, wer, word_distance};

use crate::error::Result;
use crate::model::{greedy_decode, sequence_loss, Bound, Ctx, Decoded, Model};
use crate::tensor::{Scalar, Tape};
use crate::training::Example;
use crate::vocab::Vocab;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub subject_id: String,
    pub reference: String,
    pub hypothesis: String,
    pub distance: usize,
    pub la: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub xel: f64,
    pub la: f64,
    pub cer: f64,
    pub wer: f64,
    pub count: usize,
    pub examples: Vec<ExampleResult>,
}

/// Teacher-forced cross-entropy of one example and its target count.
pub fn example_xel<T: Scalar>(model: &Model<T>, example: &Example) -> Result<(f64, usize)> {
    let tape = Tape::inference();
    let b = Bound::new(&tape, &model.params, false);
    let loss = sequence_loss(model, &b, &example.tokens, &example.target, &mut Ctx::inference())?;
    Ok((loss.scalar().to_f64_lossy(), example.target.len() + 1))
}

/// Greedy transcription of one example.
pub fn transcribe<T: Scalar>(model: &Model<T>, vocab: &Vocab, example: &Example) -> Result<(String, Decoded)> {
    let decoded = greedy_decode(model, &example.tokens)?;
    Ok((vocab.decode(decoded.content())?, decoded))
}

/// Token-weighted mean XEL over `examples`.
pub fn mean_xel<T: Scalar>(model: &Model<T>, examples: &[Example]) -> Result<f64> {
    let parts = examples.par_iter().map(|e| example_xel(model, e)).collect::<Result<Vec<_>>>()?;
    let total: usize = parts.iter().map(|p| p.1).sum();
    let sum = metrics::ordered_sum(parts.iter().map(|&(l, c)| l * c as f64).collect());
    Ok(if total == 0 { 0.0 } else { sum / total as f64 })
}

/// Greedy-decodes every example and scores it against its reference.
/// Aggregates do not depend on example order.
pub fn evaluate<T: Scalar>(model: &Model<T>, vocab: &Vocab, examples: &[Example]) -> Result<EvalReport> {
    let xel = mean_xel(model, examples)?;
    let results = examples
        .par_iter()
        .map(|e| {
            let (hyp, _) = transcribe(model, vocab, e)?;
            Ok(ExampleResult {
                subject_id: e.subject_id.clone(),
                distance: levenshtein(&e.reference, &hyp),
                la: example_la(&e.reference, &hyp),
                reference: e.reference.clone(),
                hypothesis: hyp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&str> = results.iter().map(|r| r.reference.as_str()).collect();
    let hyps: Vec<&str> = results.iter().map(|r| r.hypothesis.as_str()).collect();
    Ok(EvalReport {
        xel,
        la: la(&refs, &hyps)?,
        cer: cer(&refs, &hyps)?,
        wer: wer(&refs, &hyps)?,
        count: results.len(),
        examples: results,
    })
}
