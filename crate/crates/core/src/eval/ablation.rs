use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate_glyph, GlyphBank, StyleBounds, SubjectProfile};
use crate::error::{Error, Result};
use crate::seed;
use crate::stroke::{GlyphSpan, Stroke, StrokeSequence, Touch};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AblationMode {
    /// Remove the final `k` strokes.
    DropLastK { k: usize },
    /// Remove every stroke of the final `count` glyphs (needs glyph spans).
    DropLastGlyphs { count: usize },
    /// Remove each stroke independently with probability `rate`.
    DropRandom { rate: f64 },
    /// Redraw the `nth` occurrence of `from` as the glyph for `to`.
    SpellingSubstitution {
        from: char,
        to: char,
        #[serde(default)]
        nth: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    #[serde(flatten)]
    pub mode: AblationMode,
    #[serde(default)]
    pub seed: u64,
}

fn keep_strokes(seq: &StrokeSequence, keep: &[bool]) -> Result<StrokeSequence> {
    if !keep.iter().any(|&k| k) {
        return Err(Error::Ablation("ablation would drop every stroke".into()));
    }
    // new index of each old stroke boundary
    let mut remap = Vec::with_capacity(keep.len() + 1);
    let mut count = 0;
    for &k in keep {
        remap.push(count);
        count += usize::from(k);
    }
    remap.push(count);
    let strokes = seq.strokes.iter().zip(keep).filter(|(_, &k)| k).map(|(s, _)| s.clone()).collect();
    let glyphs = seq
        .glyphs
        .iter()
        .map(|g| GlyphSpan { symbol: g.symbol, start: remap[g.start], end: remap[g.end] })
        .filter(|g| g.end > g.start)
        .collect();
    Ok(StrokeSequence { strokes, text: seq.text.clone(), subject_id: seq.subject_id.clone(), glyphs })
}

fn substitute(seq: &StrokeSequence, from: char, to: char, nth: usize, seed_value: u64, bank: &GlyphBank) -> Result<StrokeSequence> {
    let (gi, span) = seq
        .glyphs
        .iter()
        .enumerate()
        .filter(|(_, g)| g.symbol == from)
        .nth(nth)
        .ok_or_else(|| Error::Ablation(format!("no occurrence {nth} of {from:?} among the glyphs")))?;
    let old = &seq.strokes[span.start..span.end];
    let min_x = |strokes: &[Stroke]| {
        strokes.iter().flat_map(|s| s.points().iter().map(|p| p.x)).fold(f64::INFINITY, f64::min)
    };
    let subject = SubjectProfile::sample(&seq.subject_id, seed_value, &StyleBounds::default());
    let glyph = generate_glyph(bank, to, &subject, seed::derive(&[seed_value, gi as u64]))?;
    let dx = min_x(old) - min_x(&glyph.strokes);
    let replacement: Vec<Stroke> = glyph
        .strokes
        .iter()
        .map(|s| s.map_points(|p| Touch { x: p.x + dx, ..*p }))
        .collect();
    let delta = replacement.len() as isize - (span.end - span.start) as isize;
    let mut strokes = seq.strokes[..span.start].to_vec();
    strokes.extend(replacement);
    strokes.extend_from_slice(&seq.strokes[span.end..]);
    let shift = |i: usize| (i as isize + delta) as usize;
    let glyphs = seq
        .glyphs
        .iter()
        .enumerate()
        .map(|(j, g)| match j.cmp(&gi) {
            std::cmp::Ordering::Less => *g,
            std::cmp::Ordering::Equal => GlyphSpan { symbol: to, start: g.start, end: shift(g.end) },
            std::cmp::Ordering::Greater => GlyphSpan { symbol: g.symbol, start: shift(g.start), end: shift(g.end) },
        })
        .collect();
    Ok(StrokeSequence { strokes, text: seq.text.clone(), subject_id: seq.subject_id.clone(), glyphs })
}

/// Perturbs the strokes of `seq`; the reference transcription is kept
/// verbatim so that evaluation measures whether the model restores it.
pub fn ablate(seq: &StrokeSequence, spec: &AblationSpec, bank: &GlyphBank) -> Result<StrokeSequence> {
    let n = seq.strokes.len();
    match spec.mode {
        AblationMode::DropLastK { k } => {
            let keep: Vec<bool> = (0..n).map(|i| i + k < n).collect();
            keep_strokes(seq, &keep)
        }
        AblationMode::DropLastGlyphs { count } => {
            if seq.glyphs.len() < count {
                return Err(Error::Ablation(format!("{} glyph spans, asked to drop {count}", seq.glyphs.len())));
            }
            let cut = seq.glyphs.get(seq.glyphs.len() - count).map_or(n, |g| g.start);
            let keep: Vec<bool> = (0..n).map(|i| i < cut).collect();
            keep_strokes(seq, &keep)
        }
        AblationMode::DropRandom { rate } => {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Ablation(format!("drop rate {rate} outside [0, 1]")));
            }
            let mut rng = seed::rng(&[spec.seed, seed::hash_str(&seq.subject_id), seed::hash_str(&seq.text)]);
            let keep: Vec<bool> = (0..n).map(|_| !rng.random_bool(rate)).collect();
            keep_strokes(seq, &keep)
        }
        AblationMode::SpellingSubstitution { from, to, nth } => substitute(seq, from, to, nth, spec.seed, bank),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::compose_sentence;

    fn attention() -> StrokeSequence {
        let bank = GlyphBank::builtin();
        compose_sentence("attention.", &bank, &SubjectProfile::for_id("s1"), 0, 100, false).unwrap()
    }

    fn spec(mode: AblationMode) -> AblationSpec {
        AblationSpec { mode, seed: 4 }
    }

    #[test]
    fn drop_last_k_keeps_the_prefix() {
        let seq = attention();
        let n = seq.strokes.len();
        let out = ablate(&seq, &spec(AblationMode::DropLastK { k: 2 }), &GlyphBank::builtin()).unwrap();
        assert_eq!(out.strokes.len(), n - 2);
        assert_eq!(out.strokes[..], seq.strokes[..n - 2]);
        assert_eq!(out.text, seq.text);
        assert!(ablate(&seq, &spec(AblationMode::DropLastK { k: n }), &GlyphBank::builtin()).is_err());
    }

    #[test]
    fn drop_last_glyphs_follows_spans() {
        let seq = attention();
        let out = ablate(&seq, &spec(AblationMode::DropLastGlyphs { count: 2 }), &GlyphBank::builtin()).unwrap();
        let symbols: String = out.glyphs.iter().map(|g| g.symbol).collect();
        assert_eq!(symbols, "attentio");
        assert_eq!(out.strokes.len(), out.glyphs.last().unwrap().end);
    }

    #[test]
    fn random_drop_is_seeded() {
        let seq = attention();
        let s = spec(AblationMode::DropRandom { rate: 0.3 });
        let a = ablate(&seq, &s, &GlyphBank::builtin()).unwrap();
        assert_eq!(a, ablate(&seq, &s, &GlyphBank::builtin()).unwrap());
        assert_eq!(a.text, seq.text);
    }

    #[test]
    fn substitution_rewrites_one_glyph() {
        let seq = attention();
        let s = spec(AblationMode::SpellingSubstitution { from: 'a', to: 'e', nth: 0 });
        let out = ablate(&seq, &s, &GlyphBank::builtin()).unwrap();
        let symbols: String = out.glyphs.iter().map(|g| g.symbol).collect();
        assert_eq!(symbols, "ettention.");
        assert_eq!(out.text, "attention.");
        assert_eq!(out.strokes.len(), out.glyphs.last().unwrap().end);
        let missing = AblationMode::SpellingSubstitution { from: 'z', to: 'e', nth: 0 };
        assert!(ablate(&seq, &spec(missing), &GlyphBank::builtin()).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let s: AblationSpec = serde_json::from_str(r#"{"mode":"drop_last_k","k":2,"seed":1}"#).unwrap();
        assert_eq!(s.mode, AblationMode::DropLastK { k: 2 });
    }
}
