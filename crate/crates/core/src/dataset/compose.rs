use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::glyphs::GlyphBank;
use crate::error::{Error, Result};
use crate::seed;
use crate::stroke::{Glyph, GlyphSpan, Stroke, StrokeSequence, Touch};

/// Ranges from which per-subject handwriting styles are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleBounds {
    /// Slant is drawn from `[-max_slant, max_slant]` radians.
    pub max_slant: f64,
    /// Subject size factor is drawn from `1 ± size_jitter`.
    pub size_jitter: f64,
    /// Standard deviation of the Gaussian noise added to every touch.
    pub noise: f64,
}

impl Default for StyleBounds {
    fn default() -> Self {
        StyleBounds { max_slant: 0.3, size_jitter: 0.15, noise: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub seed: u64,
    pub slant: f64,
    pub size: f64,
    pub noise: f64,
}

impl SubjectProfile {
    pub fn sample(subject_id: &str, global_seed: u64, bounds: &StyleBounds) -> Self {
        let seed = seed::derive(&[global_seed, seed::hash_str(subject_id)]);
        let mut rng = seed::rng(&[seed, 0x57_11e]);
        let slant = if bounds.max_slant > 0.0 { rng.random_range(-bounds.max_slant..=bounds.max_slant) } else { 0.0 };
        let size = if bounds.size_jitter > 0.0 {
            rng.random_range(1.0 - bounds.size_jitter..=1.0 + bounds.size_jitter)
        } else {
            1.0
        };
        SubjectProfile { subject_id: subject_id.to_string(), seed, slant, size, noise: bounds.noise }
    }

    /// Profile used when only the identifier is known (default bounds, seed 0).
    pub fn for_id(subject_id: &str) -> Self {
        Self::sample(subject_id, 0, &StyleBounds::default())
    }
}

fn gaussian(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma.max(0.0)).expect("finite sigma")
}

/// Renders one occurrence of `symbol` in the subject's style. Output is a
/// pure function of `(symbol, subject, occurrence)`.
pub fn generate_glyph(bank: &GlyphBank, symbol: char, subject: &SubjectProfile, occurrence: u64) -> Result<Glyph> {
    let templates = bank.templates(symbol).ok_or(Error::NoGlyph(symbol))?;
    let mut rng = seed::rng(&[subject.seed, symbol as u64, occurrence]);
    let template = &templates[rng.random_range(0..templates.len())];
    let scale = subject.size * rng.random_range(0.95..=1.05);
    let slant = (subject.slant + gaussian(0.03).sample(&mut rng)).tan();
    let noise = gaussian(subject.noise);
    let strokes = template
        .strokes
        .iter()
        .map(|line| {
            let pts = line
                .iter()
                .map(|&(x, y)| {
                    let x = x + slant * (1.0 - y);
                    Touch::xy(
                        x * scale + noise.sample(&mut rng),
                        (y - 1.0) * scale + 1.0 + noise.sample(&mut rng),
                    )
                })
                .collect();
            Stroke::new(pts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Glyph { strokes, label: symbol })
}

/// Lays glyphs out left to right. Spaces move the cursor without emitting
/// strokes. `variant` distinguishes different renderings of the same text by
/// the same subject.
pub fn compose_sentence(
    text: &str,
    bank: &GlyphBank,
    subject: &SubjectProfile,
    variant: u64,
    max_strokes: usize,
    timestamps: bool,
) -> Result<StrokeSequence> {
    let mut strokes = Vec::new();
    let mut glyphs = Vec::new();
    let mut cursor = 0.0;
    let mut clock = 0.0;
    let jitter = gaussian(subject.noise);
    for (pos, symbol) in text.chars().enumerate() {
        if symbol == ' ' {
            cursor += bank.space_advance * subject.size;
            continue;
        }
        let occurrence = seed::derive(&[variant, pos as u64]);
        let glyph = generate_glyph(bank, symbol, subject, occurrence)?;
        let mut rng = seed::rng(&[subject.seed, occurrence, 0xba5e]);
        let dy = jitter.sample(&mut rng);
        let start = strokes.len();
        for s in &glyph.strokes {
            strokes.push(s.map_points(|p| {
                let t = if timestamps {
                    clock += 0.01;
                    Some(clock)
                } else {
                    None
                };
                Touch { x: p.x + cursor, y: p.y + dy, t, p: None }
            }));
            clock += 0.1;
        }
        glyphs.push(GlyphSpan { symbol, start, end: strokes.len() });
        cursor += bank.advance_width(symbol).ok_or(Error::NoGlyph(symbol))? * subject.size;
    }
    if strokes.len() > max_strokes {
        return Err(Error::SentenceTooLong { strokes: strokes.len(), max: max_strokes });
    }
    Ok(StrokeSequence { strokes, text: text.to_string(), subject_id: subject.subject_id.clone(), glyphs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subject() -> SubjectProfile {
        SubjectProfile::sample("s007", 42, &StyleBounds::default())
    }

    #[test]
    fn glyph_generation_is_deterministic() {
        let bank = GlyphBank::builtin();
        let a = generate_glyph(&bank, 'a', &subject(), 0).unwrap();
        assert_eq!(a, generate_glyph(&bank, 'a', &subject(), 0).unwrap());
        let b = generate_glyph(&bank, 'a', &subject(), 1).unwrap();
        let differs = a.strokes[0].points().iter().zip(b.strokes[0].points()).any(|(p, q)| p != q);
        assert!(differs);
    }

    #[test]
    fn i_has_body_and_dot() {
        let bank = GlyphBank::builtin();
        for id in ["s1", "s2", "s3"] {
            let g = generate_glyph(&bank, 'i', &SubjectProfile::for_id(id), 5).unwrap();
            assert_eq!(g.strokes.len(), 2);
        }
    }

    #[test]
    fn unknown_symbol_is_an_error() {
        let bank = GlyphBank::builtin();
        let err = generate_glyph(&bank, '€', &subject(), 0).unwrap_err();
        assert!(err.to_string().contains("no glyph for symbol"));
    }

    #[test]
    fn spaces_emit_no_strokes() {
        let bank = GlyphBank::builtin();
        let per_a = bank.templates('a').unwrap()[0].strokes.len();
        let s = compose_sentence("a a", &bank, &subject(), 0, 100, false).unwrap();
        assert_eq!(s.strokes.len(), 2 * per_a);
        assert_eq!(s.glyphs.len(), 2);
        assert_eq!(s.text, "a a");
    }

    #[test]
    fn one_cluster_per_visible_character() {
        let bank = GlyphBank::builtin();
        let s = compose_sentence("It's attention", &bank, &subject(), 3, 200, false).unwrap();
        let symbols: String = s.glyphs.iter().map(|g| g.symbol).collect();
        assert_eq!(symbols, "It'sattention");
        assert_eq!(s.glyphs.len(), 13);
        // the elided input: everything but the final 'n'
        assert_eq!(&symbols[..12], "It'sattentio");
    }

    #[test]
    fn glyphs_progress_left_to_right() {
        let bank = GlyphBank::builtin();
        let bounds = StyleBounds::default();
        // slant lean at full height plus a generous noise margin
        let overlap = bounds.max_slant.tan() * 1.3 * (1.0 + bounds.size_jitter) + 8.0 * bounds.noise;
        for id in ["a", "b", "c", "d"] {
            let subj = SubjectProfile::sample(id, 1, &bounds);
            let s = compose_sentence("the old stone tower is here", &bank, &subj, 0, 200, false).unwrap();
            let extent = |g: &GlyphSpan| {
                let xs = s.strokes[g.start..g.end].iter().flat_map(|st| st.points().iter().map(|p| p.x));
                xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
            };
            for w in s.glyphs.windows(2) {
                let (a, b) = (extent(&w[0]), extent(&w[1]));
                assert!(b.0 >= a.1 - overlap, "{:?} then {:?}", w[0], w[1]);
                assert!(b.0 > a.0);
            }
        }
    }

    #[test]
    fn stroke_budget_is_enforced() {
        let bank = GlyphBank::builtin();
        let err = compose_sentence("attention", &bank, &subject(), 0, 5, false).unwrap_err();
        assert!(err.to_string().contains("sentence too long"));
    }

    #[test]
    fn timestamps_are_non_decreasing() {
        let bank = GlyphBank::builtin();
        let s = compose_sentence("it is", &bank, &subject(), 0, 50, true).unwrap();
        let ts: Vec<f64> = s.touches().map(|p| p.t.unwrap()).collect();
        assert!(ts.windows(2).all(|w| w[1] >= w[0]));
    }
}
