//! Touches, strokes, glyphs and stroke sequences, and their packing into
//! fixed-width encoder tokens.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sampled contact point on the touch panel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Touch {
    pub x: f64,
    pub y: f64,
    pub t: Option<f64>,
    pub p: Option<f64>,
}

impl Touch {
    pub fn xy(x: f64, y: f64) -> Self {
        Touch { x, y, t: None, p: None }
    }

    fn lerp(&self, other: &Touch, f: f64) -> Touch {
        let mix = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => Some(a + (b - a) * f),
            _ => None,
        };
        Touch {
            x: self.x + (other.x - self.x) * f,
            y: self.y + (other.y - self.y) * f,
            t: mix(self.t, other.t),
            p: mix(self.p, other.p),
        }
    }
}

/// The touches between one pen-down and the following pen-up.
#[derive(Clone, Debug, PartialEq)]
pub struct Stroke {
    points: Vec<Touch>,
}

impl Stroke {
    pub fn new(points: Vec<Touch>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyStroke);
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidArgument { op: "stroke", msg: "non-finite coordinate".into() });
        }
        Ok(Stroke { points })
    }

    pub fn from_xy(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(points.iter().map(|&(x, y)| Touch::xy(x, y)).collect())
    }

    pub fn points(&self) -> &[Touch] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum()
    }

    pub(crate) fn map_points(&self, mut f: impl FnMut(&Touch) -> Touch) -> Stroke {
        Stroke { points: self.points.iter().map(&mut f).collect() }
    }

    /// Resamples to exactly `count` points equally spaced along the polyline.
    /// The first and last touches are kept verbatim.
    pub fn resample(&self, count: usize) -> Stroke {
        assert!(count >= 1, "resample to at least one point");
        let pts = &self.points;
        if count == 1 {
            return Stroke { points: vec![pts[0]] };
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in pts.windows(2) {
            acc += (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
            cumulative.push(acc);
        }
        let total = acc;
        let mut out = Vec::with_capacity(count);
        out.push(pts[0]);
        let mut seg = 0;
        for j in 1..count - 1 {
            let target = total * j as f64 / (count - 1) as f64;
            while seg + 1 < pts.len() - 1 && cumulative[seg + 1] < target {
                seg += 1;
            }
            let span = cumulative[seg + 1] - cumulative[seg];
            let f = if span > 0.0 { ((target - cumulative[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
            out.push(pts[seg].lerp(&pts[seg + 1], f));
        }
        out.push(*pts.last().unwrap());
        Stroke { points: out }
    }
}

/// One or more strokes realizing a single symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct Glyph {
    pub strokes: Vec<Stroke>,
    pub label: char,
}

/// The stroke range of one glyph inside a [`StrokeSequence`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlyphSpan {
    pub symbol: char,
    pub start: usize,
    pub end: usize,
}

/// An ordered stroke stream with its reference transcription.
#[derive(Clone, Debug, PartialEq)]
pub struct StrokeSequence {
    pub strokes: Vec<Stroke>,
    pub text: String,
    pub subject_id: String,
    /// Glyph segmentation, when known (synthetic data always carries it).
    pub glyphs: Vec<GlyphSpan>,
}

impl StrokeSequence {
    pub fn new(strokes: Vec<Stroke>, text: impl Into<String>, subject_id: impl Into<String>) -> Self {
        StrokeSequence { strokes, text: text.into(), subject_id: subject_id.into(), glyphs: Vec::new() }
    }

    pub fn touches(&self) -> impl Iterator<Item = &Touch> {
        self.strokes.iter().flat_map(|s| s.points.iter())
    }

    /// `(min_x, min_y, max_x, max_y)` over all touches.
    pub fn bounding_box(&self) -> Option<(f64, f64, f64, f64)> {
        let mut it = self.touches();
        let first = it.next()?;
        Some(it.fold((first.x, first.y, first.x, first.y), |(a, b, c, d), p| {
            (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y))
        }))
    }

    /// Label of every stroke, taken from the glyph segmentation (`?` if unknown).
    pub fn stroke_labels(&self) -> Vec<char> {
        let mut labels = vec!['?'; self.strokes.len()];
        for g in &self.glyphs {
            for l in labels.iter_mut().take(g.end.min(self.strokes.len())).skip(g.start) {
                *l = g.symbol;
            }
        }
        labels
    }

    pub fn map_touches(&self, mut f: impl FnMut(&Touch) -> Touch) -> StrokeSequence {
        StrokeSequence {
            strokes: self.strokes.iter().map(|s| s.map_points(&mut f)).collect(),
            text: self.text.clone(),
            subject_id: self.subject_id.clone(),
            glyphs: self.glyphs.clone(),
        }
    }
}

/// Maps a sequence so its bounding box has unit height with the top-left
/// corner at the origin. Zero-height input is scaled by width instead; a
/// single point is only translated.
pub fn normalize_sequence(seq: &StrokeSequence) -> Result<StrokeSequence> {
    let (x0, y0, x1, y1) = seq.bounding_box().ok_or(Error::EmptySequence)?;
    let (w, h) = (x1 - x0, y1 - y0);
    let scale = if h > 0.0 {
        1.0 / h
    } else if w > 0.0 {
        1.0 / w
    } else {
        1.0
    };
    Ok(seq.map_touches(|p| Touch { x: (p.x - x0) * scale, y: (p.y - y0) * scale, ..*p }))
}

/// Which touch channels go into a stroke token.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PackFeatures {
    #[default]
    Xy,
    Xyt,
    Xytp,
}

impl PackFeatures {
    pub fn stride(self) -> usize {
        match self {
            PackFeatures::Xy => 2,
            PackFeatures::Xyt => 3,
            PackFeatures::Xytp => 4,
        }
    }
}

/// Packs a stroke into `d_f` interleaved coordinates `[x₁, y₁, x₂, y₂, …]`,
/// zero-padded. Strokes with more than `d_f / 2` points are first resampled
/// by arc length to exactly `d_f / 2` points.
pub fn pack_stroke(stroke: &Stroke, d_f: usize) -> Result<Vec<f64>> {
    if !d_f.is_multiple_of(2) {
        return Err(Error::InvalidArgument { op: "pack_stroke", msg: format!("d_f = {d_f} is odd") });
    }
    pack_stroke_with(stroke, d_f, PackFeatures::Xy)
}

pub fn pack_stroke_with(stroke: &Stroke, d_f: usize, features: PackFeatures) -> Result<Vec<f64>> {
    if stroke.is_empty() {
        return Err(Error::EmptyStroke);
    }
    let stride = features.stride();
    let capacity = d_f / stride;
    if capacity == 0 {
        return Err(Error::InvalidArgument { op: "pack_stroke", msg: format!("d_f = {d_f} holds no point") });
    }
    let resampled;
    let points = if stroke.len() > capacity {
        resampled = stroke.resample(capacity);
        resampled.points()
    } else {
        stroke.points()
    };
    let mut out = vec![0.0; d_f];
    for (i, p) in points.iter().enumerate() {
        let cell = &mut out[i * stride..(i + 1) * stride];
        cell[0] = p.x;
        cell[1] = p.y;
        if stride > 2 {
            cell[2] = p.t.unwrap_or(0.0);
        }
        if stride > 3 {
            cell[3] = p.p.unwrap_or(0.0);
        }
    }
    Ok(out)
}

/// Non-stroke encoder input tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecialInputToken {
    Bos,
    Eos,
    Pad,
}

impl SpecialInputToken {
    pub const BOS_VALUE: f64 = -1.0;
    pub const EOS_VALUE: f64 = 2.0;

    pub fn vector(self, d_f: usize) -> Vec<f64> {
        let v = match self {
            SpecialInputToken::Bos => Self::BOS_VALUE,
            SpecialInputToken::Eos => Self::EOS_VALUE,
            SpecialInputToken::Pad => 0.0,
        };
        vec![v; d_f]
    }
}

/// Encoder input: `n` tokens of width `d_f` plus the validity mask.
///
/// Stored token-major, so column `j` of the `d_f × n` matrix is the
/// contiguous slice `data[j·d_f .. (j+1)·d_f]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenMatrix {
    d_f: usize,
    n: usize,
    data: Vec<f64>,
    mask: Vec<bool>,
}

impl TokenMatrix {
    pub fn d_f(&self) -> usize {
        self.d_f
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Token-major data (`n` rows of `d_f`).
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.d_f..(j + 1) * self.d_f]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.d_f..(j + 1) * self.d_f]
    }

    /// Number of unmasked tokens (⟨bos⟩, strokes, ⟨eos⟩).
    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Drops the trailing pad columns.
    pub fn truncated(&self) -> TokenMatrix {
        let n = self.valid_len();
        TokenMatrix { d_f: self.d_f, n, data: self.data[..n * self.d_f].to_vec(), mask: vec![true; n] }
    }
}

/// Frames packed strokes as `⟨bos⟩ s₁ … s_k ⟨eos⟩ ⟨pad⟩…` over `n` columns.
pub fn tokenize_sequence(seq: &StrokeSequence, n: usize, d_f: usize) -> Result<TokenMatrix> {
    tokenize_sequence_with(seq, n, d_f, PackFeatures::Xy)
}

pub fn tokenize_sequence_with(
    seq: &StrokeSequence,
    n: usize,
    d_f: usize,
    features: PackFeatures,
) -> Result<TokenMatrix> {
    let s = seq.strokes.len();
    if s + 2 > n {
        return Err(Error::SequenceExceedsN { strokes: s, n });
    }
    let mut data = Vec::with_capacity(n * d_f);
    data.extend(SpecialInputToken::Bos.vector(d_f));
    for stroke in &seq.strokes {
        data.extend(pack_stroke_with(stroke, d_f, features)?);
    }
    data.extend(SpecialInputToken::Eos.vector(d_f));
    for _ in s + 2..n {
        data.extend(SpecialInputToken::Pad.vector(d_f));
    }
    let mask = (0..n).map(|j| j < s + 2).collect();
    Ok(TokenMatrix { d_f, n, data, mask })
}

/// Bounds of a random affine map; each range is sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    /// Radians.
    pub rotation: (f64, f64),
    pub scale: (f64, f64),
    pub shear: (f64, f64),
    pub translate_x: (f64, f64),
    pub translate_y: (f64, f64),
}

impl AffineParams {
    pub fn identity() -> Self {
        AffineParams {
            rotation: (0.0, 0.0),
            scale: (1.0, 1.0),
            shear: (0.0, 0.0),
            translate_x: (0.0, 0.0),
            translate_y: (0.0, 0.0),
        }
    }

    /// Mild augmentation used for training on synthetic handwriting.
    pub fn mild() -> Self {
        AffineParams {
            rotation: (-0.05, 0.05),
            scale: (0.95, 1.05),
            shear: (-0.1, 0.1),
            translate_x: (0.0, 0.0),
            translate_y: (0.0, 0.0),
        }
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Applies one random affine map (drawn within `params`) to every touch,
/// pivoting about the bounding-box centre.
pub fn affine_augment<R: Rng + ?Sized>(
    seq: &StrokeSequence,
    params: &AffineParams,
    rng: &mut R,
) -> Result<StrokeSequence> {
    let (lo, hi) = params.scale;
    if lo <= 0.0 && hi >= 0.0 || hi < lo {
        return Err(Error::DegenerateScale);
    }
    let rotation = draw(rng, params.rotation);
    let scale = draw(rng, params.scale);
    let shear = draw(rng, params.shear);
    let tx = draw(rng, params.translate_x);
    let ty = draw(rng, params.translate_y);
    let Some((x0, y0, x1, y1)) = seq.bounding_box() else {
        return Ok(seq.clone());
    };
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let (sin, cos) = rotation.sin_cos();
    Ok(seq.map_touches(|p| {
        let (dx, dy) = (p.x - cx, p.y - cy);
        let (sx, sy) = ((dx + shear * dy) * scale, dy * scale);
        Touch { x: cx + cos * sx - sin * sy + tx, y: cy + sin * sx + cos * sy + ty, ..*p }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(strokes: Vec<Vec<(f64, f64)>>) -> StrokeSequence {
        StrokeSequence::new(strokes.iter().map(|s| Stroke::from_xy(s).unwrap()).collect(), "x", "s0")
    }

    #[test]
    fn normalize_maps_height_to_unit() {
        let s = seq(vec![vec![(10.0, 100.0), (50.0, 300.0)], vec![(210.0, 200.0)]]);
        let n = normalize_sequence(&s).unwrap();
        let (x0, y0, x1, y1) = n.bounding_box().unwrap();
        assert_eq!((x0, y0, y1), (0.0, 0.0, 1.0));
        assert!((x1 - 200.0 / 200.0).abs() < 1e-12);
        assert_eq!(n.strokes[0].points()[1].x, 40.0 / 200.0);
    }

    #[test]
    fn normalize_is_idempotent_on_normalized_input() {
        let s = seq(vec![vec![(0.0, 0.0), (0.5, 1.0)], vec![(1.5, 0.25)]]);
        assert_eq!(normalize_sequence(&s).unwrap(), s);
    }

    #[test]
    fn normalize_flat_line_uses_width() {
        let s = seq(vec![vec![(5.0, 7.0), (55.0, 7.0)]]);
        let n = normalize_sequence(&s).unwrap();
        assert_eq!(n.strokes[0].points()[0], Touch::xy(0.0, 0.0));
        assert_eq!(n.strokes[0].points()[1], Touch::xy(1.0, 0.0));
    }

    #[test]
    fn normalize_single_point_translates() {
        let s = seq(vec![vec![(3.0, 4.0)]]);
        assert_eq!(normalize_sequence(&s).unwrap().strokes[0].points()[0], Touch::xy(0.0, 0.0));
        assert!(matches!(normalize_sequence(&seq(vec![])), Err(Error::EmptySequence)));
    }

    #[test]
    fn pack_interleaves_and_pads() {
        let s = Stroke::from_xy(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        let v = pack_stroke(&s, 128).unwrap();
        assert_eq!(v.len(), 128);
        assert_eq!(&v[..6], &[0.0, 0.0, 1.0, 1.0, 2.0, 0.0]);
        assert!(v[6..].iter().all(|&x| x == 0.0));
        assert_eq!(v[6..].len(), 122);
    }

    #[test]
    fn pack_full_stroke_fills_every_entry() {
        let pts: Vec<_> = (0..64).map(|i| (i as f64 + 1.0, 2.0 * i as f64 + 1.0)).collect();
        let v = pack_stroke(&Stroke::from_xy(&pts).unwrap(), 128).unwrap();
        assert!(v.iter().all(|&x| x != 0.0));
    }

    /// Independent resampler: walk a dense linear interpolation of the
    /// polyline and pick the samples nearest to each target arc length.
    fn oracle_resample(pts: &[(f64, f64)], count: usize) -> Vec<(f64, f64)> {
        let fine = 20_000;
        let seg_len: Vec<f64> = pts.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).collect();
        let total: f64 = seg_len.iter().sum();
        (0..count)
            .map(|j| {
                let target = total * j as f64 / (count - 1) as f64;
                let mut best = pts[0];
                let mut best_err = f64::INFINITY;
                let mut walked = 0.0;
                for (k, w) in pts.windows(2).enumerate() {
                    for s in 0..=fine / pts.len() {
                        let f = s as f64 / (fine / pts.len()) as f64;
                        let d = walked + f * seg_len[k];
                        if (d - target).abs() < best_err {
                            best_err = (d - target).abs();
                            best = (w[0].0 + (w[1].0 - w[0].0) * f, w[0].1 + (w[1].1 - w[0].1) * f);
                        }
                    }
                    walked += seg_len[k];
                }
                best
            })
            .collect()
    }

    #[test]
    fn long_strokes_are_resampled_by_arc_length() {
        let pts: Vec<(f64, f64)> =
            (0..70).map(|i| { let t = i as f64 / 69.0; (t * 3.0, (t * 5.0).sin() + t * t) }).collect();
        let stroke = Stroke::from_xy(&pts).unwrap();
        let v = pack_stroke(&stroke, 128).unwrap();
        assert_eq!((v[0], v[1]), pts[0]);
        assert_eq!((v[126], v[127]), pts[69]);
        let expected = oracle_resample(&pts, 64);
        for (j, e) in expected.iter().enumerate() {
            assert!((v[2 * j] - e.0).abs() < 2e-3 && (v[2 * j + 1] - e.1).abs() < 2e-3, "point {j}");
        }
    }

    #[test]
    fn pack_rejects_odd_width_and_empty_stroke() {
        let s = Stroke::from_xy(&[(0.0, 0.0)]).unwrap();
        assert!(pack_stroke(&s, 7).is_err());
        assert!(matches!(Stroke::new(vec![]), Err(Error::EmptyStroke)));
    }

    #[test]
    fn tokenize_frames_with_bos_eos_pad() {
        let s = seq(vec![vec![(0.0, 0.0), (1.0, 1.0)], vec![(0.5, 0.5)]]);
        let t = tokenize_sequence(&s, 48, 128).unwrap();
        assert_eq!(t.valid_len(), 4);
        assert_eq!(t.column(0), SpecialInputToken::Bos.vector(128).as_slice());
        assert_eq!(t.column(3), SpecialInputToken::Eos.vector(128).as_slice());
        assert!((4..48).all(|j| !t.mask()[j] && t.column(j).iter().all(|&v| v == 0.0)));

        let empty = tokenize_sequence(&seq(vec![]), 10, 4).unwrap();
        assert_eq!(&empty.mask()[..3], &[true, true, false]);
        assert_eq!(empty.column(1), &[2.0; 4]);
    }

    #[test]
    fn tokenize_fills_exactly_n() {
        let strokes = (0..198).map(|i| vec![(i as f64, 0.0)]).collect();
        let t = tokenize_sequence(&seq(strokes), 200, 128).unwrap();
        assert!(t.mask().iter().all(|&m| m));
        let strokes = (0..199).map(|i| vec![(i as f64, 0.0)]).collect();
        let err = tokenize_sequence(&seq(strokes), 200, 128).unwrap_err();
        assert!(err.to_string().contains("sequence exceeds n"));
    }

    #[test]
    fn affine_identity_and_half_turn() {
        let s = seq(vec![vec![(0.0, 0.0), (2.0, 1.0)], vec![(1.0, 3.0)]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(affine_augment(&s, &AffineParams::identity(), &mut rng).unwrap(), s);

        let half = AffineParams { rotation: (std::f64::consts::PI, std::f64::consts::PI), ..AffineParams::identity() };
        let r = affine_augment(&s, &half, &mut rng).unwrap();
        let (cx, cy) = (1.0, 1.5);
        for (a, b) in s.touches().zip(r.touches()) {
            assert!((b.x - (2.0 * cx - a.x)).abs() < 1e-12 && (b.y - (2.0 * cy - a.y)).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_is_seeded_and_rejects_zero_scale() {
        let s = seq(vec![vec![(0.0, 0.0), (2.0, 1.0)]]);
        let p = AffineParams::mild();
        let a = affine_augment(&s, &p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = affine_augment(&s, &p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let bad = AffineParams { scale: (0.0, 1.0), ..p };
        assert!(matches!(affine_augment(&s, &bad, &mut ChaCha8Rng::seed_from_u64(9)), Err(Error::DegenerateScale)));
    }

    fn arb_stroke() -> impl Strategy<Value = Stroke> {
        prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 1..100)
            .prop_map(|pts| Stroke::from_xy(&pts).unwrap())
    }

    proptest! {
        #[test]
        fn packed_width_and_zero_tail(stroke in arb_stroke(), half in 1usize..80) {
            let d_f = 2 * half;
            let v = pack_stroke(&stroke, d_f).unwrap();
            prop_assert_eq!(v.len(), d_f);
            let used = 2 * stroke.len().min(half);
            prop_assert!(v[used..].iter().all(|&x| x == 0.0));
        }

        #[test]
        fn mask_counts_strokes_plus_two(strokes in prop::collection::vec(arb_stroke(), 0..20)) {
            let s = StrokeSequence::new(strokes, "x", "s");
            let t = tokenize_sequence(&s, 24, 16).unwrap();
            prop_assert_eq!(t.valid_len(), s.strokes.len() + 2);
        }

        #[test]
        fn normalization_is_idempotent(strokes in prop::collection::vec(arb_stroke(), 1..6)) {
            let s = StrokeSequence::new(strokes, "x", "s");
            let once = normalize_sequence(&s).unwrap();
            let twice = normalize_sequence(&once).unwrap();
            for (a, b) in once.touches().zip(twice.touches()) {
                prop_assert!((a.x - b.x).abs() <= 1e-12 && (a.y - b.y).abs() <= 1e-12);
            }
        }
    }
}
