//! Built-in single/multi-stroke letterforms.
//!
//! Coordinates are y-down in a unit em: cap height at `y = 0`, x-height at
//! `y = 0.4`, baseline at `y = 1`, descenders down to `y = 1.3`.

use std::collections::BTreeMap;

pub type Polyline = Vec<(f64, f64)>;

/// One way of writing a symbol: an ordered list of polylines.
#[derive(Clone, Debug, PartialEq)]
pub struct GlyphTemplate {
    pub strokes: Vec<Polyline>,
}

impl GlyphTemplate {
    pub fn width(&self) -> f64 {
        self.strokes.iter().flatten().map(|p| p.0).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct GlyphBank {
    entries: BTreeMap<char, Vec<GlyphTemplate>>,
    advance: BTreeMap<char, f64>,
    /// Cursor advance of the space character.
    pub space_advance: f64,
}

/// Gap left between the widest point of a glyph and the next one.
const LETTER_GAP: f64 = 0.18;
/// Spacing of densified template points.
const POINT_SPACING: f64 = 0.04;

impl GlyphBank {
    pub fn builtin() -> Self {
        let mut entries = BTreeMap::new();
        let mut advance = BTreeMap::new();
        for (symbol, strokes) in templates() {
            let template = GlyphTemplate { strokes: strokes.into_iter().map(densify).collect() };
            advance.insert(symbol, template.width() + LETTER_GAP);
            entries.insert(symbol, vec![template]);
        }
        GlyphBank { entries, advance, space_advance: 0.45 }
    }

    pub fn contains(&self, symbol: char) -> bool {
        self.entries.contains_key(&symbol)
    }

    pub fn symbols(&self) -> impl Iterator<Item = char> + '_ {
        self.entries.keys().copied()
    }

    pub fn templates(&self, symbol: char) -> Option<&[GlyphTemplate]> {
        self.entries.get(&symbol).map(|v| v.as_slice())
    }

    pub fn advance_width(&self, symbol: char) -> Option<f64> {
        self.advance.get(&symbol).copied()
    }

    /// Adds an alternative letterform (e.g. ingested from recorded data).
    pub fn add_template(&mut self, symbol: char, template: GlyphTemplate) {
        let w = template.width() + LETTER_GAP;
        let adv = self.advance.entry(symbol).or_insert(w);
        *adv = adv.max(w);
        self.entries.entry(symbol).or_default().push(template);
    }
}

fn densify(line: Polyline) -> Polyline {
    let mut out = vec![line[0]];
    for w in line.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let steps = (len / POINT_SPACING).ceil().max(1.0) as usize;
        for s in 1..=steps {
            let f = s as f64 / steps as f64;
            out.push((a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f));
        }
    }
    out
}

/// Elliptical arc from `a0` to `a1` degrees (y-down, so increasing angles turn
/// clockwise on screen).
fn arc(cx: f64, cy: f64, rx: f64, ry: f64, a0: f64, a1: f64) -> Polyline {
    let steps = ((a1 - a0).abs() / 15.0).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| {
            let a = (a0 + (a1 - a0) * i as f64 / steps as f64).to_radians();
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

fn l(points: &[(f64, f64)]) -> Polyline {
    points.to_vec()
}

fn cat(parts: Vec<Polyline>) -> Polyline {
    parts.into_iter().flatten().collect()
}

fn dot(x: f64, y: f64) -> Polyline {
    vec![(x, y), (x + 0.015, y + 0.02)]
}

fn templates() -> Vec<(char, Vec<Polyline>)> {
    vec![
        ('a', vec![cat(vec![arc(0.25, 0.7, 0.2, 0.3, -10.0, -370.0), l(&[(0.45, 1.0)])])]),
        ('b', vec![cat(vec![l(&[(0.05, 0.0), (0.05, 1.0)]), arc(0.27, 0.7, 0.22, 0.3, 135.0, -225.0)])]),
        ('c', vec![arc(0.27, 0.7, 0.22, 0.3, -45.0, -315.0)]),
        ('d', vec![cat(vec![arc(0.22, 0.7, 0.2, 0.3, -10.0, -370.0), l(&[(0.42, 0.0), (0.42, 1.0)])])]),
        ('e', vec![cat(vec![l(&[(0.05, 0.7)]), arc(0.25, 0.7, 0.2, 0.3, 0.0, -315.0)])]),
        ('f', vec![l(&[(0.45, 0.08), (0.35, 0.0), (0.25, 0.05), (0.22, 0.2), (0.22, 1.0)]), l(&[(0.05, 0.4), (0.42, 0.4)])]),
        ('g', vec![cat(vec![arc(0.22, 0.7, 0.2, 0.3, -10.0, -370.0), l(&[(0.42, 0.4), (0.42, 1.15)]), arc(0.24, 1.15, 0.18, 0.15, 0.0, 160.0)])]),
        ('h', vec![cat(vec![l(&[(0.05, 0.0), (0.05, 1.0), (0.05, 0.65)]), arc(0.25, 0.65, 0.2, 0.22, 180.0, 360.0), l(&[(0.45, 1.0)])])]),
        ('i', vec![l(&[(0.1, 0.4), (0.1, 1.0)]), dot(0.1, 0.2)]),
        ('j', vec![cat(vec![l(&[(0.3, 0.4), (0.3, 1.15)]), arc(0.17, 1.15, 0.13, 0.15, 0.0, 160.0)]), dot(0.3, 0.2)]),
        ('k', vec![l(&[(0.05, 0.0), (0.05, 1.0)]), l(&[(0.4, 0.4), (0.05, 0.7), (0.42, 1.0)])]),
        ('l', vec![l(&[(0.1, 0.0), (0.1, 0.9), (0.2, 1.0), (0.3, 0.95)])]),
        ('m', vec![cat(vec![
            l(&[(0.05, 0.4), (0.05, 1.0), (0.05, 0.6)]),
            arc(0.18, 0.6, 0.13, 0.2, 180.0, 360.0),
            l(&[(0.31, 1.0), (0.31, 0.6)]),
            arc(0.44, 0.6, 0.13, 0.2, 180.0, 360.0),
            l(&[(0.57, 1.0)]),
        ])]),
        ('n', vec![cat(vec![l(&[(0.05, 0.4), (0.05, 1.0), (0.05, 0.65)]), arc(0.25, 0.65, 0.2, 0.25, 180.0, 360.0), l(&[(0.45, 1.0)])])]),
        ('o', vec![arc(0.25, 0.7, 0.2, 0.3, -90.0, -450.0)]),
        ('p', vec![cat(vec![l(&[(0.05, 0.4), (0.05, 1.3), (0.05, 0.5)]), arc(0.25, 0.7, 0.2, 0.3, -150.0, 150.0)])]),
        ('q', vec![cat(vec![arc(0.22, 0.7, 0.2, 0.3, -10.0, -370.0), l(&[(0.42, 0.4), (0.42, 1.3), (0.5, 1.2)])])]),
        ('r', vec![cat(vec![l(&[(0.05, 0.4), (0.05, 1.0), (0.05, 0.7)]), arc(0.22, 0.7, 0.17, 0.25, 180.0, 300.0)])]),
        ('s', vec![cat(vec![arc(0.25, 0.55, 0.18, 0.15, -30.0, -270.0), arc(0.25, 0.85, 0.18, 0.15, -90.0, 150.0)])]),
        ('t', vec![l(&[(0.2, 0.1), (0.2, 0.9), (0.3, 1.0), (0.4, 0.95)]), l(&[(0.05, 0.4), (0.38, 0.4)])]),
        ('u', vec![cat(vec![l(&[(0.05, 0.4), (0.05, 0.75)]), arc(0.25, 0.75, 0.2, 0.25, 180.0, 0.0), l(&[(0.45, 0.4), (0.45, 1.0)])])]),
        ('v', vec![l(&[(0.05, 0.4), (0.25, 1.0), (0.45, 0.4)])]),
        ('w', vec![l(&[(0.0, 0.4), (0.15, 1.0), (0.3, 0.55), (0.45, 1.0), (0.6, 0.4)])]),
        ('x', vec![l(&[(0.05, 0.4), (0.45, 1.0)]), l(&[(0.45, 0.4), (0.05, 1.0)])]),
        ('y', vec![l(&[(0.05, 0.4), (0.25, 0.95)]), l(&[(0.45, 0.4), (0.15, 1.3)])]),
        ('z', vec![l(&[(0.05, 0.4), (0.45, 0.4), (0.05, 1.0), (0.45, 1.0)])]),
        ('A', vec![l(&[(0.0, 1.0), (0.3, 0.0), (0.6, 1.0)]), l(&[(0.12, 0.6), (0.48, 0.6)])]),
        ('B', vec![cat(vec![
            l(&[(0.05, 1.0), (0.05, 0.0), (0.35, 0.0)]),
            arc(0.35, 0.25, 0.2, 0.25, -90.0, 90.0),
            l(&[(0.05, 0.5), (0.4, 0.5)]),
            arc(0.4, 0.75, 0.2, 0.25, -90.0, 90.0),
            l(&[(0.05, 1.0)]),
        ])]),
        ('C', vec![arc(0.35, 0.5, 0.3, 0.5, -45.0, -315.0)]),
        ('D', vec![cat(vec![l(&[(0.05, 1.0), (0.05, 0.0), (0.25, 0.0)]), arc(0.25, 0.5, 0.3, 0.5, -90.0, 90.0), l(&[(0.05, 1.0)])])]),
        ('E', vec![l(&[(0.5, 0.0), (0.05, 0.0), (0.05, 1.0), (0.5, 1.0)]), l(&[(0.05, 0.5), (0.4, 0.5)])]),
        ('F', vec![l(&[(0.5, 0.0), (0.05, 0.0), (0.05, 1.0)]), l(&[(0.05, 0.5), (0.4, 0.5)])]),
        ('G', vec![cat(vec![arc(0.35, 0.5, 0.3, 0.5, -45.0, -360.0), l(&[(0.4, 0.5)])])]),
        ('H', vec![l(&[(0.05, 0.0), (0.05, 1.0)]), l(&[(0.55, 0.0), (0.55, 1.0)]), l(&[(0.05, 0.5), (0.55, 0.5)])]),
        ('I', vec![l(&[(0.15, 0.0), (0.15, 1.0)])]),
        ('J', vec![cat(vec![l(&[(0.5, 0.0), (0.5, 0.75)]), arc(0.3, 0.75, 0.2, 0.25, 0.0, 180.0)])]),
        ('K', vec![l(&[(0.05, 0.0), (0.05, 1.0)]), l(&[(0.55, 0.0), (0.05, 0.55), (0.55, 1.0)])]),
        ('L', vec![l(&[(0.05, 0.0), (0.05, 1.0), (0.5, 1.0)])]),
        ('M', vec![l(&[(0.0, 1.0), (0.05, 0.0), (0.35, 0.6), (0.65, 0.0), (0.7, 1.0)])]),
        ('N', vec![l(&[(0.05, 1.0), (0.05, 0.0), (0.55, 1.0), (0.55, 0.0)])]),
        ('O', vec![arc(0.35, 0.5, 0.3, 0.5, -90.0, -450.0)]),
        ('P', vec![cat(vec![l(&[(0.05, 1.0), (0.05, 0.0), (0.3, 0.0)]), arc(0.3, 0.25, 0.22, 0.25, -90.0, 90.0), l(&[(0.05, 0.5)])])]),
        ('Q', vec![arc(0.35, 0.5, 0.3, 0.5, -90.0, -450.0), l(&[(0.4, 0.75), (0.65, 1.05)])]),
        ('R', vec![cat(vec![
            l(&[(0.05, 1.0), (0.05, 0.0), (0.3, 0.0)]),
            arc(0.3, 0.25, 0.22, 0.25, -90.0, 90.0),
            l(&[(0.05, 0.5), (0.25, 0.5), (0.55, 1.0)]),
        ])]),
        ('S', vec![cat(vec![arc(0.3, 0.25, 0.25, 0.25, -30.0, -270.0), arc(0.3, 0.75, 0.25, 0.25, -90.0, 150.0)])]),
        ('T', vec![l(&[(0.0, 0.0), (0.6, 0.0)]), l(&[(0.3, 0.0), (0.3, 1.0)])]),
        ('U', vec![cat(vec![l(&[(0.05, 0.0), (0.05, 0.7)]), arc(0.3, 0.7, 0.25, 0.3, 180.0, 0.0), l(&[(0.55, 0.0)])])]),
        ('V', vec![l(&[(0.0, 0.0), (0.3, 1.0), (0.6, 0.0)])]),
        ('W', vec![l(&[(0.0, 0.0), (0.18, 1.0), (0.35, 0.3), (0.52, 1.0), (0.7, 0.0)])]),
        ('X', vec![l(&[(0.0, 0.0), (0.55, 1.0)]), l(&[(0.55, 0.0), (0.0, 1.0)])]),
        ('Y', vec![l(&[(0.0, 0.0), (0.3, 0.5), (0.6, 0.0)]), l(&[(0.3, 0.5), (0.3, 1.0)])]),
        ('Z', vec![l(&[(0.05, 0.0), (0.55, 0.0), (0.05, 1.0), (0.55, 1.0)])]),
        ('.', vec![dot(0.05, 0.97)]),
        (',', vec![l(&[(0.08, 0.95), (0.04, 1.15)])]),
        ('?', vec![cat(vec![arc(0.25, 0.25, 0.2, 0.2, -160.0, 90.0), l(&[(0.25, 0.7)])]), dot(0.25, 0.95)]),
        ('!', vec![l(&[(0.1, 0.0), (0.1, 0.7)]), dot(0.1, 0.95)]),
        ('-', vec![l(&[(0.05, 0.65), (0.35, 0.65)])]),
        ('\'', vec![l(&[(0.08, 0.0), (0.06, 0.2)])]),
    ]
}
