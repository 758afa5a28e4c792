//! One JSON object per line:
//! `{"subject_id": …, "text": …, "strokes": [[[x, y], …], …]}`.
//!
//! Touches carrying a timestamp are written as `[x, y, t]` (and `[x, y, t, p]`
//! with pressure). Synthetic data additionally records its glyph spans under
//! an optional `"glyphs"` key.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stroke::{GlyphSpan, Stroke, StrokeSequence, Touch};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    subject_id: String,
    text: String,
    strokes: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    glyphs: Vec<GlyphSpan>,
}

fn touch_to_array(p: &Touch) -> Vec<f64> {
    match (p.t, p.p) {
        (Some(t), Some(pr)) => vec![p.x, p.y, t, pr],
        (Some(t), None) => vec![p.x, p.y, t],
        _ => vec![p.x, p.y],
    }
}

fn array_to_touch(v: &[f64]) -> std::result::Result<Touch, String> {
    match *v {
        [x, y] => Ok(Touch::xy(x, y)),
        [x, y, t] => Ok(Touch { x, y, t: Some(t), p: None }),
        [x, y, t, p] => Ok(Touch { x, y, t: Some(t), p: Some(p) }),
        _ => Err(format!("touch must have 2 to 4 values, got {}", v.len())),
    }
}

pub fn to_line(seq: &StrokeSequence) -> Result<String> {
    let record = Record {
        subject_id: seq.subject_id.clone(),
        text: seq.text.clone(),
        strokes: seq.strokes.iter().map(|s| s.points().iter().map(touch_to_array).collect()).collect(),
        glyphs: seq.glyphs.clone(),
    };
    Ok(serde_json::to_string(&record)?)
}

fn from_line(line: &str) -> std::result::Result<StrokeSequence, String> {
    let record: Record = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let strokes = record
        .strokes
        .iter()
        .map(|s| {
            let pts = s.iter().map(|v| array_to_touch(v)).collect::<std::result::Result<Vec<_>, _>>()?;
            Stroke::new(pts).map_err(|e| e.to_string())
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if record.glyphs.iter().any(|g| g.start > g.end || g.end > strokes.len()) {
        return Err("glyph span out of range".into());
    }
    Ok(StrokeSequence { strokes, text: record.text, subject_id: record.subject_id, glyphs: record.glyphs })
}

pub fn save_jsonl(examples: &[StrokeSequence], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in examples {
        writeln!(w, "{}", to_line(e)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a JSONL dataset; blank lines are skipped and the first malformed
/// line aborts with its 1-based line number.
pub fn load_jsonl(path: &Path) -> Result<Vec<StrokeSequence>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(from_line(&line).map_err(|msg| Error::MalformedLine { line: i + 1, msg })?);
    }
    Ok(out)
}
