use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AttentionRecord;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerExport {
    /// One row-major `rows × cols` matrix per head.
    pub heads: Vec<Vec<f64>>,
}

/// Cross-attention of one decode, outputs on rows and unmasked inputs on
/// columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionExport {
    pub rows: usize,
    pub cols: usize,
    pub layers: Vec<LayerExport>,
    pub input_labels: Vec<String>,
    pub output_tokens: Vec<String>,
}

impl AttentionExport {
    /// Keeps the first `input_labels.len()` columns of every map; the rest
    /// must be masked (zero) positions.
    pub fn new(record: &AttentionRecord, input_labels: Vec<String>, output_tokens: Vec<String>) -> Result<Self> {
        let (rows, cols) = (output_tokens.len(), input_labels.len());
        let mut layers = Vec::with_capacity(record.layers.len());
        for heads in &record.layers {
            let mut out = Vec::with_capacity(heads.len());
            for h in heads {
                if h.rows() != rows || h.cols() < cols {
                    return Err(Error::ShapeMismatch { op: "export_attention", left: h.shape(), right: [rows, cols] });
                }
                if (0..rows).any(|r| h.row_slice(r)[cols..].iter().any(|&w| w != 0.0)) {
                    return Err(Error::InvalidArgument {
                        op: "export_attention",
                        msg: "weight on a column beyond the labelled inputs".into(),
                    });
                }
                out.push((0..rows).flat_map(|r| h.row_slice(r)[..cols].to_vec()).collect());
            }
            layers.push(LayerExport { heads: out });
        }
        Ok(AttentionExport { rows, cols, layers, input_labels, output_tokens })
    }

    pub fn head(&self, layer: usize, head: usize) -> Option<Tensor<f64>> {
        let w = self.layers.get(layer)?.heads.get(head)?;
        Tensor::new([self.rows, self.cols], w.clone()).ok()
    }
}

pub fn pixel(w: f64) -> u8 {
    (255.0 * (1.0 - w)).round().clamp(0.0, 255.0) as u8
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(pixels)?;
    f.flush()?;
    Ok(())
}

/// Reads a binary (P5) 8-bit PGM written by [`write_pgm`].
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = || Error::InvalidArgument { op: "read_pgm", msg: format!("{} is not a P5 image", path.display()) };
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?.to_string());
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad());
    }
    let (w, h) = (num(&fields[1])?, num(&fields[2])?);
    let data = bytes.get(pos + 1..pos + 1 + w * h).ok_or_else(bad)?.to_vec();
    Ok((w, h, data))
}

/// Writes `attention.json` plus `layer{l}_head{h}.pgm` per map into `dir`,
/// returning the paths written.
pub fn export_attention(
    record: &AttentionRecord,
    input_labels: &[String],
    output_tokens: &[String],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let export = AttentionExport::new(record, input_labels.to_vec(), output_tokens.to_vec())?;
    std::fs::create_dir_all(dir)?;
    let json = dir.join("attention.json");
    std::fs::write(&json, serde_json::to_string_pretty(&export)?)?;
    let mut written = vec![json];
    for (l, layer) in export.layers.iter().enumerate() {
        for (h, w) in layer.heads.iter().enumerate() {
            let path = dir.join(format!("layer{l}_head{h}.pgm"));
            let pixels: Vec<u8> = w.iter().map(|&x| pixel(x)).collect();
            write_pgm(&path, export.cols, export.rows, &pixels)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Fraction of adjacent output rows whose argmax input column does not move
/// left; `None` with fewer than two rows.
pub fn monotone_tracking(weights: &Tensor<f64>) -> Option<f64> {
    if weights.rows() < 2 {
        return None;
    }
    let peaks: Vec<usize> = (0..weights.rows()).map(|r| crate::model::argmax(weights.row_slice(r))).collect();
    let ok = peaks.windows(2).filter(|p| p[1] >= p[0]).count();
    Some(ok as f64 / (peaks.len() - 1) as f64)
}
