//! Binary checkpoint, little-endian throughout:
//!
//! ```text
//! "S2T1" | u32 version | u32 len, config JSON | u32 len, vocabulary text
//! u32 tensor count | per tensor: u32 name len, name, u32 rows, u32 cols, u64 offset
//! f32 payload (offsets count elements from the start of the payload)
//! ```

use std::path::Path;

use super::{Model, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};
use crate::vocab::Vocab;

const MAGIC: &[u8; 4] = b"S2T1";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub vocab: Vocab,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

pub fn checkpoint_bytes<T: Scalar>(model: &Model<T>, vocab: &Vocab) -> Result<Vec<u8>> {
    if vocab.len() != model.config.vocab_size {
        return Err(Error::Checkpoint(format!(
            "vocabulary has {} tokens but the model expects {}",
            vocab.len(),
            model.config.vocab_size
        )));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_bytes(&mut out, serde_json::to_string(&model.config)?.as_bytes());
    put_bytes(&mut out, vocab.to_text().as_bytes());
    let store = &model.params;
    put_u32(&mut out, store.len() as u32);
    let mut offset = 0u64;
    for (name, t) in store.names().iter().zip(store.tensors()) {
        put_bytes(&mut out, name.as_bytes());
        put_u32(&mut out, t.rows() as u32);
        put_u32(&mut out, t.cols() as u32);
        out.extend_from_slice(&offset.to_le_bytes());
        offset += t.len() as u64;
    }
    for t in store.tensors() {
        for &x in t.data() {
            out.extend_from_slice(&(x.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, vocab: &Vocab, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, checkpoint_bytes(model, vocab)?)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<&'a str> {
        let n = self.u32()? as usize;
        std::str::from_utf8(self.take(n)?).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

impl Checkpoint {
    /// Parses and validates a checkpoint: every tensor named by the
    /// configuration must be present exactly once with the expected shape.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let config: ModelConfig = serde_json::from_str(r.string()?)?;
        let vocab = Vocab::from_text(r.string()?)?;
        if vocab.len() != config.vocab_size {
            return Err(Error::Checkpoint(format!(
                "vocabulary has {} tokens, config says {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        let mut model = Model::<f32>::new(config, 0)?;
        let count = r.u32()? as usize;
        if count != model.params.len() {
            return Err(Error::Checkpoint(format!("{count} tensors, expected {}", model.params.len())));
        }
        let mut manifest = Vec::with_capacity(count);
        for _ in 0..count {
            let name = r.string()?.to_string();
            let shape = [r.u32()? as usize, r.u32()? as usize];
            let offset = r.u64()? as usize;
            manifest.push((name, shape, offset));
        }
        let payload = &bytes[r.pos..];
        let mut seen = vec![false; count];
        for (name, shape, offset) in manifest {
            let id = model.params.find(&name).ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name}")))?;
            let expected = model.params.get(id).shape();
            if shape != expected {
                return Err(Error::Checkpoint(format!("{name}: shape {shape:?}, config requires {expected:?}")));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
            }
            let len = shape[0] * shape[1];
            let range = offset * 4..(offset + len) * 4;
            let raw = payload.get(range).ok_or_else(|| Error::Checkpoint(format!("{name}: payload out of range")))?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            model.params.tensors_mut()[id] = Tensor::new(shape, data)?;
        }
        Ok(Checkpoint { model, vocab })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(&self.model, &self.vocab, path)
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path)
}
