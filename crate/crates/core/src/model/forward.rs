use rand::RngCore;

use super::params::{AttentionParams, Bound, Linear, Norm};
use super::Model;
use crate::error::{Error, Result};
use crate::stroke::TokenMatrix;
use crate::tensor::{Axis, Scalar, Tape, Tensor, Var};
use crate::vocab::{BOS, EOS};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-pass state: dropout source (training only) and whether attention
/// weights are kept.
pub struct Ctx<'r> {
    pub dropout: f64,
    pub rng: Option<&'r mut dyn RngCore>,
    pub capture: bool,
}

impl<'r> Ctx<'r> {
    pub fn inference() -> Self {
        Ctx { dropout: 0.0, rng: None, capture: false }
    }

    pub fn capturing() -> Self {
        Ctx { dropout: 0.0, rng: None, capture: true }
    }

    pub fn train(dropout: f64, rng: &'r mut dyn RngCore) -> Self {
        Ctx { dropout, rng: Some(rng), capture: false }
    }

    fn dropout<'t, T: Scalar>(&mut self, x: Var<'t, T>) -> Var<'t, T> {
        match self.rng.as_deref_mut() {
            Some(rng) if self.dropout > 0.0 => x.dropout(self.dropout, rng),
            _ => x,
        }
    }
}

/// Cross-attention weights of one decoder pass: `layers[l][h]` is an
/// `outputs × inputs` matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttentionRecord {
    pub layers: Vec<Vec<Tensor<f64>>>,
}

/// Blocked positions (`true` = no attention) for an `n_q × n_k` score
/// matrix, or `None` when nothing is blocked.
pub fn attention_mask(n_q: usize, n_k: usize, key_valid: Option<&[bool]>, causal: bool) -> Option<Vec<bool>> {
    let key_blocked = |j: usize| key_valid.is_some_and(|v| !v[j]);
    let mask: Vec<bool> = (0..n_q * n_k).map(|idx| key_blocked(idx % n_k) || (causal && idx % n_k > idx / n_k)).collect();
    mask.iter().any(|&b| b).then_some(mask)
}

fn linear<'t, T: Scalar>(x: Var<'t, T>, l: &Linear, b: &Bound<'_, 't, T>) -> Result<Var<'t, T>> {
    x.matmul(b.get(l.w))?.add_row(b.get(l.b))
}

fn norm<'t, T: Scalar>(x: Var<'t, T>, n: &Norm, b: &Bound<'_, 't, T>) -> Result<Var<'t, T>> {
    x.layer_norm(b.get(n.gain), b.get(n.bias), T::from_f64_lossy(LAYER_NORM_EPS))
}

/// Scaled dot-product attention over already projected `q`, `k`, `v`
/// (rows are positions), split into `heads` column blocks.
pub fn scaled_dot_attention<'t, T: Scalar>(
    q: Var<'t, T>,
    k: Var<'t, T>,
    v: Var<'t, T>,
    heads: usize,
    mask: Option<&[bool]>,
    ctx: &mut Ctx<'_>,
) -> Result<(Var<'t, T>, Vec<Tensor<f64>>)> {
    let d = q.shape()[1];
    if heads == 0 || !d.is_multiple_of(heads) || k.shape()[1] != d || v.shape()[1] != d {
        return Err(Error::InvalidArgument {
            op: "attention",
            msg: format!("widths {:?}/{:?}/{:?} not divisible into {heads} heads", q.shape(), k.shape(), v.shape()),
        });
    }
    let dh = d / heads;
    let scale = T::from_f64_lossy(1.0 / (dh as f64).sqrt());
    let mut outs = Vec::with_capacity(heads);
    let mut weights = Vec::new();
    for h in 0..heads {
        let (qh, kh, vh) = if heads == 1 {
            (q, k, v)
        } else {
            let (a, b) = (h * dh, (h + 1) * dh);
            (q.slice_cols(a, b)?, k.slice_cols(a, b)?, v.slice_cols(a, b)?)
        };
        let mut s = qh.matmul_t(kh)?.scale(scale);
        if let Some(m) = mask {
            s = s.masked_fill(m, T::neg_infinity())?;
        }
        let w = s.softmax(Axis::Cols)?;
        if ctx.capture {
            weights.push(w.value().cast());
        }
        outs.push(ctx.dropout(w).matmul(vh)?);
    }
    let out = if heads == 1 { outs[0] } else { Var::concat_cols(&outs)? };
    Ok((out, weights))
}

/// Projects queries from `x_q` and keys/values from `x_kv`, attends, and
/// applies the output projection.
pub fn multi_head_attention<'t, T: Scalar>(
    x_q: Var<'t, T>,
    x_kv: Var<'t, T>,
    mask: Option<&[bool]>,
    p: &AttentionParams,
    heads: usize,
    b: &Bound<'_, 't, T>,
    ctx: &mut Ctx<'_>,
) -> Result<(Var<'t, T>, Vec<Tensor<f64>>)> {
    let q = linear(x_q, &p.q, b)?;
    let k = linear(x_kv, &p.k, b)?;
    let v = linear(x_kv, &p.v, b)?;
    let (o, w) = scaled_dot_attention(q, k, v, heads, mask, ctx)?;
    Ok((linear(o, &p.o, b)?, w))
}

/// `Z = Enc(X + α·P_x, M_x)`, returned position-major (`n' × d_model`).
/// `x` may hold fewer than `n` tokens.
pub fn encoder_forward<'t, T: Scalar>(
    model: &Model<T>,
    b: &Bound<'_, 't, T>,
    x: &TokenMatrix,
    ctx: &mut Ctx<'_>,
) -> Result<Var<'t, T>> {
    let c = &model.config;
    if x.d_f() != c.d_f || x.n() > c.n || x.n() == 0 {
        return Err(Error::ShapeMismatch { op: "encoder_forward", left: [x.n(), x.d_f()], right: [c.n, c.d_f] });
    }
    let tape = b.tape();
    let xs = tape.constant(Tensor::from_f64([x.n(), c.d_f], x.data())?);
    let mut pos = b.get(model.encoder.pos);
    if x.n() < c.n {
        pos = pos.slice_rows(0, x.n())?;
    }
    let mut h = xs.add(pos.scale(T::from_f64_lossy(c.alpha)))?;
    let mask = attention_mask(x.n(), x.n(), Some(x.mask()), false);
    for layer in &model.encoder.layers {
        let (a, _) = multi_head_attention(h, h, mask.as_deref(), &layer.attn, c.d_a, b, ctx)?;
        h = norm(h.add(a)?, &layer.norm1, b)?;
        let f = linear(linear(h, &layer.ffn1, b)?.relu(), &layer.ffn2, b)?;
        h = norm(h.add(ctx.dropout(f))?, &layer.norm2, b)?;
    }
    Ok(h)
}

/// Decoder logits (`|ids| × vocab`) for the input prefix `ids` attending to
/// `z` under the encoder mask `x_mask`.
pub fn decoder_forward<'t, T: Scalar>(
    model: &Model<T>,
    b: &Bound<'_, 't, T>,
    ids: &[usize],
    z: Var<'t, T>,
    x_mask: &[bool],
    ctx: &mut Ctx<'_>,
) -> Result<(Var<'t, T>, AttentionRecord)> {
    let c = &model.config;
    let len = ids.len();
    if len == 0 || len > c.m {
        return Err(Error::InvalidArgument { op: "decoder_forward", msg: format!("{len} tokens for m = {}", c.m) });
    }
    if x_mask.len() != z.shape()[0] {
        return Err(Error::ShapeMismatch { op: "decoder_forward", left: z.shape(), right: [x_mask.len(), 1] });
    }
    let mut pos = b.get(model.decoder.pos);
    if len < c.m {
        pos = pos.slice_rows(0, len)?;
    }
    let mut h = b.get(model.decoder.embed).embedding(ids)?.add(pos)?;
    let causal = attention_mask(len, len, None, true);
    let cross = attention_mask(len, x_mask.len(), Some(x_mask), false);
    let mut record = AttentionRecord::default();
    for layer in &model.decoder.layers {
        let (a, _) = multi_head_attention(h, h, causal.as_deref(), &layer.self_attn, c.d_a, b, ctx)?;
        h = norm(h.add(a)?, &layer.norm1, b)?;
        let (a, w) = multi_head_attention(h, z, cross.as_deref(), &layer.cross_attn, c.d_a, b, ctx)?;
        if ctx.capture {
            record.layers.push(w);
        }
        h = norm(h.add(a)?, &layer.norm2, b)?;
        let f = linear(linear(h, &layer.ffn1, b)?.relu(), &layer.ffn2, b)?;
        h = norm(h.add(ctx.dropout(f))?, &layer.norm3, b)?;
    }
    Ok((linear(h, &model.decoder.out, b)?, record))
}

/// Decoder input and target for a transcription: `⟨bos⟩ y` and `y ⟨eos⟩`.
pub fn frame_target(ids: &[usize], m: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if ids.len() + 1 > m {
        return Err(Error::InvalidArgument {
            op: "frame_target",
            msg: format!("{} target tokens plus framing exceed m = {m}", ids.len()),
        });
    }
    let input = std::iter::once(BOS).chain(ids.iter().copied()).collect();
    let target = ids.iter().copied().chain(std::iter::once(EOS)).collect();
    Ok((input, target))
}

/// Teacher-forced mean cross-entropy over the framed target.
pub fn sequence_loss<'t, T: Scalar>(
    model: &Model<T>,
    b: &Bound<'_, 't, T>,
    x: &TokenMatrix,
    target_ids: &[usize],
    ctx: &mut Ctx<'_>,
) -> Result<Var<'t, T>> {
    let (input, target) = frame_target(target_ids, model.config.m)?;
    let z = encoder_forward(model, b, x, ctx)?;
    let (logits, _) = decoder_forward(model, b, &input, z, x.mask(), ctx)?;
    logits.cross_entropy(&target, crate::vocab::PAD)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// Generated ids after ⟨bos⟩, including ⟨eos⟩ when produced.
    pub ids: Vec<usize>,
    /// Cross-attention of the final decoding step; row `i` belongs to
    /// output token `i`.
    pub attention: AttentionRecord,
}

impl Decoded {
    /// Generated ids with a trailing ⟨eos⟩ removed.
    pub fn content(&self) -> &[usize] {
        match self.ids.last() {
            Some(&EOS) => &self.ids[..self.ids.len() - 1],
            _ => &self.ids,
        }
    }
}

/// Lowest index among the maxima.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Encoder output for `x` as a plain tensor.
pub fn encode<T: Scalar>(model: &Model<T>, x: &TokenMatrix) -> Result<Tensor<T>> {
    let tape = Tape::inference();
    let b = Bound::new(&tape, &model.params, false);
    Ok(encoder_forward(model, &b, x, &mut Ctx::inference())?.value())
}

/// Greedy decoding from a precomputed encoder output. Each step re-runs the
/// decoder on the whole prefix; stops at ⟨eos⟩ or after `m` tokens.
pub fn greedy_decode_from<T: Scalar>(model: &Model<T>, z: &Tensor<T>, x_mask: &[bool]) -> Result<Decoded> {
    let mut ids = vec![BOS];
    let attention = loop {
        let tape = Tape::inference();
        let b = Bound::new(&tape, &model.params, false);
        let zv = tape.constant(z.clone());
        let (logits, record) = decoder_forward(model, &b, &ids, zv, x_mask, &mut Ctx::capturing())?;
        let rows = logits.shape()[0];
        let next = {
            let data = logits.data();
            let v = model.config.vocab_size;
            argmax(&data[(rows - 1) * v..rows * v])
        };
        ids.push(next);
        if next == EOS || ids.len() > model.config.m {
            break record;
        }
    };
    ids.remove(0);
    Ok(Decoded { ids, attention })
}

pub fn greedy_decode<T: Scalar>(model: &Model<T>, x: &TokenMatrix) -> Result<Decoded> {
    let z = encode(model, x)?;
    greedy_decode_from(model, &z, x.mask())
}
