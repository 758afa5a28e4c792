use std::cell::RefCell;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Index of a tensor in a [`ParamStore`].
pub type ParamId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Norm {
    pub gain: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionParams {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderLayer {
    pub attn: AttentionParams,
    pub norm1: Norm,
    pub ffn1: Linear,
    pub ffn2: Linear,
    pub norm2: Norm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderParams {
    /// `n × d_f` learned positional table (row `j` belongs to token `j`).
    pub pos: ParamId,
    pub layers: Vec<EncoderLayer>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderLayer {
    pub self_attn: AttentionParams,
    pub norm1: Norm,
    pub cross_attn: AttentionParams,
    pub norm2: Norm,
    pub ffn1: Linear,
    pub ffn2: Linear,
    pub norm3: Norm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderParams {
    pub embed: ParamId,
    /// `m × d_model` learned positional table.
    pub pos: ParamId,
    pub layers: Vec<DecoderLayer>,
    pub out: Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    /// Uniform in `±1/√fan_in`.
    Uniform(usize),
    Gaussian,
    Zeros,
    Ones,
}

/// Named parameter tensors in a fixed order, with per-tensor trainability.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    trainable: Vec<bool>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id]
    }

    pub fn trainable(&self, id: ParamId) -> bool {
        self.trainable[id]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn total(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Sum of element counts over tensors whose name starts with `prefix`.
    pub fn total_with_prefix(&self, prefix: &str) -> usize {
        self.names.iter().zip(&self.tensors).filter(|(n, _)| n.starts_with(prefix)).map(|(_, t)| t.len()).sum()
    }

    pub fn set_trainable_prefix(&mut self, prefix: &str, trainable: bool) {
        for (n, t) in self.names.iter().zip(&mut self.trainable) {
            if n.starts_with(prefix) {
                *t = trainable;
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            trainable: self.trainable.clone(),
        }
    }

    /// FNV-1a over the little-endian bytes of every tensor under `prefix`.
    pub fn checksum(&self, prefix: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (n, t) in self.names.iter().zip(&self.tensors) {
            if !n.starts_with(prefix) {
                continue;
            }
            for x in t.data() {
                for b in x.to_f64_lossy().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x100_0000_01b3);
                }
            }
        }
        h
    }
}

struct Builder<T> {
    store: ParamStore<T>,
    seed: u64,
}

impl<T: Scalar> Builder<T> {
    fn add(&mut self, name: String, shape: [usize; 2], init: Init) -> ParamId {
        let len = shape[0] * shape[1];
        let mut rng = seed::rng(&[self.seed, seed::hash_str(&name)]);
        let data: Vec<f64> = match init {
            Init::Uniform(fan_in) => {
                let a = 1.0 / (fan_in as f64).sqrt();
                (0..len).map(|_| rng.random_range(-a..a)).collect()
            }
            Init::Gaussian => {
                let g = Normal::new(0.0, 0.02).expect("valid sigma");
                (0..len).map(|_| g.sample(&mut rng)).collect()
            }
            Init::Zeros => vec![0.0; len],
            Init::Ones => vec![1.0; len],
        };
        self.store.names.push(name);
        self.store.tensors.push(Tensor::from_f64(shape, &data).expect("shape matches data"));
        self.store.trainable.push(true);
        self.store.len() - 1
    }

    fn linear(&mut self, prefix: &str, i: usize, o: usize) -> Linear {
        Linear {
            w: self.add(format!("{prefix}.weight"), [i, o], Init::Uniform(i)),
            b: self.add(format!("{prefix}.bias"), [1, o], Init::Zeros),
        }
    }

    fn norm(&mut self, prefix: &str, d: usize) -> Norm {
        Norm {
            gain: self.add(format!("{prefix}.gain"), [1, d], Init::Ones),
            bias: self.add(format!("{prefix}.bias"), [1, d], Init::Zeros),
        }
    }

    fn attention(&mut self, prefix: &str, d: usize) -> AttentionParams {
        AttentionParams {
            q: self.linear(&format!("{prefix}.q"), d, d),
            k: self.linear(&format!("{prefix}.k"), d, d),
            v: self.linear(&format!("{prefix}.v"), d, d),
            o: self.linear(&format!("{prefix}.o"), d, d),
        }
    }
}

pub(crate) fn build<T: Scalar>(
    config: &ModelConfig,
    init_seed: u64,
) -> (ParamStore<T>, EncoderParams, DecoderParams) {
    let d = config.d_model();
    let mut b = Builder { store: ParamStore { names: vec![], tensors: vec![], trainable: vec![] }, seed: init_seed };
    let pos = b.add("encoder.pos".into(), [config.n, config.d_f], Init::Gaussian);
    let layers = (0..config.l_e)
        .map(|i| {
            let p = format!("encoder.layers.{i}");
            EncoderLayer {
                attn: b.attention(&format!("{p}.attn"), d),
                norm1: b.norm(&format!("{p}.norm1"), d),
                ffn1: b.linear(&format!("{p}.ffn1"), d, config.d_p),
                ffn2: b.linear(&format!("{p}.ffn2"), config.d_p, d),
                norm2: b.norm(&format!("{p}.norm2"), d),
            }
        })
        .collect();
    let encoder = EncoderParams { pos, layers };
    let embed = b.add("decoder.embed".into(), [config.vocab_size, d], Init::Gaussian);
    let dpos = b.add("decoder.pos".into(), [config.m, d], Init::Gaussian);
    let hidden = config.k * config.d_p;
    let layers = (0..config.l_d)
        .map(|i| {
            let p = format!("decoder.layers.{i}");
            DecoderLayer {
                self_attn: b.attention(&format!("{p}.self_attn"), d),
                norm1: b.norm(&format!("{p}.norm1"), d),
                cross_attn: b.attention(&format!("{p}.cross_attn"), d),
                norm2: b.norm(&format!("{p}.norm2"), d),
                ffn1: b.linear(&format!("{p}.ffn1"), d, hidden),
                ffn2: b.linear(&format!("{p}.ffn2"), hidden, d),
                norm3: b.norm(&format!("{p}.norm3"), d),
            }
        })
        .collect();
    let out = b.linear("decoder.out", d, config.vocab_size);
    let decoder = DecoderParams { embed, pos: dpos, layers, out };
    (b.store, encoder, decoder)
}

/// Parameters bound lazily to one tape: a tensor is copied onto the tape
/// the first time a forward pass touches it.
pub struct Bound<'m, 't, T> {
    tape: &'t Tape<T>,
    store: &'m ParamStore<T>,
    train: bool,
    slots: RefCell<Vec<Option<Var<'t, T>>>>,
}

impl<'m, 't, T: Scalar> Bound<'m, 't, T> {
    /// `train` marks trainable tensors as requiring gradients.
    pub fn new(tape: &'t Tape<T>, store: &'m ParamStore<T>, train: bool) -> Self {
        Bound { tape, store, train, slots: RefCell::new(vec![None; store.len()]) }
    }

    /// Uses already-recorded variables instead of copying from the store.
    pub fn with_vars(tape: &'t Tape<T>, store: &'m ParamStore<T>, vars: &[Var<'t, T>]) -> Result<Self> {
        if vars.len() != store.len() {
            return Err(Error::InvalidArgument {
                op: "bind",
                msg: format!("expected {} parameter variables, got {}", store.len(), vars.len()),
            });
        }
        Ok(Bound { tape, store, train: true, slots: RefCell::new(vars.iter().copied().map(Some).collect()) })
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn get(&self, id: ParamId) -> Var<'t, T> {
        if let Some(v) = self.slots.borrow()[id] {
            return v;
        }
        let v = self.tape.param(&self.store.tensors[id], self.train && self.store.trainable[id]);
        self.slots.borrow_mut()[id] = Some(v);
        v
    }

    /// Bound variables, in store order, for those touched so far.
    pub fn touched(&self) -> Vec<(ParamId, Var<'t, T>)> {
        self.slots.borrow().iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect()
    }
}
