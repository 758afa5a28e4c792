//! Encoder–decoder transformer over stroke tokens.
//!
//! Activations are position-major: a sequence of `n` tokens of width `d` is
//! an `n × d` matrix, and projections multiply on the right (`x·W + b`).

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{count_params, ModelConfig};
pub use forward::{
    argmax, attention_mask, decoder_forward, encode, encoder_forward, frame_target, greedy_decode,
    greedy_decode_from, multi_head_attention, scaled_dot_attention, sequence_loss, AttentionRecord, Ctx, Decoded,
    LAYER_NORM_EPS,
};
pub use params::{
    AttentionParams, Bound, DecoderLayer, DecoderParams, EncoderLayer, EncoderParams, Linear, Norm, ParamId,
    ParamStore,
};

use crate::error::Result;
use crate::tensor::Scalar;

pub const ENCODER_PREFIX: &str = "encoder.";
pub const DECODER_PREFIX: &str = "decoder.";

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

impl<T: Scalar> Model<T> {
    /// Freshly initialized model; the same `seed` always gives the same
    /// parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (params, encoder, decoder) = params::build(&config, seed);
        Ok(Model { config, params, encoder, decoder })
    }

    /// Element counts `(encoder, decoder)` of the allocated tensors.
    pub fn param_tally(&self) -> (usize, usize) {
        (self.params.total_with_prefix(ENCODER_PREFIX), self.params.total_with_prefix(DECODER_PREFIX))
    }

    pub fn freeze_encoder(&mut self) {
        self.params.set_trainable_prefix(ENCODER_PREFIX, false);
    }

    pub fn unfreeze_encoder(&mut self) {
        self.params.set_trainable_prefix(ENCODER_PREFIX, true);
    }

    pub fn encoder_frozen(&self) -> bool {
        self.params.names().iter().enumerate().any(|(i, n)| n.starts_with(ENCODER_PREFIX) && !self.params.trainable(i))
    }

    pub fn encoder_checksum(&self) -> u64 {
        self.params.checksum(ENCODER_PREFIX)
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
            encoder: self.encoder.clone(),
            decoder: self.decoder.clone(),
        }
    }

    /// Replaces every encoder tensor with the one of the same name in
    /// `source`. Shapes must agree.
    pub fn copy_encoder_from<U: Scalar>(&mut self, source: &Model<U>) -> Result<()> {
        let mismatches = source.config.encoder_mismatches(&self.config);
        if !mismatches.is_empty() {
            return Err(crate::Error::ConfigMismatch(mismatches));
        }
        for i in 0..self.params.len() {
            let name = &self.params.names()[i];
            if !name.starts_with(ENCODER_PREFIX) {
                continue;
            }
            let j = source.params.find(name).ok_or_else(|| crate::Error::ConfigMismatch(vec![name.clone()]))?;
            self.params.tensors_mut()[i] = source.params.get(j).cast();
        }
        Ok(())
    }
}

/// Marks all encoder tensors non-trainable.
pub fn freeze_encoder<T: Scalar>(mut model: Model<T>) -> Model<T> {
    model.freeze_encoder();
    model
}
