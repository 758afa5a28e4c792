use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transformer hyperparameters.
///
/// `d_model = d_a · d_h`; input tokens are added to the encoder stream
/// without a projection, so `d_f` must equal `d_model`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub l_e: usize,
    pub l_d: usize,
    pub d_a: usize,
    pub d_h: usize,
    /// Encoder FFN hidden width; the decoder uses `k · d_p`.
    pub d_p: usize,
    pub k: usize,
    pub d_f: usize,
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub vocab_size: usize,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_dropout() -> f64 {
    0.1
}

impl ModelConfig {
    pub fn d_model(&self) -> usize {
        self.d_a * self.d_h
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.d_a == 0 || self.d_h == 0 {
            problems.push("d_a and d_h must be positive".to_string());
        }
        if self.d_f != self.d_model() {
            problems.push(format!("d_f ({}) must equal d_a·d_h ({})", self.d_f, self.d_model()));
        }
        if !self.d_f.is_multiple_of(2) {
            problems.push(format!("d_f ({}) must be even", self.d_f));
        }
        if self.d_p == 0 || self.k == 0 {
            problems.push("d_p and k must be positive".into());
        }
        if self.n < 3 {
            problems.push(format!("n ({}) must leave room for ⟨bos⟩, a stroke and ⟨eos⟩", self.n));
        }
        if self.m == 0 {
            problems.push("m must be positive".into());
        }
        if self.vocab_size < 5 {
            problems.push(format!("vocab_size ({}) must exceed the 4 control tokens", self.vocab_size));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout ({}) must be in [0, 1)", self.dropout));
        }
        if !self.alpha.is_finite() {
            problems.push("alpha must be finite".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Named configurations. `v61`–`v68` use `n = 2m = 48, k = 1`; `v74`
    /// onwards `n = 2m = 200, k = 3`; all use `d_f = d_model = d_p = 128`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = |l_e, l_d, d_a, n, m, k, vocab_size| ModelConfig {
            l_e,
            l_d,
            d_a,
            d_h: 128 / d_a,
            d_p: 128,
            k,
            d_f: 128,
            n,
            m,
            alpha: 1.0,
            vocab_size,
            dropout: 0.1,
        };
        let c = match name {
            "v61" => base(2, 2, 4, 48, 24, 1, 57),
            "v62" => base(3, 2, 2, 48, 24, 1, 57),
            "v63" => base(4, 4, 4, 48, 24, 1, 57),
            "v64" => base(5, 2, 2, 48, 24, 1, 57),
            "v65" => base(5, 4, 2, 48, 24, 1, 57),
            "v66" => base(7, 2, 2, 48, 24, 1, 57),
            "v67" => base(7, 4, 2, 48, 24, 1, 57),
            "v68" => base(5, 2, 4, 48, 24, 1, 57),
            "v74" => base(5, 4, 4, 200, 100, 3, 57),
            "v80" | "v82" | "v83" | "v92" | "v93" => base(5, 4, 4, 200, 100, 3, 2000),
            "desk" => ModelConfig {
                l_e: 3,
                l_d: 2,
                d_a: 4,
                d_h: 16,
                d_p: 128,
                k: 1,
                d_f: 64,
                n: 64,
                m: 40,
                alpha: 1.0,
                vocab_size: 18,
                dropout: 0.1,
            },
            "tiny" => ModelConfig {
                l_e: 1,
                l_d: 1,
                d_a: 2,
                d_h: 4,
                d_p: 8,
                k: 1,
                d_f: 8,
                n: 6,
                m: 4,
                alpha: 1.0,
                vocab_size: 11,
                dropout: 0.0,
            },
            other => return Err(Error::Config(format!("unknown preset {other:?}"))),
        };
        Ok(c)
    }

    /// Fields that must agree for an encoder to be reused under `other`.
    pub fn encoder_mismatches(&self, other: &ModelConfig) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, a: usize, b: usize| {
            if a != b {
                out.push(name.to_string());
            }
        };
        check("l_e", self.l_e, other.l_e);
        check("d_a", self.d_a, other.d_a);
        check("d_h", self.d_h, other.d_h);
        check("d_p", self.d_p, other.d_p);
        check("d_f", self.d_f, other.d_f);
        check("n", self.n, other.n);
        if self.alpha != other.alpha {
            out.push("alpha".into());
        }
        out
    }
}

/// Closed-form parameter counts `(Θ_e, Θ_d)`.
pub fn count_params(c: &ModelConfig) -> (usize, usize) {
    let d = c.d_model();
    let linear = |i: usize, o: usize| i * o + o;
    let attention = 4 * linear(d, d);
    let norm = 2 * d;
    let enc_layer = attention + linear(d, c.d_p) + linear(c.d_p, d) + 2 * norm;
    let theta_e = c.n * c.d_f + c.l_e * enc_layer;
    let dec_layer = 2 * attention + linear(d, c.k * c.d_p) + linear(c.k * c.d_p, d) + 3 * norm;
    let theta_d = c.vocab_size * d + c.m * d + c.l_d * dec_layer + linear(d, c.vocab_size);
    (theta_e, theta_d)
}
