//! The dual-embedding encoder/decoder transformer with an attention action
//! head and a configurable auxiliary head.
//!
//! The encoder sees only functional embeddings; primitive embeddings reach
//! the output solely as the action head's attention values, which is what
//! makes primitive substitution work. The decoder consumes the sum of three
//! channel embeddings (action, aux1, aux2) and predicts all three channels
//! jointly at each step — training teacher-forces them, inference feeds back
//! its own argmax ids.

pub mod decode;
pub mod forward;
pub mod gradcheck;
pub mod layers;
pub mod params;

pub use decode::Decoded;
pub use forward::{DecoderTrace, ForwardCache, ForwardOutput, LossBreakdown, EMBED_REG};
pub use params::Parameters;

use crate::data::LabeledExample;
use crate::error::Error;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::vocab::{VocabSet, EOS, SOS};
use crate::Result;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Which decoder vector queries the auxiliary attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuxQuery {
    /// First layer's self-attention output, before cross-attention.
    #[serde(rename = "L1-Int")]
    L1Int,
    /// First layer's output.
    #[serde(rename = "L1-Out")]
    L1Out,
    /// Final decoder output.
    #[serde(rename = "L2-Out")]
    L2Out,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuxKey {
    #[serde(rename = "f")]
    Functional,
    #[serde(rename = "c")]
    Contextual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuxValue {
    #[serde(rename = "f")]
    Functional,
    #[serde(rename = "c")]
    Contextual,
    #[serde(rename = "p")]
    Primitive,
}

impl AuxQuery {
    pub const ALL: [AuxQuery; 3] = [AuxQuery::L1Int, AuxQuery::L1Out, AuxQuery::L2Out];

    pub fn as_str(self) -> &'static str {
        match self {
            AuxQuery::L1Int => "L1-Int",
            AuxQuery::L1Out => "L1-Out",
            AuxQuery::L2Out => "L2-Out",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|q| q.as_str() == s)
    }
}

impl AuxKey {
    pub fn as_str(self) -> &'static str {
        match self {
            AuxKey::Functional => "f",
            AuxKey::Contextual => "c",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "f" => Some(AuxKey::Functional),
            "c" => Some(AuxKey::Contextual),
            _ => None,
        }
    }
}

impl AuxValue {
    pub fn as_str(self) -> &'static str {
        match self {
            AuxValue::Functional => "f",
            AuxValue::Contextual => "c",
            AuxValue::Primitive => "p",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "f" => Some(AuxValue::Functional),
            "c" => Some(AuxValue::Contextual),
            "p" => Some(AuxValue::Primitive),
            _ => None,
        }
    }
}

/// The key/value combinations the auxiliary head supports.
pub const AUX_KV_GRID: [(AuxKey, AuxValue); 4] = [
    (AuxKey::Functional, AuxValue::Contextual),
    (AuxKey::Functional, AuxValue::Functional),
    (AuxKey::Contextual, AuxValue::Contextual),
    (AuxKey::Contextual, AuxValue::Primitive),
];

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    pub aux_query_source: AuxQuery,
    pub aux_key_source: AuxKey,
    pub aux_value_source: AuxValue,
    pub embed_noise_sigma: f64,
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 2,
            heads: 2,
            head_dim: 64,
            ffn_dim: 256,
            max_len: 64,
            aux_query_source: AuxQuery::L1Int,
            aux_key_source: AuxKey::Functional,
            aux_value_source: AuxValue::Contextual,
            embed_noise_sigma: 0.1,
            dropout_rate: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn width(&self) -> usize {
        self.heads * self.head_dim
    }

    /// Double-precision-friendly miniature (width 8) for gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            layers: 2,
            heads: 2,
            head_dim: 4,
            ffn_dim: 16,
            max_len: 64,
            embed_noise_sigma: 0.0,
            dropout_rate: 0.0,
            ..ModelConfig::default()
        }
    }

    pub fn validate_aux_combo(&self) -> Result<()> {
        if AUX_KV_GRID
            .iter()
            .any(|&(k, v)| k == self.aux_key_source && v == self.aux_value_source)
        {
            Ok(())
        } else {
            Err(Error::InvalidCombo {
                key: self.aux_key_source.as_str().into(),
                value: self.aux_value_source.as_str().into(),
            })
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.head_dim == 0 {
            return Err(Error::BadConfig("layers/heads/head_dim must be > 0".into()));
        }
        self.validate_aux_combo()
    }
}

/// Ids of a jagged batch side: flat id list plus segment offsets.
#[derive(Clone, Debug)]
pub struct PackedIds {
    pub ids: Vec<usize>,
    pub offsets: Vec<usize>,
}

impl PackedIds {
    pub fn from_seqs<I: AsRef<[usize]>>(seqs: &[I]) -> PackedIds {
        let mut ids = Vec::new();
        let mut offsets = vec![0];
        for s in seqs {
            ids.extend_from_slice(s.as_ref());
            offsets.push(ids.len());
        }
        PackedIds { ids, offsets }
    }

    pub fn n_examples(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// A teacher-forcing batch. The three decoder channels share one offsets
/// vector; targets are the inputs shifted left with EOS appended.
#[derive(Clone, Debug)]
pub struct Batch {
    pub src: PackedIds,
    pub dec_offsets: Vec<usize>,
    pub act_in: Vec<usize>,
    pub aux1_in: Vec<usize>,
    pub aux2_in: Vec<usize>,
    pub act_tgt: Vec<usize>,
    pub aux1_tgt: Vec<usize>,
    pub aux2_tgt: Vec<usize>,
    /// Per example: whether the aux channels are supervised.
    pub aux_supervised: Vec<bool>,
    /// Per decoder row: `aux_supervised` expanded over positions.
    pub aux_row_mask: Vec<bool>,
}

impl Batch {
    pub fn build(examples: &[&LabeledExample], vocab: &VocabSet, max_len: usize) -> Result<Batch> {
        let mut src_seqs = Vec::with_capacity(examples.len());
        let mut dec_offsets = vec![0usize];
        let mut act_in = Vec::new();
        let mut aux1_in = Vec::new();
        let mut aux2_in = Vec::new();
        let mut act_tgt = Vec::new();
        let mut aux1_tgt = Vec::new();
        let mut aux2_tgt = Vec::new();
        let mut aux_supervised = Vec::with_capacity(examples.len());
        let mut aux_row_mask = Vec::new();
        for ex in examples {
            let t = ex.actions.len();
            if ex.aux1.len() != t || ex.aux2.len() != t {
                return Err(Error::LengthMismatch {
                    actions: t,
                    aux1: ex.aux1.len(),
                    aux2: ex.aux2.len(),
                });
            }
            if ex.tokens.len() > max_len || t + 1 > max_len {
                return Err(Error::BadConfig(format!(
                    "example `{}` exceeds max_len {max_len}",
                    ex.command_text()
                )));
            }
            let src: Vec<usize> = ex.tokens.iter().map(|&w| vocab.input_id(w)).collect();
            src_seqs.push(src);

            // Inputs: SOS then the gold sequence. Unsupervised examples feed
            // all-SOS aux channels. Targets: gold sequence then EOS; the EOS
            // is synchronized across all three channels.
            act_in.push(SOS);
            act_in.extend(ex.actions.iter().map(|&a| vocab.action_id(a)));
            act_tgt.extend(ex.actions.iter().map(|&a| vocab.action_id(a)));
            act_tgt.push(EOS);
            if ex.aux_supervised {
                aux1_in.push(SOS);
                aux1_in.extend(ex.aux1.iter().map(|&v| vocab.aux_id(v)));
                aux2_in.push(SOS);
                aux2_in.extend(ex.aux2.iter().map(|&v| vocab.aux_id(v)));
            } else {
                aux1_in.extend(std::iter::repeat(SOS).take(t + 1));
                aux2_in.extend(std::iter::repeat(SOS).take(t + 1));
            }
            aux1_tgt.extend(ex.aux1.iter().map(|&v| vocab.aux_id(v)));
            aux1_tgt.push(EOS);
            aux2_tgt.extend(ex.aux2.iter().map(|&v| vocab.aux_id(v)));
            aux2_tgt.push(EOS);
            aux_supervised.push(ex.aux_supervised);
            aux_row_mask.extend(std::iter::repeat(ex.aux_supervised).take(t + 1));
            dec_offsets.push(act_in.len());
        }
        Ok(Batch {
            src: PackedIds::from_seqs(&src_seqs),
            dec_offsets,
            act_in,
            aux1_in,
            aux2_in,
            act_tgt,
            aux1_tgt,
            aux2_tgt,
            aux_supervised,
            aux_row_mask,
        })
    }

    pub fn n_examples(&self) -> usize {
        self.src.n_examples()
    }
}

/// Forward-pass mode: training (noise + dropout from the given stream) or
/// deterministic evaluation.
pub enum Mode<'a> {
    Train(&'a mut SplitMix64),
    Eval,
}

/// A configured network: hyperparameters, vocabularies, weights, and the
/// constant positional table.
#[derive(Clone)]
pub struct Model<T: Scalar> {
    pub config: ModelConfig,
    pub vocab: VocabSet,
    pub params: Parameters<T>,
    pub(crate) pe: Array2<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, vocab: VocabSet, seed: u64) -> Result<Model<T>> {
        config.validate()?;
        let params = Parameters::init(&config, &vocab, seed);
        Ok(Self::from_parts(config, vocab, params))
    }

    /// Assemble a model from already-validated parts (checkpoint loading).
    pub fn from_parts(config: ModelConfig, vocab: VocabSet, params: Parameters<T>) -> Model<T> {
        let pe = layers::positional_encoding(config.max_len, config.width());
        Model {
            config,
            vocab,
            params,
            pe,
        }
    }
}
