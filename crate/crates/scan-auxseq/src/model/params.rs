//! Trainable tensors, their canonical ordering, and initialization.
//!
//! `Parameters` is reused for three roles — weights, gradients, and Adam
//! moment estimates — so the per-slot visitors below define one canonical
//! (name, tensor) order that optimizer steps, checkpoints, and the gradient
//! checker all share.

use crate::model::ModelConfig;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::vocab::VocabSet;
use ndarray::{Array1, Array2};

#[derive(Clone, Debug)]
pub struct AttentionParams<T> {
    pub wq: Array2<T>,
    pub bq: Array1<T>,
    /// No key bias: a constant added to every key shifts each score row
    /// uniformly, which the softmax cancels.
    pub wk: Array2<T>,
    pub wv: Array2<T>,
    pub bv: Array1<T>,
    pub wo: Array2<T>,
    pub bo: Array1<T>,
}

#[derive(Clone, Debug)]
pub struct LayerNormParams<T> {
    pub gain: Array1<T>,
    pub bias: Array1<T>,
}

#[derive(Clone, Debug)]
pub struct FfnParams<T> {
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
}

#[derive(Clone, Debug)]
pub struct EncoderLayerParams<T> {
    pub self_attn: AttentionParams<T>,
    pub ln1: LayerNormParams<T>,
    pub ffn: FfnParams<T>,
    pub ln2: LayerNormParams<T>,
}

#[derive(Clone, Debug)]
pub struct DecoderLayerParams<T> {
    pub self_attn: AttentionParams<T>,
    pub ln1: LayerNormParams<T>,
    pub cross_attn: AttentionParams<T>,
    pub ln2: LayerNormParams<T>,
    pub ffn: FfnParams<T>,
    pub ln3: LayerNormParams<T>,
}

/// All trainable arrays of the network.
#[derive(Clone, Debug)]
pub struct Parameters<T> {
    /// Functional (syntactic) input embeddings.
    pub e_f: Array2<T>,
    /// Primitive (semantic) input embeddings; the action head's values.
    pub e_p: Array2<T>,
    pub e_act: Array2<T>,
    pub e_aux1: Array2<T>,
    pub e_aux2: Array2<T>,
    pub enc: Vec<EncoderLayerParams<T>>,
    pub dec: Vec<DecoderLayerParams<T>>,
    pub act_attn: AttentionParams<T>,
    pub act_w: Array2<T>,
    pub act_b: Array1<T>,
    pub aux_attn: AttentionParams<T>,
    pub aux1_w: Array2<T>,
    pub aux1_b: Array1<T>,
    pub aux2_w: Array2<T>,
    pub aux2_b: Array1<T>,
}

pub enum SlotRef<'a, T> {
    Mat(&'a Array2<T>),
    Vec1(&'a Array1<T>),
}

pub enum SlotMut<'a, T> {
    Mat(&'a mut Array2<T>),
    Vec1(&'a mut Array1<T>),
}

impl<'a, T> SlotRef<'a, T> {
    pub fn len(&self) -> usize {
        match self {
            SlotRef::Mat(m) => m.len(),
            SlotRef::Vec1(v) => v.len(),
        }
    }
}

macro_rules! push_attn {
    ($out:ident, $prefix:expr, $a:expr, $wrap:ident) => {
        $out.push((format!("{}.wq", $prefix), $wrap::Mat(&mut $a.wq)));
        $out.push((format!("{}.bq", $prefix), $wrap::Vec1(&mut $a.bq)));
        $out.push((format!("{}.wk", $prefix), $wrap::Mat(&mut $a.wk)));
        $out.push((format!("{}.wv", $prefix), $wrap::Mat(&mut $a.wv)));
        $out.push((format!("{}.bv", $prefix), $wrap::Vec1(&mut $a.bv)));
        $out.push((format!("{}.wo", $prefix), $wrap::Mat(&mut $a.wo)));
        $out.push((format!("{}.bo", $prefix), $wrap::Vec1(&mut $a.bo)));
    };
}

macro_rules! push_attn_ref {
    ($out:ident, $prefix:expr, $a:expr) => {
        $out.push((format!("{}.wq", $prefix), SlotRef::Mat(&$a.wq)));
        $out.push((format!("{}.bq", $prefix), SlotRef::Vec1(&$a.bq)));
        $out.push((format!("{}.wk", $prefix), SlotRef::Mat(&$a.wk)));
        $out.push((format!("{}.wv", $prefix), SlotRef::Mat(&$a.wv)));
        $out.push((format!("{}.bv", $prefix), SlotRef::Vec1(&$a.bv)));
        $out.push((format!("{}.wo", $prefix), SlotRef::Mat(&$a.wo)));
        $out.push((format!("{}.bo", $prefix), SlotRef::Vec1(&$a.bo)));
    };
}

impl<T: Scalar> Parameters<T> {
    /// Canonical (name, tensor) listing. The order here is the contract for
    /// optimizer state and checkpoints.
    pub fn slots(&self) -> Vec<(String, SlotRef<'_, T>)> {
        let mut out: Vec<(String, SlotRef<'_, T>)> = Vec::with_capacity(128);
        out.push(("e_f".into(), SlotRef::Mat(&self.e_f)));
        out.push(("e_p".into(), SlotRef::Mat(&self.e_p)));
        out.push(("e_act".into(), SlotRef::Mat(&self.e_act)));
        out.push(("e_aux1".into(), SlotRef::Mat(&self.e_aux1)));
        out.push(("e_aux2".into(), SlotRef::Mat(&self.e_aux2)));
        for (i, l) in self.enc.iter().enumerate() {
            push_attn_ref!(out, format!("enc{i}.attn"), l.self_attn);
            out.push((format!("enc{i}.ln1.gain"), SlotRef::Vec1(&l.ln1.gain)));
            out.push((format!("enc{i}.ln1.bias"), SlotRef::Vec1(&l.ln1.bias)));
            out.push((format!("enc{i}.ffn.w1"), SlotRef::Mat(&l.ffn.w1)));
            out.push((format!("enc{i}.ffn.b1"), SlotRef::Vec1(&l.ffn.b1)));
            out.push((format!("enc{i}.ffn.w2"), SlotRef::Mat(&l.ffn.w2)));
            out.push((format!("enc{i}.ffn.b2"), SlotRef::Vec1(&l.ffn.b2)));
            out.push((format!("enc{i}.ln2.gain"), SlotRef::Vec1(&l.ln2.gain)));
            out.push((format!("enc{i}.ln2.bias"), SlotRef::Vec1(&l.ln2.bias)));
        }
        for (i, l) in self.dec.iter().enumerate() {
            push_attn_ref!(out, format!("dec{i}.self"), l.self_attn);
            out.push((format!("dec{i}.ln1.gain"), SlotRef::Vec1(&l.ln1.gain)));
            out.push((format!("dec{i}.ln1.bias"), SlotRef::Vec1(&l.ln1.bias)));
            push_attn_ref!(out, format!("dec{i}.cross"), l.cross_attn);
            out.push((format!("dec{i}.ln2.gain"), SlotRef::Vec1(&l.ln2.gain)));
            out.push((format!("dec{i}.ln2.bias"), SlotRef::Vec1(&l.ln2.bias)));
            out.push((format!("dec{i}.ffn.w1"), SlotRef::Mat(&l.ffn.w1)));
            out.push((format!("dec{i}.ffn.b1"), SlotRef::Vec1(&l.ffn.b1)));
            out.push((format!("dec{i}.ffn.w2"), SlotRef::Mat(&l.ffn.w2)));
            out.push((format!("dec{i}.ffn.b2"), SlotRef::Vec1(&l.ffn.b2)));
            out.push((format!("dec{i}.ln3.gain"), SlotRef::Vec1(&l.ln3.gain)));
            out.push((format!("dec{i}.ln3.bias"), SlotRef::Vec1(&l.ln3.bias)));
        }
        push_attn_ref!(out, "act_head.attn", self.act_attn);
        out.push(("act_head.w".into(), SlotRef::Mat(&self.act_w)));
        out.push(("act_head.b".into(), SlotRef::Vec1(&self.act_b)));
        push_attn_ref!(out, "aux_head.attn", self.aux_attn);
        out.push(("aux_head.w1".into(), SlotRef::Mat(&self.aux1_w)));
        out.push(("aux_head.b1".into(), SlotRef::Vec1(&self.aux1_b)));
        out.push(("aux_head.w2".into(), SlotRef::Mat(&self.aux2_w)));
        out.push(("aux_head.b2".into(), SlotRef::Vec1(&self.aux2_b)));
        out
    }

    /// Mutable variant of [`Parameters::slots`], same order.
    pub fn slots_mut(&mut self) -> Vec<(String, SlotMut<'_, T>)> {
        let mut out: Vec<(String, SlotMut<'_, T>)> = Vec::with_capacity(128);
        out.push(("e_f".into(), SlotMut::Mat(&mut self.e_f)));
        out.push(("e_p".into(), SlotMut::Mat(&mut self.e_p)));
        out.push(("e_act".into(), SlotMut::Mat(&mut self.e_act)));
        out.push(("e_aux1".into(), SlotMut::Mat(&mut self.e_aux1)));
        out.push(("e_aux2".into(), SlotMut::Mat(&mut self.e_aux2)));
        for (i, l) in self.enc.iter_mut().enumerate() {
            push_attn!(out, format!("enc{i}.attn"), l.self_attn, SlotMut);
            out.push((format!("enc{i}.ln1.gain"), SlotMut::Vec1(&mut l.ln1.gain)));
            out.push((format!("enc{i}.ln1.bias"), SlotMut::Vec1(&mut l.ln1.bias)));
            out.push((format!("enc{i}.ffn.w1"), SlotMut::Mat(&mut l.ffn.w1)));
            out.push((format!("enc{i}.ffn.b1"), SlotMut::Vec1(&mut l.ffn.b1)));
            out.push((format!("enc{i}.ffn.w2"), SlotMut::Mat(&mut l.ffn.w2)));
            out.push((format!("enc{i}.ffn.b2"), SlotMut::Vec1(&mut l.ffn.b2)));
            out.push((format!("enc{i}.ln2.gain"), SlotMut::Vec1(&mut l.ln2.gain)));
            out.push((format!("enc{i}.ln2.bias"), SlotMut::Vec1(&mut l.ln2.bias)));
        }
        for (i, l) in self.dec.iter_mut().enumerate() {
            push_attn!(out, format!("dec{i}.self"), l.self_attn, SlotMut);
            out.push((format!("dec{i}.ln1.gain"), SlotMut::Vec1(&mut l.ln1.gain)));
            out.push((format!("dec{i}.ln1.bias"), SlotMut::Vec1(&mut l.ln1.bias)));
            push_attn!(out, format!("dec{i}.cross"), l.cross_attn, SlotMut);
            out.push((format!("dec{i}.ln2.gain"), SlotMut::Vec1(&mut l.ln2.gain)));
            out.push((format!("dec{i}.ln2.bias"), SlotMut::Vec1(&mut l.ln2.bias)));
            out.push((format!("dec{i}.ffn.w1"), SlotMut::Mat(&mut l.ffn.w1)));
            out.push((format!("dec{i}.ffn.b1"), SlotMut::Vec1(&mut l.ffn.b1)));
            out.push((format!("dec{i}.ffn.w2"), SlotMut::Mat(&mut l.ffn.w2)));
            out.push((format!("dec{i}.ffn.b2"), SlotMut::Vec1(&mut l.ffn.b2)));
            out.push((format!("dec{i}.ln3.gain"), SlotMut::Vec1(&mut l.ln3.gain)));
            out.push((format!("dec{i}.ln3.bias"), SlotMut::Vec1(&mut l.ln3.bias)));
        }
        push_attn!(out, "act_head.attn", self.act_attn, SlotMut);
        out.push(("act_head.w".into(), SlotMut::Mat(&mut self.act_w)));
        out.push(("act_head.b".into(), SlotMut::Vec1(&mut self.act_b)));
        push_attn!(out, "aux_head.attn", self.aux_attn, SlotMut);
        out.push(("aux_head.w1".into(), SlotMut::Mat(&mut self.aux1_w)));
        out.push(("aux_head.b1".into(), SlotMut::Vec1(&mut self.aux1_b)));
        out.push(("aux_head.w2".into(), SlotMut::Mat(&mut self.aux2_w)));
        out.push(("aux_head.b2".into(), SlotMut::Vec1(&mut self.aux2_b)));
        out
    }

    pub fn zeros_like(&self) -> Parameters<T> {
        let mut out = self.clone();
        for (_, slot) in out.slots_mut() {
            match slot {
                SlotMut::Mat(m) => m.fill(T::zero()),
                SlotMut::Vec1(v) => v.fill(T::zero()),
            }
        }
        out
    }

    pub fn num_values(&self) -> usize {
        self.slots().iter().map(|(_, s)| s.len()).sum()
    }

    pub fn all_finite(&self) -> Option<String> {
        for (name, slot) in self.slots() {
            let bad = match slot {
                SlotRef::Mat(m) => m.iter().any(|x| !x.is_finite()),
                SlotRef::Vec1(v) => v.iter().any(|x| !x.is_finite()),
            };
            if bad {
                return Some(name);
            }
        }
        None
    }
}

fn gaussian_mat<T: Scalar>(rows: usize, cols: usize, std: f64, rng: &mut SplitMix64) -> Array2<T> {
    Array2::from_shape_fn((rows, cols), |_| T::from_f64(rng.next_gaussian() * std))
}

/// Xavier/Glorot uniform for a (fan_in, fan_out) matrix.
fn xavier_mat<T: Scalar>(rows: usize, cols: usize, rng: &mut SplitMix64) -> Array2<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| {
        T::from_f64((rng.next_f64() * 2.0 - 1.0) * limit)
    })
}

fn attn_params<T: Scalar>(d: usize, rng: &mut SplitMix64) -> AttentionParams<T> {
    AttentionParams {
        wq: xavier_mat(d, d, rng),
        bq: Array1::zeros(d),
        wk: xavier_mat(d, d, rng),
        wv: xavier_mat(d, d, rng),
        bv: Array1::zeros(d),
        wo: xavier_mat(d, d, rng),
        bo: Array1::zeros(d),
    }
}

fn ln_params<T: Scalar>(d: usize) -> LayerNormParams<T> {
    LayerNormParams {
        gain: Array1::ones(d),
        bias: Array1::zeros(d),
    }
}

fn ffn_params<T: Scalar>(d: usize, ffn: usize, rng: &mut SplitMix64) -> FfnParams<T> {
    FfnParams {
        w1: xavier_mat(d, ffn, rng),
        b1: Array1::zeros(ffn),
        w2: xavier_mat(ffn, d, rng),
        b2: Array1::zeros(d),
    }
}

impl<T: Scalar> Parameters<T> {
    pub fn init(config: &ModelConfig, vocab: &VocabSet, seed: u64) -> Parameters<T> {
        let d = config.width();
        let mut rng = SplitMix64::new(seed);
        // Unit-scale embeddings keep the training noise (sigma ~ 0.1) a
        // perturbation rather than the dominant signal, and sit at the same
        // magnitude as the positional encodings.
        let emb_std = 1.0;
        let enc = (0..config.layers)
            .map(|_| EncoderLayerParams {
                self_attn: attn_params(d, &mut rng),
                ln1: ln_params(d),
                ffn: ffn_params(d, config.ffn_dim, &mut rng),
                ln2: ln_params(d),
            })
            .collect();
        let dec = (0..config.layers)
            .map(|_| DecoderLayerParams {
                self_attn: attn_params(d, &mut rng),
                ln1: ln_params(d),
                cross_attn: attn_params(d, &mut rng),
                ln2: ln_params(d),
                ffn: ffn_params(d, config.ffn_dim, &mut rng),
                ln3: ln_params(d),
            })
            .collect();
        Parameters {
            e_f: gaussian_mat(vocab.input_size(), d, emb_std, &mut rng),
            e_p: gaussian_mat(vocab.input_size(), d, emb_std, &mut rng),
            e_act: gaussian_mat(vocab.action_size(), d, emb_std, &mut rng),
            e_aux1: gaussian_mat(vocab.aux1_size(), d, emb_std, &mut rng),
            e_aux2: gaussian_mat(vocab.aux2_size(), d, emb_std, &mut rng),
            enc,
            dec,
            act_attn: attn_params(d, &mut rng),
            act_w: xavier_mat(d, vocab.action_size(), &mut rng),
            act_b: Array1::zeros(vocab.action_size()),
            aux_attn: attn_params(d, &mut rng),
            aux1_w: xavier_mat(d, vocab.aux1_size(), &mut rng),
            aux1_b: Array1::zeros(vocab.aux1_size()),
            aux2_w: xavier_mat(d, vocab.aux2_size(), &mut rng),
            aux2_b: Array1::zeros(vocab.aux2_size()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn slot_listing_is_consistent() {
        let config = ModelConfig::tiny();
        let vocab = VocabSet::standard();
        let mut p: Parameters<f64> = Parameters::init(&config, &vocab, 1);
        let names: Vec<String> = p.slots().into_iter().map(|(n, _)| n).collect();
        let names_mut: Vec<String> = p.slots_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, names_mut);
        let unique: std::collections::HashSet<&String> = names.iter().collect();
        assert_eq!(unique.len(), names.len(), "duplicate slot names");
        // 5 embeddings + 2*15 encoder + 2*24 decoder + 9 action head + 11 aux head
        assert_eq!(names.len(), 103);
    }

    #[test]
    fn init_is_deterministic_and_finite() {
        let config = ModelConfig::tiny();
        let vocab = VocabSet::standard();
        let a: Parameters<f64> = Parameters::init(&config, &vocab, 7);
        let b: Parameters<f64> = Parameters::init(&config, &vocab, 7);
        for ((_, x), (_, y)) in a.slots().into_iter().zip(b.slots()) {
            match (x, y) {
                (SlotRef::Mat(m1), SlotRef::Mat(m2)) => assert_eq!(m1, m2),
                (SlotRef::Vec1(v1), SlotRef::Vec1(v2)) => assert_eq!(v1, v2),
                _ => panic!("slot kind mismatch"),
            }
        }
        assert!(a.all_finite().is_none());
    }
}
