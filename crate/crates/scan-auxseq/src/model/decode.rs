//! Incremental joint greedy decoding.
//!
//! Inference feeds back the argmax ids of all three channels. The encoder
//! output and every attention target that does not depend on decoder state
//! (cross-attention keys/values, both heads' keys/values) are projected once
//! per example; the decoder self-attention keys/values grow row by row.
//! Decoding stops at the action channel's EOS or at `max_len`, whichever
//! comes first; the auxiliary channels stop with it.

use super::forward::DecoderTrace;
use super::layers::*;
use super::{Mode, Model};
use crate::scalar::Scalar;
use crate::vocab::{EOS, SOS};
use ndarray::{concatenate, s, Array2, Axis};
use rayon::prelude::*;

/// Result of decoding one command. Sequences are vocab ids, EOS excluded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub actions: Vec<usize>,
    pub aux1: Vec<usize>,
    pub aux2: Vec<usize>,
    /// True when `max_len` was hit before the action channel emitted EOS.
    pub truncated: bool,
}

/// Argmax with ties broken toward the lowest id.
fn argmax_row<T: Scalar>(logits: &Array2<T>, row: usize) -> usize {
    let r = logits.row(row);
    let mut best = 0;
    for (i, &v) in r.iter().enumerate() {
        if v > r[best] {
            best = i;
        }
    }
    best
}

/// Attention of a single query row over a cached key/value block.
fn attn_row<T: Scalar>(
    q: &Array2<T>,
    k: &Array2<T>,
    v: &Array2<T>,
    heads: usize,
) -> Array2<T> {
    let d = q.ncols();
    let dh = d / heads;
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());
    let mut out = Array2::zeros((1, d));
    for h in 0..heads {
        let cols = h * dh..(h + 1) * dh;
        let qs = q.slice(s![0..1, cols.clone()]);
        let ks = k.slice(s![.., cols.clone()]);
        let vs = v.slice(s![.., cols.clone()]);
        let mut scores = qs.dot(&ks.t());
        scores.mapv_inplace(|x| x * scale);
        let mx = scores.iter().copied().fold(T::from_f64(f64::NEG_INFINITY), T::max);
        let mut sum = T::zero();
        for x in scores.iter_mut() {
            *x = (*x - mx).exp();
            sum = sum + *x;
        }
        for x in scores.iter_mut() {
            *x = *x / sum;
        }
        let o = scores.dot(&vs);
        out.slice_mut(s![0..1, cols]).assign(&o);
    }
    out
}

fn project<T: Scalar>(x: &Array2<T>, w: &Array2<T>, b: &ndarray::Array1<T>) -> Array2<T> {
    linear(x, w, b)
}

struct LayerKv<T> {
    self_k: Array2<T>,
    self_v: Array2<T>,
    cross_k: Array2<T>,
    cross_v: Array2<T>,
}

/// Per-example decoding state: fixed projections plus growing KV rows.
pub struct IncrementalState<T> {
    layers: Vec<LayerKv<T>>,
    act_k: Array2<T>,
    act_v: Array2<T>,
    aux_k: Array2<T>,
    aux_v: Array2<T>,
    t: usize,
}

pub struct StepOutput<T> {
    pub act_logits: Array2<T>,
    pub aux1_logits: Array2<T>,
    pub aux2_logits: Array2<T>,
    pub l1_int: Array2<T>,
    pub l1_out: Array2<T>,
    pub l2_out: Array2<T>,
}

impl<T: Scalar> Model<T> {
    /// Encode one command and pre-project every decoder-independent block.
    pub fn begin_decode(&self, src_ids: &[usize]) -> IncrementalState<T> {
        let off = [0, src_ids.len()];
        let (f, p) = self.embed_input(src_ids, &mut Mode::Eval);
        let c = self.encode(&f, &off);
        let layers = self
            .params
            .dec
            .iter()
            .map(|lp| LayerKv {
                self_k: Array2::zeros((0, self.config.width())),
                self_v: Array2::zeros((0, self.config.width())),
                cross_k: linear_nb(&c, &lp.cross_attn.wk),
                cross_v: project(&c, &lp.cross_attn.wv, &lp.cross_attn.bv),
            })
            .collect();
        let key_src = |k: super::AuxKey| match k {
            super::AuxKey::Functional => &f,
            super::AuxKey::Contextual => &c,
        };
        let val_src = |v: super::AuxValue| match v {
            super::AuxValue::Functional => &f,
            super::AuxValue::Contextual => &c,
            super::AuxValue::Primitive => &p,
        };
        let aux_k = linear_nb(key_src(self.config.aux_key_source), &self.params.aux_attn.wk);
        let aux_v = project(
            val_src(self.config.aux_value_source),
            &self.params.aux_attn.wv,
            &self.params.aux_attn.bv,
        );
        IncrementalState {
            act_k: linear_nb(&c, &self.params.act_attn.wk),
            act_v: project(&p, &self.params.act_attn.wv, &self.params.act_attn.bv),
            aux_k,
            aux_v,
            layers,
            t: 0,
        }
    }

    /// One decoding step: consume the three ids produced at the previous
    /// step (SOS at step 0) and return logits and trace rows for this step.
    pub fn step_decode(
        &self,
        state: &mut IncrementalState<T>,
        act_id: usize,
        aux1_id: usize,
        aux2_id: usize,
    ) -> StepOutput<T> {
        let heads = self.config.heads;
        let t = state.t;
        let mut y = embed(&self.params.e_act, &[act_id]);
        y += &embed(&self.params.e_aux1, &[aux1_id]);
        y += &embed(&self.params.e_aux2, &[aux2_id]);
        {
            let mut row = y.row_mut(0);
            row += &self.pe.row(t);
        }

        let mut l1_int = None;
        let mut l1_out = None;
        for (i, lp) in self.params.dec.iter().enumerate() {
            let kv = &mut state.layers[i];
            // Causal self-attention over the cached prefix plus this row.
            let q = project(&y, &lp.self_attn.wq, &lp.self_attn.bq);
            let k_new = linear_nb(&y, &lp.self_attn.wk);
            let v_new = project(&y, &lp.self_attn.wv, &lp.self_attn.bv);
            kv.self_k = concatenate![Axis(0), kv.self_k, k_new];
            kv.self_v = concatenate![Axis(0), kv.self_v, v_new];
            let core = attn_row(&q, &kv.self_k, &kv.self_v, heads);
            let a = project(&core, &lp.self_attn.wo, &lp.self_attn.bo);
            let r1 = &y + &a;
            let (h, _) = layer_norm(&r1, &lp.ln1);
            if i == 0 {
                l1_int = Some(h.clone());
            }
            // Cross-attention over the fixed encoder projections.
            let q2 = project(&h, &lp.cross_attn.wq, &lp.cross_attn.bq);
            let core2 = attn_row(&q2, &kv.cross_k, &kv.cross_v, heads);
            let x2 = project(&core2, &lp.cross_attn.wo, &lp.cross_attn.bo);
            let r2 = &h + &x2;
            let (n2, _) = layer_norm(&r2, &lp.ln2);
            let (fo, _) = ffn(&n2, &lp.ffn);
            let r3 = &n2 + &fo;
            let (out, _) = layer_norm(&r3, &lp.ln3);
            if i == 0 {
                l1_out = Some(out.clone());
            }
            y = out;
        }
        let l2_out = y;
        let l1_int = l1_int.unwrap();
        let l1_out = l1_out.unwrap();

        // Action head.
        let q_act = project(&l2_out, &self.params.act_attn.wq, &self.params.act_attn.bq);
        let core = attn_row(&q_act, &state.act_k, &state.act_v, heads);
        let o_act = project(&core, &self.params.act_attn.wo, &self.params.act_attn.bo);
        let act_logits = linear(&o_act, &self.params.act_w, &self.params.act_b);

        // Auxiliary head.
        let q_src = match self.config.aux_query_source {
            super::AuxQuery::L1Int => &l1_int,
            super::AuxQuery::L1Out => &l1_out,
            super::AuxQuery::L2Out => &l2_out,
        };
        let q_aux = project(q_src, &self.params.aux_attn.wq, &self.params.aux_attn.bq);
        let core = attn_row(&q_aux, &state.aux_k, &state.aux_v, heads);
        let o_aux = project(&core, &self.params.aux_attn.wo, &self.params.aux_attn.bo);
        let aux1_logits = linear(&o_aux, &self.params.aux1_w, &self.params.aux1_b);
        let aux2_logits = linear(&o_aux, &self.params.aux2_w, &self.params.aux2_b);

        state.t += 1;
        StepOutput {
            act_logits,
            aux1_logits,
            aux2_logits,
            l1_int,
            l1_out,
            l2_out,
        }
    }

    /// Greedy joint decoding of one command.
    pub fn greedy_decode(&self, src_ids: &[usize], max_len: usize) -> Decoded {
        let mut state = self.begin_decode(src_ids);
        let (mut act, mut a1, mut a2) = (SOS, SOS, SOS);
        let mut out = Decoded {
            actions: Vec::new(),
            aux1: Vec::new(),
            aux2: Vec::new(),
            truncated: false,
        };
        for _ in 0..max_len {
            let step = self.step_decode(&mut state, act, a1, a2);
            act = argmax_row(&step.act_logits, 0);
            a1 = argmax_row(&step.aux1_logits, 0);
            a2 = argmax_row(&step.aux2_logits, 0);
            if act == EOS {
                return out;
            }
            out.actions.push(act);
            out.aux1.push(a1);
            out.aux2.push(a2);
        }
        out.truncated = true;
        out
    }

    /// Greedy decoding over many commands; examples decode independently and
    /// in parallel, results keep input order.
    pub fn greedy_decode_batch(&self, srcs: &[Vec<usize>], max_len: usize) -> Vec<Decoded> {
        srcs.par_iter()
            .map(|src| self.greedy_decode(src, max_len))
            .collect()
    }

    /// Teacher-forced trace computed through the incremental path, for
    /// cross-checking against the batched [`Model::decode`].
    pub fn incremental_trace(
        &self,
        src_ids: &[usize],
        act_in: &[usize],
        aux1_in: &[usize],
        aux2_in: &[usize],
    ) -> DecoderTrace<T> {
        let mut state = self.begin_decode(src_ids);
        let n = act_in.len();
        let d = self.config.width();
        let mut trace = DecoderTrace {
            l1_int: Array2::zeros((n, d)),
            l1_out: Array2::zeros((n, d)),
            l2_out: Array2::zeros((n, d)),
        };
        for i in 0..n {
            let step = self.step_decode(&mut state, act_in[i], aux1_in[i], aux2_in[i]);
            trace.l1_int.row_mut(i).assign(&step.l1_int.row(0));
            trace.l1_out.row_mut(i).assign(&step.l1_out.row(0));
            trace.l2_out.row_mut(i).assign(&step.l2_out.row(0));
        }
        trace
    }
}
