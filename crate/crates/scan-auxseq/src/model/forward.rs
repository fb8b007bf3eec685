//! Teacher-forced forward pass, loss, and the hand-written backward pass.
//!
//! The backward pass mirrors the forward graph exactly; every routing choice
//! (which trace vector feeds the auxiliary head, which arrays serve as its
//! keys/values) has a matching gradient-accumulation branch. Correctness is
//! enforced by the finite-difference checker in `gradcheck`.

use super::layers::*;
use super::params::{DecoderLayerParams, EncoderLayerParams, Parameters};
use super::{AuxKey, AuxQuery, AuxValue, Batch, Mode, Model};
use crate::scalar::Scalar;
use ndarray::Array2;

pub struct EncLayerCache<T> {
    x_in: Array2<T>,
    attn: MhaCache<T>,
    drop1: Option<Array2<T>>,
    ln1: LnCache<T>,
    ffn: FfnCache<T>,
    drop2: Option<Array2<T>>,
    ln2: LnCache<T>,
}

pub struct DecLayerCache<T> {
    y_in: Array2<T>,
    self_attn: MhaCache<T>,
    drop1: Option<Array2<T>>,
    ln1: LnCache<T>,
    /// Self-attention sublayer output ("L1-Int" when this is layer 0).
    pub h: Array2<T>,
    cross_attn: MhaCache<T>,
    drop2: Option<Array2<T>>,
    ln2: LnCache<T>,
    ffn: FfnCache<T>,
    drop3: Option<Array2<T>>,
    ln3: LnCache<T>,
    /// Layer output ("L1-Out" for layer 0, "L2-Out" for the last layer).
    pub out: Array2<T>,
}

/// The three decoder vectors exposed per position, as query candidates for
/// the auxiliary head.
#[derive(Clone, Debug)]
pub struct DecoderTrace<T> {
    pub l1_int: Array2<T>,
    pub l1_out: Array2<T>,
    pub l2_out: Array2<T>,
}

impl<T: Scalar> DecoderTrace<T> {
    pub fn select(&self, q: AuxQuery) -> &Array2<T> {
        match q {
            AuxQuery::L1Int => &self.l1_int,
            AuxQuery::L1Out => &self.l1_out,
            AuxQuery::L2Out => &self.l2_out,
        }
    }
}

pub struct ForwardCache<T> {
    /// Functional embeddings after training noise, un-scaled.
    pub f: Array2<T>,
    /// Primitive embeddings after training noise, un-scaled.
    pub p: Array2<T>,
    enc_layers: Vec<EncLayerCache<T>>,
    pub c: Array2<T>,
    dec_layers: Vec<DecLayerCache<T>>,
    act_mha: MhaCache<T>,
    o_act: Array2<T>,
    aux_mha: MhaCache<T>,
    o_aux: Array2<T>,
}

pub struct ForwardOutput<T> {
    pub act_logits: Array2<T>,
    pub aux1_logits: Array2<T>,
    pub aux2_logits: Array2<T>,
    pub trace: DecoderTrace<T>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub action_ce: f64,
    pub aux1_ce: f64,
    pub aux2_ce: f64,
    pub reg: f64,
}

/// Coefficient of the squared-embedding penalty on `e_f` and `e_p`.
pub const EMBED_REG: f64 = 0.01;

fn maybe_dropout<T: Scalar>(x: &mut Array2<T>, rate: f64, mode: &mut Mode) -> Option<Array2<T>> {
    match mode {
        Mode::Train(rng) if rate > 0.0 => Some(dropout_inplace(x, rate, rng)),
        _ => None,
    }
}

fn apply_mask<T: Scalar>(dx: &mut Array2<T>, mask: &Option<Array2<T>>) {
    if let Some(m) = mask {
        *dx *= m;
    }
}

impl<T: Scalar> Model<T> {
    /// Dual embedding lookup; adds Gaussian noise to both tables' outputs in
    /// training mode.
    pub fn embed_input(&self, ids: &[usize], mode: &mut Mode) -> (Array2<T>, Array2<T>) {
        let mut f = embed(&self.params.e_f, ids);
        let mut p = embed(&self.params.e_p, ids);
        if let Mode::Train(rng) = mode {
            let sigma = self.config.embed_noise_sigma;
            if sigma > 0.0 {
                f.mapv_inplace(|x| x + T::from_f64(rng.next_gaussian() * sigma));
                p.mapv_inplace(|x| x + T::from_f64(rng.next_gaussian() * sigma));
            }
        }
        (f, p)
    }

    fn encoder_layer_forward(
        &self,
        x: &Array2<T>,
        off: &[usize],
        p: &EncoderLayerParams<T>,
        mode: &mut Mode,
    ) -> (Array2<T>, EncLayerCache<T>) {
        let rate = self.config.dropout_rate;
        let (mut a, attn) = mha(x, x, x, off, off, &p.self_attn, self.config.heads, false);
        let drop1 = maybe_dropout(&mut a, rate, mode);
        let r1 = x + &a;
        let (n1, ln1) = layer_norm(&r1, &p.ln1);
        let (mut fo, ffn_cache) = ffn(&n1, &p.ffn);
        let drop2 = maybe_dropout(&mut fo, rate, mode);
        let r2 = &n1 + &fo;
        let (y, ln2) = layer_norm(&r2, &p.ln2);
        (
            y,
            EncLayerCache {
                x_in: x.clone(),
                attn,
                drop1,
                ln1,
                ffn: ffn_cache,
                drop2,
                ln2,
            },
        )
    }

    fn encoder_layer_backward(
        &self,
        dy: &Array2<T>,
        off: &[usize],
        cache: &EncLayerCache<T>,
        p: &EncoderLayerParams<T>,
        g: &mut EncoderLayerParams<T>,
    ) -> Array2<T> {
        let dr2 = layer_norm_backward(dy, &cache.ln2, &p.ln2, &mut g.ln2.gain, &mut g.ln2.bias);
        let mut dfo = dr2.clone();
        apply_mask(&mut dfo, &cache.drop2);
        let mut dn1 = dr2;
        dn1 += &ffn_backward(&dfo, &cache.ffn, &p.ffn, &mut g.ffn);
        let dr1 = layer_norm_backward(&dn1, &cache.ln1, &p.ln1, &mut g.ln1.gain, &mut g.ln1.bias);
        let mut da = dr1.clone();
        apply_mask(&mut da, &cache.drop1);
        let (dq, dk, dv) = mha_backward(
            &da,
            &cache.attn,
            &cache.x_in,
            &cache.x_in,
            &cache.x_in,
            off,
            off,
            &p.self_attn,
            &mut g.self_attn,
            self.config.heads,
        );
        let mut dx = dr1;
        dx += &dq;
        dx += &dk;
        dx += &dv;
        dx
    }

    /// Contextualize the (noised) functional embeddings: add positions and
    /// run the encoder stack.
    pub(crate) fn encoder_forward(
        &self,
        f: &Array2<T>,
        off: &[usize],
        mode: &mut Mode,
    ) -> (Array2<T>, Vec<EncLayerCache<T>>) {
        let mut x = f.clone();
        add_positions(&mut x, off, &self.pe);
        let mut caches = Vec::with_capacity(self.params.enc.len());
        for layer in &self.params.enc {
            let (y, cache) = self.encoder_layer_forward(&x, off, layer, mode);
            caches.push(cache);
            x = y;
        }
        (x, caches)
    }

    /// Eval-mode encoding of functional embeddings (public surface).
    pub fn encode(&self, f: &Array2<T>, off: &[usize]) -> Array2<T> {
        self.encoder_forward(f, off, &mut Mode::Eval).0
    }

    fn decoder_layer_forward(
        &self,
        y: &Array2<T>,
        dec_off: &[usize],
        c: &Array2<T>,
        src_off: &[usize],
        p: &DecoderLayerParams<T>,
        mode: &mut Mode,
    ) -> DecLayerCache<T> {
        let rate = self.config.dropout_rate;
        let heads = self.config.heads;
        let (mut a, self_attn) = mha(y, y, y, dec_off, dec_off, &p.self_attn, heads, true);
        let drop1 = maybe_dropout(&mut a, rate, mode);
        let r1 = y + &a;
        let (h, ln1) = layer_norm(&r1, &p.ln1);
        let (mut x2, cross_attn) = mha(&h, c, c, dec_off, src_off, &p.cross_attn, heads, false);
        let drop2 = maybe_dropout(&mut x2, rate, mode);
        let r2 = &h + &x2;
        let (n2, ln2) = layer_norm(&r2, &p.ln2);
        let (mut fo, ffn_cache) = ffn(&n2, &p.ffn);
        let drop3 = maybe_dropout(&mut fo, rate, mode);
        let r3 = &n2 + &fo;
        let (out, ln3) = layer_norm(&r3, &p.ln3);
        DecLayerCache {
            y_in: y.clone(),
            self_attn,
            drop1,
            ln1,
            h,
            cross_attn,
            drop2,
            ln2,
            ffn: ffn_cache,
            drop3,
            ln3,
            out,
        }
    }

    /// Backward through one decoder layer. `extra_dh` is an additional
    /// gradient arriving directly at the self-attention sublayer output
    /// (the auxiliary head's query path when it reads "L1-Int").
    /// Accumulates the cross-attention key/value gradients into `dc`.
    #[allow(clippy::too_many_arguments)]
    fn decoder_layer_backward(
        &self,
        dout: &Array2<T>,
        extra_dh: Option<&Array2<T>>,
        dec_off: &[usize],
        c: &Array2<T>,
        src_off: &[usize],
        dc: &mut Array2<T>,
        cache: &DecLayerCache<T>,
        p: &DecoderLayerParams<T>,
        g: &mut DecoderLayerParams<T>,
    ) -> Array2<T> {
        let heads = self.config.heads;
        let dr3 = layer_norm_backward(dout, &cache.ln3, &p.ln3, &mut g.ln3.gain, &mut g.ln3.bias);
        let mut dfo = dr3.clone();
        apply_mask(&mut dfo, &cache.drop3);
        let mut dn2 = dr3;
        dn2 += &ffn_backward(&dfo, &cache.ffn, &p.ffn, &mut g.ffn);
        let dr2 = layer_norm_backward(&dn2, &cache.ln2, &p.ln2, &mut g.ln2.gain, &mut g.ln2.bias);
        let mut dx2 = dr2.clone();
        apply_mask(&mut dx2, &cache.drop2);
        let (dq, dk, dv) = mha_backward(
            &dx2,
            &cache.cross_attn,
            &cache.h,
            c,
            c,
            dec_off,
            src_off,
            &p.cross_attn,
            &mut g.cross_attn,
            heads,
        );
        *dc += &dk;
        *dc += &dv;
        let mut dh = dr2;
        dh += &dq;
        if let Some(extra) = extra_dh {
            dh += extra;
        }
        let dr1 = layer_norm_backward(&dh, &cache.ln1, &p.ln1, &mut g.ln1.gain, &mut g.ln1.bias);
        let mut da = dr1.clone();
        apply_mask(&mut da, &cache.drop1);
        let (dq, dk, dv) = mha_backward(
            &da,
            &cache.self_attn,
            &cache.y_in,
            &cache.y_in,
            &cache.y_in,
            dec_off,
            dec_off,
            &p.self_attn,
            &mut g.self_attn,
            heads,
        );
        let mut dy = dr1;
        dy += &dq;
        dy += &dk;
        dy += &dv;
        dy
    }

    fn decoder_input(&self, batch: &Batch) -> Array2<T> {
        let mut x = embed(&self.params.e_act, &batch.act_in);
        x += &embed(&self.params.e_aux1, &batch.aux1_in);
        x += &embed(&self.params.e_aux2, &batch.aux2_in);
        add_positions(&mut x, &batch.dec_offsets, &self.pe);
        x
    }

    pub(crate) fn decoder_forward(
        &self,
        batch: &Batch,
        c: &Array2<T>,
        mode: &mut Mode,
    ) -> Vec<DecLayerCache<T>> {
        let mut y = self.decoder_input(batch);
        let mut caches = Vec::with_capacity(self.params.dec.len());
        for layer in &self.params.dec {
            let cache = self.decoder_layer_forward(
                &y,
                &batch.dec_offsets,
                c,
                &batch.src.offsets,
                layer,
                mode,
            );
            y = cache.out.clone();
            caches.push(cache);
        }
        caches
    }

    fn trace_from_caches(dec_layers: &[DecLayerCache<T>]) -> DecoderTrace<T> {
        DecoderTrace {
            l1_int: dec_layers[0].h.clone(),
            l1_out: dec_layers[0].out.clone(),
            l2_out: dec_layers.last().unwrap().out.clone(),
        }
    }

    /// Teacher-forced decoding (eval mode): returns the per-position trace.
    /// The three input channels must already be SOS-prefixed and equal-length.
    pub fn decode(
        &self,
        c: &Array2<T>,
        src_off: &[usize],
        act_in: &[usize],
        aux1_in: &[usize],
        aux2_in: &[usize],
        dec_off: &[usize],
    ) -> crate::Result<DecoderTrace<T>> {
        if act_in.len() != aux1_in.len() || act_in.len() != aux2_in.len() {
            return Err(crate::Error::LengthMismatch {
                actions: act_in.len(),
                aux1: aux1_in.len(),
                aux2: aux2_in.len(),
            });
        }
        let mut y = embed(&self.params.e_act, act_in);
        y += &embed(&self.params.e_aux1, aux1_in);
        y += &embed(&self.params.e_aux2, aux2_in);
        add_positions(&mut y, dec_off, &self.pe);
        let mut caches = Vec::new();
        for layer in &self.params.dec {
            let cache =
                self.decoder_layer_forward(&y, dec_off, c, src_off, layer, &mut Mode::Eval);
            y = cache.out.clone();
            caches.push(cache);
        }
        Ok(Self::trace_from_caches(&caches))
    }

    /// Action logits: attention with the decoder output as query, the
    /// contextualized input as keys, and the un-contextualized primitive
    /// embeddings as values, followed by an affine projection.
    pub fn action_head(
        &self,
        z: &Array2<T>,
        c: &Array2<T>,
        p: &Array2<T>,
        dec_off: &[usize],
        src_off: &[usize],
    ) -> Array2<T> {
        let (o, _) = mha(
            z,
            c,
            p,
            dec_off,
            src_off,
            &self.params.act_attn,
            self.config.heads,
            false,
        );
        linear(&o, &self.params.act_w, &self.params.act_b)
    }

    /// Auxiliary logits for both aux channels: one shared attention (query,
    /// key, and value sources set by the config) and two projections.
    pub fn aux_head(
        &self,
        trace: &DecoderTrace<T>,
        f: &Array2<T>,
        c: &Array2<T>,
        p: &Array2<T>,
        dec_off: &[usize],
        src_off: &[usize],
    ) -> crate::Result<(Array2<T>, Array2<T>)> {
        self.config.validate_aux_combo()?;
        let q = trace.select(self.config.aux_query_source);
        let k = match self.config.aux_key_source {
            AuxKey::Functional => f,
            AuxKey::Contextual => c,
        };
        let v = match self.config.aux_value_source {
            AuxValue::Functional => f,
            AuxValue::Contextual => c,
            AuxValue::Primitive => p,
        };
        let (o, _) = mha(
            q,
            k,
            v,
            dec_off,
            src_off,
            &self.params.aux_attn,
            self.config.heads,
            false,
        );
        Ok((
            linear(&o, &self.params.aux1_w, &self.params.aux1_b),
            linear(&o, &self.params.aux2_w, &self.params.aux2_b),
        ))
    }

    /// Full teacher-forced forward pass.
    pub fn forward(&self, batch: &Batch, mode: &mut Mode) -> (ForwardOutput<T>, ForwardCache<T>) {
        let heads = self.config.heads;
        let (f, p) = self.embed_input(&batch.src.ids, mode);
        let (c, enc_layers) = self.encoder_forward(&f, &batch.src.offsets, mode);
        let dec_layers = self.decoder_forward(batch, &c, mode);
        let trace = Self::trace_from_caches(&dec_layers);

        let (o_act, act_mha) = mha(
            &trace.l2_out,
            &c,
            &p,
            &batch.dec_offsets,
            &batch.src.offsets,
            &self.params.act_attn,
            heads,
            false,
        );
        let act_logits = linear(&o_act, &self.params.act_w, &self.params.act_b);

        let q_aux = trace.select(self.config.aux_query_source);
        let k_aux = match self.config.aux_key_source {
            AuxKey::Functional => &f,
            AuxKey::Contextual => &c,
        };
        let v_aux = f_p_select(&f, &c, &p, self.config.aux_value_source);
        let (o_aux, aux_mha) = mha(
            q_aux,
            k_aux,
            v_aux,
            &batch.dec_offsets,
            &batch.src.offsets,
            &self.params.aux_attn,
            heads,
            false,
        );
        let aux1_logits = linear(&o_aux, &self.params.aux1_w, &self.params.aux1_b);
        let aux2_logits = linear(&o_aux, &self.params.aux2_w, &self.params.aux2_b);

        (
            ForwardOutput {
                act_logits,
                aux1_logits,
                aux2_logits,
                trace,
            },
            ForwardCache {
                f,
                p,
                enc_layers,
                c,
                dec_layers,
                act_mha,
                o_act,
                aux_mha,
                o_aux,
            },
        )
    }

    /// Loss on a teacher-forced forward output, plus the scaled logit
    /// gradients needed to start the backward pass.
    pub fn loss(
        &self,
        out: &ForwardOutput<T>,
        batch: &Batch,
    ) -> (LossBreakdown, Array2<T>, Array2<T>, Array2<T>) {
        let (act_sum, mut dact, n_act) = softmax_xent(&out.act_logits, &batch.act_tgt, None);
        let (a1_sum, mut da1, n_aux) = softmax_xent(
            &out.aux1_logits,
            &batch.aux1_tgt,
            Some(&batch.aux_row_mask),
        );
        let (a2_sum, mut da2, n_aux2) = softmax_xent(
            &out.aux2_logits,
            &batch.aux2_tgt,
            Some(&batch.aux_row_mask),
        );
        debug_assert_eq!(n_aux, n_aux2);
        let action_ce = act_sum.to_f64() / n_act as f64;
        let (aux1_ce, aux2_ce) = if n_aux > 0 {
            (a1_sum.to_f64() / n_aux as f64, a2_sum.to_f64() / n_aux as f64)
        } else {
            (0.0, 0.0)
        };
        dact.mapv_inplace(|x| x / T::from_f64(n_act as f64));
        if n_aux > 0 {
            da1.mapv_inplace(|x| x / T::from_f64(n_aux as f64));
            da2.mapv_inplace(|x| x / T::from_f64(n_aux as f64));
        }
        let mean_sq = |m: &Array2<T>| {
            m.iter().map(|&x| (x * x).to_f64()).sum::<f64>() / m.len() as f64
        };
        let reg = EMBED_REG * (mean_sq(&self.params.e_f) + mean_sq(&self.params.e_p));
        let total = action_ce + aux1_ce + aux2_ce + reg;
        (
            LossBreakdown {
                total,
                action_ce,
                aux1_ce,
                aux2_ce,
                reg,
            },
            dact,
            da1,
            da2,
        )
    }

    /// Backward pass from scaled logit gradients. Returns a full gradient
    /// container (same structure as the parameters).
    pub fn backward(
        &self,
        batch: &Batch,
        cache: &ForwardCache<T>,
        dact_logits: &Array2<T>,
        daux1_logits: &Array2<T>,
        daux2_logits: &Array2<T>,
    ) -> Parameters<T> {
        let mut g = self.params.zeros_like();
        let heads = self.config.heads;
        let dec_off = &batch.dec_offsets;
        let src_off = &batch.src.offsets;

        // Action head.
        let do_act = linear_backward(
            &cache.o_act,
            &self.params.act_w,
            dact_logits,
            &mut g.act_w,
            &mut g.act_b,
        );
        let mut dc = Array2::zeros(cache.c.raw_dim());
        let mut df = Array2::zeros(cache.f.raw_dim());
        let mut dp = Array2::zeros(cache.p.raw_dim());
        let (dz_act, dk_act, dv_act) = mha_backward(
            &do_act,
            &cache.act_mha,
            &cache.dec_layers.last().unwrap().out,
            &cache.c,
            &cache.p,
            dec_off,
            src_off,
            &self.params.act_attn,
            &mut g.act_attn,
            heads,
        );
        dc += &dk_act;
        dp += &dv_act;

        // Auxiliary head: two projections share one attention output.
        let mut do_aux = linear_backward(
            &cache.o_aux,
            &self.params.aux1_w,
            daux1_logits,
            &mut g.aux1_w,
            &mut g.aux1_b,
        );
        do_aux += &linear_backward(
            &cache.o_aux,
            &self.params.aux2_w,
            daux2_logits,
            &mut g.aux2_w,
            &mut g.aux2_b,
        );
        let trace = Self::trace_from_caches(&cache.dec_layers);
        let q_aux = trace.select(self.config.aux_query_source);
        let k_aux = match self.config.aux_key_source {
            AuxKey::Functional => &cache.f,
            AuxKey::Contextual => &cache.c,
        };
        let v_aux = f_p_select(&cache.f, &cache.c, &cache.p, self.config.aux_value_source);
        let (dq_aux, dk_aux, dv_aux) = mha_backward(
            &do_aux,
            &cache.aux_mha,
            q_aux,
            k_aux,
            v_aux,
            dec_off,
            src_off,
            &self.params.aux_attn,
            &mut g.aux_attn,
            heads,
        );
        match self.config.aux_key_source {
            AuxKey::Functional => df += &dk_aux,
            AuxKey::Contextual => dc += &dk_aux,
        }
        match self.config.aux_value_source {
            AuxValue::Functional => df += &dv_aux,
            AuxValue::Contextual => dc += &dv_aux,
            AuxValue::Primitive => dp += &dv_aux,
        }

        // Decoder stack, last layer first. The aux query gradient joins at
        // the right point: L2-Out at the top, L1-Out at layer 0's output,
        // L1-Int inside layer 0.
        let n_layers = cache.dec_layers.len();
        let mut d_out = dz_act;
        // With a single decoder layer, L1-Out and L2-Out are the same vector.
        if self.config.aux_query_source == AuxQuery::L2Out
            || (self.config.aux_query_source == AuxQuery::L1Out && n_layers == 1)
        {
            d_out += &dq_aux;
        }
        for i in (0..n_layers).rev() {
            if i == 0 && self.config.aux_query_source == AuxQuery::L1Out && n_layers > 1 {
                d_out += &dq_aux;
            }
            let extra_dh = if i == 0 && self.config.aux_query_source == AuxQuery::L1Int {
                Some(&dq_aux)
            } else {
                None
            };
            d_out = self.decoder_layer_backward(
                &d_out,
                extra_dh,
                dec_off,
                &cache.c,
                src_off,
                &mut dc,
                &cache.dec_layers[i],
                &self.params.dec[i],
                &mut g.dec[i],
            );
        }
        // Decoder input: sum of three embeddings.
        embed_backward(&d_out, &batch.act_in, &mut g.e_act);
        embed_backward(&d_out, &batch.aux1_in, &mut g.e_aux1);
        embed_backward(&d_out, &batch.aux2_in, &mut g.e_aux2);

        // Encoder stack.
        let mut d_enc = dc;
        for i in (0..cache.enc_layers.len()).rev() {
            d_enc = self.encoder_layer_backward(
                &d_enc,
                src_off,
                &cache.enc_layers[i],
                &self.params.enc[i],
                &mut g.enc[i],
            );
        }
        df += &d_enc;

        embed_backward(&df, &batch.src.ids, &mut g.e_f);
        embed_backward(&dp, &batch.src.ids, &mut g.e_p);

        // Squared-embedding penalty: d/dE of reg * mean(E^2).
        let reg_grad = |e: &Array2<T>, ge: &mut Array2<T>| {
            let coef = T::from_f64(2.0 * EMBED_REG / e.len() as f64);
            ndarray::Zip::from(ge).and(e).for_each(|gv, &ev| {
                *gv = *gv + coef * ev;
            });
        };
        reg_grad(&self.params.e_f, &mut g.e_f);
        reg_grad(&self.params.e_p, &mut g.e_p);

        g
    }

    /// Forward + loss + backward in one call.
    pub fn loss_and_grads(
        &self,
        batch: &Batch,
        mode: &mut Mode,
    ) -> (LossBreakdown, Parameters<T>) {
        let (out, cache) = self.forward(batch, mode);
        let (breakdown, dact, da1, da2) = self.loss(&out, batch);
        let grads = self.backward(batch, &cache, &dact, &da1, &da2);
        (breakdown, grads)
    }

    /// Forward + loss only (used by the finite-difference checker).
    pub fn loss_only(&self, batch: &Batch, mode: &mut Mode) -> LossBreakdown {
        let (out, _) = self.forward(batch, mode);
        self.loss(&out, batch).0
    }
}

fn f_p_select<'a, T>(
    f: &'a Array2<T>,
    c: &'a Array2<T>,
    p: &'a Array2<T>,
    sel: AuxValue,
) -> &'a Array2<T> {
    match sel {
        AuxValue::Functional => f,
        AuxValue::Contextual => c,
        AuxValue::Primitive => p,
    }
}
