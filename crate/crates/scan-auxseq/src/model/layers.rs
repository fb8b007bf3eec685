//! Network primitives over a packed (jagged) batch layout.
//!
//! A batch is a flat `(total_tokens, d)` matrix plus an offsets vector; row
//! ranges `offsets[b]..offsets[b+1]` belong to example `b`. Linear maps,
//! layer norm, and the FFN are position-wise and run on the flat matrix in
//! one GEMM; attention walks the per-example segments. There is no padding
//! anywhere, so every row participates in every mean.
//!
//! Each primitive comes as a `forward` returning a cache and a `backward`
//! that accumulates parameter gradients (`+=`) and returns input gradients.

use crate::model::params::{AttentionParams, FfnParams, LayerNormParams};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use ndarray::{s, Array1, Array2, Array3, Axis};

pub const LN_EPS: f64 = 1e-5;
const MASKED_SCORE: f64 = -1e30;

/// (start, end) row ranges of each example segment.
pub fn segments(offsets: &[usize]) -> Vec<(usize, usize)> {
    offsets.windows(2).map(|w| (w[0], w[1])).collect()
}

pub fn linear<T: Scalar>(x: &Array2<T>, w: &Array2<T>, b: &Array1<T>) -> Array2<T> {
    let mut y = x.dot(w);
    for mut row in y.rows_mut() {
        row += b;
    }
    y
}

/// Bias-free linear map.
pub fn linear_nb<T: Scalar>(x: &Array2<T>, w: &Array2<T>) -> Array2<T> {
    x.dot(w)
}

pub fn linear_nb_backward<T: Scalar>(
    x: &Array2<T>,
    w: &Array2<T>,
    dy: &Array2<T>,
    dw: &mut Array2<T>,
) -> Array2<T> {
    *dw += &x.t().dot(dy);
    dy.dot(&w.t())
}

/// Accumulates `dw`, `db`; returns `dx`.
pub fn linear_backward<T: Scalar>(
    x: &Array2<T>,
    w: &Array2<T>,
    dy: &Array2<T>,
    dw: &mut Array2<T>,
    db: &mut Array1<T>,
) -> Array2<T> {
    *dw += &x.t().dot(dy);
    *db += &dy.sum_axis(Axis(0));
    dy.dot(&w.t())
}

pub struct LnCache<T> {
    pub xhat: Array2<T>,
    pub inv_std: Array1<T>,
}

pub fn layer_norm<T: Scalar>(x: &Array2<T>, p: &LayerNormParams<T>) -> (Array2<T>, LnCache<T>) {
    let (n, d) = x.dim();
    let dd = T::from_f64(d as f64);
    let eps = T::from_f64(LN_EPS);
    let mut xhat = Array2::zeros((n, d));
    let mut inv_std = Array1::zeros(n);
    let mut y = Array2::zeros((n, d));
    for i in 0..n {
        let row = x.row(i);
        let mu = row.sum() / dd;
        let mut var = T::zero();
        for &v in row {
            var = var + (v - mu) * (v - mu);
        }
        var = var / dd;
        let inv = T::one() / (var + eps).sqrt();
        inv_std[i] = inv;
        for j in 0..d {
            let h = (row[j] - mu) * inv;
            xhat[(i, j)] = h;
            y[(i, j)] = h * p.gain[j] + p.bias[j];
        }
    }
    (y, LnCache { xhat, inv_std })
}

pub fn layer_norm_backward<T: Scalar>(
    dy: &Array2<T>,
    cache: &LnCache<T>,
    p: &LayerNormParams<T>,
    dgain: &mut Array1<T>,
    dbias: &mut Array1<T>,
) -> Array2<T> {
    let (n, d) = dy.dim();
    let dd = T::from_f64(d as f64);
    let mut dx = Array2::zeros((n, d));
    for i in 0..n {
        let mut m1 = T::zero();
        let mut m2 = T::zero();
        for j in 0..d {
            let g = dy[(i, j)] * p.gain[j];
            m1 = m1 + g;
            m2 = m2 + g * cache.xhat[(i, j)];
            dgain[j] = dgain[j] + dy[(i, j)] * cache.xhat[(i, j)];
            dbias[j] = dbias[j] + dy[(i, j)];
        }
        m1 = m1 / dd;
        m2 = m2 / dd;
        for j in 0..d {
            let g = dy[(i, j)] * p.gain[j];
            dx[(i, j)] = cache.inv_std[i] * (g - m1 - cache.xhat[(i, j)] * m2);
        }
    }
    dx
}

pub struct FfnCache<T> {
    /// Input rows.
    pub x: Array2<T>,
    /// Post-ReLU hidden rows.
    pub h: Array2<T>,
}

pub fn ffn<T: Scalar>(x: &Array2<T>, p: &FfnParams<T>) -> (Array2<T>, FfnCache<T>) {
    let mut h = linear(x, &p.w1, &p.b1);
    h.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
    let y = linear(&h, &p.w2, &p.b2);
    (
        y,
        FfnCache {
            x: x.clone(),
            h,
        },
    )
}

pub fn ffn_backward<T: Scalar>(
    dy: &Array2<T>,
    cache: &FfnCache<T>,
    p: &FfnParams<T>,
    grads: &mut FfnParams<T>,
) -> Array2<T> {
    let mut dh = linear_backward(&cache.h, &p.w2, dy, &mut grads.w2, &mut grads.b2);
    ndarray::Zip::from(&mut dh).and(&cache.h).for_each(|g, &h| {
        if h <= T::zero() {
            *g = T::zero();
        }
    });
    linear_backward(&cache.x, &p.w1, &dh, &mut grads.w1, &mut grads.b1)
}

/// Per-example, per-head softmax attention weights.
pub struct AttnCoreCache<T> {
    pub weights: Vec<Array3<T>>, // (heads, nq, nk) per example
}

/// Scaled dot-product attention over already-projected Q/K/V, segment by
/// segment. `causal` requires query and key segmentation to be identical.
pub fn attn_core<T: Scalar>(
    q: &Array2<T>,
    k: &Array2<T>,
    v: &Array2<T>,
    q_off: &[usize],
    kv_off: &[usize],
    heads: usize,
    causal: bool,
) -> (Array2<T>, AttnCoreCache<T>) {
    let d = q.ncols();
    let dh = d / heads;
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());
    let masked = T::from_f64(MASKED_SCORE);
    let mut out = Array2::zeros(q.raw_dim());
    let mut weights = Vec::with_capacity(q_off.len() - 1);
    for ((qa, qb), (ka, kb)) in segments(q_off).into_iter().zip(segments(kv_off)) {
        let nq = qb - qa;
        let nk = kb - ka;
        if causal {
            assert_eq!(nq, nk, "causal attention needs matching segments");
        }
        let mut w_ex = Array3::zeros((heads, nq, nk));
        for h in 0..heads {
            let cols = h * dh..(h + 1) * dh;
            let qs = q.slice(s![qa..qb, cols.clone()]);
            let ks = k.slice(s![ka..kb, cols.clone()]);
            let vs = v.slice(s![ka..kb, cols.clone()]);
            let mut scores = qs.dot(&ks.t());
            scores.mapv_inplace(|x| x * scale);
            if causal {
                for i in 0..nq {
                    for j in (i + 1)..nk {
                        scores[(i, j)] = masked;
                    }
                }
            }
            // Row softmax with max subtraction.
            for i in 0..nq {
                let mut row = scores.row_mut(i);
                let mx = row.iter().copied().fold(T::from_f64(f64::NEG_INFINITY), T::max);
                let mut sum = T::zero();
                for x in row.iter_mut() {
                    *x = (*x - mx).exp();
                    sum = sum + *x;
                }
                for x in row.iter_mut() {
                    *x = *x / sum;
                }
            }
            let o = scores.dot(&vs);
            out.slice_mut(s![qa..qb, cols]).assign(&o);
            w_ex.slice_mut(s![h, .., ..]).assign(&scores);
        }
        weights.push(w_ex);
    }
    (out, AttnCoreCache { weights })
}

/// Returns (dq, dk, dv) for the projected spaces.
pub fn attn_core_backward<T: Scalar>(
    dout: &Array2<T>,
    cache: &AttnCoreCache<T>,
    q: &Array2<T>,
    k: &Array2<T>,
    v: &Array2<T>,
    q_off: &[usize],
    kv_off: &[usize],
    heads: usize,
) -> (Array2<T>, Array2<T>, Array2<T>) {
    let d = q.ncols();
    let dh = d / heads;
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());
    let mut dq = Array2::zeros(q.raw_dim());
    let mut dk = Array2::zeros(k.raw_dim());
    let mut dv = Array2::zeros(v.raw_dim());
    for (b, ((qa, qb), (ka, kb))) in segments(q_off).into_iter().zip(segments(kv_off)).enumerate() {
        let nq = qb - qa;
        for h in 0..heads {
            let cols = h * dh..(h + 1) * dh;
            let qs = q.slice(s![qa..qb, cols.clone()]);
            let ks = k.slice(s![ka..kb, cols.clone()]);
            let vs = v.slice(s![ka..kb, cols.clone()]);
            let dos = dout.slice(s![qa..qb, cols.clone()]);
            let attn = cache.weights[b].slice(s![h, .., ..]);
            // dV = A^T dO ; dA = dO V^T
            let dvs = attn.t().dot(&dos);
            let da = dos.dot(&vs.t());
            // dS = A ⊙ (dA − rowsum(dA ⊙ A))
            let mut ds = Array2::zeros((nq, kb - ka));
            for i in 0..nq {
                let mut dot = T::zero();
                for j in 0..(kb - ka) {
                    dot = dot + da[(i, j)] * attn[(i, j)];
                }
                for j in 0..(kb - ka) {
                    ds[(i, j)] = attn[(i, j)] * (da[(i, j)] - dot) * scale;
                }
            }
            let dqs = ds.dot(&ks);
            let dks = ds.t().dot(&qs);
            dq.slice_mut(s![qa..qb, cols.clone()]).assign(&dqs);
            let mut dk_slice = dk.slice_mut(s![ka..kb, cols.clone()]);
            dk_slice += &dks;
            let mut dv_slice = dv.slice_mut(s![ka..kb, cols]);
            dv_slice += &dvs;
        }
    }
    (dq, dk, dv)
}

pub struct MhaCache<T> {
    pub q_proj: Array2<T>,
    pub k_proj: Array2<T>,
    pub v_proj: Array2<T>,
    pub core: AttnCoreCache<T>,
    pub core_out: Array2<T>,
}

/// Full multi-head attention block: project, attend, project back.
#[allow(clippy::too_many_arguments)]
pub fn mha<T: Scalar>(
    q_in: &Array2<T>,
    k_in: &Array2<T>,
    v_in: &Array2<T>,
    q_off: &[usize],
    kv_off: &[usize],
    p: &AttentionParams<T>,
    heads: usize,
    causal: bool,
) -> (Array2<T>, MhaCache<T>) {
    let q = linear(q_in, &p.wq, &p.bq);
    let k = linear_nb(k_in, &p.wk);
    let v = linear(v_in, &p.wv, &p.bv);
    let (core_out, core) = attn_core(&q, &k, &v, q_off, kv_off, heads, causal);
    let out = linear(&core_out, &p.wo, &p.bo);
    (
        out,
        MhaCache {
            q_proj: q,
            k_proj: k,
            v_proj: v,
            core,
            core_out,
        },
    )
}

/// Returns (dq_in, dk_in, dv_in). When q/k/v share an input the caller sums.
#[allow(clippy::too_many_arguments)]
pub fn mha_backward<T: Scalar>(
    dout: &Array2<T>,
    cache: &MhaCache<T>,
    q_in: &Array2<T>,
    k_in: &Array2<T>,
    v_in: &Array2<T>,
    q_off: &[usize],
    kv_off: &[usize],
    p: &AttentionParams<T>,
    grads: &mut AttentionParams<T>,
    heads: usize,
) -> (Array2<T>, Array2<T>, Array2<T>) {
    let dcore_out = linear_backward(&cache.core_out, &p.wo, dout, &mut grads.wo, &mut grads.bo);
    let (dq, dk, dv) = attn_core_backward(
        &dcore_out,
        &cache.core,
        &cache.q_proj,
        &cache.k_proj,
        &cache.v_proj,
        q_off,
        kv_off,
        heads,
    );
    let dq_in = linear_backward(q_in, &p.wq, &dq, &mut grads.wq, &mut grads.bq);
    let dk_in = linear_nb_backward(k_in, &p.wk, &dk, &mut grads.wk);
    let dv_in = linear_backward(v_in, &p.wv, &dv, &mut grads.wv, &mut grads.bv);
    (dq_in, dk_in, dv_in)
}

/// Inverted dropout applied in place; returns the scaled keep-mask.
pub fn dropout_inplace<T: Scalar>(
    x: &mut Array2<T>,
    rate: f64,
    rng: &mut SplitMix64,
) -> Array2<T> {
    debug_assert!((0.0..1.0).contains(&rate));
    let keep_scale = T::from_f64(1.0 / (1.0 - rate));
    let mask = Array2::from_shape_fn(x.raw_dim(), |_| {
        if rng.next_f64() >= rate {
            keep_scale
        } else {
            T::zero()
        }
    });
    *x *= &mask;
    mask
}

/// Gather table rows for a list of ids.
pub fn embed<T: Scalar>(table: &Array2<T>, ids: &[usize]) -> Array2<T> {
    let mut out = Array2::zeros((ids.len(), table.ncols()));
    for (i, &id) in ids.iter().enumerate() {
        out.row_mut(i).assign(&table.row(id));
    }
    out
}

/// Scatter-add row gradients back into the table gradient.
pub fn embed_backward<T: Scalar>(dout: &Array2<T>, ids: &[usize], dtable: &mut Array2<T>) {
    for (i, &id) in ids.iter().enumerate() {
        let mut row = dtable.row_mut(id);
        row += &dout.row(i);
    }
}

/// Row-wise softmax (used when turning logits into distributions).
pub fn softmax_rows<T: Scalar>(logits: &Array2<T>) -> Array2<T> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let mx = row.iter().copied().fold(T::from_f64(f64::NEG_INFINITY), T::max);
        let mut sum = T::zero();
        for x in row.iter_mut() {
            *x = (*x - mx).exp();
            sum = sum + *x;
        }
        for x in row.iter_mut() {
            *x = *x / sum;
        }
    }
    out
}

/// Summed cross-entropy and unscaled (softmax − onehot) logits gradient over
/// the rows where `row_mask` is true. The caller divides by `count`.
pub fn softmax_xent<T: Scalar>(
    logits: &Array2<T>,
    targets: &[usize],
    row_mask: Option<&[bool]>,
) -> (T, Array2<T>, usize) {
    assert_eq!(logits.nrows(), targets.len());
    let mut dlogits = Array2::zeros(logits.raw_dim());
    let mut loss = T::zero();
    let mut count = 0usize;
    for i in 0..logits.nrows() {
        if let Some(mask) = row_mask {
            if !mask[i] {
                continue;
            }
        }
        count += 1;
        let row = logits.row(i);
        let mx = row.iter().copied().fold(T::from_f64(f64::NEG_INFINITY), T::max);
        let mut sum = T::zero();
        for &x in row {
            sum = sum + (x - mx).exp();
        }
        let lse = sum.ln() + mx;
        loss = loss + lse - row[targets[i]];
        for j in 0..logits.ncols() {
            dlogits[(i, j)] = (row[j] - mx).exp() / sum;
        }
        dlogits[(i, targets[i])] = dlogits[(i, targets[i])] - T::one();
    }
    (loss, dlogits, count)
}

/// Sinusoidal positional encodings, rows 0..max_len.
pub fn positional_encoding<T: Scalar>(max_len: usize, d: usize) -> Array2<T> {
    let mut pe = Array2::zeros((max_len, d));
    for pos in 0..max_len {
        for i in 0..d / 2 {
            let rate = (pos as f64) / 10_000f64.powf(2.0 * i as f64 / d as f64);
            pe[(pos, 2 * i)] = T::from_f64(rate.sin());
            pe[(pos, 2 * i + 1)] = T::from_f64(rate.cos());
        }
    }
    pe
}

/// Add positional encodings segment-locally: row r of example b gets pe[r].
pub fn add_positions<T: Scalar>(x: &mut Array2<T>, offsets: &[usize], pe: &Array2<T>) {
    for (a, b) in segments(offsets) {
        for (local, row) in (a..b).enumerate() {
            let mut r = x.row_mut(row);
            r += &pe.row(local);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{AttentionParams, FfnParams, LayerNormParams};

    fn rng() -> SplitMix64 {
        SplitMix64::new(0xBADC0FFEE)
    }

    fn rand_mat(r: usize, c: usize, rng: &mut SplitMix64) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.next_gaussian() * 0.5)
    }

    /// Central finite differences of a scalar-valued function of one matrix.
    fn fd_grad<F: Fn(&Array2<f64>) -> f64>(x: &Array2<f64>, f: F) -> Array2<f64> {
        let eps = 1e-6;
        let mut g = Array2::zeros(x.raw_dim());
        let mut xp = x.clone();
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                xp[(i, j)] = x[(i, j)] + eps;
                let up = f(&xp);
                xp[(i, j)] = x[(i, j)] - eps;
                let dn = f(&xp);
                xp[(i, j)] = x[(i, j)];
                g[(i, j)] = (up - dn) / (2.0 * eps);
            }
        }
        g
    }

    fn assert_close(a: &Array2<f64>, b: &Array2<f64>, tol: f64, what: &str) {
        for (x, y) in a.iter().zip(b.iter()) {
            let err = (x - y).abs() / x.abs().max(y.abs()).max(1e-8);
            assert!(err < tol, "{what}: {x} vs {y} (rel {err:.2e})");
        }
    }

    // Scalar probe: sum of elementwise-squared outputs, so output gradients
    // are 2*y and every path gets exercised.
    fn probe_loss(y: &Array2<f64>) -> f64 {
        y.iter().map(|v| v * v).sum()
    }

    fn probe_grad(y: &Array2<f64>) -> Array2<f64> {
        y.mapv(|v| 2.0 * v)
    }

    #[test]
    fn layer_norm_matches_finite_differences() {
        let mut r = rng();
        let x = rand_mat(5, 8, &mut r);
        let p = LayerNormParams {
            gain: Array1::from_shape_fn(8, |_| 1.0 + 0.1 * r.next_gaussian()),
            bias: Array1::from_shape_fn(8, |_| 0.1 * r.next_gaussian()),
        };
        let (y, cache) = layer_norm(&x, &p);
        let mut dgain = Array1::zeros(8);
        let mut dbias = Array1::zeros(8);
        let dx = layer_norm_backward(&probe_grad(&y), &cache, &p, &mut dgain, &mut dbias);
        let fd = fd_grad(&x, |x| probe_loss(&layer_norm(x, &p).0));
        assert_close(&dx, &fd, 1e-6, "layer_norm dx");
    }

    #[test]
    fn ffn_matches_finite_differences() {
        let mut r = rng();
        let x = rand_mat(6, 4, &mut r);
        let p = FfnParams {
            w1: rand_mat(4, 10, &mut r),
            b1: Array1::from_shape_fn(10, |_| 0.05 * r.next_gaussian()),
            w2: rand_mat(10, 4, &mut r),
            b2: Array1::from_shape_fn(4, |_| 0.05 * r.next_gaussian()),
        };
        let (y, cache) = ffn(&x, &p);
        let mut grads = FfnParams {
            w1: Array2::zeros((4, 10)),
            b1: Array1::zeros(10),
            w2: Array2::zeros((10, 4)),
            b2: Array1::zeros(4),
        };
        let dx = ffn_backward(&probe_grad(&y), &cache, &p, &mut grads);
        let fd_x = fd_grad(&x, |x| probe_loss(&ffn(x, &p).0));
        assert_close(&dx, &fd_x, 1e-5, "ffn dx");
        let fd_w1 = fd_grad(&p.w1, |w| {
            let mut p2 = p.clone();
            p2.w1 = w.clone();
            probe_loss(&ffn(&x, &p2).0)
        });
        assert_close(&grads.w1, &fd_w1, 1e-5, "ffn dw1");
    }

    #[test]
    fn mha_matches_finite_differences() {
        let mut r = rng();
        let d = 8;
        let heads = 2;
        let q_off = vec![0usize, 3, 7];
        let kv_off = vec![0usize, 4, 6];
        let q_in = rand_mat(7, d, &mut r);
        let k_in = rand_mat(6, d, &mut r);
        let v_in = rand_mat(6, d, &mut r);
        let p = AttentionParams {
            wq: rand_mat(d, d, &mut r),
            bq: Array1::from_shape_fn(d, |_| 0.02 * r.next_gaussian()),
            wk: rand_mat(d, d, &mut r),
            wv: rand_mat(d, d, &mut r),
            bv: Array1::zeros(d),
            wo: rand_mat(d, d, &mut r),
            bo: Array1::zeros(d),
        };
        let zero = || AttentionParams::<f64> {
            wq: Array2::zeros((d, d)),
            bq: Array1::zeros(d),
            wk: Array2::zeros((d, d)),
            wv: Array2::zeros((d, d)),
            bv: Array1::zeros(d),
            wo: Array2::zeros((d, d)),
            bo: Array1::zeros(d),
        };
        let (y, cache) = mha(&q_in, &k_in, &v_in, &q_off, &kv_off, &p, heads, false);
        let mut grads = zero();
        let (dq, dk, dv) = mha_backward(
            &probe_grad(&y),
            &cache,
            &q_in,
            &k_in,
            &v_in,
            &q_off,
            &kv_off,
            &p,
            &mut grads,
            heads,
        );
        let run = |q: &Array2<f64>, k: &Array2<f64>, v: &Array2<f64>, p: &AttentionParams<f64>| {
            probe_loss(&mha(q, k, v, &q_off, &kv_off, p, heads, false).0)
        };
        assert_close(&dq, &fd_grad(&q_in, |q| run(q, &k_in, &v_in, &p)), 1e-5, "mha dq");
        assert_close(&dk, &fd_grad(&k_in, |k| run(&q_in, k, &v_in, &p)), 1e-5, "mha dk");
        assert_close(&dv, &fd_grad(&v_in, |v| run(&q_in, &k_in, v, &p)), 1e-5, "mha dv");
        let fd_wq = fd_grad(&p.wq, |w| {
            let mut p2 = p.clone();
            p2.wq = w.clone();
            run(&q_in, &k_in, &v_in, &p2)
        });
        assert_close(&grads.wq, &fd_wq, 1e-5, "mha dwq");
        let fd_wv = fd_grad(&p.wv, |w| {
            let mut p2 = p.clone();
            p2.wv = w.clone();
            run(&q_in, &k_in, &v_in, &p2)
        });
        assert_close(&grads.wv, &fd_wv, 1e-5, "mha dwv");
    }

    #[test]
    fn attention_rows_sum_to_one_and_respect_causality() {
        let mut r = rng();
        let d = 8;
        let q = rand_mat(5, d, &mut r);
        let off = vec![0usize, 5];
        let (_, cache) = attn_core(&q, &q, &q, &off, &off, 2, true);
        let w = &cache.weights[0];
        for h in 0..2usize {
            for i in 0..5usize {
                let row = w.slice(s![h, i, ..]);
                let sum: f64 = row.sum();
                assert!((sum - 1.0).abs() < 1e-6);
                for j in (i + 1)..5 {
                    assert_eq!(row[j], 0.0, "future leak at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn softmax_xent_uniform_and_perfect() {
        // Uniform logits over k classes -> ln k.
        let k = 7;
        let logits = Array2::from_elem((3, k), 0.42);
        let (loss, _, count) = softmax_xent::<f64>(&logits, &[0, 3, 6], None);
        assert_eq!(count, 3);
        assert!((loss / 3.0 - (k as f64).ln()).abs() < 1e-12);

        // Near-one-hot logits -> near-zero loss.
        let mut sharp = Array2::from_elem((2, k), -1e4);
        sharp[(0, 2)] = 1e4;
        sharp[(1, 5)] = 1e4;
        let (loss, _, _) = softmax_xent::<f64>(&sharp, &[2, 5], None);
        assert!(loss.abs() < 1e-9);

        // Masked rows contribute nothing.
        let (loss_m, dl, count_m) =
            softmax_xent::<f64>(&logits, &[0, 3, 6], Some(&[true, false, true]));
        assert_eq!(count_m, 2);
        assert!((loss_m / 2.0 - (k as f64).ln()).abs() < 1e-12);
        assert!(dl.row(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dropout_scales_and_zeroes() {
        let mut r = rng();
        let mut x = Array2::from_elem((50, 40), 1.0f64);
        let mask = dropout_inplace(&mut x, 0.25, &mut r);
        let kept = x.iter().filter(|&&v| v != 0.0).count();
        let frac = kept as f64 / x.len() as f64;
        assert!((frac - 0.75).abs() < 0.05, "kept fraction {frac}");
        for (&v, &m) in x.iter().zip(mask.iter()) {
            assert!(v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-12);
            assert_eq!(v, m);
        }
    }

    #[test]
    fn positional_encoding_is_position_sensitive() {
        let pe = positional_encoding::<f64>(16, 8);
        assert_eq!(pe.row(0)[0], 0.0);
        assert_eq!(pe.row(0)[1], 1.0);
        for i in 1..16 {
            assert_ne!(pe.row(i), pe.row(0));
        }
    }
}
