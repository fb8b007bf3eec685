//! Central finite-difference verification of the analytic backward pass.
//!
//! Runs in double precision on the tiny configuration with noise and dropout
//! disabled, so the loss is a deterministic smooth function of the weights
//! and the comparison is meaningful down to ~1e-8.

use super::params::SlotMut;
use super::{Batch, Mode, Model};
use crate::scalar::Scalar;

/// Per-tensor worst relative error, plus the overall maximum.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub per_tensor: Vec<(String, f64)>,
    pub max_rel_err: f64,
}

/// |g_fd - g| / max(|g_fd|, |g|, 1e-8).
pub fn rel_err(fd: f64, g: f64) -> f64 {
    (fd - g).abs() / fd.abs().max(g.abs()).max(1e-8)
}

fn slot_get<T: Scalar>(slot: &SlotMut<'_, T>, idx: usize) -> T {
    match slot {
        SlotMut::Mat(m) => {
            let c = m.ncols();
            m[(idx / c, idx % c)]
        }
        SlotMut::Vec1(v) => v[idx],
    }
}

fn slot_set<T: Scalar>(slot: &mut SlotMut<'_, T>, idx: usize, val: T) {
    match slot {
        SlotMut::Mat(m) => {
            let c = m.ncols();
            m[(idx / c, idx % c)] = val;
        }
        SlotMut::Vec1(v) => v[idx] = val,
    }
}

fn slot_len<T: Scalar>(slot: &SlotMut<'_, T>) -> usize {
    match slot {
        SlotMut::Mat(m) => m.len(),
        SlotMut::Vec1(v) => v.len(),
    }
}

/// Finite-difference loss derivative for one parameter entry. The model is
/// restored to its original value before returning.
pub fn probe_fd<T: Scalar>(
    model: &mut Model<T>,
    batch: &Batch,
    tensor: usize,
    idx: usize,
    eps: f64,
) -> f64 {
    let orig = {
        let slots = model.params.slots_mut();
        slot_get(&slots[tensor].1, idx)
    };
    let eval = |m: &mut Model<T>, v: T| -> f64 {
        {
            let mut slots = m.params.slots_mut();
            slot_set(&mut slots[tensor].1, idx, v);
        }
        m.loss_only(batch, &mut Mode::Eval).total
    };
    let up = eval(model, orig + T::from_f64(eps));
    let down = eval(model, orig - T::from_f64(eps));
    eval(model, orig);
    (up - down) / (2.0 * eps)
}

/// Compare analytic gradients against central finite differences on a few
/// deterministically chosen entries of every parameter tensor.
///
/// Entries are restricted to rows that participate in the computation: the
/// decoder-input embedding tables contain rows (PAD, and EOS which is only
/// ever a target) that are disconnected from the loss, where a finite
/// difference measures nothing but cancellation noise.
pub fn gradient_check<T: Scalar>(
    model: &mut Model<T>,
    batch: &Batch,
    eps: f64,
    probes_per_tensor: usize,
) -> GradCheckReport {
    let (_, mut grads) = model.loss_and_grads(batch, &mut Mode::Eval);
    let probe_plan: Vec<(String, Vec<usize>, Vec<f64>)> = {
        let mut out = Vec::new();
        for (name, slot) in grads.slots_mut() {
            let len = slot_len(&slot);
            let ncols = match &slot {
                SlotMut::Mat(m) => m.ncols(),
                SlotMut::Vec1(_) => len,
            };
            let allowed_rows: Option<Vec<usize>> = match name.as_str() {
                "e_act" => Some(used_rows(&batch.act_in)),
                "e_aux1" => Some(used_rows(&batch.aux1_in)),
                "e_aux2" => Some(used_rows(&batch.aux2_in)),
                _ => None,
            };
            let indices: Vec<usize> = match allowed_rows {
                None => probe_indices(len, probes_per_tensor),
                Some(rows) => probe_indices(len, probes_per_tensor)
                    .into_iter()
                    .enumerate()
                    .map(|(k, idx)| rows[k % rows.len()] * ncols + idx % ncols)
                    .collect(),
            };
            let vals = indices.iter().map(|&i| slot_get(&slot, i).to_f64()).collect();
            out.push((name, indices, vals));
        }
        out
    };

    let mut per_tensor = Vec::with_capacity(probe_plan.len());
    let mut max_rel_err = 0.0f64;
    for (tensor_idx, (name, indices, gvals)) in probe_plan.iter().enumerate() {
        let mut worst = 0.0f64;
        for (k, &idx) in indices.iter().enumerate() {
            let fd = probe_fd(model, batch, tensor_idx, idx, eps);
            let err = rel_err(fd, gvals[k]);
            worst = worst.max(err);
        }
        max_rel_err = max_rel_err.max(worst);
        per_tensor.push((name.clone(), worst));
    }
    GradCheckReport {
        per_tensor,
        max_rel_err,
    }
}

fn used_rows(ids: &[usize]) -> Vec<usize> {
    let mut rows: Vec<usize> = ids.to_vec();
    rows.sort_unstable();
    rows.dedup();
    rows
}

/// Evenly spread probe positions, always including the first and last entry.
fn probe_indices(len: usize, probes: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let n = probes.max(1).min(len);
    let mut out: Vec<usize> = (0..n).map(|k| k * (len - 1) / n.max(1)).collect();
    out.push(len - 1);
    out.dedup();
    out
}
