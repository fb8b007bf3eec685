//! Optimization loop: Adam with bias correction, deterministic batching,
//! metrics logging, and checkpointing.
//!
//! Determinism contract: everything that touches randomness (subset
//! selection, supervision masking, batch composition, embedding noise,
//! dropout) is driven by streams forked from the run seed, so two runs with
//! the same (seed, config, data) write byte-identical `metrics.jsonl` files.
//! Wall-clock timings go to a separate `timings.jsonl` for that reason.

use crate::checkpoint;
use crate::data::{mask_aux_supervision, subsample, LabeledExample};
use crate::error::Error;
use crate::eval::{evaluate, RunMetrics};
use crate::model::params::{Parameters, SlotMut, SlotRef};
use crate::model::{Batch, Mode, Model, ModelConfig};
use crate::rng::{shuffle, SplitMix64};
use crate::scalar::Scalar;
use crate::vocab::VocabSet;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Optimization hyperparameters and run controls.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub fraction_train: f64,
    pub fraction_aux: f64,
    /// Global-norm gradient clip; 0 disables.
    pub grad_clip: f64,
    /// Cap on dev examples decoded at each in-training evaluation
    /// (0 = all). The final evaluation always uses the full dev set.
    pub dev_eval_max: usize,
    /// Stop as soon as greedy decoding gets every training example exactly
    /// right on all three channels (checked at the eval cadence). Used by
    /// the overfit smoke test.
    pub stop_when_train_exact: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-3,
            beta1: 0.9,
            beta2: 0.98,
            adam_eps: 1e-8,
            batch_size: 512,
            max_steps: 30_000,
            eval_every: 500,
            seed: 1,
            fraction_train: 1.0,
            fraction_aux: 1.0,
            grad_clip: 5.0,
            dev_eval_max: 200,
            stop_when_train_exact: false,
        }
    }
}

/// First/second moment estimates plus the step counter.
pub struct AdamState<T: Scalar> {
    pub m: Parameters<T>,
    pub v: Parameters<T>,
    pub t: usize,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &Parameters<T>) -> AdamState<T> {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

fn slot_values<'a, T: Scalar>(slot: &'a SlotRef<'a, T>) -> Box<dyn Iterator<Item = T> + 'a> {
    match slot {
        SlotRef::Mat(m) => Box::new(m.iter().copied()),
        SlotRef::Vec1(v) => Box::new(v.iter().copied()),
    }
}

/// Global L2 norm across every gradient tensor.
pub fn global_grad_norm<T: Scalar>(grads: &Parameters<T>) -> f64 {
    grads
        .slots()
        .iter()
        .flat_map(|(_, s)| slot_values(s))
        .map(|x| {
            let v = x.to_f64();
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

fn scale_grads<T: Scalar>(grads: &mut Parameters<T>, factor: T) {
    for (_, slot) in grads.slots_mut() {
        match slot {
            SlotMut::Mat(m) => m.mapv_inplace(|x| x * factor),
            SlotMut::Vec1(v) => v.mapv_inplace(|x| x * factor),
        }
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients.
pub fn adam_step<T: Scalar>(
    params: &mut Parameters<T>,
    grads: &Parameters<T>,
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    for (name, slot) in grads.slots() {
        let bad = slot_values(&slot).any(|x| !x.is_finite());
        if bad {
            return Err(Error::NonFiniteGradient {
                tensor: name,
                step: state.t + 1,
            });
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    let lr = T::from_f64(cfg.lr);
    let eps = T::from_f64(cfg.adam_eps);
    let bc1 = one - b1.powi(t);
    let bc2 = one - b2.powi(t);
    let mut p_slots = params.slots_mut();
    let g_slots = grads.slots();
    let mut m_slots = state.m.slots_mut();
    let mut v_slots = state.v.slots_mut();
    for i in 0..p_slots.len() {
        let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p = *p - lr * mhat / (vhat.sqrt() + eps);
        };
        match (&mut p_slots[i].1, &g_slots[i].1, &mut m_slots[i].1, &mut v_slots[i].1) {
            (SlotMut::Mat(p), SlotRef::Mat(g), SlotMut::Mat(m), SlotMut::Mat(v)) => {
                for ((pp, &gg), (mm, vv)) in
                    p.iter_mut().zip(g.iter()).zip(m.iter_mut().zip(v.iter_mut()))
                {
                    update(pp, gg, mm, vv);
                }
            }
            (SlotMut::Vec1(p), SlotRef::Vec1(g), SlotMut::Vec1(m), SlotMut::Vec1(v)) => {
                for ((pp, &gg), (mm, vv)) in
                    p.iter_mut().zip(g.iter()).zip(m.iter_mut().zip(v.iter_mut()))
                {
                    update(pp, gg, mm, vv);
                }
            }
            _ => unreachable!("slot kinds always line up"),
        }
    }
    Ok(())
}

/// One metrics record. `split` is "train" (teacher-forced batch metrics) or
/// "dev" (greedy decoding metrics).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: usize,
    pub split: String,
    pub loss: f64,
    pub action_acc: f64,
    pub aux1_acc: f64,
    pub aux2_acc: f64,
    pub seed: u64,
}

/// Outcome of a training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: usize,
    pub train_examples: usize,
    pub best_dev: Option<RunMetrics>,
    pub best_dev_step: usize,
    pub final_dev: Option<RunMetrics>,
    /// Last greedy train-set metrics, when `stop_when_train_exact` is set.
    pub train_greedy: Option<RunMetrics>,
    pub stopped_early: bool,
}

/// Teacher-forced sequence exact-match rates of a batch, from argmax logits.
fn batch_accuracy<T: Scalar>(
    out: &crate::model::ForwardOutput<T>,
    batch: &Batch,
) -> (f64, f64, f64) {
    let n = batch.n_examples();
    let (mut a_ok, mut x1_ok, mut x2_ok) = (0usize, 0usize, 0usize);
    let argmax = |logits: &ndarray::Array2<T>, row: usize| -> usize {
        let r = logits.row(row);
        let mut best = 0;
        for (j, &v) in r.iter().enumerate() {
            if v > r[best] {
                best = j;
            }
        }
        best
    };
    for b in 0..n {
        let (lo, hi) = (batch.dec_offsets[b], batch.dec_offsets[b + 1]);
        let ok = |logits: &ndarray::Array2<T>, tgt: &[usize]| {
            (lo..hi).all(|i| argmax(logits, i) == tgt[i])
        };
        a_ok += ok(&out.act_logits, &batch.act_tgt) as usize;
        x1_ok += ok(&out.aux1_logits, &batch.aux1_tgt) as usize;
        x2_ok += ok(&out.aux2_logits, &batch.aux2_tgt) as usize;
    }
    (
        a_ok as f64 / n as f64,
        x1_ok as f64 / n as f64,
        x2_ok as f64 / n as f64,
    )
}

/// Deterministic batch plan for one epoch: shuffle, stable-sort into output
/// length buckets, chunk, shuffle the chunk order.
fn epoch_batches(
    examples: &[LabeledExample],
    batch_size: usize,
    rng: &mut SplitMix64,
) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    shuffle(&mut idx, rng);
    idx.sort_by_key(|&i| examples[i].actions.len());
    let mut batches: Vec<Vec<usize>> = idx.chunks(batch_size).map(|c| c.to_vec()).collect();
    shuffle(&mut batches, rng);
    batches
}

/// Run the optimization loop. Writes `config.json`, `metrics.jsonl`,
/// `timings.jsonl`, `checkpoint_best/`, and `checkpoint_final/` into
/// `out_dir`; returns the report.
pub fn train(
    model: &mut Model<f32>,
    train_set: &[LabeledExample],
    dev_set: &[LabeledExample],
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainReport> {
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("config.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "model": model.config,
            "train": cfg,
        }))?,
    )?;
    let mut metrics = fs::File::create(out_dir.join("metrics.jsonl"))?;
    let mut timings = fs::File::create(out_dir.join("timings.jsonl"))?;

    let selected = subsample(train_set, cfg.fraction_train, cfg.seed)?;
    let selected = mask_aux_supervision(&selected, cfg.fraction_aux, cfg.seed);

    let mut master = SplitMix64::new(cfg.seed);
    let mut batch_rng = master.fork(0xBA7C);
    let mut noise_rng = master.fork(0x0153);

    let mut state = AdamState::new(&model.params);
    let mut best_dev: Option<RunMetrics> = None;
    let mut best_dev_step = 0usize;
    let mut train_greedy: Option<RunMetrics> = None;
    let mut stopped_early = false;
    let started = Instant::now();

    let mut queue: Vec<Vec<usize>> = Vec::new();
    let mut step = 0usize;
    let log = |rec: &MetricsRecord, file: &mut fs::File| -> Result<()> {
        writeln!(file, "{}", serde_json::to_string(rec)?)?;
        Ok(())
    };

    while step < cfg.max_steps {
        if queue.is_empty() {
            queue = epoch_batches(&selected, cfg.batch_size, &mut batch_rng);
            queue.reverse(); // pop from the back in plan order
        }
        let batch_idx = queue.pop().expect("non-empty epoch");
        let refs: Vec<&LabeledExample> = batch_idx.iter().map(|&i| &selected[i]).collect();
        let batch = Batch::build(&refs, &model.vocab, model.config.max_len)?;
        step += 1;

        let (out, cache) = model.forward(&batch, &mut Mode::Train(&mut noise_rng));
        let (loss, dact, da1, da2) = model.loss(&out, &batch);
        let mut grads = model.backward(&batch, &cache, &dact, &da1, &da2);
        if cfg.grad_clip > 0.0 {
            let norm = global_grad_norm(&grads);
            if norm > cfg.grad_clip {
                scale_grads(&mut grads, (cfg.grad_clip / norm) as f32);
            }
        }
        adam_step(&mut model.params, &grads, &mut state, cfg)?;

        let (a_acc, x1_acc, x2_acc) = batch_accuracy(&out, &batch);
        log(
            &MetricsRecord {
                step,
                split: "train".into(),
                loss: loss.total,
                action_acc: a_acc,
                aux1_acc: x1_acc,
                aux2_acc: x2_acc,
                seed: cfg.seed,
            },
            &mut metrics,
        )?;

        let due = step % cfg.eval_every == 0 || step == cfg.max_steps;
        if due && cfg.stop_when_train_exact {
            let tm = evaluate(model, &selected, cfg.seed);
            log(
                &MetricsRecord {
                    step,
                    split: "train_greedy".into(),
                    loss: loss.total,
                    action_acc: tm.action_acc,
                    aux1_acc: tm.aux1_acc,
                    aux2_acc: tm.aux2_acc,
                    seed: cfg.seed,
                },
                &mut metrics,
            )?;
            let perfect = tm.action_acc == 1.0 && tm.aux1_acc == 1.0 && tm.aux2_acc == 1.0;
            train_greedy = Some(tm);
            if perfect {
                stopped_early = true;
            }
        }
        if due && !dev_set.is_empty() {
            let cap = if cfg.dev_eval_max == 0 {
                dev_set.len()
            } else {
                cfg.dev_eval_max.min(dev_set.len())
            };
            let dev_metrics = evaluate(model, &dev_set[..cap], cfg.seed);
            log(
                &MetricsRecord {
                    step,
                    split: "dev".into(),
                    loss: teacher_forced_loss(model, &dev_set[..cap])?,
                    action_acc: dev_metrics.action_acc,
                    aux1_acc: dev_metrics.aux1_acc,
                    aux2_acc: dev_metrics.aux2_acc,
                    seed: cfg.seed,
                },
                &mut metrics,
            )?;
            writeln!(
                timings,
                "{}",
                serde_json::json!({"step": step, "wall_ms": started.elapsed().as_millis() as u64})
            )?;
            let better = best_dev
                .as_ref()
                .map(|b| dev_metrics.action_acc > b.action_acc)
                .unwrap_or(true);
            if better {
                best_dev = Some(dev_metrics);
                best_dev_step = step;
                checkpoint::save(model, &out_dir.join("checkpoint_best"))?;
            }
        }
        if stopped_early {
            break;
        }
    }

    checkpoint::save(model, &out_dir.join("checkpoint_final"))?;
    let final_dev = if dev_set.is_empty() {
        None
    } else {
        Some(evaluate(model, dev_set, cfg.seed))
    };
    if best_dev.is_none() {
        checkpoint::save(model, &out_dir.join("checkpoint_best"))?;
    }
    let report = TrainReport {
        steps: step,
        train_examples: selected.len(),
        best_dev,
        best_dev_step,
        final_dev,
        train_greedy,
        stopped_early,
    };
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

/// Teacher-forced loss over a set of examples, in eval mode, chunked to keep
/// peak memory flat.
pub fn teacher_forced_loss(model: &Model<f32>, examples: &[LabeledExample]) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for chunk in examples.chunks(256) {
        let refs: Vec<&LabeledExample> = chunk.iter().collect();
        let batch = Batch::build(&refs, &model.vocab, model.config.max_len)?;
        let loss = model.loss_only(&batch, &mut Mode::Eval);
        total += loss.total * chunk.len() as f64;
        n += chunk.len();
    }
    Ok(total / n as f64)
}

/// Convenience constructor used by the CLI and experiment suites.
pub fn fresh_model(config: &ModelConfig, seed: u64) -> Result<Model<f32>> {
    Model::new(config.clone(), VocabSet::standard(), seed ^ 0x5EED_CAFE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse, tokenize};
    use ndarray::{Array1, Array2};

    fn quad_params(w0: f64) -> Parameters<f32> {
        // A 1x1 parameter container is overkill; reuse the smallest real one
        // and treat e_f[0,0] as the scalar w.
        let cfg = ModelConfig::tiny();
        let vocab = VocabSet::standard();
        let mut p: Parameters<f32> = Parameters::init(&cfg, &vocab, 1);
        for (_, slot) in p.slots_mut() {
            match slot {
                SlotMut::Mat(m) => m.fill(0.0),
                SlotMut::Vec1(v) => v.fill(0.0),
            }
        }
        p.e_f[(0, 0)] = w0 as f32;
        p
    }

    fn quad_grads(p: &Parameters<f32>) -> Parameters<f32> {
        // d/dw of w^2.
        let mut g = p.zeros_like();
        g.e_f[(0, 0)] = 2.0 * p.e_f[(0, 0)];
        g
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let cfg = TrainConfig {
            lr: 5e-3,
            ..TrainConfig::default()
        };
        let mut p = quad_params(1.0);
        let mut g = p.zeros_like();
        g.e_f[(0, 0)] = 0.37; // arbitrary positive gradient
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &g, &mut state, &cfg).unwrap();
        // Bias correction makes m̂ = g and v̂ = g², so the update is
        // -lr * g/(|g| + eps) ≈ -lr * sign(g).
        let delta = p.e_f[(0, 0)] as f64 - 1.0;
        assert!((delta + cfg.lr).abs() < 1e-6, "delta = {delta}");
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let cfg = TrainConfig::default();
        let mut p = quad_params(0.5);
        let before = p.clone();
        let g = p.zeros_like();
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &g, &mut state, &cfg).unwrap();
        for ((_, a), (_, b)) in p.slots().into_iter().zip(before.slots()) {
            match (a, b) {
                (SlotRef::Mat(x), SlotRef::Mat(y)) => assert_eq!(x, y),
                (SlotRef::Vec1(x), SlotRef::Vec1(y)) => assert_eq!(x, y),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn adam_minimizes_a_scalar_quadratic_monotonically() {
        let cfg = TrainConfig {
            lr: 5e-3,
            ..TrainConfig::default()
        };
        let mut p = quad_params(1.0);
        let mut state = AdamState::new(&p);
        let mut prev = 1.0f64;
        for _ in 0..50 {
            let g = quad_grads(&p);
            adam_step(&mut p, &g, &mut state, &cfg).unwrap();
            let w = p.e_f[(0, 0)] as f64;
            assert!(w.abs() < prev.abs(), "|w| grew: {w} vs {prev}");
            prev = w;
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let cfg = TrainConfig::default();
        let mut p = quad_params(1.0);
        let mut g = p.zeros_like();
        g.act_w[(0, 0)] = f32::NAN;
        let mut state = AdamState::new(&p);
        match adam_step(&mut p, &g, &mut state, &cfg) {
            Err(Error::NonFiniteGradient { tensor, .. }) => assert_eq!(tensor, "act_head.w"),
            other => panic!("expected NonFiniteGradient, got {other:?}"),
        }
    }

    #[test]
    fn grad_clip_bounds_the_global_norm() {
        let mut g = quad_params(0.0).zeros_like();
        g.e_f = Array2::from_elem(g.e_f.raw_dim(), 3.0);
        g.act_b = Array1::from_elem(g.act_b.raw_dim(), 4.0);
        let norm = global_grad_norm(&g);
        let clip = 5.0;
        assert!(norm > clip);
        scale_grads(&mut g, (clip / norm) as f32);
        assert!((global_grad_norm(&g) - clip).abs() < 1e-3);
    }

    #[test]
    fn epoch_batches_cover_everything_deterministically() {
        let examples: Vec<LabeledExample> = crate::grammar::enumerate_all()
            .into_iter()
            .take(100)
            .map(|(ast, _)| LabeledExample::from_ast(&ast))
            .collect();
        let a = epoch_batches(&examples, 16, &mut SplitMix64::new(5));
        let b = epoch_batches(&examples, 16, &mut SplitMix64::new(5));
        assert_eq!(a, b);
        let mut seen: Vec<usize> = a.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..100).collect::<Vec<_>>());
        // Batches group by similar output length.
        for batch in &a {
            let lens: Vec<usize> = batch.iter().map(|&i| examples[i].actions.len()).collect();
            let (mn, mx) = (lens.iter().min().unwrap(), lens.iter().max().unwrap());
            assert!(mx - mn <= 48);
        }
    }

    #[test]
    fn embedding_norms_shrink_under_the_penalty_on_a_single_example_fit() {
        let mut model = fresh_model(&ModelConfig::tiny(), 3).unwrap();
        let ex = LabeledExample::from_ast(
            &parse(&tokenize("jump opposite left twice").unwrap()).unwrap(),
        );
        let norm = |m: &Array2<f32>| m.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
        let f0 = norm(&model.params.e_f);
        let p0 = norm(&model.params.e_p);
        let cfg = TrainConfig {
            batch_size: 1,
            max_steps: 100,
            eval_every: 1_000,
            dev_eval_max: 0,
            ..TrainConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        train(&mut model, &[ex], &[], &cfg, dir.path()).unwrap();
        assert!(norm(&model.params.e_f) < f0, "e_f norm did not shrink");
        assert!(norm(&model.params.e_p) < p0, "e_p norm did not shrink");
    }
}
