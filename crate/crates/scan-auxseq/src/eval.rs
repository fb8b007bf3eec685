//! Greedy-decoding evaluation: per-channel exact match and a failure-mode
//! taxonomy driven by the per-clause (repetitions, unit length) structure
//! reconstructed from the predicted auxiliary sequences.

use crate::auxgen::{gold_shapes, reconstruct_clauses, ClauseShape};
use crate::data::LabeledExample;
use crate::grammar::parse;
use crate::model::{Decoded, Model};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// 1 iff both sequences have identical length and ids at every position.
pub fn exact_match<A: PartialEq>(pred: &[A], gold: &[A]) -> bool {
    pred.len() == gold.len() && pred.iter().zip(gold).all(|(a, b)| a == b)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBuckets {
    /// Clause unit lengths right, some repetition count wrong.
    pub wrong_repetition_count: usize,
    /// Repetitions right but the unit's length or content wrong.
    pub wrong_unit_semantics: usize,
    /// Decoding hit the length cap without emitting EOS.
    pub length_overrun: usize,
    /// Anything else (undecodable aux structure, clause count mismatch, ...).
    pub other: usize,
}

impl ErrorBuckets {
    pub fn total(&self) -> usize {
        self.wrong_repetition_count + self.wrong_unit_semantics + self.length_overrun + self.other
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub action_acc: f64,
    pub aux1_acc: f64,
    pub aux2_acc: f64,
    pub buckets: ErrorBuckets,
    pub n_examples: usize,
    pub seed: u64,
}

/// Classify one action-mismatched prediction.
pub fn classify_mismatch(pred: &Decoded, gold: &LabeledExample, vocab: &crate::vocab::VocabSet) -> Bucket {
    if pred.truncated {
        return Bucket::LengthOverrun;
    }
    // Map predicted aux ids back to raw countdown values; special tokens in
    // an aux channel make the structure undecodable.
    let values = |ids: &[usize]| -> Option<Vec<u8>> {
        ids.iter().map(|&id| vocab.aux_value_from_id(id)).collect()
    };
    let (a1, a2) = match (values(&pred.aux1), values(&pred.aux2)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Bucket::Other,
    };
    let pred_shapes = match reconstruct_clauses(&a1, &a2) {
        Some(s) => s,
        None => return Bucket::Other,
    };
    let gold_ast = parse(&gold.tokens).expect("gold example parses");
    let gold = gold_shapes(&gold_ast);
    if pred_shapes.len() != gold.len() {
        return Bucket::Other;
    }
    let same = |f: fn(&ClauseShape) -> usize| {
        pred_shapes
            .iter()
            .zip(&gold)
            .all(|(p, g)| f(p) == f(g))
    };
    let lens_match = same(|s| s.unit_len);
    let reps_match = same(|s| s.repetitions);
    match (reps_match, lens_match) {
        (false, true) => Bucket::WrongRepetitionCount,
        // Unit structure wrong, or structure right but the action content
        // inside the unit wrong: both are unit-semantics failures.
        (true, _) => Bucket::WrongUnitSemantics,
        (false, false) => Bucket::Other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bucket {
    WrongRepetitionCount,
    WrongUnitSemantics,
    LengthOverrun,
    Other,
}

/// Greedy-decode every example and score all three channels.
pub fn evaluate<T: Scalar>(model: &Model<T>, examples: &[LabeledExample], seed: u64) -> RunMetrics {
    let vocab = &model.vocab;
    let max_len = model.config.max_len;
    let srcs: Vec<Vec<usize>> = examples
        .iter()
        .map(|ex| ex.tokens.iter().map(|&w| vocab.input_id(w)).collect())
        .collect();
    let decoded = model.greedy_decode_batch(&srcs, max_len);

    let mut metrics = RunMetrics {
        action_acc: 0.0,
        aux1_acc: 0.0,
        aux2_acc: 0.0,
        buckets: ErrorBuckets::default(),
        n_examples: examples.len(),
        seed,
    };
    let (mut a_ok, mut x1_ok, mut x2_ok) = (0usize, 0usize, 0usize);
    for (ex, pred) in examples.iter().zip(&decoded) {
        let gold_act: Vec<usize> = ex.actions.iter().map(|&a| vocab.action_id(a)).collect();
        let gold_a1: Vec<usize> = ex.aux1.iter().map(|&v| vocab.aux_id(v)).collect();
        let gold_a2: Vec<usize> = ex.aux2.iter().map(|&v| vocab.aux_id(v)).collect();
        let act_hit = exact_match(&pred.actions, &gold_act);
        a_ok += act_hit as usize;
        x1_ok += exact_match(&pred.aux1, &gold_a1) as usize;
        x2_ok += exact_match(&pred.aux2, &gold_a2) as usize;
        if !act_hit {
            match classify_mismatch(pred, ex, vocab) {
                Bucket::WrongRepetitionCount => metrics.buckets.wrong_repetition_count += 1,
                Bucket::WrongUnitSemantics => metrics.buckets.wrong_unit_semantics += 1,
                Bucket::LengthOverrun => metrics.buckets.length_overrun += 1,
                Bucket::Other => metrics.buckets.other += 1,
            }
        }
    }
    let n = examples.len().max(1) as f64;
    metrics.action_acc = a_ok as f64 / n;
    metrics.aux1_acc = x1_ok as f64 / n;
    metrics.aux2_acc = x2_ok as f64 / n;
    metrics
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::tokenize;
    use crate::model::{Mode, ModelConfig};
    use crate::vocab::VocabSet;

    fn example(cmd: &str) -> LabeledExample {
        LabeledExample::from_ast(&parse(&tokenize(cmd).unwrap()).unwrap())
    }

    #[test]
    fn exact_match_basics() {
        assert!(exact_match(&[1, 2, 3], &[1, 2, 3]));
        assert!(!exact_match(&[1, 3, 2], &[1, 2, 3])); // same multiset, wrong order
        assert!(!exact_match(&[1, 2], &[1, 2, 3])); // prefix only
        assert!(exact_match::<usize>(&[], &[]));
        // Symmetry.
        assert_eq!(exact_match(&[4, 5], &[5, 4]), exact_match(&[5, 4], &[4, 5]));
    }

    fn gold_as_decoded(ex: &LabeledExample, vocab: &VocabSet) -> Decoded {
        Decoded {
            actions: ex.actions.iter().map(|&a| vocab.action_id(a)).collect(),
            aux1: ex.aux1.iter().map(|&v| vocab.aux_id(v)).collect(),
            aux2: ex.aux2.iter().map(|&v| vocab.aux_id(v)).collect(),
            truncated: false,
        }
    }

    #[test]
    fn repetition_miscount_lands_in_the_right_bucket() {
        let vocab = VocabSet::standard();
        // Gold wants "jump around left twice" (R=2, L=8); the prediction
        // repeats the unit thrice — the classic baseline failure.
        let gold = example("jump around left twice");
        let wrong = example("jump around left thrice");
        let pred = gold_as_decoded(&wrong, &vocab);
        assert_eq!(
            classify_mismatch(&pred, &gold, &vocab),
            Bucket::WrongRepetitionCount
        );
    }

    #[test]
    fn unit_confusion_lands_in_unit_semantics() {
        let vocab = VocabSet::standard();
        // "opposite" (L=3) decoded instead of "around" (L=8), same R.
        let gold = example("jump around left twice");
        let wrong = example("jump opposite left twice");
        let pred = gold_as_decoded(&wrong, &vocab);
        assert_eq!(
            classify_mismatch(&pred, &gold, &vocab),
            Bucket::WrongUnitSemantics
        );
        // Same (R, L) but wrong action content: "walk left" for "jump left".
        let gold = example("jump left twice");
        let wrong = example("walk left twice");
        let pred = gold_as_decoded(&wrong, &vocab);
        assert_eq!(
            classify_mismatch(&pred, &gold, &vocab),
            Bucket::WrongUnitSemantics
        );
    }

    #[test]
    fn truncation_and_garbage_land_in_their_buckets() {
        let vocab = VocabSet::standard();
        let gold = example("jump twice");
        let mut pred = gold_as_decoded(&example("jump thrice"), &vocab);
        pred.truncated = true;
        assert_eq!(classify_mismatch(&pred, &gold, &vocab), Bucket::LengthOverrun);

        // Aux channels full of SOS ids cannot be decoded into clause shapes.
        let pred = Decoded {
            actions: vec![vocab.action_id(crate::grammar::Action::Walk)],
            aux1: vec![crate::vocab::SOS],
            aux2: vec![crate::vocab::SOS],
            truncated: false,
        };
        assert_eq!(classify_mismatch(&pred, &gold, &vocab), Bucket::Other);

        // Clause count mismatch.
        let gold2 = example("jump twice and walk");
        let pred2 = gold_as_decoded(&example("jump twice"), &vocab);
        assert_eq!(classify_mismatch(&pred2, &gold2, &vocab), Bucket::Other);
    }

    #[test]
    fn gold_predictions_score_perfectly_and_purely() {
        // An untrained model scores near zero; this checks purity and the
        // bucket-count invariant. Gold-as-prediction scoring is covered below.
        let model: Model<f64> =
            Model::new(ModelConfig::tiny(), VocabSet::standard(), 9).unwrap();
        let examples: Vec<LabeledExample> =
            ["jump", "walk left", "run around right twice"].map(|c| example(c)).to_vec();
        let a = evaluate(&model, &examples, 7);
        let b = evaluate(&model, &examples, 7);
        assert_eq!(a, b, "evaluate must be pure");
        assert_eq!(a.n_examples, 3);
        assert!(a.action_acc >= 0.0 && a.action_acc <= 1.0);
        // Bucket counts account for every action mismatch.
        let mismatches = ((1.0 - a.action_acc) * 3.0).round() as usize;
        assert_eq!(a.buckets.total(), mismatches);
    }

    #[test]
    fn evaluate_scores_a_forced_perfect_model() {
        // Gold-as-predictions sanity: feed the scoring loop decoded outputs
        // equal to the labels by bypassing the model path.
        let vocab = VocabSet::standard();
        let examples = [example("jump twice"), example("walk opposite left")];
        let mut a_ok = 0;
        for ex in &examples {
            let pred = gold_as_decoded(ex, &vocab);
            let gold_act: Vec<usize> = ex.actions.iter().map(|&a| vocab.action_id(a)).collect();
            a_ok += exact_match(&pred.actions, &gold_act) as usize;
        }
        assert_eq!(a_ok, examples.len());
    }
}
