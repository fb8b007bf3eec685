//! Auxiliary supervision sequences.
//!
//! For a clause whose action sequence is `unit × R` (unit length `L`,
//! repetition `R`):
//!
//! - **AuxSeq1** counts down the remaining repetitions: the id `R-1-r` is
//!   emitted `L` times for each repetition `r`. It exposes the sequence's
//!   segmentation into repeated units.
//! - **AuxSeq2** counts down inside each unit: `[L-1, L-2, ..., 0]` repeated
//!   `R` times. It exposes each unit's length and completion.
//!
//! The textually second clause of a two-clause command gets every AuxSeq1 id
//! incremented by 3 (the maximum repetition) and every AuxSeq2 id incremented
//! by 8 (the maximum unit length). Offsets key on textual position, not
//! execution order, while the emitted blocks follow action order — so under
//! `after` the offset block comes first.

use crate::grammar::{interpret_sub, CommandAst, SubCommand};

/// AuxSeq1 offset for the textually second clause.
pub const AUX1_OFFSET: u8 = 3;
/// AuxSeq2 offset for the textually second clause.
pub const AUX2_OFFSET: u8 = 8;

/// Largest AuxSeq1 id: base max (R-1 = 2) plus the second-clause offset.
pub const AUX1_MAX: u8 = 2 + AUX1_OFFSET;
/// Largest AuxSeq2 id: base max (L-1 = 7) plus the second-clause offset.
pub const AUX2_MAX: u8 = 7 + AUX2_OFFSET;

/// Both auxiliary sequences for one command, aligned with its actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxLabels {
    pub aux1: Vec<u8>,
    pub aux2: Vec<u8>,
}

/// Table sizes for the auxiliary id vocabularies: (AUX1_MAX, AUX2_MAX).
/// Grammar constants, independent of any particular corpus.
pub fn aux_vocab_bounds() -> (u8, u8) {
    (AUX1_MAX, AUX2_MAX)
}

fn clause_dims(sc: &SubCommand) -> (usize, usize) {
    let (unit, reps) = interpret_sub(sc);
    (unit.len(), reps as usize)
}

/// Repetition-countdown sequence for a command.
pub fn gen_aux1(ast: &CommandAst) -> Vec<u8> {
    let mut out = Vec::new();
    for (clause, second) in ast.clauses_in_action_order() {
        let (unit_len, reps) = clause_dims(clause);
        let offset = if second { AUX1_OFFSET } else { 0 };
        for r in 0..reps {
            let id = (reps - 1 - r) as u8 + offset;
            out.extend(std::iter::repeat(id).take(unit_len));
        }
    }
    out
}

/// Within-unit countdown sequence for a command.
pub fn gen_aux2(ast: &CommandAst) -> Vec<u8> {
    let mut out = Vec::new();
    for (clause, second) in ast.clauses_in_action_order() {
        let (unit_len, reps) = clause_dims(clause);
        let offset = if second { AUX2_OFFSET } else { 0 };
        for _ in 0..reps {
            for k in (0..unit_len).rev() {
                out.push(k as u8 + offset);
            }
        }
    }
    out
}

pub fn gen_labels(ast: &CommandAst) -> AuxLabels {
    AuxLabels {
        aux1: gen_aux1(ast),
        aux2: gen_aux2(ast),
    }
}

/// Per-clause structure recovered from a pair of auxiliary sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClauseShape {
    pub repetitions: usize,
    pub unit_len: usize,
    pub textually_second: bool,
}

/// Strict inverse of (`gen_aux1`, `gen_aux2`): recovers (R, L) per clause, or
/// `None` when the pair is not a well-formed countdown structure. Used both
/// by the decodability property test and by the evaluation error taxonomy
/// (where the inputs are model predictions and may be arbitrary).
pub fn reconstruct_clauses(aux1: &[u8], aux2: &[u8]) -> Option<Vec<ClauseShape>> {
    if aux1.len() != aux2.len() {
        return None;
    }
    if aux1.is_empty() {
        return Some(Vec::new());
    }
    // Segment by offset class; at most one class change is legal.
    let classes: Vec<bool> = aux1.iter().map(|&v| v >= AUX1_OFFSET).collect();
    let mut blocks: Vec<(usize, usize, bool)> = Vec::new();
    let mut start = 0;
    for i in 1..classes.len() {
        if classes[i] != classes[i - 1] {
            blocks.push((start, i, classes[start]));
            start = i;
        }
    }
    blocks.push((start, classes.len(), classes[start]));
    if blocks.len() > 2 {
        return None;
    }

    let mut shapes = Vec::new();
    for (lo, hi, second) in blocks {
        let off1 = if second { AUX1_OFFSET } else { 0 };
        let off2 = if second { AUX2_OFFSET } else { 0 };
        let a1: Vec<u8> = aux1[lo..hi]
            .iter()
            .map(|&v| v.checked_sub(off1))
            .collect::<Option<_>>()?;
        let a2: Vec<u8> = aux2[lo..hi]
            .iter()
            .map(|&v| v.checked_sub(off2))
            .collect::<Option<_>>()?;
        if a1.iter().any(|&v| v > 2) || a2.iter().any(|&v| v > 7) {
            return None;
        }
        let reps = a1[0] as usize + 1;
        let n = hi - lo;
        if n % reps != 0 {
            return None;
        }
        let unit_len = n / reps;
        for r in 0..reps {
            for k in 0..unit_len {
                if a1[r * unit_len + k] as usize != reps - 1 - r {
                    return None;
                }
                if a2[r * unit_len + k] as usize != unit_len - 1 - k {
                    return None;
                }
            }
        }
        shapes.push(ClauseShape {
            repetitions: reps,
            unit_len,
            textually_second: second,
        });
    }
    Some(shapes)
}

/// The clause shapes a gold AST implies, in action order.
pub fn gold_shapes(ast: &CommandAst) -> Vec<ClauseShape> {
    ast.clauses_in_action_order()
        .iter()
        .map(|(clause, second)| {
            let (unit_len, reps) = clause_dims(clause);
            ClauseShape {
                repetitions: reps,
                unit_len,
                textually_second: *second,
            }
        })
        .collect()
}
