//! Tokenizer, parser, interpreter, and exhaustive enumerator for SCAN
//! commands.
//!
//! The grammar is closed and tiny, so the interpreter doubles as a
//! ground-truth oracle: every split file the crate touches is re-derived
//! through [`interpret`] and compared against the file's action tokens.
//!
//! ```text
//! C -> S | S and S | S after S
//! S -> V | V twice | V thrice
//! V -> P | P left | P right | P opposite <dir> | P around <dir>
//! P -> walk | look | run | jump | turn        (bare `turn` is invalid)
//! ```

use crate::error::Error;
use crate::Result;

/// The 13 input words. Closed set; anything else is a parse error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Word {
    Walk,
    Look,
    Run,
    Jump,
    Turn,
    Left,
    Right,
    Opposite,
    Around,
    Twice,
    Thrice,
    And,
    After,
}

impl Word {
    pub const ALL: [Word; 13] = [
        Word::Walk,
        Word::Look,
        Word::Run,
        Word::Jump,
        Word::Turn,
        Word::Left,
        Word::Right,
        Word::Opposite,
        Word::Around,
        Word::Twice,
        Word::Thrice,
        Word::And,
        Word::After,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Word::Walk => "walk",
            Word::Look => "look",
            Word::Run => "run",
            Word::Jump => "jump",
            Word::Turn => "turn",
            Word::Left => "left",
            Word::Right => "right",
            Word::Opposite => "opposite",
            Word::Around => "around",
            Word::Twice => "twice",
            Word::Thrice => "thrice",
            Word::And => "and",
            Word::After => "after",
        }
    }

    pub fn from_str(s: &str) -> Option<Word> {
        Word::ALL.iter().copied().find(|w| w.as_str() == s)
    }
}

/// The 6 action symbols (special tokens live in the vocab tables, not here).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Walk,
    Look,
    Run,
    Jump,
    LTurn,
    RTurn,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::Walk,
        Action::Look,
        Action::Run,
        Action::Jump,
        Action::LTurn,
        Action::RTurn,
    ];

    /// Short internal name, as used in reports and the augmented export.
    pub fn name(self) -> &'static str {
        match self {
            Action::Walk => "WALK",
            Action::Look => "LOOK",
            Action::Run => "RUN",
            Action::Jump => "JUMP",
            Action::LTurn => "LTURN",
            Action::RTurn => "RTURN",
        }
    }

    /// Token used by the official data files.
    pub fn official_name(self) -> &'static str {
        match self {
            Action::Walk => "I_WALK",
            Action::Look => "I_LOOK",
            Action::Run => "I_RUN",
            Action::Jump => "I_JUMP",
            Action::LTurn => "I_TURN_LEFT",
            Action::RTurn => "I_TURN_RIGHT",
        }
    }

    pub fn from_official(s: &str) -> Option<Action> {
        Action::ALL.iter().copied().find(|a| a.official_name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Walk,
    Look,
    Run,
    Jump,
    Turn,
}

impl Primitive {
    pub const ALL: [Primitive; 5] = [
        Primitive::Walk,
        Primitive::Look,
        Primitive::Run,
        Primitive::Jump,
        Primitive::Turn,
    ];

    fn word(self) -> Word {
        match self {
            Primitive::Walk => Word::Walk,
            Primitive::Look => Word::Look,
            Primitive::Run => Word::Run,
            Primitive::Jump => Word::Jump,
            Primitive::Turn => Word::Turn,
        }
    }

    /// The action emitted for one execution of the primitive. `turn` emits
    /// no action of its own, only the turns contributed by its direction.
    fn action(self) -> Option<Action> {
        match self {
            Primitive::Walk => Some(Action::Walk),
            Primitive::Look => Some(Action::Look),
            Primitive::Run => Some(Action::Run),
            Primitive::Jump => Some(Action::Jump),
            Primitive::Turn => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    fn word(self) -> Word {
        match self {
            Direction::Left => Word::Left,
            Direction::Right => Word::Right,
        }
    }

    fn turn(self) -> Action {
        match self {
            Direction::Left => Action::LTurn,
            Direction::Right => Action::RTurn,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Manner {
    Opposite,
    Around,
}

impl Manner {
    fn word(self) -> Word {
        match self {
            Manner::Opposite => Word::Opposite,
            Manner::Around => Word::Around,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Conjunction {
    And,
    After,
}

impl Conjunction {
    fn word(self) -> Word {
        match self {
            Conjunction::And => Word::And,
            Conjunction::After => Word::After,
        }
    }
}

/// One clause: primitive, optional direction/manner, repetition in {1,2,3}.
///
/// Constructed only through [`SubCommand::new`], which enforces the two
/// grammar invariants (a manner needs a direction; `turn` needs a direction).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubCommand {
    primitive: Primitive,
    direction: Option<Direction>,
    manner: Option<Manner>,
    repetition: u8,
}

impl SubCommand {
    pub fn new(
        primitive: Primitive,
        direction: Option<Direction>,
        manner: Option<Manner>,
        repetition: u8,
    ) -> Result<SubCommand> {
        if manner.is_some() && direction.is_none() {
            return Err(Error::MalformedCommand(
                "manner adverb without a direction".into(),
            ));
        }
        if primitive == Primitive::Turn && direction.is_none() {
            return Err(Error::MalformedCommand(
                "`turn` requires a direction".into(),
            ));
        }
        if !(1..=3).contains(&repetition) {
            return Err(Error::MalformedCommand(format!(
                "repetition {repetition} out of range"
            )));
        }
        Ok(SubCommand {
            primitive,
            direction,
            manner,
            repetition,
        })
    }

    pub fn primitive(&self) -> Primitive {
        self.primitive
    }

    pub fn direction(&self) -> Option<Direction> {
        self.direction
    }

    pub fn manner(&self) -> Option<Manner> {
        self.manner
    }

    pub fn repetition(&self) -> u8 {
        self.repetition
    }

    pub fn tokens(&self) -> Vec<Word> {
        let mut out = vec![self.primitive.word()];
        if let Some(m) = self.manner {
            out.push(m.word());
        }
        if let Some(d) = self.direction {
            out.push(d.word());
        }
        match self.repetition {
            2 => out.push(Word::Twice),
            3 => out.push(Word::Thrice),
            _ => {}
        }
        out
    }
}

/// A full command: one clause, or two joined by a conjunction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CommandAst {
    pub first: SubCommand,
    pub rest: Option<(Conjunction, SubCommand)>,
}

impl CommandAst {
    pub fn tokens(&self) -> Vec<Word> {
        let mut out = self.first.tokens();
        if let Some((conj, second)) = &self.rest {
            out.push(conj.word());
            out.extend(second.tokens());
        }
        out
    }

    pub fn text(&self) -> String {
        let words: Vec<&str> = self.tokens().iter().map(|w| w.as_str()).collect();
        words.join(" ")
    }

    /// Clauses in execution order: `after` runs the textually second clause
    /// first. Each entry is (clause, textually_second).
    pub fn clauses_in_action_order(&self) -> Vec<(&SubCommand, bool)> {
        match &self.rest {
            None => vec![(&self.first, false)],
            Some((Conjunction::And, second)) => vec![(&self.first, false), (second, true)],
            Some((Conjunction::After, second)) => vec![(second, true), (&self.first, false)],
        }
    }
}

/// Whitespace tokenization over the closed lexicon.
pub fn tokenize(text: &str) -> Result<Vec<Word>> {
    text.split_whitespace()
        .map(|tok| Word::from_str(tok).ok_or_else(|| Error::UnknownWord(tok.to_string())))
        .collect()
}

/// Parse a token list into an AST. Round-trips: `parse(t)?.tokens() == t`.
pub fn parse(tokens: &[Word]) -> Result<CommandAst> {
    if tokens.is_empty() {
        return Err(Error::MalformedCommand("empty command".into()));
    }
    let conj_positions: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, w)| matches!(w, Word::And | Word::After))
        .map(|(i, _)| i)
        .collect();
    match conj_positions.as_slice() {
        [] => Ok(CommandAst {
            first: parse_sub(tokens)?,
            rest: None,
        }),
        [i] => {
            let conj = match tokens[*i] {
                Word::And => Conjunction::And,
                Word::After => Conjunction::After,
                _ => unreachable!(),
            };
            let first = parse_sub(&tokens[..*i])?;
            let second = parse_sub(&tokens[*i + 1..])?;
            Ok(CommandAst {
                first,
                rest: Some((conj, second)),
            })
        }
        _ => Err(Error::MalformedCommand(
            "more than one conjunction".into(),
        )),
    }
}

fn parse_sub(tokens: &[Word]) -> Result<SubCommand> {
    let mut it = tokens.iter().copied().peekable();
    let primitive = match it.next() {
        Some(Word::Walk) => Primitive::Walk,
        Some(Word::Look) => Primitive::Look,
        Some(Word::Run) => Primitive::Run,
        Some(Word::Jump) => Primitive::Jump,
        Some(Word::Turn) => Primitive::Turn,
        Some(w) => {
            return Err(Error::MalformedCommand(format!(
                "clause must start with a primitive, got `{}`",
                w.as_str()
            )))
        }
        None => return Err(Error::MalformedCommand("empty clause".into())),
    };
    let manner = match it.peek() {
        Some(Word::Opposite) => {
            it.next();
            Some(Manner::Opposite)
        }
        Some(Word::Around) => {
            it.next();
            Some(Manner::Around)
        }
        _ => None,
    };
    let direction = match it.peek() {
        Some(Word::Left) => {
            it.next();
            Some(Direction::Left)
        }
        Some(Word::Right) => {
            it.next();
            Some(Direction::Right)
        }
        _ => None,
    };
    let repetition = match it.peek() {
        Some(Word::Twice) => {
            it.next();
            2
        }
        Some(Word::Thrice) => {
            it.next();
            3
        }
        _ => 1,
    };
    if let Some(w) = it.next() {
        return Err(Error::MalformedCommand(format!(
            "unexpected `{}` at end of clause",
            w.as_str()
        )));
    }
    SubCommand::new(primitive, direction, manner, repetition)
}

/// The action subsequence for one repetition of a clause, plus the
/// repetition count. Unit lengths are 1/2/3/8 for ordinary primitives and
/// 1/2/4 for `turn`.
pub fn interpret_sub(sc: &SubCommand) -> (Vec<Action>, u8) {
    let step: Vec<Action> = match sc.direction {
        None => vec![sc.primitive.action().expect("bare turn is unreachable")],
        Some(d) => {
            let turns = match sc.manner {
                None => 1,
                Some(Manner::Opposite) => 2,
                Some(Manner::Around) => 1,
            };
            let mut s = vec![d.turn(); turns];
            if let Some(a) = sc.primitive.action() {
                s.push(a);
            }
            s
        }
    };
    let unit = if sc.manner == Some(Manner::Around) {
        step.iter().copied().cycle().take(step.len() * 4).collect()
    } else {
        step
    };
    (unit, sc.repetition)
}

/// Full interpretation of a command into its action sequence.
pub fn interpret(ast: &CommandAst) -> Vec<Action> {
    let mut out = Vec::new();
    for (clause, _) in ast.clauses_in_action_order() {
        let (unit, reps) = interpret_sub(clause);
        for _ in 0..reps {
            out.extend_from_slice(&unit);
        }
    }
    out
}

/// Tokenize + parse + interpret in one step.
pub fn interpret_command(text: &str) -> Result<Vec<Action>> {
    Ok(interpret(&parse(&tokenize(text)?)?))
}

fn all_subcommands() -> Vec<SubCommand> {
    let mut subs = Vec::new();
    for &p in &Primitive::ALL {
        for rep in 1..=3u8 {
            if p != Primitive::Turn {
                subs.push(SubCommand::new(p, None, None, rep).unwrap());
            }
            for &d in &[Direction::Left, Direction::Right] {
                for m in [None, Some(Manner::Opposite), Some(Manner::Around)] {
                    subs.push(SubCommand::new(p, Some(d), m, rep).unwrap());
                }
            }
        }
    }
    subs
}

/// Every derivable (command, actions) pair, duplicate-free, sorted
/// lexicographically on the token list so downstream fixtures are stable.
pub fn enumerate_all() -> Vec<(CommandAst, Vec<Action>)> {
    let subs = all_subcommands();
    let mut cmds: Vec<CommandAst> = Vec::with_capacity(subs.len() + 2 * subs.len() * subs.len());
    for &first in &subs {
        cmds.push(CommandAst { first, rest: None });
        for &conj in &[Conjunction::And, Conjunction::After] {
            for &second in &subs {
                cmds.push(CommandAst {
                    first,
                    rest: Some((conj, second)),
                });
            }
        }
    }
    cmds.sort_by(|a, b| a.tokens().cmp(&b.tokens()));
    cmds.into_iter()
        .map(|ast| {
            let actions = interpret(&ast);
            (ast, actions)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acts(names: &[&str]) -> Vec<Action> {
        names
            .iter()
            .map(|n| Action::ALL.iter().copied().find(|a| a.name() == *n).unwrap())
            .collect()
    }

    #[test]
    fn tokenize_basic() {
        assert_eq!(tokenize("jump").unwrap(), vec![Word::Jump]);
        assert_eq!(
            tokenize("jump opposite left twice").unwrap(),
            vec![Word::Jump, Word::Opposite, Word::Left, Word::Twice]
        );
        match tokenize("dax twice") {
            Err(Error::UnknownWord(w)) => assert_eq!(w, "dax"),
            other => panic!("expected UnknownWord, got {other:?}"),
        }
    }

    #[test]
    fn parse_basic() {
        let ast = parse(&tokenize("jump").unwrap()).unwrap();
        assert_eq!(ast.first.primitive(), Primitive::Jump);
        assert_eq!(ast.first.repetition(), 1);
        assert!(ast.rest.is_none());

        let ast = parse(&tokenize("jump twice and walk opposite left").unwrap()).unwrap();
        assert_eq!(ast.first.primitive(), Primitive::Jump);
        assert_eq!(ast.first.repetition(), 2);
        let (conj, second) = ast.rest.unwrap();
        assert_eq!(conj, Conjunction::And);
        assert_eq!(second.primitive(), Primitive::Walk);
        assert_eq!(second.direction(), Some(Direction::Left));
        assert_eq!(second.manner(), Some(Manner::Opposite));
        assert_eq!(second.repetition(), 1);
    }

    #[test]
    fn parse_rejects_malformed() {
        for bad in [
            "walk around",       // manner without direction
            "turn",              // bare turn
            "turn twice",        // turn without direction
            "jump twice thrice", // two repetition adverbs
            "jump and",          // trailing conjunction
            "and jump",          // leading conjunction
            "jump and walk and look",
            "jump left opposite", // adverbs out of order
            "left",
            "",
        ] {
            let toks = tokenize(bad).unwrap();
            assert!(
                matches!(parse(&toks), Err(Error::MalformedCommand(_))),
                "`{bad}` should be malformed"
            );
        }
    }

    #[test]
    fn interpret_sub_units() {
        let sc = SubCommand::new(Primitive::Jump, Some(Direction::Left), Some(Manner::Opposite), 2)
            .unwrap();
        let (unit, r) = interpret_sub(&sc);
        assert_eq!(unit, acts(&["LTURN", "LTURN", "JUMP"]));
        assert_eq!(r, 2);

        let sc = SubCommand::new(Primitive::Jump, Some(Direction::Left), Some(Manner::Around), 3)
            .unwrap();
        let (unit, r) = interpret_sub(&sc);
        assert_eq!(
            unit,
            acts(&["LTURN", "JUMP", "LTURN", "JUMP", "LTURN", "JUMP", "LTURN", "JUMP"])
        );
        assert_eq!(r, 3);

        let sc = SubCommand::new(Primitive::Turn, Some(Direction::Left), Some(Manner::Around), 1)
            .unwrap();
        let (unit, r) = interpret_sub(&sc);
        assert_eq!(unit, acts(&["LTURN", "LTURN", "LTURN", "LTURN"]));
        assert_eq!(r, 1);
    }

    #[test]
    fn interpret_conjunctions() {
        assert_eq!(
            interpret_command("jump twice and walk opposite left").unwrap(),
            acts(&["JUMP", "JUMP", "LTURN", "LTURN", "WALK"])
        );
        // `after` runs the textually second clause first.
        let expected: Vec<Action> = acts(&["LTURN", "LTURN", "JUMP"])
            .repeat(3)
            .into_iter()
            .chain(acts(&["RTURN", "WALK"]).repeat(2))
            .collect();
        assert_eq!(
            interpret_command("walk right twice after jump opposite left thrice").unwrap(),
            expected
        );
        let expected: Vec<Action> = acts(&["RUN", "RUN", "RUN"])
            .into_iter()
            .chain(acts(&["RTURN", "LOOK"]).repeat(8))
            .collect();
        assert_eq!(
            interpret_command("look around right twice after run thrice").unwrap(),
            expected
        );
    }

    #[test]
    fn enumeration_counts() {
        let all = enumerate_all();
        let singles = all.iter().filter(|(ast, _)| ast.rest.is_none()).count();
        assert_eq!(singles, 102);
        assert_eq!(all.len(), 20_910);
        let max_len = all.iter().map(|(_, a)| a.len()).max().unwrap();
        assert_eq!(max_len, 48);
    }

    #[test]
    fn enumeration_is_sorted_and_duplicate_free() {
        let all = enumerate_all();
        for pair in all.windows(2) {
            assert!(pair[0].0.tokens() < pair[1].0.tokens());
        }
    }

    #[test]
    fn round_trip_over_entire_grammar() {
        for (ast, actions) in enumerate_all() {
            let toks = ast.tokens();
            let reparsed = parse(&toks).expect("enumerated command must parse");
            assert_eq!(reparsed, ast);
            assert_eq!(reparsed.tokens(), toks);
            assert_eq!(interpret(&reparsed), actions);
        }
    }

    #[test]
    fn length_law_over_entire_grammar() {
        for (ast, actions) in enumerate_all() {
            let expected: usize = ast
                .clauses_in_action_order()
                .iter()
                .map(|(c, _)| {
                    let (unit, r) = interpret_sub(c);
                    assert!(matches!(unit.len(), 1 | 2 | 3 | 4 | 8));
                    assert!(matches!(r, 1..=3));
                    unit.len() * r as usize
                })
                .sum();
            assert_eq!(actions.len(), expected, "command `{}`", ast.text());
        }
    }
}
