//! The reference reasoner: propagates relative positions and answers queries.
//!
//! Facts are edges in a displacement graph: `rel(A, B)` pins `pos(A) −
//! pos(B)` to the relation's unit offset. Starting from an arbitrary anchor
//! per connected component, the solver floods coordinates in both edge
//! directions (an edge constrains the object from the subject via the
//! inverted offset) and reads the answer off the endpoint delta — exactly
//! the computation a grounded logic program performs, minus the grounding.
//!
//! The coordinate window mirrors the logic program's finite number range:
//! positions outside `[-bound, bound]` are never derived. A query whose
//! endpoints can't both be located yields [`SolveOutcome::InsufficientInfo`];
//! two derivations disagreeing on a node yields a
//! [`SolveOutcome::Contradiction`] naming the edge that exposed it. Stories
//! from the generator are contradiction-free by construction, so the latter
//! only fires on hand-written or corrupted input.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::direction::{direction_of, invert, offset_of, Direction, Position};
use crate::lingo::TemplatePack;
use crate::parser::{self, ParseError, ParsedProgram};

/// Result of solving one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    /// Both endpoints located; this is the direction of subject relative to
    /// object.
    Answer(Direction),
    /// The endpoints are not connected (or not locatable inside the window).
    InsufficientInfo,
    /// Two derivation paths disagree; the named fact exposed the clash.
    Contradiction {
        /// Subject of the exposing fact.
        subject: String,
        /// Its relation.
        relation: Direction,
        /// Object of the exposing fact.
        object: String,
    },
}

/// Solves a query over a fact list. `bound` is the half-width of the
/// coordinate window (the reference window is 100).
pub fn solve(
    facts: &[(String, Direction, String)],
    query: (&str, &str),
    bound: i64,
) -> SolveOutcome {
    // Index entities densely. BTreeMap keeps iteration deterministic.
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for (s, _, o) in facts {
        for name in [s.as_str(), o.as_str()] {
            let next = ids.len();
            ids.entry(name).or_insert(next);
        }
    }
    let n = ids.len();

    // Adjacency: for each node, (neighbour, offset-from-neighbour-to-node,
    // fact index). Edge rel(S, O) constrains pos(S) = pos(O) + offset(rel)
    // and pos(O) = pos(S) + invert-offset.
    let mut adj: Vec<Vec<(usize, (i64, i64), usize)>> = Vec::new();
    adj.resize_with(n, Vec::new);
    for (fi, (s, rel, o)) in facts.iter().enumerate() {
        let si = ids[s.as_str()];
        let oi = ids[o.as_str()];
        let off = offset_of(*rel);
        adj[si].push((oi, (-(off.dx as i64), -(off.dy as i64)), fi));
        adj[oi].push((si, (off.dx as i64, off.dy as i64), fi));
    }

    // Connected components, by pure graph connectivity (the window plays no
    // part here): clipping a far-away coordinate must not make a node look
    // like a fresh component to be re-anchored.
    let mut comp = alloc::vec![usize::MAX; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut n_comps = 0usize;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = n_comps;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &(v, _, _) in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = n_comps;
                    stack.push(v);
                }
            }
        }
        n_comps += 1;
    }

    // One anchor per component at the origin. The query subject anchors its
    // own component — the same convention the logic program uses with an
    // appended `location(subject, 0, 0)` — so the window is always centred
    // where the question is asked. Other components anchor at their
    // first-seen node; they only matter for contradiction detection.
    let mut anchors = alloc::vec![None; n_comps];
    if let Some(&qs) = ids.get(query.0) {
        anchors[comp[qs]] = Some(qs);
    }
    for u in 0..n {
        if anchors[comp[u]].is_none() {
            anchors[comp[u]] = Some(u);
        }
    }

    let mut pos: Vec<Option<Position>> = Vec::new();
    pos.resize(n, None);
    let mut worklist: Vec<usize> = Vec::new();
    for &anchor in anchors.iter().flatten() {
        pos[anchor] = Some(Position::ORIGIN);
        worklist.push(anchor);
        while let Some(u) = worklist.pop() {
            let pu = pos[u].expect("worklist nodes are located");
            for &(v, (dx, dy), fi) in &adj[u] {
                let cand = Position { x: pu.x + dx, y: pu.y + dy };
                if cand.x.abs() > bound || cand.y.abs() > bound {
                    // Outside the window: the program would never ground
                    // this location, so neither do we.
                    continue;
                }
                match pos[v] {
                    None => {
                        pos[v] = Some(cand);
                        worklist.push(v);
                    }
                    Some(existing) if existing == cand => {}
                    Some(_) => {
                        let (s, rel, o) = &facts[fi];
                        return SolveOutcome::Contradiction {
                            subject: s.clone(),
                            relation: *rel,
                            object: o.clone(),
                        };
                    }
                }
            }
        }
    }

    let (Some(&qs), Some(&qo)) = (ids.get(query.0), ids.get(query.1)) else {
        return SolveOutcome::InsufficientInfo;
    };
    if comp[qs] != comp[qo] {
        return SolveOutcome::InsufficientInfo;
    }
    let (Some(ps), Some(po)) = (pos[qs], pos[qo]) else {
        return SolveOutcome::InsufficientInfo;
    };
    SolveOutcome::Answer(direction_of(ps.delta(po)))
}

/// Why a rendered instance failed verification.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyFailure {
    /// The story text doesn't parse back under its pack.
    #[error("parse failure: {0}")]
    Parse(#[from] ParseError),
    /// The stored answer label isn't in the pack's lexicon.
    #[error("answer label `{0}` is not in the pack lexicon")]
    UnknownLabel(String),
    /// Solving disagreed with the stored answer.
    #[error("solver produced {got:?}, instance stores {want:?}")]
    WrongOutcome {
        /// What the solver derived.
        got: SolveOutcome,
        /// What the instance claims.
        want: SolveOutcome,
    },
}

/// Full-circle check of a rendered instance: parse the story, solve the
/// query, compare with the stored answer label.
pub fn verify_rendered(
    lines: &[String],
    question: &str,
    answer_label: &str,
    pack: &TemplatePack,
    bound: i64,
) -> Result<(), VerifyFailure> {
    let program = parser::parse_story(lines, question, pack)?;
    let want = SolveOutcome::Answer(
        pack.label_direction(answer_label)
            .ok_or_else(|| VerifyFailure::UnknownLabel(answer_label.to_string()))?,
    );
    let got = solve_program(&program, bound);
    if got == want {
        Ok(())
    } else {
        Err(VerifyFailure::WrongOutcome { got, want })
    }
}

/// Solves a parsed program directly.
pub fn solve_program(program: &ParsedProgram, bound: i64) -> SolveOutcome {
    let facts: Vec<(String, Direction, String)> = program
        .facts
        .iter()
        .map(|f| (f.subject.clone(), f.relation, f.object.clone()))
        .collect();
    solve(&facts, (&program.query.0, &program.query.1), bound)
}

/// Convenience: the inverse relation stated the other way round is the same
/// constraint. Used by tests and the noise machinery.
pub fn flip(fact: (String, Direction, String)) -> (String, Direction, String) {
    (fact.2, invert(fact.1), fact.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn f(s: &str, d: Direction, o: &str) -> (String, Direction, String) {
        (s.to_string(), d, o.to_string())
    }

    #[test]
    fn worked_chain_answers_match_hand_propagation() {
        // XAH ── top_right ── XAM, then XAH ── down_right ── XAJ, query the
        // ends: pos(XAM) = pos(XAH) − (1,1); pos(XAJ) = pos(XAH) − (1,−1);
        // XAM − XAJ = (0, −2) → down.
        let facts = vec![
            f("XAH", Direction::TopRight, "XAM"),
            f("XAH", Direction::DownRight, "XAJ"),
        ];
        assert_eq!(
            solve(&facts, ("XAM", "XAJ"), 100),
            SolveOutcome::Answer(Direction::Down)
        );
    }

    #[test]
    fn single_fact_answers_both_ways() {
        let facts = vec![f("A", Direction::TopLeft, "B")];
        assert_eq!(solve(&facts, ("A", "B"), 100), SolveOutcome::Answer(Direction::TopLeft));
        assert_eq!(solve(&facts, ("B", "A"), 100), SolveOutcome::Answer(Direction::DownRight));
        assert_eq!(solve(&facts, ("A", "A"), 100), SolveOutcome::Answer(Direction::Overlap));
    }

    #[test]
    fn disconnected_components_are_insufficient() {
        let facts = vec![
            f("A", Direction::Top, "B"),
            f("C", Direction::Left, "D"),
        ];
        assert_eq!(solve(&facts, ("A", "D"), 100), SolveOutcome::InsufficientInfo);
        assert_eq!(solve(&facts, ("A", "E"), 100), SolveOutcome::InsufficientInfo);
    }

    #[test]
    fn redundant_consistent_facts_are_fine() {
        let facts = vec![
            f("A", Direction::Top, "B"),
            f("B", Direction::Down, "A"),
            f("A", Direction::Top, "B"),
        ];
        assert_eq!(solve(&facts, ("A", "B"), 100), SolveOutcome::Answer(Direction::Top));
    }

    #[test]
    fn cycle_with_disagreeing_sum_is_a_contradiction() {
        // A above B, B above C, but C also above A: the cycle cannot close.
        let facts = vec![
            f("A", Direction::Top, "B"),
            f("B", Direction::Top, "C"),
            f("C", Direction::Top, "A"),
        ];
        match solve(&facts, ("A", "C"), 100) {
            SolveOutcome::Contradiction { .. } => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn consistent_cycle_closes() {
        // A square: right, top, left, down returns to start.
        let facts = vec![
            f("B", Direction::Right, "A"),
            f("C", Direction::Top, "B"),
            f("D", Direction::Left, "C"),
            f("A", Direction::Down, "D"),
        ];
        assert_eq!(solve(&facts, ("C", "A"), 100), SolveOutcome::Answer(Direction::TopRight));
    }

    #[test]
    fn window_clips_distant_derivations() {
        // A chain of 5 rightward steps with a window of 3: the far end is
        // underivable, so the query cannot be answered.
        let facts: Vec<_> = (0..5)
            .map(|i| f(&alloc::format!("N{}", i + 1), Direction::Right, &alloc::format!("N{i}")))
            .collect();
        assert_eq!(solve(&facts, ("N5", "N0"), 3), SolveOutcome::InsufficientInfo);
        // A window of 5 fits the whole chain.
        assert_eq!(solve(&facts, ("N5", "N0"), 5), SolveOutcome::Answer(Direction::Right));
    }

    #[test]
    fn flip_preserves_the_constraint() {
        let a = f("P", Direction::DownLeft, "Q");
        let b = flip(a.clone());
        assert_eq!(b, f("Q", Direction::TopRight, "P"));
        assert_eq!(solve(&[a], ("P", "Q"), 100), solve(&[b], ("P", "Q"), 100));
    }

    #[test]
    fn verify_accepts_generated_instances_and_rejects_wrong_labels() {
        use crate::lingo::{render_story, TemplatePack};
        use crate::rng::rng_from_seed;
        use crate::story::{generate_walk, make_skeleton, GenOptions};

        let pack = TemplatePack::builtin("english").unwrap();
        let mut rng = rng_from_seed(77);
        let opts = GenOptions::default();
        let walk = generate_walk(6, &opts, &mut rng).unwrap();
        let sk = make_skeleton(&walk, &opts, &mut rng);
        let names: Vec<String> =
            (0..sk.positions.len()).map(|i| alloc::format!("XQ{i}")).collect();
        let story = render_story(&sk, &names, &pack, &mut rng).unwrap();
        let label = pack.answer_label(sk.answer).unwrap();
        verify_rendered(&story.lines, &story.question, label, &pack, 100).unwrap();

        // A deliberately wrong label must be caught.
        let wrong = if label == "above" { "below" } else { "above" };
        match verify_rendered(&story.lines, &story.question, wrong, &pack, 100) {
            Err(VerifyFailure::WrongOutcome { .. }) => {}
            other => panic!("{other:?}"),
        }
        match verify_rendered(&story.lines, &story.question, "sideways", &pack, 100) {
            Err(VerifyFailure::UnknownLabel(_)) => {}
            other => panic!("{other:?}"),
        }
    }
}
