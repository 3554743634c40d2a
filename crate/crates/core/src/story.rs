//! Construction of story skeletons: the relational content of an instance
//! before any natural language is attached.
//!
//! A skeleton starts life as a self-avoiding walk of `k` unit steps on the
//! grid. Each step becomes one fact relating consecutive nodes, and the query
//! asks for the relation between the walk's two endpoints — so answering it
//! requires composing all `k` facts, no shortcut exists. The skeleton can
//! then be made *noisy* (distractor facts hanging off the chain) and
//! *shuffled* (narration order permuted); neither changes the answer, which
//! is fixed by the endpoint positions at construction time.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::direction::{direction_of, invert, Direction, Position};
use crate::rng;

/// Index of a node within one skeleton (dense, `0..positions.len()`).
pub type NodeId = usize;

/// A `k`-step self-avoiding walk. Node `i` sits at `positions[i]`, and
/// `steps[i]` points from node `i` to node `i + 1`:
/// `positions[i + 1] = positions[i].step(steps[i])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    /// The `k` unit steps, in walk order.
    pub steps: Vec<Direction>,
    /// The `k + 1` visited cells, in walk order; all distinct.
    pub positions: Vec<Position>,
}

impl Walk {
    /// Number of steps.
    pub fn k(&self) -> usize {
        self.steps.len()
    }

    /// Node ids in walk order (`0..=k`).
    pub fn nodes(&self) -> core::ops::Range<NodeId> {
        0..self.positions.len()
    }
}

/// One relational statement: `relation(subject, object)`, meaning the subject
/// lies one step in `relation` from the object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fact {
    /// Entity the relation is about.
    pub subject: NodeId,
    /// The direction from `object` to `subject`.
    pub relation: Direction,
    /// Reference entity.
    pub object: NodeId,
    /// True for chain facts, false for injected distractors.
    pub on_path: bool,
}

/// A complete abstract instance: facts, query and the precomputed answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    /// Reasoning depth — the number of chain facts between the query
    /// endpoints.
    pub k: usize,
    /// All facts in narration order (chain facts first until shuffled).
    pub facts: Vec<Fact>,
    /// Ground-truth position of every node (chain nodes `0..=k`, then
    /// distractors). All distinct.
    pub positions: Vec<Position>,
    /// `(subject, object)` of the question.
    pub query: (NodeId, NodeId),
    /// The direction from query object to query subject.
    pub answer: Direction,
    /// Whether distractor facts were injected.
    pub noisy: bool,
    /// Whether the narration order was permuted.
    pub shuffled: bool,
    /// Seed provenance, recorded by the dataset builder (0 until set).
    pub seed: u64,
}

/// Knobs for skeleton construction. The defaults reproduce the reference
/// configuration: restart budget of 1000 walks, fact orientation randomised,
/// query always asked end-to-start, distractors anchored on chain nodes only,
/// and all coordinates confined to the ±100 window the solver searches.
#[derive(Debug, Clone)]
pub struct GenOptions {
    /// How many walk restarts to allow before giving up.
    pub max_attempts: u32,
    /// Flip each fact's stated orientation with probability 1/2 (the inverse
    /// relation with subject and object swapped — same geometric content).
    pub flip_facts: bool,
    /// Also flip the query direction with probability 1/2; off by default
    /// (the question asks end relative to start).
    pub flip_query: bool,
    /// Allow distractors to anchor on earlier distractors, forming chains.
    pub distractor_chains: bool,
    /// Coordinate window half-width; placements outside are rejected so the
    /// solver's bounded search stays exact.
    pub bound: i64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            max_attempts: 1000,
            flip_facts: true,
            flip_query: false,
            distractor_chains: false,
            bound: 100,
        }
    }
}

/// Construction failures. A walk can exhaust its restart budget; distractor
/// placement can exhaust the chain's free neighbourhood — a one-step chain
/// borders exactly ten free cells, so an eleventh distractor has nowhere to
/// go no matter the budget.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    /// No self-avoiding walk of the requested length was found within the
    /// restart budget.
    #[error("no self-avoiding walk of {k} steps found in {attempts} attempts")]
    WalkExhausted {
        /// Requested depth.
        k: usize,
        /// Restart budget that was exhausted.
        attempts: u32,
    },
    /// Distractor placement ran out of free adjacent cells.
    #[error("placed only {placed} of {requested} distractors before running out of free cells")]
    PlacementExhausted {
        /// Distractors requested.
        requested: usize,
        /// Distractors successfully placed.
        placed: usize,
    },
}

/// Draws a self-avoiding walk of exactly `k` unit steps.
///
/// Each step picks uniformly among the compass directions whose target cell
/// is unvisited. Dead ends (possible once the walk can curl into itself)
/// restart the whole walk; `opts.max_attempts` bounds the restarts.
pub fn generate_walk(
    k: usize,
    opts: &GenOptions,
    rng: &mut impl RngCore,
) -> Result<Walk, GenError> {
    assert!(k >= 1, "a story needs at least one step");
    let mut attempts = 0u32;
    'restart: loop {
        attempts += 1;
        if attempts > opts.max_attempts {
            return Err(GenError::WalkExhausted { k, attempts: opts.max_attempts });
        }
        let mut positions = Vec::with_capacity(k + 1);
        let mut steps = Vec::with_capacity(k);
        positions.push(Position::ORIGIN);
        for _ in 0..k {
            let here = *positions.last().expect("walk is never empty");
            let mut open: Vec<Direction> = Vec::with_capacity(8);
            for d in Direction::COMPASS {
                let target = here.step(d);
                if !positions.contains(&target) {
                    open.push(d);
                }
            }
            if open.is_empty() {
                continue 'restart;
            }
            let d = *rng::choose(rng, &open);
            steps.push(d);
            positions.push(here.step(d));
        }
        return Ok(Walk { steps, positions });
    }
}

/// Turns a walk into facts plus the endpoint query.
///
/// Fact `i` relates node `i + 1` to node `i` by step `i`'s direction; with
/// `opts.flip_facts` each fact is stated from a random side. The query is
/// `(end, start)` — optionally flipped — and the answer is read off the
/// endpoint positions.
pub fn make_skeleton(walk: &Walk, opts: &GenOptions, rng: &mut impl RngCore) -> Skeleton {
    let k = walk.k();
    let mut facts = Vec::with_capacity(k);
    for (i, &step) in walk.steps.iter().enumerate() {
        let mut fact = Fact { subject: i + 1, relation: step, object: i, on_path: true };
        if opts.flip_facts && rng::coin(rng) {
            fact = Fact {
                subject: fact.object,
                relation: invert(fact.relation),
                object: fact.subject,
                on_path: true,
            };
        }
        facts.push(fact);
    }
    let query = if opts.flip_query && rng::coin(rng) { (0, k) } else { (k, 0) };
    let answer = direction_of(walk.positions[query.0].delta(walk.positions[query.1]));
    Skeleton {
        k,
        facts,
        positions: walk.positions.clone(),
        query,
        answer,
        noisy: false,
        shuffled: false,
        seed: 0,
    }
}

/// Injects `m` distractor facts, each connecting a fresh node to an existing
/// one by a single relation.
///
/// Distractor positions are globally distinct from every other position and
/// stay inside `opts.bound`, so the instance remains exactly solvable and the
/// answer provably unchanged. Anchors are chain nodes unless
/// `opts.distractor_chains` also admits earlier distractors. Appended facts
/// keep generation order; call [`order_story`] afterwards to mix them in.
pub fn inject_noise(
    sk: &mut Skeleton,
    m: usize,
    opts: &GenOptions,
    rng: &mut impl RngCore,
) -> Result<(), GenError> {
    let chain_len = sk.k + 1;
    for placed in 0..m {
        let mut found = None;
        // Random probing first; on a crowded board fall back to a full scan
        // so near-full neighbourhoods still resolve deterministically.
        for _ in 0..200 {
            let anchor_count = if opts.distractor_chains { sk.positions.len() } else { chain_len };
            let anchor = rng::index(rng, anchor_count);
            let d = *rng::choose(rng, &Direction::COMPASS);
            let target = sk.positions[anchor].step(d);
            if target.x.abs() <= opts.bound
                && target.y.abs() <= opts.bound
                && !sk.positions.contains(&target)
            {
                found = Some((anchor, d, target));
                break;
            }
        }
        if found.is_none() {
            'scan: for anchor in 0..if opts.distractor_chains { sk.positions.len() } else { chain_len } {
                for d in Direction::COMPASS {
                    let target = sk.positions[anchor].step(d);
                    if target.x.abs() <= opts.bound
                        && target.y.abs() <= opts.bound
                        && !sk.positions.contains(&target)
                    {
                        found = Some((anchor, d, target));
                        break 'scan;
                    }
                }
            }
        }
        let Some((anchor, d, target)) = found else {
            return Err(GenError::PlacementExhausted { requested: m, placed });
        };
        let fresh = sk.positions.len();
        sk.positions.push(target);
        let mut fact = Fact { subject: fresh, relation: d, object: anchor, on_path: false };
        if opts.flip_facts && rng::coin(rng) {
            fact = Fact {
                subject: fact.object,
                relation: invert(fact.relation),
                object: fact.subject,
                on_path: false,
            };
        }
        sk.facts.push(fact);
    }
    sk.noisy |= m > 0;
    Ok(())
}

/// How to permute narration order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderPolicy {
    /// Keep generation order (chain facts in walk order, then distractors).
    Ordered,
    /// Apply `ceil(fraction * n)` random transpositions — a partial shuffle.
    Partial {
        /// Transpositions per fact, in `0.0..=1.0` territory (0.5 default).
        fraction: f64,
    },
    /// A uniform permutation.
    Full,
}

/// Permutes `sk.facts` according to `policy` and records the shuffled flag.
/// A one-fact story is unchanged by every policy.
pub fn order_story(sk: &mut Skeleton, policy: OrderPolicy, rng: &mut impl RngCore) {
    match policy {
        OrderPolicy::Ordered => {}
        OrderPolicy::Partial { fraction } => {
            let n = sk.facts.len();
            // ceil(fraction * n), written with casts only: float ceil is not
            // available without std.
            let product = fraction * n as f64;
            let swaps = if product <= 0.0 {
                0
            } else {
                let whole = product as usize;
                whole + usize::from((whole as f64) < product)
            };
            for _ in 0..swaps {
                let i = rng::index(rng, n);
                let j = rng::index(rng, n);
                sk.facts.swap(i, j);
            }
            sk.shuffled = true;
        }
        OrderPolicy::Full => {
            rng::shuffle(rng, &mut sk.facts);
            sk.shuffled = true;
        }
    }
}
