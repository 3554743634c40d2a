//! Template packs: the swappable linguistic surface of a story.
//!
//! A pack supplies everything language-specific — fact sentence templates,
//! question templates, the answer lexicon, and the marker string completions
//! are scanned for. Generation picks templates at random; the oracle parser
//! inverts them exactly, so `parse(render(fact))` must recover the fact for
//! every template in every pack (this round-trip is enforced by tests, and
//! template collisions are rejected at load time).
//!
//! # Pack file format
//!
//! Line-oriented directives; blank lines and lines starting with `#` are
//! ignored. The first directive must be the magic header.
//!
//! ```text
//! gridstory-pack v1
//! language: english
//! marker: ### Answer:
//! status: complete
//! answer top: above
//! ...                                (one per direction, all eight required)
//! question: What is the relation of the agent {A} to the agent {B}?
//! template down clock A: {A} is sitting at the 6:00 position to {B}.
//! ```
//!
//! A `template` directive reads `template <relation> <style> <slot>: <text>`:
//! the canonical relation the sentence realises, its style (`plain`, `clock`
//! or `cardinal`), and which placeholder carries the relation's *subject*.
//! Each pattern contains `{A}` and `{B}` exactly once; the subject slot makes
//! orientation explicit, e.g. `template right plain B: {B} is on the right
//! and {A} is on the left.` realises `right(B-name, A-name)`. Question
//! patterns always carry the query subject in `{A}` and the object in `{B}`.
//!
//! Sentence recognition matches a pattern's literal prefix, middle and suffix
//! and captures the two name spans. When several templates match (packs may
//! contain patterns that extend one another), the one with the most literal
//! text wins; a tie is an ambiguity error. Consequently names must not
//! themselves contain a pack's literal fragments — true for every shipped
//! pool.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::direction::Direction;
use crate::rng;
use crate::story::{Fact, NodeId, Skeleton};

/// Complete English pack (plain, clock-face and cardinal sentence styles).
pub const ENGLISH_PACK: &str = include_str!("../assets/packs/english.pack");
/// Hindi pack (sample-sentence coverage of all eight directions; partial).
pub const HINDI_PACK: &str = include_str!("../assets/packs/hindi.pack");
/// Swedish pack (sample-sentence coverage of all eight directions; partial).
pub const SWEDISH_PACK: &str = include_str!("../assets/packs/swedish.pack");
/// Artificial-direction pack: English carrier sentences with every direction
/// word replaced by a fixed nonce phrase; answers stay English.
pub const NONCE_PACK: &str = include_str!("../assets/packs/nonce.pack");

/// The nonce direction vocabulary used by [`NONCE_PACK`]. Entity-name
/// generation treats these as reserved so object names can never collide
/// with direction words.
pub const NONCE_DIRECTION_TOKENS: [&str; 8] =
    ["eliam", "meanion", "unclust", "writent", "voure", "absol", "imach", "picited"];

/// Which placeholder a directive refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// The `{A}` placeholder.
    A,
    /// The `{B}` placeholder.
    B,
}

/// Surface style of a fact template (metadata; `clock` additionally promises
/// that any clock hours named in the text agree with the relation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    /// Ordinary positional phrasing.
    Plain,
    /// Clock-face phrasing ("at 6 o'clock", "between 7 and 8").
    Clock,
    /// Compass phrasing ("south east of").
    Cardinal,
}

impl Style {
    fn parse(s: &str) -> Option<Style> {
        match s {
            "plain" => Some(Style::Plain),
            "clock" => Some(Style::Clock),
            "cardinal" => Some(Style::Cardinal),
            _ => None,
        }
    }
}

/// A pattern compiled into its literal segments around the two captures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matcher {
    /// Literal text before the first placeholder.
    pub pre: String,
    /// Literal text between the placeholders (never empty).
    pub mid: String,
    /// Literal text after the second placeholder.
    pub post: String,
    /// Which placeholder occurs first in the pattern.
    pub first_slot: Slot,
}

impl Matcher {
    /// Compiles a pattern; `None` if `{A}`/`{B}` don't occur exactly once
    /// each or are adjacent.
    pub fn compile(pattern: &str) -> Option<Matcher> {
        let a = pattern.find("{A}")?;
        let b = pattern.find("{B}")?;
        if pattern.matches("{A}").count() != 1 || pattern.matches("{B}").count() != 1 {
            return None;
        }
        let (first, second, first_slot) =
            if a < b { (a, b, Slot::A) } else { (b, a, Slot::B) };
        let pre = pattern[..first].to_string();
        let mid = pattern[first + 3..second].to_string();
        let post = pattern[second + 3..].to_string();
        if mid.is_empty() {
            return None;
        }
        Some(Matcher { pre, mid, post, first_slot })
    }

    /// Total literal length — the specificity used to break matching ties.
    pub fn literal_len(&self) -> usize {
        self.pre.len() + self.mid.len() + self.post.len()
    }

    /// Substitutes values for `{A}` and `{B}`.
    pub fn render(&self, a: &str, b: &str) -> String {
        let (first, second) = match self.first_slot {
            Slot::A => (a, b),
            Slot::B => (b, a),
        };
        let mut out = String::with_capacity(self.literal_len() + first.len() + second.len());
        out.push_str(&self.pre);
        out.push_str(first);
        out.push_str(&self.mid);
        out.push_str(second);
        out.push_str(&self.post);
        out
    }

    /// Attempts to match `text`, returning the captured `({A}, {B})` values.
    /// The middle literal is located at its leftmost occurrence; captures
    /// must be non-empty.
    pub fn captures(&self, text: &str) -> Option<(String, String)> {
        let rest = text.strip_prefix(self.pre.as_str())?;
        let rest = rest.strip_suffix(self.post.as_str())?;
        let split = rest.find(self.mid.as_str())?;
        let first = &rest[..split];
        let second = &rest[split + self.mid.len()..];
        if first.is_empty() || second.is_empty() {
            return None;
        }
        match self.first_slot {
            Slot::A => Some((first.to_string(), second.to_string())),
            Slot::B => Some((second.to_string(), first.to_string())),
        }
    }
}

/// One fact sentence template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    /// The raw pattern, placeholders included.
    pub pattern: String,
    /// The direction this sentence realises.
    pub relation: Direction,
    /// Placeholder that receives the fact's subject.
    pub subject_slot: Slot,
    /// Surface style tag.
    pub style: Style,
    /// Compiled literal segments.
    pub matcher: Matcher,
}

/// One question template (subject in `{A}`, object in `{B}`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionTemplate {
    /// The raw pattern.
    pub pattern: String,
    /// Compiled literal segments.
    pub matcher: Matcher,
}

/// Whether a pack claims full stylistic coverage or ships a reduced template
/// inventory (all eight directions are required either way).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackStatus {
    /// Full inventory.
    Complete,
    /// Reduced inventory (sample-sentence coverage).
    Partial,
}

/// A loaded, validated template pack.
#[derive(Debug, Clone)]
pub struct TemplatePack {
    /// Language identifier ("english", "hindi", ...).
    pub language: String,
    /// The marker completions are scanned for ("### Answer:" etc.).
    pub marker: String,
    /// Coverage claim.
    pub status: PackStatus,
    /// Answer label for each of the eight compass directions.
    pub answers: BTreeMap<Direction, String>,
    /// Question templates.
    pub questions: Vec<QuestionTemplate>,
    /// Fact templates, in file order.
    pub templates: Vec<Template>,
}

/// Pack loading and rendering failures.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PackError {
    /// Structural problem in the pack file.
    #[error("pack schema error on line {line}: {reason}")]
    Schema {
        /// 1-based source line.
        line: usize,
        /// What was wrong.
        reason: String,
    },
    /// The answer lexicon does not cover all eight directions.
    #[error("answer lexicon incomplete; missing: {missing:?}")]
    IncompleteLexicon {
        /// Canonical names of the uncovered directions.
        missing: Vec<String>,
    },
    /// Two templates cannot be told apart by the sentence matcher.
    #[error("templates collide under the sentence matcher: `{first}` vs `{second}`")]
    AmbiguousTemplates {
        /// One offending pattern.
        first: String,
        /// The other offending pattern.
        second: String,
    },
    /// Rendering asked for a relation the pack has no template for.
    #[error("pack `{language}` has no template for relation `{relation}`")]
    MissingTemplate {
        /// Pack language.
        language: String,
        /// Canonical relation name.
        relation: String,
    },
}

impl TemplatePack {
    /// Parses and validates a pack file. See the module docs for the format.
    pub fn parse(text: &str) -> Result<TemplatePack, PackError> {
        let schema = |line: usize, reason: &str| PackError::Schema {
            line,
            reason: reason.to_string(),
        };
        let mut language = None;
        let mut marker = None;
        let mut status = PackStatus::Complete;
        let mut answers: BTreeMap<Direction, String> = BTreeMap::new();
        let mut questions = Vec::new();
        let mut templates = Vec::new();
        let mut saw_magic = false;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_magic {
                if line != "gridstory-pack v1" {
                    return Err(schema(line_no, "missing `gridstory-pack v1` header"));
                }
                saw_magic = true;
                continue;
            }
            let Some((head, value)) = line.split_once(": ") else {
                return Err(schema(line_no, "expected `key: value`"));
            };
            let value = value.to_string();
            let mut words = head.split_whitespace();
            match words.next() {
                Some("language") => language = Some(value),
                Some("marker") => marker = Some(value),
                Some("status") => {
                    status = match value.as_str() {
                        "complete" => PackStatus::Complete,
                        "partial" => PackStatus::Partial,
                        _ => return Err(schema(line_no, "status must be complete|partial")),
                    }
                }
                Some("answer") => {
                    let Some(rel) = words.next().and_then(Direction::from_canonical) else {
                        return Err(schema(line_no, "answer needs a canonical relation"));
                    };
                    if rel == Direction::Overlap {
                        return Err(schema(line_no, "overlap is not an answer"));
                    }
                    if value.is_empty() {
                        return Err(schema(line_no, "empty answer label"));
                    }
                    if answers.insert(rel, value).is_some() {
                        return Err(schema(line_no, "duplicate answer relation"));
                    }
                }
                Some("question") => {
                    let Some(matcher) = Matcher::compile(&value) else {
                        return Err(schema(
                            line_no,
                            "question must contain {A} and {B} exactly once each",
                        ));
                    };
                    questions.push(QuestionTemplate { pattern: value, matcher });
                }
                Some("template") => {
                    let Some(rel) = words.next().and_then(Direction::from_canonical) else {
                        return Err(schema(line_no, "template needs a canonical relation"));
                    };
                    if rel == Direction::Overlap {
                        return Err(schema(line_no, "overlap facts are never narrated"));
                    }
                    let Some(style) = words.next().and_then(Style::parse) else {
                        return Err(schema(line_no, "template style must be plain|clock|cardinal"));
                    };
                    let subject_slot = match words.next() {
                        Some("A") => Slot::A,
                        Some("B") => Slot::B,
                        _ => return Err(schema(line_no, "template subject slot must be A or B")),
                    };
                    let Some(matcher) = Matcher::compile(&value) else {
                        return Err(schema(
                            line_no,
                            "template must contain {A} and {B} exactly once each, not adjacent",
                        ));
                    };
                    templates.push(Template {
                        pattern: value,
                        relation: rel,
                        subject_slot,
                        style,
                        matcher,
                    });
                }
                _ => return Err(schema(line_no, "unknown directive")),
            }
        }

        if !saw_magic {
            return Err(schema(1, "empty pack"));
        }
        let language = language.ok_or_else(|| schema(0, "missing language"))?;
        let marker = marker.ok_or_else(|| schema(0, "missing marker"))?;
        let missing: Vec<String> = Direction::COMPASS
            .iter()
            .filter(|d| !answers.contains_key(d))
            .map(|d| d.canonical().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(PackError::IncompleteLexicon { missing });
        }
        {
            // Distinct labels are what keeps answer extraction unambiguous.
            let mut seen: Vec<String> = answers.values().map(|l| l.to_lowercase()).collect();
            seen.sort();
            seen.dedup();
            if seen.len() != answers.len() {
                return Err(schema(0, "answer labels must be pairwise distinct"));
            }
        }
        if questions.is_empty() {
            return Err(schema(0, "at least one question template is required"));
        }

        let pack = TemplatePack { language, marker, status, answers, questions, templates };
        pack.check_collisions()?;
        Ok(pack)
    }

    /// Renders every template with sentinel names and verifies each rendering
    /// resolves back to its own template. Catches duplicated patterns and any
    /// pair the matcher cannot separate.
    fn check_collisions(&self) -> Result<(), PackError> {
        // Private-use sentinels cannot occur in any pack literal.
        let (pa, pb) = ("\u{E000}", "\u{E001}");
        for (i, t) in self.templates.iter().enumerate() {
            let rendered = t.matcher.render(pa, pb);
            match best_template_match(&self.templates, &rendered) {
                TemplateMatch::Unique { index, .. } if index == i => {}
                TemplateMatch::Unique { index, .. } => {
                    return Err(PackError::AmbiguousTemplates {
                        first: t.pattern.clone(),
                        second: self.templates[index].pattern.clone(),
                    });
                }
                TemplateMatch::Ambiguous { first, second } => {
                    return Err(PackError::AmbiguousTemplates {
                        first: self.templates[first].pattern.clone(),
                        second: self.templates[second].pattern.clone(),
                    });
                }
                TemplateMatch::None => unreachable!("a template matches its own rendering"),
            }
        }
        Ok(())
    }

    /// The parsed pack shipped under `name` ("english", "hindi", "swedish",
    /// "nonce"). Shipped packs are validated by this crate's tests, so a
    /// parse failure here is a build corruption and panics.
    pub fn builtin(name: &str) -> Option<TemplatePack> {
        let text = match name {
            "english" => ENGLISH_PACK,
            "hindi" => HINDI_PACK,
            "swedish" => SWEDISH_PACK,
            "nonce" => NONCE_PACK,
            _ => return None,
        };
        Some(TemplatePack::parse(text).expect("shipped pack is valid"))
    }

    /// Names of all shipped packs.
    pub const BUILTIN_NAMES: [&'static str; 4] = ["english", "hindi", "swedish", "nonce"];

    /// Answer label for a direction (`None` only for `Overlap`).
    pub fn answer_label(&self, d: Direction) -> Option<&str> {
        self.answers.get(&d).map(String::as_str)
    }

    /// Case-insensitive inverse of [`answer_label`](Self::answer_label).
    pub fn label_direction(&self, label: &str) -> Option<Direction> {
        let needle = label.to_lowercase();
        self.answers
            .iter()
            .find(|(_, l)| l.to_lowercase() == needle)
            .map(|(d, _)| *d)
    }

    /// Indices of the fact templates realising `relation`.
    pub fn templates_for(&self, relation: Direction) -> Vec<usize> {
        self.templates
            .iter()
            .enumerate()
            .filter(|(_, t)| t.relation == relation)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Outcome of matching one sentence against a pack's fact templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateMatch {
    /// Exactly one best template.
    Unique {
        /// Index into `pack.templates`.
        index: usize,
        /// Captured subject name (subject-slot resolved).
        subject: String,
        /// Captured object name.
        object: String,
    },
    /// Two or more templates tie at maximal specificity.
    Ambiguous {
        /// Index of one tied template.
        first: usize,
        /// Index of another tied template.
        second: usize,
    },
    /// Nothing matched.
    None,
}

/// Most-specific-match resolution over a template list (see module docs).
pub fn best_template_match(templates: &[Template], text: &str) -> TemplateMatch {
    let mut best: Option<(usize, usize, String, String)> = None; // (weight, idx, subj, obj)
    let mut tied: Option<usize> = None;
    for (i, t) in templates.iter().enumerate() {
        let Some((a, b)) = t.matcher.captures(text) else { continue };
        let (subject, object) = match t.subject_slot {
            Slot::A => (a, b),
            Slot::B => (b, a),
        };
        let w = t.matcher.literal_len();
        match &best {
            Some((bw, bi, ..)) if *bw == w => {
                tied = Some(*bi);
                best = Some((w, i, subject, object));
            }
            Some((bw, ..)) if *bw > w => {}
            _ => {
                tied = None;
                best = Some((w, i, subject, object));
            }
        }
    }
    match (best, tied) {
        (Some((_, index, subject, object)), None) => TemplateMatch::Unique { index, subject, object },
        (Some((_, second, ..)), Some(first)) => TemplateMatch::Ambiguous { first, second },
        (None, _) => TemplateMatch::None,
    }
}

/// A story rendered into sentences: numbered lines plus the question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedStory {
    /// `"<n> <sentence>"` lines, 1-based, in narration order.
    pub lines: Vec<String>,
    /// The rendered question.
    pub question: String,
    /// Language of the pack that produced this.
    pub language: String,
}

/// Renders one fact as a sentence (no line number), choosing uniformly among
/// the pack's templates for the fact's relation.
pub fn render_fact(
    f: &Fact,
    names: &[String],
    pack: &TemplatePack,
    rng: &mut impl RngCore,
) -> Result<String, PackError> {
    let candidates = pack.templates_for(f.relation);
    if candidates.is_empty() {
        return Err(PackError::MissingTemplate {
            language: pack.language.clone(),
            relation: f.relation.canonical().to_string(),
        });
    }
    let t = &pack.templates[*rng::choose(rng, &candidates)];
    let (subject, object) = (names[f.subject].as_str(), names[f.object].as_str());
    let (a, b) = match t.subject_slot {
        Slot::A => (subject, object),
        Slot::B => (object, subject),
    };
    Ok(t.matcher.render(a, b))
}

/// Renders the question for a query, subject and object in the stated order.
pub fn render_question(
    query: (NodeId, NodeId),
    names: &[String],
    pack: &TemplatePack,
    rng: &mut impl RngCore,
) -> String {
    let q = rng::choose(rng, &pack.questions);
    q.matcher.render(&names[query.0], &names[query.1])
}

/// Renders a full skeleton: numbered fact lines in narration order plus the
/// question.
pub fn render_story(
    sk: &Skeleton,
    names: &[String],
    pack: &TemplatePack,
    rng: &mut impl RngCore,
) -> Result<RenderedStory, PackError> {
    let mut lines = Vec::with_capacity(sk.facts.len());
    for (i, f) in sk.facts.iter().enumerate() {
        let sentence = render_fact(f, names, pack, rng)?;
        lines.push(alloc::format!("{} {}", i + 1, sentence));
    }
    let question = render_question(sk.query, names, pack, rng);
    Ok(RenderedStory { lines, question, language: pack.language.clone() })
}
