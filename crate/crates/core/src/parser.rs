//! The oracle parser: recovers facts from rendered sentences.
//!
//! Because stories are produced from the same template packs this module
//! matches against, parsing is exact — no NLP, no heuristics, just inverse
//! template application (see [`crate::lingo`] for the matching rules). The
//! parser is what makes every generated instance mechanically checkable:
//! parse the story back, solve, compare with the stored answer.
//!
//! This module also renders parsed programs as answer-set-programming facts
//! ([`emit_asp`]) for the translation evaluation mode, and ships the
//! accompanying logic program ([`KNOWLEDGE_MODULE`]).

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::direction::Direction;
use crate::lingo::{best_template_match, TemplateMatch, TemplatePack};

/// The domain knowledge module paired with [`emit_asp`] output: direction
/// synonyms, symmetric/transitive closure and coordinate propagation rules
/// for a grounder such as clingo.
pub const KNOWLEDGE_MODULE: &str = include_str!("../assets/knowledge.lp");

/// One fact recovered from a story line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFact {
    /// Subject name as written.
    pub subject: String,
    /// The stated relation.
    pub relation: Direction,
    /// Object name as written.
    pub object: String,
    /// 0-based index of the source line within the story.
    pub line: usize,
}

/// A fully parsed story: facts plus the query pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedProgram {
    /// Facts in narration order.
    pub facts: Vec<ParsedFact>,
    /// `(subject, object)` of the question.
    pub query: (String, String),
}

/// Why a story failed to parse.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    /// A line matched no template in the pack.
    #[error("line {line} matches no template: `{text}`")]
    NoMatch {
        /// 0-based story line index.
        line: usize,
        /// The offending text (prefix-stripped).
        text: String,
    },
    /// A line matched two templates at equal specificity.
    #[error("line {line} is ambiguous between `{first}` and `{second}`")]
    AmbiguousMatch {
        /// 0-based story line index.
        line: usize,
        /// One candidate pattern.
        first: String,
        /// The other candidate pattern.
        second: String,
    },
    /// The question line matched no question template.
    #[error("question matches no question template: `{text}`")]
    QuestionMismatch {
        /// The offending text.
        text: String,
    },
}

/// Strips an optional `"<digits> "` numbering prefix from a story line.
/// Lines are narrated numbered, but the parser accepts both forms.
fn strip_number(line: &str) -> &str {
    let trimmed = line.trim_start_matches(|c: char| c.is_ascii_digit());
    if trimmed.len() < line.len() {
        if let Some(rest) = trimmed.strip_prefix(' ') {
            return rest;
        }
    }
    line
}

/// Parses one fact sentence (numbering prefix tolerated).
pub fn parse_sentence(
    line_index: usize,
    line: &str,
    pack: &TemplatePack,
) -> Result<ParsedFact, ParseError> {
    let text = strip_number(line.trim());
    match best_template_match(&pack.templates, text) {
        TemplateMatch::Unique { index, subject, object } => Ok(ParsedFact {
            subject,
            relation: pack.templates[index].relation,
            object,
            line: line_index,
        }),
        TemplateMatch::Ambiguous { first, second } => Err(ParseError::AmbiguousMatch {
            line: line_index,
            first: pack.templates[first].pattern.clone(),
            second: pack.templates[second].pattern.clone(),
        }),
        TemplateMatch::None => Err(ParseError::NoMatch {
            line: line_index,
            text: text.to_string(),
        }),
    }
}

/// Parses the question line against the pack's question templates.
pub fn parse_question(question: &str, pack: &TemplatePack) -> Result<(String, String), ParseError> {
    let text = question.trim();
    for q in &pack.questions {
        if let Some((a, b)) = q.matcher.captures(text) {
            return Ok((a, b));
        }
    }
    Err(ParseError::QuestionMismatch { text: text.to_string() })
}

/// Parses a whole story: every fact line and the question.
pub fn parse_story(
    lines: &[String],
    question: &str,
    pack: &TemplatePack,
) -> Result<ParsedProgram, ParseError> {
    let mut facts = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        facts.push(parse_sentence(i, line, pack)?);
    }
    let query = parse_question(question, pack)?;
    Ok(ParsedProgram { facts, query })
}

/// Renders a parsed program as answer-set-programming facts:
///
/// ```text
/// top_right("XAH", "XAM").
/// ...
/// query("XAX", "XAY").
/// ```
///
/// One fact per line in story order, then the query, trailing newline.
///
/// [`KNOWLEDGE_MODULE`] closes these facts under coordinate propagation but
/// derives `location/3` only. To extract an answer with a grounder, anchor
/// one object — `location("XAX", 0, 0).` plus `#show location/3.` — and read
/// the queried direction off the sign of the other endpoint's displacement.
pub fn emit_asp(program: &ParsedProgram) -> String {
    let mut out = String::new();
    for f in &program.facts {
        out.push_str(f.relation.canonical());
        out.push_str("(\"");
        out.push_str(&f.subject);
        out.push_str("\", \"");
        out.push_str(&f.object);
        out.push_str("\").\n");
    }
    out.push_str("query(\"");
    out.push_str(&program.query.0);
    out.push_str("\", \"");
    out.push_str(&program.query.1);
    out.push_str("\").\n");
    out
}
