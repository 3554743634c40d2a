//! The evaluation harness: prompt assembly, answer extraction, scoring and
//! reporting.
//!
//! Prompts are fixed assets — instruction text plus worked in-context
//! exchanges — shipped with the crate; only the final user message is
//! templated with the instance's story and question. Completions are graded
//! by scanning for the pack's answer marker (or, in the fact-translation
//! mode, by parsing the emitted facts and solving them). Scores aggregate
//! per reasoning depth `k` with the spread across repeat runs.

pub mod client;

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use gridstory_core::direction::{normalize, Direction};
use gridstory_core::lingo::TemplatePack;
use gridstory_core::solver::{self, SolveOutcome};

use crate::dataset::{StoryInstance, SOLVE_BOUND};
pub use client::{ChatClient, CompletionRequest, LiveClient, MockOracle, MockUniform, Replay};

/// Expected accuracy of uniform random answering over the eight labels.
pub const GUESS_RATE: f64 = 0.125;

/// Label recorded when no lexicon answer could be extracted.
pub const OTHER_LABEL: &str = "OTHER";

/// Placeholder in an asset's final message for the numbered story lines.
pub const STORY_SLOT: &str = "{{STORY}}";
/// Placeholder in an asset's final message for the question.
pub const QUESTION_SLOT: &str = "{{QUESTION}}";

/// The experiment prompt modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptMode {
    /// Instruction and target only, no worked examples.
    ZeroShot,
    /// Instruction plus five worked exchanges (depths 1, 3, 5, 7, 10).
    FiveShot,
    /// Five-shot over nonce direction vocabulary, each example paired with
    /// its plain-language equivalent story.
    Familiarization,
    /// Ask for a fact listing instead of an answer; graded by solving the
    /// returned facts.
    AspTranslation,
    /// The five-shot prompt with some example stories re-ordered, for runs
    /// probing sensitivity to narration order.
    FiveShotOrdered,
}

impl PromptMode {
    /// All modes, in presentation order.
    pub const ALL: [PromptMode; 5] = [
        PromptMode::ZeroShot,
        PromptMode::FiveShot,
        PromptMode::Familiarization,
        PromptMode::AspTranslation,
        PromptMode::FiveShotOrdered,
    ];

    /// CLI-facing name.
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::ZeroShot => "zero-shot",
            PromptMode::FiveShot => "five-shot",
            PromptMode::Familiarization => "familiarization",
            PromptMode::AspTranslation => "asp-translation",
            PromptMode::FiveShotOrdered => "five-shot-ordered",
        }
    }

    /// Inverse of [`PromptMode::as_str`].
    pub fn parse(s: &str) -> Option<PromptMode> {
        PromptMode::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// One chat message, in the wire shape chat endpoints expect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    /// `system`, `user` or `assistant`.
    pub role: String,
    /// Verbatim message text.
    pub content: String,
}

/// A prompt asset: the fixed message prefix plus a templated final user
/// message carrying `{{STORY}}` and `{{QUESTION}}` slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptAsset {
    /// Asset identifier, matching its filename.
    pub name: String,
    /// Language the asset's examples are written in.
    pub language: String,
    /// Human note on provenance and quirks kept verbatim.
    pub note: String,
    /// Instruction, worked exchanges, then the templated target message.
    pub messages: Vec<ChatMessage>,
}

const FIVE_SHOT_EN: &str = include_str!("../../assets/prompts/five_shot_en.json");
const ZERO_SHOT_EN: &str = include_str!("../../assets/prompts/zero_shot_en.json");
const FAMILIARIZATION_NONCE: &str =
    include_str!("../../assets/prompts/familiarization_nonce.json");
const FIVE_SHOT_HI: &str = include_str!("../../assets/prompts/five_shot_hi.json");
const FIVE_SHOT_SV: &str = include_str!("../../assets/prompts/five_shot_sv.json");
const ASP_TRANSLATION_EN: &str = include_str!("../../assets/prompts/asp_translation_en.json");
const FIVE_SHOT_ORDERED_EN: &str =
    include_str!("../../assets/prompts/five_shot_ordered_en.json");

/// Resolves the shipped asset for a mode and dataset language. Coverage
/// follows the experiments: five-shot exists for English, Hindi and Swedish;
/// the nonce-vocabulary familiarization pairs with nonce-pack datasets; the
/// remaining modes are English-only.
pub fn prompt_asset(mode: PromptMode, language: &str) -> Result<PromptAsset> {
    let text = match (mode, language) {
        (PromptMode::FiveShot, "english") => FIVE_SHOT_EN,
        (PromptMode::FiveShot, "hindi") => FIVE_SHOT_HI,
        (PromptMode::FiveShot, "swedish") => FIVE_SHOT_SV,
        (PromptMode::ZeroShot, "english") => ZERO_SHOT_EN,
        (PromptMode::Familiarization, "nonce" | "english") => FAMILIARIZATION_NONCE,
        (PromptMode::AspTranslation, "english") => ASP_TRANSLATION_EN,
        (PromptMode::FiveShotOrdered, "english") => FIVE_SHOT_ORDERED_EN,
        _ => bail!("no prompt asset for mode `{}` in language `{language}`", mode.as_str()),
    };
    let asset: PromptAsset = serde_json::from_str(text)
        .with_context(|| format!("shipped asset for `{}` is corrupt", mode.as_str()))?;
    Ok(asset)
}

/// Instantiates an asset for one instance: the final message's slots are
/// filled with the numbered story (newline-joined) and the question; every
/// other message passes through verbatim.
pub fn build_prompt(asset: &PromptAsset, inst: &StoryInstance) -> Result<Vec<ChatMessage>> {
    let mut messages = asset.messages.clone();
    let last = messages
        .last_mut()
        .ok_or_else(|| anyhow!("asset `{}` has no messages", asset.name))?;
    ensure!(
        last.content.contains(STORY_SLOT) && last.content.contains(QUESTION_SLOT),
        "asset `{}` is missing its story/question slots",
        asset.name
    );
    let story = inst.story.join("\n");
    last.content =
        last.content.replace(STORY_SLOT, &story).replace(QUESTION_SLOT, &inst.question);
    Ok(messages)
}

/// Extracts the answered label from a completion.
///
/// Scans for the last occurrence of the pack's marker, skips whitespace and
/// decoration (`*`, `_`, quotes, backticks, stray colons), then matches the
/// longest pack label case-insensitively, requiring a non-letter boundary
/// after it. `None` means the completion answered outside the lexicon — the
/// OTHER category.
pub fn extract_answer(completion: &str, pack: &TemplatePack) -> Option<Direction> {
    let at = completion.rfind(&pack.marker)?;
    let tail = &completion[at + pack.marker.len()..];
    let tail = tail.trim_start_matches(|c: char| {
        c.is_whitespace() || matches!(c, '*' | '_' | '"' | '\'' | '`' | ':')
    });
    let mut labels: Vec<(&String, Direction)> =
        pack.answers.iter().map(|(d, l)| (l, *d)).collect();
    // Longest first, so a label that extends another cannot be shadowed.
    labels.sort_by_key(|(l, _)| std::cmp::Reverse(l.chars().count()));
    labels.into_iter().find(|(l, _)| label_leads(tail, l)).map(|(_, d)| d)
}

/// Case-insensitive "starts with this label, then a non-letter boundary".
fn label_leads(text: &str, label: &str) -> bool {
    let mut chars = text.chars();
    for want in label.chars() {
        match chars.next() {
            Some(got) if got.to_lowercase().eq(want.to_lowercase()) => {}
            _ => return false,
        }
    }
    match chars.next() {
        Some(c) => !c.is_alphabetic(),
        None => true,
    }
}

/// Lenient parser for fact-translation completions. Accepts lines shaped
/// `head("A", "B").` with arbitrary spacing and optional quotes; `head` may
/// be any canonical direction name or synonym; a `query` head names the
/// asked pair. Lines that don't fit are skipped — defined degradation, the
/// grade just reflects what was recovered. Returns the facts and the last
/// query found.
pub fn parse_asp_completion(
    text: &str,
) -> (Vec<(String, Direction, String)>, Option<(String, String)>) {
    let mut facts = Vec::new();
    let mut query = None;
    for line in text.lines() {
        let Some(open) = line.find('(') else { continue };
        let Some(close) = line.rfind(')') else { continue };
        if close < open {
            continue;
        }
        let head = line[..open].trim().to_ascii_lowercase();
        let args: Vec<String> = line[open + 1..close]
            .split(',')
            .map(|a| a.trim().trim_matches('"').trim().to_string())
            .collect();
        let [a, b] = args.as_slice() else { continue };
        if a.is_empty() || b.is_empty() {
            continue;
        }
        if head == "query" {
            query = Some((a.clone(), b.clone()));
        } else if let Ok(d) = normalize(&head) {
            facts.push((a.clone(), d, b.clone()));
        }
    }
    (facts, query)
}

/// Grades a fact-translation completion: parse the returned facts, solve
/// them, compare with the instance's stored answer. The extracted label is
/// the solved direction's pack label, or OTHER when nothing solvable came
/// back.
pub fn grade_asp(completion: &str, inst: &StoryInstance, pack: &TemplatePack) -> (String, bool) {
    let (facts, query) = parse_asp_completion(completion);
    let Some((qs, qo)) = query else {
        return (OTHER_LABEL.to_string(), false);
    };
    match solver::solve(&facts, (&qs, &qo), SOLVE_BOUND) {
        SolveOutcome::Answer(d) => {
            let label = pack.answer_label(d).unwrap_or_else(|| d.canonical()).to_string();
            let correct = pack.label_direction(&inst.answer) == Some(d);
            (label, correct)
        }
        _ => (OTHER_LABEL.to_string(), false),
    }
}

/// Grades a plain answer-mode completion.
pub fn grade_answer(completion: &str, inst: &StoryInstance, pack: &TemplatePack) -> (String, bool) {
    match extract_answer(completion, pack) {
        Some(d) => {
            let label = pack.answer_label(d).unwrap_or_else(|| d.canonical()).to_string();
            let correct = pack.label_direction(&inst.answer) == Some(d);
            (label, correct)
        }
        None => (OTHER_LABEL.to_string(), false),
    }
}

/// One graded exchange, persisted to the transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Dataset id of the instance.
    pub instance_id: String,
    /// Reasoning depth, copied out for aggregation.
    pub k: usize,
    /// Repeat index, `0..repeats`.
    pub repeat: usize,
    /// Raw model completion (empty when the request failed).
    pub completion: String,
    /// Extracted pack label, or [`OTHER_LABEL`].
    pub extracted: String,
    /// Whether the extraction matches the stored answer.
    pub correct: bool,
    /// Transport failure, if the request never produced a completion.
    /// Failed requests grade as incorrect unless scoring drops them.
    pub error: Option<String>,
    /// Wall-clock time of the client call, in milliseconds.
    pub latency_ms: u64,
}

/// Run parameters beyond the dataset and client.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Prompt mode.
    pub mode: PromptMode,
    /// Model name for the endpoint and the report rows.
    pub model: String,
    /// Independent sessions per instance.
    pub repeats: usize,
    /// Worker threads issuing requests.
    pub concurrency: usize,
    /// Completion budget per request.
    pub max_tokens: u32,
    /// Optional sampling override; `None` accepts the endpoint default.
    pub temperature: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: PromptMode::FiveShot,
            model: "mock".to_string(),
            repeats: 3,
            concurrency: 4,
            max_tokens: 512,
            temperature: None,
        }
    }
}

/// Runs every `(instance, repeat)` pair through the client and grades the
/// completions. Requests run on a bounded worker pool; records come back
/// sorted by `(instance id, repeat)` regardless of scheduling. Client
/// failures become incorrect records carrying the error, never a panic or an
/// aborted run.
pub fn run_eval(
    instances: &[StoryInstance],
    pack: &TemplatePack,
    asset: &PromptAsset,
    client: &dyn ChatClient,
    opts: &EvalOptions,
) -> Result<Vec<EvalRecord>> {
    // Prompts are pure per-instance data; build them up front so workers
    // only talk to the client.
    let prompts: Vec<Vec<ChatMessage>> =
        instances.iter().map(|inst| build_prompt(asset, inst)).collect::<Result<_>>()?;

    let mut work: VecDeque<(usize, usize)> = VecDeque::new();
    for i in 0..instances.len() {
        for r in 0..opts.repeats {
            work.push_back((i, r));
        }
    }
    let queue = Mutex::new(work);
    let records: Mutex<Vec<EvalRecord>> = Mutex::new(Vec::new());

    std::thread::scope(|scope| {
        for _ in 0..opts.concurrency.max(1) {
            scope.spawn(|| loop {
                let Some((i, repeat)) = queue.lock().expect("queue lock").pop_front() else {
                    return;
                };
                let inst = &instances[i];
                let req = CompletionRequest {
                    instance_id: &inst.id,
                    repeat,
                    messages: &prompts[i],
                    model: &opts.model,
                    max_tokens: opts.max_tokens,
                    temperature: opts.temperature,
                };
                let started = Instant::now();
                let outcome = client.complete(&req);
                let latency_ms = started.elapsed().as_millis() as u64;
                let record = match outcome {
                    Ok(completion) => {
                        let (extracted, correct) = if opts.mode == PromptMode::AspTranslation {
                            grade_asp(&completion, inst, pack)
                        } else {
                            grade_answer(&completion, inst, pack)
                        };
                        EvalRecord {
                            instance_id: inst.id.clone(),
                            k: inst.k,
                            repeat,
                            completion,
                            extracted,
                            correct,
                            error: None,
                            latency_ms,
                        }
                    }
                    Err(e) => EvalRecord {
                        instance_id: inst.id.clone(),
                        k: inst.k,
                        repeat,
                        completion: String::new(),
                        extracted: OTHER_LABEL.to_string(),
                        correct: false,
                        error: Some(format!("{e:#}")),
                        latency_ms,
                    },
                };
                records.lock().expect("records lock").push(record);
            });
        }
    });

    let mut records = records.into_inner().expect("workers have exited");
    records.sort_by(|a, b| {
        a.instance_id.cmp(&b.instance_id).then(a.repeat.cmp(&b.repeat))
    });
    Ok(records)
}

/// Per-depth aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KScore {
    /// Reasoning depth.
    pub k: usize,
    /// Mean accuracy over all graded records at this depth.
    pub mean: f64,
    /// Sample standard deviation across per-repeat accuracies (0 for a
    /// single repeat).
    pub std: f64,
    /// Fraction of records graded OTHER.
    pub other_rate: f64,
    /// Records contributing at this depth.
    pub records: usize,
}

/// A scored run: one row per depth, sorted by `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTable {
    /// Model the run evaluated.
    pub model: String,
    /// Per-depth rows.
    pub scores: Vec<KScore>,
}

/// Aggregates records into per-`k` means and repeat spreads. A pure fold:
/// record order cannot affect the result. With `drop_errors`, records whose
/// request failed are excluded from the denominators instead of counting as
/// incorrect.
pub fn score_records(model: &str, records: &[EvalRecord], drop_errors: bool) -> ScoreTable {
    // k -> repeat -> (correct, total); plus k -> other count.
    let mut tally: BTreeMap<usize, BTreeMap<usize, (usize, usize)>> = BTreeMap::new();
    let mut others: BTreeMap<usize, usize> = BTreeMap::new();
    let mut totals: BTreeMap<usize, usize> = BTreeMap::new();
    for r in records {
        if drop_errors && r.error.is_some() {
            continue;
        }
        let cell = tally.entry(r.k).or_default().entry(r.repeat).or_insert((0, 0));
        cell.0 += usize::from(r.correct);
        cell.1 += 1;
        *totals.entry(r.k).or_default() += 1;
        if r.extracted == OTHER_LABEL {
            *others.entry(r.k).or_default() += 1;
        }
    }
    let scores = tally
        .into_iter()
        .map(|(k, by_repeat)| {
            let accs: Vec<f64> =
                by_repeat.values().map(|&(c, t)| c as f64 / t as f64).collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let std = if accs.len() > 1 {
                let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
                    / (accs.len() - 1) as f64;
                var.sqrt()
            } else {
                0.0
            };
            let records = totals[&k];
            let other_rate = *others.get(&k).unwrap_or(&0) as f64 / records as f64;
            KScore { k, mean, std, other_rate, records }
        })
        .collect();
    ScoreTable { model: model.to_string(), scores }
}

/// Appends transcript records as JSONL.
pub fn write_transcripts(records: &[EvalRecord], path: &Path) -> Result<()> {
    let mut body = String::new();
    for r in records {
        body.push_str(&serde_json::to_string(r)?);
        body.push('\n');
    }
    fs::write(path, body).with_context(|| format!("writing transcripts {}", path.display()))?;
    Ok(())
}

/// Reads a transcript file back; schema errors cite the line.
pub fn read_transcripts(path: &Path) -> Result<Vec<EvalRecord>> {
    let file = fs::File::open(path)
        .with_context(|| format!("opening transcripts {}", path.display()))?;
    let mut out = Vec::new();
    for (no, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let record: EvalRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}: bad record on line {}", path.display(), no + 1))?;
        out.push(record);
    }
    Ok(out)
}

/// Renders the results table as CSV: `model,k,mean,std`. An empty run still
/// produces the header.
pub fn results_csv(table: &ScoreTable) -> String {
    let mut out = String::from("model,k,mean,std\n");
    for row in &table.scores {
        writeln!(out, "{},{},{:.4},{:.4}", table.model, row.k, row.mean, row.std)
            .expect("writing to a String cannot fail");
    }
    out
}

/// Renders plot data as CSV: accuracy against depth with the constant
/// guess-rate reference column.
pub fn plot_data_csv(table: &ScoreTable) -> String {
    let mut out = String::from("k,mean,std,guess_rate\n");
    for row in &table.scores {
        writeln!(out, "{},{:.4},{:.4},{GUESS_RATE}", row.k, row.mean, row.std)
            .expect("writing to a String cannot fail");
    }
    out
}

/// Writes the standard report files — `results.csv`, `plot_data.csv` and
/// `transcripts.jsonl` — into `out_dir`.
pub fn write_report(table: &ScoreTable, records: &[EvalRecord], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    fs::write(out_dir.join("results.csv"), results_csv(table))?;
    fs::write(out_dir.join("plot_data.csv"), plot_data_csv(table))?;
    write_transcripts(records, &out_dir.join("transcripts.jsonl"))?;
    Ok(())
}
