//! Prompt corpora for key-value retrieval and multi-document QA.
//!
//! Each corpus iteration draws one set of content (fresh UUID pairs, or one
//! QA entry with a shuffled distractor set) and emits one prompt per
//! scheduled gold position, rotating the gold item through the schedule.
//! Train/test splits are made per iteration so the halves never share
//! content.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::rng::{self, stream};
use crate::text::normalize_answer;

/// Upper bound on the number of probe classes a schedule may produce.
pub const MAX_SCHEDULE_LEN: usize = 11;

/// Default cap on MDQA document body length, in characters.
pub const DEFAULT_MAX_BODY_CHARS: usize = 1500;

pub const KV_INSTRUCTION: &str =
    "Extract the value corresponding to the specified key in the JSON object below.";
pub const MDQA_INSTRUCTION: &str = "Write a high-quality answer for the given question using only the provided search results (some of which might be irrelevant).";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("gold index {index} out of range 1..={len}")]
    GoldIndexOutOfRange { index: usize, len: usize },
    #[error("need {needed} distractors but entry has {available}")]
    InsufficientDistractors { needed: usize, available: usize },
    #[error("corpus too small to split: {groups} content group(s)")]
    TooSmallToSplit { groups: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("{path}:{line}: {reason}")]
    InvalidPoolEntry {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Kv,
    Mdqa,
    /// Archives produced by [`crate::synth`]; never generated as text.
    Synthetic,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Kv => "kv",
            Task::Mdqa => "mdqa",
            Task::Synthetic => "synthetic",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "kv" => Ok(Task::Kv),
            "mdqa" => Ok(Task::Mdqa),
            "synthetic" => Ok(Task::Synthetic),
            other => Err(format!("unknown task `{other}` (expected kv or mdqa)")),
        }
    }
}

/// Gold positions probed for a context of `n` items: position 1 plus
/// `round(k·n/10)` for k = 1..10, deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionSchedule {
    pub n: u32,
    pub positions: Vec<u32>,
}

impl PositionSchedule {
    pub fn new(n: u32) -> Result<Self, CorpusError> {
        if n == 0 {
            return Err(CorpusError::InvalidSchedule("n must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        set.insert(1);
        for k in 1..=10u64 {
            // round half up of k*n/10
            let p = (k * n as u64 + 5) / 10;
            set.insert(p.clamp(1, n as u64) as u32);
        }
        Ok(Self {
            n,
            positions: set.into_iter().collect(),
        })
    }

    /// Builds a schedule from explicit positions, checking its invariants.
    pub fn from_positions(n: u32, positions: Vec<u32>) -> Result<Self, CorpusError> {
        let s = Self { n, positions };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidSchedule(m));
        if self.positions.is_empty() || self.positions.len() > MAX_SCHEDULE_LEN {
            return bad(format!(
                "length {} not in 1..={MAX_SCHEDULE_LEN}",
                self.positions.len()
            ));
        }
        if self.positions[0] != 1 {
            return bad("first position must be 1".into());
        }
        if *self.positions.last().unwrap() != self.n {
            return bad(format!("last position must equal n = {}", self.n));
        }
        if self.positions.windows(2).any(|w| w[0] >= w[1]) {
            return bad("positions must be strictly increasing".into());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// 0-based class of a 1-based position, if scheduled.
    pub fn class_of(&self, position: u32) -> Option<usize> {
        self.positions.binary_search(&position).ok()
    }
}

/// Convenience wrapper matching the schedule constructor.
pub fn position_schedule(n: u32) -> Result<PositionSchedule, CorpusError> {
    PositionSchedule::new(n)
}

/// Formats 128 random bits as a canonical version-4 UUID. Consumes exactly
/// 16 bytes from `rng`.
pub fn uuid_v4<R: RngCore + ?Sized>(rng: &mut R) -> String {
    let mut b = [0u8; 16];
    rng.fill_bytes(&mut b);
    b[6] = (b[6] & 0x0f) | 0x40;
    b[8] = (b[8] & 0x3f) | 0x80;
    let mut s = String::with_capacity(36);
    for (i, byte) in b.iter().enumerate() {
        if matches!(i, 4 | 6 | 8 | 10) {
            s.push('-');
        }
        s.push_str(&format!("{byte:02x}"));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KvPair {
    pub key: String,
    pub value: String,
}

/// Draws `n` pairs with all keys distinct and no key equal to any value.
pub fn random_kv_pairs<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> Vec<KvPair> {
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::with_capacity(n);
    while pairs.len() < n {
        let key = uuid_v4(rng);
        let value = uuid_v4(rng);
        if key == value || !seen.insert(key.clone()) {
            continue;
        }
        pairs.push(KvPair { key, value });
    }
    pairs
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

/// Renders the key-value retrieval prompt, querying the key at the 1-based
/// `gold_index`.
pub fn render_kv_prompt(pairs: &[KvPair], gold_index: usize) -> Result<String, CorpusError> {
    if gold_index == 0 || gold_index > pairs.len() {
        return Err(CorpusError::GoldIndexOutOfRange {
            index: gold_index,
            len: pairs.len(),
        });
    }
    let mut s = String::with_capacity(pairs.len() * 84 + 200);
    s.push_str(KV_INSTRUCTION);
    s.push_str("\n\nJSON data:\n{\n");
    for (i, p) in pairs.iter().enumerate() {
        s.push_str("  ");
        s.push_str(&json_str(&p.key));
        s.push_str(": ");
        s.push_str(&json_str(&p.value));
        if i + 1 < pairs.len() {
            s.push(',');
        }
        s.push('\n');
    }
    s.push_str("}\n\nKey: ");
    s.push_str(&json_str(&pairs[gold_index - 1].key));
    s.push_str("\nCorresponding value:");
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdqaDocument {
    pub title: String,
    pub body: String,
    pub contains_answer: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPoolEntry {
    pub question: String,
    pub answer_aliases: Vec<String>,
    pub gold_document: MdqaDocument,
    pub distractors: Vec<MdqaDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PoolDoc {
    title: String,
    body: String,
}

/// On-disk shape of one QA pool line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PoolLine {
    question: String,
    answers: Vec<String>,
    gold: PoolDoc,
    distractors: Vec<PoolDoc>,
}

impl QaPoolEntry {
    fn from_line(line: PoolLine) -> Result<Self, String> {
        if line.question.trim().is_empty() {
            return Err("empty question".into());
        }
        if line.answers.is_empty() || line.answers.iter().any(|a| normalize_answer(a).is_empty()) {
            return Err("answers must be a non-empty list of non-empty strings".into());
        }
        let body = normalize_answer(&line.gold.body);
        if !line
            .answers
            .iter()
            .any(|a| body.contains(&normalize_answer(a)))
        {
            return Err("gold document does not contain any answer alias".into());
        }
        Ok(Self {
            question: line.question,
            answer_aliases: line.answers,
            gold_document: MdqaDocument {
                title: line.gold.title,
                body: line.gold.body,
                contains_answer: true,
            },
            distractors: line
                .distractors
                .into_iter()
                .map(|d| MdqaDocument {
                    title: d.title,
                    body: d.body,
                    contains_answer: false,
                })
                .collect(),
        })
    }

    fn to_line(&self) -> PoolLine {
        PoolLine {
            question: self.question.clone(),
            answers: self.answer_aliases.clone(),
            gold: PoolDoc {
                title: self.gold_document.title.clone(),
                body: self.gold_document.body.clone(),
            },
            distractors: self
                .distractors
                .iter()
                .map(|d| PoolDoc {
                    title: d.title.clone(),
                    body: d.body.clone(),
                })
                .collect(),
        }
    }
}

/// Reads a line-delimited JSON QA pool. Blank lines are skipped.
pub fn read_qa_pool(path: &Path) -> Result<Vec<QaPoolEntry>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut pool = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PoolLine = serde_json::from_str(&line).map_err(|source| CorpusError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        let entry = QaPoolEntry::from_line(parsed).map_err(|reason| CorpusError::InvalidPoolEntry {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        })?;
        pool.push(entry);
    }
    Ok(pool)
}

pub fn write_qa_pool(pool: &[QaPoolEntry], path: &Path) -> Result<(), CorpusError> {
    let lines: Vec<PoolLine> = pool.iter().map(QaPoolEntry::to_line).collect();
    write_jsonl(&lines, path)
}

fn truncate_chars(s: &str, max_chars: usize) -> &str {
    match s.char_indices().nth(max_chars) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}

/// Renders an MDQA prompt: samples `n_docs - 1` distractors without
/// replacement, shuffles them, and inserts the gold document at the 1-based
/// `gold_index`. Bodies are cut to `max_body_chars` characters.
pub fn render_mdqa_prompt<R: Rng + ?Sized>(
    entry: &QaPoolEntry,
    n_docs: usize,
    gold_index: usize,
    max_body_chars: usize,
    rng: &mut R,
) -> Result<(String, Vec<MdqaDocument>), CorpusError> {
    if gold_index == 0 || gold_index > n_docs {
        return Err(CorpusError::GoldIndexOutOfRange {
            index: gold_index,
            len: n_docs,
        });
    }
    let needed = n_docs - 1;
    if entry.distractors.len() < needed {
        return Err(CorpusError::InsufficientDistractors {
            needed,
            available: entry.distractors.len(),
        });
    }
    let mut docs: Vec<MdqaDocument> = index::sample(rng, entry.distractors.len(), needed)
        .into_iter()
        .map(|i| entry.distractors[i].clone())
        .collect();
    docs.shuffle(rng);
    docs.insert(gold_index - 1, entry.gold_document.clone());
    for d in &mut docs {
        let cut = truncate_chars(&d.body, max_body_chars).len();
        d.body.truncate(cut);
    }

    let mut s = String::new();
    s.push_str(MDQA_INSTRUCTION);
    s.push_str("\n\n");
    for (i, d) in docs.iter().enumerate() {
        s.push_str(&format!("Document [{}](Title: {}) {}\n", i + 1, d.title, d.body));
    }
    s.push_str("\nQuestion: ");
    s.push_str(&entry.question);
    s.push_str("\nAnswer:");
    Ok((s, docs))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub prompt_id: String,
    pub task: Task,
    pub text: String,
    /// 1-based position of the gold item.
    pub gold_position: u32,
    /// 0-based index into the schedule.
    pub gold_class: u32,
    pub answer: String,
    pub answer_aliases: Vec<String>,
    pub n_items: u32,
    /// Content group (the generating iteration). Records sharing a group
    /// share their kv pairs or document set.
    pub group: u64,
}

/// Where prompt content comes from.
#[derive(Debug, Clone, Copy)]
pub enum CorpusSource<'a> {
    Kv,
    Mdqa {
        pool: &'a [QaPoolEntry],
        max_body_chars: usize,
    },
}

impl CorpusSource<'_> {
    pub fn task(&self) -> Task {
        match self {
            CorpusSource::Kv => Task::Kv,
            CorpusSource::Mdqa { .. } => Task::Mdqa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<PromptRecord>,
    pub schedule: PositionSchedule,
    pub seed: u64,
    pub task: Task,
}

impl Corpus {
    /// Number of records per gold class, in schedule order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.schedule.len()];
        for r in &self.records {
            counts[r.gold_class as usize] += 1;
        }
        counts
    }

    pub fn groups(&self) -> Vec<u64> {
        let mut seen = BTreeSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.group))
            .map(|r| r.group)
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        write_jsonl(&self.records, path)
    }
}

/// Generates `iterations × |schedule|` prompts. Iteration `i` draws from its
/// own sub-stream of `seed`, so output does not depend on evaluation order.
pub fn generate_corpus(
    source: CorpusSource<'_>,
    n_items: u32,
    iterations: usize,
    seed: u64,
) -> Result<Corpus, CorpusError> {
    if iterations == 0 {
        return Err(CorpusError::InvalidArgument("iterations must be at least 1".into()));
    }
    let schedule = PositionSchedule::new(n_items)?;
    let mut records = Vec::with_capacity(iterations * schedule.len());
    for it in 0..iterations as u64 {
        records.extend(iteration_records(source, &schedule, seed, it)?);
    }
    Ok(Corpus {
        records,
        schedule,
        seed,
        task: source.task(),
    })
}

/// The records of one iteration (content group `it`): one prompt per
/// scheduled position, all sharing the same kv pairs or document set.
pub fn iteration_records(
    source: CorpusSource<'_>,
    schedule: &PositionSchedule,
    seed: u64,
    it: u64,
) -> Result<Vec<PromptRecord>, CorpusError> {
    let task = source.task();
    let n_items = schedule.n;
    let n = n_items as usize;
    let mut records = Vec::with_capacity(schedule.len());
    match source {
        CorpusSource::Kv => {
            let mut rng = rng::sub_rng(seed, stream::KV_ITERATION, it);
            let mut pairs = random_kv_pairs(&mut rng, n);
            let gold = pairs.remove(0);
            for (class, &pos) in schedule.positions.iter().enumerate() {
                let mut ordered = pairs.clone();
                ordered.insert(pos as usize - 1, gold.clone());
                let text = render_kv_prompt(&ordered, pos as usize)?;
                records.push(PromptRecord {
                    prompt_id: format!("kv-{seed}-{it:06}-{pos:03}"),
                    task,
                    text,
                    gold_position: pos,
                    gold_class: class as u32,
                    answer: gold.value.clone(),
                    answer_aliases: vec![gold.value.clone()],
                    n_items,
                    group: it,
                });
            }
        }
        CorpusSource::Mdqa {
            pool,
            max_body_chars,
        } => {
            if pool.is_empty() {
                return Err(CorpusError::InvalidArgument("QA pool is empty".into()));
            }
            let mut rng = rng::sub_rng(seed, stream::MDQA_ITERATION, it);
            let entry = &pool[rng.random_range(0..pool.len())];
            let doc_seed = rng.next_u64();
            for (class, &pos) in schedule.positions.iter().enumerate() {
                // Same doc_seed at every position: identical distractor
                // set and order, only the gold slot moves.
                let mut doc_rng = rng::rng_from_seed(doc_seed);
                let (text, _) =
                    render_mdqa_prompt(entry, n, pos as usize, max_body_chars, &mut doc_rng)?;
                records.push(PromptRecord {
                    prompt_id: format!("mdqa-{seed}-{it:06}-{pos:03}"),
                    task,
                    text,
                    gold_position: pos,
                    gold_class: class as u32,
                    answer: entry.answer_aliases[0].clone(),
                    answer_aliases: entry.answer_aliases.clone(),
                    n_items,
                    group: it,
                });
            }
        }
    }
    Ok(records)
}

/// Splits by content group. The number of test groups is
/// `round(test_fraction × groups)`, clamped to `1..=groups-1`.
pub fn split_corpus(
    corpus: &Corpus,
    test_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus), CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::InvalidArgument(format!(
            "test_fraction {test_fraction} not in (0, 1)"
        )));
    }
    let mut groups = corpus.groups();
    if groups.len() < 2 {
        return Err(CorpusError::TooSmallToSplit {
            groups: groups.len(),
        });
    }
    let n_test = ((test_fraction * groups.len() as f64).round() as usize).clamp(1, groups.len() - 1);
    let mut rng = rng::sub_rng(seed, stream::CORPUS_SPLIT, 0);
    groups.shuffle(&mut rng);
    let test_groups: BTreeSet<u64> = groups[..n_test].iter().copied().collect();

    let (test, train): (Vec<_>, Vec<_>) = corpus
        .records
        .iter()
        .cloned()
        .partition(|r| test_groups.contains(&r.group));
    let wrap = |records| Corpus {
        records,
        schedule: corpus.schedule.clone(),
        seed: corpus.seed,
        task: corpus.task,
    };
    Ok((wrap(train), wrap(test)))
}

/// Writes one JSON value per line, LF-terminated.
pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| CorpusError::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_prompt_records(path: &Path) -> Result<Vec<PromptRecord>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| CorpusError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}
