//! Benchmark loaders and the text-cleaning pipeline.
//!
//! Labels are always stored 0-based. AgNews class indices (1..=4) and the
//! paired StackOverflow label file (1..=20) are shifted on load; the
//! two-column StackOverflow TSV is already 0-based.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AGNEWS_CLASSES: usize = 4;
pub const STACKOVERFLOW_CLASSES: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: u64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_name: Option<String>,
}

impl Document {
    pub fn new(id: u64, text: impl Into<String>) -> Self {
        Self {
            id,
            text: text.into(),
            label: None,
            class_name: None,
        }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub num_classes: Option<usize>,
    pub source_tag: String,
}

impl Corpus {
    pub fn new(source_tag: impl Into<String>, num_classes: Option<usize>) -> Self {
        Self {
            documents: Vec::new(),
            num_classes,
            source_tag: source_tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Ground-truth labels in document order, or `None` if any document is unlabeled.
    pub fn labels(&self) -> Option<Vec<usize>> {
        self.documents.iter().map(|d| d.label).collect()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.text.as_str())
    }

    /// Checks id ordering, label ranges and non-empty texts.
    pub fn validate(&self) -> Result<()> {
        let mut prev: Option<u64> = None;
        for d in &self.documents {
            if let Some(p) = prev {
                if d.id <= p {
                    return Err(Error::invalid(
                        "corpus",
                        format!("document ids not strictly increasing at id {}", d.id),
                    ));
                }
            }
            prev = Some(d.id);
            if d.text.trim().is_empty() {
                return Err(Error::invalid("corpus", format!("document {} has empty text", d.id)));
            }
            if let (Some(l), Some(k)) = (d.label, self.num_classes) {
                if l >= k {
                    return Err(Error::invalid(
                        "corpus",
                        format!("document {} label {l} outside [0, {k})", d.id),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Writes the corpus as JSON lines: a header object then one document per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = CorpusHeader {
            source_tag: self.source_tag.clone(),
            num_classes: self.num_classes,
        };
        let io = |e| Error::io(path, e);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io)?;
        for d in &self.documents {
            serde_json::to_writer(&mut w, d)?;
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let reader = open(path)?;
        let mut lines = reader.lines().enumerate();
        let Some((_, first)) = lines.next() else {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                message: "missing corpus header".into(),
            });
        };
        let first = first.map_err(|e| Error::io(path, e))?;
        let header: CorpusHeader = serde_json::from_str(&first).map_err(|e| Error::Parse {
            path: path.into(),
            line: 1,
            message: e.to_string(),
        })?;
        let mut corpus = Corpus::new(header.source_tag, header.num_classes);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.into(),
                line: i + 1,
                message: e.to_string(),
            })?;
            corpus.documents.push(doc);
        }
        corpus.validate()?;
        Ok(corpus)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusHeader {
    source_tag: String,
    num_classes: Option<usize>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn check_limit(limit: Option<usize>) -> Result<()> {
    if limit == Some(0) {
        return Err(Error::invalid("limit", "must be positive"));
    }
    Ok(())
}

/// Loads AgNews (`class-index,title,description`, quoted CSV, no header).
///
/// Only the title is kept as document text. A leading `Class Index` header
/// row, as shipped by some mirrors, is skipped.
pub fn load_agnews(path: &Path, limit: Option<usize>) -> Result<Corpus> {
    check_limit(limit)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(open(path)?);
    let mut corpus = Corpus::new("agnews", Some(AGNEWS_CLASSES));
    for (i, rec) in rdr.records().enumerate() {
        if limit.is_some_and(|l| corpus.len() >= l) {
            break;
        }
        let line = i + 1;
        let parse_err = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        if rec.len() != 3 {
            return Err(parse_err(format!("expected 3 columns, found {}", rec.len())));
        }
        let class = rec[0].trim();
        if i == 0 && class.eq_ignore_ascii_case("class index") {
            continue;
        }
        let class: usize = class
            .parse()
            .map_err(|_| parse_err(format!("class index {class:?} is not an integer")))?;
        if !(1..=AGNEWS_CLASSES).contains(&class) {
            return Err(parse_err(format!("class index {class} outside 1..=4")));
        }
        let title = rec[1].trim();
        if title.is_empty() {
            return Err(parse_err("empty title".into()));
        }
        let id = corpus.len() as u64;
        corpus
            .documents
            .push(Document::new(id, title).with_label(class - 1));
    }
    Ok(corpus)
}

/// Where a StackOverflow corpus comes from.
#[derive(Clone, Copy, Debug)]
pub enum StackOverflowSource<'a> {
    /// `label<TAB>title` per line, labels 0-based.
    Tsv(&'a Path),
    /// One title per line with a parallel file of 1-based labels.
    Paired { titles: &'a Path, labels: &'a Path },
}

pub fn load_stackoverflow(source: StackOverflowSource<'_>, limit: Option<usize>) -> Result<Corpus> {
    check_limit(limit)?;
    let mut corpus = Corpus::new("stackoverflow", Some(STACKOVERFLOW_CLASSES));
    let take = limit.unwrap_or(usize::MAX);
    match source {
        StackOverflowSource::Tsv(path) => {
            for (i, line) in open(path)?.lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                if corpus.len() >= take {
                    break;
                }
                let parse_err = |message: String| Error::Parse {
                    path: path.into(),
                    line: i + 1,
                    message,
                };
                let (label, title) = line
                    .split_once('\t')
                    .ok_or_else(|| parse_err("expected `label<TAB>title`".into()))?;
                let label = parse_label(label, 0).map_err(parse_err)?;
                let title = title.trim();
                if title.is_empty() {
                    return Err(parse_err("empty title".into()));
                }
                let id = corpus.len() as u64;
                corpus.documents.push(Document::new(id, title).with_label(label));
            }
        }
        StackOverflowSource::Paired { titles, labels } => {
            let title_lines = read_nonempty_lines(titles)?;
            let label_lines = read_nonempty_lines(labels)?;
            if title_lines.len() != label_lines.len() {
                return Err(Error::CountMismatch {
                    titles: title_lines.len(),
                    labels: label_lines.len(),
                });
            }
            for ((line, title), (_, label)) in title_lines.into_iter().zip(label_lines).take(take) {
                let label = parse_label(&label, 1).map_err(|message| Error::Parse {
                    path: labels.into(),
                    line,
                    message,
                })?;
                let id = corpus.len() as u64;
                corpus.documents.push(Document::new(id, title.trim()).with_label(label));
            }
        }
    }
    Ok(corpus)
}

fn read_nonempty_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn parse_label(raw: &str, base: usize) -> std::result::Result<usize, String> {
    let raw = raw.trim();
    let v: usize = raw
        .parse()
        .map_err(|_| format!("label {raw:?} is not an integer"))?;
    if v < base || v - base >= STACKOVERFLOW_CLASSES {
        return Err(format!(
            "label {v} outside {base}..={}",
            base + STACKOVERFLOW_CLASSES - 1
        ));
    }
    Ok(v - base)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessRules {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    /// Keep a document only if it contains one of these (case-insensitive). Empty keeps all.
    pub relevance_keywords: Vec<String>,
    pub min_tokens: usize,
}

impl PreprocessRules {
    /// Lowercase + punctuation stripping, no filtering.
    pub fn normalizing() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            ..Self::default()
        }
    }
}

/// Normalizes one document, or drops it when it fails the relevance or length filters.
pub fn preprocess(doc: &Document, rules: &PreprocessRules) -> Option<Document> {
    let normalized = normalize_text(&doc.text, rules);
    let tokens: Vec<&str> = normalized.split_whitespace().collect();
    if tokens.is_empty() || tokens.len() < rules.min_tokens {
        return None;
    }
    if !is_relevant(&normalized, &rules.relevance_keywords) {
        return None;
    }
    // all-off rules leave the text byte-identical
    let text = if rules.lowercase || rules.strip_punctuation {
        tokens.join(" ")
    } else {
        doc.text.clone()
    };
    Some(Document {
        text,
        ..doc.clone()
    })
}

fn normalize_text(text: &str, rules: &PreprocessRules) -> String {
    let mut s: String = if rules.strip_punctuation {
        text.chars()
            .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
            .collect()
    } else {
        text.to_owned()
    };
    if rules.lowercase {
        s = s.to_lowercase();
    }
    s
}

fn is_relevant(text: &str, keywords: &[String]) -> bool {
    if keywords.is_empty() {
        return true;
    }
    let lower = text.to_lowercase();
    let tokens: HashSet<&str> = lower.split_whitespace().collect();
    keywords.iter().any(|k| {
        let k = k.to_lowercase();
        let k = k.trim();
        if k.contains(char::is_whitespace) {
            lower.contains(k)
        } else {
            tokens.contains(k)
        }
    })
}

/// Applies [`preprocess`] to every document, dropping the filtered ones.
pub fn preprocess_corpus(corpus: &Corpus, rules: &PreprocessRules) -> Corpus {
    Corpus {
        documents: corpus
            .documents
            .iter()
            .filter_map(|d| preprocess(d, rules))
            .collect(),
        num_classes: corpus.num_classes,
        source_tag: corpus.source_tag.clone(),
    }
}

/// Removes exact duplicate texts, keeping the first occurrence.
pub fn dedup(corpus: &Corpus) -> Corpus {
    let mut seen = HashSet::new();
    Corpus {
        documents: corpus
            .documents
            .iter()
            .filter(|d| seen.insert(d.text.as_str()))
            .cloned()
            .collect(),
        num_classes: corpus.num_classes,
        source_tag: corpus.source_tag.clone(),
    }
}
