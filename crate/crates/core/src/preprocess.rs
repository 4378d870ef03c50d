//! Stage one of the spam pipeline: sender prefiltering followed by
//! tokenization, stop-word elimination, homogeneous-word normalization and
//! duplicate elimination. All functions are pure.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use thiserror::Error;

use crate::message::{canonicalize_address, is_weird_address, SmsMessage};

/// Sender-level spam options: blacklisted, specifically-spammed, unknown and
/// weird numbers are routed to the spam folder without content analysis.
/// All address sets hold canonical forms (see [`canonicalize_address`]).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpamPrefilterConfig {
    pub blacklist: BTreeSet<String>,
    pub spam_unknown: bool,
    pub spam_weird: bool,
    pub spam_specific: BTreeSet<String>,
    pub contacts: BTreeSet<String>,
}

impl SpamPrefilterConfig {
    /// Canonicalizes every configured address in place; call after filling
    /// the sets from user input.
    pub fn canonicalized(mut self) -> Self {
        self.blacklist = self.blacklist.iter().map(|a| canonicalize_address(a)).collect();
        self.spam_specific = self.spam_specific.iter().map(|a| canonicalize_address(a)).collect();
        self.contacts = self.contacts.iter().map(|a| canonicalize_address(a)).collect();
        self
    }
}

/// Outcome of the sender prefilter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefilterOutcome {
    /// Content analysis proceeds.
    PassThrough,
    /// Straight to the spam folder, no content analysis.
    SpamNoAnalysis,
}

/// Pure function of sender and config; the body is never inspected.
pub fn prefilter_sender(msg: &SmsMessage, cfg: &SpamPrefilterConfig) -> PrefilterOutcome {
    let sender = canonicalize_address(&msg.sender);
    let spam = cfg.blacklist.contains(&sender)
        || cfg.spam_specific.contains(&sender)
        || (cfg.spam_unknown && !cfg.contacts.contains(&sender))
        || (cfg.spam_weird && is_weird_address(&msg.sender));
    if spam {
        PrefilterOutcome::SpamNoAnalysis
    } else {
        PrefilterOutcome::PassThrough
    }
}

/// Splits on any non-alphanumeric character, lowercases, and drops empty and
/// pure-digit tokens.
pub fn tokenize(body: &str) -> Vec<String> {
    body.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| !t.chars().all(|c| c.is_numeric()))
        .map(|t| t.to_lowercase())
        .collect()
}

/// Order-preserving removal of stop-list words.
pub fn remove_stopwords(tokens: Vec<String>, stoplist: &BTreeSet<String>) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// Substitutes each token by its canonical representative when the
/// homogeneous table has an entry for it; other tokens pass through.
pub fn normalize_homogeneous(tokens: Vec<String>, table: &BTreeMap<String, String>) -> Vec<String> {
    tokens
        .into_iter()
        .map(|t| table.get(&t).cloned().unwrap_or(t))
        .collect()
}

/// The filtered keywords of one SMS: stop-words removed, normalized,
/// duplicates eliminated, original order preserved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordList(pub Vec<String>);

impl KeywordList {
    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Keeps the first occurrence of each token, dropping later duplicates.
pub fn dedupe(tokens: Vec<String>) -> KeywordList {
    let mut seen = BTreeSet::new();
    KeywordList(tokens.into_iter().filter(|t| seen.insert(t.clone())).collect())
}

/// Runs the full content-side preprocessing chain on an SMS body.
pub fn keywords_of(
    body: &str,
    stoplist: &BTreeSet<String>,
    table: &BTreeMap<String, String>,
) -> KeywordList {
    dedupe(normalize_homogeneous(remove_stopwords(tokenize(body), stoplist), table))
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error reading fixture: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads a stop-word list, one lowercase word per line; `#` comments and
/// blank lines are skipped.
pub fn load_stopwords(reader: impl BufRead) -> Result<BTreeSet<String>, PreprocessError> {
    let mut out = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let word = line.trim();
        if word.is_empty() || word.starts_with('#') {
            continue;
        }
        if word.chars().any(char::is_whitespace) {
            return Err(PreprocessError::Parse {
                line: idx + 1,
                msg: format!("stop word '{word}' contains whitespace"),
            });
        }
        out.insert(word.to_lowercase());
    }
    Ok(out)
}

/// Loads the homogeneous-word table (`form<TAB>canonical` per line).
/// Canonical words must map to themselves or be absent from the table,
/// which keeps normalization idempotent.
pub fn load_homogeneous(reader: impl BufRead) -> Result<BTreeMap<String, String>, PreprocessError> {
    let mut table = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.splitn(2, '\t');
        let form = parts.next().unwrap_or("").trim().to_lowercase();
        let canonical = parts.next().unwrap_or("").trim().to_lowercase();
        if form.is_empty() || canonical.is_empty() {
            return Err(PreprocessError::Parse {
                line: idx + 1,
                msg: "expected 'form<TAB>canonical'".to_string(),
            });
        }
        table.insert(form, canonical);
    }
    for (form, canonical) in &table {
        if let Some(mapped) = table.get(canonical) {
            if mapped != canonical {
                return Err(PreprocessError::Parse {
                    line: 0,
                    msg: format!(
                        "canonical word '{canonical}' (target of '{form}') is itself remapped to '{mapped}'"
                    ),
                });
            }
        }
    }
    Ok(table)
}
