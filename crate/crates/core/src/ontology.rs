//! The spam-concept knowledge base: keyword entries with their synonym and
//! hypernym sets, grown by enhancement, pruned by feedback and persisted as
//! line-delimited TSV with atomic rewrites.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

/// Where a spam concept came from. Feedback only ever removes `Enhancement`
/// concepts; `Seed` entries are permanent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConceptSource {
    Seed,
    Enhancement,
}

impl ConceptSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConceptSource::Seed => "seed",
            ConceptSource::Enhancement => "enhancement",
        }
    }
}

impl std::str::FromStr for ConceptSource {
    type Err = OntologyError;
    fn from_str(s: &str) -> Result<Self, OntologyError> {
        match s {
            "seed" => Ok(ConceptSource::Seed),
            "enhancement" => Ok(ConceptSource::Enhancement),
            other => Err(OntologyError::BadSource(other.to_string())),
        }
    }
}

/// One entry of the knowledge base: a spam keyword with the synonyms and
/// hypernyms extracted from the taxonomy when it was learned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpamConcept {
    pub keyword: String,
    /// Lowercase synonym set; never contains the keyword itself.
    pub synonyms: BTreeSet<String>,
    pub hypernyms: BTreeSet<String>,
    /// Milliseconds since epoch at insertion time.
    pub added_at: i64,
    pub source: ConceptSource,
}

impl SpamConcept {
    pub fn new(
        keyword: impl Into<String>,
        mut synonyms: BTreeSet<String>,
        hypernyms: BTreeSet<String>,
        added_at: i64,
        source: ConceptSource,
    ) -> Self {
        let keyword = keyword.into();
        synonyms.remove(&keyword);
        SpamConcept {
            keyword,
            synonyms,
            hypernyms,
            added_at,
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown concept source '{0}'")]
    BadSource(String),
    #[error("io error on ontology store: {0}")]
    Io(#[from] std::io::Error),
}

/// In-memory spam-concept store. The `revision` counter increases by exactly
/// one for every mutating call that changes anything; it identifies the
/// snapshot a classification ran against and is not persisted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpamOntology {
    concepts: BTreeMap<String, SpamConcept>,
    revision: u64,
}

impl SpamOntology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, keyword: &str) -> Option<&SpamConcept> {
        self.concepts.get(keyword)
    }

    pub fn contains(&self, keyword: &str) -> bool {
        self.concepts.contains_key(keyword)
    }

    /// Concepts in ascending keyword order — the scan order used by matching.
    pub fn concepts(&self) -> impl Iterator<Item = &SpamConcept> {
        self.concepts.values()
    }

    /// Inserts every concept whose keyword is not already present. Existing
    /// entries are never overwritten. Bumps the revision once if anything
    /// changed and reports whether it did.
    pub fn add_new(&mut self, batch: impl IntoIterator<Item = SpamConcept>) -> bool {
        let mut changed = false;
        for concept in batch {
            if !self.concepts.contains_key(&concept.keyword) {
                self.concepts.insert(concept.keyword.clone(), concept);
                changed = true;
            }
        }
        if changed {
            self.revision += 1;
        }
        changed
    }

    /// Removes the listed keywords (missing ones are ignored). Bumps the
    /// revision once if anything changed and reports whether it did.
    pub fn remove_all<S: AsRef<str>>(&mut self, keywords: impl IntoIterator<Item = S>) -> bool {
        let mut changed = false;
        for keyword in keywords {
            if self.concepts.remove(keyword.as_ref()).is_some() {
                changed = true;
            }
        }
        if changed {
            self.revision += 1;
        }
        changed
    }

    /// Parses the persisted form: one record per line,
    /// `keyword<TAB>syn1,syn2<TAB>hyp1,hyp2<TAB>source<TAB>added_at`.
    pub fn from_reader(reader: impl BufRead) -> Result<Self, OntologyError> {
        let mut concepts = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != 5 {
                return Err(OntologyError::Parse {
                    line: lineno,
                    msg: format!("expected 5 tab-separated fields, got {}", fields.len()),
                });
            }
            let keyword = fields[0].trim().to_string();
            if keyword.is_empty() {
                return Err(OntologyError::Parse {
                    line: lineno,
                    msg: "empty keyword".to_string(),
                });
            }
            if concepts.contains_key(&keyword) {
                return Err(OntologyError::Parse {
                    line: lineno,
                    msg: format!("duplicate keyword '{keyword}'"),
                });
            }
            let parse_set = |field: &str| -> BTreeSet<String> {
                field
                    .split(',')
                    .map(str::trim)
                    .filter(|w| !w.is_empty())
                    .map(str::to_string)
                    .collect()
            };
            let source: ConceptSource = fields[3].trim().parse()?;
            let added_at: i64 = fields[4].trim().parse().map_err(|_| OntologyError::Parse {
                line: lineno,
                msg: format!("bad added_at timestamp '{}'", fields[4]),
            })?;
            concepts.insert(
                keyword.clone(),
                SpamConcept::new(keyword, parse_set(fields[1]), parse_set(fields[2]), added_at, source),
            );
        }
        Ok(SpamOntology { concepts, revision: 0 })
    }

    /// Loads the store from `path`; a missing file is an empty store (the
    /// seed command creates it).
    pub fn load_or_empty(path: impl AsRef<Path>) -> Result<Self, OntologyError> {
        match std::fs::File::open(path) {
            Ok(file) => Self::from_reader(std::io::BufReader::new(file)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Renders the persisted form, records sorted by keyword.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for concept in self.concepts.values() {
            let join = |set: &BTreeSet<String>| set.iter().cloned().collect::<Vec<_>>().join(",");
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                concept.keyword,
                join(&concept.synonyms),
                join(&concept.hypernyms),
                concept.source.as_str(),
                concept.added_at
            ));
        }
        out
    }

    /// Atomic rewrite: writes a temp file next to the target and renames it
    /// into place, so concurrent readers never observe a torn store.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), OntologyError> {
        let path = path.as_ref();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let tmp_path = match dir {
            Some(dir) => dir.join(format!(
                ".{}.tmp{}",
                path.file_name().and_then(|n| n.to_str()).unwrap_or("ontology"),
                std::process::id()
            )),
            None => std::path::PathBuf::from(format!(".ontology.tmp{}", std::process::id())),
        };
        {
            let mut file = std::fs::File::create(&tmp_path)?;
            file.write_all(self.to_tsv().as_bytes())?;
            file.sync_all()?;
        }
        std::fs::rename(&tmp_path, path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn concept(keyword: &str, source: ConceptSource) -> SpamConcept {
        SpamConcept::new(keyword, set(&["syn"]), set(&["hyp"]), 42, source)
    }

    #[test]
    fn keyword_never_appears_in_its_own_synonyms() {
        let c = SpamConcept::new("free", set(&["free", "gratis"]), set(&[]), 0, ConceptSource::Seed);
        assert_eq!(c.synonyms, set(&["gratis"]));
    }

    #[test]
    fn add_new_bumps_revision_once_per_changing_call() {
        let mut ont = SpamOntology::new();
        assert!(ont.add_new(vec![concept("a", ConceptSource::Seed), concept("b", ConceptSource::Seed)]));
        assert_eq!(ont.revision(), 1);
        // Re-adding the same keywords changes nothing.
        assert!(!ont.add_new(vec![concept("a", ConceptSource::Enhancement)]));
        assert_eq!(ont.revision(), 1);
        assert_eq!(ont.get("a").unwrap().source, ConceptSource::Seed);
    }

    #[test]
    fn remove_all_only_bumps_on_change() {
        let mut ont = SpamOntology::new();
        ont.add_new(vec![concept("a", ConceptSource::Enhancement)]);
        assert!(!ont.remove_all(["missing"]));
        assert_eq!(ont.revision(), 1);
        assert!(ont.remove_all(["a"]));
        assert_eq!(ont.revision(), 2);
        assert!(ont.is_empty());
    }

    #[test]
    fn tsv_round_trip() {
        let mut ont = SpamOntology::new();
        ont.add_new(vec![
            SpamConcept::new("free", set(&["gratis"]), set(&["gift"]), 7, ConceptSource::Seed),
            SpamConcept::new("prize", set(&[]), set(&["gift", "money"]), 9, ConceptSource::Enhancement),
        ]);
        let text = ont.to_tsv();
        let reloaded = SpamOntology::from_reader(std::io::Cursor::new(text.as_bytes())).unwrap();
        assert_eq!(reloaded.len(), 2);
        assert_eq!(reloaded.get("free").unwrap(), ont.get("free").unwrap());
        assert_eq!(reloaded.get("prize").unwrap(), ont.get("prize").unwrap());
        // Rendering is deterministic and keyword-sorted.
        assert_eq!(text, reloaded.to_tsv());
        assert!(text.starts_with("free\t"));
    }

    #[test]
    fn save_and_load_or_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ontology.tsv");
        assert!(SpamOntology::load_or_empty(&path).unwrap().is_empty());
        let mut ont = SpamOntology::new();
        ont.add_new(vec![concept("loan", ConceptSource::Seed)]);
        ont.save(&path).unwrap();
        let back = SpamOntology::load_or_empty(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert!(back.contains("loan"));
    }

    #[test]
    fn malformed_record_is_rejected() {
        assert!(SpamOntology::from_reader(std::io::Cursor::new("free\tonly-two-fields\n")).is_err());
        assert!(SpamOntology::from_reader(std::io::Cursor::new(
            "free\t\t\tbogus-source\t0\n"
        ))
        .is_err());
    }
}
