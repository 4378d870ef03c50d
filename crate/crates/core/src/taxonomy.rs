//! A self-contained lexical taxonomy: a directed acyclic hypernym graph with
//! a lemma index, standing in for WordNet.
//!
//! The graph is loaded once from a line-based file (see [`TaxonomyGraph::from_reader`])
//! and then queried immutably: shortest undirected path between senses,
//! minimum root depth, lowest super ordinate (deepest common ancestor),
//! synonyms and hypernyms. All query results are deterministic; ties break
//! on the smallest synset id.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::BufRead;

use thiserror::Error;

/// Opaque synset identifier. Ordering is lexicographic on the raw string and
/// is the tie-break order used throughout the crate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SynsetId(pub String);

impl SynsetId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SynsetId {
    fn from(s: &str) -> Self {
        SynsetId(s.to_string())
    }
}

impl std::borrow::Borrow<str> for SynsetId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// One word sense: a set of synonymous lemmas plus hypernym (parent) edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub id: SynsetId,
    /// Non-empty set of lowercase lemmas without internal whitespace.
    pub lemmas: BTreeSet<String>,
    /// Parent synsets; empty exactly for roots.
    pub hypernym_ids: Vec<SynsetId>,
    pub gloss: Option<String>,
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cycle in hypernym graph involving edge {child} -> {parent}")]
    Cycle { child: SynsetId, parent: SynsetId },
    #[error("synset {id} references unknown hypernym {referenced}")]
    DanglingHypernym { id: SynsetId, referenced: SynsetId },
    #[error("unknown synset id {0}")]
    UnknownSynset(SynsetId),
    #[error("io error reading taxonomy: {0}")]
    Io(#[from] std::io::Error),
}

/// Immutable hypernym DAG with lemma index. Safe for unrestricted concurrent
/// reads once loaded.
#[derive(Debug, Clone)]
pub struct TaxonomyGraph {
    synsets: BTreeMap<SynsetId, Synset>,
    lemma_index: BTreeMap<String, BTreeSet<SynsetId>>,
    root_ids: BTreeSet<SynsetId>,
    /// Inverse hypernym edges, precomputed for undirected traversals.
    children: BTreeMap<SynsetId, Vec<SynsetId>>,
}

impl TaxonomyGraph {
    /// Parses the tab-separated taxonomy format:
    ///
    /// ```text
    /// synset_id<TAB>lemma1,lemma2,...<TAB>hypernym_id1,hypernym_id2,...<TAB>gloss
    /// ```
    ///
    /// An empty hypernym field marks a root; `#`-prefixed lines and blank
    /// lines are skipped. The gloss field may be omitted. Fails on malformed
    /// lines, duplicate ids, dangling hypernym references and cycles.
    pub fn from_reader(reader: impl BufRead) -> Result<Self, TaxonomyError> {
        let mut synsets: BTreeMap<SynsetId, Synset> = BTreeMap::new();

        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.splitn(4, '\t').collect();
            if fields.len() < 3 {
                return Err(TaxonomyError::Parse {
                    line: lineno,
                    msg: format!("expected at least 3 tab-separated fields, got {}", fields.len()),
                });
            }
            let id = SynsetId(fields[0].trim().to_string());
            if id.0.is_empty() {
                return Err(TaxonomyError::Parse {
                    line: lineno,
                    msg: "empty synset id".to_string(),
                });
            }
            if synsets.contains_key(&id) {
                return Err(TaxonomyError::Parse {
                    line: lineno,
                    msg: format!("duplicate synset id {id}"),
                });
            }

            let mut lemmas = BTreeSet::new();
            for lemma in fields[1].split(',') {
                let lemma = lemma.trim();
                if lemma.is_empty() {
                    return Err(TaxonomyError::Parse {
                        line: lineno,
                        msg: "empty lemma in lemma list".to_string(),
                    });
                }
                if lemma.chars().any(char::is_whitespace) {
                    return Err(TaxonomyError::Parse {
                        line: lineno,
                        msg: format!("lemma '{lemma}' contains whitespace"),
                    });
                }
                if lemma != lemma.to_lowercase() {
                    return Err(TaxonomyError::Parse {
                        line: lineno,
                        msg: format!("lemma '{lemma}' is not lowercase"),
                    });
                }
                lemmas.insert(lemma.to_string());
            }
            if lemmas.is_empty() {
                return Err(TaxonomyError::Parse {
                    line: lineno,
                    msg: "synset has no lemmas".to_string(),
                });
            }

            let hypernym_field = fields[2].trim();
            let mut hypernym_ids = Vec::new();
            if !hypernym_field.is_empty() {
                for h in hypernym_field.split(',') {
                    let h = h.trim();
                    if h.is_empty() {
                        return Err(TaxonomyError::Parse {
                            line: lineno,
                            msg: "empty hypernym id in list".to_string(),
                        });
                    }
                    hypernym_ids.push(SynsetId(h.to_string()));
                }
            }

            let gloss = fields
                .get(3)
                .map(|g| g.trim())
                .filter(|g| !g.is_empty())
                .map(str::to_string);

            synsets.insert(
                id.clone(),
                Synset {
                    id,
                    lemmas,
                    hypernym_ids,
                    gloss,
                },
            );
        }

        Self::from_synsets(synsets)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, TaxonomyError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    fn from_synsets(synsets: BTreeMap<SynsetId, Synset>) -> Result<Self, TaxonomyError> {
        // Referential integrity before anything else.
        for synset in synsets.values() {
            for parent in &synset.hypernym_ids {
                if !synsets.contains_key(parent) {
                    return Err(TaxonomyError::DanglingHypernym {
                        id: synset.id.clone(),
                        referenced: parent.clone(),
                    });
                }
            }
        }

        detect_cycle(&synsets)?;

        let mut lemma_index: BTreeMap<String, BTreeSet<SynsetId>> = BTreeMap::new();
        let mut root_ids = BTreeSet::new();
        let mut children: BTreeMap<SynsetId, Vec<SynsetId>> = BTreeMap::new();
        for synset in synsets.values() {
            for lemma in &synset.lemmas {
                lemma_index
                    .entry(lemma.clone())
                    .or_default()
                    .insert(synset.id.clone());
            }
            if synset.hypernym_ids.is_empty() {
                root_ids.insert(synset.id.clone());
            }
            for parent in &synset.hypernym_ids {
                children.entry(parent.clone()).or_default().push(synset.id.clone());
            }
        }
        for kids in children.values_mut() {
            kids.sort();
            kids.dedup();
        }

        Ok(TaxonomyGraph {
            synsets,
            lemma_index,
            root_ids,
            children,
        })
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.synsets.values()
    }

    pub fn root_ids(&self) -> &BTreeSet<SynsetId> {
        &self.root_ids
    }

    pub fn get(&self, id: &SynsetId) -> Result<&Synset, TaxonomyError> {
        self.synsets
            .get(id)
            .ok_or_else(|| TaxonomyError::UnknownSynset(id.clone()))
    }

    pub fn contains(&self, id: &SynsetId) -> bool {
        self.synsets.contains_key(id)
    }

    /// All synsets carrying `lemma`, in ascending id order; empty for unknown
    /// lemmas.
    pub fn synsets_of(&self, lemma: &str) -> Vec<SynsetId> {
        self.lemma_index
            .get(lemma)
            .map(|ids| ids.iter().cloned().collect())
            .unwrap_or_default()
    }

    /// Number of nodes (both endpoints included) on the shortest path between
    /// `a` and `b`, treating hypernym edges as undirected. `Some(1)` for
    /// `a == b`, `None` when the two senses live in disconnected components.
    pub fn path_length(&self, a: &SynsetId, b: &SynsetId) -> Result<Option<usize>, TaxonomyError> {
        self.get(a)?;
        self.get(b)?;
        if a == b {
            return Ok(Some(1));
        }
        let mut visited: BTreeSet<&SynsetId> = BTreeSet::new();
        let mut queue: VecDeque<(&SynsetId, usize)> = VecDeque::new();
        visited.insert(a);
        queue.push_back((a, 1));
        while let Some((node, nodes_so_far)) = queue.pop_front() {
            for neighbor in self.neighbors(node) {
                if neighbor == b {
                    return Ok(Some(nodes_so_far + 1));
                }
                if visited.insert(neighbor) {
                    queue.push_back((neighbor, nodes_so_far + 1));
                }
            }
        }
        Ok(None)
    }

    fn neighbors<'a>(&'a self, id: &SynsetId) -> impl Iterator<Item = &'a SynsetId> {
        let parents = self.synsets.get(id).map(|s| s.hypernym_ids.as_slice()).unwrap_or(&[]);
        let kids = self.children.get(id).map(Vec::as_slice).unwrap_or(&[]);
        parents.iter().chain(kids.iter())
    }

    /// Minimum number of nodes on a path from any root down to `s`,
    /// inclusive; roots have depth 1. Every node of a well-formed DAG
    /// reaches a root, so this always succeeds for known ids.
    pub fn depth(&self, s: &SynsetId) -> Result<usize, TaxonomyError> {
        self.get(s)?;
        let mut frontier: BTreeSet<&SynsetId> = BTreeSet::new();
        frontier.insert(s);
        let mut seen = frontier.clone();
        let mut depth = 1;
        loop {
            if frontier.iter().any(|id| self.root_ids.contains(*id)) {
                return Ok(depth);
            }
            let mut next: BTreeSet<&SynsetId> = BTreeSet::new();
            for id in &frontier {
                for parent in &self.synsets[*id].hypernym_ids {
                    if seen.insert(parent) {
                        next.insert(parent);
                    }
                }
            }
            debug_assert!(!next.is_empty(), "DAG node with no path to a root");
            frontier = next;
            depth += 1;
        }
    }

    /// The set of ancestors of `s` via hypernym edges, including `s` itself.
    pub fn ancestors(&self, s: &SynsetId) -> Result<BTreeSet<SynsetId>, TaxonomyError> {
        self.get(s)?;
        let mut out: BTreeSet<SynsetId> = BTreeSet::new();
        let mut stack = vec![s.clone()];
        while let Some(id) = stack.pop() {
            if out.insert(id.clone()) {
                for parent in &self.synsets[&id].hypernym_ids {
                    stack.push(parent.clone());
                }
            }
        }
        Ok(out)
    }

    /// Lowest super ordinate: the common ancestor of `a` and `b` (ancestor
    /// taken reflexively) with maximum depth, ties broken by smallest id.
    /// `lso(x, x) = x` by definition; `None` when the senses share no
    /// ancestor.
    pub fn lso(&self, a: &SynsetId, b: &SynsetId) -> Result<Option<SynsetId>, TaxonomyError> {
        self.get(a)?;
        self.get(b)?;
        if a == b {
            return Ok(Some(a.clone()));
        }
        let ancestors_a = self.ancestors(a)?;
        let ancestors_b = self.ancestors(b)?;
        let mut best: Option<(usize, &SynsetId)> = None;
        for id in ancestors_a.intersection(&ancestors_b) {
            let d = self.depth(id)?;
            best = match best {
                None => Some((d, id)),
                Some((bd, bid)) => {
                    if d > bd || (d == bd && id < bid) {
                        Some((d, id))
                    } else {
                        Some((bd, bid))
                    }
                }
            };
        }
        Ok(best.map(|(_, id)| id.clone()))
    }

    /// The lemmas of `s` — never empty by the synset invariant.
    pub fn synonyms(&self, s: &SynsetId) -> Result<BTreeSet<String>, TaxonomyError> {
        Ok(self.get(s)?.lemmas.clone())
    }

    /// Union of the lemmas of all direct hypernyms of `s`; empty for roots.
    pub fn hypernyms(&self, s: &SynsetId) -> Result<BTreeSet<String>, TaxonomyError> {
        let synset = self.get(s)?;
        let mut out = BTreeSet::new();
        for parent in &synset.hypernym_ids {
            out.extend(self.get(parent)?.lemmas.iter().cloned());
        }
        Ok(out)
    }
}

/// Depth-first cycle check over the hypernym edges, reporting one edge on the
/// first cycle found.
fn detect_cycle(synsets: &BTreeMap<SynsetId, Synset>) -> Result<(), TaxonomyError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        InProgress,
        Done,
    }
    let mut marks: BTreeMap<&SynsetId, Mark> = BTreeMap::new();

    for start in synsets.keys() {
        if marks.contains_key(start) {
            continue;
        }
        // Iterative DFS: (node, next-parent-index) frames.
        let mut stack: Vec<(&SynsetId, usize)> = vec![(start, 0)];
        marks.insert(start, Mark::InProgress);
        while let Some((node, i)) = stack.pop() {
            let parents = &synsets[node].hypernym_ids;
            if i < parents.len() {
                stack.push((node, i + 1));
                let parent = &parents[i];
                match marks.get(parent) {
                    Some(Mark::InProgress) => {
                        return Err(TaxonomyError::Cycle {
                            child: node.clone(),
                            parent: parent.clone(),
                        });
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(parent, Mark::InProgress);
                        stack.push((parent, 0));
                    }
                }
            } else {
                marks.insert(node, Mark::Done);
            }
        }
    }
    Ok(())
}
