//! Content analysis and classification: sense disambiguation over the
//! taxonomy, concept-set generation with the LSO depth threshold `h`,
//! matching against the spam ontology with O/S/H labels, collective scoring
//! against the threshold `theta`, plus ontology enhancement and user
//! feedback.
//!
//! Classification never mutates the ontology; enhancement and feedback are
//! explicit calls so the caller controls learning.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::message::SmsMessage;
use crate::ontology::{ConceptSource, SpamConcept, SpamOntology};
use crate::preprocess::{
    keywords_of, prefilter_sender, KeywordList, PrefilterOutcome, SpamPrefilterConfig,
};
use crate::taxonomy::{SynsetId, TaxonomyGraph, TaxonomyError};

/// How a concept entered the concept set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConceptOrigin {
    /// One of the message's own keywords.
    OriginalKeyword,
    /// A lowest-super-ordinate node admitted for a keyword pair.
    LsoNode,
}

/// A disambiguated keyword meaning. `sense` is `None` for words the
/// taxonomy does not know; LSO nodes always carry a sense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub surface: String,
    pub sense: Option<SynsetId>,
    pub origin: ConceptOrigin,
}

/// Match category: original keyword, keyword synonym or keyword hypernym.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchLabel {
    Original,
    Synonym,
    Hypernym,
}

impl MatchLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            MatchLabel::Original => "O",
            MatchLabel::Synonym => "S",
            MatchLabel::Hypernym => "H",
        }
    }
}

/// Per-label score weights. The defaults are O=1, S=0.50, H=0.25.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelWeights {
    pub original: f64,
    pub synonym: f64,
    pub hypernym: f64,
}

impl Default for LabelWeights {
    fn default() -> Self {
        LabelWeights {
            original: 1.0,
            synonym: 0.50,
            hypernym: 0.25,
        }
    }
}

impl LabelWeights {
    pub fn weight(&self, label: MatchLabel) -> f64 {
        match label {
            MatchLabel::Original => self.original,
            MatchLabel::Synonym => self.synonym,
            MatchLabel::Hypernym => self.hypernym,
        }
    }
}

/// One concept-to-spam-keyword hit. `score` always equals the weight of
/// `label` under the weights in force.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub concept: Concept,
    /// The spam-ontology keyword that produced the hit.
    pub matched_keyword: String,
    pub label: MatchLabel,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Spam,
    Legitimate,
}

/// Outcome of classifying one SMS. `collective_score` is the sum of match
/// scores (0 when prefiltered); `concepts` is the concept set the matches
/// were drawn from, kept so enhancement can extend the ontology later.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub classification: Classification,
    pub collective_score: f64,
    pub matches: Vec<MatchResult>,
    pub concepts: Vec<Concept>,
    pub prefiltered: bool,
}

impl Verdict {
    pub fn is_spam(&self) -> bool {
        self.classification == Classification::Spam
    }
}

/// Engine parameters: the LSO depth threshold `h`, the spam threshold
/// `theta` and the label weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Minimum depth an LSO node must have to enter the concept set.
    pub h: usize,
    /// A message is spam when its collective score reaches `theta`.
    pub theta: f64,
    pub weights: LabelWeights,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            h: 3,
            theta: 1.0,
            weights: LabelWeights::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.h < 1 {
            return Err(EngineError::BadConfig("h must be >= 1".to_string()));
        }
        if !(self.theta > 0.0) {
            return Err(EngineError::BadConfig("theta must be > 0".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    BadConfig(String),
    #[error("enhancement requires a non-prefiltered spam verdict")]
    NotEnhanceable,
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// Picks one sense per keyword: the candidate minimizing the summed shortest
/// path to the closest sense of every other keyword. Disconnected pairs cost
/// a fixed penalty of `graph node count + 1`; ties break on the smallest
/// synset id, which also covers single-keyword messages. Keywords without
/// any candidate sense come back unresolved.
pub fn disambiguate(keywords: &KeywordList, graph: &TaxonomyGraph) -> Vec<Concept> {
    let penalty = graph.len() + 1;
    let candidates: Vec<(String, Vec<SynsetId>)> = keywords
        .iter()
        .map(|w| (w.clone(), graph.synsets_of(w)))
        .collect();

    let mut out = Vec::with_capacity(candidates.len());
    for (i, (word, senses)) in candidates.iter().enumerate() {
        if senses.is_empty() {
            out.push(Concept {
                surface: word.clone(),
                sense: None,
                origin: ConceptOrigin::OriginalKeyword,
            });
            continue;
        }
        let mut best: Option<(usize, &SynsetId)> = None;
        for sense in senses {
            let mut total = 0usize;
            for (j, (_, other_senses)) in candidates.iter().enumerate() {
                if i == j || other_senses.is_empty() {
                    continue;
                }
                let closest = other_senses
                    .iter()
                    .map(|t| {
                        graph
                            .path_length(sense, t)
                            .expect("senses come from the graph")
                            .unwrap_or(penalty)
                    })
                    .min()
                    .expect("non-empty candidate list");
                total += closest;
            }
            best = match best {
                None => Some((total, sense)),
                // Candidates are visited in ascending id order, so strict
                // improvement keeps the smallest id on ties.
                Some((bt, bs)) => {
                    if total < bt {
                        Some((total, sense))
                    } else {
                        Some((bt, bs))
                    }
                }
            };
        }
        out.push(Concept {
            surface: word.clone(),
            sense: best.map(|(_, s)| s.clone()),
            origin: ConceptOrigin::OriginalKeyword,
        });
    }
    out
}

/// Builds the concept set: all original concepts survive, and for every
/// unordered pair of resolved concepts whose LSO exists at depth >= `h`
/// an LSO concept is added (surface = its smallest lemma). The result is
/// deduplicated by (surface, sense) preserving first-seen order.
pub fn build_concept_set(
    concepts: &[Concept],
    graph: &TaxonomyGraph,
    cfg: &EngineConfig,
) -> Result<Vec<Concept>, EngineError> {
    let mut emitted: Vec<Concept> = concepts.to_vec();
    for i in 0..concepts.len() {
        for j in (i + 1)..concepts.len() {
            let (Some(a), Some(b)) = (&concepts[i].sense, &concepts[j].sense) else {
                continue;
            };
            let Some(lso) = graph.lso(a, b)? else {
                continue;
            };
            if graph.depth(&lso)? < cfg.h {
                continue;
            }
            let surface = graph
                .synonyms(&lso)?
                .into_iter()
                .next()
                .expect("synsets have at least one lemma");
            emitted.push(Concept {
                surface,
                sense: Some(lso),
                origin: ConceptOrigin::LsoNode,
            });
        }
    }

    let mut seen: BTreeSet<(String, Option<SynsetId>)> = BTreeSet::new();
    Ok(emitted
        .into_iter()
        .filter(|c| seen.insert((c.surface.clone(), c.sense.clone())))
        .collect())
}

/// Matches each concept against the spam ontology. A concept yields at most
/// one result, with label precedence O > S > H: an original-keyword hit
/// anywhere in the store beats a synonym hit, which beats a hypernym hit.
/// Among spam concepts offering the same label the keyword-sorted first one
/// is reported.
pub fn match_concepts(
    cset: &[Concept],
    ontology: &SpamOntology,
    weights: &LabelWeights,
) -> Vec<MatchResult> {
    let mut results = Vec::new();
    for concept in cset {
        let mut best: Option<(MatchLabel, &SpamConcept)> = None;
        for spam in ontology.concepts() {
            let label = if concept.surface == spam.keyword {
                Some(MatchLabel::Original)
            } else if spam.synonyms.contains(&concept.surface) {
                Some(MatchLabel::Synonym)
            } else if spam.hypernyms.contains(&concept.surface) {
                Some(MatchLabel::Hypernym)
            } else {
                None
            };
            if let Some(label) = label {
                // MatchLabel orders O < S < H, so "smaller" is stronger;
                // the keyword scan is ascending, so the first holder of the
                // strongest label wins.
                if best.map_or(true, |(bl, _)| label < bl) {
                    best = Some((label, spam));
                }
                if label == MatchLabel::Original {
                    break;
                }
            }
        }
        if let Some((label, spam)) = best {
            results.push(MatchResult {
                concept: concept.clone(),
                matched_keyword: spam.keyword.clone(),
                label,
                score: weights.weight(label),
            });
        }
    }
    results
}

/// Sum of the individual match scores; zero for no matches.
pub fn collective_score(matches: &[MatchResult]) -> f64 {
    matches.iter().map(|m| m.score).sum()
}

/// Immutable bundle of everything classification needs besides the message
/// and the ontology snapshot.
#[derive(Debug, Clone, Copy)]
pub struct Classifier<'a> {
    pub graph: &'a TaxonomyGraph,
    pub stopwords: &'a BTreeSet<String>,
    pub homogeneous: &'a std::collections::BTreeMap<String, String>,
    pub prefilter: &'a SpamPrefilterConfig,
    pub config: &'a EngineConfig,
}

impl Classifier<'_> {
    /// Runs the content-analysis side only (no sender prefilter): keywords,
    /// disambiguation and concept-set generation.
    pub fn concept_set(&self, body: &str) -> Result<Vec<Concept>, EngineError> {
        let keywords = keywords_of(body, self.stopwords, self.homogeneous);
        let concepts = disambiguate(&keywords, self.graph);
        build_concept_set(&concepts, self.graph, self.config)
    }

    /// Full pipeline: prefilter, then content analysis, matching and the
    /// threshold decision. Never mutates the ontology.
    pub fn classify(&self, msg: &SmsMessage, ontology: &SpamOntology) -> Result<Verdict, EngineError> {
        if prefilter_sender(msg, self.prefilter) == PrefilterOutcome::SpamNoAnalysis {
            return Ok(Verdict {
                classification: Classification::Spam,
                collective_score: 0.0,
                matches: Vec::new(),
                concepts: Vec::new(),
                prefiltered: true,
            });
        }
        let cset = self.concept_set(&msg.body)?;
        let matches = match_concepts(&cset, ontology, &self.config.weights);
        let cs = collective_score(&matches);
        Ok(Verdict {
            classification: if cs >= self.config.theta {
                Classification::Spam
            } else {
                Classification::Legitimate
            },
            collective_score: cs,
            matches,
            concepts: cset,
            prefiltered: false,
        })
    }
}

/// Extends the ontology with every concept of a spam verdict that has no
/// entry yet. Resolved concepts bring the taxonomy's synonyms and hypernyms
/// for their sense; unresolved ones are added with empty sets. Existing
/// entries are never overwritten; the revision bumps at most once.
pub fn enhance_ontology(
    ontology: &mut SpamOntology,
    verdict: &Verdict,
    graph: &TaxonomyGraph,
    added_at: i64,
) -> Result<bool, EngineError> {
    if !verdict.is_spam() || verdict.prefiltered {
        return Err(EngineError::NotEnhanceable);
    }
    let mut batch = Vec::new();
    for concept in &verdict.concepts {
        if ontology.contains(&concept.surface) {
            continue;
        }
        let (synonyms, hypernyms) = match &concept.sense {
            Some(sense) => (graph.synonyms(sense)?, graph.hypernyms(sense)?),
            None => (BTreeSet::new(), BTreeSet::new()),
        };
        batch.push(SpamConcept::new(
            concept.surface.clone(),
            synonyms,
            hypernyms,
            added_at,
            ConceptSource::Enhancement,
        ));
    }
    Ok(ontology.add_new(batch))
}

/// User correction on a classified message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackKind {
    /// The message was wrongly spammed: drop the enhancement-sourced
    /// concepts it matched (seed concepts are retained).
    NotSpam,
    /// The message was wrongly passed: learn it as spam.
    IsSpam,
}

/// Applies user feedback to the ontology and reports whether it changed.
pub fn apply_feedback(
    ontology: &mut SpamOntology,
    msg: &SmsMessage,
    correction: FeedbackKind,
    classifier: &Classifier<'_>,
) -> Result<bool, EngineError> {
    match correction {
        FeedbackKind::NotSpam => {
            let verdict = classifier.classify(msg, ontology)?;
            let doomed: Vec<String> = verdict
                .matches
                .iter()
                .filter(|m| {
                    ontology
                        .get(&m.matched_keyword)
                        .map_or(false, |c| c.source == ConceptSource::Enhancement)
                })
                .map(|m| m.matched_keyword.clone())
                .collect();
            Ok(ontology.remove_all(doomed))
        }
        FeedbackKind::IsSpam => {
            // Content analysis regardless of sender prefiltering: the user
            // asserts this body is spam, so its concepts get learned.
            let cset = classifier.concept_set(&msg.body)?;
            let matches = match_concepts(&cset, ontology, &classifier.config.weights);
            let cs = collective_score(&matches);
            let forced = Verdict {
                classification: Classification::Spam,
                collective_score: cs,
                matches,
                concepts: cset,
                prefiltered: false,
            };
            enhance_ontology(ontology, &forced, classifier.graph, msg.timestamp)
        }
    }
}
