//! Sentence parsing into subject/predicate/object entity triplets.
//!
//! Two parsing routes produce the same [`ParsedSentence`] shape: a
//! self-contained rule-based extractor (stop-word removal followed by a
//! noun/verb/relation chunk scan), and an LLM route whose prompt and reply
//! handling live here while the HTTP client lives in the companion crate.
//! The LLM route always falls back to the rule-based one on failure.

pub mod words;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("sentence is empty")]
    EmptySentence,
    #[error("no subject-verb-object structure found")]
    NoTripleFound,
    #[error("entity word is empty after normalization")]
    EmptyEntityWord,
}

/// Grammatical slot an entity occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Subject,
    Predicate,
    Object,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Subject => "subject",
            Role::Predicate => "predicate",
            Role::Object => "object",
        }
    }
}

impl core::fmt::Display for Role {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (subject, predicate, object) extraction from a sentence.
///
/// Words are lowercase, whitespace-collapsed, with leading articles
/// stripped; all three fields are non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityTriple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl EntityTriple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Result<Self, ParseError> {
        let norm = |s: &str| -> Result<String, ParseError> {
            let w = text::strip_articles(&text::normalize_phrase(s));
            if w.is_empty() {
                Err(ParseError::EmptyEntityWord)
            } else {
                Ok(w)
            }
        };
        Ok(Self {
            subject: norm(subject)?,
            predicate: norm(predicate)?,
            object: norm(object)?,
        })
    }

    pub fn word(&self, role: Role) -> &str {
        match role {
            Role::Subject => &self.subject,
            Role::Predicate => &self.predicate,
            Role::Object => &self.object,
        }
    }
}

/// An entity word together with its role; the unit the grounder and the
/// composition stage work with.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub word: String,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseSource {
    RuleBased,
    Llm,
}

/// A sentence with its extracted triplets and the deduplicated entity list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedSentence {
    pub raw_text: String,
    pub triplets: Vec<EntityTriple>,
    /// Deduplicated (word, role) pairs, ordered by first occurrence in
    /// `raw_text` (then role, then word); invariant under triplet
    /// insertion order.
    pub entities: Vec<EntityRef>,
    pub source: ParseSource,
}

impl ParsedSentence {
    pub fn from_triplets(
        raw_text: &str,
        triplets: Vec<EntityTriple>,
        source: ParseSource,
    ) -> Self {
        let entities = compute_entities(raw_text, &triplets);
        Self {
            raw_text: raw_text.to_string(),
            triplets,
            entities,
            source,
        }
    }

    /// Triplets in which the given entity appears.
    pub fn triplets_with(&self, entity: &EntityRef) -> impl Iterator<Item = &EntityTriple> {
        let word = entity.word.clone();
        let role = entity.role;
        self.triplets.iter().filter(move |t| t.word(role) == word)
    }
}

/// Stable duplicate-free projection of the triplets onto (word, role) pairs.
pub fn entities_of(parsed: &ParsedSentence) -> &[EntityRef] {
    &parsed.entities
}

fn compute_entities(raw_text: &str, triplets: &[EntityTriple]) -> Vec<EntityRef> {
    let lower: String = raw_text
        .chars()
        .flat_map(|c| c.to_lowercase())
        .collect::<String>();
    let mut ents: Vec<EntityRef> = Vec::new();
    for t in triplets {
        for role in [Role::Subject, Role::Predicate, Role::Object] {
            let e = EntityRef {
                word: t.word(role).to_string(),
                role,
            };
            if !ents.contains(&e) {
                ents.push(e);
            }
        }
    }
    ents.sort_by(|a, b| {
        let pos = |e: &EntityRef| lower.find(e.word.as_str()).unwrap_or(usize::MAX);
        (pos(a), a.role, a.word.as_str()).cmp(&(pos(b), b.role, b.word.as_str()))
    });
    ents
}

fn in_list(list: &[&str], token: &str) -> bool {
    list.binary_search(&token).is_ok()
}

/// Whether a token reduces to a known verb stem (exact form, -s/-es/-ies,
/// -ed/-ied, or -ing with e-restoration and consonant un-doubling).
fn is_verb_token(token: &str) -> bool {
    if in_list(words::NOUN_EXCEPTIONS, token) {
        return false;
    }
    if in_list(words::VERB_STEMS, token) {
        return true;
    }
    if let Some(base) = token.strip_suffix("ing") {
        if base.len() >= 2 {
            if in_list(words::VERB_STEMS, base) {
                return true; // carry-ing
            }
            if in_list(words::VERB_STEMS, &format!("{base}e")) {
                return true; // carv-ing -> carve
            }
            let b = base.as_bytes();
            if base.len() >= 3
                && b[base.len() - 1] == b[base.len() - 2]
                && in_list(words::VERB_STEMS, &base[..base.len() - 1])
            {
                return true; // hitt-ing -> hit
            }
        }
    }
    if let Some(base) = token.strip_suffix("ied") {
        if base.len() >= 2 && in_list(words::VERB_STEMS, &format!("{base}y")) {
            return true; // carr-ied -> carry
        }
    }
    if let Some(base) = token.strip_suffix("ed") {
        if base.len() >= 2 {
            if in_list(words::VERB_STEMS, base) {
                return true; // jump-ed
            }
            if in_list(words::VERB_STEMS, &format!("{base}e")) {
                return true; // bak-ed -> bake
            }
            let b = base.as_bytes();
            if base.len() >= 3
                && b[base.len() - 1] == b[base.len() - 2]
                && in_list(words::VERB_STEMS, &base[..base.len() - 1])
            {
                return true; // stopp-ed -> stop
            }
        }
    }
    if let Some(base) = token.strip_suffix("ies") {
        if base.len() >= 2 && in_list(words::VERB_STEMS, &format!("{base}y")) {
            return true; // carr-ies -> carry
        }
    }
    if let Some(base) = token.strip_suffix("es") {
        if base.len() >= 2 && in_list(words::VERB_STEMS, base) {
            return true; // watch-es
        }
    }
    if let Some(base) = token.strip_suffix('s') {
        if base.len() >= 2 && in_list(words::VERB_STEMS, base) {
            return true; // sit-s
        }
    }
    false
}

#[derive(Debug, PartialEq)]
enum Segment {
    NounPhrase(Vec<String>),
    Verb(String),
    Relation(String),
}

/// Chunk stop-word-free tokens into noun phrases, verbs, and relation words.
///
/// A verb candidate counts as a verb only when a noun phrase precedes it
/// and the previous segment is not already verbal; gerunds used as nouns
/// ("a man wearing a watch") fall back to the noun phrase.
fn segment(tokens: &[String]) -> Vec<Segment> {
    let mut segs: Vec<Segment> = Vec::new();
    let mut seen_noun = false;
    for tok in tokens {
        if in_list(words::REL_WORDS, tok) {
            segs.push(Segment::Relation(tok.clone()));
            continue;
        }
        let prev_verbal = matches!(
            segs.last(),
            Some(Segment::Verb(_)) | Some(Segment::Relation(_))
        );
        if seen_noun && !prev_verbal && is_verb_token(tok) {
            segs.push(Segment::Verb(tok.clone()));
        } else {
            if let Some(Segment::NounPhrase(phrase)) = segs.last_mut() {
                phrase.push(tok.clone());
            } else {
                segs.push(Segment::NounPhrase(alloc::vec![tok.clone()]));
            }
            seen_noun = true;
        }
    }
    segs
}

/// Extract one triplet per predicate head. A verb directly followed by a
/// relation word forms a compound predicate ("stand near"); a relation
/// word between two noun phrases heads its own triplet.
fn extract_triplets(segs: &[Segment]) -> Vec<EntityTriple> {
    let phrase_at = |i: usize| -> Option<String> {
        if let Segment::NounPhrase(words) = &segs[i] {
            Some(words.join(" "))
        } else {
            None
        }
    };
    let nearest_np_before = |i: usize| (0..i).rev().find_map(phrase_at);
    // First noun phrase at or after `from`, unless a verb intervenes.
    let next_np = |from: usize| -> Option<String> {
        for (j, seg) in segs.iter().enumerate().skip(from) {
            match seg {
                Segment::NounPhrase(_) => return phrase_at(j),
                Segment::Verb(_) => return None,
                Segment::Relation(_) => {}
            }
        }
        None
    };

    let mut triplets = Vec::new();
    let mut consumed_rel = alloc::collections::BTreeSet::new();
    for (i, seg) in segs.iter().enumerate() {
        let (predicate, obj_from) = match seg {
            Segment::Verb(v) => {
                if let Some(Segment::Relation(r)) = segs.get(i + 1) {
                    consumed_rel.insert(i + 1);
                    (format!("{v} {r}"), i + 2)
                } else {
                    (v.clone(), i + 1)
                }
            }
            Segment::Relation(r) if !consumed_rel.contains(&i) => (r.clone(), i + 1),
            _ => continue,
        };
        let (Some(subject), Some(object)) = (nearest_np_before(i), next_np(obj_from)) else {
            continue;
        };
        if let Ok(t) = EntityTriple::new(&subject, &predicate, &object) {
            triplets.push(t);
        }
    }
    triplets
}

/// Rule-based SVO extraction: tokenize, drop stop words, chunk, and emit
/// one triplet per predicate head. Deterministic for a fixed input.
pub fn parse_svo_rule_based(sentence: &str) -> Result<ParsedSentence, ParseError> {
    if sentence.trim().is_empty() {
        return Err(ParseError::EmptySentence);
    }
    let tokens: Vec<String> = text::tokenize(sentence)
        .into_iter()
        .filter(|t| !in_list(words::STOP_WORDS, t))
        .collect();
    let triplets = extract_triplets(&segment(&tokens));
    if triplets.is_empty() {
        return Err(ParseError::NoTripleFound);
    }
    Ok(ParsedSentence::from_triplets(
        sentence,
        triplets,
        ParseSource::RuleBased,
    ))
}

/// The entity-analysis prompt sent to the language model.
pub const PARSE_PROMPT: &str = "Analyze the objects in this sentence, the attributes of the objects and how each object is connected.";

/// Machine-readable output instruction appended to [`PARSE_PROMPT`].
pub const PARSE_FORMAT_INSTRUCTION: &str =
    r#"Return JSON: {"triplets":[{"subject":...,"predicate":...,"object":...}]}"#;

/// Full prompt for LLM-based parsing of one sentence.
pub fn parse_prompt(sentence: &str) -> String {
    format!("{PARSE_PROMPT}\nSentence: {sentence}\n{PARSE_FORMAT_INSTRUCTION}")
}

/// Byte range of the first balanced JSON object in a reply, respecting
/// string literals and escapes.
fn first_json_object(reply: &str) -> Option<&str> {
    let bytes = reply.as_bytes();
    let start = reply.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&reply[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

#[derive(Deserialize)]
struct LlmTripletReply {
    triplets: Vec<LlmTriplet>,
}

#[derive(Deserialize)]
struct LlmTriplet {
    subject: String,
    predicate: String,
    object: String,
}

/// Pull triplets out of an LLM reply: first JSON object, `triplets` array,
/// normalized words. `None` when nothing usable is found, which callers
/// treat as a signal to fall back to the rule-based parser.
pub fn extract_llm_triplets(reply: &str) -> Option<Vec<EntityTriple>> {
    let json = first_json_object(reply)?;
    let parsed: LlmTripletReply = serde_json::from_str(json).ok()?;
    let triplets: Vec<EntityTriple> = parsed
        .triplets
        .iter()
        .filter_map(|t| EntityTriple::new(&t.subject, &t.predicate, &t.object).ok())
        .collect();
    if triplets.is_empty() {
        None
    } else {
        Some(triplets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn triple(s: &str, p: &str, o: &str) -> EntityTriple {
        EntityTriple::new(s, p, o).unwrap()
    }

    #[test]
    fn parses_man_hitting_baseball() {
        let p = parse_svo_rule_based("A man is hitting a baseball").unwrap();
        assert_eq!(p.triplets, vec![triple("man", "hitting", "baseball")]);
        assert_eq!(p.source, ParseSource::RuleBased);
    }

    #[test]
    fn parses_cat_sits_table() {
        let p = parse_svo_rule_based("A cat sits on a table").unwrap();
        assert_eq!(p.triplets, vec![triple("cat", "sits", "table")]);
    }

    #[test]
    fn parses_woman_carrying_skateboard() {
        let p = parse_svo_rule_based("A woman carrying a skateboard").unwrap();
        assert_eq!(p.triplets, vec![triple("woman", "carrying", "skateboard")]);
    }

    #[test]
    fn empty_sentence_errors() {
        assert_eq!(
            parse_svo_rule_based("   ").unwrap_err(),
            ParseError::EmptySentence
        );
        assert_eq!(
            parse_svo_rule_based("").unwrap_err(),
            ParseError::EmptySentence
        );
    }

    #[test]
    fn no_triple_found_without_verb() {
        assert_eq!(
            parse_svo_rule_based("a red apple").unwrap_err(),
            ParseError::NoTripleFound
        );
    }

    #[test]
    fn compound_predicate_kept_whole() {
        let p = parse_svo_rule_based("Several people stand near a food cart").unwrap();
        assert_eq!(p.triplets, vec![triple("people", "stand near", "food cart")]);
    }

    #[test]
    fn relation_head_makes_second_triplet() {
        let p = parse_svo_rule_based("A man rides a horse near a fence").unwrap();
        assert_eq!(
            p.triplets,
            vec![
                triple("man", "rides", "horse"),
                triple("horse", "near", "fence"),
            ]
        );
    }

    #[test]
    fn adjectives_attach_to_noun() {
        let p = parse_svo_rule_based("A man is hitting an orange road sign").unwrap();
        assert_eq!(p.triplets, vec![triple("man", "hitting", "orange road sign")]);
    }

    #[test]
    fn gerund_after_verb_is_object() {
        let p = parse_svo_rule_based("A man wearing a watch").unwrap();
        assert_eq!(p.triplets, vec![triple("man", "wearing", "watch")]);
    }

    #[test]
    fn noun_exception_not_a_verb() {
        let p = parse_svo_rule_based("A man painting a building").unwrap();
        assert_eq!(p.triplets, vec![triple("man", "painting", "building")]);
    }

    #[test]
    fn determinism() {
        let a = parse_svo_rule_based("A cat sits on a table").unwrap();
        let b = parse_svo_rule_based("A cat sits on a table").unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn entities_ordered_by_first_occurrence() {
        let p = parse_svo_rule_based("A man is hitting a sign").unwrap();
        let expect = vec![
            EntityRef {
                word: "man".into(),
                role: Role::Subject,
            },
            EntityRef {
                word: "hitting".into(),
                role: Role::Predicate,
            },
            EntityRef {
                word: "sign".into(),
                role: Role::Object,
            },
        ];
        assert_eq!(p.entities, expect);
    }

    #[test]
    fn entities_dedup_and_permutation_invariant() {
        let t1 = triple("man", "holding", "cup");
        let t2 = triple("man", "wearing", "hat");
        let raw = "a man holding a cup and wearing a hat";
        let a = ParsedSentence::from_triplets(raw, vec![t1.clone(), t2.clone()], ParseSource::Llm);
        let b = ParsedSentence::from_triplets(raw, vec![t2, t1], ParseSource::Llm);
        assert_eq!(a.entities, b.entities);
        let men = a
            .entities
            .iter()
            .filter(|e| e.word == "man" && e.role == Role::Subject)
            .count();
        assert_eq!(men, 1);
    }

    #[test]
    fn empty_triplets_give_empty_entities() {
        let p = ParsedSentence::from_triplets("anything", vec![], ParseSource::RuleBased);
        assert!(p.entities.is_empty());
        assert!(entities_of(&p).is_empty());
    }

    #[test]
    fn llm_reply_extraction() {
        let reply = r#"Sure! Here is the analysis you asked for.
{"triplets": [{"subject": "A woman", "predicate": "carrying", "object": "the skateboard"}]}
Anything else?"#;
        let got = extract_llm_triplets(reply).unwrap();
        assert_eq!(got, vec![triple("woman", "carrying", "skateboard")]);
    }

    #[test]
    fn llm_reply_with_braces_in_strings() {
        let reply = r#"{"triplets": [{"subject": "man {sic}", "predicate": "holding", "object": "cup"}]}"#;
        let got = extract_llm_triplets(reply).unwrap();
        assert_eq!(got[0].subject, "man {sic}");
    }

    #[test]
    fn llm_reply_garbage_is_none() {
        assert_eq!(extract_llm_triplets("no json here"), None);
        assert_eq!(extract_llm_triplets(r#"{"foo": 1}"#), None);
        assert_eq!(extract_llm_triplets(r#"{"triplets": []}"#), None);
        assert_eq!(
            extract_llm_triplets(r#"{"triplets": [{"subject":"a","predicate":"","object":"b"}]}"#),
            None
        );
    }

    #[test]
    fn triple_normalization() {
        let t = triple("  The  Red  CAR ", "Drives", "A road");
        assert_eq!(t.subject, "red car");
        assert_eq!(t.predicate, "drives");
        assert_eq!(t.object, "road");
    }
}
