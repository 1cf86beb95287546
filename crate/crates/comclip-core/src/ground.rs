//! Mapping parsed entities to image regions via dense captions.
//!
//! Subject and object entities are matched against caption texts either
//! lexically (token containment with singular/plural variants) or by an
//! LLM aligner whose prompt/reply handling lives here. Predicate entities
//! are never grounded directly: their regions are the union of their
//! triplet's subject and object regions, assembled at subimage build time.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::image::BoxRegion;
use crate::parse::{EntityRef, Role};
use crate::text;

/// A region-level caption emitted by a dense captioner (or supplied as
/// ground truth by a dataset adapter).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseCaption {
    pub text: String,
    #[serde(rename = "box")]
    pub region: BoxRegion,
}

/// Grounded regions per entity, plus the entities nothing matched.
///
/// Only subject and object entities appear here (in either list);
/// predicates are resolved from their triplet at subimage build time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundingMap {
    pub entries: Vec<GroundedEntity>,
    pub unmatched: Vec<EntityRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedEntity {
    pub entity: EntityRef,
    pub boxes: Vec<BoxRegion>,
    /// Indices into the caption list this entity matched.
    pub caption_indices: Vec<usize>,
}

impl GroundingMap {
    pub fn boxes_for(&self, word: &str, role: Role) -> &[BoxRegion] {
        self.entries
            .iter()
            .find(|g| g.entity.word == word && g.entity.role == role)
            .map(|g| g.boxes.as_slice())
            .unwrap_or(&[])
    }

    pub fn is_unmatched(&self, word: &str, role: Role) -> bool {
        self.unmatched
            .iter()
            .any(|e| e.word == word && e.role == role)
    }
}

/// Does the phrase occur as consecutive tokens of the caption, allowing
/// singular/plural variants of the head (last) token?
fn phrase_matches(phrase_tokens: &[String], caption_tokens: &[String]) -> bool {
    if phrase_tokens.is_empty() || caption_tokens.len() < phrase_tokens.len() {
        return false;
    }
    let head = phrase_tokens.last().unwrap();
    let head_variants = text::number_variants(head);
    'windows: for win in caption_tokens.windows(phrase_tokens.len()) {
        for (i, tok) in phrase_tokens.iter().enumerate() {
            let ok = if i == phrase_tokens.len() - 1 {
                head_variants.iter().any(|v| v == &win[i])
            } else {
                &win[i] == tok
            };
            if !ok {
                continue 'windows;
            }
        }
        return true;
    }
    false
}

fn indices_over_tokenized(word: &str, tokenized: &[Vec<String>]) -> Vec<usize> {
    let phrase = text::tokenize(word);
    let hits: Vec<usize> = tokenized
        .iter()
        .enumerate()
        .filter(|(_, toks)| phrase_matches(&phrase, toks))
        .map(|(i, _)| i)
        .collect();
    if !hits.is_empty() || phrase.len() <= 1 {
        return hits;
    }
    // Multi-word phrase matched nothing: retry with the head noun alone.
    let head = phrase[phrase.len() - 1..].to_vec();
    tokenized
        .iter()
        .enumerate()
        .filter(|(_, toks)| phrase_matches(&head, toks))
        .map(|(i, _)| i)
        .collect()
}

/// Caption indices the lexical rule matches for one entity word: token
/// containment of the phrase (with number variants of the head token),
/// falling back to the head noun alone for multi-word phrases.
pub fn lexical_caption_indices(word: &str, captions: &[DenseCaption]) -> Vec<usize> {
    let tokenized: Vec<Vec<String>> = captions.iter().map(|c| text::tokenize(&c.text)).collect();
    indices_over_tokenized(word, &tokenized)
}

/// Offline lexical aligner: an entity is grounded to every caption whose
/// text contains it as a token sequence. Predicates are skipped.
pub fn lexical_ground(entities: &[EntityRef], captions: &[DenseCaption]) -> GroundingMap {
    let tokenized: Vec<Vec<String>> = captions.iter().map(|c| text::tokenize(&c.text)).collect();
    let mut map = GroundingMap::default();
    for entity in entities {
        if entity.role == Role::Predicate {
            continue;
        }
        let indices = indices_over_tokenized(&entity.word, &tokenized);
        if indices.is_empty() {
            map.unmatched.push(entity.clone());
        } else {
            map.entries.push(GroundedEntity {
                entity: entity.clone(),
                boxes: indices.iter().map(|&i| captions[i].region).collect(),
                caption_indices: indices,
            });
        }
    }
    map
}

/// The caption-to-entity matching prompt sent to the language model.
pub const ALIGN_PROMPT: &str =
    "Find labels of the image that refer to this object from the sentence.";

/// Machine-readable output instruction appended to [`ALIGN_PROMPT`].
pub const ALIGN_FORMAT_INSTRUCTION: &str = r#"Return JSON: {"matches":[label_index,...]}"#;

/// Full aligner prompt for one entity against a numbered caption list.
pub fn align_prompt(entity_word: &str, captions: &[DenseCaption]) -> String {
    let mut out = format!("{ALIGN_PROMPT}\nObject: {entity_word}\nLabels:\n");
    for (i, c) in captions.iter().enumerate() {
        out.push_str(&format!("{i}: {}\n", c.text));
    }
    out.push_str(ALIGN_FORMAT_INSTRUCTION);
    out
}

#[derive(Deserialize)]
struct AlignReply {
    matches: Vec<i64>,
}

/// Caption indices from an aligner reply; out-of-range indices are dropped
/// and duplicates removed. `None` when the reply has no usable JSON,
/// which callers treat as a signal to fall back to the lexical aligner.
pub fn parse_align_reply(reply: &str, n_captions: usize) -> Option<Vec<usize>> {
    let start = reply.find('{')?;
    let json = first_balanced(&reply[start..])?;
    let parsed: AlignReply = serde_json::from_str(json).ok()?;
    let mut out: Vec<usize> = parsed
        .matches
        .into_iter()
        .filter(|&i| i >= 0 && (i as usize) < n_captions)
        .map(|i| i as usize)
        .collect();
    out.sort_unstable();
    out.dedup();
    Some(out)
}

fn first_balanced(s: &str) -> Option<&str> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, b) in s.bytes().enumerate() {
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
                    return Some(&s[..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn entity(word: &str, role: Role) -> EntityRef {
        EntityRef {
            word: word.to_string(),
            role,
        }
    }

    fn caption(text: &str, x1: u32, y1: u32, x2: u32, y2: u32) -> DenseCaption {
        DenseCaption {
            text: text.to_string(),
            region: BoxRegion::new(x1, y1, x2, y2).unwrap(),
        }
    }

    #[test]
    fn grounds_pizza_to_its_caption() {
        let caps = vec![caption("a pizza on a table", 10, 10, 50, 50)];
        let map = lexical_ground(&[entity("pizza", Role::Object)], &caps);
        assert_eq!(map.boxes_for("pizza", Role::Object), &[caps[0].region]);
        assert!(map.unmatched.is_empty());
    }

    #[test]
    fn unmatched_entity_reported() {
        let caps = vec![caption("a dog in the grass", 0, 0, 8, 8)];
        let map = lexical_ground(&[entity("frisbee", Role::Object)], &caps);
        assert!(map.boxes_for("frisbee", Role::Object).is_empty());
        assert_eq!(map.unmatched, vec![entity("frisbee", Role::Object)]);
    }

    #[test]
    fn all_matching_captions_collected() {
        let caps = vec![
            caption("a person in a hat", 0, 0, 4, 4),
            caption("a person sitting", 4, 4, 8, 8),
            caption("a blue car", 8, 8, 12, 12),
        ];
        let map = lexical_ground(&[entity("person", Role::Subject)], &caps);
        assert_eq!(
            map.boxes_for("person", Role::Subject),
            &[caps[0].region, caps[1].region]
        );
    }

    #[test]
    fn plural_variants_match() {
        let caps = vec![caption("two dogs playing", 0, 0, 4, 4)];
        let map = lexical_ground(&[entity("dog", Role::Subject)], &caps);
        assert_eq!(map.entries.len(), 1);

        let caps = vec![caption("a dog playing", 0, 0, 4, 4)];
        let map = lexical_ground(&[entity("dogs", Role::Subject)], &caps);
        assert_eq!(map.entries.len(), 1);
    }

    #[test]
    fn phrase_matches_consecutively() {
        let caps = vec![
            caption("a food cart on the street", 0, 0, 4, 4),
            caption("a cart full of food", 4, 0, 8, 4),
        ];
        let map = lexical_ground(&[entity("food cart", Role::Object)], &caps);
        assert_eq!(map.entries[0].caption_indices, vec![0]);
    }

    #[test]
    fn phrase_falls_back_to_head_noun() {
        let caps = vec![caption("an old wooden cart", 0, 0, 4, 4)];
        let map = lexical_ground(&[entity("food cart", Role::Object)], &caps);
        assert_eq!(map.entries[0].caption_indices, vec![0]);
    }

    #[test]
    fn predicates_never_grounded() {
        let caps = vec![caption("a man hitting something", 0, 0, 4, 4)];
        let map = lexical_ground(&[entity("hitting", Role::Predicate)], &caps);
        assert!(map.entries.is_empty());
        assert!(map.unmatched.is_empty());
    }

    #[test]
    fn empty_captions_leave_all_unmatched() {
        let map = lexical_ground(
            &[entity("man", Role::Subject), entity("sign", Role::Object)],
            &[],
        );
        assert_eq!(map.unmatched.len(), 2);
    }

    #[test]
    fn align_prompt_lists_captions() {
        let caps = vec![
            caption("a pizza on a table", 0, 0, 4, 4),
            caption("a fork", 4, 0, 8, 4),
        ];
        let p = align_prompt("pizza", &caps);
        assert!(p.starts_with(ALIGN_PROMPT));
        assert!(p.contains("0: a pizza on a table"));
        assert!(p.contains("1: a fork"));
        assert!(p.ends_with(ALIGN_FORMAT_INSTRUCTION));
    }

    #[test]
    fn align_reply_parsing() {
        assert_eq!(
            parse_align_reply(r#"the answer: {"matches":[1,0,1,7,-2]}"#, 3),
            Some(vec![0, 1])
        );
        assert_eq!(parse_align_reply("no json", 3), None);
        assert_eq!(parse_align_reply(r#"{"matches":[]}"#, 3), Some(vec![]));
    }
}
