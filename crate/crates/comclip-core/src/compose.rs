//! Weighted composition of entity subimage embeddings into the final
//! image-text matching score.
//!
//! Given the global image embedding, the global text embedding, and one
//! (word embedding, subimage embedding) pair per entity, the score is:
//! per-entity cosine similarity, softmax over all entities, weighted sum
//! of subimage embeddings added onto the global image embedding, and a
//! final cosine against the global text embedding. All similarity math
//! runs in f64; the composed vector is never renormalized (the final
//! cosine absorbs scale).

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine_f64, DimensionMismatch, EmbeddingVector};
use crate::image::{FillPolicy, FillStyle, SubimageKind};
use crate::parse::Role;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ComposeError {
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("entity '{word}' has no subimage embedding")]
    MissingSubEmbedding { word: String },
}

/// How per-entity similarities become composition weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightingMode {
    /// Softmax over `logit_scale * similarity`, the default.
    #[default]
    Softmax,
    /// Use the raw similarities as weights.
    RawSimilarity,
}

/// Which subimages feed the composition; `Full` is the real pipeline and
/// the rest are ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubimageConfig {
    #[default]
    Full,
    /// Every subimage replaced by an all-zero-pixel image.
    AllBlack,
    /// Every subimage replaced by the source image.
    AllOriginal,
    /// Keep subject subimages; others use the source image.
    SubjectOnly,
    ObjectOnly,
    PredicateOnly,
    /// Drop one entity kind from the composition entirely.
    OmitSubject,
    OmitObject,
    OmitPredicate,
    /// Bypass composition: score a single entity's word embedding against
    /// the global image embedding.
    EntityOnlySubject,
    EntityOnlyObject,
    EntityOnlyPredicate,
    /// Average of the per-entity word-vs-image scores.
    EntityOnlyAll,
}

impl SubimageConfig {
    pub const ALL: [SubimageConfig; 13] = [
        SubimageConfig::Full,
        SubimageConfig::AllBlack,
        SubimageConfig::AllOriginal,
        SubimageConfig::SubjectOnly,
        SubimageConfig::ObjectOnly,
        SubimageConfig::PredicateOnly,
        SubimageConfig::OmitSubject,
        SubimageConfig::OmitObject,
        SubimageConfig::OmitPredicate,
        SubimageConfig::EntityOnlySubject,
        SubimageConfig::EntityOnlyObject,
        SubimageConfig::EntityOnlyPredicate,
        SubimageConfig::EntityOnlyAll,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SubimageConfig::Full => "full",
            SubimageConfig::AllBlack => "all_black",
            SubimageConfig::AllOriginal => "all_original",
            SubimageConfig::SubjectOnly => "subject_only",
            SubimageConfig::ObjectOnly => "object_only",
            SubimageConfig::PredicateOnly => "predicate_only",
            SubimageConfig::OmitSubject => "omit_subject",
            SubimageConfig::OmitObject => "omit_object",
            SubimageConfig::OmitPredicate => "omit_predicate",
            SubimageConfig::EntityOnlySubject => "entity_only_subject",
            SubimageConfig::EntityOnlyObject => "entity_only_object",
            SubimageConfig::EntityOnlyPredicate => "entity_only_predicate",
            SubimageConfig::EntityOnlyAll => "entity_only_all",
        }
    }

    /// Role whose entities are dropped, for the omit_* variants.
    pub fn omitted_role(self) -> Option<Role> {
        match self {
            SubimageConfig::OmitSubject => Some(Role::Subject),
            SubimageConfig::OmitObject => Some(Role::Object),
            SubimageConfig::OmitPredicate => Some(Role::Predicate),
            _ => None,
        }
    }

    /// Role kept in the *_only variants; the rest fall back to the source
    /// image.
    pub fn kept_role(self) -> Option<Role> {
        match self {
            SubimageConfig::SubjectOnly => Some(Role::Subject),
            SubimageConfig::ObjectOnly => Some(Role::Object),
            SubimageConfig::PredicateOnly => Some(Role::Predicate),
            _ => None,
        }
    }

    /// For entity_only_* variants: `Some(None)` means all roles
    /// participate in the average, `Some(Some(role))` a single role.
    pub fn entity_only_selector(self) -> Option<Option<Role>> {
        match self {
            SubimageConfig::EntityOnlySubject => Some(Some(Role::Subject)),
            SubimageConfig::EntityOnlyObject => Some(Some(Role::Object)),
            SubimageConfig::EntityOnlyPredicate => Some(Some(Role::Predicate)),
            SubimageConfig::EntityOnlyAll => Some(None),
            _ => None,
        }
    }
}

impl core::str::FromStr for SubimageConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| alloc::format!("unknown subimage config '{s}'"))
    }
}

impl core::fmt::Display for SubimageConfig {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knobs of the composition stage and the subimage construction it drives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionConfig {
    #[serde(default)]
    pub weighting_mode: WeightingMode,
    #[serde(default = "default_logit_scale")]
    pub logit_scale: f64,
    #[serde(default)]
    pub subimage_config: SubimageConfig,
    #[serde(default = "default_fill")]
    pub fill: FillPolicy,
    #[serde(default = "default_blur_frac")]
    pub blur_radius_frac: f64,
    /// Encode a tight crop of the grounded regions instead of a
    /// full-canvas mask.
    #[serde(default)]
    pub crop_tight: bool,
}

fn default_logit_scale() -> f64 {
    100.0
}

fn default_fill() -> FillPolicy {
    FillPolicy::Black
}

fn default_blur_frac() -> f64 {
    0.05
}

impl Default for CompositionConfig {
    fn default() -> Self {
        Self {
            weighting_mode: WeightingMode::Softmax,
            logit_scale: default_logit_scale(),
            subimage_config: SubimageConfig::Full,
            fill: default_fill(),
            blur_radius_frac: default_blur_frac(),
            crop_tight: false,
        }
    }
}

impl CompositionConfig {
    pub fn fill_style(&self) -> FillStyle {
        FillStyle {
            policy: self.fill,
            blur_radius_frac: self.blur_radius_frac,
        }
    }
}

/// Similarities -> weights. Softmax uses max-subtraction for stability;
/// raw mode returns the similarities unchanged.
pub fn entity_weights(similarities: &[f64], mode: WeightingMode, logit_scale: f64) -> Vec<f64> {
    match mode {
        WeightingMode::RawSimilarity => similarities.to_vec(),
        WeightingMode::Softmax => {
            if similarities.is_empty() {
                return Vec::new();
            }
            let max = similarities
                .iter()
                .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let exps: Vec<f64> = similarities
                .iter()
                .map(|&s| libm::exp(logit_scale * s - logit_scale * max))
                .collect();
            let sum: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / sum).collect()
        }
    }
}

/// `V = global + sum_k weights[k] * subs[k]`, accumulated in f64 and not
/// renormalized.
pub fn compose_visual(
    global: &[f64],
    subs: &[Vec<f64>],
    weights: &[f64],
) -> Result<Vec<f64>, ComposeError> {
    let mut composed = global.to_vec();
    for (sub, &w) in subs.iter().zip(weights.iter()) {
        if sub.len() != global.len() {
            return Err(DimensionMismatch {
                left: global.len(),
                right: sub.len(),
            }
            .into());
        }
        for (v, &s) in composed.iter_mut().zip(sub.iter()) {
            *v += w * s;
        }
    }
    Ok(composed)
}

/// Per-entity inputs to the composition: the entity word's text embedding
/// and its subimage embedding (absent for the entity_only_* configs,
/// which never encode subimages).
#[derive(Debug, Clone, PartialEq)]
pub struct EntityVectors {
    pub word: String,
    pub role: Role,
    pub kind: SubimageKind,
    pub word_emb: Vec<f64>,
    pub sub_emb: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntity {
    pub word: String,
    pub role: Role,
    pub kind: SubimageKind,
    pub similarity: f64,
    pub weight: f64,
}

/// Numeric outcome of one composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredComposition {
    /// Baseline cosine between the global text and image embeddings.
    pub global_score: f64,
    pub entities: Vec<ScoredEntity>,
    pub composed: Vec<f64>,
    pub final_score: f64,
}

/// Score one (image, sentence) instance from already-encoded vectors.
///
/// Applies the entity-level parts of the subimage configuration: omit_*
/// drops a role before weighting (the softmax runs over what remains) and
/// entity_only_* bypasses composition entirely. Pixel-level variants
/// (all_black, all_original, *_only) are applied upstream where subimages
/// are built. With no entities the result degrades to the baseline score.
pub fn score_vectors(
    global_image: &[f64],
    global_text: &[f64],
    entities: &[EntityVectors],
    config: &CompositionConfig,
) -> Result<ScoredComposition, ComposeError> {
    let global_score = cosine_f64(global_text, global_image)?;

    if let Some(selector) = config.subimage_config.entity_only_selector() {
        let mut scored = Vec::with_capacity(entities.len());
        let selected: Vec<bool> = entities
            .iter()
            .map(|e| selector.is_none_or(|r| e.role == r))
            .collect();
        let n_selected = selected.iter().filter(|&&s| s).count();
        let mut total = 0.0;
        for (e, &sel) in entities.iter().zip(&selected) {
            let similarity = cosine_f64(&e.word_emb, global_image)?;
            let weight = if sel { 1.0 / n_selected as f64 } else { 0.0 };
            if sel {
                total += similarity;
            }
            scored.push(ScoredEntity {
                word: e.word.clone(),
                role: e.role,
                kind: e.kind,
                similarity,
                weight,
            });
        }
        let final_score = if n_selected == 0 {
            global_score
        } else {
            total / n_selected as f64
        };
        return Ok(ScoredComposition {
            global_score,
            entities: scored,
            composed: global_image.to_vec(),
            final_score,
        });
    }

    let omitted = config.subimage_config.omitted_role();
    let kept: Vec<&EntityVectors> = entities
        .iter()
        .filter(|e| omitted != Some(e.role))
        .collect();

    if kept.is_empty() {
        return Ok(ScoredComposition {
            global_score,
            entities: Vec::new(),
            composed: global_image.to_vec(),
            final_score: global_score,
        });
    }

    let mut subs = Vec::with_capacity(kept.len());
    let mut sims = Vec::with_capacity(kept.len());
    for e in &kept {
        let sub = e
            .sub_emb
            .as_ref()
            .ok_or_else(|| ComposeError::MissingSubEmbedding {
                word: e.word.clone(),
            })?;
        sims.push(cosine_f64(&e.word_emb, sub)?);
        subs.push(sub.clone());
    }
    let weights = entity_weights(&sims, config.weighting_mode, config.logit_scale);
    let composed = compose_visual(global_image, &subs, &weights)?;
    let final_score = cosine_f64(global_text, &composed)?;

    let scored = kept
        .iter()
        .zip(sims.iter().zip(weights.iter()))
        .map(|(e, (&similarity, &weight))| ScoredEntity {
            word: e.word.clone(),
            role: e.role,
            kind: e.kind,
            similarity,
            weight,
        })
        .collect();

    Ok(ScoredComposition {
        global_score,
        entities: scored,
        composed,
        final_score,
    })
}

/// One entity's contribution, with the embedding that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub word: String,
    pub role: Role,
    pub kind: SubimageKind,
    pub similarity: f64,
    pub weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subimage_emb: Option<EmbeddingVector>,
}

/// Full outcome of scoring one (image, sentence) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionResult {
    pub global_image_emb: EmbeddingVector,
    pub global_score: f64,
    pub entity_records: Vec<EntityRecord>,
    pub composed: Vec<f64>,
    pub final_score: f64,
}

impl CompositionResult {
    /// The `--explain` JSON shape: fixed keys global_score, entities[],
    /// weights[], final_score.
    pub fn explain_json(&self) -> serde_json::Value {
        let entities: Vec<serde_json::Value> = self
            .entity_records
            .iter()
            .map(|r| {
                serde_json::json!({
                    "word": r.word,
                    "role": r.role.as_str(),
                    "kind": r.kind,
                    "similarity": r.similarity,
                    "weight": r.weight,
                })
            })
            .collect();
        let weights: Vec<f64> = self.entity_records.iter().map(|r| r.weight).collect();
        serde_json::json!({
            "global_score": self.global_score,
            "entities": entities,
            "weights": weights,
            "final_score": self.final_score,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::{vec, vec::Vec};

    fn entity(word: &str, role: Role, word_emb: Vec<f64>, sub_emb: Vec<f64>) -> EntityVectors {
        let kind = match role {
            Role::Subject => SubimageKind::Subject,
            Role::Object => SubimageKind::Object,
            Role::Predicate => SubimageKind::Predicate,
        };
        EntityVectors {
            word: word.to_string(),
            role,
            kind,
            word_emb,
            sub_emb: Some(sub_emb),
        }
    }

    #[test]
    fn uniform_weights_for_equal_similarities() {
        for scale in [1.0, 100.0, 12345.0] {
            let w = entity_weights(&[0.0, 0.0, 0.0], WeightingMode::Softmax, scale);
            assert_eq!(w, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        }
    }

    #[test]
    fn softmax_reference_case() {
        // Straight-line reference for (0.30, 0.25, 0.20) at scale 100.
        let sims = [0.30f64, 0.25, 0.20];
        let exps: Vec<f64> = sims.iter().map(|s| (100.0 * (s - 0.30)).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let reference: Vec<f64> = exps.iter().map(|e| e / sum).collect();

        let got = entity_weights(&sims, WeightingMode::Softmax, 100.0);
        for (g, r) in got.iter().zip(reference.iter()) {
            assert!((g - r).abs() < 1e-9, "{g} vs {r}");
        }
        assert!((got[0] - 0.993262).abs() < 5e-7);
        assert!((got[1] - 0.006693).abs() < 5e-7);
        assert!((got[2] - 0.000045).abs() < 5e-7);
    }

    #[test]
    fn raw_mode_is_identity() {
        let sims = [0.30, 0.25, -0.20];
        assert_eq!(
            entity_weights(&sims, WeightingMode::RawSimilarity, 100.0),
            sims.to_vec()
        );
    }

    #[test]
    fn softmax_simplex_and_positivity() {
        let sims = [0.9, -0.7, 0.2, 0.0];
        let w = entity_weights(&sims, WeightingMode::Softmax, 100.0);
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn temperature_limit_uniform() {
        let w = entity_weights(&[0.9, -0.9, 0.1], WeightingMode::Softmax, 1e-6);
        for x in &w {
            assert!((x - 1.0 / 3.0).abs() < 1e-4);
        }
    }

    #[test]
    fn compose_with_zero_subs_is_global() {
        let g = vec![0.5, -0.25, 0.75];
        let z = vec![0.0, 0.0, 0.0];
        let v = compose_visual(&g, &[z.clone(), z.clone(), z], &[0.3, 0.3, 0.4]).unwrap();
        assert_eq!(v, g);
    }

    #[test]
    fn compose_uniform_basis_case() {
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        let v = compose_visual(
            &e1,
            &[e2.clone(), e2.clone(), e2.clone()],
            &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        )
        .unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert!((v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_entity_doubling_keeps_score() {
        let g = vec![0.6, -0.8, 0.0, 0.1];
        let t = vec![0.3, 0.3, -0.9, 0.2];
        let ents = [entity("x", Role::Subject, g.clone(), g.clone())];
        let r = score_vectors(&g, &t, &ents, &CompositionConfig::default()).unwrap();
        assert_eq!(r.entities[0].weight, 1.0);
        for (v, gi) in r.composed.iter().zip(&g) {
            assert_eq!(*v, 2.0 * gi);
        }
        assert_eq!(r.final_score, r.global_score);
    }

    #[test]
    fn zero_subimages_reduce_to_baseline_exactly() {
        let g = vec![0.3, 0.5, -0.2, 0.7];
        let t = vec![-0.1, 0.8, 0.2, 0.0];
        let z = vec![0.0; 4];
        let ents = [
            entity("a", Role::Subject, vec![0.1, 0.2, 0.3, 0.4], z.clone()),
            entity("b", Role::Predicate, vec![0.5, 0.1, -0.3, 0.2], z.clone()),
            entity("c", Role::Object, vec![-0.2, 0.4, 0.1, 0.6], z.clone()),
        ];
        let r = score_vectors(&g, &t, &ents, &CompositionConfig::default()).unwrap();
        assert_eq!(r.final_score, r.global_score);
        assert_eq!(r.composed, g);
        for e in &r.entities {
            assert_eq!(e.similarity, 0.0);
            assert_eq!(e.weight, 1.0 / 3.0);
        }
    }

    #[test]
    fn no_entities_degrades_to_baseline() {
        let g = vec![1.0, 0.0];
        let t = vec![0.6, 0.8];
        let r = score_vectors(&g, &t, &[], &CompositionConfig::default()).unwrap();
        assert_eq!(r.final_score, r.global_score);
        assert!(r.entities.is_empty());
    }

    #[test]
    fn omit_drops_role_and_reweights() {
        let g = vec![0.2, 0.4, 0.1];
        let t = vec![0.9, 0.1, 0.3];
        let ents = [
            entity("s", Role::Subject, vec![1.0, 0.0, 0.0], vec![0.5, 0.1, 0.2]),
            entity("p", Role::Predicate, vec![0.0, 1.0, 0.0], vec![0.1, 0.9, 0.3]),
            entity("o", Role::Object, vec![0.0, 0.0, 1.0], vec![0.2, 0.2, 0.8]),
        ];
        let cfg = CompositionConfig {
            subimage_config: SubimageConfig::OmitPredicate,
            ..Default::default()
        };
        let r = score_vectors(&g, &t, &ents, &cfg).unwrap();
        assert_eq!(r.entities.len(), 2);
        assert!(r.entities.iter().all(|e| e.role != Role::Predicate));
        let sum: f64 = r.entities.iter().map(|e| e.weight).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn entity_only_scores_word_against_image() {
        let g = vec![1.0, 0.0];
        let t = vec![0.0, 1.0];
        let ents = [
            entity("s", Role::Subject, vec![1.0, 0.0], vec![0.0, 0.0]),
            entity("p", Role::Predicate, vec![0.0, 1.0], vec![0.0, 0.0]),
            entity("o", Role::Object, vec![1.0, 1.0], vec![0.0, 0.0]),
        ];
        let cfg = CompositionConfig {
            subimage_config: SubimageConfig::EntityOnlySubject,
            ..Default::default()
        };
        let r = score_vectors(&g, &t, &ents, &cfg).unwrap();
        assert_eq!(r.final_score, 1.0); // cosine(subject word, image) = 1

        let cfg_all = CompositionConfig {
            subimage_config: SubimageConfig::EntityOnlyAll,
            ..Default::default()
        };
        let r = score_vectors(&g, &t, &ents, &cfg_all).unwrap();
        let expect = (1.0 + 0.0 + 1.0 / core::f64::consts::SQRT_2) / 3.0;
        assert!((r.final_score - expect).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariance() {
        let g = vec![0.3, -0.2, 0.5, 0.1];
        let t = vec![0.1, 0.9, -0.3, 0.2];
        let ents = vec![
            entity("a", Role::Subject, vec![0.4, 0.1, 0.0, 0.3], vec![0.2, 0.5, 0.1, 0.0]),
            entity("b", Role::Predicate, vec![0.0, 0.7, 0.2, 0.1], vec![0.6, 0.1, 0.4, 0.2]),
            entity("c", Role::Object, vec![0.3, 0.3, 0.9, 0.0], vec![0.1, 0.2, 0.7, 0.5]),
        ];
        let cfg = CompositionConfig::default();
        let base = score_vectors(&g, &t, &ents, &cfg).unwrap().final_score;
        let mut perm = ents.clone();
        perm.rotate_left(1);
        let rotated = score_vectors(&g, &t, &perm, &cfg).unwrap().final_score;
        assert!((base - rotated).abs() < 1e-12);
    }

    #[test]
    fn missing_sub_embedding_is_an_error() {
        let mut e = entity("s", Role::Subject, vec![1.0, 0.0], vec![0.0, 1.0]);
        e.sub_emb = None;
        let err = score_vectors(&[1.0, 0.0], &[0.0, 1.0], &[e], &CompositionConfig::default())
            .unwrap_err();
        assert!(matches!(err, ComposeError::MissingSubEmbedding { .. }));
    }

    #[test]
    fn subimage_config_names_roundtrip() {
        for cfg in SubimageConfig::ALL {
            let parsed: SubimageConfig = cfg.as_str().parse().unwrap();
            assert_eq!(parsed, cfg);
            let json = serde_json::to_string(&cfg).unwrap();
            assert_eq!(json, alloc::format!("\"{}\"", cfg.as_str()));
        }
        assert!("bogus".parse::<SubimageConfig>().is_err());
    }

    #[test]
    fn explain_json_has_fixed_keys() {
        let result = CompositionResult {
            global_image_emb: EmbeddingVector::new(vec![1.0, 0.0]),
            global_score: 0.25,
            entity_records: vec![EntityRecord {
                word: "cat".to_string(),
                role: Role::Subject,
                kind: SubimageKind::Subject,
                similarity: 0.5,
                weight: 1.0,
                subimage_emb: None,
            }],
            composed: vec![1.0, 0.5],
            final_score: 0.75,
        };
        let json = result.explain_json();
        assert_eq!(json["global_score"], 0.25);
        assert_eq!(json["final_score"], 0.75);
        assert_eq!(json["weights"][0], 1.0);
        assert_eq!(json["entities"][0]["word"], "cat");
        assert_eq!(json["entities"][0]["role"], "subject");
    }
}
