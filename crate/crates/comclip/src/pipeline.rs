//! The scoring pipeline: parse -> ground -> subimage -> encode -> compose.
//!
//! Subimage embeddings are cached under keys derived from how the
//! subimage is constructed (source hash + boxes + fill) rather than from
//! its pixels, so a warm cache skips both mask construction and pixel
//! hashing; construction is deterministic, which keeps the keys sound.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use comclip_core::compose::{
    score_vectors, ComposeError, CompositionConfig, CompositionResult, EntityRecord,
    EntityVectors,
};
use comclip_core::embed::{DimensionMismatch, EmbeddingVector};
use comclip_core::ground::{
    align_prompt, lexical_caption_indices, lexical_ground, parse_align_reply, DenseCaption,
    GroundedEntity, GroundingMap,
};
use comclip_core::image::{
    build_entity_subimage, union_bounding_box, BoxRegion, FillStyle, ImageBuf,
    ImageError, SubimageKind,
};
use comclip_core::metrics::MatchInstance;
use comclip_core::parse::{
    parse_prompt, parse_svo_rule_based, extract_llm_triplets, EntityRef, ParseError,
    ParseSource, ParsedSentence, Role,
};
use sha2::{Digest, Sha256};

use crate::cache::{cache_key, text_content_hash, EmbeddingCache, Modality};
use crate::client::{raw_captions_to_dense, CaptionerClient, ClientError, TextCompletion};
use crate::dataset::RawCaption;
use crate::encoder::{EncoderBackend, EncoderError};
use crate::imgio::{load_image, ImgIoError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    ImgIo(#[from] ImgIoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<DimensionMismatch> for PipelineError {
    fn from(e: DimensionMismatch) -> Self {
        PipelineError::Compose(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParserMode {
    #[default]
    RuleBased,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignerMode {
    #[default]
    Lexical,
    Llm,
}

pub fn kind_for_role(role: Role) -> SubimageKind {
    match role {
        Role::Subject => SubimageKind::Subject,
        Role::Object => SubimageKind::Object,
        Role::Predicate => SubimageKind::Predicate,
    }
}

/// LLM parsing with transparent fallback: any client or extraction
/// failure falls back to the rule-based parser (and an unparseable
/// sentence yields zero triplets rather than an error).
pub fn parse_svo_llm(
    sentence: &str,
    client: &dyn TextCompletion,
    fallbacks: &AtomicU64,
) -> ParsedSentence {
    let prompt = parse_prompt(sentence);
    match client.complete(&prompt) {
        Ok(reply) => {
            if let Some(triplets) = extract_llm_triplets(&reply) {
                return ParsedSentence::from_triplets(sentence, triplets, ParseSource::Llm);
            }
            log::warn!("llm reply had no usable triplets; falling back to rule-based parse");
        }
        Err(e) => log::warn!("llm parse failed ({e}); falling back to rule-based parse"),
    }
    fallbacks.fetch_add(1, Ordering::Relaxed);
    match parse_svo_rule_based(sentence) {
        Ok(p) => p,
        Err(_) => ParsedSentence::from_triplets(sentence, Vec::new(), ParseSource::RuleBased),
    }
}

/// Ground subject/object entities against the captions. The LLM aligner
/// asks one matching question per entity and falls back to the lexical
/// rule for that entity on any failure.
pub fn ground_entities(
    entities: &[EntityRef],
    captions: &[DenseCaption],
    mode: AlignerMode,
    llm: Option<&dyn TextCompletion>,
) -> GroundingMap {
    let (AlignerMode::Llm, Some(client)) = (mode, llm) else {
        return lexical_ground(entities, captions);
    };
    if captions.is_empty() {
        return lexical_ground(entities, captions);
    }
    let mut map = GroundingMap::default();
    for entity in entities {
        if entity.role == Role::Predicate {
            continue;
        }
        let prompt = align_prompt(&entity.word, captions);
        let indices = match client.complete(&prompt) {
            Ok(reply) => match parse_align_reply(&reply, captions.len()) {
                Some(ix) => ix,
                None => {
                    log::warn!("aligner reply unusable for '{}'; using lexical match", entity.word);
                    lexical_caption_indices(&entity.word, captions)
                }
            },
            Err(e) => {
                log::warn!("aligner call failed for '{}' ({e}); using lexical match", entity.word);
                lexical_caption_indices(&entity.word, captions)
            }
        };
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

/// Where dense captions come from for a given image.
pub enum CaptionProvider {
    /// No captioner: every entity is unmatched and falls back to the
    /// original image.
    None,
    /// Ground-truth or precomputed captions keyed by the dataset image ref.
    Static(HashMap<String, Vec<RawCaption>>),
    Client(Arc<CaptionerClient>),
}

impl CaptionProvider {
    pub fn captions_for(
        &self,
        image: &ImageBuf,
        ref_key: Option<&str>,
    ) -> Result<Vec<DenseCaption>, ClientError> {
        match self {
            CaptionProvider::None => Ok(Vec::new()),
            CaptionProvider::Static(map) => {
                let rows = ref_key.and_then(|k| map.get(k));
                Ok(rows
                    .map(|rows| {
                        let raw: Vec<(String, [i64; 4])> =
                            rows.iter().map(|r| (r.text.clone(), r.coords)).collect();
                        raw_captions_to_dense(&raw, image.width(), image.height())
                    })
                    .unwrap_or_default())
            }
            CaptionProvider::Client(c) => c.dense_captions(image),
        }
    }
}

/// How one subimage's pixels are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum SubimagePixels {
    /// Mask that keeps the union of these boxes.
    Region { boxes: Vec<BoxRegion> },
    /// The source image unchanged.
    Original,
    /// An all-zero-pixel image of the source dimensions.
    Black,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubimagePlan {
    pub kind: SubimageKind,
    pub pixels: SubimagePixels,
}

fn natural_plan(
    entity: &EntityRef,
    parsed: &ParsedSentence,
    grounding: &GroundingMap,
) -> SubimagePlan {
    let fallback = SubimagePlan {
        kind: SubimageKind::FallbackOriginal,
        pixels: SubimagePixels::Original,
    };
    match entity.role {
        Role::Subject | Role::Object => {
            let boxes = grounding.boxes_for(&entity.word, entity.role);
            if boxes.is_empty() {
                fallback
            } else {
                SubimagePlan {
                    kind: kind_for_role(entity.role),
                    pixels: SubimagePixels::Region {
                        boxes: boxes.to_vec(),
                    },
                }
            }
        }
        Role::Predicate => {
            // Union of the subject and object regions of every triplet
            // this predicate heads.
            let mut boxes = Vec::new();
            for t in parsed.triplets_with(entity) {
                boxes.extend_from_slice(grounding.boxes_for(&t.subject, Role::Subject));
                boxes.extend_from_slice(grounding.boxes_for(&t.object, Role::Object));
            }
            if boxes.is_empty() {
                fallback
            } else {
                SubimagePlan {
                    kind: SubimageKind::Predicate,
                    pixels: SubimagePixels::Region { boxes },
                }
            }
        }
    }
}

/// Decide each entity's subimage under the active configuration.
/// Entities of an omitted role are absent from the result.
pub fn plan_subimages(
    parsed: &ParsedSentence,
    grounding: &GroundingMap,
    config: &CompositionConfig,
) -> Vec<(EntityRef, SubimagePlan)> {
    use comclip_core::compose::SubimageConfig;
    let omitted = config.subimage_config.omitted_role();
    let kept_role = config.subimage_config.kept_role();
    parsed
        .entities
        .iter()
        .filter(|e| omitted != Some(e.role))
        .map(|e| {
            let natural = natural_plan(e, parsed, grounding);
            let plan = match config.subimage_config {
                SubimageConfig::AllBlack => SubimagePlan {
                    kind: natural.kind,
                    pixels: SubimagePixels::Black,
                },
                SubimageConfig::AllOriginal => SubimagePlan {
                    kind: SubimageKind::FallbackOriginal,
                    pixels: SubimagePixels::Original,
                },
                SubimageConfig::SubjectOnly
                | SubimageConfig::ObjectOnly
                | SubimageConfig::PredicateOnly => {
                    if kept_role == Some(e.role) {
                        natural
                    } else {
                        SubimagePlan {
                            kind: SubimageKind::FallbackOriginal,
                            pixels: SubimagePixels::Original,
                        }
                    }
                }
                _ => natural,
            };
            (e.clone(), plan)
        })
        .collect()
}

/// Content hash for a planned subimage, derived from its construction
/// parameters. Construction is a pure function of (source, boxes, fill),
/// so this is equivalent to hashing the pixels, without building them.
pub fn plan_content_hash(
    src: &ImageBuf,
    src_hash: &[u8; 32],
    plan: &SubimagePlan,
    fill: FillStyle,
    crop_tight: bool,
) -> [u8; 32] {
    match &plan.pixels {
        SubimagePixels::Original => *src_hash,
        SubimagePixels::Black => {
            let mut h = Sha256::new();
            h.update(b"BLK1");
            h.update(src.width().to_le_bytes());
            h.update(src.height().to_le_bytes());
            h.finalize().into()
        }
        SubimagePixels::Region { boxes } => {
            let mut sorted = boxes.clone();
            sorted.sort_unstable();
            sorted.dedup();
            let mut h = Sha256::new();
            h.update(b"SUB1");
            h.update(src_hash);
            match fill.policy {
                comclip_core::image::FillPolicy::Black => h.update([0u8]),
                comclip_core::image::FillPolicy::Blur => {
                    h.update([1u8]);
                    h.update(fill.blur_radius_frac.to_le_bytes());
                }
            }
            h.update([crop_tight as u8]);
            for b in &sorted {
                h.update(b.x1.to_le_bytes());
                h.update(b.y1.to_le_bytes());
                h.update(b.x2.to_le_bytes());
                h.update(b.y2.to_le_bytes());
            }
            h.finalize().into()
        }
    }
}

/// Materialize a plan's pixels.
pub fn build_plan_pixels(
    src: &ImageBuf,
    plan: &SubimagePlan,
    fill: FillStyle,
    crop_tight: bool,
) -> Result<ImageBuf, ImageError> {
    match &plan.pixels {
        SubimagePixels::Original => Ok(src.clone()),
        SubimagePixels::Black => Ok(ImageBuf::zeros(src.width(), src.height())),
        SubimagePixels::Region { boxes } => {
            let sub = build_entity_subimage(src, boxes, plan.kind, fill)?;
            if crop_tight {
                let bb = union_bounding_box(boxes).expect("non-empty boxes");
                Ok(sub.image.crop(&bb))
            } else {
                Ok(sub.image)
            }
        }
    }
}

/// Everything needed to score (image, sentence) pairs.
pub struct ScoreEngine {
    pub backend: Arc<dyn EncoderBackend>,
    pub cache: Arc<EmbeddingCache>,
    pub llm: Option<Arc<dyn TextCompletion>>,
    pub captions: CaptionProvider,
    pub parser_mode: ParserMode,
    pub aligner_mode: AlignerMode,
    pub config: CompositionConfig,
    parser_fallbacks: AtomicU64,
}

impl ScoreEngine {
    pub fn new(backend: Arc<dyn EncoderBackend>, cache: Arc<EmbeddingCache>) -> Self {
        Self {
            backend,
            cache,
            llm: None,
            captions: CaptionProvider::None,
            parser_mode: ParserMode::RuleBased,
            aligner_mode: AlignerMode::Lexical,
            config: CompositionConfig::default(),
            parser_fallbacks: AtomicU64::new(0),
        }
    }

    /// Times the LLM route fell back to the rule-based parser.
    pub fn parser_fallbacks(&self) -> u64 {
        self.parser_fallbacks.load(Ordering::Relaxed)
    }

    /// Parse per the configured mode. A sentence with no extractable
    /// triplet yields an empty parse (whole-sentence scoring); only a
    /// blank sentence is an error.
    pub fn parse_sentence(&self, sentence: &str) -> Result<ParsedSentence, PipelineError> {
        if sentence.trim().is_empty() {
            return Err(ParseError::EmptySentence.into());
        }
        match (self.parser_mode, &self.llm) {
            (ParserMode::Llm, Some(client)) => Ok(parse_svo_llm(
                sentence,
                client.as_ref(),
                &self.parser_fallbacks,
            )),
            _ => match parse_svo_rule_based(sentence) {
                Ok(p) => Ok(p),
                Err(ParseError::NoTripleFound) => Ok(ParsedSentence::from_triplets(
                    sentence,
                    Vec::new(),
                    ParseSource::RuleBased,
                )),
                Err(e) => Err(e.into()),
            },
        }
    }

    fn embed_text_cached(&self, text: &str) -> Result<EmbeddingVector, PipelineError> {
        let trimmed = text.trim();
        let key = cache_key(
            self.backend.id(),
            Modality::Text,
            &text_content_hash(trimmed),
        );
        self.cache
            .get_or_compute(&key, || self.backend.encode_text(trimmed).map_err(Into::into))
    }

    fn embed_image_cached(&self, image: &ImageBuf) -> Result<EmbeddingVector, PipelineError> {
        self.embed_image_with_hash(image, &image.content_hash())
    }

    fn embed_image_with_hash(
        &self,
        image: &ImageBuf,
        content_hash: &[u8; 32],
    ) -> Result<EmbeddingVector, PipelineError> {
        let key = cache_key(self.backend.id(), Modality::Image, content_hash);
        self.cache
            .get_or_compute(&key, || self.backend.encode_image(image).map_err(Into::into))
    }

    fn embed_plan_cached(
        &self,
        src: &ImageBuf,
        src_hash: &[u8; 32],
        plan: &SubimagePlan,
    ) -> Result<EmbeddingVector, PipelineError> {
        let fill = self.config.fill_style();
        let content = plan_content_hash(src, src_hash, plan, fill, self.config.crop_tight);
        let key = cache_key(self.backend.id(), Modality::Image, &content);
        self.cache.get_or_compute(&key, || {
            let pixels = build_plan_pixels(src, plan, fill, self.config.crop_tight)?;
            self.backend.encode_image(&pixels).map_err(Into::into)
        })
    }

    /// Plain global cosine, the two-stage-retrieval stage-1 scorer and
    /// the ablation reference.
    pub fn baseline(&self, image: &ImageBuf, sentence: &str) -> Result<f64, PipelineError> {
        let text = self.embed_text_cached(sentence)?;
        let img = self.embed_image_cached(image)?;
        Ok(text.cosine(&img)?)
    }

    /// Full compositional score; parses the sentence per the engine mode.
    pub fn score(
        &self,
        image: &ImageBuf,
        ref_key: Option<&str>,
        sentence: &str,
    ) -> Result<CompositionResult, PipelineError> {
        let parsed = self.parse_sentence(sentence)?;
        self.score_with_parsed(image, ref_key, sentence, &parsed)
    }

    /// Full compositional score with a caller-supplied parse (used when a
    /// dataset carries ground-truth triplets).
    pub fn score_with_parsed(
        &self,
        image: &ImageBuf,
        ref_key: Option<&str>,
        sentence: &str,
        parsed: &ParsedSentence,
    ) -> Result<CompositionResult, PipelineError> {
        let src_hash = image.content_hash();
        let text_emb = self.embed_text_cached(sentence)?;
        let img_emb = self.embed_image_with_hash(image, &src_hash)?;
        let entity_only = self
            .config
            .subimage_config
            .entity_only_selector()
            .is_some();

        let mut entity_vectors: Vec<EntityVectors> = Vec::new();
        let mut sub_embs: Vec<Option<EmbeddingVector>> = Vec::new();

        if entity_only {
            for e in &parsed.entities {
                let word_emb = self.embed_text_cached(&e.word)?;
                entity_vectors.push(EntityVectors {
                    word: e.word.clone(),
                    role: e.role,
                    kind: kind_for_role(e.role),
                    word_emb: word_emb.to_f64(),
                    sub_emb: None,
                });
                sub_embs.push(None);
            }
        } else if !parsed.entities.is_empty() {
            let captions = self.captions.captions_for(image, ref_key)?;
            let grounding = ground_entities(
                &parsed.entities,
                &captions,
                self.aligner_mode,
                self.llm.as_deref(),
            );
            let plans = plan_subimages(parsed, &grounding, &self.config);
            for (e, plan) in &plans {
                let word_emb = self.embed_text_cached(&e.word)?;
                let sub = self.embed_plan_cached(image, &src_hash, plan)?;
                entity_vectors.push(EntityVectors {
                    word: e.word.clone(),
                    role: e.role,
                    kind: plan.kind,
                    word_emb: word_emb.to_f64(),
                    sub_emb: Some(sub.to_f64()),
                });
                sub_embs.push(Some(sub));
            }
        }

        let scored = score_vectors(
            &img_emb.to_f64(),
            &text_emb.to_f64(),
            &entity_vectors,
            &self.config,
        )?;
        let entity_records = scored
            .entities
            .iter()
            .zip(sub_embs)
            .map(|(se, sub)| EntityRecord {
                word: se.word.clone(),
                role: se.role,
                kind: se.kind,
                similarity: se.similarity,
                weight: se.weight,
                subimage_emb: sub,
            })
            .collect();

        Ok(CompositionResult {
            global_image_emb: img_emb,
            global_score: scored.global_score,
            entity_records,
            composed: scored.composed,
            final_score: scored.final_score,
        })
    }

    /// Score an image file by path.
    pub fn score_file(
        &self,
        path: &Path,
        ref_key: Option<&str>,
        sentence: &str,
    ) -> Result<CompositionResult, PipelineError> {
        let image = load_image(path)?;
        self.score_with_parsed_file(path, &image, ref_key, sentence)
    }

    fn score_with_parsed_file(
        &self,
        _path: &Path,
        image: &ImageBuf,
        ref_key: Option<&str>,
        sentence: &str,
    ) -> Result<CompositionResult, PipelineError> {
        self.score(image, ref_key, sentence)
    }

    pub fn baseline_file(&self, path: &Path, sentence: &str) -> Result<f64, PipelineError> {
        let image = load_image(path)?;
        self.baseline(&image, sentence)
    }

    /// Same engine with a different composition config; shares the
    /// backend, cache, and clients.
    pub fn with_config(&self, config: CompositionConfig) -> ScoreEngine {
        ScoreEngine {
            backend: Arc::clone(&self.backend),
            cache: Arc::clone(&self.cache),
            llm: self.llm.clone(),
            captions: match &self.captions {
                CaptionProvider::None => CaptionProvider::None,
                CaptionProvider::Static(m) => CaptionProvider::Static(m.clone()),
                CaptionProvider::Client(c) => CaptionProvider::Client(Arc::clone(c)),
            },
            parser_mode: self.parser_mode,
            aligner_mode: self.aligner_mode,
            config,
            parser_fallbacks: AtomicU64::new(0),
        }
    }
}

/// How often the rule-based parse reproduces a dataset's ground-truth
/// triplet exactly (lowercase word match). Reported, never enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ParityReport {
    pub matched: usize,
    pub total: usize,
}

impl ParityReport {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }
}

pub fn parse_parity(instances: &[MatchInstance]) -> ParityReport {
    let mut matched = 0usize;
    for inst in instances {
        if let Ok(parsed) = parse_svo_rule_based(&inst.sentence) {
            if parsed.triplets.iter().any(|t| *t == inst.triplet) {
                matched += 1;
            }
        }
    }
    ParityReport {
        matched,
        total: instances.len(),
    }
}
