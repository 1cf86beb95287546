//! Evaluation runners: wire datasets through the scoring engine with a
//! bounded worker pool, then aggregate with the core metric functions.
//!
//! Reports serialize with a fixed top-level key set — overall,
//! by_neg_type, winoground, recall, config, seed, n_instances — plus a
//! skipped count; unused metrics are null. Two runs with identical
//! config, fixtures, and seed produce byte-identical JSON.

use std::collections::HashMap;
use std::path::Path;

use comclip_core::compose::SubimageConfig;
use comclip_core::metrics::{
    eval_matching, eval_retrieval, eval_vl_checklist, eval_winoground, Counts, MatchInstance,
    RecallAtK, VlChecklistPair, WinogroundInstance,
};
use comclip_core::parse::{ParseSource, ParsedSentence};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{
    DatasetManifest, MatchingDataset, RetrievalDataset, VlChecklistDataset, WinogroundDataset,
};
use crate::imgio::load_image;
use crate::pipeline::{parse_parity, ParityReport, PipelineError, ScoreEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScorerKind {
    Baseline,
    #[default]
    Comclip,
}

impl ScorerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::Baseline => "baseline",
            ScorerKind::Comclip => "comclip",
        }
    }
}

impl std::str::FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "comclip" => Ok(Self::Comclip),
            other => Err(format!("unknown scorer '{other}'")),
        }
    }
}

/// Which triplets drive the compositional scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParserChoice {
    #[default]
    Rule,
    Llm,
    /// Use the dataset's ground-truth triplet, bypassing the parser.
    Dataset,
}

impl ParserChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            ParserChoice::Rule => "rule",
            ParserChoice::Llm => "llm",
            ParserChoice::Dataset => "dataset",
        }
    }
}

impl std::str::FromStr for ParserChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule" => Ok(Self::Rule),
            "llm" => Ok(Self::Llm),
            "dataset" => Ok(Self::Dataset),
            other => Err(format!("unknown parser choice '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub scorer: ScorerKind,
    pub parser: ParserChoice,
    pub parallelism: usize,
    pub seed: u64,
    pub lenient: bool,
    pub limit: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            scorer: ScorerKind::Comclip,
            parser: ParserChoice::Rule,
            parallelism: 1,
            seed: 0,
            lenient: false,
            limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CountsJson {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl From<Counts> for CountsJson {
    fn from(c: Counts) -> Self {
        Self {
            correct: c.correct,
            total: c.total,
            accuracy: c.accuracy(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NegTypeJson {
    pub subject: CountsJson,
    pub predicate: CountsJson,
    pub object: CountsJson,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WinogroundJson {
    pub text: f64,
    pub image: f64,
    pub group: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RecallJson {
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
}

impl From<RecallAtK> for RecallJson {
    fn from(r: RecallAtK) -> Self {
        Self {
            r1: r.r1,
            r5: r.r5,
            r10: r.r10,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VlJson {
    pub attribute: CountsJson,
    pub object: CountsJson,
    pub relation: CountsJson,
    pub average: f64,
}

/// The one report shape every eval subcommand emits.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub overall: Option<f64>,
    pub by_neg_type: Option<NegTypeJson>,
    pub winoground: Option<WinogroundJson>,
    pub recall: Option<RecallJson>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub n_instances: usize,
    pub skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vl_checklist: Option<VlJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity: Option<ParityJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores_csv: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParityJson {
    pub matched: usize,
    pub total: usize,
    pub fraction: f64,
}

impl From<ParityReport> for ParityJson {
    fn from(p: ParityReport) -> Self {
        Self {
            matched: p.matched,
            total: p.total,
            fraction: p.fraction(),
        }
    }
}

impl EvalReport {
    fn empty(config: serde_json::Value, seed: u64, n_instances: usize) -> Self {
        Self {
            overall: None,
            by_neg_type: None,
            winoground: None,
            recall: None,
            config,
            seed,
            n_instances,
            skipped: 0,
            vl_checklist: None,
            parity: None,
            scores_csv: None,
        }
    }
}

fn config_json(
    engine: &ScoreEngine,
    opts: &EvalOptions,
    manifest: &DatasetManifest,
) -> serde_json::Value {
    serde_json::json!({
        "composition": engine.config,
        "scorer": opts.scorer.as_str(),
        "parser": opts.parser.as_str(),
        "backend_id": engine.backend.id(),
        "backend_dim": engine.backend.dim(),
        "cache_enabled": engine.cache.is_enabled(),
        "dataset": {
            "kind": manifest.kind.as_str(),
            "count": manifest.count,
            "checksum": manifest.checksum,
        },
    })
}

fn build_pool(parallelism: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()).into())
}

/// Honor a backend's single-threaded declaration.
fn pool_for(engine: &ScoreEngine, opts: &EvalOptions) -> Result<rayon::ThreadPool, PipelineError> {
    let n = if engine.backend.single_threaded() {
        1
    } else {
        opts.parallelism
    };
    build_pool(n)
}

/// Score one (image ref, sentence) pair from disk.
fn score_pair(
    engine: &ScoreEngine,
    root: &Path,
    image_ref: &str,
    sentence: &str,
    parsed: Option<&ParsedSentence>,
    scorer: ScorerKind,
) -> Result<f64, PipelineError> {
    let image = load_image(&root.join(image_ref))?;
    match scorer {
        ScorerKind::Baseline => engine.baseline(&image, sentence),
        ScorerKind::Comclip => match parsed {
            Some(p) => engine
                .score_with_parsed(&image, Some(image_ref), sentence, p)
                .map(|r| r.final_score),
            None => engine
                .score(&image, Some(image_ref), sentence)
                .map(|r| r.final_score),
        },
    }
}

fn prepare_parse(inst: &MatchInstance, parser: ParserChoice) -> Option<ParsedSentence> {
    match parser {
        // Ground-truth triplets bypass the parser; the source tag records
        // the construction route, and rule_based is the non-model one.
        ParserChoice::Dataset => Some(ParsedSentence::from_triplets(
            &inst.sentence,
            vec![inst.triplet.clone()],
            ParseSource::RuleBased,
        )),
        ParserChoice::Rule | ParserChoice::Llm => None, // engine parses per its mode
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchScoreRow {
    pub id: String,
    pub pos_score: Option<f64>,
    pub neg_score: Option<f64>,
    pub error: Option<String>,
}

pub struct MatchingRunOutput {
    pub report: EvalReport,
    pub rows: Vec<MatchScoreRow>,
}

/// Matching accuracy over a ComVG/SVO-style dataset.
pub fn run_matching(
    engine: &ScoreEngine,
    ds: &MatchingDataset,
    opts: &EvalOptions,
) -> Result<MatchingRunOutput, PipelineError> {
    let instances: Vec<MatchInstance> = match opts.limit {
        Some(n) => ds.instances.iter().take(n).cloned().collect(),
        None => ds.instances.clone(),
    };
    let root = ds.manifest.root.clone();
    let pool = pool_for(engine, opts)?;

    type Scored = (Result<f64, String>, Result<f64, String>);
    let scored: Vec<Scored> = pool.install(|| {
        instances
            .par_iter()
            .map(|inst| {
                let parsed = prepare_parse(inst, opts.parser);
                let pos = score_pair(
                    engine,
                    &root,
                    &inst.pos_image,
                    &inst.sentence,
                    parsed.as_ref(),
                    opts.scorer,
                )
                .map_err(|e| e.to_string());
                let neg = score_pair(
                    engine,
                    &root,
                    &inst.neg_image,
                    &inst.sentence,
                    parsed.as_ref(),
                    opts.scorer,
                )
                .map_err(|e| e.to_string());
                (pos, neg)
            })
            .collect()
    });

    // Feed the precomputed table through the core metric.
    let mut table: HashMap<(String, String), Result<f64, String>> = HashMap::new();
    for (inst, (pos, neg)) in instances.iter().zip(&scored) {
        table.insert((inst.pos_image.clone(), inst.sentence.clone()), pos.clone());
        table.insert((inst.neg_image.clone(), inst.sentence.clone()), neg.clone());
    }
    let report = eval_matching(
        &instances,
        |image: &str, sentence: &str| -> Result<f64, String> {
            table[&(image.to_string(), sentence.to_string())].clone()
        },
        opts.lenient,
    );
    let report = match report {
        Ok(r) => r,
        Err(msg) => {
            return Err(PipelineError::Io(std::io::Error::other(format!(
                "scoring failed: {msg}"
            ))))
        }
    };

    let rows = instances
        .iter()
        .zip(&scored)
        .map(|(inst, (pos, neg))| MatchScoreRow {
            id: inst.id.clone(),
            pos_score: pos.as_ref().ok().copied(),
            neg_score: neg.as_ref().ok().copied(),
            error: pos
                .as_ref()
                .err()
                .or(neg.as_ref().err())
                .cloned(),
        })
        .collect();

    let parity = parse_parity(&instances);
    let mut out = EvalReport::empty(config_json(engine, opts, &ds.manifest), opts.seed, instances.len());
    out.overall = Some(report.overall.accuracy());
    out.by_neg_type = Some(NegTypeJson {
        subject: report.subject.into(),
        predicate: report.predicate.into(),
        object: report.object.into(),
    });
    out.skipped = report.skipped;
    out.parity = Some(parity.into());
    Ok(MatchingRunOutput { report: out, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct WinoScoreRow {
    pub id: String,
    pub c0_i0: f64,
    pub c0_i1: f64,
    pub c1_i0: f64,
    pub c1_i1: f64,
}

pub struct WinogroundRunOutput {
    pub report: EvalReport,
    pub rows: Vec<WinoScoreRow>,
}

/// Winoground text/image/group scores.
pub fn run_winoground(
    engine: &ScoreEngine,
    ds: &WinogroundDataset,
    opts: &EvalOptions,
) -> Result<WinogroundRunOutput, PipelineError> {
    let instances: Vec<WinogroundInstance> = match opts.limit {
        Some(n) => ds.instances.iter().take(n).cloned().collect(),
        None => ds.instances.clone(),
    };
    let root = ds.manifest.root.clone();
    let pool = pool_for(engine, opts)?;

    let scored: Vec<Result<[f64; 4], PipelineError>> = pool.install(|| {
        instances
            .par_iter()
            .map(|inst| {
                let mut s = [0.0f64; 4];
                for (slot, (caption, image)) in [
                    (&inst.caption_0, &inst.image_0),
                    (&inst.caption_0, &inst.image_1),
                    (&inst.caption_1, &inst.image_0),
                    (&inst.caption_1, &inst.image_1),
                ]
                .into_iter()
                .enumerate()
                {
                    s[slot] = score_pair(engine, &root, image, caption, None, opts.scorer)?;
                }
                Ok(s)
            })
            .collect()
    });

    let mut table: HashMap<(String, String), f64> = HashMap::new();
    let mut rows = Vec::with_capacity(instances.len());
    for (inst, scores) in instances.iter().zip(scored) {
        let s = scores?;
        table.insert((inst.caption_0.clone(), inst.image_0.clone()), s[0]);
        table.insert((inst.caption_0.clone(), inst.image_1.clone()), s[1]);
        table.insert((inst.caption_1.clone(), inst.image_0.clone()), s[2]);
        table.insert((inst.caption_1.clone(), inst.image_1.clone()), s[3]);
        rows.push(WinoScoreRow {
            id: inst.id.clone(),
            c0_i0: s[0],
            c0_i1: s[1],
            c1_i0: s[2],
            c1_i1: s[3],
        });
    }

    let scores = eval_winoground(
        &instances,
        |caption: &str, image: &str| -> Result<f64, String> {
            Ok(table[&(caption.to_string(), image.to_string())])
        },
    )
    .expect("table lookups cannot fail");

    let mut out = EvalReport::empty(config_json(engine, opts, &ds.manifest), opts.seed, instances.len());
    out.winoground = Some(WinogroundJson {
        text: scores.text,
        image: scores.image,
        group: scores.group,
    });
    Ok(WinogroundRunOutput { report: out, rows })
}

/// VL-checklist per-category accuracy.
pub fn run_vl_checklist(
    engine: &ScoreEngine,
    ds: &VlChecklistDataset,
    opts: &EvalOptions,
) -> Result<EvalReport, PipelineError> {
    let pairs: Vec<VlChecklistPair> = match opts.limit {
        Some(n) => ds.pairs.iter().take(n).cloned().collect(),
        None => ds.pairs.clone(),
    };
    let root = ds.manifest.root.clone();
    let pool = pool_for(engine, opts)?;

    let scored: Vec<Result<(f64, f64), PipelineError>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|p| {
                let pos = score_pair(engine, &root, &p.image, &p.pos_caption, None, opts.scorer)?;
                let neg = score_pair(engine, &root, &p.image, &p.neg_caption, None, opts.scorer)?;
                Ok((pos, neg))
            })
            .collect()
    });

    let mut table: HashMap<(String, String), f64> = HashMap::new();
    for (p, s) in pairs.iter().zip(scored) {
        let (pos, neg) = s?;
        table.insert((p.image.clone(), p.pos_caption.clone()), pos);
        table.insert((p.image.clone(), p.neg_caption.clone()), neg);
    }
    let report = eval_vl_checklist(&pairs, |image: &str, caption: &str| -> Result<f64, String> {
        Ok(table[&(image.to_string(), caption.to_string())])
    })
    .expect("table lookups cannot fail");

    let mut out = EvalReport::empty(config_json(engine, opts, &ds.manifest), opts.seed, pairs.len());
    out.overall = Some(report.average);
    out.vl_checklist = Some(VlJson {
        attribute: report.attribute.into(),
        object: report.object.into(),
        relation: report.relation.into(),
        average: report.average,
    });
    Ok(out)
}

/// Two-stage text-to-image retrieval: the baseline ranks the full
/// gallery, the compositional scorer re-orders the top `k_rerank`.
pub fn run_retrieval(
    engine: &ScoreEngine,
    ds: &RetrievalDataset,
    opts: &EvalOptions,
    k_rerank: usize,
) -> Result<EvalReport, PipelineError> {
    let pairs = match opts.limit {
        Some(n) => ds.pairs.iter().take(n).cloned().collect::<Vec<_>>(),
        None => ds.pairs.clone(),
    };
    let root = ds.manifest.root.clone();
    let n = pairs.len();
    let pool = pool_for(engine, opts)?;

    // Stage 1: full baseline matrix (queries are captions, gallery is
    // the image column).
    let stage1: Vec<Vec<f64>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|q| {
                (0..n)
                    .map(|g| {
                        score_pair(
                            engine,
                            &root,
                            &pairs[g].image,
                            &pairs[q].caption,
                            None,
                            ScorerKind::Baseline,
                        )
                    })
                    .collect::<Result<Vec<f64>, PipelineError>>()
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    // Stage 2: rerank scores for the in-window pairs only.
    let window = k_rerank.min(n);
    let mut wanted: Vec<(usize, usize)> = Vec::new();
    for (q, row) in stage1.iter().enumerate() {
        let mut order: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(g, _) in order.iter().take(window) {
            wanted.push((q, g));
        }
    }
    let rerank_scores: Vec<((usize, usize), f64)> = pool.install(|| {
        wanted
            .par_iter()
            .map(|&(q, g)| {
                let s = score_pair(
                    engine,
                    &root,
                    &pairs[g].image,
                    &pairs[q].caption,
                    None,
                    opts.scorer,
                )?;
                Ok(((q, g), s))
            })
            .collect::<Result<Vec<_>, PipelineError>>()
    })?;
    let rerank_map: HashMap<(usize, usize), f64> = rerank_scores.into_iter().collect();

    let relevant: Vec<usize> = (0..n).collect();
    let recalls = eval_retrieval(
        n,
        &relevant,
        |q, g| -> Result<f64, String> { Ok(stage1[q][g]) },
        |q, g| -> Result<f64, String> {
            rerank_map
                .get(&(q, g))
                .copied()
                .ok_or_else(|| format!("rerank score missing for ({q},{g})"))
        },
        k_rerank,
    )
    .map_err(|msg| PipelineError::Io(std::io::Error::other(msg)))?;

    let mut out = EvalReport::empty(config_json(engine, opts, &ds.manifest), opts.seed, n);
    out.recall = Some(recalls.into());
    Ok(out)
}

/// One evaluation per subimage configuration, sharing the embedding cache.
pub fn run_ablation(
    engine: &ScoreEngine,
    ds: &MatchingDataset,
    opts: &EvalOptions,
    configs: &[SubimageConfig],
) -> Result<Vec<(String, EvalReport)>, PipelineError> {
    let mut out = Vec::with_capacity(configs.len());
    for &sub_cfg in configs {
        let mut cfg = engine.config.clone();
        cfg.subimage_config = sub_cfg;
        let variant = engine.with_config(cfg);
        let run = run_matching(&variant, ds, opts)?;
        out.push((sub_cfg.as_str().to_string(), run.report));
    }
    Ok(out)
}

/// Fixed-width text table for ablation results.
pub fn ablation_table(rows: &[(String, EvalReport)]) -> String {
    let mut out = format!(
        "{:<24} {:>10} {:>10} {:>10} {:>10}\n",
        "config", "overall", "subject", "predicate", "object"
    );
    for (name, report) in rows {
        let overall = report
            .overall
            .map(|a| format!("{:.4}", a))
            .unwrap_or_else(|| "-".into());
        let (s, p, o) = report
            .by_neg_type
            .as_ref()
            .map(|b| {
                (
                    format!("{:.4}", b.subject.accuracy),
                    format!("{:.4}", b.predicate.accuracy),
                    format!("{:.4}", b.object.accuracy),
                )
            })
            .unwrap_or_else(|| ("-".into(), "-".into(), "-".into()));
        out.push_str(&format!(
            "{name:<24} {overall:>10} {s:>10} {p:>10} {o:>10}\n"
        ));
    }
    out
}

/// CSV of per-instance matching scores.
pub fn match_rows_csv(rows: &[MatchScoreRow]) -> String {
    let mut out = String::from("id,pos_score,neg_score,error\n");
    for r in rows {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.17}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.id,
            fmt(r.pos_score),
            fmt(r.neg_score),
            r.error.clone().unwrap_or_default().replace(',', ";")
        ));
    }
    out
}

pub fn wino_rows_csv(rows: &[WinoScoreRow]) -> String {
    let mut out = String::from("id,c0_i0,c0_i1,c1_i0,c1_i1\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.17},{:.17},{:.17},{:.17}\n",
            r.id, r.c0_i0, r.c0_i1, r.c1_i0, r.c1_i1
        ));
    }
    out
}
