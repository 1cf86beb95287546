//! The `comclip` command-line interface.
//!
//! Subcommands: parse, ground, score, eval, rerank, ablate, cache.
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
//! With `--json-errors`, failures also emit a machine-readable JSON
//! object on stderr.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use comclip_core::compose::{SubimageConfig, WeightingMode};
use comclip_core::image::FillPolicy;
use comclip_core::parse::parse_svo_rule_based;

use crate::cache::EmbeddingCache;
use crate::client::{CaptionerClient, EncoderClient, LlmClient, TextCompletion};
use crate::config::RunConfig;
use crate::dataset::{
    load_captions_sidecar, load_matching, load_retrieval, load_vl_checklist, load_winoground,
    DatasetKind,
};
use crate::encoder::{EncoderBackend, MockBackend, RemoteBackend};
use crate::evalrun::{
    ablation_table, match_rows_csv, run_ablation, run_matching, run_retrieval, run_vl_checklist,
    run_winoground, wino_rows_csv, EvalOptions, ParserChoice, ScorerKind,
};
use crate::imgio::{load_image, save_png};
use crate::pipeline::{
    build_plan_pixels, ground_entities, parse_svo_llm, plan_subimages, AlignerMode, ParserMode,
    PipelineError, ScoreEngine,
};

#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
            AppError::Backend(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            AppError::Usage(_) => "usage",
            AppError::Data(_) => "data",
            AppError::Backend(_) => "backend",
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Data(m) | AppError::Backend(m) => m,
        }
    }
}

impl From<PipelineError> for AppError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::Encoder(_) | PipelineError::Client(_) => AppError::Backend(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<crate::dataset::DatasetError> for AppError {
    fn from(e: crate::dataset::DatasetError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<crate::imgio::ImgIoError> for AppError {
    fn from(e: crate::imgio::ImgIoError) -> Self {
        AppError::Data(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "comclip",
    about = "Training-free compositional image-text matching",
    version
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// TOML run-config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Emit machine-readable JSON errors on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    /// Embedding cache directory (also COMCLIP_CACHE_DIR).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Disable the embedding cache entirely.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Encoder backend: "mock" or "remote".
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Embedding dimension (mock backend; must match remote services).
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Encoder service endpoint for the remote backend.
    #[arg(long, global = true)]
    encoder_endpoint: Option<String>,
    /// Stable backend identity for cache keys (required for remote).
    #[arg(long, global = true)]
    backend_id: Option<String>,
    /// Language-model service endpoint.
    #[arg(long, global = true)]
    llm_endpoint: Option<String>,
    /// Dense captioner service endpoint.
    #[arg(long, global = true)]
    captioner_endpoint: Option<String>,
    /// Fixture directory for LLM replies.
    #[arg(long, global = true)]
    fixtures_llm: Option<PathBuf>,
    /// Fixture directory for captioner replies.
    #[arg(long, global = true)]
    fixtures_captioner: Option<PathBuf>,
    /// Fixture directory for encoder replies.
    #[arg(long, global = true)]
    fixtures_encoder: Option<PathBuf>,
    /// Record live responses into the fixture directories.
    #[arg(long, global = true)]
    record_fixtures: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = CPU count).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Weighting mode: "softmax" or "raw_similarity".
    #[arg(long, global = true)]
    weighting: Option<String>,
    #[arg(long, global = true)]
    logit_scale: Option<f64>,
    /// Subimage configuration (full, all_black, omit_subject, ...).
    #[arg(long, global = true)]
    subimage_config: Option<String>,
    /// Background fill: "black" or "blur".
    #[arg(long, global = true)]
    fill: Option<String>,
    #[arg(long, global = true)]
    blur_radius_frac: Option<f64>,
    /// Encode tight crops instead of full-canvas masks.
    #[arg(long, global = true)]
    crop_tight: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract subject/predicate/object triplets from a sentence.
    Parse {
        #[arg(long)]
        text: String,
        /// Use the language-model parser (falls back to rule-based).
        #[arg(long)]
        llm: bool,
    },
    /// Ground a sentence's entities to image regions and dump subimages.
    Ground {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        text: String,
        /// Caption sidecar JSONL (ground-truth mode).
        #[arg(long)]
        captions: Option<PathBuf>,
        /// Directory to write subimage PNGs and the grounding map into.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Aligner: "lexical" or "llm".
        #[arg(long)]
        aligner: Option<String>,
        /// Parser: "rule" or "llm".
        #[arg(long)]
        parser: Option<String>,
    },
    /// Score one image against one sentence.
    Score {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long)]
        captions: Option<PathBuf>,
        /// Dump per-entity similarities and weights.
        #[arg(long)]
        explain: bool,
        #[arg(long)]
        parser: Option<String>,
        #[arg(long)]
        aligner: Option<String>,
    },
    /// Evaluate a dataset and emit an EvalReport JSON.
    Eval {
        /// comvg | svo_probes | winoground | vl_checklist
        #[arg(long)]
        dataset: String,
        /// Dataset JSONL file (image refs relative to its directory).
        #[arg(long)]
        data: PathBuf,
        /// "baseline" or "comclip".
        #[arg(long)]
        scorer: Option<String>,
        /// "rule", "llm", or "dataset" (ground-truth triplets).
        #[arg(long)]
        parser: Option<String>,
        #[arg(long)]
        captions: Option<PathBuf>,
        #[arg(long)]
        aligner: Option<String>,
        /// Write the report JSON here as well as stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-instance scores as CSV.
        #[arg(long)]
        scores_csv: Option<PathBuf>,
        /// Skip instances whose scorer fails instead of aborting.
        #[arg(long)]
        lenient: bool,
        /// Evaluate only the first N instances.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Two-stage retrieval: baseline ranks, the compositional scorer
    /// re-orders the top k.
    Rerank {
        /// Retrieval JSONL ({"image","caption"} rows).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        k_rerank: usize,
        #[arg(long)]
        captions: Option<PathBuf>,
        #[arg(long)]
        parser: Option<String>,
        #[arg(long)]
        aligner: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Run a grid of subimage configurations over a matching dataset.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated subimage configs, or "all".
        #[arg(long)]
        configs: String,
        /// comvg or svo_probes.
        #[arg(long, default_value = "comvg")]
        dataset: String,
        #[arg(long)]
        scorer: Option<String>,
        #[arg(long)]
        parser: Option<String>,
        #[arg(long)]
        captions: Option<PathBuf>,
        #[arg(long)]
        aligner: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lenient: bool,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Embedding cache maintenance.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand, Debug)]
enum CacheAction {
    /// Entry count and total bytes.
    Stats,
    /// Delete all cached embeddings.
    Clear,
}

/// Run the CLI; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message (including --help/--version,
            // which are not errors).
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let json_errors = cli.global.json_errors;
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            if json_errors {
                let payload = serde_json::json!({
                    "error": {
                        "exit_code": err.exit_code(),
                        "kind": err.kind(),
                        "message": err.message(),
                    }
                });
                eprintln!("{payload}");
            } else {
                eprintln!("error: {}", err.message());
            }
            err.exit_code()
        }
    }
}

fn merged_config(g: &GlobalArgs) -> Result<RunConfig, AppError> {
    let mut cfg = RunConfig::load(g.config.as_deref()).map_err(AppError::Usage)?;
    if let Some(dir) = &g.cache_dir {
        cfg.cache_dir = Some(dir.clone());
    }
    if g.no_cache {
        cfg.cache_dir = None;
    }
    if let Some(kind) = &g.backend {
        cfg.backend.kind = kind.clone();
    }
    if let Some(dim) = g.dim {
        cfg.backend.dim = dim;
    }
    if let Some(ep) = &g.encoder_endpoint {
        cfg.backend.endpoint = Some(ep.clone());
    }
    if let Some(id) = &g.backend_id {
        cfg.backend.id = Some(id.clone());
    }
    if let Some(ep) = &g.llm_endpoint {
        cfg.llm.endpoint = Some(ep.clone());
    }
    if let Some(ep) = &g.captioner_endpoint {
        cfg.captioner.endpoint = Some(ep.clone());
    }
    if let Some(d) = &g.fixtures_llm {
        cfg.fixtures.llm_dir = Some(d.clone());
    }
    if let Some(d) = &g.fixtures_captioner {
        cfg.fixtures.captioner_dir = Some(d.clone());
    }
    if let Some(d) = &g.fixtures_encoder {
        cfg.fixtures.encoder_dir = Some(d.clone());
    }
    if g.record_fixtures {
        cfg.fixtures.record = true;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(p) = g.parallelism {
        cfg.parallelism = p;
    }
    if let Some(w) = &g.weighting {
        cfg.composition.weighting_mode = match w.as_str() {
            "softmax" => WeightingMode::Softmax,
            "raw_similarity" => WeightingMode::RawSimilarity,
            other => return Err(AppError::Usage(format!("unknown weighting '{other}'"))),
        };
    }
    if let Some(s) = g.logit_scale {
        if s <= 0.0 {
            return Err(AppError::Usage("logit_scale must be positive".into()));
        }
        cfg.composition.logit_scale = s;
    }
    if let Some(sc) = &g.subimage_config {
        cfg.composition.subimage_config = sc.parse::<SubimageConfig>().map_err(AppError::Usage)?;
    }
    if let Some(f) = &g.fill {
        cfg.composition.fill = match f.as_str() {
            "black" => FillPolicy::Black,
            "blur" => FillPolicy::Blur,
            other => return Err(AppError::Usage(format!("unknown fill '{other}'"))),
        };
    }
    if let Some(b) = g.blur_radius_frac {
        cfg.composition.blur_radius_frac = b;
    }
    if g.crop_tight {
        cfg.composition.crop_tight = true;
    }
    Ok(cfg)
}

fn build_cache(cfg: &RunConfig) -> Result<Arc<EmbeddingCache>, AppError> {
    match &cfg.cache_dir {
        None => Ok(Arc::new(EmbeddingCache::disabled())),
        Some(dir) => EmbeddingCache::new(dir.clone())
            .map(Arc::new)
            .map_err(|e| AppError::Data(format!("cannot open cache dir: {e}"))),
    }
}

fn build_backend(cfg: &RunConfig) -> Result<Arc<dyn EncoderBackend>, AppError> {
    match cfg.backend.kind.as_str() {
        "mock" => Ok(Arc::new(MockBackend::new(cfg.backend.dim))),
        "remote" => {
            let id = cfg.backend.id.clone().ok_or_else(|| {
                AppError::Usage(
                    "remote backend requires a stable --backend-id for cache keys".into(),
                )
            })?;
            let client = EncoderClient::new(
                cfg.backend.endpoint.clone(),
                cfg.fixtures.mode_for(&cfg.fixtures.encoder_dir),
            );
            Ok(Arc::new(RemoteBackend::new(
                id,
                cfg.backend.dim,
                cfg.backend
                    .preprocessing
                    .clone()
                    .unwrap_or_else(|| "remote".into()),
                client,
            )))
        }
        other => Err(AppError::Usage(format!("unknown backend '{other}'"))),
    }
}

fn parse_parser_choice(s: Option<&str>) -> Result<ParserChoice, AppError> {
    match s {
        None => Ok(ParserChoice::Rule),
        Some(v) => v.parse().map_err(AppError::Usage),
    }
}

fn parse_scorer(s: Option<&str>) -> Result<ScorerKind, AppError> {
    match s {
        None => Ok(ScorerKind::Comclip),
        Some(v) => v.parse().map_err(AppError::Usage),
    }
}

fn parse_aligner(s: Option<&str>) -> Result<AlignerMode, AppError> {
    match s {
        None | Some("lexical") => Ok(AlignerMode::Lexical),
        Some("llm") => Ok(AlignerMode::Llm),
        Some(other) => Err(AppError::Usage(format!("unknown aligner '{other}'"))),
    }
}

fn build_engine(
    cfg: &RunConfig,
    captions_file: Option<&Path>,
    parser: ParserChoice,
    aligner: AlignerMode,
) -> Result<ScoreEngine, AppError> {
    let backend = build_backend(cfg)?;
    let cache = build_cache(cfg)?;
    let mut engine = ScoreEngine::new(backend, cache);
    engine.config = cfg.composition.clone();
    engine.parser_mode = match parser {
        ParserChoice::Llm => ParserMode::Llm,
        _ => ParserMode::RuleBased,
    };
    engine.aligner_mode = aligner;

    let needs_llm = matches!(parser, ParserChoice::Llm) || matches!(aligner, AlignerMode::Llm);
    if needs_llm {
        engine.llm = Some(Arc::new(LlmClient::new(cfg.llm_client_config())) as Arc<dyn TextCompletion>);
    }

    engine.captions = if let Some(path) = captions_file {
        crate::pipeline::CaptionProvider::Static(load_captions_sidecar(path)?)
    } else if cfg.captioner.endpoint.is_some() || cfg.fixtures.captioner_dir.is_some() {
        crate::pipeline::CaptionProvider::Client(Arc::new(CaptionerClient::new(
            cfg.captioner.endpoint.clone(),
            cfg.fixtures.mode_for(&cfg.fixtures.captioner_dir),
        )))
    } else {
        crate::pipeline::CaptionProvider::None
    };
    Ok(engine)
}

fn print_and_save(value: &serde_json::Value, out: Option<&Path>) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(value).expect("serializable report");
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, format!("{text}\n"))
            .map_err(|e| AppError::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn eval_options(cfg: &RunConfig, scorer: ScorerKind, parser: ParserChoice, lenient: bool, limit: Option<usize>) -> EvalOptions {
    EvalOptions {
        scorer,
        parser,
        parallelism: cfg.effective_parallelism(),
        seed: cfg.seed,
        lenient,
        limit,
    }
}

fn execute(cli: Cli) -> Result<(), AppError> {
    let cfg = merged_config(&cli.global)?;
    match cli.command {
        Command::Parse { text, llm } => {
            let parsed = if llm {
                let client = LlmClient::new(cfg.llm_client_config());
                if text.trim().is_empty() {
                    return Err(AppError::Data("sentence is empty".into()));
                }
                parse_svo_llm(&text, &client, &std::sync::atomic::AtomicU64::new(0))
            } else {
                parse_svo_rule_based(&text).map_err(|e| AppError::Data(e.to_string()))?
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&parsed).expect("serializable parse")
            );
            Ok(())
        }
        Command::Ground {
            image,
            text,
            captions,
            out,
            aligner,
            parser,
        } => {
            let aligner = parse_aligner(aligner.as_deref())?;
            let parser = parse_parser_choice(parser.as_deref())?;
            let engine = build_engine(&cfg, captions.as_deref(), parser, aligner)?;
            let img = load_image(&image)?;
            let ref_key = image.to_string_lossy().to_string();
            let parsed = engine.parse_sentence(&text)?;
            let caps = engine
                .captions
                .captions_for(&img, Some(&ref_key))
                .map_err(|e| AppError::Backend(e.to_string()))?;
            let grounding = ground_entities(
                &parsed.entities,
                &caps,
                engine.aligner_mode,
                engine.llm.as_deref(),
            );
            let mut payload = serde_json::json!({
                "entities": parsed.entities,
                "grounding": grounding,
                "captions": caps,
            });
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)
                    .map_err(|e| AppError::Data(format!("cannot create {}: {e}", dir.display())))?;
                let plans = plan_subimages(&parsed, &grounding, &engine.config);
                let mut files = Vec::new();
                for (entity, plan) in &plans {
                    let pixels = build_plan_pixels(
                        &img,
                        plan,
                        engine.config.fill_style(),
                        engine.config.crop_tight,
                    )
                    .map_err(PipelineError::from)?;
                    let name = format!("{}_{}.png", entity.role.as_str(), sanitize(&entity.word));
                    save_png(&pixels, &dir.join(&name))?;
                    files.push(name);
                }
                std::fs::write(
                    dir.join("grounding.json"),
                    serde_json::to_string_pretty(&payload).expect("serializable"),
                )
                .map_err(|e| AppError::Data(e.to_string()))?;
                payload["subimage_files"] = serde_json::json!(files);
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&payload).expect("serializable")
            );
            Ok(())
        }
        Command::Score {
            image,
            text,
            captions,
            explain,
            parser,
            aligner,
        } => {
            let aligner = parse_aligner(aligner.as_deref())?;
            let parser = parse_parser_choice(parser.as_deref())?;
            if parser == ParserChoice::Dataset {
                return Err(AppError::Usage(
                    "--parser dataset is only meaningful for eval/ablate".into(),
                ));
            }
            let engine = build_engine(&cfg, captions.as_deref(), parser, aligner)?;
            let img = load_image(&image)?;
            let ref_key = image.to_string_lossy().to_string();
            let result = engine.score(&img, Some(&ref_key), &text)?;
            let payload = if explain {
                result.explain_json()
            } else {
                serde_json::json!({
                    "global_score": result.global_score,
                    "final_score": result.final_score,
                })
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&payload).expect("serializable")
            );
            Ok(())
        }
        Command::Eval {
            dataset,
            data,
            scorer,
            parser,
            captions,
            aligner,
            out,
            scores_csv,
            lenient,
            limit,
        } => {
            let kind: DatasetKind = dataset.parse().map_err(AppError::Usage)?;
            let scorer = parse_scorer(scorer.as_deref())?;
            let parser = parse_parser_choice(parser.as_deref())?;
            let aligner = parse_aligner(aligner.as_deref())?;
            let engine = build_engine(&cfg, captions.as_deref(), parser, aligner)?;
            let opts = eval_options(&cfg, scorer, parser, lenient, limit);
            match kind {
                DatasetKind::Comvg | DatasetKind::SvoProbes => {
                    let ds = load_matching(&data, kind, lenient)?;
                    let mut run = run_matching(&engine, &ds, &opts)?;
                    if let Some(csv_path) = &scores_csv {
                        std::fs::write(csv_path, match_rows_csv(&run.rows))
                            .map_err(|e| AppError::Data(e.to_string()))?;
                        run.report.scores_csv = Some(csv_path.display().to_string());
                    }
                    let value = serde_json::to_value(&run.report).expect("serializable");
                    print_and_save(&value, out.as_deref())
                }
                DatasetKind::Winoground => {
                    let ds = load_winoground(&data, lenient)?;
                    let mut run = run_winoground(&engine, &ds, &opts)?;
                    if let Some(csv_path) = &scores_csv {
                        std::fs::write(csv_path, wino_rows_csv(&run.rows))
                            .map_err(|e| AppError::Data(e.to_string()))?;
                        run.report.scores_csv = Some(csv_path.display().to_string());
                    }
                    let value = serde_json::to_value(&run.report).expect("serializable");
                    print_and_save(&value, out.as_deref())
                }
                DatasetKind::VlChecklist => {
                    let ds = load_vl_checklist(&data, lenient)?;
                    let report = run_vl_checklist(&engine, &ds, &opts)?;
                    let value = serde_json::to_value(&report).expect("serializable");
                    print_and_save(&value, out.as_deref())
                }
                DatasetKind::Retrieval => Err(AppError::Usage(
                    "use the rerank subcommand for retrieval datasets".into(),
                )),
            }
        }
        Command::Rerank {
            data,
            k_rerank,
            captions,
            parser,
            aligner,
            out,
            limit,
        } => {
            let parser = parse_parser_choice(parser.as_deref())?;
            let aligner = parse_aligner(aligner.as_deref())?;
            let engine = build_engine(&cfg, captions.as_deref(), parser, aligner)?;
            let ds = load_retrieval(&data, false)?;
            let opts = eval_options(&cfg, ScorerKind::Comclip, parser, false, limit);
            let report = run_retrieval(&engine, &ds, &opts, k_rerank)?;
            let value = serde_json::to_value(&report).expect("serializable");
            print_and_save(&value, out.as_deref())
        }
        Command::Ablate {
            data,
            configs,
            dataset,
            scorer,
            parser,
            captions,
            aligner,
            out,
            lenient,
            limit,
        } => {
            let kind: DatasetKind = dataset.parse().map_err(AppError::Usage)?;
            if !matches!(kind, DatasetKind::Comvg | DatasetKind::SvoProbes) {
                return Err(AppError::Usage(
                    "ablate expects a matching dataset (comvg or svo_probes)".into(),
                ));
            }
            let grid: Vec<SubimageConfig> = if configs == "all" {
                SubimageConfig::ALL.to_vec()
            } else {
                configs
                    .split(',')
                    .map(|s| s.trim().parse::<SubimageConfig>())
                    .collect::<Result<_, _>>()
                    .map_err(AppError::Usage)?
            };
            if grid.is_empty() {
                return Err(AppError::Usage("no configs given".into()));
            }
            let scorer = parse_scorer(scorer.as_deref())?;
            let parser = parse_parser_choice(parser.as_deref())?;
            let aligner = parse_aligner(aligner.as_deref())?;
            let engine = build_engine(&cfg, captions.as_deref(), parser, aligner)?;
            let ds = load_matching(&data, kind, lenient)?;
            let opts = eval_options(&cfg, scorer, parser, lenient, limit);
            let rows = run_ablation(&engine, &ds, &opts, &grid)?;
            print!("{}", ablation_table(&rows));
            if let Some(path) = out {
                let value = serde_json::to_value(&rows).expect("serializable");
                std::fs::write(
                    &path,
                    format!(
                        "{}\n",
                        serde_json::to_string_pretty(&value).expect("serializable")
                    ),
                )
                .map_err(|e| AppError::Data(e.to_string()))?;
            }
            Ok(())
        }
        Command::Cache { action } => {
            let Some(dir) = &cfg.cache_dir else {
                return Err(AppError::Usage(
                    "no cache directory configured (--cache-dir or COMCLIP_CACHE_DIR)".into(),
                ));
            };
            let cache = EmbeddingCache::new(dir.clone())
                .map_err(|e| AppError::Data(format!("cannot open cache dir: {e}")))?;
            match action {
                CacheAction::Stats => {
                    let stats = cache.stats().map_err(|e| AppError::Data(e.to_string()))?;
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&stats).expect("serializable")
                    );
                }
                CacheAction::Clear => {
                    let removed = cache.clear().map_err(|e| AppError::Data(e.to_string()))?;
                    println!("{}", serde_json::json!({ "removed": removed }));
                }
            }
            Ok(())
        }
    }
}

fn sanitize(word: &str) -> String {
    word.chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect()
}
