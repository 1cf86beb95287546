//! Dataset ingestion: canonical JSONL schemas, validation, and manifests.
//!
//! Canonical row shapes (one JSON object per line):
//! - matching (comvg / svo_probes):
//!   `{"id","sentence","triplet":{"subject","predicate","object"},"neg_type","pos_image","neg_image"}`
//! - winoground: `{"id","caption_0","caption_1","image_0","image_1"}`
//! - retrieval: `{"image","caption"}`
//! - vl_checklist: `{"image","pos_caption","neg_caption","category"}`
//! - caption sidecar: `{"image","captions":[{"text","box":[x1,y1,x2,y2]}]}`
//!
//! Image refs are paths relative to the JSONL file's directory. Every
//! referenced image must exist at load time unless `lenient`, which skips
//! the offending row and counts it.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use comclip_core::metrics::{
    MatchInstance, VlCategory, VlChecklistPair, WinogroundInstance,
};
use comclip_core::parse::EntityTriple;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("missing image at line {line}: {path}")]
    MissingImage { line: usize, path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Comvg,
    SvoProbes,
    Winoground,
    VlChecklist,
    Retrieval,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Comvg => "comvg",
            DatasetKind::SvoProbes => "svo_probes",
            DatasetKind::Winoground => "winoground",
            DatasetKind::VlChecklist => "vl_checklist",
            DatasetKind::Retrieval => "retrieval",
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "comvg" => Ok(Self::Comvg),
            "svo_probes" => Ok(Self::SvoProbes),
            "winoground" => Ok(Self::Winoground),
            "vl_checklist" => Ok(Self::VlChecklist),
            "retrieval" => Ok(Self::Retrieval),
            other => Err(format!("unknown dataset kind '{other}'")),
        }
    }
}

/// Where a dataset came from and what it contained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetManifest {
    pub kind: DatasetKind,
    pub root: PathBuf,
    pub count: usize,
    /// Hex sha256 of the JSONL file bytes.
    pub checksum: String,
}

fn read_lines(path: &Path) -> Result<(Vec<String>, String, PathBuf), DatasetError> {
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let checksum = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| DatasetError::Schema {
        line: 0,
        message: "file is not valid UTF-8".into(),
    })?;
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((text.lines().map(str::to_string).collect(), checksum, root))
}

fn schema_err(line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Schema {
        line,
        message: message.into(),
    }
}

struct ImageChecker {
    root: PathBuf,
    seen: HashMap<PathBuf, bool>,
}

impl ImageChecker {
    fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            seen: HashMap::new(),
        }
    }

    fn exists(&mut self, rel: &str) -> bool {
        let full = self.root.join(rel);
        *self
            .seen
            .entry(full.clone())
            .or_insert_with(|| full.is_file())
    }
}

/// Per-negative-type instance counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct NegTypeCounts {
    pub subject: usize,
    pub predicate: usize,
    pub object: usize,
}

impl NegTypeCounts {
    pub fn total(&self) -> usize {
        self.subject + self.predicate + self.object
    }
}

pub fn neg_type_counts(instances: &[MatchInstance]) -> NegTypeCounts {
    let mut c = NegTypeCounts::default();
    for i in instances {
        match i.neg_type {
            comclip_core::parse::Role::Subject => c.subject += 1,
            comclip_core::parse::Role::Predicate => c.predicate += 1,
            comclip_core::parse::Role::Object => c.object += 1,
        }
    }
    c
}

#[derive(Debug)]
pub struct MatchingDataset {
    pub instances: Vec<MatchInstance>,
    pub manifest: DatasetManifest,
    pub counts: NegTypeCounts,
    pub skipped: usize,
}

/// Load a ComVG/SVO-Probes style matching file.
pub fn load_matching(
    path: &Path,
    kind: DatasetKind,
    lenient: bool,
) -> Result<MatchingDataset, DatasetError> {
    let (lines, checksum, root) = read_lines(path)?;
    let mut checker = ImageChecker::new(&root);
    let mut instances = Vec::new();
    let mut ids = HashSet::new();
    let mut skipped = 0usize;
    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut inst: MatchInstance = serde_json::from_str(line)
            .map_err(|e| schema_err(line_no, format!("bad row: {e}")))?;
        inst.triplet = EntityTriple::new(
            &inst.triplet.subject,
            &inst.triplet.predicate,
            &inst.triplet.object,
        )
        .map_err(|e| schema_err(line_no, format!("bad triplet: {e}")))?;
        if inst.pos_image == inst.neg_image {
            return Err(schema_err(line_no, "pos_image equals neg_image"));
        }
        if !ids.insert(inst.id.clone()) {
            return Err(schema_err(line_no, format!("duplicate id '{}'", inst.id)));
        }
        let mut missing = None;
        for img in [&inst.pos_image, &inst.neg_image] {
            if !checker.exists(img) {
                missing = Some(img.clone());
                break;
            }
        }
        if let Some(img) = missing {
            if lenient {
                log::warn!("skipping line {line_no}: missing image {img}");
                skipped += 1;
                continue;
            }
            return Err(DatasetError::MissingImage {
                line: line_no,
                path: img,
            });
        }
        instances.push(inst);
    }
    let counts = neg_type_counts(&instances);
    Ok(MatchingDataset {
        manifest: DatasetManifest {
            kind,
            root,
            count: instances.len(),
            checksum,
        },
        counts,
        skipped,
        instances,
    })
}

#[derive(Debug)]
pub struct WinogroundDataset {
    pub instances: Vec<WinogroundInstance>,
    pub manifest: DatasetManifest,
    pub skipped: usize,
    /// Set when the file does not hold the expected 400 instances.
    pub size_warning: Option<String>,
}

pub fn load_winoground(path: &Path, lenient: bool) -> Result<WinogroundDataset, DatasetError> {
    const EXPECTED: usize = 400;
    let (lines, checksum, root) = read_lines(path)?;
    let mut checker = ImageChecker::new(&root);
    let mut instances = Vec::new();
    let mut ids = HashSet::new();
    let mut skipped = 0usize;
    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let inst: WinogroundInstance = serde_json::from_str(line)
            .map_err(|e| schema_err(line_no, format!("bad row: {e}")))?;
        if inst.caption_0 == inst.caption_1 {
            return Err(schema_err(line_no, "captions are identical"));
        }
        if inst.image_0 == inst.image_1 {
            return Err(schema_err(line_no, "images are identical"));
        }
        if !ids.insert(inst.id.clone()) {
            return Err(schema_err(line_no, format!("duplicate id '{}'", inst.id)));
        }
        let mut missing = None;
        for img in [&inst.image_0, &inst.image_1] {
            if !checker.exists(img) {
                missing = Some(img.clone());
                break;
            }
        }
        if let Some(img) = missing {
            if lenient {
                log::warn!("skipping line {line_no}: missing image {img}");
                skipped += 1;
                continue;
            }
            return Err(DatasetError::MissingImage {
                line: line_no,
                path: img,
            });
        }
        instances.push(inst);
    }
    let size_warning = if instances.is_empty() {
        Some("winoground file is empty".to_string())
    } else if instances.len() != EXPECTED {
        Some(format!(
            "expected {EXPECTED} winoground instances, found {}",
            instances.len()
        ))
    } else {
        None
    };
    if let Some(w) = &size_warning {
        log::warn!("{w}");
    }
    Ok(WinogroundDataset {
        manifest: DatasetManifest {
            kind: DatasetKind::Winoground,
            root,
            count: instances.len(),
            checksum,
        },
        skipped,
        size_warning,
        instances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalPair {
    pub image: String,
    pub caption: String,
}

#[derive(Debug)]
pub struct RetrievalDataset {
    pub pairs: Vec<RetrievalPair>,
    pub manifest: DatasetManifest,
    pub skipped: usize,
}

pub fn load_retrieval(path: &Path, lenient: bool) -> Result<RetrievalDataset, DatasetError> {
    let (lines, checksum, root) = read_lines(path)?;
    let mut checker = ImageChecker::new(&root);
    let mut pairs = Vec::new();
    let mut skipped = 0usize;
    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let pair: RetrievalPair = serde_json::from_str(line)
            .map_err(|e| schema_err(line_no, format!("bad row: {e}")))?;
        if pair.caption.trim().is_empty() {
            return Err(schema_err(line_no, "empty caption"));
        }
        if !checker.exists(&pair.image) {
            if lenient {
                skipped += 1;
                continue;
            }
            return Err(DatasetError::MissingImage {
                line: line_no,
                path: pair.image,
            });
        }
        pairs.push(pair);
    }
    Ok(RetrievalDataset {
        manifest: DatasetManifest {
            kind: DatasetKind::Retrieval,
            root,
            count: pairs.len(),
            checksum,
        },
        skipped,
        pairs,
    })
}

#[derive(Debug)]
pub struct VlChecklistDataset {
    pub pairs: Vec<VlChecklistPair>,
    pub manifest: DatasetManifest,
    pub skipped: usize,
}

#[derive(Deserialize)]
struct VlRow {
    image: String,
    pos_caption: String,
    neg_caption: String,
    category: String,
}

pub fn load_vl_checklist(path: &Path, lenient: bool) -> Result<VlChecklistDataset, DatasetError> {
    let (lines, checksum, root) = read_lines(path)?;
    let mut checker = ImageChecker::new(&root);
    let mut pairs = Vec::new();
    let mut skipped = 0usize;
    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: VlRow = serde_json::from_str(line)
            .map_err(|e| schema_err(line_no, format!("bad row: {e}")))?;
        let category = match row.category.as_str() {
            "Attribute" => VlCategory::Attribute,
            "Object" => VlCategory::Object,
            "Relation" => VlCategory::Relation,
            other => {
                return Err(schema_err(
                    line_no,
                    format!("unknown category '{other}' (expected Attribute|Object|Relation)"),
                ))
            }
        };
        if !checker.exists(&row.image) {
            if lenient {
                skipped += 1;
                continue;
            }
            return Err(DatasetError::MissingImage {
                line: line_no,
                path: row.image,
            });
        }
        pairs.push(VlChecklistPair {
            image: row.image,
            pos_caption: row.pos_caption,
            neg_caption: row.neg_caption,
            category,
        });
    }
    Ok(VlChecklistDataset {
        manifest: DatasetManifest {
            kind: DatasetKind::VlChecklist,
            root,
            count: pairs.len(),
            checksum,
        },
        skipped,
        pairs,
    })
}

/// Caption sidecar rows, keyed by image ref. Boxes are kept raw and
/// validated against the image dimensions at scoring time.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawCaptionRow {
    pub image: String,
    pub captions: Vec<RawCaption>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawCaption {
    pub text: String,
    #[serde(rename = "box")]
    pub coords: [i64; 4],
}

pub fn load_captions_sidecar(
    path: &Path,
) -> Result<HashMap<String, Vec<RawCaption>>, DatasetError> {
    let (lines, _, _) = read_lines(path)?;
    let mut map = HashMap::new();
    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: RawCaptionRow = serde_json::from_str(line)
            .map_err(|e| schema_err(line_no, format!("bad row: {e}")))?;
        map.insert(row.image, row.captions);
    }
    Ok(map)
}

/// Serialize matching instances back to canonical JSONL.
pub fn matching_to_jsonl(instances: &[MatchInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&serde_json::to_string(inst).expect("serializable row"));
        out.push('\n');
    }
    out
}

pub fn winoground_to_jsonl(instances: &[WinogroundInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&serde_json::to_string(inst).expect("serializable row"));
        out.push('\n');
    }
    out
}
