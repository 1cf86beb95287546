//! Shared helpers for the integration suites: seeded synthetic images,
//! datasets on disk, and straight-line reference implementations kept
//! independent of the library code they check.

#![allow(dead_code)]

use std::path::Path;

use comclip::imgio::save_png;
use comclip_core::image::ImageBuf;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random image with no all-zero pixels (so the mock backend never hits
/// its zero special case by accident).
pub fn random_image(rng: &mut ChaCha8Rng, width: u32, height: u32) -> ImageBuf {
    let px: Vec<u8> = (0..(width as usize * height as usize * 3))
        .map(|_| rng.gen_range(1..=255u8))
        .collect();
    ImageBuf::new(width, height, px).unwrap()
}

/// Independent re-derivation of the mock encoder expansion rule.
pub fn reference_mock(input: &[u8], dim: usize) -> Vec<f32> {
    if input.iter().all(|&b| b == 0) {
        return vec![0.0; dim];
    }
    let seed = Sha256::digest(input);
    let mut raw: Vec<f64> = Vec::new();
    let mut counter: u32 = 0;
    while raw.len() < dim {
        let mut h = Sha256::new();
        h.update(seed);
        h.update(counter.to_le_bytes());
        for chunk in h.finalize().chunks_exact(4) {
            if raw.len() == dim {
                break;
            }
            let w = u32::from_le_bytes(chunk.try_into().unwrap());
            raw.push((w as f64 / 4294967296.0) * 2.0 - 1.0);
        }
        counter += 1;
    }
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|&v| (v / norm) as f32).collect()
}

/// Independent mask construction: source pixels inside any box, zero
/// outside.
pub fn reference_black_mask(src: &ImageBuf, boxes: &[(u32, u32, u32, u32)]) -> ImageBuf {
    let (w, h) = (src.width(), src.height());
    let mut px = vec![0u8; (w * h * 3) as usize];
    for y in 0..h {
        for x in 0..w {
            let inside = boxes
                .iter()
                .any(|&(x1, y1, x2, y2)| x >= x1 && x < x2 && y >= y1 && y < y2);
            if inside {
                let p = src.pixel(x, y);
                let i = ((y * w + x) * 3) as usize;
                px[i] = p[0];
                px[i + 1] = p[1];
                px[i + 2] = p[2];
            }
        }
    }
    ImageBuf::new(w, h, px).unwrap()
}

pub fn reference_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn reference_softmax(sims: &[f64], scale: f64) -> Vec<f64> {
    let max = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = sims.iter().map(|&s| (scale * (s - max)).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn f32s_to_f64(values: &[f32]) -> Vec<f64> {
    values.iter().map(|&v| v as f64).collect()
}

/// Word pools whose sentences the rule parser handles exactly.
pub const SUBJECTS: &[&str] = &["man", "woman", "dog", "cat", "girl", "boy", "player", "child"];
pub const PREDICATES: &[&str] = &[
    "hitting", "holding", "riding", "carrying", "watching", "pushing", "chasing",
];
pub const OBJECTS: &[&str] = &[
    "baseball",
    "skateboard",
    "horse",
    "pizza",
    "sign",
    "frisbee",
    "bicycle",
    "guitar",
];

pub fn template_sentence(s: &str, p: &str, o: &str) -> String {
    format!("A {s} is {p} a {o}")
}

/// Write `n` distinct PNGs into `dir`, returning their file names.
pub fn write_image_pool_sized(
    dir: &Path,
    n: usize,
    seed: u64,
    width: u32,
    height: u32,
) -> Vec<String> {
    let mut r = rng(seed);
    let mut names = Vec::with_capacity(n);
    for i in 0..n {
        let img = random_image(&mut r, width, height);
        let name = format!("img_{i:03}.png");
        save_png(&img, &dir.join(&name)).unwrap();
        names.push(name);
    }
    names
}

pub fn write_image_pool(dir: &Path, n: usize, seed: u64) -> Vec<String> {
    write_image_pool_sized(dir, n, seed, 16, 12)
}

/// One canonical matching row.
pub fn matching_row(
    id: usize,
    s: &str,
    p: &str,
    o: &str,
    neg_type: &str,
    pos: &str,
    neg: &str,
) -> String {
    format!(
        r#"{{"id":"{id}","sentence":"{sent}","triplet":{{"subject":"{s}","predicate":"{p}","object":"{o}"}},"neg_type":"{neg_type}","pos_image":"{pos}","neg_image":"{neg}"}}"#,
        sent = template_sentence(s, p, o),
    )
}

/// Synthetic matching dataset with the given per-negative-type counts.
/// Returns the JSONL path.
pub fn write_matching_dataset(
    dir: &Path,
    subject_rows: usize,
    predicate_rows: usize,
    object_rows: usize,
    seed: u64,
) -> std::path::PathBuf {
    let pool = write_image_pool(dir, 8, seed);
    let mut r = rng(seed ^ 0x5eed);
    let mut lines = Vec::new();
    let mut id = 0usize;
    for (neg_type, count) in [
        ("subject", subject_rows),
        ("predicate", predicate_rows),
        ("object", object_rows),
    ] {
        for _ in 0..count {
            let s = SUBJECTS[r.gen_range(0..SUBJECTS.len())];
            let p = PREDICATES[r.gen_range(0..PREDICATES.len())];
            let o = OBJECTS[r.gen_range(0..OBJECTS.len())];
            let pos = r.gen_range(0..pool.len());
            let neg = (pos + 1 + r.gen_range(0..pool.len() - 1)) % pool.len();
            lines.push(matching_row(id, s, p, o, neg_type, &pool[pos], &pool[neg]));
            id += 1;
        }
    }
    let path = dir.join("matching.jsonl");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

/// Caption sidecar granting every subject/object word a box in every
/// pool image, so lexical grounding always succeeds.
pub fn write_caption_sidecar(dir: &Path, image_names: &[String], seed: u64) -> std::path::PathBuf {
    let mut r = rng(seed ^ 0xcaf3);
    let mut lines = Vec::new();
    for name in image_names {
        let mut caps = Vec::new();
        for word in SUBJECTS.iter().chain(OBJECTS.iter()) {
            let x1 = r.gen_range(0..8u32);
            let y1 = r.gen_range(0..6u32);
            let x2 = r.gen_range((x1 + 2)..=16u32.min(x1 + 9));
            let y2 = r.gen_range((y1 + 2)..=12u32.min(y1 + 7));
            caps.push(format!(
                r#"{{"text":"a {word} in the scene","box":[{x1},{y1},{x2},{y2}]}}"#
            ));
        }
        lines.push(format!(
            r#"{{"image":"{name}","captions":[{}]}}"#,
            caps.join(",")
        ));
    }
    let path = dir.join("captions.jsonl");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

/// Winoground-format dataset over fresh images; scores with the mock
/// backend are arbitrary but deterministic.
pub fn write_winoground_dataset(dir: &Path, n: usize, seed: u64) -> std::path::PathBuf {
    let pool = write_image_pool(dir, (2 * n).max(2), seed);
    let mut r = rng(seed ^ 0x21b0);
    let mut lines = Vec::new();
    for i in 0..n {
        let si = r.gen_range(0..SUBJECTS.len());
        let s0 = SUBJECTS[si];
        let s1 = SUBJECTS[(si + 1) % SUBJECTS.len()]; // captions always differ
        let p = PREDICATES[r.gen_range(0..PREDICATES.len())];
        let o0 = OBJECTS[r.gen_range(0..OBJECTS.len())];
        let o1 = OBJECTS[r.gen_range(0..OBJECTS.len())];
        lines.push(format!(
            r#"{{"id":"{i}","caption_0":"{c0}","caption_1":"{c1}","image_0":"{i0}","image_1":"{i1}"}}"#,
            c0 = template_sentence(s0, p, o0),
            c1 = template_sentence(s1, p, o1),
            i0 = pool[2 * i],
            i1 = pool[2 * i + 1],
        ));
    }
    let path = dir.join("winoground.jsonl");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}
