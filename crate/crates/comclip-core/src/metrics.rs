//! Benchmark metrics: pairwise matching accuracy with negative-type
//! breakdown, Winoground text/image/group scores, per-category pos/neg
//! accuracy, and two-stage retrieval recall.
//!
//! Everything here is pure: scorers are injected as closures, so the
//! harness can precompute score tables in parallel and feed them in.
//! Comparisons use strict inequality throughout; ties count as incorrect.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::parse::{EntityTriple, Role};

/// One positive/negative image pair for a sentence, where the negative
/// differs in exactly one slot of the triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchInstance {
    pub id: String,
    pub sentence: String,
    pub triplet: EntityTriple,
    pub neg_type: Role,
    pub pos_image: String,
    pub neg_image: String,
}

/// Two captions and two images whose pairings must both be recovered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinogroundInstance {
    pub id: String,
    pub caption_0: String,
    pub caption_1: String,
    pub image_0: String,
    pub image_1: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VlCategory {
    Attribute,
    Object,
    Relation,
}

impl VlCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            VlCategory::Attribute => "Attribute",
            VlCategory::Object => "Object",
            VlCategory::Relation => "Relation",
        }
    }
}

/// One image with a positive and a perturbed caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VlChecklistPair {
    pub image: String,
    pub pos_caption: String,
    pub neg_caption: String,
    pub category: VlCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub correct: usize,
    pub total: usize,
}

impl Counts {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    fn add(&mut self, correct: bool) {
        self.total += 1;
        if correct {
            self.correct += 1;
        }
    }
}

/// Accuracy with the per-negative-type breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchingReport {
    pub overall: Counts,
    pub subject: Counts,
    pub predicate: Counts,
    pub object: Counts,
    /// Instances dropped in lenient mode because the scorer failed.
    pub skipped: usize,
}

impl MatchingReport {
    pub fn by_neg_type(&self, neg: Role) -> Counts {
        match neg {
            Role::Subject => self.subject,
            Role::Predicate => self.predicate,
            Role::Object => self.object,
        }
    }
}

/// Pairwise matching: an instance is correct iff the positive image
/// scores strictly higher than the negative for the sentence. With
/// `lenient`, instances whose scorer errors are skipped and counted.
pub fn eval_matching<E>(
    instances: &[MatchInstance],
    mut scorer: impl FnMut(&str, &str) -> Result<f64, E>,
    lenient: bool,
) -> Result<MatchingReport, E> {
    let mut report = MatchingReport::default();
    for inst in instances {
        let scores = (|| -> Result<(f64, f64), E> {
            Ok((
                scorer(&inst.pos_image, &inst.sentence)?,
                scorer(&inst.neg_image, &inst.sentence)?,
            ))
        })();
        let (pos, neg) = match scores {
            Ok(s) => s,
            Err(e) if lenient => {
                report.skipped += 1;
                let _ = e;
                continue;
            }
            Err(e) => return Err(e),
        };
        let correct = pos > neg;
        report.overall.add(correct);
        match inst.neg_type {
            Role::Subject => report.subject.add(correct),
            Role::Predicate => report.predicate.add(correct),
            Role::Object => report.object.add(correct),
        }
    }
    Ok(report)
}

/// Text/image/group flags for one 2x2 score matrix, `s[caption][image]`.
///
/// Text: each image's own caption wins at that image's column pairing;
/// image: each caption's own image wins; group: both. Strict inequality.
pub fn winoground_flags(s: &[[f64; 2]; 2]) -> (bool, bool, bool) {
    let text = s[0][0] > s[1][0] && s[1][1] > s[0][1];
    let image = s[0][0] > s[0][1] && s[1][1] > s[1][0];
    (text, image, text && image)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WinogroundScores {
    pub text: f64,
    pub image: f64,
    pub group: f64,
    pub n_instances: usize,
}

/// Winoground evaluation over `scorer(caption, image)`.
pub fn eval_winoground<E>(
    instances: &[WinogroundInstance],
    mut scorer: impl FnMut(&str, &str) -> Result<f64, E>,
) -> Result<WinogroundScores, E> {
    let mut text = 0usize;
    let mut image = 0usize;
    let mut group = 0usize;
    for inst in instances {
        let s = [
            [
                scorer(&inst.caption_0, &inst.image_0)?,
                scorer(&inst.caption_0, &inst.image_1)?,
            ],
            [
                scorer(&inst.caption_1, &inst.image_0)?,
                scorer(&inst.caption_1, &inst.image_1)?,
            ],
        ];
        let (t, i, g) = winoground_flags(&s);
        text += t as usize;
        image += i as usize;
        group += g as usize;
    }
    let n = instances.len();
    let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    Ok(WinogroundScores {
        text: frac(text),
        image: frac(image),
        group: frac(group),
        n_instances: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VlChecklistReport {
    pub attribute: Counts,
    pub object: Counts,
    pub relation: Counts,
    /// Unweighted mean of the per-category accuracies (over categories
    /// that have instances).
    pub average: f64,
}

/// Per-category positive-vs-negative caption accuracy.
pub fn eval_vl_checklist<E>(
    pairs: &[VlChecklistPair],
    mut scorer: impl FnMut(&str, &str) -> Result<f64, E>,
) -> Result<VlChecklistReport, E> {
    let mut report = VlChecklistReport::default();
    for pair in pairs {
        let pos = scorer(&pair.image, &pair.pos_caption)?;
        let neg = scorer(&pair.image, &pair.neg_caption)?;
        let correct = pos > neg;
        match pair.category {
            VlCategory::Attribute => report.attribute.add(correct),
            VlCategory::Object => report.object.add(correct),
            VlCategory::Relation => report.relation.add(correct),
        }
    }
    let cats = [report.attribute, report.object, report.relation];
    let present: Vec<f64> = cats
        .iter()
        .filter(|c| c.total > 0)
        .map(|c| c.accuracy())
        .collect();
    report.average = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RecallAtK {
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
}

/// Two-stage retrieval: rank the gallery with `baseline`, re-score only
/// the top `k_rerank` with `rerank` and re-sort them among themselves;
/// items below the window keep their stage-1 order. `relevant[q]` is the
/// single relevant gallery index for query `q`.
pub fn eval_retrieval<E>(
    n_gallery: usize,
    relevant: &[usize],
    mut baseline: impl FnMut(usize, usize) -> Result<f64, E>,
    mut rerank: impl FnMut(usize, usize) -> Result<f64, E>,
    k_rerank: usize,
) -> Result<RecallAtK, E> {
    let n_queries = relevant.len();
    let mut hits1 = 0usize;
    let mut hits5 = 0usize;
    let mut hits10 = 0usize;
    for (q, &rel) in relevant.iter().enumerate() {
        let mut stage1: Vec<(usize, f64)> = (0..n_gallery)
            .map(|g| Ok((g, baseline(q, g)?)))
            .collect::<Result<_, E>>()?;
        stage1.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let window = k_rerank.min(stage1.len());
        let mut top: Vec<(usize, usize, f64)> = Vec::with_capacity(window);
        for (pos, &(g, _)) in stage1.iter().take(window).enumerate() {
            top.push((g, pos, rerank(q, g)?));
        }
        // Within-window ties keep stage-1 order.
        top.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)));

        let final_rank = top
            .iter()
            .position(|&(g, _, _)| g == rel)
            .or_else(|| {
                stage1
                    .iter()
                    .skip(window)
                    .position(|&(g, _)| g == rel)
                    .map(|p| p + window)
            });
        if let Some(rank) = final_rank {
            if rank < 1 {
                hits1 += 1;
            }
            if rank < 5 {
                hits5 += 1;
            }
            if rank < 10 {
                hits10 += 1;
            }
        }
    }
    let frac = |c: usize| {
        if n_queries == 0 {
            0.0
        } else {
            c as f64 / n_queries as f64
        }
    };
    Ok(RecallAtK {
        r1: frac(hits1),
        r5: frac(hits5),
        r10: frac(hits10),
    })
}

/// Single-stage recall for comparison: ranking by `baseline` only.
pub fn eval_retrieval_single_stage<E>(
    n_gallery: usize,
    relevant: &[usize],
    mut baseline: impl FnMut(usize, usize) -> Result<f64, E>,
) -> Result<RecallAtK, E> {
    // Equivalent to a two-stage run whose reranker replays the baseline.
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(relevant.len());
    for q in 0..relevant.len() {
        scores.push(
            (0..n_gallery)
                .map(|g| baseline(q, g))
                .collect::<Result<_, E>>()?,
        );
    }
    eval_retrieval::<E>(
        n_gallery,
        relevant,
        |q, g| Ok(scores[q][g]),
        |q, g| Ok(scores[q][g]),
        n_gallery,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::{format, vec};
    use core::convert::Infallible;

    fn instance(id: &str, neg_type: Role) -> MatchInstance {
        MatchInstance {
            id: id.to_string(),
            sentence: format!("sentence {id}"),
            triplet: EntityTriple::new("man", "hitting", "baseball").unwrap(),
            neg_type,
            pos_image: format!("pos_{id}.png"),
            neg_image: format!("neg_{id}.png"),
        }
    }

    #[test]
    fn matching_strictly_greater_wins() {
        let insts = vec![instance("a", Role::Subject)];
        let r = eval_matching::<Infallible>(
            &insts,
            |img, _| Ok(if img.starts_with("pos") { 0.8 } else { 0.6 }),
            false,
        )
        .unwrap();
        assert_eq!(r.overall, Counts { correct: 1, total: 1 });
    }

    #[test]
    fn matching_tie_is_incorrect() {
        let insts = vec![instance("a", Role::Object)];
        let r = eval_matching::<Infallible>(&insts, |_, _| Ok(0.7), false).unwrap();
        assert_eq!(r.overall, Counts { correct: 0, total: 1 });
        assert_eq!(r.object, Counts { correct: 0, total: 1 });
    }

    #[test]
    fn matching_breakdown_counting() {
        // 3 instances: both subject ones correct, the object one wrong.
        let insts = vec![
            instance("s1", Role::Subject),
            instance("s2", Role::Subject),
            instance("o1", Role::Object),
        ];
        let r = eval_matching::<Infallible>(
            &insts,
            |img, sent| {
                let pos = img.starts_with("pos");
                Ok(match (sent.contains("o1"), pos) {
                    (false, true) => 0.9,
                    (false, false) => 0.1,
                    (true, true) => 0.2,
                    (true, false) => 0.8,
                })
            },
            false,
        )
        .unwrap();
        assert_eq!(r.overall, Counts { correct: 2, total: 3 });
        assert_eq!(r.subject, Counts { correct: 2, total: 2 });
        assert_eq!(r.object, Counts { correct: 0, total: 1 });
        assert_eq!(r.predicate, Counts { correct: 0, total: 0 });
        let sum = r.subject.total + r.predicate.total + r.object.total;
        assert_eq!(sum, r.overall.total);
    }

    #[test]
    fn matching_order_invariant() {
        let mut insts = vec![
            instance("a", Role::Subject),
            instance("b", Role::Predicate),
            instance("c", Role::Object),
        ];
        let scorer = |img: &str, _: &str| -> Result<f64, Infallible> {
            Ok(if img.contains("pos_a") || img.contains("pos_c") {
                1.0
            } else {
                0.5
            })
        };
        let r1 = eval_matching(&insts, scorer, false).unwrap();
        insts.reverse();
        let r2 = eval_matching(&insts, scorer, false).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn matching_lenient_skips_failures() {
        let insts = vec![instance("a", Role::Subject), instance("b", Role::Subject)];
        let r = eval_matching::<&str>(
            &insts,
            |img, sent| {
                if sent.contains('b') {
                    Err("backend down")
                } else {
                    Ok(if img.starts_with("pos") { 1.0 } else { 0.0 })
                }
            },
            true,
        )
        .unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(r.overall.total, 1);
        // and without lenient the error propagates
        let err = eval_matching::<&str>(&insts, |_, _| Err("down"), false);
        assert!(err.is_err());
    }

    #[test]
    fn winoground_perfect_matrix() {
        let (t, i, g) = winoground_flags(&[[0.9, 0.1], [0.2, 0.8]]);
        assert!(t && i && g);
    }

    #[test]
    fn winoground_mixed_matrix_fails_both() {
        // s(c1,i0)=0.95 beats s(c0,i0)=0.9 -> text fails;
        // s(c1,i1)=0.7 does not beat s(c1,i0)=0.95 -> image fails.
        let (t, i, g) = winoground_flags(&[[0.9, 0.8], [0.95, 0.7]]);
        assert!(!t);
        assert!(!i);
        assert!(!g);
    }

    #[test]
    fn winoground_all_equal_scores_zero() {
        let (t, i, g) = winoground_flags(&[[0.5, 0.5], [0.5, 0.5]]);
        assert!(!t && !i && !g);
    }

    #[test]
    fn winoground_group_bounded_by_text_and_image() {
        // Brute-force check over a small deterministic grid of matrices.
        let vals = [0.0, 0.25, 0.5, 0.75];
        for a in vals {
            for b in vals {
                for c in vals {
                    for d in vals {
                        let (t, i, g) = winoground_flags(&[[a, b], [c, d]]);
                        assert!(g <= (t && i));
                    }
                }
            }
        }
    }

    #[test]
    fn winoground_eval_fractions() {
        let insts = vec![
            WinogroundInstance {
                id: "0".into(),
                caption_0: "c0".into(),
                caption_1: "c1".into(),
                image_0: "i0".into(),
                image_1: "i1".into(),
            },
            WinogroundInstance {
                id: "1".into(),
                caption_0: "c2".into(),
                caption_1: "c3".into(),
                image_0: "i2".into(),
                image_1: "i3".into(),
            },
        ];
        // First instance perfect, second all ties.
        let r = eval_winoground::<Infallible>(&insts, |c, i| {
            Ok(match (c, i) {
                ("c0", "i0") | ("c1", "i1") => 0.9,
                ("c0", "i1") | ("c1", "i0") => 0.1,
                _ => 0.5,
            })
        })
        .unwrap();
        assert_eq!(r.text, 0.5);
        assert_eq!(r.image, 0.5);
        assert_eq!(r.group, 0.5);
        assert_eq!(r.n_instances, 2);
    }

    #[test]
    fn vl_checklist_average_is_category_mean() {
        let pair = |cat, id: usize| VlChecklistPair {
            image: format!("img{id}"),
            pos_caption: format!("pos{id}"),
            neg_caption: format!("neg{id}"),
            category: cat,
        };
        let pairs = vec![
            pair(VlCategory::Attribute, 0),
            pair(VlCategory::Object, 1),
            pair(VlCategory::Relation, 2),
        ];
        // Attribute and Relation correct, Object wrong.
        let r = eval_vl_checklist::<Infallible>(&pairs, |_, caption| {
            Ok(match caption {
                c if c.starts_with("pos") && !c.contains('1') => 0.9,
                c if c.starts_with("pos") => 0.1,
                _ => 0.5,
            })
        })
        .unwrap();
        assert_eq!(r.attribute.accuracy(), 1.0);
        assert_eq!(r.object.accuracy(), 0.0);
        assert_eq!(r.relation.accuracy(), 1.0);
        assert!((r.average - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn vl_checklist_table_average_arithmetic() {
        // Sanity-check the averaging convention on published-style numbers.
        let ave = (67.85f64 + 75.70 + 67.15) / 3.0;
        assert!((ave - 70.23).abs() < 0.005);
    }

    #[test]
    fn retrieval_rank_one_counts_everywhere() {
        let relevant = vec![0];
        let r = eval_retrieval::<Infallible>(
            20,
            &relevant,
            |_, g| Ok(1.0 / (g + 1) as f64),
            |_, g| Ok(1.0 / (g + 1) as f64),
            10,
        )
        .unwrap();
        assert_eq!((r.r1, r.r5, r.r10), (1.0, 1.0, 1.0));
    }

    #[test]
    fn retrieval_rank_11_cannot_enter_window() {
        // Baseline puts the relevant item at rank 11 (index 10); the
        // reranker adores it, but it is outside the window.
        let relevant = vec![10];
        let r = eval_retrieval::<Infallible>(
            20,
            &relevant,
            |_, g| Ok(-(g as f64)),
            |_, g| Ok(if g == 10 { 100.0 } else { 0.0 }),
            10,
        )
        .unwrap();
        assert_eq!((r.r1, r.r5, r.r10), (0.0, 0.0, 0.0));
    }

    #[test]
    fn retrieval_reranker_promotes_rank_3_to_1() {
        // Baseline rank 3 (index 2); reranker scores it highest in-window.
        let relevant = vec![2];
        let r = eval_retrieval::<Infallible>(
            15,
            &relevant,
            |_, g| Ok(-(g as f64)),
            |_, g| Ok(if g == 2 { 1.0 } else { 0.0 }),
            10,
        )
        .unwrap();
        assert_eq!((r.r1, r.r5, r.r10), (1.0, 1.0, 1.0));
    }

    #[test]
    fn retrieval_identity_rerank_matches_single_stage() {
        let n_gallery = 12;
        let relevant: Vec<usize> = (0..6).collect();
        let score = |q: usize, g: usize| ((q * 31 + g * 17) % 23) as f64 / 23.0;
        let two = eval_retrieval::<Infallible>(
            n_gallery,
            &relevant,
            |q, g| Ok(score(q, g)),
            |q, g| Ok(score(q, g)),
            10,
        )
        .unwrap();
        let one =
            eval_retrieval_single_stage::<Infallible>(n_gallery, &relevant, |q, g| Ok(score(q, g)))
                .unwrap();
        assert_eq!(two, one);
    }

    #[test]
    fn recall_monotone_in_k() {
        let relevant: Vec<usize> = (0..8).map(|q| (q * 3) % 16).collect();
        let r = eval_retrieval::<Infallible>(
            16,
            &relevant,
            |q, g| Ok(((q * 7 + g * 13) % 29) as f64),
            |q, g| Ok(((q * 11 + g * 5) % 31) as f64),
            10,
        )
        .unwrap();
        assert!(r.r1 <= r.r5 && r.r5 <= r.r10);
    }
}
