//! Evaluation metrics for a candidate evolved instance: correctness
//! (evolution precision/recall, grammar error rate), human-oriented
//! information preservation (comment/format retention), and efficiency
//! (response time), per run and aggregated.
//!
//! Lines are aligned between the original and the candidate by longest
//! common subsequence over whitespace-normalized content, so correctness
//! ignores pure layout changes; preservation then compares the full
//! per-line signature on the aligned pairs.

use crate::grammar::GrammarAst;
use crate::instance::{check_text, HumanInfoProfile, LosslessInstance};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// How relocated comments count as preserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommentMatchMode {
    /// A comment survives if its text appears anywhere in the candidate.
    Anywhere,
    /// A comment must appear on the line aligned with its original line.
    Aligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessCounts {
    /// Lines of the original requiring modification under the new grammar.
    pub line_req: usize,
    /// Lines with grammar errors in the candidate.
    pub line_err: usize,
    /// Original lines that were evolved (changed or dropped).
    pub line_evl: usize,
    /// Evolved lines dropped without grammatical justification or rewritten
    /// into erroneous regions.
    pub line_evl_wrg: usize,
    /// Candidate lines inserted beyond any original line (diagnostic).
    pub line_ins: usize,
    /// Total candidate lines (error-rate denominator).
    pub candidate_lines: usize,
    /// `(line_evl - line_evl_wrg) / line_evl`; undefined when nothing was
    /// evolved.
    pub precision: Option<f64>,
    /// `(line_evl - line_evl_wrg) / line_req`, clamped to 1; undefined when
    /// no lines required modification.
    pub recall: Option<f64>,
    /// `line_err / candidate_lines` (0 for an empty candidate).
    pub error_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreservationCounts {
    pub cmt_lost: usize,
    pub cmt_save: usize,
    /// Not applicable (None) when the original has no comment lines.
    pub cmt_ret: Option<f64>,
    pub fmt_lost: usize,
    pub fmt_save: usize,
    pub fmt_ret: Option<f64>,
}

/// Metrics of one migration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub line_req: usize,
    pub line_err: usize,
    pub line_evl: usize,
    pub line_evl_wrg: usize,
    pub line_ins: usize,
    pub candidate_lines: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub error_rate: f64,
    pub cmt_lost: usize,
    pub cmt_save: usize,
    pub cmt_ret: Option<f64>,
    pub fmt_lost: usize,
    pub fmt_save: usize,
    pub fmt_ret: Option<f64>,
    pub response_time_s: f64,
}

impl RunMetrics {
    pub fn from_parts(
        correctness: CorrectnessCounts,
        preservation: PreservationCounts,
        response_time_s: f64,
    ) -> RunMetrics {
        RunMetrics {
            line_req: correctness.line_req,
            line_err: correctness.line_err,
            line_evl: correctness.line_evl,
            line_evl_wrg: correctness.line_evl_wrg,
            line_ins: correctness.line_ins,
            candidate_lines: correctness.candidate_lines,
            precision: correctness.precision,
            recall: correctness.recall,
            error_rate: correctness.error_rate,
            cmt_lost: preservation.cmt_lost,
            cmt_save: preservation.cmt_save,
            cmt_ret: preservation.cmt_ret,
            fmt_lost: preservation.fmt_lost,
            fmt_save: preservation.fmt_save,
            fmt_ret: preservation.fmt_ret,
            response_time_s,
        }
    }
}

/// Ratios under one averaging convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSet {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub error_rate: Option<f64>,
    pub cmt_ret: Option<f64>,
    pub fmt_ret: Option<f64>,
}

/// Per-field means over runs, with ratios reported under both conventions:
/// the mean of per-run ratios, and the ratio recomputed from mean counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub run_count: usize,
    pub line_req: f64,
    pub line_err: f64,
    pub line_evl: f64,
    pub line_evl_wrg: f64,
    pub line_ins: f64,
    pub candidate_lines: f64,
    pub cmt_lost: f64,
    pub cmt_save: f64,
    pub fmt_lost: f64,
    pub fmt_save: f64,
    pub response_time_s: f64,
    pub mean_of_ratios: RatioSet,
    pub ratio_of_means: RatioSet,
}

/// `(evl - wrg) / evl`, the evolution precision formula over (possibly mean)
/// counts.
pub fn precision_from_counts(line_evl: f64, line_evl_wrg: f64) -> Option<f64> {
    (line_evl > 0.0).then(|| (line_evl - line_evl_wrg) / line_evl)
}

/// `(evl - wrg) / req`, the evolution recall formula, clamped to 1.
pub fn recall_from_counts(line_evl: f64, line_evl_wrg: f64, line_req: f64) -> Option<f64> {
    (line_req > 0.0).then(|| ((line_evl - line_evl_wrg) / line_req).min(1.0))
}

/// `save / (save + lost)`, the retention-rate formula.
pub fn retention_from_counts(save: f64, lost: f64) -> Option<f64> {
    (save + lost > 0.0).then(|| save / (save + lost))
}

/// `err / total`, the error-rate formula (0 over an empty candidate).
pub fn error_rate_from_counts(line_err: f64, total_lines: f64) -> f64 {
    if total_lines > 0.0 {
        line_err / total_lines
    } else {
        0.0
    }
}

/// Number of lines in the original requiring modification to conform to the
/// evolved grammar: the error lines of the conformance check, all
/// independent error regions counted.
pub fn compute_line_req(instance1: &LosslessInstance, grammar2: &GrammarAst) -> usize {
    check_text(&instance1.source, grammar2, Some(instance1.config()))
        .error_lines
        .len()
}

/// Correctness of a candidate against the evolved grammar.
///
/// `line_req` is the precomputed [`compute_line_req`] value, kept as the
/// recall denominator; the conformance check of the original is re-run here
/// for the deletion-justification line set.
pub fn compute_correctness(
    instance1: &LosslessInstance,
    candidate: &str,
    grammar2: &GrammarAst,
    line_req: usize,
) -> CorrectnessCounts {
    let orig_lines: Vec<&str> = instance1.source.lines().collect();
    let cand_lines: Vec<&str> = candidate.lines().collect();
    let alignment = align_lines(&orig_lines, &cand_lines);

    let cand_report = check_text(candidate, grammar2, Some(instance1.config()));
    let line_err = cand_report.error_lines.len();
    let deletion_ok =
        check_text(&instance1.source, grammar2, Some(instance1.config())).skipped_lines;

    let line_evl = orig_lines.len() - alignment.matched.len();
    let mut line_evl_wrg = 0usize;
    let mut line_ins = 0usize;
    for (del, ins) in &alignment.blocks {
        let paired = del.len().min(ins.len());
        if ins
            .iter()
            .any(|line| cand_report.error_lines.contains(line))
        {
            line_evl_wrg += paired;
        }
        if del.len() > ins.len() {
            let excess = &del[paired..];
            let token_bearing: Vec<u32> = excess
                .iter()
                .copied()
                .filter(|&l| !instance1.tokens_on_line(l).is_empty())
                .collect();
            let justified =
                !token_bearing.is_empty() && token_bearing.iter().all(|l| deletion_ok.contains(l));
            if !justified {
                line_evl_wrg += excess.len();
            }
        } else {
            line_ins += ins.len() - paired;
        }
    }

    let evl = line_evl as f64;
    let wrg = line_evl_wrg as f64;
    CorrectnessCounts {
        line_req,
        line_err,
        line_evl,
        line_evl_wrg,
        line_ins,
        candidate_lines: cand_lines.len(),
        precision: precision_from_counts(evl, wrg),
        recall: recall_from_counts(evl, wrg, line_req as f64),
        error_rate: error_rate_from_counts(line_err as f64, cand_lines.len() as f64),
    }
}

/// Preservation of comments and layout in the candidate.
///
/// A comment line is saved when its comment text survives (anywhere, or on
/// the aligned line in [`CommentMatchMode::Aligned`]). Format retention is
/// counted over every original line: a line is saved when its aligned
/// candidate line reproduces the indentation string and blankness.
pub fn compute_preservation(
    profile1: &HumanInfoProfile,
    instance1: &LosslessInstance,
    candidate: &str,
    mode: CommentMatchMode,
) -> PreservationCounts {
    let orig_lines: Vec<&str> = instance1.source.lines().collect();
    let cand_lines: Vec<&str> = candidate.lines().collect();
    let alignment = align_lines(&orig_lines, &cand_lines);
    let mapping = alignment.line_mapping();

    let mut cmt_save = 0usize;
    let mut cmt_lost = 0usize;
    for line in &profile1.comment_lines {
        let segments = &profile1.per_line_signature[line].comments;
        let saved = match mode {
            CommentMatchMode::Anywhere => segments.iter().all(|segment| {
                cand_lines
                    .iter()
                    .any(|cand| cand.contains(segment.as_str()))
            }),
            CommentMatchMode::Aligned => mapping
                .get(line)
                .map(|&cand_line| {
                    let text = cand_lines[(cand_line - 1) as usize];
                    segments
                        .iter()
                        .all(|segment| text.contains(segment.as_str()))
                })
                .unwrap_or(false),
        };
        if saved {
            cmt_save += 1;
        } else {
            cmt_lost += 1;
        }
    }

    let mut fmt_save = 0usize;
    let mut fmt_lost = 0usize;
    for (line, signature) in &profile1.per_line_signature {
        let saved = mapping.get(line).is_some_and(|&cand_line| {
            let text = cand_lines[(cand_line - 1) as usize];
            let indent_end = text
                .char_indices()
                .find(|(_, c)| !matches!(c, ' ' | '\t'))
                .map_or(text.len(), |(i, _)| i);
            let cand_blank = text.trim().is_empty();
            cand_blank == signature.is_blank && text[..indent_end] == signature.indentation
        });
        if saved {
            fmt_save += 1;
        } else {
            fmt_lost += 1;
        }
    }

    PreservationCounts {
        cmt_lost,
        cmt_save,
        cmt_ret: retention_from_counts(cmt_save as f64, cmt_lost as f64),
        fmt_lost,
        fmt_save,
        fmt_ret: retention_from_counts(fmt_save as f64, fmt_lost as f64),
    }
}

/// Aggregates runs into per-field means; ratios are reported under both
/// conventions since published per-case tables mix them.
pub fn aggregate(runs: &[RunMetrics]) -> AggregateMetrics {
    assert!(!runs.is_empty(), "aggregate requires at least one run");
    let n = runs.len() as f64;
    let mean = |f: &dyn Fn(&RunMetrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let mean_opt = |f: &dyn Fn(&RunMetrics) -> Option<f64>| {
        let defined: Vec<f64> = runs.iter().filter_map(f).collect();
        if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    };

    let line_req = mean(&|r| r.line_req as f64);
    let line_err = mean(&|r| r.line_err as f64);
    let line_evl = mean(&|r| r.line_evl as f64);
    let line_evl_wrg = mean(&|r| r.line_evl_wrg as f64);
    let line_ins = mean(&|r| r.line_ins as f64);
    let candidate_lines = mean(&|r| r.candidate_lines as f64);
    let cmt_lost = mean(&|r| r.cmt_lost as f64);
    let cmt_save = mean(&|r| r.cmt_save as f64);
    let fmt_lost = mean(&|r| r.fmt_lost as f64);
    let fmt_save = mean(&|r| r.fmt_save as f64);

    AggregateMetrics {
        run_count: runs.len(),
        line_req,
        line_err,
        line_evl,
        line_evl_wrg,
        line_ins,
        candidate_lines,
        cmt_lost,
        cmt_save,
        fmt_lost,
        fmt_save,
        response_time_s: mean(&|r| r.response_time_s),
        mean_of_ratios: RatioSet {
            precision: mean_opt(&|r| r.precision),
            recall: mean_opt(&|r| r.recall),
            error_rate: Some(mean(&|r| r.error_rate)),
            cmt_ret: mean_opt(&|r| r.cmt_ret),
            fmt_ret: mean_opt(&|r| r.fmt_ret),
        },
        ratio_of_means: RatioSet {
            precision: precision_from_counts(line_evl, line_evl_wrg),
            recall: recall_from_counts(line_evl, line_evl_wrg, line_req),
            error_rate: Some(error_rate_from_counts(line_err, candidate_lines)),
            cmt_ret: retention_from_counts(cmt_save, cmt_lost),
            fmt_ret: retention_from_counts(fmt_save, fmt_lost),
        },
    }
}

struct Alignment {
    /// LCS-matched (original, candidate) line pairs, 1-based.
    matched: Vec<(u32, u32)>,
    /// Unmatched stretches between anchors: (original lines, candidate lines).
    blocks: Vec<(Vec<u32>, Vec<u32>)>,
}

impl Alignment {
    /// Original line to candidate line, matched pairs plus positional pairing
    /// inside replacement blocks.
    fn line_mapping(&self) -> std::collections::BTreeMap<u32, u32> {
        let mut out: std::collections::BTreeMap<u32, u32> = self.matched.iter().copied().collect();
        for (del, ins) in &self.blocks {
            for (o, c) in del.iter().zip(ins.iter()) {
                out.insert(*o, *c);
            }
        }
        out
    }
}

fn normalize(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Longest-common-subsequence alignment over normalized line content.
fn align_lines(orig: &[&str], cand: &[&str]) -> Alignment {
    let a: Vec<String> = orig.iter().map(|l| normalize(l)).collect();
    let b: Vec<String> = cand.iter().map(|l| normalize(l)).collect();
    let n = a.len();
    let m = b.len();
    let mut table = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i][j] = if a[i] == b[j] {
                table[i + 1][j + 1] + 1
            } else {
                table[i + 1][j].max(table[i][j + 1])
            };
        }
    }
    let mut matched = Vec::new();
    let mut blocks: Vec<(Vec<u32>, Vec<u32>)> = Vec::new();
    let mut pending: (Vec<u32>, Vec<u32>) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0usize, 0usize);
    let flush = |pending: &mut (Vec<u32>, Vec<u32>), blocks: &mut Vec<(Vec<u32>, Vec<u32>)>| {
        if !pending.0.is_empty() || !pending.1.is_empty() {
            blocks.push(std::mem::take(pending));
        }
    };
    while i < n && j < m {
        if a[i] == b[j] {
            flush(&mut pending, &mut blocks);
            matched.push((i as u32 + 1, j as u32 + 1));
            i += 1;
            j += 1;
        } else if table[i + 1][j] >= table[i][j + 1] {
            pending.0.push(i as u32 + 1);
            i += 1;
        } else {
            pending.1.push(j as u32 + 1);
            j += 1;
        }
    }
    pending.0.extend((i..n).map(|k| k as u32 + 1));
    pending.1.extend((j..m).map(|k| k as u32 + 1));
    flush(&mut pending, &mut blocks);
    Alignment { matched, blocks }
}

/// Lines of the original that admit a deletion-style repair, exposed for
/// callers that report them.
pub fn deletion_required_lines(
    instance1: &LosslessInstance,
    grammar2: &GrammarAst,
) -> BTreeSet<u32> {
    check_text(&instance1.source, grammar2, Some(instance1.config())).skipped_lines
}

/// Full per-run evaluation of one candidate: correctness against the evolved
/// grammar plus preservation against the original's profile.
pub fn evaluate_candidate(
    instance1: &LosslessInstance,
    candidate: &str,
    grammar2: &GrammarAst,
    mode: CommentMatchMode,
    response_time_s: f64,
) -> RunMetrics {
    let line_req = compute_line_req(instance1, grammar2);
    let correctness = compute_correctness(instance1, candidate, grammar2, line_req);
    let profile = crate::instance::extract_human_info(instance1);
    let preservation = compute_preservation(&profile, instance1, candidate, mode);
    RunMetrics::from_parts(correctness, preservation, response_time_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::instance::{extract_human_info, lex_instance};

    const G1: &str = include_str!("../fixtures/domainmodel/grammar_v1.xtext");
    const G2: &str = include_str!("../fixtures/domainmodel/grammar_v2.xtext");
    const INSTANCE_V1: &str = include_str!("../fixtures/domainmodel/instance_v1.dmodel");
    const EXPECTED: &str = include_str!("../fixtures/domainmodel/expected_rules_output.dmodel");

    fn fixture() -> (GrammarAst, GrammarAst, LosslessInstance) {
        let g1 = parse_grammar(G1).unwrap();
        let g2 = parse_grammar(G2).unwrap();
        let instance = lex_instance(INSTANCE_V1, &g1).unwrap();
        (g1, g2, instance)
    }

    #[test]
    fn published_precision_and_recall_reproduce_from_mean_counts() {
        // Mean counts of a forty-line case: 36.8 evolved, 2.8 wrong.
        let precision = precision_from_counts(36.8, 2.8).unwrap() * 100.0;
        assert!((precision - 92.39).abs() < 0.01, "{precision}");
        let recall = recall_from_counts(36.8, 2.8, 40.0).unwrap() * 100.0;
        assert!((recall - 85.00).abs() < 0.01, "{recall}");
    }

    #[test]
    fn ratio_of_means_diverges_from_published_mean_of_ratios_case() {
        // Mean counts 15.8 evolved / 3 wrong give 81.01% under the
        // ratio-of-means convention; the published figure for the same case
        // is 78%, which is why both conventions are emitted side by side.
        let precision = precision_from_counts(15.8, 3.0).unwrap() * 100.0;
        assert!((precision - 81.01).abs() < 0.01, "{precision}");
    }

    #[test]
    fn published_format_retention_cases_reproduce() {
        for (save, lost, expected) in [
            (69.7, 28.3, 71.12),
            (57.4, 40.6, 58.57),
            (803.4, 1018.6, 44.09),
        ] {
            let ret = retention_from_counts(save, lost).unwrap() * 100.0;
            assert!((ret - expected).abs() < 0.01, "{save}/{lost} gave {ret}");
        }
    }

    #[test]
    fn line_req_counts_all_error_regions() {
        let (_, g2, instance) = fixture();
        assert_eq!(compute_line_req(&instance, &g2), 4);
    }

    #[test]
    fn line_req_is_zero_against_own_grammar() {
        let (g1, _, instance) = fixture();
        assert_eq!(compute_line_req(&instance, &g1), 0);
    }

    #[test]
    fn identity_candidate_evolves_nothing() {
        let (g1, _, instance) = fixture();
        let counts = compute_correctness(&instance, INSTANCE_V1, &g1, 0);
        assert_eq!(counts.line_evl, 0);
        assert_eq!(counts.precision, None);
        assert_eq!(counts.recall, None);
        assert_eq!(counts.error_rate, 0.0);
    }

    #[test]
    fn rule_based_output_scores_perfectly() {
        let (_, g2, instance) = fixture();
        let line_req = compute_line_req(&instance, &g2);
        let counts = compute_correctness(&instance, EXPECTED, &g2, line_req);
        assert_eq!(counts.line_evl, 4);
        assert_eq!(counts.line_evl_wrg, 0);
        assert_eq!(counts.precision, Some(1.0));
        assert_eq!(counts.recall, Some(1.0));
        assert_eq!(counts.error_rate, 0.0);
        let profile = extract_human_info(&instance);
        let preservation =
            compute_preservation(&profile, &instance, EXPECTED, CommentMatchMode::Anywhere);
        assert_eq!(preservation.cmt_ret, Some(1.0));
        assert_eq!(preservation.fmt_ret, Some(1.0));
        assert_eq!(preservation.fmt_save, 25);
    }

    #[test]
    fn empty_candidate_loses_everything() {
        let (_, g2, instance) = fixture();
        let line_req = compute_line_req(&instance, &g2);
        let counts = compute_correctness(&instance, "", &g2, line_req);
        assert_eq!(counts.line_evl, 25);
        assert_eq!(counts.line_evl_wrg, 25);
        assert_eq!(counts.precision, Some(0.0));
        assert_eq!(counts.recall, Some(0.0));
        assert_eq!(counts.error_rate, 0.0);
        let profile = extract_human_info(&instance);
        let preservation =
            compute_preservation(&profile, &instance, "", CommentMatchMode::Anywhere);
        assert_eq!(preservation.cmt_save, 0);
        assert_eq!(preservation.cmt_lost, 7);
        assert_eq!(preservation.cmt_ret, Some(0.0));
        assert_eq!(preservation.fmt_ret, Some(0.0));
    }

    #[test]
    fn no_comments_means_not_applicable() {
        let (g1, _, _) = fixture();
        let instance = lex_instance("entity Blog {}", &g1).unwrap();
        let profile = extract_human_info(&instance);
        let preservation = compute_preservation(
            &profile,
            &instance,
            "entity Blog {}",
            CommentMatchMode::Anywhere,
        );
        assert_eq!(preservation.cmt_ret, None);
        assert_eq!(preservation.cmt_save, 0);
    }

    #[test]
    fn relocated_comment_counts_anywhere_but_not_aligned() {
        let (g1, _, _) = fixture();
        let source = "// lead comment\nentity Blog {}\n";
        let moved = "entity Blog {}\n// lead comment\n";
        let instance = lex_instance(source, &g1).unwrap();
        let profile = extract_human_info(&instance);
        let anywhere = compute_preservation(&profile, &instance, moved, CommentMatchMode::Anywhere);
        assert_eq!(anywhere.cmt_save, 1);
        let aligned = compute_preservation(&profile, &instance, moved, CommentMatchMode::Aligned);
        assert_eq!(aligned.cmt_save, 0);
    }

    #[test]
    fn formula_identities_hold() {
        let (_, g2, instance) = fixture();
        let line_req = compute_line_req(&instance, &g2);
        for candidate in [EXPECTED, INSTANCE_V1, ""] {
            let c = compute_correctness(&instance, candidate, &g2, line_req);
            if let Some(p) = c.precision {
                let identity = p * c.line_evl as f64 + c.line_evl_wrg as f64;
                assert!((identity - c.line_evl as f64).abs() < 1e-9);
            }
            if let (Some(r), true) = (c.recall, c.line_evl >= c.line_evl_wrg) {
                if c.line_evl - c.line_evl_wrg <= c.line_req {
                    let identity = r * c.line_req as f64;
                    assert!((identity - (c.line_evl - c.line_evl_wrg) as f64).abs() < 1e-9);
                }
            }
            for ratio in [c.precision, c.recall].into_iter().flatten() {
                assert!((0.0..=1.0).contains(&ratio));
            }
        }
    }

    #[test]
    fn aggregate_of_identical_runs_equals_any_single_run() {
        let (_, g2, instance) = fixture();
        let line_req = compute_line_req(&instance, &g2);
        let counts = compute_correctness(&instance, EXPECTED, &g2, line_req);
        let profile = extract_human_info(&instance);
        let pres = compute_preservation(&profile, &instance, EXPECTED, CommentMatchMode::Anywhere);
        let run = RunMetrics::from_parts(counts, pres, 2.5);
        let agg = aggregate(&vec![run; 10]);
        assert_eq!(agg.run_count, 10);
        assert_eq!(agg.mean_of_ratios.precision, Some(1.0));
        assert_eq!(agg.ratio_of_means.precision, Some(1.0));
        assert!((agg.response_time_s - 2.5).abs() < 1e-12);
        assert!((agg.line_evl - 4.0).abs() < 1e-12);
    }

    #[test]
    fn both_ratio_conventions_from_a_two_run_hand_example() {
        // evl = [10, 2], wrg = [0, 1]: mean of ratios 75%, ratio of means
        // (6 - 0.5) / 6 = 11/12.
        let base = RunMetrics {
            line_req: 10,
            line_err: 0,
            line_evl: 10,
            line_evl_wrg: 0,
            line_ins: 0,
            candidate_lines: 10,
            precision: precision_from_counts(10.0, 0.0),
            recall: recall_from_counts(10.0, 0.0, 10.0),
            error_rate: 0.0,
            cmt_lost: 0,
            cmt_save: 0,
            cmt_ret: None,
            fmt_lost: 0,
            fmt_save: 10,
            fmt_ret: retention_from_counts(10.0, 0.0),
            response_time_s: 1.0,
        };
        let second = RunMetrics {
            line_evl: 2,
            line_evl_wrg: 1,
            precision: precision_from_counts(2.0, 1.0),
            recall: recall_from_counts(2.0, 1.0, 10.0),
            ..base
        };
        let agg = aggregate(&[base, second]);
        assert!((agg.mean_of_ratios.precision.unwrap() - 0.75).abs() < 1e-12);
        assert!((agg.ratio_of_means.precision.unwrap() - 11.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn insertions_are_a_separate_diagnostic_not_evolution() {
        let (g1, _, instance) = fixture();
        let mut padded = String::from(INSTANCE_V1);
        padded.push_str("entity Extra {}\nentity More {}\n");
        let counts = compute_correctness(&instance, &padded, &g1, 0);
        assert_eq!(counts.line_evl, 0);
        assert_eq!(counts.line_ins, 2);
        assert_eq!(counts.error_rate, 0.0);
    }

    #[test]
    fn alignment_blocks_pair_rewritten_lines() {
        let alignment = align_lines(&["a", "b", "c", "d"], &["a", "B", "c", "d"]);
        assert_eq!(alignment.matched.len(), 3);
        assert_eq!(alignment.blocks.len(), 1);
        assert_eq!(alignment.blocks[0], (vec![2], vec![2]));
    }

    #[test]
    fn whitespace_only_changes_do_not_count_as_evolved() {
        let (g1, _, instance) = fixture();
        let respaced = INSTANCE_V1.replace("\ttitle: String", "    title:    String");
        let counts = compute_correctness(&instance, &respaced, &g1, 0);
        assert_eq!(counts.line_evl, 0);
        // But the format signature changed on that line.
        let profile = extract_human_info(&instance);
        let pres = compute_preservation(&profile, &instance, &respaced, CommentMatchMode::Anywhere);
        assert_eq!(pres.fmt_lost, 1);
    }
}
