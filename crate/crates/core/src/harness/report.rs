//! Report structures, aggregation over runs, and file output.
//!
//! Accuracies and noise rates in the report are percentages.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{slot_applies, ExperimentConfig, FilterKind, FilterSlot, RunOutcome};
use crate::analysis::{mean, paired_t_test, precision_estimates, sample_sd};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        Summary {
            mean: mean(xs),
            sd: sample_sd(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub mean: f64,
    pub sd: f64,
    pub per_run: Vec<f64>,
    /// Paired t-test against the unfiltered row of the same learner.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub learner: String,
    pub filter: FilterKind,
    pub filter_name: String,
    pub cells: Vec<AccuracyCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSizeRow {
    pub learner: String,
    pub filter: FilterKind,
    pub filter_name: String,
    /// Mean leaf count per noise level.
    pub mean_leaves: Vec<f64>,
    pub per_run: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingCell {
    pub vote_mean: f64,
    pub best_mean: f64,
    pub p_value: Option<f64>,
}

/// Majority vote over the final learners versus the best single learner,
/// under one filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingRow {
    pub filter: FilterKind,
    pub best_learner: String,
    pub cells: Vec<VotingCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionCell {
    pub discarded: f64,
    pub corrupted: f64,
    pub intersection: f64,
    pub total: usize,
    pub p_e1: Option<f64>,
    pub p_e2: Option<f64>,
    pub discarded_per_run: Vec<usize>,
    pub intersection_per_run: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub filter: FilterKind,
    pub filter_name: String,
    pub cells: Vec<PrecisionCell>,
}

/// Mean class counts of one training-set variant at one noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistributionRow {
    pub noise_level: f64,
    /// `Original`, `Corrupted`, or a filter slot name.
    pub set: String,
    pub mean_counts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub instances: usize,
    pub features: usize,
    pub class_names: Vec<String>,
    pub class_histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelProvenance {
    pub level: f64,
    pub noise_seed: u64,
    pub tag_seed: u64,
    pub corrupted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub run: usize,
    pub run_seed: u64,
    pub split_seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub levels: Vec<LevelProvenance>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: Option<ExperimentConfig>,
    pub dataset: DatasetSummary,
    pub noise_levels: Vec<f64>,
    pub actual_noise: Vec<Summary>,
    pub mean_corrupted: Vec<f64>,
    pub accuracy: Vec<AccuracyRow>,
    pub tree_size: Vec<TreeSizeRow>,
    pub voting: Vec<VotingRow>,
    pub precision: Vec<PrecisionRow>,
    pub class_distribution: Vec<ClassDistributionRow>,
    pub runs: Vec<RunProvenance>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn accuracy_row(&self, learner: &str, filter: FilterKind) -> Option<&AccuracyRow> {
        self.accuracy
            .iter()
            .find(|r| r.learner == learner && r.filter == filter)
    }

    pub fn precision_row(&self, filter_name: &str) -> Option<&PrecisionRow> {
        self.precision.iter().find(|r| r.filter_name == filter_name)
    }

    pub fn tree_size_row(&self, filter: FilterKind) -> Option<&TreeSizeRow> {
        self.tree_size.iter().find(|r| r.filter == filter)
    }

    pub fn level_index(&self, level: f64) -> Option<usize> {
        self.noise_levels
            .iter()
            .position(|&l| (l - level).abs() < 1e-12)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

const T_TEST_NOTE: &str =
    "p-values come from paired t-tests over runs; they are optimistic, since \
the paired t-test has an elevated Type I error and the runs' random test sets are not independent.";

fn p_value(a: &[f64], b: &[f64]) -> Option<f64> {
    paired_t_test(a, b).ok().map(|t| t.p_value)
}

pub(super) fn aggregate(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    slots: &[FilterSlot],
    runs: Vec<RunOutcome>,
) -> ExperimentReport {
    let nl = cfg.noise_levels.len();
    let per_level = |f: &dyn Fn(&RunOutcome, usize) -> f64| -> Vec<Vec<f64>> {
        (0..nl)
            .map(|l| runs.iter().map(|r| f(r, l)).collect())
            .collect()
    };

    let actual_noise = per_level(&|r, l| 100.0 * r.levels[l].actual_noise)
        .iter()
        .map(|xs| Summary::of(xs))
        .collect();
    let mean_corrupted = per_level(&|r, l| r.levels[l].corrupted as f64)
        .iter()
        .map(|xs| mean(xs))
        .collect();

    // Accuracy per (learner, slot).
    let mut accuracy = Vec::new();
    let none_slot = slots.iter().position(|s| s.kind == FilterKind::None);
    let acc_runs = |k: usize, si: usize, l: usize| -> Vec<f64> {
        runs.iter()
            .map(|r| 100.0 * r.levels[l].slots[si].learners[k].expect("evaluated").0)
            .collect()
    };
    for (k, learner) in cfg.final_learners.iter().enumerate() {
        for (si, slot) in slots.iter().enumerate() {
            if !slot_applies(cfg, slot, learner) {
                continue;
            }
            let cells = (0..nl)
                .map(|l| {
                    let per_run = acc_runs(k, si, l);
                    let p_value = match none_slot {
                        Some(ns) if ns != si => p_value(&per_run, &acc_runs(k, ns, l)),
                        _ => None,
                    };
                    let s = Summary::of(&per_run);
                    AccuracyCell {
                        mean: s.mean,
                        sd: s.sd,
                        per_run,
                        p_value,
                    }
                })
                .collect();
            accuracy.push(AccuracyRow {
                learner: learner.label(),
                filter: slot.kind,
                filter_name: slot.name.clone(),
                cells,
            });
        }
    }

    // Tree sizes for the first tree learner.
    let mut tree_size = Vec::new();
    if let Some(k) = cfg
        .final_learners
        .iter()
        .position(|l| l.kind() == crate::learners::LearnerKind::DecisionTree)
    {
        for (si, slot) in slots.iter().enumerate() {
            if !slot_applies(cfg, slot, &cfg.final_learners[k]) {
                continue;
            }
            let per_run: Vec<Vec<usize>> = (0..nl)
                .map(|l| {
                    runs.iter()
                        .map(|r| {
                            r.levels[l].slots[si].learners[k]
                                .and_then(|x| x.1)
                                .unwrap_or(0)
                        })
                        .collect()
                })
                .collect();
            let mean_leaves = per_run
                .iter()
                .map(|xs| mean(&xs.iter().map(|&x| x as f64).collect::<Vec<_>>()))
                .collect();
            tree_size.push(TreeSizeRow {
                learner: cfg.final_learners[k].label(),
                filter: slot.kind,
                filter_name: slot.name.clone(),
                mean_leaves,
                per_run,
            });
        }
    }

    // Voting versus the best single learner (highest unfiltered accuracy at
    // the first noise level).
    let mut voting = Vec::new();
    if cfg.voting && nl > 0 {
        if let Some(ns) = none_slot {
            let best = (0..cfg.final_learners.len())
                .map(|k| mean(&acc_runs(k, ns, 0)))
                .collect::<Vec<_>>();
            let best_k = crate::learners::argmax_first(&best);
            for (si, slot) in slots.iter().enumerate() {
                if slot.kind == FilterKind::Sf {
                    continue;
                }
                let cells = (0..nl)
                    .map(|l| {
                        let votes: Vec<f64> = runs
                            .iter()
                            .map(|r| {
                                100.0 * r.levels[l].slots[si].vote_accuracy.expect("voting on")
                            })
                            .collect();
                        let single = acc_runs(best_k, si, l);
                        VotingCell {
                            vote_mean: mean(&votes),
                            best_mean: mean(&single),
                            p_value: p_value(&votes, &single),
                        }
                    })
                    .collect();
                voting.push(VotingRow {
                    filter: slot.kind,
                    best_learner: cfg.final_learners[best_k].label(),
                    cells,
                });
            }
        }
    }

    // Filter precision.
    let total = runs.first().map_or(0, |r| r.train_size);
    let mut precision = Vec::new();
    for (si, slot) in slots.iter().enumerate() {
        if slot.kind == FilterKind::None {
            continue;
        }
        let cells = (0..nl)
            .map(|l| {
                let discarded_per_run: Vec<usize> = runs
                    .iter()
                    .map(|r| r.levels[l].slots[si].discarded)
                    .collect();
                let intersection_per_run: Vec<usize> = runs
                    .iter()
                    .map(|r| r.levels[l].slots[si].intersection)
                    .collect();
                let as_f = |v: &[usize]| mean(&v.iter().map(|&x| x as f64).collect::<Vec<_>>());
                let discarded = as_f(&discarded_per_run);
                let intersection = as_f(&intersection_per_run);
                let corrupted = as_f(
                    &runs
                        .iter()
                        .map(|r| r.levels[l].corrupted)
                        .collect::<Vec<_>>(),
                );
                let est = precision_estimates(discarded, corrupted, intersection, total).ok();
                PrecisionCell {
                    discarded,
                    corrupted,
                    intersection,
                    total,
                    p_e1: est.map(|e| e.0),
                    p_e2: est.map(|e| e.1),
                    discarded_per_run,
                    intersection_per_run,
                }
            })
            .collect();
        precision.push(PrecisionRow {
            filter: slot.kind,
            filter_name: slot.name.clone(),
            cells,
        });
    }

    // Class distributions before and after filtering.
    let r = ds.class_count();
    let mean_hist = |get: &dyn Fn(&RunOutcome) -> &Vec<usize>| -> Vec<f64> {
        (0..r)
            .map(|c| {
                mean(
                    &runs
                        .iter()
                        .map(|run| get(run)[c] as f64)
                        .collect::<Vec<_>>(),
                )
            })
            .collect()
    };
    let mut class_distribution = Vec::new();
    for (l, &level) in cfg.noise_levels.iter().enumerate() {
        class_distribution.push(ClassDistributionRow {
            noise_level: level,
            set: "Original".into(),
            mean_counts: mean_hist(&|run| &run.original_hist),
        });
        class_distribution.push(ClassDistributionRow {
            noise_level: level,
            set: "Corrupted".into(),
            mean_counts: mean_hist(&|run| &run.levels[l].corrupted_hist),
        });
        for (si, slot) in slots.iter().enumerate() {
            if slot.kind == FilterKind::None {
                continue;
            }
            class_distribution.push(ClassDistributionRow {
                noise_level: level,
                set: slot.name.clone(),
                mean_counts: mean_hist(&|run| &run.levels[l].slots[si].kept_hist),
            });
        }
    }

    ExperimentReport {
        config: Some(cfg.clone()),
        dataset: DatasetSummary {
            instances: ds.len(),
            features: ds.schema().feature_count(),
            class_names: ds.class_names().to_vec(),
            class_histogram: ds.class_histogram(),
        },
        noise_levels: cfg.noise_levels.clone(),
        actual_noise,
        mean_corrupted,
        accuracy,
        tree_size,
        voting,
        precision,
        class_distribution,
        runs: runs.into_iter().map(|r| r.provenance).collect(),
        notes: vec![T_TEST_NOTE.to_string()],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// `report.json` with everything, including provenance.
    Json,
    /// Flat CSV tables.
    Tables,
    /// One `series_<learner>.csv` per final learner: accuracy per filter
    /// against noise level.
    Series,
}

impl OutputFormat {
    pub fn all() -> Vec<OutputFormat> {
        vec![
            OutputFormat::Json,
            OutputFormat::Tables,
            OutputFormat::Series,
        ]
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "tables" => Ok(OutputFormat::Tables),
            "series" => Ok(OutputFormat::Series),
            other => Err(Error::invalid(format!("unknown output format `{other}`"))),
        }
    }
}

/// Noise level as a percentage label: `0.05 -> "5"`.
pub fn level_label(level: f64) -> String {
    let pct = (level * 100.0 * 1e6).round() / 1e6;
    format!("{pct}")
}

fn opt3(p: Option<f64>) -> String {
    p.map_or_else(String::new, |p| format!("{p:.3}"))
}

fn opt2(p: Option<f64>) -> String {
    p.map_or_else(String::new, |p| format!("{p:.2}"))
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn level_header(prefix: &str, report: &ExperimentReport) -> String {
    let mut h = prefix.to_string();
    for &l in &report.noise_levels {
        let _ = write!(h, ",{}", level_label(l));
    }
    h.push('\n');
    h
}

fn accuracy_table(report: &ExperimentReport) -> String {
    let mut out = level_header("learner,filter", report);
    if !report.noise_levels.is_empty() {
        out.push_str(",Actual Noise");
        for s in &report.actual_noise {
            let _ = write!(out, ",{:.1}", s.mean);
        }
        out.push('\n');
    }
    for row in &report.accuracy {
        let _ = write!(out, "{},{}", row.learner, row.filter);
        for c in &row.cells {
            let _ = write!(out, ",{:.1} ± {:.1}", c.mean, c.sd);
        }
        out.push('\n');
    }
    out
}

fn significance_table(report: &ExperimentReport) -> String {
    let mut out = level_header("learner,filter", report);
    for row in report
        .accuracy
        .iter()
        .filter(|r| r.filter != FilterKind::None)
    {
        let _ = write!(out, "{},{}", row.learner, row.filter);
        for c in &row.cells {
            let _ = write!(out, ",{}", opt3(c.p_value));
        }
        out.push('\n');
    }
    out
}

fn tree_size_table(report: &ExperimentReport) -> String {
    let mut out = level_header("learner,filter", report);
    for row in &report.tree_size {
        let _ = write!(out, "{},{}", row.learner, row.filter);
        for m in &row.mean_leaves {
            let _ = write!(out, ",{m:.1}");
        }
        out.push('\n');
    }
    out
}

fn voting_table(report: &ExperimentReport) -> String {
    let mut out = String::from("noise_level");
    for row in &report.voting {
        let _ = write!(
            out,
            ",{f} MAJ,{f} {b},{f} p",
            f = row.filter,
            b = row.best_learner
        );
    }
    out.push('\n');
    for (l, &level) in report.noise_levels.iter().enumerate() {
        out.push_str(&level_label(level));
        for row in &report.voting {
            let c = &row.cells[l];
            let _ = write!(
                out,
                ",{:.1},{:.1},{}",
                c.vote_mean,
                c.best_mean,
                opt3(c.p_value)
            );
        }
        out.push('\n');
    }
    out
}

fn precision_counts_table(report: &ExperimentReport) -> String {
    let mut out = String::from("noise_level");
    for row in &report.precision {
        let _ = write!(out, ",D {}", row.filter_name);
    }
    out.push_str(",M");
    for row in &report.precision {
        let _ = write!(out, ",M∩D {}", row.filter_name);
    }
    out.push('\n');
    for (l, &level) in report.noise_levels.iter().enumerate() {
        out.push_str(&level_label(level));
        for row in &report.precision {
            let _ = write!(out, ",{:.1}", row.cells[l].discarded);
        }
        let _ = write!(out, ",{:.1}", report.mean_corrupted[l]);
        for row in &report.precision {
            let _ = write!(out, ",{:.1}", row.cells[l].intersection);
        }
        out.push('\n');
    }
    out
}

fn precision_rates_table(report: &ExperimentReport) -> String {
    let mut out = String::from("noise_level");
    for row in &report.precision {
        let _ = write!(out, ",{n} P(E1),{n} P(E2)", n = row.filter_name);
    }
    out.push('\n');
    for (l, &level) in report.noise_levels.iter().enumerate() {
        out.push_str(&level_label(level));
        for row in &report.precision {
            let c = &row.cells[l];
            let _ = write!(out, ",{},{}", opt2(c.p_e1), opt2(c.p_e2));
        }
        out.push('\n');
    }
    out
}

fn class_distribution_table(report: &ExperimentReport) -> String {
    let mut out = String::from("noise_level,set");
    for c in &report.dataset.class_names {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for row in &report.class_distribution {
        let _ = write!(out, "{},{}", level_label(row.noise_level), row.set);
        for m in &row.mean_counts {
            let _ = write!(out, ",{m:.1}");
        }
        out.push('\n');
    }
    out
}

fn series_files(report: &ExperimentReport) -> Vec<(String, String)> {
    let mut learners: Vec<&str> = Vec::new();
    for row in &report.accuracy {
        if !learners.contains(&row.learner.as_str()) {
            learners.push(&row.learner);
        }
    }
    learners
        .into_iter()
        .map(|learner| {
            let rows: Vec<&AccuracyRow> = report
                .accuracy
                .iter()
                .filter(|r| r.learner == learner)
                .collect();
            let mut out = String::from("noise_level");
            for r in &rows {
                let _ = write!(out, ",{}", r.filter);
            }
            out.push('\n');
            for (l, &level) in report.noise_levels.iter().enumerate() {
                out.push_str(&level_label(level));
                for r in &rows {
                    let _ = write!(out, ",{}", r.cells[l].mean);
                }
                out.push('\n');
            }
            (format!("series_{}.csv", file_stem(learner)), out)
        })
        .collect()
}

/// Renders every output file as `(file name, contents)`.
pub fn render_report(report: &ExperimentReport, formats: &[OutputFormat]) -> Vec<(String, String)> {
    let mut files = Vec::new();
    if formats.contains(&OutputFormat::Json) {
        files.push(("report.json".to_string(), report.to_json()));
    }
    if formats.contains(&OutputFormat::Tables) {
        files.push(("accuracy.csv".into(), accuracy_table(report)));
        files.push(("significance.csv".into(), significance_table(report)));
        files.push(("tree_size.csv".into(), tree_size_table(report)));
        files.push(("voting.csv".into(), voting_table(report)));
        files.push((
            "precision_counts.csv".into(),
            precision_counts_table(report),
        ));
        files.push(("precision_rates.csv".into(), precision_rates_table(report)));
        files.push((
            "class_distribution.csv".into(),
            class_distribution_table(report),
        ));
    }
    if formats.contains(&OutputFormat::Series) {
        files.extend(series_files(report));
    }
    files
}

/// Writes the requested outputs into `out_dir` (created if needed) and
/// returns the written paths.
pub fn emit_report(
    report: &ExperimentReport,
    out_dir: impl AsRef<Path>,
    formats: &[OutputFormat],
) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, contents) in render_report(report, formats) {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(level_label(0.0), "0");
        assert_eq!(level_label(0.05), "5");
        assert_eq!(level_label(0.1), "10");
        assert_eq!(level_label(0.025), "2.5");
        assert_eq!(file_stem("D-Tree"), "d-tree");
    }

    #[test]
    fn empty_report_gives_header_only_tables() {
        let files = render_report(&ExperimentReport::default(), &OutputFormat::all());
        for (name, body) in &files {
            if name.ends_with(".csv") {
                assert_eq!(body.lines().count(), 1, "{name}: {body:?}");
            }
        }
        let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
        assert!(names.contains(&"report.json"));
        assert!(names.contains(&"accuracy.csv"));
    }
}
