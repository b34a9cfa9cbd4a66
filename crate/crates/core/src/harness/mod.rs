//! End-to-end experiments.
//!
//! For every run the dataset is split into train and test. For every noise
//! level the training labels are corrupted independently, the corrupted
//! training set is tagged once by cross-validation, and each filter policy
//! is applied to the same tags. Every final learner is then trained on the
//! kept instances and scored on the untouched test set.
//!
//! Seeds are derived from the master seed as
//!
//! ```text
//! run      = master / run r
//! split    = run / split
//! level    = run / level l          (l indexes noise_levels)
//! noise    = level / noise
//! tags     = level / tags           (folds and detector restarts below it)
//! learner  = level / final f / learner k
//! ```
//!
//! so any cell can be replayed on its own, and results do not depend on how
//! runs, levels or folds are scheduled across threads.

mod report;
mod synthetic;

pub use report::{
    emit_report, level_label, render_report, AccuracyCell, AccuracyRow, ClassDistributionRow,
    DatasetSummary, ExperimentReport, LevelProvenance, OutputFormat, PrecisionCell, PrecisionRow,
    RunProvenance, Summary, TreeSizeRow, VotingCell, VotingRow,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::accuracy;
use crate::data::{load_dataset, split_indices, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::filter::{
    apply_filter, cv_tag_audited, FilterPolicy, FilterResult, VotingEnsemble, DEFAULT_CV_FOLDS,
};
use crate::learners::{LearnerSpec, Model};
use crate::noise::{actual_noise_rate, inject_noise, NoiseSpec};
use crate::seed::Seed;

pub const DEFAULT_NOISE_LEVELS: [f64; 6] = [0.0, 0.05, 0.10, 0.20, 0.30, 0.40];
pub const DEFAULT_RUNS: usize = 10;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    File {
        data: PathBuf,
        schema: PathBuf,
    },
    Synthetic {
        #[serde(flatten)]
        spec: SyntheticSpec,
        #[serde(default)]
        seed: u64,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        self.load_relative_to(Path::new(""))
    }

    /// Loads, resolving relative file paths against `base`.
    pub fn load_relative_to(&self, base: &Path) -> Result<Dataset> {
        match self {
            DataSource::File { data, schema } => load_dataset(base.join(data), base.join(schema)),
            DataSource::Synthetic { spec, seed } => generate_synthetic(spec, Seed(*seed)),
        }
    }
}

/// The filter column of the report tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    /// No filtering.
    None,
    /// Single-algorithm filter built from the final learner's own algorithm.
    Sf,
    /// Majority filter over all detectors.
    Mf,
    /// Consensus filter over all detectors.
    Cf,
}

impl FilterKind {
    pub fn all() -> Vec<FilterKind> {
        vec![
            FilterKind::None,
            FilterKind::Sf,
            FilterKind::Mf,
            FilterKind::Cf,
        ]
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::None => "None",
            FilterKind::Sf => "SF",
            FilterKind::Mf => "MF",
            FilterKind::Cf => "CF",
        })
    }
}

fn default_levels() -> Vec<f64> {
    DEFAULT_NOISE_LEVELS.to_vec()
}
fn default_runs() -> usize {
    DEFAULT_RUNS
}
fn default_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}
fn default_folds() -> usize {
    DEFAULT_CV_FOLDS
}
fn default_learners() -> Vec<LearnerSpec> {
    LearnerSpec::default_trio()
}
fn default_filters() -> Vec<FilterKind> {
    FilterKind::all()
}
fn default_true() -> bool {
    true
}

/// Everything that defines an experiment. Field names double as config-file
/// keys and CLI flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Confusable class pairs, by class name.
    #[serde(default)]
    pub noise_pairs: Vec<(String, String)>,
    #[serde(default = "default_levels")]
    pub noise_levels: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_learners")]
    pub detectors: Vec<LearnerSpec>,
    #[serde(default = "default_filters")]
    pub filters: Vec<FilterKind>,
    #[serde(default = "default_learners")]
    pub final_learners: Vec<LearnerSpec>,
    /// Also score a majority vote over the final learners on unfiltered,
    /// MF and CF data.
    #[serde(default = "default_true")]
    pub voting: bool,
    /// Z-score numeric features using statistics of each run's training set.
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Never affects results.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(data: DataSource) -> Self {
        ExperimentConfig {
            data,
            noise_pairs: Vec::new(),
            noise_levels: default_levels(),
            runs: DEFAULT_RUNS,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            cv_folds: DEFAULT_CV_FOLDS,
            detectors: default_learners(),
            filters: default_filters(),
            final_learners: default_learners(),
            voting: true,
            standardize: false,
            seed: 0,
            threads: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if let Some(l) = self.noise_levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::invalid(format!("noise level {l} not in [0,1]")));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction must lie in (0,1)"));
        }
        if self.cv_folds < 2 {
            return Err(Error::invalid("cv_folds must be at least 2"));
        }
        if self.detectors.is_empty() {
            return Err(Error::invalid("at least one detector is required"));
        }
        if self.final_learners.is_empty() {
            return Err(Error::invalid("at least one final learner is required"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be at least 1"));
        }
        for l in self.detectors.iter().chain(&self.final_learners) {
            l.validate()?;
        }
        Ok(())
    }

    /// Resolves named pairs against the dataset's classes.
    pub fn resolve_pairs(&self, ds: &Dataset) -> Result<Vec<(usize, usize)>> {
        let index = |name: &str| {
            ds.class_names()
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::invalid(format!("unknown class `{name}` in noise_pairs")))
        };
        self.noise_pairs
            .iter()
            .map(|(a, b)| Ok((index(a)?, index(b)?)))
            .collect()
    }
}

/// One filter actually applied within a run: the policy plus the table
/// column it reports under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSlot {
    pub kind: FilterKind,
    /// Detector index for single-algorithm filters.
    pub detector: Option<usize>,
    pub name: String,
}

impl FilterSlot {
    fn policy(&self, m: usize) -> Option<FilterPolicy> {
        match self.kind {
            FilterKind::None => None,
            FilterKind::Sf => Some(FilterPolicy::Single {
                detector: self.detector.expect("SF slot has a detector"),
            }),
            FilterKind::Mf => Some(FilterPolicy::majority(m)),
            FilterKind::Cf => Some(FilterPolicy::consensus(m)),
        }
    }
}

/// The concrete filter slots for a config: one SF slot per detector whose
/// algorithm is also a final learner.
pub fn filter_slots(cfg: &ExperimentConfig) -> Vec<FilterSlot> {
    let mut slots = Vec::new();
    for &kind in &cfg.filters {
        match kind {
            FilterKind::Sf => {
                for (d, det) in cfg.detectors.iter().enumerate() {
                    if cfg.final_learners.iter().any(|l| l.kind() == det.kind()) {
                        slots.push(FilterSlot {
                            kind,
                            detector: Some(d),
                            name: format!("SF[{}]", det.label()),
                        });
                    }
                }
            }
            _ => slots.push(FilterSlot {
                kind,
                detector: None,
                name: kind.to_string(),
            }),
        }
    }
    slots
}

/// Whether `learner` is evaluated under `slot`: SF slots only train the
/// final learners of their own algorithm (the first detector of that kind).
fn slot_applies(cfg: &ExperimentConfig, slot: &FilterSlot, learner: &LearnerSpec) -> bool {
    match slot.detector {
        None => true,
        Some(d) => {
            let first = cfg
                .detectors
                .iter()
                .position(|x| x.kind() == learner.kind());
            first == Some(d)
        }
    }
}

/// Per-run raw numbers, aggregated into the report afterwards.
#[derive(Debug, Clone)]
pub(crate) struct RunOutcome {
    pub provenance: RunProvenance,
    pub train_size: usize,
    pub original_hist: Vec<usize>,
    pub levels: Vec<LevelOutcome>,
}

#[derive(Debug, Clone)]
pub(crate) struct LevelOutcome {
    pub actual_noise: f64,
    pub corrupted: usize,
    pub corrupted_hist: Vec<usize>,
    pub slots: Vec<SlotOutcome>,
}

#[derive(Debug, Clone)]
pub(crate) struct SlotOutcome {
    pub discarded: usize,
    pub intersection: usize,
    pub kept_hist: Vec<usize>,
    /// Accuracy (fraction) and leaf count per final learner, `None` when the
    /// learner is not evaluated under this slot.
    pub learners: Vec<Option<(f64, Option<usize>)>>,
    pub vote_accuracy: Option<f64>,
}

/// Loads the configured dataset and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let ds = cfg.data.load()?;
    run_experiment_on(cfg, &ds)
}

/// Runs the experiment on an already loaded dataset.
pub fn run_experiment_on(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| run_inner(cfg, ds)),
        None => run_inner(cfg, ds),
    }
}

fn run_inner(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ExperimentReport> {
    let pairs = cfg.resolve_pairs(ds)?;
    let slots = filter_slots(cfg);
    let master = Seed(cfg.seed);
    let outcomes: Vec<RunOutcome> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            run_one(
                cfg,
                ds,
                &pairs,
                &slots,
                master.derive_indexed("run", r as u64),
                r,
            )
        })
        .collect::<Result<_>>()?;
    Ok(report::aggregate(cfg, ds, &slots, outcomes))
}

fn run_one(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    pairs: &[(usize, usize)],
    slots: &[FilterSlot],
    run_seed: Seed,
    run: usize,
) -> Result<RunOutcome> {
    let split_seed = run_seed.derive("split");
    let (train_idx, test_idx) = split_indices(ds.len(), cfg.train_fraction, split_seed)
        .map_err(|e| e.context(format!("run {run}: split")))?;
    let (mut train, mut test) = (ds.subset(&train_idx), ds.subset(&test_idx));
    if cfg.standardize {
        let z = Standardizer::fit(&train);
        train = z.transform(&train);
        test = z.transform(&test);
    }
    let test_set: HashSet<usize> = test_idx.iter().copied().collect();

    let mut provenance = RunProvenance {
        run,
        run_seed: run_seed.0,
        split_seed: split_seed.0,
        train_size: train.len(),
        test_size: test.len(),
        levels: Vec::new(),
    };

    let levels: Vec<(LevelOutcome, LevelProvenance)> = cfg
        .noise_levels
        .par_iter()
        .enumerate()
        .map(|(li, &level)| {
            run_level(
                cfg, &train, &test, &train_idx, &test_set, pairs, slots, run_seed, li, level,
            )
            .map_err(|e| e.context(format!("run {run}, noise level {level}")))
        })
        .collect::<Result<_>>()?;

    let mut outcomes = Vec::with_capacity(levels.len());
    for (o, p) in levels {
        outcomes.push(o);
        provenance.levels.push(p);
    }
    Ok(RunOutcome {
        provenance,
        train_size: train.len(),
        original_hist: train.class_histogram(),
        levels: outcomes,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_level(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    train_idx: &[usize],
    test_set: &HashSet<usize>,
    pairs: &[(usize, usize)],
    slots: &[FilterSlot],
    run_seed: Seed,
    li: usize,
    level: f64,
) -> Result<(LevelOutcome, LevelProvenance)> {
    let level_seed = run_seed.derive_indexed("level", li as u64);
    let noise_seed = level_seed.derive("noise");
    let tag_seed = level_seed.derive("tags");

    let (noisy, mask) = inject_noise(train, &NoiseSpec::new(pairs.to_vec(), level), noise_seed)?;
    let m = cfg.detectors.len();
    let needs_tags = slots.iter().any(|s| s.kind != FilterKind::None);
    let tags = if needs_tags {
        let (tags, audits) = cv_tag_audited(&noisy, &cfg.detectors, cfg.cv_folds, tag_seed)?;
        for a in &audits {
            // Tagging models must never see their own fold or any test row.
            let fold: HashSet<usize> = a.tagged.iter().copied().collect();
            if a.trained_on
                .iter()
                .any(|i| fold.contains(i) || test_set.contains(&train_idx[*i]))
            {
                return Err(Error::invalid(format!(
                    "leakage detected in fold {} detector {}",
                    a.fold, a.detector
                )));
            }
        }
        Some(tags)
    } else {
        None
    };

    let mut slot_outcomes = Vec::with_capacity(slots.len());
    for (si, slot) in slots.iter().enumerate() {
        let result = match (slot.policy(m), &tags) {
            (Some(p), Some(t)) => apply_filter(t, p)?,
            _ => FilterResult::keep_all(noisy.len()),
        };
        if result.kept.is_empty() {
            return Err(Error::EmptyFilteredSet.context(format!("filter {}", slot.name)));
        }
        let kept = noisy.subset(&result.kept);
        let intersection = result
            .discarded
            .iter()
            .filter(|&&i| mask.contains(i))
            .count();

        let mut learners = Vec::with_capacity(cfg.final_learners.len());
        let mut models: Vec<Model> = Vec::new();
        for (k, spec) in cfg.final_learners.iter().enumerate() {
            if !slot_applies(cfg, slot, spec) {
                learners.push(None);
                continue;
            }
            let seed = level_seed
                .derive_indexed("final", si as u64)
                .derive_indexed("learner", k as u64);
            let model = spec.train(&kept, seed).map_err(|e| {
                e.context(format!("filter {}, learner {}", slot.name, spec.label()))
            })?;
            let acc = accuracy(&model, test)?;
            let leaves = model.as_tree().map(|t| t.leaf_count());
            learners.push(Some((acc, leaves)));
            models.push(model);
        }
        let vote_accuracy = if cfg.voting && slot.kind != FilterKind::Sf {
            Some(accuracy(&VotingEnsemble::new(models)?, test)?)
        } else {
            None
        };
        slot_outcomes.push(SlotOutcome {
            discarded: result.discarded.len(),
            intersection,
            kept_hist: kept.class_histogram(),
            learners,
            vote_accuracy,
        });
    }

    Ok((
        LevelOutcome {
            actual_noise: actual_noise_rate(&mask, noisy.len())?,
            corrupted: mask.len(),
            corrupted_hist: noisy.class_histogram(),
            slots: slot_outcomes,
        },
        LevelProvenance {
            level,
            noise_seed: noise_seed.0,
            tag_seed: tag_seed.0,
            corrupted: mask.len(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_from_toml() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
noise_pairs = [["c0", "c1"]]
[data]
source = "synthetic"
instances_per_class = [20, 20]
separation = 4.0
"#,
        )
        .unwrap();
        assert_eq!(cfg.runs, 10);
        assert_eq!(cfg.cv_folds, 4);
        assert_eq!(cfg.train_fraction, 0.9);
        assert_eq!(cfg.noise_levels, DEFAULT_NOISE_LEVELS.to_vec());
        assert_eq!(cfg.filters, FilterKind::all());
        assert_eq!(cfg.detectors, LearnerSpec::default_trio());
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = ExperimentConfig::new(DataSource::Synthetic {
            spec: SyntheticSpec::new(vec![5, 5], 3.0),
            seed: 0,
        });
        cfg.runs = 0;
        assert!(cfg.validate().is_err());
        cfg.runs = 1;
        cfg.noise_levels = vec![1.2];
        assert!(cfg.validate().is_err());
        cfg.noise_levels = vec![0.1];
        cfg.noise_pairs = vec![("c0".into(), "nope".into())];
        let ds = cfg.data.load().unwrap();
        assert!(cfg.resolve_pairs(&ds).is_err());
    }

    #[test]
    fn sf_slots_follow_final_learners() {
        let mut cfg = ExperimentConfig::new(DataSource::Synthetic {
            spec: SyntheticSpec::new(vec![5, 5], 3.0),
            seed: 0,
        });
        cfg.final_learners = vec![LearnerSpec::nearest_neighbor()];
        let names: Vec<String> = filter_slots(&cfg).into_iter().map(|s| s.name).collect();
        assert_eq!(names, vec!["None", "SF[1-NN]", "MF", "CF"]);
    }
}
