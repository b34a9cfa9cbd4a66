//! Cross-validated tagging and discard policies.
//!
//! [`cv_tag`] splits the training set into `n` folds, trains each of the `m`
//! detectors on the other `n - 1` folds and records, for every held-out
//! instance, whether the detector reproduces its training label. A
//! [`FilterPolicy`] then turns the resulting [`TagMatrix`] into a
//! keep/discard decision per instance.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_folds, Dataset, Instance};
use crate::error::{Error, Result};
use crate::learners::{argmax_first, Classifier, LearnerSpec, Model};
use crate::seed::Seed;

pub const DEFAULT_CV_FOLDS: usize = 4;

/// Per-instance, per-detector verdicts: `true` when the detector classified
/// the instance as its training label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagMatrix {
    verdicts: Vec<Vec<bool>>,
    detectors: Vec<LearnerSpec>,
    fold_of: Vec<usize>,
}

/// Which training instances one tagging model saw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingAudit {
    pub fold: usize,
    pub detector: usize,
    pub trained_on: Vec<usize>,
    pub tagged: Vec<usize>,
}

impl TagMatrix {
    /// Builds a matrix from raw verdict rows. All rows must have the same
    /// non-zero length `m` and there must be `m` detector specs.
    pub fn from_verdicts(
        verdicts: Vec<Vec<bool>>,
        detectors: Vec<LearnerSpec>,
        fold_of: Vec<usize>,
    ) -> Result<Self> {
        let m = detectors.len();
        if m == 0 {
            return Err(Error::invalid("a tag matrix needs at least one detector"));
        }
        if verdicts.iter().any(|row| row.len() != m) {
            return Err(Error::invalid(
                "every instance needs exactly one verdict per detector",
            ));
        }
        if fold_of.len() != verdicts.len() {
            return Err(Error::invalid(
                "fold assignment length differs from instance count",
            ));
        }
        Ok(TagMatrix {
            verdicts,
            detectors,
            fold_of,
        })
    }

    pub fn len(&self) -> usize {
        self.verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.is_empty()
    }

    pub fn detector_count(&self) -> usize {
        self.detectors.len()
    }

    pub fn detectors(&self) -> &[LearnerSpec] {
        &self.detectors
    }

    pub fn verdicts(&self, instance: usize) -> &[bool] {
        &self.verdicts[instance]
    }

    pub fn fold_of(&self, instance: usize) -> usize {
        self.fold_of[instance]
    }

    /// Number of detectors that got `instance` wrong.
    pub fn wrong_count(&self, instance: usize) -> usize {
        self.verdicts[instance].iter().filter(|&&ok| !ok).count()
    }

    /// Flat table `instance,fold,<detector...>` with 1 = correct, 0 = wrong.
    /// Detector columns are named `d<index>_<label>`.
    pub fn to_delimited_string(&self) -> String {
        let mut out = String::from("instance,fold");
        for (d, spec) in self.detectors.iter().enumerate() {
            let _ = write!(out, ",d{d}_{}", spec.label());
        }
        out.push('\n');
        for (i, row) in self.verdicts.iter().enumerate() {
            let _ = write!(out, "{i},{}", self.fold_of[i]);
            for &v in row {
                out.push_str(if v { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

/// Tags every training instance with the verdicts of `detectors`, each
/// trained without the instance's fold.
pub fn cv_tag(
    train: &Dataset,
    detectors: &[LearnerSpec],
    n_folds: usize,
    seed: Seed,
) -> Result<TagMatrix> {
    cv_tag_audited(train, detectors, n_folds, seed).map(|(t, _)| t)
}

/// [`cv_tag`] that also returns, for every `(fold, detector)` model, the
/// training indices it was fit on.
pub fn cv_tag_audited(
    train: &Dataset,
    detectors: &[LearnerSpec],
    n_folds: usize,
    seed: Seed,
) -> Result<(TagMatrix, Vec<TrainingAudit>)> {
    if detectors.is_empty() {
        return Err(Error::invalid("at least one detector is required"));
    }
    for d in detectors {
        d.validate()?;
    }
    let n = train.len();
    let folds = make_folds(n, n_folds, seed.derive("folds"))?;
    let mut fold_of = vec![0; n];
    for (f, part) in folds.iter().enumerate() {
        for &i in part {
            fold_of[i] = f;
        }
    }

    let jobs: Vec<(usize, usize)> = (0..n_folds)
        .flat_map(|f| (0..detectors.len()).map(move |d| (f, d)))
        .collect();
    let results: Vec<Result<(TrainingAudit, Vec<bool>)>> = jobs
        .par_iter()
        .map(|&(f, d)| {
            let complement: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            if complement.is_empty() {
                return Err(Error::invalid(format!("fold {f} leaves no training data")));
            }
            let model = detectors[d]
                .train(
                    &train.subset(&complement),
                    seed.derive_indexed("fold", f as u64)
                        .derive_indexed("detector", d as u64),
                )
                .map_err(|e| e.context(format!("training detector {d} for fold {f}")))?;
            let held_out = &folds[f];
            let verdicts = held_out
                .iter()
                .map(|&i| {
                    let x = &train.instances()[i];
                    model.classify(x) == x.label
                })
                .collect();
            Ok((
                TrainingAudit {
                    fold: f,
                    detector: d,
                    trained_on: complement,
                    tagged: held_out.clone(),
                },
                verdicts,
            ))
        })
        .collect();

    let mut verdicts = vec![vec![true; detectors.len()]; n];
    let mut audits = Vec::with_capacity(jobs.len());
    for r in results {
        let (audit, v) = r?;
        for (&i, ok) in audit.tagged.iter().zip(v) {
            verdicts[i][audit.detector] = ok;
        }
        audits.push(audit);
    }
    let tags = TagMatrix::from_verdicts(verdicts, detectors.to_vec(), fold_of)?;
    Ok((tags, audits))
}

/// Discard rule over a tag matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterPolicy {
    /// Discard what one detector got wrong.
    Single { detector: usize },
    /// Discard instances that at least `wrong` detectors got wrong.
    Threshold { wrong: usize },
}

impl FilterPolicy {
    /// More than half of `m` detectors wrong.
    pub fn majority(m: usize) -> Self {
        FilterPolicy::Threshold { wrong: m / 2 + 1 }
    }

    /// All `m` detectors wrong.
    pub fn consensus(m: usize) -> Self {
        FilterPolicy::Threshold { wrong: m }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match *self {
            FilterPolicy::Single { detector } if detector >= m => Err(Error::invalid(format!(
                "detector index {detector} out of range for {m} detectors"
            ))),
            FilterPolicy::Threshold { wrong } if wrong == 0 || wrong > m => {
                Err(Error::invalid(format!("threshold {wrong} outside 1..={m}")))
            }
            _ => Ok(()),
        }
    }

    fn discards(&self, tags: &TagMatrix, i: usize) -> bool {
        match *self {
            FilterPolicy::Single { detector } => !tags.verdicts(i)[detector],
            FilterPolicy::Threshold { wrong } => tags.wrong_count(i) >= wrong,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterResult {
    pub kept: Vec<usize>,
    pub discarded: Vec<usize>,
}

impl FilterResult {
    /// Keeps everything.
    pub fn keep_all(n: usize) -> Self {
        FilterResult {
            kept: (0..n).collect(),
            discarded: Vec::new(),
        }
    }
}

pub fn apply_filter(tags: &TagMatrix, policy: FilterPolicy) -> Result<FilterResult> {
    policy.validate(tags.detector_count())?;
    let (discarded, kept): (Vec<usize>, Vec<usize>) =
        (0..tags.len()).partition(|&i| policy.discards(tags, i));
    Ok(FilterResult { kept, discarded })
}

/// Removes the instances `policy` discards and trains `final_learner` on the
/// rest.
pub fn filter_and_retrain(
    train: &Dataset,
    tags: &TagMatrix,
    policy: FilterPolicy,
    final_learner: &LearnerSpec,
    seed: Seed,
) -> Result<(FilterResult, Model)> {
    if tags.len() != train.len() {
        return Err(Error::invalid(
            "tag matrix was not built over this training set",
        ));
    }
    let result = apply_filter(tags, policy)?;
    if result.kept.is_empty() {
        return Err(Error::EmptyFilteredSet);
    }
    let model = final_learner.train(&train.subset(&result.kept), seed)?;
    Ok((result, model))
}

/// Unweighted plurality vote; ties go to the smallest class index.
pub fn majority_vote(predictions: &[usize]) -> Option<usize> {
    let max = *predictions.iter().max()?;
    let mut tally = vec![0usize; max + 1];
    for &p in predictions {
        tally[p] += 1;
    }
    Some(argmax_first(&tally))
}

pub fn majority_vote_classify<C: Classifier>(models: &[C], x: &Instance) -> Result<usize> {
    let preds: Vec<usize> = models.iter().map(|m| m.classify(x)).collect();
    majority_vote(&preds).ok_or_else(|| Error::invalid("majority vote over zero models"))
}

/// A fixed set of models combined by [`majority_vote`].
#[derive(Debug, Clone)]
pub struct VotingEnsemble {
    models: Vec<Model>,
}

impl VotingEnsemble {
    pub fn new(models: Vec<Model>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::invalid("a voting ensemble needs at least one model"));
        }
        Ok(VotingEnsemble { models })
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }
}

impl Classifier for VotingEnsemble {
    fn classify(&self, x: &Instance) -> usize {
        majority_vote_classify(&self.models, x).expect("non-empty by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(rows: &[[bool; 3]]) -> TagMatrix {
        TagMatrix::from_verdicts(
            rows.iter().map(|r| r.to_vec()).collect(),
            LearnerSpec::default_trio(),
            vec![0; rows.len()],
        )
        .unwrap()
    }

    #[test]
    fn policy_examples() {
        let t = tags(&[
            [false, false, true],
            [true, true, true],
            [false, false, false],
        ]);
        let mf = apply_filter(&t, FilterPolicy::majority(3)).unwrap();
        let cf = apply_filter(&t, FilterPolicy::consensus(3)).unwrap();
        assert_eq!(mf.discarded, vec![0, 2]);
        assert_eq!(cf.discarded, vec![2]);
        for d in 0..3 {
            let sf = apply_filter(&t, FilterPolicy::Single { detector: d }).unwrap();
            assert!(sf.discarded.contains(&2));
            assert!(!sf.discarded.contains(&1));
        }
    }

    #[test]
    fn majority_threshold_for_even_m() {
        assert_eq!(
            FilterPolicy::majority(4),
            FilterPolicy::Threshold { wrong: 3 }
        );
        assert_eq!(
            FilterPolicy::majority(3),
            FilterPolicy::Threshold { wrong: 2 }
        );
        assert_eq!(
            FilterPolicy::consensus(3),
            FilterPolicy::Threshold { wrong: 3 }
        );
    }

    #[test]
    fn policy_validation() {
        let t = tags(&[[true, true, true]]);
        assert!(apply_filter(&t, FilterPolicy::Single { detector: 3 }).is_err());
        assert!(apply_filter(&t, FilterPolicy::Threshold { wrong: 0 }).is_err());
        assert!(apply_filter(&t, FilterPolicy::Threshold { wrong: 4 }).is_err());
    }

    #[test]
    fn vote_examples() {
        assert_eq!(majority_vote(&[0, 0, 1]), Some(0));
        assert_eq!(majority_vote(&[2, 1, 0]), Some(0));
        assert_eq!(majority_vote(&[2, 1, 2]), Some(2));
        assert_eq!(majority_vote(&[3]), Some(3));
        assert_eq!(majority_vote(&[]), None);
        let none: Vec<Model> = vec![];
        assert!(majority_vote_classify(&none, &Instance::new(vec![], 0)).is_err());
    }

    #[test]
    fn delimited_export() {
        let t = tags(&[[true, false, true]]);
        assert_eq!(
            t.to_delimited_string(),
            "instance,fold,d0_D-Tree,d1_1-NN,d2_LM\n0,0,1,0,1\n"
        );
    }
}
