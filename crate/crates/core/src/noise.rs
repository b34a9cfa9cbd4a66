//! Label corruption between confusable class pairs.
//!
//! Each training instance whose class belongs to at least one declared pair
//! is corrupted independently with probability `rate`. A corrupted instance
//! takes the label of a partner class, chosen uniformly when its class has
//! more than one partner.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Unordered class-index pairs.
    pub pairs: Vec<(usize, usize)>,
    pub rate: f64,
}

impl NoiseSpec {
    pub fn new(pairs: Vec<(usize, usize)>, rate: f64) -> Self {
        NoiseSpec { pairs, rate }
    }

    pub fn validate(&self, class_count: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::invalid(format!(
                "noise rate {} not in [0,1]",
                self.rate
            )));
        }
        for &(a, b) in &self.pairs {
            if a == b {
                return Err(Error::invalid(format!("pair ({a},{b}) repeats a class")));
            }
            if a >= class_count || b >= class_count {
                return Err(Error::invalid(format!(
                    "pair ({a},{b}) references a class outside 0..{class_count}"
                )));
            }
        }
        Ok(())
    }

    /// Sorted, de-duplicated partner list per class.
    pub fn partners(&self, class_count: usize) -> Vec<Vec<usize>> {
        let mut p = vec![Vec::new(); class_count];
        for &(a, b) in &self.pairs {
            p[a].push(b);
            p[b].push(a);
        }
        for v in &mut p {
            v.sort_unstable();
            v.dedup();
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corruption {
    pub original: usize,
    pub corrupted: usize,
}

/// Which instances were relabelled, keyed by instance index.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorruptionMask {
    pub entries: BTreeMap<usize, Corruption>,
}

impl CorruptionMask {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, instance: usize) -> bool {
        self.entries.contains_key(&instance)
    }

    /// Puts the original labels back.
    pub fn restore(&self, corrupted: &Dataset) -> Result<Dataset> {
        let mut labels = corrupted.labels();
        for (&i, c) in &self.entries {
            let slot = labels
                .get_mut(i)
                .ok_or_else(|| Error::invalid(format!("mask entry {i} beyond dataset")))?;
            *slot = c.original;
        }
        corrupted.with_labels(&labels)
    }

    /// Re-applies the recorded corruption to a clean dataset.
    pub fn apply(&self, clean: &Dataset) -> Result<Dataset> {
        let mut labels = clean.labels();
        for (&i, c) in &self.entries {
            match labels.get_mut(i) {
                Some(l) if *l == c.original => *l = c.corrupted,
                Some(l) => {
                    return Err(Error::invalid(format!(
                        "instance {i} has label {l}, mask expects {}",
                        c.original
                    )))
                }
                None => return Err(Error::invalid(format!("mask entry {i} beyond dataset"))),
            }
        }
        clean.with_labels(&labels)
    }

    /// `instance,original,new` rows with a header line.
    pub fn to_delimited_string(&self) -> String {
        let mut out = String::from("instance,original,new\n");
        for (i, c) in &self.entries {
            let _ = writeln!(out, "{i},{},{}", c.original, c.corrupted);
        }
        out
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut entries = BTreeMap::new();
        for rec in rdr.deserialize::<(usize, usize, usize)>() {
            let (i, original, corrupted) = rec?;
            if original == corrupted {
                return Err(Error::invalid(format!(
                    "mask entry {i} does not change the label"
                )));
            }
            if entries
                .insert(
                    i,
                    Corruption {
                        original,
                        corrupted,
                    },
                )
                .is_some()
            {
                return Err(Error::invalid(format!("mask lists instance {i} twice")));
            }
        }
        Ok(CorruptionMask { entries })
    }
}

/// Corrupts training labels according to `spec`. The input is untouched.
pub fn inject_noise(
    train: &Dataset,
    spec: &NoiseSpec,
    seed: Seed,
) -> Result<(Dataset, CorruptionMask)> {
    spec.validate(train.class_count())?;
    let partners = spec.partners(train.class_count());
    let mut rng = seed.rng();
    let mut labels = train.labels();
    let mut mask = CorruptionMask::default();
    for (i, label) in labels.iter_mut().enumerate() {
        let options = &partners[*label];
        if options.is_empty() {
            continue;
        }
        if rng.random_bool(spec.rate) {
            let new = options[rng.random_range(0..options.len())];
            mask.entries.insert(
                i,
                Corruption {
                    original: *label,
                    corrupted: new,
                },
            );
            *label = new;
        }
    }
    Ok((train.with_labels(&labels)?, mask))
}

/// `|M| / train_size`.
pub fn actual_noise_rate(mask: &CorruptionMask, train_size: usize) -> Result<f64> {
    if train_size == 0 {
        return Err(Error::invalid("train size must be positive"));
    }
    Ok(mask.len() as f64 / train_size as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Instance, Schema};

    fn labelled(labels: &[usize], classes: usize) -> Dataset {
        let names: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
        let schema = Schema::new(
            vec![Column::numeric("x"), Column::categorical("y", names)],
            "y",
        )
        .unwrap();
        Dataset::new(
            schema,
            labels
                .iter()
                .enumerate()
                .map(|(i, &l)| Instance::numeric(&[i as f64], l))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_and_full_rates() {
        let ds = labelled(&[0, 1, 0, 1, 1], 2);
        let (c, m) = inject_noise(&ds, &NoiseSpec::new(vec![(0, 1)], 0.0), Seed(1)).unwrap();
        assert_eq!(c, ds);
        assert!(m.is_empty());
        let (c, m) = inject_noise(&ds, &NoiseSpec::new(vec![(0, 1)], 1.0), Seed(1)).unwrap();
        assert_eq!(m.len(), ds.len());
        assert_eq!(c.labels(), vec![1, 0, 1, 0, 0]);
    }

    #[test]
    fn classes_outside_pairs_untouched() {
        let ds = labelled(&[0, 1, 2, 2, 0, 2], 3);
        let (c, m) = inject_noise(&ds, &NoiseSpec::new(vec![(0, 1)], 1.0), Seed(9)).unwrap();
        for (i, (a, b)) in ds.labels().iter().zip(c.labels()).enumerate() {
            if *a == 2 {
                assert_eq!(b, 2);
                assert!(!m.contains(i));
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(NoiseSpec::new(vec![(0, 0)], 0.1).validate(2).is_err());
        assert!(NoiseSpec::new(vec![(0, 2)], 0.1).validate(2).is_err());
        assert!(NoiseSpec::new(vec![(0, 1)], 1.5).validate(2).is_err());
        assert_eq!(
            NoiseSpec::new(vec![(2, 3), (3, 4), (4, 3)], 0.1).partners(5)[3],
            vec![2, 4]
        );
    }

    #[test]
    fn noise_rate_arithmetic() {
        let mut m = CorruptionMask::default();
        assert_eq!(actual_noise_rate(&m, 1000).unwrap(), 0.0);
        for i in 0..50 {
            m.entries.insert(
                i,
                Corruption {
                    original: 0,
                    corrupted: 1,
                },
            );
        }
        assert_eq!(actual_noise_rate(&m, 1000).unwrap(), 0.05);
        assert!(actual_noise_rate(&m, 0).is_err());
    }

    #[test]
    fn mask_text_round_trip_and_replay() {
        let ds = labelled(&[0, 1, 2, 1, 0, 2, 1], 3);
        let (c, m) =
            inject_noise(&ds, &NoiseSpec::new(vec![(0, 1), (1, 2)], 0.6), Seed(4)).unwrap();
        let text = m.to_delimited_string();
        let back = CorruptionMask::from_reader(text.as_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.apply(&ds).unwrap(), c);
        assert_eq!(back.restore(&c).unwrap(), ds);
    }
}
