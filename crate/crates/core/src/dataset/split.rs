use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.25,
            seed: 42,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(DatasetError::InvalidSplit(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Sample positions of each side of a split, ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Number of test samples drawn from a group of `count`: `round(fraction * count)`,
/// kept below `count` so every class stays represented in training.
fn test_count(fraction: f64, count: usize) -> usize {
    let n = (fraction * count as f64).round() as usize;
    n.min(count.saturating_sub(1))
}

/// Partitions sample positions into train and test.
///
/// Stratified: each label's positions (in sample order) are shuffled with the
/// shared generator, labels visited in lexicographic order, and the first
/// `round(fraction * count)` go to test. Unstratified: one shuffle of all
/// positions.
pub fn split_indices<T: Scalar>(
    d: &Dataset<T>,
    spec: &SplitSpec,
) -> Result<SplitIndices, DatasetError> {
    spec.validate()?;
    if d.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut rng = SeededRng::new(spec.seed);
    let mut train = Vec::with_capacity(d.len());
    let mut test = Vec::new();

    if spec.stratified {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in d.samples().iter().enumerate() {
            groups.entry(s.label.as_str()).or_default().push(i);
        }
        for (label, members) in &groups {
            if members.len() < 2 {
                return Err(DatasetError::Stratification {
                    label: label.to_string(),
                    count: members.len(),
                });
            }
        }
        for mut members in groups.into_values() {
            rng.shuffle(&mut members);
            let cut = test_count(spec.test_fraction, members.len());
            test.extend_from_slice(&members[..cut]);
            train.extend_from_slice(&members[cut..]);
        }
    } else {
        let mut all: Vec<usize> = (0..d.len()).collect();
        rng.shuffle(&mut all);
        let cut = test_count(spec.test_fraction, all.len());
        test.extend_from_slice(&all[..cut]);
        train.extend_from_slice(&all[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Splits a dataset into (train, test) per `spec`. Both halves keep the full label set.
pub fn stratified_split<T: Scalar>(
    d: &Dataset<T>,
    spec: &SplitSpec,
) -> Result<(Dataset<T>, Dataset<T>), DatasetError> {
    let idx = split_indices(d, spec)?;
    Ok((d.subset(&idx.train), d.subset(&idx.test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LabeledSample, SensorReading};
    use proptest::prelude::*;

    fn toy(labels: &[&str]) -> Dataset<f64> {
        Dataset::new(
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| LabeledSample {
                    reading: SensorReading::from_array([i as f64; 7]),
                    label: l.to_string(),
                })
                .collect(),
        )
    }

    fn balanced(classes: usize, per_class: usize) -> Dataset<f64> {
        let names: Vec<String> = (0..classes).map(|c| format!("crop{c:02}")).collect();
        let labels: Vec<&str> = (0..classes * per_class)
            .map(|i| names[i / per_class].as_str())
            .collect();
        toy(&labels)
    }

    #[test]
    fn balanced_2200_gives_1650_550() {
        let d = balanced(22, 100);
        let (train, test) = stratified_split(&d, &SplitSpec::default()).unwrap();
        assert_eq!(train.len(), 1650);
        assert_eq!(test.len(), 550);
    }

    #[test]
    fn same_seed_same_indices() {
        let d = balanced(22, 100);
        let a = split_indices(&d, &SplitSpec::default()).unwrap();
        let b = split_indices(&d, &SplitSpec::default()).unwrap();
        assert_eq!(a, b);
        let c = split_indices(
            &d,
            &SplitSpec {
                seed: 43,
                ..SplitSpec::default()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn four_sample_fixture_takes_one_test_per_label() {
        // Admissible stratified splits at fraction 0.5: one of {0,1} and one of {2,3}.
        let d = toy(&["a", "a", "b", "b"]);
        let admissible: Vec<Vec<usize>> = vec![vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3]];
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..64 {
            let spec = SplitSpec {
                test_fraction: 0.5,
                seed,
                stratified: true,
            };
            let idx = split_indices(&d, &spec).unwrap();
            assert!(admissible.contains(&idx.test), "{:?}", idx.test);
            seen.insert(idx.test);
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn singleton_label_fails_stratification() {
        let d = toy(&["a", "a", "b"]);
        match split_indices(&d, &SplitSpec::default()).unwrap_err() {
            DatasetError::Stratification { label, count } => {
                assert_eq!(label, "b");
                assert_eq!(count, 1);
            }
            e => panic!("unexpected {e}"),
        }
        let loose = SplitSpec {
            stratified: false,
            ..SplitSpec::default()
        };
        assert!(split_indices(&d, &loose).is_ok());
    }

    #[test]
    fn fraction_bounds_enforced() {
        let d = toy(&["a", "a"]);
        for f in [0.0, 1.0, -0.5, f64::NAN] {
            let spec = SplitSpec {
                test_fraction: f,
                ..SplitSpec::default()
            };
            assert!(matches!(
                split_indices(&d, &spec),
                Err(DatasetError::InvalidSplit(_))
            ));
        }
    }

    proptest! {
        #[test]
        fn split_is_a_partition(
            sizes in proptest::collection::vec(2usize..30, 1..6),
            fraction in 0.05f64..0.95,
            seed in any::<u64>(),
            stratified in any::<bool>(),
        ) {
            let names: Vec<String> = (0..sizes.len()).map(|c| format!("c{c}")).collect();
            let labels: Vec<&str> = sizes.iter().enumerate()
                .flat_map(|(c, &n)| std::iter::repeat_n(names[c].as_str(), n))
                .collect();
            let d = toy(&labels);
            let spec = SplitSpec { test_fraction: fraction, seed, stratified };
            let idx = split_indices(&d, &spec).unwrap();
            prop_assert_eq!(idx.train.len() + idx.test.len(), d.len());
            let mut all: Vec<usize> = idx.train.iter().chain(&idx.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
            if stratified {
                for (c, &n) in sizes.iter().enumerate() {
                    let got = idx.test.iter().filter(|&&i| d.samples()[i].label == names[c]).count();
                    let want = (fraction * n as f64).round() as i64;
                    prop_assert!((got as i64 - want).abs() <= 1);
                }
            }
        }
    }
}
