//! Dataset representation: visual features, labels, class prototypes,
//! seen/unseen class lists, and the three row splits.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::num::Matrix;

/// Row splits over the feature matrix. Every row index belongs to exactly
/// one list.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Splits {
    pub seen_train: Vec<usize>,
    pub seen_heldout: Vec<usize>,
    pub unseen_test: Vec<usize>,
}

/// Immutable zero-shot dataset.
///
/// Class indices are dense: the set of seen plus unseen classes is exactly
/// `0..s+u`, and prototype row `c` is the prototype of class `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    visual: Matrix,
    labels: Vec<usize>,
    prototypes: Matrix,
    seen_classes: Vec<usize>,
    unseen_classes: Vec<usize>,
    splits: Splits,
}

impl Dataset {
    pub fn new(
        visual: Matrix,
        labels: Vec<usize>,
        prototypes: Matrix,
        seen_classes: Vec<usize>,
        unseen_classes: Vec<usize>,
        splits: Splits,
    ) -> Result<Self> {
        let n = visual.rows();
        if labels.len() != n {
            return Err(Error::ShapeMismatch {
                context: "Dataset::new",
                expected: format!("{n} labels"),
                got: format!("{}", labels.len()),
            });
        }
        let s = seen_classes.len();
        let u = unseen_classes.len();
        let total = s + u;
        if prototypes.rows() != total {
            return Err(Error::ShapeMismatch {
                context: "Dataset::new",
                expected: format!("{total} prototype rows"),
                got: format!("{}", prototypes.rows()),
            });
        }

        let seen_set: HashSet<usize> = seen_classes.iter().copied().collect();
        let unseen_set: HashSet<usize> = unseen_classes.iter().copied().collect();
        if seen_set.len() != s || unseen_set.len() != u {
            return Err(Error::SplitOverlap {
                reason: "duplicate class index in a class list".into(),
            });
        }
        if let Some(c) = seen_set.intersection(&unseen_set).next() {
            return Err(Error::SplitOverlap {
                reason: format!("class {c} listed as both seen and unseen"),
            });
        }
        for &c in seen_classes.iter().chain(&unseen_classes) {
            if c >= total {
                return Err(Error::UnknownClass { class: c, known: total });
            }
        }
        for &y in &labels {
            if y >= total {
                return Err(Error::UnknownClass { class: y, known: total });
            }
        }

        // Row coverage: each row in exactly one split list.
        let mut owner = vec![0u8; n];
        let lists: [(&[usize], &str); 3] = [
            (&splits.seen_train, "seen_train"),
            (&splits.seen_heldout, "seen_heldout"),
            (&splits.unseen_test, "unseen_test"),
        ];
        for (list, name) in lists {
            for &r in list {
                if r >= n {
                    return Err(Error::InvalidSplit {
                        reason: format!("{name} references row {r} but dataset has {n} rows"),
                    });
                }
                if owner[r] != 0 {
                    return Err(Error::SplitOverlap {
                        reason: format!("row {r} appears in more than one split list"),
                    });
                }
                owner[r] = 1;
            }
        }
        if let Some(r) = owner.iter().position(|&o| o == 0) {
            return Err(Error::InvalidSplit {
                reason: format!("row {r} missing from all split lists"),
            });
        }

        // Label-side consistency per split.
        for &r in splits.seen_train.iter().chain(&splits.seen_heldout) {
            if !seen_set.contains(&labels[r]) {
                return Err(Error::InvalidSplit {
                    reason: format!("seen split row {r} has non-seen label {}", labels[r]),
                });
            }
        }
        for &r in &splits.unseen_test {
            if !unseen_set.contains(&labels[r]) {
                return Err(Error::InvalidSplit {
                    reason: format!("unseen_test row {r} has non-unseen label {}", labels[r]),
                });
            }
        }

        Ok(Dataset {
            visual,
            labels,
            prototypes,
            seen_classes,
            unseen_classes,
            splits,
        })
    }

    pub fn visual(&self) -> &Matrix {
        &self.visual
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn prototypes(&self) -> &Matrix {
        &self.prototypes
    }

    pub fn seen_classes(&self) -> &[usize] {
        &self.seen_classes
    }

    pub fn unseen_classes(&self) -> &[usize] {
        &self.unseen_classes
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn n_rows(&self) -> usize {
        self.visual.rows()
    }

    pub fn visual_dim(&self) -> usize {
        self.visual.cols()
    }

    pub fn proto_dim(&self) -> usize {
        self.prototypes.cols()
    }

    pub fn n_seen(&self) -> usize {
        self.seen_classes.len()
    }

    pub fn n_unseen(&self) -> usize {
        self.unseen_classes.len()
    }

    pub fn n_classes(&self) -> usize {
        self.prototypes.rows()
    }

    /// Classifier slot of a class: seen classes take slots `0..s` in list
    /// order, unseen classes take `s..s+u` in list order.
    pub fn slot_of_class(&self, class: usize) -> Option<usize> {
        if let Some(i) = self.seen_classes.iter().position(|&c| c == class) {
            return Some(i);
        }
        self.unseen_classes
            .iter()
            .position(|&c| c == class)
            .map(|j| self.n_seen() + j)
    }

    /// Inverse of [`slot_of_class`](Self::slot_of_class).
    pub fn class_of_slot(&self, slot: usize) -> Option<usize> {
        let s = self.n_seen();
        if slot < s {
            Some(self.seen_classes[slot])
        } else {
            self.unseen_classes.get(slot - s).copied()
        }
    }
}

/// Arithmetic mean of `visual` rows per class, ordered as `classes`.
pub fn class_means(visual: &Matrix, labels: &[usize], classes: &[usize]) -> Result<Matrix> {
    if visual.rows() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "class_means",
            expected: format!("{} labels", visual.rows()),
            got: format!("{}", labels.len()),
        });
    }
    let rows: Vec<usize> = (0..visual.rows()).collect();
    class_means_over_rows(visual, labels, &rows, classes)
}

/// [`class_means`] restricted to a subset of rows (e.g. the seen-train
/// split), avoiding a copy of the feature matrix.
pub fn class_means_over_rows(
    visual: &Matrix,
    labels: &[usize],
    rows: &[usize],
    classes: &[usize],
) -> Result<Matrix> {
    let mut means = Matrix::zeros(classes.len(), visual.cols());
    for (i, &class) in classes.iter().enumerate() {
        let mut count = 0usize;
        for &r in rows {
            if labels[r] == class {
                for (m, &v) in means.row_mut(i).iter_mut().zip(visual.row(r)) {
                    *m += v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::InvalidInput {
                context: "class_means",
                reason: format!("class {class} has zero samples"),
            });
        }
        let inv = 1.0 / count as f64;
        for m in means.row_mut(i) {
            *m *= inv;
        }
    }
    Ok(means)
}

/// Keep `ceil(fraction * n_c)` uniformly random seen-train rows per seen
/// class; held-out and unseen splits are untouched. Rows dropped from
/// seen-train are removed from the dataset so the split-coverage invariant
/// keeps holding.
pub fn subsample_per_class(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput {
            context: "subsample_per_class",
            reason: format!("fraction {fraction} outside (0, 1]"),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // Seen-train rows per class, in row order.
    let mut per_class: Vec<(usize, Vec<usize>)> = Vec::new();
    for &class in ds.seen_classes() {
        let rows: Vec<usize> = ds
            .splits()
            .seen_train
            .iter()
            .copied()
            .filter(|&r| ds.labels()[r] == class)
            .collect();
        if rows.is_empty() {
            return Err(Error::InvalidInput {
                context: "subsample_per_class",
                reason: format!("seen class {class} has no seen-train samples"),
            });
        }
        per_class.push((class, rows));
    }

    let mut kept_train: Vec<usize> = Vec::new();
    for (_, rows) in &per_class {
        let keep = ((fraction * rows.len() as f64).ceil() as usize).min(rows.len());
        let chosen = rand::seq::index::sample(&mut rng, rows.len(), keep);
        let mut picked: Vec<usize> = chosen.iter().map(|i| rows[i]).collect();
        picked.sort_unstable();
        kept_train.extend(picked);
    }
    kept_train.sort_unstable();

    // Physically rebuild with retained rows in original order.
    let mut retained: Vec<usize> = kept_train
        .iter()
        .chain(&ds.splits().seen_heldout)
        .chain(&ds.splits().unseen_test)
        .copied()
        .collect();
    retained.sort_unstable();

    let mut new_index = vec![usize::MAX; ds.n_rows()];
    for (i, &r) in retained.iter().enumerate() {
        new_index[r] = i;
    }
    let remap = |rows: &[usize]| -> Vec<usize> {
        let mut out: Vec<usize> = rows.iter().map(|&r| new_index[r]).collect();
        out.sort_unstable();
        out
    };

    let visual = ds.visual().select_rows(&retained);
    let labels: Vec<usize> = retained.iter().map(|&r| ds.labels()[r]).collect();
    let splits = Splits {
        seen_train: remap(&kept_train),
        seen_heldout: remap(&ds.splits().seen_heldout),
        unseen_test: remap(&ds.splits().unseen_test),
    };

    Dataset::new(
        visual,
        labels,
        ds.prototypes().clone(),
        ds.seen_classes().to_vec(),
        ds.unseen_classes().to_vec(),
        splits,
    )
}
