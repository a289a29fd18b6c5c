use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
    Missing,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// `1.0` / `0.0` for definite labels.
    pub fn target(self) -> Option<f64> {
        match self {
            Label::Positive => Some(1.0),
            Label::Negative => Some(0.0),
            Label::Missing => None,
        }
    }

    pub fn is_missing(self) -> bool {
        self == Label::Missing
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "1",
            Label::Negative => "0",
            Label::Missing => "?",
        })
    }
}

/// Per-class annotation of one sample: positive, negative or missing.
///
/// The annotated-class set is exactly the set of non-missing entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TriStateLabels {
    entries: Vec<Label>,
}

impl TriStateLabels {
    pub fn all_missing(class_count: usize) -> Self {
        TriStateLabels {
            entries: vec![Label::Missing; class_count],
        }
    }

    /// Fully annotated vector from 0/1 ground truth.
    pub fn from_full(full: &[u8]) -> Self {
        TriStateLabels {
            entries: full.iter().map(|&v| Label::from_bool(v != 0)).collect(),
        }
    }

    /// Keeps the ground-truth value for `task_classes` and marks every other class missing.
    pub fn masked(full: &[u8], task_classes: &[usize]) -> Self {
        let mut out = Self::all_missing(full.len());
        for &c in task_classes {
            out.entries[c] = Label::from_bool(full[c] != 0);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, class: usize) -> Label {
        self.entries[class]
    }

    pub fn entries(&self) -> &[Label] {
        &self.entries
    }

    /// Fills a missing entry. Returns `false` (and leaves the entry alone) when
    /// the class is already annotated.
    pub fn fill(&mut self, class: usize, positive: bool) -> bool {
        if self.entries[class].is_missing() {
            self.entries[class] = Label::from_bool(positive);
            true
        } else {
            false
        }
    }

    pub fn annotated(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_missing())
            .map(|(c, _)| c)
    }

    pub fn annotated_count(&self) -> usize {
        self.entries.iter().filter(|l| !l.is_missing()).count()
    }

    pub fn is_annotated_over(&self, classes: &[usize]) -> bool {
        classes.iter().all(|&c| !self.entries[c].is_missing())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masking_keeps_only_task_classes() {
        // classes: 0 cat, 1 dog, 2 person, 3 sofa; the task covers {person, sofa}
        let full = [1, 1, 1, 0];
        let m = TriStateLabels::masked(&full, &[2, 3]);
        assert_eq!(m.get(0), Label::Missing);
        assert_eq!(m.get(1), Label::Missing);
        assert_eq!(m.get(2), Label::Positive);
        assert_eq!(m.get(3), Label::Negative);
        assert_eq!(m.annotated().collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn masking_with_all_classes_is_identity() {
        let full = [0, 1, 0, 1, 1];
        let all: Vec<usize> = (0..5).collect();
        assert_eq!(TriStateLabels::masked(&full, &all), TriStateLabels::from_full(&full));
    }

    #[test]
    fn no_task_positives_gives_all_negative() {
        let full = [1, 0, 0, 0];
        let m = TriStateLabels::masked(&full, &[1, 2, 3]);
        assert!((1..4).all(|c| m.get(c) == Label::Negative));
        assert!(m.get(0).is_missing());
    }

    #[test]
    fn fill_never_overwrites() {
        let mut m = TriStateLabels::masked(&[1, 0], &[0]);
        assert!(!m.fill(0, false));
        assert_eq!(m.get(0), Label::Positive);
        assert!(m.fill(1, true));
        assert_eq!(m.get(1), Label::Positive);
    }
}
