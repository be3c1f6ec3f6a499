use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

/// Rows are gold labels, columns predicted labels. Predictions that are
/// missing or outside the label set are counted per gold row in `unparsed`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
    unparsed: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, gold: &str, predicted: &str) -> Option<u64> {
        let g = self.index(gold)?;
        let p = self.index(predicted)?;
        Some(self.counts[g][p])
    }

    /// Unparsed predictions per gold row.
    pub fn unparsed(&self) -> &[u64] {
        &self.unparsed
    }

    pub fn unparsed_total(&self) -> u64 {
        self.unparsed.iter().sum()
    }

    pub fn has_unparsed(&self) -> bool {
        self.unparsed_total() > 0
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.unparsed_total()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Builds the matrix from gold labels and predicted labels (`None` for an
/// unparsed prediction).
pub fn confusion_matrix<G, P>(gold: &[G], pred: &[Option<P>], labels: &[String]) -> Result<ConfusionMatrix>
where
    G: AsRef<str>,
    P: AsRef<str>,
{
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let unique: HashSet<&str> = labels.iter().map(String::as_str).collect();
    if labels.is_empty() || unique.len() != labels.len() {
        return Err(MetricsError::InvalidLabelSet);
    }
    let n = labels.len();
    let mut m = ConfusionMatrix {
        labels: labels.to_vec(),
        counts: vec![vec![0; n]; n],
        unparsed: vec![0; n],
    };
    for (g, p) in gold.iter().zip(pred) {
        let gi = m
            .index(g.as_ref())
            .ok_or_else(|| MetricsError::UnknownGoldLabel(g.as_ref().to_string()))?;
        match p.as_ref().and_then(|p| m.index(p.as_ref())) {
            Some(pi) => m.counts[gi][pi] += 1,
            None => m.unparsed[gi] += 1,
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total: u64,
    pub unparsed: u64,
}

impl ClassificationReport {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.per_class.iter().map(|c| c.label.as_str())
    }

    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class precision, recall and F1 with zero for zero denominators,
/// accuracy over all scored examples, and macro and support-weighted
/// averages.
pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let n = cm.labels.len();
    let per_class: Vec<ClassMetrics> = (0..n)
        .map(|c| {
            let tp = cm.counts[c][c];
            let predicted: u64 = (0..n).map(|g| cm.counts[g][c]).sum();
            let support: u64 = cm.counts[c].iter().sum::<u64>() + cm.unparsed[c];
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            ClassMetrics {
                label: cm.labels[c].clone(),
                precision,
                recall,
                f1: harmonic(precision, recall),
                support,
            }
        })
        .collect();

    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n as f64;
    let macro_avg = Averages {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
    };
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|c| f(c) * c.support as f64)
            .sum::<f64>()
            / total as f64
    };
    let weighted_avg = Averages {
        precision: weighted(|c| c.precision),
        recall: weighted(|c| c.recall),
        f1: weighted(|c| c.f1),
    };
    Ok(ClassificationReport {
        per_class,
        accuracy: ratio(cm.trace(), total),
        macro_avg,
        weighted_avg,
        total,
        unparsed: cm.unparsed_total(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_counts() {
        let cm = confusion_matrix(&["A", "A", "B"], &[Some("A"), Some("B"), Some("B")], &labels(&["A", "B"]))
            .unwrap();
        assert_eq!(cm.counts(), &[vec![1, 1], vec![0, 1]]);
        assert_eq!(cm.get("A", "B"), Some(1));
        assert!(!cm.has_unparsed());
    }

    #[test]
    fn unparsed_column() {
        let none: Option<&str> = None;
        let cm = confusion_matrix(&["A", "B", "B"], &[none, none, none], &labels(&["A", "B"])).unwrap();
        assert_eq!(cm.unparsed_total(), 3);
        assert_eq!(cm.total(), 3);
        let r = classification_report(&cm).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.macro_avg.f1, 0.0);
        assert_eq!(r.class("B").unwrap().support, 2);
    }

    #[test]
    fn hand_report() {
        let cm = confusion_matrix(
            &["A", "A", "B", "B"],
            &[Some("A"), Some("B"), Some("B"), Some("B")],
            &labels(&["A", "B"]),
        )
        .unwrap();
        let r = classification_report(&cm).unwrap();
        let a = r.class("A").unwrap();
        assert_eq!((a.precision, a.recall), (1.0, 0.5));
        assert!((a.f1 - 2.0 / 3.0).abs() < 1e-12);
        let b = r.class("B").unwrap();
        assert!((b.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(b.recall, 1.0);
        assert!((b.f1 - 0.8).abs() < 1e-12);
        assert!((r.macro_avg.f1 - 11.0 / 15.0).abs() < 1e-12);
        assert_eq!(r.accuracy, 0.75);
    }

    #[test]
    fn absent_class_counts_in_macro() {
        let cm = confusion_matrix(&["A", "B"], &[Some("A"), Some("B")], &labels(&["A", "B", "C"])).unwrap();
        let r = classification_report(&cm).unwrap();
        let c = r.class("C").unwrap();
        assert_eq!((c.precision, c.recall, c.f1, c.support), (0.0, 0.0, 0.0, 0));
        assert!((r.macro_avg.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.weighted_avg.f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn errors() {
        let l = labels(&["A"]);
        assert_eq!(
            confusion_matrix(&["A"], &[Some("A"), Some("A")], &l),
            Err(MetricsError::LengthMismatch { gold: 1, pred: 2 })
        );
        assert_eq!(
            confusion_matrix::<&str, &str>(&[], &[], &l),
            Err(MetricsError::Empty)
        );
        assert_eq!(
            confusion_matrix(&["Z"], &[Some("A")], &l),
            Err(MetricsError::UnknownGoldLabel("Z".into()))
        );
        assert_eq!(
            confusion_matrix(&["A"], &[Some("A")], &labels(&["A", "A"])),
            Err(MetricsError::InvalidLabelSet)
        );
    }

    #[test]
    fn out_of_set_prediction_is_unparsed() {
        let cm = confusion_matrix(&["A"], &[Some("Q")], &labels(&["A", "B"])).unwrap();
        assert_eq!(cm.unparsed(), &[1, 0]);
    }
}
