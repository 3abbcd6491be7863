use std::fmt::Write;

use crate::error::{Error, Result};

/// `C × C` counts, rows = truth, columns = prediction, 0-based classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::Argument(format!(
                "{} counts for a {classes}x{classes} confusion matrix",
                counts.len()
            )));
        }
        Ok(Self { classes, counts })
    }

    pub fn from_pairs(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Argument("truth and prediction lengths differ".into()));
        }
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::Argument(format!("class {} out of range for {classes}", t.max(p))));
            }
            m.counts[t * classes + p] += 1;
        }
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Overall accuracy, average per-class recall and Cohen's κ.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    /// Recall per class; `None` for classes with no truth samples.
    pub per_class: Vec<Option<f64>>,
}

impl Metrics {
    /// Classes without truth samples are left out of AA.
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        let c = confusion.classes();
        let total = confusion.total();
        if total == 0 {
            return Err(Error::Argument("metrics need at least one sample".into()));
        }
        let n = total as f64;
        let row = |k: usize| (0..c).map(|j| confusion.get(k, j)).sum::<u64>();
        let col = |k: usize| (0..c).map(|i| confusion.get(i, k)).sum::<u64>();
        let trace: u64 = (0..c).map(|k| confusion.get(k, k)).sum();

        let per_class: Vec<Option<f64>> = (0..c)
            .map(|k| match row(k) {
                0 => None,
                r => Some(confusion.get(k, k) as f64 / r as f64),
            })
            .collect();
        let recalls: Vec<f64> = per_class.iter().flatten().copied().collect();
        let aa = recalls.iter().sum::<f64>() / recalls.len() as f64;

        let oa = trace as f64 / n;
        let p_e = (0..c).map(|k| row(k) as f64 * col(k) as f64).sum::<f64>() / (n * n);
        let kappa = if p_e >= 1.0 { 1.0 } else { (oa - p_e) / (1.0 - p_e) };
        Ok(Self {
            confusion,
            oa,
            aa,
            kappa,
            per_class,
        })
    }

    /// `key = value` lines followed by a `[confusion]` block of integer
    /// rows. Classes are reported 1-based, as in label maps.
    pub fn to_text(&self) -> String {
        let c = self.confusion.classes();
        let mut s = String::new();
        writeln!(s, "classes = {c}").unwrap();
        writeln!(s, "samples = {}", self.confusion.total()).unwrap();
        writeln!(s, "oa = {}", self.oa).unwrap();
        writeln!(s, "aa = {}", self.aa).unwrap();
        writeln!(s, "kappa = {}", self.kappa).unwrap();
        for (k, acc) in self.per_class.iter().enumerate() {
            match acc {
                Some(a) => writeln!(s, "class_{}_accuracy = {a}", k + 1).unwrap(),
                None => writeln!(s, "class_{}_accuracy = none", k + 1).unwrap(),
            }
        }
        s.push_str("[confusion]\n");
        for i in 0..c {
            let row: Vec<String> = (0..c).map(|j| self.confusion.get(i, j).to_string()).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_agreement() {
        let truth = [0, 1, 2, 2, 1];
        let m = Metrics::from_confusion(ConfusionMatrix::from_pairs(3, &truth, &truth).unwrap()).unwrap();
        assert_eq!((m.oa, m.aa, m.kappa), (1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_prediction_on_balanced_truth() {
        let truth = [0, 1, 0, 1];
        let m = Metrics::from_confusion(ConfusionMatrix::from_pairs(2, &truth, &[0; 4]).unwrap()).unwrap();
        assert_eq!(m.oa, 0.5);
        assert_eq!(m.kappa, 0.0);
        assert_eq!(m.aa, 0.5);
    }

    #[test]
    fn absent_class_is_skipped_in_aa() {
        let m = Metrics::from_confusion(ConfusionMatrix::from_pairs(3, &[0, 0, 1], &[0, 1, 1]).unwrap()).unwrap();
        assert_eq!(m.per_class, vec![Some(0.5), Some(1.0), None]);
        assert_eq!(m.aa, 0.75);
    }

    #[test]
    fn single_class_diagonal_has_unit_kappa() {
        let m = Metrics::from_confusion(ConfusionMatrix::from_pairs(2, &[1, 1], &[1, 1]).unwrap()).unwrap();
        assert_eq!(m.kappa, 1.0);
    }

    #[test]
    fn text_block() {
        let m = Metrics::from_confusion(ConfusionMatrix::from_pairs(2, &[0, 1], &[0, 1]).unwrap()).unwrap();
        let text = m.to_text();
        assert!(text.contains("oa = 1\n"));
        assert!(text.ends_with("[confusion]\n1 0\n0 1\n"));
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert!(Metrics::from_confusion(ConfusionMatrix::new(2)).is_err());
    }
}
