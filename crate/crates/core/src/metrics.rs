//! Accuracy, confusion matrices, Fleiss' kappa and a class-compactness
//! score for learned features.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pairs(predictions: &[usize], truths: &[usize]) -> Result<()> {
    if predictions.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("no predictions"));
    }
    Ok(())
}

pub fn accuracy(predictions: &[usize], truths: &[usize]) -> Result<f64> {
    check_pairs(predictions, truths)?;
    let correct = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truths.len() as f64)
}

/// Recall of every true class; `None` for classes absent from `truths`.
pub fn per_class_accuracy(predictions: &[usize], truths: &[usize], num_classes: usize) -> Result<Vec<Option<f64>>> {
    let cm = confusion(predictions, truths, num_classes)?;
    Ok(cm
        .counts
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let support: u64 = row.iter().sum();
            (support > 0).then(|| row[k] as f64 / support as f64)
        })
        .collect())
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized percentages; all-zero for empty rows.
    pub row_percentages: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn trace_fraction(&self) -> f64 {
        let total: u64 = self.counts.iter().flatten().sum();
        let diag: u64 = (0..self.counts.len()).map(|k| self.counts[k][k]).sum();
        diag as f64 / total as f64
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        let k = self.counts.len();
        let header: Vec<String> = std::iter::once("true_class".to_string())
            .chain((0..k).map(|j| format!("pred_{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, row) in self.counts.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(w, "{i},{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub fn confusion(predictions: &[usize], truths: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    check_pairs(predictions, truths)?;
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &t) in predictions.iter().zip(truths) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::invalid(format!("class index out of range for {num_classes} classes")));
        }
        counts[t][p] += 1;
    }
    let row_percentages = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter()
                .map(|&c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 })
                .collect()
        })
        .collect();
    Ok(ConfusionMatrix { counts, row_percentages })
}

/// Landis-Koch agreement scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgreementBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl fmt::Display for AgreementBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgreementBand::Poor => "poor",
            AgreementBand::Slight => "slight",
            AgreementBand::Fair => "fair",
            AgreementBand::Moderate => "moderate",
            AgreementBand::Substantial => "substantial",
            AgreementBand::AlmostPerfect => "almost-perfect",
        })
    }
}

pub fn agreement_band(kappa: f64) -> AgreementBand {
    match kappa {
        k if k < 0.0 => AgreementBand::Poor,
        k if k <= 0.20 => AgreementBand::Slight,
        k if k <= 0.40 => AgreementBand::Fair,
        k if k <= 0.60 => AgreementBand::Moderate,
        k if k <= 0.80 => AgreementBand::Substantial,
        _ => AgreementBand::AlmostPerfect,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: f64,
    /// Mean observed agreement over items.
    pub p_bar: f64,
    /// Expected agreement by chance.
    pub p_e_bar: f64,
    pub band: AgreementBand,
}

/// Fleiss' kappa of a `d x c` table where `vote_table[i][j]` is the number
/// of raters assigning item `i` to category `j`.
///
/// Per-item agreement is `(sum_j v_ij^2 - n) / (n (n - 1))`, subtracting `n`
/// once per item. That is the standard statistic; subtracting it once per
/// category instead would make a unanimous table score below 1. When every
/// vote lands in one category the chance agreement is 1 and kappa is
/// defined as 1.
pub fn fleiss_kappa(vote_table: &[Vec<usize>], raters_per_item: usize) -> Result<KappaReport> {
    let d = vote_table.len();
    let n = raters_per_item;
    if d == 0 {
        return Err(Error::invalid("fleiss_kappa: empty table"));
    }
    if n < 2 {
        return Err(Error::invalid("fleiss_kappa: need at least 2 raters per item"));
    }
    let c = vote_table[0].len();
    if c < 2 {
        return Err(Error::invalid("fleiss_kappa: need at least 2 categories"));
    }
    let mut column_totals = vec![0usize; c];
    let mut p_sum = 0.0;
    for (i, row) in vote_table.iter().enumerate() {
        if row.len() != c {
            return Err(Error::invalid(format!("fleiss_kappa: row {i} has {} categories, expected {c}", row.len())));
        }
        if row.iter().sum::<usize>() != n {
            return Err(Error::invalid(format!("fleiss_kappa: row {i} does not sum to {n}")));
        }
        let squares: usize = row.iter().map(|v| v * v).sum();
        p_sum += (squares - n) as f64 / (n * (n - 1)) as f64;
        for (t, v) in column_totals.iter_mut().zip(row) {
            *t += v;
        }
    }
    let p_bar = p_sum / d as f64;
    let total = (d * n) as f64;
    let p_e_bar: f64 = column_totals.iter().map(|&t| (t as f64 / total).powi(2)).sum();
    let kappa = if column_totals.iter().any(|&t| t == d * n) {
        1.0
    } else {
        (p_bar - p_e_bar) / (1.0 - p_e_bar)
    };
    Ok(KappaReport {
        kappa,
        p_bar,
        p_e_bar,
        band: agreement_band(kappa),
    })
}

/// Build a kappa vote table from per-rater predictions
/// (`predictions[r][i]` is rater `r`'s class for item `i`).
pub fn vote_table(predictions: &[Vec<usize>], num_classes: usize) -> Result<Vec<Vec<usize>>> {
    let items = predictions.first().map(Vec::len).unwrap_or(0);
    if predictions.iter().any(|p| p.len() != items) {
        return Err(Error::invalid("raters scored different numbers of items"));
    }
    let mut table = vec![vec![0usize; num_classes]; items];
    for rater in predictions {
        for (row, &c) in table.iter_mut().zip(rater) {
            *row.get_mut(c).ok_or_else(|| Error::invalid(format!("class {c} out of range")))? += 1;
        }
    }
    Ok(table)
}

/// Compactness of classes in feature space.
///
/// Features are scaled to unit length, then the mean distance of each
/// sample to its class centroid is divided by the mean distance to the
/// global centroid. 0 means every class collapses to a point; 1 means the
/// class structure explains nothing.
pub fn inner_class_distance(features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::invalid("inner_class_distance: no samples"));
    }
    if features.len() != labels.len() {
        return Err(Error::invalid("inner_class_distance: features and labels differ in length"));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::invalid("inner_class_distance: ragged features"));
    }
    let unit: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                f.clone()
            } else {
                f.iter().map(|v| v / norm).collect()
            }
        })
        .collect();

    let num_classes = labels.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut sums = vec![vec![0.0; dim]; num_classes];
    let mut counts = vec![0usize; num_classes];
    let mut global = vec![0.0; dim];
    for (f, &l) in unit.iter().zip(labels) {
        counts[l] += 1;
        for ((s, g), v) in sums[l].iter_mut().zip(global.iter_mut()).zip(f) {
            *s += v;
            *g += v;
        }
    }
    let n = unit.len() as f64;
    global.iter_mut().for_each(|g| *g /= n);
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let intra: f64 = unit.iter().zip(labels).map(|(f, &l)| dist(f, &sums[l])).sum::<f64>() / n;
    let overall: f64 = unit.iter().map(|f| dist(f, &global)).sum::<f64>() / n;
    if overall == 0.0 {
        return Ok(0.0);
    }
    Ok(intra / overall)
}
