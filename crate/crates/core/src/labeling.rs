//! Ambiguous labels built by letting several classifiers vote.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{forward, predict, Network};

/// A distribution over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguousLabel {
    pub probabilities: Vec<f64>,
}

impl AmbiguousLabel {
    pub fn num_classes(&self) -> usize {
        self.probabilities.len()
    }
}

/// Vote counts for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub counts: Vec<usize>,
    pub total: usize,
}

impl VoteRecord {
    pub fn tally(predicted: &[usize], num_classes: usize) -> Result<Self> {
        if predicted.is_empty() {
            return Err(Error::invalid("vote: no votes"));
        }
        let mut counts = vec![0; num_classes];
        for &c in predicted {
            *counts
                .get_mut(c)
                .ok_or_else(|| Error::invalid(format!("vote: class {c} out of range for {num_classes} classes")))? += 1;
        }
        Ok(Self {
            counts,
            total: predicted.len(),
        })
    }

    pub fn to_label(&self) -> AmbiguousLabel {
        let n = self.total as f64;
        AmbiguousLabel {
            probabilities: self.counts.iter().map(|&c| c as f64 / n).collect(),
        }
    }
}

/// Normalized vote counts: entry `k` is the fraction of voters choosing `k`.
pub fn vote(predicted_classes: &[usize], num_classes: usize) -> Result<AmbiguousLabel> {
    Ok(VoteRecord::tally(predicted_classes, num_classes)?.to_label())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteMode {
    /// Each classifier casts one vote for its argmax class.
    #[default]
    Hard,
    /// Output distributions are averaged.
    Soft,
}

fn check_voters(classifiers: &[Network], pool: &Dataset) -> Result<()> {
    if classifiers.len() < 2 {
        return Err(Error::invalid(format!(
            "label construction needs at least 2 classifiers, got {}",
            classifiers.len()
        )));
    }
    for net in classifiers {
        if net.input_dim() != pool.feature_dim() || net.output_dim() != pool.num_classes() {
            return Err(Error::invalid(format!(
                "classifier {} ({} -> {}) does not match the pool ({} features, {} classes)",
                net.name(),
                net.input_dim(),
                net.output_dim(),
                pool.feature_dim(),
                pool.num_classes()
            )));
        }
    }
    Ok(())
}

/// Per-sample votes of every classifier on `pool`, in pool order.
pub fn vote_records(classifiers: &[Network], pool: &Dataset) -> Result<Vec<VoteRecord>> {
    check_voters(classifiers, pool)?;
    pool.samples()
        .par_iter()
        .map(|s| {
            let votes = classifiers
                .iter()
                .map(|net| predict(net, &s.features).map(|(c, _)| c))
                .collect::<Result<Vec<_>>>()?;
            VoteRecord::tally(&votes, pool.num_classes())
        })
        .collect()
}

/// Construct one ambiguous label per pool sample, in pool order.
pub fn construct_labels(classifiers: &[Network], pool: &Dataset, mode: VoteMode) -> Result<Vec<AmbiguousLabel>> {
    match mode {
        VoteMode::Hard => Ok(vote_records(classifiers, pool)?.iter().map(VoteRecord::to_label).collect()),
        VoteMode::Soft => {
            check_voters(classifiers, pool)?;
            pool.samples()
                .par_iter()
                .map(|s| {
                    let mut mean = vec![0.0; pool.num_classes()];
                    for net in classifiers {
                        for (m, p) in mean.iter_mut().zip(forward(net, &s.features)?) {
                            *m += p;
                        }
                    }
                    let z: f64 = mean.iter().sum();
                    Ok(AmbiguousLabel {
                        probabilities: mean.into_iter().map(|m| m / z).collect(),
                    })
                })
                .collect()
        }
    }
}

/// Write `sample_index,p0,...,p{K-1}` rows.
pub fn write_labels_csv(labels: &[AmbiguousLabel], w: &mut impl Write) -> std::io::Result<()> {
    let k = labels.first().map(|l| l.num_classes()).unwrap_or(0);
    let header: Vec<String> = std::iter::once("sample_index".to_string())
        .chain((0..k).map(|i| format!("p{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, l) in labels.iter().enumerate() {
        let row: Vec<String> = std::iter::once(i.to_string())
            .chain(l.probabilities.iter().map(|p| format!("{p:?}")))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::nn::{ArchitectureSpec, Activation, Layer};

    fn constant_net(name: &str, winner: usize, k: usize, dim: usize) -> Network {
        let mut bias = vec![0.0; k];
        bias[winner] = 5.0;
        let spec = ArchitectureSpec::new(name, &[], Activation::Relu);
        Network::from_layers(spec, vec![Layer { inputs: dim, outputs: k, weights: vec![0.0; dim * k], bias }]).unwrap()
    }

    fn pool(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| Sample { features: vec![i as f64, 1.0], label: None, clarity: None })
            .collect();
        Dataset::new(samples, 4).unwrap()
    }

    #[test]
    fn vote_examples() {
        assert_eq!(vote(&[0, 0, 1, 2, 0], 5).unwrap().probabilities, vec![0.6, 0.2, 0.2, 0.0, 0.0]);
        assert_eq!(vote(&[3, 3, 3], 4).unwrap().probabilities, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(vote(&[0, 1, 2, 3], 4).unwrap().probabilities, vec![0.25; 4]);
        assert!(vote(&[], 3).is_err());
        assert!(vote(&[0, 3], 3).is_err());
    }

    #[test]
    fn identical_classifiers_give_one_hot() {
        let nets = vec![constant_net("a", 2, 4, 2), constant_net("b", 2, 4, 2), constant_net("c", 2, 4, 2)];
        for l in construct_labels(&nets, &pool(5), VoteMode::Hard).unwrap() {
            assert_eq!(l.probabilities, vec![0.0, 0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn disagreeing_pair_splits_evenly() {
        let nets = vec![constant_net("a", 0, 4, 2), constant_net("b", 1, 4, 2)];
        let labels = construct_labels(&nets, &pool(3), VoteMode::Hard).unwrap();
        assert_eq!(labels.len(), 3);
        for l in labels {
            assert_eq!(l.probabilities, vec![0.5, 0.5, 0.0, 0.0]);
        }
    }

    #[test]
    fn soft_vote_averages_distributions() {
        let nets = vec![constant_net("a", 0, 4, 2), constant_net("b", 1, 4, 2)];
        let labels = construct_labels(&nets, &pool(2), VoteMode::Soft).unwrap();
        let p = &labels[0].probabilities;
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p[0] - p[1]).abs() < 1e-12 && p[0] > p[2]);
    }

    #[test]
    fn construct_errors() {
        let one = vec![constant_net("a", 0, 4, 2)];
        assert!(construct_labels(&one, &pool(2), VoteMode::Hard).is_err());
        let wrong_dim = vec![constant_net("a", 0, 4, 3), constant_net("b", 0, 4, 3)];
        assert!(construct_labels(&wrong_dim, &pool(2), VoteMode::Hard).is_err());
    }

    #[test]
    fn labels_csv_format() {
        let labels = vec![vote(&[0, 1], 3).unwrap(), vote(&[2, 2], 3).unwrap()];
        let mut out = Vec::new();
        write_labels_csv(&labels, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "sample_index,p0,p1,p2\n0,0.5,0.5,0.0\n1,0.0,0.0,1.0\n");
    }
}
