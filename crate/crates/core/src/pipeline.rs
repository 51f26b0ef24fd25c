//! The three-stage experiment: train every classifier on the clear split,
//! let them vote labels for the unlabeled pool, fine-tune each classifier
//! on those labels with a KL objective, and evaluate on the ambiguous split.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::data::{self, Dataset, GeneratorConfig, Splits, DEFAULT_FRACTIONS};
use crate::error::{Error, Result};
use crate::labeling::{self, AmbiguousLabel, VoteMode};
use crate::metrics::{self, ConfusionMatrix, KappaReport};
use crate::nn::{self, Activation, ArchitectureSpec, LossKind, Network, TrainConfig};
use crate::psychometric::{self, CurveFit, CurvePoint};

/// Number of equal-count clarity bins used for psychometric fits.
pub const CLARITY_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(GeneratorConfig),
    Csv { path: PathBuf, num_classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub fractions: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic(GeneratorConfig::default()),
            fractions: DEFAULT_FRACTIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub zoo: Vec<ArchitectureSpec>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default = "default_stage1", deserialize_with = "stage1_over_defaults")]
    pub stage1: TrainConfig,
    #[serde(default = "default_stage2", deserialize_with = "stage2_over_defaults")]
    pub stage2: TrainConfig,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub soft_vote: bool,
    #[serde(default)]
    pub global_seed: u64,
}

/// Five classifiers that differ in depth, width, activation and skips.
pub fn default_zoo() -> Vec<ArchitectureSpec> {
    vec![
        ArchitectureSpec::new("relu_64_32", &[64, 32], Activation::Relu),
        ArchitectureSpec::new("tanh_128", &[128], Activation::Tanh),
        ArchitectureSpec::new("relu_64_64_32_res", &[64, 64, 32], Activation::Relu).with_residual(0, 1),
        ArchitectureSpec::new("relu_32_32", &[32, 32], Activation::Relu),
        ArchitectureSpec::new("tanh_96_48", &[96, 48], Activation::Tanh),
    ]
}

/// Precise-label stage defaults at toy scale: these networks start from
/// random weights, so the rates are higher than for pretrained models.
pub fn default_stage1() -> TrainConfig {
    TrainConfig {
        epochs: 6,
        batch_size: 16,
        lr_start: 2e-3,
        lr_end: 1e-4,
        weight_decay: 0.0,
        frozen_prefix_layers: 0,
        loss: LossKind::Precise,
        ..TrainConfig::default()
    }
}

pub fn default_stage2() -> TrainConfig {
    TrainConfig {
        epochs: 4,
        batch_size: 16,
        lr_start: 1e-3,
        lr_end: 1e-5,
        ..TrainConfig::retrain()
    }
}

fn default_cv_folds() -> usize {
    5
}

fn over_defaults<'de, D: Deserializer<'de>>(base: TrainConfig, d: D) -> std::result::Result<TrainConfig, D::Error> {
    use serde::de::Error as _;
    let overrides = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
    let mut merged = serde_json::to_value(base).map_err(D::Error::custom)?;
    if let serde_json::Value::Object(m) = &mut merged {
        m.extend(overrides);
    }
    serde_json::from_value(merged).map_err(D::Error::custom)
}

fn stage1_over_defaults<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TrainConfig, D::Error> {
    over_defaults(default_stage1(), d)
}

fn stage2_over_defaults<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TrainConfig, D::Error> {
    over_defaults(default_stage2(), d)
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            zoo: default_zoo(),
            data: DataConfig::default(),
            stage1: default_stage1(),
            stage2: default_stage2(),
            cv_folds: default_cv_folds(),
            soft_vote: false,
            global_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.zoo.len() < 2 {
            return Err(Error::config("zoo", "needs at least 2 architectures"));
        }
        for (i, spec) in self.zoo.iter().enumerate() {
            spec.validate().map_err(|e| Error::config(format!("zoo[{i}]"), e.to_string()))?;
        }
        let mut names: Vec<&str> = self.zoo.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("zoo", "architecture names must be unique"));
        }
        if self.stage1.loss != LossKind::Precise {
            return Err(Error::config("stage1.loss", "must be \"precise\""));
        }
        if self.stage2.loss != LossKind::Ambiguous {
            return Err(Error::config("stage2.loss", "must be \"ambiguous\""));
        }
        self.stage1.validate("stage1")?;
        self.stage2.validate("stage2")?;
        if self.cv_folds < 2 {
            return Err(Error::config("cv_folds", "must be >= 2"));
        }
        let f = self.data.fractions;
        if f.iter().any(|v| !(v.is_finite() && *v > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("data.fractions", "must be three positive numbers summing to 1"));
        }
        match &self.data.source {
            DataSource::Synthetic(g) => g.validate().map_err(|e| match e {
                Error::Config { field, message } => Error::config(format!("data.source.synthetic.{field}"), message),
                other => other,
            })?,
            DataSource::Csv { num_classes, .. } => {
                if *num_classes < 2 {
                    return Err(Error::config("data.source.csv.num_classes", "must be >= 2"));
                }
            }
        }
        Ok(())
    }

    pub fn with_zoo_prefix(&self, size: usize) -> Self {
        Self {
            zoo: self.zoo[..size].to_vec(),
            ..self.clone()
        }
    }
}

/// Independent stream identifiers mixed into the global seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Data = 1,
    Split = 2,
    Folds = 3,
    Init = 4,
    Stage1 = 5,
    Stage2 = 6,
    Fold = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `(stream, index)` under `global`; independent of the order in
/// which tasks run.
fn derive_seed(global: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(global) ^ stream as u64) ^ index)
}

pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    match &config.data.source {
        DataSource::Synthetic(g) => data::generate_synthetic(g, derive_seed(config.global_seed, Stream::Data, 0)),
        DataSource::Csv { path, num_classes } => data::load_csv(path, *num_classes),
    }
}

pub fn make_splits(config: &ExperimentConfig, dataset: &Dataset) -> Result<Splits> {
    data::split(dataset, config.data.fractions, derive_seed(config.global_seed, Stream::Split, 0))
}

fn one_hot(k: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

fn predictions(net: &Network, ds: &Dataset) -> Result<Vec<usize>> {
    ds.samples()
        .iter()
        .map(|s| nn::predict(net, &s.features).map(|(c, _)| c))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
}

/// Deterministic fold assignment: a seeded permutation cut into
/// near-equal consecutive blocks.
pub fn cv_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::invalid(format!("cannot cut {n} samples into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..folds)
        .map(|f| order[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect())
}

/// Output of the precise-label stage.
#[derive(Debug, Clone)]
pub struct PreciseStage {
    pub networks: Vec<Network>,
    pub cv: Vec<CvReport>,
}

/// Cross-validate, then train every zoo member on all of `d1`.
pub fn stage_precise(
    zoo: &[ArchitectureSpec],
    d1: &Dataset,
    stage1: &TrainConfig,
    folds: usize,
    global_seed: u64,
) -> Result<PreciseStage> {
    let labels = d1.labels()?;
    let k = d1.num_classes();
    let examples: Vec<(Vec<f64>, Vec<f64>)> = d1
        .samples()
        .iter()
        .zip(&labels)
        .map(|(s, &l)| (s.features.clone(), one_hot(l, k)))
        .collect();
    let fold_sets = cv_folds(d1.len(), folds, derive_seed(global_seed, Stream::Folds, 0))?;

    let results: Vec<(Network, CvReport)> = zoo
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let init = Network::init(spec, d1.feature_dim(), k, derive_seed(global_seed, Stream::Init, i as u64))?;
            let mut fold_accuracies = Vec::with_capacity(folds);
            for (f, held_out) in fold_sets.iter().enumerate() {
                let mut in_fold = vec![false; examples.len()];
                held_out.iter().for_each(|&j| in_fold[j] = true);
                let train_part: Vec<_> = examples
                    .iter()
                    .zip(&in_fold)
                    .filter(|(_, &held)| !held)
                    .map(|(e, _)| e.clone())
                    .collect();
                let cfg = TrainConfig {
                    seed: derive_seed(global_seed, Stream::Fold, (i * folds + f) as u64),
                    ..stage1.clone()
                };
                let (net, _) = nn::train(&init, &train_part, &cfg)?;
                let correct = held_out
                    .iter()
                    .map(|&j| nn::predict(&net, &examples[j].0).map(|(c, _)| usize::from(c == labels[j])))
                    .sum::<Result<usize>>()?;
                fold_accuracies.push(correct as f64 / held_out.len() as f64);
            }
            let mean = fold_accuracies.iter().sum::<f64>() / folds as f64;
            let std = (fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / folds as f64).sqrt();
            let cfg = TrainConfig {
                seed: derive_seed(global_seed, Stream::Stage1, i as u64),
                ..stage1.clone()
            };
            let (net, _) = nn::train(&init, &examples, &cfg)?;
            Ok((net, CvReport { fold_accuracies, mean, std }))
        })
        .collect::<Result<_>>()?;
    let (networks, cv) = results.into_iter().unzip();
    Ok(PreciseStage { networks, cv })
}

pub fn stage_construct(networks: &[Network], d2: &Dataset, soft_vote: bool) -> Result<Vec<AmbiguousLabel>> {
    let mode = if soft_vote { VoteMode::Soft } else { VoteMode::Hard };
    labeling::construct_labels(networks, d2, mode)
}

#[derive(Debug, Clone)]
pub struct InteractiveStage {
    pub networks: Vec<Network>,
    /// Epoch-mean KL of every classifier.
    pub histories: Vec<Vec<f64>>,
}

/// Fine-tune each network on the pool's ambiguous labels.
pub fn stage_interactive(
    networks: &[Network],
    d2: &Dataset,
    labels: &[AmbiguousLabel],
    stage2: &TrainConfig,
    global_seed: u64,
) -> Result<InteractiveStage> {
    if labels.len() != d2.len() {
        return Err(Error::invalid(format!("{} labels for {} pool samples", labels.len(), d2.len())));
    }
    if let Some(l) = labels.iter().find(|l| l.num_classes() != d2.num_classes()) {
        return Err(Error::invalid(format!(
            "label has {} classes, pool has {}",
            l.num_classes(),
            d2.num_classes()
        )));
    }
    let examples: Vec<(Vec<f64>, Vec<f64>)> = d2
        .samples()
        .iter()
        .zip(labels)
        .map(|(s, l)| (s.features.clone(), l.probabilities.clone()))
        .collect();
    let results: Vec<(Network, Vec<f64>)> = networks
        .par_iter()
        .enumerate()
        .map(|(i, net)| {
            if net.output_dim() != d2.num_classes() {
                return Err(Error::invalid(format!("{} outputs {} classes, labels have {}", net.name(), net.output_dim(), d2.num_classes())));
            }
            let cfg = TrainConfig {
                seed: derive_seed(global_seed, Stream::Stage2, i as u64),
                ..stage2.clone()
            };
            nn::train(net, &examples, &cfg)
        })
        .collect::<Result<_>>()?;
    let (networks, histories) = results.into_iter().unzip();
    Ok(InteractiveStage { networks, histories })
}

/// A psychometric fit, or the reason none exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsychometricFit {
    pub points: Vec<CurvePoint>,
    pub fit: Option<CurveFit>,
    pub error: Option<String>,
}

impl PsychometricFit {
    pub fn sigma(&self) -> Option<f64> {
        self.fit.map(|f| f.model.sigma())
    }
}

/// Accuracy in `bins` equal-count clarity bins (ascending clarity; ties keep
/// dataset order), then a probit fit.
pub fn clarity_curve(correct: &[bool], clarity: &[f64], bins: usize) -> PsychometricFit {
    let mut order: Vec<usize> = (0..clarity.len()).collect();
    order.sort_by(|&a, &b| clarity[a].total_cmp(&clarity[b]));
    let n = order.len();
    let bins = bins.min(n);
    let points: Vec<CurvePoint> = (0..bins)
        .map(|b| {
            let chunk = &order[b * n / bins..(b + 1) * n / bins];
            let hits = chunk.iter().filter(|&&i| correct[i]).count();
            CurvePoint {
                delta_c: chunk.iter().map(|&i| clarity[i]).sum::<f64>() / chunk.len() as f64,
                accuracy: hits as f64 / chunk.len() as f64,
                count: chunk.len() as u64,
            }
        })
        .collect();
    match psychometric::fit_curve(&points) {
        Ok(fit) => PsychometricFit { points, fit: Some(fit), error: None },
        Err(e) => PsychometricFit { points, fit: None, error: Some(e.to_string()) },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub name: String,
    pub cv: CvReport,
    pub baseline_accuracy: f64,
    pub mcil_accuracy: f64,
    pub baseline_per_class: Vec<Option<f64>>,
    pub mcil_per_class: Vec<Option<f64>>,
    pub confusion_baseline: ConfusionMatrix,
    pub confusion_mcil: ConfusionMatrix,
    pub inner_class_distance_baseline: Option<f64>,
    pub inner_class_distance_mcil: Option<f64>,
    pub psychometric_before: PsychometricFit,
    pub psychometric_after: PsychometricFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestClassifier {
    pub index: usize,
    pub name: String,
    pub cv_mean_accuracy: f64,
    pub mcil_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAudit {
    /// Mean `KL(true one-hot || constructed label)`, clamped.
    pub mean_kl: f64,
    /// Fraction of pool samples whose label mode is the true class.
    pub mode_accuracy: f64,
}

/// Audit constructed labels against the withheld pool labels. This is the
/// only reader of [`data::WithheldLabels`].
pub fn audit_labels(labels: &[AmbiguousLabel], splits: &Splits) -> Result<LabelAudit> {
    let hidden = splits.d2_hidden.reveal();
    let k = splits.d2.num_classes();
    let mut kl = 0.0;
    let mut hits = 0usize;
    let mut n = 0usize;
    for (label, truth) in labels.iter().zip(hidden) {
        if let Some(t) = truth {
            kl += nn::kl_loss(&one_hot(*t, k), &label.probabilities)?;
            hits += usize::from(nn::argmax(&label.probabilities) == *t);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid("no withheld labels to audit"));
    }
    Ok(LabelAudit {
        mean_kl: kl / n as f64,
        mode_accuracy: hits as f64 / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub classifiers: Vec<ClassifierReport>,
    pub kappa_before: KappaReport,
    pub kappa_after: KappaReport,
    pub majority_vote_accuracy_before: f64,
    pub majority_vote_accuracy: f64,
    pub best_classifier: BestClassifier,
}

fn plurality(per_net: &[Vec<usize>], k: usize) -> Vec<usize> {
    let items = per_net.first().map(Vec::len).unwrap_or(0);
    (0..items)
        .map(|i| {
            let mut counts = vec![0usize; k];
            per_net.iter().for_each(|p| counts[p[i]] += 1);
            let mut best = 0;
            for (c, &v) in counts.iter().enumerate() {
                if v > counts[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Score `before` and `after` networks on the labeled test split.
pub fn evaluate(before: &[Network], after: &[Network], cv: &[CvReport], d3: &Dataset) -> Result<Evaluation> {
    if d3.is_empty() {
        return Err(Error::invalid("evaluate: empty test split"));
    }
    if before.len() != after.len() || before.len() != cv.len() || before.len() < 2 {
        return Err(Error::invalid("evaluate: before/after/cv must describe the same zoo of >= 2"));
    }
    let truths = d3.labels()?;
    let k = d3.num_classes();
    let clarity: Option<Vec<f64>> = d3.samples().iter().map(|s| s.clarity).collect();

    let pred_before: Vec<Vec<usize>> = before.par_iter().map(|n| predictions(n, d3)).collect::<Result<_>>()?;
    let pred_after: Vec<Vec<usize>> = after.par_iter().map(|n| predictions(n, d3)).collect::<Result<_>>()?;

    let inner = |net: &Network| -> Result<Option<f64>> {
        if net.spec().hidden_widths.is_empty() {
            return Ok(None);
        }
        let feats = d3
            .samples()
            .iter()
            .map(|s| nn::extract_features(net, &s.features))
            .collect::<Result<Vec<_>>>()?;
        metrics::inner_class_distance(&feats, &truths).map(Some)
    };
    let curve = |preds: &[usize]| -> PsychometricFit {
        let correct: Vec<bool> = preds.iter().zip(&truths).map(|(p, t)| p == t).collect();
        match &clarity {
            Some(c) => clarity_curve(&correct, c, CLARITY_BINS),
            None => PsychometricFit {
                points: Vec::new(),
                fit: None,
                error: Some("test split has no clarity scores".into()),
            },
        }
    };

    let classifiers = (0..before.len())
        .map(|i| {
            let (pb, pa) = (&pred_before[i], &pred_after[i]);
            Ok(ClassifierReport {
                name: after[i].name().to_string(),
                cv: cv[i].clone(),
                baseline_accuracy: metrics::accuracy(pb, &truths)?,
                mcil_accuracy: metrics::accuracy(pa, &truths)?,
                baseline_per_class: metrics::per_class_accuracy(pb, &truths, k)?,
                mcil_per_class: metrics::per_class_accuracy(pa, &truths, k)?,
                confusion_baseline: metrics::confusion(pb, &truths, k)?,
                confusion_mcil: metrics::confusion(pa, &truths, k)?,
                inner_class_distance_baseline: inner(&before[i])?,
                inner_class_distance_mcil: inner(&after[i])?,
                psychometric_before: curve(pb),
                psychometric_after: curve(pa),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = before.len();
    let kappa_before = metrics::fleiss_kappa(&metrics::vote_table(&pred_before, k)?, n)?;
    let kappa_after = metrics::fleiss_kappa(&metrics::vote_table(&pred_after, k)?, n)?;

    // Best member by cross-validation on the training split only.
    let mut best = 0;
    for (i, r) in cv.iter().enumerate() {
        if r.mean > cv[best].mean {
            best = i;
        }
    }
    Ok(Evaluation {
        majority_vote_accuracy_before: metrics::accuracy(&plurality(&pred_before, k), &truths)?,
        majority_vote_accuracy: metrics::accuracy(&plurality(&pred_after, k), &truths)?,
        best_classifier: BestClassifier {
            index: best,
            name: classifiers[best].name.clone(),
            cv_mean_accuracy: cv[best].mean,
            mcil_accuracy: classifiers[best].mcil_accuracy,
        },
        classifiers,
        kappa_before,
        kappa_after,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub global_seed: u64,
    pub config: ExperimentConfig,
    pub split_sizes: SplitSizes,
    pub label_audit: LabelAudit,
    /// Epoch-mean KL of every classifier during retraining.
    pub stage2_histories: Vec<Vec<f64>>,
    #[serde(flatten)]
    pub evaluation: Evaluation,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn mean_accuracy_gain(&self) -> f64 {
        let c = &self.evaluation.classifiers;
        c.iter().map(|r| r.mcil_accuracy - r.baseline_accuracy).sum::<f64>() / c.len() as f64
    }

    pub fn kappa_gain(&self) -> f64 {
        self.evaluation.kappa_after.kappa - self.evaluation.kappa_before.kappa
    }
}

/// Everything a run produces, including the networks and labels that the
/// CLI writes out next to the report.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub splits: Splits,
    pub before: Vec<Network>,
    pub after: Vec<Network>,
    pub labels: Vec<AmbiguousLabel>,
}

/// Run all stages on already prepared splits.
pub fn run_on_splits(config: &ExperimentConfig, splits: Splits) -> Result<ExperimentRun> {
    config.validate()?;
    let seed = config.global_seed;
    let precise = stage_precise(&config.zoo, &splits.d1, &config.stage1, config.cv_folds, seed)?;
    run_after_precise(config, splits, precise)
}

fn run_after_precise(config: &ExperimentConfig, splits: Splits, precise: PreciseStage) -> Result<ExperimentRun> {
    let seed = config.global_seed;
    let labels = stage_construct(&precise.networks, &splits.d2, config.soft_vote)?;
    let label_audit = audit_labels(&labels, &splits)?;
    let interactive = stage_interactive(&precise.networks, &splits.d2, &labels, &config.stage2, seed)?;
    let evaluation = evaluate(&precise.networks, &interactive.networks, &precise.cv, &splits.d3)?;
    let report = ExperimentReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        global_seed: seed,
        config: config.clone(),
        split_sizes: SplitSizes {
            d1: splits.d1.len(),
            d2: splits.d2.len(),
            d3: splits.d3.len(),
        },
        label_audit,
        stage2_histories: interactive.histories,
        evaluation,
    };
    Ok(ExperimentRun {
        report,
        splits,
        before: precise.networks,
        after: interactive.networks,
        labels,
    })
}

/// Load or generate data, split, and run every stage.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let dataset = load_dataset(config)?;
    let splits = make_splits(config, &dataset)?;
    run_on_splits(config, splits)
}

pub fn run_all(config: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(run_experiment(config)?.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub baseline_accuracy: f64,
    pub mcil_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationBlock {
    pub zoo_size: usize,
    pub rows: Vec<AblationRow>,
    pub kappa_before: f64,
    pub kappa_after: f64,
    pub majority_vote_accuracy: f64,
    /// Hash of the D1/D2/D3 index lists this block was run on.
    pub split_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub global_seed: u64,
    pub blocks: Vec<AblationBlock>,
}

impl AblationTable {
    /// Long-form CSV: one row per (zoo size, classifier).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("zoo_size,classifier,baseline_accuracy,mcil_accuracy\n");
        for b in &self.blocks {
            for r in &b.rows {
                out.push_str(&format!("{},{},{:?},{:?}\n", b.zoo_size, r.name, r.baseline_accuracy, r.mcil_accuracy));
            }
        }
        out
    }
}

pub fn split_fingerprint(splits: &Splits) -> String {
    let mut h = DefaultHasher::new();
    splits.d1_indices.hash(&mut h);
    splits.d2_indices.hash(&mut h);
    splits.d3_indices.hash(&mut h);
    format!("{:016x}", h.finish())
}

/// Run the pipeline with the first `s` zoo members for every `s` in
/// `zoo_sizes`. Data and splits are fixed before any zoo is chosen, and the
/// precise-label stage of each member is shared by every size that
/// includes it.
pub fn ablation(config: &ExperimentConfig, zoo_sizes: &[usize]) -> Result<AblationTable> {
    config.validate()?;
    if zoo_sizes.is_empty() {
        return Err(Error::config("sizes", "at least one zoo size is required"));
    }
    for &s in zoo_sizes {
        if s < 2 || s > config.zoo.len() {
            return Err(Error::config(
                "sizes",
                format!("zoo size {s} must be between 2 and the zoo length {}", config.zoo.len()),
            ));
        }
    }
    let largest = *zoo_sizes.iter().max().expect("nonempty");
    let dataset = load_dataset(config)?;
    let splits = make_splits(config, &dataset)?;
    let precise = stage_precise(&config.zoo[..largest], &splits.d1, &config.stage1, config.cv_folds, config.global_seed)?;

    let mut blocks = Vec::with_capacity(zoo_sizes.len());
    for &s in zoo_sizes {
        let sub = config.with_zoo_prefix(s);
        let prefix = PreciseStage {
            networks: precise.networks[..s].to_vec(),
            cv: precise.cv[..s].to_vec(),
        };
        let run = run_after_precise(&sub, splits.clone(), prefix)?;
        let ev = &run.report.evaluation;
        blocks.push(AblationBlock {
            zoo_size: s,
            rows: ev
                .classifiers
                .iter()
                .map(|c| AblationRow {
                    name: c.name.clone(),
                    baseline_accuracy: c.baseline_accuracy,
                    mcil_accuracy: c.mcil_accuracy,
                })
                .collect(),
            kappa_before: ev.kappa_before.kappa,
            kappa_after: ev.kappa_after.kappa,
            majority_vote_accuracy: ev.majority_vote_accuracy,
            split_fingerprint: split_fingerprint(&run.splits),
        });
    }
    Ok(AblationTable {
        global_seed: config.global_seed,
        blocks,
    })
}
