//! Datasets, the synthetic ambiguity generator, CSV I/O and the
//! clarity-ranked D1/D2/D3 split.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Option<usize>,
    pub clarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    num_classes: usize,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, num_classes: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("dataset must be nonempty"));
        }
        if num_classes == 0 {
            return Err(Error::invalid("num_classes must be positive"));
        }
        let feature_dim = samples[0].features.len();
        if feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::invalid(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    s.features.len()
                )));
            }
            if let Some(l) = s.label {
                if l >= num_classes {
                    return Err(Error::invalid(format!(
                        "sample {i} label {l} out of range for {num_classes} classes"
                    )));
                }
            }
            if let Some(c) = s.clarity {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::invalid(format!("sample {i} clarity {c} outside [0,1]")));
                }
            }
        }
        Ok(Self {
            samples,
            num_classes,
            feature_dim,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Labels of every sample, or an error naming the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| s.label.ok_or_else(|| Error::invalid(format!("sample {i} is unlabeled"))))
            .collect()
    }

    pub fn mean_clarity(&self) -> Option<f64> {
        let mut sum = 0.0;
        for s in &self.samples {
            sum += s.clarity?;
        }
        Some(sum / self.samples.len() as f64)
    }

    fn subset(&self, indices: &[usize], keep_labels: bool) -> Result<Dataset> {
        let samples = indices
            .iter()
            .map(|&i| {
                let mut s = self.samples[i].clone();
                if !keep_labels {
                    s.label = None;
                }
                s
            })
            .collect();
        Dataset::new(samples, self.num_classes)
    }
}

/// Isotropic Gaussian mixture used both to draw samples and to score clarity.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub means: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub sigma: f64,
}

impl Mixture {
    /// Class posteriors of `x` under the mixture, computed in log space.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.means.iter().any(|m| m.len() != x.len()) {
            return Err(Error::invalid(format!(
                "mixture dimension does not match sample dimension {}",
                x.len()
            )));
        }
        let inv_two_var = 1.0 / (2.0 * self.sigma * self.sigma);
        let logits: Vec<f64> = self
            .means
            .iter()
            .zip(&self.weights)
            .map(|(mean, w)| {
                let d2: f64 = mean.iter().zip(x).map(|(m, v)| (v - m) * (v - m)).sum();
                w.ln() - d2 * inv_two_var
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / z).collect())
    }
}

/// Margin between the two largest class posteriors of `sample`.
pub fn compute_clarity(sample: &Sample, mixture: &Mixture) -> Result<f64> {
    let post = mixture.posterior(&sample.features)?;
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for p in post {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    Ok((first - second).clamp(0.0, 1.0))
}

/// Parameters of the synthetic ambiguity benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Samples per class when `class_counts` is absent.
    pub per_class: usize,
    /// Explicit per-class sizes, for imbalanced benchmarks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_counts: Option<Vec<usize>>,
    pub separation: f64,
    pub noise_scale: f64,
}

/// Defaults give moderate overlap: the Bayes error of the 5-class mixture is about 7%.
impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_classes: 5,
            feature_dim: 16,
            per_class: 4080,
            class_counts: None,
            separation: 3.0,
            noise_scale: 1.0,
        }
    }
}

impl GeneratorConfig {
    pub fn counts(&self) -> Vec<usize> {
        self.class_counts
            .clone()
            .unwrap_or_else(|| vec![self.per_class; self.num_classes])
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("num_classes", "must be >= 2"));
        }
        if self.feature_dim < 2 {
            return Err(Error::config("feature_dim", "must be >= 2"));
        }
        let counts = self.counts();
        if counts.len() != self.num_classes {
            return Err(Error::config("class_counts", "length must equal num_classes"));
        }
        if counts.contains(&0) {
            return Err(Error::config("per_class", "every class needs at least one sample"));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(Error::config("separation", "must be positive"));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::config("noise_scale", "must be positive"));
        }
        Ok(())
    }

    /// The generating mixture: class means on a sphere of radius
    /// `separation` in the first `min(d, 3)` coordinates.
    pub fn mixture(&self) -> Mixture {
        let counts = self.counts();
        let total: usize = counts.iter().sum();
        let means = sphere_points(self.num_classes, self.feature_dim.min(3))
            .into_iter()
            .map(|u| {
                let mut mean = vec![0.0; self.feature_dim];
                for (m, c) in mean.iter_mut().zip(u) {
                    *m = self.separation * c;
                }
                mean
            })
            .collect();
        Mixture {
            means,
            weights: counts.iter().map(|&c| c as f64 / total as f64).collect(),
            sigma: self.noise_scale,
        }
    }
}

/// `k` unit vectors spread over the circle (`dim == 2`) or the 2-sphere
/// (`dim == 3`). On the sphere a pole-to-pole spiral is used so that
/// `k == 2` yields an antipodal pair.
fn sphere_points(k: usize, dim: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    if dim == 2 {
        return (0..k)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / k as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let z = 1.0 - 2.0 * i as f64 / (k - 1) as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Round to 9 significant digits, the precision clarity is stored at.
pub fn quantize_clarity(c: f64) -> f64 {
    format_clarity(c).parse().expect("formatted clarity parses")
}

pub(crate) fn format_clarity(c: f64) -> String {
    if c == 0.0 {
        return "0".to_string();
    }
    let decimals = (8 - c.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{c:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Draw a labeled dataset from the generator mixture. Each sample carries
/// its true class and its clarity (rounded to 9 significant digits).
pub fn generate_synthetic(config: &GeneratorConfig, seed: u64) -> Result<Dataset> {
    config.validate().map_err(|e| Error::invalid(e.to_string()))?;
    let mixture = config.mixture();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(config.counts().iter().sum());
    for (label, &count) in config.counts().iter().enumerate() {
        for _ in 0..count {
            let features: Vec<f64> = mixture.means[label]
                .iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + config.noise_scale * z
                })
                .collect();
            let mut sample = Sample {
                features,
                label: Some(label),
                clarity: None,
            };
            sample.clarity = Some(quantize_clarity(compute_clarity(&sample, &mixture)?));
            samples.push(sample);
        }
    }
    Dataset::new(samples, config.num_classes)
}

/// Labels of the unlabeled pool. Kept out of every training path; each
/// call to [`WithheldLabels::reveal`] is counted so tests can assert that
/// only the audit reads them.
#[derive(Debug, Default)]
pub struct WithheldLabels {
    labels: Vec<Option<usize>>,
    reads: AtomicUsize,
}

impl WithheldLabels {
    pub fn reveal(&self) -> &[Option<usize>] {
        self.reads.fetch_add(1, Ordering::Relaxed);
        &self.labels
    }

    pub fn read_count(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl Clone for WithheldLabels {
    fn clone(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            reads: AtomicUsize::new(0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    /// Clearest samples, labels kept.
    pub d1: Dataset,
    /// Middle pool, labels removed.
    pub d2: Dataset,
    /// Least clear samples, labels kept.
    pub d3: Dataset,
    /// Source-dataset index of every sample, in split order.
    pub d1_indices: Vec<usize>,
    pub d2_indices: Vec<usize>,
    pub d3_indices: Vec<usize>,
    pub d2_hidden: WithheldLabels,
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.30, 0.65, 0.05];

/// Rank samples by clarity (descending, ties by seeded shuffle) and cut into
/// D1/D2/D3. D1 and D3 sizes are floored, D2 takes the remainder.
pub fn split(dataset: &Dataset, fractions: [f64; 3], seed: u64) -> Result<Splits> {
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::invalid("split fractions must be positive"));
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split fractions must sum to 1"));
    }
    let mut clarity = Vec::with_capacity(dataset.len());
    for (i, s) in dataset.samples.iter().enumerate() {
        clarity.push(
            s.clarity
                .ok_or_else(|| Error::invalid(format!("sample {i} has no clarity score")))?,
        );
    }
    let n = dataset.len();
    let n1 = (fractions[0] * n as f64 + 1e-9).floor() as usize;
    let n3 = (fractions[2] * n as f64 + 1e-9).floor() as usize;
    if n1 == 0 || n3 == 0 || n1 + n3 >= n {
        return Err(Error::invalid(format!(
            "{n} samples are too few for split fractions {fractions:?}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by(|&a, &b| clarity[b].total_cmp(&clarity[a]));

    let d1_indices = order[..n1].to_vec();
    let d2_indices = order[n1..n - n3].to_vec();
    let d3_indices = order[n - n3..].to_vec();
    Ok(Splits {
        d1: dataset.subset(&d1_indices, true)?,
        d2: dataset.subset(&d2_indices, false)?,
        d3: dataset.subset(&d3_indices, true)?,
        d2_hidden: WithheldLabels {
            labels: d2_indices.iter().map(|&i| dataset.samples[i].label).collect(),
            reads: AtomicUsize::new(0),
        },
        d1_indices,
        d2_indices,
        d3_indices,
    })
}

/// Write `f0,...,f{d-1},label,clarity` rows. Features use the shortest
/// round-trip representation; clarity is written at 9 significant digits.
pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csv(dataset, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv(dataset: &Dataset, w: &mut impl Write) -> std::io::Result<()> {
    let header: Vec<String> = (0..dataset.feature_dim)
        .map(|i| format!("f{i}"))
        .chain(["label".to_string(), "clarity".to_string()])
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for s in &dataset.samples {
        let mut row: Vec<String> = s.features.iter().map(|v| format!("{v:?}")).collect();
        row.push(s.label.map(|l| l.to_string()).unwrap_or_default());
        row.push(s.clarity.map(format_clarity).unwrap_or_default());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a dataset written by [`save_csv`]. Labels must be below `num_classes`.
pub fn load_csv(path: impl AsRef<Path>, num_classes: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, num_classes)
}

pub fn read_csv(reader: impl std::io::Read, num_classes: usize) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let ncols = header.len();
    let valid_header = ncols >= 3
        && header.get(ncols - 2) == Some("label")
        && header.get(ncols - 1) == Some("clarity")
        && header
            .iter()
            .take(ncols - 2)
            .enumerate()
            .all(|(i, h)| h == format!("f{i}"));
    if !valid_header {
        return Err(Error::Parse {
            line: 1,
            message: "expected header f0,...,f{d-1},label,clarity".into(),
        });
    }
    let dim = ncols - 2;

    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Parse { line, message };
        let features = (0..dim)
            .map(|i| {
                let v: f64 = record[i]
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("feature f{i} is not a number: {:?}", &record[i])))?;
                if !v.is_finite() {
                    return Err(bad(format!("feature f{i} is not finite")));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = match record[dim].trim() {
            "" => None,
            s => {
                let l: usize = s.parse().map_err(|_| bad(format!("invalid label {s:?}")))?;
                if l >= num_classes {
                    return Err(bad(format!("label {l} out of range for {num_classes} classes")));
                }
                Some(l)
            }
        };
        let clarity = match record[dim + 1].trim() {
            "" => None,
            s => {
                let c: f64 = s.parse().map_err(|_| bad(format!("invalid clarity {s:?}")))?;
                if !(0.0..=1.0).contains(&c) {
                    return Err(bad(format!("clarity {c} outside [0,1]")));
                }
                Some(c)
            }
        };
        samples.push(Sample { features, label, clarity });
    }
    if samples.is_empty() {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    Dataset::new(samples, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(clarities: &[f64]) -> Dataset {
        let samples = clarities
            .iter()
            .enumerate()
            .map(|(i, &c)| Sample {
                features: vec![i as f64, 0.0],
                label: Some(i % 2),
                clarity: Some(c),
            })
            .collect();
        Dataset::new(samples, 2).unwrap()
    }

    #[test]
    fn clarity_hand_posterior() {
        let mixture = Mixture {
            means: vec![vec![1.0], vec![-1.0]],
            weights: vec![0.5, 0.5],
            sigma: 1.0,
        };
        let s = Sample { features: vec![0.5], label: None, clarity: None };
        let e = std::f64::consts::E;
        let c = compute_clarity(&s, &mixture).unwrap();
        assert!((c - (e - 1.0) / (e + 1.0)).abs() < 1e-12);
        assert!((c - 0.4621).abs() < 1e-4);

        let tie = Sample { features: vec![0.0], label: None, clarity: None };
        assert_eq!(compute_clarity(&tie, &mixture).unwrap(), 0.0);

        let bad = Sample { features: vec![0.0, 1.0], label: None, clarity: None };
        assert!(compute_clarity(&bad, &mixture).is_err());
    }

    #[test]
    fn clarity_at_mean_with_wide_separation() {
        let cfg = GeneratorConfig {
            num_classes: 4,
            feature_dim: 3,
            per_class: 1,
            class_counts: None,
            separation: 50.0,
            noise_scale: 1.0,
        };
        let mixture = cfg.mixture();
        let s = Sample { features: mixture.means[2].clone(), label: None, clarity: None };
        assert!(compute_clarity(&s, &mixture).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn two_class_means_are_antipodal() {
        for dim in [2, 3] {
            let p = sphere_points(2, dim);
            let dot: f64 = p[0].iter().zip(&p[1]).map(|(a, b)| a * b).sum();
            assert!((dot + 1.0).abs() < 1e-12);
        }
        for u in sphere_points(5, 3) {
            let norm: f64 = u.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_noise_gives_full_clarity() {
        let cfg = GeneratorConfig {
            num_classes: 3,
            feature_dim: 4,
            per_class: 20,
            class_counts: None,
            separation: 1.0,
            noise_scale: 1e-4,
        };
        let ds = generate_synthetic(&cfg, 5).unwrap();
        assert!(ds.samples().iter().all(|s| s.clarity.unwrap() > 1.0 - 1e-9));
        // The nearest-mean rule (a linear classifier) separates every sample.
        let mixture = cfg.mixture();
        for s in ds.samples() {
            let post = mixture.posterior(&s.features).unwrap();
            let best = (0..3).max_by(|&a, &b| post[a].total_cmp(&post[b])).unwrap();
            assert_eq!(Some(best), s.label);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = GeneratorConfig { per_class: 30, ..GeneratorConfig::default() };
        let a = generate_synthetic(&cfg, 42).unwrap();
        let b = generate_synthetic(&cfg, 42).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        write_csv(&a, &mut ba).unwrap();
        write_csv(&b, &mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_ne!(a, generate_synthetic(&cfg, 43).unwrap());
    }

    #[test]
    fn imbalanced_counts() {
        let cfg = GeneratorConfig {
            num_classes: 3,
            feature_dim: 2,
            per_class: 0,
            class_counts: Some(vec![5, 1, 9]),
            separation: 2.0,
            noise_scale: 1.0,
        };
        let ds = generate_synthetic(&cfg, 1).unwrap();
        assert_eq!(ds.len(), 15);
        assert_eq!(ds.labels().unwrap().iter().filter(|&&l| l == 2).count(), 9);
    }

    #[test]
    fn split_exact_partition() {
        let ds = tiny(&[0.1, 0.9, 0.5, 0.3, 0.8, 0.2, 0.7, 0.4, 0.6]);
        let s = split(&ds, [1.0 / 3.0; 3], 0).unwrap();
        assert_eq!(s.d1_indices, vec![1, 4, 6]);
        assert_eq!(s.d2_indices, vec![8, 2, 7]);
        assert_eq!(s.d3_indices, vec![3, 5, 0]);
        assert!(s.d2.samples().iter().all(|x| x.label.is_none()));
        assert!(s.d1.samples().iter().all(|x| x.label.is_some()));
        assert_eq!(s.d2_hidden.len(), 3);
        assert_eq!(s.d2_hidden.read_count(), 0);
    }

    #[test]
    fn split_default_sizes() {
        let clar: Vec<f64> = (0..20400).map(|i| (i % 997) as f64 / 997.0).collect();
        let s = split(&tiny(&clar), DEFAULT_FRACTIONS, 3).unwrap();
        assert_eq!((s.d1.len(), s.d2.len(), s.d3.len()), (6120, 13260, 1020));
    }

    #[test]
    fn split_errors() {
        let mut ds = tiny(&[0.1, 0.2, 0.3, 0.4]);
        assert!(split(&ds, [0.5, 0.5, 0.1], 0).is_err());
        assert!(split(&ds, [0.0, 0.5, 0.5], 0).is_err());
        ds.samples[2].clarity = None;
        assert!(split(&ds, [0.25, 0.5, 0.25], 0).is_err());
    }

    #[test]
    fn split_ties_depend_on_seed() {
        let ds = tiny(&[0.5; 30]);
        let a = split(&ds, [0.2, 0.6, 0.2], 1).unwrap();
        let b = split(&ds, [0.2, 0.6, 0.2], 2).unwrap();
        let c = split(&ds, [0.2, 0.6, 0.2], 1).unwrap();
        assert_ne!(a.d1_indices, b.d1_indices);
        assert_eq!(a.d1_indices, c.d1_indices);
    }

    #[test]
    fn csv_empty_label_and_range_error() {
        let text = "f0,f1,label,clarity\n1.5,2,,0.25\n0,0,1,\n";
        let ds = read_csv(text.as_bytes(), 2).unwrap();
        assert_eq!(ds.samples()[0].label, None);
        assert_eq!(ds.samples()[0].clarity, Some(0.25));
        assert_eq!(ds.samples()[1].clarity, None);

        let text = "f0,f1,label,clarity\n1,2,0,0.5\n1,2,2,0.5\n";
        match read_csv(text.as_bytes(), 2) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("label 2"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_malformed_inputs() {
        let ragged = "f0,f1,label,clarity\n1,2,0,0.5\n1,2,0\n";
        assert!(matches!(read_csv(ragged.as_bytes(), 2), Err(Error::Parse { line: 3, .. })));
        let header = "x0,x1,label,clarity\n1,2,0,0.5\n";
        assert!(matches!(read_csv(header.as_bytes(), 2), Err(Error::Parse { line: 1, .. })));
        let nan = "f0,f1,label,clarity\n1,abc,0,0.5\n";
        assert!(matches!(read_csv(nan.as_bytes(), 2), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn clarity_format() {
        assert_eq!(format_clarity(0.0), "0");
        assert_eq!(format_clarity(1.0), "1");
        assert_eq!(format_clarity(0.462117157260), "0.462117157");
        assert_eq!(format_clarity(0.000123456789123), "0.000123456789");
    }
}
