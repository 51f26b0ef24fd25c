//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::{self, GeneratorConfig};
use crate::error::{Error, Result};
use crate::labeling;
use crate::nn;
use crate::pipeline::{self, DataSource, ExperimentConfig, ExperimentRun};
use crate::psychometric::{self, ObserverModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mcil", version, about = "Multi-classifier interactive learning on ambiguous data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its D1/D2/D3 splits as CSV.
    GenData(GenDataArgs),
    /// Run the full experiment described by a config file.
    Run(RunArgs),
    /// Repeat the experiment for several zoo sizes.
    Ablation(AblationArgs),
    /// Emit closed-form and simulated psychometric curves.
    Psychometric(PsychometricArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Take generator settings and seed from this experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "mcil-data")]
    out: PathBuf,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    /// D1,D2,D3 fractions.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "mcil-out")]
    out: PathBuf,
    /// Validate and print the resolved config without training.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Args)]
struct AblationArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
    sizes: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "mcil-ablation")]
    out: PathBuf,
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Args)]
struct PsychometricArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    sigmas: Vec<f64>,
    /// Defaults to zero for every observer.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    biases: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "mcil-psychometric")]
    out: PathBuf,
}

/// Reproduction record written next to every report.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub config: ExperimentConfig,
    pub global_seed: u64,
    pub output_dir: PathBuf,
    pub tool_version: String,
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Run(a) => cmd_run(a),
        Command::Ablation(a) => cmd_ablation(a),
        Command::Psychometric(a) => cmd_psychometric(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn read_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
    if let Some(s) = seed {
        cfg.global_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_gen_data(a: GenDataArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => read_config(p, None)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.global_seed = s;
    }
    let mut gen = match &cfg.data.source {
        DataSource::Synthetic(g) => g.clone(),
        DataSource::Csv { .. } => GeneratorConfig::default(),
    };
    if let Some(k) = a.classes {
        gen.num_classes = k;
        gen.class_counts = None;
    }
    if let Some(d) = a.dim {
        gen.feature_dim = d;
    }
    if let Some(m) = a.per_class {
        gen.per_class = m;
        gen.class_counts = None;
    }
    if let Some(s) = a.separation {
        gen.separation = s;
    }
    if let Some(n) = a.noise {
        gen.noise_scale = n;
    }
    if let Some(f) = &a.fractions {
        let f: [f64; 3] = f
            .as_slice()
            .try_into()
            .map_err(|_| Error::config("fractions", "expected exactly three values"))?;
        cfg.data.fractions = f;
    }
    cfg.data.source = DataSource::Synthetic(gen);
    cfg.validate()?;

    let dataset = pipeline::load_dataset(&cfg)?;
    let splits = pipeline::make_splits(&cfg, &dataset)?;
    create_dir(&a.out)?;
    data::save_csv(&dataset, a.out.join("dataset.csv"))?;
    data::save_csv(&splits.d1, a.out.join("d1.csv"))?;
    data::save_csv(&splits.d2, a.out.join("d2.csv"))?;
    data::save_csv(&splits.d3, a.out.join("d3.csv"))?;
    println!(
        "wrote {} samples to {} (d1={}, d2={}, d3={})",
        dataset.len(),
        a.out.display(),
        splits.d1.len(),
        splits.d2.len(),
        splits.d3.len()
    );
    Ok(())
}

fn manifest(config_path: &Path, cfg: &ExperimentConfig, out: &Path) -> String {
    let m = RunManifest {
        config_path: Some(config_path.to_path_buf()),
        config: cfg.clone(),
        global_seed: cfg.global_seed,
        output_dir: out.to_path_buf(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    serde_json::to_string_pretty(&m).expect("manifest serializes")
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = read_config(&a.config, a.seed)?;
    if a.dry_run {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    let run = pipeline::run_experiment(&cfg)?;
    write_run(&run, &a.out)?;
    write_file(&a.out.join("manifest.json"), manifest(&a.config, &cfg, &a.out))?;
    let ev = &run.report.evaluation;
    println!(
        "kappa {:.4} -> {:.4}, mean accuracy gain {:+.4}, majority vote {:.4}, best {} ({:.4})",
        ev.kappa_before.kappa,
        ev.kappa_after.kappa,
        run.report.mean_accuracy_gain(),
        ev.majority_vote_accuracy,
        ev.best_classifier.name,
        ev.best_classifier.mcil_accuracy
    );
    Ok(())
}

fn curve_csv(points: &[psychometric::CurvePoint]) -> String {
    let mut s = String::from("delta_c,accuracy,count\n");
    for p in points {
        s.push_str(&format!("{:?},{:?},{}\n", p.delta_c, p.accuracy, p.count));
    }
    s
}

fn features_csv(net: &nn::Network, d3: &data::Dataset) -> Result<String> {
    let mut s = String::new();
    for (i, sample) in d3.samples().iter().enumerate() {
        let f = nn::extract_features(net, &sample.features)?;
        if i == 0 {
            let cols: Vec<String> = (0..f.len()).map(|j| format!("h{j}")).collect();
            s.push_str(&format!("label,{}\n", cols.join(",")));
        }
        let vals: Vec<String> = f.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&format!(
            "{},{}\n",
            sample.label.map(|l| l.to_string()).unwrap_or_default(),
            vals.join(",")
        ));
    }
    Ok(s)
}

/// Write the report and its side files into `out`.
pub fn write_run(run: &ExperimentRun, out: &Path) -> Result<()> {
    create_dir(out)?;
    let nets_dir = out.join("networks");
    create_dir(&nets_dir)?;
    write_file(&out.join("report.json"), run.report.to_json())?;
    for (c, (before, after)) in run.report.evaluation.classifiers.iter().zip(run.before.iter().zip(&run.after)) {
        let name = &c.name;
        let mut buf = Vec::new();
        c.confusion_baseline.write_csv(&mut buf).map_err(|e| Error::io(out, e))?;
        write_file(&out.join(format!("confusion_{name}_baseline.csv")), &buf)?;
        buf.clear();
        c.confusion_mcil.write_csv(&mut buf).map_err(|e| Error::io(out, e))?;
        write_file(&out.join(format!("confusion_{name}_mcil.csv")), &buf)?;
        write_file(&out.join(format!("psychometric_{name}_before.csv")), curve_csv(&c.psychometric_before.points))?;
        write_file(&out.join(format!("psychometric_{name}_after.csv")), curve_csv(&c.psychometric_after.points))?;
        write_file(&nets_dir.join(format!("{name}.before.net")), nn::save_network(before))?;
        write_file(&nets_dir.join(format!("{name}.after.net")), nn::save_network(after))?;
        if !after.spec().hidden_widths.is_empty() {
            write_file(&out.join(format!("features_{name}_before.csv")), features_csv(before, &run.splits.d3)?)?;
            write_file(&out.join(format!("features_{name}_after.csv")), features_csv(after, &run.splits.d3)?)?;
        }
    }
    let mut buf = Vec::new();
    labeling::write_labels_csv(&run.labels, &mut buf).map_err(|e| Error::io(out, e))?;
    write_file(&out.join("labels.csv"), &buf)
}

fn cmd_ablation(a: AblationArgs) -> Result<()> {
    let cfg = read_config(&a.config, a.seed)?;
    for &s in &a.sizes {
        if s < 2 || s > cfg.zoo.len() {
            return Err(Error::config(
                "sizes",
                format!("zoo size {s} must be between 2 and the zoo length {}", cfg.zoo.len()),
            ));
        }
    }
    if a.dry_run {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    let table = pipeline::ablation(&cfg, &a.sizes)?;
    create_dir(&a.out)?;
    write_file(&a.out.join("ablation.csv"), table.to_csv())?;
    write_file(
        &a.out.join("ablation.json"),
        serde_json::to_string_pretty(&table).expect("table serializes"),
    )?;
    write_file(&a.out.join("manifest.json"), manifest(&a.config, &cfg, &a.out))?;
    let mut stdout = std::io::stdout().lock();
    for b in &table.blocks {
        let _ = writeln!(stdout, "zoo size {}: kappa {:.4} -> {:.4}", b.zoo_size, b.kappa_before, b.kappa_after);
        for r in &b.rows {
            let _ = writeln!(stdout, "  {:<24} {:.4} -> {:.4}", r.name, r.baseline_accuracy, r.mcil_accuracy);
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PsychometricSummary {
    observers: Vec<ObserverModel>,
    weights: Vec<f64>,
    joint: ObserverModel,
    joint_variance: f64,
    joint_variance_closed_form: f64,
    slopes: Vec<f64>,
    joint_slope_exact: f64,
    joint_slope_approx: f64,
    trials_per_point: u64,
    seed: u64,
}

fn cmd_psychometric(a: PsychometricArgs) -> Result<()> {
    if a.sigmas.len() < 2 {
        return Err(Error::config("sigmas", "at least 2 observers are needed for a joint curve"));
    }
    let biases = a.biases.clone().unwrap_or_else(|| vec![0.0; a.sigmas.len()]);
    if biases.len() != a.sigmas.len() {
        return Err(Error::config("biases", "need one bias per sigma"));
    }
    if a.trials == 0 {
        return Err(Error::config("trials", "must be positive"));
    }
    let models = a
        .sigmas
        .iter()
        .zip(&biases)
        .map(|(&s, &b)| ObserverModel::new(s, b))
        .collect::<Result<Vec<_>>>()?;
    let grid = a
        .grid
        .clone()
        .unwrap_or_else(|| (0..13).map(|i| -3.0 + 0.5 * i as f64).collect());
    if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::config("grid", "must be a nonempty list of finite numbers"));
    }

    let joint = psychometric::joint_model(&models)?;
    let summary = PsychometricSummary {
        weights: psychometric::joint_weights(&models)?,
        joint,
        joint_variance: joint.sigma().powi(2),
        joint_variance_closed_form: psychometric::joint_variance_closed_form(&models)?,
        slopes: models.iter().map(psychometric::slope).collect(),
        joint_slope_exact: psychometric::slope(&joint),
        joint_slope_approx: psychometric::joint_slope_approx(&models)?,
        observers: models.clone(),
        trials_per_point: a.trials,
        seed: a.seed,
    };

    let mut curves = format!(
        "# sigma_joint_sq={:?},sigma_joint={:?},bias_joint={:?}\n",
        summary.joint_variance,
        joint.sigma(),
        joint.bias()
    );
    let cols: Vec<String> = (0..models.len()).map(|i| format!("observer_{i}")).collect();
    curves.push_str(&format!("delta_c,{},joint\n", cols.join(",")));
    for &dc in &grid {
        let vals = models
            .iter()
            .chain(std::iter::once(&joint))
            .map(|m| psychometric::psychometric_response(m, dc).map(|p| format!("{p:?}")))
            .collect::<Result<Vec<_>>>()?;
        curves.push_str(&format!("{dc:?},{}\n", vals.join(",")));
    }

    let sim = psychometric::simulate_joint_curve(&models, &grid, a.trials, a.seed)?;
    let mut validation = String::from("delta_c,accuracy,count,predicted\n");
    for (dc, acc) in &sim {
        let predicted = psychometric::psychometric_response(&joint, *dc)?;
        validation.push_str(&format!("{dc:?},{acc:?},{},{predicted:?}\n", a.trials));
    }

    create_dir(&a.out)?;
    write_file(&a.out.join("curves.csv"), curves)?;
    write_file(&a.out.join("validation.csv"), validation)?;
    write_file(
        &a.out.join("psychometric.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    println!(
        "joint sigma^2 = {:.6} (closed form {:.6}), bias = {:.6}",
        summary.joint_variance, summary.joint_variance_closed_form, joint.bias()
    );
    Ok(())
}
