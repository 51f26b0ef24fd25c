//! Python bindings for the `mcil` crate.

use mcil::labeling;
use mcil::metrics;
use mcil::nn::{self, Activation, ArchitectureSpec};
use mcil::pipeline::{self, ExperimentConfig};
use mcil::psychometric::{self, CurvePoint};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: mcil::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

#[pyclass(name = "ObserverModel", module = "mcil_py", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyObserverModel(psychometric::ObserverModel);

#[pymethods]
impl PyObserverModel {
    #[new]
    #[pyo3(signature = (sigma, bias = 0.0))]
    fn new(sigma: f64, bias: f64) -> PyResult<Self> {
        psychometric::ObserverModel::new(sigma, bias).map(Self).map_err(to_py)
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.0.bias()
    }

    /// Probability of a correct response at clarity `delta_c`.
    fn response(&self, delta_c: f64) -> PyResult<f64> {
        psychometric::psychometric_response(&self.0, delta_c).map_err(to_py)
    }

    fn slope(&self) -> f64 {
        psychometric::slope(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("ObserverModel(sigma={}, bias={})", self.0.sigma(), self.0.bias())
    }
}

fn observers(sigmas: &[f64], biases: Option<Vec<f64>>) -> PyResult<Vec<psychometric::ObserverModel>> {
    let biases = biases.unwrap_or_else(|| vec![0.0; sigmas.len()]);
    if biases.len() != sigmas.len() {
        return Err(PyValueError::new_err("need one bias per sigma"));
    }
    sigmas
        .iter()
        .zip(&biases)
        .map(|(&s, &b)| psychometric::ObserverModel::new(s, b).map_err(to_py))
        .collect()
}

#[pyfunction]
fn cumulative_gaussian(z: f64) -> PyResult<f64> {
    psychometric::cumulative_gaussian(z).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sigmas, biases = None))]
fn joint_weights(sigmas: Vec<f64>, biases: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    psychometric::joint_weights(&observers(&sigmas, biases)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (sigmas, biases = None))]
fn joint_model(sigmas: Vec<f64>, biases: Option<Vec<f64>>) -> PyResult<PyObserverModel> {
    psychometric::joint_model(&observers(&sigmas, biases)?)
        .map(PyObserverModel)
        .map_err(to_py)
}

#[pyfunction]
fn joint_variance_closed_form(sigmas: Vec<f64>) -> PyResult<f64> {
    psychometric::joint_variance_closed_form(&observers(&sigmas, None)?).map_err(to_py)
}

#[pyfunction]
fn joint_slope_approx(sigmas: Vec<f64>) -> PyResult<f64> {
    psychometric::joint_slope_approx(&observers(&sigmas, None)?).map_err(to_py)
}

/// Monte Carlo group accuracy at each grid point, as `(delta_c, accuracy)`.
#[pyfunction]
#[pyo3(signature = (sigmas, grid, trials, seed, biases = None))]
fn simulate_joint_curve(
    py: Python<'_>,
    sigmas: Vec<f64>,
    grid: Vec<f64>,
    trials: u64,
    seed: u64,
    biases: Option<Vec<f64>>,
) -> PyResult<Vec<(f64, f64)>> {
    let models = observers(&sigmas, biases)?;
    py.detach(|| psychometric::simulate_joint_curve(&models, &grid, trials, seed))
        .map_err(to_py)
}

/// Fit `(delta_c, accuracy, count)` points; returns `(model, residual)`.
#[pyfunction]
fn fit_curve(points: Vec<(f64, f64, u64)>) -> PyResult<(PyObserverModel, f64)> {
    let points: Vec<CurvePoint> = points
        .into_iter()
        .map(|(delta_c, accuracy, count)| CurvePoint { delta_c, accuracy, count })
        .collect();
    let fit = psychometric::fit_curve(&points).map_err(to_py)?;
    Ok((PyObserverModel(fit.model), fit.residual))
}

/// Fleiss kappa of an items x categories count table; returns `(kappa, band)`.
#[pyfunction]
fn fleiss_kappa(table: Vec<Vec<usize>>, raters_per_item: usize) -> PyResult<(f64, String)> {
    let r = metrics::fleiss_kappa(&table, raters_per_item).map_err(to_py)?;
    Ok((r.kappa, r.band.to_string()))
}

#[pyfunction]
fn vote(predicted_classes: Vec<usize>, num_classes: usize) -> PyResult<Vec<f64>> {
    labeling::vote(&predicted_classes, num_classes)
        .map(|l| l.probabilities)
        .map_err(to_py)
}

#[pyfunction]
fn cross_entropy_loss(pred: Vec<f64>, target: Vec<f64>) -> PyResult<f64> {
    nn::cross_entropy_loss(&pred, &target).map_err(to_py)
}

#[pyfunction]
fn kl_loss(target: Vec<f64>, pred: Vec<f64>) -> PyResult<f64> {
    nn::kl_loss(&target, &pred).map_err(to_py)
}

#[pyclass(name = "Network", module = "mcil_py", frozen)]
struct PyNetwork(nn::Network);

#[pymethods]
impl PyNetwork {
    /// Glorot-initialized network; `activation` is "relu" or "tanh".
    #[new]
    #[pyo3(signature = (hidden_widths, input_dim, output_dim, seed, activation = "relu", name = "net"))]
    fn new(
        hidden_widths: Vec<usize>,
        input_dim: usize,
        output_dim: usize,
        seed: u64,
        activation: &str,
        name: &str,
    ) -> PyResult<Self> {
        let act = match activation {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            other => return Err(PyValueError::new_err(format!("unknown activation {other:?}"))),
        };
        let spec = ArchitectureSpec::new(name, &hidden_widths, act);
        nn::init_network(&spec, input_dim, output_dim, seed)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(text: &str) -> PyResult<Self> {
        nn::load_network(text).map(Self).map_err(to_py)
    }

    fn save(&self) -> String {
        nn::save_network(&self.0)
    }

    #[getter]
    fn name(&self) -> &str {
        self.0.name()
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.0.num_parameters()
    }

    fn forward(&self, features: Vec<f64>) -> PyResult<Vec<f64>> {
        nn::forward(&self.0, &features).map_err(to_py)
    }

    /// `(class, probabilities)` for one sample.
    fn predict(&self, features: Vec<f64>) -> PyResult<(usize, Vec<f64>)> {
        nn::predict(&self.0, &features).map_err(to_py)
    }
}

/// Built-in experiment configuration as JSON.
#[pyfunction]
fn default_config_json() -> String {
    ExperimentConfig::default().to_json()
}

/// Run every stage for a JSON config and return the report as JSON.
#[pyfunction]
#[pyo3(signature = (config_json, seed = None))]
fn run_experiment(py: Python<'_>, config_json: &str, seed: Option<u64>) -> PyResult<String> {
    let mut config = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    if let Some(s) = seed {
        config.global_seed = s;
    }
    py.detach(|| pipeline::run_all(&config))
        .map(|r| r.to_json())
        .map_err(to_py)
}

/// Ablation over zoo prefixes; returns the table as JSON.
#[pyfunction]
fn run_ablation(py: Python<'_>, config_json: &str, sizes: Vec<usize>) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let table = py.detach(|| pipeline::ablation(&config, &sizes)).map_err(to_py)?;
    serde_json::to_string_pretty(&table).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn mcil_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyObserverModel>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(cumulative_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(joint_weights, m)?)?;
    m.add_function(wrap_pyfunction!(joint_model, m)?)?;
    m.add_function(wrap_pyfunction!(joint_variance_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(joint_slope_approx, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_joint_curve, m)?)?;
    m.add_function(wrap_pyfunction!(fit_curve, m)?)?;
    m.add_function(wrap_pyfunction!(fleiss_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(vote, m)?)?;
    m.add_function(wrap_pyfunction!(cross_entropy_loss, m)?)?;
    m.add_function(wrap_pyfunction!(kl_loss, m)?)?;
    m.add_function(wrap_pyfunction!(default_config_json, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_ablation, m)?)?;
    Ok(())
}
