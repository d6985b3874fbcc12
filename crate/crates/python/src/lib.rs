//! Python bindings: divergences, datasets, training, presets and the
//! statistics used by the reports.

use std::path::PathBuf;

use fdal::datasets::{self, DADataset, GaussianShift};
use fdal::divergence::{self, DivergenceSpec, FiniteDistribution};
use fdal::harness::{self, ExperimentConfig};
use fdal::models::AnyModel;
use fdal::stats::{self, PMethod};
use fdal::tensor::Tensor;
use fdal::trainer::{self, Classifier, RunMetrics, TrainConfig};
use fdal::Error;
use pyo3::exceptions::{PyOSError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyList, PyString};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn distribution(p: Vec<f64>) -> PyResult<FiniteDistribution> {
    FiniteDistribution::new(p).map_err(|e| py_err(e.into()))
}

#[pyclass(name = "Divergence", module = "fdal", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDivergence {
    spec: DivergenceSpec,
}

#[pymethods]
impl PyDivergence {
    #[new]
    #[pyo3(signature = (name, gamma=None))]
    fn new(name: &str, gamma: Option<f64>) -> PyResult<Self> {
        let spec = divergence::get_spec(name, gamma).map_err(|e| py_err(e.into()))?;
        Ok(Self { spec })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.spec.name()
    }

    #[getter]
    fn label(&self) -> String {
        self.spec.label()
    }

    #[getter]
    fn gamma(&self) -> Option<f64> {
        self.spec.gamma()
    }

    #[getter]
    fn shift_constant(&self) -> f64 {
        self.spec.shift_constant()
    }

    /// Representative value of φ'(1).
    #[getter]
    fn phi_prime_at_one(&self) -> f64 {
        self.spec.phi_prime_at_one().representative()
    }

    /// `(lo, hi, lo_closed, hi_closed)` of the conjugate's domain.
    #[getter]
    fn conjugate_domain(&self) -> (f64, f64, bool, bool) {
        let d = self.spec.conjugate_domain();
        (d.lo, d.hi, d.lo_closed, d.hi_closed)
    }

    fn phi(&self, x: f64) -> PyResult<f64> {
        self.spec.phi(x).map_err(|e| py_err(e.into()))
    }

    fn conjugate(&self, t: f64) -> PyResult<f64> {
        self.spec.conjugate(t).map_err(|e| py_err(e.into()))
    }

    fn activation(&self, x: f64) -> f64 {
        self.spec.activation(x)
    }

    fn fenchel_young_gap(&self, x: f64, t: f64) -> PyResult<f64> {
        self.spec.fenchel_young_gap(x, t).map_err(|e| py_err(e.into()))
    }

    /// Divergence between two finite distributions, zero when they agree.
    fn between(&self, ps: Vec<f64>, pt: Vec<f64>) -> PyResult<f64> {
        divergence::analytic_f_divergence(&distribution(ps)?, &distribution(pt)?, &self.spec)
            .map_err(|e| py_err(e.into()))
    }

    fn __repr__(&self) -> String {
        format!("Divergence({})", self.spec.label())
    }
}

/// Every divergence of the catalog; `gamma` parameterizes the rescaled JS.
#[pyfunction]
#[pyo3(signature = (gamma=2.0))]
fn catalog(gamma: f64) -> PyResult<Vec<PyDivergence>> {
    let specs = divergence::catalog(gamma).map_err(|e| py_err(e.into()))?;
    Ok(specs.into_iter().map(|spec| PyDivergence { spec }).collect())
}

#[pyclass(name = "Dataset", module = "fdal", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    ds: DADataset,
}

#[pymethods]
impl PyDataset {
    #[getter]
    fn domain(&self) -> &'static str {
        self.ds.domain().as_str()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.ds.dim()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.ds.num_classes()
    }

    /// Evaluation-label reads so far, shared with every copy.
    #[getter]
    fn label_reads(&self) -> usize {
        self.ds.label_reads()
    }

    fn __len__(&self) -> usize {
        self.ds.len()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        to_rows(self.ds.features())
    }

    /// Training labels, `None` for an unlabeled or sequestered target.
    fn labels(&self) -> Option<Vec<usize>> {
        self.ds.train_labels().map(<[usize]>::to_vec)
    }

    fn select(&self, idx: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            ds: self.ds.select(&idx).map_err(py_err)?,
        })
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        datasets::save_csv(&self.ds, &path).map_err(py_err)
    }

    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            ds: datasets::load_csv(&path).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Dataset(domain={}, n={}, dim={})", self.domain(), self.ds.len(), self.ds.dim())
    }
}

fn to_rows(t: &Tensor) -> Vec<Vec<f64>> {
    t.data().chunks(t.cols().max(1)).map(<[f64]>::to_vec).collect()
}

fn pair(p: (DADataset, DADataset)) -> (PyDataset, PyDataset) {
    (PyDataset { ds: p.0 }, PyDataset { ds: p.1 })
}

/// Labeled source and sequestered target two-moons, the target rotated.
#[pyfunction]
#[pyo3(signature = (n=2000, rotation_deg=30.0, noise=0.1, seed=0))]
fn make_rotated_moons(n: usize, rotation_deg: f64, noise: f64, seed: u64) -> PyResult<(PyDataset, PyDataset)> {
    datasets::make_rotated_moons(n, rotation_deg, noise, seed).map(pair).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (n=2000, dim=2, mean_shift=1.0, cov_scale=1.0, seed=0))]
fn make_gaussian_shift(
    n: usize,
    dim: usize,
    mean_shift: f64,
    cov_scale: f64,
    seed: u64,
) -> PyResult<(PyDataset, PyDataset)> {
    datasets::make_gaussian_shift(&GaussianShift::new(n, dim, mean_shift, cov_scale), seed)
        .map(pair)
        .map_err(py_err)
}

#[pyclass(name = "Model", module = "fdal", frozen)]
pub struct PyModel {
    model: AnyModel,
}

#[pymethods]
impl PyModel {
    /// Argmax class for each row of `features`.
    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        let x = Tensor::from_rows(&features).map_err(|e| py_err(e.into()))?;
        let s = self.model.class_scores(&x).map_err(py_err)?;
        Ok(to_rows(&s)
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                    .0
            })
            .collect())
    }

    /// `(accuracy, mean cross-entropy)` on the evaluation labels.
    fn evaluate(&self, ds: &PyDataset) -> PyResult<(f64, f64)> {
        trainer::evaluate(&self.model, &ds.ds).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.model.save(&path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            model: AnyModel::load(&path).map_err(py_err)?,
        })
    }
}

#[pyclass(name = "Metrics", module = "fdal", frozen)]
pub struct PyMetrics {
    metrics: RunMetrics,
}

#[pymethods]
impl PyMetrics {
    #[getter]
    fn final_target_acc(&self) -> f64 {
        self.metrics.final_target_acc()
    }

    #[getter]
    fn label_reads_during_updates(&self) -> usize {
        self.metrics.label_reads_during_updates
    }

    /// One dict per evaluated epoch.
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.metrics
            .rows
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("epoch", r.epoch)?;
                d.set_item("source_risk", r.source_risk)?;
                d.set_item("target_risk", r.target_risk)?;
                d.set_item("dst", r.dst)?;
                d.set_item("lhat_src", r.lhat_src)?;
                d.set_item("lhat_tgt", r.lhat_tgt)?;
                d.set_item("source_acc", r.source_acc)?;
                d.set_item("target_acc", r.target_acc)?;
                Ok(d)
            })
            .collect()
    }

    fn to_csv(&self) -> String {
        self.metrics.to_csv()
    }
}

fn toml_literal(v: &Bound<'_, PyAny>) -> PyResult<String> {
    if v.is_instance_of::<PyBool>() {
        Ok(v.extract::<bool>()?.to_string())
    } else if v.is_instance_of::<PyInt>() {
        Ok(v.extract::<i64>()?.to_string())
    } else if v.is_instance_of::<PyFloat>() {
        Ok(format!("{:?}", v.extract::<f64>()?))
    } else if v.is_instance_of::<PyString>() {
        Ok(format!("{:?}", v.extract::<String>()?))
    } else if let Ok(list) = v.cast::<PyList>() {
        let items = list.iter().map(|i| toml_literal(&i)).collect::<PyResult<Vec<_>>>()?;
        Ok(format!("[{}]", items.join(", ")))
    } else {
        Err(PyTypeError::new_err(format!("unsupported option value {v}")))
    }
}

fn overrides(kwargs: Option<&Bound<'_, PyDict>>, prefix: &str) -> PyResult<Vec<String>> {
    let mut out = Vec::new();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            if v.is_none() {
                continue;
            }
            out.push(format!("{prefix}{}={}", k.extract::<String>()?, toml_literal(&v)?));
        }
    }
    Ok(out)
}

/// Trains one model. Keyword arguments set training options by name,
/// e.g. `method="dann"`, `divergence="pearson_chi2"`, `epochs=10`.
#[pyfunction]
#[pyo3(signature = (source, target, **options))]
fn train(source: &PyDataset, target: &PyDataset, options: Option<&Bound<'_, PyDict>>) -> PyResult<(PyModel, PyMetrics)> {
    let cfg: TrainConfig = harness::apply_overrides(&TrainConfig::default(), &overrides(options, "")?).map_err(py_err)?;
    let (model, metrics) = trainer::run(&cfg, &source.ds, &target.ds).map_err(py_err)?;
    Ok((PyModel { model }, PyMetrics { metrics }))
}

#[pyclass(name = "PresetResult", module = "fdal", frozen)]
pub struct PyPresetResult {
    out: harness::PresetOutput,
}

#[pymethods]
impl PyPresetResult {
    fn table_text(&self) -> String {
        self.out.table.to_text()
    }

    fn table_csv(&self) -> String {
        self.out.table.to_csv()
    }

    /// `(method, divergence, gamma, mean, std, p_value)` per row.
    #[allow(clippy::type_complexity)]
    fn rows(&self) -> Vec<(String, String, Option<f64>, f64, f64, Option<f64>)> {
        self.out
            .table
            .rows
            .iter()
            .map(|r| (r.method.clone(), r.divergence.clone(), r.gamma, r.mean, r.std, r.p_value))
            .collect()
    }

    /// `(cell id, message)` for every cell whose training diverged.
    fn failures(&self) -> Vec<(String, String)> {
        self.out.failures()
    }

    /// Mean label-shift slope per arm; empty for other presets.
    fn slopes(&self) -> Vec<(String, f64)> {
        self.out
            .label_shift
            .as_ref()
            .map(|ls| {
                ls.slopes
                    .keys()
                    .map(|arm| (arm.clone(), ls.mean_slope(arm).unwrap_or(f64::NAN)))
                    .collect()
            })
            .unwrap_or_default()
    }

    fn manifest(&self) -> PyResult<String> {
        self.out.config.to_toml().map_err(py_err)
    }
}

/// Runs a named preset. Keyword arguments are dotted overrides with `__`
/// for the dot, e.g. `trainer__epochs=5`, `harness__seeds=[0, 1]`.
#[pyfunction]
#[pyo3(signature = (name, out=None, **options))]
fn run_preset(name: &str, out: Option<PathBuf>, options: Option<&Bound<'_, PyDict>>) -> PyResult<PyPresetResult> {
    let ov: Vec<String> = overrides(options, "")?.into_iter().map(|o| {
        let (k, v) = o.split_once('=').expect("built as key=value");
        format!("{}={v}", k.replace("__", "."))
    }).collect();
    let cfg = ExperimentConfig::preset(name).and_then(|c| c.with_overrides(&ov)).map_err(py_err)?;
    let out = harness::run_preset(&cfg, out.as_deref()).map_err(py_err)?;
    Ok(PyPresetResult { out })
}

/// Two-sided signed-rank test; returns `(w_plus, n, p_value, method)`.
#[pyfunction]
fn wilcoxon_signed_rank(diffs: Vec<f64>) -> (f64, usize, f64, &'static str) {
    let w = stats::wilcoxon_signed_rank(&diffs);
    let method = match w.method {
        PMethod::Exact => "exact",
        PMethod::Normal => "normal",
    };
    (w.w_plus, w.n, w.p_value, method)
}

#[pymodule]
#[pyo3(name = "fdal")]
fn fdal_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function of the extension to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDivergence>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyMetrics>()?;
    m.add_class::<PyPresetResult>()?;
    m.add_function(wrap_pyfunction!(catalog, m)?)?;
    m.add_function(wrap_pyfunction!(make_rotated_moons, m)?)?;
    m.add_function(wrap_pyfunction!(make_gaussian_shift, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_signed_rank, m)?)?;
    m.add("PRESETS", harness::PRESETS.to_vec())?;
    Ok(())
}
