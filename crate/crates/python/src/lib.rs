//! Python bindings: configuration, scene generation, checkpoint inference,
//! attribute expansion, metrics and the full experiment runner.

use std::path::PathBuf;

use attrv2l::harness::{self, load_checkpoint, Expect, ExperimentConfig};
use attrv2l::microworld::{generate_scene as gen_scene, shipped_taxonomy, GeneratorConfig};
use attrv2l::tasks::{self, TaskKind, TrainedModel};
use attrv2l::{expand, metrics, vocab};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(attrv2l_py, Attrv2lError, PyException);

fn err(e: attrv2l::Error) -> PyErr {
    Attrv2lError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| Attrv2lError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Experiment configuration.
#[pyclass(name = "Config")]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Loads a TOML file, or the built-in defaults when `path` is None.
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<PathBuf>) -> PyResult<Self> {
        let inner = match path {
            Some(p) => ExperimentConfig::load(&p).map_err(err)?,
            None => ExperimentConfig::default(),
        };
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = ExperimentConfig::from_toml_str(text, std::path::Path::new(".")).map_err(err)?;
        Ok(PyConfig { inner })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }

    #[setter]
    fn set_seeds(&mut self, seeds: Vec<u64>) {
        self.inner.seeds = seeds;
    }

    #[getter]
    fn out_dir(&self) -> PathBuf {
        self.inner.out_dir.clone()
    }

    #[setter]
    fn set_out_dir(&mut self, dir: PathBuf) {
        self.inner.out_dir = dir;
    }

    #[getter]
    fn scenes(&self) -> usize {
        self.inner.corpus.scenes
    }

    #[setter]
    fn set_scenes(&mut self, n: usize) {
        self.inner.corpus.scenes = n;
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }
}

/// A trained task head restored from a checkpoint.
#[pyclass(name = "Model")]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = load_checkpoint(&path, &Expect::default()).map_err(err)?;
        Ok(PyModel { inner })
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.as_str()
    }

    #[getter]
    fn task(&self) -> &'static str {
        self.inner.task.as_str()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn answers(&self) -> Vec<String> {
        self.inner.answers.clone()
    }

    #[getter]
    fn words(&self) -> Vec<String> {
        self.inner.dict.words().to_vec()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        harness::save_checkpoint(&self.inner, &path).map_err(err)
    }

    /// Best caption for `vector` as a word list.
    #[pyo3(signature = (vector, beam=5, max_len=20))]
    fn caption(&self, vector: Vec<f64>, beam: usize, max_len: usize) -> PyResult<Vec<String>> {
        let hyps = tasks::decode_caption(&self.inner, &vector, beam, max_len).map_err(err)?;
        Ok(hyps
            .first()
            .map(|h| self.inner.dict.render(&h.tokens))
            .unwrap_or_default())
    }

    /// Single-word answer and the distribution over `answers`.
    fn answer(&self, vector: Vec<f64>, question: Vec<String>) -> PyResult<(String, Vec<f64>)> {
        tasks::answer_qa_single(&self.inner, &vector, &question).map_err(err)
    }

    #[pyo3(signature = (vector, question, beam=5, max_len=20))]
    fn answer_sentence(
        &self,
        vector: Vec<f64>,
        question: Vec<String>,
        beam: usize,
        max_len: usize,
    ) -> PyResult<Vec<String>> {
        tasks::answer_qa_seq(&self.inner, &vector, &question, beam, max_len).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(task={}, mode={}, input_dim={})",
            self.inner.task.as_str(),
            self.inner.mode.as_str(),
            self.inner.input_dim()
        )
    }
}

/// A random scene of the default micro-world as a dict.
#[pyfunction]
fn generate_scene<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let scene = gen_scene(seed, &GeneratorConfig::default()).map_err(err)?;
    to_py(py, &scene)
}

/// Runs the full pipeline and returns the report as a dict.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let report = harness::run_experiment(&config.inner).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (candidates, references, n=4, smoothing=0.0))]
fn bleu(candidates: Vec<Vec<String>>, references: Vec<Vec<Vec<String>>>, n: usize, smoothing: f64) -> PyResult<f64> {
    metrics::bleu(&candidates, &references, n, smoothing).map_err(err)
}

/// WUPS against the shipped micro-world answer taxonomy.
#[pyfunction]
fn wups(predictions: Vec<String>, gold: Vec<String>, threshold: f64) -> PyResult<f64> {
    let tree = shipped_taxonomy(&GeneratorConfig::default().lexicon).map_err(err)?;
    metrics::wups(&predictions, &gold, &tree, threshold).map_err(err)
}

#[pyfunction]
fn perplexity_from_nll(total_nll: f64, words: usize) -> PyResult<f64> {
    metrics::perplexity_from_nll(total_nll, words).map_err(err)
}

/// Knowledge expansion of `att` through the row-major `values` matrix.
#[pyfunction]
fn expand_vector(att: Vec<f64>, rows: Vec<String>, cols: Vec<String>, values: Vec<f64>) -> PyResult<Vec<f64>> {
    let s = expand::SimilarityMatrix::from_values(rows, cols, values).map_err(err)?;
    expand::expand_vector(&att, &s).map_err(err)
}

/// Word dictionary built from `tokens`, returned as its word list.
#[pyfunction]
fn word_dict(tokens: Vec<String>) -> PyResult<Vec<String>> {
    Ok(vocab::WordDict::from_tokens(tokens).map_err(err)?.words().to_vec())
}

#[pyfunction]
fn task_names() -> Vec<&'static str> {
    [TaskKind::Caption, TaskKind::QaSingle, TaskKind::QaSeq]
        .iter()
        .map(|t| t.as_str())
        .collect()
}

#[pymodule]
fn attrv2l_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("Attrv2lError", m.py().get_type::<Attrv2lError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(wups, m)?)?;
    m.add_function(wrap_pyfunction!(perplexity_from_nll, m)?)?;
    m.add_function(wrap_pyfunction!(expand_vector, m)?)?;
    m.add_function(wrap_pyfunction!(word_dict, m)?)?;
    m.add_function(wrap_pyfunction!(task_names, m)?)?;
    Ok(())
}
