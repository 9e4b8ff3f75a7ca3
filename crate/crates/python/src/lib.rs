use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use matryoshka_core::adaboost::{mc_misclassification, train_adaboost, BoostConfig};
use matryoshka_core::figures::{self, Figure, FIGURE_RHOS, NESTING_RHO};
use matryoshka_core::matryoshka::{build_fixed_2_matryoshka, MatryoshkaConfig};
use matryoshka_core::model::{Metadata, Model as CoreModel, ModelRecord};
use matryoshka_core::ptree::{grow_tree, mc_tree_misclassification, StopRule, TreeConfig};
use matryoshka_core::weak::{ConstantEdgeLearner, QSource, StumpLearner, WeakLearner};
use matryoshka_core::{bounds, Dataset as CoreDataset, RandomStream, Sign};

fn err(e: matryoshka_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyfunction]
fn bound_f(t: f64, rho: f64) -> PyResult<f64> {
    bounds::bound_f(t, rho).map_err(err)
}

#[pyfunction]
fn bound_adaboost(t: u64, rho: f64) -> PyResult<f64> {
    bounds::bound_adaboost(t, rho).map_err(err)
}

#[pyfunction]
fn bound_m2(t: u64, rho: f64) -> PyResult<f64> {
    bounds::bound_m2(t, rho).map_err(err)
}

#[pyfunction]
fn bound_nested(t: u64, t1: f64, rho: f64) -> PyResult<f64> {
    bounds::bound_nested(t, t1, rho).map_err(err)
}

#[pyfunction]
fn bound_iso_nested(t: u64, levels: u32, rho: f64) -> PyResult<f64> {
    bounds::bound_iso_nested(t, levels, rho).map_err(err)
}

#[pyfunction]
fn rho_from_epsilon(epsilon: f64) -> PyResult<f64> {
    bounds::rho_from_epsilon(epsilon).map_err(err)
}

#[pyfunction]
fn epsilon_from_rho(rho: f64) -> PyResult<f64> {
    bounds::epsilon_from_rho(rho).map_err(err)
}

/// Labelled examples; labels are +1 or -1.
#[pyclass(frozen)]
struct Dataset {
    inner: CoreDataset,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (features, labels, weights=None))]
    fn new(features: Vec<Vec<f64>>, labels: Vec<i64>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let labels = labels
            .into_iter()
            .map(|y| match y {
                1 => Ok(Sign::Plus),
                -1 => Ok(Sign::Minus),
                other => Err(PyValueError::new_err(format!("label must be +1 or -1, got {other}"))),
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Dataset { inner: CoreDataset::new(features, labels, weights).map_err(err)? })
    }

    #[staticmethod]
    fn load_csv(path: &str) -> PyResult<Self> {
        Ok(Dataset { inner: CoreDataset::load_csv(path).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }
}

/// A trained model with its metadata.
#[pyclass(frozen)]
struct Model {
    record: ModelRecord,
}

#[pymethods]
impl Model {
    #[getter]
    fn kind(&self) -> &'static str {
        self.record.model.kind()
    }

    #[getter]
    fn bound(&self) -> f64 {
        self.record.model.bound()
    }

    #[getter]
    fn weak_learner_calls(&self) -> usize {
        match &self.record.model {
            CoreModel::Adaboost(m) => m.len(),
            CoreModel::Ptree(t) | CoreModel::Matryoshka(t) => t.weak_learner_calls(),
        }
    }

    /// Monte-Carlo misclassification as `(mean, standard error)`.
    #[pyo3(signature = (data, trials=1000, seed=0))]
    fn misclassification(&self, data: &Dataset, trials: usize, seed: u64) -> PyResult<(f64, f64)> {
        let loss = match &self.record.model {
            CoreModel::Adaboost(m) => mc_misclassification(m, &data.inner, trials, seed),
            CoreModel::Ptree(t) | CoreModel::Matryoshka(t) => mc_tree_misclassification(t, &data.inner, trials, seed),
        }
        .map_err(err)?;
        Ok((loss.mean, loss.std_error))
    }

    /// One randomized score `H(x)`.
    #[pyo3(signature = (x, seed=0))]
    fn score(&self, x: Vec<f64>, seed: u64) -> f64 {
        let mut stream = RandomStream::new(seed, "python/score", 0);
        match &self.record.model {
            CoreModel::Adaboost(m) => m.score(&x, &mut stream),
            CoreModel::Ptree(t) | CoreModel::Matryoshka(t) => t.predict(&x, &mut stream).0,
        }
    }

    fn to_json(&self) -> PyResult<String> {
        self.record.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Model { record: ModelRecord::from_json(text).map_err(err)? })
    }
}

fn learner(oracle: &str, epsilon: f64, p_flip: f64) -> PyResult<Box<dyn WeakLearner>> {
    match oracle {
        "stump" => Ok(Box::new(StumpLearner::new(p_flip).map_err(err)?)),
        "constant-edge" => Ok(Box::new(ConstantEdgeLearner::new(epsilon).map_err(err)?)),
        other => Err(PyValueError::new_err(format!("unknown oracle `{other}`; expected stump or constant-edge"))),
    }
}

fn q_source(exact_q: bool) -> QSource {
    if exact_q {
        QSource::Exact
    } else {
        QSource::default()
    }
}

fn wrap(model: CoreModel, learner: &dyn WeakLearner, data: &CoreDataset, seed: u64) -> Model {
    let metadata = Metadata {
        seed,
        learner: learner.describe(),
        dataset_fingerprint: data.fingerprint(),
        ..Default::default()
    };
    Model { record: ModelRecord::new(model, metadata) }
}

#[pyfunction]
#[pyo3(signature = (data, rounds, oracle="stump", epsilon=0.1, p_flip=0.1, exact_q=false, seed=0))]
fn train(
    data: &Dataset,
    rounds: usize,
    oracle: &str,
    epsilon: f64,
    p_flip: f64,
    exact_q: bool,
    seed: u64,
) -> PyResult<Model> {
    let learner = learner(oracle, epsilon, p_flip)?;
    let config = BoostConfig { rounds, q_source: q_source(exact_q), seed, ..Default::default() };
    let model = train_adaboost(&data.inner, learner.as_ref(), &config).map_err(err)?;
    Ok(wrap(CoreModel::Adaboost(model), learner.as_ref(), &data.inner, seed))
}

#[pyfunction]
#[pyo3(signature = (data, nodes, oracle="stump", epsilon=0.1, p_flip=0.1, exact_q=false, seed=0))]
fn train_ptree(
    data: &Dataset,
    nodes: usize,
    oracle: &str,
    epsilon: f64,
    p_flip: f64,
    exact_q: bool,
    seed: u64,
) -> PyResult<Model> {
    let learner = learner(oracle, epsilon, p_flip)?;
    let config = TreeConfig { stop: StopRule::nodes(nodes), q_source: q_source(exact_q), seed };
    let tree = grow_tree(&data.inner, learner.as_ref(), &config).map_err(err)?;
    Ok(wrap(CoreModel::Ptree(tree), learner.as_ref(), &data.inner, seed))
}

/// Fixed-2 matryoshka with `levels` nesting levels (`2^levels` weak-learner calls).
#[pyfunction]
#[pyo3(signature = (data, levels, oracle="stump", epsilon=0.1, p_flip=0.1, exact_q=false, seed=0))]
fn train_matryoshka(
    data: &Dataset,
    levels: u32,
    oracle: &str,
    epsilon: f64,
    p_flip: f64,
    exact_q: bool,
    seed: u64,
) -> PyResult<Model> {
    let learner = learner(oracle, epsilon, p_flip)?;
    let config = MatryoshkaConfig { q_source: q_source(exact_q), seed, ..Default::default() };
    let tree = build_fixed_2_matryoshka(&data.inner, learner.as_ref(), levels, &config).map_err(err)?;
    Ok(wrap(CoreModel::Matryoshka(tree), learner.as_ref(), &data.inner, seed))
}

fn rows<'py, T: serde::Serialize>(py: Python<'py>, rows: &[T]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    rows.iter()
        .map(|row| {
            let value = serde_json::to_value(row).map_err(|e| PyValueError::new_err(e.to_string()))?;
            let dict = PyDict::new(py);
            for (k, v) in value.as_object().into_iter().flatten() {
                match v {
                    serde_json::Value::Bool(b) => dict.set_item(k, b)?,
                    serde_json::Value::Number(n) if n.is_u64() => dict.set_item(k, n.as_u64())?,
                    other => dict.set_item(k, other.as_f64())?,
                }
            }
            Ok(dict)
        })
        .collect()
}

/// Rows of a bound figure, one dict per CSV row.
#[pyfunction]
fn figure<'py>(py: Python<'py>, name: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    match name.parse::<Figure>().map_err(err)? {
        Figure::AdaboostVsTreeVsM2 => rows(py, &figures::adaboost_vs_tree_vs_m2(&FIGURE_RHOS, 1024).map_err(err)?),
        Figure::TreeOfTrees => rows(py, &figures::tree_of_trees(&[64, 256, 1024], NESTING_RHO, 65).map_err(err)?),
        Figure::NestingLevels => rows(py, &figures::nesting_levels(&[1024, 65536], NESTING_RHO).map_err(err)?),
    }
}

#[pymodule]
fn matryoshka(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bound_f, m)?)?;
    m.add_function(wrap_pyfunction!(bound_adaboost, m)?)?;
    m.add_function(wrap_pyfunction!(bound_m2, m)?)?;
    m.add_function(wrap_pyfunction!(bound_nested, m)?)?;
    m.add_function(wrap_pyfunction!(bound_iso_nested, m)?)?;
    m.add_function(wrap_pyfunction!(rho_from_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_from_rho, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(train_ptree, m)?)?;
    m.add_function(wrap_pyfunction!(train_matryoshka, m)?)?;
    m.add_function(wrap_pyfunction!(figure, m)?)?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    Ok(())
}
