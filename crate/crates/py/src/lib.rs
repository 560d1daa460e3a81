//! Python bindings. Datasets are wrapped as a class; configurations and
//! reports cross the boundary as plain dicts.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::{Complex32, Complex64};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::de::DeserializeOwned;
use serde::Serialize;

use csiqa_core::model::{read_dataset, split_dataset, write_dataset};
use csiqa_core::synth::{self, Generated};
use csiqa_core::workflow::{self, QualityReport};
use csiqa_core::{
    distance, diversity, features, similarity, Bandwidth, BinEdges, ChannelSample, Dataset,
    DistanceKind, DiversityConfig, DiversityMeasure, Error, FeatureKind, RandomSeed, SampleShape,
    SelectionConfig, Selector, SimilarityConfig, SimilarityMeasure, SynthConfig,
};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.extract::<String>() {
        Ok(s)
            if obj.is_instance_of::<pyo3::types::PyString>()
                && s.trim_start().starts_with(['{', '[']) =>
        {
            s
        }
        _ => obj
            .py()
            .import("json")?
            .call_method1("dumps", (obj,))?
            .extract()?,
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_name<T: DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} '{name}'")))
}

fn parse_features(names: Option<Vec<String>>) -> PyResult<Vec<FeatureKind>> {
    match names {
        None => Ok(FeatureKind::DEFAULT.to_vec()),
        Some(v) => v.iter().map(|n| parse_name("feature", n)).collect(),
    }
}

fn similarity_measure(name: &str, p: f64, bandwidth: Option<f64>) -> PyResult<SimilarityMeasure> {
    let bw = bandwidth.map_or(Bandwidth::MedianHeuristic, Bandwidth::Fixed);
    Ok(match name {
        "mean" | "mean_distance" => SimilarityMeasure::MeanDistance,
        "mmd" => SimilarityMeasure::Mmd { bandwidth: bw },
        "nnca" => SimilarityMeasure::Nnca,
        "wasserstein" => SimilarityMeasure::Wasserstein { p },
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown similarity measure '{other}'"
            )))
        }
    })
}

/// A collection of CSI samples sharing one shape.
#[pyclass(name = "Dataset", module = "csiqa", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Build from per-sample lists of complex values ordered antenna, subcarrier, snapshot.
    #[new]
    #[pyo3(signature = (samples, grid, subcarriers, snapshots=1, metadata=None))]
    fn new(
        samples: Vec<Vec<Complex32>>,
        grid: (usize, usize),
        subcarriers: usize,
        snapshots: usize,
        metadata: Option<BTreeMap<String, String>>,
    ) -> PyResult<Self> {
        let shape = SampleShape::new(grid, subcarriers, snapshots).map_err(err)?;
        let samples = samples
            .into_iter()
            .map(|v| ChannelSample::new(shape, v))
            .collect::<csiqa_core::Result<Vec<_>>>()
            .map_err(err)?;
        let inner = Dataset::new(samples, metadata.unwrap_or_default()).map_err(err)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: read_dataset(path).map_err(err)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        write_dataset(&self.inner, path).map_err(err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyDataset {
            inner: Dataset::from_bytes(data).map_err(err)?,
        })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &self.inner.to_bytes().map_err(err)?))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(grid_rows, grid_cols, subcarriers, snapshots)`
    #[getter]
    fn shape(&self) -> (usize, usize, usize, usize) {
        let s = self.inner.shape();
        (s.grid_rows, s.grid_cols, s.subcarriers, s.snapshots)
    }

    #[getter]
    fn metadata(&self) -> BTreeMap<String, String> {
        self.inner.metadata().clone()
    }

    fn sample(&self, index: usize) -> PyResult<Vec<Complex32>> {
        self.inner
            .samples()
            .get(index)
            .map(|s| s.values().to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("sample {index} out of range")))
    }

    fn normalized_by_max(&self) -> PyResult<Self> {
        Ok(PyDataset {
            inner: self.inner.normalized_by_max().map_err(err)?,
        })
    }

    /// Seeded random split; the first part holds `round(fraction * len)` samples.
    #[pyo3(signature = (fraction=0.5, seed=0))]
    fn split(&self, fraction: f64, seed: u64) -> PyResult<(Self, Self)> {
        let (a, b) = split_dataset(&self.inner, fraction, RandomSeed(seed)).map_err(err)?;
        Ok((PyDataset { inner: a }, PyDataset { inner: b }))
    }

    fn features(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let bundles = py
            .detach(|| features::extract_features(&self.inner))
            .map_err(err)?;
        to_py(py, &bundles)
    }

    fn __repr__(&self) -> String {
        let (r, c, f, t) = self.shape();
        format!(
            "Dataset(samples={}, grid=({r}, {c}), subcarriers={f}, snapshots={t})",
            self.inner.len()
        )
    }
}

fn wrap(generated: Vec<Generated>) -> Vec<PyDataset> {
    generated
        .into_iter()
        .map(|g| PyDataset { inner: g.dataset })
        .collect()
}

/// Generate datasets from a named preset, as the `generate` command does.
#[pyfunction]
#[pyo3(signature = (preset, seed=0, samples=None, datasets=None, width_ns=2000.0, targets_ns=None, snapshots=1))]
#[allow(clippy::too_many_arguments)]
fn generate_preset(
    py: Python<'_>,
    preset: &str,
    seed: u64,
    samples: Option<usize>,
    datasets: Option<usize>,
    width_ns: f64,
    targets_ns: Option<Vec<f64>>,
    snapshots: usize,
) -> PyResult<Vec<PyDataset>> {
    let grid = match preset {
        "appendix-a" | "delay-spread" => (8, 8),
        _ => (2, 8),
    };
    let cfg = SynthConfig {
        antenna_grid: grid,
        n_snapshots: snapshots,
        n_samples: samples.unwrap_or(if preset == "appendix-b" { 100 } else { 200 }),
        seed: RandomSeed(seed),
        normalize_max: preset == "uma-proxy",
        ..SynthConfig::default()
    };
    let targets = targets_ns.unwrap_or_else(|| vec![20.0, 100.0, 400.0, 800.0, 1600.0, 3200.0]);
    let preset = preset.to_string();
    let generated = py.detach(move || -> csiqa_core::Result<Vec<Generated>> {
        let per_ranges = |ranges: Vec<_>| {
            ranges
                .into_iter()
                .enumerate()
                .map(|(k, r)| {
                    let c = SynthConfig {
                        seed: cfg.seed.derive(k as u64),
                        ..cfg.clone()
                    };
                    synth::generate_dataset(&c, &r)
                })
                .collect()
        };
        match preset.as_str() {
            "appendix-a" => synth::appendix_a_corpus(
                &cfg,
                width_ns,
                &synth::appendix_a_offsets(datasets.unwrap_or(10)),
            ),
            "appendix-b" => synth::appendix_b_candidate_pool(&cfg, datasets.unwrap_or(100)),
            "appendix-c" => synth::appendix_c_grid(&cfg),
            "uma-proxy" => per_ranges(vec![synth::uma_proxy_ranges(); datasets.unwrap_or(1)]),
            "delay-spread" => per_ranges(
                targets
                    .iter()
                    .map(|&t| synth::delay_spread_ranges(t))
                    .collect(),
            ),
            other => Err(Error::InvalidInput(format!("unknown preset '{other}'"))),
        }
    });
    Ok(wrap(generated.map_err(err)?))
}

/// Generate one dataset from explicit config and path-range dicts.
#[pyfunction]
fn generate(
    py: Python<'_>,
    config: &Bound<'_, PyAny>,
    ranges: &Bound<'_, PyAny>,
) -> PyResult<PyDataset> {
    let cfg: SynthConfig = from_py(config)?;
    let ranges: synth::PathRanges = from_py(ranges)?;
    let g = py
        .detach(|| synth::generate_dataset(&cfg, &ranges))
        .map_err(err)?;
    Ok(PyDataset { inner: g.dataset })
}

#[pyfunction]
fn dist_euclidean(x: Vec<Complex64>, y: Vec<Complex64>) -> PyResult<f64> {
    distance::dist_euclidean(&x, &y).map_err(err)
}

#[pyfunction]
fn dist_gmc(x: Vec<Complex64>, y: Vec<Complex64>) -> PyResult<f64> {
    distance::dist_gmc(&x, &y).map_err(err)
}

#[pyfunction]
fn dist_ecs(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    distance::dist_ecs(&x, &y).map_err(err)
}

/// Set-level difference between two datasets on one feature.
#[pyfunction]
#[pyo3(signature = (x, y, feature="pdp", measure="wasserstein", distance="ecs", p=2.0, bandwidth=None))]
#[allow(clippy::too_many_arguments)]
fn dataset_difference(
    py: Python<'_>,
    x: &PyDataset,
    y: &PyDataset,
    feature: &str,
    measure: &str,
    distance: &str,
    p: f64,
    bandwidth: Option<f64>,
) -> PyResult<f64> {
    let f = parse_name("feature", feature)?;
    let d = parse_name("distance", distance)?;
    let m = similarity_measure(measure, p, bandwidth)?;
    py.detach(|| similarity::dataset_difference(&x.inner, &y.inner, f, d, m))
        .map_err(err)
}

/// Diversity of one feature; the measure defaults to entropy for sparsities and
/// distance-based for spectra.
#[pyfunction]
#[pyo3(signature = (dataset, feature="pdp", measure=None, distance="ecs", bins=32, bandwidth=None, jitter=1e-9, quality=75))]
#[allow(clippy::too_many_arguments)]
fn dataset_diversity(
    py: Python<'_>,
    dataset: &PyDataset,
    feature: &str,
    measure: Option<&str>,
    distance: &str,
    bins: usize,
    bandwidth: Option<f64>,
    jitter: f64,
    quality: u8,
) -> PyResult<f64> {
    let f: FeatureKind = parse_name("feature", feature)?;
    let d: DistanceKind = parse_name("distance", distance)?;
    let m = match measure {
        None => DiversityMeasure::default_for(f),
        Some("entropy") => DiversityMeasure::Entropy {
            edges: BinEdges::Uniform { bins },
        },
        Some("distance") => DiversityMeasure::DistanceBased { distance: d },
        Some("dpp") => DiversityMeasure::Dpp {
            distance: d,
            bandwidth: bandwidth.map_or(Bandwidth::MedianHeuristic, Bandwidth::Fixed),
            jitter,
        },
        Some("compression") => DiversityMeasure::Compression { quality },
        Some(other) => {
            return Err(PyValueError::new_err(format!(
                "unknown diversity measure '{other}'"
            )))
        }
    };
    py.detach(|| diversity::dataset_diversity(&dataset.inner, f, &m))
        .map_err(err)
}

/// Per-feature differences, min-max normalized across features and aggregated.
/// `config` is a full similarity config dict; otherwise the keyword options apply.
#[pyfunction]
#[pyo3(signature = (x, y, features=None, measure="wasserstein", p=2.0, bandwidth=None, config=None))]
#[allow(clippy::too_many_arguments)]
fn similarity_report(
    py: Python<'_>,
    x: &PyDataset,
    y: &PyDataset,
    features: Option<Vec<String>>,
    measure: &str,
    p: f64,
    bandwidth: Option<f64>,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let cfg = match config {
        Some(c) => from_py(c)?,
        None => {
            let features = parse_features(features)?;
            SimilarityConfig {
                rule: csiqa_core::AggregationRule::average(&features),
                features,
                measure: similarity_measure(measure, p, bandwidth)?,
                ..SimilarityConfig::default()
            }
        }
    };
    let report = py
        .detach(|| workflow::similarity_report(&x.inner, &y.inner, &cfg))
        .map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (dataset, features=None, config=None))]
fn diversity_report(
    py: Python<'_>,
    dataset: &PyDataset,
    features: Option<Vec<String>>,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let cfg: DiversityConfig = match config {
        Some(c) => from_py(c)?,
        None => DiversityConfig::for_features(&parse_features(features)?),
    };
    let report = py
        .detach(|| workflow::diversity_report(&dataset.inner, &cfg))
        .map_err(err)?;
    to_py(py, &report)
}

/// Recompute a report from its recorded method configuration.
#[pyfunction]
#[pyo3(signature = (report, x, y=None))]
fn replay(
    py: Python<'_>,
    report: &Bound<'_, PyAny>,
    x: &PyDataset,
    y: Option<&PyDataset>,
) -> PyResult<Py<PyAny>> {
    let report: QualityReport = from_py(report)?;
    let again = py
        .detach(|| report.replay(&x.inner, y.map(|d| &d.inner)))
        .map_err(err)?;
    to_py(py, &again)
}

/// Rank candidates by aggregate difference to the reference and select the
/// `k` closest, or all at or below `threshold`.
#[pyfunction]
#[pyo3(signature = (reference, candidates, k=None, threshold=None, features=None, measure="wasserstein", p=2.0, bandwidth=None))]
#[allow(clippy::too_many_arguments)]
fn augment_select(
    py: Python<'_>,
    reference: &PyDataset,
    candidates: Vec<PyRef<'_, PyDataset>>,
    k: Option<usize>,
    threshold: Option<f64>,
    features: Option<Vec<String>>,
    measure: &str,
    p: f64,
    bandwidth: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let selector = match (k, threshold) {
        (Some(k), None) => Selector::TopK(k),
        (None, Some(t)) => Selector::Threshold(t),
        _ => return Err(PyValueError::new_err("give exactly one of k and threshold")),
    };
    let features = parse_features(features)?;
    let cfg = SelectionConfig {
        rule: csiqa_core::AggregationRule::average(&features),
        features,
        measure: similarity_measure(measure, p, bandwidth)?,
        selector,
        ..SelectionConfig::top_k(1)
    };
    let pool: Vec<Dataset> = candidates.iter().map(|c| c.inner.clone()).collect();
    let result = py
        .detach(|| workflow::augment_select(&reference.inner, &pool, &cfg))
        .map_err(err)?;
    to_py(py, &result)
}

#[pymodule]
fn csiqa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(generate_preset, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(dist_euclidean, m)?)?;
    m.add_function(wrap_pyfunction!(dist_gmc, m)?)?;
    m.add_function(wrap_pyfunction!(dist_ecs, m)?)?;
    m.add_function(wrap_pyfunction!(dataset_difference, m)?)?;
    m.add_function(wrap_pyfunction!(dataset_diversity, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_report, m)?)?;
    m.add_function(wrap_pyfunction!(diversity_report, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(augment_select, m)?)?;
    m.add("SCHEMA_VERSION", workflow::SCHEMA_VERSION)?;
    Ok(())
}
