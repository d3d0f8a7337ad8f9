//! Python bindings: simulation, recording files, the radar image pipeline
//! and streaming classification with a saved model.

use std::path::PathBuf;

use fert_core::dsp::{process_stream, FeatureWindow, PipelineConfig};
use fert_core::sim::{simulate_recording, SceneTemplates};
use fert_core::train::{load_model, Classifier};
use fert_core::{derive_params, io, ClassLabel, RadarConfig};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(fert, FertError, PyException, "Error raised by fert-core; args are (message, exit_code).");

fn py_err(e: impl Into<fert_core::Error>) -> PyErr {
    let e = e.into();
    FertError::new_err((e.to_string(), e.exit_code()))
}

fn parse_label(label: &str) -> PyResult<ClassLabel> {
    label.parse().map_err(|_| FertError::new_err((format!("unknown label {label:?}"), 1)))
}

/// A recorded or simulated ADC sequence.
#[pyclass(module = "fert")]
struct Recording {
    inner: fert_core::sim::Recording,
}

#[pymethods]
impl Recording {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Recording {
            inner: io::read_recording(&path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_bytes(bytes: &[u8]) -> PyResult<Self> {
        Ok(Recording {
            inner: io::decode_recording(bytes).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::write_recording(&path, &self.inner).map_err(py_err)
    }

    fn to_bytes(&self) -> PyResult<Vec<u8>> {
        io::encode_recording(&self.inner).map_err(py_err)
    }

    #[getter]
    fn label(&self) -> Option<&'static str> {
        self.inner.label.map(ClassLabel::name)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// `(n_rx, n_chirps, n_samples)` of every frame.
    #[getter]
    fn frame_shape(&self) -> (usize, usize, usize) {
        self.inner.frames.first().map_or((0, 0, 0), |f| (f.n_rx, f.n_chirps, f.n_samples))
    }

    fn __len__(&self) -> usize {
        self.inner.frames.len()
    }

    /// Flat row-major samples of frame `i`.
    fn frame(&self, i: usize) -> PyResult<Vec<f32>> {
        self.inner
            .frames
            .get(i)
            .map(|f| f.data.clone())
            .ok_or_else(|| FertError::new_err((format!("frame {i} out of range"), 1)))
    }

    fn __repr__(&self) -> String {
        format!("Recording(label={:?}, frames={})", self.label(), self.inner.frames.len())
    }
}

/// The four images of one completed integration window.
#[pyclass(module = "fert", frozen)]
struct Window {
    inner: FeatureWindow,
}

#[pymethods]
impl Window {
    #[getter]
    fn frame_index(&self) -> u64 {
        self.inner.frame_index
    }

    #[getter]
    fn window_len(&self) -> usize {
        self.inner.window_len
    }

    /// `(rows, cols, flat data)` of `kind`: "rdi", "micro_rdi", "rai" or "rei".
    fn image(&self, kind: &str) -> PyResult<(usize, usize, Vec<f32>)> {
        let img = match kind {
            "rdi" => &self.inner.rdi,
            "micro_rdi" => &self.inner.micro_rdi,
            "rai" => &self.inner.rai,
            "rei" => &self.inner.rei,
            _ => return Err(FertError::new_err((format!("unknown image {kind:?}"), 1))),
        };
        Ok((img.rows, img.cols, img.data.clone()))
    }
}

/// Streaming classifier around a saved model.
#[pyclass(module = "fert", unsendable)]
struct StreamClassifier {
    inner: Classifier,
}

#[pymethods]
impl StreamClassifier {
    #[new]
    #[pyo3(signature = (model_path, window = 200))]
    fn new(model_path: PathBuf, window: usize) -> PyResult<Self> {
        let net = load_model(&model_path).map_err(py_err)?;
        let inner = Classifier::new(&RadarConfig::default(), &PipelineConfig::with_window(window), net).map_err(py_err)?;
        Ok(StreamClassifier { inner })
    }

    /// Runs every frame of `recording` and returns `(frame_index, label,
    /// confidence)` for each emitted window.
    fn classify(&mut self, recording: &Recording) -> PyResult<Vec<(u64, &'static str, f64)>> {
        self.inner.reset();
        let mut out = Vec::new();
        for f in &recording.inner.frames {
            if let Some(p) = self.inner.push_frame(f).map_err(py_err)? {
                out.push((p.frame_index, p.label.name(), p.confidence));
            }
        }
        Ok(out)
    }
}

/// Simulates one recording of `label` with the default radar and scene
/// templates.
#[pyfunction]
fn simulate(label: &str, frames: usize, seed: u64) -> PyResult<Recording> {
    let label = parse_label(label)?;
    let inner = simulate_recording(&RadarConfig::default(), &SceneTemplates::default(), label, frames, seed).map_err(py_err)?;
    Ok(Recording { inner })
}

/// Feature windows of `recording` at integration window `window`.
#[pyfunction]
#[pyo3(signature = (recording, window = 200))]
fn process(recording: &Recording, window: usize) -> PyResult<Vec<Window>> {
    let windows = process_stream(&recording.inner, &RadarConfig::default(), &PipelineConfig::with_window(window)).map_err(py_err)?;
    Ok(windows.into_iter().map(|inner| Window { inner }).collect())
}

/// Frames a pipeline at `window` consumes before its first output.
#[pyfunction]
#[pyo3(signature = (window = 200))]
fn latency_frames(window: usize) -> usize {
    PipelineConfig::with_window(window).latency_frames()
}

/// Derived quantities of the default radar configuration.
#[pyfunction]
fn derived_params(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let p = derive_params(&RadarConfig::default()).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("range_resolution", p.range_resolution)?;
    d.set_item("max_range", p.max_range)?;
    d.set_item("wavelength", p.wavelength)?;
    d.set_item("velocity_resolution", p.velocity_resolution)?;
    d.set_item("max_velocity", p.max_velocity)?;
    d.set_item("n_range_bins", p.n_range_bins)?;
    d.set_item("n_doppler_bins", p.n_doppler_bins)?;
    Ok(d)
}

#[pymodule]
fn fert(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FertError", m.py().get_type::<FertError>())?;
    m.add("LABELS", ClassLabel::ALL.map(ClassLabel::name).to_vec())?;
    m.add_class::<Recording>()?;
    m.add_class::<Window>()?;
    m.add_class::<StreamClassifier>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(process, m)?)?;
    m.add_function(wrap_pyfunction!(latency_frames, m)?)?;
    m.add_function(wrap_pyfunction!(derived_params, m)?)?;
    Ok(())
}
