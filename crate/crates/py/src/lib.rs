//! Python bindings: motifs, keys, token matrices, the pair classifier,
//! repetition weights, checkpoints and piece generation.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use repetition_core::generator::{classify_tokens, generate_piece, motif_key, render_midi, GenerationOptions, GenerationRequest};
use repetition_core::model::{checkpoint, GammaSchedule, ModelState, RepetitionLearningMatrix};
use repetition_core::rules::{self, Classifier, RepetitionType};
use repetition_core::dataset::Song;
use repetition_core::symbolic::{detokenize, encode_motif, Attribute, Motif as CoreMotif};
use repetition_core::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn label(name: &str) -> PyResult<RepetitionType> {
    name.parse().map_err(|_| PyValueError::new_err(format!("unknown repetition type {name:?}")))
}

/// One bar of notes.
#[pyclass(module = "repetition", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Motif(CoreMotif);

#[pymethods]
impl Motif {
    /// Quarter notes at the given MIDI pitches.
    #[staticmethod]
    fn from_pitches(pitches: Vec<u8>) -> PyResult<Self> {
        if pitches.iter().any(|&p| p > 127) {
            return Err(PyValueError::new_err("pitch outside 0..=127"));
        }
        Ok(Motif(CoreMotif::from_pitches(&pitches)))
    }

    /// Notes as `(pitch, slot, length)` in sixteenth-note slots of one bar.
    #[staticmethod]
    #[pyo3(signature = (notes, velocity = 80))]
    fn from_slots(notes: Vec<(u8, u32, u32)>, velocity: u8) -> Self {
        Motif(CoreMotif::from_slots(0, &notes, velocity))
    }

    fn pitches(&self) -> Vec<u16> {
        self.0.pitches().into_iter().map(u16::from).collect()
    }

    /// Highest pitch per onset.
    fn melody(&self) -> Vec<u16> {
        self.0.melody().into_iter().map(u16::from).collect()
    }

    fn transposed(&self, semitones: i32) -> PyResult<Self> {
        self.0
            .transposed(semitones)
            .map(Motif)
            .ok_or_else(|| PyValueError::new_err("transposition leaves the MIDI range"))
    }

    #[pyo3(signature = (tempo_bpm = 120.0))]
    fn tokens(&self, tempo_bpm: f64) -> Tokens {
        Tokens(encode_motif(&self.0, tempo_bpm))
    }

    fn __len__(&self) -> usize {
        self.0.notes().len()
    }

    fn __repr__(&self) -> String {
        format!("Motif({:?})", self.0.pitches())
    }
}

#[pyclass(module = "repetition", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Key(rules::Key);

#[pymethods]
impl Key {
    #[new]
    #[pyo3(signature = (tonic, mode = "major"))]
    fn new(tonic: u8, mode: &str) -> PyResult<Self> {
        let mode = match mode {
            "major" => rules::Mode::Major,
            "minor" => rules::Mode::Minor,
            _ => return Err(PyValueError::new_err("mode must be \"major\" or \"minor\"")),
        };
        Ok(Key(rules::Key::new(tonic % 12, mode)))
    }

    #[getter]
    fn tonic(&self) -> u8 {
        self.0.tonic
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.0.mode {
            rules::Mode::Major => "major",
            rules::Mode::Minor => "minor",
        }
    }

    fn __repr__(&self) -> String {
        format!("Key({}, {:?})", self.0.tonic, self.mode())
    }
}

/// Compound-token matrix of one motif: 7 attributes per row, padded rows
/// after `valid_len`.
#[pyclass(module = "repetition", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Tokens(repetition_core::symbolic::TokenMatrix);

#[pymethods]
impl Tokens {
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<i64>>) -> PyResult<Self> {
        let n = rows.len();
        repetition_core::symbolic::TokenMatrix::from_raw(&rows, n).map(Tokens).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Tokens).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("token matrices serialize")
    }

    #[getter]
    fn valid_len(&self) -> usize {
        self.0.valid_len()
    }

    /// Valid rows only.
    fn rows(&self) -> Vec<Vec<u16>> {
        self.0.valid_rows().iter().map(|r| r.to_vec()).collect()
    }

    fn motif(&self) -> PyResult<Motif> {
        detokenize(&self.0).map(Motif).map_err(err)
    }

    /// Key inferred from the notes.
    fn key(&self) -> PyResult<Key> {
        motif_key(&self.0).map(Key).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Tokens(valid_len={})", self.0.valid_len())
    }
}

/// Trained model loaded from a checkpoint.
#[pyclass(module = "repetition", frozen)]
struct Model(ModelState);

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        checkpoint::load(&path).map(Model).map_err(err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        checkpoint::from_bytes(data).map(Model).map_err(err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &checkpoint::to_bytes(&self.0))
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.0.config.variant.as_str()
    }

    #[getter]
    fn step(&self) -> u64 {
        self.0.step
    }

    fn config_json(&self) -> String {
        serde_json::to_string(&self.0.config).expect("configs serialize")
    }

    /// Probability per repetition type, in StR, TrR, SuR, HoR, SyR order.
    fn classify(&self, tokens: &Tokens) -> PyResult<Vec<f64>> {
        self.0.classify(&tokens.0).map_err(err)
    }
}

/// `(label, detail)` for the relation between two motifs. The key defaults
/// to the one inferred from `a`.
#[pyfunction]
#[pyo3(signature = (a, b, key = None))]
fn classify(a: &Motif, b: &Motif, key: Option<&Key>) -> PyResult<(String, Option<String>)> {
    let key = match key {
        Some(k) => k.0,
        None => rules::infer_key_from_notes(a.0.notes()).map_err(err)?,
    };
    let l = Classifier::default().classify(&a.0, &b.0, &key).map_err(err)?;
    Ok((l.name().to_string(), l.detail()))
}

#[pyfunction]
fn classify_tokens_pair(a: &Tokens, b: &Tokens) -> PyResult<(String, Option<String>)> {
    let l = classify_tokens(&a.0, &b.0, &Classifier::default()).map_err(err)?;
    Ok((l.name().to_string(), l.detail()))
}

#[pyfunction]
fn lcs_similarity(a: Vec<u8>, b: Vec<u8>) -> f64 {
    rules::lcs_similarity(&a, &b)
}

/// Repetition weight per valid row and attribute for a target motif.
#[pyfunction]
fn repetition_weights(tokens: &Tokens, label_name: &str) -> PyResult<Vec<Vec<f64>>> {
    let l = label(label_name)?;
    let a = RepetitionLearningMatrix::compute(&tokens.0, l, &GammaSchedule::standard());
    Ok((0..tokens.0.valid_len())
        .map(|row| Attribute::ALL.iter().map(|&k| a.get(row, k)).collect())
        .collect())
}

/// Token matrices of every bar of a MIDI file.
#[pyfunction]
fn midi_bars(data: &[u8]) -> PyResult<Vec<Tokens>> {
    let song = Song::from_midi("input", data).map_err(err)?;
    song.motif_records()
        .map_err(err)?
        .iter()
        .map(|r| r.tokens().map(Tokens).map_err(err))
        .collect()
}

/// Generate a piece: the motif followed by one generated bar per label.
/// `t` applies to every TrR step. Returns `(bars, verdicts, midi_bytes)`.
#[pyfunction]
#[pyo3(signature = (motif, labels, model = None, seed = 0, t = None, chaining = true))]
fn generate<'py>(
    py: Python<'py>,
    motif: &Tokens,
    labels: Vec<String>,
    model: Option<&Model>,
    seed: u64,
    t: Option<i32>,
    chaining: bool,
) -> PyResult<(Vec<Tokens>, Vec<Option<(String, Option<String>)>>, Bound<'py, PyBytes>)> {
    let labels = labels.iter().map(|s| label(s)).collect::<PyResult<Vec<_>>>()?;
    let steps: Vec<Option<i32>> = labels.iter().map(|&l| if l == RepetitionType::TrR { t } else { None }).collect();
    let mut req = GenerationRequest::new(motif.0.clone(), labels);
    req.seed = seed;
    req.chaining = chaining;
    if t.is_some() {
        req.t = steps;
    }
    let state = model.map(|m| &m.0);
    let options = GenerationOptions {
        rules: state.is_none_or(|s| s.config.variant.uses_rules()),
        copy_without_model: true,
    };
    let piece = py.detach(|| generate_piece(&req, state, options)).map_err(err)?;
    let midi = render_midi(&piece).map_err(err)?;
    let bars = piece.motifs.iter().map(|m| Tokens(m.tokens.clone())).collect();
    let verdicts = piece
        .motifs
        .iter()
        .map(|m| m.verdict.as_ref().map(|v| (v.label.clone(), v.detail.clone())))
        .collect();
    Ok((bars, verdicts, PyBytes::new(py, &midi)))
}

#[pymodule]
fn repetition(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Motif>()?;
    m.add_class::<Key>()?;
    m.add_class::<Tokens>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(classify_tokens_pair, m)?)?;
    m.add_function(wrap_pyfunction!(lcs_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(repetition_weights, m)?)?;
    m.add_function(wrap_pyfunction!(midi_bars, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add("REPETITION_TYPES", RepetitionType::ALL.map(|l| l.as_str()).to_vec())?;
    Ok(())
}
