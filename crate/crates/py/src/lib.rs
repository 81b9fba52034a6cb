//! Python bindings over the core toolkit: text normalization and
//! tokenization, MER/CER/WER evaluation, the composite FAL score, and the
//! deterministic mock fidelity judge. Errors surface as ValueError for
//! usage/validation problems and OSError for I/O and backend failures.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use codemix::fal::{compute_fal as fal, FalConfig, FalWeights, FidelityScore, LatencyMode};
use codemix::metrics::{align_slices, evaluate_pair as eval_pair, EditCounts, UtteranceEntry};
use codemix::textnorm::{
    count_stats as script_counts, is_mixed_text, normalize_text as norm, tokenize as tok,
    NormConfig, VariantTable,
};

fn to_py_err(err: codemix::Error) -> PyErr {
    match err.exit_code() {
        2 => PyOSError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn norm_config(variant_tsv: Option<&str>) -> PyResult<NormConfig> {
    let mut cfg = NormConfig::default();
    if let Some(tsv) = variant_tsv {
        cfg.variant_table = Some(VariantTable::from_tsv(tsv).map_err(to_py_err)?);
    }
    Ok(cfg)
}

fn counts_dict<'py>(py: Python<'py>, c: &EditCounts) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("S", c.substitutions)?;
    d.set_item("I", c.insertions)?;
    d.set_item("D", c.deletions)?;
    d.set_item("N", c.reference_len)?;
    d.set_item("C", c.correct)?;
    Ok(d)
}

fn entry_dict<'py>(py: Python<'py>, entry: &UtteranceEntry) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mer", entry.mer)?;
    d.set_item("cer", entry.cer)?;
    d.set_item("wer", entry.wer)?;
    let counts = PyDict::new(py);
    counts.set_item("mer", counts_dict(py, &entry.counts.mer)?)?;
    counts.set_item("cer", counts_dict(py, &entry.counts.cer)?)?;
    counts.set_item("wer", counts_dict(py, &entry.counts.wer)?)?;
    d.set_item("counts", counts)?;
    if let Some(trace) = &entry.alignment {
        let ops = PyList::empty(py);
        for op in trace {
            let o = PyDict::new(py);
            o.set_item("op", &op.op)?;
            o.set_item("reference", op.reference.as_deref())?;
            o.set_item("hypothesis", op.hypothesis.as_deref())?;
            ops.append(o)?;
        }
        d.set_item("alignment", ops)?;
    }
    Ok(d)
}

/// Normalized form of `text` under the default pipeline (fullwidth folding,
/// lowercasing, punctuation stripping), optionally with a variant TSV.
#[pyfunction]
#[pyo3(signature = (text, variant_tsv=None))]
fn normalize_text(text: &str, variant_tsv: Option<&str>) -> PyResult<String> {
    Ok(norm(text, &norm_config(variant_tsv)?))
}

/// Mixed-script tokens as (text, kind) pairs; kind is one of "cjk_char",
/// "latin_word", "digit_run".
#[pyfunction]
#[pyo3(signature = (text, variant_tsv=None))]
fn tokenize(text: &str, variant_tsv: Option<&str>) -> PyResult<Vec<(String, String)>> {
    let seq = tok(text, &norm_config(variant_tsv)?);
    Ok(seq.tokens.into_iter().map(|t| (t.text, t.kind.to_string())).collect())
}

/// Script mix statistics: cjk_chars, latin_words, digit_runs, and the
/// CJK-to-Latin ratio (None when there are no Latin words).
#[pyfunction]
#[pyo3(signature = (text, variant_tsv=None))]
fn count_stats<'py>(py: Python<'py>, text: &str, variant_tsv: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let counts = script_counts(&tok(text, &norm_config(variant_tsv)?));
    let d = PyDict::new(py);
    d.set_item("cjk_chars", counts.cjk_chars)?;
    d.set_item("latin_words", counts.latin_words)?;
    d.set_item("digit_runs", counts.digit_runs)?;
    d.set_item("ratio_cjk_to_latin", counts.ratio_cjk_to_latin)?;
    Ok(d)
}

/// True when the text contains both CJK characters and Latin words.
#[pyfunction]
#[pyo3(signature = (text, variant_tsv=None))]
fn is_mixed(text: &str, variant_tsv: Option<&str>) -> PyResult<bool> {
    Ok(is_mixed_text(text, &norm_config(variant_tsv)?))
}

/// MER/CER/WER for one (reference, hypothesis) pair. Rates are None when
/// their reference basis is empty; never clamped above 1.
#[pyfunction]
#[pyo3(signature = (reference, hypothesis, variant_tsv=None, trace=false))]
fn evaluate_pair<'py>(
    py: Python<'py>,
    reference: &str,
    hypothesis: &str,
    variant_tsv: Option<&str>,
    trace: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mut entry = eval_pair(reference, hypothesis, &norm_config(variant_tsv)?);
    if !trace {
        entry.alignment = None;
    }
    entry_dict(py, &entry)
}

/// Minimal-edit alignment counts between two token lists (fewest deletions
/// among minimal-cost scripts).
#[pyfunction]
fn align<'py>(py: Python<'py>, reference: Vec<String>, hypothesis: Vec<String>) -> PyResult<Bound<'py, PyDict>> {
    let alignment = align_slices(&reference, &hypothesis);
    counts_dict(py, &alignment.counts)
}

/// Composite score from fidelity F, edit counts, and latency L. `mode` is
/// "paper" (published formula, grows with latency) or "corrected".
#[pyfunction]
#[pyo3(signature = (
    fidelity, latency_s, reference_len,
    substitutions=0, insertions=0, deletions=0,
    alpha=1.0/3.0, beta=1.0/3.0, gamma=1.0/3.0,
    max_latency=10.0, mode="paper",
))]
#[allow(clippy::too_many_arguments)]
fn compute_fal<'py>(
    py: Python<'py>,
    fidelity: f64,
    latency_s: f64,
    reference_len: usize,
    substitutions: usize,
    insertions: usize,
    deletions: usize,
    alpha: f64,
    beta: f64,
    gamma: f64,
    max_latency: f64,
    mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = match mode {
        "paper" => LatencyMode::Paper,
        "corrected" => LatencyMode::Corrected,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown latency mode {other:?}, expected \"paper\" or \"corrected\""
            )))
        }
    };
    if substitutions + deletions > reference_len {
        return Err(PyValueError::new_err(format!(
            "S + D ({}) cannot exceed the reference length {reference_len}",
            substitutions + deletions
        )));
    }
    let weights = FalWeights::new(alpha, beta, gamma).map_err(to_py_err)?;
    let cfg = FalConfig::new(weights, max_latency, mode).map_err(to_py_err)?;
    let counts = EditCounts {
        substitutions,
        insertions,
        deletions,
        reference_len,
        correct: reference_len - substitutions - deletions,
    };
    let score = FidelityScore::new(fidelity, "python", "").map_err(to_py_err)?;
    let result = fal(&score, &counts, latency_s, &cfg).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("total", result.total)?;
    d.set_item("fidelity_term", result.fidelity_term)?;
    d.set_item("accuracy_term", result.accuracy_term)?;
    d.set_item("latency_term", result.latency_term)?;
    Ok(d)
}

/// The deterministic mock judge's fidelity score: rounded token-multiset
/// overlap F1 on a 0-100 scale.
#[pyfunction]
fn mock_fidelity(reference: &str, hypothesis: &str) -> u8 {
    codemix::judge::overlap_fidelity(reference, hypothesis)
}

#[pymodule]
fn codemix_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(normalize_text, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(count_stats, m)?)?;
    m.add_function(wrap_pyfunction!(is_mixed, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_pair, m)?)?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(compute_fal, m)?)?;
    m.add_function(wrap_pyfunction!(mock_fidelity, m)?)?;
    Ok(())
}
