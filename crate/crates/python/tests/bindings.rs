use pyo3::prelude::*;
use pyo3::types::{IntoPyDict, PyDict, PyList};

fn with_module<F: FnOnce(&Bound<'_, PyModule>) -> PyResult<()>>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "fdal")?;
        fdal_py::register(&m)?;
        f(&m)
    })
    .unwrap();
}

#[test]
fn divergence_matches_core() {
    with_module(|m| {
        let js = m.getattr("Divergence")?.call1(("js_shifted",))?;
        let p: f64 = js.getattr("phi_prime_at_one")?.extract()?;
        assert!((p + 2f64.ln()).abs() < 1e-12);
        let c: f64 = js.getattr("shift_constant")?.extract()?;
        assert!((c + 2.0 * 2f64.ln()).abs() < 1e-12);
        let same: f64 = js.call_method1("between", (vec![0.3, 0.7], vec![0.3, 0.7]))?.extract()?;
        assert!(same.abs() < 1e-12);
        assert!(m.getattr("Divergence")?.call1(("nope",)).is_err());
        let cat = m.getattr("catalog")?.call0()?;
        assert!(cat.cast::<PyList>()?.len() >= 11);
        Ok(())
    });
}

#[test]
fn train_accepts_keyword_options() {
    with_module(|m| {
        let pair = m.getattr("make_rotated_moons")?.call((), Some(&[("n", 200)].into_py_dict(m.py())?))?;
        let (src, tgt): (Bound<PyAny>, Bound<PyAny>) = pair.extract()?;
        let kw = PyDict::new(m.py());
        kw.set_item("method", "dann")?;
        kw.set_item("epochs", 2)?;
        kw.set_item("g_hidden", vec![8])?;
        kw.set_item("nesterov", false)?;
        kw.set_item("lr", 0.05)?;
        let (_model, metrics): (Bound<PyAny>, Bound<PyAny>) = m.getattr("train")?.call((src.clone(), tgt), Some(&kw))?.extract()?;
        assert_eq!(metrics.call_method0("rows")?.cast::<PyList>()?.len(), 2);
        let reads: usize = metrics.getattr("label_reads_during_updates")?.extract()?;
        assert_eq!(reads, 0);
        let bad = PyDict::new(m.py());
        bad.set_item("no_such_option", 1)?;
        assert!(m.getattr("train")?.call((src.clone(), src), Some(&bad)).is_err());
        Ok(())
    });
}

#[test]
fn wilcoxon_small_case() {
    with_module(|m| {
        let (_, n, p, method): (f64, usize, f64, String) =
            m.getattr("wilcoxon_signed_rank")?.call1((vec![1.0, 2.0, 3.0],))?.extract()?;
        assert_eq!((n, method.as_str()), (3, "exact"));
        assert_eq!(p, 0.25);
        Ok(())
    });
}
