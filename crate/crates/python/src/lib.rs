//! Python bindings: truncated modules, annulus representations and the
//! verification suites.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::collections::BTreeMap;
use virann::annulus::{standard_element, AnnulusElement, ElementDoc, FramingOptions};
use virann::evolve::OdeOptions;
use virann::field::{self, FieldPath, Interp, VectorField, DEFAULT_GRID, DEFAULT_GRIDTOL, DEFAULT_INWARD_TOL};
use virann::linalg::{CMat, C64};
use virann::rep::{self, SuiteConfig};
use virann::virmod::{self, ModuleData, ModuleParams, DEFAULT_NULLTOL};

fn py_err(e: virann::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn to_field(modes: &BTreeMap<i32, C64>) -> VectorField {
    let pairs: Vec<(i32, C64)> = modes.iter().map(|(&n, &a)| (n, a)).collect();
    VectorField::from_modes(&pairs)
}

fn from_field(x: &VectorField) -> BTreeMap<i32, C64> {
    x.modes().filter(|(_, a)| *a != C64::new(0.0, 0.0)).collect()
}

fn parse_interp(s: &str) -> PyResult<Interp> {
    match s {
        "constant" => Ok(Interp::Constant),
        "linear" => Ok(Interp::Linear),
        "cubic" => Ok(Interp::Cubic),
        _ => Err(PyValueError::new_err(format!("unknown interpolation '{s}'"))),
    }
}

/// Level-truncated unitary lowest-weight module with cutoff N.
#[pyclass(name = "Module", frozen)]
struct PyModuleData {
    inner: ModuleData,
}

impl PyModuleData {
    fn run(&self, e: &AnnulusElement, tol: f64) -> PyResult<Vec<Vec<C64>>> {
        let r = rep::represent(e, &self.inner, &OdeOptions::with_tol(tol)).map_err(py_err)?;
        Ok(rows(&r.u))
    }
}

#[pymethods]
impl PyModuleData {
    #[new]
    #[pyo3(signature = (c, h, n, nulltol = DEFAULT_NULLTOL))]
    fn new(c: f64, h: f64, n: usize, nulltol: f64) -> PyResult<Self> {
        Ok(PyModuleData { inner: ModuleData::build(ModuleParams::new(c, h, n), nulltol).map_err(py_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModuleData { inner: ModuleData::from_json(text).map_err(py_err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.params.c
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.params.h
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.params.n
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Level of each basis vector.
    fn levels(&self) -> Vec<usize> {
        self.inner.levels()
    }

    /// Dense L_n.
    fn lmat(&self, n: i32) -> PyResult<Vec<Vec<C64>>> {
        if n.unsigned_abs() as usize > self.inner.cutoff() {
            return Err(PyValueError::new_err(format!("mode {n} beyond cutoff {}", self.inner.cutoff())));
        }
        Ok(rows(&self.inner.lmat(n)))
    }

    /// Dense π(X) for X given as {n: a_n}.
    fn pi(&self, field: BTreeMap<i32, C64>) -> PyResult<Vec<Vec<C64>>> {
        Ok(rows(&field::pi_field(&to_field(&field), &self.inner).map_err(py_err)?))
    }

    /// π(q^{ℓ₀}).
    #[pyo3(signature = (q, tol = 1e-10))]
    fn standard(&self, q: C64, tol: f64) -> PyResult<Vec<Vec<C64>>> {
        self.run(&standard_element(q).map_err(py_err)?, tol)
    }

    /// π of the element generated by a field path, times the scalar z.
    #[pyo3(signature = (knots, fields, interp = "linear", z = C64::new(1.0, 0.0), tol = 1e-10))]
    fn represent_path(&self, knots: Vec<f64>, fields: Vec<BTreeMap<i32, C64>>, interp: &str, z: C64, tol: f64) -> PyResult<Vec<Vec<C64>>> {
        let path = FieldPath::new(knots, fields.iter().map(to_field).collect(), parse_interp(interp)?).map_err(py_err)?;
        self.run(&AnnulusElement::from_path(path, z), tol)
    }

    /// π of an element given in the element file format (framing or path).
    #[pyo3(signature = (text, tol = 1e-10))]
    fn represent_json(&self, text: &str, tol: f64) -> PyResult<Vec<Vec<C64>>> {
        let doc = ElementDoc::from_json(text).map_err(py_err)?;
        self.run(&doc.into_element(&FramingOptions::default()).map_err(py_err)?, tol)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner.params;
        format!("Module(c={}, h={}, N={}, dim={})", p.c, p.h, p.n, self.inner.dim())
    }
}

/// Gram matrix of one level in the partition basis.
#[pyfunction]
fn gram(c: f64, h: f64, level: usize) -> Vec<Vec<f64>> {
    virmod::gram_matrix(c, h, level)
}

#[pyfunction]
fn witt_bracket(x: BTreeMap<i32, C64>, y: BTreeMap<i32, C64>) -> BTreeMap<i32, C64> {
    from_field(&field::witt_bracket(&to_field(&x), &to_field(&y)))
}

#[pyfunction]
fn cocycle(x: BTreeMap<i32, C64>, y: BTreeMap<i32, C64>, c: f64) -> C64 {
    field::cocycle(&to_field(&x), &to_field(&y), c)
}

/// μ_X with π(X) ≤ μ_X; raises for fields that are not inward.
#[pyfunction]
fn qei_bound(x: BTreeMap<i32, C64>, c: f64) -> PyResult<f64> {
    field::qei_bound(&to_field(&x), c, DEFAULT_GRID, DEFAULT_GRIDTOL, DEFAULT_INWARD_TOL).map_err(py_err)
}

/// (partial sums of ‖e^{wL₋₁}v‖², closed form (1 − |w|²)^{−2h}).
#[pyfunction]
fn mobius_overlap(c: f64, h: f64, w: f64, nmax: usize) -> (Vec<f64>, f64) {
    let o = rep::mobius_overlap(c, h, w, nmax);
    (o.partial_sums, o.target)
}

/// Runs the suites of a JSON config and returns the report as JSON.
#[pyfunction]
fn verify(config: &str) -> PyResult<String> {
    let cfg = SuiteConfig::from_json(config).map_err(py_err)?;
    Ok(rep::run_config(&cfg).map_err(py_err)?.to_json())
}

#[pymodule]
fn pyvirann(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModuleData>()?;
    m.add_function(wrap_pyfunction!(gram, m)?)?;
    m.add_function(wrap_pyfunction!(witt_bracket, m)?)?;
    m.add_function(wrap_pyfunction!(cocycle, m)?)?;
    m.add_function(wrap_pyfunction!(qei_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mobius_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("SIGN_CONVENTION", rep::SIGN_CONVENTION)?;
    Ok(())
}
