//! Python bindings for the main types and operations: Novikov arithmetic,
//! stratum enumeration, flow-category generation, validation, and the
//! exact equation checks.

use a2flow::flowcat::{validate, FlowCat2};
use a2flow::flowio;
use a2flow::gen::{generate, mutate_drop_endpoint, GenSpec};
use a2flow::linearize::{
    bifunctor_identity_check, check_a2, check_a_infty, check_fiber_compat_linear, extract_all,
};
use a2flow::novikov::{Energy, EnergyCap, NovElem};
use a2flow::shapes::{enum_desc, Shape};
use a2flow::trees::{enum_k, fvector, KTree};
use a2flow::wpoly::{coppice_text, enum_fiber, enum_w};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn parse_cap(s: &str) -> PyResult<EnergyCap> {
    if s == "unbounded" {
        return Ok(EnergyCap::Unbounded);
    }
    s.parse::<Energy>()
        .map(EnergyCap::Bounded)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Element of the Novikov field with mod-2 coefficients and exact rational
/// exponents.
#[pyclass(name = "NovElem", skip_from_py_object)]
#[derive(Clone)]
struct PyNovElem {
    inner: NovElem,
}

#[pymethods]
impl PyNovElem {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyNovElem {
            inner: text.parse().map_err(|e: a2flow::novikov::ParseNovError| {
                PyValueError::new_err(e.to_string())
            })?,
        })
    }

    #[staticmethod]
    fn count(energies: Vec<String>) -> PyResult<Self> {
        let es: Result<Vec<Energy>, _> = energies.iter().map(|e| e.parse::<Energy>()).collect();
        let es = es.map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyNovElem {
            inner: a2flow::novikov::nov_count(es),
        })
    }

    fn add(&self, other: &PyNovElem) -> PyNovElem {
        PyNovElem {
            inner: self.inner.add(&other.inner),
        }
    }

    fn mul(&self, other: &PyNovElem, cap: &str) -> PyResult<PyNovElem> {
        Ok(PyNovElem {
            inner: self.inner.mul(&other.inner, parse_cap(cap)?),
        })
    }

    fn truncate(&self, cap: &str) -> PyResult<PyNovElem> {
        Ok(PyNovElem {
            inner: self.inner.truncate(parse_cap(cap)?),
        })
    }

    fn valuation(&self) -> Option<String> {
        self.inner.valuation().map(|v| v.to_string())
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("NovElem({:?})", self.inner.to_string())
    }

    fn __eq__(&self, other: &PyNovElem) -> bool {
        self.inner == other.inner
    }
}

/// A desk-scale flow category with stored 0- and 1-dimensional moduli.
#[pyclass(name = "FlowCategory")]
struct PyFlowCategory {
    inner: FlowCat2,
}

#[pymethods]
impl PyFlowCategory {
    /// Builds a corpus instance: trivial, square_zero, assoc_z2,
    /// assoc_idempotent, or strict_2cat.
    #[staticmethod]
    #[pyo3(signature = (family, seed = 0, cap = "3", epsilon = "1"))]
    fn generate(family: &str, seed: u64, cap: &str, epsilon: &str) -> PyResult<Self> {
        let spec = match family {
            "trivial" => GenSpec::Trivial,
            "square_zero" => GenSpec::SquareZero {
                dim: 2 + (seed as usize % 7),
                seed,
            },
            "assoc_z2" => GenSpec::AssocZ2,
            "assoc_idempotent" => GenSpec::AssocIdempotent,
            "strict_2cat" => GenSpec::Strict2Cat,
            _ => return Err(PyValueError::new_err(format!("unknown family {family:?}"))),
        };
        let eps: Energy = epsilon
            .parse()
            .map_err(|e: a2flow::rat::ParseRatError| PyValueError::new_err(e.to_string()))?;
        generate(&spec, parse_cap(cap)?, eps)
            .map(|inner| PyFlowCategory { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn loads(text: &str) -> PyResult<Self> {
        flowio::load(text)
            .map(|inner| PyFlowCategory { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn dumps(&self) -> String {
        flowio::save(&self.inner)
    }

    /// Violation strings; empty means the category is valid.
    fn validate(&self) -> Vec<String> {
        validate(&self.inner)
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    /// Extracted linear operations as printable strings.
    fn operations(&self) -> Vec<String> {
        let fam = extract_all(&self.inner);
        let mut out = Vec::new();
        for (l, t) in &fam.tensors {
            for (ev, v) in &t.entries {
                let ins: Vec<&str> = ev
                    .alpha
                    .iter()
                    .flatten()
                    .flatten()
                    .map(|&g| fam.sig.name(g))
                    .collect();
                let outs: Vec<&str> = ev.beta.iter().map(|&g| fam.sig.name(g)).collect();
                out.push(format!(
                    "mu {} ({}) -> ({}) = {}",
                    a2flow::flowcat::collection_text(&fam.cat, l),
                    ins.join(","),
                    outs.join(","),
                    v
                ));
            }
        }
        out
    }

    /// Residual report lines for the width-1 equations.
    fn check_a_infinity(&self) -> PyResult<Vec<String>> {
        let fam = extract_all(&self.inner);
        let n_max = self.inner.bounds.mass_max.first().copied().unwrap_or(0);
        check_a_infty(&fam, n_max)
            .map(|rs| rs.iter().map(|r| r.render(&fam.cat, &fam.sig)).collect())
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Residual report lines for the full equations within the stored
    /// bounds.
    fn check_a2(&self) -> PyResult<Vec<String>> {
        let fam = extract_all(&self.inner);
        check_a2(&fam, &self.inner.bounds)
            .map(|rs| rs.iter().map(|r| r.render(&fam.cat, &fam.sig)).collect())
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Whether the stacked tensors factor blockwise at the given width.
    fn check_compat(&self, r_c: usize) -> bool {
        check_fiber_compat_linear(&extract_all(&self.inner), r_c).ok()
    }

    fn check_bifunctor(&self) -> PyResult<Vec<String>> {
        let fam = extract_all(&self.inner);
        bifunctor_identity_check(&fam)
            .map(|rs| rs.iter().map(|r| r.render(&fam.cat, &fam.sig)).collect())
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn product_extend(&self, r_c: usize) -> PyResult<Self> {
        a2flow::flowcat::product_extend(&self.inner, r_c)
            .map(|inner| PyFlowCategory { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn drop_endpoint(&self, seed: u64) -> PyResult<Self> {
        mutate_drop_endpoint(&self.inner, seed)
            .map(|inner| PyFlowCategory { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn point_count(&self) -> usize {
        self.inner.points.len()
    }

    fn edge_count(&self) -> usize {
        self.inner.edges.len()
    }
}

/// f-vector of the associahedron K_r, counts by dimension from 0 up.
#[pyfunction]
fn k_fvector(r: usize) -> PyResult<Vec<usize>> {
    if r < 1 {
        return Err(PyValueError::new_err("r must be at least 1"));
    }
    Ok(fvector(enum_k(r).iter().map(KTree::dim)))
}

/// f-vector of the 2-associahedron for one row of point counts.
#[pyfunction]
#[pyo3(signature = (n, stable_only = false))]
fn w_fvector(n: Vec<u32>, stable_only: bool) -> PyResult<Vec<usize>> {
    if n.is_empty() {
        return Err(PyValueError::new_err("n must be nonempty"));
    }
    Ok(fvector(enum_w(&n, stable_only).iter().map(|c| c.dim())))
}

/// f-vector of a fiber product of 2-associahedra; rows are the blocks.
#[pyfunction]
fn fiber_fvector(rows: Vec<Vec<u32>>) -> PyResult<Vec<usize>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(PyValueError::new_err("shape must be nonempty"));
    }
    Ok(enum_fiber(&Shape::new(rows)).fvector())
}

/// Strata of a fiber product as text lines with dimensions.
#[pyfunction]
fn fiber_strata(rows: Vec<Vec<u32>>) -> PyResult<Vec<String>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(PyValueError::new_err("shape must be nonempty"));
    }
    let poset = enum_fiber(&Shape::new(rows));
    Ok(poset
        .strata
        .iter()
        .zip(&poset.dims)
        .map(|(c, d)| format!("dim {} {}", d, coppice_text(c)))
        .collect())
}

/// Boundary decomposition descriptors of a shape, as text.
#[pyfunction]
fn descriptors(rows: Vec<Vec<u32>>, cap: &str, epsilon: &str) -> PyResult<Vec<String>> {
    let eps: Energy = epsilon
        .parse()
        .map_err(|e: a2flow::rat::ParseRatError| PyValueError::new_err(e.to_string()))?;
    enum_desc(&Shape::new(rows), parse_cap(cap)?, eps)
        .map(|ds| ds.iter().map(|d| d.to_string()).collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// DOT rendering of a fiber-product face poset.
#[pyfunction]
fn export_dot(rows: Vec<Vec<u32>>) -> PyResult<String> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(PyValueError::new_err("shape must be nonempty"));
    }
    Ok(enum_fiber(&Shape::new(rows)).to_dot())
}

#[pymodule]
fn a2flow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNovElem>()?;
    m.add_class::<PyFlowCategory>()?;
    m.add_function(wrap_pyfunction!(k_fvector, m)?)?;
    m.add_function(wrap_pyfunction!(w_fvector, m)?)?;
    m.add_function(wrap_pyfunction!(fiber_fvector, m)?)?;
    m.add_function(wrap_pyfunction!(fiber_strata, m)?)?;
    m.add_function(wrap_pyfunction!(descriptors, m)?)?;
    m.add_function(wrap_pyfunction!(export_dot, m)?)?;
    Ok(())
}
