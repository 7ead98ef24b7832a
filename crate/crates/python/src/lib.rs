//! Python bindings. Points are coordinate lists, partitions are lists of
//! step durations and fiber maps are nested lists of complex numbers.

use std::sync::Mutex;

use polyheat::oracle::{
    gauss_moment_check as moment_check, spectral_kernel as exact_kernel, spectral_trace as exact_trace,
};
use polyheat::propagator::{self, KernelMatrix};
use polyheat::{
    Bundle, Connection, Field, GeodesicPolygon, GridQuadrature, Manifold, Partition, Point, Potential, Section,
    SmallMat, StepKernelConfig, Variant, C64,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: polyheat::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_lists(m: &SmallMat) -> Vec<Vec<C64>> {
    (0..m.rank())
        .map(|i| (0..m.rank()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_lists(k: &KernelMatrix) -> Vec<Vec<f64>> {
    k.values.rows().into_iter().map(|r| r.to_vec()).collect()
}

#[pyclass(name = "Manifold", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyManifold {
    inner: Manifold,
}

impl PyManifold {
    fn point(&self, x: &[f64]) -> PyResult<Point> {
        self.inner.point(x).map_err(err)
    }
}

#[pymethods]
impl PyManifold {
    #[staticmethod]
    #[pyo3(signature = (radius = 1.0))]
    fn circle(radius: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Manifold::circle(radius).map_err(err)?,
        })
    }

    #[staticmethod]
    fn torus(periods: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: Manifold::torus(&periods).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (radius = 1.0))]
    fn sphere(radius: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Manifold::sphere(radius).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn injectivity_radius(&self) -> f64 {
        self.inner.injectivity_radius()
    }

    #[getter]
    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    fn distance(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.distance(&self.point(&x)?, &self.point(&y)?))
    }

    /// `exp_x(v)` with `v` in frame coordinates of `T_x`.
    fn exp_map(&self, x: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = self.point(&x)?;
        let tv = self.inner.tangent(&x, &v).map_err(err)?;
        let p = self.inner.exp_map(&x, &tv);
        Ok(p.coords[..self.coord_len()].to_vec())
    }

    /// `log_x(y)` in frame coordinates of `T_x`.
    fn log_map(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        let tv = self.inner.log_map(&self.point(&x)?, &self.point(&y)?).map_err(err)?;
        Ok(self.inner.tangent_coords(&tv)[..self.inner.dim()].to_vec())
    }

    fn volume_distortion(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner
            .volume_distortion(&self.point(&x)?, &self.point(&y)?)
            .map_err(err)
    }

    fn scalar_curvature(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.scalar_curvature(&self.point(&x)?))
    }

    /// Quadrature nodes and weights.
    fn grid(&self, n: usize) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
        let g = self.inner.make_grid(n).map_err(err)?;
        let k = self.coord_len();
        Ok((g.nodes.iter().map(|p| p.coords[..k].to_vec()).collect(), g.weights))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

impl PyManifold {
    fn coord_len(&self) -> usize {
        match self.inner {
            Manifold::Sphere { .. } => 3,
            _ => self.inner.dim(),
        }
    }
}

#[pyclass(name = "Bundle", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBundle {
    inner: Bundle,
}

#[pymethods]
impl PyBundle {
    #[new]
    #[pyo3(signature = (manifold, rank = 1, connection = "trivial", form = None, field = None, potential = "zero", value = 0.0, shift = 0.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        manifold: &PyManifold,
        rank: usize,
        connection: &str,
        form: Option<Vec<f64>>,
        field: Option<&str>,
        potential: &str,
        value: f64,
        shift: f64,
    ) -> PyResult<Self> {
        let form = form.unwrap_or_else(|| vec![0.0]);
        let conn = match connection {
            "trivial" => Connection::Trivial,
            "rotation" => Connection::rotation_form(&form, rank).map_err(err)?,
            "phase" => Connection::phase_form(&form, rank).map_err(err)?,
            "levi-civita" => Connection::LeviCivita,
            other => return Err(PyValueError::new_err(format!("unknown connection {other:?}"))),
        };
        let field = match field.unwrap_or(if connection == "phase" { "complex" } else { "real" }) {
            "real" => Field::Real,
            "complex" => Field::Complex,
            other => return Err(PyValueError::new_err(format!("unknown field {other:?}"))),
        };
        let pot = Potential::by_name(potential, value).map_err(err)?.with_shift(shift);
        Ok(Self {
            inner: Bundle::new(manifold.inner, rank, field, conn, pot).map_err(err)?,
        })
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank
    }

    #[getter]
    fn is_complex(&self) -> bool {
        self.inner.is_complex()
    }

    #[getter]
    fn manifold(&self) -> PyManifold {
        PyManifold {
            inner: self.inner.manifold,
        }
    }

    /// `V(x)`.
    fn potential_at(&self, x: Vec<f64>) -> PyResult<Vec<Vec<C64>>> {
        let p = self.inner.manifold.point(&x).map_err(err)?;
        Ok(to_lists(&self.inner.potential_at(&p)))
    }

    /// Holonomy around the closed polygon through `vertices` with the given step durations.
    fn holonomy(&self, vertices: Vec<Vec<f64>>, steps: Vec<f64>) -> PyResult<Vec<Vec<C64>>> {
        let m = self.inner.manifold;
        let verts = vertices
            .iter()
            .map(|v| m.point(v))
            .collect::<polyheat::Result<Vec<_>>>()
            .map_err(err)?;
        let g = GeodesicPolygon::new(m, Partition::new(steps).map_err(err)?, verts).map_err(err)?;
        Ok(to_lists(&self.inner.holonomy(&g).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "Bundle(manifold={}, rank={}, connection={}, potential={})",
            self.inner.manifold.name(),
            self.inner.rank,
            self.inner.connection.name(),
            self.inner.potential.name()
        )
    }
}

#[pyclass(name = "StepKernel", frozen)]
struct PyStepKernel {
    inner: StepKernelConfig,
}

impl PyStepKernel {
    fn grid(&self, n: usize) -> PyResult<GridQuadrature> {
        self.inner.manifold().make_grid(n).map_err(err)
    }
}

#[pymethods]
impl PyStepKernel {
    #[new]
    #[pyo3(signature = (bundle, variant = "v", quadrature_order = 4))]
    fn new(bundle: &PyBundle, variant: &str, quadrature_order: usize) -> PyResult<Self> {
        let v = Variant::parse(variant).map_err(err)?;
        let cfg = StepKernelConfig::new(bundle.inner.clone(), v)
            .with_quadrature_order(quadrature_order)
            .map_err(err)?;
        Ok(Self { inner: cfg })
    }

    #[getter]
    fn variant(&self) -> String {
        self.inner.variant.label()
    }

    #[getter]
    fn bundle(&self) -> PyBundle {
        PyBundle {
            inner: self.inner.bundle.clone(),
        }
    }

    /// Step kernel `E_y → E_x` for duration `t`.
    fn __call__(&self, t: f64, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<Vec<C64>>> {
        let m = self.inner.manifold();
        let (x, y) = (m.point(&x).map_err(err)?, m.point(&y).map_err(err)?);
        Ok(to_lists(&self.inner.try_step_kernel(t, &x, &y).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!("StepKernel({}, variant={})", self.bundle().__repr__(), self.variant())
    }
}

#[pyfunction]
fn uniform_partition(t: f64, r: usize) -> PyResult<Vec<f64>> {
    Ok(Partition::uniform(t, r).map_err(err)?.steps().to_vec())
}

/// Realified node-sampled `k_T` on an `n`-point grid.
#[pyfunction]
fn heat_kernel_matrix(py: Python<'_>, kernel: &PyStepKernel, steps: Vec<f64>, n: usize) -> PyResult<Vec<Vec<f64>>> {
    let grid = kernel.grid(n)?;
    let p = Partition::new(steps).map_err(err)?;
    let k = py
        .detach(|| propagator::heat_kernel_matrix(&kernel.inner, &p, &grid))
        .map_err(err)?;
    Ok(matrix_lists(&k))
}

#[pyfunction]
fn kernel_rows(
    py: Python<'_>,
    kernel: &PyStepKernel,
    steps: Vec<f64>,
    n: usize,
    sources: Vec<usize>,
) -> PyResult<Vec<Vec<f64>>> {
    let grid = kernel.grid(n)?;
    let p = Partition::new(steps).map_err(err)?;
    let rows = py
        .detach(|| propagator::kernel_rows(&kernel.inner, &p, &grid, &sources))
        .map_err(err)?;
    Ok(rows.rows().into_iter().map(|r| r.to_vec()).collect())
}

#[pyfunction]
fn trace_estimate(py: Python<'_>, kernel: &PyStepKernel, steps: Vec<f64>, n: usize) -> PyResult<f64> {
    let grid = kernel.grid(n)?;
    let p = Partition::new(steps).map_err(err)?;
    py.detach(|| propagator::trace_estimate(&kernel.inner, &p, &grid))
        .map_err(err)
}

fn fiber_value(v: &Bound<'_, PyAny>, rank: usize) -> PyResult<Vec<C64>> {
    if let Ok(z) = v.extract::<C64>() {
        return Ok(vec![z; rank]);
    }
    let vals: Vec<C64> = v.extract()?;
    if vals.len() != rank {
        return Err(PyValueError::new_err(format!(
            "section value has length {}, expected {rank}",
            vals.len()
        )));
    }
    Ok(vals)
}

/// `Ŵ_{t₁} ⋯ Ŵ_{t_r} u` at the grid nodes. `u(x)` returns a number (copied
/// into every component) or a list of `rank` numbers.
#[pyfunction]
fn compose_apply(
    py: Python<'_>,
    kernel: &PyStepKernel,
    steps: Vec<f64>,
    n: usize,
    u: Bound<'_, PyAny>,
) -> PyResult<Vec<Vec<C64>>> {
    let grid = kernel.grid(n)?;
    let b = &kernel.inner.bundle;
    let k = if matches!(b.manifold, Manifold::Sphere { .. }) {
        3
    } else {
        b.manifold.dim()
    };
    let mut values = Vec::with_capacity(grid.len());
    for p in &grid.nodes {
        values.push(fiber_value(&u.call1((p.coords[..k].to_vec(),))?, b.rank)?);
    }
    let next = std::cell::Cell::new(0);
    let sec = Section::from_fn(&grid, b, |_| {
        let i = next.get();
        next.set(i + 1);
        values[i].clone()
    })
    .map_err(err)?;
    let p = Partition::new(steps).map_err(err)?;
    let out = py
        .detach(|| propagator::compose_apply(&kernel.inner, &p, &sec, &grid))
        .map_err(err)?;
    Ok((0..out.node_count()).map(|i| out.value(i)).collect())
}

/// Monte Carlo over start-pinned polygons from `x0`.
#[pyfunction]
#[pyo3(signature = (kernel, steps, u, x0, paths, seed = 0))]
fn compose_apply_mc<'py>(
    py: Python<'py>,
    kernel: &PyStepKernel,
    steps: Vec<f64>,
    u: Py<PyAny>,
    x0: Vec<f64>,
    paths: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &kernel.inner;
    let m = *cfg.manifold();
    let x0 = m.point(&x0).map_err(err)?;
    let p = Partition::new(steps).map_err(err)?;
    let rank = cfg.rank();
    let k = if matches!(m, Manifold::Sphere { .. }) {
        3
    } else {
        m.dim()
    };
    let failure: Mutex<Option<PyErr>> = Mutex::new(None);
    let f = |x: &Point| -> Vec<C64> {
        Python::attach(|py| {
            let r = u
                .bind(py)
                .call1((x.coords[..k].to_vec(),))
                .and_then(|v| fiber_value(&v, rank));
            r.unwrap_or_else(|e| {
                failure.lock().expect("error slot").get_or_insert(e);
                vec![C64::new(0.0, 0.0); rank]
            })
        })
    };
    let est = py.detach(|| propagator::compose_apply_mc(cfg, &p, &f, x0, paths, seed));
    if let Some(e) = failure.into_inner().expect("error slot") {
        return Err(e);
    }
    let est = est.map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mean", est.mean)?;
    d.set_item("stderr", est.stderr)?;
    d.set_item("paths", est.paths)?;
    d.set_item("zero_weight_fraction", est.zero_weight_fraction)?;
    d.set_item("escape_probability", est.escape_probability)?;
    Ok(d)
}

/// `(max violation, max comparison value)` against `Δ + λ_min(V) − offset`.
#[pyfunction]
#[pyo3(signature = (kernel, steps, n, offset = 0.0))]
fn hsu_compare(py: Python<'_>, kernel: &PyStepKernel, steps: Vec<f64>, n: usize, offset: f64) -> PyResult<(f64, f64)> {
    let grid = kernel.grid(n)?;
    let p = Partition::new(steps).map_err(err)?;
    let b = &kernel.inner.bundle;
    let v = Potential::min_eigenvalue_of(&b.potential, b.rank, offset);
    let rep = py
        .detach(|| propagator::hsu_compare(&kernel.inner, &v, &p, &grid))
        .map_err(err)?;
    Ok((rep.max_violation, rep.max_comparison))
}

#[pyfunction]
fn spectral_kernel(manifold: &PyManifold, t: f64, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    Ok(exact_kernel(
        &manifold.inner,
        t,
        &manifold.point(&x)?,
        &manifold.point(&y)?,
    ))
}

#[pyfunction]
fn spectral_trace(manifold: &PyManifold, t: f64) -> f64 {
    exact_trace(&manifold.inner, t)
}

/// `(lhs, rhs, |lhs − rhs|)` of the Gaussian second-moment identity; `f(t, xi)`.
#[pyfunction]
fn gauss_moment_check(form: Vec<f64>, m: usize, f: Bound<'_, PyAny>, t: f64) -> PyResult<(f64, f64, f64)> {
    let failure = std::cell::RefCell::new(None);
    let g = |t: f64, xi: &[f64]| -> f64 {
        f.call1((t, xi.to_vec()))
            .and_then(|v| v.extract::<f64>())
            .unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                0.0
            })
    };
    let r = moment_check(&form, m, &g, t);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let r = r.map_err(err)?;
    Ok((r.lhs, r.rhs, r.diff))
}

#[pymodule]
#[pyo3(name = "polyheat")]
pub fn polyheat_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyManifold>()?;
    m.add_class::<PyBundle>()?;
    m.add_class::<PyStepKernel>()?;
    m.add_function(wrap_pyfunction!(uniform_partition, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_rows, m)?)?;
    m.add_function(wrap_pyfunction!(trace_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(compose_apply, m)?)?;
    m.add_function(wrap_pyfunction!(compose_apply_mc, m)?)?;
    m.add_function(wrap_pyfunction!(hsu_compare, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_trace, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_moment_check, m)?)?;
    Ok(())
}
