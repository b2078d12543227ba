//! Python bindings: scenarios, constraint sets, polygon enumeration, screen
//! profiles and the lattice check.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use polyprop::geometry::{BoundingBox, ConstraintSet, Vec2, Wall};
use polyprop::paths::{allocate_times, enumerate_paths, PathRule, PolygonalPath};
use polyprop::propagator::{free_kernel, IntensityProfile, PhysicalConstants};
use polyprop::run::{self, Subcommand};
use polyprop::scenario::{emit_scenario, parse_scenario, Scenario};
use polyprop::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(m) => PyIOError::new_err(m),
        Error::Parse { .. } | Error::Validation(_) | Error::InvalidArgument(_) | Error::ProfileMismatch(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn v(p: (f64, f64)) -> Vec2 {
    Vec2::new(p.0, p.1)
}

fn rule(name: &str) -> PyResult<PathRule> {
    PathRule::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown path rule {name:?}")))
}

/// Walls `(x1, y1, x2, y2, thickness)` inside a bounding box.
#[pyclass(name = "ConstraintSet", frozen)]
struct PyConstraintSet {
    inner: ConstraintSet,
}

#[pymethods]
impl PyConstraintSet {
    #[new]
    fn new(walls: Vec<(f64, f64, f64, f64, f64)>, bbox: (f64, f64, f64, f64)) -> Self {
        let walls = walls
            .into_iter()
            .enumerate()
            .map(|(i, (x1, y1, x2, y2, th))| Wall::new(format!("w{i}"), Vec2::new(x1, y1), Vec2::new(x2, y2), th))
            .collect();
        let bbox = BoundingBox::new(Vec2::new(bbox.0, bbox.1), Vec2::new(bbox.2, bbox.3));
        Self { inner: ConstraintSet::from_walls(walls, bbox) }
    }

    fn is_feasible(&self, q: (f64, f64)) -> bool {
        self.inner.is_feasible(&v(q), 0.0)
    }

    fn max_violation(&self, q: (f64, f64)) -> f64 {
        self.inner.max_violation(&v(q), 0.0)
    }

    fn segment_feasible(&self, p: (f64, f64), q: (f64, f64)) -> bool {
        self.inner.segment_feasible(&v(p), &v(q))
    }

    fn corners(&self) -> Vec<(f64, f64)> {
        self.inner.corners().iter().map(|c| (c.position.x, c.position.y)).collect()
    }

    fn n_constraints(&self) -> usize {
        self.inner.constraints().len()
    }
}

/// A polygonal extremal: vertices, corner indices, length and, once times
/// are allocated, segment durations and action.
#[pyclass(name = "Path", frozen, get_all)]
struct PyPath {
    vertices: Vec<(f64, f64)>,
    corners: Vec<usize>,
    segment_times: Vec<f64>,
    length: f64,
    action: f64,
}

impl From<&PolygonalPath> for PyPath {
    fn from(p: &PolygonalPath) -> Self {
        Self {
            vertices: p.vertices.iter().map(|q| (q.x, q.y)).collect(),
            corners: p.corners.clone(),
            segment_times: p.segment_times.clone(),
            length: p.length,
            action: p.action,
        }
    }
}

#[pymethods]
impl PyPath {
    fn __repr__(&self) -> String {
        format!("Path(corners={}, length={}, action={})", self.corners.len(), self.length, self.action)
    }
}

/// Timed polygons from `src` to `dst`, sorted by length. Returns an empty
/// list when the endpoints are not connected.
#[pyfunction]
#[pyo3(signature = (cs, src, dst, max_corners=2, total_time=1.0, mass=1.0, path_rule="taut"))]
fn polygonal_paths(
    cs: &PyConstraintSet,
    src: (f64, f64),
    dst: (f64, f64),
    max_corners: usize,
    total_time: f64,
    mass: f64,
    path_rule: &str,
) -> PyResult<Vec<PyPath>> {
    let paths = match enumerate_paths(&cs.inner, &v(src), &v(dst), max_corners, rule(path_rule)?) {
        Ok(p) => p,
        Err(Error::NoPath) => return Ok(Vec::new()),
        Err(e) => return Err(to_py(e)),
    };
    paths
        .iter()
        .map(|p| allocate_times(p, total_time, mass).map(|t| PyPath::from(&t)).map_err(to_py))
        .collect()
}

/// Free-particle kernel between two points of equal dimension.
#[pyfunction]
#[pyo3(signature = (x0, x, dt, mass=1.0, hbar=1.0))]
fn kernel(x0: Vec<f64>, x: Vec<f64>, dt: f64, mass: f64, hbar: f64) -> PyResult<Complex64> {
    if x0.len() != x.len() {
        return Err(PyValueError::new_err("points differ in dimension"));
    }
    let pc = PhysicalConstants::new(mass, hbar, dt).map_err(to_py)?;
    Ok(free_kernel(&pc, &x0, &x, dt))
}

/// Screen profile: coordinates, peak-normalised intensity, path counts and
/// shadow flags.
#[pyclass(name = "Profile", frozen, get_all)]
struct PyProfile {
    coords: Vec<f64>,
    intensity: Vec<f64>,
    n_paths: Vec<usize>,
    shadow: Vec<bool>,
}

impl From<IntensityProfile> for PyProfile {
    fn from(p: IntensityProfile) -> Self {
        Self { coords: p.coords, intensity: p.intensity, n_paths: p.n_paths, shadow: p.shadow }
    }
}

#[pymethods]
impl PyProfile {
    fn __len__(&self) -> usize {
        self.coords.len()
    }
}

/// A parsed scenario file.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_scenario(text).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Scenario::from_file(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_text(&self) -> String {
        emit_scenario(&self.inner)
    }

    fn constraint_set(&self) -> PyConstraintSet {
        PyConstraintSet { inner: self.inner.constraint_set() }
    }

    #[getter]
    fn source(&self) -> (f64, f64) {
        (self.inner.source.x, self.inner.source.y)
    }

    #[getter]
    fn n_bins(&self) -> usize {
        self.inner.screen.n_bins
    }

    /// Polygon-superposition profile.
    fn intensity(&self, py: Python<'_>) -> PyResult<PyProfile> {
        py.detach(|| run::polygon_profile(&self.inner)).map(PyProfile::from).map_err(to_py)
    }

    /// Lattice path-integral profile.
    fn oracle_intensity(&self, py: Python<'_>) -> PyResult<PyProfile> {
        py.detach(|| run::oracle_profile(&self.inner)).map(|r| PyProfile::from(r.profile)).map_err(to_py)
    }

    /// Correlation, maximum deviation and worst extremum offsets (bins)
    /// between the polygon and lattice profiles.
    fn compare(&self, py: Python<'_>) -> PyResult<(f64, f64, f64, f64)> {
        use polyprop::oracle::ExtremumKind;
        let rep = py
            .detach(|| {
                let p = run::polygon_profile(&self.inner)?;
                let l = run::oracle_profile(&self.inner)?;
                run::compare(&p, &l.profile)
            })
            .map_err(to_py)?;
        Ok((
            rep.correlation,
            rep.max_abs_deviation,
            rep.max_offset(ExtremumKind::Maximum),
            rep.max_offset(ExtremumKind::Minimum),
        ))
    }

    /// Trajectories as lists of `(t, x, y, vx, vy, flag)` samples.
    fn simulate(&self, py: Python<'_>) -> PyResult<Vec<Vec<(f64, f64, f64, f64, f64, &'static str)>>> {
        let res = py.detach(|| run::run_simulation(&self.inner)).map_err(to_py)?;
        Ok(res
            .trajectories
            .iter()
            .map(|tr| tr.samples.iter().map(|s| (s.t, s.q.x, s.q.y, s.v.x, s.v.y, s.flag.as_str())).collect())
            .collect())
    }

    /// Runs a subcommand and returns the files written.
    fn run(&self, py: Python<'_>, subcommand: &str, out_dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        let sub = Subcommand::parse(subcommand)
            .ok_or_else(|| PyValueError::new_err(format!("unknown subcommand {subcommand:?}")))?;
        py.detach(|| run::run(sub, &self.inner, &out_dir)).map(|a| a.files).map_err(to_py)
    }
}

#[pymodule]
fn polyprop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConstraintSet>()?;
    m.add_class::<PyPath>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(polygonal_paths, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    Ok(())
}
