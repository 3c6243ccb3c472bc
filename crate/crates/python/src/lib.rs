//! Python bindings: build, query, save and load set-query structures.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use setlsh::ellipsoid::EuclideanEllipsoidQuery;
use setlsh::index::QueryOutcome;
use setlsh::lift;
use setlsh::metrics::{self, BitVector, Point, SetQuery, TokenSet};
use setlsh::selftest::{run_all, SelftestConfig};
use setlsh::structure::{
    BuildOptions, ElementKind, FamilyName, QueryInput, Record, SpecOptions, Structure,
};
use setlsh::{Error, Rational};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        e @ (Error::TableBudget { .. } | Error::StructureCap { .. }) => {
            PyRuntimeError::new_err(e.to_string())
        }
        e => PyValueError::new_err(e.to_string()),
    }
}

fn point(coords: Vec<f64>) -> PyResult<Point> {
    Point::new(coords).map_err(py_err)
}

fn element_kind(kind: &str) -> PyResult<ElementKind> {
    match kind {
        "dense" => Ok(ElementKind::Dense),
        "bits" => Ok(ElementKind::Bits),
        "tokens" => Ok(ElementKind::Tokens),
        _ => Err(PyValueError::new_err(format!(
            "unknown element kind `{kind}`"
        ))),
    }
}

/// Converts a Python list into records of one kind: float lists, bit strings or int lists.
fn records(
    data: &Bound<'_, PyAny>,
    kind: ElementKind,
    universe: Option<u64>,
) -> PyResult<(Vec<Record>, u64)> {
    match kind {
        ElementKind::Dense => {
            let rows: Vec<Vec<f64>> = data.extract()?;
            let dim = rows.first().map_or(0, Vec::len) as u64;
            let recs = rows
                .into_iter()
                .map(|r| point(r).map(Record::Dense))
                .collect::<PyResult<_>>()?;
            Ok((recs, dim))
        }
        ElementKind::Bits => {
            let rows: Vec<String> = data.extract()?;
            let dim = rows.first().map_or(0, String::len) as u64;
            let recs = rows
                .iter()
                .map(|r| BitVector::parse(r).map(Record::Bits).map_err(py_err))
                .collect::<PyResult<_>>()?;
            Ok((recs, dim))
        }
        ElementKind::Tokens => {
            let rows: Vec<Vec<u64>> = data.extract()?;
            let u = universe.unwrap_or_else(|| rows.iter().flatten().max().map_or(1, |m| m + 1));
            let recs = rows
                .into_iter()
                .map(|r| TokenSet::new(r, u).map(Record::Tokens).map_err(py_err))
                .collect::<PyResult<_>>()?;
            Ok((recs, u))
        }
    }
}

/// A set-query LSH structure over dense vectors, bit strings or token sets.
#[pyclass(module = "pysetlsh")]
struct Index {
    inner: Structure,
    universe: u64,
}

impl Index {
    fn outcome<'py>(&self, py: Python<'py>, o: QueryOutcome) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        d.set_item("id", o.hit.map(|h| h.id))?;
        d.set_item("score", o.hit.map(|h| h.score))?;
        d.set_item("bar", self.inner.bar())?;
        d.set_item("tables_probed", o.stats.tables_probed)?;
        d.set_item("collisions", o.stats.collisions)?;
        d.set_item("inspected", o.stats.inspected)?;
        d.set_item("cap", o.stats.cap)?;
        Ok(d)
    }
}

#[pymethods]
impl Index {
    /// Builds a structure. `weights` are rational literals such as "1/2".
    #[staticmethod]
    #[pyo3(signature = (mode, data, threshold, c, *, family=None, kind="dense", universe=None,
        weights=None, phi=None, k=None, p=None, seed=0, delta_fail=0.05, max_tables=None))]
    #[allow(clippy::too_many_arguments)]
    fn build(
        mode: &str,
        data: &Bound<'_, PyAny>,
        threshold: &Bound<'_, PyAny>,
        c: f64,
        family: Option<&str>,
        kind: &str,
        universe: Option<u64>,
        weights: Option<Vec<String>>,
        phi: Option<f64>,
        k: Option<usize>,
        p: Option<usize>,
        seed: u64,
        delta_fail: f64,
        max_tables: Option<u64>,
    ) -> PyResult<Self> {
        let kind = element_kind(kind)?;
        let (recs, dim) = records(data, kind, universe)?;
        let weights = weights
            .map(|ws| {
                ws.iter()
                    .map(|w| w.parse::<Rational>())
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()
            .map_err(py_err)?;
        let opts = SpecOptions {
            mode: mode.parse().map_err(py_err)?,
            family: family
                .map(str::parse::<FamilyName>)
                .transpose()
                .map_err(py_err)?,
            threshold: threshold.str()?.to_string(),
            c,
            weights,
            phi,
            k,
            p,
        };
        let spec = opts.to_spec(kind, dim as usize).map_err(py_err)?;
        let mut build = BuildOptions {
            delta_fail,
            seed,
            ..BuildOptions::default()
        };
        if let Some(m) = max_tables {
            build.index.max_tables = m;
        }
        let inner = Structure::build(spec, recs, build).map_err(py_err)?;
        Ok(Index {
            inner,
            universe: dim,
        })
    }

    /// Answers a set-query given as a list of elements of the indexed kind.
    fn query<'py>(
        &self,
        py: Python<'py>,
        points: &Bound<'py, PyAny>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let kind = self
            .inner
            .records()
            .first()
            .map_or(ElementKind::Dense, Record::kind);
        let (recs, _) = records(points, kind, Some(self.universe))?;
        let q = SetQuery::new(recs).map_err(py_err)?;
        let o = self.inner.query(&QueryInput::Set(q)).map_err(py_err)?;
        self.outcome(py, o)
    }

    /// Answers an ellipsoid query; `axes` defaults to the standard basis.
    #[pyo3(signature = (center, axes=None))]
    fn query_ellipsoid<'py>(
        &self,
        py: Python<'py>,
        center: Vec<f64>,
        axes: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let dim = center.len();
        let axes = match axes {
            Some(a) => a.into_iter().map(point).collect::<PyResult<Vec<_>>>()?,
            None => (0..dim).map(|i| Point::basis(dim, i)).collect(),
        };
        let q = EuclideanEllipsoidQuery::new(point(center)?, axes).map_err(py_err)?;
        let o = self
            .inner
            .query(&QueryInput::Ellipsoid(q))
            .map_err(py_err)?;
        self.outcome(py, o)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = Structure::load(&path).map_err(py_err)?;
        let universe = match inner.records().first() {
            Some(Record::Tokens(t)) => t.universe(),
            Some(Record::Bits(b)) => b.len() as u64,
            Some(Record::Dense(p)) => p.dim() as u64,
            None => 0,
        };
        Ok(Index { inner, universe })
    }

    /// Score an answer must meet: at least this for similarities, at most for distances.
    #[getter]
    fn bar(&self) -> f64 {
        self.inner.bar()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.spec().name()
    }

    /// (K, L) of every materialized index.
    fn params(&self) -> Vec<(usize, usize)> {
        self.inner
            .index_params()
            .iter()
            .map(|p| (p.k, p.l))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Index(mode={}, n={})",
            self.inner.spec().name(),
            self.inner.len()
        )
    }
}

/// Angle between two non-zero vectors, in [0, pi].
#[pyfunction]
fn angle(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    metrics::angle(&point(x)?, &point(y)?).map_err(py_err)
}

/// Maps a point of the unit ball onto the unit sphere one dimension up.
#[pyfunction]
fn shrink_lift(x: Vec<f64>, eps: f64) -> PyResult<Vec<f64>> {
    Ok(lift::shrink_lift(&point(x)?, eps)
        .map_err(py_err)?
        .into_coords())
}

/// Runs the property suites; returns (name, passed, violations, allowed) per suite.
#[pyfunction]
#[pyo3(signature = (seed=2024, trials=20_000, samples=10_000))]
fn selftest(py: Python<'_>, seed: u64, trials: u64, samples: u64) -> Vec<(String, bool, u64, u64)> {
    let cfg = SelftestConfig {
        seed,
        trials,
        samples,
    };
    py.detach(|| run_all(&cfg))
        .into_iter()
        .map(|r| {
            let ok = r.passed();
            (r.name.to_string(), ok, r.violations, r.allowed)
        })
        .collect()
}

#[pymodule]
fn pysetlsh(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Index>()?;
    m.add_function(wrap_pyfunction!(angle, m)?)?;
    m.add_function(wrap_pyfunction!(shrink_lift, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
