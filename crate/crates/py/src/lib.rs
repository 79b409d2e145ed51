use gfen::admm::{fit_map, AdmmOptions, NodeLoss, PenaltyConfig, GFL_RIDGE};
use gfen::tree::BinomialData;
use gfen::{DensityModel, DyadicTree, EdgeKind, GfenError, Query, SplitField, TreeConfig};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: GfenError) -> PyErr {
    match e {
        GfenError::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        GfenError::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn edge_kind(s: &str) -> PyResult<EdgeKind> {
    match s {
        "spatial" => Ok(EdgeKind::Spatial),
        "temporal" => Ok(EdgeKind::Temporal),
        _ => Err(PyValueError::new_err(format!("unknown edge kind {s:?}"))),
    }
}

/// Undirected graph whose edges are tagged `"spatial"` or `"temporal"`.
#[pyclass(name = "EdgeGraph", frozen)]
struct PyEdgeGraph {
    inner: gfen::EdgeGraph,
}

#[pymethods]
impl PyEdgeGraph {
    #[new]
    fn new(n_vertices: usize, edges: Vec<(usize, usize, String)>) -> PyResult<Self> {
        let edges = edges
            .into_iter()
            .map(|(a, b, k)| Ok((a, b, edge_kind(&k)?)))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: gfen::EdgeGraph::new(n_vertices, edges).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, kind = "spatial"))]
    fn chain(n: usize, kind: &str) -> PyResult<Self> {
        Ok(Self {
            inner: gfen::EdgeGraph::chain(n, edge_kind(kind)?),
        })
    }

    /// Locations-by-times grid; vertex `s * n_times + t`.
    #[staticmethod]
    #[pyo3(signature = (n_locations, n_times, cyclic = false))]
    fn grid(n_locations: usize, n_times: usize, cyclic: bool) -> PyResult<Self> {
        let mut edges = Vec::new();
        for s in 0..n_locations {
            for t in 0..n_times {
                let v = s * n_times + t;
                if t + 1 < n_times {
                    edges.push((v, v + 1, EdgeKind::Temporal));
                }
                if s + 1 < n_locations {
                    edges.push((v, v + n_times, EdgeKind::Spatial));
                }
            }
            if cyclic && n_times > 2 {
                edges.push((s * n_times + n_times - 1, s * n_times, EdgeKind::Temporal));
            }
        }
        Ok(Self {
            inner: gfen::EdgeGraph::new(n_locations * n_times, edges).map_err(py_err)?,
        })
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.edges().len()
    }

    #[getter]
    fn n_trails(&self) -> usize {
        self.inner.trails().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "EdgeGraph(n_vertices={}, n_edges={})",
            self.inner.n_vertices(),
            self.inner.edges().len()
        )
    }
}

/// Elastic-net penalties for spatial and temporal edges.
#[pyclass(name = "Penalties", frozen)]
struct PyPenalties {
    inner: PenaltyConfig,
}

#[pymethods]
impl PyPenalties {
    #[new]
    #[pyo3(signature = (spatial_l1 = 0.0, spatial_l2 = 0.0, temporal_l1 = 0.0, temporal_l2 = 0.0))]
    fn new(spatial_l1: f64, spatial_l2: f64, temporal_l1: f64, temporal_l2: f64) -> PyResult<Self> {
        let inner = PenaltyConfig::new(spatial_l1, spatial_l2, temporal_l1, temporal_l2);
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_list(&self) -> [f64; 4] {
        self.inner.to_array()
    }

    fn __repr__(&self) -> String {
        let [a, b, c, d] = self.inner.to_array();
        format!("Penalties({a}, {b}, {c}, {d})")
    }
}

#[pyclass(name = "FitResult", frozen, get_all)]
struct PyFitResult {
    beta: Vec<f64>,
    converged: bool,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
}

#[pymethods]
impl PyFitResult {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(converged={}, iterations={})",
            self.converged, self.iterations
        )
    }
}

fn options(tol: f64, max_iter: usize, penalties: &PenaltyConfig) -> AdmmOptions {
    let mut o = AdmmOptions {
        tol,
        max_iter,
        ..AdmmOptions::default()
    };
    if !penalties.has_l2() {
        o.ridge = o.ridge.max(GFL_RIDGE);
    }
    o
}

fn run(
    py: Python<'_>,
    loss: NodeLoss,
    graph: &PyEdgeGraph,
    penalties: &PyPenalties,
    tol: f64,
    max_iter: usize,
) -> PyResult<PyFitResult> {
    let opts = options(tol, max_iter, &penalties.inner);
    let r = py
        .detach(|| fit_map(&loss, &graph.inner, &penalties.inner, &opts))
        .map_err(py_err)?;
    Ok(PyFitResult {
        beta: r.field.beta,
        converged: r.converged,
        iterations: r.iterations,
        primal_residual: r.primal_residual,
        dual_residual: r.dual_residual,
    })
}

/// MAP field for Gaussian node data; `None` marks a vertex without data.
#[pyfunction]
#[pyo3(signature = (y, graph, penalties, tol = 1e-6, max_iter = 20000))]
fn fit_gaussian(
    py: Python<'_>,
    y: Vec<Option<f64>>,
    graph: &PyEdgeGraph,
    penalties: &PyPenalties,
    tol: f64,
    max_iter: usize,
) -> PyResult<PyFitResult> {
    run(py, NodeLoss::gaussian(&y), graph, penalties, tol, max_iter)
}

/// MAP logit field for per-vertex binomial counts.
#[pyfunction]
#[pyo3(signature = (attempts, successes, graph, penalties, tol = 1e-6, max_iter = 20000))]
fn fit_binomial(
    py: Python<'_>,
    attempts: Vec<f64>,
    successes: Vec<f64>,
    graph: &PyEdgeGraph,
    penalties: &PyPenalties,
    tol: f64,
    max_iter: usize,
) -> PyResult<PyFitResult> {
    if attempts.len() != successes.len() {
        return Err(PyValueError::new_err(
            "attempts and successes differ in length",
        ));
    }
    run(
        py,
        NodeLoss::Binomial(BinomialData {
            attempts,
            successes,
        }),
        graph,
        penalties,
        tol,
        max_iter,
    )
}

#[pyfunction]
fn tv1_prox(y: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    if !(lam >= 0.0) {
        return Err(PyValueError::new_err("lam must be non-negative"));
    }
    Ok(gfen::tv::tv1_prox(&y, lam))
}

#[pyfunction]
fn tv2_prox(y: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    if !(lam >= 0.0) {
        return Err(PyValueError::new_err("lam must be non-negative"));
    }
    Ok(gfen::tv::tv2_prox(&y, lam))
}

/// Dyadic split tree over the observation range.
#[pyclass(name = "DyadicTree", frozen)]
struct PyDyadicTree {
    inner: DyadicTree,
}

#[pymethods]
impl PyDyadicTree {
    /// Quantile tree with `depth` balanced levels and optional tail splits.
    #[staticmethod]
    #[pyo3(signature = (samples, depth = 3, left_tail_splits = 0, right_tail_splits = 0))]
    fn build(
        samples: Vec<f64>,
        depth: usize,
        left_tail_splits: usize,
        right_tail_splits: usize,
    ) -> PyResult<Self> {
        let cfg = TreeConfig {
            depth,
            left_tail_splits,
            right_tail_splits,
            ..TreeConfig::default()
        };
        let b = gfen::build_quantile_tree(&samples, &cfg).map_err(py_err)?;
        Ok(Self { inner: b.tree })
    }

    #[staticmethod]
    fn read_json(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: DyadicTree::read_json(&path).map_err(py_err)?,
        })
    }

    fn write_json(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.write_json(&path).map_err(py_err)
    }

    #[getter]
    fn n_splits(&self) -> usize {
        self.inner.n_splits()
    }

    #[getter]
    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }

    /// Leaf intervals as `(lo, hi)` pairs.
    fn leaves(&self) -> Vec<(f64, f64)> {
        self.inner.leaves().iter().map(|l| (l.lo, l.hi)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "DyadicTree(n_splits={}, n_leaves={})",
            self.inner.n_splits(),
            self.inner.n_leaves()
        )
    }
}

/// Per-vertex piecewise-constant density over the tree leaves.
#[pyclass(name = "DensityModel", frozen)]
struct PyDensityModel {
    inner: DensityModel,
}

#[pymethods]
impl PyDensityModel {
    /// Bin `observations[v]` into the tree, fit every split, and rebuild the densities.
    /// Raises `ArithmeticError` if a split fails to converge.
    #[staticmethod]
    #[pyo3(signature = (graph, tree, observations, penalties, tol = 1e-5, max_iter = 20000))]
    fn fit(
        py: Python<'_>,
        graph: &PyEdgeGraph,
        tree: &PyDyadicTree,
        observations: Vec<Vec<f64>>,
        penalties: &PyPenalties,
        tol: f64,
        max_iter: usize,
    ) -> PyResult<Self> {
        if observations.len() != graph.inner.n_vertices() {
            return Err(PyValueError::new_err(
                "need one observation list per vertex",
            ));
        }
        let opts = options(tol, max_iter, &penalties.inner);
        let model = py.detach(|| -> gfen::Result<DensityModel> {
            let counts = gfen::bin_observations(&tree.inner, &observations)?;
            let mut fields = Vec::with_capacity(counts.n_splits());
            for s in 0..counts.n_splits() {
                let r = fit_map(
                    &NodeLoss::Binomial(counts.split(s)),
                    &graph.inner,
                    &penalties.inner,
                    &opts,
                )?;
                if !r.converged {
                    return Err(GfenError::Numerical(format!("split {s} did not converge")));
                }
                fields.push(r.field);
            }
            gfen::reconstruct_density(&tree.inner, &fields)
        });
        Ok(Self {
            inner: model.map_err(py_err)?,
        })
    }

    /// Densities from explicit per-split logit fields, `betas[split][vertex]`.
    #[staticmethod]
    fn from_fields(tree: &PyDyadicTree, betas: Vec<Vec<f64>>) -> PyResult<Self> {
        let fields: Vec<SplitField> = betas.into_iter().map(SplitField::new).collect();
        Ok(Self {
            inner: gfen::reconstruct_density(&tree.inner, &fields).map_err(py_err)?,
        })
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    fn masses(&self, vertex: usize) -> PyResult<Vec<f64>> {
        self.check(vertex)?;
        Ok(self.inner.masses(vertex).to_vec())
    }

    fn tail_probability(&self, vertex: usize, threshold: f64) -> PyResult<f64> {
        self.eval(vertex, Query::TailProbability(threshold))
    }

    fn quantile(&self, vertex: usize, alpha: f64) -> PyResult<f64> {
        self.eval(vertex, Query::Quantile(alpha))
    }

    fn iqr(&self, vertex: usize) -> PyResult<f64> {
        self.eval(vertex, Query::Iqr)
    }

    fn mean(&self, vertex: usize) -> PyResult<f64> {
        self.eval(vertex, Query::Mean)
    }

    fn pdf(&self, vertex: usize, y: f64) -> PyResult<f64> {
        self.check(vertex)?;
        Ok(self.inner.at(vertex).pdf(y))
    }

    fn write_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.write_csv_file(&path).map_err(py_err)
    }
}

impl PyDensityModel {
    fn check(&self, vertex: usize) -> PyResult<()> {
        if vertex >= self.inner.n_vertices() {
            return Err(PyValueError::new_err(format!(
                "vertex {vertex} out of range"
            )));
        }
        Ok(())
    }

    fn eval(&self, vertex: usize, q: Query) -> PyResult<f64> {
        self.check(vertex)?;
        self.inner.query(vertex, q).map_err(py_err)
    }
}

#[pymodule]
fn gfen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEdgeGraph>()?;
    m.add_class::<PyPenalties>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PyDyadicTree>()?;
    m.add_class::<PyDensityModel>()?;
    m.add_function(wrap_pyfunction!(fit_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(fit_binomial, m)?)?;
    m.add_function(wrap_pyfunction!(tv1_prox, m)?)?;
    m.add_function(wrap_pyfunction!(tv2_prox, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
