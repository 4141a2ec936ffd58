use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use steadychain::experiments::{Experiment, ExperimentConfig};
use steadychain::liouvillian::total_liouvillian;
use steadychain::{metrics, operators, solvers};

fn err(e: steadychain::Error) -> PyErr {
    match e {
        steadychain::Error::Config(_) | steadychain::Error::InvalidSpec(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

#[pyclass(name = "ChainSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyChainSpec(steadychain::ChainSpec);

#[pymethods]
impl PyChainSpec {
    #[new]
    #[pyo3(signature = (n, j = 1000.0))]
    fn new(n: usize, j: f64) -> PyResult<Self> {
        steadychain::ChainSpec::new(n, j).map(Self).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn j(&self) -> f64 {
        self.0.j
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn mode_frequency(&self, k: usize) -> PyResult<f64> {
        self.0.check_mode(k).map_err(err)?;
        Ok(self.0.mode_frequency(k))
    }

    /// Amplitudes of `f_k^dag |0>` on each site.
    fn target_amplitudes(&self, k: usize) -> PyResult<Vec<f64>> {
        self.0.check_mode(k).map_err(err)?;
        Ok((1..=self.0.n).map(|j| self.0.mode_amplitude(j, k)).collect())
    }

    fn __repr__(&self) -> String {
        format!("ChainSpec(n={}, j={})", self.0.n, self.0.j)
    }
}

#[pyclass(name = "NoiseSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyNoiseSpec(steadychain::NoiseSpec);

#[pymethods]
impl PyNoiseSpec {
    #[new]
    #[pyo3(signature = (kappa = 1.0, kappa_phi = 0.0, nbar = 0.0))]
    fn new(kappa: f64, kappa_phi: f64, nbar: f64) -> PyResult<Self> {
        steadychain::NoiseSpec::new(kappa, kappa_phi, nbar).map(Self).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("NoiseSpec(kappa={}, kappa_phi={}, nbar={})", self.0.kappa, self.0.kappa_phi, self.0.nbar)
    }
}

#[pyclass(name = "ReservoirSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyReservoirSpec(steadychain::ReservoirSpec);

#[pymethods]
impl PyReservoirSpec {
    /// Reservoir prepared excited: pumps `mode`.
    #[staticmethod]
    fn pump(mode: usize, gamma: f64) -> Self {
        Self(steadychain::ReservoirSpec::pump(mode, gamma))
    }

    /// Reservoir prepared in the ground state: cools `mode`.
    #[staticmethod]
    fn cool(mode: usize, gamma: f64) -> Self {
        Self(steadychain::ReservoirSpec::cool(mode, gamma))
    }

    fn __repr__(&self) -> String {
        format!("ReservoirSpec(mode={}, polarization={}, gamma={})", self.0.mode, self.0.polarization, self.0.gamma)
    }
}

#[pyclass(name = "Liouvillian", frozen)]
struct PyLiouvillian(steadychain::Liouvillian);

#[pymethods]
impl PyLiouvillian {
    #[new]
    #[pyo3(signature = (chain, reservoirs, noise, frame = "lab"))]
    fn new(chain: &PyChainSpec, reservoirs: Vec<PyReservoirSpec>, noise: &PyNoiseSpec, frame: &str) -> PyResult<Self> {
        let frame: steadychain::Frame = frame.parse().map_err(err)?;
        let res: Vec<_> = reservoirs.into_iter().map(|r| r.0).collect();
        total_liouvillian(&chain.0, &res, &noise.0, frame).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn hilbert_dim(&self) -> usize {
        self.0.hilbert_dim()
    }

    fn trace_defect(&self) -> f64 {
        self.0.trace_defect()
    }

    fn residual(&self, rho: &PyDensityMatrix) -> f64 {
        solvers::relative_residual(&self.0, &rho.0)
    }
}

#[pyclass(name = "DensityMatrix", frozen, from_py_object)]
#[derive(Clone)]
struct PyDensityMatrix(steadychain::DensityMatrix);

#[pymethods]
impl PyDensityMatrix {
    /// Pure state `f_k^dag |0>` of `chain`.
    #[staticmethod]
    fn target(chain: &PyChainSpec, k: usize) -> PyResult<Self> {
        let psi = operators::mode_excitation_state(&chain.0, k).map_err(err)?;
        Ok(Self(steadychain::DensityMatrix::from_pure(&psi)))
    }

    #[staticmethod]
    fn all_down(n: usize) -> Self {
        Self(steadychain::DensityMatrix::from_pure(&steadychain::StateVector::all_down(n)))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Row-major nested list of complex entries.
    fn to_list(&self) -> Vec<Vec<Complex64>> {
        let m = self.0.matrix();
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
    }

    fn trace_distance(&self, other: &PyDensityMatrix) -> f64 {
        self.0.trace_distance(&other.0)
    }
}

fn solver_options(method: &str, max_time: Option<f64>) -> PyResult<steadychain::SolverOptions> {
    let base = match method {
        "direct" => steadychain::SolverOptions::default(),
        "time_marching" => steadychain::SolverOptions::time_marching(),
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    Ok(steadychain::SolverOptions { max_time, ..base })
}

#[pyfunction]
#[pyo3(signature = (l, method = "direct", max_time = None))]
fn steady_state(l: &PyLiouvillian, method: &str, max_time: Option<f64>) -> PyResult<PyDensityMatrix> {
    let opts = solver_options(method, max_time)?;
    solvers::steady_state(&l.0, &opts).map(PyDensityMatrix).map_err(err)
}

#[pyfunction]
fn evolve(l: &PyLiouvillian, rho0: &PyDensityMatrix, times: Vec<f64>) -> PyResult<Vec<PyDensityMatrix>> {
    let opts = steadychain::SolverOptions::default();
    let path = solvers::evolve(&l.0, &rho0.0, &times, &opts).map_err(err)?;
    Ok(path.into_iter().map(PyDensityMatrix).collect())
}

#[pyfunction]
#[pyo3(signature = (rho, chain, k = 1))]
fn fidelity(rho: &PyDensityMatrix, chain: &PyChainSpec, k: usize) -> PyResult<f64> {
    let psi = operators::mode_excitation_state(&chain.0, k).map_err(err)?;
    metrics::fidelity(&rho.0, &psi).map_err(err)
}

#[pyfunction]
fn purity(rho: &PyDensityMatrix) -> f64 {
    metrics::purity(&rho.0)
}

#[pyfunction]
fn pair_concurrence(rho: &PyDensityMatrix, i: usize, j: usize) -> PyResult<f64> {
    metrics::pair_concurrence(&rho.0, i, j).map_err(err)
}

#[pyfunction]
fn mode_occupations(rho: &PyDensityMatrix, chain: &PyChainSpec) -> PyResult<Vec<f64>> {
    metrics::mode_occupations(&rho.0, &chain.0).map_err(err)
}

/// Runs a named experiment on a JSON config and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (name, config = "{}", workers = 1))]
fn run_experiment(py: Python<'_>, name: &str, config: &str, workers: usize) -> PyResult<String> {
    let experiment: Experiment = name.parse().map_err(err)?;
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    let out = py.detach(|| experiment.run(&cfg, workers)).map_err(err)?;
    Ok(out.to_csv())
}

#[pymodule]
fn pysteadychain(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChainSpec>()?;
    m.add_class::<PyNoiseSpec>()?;
    m.add_class::<PyReservoirSpec>()?;
    m.add_class::<PyLiouvillian>()?;
    m.add_class::<PyDensityMatrix>()?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(purity, m)?)?;
    m.add_function(wrap_pyfunction!(pair_concurrence, m)?)?;
    m.add_function(wrap_pyfunction!(mode_occupations, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
