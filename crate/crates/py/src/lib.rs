//! Python bindings for `qgame_core`.

use num_complex::Complex64;
use pyo3::exceptions::{PyMemoryError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};
use qgame_core::circuit::{self, Variant};
use qgame_core::game::{self, to_f64, ExactProbability};
use qgame_core::mac::{self, AllocatorPolicy, CellConfig, MacMetrics, Topology};
use qgame_core::{AssignmentTuple, Regime, StrategyMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py_err(e: qgame_core::Error) -> PyErr {
    match e {
        qgame_core::Error::ResourceLimit { .. } => PyMemoryError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = qgame_core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py_err)
}

fn exact(p: ExactProbability) -> (u128, u128) {
    (*p.numer(), *p.denom())
}

/// Game parameters: `n` users and the phase parameter `p`.
#[pyclass(name = "GameConfig", module = "qgame", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyGameConfig {
    inner: game::GameConfig,
}

#[pymethods]
impl PyGameConfig {
    /// `p` wins over `regime`; with neither, the enhance-optimum phase is used.
    #[new]
    #[pyo3(signature = (n, p=None, regime=None))]
    fn new(n: usize, p: Option<u64>, regime: Option<&str>) -> PyResult<Self> {
        let p = match (p, regime) {
            (Some(p), _) => p,
            (None, Some(r)) => parse::<Regime>(r)?.phase(n),
            (None, None) => Regime::EnhanceOptimum.phase(n),
        };
        Ok(Self {
            inner: game::GameConfig::new(n, p).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> u64 {
        self.inner.p()
    }

    fn amplitude(&self, outcome: Vec<usize>) -> PyResult<Complex64> {
        game::outcome_amplitude(&self.inner, &AssignmentTuple::new(outcome)).map_err(to_py_err)
    }

    fn in_support(&self, outcome: Vec<usize>) -> PyResult<bool> {
        game::support_predicate(&self.inner, &AssignmentTuple::new(outcome)).map_err(to_py_err)
    }

    /// Exact outcome statistics. Fractions are `(numerator, denominator)` pairs.
    fn probabilities<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let a = game::analytic_probabilities(&self.inner);
        let d = PyDict::new(py);
        d.set_item("p_all_distinct", to_f64(a.p_all_distinct))?;
        d.set_item("p_all_distinct_exact", exact(a.p_all_distinct))?;
        d.set_item("p_all_same", to_f64(a.p_all_same))?;
        d.set_item("p_all_same_exact", exact(a.p_all_same))?;
        d.set_item("support_size", a.support_size)?;
        d.set_item("per_outcome_prob", to_f64(a.per_outcome_prob))?;
        Ok(d)
    }

    /// Draws outcomes straight from the support, without a state vector.
    fn sample(&self, shots: usize, seed: u64) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..shots)
            .map(|_| game::sample_outcome(&self.inner, &mut rng).into_inner())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("GameConfig(n={}, p={})", self.inner.n(), self.inner.p())
    }
}

/// Uniform random choice: `(p_all_distinct, p_all_same)` as fractions.
#[pyfunction]
fn classical_probabilities(n: usize) -> PyResult<((u128, u128), (u128, u128))> {
    let c = game::classical_probabilities(n).map_err(to_py_err)?;
    Ok((exact(c.p_all_distinct), exact(c.p_all_same)))
}

/// Dense state vector over `n^n` basis states.
#[pyclass(name = "QuditState", module = "qgame", skip_from_py_object)]
#[derive(Clone)]
pub struct PyQuditState {
    inner: qgame_core::QuditState,
}

#[pymethods]
impl PyQuditState {
    #[staticmethod]
    fn entangled(config: &PyGameConfig) -> PyResult<Self> {
        let inner = qgame_core::QuditState::prepare_entangled(&config.inner).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Entangled state built by simulating a qubit preparation circuit.
    #[staticmethod]
    #[pyo3(signature = (config, variant="corrected"))]
    fn from_circuit(config: &PyGameConfig, variant: &str) -> PyResult<Self> {
        let inner = circuit::prepare_via_circuit(&config.inner, parse::<Variant>(variant)?)
            .map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_amplitudes(n: usize, amplitudes: Vec<Complex64>) -> PyResult<Self> {
        let inner = qgame_core::QuditState::from_amplitudes(n, amplitudes).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.amplitudes().to_vec()
    }

    fn norm_sqr(&self) -> f64 {
        self.inner.norm_sqr()
    }

    /// Applies the Fourier strategy on every site, or only on `sites`.
    #[pyo3(signature = (sites=None))]
    fn apply_fourier(&mut self, sites: Option<Vec<usize>>) -> PyResult<()> {
        let m = StrategyMatrix::fourier(self.inner.n()).map_err(to_py_err)?;
        match sites {
            Some(sites) => self.inner.apply_in_order(&m, sites),
            None => self.inner.apply_local_strategy(&m),
        }
        .map_err(to_py_err)
    }

    /// Row-major `n × n` unitary applied to one site.
    fn apply_matrix(&mut self, site: usize, entries: Vec<Complex64>) -> PyResult<()> {
        let m = StrategyMatrix::from_entries(self.inner.n(), entries).map_err(to_py_err)?;
        self.inner.apply_to_site(site, &m).map_err(to_py_err)
    }

    /// Outcome tuple to probability, omitting outcomes below the floor.
    fn distribution<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (t, p) in self.inner.distribution() {
            d.set_item(PyTuple::new(py, t.channels())?, p)?;
        }
        Ok(d)
    }

    fn sample(&self, shots: usize, seed: u64) -> PyResult<Vec<Vec<usize>>> {
        let sampler = self.inner.sampler().map_err(to_py_err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..shots)
            .map(|_| sampler.sample(&mut rng).into_inner())
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "QuditState(n={}, dim={})",
            self.inner.n(),
            self.inner.amplitudes().len()
        )
    }
}

/// Full protocol: entangled preparation followed by the Fourier strategy.
#[pyfunction]
fn run_protocol(config: &PyGameConfig) -> PyResult<PyQuditState> {
    let inner = qgame_core::qudit::run_protocol(&config.inner).map_err(to_py_err)?;
    Ok(PyQuditState { inner })
}

#[pyfunction]
#[pyo3(signature = (config, variant="paper-figure"))]
fn audit_circuit<'py>(
    py: Python<'py>,
    config: &PyGameConfig,
    variant: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let r =
        circuit::audit_preparation(&config.inner, parse::<Variant>(variant)?).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("p", r.p)?;
    d.set_item("variant", r.variant.name())?;
    d.set_item("max_amplitude_deviation", r.max_amplitude_deviation)?;
    d.set_item("matches", r.matches)?;
    d.set_item("per_branch_phase_ratio", r.per_branch_phase_ratio)?;
    d.set_item("single_phase_exponent", r.single_phase_exponent)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (config, variant="corrected"))]
fn export_circuit(config: &PyGameConfig, variant: &str) -> PyResult<String> {
    let gates = circuit::build_preparation_circuit(&config.inner, parse::<Variant>(variant)?)
        .map_err(to_py_err)?;
    let width = circuit::register_width(config.inner.n()).map_err(to_py_err)?;
    let mut buf = Vec::new();
    circuit::write_circuit_text(&gates, width, &mut buf)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("circuit text is ascii"))
}

fn metrics_dict<'py>(py: Python<'py>, m: &MacMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("slots", m.slots)?;
    d.set_item("arbitrations", m.arbitrations)?;
    d.set_item("throughput", m.throughput)?;
    d.set_item("collision_rate", m.collision_rate)?;
    d.set_item("all_distinct_rate", m.all_distinct_rate)?;
    d.set_item("all_same_rate", m.all_same_rate)?;
    d.set_item("energy_proxy", m.energy_proxy)?;
    d.set_item("total_attempts", m.total_attempts)?;
    d.set_item("total_successes", m.total_successes)?;
    Ok(d)
}

/// Slotted MAC run. A `mesh_degree` switches from the star cell to mesh rounds.
#[pyfunction]
#[pyo3(signature = (n_users, policy, slots, seed, primary_activity=0.0, mesh_degree=None, rounds_per_slot=None))]
#[allow(clippy::too_many_arguments)]
fn simulate_mac<'py>(
    py: Python<'py>,
    n_users: usize,
    policy: &str,
    slots: u64,
    seed: u64,
    primary_activity: f64,
    mesh_degree: Option<usize>,
    rounds_per_slot: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = CellConfig::star(n_users, primary_activity, slots, seed);
    if let Some(degree) = mesh_degree {
        config = config.with_topology(Topology::MeshRounds {
            degree,
            rounds_per_slot,
        });
    }
    let policy = parse::<AllocatorPolicy>(policy)?;
    let metrics = py
        .detach(|| mac::simulate(&config, policy, |_| {}))
        .map_err(to_py_err)?;
    metrics_dict(py, &metrics)
}

#[pymodule]
fn qgame(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGameConfig>()?;
    m.add_class::<PyQuditState>()?;
    m.add_function(wrap_pyfunction!(classical_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(audit_circuit, m)?)?;
    m.add_function(wrap_pyfunction!(export_circuit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_mac, m)?)?;
    Ok(())
}
