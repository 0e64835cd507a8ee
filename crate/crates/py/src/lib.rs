use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spt_core::correlators::{decay_sweep, z_odd_pair, LroProbe};
use spt_core::experiments::{config_hash as hash_text, run_experiment as run_one, ExperimentKind, LoadedConfig, RunContext};
use spt_core::group::{GroupElement, ProductElement};
use spt_core::measurement::{enumerate_outcomes, postselect, sample_seeded, MeasurementPlan, OutcomeRecord};
use spt_core::model::{
    build_cluster_qubit_with, build_cluster_qudit_with, build_trivial, cocycle_mu, extract_w, sigma_at, string_order, Backend, Boundary,
    ChainState, ModelOptions, Side, SptModel,
};
use spt_core::SptError;

create_exception!(spt_py, SimulationError, PyRuntimeError);
create_exception!(spt_py, NumericalAssertion, SimulationError);

fn to_py(err: SptError) -> PyErr {
    match err.root() {
        SptError::Config { .. } | SptError::InvalidArgument(_) | SptError::InvalidEndpoints(_) => PyValueError::new_err(err.to_string()),
        SptError::Assertion(_) => NumericalAssertion::new_err(err.to_string()),
        _ => SimulationError::new_err(err.to_string()),
    }
}

fn parse_side(side: &str) -> PyResult<Side> {
    match side {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        other => Err(PyValueError::new_err(format!("side must be 'left' or 'right', got {other:?}"))),
    }
}

/// A prepared chain: the model together with its unmeasured state.
#[pyclass(frozen)]
struct Model {
    model: Arc<SptModel>,
    state: Arc<ChainState>,
}

impl Model {
    fn element(&self, e: (u32, u32)) -> PyResult<ProductElement> {
        self.model.element(e.0, e.1).map_err(to_py)
    }

    fn cut_or_middle(&self, cut: Option<usize>) -> PyResult<usize> {
        if let Some(c) = cut {
            return Ok(c);
        }
        let cuts = self.model.bulk_cuts();
        cuts.get(cuts.len() / 2)
            .copied()
            .ok_or_else(|| PyValueError::new_err("chain has no bulk cut"))
    }

    fn plan(&self, n_meas: usize, centers: Vec<usize>) -> PyResult<MeasurementPlan> {
        MeasurementPlan::new(&self.model, n_meas, centers).map_err(to_py)
    }
}

#[pymethods]
impl Model {
    /// `kind` is "cluster_qubit", "cluster_qudit" or "trivial"; `backend`
    /// is "stabilizer" or "dense"; `boundary` is "open" or "periodic".
    #[new]
    #[pyo3(signature = (kind, n_cells, d=2, backend="stabilizer", boundary="open", amplitude_budget=None))]
    fn new(kind: &str, n_cells: usize, d: usize, backend: &str, boundary: &str, amplitude_budget: Option<usize>) -> PyResult<Self> {
        let backend = match backend {
            "stabilizer" => Backend::Stabilizer,
            "dense" => Backend::Dense,
            other => return Err(PyValueError::new_err(format!("unknown backend {other:?}"))),
        };
        let boundary = match boundary {
            "open" => Boundary::Open,
            "periodic" => Boundary::Periodic,
            other => return Err(PyValueError::new_err(format!("unknown boundary {other:?}"))),
        };
        let mut opts = ModelOptions {
            backend,
            boundary,
            ..ModelOptions::default()
        };
        if let Some(b) = amplitude_budget {
            opts.amplitude_budget = b;
        }
        let (model, state) = match kind {
            "cluster_qubit" => build_cluster_qubit_with(n_cells, opts),
            "cluster_qudit" => build_cluster_qudit_with(n_cells, d, opts),
            "trivial" => build_trivial(n_cells, d, opts),
            other => return Err(PyValueError::new_err(format!("unknown model kind {other:?}"))),
        }
        .map_err(to_py)?;
        Ok(Self {
            model: Arc::new(model),
            state: Arc::new(state),
        })
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.model.n_cells()
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.model.n_sites()
    }

    #[getter]
    fn local_dim(&self) -> usize {
        self.model.local_dim()
    }

    #[getter]
    fn backend(&self) -> &'static str {
        self.model.backend().name()
    }

    fn bulk_cuts(&self) -> Vec<usize> {
        self.model.bulk_cuts()
    }

    /// Group elements as `(g, h)` residue pairs.
    fn elements(&self) -> Vec<(u32, u32)> {
        self.model
            .group()
            .elements()
            .into_iter()
            .map(|e| (e.g.0[0], e.h.0[0]))
            .collect()
    }

    #[pyo3(signature = (a, b, cut=None))]
    fn mu(&self, a: (u32, u32), b: (u32, u32), cut: Option<usize>) -> PyResult<C64> {
        let j = self.cut_or_middle(cut)?;
        cocycle_mu(&self.model, &self.state, &self.element(a)?, &self.element(b)?, j).map_err(to_py)
    }

    #[pyo3(signature = (a, b, cut=None))]
    fn sigma(&self, a: (u32, u32), b: (u32, u32), cut: Option<usize>) -> PyResult<C64> {
        let j = self.cut_or_middle(cut)?;
        sigma_at(&self.model, &self.state, &self.element(a)?, &self.element(b)?, j).map_err(to_py)
    }

    fn string_order(&self, e: (u32, u32), i: usize, j: usize) -> PyResult<C64> {
        string_order(&self.model, &self.state, &self.element(e)?, i, j).map_err(to_py)
    }

    /// `(sites, expectation, source)` of the boundary operator at `cut`.
    fn boundary_operator(&self, e: (u32, u32), cut: usize, side: &str) -> PyResult<(Vec<usize>, C64, String)> {
        let w = extract_w(&self.model, &self.state, &self.element(e)?, cut, parse_side(side)?).map_err(to_py)?;
        let value = self.state.expectation(&w.operator).map_err(to_py)?;
        Ok((w.operator.support(), value, format!("{:?}", w.source).to_lowercase()))
    }

    /// `(distance, |connected|)` for `Z_o` pairs starting at cell `start`.
    fn z_pair_decay(&self, start: usize, separations: Vec<usize>) -> PyResult<Vec<(usize, f64)>> {
        let rows = decay_sweep(&self.state, |d| z_odd_pair(&self.model, start, d), &separations, None).map_err(to_py)?;
        Ok(rows.into_iter().map(|r| (r.distance, r.abs_connected)).collect())
    }

    /// Seeded measurement of the blocks of radius `n_meas` around `centers`.
    #[pyo3(signature = (n_meas, centers, seed, index=0))]
    fn measure(&self, n_meas: usize, centers: Vec<usize>, seed: u64, index: u64) -> PyResult<Outcome> {
        let plan = self.plan(n_meas, centers)?;
        let (post, record) = sample_seeded(&self.model, &self.state, &plan, seed, index).map_err(to_py)?;
        Ok(Outcome {
            model: self.model.clone(),
            pre: self.state.clone(),
            post,
            plan,
            record,
        })
    }

    /// Projects onto the given charges, one residue per block.
    fn postselect(&self, n_meas: usize, centers: Vec<usize>, charges: Vec<u32>) -> PyResult<Outcome> {
        let plan = self.plan(n_meas, centers)?;
        let q: Vec<GroupElement> = charges.iter().map(|&c| GroupElement(vec![c])).collect();
        let (post, p) = postselect(&self.model, &self.state, &plan, &q).map_err(to_py)?;
        let record = OutcomeRecord {
            charges: q,
            probability: p,
            conditional: Vec::new(),
            centers: plan.centers().to_vec(),
            n_meas,
            seed: None,
            sample: None,
        };
        Ok(Outcome {
            model: self.model.clone(),
            pre: self.state.clone(),
            post,
            plan,
            record,
        })
    }

    /// Every outcome with nonzero probability, as `(charges, probability)`.
    fn enumerate(&self, n_meas: usize, centers: Vec<usize>) -> PyResult<Vec<(Vec<u32>, f64)>> {
        let plan = self.plan(n_meas, centers)?;
        let out = enumerate_outcomes(&self.model, &self.state, &plan).map_err(to_py)?;
        Ok(out
            .into_iter()
            .map(|(q, p)| (q.into_iter().map(|c| c.0[0]).collect(), p))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(kind={:?}, n_cells={}, backend={:?})",
            self.model.kind(),
            self.model.n_cells(),
            self.model.backend().name()
        )
    }
}

/// A post-measurement state with its outcome record.
#[pyclass(frozen)]
struct Outcome {
    model: Arc<SptModel>,
    pre: Arc<ChainState>,
    post: ChainState,
    plan: MeasurementPlan,
    record: OutcomeRecord,
}

#[pymethods]
impl Outcome {
    #[getter]
    fn charges(&self) -> Vec<u32> {
        self.record.charges.iter().map(|c| c.0[0]).collect()
    }

    #[getter]
    fn centers(&self) -> Vec<usize> {
        self.record.centers.clone()
    }

    #[getter]
    fn probability(&self) -> f64 {
        self.record.probability
    }

    /// Dressed boundary correlator between cuts `i` and `j` for the measured
    /// generator: `(pair, single_left, single_right, connected, predicted_phase)`.
    fn lro(&self, i: usize, j: usize) -> PyResult<(C64, C64, C64, C64, C64)> {
        let g = self.model.element(1, 0).map_err(to_py)?;
        let probe = LroProbe::new(&self.model, &self.pre, &g, i, j).map_err(to_py)?;
        let r = probe.evaluate(&self.post, &self.plan, &self.record).map_err(to_py)?;
        Ok((r.pair, r.single_a, r.single_b, r.connected, r.predicted_phase.unwrap_or(C64::new(1.0, 0.0))))
    }

    fn z_pair_decay(&self, start: usize, separations: Vec<usize>) -> PyResult<Vec<(usize, f64)>> {
        let rows = decay_sweep(&self.post, |d| z_odd_pair(&self.model, start, d), &separations, None).map_err(to_py)?;
        Ok(rows.into_iter().map(|r| (r.distance, r.abs_connected)).collect())
    }
}

#[pyfunction]
fn config_hash(text: &str) -> String {
    hash_text(text)
}

/// Runs one named experiment from config text and returns the written paths.
#[pyfunction]
#[pyo3(signature = (config, experiment, out_dir=None, seed=None))]
fn run_experiment(config: &str, experiment: &str, out_dir: Option<PathBuf>, seed: Option<u64>) -> PyResult<Vec<String>> {
    let kind = ExperimentKind::ALL
        .into_iter()
        .find(|k| k.name() == experiment)
        .ok_or_else(|| PyValueError::new_err(format!("unknown experiment {experiment:?}")))?;
    let mut ctx = RunContext::new(LoadedConfig::parse(config).map_err(to_py)?);
    if let Some(dir) = out_dir {
        ctx = ctx.with_out_dir(dir);
    }
    if let Some(s) = seed {
        ctx = ctx.with_seed(s);
    }
    let files = run_one(&ctx, kind).map_err(to_py)?;
    Ok(files.into_iter().map(|p| p.display().to_string()).collect())
}

#[pymodule]
fn spt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Outcome>()?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    m.add("NumericalAssertion", m.py().get_type::<NumericalAssertion>())?;
    Ok(())
}
