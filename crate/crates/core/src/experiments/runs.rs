use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BackendChoice, ExperimentConfig, ExperimentKind, LoadedConfig, ModelConfig, ModelKindConfig};
use crate::correlators::{decay_sweep, plan_endpoints, z_odd_pair, LroProbe, SweepRow};
use crate::dense::random::{haar_unitary, near_local_unitary};
use crate::dense::{locality_profile, shift, truncate_unitary, LocalOperator, LocalityProfile};
use crate::error::{Result, SptError};
use crate::group::ProductElement;
use crate::measurement::{enumerate_outcomes, postselect, sample_seeded, MeasurementPlan, OutcomeRecord, MAX_ENUMERATION};
use crate::model::{cocycle_table, extract_w, Backend, ChainState, Side, SptModel, CELL_SIZE};

/// Provenance block written into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub backend: BackendChoice,
    pub model: ModelConfig,
    pub version: String,
}

/// A loaded config plus command-line overrides.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub config: ExperimentConfig,
    pub hash: String,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunContext {
    pub fn new(loaded: LoadedConfig) -> Self {
        Self {
            seed: loaded.config.seed,
            out_dir: loaded.config.output.clone(),
            config: loaded.config,
            hash: loaded.hash,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_out_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = dir.into();
        self
    }

    /// Replaces the backend choice and re-validates.
    pub fn with_backend(mut self, backend: BackendChoice) -> Result<Self> {
        self.config.backend = backend;
        self.config.validate()?;
        Ok(self)
    }

    fn meta(&self, kind: ExperimentKind) -> Meta {
        Meta {
            experiment: kind.name().to_string(),
            config_hash: self.hash.clone(),
            seed: self.seed,
            backend: self.config.backend,
            model: self.config.model.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn path(&self, kind: ExperimentKind, ext: &str) -> PathBuf {
        self.out_dir.join(format!("{}.{ext}", kind.name()))
    }

    fn write_json<T: Serialize>(&self, kind: ExperimentKind, value: &T) -> Result<PathBuf> {
        let path = self.path(kind, "json");
        let mut text = serde_json::to_string_pretty(value).map_err(|e| SptError::Io(e.to_string()))?;
        text.push('\n');
        write_file(&path, &text)?;
        Ok(path)
    }

    fn write_csv(&self, kind: ExperimentKind, header: &str, rows: &[String]) -> Result<PathBuf> {
        let path = self.path(kind, "csv");
        let mut text = format!(
            "# experiment={}\n# config_hash={}\n# seed={}\n{header}\n",
            kind.name(),
            self.hash,
            self.seed
        );
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        write_file(&path, &text)?;
        Ok(path)
    }

    fn tol(backend: Backend) -> f64 {
        match backend {
            Backend::Stabilizer => 1e-12,
            Backend::Dense => 1e-10,
        }
    }

    fn cluster(&self) -> bool {
        self.config.model.kind != ModelKindConfig::Trivial
    }
}

/// CSV number: `-0` folded into `0`, tiny values in exponent form.
fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() < 1e-6 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn assertion(failures: Vec<String>) -> Result<()> {
    if failures.is_empty() {
        return Ok(());
    }
    let shown = failures.len().min(5);
    let mut msg = failures[..shown].join("; ");
    if failures.len() > shown {
        msg.push_str(&format!("; and {} more", failures.len() - shown));
    }
    Err(SptError::Assertion(msg))
}

/// Runs one experiment inside a pool sized by `config.threads`. Errors carry
/// the experiment name.
pub fn run_experiment(ctx: &RunContext, kind: ExperimentKind) -> Result<Vec<PathBuf>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.config.threads)
        .build()
        .map_err(|e| SptError::InvalidArgument(e.to_string()))?;
    let out = pool.install(|| match kind {
        ExperimentKind::Index => run_index(ctx).map(|r| r.files),
        ExperimentKind::StringOrder => run_string_order(ctx).map(|r| r.files),
        ExperimentKind::MeasureSweep => run_measure_sweep(ctx).map(|r| r.files),
        ExperimentKind::Decay => run_decay(ctx).map(|r| r.files),
        ExperimentKind::Localize => run_localize(ctx).map(|r| r.files),
    });
    out.map_err(|e| e.context(kind.name()))
}

/// In-memory report of a run that passed its checks, with the files written.
/// Files are written before the checks, so a failing run still leaves them.
#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub report: T,
    pub files: Vec<PathBuf>,
}

fn finish<T>(report: T, files: Vec<PathBuf>, failures: Vec<String>) -> Result<RunOutput<T>> {
    assertion(failures)?;
    Ok(RunOutput { report, files })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementLabel {
    pub g: Vec<u32>,
    pub h: Vec<u32>,
}

impl From<&ProductElement> for ElementLabel {
    fn from(e: &ProductElement) -> Self {
        Self {
            g: e.g.0.clone(),
            h: e.h.0.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocycleRow {
    pub cut: usize,
    pub a: ElementLabel,
    pub b: ElementLabel,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexTable {
    pub backend: Backend,
    pub cuts: Vec<usize>,
    pub mu: Vec<CocycleRow>,
    pub sigma: Vec<CocycleRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub meta: Meta,
    pub tables: Vec<IndexTable>,
}

/// Two distinct bulk cuts near a third and two thirds of the chain.
fn index_cuts(model: &SptModel) -> Result<Vec<usize>> {
    let cuts = model.bulk_cuts();
    if cuts.is_empty() {
        return Err(SptError::ChainTooShort("no bulk cut available".into()));
    }
    let mut out = vec![cuts[cuts.len() / 3], cuts[(2 * cuts.len()) / 3]];
    out.dedup();
    Ok(out)
}

/// `μ` and `σ` over all pairs of group elements at two bulk cuts. Fails the
/// assertion when `|μ| ≠ 1` or `σ` differs between the cuts.
pub fn run_index(ctx: &RunContext) -> Result<RunOutput<IndexReport>> {
    let mut tables = Vec::new();
    let mut failures = Vec::new();
    for backend in ctx.config.backend.backends() {
        let (model, state) = ctx.config.build_model(backend)?;
        let cuts = index_cuts(&model)?;
        let tol = RunContext::tol(backend);
        let mut mu_rows = Vec::new();
        let mut sigma_rows = Vec::new();
        let mut first_sigma: Option<Vec<C64>> = None;
        for &j in &cuts {
            let table = cocycle_table(&model, &state, j)?;
            let lookup = |a: &ProductElement, b: &ProductElement| {
                table
                    .iter()
                    .find(|(x, y, _)| x == a && y == b)
                    .map(|(_, _, v)| *v)
                    .expect("table covers every pair")
            };
            let mut sig = Vec::new();
            for (a, b, v) in &table {
                if (v.norm() - 1.0).abs() > tol {
                    failures.push(format!("{}: |μ({a}, {b})| = {} at cut {j}", backend.name(), v.norm()));
                }
                mu_rows.push(CocycleRow {
                    cut: j,
                    a: a.into(),
                    b: b.into(),
                    re: v.re,
                    im: v.im,
                });
                let s = *v / lookup(b, a);
                sig.push(s);
                sigma_rows.push(CocycleRow {
                    cut: j,
                    a: a.into(),
                    b: b.into(),
                    re: s.re,
                    im: s.im,
                });
            }
            match &first_sigma {
                None => first_sigma = Some(sig),
                Some(prev) => {
                    if prev.iter().zip(&sig).any(|(x, y)| (x - y).norm() > tol) {
                        failures.push(format!("{}: σ differs between cuts {cuts:?}", backend.name()));
                    }
                }
            }
        }
        tables.push(IndexTable {
            backend,
            cuts,
            mu: mu_rows,
            sigma: sigma_rows,
        });
    }
    let report = IndexReport {
        meta: ctx.meta(ExperimentKind::Index),
        tables,
    };
    let files = vec![ctx.write_json(ExperimentKind::Index, &report)?];
    finish(report, files, failures)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StringOrderRow {
    pub distance: usize,
    pub abs_string_order: f64,
    pub re: f64,
    pub im: f64,
    pub abs_single_left: f64,
    pub abs_single_right: f64,
    pub backend: Backend,
}

fn sweep_element(model: &SptModel, element: Option<[u32; 2]>) -> Result<ProductElement> {
    let [g, h] = element.unwrap_or([1, 0]);
    model.element(g, h)
}

/// `|ω(W^{L_i} U^{[i,j)} W^{R_j})|` and the single `|ω(W)|` for each
/// separation `j − i`. Cluster models must give 1 and 0.
pub fn run_string_order(ctx: &RunContext) -> Result<RunOutput<Vec<StringOrderRow>>> {
    let cfg = &ctx.config.string_order;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for backend in ctx.config.backend.backends() {
        let (model, state) = ctx.config.build_model(backend)?;
        let e = sweep_element(&model, cfg.element)?;
        let cuts = model.bulk_cuts();
        let i = cfg.start.or_else(|| cuts.first().copied()).ok_or_else(|| {
            SptError::ChainTooShort("no bulk cut available".into())
        })?;
        let seps: Vec<usize> = if cfg.separations.is_empty() {
            cuts.iter().filter(|&&j| j > i).map(|&j| j - i).collect()
        } else {
            cfg.separations.clone()
        };
        let wl = extract_w(&model, &state, &e, i, Side::Left)?.operator;
        let single_left = state.expectation(&wl)?;
        let tol = RunContext::tol(backend);
        let part: Vec<StringOrderRow> = seps
            .par_iter()
            .map(|&d| {
                let j = i + d;
                let wr = extract_w(&model, &state, &e, j, Side::Right)?.operator;
                let op = wl.mul(&model.symmetry_on_cells(&e, i..j)?)?.mul(&wr)?;
                let v = state.expectation(&op)?;
                Ok(StringOrderRow {
                    distance: d,
                    abs_string_order: v.norm(),
                    re: v.re,
                    im: v.im,
                    abs_single_left: single_left.norm(),
                    abs_single_right: state.expectation(&wr)?.norm(),
                    backend,
                })
            })
            .collect::<Result<_>>()?;
        for r in &part {
            if (r.abs_string_order - 1.0).abs() > tol {
                failures.push(format!("{}: |string order| = {} at d = {}", backend.name(), r.abs_string_order, r.distance));
            }
            if ctx.cluster() && !model.group().is_identity(&e) && (r.abs_single_left > tol || r.abs_single_right > tol) {
                failures.push(format!("{}: nonzero single at d = {}", backend.name(), r.distance));
            }
        }
        rows.extend(part);
    }
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.distance,
                num(r.abs_string_order),
                num(r.re),
                num(r.im),
                num(r.abs_single_left),
                num(r.abs_single_right),
                r.backend.name()
            )
        })
        .collect();
    let files = vec![ctx.write_csv(
        ExperimentKind::StringOrder,
        "distance,abs_string_order,re,im,abs_single_left,abs_single_right,backend",
        &lines,
    )?];
    finish(rows, files, failures)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub distance: usize,
    pub abs_connected: f64,
    pub re_pair: f64,
    pub im_pair: f64,
    pub record_id: u64,
    pub region_size: usize,
    pub re_predicted: f64,
    pub im_predicted: f64,
    pub probability: f64,
    pub abs_single_left: f64,
    pub abs_single_right: f64,
    pub enumerated: bool,
    pub backend: Backend,
}

fn sweep_plans(ctx: &RunContext, model: &SptModel) -> Result<Vec<(usize, MeasurementPlan)>> {
    let meas = &ctx.config.measurement;
    let r = ctx.config.block_radius();
    if !meas.auto_lattice {
        let plan = MeasurementPlan::new(model, r, meas.centers.clone())?;
        return Ok(vec![(meas.centers.len(), plan)]);
    }
    if meas.sizes.is_empty() {
        // every size whose region leaves room for both dressed operators
        let mut out = Vec::new();
        for n in 1.. {
            match MeasurementPlan::centered(model, r, n) {
                Ok(p) if plan_endpoints(model, &p).is_ok() => out.push((n, p)),
                _ => break,
            }
        }
        return Ok(out);
    }
    meas.sizes
        .iter()
        .map(|&n| MeasurementPlan::centered(model, r, n).map(|p| (n, p)))
        .collect()
}

/// Post-measurement state, its record, and the record id.
type OutcomeState = (ChainState, OutcomeRecord, u64);

/// Post-measurement states with their records: every outcome under
/// enumeration, otherwise `samples` seeded draws.
fn outcome_states(
    ctx: &RunContext,
    model: &SptModel,
    state: &ChainState,
    plan: &MeasurementPlan,
    stream: u64,
) -> Result<(bool, Vec<OutcomeState>)> {
    let meas = &ctx.config.measurement;
    let enumerate = meas.enumerate.unwrap_or(plan.outcome_count() <= MAX_ENUMERATION);
    if enumerate {
        let outcomes = enumerate_outcomes(model, state, plan)?;
        let states = outcomes
            .into_par_iter()
            .enumerate()
            .map(|(id, (charges, p))| {
                let (post, _) = postselect(model, state, plan, &charges)?;
                let record = OutcomeRecord {
                    charges,
                    probability: p,
                    conditional: Vec::new(),
                    centers: plan.centers().to_vec(),
                    n_meas: plan.n_meas(),
                    seed: None,
                    sample: Some(id as u64),
                };
                Ok((post, record, id as u64))
            })
            .collect::<Result<_>>()?;
        return Ok((true, states));
    }
    let states = (0..meas.samples)
        .into_par_iter()
        .map(|s| {
            let (post, record) = sample_seeded(model, state, plan, ctx.seed, (stream << 32) | s)?;
            Ok((post, record, s))
        })
        .collect::<Result<_>>()?;
    Ok((false, states))
}

/// Dressed connected correlator over outcome records for each region size.
/// Cluster models must give modulus 1 with vanishing singles, pair values
/// proportional to the predicted character phase, and (under enumeration)
/// probabilities summing to 1.
pub fn run_measure_sweep(ctx: &RunContext) -> Result<RunOutput<Vec<MeasureRow>>> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for backend in ctx.config.backend.backends() {
        let (model, state) = ctx.config.build_model(backend)?;
        let g = model.element(1, 0)?;
        let tol = RunContext::tol(backend);
        for (n, plan) in sweep_plans(ctx, &model)? {
            let (i, j) = plan_endpoints(&model, &plan)?;
            let probe = LroProbe::new(&model, &state, &g, i, j)?;
            let (enumerated, states) = outcome_states(ctx, &model, &state, &plan, n as u64)?;
            let part: Vec<MeasureRow> = states
                .par_iter()
                .map(|(post, record, id)| {
                    let r = probe.evaluate(post, &plan, record)?;
                    let phase = r.predicted_phase.unwrap_or(C64::new(1.0, 0.0));
                    Ok(MeasureRow {
                        distance: j - i,
                        abs_connected: r.abs_connected(),
                        re_pair: r.pair.re,
                        im_pair: r.pair.im,
                        record_id: *id,
                        region_size: n,
                        re_predicted: phase.re,
                        im_predicted: phase.im,
                        probability: record.probability,
                        abs_single_left: r.single_a.norm(),
                        abs_single_right: r.single_b.norm(),
                        enumerated,
                        backend,
                    })
                })
                .collect::<Result<_>>()?;
            if enumerated {
                let total: f64 = part.iter().map(|r| r.probability).sum();
                if (total - 1.0).abs() > 1e-10 {
                    failures.push(format!("{}: n = {n} probabilities sum to {total}", backend.name()));
                }
            }
            if ctx.cluster() {
                let ratio = |r: &MeasureRow| C64::new(r.re_pair, r.im_pair) / C64::new(r.re_predicted, r.im_predicted);
                let reference = part.first().map(ratio);
                for r in &part {
                    if (r.abs_connected - 1.0).abs() > tol || r.abs_single_left > tol || r.abs_single_right > tol {
                        failures.push(format!(
                            "{}: n = {n} record {} has |connected| = {}",
                            backend.name(),
                            r.record_id,
                            r.abs_connected
                        ));
                    }
                    if let Some(c) = reference {
                        if (ratio(r) - c).norm() > tol {
                            failures.push(format!("{}: n = {n} record {} breaks the phase law", backend.name(), r.record_id));
                        }
                    }
                }
            }
            rows.extend(part);
        }
    }
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.distance,
                num(r.abs_connected),
                num(r.re_pair),
                num(r.im_pair),
                r.record_id,
                r.region_size,
                num(r.re_predicted),
                num(r.im_predicted),
                num(r.probability),
                num(r.abs_single_left),
                num(r.abs_single_right),
                if r.enumerated { "enumerate" } else { "sample" },
                r.backend.name()
            )
        })
        .collect();
    let files = vec![ctx.write_csv(
        ExperimentKind::MeasureSweep,
        "distance,abs_connected,re_pair,im_pair,record_id,region_size,re_predicted,im_predicted,probability,abs_single_left,abs_single_right,mode,backend",
        &lines,
    )?];
    finish(rows, files, failures)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    #[serde(flatten)]
    pub row: SweepRow,
    pub measured: bool,
    pub backend: Backend,
}

/// `Z_o` pair correlators from `start`, before and after a per-cell
/// measurement of every cell but the two chain ends.
pub fn run_decay(ctx: &RunContext) -> Result<RunOutput<Vec<DecayRow>>> {
    let cfg = &ctx.config.decay;
    let n_cells = ctx.config.model.n_cells;
    let start = cfg.start.unwrap_or(1);
    let seps: Vec<usize> = if cfg.separations.is_empty() {
        (1..n_cells.saturating_sub(start + 1)).collect()
    } else {
        cfg.separations.clone()
    };
    let zero_from = if ctx.config.radius() == 0 { 1 } else { 2 };
    let mut rows: Vec<DecayRow> = Vec::new();
    let mut failures = Vec::new();
    let mut per_backend: Vec<(Backend, Vec<SweepRow>)> = Vec::new();
    for backend in ctx.config.backend.backends() {
        let (model, state) = ctx.config.build_model(backend)?;
        let tol = RunContext::tol(backend);
        let pre = decay_sweep(&state, |d| z_odd_pair(&model, start, d), &seps, None)?;
        for r in &pre {
            if r.distance >= zero_from && r.abs_connected > tol {
                failures.push(format!("{}: pre-measurement |connected| = {} at d = {}", backend.name(), r.abs_connected, r.distance));
            }
        }
        let plan = MeasurementPlan::lattice(&model, 0, 1, n_cells - 2)?;
        let (post, _) = sample_seeded(&model, &state, &plan, ctx.seed, 0)?;
        let post_rows = decay_sweep(&post, |d| z_odd_pair(&model, start, d), &seps, Some(0))?;
        if ctx.cluster() && (1..n_cells - 1).contains(&start) {
            for r in &post_rows {
                let inside = start + r.distance < n_cells - 1;
                if inside && r.distance >= 2 && (r.abs_connected - 1.0).abs() > tol {
                    failures.push(format!("{}: post-measurement |connected| = {} at d = {}", backend.name(), r.abs_connected, r.distance));
                }
            }
        }
        per_backend.push((backend, pre.clone()));
        rows.extend(pre.into_iter().map(|row| DecayRow { row, measured: false, backend }));
        rows.extend(post_rows.into_iter().map(|row| DecayRow { row, measured: true, backend }));
    }
    if let [(_, a), (_, b)] = per_backend.as_slice() {
        for (x, y) in a.iter().zip(b) {
            if (x.abs_connected - y.abs_connected).abs() > 1e-10
                || (x.re_pair - y.re_pair).abs() > 1e-10
                || (x.im_pair - y.im_pair).abs() > 1e-10
            {
                failures.push(format!("backends disagree at d = {}", x.distance));
            }
        }
    }
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.row.distance,
                num(r.row.abs_connected),
                num(r.row.re_pair),
                num(r.row.im_pair),
                r.row.record_id.map(|x| x.to_string()).unwrap_or_default(),
                if r.measured { "post" } else { "pre" },
                r.backend.name()
            )
        })
        .collect();
    let files = vec![ctx.write_csv(
        ExperimentKind::Decay,
        "distance,abs_connected,re_pair,im_pair,record_id,stage,backend",
        &lines,
    )?];
    finish(rows, files, failures)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    Haar,
    NearLocal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationTrial {
    pub index: usize,
    pub kind: TrialKind,
    pub truncation_error: f64,
    pub unitary_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizeReport {
    pub meta: Meta,
    pub sites: usize,
    pub keep: usize,
    pub trials: Vec<TruncationTrial>,
    pub violations: usize,
    pub max_ratio: f64,
    pub local_input_distance: f64,
    pub profile_cells: Option<usize>,
    pub profile: Option<LocalityProfile>,
    pub profile_radius: Option<usize>,
}

/// Unitarized truncations of random unitaries, half Haar and half
/// near-local, plus the locality profile of the model's entangler.
pub fn run_localize(ctx: &RunContext) -> Result<RunOutput<LocalizeReport>> {
    let cfg = &ctx.config.localize;
    let dims = vec![2usize; cfg.sites];
    let sites: Vec<usize> = (0..cfg.sites).collect();
    let window: Vec<usize> = (0..cfg.keep).collect();
    let dim: usize = dims.iter().product();
    let trials: Vec<TruncationTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            rng.set_stream(k as u64);
            let kind = if k % 2 == 0 { TrialKind::Haar } else { TrialKind::NearLocal };
            let m = match kind {
                TrialKind::Haar => haar_unitary(dim, &mut rng),
                TrialKind::NearLocal => near_local_unitary(&dims, cfg.keep, cfg.epsilon, &mut rng),
            };
            let t = LocalOperator::new(sites.clone(), dims.clone(), m)?;
            let (_, r) = truncate_unitary(&t, &window)?;
            Ok(TruncationTrial {
                index: k,
                kind,
                truncation_error: r.truncation_error,
                unitary_distance: r.unitary_distance,
            })
        })
        .collect::<Result<_>>()?;
    let violations = trials
        .iter()
        .filter(|t| t.unitary_distance > 3.0 * t.truncation_error + 1e-12)
        .count();
    let max_ratio = trials
        .iter()
        .filter(|t| t.truncation_error > 0.0)
        .map(|t| t.unitary_distance / t.truncation_error)
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    rng.set_stream(u64::MAX);
    let local = LocalOperator::new(window.clone(), dims[..cfg.keep].to_vec(), haar_unitary(dims[..cfg.keep].iter().product(), &mut rng))?;
    let (_, local_r) = truncate_unitary(&local.extend_to(&sites, &dims)?, &window)?;

    let mut failures = Vec::new();
    if violations > 0 {
        failures.push(format!("{violations} of {} trials exceed the factor-3 bound", trials.len()));
    }
    if local_r.unitary_distance > 1e-12 {
        failures.push(format!("local input moved by {}", local_r.unitary_distance));
    }
    let profile_cells = ctx.config.profile_cells();
    let mut profile = None;
    let mut profile_radius = None;
    if let Some(cells) = profile_cells {
        let (model, _) = ctx.config.build_model_cells(Backend::Dense, cells)?;
        let site = model.even_site(cells / 2);
        let op = LocalOperator::single(site, shift(model.local_dim()));
        let p = locality_profile(model.entangler(), &op, &[site])?;
        profile_radius = p.radius_at(1e-12);
        let bound = model.radius() * CELL_SIZE;
        if profile_radius.is_none_or(|r| r > bound) {
            failures.push(format!("entangler profile radius {profile_radius:?} exceeds {bound} sites"));
        }
        profile = Some(p);
    }
    let report = LocalizeReport {
        meta: ctx.meta(ExperimentKind::Localize),
        sites: cfg.sites,
        keep: cfg.keep,
        trials,
        violations,
        max_ratio,
        local_input_distance: local_r.unitary_distance,
        profile_cells,
        profile,
        profile_radius,
    };
    let files = vec![ctx.write_json(ExperimentKind::Localize, &report)?];
    finish(report, files, failures)
}

/// Human-readable summary of a list of written files.
pub fn describe_files(files: &[PathBuf]) -> String {
    let mut s = String::new();
    for f in files {
        let _ = writeln!(s, "wrote {}", f.display());
    }
    s
}
