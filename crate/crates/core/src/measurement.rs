//! Blocked charge measurements of the subgroup `G`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{LocalOperator, ZERO_PROBABILITY};
use crate::error::{Result, SptError};
use crate::group::{CharacterLabel, FiniteAbelianGroup, GroupElement};
use crate::model::{ChainOperator, ChainState, SptModel};
use crate::pauli::PauliString;

/// Largest outcome space [`enumerate_outcomes`] will walk.
pub const MAX_ENUMERATION: usize = 1 << 16;

/// Disjoint blocks `[k − n_meas, k + n_meas]` whose `G`-charge is measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    subgroup: FiniteAbelianGroup,
    n_meas: usize,
    centers: Vec<usize>,
    region: Option<(usize, usize)>,
}

impl MeasurementPlan {
    pub fn new(model: &SptModel, n_meas: usize, mut centers: Vec<usize>) -> Result<Self> {
        centers.sort_unstable();
        for w in centers.windows(2) {
            if w[1] - w[0] <= 2 * n_meas {
                return Err(SptError::OverlappingSupports(vec![w[0], w[1]]));
            }
        }
        for &k in &centers {
            if k < n_meas || k + n_meas >= model.n_cells() {
                return Err(SptError::InvalidArgument(format!(
                    "block around cell {k} with radius {n_meas} leaves the {}-cell chain",
                    model.n_cells()
                )));
            }
        }
        let region = match (centers.first(), centers.last()) {
            (Some(&a), Some(&b)) => Some((a - n_meas, b + n_meas)),
            _ => None,
        };
        Ok(Self {
            subgroup: model.group().g_part.clone(),
            n_meas,
            centers,
            region,
        })
    }

    /// Every multiple of `2 n_meas + 1` whose block fits in cells `[lo, hi]`.
    pub fn lattice(model: &SptModel, n_meas: usize, lo: usize, hi: usize) -> Result<Self> {
        let step = 2 * n_meas + 1;
        let centers = (0..model.n_cells())
            .filter(|k| k % step == 0 && *k >= lo + n_meas && k + n_meas <= hi)
            .collect();
        Self::new(model, n_meas, centers)
    }

    /// `2n + 1` lattice centers around the middle of the chain.
    pub fn centered(model: &SptModel, n_meas: usize, n: usize) -> Result<Self> {
        let step = 2 * n_meas + 1;
        let mid = (model.n_cells() / 2 / step) * step;
        if mid < n * step {
            return Err(SptError::ChainTooShort(format!(
                "{} cells cannot hold {} blocks of {step} cells",
                model.n_cells(),
                2 * n + 1
            )));
        }
        let centers = (0..=2 * n).map(|l| mid - n * step + l * step).collect();
        Self::new(model, n_meas, centers)
    }

    pub fn empty(model: &SptModel) -> Self {
        Self {
            subgroup: model.group().g_part.clone(),
            n_meas: 0,
            centers: Vec::new(),
            region: None,
        }
    }

    pub fn subgroup(&self) -> &FiniteAbelianGroup {
        &self.subgroup
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    /// Covered cells, inclusive.
    pub fn region(&self) -> Option<(usize, usize)> {
        self.region
    }

    pub fn block(&self, k: usize) -> Result<Vec<usize>> {
        if !self.centers.contains(&k) {
            return Err(SptError::InvalidArgument(format!("{k} is not a block center")));
        }
        Ok((k - self.n_meas..=k + self.n_meas).collect())
    }

    /// Number of joint outcomes, saturating.
    pub fn outcome_count(&self) -> usize {
        let order = self.subgroup.order();
        self.centers
            .iter()
            .try_fold(1usize, |acc, _| acc.checked_mul(order))
            .unwrap_or(usize::MAX)
    }
}

/// Charges `q_k` of one measurement run, in center order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub charges: Vec<CharacterLabel>,
    pub probability: f64,
    pub conditional: Vec<f64>,
    pub centers: Vec<usize>,
    pub n_meas: usize,
    pub seed: Option<u64>,
    pub sample: Option<u64>,
}

impl OutcomeRecord {
    pub fn charge_at(&self, k: usize) -> Option<&CharacterLabel> {
        self.centers.iter().position(|&c| c == k).map(|i| &self.charges[i])
    }
}

/// `Ũ_g` on the block around `k`.
pub fn block_symmetry(model: &SptModel, plan: &MeasurementPlan, k: usize, g: &GroupElement) -> Result<ChainOperator> {
    let cells = plan.block(k)?;
    model.symmetry_on_cells(&model.group().from_g(g.clone()), cells)
}

/// `P̃_q = |G|⁻¹ Σ_g χ_q(g) Ũ_g` as a dense operator on the block's sites.
pub fn block_projector(model: &SptModel, plan: &MeasurementPlan, k: usize, q: &CharacterLabel) -> Result<LocalOperator> {
    let sites = model.sites_of(&plan.block(k)?);
    let dims = vec![model.local_dim(); sites.len()];
    let group = plan.subgroup();
    let weight = 1.0 / group.order() as f64;
    let mut acc: Option<LocalOperator> = None;
    for g in group.elements() {
        let chi = group.character_value(q, &g)?;
        let term = block_symmetry(model, plan, k, &g)?
            .to_local()?
            .extend_to(&sites, &dims)?
            .scale(chi * weight);
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term)?,
        });
    }
    Ok(acc.expect("groups are non-empty"))
}

/// Pauli block operators of the generators of `G`, for the stabilizer path.
fn generator_paulis(model: &SptModel, plan: &MeasurementPlan, k: usize) -> Result<Vec<PauliString>> {
    let group = plan.subgroup();
    if group.moduli().iter().any(|&m| m != 2) {
        return Err(SptError::Unsupported {
            backend: "stabilizer",
            what: format!("measuring a subgroup with moduli {:?}", group.moduli()),
        });
    }
    (0..group.rank())
        .map(|i| {
            let mut r = vec![0; group.rank()];
            r[i] = 1;
            let g = group.element(r)?;
            match block_symmetry(model, plan, k, &g)? {
                ChainOperator::Pauli(p) => Ok(p),
                ChainOperator::Dense(_) => Err(SptError::Unsupported {
                    backend: "stabilizer",
                    what: "non-Pauli block symmetry".into(),
                }),
            }
        })
        .collect()
}

enum BlockStep {
    Sample,
    Fixed(CharacterLabel),
}

/// Measures or projects one block; returns the charge and its conditional
/// probability.
fn measure_block<R: Rng + ?Sized>(
    model: &SptModel,
    plan: &MeasurementPlan,
    state: &mut ChainState,
    k: usize,
    step: &BlockStep,
    rng: &mut R,
) -> Result<(CharacterLabel, f64)> {
    let group = plan.subgroup();
    match state {
        ChainState::Stabilizer(t) => {
            let mut residues = Vec::new();
            let mut prob = 1.0;
            for (i, p) in generator_paulis(model, plan, k)?.iter().enumerate() {
                let (outcome, pr) = match step {
                    BlockStep::Sample => t.measure_pauli(p, rng)?,
                    BlockStep::Fixed(q) => {
                        let want = if q.0[i] == 0 { 1 } else { -1 };
                        (want, t.postselect_pauli(p, want)?)
                    }
                };
                residues.push(if outcome == 1 { 0 } else { 1 });
                prob *= pr;
            }
            Ok((group.element(residues)?, prob))
        }
        ChainState::Dense(psi) => {
            let q = match step {
                BlockStep::Fixed(q) => q.clone(),
                BlockStep::Sample => {
                    let probs: Vec<(CharacterLabel, f64)> = group
                        .elements()
                        .map(|q| {
                            let phi = psi.applied(&block_projector(model, plan, k, &q)?)?;
                            Ok((q, phi.norm().powi(2)))
                        })
                        .collect::<Result<_>>()?;
                    let total: f64 = probs.iter().map(|(_, p)| p).sum();
                    let mut x = rng.random::<f64>() * total;
                    let mut chosen = None;
                    for (q, p) in &probs {
                        if *p < ZERO_PROBABILITY {
                            continue;
                        }
                        chosen = Some(q.clone());
                        if x < *p {
                            break;
                        }
                        x -= p;
                    }
                    chosen.ok_or(SptError::ZeroProbabilityOutcome(total))?
                }
            };
            let (prob, post) = psi.apply_projector(&block_projector(model, plan, k, &q)?)?;
            *psi = post;
            Ok((q, prob))
        }
    }
}

fn run_plan<R: Rng + ?Sized>(
    model: &SptModel,
    state: &ChainState,
    plan: &MeasurementPlan,
    fixed: Option<&[CharacterLabel]>,
    rng: &mut R,
) -> Result<(ChainState, OutcomeRecord)> {
    if let Some(q) = fixed {
        if q.len() != plan.centers().len() {
            return Err(SptError::DimensionMismatch {
                expected: plan.centers().len(),
                got: q.len(),
            });
        }
        if let Some(bad) = q.iter().find(|c| !plan.subgroup().contains(c)) {
            return Err(SptError::InvalidArgument(format!("{bad} is not a character of G")));
        }
    }
    let mut post = state.clone();
    let mut charges = Vec::new();
    let mut conditional = Vec::new();
    for (i, &k) in plan.centers().iter().enumerate() {
        let step = match fixed {
            Some(q) => BlockStep::Fixed(q[i].clone()),
            None => BlockStep::Sample,
        };
        let (q, p) = measure_block(model, plan, &mut post, k, &step, rng)
            .map_err(|e| e.context(format!("block at cell {k}")))?;
        charges.push(q);
        conditional.push(p);
    }
    let record = OutcomeRecord {
        probability: conditional.iter().product(),
        charges,
        conditional,
        centers: plan.centers().to_vec(),
        n_meas: plan.n_meas(),
        seed: None,
        sample: None,
    };
    Ok((post, record))
}

/// Measures the blocks left to right, drawing each charge from its
/// conditional Born distribution.
pub fn sample_outcomes<R: Rng + ?Sized>(
    model: &SptModel,
    state: &ChainState,
    plan: &MeasurementPlan,
    rng: &mut R,
) -> Result<(ChainState, OutcomeRecord)> {
    run_plan(model, state, plan, None, rng)
}

/// Reproducible sample `index` of the stream keyed by `seed`.
pub fn sample_seeded(
    model: &SptModel,
    state: &ChainState,
    plan: &MeasurementPlan,
    seed: u64,
    index: u64,
) -> Result<(ChainState, OutcomeRecord)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let (post, mut record) = sample_outcomes(model, state, plan, &mut rng)?;
    record.seed = Some(seed);
    record.sample = Some(index);
    Ok((post, record))
}

/// Records of `count` independent samples, computed in parallel.
pub fn sample_records(
    model: &SptModel,
    state: &ChainState,
    plan: &MeasurementPlan,
    seed: u64,
    count: u64,
) -> Result<Vec<OutcomeRecord>> {
    (0..count)
        .into_par_iter()
        .map(|i| sample_seeded(model, state, plan, seed, i).map(|(_, r)| r))
        .collect()
}

/// Projects onto the charge string `q`; returns the normalized post-state
/// and its probability.
pub fn postselect(model: &SptModel, state: &ChainState, plan: &MeasurementPlan, q: &[CharacterLabel]) -> Result<(ChainState, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (post, record) = run_plan(model, state, plan, Some(q), &mut rng)?;
    Ok((post, record.probability))
}

/// Every charge string with nonzero probability, with that probability.
pub fn enumerate_outcomes(model: &SptModel, state: &ChainState, plan: &MeasurementPlan) -> Result<Vec<(Vec<CharacterLabel>, f64)>> {
    let count = plan.outcome_count();
    if count > MAX_ENUMERATION {
        return Err(SptError::BudgetExceeded {
            needed: count,
            budget: MAX_ENUMERATION,
        });
    }
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut stack = vec![(state.clone(), Vec::<CharacterLabel>::new(), 1.0)];
    while let Some((s, prefix, p)) = stack.pop() {
        let i = prefix.len();
        if i == plan.centers().len() {
            out.push((prefix, p));
            continue;
        }
        let k = plan.centers()[i];
        for q in plan.subgroup().elements() {
            let mut next = s.clone();
            match measure_block(model, plan, &mut next, k, &BlockStep::Fixed(q.clone()), &mut rng) {
                Ok((_, pq)) => {
                    let mut pre = prefix.clone();
                    pre.push(q);
                    stack.push((next, pre, p * pq));
                }
                Err(e) if matches!(e.root(), SptError::ZeroProbabilityOutcome(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// `Ũ_g^{(k)} |ψ⟩ = conj(χ_{q_k}(g)) |ψ⟩` for every block and every `g`.
pub fn verify_block_eigenrelation(model: &SptModel, state: &ChainState, plan: &MeasurementPlan, record: &OutcomeRecord) -> Result<bool> {
    let group = plan.subgroup();
    for (k, q) in record.centers.iter().zip(&record.charges) {
        for g in group.elements() {
            let u = block_symmetry(model, plan, *k, &g)?;
            let want = group.character_value(q, &g)?.conj();
            let got = state.expectation(&u)?;
            if (got - want).norm() > 1e-10 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Expectation of the joint projector for `q`, computed without collapsing.
pub fn outcome_probability(model: &SptModel, state: &ChainState, plan: &MeasurementPlan, q: &[CharacterLabel]) -> Result<f64> {
    match postselect(model, state, plan, q) {
        Ok((_, p)) => Ok(p),
        Err(e) if matches!(e.root(), SptError::ZeroProbabilityOutcome(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}
