//! Connected correlators and the measurement-induced long-range order.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};
use crate::group::ProductElement;
use crate::measurement::{MeasurementPlan, OutcomeRecord};
use crate::model::{extract_w, Backend, ChainOperator, ChainState, Side, SptModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorReport {
    pub endpoints: Option<(usize, usize)>,
    pub pair: C64,
    pub single_a: C64,
    pub single_b: C64,
    pub connected: C64,
    pub predicted_phase: Option<C64>,
    pub backend: Backend,
    pub record: Option<u64>,
}

impl CorrelatorReport {
    pub fn abs_connected(&self) -> f64 {
        self.connected.norm()
    }
}

/// `⟨AB⟩ − ⟨A⟩⟨B⟩` for operators with disjoint supports.
pub fn connected_correlator(state: &ChainState, a: &ChainOperator, b: &ChainOperator) -> Result<CorrelatorReport> {
    let sa = a.support();
    let shared: Vec<usize> = b.support().into_iter().filter(|s| sa.contains(s)).collect();
    if !shared.is_empty() {
        return Err(SptError::OverlappingSupports(shared));
    }
    let pair = state.expectation(&a.mul(b)?)?;
    let single_a = state.expectation(a)?;
    let single_b = state.expectation(b)?;
    Ok(CorrelatorReport {
        endpoints: None,
        pair,
        single_a,
        single_b,
        connected: pair - single_a * single_b,
        predicted_phase: None,
        backend: state.backend(),
        record: None,
    })
}

/// `W̃^{L_i} = W^{L_i} (U^{[i−N−1, i)})†` or `W̃^{R_j} = (U^{[j, j+N]})† W^{R_j}`,
/// with `W` extracted from the unmeasured `state`.
pub fn dressed_w(model: &SptModel, state: &ChainState, e: &ProductElement, cut: usize, side: Side) -> Result<ChainOperator> {
    let w = extract_w(model, state, e, cut, side)?.operator;
    let n = model.radius();
    match side {
        Side::Left => {
            let lo = cut.checked_sub(n + 1).ok_or_else(|| {
                SptError::InvalidEndpoints(format!("left cut {cut} leaves no room for the dressing"))
            })?;
            w.mul(&model.symmetry_on_cells(e, lo..cut)?.adjoint())
        }
        Side::Right => {
            if cut + n >= model.n_cells() {
                return Err(SptError::InvalidEndpoints(format!(
                    "right cut {cut} leaves no room for the dressing"
                )));
            }
            model.symmetry_on_cells(e, cut..=cut + n)?.adjoint().mul(&w)
        }
    }
}

/// Block centers whose blocks tile cells `[lo, hi]` exactly.
fn tiling_centers(plan: &MeasurementPlan, lo: usize, hi: usize) -> Option<Vec<usize>> {
    let r = plan.n_meas();
    let inside: Vec<usize> = plan
        .centers()
        .iter()
        .copied()
        .filter(|&k| k + r >= lo && k <= hi + r)
        .collect();
    let mut next = lo;
    for &k in &inside {
        if k - r != next || k + r > hi {
            return None;
        }
        next = k + r + 1;
    }
    (next == hi + 1).then_some(inside)
}

/// Dressed pair `W̃^{L_i}`, `W̃^{R_j}` built once from the unmeasured state
/// and evaluated on any number of post-measurement states.
#[derive(Clone, Debug)]
pub struct LroProbe {
    pub g: ProductElement,
    pub i: usize,
    pub j: usize,
    pub left: ChainOperator,
    pub right: ChainOperator,
    radius: usize,
}

impl LroProbe {
    pub fn new(model: &SptModel, pre: &ChainState, g: &ProductElement, i: usize, j: usize) -> Result<Self> {
        if g.h.0.iter().any(|&x| x != 0) {
            return Err(SptError::InvalidArgument(format!("{g} is not in the measured subgroup")));
        }
        let n = model.radius();
        if i < n + 1 || i > j {
            return Err(SptError::InvalidEndpoints(format!("need N+1 ≤ i ≤ j, got i={i}, j={j}")));
        }
        Ok(Self {
            g: g.clone(),
            i,
            j,
            left: dressed_w(model, pre, g, i, Side::Left)?,
            right: dressed_w(model, pre, g, j, Side::Right)?,
            radius: n,
        })
    }

    /// Cells `[i−N−1, j+N]` that the measured blocks must tile.
    pub fn span(&self) -> (usize, usize) {
        (self.i - self.radius - 1, self.j + self.radius)
    }

    /// Connected correlator on `post`. The measured blocks must tile
    /// [`Self::span`]; the predicted phase is the product of `χ_{q_k}(g̃)`
    /// over those blocks.
    pub fn evaluate(&self, post: &ChainState, plan: &MeasurementPlan, record: &OutcomeRecord) -> Result<CorrelatorReport> {
        let (lo, hi) = self.span();
        let centers = tiling_centers(plan, lo, hi).ok_or_else(|| {
            SptError::InvalidEndpoints(format!("cells [{lo}, {hi}] are not tiled by the measured blocks"))
        })?;
        let mut report = connected_correlator(post, &self.left, &self.right)?;
        let subgroup = plan.subgroup();
        let mut phase = C64::new(1.0, 0.0);
        for k in centers {
            let q = record
                .charge_at(k)
                .ok_or_else(|| SptError::InvalidEndpoints(format!("record has no charge at cell {k}")))?;
            phase *= subgroup.character_value(q, &self.g.g)?;
        }
        report.endpoints = Some((self.i, self.j));
        report.predicted_phase = Some(phase);
        report.record = record.sample;
        Ok(report)
    }
}

/// Endpoints `(i, j)` whose span `[i−N−1, j+N]` is the plan's region.
pub fn plan_endpoints(model: &SptModel, plan: &MeasurementPlan) -> Result<(usize, usize)> {
    let (lo, hi) = plan
        .region()
        .ok_or_else(|| SptError::InvalidEndpoints("empty measurement plan".into()))?;
    let n = model.radius();
    let i = lo + n + 1;
    if hi < n || hi - n < i {
        return Err(SptError::InvalidEndpoints(format!(
            "region [{lo}, {hi}] is too small for radius {n}"
        )));
    }
    Ok((i, hi - n))
}

/// One-shot [`LroProbe`] evaluation.
#[allow(clippy::too_many_arguments)]
pub fn verify_measured_lro(
    model: &SptModel,
    pre: &ChainState,
    post: &ChainState,
    plan: &MeasurementPlan,
    record: &OutcomeRecord,
    g: &ProductElement,
    i: usize,
    j: usize,
) -> Result<CorrelatorReport> {
    LroProbe::new(model, pre, g, i, j)?.evaluate(post, plan, record)
}

/// `ω(W^{L_i} U^{[i,j)} W^{R_j})` with `W` taken from `pre` and evaluated on
/// `post`.
pub fn measured_string_order(model: &SptModel, pre: &ChainState, post: &ChainState, g: &ProductElement, i: usize, j: usize) -> Result<C64> {
    let wl = extract_w(model, pre, g, i, Side::Left)?.operator;
    let wr = extract_w(model, pre, g, j, Side::Right)?.operator;
    let op = wl.mul(&model.symmetry_on_cells(g, i..j)?)?.mul(&wr)?;
    post.expectation(&op)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub distance: usize,
    pub abs_connected: f64,
    pub re_pair: f64,
    pub im_pair: f64,
    pub record_id: Option<u64>,
}

/// `|connected|` for each separation; separations whose operators overlap
/// are skipped.
pub fn decay_sweep<F>(state: &ChainState, family: F, separations: &[usize], record_id: Option<u64>) -> Result<Vec<SweepRow>>
where
    F: Fn(usize) -> Result<(ChainOperator, ChainOperator)>,
{
    let mut rows = Vec::new();
    for &d in separations {
        let (a, b) = family(d)?;
        match connected_correlator(state, &a, &b) {
            Ok(r) => rows.push(SweepRow {
                distance: d,
                abs_connected: r.abs_connected(),
                re_pair: r.pair.re,
                im_pair: r.pair.im,
                record_id,
            }),
            Err(SptError::OverlappingSupports(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

/// `(Z_o^{(i)}, Z_o^{(i+d)†})` on the odd subsites. The adjoint matches the
/// alternating entangler powers, so the pair is pinned by per-cell
/// measurement for every `d`.
pub fn z_odd_pair(model: &SptModel, i: usize, d: usize) -> Result<(ChainOperator, ChainOperator)> {
    let z = |c: usize, dagger: bool| -> Result<ChainOperator> {
        if c >= model.n_cells() {
            return Err(SptError::IndexOutOfRange {
                what: "cells",
                index: c,
                len: model.n_cells(),
            });
        }
        let site = model.odd_site(c);
        Ok(match model.backend() {
            Backend::Stabilizer => ChainOperator::Pauli(crate::pauli::PauliString::single(model.n_sites(), site, 'Z')),
            Backend::Dense => {
                let m = crate::dense::clock(model.local_dim());
                let m = if dagger { m.adjoint() } else { m };
                ChainOperator::dense(crate::dense::LocalOperator::single(site, m))
            }
        })
    };
    Ok((z(i, false)?, z(i + d, true)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{postselect, sample_seeded, MeasurementPlan};
    use crate::model::{build_cluster_qubit, build_cluster_qubit_with, build_cluster_qudit_with, build_trivial, ModelOptions};
    use crate::pauli::PauliString;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn dressed_w_for_the_cluster() {
        let (m, s) = build_cluster_qubit(12).unwrap();
        let g = m.element(1, 0).unwrap();
        let j = 6;
        let mut expected = PauliString::identity(24);
        expected.set(m.odd_site(j), crate::pauli::Letter::Z);
        expected.set(m.even_site(j), crate::pauli::Letter::X);
        expected.set(m.even_site(j + 1), crate::pauli::Letter::X);
        let got = dressed_w(&m, &s, &g, j, Side::Right).unwrap();
        assert_eq!(got.as_pauli().unwrap().strip_phase(), expected);
        let left = dressed_w(&m, &s, &g, j, Side::Left).unwrap();
        assert!(left.support().iter().all(|&x| m.sites_of(&[j - 2, j - 1, j]).contains(&x)));
        let id = m.group().identity();
        assert!(dressed_w(&m, &s, &id, j, Side::Right).unwrap().is_identity());
        assert!(dressed_w(&m, &s, &g, 11, Side::Right).is_err());
    }

    #[test]
    fn dressed_w_matches_dense() {
        let (m, s) = build_cluster_qubit(6).unwrap();
        let (md, sd) = build_cluster_qubit_with(6, ModelOptions::dense()).unwrap();
        let g = m.element(1, 0).unwrap();
        for (j, side) in [(2, Side::Right), (3, Side::Left)] {
            let p = dressed_w(&m, &s, &g, j, side).unwrap();
            let d = dressed_w(&md, &sd, &g, j, side).unwrap();
            let psi = sd.as_dense().unwrap();
            let a = p.apply_dense(psi).unwrap();
            let b = d.apply_dense(psi).unwrap();
            let dist = a.distance_up_to_phase(&b).unwrap();
            assert!(dist < 1e-10, "{dist}");
        }
    }

    #[test]
    fn product_state_has_no_connected_part() {
        let (m, s) = build_trivial(6, 2, ModelOptions::dense()).unwrap();
        let (a, b) = z_odd_pair(&m, 1, 3).unwrap();
        let r = connected_correlator(&s, &a, &b).unwrap();
        assert!(r.connected.norm() < 1e-14);
        assert!(matches!(connected_correlator(&s, &a, &a), Err(SptError::OverlappingSupports(_))));
    }

    #[test]
    fn pre_measurement_decay_is_strict() {
        let (m, s) = build_cluster_qubit(40).unwrap();
        let rows = decay_sweep(&s, |d| z_odd_pair(&m, 5, d), &[0, 1, 2, 5, 20, 30], None).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.abs_connected == 0.0));
        let g = m.element(1, 0).unwrap();
        let a = extract_w(&m, &s, &g, 10, Side::Left).unwrap().operator;
        let b = extract_w(&m, &s, &g, 20, Side::Right).unwrap().operator;
        let r = connected_correlator(&s, &a, &b).unwrap();
        assert_eq!((r.single_a, r.single_b, r.connected), (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)));
    }

    #[test]
    fn per_cell_measurement_creates_z_pair_order() {
        let (m, s) = build_cluster_qubit(40).unwrap();
        let plan = MeasurementPlan::lattice(&m, 0, 5, 34).unwrap();
        let (post, _) = sample_seeded(&m, &s, &plan, 21, 0).unwrap();
        let rows = decay_sweep(&post, |d| z_odd_pair(&m, 6, d), &[2, 5, 10, 28], Some(0)).unwrap();
        assert!(rows.iter().all(|r| r.abs_connected == 1.0));
    }

    #[test]
    fn blocked_measurement_gives_maximal_dressed_order() {
        let (m, s) = build_cluster_qubit(60).unwrap();
        let g = m.element(1, 0).unwrap();
        let plan = MeasurementPlan::lattice(&m, 1, 3, 56).unwrap();
        for idx in 0..4 {
            let (post, rec) = sample_seeded(&m, &s, &plan, 8, idx).unwrap();
            for (i, j) in [(7, 15), (7, 48), (19, 33)] {
                let r = verify_measured_lro(&m, &s, &post, &plan, &rec, &g, i, j).unwrap();
                assert_eq!(r.connected.norm(), 1.0);
                assert_eq!(r.single_a, C64::new(0.0, 0.0));
                assert_eq!(r.single_b, C64::new(0.0, 0.0));
                let so = measured_string_order(&m, &s, &post, &g, i, j).unwrap();
                assert_eq!(so.norm(), 1.0);
            }
        }
        assert!(matches!(
            verify_measured_lro(&m, &s, &s, &plan, &sample_seeded(&m, &s, &plan, 8, 0).unwrap().1, &g, 8, 15),
            Err(SptError::InvalidEndpoints(_))
        ));
    }

    #[test]
    fn outcome_phase_tracks_charges() {
        let (m, s) = build_cluster_qubit(30).unwrap();
        let g = m.element(1, 0).unwrap();
        let plan = MeasurementPlan::lattice(&m, 1, 3, 26).unwrap();
        let (_, rec) = sample_seeded(&m, &s, &plan, 4, 0).unwrap();
        let mut flipped = rec.charges.clone();
        let pos = plan.centers().iter().position(|&k| k == 12).unwrap();
        flipped[pos].0[0] ^= 1;
        let (post_a, _) = postselect(&m, &s, &plan, &rec.charges).unwrap();
        let (post_b, _) = postselect(&m, &s, &plan, &flipped).unwrap();
        let mut rec_b = rec.clone();
        rec_b.charges = flipped;
        let a = verify_measured_lro(&m, &s, &post_a, &plan, &rec, &g, 7, 21).unwrap();
        let b = verify_measured_lro(&m, &s, &post_b, &plan, &rec_b, &g, 7, 21).unwrap();
        assert_eq!(a.pair / b.pair, -one());
        let pa = a.predicted_phase.unwrap();
        let pb = b.predicted_phase.unwrap();
        assert_eq!(pa / pb, -one());
        assert_eq!(a.pair / pa, b.pair / pb);
    }

    #[test]
    fn dense_dressed_order_after_per_cell_measurement() {
        let (m, s) = build_cluster_qubit_with(7, ModelOptions::dense()).unwrap();
        let g = m.element(1, 0).unwrap();
        let plan = MeasurementPlan::new(&m, 0, (0..6).collect()).unwrap();
        let (post, rec) = sample_seeded(&m, &s, &plan, 2, 0).unwrap();
        let r = verify_measured_lro(&m, &s, &post, &plan, &rec, &g, 2, 4).unwrap();
        assert!((r.connected.norm() - 1.0).abs() < 1e-10, "{}", r.connected);
        assert!(r.single_a.norm() < 1e-10);
    }

    #[test]
    fn qutrit_outcome_phase_is_a_primitive_root() {
        let opts = ModelOptions {
            amplitude_budget: 1 << 23,
            ..ModelOptions::dense()
        };
        let (m, s) = build_cluster_qudit_with(7, 3, opts).unwrap();
        let g = m.element(1, 0).unwrap();
        let plan = MeasurementPlan::new(&m, 0, (0..6).collect()).unwrap();
        let (_, rec) = sample_seeded(&m, &s, &plan, 6, 0).unwrap();
        let mut other = rec.clone();
        other.charges[3].0[0] = (other.charges[3].0[0] + 1) % 3;
        let (post_a, _) = postselect(&m, &s, &plan, &rec.charges).unwrap();
        let (post_b, _) = postselect(&m, &s, &plan, &other.charges).unwrap();
        let a = verify_measured_lro(&m, &s, &post_a, &plan, &rec, &g, 2, 4).unwrap();
        let b = verify_measured_lro(&m, &s, &post_b, &plan, &other, &g, 2, 4).unwrap();
        assert!((a.connected.norm() - 1.0).abs() < 1e-10);
        assert!((b.connected.norm() - 1.0).abs() < 1e-10);
        let ratio = a.pair / b.pair;
        let predicted = a.predicted_phase.unwrap() / b.predicted_phase.unwrap();
        assert!((ratio - predicted).norm() < 1e-10, "{ratio} vs {predicted}");
        assert!((predicted - one()).norm() > 0.5);
    }
}
