//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the summary prints whether or not a check fails.

use std::error::Error;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spt_core::correlators::{connected_correlator, decay_sweep, z_odd_pair, LroProbe};
use spt_core::dense::random::{haar_unitary, near_local_unitary};
use spt_core::dense::{truncate_unitary, LocalOperator};
use spt_core::experiments::ExperimentConfig;
use spt_core::group::{charge_projector, verify_eigenrelation, OnSiteRepresentation};
use spt_core::measurement::{
    block_projector, block_symmetry, enumerate_outcomes, outcome_probability, postselect, sample_records, sample_seeded, MeasurementPlan,
};
use spt_core::model::{
    build_cluster_qubit, build_cluster_qubit_with, build_cluster_qudit_with, cocycle_mu, extract_w, sigma_at, Boundary, ChainOperator,
    ModelOptions, Side, SptModel,
};
use spt_core::pauli::PauliString;

type Check = Result<String, Box<dyn Error>>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), Box<dyn Error>> {
    if cond {
        Ok(())
    } else {
        Err(msg().into())
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn dense_opts() -> ModelOptions {
    ModelOptions::dense()
}

/// Two distinct bulk cuts of `model`.
fn two_cuts(model: &SptModel) -> (usize, usize) {
    let cuts = model.bulk_cuts();
    (cuts[cuts.len() / 3], cuts[(2 * cuts.len()) / 3])
}

// g̃ = model.element(1, 0) acts on even subsites, its partner element(0, 1)
// on odd subsites.
fn c1_index() -> Check {
    let (m, s) = build_cluster_qubit(60)?;
    let (g, h) = (m.element(1, 0)?, m.element(0, 1)?);
    let (j1, j2) = two_cuts(&m);
    let (a, b) = (sigma_at(&m, &s, &g, &h, j1)?, sigma_at(&m, &s, &g, &h, j2)?);
    ensure(a == c(-1.0, 0.0) && b == a, || format!("stabilizer σ = {a}, {b} at cuts {j1}, {j2}"))?;

    let (m, s) = build_cluster_qubit_with(6, dense_opts())?;
    let (g, h) = (m.element(1, 0)?, m.element(0, 1)?);
    let (k1, k2) = two_cuts(&m);
    ensure(k1 != k2, || "dense chain has a single bulk cut".into())?;
    let (x, y) = (sigma_at(&m, &s, &g, &h, k1)?, sigma_at(&m, &s, &g, &h, k2)?);
    ensure((x + 1.0).norm() < 1e-10 && (y - x).norm() < 1e-10, || format!("dense σ = {x}, {y}"))?;
    Ok(format!(
        "σ = -1 exactly at cuts {j1}, {j2} of 60 cells; dense 12 qubits |σ+1| = {:.1e} at cuts {k1}, {k2}",
        (x + 1.0).norm().max((y + 1.0).norm())
    ))
}

fn c2_cocycle() -> Check {
    let mut worst = 0.0f64;
    for (label, (m, s)) in [("stabilizer", build_cluster_qubit(40)?), ("dense", build_cluster_qubit_with(6, dense_opts())?)] {
        let (g, h) = (m.element(1, 0)?, m.element(0, 1)?);
        let (j1, j2) = two_cuts(&m);
        for j in [j1, j2] {
            let plus = cocycle_mu(&m, &s, &g, &h, j)?;
            let minus = cocycle_mu(&m, &s, &h, &g, j)?;
            let dev = (plus - 1.0).norm().max((minus + 1.0).norm());
            if label == "stabilizer" {
                ensure(dev == 0.0, || format!("stabilizer μ = {plus}, {minus} at cut {j}"))?;
            }
            ensure(dev < 1e-10, || format!("{label} μ = {plus}, {minus} at cut {j}"))?;
            worst = worst.max(dev);
        }
    }
    Ok(format!("μ(g̃ partner order) = +1 and -1 on both backends, max deviation {worst:.1e}"))
}

fn c3_string_order() -> Check {
    let (m, s) = build_cluster_qubit(110)?;
    let i = 2;
    let elements: Vec<_> = m.group().elements().into_iter().filter(|e| !m.group().is_identity(e)).collect();
    let mut count = 0;
    for e in &elements {
        let wl = extract_w(&m, &s, e, i, Side::Left)?.operator;
        ensure(s.expectation(&wl)? == c(0.0, 0.0), || format!("ω(W^L) ≠ 0 for {e}"))?;
        for d in 1..=100 {
            let j = i + d;
            let wr = extract_w(&m, &s, e, j, Side::Right)?.operator;
            ensure(s.expectation(&wr)? == c(0.0, 0.0), || format!("ω(W^R) ≠ 0 for {e} at {j}"))?;
            let op = wl.mul(&m.symmetry_on_cells(e, i..j)?)?.mul(&wr)?;
            let v = s.expectation(&op)?;
            ensure(v.norm() == 1.0, || format!("|string order| = {} for {e} at d = {d}", v.norm()))?;
            count += 1;
        }
    }

    let mut worst = 0.0f64;
    let qutrit = build_cluster_qudit_with(5, 3, dense_opts())?;
    for (m, s) in [build_cluster_qubit_with(6, dense_opts())?, qutrit] {
        let cuts = m.bulk_cuts();
        for e in m.group().elements().into_iter().filter(|e| !m.group().is_identity(e)) {
            for &i in &cuts {
                for &j in cuts.iter().filter(|&&j| j > i) {
                    let wl = extract_w(&m, &s, &e, i, Side::Left)?.operator;
                    let wr = extract_w(&m, &s, &e, j, Side::Right)?.operator;
                    let v = s.expectation(&wl.mul(&m.symmetry_on_cells(&e, i..j)?)?.mul(&wr)?)?;
                    let dev = (v.norm() - 1.0).abs().max(s.expectation(&wl)?.norm()).max(s.expectation(&wr)?.norm());
                    ensure(dev < 1e-10, || format!("dense string order {v} for {e} at ({i}, {j})"))?;
                    worst = worst.max(dev);
                }
            }
        }
    }
    Ok(format!(
        "{count} stabilizer values exact up to separation 100; dense 6-cell qubit and 5-cell qutrit within {worst:.1e}"
    ))
}

fn c4_measured_lro() -> Check {
    let (m, s) = build_cluster_qubit(64)?;
    let g = m.element(1, 0)?;
    let plan = MeasurementPlan::lattice(&m, 1, 1, 61)?;
    let (lo, hi) = plan.region().ok_or("empty plan")?;
    ensure(hi - lo + 1 == 60, || format!("region [{lo}, {hi}]"))?;
    let probes: Vec<LroProbe> = [(lo + 2, hi - 1), (lo + 2, lo + 10), (lo + 14, hi - 16)]
        .into_iter()
        .map(|(i, j)| LroProbe::new(&m, &s, &g, i, j))
        .collect::<Result<_, _>>()?;
    let records = 24;
    for idx in 0..records {
        let (post, rec) = sample_seeded(&m, &s, &plan, 41, idx)?;
        for p in &probes {
            let r = p.evaluate(&post, &plan, &rec)?;
            ensure(r.connected.norm() == 1.0, || format!("record {idx}: |connected| = {}", r.connected.norm()))?;
            ensure(r.single_a == c(0.0, 0.0) && r.single_b == c(0.0, 0.0), || format!("record {idx}: nonzero single"))?;
        }
    }

    let (m, s) = build_cluster_qubit_with(7, dense_opts())?;
    let g = m.element(1, 0)?;
    let plan = MeasurementPlan::new(&m, 0, (0..6).collect())?;
    let probe = LroProbe::new(&m, &s, &g, 2, 4)?;
    let mut worst = 0.0f64;
    for idx in 0..20 {
        let (post, rec) = sample_seeded(&m, &s, &plan, 43, idx)?;
        let r = probe.evaluate(&post, &plan, &rec)?;
        let dev = (r.connected.norm() - 1.0).abs().max(r.single_a.norm()).max(r.single_b.norm());
        ensure(dev < 1e-10, || format!("dense record {idx}: deviation {dev:.2e}"))?;
        worst = worst.max(dev);
    }
    Ok(format!(
        "{records} records on a 60-cell region, 3 endpoint pairs, |connected| = 1 exactly; 20 dense 14-qubit records within {worst:.1e}"
    ))
}

fn c5_outcome_phase() -> Check {
    // Z2: flip one in-between outcome on the stabilizer backend
    let (m, s) = build_cluster_qubit(40)?;
    let g = m.element(1, 0)?;
    let plan = MeasurementPlan::lattice(&m, 1, 2, 37)?;
    let (lo, hi) = plan.region().ok_or("empty plan")?;
    let probe = LroProbe::new(&m, &s, &g, lo + 2, hi - 1)?;
    let (_, rec) = sample_seeded(&m, &s, &plan, 3, 0)?;
    let mut flips = 0;
    for k in 0..rec.charges.len() {
        let mut other = rec.clone();
        other.charges[k].0[0] ^= 1;
        let (post_a, _) = postselect(&m, &s, &plan, &rec.charges)?;
        let (post_b, _) = postselect(&m, &s, &plan, &other.charges)?;
        let a = probe.evaluate(&post_a, &plan, &rec)?;
        let b = probe.evaluate(&post_b, &plan, &other)?;
        ensure(b.pair / a.pair == c(-1.0, 0.0), || format!("Z2 ratio {} at block {k}", b.pair / a.pair))?;
        flips += 1;
    }

    // Z3: shift one outcome on the dense qutrit chain
    let opts = ModelOptions {
        amplitude_budget: 1 << 23,
        ..dense_opts()
    };
    let (m, s) = build_cluster_qudit_with(7, 3, opts)?;
    let g = m.element(1, 0)?;
    let plan = MeasurementPlan::new(&m, 0, (0..6).collect())?;
    let probe = LroProbe::new(&m, &s, &g, 2, 4)?;
    let (post_a, rec) = sample_seeded(&m, &s, &plan, 6, 0)?;
    let mut other = rec.clone();
    other.charges[3].0[0] = (other.charges[3].0[0] + 1) % 3;
    let (post_b, _) = postselect(&m, &s, &plan, &other.charges)?;
    let a = probe.evaluate(&post_a, &plan, &rec)?;
    let b = probe.evaluate(&post_b, &plan, &other)?;
    let ratio = b.pair / a.pair;
    let predicted = b.predicted_phase.ok_or("no phase")? / a.predicted_phase.ok_or("no phase")?;
    let dev = (ratio - predicted).norm();
    ensure(dev < 1e-10, || format!("Z3 ratio {ratio} vs {predicted}"))?;
    ensure((predicted.powi(3) - 1.0).norm() < 1e-12 && (predicted - 1.0).norm() > 0.5, || {
        format!("{predicted} is not a primitive cube root")
    })?;
    Ok(format!(
        "Z2 ratio -1 exactly for all {flips} blocks; Z3 ratio {:.6}{:+.6}i matches the character within {dev:.1e}",
        ratio.re, ratio.im
    ))
}

fn c6_contrast() -> Check {
    let n = 60;
    let (m, s) = build_cluster_qubit(n)?;
    let start = 2;
    let seps: Vec<usize> = (2..n - start - 1).collect();
    let pre = decay_sweep(&s, |d| z_odd_pair(&m, start, d), &seps, None)?;
    ensure(pre.iter().all(|r| r.abs_connected == 0.0), || "pre-measurement pair correlations".into())?;
    let plan = MeasurementPlan::lattice(&m, 0, 1, n - 2)?;
    let (post, _) = sample_seeded(&m, &s, &plan, 9, 0)?;
    let post_rows = decay_sweep(&post, |d| z_odd_pair(&m, start, d), &seps, Some(0))?;
    ensure(post_rows.iter().all(|r| r.abs_connected == 1.0), || "post-measurement pair correlations".into())?;
    Ok(format!("{} separations on {n} cells: pre 0, post 1", seps.len()))
}

fn projector_checks(rep: &OnSiteRepresentation, tol: f64) -> Result<f64, Box<dyn Error>> {
    let group = rep.group();
    let dim = rep.cell_dim();
    let ps: Vec<DMatrix<C64>> = group.elements().map(|q| charge_projector(rep, &q)).collect::<Result<_, _>>()?;
    let diff = |a: &DMatrix<C64>, b: &DMatrix<C64>| (a - b).iter().map(|x| x.norm()).fold(0.0, f64::max);
    let sum = ps.iter().fold(DMatrix::zeros(dim, dim), |acc, p| acc + p);
    let mut worst = diff(&sum, &DMatrix::identity(dim, dim));
    for (a, pa) in ps.iter().enumerate() {
        for (b, pb) in ps.iter().enumerate() {
            let want = if a == b { pa.clone() } else { DMatrix::zeros(dim, dim) };
            worst = worst.max(diff(&(pa * pb), &want));
        }
    }
    for q in group.elements() {
        ensure(verify_eigenrelation(rep, &q), || format!("eigenrelation fails for charge {q}"))?;
    }
    ensure(worst <= tol, || format!("projector algebra deviation {worst:.2e}"))?;
    Ok(worst)
}

fn c7_projectors() -> Check {
    let mut reps: Vec<(String, OnSiteRepresentation, f64)> = Vec::new();
    let (qubit, _) = build_cluster_qubit(8)?;
    reps.push(("qubit G×H".into(), qubit.representation().clone(), 0.0));
    reps.push(("qubit G".into(), qubit.measured_representation()?, 0.0));
    let (m, _) = build_cluster_qudit_with(4, 3, dense_opts())?;
    reps.push(("Z3×Z3".into(), m.representation().clone(), 1e-12));
    reps.push(("Z3".into(), m.measured_representation()?, 1e-12));
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/representations.toml"))?;
    let config = ExperimentConfig::parse(&text)?;
    for r in &config.representations {
        reps.push((r.name.clone(), r.build()?, 1e-12));
    }
    let mut worst = 0.0f64;
    for (name, rep, tol) in &reps {
        worst = worst.max(projector_checks(rep, *tol).map_err(|e| format!("{name}: {e}"))?);
    }

    // block projectors on a chain
    let (m, _) = build_cluster_qubit_with(5, dense_opts())?;
    let plan = MeasurementPlan::new(&m, 1, vec![2])?;
    let sub = plan.subgroup();
    let ps: Vec<LocalOperator> = sub.elements().map(|q| block_projector(&m, &plan, 2, &q)).collect::<Result<_, _>>()?;
    let sum = ps.iter().skip(1).try_fold(ps[0].clone(), |acc, p| acc.add(p))?;
    let id = LocalOperator::new(sum.sites().to_vec(), sum.dims().to_vec(), DMatrix::identity(sum.dim(), sum.dim()))?;
    let mut block_worst = sum.max_diff(&id)?;
    for (qa, pa) in sub.elements().zip(&ps) {
        for g in sub.elements() {
            let u = block_symmetry(&m, &plan, 2, &g)?.to_local()?;
            let chi = sub.character_value(&qa, &g)?.conj();
            block_worst = block_worst.max(u.mul(pa)?.max_diff(&pa.scale(chi))?);
        }
        for pb in &ps {
            let prod = pa.mul(pb)?;
            let want = if std::ptr::eq(pa, pb) { pa.clone() } else { pa.scale(c(0.0, 0.0)) };
            block_worst = block_worst.max(prod.max_diff(&want)?);
        }
    }
    ensure(block_worst <= 1e-12, || format!("block projector deviation {block_worst:.2e}"))?;
    Ok(format!(
        "{} representations (Pauli exact, dense max {worst:.1e}); block projectors {block_worst:.1e}",
        reps.len()
    ))
}

fn c8_born() -> Check {
    let (m, s) = build_cluster_qubit_with(6, dense_opts())?;
    let plan = MeasurementPlan::new(&m, 0, (0..5).collect())?;
    let outcomes = enumerate_outcomes(&m, &s, &plan)?;
    let total: f64 = outcomes.iter().map(|(_, p)| p).sum();
    ensure((total - 1.0).abs() <= 1e-10, || format!("dense probabilities sum to {total}"))?;

    // open-chain edge blocks give a non-uniform distribution
    let (m, s) = build_cluster_qubit(12)?;
    let plan = MeasurementPlan::new(&m, 0, vec![0, 1, 5, 10, 11])?;
    let outcomes = enumerate_outcomes(&m, &s, &plan)?;
    let stab_total: f64 = outcomes.iter().map(|(_, p)| p).sum();
    ensure((stab_total - 1.0).abs() <= 1e-12, || format!("stabilizer probabilities sum to {stab_total}"))?;
    let n = 10_000u64;
    let records = sample_records(&m, &s, &plan, 17, n)?;
    let mut worst = 0.0f64;
    for (q, p) in &outcomes {
        let count = records.iter().filter(|r| &r.charges == q).count() as f64;
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        let z = if sd > 0.0 { (count - mean).abs() / sd } else { (count - mean).abs() };
        ensure(z <= 5.0, || format!("outcome {q:?}: {count} vs {mean:.1}"))?;
        worst = worst.max(z);
    }
    let seen: usize = outcomes
        .iter()
        .map(|(q, _)| records.iter().filter(|r| &r.charges == q).count())
        .sum();
    ensure(seen as u64 == n, || "samples fell outside the enumerated support".into())?;
    Ok(format!(
        "dense 5-block sum off by {:.1e}; {} stabilizer outcomes, 10^4 samples, max |z| = {worst:.2}",
        (total - 1.0).abs(),
        outcomes.len()
    ))
}

fn pauli_pair(p: &PauliString) -> (ChainOperator, ChainOperator) {
    (ChainOperator::Pauli(p.clone()), ChainOperator::dense(LocalOperator::from_chain_pauli(p)))
}

fn c9_cross_backend() -> Check {
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let mut track = |a: C64, b: C64, what: &str| -> Result<(), Box<dyn Error>> {
        let dev = (a - b).norm();
        checked += 1;
        worst = worst.max(dev);
        ensure(dev <= 1e-10, || format!("{what}: {a} vs {b}"))
    };
    for boundary in [Boundary::Open, Boundary::Periodic] {
        let (ms, ss) = build_cluster_qubit_with(6, ModelOptions::default().with_boundary(boundary))?;
        let (md, sd) = build_cluster_qubit_with(6, dense_opts().with_boundary(boundary))?;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let letters: String = (0..12).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
            let p: PauliString = letters.parse()?;
            let (a, b) = pauli_pair(&p);
            track(ss.expectation(&a)?, sd.expectation(&b)?, "Pauli expectation")?;
        }
        for e in ms.group().elements() {
            let j = ms.bulk_cuts()[0];
            for side in [Side::Left, Side::Right] {
                let ws = extract_w(&ms, &ss, &e, j, side)?.operator;
                let wd = extract_w(&md, &sd, &e, j, side)?.operator;
                track(ss.expectation(&ws)?, sd.expectation(&wd)?, "boundary expectation")?;
            }
            for f in ms.group().elements() {
                track(cocycle_mu(&ms, &ss, &e, &f, j)?, cocycle_mu(&md, &sd, &e, &f, j)?, "cocycle")?;
            }
        }
        if boundary == Boundary::Open {
            let plan_s = MeasurementPlan::new(&ms, 0, (0..5).collect())?;
            let plan_d = MeasurementPlan::new(&md, 0, (0..5).collect())?;
            let outcomes = enumerate_outcomes(&ms, &ss, &plan_s)?;
            for (q, p) in &outcomes {
                track(c(*p, 0.0), c(outcome_probability(&md, &sd, &plan_d, q)?, 0.0), "probability")?;
                let (post_s, _) = postselect(&ms, &ss, &plan_s, q)?;
                let (post_d, _) = postselect(&md, &sd, &plan_d, q)?;
                for d in 1..5 {
                    let (a, b) = z_odd_pair(&ms, 0, d)?;
                    let (x, y) = z_odd_pair(&md, 0, d)?;
                    let rs = connected_correlator(&post_s, &a, &b)?;
                    let rd = connected_correlator(&post_d, &x, &y)?;
                    track(rs.pair, rd.pair, "post-measurement pair")?;
                    track(rs.connected, rd.connected, "post-measurement connected")?;
                }
            }
        }
    }
    Ok(format!("{checked} expectations and probabilities on 12 qubits, max deviation {worst:.1e}"))
}

fn c10_unitarization() -> Check {
    let dims = [2usize, 2, 2];
    let mut worst = 0.0f64;
    let mut count = 0;
    for k in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        rng.set_stream(k);
        let m = if k % 2 == 0 {
            haar_unitary(8, &mut rng)
        } else {
            near_local_unitary(&dims, 2, 0.02 * (1 + k % 10) as f64, &mut rng)
        };
        let t = LocalOperator::new(vec![0, 1, 2], dims.to_vec(), m)?;
        let (_, r) = truncate_unitary(&t, &[0, 1])?;
        ensure(r.within(3.0), || format!("trial {k}: {} > 3 × {}", r.unitary_distance, r.truncation_error))?;
        if r.truncation_error > 0.0 {
            worst = worst.max(r.unitary_distance / r.truncation_error);
        }
        count += 1;
    }
    Ok(format!("{count} trials, largest ratio ‖T-T_r‖/‖T-Π(T)‖ = {worst:.3}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("cluster index", c1_index),
        ("cocycle components", c2_cocycle),
        ("string order", c3_string_order),
        ("measurement-induced order", c4_measured_lro),
        ("outcome-phase law", c5_outcome_phase),
        ("entanglement contrast", c6_contrast),
        ("projector algebra", c7_projectors),
        ("Born completeness", c8_born),
        ("cross-backend oracle", c9_cross_backend),
        ("unitarization bound", c10_unitarization),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match outcome {
            Ok(Ok(detail)) => ("PASS", detail),
            Ok(Err(e)) => ("FAIL", e.to_string()),
            Err(_) => ("FAIL", "panicked".to_string()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {:>2} {status} {name}: {detail} [{secs:.1}s]", n + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
