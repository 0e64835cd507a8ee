use num_complex::Complex64 as C64;
use proptest::prelude::*;

use spt_core::correlators::{plan_endpoints, LroProbe};
use spt_core::dense::LocalOperator;
use spt_core::group::{charge_projector, CellOperator, FiniteAbelianGroup, GroupElement, OnSiteRepresentation};
use spt_core::measurement::{block_projector, sample_seeded, MeasurementPlan};
use spt_core::model::{
    build_cluster_qubit, build_cluster_qubit_with, extract_w, sigma_at, string_order, Boundary, ChainOperator, ModelOptions, Side,
};
use spt_core::pauli::PauliString;

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn group_and_pair() -> impl Strategy<Value = (Vec<u32>, Vec<u32>, Vec<u32>, Vec<u32>)> {
    prop::collection::vec(2u32..6, 1..4).prop_flat_map(|moduli| {
        let el = moduli.iter().map(|&m| 0..m).collect::<Vec<_>>();
        (Just(moduli), el.clone(), el.clone(), el)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn characters_are_homomorphisms((moduli, q, a, b) in group_and_pair()) {
        let g = FiniteAbelianGroup::new(moduli).unwrap();
        let (q, a, b) = (GroupElement(q), GroupElement(a), GroupElement(b));
        let lhs = g.character_value(&q, &g.add(&a, &b)).unwrap();
        let rhs = g.character_value(&q, &a).unwrap() * g.character_value(&q, &b).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
        prop_assert!((lhs.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projectors_commute_with_the_group(x in 0usize..3, z in 0usize..3) {
        // Z2 × Z2 generated by commuting cell Paulis
        let gens = [("IX", "XI"), ("ZZ", "XX"), ("XI", "IZ")];
        let (a, b) = gens[x];
        let rep = OnSiteRepresentation::from_generators(
            FiniteAbelianGroup::new(vec![2, 2]).unwrap(),
            vec![CellOperator::Pauli(a.parse().unwrap()), CellOperator::Pauli(b.parse().unwrap())],
        ).unwrap();
        let q = rep.group().element_at(z);
        let p = charge_projector(&rep, &q).unwrap();
        for g in rep.group().elements() {
            let u = rep.dense(&g);
            let comm = &u * &p - &p * &u;
            prop_assert!(comm.iter().all(|c| c.norm() < 1e-12));
        }
    }

    #[test]
    fn sigma_does_not_depend_on_the_cut(n in 20usize..50, offset in 0usize..20) {
        let (m, s) = build_cluster_qubit(n).unwrap();
        let cuts = m.bulk_cuts();
        let j = cuts[offset % (cuts.len() - 2)];
        for a in m.group().elements() {
            for b in m.group().elements() {
                prop_assert_eq!(sigma_at(&m, &s, &a, &b, j).unwrap(), sigma_at(&m, &s, &a, &b, j + 2).unwrap());
            }
        }
    }

    #[test]
    fn measured_subgroup_has_trivial_index(n in 12usize..40) {
        let (m, s) = build_cluster_qubit(n).unwrap();
        let j = m.bulk_cuts()[0];
        let g = m.element(1, 0).unwrap();
        let e = m.element(0, 0).unwrap();
        for (a, b) in [(&g, &g), (&g, &e), (&e, &g)] {
            prop_assert_eq!(sigma_at(&m, &s, a, b, j).unwrap(), one());
        }
    }

    #[test]
    fn boundary_operators_are_local_and_reproduce_the_defect(n in 10usize..40, pick in 0usize..100, site_off in 0usize..6, letter in 0usize..3) {
        let (m, s) = build_cluster_qubit(n).unwrap();
        let cuts = m.bulk_cuts();
        let j = cuts[pick % cuts.len()];
        let nr = m.radius();
        for e in m.group().elements() {
            for side in [Side::Left, Side::Right] {
                let w = extract_w(&m, &s, &e, j, side).unwrap();
                let cells: Vec<usize> = w.operator.support().into_iter().map(|x| m.cell_of(x)).collect();
                prop_assert!(cells.iter().all(|&c| c + nr >= j && c <= j + nr), "{:?} around {}", cells, j);
                let u = m.half_chain_symmetry(&e, j, side).unwrap();
                let site = (2 * j + site_off).saturating_sub(3).min(m.n_sites() - 1);
                let a = ChainOperator::Pauli(PauliString::single(m.n_sites(), site, ['X', 'Y', 'Z'][letter]));
                let lhs = s.expectation(&u.adjoint().mul(&a).unwrap().mul(&u).unwrap()).unwrap();
                let rhs = s.expectation(&w.operator.adjoint().mul(&a).unwrap().mul(&w.operator).unwrap()).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn string_order_has_unit_modulus(n in 10usize..60, a in 0usize..100, b in 0usize..100) {
        let (m, s) = build_cluster_qubit(n).unwrap();
        let cuts = m.bulk_cuts();
        let (i, j) = (cuts[a % cuts.len()], cuts[b % cuts.len()]);
        prop_assume!(i < j);
        for e in m.group().elements() {
            prop_assert_eq!(string_order(&m, &s, &e, i, j).unwrap().norm(), 1.0);
        }
    }

    #[test]
    fn measurement_keeps_the_ring_symmetric(n in 9usize..30, seed in any::<u64>()) {
        let opts = ModelOptions::default().with_boundary(Boundary::Periodic);
        let (m, s) = build_cluster_qubit_with(n, opts).unwrap();
        let plan = MeasurementPlan::lattice(&m, 1, 0, n - 1).unwrap();
        let (post, _) = sample_seeded(&m, &s, &plan, seed, 0).unwrap();
        for e in m.group().elements().into_iter().filter(|e| e.h.0[0] == 0) {
            let u = m.global_symmetry(&e).unwrap();
            prop_assert_eq!(post.expectation(&u).unwrap(), one());
        }
    }

    #[test]
    fn nested_regions_keep_the_endpoints(seed in any::<u64>(), n in 1usize..4) {
        let (m, s) = build_cluster_qubit(60).unwrap();
        let g = m.element(1, 0).unwrap();
        let small = MeasurementPlan::centered(&m, 1, n).unwrap();
        let large = MeasurementPlan::centered(&m, 1, n + 1).unwrap();
        let (i, j) = plan_endpoints(&m, &small).unwrap();
        let probe = LroProbe::new(&m, &s, &g, i, j).unwrap();
        for plan in [&small, &large] {
            let (post, rec) = sample_seeded(&m, &s, plan, seed, 0).unwrap();
            let r = probe.evaluate(&post, plan, &rec).unwrap();
            prop_assert_eq!(r.connected.norm(), 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn block_projectors_commute(order in Just(vec![1usize, 4]).prop_shuffle(), q in prop::collection::vec(0u32..2, 2)) {
        let (m, s) = build_cluster_qubit_with(6, ModelOptions::dense()).unwrap();
        let psi = s.as_dense().unwrap();
        let plan = MeasurementPlan::new(&m, 1, vec![1, 4]).unwrap();
        let proj = |k: usize| -> LocalOperator {
            let idx = if k == 1 { 0 } else { 1 };
            block_projector(&m, &plan, k, &GroupElement(vec![q[idx]])).unwrap()
        };
        let apply = |ks: &[usize]| {
            let mut st = psi.clone();
            for &k in ks {
                st = st.applied(&proj(k)).unwrap();
            }
            st
        };
        let a = apply(&order);
        let b = apply(&[order[1], order[0]]);
        let diff: f64 = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
    }
}
