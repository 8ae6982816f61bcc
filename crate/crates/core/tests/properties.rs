mod common;

use common::*;
use proptest::prelude::*;
use qml::algebra::{apply_operator_on, factorize, partial_apply, tensor, Ket};
use qml::logic::{canonicalize_parts, make_observable};
use qml::{HandleId, Observable};

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=3, 1..=3)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn contraction_matches_full_inner_product(seed: u64, d1 in 2usize..=3, d2 in 2usize..=3) {
        let mut r = rng(seed);
        let psi = random_ket(&mut r, &[d1, d2]);
        let f1 = random_ket(&mut r, &[d1]);
        let f2 = random_ket(&mut r, &[d2]);
        let lhs = dot(psi.amps(), &kron(f1.amps(), f2.amps()));
        let rhs = dot(partial_apply(&[0], &f1, &psi).unwrap().amps(), f2.amps());
        prop_assert!((lhs - rhs).norm() <= 1e-9 * psi.norm() * f1.norm() * f2.norm());
    }

    #[test]
    fn contraction_is_antilinear_in_the_fixed_factor(seed: u64, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let mut r = rng(seed);
        let psi = random_ket(&mut r, &[2, 3]);
        let f = random_ket(&mut r, &[2]);
        let g = random_ket(&mut r, &[2]);
        let a = c(re, im);
        let combo = f.scale(a).add(&g).unwrap();
        let lhs = partial_apply(&[0], &combo, &psi).unwrap();
        let pf = partial_apply(&[0], &f, &psi).unwrap();
        let pg = partial_apply(&[0], &g, &psi).unwrap();
        let rhs = pf.scale(a.conj()).add(&pg).unwrap();
        for (x, y) in lhs.amps().iter().zip(rhs.amps()) {
            prop_assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn canonical_form_ignores_subject_order(seed: u64, ds in dims()) {
        let mut r = rng(seed);
        let n = ds.len();
        let psi = random_ket(&mut r, &ds);
        let ids: Vec<HandleId> = (0..n as u32).map(|k| HandleId(10 - 3 * k)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(seed as usize % n);
        let shuffled_ids: Vec<HandleId> = perm.iter().map(|&k| ids[k]).collect();
        let shuffled = psi.permute_factors(&perm).unwrap();
        let (s1, v1) = canonicalize_parts(&ids, &psi).unwrap();
        let (s2, v2) = canonicalize_parts(&shuffled_ids, &shuffled).unwrap();
        prop_assert_eq!(&s1, &s2);
        prop_assert!(s1.windows(2).all(|w| w[0] < w[1]));
        for (x, y) in v1.amps().iter().zip(v2.amps()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn observable_survives_json(seed: u64, dim in 2usize..=4) {
        let mut r = rng(seed);
        let u = random_unitary(&mut r, dim);
        let basis = (0..dim)
            .map(|j| Ket::from_amps((0..dim).map(|i| u.get(i, j)).collect()).unwrap())
            .collect();
        let obs = make_observable(basis, 1e-9).unwrap();
        let text = serde_json::to_string(&obs).unwrap();
        let back: Observable = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(obs, back);
    }

    #[test]
    fn unitaries_preserve_norm(seed: u64, ds in dims()) {
        let mut r = rng(seed);
        let psi = random_ket(&mut r, &ds);
        let at = seed as usize % ds.len();
        let u = random_unitary(&mut r, ds[at]);
        let out = apply_operator_on(&u, &psi, &[at]).unwrap();
        prop_assert!((out.norm() - psi.norm()).abs() < 1e-9);
    }

    #[test]
    fn products_factor_back(seed: u64, da in dims(), db in dims()) {
        let mut r = rng(seed);
        let a = random_ket(&mut r, &da);
        let b = random_ket(&mut r, &db);
        let joint = tensor(&a, &b);
        let left: Vec<usize> = (0..da.len()).collect();
        let (fa, fb) = factorize(&joint, &left, 1e-9, 1e-12).unwrap().expect("product state");
        prop_assert!(same_ray(fa.amps(), a.amps(), 1e-9));
        prop_assert!(same_ray(fb.amps(), b.amps(), 1e-9));
    }
}
