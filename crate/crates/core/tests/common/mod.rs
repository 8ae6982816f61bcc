#![allow(dead_code)]

use qml::algebra::{ComplexScalar, Ket, Operator, SpaceShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> ComplexScalar {
    ComplexScalar::new(re, im)
}

pub fn random_amps(rng: &mut ChaCha8Rng, n: usize) -> Vec<ComplexScalar> {
    (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

pub fn random_ket(rng: &mut ChaCha8Rng, dims: &[usize]) -> Ket {
    let shape = SpaceShape::new(dims.to_vec()).unwrap();
    loop {
        let k = Ket::new(shape.clone(), random_amps(rng, shape.total())).unwrap();
        if k.norm() > 0.1 {
            return k;
        }
    }
}

/// Random unitary by Gram-Schmidt on random columns.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> Operator {
    let mut cols: Vec<Vec<ComplexScalar>> = Vec::new();
    while cols.len() < dim {
        let mut v = random_amps(rng, dim);
        for q in &cols {
            let proj: ComplexScalar = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(q) {
                *x -= proj * y;
            }
        }
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-3 {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let entries = (0..dim * dim).map(|k| cols[k % dim][k / dim]).collect();
    Operator::new(dim, entries, 1e-9).unwrap()
}

pub fn norm(v: &[ComplexScalar]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(a: &[ComplexScalar], b: &[ComplexScalar]) -> ComplexScalar {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Same ray up to the relative tolerance: |<a|b>| >= (1 - tol)|a||b|.
pub fn same_ray(a: &[ComplexScalar], b: &[ComplexScalar], tol: f64) -> bool {
    a.len() == b.len() && norm(a) > 0.0 && norm(b) > 0.0 && dot(a, b).norm() >= (1.0 - tol) * norm(a) * norm(b)
}

pub fn kron(a: &[ComplexScalar], b: &[ComplexScalar]) -> Vec<ComplexScalar> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

pub fn scenario(name: &str) -> String {
    let path = format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub const CORPUS: [&str; 7] = [
    "teleport.qml",
    "teleport_entangled.qml",
    "epr.qml",
    "hardy_prefix.qml",
    "hardy_blocked.qml",
    "underdetermined.qml",
    "faults/impossible_outcome.qml",
];
