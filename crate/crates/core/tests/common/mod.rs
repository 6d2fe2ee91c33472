//! Random instance generators and reference computations shared by the
//! integration tests. The references use plain loops or nalgebra directly
//! rather than the library's own helpers.

#![allow(dead_code)]

use locc2d_core::tensor::{CMatrix, CVector, Ket, Operator, Povm, Tolerances, C64};
use locc2d_core::{DensityMatrix, TwoDimSubspace};
use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn gaussian(rng: &mut impl Rng) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| gaussian(rng))
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
    let a = random_matrix(rng, n, n);
    (&a + a.adjoint()) * c(0.5, 0.0)
}

pub fn random_ket(rng: &mut impl Rng, dims: &[usize]) -> Ket {
    let n = dims.iter().product();
    Ket::new(random_vector(rng, n).normalize(), dims.to_vec()).unwrap()
}

/// Random unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    random_matrix(rng, n, n).qr().q()
}

/// Orthonormal pair by explicit Gram-Schmidt.
pub fn random_subspace(rng: &mut impl Rng, dims: &[usize]) -> TwoDimSubspace {
    let n = dims.iter().product();
    let a = random_vector(rng, n).normalize();
    let b = random_vector(rng, n);
    let b = (&b - &a * a.dotc(&b)).normalize();
    TwoDimSubspace::from_orthonormal(
        Ket::new(a, dims.to_vec()).unwrap(),
        Ket::new(b, dims.to_vec()).unwrap(),
        &Tolerances::default(),
    )
    .unwrap()
}

/// `h^{-1/2}` for a positive definite `h`, via nalgebra's own eigensolver.
pub fn inverse_sqrt(h: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| c(1.0 / l.sqrt(), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// POVM on `C²` whose element `j` has rank `ranks[j]`: `G^{-1/2} X_j X_j† G^{-1/2}`.
pub fn random_qubit_povm(rng: &mut impl Rng, ranks: &[usize]) -> Vec<CMatrix> {
    let raw: Vec<CMatrix> = ranks
        .iter()
        .map(|&r| {
            let x = random_matrix(rng, 2, r);
            &x * x.adjoint()
        })
        .collect();
    let g = raw.iter().fold(CMatrix::zeros(2, 2), |acc, a| acc + a);
    let gi = inverse_sqrt(&g);
    raw.iter().map(|a| &gi * a * &gi).collect()
}

/// Lifts 2×2 elements onto `sub` through its isometry.
pub fn lift(sub: &TwoDimSubspace, elements: &[CMatrix], labels: Vec<usize>) -> Povm {
    let v = sub.isometry();
    let ops = elements.iter().map(|e| Operator::new(&v * e * v.adjoint(), sub.dims().to_vec()).unwrap()).collect();
    Povm::new(ops, labels, sub.projector().clone(), &Tolerances::default()).unwrap()
}

/// Random rank-one POVM with `m` elements on `sub`, labels `1..=m`.
pub fn random_rank_one_povm(rng: &mut impl Rng, sub: &TwoDimSubspace, m: usize) -> Povm {
    let elements = random_qubit_povm(rng, &vec![1; m]);
    lift(sub, &elements, (1..=m).collect())
}

/// Random POVM whose rank-one refinement has exactly `m` pieces: some
/// elements have rank two.
pub fn random_refinable_povm(rng: &mut impl Rng, sub: &TwoDimSubspace, m: usize) -> Povm {
    let mut ranks = Vec::new();
    let mut left = m;
    while left > 0 {
        let r = if left >= 2 && rng.random_bool(0.4) { 2 } else { 1 };
        ranks.push(r);
        left -= r;
    }
    if ranks.len() < 2 {
        ranks = vec![1; m];
    }
    let elements = random_qubit_povm(rng, &ranks);
    lift(sub, &elements, (1..=ranks.len()).collect())
}

/// Random density matrix supported on `sub`.
pub fn random_state_on(rng: &mut impl Rng, sub: &TwoDimSubspace) -> DensityMatrix {
    let x = random_matrix(rng, 2, 2);
    let r = &x * x.adjoint();
    let tr = r.trace();
    let v = sub.isometry();
    let op = Operator::new(&v * (r / tr) * v.adjoint(), sub.dims().to_vec()).unwrap();
    DensityMatrix::new(op, &Tolerances::default()).unwrap()
}

/// `ππ†`, `π⊥π⊥†`, and the projectors onto `(π ± ..)/√2` combinations:
/// four density operators spanning the Hermitian operators on `sub`.
pub fn basis_states(sub: &TwoDimSubspace) -> Vec<DensityMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let kets = [
        sub.pi().clone(),
        sub.pi_perp().clone(),
        sub.ket_from_coords([c(s, 0.0), c(s, 0.0)]),
        sub.ket_from_coords([c(s, 0.0), c(0.0, s)]),
    ];
    kets.iter().map(|k| DensityMatrix::from_ket(k).unwrap()).collect()
}

/// `Tr(ρ E)` by explicit summation.
pub fn born(rho: &Operator, e: &Operator) -> f64 {
    let (r, m) = (rho.matrix(), e.matrix());
    let n = r.nrows();
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += r[(i, j)] * m[(j, i)];
        }
    }
    acc.re
}

/// Frobenius distance by explicit summation.
pub fn frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Largest per-label Frobenius distance between two POVMs.
pub fn max_label_distance(a: &Povm, b: &Povm) -> f64 {
    let (pa, pb) = (a.per_label(), b.per_label());
    pa.keys()
        .chain(pb.keys())
        .map(|l| match (pa.get(l), pb.get(l)) {
            (Some(x), Some(y)) => frobenius(x.matrix(), y.matrix()),
            (Some(x), None) | (None, Some(x)) => x.norm(),
            (None, None) => 0.0,
        })
        .fold(0.0, f64::max)
}
