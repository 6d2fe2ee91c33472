//! Dense complex linear algebra over multipartite finite-dimensional spaces.
//!
//! Every vector and matrix carries the list of tensor-factor dimensions it
//! lives on. Index ordering is row-major over the factors: for dims
//! `[d0, d1, ..]` the flat index is `i0 * (d1 * ..) + i1 * (..) + ..`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Squared norms and weights at or below this value are treated as exact zeros.
pub const ZERO_TOL: f64 = 1e-12;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Numerical tolerances shared by validation, compilation and verification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm: f64,
    pub orth: f64,
    pub rank: f64,
    pub psd: f64,
    pub povm: f64,
    pub trace: f64,
    /// Acceptance threshold for induced-POVM and distribution checks.
    pub accept: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { herm: 1e-10, orth: 1e-10, rank: 1e-10, psd: 1e-10, povm: 1e-9, trace: 1e-10, accept: 1e-8 }
    }
}

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Dimension(format!("invalid factor dimensions {dims:?}")));
    }
    let product: usize = dims.iter().product();
    if product != len {
        return Err(Error::Dimension(format!(
            "factor dimensions {dims:?} have product {product}, data has length {len}"
        )));
    }
    Ok(())
}

/// Rotates `v` by a global phase so its first non-negligible component is real
/// and positive.
pub fn canonical_phase(v: &mut CVector) {
    if let Some(c) = v.iter().find(|c| c.norm() > 1e-10).copied() {
        let phase = c.conj() / c.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amps: CVector,
    dims: Vec<usize>,
}

impl Ket {
    pub fn new(amps: CVector, dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims, amps.len())?;
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("ket"));
        }
        Ok(Ket { amps, dims })
    }

    pub fn from_slice(amps: &[C64], dims: Vec<usize>) -> Result<Self> {
        Ket::new(CVector::from_column_slice(amps), dims)
    }

    pub fn from_real(amps: &[f64], dims: Vec<usize>) -> Result<Self> {
        Ket::new(CVector::from_iterator(amps.len(), amps.iter().map(|&x| C64::new(x, 0.0))), dims)
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Ket { amps: CVector::zeros(n), dims }
    }

    pub fn basis(index: usize, dims: Vec<usize>) -> Self {
        let mut k = Ket::zeros(dims);
        k.amps[index] = ONE;
        k
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn scale(&self, c: C64) -> Ket {
        Ket { amps: &self.amps * c, dims: self.dims.clone() }
    }

    pub fn add(&self, other: &Ket) -> Ket {
        Ket { amps: &self.amps + &other.amps, dims: self.dims.clone() }
    }

    pub fn normalized(&self) -> Option<Ket> {
        let n = self.amps.norm();
        (n * n > ZERO_TOL).then(|| Ket { amps: &self.amps / C64::new(n, 0.0), dims: self.dims.clone() })
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        let amps = self.amps.kronecker(&other.amps);
        let dims = self.dims.iter().chain(&other.dims).copied().collect();
        Ket { amps, dims }
    }

    /// |self⟩⟨other|
    pub fn outer(&self, other: &Ket) -> CMatrix {
        &self.amps * other.amps.adjoint()
    }

    pub fn projector(&self) -> Operator {
        Operator { mat: self.outer(self), dims: self.dims.clone() }
    }

    pub fn with_canonical_phase(mut self) -> Ket {
        canonical_phase(&mut self.amps);
        self
    }

    pub fn distance(&self, other: &Ket) -> f64 {
        (&self.amps - &other.amps).norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: CMatrix,
    dims: Vec<usize>,
}

impl Operator {
    pub fn new(mat: CMatrix, dims: Vec<usize>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Dimension(format!("operator matrix is {}x{}, not square", mat.nrows(), mat.ncols())));
        }
        check_dims(&dims, mat.nrows())?;
        if mat.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("operator"));
        }
        Ok(Operator { mat, dims })
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Operator { mat: CMatrix::identity(n, n), dims }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Operator { mat: CMatrix::zeros(n, n), dims }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn adjoint(&self) -> Operator {
        Operator { mat: self.mat.adjoint(), dims: self.dims.clone() }
    }

    pub fn scale(&self, c: f64) -> Operator {
        Operator { mat: &self.mat * C64::new(c, 0.0), dims: self.dims.clone() }
    }

    pub fn add(&self, other: &Operator) -> Operator {
        Operator { mat: &self.mat + &other.mat, dims: self.dims.clone() }
    }

    pub fn mul(&self, other: &Operator) -> Operator {
        Operator { mat: &self.mat * &other.mat, dims: self.dims.clone() }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    /// Frobenius distance to `other`.
    pub fn distance(&self, other: &Operator) -> f64 {
        (&self.mat - &other.mat).norm()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (&self.mat - self.mat.adjoint()).norm()
    }

    pub fn apply(&self, ket: &Ket) -> Ket {
        Ket { amps: &self.mat * &ket.amps, dims: self.dims.clone() }
    }

    /// Conjugation `M X M†` by a (possibly rectangular) matrix.
    pub fn conjugate_by(&self, m: &CMatrix, dims: Vec<usize>) -> Operator {
        Operator { mat: m * &self.mat * m.adjoint(), dims }
    }

    /// Re Tr(self · other)
    pub fn trace_product(&self, other: &Operator) -> f64 {
        self.mat.component_mul(&other.mat.transpose()).sum().re
    }

    pub fn tensor(&self, other: &Operator) -> Operator {
        tensor_product(self, other)
    }

    /// Square root of a positive semidefinite operator; slightly negative
    /// eigenvalues are clipped to zero.
    pub fn sqrt_psd(&self) -> Result<Operator> {
        let eig = hermitian_eig(self, &Tolerances::default())?;
        let mut mat = CMatrix::zeros(self.dim(), self.dim());
        for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
            if *lambda > 0.0 {
                mat += v.outer(v) * C64::new(lambda.sqrt(), 0.0);
            }
        }
        Ok(Operator { mat, dims: self.dims.clone() })
    }
}

pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    Operator { mat: a.mat.kronecker(&b.mat), dims: a.dims.iter().chain(&b.dims).copied().collect() }
}

#[derive(Clone, Debug)]
pub struct Eigen {
    /// Descending.
    pub values: Vec<f64>,
    pub vectors: Vec<Ket>,
}

pub fn hermitian_eig(h: &Operator, tol: &Tolerances) -> Result<Eigen> {
    let residual = h.hermiticity_residual();
    if residual > tol.herm * h.norm().max(1.0) {
        return Err(Error::NotHermitian { residual });
    }
    let sym = (&h.mat + h.mat.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            canonical_phase(&mut v);
            Ket { amps: v, dims: h.dims.clone() }
        })
        .collect();
    Ok(Eigen { values, vectors })
}

/// A finite POVM whose elements sum to `resolved` (the identity or a projector).
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<Operator>,
    labels: Vec<usize>,
    resolved: Operator,
}

impl Povm {
    pub fn new(elements: Vec<Operator>, labels: Vec<usize>, resolved: Operator, tol: &Tolerances) -> Result<Self> {
        let povm = Povm::new_unchecked(elements, labels, resolved)?;
        povm.validate(tol)?;
        Ok(povm)
    }

    /// Builds a POVM checking only shapes; positivity and completeness are
    /// left to [`Povm::validate`].
    pub fn new_unchecked(elements: Vec<Operator>, labels: Vec<usize>, resolved: Operator) -> Result<Self> {
        if elements.len() != labels.len() {
            return Err(Error::Dimension(format!("{} elements but {} labels", elements.len(), labels.len())));
        }
        if let Some(e) = elements.iter().find(|e| e.dims != resolved.dims) {
            return Err(Error::Dimension(format!(
                "element dims {:?} differ from resolved dims {:?}",
                e.dims, resolved.dims
            )));
        }
        Ok(Povm { elements, labels, resolved })
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        for (index, e) in self.elements.iter().enumerate() {
            let eig = hermitian_eig(e, tol)?;
            let min = eig.values.last().copied().unwrap_or(0.0);
            if min < -tol.psd {
                return Err(Error::NotPositive { index, eigenvalue: min });
            }
        }
        let residual = self.sum().distance(&self.resolved);
        if residual > tol.povm {
            return Err(Error::Incomplete { residual });
        }
        Ok(())
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn resolved(&self) -> &Operator {
        &self.resolved
    }

    pub fn dims(&self) -> &[usize] {
        &self.resolved.dims
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn sum(&self) -> Operator {
        self.elements.iter().fold(Operator::zeros(self.resolved.dims.clone()), |acc, e| acc.add(e))
    }

    /// Element sums grouped by label, in ascending label order.
    pub fn per_label(&self) -> std::collections::BTreeMap<usize, Operator> {
        let mut out = std::collections::BTreeMap::new();
        for (e, &l) in self.elements.iter().zip(&self.labels) {
            out.entry(l).and_modify(|acc: &mut Operator| *acc = acc.add(e)).or_insert_with(|| e.clone());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator, tol: &Tolerances) -> Result<Self> {
        let eig = hermitian_eig(&op, tol).map_err(|e| Error::InvalidState(e.to_string()))?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -tol.psd {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        Ok(DensityMatrix { op })
    }

    /// Pure state of `ket`, normalized.
    pub fn from_ket(ket: &Ket) -> Result<Self> {
        let k = ket.normalized().ok_or(Error::ZeroElement)?;
        Ok(DensityMatrix { op: k.projector() })
    }

    /// Uniform mixture.
    pub fn mixture(states: &[DensityMatrix]) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::Precondition("empty mixture".into()))?;
        let mut acc = Operator::zeros(first.op.dims.clone());
        for s in states {
            if s.op.dims != first.op.dims {
                return Err(Error::Dimension("mixture of states on different spaces".into()));
            }
            acc = acc.add(&s.op);
        }
        Ok(DensityMatrix { op: acc.scale(1.0 / states.len() as f64) })
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn dims(&self) -> &[usize] {
        &self.op.dims
    }
}

/// Splits each element into rank-one pieces by eigendecomposition.
///
/// Elements that are already rank one are passed through untouched; zero
/// elements and zero eigen-pieces are dropped. The returned label map gives
/// the original label of every refined element.
pub fn rank_one_refine(povm: &Povm, tol: &Tolerances) -> Result<(Povm, Vec<usize>)> {
    povm.validate(tol)?;
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    for (e, &label) in povm.elements.iter().zip(&povm.labels) {
        let eig = hermitian_eig(e, tol)?;
        let top = eig.values.first().copied().unwrap_or(0.0);
        if top <= ZERO_TOL {
            continue;
        }
        let second = eig.values.get(1).copied().unwrap_or(0.0);
        if second <= tol.rank * top {
            elements.push(e.clone());
            labels.push(label);
            continue;
        }
        for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
            if *lambda > ZERO_TOL {
                elements.push(v.projector().scale(*lambda));
                labels.push(label);
            }
        }
    }
    let refined = Povm::new_unchecked(elements, labels.clone(), povm.resolved.clone())?;
    Ok((refined, labels))
}

fn split_alice_dims(dims: &[usize], alice_dim: usize) -> Result<(Vec<usize>, usize)> {
    if dims.first() != Some(&alice_dim) {
        return Err(Error::Dimension(format!("first factor of {dims:?} is not the Alice dimension {alice_dim}")));
    }
    if alice_dim == 2 {
        return Ok((dims.to_vec(), 0));
    }
    let padded = alice_dim + alice_dim % 2;
    let rest: usize = dims[1..].iter().product();
    let mut out = vec![2, padded / 2];
    out.extend_from_slice(&dims[1..]);
    Ok((out, (padded - alice_dim) * rest))
}

/// Target dims after padding an odd Alice factor and splitting it as `2 ⊗ (d/2)`.
pub fn split_alice_target(dims: &[usize]) -> Result<Vec<usize>> {
    let alice = *dims.first().ok_or_else(|| Error::Dimension("empty dims".into()))?;
    Ok(split_alice_dims(dims, alice)?.0)
}

/// Pads an odd Alice factor with one extra basis vector (appended last, zero
/// rows and columns) and reindexes it as `2 ⊗ (padded/2)`.
///
/// The flat index is unchanged by the split, so the matrix only grows by the
/// padding block.
pub fn pad_and_split_alice(op: &Operator, alice_dim: usize) -> Result<Operator> {
    let (dims, extra) = split_alice_dims(&op.dims, alice_dim)?;
    let n = op.dim();
    let mut mat = CMatrix::zeros(n + extra, n + extra);
    mat.view_mut((0, 0), (n, n)).copy_from(&op.mat);
    Ok(Operator { mat, dims })
}

pub fn pad_and_split_alice_ket(ket: &Ket, alice_dim: usize) -> Result<Ket> {
    let (dims, extra) = split_alice_dims(&ket.dims, alice_dim)?;
    let mut amps = CVector::zeros(ket.len() + extra);
    amps.rows_mut(0, ket.len()).copy_from(&ket.amps);
    Ok(Ket { amps, dims })
}

/// The zero-padding isometry `C^n_in → C^n_out` (first `n_in` columns of the identity).
pub fn padding_isometry(n_in: usize, n_out: usize) -> CMatrix {
    CMatrix::from_fn(n_out, n_in, |i, j| if i == j { ONE } else { ZERO })
}

pub(crate) fn check_orthonormal_pair(a: &Ket, b: &Ket, tol: &Tolerances) -> Result<()> {
    let residual = (a.norm_sqr() - 1.0).abs().max((b.norm_sqr() - 1.0).abs()).max(a.inner(b).norm());
    if residual > tol.orth {
        return Err(Error::NotOrthonormal { residual });
    }
    Ok(())
}

/// Bob-side blocks of `v` with respect to an Alice ONB: `v = |0⟩_A b0 + |1⟩_A b1`.
pub fn alice_blocks(v: &Ket, alice_onb: [&Ket; 2], tol: &Tolerances) -> Result<(Ket, Ket)> {
    if v.dims.first() != Some(&2) || v.dims.len() < 2 {
        return Err(Error::Dimension(format!("ket dims {:?} have no two-dimensional Alice factor", v.dims)));
    }
    for a in alice_onb {
        if a.dims != [2] {
            return Err(Error::Dimension(format!("Alice basis vector has dims {:?}", a.dims)));
        }
    }
    check_orthonormal_pair(alice_onb[0], alice_onb[1], tol)?;
    let bob_dims = v.dims[1..].to_vec();
    let r = v.len() / 2;
    let block = |a: &Ket| {
        let amps = v.amps.rows(0, r) * a.amps[0].conj() + v.amps.rows(r, r) * a.amps[1].conj();
        Ket { amps, dims: bob_dims.clone() }
    };
    Ok((block(alice_onb[0]), block(alice_onb[1])))
}

/// Inverse of [`alice_blocks`]: `|0⟩_A b0 + |1⟩_A b1`.
pub fn assemble_alice_blocks(alice_onb: [&Ket; 2], b0: &Ket, b1: &Ket) -> Ket {
    alice_onb[0].tensor(b0).add(&alice_onb[1].tensor(b1))
}

/// x⁻: the reciprocal for nonzero `x`, zero otherwise.
pub fn pseudo_reciprocal(x: f64) -> f64 {
    if x.abs() > ZERO_TOL {
        1.0 / x
    } else {
        0.0
    }
}
