//! The two-dimensional subspace spanned by the input states, and rank-one
//! elements expressed in its coordinates.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::tensor::{
    canonical_phase, check_orthonormal_pair, hermitian_eig, CMatrix, CVector, DensityMatrix, Ket, Operator, Tolerances,
    C64, ZERO_TOL,
};

/// Orthonormal pair `(π, π⊥)` and the projector `P = ππ† + π⊥π⊥†`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoDimSubspace {
    pi: Ket,
    pi_perp: Ket,
    projector: Operator,
}

impl TwoDimSubspace {
    pub fn from_orthonormal(pi: Ket, pi_perp: Ket, tol: &Tolerances) -> Result<Self> {
        if pi.dims() != pi_perp.dims() {
            return Err(Error::Dimension("basis kets live on different spaces".into()));
        }
        check_orthonormal_pair(&pi, &pi_perp, tol)?;
        let projector = pi.projector().add(&pi_perp.projector());
        Ok(TwoDimSubspace { pi, pi_perp, projector })
    }

    pub fn pi(&self) -> &Ket {
        &self.pi
    }

    pub fn pi_perp(&self) -> &Ket {
        &self.pi_perp
    }

    pub fn projector(&self) -> &Operator {
        &self.projector
    }

    pub fn dims(&self) -> &[usize] {
        self.pi.dims()
    }

    /// The `n × 2` isometry with columns `π, π⊥`.
    pub fn isometry(&self) -> CMatrix {
        CMatrix::from_columns(&[self.pi.amplitudes().clone(), self.pi_perp.amplitudes().clone()])
    }

    pub fn ket_from_coords(&self, coords: [C64; 2]) -> Ket {
        self.pi.scale(coords[0]).add(&self.pi_perp.scale(coords[1]))
    }

    /// `V† X V` as a 2×2 matrix in the `(π, π⊥)` basis.
    pub fn compress(&self, op: &Operator) -> Matrix2<C64> {
        let v = self.isometry();
        let c = v.adjoint() * op.matrix() * &v;
        Matrix2::new(c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)])
    }

    /// `P X P` on the full space.
    pub fn sandwich(&self, op: &Operator) -> Operator {
        let p = self.projector.matrix();
        Operator::new(p * op.matrix() * p, op.dims().to_vec()).expect("same shape")
    }

    /// Frobenius norm of the part of `op` outside `P · P`.
    pub fn leak(&self, op: &Operator) -> f64 {
        op.distance(&self.sandwich(op))
    }

    /// Same subspace with the basis rotated so that `π` becomes the unit
    /// vector `direction` (given in the current `(π, π⊥)` coordinates).
    pub fn rotated(&self, direction: [C64; 2]) -> TwoDimSubspace {
        let pi = self.ket_from_coords(direction);
        let pi_perp = self.ket_from_coords([-direction[1].conj(), direction[0].conj()]);
        let projector = pi.projector().add(&pi_perp.projector());
        TwoDimSubspace { pi, pi_perp, projector }
    }
}

/// `Π = γ |u⟩⟨u|` with `|u⟩` given in `(π, π⊥)` coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubspaceCoords {
    pub gamma: f64,
    pub direction: [C64; 2],
}

fn span_of(ops: impl Iterator<Item = Operator>, tol: &Tolerances) -> Result<TwoDimSubspace> {
    let mut total: Option<Operator> = None;
    for op in ops {
        total = Some(match total {
            None => op,
            Some(acc) => {
                if acc.dims() != op.dims() {
                    return Err(Error::Dimension("states live on different spaces".into()));
                }
                acc.add(&op)
            }
        });
    }
    let total = total.ok_or_else(|| Error::Precondition("no input states".into()))?;
    let eig = hermitian_eig(&total, tol)?;
    let top = eig.values[0].max(0.0);
    let rank = eig.values.iter().filter(|&&l| l > tol.rank * top.max(ZERO_TOL)).count();
    if rank != 2 {
        return Err(Error::SubspaceRank { rank });
    }
    TwoDimSubspace::from_orthonormal(eig.vectors[0].clone(), eig.vectors[1].clone(), tol)
}

/// Orthonormal basis of the joint support of the given density matrices.
pub fn span_states(states: &[DensityMatrix], tol: &Tolerances) -> Result<TwoDimSubspace> {
    span_of(states.iter().map(|s| s.operator().clone()), tol)
}

pub fn span_kets(kets: &[Ket], tol: &Tolerances) -> Result<TwoDimSubspace> {
    span_of(kets.iter().map(|k| k.projector()), tol)
}

pub fn to_subspace_coords(element: &Operator, sub: &TwoDimSubspace, tol: &Tolerances) -> Result<SubspaceCoords> {
    if element.dims() != sub.dims() {
        return Err(Error::Dimension(format!(
            "element dims {:?} differ from subspace dims {:?}",
            element.dims(),
            sub.dims()
        )));
    }
    let leak = sub.leak(element);
    if leak > tol.rank {
        return Err(Error::SupportLeak { leak });
    }
    let c = sub.compress(element);
    let c = Operator::new(CMatrix::from_fn(2, 2, |i, j| c[(i, j)]), vec![2])?;
    let eig = hermitian_eig(&c, tol)?;
    let (top, second) = (eig.values[0], eig.values[1]);
    if top <= ZERO_TOL {
        return Err(Error::ZeroElement);
    }
    if second > tol.rank * top {
        return Err(Error::RankTooHigh { second });
    }
    if top > 1.0 + tol.povm {
        return Err(Error::Precondition(format!("element weight {top} exceeds 1")));
    }
    let mut dir = CVector::from_column_slice(&[eig.vectors[0].amplitudes()[0], eig.vectors[0].amplitudes()[1]]);
    canonical_phase(&mut dir);
    Ok(SubspaceCoords { gamma: top.min(1.0), direction: [dir[0], dir[1]] })
}
