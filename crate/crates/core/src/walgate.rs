//! Walgate-form decomposition of an orthonormal pair on a `2 ⊗ N` space:
//!
//! ```text
//! |π⟩  = |0⟩_A |η_0⟩ + |1⟩_A |η_1⟩
//! |π⊥⟩ = |0⟩_A |ν_0⟩ + |1⟩_A |ν_1⟩      with ⟨η_k|ν_k⟩ = 0
//! ```
//!
//! For an Alice vector `|c⟩`, the Bob blocks are `⟨c|π⟩ = Σ_a d_a x_a` and
//! `⟨c|π⊥⟩ = Σ_a d_a y_a` with `d = conj(c)` and `x_a, y_a` the blocks in
//! the computational basis. Orthogonality of the blocks is `d† M d = 0` with
//! `M_kl = ⟨x_k|y_l⟩`. Since `Tr M = ⟨π|π⊥⟩ = 0`, writing
//! `M = H + iK` with traceless Hermitian `H = a·σ`, `K = b·σ` turns the
//! condition into `a·r = b·r = 0` for the Bloch vector `r` of `d`, which is
//! solved exactly by a unit vector orthogonal to `span(a, b)`.

use nalgebra::{Matrix2, Vector3};

use crate::error::{Error, Result};
use crate::subspace::{SubspaceCoords, TwoDimSubspace};
use crate::tensor::{alice_blocks, assemble_alice_blocks, CVector, Ket, Tolerances, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct WalgateDecomposition {
    /// The pair being decomposed.
    pub pi: Ket,
    pub pi_perp: Ket,
    pub alice_onb: [Ket; 2],
    pub eta: [Ket; 2],
    pub nu: [Ket; 2],
    pub eta_norms: [f64; 2],
    pub nu_norms: [f64; 2],
}

impl WalgateDecomposition {
    fn from_basis(pi: Ket, pi_perp: Ket, alice_onb: [Ket; 2], tol: &Tolerances) -> Result<Self> {
        let (eta0, eta1) = alice_blocks(&pi, [&alice_onb[0], &alice_onb[1]], tol)?;
        let (nu0, nu1) = alice_blocks(&pi_perp, [&alice_onb[0], &alice_onb[1]], tol)?;
        let eta_norms = [eta0.norm_sqr(), eta1.norm_sqr()];
        let nu_norms = [nu0.norm_sqr(), nu1.norm_sqr()];
        Ok(WalgateDecomposition { pi, pi_perp, alice_onb, eta: [eta0, eta1], nu: [nu0, nu1], eta_norms, nu_norms })
    }

    pub fn bob_dims(&self) -> &[usize] {
        self.eta[0].dims()
    }

    /// `|⟨η_k|ν_k⟩|` for k = 0, 1.
    pub fn orthogonality_residuals(&self) -> [f64; 2] {
        [self.eta[0].inner(&self.nu[0]).norm(), self.eta[1].inner(&self.nu[1]).norm()]
    }

    /// `|η_0 + η_1 − 1|` and `|ν_0 + ν_1 − 1|`.
    pub fn norm_sum_residuals(&self) -> [f64; 2] {
        [(self.eta_norms[0] + self.eta_norms[1] - 1.0).abs(), (self.nu_norms[0] + self.nu_norms[1] - 1.0).abs()]
    }

    /// Reassembles `(π, π⊥)` from the blocks.
    pub fn reassemble(&self) -> (Ket, Ket) {
        let onb = [&self.alice_onb[0], &self.alice_onb[1]];
        (assemble_alice_blocks(onb, &self.eta[0], &self.eta[1]), assemble_alice_blocks(onb, &self.nu[0], &self.nu[1]))
    }
}

fn bloch(h: &Matrix2<C64>) -> Vector3<f64> {
    Vector3::new(h[(0, 1)].re, -h[(0, 1)].im, 0.5 * (h[(0, 0)].re - h[(1, 1)].re))
}

/// Unit vector orthogonal to both `a` and `b`.
fn common_normal(a: Vector3<f64>, b: Vector3<f64>) -> Vector3<f64> {
    const TINY: f64 = 1e-13;
    let (big, small) = if a.norm() >= b.norm() { (a, b) } else { (b, a) };
    if big.norm() <= TINY {
        return Vector3::z();
    }
    let e1 = big / big.norm();
    let rest = small - e1 * small.dot(&e1);
    if rest.norm() > TINY {
        return e1.cross(&(rest / rest.norm()));
    }
    for axis in [Vector3::z(), Vector3::x()] {
        let r = axis - e1 * axis.dot(&e1);
        if r.norm() > 1e-6 {
            return r / r.norm();
        }
    }
    unreachable!("z and x cannot both be parallel to a unit vector")
}

/// Alice vector `|c⟩ = conj(d)` for the state `d` with Bloch vector `r`.
fn alice_vector(r: Vector3<f64>) -> Ket {
    let rz = r.z.clamp(-1.0, 1.0);
    let (cos_t, sin_t) = (((1.0 + rz) / 2.0).sqrt(), ((1.0 - rz) / 2.0).sqrt());
    let phi = r.y.atan2(r.x);
    let d1 = C64::from_polar(sin_t, phi);
    Ket::new(CVector::from_column_slice(&[C64::new(cos_t, 0.0), d1.conj()]), vec![2])
        .expect("two amplitudes")
        .with_canonical_phase()
}

fn orthogonal_alice_vector(c: &Ket) -> Ket {
    let a = c.amplitudes();
    Ket::new(CVector::from_column_slice(&[-a[1].conj(), a[0].conj()]), vec![2])
        .expect("two amplitudes")
        .with_canonical_phase()
}

/// Decomposes the subspace basis with `π` aligned to `coords.direction`.
pub fn walgate_basis(sub: &TwoDimSubspace, coords: &SubspaceCoords, tol: &Tolerances) -> Result<WalgateDecomposition> {
    if sub.dims().first() != Some(&2) || sub.dims().len() < 2 {
        return Err(Error::Precondition(format!(
            "Walgate decomposition needs a two-dimensional Alice factor, got dims {:?}",
            sub.dims()
        )));
    }
    let rotated = sub.rotated(coords.direction);
    let pi = rotated.pi().clone();
    let pi_perp = rotated.pi_perp().clone();

    let n = pi.len() / 2;
    let x = [pi.amplitudes().rows(0, n), pi.amplitudes().rows(n, n)];
    let y = [pi_perp.amplitudes().rows(0, n), pi_perp.amplitudes().rows(n, n)];
    let m = Matrix2::from_fn(|k, l| x[k].dotc(&y[l]));
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let k = (m - m.adjoint()) * C64::new(0.0, -0.5);
    let r = common_normal(bloch(&h), bloch(&k));

    let c0 = alice_vector(r);
    let c1 = orthogonal_alice_vector(&c0);
    let mut dec = WalgateDecomposition::from_basis(pi, pi_perp, [c0, c1], tol)?;
    if dec.eta_norms[0] < dec.nu_norms[0] {
        let [c0, c1] = dec.alice_onb;
        dec = WalgateDecomposition::from_basis(dec.pi, dec.pi_perp, [c1, c0], tol)?;
    }
    let residual = dec.orthogonality_residuals().into_iter().fold(0.0, f64::max);
    if residual > tol.orth {
        return Err(Error::WalgateFailed { residual });
    }
    Ok(dec)
}

/// Transports a decomposition through the ancilla coupling.
///
/// The new Alice factor is the ancilla with basis `{s_0, s_1}`; the new Bob
/// factor is the old `Alice ⊗ Bob`. With `|0⟩, |1⟩` the old Alice basis:
///
/// ```text
/// η̃_0 = sinθ |0⟩η_0        η̃_1 = cosθ |0⟩η_0 + |1⟩η_1
/// ```
///
/// and likewise for `ν`. The returned `pi`/`pi_perp` live on `S ⊗ A ⊗ B`.
pub fn extend_decomposition(dec: &WalgateDecomposition, theta: f64) -> WalgateDecomposition {
    let (s, c) = theta.sin_cos();
    let a0 = &dec.alice_onb[0];
    let a1 = &dec.alice_onb[1];
    let extend = |v: &[Ket; 2]| -> [Ket; 2] {
        let head = a0.tensor(&v[0]);
        [head.scale(C64::new(s, 0.0)), head.scale(C64::new(c, 0.0)).add(&a1.tensor(&v[1]))]
    };
    let eta = extend(&dec.eta);
    let nu = extend(&dec.nu);
    let alice_onb = [Ket::basis(0, vec![2]), Ket::basis(1, vec![2])];
    let pi = assemble_alice_blocks([&alice_onb[0], &alice_onb[1]], &eta[0], &eta[1]);
    let pi_perp = assemble_alice_blocks([&alice_onb[0], &alice_onb[1]], &nu[0], &nu[1]);
    let eta_norms = [eta[0].norm_sqr(), eta[1].norm_sqr()];
    let nu_norms = [nu[0].norm_sqr(), nu[1].norm_sqr()];
    WalgateDecomposition { pi, pi_perp, alice_onb, eta, nu, eta_norms, nu_norms }
}
