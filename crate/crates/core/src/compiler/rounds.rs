//! One measurement round: either Alice measures in the Walgate basis and Bob
//! finishes (direct round), or Alice couples an ancilla and measures it
//! (ancilla round), leaving Bob a measurement or a smaller residual problem.

use crate::compiler::sk_tk::SkTkPair;
use crate::compiler::tree::{AliceOnbNode, BobLeaf, ProtocolTree};
use crate::error::{Error, Result};
use crate::subspace::{SubspaceCoords, TwoDimSubspace};
use crate::tensor::{canonical_phase, CMatrix, CVector, Ket, Operator, Povm, Tolerances, C64, ONE, ZERO, ZERO_TOL};
use crate::walgate::{extend_decomposition, WalgateDecomposition};

/// Band within which the direct condition counts as satisfied.
pub const DIRECT_BAND: f64 = 1e-12;

/// `Π = weight · |vector⟩⟨vector|` with a unit `vector`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOne {
    pub label: usize,
    pub weight: f64,
    pub vector: Ket,
}

impl RankOne {
    pub fn operator(&self) -> Operator {
        self.vector.projector().scale(self.weight)
    }

    /// Direction of `vector` in the `(π, π⊥)` coordinates of `sub`.
    pub fn coords(&self, sub: &TwoDimSubspace) -> SubspaceCoords {
        let mut d = CVector::from_column_slice(&[sub.pi().inner(&self.vector), sub.pi_perp().inner(&self.vector)]);
        let n = d.norm();
        d /= C64::new(n, 0.0);
        canonical_phase(&mut d);
        SubspaceCoords { gamma: self.weight, direction: [d[0], d[1]] }
    }
}

/// `γ_1 ≥ η_0 − (1 − γ_1) ν_0`, with ties counted as true.
pub fn direct_condition(gamma1: f64, eta0: f64, nu0: f64) -> bool {
    gamma1 >= eta0 - (1.0 - gamma1) * nu0 - DIRECT_BAND
}

/// `c_1 = (η_0 − (1−γ_1)ν_0)/γ_1`, `c_m = ν_0` otherwise.
pub fn direct_coefficients(gamma1: f64, eta0: f64, nu0: f64, count: usize) -> Vec<f64> {
    let c1 = ((eta0 - (1.0 - gamma1) * nu0) / gamma1).clamp(0.0, 1.0);
    std::iter::once(c1).chain(std::iter::repeat_n(nu0, count.saturating_sub(1))).collect()
}

/// `sin²θ = γ_1 / (η_0 − (1 − γ_1) ν_0)`
pub fn ancilla_sin2(gamma1: f64, eta0: f64, nu0: f64) -> f64 {
    (gamma1 / (eta0 - (1.0 - gamma1) * nu0)).clamp(0.0, 1.0)
}

/// `c̃_1 = 1`, `c̃_m = ν_0 sin²θ` otherwise.
pub fn ancilla_coefficients(sin2: f64, nu0: f64, count: usize) -> Vec<f64> {
    std::iter::once(1.0).chain(std::iter::repeat_n(nu0 * sin2, count.saturating_sub(1))).collect()
}

/// Unitary on `ancilla ⊗ Alice` with
/// `U|s0⟩|0⟩ = (sinθ|s0⟩ + cosθ|s1⟩)|0⟩`, `U|s0⟩|1⟩ = |s1⟩|1⟩`,
/// `U|s1⟩|0⟩ = (cosθ|s0⟩ − sinθ|s1⟩)|0⟩`, `U|s1⟩|1⟩ = |s0⟩|1⟩`,
/// where `|0⟩, |1⟩` is `alice_onb`. Returned in Alice's computational basis.
pub fn ancilla_unitary(theta: f64, alice_onb: &[Ket; 2]) -> Operator {
    let (s, c) = theta.sin_cos();
    let (s, c) = (C64::new(s, 0.0), C64::new(c, 0.0));
    #[rustfmt::skip]
    let u_w = CMatrix::from_row_slice(4, 4, &[
        s,    ZERO, c,    ZERO,
        ZERO, ZERO, ZERO, ONE,
        c,    ZERO, -s,   ZERO,
        ZERO, ONE,  ZERO, ZERO,
    ]);
    let w = CMatrix::from_columns(&[alice_onb[0].amplitudes().clone(), alice_onb[1].amplitudes().clone()]);
    let iw = CMatrix::identity(2, 2).kronecker(&w);
    Operator::new(&iw * u_w * iw.adjoint(), vec![2, 2]).expect("4x4 unitary")
}

fn check_first_element(elements: &[RankOne], dec: &WalgateDecomposition) -> Result<()> {
    let first = elements.first().ok_or_else(|| Error::Precondition("empty round".into()))?;
    let overlap = dec.pi.inner(&first.vector).norm();
    if (overlap - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition("decomposition is not aligned with the first element".into()));
    }
    Ok(())
}

fn bob_leaf(pair: &SkTkPair, k: usize, elements: &[RankOne], coeff: &[f64], tol: &Tolerances) -> Result<BobLeaf> {
    let mut ops = Vec::new();
    let mut labels = Vec::new();
    for (e, &c) in elements.iter().zip(coeff) {
        let w = pair.apply_t(k, &e.vector);
        let weight = c * e.weight;
        if weight * w.norm_sqr() > ZERO_TOL {
            ops.push(w.projector().scale(weight));
            labels.push(e.label);
        }
    }
    Ok(BobLeaf { povm: Povm::new(ops, labels, pair.bob_projector(k), tol)? })
}

fn certificate(elements: &[RankOne], coeff: &[f64], target: &Operator) -> f64 {
    let sum = elements
        .iter()
        .zip(coeff)
        .fold(Operator::zeros(target.dims().to_vec()), |acc, (e, &c)| acc.add(&e.operator().scale(c)));
    sum.distance(target)
}

/// Direct round: Alice measures `alice_onb`, Bob measures
/// `Φ_m^(k) = c_m^(k) T_k Π_m T_k†` on `H_B^(k)`.
///
/// `elements[0]` must be `Π_1` and `dec` must be aligned with it.
pub fn direct_round(elements: &[RankOne], dec: &WalgateDecomposition, tol: &Tolerances) -> Result<AliceOnbNode> {
    check_first_element(elements, dec)?;
    let (gamma1, eta0, nu0) = (elements[0].weight, dec.eta_norms[0], dec.nu_norms[0]);
    if !direct_condition(gamma1, eta0, nu0) {
        return Err(Error::Precondition(format!("direct condition fails: γ1 = {gamma1}, η0 = {eta0}, ν0 = {nu0}")));
    }
    let pair = SkTkPair::build(dec);
    let c = direct_coefficients(gamma1, eta0, nu0, elements.len());
    let c1: Vec<f64> = c.iter().map(|x| 1.0 - x).collect();
    let leaf0 = bob_leaf(&pair, 0, elements, &c, tol)?;
    let leaf1 = bob_leaf(&pair, 1, elements, &c1, tol)?;
    Ok(AliceOnbNode {
        dims: dec.pi.dims().to_vec(),
        alice_onb: dec.alice_onb.clone(),
        certificate: certificate(elements, &c, &pair.z(0)),
        coefficients: c,
        labels: elements.iter().map(|e| e.label).collect(),
        children: [Box::new(ProtocolTree::BobLeaf(leaf0)), Box::new(ProtocolTree::BobLeaf(leaf1))],
    })
}

/// What remains after ancilla outcome 1.
#[derive(Clone, Debug)]
pub enum Residual {
    /// A smaller rank-one measurement on a two-dimensional subspace of the frame.
    Subspace { sub: TwoDimSubspace, elements: Vec<RankOne> },
    /// The residual subspace is one-dimensional: a label distribution.
    Line { labels: Vec<usize>, probabilities: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct AncillaRound {
    pub theta: f64,
    pub sin2: f64,
    pub u_sa: Operator,
    pub coefficients: Vec<f64>,
    pub certificate: f64,
    /// Bob's measurement `Ψ_m` after ancilla outcome 0.
    pub psi: BobLeaf,
    pub residual: Residual,
    /// The decomposition transported to `ancilla ⊗ (Alice ⊗ Bob)`.
    pub extended: WalgateDecomposition,
}

/// Ancilla round for the case where the direct condition fails.
pub fn ancilla_round(elements: &[RankOne], dec: &WalgateDecomposition, tol: &Tolerances) -> Result<AncillaRound> {
    check_first_element(elements, dec)?;
    let (gamma1, eta0, nu0) = (elements[0].weight, dec.eta_norms[0], dec.nu_norms[0]);
    if gamma1 >= eta0 - (1.0 - gamma1) * nu0 {
        return Err(Error::Precondition(format!(
            "ancilla round needs γ1 < η0 − (1−γ1)ν0: γ1 = {gamma1}, η0 = {eta0}, ν0 = {nu0}"
        )));
    }
    let sin2 = ancilla_sin2(gamma1, eta0, nu0);
    let theta = sin2.sqrt().asin();
    let pair = SkTkPair::build(dec);
    let coefficients = ancilla_coefficients(sin2, nu0, elements.len());
    let cert = certificate(elements, &coefficients, &pair.z(0).scale(sin2));

    let psi_coeff: Vec<f64> = coefficients.iter().map(|c| c / sin2).collect();
    let psi = bob_leaf(&pair, 0, elements, &psi_coeff, tol)?;

    let extended = extend_decomposition(dec, theta);
    let eta1 = &extended.eta[1];
    let nu1 = &extended.nu[1];
    let (eta1_norm, nu1_norm) = (extended.eta_norms[1], extended.nu_norms[1]);
    let mut residual_elements = Vec::new();
    for (e, &c) in elements.iter().zip(&coefficients) {
        let alpha = dec.pi.inner(&e.vector);
        let beta = dec.pi_perp.inner(&e.vector);
        let mut w = Ket::zeros(eta1.dims().to_vec());
        if eta1_norm > ZERO_TOL {
            w = w.add(&eta1.scale(alpha / eta1_norm));
        }
        if nu1_norm > ZERO_TOL {
            w = w.add(&nu1.scale(beta / nu1_norm));
        }
        let weight = (1.0 - c) * e.weight * w.norm_sqr();
        if weight > ZERO_TOL {
            let vector = w.normalized().expect("nonzero");
            residual_elements.push(RankOne { label: e.label, weight, vector });
        }
    }
    let residual = if eta1_norm > ZERO_TOL && nu1_norm > ZERO_TOL {
        let sub = TwoDimSubspace::from_orthonormal(
            eta1.normalized().expect("nonzero"),
            nu1.normalized().expect("nonzero"),
            tol,
        )?;
        Residual::Subspace { sub, elements: residual_elements }
    } else {
        let total: f64 = residual_elements.iter().map(|e| e.weight).sum();
        Residual::Line {
            labels: residual_elements.iter().map(|e| e.label).collect(),
            probabilities: residual_elements.iter().map(|e| e.weight / total).collect(),
        }
    };
    Ok(AncillaRound {
        theta,
        sin2,
        u_sa: ancilla_unitary(theta, &dec.alice_onb),
        coefficients,
        certificate: cert,
        psi,
        residual,
        extended,
    })
}
