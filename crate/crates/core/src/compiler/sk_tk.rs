use crate::tensor::{pseudo_reciprocal, CMatrix, Ket, Operator, C64};
use crate::walgate::WalgateDecomposition;

/// `S_k = |π⟩⟨η_k| + |π⊥⟩⟨ν_k|` and `T_k = η_k⁻|η_k⟩⟨π| + ν_k⁻|ν_k⟩⟨π⊥|`
/// as dense matrices between the joint frame and Bob's factor.
#[derive(Clone, Debug)]
pub struct SkTkPair {
    pub s: [CMatrix; 2],
    pub t: [CMatrix; 2],
    frame_dims: Vec<usize>,
    bob_dims: Vec<usize>,
    eta_norms: [f64; 2],
    nu_norms: [f64; 2],
    pi: Ket,
    pi_perp: Ket,
}

impl SkTkPair {
    pub fn build(dec: &WalgateDecomposition) -> Self {
        let s = [0, 1].map(|k| dec.pi.outer(&dec.eta[k]) + dec.pi_perp.outer(&dec.nu[k]));
        let t = [0, 1].map(|k| {
            dec.eta[k].outer(&dec.pi) * C64::new(pseudo_reciprocal(dec.eta_norms[k]), 0.0)
                + dec.nu[k].outer(&dec.pi_perp) * C64::new(pseudo_reciprocal(dec.nu_norms[k]), 0.0)
        });
        SkTkPair {
            s,
            t,
            frame_dims: dec.pi.dims().to_vec(),
            bob_dims: dec.bob_dims().to_vec(),
            eta_norms: dec.eta_norms,
            nu_norms: dec.nu_norms,
            pi: dec.pi.clone(),
            pi_perp: dec.pi_perp.clone(),
        }
    }

    /// `Z_k = η_k ππ† + ν_k π⊥π⊥†`
    pub fn z(&self, k: usize) -> Operator {
        self.pi.projector().scale(self.eta_norms[k]).add(&self.pi_perp.projector().scale(self.nu_norms[k]))
    }

    /// `S_k S_k†`, which equals `Z_k`.
    pub fn s_s_dagger(&self, k: usize) -> Operator {
        Operator::new(&self.s[k] * self.s[k].adjoint(), self.frame_dims.clone()).expect("frame shape")
    }

    /// `T_k S_k`: the projector onto `H_B^(k)` (identity there).
    pub fn bob_projector(&self, k: usize) -> Operator {
        Operator::new(&self.t[k] * &self.s[k], self.bob_dims.clone()).expect("bob shape")
    }

    /// `P_k = S_k T_k`
    pub fn frame_projector(&self, k: usize) -> Operator {
        Operator::new(&self.s[k] * &self.t[k], self.frame_dims.clone()).expect("frame shape")
    }

    pub fn apply_t(&self, k: usize, v: &Ket) -> Ket {
        Ket::new(&self.t[k] * v.amplitudes(), self.bob_dims.clone()).expect("bob shape")
    }

    pub fn bob_dims(&self) -> &[usize] {
        &self.bob_dims
    }
}
