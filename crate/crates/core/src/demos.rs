//! Bundled example problems.
//!
//! Basis convention: `|+⟩ = e_0`, `|−⟩ = e_1` on every qubit.

use crate::error::{Error, Result};
use crate::io::Problem;
use crate::tensor::{DensityMatrix, Ket, Tolerances};

pub const DEMO_NAMES: [&str; 3] = ["singlet-triplet", "trine", "ghz3"];

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// `|S⟩ = (|+−⟩ − |−+⟩)/√2`
pub fn singlet() -> Ket {
    Ket::from_real(&[0.0, S, -S, 0.0], vec![2, 2]).expect("4 amplitudes")
}

/// `|T₀⟩ = (|+−⟩ + |−+⟩)/√2`
pub fn triplet_zero() -> Ket {
    Ket::from_real(&[0.0, S, S, 0.0], vec![2, 2]).expect("4 amplitudes")
}

/// `|T₊⟩ = |++⟩`
pub fn triplet_plus() -> Ket {
    Ket::basis(0, vec![2, 2])
}

/// Unnormalized trine vectors `|π_m⟩` on `span(S, T₊)`, with `‖π_m‖² = 2/3`.
pub fn trine_vectors() -> [Ket; 3] {
    let (s, t) = (singlet(), triplet_plus());
    let a = (2.0f64 / 3.0).sqrt();
    let b = (1.0f64 / 6.0).sqrt();
    let r = |x: f64| num_complex::Complex64::new(x, 0.0);
    [t.scale(r(a)), t.scale(r(-b)).add(&s.scale(r(S))), t.scale(r(-b)).add(&s.scale(r(-S)))]
}

/// `(|+++⟩ ± |−−−⟩)/√2`
pub fn ghz(sign: f64) -> Ket {
    let mut amps = [0.0; 8];
    amps[0] = S;
    amps[7] = sign * S;
    Ket::from_real(&amps, vec![2, 2, 2]).expect("8 amplitudes")
}

fn projective(name: &str, kets: &[Ket], tol: &Tolerances) -> Result<Problem> {
    let states = kets.iter().map(DensityMatrix::from_ket).collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = (1..=kets.len()).collect();
    Problem::new(
        Some(name.into()),
        kets[0].dims().to_vec(),
        states,
        Some(labels.clone()),
        kets.iter().map(Ket::projector).collect(),
        labels,
        tol,
    )
}

/// Perfect discrimination of `|S⟩` (label 1) and `|T₀⟩` (label 2).
pub fn singlet_triplet(tol: &Tolerances) -> Result<Problem> {
    projective("singlet-triplet", &[singlet(), triplet_zero()], tol)
}

/// The trine measurement `{|π_m⟩⟨π_m|}` on `span(S, T₊)`; state `m` is the
/// normalized `|π_m⟩`.
pub fn trine(tol: &Tolerances) -> Result<Problem> {
    let vectors = trine_vectors();
    let states = vectors.iter().map(DensityMatrix::from_ket).collect::<Result<Vec<_>>>()?;
    Problem::new(
        Some("trine".into()),
        vec![2, 2],
        states,
        Some(vec![1, 2, 3]),
        vectors.iter().map(Ket::projector).collect(),
        vec![1, 2, 3],
        tol,
    )
}

/// Perfect discrimination of the two three-qubit GHZ states.
pub fn ghz3(tol: &Tolerances) -> Result<Problem> {
    projective("ghz3", &[ghz(1.0), ghz(-1.0)], tol)
}

pub fn by_name(name: &str, tol: &Tolerances) -> Result<Problem> {
    match name {
        "singlet-triplet" => singlet_triplet(tol),
        "trine" => trine(tol),
        "ghz3" => ghz3(tol),
        other => Err(Error::Precondition(format!("unknown demo {other:?}; expected one of {DEMO_NAMES:?}"))),
    }
}
