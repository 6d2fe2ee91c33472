//! Compilation of rank-one measurements on a two-dimensional subspace into
//! one-way LOCC protocol trees.

mod rounds;
mod sk_tk;
mod tree;

pub use rounds::{
    ancilla_coefficients, ancilla_round, ancilla_sin2, ancilla_unitary, direct_coefficients, direct_condition,
    direct_round, AncillaRound, RankOne, Residual, DIRECT_BAND,
};
pub use sk_tk::SkTkPair;
pub use tree::{AliceAncillaNode, AliceOnbNode, BobLeaf, ClassicalLeaf, EmbedNode, ProtocolTree};

use crate::error::{Error, Result};
use crate::subspace::{to_subspace_coords, TwoDimSubspace};
use crate::tensor::{
    hermitian_eig, pad_and_split_alice_ket, rank_one_refine, split_alice_target, Ket, Operator, Povm, Tolerances,
    ZERO_TOL,
};
use crate::walgate::{walgate_basis, WalgateDecomposition};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompileConfig {
    /// Promote any element satisfying the direct condition to the first slot
    /// before falling back to an ancilla round.
    pub permute_heuristic: bool,
    pub tol: Tolerances,
}

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig { permute_heuristic: true, tol: Tolerances::default() }
    }
}

/// A compiled protocol together with the subspace it realizes a measurement on.
#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    pub subspace: TwoDimSubspace,
    pub tree: ProtocolTree,
    pub tolerances: Tolerances,
    pub permute_heuristic: bool,
}

impl Protocol {
    /// Refines `povm`, then compiles it for the parties in `party_dims`.
    pub fn compile(sub: &TwoDimSubspace, povm: &Povm, party_dims: &[usize], config: &CompileConfig) -> Result<Self> {
        let tree = compile_multiparty(sub, povm, party_dims, config)?;
        Ok(Protocol {
            subspace: retag_subspace(sub, party_dims, &config.tol)?,
            tree,
            tolerances: config.tol,
            permute_heuristic: config.permute_heuristic,
        })
    }
}

fn trivial_leaf(dims: &[usize], label: usize) -> ProtocolTree {
    let id = Operator::identity(dims.to_vec());
    ProtocolTree::BobLeaf(BobLeaf {
        povm: Povm::new_unchecked(vec![id.clone()], vec![label], id).expect("matching dims"),
    })
}

fn rank_one_elements(sub: &TwoDimSubspace, povm: &Povm, tol: &Tolerances) -> Result<Vec<RankOne>> {
    if povm.dims() != sub.dims() {
        return Err(Error::Dimension(format!(
            "POVM dims {:?} differ from subspace dims {:?}",
            povm.dims(),
            sub.dims()
        )));
    }
    let residual = povm.sum().distance(sub.projector());
    if residual > tol.povm {
        return Err(Error::Incomplete { residual });
    }
    let mut out = Vec::new();
    for (e, &label) in povm.elements().iter().zip(povm.labels()) {
        if e.trace().re <= ZERO_TOL {
            continue;
        }
        let coords = to_subspace_coords(e, sub, tol)?;
        out.push(RankOne { label, weight: coords.gamma, vector: sub.ket_from_coords(coords.direction) });
    }
    Ok(out)
}

/// Picks the element playing the role of `Π_1` and decomposes for it.
fn choose_first(
    sub: &TwoDimSubspace,
    elements: &[RankOne],
    config: &CompileConfig,
) -> Result<(usize, WalgateDecomposition)> {
    let decompose = |e: &RankOne| walgate_basis(sub, &e.coords(sub), &config.tol);
    let first = decompose(&elements[0])?;
    if !config.permute_heuristic || direct_condition(elements[0].weight, first.eta_norms[0], first.nu_norms[0]) {
        return Ok((0, first));
    }
    for (i, e) in elements.iter().enumerate().skip(1) {
        let dec = decompose(e)?;
        if direct_condition(e.weight, dec.eta_norms[0], dec.nu_norms[0]) {
            return Ok((i, dec));
        }
    }
    Ok((0, first))
}

type LeafHook<'a> = dyn Fn(BobLeaf) -> Result<ProtocolTree> + 'a;

fn compile_elements(
    sub: &TwoDimSubspace,
    elements: Vec<RankOne>,
    config: &CompileConfig,
    finish: &LeafHook<'_>,
) -> Result<ProtocolTree> {
    let mut elements: Vec<RankOne> = elements.into_iter().filter(|e| e.weight > ZERO_TOL).collect();
    let first_label = match elements.first() {
        None => return Err(Error::Precondition("no nonzero POVM elements".into())),
        Some(e) => e.label,
    };
    if elements.iter().all(|e| e.label == first_label) {
        return Ok(trivial_leaf(sub.dims(), first_label));
    }
    let (first, dec) = choose_first(sub, &elements, config)?;
    let chosen = elements.remove(first);
    elements.insert(0, chosen);

    let tol = &config.tol;
    if direct_condition(elements[0].weight, dec.eta_norms[0], dec.nu_norms[0]) {
        let mut node = direct_round(&elements, &dec, tol)?;
        for child in node.children.iter_mut() {
            if let ProtocolTree::BobLeaf(leaf) = child.as_ref() {
                **child = finish(leaf.clone())?;
            }
        }
        return Ok(ProtocolTree::AliceOnb(node));
    }

    let round = ancilla_round(&elements, &dec, tol)?;
    let branch1 = match round.residual {
        Residual::Subspace { sub: residual_sub, elements: residual } => {
            compile_elements(&residual_sub, residual, config, finish)?
        }
        Residual::Line { labels, probabilities } => {
            if labels.is_empty() {
                return Err(Error::Precondition("residual support has rank 0".into()));
            }
            ProtocolTree::Classical(ClassicalLeaf { dims: sub.dims().to_vec(), labels, probabilities })
        }
    };
    Ok(ProtocolTree::AliceAncilla(AliceAncillaNode {
        dims: sub.dims().to_vec(),
        alice_onb: dec.alice_onb.clone(),
        theta: round.theta,
        u_sa: round.u_sa,
        coefficients: round.coefficients,
        labels: elements.iter().map(|e| e.label).collect(),
        certificate: round.certificate,
        branch0: Box::new(finish(round.psi)?),
        branch1: Box::new(branch1),
    }))
}

/// Compiles a rank-one POVM on a `(2, N)` subspace.
///
/// Callers with larger Alice factors or non-rank-one elements go through
/// [`compile_multiparty`], which pads and refines first.
pub fn compile(sub: &TwoDimSubspace, povm: &Povm, config: &CompileConfig) -> Result<ProtocolTree> {
    if sub.dims().len() < 2 || sub.dims()[0] != 2 {
        return Err(Error::Precondition(format!(
            "compile needs a two-dimensional Alice factor, got dims {:?}",
            sub.dims()
        )));
    }
    let elements = rank_one_elements(sub, povm, &config.tol)?;
    compile_elements(sub, elements, config, &|leaf| Ok(ProtocolTree::BobLeaf(leaf)))
}

fn retag_ket(k: &Ket, dims: &[usize]) -> Result<Ket> {
    Ket::new(k.amplitudes().clone(), dims.to_vec())
}

fn retag_subspace(sub: &TwoDimSubspace, dims: &[usize], tol: &Tolerances) -> Result<TwoDimSubspace> {
    TwoDimSubspace::from_orthonormal(retag_ket(sub.pi(), dims)?, retag_ket(sub.pi_perp(), dims)?, tol)
}

fn compile_parties(
    sub: &TwoDimSubspace,
    elements: Vec<RankOne>,
    dims: &[usize],
    config: &CompileConfig,
) -> Result<ProtocolTree> {
    let tol = &config.tol;
    if dims.len() == 1 {
        let ops = elements.iter().map(RankOne::operator).collect();
        let labels = elements.iter().map(|e| e.label).collect();
        return Ok(ProtocolTree::BobLeaf(BobLeaf { povm: Povm::new(ops, labels, sub.projector().clone(), tol)? }));
    }
    if dims[0] != 2 {
        let target: Vec<usize> = if dims[0] == 1 { dims[1..].to_vec() } else { split_alice_target(dims)? };
        let embed = |k: &Ket| if dims[0] == 1 { retag_ket(k, &target) } else { pad_and_split_alice_ket(k, dims[0]) };
        let new_sub = TwoDimSubspace::from_orthonormal(embed(sub.pi())?, embed(sub.pi_perp())?, tol)?;
        let new_elements = elements
            .iter()
            .map(|e| Ok(RankOne { label: e.label, weight: e.weight, vector: embed(&e.vector)? }))
            .collect::<Result<Vec<_>>>()?;
        let child = compile_parties(&new_sub, new_elements, &target, config)?;
        return Ok(ProtocolTree::Embed(EmbedNode { dims_in: dims.to_vec(), dims_out: target, child: Box::new(child) }));
    }
    let bob_dims = dims[1..].to_vec();
    compile_elements(sub, elements, config, &|leaf| finish_leaf(leaf, &bob_dims, config))
}

/// Re-compiles a Bob leaf whose space spans several parties.
fn finish_leaf(leaf: BobLeaf, bob_dims: &[usize], config: &CompileConfig) -> Result<ProtocolTree> {
    if bob_dims.len() == 1 {
        return Ok(ProtocolTree::BobLeaf(leaf));
    }
    let tol = &config.tol;
    let eig = hermitian_eig(leaf.povm.resolved(), tol)?;
    let rank = eig.values.iter().filter(|&&l| l > 0.5).count();
    match rank {
        0 => Ok(ProtocolTree::BobLeaf(leaf)),
        1 => {
            let weights: Vec<f64> = leaf.povm.elements().iter().map(|e| e.trace().re.max(0.0)).collect();
            let total: f64 = weights.iter().sum();
            Ok(ProtocolTree::Classical(ClassicalLeaf {
                dims: bob_dims.to_vec(),
                labels: leaf.povm.labels().to_vec(),
                probabilities: weights.iter().map(|w| w / total).collect(),
            }))
        }
        2 => {
            let sub = TwoDimSubspace::from_orthonormal(eig.vectors[0].clone(), eig.vectors[1].clone(), tol)?;
            let elements = rank_one_elements(&sub, &leaf.povm, tol)?;
            compile_parties(&sub, elements, bob_dims, config)
        }
        r => Err(Error::MalformedTree(format!("Bob leaf space has rank {r}"))),
    }
}

/// Compiles an arbitrary finite POVM on a two-dimensional subspace shared by
/// the parties in `party_dims`.
///
/// The first party measures, the rest are grouped as Bob; Bob-side leaves
/// spanning several parties are compiled again with the next party in the
/// Alice role. Alice factors other than 2 are padded and split first, and
/// elements are refined into rank-one pieces.
pub fn compile_multiparty(
    sub: &TwoDimSubspace,
    povm: &Povm,
    party_dims: &[usize],
    config: &CompileConfig,
) -> Result<ProtocolTree> {
    let total: usize = party_dims.iter().product();
    if party_dims.is_empty() || total != sub.pi().len() || total != povm.resolved().dim() {
        return Err(Error::Dimension(format!(
            "party dims {party_dims:?} do not match a space of dimension {}",
            sub.pi().len()
        )));
    }
    let tol = &config.tol;
    let sub = retag_subspace(sub, party_dims, tol)?;
    let retag_op = |o: &Operator| Operator::new(o.matrix().clone(), party_dims.to_vec());
    let povm = Povm::new_unchecked(
        povm.elements().iter().map(retag_op).collect::<Result<Vec<_>>>()?,
        povm.labels().to_vec(),
        retag_op(povm.resolved())?,
    )?;
    let (refined, _) = rank_one_refine(&povm, tol)?;
    let elements = rank_one_elements(&sub, &refined, tol)?;
    compile_parties(&sub, elements, party_dims, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos;

    fn compile_demo(problem: &crate::io::Problem, permute_heuristic: bool) -> ProtocolTree {
        let config = CompileConfig { permute_heuristic, tol: Tolerances::default() };
        compile_multiparty(&problem.subspace, &problem.povm, &problem.dims, &config).unwrap()
    }

    #[test]
    fn singlet_triplet_is_one_direct_round() {
        let tol = Tolerances::default();
        let p = demos::singlet_triplet(&tol).unwrap();
        let tree = compile(&p.subspace, &p.povm, &CompileConfig::default()).unwrap();
        assert_eq!(tree.round_depth(), 1);
        assert_eq!(tree.ancilla_depth(), 0);
        let ProtocolTree::AliceOnb(node) = &tree else { panic!("expected a direct round") };
        for child in &node.children {
            let ProtocolTree::BobLeaf(leaf) = child.as_ref() else { panic!("expected a Bob leaf") };
            // Each Bob measurement is projective: two orthogonal rank-one projectors.
            let e = leaf.povm.elements();
            assert_eq!(e.len(), 2);
            assert!(e[0].mul(&e[1]).norm() < 1e-12);
            assert!(e[0].mul(&e[0]).distance(&e[0]) < 1e-12);
        }
    }

    #[test]
    fn projector_povm_is_trivial_leaf() {
        let tol = Tolerances::default();
        let p = demos::singlet_triplet(&tol).unwrap();
        let povm =
            Povm::new(vec![p.subspace.projector().clone()], vec![7], p.subspace.projector().clone(), &tol).unwrap();
        let tree = compile_multiparty(&p.subspace, &povm, &[2, 2], &CompileConfig::default()).unwrap();
        let ProtocolTree::BobLeaf(leaf) = &tree else { panic!("expected a trivial leaf") };
        assert_eq!(leaf.povm.labels(), &[7]);
        assert_eq!(tree.round_depth(), 0);
    }

    #[test]
    fn trine_without_heuristic_uses_one_ancilla_round() {
        let p = demos::trine(&Tolerances::default()).unwrap();
        let tree = compile_demo(&p, false);
        let ProtocolTree::AliceAncilla(node) = &tree else { panic!("expected an ancilla round") };
        assert!((node.sin2_theta() - 0.8).abs() < 1e-12);
        assert!((node.coefficients[1] - 0.4).abs() < 1e-12);
        let ProtocolTree::AliceOnb(residual) = node.branch1.as_ref() else { panic!("expected a direct round") };
        assert_eq!(residual.labels.len(), 2);
        assert!(!residual.labels.contains(&node.labels[0]));
    }

    #[test]
    fn trine_with_heuristic_is_direct() {
        let p = demos::trine(&Tolerances::default()).unwrap();
        let tree = compile_demo(&p, true);
        assert_eq!(tree.ancilla_depth(), 0);
        let ProtocolTree::AliceOnb(node) = &tree else { panic!("expected a direct round") };
        assert_ne!(node.labels[0], 1);
    }

    #[test]
    fn ghz_chains_two_parties() {
        let p = demos::ghz3(&Tolerances::default()).unwrap();
        let tree = compile_demo(&p, true);
        assert_eq!(tree.round_depth(), 2);
        tree.check_well_formed().unwrap();
    }

    #[test]
    fn compile_rejects_wide_alice() {
        let tol = Tolerances::default();
        let a = Ket::basis(0, vec![3, 2]);
        let b = Ket::basis(5, vec![3, 2]);
        let sub = TwoDimSubspace::from_orthonormal(a.clone(), b.clone(), &tol).unwrap();
        let povm = Povm::new(vec![a.projector(), b.projector()], vec![1, 2], sub.projector().clone(), &tol).unwrap();
        assert!(matches!(compile(&sub, &povm, &CompileConfig::default()), Err(Error::Precondition(_))));
        let tree = compile_multiparty(&sub, &povm, &[3, 2], &CompileConfig::default()).unwrap();
        assert!(matches!(tree, ProtocolTree::Embed(_)));
    }
}
