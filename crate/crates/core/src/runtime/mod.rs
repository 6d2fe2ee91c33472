//! Execution of compiled protocol trees: branch enumeration, the induced
//! measurement on the root subspace, exact outcome distributions and seeded
//! sampling.

mod session;
mod verify;

pub use session::{run_two_party_session, AliceMachine, BobMachine, Message, MessageKind, Party, Transcript};
pub use verify::{verify_protocol, VerificationReport};

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::compiler::{Protocol, ProtocolTree};
use crate::error::{Error, Result};
use crate::tensor::{padding_isometry, CMatrix, DensityMatrix, Operator, Povm, C64, ZERO};

/// Support leak above which an input state is reported.
pub const LEAK_WARNING: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Leaf,
    OnbRound,
    AncillaRound,
    Classical,
    Embed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Child(usize),
    Label(usize),
}

/// A tree node lowered to Kraus operators on its frame.
#[derive(Clone, Debug)]
pub struct PlanNode {
    pub kind: NodeKind,
    /// One map per outcome, from this node's frame to the outcome's frame.
    pub kraus: Vec<CMatrix>,
    pub outcomes: Vec<Outcome>,
    /// Whether the factor this node acts on belongs to the first party.
    pub alice: bool,
}

impl PlanNode {
    pub fn is_round(&self) -> bool {
        matches!(self.kind, NodeKind::OnbRound | NodeKind::AncillaRound)
    }
}

/// One root-to-label path of a protocol.
#[derive(Clone, Debug)]
pub struct BranchRecord {
    /// `(round, outcome)` for every measurement round on the path.
    pub path: Vec<(usize, usize)>,
    /// Composition of the path's Kraus maps, from the root frame.
    pub kraus_chain: CMatrix,
    pub label: usize,
}

/// Probability per original label.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    pub probabilities: BTreeMap<usize, f64>,
    /// `‖ρ − PρP‖_F` for the input state.
    pub support_leak: f64,
}

impl OutcomeDistribution {
    pub fn get(&self, label: usize) -> f64 {
        self.probabilities.get(&label).copied().unwrap_or(0.0)
    }

    pub fn leaks(&self) -> bool {
        self.support_leak > LEAK_WARNING
    }
}

/// Kraus operator `⟨v| ⊗ I_rest`.
fn contract_first(v: &[C64], rest: usize) -> CMatrix {
    CMatrix::from_fn(rest, v.len() * rest, |i, j| if j % rest == i { v[j / rest].conj() } else { ZERO })
}

/// `m ⊗ I_rest`.
fn lift_first(m: &CMatrix, rest: usize) -> CMatrix {
    m.kronecker(&CMatrix::identity(rest, rest))
}

/// A protocol lowered to an arena of Kraus nodes, root at index 0.
#[derive(Clone, Debug)]
pub struct ExecutionPlan {
    nodes: Vec<PlanNode>,
    projector: Operator,
}

impl ExecutionPlan {
    pub fn new(protocol: &Protocol) -> Result<Self> {
        protocol.tree.check_well_formed()?;
        let dims = protocol.subspace.dims();
        if protocol.tree.dims() != dims {
            return Err(Error::MalformedTree(format!(
                "tree frame {:?} differs from subspace dims {dims:?}",
                protocol.tree.dims()
            )));
        }
        let mut plan = ExecutionPlan { nodes: Vec::new(), projector: protocol.subspace.projector().clone() };
        let mut owner = vec![false; dims.len()];
        owner[0] = true;
        plan.lower(&protocol.tree, &owner)?;
        Ok(plan)
    }

    pub fn nodes(&self) -> &[PlanNode] {
        &self.nodes
    }

    pub fn projector(&self) -> &Operator {
        &self.projector
    }

    fn lower(&mut self, tree: &ProtocolTree, owner: &[bool]) -> Result<usize> {
        let id = self.nodes.len();
        self.nodes.push(PlanNode { kind: NodeKind::Leaf, kraus: vec![], outcomes: vec![], alice: owner[0] });
        let frame: usize = tree.dims().iter().product();
        let (kind, kraus, outcomes) = match tree {
            ProtocolTree::BobLeaf(leaf) => {
                let kraus = leaf
                    .povm
                    .elements()
                    .iter()
                    .map(|e| e.sqrt_psd().map(Operator::into_matrix))
                    .collect::<Result<Vec<_>>>()?;
                let outcomes = leaf.povm.labels().iter().map(|&l| Outcome::Label(l)).collect();
                (NodeKind::Leaf, kraus, outcomes)
            }
            ProtocolTree::Classical(c) => {
                let kraus = c
                    .probabilities
                    .iter()
                    .map(|&p| CMatrix::identity(frame, frame) * C64::new(p.max(0.0).sqrt(), 0.0))
                    .collect();
                (NodeKind::Classical, kraus, c.labels.iter().map(|&l| Outcome::Label(l)).collect())
            }
            ProtocolTree::Embed(e) => {
                let n_out: usize = e.dims_out.iter().product();
                let child_owner: Vec<bool> = if e.dims_out.len() + 1 == e.dims_in.len() {
                    owner[1..].to_vec()
                } else if e.dims_out.len() == e.dims_in.len() + 1 {
                    std::iter::once(owner[0]).chain(owner.iter().copied()).collect()
                } else {
                    return Err(Error::MalformedTree(format!("embed {:?} -> {:?}", e.dims_in, e.dims_out)));
                };
                let child = self.lower(&e.child, &child_owner)?;
                (NodeKind::Embed, vec![padding_isometry(frame, n_out)], vec![Outcome::Child(child)])
            }
            ProtocolTree::AliceOnb(n) => {
                let rest = frame / 2;
                let kraus = n.alice_onb.iter().map(|a| contract_first(a.amplitudes().as_slice(), rest)).collect();
                let c0 = self.lower(&n.children[0], &owner[1..])?;
                let c1 = self.lower(&n.children[1], &owner[1..])?;
                (NodeKind::OnbRound, kraus, vec![Outcome::Child(c0), Outcome::Child(c1)])
            }
            ProtocolTree::AliceAncilla(n) => {
                let rest = frame / 2;
                let u = n.u_sa.matrix();
                // Ancilla starts in |0⟩; outcome s leaves Alice with ⟨s|U|0⟩.
                let m = |s: usize| CMatrix::from_fn(2, 2, |a, b| u[(s * 2 + a, b)]);
                let zero_a = n.alice_onb[0].amplitudes().as_slice();
                let k0 = contract_first(zero_a, rest) * lift_first(&m(0), rest);
                let k1 = lift_first(&m(1), rest);
                let c0 = self.lower(&n.branch0, &owner[1..])?;
                let c1 = self.lower(&n.branch1, owner)?;
                (NodeKind::AncillaRound, vec![k0, k1], vec![Outcome::Child(c0), Outcome::Child(c1)])
            }
        };
        self.nodes[id].kind = kind;
        self.nodes[id].kraus = kraus;
        self.nodes[id].outcomes = outcomes;
        Ok(id)
    }

    /// Every root-to-label path with its composed Kraus map.
    pub fn branches(&self) -> Vec<BranchRecord> {
        let mut out = Vec::new();
        let n = self.projector.dim();
        self.collect(0, CMatrix::identity(n, n), Vec::new(), &mut out);
        out
    }

    fn collect(&self, id: usize, chain: CMatrix, path: Vec<(usize, usize)>, out: &mut Vec<BranchRecord>) {
        let node = &self.nodes[id];
        for (k, (kraus, outcome)) in node.kraus.iter().zip(&node.outcomes).enumerate() {
            let next = kraus * &chain;
            let mut path = path.clone();
            if node.is_round() {
                path.push((path.len(), k));
            }
            match *outcome {
                Outcome::Child(c) => self.collect(c, next, path, out),
                Outcome::Label(label) => out.push(BranchRecord { path, kraus_chain: next, label }),
            }
        }
    }

    /// `Ê_m = P (Σ_{branches → m} chain† chain) P` per label, in label order.
    pub fn induced_povm(&self) -> Povm {
        let dims = self.projector.dims().to_vec();
        let mut sums: BTreeMap<usize, CMatrix> = BTreeMap::new();
        for b in self.branches() {
            let e = b.kraus_chain.adjoint() * &b.kraus_chain;
            sums.entry(b.label).and_modify(|acc| *acc += &e).or_insert(e);
        }
        let p = self.projector.matrix();
        let (labels, elements): (Vec<usize>, Vec<Operator>) =
            sums.into_iter().map(|(l, e)| (l, Operator::new(p * e * p, dims.clone()).expect("root frame"))).unzip();
        Povm::new_unchecked(elements, labels, self.projector.clone()).expect("root frame")
    }

    /// `‖P (Σ_branches chain† chain) P − P‖_F`
    pub fn completeness_residual(&self) -> f64 {
        self.induced_povm().sum().distance(&self.projector)
    }

    /// `P(m) = Tr(ρ Ê_m)`.
    pub fn exact_distribution(&self, rho: &DensityMatrix) -> Result<OutcomeDistribution> {
        self.check_state(rho)?;
        let induced = self.induced_povm();
        let mut probabilities = BTreeMap::new();
        for (e, &l) in induced.elements().iter().zip(induced.labels()) {
            *probabilities.entry(l).or_insert(0.0) += rho.operator().trace_product(e);
        }
        let p = self.projector.matrix();
        let rho_m = rho.operator().matrix();
        let support_leak = (rho_m - p * rho_m * p).norm();
        Ok(OutcomeDistribution { probabilities, support_leak })
    }

    fn check_state(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dims() != self.projector.dims() {
            return Err(Error::Dimension(format!(
                "state dims {:?} differ from protocol dims {:?}",
                rho.dims(),
                self.projector.dims()
            )));
        }
        Ok(())
    }

    /// Outcome weights `Tr(K σ K†)` at every node for the state reaching it.
    fn weights(&self, rho: &DensityMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_state(rho)?;
        let mut out = vec![Vec::new(); self.nodes.len()];
        self.fill_weights(0, rho.operator().matrix().clone(), &mut out);
        Ok(out)
    }

    fn fill_weights(&self, id: usize, sigma: CMatrix, out: &mut [Vec<f64>]) {
        let node = &self.nodes[id];
        for (kraus, outcome) in node.kraus.iter().zip(&node.outcomes) {
            let next = kraus * &sigma * kraus.adjoint();
            out[id].push(next.trace().re.max(0.0));
            if let Outcome::Child(c) = *outcome {
                self.fill_weights(c, next, out);
            }
        }
    }

    /// Conditional outcome statistics of every node for `rho`.
    pub fn sampler(&self, rho: &DensityMatrix) -> Result<Sampler<'_>> {
        let dists = self
            .weights(rho)?
            .into_iter()
            .map(|w| if w.len() > 1 { WeightedIndex::new(w).ok() } else { None })
            .collect();
        Ok(Sampler { plan: self, dists })
    }

    /// Labels of `shots` independent runs; run `i` draws from stream `i` of `seed`.
    pub fn sample_labels(&self, rho: &DensityMatrix, shots: usize, seed: u64) -> Result<Vec<usize>> {
        let sampler = self.sampler(rho)?;
        (0..shots)
            .map(|i| {
                let mut rng = session_rng(seed, i as u64);
                sampler.run(0, &mut rng)
            })
            .collect()
    }

    /// Counts per label over `shots` runs.
    pub fn sample(&self, rho: &DensityMatrix, shots: usize, seed: u64) -> Result<BTreeMap<usize, u64>> {
        let mut counts = BTreeMap::new();
        for label in self.sample_labels(rho, shots, seed)? {
            *counts.entry(label).or_insert(0) += 1;
        }
        Ok(counts)
    }
}

/// The random stream of run `index` under `seed`.
pub fn session_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Outcome statistics of a plan for one input state.
///
/// Draws happen only at nodes with more than one outcome, so any walker
/// visiting the same nodes in the same order consumes the same randomness.
pub struct Sampler<'a> {
    plan: &'a ExecutionPlan,
    dists: Vec<Option<WeightedIndex<f64>>>,
}

impl Sampler<'_> {
    pub fn plan(&self) -> &ExecutionPlan {
        self.plan
    }

    /// Draws the outcome index of node `id`.
    pub fn draw(&self, id: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        let node = &self.plan.nodes[id];
        match node.outcomes.len() {
            0 => Err(Error::InvalidState(format!("node {id} has no outcomes"))),
            1 => Ok(0),
            _ => self.dists[id]
                .as_ref()
                .map(|d| d.sample(rng))
                .ok_or_else(|| Error::InvalidState(format!("node {id} is reached with probability zero"))),
        }
    }

    /// Walks from node `id` to a label.
    pub fn run(&self, mut id: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        loop {
            let k = self.draw(id, rng)?;
            match self.plan.nodes[id].outcomes[k] {
                Outcome::Child(c) => id = c,
                Outcome::Label(l) => return Ok(l),
            }
        }
    }
}

pub fn induced_povm(protocol: &Protocol) -> Result<Povm> {
    Ok(ExecutionPlan::new(protocol)?.induced_povm())
}

pub fn exact_distribution(protocol: &Protocol, rho: &DensityMatrix) -> Result<OutcomeDistribution> {
    ExecutionPlan::new(protocol)?.exact_distribution(rho)
}

pub fn sample(protocol: &Protocol, rho: &DensityMatrix, shots: usize, seed: u64) -> Result<BTreeMap<usize, u64>> {
    ExecutionPlan::new(protocol)?.sample(rho, shots, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::CompileConfig;
    use crate::demos;
    use crate::tensor::Tolerances;

    fn demo_protocol(name: &str, permute_heuristic: bool) -> (crate::io::Problem, Protocol) {
        let tol = Tolerances::default();
        let p = demos::by_name(name, &tol).unwrap();
        let proto = p.compile(&CompileConfig { permute_heuristic, tol }).unwrap();
        (p, proto)
    }

    #[test]
    fn trivial_tree_induces_projector() {
        let tol = Tolerances::default();
        let p = demos::singlet_triplet(&tol).unwrap();
        let proj = p.subspace.projector().clone();
        let povm = Povm::new(vec![proj.clone()], vec![1], proj.clone(), &tol).unwrap();
        let proto = Protocol::compile(&p.subspace, &povm, &p.dims, &CompileConfig::default()).unwrap();
        let induced = induced_povm(&proto).unwrap();
        assert_eq!(induced.labels(), &[1]);
        assert!(induced.elements()[0].distance(&proj) < 1e-12);
    }

    #[test]
    fn singlet_triplet_induced_projectors() {
        let (p, proto) = demo_protocol("singlet-triplet", true);
        let induced = induced_povm(&proto).unwrap();
        for (e, target) in induced.elements().iter().zip(p.povm.elements()) {
            assert!(e.distance(target) < 1e-12);
        }
    }

    #[test]
    fn half_projector_gives_half_traces() {
        let (p, proto) = demo_protocol("trine", false);
        let rho = DensityMatrix::new(p.subspace.projector().scale(0.5), &Tolerances::default()).unwrap();
        let dist = exact_distribution(&proto, &rho).unwrap();
        for (e, &l) in p.povm.elements().iter().zip(p.povm.labels()) {
            assert!((dist.get(l) - e.trace().re / 2.0).abs() < 1e-12);
        }
        assert!(!dist.leaks());
    }

    #[test]
    fn leaking_state_is_flagged() {
        let (_, proto) = demo_protocol("singlet-triplet", true);
        let rho = DensityMatrix::from_ket(&crate::tensor::Ket::basis(0, vec![2, 2])).unwrap();
        assert!(exact_distribution(&proto, &rho).unwrap().leaks());
    }

    #[test]
    fn sampling_is_deterministic() {
        let (p, proto) = demo_protocol("trine", false);
        let rho = p.mixture().unwrap();
        let a = sample(&proto, &rho, 500, 11).unwrap();
        let b = sample(&proto, &rho, 500, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values().sum::<u64>(), 500);
    }

    #[test]
    fn branches_are_complete() {
        let (_, proto) = demo_protocol("ghz3", true);
        let plan = ExecutionPlan::new(&proto).unwrap();
        assert!(plan.completeness_residual() < 1e-12);
        for b in plan.branches() {
            assert_eq!(b.path.iter().map(|&(r, _)| r).collect::<Vec<_>>(), (0..b.path.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn depth_one_session_sends_one_message() {
        let (p, proto) = demo_protocol("singlet-triplet", true);
        let t = run_two_party_session(&proto, &p.states[0], 5, 0).unwrap();
        assert_eq!(t.alice_messages(), 1);
        assert_eq!(t.label, 1);
        t.check_one_way().unwrap();
    }

    #[test]
    fn out_of_order_message_is_rejected() {
        let (p, proto) = demo_protocol("trine", false);
        let plan = ExecutionPlan::new(&proto).unwrap();
        let sampler = plan.sampler(&p.states[1]).unwrap();
        let mut bob = BobMachine::new(&sampler);
        let early = Message { seq: 1, from: Party::Alice, kind: MessageKind::RoundOutcome, round: 1, value: 0 };
        assert!(matches!(bob.receive(&early), Err(Error::ProtocolViolation(_))));
        let forged = Message { seq: 0, from: Party::Bob, kind: MessageKind::RoundOutcome, round: 0, value: 0 };
        assert!(matches!(bob.receive(&forged), Err(Error::ProtocolViolation(_))));
        let mut rng = session_rng(0, 0);
        assert!(matches!(bob.finish(&mut rng), Err(Error::ProtocolViolation(_))));
    }

    #[test]
    fn transcript_wire_format() {
        let (p, proto) = demo_protocol("trine", false);
        let t = run_two_party_session(&proto, &p.states[2], 9, 4).unwrap();
        let text = t.to_ndjson();
        let first = text.lines().next().unwrap();
        let v: serde_json::Value = serde_json::from_str(first).unwrap();
        assert_eq!(v["from"], "A");
        assert_eq!(v["type"], "round_outcome");
        assert_eq!(v["seq"], 0);
        assert_eq!(Transcript::parse_ndjson(&text).unwrap(), t.messages);
    }
}
