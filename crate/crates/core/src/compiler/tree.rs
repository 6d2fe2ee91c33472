use crate::tensor::{Ket, Operator, Povm};

/// A compiled one-way LOCC strategy.
///
/// Every node acts on a *frame*: the joint space named by its `dims`. Round
/// nodes measure the frame's first factor; their Bob-side children act on the
/// remaining factors.
#[derive(Clone, Debug, PartialEq)]
pub enum ProtocolTree {
    /// Local measurement on the frame. Elements sum to the projector of the
    /// leaf's stated space (`povm.resolved()`).
    BobLeaf(BobLeaf),
    AliceOnb(AliceOnbNode),
    AliceAncilla(AliceAncillaNode),
    /// Label drawn from a fixed distribution (one-dimensional residual).
    Classical(ClassicalLeaf),
    /// Zero-padding isometry `dims_in → dims_out`: pads an odd factor and
    /// splits it as `2 ⊗ d/2`, or drops a trivial factor.
    Embed(EmbedNode),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BobLeaf {
    pub povm: Povm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AliceOnbNode {
    pub dims: Vec<usize>,
    pub alice_onb: [Ket; 2],
    /// `c_m` of the round, in element order.
    pub coefficients: Vec<f64>,
    /// Labels of the round's elements, aligned with `coefficients`.
    pub labels: Vec<usize>,
    /// `‖Σ c_m Π_m − Z_0‖_F` recorded at compile time.
    pub certificate: f64,
    pub children: [Box<ProtocolTree>; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct AliceAncillaNode {
    pub dims: Vec<usize>,
    pub alice_onb: [Ket; 2],
    pub theta: f64,
    /// Unitary on `ancilla ⊗ Alice` in Alice's computational basis, index `s * 2 + a`.
    pub u_sa: Operator,
    /// `c̃_m` of the round, in element order.
    pub coefficients: Vec<f64>,
    pub labels: Vec<usize>,
    /// `‖Σ c̃_m Π_m − sin²θ Z_0‖_F` recorded at compile time.
    pub certificate: f64,
    /// Ancilla outcome 0: Bob measures on his factor.
    pub branch0: Box<ProtocolTree>,
    /// Ancilla outcome 1: residual protocol on the same frame.
    pub branch1: Box<ProtocolTree>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalLeaf {
    pub dims: Vec<usize>,
    pub labels: Vec<usize>,
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedNode {
    pub dims_in: Vec<usize>,
    pub dims_out: Vec<usize>,
    pub child: Box<ProtocolTree>,
}

impl AliceAncillaNode {
    pub fn sin2_theta(&self) -> f64 {
        self.theta.sin().powi(2)
    }

    pub fn unitarity_residual(&self) -> f64 {
        let u = self.u_sa.matrix();
        (u.adjoint() * u - crate::tensor::CMatrix::identity(4, 4)).norm()
    }
}

impl ProtocolTree {
    /// Dims of the frame this node acts on.
    pub fn dims(&self) -> &[usize] {
        match self {
            ProtocolTree::BobLeaf(l) => l.povm.dims(),
            ProtocolTree::AliceOnb(n) => &n.dims,
            ProtocolTree::AliceAncilla(n) => &n.dims,
            ProtocolTree::Classical(c) => &c.dims,
            ProtocolTree::Embed(e) => &e.dims_in,
        }
    }

    pub fn children(&self) -> Vec<&ProtocolTree> {
        match self {
            ProtocolTree::AliceOnb(n) => vec![&n.children[0], &n.children[1]],
            ProtocolTree::AliceAncilla(n) => vec![&n.branch0, &n.branch1],
            ProtocolTree::Embed(e) => vec![&e.child],
            ProtocolTree::BobLeaf(_) | ProtocolTree::Classical(_) => vec![],
        }
    }

    /// Pre-order traversal.
    pub fn nodes(&self) -> Vec<&ProtocolTree> {
        let mut out = vec![self];
        for c in self.children() {
            out.extend(c.nodes());
        }
        out
    }

    /// Largest number of ancilla rounds on any root-to-leaf path.
    pub fn ancilla_depth(&self) -> usize {
        let own = usize::from(matches!(self, ProtocolTree::AliceAncilla(_)));
        own + self.children().iter().map(|c| c.ancilla_depth()).max().unwrap_or(0)
    }

    /// Largest number of measurement rounds (ONB or ancilla) on any path.
    pub fn round_depth(&self) -> usize {
        let own = usize::from(matches!(self, ProtocolTree::AliceOnb(_) | ProtocolTree::AliceAncilla(_)));
        own + self.children().iter().map(|c| c.round_depth()).max().unwrap_or(0)
    }

    pub fn ancilla_nodes(&self) -> Vec<&AliceAncillaNode> {
        self.nodes()
            .into_iter()
            .filter_map(|n| match n {
                ProtocolTree::AliceAncilla(a) => Some(a),
                _ => None,
            })
            .collect()
    }

    pub fn onb_nodes(&self) -> Vec<&AliceOnbNode> {
        self.nodes()
            .into_iter()
            .filter_map(|n| match n {
                ProtocolTree::AliceOnb(a) => Some(a),
                _ => None,
            })
            .collect()
    }

    /// Number of outcome elements the node resolves.
    pub fn outcome_count(&self) -> usize {
        match self {
            ProtocolTree::BobLeaf(l) => l.povm.len(),
            ProtocolTree::AliceOnb(n) => n.labels.len(),
            ProtocolTree::AliceAncilla(n) => n.labels.len(),
            ProtocolTree::Classical(c) => c.labels.len(),
            ProtocolTree::Embed(e) => e.child.outcome_count(),
        }
    }

    pub fn bob_leaves_mut(&mut self) -> Vec<&mut BobLeaf> {
        match self {
            ProtocolTree::BobLeaf(l) => vec![l],
            ProtocolTree::AliceOnb(n) => {
                let [a, b] = &mut n.children;
                let mut v = a.bob_leaves_mut();
                v.extend(b.bob_leaves_mut());
                v
            }
            ProtocolTree::AliceAncilla(n) => {
                let mut v = n.branch0.bob_leaves_mut();
                v.extend(n.branch1.bob_leaves_mut());
                v
            }
            ProtocolTree::Embed(e) => e.child.bob_leaves_mut(),
            ProtocolTree::Classical(_) => vec![],
        }
    }

    /// Structural checks: frame dims agree between parents and children and
    /// every ancilla round shrinks the residual measurement.
    pub fn check_well_formed(&self) -> crate::Result<()> {
        use crate::Error::MalformedTree;
        match self {
            ProtocolTree::BobLeaf(_) => Ok(()),
            ProtocolTree::Classical(c) => {
                if c.labels.len() != c.probabilities.len() || c.labels.is_empty() {
                    return Err(MalformedTree("classical leaf labels and probabilities differ".into()));
                }
                Ok(())
            }
            ProtocolTree::Embed(e) => {
                let n_in: usize = e.dims_in.iter().product();
                let n_out: usize = e.dims_out.iter().product();
                if n_out < n_in || e.child.dims() != e.dims_out.as_slice() {
                    return Err(MalformedTree(format!("embed {:?} -> {:?} inconsistent", e.dims_in, e.dims_out)));
                }
                e.child.check_well_formed()
            }
            ProtocolTree::AliceOnb(n) => {
                check_round_frame(&n.dims, &n.alice_onb)?;
                for c in &n.children {
                    if c.dims() != &n.dims[1..] {
                        return Err(MalformedTree(format!("child dims {:?} under frame {:?}", c.dims(), n.dims)));
                    }
                    c.check_well_formed()?;
                }
                Ok(())
            }
            ProtocolTree::AliceAncilla(n) => {
                check_round_frame(&n.dims, &n.alice_onb)?;
                if n.u_sa.dims() != [2, 2] {
                    return Err(MalformedTree("u_sa must act on ancilla ⊗ Alice".into()));
                }
                if n.branch0.dims() != &n.dims[1..] || n.branch1.dims() != n.dims.as_slice() {
                    return Err(MalformedTree("ancilla branch dims inconsistent".into()));
                }
                if n.branch1.outcome_count() >= n.labels.len() {
                    return Err(MalformedTree("ancilla residual does not shrink".into()));
                }
                n.branch0.check_well_formed()?;
                n.branch1.check_well_formed()
            }
        }
    }
}

fn check_round_frame(dims: &[usize], onb: &[Ket; 2]) -> crate::Result<()> {
    if dims.len() < 2 || dims[0] != 2 || onb.iter().any(|k| k.dims() != [2]) {
        return Err(crate::Error::MalformedTree(format!("round on frame {dims:?} needs a qubit first factor")));
    }
    Ok(())
}
