//! JSON problem and protocol files.
//!
//! Complex numbers are `[re, im]` pairs, matrices are arrays of rows and
//! vectors are flat arrays of complex numbers, all in the row-major factor
//! ordering of [`crate::tensor`].

use serde::{Deserialize, Serialize};

use crate::compiler::{
    AliceAncillaNode, AliceOnbNode, BobLeaf, ClassicalLeaf, CompileConfig, EmbedNode, Protocol, ProtocolTree,
};
use crate::error::{Error, Result};
use crate::subspace::{span_states, TwoDimSubspace};
use crate::tensor::{CMatrix, CVector, DensityMatrix, Ket, Operator, Povm, Tolerances, C64};

pub const PROTOCOL_FORMAT: &str = "locc2d-protocol";
pub const PROTOCOL_VERSION: u32 = 1;
pub const COMPILER_VERSION: &str = env!("CARGO_PKG_VERSION");

pub type JsonComplex = [f64; 2];
pub type JsonMatrix = Vec<Vec<JsonComplex>>;
pub type JsonVector = Vec<JsonComplex>;

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    m.row_iter().map(|row| row.iter().map(|c| [c.re, c.im]).collect()).collect()
}

pub fn matrix_from_json(rows: &JsonMatrix, what: &str) -> Result<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Format(format!("{what}: matrix is not square")));
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Format(format!("{what}: non-finite entry")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn vector_to_json(v: &CVector) -> JsonVector {
    v.iter().map(|c| [c.re, c.im]).collect()
}

pub fn vector_from_json(v: &JsonVector, what: &str) -> Result<CVector> {
    if v.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Format(format!("{what}: non-finite entry")));
    }
    Ok(CVector::from_iterator(v.len(), v.iter().map(|c| C64::new(c[0], c[1]))))
}

fn ket_from_json(v: &JsonVector, dims: &[usize], what: &str) -> Result<Ket> {
    Ket::new(vector_from_json(v, what)?, dims.to_vec())
}

fn operator_from_json(m: &JsonMatrix, dims: &[usize], what: &str) -> Result<Operator> {
    Operator::new(matrix_from_json(m, what)?, dims.to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledElement {
    pub label: usize,
    pub element: JsonMatrix,
}

/// On-disk measurement problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dims: Vec<usize>,
    pub states: Vec<JsonMatrix>,
    /// Label each state should be identified with, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_labels: Option<Vec<usize>>,
    pub povm: Vec<LabeledElement>,
}

/// A validated problem: states spanning a two-dimensional subspace and a
/// POVM summing to its projector.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: Option<String>,
    pub dims: Vec<usize>,
    pub states: Vec<DensityMatrix>,
    pub state_labels: Option<Vec<usize>>,
    pub povm: Povm,
    pub subspace: TwoDimSubspace,
}

impl Problem {
    /// Validates states and POVM; the POVM must resolve the states' span.
    pub fn new(
        name: Option<String>,
        dims: Vec<usize>,
        states: Vec<DensityMatrix>,
        state_labels: Option<Vec<usize>>,
        elements: Vec<Operator>,
        labels: Vec<usize>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if let Some(sl) = &state_labels {
            if sl.len() != states.len() {
                return Err(Error::Format("state_labels and states differ in length".into()));
            }
        }
        if states.iter().any(|s| s.dims() != dims.as_slice()) {
            return Err(Error::Dimension(format!("a state does not live on dims {dims:?}")));
        }
        let subspace = span_states(&states, tol)?;
        let povm = Povm::new(elements, labels, subspace.projector().clone(), tol)?;
        Ok(Problem { name, dims, states, state_labels, povm, subspace })
    }

    pub fn from_file(file: &ProblemFile, tol: &Tolerances) -> Result<Self> {
        let states = file
            .states
            .iter()
            .enumerate()
            .map(|(i, m)| DensityMatrix::new(operator_from_json(m, &file.dims, &format!("state {i}"))?, tol))
            .collect::<Result<Vec<_>>>()?;
        let elements = file
            .povm
            .iter()
            .map(|e| operator_from_json(&e.element, &file.dims, &format!("POVM label {}", e.label)))
            .collect::<Result<Vec<_>>>()?;
        let labels = file.povm.iter().map(|e| e.label).collect();
        Problem::new(file.name.clone(), file.dims.clone(), states, file.state_labels.clone(), elements, labels, tol)
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            name: self.name.clone(),
            dims: self.dims.clone(),
            states: self.states.iter().map(|s| matrix_to_json(s.operator().matrix())).collect(),
            state_labels: self.state_labels.clone(),
            povm: self
                .povm
                .elements()
                .iter()
                .zip(self.povm.labels())
                .map(|(e, &label)| LabeledElement { label, element: matrix_to_json(e.matrix()) })
                .collect(),
        }
    }

    pub fn from_json(text: &str, tol: &Tolerances) -> Result<Self> {
        Problem::from_file(&serde_json::from_str(text)?, tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("finite problem data")
    }

    pub fn compile(&self, config: &CompileConfig) -> Result<Protocol> {
        Protocol::compile(&self.subspace, &self.povm, &self.dims, config)
    }

    /// Uniform mixture of all states.
    pub fn mixture(&self) -> Result<DensityMatrix> {
        DensityMatrix::mixture(&self.states)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceJson {
    pub pi: JsonVector,
    pub pi_perp: JsonVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeJson {
    BobLeaf {
        dims: Vec<usize>,
        resolved: JsonMatrix,
        elements: Vec<LabeledElement>,
    },
    AliceOnb {
        dims: Vec<usize>,
        alice_onb: [JsonVector; 2],
        coefficients: Vec<f64>,
        labels: Vec<usize>,
        certificate: f64,
        children: [Box<TreeJson>; 2],
    },
    AliceAncilla {
        dims: Vec<usize>,
        alice_onb: [JsonVector; 2],
        theta: f64,
        u_sa: JsonMatrix,
        coefficients: Vec<f64>,
        labels: Vec<usize>,
        certificate: f64,
        branch0: Box<TreeJson>,
        branch1: Box<TreeJson>,
    },
    Classical {
        dims: Vec<usize>,
        labels: Vec<usize>,
        probabilities: Vec<f64>,
    },
    Embed {
        dims_in: Vec<usize>,
        dims_out: Vec<usize>,
        child: Box<TreeJson>,
    },
}

fn onb_to_json(onb: &[Ket; 2]) -> [JsonVector; 2] {
    [vector_to_json(onb[0].amplitudes()), vector_to_json(onb[1].amplitudes())]
}

fn onb_from_json(onb: &[JsonVector; 2]) -> Result<[Ket; 2]> {
    Ok([ket_from_json(&onb[0], &[2], "alice_onb")?, ket_from_json(&onb[1], &[2], "alice_onb")?])
}

impl TreeJson {
    pub fn from_tree(tree: &ProtocolTree) -> Self {
        match tree {
            ProtocolTree::BobLeaf(l) => TreeJson::BobLeaf {
                dims: l.povm.dims().to_vec(),
                resolved: matrix_to_json(l.povm.resolved().matrix()),
                elements: l
                    .povm
                    .elements()
                    .iter()
                    .zip(l.povm.labels())
                    .map(|(e, &label)| LabeledElement { label, element: matrix_to_json(e.matrix()) })
                    .collect(),
            },
            ProtocolTree::AliceOnb(n) => TreeJson::AliceOnb {
                dims: n.dims.clone(),
                alice_onb: onb_to_json(&n.alice_onb),
                coefficients: n.coefficients.clone(),
                labels: n.labels.clone(),
                certificate: n.certificate,
                children: [
                    Box::new(TreeJson::from_tree(&n.children[0])),
                    Box::new(TreeJson::from_tree(&n.children[1])),
                ],
            },
            ProtocolTree::AliceAncilla(n) => TreeJson::AliceAncilla {
                dims: n.dims.clone(),
                alice_onb: onb_to_json(&n.alice_onb),
                theta: n.theta,
                u_sa: matrix_to_json(n.u_sa.matrix()),
                coefficients: n.coefficients.clone(),
                labels: n.labels.clone(),
                certificate: n.certificate,
                branch0: Box::new(TreeJson::from_tree(&n.branch0)),
                branch1: Box::new(TreeJson::from_tree(&n.branch1)),
            },
            ProtocolTree::Classical(c) => TreeJson::Classical {
                dims: c.dims.clone(),
                labels: c.labels.clone(),
                probabilities: c.probabilities.clone(),
            },
            ProtocolTree::Embed(e) => TreeJson::Embed {
                dims_in: e.dims_in.clone(),
                dims_out: e.dims_out.clone(),
                child: Box::new(TreeJson::from_tree(&e.child)),
            },
        }
    }

    pub fn to_tree(&self) -> Result<ProtocolTree> {
        Ok(match self {
            TreeJson::BobLeaf { dims, resolved, elements } => {
                let ops = elements
                    .iter()
                    .map(|e| operator_from_json(&e.element, dims, "leaf element"))
                    .collect::<Result<Vec<_>>>()?;
                let labels = elements.iter().map(|e| e.label).collect();
                let resolved = operator_from_json(resolved, dims, "leaf resolved")?;
                ProtocolTree::BobLeaf(BobLeaf { povm: Povm::new_unchecked(ops, labels, resolved)? })
            }
            TreeJson::AliceOnb { dims, alice_onb, coefficients, labels, certificate, children } => {
                ProtocolTree::AliceOnb(AliceOnbNode {
                    dims: dims.clone(),
                    alice_onb: onb_from_json(alice_onb)?,
                    coefficients: coefficients.clone(),
                    labels: labels.clone(),
                    certificate: *certificate,
                    children: [Box::new(children[0].to_tree()?), Box::new(children[1].to_tree()?)],
                })
            }
            TreeJson::AliceAncilla {
                dims,
                alice_onb,
                theta,
                u_sa,
                coefficients,
                labels,
                certificate,
                branch0,
                branch1,
            } => ProtocolTree::AliceAncilla(AliceAncillaNode {
                dims: dims.clone(),
                alice_onb: onb_from_json(alice_onb)?,
                theta: *theta,
                u_sa: operator_from_json(u_sa, &[2, 2], "u_sa")?,
                coefficients: coefficients.clone(),
                labels: labels.clone(),
                certificate: *certificate,
                branch0: Box::new(branch0.to_tree()?),
                branch1: Box::new(branch1.to_tree()?),
            }),
            TreeJson::Classical { dims, labels, probabilities } => ProtocolTree::Classical(ClassicalLeaf {
                dims: dims.clone(),
                labels: labels.clone(),
                probabilities: probabilities.clone(),
            }),
            TreeJson::Embed { dims_in, dims_out, child } => ProtocolTree::Embed(EmbedNode {
                dims_in: dims_in.clone(),
                dims_out: dims_out.clone(),
                child: Box::new(child.to_tree()?),
            }),
        })
    }
}

/// On-disk compiled protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolFile {
    pub format: String,
    pub version: u32,
    pub compiler_version: String,
    pub tolerances: Tolerances,
    pub permute_heuristic: bool,
    pub dims: Vec<usize>,
    pub subspace: SubspaceJson,
    pub tree: TreeJson,
}

impl ProtocolFile {
    pub fn from_protocol(p: &Protocol) -> Self {
        ProtocolFile {
            format: PROTOCOL_FORMAT.into(),
            version: PROTOCOL_VERSION,
            compiler_version: COMPILER_VERSION.into(),
            tolerances: p.tolerances,
            permute_heuristic: p.permute_heuristic,
            dims: p.subspace.dims().to_vec(),
            subspace: SubspaceJson {
                pi: vector_to_json(p.subspace.pi().amplitudes()),
                pi_perp: vector_to_json(p.subspace.pi_perp().amplitudes()),
            },
            tree: TreeJson::from_tree(&p.tree),
        }
    }

    pub fn to_protocol(&self) -> Result<Protocol> {
        if self.format != PROTOCOL_FORMAT || self.version != PROTOCOL_VERSION {
            return Err(Error::Format(format!("unsupported protocol format {} v{}", self.format, self.version)));
        }
        let subspace = TwoDimSubspace::from_orthonormal(
            ket_from_json(&self.subspace.pi, &self.dims, "subspace.pi")?,
            ket_from_json(&self.subspace.pi_perp, &self.dims, "subspace.pi_perp")?,
            &self.tolerances,
        )?;
        Ok(Protocol {
            subspace,
            tree: self.tree.to_tree()?,
            tolerances: self.tolerances,
            permute_heuristic: self.permute_heuristic,
        })
    }
}

pub fn protocol_to_json(p: &Protocol) -> String {
    serde_json::to_string_pretty(&ProtocolFile::from_protocol(p)).expect("finite protocol data")
}

pub fn protocol_from_json(text: &str) -> Result<Protocol> {
    serde_json::from_str::<ProtocolFile>(text)?.to_protocol()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos;

    #[test]
    fn protocol_round_trip_is_bit_exact() {
        let tol = Tolerances::default();
        for name in demos::DEMO_NAMES {
            for permute_heuristic in [true, false] {
                let p = demos::by_name(name, &tol).unwrap();
                let proto = p.compile(&CompileConfig { permute_heuristic, tol }).unwrap();
                let text = protocol_to_json(&proto);
                let back = protocol_from_json(&text).unwrap();
                assert_eq!(back, proto);
                assert_eq!(protocol_to_json(&back), text);
            }
        }
    }

    #[test]
    fn problem_round_trip() {
        let tol = Tolerances::default();
        let p = demos::trine(&tol).unwrap();
        let text = p.to_json();
        let back = Problem::from_json(&text, &tol).unwrap();
        assert_eq!(back.to_file(), p.to_file());
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn incomplete_povm_is_rejected() {
        let tol = Tolerances::default();
        let mut file = demos::singlet_triplet(&tol).unwrap().to_file();
        for e in &mut file.povm {
            for x in e.element.iter_mut().flatten() {
                x[0] *= 0.9;
                x[1] *= 0.9;
            }
        }
        assert!(matches!(Problem::from_file(&file, &tol), Err(Error::Incomplete { .. })));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let tol = Tolerances::default();
        assert!(Problem::from_json("{\"dims\": [2, 2]}", &tol).is_err());
        let mut file = demos::singlet_triplet(&tol).unwrap().to_file();
        file.state_labels = Some(vec![1]);
        assert!(matches!(Problem::from_file(&file, &tol), Err(Error::Format(_))));
        file.state_labels = None;
        file.states[0].pop();
        assert!(Problem::from_file(&file, &tol).is_err());

        let proto = demos::singlet_triplet(&tol).unwrap().compile(&CompileConfig::default()).unwrap();
        let mut pf = ProtocolFile::from_protocol(&proto);
        pf.format = "something-else".into();
        assert!(matches!(pf.to_protocol(), Err(Error::Format(_))));
        assert!(protocol_from_json("{\"format\": \"locc2d-protocol\"").is_err());
    }

    #[test]
    fn tree_kinds_are_tagged() {
        let tol = Tolerances::default();
        let proto = demos::trine(&tol).unwrap().compile(&CompileConfig { permute_heuristic: false, tol }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&protocol_to_json(&proto)).unwrap();
        assert_eq!(v["format"], PROTOCOL_FORMAT);
        assert_eq!(v["tree"]["kind"], "alice_ancilla");
        assert_eq!(v["tree"]["branch0"]["kind"], "bob_leaf");
        assert_eq!(v["tree"]["branch1"]["kind"], "alice_onb");
    }
}
