use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ExecutionPlan;
use crate::compiler::Protocol;
use crate::tensor::{DensityMatrix, Povm};

/// Certificates recorded at compile time must stay below this.
pub const CERTIFICATE_TOL: f64 = 1e-9;
pub const UNITARITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    /// `‖P Ê_m P − Π_m‖_F` per label.
    pub label_residuals: BTreeMap<usize, f64>,
    pub induced_residual: f64,
    pub completeness_residual: f64,
    /// Largest `|P(m) − Tr(ρ Π_m)|` per supplied state.
    pub state_deviations: Vec<f64>,
    pub support_leaks: Vec<f64>,
    pub max_direct_certificate: f64,
    pub max_ancilla_certificate: f64,
    pub max_unitarity_residual: f64,
    pub onb_rounds: usize,
    pub ancilla_rounds: usize,
    pub accept: f64,
    /// Set when the protocol could not be executed at all.
    pub malformed: Option<String>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn max_state_deviation(&self) -> f64 {
        self.state_deviations.iter().copied().fold(0.0, f64::max)
    }
}

fn failed(reason: String, accept: f64) -> VerificationReport {
    VerificationReport {
        label_residuals: BTreeMap::new(),
        induced_residual: f64::INFINITY,
        completeness_residual: f64::INFINITY,
        state_deviations: vec![],
        support_leaks: vec![],
        max_direct_certificate: f64::NAN,
        max_ancilla_certificate: f64::NAN,
        max_unitarity_residual: f64::NAN,
        onb_rounds: 0,
        ancilla_rounds: 0,
        accept,
        malformed: Some(reason),
        passed: false,
    }
}

/// Checks that `protocol` realizes `target` on its subspace: per-label induced
/// POVM, completeness, Born probabilities for `states`, and the certificates
/// stored in the tree. Failures are report entries.
pub fn verify_protocol(protocol: &Protocol, target: &Povm, states: &[DensityMatrix]) -> VerificationReport {
    let accept = protocol.tolerances.accept;
    let plan = match ExecutionPlan::new(protocol) {
        Ok(p) => p,
        Err(e) => return failed(e.to_string(), accept),
    };
    if target.dims() != plan.projector().dims() {
        return failed(
            format!("POVM dims {:?} differ from protocol dims {:?}", target.dims(), plan.projector().dims()),
            accept,
        );
    }
    let induced = plan.induced_povm().per_label();
    let wanted = target.per_label();
    let labels: BTreeSet<usize> = induced.keys().chain(wanted.keys()).copied().collect();
    let label_residuals: BTreeMap<usize, f64> = labels
        .iter()
        .map(|l| {
            let r = match (induced.get(l), wanted.get(l)) {
                (Some(a), Some(b)) => a.distance(b),
                (Some(a), None) => a.norm(),
                (None, Some(b)) => b.norm(),
                (None, None) => 0.0,
            };
            (*l, r)
        })
        .collect();
    let induced_residual = label_residuals.values().copied().fold(0.0, f64::max);
    let completeness_residual = plan.completeness_residual();

    let mut state_deviations = Vec::new();
    let mut support_leaks = Vec::new();
    for rho in states {
        match plan.exact_distribution(rho) {
            Ok(dist) => {
                let dev = labels
                    .iter()
                    .map(|l| {
                        let born = wanted.get(l).map_or(0.0, |e| rho.operator().trace_product(e));
                        (dist.get(*l) - born).abs()
                    })
                    .fold(0.0, f64::max);
                state_deviations.push(dev);
                support_leaks.push(dist.support_leak);
            }
            Err(_) => {
                state_deviations.push(f64::INFINITY);
                support_leaks.push(f64::INFINITY);
            }
        }
    }

    let tree = &protocol.tree;
    let onb = tree.onb_nodes();
    let anc = tree.ancilla_nodes();
    let max_direct_certificate = onb.iter().map(|n| n.certificate).fold(0.0, f64::max);
    let max_ancilla_certificate = anc.iter().map(|n| n.certificate).fold(0.0, f64::max);
    let max_unitarity_residual = anc.iter().map(|n| n.unitarity_residual()).fold(0.0, f64::max);

    let passed = induced_residual <= accept
        && completeness_residual <= accept
        && state_deviations.iter().all(|&d| d <= accept)
        && max_direct_certificate <= CERTIFICATE_TOL
        && max_ancilla_certificate <= CERTIFICATE_TOL
        && max_unitarity_residual <= UNITARITY_TOL;
    VerificationReport {
        label_residuals,
        induced_residual,
        completeness_residual,
        state_deviations,
        support_leaks,
        max_direct_certificate,
        max_ancilla_certificate,
        max_unitarity_residual,
        onb_rounds: onb.len(),
        ancilla_rounds: anc.len(),
        accept,
        malformed: None,
        passed,
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {}", if self.passed { "PASS" } else { "FAIL" })?;
        if let Some(reason) = &self.malformed {
            return writeln!(f, "malformed: {reason}");
        }
        writeln!(f, "accept tolerance: {:.1e}", self.accept)?;
        writeln!(f, "max induced-POVM residual: {:.3e}", self.induced_residual)?;
        for (l, r) in &self.label_residuals {
            writeln!(f, "  label {l}: {r:.3e}")?;
        }
        writeln!(f, "completeness residual: {:.3e}", self.completeness_residual)?;
        for (i, (d, leak)) in self.state_deviations.iter().zip(&self.support_leaks).enumerate() {
            write!(f, "state {i}: max distribution deviation {d:.3e}")?;
            if *leak > super::LEAK_WARNING {
                write!(f, " (warning: support leak {leak:.3e})")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "rounds: {} direct, {} ancilla", self.onb_rounds, self.ancilla_rounds)?;
        writeln!(f, "max direct certificate: {:.3e}", self.max_direct_certificate)?;
        writeln!(f, "max ancilla certificate: {:.3e}", self.max_ancilla_certificate)?;
        write!(f, "max U_SA unitarity residual: {:.3e}", self.max_unitarity_residual)
    }
}
