//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero when any
//! criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use locc2d_core::compiler::{ancilla_round, ProtocolTree, RankOne, SkTkPair};
use locc2d_core::runtime::verify_protocol;
use locc2d_core::walgate::walgate_basis;
use locc2d_core::{demos, CompileConfig, DensityMatrix, ExecutionPlan, Problem, Protocol, Tolerances};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:.0?}"))
}

fn success_probability(plan: &ExecutionPlan, problem: &Problem) -> Result<f64, String> {
    let labels = problem.state_labels.as_ref().ok_or("problem has no state labels")?;
    let mut worst: f64 = 1.0;
    for (rho, &l) in problem.states.iter().zip(labels) {
        worst = worst.min(plan.exact_distribution(rho).map_err(|e| e.to_string())?.get(l));
    }
    Ok(worst)
}

fn singlet_triplet() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let problem = demos::singlet_triplet(&tol).map_err(|e| e.to_string())?;
    let protocol = problem.compile(&CompileConfig::default()).map_err(|e| e.to_string())?;
    let plan = ExecutionPlan::new(&protocol).map_err(|e| e.to_string())?;
    let p = success_probability(&plan, &problem)?;
    check((p - 1.0).abs() <= 1e-12, || format!("success probability {p}"))?;
    let shots = 100_000;
    let mut errors = 0u64;
    for (i, rho) in problem.states.iter().enumerate() {
        let want = problem.state_labels.as_ref().unwrap()[i];
        let counts = plan.sample(rho, shots, 7 + i as u64).map_err(|e| e.to_string())?;
        errors += counts.iter().filter(|(&l, _)| l != want).map(|(_, &n)| n).sum::<u64>();
    }
    check(errors == 0, || format!("{errors} misidentified shots"))?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("p = {p:.15}, 2x{shots} shots, 0 errors, {elapsed:.2?}"))
}

fn trine() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let problem = demos::trine(&tol).map_err(|e| e.to_string())?;

    let off = CompileConfig { permute_heuristic: false, tol };
    let protocol = problem.compile(&off).map_err(|e| e.to_string())?;
    let node = match &protocol.tree {
        ProtocolTree::AliceAncilla(node) => node,
        _ => return Err("root is not an ancilla round".into()),
    };
    let sin2 = node.sin2_theta();
    check((sin2 - 0.8).abs() <= 1e-12, || format!("sin^2 theta = {sin2}"))?;

    // Φ̃_1^(1) = (1 − c̃_1) T̃_1 Π̃_1 T̃_1† from the transported decomposition.
    let elements: Vec<RankOne> = demos::trine_vectors()
        .iter()
        .enumerate()
        .map(|(i, v)| RankOne { label: i + 1, weight: v.norm_sqr(), vector: v.normalized().unwrap() })
        .collect();
    let dec =
        walgate_basis(&problem.subspace, &elements[0].coords(&problem.subspace), &tol).map_err(|e| e.to_string())?;
    let round = ancilla_round(&elements, &dec, &tol).map_err(|e| e.to_string())?;
    let pair = SkTkPair::build(&round.extended);
    let u = round.u_sa.matrix().kronecker(&locc2d_core::tensor::CMatrix::identity(2, 2));
    let s0 = locc2d_core::Ket::basis(0, vec![2]);
    let lifted = &u * s0.tensor(&elements[0].vector).amplitudes();
    let pi1 = &lifted * lifted.adjoint() * c(elements[0].weight, 0.0);
    let phi = (&pair.t[1] * pi1 * pair.t[1].adjoint()) * c(1.0 - round.coefficients[0], 0.0);
    let phi_norm = phi.norm();
    check(phi_norm <= 1e-10, || format!("|Phi_1^(1)| = {phi_norm:e}"))?;
    let branch1_label1 = ExecutionPlan::new(&protocol)
        .map_err(|e| e.to_string())?
        .branches()
        .iter()
        .filter(|b| b.label == 1 && b.path.first() == Some(&(0, 1)))
        .map(|b| b.kraus_chain.norm())
        .fold(0.0, f64::max);
    check(branch1_label1 <= 1e-10, || format!("label 1 reachable after ancilla outcome 1: {branch1_label1:e}"))?;

    let plan = ExecutionPlan::new(&protocol).map_err(|e| e.to_string())?;
    let residual = max_label_distance(&plan.induced_povm(), &problem.povm);
    check(residual <= 1e-8, || format!("induced residual {residual:e}"))?;

    let on = problem.compile(&CompileConfig::default()).map_err(|e| e.to_string())?;
    check(on.tree.ancilla_depth() == 0, || "heuristic tree still uses an ancilla".into())?;
    let report = verify_protocol(&on, &problem.povm, &problem.states);
    check(report.passed, || format!("heuristic tree fails verification:\n{report}"))?;

    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "sin^2 theta = {sin2:.15}, |Phi_1^(1)| = {phi_norm:.1e}, induced residual {residual:.1e}, direct with heuristic ({:.1e}), {elapsed:.2?}",
        report.induced_residual
    ))
}

fn random_suite() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let mut r = rng(20_250_101);
    let (mut worst_povm, mut worst_dist, mut with_ancilla, mut deepest) = (0.0f64, 0.0f64, 0, 0);
    for i in 0..500 {
        let n = r.random_range(2..=5);
        let m = r.random_range(3..=6);
        let sub = random_subspace(&mut r, &[2, n]);
        let povm = random_refinable_povm(&mut r, &sub, m);
        let config = CompileConfig { permute_heuristic: i % 2 == 0, tol };
        let protocol =
            Protocol::compile(&sub, &povm, &[2, n], &config).map_err(|e| format!("instance {i}: compile: {e}"))?;
        let depth = protocol.tree.ancilla_depth();
        check(depth <= m - 2, || format!("instance {i}: depth {depth} > M - 2 = {}", m - 2))?;
        with_ancilla += usize::from(depth > 0);
        deepest = deepest.max(depth);
        let plan = ExecutionPlan::new(&protocol).map_err(|e| format!("instance {i}: {e}"))?;
        let residual = max_label_distance(&plan.induced_povm(), &povm);
        check(residual <= 1e-8, || format!("instance {i}: induced residual {residual:e}"))?;
        worst_povm = worst_povm.max(residual);
        let targets = povm.per_label();
        for rho in basis_states(&sub) {
            let dist = plan.exact_distribution(&rho).map_err(|e| e.to_string())?;
            for (&label, e) in &targets {
                let dev = (dist.get(label) - born(rho.operator(), e)).abs();
                check(dev <= 1e-8, || format!("instance {i}: label {label} deviates by {dev:e}"))?;
                worst_dist = worst_dist.max(dev);
            }
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "500 instances, {with_ancilla} with ancilla rounds (max depth {deepest}), induced residual {worst_povm:.1e}, distribution deviation {worst_dist:.1e}, {elapsed:.2?}"
    ))
}

fn invariants() -> Outcome {
    let tol = Tolerances::default();
    let mut r = rng(4);
    let (mut orth, mut norms, mut ts, mut ss, mut cert, mut unit, mut trace) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..200 {
        let n = 2 + i % 4;
        let sub = random_subspace(&mut r, &[2, n]);
        let povm = random_rank_one_povm(&mut r, &sub, 3 + i % 4);
        let elements: Vec<RankOne> = povm
            .elements()
            .iter()
            .zip(povm.labels())
            .map(|(e, &label)| {
                let eig = locc2d_core::tensor::hermitian_eig(e, &tol).unwrap();
                RankOne { label, weight: eig.values[0], vector: eig.vectors[0].clone() }
            })
            .collect();
        let dec = walgate_basis(&sub, &elements[0].coords(&sub), &tol).map_err(|e| e.to_string())?;
        for k in 0..2 {
            orth = orth.max(dec.eta[k].inner(&dec.nu[k]).norm());
        }
        norms = norms.max((dec.eta_norms[0] + dec.eta_norms[1] - 1.0).abs());
        norms = norms.max((dec.nu_norms[0] + dec.nu_norms[1] - 1.0).abs());
        let pair = SkTkPair::build(&dec);
        for k in 0..2 {
            let mut p = locc2d_core::tensor::CMatrix::zeros(n, n);
            for v in [&dec.eta[k], &dec.nu[k]] {
                if v.norm_sqr() > 1e-24 {
                    p += v.outer(v) / c(v.norm_sqr(), 0.0);
                }
            }
            ts = ts.max(frobenius(&(&pair.t[k] * &pair.s[k]), &p));
            let z = dec.pi.outer(&dec.pi) * c(dec.eta_norms[k], 0.0)
                + dec.pi_perp.outer(&dec.pi_perp) * c(dec.nu_norms[k], 0.0);
            ss = ss.max(frobenius(&(&pair.s[k] * pair.s[k].adjoint()), &z));
        }
        let protocol = Protocol::compile(&sub, &povm, &[2, n], &CompileConfig { permute_heuristic: false, tol })
            .map_err(|e| e.to_string())?;
        for node in protocol.tree.onb_nodes() {
            cert = cert.max(node.certificate);
        }
        for node in protocol.tree.ancilla_nodes() {
            cert = cert.max(node.certificate);
            unit = unit.max(node.unitarity_residual());
            let u = node.u_sa.matrix().kronecker(&locc2d_core::tensor::CMatrix::identity(
                node.dims.iter().skip(1).product(),
                node.dims.iter().skip(1).product(),
            ));
            let rho = random_matrix(&mut r, 2, u.nrows() / 2);
            let rho = rho.adjoint() * &rho;
            let rho = &rho / rho.trace();
            let e = random_matrix(&mut r, 1, u.nrows() / 2);
            let e = e.adjoint() * &e;
            let embed = |x: &locc2d_core::tensor::CMatrix| {
                let mut big = locc2d_core::tensor::CMatrix::zeros(u.nrows(), u.nrows());
                big.view_mut((0, 0), x.shape()).copy_from(x);
                &u * big * u.adjoint()
            };
            let before = (&rho * &e).trace().re;
            let after = (embed(&rho) * embed(&e)).trace().re;
            trace = trace.max((before - after).abs() / before.abs().max(1.0));
        }
    }
    check(orth <= 1e-10 && norms <= 1e-10, || format!("Walgate residuals {orth:e}, {norms:e}"))?;
    check(ts <= 1e-12 && ss <= 1e-12, || format!("T S = I residual {ts:e}, S S^dagger = Z residual {ss:e}"))?;
    check(cert <= 1e-9, || format!("certificate {cert:e}"))?;
    check(trace <= 1e-12, || format!("embedding trace change {trace:e}"))?;
    check(unit <= 1e-12, || format!("unitarity {unit:e}"))?;
    Ok(format!(
        "200 instances: orthogonality {orth:.1e}, norm sums {norms:.1e}, TS=I {ts:.1e}, SS^dagger=Z {ss:.1e}, certificates {cert:.1e}, trace invariance {trace:.1e}, unitarity {unit:.1e} (full property suites: --test invariants)"
    ))
}

fn ghz3() -> Outcome {
    let tol = Tolerances::default();
    let problem = demos::ghz3(&tol).map_err(|e| e.to_string())?;
    let protocol = problem.compile(&CompileConfig::default()).map_err(|e| e.to_string())?;
    let plan = ExecutionPlan::new(&protocol).map_err(|e| e.to_string())?;
    let p = success_probability(&plan, &problem)?;
    check((p - 1.0).abs() <= 1e-10, || format!("success probability {p}"))?;
    let rounds = protocol.tree.round_depth();
    check(rounds >= 2, || format!("expected chained rounds, got depth {rounds}"))?;
    let report = verify_protocol(&protocol, &problem.povm, &problem.states);
    check(report.passed, || report.to_string())?;
    Ok(format!("p = {p:.15}, {rounds} chained rounds on the longest path"))
}

fn sessions() -> Outcome {
    let tol = Tolerances::default();
    let count = 10_000u64;
    let mut summary = Vec::new();
    for (name, heuristic) in [("singlet-triplet", true), ("trine", false), ("ghz3", true)] {
        let problem = demos::by_name(name, &tol).map_err(|e| e.to_string())?;
        let protocol =
            problem.compile(&CompileConfig { permute_heuristic: heuristic, tol }).map_err(|e| e.to_string())?;
        let plan = ExecutionPlan::new(&protocol).map_err(|e| e.to_string())?;
        let rho: DensityMatrix = problem.mixture().map_err(|e| e.to_string())?;
        let seed = 99;
        let transcripts = plan.sessions(&rho, seed, count).map_err(|e| e.to_string())?;
        let labels = plan.sample_labels(&rho, count as usize, seed).map_err(|e| e.to_string())?;
        let counts = plan.sample(&rho, count as usize, seed).map_err(|e| e.to_string())?;
        let mut session_counts = std::collections::BTreeMap::new();
        for (i, t) in transcripts.iter().enumerate() {
            check(t.label == labels[i], || format!("{name}: session {i} label {} vs {}", t.label, labels[i]))?;
            t.check_one_way().map_err(|e| format!("{name}: session {i}: {e}"))?;
            *session_counts.entry(t.label).or_insert(0u64) += 1;
        }
        check(session_counts == counts, || format!("{name}: counts differ"))?;
        let messages: usize = transcripts.iter().map(|t| t.messages.len()).sum();
        summary.push(format!("{name} {messages} messages"));
    }
    Ok(format!("3 x {count} sessions identical to sample(), all one-way ({})", summary.join(", ")))
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("AC1", "singlet/triplet discrimination", singlet_triplet),
        ("AC2", "trine ancilla round and heuristic", trine),
        ("AC3", "randomized oracle suite", random_suite),
        ("AC4", "invariant suites", invariants),
        ("AC5", "ghz3 multiparty", ghz3),
        ("AC6", "two-party session harness", sessions),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        match run() {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("{id} FAIL {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
