use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use locc2d_core::io::{protocol_from_json, protocol_to_json};
use locc2d_core::runtime::verify_protocol;
use locc2d_core::{demos, CompileConfig, DensityMatrix, ExecutionPlan, Problem, Protocol, Tolerances};

const EXIT_VERIFY: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_COMPILE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "locc2d", version, about = "Compile, verify and simulate one-way LOCC measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a problem file into a protocol file.
    Compile {
        problem: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Keep the input element order instead of promoting one that avoids an ancilla round.
        #[arg(long)]
        no_permute_heuristic: bool,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Check that a protocol realizes a problem's POVM.
    Verify {
        problem: PathBuf,
        protocol: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Sample outcomes of a protocol on one of the problem's states.
    Simulate {
        problem: PathBuf,
        protocol: PathBuf,
        #[arg(long, default_value_t = 1000)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0, conflicts_with = "mixture")]
        state_index: usize,
        /// Use the uniform mixture of all states.
        #[arg(long)]
        mixture: bool,
        /// Run two-party sessions and write their messages as NDJSON.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Build, compile, verify and simulate a bundled example.
    Demo {
        #[arg(value_parser = demos::DEMO_NAMES)]
        name: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        no_permute_heuristic: bool,
        #[arg(long, default_value_t = 10000)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone, Copy)]
struct TolArgs {
    #[arg(long, default_value_t = Tolerances::default().herm)]
    tol_herm: f64,
    #[arg(long, default_value_t = Tolerances::default().orth)]
    tol_orth: f64,
    #[arg(long, default_value_t = Tolerances::default().rank)]
    tol_rank: f64,
    #[arg(long, default_value_t = Tolerances::default().psd)]
    tol_psd: f64,
    #[arg(long, default_value_t = Tolerances::default().povm)]
    tol_povm: f64,
    #[arg(long, default_value_t = Tolerances::default().trace)]
    tol_trace: f64,
    #[arg(long, default_value_t = Tolerances::default().accept)]
    tol_accept: f64,
}

impl From<TolArgs> for Tolerances {
    fn from(t: TolArgs) -> Self {
        Tolerances {
            herm: t.tol_herm,
            orth: t.tol_orth,
            rank: t.tol_rank,
            psd: t.tol_psd,
            povm: t.tol_povm,
            trace: t.tol_trace,
            accept: t.tol_accept,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

type CmdResult = Result<u8, Failure>;

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_IO, format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

fn load_problem(path: &Path, tol: &Tolerances) -> Result<Problem, Failure> {
    Problem::from_json(&read(path)?, tol).map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn load_protocol(path: &Path) -> Result<Protocol, Failure> {
    protocol_from_json(&read(path)?).map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn compile_problem(problem: &Problem, config: &CompileConfig) -> Result<Protocol, Failure> {
    problem.compile(config).map_err(|e| fail(EXIT_COMPILE, format!("compilation failed: {e}")))
}

fn tree_summary(protocol: &Protocol) -> String {
    let tree = &protocol.tree;
    let mut s = format!(
        "rounds on longest path: {}, ancilla depth: {}, direct rounds: {}, ancilla rounds: {}",
        tree.round_depth(),
        tree.ancilla_depth(),
        tree.onb_nodes().len(),
        tree.ancilla_nodes().len()
    );
    for (i, a) in tree.ancilla_nodes().iter().enumerate() {
        let _ = write!(s, "\nancilla round {i}: sin^2(theta) = {:.15}", a.sin2_theta());
    }
    s
}

fn cmd_compile(problem: &Path, out: &Path, no_permute_heuristic: bool, tol: Tolerances) -> CmdResult {
    let problem = load_problem(problem, &tol)?;
    let config = CompileConfig { permute_heuristic: !no_permute_heuristic, tol };
    let protocol = compile_problem(&problem, &config)?;
    write(out, &protocol_to_json(&protocol))?;
    println!("{}", tree_summary(&protocol));
    Ok(0)
}

fn cmd_verify(problem: &Path, protocol: &Path, tol: Tolerances) -> CmdResult {
    let problem = load_problem(problem, &tol)?;
    let mut protocol = load_protocol(protocol)?;
    protocol.tolerances.accept = tol.accept;
    let report = verify_protocol(&protocol, &problem.povm, &problem.states);
    println!("{report}");
    Ok(if report.passed { 0 } else { EXIT_VERIFY })
}

fn select_state(problem: &Problem, index: usize, mixture: bool) -> Result<DensityMatrix, Failure> {
    if mixture {
        return problem.mixture().map_err(|e| fail(EXIT_INVALID, e.to_string()));
    }
    problem.states.get(index).cloned().ok_or_else(|| {
        fail(EXIT_INVALID, format!("state index {index} out of range ({} states)", problem.states.len()))
    })
}

fn counts_table(plan: &ExecutionPlan, rho: &DensityMatrix, counts: &BTreeMap<usize, u64>, shots: usize) -> String {
    let exact = plan.exact_distribution(rho).expect("state dims checked by the plan");
    let mut out = String::from("label  count  frequency  exact\n");
    let labels: std::collections::BTreeSet<usize> = exact.probabilities.keys().chain(counts.keys()).copied().collect();
    for l in labels {
        let c = counts.get(&l).copied().unwrap_or(0);
        let _ = writeln!(out, "{l:>5}  {c:>5}  {:.6}  {:.6}", c as f64 / shots as f64, exact.get(l));
    }
    if exact.leaks() {
        let _ = writeln!(out, "warning: state leaks outside the protocol subspace ({:.3e})", exact.support_leak);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    problem: &Path,
    protocol: &Path,
    shots: usize,
    seed: u64,
    state_index: usize,
    mixture: bool,
    transcripts: Option<&Path>,
    tol: Tolerances,
) -> CmdResult {
    let problem = load_problem(problem, &tol)?;
    let protocol = load_protocol(protocol)?;
    let rho = select_state(&problem, state_index, mixture)?;
    let plan = ExecutionPlan::new(&protocol).map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
    let counts = plan.sample(&rho, shots, seed).map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
    println!("shots: {shots}, seed: {seed}");
    print!("{}", counts_table(&plan, &rho, &counts, shots));
    if let Some(path) = transcripts {
        let sessions = plan.sessions(&rho, seed, shots as u64).map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
        let text: String = sessions.iter().map(|t| t.to_ndjson()).collect();
        write(path, &text)?;
        let agree = sessions.iter().all(|t| counts.contains_key(&t.label) && t.check_one_way().is_ok());
        println!("transcripts: {} sessions written to {}, one-way: {agree}", sessions.len(), path.display());
    }
    Ok(0)
}

fn success_probability(plan: &ExecutionPlan, problem: &Problem) -> Option<f64> {
    let labels = problem.state_labels.as_ref()?;
    let total: f64 = problem
        .states
        .iter()
        .zip(labels)
        .map(|(rho, &l)| plan.exact_distribution(rho).map(|d| d.get(l)).unwrap_or(0.0))
        .sum();
    Some(total / labels.len() as f64)
}

fn cmd_demo(name: &str, out_dir: Option<&Path>, no_permute_heuristic: bool, shots: usize, seed: u64) -> CmdResult {
    let tol = Tolerances::default();
    let problem = demos::by_name(name, &tol).map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
    let config = CompileConfig { permute_heuristic: !no_permute_heuristic, tol };
    let protocol = compile_problem(&problem, &config)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| fail(EXIT_IO, format!("cannot create {}: {e}", dir.display())))?;
        write(&dir.join(format!("{name}.problem.json")), &problem.to_json())?;
        write(&dir.join(format!("{name}.protocol.json")), &protocol_to_json(&protocol))?;
    }
    println!("demo: {name} (parties {:?}, permute heuristic {})", problem.dims, config.permute_heuristic);
    println!("{}", tree_summary(&protocol));
    let report = verify_protocol(&protocol, &problem.povm, &problem.states);
    println!("{report}");
    let plan = ExecutionPlan::new(&protocol).map_err(|e| fail(EXIT_COMPILE, e.to_string()))?;
    if let Some(p) = success_probability(&plan, &problem) {
        println!("success probability (uniform prior): {p:.15}");
    }
    let rho = problem.mixture().map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
    let counts = plan.sample(&rho, shots, seed).map_err(|e| fail(EXIT_INVALID, e.to_string()))?;
    println!("uniform mixture, shots: {shots}, seed: {seed}");
    print!("{}", counts_table(&plan, &rho, &counts, shots));
    Ok(if report.passed { 0 } else { EXIT_VERIFY })
}

fn run(cli: Cli) -> CmdResult {
    if let Command::Simulate { shots: 0, .. } | Command::Demo { shots: 0, .. } = cli.command {
        return Err(fail(EXIT_INVALID, "--shots must be at least 1"));
    }
    match cli.command {
        Command::Compile { problem, out, no_permute_heuristic, tol } => {
            cmd_compile(&problem, &out, no_permute_heuristic, tol.into())
        }
        Command::Verify { problem, protocol, tol } => cmd_verify(&problem, &protocol, tol.into()),
        Command::Simulate { problem, protocol, shots, seed, state_index, mixture, transcripts, tol } => {
            cmd_simulate(&problem, &protocol, shots, seed, state_index, mixture, transcripts.as_deref(), tol.into())
        }
        Command::Demo { name, out_dir, no_permute_heuristic, shots, seed } => {
            cmd_demo(&name, out_dir.as_deref(), no_permute_heuristic, shots, seed)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
