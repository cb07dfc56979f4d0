//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 not solvable,
//! 3 internal invariant breach.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::approx::{ApproxError, ApproxOptions, ApproxResult, Provenance, RowClass, infer_problem3};
use crate::dynamics::{Regime, Trajectory, simulate};
use crate::exact::{
    ExactOptions, InferenceError, InferenceResult, Problem2Result, SolvabilityReport, SourceStatus, infer_problem1,
    infer_problem2, source_residual,
};
use crate::linalg::Mat;
use crate::measurement::{MeasurementPair, build_pq};
use crate::montecarlo::{McConfig, McError, mc_edge_errors, mc_window_error, mean_trajectory, sample_x0};
use crate::par::{Execution, init_threads_from_env};
use crate::real::{Real, to_f64};
use crate::scenario::{
    self, IoError, RunManifest, Scenario, load_trajectory, parse_x0, read_file, trajectory_to_csv, trajectory_to_json,
    write_file,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_SOLVABLE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

const DEFAULT_FIG4B_ENDS: &[usize] = &[23, 25, 30, 40, 50, 75, 100, 150, 200, 300, 500, 700, 1000];

#[derive(Debug, Parser)]
#[command(
    name = "opinet",
    version,
    about = "Simulate opinion dynamics and infer influence networks from trajectories"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write the trajectory as CSV and JSON.
    Simulate(SimulateArgs),
    /// Infer the network from a trajectory.
    Infer(InferArgs),
    /// Regenerate the data behind a figure or worked example.
    Reproduce(ReproduceArgs),
    /// Print the data matrices P and Q of a trajectory window.
    Pq(PqArgs),
    /// Validate a scenario file.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file, or a bundled name (toy12, krackhardt).
    pub scenario: String,
    /// Innate opinions: a file (JSON array or numbers) or `random:SEED`.
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Trajectory file (.json or .csv).
    pub trajectory: PathBuf,
    #[arg(long, value_enum)]
    pub problem: Problem,
    /// Largest window start (problem 3).
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Window end (problem 3); defaults to the first near-steady step.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 1e-7)]
    pub zero_tol: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub agree_tol: f64,
    /// Problem 3: also require a zero diagonal for non-follower rows.
    #[arg(long)]
    pub diagonal_check: bool,
    /// Relative rank tolerance; defaults by trajectory precision.
    #[arg(long)]
    pub rank_tol: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Toy12,
    Fig3,
    Fig4a,
    Fig4b,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    /// Monte-Carlo samples (fig3 and fig4a default 1000, fig4b 200).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Defaults to the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Window start for fig3 and fig4b.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Window end for fig3.
    #[arg(long, default_value_t = 30)]
    pub p: usize,
    /// Window ends for fig4b.
    #[arg(long, value_delimiter = ',')]
    pub ends: Option<Vec<usize>>,
    /// Steps for fig4a; defaults to the scenario horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Run samples on one thread.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PqArgs {
    pub trajectory: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    /// Defaults to the last usable step.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub rank_tol: Option<f64>,
    /// Also write P.csv, Q.csv and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub scenario: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Input(#[from] IoError),
    #[error("{0}")]
    NotSolvable(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => EXIT_USAGE,
            CliError::NotSolvable(_) => EXIT_NOT_SOLVABLE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::AllSamplesDegenerate(_) => CliError::NotSolvable(e.to_string()),
            McError::Dynamics(_) | McError::Measurement(_) => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_threads_from_env();
    let raw: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, &raw) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, raw: &[String]) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a, raw),
        Command::Infer(a) => cmd_infer(&a, raw),
        Command::Reproduce(a) => cmd_reproduce(&a, raw),
        Command::Pq(a) => cmd_pq(&a, raw),
        Command::Validate(a) => cmd_validate(&a),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Input(IoError::Io {
            path: dir.to_owned(),
            source,
        })
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes")
}

fn mat_f64(m: &Mat<Real>) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| m.row(i).iter().copied().map(to_f64).collect())
        .collect()
}

fn opt_f64(v: &[Option<Real>]) -> Vec<Option<f64>> {
    v.iter().map(|x| x.map(to_f64)).collect()
}

/// Records a scenario input: file hash for paths, content hash for bundled names.
fn record_scenario(manifest: &mut RunManifest, arg: &str, scenario: &Scenario) {
    match std::fs::read(arg) {
        Ok(bytes) if Path::new(arg).exists() => manifest.input(arg, &bytes),
        _ => record_bundled(manifest, scenario),
    }
}

fn record_bundled(manifest: &mut RunManifest, scenario: &Scenario) {
    manifest
        .input_hashes
        .insert(format!("bundled:{}", scenario.name()), scenario.file.hash());
}

fn cmd_simulate(a: &SimulateArgs, raw: &[String]) -> Result<(), CliError> {
    let scenario = Scenario::resolve(&a.scenario)?;
    let horizon = a.horizon.unwrap_or(scenario.file.simulation.horizon);
    if horizon == 0 {
        return Err(CliError::Usage("--horizon must be at least 1".into()));
    }
    let n = scenario.network.n();
    let mut manifest = RunManifest::new("simulate", raw);
    record_scenario(&mut manifest, &a.scenario, &scenario);
    let x0 = match a.x0.as_deref() {
        Some(spec) => match spec.strip_prefix("random:") {
            Some(seed) => {
                let seed: u64 = seed
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad seed in --x0 {spec:?}")))?;
                manifest.param("x0_seed", seed);
                sample_x0(n, seed, 0)
            }
            None => {
                let text = read_file(Path::new(spec))?;
                manifest.input(spec, text.as_bytes());
                parse_x0(&text, spec)?
            }
        },
        None => match &scenario.file.x0 {
            Some(x0) => x0.clone(),
            None => {
                let seed = scenario.file.simulation.seed;
                manifest.param("x0_seed", seed);
                sample_x0(n, seed, 0)
            }
        },
    };
    let traj = simulate(&scenario.network, &x0, horizon).map_err(|e| CliError::Usage(e.to_string()))?;
    ensure_dir(&a.out)?;
    write_file(&a.out.join("trajectory.csv"), &trajectory_to_csv(&traj))?;
    write_file(
        &a.out.join("trajectory.json"),
        &trajectory_to_json(&traj, Some(&scenario.file.hash())),
    )?;
    manifest.param("scenario", scenario.name());
    manifest.param("horizon", horizon);
    manifest.param("x0", &x0);
    manifest.outputs = vec!["trajectory.csv".into(), "trajectory.json".into()];
    manifest.finish(&a.out)?;
    println!(
        "simulated {} steps of {} ({} individuals, regime {})",
        horizon,
        scenario.name(),
        n,
        regime_name(traj.regime)
    );
    Ok(())
}

fn regime_name(r: Option<Regime>) -> &'static str {
    match r {
        Some(Regime::ProblemI) => "I",
        Some(Regime::ProblemII) => "II",
        Some(Regime::ProblemIII) => "III",
        None => "unknown",
    }
}

fn check_regime(problem: Problem, regime: Option<Regime>) -> Result<(), CliError> {
    let ok = match (problem, regime) {
        (_, None) | (Problem::Three, _) => true,
        (Problem::One, Some(r)) => r == Regime::ProblemI,
        (Problem::Two, Some(r)) => matches!(r, Regime::ProblemI | Regime::ProblemII),
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "trajectory was generated under regime {}, incompatible with --problem {}",
            regime_name(regime),
            match problem {
                Problem::One => 1,
                Problem::Two => 2,
                Problem::Three => 3,
            }
        )))
    }
}

#[derive(Serialize)]
struct Edge {
    from: usize,
    to: usize,
    weight: f64,
}

/// `(i, j, w)` means `i` listens to `j`; written 1-based.
fn edge_list(edges: &[(usize, usize, Real)]) -> Vec<Edge> {
    edges
        .iter()
        .map(|&(i, j, w)| Edge {
            from: i + 1,
            to: j + 1,
            weight: to_f64(w),
        })
        .collect()
}

#[derive(Serialize)]
struct Problem1Output<'a> {
    problem: u8,
    w_hat: Vec<Vec<f64>>,
    gamma: Vec<Option<f64>>,
    beta: Vec<Option<f64>>,
    edges: Vec<Edge>,
    followers: Vec<usize>,
    solvability: &'a SolvabilityReport,
    residual: f64,
    beta_spread: f64,
}

#[derive(Serialize)]
struct SourceOutput {
    individual: usize,
    residual: f64,
    spread: f64,
    status: SourceStatus,
}

#[derive(Serialize)]
struct Problem2Output<'a> {
    problem: u8,
    w_hat: Vec<Vec<f64>>,
    diag_residual: f64,
    edges: Vec<Edge>,
    sources: Vec<SourceOutput>,
    solvability: &'a SolvabilityReport,
    residual: f64,
}

#[derive(Serialize)]
struct Problem3Output {
    problem: u8,
    w_breve: Vec<Vec<f64>>,
    follower_flags: Vec<RowClass>,
    followers: Vec<usize>,
    agreement_scores: Vec<Option<f64>>,
    diagonal_scores: Vec<f64>,
    windows_used: Vec<usize>,
    window_ranks: Vec<(usize, usize)>,
    p: usize,
    row_residuals: Vec<f64>,
    provenance: Vec<Vec<Provenance>>,
}

fn inference_error(e: InferenceError) -> CliError {
    match e {
        InferenceError::NotSolvable(report) => {
            let mut msg = format!("not solvable: verdict {:?}", report.verdict);
            if let Some(d) = report.diagnostic() {
                write!(msg, "\n{d}").unwrap();
            }
            write!(msg, "\n{}", to_json(&*report)).unwrap();
            CliError::NotSolvable(msg)
        }
        InferenceError::ZeroInnate(_) | InferenceError::InconsistentData { .. } => CliError::NotSolvable(e.to_string()),
        InferenceError::TooShort { .. } | InferenceError::Measurement(_) => CliError::Usage(e.to_string()),
    }
}

fn approx_error(e: ApproxError) -> CliError {
    match e {
        ApproxError::EmptyWindowSet { .. } => CliError::NotSolvable(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

fn problem1_output(r: &InferenceResult) -> Problem1Output<'_> {
    Problem1Output {
        problem: 1,
        w_hat: mat_f64(&r.w_hat),
        gamma: opt_f64(&r.gamma_hat),
        beta: opt_f64(&r.beta_hat),
        edges: edge_list(&r.inferred_edges),
        followers: r.inferred_followers.iter().map(|i| i + 1).collect(),
        solvability: &r.solvability,
        residual: to_f64(r.residual),
        beta_spread: to_f64(r.beta_spread),
    }
}

fn problem2_output<'a>(r: &'a Problem2Result, traj: &Trajectory, zero_tol: f64) -> Problem2Output<'a> {
    let sources = (0..traj.n())
        .filter_map(|i| {
            let s = source_residual(traj, &r.w_hat, i).ok()?;
            (s.residual.abs() >= zero_tol).then_some(SourceOutput {
                individual: i + 1,
                residual: s.residual,
                spread: s.spread,
                status: s.status,
            })
        })
        .collect();
    Problem2Output {
        problem: 2,
        w_hat: mat_f64(&r.w_hat),
        diag_residual: to_f64(r.diag_residual),
        edges: edge_list(&r.inferred_edges),
        sources,
        solvability: &r.solvability,
        residual: to_f64(r.residual),
    }
}

fn problem3_output(r: &ApproxResult) -> Problem3Output {
    Problem3Output {
        problem: 3,
        w_breve: mat_f64(&r.w_breve),
        follower_flags: r.follower_flags.clone(),
        followers: r.followers().iter().map(|i| i + 1).collect(),
        agreement_scores: r.agreement_scores.clone(),
        diagonal_scores: r.diagonal_scores.clone(),
        windows_used: r.windows_used.clone(),
        window_ranks: r.window_ranks.clone(),
        p: r.p,
        row_residuals: r.row_residuals.clone(),
        provenance: r.provenance.clone(),
    }
}

fn cmd_infer(a: &InferArgs, raw: &[String]) -> Result<(), CliError> {
    let traj = load_trajectory(&a.trajectory)?;
    check_regime(a.problem, traj.regime)?;
    let mut manifest = RunManifest::new("infer", raw);
    manifest.input(
        &a.trajectory.display().to_string(),
        read_file(&a.trajectory)?.as_bytes(),
    );
    manifest.param("zero_tol", a.zero_tol);
    manifest.param(
        "rank_tol",
        a.rank_tol.unwrap_or_else(|| traj.precision.default_rank_tol()),
    );
    let exact = ExactOptions {
        zero_tol: a.zero_tol,
        rank_tol: a.rank_tol,
        ..ExactOptions::default()
    };
    let json = match a.problem {
        Problem::One => {
            manifest.param("problem", 1);
            let r = infer_problem1(&traj, &exact).map_err(inference_error)?;
            println!(
                "recovered {} edges, followers {:?}, residual {:.3e}",
                r.inferred_edges.len(),
                r.inferred_followers.iter().map(|i| i + 1).collect::<Vec<_>>(),
                to_f64(r.residual)
            );
            to_json(&problem1_output(&r))
        }
        Problem::Two => {
            manifest.param("problem", 2);
            let r = infer_problem2(&traj, &exact).map_err(inference_error)?;
            println!(
                "recovered {} edges, diagonal residual {:.3e}",
                r.inferred_edges.len(),
                to_f64(r.diag_residual)
            );
            to_json(&problem2_output(&r, &traj, a.zero_tol))
        }
        Problem::Three => {
            manifest.param("problem", 3);
            manifest.param("m", a.m);
            manifest.param("agree_tol", a.agree_tol);
            manifest.param("diagonal_check", a.diagonal_check);
            let opts = ApproxOptions {
                m_max: a.m,
                p: a.p,
                agree_tol: a.agree_tol,
                rank_tol: a.rank_tol,
                diagonal_check: a.diagonal_check,
            };
            let r = infer_problem3(&traj, &opts).map_err(approx_error)?;
            manifest.param("p", r.p);
            println!(
                "window end {}, windows {:?}, followers {:?}",
                r.p,
                r.windows_used,
                r.followers().iter().map(|i| i + 1).collect::<Vec<_>>()
            );
            to_json(&problem3_output(&r))
        }
    };
    ensure_dir(&a.out)?;
    write_file(&a.out.join("result.json"), &json)?;
    manifest.outputs = vec!["result.json".into()];
    manifest.finish(&a.out)?;
    Ok(())
}

/// Matrix rows with entries rounded to 4 decimals.
pub fn display_matrix(m: &Mat<Real>) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format_4(to_f64(*v))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn format_4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" { "0.0000".into() } else { s }
}

fn matrix_csv(m: &Mat<Real>) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| to_f64(*v).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn print_pair(pair: &MeasurementPair) {
    println!(
        "window [{}, {}], rank(P) = {} of {}",
        pair.window.0,
        pair.window.1,
        pair.rank,
        pair.n()
    );
    println!("P =\n{}", display_matrix(&pair.p));
    println!("Q =\n{}", display_matrix(&pair.q));
}

fn cmd_pq(a: &PqArgs, raw: &[String]) -> Result<(), CliError> {
    let traj = load_trajectory(&a.trajectory)?;
    let p = match a.p {
        Some(p) => p,
        None => traj
            .len()
            .checked_sub(3)
            .ok_or_else(|| CliError::Usage("trajectory needs at least three states".into()))?,
    };
    let tol = a.rank_tol.unwrap_or_else(|| traj.precision.default_rank_tol());
    let pair = build_pq(&traj, a.m, p, tol).map_err(|e| CliError::Usage(e.to_string()))?;
    print_pair(&pair);
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        write_file(&out.join("P.csv"), &matrix_csv(&pair.p))?;
        write_file(&out.join("Q.csv"), &matrix_csv(&pair.q))?;
        let mut manifest = RunManifest::new("pq", raw);
        manifest.input(
            &a.trajectory.display().to_string(),
            read_file(&a.trajectory)?.as_bytes(),
        );
        manifest.param("m", a.m);
        manifest.param("p", p);
        manifest.param("rank_tol", tol);
        manifest.param("rank", pair.rank);
        manifest.outputs = vec!["P.csv".into(), "Q.csv".into()];
        manifest.finish(out)?;
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), CliError> {
    let s = Scenario::resolve(&a.scenario)?;
    let net = &s.network;
    println!(
        "{}: valid, {} individuals, {} sources, regime {}, followers {:?}",
        s.name(),
        net.n(),
        net.spec().sources.len(),
        regime_name(Some(Regime::detect(net))),
        net.followers().iter().map(|i| i + 1).collect::<Vec<_>>()
    );
    Ok(())
}

#[derive(Serialize)]
struct Toy12Report {
    rank_p: usize,
    max_weight_error: f64,
    max_gamma_error: f64,
    max_beta_error: f64,
    followers: Vec<usize>,
    gamma: Vec<Option<f64>>,
    beta: Vec<Option<f64>>,
    recovered: bool,
}

fn reproduce_toy12(a: &ReproduceArgs, manifest: &mut RunManifest) -> Result<Vec<String>, CliError> {
    let s = scenario::toy12();
    let x0 = s.file.x0.clone().expect("toy12 ships its innate opinions");
    let traj = simulate(&s.network, &x0, s.file.simulation.horizon).map_err(|e| CliError::Internal(e.to_string()))?;
    let inf = &s.file.inference;
    let p = inf.p.unwrap_or(traj.len() - 3);
    let pair =
        build_pq(&traj, inf.m, p, traj.precision.default_rank_tol()).map_err(|e| CliError::Internal(e.to_string()))?;
    print_pair(&pair);
    let r = infer_problem1(&traj, &ExactOptions::default()).map_err(inference_error)?;

    let n = s.network.n();
    let truth = s.network.weights();
    let mut w_err = 0.0f64;
    let mut g_err = 0.0f64;
    let mut b_err = 0.0f64;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            w_err = w_err.max(to_f64((r.w_hat[(i, j)] - truth[(i, j)]).abs()));
        }
        let (beta, gamma) = s
            .network
            .effective_piecewise(i)
            .unwrap_or((Real::from_f64(0.0), Real::from_f64(0.0)));
        if let (Some(g), Some(b)) = (r.gamma_hat[i], r.beta_hat[i]) {
            g_err = g_err.max(to_f64((g - gamma).abs()));
            if s.network.is_follower(i) {
                b_err = b_err.max(to_f64((b - beta).abs()));
            }
        }
    }
    let recovered = pair.rank == n && w_err < 1e-8 && g_err < 1e-8 && b_err < 1e-8;
    let report = Toy12Report {
        rank_p: pair.rank,
        max_weight_error: w_err,
        max_gamma_error: g_err,
        max_beta_error: b_err,
        followers: r.inferred_followers.iter().map(|i| i + 1).collect(),
        gamma: opt_f64(&r.gamma_hat),
        beta: opt_f64(&r.beta_hat),
        recovered,
    };
    write_file(&a.out.join("toy12_report.json"), &to_json(&report))?;
    write_file(&a.out.join("toy12_P.txt"), &display_matrix(&pair.p))?;
    write_file(&a.out.join("toy12_Q.txt"), &display_matrix(&pair.q))?;
    manifest.param("m", inf.m);
    manifest.param("p", p);
    println!(
        "max |w - w_true| = {w_err:.3e}, max gamma error = {g_err:.3e}, max beta error = {b_err:.3e}, followers {:?}",
        report.followers
    );
    if !recovered {
        return Err(CliError::Internal("toy12 parameters were not recovered".into()));
    }
    println!("exact recovery: ok");
    Ok(vec![
        "toy12_report.json".into(),
        "toy12_P.txt".into(),
        "toy12_Q.txt".into(),
    ])
}

#[derive(Serialize)]
struct Fig3Summary {
    samples: usize,
    skipped: usize,
    seed: u64,
    window: (usize, usize),
    mean_non_follower_error: f64,
    mean_follower_error: f64,
    window_error: f64,
    window_error_half_width: f64,
}

fn reproduce_fig3(a: &ReproduceArgs, cfg: &McConfig, manifest: &mut RunManifest) -> Result<Vec<String>, CliError> {
    let s = scenario::krackhardt();
    let net = &s.network;
    let rep = mc_edge_errors(net, a.m, a.p, cfg)?;
    let mut csv = String::from("i,j,e_ij,half_width\n");
    for i in 0..net.n() {
        for j in 0..net.n() {
            writeln!(
                csv,
                "{},{},{},{}",
                i + 1,
                j + 1,
                rep.edge_errors[i][j],
                rep.half_widths[i][j]
            )
            .unwrap();
        }
    }
    let followers = net.followers();
    let others: Vec<usize> = (0..net.n()).filter(|i| !followers.contains(i)).collect();
    let summary = Fig3Summary {
        samples: rep.samples,
        skipped: rep.skipped,
        seed: rep.seed,
        window: rep.window,
        mean_non_follower_error: rep.mean_edge_error(net, &others),
        mean_follower_error: rep.mean_edge_error(net, &followers),
        window_error: rep.window_error,
        window_error_half_width: rep.window_error_half_width,
    };
    write_file(&a.out.join("fig3_errors.csv"), &csv)?;
    write_file(&a.out.join("fig3_summary.json"), &to_json(&summary))?;
    manifest.param("m", a.m);
    manifest.param("p", a.p);
    println!(
        "mean edge error: non-followers {:.3e}, followers {:.3e} ({} samples, {} skipped)",
        summary.mean_non_follower_error, summary.mean_follower_error, summary.samples, summary.skipped
    );
    Ok(vec!["fig3_errors.csv".into(), "fig3_summary.json".into()])
}

fn reproduce_fig4a(a: &ReproduceArgs, cfg: &McConfig, manifest: &mut RunManifest) -> Result<Vec<String>, CliError> {
    let s = scenario::krackhardt();
    let horizon = a.horizon.unwrap_or(s.file.simulation.horizon);
    if horizon == 0 {
        return Err(CliError::Usage("--horizon must be at least 1".into()));
    }
    let mt = mean_trajectory(&s.network, horizon, cfg)?;
    let n = s.network.n();
    let mut csv = String::from("k");
    for i in 1..=n {
        write!(csv, ",x{i}").unwrap();
    }
    csv.push('\n');
    for (k, row) in mt.mean.iter().enumerate() {
        write!(csv, "{k}").unwrap();
        for v in row {
            write!(csv, ",{v}").unwrap();
        }
        csv.push('\n');
    }
    write_file(&a.out.join("fig4a_mean_traj.csv"), &csv)?;
    manifest.param("horizon", horizon);
    let last = &mt.mean[horizon];
    let prev = &mt.mean[horizon - 1];
    let step = last.iter().zip(prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!(
        "mean trajectory over {} samples, final step size {step:.3e}",
        mt.samples
    );
    Ok(vec!["fig4a_mean_traj.csv".into()])
}

fn reproduce_fig4b(a: &ReproduceArgs, cfg: &McConfig, manifest: &mut RunManifest) -> Result<Vec<String>, CliError> {
    let s = scenario::krackhardt();
    let ends = a.ends.clone().unwrap_or_else(|| DEFAULT_FIG4B_ENDS.to_vec());
    let points = mc_window_error(&s.network, a.m, &ends, cfg)?;
    let mut csv = String::from("p,e,half_width,samples\n");
    for pt in &points {
        writeln!(csv, "{},{},{},{}", pt.p, pt.error, pt.half_width, pt.samples).unwrap();
    }
    write_file(&a.out.join("fig4b_window_error.csv"), &csv)?;
    manifest.param("m", a.m);
    manifest.param("ends", points.iter().map(|p| p.p).collect::<Vec<_>>());
    for pt in &points {
        println!("p = {:5}  e = {:.6e}", pt.p, pt.error);
    }
    Ok(vec!["fig4b_window_error.csv".into()])
}

fn cmd_reproduce(a: &ReproduceArgs, raw: &[String]) -> Result<(), CliError> {
    ensure_dir(&a.out)?;
    let mut manifest = RunManifest::new("reproduce", raw);
    manifest.param("figure", format!("{:?}", a.figure).to_lowercase());
    let default_samples = if a.figure == Figure::Fig4b { 200 } else { 1000 };
    let samples = a.samples.unwrap_or(default_samples);
    if samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let scenario = if a.figure == Figure::Toy12 {
        scenario::toy12()
    } else {
        scenario::krackhardt()
    };
    record_bundled(&mut manifest, &scenario);
    let seed = a.seed.unwrap_or(scenario.file.simulation.seed);
    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let cfg = McConfig::new(samples, seed).with_exec(exec);
    if a.figure != Figure::Toy12 {
        manifest.param("samples", samples);
        manifest.param("seed", seed);
        manifest.param("execution", exec.effective());
    }
    let outputs = match a.figure {
        Figure::Toy12 => reproduce_toy12(a, &mut manifest),
        Figure::Fig3 => reproduce_fig3(a, &cfg, &mut manifest),
        Figure::Fig4a => reproduce_fig4a(a, &cfg, &mut manifest),
        Figure::Fig4b => reproduce_fig4b(a, &cfg, &mut manifest),
    };
    match outputs {
        Ok(outputs) => {
            manifest.outputs = outputs;
            manifest.finish(&a.out)?;
            Ok(())
        }
        Err(e) => {
            manifest.finish(&a.out)?;
            Err(e)
        }
    }
}
