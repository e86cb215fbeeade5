use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use subspace_attack::experiments::{default_eta_grid, run_sweep, write_sweep_csv, SweepSpec};
use subspace_attack::io::{format_float, read_matrix_csv, write_matrix_csv};
use subspace_attack::oracle::{grid_search_angles, random_rank_one, random_unconstrained, SearchConfig};
use subspace_attack::pcr::{attack_pcr, load_feature_csv, synth_collinear, write_pcr_csv, CollinearSpec, PcrStudy};
use subspace_attack::rank_one::attack_rank_one_with_svd;
use subspace_attack::unconstrained::attack_unconstrained_with_svd;
use subspace_attack::{full_svd, AttackBudget, AttackReportF64, DataMatrixF64, Error, Regime, Solution, Strategy};

const SCHEMA_VERSION: u32 = 1;
/// Slack allowed when an oracle is compared with a closed form.
const VERIFY_TOL: f64 = 1e-6;
/// Allowed gap between the predicted angle and the angle PCA reports after the attack.
const ACHIEVED_TOL: f64 = 1e-7;

#[derive(Parser)]
#[command(name = "subattack", version, about = "Optimal adversarial attacks on PCA subspaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal attack on a matrix and write a JSON report.
    Attack(AttackArgs),
    /// Run a budget sweep described by a spec file and write CSV.
    Sweep(SweepArgs),
    /// Attack principal component regression and write train/test r² as CSV.
    Pcr(PcrArgs),
    /// Check both closed forms against random and grid oracles.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct AttackArgs {
    /// Matrix CSV, one row per feature, one column per sample.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(short, long)]
    k: usize,
    #[arg(long)]
    eta: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::RankOne)]
    strategy: StrategyArg,
    /// JSON output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full perturbation matrix as CSV to this path.
    #[arg(long)]
    emit_delta: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PcrArgs {
    /// Feature CSV, one sample per line with the target last.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Use the built-in collinear benchmark instead of a file.
    #[arg(long)]
    synthetic: bool,
    #[arg(short, long, default_value_t = 4)]
    k: usize,
    /// Comma-separated budget ratios η/(σ_k − σ_{k+1}).
    #[arg(long, value_delimiter = ',')]
    eta_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = PcrStrategyArg::Both)]
    strategy: PcrStrategyArg,
    /// Seeds the train/test split and the synthetic data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(short, long)]
    k: usize,
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 400)]
    grid_resolution: usize,
    #[arg(long, default_value_t = 40)]
    refine_steps: usize,
    /// Subtract this from every closed-form angle before comparing (fault injection).
    #[arg(long, default_value_t = 0.0, hide = true, allow_negative_numbers = true)]
    inject_theta_offset: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    #[value(name = "rank-one", alias = "rank_one", alias = "rank1")]
    RankOne,
    Unconstrained,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::RankOne => Strategy::RankOne,
            StrategyArg::Unconstrained => Strategy::Unconstrained,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PcrStrategyArg {
    #[value(name = "rank-one", alias = "rank_one", alias = "rank1")]
    RankOne,
    Unconstrained,
    Both,
}

enum Failure {
    Lib(Error),
    Verification(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Regime(_) | Error::NoOrthogonalComplement(_) | Error::RankMismatch { .. } => 3,
        Error::NoConvergence | Error::SingularFit | Error::UndefinedR2 => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Attack(a) => cmd_attack(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Pcr(a) => cmd_pcr(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Verification(n)) => {
            eprintln!("verification failed: {n} check(s) beaten by an oracle");
            ExitCode::from(4)
        }
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> io::Result<()> {
    match out {
        Some(p) => fs::write(p, bytes),
        None => io::stdout().lock().write_all(bytes),
    }
}

fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Io(e) => Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))),
        other => other,
    }
}

fn check_k(x: &DataMatrixF64, k: usize) -> Result<(), Error> {
    let (d, n) = x.shape();
    if k == 0 || k > d.min(n) {
        return Err(Error::InvalidDimension(format!("k = {k} outside 1..={} for a {d}x{n} matrix", d.min(n))));
    }
    Ok(())
}

fn run_attack(x: &DataMatrixF64, k: usize, eta: f64, strategy: Strategy) -> Result<AttackReportF64, Error> {
    let svd = full_svd(x)?;
    let budget = AttackBudget::new(eta)?;
    match strategy {
        Strategy::RankOne => attack_rank_one_with_svd(x, &svd, k, budget),
        Strategy::Unconstrained => attack_unconstrained_with_svd(x, &svd, k, budget),
    }
}

#[derive(Serialize)]
struct ReportJson {
    schema_version: u32,
    strategy: &'static str,
    regime: &'static str,
    k: usize,
    eta: f64,
    sigma: Vec<f64>,
    theta_predicted: f64,
    theta_achieved: f64,
    theta_degrees: f64,
    delta_fro_norm: f64,
    solution: SolutionJson,
    ambiguous_subspace: bool,
}

#[derive(Serialize)]
struct SolutionJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entries: Option<[f64; 4]>,
}

fn report_json(report: &AttackReportF64, sigma: Vec<f64>) -> ReportJson {
    let solution = match &report.solution {
        Solution::RankOne(r) => SolutionJson {
            a: Some(r.a.iter().copied().collect()),
            b: Some(r.b.iter().copied().collect()),
            entries: None,
        },
        Solution::Unconstrained(p) => SolutionJson { a: None, b: None, entries: Some(p.canonical_b) },
    };
    ReportJson {
        schema_version: SCHEMA_VERSION,
        strategy: report.strategy.as_str(),
        regime: report.regime.as_str(),
        k: report.k,
        eta: report.eta,
        sigma,
        theta_predicted: report.theta_predicted,
        theta_achieved: report.theta_achieved,
        theta_degrees: report.theta_achieved.to_degrees(),
        delta_fro_norm: report.budget_used,
        solution,
        ambiguous_subspace: report.ambiguous_subspace,
    }
}

fn cmd_attack(args: AttackArgs) -> Result<(), Failure> {
    let x: DataMatrixF64 = read_matrix_csv(&args.matrix).map_err(|e| with_path(e, &args.matrix))?;
    check_k(&x, args.k)?;
    let report = run_attack(&x, args.k, args.eta, args.strategy.into())?;
    let sigma = full_svd(&x)?.sigma.as_slice().to_vec();
    let mut json = serde_json::to_vec_pretty(&report_json(&report, sigma)).map_err(io::Error::from)?;
    json.push(b'\n');
    write_output(args.out.as_deref(), &json)?;
    if let Some(path) = &args.emit_delta {
        write_matrix_csv(path, &report.delta())?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let spec = SweepSpec::from_file(&args.spec).map_err(|e| with_path(e, &args.spec))?;
    let rows = run_sweep::<f64>(&spec)?;
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &rows)?;
    write_output(args.out.as_deref(), &buf)?;
    Ok(())
}

fn cmd_pcr(args: PcrArgs) -> Result<(), Failure> {
    let (features, targets) = match &args.data {
        Some(path) => load_feature_csv::<f64>(path).map_err(|e| with_path(e, path))?,
        None => synth_collinear::<f64>(&CollinearSpec::default(), args.seed)?,
    };
    let mut study = PcrStudy::new(args.k, args.eta_grid.unwrap_or_else(default_eta_grid));
    study.split_seed = args.seed;
    study.split_fraction = args.train_fraction;
    let strategies = match args.strategy {
        PcrStrategyArg::RankOne => vec![Strategy::RankOne],
        PcrStrategyArg::Unconstrained => vec![Strategy::Unconstrained],
        PcrStrategyArg::Both => Strategy::ALL.to_vec(),
    };
    let mut rows = Vec::new();
    for s in strategies {
        rows.extend(attack_pcr(&features, &targets, &study, s)?);
    }
    rows.sort_by(|a, b| a.eta_ratio.total_cmp(&b.eta_ratio).then(a.strategy.cmp(&b.strategy)));
    let mut buf = Vec::new();
    write_pcr_csv(&mut buf, &rows)?;
    write_output(args.out.as_deref(), &buf)?;
    Ok(())
}

struct Check {
    name: &'static str,
    oracle: f64,
    closed_form: f64,
    tol: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.oracle <= self.closed_form + self.tol
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let x: DataMatrixF64 = read_matrix_csv(&args.matrix).map_err(|e| with_path(e, &args.matrix))?;
    check_k(&x, args.k)?;
    let cfg = SearchConfig {
        trials: args.trials,
        seed: args.seed,
        grid_resolution: args.grid_resolution,
        refine_steps: args.refine_steps,
    };
    cfg.validate()?;
    let budget = AttackBudget::new(args.eta)?;
    let offset = args.inject_theta_offset;

    let rank_one = run_attack(&x, args.k, args.eta, Strategy::RankOne);
    let unconstrained = run_attack(&x, args.k, args.eta, Strategy::Unconstrained);
    if let (Err(e), Err(_)) = (&rank_one, &unconstrained) {
        return Err(Failure::Lib(Error::Regime(format!("no closed form applies: {e}"))));
    }

    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    for (label, report) in [("rank-one", &rank_one), ("unconstrained", &unconstrained)] {
        match report {
            Ok(r) if r.ambiguous_subspace => {
                skipped.push(format!("{label}: achieved-vs-predicted (subspace not unique)"))
            }
            Ok(r) => checks.push(Check {
                name: if label == "rank-one" { "rank-one achieved" } else { "unconstrained achieved" },
                oracle: r.theta_achieved,
                closed_form: r.theta_predicted - offset,
                tol: ACHIEVED_TOL,
            }),
            Err(e) => skipped.push(format!("{label}: {e}")),
        }
    }
    if let Ok(r) = &rank_one {
        let predicted = r.theta_predicted - offset;
        let rnd = random_rank_one(&x, args.k, budget, &cfg)?;
        checks.push(Check { name: "rank-one random", oracle: rnd.theta, closed_form: predicted, tol: VERIFY_TOL });
        if r.regime == Regime::KLtRankCase2 {
            let grid = grid_search_angles(r.sigma_k, r.sigma_k1, args.eta, &cfg)?;
            checks.push(Check { name: "rank-one grid", oracle: grid.theta, closed_form: predicted, tol: VERIFY_TOL });
        } else {
            skipped.push(format!("rank-one grid: regime {} has no angle search", r.regime));
        }
    }
    if let Ok(r) = &unconstrained {
        let predicted = r.theta_predicted - offset;
        let rnd = random_unconstrained(&x, args.k, budget, &cfg)?;
        checks.push(Check { name: "unconstrained random", oracle: rnd.theta, closed_form: predicted, tol: VERIFY_TOL });
        if let Ok(r1) = &rank_one {
            checks.push(Check {
                name: "rank-one vs unconstrained",
                oracle: r1.theta_predicted - offset,
                closed_form: predicted,
                tol: VERIFY_TOL,
            });
        }
    }

    println!("{:<28} {:>16} {:>16} {:>14}  status", "check", "oracle", "closed_form", "margin");
    let mut failures = 0;
    for c in &checks {
        let ok = c.passed();
        failures += usize::from(!ok);
        println!(
            "{:<28} {:>16} {:>16} {:>14}  {}",
            c.name,
            format_float(c.oracle),
            format_float(c.closed_form),
            format_float(c.closed_form - c.oracle),
            if ok { "ok" } else { "FAIL" }
        );
    }
    for s in &skipped {
        println!("skipped {s}");
    }
    if failures > 0 {
        return Err(Failure::Verification(failures));
    }
    Ok(())
}
