//! Budget sweeps over synthetic or file-backed data, comparing the optimal
//! attacks with best-of-N random attacks.
//!
//! Budgets are given as ratios. The absolute budget is `η = ratio·(σ_k − σ_{k+1})`,
//! where `σ_{k+1}` counts as zero once `k` reaches the numerical rank, so on
//! low-rank data the ratio is `η/σ_k`. One data matrix is generated per sweep
//! and shared by every budget.
//!
//! Spec files are `key = value` lines; `#` starts a comment. Keys:
//!
//! | key | value | default |
//! |---|---|---|
//! | `d`, `n`, `k` | counts | required (`d`, `n` optional with `data = file`) |
//! | `data` | `low-rank`, `gaussian` or `file` | `low-rank` |
//! | `path` | matrix CSV, only with `data = file` | |
//! | `eta_grid` | comma-separated increasing ratios | 50 points `1.2·i/50` |
//! | `strategies` | subset of `r1-opt,r1-rnd,wr-opt,wr-rnd` | all four |
//! | `seed` | data seed | `0` |
//! | `trials` | random trials per point | `10000` |
//! | `oracle_seed` | seed for random attacks | `0` |

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::attack::AttackBudget;
use crate::error::{Error, Result};
use crate::io::{csv_writer, format_float, read_matrix_csv};
use crate::oracle::{random_rank_one, random_unconstrained, SearchConfig};
use crate::rank_one::attack_rank_one_with_svd;
use crate::rng::{streams, StreamRng};
use crate::scalar::Real;
use crate::subspace::{full_svd, DataMatrix, SvdTriple};
use crate::unconstrained::attack_unconstrained_with_svd;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataKind {
    LowRank,
    Gaussian,
    FromFile(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SweepStrategy {
    RankOneOptimal,
    RankOneRandom,
    UnconstrainedOptimal,
    UnconstrainedRandom,
}

impl SweepStrategy {
    pub const ALL: [SweepStrategy; 4] = [
        SweepStrategy::RankOneOptimal,
        SweepStrategy::RankOneRandom,
        SweepStrategy::UnconstrainedOptimal,
        SweepStrategy::UnconstrainedRandom,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SweepStrategy::RankOneOptimal => "r1-opt",
            SweepStrategy::RankOneRandom => "r1-rnd",
            SweepStrategy::UnconstrainedOptimal => "wr-opt",
            SweepStrategy::UnconstrainedRandom => "wr-rnd",
        }
    }
}

impl fmt::Display for SweepStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SweepStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepStrategy::ALL
            .into_iter()
            .find(|st| st.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub data: DataKind,
    pub eta_grid: Vec<f64>,
    pub strategies: Vec<SweepStrategy>,
    pub oracle: SearchConfig,
    pub seed: u64,
}

/// 50 evenly spaced ratios in `(0, 1.2]`.
pub fn default_eta_grid() -> Vec<f64> {
    (1..=50).map(|i| 1.2 * i as f64 / 50.0).collect()
}

impl SweepSpec {
    pub fn new(d: usize, n: usize, k: usize, data: DataKind) -> Self {
        Self {
            d,
            n,
            k,
            data,
            eta_grid: default_eta_grid(),
            strategies: SweepStrategy::ALL.to_vec(),
            oracle: SearchConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(Error::Config("d and n must be positive".into()));
        }
        if self.k == 0 || self.k > self.d.min(self.n) {
            return Err(Error::Config(format!(
                "k = {} outside 1..={}",
                self.k,
                self.d.min(self.n)
            )));
        }
        if self.eta_grid.is_empty() {
            return Err(Error::Config("eta_grid is empty".into()));
        }
        if self.eta_grid.iter().any(|&r| !r.is_finite() || r < 0.0) {
            return Err(Error::Config("eta_grid values must be finite and nonnegative".into()));
        }
        if self.eta_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("eta_grid must be strictly increasing".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies selected".into()));
        }
        self.oracle.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut d = None;
        let mut n = None;
        let mut k = None;
        let mut data = None;
        let mut path = None;
        let mut spec = SweepSpec::new(0, 0, 0, DataKind::LowRank);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected 'key = value', got {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse { line, message: format!("duplicate key {key:?}") });
            }
            let bad = |what: &str| Error::Parse { line, message: format!("invalid {what} {value:?}") };
            match key {
                "d" => d = Some(value.parse().map_err(|_| bad("d"))?),
                "n" => n = Some(value.parse().map_err(|_| bad("n"))?),
                "k" => k = Some(value.parse().map_err(|_| bad("k"))?),
                "data" => {
                    data = Some(match value {
                        "low-rank" => DataKind::LowRank,
                        "gaussian" => DataKind::Gaussian,
                        "file" => DataKind::FromFile(PathBuf::new()),
                        _ => return Err(bad("data kind")),
                    })
                }
                "path" => path = Some(PathBuf::from(value)),
                "eta_grid" => {
                    if value.is_empty() {
                        return Err(Error::Config("eta_grid is empty".into()));
                    }
                    spec.eta_grid = value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>().map_err(|_| bad("eta_grid entry")))
                        .collect::<Result<_>>()?;
                }
                "strategies" => {
                    spec.strategies = value
                        .split(',')
                        .map(|s| s.trim().parse::<SweepStrategy>())
                        .collect::<Result<_>>()?;
                    spec.strategies.sort();
                    spec.strategies.dedup();
                }
                "seed" => spec.seed = value.parse().map_err(|_| bad("seed"))?,
                "trials" => spec.oracle.trials = value.parse().map_err(|_| bad("trials"))?,
                "oracle_seed" => spec.oracle.seed = value.parse().map_err(|_| bad("oracle_seed"))?,
                other => return Err(Error::Parse { line, message: format!("unknown key {other:?}") }),
            }
        }
        spec.data = match (data.unwrap_or(DataKind::LowRank), path) {
            (DataKind::FromFile(_), Some(p)) => DataKind::FromFile(p),
            (DataKind::FromFile(_), None) => return Err(Error::Config("data = file needs a path".into())),
            (_, Some(_)) => return Err(Error::Config("path is only valid with data = file".into())),
            (kind, None) => kind,
        };
        spec.k = k.ok_or_else(|| Error::Config("missing key k".into()))?;
        match &spec.data {
            DataKind::FromFile(_) => {
                spec.d = d.unwrap_or(0);
                spec.n = n.unwrap_or(0);
            }
            _ => {
                spec.d = d.ok_or_else(|| Error::Config("missing key d".into()))?;
                spec.n = n.ok_or_else(|| Error::Config("missing key n".into()))?;
            }
        }
        if !matches!(spec.data, DataKind::FromFile(_)) {
            spec.validate()?;
        }
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec = Self::parse(&std::fs::read_to_string(path)?)?;
        if let DataKind::FromFile(p) = &spec.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    spec.data = DataKind::FromFile(dir.join(p));
                }
            }
        }
        Ok(spec)
    }

    /// The data matrix this sweep attacks.
    pub fn build_matrix<T: Real>(&self) -> Result<DataMatrix<T>> {
        match &self.data {
            DataKind::LowRank => synth_low_rank(self.d, self.n, self.k, self.seed),
            DataKind::Gaussian => synth_gaussian(self.d, self.n, self.seed),
            DataKind::FromFile(p) => {
                let m = read_matrix_csv(p)?;
                let (d, n) = m.shape();
                if (self.d != 0 && self.d != d) || (self.n != 0 && self.n != n) {
                    return Err(Error::Config(format!(
                        "spec declares {}x{}, file holds {d}x{n}",
                        self.d, self.n
                    )));
                }
                Ok(m)
            }
        }
    }
}

/// `A Bᵀ` with `A` (`d × k`) and `B` (`n × k`) standard Gaussian, drawn in that order.
pub fn synth_low_rank<T: Real>(d: usize, n: usize, k: usize, seed: u64) -> Result<DataMatrix<T>> {
    if d == 0 || n == 0 || k == 0 || k > d.min(n) {
        return Err(Error::InvalidDimension(format!(
            "low-rank synthesis needs 1 <= k <= min(d, n), got d = {d}, n = {n}, k = {k}"
        )));
    }
    let mut rng = StreamRng::new(seed, streams::DATA);
    let a = rng.gaussian_matrix::<T>(d, k);
    let b = rng.gaussian_matrix::<T>(n, k);
    DataMatrix::new(a * b.transpose())
}

/// Standard Gaussian `d × n` matrix.
pub fn synth_gaussian<T: Real>(d: usize, n: usize, seed: u64) -> Result<DataMatrix<T>> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidDimension(format!("empty shape {d}x{n}")));
    }
    let mut rng = StreamRng::new(seed, streams::DATA);
    DataMatrix::new(rng.gaussian_matrix(d, n))
}

/// `σ_k − σ_{k+1}`, with `σ_{k+1}` taken as zero from the numerical rank on.
pub fn budget_scale<T: Real>(svd: &SvdTriple<T>, k: usize) -> T {
    let next = if k < svd.rank() { svd.sigma_at(k) } else { T::zero() };
    svd.sigma[k - 1] - next
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eta_ratio: f64,
    pub strategy: SweepStrategy,
    pub theta: Option<f64>,
    pub theta_predicted: Option<f64>,
    pub budget_used: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(eta_ratio: f64, strategy: SweepStrategy, err: Error) -> Self {
        Self {
            eta_ratio,
            strategy,
            theta: None,
            theta_predicted: None,
            budget_used: None,
            error: Some(err.to_string()),
        }
    }
}

/// Runs every strategy at every budget; rows are sorted by `(eta_ratio, strategy)`.
pub fn run_sweep<T: Real>(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let x = spec.build_matrix::<T>()?;
    let mut checked = spec.clone();
    (checked.d, checked.n) = x.shape();
    checked.validate()?;
    run_sweep_on(&x, &checked)
}

/// [`run_sweep`] on a given matrix; the spec's data fields are ignored.
pub fn run_sweep_on<T: Real>(x: &DataMatrix<T>, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let svd = full_svd(x)?;
    let k = spec.k;
    let scale = budget_scale(&svd, k);
    let mut strategies = spec.strategies.clone();
    strategies.sort();
    strategies.dedup();

    let tasks: Vec<(f64, SweepStrategy)> = spec
        .eta_grid
        .iter()
        .flat_map(|&r| strategies.iter().map(move |&s| (r, s)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(ratio, strategy)| {
            sweep_point(x, &svd, k, scale * T::lit(ratio), strategy, &spec.oracle)
                .map(|(theta, predicted, used)| SweepRow {
                    eta_ratio: ratio,
                    strategy,
                    theta: Some(theta.as_f64()),
                    theta_predicted: predicted.map(Real::as_f64),
                    budget_used: Some(used.as_f64()),
                    error: None,
                })
                .unwrap_or_else(|e| SweepRow::failed(ratio, strategy, e))
        })
        .collect();
    Ok(rows)
}

fn sweep_point<T: Real>(
    x: &DataMatrix<T>,
    svd: &SvdTriple<T>,
    k: usize,
    eta: T,
    strategy: SweepStrategy,
    cfg: &SearchConfig,
) -> Result<(T, Option<T>, T)> {
    let budget = AttackBudget::new(eta)?;
    match strategy {
        SweepStrategy::RankOneOptimal => {
            let r = attack_rank_one_with_svd(x, svd, k, budget)?;
            Ok((r.theta_achieved, Some(r.theta_predicted), r.budget_used))
        }
        SweepStrategy::UnconstrainedOptimal => {
            let r = attack_unconstrained_with_svd(x, svd, k, budget)?;
            Ok((r.theta_achieved, Some(r.theta_predicted), r.budget_used))
        }
        SweepStrategy::RankOneRandom => {
            let c = random_rank_one(x, k, budget, cfg)?;
            Ok((c.theta, None, c.a.norm() * c.b.norm()))
        }
        SweepStrategy::UnconstrainedRandom => {
            let c = random_unconstrained(x, k, budget, cfg)?;
            Ok((c.theta, None, c.delta.norm()))
        }
    }
}

pub const SWEEP_HEADER: [&str; 5] = ["eta_ratio", "strategy", "theta", "theta_predicted", "budget_used"];

/// Writes sweep rows as CSV. Failed rows carry `error` in the `theta` column and leave the numeric columns empty.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(SWEEP_HEADER).map_err(crate::io::csv_error)?;
    let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    for row in rows {
        let theta = match (&row.error, row.theta) {
            (Some(_), _) => "error".to_string(),
            (None, t) => opt(t),
        };
        out.write_record([
            format_float(row.eta_ratio),
            row.strategy.id().to_string(),
            theta,
            opt(row.theta_predicted),
            opt(row.budget_used),
        ])
        .map_err(crate::io::csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
