//! Principal component regression and its degradation under subspace attacks.
//!
//! Features are centered once with the training means. The attack then hits
//! the centered training matrix, the model is refit on the attacked features
//! without re-centering, and test features are centered with the clean
//! training means.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::attack::{AttackBudget, Strategy};
use crate::error::{Error, Result};
use crate::experiments::budget_scale;
use crate::io::{csv_error, csv_writer, format_float, parse_cell};
use crate::rank_one::attack_rank_one_with_svd;
use crate::rng::{streams, StreamRng};
use crate::scalar::Real;
use crate::subspace::{full_svd, DataMatrix, OrthonormalBasis};
use crate::unconstrained::attack_unconstrained_with_svd;

#[derive(Debug, Clone)]
pub struct PcrModel<T: Real> {
    pub components: OrthonormalBasis<T>,
    pub coefficients: DVector<T>,
    pub intercept: T,
    pub feature_means: DVector<T>,
    pub r2_train: T,
}

impl<T: Real> PcrModel<T> {
    /// Predictions for features that are already centered.
    pub fn predict_centered(&self, centered: &DMatrix<T>) -> DVector<T> {
        let scores = self.components.columns().transpose() * centered;
        scores.tr_mul(&self.coefficients).add_scalar(self.intercept)
    }

    /// Predictions for raw features (samples as columns).
    pub fn predict(&self, features: &DataMatrix<T>) -> DVector<T> {
        self.predict_centered(&center(features.as_matrix(), &self.feature_means))
    }

    /// The same model with components right-multiplied by `q` and coefficients by `qᵀ`.
    pub fn rotated(&self, q: &DMatrix<T>) -> Result<Self> {
        Ok(Self {
            components: self.components.rotated(q)?,
            coefficients: q.transpose() * &self.coefficients,
            ..self.clone()
        })
    }
}

pub fn column_means<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    let n = T::from_usize(m.ncols()).unwrap_or_else(T::one);
    m.column_sum() / n
}

pub fn center<T: Real>(m: &DMatrix<T>, means: &DVector<T>) -> DMatrix<T> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        col -= means;
    }
    out
}

/// Centers the features, then fits on the `k` leading principal components.
pub fn fit_pcr<T: Real>(features: &DataMatrix<T>, targets: &DVector<T>, k: usize) -> Result<PcrModel<T>> {
    let means = column_means(features.as_matrix());
    let centered = DataMatrix::new(center(features.as_matrix(), &means))?;
    fit_pcr_centered(&centered, targets, k, means)
}

/// Fits on features taken as already centered; `means` is stored for later predictions.
pub fn fit_pcr_centered<T: Real>(
    centered: &DataMatrix<T>,
    targets: &DVector<T>,
    k: usize,
    means: DVector<T>,
) -> Result<PcrModel<T>> {
    let (d, n) = centered.shape();
    if targets.len() != n {
        return Err(Error::InvalidDimension(format!("{} targets for {n} samples", targets.len())));
    }
    if means.len() != d {
        return Err(Error::InvalidDimension(format!("{} means for {d} features", means.len())));
    }
    let svd = full_svd(centered)?;
    let rank = svd.rank();
    if k == 0 || k > rank {
        return Err(Error::InvalidDimension(format!(
            "k = {k} outside 1..={rank} (rank of centered features)"
        )));
    }
    let components = OrthonormalBasis::new(svd.u.columns(0, k).into_owned())?;
    let scores = components.columns().transpose() * centered.as_matrix();

    let mut design = DMatrix::from_element(k + 1, n, T::one());
    design.rows_mut(1, k).copy_from(&scores);
    let normal = &design * design.transpose();
    let rhs = &design * targets;
    let solution = normal.cholesky().ok_or(Error::SingularFit)?.solve(&rhs);
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularFit);
    }
    let mut model = PcrModel {
        components,
        coefficients: solution.rows(1, k).into_owned(),
        intercept: solution[0],
        feature_means: means,
        r2_train: T::zero(),
    };
    model.r2_train = r_squared(&model.predict_centered(centered.as_matrix()), targets)?;
    Ok(model)
}

/// `1 − ‖y − ŷ‖² / ‖y − ȳ‖²`.
pub fn r_squared<T: Real>(predicted: &DVector<T>, actual: &DVector<T>) -> Result<T> {
    let n = actual.len();
    if predicted.len() != n || n < 2 {
        return Err(Error::InvalidDimension(format!(
            "r-squared needs two equal-length vectors of length >= 2, got {} and {n}",
            predicted.len()
        )));
    }
    let mean = actual.sum() / T::from_usize(n).unwrap_or_else(T::one);
    let ss_tot = actual.iter().fold(T::zero(), |acc, &y| acc + (y - mean) * (y - mean));
    if ss_tot == T::zero() {
        return Err(Error::UndefinedR2);
    }
    let ss_res = actual
        .iter()
        .zip(predicted.iter())
        .fold(T::zero(), |acc, (&y, &p)| acc + (y - p) * (y - p));
    Ok(T::one() - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcrStudy {
    pub k: usize,
    /// Budget ratios `η/(σ_k − σ_{k+1})` of the centered training features.
    pub eta_grid: Vec<f64>,
    pub split_seed: u64,
    pub split_fraction: f64,
}

impl PcrStudy {
    pub fn new(k: usize, eta_grid: Vec<f64>) -> Self {
        Self { k, eta_grid, split_seed: 0, split_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionReport {
    pub eta_ratio: f64,
    pub strategy: Strategy,
    pub r2_train: f64,
    pub r2_test: f64,
}

/// Seeded permutation split; returns `(train, test)` sample indices.
pub fn train_test_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train < 2 || n - n_train < 2 {
        return Err(Error::Config(format!(
            "split of {n} samples at {fraction} leaves fewer than 2 samples on one side"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    StreamRng::new(seed, streams::SPLIT).shuffle(&mut idx);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

fn select_columns<T: Real>(m: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

/// Train and test r² of PCR refit on attacked training features, one report per budget ratio.
pub fn attack_pcr<T: Real>(
    features: &DataMatrix<T>,
    targets: &DVector<T>,
    study: &PcrStudy,
    strategy: Strategy,
) -> Result<Vec<RegressionReport>> {
    let (_, n) = features.shape();
    if targets.len() != n {
        return Err(Error::InvalidDimension(format!("{} targets for {n} samples", targets.len())));
    }
    if study.eta_grid.iter().any(|&r| !r.is_finite() || r < 0.0) {
        return Err(Error::Config("eta ratios must be finite and nonnegative".into()));
    }
    let (train, test) = train_test_split(n, study.split_fraction, study.split_seed)?;
    let x = features.as_matrix();
    let x_train = select_columns(x, &train);
    let means = column_means(&x_train);
    let train_c = DataMatrix::new(center(&x_train, &means))?;
    let test_c = center(&select_columns(x, &test), &means);
    let y_train = DVector::from_iterator(train.len(), train.iter().map(|&i| targets[i]));
    let y_test = DVector::from_iterator(test.len(), test.iter().map(|&i| targets[i]));

    let svd = full_svd(&train_c)?;
    let k = study.k;
    if k == 0 || k >= svd.rank() {
        return Err(Error::InvalidDimension(format!(
            "k = {k} must be below the rank {} of the centered training features",
            svd.rank()
        )));
    }
    let scale = budget_scale(&svd, k);

    let mut grid = study.eta_grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    grid.par_iter()
        .map(|&ratio| {
            let budget = AttackBudget::new(scale * T::lit(ratio))?;
            let report = match strategy {
                Strategy::RankOne => attack_rank_one_with_svd(&train_c, &svd, k, budget)?,
                Strategy::Unconstrained => attack_unconstrained_with_svd(&train_c, &svd, k, budget)?,
            };
            let attacked = train_c.perturbed(&report.delta())?;
            let model = fit_pcr_centered(&attacked, &y_train, k, means.clone())?;
            let r2_test = r_squared(&model.predict_centered(&test_c), &y_test)?;
            Ok(RegressionReport {
                eta_ratio: ratio,
                strategy,
                r2_train: model.r2_train.as_f64(),
                r2_test: r2_test.as_f64(),
            })
        })
        .collect()
}

/// Parses feature CSV text: one sample per line, the last field is the target.
///
/// A first line with any non-numeric field is taken as a header and skipped.
pub fn parse_feature_csv<T: Real>(text: &str) -> Result<(DataMatrix<T>, DVector<T>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && record.iter().any(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        rows.push(record.iter().map(|c| parse_cell(c, line)).collect::<Result<_>>()?);
    }
    let width = width.ok_or(Error::Parse { line: 1, message: "no data rows".into() })?;
    if width < 2 {
        return Err(Error::Parse { line: 1, message: "need at least one feature and a target".into() });
    }
    let (n, d) = (rows.len(), width - 1);
    let features = DMatrix::from_fn(d, n, |i, j| rows[j][i]);
    let targets = DVector::from_fn(n, |j, _| rows[j][d]);
    Ok((DataMatrix::new(features)?, targets))
}

pub fn load_feature_csv<T: Real>(path: impl AsRef<Path>) -> Result<(DataMatrix<T>, DVector<T>)> {
    parse_feature_csv(&std::fs::read_to_string(path)?)
}

/// Latent-factor data: `d` features driven by a few scaled factors plus noise,
/// with the target a weighted sum of the unit-variance factors.
#[derive(Debug, Clone, PartialEq)]
pub struct CollinearSpec {
    pub d: usize,
    pub n: usize,
    pub factor_scales: Vec<f64>,
    pub target_weights: Vec<f64>,
    pub feature_noise: f64,
    pub target_noise: f64,
}

impl Default for CollinearSpec {
    fn default() -> Self {
        Self {
            d: 20,
            n: 40,
            factor_scales: vec![8.0, 4.0, 2.0, 1.0],
            target_weights: vec![1.0, 1.0, 1.0, 1.0],
            feature_noise: 0.05,
            target_noise: 0.05,
        }
    }
}

/// Draws factors `F` (`m × n`, row `i` scaled by `factor_scales[i]`), an
/// orthonormal loading `L` (`d × m`), feature noise and target noise, in that order.
pub fn synth_collinear<T: Real>(spec: &CollinearSpec, seed: u64) -> Result<(DataMatrix<T>, DVector<T>)> {
    let m = spec.factor_scales.len();
    if m == 0 || m != spec.target_weights.len() || m > spec.d || spec.n < 2 {
        return Err(Error::InvalidDimension(format!(
            "collinear data needs 1 <= factors <= d, matching weights and n >= 2 (factors {m}, weights {}, d {}, n {})",
            spec.target_weights.len(),
            spec.d,
            spec.n
        )));
    }
    let mut rng = StreamRng::new(seed, streams::DATA);
    let unit: DMatrix<T> = rng.gaussian_matrix(m, spec.n);
    let loading = rng.gaussian_matrix::<T>(spec.d, m).qr().q();
    let noise: DMatrix<T> = rng.gaussian_matrix(spec.d, spec.n);
    let target_noise: DVector<T> = rng.gaussian_vector(spec.n);

    let scales = DVector::from_iterator(m, spec.factor_scales.iter().map(|&s| T::lit(s)));
    let factors = DMatrix::from_fn(m, spec.n, |i, j| unit[(i, j)] * scales[i]);
    let features = loading * factors + noise * T::lit(spec.feature_noise);
    let weights = DVector::from_iterator(m, spec.target_weights.iter().map(|&w| T::lit(w)));
    let targets = unit.tr_mul(&weights) + target_noise * T::lit(spec.target_noise);
    Ok((DataMatrix::new(features)?, targets))
}

pub const PCR_HEADER: [&str; 4] = ["eta_ratio", "strategy", "r2_train", "r2_test"];

pub fn write_pcr_csv<W: Write>(w: W, rows: &[RegressionReport]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(PCR_HEADER).map_err(csv_error)?;
    for r in rows {
        out.write_record([
            format_float(r.eta_ratio),
            r.strategy.as_str().to_string(),
            format_float(r.r2_train),
            format_float(r.r2_test),
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}
