//! Dense linear-algebra substrate: data matrices, full SVD, orthonormal bases,
//! principal angles and the coordinate changes the attacks are built on.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A `d × n` real matrix whose columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T: Real> {
    inner: DMatrix<T>,
}

impl<T: Real> DataMatrix<T> {
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidDimension(format!(
                "data matrix must be non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some(pos) = m.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at row {}, column {}",
                pos % m.nrows(),
                pos / m.nrows()
            )));
        }
        Ok(Self { inner: m })
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidDimension(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn from_diagonal(diag: &[T]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.inner
    }

    pub fn into_inner(self) -> DMatrix<T> {
        self.inner
    }

    pub fn fro_norm(&self) -> T {
        self.inner.norm()
    }

    /// Returns `self + delta`.
    pub fn perturbed(&self, delta: &DMatrix<T>) -> Result<Self> {
        if delta.shape() != self.shape() {
            return Err(Error::InvalidDimension(format!(
                "perturbation is {}x{}, data is {}x{}",
                delta.nrows(),
                delta.ncols(),
                self.rows(),
                self.cols()
            )));
        }
        Self::new(&self.inner + delta)
    }

    pub fn transpose(&self) -> Self {
        Self { inner: self.inner.transpose() }
    }
}

/// Full singular value decomposition `X = U Σ Vᵀ` with square factors.
///
/// Singular values are sorted in nonincreasing order. Each column of `U` is
/// signed so that its largest-magnitude entry is positive, and the matching
/// column of `V` follows it. Columns of `V` beyond `min(d, n)` get the same
/// sign rule on their own.
#[derive(Debug, Clone)]
pub struct SvdTriple<T: Real> {
    pub u: DMatrix<T>,
    pub sigma: Vec<T>,
    pub v: DMatrix<T>,
    pub rank_tol: T,
}

impl<T: Real> SvdTriple<T> {
    /// Numerical rank: number of `σ_i > rank_tol·σ_1`.
    pub fn rank(&self) -> usize {
        let Some(&top) = self.sigma.first() else {
            return 0;
        };
        if top <= T::zero() {
            return 0;
        }
        let cut = self.rank_tol * top;
        self.sigma.iter().take_while(|&&s| s > cut).count()
    }

    /// Zero-based singular value lookup that returns zero past `min(d, n)`.
    pub fn sigma_at(&self, i: usize) -> T {
        self.sigma.get(i).copied().unwrap_or_else(T::zero)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    pub fn u_col(&self, i: usize) -> DVector<T> {
        self.u.column(i).into_owned()
    }

    pub fn v_col(&self, i: usize) -> DVector<T> {
        self.v.column(i).into_owned()
    }

    /// The `d × n` diagonal factor.
    pub fn sigma_matrix(&self) -> DMatrix<T> {
        let (d, n) = self.dims();
        let mut s = DMatrix::zeros(d, n);
        for (i, &x) in self.sigma.iter().enumerate() {
            s[(i, i)] = x;
        }
        s
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        &self.u * self.sigma_matrix() * self.v.transpose()
    }

    /// Whether `σ_k` and `σ_{k+1}` are too close for the top-`k` subspace to be well defined.
    ///
    /// `σ_{k+1}` is taken as zero when `k = n < d`; with `k = d` there is nothing
    /// to separate from and the answer is always `false`.
    pub fn is_tied(&self, k: usize) -> bool {
        let (d, _) = self.dims();
        if k == 0 || k >= d || k > self.sigma.len() {
            return false;
        }
        let top = self.sigma[0];
        let gap = self.sigma[k - 1] - self.sigma_at(k);
        gap <= T::lit(T::TIE_TOL) * top
    }
}

pub fn full_svd<T: Real>(m: &DataMatrix<T>) -> Result<SvdTriple<T>> {
    full_svd_with_tol(m, T::lit(T::RANK_TOL))
}

pub fn full_svd_with_tol<T: Real>(m: &DataMatrix<T>, rank_tol: T) -> Result<SvdTriple<T>> {
    let a = m.as_matrix();
    let (d, n) = a.shape();
    let r = d.min(n);
    let svd = SVD::try_new(a.clone(), true, true, T::default_epsilon(), 0)
        .ok_or(Error::NoConvergence)?;
    let raw = svd.singular_values;
    let u_thin = svd.u.ok_or(Error::NoConvergence)?;
    let v_t = svd.v_t.ok_or(Error::NoConvergence)?;

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| raw[j].partial_cmp(&raw[i]).unwrap_or(Ordering::Equal));
    let sigma: Vec<T> = order.iter().map(|&i| raw[i].max(T::zero())).collect();

    let mut u = DMatrix::zeros(d, d);
    let mut v = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        u.set_column(c, &u_thin.column(i));
        v.set_column(c, &v_t.row(i).transpose());
    }
    complete_columns(&mut u, r);
    complete_columns(&mut v, r);

    for j in 0..d {
        if needs_flip(u.column(j).as_slice()) {
            u.column_mut(j).neg_mut();
            if j < r {
                v.column_mut(j).neg_mut();
            }
        }
    }
    for j in r..n {
        if needs_flip(v.column(j).as_slice()) {
            v.column_mut(j).neg_mut();
        }
    }

    Ok(SvdTriple { u, sigma, v, rank_tol })
}

/// Fills columns `filled..` of a square matrix whose first `filled` columns
/// are orthonormal with an orthonormal basis of their complement.
fn complete_columns<T: Real>(q: &mut DMatrix<T>, filled: usize) {
    let dim = q.nrows();
    if filled >= dim {
        return;
    }
    let mut aug = DMatrix::zeros(dim, filled + dim);
    aug.view_mut((0, 0), (dim, filled)).copy_from(&q.columns(0, filled));
    aug.view_mut((0, filled), (dim, dim)).fill_with_identity();
    let full = aug.qr().q();
    for j in filled..dim {
        q.set_column(j, &full.column(j));
    }
}

fn needs_flip<T: Real>(col: &[T]) -> bool {
    let mut best = 0;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() {
            best = i;
        }
    }
    col.get(best).is_some_and(|&x| x < T::zero())
}

/// A `d × k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis<T: Real> {
    columns: DMatrix<T>,
    ambiguous: bool,
}

impl<T: Real> OrthonormalBasis<T> {
    pub fn new(columns: DMatrix<T>) -> Result<Self> {
        let (d, k) = columns.shape();
        if k == 0 || k > d {
            return Err(Error::InvalidDimension(format!(
                "basis of {k} vectors in dimension {d}"
            )));
        }
        if !is_orthonormal(&columns, T::lit(T::ORTHO_TOL)) {
            return Err(Error::InvalidMatrix("basis columns are not orthonormal".into()));
        }
        Ok(Self { columns, ambiguous: false })
    }

    /// Orthonormalizes the columns of `m` (thin QR); fails if they are dependent.
    pub fn orthonormalize(m: &DMatrix<T>) -> Result<Self> {
        let (d, k) = m.shape();
        if k == 0 || k > d {
            return Err(Error::InvalidDimension(format!(
                "basis of {k} vectors in dimension {d}"
            )));
        }
        let qr = m.clone().qr();
        let r = qr.r();
        let scale = m.norm();
        for i in 0..k {
            if r[(i, i)].abs() <= T::lit(T::RANK_TOL) * scale {
                return Err(Error::InvalidMatrix("basis columns are linearly dependent".into()));
            }
        }
        Ok(Self { columns: qr.q(), ambiguous: false })
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<T> {
        &self.columns
    }

    /// Set when the singular value gap defining this subspace was below tolerance.
    pub fn is_ambiguous(&self) -> bool {
        self.ambiguous
    }

    /// The same subspace with columns mixed by a `k × k` orthogonal matrix.
    pub fn rotated(&self, q: &DMatrix<T>) -> Result<Self> {
        let k = self.subspace_dim();
        if q.shape() != (k, k) {
            return Err(Error::InvalidDimension(format!(
                "rotation must be {k}x{k}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if !is_orthonormal(q, T::lit(T::ORTHO_TOL)) {
            return Err(Error::InvalidMatrix("rotation is not orthogonal".into()));
        }
        Ok(Self { columns: &self.columns * q, ambiguous: self.ambiguous })
    }
}

/// The span of the `k` leading left singular vectors.
pub fn leading_subspace<T: Real>(m: &DataMatrix<T>, k: usize) -> Result<OrthonormalBasis<T>> {
    let (d, n) = m.shape();
    check_k(k, d, n)?;
    let svd = SVD::try_new(m.as_matrix().clone(), true, false, T::default_epsilon(), 0)
        .ok_or(Error::NoConvergence)?;
    let u_thin = svd.u.ok_or(Error::NoConvergence)?;
    let raw = svd.singular_values;
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&i, &j| raw[j].partial_cmp(&raw[i]).unwrap_or(Ordering::Equal));

    let mut columns = DMatrix::zeros(d, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        columns.set_column(c, &u_thin.column(i));
        if needs_flip(columns.column(c).as_slice()) {
            columns.column_mut(c).neg_mut();
        }
    }
    let ambiguous = if k < d {
        let next = order.get(k).map_or(T::zero(), |&i| raw[i]);
        raw[order[k - 1]] - next <= T::lit(T::TIE_TOL) * raw[order[0]]
    } else {
        false
    };
    Ok(OrthonormalBasis { columns, ambiguous })
}

pub fn leading_subspace_from<T: Real>(svd: &SvdTriple<T>, k: usize) -> Result<OrthonormalBasis<T>> {
    let (d, n) = svd.dims();
    check_k(k, d, n)?;
    Ok(OrthonormalBasis {
        columns: svd.u.columns(0, k).into_owned(),
        ambiguous: svd.is_tied(k),
    })
}

fn check_k(k: usize, d: usize, n: usize) -> Result<()> {
    if k == 0 || k > d.min(n) {
        return Err(Error::InvalidDimension(format!(
            "k = {k} outside 1..={} for a {d}x{n} matrix",
            d.min(n)
        )));
    }
    Ok(())
}

/// Principal angles in radians, nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAngles<T: Real> {
    angles: Vec<T>,
}

impl<T: Real> PrincipalAngles<T> {
    pub(crate) fn from_sorted(angles: Vec<T>) -> Self {
        Self { angles }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.angles
    }

    pub fn largest(&self) -> T {
        self.angles.last().copied().unwrap_or_else(T::zero)
    }

    pub fn into_vec(self) -> Vec<T> {
        self.angles
    }
}

/// Principal angles between two subspaces of equal dimension.
///
/// Cosines come from the singular values of `AᵀB`. Angles whose cosine is at
/// least `1/√2` are instead read from the sines, the singular values of
/// `B − A(AᵀB)`, which keeps small angles accurate. Arguments are put in a
/// fixed order first so the result is exactly symmetric.
pub fn principal_angles<T: Real>(
    a: &OrthonormalBasis<T>,
    b: &OrthonormalBasis<T>,
) -> Result<PrincipalAngles<T>> {
    if a.ambient_dim() != b.ambient_dim() || a.subspace_dim() != b.subspace_dim() {
        return Err(Error::InvalidDimension(format!(
            "cannot compare a {}x{} basis with a {}x{} basis",
            a.ambient_dim(),
            a.subspace_dim(),
            b.ambient_dim(),
            b.subspace_dim()
        )));
    }
    if a.columns == b.columns {
        return Ok(PrincipalAngles { angles: vec![T::zero(); a.subspace_dim()] });
    }
    let (a, b) = if lex_cmp(b.columns.as_slice(), a.columns.as_slice()) == Ordering::Less {
        (b, a)
    } else {
        (a, b)
    };
    let cross = a.columns.transpose() * &b.columns;
    let mut cos = singular_values(&cross)?;
    cos.sort_by(|x, y| y.partial_cmp(x).unwrap_or(Ordering::Equal));
    let residual = &b.columns - &a.columns * &cross;
    let mut sin = singular_values(&residual)?;
    sin.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));

    let half = T::lit(0.5);
    let one = T::one();
    let mut angles: Vec<T> = cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            let c = c.clamp(T::zero(), one);
            if c * c >= half {
                s.clamp(T::zero(), one).asin()
            } else {
                c.acos()
            }
        })
        .collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    Ok(PrincipalAngles { angles })
}

/// Largest principal angle between the subspaces.
pub fn asimov_distance<T: Real>(a: &OrthonormalBasis<T>, b: &OrthonormalBasis<T>) -> Result<T> {
    Ok(principal_angles(a, b)?.largest())
}

/// Asimov distance between the top-`k` subspaces of two matrices.
pub fn subspace_distance<T: Real>(x: &DataMatrix<T>, y: &DataMatrix<T>, k: usize) -> Result<T> {
    asimov_distance(&leading_subspace(x, k)?, &leading_subspace(y, k)?)
}

fn singular_values<T: Real>(m: &DMatrix<T>) -> Result<Vec<T>> {
    let svd = SVD::try_new(m.clone(), false, false, T::default_epsilon(), 0)
        .ok_or(Error::NoConvergence)?;
    Ok(svd.singular_values.iter().copied().collect())
}

fn lex_cmp<T: Real>(x: &[T], y: &[T]) -> Ordering {
    for (p, q) in x.iter().zip(y) {
        match p.partial_cmp(q) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    x.len().cmp(&y.len())
}

/// Whether `QᵀQ = I` entrywise within `tol`.
pub fn is_orthonormal<T: Real>(q: &DMatrix<T>, tol: T) -> bool {
    let k = q.ncols();
    let gram = q.transpose() * q;
    (gram - DMatrix::<T>::identity(k, k)).amax() <= tol
}

/// Householder reflector `H` (symmetric, orthogonal) with `H v = s‖v‖e₁`, `s = sign(v₀)`.
///
/// Returns `(H, s‖v‖)`. When `v` already lies on the first axis, or is zero, `H = I`.
pub fn householder_to_axis<T: Real>(v: &DVector<T>) -> (DMatrix<T>, T) {
    let len = v.len();
    let norm = v.norm();
    let id = DMatrix::identity(len, len);
    if len == 0 || norm == T::zero() {
        return (id, T::zero());
    }
    let s = if v[0] < T::zero() { -T::one() } else { T::one() };
    let tail_sq = v.rows(1, len - 1).norm_squared();
    if tail_sq == T::zero() {
        return (id, v[0]);
    }
    let mut w = v.clone();
    // v₀ − s‖v‖ rewritten to avoid cancellation.
    w[0] = -tail_sq / (v[0] + s * norm);
    let wn = w.norm_squared();
    let h = id - (&w * w.transpose()) * (T::lit(2.0) / wn);
    (h, s * norm)
}

/// The canonical `(k+1)`-dimensional form of a rank-one attack on a rank-`k` matrix.
///
/// In rotated coordinates the data is `Σ̃ = diag(σ_1, …, σ_k, 0)` and the
/// perturbation is `a_c b_cᵀ`. The last coordinates of `a_c` and `b_c` are the
/// signed norms of the components of `Uᵀa` and `Vᵀb` outside the first `k`.
#[derive(Debug, Clone)]
pub struct CompressedRankOne<T: Real> {
    pub sigma_tilde: DMatrix<T>,
    pub a: DVector<T>,
    pub b: DVector<T>,
}

impl<T: Real> CompressedRankOne<T> {
    pub fn k(&self) -> usize {
        self.sigma_tilde.nrows() - 1
    }

    pub fn operand(&self) -> DMatrix<T> {
        &self.sigma_tilde + &self.a * self.b.transpose()
    }

    /// Asimov distance between the span of `Σ̃` and the top-`k` subspace of `Σ̃ + a_c b_cᵀ`.
    pub fn asimov_distance(&self) -> Result<T> {
        let k = self.k();
        let clean = OrthonormalBasis {
            columns: DMatrix::identity(k + 1, k),
            ambiguous: false,
        };
        let attacked = leading_subspace(&DataMatrix::new(self.operand())?, k)?;
        asimov_distance(&clean, &attacked)
    }
}

pub fn compress_rank_one_problem<T: Real>(
    x: &DataMatrix<T>,
    k: usize,
    a: &DVector<T>,
    b: &DVector<T>,
) -> Result<CompressedRankOne<T>> {
    let (d, n) = x.shape();
    if a.len() != d || b.len() != n {
        return Err(Error::InvalidDimension(format!(
            "vectors of length {} and {} do not match a {d}x{n} matrix",
            a.len(),
            b.len()
        )));
    }
    if k == 0 || k >= d || k >= n {
        return Err(Error::InvalidDimension(format!(
            "compression needs 1 <= k < min(d, n), got k = {k} for {d}x{n}"
        )));
    }
    let svd = full_svd(x)?;
    let rank = svd.rank();
    if rank != k {
        return Err(Error::RankMismatch { expected: k, found: rank });
    }
    let ua = svd.u.transpose() * a;
    let vb = svd.v.transpose() * b;
    let (_, sa) = householder_to_axis(&ua.rows(k, d - k).into_owned());
    let (_, sb) = householder_to_axis(&vb.rows(k, n - k).into_owned());

    let mut sigma_tilde = DMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        sigma_tilde[(i, i)] = svd.sigma[i];
    }
    let mut ac = DVector::zeros(k + 1);
    let mut bc = DVector::zeros(k + 1);
    ac.rows_mut(0, k).copy_from(&ua.rows(0, k));
    bc.rows_mut(0, k).copy_from(&vb.rows(0, k));
    ac[k] = sa;
    bc[k] = sb;
    Ok(CompressedRankOne { sigma_tilde, a: ac, b: bc })
}

/// Returns `p · x · tᵀ` for orthogonal `p` and `t`.
pub fn unitary_conjugate<T: Real>(
    x: &DataMatrix<T>,
    p: &DMatrix<T>,
    t: &DMatrix<T>,
) -> Result<DataMatrix<T>> {
    let (d, n) = x.shape();
    if p.shape() != (d, d) || t.shape() != (n, n) {
        return Err(Error::InvalidDimension(format!(
            "factors must be {d}x{d} and {n}x{n}"
        )));
    }
    let tol = T::lit(T::ORTHO_TOL);
    if !is_orthonormal(p, tol) || !is_orthonormal(t, tol) {
        return Err(Error::InvalidMatrix("conjugating factor is not orthogonal".into()));
    }
    DataMatrix::new(p * x.as_matrix() * t.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use std::f64::consts::FRAC_PI_2;

    fn basis(cols: &[&[f64]]) -> OrthonormalBasis<f64> {
        let d = cols[0].len();
        let flat: Vec<f64> = cols.iter().flat_map(|c| c.iter().copied()).collect();
        OrthonormalBasis::new(DMatrix::from_column_slice(d, cols.len(), &flat)).unwrap()
    }

    fn check_svd(m: &DataMatrix<f64>) {
        let s = full_svd(m).unwrap();
        let (d, n) = m.shape();
        assert!(is_orthonormal(&s.u, 1e-10));
        assert!(is_orthonormal(&s.v, 1e-10));
        assert_eq!(s.u.shape(), (d, d));
        assert_eq!(s.v.shape(), (n, n));
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        let err = (s.reconstruct() - m.as_matrix()).norm() / m.fro_norm().max(1e-300);
        assert!(err < 1e-10, "reconstruction error {err}");
    }

    #[test]
    fn svd_of_diagonal() {
        let s = full_svd(&DataMatrix::from_diagonal(&[3.0, 2.0]).unwrap()).unwrap();
        assert_eq!(s.sigma, vec![3.0, 2.0]);
        assert!((s.u.clone() - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert!((s.v.clone() - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn svd_of_zero() {
        let s = full_svd(&DataMatrix::new(DMatrix::<f64>::zeros(2, 2)).unwrap()).unwrap();
        assert_eq!(s.sigma, vec![0.0, 0.0]);
        assert_eq!(s.rank(), 0);
    }

    #[test]
    fn svd_reconstructs_random_shapes() {
        let mut rng = StreamRng::new(42, 0);
        for &(d, n) in &[(5, 5), (3, 7), (7, 3), (1, 4), (4, 1)] {
            check_svd(&DataMatrix::new(rng.gaussian_matrix(d, n)).unwrap());
        }
    }

    #[test]
    fn svd_signs_are_canonical() {
        let mut rng = StreamRng::new(8, 0);
        let m = DataMatrix::new(rng.gaussian_matrix::<f64>(4, 6)).unwrap();
        let s = full_svd(&m).unwrap();
        for j in 0..4 {
            let col = s.u.column(j);
            let big = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn non_finite_rejected() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(DataMatrix::new(m), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn leading_subspace_of_diagonal() {
        let b = leading_subspace(&DataMatrix::from_diagonal(&[3.0, 2.0, 1.0]).unwrap(), 2).unwrap();
        let want = basis(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert!(asimov_distance(&b, &want).unwrap() < 1e-12);
        assert!(!b.is_ambiguous());
    }

    #[test]
    fn leading_subspace_follows_rotation() {
        let mut rng = StreamRng::new(3, 0);
        let u: DMatrix<f64> = rng.orthogonal(3);
        let x = DataMatrix::new(&u * DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]))).unwrap();
        let b = leading_subspace(&x, 1).unwrap();
        let dot = (b.columns().column(0).transpose() * u.column(0))[0];
        assert!((dot.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_is_ambiguous() {
        let b = leading_subspace(&DataMatrix::new(DMatrix::<f64>::identity(3, 3)).unwrap(), 2).unwrap();
        assert!(b.is_ambiguous());
    }

    #[test]
    fn k_out_of_range() {
        let x = DataMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        assert!(matches!(leading_subspace(&x, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(leading_subspace(&x, 3), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn angles_of_simple_pairs() {
        let a = basis(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let b = basis(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
        let ang = principal_angles(&a, &b).unwrap();
        assert!(ang.as_slice()[0].abs() < 1e-15);
        assert!((ang.as_slice()[1] - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(asimov_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn angle_in_a_plane() {
        for &phi in &[1e-9_f64, 1e-4, 0.3, std::f64::consts::FRAC_PI_4, 1.2, FRAC_PI_2 - 1e-4] {
            let a = basis(&[&[1.0, 0.0, 0.0]]);
            let b = basis(&[&[phi.cos(), phi.sin(), 0.0]]);
            let got = asimov_distance(&a, &b).unwrap();
            assert!((got - phi).abs() < 1e-14 * phi.max(1.0), "phi {phi} got {got}");
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = basis(&[&[1.0, 0.0, 0.0]]);
        let b = basis(&[&[1.0, 0.0]]);
        assert!(matches!(principal_angles(&a, &b), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn householder_maps_to_axis() {
        let v = DVector::from_vec(vec![-0.3_f64, 2.0, 1.0e-9, -4.0]);
        let (h, signed) = householder_to_axis(&v);
        let hv = &h * &v;
        assert!((hv[0] - signed).abs() < 1e-14);
        assert!(hv.rows(1, 3).amax() < 1e-14);
        assert!(signed < 0.0);
        assert!(is_orthonormal(&h, 1e-14));
    }

    #[test]
    fn householder_identity_on_axis() {
        let v = DVector::from_vec(vec![2.5_f64, 0.0, 0.0]);
        let (h, signed) = householder_to_axis(&v);
        assert_eq!(h, DMatrix::identity(3, 3));
        assert_eq!(signed, 2.5);
    }

    #[test]
    fn compression_preserves_distance() {
        let mut rng = StreamRng::new(99, 0);
        let (d, n, k) = (6, 5, 2);
        let x = DataMatrix::new(rng.gaussian_matrix::<f64>(d, k) * rng.gaussian_matrix::<f64>(k, n)).unwrap();
        for _ in 0..5 {
            let a = rng.gaussian_vector::<f64>(d) * 0.7;
            let b = rng.gaussian_vector::<f64>(n);
            let c = compress_rank_one_problem(&x, k, &a, &b).unwrap();
            let y = x.perturbed(&(&a * b.transpose())).unwrap();
            let full = subspace_distance(&x, &y, k).unwrap();
            assert!((full - c.asimov_distance().unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn compression_keeps_head_coordinates() {
        let x = DataMatrix::from_diagonal(&[3.0, 2.0, 0.0, 0.0]).unwrap();
        let a = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.0]);
        let b = DVector::from_vec(vec![0.5, -0.5, 0.0, 0.0]);
        let c = compress_rank_one_problem(&x, 2, &a, &b).unwrap();
        assert_eq!(c.a.as_slice(), &[0.1, 0.2, 0.3]);
        assert_eq!(c.b[2], 0.0);
    }

    #[test]
    fn compression_rank_mismatch() {
        let x = DataMatrix::from_diagonal(&[3.0, 2.0, 1.0, 0.0]).unwrap();
        let a = DVector::zeros(4);
        let r = compress_rank_one_problem(&x, 2, &a, &a);
        assert!(matches!(r, Err(Error::RankMismatch { expected: 2, found: 3 })));
    }

    #[test]
    fn conjugation() {
        let x = DataMatrix::from_diagonal(&[3.0, 2.0]).unwrap();
        let id = DMatrix::identity(2, 2);
        assert_eq!(unitary_conjugate(&x, &id, &id).unwrap(), x);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let y = unitary_conjugate(&x, &swap, &swap).unwrap();
        assert_eq!(y.as_matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(unitary_conjugate(&x, &bad, &id), Err(Error::InvalidMatrix(_))));
    }
}
