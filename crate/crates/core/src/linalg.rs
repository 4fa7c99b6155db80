//! Dense complex linear algebra with tolerance-disciplined rank decisions.
//!
//! Everything here is a pure function on immutable inputs. Rank and nullspace
//! decisions are made from singular values, never from pivoted elimination, so
//! every decision carries a confidence measure (the gap ratio between the
//! smallest retained and the largest discarded singular value).
//!
//! Vectors over several parties are flattened with the **last party fastest**:
//! `|i>_B |j>_C` lives at index `i * d_C + j`.

use faer::linalg::solvers::{Qr, Svd};
use faer::traits::ComplexField;
use faer::{Mat, MatRef, Side};
use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type Complex = num_complex::Complex64;
pub type CVector = Array1<Complex>;
pub type CMatrix = Array2<Complex>;

/// Singular values below this fraction of the largest one are treated as
/// exact zeros when computing gap ratios.
pub const EXACT_ZERO_FLOOR: f64 = 1e-14;

/// The single place where numerical thresholds live. Every report echoes the
/// record that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative threshold for scalar zero tests (overlaps, proportionality).
    pub zero: f64,
    /// Relative singular-value cutoff for rank and nullspace decisions.
    pub rank: f64,
    /// Slack allowed below zero when testing positive semidefiniteness.
    pub psd: f64,
    /// Minimum gap ratio for a confident rank decision.
    pub gap_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { zero: 1e-9, rank: 1e-9, psd: 1e-10, gap_min: 1e6 }
    }
}

pub fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

/// `exp(2 pi i k / n)`, exact at the quarter turns.
pub fn root_of_unity(n: u64, k: i64) -> Result<Complex> {
    if n == 0 {
        return domain("root_of_unity requires n >= 1");
    }
    let r = k.rem_euclid(n as i64) as u64;
    let z = if r == 0 {
        c(1.0, 0.0)
    } else if 2 * r == n {
        c(-1.0, 0.0)
    } else if 4 * r == n {
        c(0.0, 1.0)
    } else if 4 * r == 3 * n {
        c(0.0, -1.0)
    } else {
        let angle = 2.0 * std::f64::consts::PI * r as f64 / n as f64;
        Complex::from_polar(1.0, angle)
    };
    Ok(z)
}

/// Tensor product of local factors, last factor fastest.
pub fn kron(factors: &[CVector]) -> Result<CVector> {
    let (first, rest) = match factors.split_first() {
        Some(split) => split,
        None => return domain("kron of an empty factor list"),
    };
    let mut acc = first.clone();
    for f in rest {
        let mut next = Array1::zeros(acc.len() * f.len());
        for (i, &a) in acc.iter().enumerate() {
            if a == Complex::default() {
                continue;
            }
            let base = i * f.len();
            for (j, &b) in f.iter().enumerate() {
                next[base + j] = a * b;
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// `<u|v>`, conjugate-linear in `u`.
pub fn inner(u: &CVector, v: &CVector) -> Result<Complex> {
    if u.len() != v.len() {
        return domain(format!("inner product of vectors with dims {} and {}", u.len(), v.len()));
    }
    Ok(u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum())
}

pub fn norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Indices of the exactly nonzero coefficients.
pub fn support(v: &CVector) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, z)| **z != Complex::default())
        .map(|(i, _)| i)
        .collect()
}

/// `|<a|b>|^2 >= (1 - tol) <a|a><b|b>`.
pub fn proportional(a: &CVector, b: &CVector, tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let ab = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<Complex>().norm_sqr();
    let aa: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let bb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    ab >= (1.0 - tol) * aa * bb
}

/// Element types the dense routines accept: `f64` and [`Complex`].
pub trait Scalar: ComplexField<Real = f64> + Copy + Default + 'static {
    fn modulus(&self) -> f64;
    fn unit() -> Self;
}

impl Scalar for f64 {
    fn modulus(&self) -> f64 {
        self.abs()
    }
    fn unit() -> Self {
        1.0
    }
}

impl Scalar for Complex {
    fn modulus(&self) -> f64 {
        self.norm()
    }
    fn unit() -> Self {
        c(1.0, 0.0)
    }
}

fn to_faer<A: Scalar>(a: &Array2<A>) -> Mat<A> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn backend(e: impl std::fmt::Debug) -> Error {
    Error::Backend(format!("{e:?}"))
}

/// Triangular factor of a tall matrix; it has the same singular values and
/// right singular vectors, at a fraction of the SVD cost.
fn compress<A: Scalar>(a: MatRef<'_, A>) -> Mat<A> {
    if a.nrows() > 2 * a.ncols() {
        Qr::new(a).thin_R().to_owned()
    } else {
        a.to_owned()
    }
}

fn singular_values<A: Scalar>(a: &Array2<A>) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let m = compress(to_faer(a).as_ref());
    let s = m.as_ref().singular_values().map_err(backend)?;
    Ok(s)
}

/// Number of singular values strictly above `rel_tol * sigma_max`.
pub fn rank(a: &CMatrix, rel_tol: f64) -> Result<usize> {
    rank_generic(a, rel_tol)
}

pub fn rank_real(a: &Array2<f64>, rel_tol: f64) -> Result<usize> {
    rank_generic(a, rel_tol)
}

fn rank_generic<A: Scalar>(a: &Array2<A>, rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0) {
        return domain("rank tolerance must be positive");
    }
    let s = singular_values(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_tol * smax).count())
}

/// A nullspace together with the confidence of the rank decision behind it.
#[derive(Clone, Debug)]
pub struct Nullspace<A> {
    pub basis: Vec<Array1<A>>,
    pub gap_ratio: f64,
}

/// Orthonormal basis of `{x : A x ~ 0}` for a real matrix.
pub fn nullspace_real(a: &Array2<f64>, rel_tol: f64) -> Result<Nullspace<f64>> {
    nullspace_generic(a, rel_tol)
}

/// Orthonormal basis of `{x : A x ~ 0}` for a complex matrix.
pub fn nullspace_complex(a: &CMatrix, rel_tol: f64) -> Result<Nullspace<Complex>> {
    nullspace_generic(a, rel_tol)
}

fn nullspace_generic<A: Scalar>(a: &Array2<A>, rel_tol: f64) -> Result<Nullspace<A>> {
    if !(rel_tol > 0.0) {
        return domain("nullspace tolerance must be positive");
    }
    let n = a.ncols();
    let all_zero = a.iter().all(|z| z.modulus() == 0.0);
    if a.nrows() == 0 || all_zero {
        let basis = (0..n)
            .map(|i| {
                let mut e = Array1::<A>::default(n);
                e[i] = A::unit();
                e
            })
            .collect();
        return Ok(Nullspace { basis, gap_ratio: f64::INFINITY });
    }
    let m = compress(to_faer(a).as_ref());
    // A full SVD keeps all n right singular vectors even when rows < n.
    let svd = Svd::new(m.as_ref()).map_err(backend)?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|x| x.modulus()).collect();
    let v = svd.V();
    let smax = s[0];
    let kept = s.iter().filter(|&&x| x > rel_tol * smax).count();
    let basis: Vec<Array1<A>> = (kept..n).map(|j| Array1::from_shape_fn(n, |i| v[(i, j)])).collect();

    // Singular values beyond min(rows, cols) are exact zeros.
    let largest_discarded = if kept == n { None } else { Some(s.get(kept).copied().unwrap_or(0.0)) };
    let gap_ratio = match largest_discarded {
        None => f64::INFINITY,
        Some(x) if x < EXACT_ZERO_FLOOR * smax => f64::INFINITY,
        Some(x) => s[kept - 1] / x,
    };
    Ok(Nullspace { basis, gap_ratio })
}

/// Checks that `h` is square and Hermitian to within `tol` relative to its
/// largest entry (absolute for entries below one).
pub fn check_hermitian(h: &CMatrix, tol: f64) -> Result<()> {
    let (r, cols) = h.dim();
    if r != cols {
        return domain(format!("expected a square matrix, got {r}x{cols}"));
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..r {
        for j in i..r {
            let dev = (h[[i, j]] - h[[j, i]].conj()).norm();
            if dev > tol * scale {
                return domain(format!("matrix is not Hermitian: |H[{i},{j}] - conj(H[{j},{i}])| = {dev:e}"));
            }
        }
    }
    Ok(())
}

/// Real spectrum of a Hermitian matrix, ascending.
pub fn eig_hermitian(h: &CMatrix) -> Result<Vec<f64>> {
    check_hermitian(h, 1e-10)?;
    if h.is_empty() {
        return Ok(Vec::new());
    }
    to_faer(h).as_ref().self_adjoint_eigenvalues(Side::Lower).map_err(backend)
}

/// Partial transpose over the parties listed in `mask`.
///
/// `mask` must be a nonempty proper subset of `0..dims.len()`.
pub fn partial_transpose(rho: &CMatrix, dims: &[usize], mask: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if rho.dim() != (total, total) {
        return domain(format!(
            "matrix is {:?} but the party dims {:?} require {total}x{total}",
            rho.dim(),
            dims
        ));
    }
    if mask.is_empty() || mask.iter().any(|&p| p >= dims.len()) {
        return domain(format!("invalid party mask {mask:?} for {} parties", dims.len()));
    }
    let mut flagged = vec![false; dims.len()];
    for &p in mask {
        flagged[p] = true;
    }
    if flagged.iter().all(|&f| f) {
        return domain("partial transpose mask must be a proper subset of the parties");
    }

    let digits: Vec<Vec<usize>> = (0..total).map(|i| unflatten(i, dims)).collect();
    let mut out = CMatrix::zeros((total, total));
    let mut rd = vec![0; dims.len()];
    let mut cd = vec![0; dims.len()];
    for r in 0..total {
        for col in 0..total {
            for p in 0..dims.len() {
                if flagged[p] {
                    rd[p] = digits[col][p];
                    cd[p] = digits[r][p];
                } else {
                    rd[p] = digits[r][p];
                    cd[p] = digits[col][p];
                }
            }
            out[[flatten(&rd, dims), flatten(&cd, dims)]] = rho[[r, col]];
        }
    }
    Ok(out)
}

/// Multi-index of a flat position, last party fastest.
pub fn unflatten(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for p in (0..dims.len()).rev() {
        out[p] = index % dims[p];
        index /= dims[p];
    }
    out
}

pub fn flatten(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

/// Real parameter vector of an `m x m` Hermitian matrix.
///
/// Layout: the `m` diagonal entries first, then `Re a_ij, Im a_ij` for every
/// `i < j` in lexicographic order. The vector has exactly `m^2` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianParams {
    pub m: usize,
    pub params: Vec<f64>,
}

impl HermitianParams {
    pub fn identity(m: usize) -> Self {
        let mut params = vec![0.0; m * m];
        params[..m].fill(1.0);
        HermitianParams { m, params }
    }

    pub fn from_vec(params: Vec<f64>) -> Result<Self> {
        let m = (params.len() as f64).sqrt().round() as usize;
        if m * m != params.len() || m == 0 {
            return domain(format!("parameter vector of length {} is not a nonzero perfect square", params.len()));
        }
        Ok(HermitianParams { m, params })
    }

    pub fn to_matrix(&self) -> CMatrix {
        let m = self.m;
        let mut h = CMatrix::zeros((m, m));
        for i in 0..m {
            h[[i, i]] = c(self.params[i], 0.0);
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let k = offdiag_param(m, i, j);
                let (re, im) = (self.params[k], self.params[k + 1]);
                h[[i, j]] = c(re, im);
                h[[j, i]] = c(re, -im);
            }
        }
        h
    }

    pub fn as_array(&self) -> Array1<f64> {
        Array1::from(self.params.clone())
    }
}

/// Position of `Re a_ij` (with `Im a_ij` right after it) for `i < j`.
pub fn offdiag_param(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < m);
    let pair = i * (2 * m - i - 1) / 2 + (j - i - 1);
    m + 2 * pair
}

pub fn hermitian_to_params(h: &CMatrix) -> Result<HermitianParams> {
    check_hermitian(h, 1e-10)?;
    let m = h.nrows();
    if m == 0 {
        return domain("empty matrix");
    }
    let mut params = vec![0.0; m * m];
    for i in 0..m {
        params[i] = h[[i, i]].re;
        for j in (i + 1)..m {
            let k = offdiag_param(m, i, j);
            params[k] = h[[i, j]].re;
            params[k + 1] = h[[i, j]].im;
        }
    }
    Ok(HermitianParams { m, params })
}

pub fn params_to_hermitian(params: &[f64]) -> Result<CMatrix> {
    Ok(HermitianParams::from_vec(params.to_vec())?.to_matrix())
}

/// Serde helper writing non-finite gap ratios as the strings `"inf"`,
/// `"-inf"` and `"nan"`, which JSON numbers cannot represent.
pub mod serde_gap {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&x.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Solution space of a homogeneous real system over Hermitian parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionSpace {
    pub dim: usize,
    pub basis: Vec<HermitianParams>,
    /// Smallest retained over largest discarded singular value; `inf` when
    /// the rank deficiency is exact.
    #[serde(with = "serde_gap")]
    pub gap_ratio: f64,
}

/// Haar-random unitary from the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CMatrix> {
    let g = CMatrix::from_shape_fn((n, n), |_| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let qr = Qr::new(to_faer(&g).as_ref());
    let (q, r) = (qr.compute_thin_Q(), qr.thin_R());
    Ok(CMatrix::from_shape_fn((n, n), |(i, j)| {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        q[(i, j)] * phase
    }))
}

/// Re-orthonormalizes a list of real vectors (modified Gram-Schmidt, twice).
pub fn orthonormalize(vectors: &[Array1<f64>]) -> Vec<Array1<f64>> {
    let mut out: Vec<Array1<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let proj = q.dot(&w);
                w.scaled_add(-proj, q);
            }
        }
        let n = w.dot(&w).sqrt();
        if n > 1e-12 {
            out.push(w / n);
        }
    }
    out
}

/// Stacks vectors as the rows of a matrix.
pub fn stack_rows<A: Clone + num_traits::Zero>(rows: &[Array1<A>], ncols: usize) -> Array2<A> {
    let mut m = Array2::zeros((rows.len(), ncols));
    for (i, r) in rows.iter().enumerate() {
        m.slice_mut(s![i, ..]).assign(r);
    }
    m
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn trace(a: &CMatrix) -> Complex {
    a.diag().sum()
}

pub fn adjoint(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::from_diag(&Array1::from_elem(n, c(1.0, 0.0)))
}

/// Reshapes `v` into the matrix whose rows run over the parties in `side`
/// and whose columns run over the remaining parties (each group in
/// ascending party order, last party fastest).
pub fn reshape_across(v: &CVector, dims: &[usize], side: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if v.len() != total {
        return domain(format!("vector of dim {} does not match party dims {dims:?}", v.len()));
    }
    if side.is_empty() || side.iter().any(|&p| p >= dims.len()) || side.len() >= dims.len() {
        return domain(format!("invalid cut {side:?} for {} parties", dims.len()));
    }
    let mut rows_p: Vec<usize> = side.to_vec();
    rows_p.sort_unstable();
    rows_p.dedup();
    let cols_p: Vec<usize> = (0..dims.len()).filter(|p| !rows_p.contains(p)).collect();
    let rdims: Vec<usize> = rows_p.iter().map(|&p| dims[p]).collect();
    let cdims: Vec<usize> = cols_p.iter().map(|&p| dims[p]).collect();
    let (nr, nc) = (rdims.iter().product::<usize>(), cdims.iter().product::<usize>());
    let mut out = CMatrix::zeros((nr, nc));
    for (i, &z) in v.iter().enumerate() {
        let digits = unflatten(i, dims);
        let rd: Vec<usize> = rows_p.iter().map(|&p| digits[p]).collect();
        let cd: Vec<usize> = cols_p.iter().map(|&p| digits[p]).collect();
        out[[flatten(&rd, &rdims), flatten(&cd, &cdims)]] = z;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cv(xs: &[f64]) -> CVector {
        xs.iter().map(|&x| c(x, 0.0)).collect()
    }

    fn close(a: Complex, b: Complex) -> bool {
        (a - b).norm() < 1e-14
    }

    #[test]
    fn roots_of_unity() {
        assert!(close(root_of_unity(1, 0).unwrap(), c(1.0, 0.0)));
        assert!(close(root_of_unity(2, 1).unwrap(), c(-1.0, 0.0)));
        assert!(close(root_of_unity(3, 1).unwrap(), c(-0.5, 3f64.sqrt() / 2.0)));
        assert!(close(root_of_unity(4, -1).unwrap(), c(0.0, -1.0)));
        assert!(root_of_unity(0, 1).is_err());
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&[cv(&[1.0, 0.0]), cv(&[0.0, 1.0])]).unwrap(), cv(&[0.0, 1.0, 0.0, 0.0]));
        assert_eq!(kron(&[cv(&[1.0, 1.0]), cv(&[1.0, -1.0])]).unwrap(), cv(&[1.0, -1.0, 1.0, -1.0]));
        assert_eq!(kron(&[cv(&[1.0]), cv(&[1.0, 2.0, 3.0])]).unwrap(), cv(&[1.0, 2.0, 3.0]));
        assert!(kron(&[]).is_err());
    }

    #[test]
    fn inner_examples() {
        assert!(close(inner(&cv(&[1.0, 1.0, 0.0]), &cv(&[1.0, -1.0, 0.0])).unwrap(), c(0.0, 0.0)));
        assert!(close(inner(&cv(&[0.0, 1.0, -1.0]), &cv(&[1.0, -1.0, 0.0])).unwrap(), c(-1.0, 0.0)));
        assert!(close(inner(&cv(&[0.0, 1.0]), &cv(&[0.0, 1.0])).unwrap(), c(1.0, 0.0)));
        let u: CVector = array![c(0.0, 1.0)];
        assert!(close(inner(&u, &cv(&[1.0])).unwrap(), c(0.0, -1.0)));
        assert!(inner(&cv(&[1.0]), &cv(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&identity(3), 1e-9).unwrap(), 3);
        let a = stack_rows(&[cv(&[1.0, 1.0, 0.0]), cv(&[1.0, -1.0, 0.0]), cv(&[1.0, 0.0, 0.0])], 3);
        assert_eq!(rank(&a, 1e-9).unwrap(), 2);
        assert_eq!(rank(&CMatrix::zeros((3, 3)), 1e-9).unwrap(), 0);
        assert!(rank(&identity(2), 0.0).is_err());
    }

    #[test]
    fn rank_of_tall_matrix_uses_compression() {
        // 1000 x 4 with a known two-dimensional row space
        let a = Array2::from_shape_fn((1000, 4), |(i, j)| match j {
            0 => (i as f64).sin(),
            1 => (i as f64).cos(),
            2 => (i as f64).sin() + 2.0 * (i as f64).cos(),
            _ => 0.0,
        });
        assert_eq!(rank_real(&a, 1e-9).unwrap(), 2);
        let ns = nullspace_real(&a, 1e-9).unwrap();
        assert_eq!(ns.basis.len(), 2);
        for x in &ns.basis {
            assert!(a.dot(x).iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn nullspace_examples() {
        let ns = nullspace_real(&array![[1.0, 0.0], [0.0, 0.0]], 1e-9).unwrap();
        assert_eq!(ns.basis.len(), 1);
        assert!((ns.basis[0][1].abs() - 1.0).abs() < 1e-12 && ns.basis[0][0].abs() < 1e-12);
        assert!(ns.gap_ratio > 1e12);

        let ns = nullspace_real(&Array2::zeros((2, 2)), 1e-9).unwrap();
        assert_eq!(ns.basis.len(), 2);

        let ns = nullspace_real(&array![[1.0, 1.0]], 1e-9).unwrap();
        assert_eq!(ns.basis.len(), 1);
        assert!((ns.basis[0][0] + ns.basis[0][1]).abs() < 1e-12);

        let ns = nullspace_real(&array![[1.0, 0.0], [0.0, 1e-3]], 1e-9).unwrap();
        assert!(ns.basis.is_empty());
        assert!(ns.gap_ratio.is_infinite());
    }

    #[test]
    fn nullspace_gap_ratio_is_finite_for_near_deficiency() {
        let ns = nullspace_real(&array![[1.0, 0.0], [0.0, 1e-12]], 1e-9).unwrap();
        assert_eq!(ns.basis.len(), 1);
        assert!((ns.gap_ratio - 1e12).abs() / 1e12 < 1e-6);
    }

    #[test]
    fn complex_nullspace() {
        let a: CMatrix = array![[c(1.0, 0.0), c(0.0, 1.0)]];
        let ns = nullspace_complex(&a, 1e-9).unwrap();
        assert_eq!(ns.basis.len(), 1);
        assert!(a.dot(&ns.basis[0])[0].norm() < 1e-12);
    }

    #[test]
    fn eig_examples() {
        let d = CMatrix::from_diag(&cv(&[3.0, 1.0, 2.0]));
        let e = eig_hermitian(&d).unwrap();
        assert!(e.iter().zip([1.0, 2.0, 3.0]).all(|(a, b)| (a - b).abs() < 1e-12));
        let x: CMatrix = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let e = eig_hermitian(&x).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
        let bad: CMatrix = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        assert!(eig_hermitian(&bad).is_err());
    }

    #[test]
    fn eig_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(5, &mut rng).unwrap();
        assert!(max_abs_diff(&adjoint(&u).dot(&u), &identity(5)) < 1e-12);
        let h = params_to_hermitian(&(0..25).map(|k| (k as f64 * 0.37).sin()).collect::<Vec<_>>()).unwrap();
        let a = eig_hermitian(&h).unwrap();
        let b = eig_hermitian(&u.dot(&h).dot(&adjoint(&u))).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
        let sum: f64 = a.iter().sum();
        assert!((sum - trace(&h).re).abs() < 1e-10);
    }

    #[test]
    fn partial_transpose_examples() {
        let id = identity(4);
        assert_eq!(partial_transpose(&id, &[2, 2], &[0]).unwrap(), id);
        let mut r = CMatrix::zeros((4, 4));
        r[[1, 2]] = c(1.0, 0.0);
        let mut expect = CMatrix::zeros((4, 4));
        expect[[3, 0]] = c(1.0, 0.0);
        assert_eq!(partial_transpose(&r, &[2, 2], &[0]).unwrap(), expect);
        assert!(partial_transpose(&id, &[2, 3], &[0]).is_err());
        assert!(partial_transpose(&id, &[2, 2], &[0, 1]).is_err());
    }

    #[test]
    fn hermitian_params_examples() {
        assert_eq!(hermitian_to_params(&identity(2)).unwrap().params, vec![1.0, 1.0, 0.0, 0.0]);
        let y: CMatrix = array![[c(0.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(0.0, 0.0)]];
        assert_eq!(hermitian_to_params(&y).unwrap().params, vec![0.0, 0.0, 0.0, 1.0]);
        assert!(params_to_hermitian(&[1.0, 2.0, 3.0]).is_err());
        assert_eq!(offdiag_param(3, 0, 1), 3);
        assert_eq!(offdiag_param(3, 0, 2), 5);
        assert_eq!(offdiag_param(3, 1, 2), 7);
    }

    #[test]
    fn flatten_is_last_party_fastest() {
        assert_eq!(flatten(&[1, 2], &[3, 4]), 6);
        assert_eq!(unflatten(6, &[3, 4]), vec![1, 2]);
    }

    #[test]
    fn reshape_across_cuts() {
        let v = kron(&[cv(&[1.0, 2.0]), cv(&[1.0, 0.0, 1.0]), cv(&[0.0, 1.0])]).unwrap();
        for side in [vec![0], vec![1], vec![2], vec![0, 2]] {
            assert_eq!(rank(&reshape_across(&v, &[2, 3, 2], &side).unwrap(), 1e-9).unwrap(), 1);
        }
        assert!(reshape_across(&v, &[2, 3, 2], &[0, 1, 2]).is_err());
        assert!(reshape_across(&v, &[2, 3, 2], &[]).is_err());
    }

    #[test]
    fn orthonormalize_drops_dependent_vectors() {
        let out = orthonormalize(&[array![1.0, 1.0], array![2.0, 2.0], array![1.0, 0.0]]);
        assert_eq!(out.len(), 2);
        assert!(out[0].dot(&out[1]).abs() < 1e-15);
    }
}
