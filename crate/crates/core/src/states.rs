//! Local kets and multipartite product states.
//!
//! States are stored unnormalized with exact root-of-unity coefficients.
//! Consumers normalize on demand.

use std::collections::HashSet;
use std::fmt;

use ndarray::Array1;

use crate::error::{domain, Result};
use crate::linalg::{self, c, root_of_unity, CMatrix, CVector, Complex};

/// A nonzero local vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket(CVector);

impl Ket {
    pub fn new(coeffs: CVector) -> Result<Self> {
        if coeffs.is_empty() {
            return domain("ket must have positive dimension");
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("ket coefficients must be finite");
        }
        if coeffs.iter().all(|z| *z == Complex::default()) {
            return domain("ket must be nonzero");
        }
        Ok(Ket(coeffs))
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Ket::new(coeffs.iter().map(|&x| c(x, 0.0)).collect())
    }

    /// Computational basis ket `|k>` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return domain(format!("basis index {k} out of range for dimension {d}"));
        }
        let mut v = CVector::zeros(d);
        v[k] = c(1.0, 0.0);
        Ok(Ket(v))
    }

    /// The all-ones vector `sum_i |i>`.
    pub fn ones(d: usize) -> Result<Self> {
        Ket::new(Array1::from_elem(d, c(1.0, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coeffs(&self) -> &CVector {
        &self.0
    }

    pub fn into_coeffs(self) -> CVector {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &Ket) -> Result<Complex> {
        linalg::inner(&self.0, &other.0)
    }

    pub fn is_proportional(&self, other: &Ket, tol: f64) -> bool {
        linalg::proportional(&self.0, &other.0, tol)
    }

    pub fn support(&self) -> Vec<usize> {
        linalg::support(&self.0)
    }

    pub fn scaled(&self, z: Complex) -> Result<Ket> {
        Ket::new(self.0.mapv(|x| x * z))
    }
}

fn check_layer(d: usize, k: usize, index: usize) -> Result<usize> {
    if d < 3 {
        return domain(format!("layered Fourier kets need d >= 3, got {d}"));
    }
    if k > (d - 3) / 2 {
        return domain(format!("layer {k} out of range for d = {d}"));
    }
    let n = d - 1 - 2 * k;
    if index >= n {
        return domain(format!("Fourier index {index} out of range for window length {n}"));
    }
    Ok(n)
}

/// `|eta_i^(d-2k)> = sum_{t=k}^{d-2-k} w_{d-1-2k}^{i(t-k)} |t>`.
pub fn eta(d: usize, k: usize, i: usize) -> Result<Ket> {
    let n = check_layer(d, k, i)?;
    let mut v = CVector::zeros(d);
    for t in k..=(d - 2 - k) {
        v[t] = root_of_unity(n as u64, (i * (t - k)) as i64)?;
    }
    Ket::new(v)
}

/// `|xi_j^(d-2k)> = sum_{t=k}^{d-2-k} w_{d-1-2k}^{j(t-k)} |t+1>`.
pub fn xi(d: usize, k: usize, j: usize) -> Result<Ket> {
    let n = check_layer(d, k, j)?;
    let mut v = CVector::zeros(d);
    for t in k..=(d - 2 - k) {
        v[t + 1] = root_of_unity(n as u64, (j * (t - k)) as i64)?;
    }
    Ket::new(v)
}

/// `|phi_i> = |(d-2)/2> + (-1)^i |d/2>` for even `d >= 4`.
pub fn phi(d: usize, i: usize) -> Result<Ket> {
    if d % 2 != 0 || d < 4 {
        return domain(format!("phi kets are defined for even d >= 4, got {d}"));
    }
    if i > 1 {
        return domain(format!("phi index must be 0 or 1, got {i}"));
    }
    let mut v = CVector::zeros(d);
    v[(d - 2) / 2] = c(1.0, 0.0);
    v[d / 2] = c(if i == 0 { 1.0 } else { -1.0 }, 0.0);
    Ket::new(v)
}

/// A labeled tensor product of local kets, one per party.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    pub label: String,
    pub factors: Vec<Ket>,
}

impl ProductState {
    pub fn new(label: impl Into<String>, factors: Vec<Ket>) -> Result<Self> {
        if factors.len() < 2 {
            return domain("a product state needs at least two parties");
        }
        Ok(ProductState { label: label.into(), factors })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Ket::dim).collect()
    }

    /// The flattened global vector.
    pub fn vector(&self) -> CVector {
        let parts: Vec<CVector> = self.factors.iter().map(|k| k.coeffs().clone()).collect();
        linalg::kron(&parts).expect("product state has at least one factor")
    }

    pub fn norm_sqr(&self) -> f64 {
        self.factors.iter().map(Ket::norm_sqr).product()
    }

    /// Same ray as `other`: every factor proportional.
    pub fn same_ray(&self, other: &ProductState, tol: f64) -> bool {
        self.factors.len() == other.factors.len()
            && self.factors.iter().zip(&other.factors).all(|(a, b)| a.is_proportional(b, tol))
    }
}

/// The all-ones tripartite product state used to close each construction.
pub fn stopper(d: usize) -> Result<ProductState> {
    if d < 2 {
        return domain(format!("stopper state needs d >= 2, got {d}"));
    }
    ProductState::new("S", vec![Ket::ones(d)?, Ket::ones(d)?, Ket::ones(d)?])
}

/// `prod_x <p_x|q_x>`.
pub fn product_inner(p: &ProductState, q: &ProductState) -> Result<Complex> {
    if p.dims() != q.dims() {
        return domain(format!("product states with dims {:?} and {:?}", p.dims(), q.dims()));
    }
    p.factors
        .iter()
        .zip(&q.factors)
        .try_fold(c(1.0, 0.0), |acc, (a, b)| Ok(acc * a.inner(b)?))
}

pub fn party_name(p: usize) -> char {
    (b'A' + p as u8) as char
}

/// A named list of product states on fixed local dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSet {
    pub name: String,
    pub dims: Vec<usize>,
    pub states: Vec<ProductState>,
}

impl StateSet {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, states: Vec<ProductState>) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return domain(format!("invalid party dims {dims:?}"));
        }
        let mut seen = HashSet::new();
        for s in &states {
            if s.dims() != dims {
                return domain(format!("state {} has dims {:?}, expected {:?}", s.label, s.dims(), dims));
            }
            if !seen.insert(s.label.as_str()) {
                return domain(format!("duplicate state label {}", s.label));
            }
        }
        Ok(StateSet { name: name.into(), dims, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Copy without the state carrying `label`.
    pub fn without(&self, label: &str) -> StateSet {
        StateSet {
            name: format!("{} minus {label}", self.name),
            dims: self.dims.clone(),
            states: self.states.iter().filter(|s| s.label != label).cloned().collect(),
        }
    }

    /// Gram matrix of the (unnormalized) members, computed factorwise.
    pub fn gram(&self) -> CMatrix {
        let n = self.len();
        let mut g = CMatrix::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let z = product_inner(&self.states[i], &self.states[j]).expect("dims validated");
                g[[i, j]] = z;
                g[[j, i]] = z.conj();
            }
        }
        g
    }

    /// Largest off-diagonal entry of the Gram matrix of the normalized members.
    pub fn max_offdiag_gram(&self) -> f64 {
        let g = self.gram();
        let mut worst = 0.0f64;
        for ((i, j), z) in g.indexed_iter() {
            if i != j {
                worst = worst.max(z.norm() / (g[[i, i]].re * g[[j, j]].re).sqrt());
            }
        }
        worst
    }

    /// First pair whose normalized overlap exceeds `tol`, if any.
    pub fn first_nonorthogonal_pair(&self, tol: f64) -> Option<(usize, usize, f64)> {
        let norms: Vec<f64> = self.states.iter().map(|s| s.norm_sqr().sqrt()).collect();
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let z = product_inner(&self.states[i], &self.states[j]).expect("dims validated");
                let rel = z.norm() / (norms[i] * norms[j]);
                if rel > tol {
                    return Some((i, j, rel));
                }
            }
        }
        None
    }

    pub fn is_orthogonal(&self, tol: f64) -> bool {
        self.first_nonorthogonal_pair(tol).is_none()
    }
}

impl fmt::Display for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{} ({} states in {})", self.name, self.len(), dims.join("x"))
    }
}
