//! The mixed state on the complement of a UPB, its partial transposes, and
//! the range-criterion certificate.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::families::Bipartition;
use crate::linalg::{self, c, CMatrix, CVector, Tolerances};
use crate::states::StateSet;
use crate::unextend::{is_upb, UpbVerdict};

/// A validated density matrix on the given party dimensions.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub dims: Vec<usize>,
    pub matrix: CMatrix,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity to the given slack.
    pub fn new(dims: Vec<usize>, matrix: CMatrix, psd_tol: f64) -> Result<Self> {
        let total: usize = dims.iter().product();
        if matrix.dim() != (total, total) {
            return domain(format!("matrix is {:?}, party dims {dims:?} need {total}x{total}", matrix.dim()));
        }
        linalg::check_hermitian(&matrix, 1e-10)?;
        let tr = linalg::trace(&matrix);
        if (tr - c(1.0, 0.0)).norm() > 1e-10 {
            return domain(format!("trace is {tr}, expected 1"));
        }
        let min = linalg::eig_hermitian(&matrix)?.first().copied().unwrap_or(0.0);
        if min < -psd_tol {
            return domain(format!("minimum eigenvalue {min:e} is negative"));
        }
        Ok(DensityMatrix { dims, matrix })
    }

    /// `I / D`.
    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let total: usize = dims.iter().product();
        let matrix = linalg::identity(total).mapv(|z| z / total as f64);
        DensityMatrix { dims, matrix }
    }

    pub fn spectrum(&self) -> Result<Vec<f64>> {
        linalg::eig_hermitian(&self.matrix)
    }

    pub fn rank(&self, tol: &Tolerances) -> Result<usize> {
        linalg::rank(&self.matrix, tol.rank)
    }
}

/// Orthogonal projector onto the span of an orthogonal set.
pub fn span_projector(set: &StateSet, tol: &Tolerances) -> Result<CMatrix> {
    if let Some((i, j, overlap)) = set.first_nonorthogonal_pair(tol.zero) {
        return Err(Error::Precondition(format!(
            "states {} and {} are not orthogonal (normalized overlap {overlap:.3e})",
            set.states[i].label, set.states[j].label
        )));
    }
    let total = set.total_dim();
    let mut p = CMatrix::zeros((total, total));
    for s in &set.states {
        let v = s.vector();
        let v: CVector = &v / c(linalg::norm(&v), 0.0);
        let support = linalg::support(&v);
        for &a in &support {
            for &b in &support {
                p[[a, b]] += v[a] * v[b].conj();
            }
        }
    }
    Ok(p)
}

/// `(I - P) / (D - t)` for a UPB of `t` states in total dimension `D`.
///
/// The normalization `1 / (D - t)` is the one that gives unit trace. When
/// `assume_upb` is false the set is checked first.
pub fn upb_mixed_state(set: &StateSet, tol: &Tolerances, assume_upb: bool) -> Result<DensityMatrix> {
    if !assume_upb {
        match is_upb(set, tol) {
            UpbVerdict::Upb => {}
            UpbVerdict::Extendible(_) => {
                return Err(Error::Precondition(format!("{} is extendible, not a UPB", set.name)));
            }
            UpbVerdict::Invalid(msg) => return Err(Error::Precondition(msg)),
        }
    }
    let p = span_projector(set, tol)?;
    let total = set.total_dim();
    let free = total - set.len();
    if free == 0 {
        return Err(Error::Precondition(format!("{} spans the whole space", set.name)));
    }
    let matrix = (linalg::identity(total) - p).mapv(|z| z / free as f64);
    DensityMatrix::new(set.dims.clone(), matrix, tol.psd)
}

#[derive(Clone, Debug, Serialize)]
pub struct PptEntry {
    pub cut: String,
    pub min_eigenvalue: f64,
}

/// Smallest eigenvalue of the partial transpose across every bipartition.
pub fn ppt_report(rho: &DensityMatrix) -> Result<Vec<PptEntry>> {
    Bipartition::all(rho.dims.len())
        .par_iter()
        .map(|cut| {
            let pt = linalg::partial_transpose(&rho.matrix, &rho.dims, &cut.side)?;
            let min = linalg::eig_hermitian(&pt)?.first().copied().unwrap_or(0.0);
            Ok(PptEntry { cut: cut.label(), min_eigenvalue: min })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RangeCertificate {
    pub certified: bool,
    pub statement: String,
    /// Non-separability across each bipartition is not checked here.
    pub bipartite_note: String,
}

/// If the set is a UPB, no product vector lies in the range of `I - P`, so
/// the normalized complement state is not fully separable.
pub fn range_entanglement_certificate(set: &StateSet, tol: &Tolerances) -> RangeCertificate {
    let bipartite_note =
        "non-separability across each bipartition is claimed via an external reference and not verified here".to_string();
    match is_upb(set, tol) {
        UpbVerdict::Upb => RangeCertificate {
            certified: true,
            statement: format!(
                "{} is a UPB, so the range of the complement state holds no product vector; the state is not fully separable",
                set.name
            ),
            bipartite_note,
        },
        UpbVerdict::Extendible(w) => RangeCertificate {
            certified: false,
            statement: format!(
                "refused: a product vector (residual {:.1e}) is orthogonal to every member of {}",
                w.residual, set.name
            ),
            bipartite_note,
        },
        UpbVerdict::Invalid(msg) => RangeCertificate { certified: false, statement: format!("refused: {msg}"), bipartite_note },
    }
}

/// Rank of `v` reshaped across `cut`.
pub fn schmidt_rank(v: &CVector, dims: &[usize], cut: &Bipartition, tol: f64) -> Result<usize> {
    if v.iter().all(|z| z.norm() == 0.0) {
        return domain("Schmidt rank of the zero vector");
    }
    if cut.parties != dims.len() {
        return domain(format!("cut {cut} does not match {} parties", dims.len()));
    }
    linalg::rank(&linalg::reshape_across(v, dims, &cut.side)?, tol)
}
