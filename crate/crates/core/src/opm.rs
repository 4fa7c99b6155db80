//! Orthogonality-preserving measurements (OPMs) on a subset of parties.
//!
//! If the parties in `measured` jointly apply a POVM element `E = M^dag M`,
//! the post-measurement states stay orthogonal only if
//! `<x_measured| E |y_measured> = 0` for every pair whose unmeasured factors
//! overlap. The solution space is taken over all Hermitian `E`; the identity
//! always solves the system, so dimension one means every orthogonality-
//! preserving POVM is trivial (positivity never needs to be imposed, since
//! `I + eps X` is positive for any Hermitian `X` and small `eps`).

use std::fmt;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::families::{same_ray_set, Bipartition};
use crate::linalg::{
    self, offdiag_param, Complex, CVector, HermitianParams, SolutionSpace, Tolerances,
};
use crate::states::{party_name, ProductState, StateSet};

/// The parties that measure jointly.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MeasuredSubset {
    pub parties: Vec<usize>,
    pub m: usize,
    /// Number of parties in the whole system.
    pub total: usize,
}

impl MeasuredSubset {
    pub fn new(dims: &[usize], parties: &[usize]) -> Result<Self> {
        let mut p = parties.to_vec();
        p.sort_unstable();
        p.dedup();
        if p.is_empty() || p.len() >= dims.len() || p.iter().any(|&x| x >= dims.len()) {
            return domain(format!("{parties:?} is not a nonempty proper subset of {} parties", dims.len()));
        }
        let m = p.iter().map(|&x| dims[x]).product();
        Ok(MeasuredSubset { parties: p, m, total: dims.len() })
    }

    /// Parses party letters such as `BC`.
    pub fn parse(dims: &[usize], letters: &str) -> Result<Self> {
        let parties = letters
            .chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                ch @ 'A'..='Z' => Ok((ch as u8 - b'A') as usize),
                _ => domain(format!("bad party name '{ch}' in '{letters}'")),
            })
            .collect::<Result<Vec<_>>>()?;
        MeasuredSubset::new(dims, &parties)
    }

    /// The measured side of a cut is its larger side; for singletons the
    /// complement.
    pub fn across(dims: &[usize], cut: &Bipartition) -> Result<Self> {
        MeasuredSubset::new(dims, &cut.complement())
    }

    /// Party letters listed cyclically after the first unmeasured party,
    /// e.g. `BC`, `CA`, `AB`.
    pub fn label(&self) -> String {
        let start = (0..self.total).find(|p| !self.parties.contains(p)).unwrap_or(0);
        (1..=self.total)
            .map(|o| (start + o) % self.total)
            .filter(|p| self.parties.contains(p))
            .map(party_name)
            .collect()
    }

    fn measured_vector(&self, s: &ProductState) -> CVector {
        let parts: Vec<CVector> = self.parties.iter().map(|&p| s.factors[p].coeffs().clone()).collect();
        linalg::kron(&parts).expect("measured subset is nonempty")
    }
}

impl fmt::Display for MeasuredSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A pair whose unmeasured factors overlap.
#[derive(Clone, Debug, Serialize)]
pub struct ActivePair {
    pub i: usize,
    pub j: usize,
    /// Product of the unmeasured factor overlaps `<x_p|y_p>`.
    pub overlap: Complex,
}

fn check_orthogonal(set: &StateSet, tol: &Tolerances) -> Result<()> {
    if let Some((i, j, overlap)) = set.first_nonorthogonal_pair(tol.zero) {
        return Err(Error::Precondition(format!(
            "states {} and {} are not orthogonal (normalized overlap {overlap:.3e})",
            set.states[i].label, set.states[j].label
        )));
    }
    Ok(())
}

pub fn active_pairs(set: &StateSet, measured: &MeasuredSubset, tol: &Tolerances) -> Result<Vec<ActivePair>> {
    check_orthogonal(set, tol)?;
    if measured.total != set.parties() {
        return domain(format!("measured subset {measured} does not fit {} parties", set.parties()));
    }
    let rest: Vec<usize> = (0..set.parties()).filter(|p| !measured.parties.contains(p)).collect();
    let norms: Vec<Vec<f64>> = set
        .states
        .iter()
        .map(|s| rest.iter().map(|&p| s.factors[p].norm_sqr().sqrt()).collect())
        .collect();
    let n = set.len();
    let pairs = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let norms = &norms;
            let rest = &rest;
            ((i + 1)..n).filter_map(move |j| {
                let (x, y) = (&set.states[i], &set.states[j]);
                let overlap: Complex = rest
                    .iter()
                    .map(|&p| x.factors[p].inner(&y.factors[p]).expect("dims validated"))
                    .product();
                let scale: f64 = norms[i].iter().zip(&norms[j]).map(|(a, b)| a * b).product();
                (overlap.norm() > tol.zero * scale).then_some(ActivePair { i, j, overlap })
            })
        })
        .collect();
    Ok(pairs)
}

/// Two real rows per active pair over the Hermitian parameter layout.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub m: usize,
    pub measured: MeasuredSubset,
    pub rows: Array2<f64>,
    /// Row pair `2k, 2k+1` comes from `provenance[k]`.
    pub provenance: Vec<RowProvenance>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RowProvenance {
    pub labels: (String, String),
    pub overlap: Complex,
}

/// Writes `Re` and `Im` of `<u|E|v> / (|u||v|)` as linear forms in the
/// Hermitian parameters of `E`.
pub fn condition_rows(u: &CVector, v: &CVector, m: usize, re: &mut [f64], im: &mut [f64]) {
    let scale = linalg::norm(u) * linalg::norm(v);
    let su = linalg::support(u);
    let sv = linalg::support(v);
    for &a in &su {
        let ua = u[a].conj() / scale;
        for &b in &sv {
            let z = ua * v[b];
            if a == b {
                re[a] += z.re;
                im[a] += z.im;
            } else if a < b {
                let x = offdiag_param(m, a, b);
                re[x] += z.re;
                re[x + 1] -= z.im;
                im[x] += z.im;
                im[x + 1] += z.re;
            } else {
                let x = offdiag_param(m, b, a);
                re[x] += z.re;
                re[x + 1] += z.im;
                im[x] += z.im;
                im[x + 1] -= z.re;
            }
        }
    }
}

pub fn build_constraints(set: &StateSet, measured: &MeasuredSubset, tol: &Tolerances) -> Result<ConstraintSystem> {
    let pairs = active_pairs(set, measured, tol)?;
    let m = measured.m;
    let mm = m * m;
    let vectors: Vec<CVector> = set.states.iter().map(|s| measured.measured_vector(s)).collect();
    let mut rows = Array2::<f64>::zeros((2 * pairs.len(), mm));
    rows.axis_chunks_iter_mut(ndarray::Axis(0), 2)
        .into_par_iter()
        .zip(pairs.par_iter())
        .for_each(|(mut chunk, p)| {
            let mut re = vec![0.0; mm];
            let mut im = vec![0.0; mm];
            condition_rows(&vectors[p.i], &vectors[p.j], m, &mut re, &mut im);
            chunk.row_mut(0).assign(&ndarray::ArrayView1::from(&re));
            chunk.row_mut(1).assign(&ndarray::ArrayView1::from(&im));
        });
    let provenance = pairs
        .iter()
        .map(|p| RowProvenance {
            labels: (set.states[p.i].label.clone(), set.states[p.j].label.clone()),
            overlap: p.overlap,
        })
        .collect();
    Ok(ConstraintSystem { m, measured: measured.clone(), rows, provenance })
}

impl ConstraintSystem {
    /// Largest row residual of the identity operator.
    pub fn identity_residual(&self) -> f64 {
        let id = HermitianParams::identity(self.m).as_array();
        self.rows.dot(&id).iter().fold(0.0, |a, &x| a.max(x.abs()))
    }
}

/// Nullspace of the constraint rows, as Hermitian parameter vectors.
pub fn solution_space(cs: &ConstraintSystem, tol: &Tolerances) -> Result<SolutionSpace> {
    let ns = linalg::nullspace_real(&cs.rows, tol.rank)?;
    let id = HermitianParams::identity(cs.m).as_array();
    let id_norm = (cs.m as f64).sqrt();
    let mut projected = id.clone();
    for b in &ns.basis {
        projected.scaled_add(-b.dot(&id), b);
    }
    let miss = projected.dot(&projected).sqrt() / id_norm;
    if miss > 1e-8 {
        return Err(Error::Consistency(format!(
            "identity lies outside the computed solution space for {} (distance {miss:.3e})",
            cs.measured
        )));
    }
    let basis = ns.basis.into_iter().map(|b| HermitianParams { m: cs.m, params: b.to_vec() }).collect::<Vec<_>>();
    Ok(SolutionSpace { dim: basis.len(), basis, gap_ratio: ns.gap_ratio })
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Trivial {
        #[serde(with = "crate::linalg::serde_gap")]
        gap_ratio: f64,
    },
    Nontrivial {
        dim: usize,
        #[serde(with = "crate::linalg::serde_gap")]
        gap_ratio: f64,
        basis: Vec<HermitianParams>,
    },
    Inconclusive {
        dim: usize,
        #[serde(with = "crate::linalg::serde_gap")]
        gap_ratio: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictKind {
    Trivial,
    Inconclusive,
    Nontrivial,
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictKind::Trivial => "TRIVIAL",
            VerdictKind::Nontrivial => "NONTRIVIAL",
            VerdictKind::Inconclusive => "INCONCLUSIVE",
        })
    }
}

impl Verdict {
    pub fn from_space(space: SolutionSpace, tol: &Tolerances) -> Verdict {
        let confident = space.gap_ratio >= tol.gap_min;
        match (space.dim, confident) {
            (1, true) => Verdict::Trivial { gap_ratio: space.gap_ratio },
            (d, true) if d >= 2 => Verdict::Nontrivial { dim: d, gap_ratio: space.gap_ratio, basis: space.basis },
            (d, _) => Verdict::Inconclusive { dim: d, gap_ratio: space.gap_ratio },
        }
    }

    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::Trivial { .. } => VerdictKind::Trivial,
            Verdict::Nontrivial { .. } => VerdictKind::Nontrivial,
            Verdict::Inconclusive { .. } => VerdictKind::Inconclusive,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Verdict::Trivial { .. } => 1,
            Verdict::Nontrivial { dim, .. } | Verdict::Inconclusive { dim, .. } => *dim,
        }
    }

    pub fn gap_ratio(&self) -> f64 {
        match self {
            Verdict::Trivial { gap_ratio } | Verdict::Nontrivial { gap_ratio, .. } | Verdict::Inconclusive { gap_ratio, .. } => *gap_ratio,
        }
    }
}

pub fn is_trivial_opm(set: &StateSet, measured: &MeasuredSubset, tol: &Tolerances) -> Result<Verdict> {
    let cs = build_constraints(set, measured, tol)?;
    Ok(Verdict::from_space(solution_space(&cs, tol)?, tol))
}

/// True iff `(a, b, c) -> (b, c, a)` maps the ray set onto itself.
pub fn cyclic_invariant(set: &StateSet) -> bool {
    if set.parties() != 3 || set.dims.iter().any(|&d| d != set.dims[0]) {
        return false;
    }
    let rotated = StateSet {
        name: set.name.clone(),
        dims: set.dims.clone(),
        states: set
            .states
            .iter()
            .map(|s| ProductState {
                label: s.label.clone(),
                factors: vec![s.factors[1].clone(), s.factors[2].clone(), s.factors[0].clone()],
            })
            .collect(),
    };
    same_ray_set(set, &rotated, 1e-9)
}

#[derive(Clone, Debug, Serialize)]
pub struct CutVerdict {
    pub cut: String,
    pub measured: String,
    pub verdict: Verdict,
    /// `None` when computed directly; otherwise the cut it was inherited from.
    pub inherited_from: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongReport {
    pub cuts: Vec<CutVerdict>,
    pub overall: VerdictKind,
}

impl StrongReport {
    pub fn min_gap(&self) -> f64 {
        self.cuts.iter().map(|c| c.verdict.gap_ratio()).fold(f64::INFINITY, f64::min)
    }
}

/// The three bipartite OPM verdicts of a tripartite set.
///
/// With `use_symmetry` and a cyclically invariant set, only the `A|BC` cut
/// is solved; the others follow since a cyclic relabeling of the parties
/// maps the cuts onto each other.
pub fn strongest_nonlocality(set: &StateSet, use_symmetry: bool, tol: &Tolerances) -> Result<StrongReport> {
    if set.parties() != 3 {
        return domain(format!("strong nonlocality needs 3 parties, got {}", set.parties()));
    }
    let cuts = Bipartition::all(3);
    let shortcut = use_symmetry && cyclic_invariant(set);
    let todo: Vec<&Bipartition> = if shortcut { vec![&cuts[0]] } else { cuts.iter().collect() };
    let computed: Vec<(Bipartition, MeasuredSubset, Verdict)> = todo
        .par_iter()
        .map(|cut| {
            let measured = MeasuredSubset::across(&set.dims, cut)?;
            let v = is_trivial_opm(set, &measured, tol)?;
            Ok(((*cut).clone(), measured, v))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(3);
    for cut in &cuts {
        let measured = MeasuredSubset::across(&set.dims, cut)?;
        match computed.iter().find(|(c, _, _)| c == cut) {
            Some((_, _, v)) => out.push(CutVerdict { cut: cut.label(), measured: measured.label(), verdict: v.clone(), inherited_from: None }),
            None => out.push(CutVerdict {
                cut: cut.label(),
                measured: measured.label(),
                verdict: computed[0].2.clone(),
                inherited_from: Some(computed[0].0.label()),
            }),
        }
    }
    let overall = out.iter().map(|c| c.verdict.kind()).max().unwrap_or(VerdictKind::Trivial);
    Ok(StrongReport { cuts: out, overall })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{tiles_34, upb_333, upb_444};
    use crate::linalg::c;
    use crate::states::Ket;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn condition_rows_match_direct_evaluation() {
        let u = ndarray::array![c(1.0, 0.5), c(0.0, 0.0), c(-2.0, 1.0)];
        let v = ndarray::array![c(0.3, -1.0), c(1.0, 1.0), c(0.0, 2.0)];
        let p = HermitianParams::from_vec(vec![0.7, -0.2, 1.1, 0.3, -0.4, 0.9, 0.25, -1.3, 0.6]).unwrap();
        let e = p.to_matrix();
        let mut re = vec![0.0; 9];
        let mut im = vec![0.0; 9];
        condition_rows(&u, &v, 3, &mut re, &mut im);
        let direct = linalg::inner(&u, &e.dot(&v)).unwrap() / (linalg::norm(&u) * linalg::norm(&v));
        let got_re: f64 = re.iter().zip(&p.params).map(|(a, b)| a * b).sum();
        let got_im: f64 = im.iter().zip(&p.params).map(|(a, b)| a * b).sum();
        assert!((got_re - direct.re).abs() < 1e-12 && (got_im - direct.im).abs() < 1e-12);
    }

    #[test]
    fn a1_a3_pair_is_active_for_bc() {
        let set = upb_333();
        let bc = MeasuredSubset::parse(&set.dims, "BC").unwrap();
        let pairs = active_pairs(&set, &bc, &tol()).unwrap();
        let idx = |l: &str| set.states.iter().position(|s| s.label == l).unwrap();
        let (a, b) = (idx("A1[i=0,j=1]"), idx("A3[i=0,j=1]"));
        let p = pairs.iter().find(|p| (p.i, p.j) == (a.min(b), a.max(b))).expect("active");
        assert!((p.overlap - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stopper_activity() {
        let set = upb_333();
        let bc = MeasuredSubset::parse(&set.dims, "BC").unwrap();
        let pairs = active_pairs(&set, &bc, &tol()).unwrap();
        let s = set.states.iter().position(|s| s.label == "S").unwrap();
        let ones = Ket::ones(3).unwrap();
        for (k, st) in set.states.iter().enumerate() {
            if k == s {
                continue;
            }
            let expect = ones.inner(&st.factors[0]).unwrap().norm() > 1e-9;
            let found = pairs.iter().any(|p| (p.i == k && p.j == s) || (p.i == s && p.j == k));
            assert_eq!(expect, found, "{}", st.label);
        }
    }

    #[test]
    fn upb333_system_shape_and_identity() {
        let set = upb_333();
        let bc = MeasuredSubset::parse(&set.dims, "BC").unwrap();
        let cs = build_constraints(&set, &bc, &tol()).unwrap();
        assert_eq!(cs.rows.ncols(), 81);
        assert_eq!(cs.rows.nrows(), 2 * cs.provenance.len());
        assert!(cs.identity_residual() <= 1e-10);
        let space = solution_space(&cs, &tol()).unwrap();
        assert_eq!(space.dim, 1);
    }

    #[test]
    fn no_active_pairs_gives_full_space() {
        let mut states = Vec::new();
        for a in 0..2 {
            states.push(ProductState::new(format!("s{a}"), vec![Ket::basis(2, a).unwrap(), Ket::ones(3).unwrap(), Ket::ones(3).unwrap()]).unwrap());
        }
        let set = StateSet::new("split", vec![2, 3, 3], states).unwrap();
        let bc = MeasuredSubset::parse(&set.dims, "BC").unwrap();
        let cs = build_constraints(&set, &bc, &tol()).unwrap();
        assert_eq!(cs.rows.nrows(), 0);
        let space = solution_space(&cs, &tol()).unwrap();
        assert_eq!(space.dim, 81);
        assert!(matches!(Verdict::from_space(space, &tol()), Verdict::Nontrivial { dim: 81, .. }));
    }

    #[test]
    fn tiles34_bob_has_nontrivial_opm() {
        let set = tiles_34();
        let b = MeasuredSubset::parse(&set.dims, "B").unwrap();
        let cs = build_constraints(&set, &b, &tol()).unwrap();
        let space = solution_space(&cs, &tol()).unwrap();
        assert!(space.dim >= 2);
        // |3><3| lies in the span.
        let mut target = HermitianParams { m: 4, params: vec![0.0; 16] };
        target.params[3] = 1.0;
        let t = target.as_array();
        let mut rest = t.clone();
        for bv in &space.basis {
            let b = bv.as_array();
            rest.scaled_add(-b.dot(&t), &b);
        }
        assert!(rest.dot(&rest).sqrt() < 1e-9);
        assert_eq!(is_trivial_opm(&set, &b, &tol()).unwrap().kind(), VerdictKind::Nontrivial);
    }

    #[test]
    fn cyclic_invariance() {
        assert!(cyclic_invariant(&upb_444()));
        assert!(cyclic_invariant(&upb_333()));
        assert!(!cyclic_invariant(&tiles_34()));
        let mut set = upb_333();
        let f = &mut set.states[0].factors;
        f.swap(1, 2);
        assert!(!cyclic_invariant(&set));
    }

    #[test]
    fn computational_basis_is_nontrivial_everywhere() {
        let mut states = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                for cc in 0..2 {
                    let f = vec![Ket::basis(2, a).unwrap(), Ket::basis(2, b).unwrap(), Ket::basis(2, cc).unwrap()];
                    states.push(ProductState::new(format!("{a}{b}{cc}"), f).unwrap());
                }
            }
        }
        let set = StateSet::new("basis", vec![2, 2, 2], states).unwrap();
        let r = strongest_nonlocality(&set, false, &tol()).unwrap();
        assert!(r.cuts.iter().all(|c| c.verdict.kind() == VerdictKind::Nontrivial));
        assert_eq!(r.overall, VerdictKind::Nontrivial);
    }

    #[test]
    fn upb333_strong_with_and_without_symmetry() {
        let set = upb_333();
        let full = strongest_nonlocality(&set, false, &tol()).unwrap();
        assert_eq!(full.overall, VerdictKind::Trivial);
        assert!(full.cuts.iter().all(|c| c.inherited_from.is_none()));
        let short = strongest_nonlocality(&set, true, &tol()).unwrap();
        assert_eq!(short.overall, VerdictKind::Trivial);
        assert_eq!(short.cuts.iter().filter(|c| c.inherited_from.is_some()).count(), 2);
        let labels: Vec<&str> = full.cuts.iter().map(|c| c.measured.as_str()).collect();
        assert_eq!(labels, vec!["BC", "CA", "AB"]);
    }

    #[test]
    fn two_party_sets_are_rejected() {
        assert!(strongest_nonlocality(&tiles_34(), true, &tol()).is_err());
    }

    #[test]
    fn measured_subset_validation() {
        assert!(MeasuredSubset::new(&[3, 3, 3], &[]).is_err());
        assert!(MeasuredSubset::new(&[3, 3, 3], &[0, 1, 2]).is_err());
        assert!(MeasuredSubset::parse(&[3, 3, 3], "B?").is_err());
        assert_eq!(MeasuredSubset::parse(&[3, 4, 5], "CB").unwrap().m, 20);
    }
}
