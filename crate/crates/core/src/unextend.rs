//! Unextendibility via the cover criterion.
//!
//! A product vector orthogonal to every member exists iff the members can be
//! split into one group per party such that each party's group of local rays
//! fails to span its space. It suffices to search over maximal non-spanning
//! ray subsets.

use fixedbitset::FixedBitSet;
use itertools::Itertools;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::linalg::{self, stack_rows, CMatrix, CVector, Complex, Tolerances};
use crate::states::{party_name, Ket, ProductState, StateSet};

/// Largest number of distinct rays per party the search accepts.
pub const RAY_BUDGET: usize = 30;

const RAY_DEDUP_TOL: f64 = 1e-9;
const WITNESS_TOL: f64 = 1e-8;

/// Distinct local rays of one party and which ray each state uses.
#[derive(Clone, Debug)]
pub struct RayTable {
    pub party: usize,
    pub rays: Vec<Ket>,
    pub assignment: Vec<usize>,
}

pub fn distinct_rays(set: &StateSet, party: usize) -> Result<RayTable> {
    if party >= set.parties() {
        return domain(format!("party {party} out of range for {} parties", set.parties()));
    }
    let mut rays: Vec<Ket> = Vec::new();
    let mut assignment = Vec::with_capacity(set.len());
    for s in &set.states {
        let f = &s.factors[party];
        let id = match rays.iter().position(|r| r.is_proportional(f, RAY_DEDUP_TOL)) {
            Some(id) => id,
            None => {
                rays.push(f.clone());
                rays.len() - 1
            }
        };
        assignment.push(id);
    }
    Ok(RayTable { party, rays, assignment })
}

/// A non-spanning ray subset and the states whose factor lies in it.
#[derive(Clone, Debug)]
pub struct NonSpanning {
    pub rays: FixedBitSet,
    pub covered: FixedBitSet,
}

#[derive(Clone, Debug)]
pub struct NonSpanningFamily {
    pub party: usize,
    pub subsets: Vec<NonSpanning>,
}

fn ray_matrix(rays: &[&Ket], d: usize) -> CMatrix {
    let rows: Vec<CVector> = rays.iter().map(|r| r.coeffs().clone()).collect();
    stack_rows(&rows, d)
}

fn covered_by(table: &RayTable, rays: &FixedBitSet) -> FixedBitSet {
    let mut covered = FixedBitSet::with_capacity(table.assignment.len());
    for (s, &r) in table.assignment.iter().enumerate() {
        if rays.contains(r) {
            covered.insert(s);
        }
    }
    covered
}

/// Every maximal subset of the table's rays whose rank is below `local_dim`.
///
/// When the rays span the whole space, each maximal subset is the set of
/// rays lying in some hyperplane spanned by `local_dim - 1` of them, so the
/// search runs over those hyperplanes instead of over all subsets.
pub fn maximal_nonspanning(table: &RayTable, local_dim: usize, tol: &Tolerances) -> Result<NonSpanningFamily> {
    let r = table.rays.len();
    if r > RAY_BUDGET {
        return Err(Error::Resource(format!(
            "party {} has {r} distinct rays, over the budget of {RAY_BUDGET}",
            party_name(table.party)
        )));
    }
    if table.rays.iter().any(|k| k.dim() != local_dim) {
        return domain(format!("rays of party {} do not have dimension {local_dim}", party_name(table.party)));
    }
    let all: Vec<&Ket> = table.rays.iter().collect();
    let make = |rays: FixedBitSet| NonSpanning { covered: covered_by(table, &rays), rays };

    if local_dim == 1 {
        return Ok(NonSpanningFamily { party: table.party, subsets: vec![make(FixedBitSet::with_capacity(r))] });
    }
    let total_rank = if r == 0 { 0 } else { linalg::rank(&ray_matrix(&all, local_dim), tol.rank)? };
    if total_rank < local_dim {
        let mut rays = FixedBitSet::with_capacity(r);
        rays.insert_range(..);
        return Ok(NonSpanningFamily { party: table.party, subsets: vec![make(rays)] });
    }

    let norms: Vec<f64> = table.rays.iter().map(|k| k.norm_sqr().sqrt()).collect();
    let mut closures: Vec<FixedBitSet> = Vec::new();
    for combo in (0..r).combinations(local_dim - 1) {
        if closures.iter().any(|cl| combo.iter().all(|&i| cl.contains(i))) {
            continue;
        }
        let picked: Vec<&Ket> = combo.iter().map(|&i| &table.rays[i]).collect();
        let m = ray_matrix(&picked, local_dim).mapv(|z| z.conj());
        let ns = linalg::nullspace_complex(&m, tol.rank)?;
        if ns.basis.len() != 1 {
            continue;
        }
        let normal = &ns.basis[0];
        let nn = linalg::norm(normal);
        let mut closure = FixedBitSet::with_capacity(r);
        for (i, ray) in table.rays.iter().enumerate() {
            let overlap = linalg::inner(ray.coeffs(), normal)?.norm();
            if overlap <= tol.zero * norms[i] * nn {
                closure.insert(i);
            }
        }
        closures.push(closure);
    }
    Ok(NonSpanningFamily { party: table.party, subsets: closures.into_iter().map(make).collect() })
}

/// A product vector orthogonal to every member of a set.
#[derive(Clone, Debug)]
pub struct ExtensionWitness {
    pub factors: Vec<Ket>,
    /// Largest normalized overlap with a member.
    pub residual: f64,
}

impl ExtensionWitness {
    pub fn to_state(&self, label: &str) -> ProductState {
        ProductState::new(label, self.factors.clone()).expect("witness has one factor per party")
    }
}

fn witness_residual(set: &StateSet, factors: &[Ket]) -> f64 {
    let wn: f64 = factors.iter().map(|k| k.norm_sqr()).product::<f64>().sqrt();
    set.states
        .iter()
        .map(|s| {
            let z = s
                .factors
                .iter()
                .zip(factors)
                .map(|(a, b)| a.inner(b).expect("dims agree"))
                .product::<Complex>();
            z.norm() / (wn * s.norm_sqr().sqrt())
        })
        .fold(0.0, f64::max)
}

struct CoverSearch<'a> {
    families: &'a [Vec<FixedBitSet>],
    order: Vec<usize>,
    n: usize,
    chosen: Vec<Option<usize>>,
}

impl CoverSearch<'_> {
    fn run(&mut self, covered: &FixedBitSet) -> bool {
        let Some(s) = (0..self.n).find(|&i| !covered.contains(i)) else {
            return true;
        };
        let open: Vec<usize> = self.order.iter().copied().filter(|&p| self.chosen[p].is_none()).collect();
        let mut reach = covered.clone();
        for &p in &open {
            for c in &self.families[p] {
                reach.union_with(c);
            }
        }
        if reach.count_ones(..) < self.n {
            return false;
        }
        for &p in &open {
            for (k, c) in self.families[p].iter().enumerate() {
                if !c.contains(s) {
                    continue;
                }
                let mut next = covered.clone();
                next.union_with(c);
                self.chosen[p] = Some(k);
                if self.run(&next) {
                    return true;
                }
                self.chosen[p] = None;
            }
        }
        false
    }
}

fn drop_dominated(family: &NonSpanningFamily) -> Vec<usize> {
    let subs = &family.subsets;
    let mut keep: Vec<usize> = Vec::new();
    for i in 0..subs.len() {
        let dominated = (0..subs.len()).any(|j| {
            j != i
                && subs[i].covered.is_subset(&subs[j].covered)
                && (subs[i].covered != subs[j].covered || j < i)
        });
        if !dominated {
            keep.push(i);
        }
    }
    keep.sort_by_key(|&i| std::cmp::Reverse(subs[i].covered.count_ones(..)));
    keep
}

/// A product vector orthogonal to every member, or `None` if the set is
/// unextendible.
pub fn find_extension(set: &StateSet, tol: &Tolerances) -> Result<Option<ExtensionWitness>> {
    if let Some((i, j, overlap)) = set.first_nonorthogonal_pair(tol.zero) {
        return Err(Error::Precondition(format!(
            "states {} and {} are not orthogonal (normalized overlap {overlap:.3e})",
            set.states[i].label, set.states[j].label
        )));
    }
    let parties = set.parties();
    let tables: Vec<RayTable> = (0..parties).map(|p| distinct_rays(set, p)).collect::<Result<_>>()?;
    let fams: Vec<NonSpanningFamily> = tables
        .iter()
        .map(|t| maximal_nonspanning(t, set.dims[t.party], tol))
        .collect::<Result<_>>()?;
    let kept: Vec<Vec<usize>> = fams.iter().map(drop_dominated).collect();
    let covers: Vec<Vec<FixedBitSet>> = fams
        .iter()
        .zip(&kept)
        .map(|(f, k)| k.iter().map(|&i| f.subsets[i].covered.clone()).collect())
        .collect();

    let mut order: Vec<usize> = (0..parties).collect();
    order.sort_by_key(|&p| covers[p].len());
    let mut search = CoverSearch { families: &covers, order, n: set.len(), chosen: vec![None; parties] };
    if !search.run(&FixedBitSet::with_capacity(set.len())) {
        return Ok(None);
    }

    let mut factors = Vec::with_capacity(parties);
    for p in 0..parties {
        let d = set.dims[p];
        let rays: Vec<&Ket> = match search.chosen[p] {
            Some(k) => fams[p].subsets[kept[p][k]].rays.ones().map(|r| &tables[p].rays[r]).collect(),
            None => Vec::new(),
        };
        let factor = if rays.is_empty() {
            Ket::basis(d, 0)?
        } else {
            let m = ray_matrix(&rays, d).mapv(|z| z.conj());
            let ns = linalg::nullspace_complex(&m, tol.rank)?;
            let v = ns.basis.into_iter().next().ok_or_else(|| {
                Error::Consistency(format!("chosen rays of party {} span the local space", party_name(p)))
            })?;
            Ket::new(v)?
        };
        factors.push(factor);
    }
    let residual = witness_residual(set, &factors);
    if residual > WITNESS_TOL {
        return Err(Error::Consistency(format!("extension witness has residual overlap {residual:.3e}")));
    }
    Ok(Some(ExtensionWitness { factors, residual }))
}

#[derive(Clone, Debug)]
pub enum UpbVerdict {
    Upb,
    Extendible(ExtensionWitness),
    Invalid(String),
}

impl UpbVerdict {
    pub fn is_upb(&self) -> bool {
        matches!(self, UpbVerdict::Upb)
    }

    pub fn summary(&self) -> UpbSummary {
        match self {
            UpbVerdict::Upb => UpbSummary { verdict: "UPB".into(), detail: None },
            UpbVerdict::Extendible(w) => UpbSummary {
                verdict: "EXTENDIBLE".into(),
                detail: Some(format!("witness residual {:.3e}", w.residual)),
            },
            UpbVerdict::Invalid(msg) => UpbSummary { verdict: "INVALID".into(), detail: Some(msg.clone()) },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UpbSummary {
    pub verdict: String,
    pub detail: Option<String>,
}

pub fn is_upb(set: &StateSet, tol: &Tolerances) -> UpbVerdict {
    match find_extension(set, tol) {
        Ok(None) => UpbVerdict::Upb,
        Ok(Some(w)) => UpbVerdict::Extendible(w),
        Err(e) => UpbVerdict::Invalid(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{tiles_34, upb_333};
    use crate::states::{eta, xi};

    #[test]
    fn upb333_party_b_has_seven_rays() {
        let t = distinct_rays(&upb_333(), 1).unwrap();
        assert_eq!(t.rays.len(), 7);
        let expected = [
            Ket::basis(3, 0).unwrap(),
            eta(3, 0, 0).unwrap(),
            eta(3, 0, 1).unwrap(),
            xi(3, 0, 0).unwrap(),
            xi(3, 0, 1).unwrap(),
            Ket::basis(3, 2).unwrap(),
            Ket::ones(3).unwrap(),
        ];
        for e in &expected {
            assert_eq!(t.rays.iter().filter(|r| r.is_proportional(e, 1e-9)).count(), 1);
        }
    }

    #[test]
    fn tiles34_party_b_rays() {
        let t = distinct_rays(&tiles_34(), 1).unwrap();
        let three = Ket::basis(4, 3).unwrap();
        let psi5 = Ket::from_real(&[1.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(t.rays.iter().any(|r| r.is_proportional(&three, 1e-9)));
        assert!(t.rays.iter().any(|r| r.is_proportional(&psi5, 1e-9)));
        assert!(t.rays.len() <= 8);
    }

    #[test]
    fn upb333_party_b_contains_low_window() {
        let tol = Tolerances::default();
        let t = distinct_rays(&upb_333(), 1).unwrap();
        let fam = maximal_nonspanning(&t, 3, &tol).unwrap();
        let want: Vec<usize> = [Ket::basis(3, 0).unwrap(), eta(3, 0, 0).unwrap(), eta(3, 0, 1).unwrap()]
            .iter()
            .map(|e| t.rays.iter().position(|r| r.is_proportional(e, 1e-9)).unwrap())
            .collect();
        assert!(fam.subsets.iter().any(|s| s.rays.ones().collect::<Vec<_>>() == {
            let mut w = want.clone();
            w.sort();
            w
        }));
    }

    #[test]
    fn nonspanning_subsets_are_maximal() {
        let tol = Tolerances::default();
        let t = distinct_rays(&upb_333(), 1).unwrap();
        let fam = maximal_nonspanning(&t, 3, &tol).unwrap();
        for s in &fam.subsets {
            let rays: Vec<&Ket> = s.rays.ones().map(|i| &t.rays[i]).collect();
            assert!(linalg::rank(&ray_matrix(&rays, 3), 1e-9).unwrap() < 3);
            for extra in (0..t.rays.len()).filter(|i| !s.rays.contains(*i)) {
                let mut more = rays.clone();
                more.push(&t.rays[extra]);
                assert_eq!(linalg::rank(&ray_matrix(&more, 3), 1e-9).unwrap(), 3);
            }
        }
    }

    #[test]
    fn degenerate_tables_give_single_subset() {
        let tol = Tolerances::default();
        let set = crate::families::upb_333();
        let mut t = distinct_rays(&set, 0).unwrap();
        t.rays.retain(|r| r.coeffs()[2] == Complex::default());
        t.assignment.clear();
        let fam = maximal_nonspanning(&t, 3, &tol).unwrap();
        assert_eq!(fam.subsets.len(), 1);
        assert_eq!(fam.subsets[0].rays.count_ones(..), t.rays.len());
    }

    #[test]
    fn ray_budget_is_enforced() {
        let rays: Vec<Ket> = (0..31).map(|i| Ket::from_real(&[1.0, i as f64]).unwrap()).collect();
        let t = RayTable { party: 2, rays, assignment: vec![] };
        match maximal_nonspanning(&t, 2, &Tolerances::default()) {
            Err(Error::Resource(msg)) => assert!(msg.contains("party C")),
            other => panic!("expected a resource error, got {other:?}"),
        }
    }

    #[test]
    fn small_families() {
        let tol = Tolerances::default();
        assert!(is_upb(&upb_333(), &tol).is_upb());
        assert!(is_upb(&tiles_34(), &tol).is_upb());
        match is_upb(&upb_333().without("S"), &tol) {
            UpbVerdict::Extendible(w) => assert!(w.residual <= 1e-8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_orthogonal_input_is_rejected() {
        let mut set = upb_333();
        set.states[0].factors[0] = Ket::ones(3).unwrap();
        assert!(matches!(find_extension(&set, &Tolerances::default()), Err(Error::Precondition(_))));
        assert!(matches!(is_upb(&set, &Tolerances::default()), UpbVerdict::Invalid(_)));
    }
}
