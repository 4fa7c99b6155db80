//! Deduction rules over the zero pattern of an orthogonality-preserving
//! measurement operator, with replayable certificates.
//!
//! Rules:
//! - `R1` block zeros: spanning condition sets on disjoint blocks `S`, `T`
//!   force the `S x T` block of `E` to vanish.
//! - `R2` block trivial: an orthogonal basis of `S` with pairwise
//!   conditions and a pivot row that vanishes on the rest of `S` forces
//!   `E_S` to be a multiple of the identity.
//! - `R3` restrict: drops the rows (and columns) of a condition that can
//!   only meet known zeros.
//! - `R4` merge: intersecting trivial blocks share one constant.
//! - `R5` residual solve: the remaining unknowns are handed to a numeric
//!   nullspace computation.
//!
//! The engine is sound but not complete; whatever the rules cannot reach is
//! settled by `R5`.

use std::collections::HashMap;
use std::fmt;

use ndarray::Array2;
use petgraph::unionfind::UnionFind;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::families::B1_INDEX_READING;
use crate::linalg::{
    self, c, offdiag_param, orthonormalize, random_unitary, root_of_unity, stack_rows, CMatrix, CVector,
    Complex, HermitianParams, SolutionSpace, Tolerances,
};
use crate::opm::{self, condition_rows, MeasuredSubset};
use crate::states::{eta, xi, StateSet};
use crate::unextend::distinct_rays;

const SOUNDNESS_TOL: f64 = 1e-8;

/// What is known about the entries of `E` so far.
#[derive(Clone, Debug)]
pub struct Knowledge {
    pub m: usize,
    zero: Vec<bool>,
    classes: UnionFind<usize>,
    pub resolved_blocks: Vec<Vec<usize>>,
}

impl Knowledge {
    pub fn new(m: usize) -> Self {
        Knowledge { m, zero: vec![false; m * m], classes: UnionFind::new(m), resolved_blocks: Vec::new() }
    }

    /// Off-diagonal entry known to vanish. Diagonal entries never are.
    pub fn is_zero(&self, r: usize, t: usize) -> bool {
        self.zero[r * self.m + t]
    }

    pub fn same_class(&self, a: usize, b: usize) -> bool {
        self.classes.equiv(a, b)
    }

    pub fn class_of(&self, a: usize) -> usize {
        self.classes.find(a)
    }

    pub fn zero_count(&self) -> usize {
        self.zero.iter().filter(|&&z| z).count() / 2
    }

    /// Row-major `m x m` pattern; `true` marks a known zero.
    pub fn zero_pattern(&self) -> Vec<bool> {
        self.zero.clone()
    }

    /// Canonical labels of the diagonal classes (smallest member first).
    pub fn class_labels(&self) -> Vec<usize> {
        (0..self.m).map(|i| (0..=i).find(|&j| self.classes.equiv(i, j)).unwrap_or(i)).collect()
    }

    fn mark_zero(&mut self, r: usize, t: usize) -> bool {
        if r == t || self.zero[r * self.m + t] {
            return false;
        }
        self.zero[r * self.m + t] = true;
        self.zero[t * self.m + r] = true;
        true
    }

    fn merge(&mut self, a: usize, b: usize) -> bool {
        self.classes.union(a, b)
    }

    fn add_block(&mut self, s: &[usize]) {
        let mut s = s.to_vec();
        s.sort_unstable();
        if !self.resolved_blocks.contains(&s) {
            self.resolved_blocks.push(s);
        }
    }

    /// Same zeros, classes and resolved blocks.
    pub fn same_pattern(&self, other: &Knowledge) -> bool {
        self.m == other.m
            && self.zero == other.zero
            && self.class_labels() == other.class_labels()
            && self.resolved_blocks == other.resolved_blocks
    }
}

/// Pattern change caused by one rule application.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delta {
    pub zeros: usize,
    pub merges: usize,
}

fn disjoint(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| !b.contains(x))
}

/// Marks `S x T` (and `T x S`) zero when the conditions `<x|E|y> = 0`, with
/// `x` supported in `S` and `y` in `T`, leave no freedom in the unknown
/// entries of that block. Returns `None` when the rule does not apply.
pub fn r1_block_zeros(
    k: &mut Knowledge,
    s: &[usize],
    t: &[usize],
    conditions: &[(CVector, CVector)],
    tol: &Tolerances,
) -> Result<Option<Delta>> {
    if s.is_empty() || t.is_empty() || !disjoint(s, t) || s.iter().chain(t).any(|&i| i >= k.m) {
        return Ok(None);
    }
    let inside = |v: &CVector, block: &[usize]| linalg::support(v).iter().all(|i| block.contains(i));
    if conditions.iter().any(|(x, y)| x.len() != k.m || y.len() != k.m || !inside(x, s) || !inside(y, t)) {
        return Ok(None);
    }
    let unknown: Vec<(usize, usize)> =
        s.iter().flat_map(|&a| t.iter().map(move |&b| (a, b))).filter(|&(a, b)| !k.is_zero(a, b)).collect();
    if unknown.is_empty() {
        return Ok(None);
    }
    if conditions.len() < unknown.len() {
        return Ok(None);
    }
    let rows: Vec<CVector> = conditions
        .iter()
        .map(|(x, y)| unknown.iter().map(|&(a, b)| x[a].conj() * y[b]).collect())
        .collect();
    let f = stack_rows(&rows, unknown.len());
    if linalg::rank(&f, tol.rank)? < unknown.len() {
        return Ok(None);
    }
    let zeros = unknown.iter().filter(|&&(a, b)| k.mark_zero(a, b)).count();
    Ok(Some(Delta { zeros, merges: 0 }))
}

/// Marks `E_S` proportional to the identity when `basis` is an orthogonal
/// spanning set of `span(S)` with every pairwise condition available, and the
/// `pivot` row is already known to vanish on `S \ {pivot}` while overlapping
/// every basis vector.
pub fn r2_block_trivial(
    k: &mut Knowledge,
    s: &[usize],
    basis: &[CVector],
    pivot: usize,
    conditions: &[(CVector, CVector)],
    tol: &Tolerances,
) -> Result<Option<Delta>> {
    if s.is_empty() || !s.contains(&pivot) || basis.len() != s.len() || s.iter().any(|&i| i >= k.m) {
        return Ok(None);
    }
    if basis.iter().any(|v| v.len() != k.m || linalg::support(v).iter().any(|i| !s.contains(i))) {
        return Ok(None);
    }
    let norms: Vec<f64> = basis.iter().map(linalg::norm).collect();
    for i in 0..basis.len() {
        for j in (i + 1)..basis.len() {
            if linalg::inner(&basis[i], &basis[j])?.norm() > tol.zero * norms[i] * norms[j] {
                return Ok(None);
            }
            let has = |a: &CVector, b: &CVector| {
                conditions.iter().any(|(x, y)| linalg::proportional(x, a, tol.zero) && linalg::proportional(y, b, tol.zero))
            };
            if !has(&basis[i], &basis[j]) && !has(&basis[j], &basis[i]) {
                return Ok(None);
            }
        }
    }
    if s.iter().any(|&o| o != pivot && !k.is_zero(pivot, o)) {
        return Ok(None);
    }
    if basis.iter().zip(&norms).any(|(v, n)| v[pivot].norm() <= tol.zero * n) {
        return Ok(None);
    }
    let mut delta = Delta::default();
    for (a_i, &a) in s.iter().enumerate() {
        for &b in &s[a_i + 1..] {
            delta.zeros += k.mark_zero(a, b) as usize;
            delta.merges += k.merge(a, b) as usize;
        }
    }
    k.add_block(s);
    Ok(Some(delta))
}

/// Restricts a condition `<x|E|y> = 0` to the rows of `x` that can still
/// meet an unknown entry in the columns of `y`, then the columns of `y`
/// against the surviving rows.
pub fn r3_restrict(k: &Knowledge, x: &CVector, y: &CVector) -> (CVector, CVector) {
    let sy = linalg::support(y);
    let mut xr = x.clone();
    for r in linalg::support(x) {
        if sy.iter().all(|&t| k.is_zero(r, t)) {
            xr[r] = Complex::default();
        }
    }
    let sx = linalg::support(&xr);
    let mut yr = y.clone();
    for t in sy {
        if sx.iter().all(|&r| k.is_zero(r, t)) {
            yr[t] = Complex::default();
        }
    }
    (xr, yr)
}

/// Merges two intersecting trivial blocks into one.
pub fn r4_merge(k: &mut Knowledge, s1: &[usize], s2: &[usize]) -> Option<Delta> {
    let i1 = k.resolved_blocks.iter().position(|b| b == &sorted(s1))?;
    let i2 = k.resolved_blocks.iter().position(|b| b == &sorted(s2))?;
    if i1 == i2 || disjoint(s1, s2) {
        return None;
    }
    let merges = k.merge(s1[0], s2[0]) as usize;
    let mut union: Vec<usize> = s1.iter().chain(s2).copied().collect();
    union.sort_unstable();
    union.dedup();
    let (hi, lo) = (i1.max(i2), i1.min(i2));
    k.resolved_blocks.remove(hi);
    k.resolved_blocks.remove(lo);
    k.add_block(&union);
    Some(Delta { zeros: 0, merges })
}

fn sorted(s: &[usize]) -> Vec<usize> {
    let mut v = s.to_vec();
    v.sort_unstable();
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Step {
    pub rule: Rule,
    pub states: Vec<String>,
    pub s: Vec<usize>,
    /// Second index set: `T` for R1/R3, the other block for R4.
    pub t: Vec<usize>,
    /// R2 pivot index.
    pub pivot: Option<usize>,
    /// Free-form detail: basis size for R2, dimension and gap for R5.
    pub detail: Option<String>,
    pub delta: Delta,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub set: String,
    pub measured: String,
    pub measured_dims: Vec<usize>,
    pub m: usize,
    pub notes: Vec<String>,
    pub steps: Vec<Step>,
    /// Index of the first step after the initial R1/R3 fixed point.
    pub first_phase_end: usize,
    pub residual_dim: usize,
    #[serde(with = "crate::linalg::serde_gap")]
    pub residual_gap: f64,
}

fn index_label(i: usize, dims: &[usize]) -> String {
    if dims.iter().all(|&d| d <= 10) {
        linalg::unflatten(i, dims).iter().map(|d| d.to_string()).collect()
    } else {
        i.to_string()
    }
}

impl Certificate {
    fn indices(&self, s: &[usize]) -> String {
        let parts: Vec<String> = s.iter().map(|&i| index_label(i, &self.measured_dims)).collect();
        format!("{{{}}}", parts.join(","))
    }

    /// One line per step, preceded by `#` header lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# set: {}\n# measured: {} (m = {})\n", self.set, self.measured, self.m));
        for n in &self.notes {
            out.push_str(&format!("# {n}\n"));
        }
        for (i, st) in self.steps.iter().enumerate() {
            if i == self.first_phase_end {
                out.push_str("# end of initial R1/R3 phase\n");
            }
            let second = match st.rule {
                Rule::R2 => format!(
                    "pivot {}; {}",
                    st.pivot.map(|p| index_label(p, &self.measured_dims)).unwrap_or_default(),
                    st.detail.clone().unwrap_or_default()
                ),
                Rule::R5 => st.detail.clone().unwrap_or_default(),
                _ => self.indices(&st.t),
            };
            out.push_str(&format!(
                "{} | states: {} | S: {} | T/basis: {} | delta: {} zeros, {} merges\n",
                st.rule,
                if st.states.is_empty() { "-".to_string() } else { st.states.join(",") },
                self.indices(&st.s),
                second,
                st.delta.zeros,
                st.delta.merges
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Re-applies every step to an empty pattern.
    pub fn replay(&self) -> Knowledge {
        let mut k = Knowledge::new(self.m);
        for st in &self.steps {
            match st.rule {
                Rule::R1 => {
                    for &a in &st.s {
                        for &b in &st.t {
                            k.mark_zero(a, b);
                        }
                    }
                }
                Rule::R2 => {
                    for (i, &a) in st.s.iter().enumerate() {
                        for &b in &st.s[i + 1..] {
                            k.mark_zero(a, b);
                            k.merge(a, b);
                        }
                    }
                    k.add_block(&st.s);
                }
                Rule::R4 => {
                    r4_merge(&mut k, &st.s, &st.t);
                }
                Rule::R3 | Rule::R5 => {}
            }
        }
        k
    }
}

/// Output of [`certify`].
#[derive(Clone, Debug)]
pub struct CertifyOutcome {
    pub certificate: Certificate,
    /// Pattern at the end of the initial R1/R3 phase.
    pub first_phase: Knowledge,
    pub knowledge: Knowledge,
    pub residual: SolutionSpace,
}

struct Condition {
    x: CVector,
    y: CVector,
    labels: (String, String),
}

struct Engine<'a> {
    k: Knowledge,
    conditions: Vec<Condition>,
    steps: Vec<Step>,
    tol: &'a Tolerances,
}

/// States grouped by unmeasured rays, split into support-connected pieces.
struct Component {
    group: usize,
    labels: Vec<String>,
    vectors: Vec<CVector>,
    support: Vec<usize>,
}

fn components(set: &StateSet, measured: &MeasuredSubset, vectors: &[CVector], tol: &Tolerances) -> Result<(Vec<Component>, Vec<usize>)> {
    let rest: Vec<usize> = (0..set.parties()).filter(|p| !measured.parties.contains(p)).collect();
    let tables = rest.iter().map(|&p| distinct_rays(set, p)).collect::<Result<Vec<_>>>()?;
    let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    let mut order: Vec<Vec<usize>> = Vec::new();
    for s in 0..set.len() {
        let key: Vec<usize> = tables.iter().map(|t| t.assignment[s]).collect();
        groups.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            Vec::new()
        });
        groups.get_mut(&key).expect("inserted").push(s);
    }
    let mut out = Vec::new();
    let mut first_member = Vec::new();
    for (g, key) in order.iter().enumerate() {
        let members = &groups[key];
        first_member.push(members[0]);
        let supports: Vec<Vec<usize>> = members.iter().map(|&s| linalg::support(&vectors[s])).collect();
        let mut uf = UnionFind::<usize>::new(members.len());
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                if !disjoint(&supports[i], &supports[j]) {
                    uf.union(i, j);
                }
            }
        }
        let labels = uf.into_labeling();
        let mut roots: Vec<usize> = labels.clone();
        roots.sort_unstable();
        roots.dedup();
        for root in roots {
            let idx: Vec<usize> = (0..members.len()).filter(|&i| labels[i] == root).collect();
            let mut support: Vec<usize> = idx.iter().flat_map(|&i| supports[i].clone()).collect();
            support.sort_unstable();
            support.dedup();
            let vecs: Vec<CVector> = idx.iter().map(|&i| vectors[members[i]].clone()).collect();
            if linalg::rank(&stack_rows(&vecs, measured.m), tol.rank)? != support.len() {
                continue;
            }
            out.push(Component {
                group: g,
                labels: idx.iter().map(|&i| set.states[members[i]].label.clone()).collect(),
                vectors: vecs,
                support,
            });
        }
    }
    Ok((out, first_member))
}

impl Engine<'_> {
    fn reduced(&self) -> Vec<(usize, CVector, CVector)> {
        self.conditions
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let (x, y) = r3_restrict(&self.k, &c.x, &c.y);
                let live = !linalg::support(&x).is_empty() && !linalg::support(&y).is_empty();
                live.then_some((i, x, y))
            })
            .collect()
    }

    fn push(&mut self, rule: Rule, states: Vec<String>, s: Vec<usize>, t: Vec<usize>, delta: Delta) {
        self.steps.push(Step { rule, states, s, t, pivot: None, detail: None, delta });
    }

    /// R1 on pairs of spanning components whose unmeasured rays overlap.
    fn component_pass(&mut self, comps: &[Component], active: &dyn Fn(usize, usize) -> bool) -> Result<bool> {
        let mut changed = false;
        for a in 0..comps.len() {
            for b in (a + 1)..comps.len() {
                let (p, q) = (&comps[a], &comps[b]);
                if !disjoint(&p.support, &q.support) || !active(p.group, q.group) {
                    continue;
                }
                let conds: Vec<(CVector, CVector)> = p
                    .vectors
                    .iter()
                    .flat_map(|x| q.vectors.iter().map(move |y| (x.clone(), y.clone())))
                    .collect();
                if let Some(delta) = r1_block_zeros(&mut self.k, &p.support, &q.support, &conds, self.tol)? {
                    if delta.zeros > 0 {
                        let states = p.labels.iter().chain(&q.labels).cloned().collect();
                        self.push(Rule::R1, states, p.support.clone(), q.support.clone(), delta);
                        changed = true;
                    }
                }
            }
        }
        Ok(changed)
    }

    /// R1 on blocks exposed by restricted conditions.
    fn restricted_pass(&mut self) -> Result<bool> {
        let reduced = self.reduced();
        let mut by_support: HashMap<(Vec<usize>, Vec<usize>), Vec<usize>> = HashMap::new();
        let mut keys = Vec::new();
        for (n, (_, x, y)) in reduced.iter().enumerate() {
            let key = (linalg::support(x), linalg::support(y));
            by_support.entry(key.clone()).or_insert_with(|| {
                keys.push(key.clone());
                Vec::new()
            });
            by_support.get_mut(&key).expect("inserted").push(n);
        }
        let mut changed = false;
        for (s, t) in &keys {
            if !disjoint(s, t) || s.iter().all(|&a| t.iter().all(|&b| self.k.is_zero(a, b))) {
                continue;
            }
            let mut used = Vec::new();
            let mut conds = Vec::new();
            for ((cs, ct), members) in &by_support {
                let fwd = cs.iter().all(|i| s.contains(i)) && ct.iter().all(|i| t.contains(i));
                let back = cs.iter().all(|i| t.contains(i)) && ct.iter().all(|i| s.contains(i));
                for &n in members {
                    let (_, x, y) = &reduced[n];
                    if fwd {
                        conds.push((x.clone(), y.clone()));
                    } else if back {
                        conds.push((y.mapv(|z| z), x.clone()));
                    } else {
                        continue;
                    }
                    used.push(reduced[n].0);
                }
            }
            if let Some(delta) = r1_block_zeros(&mut self.k, s, t, &conds, self.tol)? {
                if delta.zeros > 0 {
                    let mut states: Vec<String> = Vec::new();
                    for &ci in &used {
                        let c = &self.conditions[ci];
                        for l in [&c.labels.0, &c.labels.1] {
                            if !states.contains(l) {
                                states.push(l.clone());
                            }
                        }
                    }
                    self.push(Rule::R3, states.clone(), s.clone(), t.clone(), Delta::default());
                    self.push(Rule::R1, states, s.clone(), t.clone(), delta);
                    changed = true;
                }
            }
        }
        Ok(changed)
    }

    fn trivial_pass(&mut self) -> Result<bool> {
        let reduced = self.reduced();
        let mut candidates: Vec<Vec<usize>> = Vec::new();
        for (_, x, y) in &reduced {
            for v in [x, y] {
                let s = linalg::support(v);
                if s.len() >= 2 && !candidates.contains(&s) && !self.k.resolved_blocks.iter().any(|b| s.iter().all(|i| b.contains(i))) {
                    candidates.push(s);
                }
            }
        }
        let mut changed = false;
        for s in candidates {
            let inside = |v: &CVector| linalg::support(v).iter().all(|i| s.contains(i));
            let conds: Vec<(CVector, CVector)> = reduced
                .iter()
                .filter(|(_, x, y)| inside(x) && inside(y))
                .map(|(_, x, y)| (x.clone(), y.clone()))
                .collect();
            let mut pool: Vec<CVector> = Vec::new();
            for (x, y) in &conds {
                for v in [x, y] {
                    if !pool.iter().any(|p| linalg::proportional(p, v, self.tol.zero)) {
                        pool.push(v.clone());
                    }
                }
            }
            let Some(basis) = self.find_basis(&pool, &conds, s.len())? else { continue };
            let Some(&pivot) = s.iter().find(|&&t| {
                s.iter().all(|&o| o == t || self.k.is_zero(t, o))
                    && basis.iter().all(|v| v[t].norm() > self.tol.zero * linalg::norm(v))
            }) else {
                continue;
            };
            if let Some(delta) = r2_block_trivial(&mut self.k, &s, &basis, pivot, &conds, self.tol)? {
                self.steps.push(Step {
                    rule: Rule::R2,
                    states: Vec::new(),
                    s: s.clone(),
                    t: Vec::new(),
                    pivot: Some(pivot),
                    detail: Some(format!("{} basis vectors", basis.len())),
                    delta,
                });
                changed = true;
            }
        }
        Ok(changed)
    }

    /// Greedy search for `size` mutually orthogonal pool vectors whose
    /// pairwise conditions are all present.
    fn find_basis(&self, pool: &[CVector], conds: &[(CVector, CVector)], size: usize) -> Result<Option<Vec<CVector>>> {
        if pool.len() < size {
            return Ok(None);
        }
        let tol = self.tol.zero;
        let linked = |a: &CVector, b: &CVector| {
            conds.iter().any(|(x, y)| {
                (linalg::proportional(x, a, tol) && linalg::proportional(y, b, tol))
                    || (linalg::proportional(x, b, tol) && linalg::proportional(y, a, tol))
            })
        };
        let orth = |a: &CVector, b: &CVector| {
            linalg::inner(a, b).map(|z| z.norm() <= tol * linalg::norm(a) * linalg::norm(b)).unwrap_or(false)
        };
        for start in 0..pool.len() {
            let mut chosen: Vec<&CVector> = vec![&pool[start]];
            for v in pool.iter().skip(start + 1).chain(pool.iter().take(start)) {
                if chosen.len() == size {
                    break;
                }
                if chosen.iter().all(|c| orth(c, v) && linked(c, v)) {
                    chosen.push(v);
                }
            }
            if chosen.len() == size {
                return Ok(Some(chosen.into_iter().cloned().collect()));
            }
        }
        Ok(None)
    }

    fn merge_pass(&mut self) -> bool {
        let mut changed = false;
        loop {
            let blocks = self.k.resolved_blocks.clone();
            let pair = (0..blocks.len())
                .flat_map(|i| ((i + 1)..blocks.len()).map(move |j| (i, j)))
                .find(|&(i, j)| !disjoint(&blocks[i], &blocks[j]));
            let Some((i, j)) = pair else { break };
            if let Some(delta) = r4_merge(&mut self.k, &blocks[i], &blocks[j]) {
                self.push(Rule::R4, Vec::new(), blocks[i].clone(), blocks[j].clone(), delta);
                changed = true;
            }
        }
        changed
    }
}

/// Expansion from the unknown parameters of `k` to full Hermitian parameters.
fn expansion(k: &Knowledge) -> Array2<f64> {
    let m = k.m;
    let labels = k.class_labels();
    let reps: Vec<usize> = {
        let mut r = labels.clone();
        r.sort_unstable();
        r.dedup();
        r
    };
    let mut cols = reps.len();
    let mut off: Vec<(usize, usize)> = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if !k.is_zero(i, j) {
                off.push((i, j));
                cols += 2;
            }
        }
    }
    let mut p = Array2::<f64>::zeros((m * m, cols));
    for i in 0..m {
        let col = reps.iter().position(|&r| r == labels[i]).expect("label is a representative");
        p[[i, col]] = 1.0;
    }
    for (n, &(i, j)) in off.iter().enumerate() {
        let x = offdiag_param(m, i, j);
        p[[x, reps.len() + 2 * n]] = 1.0;
        p[[x + 1, reps.len() + 2 * n + 1]] = 1.0;
    }
    p
}

/// Runs the rules to a fixed point on the conditions of `set` for the given
/// measured parties, then solves the rest numerically.
pub fn certify(set: &StateSet, measured: &MeasuredSubset, tol: &Tolerances) -> Result<CertifyOutcome> {
    if set.parties() != 3 {
        return domain(format!("certificates are produced for 3-party sets, got {}", set.parties()));
    }
    let cs = opm::build_constraints(set, measured, tol)?;
    let pairs = opm::active_pairs(set, measured, tol)?;
    let m = measured.m;
    let vectors: Vec<CVector> = set
        .states
        .iter()
        .map(|s| linalg::kron(&measured.parties.iter().map(|&p| s.factors[p].coeffs().clone()).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let conditions = pairs
        .iter()
        .map(|p| Condition {
            x: vectors[p.i].clone(),
            y: vectors[p.j].clone(),
            labels: (set.states[p.i].label.clone(), set.states[p.j].label.clone()),
        })
        .collect();

    let (comps, first_member) = components(set, measured, &vectors, tol)?;
    let rest: Vec<usize> = (0..set.parties()).filter(|p| !measured.parties.contains(p)).collect();
    let active = |g1: usize, g2: usize| -> bool {
        if g1 == g2 {
            return true;
        }
        let (a, b) = (&set.states[first_member[g1]], &set.states[first_member[g2]]);
        rest.iter().all(|&p| {
            let (x, y) = (&a.factors[p], &b.factors[p]);
            x.inner(y).map(|z| z.norm() > tol.zero * (x.norm_sqr() * y.norm_sqr()).sqrt()).unwrap_or(false)
        })
    };

    let mut engine = Engine { k: Knowledge::new(m), conditions, steps: Vec::new(), tol };
    let mut first_phase: Option<(Knowledge, usize)> = None;
    loop {
        let mut round = false;
        loop {
            let a = engine.component_pass(&comps, &active)?;
            let b = engine.restricted_pass()?;
            round |= a || b;
            if !(a || b) {
                break;
            }
        }
        if first_phase.is_none() {
            first_phase = Some((engine.k.clone(), engine.steps.len()));
        }
        let c = engine.trivial_pass()?;
        let d = engine.merge_pass();
        if !(c || d) {
            break;
        }
        let _ = round;
    }
    let (first_phase, first_phase_end) = first_phase.expect("loop runs at least once");

    // R5: numeric solve over the parameters the rules left open.
    let p = expansion(&engine.k);
    let reduced = cs.rows.dot(&p);
    let ns = linalg::nullspace_real(&reduced, tol.rank)?;
    let full: Vec<ndarray::Array1<f64>> = ns.basis.iter().map(|v| p.dot(v)).collect();
    let basis: Vec<HermitianParams> =
        orthonormalize(&full).into_iter().map(|v| HermitianParams { m, params: v.to_vec() }).collect();
    let residual = SolutionSpace { dim: basis.len(), basis, gap_ratio: ns.gap_ratio };
    engine.steps.push(Step {
        rule: Rule::R5,
        states: Vec::new(),
        s: Vec::new(),
        t: Vec::new(),
        pivot: None,
        detail: Some(format!(
            "{} open parameters, residual dim {}, gap {:.3e}",
            p.ncols(),
            residual.dim,
            residual.gap_ratio
        )),
        delta: Delta::default(),
    });

    check_soundness(&engine.k, &opm::solution_space(&cs, tol)?)?;

    let measured_dims: Vec<usize> = measured.parties.iter().map(|&q| set.dims[q]).collect();
    let certificate = Certificate {
        set: set.name.clone(),
        measured: measured.label(),
        measured_dims,
        m,
        notes: vec![
            "indices are measured-party digits, last party fastest".to_string(),
            B1_INDEX_READING.to_string(),
        ],
        steps: engine.steps,
        first_phase_end,
        residual_dim: residual.dim,
        residual_gap: residual.gap_ratio,
    };
    Ok(CertifyOutcome { certificate, first_phase, knowledge: engine.k, residual })
}

/// Every derived zero and equality must hold in every numeric solution.
pub fn check_soundness(k: &Knowledge, space: &SolutionSpace) -> Result<()> {
    for b in &space.basis {
        let e = b.to_matrix();
        for i in 0..k.m {
            for j in 0..k.m {
                if k.is_zero(i, j) && e[[i, j]].norm() > SOUNDNESS_TOL {
                    return Err(Error::Consistency(format!(
                        "entry ({i},{j}) was derived zero but is {:.3e} in a numeric solution",
                        e[[i, j]].norm()
                    )));
                }
            }
            let rep = k.class_of(i);
            if (e[[i, i]] - e[[rep, rep]]).norm() > SOUNDNESS_TOL {
                return Err(Error::Consistency(format!("diagonal entries {i} and {rep} were merged but differ")));
            }
        }
    }
    Ok(())
}

/// Outcome of a randomized lemma check.
#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub trials: usize,
    pub violations: usize,
    pub max_deviation: f64,
}

fn random_solution(rows: &[Vec<f64>], n: usize, rng: &mut ChaCha8Rng) -> Result<CMatrix> {
    let mat = stack_rows(&rows.iter().map(|r| ndarray::Array1::from(r.clone())).collect::<Vec<_>>(), n * n);
    let ns = linalg::nullspace_real(&mat, 1e-9)?;
    let mut params = ndarray::Array1::<f64>::zeros(n * n);
    for b in &ns.basis {
        params.scaled_add(rng.sample::<f64, _>(StandardNormal), b);
    }
    let norm = params.dot(&params).sqrt();
    if norm > 0.0 {
        params /= norm;
    }
    Ok(HermitianParams { m: n, params: params.to_vec() }.to_matrix())
}

fn condition(u: &CVector, v: &CVector, n: usize, rows: &mut Vec<Vec<f64>>) {
    let mut re = vec![0.0; n * n];
    let mut im = vec![0.0; n * n];
    condition_rows(u, v, n, &mut re, &mut im);
    rows.push(re);
    rows.push(im);
}

fn embed(column: ndarray::ArrayView1<Complex>, block: &[usize], n: usize) -> CVector {
    let mut v = CVector::zeros(n);
    for (k, &i) in block.iter().enumerate() {
        v[i] = column[k];
    }
    v
}

/// Randomized check of the block-zeros lemma: random disjoint `S`, `T`,
/// random orthonormal spanning sets, a random Hermitian `E` obeying all
/// cross conditions; the `S x T` block must vanish.
pub fn lemma1_oracle(trials: usize, n: usize, seed: u64) -> Result<OracleReport> {
    if !(2..=12).contains(&n) {
        return domain(format!("lemma oracles run for 2 <= n <= 12, got {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport { trials, violations: 0, max_deviation: 0.0 };
    for _ in 0..trials {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let s_len = rng.random_range(1..n);
        let t_len = rng.random_range(1..=n - s_len);
        let (s, t) = (&idx[..s_len], &idx[s_len..s_len + t_len]);
        let us = random_unitary(s_len, &mut rng)?;
        let ut = random_unitary(t_len, &mut rng)?;
        let psi: Vec<CVector> = us.columns().into_iter().map(|col| embed(col, s, n)).collect();
        let phi: Vec<CVector> = ut.columns().into_iter().map(|col| embed(col, t, n)).collect();
        let mut rows = Vec::new();
        for p in &psi {
            for q in &phi {
                condition(p, q, n, &mut rows);
            }
        }
        let e = random_solution(&rows, n, &mut rng)?;
        let dev = s
            .iter()
            .flat_map(|&a| t.iter().map(move |&b| (a, b)))
            .map(|(a, b)| e[[a, b]].norm().max(e[[b, a]].norm()))
            .fold(0.0, f64::max);
        report.max_deviation = report.max_deviation.max(dev);
        if dev > 1e-9 {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Smallest `|<u_t|psi_j>|` over the basis, for a normalized basis.
fn min_pivot_overlap(basis: &[CVector], pivot: usize) -> f64 {
    basis.iter().map(|v| v[pivot].norm() / linalg::norm(v)).fold(f64::INFINITY, f64::min)
}

/// Randomized check of the block-trivial lemma.
///
/// Bases alternate between a rephased Fourier basis and a Haar-random
/// unitary; random bases whose pivot overlaps fall below `1e-2` are redrawn.
pub fn lemma2_oracle(trials: usize, n: usize, seed: u64) -> Result<OracleReport> {
    if !(2..=12).contains(&n) {
        return domain(format!("lemma oracles run for 2 <= n <= 12, got {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport { trials, violations: 0, max_deviation: 0.0 };
    for trial in 0..trials {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let s_len = rng.random_range(2..=n);
        let s = &idx[..s_len];
        let pivot_pos = rng.random_range(0..s_len);
        let pivot = s[pivot_pos];
        let basis: Vec<CVector> = loop {
            let candidate: Vec<CVector> = if trial % 2 == 0 {
                let alpha: Vec<f64> = (0..s_len).map(|_| rng.random::<f64>()).collect();
                let beta: Vec<f64> = (0..s_len).map(|_| rng.random::<f64>()).collect();
                (0..s_len)
                    .map(|j| {
                        let mut v = CVector::zeros(n);
                        for (k, &i) in s.iter().enumerate() {
                            let w = root_of_unity(s_len as u64, (j * k) as i64).expect("n >= 1");
                            let phase = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * (alpha[k] + beta[j]));
                            v[i] = w * phase;
                        }
                        v
                    })
                    .collect()
            } else {
                let u = random_unitary(s_len, &mut rng)?;
                u.columns().into_iter().map(|col| embed(col, s, n)).collect()
            };
            if min_pivot_overlap(&candidate, pivot) >= 1e-2 {
                break candidate;
            }
        };
        let mut rows = Vec::new();
        for i in 0..s_len {
            for j in 0..s_len {
                if i < j {
                    condition(&basis[i], &basis[j], n, &mut rows);
                }
            }
        }
        let unit = |i: usize| {
            let mut v = CVector::zeros(n);
            v[i] = c(1.0, 0.0);
            v
        };
        for &o in s {
            if o != pivot {
                condition(&unit(pivot), &unit(o), n, &mut rows);
            }
        }
        let e = random_solution(&rows, n, &mut rng)?;
        let d0 = e[[s[0], s[0]]];
        let mut dev = 0.0f64;
        for &a in s {
            for &b in s {
                let target = if a == b { d0 } else { Complex::default() };
                dev = dev.max((e[[a, b]] - target).norm());
            }
        }
        report.max_deviation = report.max_deviation.max(dev);
        if dev > 1e-9 {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Cross-layer overlaps of the layered Fourier kets.
#[derive(Clone, Debug, Serialize)]
pub struct LayerOverlapReport {
    pub d: usize,
    pub layers: usize,
    pub checked: usize,
    pub min_modulus: f64,
    pub all_nonzero: bool,
}

/// `|<xi_1^a|xi_1^b>|`, `|<eta_1^a|eta_1^b>|` and `|<xi_1^a|eta_1^b>|` over
/// every pair of layers.
pub fn check_layer_overlaps(d: usize, tol: &Tolerances) -> Result<LayerOverlapReport> {
    if d < 3 {
        return domain(format!("layer overlaps need d >= 3, got {d}"));
    }
    let layers = (d - 3) / 2 + 1;
    let mut min_modulus = f64::INFINITY;
    let mut checked = 0;
    for a in 0..layers {
        for b in 0..layers {
            let (xa, xb) = (xi(d, a, 1)?, xi(d, b, 1)?);
            let (ea, eb) = (eta(d, a, 1)?, eta(d, b, 1)?);
            for z in [xa.inner(&xb)?, ea.inner(&eb)?, xa.inner(&eb)?] {
                min_modulus = min_modulus.min(z.norm());
                checked += 1;
            }
        }
    }
    Ok(LayerOverlapReport { d, layers, checked, min_modulus, all_nonzero: min_modulus > tol.zero })
}
