//! Independent oracles shared by the integration tests and the acceptance
//! harness.
#![allow(dead_code)]

use itertools::Itertools;
use ndarray::Array1;
use rand::seq::IndexedRandom;
use rand::Rng;
use upbv::linalg::{self, c, CMatrix, CVector};
use upbv::states::{Ket, ProductState, StateSet};

/// Vector pool for one party: the computational basis, the vectors
/// `e_i + e_j` and `e_i - e_j`, and random unitary columns. Sharing a small
/// pool makes exact orthogonality between factors common.
pub fn local_pool<R: Rng>(d: usize, extra_bases: usize, rng: &mut R) -> Vec<CVector> {
    let e = |k: usize| {
        let mut v = CVector::zeros(d);
        v[k] = c(1.0, 0.0);
        v
    };
    let mut pool: Vec<CVector> = (0..d).map(e).collect();
    for i in 0..d {
        for j in i + 1..d {
            pool.push(e(i) + e(j));
            pool.push(e(i) - e(j));
        }
    }
    for _ in 0..extra_bases {
        let u = linalg::random_unitary(d, rng).unwrap();
        pool.extend((0..d).map(|j| u.column(j).to_owned()));
    }
    pool
}

/// A random pairwise orthogonal product set with at most `max_states`
/// members, grown by rejection sampling from per-party pools.
pub fn random_orthogonal_set<R: Rng>(dims: &[usize], max_states: usize, rng: &mut R) -> StateSet {
    let pools: Vec<Vec<CVector>> = dims.iter().map(|&d| local_pool(d, 1, rng)).collect();
    let target = rng.random_range(max_states.min(3)..=max_states);
    let mut chosen: Vec<Vec<CVector>> = Vec::new();
    for _ in 0..2000 {
        if chosen.len() == target {
            break;
        }
        let cand: Vec<CVector> = pools.iter().map(|p| p.choose(rng).unwrap().clone()).collect();
        let ok = chosen.iter().all(|s| {
            s.iter().zip(&cand).map(|(a, b)| linalg::inner(a, b).unwrap().norm()).product::<f64>() < 1e-12
        });
        if ok {
            chosen.push(cand);
        }
    }
    let states = chosen
        .into_iter()
        .enumerate()
        .map(|(i, f)| ProductState::new(format!("s{i}"), f.into_iter().map(|v| Ket::new(v).unwrap()).collect()).unwrap())
        .collect();
    StateSet::new("random", dims.to_vec(), states).unwrap()
}

fn local_rank(vectors: &[CVector], d: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let rows: Vec<Array1<_>> = vectors.to_vec();
    linalg::rank(&linalg::stack_rows(&rows, d), 1e-9).unwrap()
}

/// Brute force: the set is extendible iff some assignment of every state to
/// one party leaves each party's assigned local factors non-spanning.
pub fn brute_force_extendible(set: &StateSet) -> bool {
    let n = set.parties();
    (0..set.len()).map(|_| 0..n).multi_cartesian_product().any(|assign| {
        (0..n).all(|p| {
            let vs: Vec<CVector> = set
                .states
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == p)
                .map(|(s, _)| s.factors[p].coeffs().clone())
                .collect();
            local_rank(&vs, set.dims[p]) < set.dims[p]
        })
    }) || set.is_empty()
}

/// Row-major pattern of a block-diagonal matrix: `true` off the blocks.
pub fn block_pattern(m: usize, blocks: &[Vec<usize>]) -> Vec<bool> {
    let block_of = |i: usize| blocks.iter().position(|b| b.contains(&i)).expect("blocks partition 0..m");
    (0..m * m).map(|k| block_of(k / m) != block_of(k % m)).collect()
}

/// Index of a measured-party digit string such as "12" in `d x d`.
pub fn idx(digits: &str, d: usize) -> usize {
    digits.bytes().fold(0, |acc, b| acc * d + (b - b'0') as usize)
}

pub fn blocks(spec: &[&[&str]], d: usize) -> Vec<Vec<usize>> {
    spec.iter().map(|b| b.iter().map(|s| idx(s, d)).collect()).collect()
}

/// Eq-(6)-style block structure for `upb_333` measured on BC.
pub fn pattern_333() -> Vec<bool> {
    block_pattern(9, &blocks(&[&["00", "01"], &["02", "12"], &["11"], &["10", "20"], &["21", "22"]], 3))
}

/// First-phase block structure for `upb_444` measured on BC.
pub fn pattern_444() -> Vec<bool> {
    block_pattern(
        16,
        &blocks(
            &[
                &["11", "12", "21", "22"],
                &["00", "01", "02"],
                &["03", "13", "23"],
                &["31", "32", "33"],
                &["10", "20", "30"],
            ],
            4,
        ),
    )
}

/// Dense `E` from a flattened real basis element.
pub fn hermitian(params: &[f64]) -> CMatrix {
    linalg::params_to_hermitian(params).unwrap()
}

/// Shifts in `2x2x2` or Tiles in `3x3`, both UPBs.
pub fn small_upb(dims: &[usize]) -> Vec<Vec<CVector>> {
    let v = |xs: &[f64]| xs.iter().map(|&x| c(x, 0.0)).collect::<CVector>();
    match dims {
        [2, 2, 2] => {
            let (z, o, p, m) = (v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 1.0]), v(&[1.0, -1.0]));
            vec![
                vec![z.clone(), o.clone(), p.clone()],
                vec![o.clone(), p.clone(), z.clone()],
                vec![p.clone(), z.clone(), o.clone()],
                vec![m.clone(), m.clone(), m.clone()],
            ]
        }
        [3, 3] => {
            let e0 = v(&[1.0, 0.0, 0.0]);
            let e2 = v(&[0.0, 0.0, 1.0]);
            vec![
                vec![e0.clone(), v(&[1.0, -1.0, 0.0])],
                vec![e2.clone(), v(&[0.0, 1.0, -1.0])],
                vec![v(&[1.0, -1.0, 0.0]), e2.clone()],
                vec![v(&[0.0, 1.0, -1.0]), e0.clone()],
                vec![v(&[1.0, 1.0, 1.0]), v(&[1.0, 1.0, 1.0])],
            ]
        }
        _ => panic!("no small UPB for {dims:?}"),
    }
}

/// Half of the draws are a known UPB under random local unitaries with up
/// to two members removed; the other half come from
/// [`random_orthogonal_set`].
pub fn random_mixed_set<R: Rng>(dims: &[usize], max_states: usize, rng: &mut R) -> StateSet {
    if rng.random_bool(0.5) {
        return random_orthogonal_set(dims, max_states, rng);
    }
    let us: Vec<CMatrix> = dims.iter().map(|&d| linalg::random_unitary(d, rng).unwrap()).collect();
    let mut members = small_upb(dims);
    for _ in 0..rng.random_range(0..=2usize) {
        let k = rng.random_range(0..members.len());
        members.remove(k);
    }
    let states = members
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let factors = f.iter().zip(&us).map(|(v, u)| Ket::new(u.dot(v)).unwrap()).collect();
            ProductState::new(format!("s{i}"), factors).unwrap()
        })
        .collect();
    StateSet::new("rotated", dims.to_vec(), states).unwrap()
}
