//! The state sets under study, with size accounting.
//!
//! `upb_333` and `upb_444` are written out from their explicit small-`d`
//! formulas; `upb_ddd` builds the layered construction for any `d >= 3`.
//! Tests check that the two routes agree ray-by-ray.
//!
//! Reading of the layered `B1` block: its index set is taken to be
//! `Z_{d-1-2k} x Z_{d-1-2k} \ {(0,0)}`, the same as every sibling block.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::linalg::{self, c, root_of_unity, CVector};
use crate::states::{eta, party_name, phi, stopper, xi, Ket, ProductState, StateSet};

/// Index-set reading used for the layered `B1` block; echoed in certificates.
pub const B1_INDEX_READING: &str = "B1 index set read as Z_{d-1-2k} x Z_{d-1-2k} minus (0,0)";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyId {
    Upb333,
    Upb444,
    UpbDdd(usize),
    Tiles34,
    ComplementPhi3,
}

impl FamilyId {
    /// Parses a CLI family name; `d` is required for `ddd`.
    pub fn parse(name: &str, d: Option<usize>) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "upb333" | "333" => Ok(FamilyId::Upb333),
            "upb444" | "444" => Ok(FamilyId::Upb444),
            "tiles34" => Ok(FamilyId::Tiles34),
            "phi3" | "complement-phi3" => Ok(FamilyId::ComplementPhi3),
            "ddd" => match d {
                Some(d) if d >= 3 => Ok(FamilyId::UpbDdd(d)),
                Some(d) => domain(format!("family ddd requires d >= 3, got {d}")),
                None => domain("family ddd requires -d"),
            },
            other => domain(format!("unknown family '{other}'")),
        }
    }

    pub fn build(self) -> Result<StateSet> {
        match self {
            FamilyId::Upb333 => Ok(upb_333()),
            FamilyId::Upb444 => Ok(upb_444()),
            FamilyId::UpbDdd(d) => upb_ddd(d),
            FamilyId::Tiles34 => Ok(tiles_34()),
            FamilyId::ComplementPhi3 => Err(Error::Domain(
                "the complement vectors are entangled, not a product-state set".into(),
            )),
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyId::Upb333 => write!(f, "upb333"),
            FamilyId::Upb444 => write!(f, "upb444"),
            FamilyId::UpbDdd(d) => write!(f, "ddd{d}"),
            FamilyId::Tiles34 => write!(f, "tiles34"),
            FamilyId::ComplementPhi3 => write!(f, "phi3"),
        }
    }
}

/// `d^3 - 8 (floor((d-3)/2) + 1)`.
pub fn expected_size(d: usize) -> Result<usize> {
    if d < 3 {
        return domain(format!("family sizes are defined for d >= 3, got {d}"));
    }
    Ok(d * d * d - 8 * ((d - 3) / 2 + 1))
}

fn ket(v: &[f64]) -> Ket {
    Ket::from_real(v).expect("literal kets are nonzero")
}

fn basis(d: usize, k: usize) -> Ket {
    Ket::basis(d, k).expect("index in range")
}

fn pairs_without_origin(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).map(move |j| (i, j))).filter(|&p| p != (0, 0))
}

fn push(states: &mut Vec<ProductState>, label: String, factors: [Ket; 3]) {
    states.push(ProductState::new(label, factors.to_vec()).expect("three factors"));
}

/// The 19-state set in `3x3x3`.
pub fn upb_333() -> StateSet {
    let eta = |i: usize| ket(&[1.0, if i == 0 { 1.0 } else { -1.0 }, 0.0]);
    let xi = |j: usize| ket(&[0.0, 1.0, if j == 0 { 1.0 } else { -1.0 }]);
    let b = |k| basis(3, k);

    let mut states = Vec::with_capacity(19);
    type Tile = fn(&dyn Fn(usize) -> Ket, &dyn Fn(usize) -> Ket, &dyn Fn(usize) -> Ket, usize, usize) -> [Ket; 3];
    let tiles: [(&str, Tile); 6] = [
        ("A1", |eta, xi, b, i, j| [xi(j), b(0), eta(i)]),
        ("A2", |eta, xi, b, i, j| [xi(j), eta(i), b(2)]),
        ("A3", |eta, xi, b, i, j| [b(2), xi(j), eta(i)]),
        ("B1", |eta, xi, b, i, j| [eta(i), b(2), xi(j)]),
        ("B2", |eta, xi, b, i, j| [eta(i), xi(j), b(0)]),
        ("B3", |eta, xi, b, i, j| [b(0), eta(i), xi(j)]),
    ];
    for (name, tile) in tiles {
        for (i, j) in pairs_without_origin(2) {
            push(&mut states, format!("{name}[i={i},j={j}]"), tile(&eta, &xi, &b, i, j));
        }
    }
    states.push(stopper(3).expect("d >= 2"));
    StateSet::new("upb333", vec![3, 3, 3], states).expect("well-formed construction")
}

/// The 56-state set in `4x4x4`.
pub fn upb_444() -> StateSet {
    let w = |k: usize| root_of_unity(3, k as i64).expect("n = 3");
    let eta = |i: usize| Ket::new((0..4).map(|k| if k < 3 { w(i * k) } else { c(0.0, 0.0) }).collect()).unwrap();
    let xi = |j: usize| Ket::new((0..4).map(|k| if k >= 1 { w(j * (k - 1)) } else { c(0.0, 0.0) }).collect()).unwrap();
    let phi = |r: usize| ket(&[0.0, 1.0, if r == 0 { 1.0 } else { -1.0 }, 0.0]);
    let b = |k| basis(4, k);

    let mut states = Vec::with_capacity(56);
    for r in 0..2 {
        for s in 0..2 {
            for t in 0..2 {
                if (r, s, t) != (0, 0, 0) {
                    push(&mut states, format!("A0[r={r},s={s},t={t}]"), [phi(r), phi(s), phi(t)]);
                }
            }
        }
    }
    for (i, j) in pairs_without_origin(3) {
        push(&mut states, format!("A1[i={i},j={j}]"), [xi(j), b(0), eta(i)]);
    }
    for (i, j) in pairs_without_origin(3) {
        push(&mut states, format!("A2[i={i},j={j}]"), [xi(j), eta(i), b(3)]);
    }
    for (i, j) in pairs_without_origin(3) {
        push(&mut states, format!("A3[i={i},j={j}]"), [b(3), xi(j), eta(i)]);
    }
    for (i, j) in pairs_without_origin(3) {
        push(&mut states, format!("B1[i={i},j={j}]"), [eta(i), b(3), xi(j)]);
    }
    for (i, j) in pairs_without_origin(3) {
        push(&mut states, format!("B2[i={i},j={j}]"), [eta(i), xi(j), b(0)]);
    }
    for (i, j) in pairs_without_origin(3) {
        push(&mut states, format!("B3[i={i},j={j}]"), [b(0), eta(i), xi(j)]);
    }
    states.push(stopper(4).expect("d >= 2"));
    StateSet::new("upb444", vec![4, 4, 4], states).expect("well-formed construction")
}

/// The layered construction in `dxdxd`: one six-tile layer per
/// `k = 0..=floor((d-3)/2)` (odd `d`) or `k = 0..=(d-4)/2` plus the central
/// `phi` block (even `d`), closed by the stopper.
pub fn upb_ddd(d: usize) -> Result<StateSet> {
    if d < 3 {
        return domain(format!("upb_ddd requires d >= 3, got {d}"));
    }
    let layers = if d % 2 == 1 { (d - 3) / 2 } else { (d - 4) / 2 };
    let mut states = Vec::with_capacity(expected_size(d)?);

    if d % 2 == 0 {
        for r in 0..2 {
            for s in 0..2 {
                for t in 0..2 {
                    if (r, s, t) != (0, 0, 0) {
                        let f = [phi(d, r)?, phi(d, s)?, phi(d, t)?];
                        push(&mut states, format!("A0[r={r},s={s},t={t}]"), f);
                    }
                }
            }
        }
    }

    for k in 0..=layers {
        let n = d - 1 - 2 * k;
        let low = Ket::basis(d, k)?;
        let high = Ket::basis(d, d - 1 - k)?;
        let tiles: [(&str, usize); 6] = [("A1", 0), ("A2", 1), ("A3", 2), ("B1", 3), ("B2", 4), ("B3", 5)];
        for (name, which) in tiles {
            for (i, j) in pairs_without_origin(n) {
                let (e, x) = (eta(d, k, i)?, xi(d, k, j)?);
                let f = match which {
                    0 => [x, low.clone(), e],
                    1 => [x, e, high.clone()],
                    2 => [high.clone(), x, e],
                    3 => [e, high.clone(), x],
                    4 => [e, x, low.clone()],
                    _ => [low.clone(), e, x],
                };
                push(&mut states, format!("{name}[k={k},i={i},j={j}]"), f);
            }
        }
    }
    states.push(stopper(d)?);
    StateSet::new(format!("ddd{d}"), vec![d, d, d], states)
}

/// The eight-state set in `3x4`: a 3x3 tile set extended by `|i>|3>`.
pub fn tiles_34() -> StateSet {
    let a = |v: &[f64]| ket(v);
    let b = |v: &[f64]| ket(v);
    let rows: [(&str, Ket, Ket); 8] = [
        ("psi1", a(&[1.0, 0.0, 0.0]), b(&[1.0, -1.0, 0.0, 0.0])),
        ("psi2", a(&[1.0, -1.0, 0.0]), b(&[0.0, 0.0, 1.0, 0.0])),
        ("psi3", a(&[0.0, 0.0, 1.0]), b(&[0.0, 1.0, -1.0, 0.0])),
        ("psi4", a(&[0.0, 1.0, -1.0]), b(&[1.0, 0.0, 0.0, 0.0])),
        ("psi5", a(&[1.0, 1.0, 1.0]), b(&[1.0, 1.0, 1.0, 0.0])),
        ("psi6", a(&[1.0, 0.0, 0.0]), b(&[0.0, 0.0, 0.0, 1.0])),
        ("psi7", a(&[0.0, 1.0, 0.0]), b(&[0.0, 0.0, 0.0, 1.0])),
        ("psi8", a(&[0.0, 0.0, 1.0]), b(&[0.0, 0.0, 0.0, 1.0])),
    ];
    let states = rows
        .into_iter()
        .map(|(l, x, y)| ProductState::new(l, vec![x, y]).expect("two factors"))
        .collect();
    StateSet::new("tiles34", vec![3, 4], states).expect("well-formed construction")
}

/// A bipartition of the parties, stored as the smaller side (ties keep the
/// side containing party 0).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bipartition {
    pub side: Vec<usize>,
    pub parties: usize,
}

impl Bipartition {
    pub fn new(side: &[usize], parties: usize) -> Result<Self> {
        let mut s: Vec<usize> = side.to_vec();
        s.sort_unstable();
        s.dedup();
        if s.is_empty() || s.len() >= parties || s.iter().any(|&p| p >= parties) {
            return domain(format!("{side:?} is not a nonempty proper subset of {parties} parties"));
        }
        let comp: Vec<usize> = (0..parties).filter(|p| !s.contains(p)).collect();
        let side = if comp.len() < s.len() || (comp.len() == s.len() && comp[0] == 0) { comp } else { s };
        Ok(Bipartition { side, parties })
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.parties).filter(|p| !self.side.contains(p)).collect()
    }

    /// All bipartitions up to complement symmetry, singletons first.
    pub fn all(parties: usize) -> Vec<Bipartition> {
        let mut out: Vec<Bipartition> = Vec::new();
        for mask in 1..(1usize << parties) - 1 {
            let side: Vec<usize> = (0..parties).filter(|p| mask & (1 << p) != 0).collect();
            let b = Bipartition::new(&side, parties).expect("proper subset");
            if !out.contains(&b) {
                out.push(b);
            }
        }
        out.sort_by_key(|b| (b.side.len(), b.side.clone()));
        out
    }

    /// E.g. `A|BC`, `B|CA`, `C|AB`: the complement is listed cyclically
    /// after the first party of the side.
    pub fn label(&self) -> String {
        let first = self.side[0];
        let side: String = self.side.iter().map(|&p| party_name(p)).collect();
        let comp: String = (1..self.parties)
            .map(|o| (first + o) % self.parties)
            .filter(|p| !self.side.contains(p))
            .map(party_name)
            .collect();
        format!("{side}|{comp}")
    }
}

impl FromStr for Bipartition {
    type Err = Error;

    /// Parses `A|BC`-style labels for tripartite systems.
    fn from_str(s: &str) -> Result<Self> {
        let (left, right) = s
            .split_once('|')
            .ok_or_else(|| Error::Domain(format!("bipartition '{s}' must look like A|BC")))?;
        let parse = |part: &str| -> Result<Vec<usize>> {
            part.chars()
                .map(|ch| match ch.to_ascii_uppercase() {
                    ch @ 'A'..='Z' => Ok((ch as u8 - b'A') as usize),
                    _ => domain(format!("bad party name '{ch}' in '{s}'")),
                })
                .collect()
        };
        let (l, r) = (parse(left)?, parse(right)?);
        Bipartition::new(&l, l.len() + r.len())
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// An entangled vector in the complement of the 19-state span, with the cut
/// across which it is claimed to be a product.
#[derive(Clone, Debug)]
pub struct ComplementVector {
    pub label: String,
    pub vector: CVector,
    pub product_cut: Bipartition,
}

/// `phi1`, `phi2`, `phi3` for `d = 3`, flattened with the global convention.
pub fn complement_phi_3() -> Vec<ComplementVector> {
    let e0 = ket(&[1.0, 1.0, 0.0]);
    let x0 = ket(&[0.0, 1.0, 1.0]);
    let b = |k| basis(3, k);
    let prod = |f: [&Ket; 3]| -> CVector {
        linalg::kron(&[f[0].coeffs().clone(), f[1].coeffs().clone(), f[2].coeffs().clone()]).unwrap()
    };
    let diff = |p: CVector, q: CVector| p - q;
    vec![
        ComplementVector {
            label: "phi1".into(),
            vector: diff(prod([&x0, &b(0), &e0]), prod([&x0, &e0, &b(2)])),
            product_cut: Bipartition::new(&[0], 3).unwrap(),
        },
        ComplementVector {
            label: "phi2".into(),
            vector: diff(prod([&b(0), &e0, &x0]), prod([&e0, &b(2), &x0])),
            product_cut: Bipartition::new(&[2], 3).unwrap(),
        },
        ComplementVector {
            label: "phi3".into(),
            vector: diff(prod([&b(2), &x0, &e0]), prod([&e0, &x0, &b(0)])),
            product_cut: Bipartition::new(&[1], 3).unwrap(),
        },
    ]
}

/// Ray-set equality: a bijection matching states up to scalar.
pub fn same_ray_set(a: &StateSet, b: &StateSet, tol: f64) -> bool {
    if a.dims != b.dims || a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    'outer: for p in &a.states {
        for (j, q) in b.states.iter().enumerate() {
            if !used[j] && p.same_ray(q, tol) {
                used[j] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}
