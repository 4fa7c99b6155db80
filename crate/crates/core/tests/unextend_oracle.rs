mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use upbv::families::{tiles_34, upb_333, upb_444};
use upbv::linalg::Tolerances;
use upbv::states::{product_inner, ProductState, StateSet};
use upbv::unextend::{is_upb, UpbVerdict};

fn check_against_oracle(dims: &[usize], seed: u64) -> (usize, usize) {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut upbs, mut ext) = (0, 0);
    for trial in 0..100 {
        let set = common::random_mixed_set(dims, 6, &mut rng);
        let oracle = common::brute_force_extendible(&set);
        match is_upb(&set, &tol) {
            UpbVerdict::Upb => {
                assert!(!oracle, "trial {trial}: oracle finds an extension of {set:?}");
                upbs += 1;
            }
            UpbVerdict::Extendible(w) => {
                assert!(oracle, "trial {trial}: oracle finds no extension of {set:?}");
                let s = w.to_state("w");
                for m in &set.states {
                    let z = product_inner(m, &s).unwrap().norm() / (m.norm_sqr() * s.norm_sqr()).sqrt();
                    assert!(z <= 1e-8);
                }
                ext += 1;
            }
            UpbVerdict::Invalid(msg) => panic!("trial {trial}: {msg}"),
        }
    }
    eprintln!("{dims:?}: {upbs} UPB, {ext} extendible");
    (upbs, ext)
}

#[test]
fn agrees_with_brute_force_on_qubit_triples() {
    let (upbs, ext) = check_against_oracle(&[2, 2, 2], 11);
    assert_eq!(upbs + ext, 100);
    assert!(ext > 0 && upbs > 0);
}

#[test]
fn agrees_with_brute_force_on_qutrit_pairs() {
    let (upbs, ext) = check_against_oracle(&[3, 3], 12);
    assert_eq!(upbs + ext, 100);
    assert!(ext > 0 && upbs > 0);
}

#[test]
fn shifts_upb_is_recognized() {
    // |0,1,+>, |1,+,0>, |+,0,1>, |-,-,->
    use upbv::states::Ket;
    let k = |v: &[f64]| Ket::from_real(v).unwrap();
    let (z, o, p, m) = (k(&[1.0, 0.0]), k(&[0.0, 1.0]), k(&[1.0, 1.0]), k(&[1.0, -1.0]));
    let states = vec![
        ProductState::new("a", vec![z.clone(), o.clone(), p.clone()]).unwrap(),
        ProductState::new("b", vec![o.clone(), p.clone(), z.clone()]).unwrap(),
        ProductState::new("c", vec![p.clone(), z.clone(), o.clone()]).unwrap(),
        ProductState::new("d", vec![m.clone(), m.clone(), m.clone()]).unwrap(),
    ];
    let set = StateSet::new("shifts", vec![2, 2, 2], states).unwrap();
    assert!(!common::brute_force_extendible(&set));
    assert!(is_upb(&set, &Tolerances::default()).is_upb());
}

#[test]
fn known_families_agree_with_oracle_where_feasible() {
    // 3^19 assignments are out of reach; a 3 x 4 set has 2^8.
    let set = tiles_34();
    assert!(!common::brute_force_extendible(&set));
    assert!(is_upb(&set, &Tolerances::default()).is_upb());
}

#[test]
fn removing_any_member_of_333_makes_it_extendible() {
    let tol = Tolerances::default();
    let full = upb_333();
    for s in &full.states {
        let rest = full.without(&s.label);
        match is_upb(&rest, &tol) {
            UpbVerdict::Extendible(w) => assert!(w.residual <= 1e-8),
            other => panic!("{}: {:?}", s.label, other.summary()),
        }
    }
}

#[test]
fn adding_states_never_yields_a_witness() {
    // A UPB stays non-extendible when enlarged; a duplicate member is
    // non-orthogonal and must come back INVALID.
    let tol = Tolerances::default();
    for set in [upb_333(), upb_444()] {
        let mut bigger = set.clone();
        let mut dup = set.states[0].clone();
        dup.label = "dup".into();
        bigger.states.push(dup);
        assert!(matches!(is_upb(&bigger, &tol), UpbVerdict::Invalid(_)));
    }
}

#[test]
fn fewer_than_d_states_are_extendible() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let set = common::random_orthogonal_set(&[4, 4], 3, &mut rng);
        assert!(matches!(is_upb(&set, &tol), UpbVerdict::Extendible(_)));
    }
}
