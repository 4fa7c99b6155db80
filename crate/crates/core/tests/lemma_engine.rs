mod common;

use upbv::families::{upb_333, upb_444, upb_ddd};
use upbv::lemma::{
    certify, check_layer_overlaps, check_soundness, lemma1_oracle, lemma2_oracle, Certificate, Rule,
};
use upbv::linalg::{HermitianParams, SolutionSpace, Tolerances};
use upbv::opm::{build_constraints, solution_space, MeasuredSubset};
use upbv::states::StateSet;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn bc(set: &StateSet) -> MeasuredSubset {
    MeasuredSubset::parse(&set.dims, "BC").unwrap()
}

#[test]
fn first_phase_of_333_is_the_five_block_diagonal() {
    let set = upb_333();
    let out = certify(&set, &bc(&set), &tol()).unwrap();
    assert_eq!(out.first_phase.zero_pattern(), common::pattern_333());
    assert_eq!(out.residual.dim, 1);
    assert_eq!(out.certificate.residual_dim, 1);
}

#[test]
fn first_phase_of_444_is_the_five_block_diagonal() {
    let set = upb_444();
    let out = certify(&set, &bc(&set), &tol()).unwrap();
    assert_eq!(out.first_phase.zero_pattern(), common::pattern_444());
    assert_eq!(out.residual.dim, 1);
    // R1 alone produces it.
    let phase = &out.certificate.steps[..out.certificate.first_phase_end];
    assert!(phase.iter().all(|s| matches!(s.rule, Rule::R1 | Rule::R3)));
}

#[test]
fn derived_facts_hold_in_every_numeric_solution() {
    let mut sets = vec![upb_333(), upb_444()];
    sets.extend((3..=5).map(|d| upb_ddd(d).unwrap()));
    for set in &sets {
        for cut in ["BC", "CA", "AB"] {
            let m = MeasuredSubset::parse(&set.dims, cut).unwrap();
            let out = certify(set, &m, &tol()).unwrap();
            let space = solution_space(&build_constraints(set, &m, &tol()).unwrap(), &tol()).unwrap();
            check_soundness(&out.knowledge, &space).unwrap_or_else(|e| panic!("{} {cut}: {e}", set.name));
            assert_eq!(out.residual.dim, 1, "{} {cut}", set.name);
        }
    }
}

#[test]
fn soundness_check_rejects_a_false_zero() {
    let full = upb_333();
    let out = certify(&full, &bc(&full), &tol()).unwrap();
    let dense = HermitianParams::from_vec(vec![1.0; 81]).unwrap();
    let space = SolutionSpace { dim: 1, basis: vec![dense], gap_ratio: f64::INFINITY };
    assert!(check_soundness(&out.knowledge, &space).is_err());
    let id = SolutionSpace { dim: 1, basis: vec![HermitianParams::identity(9)], gap_ratio: f64::INFINITY };
    assert!(check_soundness(&out.knowledge, &id).is_ok());
}

#[test]
fn replay_reproduces_the_pattern() {
    for set in [upb_333(), upb_444()] {
        let out = certify(&set, &bc(&set), &tol()).unwrap();
        assert!(out.certificate.replay().same_pattern(&out.knowledge));
        let json = out.certificate.to_json().unwrap();
        let back: Certificate = serde_json::from_str(&json).unwrap();
        assert!(back.replay().same_pattern(&out.knowledge));
    }
}

#[test]
fn knowledge_only_grows() {
    let set = upb_444();
    let out = certify(&set, &bc(&set), &tol()).unwrap();
    let first = out.first_phase.zero_pattern();
    let last = out.knowledge.zero_pattern();
    assert!(first.iter().zip(&last).all(|(a, b)| !a || *b));
    let mut cert = out.certificate.clone();
    cert.steps.truncate(cert.first_phase_end);
    assert!(cert.replay().same_pattern(&out.first_phase));
}

#[test]
fn text_certificate_has_one_step_per_line() {
    let set = upb_333();
    let out = certify(&set, &bc(&set), &tol()).unwrap();
    let text = out.certificate.to_text();
    let steps: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(steps.len(), out.certificate.steps.len());
    for l in steps {
        let parts: Vec<&str> = l.split(" | ").collect();
        assert_eq!(parts.len(), 5, "{l}");
        assert!(parts[0].starts_with('R'));
        assert!(parts[1].starts_with("states: "));
        assert!(parts[2].starts_with("S: "));
        assert!(parts[3].starts_with("T/basis: "));
        assert!(parts[4].starts_with("delta: ") && parts[4].ends_with(" merges"));
    }
    assert!(text.contains("# end of initial R1/R3 phase"));
}

#[test]
fn lemma_oracles_find_no_violation() {
    for n in [3, 5, 8] {
        let r1 = lemma1_oracle(60, n, 17).unwrap();
        let r2 = lemma2_oracle(60, n, 23).unwrap();
        assert_eq!((r1.violations, r2.violations), (0, 0), "n = {n}");
        assert_eq!((r1.trials, r2.trials), (60, 60));
    }
    assert!(lemma1_oracle(1, 13, 0).is_err());
}

#[test]
fn layer_overlaps_never_vanish() {
    for d in 3..=9 {
        let r = check_layer_overlaps(d, &tol()).unwrap();
        assert!(r.all_nonzero && r.min_modulus > 1e-6, "d = {d}: {r:?}");
    }
    assert!((check_layer_overlaps(3, &tol()).unwrap().min_modulus - 1.0).abs() < 1e-12);
}
