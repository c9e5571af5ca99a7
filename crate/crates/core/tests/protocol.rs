//! End-to-end behaviour of the compiled protocol against hand-derived and
//! oracle values.

mod common;

use std::collections::BTreeMap;

use common::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqlogic::circuit::{compile, Instruction, PrepPath, SlotKind};
use seqlogic::harness::{estimate, run_until_success, verify, EstimateOptions, VerifyOptions};
use seqlogic::linalg::{fidelity, StateKet};
use seqlogic::oracle::{self, history_state_of};
use seqlogic::sim::{enumerate_trajectories, explore, run, run_forced};
use seqlogic::Error;

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn half_half() -> (seqlogic::ElementaryAssignment, StateKet) {
    let mut asg = seqlogic::ElementaryAssignment::new(2).unwrap();
    asg.insert_state(lbl("a"), StateKet::basis(2, 0)).unwrap();
    asg.insert_state(lbl("b"), StateKet::from_real(&[S, S])).unwrap();
    (asg, StateKet::basis(2, 0))
}

#[test]
fn forced_success_branches_sum_to_oracle_value() {
    let (asg, psi) = half_half();
    let circ = compile(&p("a&b"), &asg, PrepPath::Teleport).unwrap();
    let parity: Vec<_> = circ
        .slots
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s.kind, SlotKind::Parity { .. }))
        .map(|(i, _)| seqlogic::circuit::SlotId(i))
        .collect();
    let and_slot = circ.success_slots()[0];
    let mut total = 0.0;
    for bits in 0..4usize {
        let mut forced = BTreeMap::new();
        for (k, slot) in parity.iter().enumerate() {
            forced.insert(*slot, (bits >> k) & 1);
        }
        forced.insert(and_slot, 0);
        forced.insert(circ.readout, 1);
        let r = run_forced(&circ, &psi, &forced).unwrap();
        assert!(r.success && r.truth_value == Some(true));
        // each parity outcome has probability 1/2, the rest is (1/3)(1/2)
        assert!((r.probability - 0.25 / 6.0).abs() < 1e-12, "{}", r.probability);
        total += r.probability;
    }
    assert!((total - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn odd_parity_branch_is_corrected() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let asg = random_rank_one_assignment(&mut rng);
    let psi = random_ket(&mut rng, 2);
    let circ = compile(&p("a&!b"), &asg, PrepPath::Teleport).unwrap();
    let branches = explore(&circ, &psi, circ.stage1_len).unwrap();
    assert_eq!(branches.len(), 4);
    let even = branches[0].state.to_kron();
    for b in &branches[1..] {
        assert!((b.state.probability() - 0.25).abs() < 1e-12);
        assert!((fidelity(&b.state.to_kron(), &even) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn stage_one_produces_history_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for leaves in 1..=4 {
        let prop = random_prop(&mut rng, leaves);
        let asg = random_rank_one_assignment(&mut rng);
        let psi = random_ket(&mut rng, 2);
        let reference = oracle::history_state_reference(&prop.leaf_labels(), &psi, &asg).unwrap();
        assert!((reference.norm_sqr() - 1.0).abs() < 1e-12);
        for path in [PrepPath::Teleport, PrepPath::Direct] {
            let circ = compile(&prop, &asg, path).unwrap();
            for b in explore(&circ, &psi, circ.stage1_len).unwrap() {
                let f = fidelity(&b.state.to_kron(), &reference);
                assert!(f >= 1.0 - 1e-9, "{prop} {path}: {f}");
            }
        }
    }
}

#[test]
fn direct_path_on_qutrit_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut asg = seqlogic::ElementaryAssignment::new(3).unwrap();
    asg.insert_projector(lbl("a"), random_projector(&mut rng, 3, 1)).unwrap();
    asg.insert_projector(lbl("b"), random_projector(&mut rng, 3, 2)).unwrap();
    let psi = random_ket(&mut rng, 3);
    for text in ["a&b", "!(b&a)&a", "!a&!b"] {
        let report = verify(&p(text), &asg, &psi, &VerifyOptions::exact()).unwrap();
        assert_eq!(report.paths, vec![PrepPath::Direct]);
        assert!(report.pass, "{text}: {:?}", report.failures().collect::<Vec<_>>());
    }
}

#[test]
fn each_and_step_yields_scaled_coarse_history() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let asg = random_rank_one_assignment(&mut rng);
    let psi = random_ket(&mut rng, 2);
    let circ = compile(&p("a&b&c"), &asg, PrepPath::Direct).unwrap();
    // instruction index just past the first AND's relabel
    let first_relabel = circ
        .instructions
        .iter()
        .position(|i| matches!(i, Instruction::Relabel { .. }))
        .unwrap();
    let branches = explore(&circ, &psi, first_relabel + 1).unwrap();
    let ok = branches.iter().find(|b| !b.failed).unwrap();
    let coarse = history_state_of(&[p("a&b"), p("c")], &psi, &asg).unwrap();
    assert!((ok.state.probability() - coarse.norm_sqr() / 3.0).abs() < 1e-12);
    assert!((fidelity(&ok.state.to_kron(), &coarse) - 1.0).abs() < 1e-12);
}

#[test]
fn worked_example_is_always_false() {
    let asg = uniform_assignment(&StateKet::basis(2, 1), &["a", "b", "c"]);
    let psi = StateKet::basis(2, 1);
    let circ = compile(&p("!(a&b)&c"), &asg, PrepPath::Teleport).unwrap();
    let mut successes = 0;
    for seed in 0..200 {
        let r = run(&circ, &psi, seed).unwrap();
        if r.success {
            successes += 1;
            assert_eq!(r.truth_value, Some(false));
        }
    }
    assert!(successes > 0);
    let total: f64 = enumerate_trajectories(&circ, &psi)
        .unwrap()
        .iter()
        .filter(|t| t.success)
        .map(|t| t.probability)
        .sum();
    assert!((total - 1.0 / 9.0).abs() < 1e-12);
}

#[test]
fn restart_loop_examples() {
    let asg = uniform_assignment(&StateKet::basis(2, 1), &["a", "b", "c"]);
    let psi = StateKet::basis(2, 1);
    let circ = compile(&p("!(a&b)&c"), &asg, PrepPath::Direct).unwrap();
    let mut total = 0;
    for seed in 0..2000 {
        let (r, n) = run_until_success(&circ, &psi, seed, 900).unwrap();
        assert_eq!(r.truth_value, Some(false));
        total += n;
    }
    let mean = total as f64 / 2000.0;
    // geometric(1/9): mean 9, sd of the mean sqrt(72/2000) ≈ 0.19
    assert!((mean - 9.0).abs() < 5.0 * (72.0f64 / 2000.0).sqrt(), "{mean}");

    let single = compile(&p("a"), &asg, PrepPath::Direct).unwrap();
    for seed in 0..50 {
        assert_eq!(run_until_success(&single, &psi, seed, 1).unwrap().1, 1);
    }

    let mut exhausted = 0;
    for seed in 0..900 {
        match run_until_success(&circ, &psi, seed, 1) {
            Err(Error::ExhaustedAttempts { attempts: 1, .. }) => exhausted += 1,
            Ok(_) => {}
            Err(e) => panic!("{e}"),
        }
    }
    // expect 800 ± 5σ with σ = sqrt(900·(8/9)(1/9)) ≈ 9.4
    assert!((exhausted as f64 - 800.0).abs() < 47.0, "{exhausted}");
}

#[test]
fn estimate_examples() {
    let asg = uniform_assignment(&StateKet::basis(2, 1), &["a", "b", "c"]);
    let psi = StateKet::basis(2, 1);
    let circ = compile(&p("!(a&b)&c"), &asg, PrepPath::Teleport).unwrap();
    let stats = estimate(&circ, &psi, EstimateOptions::new(10_000, 1)).unwrap();
    let sigma = (1.0 / 9.0 * 8.0 / 9.0 / 10_000.0f64).sqrt();
    assert!((stats.success_rate - 1.0 / 9.0).abs() < 5.0 * sigma);
    assert_eq!(stats.p_true, Some(0.0));
    assert_eq!(stats.successes, stats.true_count + stats.false_count);

    let (asg, psi) = half_half();
    let circ = compile(&p("a&b"), &asg, PrepPath::Teleport).unwrap();
    let stats = estimate(&circ, &psi, EstimateOptions::new(10_000, 2)).unwrap();
    let sigma = (1.0 / 3.0 * 2.0 / 3.0 / 10_000.0f64).sqrt();
    assert!((stats.success_rate - 1.0 / 3.0).abs() < 5.0 * sigma);
    let q = stats.p_true.unwrap();
    assert!((q - 0.5).abs() < 5.0 * (0.25 / stats.successes as f64).sqrt());
}

#[test]
fn estimate_is_reproducible_and_order_independent() {
    let (asg, psi) = half_half();
    let circ = compile(&p("!a&b"), &asg, PrepPath::Teleport).unwrap();
    let serial = estimate(&circ, &psi, EstimateOptions::new(2000, 77)).unwrap();
    let again = estimate(&circ, &psi, EstimateOptions::new(2000, 77)).unwrap();
    let parallel = estimate(
        &circ,
        &psi,
        EstimateOptions {
            jobs: 4,
            ..EstimateOptions::new(2000, 77)
        },
    )
    .unwrap();
    assert_eq!(serial, again);
    assert_eq!(serial, parallel);
    let other = estimate(&circ, &psi, EstimateOptions::new(2000, 78)).unwrap();
    assert_ne!(serial, other);
}

#[test]
fn verify_single_leaf_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let asg = random_rank_one_assignment(&mut rng);
    let psi = random_ket(&mut rng, 2);
    let report = verify(&p("a"), &asg, &psi, &VerifyOptions::exact()).unwrap();
    assert!(report.pass);
    let success = report
        .checks
        .iter()
        .find(|c| c.name == "success probability")
        .unwrap();
    assert!(success.value.abs() < 1e-12);
}

#[test]
fn entangled_discard_is_caught_at_run_time() {
    let asg = uniform_assignment(&StateKet::from_real(&[S, S]), &["a"]);
    let mut circ = compile(&p("a"), &asg, PrepPath::Direct).unwrap();
    // discarding the system right after it is recorded coherently
    circ.instructions.insert(1, Instruction::Discard { target: 1 });
    assert!(seqlogic::circuit::validate(&circ).is_empty());
    assert!(matches!(
        run(&circ, &StateKet::basis(2, 0), 0),
        Err(Error::EntangledDiscard { register: 1, .. })
    ));
}
