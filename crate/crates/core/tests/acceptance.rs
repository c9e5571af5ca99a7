//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqlogic::circuit::{build_coherent_and_pair, compile, PrepPath};
use seqlogic::harness::{
    default_max_attempts, estimate, geometric_fit, restart_counts, verify, EstimateOptions, VerifyMode,
    VerifyOptions, CHI_SQUARE_P_MIN,
};
use seqlogic::linalg::{ComplexMatrix, StateKet};
use seqlogic::oracle::{
    coherent_and_map, conditional_distribution, is_valid_test_pair, operator_of, overall_success_probability,
};
use seqlogic::{ElementaryAssignment, Proposition, VerificationReport};

const INSTANCES: usize = 50;
const SHOTS: u64 = 10_000;
const RESTART_TRIALS: u64 = 1_000;

struct Instance {
    prop: Proposition,
    asg: ElementaryAssignment,
    psi: StateKet,
}

/// Random rank-1 qubit instances with one to four leaves.
fn instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..INSTANCES)
        .map(|i| Instance {
            prop: random_prop(&mut rng, 1 + i % 4),
            asg: random_rank_one_assignment(&mut rng),
            psi: random_ket(&mut rng, 2),
        })
        .collect()
}

fn worked_example() -> Instance {
    Instance {
        prop: p("!(a&b)&c"),
        asg: uniform_assignment(&StateKet::basis(2, 1), &["a", "b", "c"]),
        psi: StateKet::basis(2, 1),
    }
}

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exact_report(inst: &Instance) -> VerificationReport {
    verify(&inst.prop, &inst.asg, &inst.psi, &VerifyOptions::exact()).expect("verifiable instance")
}

fn worst(reports: &[VerificationReport], names: &[&str]) -> (f64, f64) {
    let mut delta: f64 = 0.0;
    let mut fidelity: f64 = 1.0;
    for r in reports {
        for c in r.checks.iter().filter(|c| names.iter().any(|n| c.name.starts_with(n))) {
            if c.name.contains("fidelity") || c.name.starts_with("stage-one") {
                fidelity = fidelity.min(c.value);
            } else {
                delta = delta.max(c.value.abs());
            }
        }
    }
    (delta, fidelity)
}

fn completeness() -> Outcome {
    let (ms, mf) = build_coherent_and_pair();
    let sum = &(&ms.adjoint() * &ms) + &(&mf.adjoint() * &mf);
    let defect = sum.max_abs_diff(&ComplexMatrix::identity(4));
    check(defect <= 1e-9, format!("max-abs defect {defect:.2e}"))
}

fn obstruction() -> Outcome {
    let a = coherent_and_map();
    let (values, _) = (&a.adjoint() * &a).hermitian_eigen().expect("hermitian");
    let top = *values.last().expect("non-empty");
    check((top - 3.0).abs() <= 1e-9, format!("largest eigenvalue of A†A = {top:.12}"))
}

fn coarse_grained_pairs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut min_defect = f64::INFINITY;
    let mut failures = 0;
    let mut n = 0;
    while n < 100 {
        let a = random_projector(&mut rng, 2, 1);
        let b = random_projector(&mut rng, 2, 1);
        if a.commutator_norm(&b) < 1e-6 {
            continue;
        }
        let r = is_valid_test_pair(&(&b * &a)).expect("square");
        min_defect = min_defect.min(r.defect);
        failures += usize::from(r.valid || r.defect <= 1e-6);
        n += 1;
    }
    let mut max_commuting: f64 = 0.0;
    for _ in 0..100 {
        let diag = |rng: &mut ChaCha8Rng| {
            ComplexMatrix::from_real(&[
                &[rng.random_range(0..2) as f64, 0.0],
                &[0.0, rng.random_range(0..2) as f64],
            ])
        };
        let (a, b) = (diag(&mut rng), diag(&mut rng));
        let r = is_valid_test_pair(&(&b * &a)).expect("square");
        max_commuting = max_commuting.max(r.defect);
        failures += usize::from(!r.valid);
    }
    check(
        failures == 0 && min_defect > 1e-6 && max_commuting <= 1e-9,
        format!("non-commuting min defect {min_defect:.3e}, commuting max defect {max_commuting:.2e}"),
    )
}

fn xor_physicality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = p("a^b");
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let d = 2 + i % 3;
        let mut asg = ElementaryAssignment::new(d).unwrap();
        for name in ["a", "b"] {
            let rank = rng.random_range(0..=d);
            asg.insert_projector(lbl(name), random_projector(&mut rng, d, rank)).unwrap();
        }
        let x = operator_of(&s, &asg).unwrap();
        worst = worst.max(is_valid_test_pair(&x).unwrap().defect);
    }
    check(worst <= 1e-9, format!("max completeness defect {worst:.2e} over 100 pairs"))
}

fn history_states(reports: &[VerificationReport]) -> Outcome {
    let (_, fidelity) = worst(reports, &["history state fidelity", "stage-one agreement"]);
    let both = reports.iter().all(|r| r.paths.len() == 2);
    let agreement = reports
        .iter()
        .all(|r| r.checks.iter().any(|c| c.name.starts_with("stage-one agreement")));
    check(
        both && agreement && fidelity >= 1.0 - 1e-9,
        format!("{} instances, both paths, min fidelity 1 - {:.2e}", reports.len(), 1.0 - fidelity),
    )
}

fn end_to_end(reports: &[VerificationReport]) -> Outcome {
    let (delta, fidelity) = worst(
        reports,
        &["trajectory completeness", "success probability", "conditional P(true)", "residual state fidelity"],
    );
    let residuals = reports
        .iter()
        .all(|r| r.checks.iter().any(|c| c.name.starts_with("residual state fidelity")));
    check(
        residuals && reports.iter().all(|r| r.pass) && delta <= 1e-9 && fidelity >= 1.0 - 1e-9,
        format!("max delta {delta:.2e}, min residual fidelity 1 - {:.2e}", 1.0 - fidelity),
    )
}

fn worked() -> Outcome {
    let inst = worked_example();
    let report = exact_report(&inst);
    let success = overall_success_probability(&inst.prop, &inst.psi, &inst.asg).unwrap();
    let cond = conditional_distribution(&inst.prop, &inst.psi, &inst.asg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let random = Instance {
        prop: inst.prop.clone(),
        asg: random_rank_one_assignment(&mut rng),
        psi: random_ket(&mut rng, 2),
    };
    let random_report = exact_report(&random);
    check(
        report.pass && random_report.pass && (success - 1.0 / 9.0).abs() <= 1e-9 && cond.p_true.abs() <= 1e-9,
        format!("success {success:.12}, P(true) {:.1e}, random rank-1 run passes", cond.p_true),
    )
}

fn classical_reduction() -> Outcome {
    let labels = ["a", "b", "c"];
    let props = all_props(3, &labels);
    let mut worst: f64 = 0.0;
    let mut evaluated = 0usize;
    for masks in 0..64usize {
        let mut asg = ElementaryAssignment::new(2).unwrap();
        let mut bits = Vec::new();
        for (i, name) in labels.iter().enumerate() {
            let m = (masks >> (2 * i)) & 3;
            bits.push((lbl(name), [m & 1 == 1, m & 2 == 2]));
            let diag = [(m & 1) as f64, (m >> 1) as f64];
            asg.insert_projector(lbl(name), ComplexMatrix::from_real(&[&[diag[0], 0.0], &[0.0, diag[1]]]))
                .unwrap();
        }
        for k in 0..2 {
            let psi = StateKet::basis(2, k);
            let truth = bits.iter().map(|(l, v)| (l.clone(), v[k])).collect();
            for prop in &props {
                let value = prop.classical_eval(&truth).unwrap();
                let cd = conditional_distribution(prop, &psi, &asg).unwrap();
                worst = worst.max((cd.p_true - if value { 1.0 } else { 0.0 }).abs());
                evaluated += 1;
            }
        }
    }
    check(
        worst <= 1e-12,
        format!("{} propositions, {evaluated} evaluations, max delta {worst:.1e}", props.len()),
    )
}

fn sampled(all: &[Instance]) -> Outcome {
    let mut subjects = vec![worked_example()];
    subjects.extend(all.iter().step_by(7).map(|i| Instance {
        prop: i.prop.clone(),
        asg: i.asg.clone(),
        psi: i.psi.clone(),
    }));
    let mut worst_z: f64 = 0.0;
    let mut min_p: f64 = 1.0;
    let mut min_geo: f64 = 1.0;
    for (k, inst) in subjects.iter().enumerate() {
        let opts = VerifyOptions {
            mode: VerifyMode::Sampled {
                shots: SHOTS,
                seed: 100 + k as u64,
            },
            paths: Vec::new(),
            jobs: 0,
        };
        let report = verify(&inst.prop, &inst.asg, &inst.psi, &opts).unwrap();
        for c in &report.checks {
            match c.kind {
                seqlogic::harness::CheckKind::ZScore => worst_z = worst_z.max(c.value.abs()),
                seqlogic::harness::CheckKind::ChiSquare => min_p = min_p.min(c.value),
                _ => {}
            }
        }
        let success = overall_success_probability(&inst.prop, &inst.psi, &inst.asg).unwrap();
        let circ = compile(&inst.prop, &inst.asg, PrepPath::Teleport).unwrap();
        let counts = restart_counts(
            &circ,
            &inst.psi,
            RESTART_TRIALS,
            500 + k as u64,
            default_max_attempts(Some(success)),
            0,
        )
        .unwrap();
        min_geo = min_geo.min(geometric_fit(&counts, success).p_value);
    }
    check(
        worst_z <= 5.0 && min_p > CHI_SQUARE_P_MIN && min_geo > CHI_SQUARE_P_MIN,
        format!(
            "{} instances: max |z| {worst_z:.2}, min chi-square p {min_p:.3}, min geometric p {min_geo:.3}",
            subjects.len()
        ),
    )
}

fn determinism() -> Outcome {
    let inst = worked_example();
    let circ = compile(&inst.prop, &inst.asg, PrepPath::Teleport).unwrap();
    let stats = |jobs| {
        let opts = EstimateOptions {
            jobs,
            retry: Some(900),
            ..EstimateOptions::new(SHOTS, 42)
        };
        serde_json::to_string(&estimate(&circ, &inst.psi, opts).unwrap()).unwrap()
    };
    let report = |jobs| {
        let opts = VerifyOptions {
            mode: VerifyMode::Sampled { shots: SHOTS, seed: 42 },
            paths: Vec::new(),
            jobs,
        };
        serde_json::to_string(&verify(&inst.prop, &inst.asg, &inst.psi, &opts).unwrap()).unwrap()
    };
    let serial = stats(1);
    let same = serial == stats(1) && serial == stats(4);
    let serial_report = report(1);
    let same_report = serial_report == report(1) && serial_report == report(4);
    check(
        same && same_report,
        format!("estimate {} bytes, report {} bytes, identical for jobs 1 and 4", serial.len(), serial_report.len()),
    )
}

fn main() -> ExitCode {
    let all = instances();
    let start = Instant::now();
    let reports: Vec<_> = all.iter().map(exact_report).collect();
    let criteria: Vec<Criterion> = vec![
        ("generalized measurement completeness", Box::new(completeness)),
        ("coherent AND obstruction", Box::new(obstruction)),
        ("coarse-grained tests need commuting pairs", Box::new(coarse_grained_pairs)),
        ("sequential XOR is physical", Box::new(xor_physicality)),
        ("history state after preparation", Box::new(|| history_states(&reports))),
        ("end-to-end exactness", Box::new(|| end_to_end(&reports))),
        ("worked example", Box::new(worked)),
        ("classical reduction", Box::new(classical_reduction)),
        ("sampled consistency", Box::new(|| sampled(&all))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (status, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {:>2} {name}: {detail} [{:.1}s]", i + 1, t.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
