use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use seqlogic::circuit::{self, build_coherent_and_pair, validate};
use seqlogic::harness::{self, default_max_attempts, EstimateOptions, VerifyOptions};
use seqlogic::io::matrix_to_pairs;
use seqlogic::linalg::ComplexMatrix;
use seqlogic::oracle::{
    branch_norms, coherent_and_obstruction, conditional_distribution, is_valid_test_pair, operator_of,
    overall_success_probability,
};
use seqlogic::{AssignmentFile, ElementaryAssignment, Error, PrepPath, Proposition, StateKet, VerifyMode};

pub const OUTPUT_FORMAT_VERSION: u32 = 1;

pub struct Output {
    pub json: Value,
    pub text: String,
    pub warnings: Vec<String>,
    pub status: u8,
}

impl Output {
    fn ok(json: Value, text: String) -> Self {
        Self {
            json,
            text,
            warnings: Vec::new(),
            status: 0,
        }
    }
}

pub struct Failure {
    pub status: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::ExhaustedAttempts { .. } => 3,
            _ => 2,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

fn load(prop: &str, file: &Path) -> Result<(Proposition, ElementaryAssignment, StateKet), Failure> {
    let p = Proposition::parse(prop)?;
    let text = std::fs::read_to_string(file).map_err(|e| Failure {
        status: 2,
        message: format!("{}: {e}", file.display()),
    })?;
    let (asg, psi) = AssignmentFile::from_json(&text)?.load_for(&p)?;
    Ok((p, asg, psi))
}

fn tree(p: &Proposition) -> Value {
    match p {
        Proposition::Elementary(l) => json!({ "op": "elementary", "label": l.as_str() }),
        Proposition::Not(a) => json!({ "op": "not", "operand": tree(a) }),
        Proposition::SeqAnd(a, b) => json!({ "op": "seq_and", "left": tree(a), "right": tree(b) }),
        Proposition::SeqXor(a, b) => json!({ "op": "seq_xor", "left": tree(a), "right": tree(b) }),
    }
}

fn tree_text(p: &Proposition, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match p {
        Proposition::Elementary(l) => {
            let _ = writeln!(out, "{pad}{l}");
        }
        Proposition::Not(a) => {
            let _ = writeln!(out, "{pad}Not");
            tree_text(a, depth + 1, out);
        }
        Proposition::SeqAnd(a, b) | Proposition::SeqXor(a, b) => {
            let op = if matches!(p, Proposition::SeqAnd(..)) { "SeqAnd" } else { "SeqXor" };
            let _ = writeln!(out, "{pad}{op}");
            tree_text(a, depth + 1, out);
            tree_text(b, depth + 1, out);
        }
    }
}

const XOR_WARNING: &str = "sequential XOR is evaluated by the oracle only and cannot be compiled";

pub fn parse(text: &str) -> Result<Output, Failure> {
    let p = Proposition::parse(text)?;
    let canonical = p.canonicalize();
    let leaves = p.leaf_labels().len();
    let ands = p.count_seq_ands();
    let json = json!({
        "format_version": OUTPUT_FORMAT_VERSION,
        "input": text,
        "canonical": canonical.to_string(),
        "tree": tree(&canonical),
        "leaves": leaves,
        "ands": ands,
        "nots": p.count_nots(),
        "contains_xor": p.contains_xor(),
    });
    let mut out = String::new();
    tree_text(&canonical, 0, &mut out);
    let _ = writeln!(out, "canonical {canonical}");
    let _ = writeln!(out, "leaves={leaves} ands={ands} nots={}", p.count_nots());
    let mut o = Output::ok(json, out);
    if p.contains_xor() {
        o.warnings.push(XOR_WARNING.into());
    }
    Ok(o)
}

fn xor_subterms<'a>(p: &'a Proposition, out: &mut Vec<&'a Proposition>) {
    match p {
        Proposition::Elementary(_) => {}
        Proposition::Not(a) => xor_subterms(a, out),
        Proposition::SeqAnd(a, b) => {
            xor_subterms(a, out);
            xor_subterms(b, out);
        }
        Proposition::SeqXor(a, b) => {
            out.push(p);
            xor_subterms(a, out);
            xor_subterms(b, out);
        }
    }
}

pub fn check(prop: &str, file: &Path) -> Result<Output, Failure> {
    let (p, asg, _) = load(prop, file)?;
    let p = p.canonicalize();
    let direct = is_valid_test_pair(&operator_of(&p, &asg)?)?;
    let obstruction = coherent_and_obstruction();
    let (ms, mf) = build_coherent_and_pair();
    let completeness = (&(&ms.adjoint() * &ms) + &(&mf.adjoint() * &mf)).max_abs_diff(&ComplexMatrix::identity(4));
    let mut xors = Vec::new();
    xor_subterms(&p, &mut xors);
    let xor_checks = xors
        .iter()
        .map(|x| {
            let r = is_valid_test_pair(&operator_of(x, &asg)?)?;
            Ok(json!({ "subterm": x.to_string(), "valid": r.valid, "defect": r.defect }))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let conclusion = if direct.valid {
        "valid direct two-outcome test"
    } else if p.contains_xor() {
        "no direct test; propositions with sequential XOR are not compiled"
    } else {
        "no direct test; use the nondeterministic protocol"
    };
    let json = json!({
        "format_version": OUTPUT_FORMAT_VERSION,
        "proposition": p.to_string(),
        "direct_test": { "valid": direct.valid, "defect": direct.defect },
        "coherent_and": { "max_eigenvalue": obstruction, "exceeds_one": obstruction > 1.0 + 1e-9 },
        "and_measurement_completeness_defect": completeness,
        "xor": xor_checks,
        "conclusion": conclusion,
    });
    let mut out = String::new();
    let _ = writeln!(out, "proposition {p}");
    let _ = writeln!(out, "direct test valid={} defect={:.3e}", direct.valid, direct.defect);
    let _ = writeln!(out, "coherent AND largest eigenvalue of A†A {obstruction:.12}");
    let _ = writeln!(out, "AND measurement completeness defect {completeness:.3e}");
    for x in &xor_checks {
        let _ = writeln!(out, "xor {} valid={} defect={:.3e}", x["subterm"].as_str().unwrap_or(""), x["valid"], x["defect"].as_f64().unwrap_or(f64::NAN));
    }
    let _ = writeln!(out, "{conclusion}");
    Ok(Output::ok(json, out))
}

pub fn compile(prop: &str, file: &Path, path: PrepPath) -> Result<Output, Failure> {
    let (p, asg, _) = load(prop, file)?;
    let c = circuit::compile(&p, &asg, path)?;
    let violations: Vec<String> = validate(&c).iter().map(|v| v.to_string()).collect();
    let dump = circuit::dump(&c);
    let json = json!({
        "format_version": OUTPUT_FORMAT_VERSION,
        "proposition": c.proposition.to_string(),
        "path": path,
        "registers": c.layout.registers.len(),
        "instructions": c.instructions.len(),
        "violations": violations,
        "dump": dump,
    });
    let mut o = Output::ok(json, dump);
    if !violations.is_empty() {
        o.warnings.extend(violations);
        o.status = 1;
    }
    Ok(o)
}

#[derive(Serialize)]
struct RunReport {
    format_version: u32,
    proposition: String,
    path: PrepPath,
    expected_success: f64,
    stats: seqlogic::TrialStats,
}

pub fn run(
    prop: &str,
    file: &Path,
    path: PrepPath,
    shots: u64,
    seed: u64,
    retry: Option<Option<u64>>,
    jobs: usize,
) -> Result<Output, Failure> {
    let (p, asg, psi) = load(prop, file)?;
    let c = circuit::compile(&p, &asg, path)?;
    let expected = overall_success_probability(&c.proposition, &psi, &asg)?;
    let retry = retry.map(|cap| cap.unwrap_or_else(|| default_max_attempts(Some(expected))));
    let stats = harness::estimate(
        &c,
        &psi,
        EstimateOptions {
            shots,
            seed,
            retry,
            jobs,
        },
    )?;
    let exhausted = retry.is_some() && stats.successes < stats.shots;
    let mut text = String::new();
    let _ = writeln!(text, "proposition {} path {path} seed {seed}", c.proposition);
    let _ = writeln!(text, "shots {} attempts {} successes {}", stats.shots, stats.attempts, stats.successes);
    let _ = writeln!(
        text,
        "success rate {:.6} ± {:.6} (exact {expected:.6})",
        stats.success_rate, stats.success_rate_se
    );
    match (stats.p_true, stats.p_true_se) {
        (Some(q), Some(se)) => {
            let _ = writeln!(text, "P(true | success) {q:.6} ± {se:.6}");
        }
        _ => {
            let _ = writeln!(text, "P(true | success) undefined");
        }
    }
    let report = RunReport {
        format_version: OUTPUT_FORMAT_VERSION,
        proposition: c.proposition.to_string(),
        path,
        expected_success: expected,
        stats,
    };
    let mut o = Output::ok(serde_json::to_value(&report).expect("serializable"), text);
    if exhausted {
        o.warnings.push(format!(
            "{} shots exhausted their restart budget",
            report.stats.shots - report.stats.successes
        ));
        o.status = 3;
    }
    Ok(o)
}

pub fn verify(prop: &str, file: &Path, mode: VerifyMode, path: Option<PrepPath>, jobs: usize) -> Result<Output, Failure> {
    let (p, asg, psi) = load(prop, file)?;
    let opts = VerifyOptions {
        mode,
        paths: path.into_iter().collect(),
        jobs,
    };
    let report = harness::verify(&p, &asg, &psi, &opts)?;
    let mut text = String::new();
    let _ = writeln!(text, "proposition {}", report.proposition);
    if let VerifyMode::Sampled { shots, seed } = report.mode {
        let _ = writeln!(text, "sampled shots {shots} seed {seed}");
    }
    for c in &report.checks {
        let at = c.path.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            text,
            "{} {at:<8} {}: {:.6e} (tolerance {:e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    let _ = writeln!(text, "{}", if report.pass { "verification passed" } else { "verification FAILED" });
    let status = if report.pass { 0 } else { 1 };
    let mut o = Output::ok(serde_json::to_value(&report).expect("serializable"), text);
    o.status = status;
    Ok(o)
}

pub fn analytic(prop: &str, file: &Path) -> Result<Output, Failure> {
    let (p, asg, psi) = load(prop, file)?;
    let p = p.canonicalize();
    let op = operator_of(&p, &asg)?;
    let w = branch_norms(&p, &psi, &asg)?;
    let cond = conditional_distribution(&p, &psi, &asg)?;
    let success = if p.contains_xor() {
        None
    } else {
        Some(overall_success_probability(&p, &psi, &asg)?)
    };
    let json = json!({
        "format_version": OUTPUT_FORMAT_VERSION,
        "proposition": p.to_string(),
        "ands": p.count_seq_ands(),
        "branch_norms": { "true": w.w_true, "false": w.w_false },
        "conditional": { "true": cond.p_true, "false": cond.p_false },
        "success_probability": success,
        "operator": matrix_to_pairs(&op),
    });
    let mut text = String::new();
    let _ = writeln!(text, "proposition {p}");
    let _ = writeln!(text, "branch norms w1={:.12} w0={:.12}", w.w_true, w.w_false);
    let _ = writeln!(text, "conditional P(true)={:.12} P(false)={:.12}", cond.p_true, cond.p_false);
    match success {
        Some(s) => {
            let _ = writeln!(text, "success probability {s:.12}");
        }
        None => {
            let _ = writeln!(text, "success probability n/a (sequential XOR)");
        }
    }
    let _ = writeln!(text, "operator");
    for row in matrix_to_pairs(&op) {
        let cells: Vec<String> = row.iter().map(|[re, im]| format!("{re:+.6}{im:+.6}i")).collect();
        let _ = writeln!(text, "  {}", cells.join(" "));
    }
    let mut o = Output::ok(json, text);
    if p.contains_xor() {
        o.warnings.push(XOR_WARNING.into());
    }
    Ok(o)
}
