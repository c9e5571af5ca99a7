//! Restart-on-failure execution, shot statistics, and verification of the
//! simulator against the operator oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::circuit::{compile, validate, Circuit, PrepPath};
use crate::error::{Error, Result};
use crate::linalg::{fidelity, StateKet};
use crate::oracle::{
    branch_operator, conditional_distribution, history_state_reference, overall_success_probability,
    ElementaryAssignment,
};
use crate::prop::Proposition;
use crate::seeding::{derive_seed, stream_rng};
use crate::sim::{enumerate_trajectories, explore, run, run_with_rng, RunOutcome};

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const EXACT_TOL: f64 = 1e-9;
pub const FIDELITY_TOL: f64 = 1e-9;
pub const Z_MAX: f64 = 5.0;
pub const CHI_SQUARE_P_MIN: f64 = 1e-3;
pub const DEFAULT_SHOTS: u64 = 10_000;

/// 100 × ⌈1/p⌉ when the success probability is known, else 10⁴.
pub fn default_max_attempts(expected_success: Option<f64>) -> u64 {
    match expected_success {
        Some(p) if p > 0.0 => 100 * (1.0 / p).ceil() as u64,
        _ => 10_000,
    }
}

/// Repeats the protocol from scratch until a run avoids every failure
/// outcome. Attempt `k` samples from stream `k` of `seed`.
pub fn run_until_success(c: &Circuit, psi: &StateKet, seed: u64, max_attempts: u64) -> Result<(RunOutcome, u64)> {
    if max_attempts == 0 {
        return Err(Error::InvalidArgument("max_attempts must be at least 1".into()));
    }
    for attempt in 0..max_attempts {
        let outcome = run_with_rng(c, psi, &mut stream_rng(seed, attempt))?;
        if outcome.success {
            return Ok((outcome, attempt + 1));
        }
    }
    Err(Error::ExhaustedAttempts {
        attempts: max_attempts,
        failure_rate: 1.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub format_version: u32,
    pub seed: u64,
    pub shots: u64,
    /// Restart cap per shot when running with restarts.
    pub retry: Option<u64>,
    pub attempts: u64,
    pub successes: u64,
    pub true_count: u64,
    pub false_count: u64,
    /// successes / attempts
    pub success_rate: f64,
    pub success_rate_se: f64,
    /// true_count / successes, absent when nothing succeeded.
    pub p_true: Option<f64>,
    pub p_true_se: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct EstimateOptions {
    pub shots: u64,
    pub seed: u64,
    /// Per-shot restart cap; `None` runs each shot once.
    pub retry: Option<u64>,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl EstimateOptions {
    pub fn new(shots: u64, seed: u64) -> Self {
        Self {
            shots,
            seed,
            retry: None,
            jobs: 1,
        }
    }
}

struct ShotResult {
    attempts: u64,
    truth: Option<bool>,
}

fn one_shot(c: &Circuit, psi: &StateKet, seed: u64, retry: Option<u64>) -> Result<ShotResult> {
    match retry {
        None => {
            let r = run(c, psi, seed)?;
            Ok(ShotResult {
                attempts: 1,
                truth: r.truth_value,
            })
        }
        Some(cap) => match run_until_success(c, psi, seed, cap) {
            Ok((r, attempts)) => Ok(ShotResult {
                attempts,
                truth: r.truth_value,
            }),
            Err(Error::ExhaustedAttempts { attempts, .. }) => Ok(ShotResult { attempts, truth: None }),
            Err(e) => Err(e),
        },
    }
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn per_shot<T: Send>(shots: u64, jobs: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    if jobs == 1 {
        return (0..shots).map(f).collect();
    }
    in_pool(jobs, || (0..shots).into_par_iter().map(f).collect::<Result<Vec<T>>>())?
}

/// Runs `shots` independent shots; shot `i` uses seed `derive_seed(seed, i)`.
/// Results are aggregated in shot order, so the statistics do not depend on
/// `jobs`.
pub fn estimate(c: &Circuit, psi: &StateKet, opts: EstimateOptions) -> Result<TrialStats> {
    if opts.shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let results = per_shot(opts.shots, opts.jobs, |i| {
        one_shot(c, psi, derive_seed(opts.seed, i), opts.retry)
    })?;
    let attempts: u64 = results.iter().map(|r| r.attempts).sum();
    let true_count = results.iter().filter(|r| r.truth == Some(true)).count() as u64;
    let false_count = results.iter().filter(|r| r.truth == Some(false)).count() as u64;
    let successes = true_count + false_count;
    let rate = successes as f64 / attempts as f64;
    let p_true = (successes > 0).then(|| true_count as f64 / successes as f64);
    Ok(TrialStats {
        format_version: REPORT_FORMAT_VERSION,
        seed: opts.seed,
        shots: opts.shots,
        retry: opts.retry,
        attempts,
        successes,
        true_count,
        false_count,
        success_rate: rate,
        success_rate_se: (rate * (1.0 - rate) / attempts as f64).sqrt(),
        p_true,
        p_true_se: p_true.map(|q| (q * (1.0 - q) / successes as f64).sqrt()),
    })
}

/// Attempts needed by each of `trials` restart loops; trial `i` uses seed
/// `derive_seed(seed, i)`.
pub fn restart_counts(c: &Circuit, psi: &StateKet, trials: u64, seed: u64, max_attempts: u64, jobs: usize) -> Result<Vec<u64>> {
    per_shot(trials, jobs, |i| {
        run_until_success(c, psi, derive_seed(seed, i), max_attempts).map(|(_, n)| n)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit. Categories with expected count below 5 are
/// pooled; an observation in a zero-probability category gives p = 0.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> ChiSquareTest {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    if observed.iter().zip(probs).any(|(&o, &p)| p <= 0.0 && o > 0) {
        return ChiSquareTest {
            statistic: f64::INFINITY,
            dof: 0,
            p_value: 0.0,
        };
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            continue;
        }
        let e = p * nf;
        if e < 5.0 {
            pooled.0 += o as f64;
            pooled.1 += e;
        } else {
            bins.push((o as f64, e));
        }
    }
    if pooled.1 > 0.0 {
        if pooled.1 < 5.0 && !bins.is_empty() {
            // fold the pooled remainder into the smallest regular bin
            let k = (0..bins.len())
                .min_by(|&a, &b| bins[a].1.total_cmp(&bins[b].1))
                .expect("non-empty");
            bins[k].0 += pooled.0;
            bins[k].1 += pooled.1;
        } else {
            bins.push(pooled);
        }
    }
    if bins.len() < 2 {
        return ChiSquareTest {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        };
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let p_value = ChiSquared::new(dof as f64).expect("positive dof").sf(statistic);
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}

/// Fits attempt counts to a geometric law with success probability `p`
/// (support 1, 2, ...). The last bin collects the tail.
pub fn geometric_fit(counts: &[u64], p: f64) -> ChiSquareTest {
    let max = counts.iter().copied().max().unwrap_or(1) as usize;
    let mut observed = vec![0u64; max + 1];
    for &k in counts {
        observed[k as usize - 1] += 1;
    }
    let mut probs: Vec<f64> = (0..max).map(|k| p * (1.0 - p).powi(k as i32)).collect();
    // tail beyond the largest observed count
    probs.push((1.0 - p).powi(max as i32));
    chi_square_gof(&observed, &probs)
}

/// Two-sided z-score of an observed rate. A degenerate expected rate gives 0
/// on an exact match and infinity otherwise.
pub fn z_score(observed: f64, expected: f64, n: u64) -> f64 {
    let var = expected * (1.0 - expected) / n as f64;
    if var <= 0.0 {
        return if (observed - expected).abs() <= 1e-12 { 0.0 } else { f64::INFINITY };
    }
    (observed - expected) / var.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// |simulated − oracle| must not exceed the tolerance.
    Delta,
    /// Fidelity must be at least 1 − tolerance.
    Fidelity,
    /// |z| must not exceed the tolerance.
    ZScore,
    /// p-value must be at least the tolerance.
    ChiSquare,
    /// Count of static violations; must be zero.
    Static,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub path: Option<PrepPath>,
    pub kind: CheckKind,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, path: Option<PrepPath>, kind: CheckKind, value: f64, tolerance: f64) -> Self {
        let pass = match kind {
            CheckKind::Delta | CheckKind::ZScore => value.abs() <= tolerance,
            CheckKind::Fidelity => value >= 1.0 - tolerance,
            CheckKind::ChiSquare => value >= tolerance,
            CheckKind::Static => value == 0.0,
        };
        Self {
            name: name.into(),
            path,
            kind,
            value,
            tolerance,
            pass,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub exact: f64,
    pub fidelity: f64,
    pub z_max: f64,
    pub chi_square_p_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exact: EXACT_TOL,
            fidelity: FIDELITY_TOL,
            z_max: Z_MAX,
            chi_square_p_min: CHI_SQUARE_P_MIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub format_version: u32,
    pub proposition: String,
    pub mode: VerifyMode,
    pub paths: Vec<PrepPath>,
    pub tolerances: Tolerances,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VerifyMode {
    Exact,
    Sampled { shots: u64, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub mode: VerifyMode,
    /// Paths to check; empty means every path the assignment supports.
    pub paths: Vec<PrepPath>,
    pub jobs: usize,
}

impl VerifyOptions {
    pub fn exact() -> Self {
        Self {
            mode: VerifyMode::Exact,
            paths: Vec::new(),
            jobs: 1,
        }
    }
}

/// Whether the teleport preparation applies: qubit system and a rank-one
/// projector for every leaf.
pub fn teleport_supported(p: &Proposition, asg: &ElementaryAssignment) -> bool {
    asg.system_dim() == 2
        && p
            .leaf_labels()
            .iter()
            .all(|l| matches!(asg.rank_one_state(l), Ok(Some(_))))
}

/// Checks the compiled protocol against the oracle on every requested path.
/// Failures are recorded in the report, not returned as errors; errors are
/// reserved for inputs that cannot be compiled at all.
pub fn verify(p: &Proposition, asg: &ElementaryAssignment, psi: &StateKet, opts: &VerifyOptions) -> Result<VerificationReport> {
    let p = p.canonicalize();
    let paths = if opts.paths.is_empty() {
        let mut v = vec![PrepPath::Direct];
        if teleport_supported(&p, asg) {
            v.insert(0, PrepPath::Teleport);
        }
        v
    } else {
        opts.paths.clone()
    };
    let tol = Tolerances::default();
    let expected_success = overall_success_probability(&p, psi, asg)?;
    let cond = conditional_distribution(&p, psi, asg)?;

    let mut checks = Vec::new();
    let mut stage1_states: Vec<(PrepPath, Vec<StateKet>)> = Vec::new();
    for &path in &paths {
        let c = compile(&p, asg, path)?;
        let at = Some(path);
        checks.push(Check::new("static validation", at, CheckKind::Static, validate(&c).len() as f64, 0.0));
        match opts.mode {
            VerifyMode::Exact => {
                let states = exact_checks(&c, &p, asg, psi, expected_success, cond.p_true, &tol, &mut checks)?;
                stage1_states.push((path, states));
            }
            VerifyMode::Sampled { shots, seed } => {
                let stats = estimate(
                    &c,
                    psi,
                    EstimateOptions {
                        shots,
                        seed,
                        retry: None,
                        jobs: opts.jobs,
                    },
                )?;
                checks.push(Check::new(
                    "success rate z-score",
                    at,
                    CheckKind::ZScore,
                    z_score(stats.success_rate, expected_success, stats.attempts),
                    tol.z_max,
                ));
                if let Some(q) = stats.p_true {
                    checks.push(Check::new(
                        "conditional P(true) z-score",
                        at,
                        CheckKind::ZScore,
                        z_score(q, cond.p_true, stats.successes),
                        tol.z_max,
                    ));
                }
                let observed = [stats.attempts - stats.successes, stats.false_count, stats.true_count];
                let probs = [
                    1.0 - expected_success,
                    expected_success * cond.p_false,
                    expected_success * cond.p_true,
                ];
                checks.push(Check::new(
                    "outcome chi-square p-value",
                    at,
                    CheckKind::ChiSquare,
                    chi_square_gof(&observed, &probs).p_value,
                    tol.chi_square_p_min,
                ));
            }
        }
    }

    if let [(pa, a), (pb, b)] = &stage1_states[..] {
        // the direct path has exactly one stage-one branch
        let (many, single) = if a.len() >= b.len() { (a, &b[0]) } else { (b, &a[0]) };
        let worst = many.iter().map(|s| fidelity(s, single)).fold(1.0, f64::min);
        checks.push(Check::new(
            format!("stage-one agreement {pa} vs {pb}"),
            None,
            CheckKind::Fidelity,
            worst,
            tol.fidelity,
        ));
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        format_version: REPORT_FORMAT_VERSION,
        proposition: p.to_string(),
        mode: opts.mode,
        paths,
        tolerances: tol,
        checks,
        pass,
    })
}

/// Exhaustive trajectory checks for one compiled path. Returns the
/// post-preparation state of every stage-one branch.
#[allow(clippy::too_many_arguments)]
fn exact_checks(
    c: &Circuit,
    p: &Proposition,
    asg: &ElementaryAssignment,
    psi: &StateKet,
    expected_success: f64,
    expected_true: f64,
    tol: &Tolerances,
    checks: &mut Vec<Check>,
) -> Result<Vec<StateKet>> {
    let at = Some(c.path);
    let trajectories = enumerate_trajectories(c, psi)?;
    let total: f64 = trajectories.iter().map(|t| t.probability).sum();
    checks.push(Check::new("trajectory completeness", at, CheckKind::Delta, total - 1.0, tol.exact));

    let success: f64 = trajectories.iter().filter(|t| t.success).map(|t| t.probability).sum();
    let success_true: f64 = trajectories
        .iter()
        .filter(|t| t.truth_value == Some(true))
        .map(|t| t.probability)
        .sum();
    checks.push(Check::new(
        "success probability",
        at,
        CheckKind::Delta,
        success - expected_success,
        tol.exact,
    ));
    if success > 0.0 {
        checks.push(Check::new(
            "conditional P(true)",
            at,
            CheckKind::Delta,
            success_true / success - expected_true,
            tol.exact,
        ));
    }

    for value in [true, false] {
        let target = branch_operator(p, value, asg)?.apply(psi)?;
        let worst = trajectories
            .iter()
            .filter(|t| t.truth_value == Some(value))
            .filter_map(|t| t.residual_system_state.as_ref())
            .map(|s| fidelity(s, &target))
            .reduce(f64::min);
        if let Some(worst) = worst {
            checks.push(Check::new(
                format!("residual state fidelity ({value})"),
                at,
                CheckKind::Fidelity,
                worst,
                tol.fidelity,
            ));
        }
    }

    let reference = history_state_reference(&p.leaf_labels(), psi, asg)?;
    let branches = explore(c, psi, c.stage1_len)?;
    let states: Vec<StateKet> = branches.iter().map(|b| b.state.to_kron()).collect();
    let worst = states.iter().map(|s| fidelity(s, &reference)).fold(1.0, f64::min);
    checks.push(Check::new(
        "history state fidelity",
        at,
        CheckKind::Fidelity,
        worst,
        tol.fidelity,
    ));
    Ok(states)
}
