//! Dense statevector execution of compiled circuits.
//!
//! Amplitudes are stored over the live registers only. The flat index is
//! little-endian in register order: the first live register varies fastest
//! and the system register (always last in a compiled layout) slowest.
//! [`SimState::to_kron`] converts to the conventional tensor-product order
//! used by the oracle.
//!
//! Every measurement renormalizes the amplitudes; the probability of the
//! realized trajectory accumulates in [`SimState::probability`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, Instruction, Layout, SlotId, MAX_QUBIT_EQUIVALENTS};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, StateKet, ALGEBRA_TOL, C64, ZERO};

/// Branches below this probability are treated as impossible.
pub const PRUNE_TOL: f64 = 1e-12;
pub const AMPLITUDE_DUMP_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    dims: Vec<usize>,
    live: Vec<usize>,
    amps: Vec<C64>,
    probability: f64,
    outcomes: BTreeMap<SlotId, usize>,
}

/// How a measurement picks its outcome.
pub enum Chooser<'a> {
    Sample(&'a mut ChaCha8Rng),
    Forced(usize),
}

impl SimState {
    /// Builds the initial state of a layout with `psi` on the input register.
    pub fn initial(layout: &Layout, psi: &StateKet) -> Result<Self> {
        let dims: Vec<usize> = layout.registers.iter().map(|r| r.dim).collect();
        let needed: f64 = dims.iter().map(|&d| (d as f64).log2()).sum();
        if needed > MAX_QUBIT_EQUIVALENTS as f64 + 1e-9 {
            return Err(Error::TooLarge {
                needed,
                limit: MAX_QUBIT_EQUIVALENTS,
            });
        }
        let input_dim = dims[layout.input];
        if psi.dim() != input_dim {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                found: psi.dim(),
            });
        }
        psi.require_normalized()?;

        let mut partner = vec![None; dims.len()];
        for &(a, b) in &layout.bell_pairs {
            partner[a] = Some(b);
            partner[b] = Some(a);
        }
        let bell = std::f64::consts::FRAC_1_SQRT_2;
        let total: usize = dims.iter().product();
        let mut amps = vec![ZERO; total];
        let mut digits = vec![0usize; dims.len()];
        for amp in amps.iter_mut() {
            let mut v = C64::new(1.0, 0.0);
            for (r, &dr) in digits.iter().enumerate() {
                if r == layout.input {
                    v *= psi[dr];
                } else if let Some(q) = partner[r] {
                    if dr != digits[q] {
                        v = ZERO;
                    } else if r < q {
                        v *= bell;
                    }
                } else if dr != 0 {
                    v = ZERO;
                }
                if v == ZERO {
                    break;
                }
            }
            *amp = v;
            increment(&mut digits, &dims);
        }
        Ok(Self {
            live: (0..dims.len()).collect(),
            dims,
            amps,
            probability: 1.0,
            outcomes: BTreeMap::new(),
        })
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn outcomes(&self) -> &BTreeMap<SlotId, usize> {
        &self.outcomes
    }

    pub fn live_registers(&self) -> &[usize] {
        &self.live
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    fn position(&self, reg: usize) -> Result<usize> {
        self.live
            .iter()
            .position(|&r| r == reg)
            .ok_or(Error::DeadRegister(reg))
    }

    fn stride(&self, pos: usize) -> usize {
        self.live[..pos].iter().map(|&r| self.dims[r]).product()
    }

    /// Strides and dimensions of `targets`, checked for liveness and distinctness.
    fn target_geometry(&self, targets: &[usize]) -> Result<Vec<(usize, usize)>> {
        let mut geo = Vec::with_capacity(targets.len());
        for (k, &t) in targets.iter().enumerate() {
            if targets[..k].contains(&t) {
                return Err(Error::InvalidArgument(format!("register {t} targeted twice")));
            }
            let pos = self.position(t)?;
            geo.push((self.stride(pos), self.dims[t]));
        }
        Ok(geo)
    }

    /// M applied to the target subspace; the first target is the most
    /// significant factor of M's basis. Returns unnormalized amplitudes.
    fn apply_operator(&self, targets: &[usize], m: &ComplexMatrix) -> Result<Vec<C64>> {
        let geo = self.target_geometry(targets)?;
        let sub: usize = geo.iter().map(|g| g.1).product();
        if m.rows() != sub || m.cols() != sub {
            return Err(Error::DimensionMismatch {
                expected: sub,
                found: m.rows(),
            });
        }
        // offset of each subspace basis index within the flat vector
        let offsets: Vec<usize> = (0..sub)
            .map(|mut k| {
                let mut off = 0;
                for &(stride, dim) in geo.iter().rev() {
                    off += (k % dim) * stride;
                    k /= dim;
                }
                off
            })
            .collect();
        let mut out = vec![ZERO; self.amps.len()];
        let mut local = vec![ZERO; sub];
        for base in 0..self.amps.len() {
            if geo.iter().any(|&(stride, dim)| (base / stride) % dim != 0) {
                continue;
            }
            for (k, &off) in offsets.iter().enumerate() {
                local[k] = self.amps[base + off];
            }
            for (i, &off) in offsets.iter().enumerate() {
                out[base + off] = m.row(i).iter().zip(&local).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }

    pub fn apply_unitary(&mut self, targets: &[usize], u: &ComplexMatrix) -> Result<()> {
        let defect = u.unitarity_defect();
        if defect > ALGEBRA_TOL {
            return Err(Error::NotUnitary { defect });
        }
        self.amps = self.apply_operator(targets, u)?;
        Ok(())
    }

    /// Probabilities and unnormalized post-measurement amplitudes for every
    /// outcome.
    fn branches(&self, targets: &[usize], ops: &[ComplexMatrix]) -> Result<Vec<(f64, Vec<C64>)>> {
        ops.iter()
            .map(|m| {
                let v = self.apply_operator(targets, m)?;
                let p = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
                Ok((p, v))
            })
            .collect()
    }

    fn collapse(&mut self, slot: SlotId, outcome: usize, p: f64, v: Vec<C64>) {
        let scale = 1.0 / p.sqrt();
        self.amps = v.into_iter().map(|z| z * scale).collect();
        self.probability *= p;
        self.outcomes.insert(slot, outcome);
    }

    fn measure(&mut self, targets: &[usize], ops: &[ComplexMatrix], slot: SlotId, chooser: Chooser) -> Result<(usize, f64)> {
        let branches = self.branches(targets, ops)?;
        let probs: Vec<f64> = branches.iter().map(|b| b.0).collect();
        let k = match chooser {
            Chooser::Forced(k) => {
                let p = probs.get(k).copied().unwrap_or(0.0);
                if p < PRUNE_TOL {
                    return Err(Error::ImpossibleBranch {
                        slot: slot.0,
                        outcome: k,
                        probability: p,
                    });
                }
                k
            }
            Chooser::Sample(rng) => sample_index(&probs, rng),
        };
        let (p, v) = branches.into_iter().nth(k).expect("outcome in range");
        self.collapse(slot, k, p, v);
        Ok((k, p))
    }

    pub fn apply_projective(
        &mut self,
        targets: &[usize],
        projectors: &[ComplexMatrix],
        slot: SlotId,
        chooser: Chooser,
    ) -> Result<(usize, f64)> {
        check_completeness(projectors)?;
        self.measure(targets, projectors, slot, chooser)
    }

    pub fn apply_generalized(
        &mut self,
        targets: &[usize],
        operators: &[ComplexMatrix],
        slot: SlotId,
        chooser: Chooser,
    ) -> Result<(usize, f64)> {
        check_completeness(operators)?;
        self.measure(targets, operators, slot, chooser)
    }

    /// Linear entropy 1 − tr ρ² of one register's reduced state.
    pub fn entanglement(&self, reg: usize) -> Result<f64> {
        let (m, _) = self.split(reg)?;
        Ok(linear_entropy(&m))
    }

    /// Amplitude matrix M[k][rest] for register `reg`, and the flat bases of
    /// the rest indices.
    fn split(&self, reg: usize) -> Result<(Vec<Vec<C64>>, Vec<usize>)> {
        let pos = self.position(reg)?;
        let stride = self.stride(pos);
        let dim = self.dims[reg];
        let bases: Vec<usize> = (0..self.amps.len())
            .filter(|&i| (i / stride).is_multiple_of(dim))
            .collect();
        let m = (0..dim)
            .map(|k| bases.iter().map(|&b| self.amps[b + k * stride]).collect())
            .collect();
        Ok((m, bases))
    }

    /// Removes a register whose reduced state is pure, contracting the
    /// amplitudes against its local state.
    pub fn discard(&mut self, reg: usize) -> Result<()> {
        let (m, _) = self.split(reg)?;
        let entropy = linear_entropy(&m);
        if entropy > ALGEBRA_TOL {
            return Err(Error::EntangledDiscard { register: reg, entropy });
        }
        let rest_len = m[0].len();
        let best = (0..rest_len)
            .max_by(|&a, &b| col_norm(&m, a).total_cmp(&col_norm(&m, b)))
            .expect("non-empty");
        let norm = col_norm(&m, best).sqrt();
        let phi: Vec<C64> = m.iter().map(|row| row[best] / norm).collect();
        self.amps = (0..rest_len)
            .map(|j| phi.iter().zip(&m).map(|(p, row)| p.conj() * row[j]).sum())
            .collect();
        let pos = self.position(reg)?;
        self.live.remove(pos);
        Ok(())
    }

    /// Live state in tensor-product order: live registers in register order,
    /// the first one most significant.
    pub fn to_kron(&self) -> StateKet {
        let dims: Vec<usize> = self.live.iter().map(|&r| self.dims[r]).collect();
        let mut out = vec![ZERO; self.amps.len()];
        let mut digits = vec![0usize; dims.len()];
        for &a in &self.amps {
            let mut k = 0;
            for (d, &dim) in digits.iter().zip(&dims) {
                k = k * dim + d;
            }
            out[k] = a;
            increment(&mut digits, &dims);
        }
        StateKet::new(out)
    }

    /// One line per basis state in storage order: register digits (in
    /// register order) followed by the `[re,im]` amplitude.
    pub fn amplitude_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "format_version {AMPLITUDE_DUMP_VERSION}");
        let regs: Vec<String> = self.live.iter().map(|&r| format!("r{r}:{}", self.dims[r])).collect();
        let _ = writeln!(out, "registers {}", regs.join(" "));
        let dims: Vec<usize> = self.live.iter().map(|&r| self.dims[r]).collect();
        let mut digits = vec![0usize; dims.len()];
        for a in &self.amps {
            let label: Vec<String> = digits.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{} [{},{}]", label.join(","), a.re, a.im);
            increment(&mut digits, &dims);
        }
        out
    }
}

/// Little-endian odometer increment.
fn increment(digits: &mut [usize], dims: &[usize]) {
    for (d, &dim) in digits.iter_mut().zip(dims) {
        *d += 1;
        if *d < dim {
            return;
        }
        *d = 0;
    }
}

fn col_norm(m: &[Vec<C64>], j: usize) -> f64 {
    m.iter().map(|row| row[j].norm_sqr()).sum()
}

fn linear_entropy(m: &[Vec<C64>]) -> f64 {
    let dim = m.len();
    let mut rho = vec![vec![ZERO; dim]; dim];
    for i in 0..dim {
        for k in 0..dim {
            rho[i][k] = m[i].iter().zip(&m[k]).map(|(a, b)| a * b.conj()).sum();
        }
    }
    let tr: f64 = (0..dim).map(|i| rho[i][i].re).sum();
    if tr <= 0.0 {
        return 0.0;
    }
    let purity: f64 = (0..dim)
        .flat_map(|i| (0..dim).map(move |k| (i, k)))
        .map(|(i, k)| (rho[i][k] * rho[k][i]).re)
        .sum();
    (1.0 - purity / (tr * tr)).max(0.0)
}

fn check_completeness(ops: &[ComplexMatrix]) -> Result<()> {
    let first = ops
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty measurement".into()))?;
    let dim = first.cols();
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for m in ops {
        if m.rows() != dim || m.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.rows(),
            });
        }
        sum = &sum + &(&m.adjoint() * m);
    }
    let defect = sum.max_abs_diff(&ComplexMatrix::identity(dim));
    if defect > ALGEBRA_TOL {
        return Err(Error::Incomplete { defect });
    }
    Ok(())
}

fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let kept: Vec<f64> = probs.iter().map(|&p| if p < PRUNE_TOL { 0.0 } else { p }).collect();
    let total: f64 = kept.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in kept.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

/// Full record of one protocol execution.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub success: bool,
    pub truth_value: Option<bool>,
    /// Exact probability of the realized trajectory.
    pub probability: f64,
    /// System state after the readout; `None` for failed runs.
    pub residual_system_state: Option<StateKet>,
    pub outcomes: BTreeMap<SlotId, usize>,
}

enum Step {
    Continue,
    Failed,
}

/// Applies a non-measurement instruction. Returns `None` for measurements.
fn apply_plain(state: &mut SimState, instr: &Instruction) -> Result<Option<Step>> {
    match instr {
        Instruction::Unitary { targets, matrix } => state.apply_unitary(targets, matrix)?,
        Instruction::ConditionalUnitary {
            condition: (slot, value),
            targets,
            matrix,
        } => {
            let got = state.outcomes.get(slot).ok_or(Error::MissingOutcome(slot.0))?;
            if got == value {
                state.apply_unitary(targets, matrix)?;
            }
        }
        Instruction::Discard { target } => state.discard(*target)?,
        Instruction::Relabel { target, .. } => {
            state.position(*target)?;
        }
        Instruction::ProjectiveMeasure { .. } | Instruction::GeneralizedMeasure { .. } => return Ok(None),
    }
    Ok(Some(Step::Continue))
}

fn measurement_parts(instr: &Instruction) -> (&[usize], &[ComplexMatrix], SlotId, Option<usize>) {
    match instr {
        Instruction::ProjectiveMeasure {
            targets,
            projectors,
            slot,
        } => (targets, projectors, *slot, None),
        Instruction::GeneralizedMeasure {
            targets,
            operators,
            slot,
            failure,
        } => (targets, operators, *slot, *failure),
        _ => unreachable!("not a measurement"),
    }
}

enum Source<'a> {
    Sample(&'a mut ChaCha8Rng),
    Forced(&'a BTreeMap<SlotId, usize>),
}

fn step(state: &mut SimState, instr: &Instruction, source: &mut Source) -> Result<Step> {
    if let Some(s) = apply_plain(state, instr)? {
        return Ok(s);
    }
    let (targets, ops, slot, failure) = measurement_parts(instr);
    let chooser = match source {
        Source::Sample(rng) => Chooser::Sample(rng),
        Source::Forced(map) => Chooser::Forced(*map.get(&slot).ok_or(Error::MissingOutcome(slot.0))?),
    };
    let (k, _) = match instr {
        Instruction::ProjectiveMeasure { .. } => state.apply_projective(targets, ops, slot, chooser)?,
        _ => state.apply_generalized(targets, ops, slot, chooser)?,
    };
    Ok(if Some(k) == failure { Step::Failed } else { Step::Continue })
}

fn finish(c: &Circuit, mut state: SimState, failed: bool) -> Result<RunOutcome> {
    if failed {
        return Ok(RunOutcome {
            success: false,
            truth_value: None,
            probability: state.probability,
            residual_system_state: None,
            outcomes: state.outcomes,
        });
    }
    let truth = *state
        .outcomes
        .get(&c.readout)
        .ok_or(Error::MissingOutcome(c.readout.0))?
        == 1;
    let others: Vec<usize> = state.live.iter().copied().filter(|&r| r != c.system).collect();
    for r in others {
        state.discard(r)?;
    }
    Ok(RunOutcome {
        success: true,
        truth_value: Some(truth),
        probability: state.probability,
        residual_system_state: Some(StateKet::new(state.amps)),
        outcomes: state.outcomes,
    })
}

fn execute(c: &Circuit, psi: &StateKet, mut source: Source) -> Result<RunOutcome> {
    let mut state = SimState::initial(&c.layout, psi)?;
    for instr in &c.instructions {
        if let Step::Failed = step(&mut state, instr, &mut source)? {
            return finish(c, state, true);
        }
    }
    finish(c, state, false)
}

/// Executes the whole circuit, sampling outcomes from `rng`.
pub fn run_with_rng(c: &Circuit, psi: &StateKet, rng: &mut ChaCha8Rng) -> Result<RunOutcome> {
    execute(c, psi, Source::Sample(rng))
}

/// Executes the whole circuit with outcomes sampled from the stream
/// `(seed, 0)`; see [`crate::seeding`].
pub fn run(c: &Circuit, psi: &StateKet, seed: u64) -> Result<RunOutcome> {
    run_with_rng(c, psi, &mut crate::seeding::stream_rng(seed, 0))
}

/// Follows the branch given by `outcomes` (every slot reached must be present).
pub fn run_forced(c: &Circuit, psi: &StateKet, outcomes: &BTreeMap<SlotId, usize>) -> Result<RunOutcome> {
    execute(c, psi, Source::Forced(outcomes))
}

/// A branch of the first `upto` instructions.
#[derive(Clone, Debug)]
pub struct Branch {
    pub state: SimState,
    pub failed: bool,
}

/// Every branch with nonzero probability through the first `upto`
/// instructions, in lexicographic outcome order.
pub fn explore(c: &Circuit, psi: &StateKet, upto: usize) -> Result<Vec<Branch>> {
    let mut out = Vec::new();
    explore_from(c, SimState::initial(&c.layout, psi)?, 0, upto.min(c.instructions.len()), &mut out)?;
    Ok(out)
}

fn explore_from(c: &Circuit, mut state: SimState, mut pc: usize, end: usize, out: &mut Vec<Branch>) -> Result<()> {
    while pc < end {
        let instr = &c.instructions[pc];
        pc += 1;
        if apply_plain(&mut state, instr)?.is_some() {
            continue;
        }
        let (targets, ops, slot, failure) = measurement_parts(instr);
        check_completeness(ops)?;
        for (k, (p, v)) in state.branches(targets, ops)?.into_iter().enumerate() {
            if p < PRUNE_TOL {
                continue;
            }
            let mut next = state.clone();
            next.collapse(slot, k, p, v);
            if Some(k) == failure {
                out.push(Branch {
                    state: next,
                    failed: true,
                });
            } else {
                explore_from(c, next, pc, end, out)?;
            }
        }
        return Ok(());
    }
    out.push(Branch { state, failed: false });
    Ok(())
}

/// All complete trajectories of the circuit with their exact probabilities.
pub fn enumerate_trajectories(c: &Circuit, psi: &StateKet) -> Result<Vec<RunOutcome>> {
    explore(c, psi, c.instructions.len())?
        .into_iter()
        .map(|b| finish(c, b.state, b.failed))
        .collect()
}
