//! Lowering of propositions to an instruction list.
//!
//! A compiled circuit has two stages. The first prepares the history state
//! of the leaf tests, either by a chain of teleportation-like rounds through
//! Bell pairs (rank-one qubit projectors only) or by one coherent recording
//! unitary per leaf. The second reduces the leaf ancillas to a single result
//! qubit along [`Proposition::reduction_schedule`]: negation is a bit flip,
//! sequential AND is the two-outcome generalized measurement returned by
//! [`build_coherent_and_pair`], whose second outcome aborts the run.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, StateKet, ALGEBRA_TOL};
use crate::oracle::{branch_operator, computational_projector, matrix_sqrt_psd, phase_fix, ElementaryAssignment};
use crate::prop::{ElementaryLabel, NodeId, Proposition, StepKind};

pub const CIRCUIT_FORMAT_VERSION: u32 = 1;

/// Cap on Σ log₂(register dimension) over all registers of a circuit.
pub const MAX_QUBIT_EQUIVALENTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepPath {
    Teleport,
    Direct,
}

impl fmt::Display for PrepPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Teleport => "teleport",
            Self::Direct => "direct",
        })
    }
}

impl std::str::FromStr for PrepPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "teleport" => Ok(Self::Teleport),
            "direct" => Ok(Self::Direct),
            other => Err(Error::InvalidArgument(format!("unknown preparation path {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum QubitRole {
    /// Result qubit of a leaf test. Leaves are identified by node id, so a
    /// label used twice gets two ancillas.
    ElementaryAncilla { node: NodeId, label: ElementaryLabel },
    PrimedAncilla { node: NodeId, label: ElementaryLabel },
    SubProposition { node: NodeId, text: String },
    System,
}

impl QubitRole {
    /// Proposition node whose outcome this register stores, if any.
    pub fn result_node(&self) -> Option<NodeId> {
        match self {
            Self::ElementaryAncilla { node, .. } | Self::SubProposition { node, .. } => Some(*node),
            _ => None,
        }
    }
}

impl fmt::Display for QubitRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ElementaryAncilla { node, label } => write!(f, "elementary {label} {node}"),
            Self::PrimedAncilla { node, label } => write!(f, "primed {label}' {node}"),
            Self::SubProposition { node, text } => write!(f, "subproposition {text} {node}"),
            Self::System => f.write_str("system"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Register {
    pub dim: usize,
    pub role: QubitRole,
}

/// Initial register contents: the input state on `input`, normalized Bell
/// pairs on `bell_pairs`, |0⟩ everywhere else.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub registers: Vec<Register>,
    pub input: usize,
    pub bell_pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotId(pub usize);

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotKind {
    Parity { leaf: NodeId },
    CoherentAnd { node: NodeId },
    Readout,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub kind: SlotKind,
    pub outcomes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    Unitary {
        targets: Vec<usize>,
        matrix: ComplexMatrix,
    },
    ProjectiveMeasure {
        targets: Vec<usize>,
        projectors: Vec<ComplexMatrix>,
        slot: SlotId,
    },
    GeneralizedMeasure {
        targets: Vec<usize>,
        operators: Vec<ComplexMatrix>,
        slot: SlotId,
        failure: Option<usize>,
    },
    ConditionalUnitary {
        condition: (SlotId, usize),
        targets: Vec<usize>,
        matrix: ComplexMatrix,
    },
    Discard {
        target: usize,
    },
    Relabel {
        target: usize,
        role: QubitRole,
    },
}

impl Instruction {
    pub fn targets(&self) -> Vec<usize> {
        match self {
            Self::Unitary { targets, .. }
            | Self::ProjectiveMeasure { targets, .. }
            | Self::GeneralizedMeasure { targets, .. }
            | Self::ConditionalUnitary { targets, .. } => targets.clone(),
            Self::Discard { target } | Self::Relabel { target, .. } => vec![*target],
        }
    }

    pub fn slot(&self) -> Option<SlotId> {
        match self {
            Self::ProjectiveMeasure { slot, .. } | Self::GeneralizedMeasure { slot, .. } => Some(*slot),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub path: PrepPath,
    pub proposition: Proposition,
    pub layout: Layout,
    pub slots: Vec<Slot>,
    pub instructions: Vec<Instruction>,
    /// Number of leading instructions that make up the preparation stage.
    pub stage1_len: usize,
    pub readout: SlotId,
    /// Register that ends up holding the system.
    pub system: usize,
    pub root: NodeId,
}

impl Circuit {
    pub fn system_dim(&self) -> usize {
        self.layout.registers[self.system].dim
    }

    /// Slots whose failure index aborts the run.
    pub fn success_slots(&self) -> Vec<SlotId> {
        self.instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::GeneralizedMeasure {
                    slot,
                    failure: Some(_),
                    ..
                } => Some(*slot),
                _ => None,
            })
            .collect()
    }

    pub fn count(&self, pred: impl Fn(&Instruction) -> bool) -> usize {
        self.instructions.iter().filter(|i| pred(i)).count()
    }
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])
}

/// CNOT with the first qubit as control.
pub fn cnot() -> ComplexMatrix {
    ComplexMatrix::from_real(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
        &[0.0, 0.0, 1.0, 0.0],
    ])
}

/// Even/odd parity projectors on two qubits.
pub fn parity_projectors() -> [ComplexMatrix; 2] {
    [
        crate::oracle::diagonal_projector(&[true, false, false, true]),
        crate::oracle::diagonal_projector(&[false, true, true, false]),
    ]
}

/// U with U|1⟩ = |ψ_x⟩ and U|0⟩ = |ψ_¬x⟩, the orthogonal ket phase-fixed so
/// its first nonzero amplitude is real positive.
pub fn build_elementary_unitary(psi_x: &StateKet) -> Result<ComplexMatrix> {
    if psi_x.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: psi_x.dim(),
        });
    }
    psi_x.require_normalized()?;
    let (a, b) = (psi_x[0], psi_x[1]);
    let orth = phase_fix(&StateKet::new(vec![-b.conj(), a.conj()]));
    Ok(ComplexMatrix::from_fn(2, 2, |i, j| if j == 0 { orth[i] } else { psi_x[i] }))
}

/// The success/failure operators replacing the coherent AND:
/// M_s = (|01⟩(⟨00|+⟨01|+⟨10|) + |11⟩⟨11|)/√3 and M_f = (I − M_s†M_s)^{1/2}.
pub fn build_coherent_and_pair() -> (ComplexMatrix, ComplexMatrix) {
    let k = 1.0 / 3f64.sqrt();
    let ms = ComplexMatrix::from_real(&[
        &[0.0, 0.0, 0.0, 0.0],
        &[k, k, k, 0.0],
        &[0.0, 0.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, k],
    ]);
    let rest = &ComplexMatrix::identity(4) - &(&ms.adjoint() * &ms);
    let mf = matrix_sqrt_psd(&rest).expect("I − M_s†M_s is positive semidefinite");
    (ms, mf)
}

/// Σ_{jk} |j⟩⟨k| ⊗ [x^{j⊕k}] on (ancilla, system): coherently records the
/// test {x, ¬x} in an ancilla prepared in |0⟩.
pub fn recording_unitary(projector: &ComplexMatrix) -> ComplexMatrix {
    let d = projector.rows();
    let not_x = &ComplexMatrix::identity(d) - projector;
    let mut u = ComplexMatrix::zeros(2 * d, 2 * d);
    for j in 0..2 {
        for k in 0..2 {
            let block = if j ^ k == 1 { projector } else { &not_x };
            for r in 0..d {
                for s in 0..d {
                    u[(j * d + r, k * d + s)] = block[(r, s)];
                }
            }
        }
    }
    u
}

pub fn compile(p: &Proposition, asg: &ElementaryAssignment, path: PrepPath) -> Result<Circuit> {
    let p = p.canonicalize();
    let schedule = p.reduction_schedule()?;
    asg.require_labels(&p)?;
    let leaves = p.leaves();
    let n = leaves.len();
    let d = asg.system_dim();

    let qubit_equivalents = (d as f64).log2()
        + match path {
            PrepPath::Teleport => 2 * n,
            PrepPath::Direct => n,
        } as f64;
    if qubit_equivalents > MAX_QUBIT_EQUIVALENTS as f64 + 1e-9 {
        return Err(Error::TooLarge {
            needed: qubit_equivalents,
            limit: MAX_QUBIT_EQUIVALENTS,
        });
    }

    let mut slots = Vec::new();
    let mut new_slot = |kind: SlotKind, outcomes: usize| {
        slots.push(Slot { kind, outcomes });
        SlotId(slots.len() - 1)
    };
    let mut ins = Vec::new();
    let mut result_reg: HashMap<NodeId, usize> = HashMap::new();

    let layout = match path {
        PrepPath::Teleport => {
            if d != 2 {
                return Err(Error::Unsupported(format!(
                    "teleport preparation needs a qubit system, got dimension {d}"
                )));
            }
            let mut registers = Vec::with_capacity(2 * n + 1);
            let mut bell_pairs = Vec::with_capacity(n);
            for (i, leaf) in leaves.iter().enumerate() {
                registers.push(Register {
                    dim: 2,
                    role: QubitRole::ElementaryAncilla {
                        node: leaf.id,
                        label: leaf.label.clone(),
                    },
                });
                registers.push(Register {
                    dim: 2,
                    role: QubitRole::PrimedAncilla {
                        node: leaf.id,
                        label: leaf.label.clone(),
                    },
                });
                bell_pairs.push((2 * i + 1, 2 * i + 2));
            }
            registers.push(Register {
                dim: 2,
                role: QubitRole::System,
            });

            let [p1, p2] = parity_projectors();
            for (i, leaf) in leaves.iter().enumerate() {
                let psi_x = asg.rank_one_state(&leaf.label)?.ok_or_else(|| {
                    Error::Unsupported(format!(
                        "teleport preparation needs a rank-one projector for `{}`",
                        leaf.label
                    ))
                })?;
                let u = build_elementary_unitary(psi_x)?;
                let (x, xp, next) = (2 * i, 2 * i + 1, 2 * i + 2);
                ins.push(Instruction::Unitary {
                    targets: vec![x, xp],
                    matrix: u.adjoint().kron(&u.transpose()),
                });
                let slot = new_slot(SlotKind::Parity { leaf: leaf.id }, 2);
                ins.push(Instruction::ProjectiveMeasure {
                    targets: vec![x, xp],
                    projectors: vec![p1.clone(), p2.clone()],
                    slot,
                });
                ins.push(Instruction::ConditionalUnitary {
                    condition: (slot, 1),
                    targets: vec![next],
                    matrix: &(&u * &pauli_x()) * &u.adjoint(),
                });
                ins.push(Instruction::Unitary {
                    targets: vec![x, xp],
                    matrix: cnot(),
                });
                ins.push(Instruction::Discard { target: xp });
                result_reg.insert(leaf.id, x);
            }
            Layout {
                registers,
                input: 0,
                bell_pairs,
            }
        }
        PrepPath::Direct => {
            let mut registers: Vec<Register> = leaves
                .iter()
                .map(|leaf| Register {
                    dim: 2,
                    role: QubitRole::ElementaryAncilla {
                        node: leaf.id,
                        label: leaf.label.clone(),
                    },
                })
                .collect();
            registers.push(Register {
                dim: d,
                role: QubitRole::System,
            });
            for (i, leaf) in leaves.iter().enumerate() {
                ins.push(Instruction::Unitary {
                    targets: vec![i, n],
                    matrix: recording_unitary(asg.projector(&leaf.label)?),
                });
                result_reg.insert(leaf.id, i);
            }
            Layout {
                registers,
                input: n,
                bell_pairs: Vec::new(),
            }
        }
    };
    let stage1_len = ins.len();
    let system = layout.registers.len() - 1;

    let (ms, mf) = build_coherent_and_pair();
    for step in &schedule {
        let role = QubitRole::SubProposition {
            node: step.id,
            text: step.node.to_string(),
        };
        let target = match step.kind {
            StepKind::Not { operand } => {
                let r = result_reg[&operand];
                ins.push(Instruction::Unitary {
                    targets: vec![r],
                    matrix: pauli_x(),
                });
                r
            }
            StepKind::SeqAnd { left, right } => {
                let (rl, rr) = (result_reg[&left], result_reg[&right]);
                let slot = new_slot(SlotKind::CoherentAnd { node: step.id }, 2);
                ins.push(Instruction::GeneralizedMeasure {
                    targets: vec![rl, rr],
                    operators: vec![ms.clone(), mf.clone()],
                    slot,
                    failure: Some(1),
                });
                ins.push(Instruction::Discard { target: rr });
                rl
            }
        };
        ins.push(Instruction::Relabel { target, role });
        result_reg.insert(step.id, target);
    }

    let root = p.root_id();
    let readout = new_slot(SlotKind::Readout, 2);
    ins.push(Instruction::ProjectiveMeasure {
        targets: vec![result_reg[&root]],
        projectors: vec![computational_projector(0), computational_projector(1)],
        slot: readout,
    });

    Ok(Circuit {
        path,
        proposition: p,
        layout,
        slots,
        instructions: ins,
        stage1_len,
        readout,
        system,
        root,
    })
}

/// A static check failure. `index` is the instruction index, `None` for
/// layout-level problems.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "instruction {i}: {}", self.message),
            None => write!(f, "layout: {}", self.message),
        }
    }
}

fn completeness_defect(ops: &[ComplexMatrix]) -> Option<f64> {
    let dim = ops.first()?.cols();
    if ops.iter().any(|m| !m.is_square() || m.rows() != dim) {
        return None;
    }
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for m in ops {
        sum = &sum + &(&m.adjoint() * m);
    }
    Some(sum.max_abs_diff(&ComplexMatrix::identity(dim)))
}

/// Static checks: unitarity, completeness relations, target liveness and
/// dimensions, slot usage, and the final readout. Entanglement at discard
/// time cannot be known statically and is checked by the simulator.
pub fn validate(c: &Circuit) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |index: Option<usize>, message: String| out.push(Violation { index, message });
    let regs = &c.layout.registers;
    let mut live = vec![true; regs.len()];

    if c.layout.input >= regs.len() {
        flag(None, format!("input register {} out of range", c.layout.input));
    }
    let mut paired = vec![false; regs.len()];
    for &(a, b) in &c.layout.bell_pairs {
        let ok = a != b && a < regs.len() && b < regs.len() && a != c.layout.input && b != c.layout.input;
        if !ok || paired[a] || paired[b] || regs[a].dim != 2 || regs[b].dim != 2 {
            flag(None, format!("invalid Bell pair ({a}, {b})"));
            continue;
        }
        paired[a] = true;
        paired[b] = true;
    }

    let mut measured = vec![false; c.slots.len()];
    for (idx, instr) in c.instructions.iter().enumerate() {
        let i = Some(idx);
        let targets = instr.targets();
        let mut seen = Vec::new();
        let mut dim = 1usize;
        let mut targets_ok = true;
        for &t in &targets {
            if t >= regs.len() {
                flag(i, format!("register {t} out of range"));
                targets_ok = false;
                continue;
            }
            if !live[t] {
                flag(i, format!("register {t} is not live"));
                targets_ok = false;
            }
            if seen.contains(&t) {
                flag(i, format!("register {t} targeted twice"));
                targets_ok = false;
            }
            seen.push(t);
            dim *= regs[t].dim;
        }
        if !targets_ok {
            continue;
        }
        let mut check_dim = |m: &ComplexMatrix, what: &str| {
            if m.rows() != dim || m.cols() != dim {
                flag(
                    i,
                    format!("{what} is {}x{}, targets have dimension {dim}", m.rows(), m.cols()),
                );
                false
            } else {
                true
            }
        };
        let mut slot_check = |slot: SlotId, n_ops: usize, out: &mut Vec<String>| {
            match c.slots.get(slot.0) {
                None => out.push(format!("slot {slot} is not declared")),
                Some(s) => {
                    if measured[slot.0] {
                        out.push(format!("slot {slot} measured twice"));
                    }
                    if s.outcomes != n_ops {
                        out.push(format!("slot {slot} declares {} outcomes, got {n_ops}", s.outcomes));
                    }
                    measured[slot.0] = true;
                }
            }
        };
        let mut slot_msgs = Vec::new();
        match instr {
            Instruction::Unitary { matrix, .. } => {
                if check_dim(matrix, "unitary") {
                    let defect = matrix.unitarity_defect();
                    if defect > ALGEBRA_TOL {
                        flag(i, format!("matrix is not unitary (defect {defect:e})"));
                    }
                }
            }
            Instruction::ConditionalUnitary {
                condition: (slot, value),
                matrix,
                ..
            } => {
                if check_dim(matrix, "unitary") {
                    let defect = matrix.unitarity_defect();
                    if defect > ALGEBRA_TOL {
                        flag(i, format!("matrix is not unitary (defect {defect:e})"));
                    }
                }
                match c.slots.get(slot.0) {
                    Some(s) if measured[slot.0] && *value < s.outcomes => {}
                    _ => flag(i, format!("condition on unmeasured or invalid slot {slot}={value}")),
                }
            }
            Instruction::ProjectiveMeasure { projectors, slot, .. } => {
                if projectors.iter().all(|m| check_dim(m, "projector")) {
                    for (k, m) in projectors.iter().enumerate() {
                        let defect = m.projector_defect();
                        if defect > ALGEBRA_TOL {
                            flag(i, format!("operator {k} is not a projector (defect {defect:e})"));
                        }
                    }
                    match completeness_defect(projectors) {
                        Some(defect) if defect <= ALGEBRA_TOL => {}
                        Some(defect) => flag(i, format!("projectors do not resolve the identity (defect {defect:e})")),
                        None => flag(i, "empty projector list".into()),
                    }
                }
                slot_check(*slot, projectors.len(), &mut slot_msgs);
            }
            Instruction::GeneralizedMeasure {
                operators,
                slot,
                failure,
                ..
            } => {
                if operators.iter().all(|m| check_dim(m, "operator")) {
                    match completeness_defect(operators) {
                        Some(defect) if defect <= ALGEBRA_TOL => {}
                        Some(defect) => flag(
                            i,
                            format!("generalized measurement is incomplete (defect {defect:e})"),
                        ),
                        None => flag(i, "empty operator list".into()),
                    }
                }
                if let Some(f) = failure {
                    if *f >= operators.len() {
                        flag(i, format!("failure index {f} out of range"));
                    }
                }
                slot_check(*slot, operators.len(), &mut slot_msgs);
            }
            Instruction::Discard { target } => live[*target] = false,
            Instruction::Relabel { .. } => {}
        }
        for m in slot_msgs {
            flag(i, m);
        }
    }

    // Final readout on the root's result register.
    let last = c.instructions.len().checked_sub(1);
    match c.instructions.last() {
        Some(Instruction::ProjectiveMeasure { targets, slot, .. }) if *slot == c.readout => {
            let mut role = targets.first().map(|&t| regs[t].role.clone());
            // apply relabels in program order
            for instr in &c.instructions {
                if let Instruction::Relabel { target, role: r } = instr {
                    if targets.first() == Some(target) {
                        role = Some(r.clone());
                    }
                }
            }
            if role.and_then(|r| r.result_node()) != Some(c.root) {
                flag(last, "readout is not on the root proposition's register".into());
            }
            if targets.len() != 1 {
                flag(last, "readout must target a single register".into());
            }
        }
        _ => flag(last, "circuit must end with the readout measurement".into()),
    }
    let readouts = c
        .instructions
        .iter()
        .filter(|i| i.slot() == Some(c.readout))
        .count();
    if readouts != 1 {
        flag(None, format!("expected exactly one readout, found {readouts}"));
    }
    out
}

fn write_matrix(out: &mut String, m: &ComplexMatrix) {
    out.push('[');
    for (k, z) in m.entries().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let _ = write!(out, "[{},{}]", z.re, z.im);
    }
    out.push(']');
}

fn write_targets(out: &mut String, t: &[usize]) {
    let list: Vec<String> = t.iter().map(usize::to_string).collect();
    let _ = write!(out, "[{}]", list.join(","));
}

/// Line-oriented text rendering, one instruction per line. Matrices are
/// inlined as row-major lists of `[re,im]` pairs.
pub fn dump(c: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format_version {CIRCUIT_FORMAT_VERSION}");
    let _ = writeln!(out, "proposition {}", c.proposition);
    let _ = writeln!(out, "path {}", c.path);
    for (i, r) in c.layout.registers.iter().enumerate() {
        let _ = writeln!(out, "register {i} dim {} role {}", r.dim, r.role);
    }
    let _ = writeln!(out, "input {}", c.layout.input);
    for (a, b) in &c.layout.bell_pairs {
        let _ = writeln!(out, "bell {a} {b}");
    }
    for (i, s) in c.slots.iter().enumerate() {
        let kind = match &s.kind {
            SlotKind::Parity { leaf } => format!("parity {leaf}"),
            SlotKind::CoherentAnd { node } => format!("and {node}"),
            SlotKind::Readout => "readout".to_string(),
        };
        let _ = writeln!(out, "slot {i} outcomes {} {kind}", s.outcomes);
    }
    let _ = writeln!(out, "stage1 {}", c.stage1_len);
    for (i, instr) in c.instructions.iter().enumerate() {
        let _ = write!(out, "{i} ");
        match instr {
            Instruction::Unitary { targets, matrix } => {
                out.push_str("unitary ");
                write_targets(&mut out, targets);
                out.push(' ');
                write_matrix(&mut out, matrix);
            }
            Instruction::ProjectiveMeasure {
                targets,
                projectors,
                slot,
            } => {
                let _ = write!(out, "measure {slot} ");
                write_targets(&mut out, targets);
                for m in projectors {
                    out.push(' ');
                    write_matrix(&mut out, m);
                }
            }
            Instruction::GeneralizedMeasure {
                targets,
                operators,
                slot,
                failure,
            } => {
                let _ = write!(out, "generalized {slot} ");
                match failure {
                    Some(f) => {
                        let _ = write!(out, "failure={f} ");
                    }
                    None => out.push_str("failure=none "),
                }
                write_targets(&mut out, targets);
                for m in operators {
                    out.push(' ');
                    write_matrix(&mut out, m);
                }
            }
            Instruction::ConditionalUnitary {
                condition: (slot, value),
                targets,
                matrix,
            } => {
                let _ = write!(out, "if {slot}={value} unitary ");
                write_targets(&mut out, targets);
                out.push(' ');
                write_matrix(&mut out, matrix);
            }
            Instruction::Discard { target } => {
                let _ = write!(out, "discard {target}");
            }
            Instruction::Relabel { target, role } => {
                let _ = write!(out, "relabel {target} {role}");
            }
        }
        out.push('\n');
    }
    let _ = writeln!(out, "readout {}", c.readout);
    out
}

/// [x^j] as used by the stage-one recording unitary; exposed for tests.
pub fn leaf_branch(asg: &ElementaryAssignment, label: &ElementaryLabel, value: bool) -> Result<ComplexMatrix> {
    branch_operator(&Proposition::Elementary(label.clone()), value, asg)
}
