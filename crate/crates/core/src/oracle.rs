//! Brute-force Hilbert-space semantics of propositions.
//!
//! Every quantity the protocol is supposed to produce is computed here
//! directly from operator products, with no reference to circuits. The
//! simulator is checked against these values.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, StateKet, ALGEBRA_TOL, ONE, ZERO};
use crate::prop::{ElementaryLabel, Proposition};

/// Largest supported system dimension.
pub const MAX_SYSTEM_DIM: usize = 32;

#[derive(Clone, Debug, PartialEq)]
struct Elementary {
    projector: ComplexMatrix,
    /// Set when the projector was built from a ket, or detected as rank one.
    state: Option<StateKet>,
}

/// Projectors for elementary labels on a shared `d`-dimensional system.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementaryAssignment {
    system_dim: usize,
    entries: BTreeMap<ElementaryLabel, Elementary>,
}

impl ElementaryAssignment {
    pub fn new(system_dim: usize) -> Result<Self> {
        if system_dim == 0 || system_dim > MAX_SYSTEM_DIM {
            return Err(Error::InvalidArgument(format!(
                "system dimension must be in 1..={MAX_SYSTEM_DIM}, got {system_dim}"
            )));
        }
        Ok(Self {
            system_dim,
            entries: BTreeMap::new(),
        })
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn insert_projector(&mut self, label: ElementaryLabel, projector: ComplexMatrix) -> Result<()> {
        if !projector.is_square() {
            return Err(Error::NotSquare {
                rows: projector.rows(),
                cols: projector.cols(),
            });
        }
        if projector.rows() != self.system_dim {
            return Err(Error::DimensionMismatch {
                expected: self.system_dim,
                found: projector.rows(),
            });
        }
        let defect = projector.projector_defect();
        if defect > ALGEBRA_TOL {
            return Err(Error::NotProjector {
                label: label.to_string(),
                defect,
            });
        }
        let state = rank_one_state(&projector);
        self.entries.insert(label, Elementary { projector, state });
        Ok(())
    }

    pub fn insert_state(&mut self, label: ElementaryLabel, psi: StateKet) -> Result<()> {
        if psi.dim() != self.system_dim {
            return Err(Error::DimensionMismatch {
                expected: self.system_dim,
                found: psi.dim(),
            });
        }
        let projector = projector_from_state(&psi)?;
        self.entries.insert(
            label,
            Elementary {
                projector,
                state: Some(psi),
            },
        );
        Ok(())
    }

    pub fn projector(&self, label: &ElementaryLabel) -> Result<&ComplexMatrix> {
        self.entries
            .get(label)
            .map(|e| &e.projector)
            .ok_or_else(|| Error::MissingLabel(label.to_string()))
    }

    /// The ket |ψ_x⟩ with [x] = |ψ_x⟩⟨ψ_x|, when the projector has rank one.
    pub fn rank_one_state(&self, label: &ElementaryLabel) -> Result<Option<&StateKet>> {
        self.entries
            .get(label)
            .map(|e| e.state.as_ref())
            .ok_or_else(|| Error::MissingLabel(label.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &ElementaryLabel> {
        self.entries.keys()
    }

    pub fn require_labels(&self, p: &Proposition) -> Result<()> {
        for label in p.leaf_labels() {
            self.projector(&label)?;
        }
        Ok(())
    }
}

fn rank_one_state(projector: &ComplexMatrix) -> Option<StateKet> {
    let rank = projector.trace().re;
    if (rank - 1.0).abs() > 1e-6 {
        return None;
    }
    let (values, vectors) = projector.hermitian_eigen().ok()?;
    let top = values.len() - 1;
    Some(phase_fix(&vectors.column(top)))
}

/// Multiplies by a global phase so the first nonzero amplitude is real positive.
pub fn phase_fix(v: &StateKet) -> StateKet {
    match v.amplitudes().iter().find(|z| z.norm() > 1e-12) {
        Some(z) => v.scale(z.conj() / z.norm()),
        None => v.clone(),
    }
}

/// |ψ⟩⟨ψ| for normalized ψ.
pub fn projector_from_state(psi: &StateKet) -> Result<ComplexMatrix> {
    psi.require_normalized()?;
    Ok(ComplexMatrix::outer(psi, psi))
}

/// The operator [p]: elementary → assigned projector, ¬s → I − [s],
/// s⊓t → [t][s], s⊕t → [¬t][s] + [t][¬s].
pub fn operator_of(p: &Proposition, asg: &ElementaryAssignment) -> Result<ComplexMatrix> {
    let id = ComplexMatrix::identity(asg.system_dim);
    Ok(match p {
        Proposition::Elementary(l) => asg.projector(l)?.clone(),
        Proposition::Not(s) => &id - &operator_of(s, asg)?,
        Proposition::SeqAnd(s, t) => &operator_of(t, asg)? * &operator_of(s, asg)?,
        Proposition::SeqXor(s, t) => {
            let s = operator_of(s, asg)?;
            let t = operator_of(t, asg)?;
            let not_s = &id - &s;
            let not_t = &id - &t;
            &(&not_t * &s) + &(&t * &not_s)
        }
    })
}

/// [s^j]: j = true gives [s], j = false gives I − [s].
pub fn branch_operator(p: &Proposition, value: bool, asg: &ElementaryAssignment) -> Result<ComplexMatrix> {
    let op = operator_of(p, asg)?;
    Ok(if value {
        op
    } else {
        &ComplexMatrix::identity(asg.system_dim) - &op
    })
}

fn check_state(psi: &StateKet, asg: &ElementaryAssignment) -> Result<()> {
    if psi.dim() != asg.system_dim {
        return Err(Error::DimensionMismatch {
            expected: asg.system_dim,
            found: psi.dim(),
        });
    }
    psi.require_normalized()
}

/// Squared norms of the unnormalized branches:
/// `(‖[s]ψ‖², ‖[¬s]ψ‖²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchNorms {
    pub w_true: f64,
    pub w_false: f64,
}

impl BranchNorms {
    pub fn total(&self) -> f64 {
        self.w_true + self.w_false
    }
}

pub fn branch_norms(p: &Proposition, psi: &StateKet, asg: &ElementaryAssignment) -> Result<BranchNorms> {
    check_state(psi, asg)?;
    let yes = operator_of(p, asg)?.apply(psi)?;
    let no = psi.sub(&yes);
    Ok(BranchNorms {
        w_true: yes.norm_sqr(),
        w_false: no.norm_sqr(),
    })
}

/// Probabilities of true/false conditional on the protocol succeeding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionalDistribution {
    pub p_true: f64,
    pub p_false: f64,
}

pub fn conditional_distribution(
    p: &Proposition,
    psi: &StateKet,
    asg: &ElementaryAssignment,
) -> Result<ConditionalDistribution> {
    let w = branch_norms(p, psi, asg)?;
    let total = w.total();
    if total < 1e-12 {
        return Err(Error::Degenerate);
    }
    Ok(ConditionalDistribution {
        p_true: w.w_true / total,
        p_false: w.w_false / total,
    })
}

/// Probability that a full protocol run never hits a failure outcome:
/// each sequential AND contributes a factor 1/3, the remaining weight is
/// `‖[s]ψ‖² + ‖[¬s]ψ‖²`.
pub fn overall_success_probability(p: &Proposition, psi: &StateKet, asg: &ElementaryAssignment) -> Result<f64> {
    if p.contains_xor() {
        return Err(Error::UnsupportedXor);
    }
    let w = branch_norms(p, psi, asg)?;
    Ok(3f64.powi(-(p.count_seq_ands() as i32)) * w.total())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestPairCheck {
    pub valid: bool,
    pub defect: f64,
}

/// Whether {A, I − A} is a pair of generalized measurement operators:
/// max-abs of A†A + (I−A)†(I−A) − I against the algebraic tolerance.
pub fn is_valid_test_pair(a: &ComplexMatrix) -> Result<TestPairCheck> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let id = ComplexMatrix::identity(a.rows());
    let rest = &id - a;
    let sum = &(&a.adjoint() * a) + &(&rest.adjoint() * &rest);
    let defect = sum.max_abs_diff(&id);
    Ok(TestPairCheck {
        valid: defect <= ALGEBRA_TOL,
        defect,
    })
}

/// Σ_j |j₁…jₙ⟩ ⊗ [tₙ^{jₙ}]⋯[t₁^{j₁}]ψ with the first proposition's qubit
/// most significant and the system last.
pub fn history_state_of(props: &[Proposition], psi: &StateKet, asg: &ElementaryAssignment) -> Result<StateKet> {
    if props.is_empty() {
        return Err(Error::InvalidArgument("history state needs at least one proposition".into()));
    }
    check_state(psi, asg)?;
    let branches: Vec<[ComplexMatrix; 2]> = props
        .iter()
        .map(|p| Ok([branch_operator(p, false, asg)?, branch_operator(p, true, asg)?]))
        .collect::<Result<_>>()?;
    let n = props.len();
    let d = asg.system_dim;
    let mut out = Vec::with_capacity((1 << n) * d);
    for bits in 0..(1usize << n) {
        let mut v = psi.clone();
        for (k, ops) in branches.iter().enumerate() {
            let bit = (bits >> (n - 1 - k)) & 1;
            v = ops[bit].apply(&v)?;
        }
        out.extend_from_slice(v.amplitudes());
    }
    Ok(StateKet::new(out))
}

/// History state for a list of elementary labels.
pub fn history_state_reference(
    labels: &[ElementaryLabel],
    psi: &StateKet,
    asg: &ElementaryAssignment,
) -> Result<StateKet> {
    let props: Vec<_> = labels.iter().cloned().map(Proposition::Elementary).collect();
    history_state_of(&props, psi, asg)
}

/// The coherent AND map |0⟩(⟨00|+⟨01|+⟨10|) + |1⟩⟨11| as a 2×4 matrix.
pub fn coherent_and_map() -> ComplexMatrix {
    ComplexMatrix::from_real(&[&[1.0, 1.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]])
}

/// Eigenvalues (ascending) and eigenvectors of A†A for the coherent AND map.
pub fn coherent_and_spectrum() -> (Vec<f64>, ComplexMatrix) {
    let a = coherent_and_map();
    (&a.adjoint() * &a)
        .hermitian_eigen()
        .expect("Gram matrix is Hermitian")
}

/// Largest eigenvalue of A†A; anything above 1 rules out a unitary or
/// deterministic implementation of the coherent AND.
pub fn coherent_and_obstruction() -> f64 {
    *coherent_and_spectrum().0.last().expect("non-empty spectrum")
}

/// Unique positive semidefinite square root. Eigenvalues down to −1e-9 are
/// clamped to zero.
pub fn matrix_sqrt_psd(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (values, vectors) = h.hermitian_eigen()?;
    if let Some(&neg) = values.iter().find(|&&v| v < -ALGEBRA_TOL) {
        return Err(Error::NegativeEigenvalue(neg));
    }
    let roots: Vec<_> = values.iter().map(|&v| c(v.max(0.0).sqrt(), 0.0)).collect();
    Ok(&(&vectors * &ComplexMatrix::diagonal(&roots)) * &vectors.adjoint())
}

/// |0⟩⟨0| or |1⟩⟨1| on a qubit.
pub fn computational_projector(bit: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(bit, bit)] = ONE;
    m
}

/// Diagonal 0/1 projector.
pub fn diagonal_projector(mask: &[bool]) -> ComplexMatrix {
    ComplexMatrix::diagonal(&mask.iter().map(|&b| if b { ONE } else { ZERO }).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn lbl(s: &str) -> ElementaryLabel {
        ElementaryLabel::new(s).unwrap()
    }

    fn p(s: &str) -> Proposition {
        Proposition::parse(s).unwrap()
    }

    fn plus() -> StateKet {
        StateKet::from_real(&[S, S])
    }

    fn asg(pairs: &[(&str, StateKet)]) -> ElementaryAssignment {
        let mut a = ElementaryAssignment::new(pairs[0].1.dim()).unwrap();
        for (k, v) in pairs {
            a.insert_state(lbl(k), v.clone()).unwrap();
        }
        a
    }

    fn one() -> StateKet {
        StateKet::basis(2, 1)
    }

    fn zero() -> StateKet {
        StateKet::basis(2, 0)
    }

    fn all_one() -> ElementaryAssignment {
        asg(&[("a", one()), ("b", one()), ("c", one())])
    }

    #[test]
    fn projector_from_state_examples() {
        let m = projector_from_state(&one()).unwrap();
        assert_eq!(m, ComplexMatrix::from_real(&[&[0.0, 0.0], &[0.0, 1.0]]));
        let m = projector_from_state(&zero()).unwrap();
        assert_eq!(m, ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, 0.0]]));
        let m = projector_from_state(&plus()).unwrap();
        assert!(m.max_abs_diff(&ComplexMatrix::from_real(&[&[0.5, 0.5], &[0.5, 0.5]])) < 1e-15);
        assert!(matches!(
            projector_from_state(&StateKet::from_real(&[1.0, 1.0])),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn operator_of_examples() {
        let op = operator_of(&p("!(a&b)&c"), &all_one()).unwrap();
        assert!(op.max_abs() < 1e-15);
        let a1 = asg(&[("a", one())]);
        let op = operator_of(&p("!a"), &a1).unwrap();
        assert_eq!(op, computational_projector(0));
        // [b][a] for [a]=|0⟩⟨0|, [b]=|+⟩⟨+|, multiplied out by hand:
        // [[.5,.5],[.5,.5]]·[[1,0],[0,0]] = [[.5,0],[.5,0]]
        let ab = asg(&[("a", zero()), ("b", plus())]);
        let op = operator_of(&p("a&b"), &ab).unwrap();
        assert!(op.max_abs_diff(&ComplexMatrix::from_real(&[&[0.5, 0.0], &[0.5, 0.0]])) < 1e-15);
    }

    #[test]
    fn missing_label_and_dimension_errors() {
        let a1 = asg(&[("a", one())]);
        assert_eq!(operator_of(&p("a&b"), &a1), Err(Error::MissingLabel("b".into())));
        assert!(matches!(
            branch_norms(&p("a"), &StateKet::basis(3, 0), &a1),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bad = ElementaryAssignment::new(2).unwrap();
        assert!(matches!(
            bad.insert_projector(lbl("x"), ComplexMatrix::from_real(&[&[1.0, 1.0], &[0.0, 0.0]])),
            Err(Error::NotProjector { .. })
        ));
        assert!(matches!(
            bad.insert_projector(lbl("x"), ComplexMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn branch_norm_examples() {
        let w = branch_norms(&p("!(a&b)&c"), &one(), &all_one()).unwrap();
        assert_eq!((w.w_true, w.w_false), (0.0, 1.0));
        let w = branch_norms(&p("a"), &one(), &asg(&[("a", zero())])).unwrap();
        assert_eq!((w.w_true, w.w_false), (0.0, 1.0));
        let ab = asg(&[("a", zero()), ("b", plus())]);
        let w = branch_norms(&p("a&b"), &zero(), &ab).unwrap();
        assert!((w.w_true - 0.5).abs() < 1e-15 && (w.w_false - 0.5).abs() < 1e-15);
    }

    #[test]
    fn conditional_distribution_examples() {
        let d = conditional_distribution(&p("a"), &zero(), &asg(&[("a", plus())])).unwrap();
        assert!((d.p_true - 0.5).abs() < 1e-15);
        let d = conditional_distribution(&p("!(a&b)&c"), &one(), &all_one()).unwrap();
        assert_eq!((d.p_true, d.p_false), (0.0, 1.0));
        let ab = asg(&[("a", zero()), ("b", plus())]);
        let d = conditional_distribution(&p("a&b"), &zero(), &ab).unwrap();
        assert!((d.p_true - 0.5).abs() < 1e-15 && (d.p_false - 0.5).abs() < 1e-15);
    }

    #[test]
    fn success_probability_examples() {
        let v = overall_success_probability(&p("!(a&b)&c"), &one(), &all_one()).unwrap();
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
        let v = overall_success_probability(&p("a"), &plus(), &asg(&[("a", zero())])).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let ab = asg(&[("a", zero()), ("b", plus())]);
        let v = overall_success_probability(&p("a&b"), &zero(), &ab).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            overall_success_probability(&p("a^b"), &zero(), &ab),
            Err(Error::UnsupportedXor)
        );
    }

    #[test]
    fn test_pair_examples() {
        let ab = asg(&[("a", zero()), ("b", plus())]);
        let chk = is_valid_test_pair(&operator_of(&p("a&b"), &ab).unwrap()).unwrap();
        assert!(!chk.valid && chk.defect > 0.1);
        let diag = asg(&[("a", zero()), ("b", zero())]);
        let chk = is_valid_test_pair(&operator_of(&p("a&b"), &diag).unwrap()).unwrap();
        assert!(chk.valid);
        let chk = is_valid_test_pair(&operator_of(&p("a^b"), &ab).unwrap()).unwrap();
        assert!(chk.valid, "defect {}", chk.defect);
        assert!(matches!(
            is_valid_test_pair(&ComplexMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn history_state_examples() {
        let (al, be) = (0.6, 0.8);
        let psi = StateKet::from_real(&[al, be]);
        let h = history_state_reference(&[lbl("a")], &psi, &asg(&[("a", one())])).unwrap();
        // α|0⟩_a|0⟩_f + β|1⟩_a|1⟩_f
        assert!(h.max_abs_diff(&StateKet::from_real(&[al, 0.0, 0.0, be])) < 1e-15);

        let h = history_state_reference(&[lbl("a")], &zero(), &asg(&[("a", zero())])).unwrap();
        assert!(h.max_abs_diff(&StateKet::from_real(&[0.0, 0.0, 1.0, 0.0])) < 1e-15);

        let h = history_state_reference(&[lbl("a"), lbl("b"), lbl("c")], &one(), &all_one()).unwrap();
        let mut expected = vec![0.0; 16];
        expected[0b1111] = 1.0;
        assert!(h.max_abs_diff(&StateKet::from_real(&expected)) < 1e-15);
        assert!(history_state_reference(&[], &one(), &all_one()).is_err());
    }

    #[test]
    fn coherent_and_spectrum_values() {
        assert!((coherent_and_obstruction() - 3.0).abs() < 1e-9);
        let (vals, vecs) = coherent_and_spectrum();
        assert!((vals[2] - 1.0).abs() < 1e-9);
        assert!(vals[0].abs() < 1e-9 && vals[1].abs() < 1e-9);
        let sym = StateKet::from_real(&[1.0, 1.0, 1.0, 0.0]).normalized().unwrap();
        assert!((crate::linalg::fidelity(&vecs.column(3), &sym) - 1.0).abs() < 1e-12);
        assert!((crate::linalg::fidelity(&vecs.column(2), &StateKet::basis(4, 3)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_examples() {
        let id = ComplexMatrix::identity(3);
        assert!(matrix_sqrt_psd(&id).unwrap().max_abs_diff(&id) < 1e-12);
        let d = ComplexMatrix::from_real(&[&[4.0, 0.0], &[0.0, 0.0]]);
        let r = matrix_sqrt_psd(&d).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::from_real(&[&[2.0, 0.0], &[0.0, 0.0]])) < 1e-12);
        let neg = ComplexMatrix::from_real(&[&[-1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(matrix_sqrt_psd(&neg), Err(Error::NegativeEigenvalue(_))));
        let tiny = ComplexMatrix::from_real(&[&[-1e-12, 0.0], &[0.0, 1.0]]);
        assert!(matrix_sqrt_psd(&tiny).is_ok());
    }

    #[test]
    fn rank_one_detection_from_projector() {
        let mut a = ElementaryAssignment::new(2).unwrap();
        a.insert_projector(lbl("x"), projector_from_state(&plus()).unwrap()).unwrap();
        let st = a.rank_one_state(&lbl("x")).unwrap().unwrap();
        assert!(st.max_abs_diff(&plus()) < 1e-12);
        a.insert_projector(lbl("y"), ComplexMatrix::identity(2)).unwrap();
        assert!(a.rank_one_state(&lbl("y")).unwrap().is_none());
    }
}
