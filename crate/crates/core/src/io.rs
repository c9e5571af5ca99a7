//! JSON assignment files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "dimension": 2,
//!   "elementary": {
//!     "a": { "state": [[0, 0], [1, 0]] },
//!     "b": { "projector": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]] }
//!   },
//!   "initial_state": [[0, 0], [1, 0]]
//! }
//! ```
//!
//! Complex numbers are `[re, im]` pairs. States must be normalized within
//! 1e-9 and are renormalized exactly on load.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, StateKet, ALGEBRA_TOL, C64};
use crate::oracle::ElementaryAssignment;
use crate::prop::{ElementaryLabel, Proposition};

pub const ASSIGNMENT_FORMAT_VERSION: u32 = 1;

pub type Pair = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ElementarySpec {
    #[serde(rename = "state")]
    State(Vec<Pair>),
    #[serde(rename = "projector")]
    Projector(Vec<Vec<Pair>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentFile {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub dimension: usize,
    pub elementary: BTreeMap<String, ElementarySpec>,
    pub initial_state: Vec<Pair>,
}

fn default_version() -> u32 {
    ASSIGNMENT_FORMAT_VERSION
}

fn to_c(p: &Pair) -> C64 {
    c(p[0], p[1])
}

pub fn ket_to_pairs(k: &StateKet) -> Vec<Pair> {
    k.amplitudes().iter().map(|z| [z.re, z.im]).collect()
}

pub fn matrix_to_pairs(m: &ComplexMatrix) -> Vec<Vec<Pair>> {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn load_state(what: &str, pairs: &[Pair], dim: usize) -> Result<StateKet> {
    if pairs.len() != dim {
        return Err(Error::InvalidFile(format!(
            "{what}: expected {dim} amplitudes, found {}",
            pairs.len()
        )));
    }
    if pairs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidFile(format!("{what}: non-finite amplitude")));
    }
    let k = StateKet::new(pairs.iter().map(to_c).collect());
    let n = k.norm_sqr();
    if (n - 1.0).abs() > ALGEBRA_TOL {
        return Err(Error::InvalidFile(format!("{what}: state not normalized (squared norm {n})")));
    }
    Ok(k.normalized().expect("nonzero"))
}

impl AssignmentFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidFile(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Builds a file from an in-memory assignment, writing projectors.
    pub fn from_parts(asg: &ElementaryAssignment, psi: &StateKet) -> Self {
        let elementary = asg
            .labels()
            .map(|l| {
                let spec = match asg.rank_one_state(l) {
                    Ok(Some(s)) => ElementarySpec::State(ket_to_pairs(s)),
                    _ => ElementarySpec::Projector(matrix_to_pairs(asg.projector(l).expect("present"))),
                };
                (l.to_string(), spec)
            })
            .collect();
        Self {
            format_version: ASSIGNMENT_FORMAT_VERSION,
            dimension: asg.system_dim(),
            elementary,
            initial_state: ket_to_pairs(psi),
        }
    }

    pub fn load(&self) -> Result<(ElementaryAssignment, StateKet)> {
        if self.format_version != ASSIGNMENT_FORMAT_VERSION {
            return Err(Error::InvalidFile(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let d = self.dimension;
        let mut asg = ElementaryAssignment::new(d)?;
        for (name, spec) in &self.elementary {
            let label = ElementaryLabel::new(name.clone())?;
            match spec {
                ElementarySpec::State(pairs) => {
                    asg.insert_state(label, load_state(&format!("elementary `{name}`"), pairs, d)?)?
                }
                ElementarySpec::Projector(rows) => {
                    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                        return Err(Error::InvalidFile(format!(
                            "elementary `{name}`: projector must be {d}x{d}"
                        )));
                    }
                    let m = ComplexMatrix::from_rows(rows.iter().map(|r| r.iter().map(to_c).collect()).collect())?;
                    asg.insert_projector(label, m)?;
                }
            }
        }
        let psi = load_state("initial_state", &self.initial_state, d)?;
        Ok((asg, psi))
    }

    /// Loads and checks that every leaf of `p` is assigned.
    pub fn load_for(&self, p: &Proposition) -> Result<(ElementaryAssignment, StateKet)> {
        let (asg, psi) = self.load()?;
        asg.require_labels(p)?;
        Ok((asg, psi))
    }
}
