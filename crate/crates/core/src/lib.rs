//! Nondeterministic testing of sequential quantum logic propositions.
//!
//! A proposition over elementary tests (`!` negation, `&` sequential AND,
//! `^` sequential XOR) is given a Hilbert-space meaning by [`oracle`],
//! lowered to a measurement protocol by [`circuit`], executed exactly by
//! [`sim`], and checked against the oracle by [`harness`].
//!
//! ```
//! use seqlogic::{compile, oracle, ElementaryAssignment, PrepPath, Proposition, StateKet};
//! # use seqlogic::ElementaryLabel;
//! let p = Proposition::parse("!(a&b)&c").unwrap();
//! let mut asg = ElementaryAssignment::new(2).unwrap();
//! for x in ["a", "b", "c"] {
//!     asg.insert_state(ElementaryLabel::new(x).unwrap(), StateKet::basis(2, 1)).unwrap();
//! }
//! let psi = StateKet::basis(2, 1);
//! let success = oracle::overall_success_probability(&p, &psi, &asg).unwrap();
//! assert!((success - 1.0 / 9.0).abs() < 1e-12);
//! let circuit = compile(&p, &asg, PrepPath::Teleport).unwrap();
//! assert!(seqlogic::circuit::validate(&circuit).is_empty());
//! ```

pub mod circuit;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod prop;
pub mod seeding;
pub mod sim;

pub use circuit::{compile, Circuit, Instruction, PrepPath};
pub use error::{Error, Result};
pub use harness::{estimate, run_until_success, verify, TrialStats, VerificationReport, VerifyMode, VerifyOptions};
pub use io::AssignmentFile;
pub use linalg::{ComplexMatrix, StateKet, C64};
pub use oracle::ElementaryAssignment;
pub use prop::{ElementaryLabel, Proposition};
pub use sim::{run, run_forced, RunOutcome};
