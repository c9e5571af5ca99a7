#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use seqlogic::linalg::{c, ComplexMatrix, StateKet};
use seqlogic::{ElementaryAssignment, ElementaryLabel, Proposition};

pub const LABELS: [&str; 4] = ["a", "b", "c", "d"];

pub fn lbl(s: &str) -> ElementaryLabel {
    ElementaryLabel::new(s).unwrap()
}

pub fn p(s: &str) -> Proposition {
    Proposition::parse(s).unwrap()
}

pub fn random_ket(rng: &mut ChaCha8Rng, dim: usize) -> StateKet {
    loop {
        let v = StateKet::new(
            (0..dim)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        );
        if v.norm_sqr() > 1e-3 {
            return v.normalized().unwrap();
        }
    }
}

/// Orthogonal projector onto the span of `rank` random vectors.
pub fn random_projector(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> ComplexMatrix {
    let mut basis: Vec<StateKet> = Vec::new();
    while basis.len() < rank {
        let mut v = random_ket(rng, dim);
        for b in &basis {
            let overlap = b.inner(&v);
            v = v.sub(&b.scale(overlap));
        }
        if let Some(v) = v.normalized().filter(|_| v.norm_sqr() > 1e-6) {
            basis.push(v);
        }
    }
    let mut m = ComplexMatrix::zeros(dim, dim);
    for b in &basis {
        m = &m + &ComplexMatrix::outer(b, b);
    }
    m
}

/// Random ¬/⊓ proposition with exactly `leaves` leaves over `LABELS`.
pub fn random_prop(rng: &mut ChaCha8Rng, leaves: usize) -> Proposition {
    let node = if leaves == 1 {
        Proposition::Elementary(lbl(LABELS[rng.random_range(0..LABELS.len())]))
    } else {
        let k = rng.random_range(1..leaves);
        Proposition::and(random_prop(rng, k), random_prop(rng, leaves - k))
    };
    if rng.random_bool(0.3) {
        Proposition::not(node)
    } else {
        node
    }
}

pub fn random_rank_one_assignment(rng: &mut ChaCha8Rng) -> ElementaryAssignment {
    let mut asg = ElementaryAssignment::new(2).unwrap();
    for name in LABELS {
        asg.insert_state(lbl(name), random_ket(rng, 2)).unwrap();
    }
    asg
}

pub fn uniform_assignment(state: &StateKet, names: &[&str]) -> ElementaryAssignment {
    let mut asg = ElementaryAssignment::new(state.dim()).unwrap();
    for name in names {
        asg.insert_state(lbl(name), state.clone()).unwrap();
    }
    asg
}

/// Every ¬/⊓ proposition with up to `max_leaves` leaves over `labels`,
/// each node either bare or under a single negation.
pub fn all_props(max_leaves: usize, labels: &[&str]) -> Vec<Proposition> {
    let mut by_size: Vec<Vec<Proposition>> = vec![Vec::new(); max_leaves + 1];
    for n in 1..=max_leaves {
        let mut bare = Vec::new();
        if n == 1 {
            bare.extend(labels.iter().map(|l| Proposition::Elementary(lbl(l))));
        } else {
            for k in 1..n {
                for l in &by_size[k] {
                    for r in &by_size[n - k] {
                        bare.push(Proposition::and(l.clone(), r.clone()));
                    }
                }
            }
        }
        let mut all = Vec::new();
        for b in bare {
            all.push(Proposition::not(b.clone()));
            all.push(b);
        }
        by_size[n] = all;
    }
    by_size.into_iter().flatten().collect()
}
