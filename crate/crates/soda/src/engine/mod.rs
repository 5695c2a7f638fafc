//! Matching engines: doctor-proposing deferred acceptance for singles, and
//! ordered couple insertion with stabilization and permutation reordering.

mod da;
mod soda;

pub use da::{deferred_acceptance, deferred_acceptance_with_order};
pub use soda::{
    direct_insertion, run_stabilize, soda, solve, EngineMode, EngineState, SodaReport, SolveMode,
    StabilizeOutcome,
};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::market::{DoctorId, HospitalId};
use crate::matching::Matching;
use crate::rng::{self, SeededRng};

/// An insertion order over couples (a permutation of `0..n_couples`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation(Vec<u32>);

impl Permutation {
    pub fn identity(n: usize) -> Permutation {
        Permutation((0..n as u32).collect())
    }

    pub fn random(n: usize, rng: &mut SeededRng) -> Permutation {
        let mut order: Vec<u32> = (0..n as u32).collect();
        rng::shuffle(rng, &mut order);
        Permutation(order)
    }

    /// Validate an explicit ordering.
    pub fn new(order: Vec<u32>) -> Option<Permutation> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &c in &order {
            if c as usize >= n || seen[c as usize] {
                return None;
            }
            seen[c as usize] = true;
        }
        Some(Permutation(order))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The permutation obtained by moving the couple at position `from` to
    /// just ahead of position `to` (`to < from`); everything between shifts
    /// one slot later.
    pub fn move_ahead(&self, from: usize, to: usize) -> Permutation {
        debug_assert!(to < from && from < self.0.len());
        let mut order = self.0.clone();
        let moved = order.remove(from);
        order.insert(to, moved);
        Permutation(order)
    }
}

/// The set of insertion orders already tried in a run.
#[derive(Debug, Clone, Default)]
pub struct PermutationLog {
    tried: HashSet<Permutation>,
}

impl PermutationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, pi: &Permutation) -> bool {
        self.tried.contains(pi)
    }

    /// Insert; returns `false` if the permutation was already present.
    pub fn insert(&mut self, pi: Permutation) -> bool {
        self.tried.insert(pi)
    }

    pub fn len(&self) -> usize {
        self.tried.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tried.is_empty()
    }
}

/// Which part of the run an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    CoupleApplication,
    Stabilize,
}

/// A doctor pushed off a roster, attributed to the couple whose application
/// started the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvictionEvent {
    pub evictor: u32,
    pub evicted: DoctorId,
    pub hospital: HospitalId,
    pub phase: Phase,
}

/// A doctor newly seated during couple insertion or stabilization,
/// attributed to the couple whose application started the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub doctor: DoctorId,
    pub hospital: HospitalId,
    pub by_couple: u32,
    pub phase: Phase,
}

/// One reordering restart: `moved` was put just ahead of `ahead_of`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub moved: u32,
    pub ahead_of: u32,
    pub permutation: Vec<u32>,
}

/// Full history of a run: orders tried, evictions, placements, restarts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SodaTrace {
    pub tried: Vec<Vec<u32>>,
    pub evictions: Vec<EvictionEvent>,
    pub placements: Vec<Placement>,
    pub restarts: Vec<RestartRecord>,
}

/// Outcome of a couples-insertion run.
#[derive(Debug, Clone, PartialEq)]
pub enum SodaOutcome {
    /// A stable matching was found.
    Stable {
        matching: Matching,
        final_permutation: Permutation,
        restarts: u32,
        trace: SodaTrace,
    },
    /// A couple's own chain reaction evicted one of its members.
    FailSelfEviction { couple: u32 },
    /// The next reordering would revisit an order already tried (or, in
    /// direct mode, a reordering was requested at all).
    FailPermutationExhausted,
    /// Backward-edge mode only: the recorded precedence constraints became
    /// cyclic, so no consistent insertion order exists.
    FailCycleDetected,
}

impl SodaOutcome {
    pub fn is_stable(&self) -> bool {
        matches!(self, SodaOutcome::Stable { .. })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SodaOutcome::Stable { .. } => "stable",
            SodaOutcome::FailSelfEviction { .. } => "fail-self-eviction",
            SodaOutcome::FailPermutationExhausted => "fail-permutation-exhausted",
            SodaOutcome::FailCycleDetected => "fail-cycle-detected",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn move_ahead_shifts_intermediates() {
        let pi = Permutation::new(vec![4, 2, 0, 1, 3]).unwrap();
        // Move position 3 (couple 1) ahead of position 1 (couple 2).
        let moved = pi.move_ahead(3, 1);
        assert_eq!(moved.as_slice(), &[4, 1, 2, 0, 3]);
    }

    #[test]
    fn permutation_log_detects_revisits() {
        let mut log = PermutationLog::new();
        assert!(log.insert(Permutation::identity(3)));
        assert!(!log.insert(Permutation::identity(3)));
        assert!(log.contains(&Permutation::identity(3)));
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![0, 2, 1]).is_some());
        assert!(Permutation::new(vec![0, 0, 1]).is_none());
        assert!(Permutation::new(vec![0, 3, 1]).is_none());
    }
}
