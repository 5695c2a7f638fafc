//! Ordered couple insertion over the deferred-acceptance baseline.
//!
//! A run repeats passes. Each pass re-establishes the singles-only outcome,
//! then lets couples apply in the current order; each placed couple's
//! displaced singles are re-settled by continued deferred acceptance
//! (stabilization). A couple evicting a previously placed couple aborts the
//! pass: the evictor is moved just ahead of its victim and the pass restarts,
//! failing if the new order was already tried. A couple evicting one of its
//! own members fails the run outright.

use std::collections::VecDeque;

use crate::engine::da::{run_da, DaState};
use crate::engine::{
    EvictionEvent, Permutation, PermutationLog, Phase, Placement, RestartRecord, SodaOutcome,
    SodaTrace,
};
use crate::market::{DoctorId, DoctorRole, HospitalId, MarketInstance};
use crate::matching::Matching;

/// Reordering policy for [`soda`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    /// Move the evictor ahead of its victim; fail on a revisited order.
    Classic,
    /// Additionally record every (evictor before evicted) precedence pair and
    /// only generate orders consistent with all of them; fail if the
    /// constraints become cyclic. Bounds restarts by |C|².
    BackwardEdge,
}

/// Full solver policy: the two [`EngineMode`]s plus the single-permutation
/// variant that fails on any couple-evicts-couple event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Classic,
    BackwardEdge,
    Direct,
}

impl From<EngineMode> for SolveMode {
    fn from(m: EngineMode) -> SolveMode {
        match m {
            EngineMode::Classic => SolveMode::Classic,
            EngineMode::BackwardEdge => SolveMode::BackwardEdge,
        }
    }
}

/// Outcome plus the run history (history covers failed runs too, which the
/// [`SodaOutcome`] alone does not).
#[derive(Debug, Clone, PartialEq)]
pub struct SodaReport {
    pub outcome: SodaOutcome,
    pub trace: SodaTrace,
    pub restarts: u32,
}

/// Result of letting one couple apply down its remaining pair list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoupleApplication {
    /// Accepted somewhere; the displaced singles still need stabilizing.
    Placed { displaced: Vec<DoctorId> },
    /// Ran out of pairs; the couple stays unassigned.
    Exhausted,
    /// Acceptance would push members of previously placed couples off a
    /// roster; nothing was committed.
    CoupleEvicted { couples: Vec<u32> },
}

/// Verdict of one stabilization round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilizeOutcome {
    /// All displaced singles were re-settled (or ran out of hospitals).
    Continue,
    /// The chain evicted a member of the couple that started it.
    SelfEviction,
    /// The chain evicted a member of another, previously placed couple.
    Reorder { evicted_couple: u32 },
}

/// Mutable engine state for one pass: the working matching plus every
/// doctor's list pointer. Exposed so stabilization can be driven directly in
/// tests; normal callers use [`soda`], [`direct_insertion`], or [`solve`].
#[derive(Debug, Clone)]
pub struct EngineState<'m> {
    m: &'m MarketInstance,
    mu: Matching,
    single_ptr: Vec<usize>,
    couple_ptr: Vec<usize>,
    trace: SodaTrace,
}

impl<'m> EngineState<'m> {
    /// State right after the singles-only deferred-acceptance step.
    pub fn new(m: &'m MarketInstance) -> Self {
        let order: Vec<usize> = (0..m.singles().len()).collect();
        Self::from_da(m, &run_da(m, &order))
    }

    fn from_da(m: &'m MarketInstance, da: &DaState) -> Self {
        EngineState {
            m,
            mu: da.matching.clone(),
            single_ptr: da.pointers.clone(),
            couple_ptr: vec![0; m.couples().len()],
            trace: SodaTrace::default(),
        }
    }

    pub fn matching(&self) -> &Matching {
        &self.mu
    }

    pub fn into_matching(self) -> Matching {
        self.mu
    }

    pub fn trace(&self) -> &SodaTrace {
        &self.trace
    }

    fn worst_on_roster(&self, h: HospitalId) -> Option<DoctorId> {
        self.mu
            .roster(h)
            .iter()
            .copied()
            .max_by_key(|&d| self.m.rank(h, d))
    }

    fn record_eviction(
        &mut self,
        evictor: u32,
        evicted: DoctorId,
        hospital: HospitalId,
        phase: Phase,
    ) {
        self.trace.evictions.push(EvictionEvent {
            evictor,
            evicted,
            hospital,
            phase,
        });
    }

    fn record_placement(
        &mut self,
        doctor: DoctorId,
        hospital: HospitalId,
        by_couple: u32,
        phase: Phase,
    ) {
        self.trace.placements.push(Placement {
            doctor,
            hospital,
            by_couple,
            phase,
        });
    }

    /// Let `couple_idx` apply to successive pairs until accepted, out of
    /// pairs, or blocked by a couple eviction. Commits the placement (and the
    /// evictions of displaced singles) only in the `Placed` case.
    pub fn apply_couple(&mut self, couple_idx: usize) -> CoupleApplication {
        let couple_tag = couple_idx as u32;
        loop {
            let c = &self.m.couples()[couple_idx];
            let Some(&(ha, hb)) = c.prefs.get(self.couple_ptr[couple_idx]) else {
                return CoupleApplication::Exhausted;
            };
            self.couple_ptr[couple_idx] += 1;
            let (first, second) = (c.first, c.second);

            let rejected: Vec<DoctorId> = if ha == hb {
                // Joint application: both members must fit together.
                let mut pool = self.mu.roster(ha).to_vec();
                pool.push(first);
                pool.push(second);
                let chosen = self.m.choice(ha, &pool).expect("market ids are valid");
                if !(chosen.contains(&first) && chosen.contains(&second)) {
                    continue; // rejected, next pair
                }
                let mut out: Vec<DoctorId> = self
                    .mu
                    .roster(ha)
                    .iter()
                    .copied()
                    .filter(|d| !chosen.contains(d))
                    .collect();
                out.sort_unstable_by_key(|&d| std::cmp::Reverse(self.m.rank(ha, d)));
                out
            } else {
                // Split application: each hospital considers only its own
                // applicant.
                let accept_a = self.m.would_accept(ha, self.mu.roster(ha), first);
                let accept_b = self.m.would_accept(hb, self.mu.roster(hb), second);
                if !(accept_a && accept_b) {
                    continue;
                }
                let mut out = Vec::new();
                if self.mu.roster(ha).len() == self.m.capacity(ha) as usize {
                    out.push(self.worst_on_roster(ha).expect("full roster"));
                }
                if self.mu.roster(hb).len() == self.m.capacity(hb) as usize {
                    out.push(self.worst_on_roster(hb).expect("full roster"));
                }
                if out.contains(&first) || out.contains(&second) {
                    // One member's acceptance would displace the other;
                    // treat the pair as rejecting.
                    continue;
                }
                out
            };

            let mut hit_couples: Vec<u32> = rejected
                .iter()
                .filter_map(|&d| match self.m.role(d) {
                    DoctorRole::CoupleMember {
                        couple_idx: other, ..
                    } => Some(other as u32),
                    DoctorRole::Single { .. } => None,
                })
                .collect();
            hit_couples.sort_unstable();
            hit_couples.dedup();
            if !hit_couples.is_empty() {
                // A previously placed couple would be evicted; leave the
                // matching untouched and let the caller reorder.
                debug_assert!(!hit_couples.contains(&couple_tag));
                return CoupleApplication::CoupleEvicted {
                    couples: hit_couples,
                };
            }

            // Commit: displaced singles leave, the couple sits down.
            for &d in &rejected {
                let DoctorRole::Single { single_idx } = self.m.role(d) else {
                    unreachable!()
                };
                let at = self
                    .mu
                    .single_assignment(single_idx)
                    .expect("was on a roster");
                self.record_eviction(couple_tag, d, at, Phase::CoupleApplication);
                self.mu.set_single(self.m, single_idx, None);
            }
            self.mu.set_couple(self.m, couple_idx, Some((ha, hb)));
            self.record_placement(first, ha, couple_tag, Phase::CoupleApplication);
            self.record_placement(second, hb, couple_tag, Phase::CoupleApplication);
            return CoupleApplication::Placed {
                displaced: rejected,
            };
        }
    }

    fn stabilize_queue(
        &mut self,
        b: &mut VecDeque<usize>,
        current_couple: u32,
    ) -> StabilizeOutcome {
        while let Some(s_idx) = b.pop_front() {
            loop {
                let s = &self.m.singles()[s_idx];
                let Some(&h) = s.prefs.get(self.single_ptr[s_idx]) else {
                    break; // list exhausted: stays unassigned
                };
                self.single_ptr[s_idx] += 1;
                let d = s.id;
                if self.mu.roster(h).len() < self.m.capacity(h) as usize {
                    self.mu.set_single(self.m, s_idx, Some(h));
                    self.record_placement(d, h, current_couple, Phase::Stabilize);
                    break;
                }
                let worst = self.worst_on_roster(h).expect("full roster");
                if !self.m.prefers(h, d, worst) {
                    continue; // the applicant itself is the one rejected
                }
                match self.m.role(worst) {
                    DoctorRole::CoupleMember { couple_idx, .. }
                        if couple_idx as u32 == current_couple =>
                    {
                        return StabilizeOutcome::SelfEviction;
                    }
                    DoctorRole::CoupleMember { couple_idx, .. } => {
                        return StabilizeOutcome::Reorder {
                            evicted_couple: couple_idx as u32,
                        };
                    }
                    DoctorRole::Single { single_idx } => {
                        self.record_eviction(current_couple, worst, h, Phase::Stabilize);
                        self.mu.set_single(self.m, single_idx, None);
                        self.mu.set_single(self.m, s_idx, Some(h));
                        self.record_placement(d, h, current_couple, Phase::Stabilize);
                        b.push_back(single_idx);
                        break;
                    }
                }
            }
        }
        StabilizeOutcome::Continue
    }
}

/// Re-settle displaced singles by continued deferred acceptance, FIFO.
/// `displaced` must contain singles only (couple members never enter the
/// displaced queue: evicting one aborts the pass instead).
pub fn run_stabilize(
    state: &mut EngineState<'_>,
    displaced: &[DoctorId],
    current_couple: u32,
) -> StabilizeOutcome {
    let mut b: VecDeque<usize> = displaced
        .iter()
        .map(|&d| match state.m.role(d) {
            DoctorRole::Single { single_idx } => single_idx,
            DoctorRole::CoupleMember { .. } => {
                panic!("displaced queue holds single doctors only")
            }
        })
        .collect();
    state.stabilize_queue(&mut b, current_couple)
}

enum PassResult {
    Done,
    SelfEviction { couple: u32 },
    Reorder { evictor: u32, evicted: u32 },
}

fn run_pass(state: &mut EngineState<'_>, pi: &Permutation) -> PassResult {
    let mut b = VecDeque::new();
    for pos in 0..pi.len() {
        let couple_idx = pi.as_slice()[pos] as usize;
        match state.apply_couple(couple_idx) {
            CoupleApplication::Exhausted => continue,
            CoupleApplication::CoupleEvicted { couples } => {
                // If several placed couples are hit, reorder against the one
                // earliest in the current order.
                let evicted = couples
                    .iter()
                    .copied()
                    .min_by_key(|&c| {
                        pi.as_slice()
                            .iter()
                            .position(|&x| x == c)
                            .expect("placed couple is in pi")
                    })
                    .expect("non-empty");
                return PassResult::Reorder {
                    evictor: couple_idx as u32,
                    evicted,
                };
            }
            CoupleApplication::Placed { displaced } => {
                b.clear();
                for d in displaced {
                    let DoctorRole::Single { single_idx } = state.m.role(d) else {
                        unreachable!()
                    };
                    b.push_back(single_idx);
                }
                match state.stabilize_queue(&mut b, couple_idx as u32) {
                    StabilizeOutcome::Continue => {}
                    StabilizeOutcome::SelfEviction => {
                        return PassResult::SelfEviction {
                            couple: couple_idx as u32,
                        }
                    }
                    StabilizeOutcome::Reorder { evicted_couple } => {
                        return PassResult::Reorder {
                            evictor: couple_idx as u32,
                            evicted: evicted_couple,
                        }
                    }
                }
            }
        }
    }
    PassResult::Done
}

/// Kahn's algorithm over the recorded precedence pairs, breaking ties by
/// position in the default order. `None` means the constraints are cyclic.
fn consistent_order(
    n: usize,
    constraints: &[(u32, u32)],
    default: &Permutation,
) -> Option<Permutation> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut pos0 = vec![0usize; n];
    for (p, &c) in default.as_slice().iter().enumerate() {
        pos0[c as usize] = p;
    }
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for &(before, after) in constraints {
        adj[before as usize].push(after);
        indegree[after as usize] += 1;
    }
    let mut ready: BinaryHeap<Reverse<(usize, u32)>> = (0..n as u32)
        .filter(|&c| indegree[c as usize] == 0)
        .map(|c| Reverse((pos0[c as usize], c)))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, c))) = ready.pop() {
        order.push(c);
        for &next in &adj[c as usize] {
            indegree[next as usize] -= 1;
            if indegree[next as usize] == 0 {
                ready.push(Reverse((pos0[next as usize], next)));
            }
        }
    }
    (order.len() == n).then(|| Permutation::new(order).expect("kahn output is a permutation"))
}

/// Run the full solver and keep the trace even on failure. The trace's
/// eviction/placement records describe the final pass; the restart log and
/// the list of tried orders cover the whole run.
pub fn solve(m: &MarketInstance, pi0: Permutation, mode: SolveMode) -> SodaReport {
    assert_eq!(
        pi0.len(),
        m.couples().len(),
        "permutation length must match couple count"
    );
    let order: Vec<usize> = (0..m.singles().len()).collect();
    let da = run_da(m, &order);

    let mut pi = pi0.clone();
    let mut log = PermutationLog::new();
    let mut restart_log: Vec<RestartRecord> = Vec::new();
    let mut tried: Vec<Vec<u32>> = Vec::new();
    let mut constraints: Vec<(u32, u32)> = Vec::new();
    let mut restarts = 0u32;

    fn full_trace(
        state: EngineState<'_>,
        tried: &[Vec<u32>],
        restart_log: &[RestartRecord],
    ) -> SodaTrace {
        let mut trace = state.trace;
        trace.tried = tried.to_vec();
        trace.restarts = restart_log.to_vec();
        trace
    }

    loop {
        tried.push(pi.as_slice().to_vec());
        let mut state = EngineState::from_da(m, &da);
        let pass = run_pass(&mut state, &pi);
        match pass {
            PassResult::Done => {
                let matching = state.mu.clone();
                let trace = full_trace(state, &tried, &restart_log);
                let outcome = SodaOutcome::Stable {
                    matching,
                    final_permutation: pi,
                    restarts,
                    trace: trace.clone(),
                };
                return SodaReport {
                    outcome,
                    trace,
                    restarts,
                };
            }
            PassResult::SelfEviction { couple } => {
                let trace = full_trace(state, &tried, &restart_log);
                return SodaReport {
                    outcome: SodaOutcome::FailSelfEviction { couple },
                    trace,
                    restarts,
                };
            }
            PassResult::Reorder { evictor, evicted } => {
                if mode == SolveMode::Direct {
                    let trace = full_trace(state, &tried, &restart_log);
                    return SodaReport {
                        outcome: SodaOutcome::FailPermutationExhausted,
                        trace,
                        restarts,
                    };
                }
                let from = pi
                    .as_slice()
                    .iter()
                    .position(|&c| c == evictor)
                    .expect("in pi");
                let to = pi
                    .as_slice()
                    .iter()
                    .position(|&c| c == evicted)
                    .expect("in pi");
                debug_assert!(to < from, "the evicted couple was placed earlier");
                let next = match mode {
                    SolveMode::Classic => {
                        let candidate = pi.move_ahead(from, to);
                        if log.contains(&candidate) {
                            let trace = full_trace(state, &tried, &restart_log);
                            return SodaReport {
                                outcome: SodaOutcome::FailPermutationExhausted,
                                trace,
                                restarts,
                            };
                        }
                        log.insert(candidate.clone());
                        candidate
                    }
                    SolveMode::BackwardEdge => {
                        debug_assert!(!constraints.contains(&(evictor, evicted)));
                        constraints.push((evictor, evicted));
                        match consistent_order(m.couples().len(), &constraints, &pi0) {
                            Some(order) => order,
                            None => {
                                let trace = full_trace(state, &tried, &restart_log);
                                return SodaReport {
                                    outcome: SodaOutcome::FailCycleDetected,
                                    trace,
                                    restarts,
                                };
                            }
                        }
                    }
                    SolveMode::Direct => unreachable!(),
                };
                restart_log.push(RestartRecord {
                    moved: evictor,
                    ahead_of: evicted,
                    permutation: next.as_slice().to_vec(),
                });
                restarts += 1;
                pi = next;
            }
        }
    }
}

/// Sorted deferred acceptance: insert couples in the order `pi0`, reordering
/// on couple-evicts-couple events per `mode`.
pub fn soda(m: &MarketInstance, pi0: Permutation, mode: EngineMode) -> SodaOutcome {
    solve(m, pi0, mode.into()).outcome
}

/// The single-permutation variant: any couple-evicts-couple event fails the
/// run immediately (reported as `FailPermutationExhausted`, the only order
/// having been used up).
pub fn direct_insertion(m: &MarketInstance, pi0: Permutation) -> SodaOutcome {
    solve(m, pi0, SolveMode::Direct).outcome
}
