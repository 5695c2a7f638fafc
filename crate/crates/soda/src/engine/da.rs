//! Doctor-proposing deferred acceptance on the couple-free submarket.

use std::collections::VecDeque;

use crate::market::{DoctorId, DoctorRole, HospitalId, MarketInstance};
use crate::matching::Matching;

/// Deferred-acceptance result together with each single's list pointer
/// (the next position it would apply to). The couple engine resumes rejected
/// singles from these pointers.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DaState {
    pub matching: Matching,
    pub pointers: Vec<usize>,
}

/// Run deferred acceptance over the singles, proposing in `order` (indices
/// into `m.singles()`). Couples are ignored. The outcome is the
/// doctor-optimal stable matching of the couple-free submarket and does not
/// depend on `order`.
pub(crate) fn run_da(m: &MarketInstance, order: &[usize]) -> DaState {
    let mut matching = Matching::empty(m);
    let mut pointers = vec![0usize; m.singles().len()];
    let mut queue: VecDeque<usize> = order.iter().copied().collect();

    while let Some(s_idx) = queue.pop_front() {
        let s = &m.singles()[s_idx];
        // Applies down the remaining list; exhausting it leaves s unassigned.
        while let Some(&h) = s.prefs.get(pointers[s_idx]) {
            pointers[s_idx] += 1;
            match propose(m, &mut matching, s_idx, s.id, h) {
                Proposal::Seated => break,
                Proposal::Rejected => continue,
                Proposal::SeatedEvicting(other) => {
                    let DoctorRole::Single { single_idx } = m.role(other) else {
                        unreachable!("couple-free submarket")
                    };
                    queue.push_back(single_idx);
                    break;
                }
            }
        }
    }
    DaState { matching, pointers }
}

enum Proposal {
    Seated,
    SeatedEvicting(DoctorId),
    Rejected,
}

fn propose(
    m: &MarketInstance,
    mu: &mut Matching,
    s_idx: usize,
    d: DoctorId,
    h: HospitalId,
) -> Proposal {
    let roster = mu.roster(h);
    if roster.len() < m.capacity(h) as usize {
        mu.set_single(m, s_idx, Some(h));
        return Proposal::Seated;
    }
    let worst = roster
        .iter()
        .copied()
        .max_by_key(|&x| m.rank(h, x))
        .expect("full roster is non-empty");
    if m.prefers(h, d, worst) {
        let DoctorRole::Single { single_idx } = m.role(worst) else {
            unreachable!("couple-free submarket")
        };
        mu.set_single(m, single_idx, None);
        mu.set_single(m, s_idx, Some(h));
        Proposal::SeatedEvicting(worst)
    } else {
        Proposal::Rejected
    }
}

/// Doctor-proposing deferred acceptance over the singles of `m`; couples are
/// ignored and left unassigned.
pub fn deferred_acceptance(m: &MarketInstance) -> Matching {
    let order: Vec<usize> = (0..m.singles().len()).collect();
    run_da(m, &order).matching
}

/// Same as [`deferred_acceptance`] but with an explicit initial proposal
/// order; the result is identical for every order.
pub fn deferred_acceptance_with_order(m: &MarketInstance, order: &[usize]) -> Matching {
    run_da(m, order).matching
}
