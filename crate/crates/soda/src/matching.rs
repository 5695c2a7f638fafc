//! Matchings, blocking coalitions, and stability.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::market::{CoupleSlot, DoctorId, DoctorRole, HospitalId, MarketInstance};

/// An assignment of singles and couples to hospitals. Rosters are kept sorted
/// by doctor id so equal matchings compare equal structurally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// By single index; `None` = unassigned (φ).
    single_assignment: Vec<Option<HospitalId>>,
    /// By couple index; `None` = (φ, φ).
    couple_assignment: Vec<Option<(HospitalId, HospitalId)>>,
    /// By hospital id.
    rosters: Vec<Vec<DoctorId>>,
}

/// One violated matching invariant, with its location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchingViolation {
    CapacityExceeded {
        hospital: HospitalId,
        size: usize,
        capacity: u32,
    },
    RosterInconsistent {
        hospital: HospitalId,
        doctor: DoctorId,
    },
    AssignmentMissingFromRoster {
        doctor: DoctorId,
        hospital: HospitalId,
    },
    OffListAssignment {
        doctor: DoctorId,
        hospital: HospitalId,
    },
    OffListCoupleAssignment {
        couple: usize,
    },
}

impl std::fmt::Display for MatchingViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatchingViolation::CapacityExceeded {
                hospital,
                size,
                capacity,
            } => {
                write!(
                    f,
                    "{hospital}: roster holds {size} doctors, capacity is {capacity}"
                )
            }
            MatchingViolation::RosterInconsistent { hospital, doctor } => {
                write!(
                    f,
                    "{hospital}: roster lists {doctor} but {doctor} is not assigned there"
                )
            }
            MatchingViolation::AssignmentMissingFromRoster { doctor, hospital } => {
                write!(
                    f,
                    "{doctor} is assigned to {hospital} but missing from its roster"
                )
            }
            MatchingViolation::OffListAssignment { doctor, hospital } => {
                write!(
                    f,
                    "{doctor} is assigned to {hospital}, which is not on its list"
                )
            }
            MatchingViolation::OffListCoupleAssignment { couple } => {
                write!(
                    f,
                    "couple {couple} is assigned a pair that is not on its list"
                )
            }
        }
    }
}

/// A blocking coalition of one of the three kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    Single {
        doctor: DoctorId,
        hospital: HospitalId,
    },
    CoupleSplit {
        couple: usize,
        first: HospitalId,
        second: HospitalId,
    },
    CoupleJoint {
        couple: usize,
        hospital: HospitalId,
    },
}

impl Matching {
    pub fn empty(m: &MarketInstance) -> Matching {
        Matching {
            single_assignment: vec![None; m.singles().len()],
            couple_assignment: vec![None; m.couples().len()],
            rosters: vec![Vec::new(); m.n_hospitals()],
        }
    }

    /// Build a matching from explicit assignment maps, deriving rosters.
    pub fn from_assignments(
        m: &MarketInstance,
        singles: Vec<Option<HospitalId>>,
        couples: Vec<Option<(HospitalId, HospitalId)>>,
    ) -> Matching {
        let mut mm = Matching {
            single_assignment: singles,
            couple_assignment: couples,
            rosters: vec![Vec::new(); m.n_hospitals()],
        };
        for (i, assignment) in mm.single_assignment.iter().enumerate() {
            if let Some(h) = assignment {
                mm.rosters[h.0 as usize].push(m.singles()[i].id);
            }
        }
        for (i, assignment) in mm.couple_assignment.iter().enumerate() {
            if let Some((ha, hb)) = assignment {
                mm.rosters[ha.0 as usize].push(m.couples()[i].first);
                mm.rosters[hb.0 as usize].push(m.couples()[i].second);
            }
        }
        for roster in &mut mm.rosters {
            roster.sort_unstable();
        }
        mm
    }

    pub fn single_assignment(&self, single_idx: usize) -> Option<HospitalId> {
        self.single_assignment[single_idx]
    }

    pub fn couple_assignment(&self, couple_idx: usize) -> Option<(HospitalId, HospitalId)> {
        self.couple_assignment[couple_idx]
    }

    pub fn roster(&self, h: HospitalId) -> &[DoctorId] {
        &self.rosters[h.0 as usize]
    }

    /// Where a doctor (of either role) currently sits.
    pub fn assignment_of(&self, m: &MarketInstance, d: DoctorId) -> Option<HospitalId> {
        match m.role(d) {
            DoctorRole::Single { single_idx } => self.single_assignment[single_idx],
            DoctorRole::CoupleMember { couple_idx, slot } => self.couple_assignment[couple_idx]
                .map(|(a, b)| match slot {
                    CoupleSlot::First => a,
                    CoupleSlot::Second => b,
                }),
        }
    }

    pub fn assigned_single_count(&self) -> usize {
        self.single_assignment
            .iter()
            .filter(|a| a.is_some())
            .count()
    }

    pub(crate) fn set_single(
        &mut self,
        m: &MarketInstance,
        single_idx: usize,
        h: Option<HospitalId>,
    ) {
        let d = m.singles()[single_idx].id;
        if let Some(old) = self.single_assignment[single_idx] {
            remove_from_roster(&mut self.rosters[old.0 as usize], d);
        }
        if let Some(new) = h {
            insert_into_roster(&mut self.rosters[new.0 as usize], d);
        }
        self.single_assignment[single_idx] = h;
    }

    pub(crate) fn set_couple(
        &mut self,
        m: &MarketInstance,
        couple_idx: usize,
        pair: Option<(HospitalId, HospitalId)>,
    ) {
        let c = &m.couples()[couple_idx];
        if let Some((a, b)) = self.couple_assignment[couple_idx] {
            remove_from_roster(&mut self.rosters[a.0 as usize], c.first);
            remove_from_roster(&mut self.rosters[b.0 as usize], c.second);
        }
        if let Some((a, b)) = pair {
            insert_into_roster(&mut self.rosters[a.0 as usize], c.first);
            insert_into_roster(&mut self.rosters[b.0 as usize], c.second);
        }
        self.couple_assignment[couple_idx] = pair;
    }
}

fn insert_into_roster(roster: &mut Vec<DoctorId>, d: DoctorId) {
    match roster.binary_search(&d) {
        Ok(_) => debug_assert!(false, "doctor already on roster"),
        Err(pos) => roster.insert(pos, d),
    }
}

fn remove_from_roster(roster: &mut Vec<DoctorId>, d: DoctorId) {
    if let Ok(pos) = roster.binary_search(&d) {
        roster.remove(pos);
    } else {
        debug_assert!(false, "doctor missing from roster");
    }
}

/// Check every matching invariant; an empty report means the matching is
/// structurally valid for `m`.
pub fn validate_matching(m: &MarketInstance, mu: &Matching) -> Vec<MatchingViolation> {
    let mut out = Vec::new();
    for (h_idx, roster) in mu.rosters.iter().enumerate() {
        let h = HospitalId(h_idx as u32);
        if roster.len() > m.capacity(h) as usize {
            out.push(MatchingViolation::CapacityExceeded {
                hospital: h,
                size: roster.len(),
                capacity: m.capacity(h),
            });
        }
        for &d in roster {
            if mu.assignment_of(m, d) != Some(h) {
                out.push(MatchingViolation::RosterInconsistent {
                    hospital: h,
                    doctor: d,
                });
            }
        }
    }
    for (i, assignment) in mu.single_assignment.iter().enumerate() {
        let s = &m.singles()[i];
        if let Some(h) = assignment {
            if !mu.rosters[h.0 as usize].binary_search(&s.id).is_ok() {
                out.push(MatchingViolation::AssignmentMissingFromRoster {
                    doctor: s.id,
                    hospital: *h,
                });
            }
            if !s.prefs.contains(h) {
                out.push(MatchingViolation::OffListAssignment {
                    doctor: s.id,
                    hospital: *h,
                });
            }
        }
    }
    for (i, assignment) in mu.couple_assignment.iter().enumerate() {
        let c = &m.couples()[i];
        if let Some(pair) = assignment {
            let (a, b) = *pair;
            if !mu.rosters[a.0 as usize].binary_search(&c.first).is_ok() {
                out.push(MatchingViolation::AssignmentMissingFromRoster {
                    doctor: c.first,
                    hospital: a,
                });
            }
            if !mu.rosters[b.0 as usize].binary_search(&c.second).is_ok() {
                out.push(MatchingViolation::AssignmentMissingFromRoster {
                    doctor: c.second,
                    hospital: b,
                });
            }
            if !c.prefs.contains(pair) {
                out.push(MatchingViolation::OffListCoupleAssignment { couple: i });
            }
        }
    }
    out
}

fn roster_without(roster: &[DoctorId], d: DoctorId) -> Vec<DoctorId> {
    roster.iter().copied().filter(|&x| x != d).collect()
}

/// Would the couple pair (a, b) block at hospitals where its members may
/// already sit? Membership tests follow the choice-function definition with
/// the member added to the current roster (minus itself).
fn couple_pair_blocks(
    m: &MarketInstance,
    mu: &Matching,
    couple_idx: usize,
    a: HospitalId,
    b: HospitalId,
) -> bool {
    let c = &m.couples()[couple_idx];
    if a == b {
        // Joint block: both members must fit together.
        let mut pool = roster_without(&roster_without(mu.roster(a), c.first), c.second);
        pool.push(c.first);
        pool.push(c.second);
        let chosen = m.choice(a, &pool).expect("ids valid");
        chosen.contains(&c.first) && chosen.contains(&c.second)
    } else {
        let ra = roster_without(mu.roster(a), c.first);
        let rb = roster_without(mu.roster(b), c.second);
        m.would_accept(a, &ra, c.first) && m.would_accept(b, &rb, c.second)
    }
}

fn first_single_block(m: &MarketInstance, mu: &Matching, single_idx: usize) -> Option<Block> {
    single_blocks(m, mu, single_idx, true).into_iter().next()
}

fn single_blocks(
    m: &MarketInstance,
    mu: &Matching,
    single_idx: usize,
    first_only: bool,
) -> Vec<Block> {
    let s = &m.singles()[single_idx];
    let current = mu.single_assignment(single_idx);
    let limit = match current {
        Some(h) => s
            .prefs
            .iter()
            .position(|&x| x == h)
            .unwrap_or(s.prefs.len()),
        None => s.prefs.len(),
    };
    let mut out = Vec::new();
    for &h in &s.prefs[..limit] {
        if m.would_accept(h, mu.roster(h), s.id) {
            out.push(Block::Single {
                doctor: s.id,
                hospital: h,
            });
            if first_only {
                return out;
            }
        }
    }
    out
}

fn couple_blocks(
    m: &MarketInstance,
    mu: &Matching,
    couple_idx: usize,
    first_only: bool,
) -> Vec<Block> {
    let c = &m.couples()[couple_idx];
    let current = mu.couple_assignment(couple_idx);
    let limit = match current {
        Some(pair) => c
            .prefs
            .iter()
            .position(|&x| x == pair)
            .unwrap_or(c.prefs.len()),
        None => c.prefs.len(),
    };
    let mut found: Vec<Block> = Vec::new();
    for &(a, b) in &c.prefs[..limit] {
        if couple_pair_blocks(m, mu, couple_idx, a, b) {
            let block = if a == b {
                Block::CoupleJoint {
                    couple: couple_idx,
                    hospital: a,
                }
            } else {
                Block::CoupleSplit {
                    couple: couple_idx,
                    first: a,
                    second: b,
                }
            };
            found.push(block);
            if first_only {
                return found;
            }
        }
    }
    found
}

/// Every blocking coalition of `mu`, in deterministic order: single blocks
/// sorted by (doctor id, hospital id), then couple blocks sorted by
/// (couple index, lexicographic pair).
pub fn find_blocks(
    m: &MarketInstance,
    mu: &Matching,
) -> Result<Vec<Block>, Vec<MatchingViolation>> {
    let violations = validate_matching(m, mu);
    if !violations.is_empty() {
        return Err(violations);
    }
    let mut singles: Vec<Block> = (0..m.singles().len())
        .flat_map(|i| single_blocks(m, mu, i, false))
        .collect();
    singles.sort_unstable_by_key(|b| match b {
        Block::Single { doctor, hospital } => (doctor.0, hospital.0),
        _ => unreachable!(),
    });
    let mut couples: Vec<Block> = (0..m.couples().len())
        .flat_map(|i| couple_blocks(m, mu, i, false))
        .collect();
    couples.sort_unstable_by_key(|b| match *b {
        Block::CoupleSplit {
            couple,
            first,
            second,
        } => (couple, first.0, second.0),
        Block::CoupleJoint { couple, hospital } => (couple, hospital.0, hospital.0),
        _ => unreachable!(),
    });
    singles.extend(couples);
    Ok(singles)
}

/// `true` iff `mu` has no blocking coalition.
pub fn is_stable(m: &MarketInstance, mu: &Matching) -> Result<bool, Vec<MatchingViolation>> {
    let violations = validate_matching(m, mu);
    if !violations.is_empty() {
        return Err(violations);
    }
    Ok(first_block(m, mu).is_none())
}

/// Short-circuiting block search (no validation); used by the oracle's inner
/// loop where candidates are valid by construction.
pub(crate) fn first_block(m: &MarketInstance, mu: &Matching) -> Option<Block> {
    for i in 0..m.singles().len() {
        if let Some(b) = first_single_block(m, mu, i) {
            return Some(b);
        }
    }
    for i in 0..m.couples().len() {
        if let Some(b) = couple_blocks(m, mu, i, true).into_iter().next() {
            return Some(b);
        }
    }
    None
}

/// Hospitals with at least one unfilled position.
pub fn vacancies(m: &MarketInstance, mu: &Matching) -> BTreeSet<HospitalId> {
    (0..m.n_hospitals() as u32)
        .map(HospitalId)
        .filter(|&h| mu.roster(h).len() < m.capacity(h) as usize)
        .collect()
}
