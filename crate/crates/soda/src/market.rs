//! Domain model: hospitals, single doctors, couples, and hospital choice
//! functions.
//!
//! Conventions used throughout the crate:
//! - all preference lists are best-first;
//! - a doctor finds acceptable exactly the hospitals (or hospital pairs) on
//!   its list — being unassigned ranks strictly below every listed option,
//!   and unlisted hospitals are never applied to or blocked with;
//! - hospital rankings are strict total orders over *all* doctors.

use serde::{Deserialize, Serialize};

use crate::error::MarketError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DoctorId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HospitalId(pub u32);

impl std::fmt::Display for DoctorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "d{}", self.0)
    }
}

impl std::fmt::Display for HospitalId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "h{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hospital {
    pub capacity: u32,
    /// Strict ranking over all doctors, best first.
    pub ranking: Vec<DoctorId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Single {
    pub id: DoctorId,
    /// Acceptable hospitals, best first. May be a prefix of H.
    pub prefs: Vec<HospitalId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Couple {
    pub first: DoctorId,
    pub second: DoctorId,
    /// Acceptable hospital pairs, best first. Pairs with equal components
    /// (both members at the same hospital) are permitted.
    pub prefs: Vec<(HospitalId, HospitalId)>,
}

/// Which member of a couple a doctor is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoupleSlot {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoctorRole {
    Single { single_idx: usize },
    CoupleMember { couple_idx: usize, slot: CoupleSlot },
}

/// Optional generation metadata carried by generated markets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketMeta {
    pub n: usize,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub single_lists_truncated: bool,
    #[serde(default)]
    pub couple_lists_truncated: bool,
}

/// A validated matching market. Construction checks every structural
/// invariant; the derived rank tables make hospital comparisons O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    hospitals: Vec<Hospital>,
    singles: Vec<Single>,
    couples: Vec<Couple>,
    pub params: Option<MarketMeta>,
    roles: Vec<DoctorRole>,
    /// rank_of[h][d] = position of doctor d in hospital h's ranking (0 = best).
    rank_of: Vec<Vec<u32>>,
}

impl MarketInstance {
    pub fn new(
        hospitals: Vec<Hospital>,
        singles: Vec<Single>,
        couples: Vec<Couple>,
        params: Option<MarketMeta>,
    ) -> Result<Self, MarketError> {
        let n_doctors = singles.len() + 2 * couples.len();
        let n_hospitals = hospitals.len();

        let mut roles: Vec<Option<DoctorRole>> = vec![None; n_doctors];
        let mut claim = |id: DoctorId, role: DoctorRole| -> Result<(), MarketError> {
            let idx = id.0 as usize;
            if idx >= n_doctors {
                return Err(MarketError::DoctorIdsNotDense(id.0));
            }
            if roles[idx].is_some() {
                return Err(MarketError::DuplicateDoctor(id.0));
            }
            roles[idx] = Some(role);
            Ok(())
        };
        for (i, s) in singles.iter().enumerate() {
            claim(s.id, DoctorRole::Single { single_idx: i })?;
        }
        for (i, c) in couples.iter().enumerate() {
            if c.first == c.second {
                return Err(MarketError::DegenerateCouple { couple: i });
            }
            claim(
                c.first,
                DoctorRole::CoupleMember {
                    couple_idx: i,
                    slot: CoupleSlot::First,
                },
            )?;
            claim(
                c.second,
                DoctorRole::CoupleMember {
                    couple_idx: i,
                    slot: CoupleSlot::Second,
                },
            )?;
        }
        let roles: Vec<DoctorRole> = roles
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or(MarketError::DoctorIdsNotDense(i as u32)))
            .collect::<Result<_, _>>()?;

        if hospitals.iter().map(|h| h.capacity as u64).sum::<u64>() == 0 {
            return Err(MarketError::NoPositions);
        }
        let mut rank_of = Vec::with_capacity(n_hospitals);
        for (h_idx, h) in hospitals.iter().enumerate() {
            if h.capacity == 0 {
                return Err(MarketError::ZeroCapacity(h_idx as u32));
            }
            if h.ranking.len() != n_doctors {
                return Err(MarketError::RankingNotPermutation {
                    hospital: h_idx as u32,
                });
            }
            let mut table = vec![u32::MAX; n_doctors];
            for (pos, d) in h.ranking.iter().enumerate() {
                let di = d.0 as usize;
                if di >= n_doctors || table[di] != u32::MAX {
                    return Err(MarketError::RankingNotPermutation {
                        hospital: h_idx as u32,
                    });
                }
                table[di] = pos as u32;
            }
            rank_of.push(table);
        }

        let check_hospital = |h: HospitalId| -> Result<(), MarketError> {
            if (h.0 as usize) < n_hospitals {
                Ok(())
            } else {
                Err(MarketError::UnknownHospital(h.0))
            }
        };
        for s in &singles {
            let mut seen = vec![false; n_hospitals];
            for &h in &s.prefs {
                check_hospital(h)?;
                if seen[h.0 as usize] {
                    return Err(MarketError::DuplicateSinglePref {
                        doctor: s.id.0,
                        hospital: h.0,
                    });
                }
                seen[h.0 as usize] = true;
            }
        }
        for (i, c) in couples.iter().enumerate() {
            let mut seen = std::collections::HashSet::new();
            for &(a, b) in &c.prefs {
                check_hospital(a)?;
                check_hospital(b)?;
                if !seen.insert((a, b)) {
                    return Err(MarketError::DuplicateCouplePref { couple: i });
                }
            }
        }

        Ok(MarketInstance {
            hospitals,
            singles,
            couples,
            params,
            roles,
            rank_of,
        })
    }

    pub fn hospitals(&self) -> &[Hospital] {
        &self.hospitals
    }

    pub fn singles(&self) -> &[Single] {
        &self.singles
    }

    pub fn couples(&self) -> &[Couple] {
        &self.couples
    }

    pub fn n_hospitals(&self) -> usize {
        self.hospitals.len()
    }

    pub fn n_doctors(&self) -> usize {
        self.roles.len()
    }

    pub fn capacity(&self, h: HospitalId) -> u32 {
        self.hospitals[h.0 as usize].capacity
    }

    pub fn role(&self, d: DoctorId) -> DoctorRole {
        self.roles[d.0 as usize]
    }

    /// Position of `d` in `h`'s ranking; lower is better.
    pub fn rank(&self, h: HospitalId, d: DoctorId) -> u32 {
        self.rank_of[h.0 as usize][d.0 as usize]
    }

    /// Does hospital `h` strictly prefer `a` over `b`?
    pub fn prefers(&self, h: HospitalId, a: DoctorId, b: DoctorId) -> bool {
        self.rank(h, a) < self.rank(h, b)
    }

    /// Replace one single's preference list (used by the misreport probe).
    pub fn with_single_prefs(
        &self,
        single_idx: usize,
        prefs: Vec<HospitalId>,
    ) -> Result<Self, MarketError> {
        let mut m = self.clone();
        let mut seen = vec![false; m.hospitals.len()];
        for &h in &prefs {
            if h.0 as usize >= m.hospitals.len() {
                return Err(MarketError::UnknownHospital(h.0));
            }
            if seen[h.0 as usize] {
                return Err(MarketError::DuplicateSinglePref {
                    doctor: m.singles[single_idx].id.0,
                    hospital: h.0,
                });
            }
            seen[h.0 as usize] = true;
        }
        m.singles[single_idx].prefs = prefs;
        Ok(m)
    }

    /// Replace one couple's pair list (used by the misreport probe).
    pub fn with_couple_prefs(
        &self,
        couple_idx: usize,
        prefs: Vec<(HospitalId, HospitalId)>,
    ) -> Result<Self, MarketError> {
        let mut m = self.clone();
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &prefs {
            if a.0 as usize >= m.hospitals.len() || b.0 as usize >= m.hospitals.len() {
                return Err(MarketError::UnknownHospital(a.0.max(b.0)));
            }
            if !seen.insert((a, b)) {
                return Err(MarketError::DuplicateCouplePref { couple: couple_idx });
            }
        }
        m.couples[couple_idx].prefs = prefs;
        Ok(m)
    }

    /// Hospital `h`'s choice from a set of applicants: the `min(|A|, k_h)`
    /// highest-ranked applicants under `h`'s ranking, best first.
    pub fn choice(
        &self,
        h: HospitalId,
        applicants: &[DoctorId],
    ) -> Result<Vec<DoctorId>, MarketError> {
        if h.0 as usize >= self.hospitals.len() {
            return Err(MarketError::UnknownHospital(h.0));
        }
        for &d in applicants {
            if d.0 as usize >= self.roles.len() {
                return Err(MarketError::UnknownDoctor(d.0));
            }
        }
        let mut chosen: Vec<DoctorId> = applicants.to_vec();
        chosen.sort_unstable_by_key(|&d| self.rank(h, d));
        chosen.dedup();
        chosen.truncate(self.capacity(h) as usize);
        Ok(chosen)
    }

    /// Would `h` keep `d` if `d` applied alongside the current roster?
    /// Equivalent to `d ∈ choice(h, roster ∪ {d})` for `d ∉ roster`.
    pub fn would_accept(&self, h: HospitalId, roster: &[DoctorId], d: DoctorId) -> bool {
        if roster.len() < self.capacity(h) as usize {
            return true;
        }
        let worst = roster
            .iter()
            .copied()
            .max_by_key(|&x| self.rank(h, x))
            .expect("non-empty");
        self.prefers(h, d, worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn choice_takes_top_ranked_applicants() {
        // h0 ranks d0 > d7 > d8 > d1 > d4 > d2 > d5 > d3 > d6, capacity 2.
        let m = fixtures::demo_market();
        let picked = m
            .choice(HospitalId(0), &[DoctorId(0), DoctorId(1), DoctorId(2)])
            .unwrap();
        assert_eq!(picked, vec![DoctorId(0), DoctorId(1)]);
    }

    #[test]
    fn choice_empty_and_under_capacity() {
        let m = fixtures::demo_market();
        assert!(m.choice(HospitalId(0), &[]).unwrap().is_empty());
        // h2 has capacity 2 and two applicants fit as-is.
        let picked = m
            .choice(HospitalId(2), &[DoctorId(3), DoctorId(6)])
            .unwrap();
        assert_eq!(picked.len(), 2);
        assert!(picked.contains(&DoctorId(3)) && picked.contains(&DoctorId(6)));
    }

    #[test]
    fn choice_rejects_unknown_ids() {
        let m = fixtures::demo_market();
        assert!(m.choice(HospitalId(0), &[DoctorId(99)]).is_err());
        assert!(m.choice(HospitalId(99), &[DoctorId(0)]).is_err());
    }

    #[test]
    fn construction_rejects_bad_markets() {
        // Ranking missing a doctor.
        let bad = MarketInstance::new(
            vec![Hospital {
                capacity: 1,
                ranking: vec![DoctorId(0)],
            }],
            vec![
                Single {
                    id: DoctorId(0),
                    prefs: vec![HospitalId(0)],
                },
                Single {
                    id: DoctorId(1),
                    prefs: vec![HospitalId(0)],
                },
            ],
            vec![],
            None,
        );
        assert!(matches!(
            bad,
            Err(MarketError::RankingNotPermutation { .. })
        ));

        // Duplicate preference entry.
        let bad = MarketInstance::new(
            vec![Hospital {
                capacity: 1,
                ranking: vec![DoctorId(0)],
            }],
            vec![Single {
                id: DoctorId(0),
                prefs: vec![HospitalId(0), HospitalId(0)],
            }],
            vec![],
            None,
        );
        assert!(matches!(bad, Err(MarketError::DuplicateSinglePref { .. })));

        // Couple member reused as a single.
        let bad = MarketInstance::new(
            vec![Hospital {
                capacity: 1,
                ranking: vec![DoctorId(0), DoctorId(1), DoctorId(2)],
            }],
            vec![
                Single {
                    id: DoctorId(0),
                    prefs: vec![],
                },
                Single {
                    id: DoctorId(1),
                    prefs: vec![],
                },
            ],
            vec![Couple {
                first: DoctorId(1),
                second: DoctorId(2),
                prefs: vec![],
            }],
            None,
        );
        assert!(matches!(bad, Err(MarketError::DuplicateDoctor(1))));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_market_and_applicants() -> impl Strategy<Value = (MarketInstance, Vec<DoctorId>)> {
            (2usize..8, 1u32..4, 1usize..8).prop_flat_map(|(n_docs, cap, _)| {
                let ranking =
                    Just((0..n_docs as u32).map(DoctorId).collect::<Vec<_>>()).prop_shuffle();
                (
                    ranking,
                    proptest::collection::vec(0..n_docs as u32, 0..n_docs),
                )
                    .prop_map(move |(ranking, applicants)| {
                        let singles = (0..n_docs as u32)
                            .map(|i| Single {
                                id: DoctorId(i),
                                prefs: vec![HospitalId(0)],
                            })
                            .collect();
                        let m = MarketInstance::new(
                            vec![Hospital {
                                capacity: cap,
                                ranking,
                            }],
                            singles,
                            vec![],
                            None,
                        )
                        .unwrap();
                        let mut applicants: Vec<DoctorId> =
                            applicants.into_iter().map(DoctorId).collect();
                        applicants.sort_unstable();
                        applicants.dedup();
                        (m, applicants)
                    })
            })
        }

        proptest! {
            // choice is a monotone contraction: subset of applicants, exact size.
            #[test]
            fn choice_contraction((m, applicants) in arb_market_and_applicants()) {
                let h = HospitalId(0);
                let picked = m.choice(h, &applicants).unwrap();
                prop_assert_eq!(
                    picked.len(),
                    applicants.len().min(m.capacity(h) as usize)
                );
                for d in &picked {
                    prop_assert!(applicants.contains(d));
                }
            }

            // choice consistency: chosen from A and still present in B ⊆ A ⇒ chosen from B.
            #[test]
            fn choice_consistency((m, applicants) in arb_market_and_applicants(), mask in proptest::collection::vec(any::<bool>(), 8)) {
                let h = HospitalId(0);
                let picked_a = m.choice(h, &applicants).unwrap();
                let sub: Vec<DoctorId> = applicants
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask.get(*i).copied().unwrap_or(false))
                    .map(|(_, &d)| d)
                    .collect();
                let picked_b = m.choice(h, &sub).unwrap();
                for d in picked_a {
                    if sub.contains(&d) {
                        prop_assert!(picked_b.contains(&d));
                    }
                }
            }
        }
    }
}
