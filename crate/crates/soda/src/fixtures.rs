//! Small hand-built markets used by the examples and the test suites.

use crate::market::{Couple, DoctorId, Hospital, HospitalId, MarketInstance, Single};

fn h(ids: &[u32]) -> Vec<DoctorId> {
    ids.iter().map(|&i| DoctorId(i)).collect()
}

fn prefs(ids: &[u32]) -> Vec<HospitalId> {
    ids.iter().map(|&i| HospitalId(i)).collect()
}

fn pairs(ps: &[(u32, u32)]) -> Vec<(HospitalId, HospitalId)> {
    ps.iter()
        .map(|&(a, b)| (HospitalId(a), HospitalId(b)))
        .collect()
}

/// Five hospitals of capacity 2, five singles (d0–d4) and two couples
/// c0 = (d5, d6), c1 = (d7, d8). Crafted so that the singles-only outcome is
/// {d0,d1 → h0; d2 → h1; d3,d4 → h2} and couple insertion in index order
/// succeeds without any couple evicting another.
pub fn demo_market() -> MarketInstance {
    let hospitals = vec![
        Hospital {
            capacity: 2,
            ranking: h(&[0, 7, 8, 1, 4, 2, 5, 3, 6]),
        },
        Hospital {
            capacity: 2,
            ranking: h(&[0, 7, 8, 1, 4, 2, 5, 3, 6]),
        },
        Hospital {
            capacity: 2,
            ranking: h(&[0, 7, 8, 2, 5, 1, 4, 6, 3]),
        },
        Hospital {
            capacity: 2,
            ranking: h(&[0, 7, 8, 2, 4, 3, 5, 1, 6]),
        },
        Hospital {
            capacity: 2,
            ranking: h(&[0, 7, 8, 5, 3, 1, 4, 6, 2]),
        },
    ];
    let singles = vec![
        Single {
            id: DoctorId(0),
            prefs: prefs(&[0, 1, 2, 3, 4]),
        },
        Single {
            id: DoctorId(1),
            prefs: prefs(&[0, 1, 2, 4]),
        },
        Single {
            id: DoctorId(2),
            prefs: prefs(&[0, 1, 2, 3, 4]),
        },
        Single {
            id: DoctorId(3),
            prefs: prefs(&[2, 4, 0, 3, 1]),
        },
        Single {
            id: DoctorId(4),
            prefs: prefs(&[2, 4, 0, 1, 3]),
        },
    ];
    let couples = vec![
        Couple {
            first: DoctorId(5),
            second: DoctorId(6),
            prefs: pairs(&[(0, 1), (1, 0), (2, 3), (3, 4), (4, 4)]),
        },
        Couple {
            first: DoctorId(7),
            second: DoctorId(8),
            prefs: pairs(&[(0, 0), (1, 1), (2, 3), (3, 2), (3, 1)]),
        },
    ];
    MarketInstance::new(hospitals, singles, couples, None).expect("fixture is valid")
}

/// The couple-free restriction of [`demo_market`]: same five hospitals and
/// singles, rankings re-indexed to the five remaining doctors.
pub fn demo_market_singles_only() -> MarketInstance {
    let strip = |ranking: Vec<DoctorId>| -> Vec<DoctorId> {
        ranking.into_iter().filter(|d| d.0 < 5).collect()
    };
    let m = demo_market();
    let hospitals = m
        .hospitals()
        .iter()
        .map(|hosp| Hospital {
            capacity: hosp.capacity,
            ranking: strip(hosp.ranking.clone()),
        })
        .collect();
    let singles = m.singles().to_vec();
    MarketInstance::new(hospitals, singles, vec![], None).expect("fixture is valid")
}

/// Two couples, no singles, four hospitals of capacity 1. Under insertion
/// order (c0, c1) the second couple evicts the first, so the direct algorithm
/// fails while the reordering engine retries (c1, c0) and succeeds.
pub fn eviction_market() -> MarketInstance {
    // Doctors: c0 = (d0, d1), c1 = (d2, d3).
    let hospitals = vec![
        // h0: d3 outranks d0, so c1's second member evicts c0's first.
        Hospital {
            capacity: 1,
            ranking: h(&[3, 0, 1, 2]),
        },
        Hospital {
            capacity: 1,
            ranking: h(&[0, 1, 2, 3]),
        },
        Hospital {
            capacity: 1,
            ranking: h(&[0, 1, 2, 3]),
        },
        Hospital {
            capacity: 1,
            ranking: h(&[0, 1, 2, 3]),
        },
    ];
    let couples = vec![
        Couple {
            first: DoctorId(0),
            second: DoctorId(1),
            prefs: pairs(&[(0, 1), (3, 1)]),
        },
        Couple {
            first: DoctorId(2),
            second: DoctorId(3),
            prefs: pairs(&[(2, 0)]),
        },
    ];
    MarketInstance::new(hospitals, vec![], couples, None).expect("fixture is valid")
}

/// One single and one couple fighting over two capacity-1 hospitals: placing
/// the couple displaces the single, which then evicts the couple's second
/// member. Stabilization therefore ends in self-eviction.
pub fn self_eviction_market() -> MarketInstance {
    // Doctors: single d0, couple (d1, d2).
    let hospitals = vec![
        // h0 prefers the couple's first member to the single.
        Hospital {
            capacity: 1,
            ranking: h(&[1, 0, 2]),
        },
        // h1 prefers the single to the couple's second member.
        Hospital {
            capacity: 1,
            ranking: h(&[0, 2, 1]),
        },
    ];
    let singles = vec![Single {
        id: DoctorId(0),
        prefs: prefs(&[0, 1]),
    }];
    let couples = vec![Couple {
        first: DoctorId(1),
        second: DoctorId(2),
        prefs: pairs(&[(0, 1)]),
    }];
    MarketInstance::new(hospitals, singles, couples, None).expect("fixture is valid")
}

/// Three singles with identical lists over three capacity-1 hospitals, every
/// hospital ranking d0 > d1 > d2. Deferred acceptance assigns di -> hi.
pub fn chain_market() -> MarketInstance {
    let hospitals = (0..3)
        .map(|_| Hospital {
            capacity: 1,
            ranking: h(&[0, 1, 2]),
        })
        .collect();
    let singles = (0..3)
        .map(|i| Single {
            id: DoctorId(i),
            prefs: prefs(&[0, 1, 2]),
        })
        .collect();
    MarketInstance::new(hospitals, singles, vec![], None).expect("fixture is valid")
}
