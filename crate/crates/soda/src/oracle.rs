//! Exhaustive stable-matching existence search for tiny instances.
//!
//! Enumerates every capacity-feasible assignment of singles (listed hospital
//! or unassigned) and couples (listed pair or unassigned) and tests each for
//! blocks. Intended as an independent ground-truth oracle; the candidate
//! count is bounded up front.

use crate::error::GenError;
use crate::market::{HospitalId, MarketInstance};
use crate::matching::{first_block, Matching};

/// Enumeration sequencing; both orders are complete, so they must agree on
/// existence. Useful for cross-checking the oracle against itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumOrder {
    /// Singles form the outer digits; options scan list-first, then φ.
    SinglesOuter,
    /// Couples form the outer digits; options scan φ, then list in reverse.
    CouplesOuter,
}

/// Result of the search: a first stable matching, or proof by exhaustion
/// that none exists.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleVerdict {
    Exists(Matching),
    None,
}

impl OracleVerdict {
    pub fn exists(&self) -> bool {
        matches!(self, OracleVerdict::Exists(_))
    }
}

pub const DEFAULT_ORACLE_BUDGET: u64 = 10_000_000;

/// Search every valid matching of `m` for a stable one.
/// `budget` caps the raw candidate count (capacity pruning only shrinks the
/// actual work); exceeding it is a resource error, not a verdict.
pub fn exhaustive_stability_oracle(
    m: &MarketInstance,
    budget: u64,
    order: EnumOrder,
) -> Result<OracleVerdict, GenError> {
    let mut candidates: u128 = 1;
    for s in m.singles() {
        candidates = candidates.saturating_mul(s.prefs.len() as u128 + 1);
    }
    for c in m.couples() {
        candidates = candidates.saturating_mul(c.prefs.len() as u128 + 1);
    }
    if candidates > budget as u128 {
        return Err(GenError::BudgetExceeded { candidates, budget });
    }

    let mut load = vec![0u32; m.n_hospitals()];
    let mut singles: Vec<Option<HospitalId>> = vec![None; m.singles().len()];
    let mut couples: Vec<Option<(HospitalId, HospitalId)>> = vec![None; m.couples().len()];
    let found = search(m, order, 0, &mut load, &mut singles, &mut couples);
    Ok(match found {
        Some(mu) => OracleVerdict::Exists(mu),
        None => OracleVerdict::None,
    })
}

fn search(
    m: &MarketInstance,
    order: EnumOrder,
    depth: usize,
    load: &mut [u32],
    singles: &mut Vec<Option<HospitalId>>,
    couples: &mut Vec<Option<(HospitalId, HospitalId)>>,
) -> Option<Matching> {
    let n_s = m.singles().len();
    let n_c = m.couples().len();
    if depth == n_s + n_c {
        let mu = Matching::from_assignments(m, singles.clone(), couples.clone());
        return if first_block(m, &mu).is_none() {
            Some(mu)
        } else {
            None
        };
    }

    // Map search depth to a concrete agent under the chosen sequencing.
    let (is_single, idx) = match order {
        EnumOrder::SinglesOuter => {
            if depth < n_s {
                (true, depth)
            } else {
                (false, depth - n_s)
            }
        }
        EnumOrder::CouplesOuter => {
            if depth < n_c {
                (false, depth)
            } else {
                (true, depth - n_c)
            }
        }
    };

    if is_single {
        let options = single_options(m, idx, order);
        for opt in options {
            if let Some(h) = opt {
                if load[h.0 as usize] + 1 > m.capacity(h) {
                    continue;
                }
                load[h.0 as usize] += 1;
            }
            singles[idx] = opt;
            if let Some(mu) = search(m, order, depth + 1, load, singles, couples) {
                return Some(mu);
            }
            singles[idx] = None;
            if let Some(h) = opt {
                load[h.0 as usize] -= 1;
            }
        }
    } else {
        let options = couple_options(m, idx, order);
        for opt in options {
            if let Some((a, b)) = opt {
                let (ai, bi) = (a.0 as usize, b.0 as usize);
                if a == b {
                    if load[ai] + 2 > m.capacity(a) {
                        continue;
                    }
                } else if load[ai] + 1 > m.capacity(a) || load[bi] + 1 > m.capacity(b) {
                    continue;
                }
                load[ai] += 1;
                load[bi] += 1;
            }
            couples[idx] = opt;
            if let Some(mu) = search(m, order, depth + 1, load, singles, couples) {
                return Some(mu);
            }
            couples[idx] = None;
            if let Some((a, b)) = opt {
                load[a.0 as usize] -= 1;
                load[b.0 as usize] -= 1;
            }
        }
    }
    None
}

fn single_options(m: &MarketInstance, idx: usize, order: EnumOrder) -> Vec<Option<HospitalId>> {
    let prefs = &m.singles()[idx].prefs;
    match order {
        EnumOrder::SinglesOuter => {
            let mut v: Vec<Option<HospitalId>> = prefs.iter().copied().map(Some).collect();
            v.push(None);
            v
        }
        EnumOrder::CouplesOuter => {
            let mut v = vec![None];
            v.extend(prefs.iter().rev().copied().map(Some));
            v
        }
    }
}

fn couple_options(
    m: &MarketInstance,
    idx: usize,
    order: EnumOrder,
) -> Vec<Option<(HospitalId, HospitalId)>> {
    let prefs = &m.couples()[idx].prefs;
    match order {
        EnumOrder::SinglesOuter => {
            let mut v: Vec<Option<(HospitalId, HospitalId)>> =
                prefs.iter().copied().map(Some).collect();
            v.push(None);
            v
        }
        EnumOrder::CouplesOuter => {
            let mut v = vec![None];
            v.extend(prefs.iter().rev().copied().map(Some));
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::matching::is_stable;

    #[test]
    fn couple_free_market_always_has_a_stable_matching() {
        let m = fixtures::chain_market();
        let verdict =
            exhaustive_stability_oracle(&m, DEFAULT_ORACLE_BUDGET, EnumOrder::SinglesOuter)
                .unwrap();
        let OracleVerdict::Exists(mu) = verdict else {
            panic!("expected existence")
        };
        assert!(is_stable(&m, &mu).unwrap());
    }

    #[test]
    fn demo_market_has_a_stable_matching() {
        let m = fixtures::demo_market();
        for order in [EnumOrder::SinglesOuter, EnumOrder::CouplesOuter] {
            let verdict = exhaustive_stability_oracle(&m, DEFAULT_ORACLE_BUDGET, order).unwrap();
            let OracleVerdict::Exists(mu) = verdict else {
                panic!("expected existence")
            };
            assert!(is_stable(&m, &mu).unwrap());
        }
    }

    #[test]
    fn budget_is_enforced() {
        let m = fixtures::demo_market();
        assert!(matches!(
            exhaustive_stability_oracle(&m, 10, EnumOrder::SinglesOuter),
            Err(GenError::BudgetExceeded { .. })
        ));
    }
}
