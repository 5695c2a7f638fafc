//! Random market construction and the one-couple counterexample family.
//!
//! All randomness flows from `GenParams::seed` through one ChaCha8 stream in
//! a fixed order (hospital scores, hospital rankings, single lists, couple
//! lists), so generation is bit-reproducible.

use crate::error::GenError;
use crate::market::{Couple, DoctorId, Hospital, HospitalId, MarketInstance, MarketMeta, Single};
use crate::rng::{self, SeededRng};

/// How many couples a market gets, as a function of the single count n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoupleRule {
    /// Exactly this many couples.
    Count(usize),
    /// ⌊α·n⌋ couples (linear regime).
    Fraction(f64),
    /// ⌊n^(1−ε)⌋ couples (near-linear regime).
    Power(f64),
}

impl CoupleRule {
    pub fn couples_for(&self, n: usize) -> usize {
        match *self {
            CoupleRule::Count(k) => k,
            CoupleRule::Fraction(alpha) => (alpha * n as f64).floor() as usize,
            CoupleRule::Power(epsilon) => (n as f64).powf(1.0 - epsilon).floor() as usize,
        }
    }
}

/// Parameters for [`generate_market`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    /// Number of single doctors.
    pub n: usize,
    pub couples: CoupleRule,
    /// Explicit hospital count; default ⌈λ·n / capacity⌉ positions.
    pub hospitals: Option<usize>,
    /// Uniform per-hospital capacity.
    pub capacity: u32,
    /// Excess-position ratio: total capacity ≥ λ·n.
    pub lambda: f64,
    /// Recorded in metadata; drives the default influence budget r = ⌈4/ε⌉.
    pub epsilon: Option<f64>,
    /// Bound on max/min probability ratio for explicit draw distributions.
    pub rho: f64,
    /// Maximum pairs materialized per couple (clamped to the |H|² distinct
    /// pairs).
    pub couple_list_cap: usize,
    /// Maximum hospitals per single list; `None` = every hospital.
    pub single_list_cap: Option<usize>,
    /// Hospital quality scores in [0.2, 1] with rejection-sampled doctor
    /// draws, concentrating demand on high-score hospitals.
    pub fitness: bool,
    /// Explicit singles-side draw distribution over hospitals (`None` = uniform).
    pub z: Option<Vec<f64>>,
    /// Explicit couples-side draw distribution (`None` = same as Z).
    pub q: Option<Vec<f64>>,
    pub seed: u64,
}

impl GenParams {
    /// Desk defaults: n/2 hospitals of capacity 3 (λ = 1.5), no couples.
    pub fn new(n: usize, seed: u64) -> GenParams {
        GenParams {
            n,
            couples: CoupleRule::Count(0),
            hospitals: None,
            capacity: 3,
            lambda: 1.5,
            epsilon: None,
            rho: 1.0,
            couple_list_cap: 200,
            single_list_cap: None,
            fitness: false,
            z: None,
            q: None,
            seed,
        }
    }

    pub fn hospital_count(&self) -> usize {
        match self.hospitals {
            Some(h) => h,
            None => ((self.lambda * self.n as f64) / self.capacity as f64).ceil() as usize,
        }
    }

    fn validate(&self) -> Result<(), GenError> {
        let h = self.hospital_count();
        if self.n == 0 && self.couples.couples_for(self.n) == 0 {
            return Err(GenError::InvalidParams("market has no doctors".into()));
        }
        if h == 0 {
            return Err(GenError::InvalidParams("market has no hospitals".into()));
        }
        if self.capacity == 0 {
            return Err(GenError::InvalidParams(
                "capacity must be at least 1".into(),
            ));
        }
        if self.lambda <= 1.0 && self.hospitals.is_none() {
            return Err(GenError::InvalidParams(
                "regular markets need lambda > 1".into(),
            ));
        }
        if self.rho < 1.0 {
            return Err(GenError::InvalidParams("rho must be at least 1".into()));
        }
        if self.couple_list_cap < 1 || self.single_list_cap == Some(0) {
            return Err(GenError::InvalidParams(
                "list caps must be at least 1".into(),
            ));
        }
        for dist in [&self.z, &self.q].into_iter().flatten() {
            if dist.len() != h {
                return Err(GenError::InvalidParams(
                    "distribution length must equal |H|".into(),
                ));
            }
            if dist.iter().any(|&p| p <= 0.0 || !p.is_finite()) {
                return Err(GenError::InvalidParams(
                    "distribution weights must be positive".into(),
                ));
            }
            let ratio = distribution_ratio(dist);
            if ratio > self.rho * (1.0 + 1e-12) {
                return Err(GenError::InvalidParams(format!(
                    "distribution ratio {ratio:.3} exceeds rho = {}",
                    self.rho
                )));
            }
        }
        Ok(())
    }
}

/// max/min weight ratio of a distribution vector (the uniform-boundedness
/// quantity the model constrains by ρ).
pub fn distribution_ratio(weights: &[f64]) -> f64 {
    let max = weights.iter().cloned().fold(f64::MIN, f64::max);
    let min = weights.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

enum Draw {
    Uniform,
    Weighted { cumulative: Vec<f64> },
    Fitness { scores: Vec<f64> },
}

impl Draw {
    fn from_weights(weights: &[f64]) -> Draw {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cumulative.push(acc);
        }
        Draw::Weighted { cumulative }
    }

    fn sample(&self, rng: &mut SeededRng, n_hospitals: usize) -> u32 {
        match self {
            Draw::Uniform => rng::uniform_usize(rng, n_hospitals) as u32,
            Draw::Weighted { cumulative } => {
                let total = *cumulative.last().expect("non-empty");
                let x = rng::unit_f64(rng) * total;
                cumulative
                    .partition_point(|&c| c <= x)
                    .min(cumulative.len() - 1) as u32
            }
            Draw::Fitness { scores } => loop {
                // Draw a hospital and a threshold in [0.2, 1]; keep the
                // hospital only if its score reaches the threshold.
                let h = rng::uniform_usize(rng, n_hospitals);
                let threshold = 0.2 + 0.8 * rng::unit_f64(rng);
                if scores[h] >= threshold {
                    return h as u32;
                }
            },
        }
    }
}

/// Generate a random market: duplicate-rejected hospital draws for every
/// single, pair draws from Q×Q for every couple, independent uniform random
/// hospital rankings.
pub fn generate_market(p: &GenParams) -> Result<MarketInstance, GenError> {
    generate_market_with_rankings(p, |rng, n_doctors, hospitals| {
        default_rankings(rng, n_doctors, hospitals)
    })
}

/// Uniform random strict rankings, one independent permutation per hospital.
pub fn default_rankings(
    rng: &mut SeededRng,
    n_doctors: usize,
    n_hospitals: usize,
) -> Vec<Vec<DoctorId>> {
    (0..n_hospitals)
        .map(|_| {
            let mut order: Vec<DoctorId> = (0..n_doctors as u32).map(DoctorId).collect();
            rng::shuffle(rng, &mut order);
            order
        })
        .collect()
}

/// [`generate_market`] with a pluggable hospital-ranking model (the doctor
/// side of the draw is unchanged). The hook receives the generator's RNG.
pub fn generate_market_with_rankings<F>(
    p: &GenParams,
    rankings: F,
) -> Result<MarketInstance, GenError>
where
    F: FnOnce(&mut SeededRng, usize, usize) -> Vec<Vec<DoctorId>>,
{
    p.validate()?;
    let n_hospitals = p.hospital_count();
    let n_couples = p.couples.couples_for(p.n);
    let n_doctors = p.n + 2 * n_couples;
    let mut rng = rng::rng_from(rng::derive_seed(p.seed, rng::stream::MARKET, 0));

    let scores: Option<Vec<f64>> = p.fitness.then(|| {
        (0..n_hospitals)
            .map(|_| 0.2 + 0.8 * rng::unit_f64(&mut rng))
            .collect()
    });
    let z_draw = match (&scores, &p.z) {
        (Some(s), _) => Draw::Fitness { scores: s.clone() },
        (None, Some(w)) => Draw::from_weights(w),
        (None, None) => Draw::Uniform,
    };
    let q_draw = match (&scores, &p.q) {
        (Some(s), _) => Draw::Fitness { scores: s.clone() },
        (None, Some(w)) => Draw::from_weights(w),
        (None, None) => match &p.z {
            Some(w) => Draw::from_weights(w),
            None => Draw::Uniform,
        },
    };

    let ranking_table = rankings(&mut rng, n_doctors, n_hospitals);
    if ranking_table.len() != n_hospitals {
        return Err(GenError::InvalidParams(
            "ranking hook returned wrong hospital count".into(),
        ));
    }
    let hospitals: Vec<Hospital> = ranking_table
        .into_iter()
        .map(|ranking| Hospital {
            capacity: p.capacity,
            ranking,
        })
        .collect();

    let single_len = p.single_list_cap.unwrap_or(n_hospitals).min(n_hospitals);
    let uniform_z = matches!(z_draw, Draw::Uniform);
    let mut singles = Vec::with_capacity(p.n);
    for i in 0..p.n {
        let prefs = if uniform_z {
            // A duplicate-rejected uniform list is a uniform k-prefix of a
            // random permutation; sample it directly.
            let mut all: Vec<HospitalId> = (0..n_hospitals as u32).map(HospitalId).collect();
            rng::partial_shuffle(&mut rng, &mut all, single_len);
            all.truncate(single_len);
            all
        } else {
            let mut seen = vec![false; n_hospitals];
            let mut prefs = Vec::with_capacity(single_len);
            while prefs.len() < single_len {
                let h = z_draw.sample(&mut rng, n_hospitals);
                if !seen[h as usize] {
                    seen[h as usize] = true;
                    prefs.push(HospitalId(h));
                }
            }
            prefs
        };
        singles.push(Single {
            id: DoctorId(i as u32),
            prefs,
        });
    }

    let pair_len = p.couple_list_cap.min(n_hospitals * n_hospitals);
    let mut couples = Vec::with_capacity(n_couples);
    for i in 0..n_couples {
        let mut seen = std::collections::HashSet::with_capacity(pair_len * 2);
        let mut prefs = Vec::with_capacity(pair_len);
        while prefs.len() < pair_len {
            let a = q_draw.sample(&mut rng, n_hospitals);
            let b = q_draw.sample(&mut rng, n_hospitals);
            if seen.insert((a, b)) {
                prefs.push((HospitalId(a), HospitalId(b)));
            }
        }
        let first = DoctorId((p.n + 2 * i) as u32);
        let second = DoctorId((p.n + 2 * i + 1) as u32);
        couples.push(Couple {
            first,
            second,
            prefs,
        });
    }

    let meta = MarketMeta {
        n: p.n,
        lambda: (n_hospitals as u64 * p.capacity as u64) as f64 / (p.n.max(1)) as f64,
        epsilon: p.epsilon,
        seed: p.seed,
        single_lists_truncated: single_len < n_hospitals,
        couple_lists_truncated: pair_len < n_hospitals * n_hospitals,
    };
    Ok(MarketInstance::new(
        hospitals,
        singles,
        couples,
        Some(meta),
    )?)
}

/// A doctor-preference seed for which the n = 4 instance of
/// [`counterexample_market`] is confirmed (by exhaustive enumeration under
/// two independent orders) to admit no stable matching.
pub const CONFIRMED_COUNTEREXAMPLE_SEED: u64 = 0;

/// Doctor-side preferences for [`counterexample_market`].
#[derive(Debug, Clone)]
pub enum CounterexamplePrefs {
    /// Full-length random permutations drawn from this seed.
    Seeded(u64),
    /// Explicit full-length lists.
    Given {
        singles: Vec<Vec<HospitalId>>,
        couple: Vec<(HospitalId, HospitalId)>,
    },
}

/// The one-couple market family in which hospital preferences alone can rule
/// out stability: n hospitals of capacity 1, n−1 singles, one couple, and
/// every hospital ranking the couple's second member first, the first member
/// last, and the singles in id order between them. Doctor lists are
/// full-length. Whether a concrete instance actually has no stable matching
/// depends on the doctor side; confirm with the exhaustive oracle.
pub fn counterexample_market(
    n: usize,
    prefs: CounterexamplePrefs,
) -> Result<MarketInstance, GenError> {
    if n < 2 {
        return Err(GenError::CounterexampleTooSmall(n));
    }
    let n_singles = n - 1;
    let f = DoctorId(n_singles as u32);
    let m = DoctorId(n_singles as u32 + 1);

    let mut ranking = Vec::with_capacity(n_singles + 2);
    ranking.push(m);
    ranking.extend((0..n_singles as u32).map(DoctorId));
    ranking.push(f);
    let hospitals: Vec<Hospital> = (0..n)
        .map(|_| Hospital {
            capacity: 1,
            ranking: ranking.clone(),
        })
        .collect();

    let (single_lists, couple_list) = match prefs {
        CounterexamplePrefs::Given { singles, couple } => (singles, couple),
        CounterexamplePrefs::Seeded(seed) => {
            let mut rng = rng::rng_from(rng::derive_seed(seed, rng::stream::MARKET, 1));
            let singles = (0..n_singles)
                .map(|_| {
                    let mut list: Vec<HospitalId> = (0..n as u32).map(HospitalId).collect();
                    rng::shuffle(&mut rng, &mut list);
                    list
                })
                .collect();
            let mut pairs: Vec<(HospitalId, HospitalId)> = (0..n as u32)
                .flat_map(|a| (0..n as u32).map(move |b| (HospitalId(a), HospitalId(b))))
                .collect();
            rng::shuffle(&mut rng, &mut pairs);
            (singles, pairs)
        }
    };

    let singles: Vec<Single> = single_lists
        .into_iter()
        .enumerate()
        .map(|(i, prefs)| Single {
            id: DoctorId(i as u32),
            prefs,
        })
        .collect();
    let couples = vec![Couple {
        first: f,
        second: m,
        prefs: couple_list,
    }];
    Ok(MarketInstance::new(hospitals, singles, couples, None)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let mut p = GenParams::new(40, 99);
        p.couples = CoupleRule::Count(5);
        p.fitness = true;
        p.single_list_cap = Some(10);
        let a = generate_market(&p).unwrap();
        let b = generate_market(&p).unwrap();
        assert_eq!(a, b);
        p.seed = 100;
        let c = generate_market(&p).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn lists_are_duplicate_free_by_construction() {
        let mut p = GenParams::new(30, 5);
        p.couples = CoupleRule::Count(6);
        p.couple_list_cap = 50;
        let m = generate_market(&p).unwrap();
        for s in m.singles() {
            let mut seen = std::collections::HashSet::new();
            assert!(s.prefs.iter().all(|h| seen.insert(*h)));
        }
        for c in m.couples() {
            let mut seen = std::collections::HashSet::new();
            assert!(c.prefs.iter().all(|p| seen.insert(*p)));
        }
    }

    #[test]
    fn couple_rules_scale_with_n() {
        assert_eq!(CoupleRule::Count(7).couples_for(100), 7);
        assert_eq!(CoupleRule::Fraction(0.05).couples_for(200), 10);
        assert_eq!(CoupleRule::Power(0.5).couples_for(256), 16);
    }

    #[test]
    fn regularity_conditions_hold() {
        let mut p = GenParams::new(100, 3);
        p.couples = CoupleRule::Power(0.5);
        let m = generate_market(&p).unwrap();
        let total: u64 = m.hospitals().iter().map(|h| h.capacity as u64).sum();
        assert!(total as f64 >= p.lambda * p.n as f64);
        assert!(m.hospitals().iter().all(|h| h.capacity <= p.capacity));
        assert_eq!(m.couples().len(), 10);
    }

    #[test]
    fn explicit_distribution_respects_rho() {
        let mut p = GenParams::new(10, 1);
        p.hospitals = Some(4);
        p.z = Some(vec![1.0, 2.0, 3.0, 4.0]);
        p.rho = 2.0;
        assert!(matches!(
            generate_market(&p),
            Err(GenError::InvalidParams(_))
        ));
        p.rho = 4.0;
        assert!(generate_market(&p).is_ok());
    }

    #[test]
    fn oversized_caps_clamp_to_distinct_options() {
        let mut p = GenParams::new(4, 1);
        p.hospitals = Some(2);
        p.couples = CoupleRule::Count(1);
        p.couple_list_cap = 5; // only 2² = 4 distinct pairs exist
        p.single_list_cap = Some(2);
        let m = generate_market(&p).unwrap();
        assert_eq!(m.couples()[0].prefs.len(), 4);
        assert!(matches!(
            generate_market(&GenParams {
                couple_list_cap: 0,
                ..p.clone()
            }),
            Err(GenError::InvalidParams(_))
        ));
    }

    #[test]
    fn uniform_top_choice_frequencies_pass_chi_square() {
        // n = 1000 singles over 500 hospitals; the top-choice histogram's
        // chi-square statistic (499 degrees of freedom) should sit within
        // five standard deviations of its mean.
        let mut p = GenParams::new(1000, 2024);
        p.hospitals = Some(500);
        p.capacity = 3;
        p.single_list_cap = Some(8);
        let m = generate_market(&p).unwrap();
        let mut counts = vec![0usize; 500];
        for s in m.singles() {
            counts[s.prefs[0].0 as usize] += 1;
        }
        let expected = 1000.0 / 500.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let dof = 499.0f64;
        let sigma = (2.0 * dof).sqrt();
        assert!(
            (chi2 - dof).abs() < 5.0 * sigma,
            "chi-square {chi2:.1} too far from {dof} (sigma {sigma:.1})"
        );
    }

    #[test]
    fn confirmed_counterexample_has_no_stable_matching() {
        use crate::engine::{solve, Permutation, SolveMode};
        use crate::oracle::{exhaustive_stability_oracle, EnumOrder, OracleVerdict};
        let m = counterexample_market(
            4,
            CounterexamplePrefs::Seeded(CONFIRMED_COUNTEREXAMPLE_SEED),
        )
        .unwrap();
        for order in [EnumOrder::SinglesOuter, EnumOrder::CouplesOuter] {
            let verdict = exhaustive_stability_oracle(&m, 10_000_000, order).unwrap();
            assert_eq!(verdict, OracleVerdict::None);
        }
        // No stable matching exists, so every solver mode must fail.
        for mode in [
            SolveMode::Classic,
            SolveMode::BackwardEdge,
            SolveMode::Direct,
        ] {
            let report = solve(&m, Permutation::identity(1), mode);
            assert!(!report.outcome.is_stable(), "{mode:?}");
        }
    }

    #[test]
    fn counterexample_structure() {
        let m = counterexample_market(4, CounterexamplePrefs::Seeded(0)).unwrap();
        assert_eq!(m.n_hospitals(), 4);
        assert_eq!(m.singles().len(), 3);
        assert_eq!(m.couples().len(), 1);
        let c = &m.couples()[0];
        for h in m.hospitals() {
            assert_eq!(h.capacity, 1);
            assert_eq!(h.ranking[0], c.second);
            assert_eq!(*h.ranking.last().unwrap(), c.first);
        }
        // Full-length doctor lists.
        assert!(m.singles().iter().all(|s| s.prefs.len() == 4));
        assert_eq!(c.prefs.len(), 16);

        // n = 2 degenerate structure builds fine.
        assert!(counterexample_market(2, CounterexamplePrefs::Seeded(0)).is_ok());
        assert!(counterexample_market(1, CounterexamplePrefs::Seeded(0)).is_err());
    }
}
