//! Reproducible Monte Carlo studies with CSV output.
//!
//! Every operation derives one independent seed per trial from
//! `seed_base`, runs trials in parallel, and reduces them in trial order, so
//! output bytes depend only on the configuration. Every trial that reports a
//! stable outcome is re-verified against the block enumeration; a violation
//! aborts the run.

pub mod stats;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{solve, Permutation, SodaOutcome, SolveMode};
use crate::gen::{generate_market, CoupleRule, GenParams};
use crate::influence::{
    build_all_trees, build_couples_graph, find_cycle, topological_insertion_order,
    weakly_connected_components,
};
use crate::market::MarketInstance;
use crate::matching::{find_blocks, Matching};
use crate::rng::{self, SeededRng};
use stats::clopper_pearson;

pub const CSV_FORMAT: &str = "soda-experiments/1";

/// Shared Monte Carlo configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Sweep axis: numbers of single doctors, increasing.
    pub n_values: Vec<usize>,
    /// One curve per rule (e.g. several couple percentages).
    pub couple_rules: Vec<CoupleRule>,
    pub trials: usize,
    pub capacity: u32,
    pub lambda: f64,
    /// Explicit hospital count (overrides lambda/capacity).
    pub hospitals: Option<usize>,
    pub fitness: bool,
    pub mode: SolveMode,
    /// Influence budget override for diagnostics (default ⌈4/ε⌉ or 4).
    pub r_override: Option<i64>,
    pub seed_base: u64,
    pub single_list_cap: Option<usize>,
    pub couple_list_cap: usize,
    /// Desk-scale budget: sweep points above this n are scaled down
    /// proportionally and the substitution is stamped into the CSV header.
    pub max_n: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(seed_base: u64) -> ExperimentConfig {
        ExperimentConfig {
            n_values: vec![500],
            couple_rules: vec![CoupleRule::Fraction(0.05)],
            trials: 600,
            capacity: 3,
            lambda: 1.5,
            hospitals: None,
            fitness: false,
            mode: SolveMode::Classic,
            r_override: None,
            seed_base,
            single_list_cap: Some(64),
            couple_list_cap: 200,
            max_n: None,
        }
    }

    fn effective_n(&self, n: usize) -> usize {
        match self.max_n {
            Some(budget) if n > budget => budget,
            _ => n,
        }
    }

    fn gen_params(&self, n: usize, rule: CoupleRule, seed: u64) -> GenParams {
        let requested = n;
        let n = self.effective_n(n);
        let couples = match rule {
            // Count rules scale with the desk-scale substitution.
            CoupleRule::Count(k) if requested != n => {
                CoupleRule::Count((k as f64 * n as f64 / requested as f64).round() as usize)
            }
            other => other,
        };
        let mut p = GenParams::new(n, seed);
        p.couples = couples;
        p.capacity = self.capacity;
        p.lambda = self.lambda;
        p.hospitals = self.hospitals;
        p.fitness = self.fitness;
        p.single_list_cap = self.single_list_cap.map(|cap| cap.min(hospital_count(&p)));
        p.couple_list_cap = self.couple_list_cap.min(hospital_count(&p).pow(2));
        p.epsilon = match rule {
            CoupleRule::Power(eps) => Some(eps),
            _ => None,
        };
        p
    }

    fn header(&self, op: &str, out: &mut String) {
        let _ = writeln!(out, "# {CSV_FORMAT}");
        let _ = writeln!(out, "# op={op}");
        let _ = writeln!(
            out,
            "# seed_base={} trials={} capacity={} lambda={:.6} fitness={} mode={} single_list_cap={} couple_list_cap={}",
            self.seed_base,
            self.trials,
            self.capacity,
            self.lambda,
            self.fitness,
            mode_label(self.mode),
            self.single_list_cap.map_or("full".to_string(), |c| c.to_string()),
            self.couple_list_cap,
        );
        if let Some(budget) = self.max_n {
            for &n in &self.n_values {
                if n > budget {
                    let _ = writeln!(out, "# desk_scale: n={n} -> {budget}");
                }
            }
        }
    }
}

fn hospital_count(p: &GenParams) -> usize {
    p.hospital_count()
}

pub fn mode_label(mode: SolveMode) -> &'static str {
    match mode {
        SolveMode::Classic => "classic",
        SolveMode::BackwardEdge => "backward-edge",
        SolveMode::Direct => "direct",
    }
}

pub fn rule_label(rule: CoupleRule) -> String {
    match rule {
        CoupleRule::Count(k) => format!("count{k}"),
        CoupleRule::Fraction(a) => format!("alpha{a}"),
        CoupleRule::Power(e) => format!("eps{e}"),
    }
}

/// One trial's outcome, as recorded in optional raw dumps.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub n: usize,
    pub couples: usize,
    pub outcome: String,
    pub restarts: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub single_ranks: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couple_ranks: Option<Vec<u32>>,
    pub unassigned_singles: usize,
    pub unassigned_couples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphTrialStats>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphTrialStats {
    pub mean_tree_size: f64,
    pub max_tree_size: usize,
    pub max_component: usize,
    pub cyclic: bool,
    pub intersects_twice: bool,
}

/// Achieved list position (1-based) of each assigned single.
fn single_ranks(m: &MarketInstance, mu: &Matching) -> (Vec<u32>, usize) {
    let mut ranks = Vec::new();
    let mut unassigned = 0;
    for (i, s) in m.singles().iter().enumerate() {
        match mu.single_assignment(i) {
            Some(h) => {
                let pos = s
                    .prefs
                    .iter()
                    .position(|&x| x == h)
                    .expect("assigned on-list")
                    + 1;
                ranks.push(pos as u32);
            }
            None => unassigned += 1,
        }
    }
    (ranks, unassigned)
}

fn couple_ranks(m: &MarketInstance, mu: &Matching) -> (Vec<u32>, usize) {
    let mut ranks = Vec::new();
    let mut unassigned = 0;
    for (i, c) in m.couples().iter().enumerate() {
        match mu.couple_assignment(i) {
            Some(pair) => {
                let pos = c
                    .prefs
                    .iter()
                    .position(|&x| x == pair)
                    .expect("assigned on-list")
                    + 1;
                ranks.push(pos as u32);
            }
            None => unassigned += 1,
        }
    }
    (ranks, unassigned)
}

fn run_one_trial(
    cfg: &ExperimentConfig,
    n: usize,
    rule: CoupleRule,
    seed: u64,
    keep_ranks: bool,
    with_graph: bool,
) -> TrialRecord {
    let started = std::time::Instant::now();
    let params = cfg.gen_params(n, rule, seed);
    let market = match generate_market(&params) {
        Ok(m) => m,
        Err(e) => {
            return TrialRecord {
                seed,
                n: params.n,
                couples: 0,
                outcome: format!("error: {e}"),
                restarts: 0,
                single_ranks: None,
                couple_ranks: None,
                unassigned_singles: 0,
                unassigned_couples: 0,
                graph: None,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            }
        }
    };
    let couples = market.couples().len();
    let report = solve(&market, Permutation::identity(couples), cfg.mode);
    let mut record = TrialRecord {
        seed,
        n: params.n,
        couples,
        outcome: report.outcome.tag().to_string(),
        restarts: report.restarts,
        single_ranks: None,
        couple_ranks: None,
        unassigned_singles: 0,
        unassigned_couples: 0,
        graph: None,
        wall_ms: 0.0,
    };
    if let SodaOutcome::Stable { matching, .. } = &report.outcome {
        // Hard cross-validation: a reported success must be block-free.
        let blocks = find_blocks(&market, matching).expect("engine output is a valid matching");
        assert!(
            blocks.is_empty(),
            "engine soundness violation: stable outcome has {} blocks (seed {seed})",
            blocks.len()
        );
        let (sr, su) = single_ranks(&market, matching);
        let (cr, cu) = couple_ranks(&market, matching);
        record.unassigned_singles = su;
        record.unassigned_couples = cu;
        if keep_ranks {
            record.single_ranks = Some(sr);
            record.couple_ranks = Some(cr);
        }
    }
    if with_graph && couples > 0 {
        let r = cfg
            .r_override
            .unwrap_or_else(|| default_budget(params.epsilon));
        let mu_da = crate::engine::deferred_acceptance(&market);
        if let Ok(trees) = build_all_trees(&market, &mu_da, r) {
            let sizes: Vec<usize> = trees.iter().map(|t| t.entries.len()).collect();
            let graph = build_couples_graph(&market, &trees).expect("trees are complete");
            let components = weakly_connected_components(&graph);
            let mut intersects_twice = false;
            'outer: for i in 0..trees.len() {
                for j in (i + 1)..trees.len() {
                    if trees[i].intersections(&trees[j]).len() > 1 {
                        intersects_twice = true;
                        break 'outer;
                    }
                }
            }
            record.graph = Some(GraphTrialStats {
                mean_tree_size: sizes.iter().sum::<usize>() as f64 / sizes.len() as f64,
                max_tree_size: sizes.iter().copied().max().unwrap_or(0),
                max_component: components.iter().map(|c| c.len()).max().unwrap_or(0),
                cyclic: find_cycle(&graph).is_some(),
                intersects_twice,
            });
        }
    }
    record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    record
}

/// Default influence budget: ⌈4/ε⌉ when the market's generation metadata
/// carries ε, else 4.
pub fn default_budget(epsilon: Option<f64>) -> i64 {
    match epsilon {
        Some(e) if e > 0.0 => (4.0 / e).ceil() as i64,
        _ => 4,
    }
}

fn run_point(
    cfg: &ExperimentConfig,
    point_index: usize,
    n: usize,
    rule: CoupleRule,
    keep_ranks: bool,
    with_graph: bool,
) -> Vec<TrialRecord> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = rng::derive_seed(
                cfg.seed_base,
                rng::stream::TRIAL,
                (point_index * cfg.trials + t) as u64,
            );
            run_one_trial(cfg, n, rule, seed, keep_ranks, with_graph)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub rule: CoupleRule,
    pub couples: usize,
    pub trials: usize,
    pub stable: usize,
    pub fail_self_eviction: usize,
    pub fail_permutation_exhausted: usize,
    pub fail_cycle_detected: usize,
    pub errors: usize,
    pub success_fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub csv: String,
}

/// Success-rate sweep over (n, couple-rule) points with exact binomial CIs.
pub fn success_rate_sweep(cfg: &ExperimentConfig) -> SweepTable {
    let mut rows = Vec::new();
    let mut point_index = 0;
    for &n in &cfg.n_values {
        for &rule in &cfg.couple_rules {
            let records = run_point(cfg, point_index, n, rule, false, false);
            point_index += 1;
            let count = |tag: &str| records.iter().filter(|r| r.outcome == tag).count();
            let stable = count("stable");
            let errors = records
                .iter()
                .filter(|r| r.outcome.starts_with("error"))
                .count();
            let valid = cfg.trials - errors;
            let (ci_low, ci_high) = if valid > 0 {
                clopper_pearson(stable as u64, valid as u64)
            } else {
                (0.0, 1.0)
            };
            rows.push(SweepRow {
                n: cfg.effective_n(n),
                rule,
                couples: records.first().map_or(0, |r| r.couples),
                trials: cfg.trials,
                stable,
                fail_self_eviction: count("fail-self-eviction"),
                fail_permutation_exhausted: count("fail-permutation-exhausted"),
                fail_cycle_detected: count("fail-cycle-detected"),
                errors,
                success_fraction: if valid > 0 {
                    stable as f64 / valid as f64
                } else {
                    0.0
                },
                ci_low,
                ci_high,
            });
        }
    }
    let mut csv = String::new();
    cfg.header("success-rate-sweep", &mut csv);
    csv.push_str("n,rule,couples,trials,stable,fail_self_eviction,fail_permutation_exhausted,fail_cycle_detected,errors,success_fraction,ci_low,ci_high\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
            r.n,
            rule_label(r.rule),
            r.couples,
            r.trials,
            r.stable,
            r.fail_self_eviction,
            r.fail_permutation_exhausted,
            r.fail_cycle_detected,
            r.errors,
            r.success_fraction,
            r.ci_low,
            r.ci_high
        );
    }
    SweepTable { rows, csv }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    /// 1..=8, with 9 standing for "ninth choice or worse".
    pub k: u32,
    pub pct_singles: f64,
    pub pct_couples: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramTable {
    pub rows: Vec<HistogramRow>,
    pub stable_trials: usize,
    pub failed_trials: usize,
    pub pct_singles_unassigned: f64,
    pub pct_couples_unassigned: f64,
    pub csv: String,
}

/// Percentage of singles and couples receiving their k-th listed choice,
/// pooled over the stable trials of one (n, rule) point.
pub fn rank_histogram(cfg: &ExperimentConfig) -> HistogramTable {
    let n = cfg.n_values[0];
    let rule = cfg.couple_rules[0];
    let records = run_point(cfg, 0, n, rule, true, false);

    let mut single_hist = [0u64; 10]; // 1..=8 direct, [9] = tail
    let mut couple_hist = [0u64; 10];
    let mut singles_total = 0u64;
    let mut couples_total = 0u64;
    let mut singles_unassigned = 0u64;
    let mut couples_unassigned = 0u64;
    let mut stable_trials = 0;
    for r in &records {
        let (Some(sr), Some(cr)) = (&r.single_ranks, &r.couple_ranks) else {
            continue;
        };
        stable_trials += 1;
        singles_total += (sr.len() + r.unassigned_singles) as u64;
        couples_total += (cr.len() + r.unassigned_couples) as u64;
        singles_unassigned += r.unassigned_singles as u64;
        couples_unassigned += r.unassigned_couples as u64;
        for &k in sr {
            single_hist[(k as usize).min(9)] += 1;
        }
        for &k in cr {
            couple_hist[(k as usize).min(9)] += 1;
        }
    }
    let pct = |count: u64, total: u64| {
        if total > 0 {
            100.0 * count as f64 / total as f64
        } else {
            0.0
        }
    };
    let rows: Vec<HistogramRow> = (1..=9u32)
        .map(|k| HistogramRow {
            k,
            pct_singles: pct(single_hist[k as usize], singles_total),
            pct_couples: pct(couple_hist[k as usize], couples_total),
        })
        .collect();

    let mut csv = String::new();
    cfg.header("rank-histogram", &mut csv);
    let _ = writeln!(
        csv,
        "# n={} rule={} stable_trials={} failed_trials={} singles_unassigned_pct={:.6} couples_unassigned_pct={:.6}",
        cfg.effective_n(n),
        rule_label(rule),
        stable_trials,
        records.len() - stable_trials,
        pct(singles_unassigned, singles_total),
        pct(couples_unassigned, couples_total),
    );
    csv.push_str("k,pct_singles,pct_couples\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{:.6},{:.6}", r.k, r.pct_singles, r.pct_couples);
    }
    HistogramTable {
        rows,
        stable_trials,
        failed_trials: records.len() - stable_trials,
        pct_singles_unassigned: pct(singles_unassigned, singles_total),
        pct_couples_unassigned: pct(couples_unassigned, couples_total),
        csv,
    }
}

/// How a preference list is misreported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deviation {
    /// Drop a random-length tail.
    Truncate,
    /// Swap two random positions.
    Swap,
    /// Reshuffle the whole list.
    Shuffle,
}

const DEVIATIONS: [Deviation; 3] = [Deviation::Truncate, Deviation::Swap, Deviation::Shuffle];

pub fn deviation_label(d: Deviation) -> &'static str {
    match d {
        Deviation::Truncate => "truncate",
        Deviation::Swap => "swap",
        Deviation::Shuffle => "shuffle",
    }
}

fn deviate<T: Clone>(list: &[T], kind: Deviation, rng: &mut SeededRng) -> Vec<T> {
    let mut out = list.to_vec();
    if out.len() < 2 {
        return out;
    }
    match kind {
        Deviation::Truncate => {
            let keep = 1 + rng::uniform_usize(rng, out.len());
            out.truncate(keep);
        }
        Deviation::Swap => {
            let i = rng::uniform_usize(rng, out.len());
            let j = rng::uniform_usize(rng, out.len());
            out.swap(i, j);
        }
        Deviation::Shuffle => rng::shuffle(rng, &mut out),
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub population: &'static str,
    pub deviation: Deviation,
    pub attempts: usize,
    /// Truth run and misreport run both stable.
    pub comparable: usize,
    pub strict_gains: usize,
    pub gain_frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub excluded_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTable {
    pub rows: Vec<ProbeRow>,
    pub csv: String,
}

struct ProbeTally {
    attempts: usize,
    comparable: usize,
    gains: usize,
    excluded: usize,
}

/// Replay each market with sampled misreports and count strict gains, judged
/// by the true preference list (unassigned ranks below every listed option).
pub fn truthfulness_probe(cfg: &ExperimentConfig, deviations_per_population: usize) -> ProbeTable {
    let n = cfg.n_values[0];
    let rule = cfg.couple_rules[0];

    let tallies: Vec<[[ProbeTally; 3]; 2]> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = rng::derive_seed(cfg.seed_base, rng::stream::TRIAL, t as u64);
            let params = cfg.gen_params(n, rule, seed);
            let mut tally: [[ProbeTally; 3]; 2] = std::array::from_fn(|_| {
                std::array::from_fn(|_| ProbeTally {
                    attempts: 0,
                    comparable: 0,
                    gains: 0,
                    excluded: 0,
                })
            });
            let Ok(market) = generate_market(&params) else {
                return tally;
            };
            let pi = Permutation::identity(market.couples().len());
            let truth = solve(&market, pi.clone(), cfg.mode);
            let SodaOutcome::Stable {
                matching: truth_mu, ..
            } = &truth.outcome
            else {
                return tally;
            };
            let mut rng = rng::rng_from(rng::derive_seed(
                cfg.seed_base,
                rng::stream::DEVIATION,
                t as u64,
            ));

            for dev_index in 0..deviations_per_population {
                let kind = DEVIATIONS[dev_index % DEVIATIONS.len()];
                let kind_idx = dev_index % DEVIATIONS.len();

                // A random single misreports.
                if !market.singles().is_empty() {
                    let s = rng::uniform_usize(&mut rng, market.singles().len());
                    let misreport = deviate(&market.singles()[s].prefs, kind, &mut rng);
                    let tally_cell = &mut tally[0][kind_idx];
                    tally_cell.attempts += 1;
                    let deviated = market
                        .with_single_prefs(s, misreport)
                        .expect("deviation preserves validity");
                    let run = solve(&deviated, pi.clone(), cfg.mode);
                    if let SodaOutcome::Stable { matching, .. } = &run.outcome {
                        tally_cell.comparable += 1;
                        let true_list = &market.singles()[s].prefs;
                        let truth_pos = position_or_end(true_list, truth_mu.single_assignment(s));
                        let mis_pos = position_or_end(true_list, matching.single_assignment(s));
                        if mis_pos < truth_pos {
                            tally_cell.gains += 1;
                        }
                    } else {
                        tally_cell.excluded += 1;
                    }
                }

                // A random couple misreports.
                if !market.couples().is_empty() {
                    let c = rng::uniform_usize(&mut rng, market.couples().len());
                    let misreport = deviate(&market.couples()[c].prefs, kind, &mut rng);
                    let tally_cell = &mut tally[1][kind_idx];
                    tally_cell.attempts += 1;
                    let deviated = market
                        .with_couple_prefs(c, misreport)
                        .expect("deviation preserves validity");
                    let run = solve(&deviated, pi.clone(), cfg.mode);
                    if let SodaOutcome::Stable { matching, .. } = &run.outcome {
                        tally_cell.comparable += 1;
                        let true_list = &market.couples()[c].prefs;
                        let truth_pos = position_or_end(true_list, truth_mu.couple_assignment(c));
                        let mis_pos = position_or_end(true_list, matching.couple_assignment(c));
                        if mis_pos < truth_pos {
                            tally_cell.gains += 1;
                        }
                    } else {
                        tally_cell.excluded += 1;
                    }
                }
            }
            tally
        })
        .collect();

    let mut rows = Vec::new();
    for (pop_idx, population) in ["single", "couple"].into_iter().enumerate() {
        for (kind_idx, kind) in DEVIATIONS.into_iter().enumerate() {
            let mut attempts = 0;
            let mut comparable = 0;
            let mut gains = 0;
            let mut excluded = 0;
            for t in &tallies {
                attempts += t[pop_idx][kind_idx].attempts;
                comparable += t[pop_idx][kind_idx].comparable;
                gains += t[pop_idx][kind_idx].gains;
                excluded += t[pop_idx][kind_idx].excluded;
            }
            let (ci_low, ci_high) = if comparable > 0 {
                clopper_pearson(gains as u64, comparable as u64)
            } else {
                (0.0, 1.0)
            };
            rows.push(ProbeRow {
                population,
                deviation: kind,
                attempts,
                comparable,
                strict_gains: gains,
                gain_frequency: if comparable > 0 {
                    gains as f64 / comparable as f64
                } else {
                    0.0
                },
                ci_low,
                ci_high,
                excluded_failed: excluded,
            });
        }
    }

    let mut csv = String::new();
    cfg.header("truthfulness-probe", &mut csv);
    let _ = writeln!(csv, "# n={} rule={}", cfg.effective_n(n), rule_label(rule));
    csv.push_str(
        "population,deviation,attempts,comparable,strict_gains,gain_frequency,ci_low,ci_high,excluded_failed\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{}",
            r.population,
            deviation_label(r.deviation),
            r.attempts,
            r.comparable,
            r.strict_gains,
            r.gain_frequency,
            r.ci_low,
            r.ci_high,
            r.excluded_failed
        );
    }
    ProbeTable { rows, csv }
}

fn position_or_end<T: PartialEq>(list: &[T], value: Option<T>) -> usize {
    match value {
        Some(v) => list.iter().position(|x| *x == v).unwrap_or(list.len()),
        None => list.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub n: usize,
    pub couples: usize,
    pub trials: usize,
    pub mean_tree_size: f64,
    pub max_tree_size: usize,
    pub max_component: usize,
    pub cycle_frequency: f64,
    pub intersect_twice_frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsTable {
    pub rows: Vec<DiagnosticsRow>,
    pub csv: String,
}

/// Influence-tree and couples-graph statistics per sweep point.
pub fn graph_diagnostics_sweep(cfg: &ExperimentConfig) -> DiagnosticsTable {
    let mut rows = Vec::new();
    let mut point_index = 0;
    for &n in &cfg.n_values {
        for &rule in &cfg.couple_rules {
            let records = run_point(cfg, point_index, n, rule, false, true);
            point_index += 1;
            let graphs: Vec<&GraphTrialStats> =
                records.iter().filter_map(|r| r.graph.as_ref()).collect();
            let trials = records.len();
            let mean_tree_size = if graphs.is_empty() {
                0.0
            } else {
                graphs.iter().map(|g| g.mean_tree_size).sum::<f64>() / graphs.len() as f64
            };
            rows.push(DiagnosticsRow {
                n: cfg.effective_n(n),
                couples: records.first().map_or(0, |r| r.couples),
                trials,
                mean_tree_size,
                max_tree_size: graphs.iter().map(|g| g.max_tree_size).max().unwrap_or(0),
                max_component: graphs.iter().map(|g| g.max_component).max().unwrap_or(0),
                cycle_frequency: if graphs.is_empty() {
                    0.0
                } else {
                    graphs.iter().filter(|g| g.cyclic).count() as f64 / graphs.len() as f64
                },
                intersect_twice_frequency: if graphs.is_empty() {
                    0.0
                } else {
                    graphs.iter().filter(|g| g.intersects_twice).count() as f64
                        / graphs.len() as f64
                },
            });
        }
    }
    let mut csv = String::new();
    cfg.header("graph-diagnostics", &mut csv);
    csv.push_str(
        "n,couples,trials,mean_tree_size,max_tree_size,max_component,cycle_frequency,intersect_twice_frequency\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{:.6},{},{},{:.6},{:.6}",
            r.n,
            r.couples,
            r.trials,
            r.mean_tree_size,
            r.max_tree_size,
            r.max_component,
            r.cycle_frequency,
            r.intersect_twice_frequency
        );
    }
    DiagnosticsTable { rows, csv }
}

/// One qualifying market of the topological-insertion study.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoTrial {
    pub seed: u64,
    /// Couple-eviction restarts when seeding the solver with the
    /// topological insertion order.
    pub restarts: u32,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoStudy {
    pub qualifying: Vec<TopoTrial>,
    pub generated: usize,
    pub zero_restart_fraction: f64,
}

/// Generate markets until `needed` of them have an acyclic couples graph,
/// pairwise tree intersections ≤ 1, and weak components ≤ `max_component`;
/// seed the solver with the topological order and count restart-free runs.
pub fn topological_insertion_study(
    cfg: &ExperimentConfig,
    needed: usize,
    max_component: usize,
    r: i64,
) -> TopoStudy {
    let n = cfg.n_values[0];
    let rule = cfg.couple_rules[0];
    let mut qualifying = Vec::new();
    let mut generated = 0usize;
    let mut index = 0u64;
    while qualifying.len() < needed {
        // Probe candidate markets in parallel batches, consume in order.
        let batch: Vec<Option<TopoTrial>> = (0..64u64)
            .into_par_iter()
            .map(|offset| {
                let seed = rng::derive_seed(cfg.seed_base, rng::stream::TRIAL, index + offset);
                let params = cfg.gen_params(n, rule, seed);
                let market = generate_market(&params).ok()?;
                if market.couples().is_empty() {
                    return None;
                }
                let mu_da = crate::engine::deferred_acceptance(&market);
                let trees = build_all_trees(&market, &mu_da, r).ok()?;
                for i in 0..trees.len() {
                    for j in (i + 1)..trees.len() {
                        if trees[i].intersections(&trees[j]).len() > 1 {
                            return None;
                        }
                    }
                }
                let graph = build_couples_graph(&market, &trees).ok()?;
                let components = weakly_connected_components(&graph);
                if components.iter().map(|c| c.len()).max().unwrap_or(0) > max_component {
                    return None;
                }
                let pi = topological_insertion_order(&graph).ok()?;
                let report = solve(&market, pi, cfg.mode);
                Some(TopoTrial {
                    seed,
                    restarts: report.restarts,
                    outcome: report.outcome.tag().to_string(),
                })
            })
            .collect();
        index += 64;
        generated += 64;
        for trial in batch.into_iter().flatten() {
            if qualifying.len() < needed {
                qualifying.push(trial);
            }
        }
        if generated > needed * 1000 {
            break; // qualification rate is pathologically low; report as-is
        }
    }
    let zero = qualifying.iter().filter(|t| t.restarts == 0).count();
    let zero_restart_fraction = if qualifying.is_empty() {
        0.0
    } else {
        zero as f64 / qualifying.len() as f64
    };
    TopoStudy {
        qualifying,
        generated,
        zero_restart_fraction,
    }
}

/// Serialize raw trial records as JSON lines.
pub fn records_to_jsonl(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "{}", serde_json::to_string(r).expect("record"));
    }
    out
}

/// Raw per-trial records for one sweep point (JSONL dumps, debugging).
pub fn raw_trials(cfg: &ExperimentConfig, n: usize, rule: CoupleRule) -> Vec<TrialRecord> {
    run_point(cfg, 0, n, rule, true, false)
}
