//! Can anyone gain by misreporting? Replays each market with sampled
//! truncations, swaps, and reshuffles and counts strict improvements under
//! the true preferences.
//!
//!     cargo run --release --example truthfulness_probe

use soda::experiments::{deviation_label, truthfulness_probe, ExperimentConfig};
use soda::gen::CoupleRule;

fn main() {
    let mut cfg = ExperimentConfig::new(99);
    cfg.n_values = vec![500];
    cfg.couple_rules = vec![CoupleRule::Power(0.5)];
    cfg.trials = 120;

    let probe = truthfulness_probe(&cfg, 5);
    println!("population | deviation | comparable | strict gains | frequency");
    for row in &probe.rows {
        println!(
            "{:>10} | {:>9} | {:>10} | {:>12} | {:.4}  [{:.4}, {:.4}]",
            row.population,
            deviation_label(row.deviation),
            row.comparable,
            row.strict_gains,
            row.gain_frequency,
            row.ci_low,
            row.ci_high
        );
    }
    println!("\n(excluded runs where truth or misreport failed to find a stable matching)");
}
