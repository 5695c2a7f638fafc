//! Monte Carlo success-rate sweep: how often a stable matching is found as
//! market size and couple share vary. Desk-scale version of the full study.
//!
//!     cargo run --release --example success_rate_sweep

use soda::experiments::{success_rate_sweep, ExperimentConfig};
use soda::gen::CoupleRule;

fn main() {
    let mut cfg = ExperimentConfig::new(2024);
    cfg.n_values = vec![250, 500, 1000];
    cfg.couple_rules = vec![
        CoupleRule::Fraction(0.01),
        CoupleRule::Fraction(0.05),
        CoupleRule::Fraction(0.10),
    ];
    cfg.trials = 150;

    let table = success_rate_sweep(&cfg);
    print!("{}", table.csv);

    eprintln!();
    for row in &table.rows {
        eprintln!(
            "n={:5} couples={:4}  success {:.3}  [{:.3}, {:.3}]",
            row.n, row.couples, row.success_fraction, row.ci_low, row.ci_high
        );
    }
}
