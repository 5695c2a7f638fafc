//! Influence-tree sizes, component sizes, and cycle frequencies across
//! market sizes in the sparse regime.
//!
//!     cargo run --release --example graph_diagnostics

use soda::experiments::{graph_diagnostics_sweep, ExperimentConfig};
use soda::gen::CoupleRule;

fn main() {
    let mut cfg = ExperimentConfig::new(31);
    cfg.n_values = vec![100, 200, 400];
    cfg.couple_rules = vec![CoupleRule::Power(0.5)];
    cfg.capacity = 1;
    cfg.lambda = 10.0;
    cfg.single_list_cap = Some(50);
    cfg.couple_list_cap = 100;
    cfg.trials = 100;
    cfg.r_override = Some(8);

    let table = graph_diagnostics_sweep(&cfg);
    print!("{}", table.csv);
    eprintln!();
    for row in &table.rows {
        eprintln!(
            "n={:4} couples={:3}  mean tree {:.1}  max tree {:3}  max component {}  cycles {:.3}  double intersections {:.3}",
            row.n,
            row.couples,
            row.mean_tree_size,
            row.max_tree_size,
            row.max_component,
            row.cycle_frequency,
            row.intersect_twice_frequency
        );
    }
}
