//! Insert couples on top of the singles-only outcome and watch the solver
//! work: placements, evictions, and--when a couple evicts a couple--the
//! reordering restart.
//!
//!     cargo run --example solve_with_couples

use soda::engine::{solve, Permutation, SodaOutcome, SolveMode};
use soda::fixtures;
use soda::matching::is_stable;

fn run(label: &str, market: &soda::MarketInstance, mode: SolveMode) {
    let pi = Permutation::identity(market.couples().len());
    let report = solve(market, pi, mode);
    println!("== {label} ({mode:?})");
    println!("   orders tried: {:?}", report.trace.tried);
    for e in &report.trace.evictions {
        println!(
            "   eviction: c{} pushed {} out of {} ({:?})",
            e.evictor, e.evicted, e.hospital, e.phase
        );
    }
    match &report.outcome {
        SodaOutcome::Stable {
            matching,
            restarts,
            final_permutation,
            ..
        } => {
            println!(
                "   stable after {restarts} restart(s), final order {:?}",
                final_permutation.as_slice()
            );
            for (i, _) in market.couples().iter().enumerate() {
                match matching.couple_assignment(i) {
                    Some((a, b)) => println!("   couple {i} -> ({a}, {b})"),
                    None => println!("   couple {i} -> unassigned"),
                }
            }
            assert!(is_stable(market, matching).unwrap());
        }
        other => println!("   outcome: {}", other.tag()),
    }
    println!();
}

fn main() {
    // Both couples fit without disturbing each other.
    let demo = fixtures::demo_market();
    run("demo market", &demo, SolveMode::Classic);

    // The second couple evicts the first: the direct variant gives up, the
    // classic variant retries with the evictor moved ahead.
    let contested = fixtures::eviction_market();
    run("contested market", &contested, SolveMode::Direct);
    run("contested market", &contested, SolveMode::Classic);
    run("contested market", &contested, SolveMode::BackwardEdge);

    // A couple whose own chain reaction circles back onto it fails outright.
    let self_evicting = fixtures::self_eviction_market();
    run("self-evicting market", &self_evicting, SolveMode::Classic);
}
