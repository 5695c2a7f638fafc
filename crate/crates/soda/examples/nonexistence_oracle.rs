//! A market with one couple for which no stable matching exists, confirmed
//! by exhaustive enumeration under two independent orders.
//!
//!     cargo run --example nonexistence_oracle

use soda::engine::{solve, Permutation, SolveMode};
use soda::gen::{counterexample_market, CounterexamplePrefs, CONFIRMED_COUNTEREXAMPLE_SEED};
use soda::oracle::{exhaustive_stability_oracle, EnumOrder, OracleVerdict};

fn main() {
    let market = counterexample_market(
        4,
        CounterexamplePrefs::Seeded(CONFIRMED_COUNTEREXAMPLE_SEED),
    )
    .unwrap();
    println!(
        "counterexample family at n = 4: {} hospitals of capacity 1, {} singles, 1 couple",
        market.n_hospitals(),
        market.singles().len()
    );
    println!("every hospital ranks the couple's second member first and its first member last\n");

    for order in [EnumOrder::SinglesOuter, EnumOrder::CouplesOuter] {
        let verdict = exhaustive_stability_oracle(&market, 10_000_000, order).unwrap();
        println!(
            "oracle ({order:?}): {}",
            match verdict {
                OracleVerdict::Exists(_) => "a stable matching exists",
                OracleVerdict::None => "no stable matching exists",
            }
        );
    }

    for mode in [
        SolveMode::Classic,
        SolveMode::BackwardEdge,
        SolveMode::Direct,
    ] {
        let outcome = solve(&market, Permutation::identity(1), mode).outcome;
        println!("solver ({mode:?}): {}", outcome.tag());
    }

    // The same family at other seeds usually lacks stability too, but each
    // instance must be confirmed by the oracle, not assumed.
    let mut confirmed = 0;
    for seed in 0..20u64 {
        let m = counterexample_market(4, CounterexamplePrefs::Seeded(seed)).unwrap();
        let verdict = exhaustive_stability_oracle(&m, 10_000_000, EnumOrder::SinglesOuter).unwrap();
        if verdict == OracleVerdict::None {
            confirmed += 1;
        }
    }
    println!("\nseeds 0..20: {confirmed} of 20 instances confirmed unstable");
}
