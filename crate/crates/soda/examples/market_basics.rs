//! Build a small market with couples, run deferred acceptance on its
//! singles, and check stability of the result.
//!
//!     cargo run --example market_basics

use soda::engine::deferred_acceptance;
use soda::fixtures;
use soda::matching::{find_blocks, is_stable};

fn main() {
    let market = fixtures::demo_market();
    println!(
        "market: {} hospitals, {} singles, {} couples",
        market.n_hospitals(),
        market.singles().len(),
        market.couples().len()
    );

    let mu = deferred_acceptance(&market);
    println!("\nsingles-only deferred acceptance:");
    for (i, s) in market.singles().iter().enumerate() {
        match mu.single_assignment(i) {
            Some(h) => println!("  {} -> {}", s.id, h),
            None => println!("  {} -> unassigned", s.id),
        }
    }

    // Couples are still unassigned, so their blocks are expected; the
    // couple-free restriction is stable outright.
    let singles_only = fixtures::demo_market_singles_only();
    let mu_restricted = deferred_acceptance(&singles_only);
    println!(
        "\ncouple-free restriction stable: {}",
        is_stable(&singles_only, &mu_restricted).unwrap()
    );

    let blocks = find_blocks(&market, &mu).unwrap();
    println!(
        "blocks in the full market before couple insertion: {}",
        blocks.len()
    );
    for b in &blocks {
        println!("  {b:?}");
    }
}
