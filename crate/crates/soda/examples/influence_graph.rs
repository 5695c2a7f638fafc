//! Influence trees and the couples graph: which hospitals can each couple
//! plausibly touch, and which couple should apply first.
//!
//!     cargo run --example influence_graph

use soda::engine::{deferred_acceptance, solve, SolveMode};
use soda::experiments::default_budget;
use soda::fixtures;
use soda::gen::{generate_market, CoupleRule, GenParams};
use soda::influence::{
    build_all_trees, build_couples_graph, find_cycle, topological_insertion_order,
    verify_influence_containment, weakly_connected_components,
};

fn main() {
    let market = fixtures::demo_market();
    let baseline = deferred_acceptance(&market);
    let trees = build_all_trees(&market, &baseline, 1).unwrap();
    for t in &trees {
        println!("couple {} (budget {}):", t.couple, t.budget);
        println!(
            "  roots: {:?}",
            t.roots.iter().map(|r| r.pair).collect::<Vec<_>>()
        );
        for e in &t.entries {
            println!(
                "  ({}, {})  residual {}",
                e.hospital, e.inserter, e.residual_budget
            );
        }
    }
    let graph = build_couples_graph(&market, &trees).unwrap();
    println!("\ncouples graph: {} edges", graph.edges.len());
    print!("{}", graph.to_dot());
    println!("components: {:?}", weakly_connected_components(&graph));
    println!("cycle: {:?}", find_cycle(&graph));
    let order = topological_insertion_order(&graph).unwrap();
    println!("insertion order: {:?}", order.as_slice());

    // Containment on a sparse random market: the hospitals a couple actually
    // influences during a run should lie inside its tree.
    let mut p = GenParams::new(200, 11);
    p.couples = CoupleRule::Power(0.5);
    p.epsilon = Some(0.5);
    p.capacity = 1;
    p.lambda = 10.0;
    p.single_list_cap = Some(50);
    p.couple_list_cap = 100;
    let random = generate_market(&p).unwrap();
    let r = default_budget(p.epsilon);
    let baseline = deferred_acceptance(&random);
    let trees = build_all_trees(&random, &baseline, r).unwrap();
    let report = solve(
        &random,
        soda::Permutation::identity(random.couples().len()),
        SolveMode::Classic,
    );
    let containment = verify_influence_containment(&random, &report.trace, &trees).unwrap();
    println!(
        "\nrandom market at r = {r}: {} couples checked, {} influenced hospitals, {} containment violations",
        containment.couples_checked,
        containment.hospitals_checked,
        containment.violations.len()
    );
}
