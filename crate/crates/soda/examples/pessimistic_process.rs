//! The randomized multi-assignment application process on a capacity-1
//! market: how many hospitals get visited before everyone is l-settled.
//!
//!     cargo run --release --example pessimistic_process

use soda::gen::{generate_market, CoupleRule, GenParams};
use soda::pessimistic::l_pessimistic_da;

fn main() {
    let n = 200;
    let lambda = 20.0;
    let mut params = GenParams::new(n, 17);
    params.couples = CoupleRule::Fraction(1.0); // one couple per single
    params.capacity = 1;
    params.lambda = lambda;
    params.single_list_cap = Some(50);
    params.couple_list_cap = 100;

    let seeds = 60;
    let threshold = (lambda * n as f64 / 10.0) as usize;
    let mut below = 0;
    let mut visited_sum = 0usize;
    for seed in 0..seeds {
        params.seed = seed;
        let market = generate_market(&params).unwrap();
        let stats = l_pessimistic_da(&market, 3, seed).unwrap();
        visited_sum += stats.visited_hospitals;
        if stats.visited_hospitals < threshold {
            below += 1;
        }
        if seed < 5 {
            println!(
                "seed {seed}: visited {} of {} hospitals in {} steps, settled histogram {:?}, terminated {}",
                stats.visited_hospitals,
                market.n_hospitals(),
                stats.steps,
                stats.settled_histogram,
                stats.terminated
            );
        }
    }
    println!(
        "\nacross {seeds} seeds: mean visited {:.0}, {} runs below the lambda*n/10 = {threshold} mark",
        visited_sum as f64 / seeds as f64,
        below
    );
}
