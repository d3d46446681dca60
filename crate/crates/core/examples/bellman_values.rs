//! Solves both Bellman recursions for uniform observations and compares them.
//!
//! `cargo run --release --example bellman_values -- 25 2001`

use prophet_select::bellman::{max_stage_gap, solve_knapsack_values, solve_monotone_values, GridSpec};
use prophet_select::dist::DistributionModel;

fn main() -> prophet_select::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let n = args.next().unwrap_or(25);
    let points = args.next().unwrap_or(2001);
    let dist = DistributionModel::standard_uniform();
    let grid = GridSpec::with_points(points);
    let knap = solve_knapsack_values(&dist, n, &grid)?;
    let mono = solve_monotone_values(&dist, n, &grid)?;
    println!("n = {n}, {points} grid points");
    println!("{:>4} {:>12} {:>12} {:>10} {:>10}", "k", "v_k(1)", "v~_k(1)", "alpha_k(1)", "(2k)^1/2");
    for k in (1..=n).filter(|k| k % (n / 10).max(1) == 0 || *k == 1) {
        println!(
            "{k:>4} {:>12.6} {:>12.6} {:>10.5} {:>10.4}",
            knap.values.value(k, 1.0),
            mono.values.value(k, 1.0),
            mono.thresholds.alpha(k, 1.0),
            (2.0 * k as f64).sqrt()
        );
    }
    println!("max gap over stages and grid: {:.3e}", max_stage_gap(&knap.values, &mono.values));
    for d in knap.values.diagnostics.iter().chain(&mono.values.diagnostics) {
        println!("diagnostic: {d}");
    }
    Ok(())
}
