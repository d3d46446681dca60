//! Runs the optimal knapsack and monotone policies and compares the mean
//! selection count with the dynamic-programming value.

use prophet_select::bellman::{solve_knapsack_values, solve_monotone_values, GridSpec};
use prophet_select::dist::DistributionModel;
use prophet_select::policy::{monte_carlo, simulate_monotone, McPlan};

fn main() -> prophet_select::Result<()> {
    let n = 25;
    let dist = DistributionModel::standard_uniform();
    let grid = GridSpec::default();
    for (name, sol) in [
        ("knapsack", solve_knapsack_values(&dist, n, &grid)?),
        ("monotone", solve_monotone_values(&dist, n, &grid)?),
    ] {
        let mut plan = McPlan::new(n, 50_000, 7);
        plan.x0 = Some(1.0);
        let run = monte_carlo(&sol, &plan)?;
        let m = run.moments();
        println!(
            "{name}: mean {:.4} (se {:.4}) variance {:.4}, DP value {:.4}",
            m.mean,
            m.se,
            m.variance,
            sol.values.value(n, 1.0)
        );
    }

    let mono = solve_monotone_values(&dist, n, &grid)?;
    let trace = simulate_monotone(&mono, n, 42)?;
    println!("one monotone run selects {:?}", trace.accepted_values().iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>());
    Ok(())
}
