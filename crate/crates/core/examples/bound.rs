//! Threshold t(n, s) and the bound on E[M*(s)] for a few marginal families,
//! next to a Monte Carlo estimate.

use prophet_select::dist::{DistributionModel, JointCoupling, MarginalSet};
use prophet_select::maximal::{prophet_monte_carlo, solve_threshold, ProphetPlan};

fn main() -> prophet_select::Result<()> {
    let n = 100;
    let families = [
        ("iid uniform", MarginalSet::iid(DistributionModel::standard_uniform(), n, JointCoupling::Independent)),
        ("comonotone uniform", MarginalSet::iid(DistributionModel::standard_uniform(), n, JointCoupling::Comonotone)),
        ("uniform on [0, i]", MarginalSet::scaled_uniforms(n, JointCoupling::Independent)),
        ("order statistics", MarginalSet::beta_order_family(n, JointCoupling::OrderStatistics)),
    ];
    println!("{:<20} {:>10} {:>9} {:>9} {:>7}", "family", "t", "bound", "E[M*]", "se");
    for (name, set) in families {
        let sol = solve_threshold(&set.marginals, 1.0)?;
        let plan = ProphetPlan { s: 1.0, t: Some(sol.t), reps: 20_000, seed: 1, stream_offset: 0, check_invariants: false };
        let m = prophet_monte_carlo(&set, &plan).maximal();
        println!("{name:<20} {:>10.6} {:>9.4} {:>9.4} {:>7.4}", sol.t, sol.bound, m.mean, m.se);
    }
    Ok(())
}
