//! The greedy maximal function against exhaustive subset search, and the
//! pointwise relations between A(n,s) and the below-threshold set B(n,s).

use prophet_select::dist::{DistributionModel, JointCoupling, MarginalSet};
use prophet_select::maximal::{
    brute_force_maximal, count_below_threshold, key_inequality_slack, maximal_function, sets_nested, solve_threshold,
};
use prophet_select::rng::stream_rng;

fn main() -> prophet_select::Result<()> {
    let n = 12;
    let set = MarginalSet::iid(DistributionModel::standard_uniform(), n, JointCoupling::Independent);
    let t = solve_threshold(&set.marginals, 1.0)?.t;
    let mut agree = 0;
    let mut min_slack = f64::INFINITY;
    let mut nested = 0;
    let reps = 2000;
    for r in 0..reps {
        let xs = set.sample(&mut stream_rng(3, r));
        let greedy = maximal_function(&xs, 1.0);
        agree += (greedy.count == brute_force_maximal(&xs, 1.0)?) as usize;
        min_slack = min_slack.min(key_inequality_slack(&xs, 1.0, t));
        nested += sets_nested(&xs, 1.0, t) as usize;
    }
    println!("{agree}/{reps} greedy counts equal exhaustive search");
    println!("smallest key-inequality slack {min_slack:.3e} (never negative)");
    println!("{nested}/{reps} samples with nested A and B");

    let xs = [0.5, 0.1, 0.1, 0.3, 0.05];
    let sel = maximal_function(&xs, 0.3);
    let below = count_below_threshold(&xs, 0.2);
    println!("sample {xs:?}, s = 0.3: picks {:?} (total {}), |B| at t = 0.2 is {}", sel.indices, sel.total, below.count);
    Ok(())
}
