//! Two-sample comparison of the partial counts of the knapsack and monotone
//! policies, with the covariance matrices of the recorded prefixes.

use prophet_select::bellman::GridSpec;
use prophet_select::policy::{distributional_identity_test, IdentityPlan};

fn main() -> prophet_select::Result<()> {
    let report = distributional_identity_test(&IdentityPlan {
        n: 25,
        ks: vec![1, 5, 12, 25],
        reps: 50_000,
        seed: 2,
        grid: GridSpec::default(),
        shared_stream: false,
    })?;
    println!("per-test level {:.2e}", report.per_test_level);
    for c in &report.comparisons {
        println!(
            "k={:>2}: means {:.4} / {:.4}, chi2 p {:.3}, mean p {:.3}, var p {:.3}, state TV {:.3}",
            c.k, c.knapsack.mean, c.monotone.mean, c.chi_square.p_value, c.mean_test.p_value, c.variance_test.p_value,
            c.state_tv_distance
        );
    }
    println!("knapsack covariance {:?}", round(&report.knapsack_covariance));
    println!("monotone covariance {:?}", round(&report.monotone_covariance));
    println!("all marginal tests pass: {}", report.pass);
    Ok(())
}

fn round(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|v| (v * 1e3).round() / 1e3).collect()).collect()
}
