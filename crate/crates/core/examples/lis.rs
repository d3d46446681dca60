//! Longest increasing subsequence by patience sorting, and its mean against
//! the second-order asymptotic expansion.

use prophet_select::bellman::GridSpec;
use prophet_select::study::{lis_length, lis_mean_check};

fn main() -> prophet_select::Result<()> {
    println!("L(3, 1, 2) = {}", lis_length(&[3.0, 1.0, 2.0]));
    for n in [25usize, 100, 1000] {
        let r = lis_mean_check(n, 5_000, 9, &GridSpec::default())?;
        println!(
            "n={n:>5}: E[L_n] ~ {:.3} (se {:.3}), expansion {:.3}, sequential optimum {:.3}",
            r.mc_estimate, r.mc_se, r.details["asymptotic"], r.details["sequential_value"]
        );
    }
    Ok(())
}
