//! Variance ratio and normal approximation of the monotone selection count.
//!
//! `cargo run --release --example clt_trend -- 100000`

use prophet_select::bellman::GridSpec;
use prophet_select::policy::clt_variance_check;

fn main() -> prophet_select::Result<()> {
    let reps = std::env::args().nth(1).map(|a| a.parse().expect("reps")).unwrap_or(50_000);
    let report = clt_variance_check(&[100, 500, 2000], reps, 5, &GridSpec::default())?;
    println!("{:>6} {:>9} {:>9} {:>8} {:>8} {:>8}", "n", "mean", "(2n)^1/2", "ratio", "KS", "KS(ctr)");
    for r in &report.rows {
        println!(
            "{:>6} {:>9.3} {:>9.3} {:>8.4} {:>8.4} {:>8.4}",
            r.n, r.mean, r.sqrt_2n, r.variance_ratio, r.ks_normal, r.ks_normal_centred
        );
    }
    println!("ratio trends toward one: {}", report.trend_toward_one);
    Ok(())
}
