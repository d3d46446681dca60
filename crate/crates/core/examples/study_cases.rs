//! The three worked scenarios with their exact or closed-form oracles.

use prophet_select::study::{example1_run, example2_exact, example2_run, example3_run, polya_integral, StudyReport};

fn show(r: &StudyReport) {
    println!("[{}] n={} mean {:.4} (se {:.4}) bound {:.4} pass {}", r.case_id, r.n, r.mc_estimate, r.mc_se, r.bound, r.pass());
    for c in &r.checks {
        println!("    {} {}: {}", if c.pass { "ok " } else { "BAD" }, c.name, c.detail);
    }
}

fn main() -> prophet_select::Result<()> {
    show(&example1_run(100, 20_000, 1)?);
    show(&example2_run(100, 20_000, 1)?);
    show(&example3_run(100, 20_000, 1)?);
    println!("H_1000 = {:.6}, truncated integral {:.6}", example2_exact(1000), polya_integral(1e-6));
    Ok(())
}
