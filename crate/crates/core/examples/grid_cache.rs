//! Persists a solved grid and reloads it on the second request.

use prophet_select::bellman::{GridSpec, Problem};
use prophet_select::cache::{cache_path, solve_cached};
use prophet_select::dist::DistributionModel;

fn main() -> prophet_select::Result<()> {
    let dir = std::env::temp_dir().join("brgrid-example");
    let dist = DistributionModel::standard_uniform();
    let spec = GridSpec::with_points(1001);
    let path = cache_path(&dir, Problem::Monotone, &dist, 50, &spec)?;
    let _ = std::fs::remove_file(&path);
    for _ in 0..2 {
        let (sol, status) = solve_cached(Problem::Monotone, &dist, 50, &spec, Some(&dir))?;
        println!("{status:?}: v~_50(1) = {:.6}", sol.values.value(50, 1.0));
    }
    println!("grid stored at {}", path.display());
    Ok(())
}
