use prophet_select::bellman::{solve_knapsack_values, solve_monotone_values, solve_values, GridSpec, Problem};
use prophet_select::dist::DistributionModel;
use prophet_select::maximal::{br_bound, maximal_function};
use prophet_select::policy::{distributional_identity_test, IdentityPlan, Policy};
use prophet_select::rng::stream_rng;
use prophet_select::study::{lis_length, lis_mean_check};

fn uniform() -> DistributionModel {
    DistributionModel::standard_uniform()
}

/// Knapsack recursion for the uniform law by brute-force trapezoid sums on a
/// fine grid, written independently of the library's quadrature.
fn knapsack_reference(n: usize, cells: usize) -> f64 {
    let h = 1.0 / cells as f64;
    let mut v = vec![0.0f64; cells + 1];
    for _ in 0..n {
        let mut next = vec![0.0; cells + 1];
        for (i, slot) in next.iter_mut().enumerate() {
            let x = i as f64 * h;
            let vals: Vec<f64> = (0..=i).map(|j| v[i].max(1.0 + v[i - j])).collect();
            let integral = if i == 0 {
                0.0
            } else {
                h * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[i]))
            };
            *slot = (1.0 - x) * v[i] + integral;
        }
        v = next;
    }
    v[cells]
}

#[test]
fn knapsack_matches_independent_reference() {
    let sol = solve_knapsack_values(&uniform(), 6, &GridSpec::default()).unwrap();
    let reference = knapsack_reference(6, 4000);
    assert!((sol.values.value(6, 1.0) - reference).abs() < 2e-5, "{} vs {reference}", sol.values.value(6, 1.0));
}

#[test]
fn second_stage_closed_form() {
    // v_1(x) = x, so v_2(x) = (1 - x) x + ∫_0^x (1 + x - y) dy = 2x - x²/2
    for problem in [Problem::Knapsack, Problem::Monotone] {
        let sol = solve_values(problem, &uniform(), 2, &GridSpec::with_points(1001)).unwrap();
        for i in (0..1001).step_by(37) {
            let x = sol.values.grid().node(i);
            let exact = 2.0 * x - 0.5 * x * x;
            assert!((sol.values.stage(2)[i] - exact).abs() < 1e-9, "{problem:?} x={x}");
        }
    }
}

#[test]
fn values_monotone_in_stage_and_state() {
    let dists = [
        uniform(),
        DistributionModel::uniform(3.0).unwrap(),
        DistributionModel::beta_order(2, 4).unwrap(),
        DistributionModel::tabulated(vec![0.0, 0.2, 1.0], vec![0.0, 0.6, 1.0]).unwrap(),
    ];
    for dist in &dists {
        for problem in [Problem::Knapsack, Problem::Monotone] {
            let sol = solve_values(problem, dist, 15, &GridSpec::with_points(401)).unwrap();
            let stages = sol.values.stages();
            for k in 0..stages.len() {
                assert!(stages[k].windows(2).all(|w| w[1] >= w[0] - 1e-12), "{problem:?} stage {k}");
                if k > 0 {
                    assert!(stages[k].iter().zip(&stages[k - 1]).all(|(a, b)| a >= &(b - 1e-12)));
                }
            }
        }
    }
}

#[test]
fn sequential_value_below_prophet_bound() {
    let mono = solve_monotone_values(&uniform(), 200, &GridSpec::default()).unwrap();
    let knap = solve_knapsack_values(&uniform(), 60, &GridSpec::default()).unwrap();
    for n in 1..=200 {
        let cap = br_bound(&vec![uniform(); n], 1.0).unwrap();
        assert!((cap - (2.0 * n as f64).sqrt()).abs() < 1e-9 || n == 1);
        assert!(mono.values.value(n, 1.0) <= cap + 1e-9, "monotone n={n}");
        if n <= 60 {
            assert!(knap.values.value(n, 1.0) <= cap + 1e-9, "knapsack n={n}");
        }
    }
}

#[test]
fn monotone_value_has_nonincreasing_increments() {
    let sol = solve_monotone_values(&uniform(), 100, &GridSpec::with_points(4001)).unwrap();
    let v: Vec<f64> = (0..=100).map(|n| sol.values.value(n, 1.0)).collect();
    let d: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    for (n, w) in d.windows(2).enumerate() {
        assert!(w[1] <= w[0] + 1e-7, "increment rises at n={}: {} -> {}", n + 1, w[0], w[1]);
    }
}

#[test]
fn halving_spacing_changes_value_little() {
    let tolerance = GridSpec::default().tolerance;
    for problem in [Problem::Knapsack, Problem::Monotone] {
        let coarse = solve_values(problem, &uniform(), 25, &GridSpec::with_points(1001)).unwrap();
        let fine = solve_values(problem, &uniform(), 25, &GridSpec::with_points(2001)).unwrap();
        let change = (coarse.values.value(25, 1.0) - fine.values.value(25, 1.0)).abs();
        assert!(change <= 4.0 * tolerance, "{problem:?}: {change}");
    }
}

#[test]
fn sequential_player_never_beats_the_prophet() {
    let n = 30;
    let knap = solve_knapsack_values(&uniform(), n, &GridSpec::default()).unwrap();
    let mono = solve_monotone_values(&uniform(), n, &GridSpec::default()).unwrap();
    let kp = Policy::new(&knap, n).unwrap();
    let mp = Policy::new(&mono, n).unwrap();
    for r in 0..2000 {
        for x0 in [1.0, 0.4] {
            let t = kp.trace(n, x0, &mut stream_rng(13, r));
            assert!(t.is_feasible());
            let obs: Vec<f64> = t.steps.iter().map(|s| s.observation).collect();
            assert!(t.final_count <= maximal_function(&obs, x0).count);
        }
        let t = mp.trace(n, 1.0, &mut stream_rng(14, r));
        assert!(t.is_feasible());
        let negated: Vec<f64> = t.steps.iter().map(|s| -s.observation).collect();
        assert!(t.final_count <= lis_length(&negated));
    }
}

#[test]
fn traces_feasible_for_non_uniform_laws() {
    let dist = DistributionModel::beta_order(3, 5).unwrap();
    for problem in [Problem::Knapsack, Problem::Monotone] {
        let sol = solve_values(problem, &dist, 12, &GridSpec::with_points(801)).unwrap();
        let p = Policy::new(&sol, 12).unwrap();
        for r in 0..500 {
            assert!(p.trace(12, p.initial_state(), &mut stream_rng(15, r)).is_feasible());
        }
    }
}

#[test]
fn partial_counts_agree_in_law_for_small_horizons() {
    for n in [5usize, 10] {
        let report = distributional_identity_test(&IdentityPlan {
            n,
            ks: (1..=n).collect(),
            reps: 100_000,
            seed: 16 + n as u64,
            grid: GridSpec::default(),
            shared_stream: false,
        })
        .unwrap();
        assert!(report.pass, "n={n}: {:#?}", report.comparisons);
        assert!((report.knapsack_mean - report.monotone_mean).abs() < 0.05);
    }
}

#[test]
fn lis_mean_superadditive_in_sample() {
    let grid = GridSpec::with_points(501);
    let means: Vec<f64> = [25usize, 50, 100]
        .iter()
        .map(|&n| lis_mean_check(n, 4000, 17, &grid).unwrap().mc_estimate)
        .collect();
    assert!(means.windows(2).all(|w| w[1] >= w[0]));
}
