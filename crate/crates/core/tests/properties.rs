use prophet_select::dist::{DistributionModel, JointCoupling, MarginalSet};
use prophet_select::maximal::{brute_force_maximal, maximal_function, solve_threshold};
use prophet_select::rng::stream_rng;
use prophet_select::stats::{ks_band_99, ks_statistic};
use proptest::prelude::*;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (l, r) = (simpson(f, a, m), simpson(f, m, b));
    if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
        return l + r + (l + r - whole) / 15.0;
    }
    adaptive(f, a, m, l, tol / 2.0, depth - 1) + adaptive(f, m, b, r, tol / 2.0, depth - 1)
}

/// Adaptive Simpson over `[a, b]`, restarted at every breakpoint inside it.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
    pts.push(b);
    pts.windows(2)
        .map(|w| adaptive(f, w[0], w[1], simpson(f, w[0], w[1]), 1e-13, 40))
        .sum()
}

fn model() -> impl Strategy<Value = DistributionModel> {
    let uniform = (0.1f64..10.0).prop_map(|b| DistributionModel::uniform(b).unwrap());
    let beta = (1usize..40)
        .prop_flat_map(|n| (1..=n, Just(n)))
        .prop_map(|(i, n)| DistributionModel::beta_order(i, n).unwrap());
    let tabulated = prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 1..8).prop_map(|steps| {
        let (mut x, mut f) = (0.0, 0.0);
        let total: f64 = steps.iter().map(|s| s.1).sum();
        let mut knots = vec![0.0];
        let mut cdf = vec![0.0];
        for (dx, df) in steps {
            x += dx;
            f += df / total;
            knots.push(x);
            cdf.push(f);
        }
        *cdf.last_mut().unwrap() = 1.0;
        DistributionModel::tabulated(knots, cdf).unwrap()
    });
    prop_oneof![uniform, beta, tabulated]
}

fn breakpoints(m: &DistributionModel) -> Vec<f64> {
    match m.kind() {
        prophet_select::dist::DistributionKind::Tabulated { knots, .. } => knots.clone(),
        _ => Vec::new(),
    }
}

/// Values on a coarse lattice so that ties are common.
fn sample_with_ties() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![(0u32..8).prop_map(|k| k as f64 / 8.0), 0.0f64..1.0], 0..=12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn greedy_prefix_matches_enumeration(xs in sample_with_ties(), s in 0.0f64..3.0) {
        prop_assert_eq!(maximal_function(&xs, s).count, brute_force_maximal(&xs, s).unwrap());
    }

    #[test]
    fn maximal_count_monotone_in_budget_and_size(xs in sample_with_ties(), s in 0.0f64..3.0, ds in 0.0f64..1.0) {
        let base = maximal_function(&xs, s).count;
        prop_assert!(maximal_function(&xs, s + ds).count >= base);
        for m in 0..xs.len() {
            prop_assert!(maximal_function(&xs[..m], s).count <= base);
        }
    }

    #[test]
    fn cdf_and_partial_mean_nondecreasing(m in model()) {
        let top = m.effective_upper();
        let (mut f_prev, mut p_prev) = (0.0, 0.0);
        for i in 0..1000 {
            let t = top * i as f64 / 999.0;
            let (f, p) = (m.cdf(t), m.partial_mean(t));
            prop_assert!(f >= f_prev && p >= p_prev - 1e-15);
            f_prev = f;
            p_prev = p;
        }
        prop_assert!((m.cdf(top) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_mean_matches_quadrature(m in model(), frac in prop::collection::vec(0.0f64..=1.0, 5)) {
        let top = m.effective_upper();
        let breaks = breakpoints(&m);
        let f = |x: f64| x * m.density(x);
        for u in frac {
            let t = u * top;
            let q = integrate(&f, 0.0, t, &breaks);
            prop_assert!((m.partial_mean(t) - q).abs() <= 1e-8, "t={} pm={} quad={}", t, m.partial_mean(t), q);
        }
    }

    #[test]
    fn threshold_solves_its_equation(ms in prop::collection::vec(model(), 1..6), s in 0.01f64..3.0) {
        let sol = solve_threshold(&ms, s).unwrap();
        if sol.saturated {
            let total: f64 = ms.iter().map(|m| m.mean()).sum();
            prop_assert!(total <= s * (1.0 + 1e-10));
            prop_assert_eq!(sol.bound, ms.len() as f64);
        } else {
            let g: f64 = ms.iter().map(|m| m.partial_mean(sol.t)).sum();
            prop_assert!((g - s).abs() <= 1e-10 * s.max(1.0));
        }
    }

    #[test]
    fn uniform_reflection_leaves_integral_unchanged(
        w in prop::collection::vec(0.0f64..5.0, 2..12),
        c in 0.0f64..6.0,
        xf in 0.05f64..=1.0,
    ) {
        // a piecewise-linear w on [0, 1] through the sampled node values
        let cells = w.len() - 1;
        let knots: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
        let eval = |y: f64| {
            let pos = (y * cells as f64).clamp(0.0, cells as f64);
            let j = (pos.floor() as usize).min(cells - 1);
            let r = pos - j as f64;
            w[j] * (1.0 - r) + w[j + 1] * r
        };
        let x = xf;
        let direct = |y: f64| c.max(1.0 + eval(y));
        let reflected = |y: f64| c.max(1.0 + eval(x - y));
        let mut direct_breaks = knots.clone();
        let mut reflected_breaks: Vec<f64> = knots.iter().map(|k| x - k).collect();
        // kinks of max{c, .} where 1 + w crosses c
        for j in 0..cells {
            let (a, b) = (1.0 + w[j], 1.0 + w[j + 1]);
            if (a - c) * (b - c) < 0.0 {
                let y = knots[j] + (c - a) / (b - a) * (knots[j + 1] - knots[j]);
                direct_breaks.push(y);
                reflected_breaks.push(x - y);
            }
        }
        direct_breaks.sort_by(f64::total_cmp);
        reflected_breaks.sort_by(f64::total_cmp);
        let lhs = integrate(&reflected, 0.0, x, &reflected_breaks);
        let rhs = integrate(&direct, 0.0, x, &direct_breaks);
        prop_assert!((lhs - rhs).abs() <= 1e-10, "lhs={} rhs={}", lhs, rhs);
    }
}

fn ks_marginal(set: &MarginalSet, coord: usize, seed: u64) -> f64 {
    let reps = 100_000;
    let mut rng = stream_rng(seed, 0);
    let mut col: Vec<f64> = (0..reps).map(|_| set.sample(&mut rng)[coord]).collect();
    let m = &set.marginals[coord];
    ks_statistic(&mut col, |x| m.cdf(x))
}

fn mixed(coupling: JointCoupling) -> MarginalSet {
    MarginalSet::new(
        vec![
            DistributionModel::uniform(2.0).unwrap(),
            DistributionModel::beta_order(2, 5).unwrap(),
            DistributionModel::tabulated(vec![0.0, 0.5, 3.0], vec![0.0, 0.7, 1.0]).unwrap(),
        ],
        coupling,
    )
}

#[test]
fn every_kind_samples_its_law() {
    let band = ks_band_99(100_000);
    let set = mixed(JointCoupling::Independent);
    for coord in 0..3 {
        let d = ks_marginal(&set, coord, 40 + coord as u64);
        assert!(d <= band, "kind {coord}: KS {d} > {band}");
    }
}

#[test]
fn every_coupling_preserves_the_marginals() {
    let band = ks_band_99(100_000);
    for (idx, coupling) in [JointCoupling::Independent, JointCoupling::Comonotone, JointCoupling::OrderStatistics]
        .into_iter()
        .enumerate()
    {
        let d = ks_marginal(&mixed(coupling), idx, 50 + idx as u64);
        assert!(d <= band, "{coupling:?}: KS {d} > {band}");
    }
    let order = MarginalSet::beta_order_family(7, JointCoupling::OrderStatistics);
    let d = ks_marginal(&order, 3, 60);
    assert!(d <= band, "order statistics family: KS {d} > {band}");
}
