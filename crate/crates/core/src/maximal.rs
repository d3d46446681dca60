//! The maximal function, the threshold equation, and the bound built from it.
//!
//! `M*(s)` is the largest number of sample values whose sum stays within the
//! budget `s`. Sorting by the total order "value, then index" makes the
//! optimal set unique, so the selection is always the prefix of that order.
//!
//! The threshold `t(n,s)` solves `Σᵢ ∫₀ᵗ x dFᵢ(x) = s` and the bound is
//! `Σᵢ Fᵢ(t)`. It holds in expectation whatever the joint law of the sample.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{DistributionModel, MarginalSet};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::roots::nondecreasing_root;
use crate::stats::{histogram_moments, Moments};

/// Largest sample the subset-enumeration oracle accepts.
pub const BRUTE_FORCE_MAX: usize = 20;
/// Relative tolerance on the threshold equation residual.
pub const THRESHOLD_RTOL: f64 = 1e-10;
pub const THRESHOLD_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub count: usize,
    /// Chosen positions (0-based), listed in selection order.
    pub indices: Vec<usize>,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSolution {
    /// `+inf` when saturated.
    pub t: f64,
    pub bound: f64,
    pub residual: f64,
    pub iterations: usize,
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BelowThresholdCount {
    pub count: usize,
    pub total: f64,
}

/// `X_i ≺ X_j` iff `X_i < X_j`, or the values are equal and `i < j`.
pub fn total_order(sample: &[f64], i: usize, j: usize) -> Ordering {
    sample[i].total_cmp(&sample[j]).then(i.cmp(&j))
}

/// Positions of `sample` sorted by the total order.
pub fn order_permutation(sample: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..sample.len()).collect();
    perm.sort_unstable_by(|&i, &j| total_order(sample, i, j));
    perm
}

pub fn maximal_function(sample: &[f64], s: f64) -> SelectionResult {
    let perm = order_permutation(sample);
    let mut total = 0.0;
    let mut indices = Vec::new();
    for i in perm {
        let next = total + sample[i];
        if next > s {
            break;
        }
        total = next;
        indices.push(i);
    }
    SelectionResult {
        count: indices.len(),
        indices,
        total,
    }
}

/// Count-only version of [`maximal_function`] that sorts a scratch copy.
pub fn maximal_count(sample: &[f64], s: f64, scratch: &mut Vec<f64>) -> usize {
    scratch.clear();
    scratch.extend_from_slice(sample);
    scratch.sort_unstable_by(f64::total_cmp);
    let mut total = 0.0;
    let mut count = 0;
    for &x in scratch.iter() {
        total += x;
        if total > s {
            break;
        }
        count += 1;
    }
    count
}

/// Exhaustive `max{|A| : Σ_{i∈A} Xᵢ ≤ s}` over all `2ⁿ` subsets.
pub fn brute_force_maximal(sample: &[f64], s: f64) -> Result<usize> {
    let n = sample.len();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            len: n,
            max: BRUTE_FORCE_MAX,
        });
    }
    let mut best = 0;
    for mask in 0u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let sum: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| sample[i]).sum();
        if sum <= s {
            best = size;
        }
    }
    Ok(best)
}

/// Solves `Σᵢ partial_mean(Fᵢ, t) = s` on `[0, max effective support]`.
pub fn solve_threshold(marginals: &[DistributionModel], s: f64) -> Result<ThresholdSolution> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("budget must be positive and finite, got {s}")));
    }
    if marginals.is_empty() {
        return Err(Error::Domain("no marginals given".into()));
    }
    let upper = marginals
        .iter()
        .map(DistributionModel::effective_upper)
        .fold(0.0, f64::max);
    let g = |t: f64| marginals.iter().map(|m| m.partial_mean(t)).sum::<f64>() - s;
    let g_upper = g(upper);
    if !g_upper.is_finite() {
        return Err(Error::Domain(format!("non-finite partial mean total at t = {upper}")));
    }
    let n = marginals.len() as f64;
    let ftol = THRESHOLD_RTOL * s.max(1.0);
    if g_upper < -ftol {
        return Ok(ThresholdSolution {
            t: f64::INFINITY,
            bound: n,
            residual: g_upper,
            iterations: 0,
            saturated: true,
        });
    }
    let root = nondecreasing_root(g, 0.0, upper, ftol, THRESHOLD_MAX_ITER)?;
    let bound = marginals.iter().map(|m| m.cdf(root.x)).sum();
    Ok(ThresholdSolution {
        t: root.x,
        bound,
        residual: root.residual,
        iterations: root.iterations,
        saturated: false,
    })
}

pub fn br_bound(marginals: &[DistributionModel], s: f64) -> Result<f64> {
    Ok(solve_threshold(marginals, s)?.bound)
}

pub fn count_below_threshold(sample: &[f64], t: f64) -> BelowThresholdCount {
    let (count, total) = sample
        .iter()
        .filter(|&&x| x <= t)
        .fold((0, 0.0), |(c, s), &x| (c + 1, s + x));
    BelowThresholdCount { count, total }
}

/// Slack in the pointwise key inequality `t(|A| − |B|) ≤ S_A − S_B`;
/// non-negative whenever it holds.
pub fn key_inequality_slack(sample: &[f64], s: f64, t: f64) -> f64 {
    let a = maximal_function(sample, s);
    let b = count_below_threshold(sample, t);
    (a.total - b.total) - t * (a.count as f64 - b.count as f64)
}

/// Whether `A(n,s)` and `B(n,s)` are nested one way or the other.
pub fn sets_nested(sample: &[f64], s: f64, t: f64) -> bool {
    let a = maximal_function(sample, s);
    let mut in_a = vec![false; sample.len()];
    for &i in &a.indices {
        in_a[i] = true;
    }
    let in_b: Vec<bool> = sample.iter().map(|&x| x <= t).collect();
    let a_in_b = (0..sample.len()).all(|i| !in_a[i] || in_b[i]);
    let b_in_a = (0..sample.len()).all(|i| !in_b[i] || in_a[i]);
    a_in_b || b_in_a
}

/// Pointwise tolerance for the key inequality, absorbing summation error.
pub const KEY_INEQUALITY_TOL: f64 = 1e-9;

/// Monte Carlo estimates of `E[M*(s)]` and `E[|B(n,s)|]` over replicated
/// joint samples, with optional pointwise checks of the proof invariants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProphetRun {
    pub reps: usize,
    /// `maximal_histogram[c]`: replications with `M*(s) = c`.
    pub maximal_histogram: Vec<u64>,
    /// `below_histogram[c]`: replications with `|B(n,s)| = c`.
    pub below_histogram: Vec<u64>,
    pub key_inequality_violations: u64,
    pub nesting_violations: u64,
    pub invariants_checked: bool,
}

impl ProphetRun {
    pub fn maximal(&self) -> Moments {
        histogram_moments(&self.maximal_histogram)
    }

    pub fn below(&self) -> Moments {
        histogram_moments(&self.below_histogram)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProphetPlan {
    pub s: f64,
    /// Threshold for the `B(n,s)` counts; `None` counts nothing.
    pub t: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    pub stream_offset: u64,
    pub check_invariants: bool,
}

pub fn prophet_monte_carlo(set: &MarginalSet, plan: &ProphetPlan) -> ProphetRun {
    let n = set.len();
    let empty = || (vec![0u64; n + 1], vec![0u64; n + 1], 0u64, 0u64);
    let (maximal_histogram, below_histogram, key, nest) = (0..plan.reps)
        .into_par_iter()
        .fold(empty, |mut acc, r| {
            let mut rng = stream_rng(plan.seed, plan.stream_offset + r as u64);
            let xs = set.sample(&mut rng);
            let count = if plan.check_invariants {
                let sel = maximal_function(&xs, plan.s);
                if let Some(t) = plan.t.filter(|t| t.is_finite()) {
                    let b = count_below_threshold(&xs, t);
                    let slack = (sel.total - b.total) - t * (sel.count as f64 - b.count as f64);
                    if slack < -KEY_INEQUALITY_TOL {
                        acc.2 += 1;
                    }
                    if !sets_nested(&xs, plan.s, t) {
                        acc.3 += 1;
                    }
                }
                sel.count
            } else {
                let mut scratch = Vec::with_capacity(n);
                maximal_count(&xs, plan.s, &mut scratch)
            };
            acc.0[count] += 1;
            if let Some(t) = plan.t {
                acc.1[xs.iter().filter(|&&x| x <= t).count()] += 1;
            }
            acc
        })
        .reduce(empty, |mut a, b| {
            a.0.iter_mut().zip(&b.0).for_each(|(x, y)| *x += y);
            a.1.iter_mut().zip(&b.1).for_each(|(x, y)| *x += y);
            (a.0, a.1, a.2 + b.2, a.3 + b.3)
        });
    ProphetRun {
        reps: plan.reps,
        maximal_histogram,
        below_histogram,
        key_inequality_violations: key,
        nesting_violations: nest,
        invariants_checked: plan.check_invariants,
    }
}
