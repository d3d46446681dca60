//! Backward induction for the sequential knapsack and sequential monotone
//! (decreasing) subsequence selection problems.
//!
//! Both recursions start from `v₀ ≡ 0` and, for `k` observations remaining
//! in state `x`, take
//!
//! ```text
//! knapsack  v_k(x) = (1 − F(x)) v_{k−1}(x) + ∫₀ˣ max{v_{k−1}(x), 1 + v_{k−1}(x − y)} dF(y)
//! monotone  ṽ_k(x) = (1 − F(x)) ṽ_{k−1}(x) + ∫₀ˣ max{ṽ_{k−1}(x), 1 + ṽ_{k−1}(y)} dF(y)
//! ```
//!
//! Values live on a uniform grid over `[0, x_max]` and are interpolated
//! piecewise linearly. The `max{}` kink sits at the root of the indifference
//! equation, so every stage integral is split there first.
//!
//! The two problems are integrated by different routes. The monotone stage
//! integrates the interpolant exactly against `dF` (cell moments from `cdf`
//! and `partial_mean`, accumulated as prefix sums). The knapsack stage uses
//! composite Simpson on the nodal values against the density, with the
//! partial cell at the kink integrated exactly. Agreement of the two on the
//! uniform law is therefore a real numerical check, not an identity of code.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::DistributionModel;
use crate::error::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const DEFAULT_GRID_TOLERANCE: f64 = 1e-4;
/// Allowed decrease between neighbouring stage values before a stage is
/// flagged as non-monotone.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Knapsack,
    Monotone,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Knapsack => "knapsack",
            Problem::Monotone => "monotone",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
    /// Right end of the state grid; defaults to the effective support bound.
    pub x_max: Option<f64>,
    /// Interpolation error above which a coarse-grid warning is attached.
    pub tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
            x_max: None,
            tolerance: DEFAULT_GRID_TOLERANCE,
        }
    }
}

impl GridSpec {
    pub fn with_points(points: usize) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }

    /// Same spec with the upper end made explicit.
    pub fn resolved(&self, dist: &DistributionModel) -> Result<Self> {
        if self.points < 2 {
            return Err(Error::Precondition(format!(
                "grid needs at least 2 points, got {}",
                self.points
            )));
        }
        let x_max = self.x_max.unwrap_or_else(|| dist.effective_upper());
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::Precondition(format!(
                "grid upper end must be positive and finite, got {x_max}"
            )));
        }
        Ok(Self {
            x_max: Some(x_max),
            ..*self
        })
    }
}

/// Uniform nodes `gᵢ = x_max · i / (points − 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateGrid {
    x_max: f64,
    cells: usize,
}

impl StateGrid {
    pub fn new(x_max: f64, points: usize) -> Self {
        Self {
            x_max,
            cells: points - 1,
        }
    }

    pub fn points(&self) -> usize {
        self.cells + 1
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn spacing(&self) -> f64 {
        self.x_max / self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.cells {
            self.x_max
        } else {
            self.x_max * i as f64 / self.cells as f64
        }
    }

    /// Cell index `j` and weight `w` with `x = (1−w)·g_j + w·g_{j+1}`,
    /// clamped to the grid.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        if x <= 0.0 {
            return (0, 0.0);
        }
        if x >= self.x_max {
            return (self.cells - 1, 1.0);
        }
        let pos = x / self.spacing();
        let j = (pos.floor() as usize).min(self.cells - 1);
        (j, (pos - j as f64).clamp(0.0, 1.0))
    }

    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let (j, w) = self.locate(x);
        values[j] + w * (values[j + 1] - values[j])
    }
}

/// Per-stage tabulation of `v_k` (or `ṽ_k`) for `k = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunctionGrid {
    pub problem: Problem,
    pub horizon: usize,
    pub spec: GridSpec,
    pub dist: DistributionModel,
    grid: StateGrid,
    values: Vec<Vec<f64>>,
    pub diagnostics: Vec<String>,
}

impl ValueFunctionGrid {
    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn stage(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Interpolated `v_k(x)`.
    pub fn value(&self, k: usize, x: f64) -> f64 {
        self.grid.interpolate(&self.values[k], x)
    }

    pub fn stages(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub(crate) fn from_parts(
        problem: Problem,
        spec: GridSpec,
        dist: DistributionModel,
        values: Vec<Vec<f64>>,
        diagnostics: Vec<String>,
    ) -> Self {
        let x_max = spec.x_max.expect("resolved spec");
        let grid = StateGrid::new(x_max, spec.points);
        Self {
            problem,
            horizon: values.len() - 1,
            spec,
            dist,
            grid,
            values,
            diagnostics,
        }
    }
}

/// Indifference thresholds `α_k` on the grid for `k = 1..=horizon`.
///
/// For the knapsack, `α_k(x)` caps the accepted observation. For the
/// monotone problem it is the width of the acceptance window `[x − α, x]`
/// below the last selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    pub(crate) grid: StateGrid,
    pub(crate) alphas: Vec<Vec<f64>>,
    pub(crate) clamped: Vec<Vec<bool>>,
}

impl ThresholdTable {
    pub fn horizon(&self) -> usize {
        self.alphas.len()
    }

    /// Nodal thresholds for stage `k ≥ 1`.
    pub fn stage(&self, k: usize) -> &[f64] {
        &self.alphas[k - 1]
    }

    pub fn clamped(&self, k: usize) -> &[bool] {
        &self.clamped[k - 1]
    }

    /// `α_k(x)` by linear interpolation, never above `x`.
    pub fn alpha(&self, k: usize, x: f64) -> f64 {
        self.grid.interpolate(&self.alphas[k - 1], x).clamp(0.0, x.max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellmanSolution {
    pub values: ValueFunctionGrid,
    pub thresholds: ThresholdTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Indifference {
    pub alpha: f64,
    /// No interior root: every feasible observation is accepted.
    pub clamped: bool,
}

/// Smallest `y ∈ [0, x]` with `1 + w(y) ≥ w(x)` on the interpolant of the
/// nodal values `w`. Returns `(y, clamped)`; `clamped` marks the case
/// `w(x) − 1 < w(0)`.
fn indifference_root(grid: &StateGrid, w: &[f64], x: f64, wx: f64) -> (f64, bool) {
    let target = wx - 1.0;
    if target < w[0] {
        return (0.0, true);
    }
    let (cell, _) = grid.locate(x);
    let upto = (cell + 1).min(w.len() - 1);
    let j = w[..=upto].partition_point(|&v| v < target);
    if j == 0 {
        return (0.0, false);
    }
    if j > upto {
        // only reachable when the stage is not monotone
        return (x, false);
    }
    let (w0, w1) = (w[j - 1], w[j]);
    let frac = if w1 > w0 { (target - w0) / (w1 - w0) } else { 0.0 };
    let y = grid.node(j - 1) + frac * grid.spacing();
    (y.min(x), false)
}

/// Root of the indifference equation for stage `k ≥ 1` at state `x`.
///
/// Monotone: `ṽ_{k−1}(x) = 1 + ṽ_{k−1}(y)`, reported as the window width
/// `x − y`. Knapsack: `v_{k−1}(x) = 1 + v_{k−1}(x − a)`, reported as `a`.
/// Both reduce to the same root `y` of the stage-`k−1` interpolant.
pub fn indifference_threshold(values: &ValueFunctionGrid, k: usize, x: f64) -> Indifference {
    assert!(k >= 1 && k <= values.horizon, "stage {k} outside 1..={}", values.horizon);
    let x = x.clamp(0.0, values.grid.x_max());
    let w = values.stage(k - 1);
    let wx = values.grid.interpolate(w, x);
    let (y, clamped) = indifference_root(&values.grid, w, x, wx);
    Indifference {
        alpha: if clamped { x } else { x - y },
        clamped,
    }
}

struct NodeTables {
    cdf: Vec<f64>,
    partial_mean: Vec<f64>,
    density: Vec<f64>,
    /// Cells whose closure holds a density breakpoint.
    rough: Vec<bool>,
}

impl NodeTables {
    fn new(dist: &DistributionModel, grid: &StateGrid) -> Self {
        let nodes: Vec<f64> = (0..grid.points()).map(|i| grid.node(i)).collect();
        Self {
            cdf: nodes.iter().map(|&x| dist.cdf(x)).collect(),
            partial_mean: nodes.iter().map(|&x| dist.partial_mean(x)).collect(),
            density: nodes.iter().map(|&x| dist.density(x)).collect(),
            rough: rough_cells(dist, grid),
        }
    }
}

fn rough_cells(dist: &DistributionModel, grid: &StateGrid) -> Vec<bool> {
    let cells = grid.points() - 1;
    let mut rough = vec![false; cells];
    let h = grid.spacing();
    for b in dist.density_breakpoints() {
        if !(0.0..=grid.x_max()).contains(&b) {
            continue;
        }
        let pos = b / h;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        // a breakpoint on a node spoils both neighbouring cells
        for j in [lo.saturating_sub(1), lo, hi] {
            if j < cells && grid.node(j) <= b + 1e-12 * h && b <= grid.node(j + 1) + 1e-12 * h {
                rough[j] = true;
            }
        }
    }
    rough
}

/// `∫_{g_j}^{y} ℓ dF` for the line `ℓ(z) = left + slope·(z − g_j)`.
#[allow(clippy::too_many_arguments)]
fn line_moment(left: f64, slope: f64, gj: f64, f_j: f64, pm_j: f64, f_y: f64, pm_y: f64) -> f64 {
    let mass = f_y - f_j;
    left * mass + slope * ((pm_y - pm_j) - gj * mass)
}

/// Composite Simpson over `phi.len() − 1` panels of width `h`, closing an
/// odd panel count with the 3/8 rule.
fn composite_simpson(phi: &[f64], h: f64) -> f64 {
    let m = phi.len().saturating_sub(1);
    match m {
        0 => 0.0,
        1 => 0.5 * h * (phi[0] + phi[1]),
        2 => h / 3.0 * (phi[0] + 4.0 * phi[1] + phi[2]),
        3 => 3.0 * h / 8.0 * (phi[0] + 3.0 * phi[1] + 3.0 * phi[2] + phi[3]),
        _ => {
            let even = if m.is_multiple_of(2) { m } else { m - 3 };
            let mut acc = phi[0] + phi[even];
            for (j, &v) in phi.iter().enumerate().take(even).skip(1) {
                acc += if j % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = h / 3.0 * acc;
            if even < m {
                let p = &phi[even..];
                total += 3.0 * h / 8.0 * (p[0] + 3.0 * p[1] + 3.0 * p[2] + p[3]);
            }
            total
        }
    }
}

fn monotone_stage(
    dist: &DistributionModel,
    grid: &StateGrid,
    tables: &NodeTables,
    w: &[f64],
) -> Vec<(f64, f64, bool)> {
    let h = grid.spacing();
    let cells = grid.points() - 1;
    // prefix[i] = ∫₀^{gᵢ} w dF
    let mut prefix = vec![0.0; grid.points()];
    for j in 0..cells {
        let slope = (w[j + 1] - w[j]) / h;
        let cell = line_moment(
            w[j],
            slope,
            grid.node(j),
            tables.cdf[j],
            tables.partial_mean[j],
            tables.cdf[j + 1],
            tables.partial_mean[j + 1],
        );
        prefix[j + 1] = prefix[j] + cell;
    }
    (0..grid.points())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let wx = w[i];
            let f_x = tables.cdf[i];
            let (y, clamped) = indifference_root(grid, w, x, wx);
            let (f_y, tail) = if y <= 0.0 {
                (0.0, prefix[i])
            } else if y >= x {
                (f_x, 0.0)
            } else {
                let f_y = dist.cdf(y);
                let pm_y = dist.partial_mean(y);
                let j = ((y / h).floor() as usize).min(i.saturating_sub(1));
                let slope = (w[j + 1] - w[j]) / h;
                let head = line_moment(w[j], slope, grid.node(j), tables.cdf[j], tables.partial_mean[j], f_y, pm_y);
                (f_y, prefix[i] - prefix[j] - head)
            };
            let value = wx * (1.0 - f_x + f_y) + (f_x - f_y) + tail;
            let alpha = if clamped { x } else { x - y };
            (value, alpha, clamped)
        })
        .collect()
}

fn knapsack_stage(
    dist: &DistributionModel,
    grid: &StateGrid,
    tables: &NodeTables,
    w: &[f64],
) -> Vec<(f64, f64, bool)> {
    let h = grid.spacing();
    (0..grid.points())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let wx = w[i];
            let f_x = tables.cdf[i];
            let (y, clamped) = indifference_root(grid, w, x, wx);
            let cap = if clamped { x } else { (x - y).max(0.0) };
            let f_cap = if clamped { f_x } else { dist.cdf(cap) };

            // ∫₀^cap w(x − y) dF(y): Simpson on whole cells, exact on the rest.
            // Simpson runs between rough cells, which are integrated exactly.
            let full = ((cap / h).floor() as usize).min(i);
            let cell_exact = |j: usize| {
                let slope = -(w[i - j] - w[i - j - 1]) / h;
                let (a, b) = (j, j + 1);
                line_moment(w[i - j], slope, grid.node(a), tables.cdf[a], tables.partial_mean[a], tables.cdf[b], tables.partial_mean[b])
            };
            let mut conv = 0.0;
            let mut run_start = 0;
            for j in 0..=full {
                let at_end = j == full;
                if at_end || tables.rough[j] {
                    if j > run_start {
                        let phi: Vec<f64> = (run_start..=j).map(|m| w[i - m] * tables.density[m]).collect();
                        conv += composite_simpson(&phi, h);
                    }
                    if !at_end {
                        conv += cell_exact(j);
                    }
                    run_start = j + 1;
                }
            }
            let g_full = grid.node(full);
            if full < i && cap > g_full {
                let left = w[i - full];
                let slope = -(w[i - full] - w[i - full - 1]) / h;
                conv += line_moment(
                    left,
                    slope,
                    g_full,
                    tables.cdf[full],
                    tables.partial_mean[full],
                    f_cap,
                    dist.partial_mean(cap),
                );
            }
            let value = (1.0 - f_x) * wx + f_cap + conv + wx * (f_x - f_cap);
            (value, cap, clamped)
        })
        .collect()
}

/// Runs backward induction for `n` stages.
pub fn solve_values(
    problem: Problem,
    dist: &DistributionModel,
    n: usize,
    spec: &GridSpec,
) -> Result<BellmanSolution> {
    let spec = spec.resolved(dist)?;
    let grid = StateGrid::new(spec.x_max.expect("resolved"), spec.points);
    let tables = NodeTables::new(dist, &grid);
    let mut values = Vec::with_capacity(n + 1);
    values.push(vec![0.0; grid.points()]);
    let mut alphas = Vec::with_capacity(n);
    let mut clamped = Vec::with_capacity(n);
    let mut diagnostics = Vec::new();

    for k in 1..=n {
        let w = &values[k - 1];
        if let Some(j) = w.windows(2).position(|p| p[1] < p[0] - MONOTONE_SLACK) {
            diagnostics.push(format!(
                "stage {} not monotone near x = {}; indifference root may not be unique",
                k - 1,
                grid.node(j)
            ));
        }
        let stage = match problem {
            Problem::Monotone => monotone_stage(dist, &grid, &tables, w),
            Problem::Knapsack => knapsack_stage(dist, &grid, &tables, w),
        };
        let mut v = Vec::with_capacity(stage.len());
        let mut a = Vec::with_capacity(stage.len());
        let mut c = Vec::with_capacity(stage.len());
        for (value, alpha, cl) in stage {
            v.push(value);
            a.push(alpha);
            c.push(cl);
        }
        values.push(v);
        alphas.push(a);
        clamped.push(c);
    }

    if let Some(last) = values.last() {
        let curvature = last
            .windows(3)
            .map(|p| (p[2] - 2.0 * p[1] + p[0]).abs() / 8.0)
            .fold(0.0, f64::max);
        if curvature > spec.tolerance {
            diagnostics.push(format!(
                "grid may be too coarse: estimated interpolation error {curvature:.3e} exceeds tolerance {:.3e}",
                spec.tolerance
            ));
        }
    }

    Ok(BellmanSolution {
        values: ValueFunctionGrid::from_parts(problem, spec, dist.clone(), values, diagnostics),
        thresholds: ThresholdTable {
            grid,
            alphas,
            clamped,
        },
    })
}

pub fn solve_knapsack_values(dist: &DistributionModel, n: usize, spec: &GridSpec) -> Result<BellmanSolution> {
    solve_values(Problem::Knapsack, dist, n, spec)
}

pub fn solve_monotone_values(dist: &DistributionModel, n: usize, spec: &GridSpec) -> Result<BellmanSolution> {
    solve_values(Problem::Monotone, dist, n, spec)
}

/// `max_{k, x} |v_k(x) − ṽ_k(x)|` for the uniform law on `[0, 1]`.
pub fn value_equality_check(n: usize, spec: &GridSpec) -> Result<f64> {
    let dist = DistributionModel::standard_uniform();
    let knap = solve_knapsack_values(&dist, n, spec)?;
    let mono = solve_monotone_values(&dist, n, spec)?;
    Ok(max_stage_gap(&knap.values, &mono.values))
}

pub fn max_stage_gap(a: &ValueFunctionGrid, b: &ValueFunctionGrid) -> f64 {
    a.stages()
        .iter()
        .zip(b.stages())
        .flat_map(|(sa, sb)| sa.iter().zip(sb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}
