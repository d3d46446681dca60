//! Continuous non-negative marginal laws and the ways they are coupled.
//!
//! Every model exposes the same primitives: `cdf`, `density`, `quantile` and
//! the truncated first moment `partial_mean(t) = ∫₀ᵗ x dF(x)`, which is the
//! quantity the threshold equation and both Bellman recursions consume.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};

/// Upper tail mass discarded when an unbounded support is capped.
pub const SUPPORT_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    /// Uniform on `[0, b]`.
    #[serde(rename = "uniform")]
    UniformScaled { b: f64 },
    /// Law of the `i`-th smallest of `n` independent uniforms, Beta(i, n-i+1).
    /// `i` is 1-based.
    #[serde(rename = "beta_order")]
    BetaOrderStat { i: usize, n: usize },
    /// Piecewise-linear CDF through `(knots[j], cdf_values[j])`.
    Tabulated { knots: Vec<f64>, cdf_values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionModel {
    kind: DistributionKind,
    support_upper: f64,
}

impl DistributionModel {
    pub fn uniform(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "uniform upper endpoint must be positive and finite, got {b}"
            )));
        }
        Ok(Self {
            kind: DistributionKind::UniformScaled { b },
            support_upper: b,
        })
    }

    pub fn standard_uniform() -> Self {
        Self::uniform(1.0).expect("unit interval is valid")
    }

    pub fn beta_order(i: usize, n: usize) -> Result<Self> {
        if i == 0 || i > n {
            return Err(Error::InvalidDistribution(format!(
                "beta_order needs 1 <= i <= n, got i={i}, n={n}"
            )));
        }
        Ok(Self {
            kind: DistributionKind::BetaOrderStat { i, n },
            support_upper: 1.0,
        })
    }

    /// Builds a piecewise-linear CDF. Knots must be non-negative and strictly
    /// increasing, values nondecreasing from 0 to 1. A repeated knot would be
    /// a jump in the CDF and is rejected.
    pub fn tabulated(knots: Vec<f64>, cdf_values: Vec<f64>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidDistribution(m));
        if knots.len() != cdf_values.len() {
            return bad(format!(
                "{} knots but {} cdf values",
                knots.len(),
                cdf_values.len()
            ));
        }
        if knots.len() < 2 {
            return bad("tabulated cdf needs at least two knots".into());
        }
        if knots.iter().chain(&cdf_values).any(|v| !v.is_finite()) {
            return bad("tabulated cdf contains non-finite entries".into());
        }
        if knots[0] < 0.0 {
            return bad(format!("negative knot {}", knots[0]));
        }
        for w in 0..knots.len() - 1 {
            let (x0, x1) = (knots[w], knots[w + 1]);
            let (f0, f1) = (cdf_values[w], cdf_values[w + 1]);
            if x1 == x0 {
                return if f1 != f0 {
                    bad(format!("jump of {} at x = {x0}", f1 - f0))
                } else {
                    bad(format!("duplicate knot at x = {x0}"))
                };
            }
            if x1 < x0 {
                return bad(format!("knots not ascending at x = {x1}"));
            }
            if f1 < f0 {
                return bad(format!("cdf decreases at x = {x1}"));
            }
        }
        if cdf_values[0] != 0.0 {
            return bad(format!(
                "cdf must start at 0 (continuity at the first knot), got {}",
                cdf_values[0]
            ));
        }
        if cdf_values[cdf_values.len() - 1] != 1.0 {
            return bad(format!(
                "cdf must end at 1, got {}",
                cdf_values[cdf_values.len() - 1]
            ));
        }
        let support_upper = knots[knots.len() - 1];
        Ok(Self {
            kind: DistributionKind::Tabulated { knots, cdf_values },
            support_upper,
        })
    }

    /// Reads a two-column `x,F(x)` CSV file. A header row is optional.
    pub fn tabulated_from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let (mut knots, mut values) = (Vec::new(), Vec::new());
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::InvalidDistribution(format!(
                    "row {} has {} columns, expected 2",
                    row + 1,
                    record.len()
                )));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(x), Ok(f)) => {
                    knots.push(x);
                    values.push(f);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::InvalidDistribution(format!(
                        "row {} is not numeric",
                        row + 1
                    )))
                }
            }
        }
        Self::tabulated(knots, values)
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn support_upper(&self) -> f64 {
        self.support_upper
    }

    /// Finite right end used for grids and root brackets.
    pub fn effective_upper(&self) -> f64 {
        if self.support_upper.is_finite() {
            self.support_upper
        } else {
            self.quantile(1.0 - SUPPORT_TAIL)
        }
    }

    pub fn is_standard_uniform(&self) -> bool {
        matches!(self.kind, DistributionKind::UniformScaled { b } if b == 1.0)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            DistributionKind::UniformScaled { b } => (t / b).min(1.0),
            DistributionKind::BetaOrderStat { i, n } => {
                if t >= 1.0 {
                    1.0
                } else {
                    beta_reg(*i as f64, (n - i + 1) as f64, t)
                }
            }
            DistributionKind::Tabulated { knots, cdf_values } => {
                interpolate(knots, cdf_values, t)
            }
        }
    }

    /// Density, taken right-continuous at the knots of a tabulated law.
    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.support_upper {
            return 0.0;
        }
        match &self.kind {
            DistributionKind::UniformScaled { b } => 1.0 / b,
            DistributionKind::BetaOrderStat { i, n } => {
                let (a, b) = (*i as f64, (n - i + 1) as f64);
                beta_density(a, b, t)
            }
            DistributionKind::Tabulated { knots, cdf_values } => {
                if t < knots[0] {
                    return 0.0;
                }
                let j = segment(knots, t);
                (cdf_values[j + 1] - cdf_values[j]) / (knots[j + 1] - knots[j])
            }
        }
    }

    /// Points where the density may jump or lose smoothness.
    pub fn density_breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            DistributionKind::UniformScaled { b } => vec![*b],
            DistributionKind::BetaOrderStat { .. } => vec![1.0],
            DistributionKind::Tabulated { knots, .. } => knots.clone(),
        }
    }

    /// `∫₀ᵗ x dF(x)`.
    pub fn partial_mean(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            DistributionKind::UniformScaled { b } => {
                let t = t.min(*b);
                0.5 * t * t / b
            }
            DistributionKind::BetaOrderStat { i, n } => {
                // x·Beta(a,b)-density = a/(a+b) · Beta(a+1,b)-density
                let a = *i as f64;
                let b = (n - i + 1) as f64;
                let scale = a / (a + b);
                if t >= 1.0 {
                    scale
                } else {
                    scale * beta_reg(a + 1.0, b, t)
                }
            }
            DistributionKind::Tabulated { knots, cdf_values } => {
                let mut acc = 0.0;
                for j in 0..knots.len() - 1 {
                    let (x0, x1) = (knots[j], knots[j + 1]);
                    if t <= x0 {
                        break;
                    }
                    let slope = (cdf_values[j + 1] - cdf_values[j]) / (x1 - x0);
                    let hi = t.min(x1);
                    acc += 0.5 * slope * (hi * hi - x0 * x0);
                }
                acc
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.partial_mean(self.effective_upper())
    }

    /// Left-continuous inverse of the CDF, `inf { x : F(x) >= p }`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match &self.kind {
            DistributionKind::UniformScaled { b } => p * b,
            DistributionKind::BetaOrderStat { i, n } => {
                if p <= 0.0 {
                    return 0.0;
                }
                if p >= 1.0 {
                    return 1.0;
                }
                beta_quantile(*i as f64, (n - i + 1) as f64, p)
            }
            DistributionKind::Tabulated { knots, cdf_values } => {
                if p <= 0.0 {
                    return knots[0];
                }
                let j = cdf_values.partition_point(|&f| f < p).max(1);
                let (f0, f1) = (cdf_values[j - 1], cdf_values[j]);
                let (x0, x1) = (knots[j - 1], knots[j]);
                x0 + (p - f0) / (f1 - f0) * (x1 - x0)
            }
        }
    }

    /// One draw by inversion.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// Stable identifier for caching: the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        serde_json::to_string(&self.kind).expect("distribution serializes")
    }
}

impl Serialize for DistributionModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.kind.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DistributionModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let kind = DistributionKind::deserialize(d)?;
        DistributionModel::try_from(kind).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<DistributionKind> for DistributionModel {
    type Error = Error;

    fn try_from(kind: DistributionKind) -> Result<Self> {
        match kind {
            DistributionKind::UniformScaled { b } => Self::uniform(b),
            DistributionKind::BetaOrderStat { i, n } => Self::beta_order(i, n),
            DistributionKind::Tabulated { knots, cdf_values } => Self::tabulated(knots, cdf_values),
        }
    }
}

fn segment(knots: &[f64], t: f64) -> usize {
    knots.partition_point(|&k| k <= t).saturating_sub(1).min(knots.len() - 2)
}

fn interpolate(knots: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= knots[0] {
        return values[0];
    }
    if t >= knots[knots.len() - 1] {
        return values[values.len() - 1];
    }
    let j = segment(knots, t);
    let w = (t - knots[j]) / (knots[j + 1] - knots[j]);
    values[j] + w * (values[j + 1] - values[j])
}

fn beta_density(a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return if a == 1.0 { b } else { 0.0 };
    }
    if t >= 1.0 {
        return if b == 1.0 { a } else { 0.0 };
    }
    ((a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p() - ln_beta(a, b)).exp()
}

// Safeguarded Newton on the regularized incomplete beta function.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = (a / (a + b)).clamp(1e-12, 1.0 - 1e-12);
    for _ in 0..200 {
        let fx = beta_reg(a, b, x) - p;
        if fx.abs() <= 1e-15 {
            break;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = beta_density(a, b, x);
        let newton = x - fx / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * x {
            break;
        }
    }
    x
}

/// Joint law of the coordinates, given their marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointCoupling {
    #[default]
    Independent,
    /// Every coordinate is `Fᵢ⁻¹(U)` for one shared uniform `U`.
    Comonotone,
    /// Coordinate `i` is driven by the `i`-th order statistic of `n`
    /// independent uniforms, so the coordinates are increasing in `i`.
    OrderStatistics,
}

/// A list of marginals together with their coupling: the distribution of a
/// full sample `(X₁, …, Xₙ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSet {
    pub marginals: Vec<DistributionModel>,
    #[serde(default)]
    pub coupling: JointCoupling,
}

impl MarginalSet {
    pub fn new(marginals: Vec<DistributionModel>, coupling: JointCoupling) -> Self {
        Self { marginals, coupling }
    }

    pub fn iid(model: DistributionModel, n: usize, coupling: JointCoupling) -> Self {
        Self::new(vec![model; n], coupling)
    }

    /// Uniform on `[0, i]` for `i = 1..=n`.
    pub fn scaled_uniforms(n: usize, coupling: JointCoupling) -> Self {
        let marginals = (1..=n)
            .map(|i| DistributionModel::uniform(i as f64).expect("positive endpoint"))
            .collect();
        Self::new(marginals, coupling)
    }

    /// Beta(i, n-i+1) for `i = 1..=n`.
    pub fn beta_order_family(n: usize, coupling: JointCoupling) -> Self {
        let marginals = (1..=n)
            .map(|i| DistributionModel::beta_order(i, n).expect("valid index"))
            .collect();
        Self::new(marginals, coupling)
    }

    pub fn len(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marginals.is_empty()
    }

    /// Loads `{"marginals": [...], "coupling": "..."}`. A tabulated marginal
    /// may reference a CSV file with `{"kind": "tabulated", "csv": "path"}`,
    /// resolved relative to the JSON file.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json_str(&text, base)
    }

    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let coupling = match raw.get("coupling") {
            Some(c) => serde_json::from_value(c.clone())?,
            None => JointCoupling::Independent,
        };
        let list = raw
            .get("marginals")
            .and_then(|m| m.as_array())
            .ok_or_else(|| Error::usage("marginals", "expected a JSON array"))?;
        let mut marginals = Vec::with_capacity(list.len());
        for entry in list {
            let is_csv = entry.get("kind").and_then(|k| k.as_str()) == Some("tabulated")
                && entry.get("csv").is_some();
            if is_csv {
                let file = entry["csv"]
                    .as_str()
                    .ok_or_else(|| Error::usage("csv", "expected a file path"))?;
                marginals.push(DistributionModel::tabulated_from_csv(base_dir.join(file))?);
            } else {
                marginals.push(serde_json::from_value(entry.clone())?);
            }
        }
        if marginals.is_empty() {
            return Err(Error::usage("marginals", "at least one marginal is required"));
        }
        Ok(Self::new(marginals, coupling))
    }

    /// Draws one joint sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        match self.coupling {
            JointCoupling::Independent => {
                out.extend(self.marginals.iter().map(|m| m.sample_one(rng)));
            }
            JointCoupling::Comonotone => {
                let u: f64 = rng.random();
                out.extend(self.marginals.iter().map(|m| m.quantile(u)));
            }
            JointCoupling::OrderStatistics => {
                let n = self.len();
                out.extend((0..n).map(|_| rng.random::<f64>()));
                out.sort_by(f64::total_cmp);
                for (idx, (x, m)) in out.iter_mut().zip(&self.marginals).enumerate() {
                    let i = idx + 1;
                    *x = match m.kind() {
                        DistributionKind::BetaOrderStat { i: mi, n: mn } if *mi == i && *mn == n => *x,
                        _ => m.quantile(beta_reg(i as f64, (n - i + 1) as f64, *x)),
                    };
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn uniform_cdf_examples() {
        let u = DistributionModel::uniform(1.0).unwrap();
        assert_eq!(u.cdf(0.3), 0.3);
        let u2 = DistributionModel::uniform(2.0).unwrap();
        assert_eq!(u2.cdf(3.0), 1.0);
        assert_eq!(u.partial_mean(0.2), 0.5 * 0.2 * 0.2);
        assert!((u.partial_mean(0.2) - 0.02).abs() < 1e-17);
    }

    #[test]
    fn beta_cdf_matches_closed_form() {
        // Beta(1,2): F(t) = 1 - (1-t)^2
        let d = DistributionModel::beta_order(1, 2).unwrap();
        assert!((d.cdf(0.5) - 0.75).abs() < 1e-14);
        for k in 1..20 {
            let t = k as f64 / 20.0;
            assert!((d.cdf(t) - (1.0 - (1.0 - t).powi(2))).abs() < 1e-13);
        }
    }

    #[test]
    fn partial_mean_at_zero_is_zero() {
        for d in [
            DistributionModel::uniform(3.0).unwrap(),
            DistributionModel::beta_order(2, 5).unwrap(),
            DistributionModel::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 0.25, 1.0]).unwrap(),
        ] {
            assert_eq!(d.partial_mean(0.0), 0.0);
        }
    }

    #[test]
    fn scaled_uniform_family_gives_harmonic_partial_mean() {
        let n = 7;
        let t = 0.6;
        let set = MarginalSet::scaled_uniforms(n, JointCoupling::Independent);
        let total: f64 = set.marginals.iter().map(|m| m.partial_mean(t)).sum();
        let h: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
        assert!((total - 0.5 * t * t * h).abs() < 1e-15);
    }

    #[test]
    fn tabulated_rejects_jumps_and_bad_ends() {
        assert!(DistributionModel::tabulated(vec![0.0, 0.5, 0.5, 1.0], vec![0.0, 0.2, 0.6, 1.0]).is_err());
        assert!(DistributionModel::tabulated(vec![0.0, 1.0], vec![0.1, 1.0]).is_err());
        assert!(DistributionModel::tabulated(vec![0.0, 1.0], vec![0.0, 0.9]).is_err());
        assert!(DistributionModel::tabulated(vec![0.0, 2.0, 1.0], vec![0.0, 0.5, 1.0]).is_err());
        assert!(DistributionModel::tabulated(vec![-1.0, 1.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn tabulated_quantile_inverts_cdf() {
        let d = DistributionModel::tabulated(vec![0.0, 1.0, 3.0], vec![0.0, 0.5, 1.0]).unwrap();
        for x in [0.1, 0.7, 1.0, 2.2, 2.9] {
            assert!((d.quantile(d.cdf(x)) - x).abs() < 1e-12);
        }
        assert_eq!(d.mean(), 0.5 * 0.5 + 0.5 * 2.0);
    }

    #[test]
    fn beta_quantile_inverts_cdf() {
        let d = DistributionModel::beta_order(3, 10).unwrap();
        for x in [0.01, 0.1, 0.3, 0.5, 0.9] {
            assert!((d.quantile(d.cdf(x)) - x).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(DistributionModel::uniform(0.0).is_err());
        assert!(DistributionModel::uniform(f64::INFINITY).is_err());
        assert!(DistributionModel::beta_order(0, 3).is_err());
        assert!(DistributionModel::beta_order(4, 3).is_err());
    }

    #[test]
    fn comonotone_uniform_batch_is_constant() {
        let set = MarginalSet::iid(DistributionModel::standard_uniform(), 8, JointCoupling::Comonotone);
        let xs = set.sample(&mut stream_rng(1, 0));
        assert!(xs.iter().all(|&x| x == xs[0]));
    }

    #[test]
    fn order_statistics_batch_is_increasing() {
        let set = MarginalSet::beta_order_family(50, JointCoupling::OrderStatistics);
        let mut rng = stream_rng(2, 0);
        for _ in 0..20 {
            let xs = set.sample(&mut rng);
            assert!(xs.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let set = MarginalSet::scaled_uniforms(5, JointCoupling::Independent);
        let a = set.sample(&mut stream_rng(9, 3));
        let b = set.sample(&mut stream_rng(9, 3));
        assert_eq!(a, b);
        assert_ne!(a, set.sample(&mut stream_rng(9, 4)));
    }

    #[test]
    fn json_schema_loads() {
        let text = r#"{"marginals":[{"kind":"uniform","b":1.0},{"kind":"beta_order","i":3,"n":10}],"coupling":"comonotone"}"#;
        let set = MarginalSet::from_json_str(text, Path::new(".")).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.coupling, JointCoupling::Comonotone);
        assert_eq!(set.marginals[1], DistributionModel::beta_order(3, 10).unwrap());
        let bad = r#"{"marginals":[{"kind":"uniform","b":-1.0}]}"#;
        assert!(MarginalSet::from_json_str(bad, Path::new(".")).is_err());
    }

    #[test]
    fn csv_tabulated_loads() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("f.csv");
        fs::write(&csv_path, "x,F\n0,0\n0.5,0.75\n1,1\n").unwrap();
        let json_path = dir.path().join("d.json");
        fs::write(&json_path, r#"{"marginals":[{"kind":"tabulated","csv":"f.csv"}]}"#).unwrap();
        let set = MarginalSet::from_json_file(&json_path).unwrap();
        assert_eq!(set.marginals[0].cdf(0.25), 0.375);
        assert_eq!(set.marginals[0].support_upper(), 1.0);
    }
}
