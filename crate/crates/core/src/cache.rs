//! On-disk persistence of solved Bellman grids.
//!
//! A file holds an 8-byte magic, a little-endian `u64` header length, a JSON
//! header, and then little-endian `f64` arrays: values for stages `0..=n`,
//! thresholds for stages `1..=n`, and one byte per clamped flag. File names
//! carry a SHA-256 digest of the header key so a changed distribution, horizon
//! or grid never reuses an old table.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bellman::{solve_values, BellmanSolution, GridSpec, Problem, StateGrid, ThresholdTable, ValueFunctionGrid};
use crate::dist::DistributionModel;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"BRGRID1\n";
pub const CACHE_DIR_ENV: &str = "BR_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub problem: Problem,
    pub n: usize,
    pub grid_spec: GridSpec,
    pub dist_fingerprint: String,
    pub tolerance: f64,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

#[derive(Serialize)]
struct CacheKey<'a> {
    problem: Problem,
    n: usize,
    points: usize,
    x_max: f64,
    tolerance: f64,
    dist: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
}

/// Digest identifying a solve; the first 16 hex digits name the file.
pub fn cache_key(problem: Problem, dist: &DistributionModel, n: usize, spec: &GridSpec) -> Result<String> {
    let spec = spec.resolved(dist)?;
    let fingerprint = dist.fingerprint();
    let key = CacheKey {
        problem,
        n,
        points: spec.points,
        x_max: spec.x_max.expect("resolved"),
        tolerance: spec.tolerance,
        dist: &fingerprint,
    };
    let bytes = serde_json::to_vec(&key)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn cache_path(dir: &Path, problem: Problem, dist: &DistributionModel, n: usize, spec: &GridSpec) -> Result<PathBuf> {
    let key = cache_key(problem, dist, n, spec)?;
    Ok(dir.join(format!("{}-{}.brgrid", problem.name(), &key[..16])))
}

/// Resolves the cache directory from an explicit flag, then the environment.
pub fn resolve_cache_dir(flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

pub fn write_solution(path: &Path, sol: &BellmanSolution) -> Result<()> {
    let values = &sol.values;
    let header = CacheHeader {
        problem: values.problem,
        n: values.horizon,
        grid_spec: values.spec,
        dist_fingerprint: values.dist.fingerprint(),
        tolerance: values.spec.tolerance,
        diagnostics: values.diagnostics.clone(),
    };
    let head = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(
        16 + head.len() + values.grid().points() * (16 * values.horizon + 8 + values.horizon),
    );
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(head.len() as u64).to_le_bytes());
    buf.extend_from_slice(&head);
    for stage in values.stages() {
        stage.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    }
    for stage in &sol.thresholds.alphas {
        stage.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    }
    for stage in &sol.thresholds.clamped {
        buf.extend(stage.iter().map(|&c| c as u8));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("brgrid.tmp");
    fs::File::create(&tmp)?.write_all(&buf)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::Cache {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Loads a grid, checking that its header describes exactly the requested solve.
pub fn read_solution(
    path: &Path,
    problem: Problem,
    dist: &DistributionModel,
    n: usize,
    spec: &GridSpec,
) -> Result<BellmanSolution> {
    let spec = spec.resolved(dist)?;
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt(path, "bad magic"));
    }
    let head_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body_start = 16usize
        .checked_add(head_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt(path, "truncated header"))?;
    let header: CacheHeader = serde_json::from_slice(&bytes[16..body_start])?;
    let expected = CacheHeader {
        problem,
        n,
        grid_spec: spec,
        dist_fingerprint: dist.fingerprint(),
        tolerance: spec.tolerance,
        diagnostics: header.diagnostics.clone(),
    };
    if header != expected {
        return Err(corrupt(path, "header does not match the requested solve"));
    }
    let points = spec.points;
    let floats = (2 * n + 1) * points;
    let want = body_start + floats * 8 + n * points;
    if bytes.len() != want {
        return Err(corrupt(path, format!("expected {want} bytes, found {}", bytes.len())));
    }
    let mut cursor = bytes[body_start..].chunks_exact(8).take(floats).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |count: usize| -> Vec<Vec<f64>> {
        (0..count).map(|_| cursor.by_ref().take(points).collect()).collect()
    };
    let values = take(n + 1);
    let alphas = take(n);
    let flags = &bytes[body_start + floats * 8..];
    let clamped = flags.chunks_exact(points).map(|c| c.iter().map(|&b| b != 0).collect()).collect();
    let grid = StateGrid::new(spec.x_max.expect("resolved"), points);
    Ok(BellmanSolution {
        values: ValueFunctionGrid::from_parts(problem, spec, dist.clone(), values, header.diagnostics),
        thresholds: ThresholdTable { grid, alphas, clamped },
    })
}

/// Solves through the cache when a directory is given. Unreadable or stale
/// files are replaced.
pub fn solve_cached(
    problem: Problem,
    dist: &DistributionModel,
    n: usize,
    spec: &GridSpec,
    dir: Option<&Path>,
) -> Result<(BellmanSolution, CacheStatus)> {
    let Some(dir) = dir else {
        return Ok((solve_values(problem, dist, n, spec)?, CacheStatus::Disabled));
    };
    let path = cache_path(dir, problem, dist, n, spec)?;
    if path.exists() {
        if let Ok(sol) = read_solution(&path, problem, dist, n, spec) {
            return Ok((sol, CacheStatus::Hit));
        }
    }
    let sol = solve_values(problem, dist, n, spec)?;
    write_solution(&path, &sol)?;
    Ok((sol, CacheStatus::Miss))
}
