//! Sample-quality metrics: nearest-neighbour density and coverage, and the
//! fraction of unique samples.
//!
//! Balls are closed and radii are k-th nearest-neighbour distances among the
//! reals with the centre itself excluded. All comparisons are made on
//! squared distances.

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_K: usize = 5;

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (*x - *y).as_f64();
            d * d
        })
        .sum()
}

fn check_points<T: Scalar>(name: &str, pts: &[Vec<T>], dim: Option<usize>) -> Result<usize> {
    let Some(first) = pts.first() else {
        return Err(Error::Parameter(format!("{name} set is empty")));
    };
    let d = dim.unwrap_or(first.len());
    if let Some(i) = pts.iter().position(|p| p.len() != d) {
        return Err(Error::Dimension(format!(
            "{name} point {i} has {} entries, expected {d}",
            pts[i].len()
        )));
    }
    Ok(d)
}

fn check_k(k: usize, n_real: usize) -> Result<()> {
    if k == 0 || k >= n_real {
        return Err(Error::Parameter(format!("k = {k} needs 1 <= k < {n_real} real points")));
    }
    Ok(())
}

/// Squared k-th nearest-neighbour distance from `points[i]` to the others.
fn nnd_k_sq<T: Scalar>(points: &[Vec<T>], i: usize, k: usize) -> f64 {
    let mut d: Vec<f64> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, p)| sq_dist(&points[i], p))
        .collect();
    let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
    *kth
}

/// Distance from `points[i]` to its k-th nearest other point.
pub fn nnd_k<T: Scalar>(points: &[Vec<T>], i: usize, k: usize) -> Result<f64> {
    check_points("point", points, None)?;
    if i >= points.len() {
        return Err(Error::Parameter(format!(
            "index {i} out of range for {} points",
            points.len()
        )));
    }
    check_k(k, points.len())?;
    Ok(nnd_k_sq(points, i, k).sqrt())
}

struct Balls {
    radii_sq: Vec<f64>,
}

impl Balls {
    fn new<T: Scalar>(reals: &[Vec<T>], k: usize) -> Self {
        Self {
            radii_sq: (0..reals.len()).map(|i| nnd_k_sq(reals, i, k)).collect(),
        }
    }
}

fn prepare<T: Scalar>(fakes: &[Vec<T>], reals: &[Vec<T>], k: usize) -> Result<Balls> {
    let d = check_points("real", reals, None)?;
    check_points("fake", fakes, Some(d))?;
    check_k(k, reals.len())?;
    Ok(Balls::new(reals, k))
}

/// `1/(kM) · Σ_j Σ_i 1[Y_j ∈ B(X_i, NND_k(X_i))]` for reals `X` and fakes `Y`.
pub fn density<T: Scalar>(fakes: &[Vec<T>], reals: &[Vec<T>], k: usize) -> Result<f64> {
    let balls = prepare(fakes, reals, k)?;
    let hits: usize = fakes
        .iter()
        .map(|y| {
            reals
                .iter()
                .zip(&balls.radii_sq)
                .filter(|(x, r)| sq_dist(x, y) <= **r)
                .count()
        })
        .sum();
    Ok(hits as f64 / (k * fakes.len()) as f64)
}

/// Fraction of reals whose ball contains at least one fake.
pub fn coverage<T: Scalar>(fakes: &[Vec<T>], reals: &[Vec<T>], k: usize) -> Result<f64> {
    let balls = prepare(fakes, reals, k)?;
    let covered = reals
        .iter()
        .zip(&balls.radii_sq)
        .filter(|(x, r)| fakes.iter().any(|y| sq_dist(x, y) <= **r))
        .count();
    Ok(covered as f64 / reals.len() as f64)
}

/// Distinct samples over total samples.
pub fn uniqueness<S: Eq + Hash>(samples: &[S]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Parameter("no samples".into()));
    }
    let distinct: HashSet<&S> = samples.iter().collect();
    Ok(distinct.len() as f64 / samples.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub density: f64,
    pub coverage: f64,
    pub unique_fraction: f64,
    /// Population loss of the model that produced the samples, if known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_group_loss: Option<f64>,
    pub mean_individual_loss: f64,
    /// Fraction of samples passing the feasibility check, where it applies.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feasible_fraction: Option<f64>,
    pub n_fake: usize,
    pub n_real: usize,
    pub k: usize,
}

impl MetricReport {
    /// Density, coverage and uniqueness of `fakes` against `reals`; `keys`
    /// identify samples for the uniqueness count.
    pub fn compute<T: Scalar, S: Eq + Hash>(fakes: &[Vec<T>], reals: &[Vec<T>], keys: &[S], k: usize) -> Result<Self> {
        if keys.len() != fakes.len() {
            return Err(Error::Dimension("one key per fake sample is required".into()));
        }
        Ok(Self {
            density: density(fakes, reals, k)?,
            coverage: coverage(fakes, reals, k)?,
            unique_fraction: uniqueness(keys)?,
            mean_group_loss: None,
            mean_individual_loss: 0.0,
            feasible_fraction: None,
            n_fake: fakes.len(),
            n_real: reals.len(),
            k,
        })
    }

    /// Plain-text table with one header row and one value row.
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |f| format!("{f:.4}"));
        format!(
            "% Unique\tDensity\tCoverage\tGroup loss\tIndividual loss\tFeasible\tn_fake\tn_real\tk\n\
             {:.4}\t{:.4}\t{:.4}\t{}\t{:.4}\t{}\t{}\t{}\t{}\n",
            self.unique_fraction,
            self.density,
            self.coverage,
            opt(self.mean_group_loss),
            self.mean_individual_loss,
            opt(self.feasible_fraction),
            self.n_fake,
            self.n_real,
            self.k
        )
    }
}
