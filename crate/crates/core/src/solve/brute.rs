//! Exhaustive projection for tiny grids; the reference for the
//! branch-and-bound solver.

use super::level::{Level, LevelSpec, Tile, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest grid (in cells) accepted by [`brute_force_project`].
pub const BRUTE_FORCE_MAX_CELLS: usize = 9;

/// Enumerates every assignment within the count bounds in lexicographic
/// order and keeps the first one attaining the maximum objective.
pub fn brute_force_project<T: Scalar>(scores: &[T], spec: &LevelSpec) -> Result<Level> {
    if spec.cells() > BRUTE_FORCE_MAX_CELLS {
        return Err(Error::Bound(format!(
            "{} cells exceeds the enumeration bound of {BRUTE_FORCE_MAX_CELLS}",
            spec.cells()
        )));
    }
    spec.validate()?;
    if scores.len() != spec.dim() {
        return Err(Error::Dimension(format!(
            "score field has {} entries, spec needs {}",
            scores.len(),
            spec.dim()
        )));
    }
    let mut tiles = vec![Tile::Wall; spec.cells()];
    let mut counts = [0usize; NUM_CLASSES];
    let mut best: Option<(T, Level)> = None;
    let deficit = spec.bounds.iter().map(|b| b.min).sum();
    enumerate(spec, scores, 0, T::zero(), deficit, &mut tiles, &mut counts, &mut best)?;
    best.map(|(_, l)| l)
        .ok_or_else(|| Error::Infeasible("no feasible level exists".into()))
}

#[allow(clippy::too_many_arguments)]
fn enumerate<T: Scalar>(
    spec: &LevelSpec,
    scores: &[T],
    depth: usize,
    acc: T,
    deficit: usize,
    tiles: &mut Vec<Tile>,
    counts: &mut [usize; NUM_CLASSES],
    best: &mut Option<(T, Level)>,
) -> Result<()> {
    let n = spec.cells();
    if depth == n {
        let v = acc;
        // Playability is only worth checking on a strict improvement.
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            let level = Level::new(spec.height, spec.width, tiles.clone())?;
            if level.satisfies(spec) {
                *best = Some((v, level));
            }
        }
        return Ok(());
    }
    let rem_after = n - depth - 1;
    for t in Tile::ALL {
        let k = t.index();
        if counts[k] >= spec.bounds[k].max {
            continue;
        }
        // Tiles still owed to lower bounds once this one is placed.
        let needed = deficit - usize::from(counts[k] < spec.bounds[k].min);
        counts[k] += 1;
        if needed <= rem_after {
            tiles[depth] = t;
            let acc = acc + scores[depth * NUM_CLASSES + k];
            enumerate(spec, scores, depth + 1, acc, needed, tiles, counts, best)?;
        }
        counts[k] -= 1;
    }
    Ok(())
}
