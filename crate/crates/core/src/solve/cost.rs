//! Fixed linear map from tile-probability maps to node costs.

use super::level::{Tile, NUM_CLASSES};
use super::path::TerrainGrid;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-class node cost. Walls read as impassable-ish mountains, empty
/// cells as free land.
pub const DEFAULT_COST_TABLE: [f64; NUM_CLASSES] = [
    9.0, // wall
    0.0, // empty
    1.0, // key
    2.0, // exit
    3.0, // enemy1
    5.0, // enemy2
    7.0, // enemy3
    1.0, // player
];

pub fn cost_table<T: Scalar>(table: &[f64; NUM_CLASSES]) -> Vec<T> {
    table.iter().map(|v| T::of(*v)).collect()
}

/// `cost(cell) = Σ_k tiles(cell, k) · table(k)`, top-left to bottom-right.
pub fn cost_map<T: Scalar>(
    tiles: &[T],
    height: usize,
    width: usize,
    table: &[f64; NUM_CLASSES],
) -> Result<TerrainGrid<T>> {
    if tiles.len() != height * width * NUM_CLASSES {
        return Err(Error::Dimension(format!(
            "tile map of {height}x{width} needs {} entries, got {}",
            height * width * NUM_CLASSES,
            tiles.len()
        )));
    }
    if tiles.iter().any(|p| !(*p >= T::zero() && *p <= T::one())) {
        return Err(Error::Domain("tile probabilities must lie in [0, 1]".into()));
    }
    let t = cost_table::<T>(table);
    let costs = tiles
        .chunks(NUM_CLASSES)
        .map(|cell| cell.iter().zip(&t).map(|(p, c)| *p * *c).sum())
        .collect();
    TerrainGrid::corner_to_corner(height, width, costs)
}

/// Mean node cost over all cells.
pub fn semantic_penalty<T: Scalar>(tiles: &[T], height: usize, width: usize, table: &[f64; NUM_CLASSES]) -> Result<T> {
    let grid = cost_map(tiles, height, width, table)?;
    let n = T::of(grid.node_costs.len() as f64);
    Ok(grid.node_costs.iter().copied().sum::<T>() / n)
}

/// Cost of one tile class under `table`.
pub fn tile_cost(table: &[f64; NUM_CLASSES], t: Tile) -> f64 {
    table[t.index()]
}
