//! Exact combinatorial machinery: feasible levels, projection, shortest
//! paths, and the tile-to-cost map.

mod brute;
mod cost;
mod level;
mod path;
mod project;

pub use brute::{brute_force_project, BRUTE_FORCE_MAX_CELLS};
pub use cost::{cost_map, cost_table, semantic_penalty, tile_cost, DEFAULT_COST_TABLE};
pub use level::{check_feasible, CountBounds, Level, LevelSpec, Tile, NUM_CLASSES};
pub use path::{shortest_path, PathSolution, TerrainGrid};
pub use project::{project_level, project_level_with, SolveStats, SolverOptions, DEFAULT_NODE_BUDGET};
