//! Seeded synthetic corpora: playable levels and blob-structured terrain.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::solve::{Level, LevelSpec, Tile, NUM_CLASSES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelStyle {
    /// Wall probability on border cells.
    pub edge_wall_prob: f64,
    /// Wall probability on interior cells.
    pub inner_wall_prob: f64,
    /// Chance that each enemy class appears once.
    pub enemy_prob: f64,
    /// Draws per requested level before giving up.
    pub attempts_per_level: usize,
}

impl Default for LevelStyle {
    fn default() -> Self {
        Self {
            edge_wall_prob: 0.45,
            inner_wall_prob: 0.1,
            enemy_prob: 0.4,
            attempts_per_level: 200,
        }
    }
}

/// Straight-line-then-turn corridor from `a` to `b`, clearing walls.
fn carve(level: &mut Level, a: usize, b: usize, rows_first: bool) {
    let w = level.width();
    let (mut r, mut c) = (a / w, a % w);
    let (tr, tc) = (b / w, b % w);
    let clear = |r: usize, c: usize, l: &mut Level| {
        if l.get(r, c) == Tile::Wall {
            l.set(r, c, Tile::Empty);
        }
    };
    for phase in 0..2 {
        if (phase == 0) == rows_first {
            while r != tr {
                r = if r < tr { r + 1 } else { r - 1 };
                clear(r, c, level);
            }
        } else {
            while c != tc {
                c = if c < tc { c + 1 } else { c - 1 };
                clear(r, c, level);
            }
        }
    }
}

fn draw_level(spec: &LevelSpec, style: &LevelStyle, rng: &mut RngStream) -> Level {
    let (h, w) = (spec.height, spec.width);
    let mut level = Level::filled(h, w, Tile::Empty);
    for r in 0..h {
        for c in 0..w {
            let edge = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
            let p = if edge {
                style.edge_wall_prob
            } else {
                style.inner_wall_prob
            };
            if rng.uniform() < p {
                level.set(r, c, Tile::Wall);
            }
        }
    }
    let mut cells: Vec<usize> = (0..h * w).collect();
    rng.shuffle(&mut cells);
    let (p, k, e) = (cells[0], cells[1], cells[2]);
    for (i, t) in [(p, Tile::Player), (k, Tile::Key), (e, Tile::Exit)] {
        level.set(i / w, i % w, t);
    }
    let turn = rng.uniform() < 0.5;
    carve(&mut level, p, k, turn);
    carve(&mut level, k, e, !turn);
    // Trim surplus walls at random until the wall bound holds.
    let max_walls = spec.bound(Tile::Wall).max;
    let mut walls: Vec<usize> = (0..h * w).filter(|i| level.tiles()[*i] == Tile::Wall).collect();
    rng.shuffle(&mut walls);
    while walls.len() > max_walls {
        let i = walls.pop().expect("non-empty");
        level.set(i / w, i % w, Tile::Empty);
    }
    for t in [Tile::Enemy1, Tile::Enemy2, Tile::Enemy3] {
        if rng.uniform() < style.enemy_prob {
            let free: Vec<usize> = (0..h * w).filter(|i| level.tiles()[*i] == Tile::Empty).collect();
            if !free.is_empty() {
                let i = free[rng.below(free.len())];
                level.set(i / w, i % w, t);
            }
        }
    }
    level
}

/// `n` distinct playable levels.
pub fn synth_levels(spec: &LevelSpec, n: usize, seed: u64, style: &LevelStyle) -> Result<Vec<Level>> {
    spec.validate()?;
    if spec.cells() < 3 {
        return Err(Error::Parameter("levels need at least 3 cells".into()));
    }
    let mut rng = RngStream::new(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let budget = n.saturating_mul(style.attempts_per_level.max(1));
    for _ in 0..budget {
        if out.len() == n {
            break;
        }
        let l = draw_level(spec, style, &mut rng);
        if l.satisfies(spec) && seen.insert(l.clone()) {
            out.push(l);
        }
    }
    if out.len() < n {
        return Err(Error::Bound(format!(
            "only {} distinct levels found within {budget} attempts",
            out.len()
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainStyle {
    /// Relative frequency of each tile class among blob centres.
    pub class_weights: [f64; NUM_CLASSES],
    pub min_blobs: usize,
    pub max_blobs: usize,
}

impl Default for TerrainStyle {
    fn default() -> Self {
        Self {
            // Mountainous: walls and enemy ground only, so any free
            // corridor is foreign to the data.
            class_weights: [0.5, 0.0, 0.0, 0.0, 0.2, 0.2, 0.1, 0.0],
            min_blobs: 2,
            max_blobs: 3,
        }
    }
}

impl TerrainStyle {
    pub fn validate(&self) -> Result<()> {
        let s: f64 = self.class_weights.iter().sum();
        if self.class_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || s <= 0.0 {
            return Err(Error::Parameter(
                "class weights must be non-negative with a positive sum".into(),
            ));
        }
        if self.min_blobs == 0 || self.min_blobs > self.max_blobs {
            return Err(Error::Parameter("need 1 <= min_blobs <= max_blobs".into()));
        }
        Ok(())
    }
}

fn weighted_class(weights: &[f64; NUM_CLASSES], rng: &mut RngStream) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.uniform() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).expect("positive weight")
}

/// `n` one-hot tile maps: every cell takes the class of its nearest blob
/// centre (Voronoi regions), so classes cluster into contiguous regions.
pub fn synth_terrain(height: usize, width: usize, n: usize, seed: u64, style: &TerrainStyle) -> Result<Vec<Vec<f64>>> {
    style.validate()?;
    if height == 0 || width == 0 {
        return Err(Error::Parameter("terrain needs positive dimensions".into()));
    }
    let mut rng = RngStream::new(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let blobs = style.min_blobs + rng.below(style.max_blobs - style.min_blobs + 1);
        let centres: Vec<(f64, f64, usize)> = (0..blobs)
            .map(|_| {
                let r = rng.uniform() * height as f64;
                let c = rng.uniform() * width as f64;
                (r, c, weighted_class(&style.class_weights, &mut rng))
            })
            .collect();
        let mut map = vec![0.0; height * width * NUM_CLASSES];
        for r in 0..height {
            for c in 0..width {
                let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
                let nearest = centres
                    .iter()
                    .map(|(cy, cx, k)| ((cy - y).powi(2) + (cx - x).powi(2), *k))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("at least one blob");
                map[(r * width + c) * NUM_CLASSES + nearest.1] = 1.0;
            }
        }
        out.push(map);
    }
    Ok(out)
}

/// Share of cells whose most likely class is `k`, for every class.
pub fn class_frequencies(maps: &[Vec<f64>]) -> [f64; NUM_CLASSES] {
    let mut counts = [0usize; NUM_CLASSES];
    let mut total = 0;
    for m in maps {
        for cell in m.chunks(NUM_CLASSES) {
            let k = (0..NUM_CLASSES)
                .max_by(|a, b| cell[*a].total_cmp(&cell[*b]).then(b.cmp(a)))
                .expect("classes");
            counts[k] += 1;
            total += 1;
        }
    }
    counts.map(|c| c as f64 / total.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_are_distinct_feasible_and_seeded() {
        let spec = LevelSpec::new(5, 5);
        let a = synth_levels(&spec, 50, 7, &LevelStyle::default()).unwrap();
        let b = synth_levels(&spec, 50, 7, &LevelStyle::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|l| l.satisfies(&spec)));
        assert_eq!(a.iter().collect::<HashSet<_>>().len(), 50);
    }

    #[test]
    fn impossible_count_is_reported() {
        // A 1x3 grid with only player, key and exit has six levels.
        let spec = LevelSpec::new(1, 3);
        let style = LevelStyle {
            enemy_prob: 0.0,
            edge_wall_prob: 0.0,
            inner_wall_prob: 0.0,
            attempts_per_level: 50,
        };
        assert_eq!(synth_levels(&spec, 6, 1, &style).unwrap().len(), 6);
        assert!(matches!(synth_levels(&spec, 7, 1, &style), Err(Error::Bound(_))));
    }

    #[test]
    fn terrain_maps_are_distributions_in_band() {
        let style = TerrainStyle::default();
        let maps = synth_terrain(6, 6, 400, 3, &style).unwrap();
        assert_eq!(maps, synth_terrain(6, 6, 400, 3, &style).unwrap());
        for m in &maps {
            for cell in m.chunks(NUM_CLASSES) {
                assert_eq!(cell.iter().sum::<f64>(), 1.0);
            }
        }
        let freq = class_frequencies(&maps);
        let total: f64 = style.class_weights.iter().sum();
        for k in 0..NUM_CLASSES {
            let want = style.class_weights[k] / total;
            assert!((freq[k] - want).abs() < 0.05, "class {k}: {} vs {want}", freq[k]);
        }
    }
}
