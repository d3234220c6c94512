//! Grid game levels: tile classes, count bounds, and feasibility.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const NUM_CLASSES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Tile {
    Wall = 0,
    Empty = 1,
    Key = 2,
    Exit = 3,
    Enemy1 = 4,
    Enemy2 = 5,
    Enemy3 = 6,
    Player = 7,
}

impl Tile {
    pub const ALL: [Tile; NUM_CLASSES] = [
        Tile::Wall,
        Tile::Empty,
        Tile::Key,
        Tile::Exit,
        Tile::Enemy1,
        Tile::Enemy2,
        Tile::Enemy3,
        Tile::Player,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tile> {
        Tile::ALL.get(i).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Tile::Wall => 'W',
            Tile::Empty => '.',
            Tile::Key => 'K',
            Tile::Exit => 'E',
            Tile::Enemy1 => '1',
            Tile::Enemy2 => '2',
            Tile::Enemy3 => '3',
            Tile::Player => 'P',
        }
    }

    pub fn from_symbol(ch: char) -> Option<Tile> {
        Tile::ALL.into_iter().find(|t| t.symbol() == ch)
    }

    pub fn name(self) -> &'static str {
        match self {
            Tile::Wall => "wall",
            Tile::Empty => "empty",
            Tile::Key => "key",
            Tile::Exit => "exit",
            Tile::Enemy1 => "enemy1",
            Tile::Enemy2 => "enemy2",
            Tile::Enemy3 => "enemy3",
            Tile::Player => "player",
        }
    }

    pub fn is_passable(self) -> bool {
        self != Tile::Wall
    }
}

/// Inclusive count range for one tile class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountBounds {
    pub min: usize,
    pub max: usize,
}

impl CountBounds {
    pub fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub height: usize,
    pub width: usize,
    /// Indexed by `Tile::index`.
    pub bounds: [CountBounds; NUM_CLASSES],
    /// Require a non-wall 4-neighbour route player → key → exit.
    pub connectivity: bool,
}

impl LevelSpec {
    /// Default bounds: one player, key and exit; walls at most 40% of the
    /// cells; each enemy class at most once (0–3 enemies in total).
    pub fn new(height: usize, width: usize) -> Self {
        let cells = height * width;
        let mut bounds = [CountBounds::new(0, cells); NUM_CLASSES];
        bounds[Tile::Wall.index()] = CountBounds::new(0, cells * 2 / 5);
        for t in [Tile::Player, Tile::Key, Tile::Exit] {
            bounds[t.index()] = CountBounds::new(1, 1);
        }
        for t in [Tile::Enemy1, Tile::Enemy2, Tile::Enemy3] {
            bounds[t.index()] = CountBounds::new(0, 1);
        }
        Self {
            height,
            width,
            bounds,
            connectivity: true,
        }
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    /// Length of a flattened one-hot level: `height * width * 8`.
    pub fn dim(&self) -> usize {
        self.cells() * NUM_CLASSES
    }

    pub fn bound(&self, t: Tile) -> CountBounds {
        self.bounds[t.index()]
    }

    /// Structural checks, then count satisfiability.
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Parameter("level dimensions must be positive".into()));
        }
        for t in [Tile::Player, Tile::Key, Tile::Exit] {
            if self.bound(t) != CountBounds::new(1, 1) {
                return Err(Error::Parameter(format!("{} must appear exactly once", t.name())));
            }
        }
        if self.bounds.iter().any(|b| b.min > b.max) {
            return Err(Error::Infeasible("a class has min > max".into()));
        }
        let lo: usize = self.bounds.iter().map(|b| b.min).sum();
        let hi: usize = self.bounds.iter().map(|b| b.max).sum();
        let n = self.cells();
        if lo > n || hi < n {
            return Err(Error::Infeasible(format!(
                "count bounds need between {lo} and {hi} cells, grid has {n}"
            )));
        }
        Ok(())
    }
}

/// A tile assignment: exactly one class per cell, row-major.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level {
    height: usize,
    width: usize,
    tiles: Vec<Tile>,
}

impl Level {
    pub fn new(height: usize, width: usize, tiles: Vec<Tile>) -> Result<Self> {
        if tiles.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}x{width} level needs {} tiles, got {}",
                height * width,
                tiles.len()
            )));
        }
        Ok(Self { height, width, tiles })
    }

    pub fn filled(height: usize, width: usize, tile: Tile) -> Self {
        Self {
            height,
            width,
            tiles: vec![tile; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn get(&self, r: usize, c: usize) -> Tile {
        self.tiles[r * self.width + c]
    }

    pub fn set(&mut self, r: usize, c: usize, t: Tile) {
        self.tiles[r * self.width + c] = t;
    }

    pub fn counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for t in &self.tiles {
            counts[t.index()] += 1;
        }
        counts
    }

    pub fn position(&self, t: Tile) -> Option<usize> {
        self.tiles.iter().position(|x| *x == t)
    }

    /// Flattened `H x W x 8` one-hot encoding.
    pub fn to_one_hot<T: Scalar>(&self) -> Vec<T> {
        let mut v = vec![T::zero(); self.tiles.len() * NUM_CLASSES];
        for (i, t) in self.tiles.iter().enumerate() {
            v[i * NUM_CLASSES + t.index()] = T::one();
        }
        v
    }

    /// Decodes a one-hot tensor; `Ok(None)` when some cell is not one-hot.
    pub fn from_one_hot<T: Scalar>(height: usize, width: usize, x: &[T]) -> Result<Option<Self>> {
        if x.len() != height * width * NUM_CLASSES {
            return Err(Error::Dimension(format!(
                "one-hot level of {height}x{width} needs {} entries, got {}",
                height * width * NUM_CLASSES,
                x.len()
            )));
        }
        let mut tiles = Vec::with_capacity(height * width);
        for cell in x.chunks(NUM_CLASSES) {
            let mut hot = None;
            for (k, v) in cell.iter().enumerate() {
                if *v == T::one() {
                    if hot.is_some() {
                        return Ok(None);
                    }
                    hot = Some(k);
                } else if *v != T::zero() {
                    return Ok(None);
                }
            }
            match hot {
                Some(k) => tiles.push(Tile::ALL[k]),
                None => return Ok(None),
            }
        }
        Ok(Some(Self { height, width, tiles }))
    }

    /// `cᵀx` summed in row-major cell order.
    pub fn objective<T: Scalar>(&self, scores: &[T]) -> T {
        self.tiles
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, t)| acc + scores[i * NUM_CLASSES + t.index()])
    }

    /// Count bounds and connectivity, assuming the spec's dimensions.
    pub fn satisfies(&self, spec: &LevelSpec) -> bool {
        if self.height != spec.height || self.width != spec.width {
            return false;
        }
        let counts = self.counts();
        let counts_ok = spec.bounds.iter().zip(counts).all(|(b, n)| b.min <= n && n <= b.max);
        counts_ok && (!spec.connectivity || self.is_playable())
    }

    /// Player reaches the key, and the key reaches the exit, through non-wall
    /// cells (4-neighbour moves).
    pub fn is_playable(&self) -> bool {
        let (Some(p), Some(k), Some(e)) = (
            self.position(Tile::Player),
            self.position(Tile::Key),
            self.position(Tile::Exit),
        ) else {
            return false;
        };
        let from_player = reachable(self.height, self.width, |i| self.tiles[i].is_passable(), p);
        if !from_player[k] {
            return false;
        }
        let from_key = reachable(self.height, self.width, |i| self.tiles[i].is_passable(), k);
        from_key[e]
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.height {
            let row: String = (0..self.width).map(|c| self.get(r, c).symbol()).collect();
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

/// BFS over 4-neighbours restricted to `open` cells.
pub(crate) fn reachable(height: usize, width: usize, open: impl Fn(usize) -> bool, start: usize) -> Vec<bool> {
    let mut seen = vec![false; height * width];
    if !open(start) {
        return seen;
    }
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for j in neighbours(height, width, i) {
            if !seen[j] && open(j) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

pub(crate) fn neighbours(height: usize, width: usize, i: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (i / width, i % width);
    let up = (r > 0).then(|| i - width);
    let down = (r + 1 < height).then(|| i + width);
    let left = (c > 0).then(|| i - 1);
    let right = (c + 1 < width).then(|| i + 1);
    [up, left, right, down].into_iter().flatten()
}

/// Membership in the feasible set: one-hot cells, count bounds, playability.
pub fn check_feasible<T: Scalar>(x: &[T], spec: &LevelSpec) -> Result<bool> {
    match Level::from_one_hot(spec.height, spec.width, x)? {
        Some(level) => Ok(level.satisfies(spec)),
        None => Ok(false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_level() -> Level {
        let mut l = Level::filled(3, 3, Tile::Empty);
        l.set(0, 0, Tile::Player);
        l.set(0, 1, Tile::Key);
        l.set(0, 2, Tile::Exit);
        l
    }

    #[test]
    fn adjacent_triple_is_feasible() {
        let spec = LevelSpec::new(3, 3);
        assert!(check_feasible(&row_level().to_one_hot::<f64>(), &spec).unwrap());
    }

    #[test]
    fn wall_column_blocks_player() {
        let spec = LevelSpec::new(3, 3);
        let mut l = Level::filled(3, 3, Tile::Empty);
        l.set(0, 0, Tile::Player);
        l.set(0, 2, Tile::Key);
        l.set(2, 2, Tile::Exit);
        for r in 0..3 {
            l.set(r, 1, Tile::Wall);
        }
        assert!(!check_feasible(&l.to_one_hot::<f64>(), &spec).unwrap());
    }

    #[test]
    fn non_one_hot_is_infeasible() {
        let spec = LevelSpec::new(3, 3);
        let mut x = row_level().to_one_hot::<f64>();
        x[NUM_CLASSES + 1] = 1.0;
        assert!(!check_feasible(&x, &spec).unwrap());
        x[NUM_CLASSES + 1] = 0.5;
        assert!(!check_feasible(&x, &spec).unwrap());
    }

    #[test]
    fn shape_mismatch_is_error() {
        let spec = LevelSpec::new(3, 3);
        assert!(matches!(check_feasible(&[0.0f64; 10], &spec), Err(Error::Dimension(_))));
    }

    #[test]
    fn count_bounds_enforced() {
        let spec = LevelSpec::new(3, 3);
        let mut l = row_level();
        for c in 0..3 {
            l.set(1, c, Tile::Wall);
        }
        l.set(2, 0, Tile::Wall);
        // 4 walls > floor(0.4 * 9) = 3
        assert!(!l.satisfies(&spec));
    }

    #[test]
    fn default_spec_validates() {
        LevelSpec::new(5, 5).validate().unwrap();
        let mut s = LevelSpec::new(2, 2);
        s.bounds[Tile::Wall.index()] = CountBounds::new(5, 5);
        assert!(matches!(s.validate(), Err(Error::Infeasible(_))));
    }
}
