//! Exact projection `argmax_{x in Ω} cᵀx` over playable levels.
//!
//! Depth-first branch and bound over cells in row-major order, classes in
//! ascending index order. Each node is bounded by the best completion that
//! respects the count bounds but ignores playability (a small transportation
//! problem solved exactly). When that completion is playable it is also the
//! best leaf of the subtree, so it becomes a candidate immediately.
//! Playability is further enforced by rejecting partial assignments whose
//! walls already separate the placed player/key/exit.
//!
//! Ties resolve to the lexicographically smallest class vector.

use super::level::{reachable, Level, LevelSpec, Tile, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Node-expansion cap used by [`project_level`].
pub const DEFAULT_NODE_BUDGET: u64 = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverOptions {
    pub node_budget: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Search statistics from one projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
}

pub fn project_level<T: Scalar>(scores: &[T], spec: &LevelSpec) -> Result<Level> {
    project_level_with(scores, spec, SolverOptions::default()).map(|(l, _)| l)
}

pub fn project_level_with<T: Scalar>(
    scores: &[T],
    spec: &LevelSpec,
    opts: SolverOptions,
) -> Result<(Level, SolveStats)> {
    spec.validate()?;
    if scores.len() != spec.dim() {
        return Err(Error::Dimension(format!(
            "score field has {} entries, spec needs {}",
            scores.len(),
            spec.dim()
        )));
    }
    let c: Vec<f64> = scores.iter().map(|v| v.as_f64()).collect();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("score field contains non-finite values".into()));
    }
    let mut search = Search::new(&c, spec, opts.node_budget);
    if let Some(h) = search.greedy() {
        search.offer(&h);
    }
    search.dfs(0, f64::INFINITY)?;
    let stats = SolveStats { nodes: search.nodes };
    match search.best {
        Some((_, tiles)) => {
            let tiles = tiles.into_iter().map(|k| Tile::ALL[k as usize]).collect();
            Ok((Level::new(spec.height, spec.width, tiles)?, stats))
        }
        None => Err(Error::Infeasible(
            "no level satisfies the count bounds and playability".into(),
        )),
    }
}

struct Search<'a> {
    c: &'a [f64],
    spec: &'a LevelSpec,
    n: usize,
    assign: Vec<u8>,
    counts: [usize; NUM_CLASSES],
    best: Option<(f64, Vec<u8>)>,
    nodes: u64,
    budget: u64,
    relaxed: Vec<u8>,
}

const SPECIALS: [Tile; 3] = [Tile::Player, Tile::Key, Tile::Exit];

impl<'a> Search<'a> {
    fn new(c: &'a [f64], spec: &'a LevelSpec, budget: u64) -> Self {
        let n = spec.cells();
        Self {
            c,
            spec,
            n,
            assign: vec![0; n],
            counts: [0; NUM_CLASSES],
            best: None,
            nodes: 0,
            budget,
            relaxed: vec![0; n],
        }
    }

    fn score(&self, cell: usize, k: usize) -> f64 {
        self.c[cell * NUM_CLASSES + k]
    }

    fn value_of(&self, tiles: &[u8]) -> f64 {
        tiles
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, k)| acc + self.score(i, *k as usize))
    }

    fn feasible_full(&self, tiles: &[u8]) -> bool {
        let mut counts = [0usize; NUM_CLASSES];
        for k in tiles {
            counts[*k as usize] += 1;
        }
        let counts_ok = self
            .spec
            .bounds
            .iter()
            .zip(counts)
            .all(|(b, n)| b.min <= n && n <= b.max);
        counts_ok && (!self.spec.connectivity || self.connected(tiles, self.n))
    }

    /// Placed specials share one passable component, and if any special is
    /// still unplaced that component reaches an unassigned cell. Cells at
    /// index `>= depth` count as unassigned and passable.
    fn connected(&self, tiles: &[u8], depth: usize) -> bool {
        let (h, w) = (self.spec.height, self.spec.width);
        let open = |i: usize| i >= depth || tiles[i] != Tile::Wall as u8;
        let placed: Vec<usize> = SPECIALS
            .iter()
            .filter_map(|t| (0..depth).find(|&i| tiles[i] == *t as u8))
            .collect();
        let Some(&first) = placed.first() else {
            return true;
        };
        let seen = reachable(h, w, open, first);
        if placed.iter().any(|&p| !seen[p]) {
            return false;
        }
        placed.len() == SPECIALS.len() || (depth..self.n).any(|i| seen[i])
    }

    /// Replaces the incumbent if `tiles` is feasible and better, or equal
    /// and lexicographically smaller.
    fn offer(&mut self, tiles: &[u8]) {
        if !self.feasible_full(tiles) {
            return;
        }
        let v = self.value_of(tiles);
        let better = match &self.best {
            None => true,
            Some((bv, bt)) => v > *bv || (v == *bv && tiles < bt.as_slice()),
        };
        if better {
            self.best = Some((v, tiles.to_vec()));
        }
    }

    /// Best completion of cells `depth..n` under the remaining count bounds,
    /// ignoring playability, or `None` when the bounds cannot be met. The
    /// completion is written to `self.relaxed[depth..]`.
    ///
    /// Cells are added one at a time and routed along a shortest augmenting
    /// path over the class graph, where an arc `a -> b` moves one already
    /// placed cell from class `a` to class `b`. Path costs are compared
    /// lexicographically as (unmet minimums, negated score).
    fn relaxation(&mut self, depth: usize) -> Option<()> {
        let rem = self.n - depth;
        let mut min_rem = [0usize; NUM_CLASSES];
        let mut max_rem = [0usize; NUM_CLASSES];
        for k in 0..NUM_CLASSES {
            let b = self.spec.bounds[k];
            if self.counts[k] > b.max {
                return None;
            }
            min_rem[k] = b.min.saturating_sub(self.counts[k]);
            max_rem[k] = (b.max - self.counts[k]).min(rem);
        }
        if min_rem.iter().sum::<usize>() > rem || max_rem.iter().sum::<usize>() < rem {
            return None;
        }
        let mut load = [0usize; NUM_CLASSES];
        const EPS: f64 = 1e-12;
        for cell in depth..self.n {
            // Cheapest move out of each class into every other class.
            let mut mv = [[(f64::INFINITY, usize::MAX); NUM_CLASSES]; NUM_CLASSES];
            for j in depth..cell {
                let a = self.relaxed[j] as usize;
                let from = self.score(j, a);
                for b in 0..NUM_CLASSES {
                    if b != a && max_rem[b] > 0 {
                        let d = from - self.score(j, b);
                        if d < mv[a][b].0 {
                            mv[a][b] = (d, j);
                        }
                    }
                }
            }
            let mut dist = [f64::INFINITY; NUM_CLASSES];
            let mut pred = [usize::MAX; NUM_CLASSES];
            for k in 0..NUM_CLASSES {
                if max_rem[k] > 0 {
                    dist[k] = -self.score(cell, k);
                }
            }
            for _ in 0..NUM_CLASSES {
                let mut changed = false;
                for a in 0..NUM_CLASSES {
                    if !dist[a].is_finite() {
                        continue;
                    }
                    for b in 0..NUM_CLASSES {
                        let d = dist[a] + mv[a][b].0;
                        if d < dist[b] - EPS {
                            dist[b] = d;
                            pred[b] = a;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            let end = (0..NUM_CLASSES)
                .filter(|&k| dist[k].is_finite() && load[k] < max_rem[k])
                .min_by(|&a, &b| {
                    let pa = (load[a] >= min_rem[a]) as u8;
                    let pb = (load[b] >= min_rem[b]) as u8;
                    pa.cmp(&pb).then(dist[a].total_cmp(&dist[b]))
                })?;
            // Walk the path back, shifting one cell along each arc.
            let mut b = end;
            let mut guard = 0;
            while pred[b] != usize::MAX {
                let a = pred[b];
                self.relaxed[mv[a][b].1] = b as u8;
                b = a;
                guard += 1;
                if guard > NUM_CLASSES {
                    return None;
                }
            }
            self.relaxed[cell] = b as u8;
            load[end] += 1;
        }
        (0..NUM_CLASSES).all(|k| load[k] >= min_rem[k]).then_some(())
    }

    fn pruned(&self, depth: usize, bound: f64) -> bool {
        match &self.best {
            None => false,
            Some((bv, bt)) => bound < *bv || (bound == *bv && self.assign[..depth] > bt[..depth]),
        }
    }

    fn dfs(&mut self, depth: usize, bound: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::SolverBudget { budget: self.budget });
        }
        if depth == self.n {
            let tiles = self.assign.clone();
            self.offer(&tiles);
            return Ok(());
        }
        for k in 0..NUM_CLASSES {
            if self.counts[k] >= self.spec.bounds[k].max {
                continue;
            }
            self.assign[depth] = k as u8;
            self.counts[k] += 1;
            // The parent bound also caps every child.
            if !self.pruned(depth + 1, bound) {
                if let Some(b) = self.child_bound(depth + 1, k) {
                    self.dfs(depth + 1, b)?;
                }
            }
            self.counts[k] -= 1;
        }
        Ok(())
    }

    /// Bounds the subtree below `assign[..depth]`. A relaxed completion that
    /// happens to be playable is offered as a candidate on the way. Returns
    /// the bound when the subtree survives.
    fn child_bound(&mut self, depth: usize, placed: usize) -> Option<f64> {
        let gates = placed == Tile::Wall as usize || SPECIALS.iter().any(|t| *t as usize == placed);
        if self.spec.connectivity && gates && !self.connected(&self.assign, depth) {
            return None;
        }
        self.relaxation(depth)?;
        let mut full = std::mem::take(&mut self.relaxed);
        full[..depth].copy_from_slice(&self.assign[..depth]);
        let bound = self.value_of(&full);
        self.offer(&full);
        self.relaxed = full;
        (!self.pruned(depth, bound)).then_some(bound)
    }

    /// Heuristic incumbent: best unconstrained upgrades over the base class,
    /// then walls removed (weakest first) until playable.
    fn greedy(&self) -> Option<Vec<u8>> {
        let base = Tile::Empty as usize;
        let mut tiles = vec![base as u8; self.n];
        let mut counts = [0usize; NUM_CLASSES];
        counts[base] = self.n;
        let mut cand: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..self.n {
            for k in 0..NUM_CLASSES {
                if k != base {
                    cand.push((self.score(i, k) - self.score(i, base), i, k));
                }
            }
        }
        cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let bounds = &self.spec.bounds;
        // Required classes first, so the singletons always get a cell.
        for pass in 0..2 {
            for &(g, i, k) in &cand {
                let required = counts[k] < bounds[k].min;
                if (pass == 0 && !required) || (pass == 1 && g <= 0.0) {
                    continue;
                }
                if tiles[i] as usize == base && counts[k] < bounds[k].max {
                    tiles[i] = k as u8;
                    counts[k] += 1;
                    counts[base] -= 1;
                }
            }
        }
        if self.spec.connectivity {
            let mut walls: Vec<(f64, usize)> = (0..self.n)
                .filter(|&i| tiles[i] == Tile::Wall as u8)
                .map(|i| (self.score(i, Tile::Wall as usize) - self.score(i, base), i))
                .collect();
            walls.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut it = walls.into_iter();
            while !self.connected(&tiles, self.n) {
                let (_, i) = it.next()?;
                tiles[i] = base as u8;
            }
        }
        self.feasible_full(&tiles).then_some(tiles)
    }
}
