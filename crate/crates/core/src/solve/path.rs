//! Node-weighted shortest paths on 4-connected grids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::level::neighbours;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TerrainGrid<T: Scalar> {
    pub height: usize,
    pub width: usize,
    /// Row-major, non-negative.
    pub node_costs: Vec<T>,
    pub src: (usize, usize),
    pub dst: (usize, usize),
}

impl<T: Scalar> TerrainGrid<T> {
    /// Source top-left, destination bottom-right.
    pub fn corner_to_corner(height: usize, width: usize, node_costs: Vec<T>) -> Result<Self> {
        let g = Self {
            height,
            width,
            node_costs,
            src: (0, 0),
            dst: (height.saturating_sub(1), width.saturating_sub(1)),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Parameter("terrain dimensions must be positive".into()));
        }
        if self.node_costs.len() != self.height * self.width {
            return Err(Error::Dimension(format!(
                "{}x{} terrain needs {} costs, got {}",
                self.height,
                self.width,
                self.height * self.width,
                self.node_costs.len()
            )));
        }
        if self.node_costs.iter().any(|c| !(c.is_finite() && *c >= T::zero())) {
            return Err(Error::Domain("node costs must be finite and non-negative".into()));
        }
        for (r, c) in [self.src, self.dst] {
            if r >= self.height || c >= self.width {
                return Err(Error::Domain(format!("endpoint ({r}, {c}) out of bounds")));
            }
        }
        Ok(())
    }

    fn index(&self, (r, c): (usize, usize)) -> usize {
        r * self.width + c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSolution<T: Scalar> {
    pub height: usize,
    pub width: usize,
    /// Row-major 0/1 indicator.
    pub indicator: Vec<u8>,
    /// Cells from source to destination.
    pub cells: Vec<(usize, usize)>,
    pub total_cost: T,
}

impl<T: Scalar> PathSolution<T> {
    pub fn indicator_as<U: Scalar>(&self) -> Vec<U> {
        self.indicator
            .iter()
            .map(|v| if *v == 1 { U::one() } else { U::zero() })
            .collect()
    }

    /// The indicator is a simple 4-connected path from `src` to `dst`
    /// without shortcuts between non-consecutive cells, and `total_cost`
    /// matches the summed node costs.
    pub fn is_valid_for(&self, grid: &TerrainGrid<T>) -> bool {
        let (h, w) = (grid.height, grid.width);
        if self.height != h || self.width != w || self.indicator.len() != h * w {
            return false;
        }
        if self.indicator.iter().any(|v| *v > 1) {
            return false;
        }
        let on = |i: usize| self.indicator[i] == 1;
        let (s, d) = (grid.index(grid.src), grid.index(grid.dst));
        let count = self.indicator.iter().filter(|v| **v == 1).count();
        if !on(s) || !on(d) || count != self.cells.len() {
            return false;
        }
        if s == d {
            if count != 1 {
                return false;
            }
        } else {
            for i in (0..h * w).filter(|&i| on(i)) {
                let deg = neighbours(h, w, i).filter(|&j| on(j)).count();
                let want = if i == s || i == d { 1 } else { 2 };
                if deg != want {
                    return false;
                }
            }
        }
        let ordered_ok = self.cells.first() == Some(&grid.src)
            && self.cells.last() == Some(&grid.dst)
            && self.cells.windows(2).all(|p| {
                let (a, b) = (p[0], p[1]);
                a.0.abs_diff(b.0) + a.1.abs_diff(b.1) == 1
            })
            && self.cells.iter().all(|c| on(grid.index(*c)));
        if !ordered_ok {
            return false;
        }
        let sum: T = self.cells.iter().map(|c| grid.node_costs[grid.index(*c)]).sum();
        let tol = T::of(1e-9) * (T::one() + sum.abs());
        (sum - self.total_cost).abs() <= tol
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    hops: usize,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed for a min-heap on (cost, hops, index).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.hops.cmp(&self.hops))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra with node costs; the path cost counts every cell on the path,
/// source and destination included. Among equal-cost paths the one with
/// fewer cells wins, then the earliest-settled predecessor.
pub fn shortest_path<T: Scalar>(grid: &TerrainGrid<T>) -> Result<PathSolution<T>> {
    grid.validate()?;
    let (h, w) = (grid.height, grid.width);
    let n = h * w;
    let cost: Vec<f64> = grid.node_costs.iter().map(|c| c.as_f64()).collect();
    let (s, d) = (grid.index(grid.src), grid.index(grid.dst));
    let mut dist = vec![f64::INFINITY; n];
    let mut hops = vec![usize::MAX; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[s] = cost[s];
    hops[s] = 1;
    heap.push(Entry {
        cost: dist[s],
        hops: 1,
        index: s,
    });
    while let Some(Entry {
        cost: du,
        hops: hu,
        index: u,
    }) = heap.pop()
    {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == d {
            break;
        }
        for v in neighbours(h, w, u) {
            if done[v] {
                continue;
            }
            let (dv, hv) = (du + cost[v], hu + 1);
            if dv < dist[v] || (dv == dist[v] && hv < hops[v]) {
                dist[v] = dv;
                hops[v] = hv;
                prev[v] = u;
                heap.push(Entry {
                    cost: dv,
                    hops: hv,
                    index: v,
                });
            }
        }
    }
    let mut order = vec![d];
    let mut cur = d;
    while cur != s {
        cur = prev[cur];
        order.push(cur);
    }
    order.reverse();
    let mut indicator = vec![0u8; n];
    let mut total = T::zero();
    let cells = order
        .iter()
        .map(|&i| {
            indicator[i] = 1;
            total += grid.node_costs[i];
            (i / w, i % w)
        })
        .collect();
    Ok(PathSolution {
        height: h,
        width: w,
        indicator,
        cells,
        total_cost: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let g = TerrainGrid::corner_to_corner(1, 1, vec![5.0f64]).unwrap();
        let p = shortest_path(&g).unwrap();
        assert_eq!(p.indicator, vec![1]);
        assert_eq!(p.total_cost, 5.0);
        assert!(p.is_valid_for(&g));
    }

    #[test]
    fn two_by_two() {
        let g = TerrainGrid::corner_to_corner(2, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let p = shortest_path(&g).unwrap();
        assert_eq!(p.cells, vec![(0, 0), (0, 1), (1, 1)]);
        assert_eq!(p.total_cost, 7.0);
        assert_eq!(p.indicator, vec![1, 1, 0, 1]);
    }

    #[test]
    fn zero_costs_give_chordless_path() {
        let g = TerrainGrid::corner_to_corner(4, 4, vec![0.0f64; 16]).unwrap();
        let p = shortest_path(&g).unwrap();
        assert_eq!(p.cells.len(), 7);
        assert!(p.is_valid_for(&g));
    }

    #[test]
    fn negative_cost_rejected() {
        assert!(matches!(
            TerrainGrid::corner_to_corner(1, 2, vec![1.0f64, -1.0]),
            Err(Error::Domain(_))
        ));
    }
}
