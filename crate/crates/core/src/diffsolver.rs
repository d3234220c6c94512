//! Solver layers: the forward pass is an exact solve, the backward pass an
//! approximate gradient with respect to the solver's input.
//!
//! Level projection maximises `cᵀx`; the shortest path minimises `wᵀx`.
//! Both backward rules are written so that a gradient-descent step on the
//! input moves the solution in the direction that lowers the loss.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solve::{project_level, shortest_path, LevelSpec, TerrainGrid, NUM_CLASSES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradMethod {
    Blackbox,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverLayerConfig {
    pub method: GradMethod,
    /// Interpolation strength of the blackbox rule.
    pub lambda: f64,
    /// Identity rule only: remove the per-cell class mean.
    pub project_grad: bool,
}

pub const DEFAULT_LEVEL_LAMBDA: f64 = 10.0;
pub const DEFAULT_PATH_LAMBDA: f64 = 20.0;

impl SolverLayerConfig {
    pub fn blackbox(lambda: f64) -> Self {
        Self {
            method: GradMethod::Blackbox,
            lambda,
            project_grad: false,
        }
    }

    pub fn identity(project_grad: bool) -> Self {
        Self {
            method: GradMethod::Identity,
            lambda: DEFAULT_LEVEL_LAMBDA,
            project_grad,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == GradMethod::Blackbox && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "blackbox lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Which combinatorial problem a layer solves.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    /// `argmax cᵀx` over playable levels; `c` has `cells * 8` entries.
    Level(LevelSpec),
    /// Corner-to-corner shortest path on `c` as node costs; `c` has one
    /// entry per cell.
    Path { height: usize, width: usize },
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Level(spec) => spec.dim(),
            Problem::Path { height, width } => height * width,
        }
    }

    /// Number of entries per cell in the input and solution.
    pub fn classes(&self) -> usize {
        match self {
            Problem::Level(_) => NUM_CLASSES,
            Problem::Path { .. } => 1,
        }
    }

    fn maximises(&self) -> bool {
        matches!(self, Problem::Level(_))
    }

    /// Exact solve, returned as a flat 0/1 vector.
    pub fn solve<T: Scalar>(&self, c: &[T]) -> Result<Vec<T>> {
        if c.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "solver input has {} entries, expected {}",
                c.len(),
                self.dim()
            )));
        }
        match self {
            Problem::Level(spec) => Ok(project_level(c, spec)?.to_one_hot()),
            Problem::Path { height, width } => {
                let grid = TerrainGrid::corner_to_corner(*height, *width, c.to_vec())?;
                Ok(shortest_path(&grid)?.indicator_as())
            }
        }
    }
}

/// Forward inputs and output cached for the backward pass.
#[derive(Clone, Debug)]
pub struct SolveRecord<T: Scalar> {
    pub problem: Problem,
    pub input: Vec<T>,
    pub solution: Vec<T>,
}

pub fn layer_forward<T: Scalar>(c: &[T], problem: &Problem) -> Result<(Vec<T>, SolveRecord<T>)> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("solver input contains non-finite values".into()));
    }
    let x = problem.solve(c)?;
    let record = SolveRecord {
        problem: problem.clone(),
        input: c.to_vec(),
        solution: x.clone(),
    };
    Ok((x, record))
}

fn check_grad<T: Scalar>(record: &SolveRecord<T>, g_x: &[T]) -> Result<()> {
    if g_x.len() != record.solution.len() {
        return Err(Error::Dimension(format!(
            "gradient has {} entries, solution has {}",
            g_x.len(),
            record.solution.len()
        )));
    }
    Ok(())
}

/// Perturb-and-resolve gradient. For a maximiser the perturbed input is
/// `c − λ·g_x` and the gradient `−(x′ − x)/λ`; for a minimiser `c + λ·g_x`
/// and `(x′ − x)/λ`. A solver budget overrun yields a zero gradient.
pub fn blackbox_backward<T: Scalar>(record: &SolveRecord<T>, g_x: &[T], lambda: f64) -> Result<Vec<T>> {
    check_grad(record, g_x)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    let lam = T::of(lambda);
    let sign = if record.problem.maximises() {
        -T::one()
    } else {
        T::one()
    };
    let perturbed: Vec<T> = record
        .input
        .iter()
        .zip(g_x)
        .map(|(c, g)| *c + sign * lam * *g)
        .collect();
    let x2 = match record.problem.solve(&perturbed) {
        Ok(x) => x,
        Err(Error::SolverBudget { budget }) => {
            warn!("perturbed solve exceeded {budget} nodes; using a zero gradient");
            return Ok(vec![T::zero(); g_x.len()]);
        }
        Err(e) => return Err(e),
    };
    Ok(x2
        .iter()
        .zip(&record.solution)
        .map(|(b, a)| sign * (*b - *a) / lam)
        .collect())
}

/// Passes `g_x` straight through (negated for a minimiser), optionally with
/// the per-cell mean removed.
pub fn identity_backward<T: Scalar>(record: &SolveRecord<T>, g_x: &[T], project_grad: bool) -> Result<Vec<T>> {
    check_grad(record, g_x)?;
    let mut out: Vec<T> = if record.problem.maximises() {
        g_x.to_vec()
    } else {
        g_x.iter().map(|g| -*g).collect()
    };
    if project_grad {
        // A minimiser has one entry per cell, so its "cell" is the whole grid.
        let group = if record.problem.maximises() {
            NUM_CLASSES
        } else {
            out.len().max(1)
        };
        project_cells(&mut out, group);
    }
    Ok(out)
}

/// Subtracts the mean of each consecutive group of `group` entries.
pub fn project_cells<T: Scalar>(g: &mut [T], group: usize) {
    let n = T::of(group as f64);
    for chunk in g.chunks_mut(group) {
        // The second pass removes the rounding residue of the first.
        for _ in 0..2 {
            let mean = chunk.iter().copied().sum::<T>() / n;
            chunk.iter_mut().for_each(|v| *v -= mean);
        }
    }
}

/// Dispatches on the configured rule.
pub fn layer_backward<T: Scalar>(record: &SolveRecord<T>, g_x: &[T], cfg: &SolverLayerConfig) -> Result<Vec<T>> {
    match cfg.method {
        GradMethod::Blackbox => blackbox_backward(record, g_x, cfg.lambda),
        GradMethod::Identity => identity_backward(record, g_x, cfg.project_grad),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::solve::{check_feasible, Level, Tile};
    use proptest::prelude::*;

    fn two_levels() -> (LevelSpec, Level, Level) {
        let spec = LevelSpec::new(3, 3);
        let mut a = Level::filled(3, 3, Tile::Empty);
        a.set(0, 0, Tile::Player);
        a.set(0, 1, Tile::Key);
        a.set(0, 2, Tile::Exit);
        let mut b = a.clone();
        b.set(0, 0, Tile::Exit);
        b.set(0, 2, Tile::Player);
        b.set(2, 2, Tile::Wall);
        (spec, a, b)
    }

    fn strong(l: &Level) -> Vec<f64> {
        l.to_one_hot::<f64>().iter().map(|v| 4.0 * v - 2.0).collect()
    }

    #[test]
    fn forward_recovers_encoded_level() {
        let (spec, a, _) = two_levels();
        let (x, rec) = layer_forward(&strong(&a), &Problem::Level(spec)).unwrap();
        assert_eq!(x, a.to_one_hot::<f64>());
        assert_eq!(rec.solution, x);
    }

    #[test]
    fn forward_single_cell_path() {
        let (x, _) = layer_forward(&[3.0f64], &Problem::Path { height: 1, width: 1 }).unwrap();
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn forward_outputs_are_feasible() {
        let spec = LevelSpec::new(4, 4);
        let p = Problem::Level(spec.clone());
        let mut rng = RngStream::new(5);
        for _ in 0..20 {
            let (x, _) = layer_forward(&rng.normal_vec::<f64>(spec.dim()), &p).unwrap();
            assert!(check_feasible(&x, &spec).unwrap());
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let (spec, a, _) = two_levels();
        let (_, rec) = layer_forward(&strong(&a), &Problem::Level(spec)).unwrap();
        let g = blackbox_backward(&rec, &vec![0.0; rec.solution.len()], 10.0).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn blackbox_flips_to_preferred_level() {
        let (spec, a, b) = two_levels();
        let (xa, xb) = (a.to_one_hot::<f64>(), b.to_one_hot::<f64>());
        let (_, rec) = layer_forward(&strong(&a), &Problem::Level(spec.clone())).unwrap();
        // Loss (x − xb)², whose gradient at xa points away from xb.
        let g_x: Vec<f64> = xa.iter().zip(&xb).map(|(p, q)| 2.0 * (p - q)).collect();
        let lambda = 1e3;
        let g = blackbox_backward(&rec, &g_x, lambda).unwrap();
        for i in 0..g.len() {
            let want = -(xb[i] - xa[i]) / lambda;
            assert_eq!(g[i], want);
            assert_eq!(g[i] != 0.0, xa[i] != xb[i]);
        }
        // One descent step on c now selects the preferred level.
        let c2: Vec<f64> = strong(&a).iter().zip(&g).map(|(c, d)| c - 5e3 * d).collect();
        assert_eq!(project_level(&c2, &spec).unwrap(), b);
    }

    #[test]
    fn blackbox_small_upstream_is_locally_constant() {
        let (spec, a, b) = two_levels();
        let (_, rec) = layer_forward(&strong(&a), &Problem::Level(spec)).unwrap();
        let g_x: Vec<f64> = b.to_one_hot::<f64>().iter().map(|v| -1e-6 * v).collect();
        let g = blackbox_backward(&rec, &g_x, 10.0).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn blackbox_on_paths_moves_away_from_costly_cells() {
        // Two routes around a 2x2 grid; the loss dislikes cell (0,1).
        let p = Problem::Path { height: 2, width: 2 };
        let (x, rec) = layer_forward(&[1.0f64, 1.0, 2.0, 1.0], &p).unwrap();
        assert_eq!(x, vec![1.0, 1.0, 0.0, 1.0]);
        let g_x = [0.0, 5.0, 0.0, 0.0];
        let g = blackbox_backward(&rec, &g_x, 1.0).unwrap();
        assert_eq!(g, vec![0.0, -1.0, 1.0, 0.0]);
        // Descent raises the cost of (0,1) and lowers that of (1,0).
        let w2: Vec<f64> = rec.input.iter().zip(&g).map(|(w, d)| w - 2.0 * d).collect();
        assert_eq!(p.solve(&w2).unwrap(), vec![1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn identity_passes_through() {
        let (spec, a, _) = two_levels();
        let (_, rec) = layer_forward(&strong(&a), &Problem::Level(spec)).unwrap();
        let g_x: Vec<f64> = (0..rec.solution.len()).map(|i| i as f64).collect();
        assert_eq!(identity_backward(&rec, &g_x, false).unwrap(), g_x);
    }

    #[test]
    fn projection_zeroes_constant_cells() {
        let (spec, a, _) = two_levels();
        let (_, rec) = layer_forward(&strong(&a), &Problem::Level(spec)).unwrap();
        let g_x: Vec<f64> = (0..rec.solution.len()).map(|i| (i / NUM_CLASSES) as f64).collect();
        let out = identity_backward(&rec, &g_x, true).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_bad_lambda_and_shapes() {
        assert!(SolverLayerConfig::blackbox(0.0).validate().is_err());
        assert!(SolverLayerConfig::blackbox(10.0).validate().is_ok());
        let (spec, a, _) = two_levels();
        let (_, rec) = layer_forward(&strong(&a), &Problem::Level(spec)).unwrap();
        assert!(matches!(blackbox_backward(&rec, &[1.0], 1.0), Err(Error::Dimension(_))));
        assert!(matches!(
            blackbox_backward(&rec, &rec.solution, -1.0),
            Err(Error::Parameter(_))
        ));
    }

    proptest! {
        #[test]
        fn projected_cells_sum_to_zero(g in proptest::collection::vec(-1e3f64..1e3, 72)) {
            let spec = LevelSpec::new(3, 3);
            let rec = SolveRecord { problem: Problem::Level(spec), input: vec![0.0; 72], solution: vec![0.0; 72] };
            let out = identity_backward(&rec, &g, true).unwrap();
            for cell in out.chunks(NUM_CLASSES) {
                prop_assert!(cell.iter().sum::<f64>().abs() < 1e-12);
            }
        }

        #[test]
        fn blackbox_entries_are_scaled_differences(seed in 0u64..200, lambda in 0.5f64..50.0) {
            let spec = LevelSpec::new(3, 3);
            let mut rng = RngStream::new(seed);
            let (_, rec) = layer_forward(&rng.normal_vec::<f64>(72), &Problem::Level(spec)).unwrap();
            let g = blackbox_backward(&rec, &rng.normal_vec::<f64>(72), lambda).unwrap();
            for v in g {
                let d = v * lambda;
                prop_assert!([-1.0, 0.0, 1.0].iter().any(|t| (d - t).abs() < 1e-12));
            }
        }
    }
}
