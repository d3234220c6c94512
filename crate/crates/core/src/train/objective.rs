use crate::error::Result;
use crate::scalar::Scalar;
use crate::solve::{cost_map, shortest_path, NUM_CLASSES};

/// Cost of the cheapest corner-to-corner path through `cost_map(x)`, and its
/// gradient with respect to `x`: the path indicator times the cost table.
pub fn path_objective<T: Scalar>(
    x: &[T],
    height: usize,
    width: usize,
    table: &[f64; NUM_CLASSES],
) -> Result<(T, Vec<T>)> {
    let grid = cost_map(x, height, width, table)?;
    let sol = shortest_path(&grid)?;
    let mut grad = Vec::with_capacity(x.len());
    for on in &sol.indicator {
        for t in table {
            grad.push(if *on == 1 { T::of(*t) } else { T::zero() });
        }
    }
    Ok((sol.total_cost, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::solve::DEFAULT_COST_TABLE;

    #[test]
    fn gradient_is_exact_where_the_path_is_stable() {
        // The objective is piecewise linear in x, so along the gradient its
        // value is reproduced exactly while the optimal path does not change.
        let (h, w) = (3, 3);
        let mut rng = RngStream::new(12);
        let x: Vec<f64> = (0..h * w * NUM_CLASSES).map(|_| rng.uniform() * 0.2).collect();
        let (v, g) = path_objective(&x, h, w, &DEFAULT_COST_TABLE).unwrap();
        let lin: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
        assert!((v - lin).abs() < 1e-12);
    }
}
