//! Density, coverage and nearest-code lookup against naive references.

use genco::metrics::{coverage, density, nnd_k, uniqueness, MetricReport};
use genco::rng::RngStream;
use genco::train::Codebook;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Radius of real `i`: sort every distance to the other reals, take the k-th.
fn radius(reals: &[Vec<f64>], i: usize, k: usize) -> f64 {
    let mut d: Vec<f64> = (0..reals.len())
        .filter(|&j| j != i)
        .map(|j| euclid(&reals[i], &reals[j]))
        .collect();
    d.sort_by(f64::total_cmp);
    d[k - 1]
}

fn naive(fakes: &[Vec<f64>], reals: &[Vec<f64>], k: usize) -> (f64, f64) {
    let radii: Vec<f64> = (0..reals.len()).map(|i| radius(reals, i, k)).collect();
    let mut hits = 0;
    let mut covered = vec![false; reals.len()];
    for y in fakes {
        for (i, x) in reals.iter().enumerate() {
            if euclid(x, y) <= radii[i] {
                hits += 1;
                covered[i] = true;
            }
        }
    }
    let cov = covered.iter().filter(|c| **c).count() as f64 / reals.len() as f64;
    (hits as f64 / (k * fakes.len()) as f64, cov)
}

/// Small-integer points so distances tie often and compare exactly.
fn points(rng: &mut RngStream, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.below(4) as f64).collect())
        .collect()
}

#[test]
fn density_and_coverage_match_enumeration() {
    let mut rng = RngStream::new(20);
    for case in 0..300 {
        let dim = 1 + rng.below(4);
        let n_real = 2 + rng.below(12);
        let n_fake = 1 + rng.below(12);
        let k = 1 + rng.below(n_real - 1);
        let reals = points(&mut rng, n_real, dim);
        let fakes = points(&mut rng, n_fake, dim);
        let (d, c) = naive(&fakes, &reals, k);
        assert_eq!(density(&fakes, &reals, k).unwrap(), d, "case {case}");
        assert_eq!(coverage(&fakes, &reals, k).unwrap(), c, "case {case}");
        for i in 0..n_real {
            assert_eq!(nnd_k(&reals, i, k).unwrap(), radius(&reals, i, k), "case {case}");
        }
    }
}

#[test]
fn hand_worked_line() {
    // Reals 0..=3 with k = 1 all have radius 1. The fake at 0.5 sits in two
    // balls; the one at 4 touches the boundary of the ball around 3.
    let reals: Vec<Vec<f64>> = (0..4).map(|v| vec![v as f64]).collect();
    let fakes = vec![vec![0.5], vec![4.0]];
    assert_eq!(density(&fakes, &reals, 1).unwrap(), 1.5);
    assert_eq!(coverage(&fakes, &reals, 1).unwrap(), 0.75);
    let far = vec![vec![10.0]];
    assert_eq!(density(&far, &reals, 1).unwrap(), 0.0);
    assert_eq!(coverage(&far, &reals, 1).unwrap(), 0.0);
}

#[test]
fn samples_equal_to_reals_cover_everything() {
    let mut rng = RngStream::new(4);
    let reals = points(&mut rng, 30, 3);
    assert_eq!(coverage(&reals, &reals, 5).unwrap(), 1.0);
    let keys: Vec<Vec<u8>> = reals.iter().map(|p| p.iter().map(|v| *v as u8).collect()).collect();
    let r = MetricReport::compute(&reals, &reals, &keys, 5).unwrap();
    assert_eq!(r.coverage, 1.0);
    assert!(r.density >= 1.0);
    assert_eq!(r.unique_fraction, uniqueness(&keys).unwrap());
}

#[test]
fn degenerate_inputs_are_rejected() {
    let reals = vec![vec![0.0], vec![1.0]];
    assert!(density(&[], &reals, 1).is_err());
    assert!(coverage(&[vec![0.0]], &reals, 2).is_err());
    assert!(density(&[vec![0.0, 1.0]], &reals, 1).is_err());
    assert!(uniqueness::<u8>(&[]).is_err());
}

#[test]
fn nearest_code_matches_linear_scan() {
    let mut rng = RngStream::new(9);
    for _ in 0..200 {
        let k = 1 + rng.below(10);
        let d = 1 + rng.below(5);
        let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.below(3) as f64).collect()).collect();
        let book = Codebook::from_rows(&rows).unwrap();
        let z: Vec<f64> = (0..d).map(|_| rng.below(3) as f64).collect();
        // First index among those at minimal distance.
        let dists: Vec<f64> = rows.iter().map(|r| euclid(r, &z)).collect();
        let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
        let expect = dists.iter().position(|v| *v == min).unwrap();
        assert_eq!(book.nearest(&z), expect);
    }
}
