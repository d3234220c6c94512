//! Reverse-mode gradients against central finite differences.

use genco::nn::{Activation, Graph, Tensor};
use genco::rng::RngStream;
use proptest::prelude::*;

const EPS: f64 = 1e-6;
const TOL: f64 = 1e-6;

/// Builds a scalar loss from three leaves and returns (loss value, grads).
type Build = fn(&mut Graph<f64>, [genco::nn::NodeId; 3]) -> genco::nn::NodeId;

fn eval(build: Build, leaves: &[Tensor<f64>; 3]) -> (f64, Vec<Vec<f64>>) {
    let mut g = Graph::new();
    let ids = [
        g.variable(leaves[0].clone()),
        g.variable(leaves[1].clone()),
        g.variable(leaves[2].clone()),
    ];
    let loss = build(&mut g, ids);
    let value = g.value(loss).data()[0];
    let grads = g.backward(loss).unwrap();
    (
        value,
        ids.iter()
            .zip(leaves)
            .map(|(id, t)| grads.get_or_zero(*id, t.len()))
            .collect(),
    )
}

fn check(build: Build, leaves: [Tensor<f64>; 3]) {
    let (_, analytic) = eval(build, &leaves);
    for (li, leaf) in leaves.iter().enumerate() {
        for j in 0..leaf.len() {
            let mut plus = leaves.clone();
            plus[li].data_mut()[j] += EPS;
            let mut minus = leaves.clone();
            minus[li].data_mut()[j] -= EPS;
            let fd = (eval(build, &plus).0 - eval(build, &minus).0) / (2.0 * EPS);
            let a = analytic[li][j];
            assert!(
                (fd - a).abs() <= TOL * (1.0 + fd.abs()),
                "leaf {li} entry {j}: analytic {a}, numeric {fd}"
            );
        }
    }
}

fn random(rng: &mut RngStream, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, rng.normal_vec(n)).unwrap()
}

fn mlp(g: &mut Graph<f64>, [x, w, b]: [genco::nn::NodeId; 3]) -> genco::nn::NodeId {
    let h = g.linear(x, w, b).unwrap();
    let t = g.activate(h, Activation::Tanh);
    let s = g.activate(h, Activation::Sigmoid);
    let p = g.mul(t, s).unwrap();
    let q = g.scale(p, 0.7);
    let r = g.squared_distance(q, x).unwrap();
    let m = g.mean(p);
    g.add(r, m).unwrap()
}

fn softmax_cost(g: &mut Graph<f64>, [x, w, b]: [genco::nn::NodeId; 3]) -> genco::nn::NodeId {
    // x: [2, 16] logits for two cells of 8 classes per row
    let p = g.group_softmax(x, 8).unwrap();
    let c = g.group_dot(p, vec![3.0, 1.0, 1.0, 2.0, 5.0, 6.0, 7.0, 1.0]).unwrap();
    let h = g.linear(c, w, b).unwrap();
    let a = g.activate(h, Activation::Relu);
    let d = g
        .dot_const(p, (0..32).map(|i| (i as f64 * 0.37).sin()).collect())
        .unwrap();
    let s = g.sum(a);
    g.sub(s, d).unwrap()
}

fn gather_reshape(g: &mut Graph<f64>, [x, w, b]: [genco::nn::NodeId; 3]) -> genco::nn::NodeId {
    // x: [4, 3] rows; neighbourhoods of 3 rows (with padding) are flattened
    let rows = vec![
        None,
        Some(0),
        Some(1),
        Some(0),
        Some(1),
        Some(2),
        Some(2),
        Some(3),
        None,
        Some(3),
        Some(3),
        Some(0),
    ];
    let n = g.gather_rows_or_zero(x, rows).unwrap();
    let r = g.reshape(n, vec![4, 9]).unwrap();
    let h = g.linear(r, w, b).unwrap();
    let t = g.activate(h, Activation::Tanh);
    let sq = g.mul(t, t).unwrap();
    g.sum(sq)
}

#[test]
fn dense_layer_and_activations() {
    let mut rng = RngStream::new(1);
    check(
        mlp,
        [
            random(&mut rng, vec![3, 4]),
            random(&mut rng, vec![4, 4]),
            random(&mut rng, vec![4]),
        ],
    );
}

#[test]
fn softmax_and_cost_contraction() {
    let mut rng = RngStream::new(2);
    // Biases keep the relu inputs away from its kink.
    let b = Tensor::new(vec![3], vec![10.0, 10.0, 10.0]).unwrap();
    check(
        softmax_cost,
        [random(&mut rng, vec![2, 16]), random(&mut rng, vec![3, 2]), b],
    );
}

#[test]
fn padded_gather_and_reshape() {
    let mut rng = RngStream::new(3);
    check(
        gather_reshape,
        [
            random(&mut rng, vec![4, 3]),
            random(&mut rng, vec![2, 9]),
            random(&mut rng, vec![2]),
        ],
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mlp_gradients_hold_for_random_inputs(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        check(mlp, [random(&mut rng, vec![2, 4]), random(&mut rng, vec![4, 4]), random(&mut rng, vec![4])]);
    }
}
