mod common;

use common::{param_gradient_error, primitive_gradient_errors, random_tensor, rng};
use mdkit::autodiff::{Graph, Tensor};
use mdkit::nets::{GcnStack, Gru, Linear, ParamStore};

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

#[test]
fn every_primitive_matches_finite_differences() {
    for (name, err) in primitive_gradient_errors(STEP) {
        assert!(err < TOL, "{name}: relative gradient error {err:e}");
    }
}

#[test]
fn layers_match_finite_differences() {
    let mut r = rng(5);
    let mut store = ParamStore::new();
    let lin = Linear::new(&mut store, "lin", 3, 4, 1.0, &mut r);
    let gru = Gru::new(&mut store, "gru", 4, 5, &mut r);
    let gcn = GcnStack::new(&mut store, "gcn", 3, 5, 6, 2, 1, 0.5, 1e-2, &mut r);
    let x = random_tensor(&mut r, 6, 3, 1.0);
    let h = random_tensor(&mut r, 6, 5, 0.5);
    let probe = random_tensor(&mut r, 6, 2, 1.0);
    let (err, name) = param_gradient_error(&store, STEP, |g, p| {
        let xv = g.constant(x.clone());
        let hv = g.constant(h.clone());
        let y = lin.forward(g, p, xv);
        let h1 = gru.step(g, p, y, hv);
        let h2 = gru.step(g, p, y, h1);
        let out = gcn.forward(g, p, h2);
        g.weighted_sum(out, &probe)
    });
    assert!(err < TOL, "{name}: relative gradient error {err:e}");
}

#[test]
fn sum_of_parameter_has_unit_gradient() {
    let mut store = ParamStore::new();
    let x = store.add("x", random_tensor(&mut rng(6), 2, 3, 1.0));
    let mut g = Graph::new();
    let p = store.bind(&mut g, |_| true);
    let loss = g.sum(p.var(x));
    let mut grads = g.backward(loss).unwrap();
    assert_eq!(p.gradients(&g, &mut grads)[0], Tensor::from_vec(2, 3, vec![1.0; 6]));
}

#[test]
fn squared_norm_gradient_is_two_a_transpose_a_x() {
    let a = Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
    let x = Tensor::from_vec(2, 1, vec![0.5, -1.0]);
    let mut g = Graph::new();
    let av = g.constant(a.clone());
    let xv = g.input(x.clone());
    let ax = g.matmul(av, xv);
    let sq = g.mul(ax, ax);
    let loss = g.sum(sq);
    let mut grads = g.backward(loss).unwrap();
    // A·x = (-1.5, -2.5); 2·Aᵀ·(A·x) = (-18, -26).
    assert_eq!(grads.take(xv).unwrap().data, vec![-18.0, -26.0]);
}
