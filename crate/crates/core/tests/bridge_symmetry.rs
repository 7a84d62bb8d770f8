//! With a constant dimension, a bridge run backwards is the bridge between
//! the swapped endpoints with the measure reflected. No such identity holds
//! when the dimension varies: from zero with `δ = 0` at first the bridge is
//! pinned at zero, while its reversal is not.

use gbesq::samplers::{bridge_mixture, SamplerOptions};
use gbesq::time::{PiecewiseFn, RadonMeasure};
use gbesq::transforms::bridge_laplace;

fn lopsided() -> RadonMeasure {
    RadonMeasure::new(
        vec![(0.2, 0.9)],
        PiecewiseFn::step(vec![0.0, 0.6], vec![1.3, 0.0]).unwrap(),
        1.0,
    )
    .unwrap()
}

fn value(delta: &PiecewiseFn, x: f64, y: f64, mu: &RadonMeasure) -> f64 {
    let mix = bridge_mixture(delta, x, y, 1.0, &SamplerOptions::default()).unwrap();
    bridge_laplace(delta, x, y, 1.0, mu, &mix).unwrap()
}

#[test]
fn constant_dimension_reversal() {
    let delta = PiecewiseFn::constant(1.4);
    let mu = lopsided();
    let back = mu.reverse(1.0).unwrap();
    for (x, y) in [(0.7, 1.9), (2.5, 0.3), (0.0, 1.1)] {
        let a = value(&delta, x, y, &mu);
        let b = value(&delta, y, x, &back);
        assert!((a - b).abs() < 1e-11 * a, "{x} {y}: {a} {b}");
    }
}
