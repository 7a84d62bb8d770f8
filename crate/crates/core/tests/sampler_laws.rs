//! Distributional checks of the exact samplers against transforms.

use gbesq::samplers::{
    bridge_mixture, empirical_laplace, par_draws, sample_bridge_integral, sample_skeleton,
    SamplerOptions, SkeletonIntegrals, SkeletonPoint,
};
use gbesq::time::{PiecewiseFn, RadonMeasure};
use gbesq::transforms::{bridge_laplace, functional_laplace, transition_laplace, GbesqSpec};

fn within(got: (f64, f64), want: f64, k: f64) {
    assert!(
        (got.0 - want).abs() < k * got.1,
        "{} ± {} vs {want}",
        got.0,
        got.1
    );
}

/// A skeleton whose steps straddle a dimension knot reproduces the
/// unconditioned laws of the endpoint and of the integral.
#[test]
fn skeleton_across_a_dimension_knot() {
    let delta = PiecewiseFn::step(vec![0.0, 0.5], vec![2.0, 3.0]).unwrap();
    let spec = GbesqSpec::driftless(delta, 0.5).unwrap();
    let opts = SamplerOptions::default();
    let paths: Vec<Vec<SkeletonPoint>> = par_draws(4000, 21, |rng| {
        sample_skeleton(&spec, &[0.3, 1.0], SkeletonIntegrals::Lebesgue, rng, &opts).unwrap()
    });
    let ends: Vec<f64> = paths.iter().map(|p| p[1].x).collect();
    let totals: Vec<f64> = paths
        .iter()
        .map(|p| p.iter().filter_map(|q| q.integral).sum())
        .collect();
    within(
        empirical_laplace(&ends, 0.4),
        transition_laplace(&spec, 1.0, 0.4f64).unwrap(),
        4.0,
    );
    let mu = RadonMeasure::lebesgue(0.5, 1.0).unwrap();
    within(
        empirical_laplace(&totals, 0.5),
        functional_laplace(&spec, &mu).unwrap(),
        4.0,
    );
}

/// With a measure carrying an atom on a skeleton time, the atom is counted
/// once.
#[test]
fn skeleton_with_atom_on_a_grid_time() {
    let spec = GbesqSpec::constant(1.5, 1.0).unwrap();
    let mu = RadonMeasure::new(vec![(0.5, 0.7)], PiecewiseFn::constant(0.4), 1.0).unwrap();
    let opts = SamplerOptions::default();
    let totals: Vec<f64> = par_draws(4000, 22, |rng| {
        let p = sample_skeleton(
            &spec,
            &[0.5, 1.0],
            SkeletonIntegrals::Measure(&mu),
            rng,
            &opts,
        )
        .unwrap();
        p.iter().filter_map(|q| q.integral).sum()
    });
    within(
        empirical_laplace(&totals, 1.0),
        functional_laplace(&spec, &mu).unwrap(),
        4.0,
    );
}

/// Direct draws on the inversion route agree with its transform.
#[test]
fn bridge_draws_across_a_dimension_jump() {
    let delta = PiecewiseFn::step(vec![0.0, 0.4], vec![1.0, 3.0]).unwrap();
    let (x, y, t) = (1.0, 1.5, 1.0);
    let mu = RadonMeasure::lebesgue(1.0, t).unwrap();
    let opts = SamplerOptions::default();
    let draws: Vec<f64> = par_draws(400, 23, |rng| {
        sample_bridge_integral(&delta, x, y, t, &mu, rng, &opts).unwrap()
    });
    let mix = bridge_mixture(&delta, x, y, t, &opts).unwrap();
    let want = bridge_laplace(
        &delta,
        x,
        y,
        t,
        &RadonMeasure::lebesgue(0.5, t).unwrap(),
        &mix,
    )
    .unwrap();
    within(empirical_laplace(&draws, 0.5), want, 4.0);
}
