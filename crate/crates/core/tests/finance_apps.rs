use gbesq::adapters::RegimePath;
use gbesq::finance::{price_bond, sv_exact_step, BondRoute, McConfig, SvModel};
use gbesq::samplers::{empirical_laplace, par_draws, RngStream, SamplerOptions};
use gbesq::time::{PiecewiseFn, RadonMeasure};
use gbesq::transforms::{functional_laplace, GbesqSpec};

fn vol() -> GbesqSpec {
    GbesqSpec::driftless(
        PiecewiseFn::step(vec![0.0, 0.5], vec![2.0, 3.0]).unwrap(),
        0.5,
    )
    .unwrap()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn steps(model: &SvModel, t: f64, seed: u64, n: usize) -> Vec<(f64, f64)> {
    let opts = SamplerOptions::default();
    par_draws(n, seed, |rng| {
        let st = sv_exact_step(model, t, rng, &opts).unwrap();
        ((st.s / model.s0()).ln(), st.v)
    })
}

#[test]
fn uncorrelated_log_return_mean() {
    let mu = PiecewiseFn::constant(0.05);
    let model = SvModel::new(mu, 0.0, vol(), 1.0).unwrap();
    let logs: Vec<f64> = steps(&model, 1.0, 41, 4000)
        .into_iter()
        .map(|p| p.0)
        .collect();
    let h = 1e-6;
    let e_int =
        (1.0 - functional_laplace(&vol(), &RadonMeasure::lebesgue(h, 1.0).unwrap()).unwrap()) / h;
    let (m, se) = mean_se(&logs);
    assert!(
        (m - (0.05 - 0.5 * e_int)).abs() < 4.0 * se,
        "{m} ± {se} vs {}",
        0.05 - 0.5 * e_int
    );
}

#[test]
fn driftless_spot_is_a_martingale() {
    for (rho, seed) in [(0.0, 42), (-0.5, 43)] {
        let model = SvModel::new(PiecewiseFn::constant(0.0), rho, vol(), 2.0).unwrap();
        let spots: Vec<f64> = steps(&model, 1.0, seed, 4000)
            .into_iter()
            .map(|p| 2.0 * p.0.exp())
            .collect();
        let (m, se) = mean_se(&spots);
        assert!((m - 2.0).abs() < 4.0 * se, "ρ={rho}: {m} ± {se}");
    }
}

/// Two chained half steps have the law of one full step.
#[test]
fn chained_steps_match_one_step() {
    let mu = PiecewiseFn::step(vec![0.0, 0.3], vec![0.02, 0.08]).unwrap();
    let (rho, t) = (-0.6, 1.0);
    let model = SvModel::new(mu.clone(), rho, vol(), 1.0).unwrap();
    let one = steps(&model, t, 44, 3000);
    let opts = SamplerOptions::default();
    let two: Vec<(f64, f64)> = par_draws(3000, 45, |rng: &mut RngStream| {
        let a = sv_exact_step(&model, 0.5 * t, rng, &opts).unwrap();
        let rest = SvModel::new(
            mu.shift(0.5 * t),
            rho,
            vol().shifted(0.5 * t, a.v).unwrap(),
            a.s,
        )
        .unwrap();
        let b = sv_exact_step(&rest, 0.5 * t, rng, &opts).unwrap();
        (b.s.ln(), b.v)
    });
    for f in [|p: &(f64, f64)| p.1, |p: &(f64, f64)| (p.0 + 1.0).max(0.0)] {
        let a: Vec<f64> = one.iter().map(f).collect();
        let b: Vec<f64> = two.iter().map(f).collect();
        let (ea, sa) = empirical_laplace(&a, 0.8);
        let (eb, sb) = empirical_laplace(&b, 0.8);
        assert!(
            (ea - eb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(),
            "{ea} ± {sa} vs {eb} ± {sb}"
        );
    }
}

#[test]
fn bond_prices_fall_with_maturity() {
    let r = RegimePath::new(
        vec![0.0, 0.7, 1.5],
        vec![0, 1, 0],
        vec![0.04, 0.08],
        vec![0.2, 0.4],
    )
    .unwrap();
    let mc = McConfig::new(2, 0);
    let prices: Vec<f64> = (1..=12)
        .map(|k| {
            price_bond(&r, 0.03, 0.25 * k as f64, BondRoute::Ode, &mc)
                .unwrap()
                .price
        })
        .collect();
    assert!(prices.iter().all(|&p| p > 0.0 && p <= 1.0));
    assert!(prices.windows(2).all(|w| w[1] < w[0]));
}
