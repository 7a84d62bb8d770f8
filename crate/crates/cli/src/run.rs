//! Executes a parsed scenario and produces its table.

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;

use gbesq::finance::{
    default_curve, price_bond, sv_exact_step, BondRoute, McConfig, SvModel, SvState,
};
use gbesq::oracle::Estimate;
use gbesq::samplers::{par_draws, sample_bridge_integral, RngStream, SamplerOptions};
use gbesq::transforms::transition_laplace;

use crate::config::{ModelConfig, ScenarioConfig, TaskConfig};
use crate::error::{CliError, CliResult};
use crate::output::{write_artifacts, Cell, Manifest, Table, Versions};

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

/// What a run produced.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    /// `None` when nothing was written.
    pub csv: Option<PathBuf>,
}

/// Applies the overrides, computes the table and writes the CSV and its
/// manifest. Nothing is written unless the computation succeeds. A
/// `validate` run with failing criteria still writes its table, then
/// reports the failure.
pub fn run(mut cfg: ScenarioConfig, opts: &RunOptions, write: bool) -> CliResult<Outcome> {
    if let Some(seed) = opts.seed {
        cfg.numeric.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output.csv = Some(out.clone());
    }
    let start = Instant::now();
    let table = execute(&cfg)?;
    let csv = if write {
        let path = cfg.output.csv.clone().expect("filled in when parsed");
        let manifest = Manifest {
            command: cfg.task.name(),
            config: &cfg,
            seed: cfg.numeric.seed,
            threads: opts.threads,
            versions: Versions::current(),
            csv: &path,
            rows: table.rows.len(),
            wall_time_seconds: start.elapsed().as_secs_f64(),
        };
        write_artifacts(&table, &manifest, cfg.output.precision)?;
        Some(path)
    } else {
        None
    };
    if let TaskConfig::Validate { .. } = cfg.task {
        let failed = table
            .rows
            .iter()
            .filter(|r| r[2] == Cell::from("false"))
            .count();
        if failed > 0 {
            return Err(CliError::CriteriaFailed {
                failed,
                total: table.rows.len(),
            });
        }
    }
    Ok(Outcome { table, csv })
}

/// Computes the table of a scenario without touching the file system.
pub fn execute(cfg: &ScenarioConfig) -> CliResult<Table> {
    let n = &cfg.numeric;
    let sampler = n.sampler();
    let horizon = cfg.horizon();
    match &cfg.task {
        TaskConfig::Validate { criteria } => Ok(validate(criteria)),
        TaskConfig::Laplace { t, lambda } => laplace(model(cfg), *t, lambda, cfg),
        TaskConfig::SampleEndpoint { t } => {
            let m = model(cfg);
            let draws = par_draws(n.n_paths, n.seed, |rng| {
                m.adapter(horizon, rng)?.sample(*t, rng, &sampler)
            });
            let mut table = Table::new(vec!["path", "value"]);
            for (i, v) in draws.into_iter().enumerate() {
                table.push(vec![i.into(), v?.into()]);
            }
            Ok(table)
        }
        TaskConfig::SampleBridgeIntegral { x, y, t, mu } => {
            let spec = model(cfg).spec()?;
            let draws = par_draws(n.n_paths, n.seed, |rng| {
                sample_bridge_integral(spec.delta(), *x, *y, *t, mu, rng, &sampler)
            });
            let mut table = Table::new(vec!["path", "value"]);
            for (i, v) in draws.into_iter().enumerate() {
                table.push(vec![i.into(), v?.into()]);
            }
            Ok(table)
        }
        TaskConfig::PriceBond { maturities, routes } => {
            bonds(model(cfg), maturities, routes, cfg, &sampler)
        }
        TaskConfig::SimSv { mu, rho, s0, t } => {
            let vol = model(cfg).spec()?;
            let dt = t / n.n_steps as f64;
            let paths = par_draws(
                n.n_paths,
                n.seed,
                |rng| -> gbesq::Result<Vec<(f64, SvState)>> {
                    let mut out = Vec::with_capacity(n.n_steps);
                    let (mut s, mut v, mut integral) = (*s0, vol.x0(), 0.0);
                    for k in 0..n.n_steps {
                        let from = k as f64 * dt;
                        let step = SvModel::new(mu.shift(from), *rho, vol.shifted(from, v)?, s)?;
                        let st = sv_exact_step(&step, dt, rng, &sampler)?;
                        (s, v) = (st.s, st.v);
                        integral += st.integrated_variance;
                        let to = if k + 1 == n.n_steps { *t } else { from + dt };
                        out.push((
                            to,
                            SvState {
                                s,
                                v,
                                integrated_variance: integral,
                            },
                        ));
                    }
                    Ok(out)
                },
            );
            let mut table = Table::new(vec!["path", "t", "s", "v", "integrated_variance"]);
            for (i, path) in paths.into_iter().enumerate() {
                for (t, st) in path? {
                    table.push(vec![
                        i.into(),
                        t.into(),
                        st.s.into(),
                        st.v.into(),
                        st.integrated_variance.into(),
                    ]);
                }
            }
            Ok(table)
        }
        TaskConfig::SimDefault { grid, h } => {
            let spec = model(cfg).spec()?;
            let mc = McConfig {
                n_paths: n.n_paths,
                seed: n.seed,
                sampler,
            };
            let curve = default_curve(&spec, grid, *h, &mc)?;
            let mut table = Table::new(vec!["t", "value", "stderr", "route"]);
            for (i, &t) in curve.times.iter().enumerate() {
                table.push(vec![
                    t.into(),
                    curve.analytic[i].into(),
                    0.0.into(),
                    "analytic".into(),
                ]);
            }
            for (i, &t) in curve.times.iter().enumerate() {
                table.push(vec![
                    t.into(),
                    curve.empirical[i].into(),
                    curve.stderr[i].into(),
                    "monte-carlo".into(),
                ]);
            }
            Ok(table)
        }
    }
}

fn model(cfg: &ScenarioConfig) -> &ModelConfig {
    cfg.model.as_ref().expect("checked at parse time")
}

fn validate(criteria: &[u8]) -> Table {
    let ids: Vec<u8> = if criteria.is_empty() {
        gbesq::validation::ALL.to_vec()
    } else {
        criteria.to_vec()
    };
    let mut table = Table::new(vec!["id", "name", "passed", "seconds", "detail"]);
    for id in ids {
        let r = gbesq::validation::run(id).expect("checked at parse time");
        println!("{r}");
        table.push(vec![
            (r.id as usize).into(),
            r.name.into(),
            r.passed.to_string().into(),
            r.seconds.into(),
            r.detail.into(),
        ]);
    }
    table
}

/// `E[exp(−λV_t)]` for a model whose variable is linear in the GBESQ. With
/// a regime chain the value is averaged over `n_chains` drawn paths.
fn laplace(m: &ModelConfig, t: f64, lambda: &[f64], cfg: &ScenarioConfig) -> CliResult<Table> {
    let n = &cfg.numeric;
    let one = |rng: &mut RngStream| -> gbesq::Result<Vec<f64>> {
        let a = m.adapter(t, rng)?;
        let (clock, scale) = (a.gbesq_time(t), a.to_model(t, 1.0));
        lambda
            .iter()
            .map(|&l| transition_laplace(&a.gbesq, clock, l * scale))
            .collect()
    };
    let per_path = if m.has_chain() {
        par_draws(n.n_chains, n.seed, one)
    } else {
        vec![one(&mut RngStream::new(n.seed, 0))]
    };
    let per_path = per_path.into_iter().collect::<gbesq::Result<Vec<_>>>()?;
    let mut table = Table::new(vec!["lambda", "F", "stderr"]);
    for (j, &l) in lambda.iter().enumerate() {
        let e = summarize(per_path.iter().map(|v| v[j]).collect());
        table.push(vec![l.into(), e.value.into(), e.stderr.into()]);
    }
    Ok(table)
}

/// Bond prices by each route. With a regime chain every drawn path is
/// priced conditionally and the prices are averaged; the standard error is
/// then the spread across paths.
fn bonds(
    m: &ModelConfig,
    maturities: &[f64],
    routes: &[BondRoute],
    cfg: &ScenarioConfig,
    sampler: &SamplerOptions,
) -> CliResult<Table> {
    let n = &cfg.numeric;
    let horizon = *maturities.last().expect("nonempty");
    let one = |rng: &mut RngStream| -> gbesq::Result<Vec<(f64, f64)>> {
        let (regimes, r0) = m.regimes(horizon, rng)?;
        let inner_seed = if m.has_chain() {
            rng.random::<u64>()
        } else {
            n.seed
        };
        let mc = McConfig {
            n_paths: n.n_paths,
            seed: inner_seed,
            sampler: *sampler,
        };
        let mut out = Vec::with_capacity(routes.len() * maturities.len());
        for &route in routes {
            for &t in maturities {
                let q = price_bond(&regimes, r0, t, route, &mc)?;
                out.push((q.price, q.stderr));
            }
        }
        Ok(out)
    };
    let per_path = if m.has_chain() {
        par_draws(n.n_chains, n.seed, one)
    } else {
        vec![one(&mut RngStream::new(n.seed, 0))]
    };
    let per_path = per_path.into_iter().collect::<gbesq::Result<Vec<_>>>()?;
    let mut table = Table::new(vec!["t", "value", "stderr", "route"]);
    let mut k = 0;
    for &route in routes {
        let name = match route {
            BondRoute::Ode => "ode",
            BondRoute::MonteCarlo => "monte-carlo",
        };
        for &t in maturities {
            let (value, stderr) = if per_path.len() == 1 {
                per_path[0][k]
            } else {
                let e = summarize(per_path.iter().map(|v| v[k].0).collect());
                (e.value, e.stderr)
            };
            table.push(vec![t.into(), value.into(), stderr.into(), name.into()]);
            k += 1;
        }
    }
    Ok(table)
}

fn summarize(values: Vec<f64>) -> Estimate {
    if values.len() == 1 {
        Estimate {
            value: values[0],
            stderr: 0.0,
        }
    } else {
        Estimate::from_samples(&values)
    }
}
