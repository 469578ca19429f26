use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::io::{create_dir, write_json};
use crate::dynamics::{evolve, BrownianPath, EvolveOptions, Outcome};
use crate::error::Result;
use crate::observables::{energy_budget, virial_residuals, Observables, StepRecord};

/// Residuals below this are treated as round-off and carry no order information.
const FLOOR: f64 = 1e-11;
const MASS_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub energy_paper: f64,
    pub energy_gradient: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "G")]
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orders {
    pub energy_paper: Option<f64>,
    pub energy_gradient: Option<f64>,
    #[serde(rename = "V")]
    pub v: Option<f64>,
    #[serde(rename = "G")]
    pub g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub dt: f64,
    pub deterministic: bool,
    pub outcome: Outcome,
    /// Window over which the residuals are compared.
    pub t_end: f64,
    pub mass_drift: [f64; 2],
    /// Max-in-time absolute residuals at `dt`.
    pub residuals: Residuals,
    /// The same at `dt/2` on the same Brownian path.
    pub residuals_half: Residuals,
    pub energy_martingale: f64,
    pub momentum_martingale: f64,
    /// `log2` of the residual ratio between `dt` and `dt/2`.
    pub orders: Orders,
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

fn residuals_up_to(
    record: &StepRecord,
    t_end: f64,
    cfg: &RunConfig,
) -> Result<(Residuals, f64, f64)> {
    let coupling = cfg.coupling.build(cfg.grid.dim)?;
    let budget = energy_budget(record)?;
    let virial = virial_residuals(record, &coupling, cfg.grid.dim)?;
    let upto = |v: &[f64]| {
        v.iter()
            .zip(&budget.t)
            .filter(|(_, t)| **t <= t_end * (1.0 + 1e-12))
            .fold(0.0f64, |a, (x, _)| a.max(x.abs()))
    };
    Ok((
        Residuals {
            energy_paper: upto(&budget.residual_paper),
            energy_gradient: upto(&budget.residual_gradient),
            v: upto(&virial.residual_v),
            g: upto(&virial.residual_g),
        },
        budget.martingale.last().copied().unwrap_or(0.0),
        virial.martingale.last().copied().unwrap_or(0.0),
    ))
}

fn order(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > FLOOR && fine > FLOOR).then(|| (coarse / fine).log2())
}

fn mass_drift(rows: &[Observables]) -> [f64; 2] {
    let drift = |f: &dyn Fn(&Observables) -> f64| {
        let m0 = rows.first().map(f).unwrap_or(0.0);
        rows.iter()
            .map(|r| (f(r) - m0).abs() / if m0 > 0.0 { m0 } else { 1.0 })
            .fold(0.0, f64::max)
    };
    [drift(&|r| r.mass_u), drift(&|r| r.mass_v)]
}

/// Runs the configuration at `dt` and `dt/2` on one Brownian path with every
/// step recorded, evaluates all identities, and writes `verify.json`.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let problem = cfg.build()?;
    let dt = cfg.time.dt;
    let base = EvolveOptions {
        record_every: 1,
        track_identities: true,
        ..problem.options
    };
    let (n_steps, _) = base.step_count();
    let k = problem.noise.num_modes();
    let path = BrownianPath::sample(k, dt / 2.0, 2 * n_steps, cfg.run.seed)?;
    let run = |factor: usize| {
        let opts = EvolveOptions {
            dt: dt * factor as f64 / 2.0,
            t_final: n_steps as f64 * dt,
            ..base
        };
        evolve(
            &problem.grid,
            &problem.initial,
            &problem.coupling,
            &problem.noise,
            &opts,
            &mut path.coarsened(factor)?,
        )
    };
    let coarse = run(2)?;
    let fine = run(1)?;
    let end = |t: &crate::dynamics::Trajectory| t.rows.last().map_or(0.0, |r| r.t);
    let t_end = end(&coarse).min(end(&fine));
    let coarse_rec = coarse.identities.as_ref().expect("tracking is on");
    let fine_rec = fine.identities.as_ref().expect("tracking is on");
    let (r, energy_martingale, momentum_martingale) = residuals_up_to(coarse_rec, t_end, cfg)?;
    let (rh, _, _) = residuals_up_to(fine_rec, t_end, cfg)?;
    let orders = Orders {
        energy_paper: order(r.energy_paper, rh.energy_paper),
        energy_gradient: order(r.energy_gradient, rh.energy_gradient),
        v: order(r.v, rh.v),
        g: order(r.g, rh.g),
    };
    let deterministic = problem.noise.is_deterministic() || cfg.noise.a0 == 0.0;
    let min_order = if deterministic { 1.8 } else { 0.9 };
    let drift = mass_drift(&coarse.rows);
    let mut checks = vec![
        Check {
            name: "mass_u".into(),
            value: drift[0],
            limit: MASS_TOL,
            pass: drift[0] <= MASS_TOL,
        },
        Check {
            name: "mass_v".into(),
            value: drift[1],
            limit: MASS_TOL,
            pass: drift[1] <= MASS_TOL,
        },
    ];
    for (name, o) in [
        ("order_energy_gradient", orders.energy_gradient),
        ("order_V", orders.v),
        ("order_G", orders.g),
    ] {
        // Residuals at round-off pass without an order estimate.
        checks.push(Check {
            name: name.into(),
            value: o.unwrap_or(f64::NAN),
            limit: min_order,
            pass: o.is_none_or(|o| o >= min_order),
        });
    }
    let all_pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        dt,
        deterministic,
        outcome: coarse.outcome,
        t_end,
        mass_drift: drift,
        residuals: r,
        residuals_half: rh,
        energy_martingale,
        momentum_martingale,
        orders,
        checks,
        all_pass,
    };
    create_dir(&cfg.run.output_dir)?;
    write_json(&cfg.run.output_dir.join("verify.json"), &report)?;
    Ok(report)
}
