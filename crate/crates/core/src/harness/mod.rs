//! Configured runs: single trajectories, ensembles, threshold sweeps,
//! identity verification and criterion reports.

pub mod config;
mod ensemble;
pub mod io;
mod study;
mod verify;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use crate::detector::{detect_blowup, DetectorConfig, Thresholds};
use crate::dynamics::{evolve, Coupling, Outcome, SeededIncrements, SystemState, Trajectory};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::noise::NoiseModel;
use crate::observables::{
    criterion_caveats, criterion_sweep, energy_budget, negative_energy_h_bar, virial_residuals,
    CriterionInputs, CriterionVerdict, DriftKernel, Observables,
};
pub use config::{Problem, RunConfig};
pub use ensemble::{run_ensemble, wilson_interval, EnsembleResult, PathSummary};
use io::{create_dir, write_json, write_snapshot, write_trajectory_csv, RowResiduals};
pub use study::{threshold_study, ThresholdRow, ThresholdStudy};
pub use verify::{verify, Check, VerifyReport};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of ensemble path `p`: `splitmix64(master + golden·(p + 1))`.
pub fn path_seed(master: u64, path: u64) -> u64 {
    splitmix64(master.wrapping_add(GOLDEN.wrapping_mul(path.wrapping_add(1))))
}

/// How random numbers are produced, echoed into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub rng: String,
    pub normal: String,
    pub path_seed: String,
}

impl GeneratorInfo {
    pub fn current() -> Self {
        GeneratorInfo {
            rng: "ChaCha8Rng::seed_from_u64 (rand_chacha 0.9)".into(),
            normal: "rand_distr::StandardNormal scaled by sqrt(dt), modes in order".into(),
            path_seed:
                "splitmix64(seed + 0x9E3779B97F4A7C15 * (path + 1)); single runs use seed directly"
                    .into(),
        }
    }
}

/// Largest relative change of a column from its first value.
fn max_relative_drift(values: impl Iterator<Item = f64>) -> f64 {
    let mut first = None;
    let mut worst: f64 = 0.0;
    for v in values {
        let f = *first.get_or_insert(v);
        let d = (v - f).abs() / if f != 0.0 { f.abs() } else { 1.0 };
        worst = worst.max(d);
    }
    worst
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |a, v| a.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub mass_drift_u: f64,
    pub mass_drift_v: f64,
    pub max_residual_energy_paper: f64,
    pub max_residual_energy_gradient: f64,
    pub max_residual_v: f64,
    pub max_residual_g: f64,
    pub final_energy_martingale: f64,
    pub final_momentum_martingale: f64,
    pub final_drift_paper: f64,
    pub final_drift_gradient: f64,
}

/// Identity residuals for each recorded row, and their summary.
pub fn row_residuals(
    traj: &Trajectory,
    coupling: &Coupling,
    dim: usize,
) -> Result<Option<(Vec<RowResiduals>, IdentitySummary)>> {
    let Some(record) = &traj.identities else {
        return Ok(None);
    };
    let budget = energy_budget(record)?;
    let virial = virial_residuals(record, coupling, dim)?;
    let rows = traj
        .rows
        .iter()
        .map(|r| RowResiduals {
            energy_paper: budget.residual_paper[r.step],
            energy_gradient: budget.residual_gradient[r.step],
            v: virial.residual_v[r.step],
            g: virial.residual_g[r.step],
        })
        .collect();
    let last = |v: &[f64]| v.last().copied().unwrap_or(0.0);
    let summary = IdentitySummary {
        mass_drift_u: max_relative_drift(traj.rows.iter().map(|r| r.mass_u)),
        mass_drift_v: max_relative_drift(traj.rows.iter().map(|r| r.mass_v)),
        max_residual_energy_paper: max_abs(budget.residual(DriftKernel::Paper)),
        max_residual_energy_gradient: max_abs(budget.residual(DriftKernel::Gradient)),
        max_residual_v: max_abs(&virial.residual_v),
        max_residual_g: max_abs(&virial.residual_g),
        final_energy_martingale: last(&budget.martingale),
        final_momentum_martingale: last(&virial.martingale),
        final_drift_paper: last(&budget.drift_paper),
        final_drift_gradient: last(&budget.drift_gradient),
    };
    Ok(Some((rows, summary)))
}

/// Criterion evaluation for one set of initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub inputs: CriterionInputs,
    pub t_bar: f64,
    pub lhs: f64,
    pub predicts_blowup: bool,
    /// Most negative value over horizons in `(0, t_bar]`.
    pub best: CriterionVerdict,
    pub caveats: Vec<String>,
    /// Smallest `H̄` with `M̄ + 4t̄M̄ - 8t̄²H̄ + (4/3)t̄³ min‖F‖∞ M̄ < 0` at this mass.
    pub negative_energy_h_bar: f64,
}

pub fn criterion_report(
    grid: &Grid,
    state: &SystemState,
    coupling: &Coupling,
    noise: &NoiseModel,
    t_bar: f64,
) -> Result<CriterionReport> {
    let inputs = CriterionInputs::from_state(grid, state, coupling, noise);
    let verdict = crate::observables::blowup_criterion(&inputs, t_bar)?;
    let caveats = criterion_caveats(coupling, grid.dim());
    for c in &caveats {
        log::warn!("criterion: {c}");
    }
    Ok(CriterionReport {
        inputs,
        t_bar,
        lhs: verdict.lhs,
        predicts_blowup: verdict.predicts_blowup,
        best: criterion_sweep(&inputs, t_bar, 200)?,
        caveats,
        negative_energy_h_bar: negative_energy_h_bar(inputs.mass, t_bar, inputs.min_sup_f),
    })
}

/// Everything written by a single run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub generator: GeneratorInfo,
    pub outcome: Outcome,
    pub t_star: Option<f64>,
    pub steps_taken: usize,
    pub dropped_time: f64,
    pub thresholds: Thresholds,
    pub initial: Option<Observables>,
    pub last: Option<Observables>,
    pub identities: Option<IdentitySummary>,
    pub criterion: Option<CriterionReport>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: Outcome,
    pub trajectory: Trajectory,
    pub identities: Option<IdentitySummary>,
    pub trajectory_csv: PathBuf,
    pub manifest: PathBuf,
}

impl RunReport {
    /// 0 when the run completed, 2 when the detector fired, 3 on a numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self.outcome {
            Outcome::Completed => 0,
            Outcome::BlowUp { .. } => 2,
            Outcome::NonFinite { .. } => 3,
        }
    }
}

pub(crate) fn t_star(outcome: &Outcome) -> Option<f64> {
    match outcome {
        Outcome::BlowUp { t_star } => Some(*t_star),
        _ => None,
    }
}

/// Integrates one configured path and writes its trajectory CSV, manifest and
/// optional snapshots into the output directory.
pub fn run_single(cfg: &RunConfig) -> Result<RunReport> {
    let problem = cfg.build()?;
    let Problem {
        grid,
        coupling,
        noise,
        initial,
        options,
    } = &problem;
    let traj = evolve(
        grid,
        initial,
        coupling,
        noise,
        options,
        &mut SeededIncrements::new(cfg.run.seed),
    )?;
    let out = &cfg.run.output_dir;
    create_dir(out)?;
    let residuals = row_residuals(&traj, coupling, grid.dim())?;
    let (row_res, summary) = match residuals {
        Some((r, s)) => (r, Some(s)),
        None => (Vec::new(), None),
    };
    let csv_path = out.join("trajectory.csv");
    write_trajectory_csv(&csv_path, &traj.rows, &row_res)?;
    let mut files = vec!["trajectory.csv".to_string()];
    if cfg.run.snapshots {
        write_snapshot(&out.join("initial.bin"), grid, initial)?;
        write_snapshot(&out.join("final.bin"), grid, &traj.final_state)?;
        files.extend(["initial.bin", "initial.json", "final.bin", "final.json"].map(String::from));
    }
    let criterion = match &cfg.criterion {
        Some(c) => Some(criterion_report(grid, initial, coupling, noise, c.t_bar)?),
        None => None,
    };
    let manifest_path = out.join("manifest.json");
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        generator: GeneratorInfo::current(),
        outcome: traj.outcome,
        t_star: t_star(&traj.outcome),
        steps_taken: traj.steps_taken,
        dropped_time: traj.dropped_time,
        thresholds: traj.thresholds,
        initial: traj.rows.first().copied(),
        last: traj.rows.last().copied(),
        identities: summary.clone(),
        criterion,
        files,
    };
    write_json(&manifest_path, &manifest)?;
    Ok(RunReport {
        outcome: traj.outcome,
        trajectory: traj,
        identities: summary,
        trajectory_csv: csv_path,
        manifest: manifest_path,
    })
}

/// Writes the criterion report for the configured initial data.
pub fn run_criterion(cfg: &RunConfig, t_bar: f64) -> Result<(CriterionReport, PathBuf)> {
    if !(t_bar > 0.0 && t_bar.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_bar must be positive, got {t_bar}"
        )));
    }
    let p = cfg.build()?;
    let report = criterion_report(&p.grid, &p.initial, &p.coupling, &p.noise, t_bar)?;
    create_dir(&cfg.run.output_dir)?;
    let path = cfg.run.output_dir.join("criterion.json");
    write_json(&path, &report)?;
    Ok((report, path))
}

/// Radial profile rows `(r, P, Q)` along the positive first axis through the center.
pub fn radial_profile(grid: &Grid, p: &[f64], q: &[f64]) -> Vec<(f64, f64, f64)> {
    let n = grid.points_per_axis();
    let center = n / 2;
    let row = if grid.dim() == 2 { center * n } else { 0 };
    (center..n)
        .map(|i| {
            let idx = row + i;
            (grid.axis_coords()[i], p[idx], q[idx])
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchSummary {
    pub l2_p: f64,
    pub l2_q: f64,
    pub k_opt: f64,
    pub residual_inf: f64,
    pub iterations: usize,
}

impl From<&crate::groundstate::GroundStatePair> for BranchSummary {
    fn from(g: &crate::groundstate::GroundStatePair) -> Self {
        BranchSummary {
            l2_p: g.l2_p,
            l2_q: g.l2_q,
            k_opt: g.k_opt,
            residual_inf: g.residual_inf,
            iterations: g.iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundStateReport {
    pub sigma: f64,
    pub beta: f64,
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "l2_P")]
    pub l2_p: f64,
    #[serde(rename = "l2_Q")]
    pub l2_q: f64,
    pub k_opt: f64,
    pub residual_inf: f64,
    pub extremal_branch: crate::groundstate::Branch,
    pub symmetric: BranchSummary,
    pub semi_trivial: BranchSummary,
    pub grid: crate::grid::GridSpec,
}

/// Solves both branches and writes `groundstate.json` and `groundstate_profile.csv`.
pub fn run_groundstate(cfg: &RunConfig) -> Result<(GroundStateReport, Vec<PathBuf>)> {
    cfg.validate()?;
    let grid = Grid::from_spec(&cfg.grid)?;
    let gs = cfg.groundstate.clone().unwrap_or_default();
    let sc = crate::groundstate::sharp_constant(
        cfg.coupling.sigma,
        gs.beta,
        &grid,
        gs.tol,
        gs.max_iter,
    )?;
    let best = sc.extremizer();
    let report = GroundStateReport {
        sigma: cfg.coupling.sigma,
        beta: gs.beta,
        dim: grid.dim(),
        l2_p: best.l2_p,
        l2_q: best.l2_q,
        k_opt: sc.k_opt,
        residual_inf: best.residual_inf,
        extremal_branch: sc.extremal,
        symmetric: (&sc.symmetric).into(),
        semi_trivial: (&sc.semi_trivial).into(),
        grid: grid.spec(),
    };
    let out = &cfg.run.output_dir;
    create_dir(out)?;
    let json = out.join("groundstate.json");
    write_json(&json, &report)?;
    let sym = radial_profile(&grid, &sc.symmetric.p, &sc.symmetric.q);
    let semi = radial_profile(&grid, &sc.semi_trivial.p, &sc.semi_trivial.q);
    let rows: Vec<(f64, f64, f64, f64)> = sym
        .iter()
        .zip(&semi)
        .map(|(a, b)| (a.0, a.1, a.2, b.1))
        .collect();
    let csv = out.join("groundstate_profile.csv");
    io::write_csv(
        &csv,
        &rows,
        &["r", "P_symmetric", "Q_symmetric", "P_semi_trivial"],
    )?;
    Ok((report, vec![json, csv]))
}
