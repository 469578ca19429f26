use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Problem, RunConfig};
use super::io::{create_dir, write_csv, write_json, write_trajectory_csv, RowResiduals};
use super::{criterion_report, path_seed, t_star, GeneratorInfo};
use crate::dynamics::{evolve, EvolveOptions, Outcome, SeededIncrements, SystemState};
use crate::error::{Error, Result};
use crate::observables::CriterionInputs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path: usize,
    pub seed: u64,
    pub outcome: String,
    pub t_star: Option<f64>,
    pub t_end: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    #[serde(rename = "H")]
    pub hamiltonian: f64,
    #[serde(rename = "V")]
    pub variance: f64,
    #[serde(rename = "G")]
    pub momentum_g: f64,
    pub grad_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub n_paths: usize,
    pub blowup_count: usize,
    pub blowup_fraction: f64,
    /// Wilson score 95% interval for the blow-up probability.
    pub blowup_interval: [f64; 2],
    /// Over blown-up paths only.
    pub blowup_time_quantiles: Option<Quantiles>,
    pub invalid_count: usize,
    pub horizon: f64,
    pub criterion_t_bar: f64,
    pub criterion_lhs: f64,
    pub criterion_inputs: CriterionInputs,
    /// Means of the last recorded row over valid paths.
    pub mean_final: MeanFinal,
    pub generator: GeneratorInfo,
    #[serde(skip)]
    pub paths: Vec<PathSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFinal {
    pub mass: f64,
    #[serde(rename = "H")]
    pub hamiltonian: f64,
    #[serde(rename = "V")]
    pub variance: f64,
    #[serde(rename = "H_stderr")]
    pub hamiltonian_stderr: f64,
}

/// Wilson score interval at `z = 1.96`.
pub fn wilson_interval(successes: usize, n: usize) -> [f64; 2] {
    if n == 0 {
        return [0.0, 1.0];
    }
    let z: f64 = 1.959_963_984_540_054;
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    [(center - half).max(0.0), (center + half).min(1.0)]
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

struct PathRun {
    summary: PathSummary,
    valid: bool,
}

fn run_path(
    problem: &Problem,
    initial: &SystemState,
    opts: &EvolveOptions,
    master: u64,
    p: usize,
    trajectory_dir: Option<&PathBuf>,
) -> Result<PathRun> {
    let seed = path_seed(master, p as u64);
    let traj = evolve(
        &problem.grid,
        initial,
        &problem.coupling,
        &problem.noise,
        opts,
        &mut SeededIncrements::new(seed),
    )?;
    if let Some(dir) = trajectory_dir {
        let path = dir.join(format!("path_{p:05}.csv"));
        write_trajectory_csv(&path, &traj.rows, &[] as &[RowResiduals])?;
    }
    let last = traj
        .rows
        .last()
        .copied()
        .expect("evolve records the initial row");
    let outcome = match traj.outcome {
        Outcome::Completed => "completed",
        Outcome::BlowUp { .. } => "blowup",
        Outcome::NonFinite { .. } => "invalid",
    };
    Ok(PathRun {
        valid: !matches!(traj.outcome, Outcome::NonFinite { .. }),
        summary: PathSummary {
            path: p,
            seed,
            outcome: outcome.to_string(),
            t_star: t_star(&traj.outcome),
            t_end: last.t,
            mass_u: last.mass_u,
            mass_v: last.mass_v,
            hamiltonian: last.hamiltonian,
            variance: last.variance,
            momentum_g: last.momentum_g,
            grad_norm_sq: last.grad_norm_sq,
        },
    })
}

/// Runs `n_paths` independent paths on `workers` threads. The result does not
/// depend on the worker count.
pub fn simulate_ensemble(
    cfg: &RunConfig,
    problem: &Problem,
    initial: &SystemState,
    n_paths: usize,
    workers: usize,
    trajectory_dir: Option<&PathBuf>,
) -> Result<EnsembleResult> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument(
            "an ensemble needs at least one path".into(),
        ));
    }
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    let opts = EvolveOptions {
        track_identities: false,
        ..problem.options
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let runs: Vec<PathRun> = pool.install(|| {
        (0..n_paths)
            .into_par_iter()
            .map(|p| run_path(problem, initial, &opts, cfg.run.seed, p, trajectory_dir))
            .collect::<Result<Vec<_>>>()
    })?;

    let invalid_count = runs.iter().filter(|r| !r.valid).count();
    let mut times: Vec<f64> = runs.iter().filter_map(|r| r.summary.t_star).collect();
    let blowup_count = times.len();
    times.sort_by(f64::total_cmp);
    let blowup_time_quantiles = (!times.is_empty()).then(|| Quantiles {
        q10: quantile(&times, 0.1),
        q50: quantile(&times, 0.5),
        q90: quantile(&times, 0.9),
    });
    let valid: Vec<&PathSummary> = runs
        .iter()
        .filter(|r| r.valid)
        .map(|r| &r.summary)
        .collect();
    let k = valid.len().max(1) as f64;
    let mean_h = valid.iter().map(|s| s.hamiltonian).sum::<f64>() / k;
    let var_h = if valid.len() > 1 {
        valid
            .iter()
            .map(|s| (s.hamiltonian - mean_h).powi(2))
            .sum::<f64>()
            / (k - 1.0)
    } else {
        0.0
    };
    let t_bar = cfg.criterion_horizon();
    let crit = criterion_report(
        &problem.grid,
        initial,
        &problem.coupling,
        &problem.noise,
        t_bar,
    )?;
    Ok(EnsembleResult {
        n_paths,
        blowup_count,
        blowup_fraction: blowup_count as f64 / n_paths as f64,
        blowup_interval: wilson_interval(blowup_count, n_paths),
        blowup_time_quantiles,
        invalid_count,
        horizon: opts.t_final,
        criterion_t_bar: t_bar,
        criterion_lhs: crit.lhs,
        criterion_inputs: crit.inputs,
        mean_final: MeanFinal {
            mass: valid.iter().map(|s| s.mass_u + s.mass_v).sum::<f64>() / k,
            hamiltonian: mean_h,
            variance: valid.iter().map(|s| s.variance).sum::<f64>() / k,
            hamiltonian_stderr: (var_h / k).sqrt(),
        },
        generator: GeneratorInfo::current(),
        paths: runs.into_iter().map(|r| r.summary).collect(),
    })
}

const PATH_HEADER: [&str; 11] = [
    "path",
    "seed",
    "outcome",
    "t_star",
    "t_end",
    "mass_u",
    "mass_v",
    "H",
    "V",
    "G",
    "grad_norm_sq",
];

/// Runs the configured ensemble and writes `ensemble.json` and `paths.csv`.
/// More than 1% numerically invalid paths is an error, reported after the
/// outputs are written.
pub fn run_ensemble(cfg: &RunConfig, n_paths: usize, workers: usize) -> Result<EnsembleResult> {
    let problem = cfg.build()?;
    let out = &cfg.run.output_dir;
    create_dir(out)?;
    let traj_dir = if cfg.run.path_trajectories {
        let d = out.join("paths");
        create_dir(&d)?;
        Some(d)
    } else {
        None
    };
    let result = simulate_ensemble(
        cfg,
        &problem,
        &problem.initial,
        n_paths,
        workers,
        traj_dir.as_ref(),
    )?;
    write_json(&out.join("ensemble.json"), &result)?;
    write_csv(&out.join("paths.csv"), &result.paths, &PATH_HEADER)?;
    if result.invalid_count * 100 > n_paths {
        return Err(Error::InvalidPaths {
            invalid: result.invalid_count,
            total: n_paths,
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_examples() {
        let [lo, hi] = wilson_interval(0, 32);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.1072).abs() < 1e-4);
        let [lo, hi] = wilson_interval(8, 8);
        assert!((lo - 0.6756).abs() < 1e-4);
        assert!((hi - 1.0).abs() < 1e-12);
        let [lo, hi] = wilson_interval(5, 10);
        assert!((lo - 0.2366).abs() < 1e-4 && (hi - 0.7634).abs() < 1e-4);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert!((quantile(&xs, 0.1) - 1.4).abs() < 1e-12);
        assert!((quantile(&xs, 0.9) - 4.6).abs() < 1e-12);
        assert_eq!(quantile(&[2.5], 0.9), 2.5);
    }
}
