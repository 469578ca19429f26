use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::ensemble::simulate_ensemble;
use super::io::{create_dir, write_csv, write_json};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::groundstate::{critical_threshold, sharp_constant, weighted_mass};
use crate::observables::{mass, CriterionInputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    /// `√λ11‖u0‖² + √λ22‖v0‖²`.
    pub mass_combination: f64,
    pub ratio_to_threshold: f64,
    pub n_paths: usize,
    pub blowup_fraction: f64,
    pub criterion_lhs: f64,
    /// `"global-regime"` below the threshold, empty otherwise.
    pub regime: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStudy {
    pub k_opt: f64,
    pub threshold: f64,
    pub t_bar: f64,
    pub rows: Vec<ThresholdRow>,
}

const HEADER: [&str; 6] = [
    "mass_combination",
    "ratio_to_threshold",
    "n_paths",
    "blowup_fraction",
    "criterion_lhs",
    "regime",
];

/// Rescales the configured initial data to each target mass combination,
/// runs an ensemble there, and writes `threshold.csv` and `threshold.json`.
/// Only mass-critical couplings (`σN = 2`) are accepted.
pub fn threshold_study(
    cfg: &RunConfig,
    masses: &[f64],
    n_paths: usize,
    workers: usize,
) -> Result<ThresholdStudy> {
    let dim = cfg.grid.dim;
    let sigma = cfg.coupling.sigma;
    if (sigma * dim as f64 - 2.0).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "threshold study needs σN = 2, got σ = {sigma}, N = {dim}"
        )));
    }
    let [[l11, _], [_, l22]] = cfg.coupling.lambda;
    if !(l11 > 0.0 && l22 > 0.0) {
        return Err(Error::Config(
            "threshold study needs λ11 > 0 and λ22 > 0".into(),
        ));
    }
    if masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::Config("target masses must be positive".into()));
    }
    let problem = cfg.build()?;
    let out: PathBuf = cfg.run.output_dir.clone();
    create_dir(&out)?;
    let t_bar = cfg.criterion_horizon();

    let gs = cfg.groundstate.clone().unwrap_or_default();
    let (k_opt, threshold) = if masses.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let gs_grid = Grid::from_spec(&cfg.grid)?;
        let k = sharp_constant(sigma, gs.beta, &gs_grid, gs.tol, gs.max_iter)?.k_opt;
        (k, critical_threshold(l11, l22, k)?)
    };

    let m0 = mass(&problem.grid, &problem.initial);
    let base = weighted_mass(l11, l22, m0.u, m0.v);
    if !masses.is_empty() && !(base > 0.0) {
        return Err(Error::Config(
            "initial data have zero mass and cannot be rescaled".into(),
        ));
    }
    let mut rows = Vec::with_capacity(masses.len());
    for &target in masses {
        let s = (target / base).sqrt();
        let initial = problem.initial.scaled(s, s);
        let result = simulate_ensemble(cfg, &problem, &initial, n_paths, workers, None)?;
        let lhs =
            CriterionInputs::from_state(&problem.grid, &initial, &problem.coupling, &problem.noise)
                .lhs(t_bar);
        rows.push(ThresholdRow {
            mass_combination: target,
            ratio_to_threshold: target / threshold,
            n_paths,
            blowup_fraction: result.blowup_fraction,
            criterion_lhs: lhs,
            regime: if target < threshold {
                "global-regime".into()
            } else {
                String::new()
            },
        });
    }
    write_csv(&out.join("threshold.csv"), &rows, &HEADER)?;
    let study = ThresholdStudy {
        k_opt,
        threshold,
        t_bar,
        rows,
    };
    write_json(&out.join("threshold.json"), &study)?;
    Ok(study)
}
