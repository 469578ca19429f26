//! Ground states of the coupled elliptic system
//! `-ΔP + P = (P^{2σ} + β P^{σ-1} Q^{σ+1}) P` (and the same with `P ↔ Q`),
//! and the sharp Gagliardo–Nirenberg constant they determine.
//!
//! The solver is Petviashvili's iteration: a fixed-point map on
//! `(1 - Δ)^{-1} N(P, Q)` with a stabilizing factor that removes the unstable
//! scaling direction, so it also converges in the mass-critical case.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `P = Q`, seeded with equal Gaussians.
    Symmetric,
    /// `Q ≡ 0`: the scalar ground state.
    SemiTrivial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub branch: Branch,
}

impl SolverOptions {
    pub fn new(tol: f64) -> Self {
        SolverOptions {
            tol,
            max_iter: 5000,
            branch: Branch::Symmetric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStatePair {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub beta: f64,
    pub sigma: f64,
    pub dim: usize,
    pub branch: Branch,
    pub residual_inf: f64,
    pub iterations: usize,
    pub l2_p: f64,
    pub l2_q: f64,
    pub k_opt: f64,
}

fn validate(sigma: f64, beta: f64, dim: usize, tol: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "σ must be positive, got {sigma}"
        )));
    }
    if dim > 2 && sigma >= 4.0 / (dim as f64 - 2.0) {
        return Err(Error::InvalidArgument(format!(
            "σ = {sigma} is not below 4/(N-2) for N = {dim}"
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "β must be nonnegative, got {beta}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

fn pow0(x: f64, p: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x.powf(p)
    }
}

/// `(a^{2σ} + β a^{σ-1} b^{σ+1}) a` for nonnegative `a`, `b`.
fn nonlinearity(sigma: f64, beta: f64, a: f64, b: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let mut m = pow0(a, 2.0 * sigma);
    if beta != 0.0 {
        m += beta * pow0(a, sigma - 1.0) * pow0(b, sigma + 1.0);
    }
    m * a
}

fn to_complex(f: &[f64]) -> Vec<Complex64> {
    f.iter().map(|x| Complex64::new(*x, 0.0)).collect()
}

struct Elliptic<'a> {
    grid: &'a Grid,
    sigma: f64,
    beta: f64,
    symbol: Vec<f64>,
}

impl Elliptic<'_> {
    fn spectrum(&self, f: &[f64]) -> Vec<Complex64> {
        let mut hat = to_complex(f);
        self.grid.forward(&mut hat);
        hat
    }

    fn nonlinear_terms(&self, p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let np = p
            .iter()
            .zip(q)
            .map(|(a, b)| nonlinearity(self.sigma, self.beta, *a, *b))
            .collect();
        let nq = q
            .iter()
            .zip(p)
            .map(|(a, b)| nonlinearity(self.sigma, self.beta, *a, *b))
            .collect();
        (np, nq)
    }

    /// Max-norm of `(1 - Δ) f - n` from spectra.
    fn residual(&self, f_hat: &[Complex64], n_hat: &[Complex64]) -> f64 {
        let mut r: Vec<Complex64> = f_hat
            .iter()
            .zip(n_hat)
            .zip(&self.symbol)
            .map(|((f, n), s)| f * s - n)
            .collect();
        self.grid.inverse(&mut r);
        r.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn apply_inverse(&self, n_hat: &[Complex64], scale: f64) -> Vec<f64> {
        let mut out: Vec<Complex64> = n_hat
            .iter()
            .zip(&self.symbol)
            .map(|(n, s)| n * (scale / s))
            .collect();
        self.grid.inverse(&mut out);
        out.iter().map(|z| z.re.max(0.0)).collect()
    }
}

/// Solves for a ground state on the symmetric branch.
pub fn solve_ground_state(sigma: f64, beta: f64, grid: &Grid, tol: f64) -> Result<GroundStatePair> {
    solve(sigma, beta, grid, &SolverOptions::new(tol))
}

pub fn solve(sigma: f64, beta: f64, grid: &Grid, opts: &SolverOptions) -> Result<GroundStatePair> {
    validate(sigma, beta, grid.dim(), opts.tol)?;
    let op = Elliptic {
        grid,
        sigma,
        beta,
        symbol: (0..grid.len()).map(|i| 1.0 + grid.k_squared(i)).collect(),
    };
    let seed: Vec<f64> = grid.sample(|[x, y]| (-(x * x + y * y)).exp());
    let mut p = seed.clone();
    let mut q = match opts.branch {
        Branch::Symmetric => seed,
        Branch::SemiTrivial => vec![0.0; grid.len()],
    };
    let gamma = (2.0 * sigma + 1.0) / (2.0 * sigma);
    let mass_floor = 1e-12 * grid.quadrature(&p.iter().map(|x| x * x).collect::<Vec<_>>());
    let mut trace = Vec::new();

    for iteration in 0..opts.max_iter {
        let (np, nq) = op.nonlinear_terms(&p, &q);
        let (p_hat, q_hat) = (op.spectrum(&p), op.spectrum(&q));
        let (np_hat, nq_hat) = (op.spectrum(&np), op.spectrum(&nq));
        let residual = op
            .residual(&p_hat, &np_hat)
            .max(op.residual(&q_hat, &nq_hat));
        trace.push(residual);
        if !residual.is_finite() {
            break;
        }
        if residual < opts.tol {
            return Ok(finish(
                grid,
                p,
                q,
                sigma,
                beta,
                opts.branch,
                residual,
                iteration,
            ));
        }
        let mut linear = 0.0;
        let mut nonlinear = 0.0;
        for i in 0..grid.len() {
            let s = op.symbol[i];
            linear += s * (p_hat[i].norm_sqr() + q_hat[i].norm_sqr());
            nonlinear += (p_hat[i].conj() * np_hat[i] + q_hat[i].conj() * nq_hat[i]).re;
        }
        if !(nonlinear > 0.0) {
            return Err(Error::ZeroSolution);
        }
        let scale = (linear / nonlinear).powf(gamma);
        p = op.apply_inverse(&np_hat, scale);
        q = op.apply_inverse(&nq_hat, scale);
        let mass = grid.quadrature(
            &p.iter()
                .zip(&q)
                .map(|(a, b)| a * a + b * b)
                .collect::<Vec<_>>(),
        );
        if mass < mass_floor {
            return Err(Error::ZeroSolution);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: trace.last().copied().unwrap_or(f64::NAN),
        trace,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    grid: &Grid,
    p: Vec<f64>,
    q: Vec<f64>,
    sigma: f64,
    beta: f64,
    branch: Branch,
    residual_inf: f64,
    iterations: usize,
) -> GroundStatePair {
    let l2 = |f: &[f64]| grid.quadrature(&f.iter().map(|x| x * x).collect::<Vec<_>>());
    let (l2_p, l2_q) = (l2(&p), l2(&q));
    GroundStatePair {
        k_opt: k_opt_from_mass(sigma, grid.dim(), l2_p + l2_q),
        p,
        q,
        beta,
        sigma,
        dim: grid.dim(),
        branch,
        residual_inf,
        iterations,
        l2_p,
        l2_q,
    }
}

/// `2(σ+1) / ((Nσ)^{Nσ/2} (2σ+2-Nσ)^{1-Nσ/2}) / m^σ` for total ground-state mass `m`.
pub fn k_opt_from_mass(sigma: f64, dim: usize, mass: f64) -> f64 {
    let ns = dim as f64 * sigma;
    2.0 * (sigma + 1.0)
        / (ns.powf(ns / 2.0) * (2.0 * sigma + 2.0 - ns).powf(1.0 - ns / 2.0))
        / mass.powf(sigma)
}

pub fn k_opt(gs: &GroundStatePair) -> f64 {
    k_opt_from_mass(gs.sigma, gs.dim, gs.l2_p + gs.l2_q)
}

/// Both branches and the larger of their constants, which is the one the
/// inequality can use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpConstant {
    pub symmetric: GroundStatePair,
    pub semi_trivial: GroundStatePair,
    pub k_opt: f64,
    pub extremal: Branch,
}

impl SharpConstant {
    pub fn extremizer(&self) -> &GroundStatePair {
        match self.extremal {
            Branch::Symmetric => &self.symmetric,
            Branch::SemiTrivial => &self.semi_trivial,
        }
    }
}

pub fn sharp_constant(
    sigma: f64,
    beta: f64,
    grid: &Grid,
    tol: f64,
    max_iter: usize,
) -> Result<SharpConstant> {
    let run = |branch| {
        solve(
            sigma,
            beta,
            grid,
            &SolverOptions {
                tol,
                max_iter,
                branch,
            },
        )
    };
    let symmetric = run(Branch::Symmetric)?;
    let semi_trivial = run(Branch::SemiTrivial)?;
    let (k_opt, extremal) = if symmetric.k_opt >= semi_trivial.k_opt {
        (symmetric.k_opt, Branch::Symmetric)
    } else {
        (semi_trivial.k_opt, Branch::SemiTrivial)
    };
    Ok(SharpConstant {
        symmetric,
        semi_trivial,
        k_opt,
        extremal,
    })
}

/// `(‖u‖^{2σ+2}_{2σ+2} + 2β‖uv‖^{σ+1}_{σ+1} + ‖v‖^{2σ+2}_{2σ+2}) /
/// ((‖u‖² + ‖v‖²)^{σ+1-σN/2} (‖∇u‖² + ‖∇v‖²)^{σN/2})`.
pub fn gn_ratio(
    grid: &Grid,
    u: &[Complex64],
    v: &[Complex64],
    beta: f64,
    sigma: f64,
) -> Result<f64> {
    if u.len() != grid.len() || v.len() != grid.len() {
        return Err(Error::InvalidArgument(
            "field length does not match the grid".into(),
        ));
    }
    let mass = grid.l2_norm_sq(u) + grid.l2_norm_sq(v);
    if !(mass > 0.0) {
        return Err(Error::InvalidArgument(
            "GN quotient of the zero pair".into(),
        ));
    }
    let grad = |f: &[Complex64]| {
        let mut hat = f.to_vec();
        grid.forward(&mut hat);
        grid.spectral_gradient_norm_sq(&hat)
    };
    let kinetic = grad(u) + grad(v);
    if !(kinetic > 0.0) {
        return Err(Error::InvalidArgument(
            "GN quotient of a constant pair".into(),
        ));
    }
    let dens: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(a, b)| {
            let (ma, mb) = (a.norm(), b.norm());
            pow0(ma, 2.0 * sigma + 2.0)
                + pow0(mb, 2.0 * sigma + 2.0)
                + 2.0 * beta * pow0(ma * mb, sigma + 1.0)
        })
        .collect();
    let ns = grid.dim() as f64 * sigma;
    Ok(grid.quadrature(&dens) / (mass.powf(sigma + 1.0 - ns / 2.0) * kinetic.powf(ns / 2.0)))
}

/// Mass bound `2 / (max(λ11, λ22) K)` below which mass-critical data exist globally.
pub fn critical_threshold(lambda11: f64, lambda22: f64, k: f64) -> Result<f64> {
    if !(lambda11 > 0.0 && lambda22 > 0.0 && k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold needs positive λ11, λ22 and K, got {lambda11}, {lambda22}, {k}"
        )));
    }
    Ok(2.0 / (lambda11.max(lambda22) * k))
}

/// `√λ11 ‖u‖² + √λ22 ‖v‖²`, the quantity compared against [`critical_threshold`].
pub fn weighted_mass(lambda11: f64, lambda22: f64, mass_u: f64, mass_v: f64) -> f64 {
    lambda11.max(0.0).sqrt() * mass_u + lambda22.max(0.0).sqrt() * mass_v
}
