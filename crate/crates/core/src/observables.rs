//! Monitored functionals and the evolution identities they satisfy.
//!
//! Mass `M`, Hamiltonian `H`, variance `V` and momentum `G` are evaluated with
//! spectral gradients and rectangle-rule quadrature. [`momentum_g`] uses the
//! ordering `Im ∫ u x·∇ū`; the identities below are written in terms of the
//! virial momentum `Gv = Im ∫ ū x·∇u = -G`, which is the quantity with
//! `dV/dt = 4 Gv`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Coupling, SystemState};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};
use crate::noise::{Component, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mass {
    pub u: f64,
    pub v: f64,
    pub total: f64,
}

pub fn mass(grid: &Grid, state: &SystemState) -> Mass {
    let u = grid.l2_norm_sq(&state.u);
    let v = grid.l2_norm_sq(&state.v);
    Mass { u, v, total: u + v }
}

/// Quantities the blow-up detector looks at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `‖∇u‖² + ‖∇v‖²`.
    pub grad_norm_sq: f64,
    /// Share of spectral energy in the top third of wavenumbers.
    pub spectral_tail_fraction: f64,
}

fn spectrum(grid: &Grid, f: &[Complex64]) -> ComplexField {
    let mut hat = f.to_vec();
    grid.forward(&mut hat);
    hat
}

fn diagnostics_from_spectra(grid: &Grid, u_hat: &[Complex64], v_hat: &[Complex64]) -> Diagnostics {
    let grad_norm_sq =
        grid.spectral_gradient_norm_sq(u_hat) + grid.spectral_gradient_norm_sq(v_hat);
    let (tu, eu) = grid.spectral_tail_parts(u_hat);
    let (tv, ev) = grid.spectral_tail_parts(v_hat);
    let total = eu + ev;
    Diagnostics {
        grad_norm_sq,
        spectral_tail_fraction: if total > 0.0 { (tu + tv) / total } else { 0.0 },
    }
}

pub fn diagnostics(grid: &Grid, state: &SystemState) -> Diagnostics {
    diagnostics_from_spectra(grid, &spectrum(grid, &state.u), &spectrum(grid, &state.v))
}

/// One row of a trajectory record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub step: usize,
    pub t: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub hamiltonian: f64,
    pub variance: f64,
    /// `G = Im ∫ u x·∇ū + v x·∇v̄`.
    pub momentum_g: f64,
    pub grad_norm_sq: f64,
    pub spectral_tail_fraction: f64,
}

impl Observables {
    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            grad_norm_sq: self.grad_norm_sq,
            spectral_tail_fraction: self.spectral_tail_fraction,
        }
    }

    pub fn mass(&self) -> f64 {
        self.mass_u + self.mass_v
    }

    pub fn virial_momentum(&self) -> f64 {
        -self.momentum_g
    }
}

/// `|u|^p` with `0^p = 0` for any `p`, including `p <= 0`.
fn pow_abs(m: f64, p: f64) -> f64 {
    if m < crate::dynamics::VANISHING_MODULUS {
        0.0
    } else {
        m.powf(p)
    }
}

/// Per-node potential density `λ11|u|^{2σ+2} + λ22|v|^{2σ+2} + 2λ_off|u|^{σ+1}|v|^{σ+1}`.
fn potential_density(c: &Coupling, mu: f64, mv: f64, off_diagonal: f64) -> f64 {
    let s = c.sigma;
    let [[l11, _], [_, l22]] = c.lambda;
    let pu = pow_abs(mu, s + 1.0);
    let pv = pow_abs(mv, s + 1.0);
    l11 * pu * pu + l22 * pv * pv + 2.0 * off_diagonal * pu * pv
}

/// `∫ λ11|u|^{2σ+2} + λ22|v|^{2σ+2} + 2λ12|u|^{σ+1}|v|^{σ+1}`, the potential part of `H`.
pub fn potential_integral(grid: &Grid, state: &SystemState, c: &Coupling) -> f64 {
    let dens: Vec<f64> = state
        .u
        .iter()
        .zip(&state.v)
        .map(|(a, b)| potential_density(c, a.norm(), b.norm(), c.lambda[0][1]))
        .collect();
    grid.quadrature(&dens)
}

/// Coupling integral of the momentum identity, which carries `λ21`.
pub fn interaction_integral(grid: &Grid, state: &SystemState, c: &Coupling) -> f64 {
    let dens: Vec<f64> = state
        .u
        .iter()
        .zip(&state.v)
        .map(|(a, b)| potential_density(c, a.norm(), b.norm(), c.lambda[1][0]))
        .collect();
    grid.quadrature(&dens)
}

pub fn hamiltonian(grid: &Grid, state: &SystemState, c: &Coupling) -> f64 {
    let u_hat = spectrum(grid, &state.u);
    let v_hat = spectrum(grid, &state.v);
    let kinetic = grid.spectral_gradient_norm_sq(&u_hat) + grid.spectral_gradient_norm_sq(&v_hat);
    0.5 * kinetic - potential_integral(grid, state, c) / (2.0 + 2.0 * c.sigma)
}

/// Share of `M` carried by nodes in the outer 5% shell of the box.
pub fn boundary_mass_fraction(grid: &Grid, state: &SystemState) -> f64 {
    let edge = 0.45 * grid.box_length();
    let mut shell = 0.0;
    let mut total = 0.0;
    for idx in 0..grid.len() {
        let m = state.u[idx].norm_sqr() + state.v[idx].norm_sqr();
        total += m;
        let [x, y] = grid.position(idx);
        if x.abs() > edge || y.abs() > edge {
            shell += m;
        }
    }
    if total > 0.0 {
        shell / total
    } else {
        0.0
    }
}

fn variance_unchecked(grid: &Grid, state: &SystemState) -> f64 {
    let dens: Vec<f64> = (0..grid.len())
        .map(|idx| grid.radius_sq(idx) * (state.u[idx].norm_sqr() + state.v[idx].norm_sqr()))
        .collect();
    grid.quadrature(&dens)
}

/// `V = ∫|x|²(|u|²+|v|²)`. Logs a warning when mass reaches the box edge.
pub fn variance(grid: &Grid, state: &SystemState) -> f64 {
    let frac = boundary_mass_fraction(grid, state);
    if frac > 1e-8 {
        log::warn!("variance: {frac:.3e} of the mass sits at the box boundary");
    }
    variance_unchecked(grid, state)
}

fn momentum_from_gradients(grid: &Grid, f: &[Complex64], grads: &[ComplexField]) -> f64 {
    let dens: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let x = grid.position(idx);
            let x_dot_grad_conj: Complex64 = grads
                .iter()
                .enumerate()
                .map(|(a, g)| x[a] * g[idx].conj())
                .sum();
            (f[idx] * x_dot_grad_conj).im
        })
        .collect();
    grid.quadrature(&dens)
}

/// `G = Im ∫ u x·∇ū + v x·∇v̄`.
pub fn momentum_g(grid: &Grid, state: &SystemState) -> f64 {
    momentum_from_gradients(grid, &state.u, &grid.gradient(&state.u))
        + momentum_from_gradients(grid, &state.v, &grid.gradient(&state.v))
}

/// `Gv = Im ∫ ū x·∇u + v̄ x·∇v = -G`.
pub fn virial_momentum(grid: &Grid, state: &SystemState) -> f64 {
    -momentum_g(grid, state)
}

struct ComponentView<'a> {
    field: &'a [Complex64],
    hat: ComplexField,
    grads: Vec<ComplexField>,
}

impl<'a> ComponentView<'a> {
    fn new(grid: &Grid, field: &'a [Complex64]) -> Self {
        let hat = spectrum(grid, field);
        let grads = grid.gradient_from_spectrum(&hat);
        ComponentView { field, hat, grads }
    }
}

fn observables_from_views(
    grid: &Grid,
    state: &SystemState,
    step: usize,
    c: &Coupling,
    u: &ComponentView,
    v: &ComponentView,
) -> Observables {
    let m = mass(grid, state);
    let diag = diagnostics_from_spectra(grid, &u.hat, &v.hat);
    let hamiltonian =
        0.5 * diag.grad_norm_sq - potential_integral(grid, state, c) / (2.0 + 2.0 * c.sigma);
    Observables {
        step,
        t: state.t,
        mass_u: m.u,
        mass_v: m.v,
        hamiltonian,
        variance: variance_unchecked(grid, state),
        momentum_g: momentum_from_gradients(grid, u.field, &u.grads)
            + momentum_from_gradients(grid, v.field, &v.grads),
        grad_norm_sq: diag.grad_norm_sq,
        spectral_tail_fraction: diag.spectral_tail_fraction,
    }
}

/// All monitored quantities of a state.
pub fn measure(grid: &Grid, state: &SystemState, c: &Coupling, step: usize) -> Observables {
    let u = ComponentView::new(grid, &state.u);
    let v = ComponentView::new(grid, &state.v);
    observables_from_views(grid, state, step, c, &u, &v)
}

/// Left-point data for the identity checks, recorded once per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSample {
    pub step: usize,
    pub t: f64,
    pub hamiltonian: f64,
    pub variance: f64,
    pub virial_momentum: f64,
    /// `∫ λ11|u|^{2σ+2} + λ22|v|^{2σ+2} + 2λ21|u|^{σ+1}|v|^{σ+1}`.
    pub interaction: f64,
    /// `½∫ |u|²F1 + |v|²F2 + 2|uv|√(F1F2)`.
    pub kernel_paper: f64,
    /// `½ Σ_k ∫ |u|²|∇g_{1,k}|² + |v|²|∇g_{2,k}|²`.
    pub kernel_gradient: f64,
    /// Per mode: `-Im ∫ ū∇u·∇g_{1,k} + v̄∇v·∇g_{2,k}`, the `dB_k` coefficient of `dH`.
    pub energy_integrands: Vec<f64>,
    /// Per mode: `-∫ |u|² x·∇g_{1,k} + |v|² x·∇g_{2,k}`, the `dB_k` coefficient of `dGv`.
    pub momentum_integrands: Vec<f64>,
    /// The increment that drove the step leaving this sample; absent on the last sample.
    pub increment: Option<Vec<f64>>,
}

fn energy_integrand(grid: &Grid, view: &ComponentView, mode_grad: &[Vec<f64>]) -> f64 {
    let dens: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let conj = view.field[idx].conj();
            mode_grad
                .iter()
                .zip(&view.grads)
                .map(|(dg, du)| (conj * du[idx]).im * dg[idx])
                .sum::<f64>()
        })
        .collect();
    -grid.quadrature(&dens)
}

fn momentum_integrand(grid: &Grid, field: &[Complex64], radial: &[f64]) -> f64 {
    let dens: Vec<f64> = field
        .iter()
        .zip(radial)
        .map(|(z, r)| z.norm_sqr() * r)
        .collect();
    -grid.quadrature(&dens)
}

/// Measures a state and its identity integrands in one pass.
pub(crate) fn measure_with_sample(
    grid: &Grid,
    state: &SystemState,
    c: &Coupling,
    noise: &NoiseModel,
    step: usize,
) -> (Observables, StepSample) {
    let u = ComponentView::new(grid, &state.u);
    let v = ComponentView::new(grid, &state.v);
    let obs = observables_from_views(grid, state, step, c, &u, &v);

    let (mut paper, mut gradient) = (0.0, 0.0);
    let mut energy_integrands = Vec::with_capacity(noise.num_modes());
    let mut momentum_integrands = Vec::with_capacity(noise.num_modes());
    if !noise.is_deterministic() {
        let f1 = noise.f_field(Component::U);
        let f2 = noise.f_field(Component::V);
        let gi1 = noise.gradient_intensity(Component::U);
        let gi2 = noise.gradient_intensity(Component::V);
        let mut dp = Vec::with_capacity(grid.len());
        let mut dg = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let au = state.u[idx].norm_sqr();
            let av = state.v[idx].norm_sqr();
            dp.push(au * f1[idx] + av * f2[idx] + 2.0 * (au * av * f1[idx] * f2[idx]).sqrt());
            dg.push(au * gi1[idx] + av * gi2[idx]);
        }
        paper = 0.5 * grid.quadrature(&dp);
        gradient = 0.5 * grid.quadrature(&dg);
        let g1 = noise.mode_gradients(Component::U);
        let g2 = noise.mode_gradients(Component::V);
        let r1 = noise.mode_radial_derivatives(Component::U);
        let r2 = noise.mode_radial_derivatives(Component::V);
        for k in 0..noise.num_modes() {
            energy_integrands
                .push(energy_integrand(grid, &u, &g1[k]) + energy_integrand(grid, &v, &g2[k]));
            momentum_integrands.push(
                momentum_integrand(grid, &state.u, &r1[k])
                    + momentum_integrand(grid, &state.v, &r2[k]),
            );
        }
    }
    let sample = StepSample {
        step,
        t: state.t,
        hamiltonian: obs.hamiltonian,
        variance: obs.variance,
        virial_momentum: obs.virial_momentum(),
        interaction: interaction_integral(grid, state, c),
        kernel_paper: paper,
        kernel_gradient: gradient,
        energy_integrands,
        momentum_integrands,
        increment: None,
    };
    (obs, sample)
}

/// Recorded step samples with the increments that connect them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub samples: Vec<StepSample>,
}

impl StepRecord {
    fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::MissingIncrements);
        }
        let last = self.samples.len() - 1;
        for (i, s) in self.samples.iter().enumerate() {
            if i < last {
                match &s.increment {
                    Some(db) if db.len() == s.energy_integrands.len() => {}
                    Some(db) => {
                        return Err(Error::IncrementMismatch {
                            expected: s.energy_integrands.len(),
                            got: db.len(),
                        })
                    }
                    None => return Err(Error::MissingIncrements),
                }
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Running Itô sum `Σ_j Σ_k a_k(t_j) ΔB_k(j)` with left-point coefficients.
    fn ito_sum(&self, coeffs: impl Fn(&StepSample) -> &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.samples.len());
        let mut acc = 0.0;
        out.push(0.0);
        for s in &self.samples[..self.samples.len() - 1] {
            let db = s.increment.as_deref().unwrap_or(&[]);
            acc += coeffs(s).iter().zip(db).map(|(a, b)| a * b).sum::<f64>();
            out.push(acc);
        }
        out
    }

    /// Running trapezoid integral of a sampled quantity.
    fn trapezoid(&self, f: impl Fn(&StepSample) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.samples.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.samples.windows(2) {
            acc += 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1]));
            out.push(acc);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftKernel {
    /// `½∫ |u|²F1 + |v|²F2 + 2|uv|√(F1F2)`.
    Paper,
    /// `½ Σ_k ∫ |u|²|∇g_{1,k}|² + |v|²|∇g_{2,k}|²`.
    Gradient,
}

/// Energy identity residuals for both drift kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub t: Vec<f64>,
    pub martingale: Vec<f64>,
    pub drift_paper: Vec<f64>,
    pub drift_gradient: Vec<f64>,
    pub residual_paper: Vec<f64>,
    pub residual_gradient: Vec<f64>,
}

impl EnergyBudget {
    pub fn residual(&self, kernel: DriftKernel) -> &[f64] {
        match kernel {
            DriftKernel::Paper => &self.residual_paper,
            DriftKernel::Gradient => &self.residual_gradient,
        }
    }

    pub fn final_residual(&self, kernel: DriftKernel) -> f64 {
        *self.residual(kernel).last().expect("budget is never empty")
    }
}

/// `residual(t) = H(t) - H(0) - martingale(t) - drift(t)` for each kernel.
pub fn energy_budget(record: &StepRecord) -> Result<EnergyBudget> {
    record.validate()?;
    let h0 = record.samples[0].hamiltonian;
    let martingale = record.ito_sum(|s| &s.energy_integrands);
    let drift_paper = record.trapezoid(|s| s.kernel_paper);
    let drift_gradient = record.trapezoid(|s| s.kernel_gradient);
    let residual = |drift: &[f64]| -> Vec<f64> {
        record
            .samples
            .iter()
            .zip(&martingale)
            .zip(drift)
            .map(|((s, m), d)| s.hamiltonian - h0 - m - d)
            .collect()
    };
    Ok(EnergyBudget {
        t: record.times(),
        residual_paper: residual(&drift_paper),
        residual_gradient: residual(&drift_gradient),
        martingale,
        drift_paper,
        drift_gradient,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirialResiduals {
    pub t: Vec<f64>,
    /// `V(t) - V(0) - 4∫Gv ds`.
    pub residual_v: Vec<f64>,
    /// `Gv(t) - Gv(0) - 4∫H ds - (2-σN)/(σ+1) ∫(interaction) ds - martingale`.
    pub residual_g: Vec<f64>,
    pub martingale: Vec<f64>,
}

impl VirialResiduals {
    pub fn final_v(&self) -> f64 {
        *self.residual_v.last().expect("never empty")
    }

    pub fn final_g(&self) -> f64 {
        *self.residual_g.last().expect("never empty")
    }
}

/// Drift coefficient `(2 - σN)/(σ + 1)` of the momentum identity.
pub fn momentum_drift_coefficient(sigma: f64, dim: usize) -> f64 {
    (2.0 - sigma * dim as f64) / (sigma + 1.0)
}

pub fn virial_residuals(record: &StepRecord, c: &Coupling, dim: usize) -> Result<VirialResiduals> {
    record.validate()?;
    let first = &record.samples[0];
    let coef = momentum_drift_coefficient(c.sigma, dim);
    let int_g = record.trapezoid(|s| s.virial_momentum);
    let int_h = record.trapezoid(|s| s.hamiltonian);
    let int_i = record.trapezoid(|s| s.interaction);
    let martingale = record.ito_sum(|s| &s.momentum_integrands);
    let mut residual_v = Vec::with_capacity(record.samples.len());
    let mut residual_g = Vec::with_capacity(record.samples.len());
    for (i, s) in record.samples.iter().enumerate() {
        residual_v.push(s.variance - first.variance - 4.0 * int_g[i]);
        residual_g.push(
            s.virial_momentum
                - first.virial_momentum
                - 4.0 * int_h[i]
                - coef * int_i[i]
                - martingale[i],
        );
    }
    Ok(VirialResiduals {
        t: record.times(),
        residual_v,
        residual_g,
        martingale,
    })
}

/// Initial-data expectations entering the blow-up polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionInputs {
    pub variance: f64,
    /// Virial momentum `Gv` (the quantity with `V' = 4Gv`).
    pub virial_momentum: f64,
    pub hamiltonian: f64,
    pub mass: f64,
    /// `min_i ‖F_i‖_∞`.
    pub min_sup_f: f64,
}

impl CriterionInputs {
    pub fn from_state(grid: &Grid, state: &SystemState, c: &Coupling, noise: &NoiseModel) -> Self {
        let obs = measure(grid, state, c, 0);
        CriterionInputs {
            variance: obs.variance,
            virial_momentum: obs.virial_momentum(),
            hamiltonian: obs.hamiltonian,
            mass: obs.mass(),
            min_sup_f: noise.min_sup_f(),
        }
    }

    /// `V + 4Gv t + 8H t² + (4/3) t³ min‖F‖∞ M`.
    pub fn lhs(&self, t_bar: f64) -> f64 {
        self.variance
            + 4.0 * self.virial_momentum * t_bar
            + 8.0 * self.hamiltonian * t_bar * t_bar
            + 4.0 / 3.0 * t_bar.powi(3) * self.min_sup_f * self.mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub t_bar: f64,
    pub lhs: f64,
    /// `lhs < 0`: blow-up before `t_bar` has positive probability.
    pub predicts_blowup: bool,
}

pub fn blowup_criterion(inputs: &CriterionInputs, t_bar: f64) -> Result<CriterionVerdict> {
    if !(t_bar > 0.0 && t_bar.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "criterion horizon must be positive, got {t_bar}"
        )));
    }
    let lhs = inputs.lhs(t_bar);
    Ok(CriterionVerdict {
        t_bar,
        lhs,
        predicts_blowup: lhs < 0.0,
    })
}

/// Evaluates the criterion on `samples` evenly spaced horizons in `(0, t_max]`
/// and returns the most negative one.
pub fn criterion_sweep(
    inputs: &CriterionInputs,
    t_max: f64,
    samples: usize,
) -> Result<CriterionVerdict> {
    let samples = samples.max(1);
    let mut best: Option<CriterionVerdict> = None;
    for i in 1..=samples {
        let v = blowup_criterion(inputs, t_max * i as f64 / samples as f64)?;
        if best.is_none_or(|b| v.lhs < b.lhs) {
            best = Some(v);
        }
    }
    Ok(best.expect("at least one horizon"))
}

/// Reasons the verdict may not be meaningful for this coupling.
pub fn criterion_caveats(c: &Coupling, dim: usize) -> Vec<String> {
    let mut out = Vec::new();
    let sn = c.sigma * dim as f64;
    if sn < 2.0 {
        out.push(format!(
            "σN = {sn} < 2: the criterion covers only critical or supercritical nonlinearities"
        ));
    }
    // Above criticality the dropped interaction term is -(σN-2)·∫λ|u|^{2σ+2}
    // times a positive factor, which is nonpositive only for focusing coupling.
    let focusing = c.lambda.iter().flatten().all(|l| *l >= 0.0);
    if sn > 2.0 && !focusing {
        out.push(
            "σN > 2 with a negative coupling entry: the interaction term has no sign".to_string(),
        );
    }
    if !c.is_symmetric() {
        out.push("asymmetric coupling: no energy identity holds".to_string());
    }
    out
}

/// Negative-energy set condition `M + 4tM - 8t²H + (4/3)t³ min‖F‖∞ M < 0`.
pub fn negative_energy_condition(
    m_bar: f64,
    h_bar: f64,
    t_bar: f64,
    min_sup_f: f64,
) -> (f64, bool) {
    let lhs = m_bar + 4.0 * t_bar * m_bar - 8.0 * t_bar * t_bar * h_bar
        + 4.0 / 3.0 * t_bar.powi(3) * min_sup_f * m_bar;
    (lhs, lhs < 0.0)
}

/// Smallest `H̄` for which [`negative_energy_condition`] holds (strictly above it).
pub fn negative_energy_h_bar(m_bar: f64, t_bar: f64, min_sup_f: f64) -> f64 {
    (m_bar + 4.0 * t_bar * m_bar + 4.0 / 3.0 * t_bar.powi(3) * min_sup_f * m_bar)
        / (8.0 * t_bar * t_bar)
}
