//! Split-step time integration of the coupled system.
//!
//! One step is `N(dt/2) · L(dt) · W · N(dt/2)`: the pointwise nonlinear phase
//! rotation, free Schrödinger propagation in Fourier space, and the exact
//! Stratonovich noise phase. Each sub-step preserves the discrete mass of each
//! component.

use std::cell::RefCell;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{detect_blowup, DetectorConfig, Thresholds};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};
use crate::noise::{sample_increments, Component, NoiseModel, WienerIncrement};
use crate::observables::{self, Observables, StepRecord};

/// Below this modulus the nonlinear phase at a node is taken to be zero.
pub const VANISHING_MODULUS: f64 = 1e-300;

/// Nonlinearity exponent `σ` and interaction matrix `Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub sigma: f64,
    pub lambda: [[f64; 2]; 2],
}

impl Coupling {
    /// Validated coupling with `λ12 = λ21` required.
    pub fn new(sigma: f64, lambda: [[f64; 2]; 2], dim: usize) -> Result<Self> {
        let c = Coupling::with_asymmetry(sigma, lambda, dim)?;
        if !c.is_symmetric() {
            return Err(Error::InvalidCoupling(format!(
                "λ12 = {} and λ21 = {} differ; set allow_asymmetric to accept this",
                lambda[0][1], lambda[1][0]
            )));
        }
        Ok(c)
    }

    /// Validated coupling that accepts `λ12 != λ21` with a warning.
    pub fn with_asymmetry(sigma: f64, lambda: [[f64; 2]; 2], dim: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidCoupling(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidCoupling(format!(
                "σ must be positive, got {sigma}"
            )));
        }
        if let Some(max) = subcritical_bound(dim, 2.0) {
            if sigma >= max {
                return Err(Error::InvalidCoupling(format!(
                    "σ = {sigma} is not below 2/(N-2) = {max} for N = {dim}"
                )));
            }
        }
        if lambda.iter().flatten().any(|l| !l.is_finite()) {
            return Err(Error::InvalidCoupling("Λ has non-finite entries".into()));
        }
        let n = dim as f64;
        let upper = subcritical_bound(dim, 2.0).unwrap_or(f64::INFINITY);
        let covered = sigma < 2.0 / n || (sigma > 0.5 && sigma < upper);
        if !covered {
            log::warn!("σ = {sigma} lies outside the range with a local well-posedness theory for N = {dim}");
        }
        let c = Coupling { sigma, lambda };
        if !c.is_symmetric() {
            log::warn!(
                "asymmetric coupling λ12 = {}, λ21 = {}: the flow is not Hamiltonian",
                lambda[0][1],
                lambda[1][0]
            );
        }
        Ok(c)
    }

    /// Single focusing or defocusing equation in `u` with `v ≡ 0` in mind.
    pub fn scalar(sigma: f64, lambda11: f64, dim: usize) -> Result<Self> {
        Coupling::new(sigma, [[lambda11, 0.0], [0.0, 0.0]], dim)
    }

    pub fn is_symmetric(&self) -> bool {
        self.lambda[0][1] == self.lambda[1][0]
    }

    pub fn is_defocusing(&self) -> bool {
        self.lambda.iter().flatten().all(|l| *l <= 0.0)
    }

    /// Real multiplier of `u` in the nonlinear term at moduli `(|u|, |v|)`.
    pub fn u_multiplier(&self, mu: f64, mv: f64) -> f64 {
        multiplier(self.sigma, self.lambda[0][0], self.lambda[0][1], mu, mv)
    }

    /// Real multiplier of `v` in the nonlinear term at moduli `(|u|, |v|)`.
    pub fn v_multiplier(&self, mu: f64, mv: f64) -> f64 {
        multiplier(self.sigma, self.lambda[1][1], self.lambda[1][0], mv, mu)
    }
}

/// `2/(N-2)` for `N > 2`, unbounded otherwise.
pub(crate) fn subcritical_bound(dim: usize, numerator: f64) -> Option<f64> {
    (dim > 2).then(|| numerator / (dim as f64 - 2.0))
}

/// `λ_self |a|^{2σ} + λ_cross |b|^{σ+1} |a|^{σ-1}`, zero where `|a|` vanishes.
fn multiplier(sigma: f64, l_self: f64, l_cross: f64, a: f64, b: f64) -> f64 {
    if a < VANISHING_MODULUS {
        return 0.0;
    }
    let mut m = l_self * pow(a, 2.0 * sigma);
    if l_cross != 0.0 && b >= VANISHING_MODULUS {
        m += l_cross * pow(b, sigma + 1.0) * pow(a, sigma - 1.0);
    }
    m
}

/// `x^p`, with `powi` for small integer exponents.
fn pow(x: f64, p: f64) -> f64 {
    if p == p.trunc() && p.abs() <= 8.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// Both components on a shared grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub u: ComplexField,
    pub v: ComplexField,
    pub t: f64,
    /// Set when a step produced non-finite values; the fields then hold the
    /// last finite state.
    pub blown_up: bool,
}

impl SystemState {
    pub fn new(u: ComplexField, v: ComplexField) -> Self {
        SystemState {
            u,
            v,
            t: 0.0,
            blown_up: false,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        let z = vec![Complex64::default(); grid.len()];
        SystemState::new(z.clone(), z)
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.u.len() != grid.len() || self.v.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "state has {} and {} samples, grid has {}",
                self.u.len(),
                self.v.len(),
                grid.len()
            )));
        }
        if !self.blown_up && !self.is_finite() {
            return Err(Error::InvalidArgument(
                "state contains non-finite samples".into(),
            ));
        }
        Ok(())
    }

    /// Same fields with each component multiplied by a real factor.
    pub fn scaled(&self, su: f64, sv: f64) -> Self {
        SystemState {
            u: self.u.iter().map(|z| z * su).collect(),
            v: self.v.iter().map(|z| z * sv).collect(),
            ..self.clone()
        }
    }
}

/// Exact flow of the nonlinear sub-equation over `dt`.
pub fn nonlinear_phase_in_place(state: &mut SystemState, dt: f64, c: &Coupling) {
    for (u, v) in state.u.iter_mut().zip(state.v.iter_mut()) {
        let (mu, mv) = (u.norm(), v.norm());
        let pu = c.u_multiplier(mu, mv);
        let pv = c.v_multiplier(mu, mv);
        if pu != 0.0 {
            *u *= Complex64::from_polar(1.0, dt * pu);
        }
        if pv != 0.0 {
            *v *= Complex64::from_polar(1.0, dt * pv);
        }
    }
}

pub fn nonlinear_phase(state: &SystemState, dt: f64, c: &Coupling) -> SystemState {
    let mut out = state.clone();
    nonlinear_phase_in_place(&mut out, dt, c);
    out
}

/// The split-step integrator for one fixed problem. The free-flow symbol for
/// the most recent step size is cached.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    pub grid: &'a Grid,
    pub coupling: &'a Coupling,
    pub noise: &'a NoiseModel,
    symbol: RefCell<Option<(f64, ComplexField)>>,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a Grid, coupling: &'a Coupling, noise: &'a NoiseModel) -> Self {
        Stepper {
            grid,
            coupling,
            noise,
            symbol: RefCell::new(None),
        }
    }

    fn free_flow(&self, state: &mut SystemState, dt: f64) {
        let mut cache = self.symbol.borrow_mut();
        if cache.as_ref().is_none_or(|(h, _)| *h != dt) {
            *cache = Some((dt, self.grid.propagator(dt)));
        }
        let (_, symbol) = cache.as_ref().expect("filled above");
        self.grid.propagate_with(&mut state.u, symbol);
        self.grid.propagate_with(&mut state.v, symbol);
    }

    /// Advances by `dt` driven by `inc`. A negative `dt` runs the
    /// deterministic scheme backwards. Non-finite results restore the
    /// incoming fields and set `blown_up`.
    pub fn step(&self, state: &mut SystemState, dt: f64, inc: &WienerIncrement) -> Result<()> {
        self.noise.check_increment(inc)?;
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be nonzero, got {dt}"
            )));
        }
        if state.blown_up {
            return Ok(());
        }
        let backup = (state.u.clone(), state.v.clone());
        nonlinear_phase_in_place(state, 0.5 * dt, self.coupling);
        self.free_flow(state, dt);
        self.noise
            .stratonovich_phase_in_place(&mut state.u, Component::U, inc)?;
        self.noise
            .stratonovich_phase_in_place(&mut state.v, Component::V, inc)?;
        nonlinear_phase_in_place(state, 0.5 * dt, self.coupling);
        if state.is_finite() {
            state.t += dt;
        } else {
            state.u = backup.0;
            state.v = backup.1;
            state.blown_up = true;
        }
        Ok(())
    }

    /// Deterministic step with a zero increment.
    pub fn step_deterministic(&self, state: &mut SystemState, dt: f64) -> Result<()> {
        let inc = WienerIncrement::zero(self.noise.num_modes(), dt);
        self.step(state, dt, &inc)
    }
}

pub fn strang_step(
    grid: &Grid,
    state: &SystemState,
    dt: f64,
    noise: &NoiseModel,
    inc: &WienerIncrement,
    c: &Coupling,
) -> Result<SystemState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {dt}"
        )));
    }
    let mut out = state.clone();
    Stepper::new(grid, c, noise).step(&mut out, dt, inc)?;
    Ok(out)
}

/// Supplies the Brownian increment for each step.
pub trait IncrementSource {
    fn next_increment(&mut self, modes: usize, dt: f64) -> Result<WienerIncrement>;
}

/// Fresh Gaussian increments from a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct SeededIncrements {
    rng: ChaCha8Rng,
}

impl SeededIncrements {
    pub fn new(seed: u64) -> Self {
        SeededIncrements {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl IncrementSource for SeededIncrements {
    fn next_increment(&mut self, modes: usize, dt: f64) -> Result<WienerIncrement> {
        sample_increments(modes, dt, &mut self.rng)
    }
}

/// A stored fine-resolution Brownian path, replayable at coarser steps so
/// runs at different `dt` see the same realization.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    modes: usize,
    fine_dt: f64,
    increments: Vec<Vec<f64>>,
}

impl BrownianPath {
    pub fn sample(modes: usize, fine_dt: f64, steps: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let increments = (0..steps)
            .map(|_| sample_increments(modes, fine_dt, &mut rng).map(|w| w.db))
            .collect::<Result<_>>()?;
        Ok(BrownianPath {
            modes,
            fine_dt,
            increments,
        })
    }

    pub fn fine_dt(&self) -> f64 {
        self.fine_dt
    }

    pub fn fine_steps(&self) -> usize {
        self.increments.len()
    }

    /// Replays the path in steps of `factor` fine increments.
    pub fn coarsened(&self, factor: usize) -> Result<PathIncrements<'_>> {
        if factor == 0 {
            return Err(Error::InvalidArgument(
                "coarsening factor must be at least 1".into(),
            ));
        }
        Ok(PathIncrements {
            path: self,
            factor,
            position: 0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PathIncrements<'a> {
    path: &'a BrownianPath,
    factor: usize,
    position: usize,
}

impl IncrementSource for PathIncrements<'_> {
    fn next_increment(&mut self, modes: usize, dt: f64) -> Result<WienerIncrement> {
        if modes != self.path.modes {
            return Err(Error::IncrementMismatch {
                expected: modes,
                got: self.path.modes,
            });
        }
        let expected_dt = self.factor as f64 * self.path.fine_dt;
        if (dt - expected_dt).abs() > 1e-12 * expected_dt {
            return Err(Error::InvalidArgument(format!(
                "path replays steps of {expected_dt}, asked for {dt}"
            )));
        }
        let end = self.position + self.factor;
        if end > self.path.increments.len() {
            return Err(Error::InvalidArgument("Brownian path exhausted".into()));
        }
        let mut db = vec![0.0; modes];
        for fine in &self.path.increments[self.position..end] {
            for (acc, x) in db.iter_mut().zip(fine) {
                *acc += x;
            }
        }
        self.position = end;
        Ok(WienerIncrement { dt, db })
    }
}

/// Time stepping and recording controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    /// Keep per-step samples for the identity checks.
    pub track_identities: bool,
    pub detector: DetectorConfig,
}

impl EvolveOptions {
    pub fn new(t_final: f64, dt: f64) -> Self {
        EvolveOptions {
            t_final,
            dt,
            record_every: 1,
            track_identities: false,
            detector: DetectorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "t_final must be nonnegative, got {}",
                self.t_final
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        self.detector.validate()
    }

    /// Number of whole steps and the time left over when `T/dt` is not an integer.
    pub fn step_count(&self) -> (usize, f64) {
        let ratio = self.t_final / self.dt;
        let nearest = ratio.round();
        let steps = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest
        } else {
            ratio.floor()
        };
        let dropped = (self.t_final - steps * self.dt).max(0.0);
        (
            steps as usize,
            if dropped > 1e-12 * self.t_final {
                dropped
            } else {
                0.0
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// The detector fired at the first recorded time `t_star`.
    BlowUp {
        t_star: f64,
    },
    /// A step produced non-finite values without the detector firing.
    NonFinite {
        t: f64,
    },
}

impl Outcome {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Outcome::BlowUp { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub outcome: Outcome,
    pub rows: Vec<Observables>,
    pub identities: Option<StepRecord>,
    pub final_state: SystemState,
    pub steps_taken: usize,
    pub dropped_time: f64,
    pub thresholds: Thresholds,
}

/// Integrates from `s0` to `t_final`, checking the detector before every step.
pub fn evolve(
    grid: &Grid,
    s0: &SystemState,
    coupling: &Coupling,
    noise: &NoiseModel,
    opts: &EvolveOptions,
    increments: &mut dyn IncrementSource,
) -> Result<Trajectory> {
    opts.validate()?;
    s0.check(grid)?;
    if s0.blown_up {
        return Err(Error::InvalidArgument(
            "initial state is flagged as blown up".into(),
        ));
    }
    let (n_steps, dropped_time) = opts.step_count();
    if dropped_time > 0.0 {
        log::warn!("t_final is not a multiple of dt; the last {dropped_time:e} is dropped");
    }
    let stepper = Stepper::new(grid, coupling, noise);
    let mut state = s0.clone();
    state.t = 0.0;
    let thresholds = opts
        .detector
        .resolve(observables::diagnostics(grid, &state).grad_norm_sq);
    let mut rows = Vec::new();
    let mut record = opts.track_identities.then(StepRecord::default);
    let mut outcome = Outcome::Completed;
    let mut steps_taken = 0;

    for step in 0..=n_steps {
        state.t = step as f64 * opts.dt;
        let due = step % opts.record_every == 0 || step == n_steps;
        let fired = if let Some(rec) = record.as_mut() {
            let (obs, sample) =
                observables::measure_with_sample(grid, &state, coupling, noise, step);
            rec.samples.push(sample);
            let fired = detect_blowup(&obs.diagnostics(), &thresholds);
            if due || fired {
                rows.push(obs);
            }
            fired
        } else if due {
            let obs = observables::measure(grid, &state, coupling, step);
            rows.push(obs);
            detect_blowup(&obs.diagnostics(), &thresholds)
        } else {
            let fired = detect_blowup(&observables::diagnostics(grid, &state), &thresholds);
            if fired {
                rows.push(observables::measure(grid, &state, coupling, step));
            }
            fired
        };
        if fired {
            outcome = Outcome::BlowUp { t_star: state.t };
            break;
        }
        if step == n_steps {
            break;
        }
        let inc = increments.next_increment(noise.num_modes(), opts.dt)?;
        if let Some(rec) = record.as_mut() {
            if let Some(last) = rec.samples.last_mut() {
                last.increment = Some(inc.db.clone());
            }
        }
        stepper.step(&mut state, opts.dt, &inc)?;
        if state.blown_up {
            outcome = Outcome::NonFinite {
                t: (step + 1) as f64 * opts.dt,
            };
            if let Some(rec) = record.as_mut() {
                if let Some(last) = rec.samples.last_mut() {
                    last.increment = None;
                }
            }
            break;
        }
        steps_taken = step + 1;
    }
    Ok(Trajectory {
        outcome,
        rows,
        identities: record,
        final_state: state,
        steps_taken,
        dropped_time,
        thresholds,
    })
}

/// [`evolve`] driven by a fresh seeded increment stream.
pub fn evolve_seeded(
    grid: &Grid,
    s0: &SystemState,
    coupling: &Coupling,
    noise: &NoiseModel,
    opts: &EvolveOptions,
    seed: u64,
) -> Result<Trajectory> {
    evolve(
        grid,
        s0,
        coupling,
        noise,
        opts,
        &mut SeededIncrements::new(seed),
    )
}
