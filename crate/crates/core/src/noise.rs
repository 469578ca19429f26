//! Finite-mode multiplicative noise.
//!
//! Each component `i` carries real modes `g_{i,k}` standing for `φ_i e_k`.
//! The cylindrical Wiener process is truncated to `K` independent Brownian
//! motions `B_k`, and the same increment vector drives both components.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModeFamily {
    /// Lowest real Fourier modes: `1, cos(2πm·x/L), sin(2πm·x/L), ...`
    #[default]
    Fourier,
    /// Spatially constant modes; the noise is a random global phase.
    Constant,
}

/// The `[noise]` section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Number of Brownian modes `K`.
    #[serde(rename = "K", alias = "modes")]
    pub modes: usize,
    #[serde(default)]
    pub family: ModeFamily,
    #[serde(default)]
    pub a0: f64,
    #[serde(default = "default_decay")]
    pub decay_p: f64,
    #[serde(default = "default_true")]
    pub shared_modes: bool,
    #[serde(default = "default_scale")]
    pub scale: [f64; 2],
}

fn default_decay() -> f64 {
    2.0
}

fn default_true() -> bool {
    true
}

fn default_scale() -> [f64; 2] {
    [1.0, 1.0]
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            modes: 0,
            family: ModeFamily::Fourier,
            a0: 0.0,
            decay_p: default_decay(),
            shared_modes: true,
            scale: default_scale(),
        }
    }
}

impl NoiseSpec {
    pub fn deterministic() -> Self {
        NoiseSpec::default()
    }

    /// Amplitude `a_k = a0 (1 + k)^(-p)`.
    pub fn amplitude(&self, k: usize) -> f64 {
        self.a0 * (1.0 + k as f64).powf(-self.decay_p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0.is_finite() && self.a0 >= 0.0) {
            return Err(Error::InvalidNoise(format!(
                "a0 must be a nonnegative finite amplitude, got {}",
                self.a0
            )));
        }
        if !self.decay_p.is_finite() || self.decay_p < 0.0 {
            return Err(Error::InvalidNoise(format!(
                "decay_p must be nonnegative, got {}",
                self.decay_p
            )));
        }
        if self.scale.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidNoise(format!(
                "per-component scales must be nonnegative, got {:?}",
                self.scale
            )));
        }
        if self.modes > 0 && self.decay_p < 2.0 {
            log::warn!(
                "decay_p = {} < 2: mode amplitudes decay slower than the default law",
                self.decay_p
            );
        }
        Ok(())
    }
}

/// One Brownian increment vector `ΔB_k` over a step of size `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub dt: f64,
    pub db: Vec<f64>,
}

impl WienerIncrement {
    pub fn zero(modes: usize, dt: f64) -> Self {
        WienerIncrement {
            dt,
            db: vec![0.0; modes],
        }
    }

    pub fn len(&self) -> usize {
        self.db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.db.is_empty()
    }
}

/// Draws `K` independent `N(0, dt)` samples.
pub fn sample_increments<R: Rng + ?Sized>(
    modes: usize,
    dt: f64,
    rng: &mut R,
) -> Result<WienerIncrement> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "increment step must be positive, got {dt}"
        )));
    }
    let sd = dt.sqrt();
    let db = (0..modes)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(WienerIncrement { dt, db })
}

#[derive(Debug, Clone)]
struct ComponentModes {
    modes: Vec<Vec<f64>>,
    /// Per mode, per axis.
    gradients: Vec<Vec<Vec<f64>>>,
    /// Per mode, `x · ∇g`.
    radial_derivative: Vec<Vec<f64>>,
    f_field: Vec<f64>,
    /// `Σ_k |∇g_k|²`.
    gradient_intensity: Vec<f64>,
    sup_f: f64,
    hs_h1_norm: f64,
}

impl ComponentModes {
    fn build(grid: &Grid, modes: Vec<Vec<f64>>) -> Result<Self> {
        let len = grid.len();
        for (k, m) in modes.iter().enumerate() {
            if m.len() != len {
                return Err(Error::InvalidNoise(format!(
                    "mode {k} has {} samples, grid has {len}",
                    m.len()
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidNoise(format!("mode {k} is not finite")));
            }
        }
        let gradients: Vec<Vec<Vec<f64>>> = modes.iter().map(|m| grid.real_gradient(m)).collect();
        let radial_derivative = gradients
            .iter()
            .map(|grad| {
                (0..len)
                    .map(|idx| {
                        let x = grid.position(idx);
                        grad.iter().enumerate().map(|(a, d)| x[a] * d[idx]).sum()
                    })
                    .collect()
            })
            .collect();
        let f_field = mode_square_sum(&modes, len);
        let gradient_intensity = mode_square_sum(
            &gradients.iter().flatten().cloned().collect::<Vec<_>>(),
            len,
        );
        let sup_f = f_field.iter().copied().fold(0.0, f64::max);
        let hs_h1_norm = modes
            .iter()
            .zip(&gradients)
            .map(|(m, grad)| {
                let l2 = grid.quadrature(&m.iter().map(|x| x * x).collect::<Vec<_>>());
                let h1: f64 = grad
                    .iter()
                    .map(|d| grid.quadrature(&d.iter().map(|x| x * x).collect::<Vec<_>>()))
                    .sum();
                l2 + h1
            })
            .sum();
        Ok(ComponentModes {
            modes,
            gradients,
            radial_derivative,
            f_field,
            gradient_intensity,
            sup_f,
            hs_h1_norm,
        })
    }
}

fn mode_square_sum(modes: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut f = vec![0.0; len];
    for m in modes {
        for (acc, x) in f.iter_mut().zip(m) {
            *acc += x * x;
        }
    }
    f
}

/// Real spatial noise modes for both components with the cached intensity
/// fields `F_i = Σ_k g_{i,k}^2`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    components: [ComponentModes; 2],
}

impl NoiseModel {
    /// Builds the model described by a noise section.
    pub fn build(spec: &NoiseSpec, grid: &Grid) -> Result<Self> {
        spec.validate()?;
        let shift = if spec.shared_modes {
            0.0
        } else {
            0.25 * grid.box_length()
        };
        let basis = |k: usize, offset: f64| -> Vec<f64> {
            match spec.family {
                ModeFamily::Constant => vec![1.0; grid.len()],
                ModeFamily::Fourier => fourier_mode(grid, k, offset),
            }
        };
        let modes_for = |component: usize, offset: f64| -> Vec<Vec<f64>> {
            (0..spec.modes)
                .map(|k| {
                    let a = spec.scale[component] * spec.amplitude(k);
                    basis(k, offset).into_iter().map(|x| a * x).collect()
                })
                .collect()
        };
        NoiseModel::from_modes(grid, modes_for(0, 0.0), modes_for(1, shift))
    }

    /// Builds a model from explicit real modes; both lists must have the same length.
    pub fn from_modes(grid: &Grid, first: Vec<Vec<f64>>, second: Vec<Vec<f64>>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::InvalidNoise(format!(
                "components have {} and {} modes; one Wiener process drives both",
                first.len(),
                second.len()
            )));
        }
        Ok(NoiseModel {
            components: [
                ComponentModes::build(grid, first)?,
                ComponentModes::build(grid, second)?,
            ],
        })
    }

    /// Same as [`NoiseModel::from_modes`] for complex samples, which must be real.
    pub fn from_complex_modes(
        grid: &Grid,
        first: &[Vec<Complex64>],
        second: &[Vec<Complex64>],
    ) -> Result<Self> {
        let to_real = |modes: &[Vec<Complex64>]| -> Result<Vec<Vec<f64>>> {
            modes
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    if m.iter().any(|z| z.im != 0.0) {
                        Err(Error::InvalidNoise(format!("mode {k} is not real-valued")))
                    } else {
                        Ok(m.iter().map(|z| z.re).collect())
                    }
                })
                .collect()
        };
        NoiseModel::from_modes(grid, to_real(first)?, to_real(second)?)
    }

    pub fn deterministic(grid: &Grid) -> Self {
        NoiseModel::from_modes(grid, Vec::new(), Vec::new()).expect("empty modes are valid")
    }

    /// Number of Brownian modes `K`.
    pub fn num_modes(&self) -> usize {
        self.components[0].modes.len()
    }

    pub fn is_deterministic(&self) -> bool {
        self.num_modes() == 0
    }

    fn comp(&self, component: Component) -> &ComponentModes {
        &self.components[component.index()]
    }

    pub fn modes(&self, component: Component) -> &[Vec<f64>] {
        &self.comp(component).modes
    }

    /// Spectral gradients of each mode, indexed `[mode][axis][node]`.
    pub fn mode_gradients(&self, component: Component) -> &[Vec<Vec<f64>>] {
        &self.comp(component).gradients
    }

    /// `x · ∇g_{i,k}` per mode.
    pub fn mode_radial_derivatives(&self, component: Component) -> &[Vec<f64>] {
        &self.comp(component).radial_derivative
    }

    /// The intensity field `F_i(x) = Σ_k g_{i,k}(x)^2`.
    pub fn f_field(&self, component: Component) -> &[f64] {
        &self.comp(component).f_field
    }

    /// `Σ_k |∇g_{i,k}(x)|²`.
    pub fn gradient_intensity(&self, component: Component) -> &[f64] {
        &self.comp(component).gradient_intensity
    }

    /// Discrete `‖F_i‖_∞`.
    pub fn sup_f(&self, component: Component) -> f64 {
        self.comp(component).sup_f
    }

    pub fn min_sup_f(&self) -> f64 {
        self.sup_f(Component::U).min(self.sup_f(Component::V))
    }

    /// `Σ_k ‖g_{i,k}‖²_{H¹}`.
    pub fn hs_h1_norm(&self, component: Component) -> f64 {
        self.comp(component).hs_h1_norm
    }

    /// Phase field `θ_i = Σ_k g_{i,k} ΔB_k`.
    pub fn phase_field(&self, component: Component, inc: &WienerIncrement) -> Result<Vec<f64>> {
        self.check_increment(inc)?;
        let modes = self.modes(component);
        let len = modes.first().map_or(0, Vec::len);
        let mut theta = vec![0.0; len];
        for (m, db) in modes.iter().zip(&inc.db) {
            for (t, g) in theta.iter_mut().zip(m) {
                *t += g * db;
            }
        }
        Ok(theta)
    }

    pub(crate) fn check_increment(&self, inc: &WienerIncrement) -> Result<()> {
        if inc.len() != self.num_modes() {
            return Err(Error::IncrementMismatch {
                expected: self.num_modes(),
                got: inc.len(),
            });
        }
        Ok(())
    }

    /// Pathwise-exact Stratonovich noise flow `i du = u ∘ φ_i dW` over one
    /// increment: pointwise multiplication by `exp(-i θ_i)`.
    pub fn stratonovich_phase_in_place(
        &self,
        f: &mut [Complex64],
        component: Component,
        inc: &WienerIncrement,
    ) -> Result<()> {
        self.check_increment(inc)?;
        if self.is_deterministic() {
            return Ok(());
        }
        let theta = self.phase_field(component, inc)?;
        for (z, th) in f.iter_mut().zip(theta) {
            *z *= Complex64::from_polar(1.0, -th);
        }
        Ok(())
    }

    pub fn stratonovich_phase(
        &self,
        f: &[Complex64],
        component: Component,
        inc: &WienerIncrement,
    ) -> Result<Vec<Complex64>> {
        let mut out = f.to_vec();
        self.stratonovich_phase_in_place(&mut out, component, inc)?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    U,
    V,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Component::U => 0,
            Component::V => 1,
        }
    }
}

/// Wavevectors of the real Fourier basis, lowest `|m|^2` first. In 1D these
/// are `m = 1, 2, ...`; in 2D the half plane `mx > 0 or (mx == 0 and my > 0)`.
fn fourier_wavevectors(dim: usize, count: usize) -> Vec<[i64; 2]> {
    if count == 0 {
        return Vec::new();
    }
    let mut radius = 1i64;
    loop {
        let mut v: Vec<[i64; 2]> = Vec::new();
        if dim == 1 {
            v.extend((1..=radius).map(|m| [m, 0]));
        } else {
            for mx in 0..=radius {
                for my in -radius..=radius {
                    if mx > 0 || my > 0 {
                        v.push([mx, my]);
                    }
                }
            }
        }
        v.sort_by_key(|m| (m[0] * m[0] + m[1] * m[1], m[0], m[1]));
        // Only entries inside the inscribed disc are guaranteed complete.
        v.retain(|m| m[0] * m[0] + m[1] * m[1] <= radius * radius);
        if v.len() >= count {
            v.truncate(count);
            return v;
        }
        radius *= 2;
    }
}

/// Mode `k` of the real Fourier family: `k = 0` is the constant, then a
/// `cos`, `sin` pair per wavevector.
fn fourier_mode(grid: &Grid, k: usize, offset: f64) -> Vec<f64> {
    if k == 0 {
        return vec![1.0; grid.len()];
    }
    let pair = (k - 1) / 2;
    let wv = fourier_wavevectors(grid.dim(), pair + 1)[pair];
    let base = 2.0 * PI / grid.box_length();
    let (kx, ky) = (base * wv[0] as f64, base * wv[1] as f64);
    let use_cos = (k - 1).is_multiple_of(2);
    grid.sample(|[x, y]| {
        let phase = kx * (x - offset) + ky * (y - offset);
        if use_cos {
            phase.cos()
        } else {
            phase.sin()
        }
    })
}
