//! Periodic-box discretization and spectral operators.
//!
//! The box is `[-L/2, L/2)` on each axis with `n` equispaced nodes. Fields are
//! stored row-major: in two dimensions node `(i, j)` lives at `i * n + j`, with
//! `i` indexing axis 0 and `j` axis 1.
//!
//! Transform convention: the forward DFT carries no prefactor and the inverse
//! carries `1 / n^dim`. The Laplacian has symbol `-|k|^2`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexField = Vec<Complex64>;

/// Serializable description of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    spacing: f64,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
    signed_freq: Vec<i64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive and finite, got {length}"
            )));
        }
        let spacing = length / n as f64;
        let coords = (0..n).map(|j| -0.5 * length + j as f64 * spacing).collect();
        let signed_freq: Vec<i64> = (0..n)
            .map(|m| {
                if m < n / 2 {
                    m as i64
                } else {
                    m as i64 - n as i64
                }
            })
            .collect();
        let wavenumbers = signed_freq
            .iter()
            .map(|&m| 2.0 * PI * m as f64 / length)
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Grid {
            dim,
            n,
            length,
            spacing,
            coords,
            wavenumbers,
            signed_freq,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        Grid::new(spec.dim, spec.n, spec.length)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            dim: self.dim,
            n: self.n,
            length: self.length,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Node coordinates along one axis.
    pub fn axis_coords(&self) -> &[f64] {
        &self.coords
    }

    /// Wavenumbers along one axis in FFT order.
    pub fn axis_wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    fn split(&self, idx: usize) -> (usize, usize) {
        if self.dim == 1 {
            (idx, 0)
        } else {
            (idx / self.n, idx % self.n)
        }
    }

    /// Position of node `idx`; the second entry is zero in one dimension.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.split(idx);
        if self.dim == 1 {
            [self.coords[i], 0.0]
        } else {
            [self.coords[i], self.coords[j]]
        }
    }

    pub fn radius_sq(&self, idx: usize) -> f64 {
        let [x, y] = self.position(idx);
        x * x + y * y
    }

    /// Wavevector of spectral index `idx`; the second entry is zero in one dimension.
    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.split(idx);
        if self.dim == 1 {
            [self.wavenumbers[i], 0.0]
        } else {
            [self.wavenumbers[i], self.wavenumbers[j]]
        }
    }

    pub fn k_squared(&self, idx: usize) -> f64 {
        let [kx, ky] = self.wavevector(idx);
        kx * kx + ky * ky
    }

    /// Largest absolute signed frequency over the axes of spectral index `idx`.
    pub(crate) fn max_abs_frequency(&self, idx: usize) -> u64 {
        let (i, j) = self.split(idx);
        let a = self.signed_freq[i].unsigned_abs();
        if self.dim == 1 {
            a
        } else {
            a.max(self.signed_freq[j].unsigned_abs())
        }
    }

    /// Samples `f` at every node.
    pub fn sample<T>(&self, mut f: impl FnMut([f64; 2]) -> T) -> Vec<T> {
        (0..self.len()).map(|idx| f(self.position(idx))).collect()
    }

    fn check_len(&self, len: usize) {
        assert_eq!(
            len,
            self.len(),
            "field length does not match the grid node count"
        );
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        self.check_len(data.len());
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        if self.dim == 1 {
            plan.process_with_scratch(data, &mut scratch);
            return;
        }
        let n = self.n;
        plan.process_with_scratch(data, &mut scratch);
        let mut transposed = vec![Complex64::default(); data.len()];
        transpose(data, &mut transposed, n);
        plan.process_with_scratch(&mut transposed, &mut scratch);
        transpose(&transposed, data, n);
    }

    /// Forward DFT in place, no prefactor.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse DFT in place, scaled by `1 / n^dim`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Applies the free Schrödinger group `exp(i dt Δ)` in place.
    pub fn free_propagate_in_place(&self, f: &mut [Complex64], dt: f64) {
        self.forward(f);
        for (idx, z) in f.iter_mut().enumerate() {
            *z *= Complex64::from_polar(1.0, -self.k_squared(idx) * dt);
        }
        self.inverse(f);
    }

    /// Fourier symbol `exp(-i |k|² dt)` of the free group, in spectral order.
    pub fn propagator(&self, dt: f64) -> ComplexField {
        (0..self.len())
            .map(|idx| Complex64::from_polar(1.0, -self.k_squared(idx) * dt))
            .collect()
    }

    /// Same as [`Grid::free_propagate_in_place`] with a precomputed symbol.
    pub fn propagate_with(&self, f: &mut [Complex64], symbol: &[Complex64]) {
        self.check_len(symbol.len());
        self.forward(f);
        f.iter_mut().zip(symbol).for_each(|(z, s)| *z *= s);
        self.inverse(f);
    }

    pub fn free_propagate(&self, f: &[Complex64], dt: f64) -> ComplexField {
        let mut out = f.to_vec();
        self.free_propagate_in_place(&mut out, dt);
        out
    }

    /// Spectral gradient, one field per axis.
    pub fn gradient(&self, f: &[Complex64]) -> Vec<ComplexField> {
        let mut hat = f.to_vec();
        self.forward(&mut hat);
        self.gradient_from_spectrum(&hat)
    }

    pub(crate) fn gradient_from_spectrum(&self, hat: &[Complex64]) -> Vec<ComplexField> {
        (0..self.dim)
            .map(|axis| {
                let mut d: ComplexField = hat
                    .iter()
                    .enumerate()
                    .map(|(idx, &z)| z * Complex64::new(0.0, self.wavevector(idx)[axis]))
                    .collect();
                self.inverse(&mut d);
                d
            })
            .collect()
    }

    /// Spectral gradient of a real field, one real field per axis.
    pub fn real_gradient(&self, f: &[f64]) -> Vec<Vec<f64>> {
        let as_complex: ComplexField = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.gradient(&as_complex)
            .into_iter()
            .map(|g| g.into_iter().map(|z| z.re).collect())
            .collect()
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self, f: &[Complex64]) -> ComplexField {
        let mut hat = f.to_vec();
        self.forward(&mut hat);
        for (idx, z) in hat.iter_mut().enumerate() {
            *z *= -self.k_squared(idx);
        }
        self.inverse(&mut hat);
        hat
    }

    /// Rectangle rule `Σ samples · spacing^dim`.
    pub fn quadrature(&self, samples: &[f64]) -> f64 {
        self.check_len(samples.len());
        samples.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn l2_norm_sq(&self, f: &[Complex64]) -> f64 {
        self.check_len(f.len());
        f.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    /// `∫|f|^2` computed from forward-transform coefficients (Parseval).
    pub fn spectral_norm_sq(&self, hat: &[Complex64]) -> f64 {
        self.check_len(hat.len());
        hat.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_volume() / self.len() as f64
    }

    /// `∫|∇f|^2` computed from forward-transform coefficients.
    pub fn spectral_gradient_norm_sq(&self, hat: &[Complex64]) -> f64 {
        self.check_len(hat.len());
        hat.iter()
            .enumerate()
            .map(|(idx, z)| self.k_squared(idx) * z.norm_sqr())
            .sum::<f64>()
            * self.cell_volume()
            / self.len() as f64
    }

    /// Fraction of `Σ|f̂|^2` carried by modes whose largest per-axis frequency
    /// exceeds two thirds of the Nyquist frequency. Zero for a zero field.
    pub fn spectral_tail_fraction(&self, hat: &[Complex64]) -> f64 {
        let (tail, total) = self.spectral_tail_parts(hat);
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    pub(crate) fn spectral_tail_parts(&self, hat: &[Complex64]) -> (f64, f64) {
        let cutoff = (self.n / 3) as u64;
        let mut tail = 0.0;
        let mut total = 0.0;
        for (idx, z) in hat.iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            if self.max_abs_frequency(idx) > cutoff {
                tail += e;
            }
        }
        (tail, total)
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}
