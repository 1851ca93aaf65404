//! One-dimensional lattice model of the extended space spanned by `|r, p⟩`.
//!
//! Grids are centred: `r_j = (j - M/2) Δr` and `p_k = (k - M/2) Δp` with
//! `Δp = 2πħ / (M Δr)`. The transform pair is
//!
//! ```text
//! ξ_k = Δr / √(2πħ) Σ_j Ψ_j exp(-i p_k r_j / ħ)
//! Ψ_j = Δp / √(2πħ) Σ_k ξ_k exp(+i p_k r_j / ħ)
//! ```
//!
//! and a lifted state has coefficients `C(r_j, p_k) = ξ_k exp(i p_k r_j / ħ) / √(2πħ)`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORM_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    pub dr: f64,
    pub hbar: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self { points: 256, dr: 1.0, hbar: 1.0 }
    }
}

impl Grid {
    pub fn new(points: usize, dr: f64, hbar: f64) -> Result<Self> {
        let g = Self { points, dr, hbar };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 || !self.points.is_power_of_two() {
            return Err(Error::GridSize(self.points));
        }
        if !(self.dr > 0.0 && self.dr.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {}", self.dr)));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {}", self.hbar)));
        }
        Ok(())
    }

    pub fn dp(&self) -> f64 {
        2.0 * PI * self.hbar / (self.points as f64 * self.dr)
    }

    pub fn r(&self, j: usize) -> f64 {
        (j as f64 - (self.points / 2) as f64) * self.dr
    }

    pub fn p(&self, k: usize) -> f64 {
        (k as f64 - (self.points / 2) as f64) * self.dp()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.r(j)).collect()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.p(k)).collect()
    }

    /// `exp(i p_k r_j / ħ)`.
    fn phase(&self, j: usize, k: usize) -> Complex64 {
        // p_k r_j / ħ = 2π (k - M/2)(j - M/2) / M, reduced mod M to keep the argument small.
        let m = self.points as i64;
        let h = m / 2;
        let n = ((k as i64 - h) * (j as i64 - h)).rem_euclid(m);
        Complex64::from_polar(1.0, 2.0 * PI * n as f64 / m as f64)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct CsvRow {
    index: usize,
    real: f64,
    imag: f64,
}

fn write_values<W: Write>(out: W, values: &[Complex64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (index, v) in values.iter().enumerate() {
        w.serialize(CsvRow { index, real: v.re, imag: v.im })?;
    }
    w.flush()?;
    Ok(())
}

fn read_values<R: Read>(input: R, grid: &Grid) -> Result<Vec<Complex64>> {
    let mut values = vec![None; grid.points];
    for row in csv::Reader::from_reader(input).deserialize::<CsvRow>() {
        let row = row?;
        let slot = values
            .get_mut(row.index)
            .ok_or(Error::IndexOutOfRange { index: row.index, len: grid.points })?;
        *slot = Some(Complex64::new(row.real, row.imag));
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::InvalidParameter(format!("missing grid index {i}"))))
        .collect()
}

/// Position-space wave function on the `r` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

/// Momentum-space amplitude on the conjugate `p` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumFunction {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

macro_rules! grid_function {
    ($t:ty, $measure:ident) => {
        impl $t {
            pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
                grid.validate()?;
                if values.len() != grid.points {
                    return Err(Error::GridSize(values.len()));
                }
                Ok(Self { grid, values })
            }

            pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
                let values = (0..grid.points).map(|i| f(grid.$measure(i))).collect();
                Self::new(grid, values)
            }

            pub fn zeros(grid: Grid) -> Result<Self> {
                Self::new(grid, vec![Complex64::new(0.0, 0.0); grid.points])
            }

            /// `Σ |f|² × cell size`.
            pub fn norm_sqr(&self) -> f64 {
                self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell()
            }

            pub fn normalized(mut self) -> Self {
                let n = self.norm_sqr().sqrt();
                if n > 0.0 {
                    self.values.iter_mut().for_each(|v| *v /= n);
                }
                self
            }

            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
            }

            /// `1 - |⟨a, b⟩| / (‖a‖ ‖b‖)`: zero iff the two rays coincide.
            pub fn ray_distance(&self, other: &Self) -> f64 {
                let dot: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
                let na: f64 = self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                let nb: f64 = other.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                (1.0 - dot.norm() / (na * nb)).max(0.0)
            }

            pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
                write_values(out, &self.values)
            }

            pub fn read_csv<R: Read>(input: R, grid: Grid) -> Result<Self> {
                grid.validate()?;
                let values = read_values(input, &grid)?;
                Self::new(grid, values)
            }
        }
    };
}

grid_function!(WaveFunction, r);
grid_function!(MomentumFunction, p);

impl WaveFunction {
    fn cell(&self) -> f64 {
        self.grid.dr
    }

    fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(n));
        }
        Ok(())
    }

    /// `ξ`, computed with an FFT.
    pub fn fourier(&self) -> MomentumFunction {
        let g = self.grid;
        let m = g.points;
        // exp(-i p_k r_j/ħ) = (-1)^(j+k+M/2) exp(-2πi jk/M) on the centred grids.
        let sign = |i: usize| if i.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut buf: Vec<Complex64> = self.values.iter().enumerate().map(|(j, v)| v * sign(j)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let scale = g.dr / (2.0 * PI * g.hbar).sqrt() * sign(m / 2);
        let values = buf.into_iter().enumerate().map(|(k, v)| v * (scale * sign(k))).collect();
        MomentumFunction { grid: g, values }
    }

    /// Fraction of the momentum-space weight in the outer quarter of the
    /// `p` grid (largest `|p|`).
    pub fn band_tail_weight(&self) -> f64 {
        let xi = self.fourier();
        let m = self.grid.points;
        let total: f64 = xi.values.iter().map(|v| v.norm_sqr()).sum();
        let tail: f64 = xi
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| (*k as i64 - (m / 2) as i64).unsigned_abs() as usize > 3 * m / 8)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        tail / total
    }
}

impl MomentumFunction {
    fn cell(&self) -> f64 {
        self.grid.dp()
    }
}

/// Coefficients on the `M × M` lattice of `(r, p)` cells, stored row-major by `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedState {
    pub grid: Grid,
    coefficients: Vec<Complex64>,
}

impl ExtendedState {
    pub fn zeros(grid: Grid) -> Result<Self> {
        grid.validate()?;
        Ok(Self { grid, coefficients: vec![Complex64::new(0.0, 0.0); grid.points * grid.points] })
    }

    /// State with a single non-zero cell.
    pub fn cell(grid: Grid, j: usize, k: usize, value: Complex64) -> Result<Self> {
        let mut s = Self::zeros(grid)?;
        if j >= grid.points || k >= grid.points {
            return Err(Error::IndexOutOfRange { index: j.max(k), len: grid.points });
        }
        s.coefficients[j * grid.points + k] = value;
        Ok(s)
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.coefficients[j * self.grid.points + k]
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        let m = self.grid.points;
        &self.coefficients[j * m..(j + 1) * m]
    }

    fn map(&self, f: impl Fn(usize, usize, Complex64) -> Complex64) -> Self {
        let m = self.grid.points;
        let coefficients = self.coefficients.iter().enumerate().map(|(i, &c)| f(i / m, i % m, c)).collect();
        Self { grid: self.grid, coefficients }
    }
}

/// Lifts a normalized wave function into the extended space.
pub fn lift(psi: &WaveFunction) -> Result<ExtendedState> {
    psi.grid.validate()?;
    psi.check_normalized()?;
    let g = psi.grid;
    let xi = psi.fourier();
    let k = 1.0 / (2.0 * PI * g.hbar).sqrt();
    let zero = ExtendedState::zeros(g)?;
    Ok(zero.map(|j, p, _| xi.values[p] * g.phase(j, p) * k))
}

/// Sums over momentum with measure `Δp`.
pub fn project_r(e: &ExtendedState) -> WaveFunction {
    let g = e.grid;
    let dp = g.dp();
    let values = (0..g.points).map(|j| e.row(j).iter().sum::<Complex64>() * dp).collect();
    WaveFunction { grid: g, values }
}

/// Strips the `exp(i p r / ħ)` phase, sums over position and returns the
/// normalized ray. For lifted states the raw sum is `M ξ / √(2πħ)`; the
/// factor `M` stands in for the divergent position integral and is
/// dropped by the normalization. The zero state maps to zero.
pub fn project_p(e: &ExtendedState) -> MomentumFunction {
    let g = e.grid;
    let m = g.points;
    let mut values = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..m {
        for (k, c) in e.row(j).iter().enumerate() {
            values[k] += g.phase(j, k).conj() * c;
        }
    }
    MomentumFunction { grid: g, values }.normalized()
}

/// Multiplies each cell by its position.
pub fn apply_x(e: &ExtendedState) -> ExtendedState {
    e.map(|j, _, c| c * e.grid.r(j))
}

/// Multiplies each cell by its momentum.
pub fn apply_px(e: &ExtendedState) -> ExtendedState {
    e.map(|_, k, c| c * e.grid.p(k))
}
