//! Discretization substrate: periodic-box grids, Fourier transforms under the
//! convention `f̂(ξ) = ∫ f(x) e^{-2πi<x,ξ>} dx`, trigonometric interpolation,
//! sphere quadrature and traces, Radon transform, weighted norms.

mod fft;
pub mod radon;
mod snapshot;
pub mod sphere;

pub use radon::radon;
pub use snapshot::{read_snapshot, write_snapshot, Precision};
pub use sphere::{sphere_trace, SphereQuadrature, SphereTrace};

use crate::error::{Error, Result};
use crate::potentials::Weight;
use crate::quad::kahan_sum;
use num_complex::Complex64;
use rayon::prelude::*;

/// Which representation a [`GridField`]'s samples live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Physical,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Origin-centered periodic cube `[-L/2, L/2)^3` with `N` points per axis.
///
/// Dual frequencies are `ξ = m/L`, `m ∈ {-N/2, .., N/2-1}`, so `-Δ` acts as
/// multiplication by `4π²|ξ|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGrid {
    n: usize,
    l: f64,
}

impl BoxGrid {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid size must be even and >= 4, got {n}"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidParameter(format!("box length {l} invalid")));
        }
        Ok(Self { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn cells(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Physical coordinate of axis index `i`.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -0.5 * self.l + i as f64 * self.spacing()
    }

    /// Signed frequency index of storage index `i`.
    pub fn freq_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Dual coordinate `ξ = m/L` of storage index `i`.
    pub fn freq_coord(&self, i: usize) -> f64 {
        self.freq_index(i) as f64 / self.l
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    pub fn coord_of(&self, flat: usize) -> [f64; 3] {
        let iz = flat % self.n;
        let iy = (flat / self.n) % self.n;
        let ix = flat / (self.n * self.n);
        [
            self.axis_coord(ix),
            self.axis_coord(iy),
            self.axis_coord(iz),
        ]
    }

    pub fn freq_of(&self, flat: usize) -> [f64; 3] {
        let iz = flat % self.n;
        let iy = (flat / self.n) % self.n;
        let ix = flat / (self.n * self.n);
        [
            self.freq_coord(ix),
            self.freq_coord(iy),
            self.freq_coord(iz),
        ]
    }

    /// Flat index of the cell whose node is nearest to `p` (periodic wrap).
    pub fn nearest_index(&self, p: [f64; 3]) -> usize {
        let h = self.spacing();
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let raw = ((p[a] + 0.5 * self.l) / h).round() as i64;
            idx[a] = raw.rem_euclid(self.n as i64) as usize;
        }
        self.index(idx[0], idx[1], idx[2])
    }

    /// `exp(-Im k * L/4)`: size of the periodic-image contamination admitted
    /// by this box at wavenumber `k`.
    pub fn margin_factor(&self, k: Complex64) -> f64 {
        (-k.im * self.l / 4.0).exp()
    }

    /// Points further than one cell from every box face are safe to
    /// interpolate at.
    pub fn in_safe_region(&self, p: [f64; 3]) -> bool {
        let bound = 0.5 * self.l - self.spacing();
        p.iter().all(|c| c.abs() <= bound)
    }
}

/// Complex scalar samples on a [`BoxGrid`], tagged with the side they live on.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: BoxGrid,
    side: Side,
    data: Vec<Complex64>,
}

impl GridField {
    pub fn zeros(grid: BoxGrid, side: Side) -> Self {
        Self {
            grid,
            side,
            data: vec![Complex64::ZERO; grid.cells()],
        }
    }

    pub fn from_data(grid: BoxGrid, side: Side, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.cells() {
            return Err(Error::InvalidParameter(format!(
                "data length {} does not match grid with {} cells",
                data.len(),
                grid.cells()
            )));
        }
        Ok(Self { grid, side, data })
    }

    /// Sample a function of the physical coordinate on every node.
    pub fn from_fn_physical(grid: BoxGrid, f: impl Fn([f64; 3]) -> Complex64 + Sync) -> Self {
        let mut data = vec![Complex64::ZERO; grid.cells()];
        data.par_iter_mut().enumerate().for_each(|(flat, v)| {
            *v = f(grid.coord_of(flat));
        });
        Self {
            grid,
            side: Side::Physical,
            data,
        }
    }

    /// Populate Fourier-side values from a function of the dual coordinate.
    pub fn from_fn_fourier(grid: BoxGrid, f: impl Fn([f64; 3]) -> Complex64 + Sync) -> Self {
        let mut data = vec![Complex64::ZERO; grid.cells()];
        data.par_iter_mut().enumerate().for_each(|(flat, v)| {
            *v = f(grid.freq_of(flat));
        });
        Self {
            grid,
            side: Side::Fourier,
            data,
        }
    }

    pub fn grid(&self) -> BoxGrid {
        self.grid
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    fn expect_side(&self, side: Side) -> Result<()> {
        if self.side != side {
            return Err(Error::SideMismatch {
                expected: side,
                found: self.side,
            });
        }
        Ok(())
    }

    /// Discrete transform consistent with the continuum convention:
    /// forward multiplies by `h³`, inverse by `1/L³`, so a round trip is the
    /// identity and Parseval holds between the sides.
    pub fn transform(&self, direction: Direction) -> Result<GridField> {
        match direction {
            Direction::Forward => {
                self.expect_side(Side::Physical)?;
                let data = fft::forward(self.grid, &self.data);
                Ok(GridField {
                    grid: self.grid,
                    side: Side::Fourier,
                    data,
                })
            }
            Direction::Inverse => {
                self.expect_side(Side::Fourier)?;
                let data = fft::inverse(self.grid, &self.data);
                Ok(GridField {
                    grid: self.grid,
                    side: Side::Physical,
                    data,
                })
            }
        }
    }

    pub fn to_fourier(&self) -> Result<GridField> {
        match self.side {
            Side::Fourier => Ok(self.clone()),
            Side::Physical => self.transform(Direction::Forward),
        }
    }

    pub fn to_physical(&self) -> Result<GridField> {
        match self.side {
            Side::Physical => Ok(self.clone()),
            Side::Fourier => self.transform(Direction::Inverse),
        }
    }

    /// `L²` norm of the represented function (quadrature weight `h³` on the
    /// physical side, `1/L³` on the Fourier side).
    pub fn l2_norm(&self) -> f64 {
        let weight = match self.side {
            Side::Physical => self.grid.cell_volume(),
            Side::Fourier => self.grid.l.powi(-3),
        };
        (weight * kahan_sum(self.data.iter().map(|v| v.norm_sqr()))).sqrt()
    }

    pub fn scale(&mut self, c: Complex64) {
        self.data.par_iter_mut().for_each(|v| *v *= c);
    }

    /// `self += c * other`; sides and grids must match.
    pub fn axpy(&mut self, c: Complex64, other: &GridField) -> Result<()> {
        if self.grid != other.grid || self.side != other.side {
            return Err(Error::InvalidParameter(
                "axpy operands live on different grids or sides".into(),
            ));
        }
        self.data
            .par_iter_mut()
            .zip(other.data.par_iter())
            .for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    /// Pointwise product with a sampled multiplier on the same side.
    pub fn pointwise_mul(&self, other: &GridField) -> Result<GridField> {
        if self.grid != other.grid || self.side != other.side {
            return Err(Error::InvalidParameter(
                "pointwise product operands mismatch".into(),
            ));
        }
        let data = self
            .data
            .par_iter()
            .zip(other.data.par_iter())
            .map(|(a, b)| a * b)
            .collect();
        Ok(GridField {
            grid: self.grid,
            side: self.side,
            data,
        })
    }

    /// Apply a Fourier multiplier `m(ξ)`; input may be on either side, output
    /// is Fourier-side.
    pub fn apply_multiplier(&self, m: impl Fn([f64; 3]) -> Complex64 + Sync) -> Result<GridField> {
        let mut hat = self.to_fourier()?;
        let grid = hat.grid;
        hat.data.par_iter_mut().enumerate().for_each(|(flat, v)| {
            *v *= m(grid.freq_of(flat));
        });
        Ok(hat)
    }

    /// Trigonometric (Fourier-sum) interpolation at arbitrary points, exact
    /// for band-limited fields. Points must lie in the safe region.
    pub fn interpolate(&self, points: &[[f64; 3]]) -> Result<Vec<Complex64>> {
        for p in points {
            if !self.grid.in_safe_region(*p) {
                return Err(Error::OutsideSafeRegion { point: *p });
            }
        }
        let hat = self.to_fourier()?;
        Ok(points
            .par_iter()
            .map(|p| eval_fourier_sum(&hat, *p))
            .collect())
    }

    /// Continuum-convention transform evaluated at an arbitrary dual point:
    /// `f̂(ξ) = h³ Σ_x f(x) e^{-2πi<x,ξ>}` (nonuniform sample of the trig
    /// polynomial the grid represents).
    pub fn fourier_at(&self, xi: [f64; 3]) -> Result<Complex64> {
        self.expect_side(Side::Physical)?;
        Ok(eval_nudft(self, xi))
    }

    pub fn fourier_at_many(&self, xis: &[[f64; 3]]) -> Result<Vec<Complex64>> {
        self.expect_side(Side::Physical)?;
        Ok(xis.par_iter().map(|xi| eval_nudft(self, *xi)).collect())
    }
}

/// `f(p) = (1/L³) Σ_m f̂_m e^{2πi<p, m/L>}` via per-axis phase vectors.
fn eval_fourier_sum(hat: &GridField, p: [f64; 3]) -> Complex64 {
    let g = hat.grid;
    let n = g.n();
    let phases: Vec<Vec<Complex64>> = (0..3)
        .map(|a| {
            (0..n)
                .map(|i| {
                    let arg = 2.0 * std::f64::consts::PI * p[a] * g.freq_coord(i);
                    Complex64::new(arg.cos(), arg.sin())
                })
                .collect()
        })
        .collect();
    let mut total = Complex64::ZERO;
    for ix in 0..n {
        let px = phases[0][ix];
        let mut plane = Complex64::ZERO;
        for iy in 0..n {
            let base = (ix * n + iy) * n;
            let row = &hat.data[base..base + n];
            let mut line = Complex64::ZERO;
            for (iz, v) in row.iter().enumerate() {
                line += v * phases[2][iz];
            }
            plane += phases[1][iy] * line;
        }
        total += px * plane;
    }
    total / Complex64::from(g.len().powi(3))
}

/// `f̂(ξ) = h³ Σ_x f(x) e^{-2πi<x,ξ>}` with the same per-axis factorization.
fn eval_nudft(f: &GridField, xi: [f64; 3]) -> Complex64 {
    let g = f.grid;
    let n = g.n();
    let phases: Vec<Vec<Complex64>> = (0..3)
        .map(|a| {
            (0..n)
                .map(|i| {
                    let arg = -2.0 * std::f64::consts::PI * g.axis_coord(i) * xi[a];
                    Complex64::new(arg.cos(), arg.sin())
                })
                .collect()
        })
        .collect();
    let mut total = Complex64::ZERO;
    for ix in 0..n {
        let px = phases[0][ix];
        let mut plane = Complex64::ZERO;
        for iy in 0..n {
            let base = (ix * n + iy) * n;
            let row = &f.data[base..base + n];
            let mut line = Complex64::ZERO;
            for (iz, v) in row.iter().enumerate() {
                line += v * phases[2][iz];
            }
            plane += phases[1][iy] * line;
        }
        total += px * plane;
    }
    total * Complex64::from(g.cell_volume())
}

/// First-derivative multiplier along one axis: `2πi ξ_a`, with the unpaired
/// Nyquist plane zeroed so the discrete operator is odd under `ξ -> -ξ`
/// (keeps gradients/divergences exactly skew-adjoint).
fn derivative_factor(grid: BoxGrid, flat: usize, axis: usize) -> Complex64 {
    let n = grid.n();
    let idx = match axis {
        0 => flat / (n * n),
        1 => (flat / n) % n,
        _ => flat % n,
    };
    if idx == n / 2 {
        return Complex64::ZERO;
    }
    Complex64::new(0.0, 2.0 * std::f64::consts::PI * grid.freq_coord(idx))
}

/// Spectral gradient: three Fourier-side fields `2πi ξ_a f̂`.
pub fn spectral_gradient(f: &GridField) -> Result<[GridField; 3]> {
    let hat = f.to_fourier()?;
    let make = |axis: usize| -> GridField {
        let grid = hat.grid;
        let data = hat
            .data
            .par_iter()
            .enumerate()
            .map(|(flat, v)| derivative_factor(grid, flat, axis) * v)
            .collect();
        GridField {
            grid,
            side: Side::Fourier,
            data,
        }
    };
    Ok([make(0), make(1), make(2)])
}

/// Spectral divergence of a physical-side vector field; output physical.
pub fn spectral_divergence(v: &[GridField; 3]) -> Result<GridField> {
    let grid = v[0].grid;
    let mut acc = GridField::zeros(grid, Side::Fourier);
    for (axis, comp) in v.iter().enumerate() {
        let hat = comp.to_fourier()?;
        acc.data
            .par_iter_mut()
            .zip(hat.data.par_iter())
            .enumerate()
            .for_each(|(flat, (a, b))| {
                *a += derivative_factor(grid, flat, axis) * b;
            });
    }
    acc.transform(Direction::Inverse)
}

/// `‖f‖_{2,w}` for the weight `w(x) = max(1, |x|^{-2})`: plain quadrature with
/// the origin cell replaced by the exact radial integral of `|x|^{-2}` over an
/// equal-volume ball against the cell value of `|f|²`.
pub fn weighted_norm(f: &GridField, _w: &Weight) -> Result<f64> {
    f.expect_side(Side::Physical)?;
    let g = f.grid;
    let hv = g.cell_volume();
    let origin = g.nearest_index([0.0, 0.0, 0.0]);
    let r_eq = g.spacing() * (3.0 / (4.0 * std::f64::consts::PI)).cbrt();
    let total = kahan_sum(f.data.iter().enumerate().map(|(flat, v)| {
        if flat == origin {
            // ∫_{B_req} |x|^{-2} dx = 4π r_eq
            v.norm_sqr() * 4.0 * std::f64::consts::PI * r_eq
        } else {
            let x = g.coord_of(flat);
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let w = if r2 < 1.0 { 1.0 / r2 } else { 1.0 };
            v.norm_sqr() * w * hv
        }
    }));
    Ok(total.sqrt())
}
