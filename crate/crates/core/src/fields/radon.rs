//! Radon transform by the projection-slice route: sample `f̂` along the ray
//! `ρ ↦ ρσ` and invert one-dimensionally,
//! `Rf(s, σ) = ∫ f̂(ρσ) e^{2πiρs} dρ`.

use super::GridField;
use crate::error::Result;
use crate::quad::gauss_legendre_on;
use num_complex::Complex64;

/// Integral of `f` over the plane `<x, σ> = s`, for band-limited `f`.
pub fn radon(f: &GridField, s: f64, sigma: [f64; 3]) -> Result<Complex64> {
    Ok(radon_profile(f, &[s], sigma)?[0])
}

/// Radon values at several offsets along one direction; the ray samples of
/// `f̂` are shared across offsets.
pub fn radon_profile(f: &GridField, offsets: &[f64], sigma: [f64; 3]) -> Result<Vec<Complex64>> {
    let phys = f.to_physical()?;
    let grid = phys.grid();
    // Stay inside the Nyquist cube along the ray: beyond it the sampled
    // transform is periodic junk.
    let nyquist = grid.n() as f64 / (2.0 * grid.len());
    let comp_max = sigma
        .iter()
        .map(|c| c.abs())
        .fold(f64::MIN, f64::max)
        .max(1e-12);
    let rho_max = nyquist / comp_max;
    // e^{2πiρs} oscillates 2 ρ_max s times over the interval; eight points
    // per cycle keeps Gauss-Legendre in its spectral regime.
    let s_max = offsets.iter().map(|s| s.abs()).fold(0.0, f64::max);
    let n_nodes = 64 + (16.0 * rho_max * (s_max + 1.0)).ceil() as usize;
    let (rhos, ws) = gauss_legendre_on(n_nodes, -rho_max, rho_max);
    let ray: Vec<[f64; 3]> = rhos
        .iter()
        .map(|r| [r * sigma[0], r * sigma[1], r * sigma[2]])
        .collect();
    let hat_on_ray = phys.fourier_at_many(&ray)?;
    Ok(offsets
        .iter()
        .map(|s| {
            let mut acc = Complex64::ZERO;
            for ((rho, w), hv) in rhos.iter().zip(&ws).zip(&hat_on_ray) {
                let arg = 2.0 * std::f64::consts::PI * rho * s;
                acc += Complex64::from(*w) * hv * Complex64::new(arg.cos(), arg.sin());
            }
            acc
        })
        .collect())
}
