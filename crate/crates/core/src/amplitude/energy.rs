//! Energy functionals of the normalized amplitude: spherical means `m`,
//! `m₁`, running suprema `M`, `M̂`, the tail Dirichlet integral `A(r)`, and
//! the annulus energy identity they satisfy.

use super::AmplitudeField;
use crate::error::{Error, Result};
use crate::fields::SphereQuadrature;
use crate::potentials::DivergenceFormPotential;
use crate::quad::{gauss_legendre_on, kahan_sum};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

/// Radial diagnostics of `μ`; `m`, `m1` are mean-squares over the sphere
/// (free case reads 1), the suprema are taken over the discrete ladder plus
/// rung midpoints (a documented under-estimate of the continuum sup).
#[derive(Debug, Clone)]
pub struct EnergyFunctionals {
    pub r_grid: Vec<f64>,
    pub m: Vec<f64>,
    pub m1: Vec<f64>,
    /// `M(r) = sup_{ρ>r} ∫_ρ^{ρ+1} m(t) dt` over the sampled windows
    /// (4π-normalized like `m`).
    pub m_window_sup: Vec<f64>,
    /// `M̂(r) = sup_{ρ>r} m(ρ)` over the sampled rungs.
    pub m_hat: Vec<f64>,
    /// `A(r) = ∫_{r<|x|<r_max} |∇μ|²/|x|² dx` (unnormalized volume integral).
    pub a_tail: Vec<f64>,
}

fn sphere_mean_sq(values: &[Complex64], quad: &SphereQuadrature) -> f64 {
    kahan_sum(
        values
            .iter()
            .zip(quad.weights())
            .map(|(v, w)| w * v.norm_sqr()),
    ) / (4.0 * PI)
}

/// Sample `m`, `m₁` on an r-grid and assemble the running suprema and the
/// tail Dirichlet integral (truncated at `r_max`).
pub fn energy_functionals(
    amp: &AmplitudeField,
    r_grid: &[f64],
    r_max: f64,
    quad: &Arc<SphereQuadrature>,
) -> Result<EnergyFunctionals> {
    if r_grid.is_empty() || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "energy r-grid must be increasing and nonempty".into(),
        ));
    }
    let y = amp.sol.source;
    // Sample radii: rungs plus midpoints for the suprema.
    let mut sample_radii = Vec::new();
    for (i, r) in r_grid.iter().enumerate() {
        sample_radii.push(*r);
        if i + 1 < r_grid.len() {
            sample_radii.push(0.5 * (r + r_grid[i + 1]));
        }
    }
    let mut m_samples = Vec::with_capacity(sample_radii.len());
    let mut m1_samples = Vec::with_capacity(sample_radii.len());
    for r in &sample_radii {
        let pts: Vec<[f64; 3]> = quad
            .nodes()
            .iter()
            .map(|s| [y[0] + r * s[0], y[1] + r * s[1], y[2] + r * s[2]])
            .collect();
        let (mu, dmu) = amp.mu_and_radial_derivative_at(&pts)?;
        m_samples.push(sphere_mean_sq(&mu, quad));
        m1_samples.push(sphere_mean_sq(&dmu, quad));
    }
    let m: Vec<f64> = r_grid
        .iter()
        .map(|r| m_samples[sample_radii.iter().position(|s| s == r).unwrap()])
        .collect();
    let m1: Vec<f64> = r_grid
        .iter()
        .map(|r| m1_samples[sample_radii.iter().position(|s| s == r).unwrap()])
        .collect();
    // Windowed integrals ∫_ρ^{ρ+1} m(t) dt from the piecewise-linear
    // interpolant of the samples.
    let interp = |t: f64| -> f64 {
        if t <= sample_radii[0] {
            return m_samples[0];
        }
        if t >= *sample_radii.last().unwrap() {
            return *m_samples.last().unwrap();
        }
        let i = sample_radii.partition_point(|s| *s <= t) - 1;
        let (a, b) = (sample_radii[i], sample_radii[i + 1]);
        let frac = (t - a) / (b - a);
        m_samples[i] * (1.0 - frac) + m_samples[i + 1] * frac
    };
    let window = |rho: f64| -> f64 {
        let (xs, ws) = gauss_legendre_on(8, rho, rho + 1.0);
        kahan_sum(xs.iter().zip(&ws).map(|(x, w)| w * interp(*x)))
    };
    let m_window_sup: Vec<f64> = r_grid
        .iter()
        .map(|r| {
            sample_radii
                .iter()
                .filter(|rho| **rho > *r)
                .map(|rho| window(*rho))
                .fold(0.0, f64::max)
        })
        .collect();
    let m_hat: Vec<f64> = r_grid
        .iter()
        .map(|r| {
            sample_radii
                .iter()
                .zip(&m_samples)
                .filter(|(rho, _)| **rho >= *r)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max)
        })
        .collect();
    // Tail Dirichlet integral by radial Gauss-Legendre x sphere quadrature:
    // ∫_{r<|x|<r_max} |∇μ|²/|x|² dx = ∫_r^{rmax} ∫_{S²} |∇μ|² dσ dt.
    let a_tail: Vec<f64> = r_grid
        .iter()
        .map(|r| dirichlet_tail(amp, *r, r_max, quad))
        .collect::<Result<_>>()?;
    Ok(EnergyFunctionals {
        r_grid: r_grid.to_vec(),
        m,
        m1,
        m_window_sup,
        m_hat,
        a_tail,
    })
}

fn gradient_norm_sq_on_sphere(
    amp: &AmplitudeField,
    r: f64,
    quad: &Arc<SphereQuadrature>,
) -> Result<f64> {
    let y = amp.sol.source;
    let k = amp.sol.k.k();
    let pts: Vec<[f64; 3]> = quad
        .nodes()
        .iter()
        .map(|s| [y[0] + r * s[0], y[1] + r * s[1], y[2] + r * s[2]])
        .collect();
    let w = amp.sol.correction_hat().interpolate(&pts)?;
    let grads = crate::fields::spectral_gradient(amp.sol.correction())?;
    let gx = grads[0].interpolate(&pts)?;
    let gy = grads[1].interpolate(&pts)?;
    let gz = grads[2].interpolate(&pts)?;
    // ∇μ = 4π e^{-ikr} [ (1 - ikr) d̂ w + r ∇w ].
    let mut acc = 0.0;
    for (i, s) in quad.nodes().iter().enumerate() {
        let phase = (-Complex64::i() * k * r).exp();
        let coef = (1.0 - Complex64::i() * k * r) * w[i];
        let grad = [
            4.0 * PI * phase * (coef * s[0] + r * gx[i]),
            4.0 * PI * phase * (coef * s[1] + r * gy[i]),
            4.0 * PI * phase * (coef * s[2] + r * gz[i]),
        ];
        acc += quad.weights()[i]
            * (grad[0].norm_sqr() + grad[1].norm_sqr() + grad[2].norm_sqr());
    }
    Ok(acc)
}

fn dirichlet_tail(
    amp: &AmplitudeField,
    r: f64,
    r_max: f64,
    quad: &Arc<SphereQuadrature>,
) -> Result<f64> {
    if r >= r_max {
        return Ok(0.0);
    }
    let n_nodes = ((r_max - r) * 3.0).ceil().max(8.0) as usize;
    let (xs, ws) = gauss_legendre_on(n_nodes.min(48), r, r_max);
    let mut acc = 0.0;
    for (t, w) in xs.iter().zip(&ws) {
        acc += w * gradient_norm_sq_on_sphere(amp, *t, quad)?;
    }
    Ok(acc)
}

/// Relative misbalance of the annulus energy identity
/// `(Im k/|k|²)[∫|∇μ|²/|x|² + ∫V|μ|²/|x|²] + (m(r₂)-m(r₁))
///  + Re[(I₂-I₁)/(ik)] = 0`
/// assembled term by term on `r₁ < |x| < r₂` (4π-weighted spherical means).
pub fn energy_identity_residual(
    amp: &AmplitudeField,
    pot: &DivergenceFormPotential,
    r1: f64,
    r2: f64,
    quad: &Arc<SphereQuadrature>,
    n_radial: usize,
) -> Result<f64> {
    if !(r1 > 0.0 && r2 > r1) {
        return Err(Error::InvalidParameter(format!("annulus [{r1}, {r2}]")));
    }
    let y = amp.sol.source;
    let k = amp.sol.k.k();
    let ksq = k.norm_sqr();
    let (xs, ws) = gauss_legendre_on(n_radial, r1, r2);
    let mut dirichlet = 0.0;
    let mut potential_term = 0.0;
    for (t, w) in xs.iter().zip(&ws) {
        dirichlet += w * gradient_norm_sq_on_sphere(amp, *t, quad)?;
        // ∫_{S²} V |μ|² dσ at radius t.
        let pts: Vec<[f64; 3]> = quad
            .nodes()
            .iter()
            .map(|s| [y[0] + t * s[0], y[1] + t * s[1], y[2] + t * s[2]])
            .collect();
        let (mu, _) = amp.mu_and_radial_derivative_at(&pts)?;
        let mut shell = 0.0;
        for (i, p) in pts.iter().enumerate() {
            shell += quad.weights()[i] * pot.v(*p) * mu[i].norm_sqr();
        }
        potential_term += w * shell;
    }
    // Boundary terms I_j = ∫_{S²} μ_r conj(μ) dσ at r_j.
    let boundary = |r: f64| -> Result<Complex64> {
        let pts: Vec<[f64; 3]> = quad
            .nodes()
            .iter()
            .map(|s| [y[0] + r * s[0], y[1] + r * s[1], y[2] + r * s[2]])
            .collect();
        let (mu, dmu) = amp.mu_and_radial_derivative_at(&pts)?;
        let mut acc = Complex64::ZERO;
        for i in 0..pts.len() {
            acc += quad.weights()[i] * dmu[i] * mu[i].conj();
        }
        Ok(acc)
    };
    let i1 = boundary(r1)?;
    let i2 = boundary(r2)?;
    let sphere_sq = |r: f64| -> Result<f64> {
        let pts: Vec<[f64; 3]> = quad
            .nodes()
            .iter()
            .map(|s| [y[0] + r * s[0], y[1] + r * s[1], y[2] + r * s[2]])
            .collect();
        let (mu, _) = amp.mu_and_radial_derivative_at(&pts)?;
        Ok(kahan_sum(
            mu.iter()
                .zip(quad.weights())
                .map(|(v, w)| w * v.norm_sqr()),
        ))
    };
    let t1 = k.im / ksq * dirichlet;
    let t2 = sphere_sq(r2)? - sphere_sq(r1)?;
    let t3 = k.im / ksq * potential_term;
    let t4 = ((i2 - i1) / (Complex64::i() * k)).re;
    let residual = (t1 + t2 + t3 + t4).abs();
    let scale = t1.abs() + t2.abs() + t3.abs() + t4.abs();
    Ok(residual / scale.max(1e-300))
}
