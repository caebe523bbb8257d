//! Quadrature on the unit sphere and restriction of grid fields to spheres.

use super::GridField;
use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, kahan_sum, kahan_sum_complex};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereRule {
    /// Golden-spiral nodes with equal weights `4π/M`. Uniform quasi-random
    /// error; the spherical-harmonic integration error is documented by the
    /// test-generated table, not exact beyond degree zero.
    Fibonacci,
    /// Gauss-Legendre in `cos θ` times uniform azimuth. Integrates all
    /// spherical harmonics up to `documented_degree` exactly.
    GaussProduct,
}

/// Nodes `σ_i ∈ S²` with positive weights summing to `4π`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    rule: SphereRule,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    documented_degree: u32,
}

impl SphereQuadrature {
    pub fn fibonacci(m: usize) -> Self {
        assert!(m >= 8, "too few sphere nodes");
        let golden_angle = PI * (3.0 - 5.0f64.sqrt());
        let nodes: Vec<[f64; 3]> = (0..m)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden_angle * i as f64;
                [rho * phi.cos(), rho * phi.sin(), z]
            })
            .collect();
        let w = 4.0 * PI / m as f64;
        Self {
            rule: SphereRule::Fibonacci,
            weights: vec![w; m],
            nodes,
            documented_degree: 0,
        }
    }

    /// Product rule exact for spherical harmonics with
    /// `l <= min(2 n_theta - 1, n_phi - 1)`.
    pub fn gauss_product(n_theta: usize, n_phi: usize) -> Self {
        let (ct, wt) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let wphi = 2.0 * PI / n_phi as f64;
        for (z, w) in ct.iter().zip(&wt) {
            let rho = (1.0 - z * z).max(0.0).sqrt();
            for j in 0..n_phi {
                let phi = wphi * j as f64;
                nodes.push([rho * phi.cos(), rho * phi.sin(), *z]);
                weights.push(w * wphi);
            }
        }
        Self {
            rule: SphereRule::GaussProduct,
            nodes,
            weights,
            documented_degree: ((2 * n_theta - 1).min(n_phi - 1)) as u32,
        }
    }

    pub fn rule(&self) -> SphereRule {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest degree for which harmonic integration is exact (zero for the
    /// Fibonacci rule; see the documented error table in the tests).
    pub fn documented_degree(&self) -> u32 {
        self.documented_degree
    }

    pub fn integrate(&self, f: impl Fn([f64; 3]) -> Complex64) -> Complex64 {
        kahan_sum_complex(
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(s, w)| Complex64::from(*w) * f(*s)),
        )
    }
}

/// Values of a field on the sphere `S_r(y)` against a quadrature.
#[derive(Debug, Clone)]
pub struct SphereTrace {
    pub center: [f64; 3],
    pub radius: f64,
    pub values: Vec<Complex64>,
    pub quad: Arc<SphereQuadrature>,
}

impl SphereTrace {
    /// `Σ w_i |v_i|²`, the `L²(S²)` norm squared of `σ ↦ v(σ)`.
    pub fn l2_norm_sq(&self) -> f64 {
        kahan_sum(
            self.values
                .iter()
                .zip(self.quad.weights())
                .map(|(v, w)| w * v.norm_sqr()),
        )
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Spherical mean `<f>_{S_r(y)}`.
    pub fn mean(&self) -> Complex64 {
        kahan_sum_complex(
            self.values
                .iter()
                .zip(self.quad.weights())
                .map(|(v, w)| Complex64::from(*w) * v),
        ) / Complex64::from(4.0 * PI)
    }

    /// `L²(S²)` distance to another trace on the same quadrature.
    pub fn l2_distance(&self, other: &SphereTrace) -> f64 {
        kahan_sum(
            self.values
                .iter()
                .zip(&other.values)
                .zip(self.quad.weights())
                .map(|((a, b), w)| w * (a - b).norm_sqr()),
        )
        .sqrt()
    }
}

/// Restrict a grid field to `S_r(y)` by trigonometric interpolation.
pub fn sphere_trace(
    f: &GridField,
    y: [f64; 3],
    r: f64,
    quad: &Arc<SphereQuadrature>,
) -> Result<SphereTrace> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("sphere radius {r}")));
    }
    let points: Vec<[f64; 3]> = quad
        .nodes()
        .iter()
        .map(|s| [y[0] + r * s[0], y[1] + r * s[1], y[2] + r * s[2]])
        .collect();
    let values = f.interpolate(&points)?;
    Ok(SphereTrace {
        center: y,
        radius: r,
        values,
        quad: Arc::clone(quad),
    })
}

/// Real spherical harmonic `Y_l^m` (orthonormal on `S²`).
pub fn real_harmonic(l: u32, m: i32, sigma: [f64; 3]) -> f64 {
    let l = l as i64;
    let mm = m.unsigned_abs() as i64;
    assert!(mm <= l);
    let ct = sigma[2].clamp(-1.0, 1.0);
    let phi = sigma[1].atan2(sigma[0]);
    let p = assoc_legendre(l, mm, ct);
    // Orthonormal normalization with the (l-m)!/(l+m)! ratio.
    let mut ratio = 1.0;
    for j in (l - mm + 1)..=(l + mm) {
        ratio *= j as f64;
    }
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) / ratio).sqrt();
    if m > 0 {
        2f64.sqrt() * norm * p * (mm as f64 * phi).cos()
    } else if m < 0 {
        2f64.sqrt() * norm * p * (mm as f64 * phi).sin()
    } else {
        norm * p
    }
}

/// Associated Legendre `P_l^m(x)` (no Condon-Shortley phase removed; standard
/// recurrence with the phase included).
fn assoc_legendre(l: i64, m: i64, x: f64) -> f64 {
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= -fact * somx2;
        fact += 2.0;
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = ((2 * ll - 1) as f64 * x * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}
