//! Wave-operator experiments: Cauchy convergence of `e^{it√D}e^{-it√H₀}f`,
//! the stationary representation, and the ballistic-projection report.

use super::{
    contour_propagate, free_evolve, inverse_filter_free, ContourFilter, ContourOptions,
    PropagatorOperator,
};
use crate::amplitude::distorted_transform;
use crate::error::{Error, Result};
use crate::fields::{GridField, Side, SphereQuadrature};
use crate::potentials::DivergenceFormPotential;
use crate::quad::gauss_legendre_on;
use crate::resolvent::{apply_resolvent_z, OperatorKind, SolveOptions, SpectralPoint};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

/// Cauchy table of the filtered wave-operator approximants
/// `W_t f = e^{it√D} q_n(√D) e^{-it√H₀} q_n^{-1}(√H₀) f`.
#[derive(Debug, Clone)]
pub struct CauchyTable {
    pub times: Vec<f64>,
    /// `δ_j = ‖W_{t_{j+1}} f - W_{t_j} f‖₂`.
    pub deltas: Vec<f64>,
    /// Mass of the final approximant outside `B_R` for the report radii.
    pub mass_outside: Vec<(f64, f64)>,
    /// The final approximant itself (for cross-checks).
    pub final_state: GridField,
}

/// `W_t f` for one time; the `-t` contour exponent realizes `e^{+it√D}`.
pub fn wave_operator_approximant(
    filtered_source: &GridField,
    t: f64,
    filt: &ContourFilter,
    pot: &DivergenceFormPotential,
    opts: &SolveOptions,
    copts: &ContourOptions,
) -> Result<GridField> {
    let drifted = free_evolve(filtered_source, -t)?;
    contour_propagate(
        &drifted,
        -t,
        filt,
        &PropagatorOperator::Divergence(pot),
        opts,
        copts,
    )
}

/// Run the Cauchy experiment over an increasing time ladder. The outgoing
/// shell must stay inside the box: `t` is capped at `L/3`.
pub fn wave_operator_cauchy(
    state: &super::BandLimitedState,
    filt: &ContourFilter,
    pot: &DivergenceFormPotential,
    t_ladder: &[f64],
    mass_radii: &[f64],
    opts: &SolveOptions,
    copts: &ContourOptions,
) -> Result<CauchyTable> {
    if t_ladder.windows(2).any(|w| w[1] <= w[0]) || t_ladder.is_empty() {
        return Err(Error::InvalidParameter(
            "time ladder must be increasing and nonempty".into(),
        ));
    }
    let f = &state.field;
    let (a, b) = filt.band();
    if state.annulus.lo <= a || state.annulus.hi >= b {
        return Err(Error::InvalidParameter(format!(
            "state annulus [{}, {}] must sit strictly inside the filter band ({a}, {b})",
            state.annulus.lo, state.annulus.hi
        )));
    }
    let cap = f.grid().len() / 3.0;
    if let Some(t) = t_ladder.iter().find(|t| **t > cap + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "time {t} exceeds the desk-scale cap L/3 = {cap} (outgoing shell leaves the box)"
        )));
    }
    let f1 = inverse_filter_free(f, filt)?;
    let mut states = Vec::with_capacity(t_ladder.len());
    for t in t_ladder {
        states.push(wave_operator_approximant(&f1, *t, filt, pot, opts, copts)?);
    }
    let deltas = states
        .windows(2)
        .map(|w| {
            let mut d = w[1].clone();
            d.axpy(Complex64::from(-1.0), &w[0])?;
            Ok(d.l2_norm())
        })
        .collect::<Result<Vec<_>>>()?;
    let last = states.pop().unwrap();
    let grid = last.grid();
    let hv = grid.cell_volume();
    let mass_outside = mass_radii
        .iter()
        .map(|radius| {
            let mut mass = 0.0;
            for (flat, v) in last.data().iter().enumerate() {
                let x = grid.coord_of(flat);
                if (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() > *radius {
                    mass += v.norm_sqr() * hv;
                }
            }
            (*radius, mass)
        })
        .collect();
    Ok(CauchyTable {
        times: t_ladder.to_vec(),
        deltas,
        mass_outside,
        final_state: last,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveOperatorSign {
    Plus,
    Minus,
}

#[derive(Debug, Clone)]
pub struct StationaryOptions {
    /// Boundary values of the amplitude are taken at `κ + iε` for this
    /// decreasing ladder and polynomially extrapolated to `ε = 0`.
    pub eps_ladder: Vec<f64>,
    pub kappa_nodes: usize,
    pub solve: SolveOptions,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            eps_ladder: vec![0.4, 0.2, 0.1],
            kappa_nodes: 16,
            solve: SolveOptions::default(),
        }
    }
}

/// Stationary representation of the wave operators:
/// `(W∓f)(y) = (2π)^{-3} ∫ κ² dκ ∫_{S²} conj(a_∞(σ,y,∓κ)) ǧ(κσ/2π) dσ`
/// with `ǧ = f̌` for `W⁻` and `ĝ = f̂` for `W⁺`. The conjugation symmetry
/// turns the boundary factor into the distorted plane wave at `κ + iε`,
/// assembled with one solve per `(ε, κ)` node by superposing incident
/// waves over the sphere quadrature.
pub fn stationary_wave_operator(
    state: &super::BandLimitedState,
    sign: WaveOperatorSign,
    pot: &DivergenceFormPotential,
    quad: &Arc<SphereQuadrature>,
    sopts: &StationaryOptions,
) -> Result<GridField> {
    if sopts.eps_ladder.len() < 2 || sopts.eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "epsilon ladder must be decreasing with >= 2 entries".into(),
        ));
    }
    let grid = state.field.grid();
    // The κ nodes cover the support of the radial transform profile.
    let (kappas, kws) = gauss_legendre_on(sopts.kappa_nodes, state.annulus.lo, state.annulus.hi);
    // Closed-form transform samples ǧ(κσ/2π) (resp. ĝ) at every (κ, σ) node.
    let ray_values: Vec<Complex64> = kappas
        .iter()
        .flat_map(|kappa| {
            quad.nodes().iter().map(move |sigma| {
                let xi = kappa / (2.0 * PI);
                let p = [xi * sigma[0], xi * sigma[1], xi * sigma[2]];
                match sign {
                    WaveOperatorSign::Minus => p,
                    WaveOperatorSign::Plus => p,
                }
            })
        })
        .map(|p| match sign {
            WaveOperatorSign::Minus => state.check_at(p),
            WaveOperatorSign::Plus => state.hat_at(p),
        })
        .collect();
    // Potential samples shared by every (ε, κ, σ) assembly pass.
    let cells = grid.cells();
    let v_samples: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|flat| pot.v(grid.coord_of(flat)))
        .collect();
    let grad_samples: Vec<[f64; 3]> = (0..cells)
        .into_par_iter()
        .map(|flat| {
            if v_samples[flat] == 0.0 {
                [0.0; 3]
            } else {
                pot.grad_v(grid.coord_of(flat)).unwrap_or([0.0; 3])
            }
        })
        .collect();
    let has_potential = v_samples.iter().any(|v| *v != 0.0);
    // One assembled field per epsilon, then a polynomial extrapolation to 0.
    let mut per_eps: Vec<GridField> = Vec::with_capacity(sopts.eps_ladder.len());
    for eps in &sopts.eps_ladder {
        let mut acc = GridField::zeros(grid, Side::Physical);
        for (ik, (kappa, kw)) in kappas.iter().zip(&kws).enumerate() {
            // conj(a_∞(σ,y,∓κ)) = a_∞(σ,y,±κ) on the real axis; the
            // regularized factor is the distorted wave at ±κ + iε.
            let k = match sign {
                WaveOperatorSign::Minus => Complex64::new(*kappa, *eps),
                WaveOperatorSign::Plus => Complex64::new(-*kappa, *eps),
            };
            let z = k * k;
            // Incident superposition Σ_σ w_σ g(κσ) e^{-ik<σ,y>} and the
            // matching volume source for the scattered part.
            let mut incident = GridField::zeros(grid, Side::Physical);
            let mut source = GridField::zeros(grid, Side::Physical);
            build_superposition(
                &mut incident,
                &mut source,
                quad,
                &ray_values[ik * quad.len()..(ik + 1) * quad.len()],
                k,
                &v_samples,
                &grad_samples,
            )?;
            let weight = Complex64::from(kw * kappa * kappa / (2.0 * PI).powi(3));
            acc.axpy(weight, &incident)?;
            if has_potential {
                let scattered = apply_resolvent_z(
                    &source,
                    z,
                    OperatorKind::DivergenceForm,
                    pot,
                    &sopts.solve,
                )?;
                acc.axpy(weight, &scattered)?;
            }
        }
        per_eps.push(acc);
    }
    // Lagrange extrapolation to ε = 0 across the ladder, fieldwise.
    let weights = lagrange_to_zero(&sopts.eps_ladder);
    let mut out = GridField::zeros(grid, Side::Physical);
    for (w, field) in weights.iter().zip(&per_eps) {
        out.axpy(Complex64::from(*w), field)?;
    }
    Ok(out)
}

/// Incident field `Σ_σ w_σ g_σ e^{-ik<σ,y>}` (separable per axis) and the
/// divergence-form volume source `Σ_σ w_σ g_σ div(V ∇ψ⁰_σ)` where
/// `div(V∇ψ⁰) = (-ik σ·∇V - k²V) ψ⁰`.
fn build_superposition(
    incident: &mut GridField,
    source: &mut GridField,
    quad: &Arc<SphereQuadrature>,
    g: &[Complex64],
    k: Complex64,
    v_samples: &[f64],
    grad_samples: &[[f64; 3]],
) -> Result<()> {
    let grid = incident.grid();
    let n = grid.n();
    // All σ phase tables up front; the cell loop then runs once.
    let tables: Vec<(Complex64, [Vec<Complex64>; 3], [f64; 3])> = quad
        .nodes()
        .iter()
        .zip(quad.weights())
        .enumerate()
        .filter_map(|(node, (sigma, wq))| {
            let coeff = Complex64::from(*wq) * g[node];
            if coeff.norm() < 1e-300 {
                return None;
            }
            let axis: [Vec<Complex64>; 3] = std::array::from_fn(|a| {
                (0..n)
                    .map(|i| (-Complex64::i() * k * sigma[a] * grid.axis_coord(i)).exp())
                    .collect()
            });
            Some((coeff, axis, *sigma))
        })
        .collect();
    let inc = incident.data_mut();
    let src = source.data_mut();
    inc.par_iter_mut()
        .zip(src.par_iter_mut())
        .enumerate()
        .for_each(|(flat, (iv, sv))| {
            let iz = flat % n;
            let iy = (flat / n) % n;
            let ix = flat / (n * n);
            let v = v_samples[flat];
            let gv = grad_samples[flat];
            let mut inc_acc = Complex64::ZERO;
            let mut src_acc = Complex64::ZERO;
            for (coeff, axis, sigma) in &tables {
                let psi = coeff * axis[0][ix] * axis[1][iy] * axis[2][iz];
                inc_acc += psi;
                if v != 0.0 {
                    let sdotgv = sigma[0] * gv[0] + sigma[1] * gv[1] + sigma[2] * gv[2];
                    src_acc += psi * (-Complex64::i() * k * sdotgv - k * k * v);
                }
            }
            *iv += inc_acc;
            *sv += src_acc;
        });
    Ok(())
}

/// Lagrange weights extrapolating samples at the given abscissas to zero.
fn lagrange_to_zero(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let mut w = 1.0;
            for j in 0..n {
                if j != i {
                    w *= xs[j] / (xs[j] - xs[i]);
                }
            }
            w
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BallisticReport {
    /// `F(σ, i d)` on the quadrature nodes (positive for nonnegative data).
    pub values_imaginary_axis: Vec<Complex64>,
    pub min_real_part: f64,
    /// `‖F(·, κ + iε)‖_{L²(S²)}` near the real axis.
    pub near_axis_norm: f64,
}

/// `F(σ,k) = ∫ f(y) a_∞(σ,y,k) dy` at `k = id` on the imaginary axis and at
/// one near-axis point, via the single-solve transpose route.
pub fn ballistic_projection(
    f: &GridField,
    d: f64,
    near_axis: Complex64,
    pot: &DivergenceFormPotential,
    quad: &Arc<SphereQuadrature>,
    opts: &SolveOptions,
) -> Result<BallisticReport> {
    let phys = f.to_physical()?;
    if phys.data().iter().any(|v| v.re < -1e-12 || v.im.abs() > 1e-12) {
        return Err(Error::InvalidParameter(
            "ballistic projection expects nonnegative real data".into(),
        ));
    }
    let k_imag = SpectralPoint::new(Complex64::new(0.0, d))?;
    let values = distorted_transform(
        &phys,
        k_imag,
        quad,
        OperatorKind::DivergenceForm,
        pot,
        opts,
    )?;
    let min_real = values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let k_near = SpectralPoint::new(near_axis)?;
    let near = distorted_transform(
        &phys,
        k_near,
        quad,
        OperatorKind::DivergenceForm,
        pot,
        opts,
    )?;
    let near_norm = near
        .iter()
        .zip(quad.weights())
        .map(|(v, w)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(BallisticReport {
        values_imaginary_axis: values,
        min_real_part: min_real,
        near_axis_norm: near_norm,
    })
}
