//! Model integral operators `B_r^{(1..4)}` mapping sources to sphere
//! functions, their `r -> ∞` limits, and the bound audit against the
//! a-priori norm expressions.

use crate::error::{Error, Result};
use crate::fields::{spectral_divergence, GridField, SphereQuadrature, SphereTrace};
use crate::potentials::Weight;
use crate::potentials::DivergenceFormPotential;
use crate::quad::hashed_unit;
use crate::resolvent::SpectralPoint;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelOperatorMode {
    FiniteRadius(f64),
    Limit,
}

pub enum ModelOperatorInput<'a> {
    Scalar(&'a GridField),
    Vector(&'a [GridField; 3]),
    /// Vector field with its divergence supplied analytically (avoids the
    /// spectral-divergence Gibbs floor when a closed form is available).
    VectorWithDiv(&'a [GridField; 3], &'a GridField),
}

struct Cell {
    y: [f64; 3],
    r: f64,
    /// `f` value (scalar) or placeholder for vector inputs.
    scalar: Complex64,
    vector: [Complex64; 3],
    /// spectral divergence of the vector input at this cell.
    div: Complex64,
    v_pot: f64,
    /// volume weight, with the `1/|y|` cell rule folded where used.
    weight: f64,
}

fn collect_cells(
    input: &ModelOperatorInput,
    pot: Option<&DivergenceFormPotential>,
) -> Result<(Vec<Cell>, crate::fields::BoxGrid)> {
    let (grid, scalar_field, vector_field, given_div) = match input {
        ModelOperatorInput::Scalar(f) => (f.grid(), Some((*f).to_physical()?), None, None),
        ModelOperatorInput::Vector(v) => {
            let phys = [
                v[0].to_physical()?,
                v[1].to_physical()?,
                v[2].to_physical()?,
            ];
            (v[0].grid(), None, Some(phys), None)
        }
        ModelOperatorInput::VectorWithDiv(v, d) => {
            let phys = [
                v[0].to_physical()?,
                v[1].to_physical()?,
                v[2].to_physical()?,
            ];
            (v[0].grid(), None, Some(phys), Some((*d).to_physical()?))
        }
    };
    let div = match (&vector_field, given_div) {
        (Some(v), None) => Some(spectral_divergence(v)?),
        (_, d) => d,
    };
    let hv = grid.cell_volume();
    let mut cells = Vec::new();
    for flat in 0..grid.cells() {
        let (s, vec, d) = match (&scalar_field, &vector_field) {
            (Some(f), _) => (f.data()[flat], [Complex64::ZERO; 3], Complex64::ZERO),
            (_, Some(v)) => (
                Complex64::ZERO,
                [v[0].data()[flat], v[1].data()[flat], v[2].data()[flat]],
                div.as_ref().unwrap().data()[flat],
            ),
            _ => unreachable!(),
        };
        let active = s.norm() > 1e-14
            || vec.iter().any(|c| c.norm() > 1e-14)
            || d.norm() > 1e-14;
        if !active {
            continue;
        }
        let y = grid.coord_of(flat);
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        cells.push(Cell {
            y,
            r,
            scalar: s,
            vector: vec,
            div: d,
            v_pot: pot.map(|p| p.v(y)).unwrap_or(0.0),
            weight: hv,
        });
    }
    Ok((cells, grid))
}

/// Mean of `1/(4π|y|)` over the origin cell (equal-volume ball rule).
fn origin_cell_inv_radius(grid: crate::fields::BoxGrid) -> f64 {
    let h = grid.spacing();
    let r_eq = h * (3.0 / (4.0 * PI)).cbrt();
    // ∫_ball 1/(4πr) dV = r_eq²/2, divided by the cell volume.
    r_eq * r_eq / (2.0 * h * h * h)
}

/// Evaluate a model operator on the sphere quadrature.
///
/// `j = 1, 4` take vector inputs, `j = 2, 3` scalars; `j = 3` additionally
/// multiplies by the potential. Finite-radius kernels follow
/// `r e^{ik(-r+|rσ-y|+|y|)} / (4π|rσ-y||y|)`; limits use
/// `e^{ik|y|(1-<σ,ŷ>)}` weights.
pub fn model_operator(
    j: u8,
    mode: ModelOperatorMode,
    input: &ModelOperatorInput,
    pot: Option<&DivergenceFormPotential>,
    k: SpectralPoint,
    quad: &Arc<SphereQuadrature>,
) -> Result<SphereTrace> {
    match (j, input) {
        (1 | 4, ModelOperatorInput::Vector(_) | ModelOperatorInput::VectorWithDiv(..)) => {}
        (2 | 3, ModelOperatorInput::Scalar(_)) => {}
        _ => {
            return Err(Error::InvalidParameter(format!(
                "operator {j} received the wrong input kind"
            )))
        }
    }
    if j == 3 && pot.is_none() {
        return Err(Error::InvalidParameter(
            "operator 3 needs the potential".into(),
        ));
    }
    let (cells, grid) = collect_cells(input, pot)?;
    let kk = k.k();
    let half_cell = 0.5 * grid.spacing();
    let inv_r_cell = origin_cell_inv_radius(grid) * 4.0 * PI; // mean of 1/|y|
    let radius = match mode {
        ModelOperatorMode::FiniteRadius(r) => {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!("operator radius {r}")));
            }
            Some(r)
        }
        ModelOperatorMode::Limit => None,
    };
    let values: Vec<Complex64> = quad
        .nodes()
        .par_iter()
        .map(|sigma| {
            let mut acc = Complex64::ZERO;
            for c in &cells {
                let contrib = match radius {
                    Some(r) => finite_kernel_contrib(j, c, *sigma, r, kk, half_cell, inv_r_cell),
                    None => limit_kernel_contrib(j, c, *sigma, kk, half_cell, inv_r_cell),
                };
                if !contrib.is_finite() {
                    return Err(Error::NonFiniteSample);
                }
                acc += contrib * c.weight;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(SphereTrace {
        center: [0.0; 3],
        radius: radius.unwrap_or(f64::INFINITY),
        values,
        quad: Arc::clone(quad),
    })
}

fn finite_kernel_contrib(
    j: u8,
    c: &Cell,
    sigma: [f64; 3],
    r: f64,
    k: Complex64,
    half_cell: f64,
    inv_r_cell: f64,
) -> Complex64 {
    let rs_y = [
        r * sigma[0] - c.y[0],
        r * sigma[1] - c.y[1],
        r * sigma[2] - c.y[2],
    ];
    let dist = (rs_y[0] * rs_y[0] + rs_y[1] * rs_y[1] + rs_y[2] * rs_y[2]).sqrt();
    let phase = (Complex64::i() * k * (-r + dist + c.r)).exp();
    let inv_y = if c.r < half_cell { inv_r_cell } else { 1.0 / c.r };
    let yhat = if c.r < half_cell {
        // cell average of the odd unit vector vanishes
        [0.0; 3]
    } else {
        [c.y[0] / c.r, c.y[1] / c.r, c.y[2] / c.r]
    };
    match j {
        // B¹_r(f) with |y|² div(f/|y|) = |y| div f - f·ŷ folded into the
        // kernel: r e^{..}/(4π|rσ-y|) (div f - (f·ŷ)/|y|).
        1 => {
            let f_rad = c.vector[0] * yhat[0] + c.vector[1] * yhat[1] + c.vector[2] * yhat[2];
            r / (4.0 * PI * dist) * phase * (c.div - f_rad * inv_y)
        }
        2 => r / (4.0 * PI * dist) * phase * c.scalar * inv_y,
        3 => r / (4.0 * PI * dist) * phase * c.v_pot * c.scalar,
        // B⁴_r(f) = -r ∇_y(e^{ik(-r+|rσ-y|+|y|)}/(4π|rσ-y|)) · f
        4 => {
            let u = [rs_y[0] / dist, rs_y[1] / dist, rs_y[2] / dist];
            let ik = Complex64::i() * k;
            let mut grad_dot_f = Complex64::ZERO;
            for a in 0..3 {
                let g = phase * (ik * (yhat[a] - u[a]) / dist + u[a] / (dist * dist));
                grad_dot_f += g * c.vector[a];
            }
            -r / (4.0 * PI) * grad_dot_f
        }
        _ => unreachable!(),
    }
}

fn limit_kernel_contrib(
    j: u8,
    c: &Cell,
    sigma: [f64; 3],
    k: Complex64,
    half_cell: f64,
    inv_r_cell: f64,
) -> Complex64 {
    let proj = sigma[0] * c.y[0] + sigma[1] * c.y[1] + sigma[2] * c.y[2];
    let phase = (Complex64::i() * k * (c.r - proj)).exp();
    let inv_y = if c.r < half_cell { inv_r_cell } else { 1.0 / c.r };
    let yhat = if c.r < half_cell {
        [0.0; 3]
    } else {
        [c.y[0] / c.r, c.y[1] / c.r, c.y[2] / c.r]
    };
    let ik = Complex64::i() * k;
    match j {
        // B∞¹(f) = -(4π)^{-1} ∫ (ŷ/|y| + ik(ŷ-σ)) · f e^{ik|y|(1-<σ,ŷ>)}
        1 => {
            let mut dot = Complex64::ZERO;
            for a in 0..3 {
                let kernel = Complex64::from(yhat[a] * inv_y) + ik * (yhat[a] - sigma[a]);
                dot += kernel * c.vector[a];
            }
            -phase * dot / (4.0 * PI)
        }
        2 => phase * c.scalar * inv_y / (4.0 * PI),
        3 => phase * c.v_pot * c.scalar / (4.0 * PI),
        4 => {
            let mut dot = Complex64::ZERO;
            for a in 0..3 {
                dot += Complex64::from(yhat[a] - sigma[a]) * c.vector[a];
            }
            -ik * phase * dot / (4.0 * PI)
        }
        _ => unreachable!(),
    }
}

/// The a-priori sup-in-r bound expressions (up to the implicit absolute
/// constant) for each operator family.
pub fn bound_expression(j: u8, k: SpectralPoint) -> f64 {
    let kk = k.k();
    let ak = kk.norm();
    let im = kk.im;
    match j {
        1 => (1.0 / (ak * ak)
            + 1.0 / (im * im)
            + ak / im.powf(1.5)
            + ak / (im * im)
            + 1.0 / im)
            .sqrt(),
        2 | 3 => (1.0 / (ak * ak)
            + 1.0 / (ak * ak * im * im)
            + 1.0 / (ak * im.sqrt())
            + 1.0 / (ak * im * im))
            .sqrt(),
        4 => bound_expression(1, k) + bound_expression(2, k),
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone)]
pub struct BoundAuditRow {
    pub k: Complex64,
    pub sample: usize,
    pub sup_over_r: f64,
    pub source_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct BoundAuditReport {
    pub j: u8,
    pub rows: Vec<BoundAuditRow>,
    pub max_ratio: f64,
}

/// Build a reproducible smooth compactly supported scalar sample.
pub fn audit_sample_scalar(grid: crate::fields::BoxGrid, seed: u64, radius: f64) -> GridField {
    GridField::from_fn_physical(grid, move |x| {
        let mut acc = Complex64::ZERO;
        for t in 0..3u64 {
            let c = [
                radius * 0.5 * (hashed_unit(seed ^ t, 1) - 0.5),
                radius * 0.5 * (hashed_unit(seed ^ t, 2) - 0.5),
                radius * 0.5 * (hashed_unit(seed ^ t, 3) - 0.5),
            ];
            let w = 0.4 + 0.5 * hashed_unit(seed ^ t, 4);
            let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
            let osc = 2.0 * PI * hashed_unit(seed ^ t, 5) * x[0];
            acc += Complex64::new(osc.cos(), osc.sin())
                * Complex64::from((-d2 / (2.0 * w * w)).exp());
        }
        // hard truncation window keeps the support certified
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let env = if r2 < radius * radius {
            ((1.0 - r2 / (radius * radius)).powi(3)) as f64
        } else {
            0.0
        };
        acc * env
    })
}

pub fn audit_sample_vector(
    grid: crate::fields::BoxGrid,
    seed: u64,
    radius: f64,
) -> [GridField; 3] {
    [
        audit_sample_scalar(grid, seed ^ 0x11, radius),
        audit_sample_scalar(grid, seed ^ 0x22, radius),
        audit_sample_scalar(grid, seed ^ 0x33, radius),
    ]
}

/// `L²` or weighted-`L²` source norm appropriate to the operator family.
pub fn source_norm(j: u8, input: &ModelOperatorInput) -> Result<f64> {
    let w = Weight;
    match (j, input) {
        (
            1,
            ModelOperatorInput::Vector(v) | ModelOperatorInput::VectorWithDiv(v, _),
        ) => {
            let mut total = 0.0;
            for comp in v.iter() {
                total += comp.to_physical()?.l2_norm().powi(2);
            }
            Ok(total.sqrt())
        }
        (
            4,
            ModelOperatorInput::Vector(v) | ModelOperatorInput::VectorWithDiv(v, _),
        ) => {
            let mut total = 0.0;
            for comp in v.iter() {
                total += crate::fields::weighted_norm(&comp.to_physical()?, &w)?.powi(2);
            }
            Ok(total.sqrt())
        }
        (2, ModelOperatorInput::Scalar(f)) => {
            crate::fields::weighted_norm(&f.to_physical()?, &w)
        }
        (3, ModelOperatorInput::Scalar(f)) => Ok(f.to_physical()?.l2_norm()),
        _ => Err(Error::InvalidParameter("bad audit input".into())),
    }
}

/// For each `(k, sample)`, the ratio `sup_r ‖B_r f‖ / (bound(k) ‖f‖)`;
/// the paper's constants are implicit, so the report carries the observed
/// maximum for stability comparisons across refinements.
pub fn bound_audit(
    j: u8,
    k_samples: &[SpectralPoint],
    grid: crate::fields::BoxGrid,
    n_samples: usize,
    radius_set: &[f64],
    pot: Option<&DivergenceFormPotential>,
    quad: &Arc<SphereQuadrature>,
) -> Result<BoundAuditReport> {
    let support = 4.0;
    let mut rows = Vec::new();
    for k in k_samples {
        for s in 0..n_samples {
            let seed = (s as u64 + 1) * 7919;
            let scalar;
            let vector;
            let input = match j {
                1 | 4 => {
                    vector = audit_sample_vector(grid, seed, support);
                    ModelOperatorInput::Vector(&vector)
                }
                _ => {
                    scalar = audit_sample_scalar(grid, seed, support);
                    ModelOperatorInput::Scalar(&scalar)
                }
            };
            let norm = source_norm(j, &input)?;
            if norm == 0.0 {
                continue;
            }
            let vnorm = if j == 3 {
                pot.map(|p| p.shell_norm_v(2.0, 0, 16).map(|r| r.value))
                    .transpose()?
                    .unwrap_or(1.0)
            } else {
                1.0
            };
            let mut sup = 0.0f64;
            for r in radius_set {
                let trace =
                    model_operator(j, ModelOperatorMode::FiniteRadius(*r), &input, pot, *k, quad)?;
                sup = sup.max(trace.l2_norm());
            }
            let denom = bound_expression(j, *k) * norm * vnorm.max(1e-300);
            rows.push(BoundAuditRow {
                k: k.k(),
                sample: s,
                sup_over_r: sup,
                source_norm: norm,
                ratio: sup / denom,
            });
        }
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(BoundAuditReport { j, rows, max_ratio })
}
