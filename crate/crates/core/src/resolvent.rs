//! Free resolvent of `-Δ` and Lippmann-Schwinger solves for the perturbed
//! Green's functions of `H = -Δ + V` and `D = -div (1+V)∇` at `z = k²`,
//! `Im k > 0`.
//!
//! Point sources are handled in correction form: the singular factor
//! `G⁰(x-y)` stays analytic and only the bounded correction lives on the
//! grid.

use crate::error::{Error, Result};
use crate::fields::{spectral_gradient, BoxGrid, Direction, GridField, Side};
use crate::potentials::DivergenceFormPotential;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Wavenumber in the open upper half-plane, with `z = k²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    k: Complex64,
}

impl SpectralPoint {
    pub fn new(k: Complex64) -> Result<Self> {
        if !(k.im > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "wavenumber {k} must satisfy Im k > 0"
            )));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> Complex64 {
        self.k
    }

    pub fn z(&self) -> Complex64 {
        self.k * self.k
    }

    /// Membership in the rectangle `Π(a,b,h) = {Re k ∈ (a,b), Im k ∈ (0,h)}`.
    pub fn in_rectangle(&self, a: f64, b: f64, h: f64) -> bool {
        self.k.re > a && self.k.re < b && self.k.im > 0.0 && self.k.im < h
    }

    /// The reflected point `-conj(k)`, which satisfies `z' = conj(z)`.
    pub fn reflected(&self) -> SpectralPoint {
        SpectralPoint { k: -self.k.conj() }
    }
}

/// `G⁰(x, y, k²) = e^{ik|x-y|} / (4π|x-y|)`.
pub fn free_green(x: [f64; 3], y: [f64; 3], k: SpectralPoint) -> Result<Complex64> {
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    Ok(green0_of_distance(r, k.k()))
}

#[inline]
pub(crate) fn green0_of_distance(r: f64, k: Complex64) -> Complex64 {
    (Complex64::i() * k * r).exp() / Complex64::from(4.0 * PI * r)
}

/// `∇_x G⁰ = e^{ikr} (ikr - 1)/(4π r²) · (x-y)/r`; zero inside the singular
/// ball `r < r_zero` where the cell average vanishes by symmetry.
pub(crate) fn grad_green0(d: [f64; 3], k: Complex64, r_zero: f64) -> [Complex64; 3] {
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r < r_zero {
        return [Complex64::ZERO; 3];
    }
    let e = (Complex64::i() * k * r).exp();
    let radial = e * (Complex64::i() * k * r - 1.0) / Complex64::from(4.0 * PI * r * r);
    [radial * d[0] / r, radial * d[1] / r, radial * d[2] / r]
}

/// Mean of `G⁰` over a ball of the cell's volume, used for the cell that
/// contains the source point.
pub(crate) fn cell_average_green0(k: Complex64, grid: BoxGrid) -> Complex64 {
    let h = grid.spacing();
    let r_eq = h * (3.0 / (4.0 * PI)).cbrt();
    let ik = Complex64::i() * k;
    // ∫_ball G⁰ dV = ∫_0^R e^{ikr} r dr = e^{ikR}(R/(ik) - 1/(ik)²) + 1/(ik)²
    let integral = (ik * r_eq).exp() * (r_eq / ik - 1.0 / (ik * ik)) + 1.0 / (ik * ik);
    integral / Complex64::from(h * h * h)
}

/// Options shared by the resolvent applications and Green solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Relative residual target for the Krylov iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Required bound on `exp(-Im k L/4)`; the desk-scale default admits
    /// `Im k >= 0.18` at `L = 24`.
    pub margin_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 600,
            margin_tol: 0.35,
        }
    }
}

/// Which perturbed operator a solve refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `H = -Δ + V`
    Schrodinger,
    /// `D = -div (1+V)∇`
    DivergenceForm,
}

/// Resolvent multiplier `1/(4π²|ξ|² - z)` on the symmetric band: the
/// unpaired Nyquist planes are projected out so the discrete operator is
/// exactly even under `ξ -> -ξ` (keeps conjugation identities exact).
fn resolvent_multiplier_entry(grid: BoxGrid, flat: usize, z: Complex64) -> Complex64 {
    let n = grid.n();
    let iz = flat % n;
    let iy = (flat / n) % n;
    let ix = flat / (n * n);
    if ix == n / 2 || iy == n / 2 || iz == n / 2 {
        return Complex64::ZERO;
    }
    let xi = grid.freq_of(flat);
    let xi2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    1.0 / (Complex64::from(4.0 * PI * PI * xi2) - z)
}

/// `(−Δ − z)^{-1}` as the Fourier multiplier `1/(4π²|ξ|² − z)`; no margin
/// policing (used by contour quadrature at arbitrary regular `z`).
pub fn free_resolvent_z(f: &GridField, z: Complex64) -> Result<GridField> {
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "z = {z} lies on the essential spectrum"
        )));
    }
    let grid = f.grid();
    let mut hat = f.to_fourier()?;
    hat.data_mut()
        .par_iter_mut()
        .enumerate()
        .for_each(|(flat, v)| *v *= resolvent_multiplier_entry(grid, flat, z));
    hat.transform(Direction::Inverse)
}

/// `R⁰_z f` with the box-margin precondition enforced.
pub fn apply_free_resolvent(
    f: &GridField,
    k: SpectralPoint,
    opts: &SolveOptions,
) -> Result<GridField> {
    let factor = f.grid().margin_factor(k.k());
    if factor >= opts.margin_tol {
        return Err(Error::MarginViolation {
            k: k.k(),
            factor,
            tol: opts.margin_tol,
        });
    }
    free_resolvent_z(f, k.z())
}

/// Potential data sampled on the grid for one solve.
pub(crate) struct SampledPotential {
    /// `V` at the nodes.
    pub v: Vec<f64>,
    /// `V/(1+V)` at the nodes (divergence form only).
    pub v_tilde: Vec<f64>,
    /// `∇V/(1+V)` at the nodes (divergence form only).
    pub qvec: Option<[Vec<f64>; 3]>,
    pub sup_v: f64,
}

impl SampledPotential {
    pub fn new(
        grid: BoxGrid,
        pot: &DivergenceFormPotential,
        need_gradient: bool,
    ) -> Result<Self> {
        let cells = grid.cells();
        let mut v = vec![0.0; cells];
        v.par_iter_mut().enumerate().for_each(|(flat, out)| {
            *out = pot.v(grid.coord_of(flat));
        });
        let sup_v = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut v_tilde = vec![0.0; cells];
        let qvec = if need_gradient {
            if sup_v >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "divergence-form operator needs sup|V| < 1, sampled {sup_v:.3}"
                )));
            }
            v_tilde
                .par_iter_mut()
                .zip(v.par_iter())
                .for_each(|(t, vv)| *t = vv / (1.0 + vv));
            let grads: Vec<[f64; 3]> = (0..cells)
                .into_par_iter()
                .map(|flat| {
                    let x = grid.coord_of(flat);
                    let g = pot.grad_v(x)?;
                    let denom = 1.0 + pot.v(x);
                    Ok([g[0] / denom, g[1] / denom, g[2] / denom])
                })
                .collect::<Result<Vec<_>>>()?;
            let mut comps = [vec![0.0; cells], vec![0.0; cells], vec![0.0; cells]];
            for (flat, g) in grads.iter().enumerate() {
                comps[0][flat] = g[0];
                comps[1][flat] = g[1];
                comps[2][flat] = g[2];
            }
            Some(comps)
        } else {
            None
        };
        Ok(Self {
            v,
            v_tilde,
            qvec,
            sup_v,
        })
    }
}

/// Complex BiCGStab with a fixed-order (deterministic) inner product.
pub(crate) fn bicgstab(
    apply: &dyn Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
    x0: Option<Vec<Complex64>>,
) -> Result<(Vec<Complex64>, f64, usize, Vec<f64>)> {
    let n = b.len();
    let dot = |a: &[Complex64], c: &[Complex64]| -> Complex64 {
        a.iter().zip(c).map(|(p, q)| p.conj() * q).sum()
    };
    let norm = |a: &[Complex64]| -> f64 { dot(a, a).re.sqrt() };
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![Complex64::ZERO; n], 0.0, 0, vec![]));
    }
    let mut x = x0.unwrap_or_else(|| vec![Complex64::ZERO; n]);
    let ax = apply(&x);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bb, aa)| bb - aa).collect();
    let r0 = r.clone();
    let mut rho = Complex64::from(1.0);
    let mut alpha = Complex64::from(1.0);
    let mut omega = Complex64::from(1.0);
    let mut p = vec![Complex64::ZERO; n];
    let mut v = vec![Complex64::ZERO; n];
    let mut history = Vec::new();
    let mut res = norm(&r) / b_norm;
    history.push(res);
    if res <= tol {
        return Ok((x, res, 0, history));
    }
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.norm() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = apply(&p);
        let denom = dot(&r0, &v);
        if denom.norm() < 1e-300 {
            break;
        }
        alpha = rho / denom;
        let s: Vec<Complex64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        let s_norm = norm(&s) / b_norm;
        if s_norm <= tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            history.push(s_norm);
            return Ok((x, s_norm, it, history));
        }
        let t = apply(&s);
        let tt = dot(&t, &t);
        if tt.norm() < 1e-300 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r) / b_norm;
        history.push(res);
        if res <= tol {
            return Ok((x, res, it, history));
        }
    }
    Err(Error::SolverDidNotConverge {
        tol,
        iterations: history.len().saturating_sub(1),
        residual: res,
        history,
    })
}

fn multiplier_table(grid: BoxGrid, z: Complex64) -> Vec<Complex64> {
    (0..grid.cells())
        .into_par_iter()
        .map(|flat| resolvent_multiplier_entry(grid, flat, z))
        .collect()
}

/// Raw-slice free resolvent used inside Krylov iterations.
fn r0_apply(grid: BoxGrid, table: &[Complex64], data: &[Complex64]) -> Vec<Complex64> {
    let f = GridField::from_data(grid, Side::Physical, data.to_vec()).unwrap();
    let mut hat = f.transform(Direction::Forward).unwrap();
    hat.data_mut()
        .par_iter_mut()
        .zip(table.par_iter())
        .for_each(|(v, m)| *v *= m);
    hat.transform(Direction::Inverse).unwrap().into_data()
}

/// `w + R⁰(V w)` for the Schrödinger Lippmann-Schwinger equation.
fn schrodinger_apply(
    grid: BoxGrid,
    table: &[Complex64],
    v: &[f64],
    w: &[Complex64],
) -> Vec<Complex64> {
    let vw: Vec<Complex64> = v
        .par_iter()
        .zip(w.par_iter())
        .map(|(vv, ww)| ww * *vv)
        .collect();
    let r0vw = r0_apply(grid, table, &vw);
    w.par_iter()
        .zip(r0vw.par_iter())
        .map(|(a, b)| a + b)
        .collect()
}

/// `w + R⁰(z Ṽ w - q·∇w)` for the divergence-form point-source equation.
fn divergence_apply(
    grid: BoxGrid,
    table: &[Complex64],
    z: Complex64,
    v_tilde: &[f64],
    qvec: &[Vec<f64>; 3],
    w: &[Complex64],
) -> Vec<Complex64> {
    let f = GridField::from_data(grid, Side::Physical, w.to_vec()).unwrap();
    let grads = spectral_gradient(&f).unwrap();
    let gx = grads[0].to_physical().unwrap();
    let gy = grads[1].to_physical().unwrap();
    let gz = grads[2].to_physical().unwrap();
    let source: Vec<Complex64> = (0..w.len())
        .into_par_iter()
        .map(|i| {
            z * v_tilde[i] * w[i]
                - (qvec[0][i] * gx.data()[i]
                    + qvec[1][i] * gy.data()[i]
                    + qvec[2][i] * gz.data()[i])
        })
        .collect();
    let r0s = r0_apply(grid, table, &source);
    w.par_iter()
        .zip(r0s.par_iter())
        .map(|(a, b)| a + b)
        .collect()
}

/// `u - R⁰ div(V ∇u)`: second-kind form of `(D - z)u = f` for grid sources.
/// `div(V ∇·)` is self-adjoint, so this route keeps the resolvent's adjoint
/// identity exact on the grid; it also needs no `∇V`.
fn divergence_field_apply(
    grid: BoxGrid,
    table: &[Complex64],
    v: &[f64],
    u: &[Complex64],
) -> Vec<Complex64> {
    let f = GridField::from_data(grid, Side::Physical, u.to_vec()).unwrap();
    let grads = spectral_gradient(&f).unwrap();
    let comps: [GridField; 3] = std::array::from_fn(|a| {
        let mut g = grads[a].to_physical().unwrap();
        g.data_mut()
            .par_iter_mut()
            .zip(v.par_iter())
            .for_each(|(gv, vv)| *gv *= *vv);
        g
    });
    let div = crate::fields::spectral_divergence(&comps).unwrap();
    let r0d = r0_apply(grid, table, div.data());
    u.par_iter()
        .zip(r0d.par_iter())
        .map(|(a, b)| a - b)
        .collect()
}

/// Perturbed Green's function in correction form
/// `G(·, y, z) = coeff0 · G⁰(· - y) + w`.
#[derive(Debug, Clone)]
pub struct GreenSolution {
    pub op: OperatorKind,
    pub k: SpectralPoint,
    pub source: [f64; 3],
    /// Multiplies the analytic `G⁰(· - y)` part: 1 for `H`, `1/(1+V(y))`
    /// for `D`.
    pub coeff0: Complex64,
    correction: GridField,
    correction_hat: GridField,
    pub residual: f64,
    pub iterations: usize,
}

impl GreenSolution {
    pub fn grid(&self) -> BoxGrid {
        self.correction.grid()
    }

    /// Grid-represented correction `w = G - coeff0 G⁰(·-y)` (physical side).
    pub fn correction(&self) -> &GridField {
        &self.correction
    }

    pub fn correction_hat(&self) -> &GridField {
        &self.correction_hat
    }

    /// `G(x, y, z)` at off-grid points.
    pub fn green_at(&self, points: &[[f64; 3]]) -> Result<Vec<Complex64>> {
        let w = self.correction_hat.interpolate(points)?;
        points
            .iter()
            .zip(w)
            .map(|(p, wv)| Ok(self.coeff0 * free_green(*p, self.source, self.k)? + wv))
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        op: OperatorKind,
        k: SpectralPoint,
        source: [f64; 3],
        coeff0: Complex64,
        data: Vec<Complex64>,
        grid: BoxGrid,
        residual: f64,
        iterations: usize,
    ) -> Result<Self> {
        let correction = GridField::from_data(grid, Side::Physical, data)?;
        let correction_hat = correction.transform(Direction::Forward)?;
        Ok(Self {
            op,
            k,
            source,
            coeff0,
            correction,
            correction_hat,
            residual,
            iterations,
        })
    }
}

/// Sample `G⁰(x - y)` on the grid, replacing the source cell by the exact
/// ball average (node values elsewhere keep the spectral collocation
/// consistent).
pub(crate) fn sample_g0(grid: BoxGrid, y: [f64; 3], k: Complex64) -> Vec<Complex64> {
    let singular = grid.nearest_index(y);
    let avg = cell_average_green0(k, grid);
    let half = grid.spacing() * 0.5;
    (0..grid.cells())
        .into_par_iter()
        .map(|flat| {
            let x = grid.coord_of(flat);
            let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if flat == singular || r < half {
                avg
            } else {
                green0_of_distance(r, k)
            }
        })
        .collect()
}

/// Sample `∇G⁰(x - y)`: zero on the source cell, where the ball average of
/// the odd kernel vanishes.
pub(crate) fn sample_grad_g0(grid: BoxGrid, y: [f64; 3], k: Complex64) -> Vec<[Complex64; 3]> {
    let half = grid.spacing() * 0.5;
    (0..grid.cells())
        .into_par_iter()
        .map(|flat| {
            let x = grid.coord_of(flat);
            let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            grad_green0(d, k, half)
        })
        .collect()
}

/// Solve `(H - z) G = δ_y` in correction form:
/// `(I + R⁰V) w = -R⁰(V G⁰(·-y))`.
pub fn solve_schrodinger_green(
    y: [f64; 3],
    k: SpectralPoint,
    pot: &DivergenceFormPotential,
    grid: BoxGrid,
    opts: &SolveOptions,
) -> Result<GreenSolution> {
    let sampled = SampledPotential::new(grid, pot, false)?;
    let z = k.z();
    let table = multiplier_table(grid, z);
    let g0 = sample_g0(grid, y, k.k());
    let vg0: Vec<Complex64> = sampled
        .v
        .par_iter()
        .zip(g0.par_iter())
        .map(|(vv, gg)| -gg * *vv)
        .collect();
    let b = r0_apply(grid, &table, &vg0);
    let apply = |w: &[Complex64]| schrodinger_apply(grid, &table, &sampled.v, w);
    let (w, residual, iterations, _) = bicgstab(&apply, &b, opts.tol, opts.max_iter, None)?;
    GreenSolution::from_parts(
        OperatorKind::Schrodinger,
        k,
        y,
        Complex64::from(1.0),
        w,
        grid,
        residual,
        iterations,
    )
}

/// Solve `(D - z) G = δ_y` in correction form with the known part
/// `G⁰(·-y)/(1+V(y))`:
/// `(I + zR⁰Ṽ - R⁰ q·∇) w = -zR⁰(Ṽ g₀) + R⁰(q·∇g₀)`.
pub fn solve_divergence_green(
    y: [f64; 3],
    k: SpectralPoint,
    pot: &DivergenceFormPotential,
    grid: BoxGrid,
    opts: &SolveOptions,
) -> Result<GreenSolution> {
    let sampled = SampledPotential::new(grid, pot, true)?;
    let qvec = sampled.qvec.as_ref().unwrap();
    let z = k.z();
    let table = multiplier_table(grid, z);
    let coeff0 = Complex64::from(1.0 / (1.0 + pot.v(y)));
    let g0 = sample_g0(grid, y, k.k());
    let dg0 = sample_grad_g0(grid, y, k.k());
    // Source: -z Ṽ g₀ + q·∇g₀, all entries bounded after the cell rules.
    let source: Vec<Complex64> = (0..grid.cells())
        .into_par_iter()
        .map(|flat| {
            let grad = dg0[flat];
            let qg = qvec[0][flat] * grad[0] + qvec[1][flat] * grad[1] + qvec[2][flat] * grad[2];
            coeff0 * (-z * sampled.v_tilde[flat] * g0[flat] + qg)
        })
        .collect();
    let b = r0_apply(grid, &table, &source);
    let apply = |w: &[Complex64]| divergence_apply(grid, &table, z, &sampled.v_tilde, qvec, w);
    let (w, residual, iterations, _) = bicgstab(&apply, &b, opts.tol, opts.max_iter, None)?;
    GreenSolution::from_parts(
        OperatorKind::DivergenceForm,
        k,
        y,
        coeff0,
        w,
        grid,
        residual,
        iterations,
    )
}

/// `(op - z)^{-1} f` for a grid source (no singular part); `z = k²`.
pub fn apply_resolvent(
    f: &GridField,
    k: SpectralPoint,
    op: OperatorKind,
    pot: &DivergenceFormPotential,
    opts: &SolveOptions,
) -> Result<GridField> {
    apply_resolvent_z(f, k.z(), op, pot, opts)
}

/// Same as [`apply_resolvent`] at a raw spectral parameter `z ∉ [0,∞)`;
/// contour quadrature calls this on both half-planes.
pub fn apply_resolvent_z(
    f: &GridField,
    z: Complex64,
    op: OperatorKind,
    pot: &DivergenceFormPotential,
    opts: &SolveOptions,
) -> Result<GridField> {
    let grid = f.grid();
    let phys = f.to_physical()?;
    let table = multiplier_table(grid, z);
    match op {
        OperatorKind::Schrodinger => {
            let sampled = SampledPotential::new(grid, pot, false)?;
            let b = r0_apply(grid, &table, phys.data());
            let apply = |w: &[Complex64]| schrodinger_apply(grid, &table, &sampled.v, w);
            let (u, _res, _it, _) = bicgstab(&apply, &b, opts.tol, opts.max_iter, None)?;
            GridField::from_data(grid, Side::Physical, u)
        }
        OperatorKind::DivergenceForm => {
            let sampled = SampledPotential::new(grid, pot, false)?;
            if sampled.sup_v >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "divergence-form operator needs sup|V| < 1, sampled {:.3}",
                    sampled.sup_v
                )));
            }
            let b = r0_apply(grid, &table, phys.data());
            let apply = |u: &[Complex64]| divergence_field_apply(grid, &table, &sampled.v, u);
            let (u, _res, _it, _) = bicgstab(&apply, &b, opts.tol, opts.max_iter, None)?;
            GridField::from_data(grid, Side::Physical, u)
        }
    }
}
