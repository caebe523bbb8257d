//! Admissible potential families `V = div Q` and their measurements: shell
//! suprema, tail norms, truncation and shifting.

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre_on, hashed_unit, kahan_sum};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

/// The weight `w(x) = 1` for `|x| > 1`, `|x|^{-2}` for `|x| < 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Weight;

impl Weight {
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if r2 < 1.0 {
            1.0 / r2
        } else {
            1.0
        }
    }
}

/// One trigonometric term `amp * sin(<freq, x> + phase)` of a vector field.
#[derive(Debug, Clone, Copy)]
pub struct TrigTerm {
    pub amp: [f64; 3],
    pub freq: [f64; 3],
    pub phase: f64,
}

impl TrigTerm {
    pub fn sin(amp: [f64; 3], freq: [f64; 3]) -> Self {
        Self {
            amp,
            freq,
            phase: 0.0,
        }
    }

    pub fn cos(amp: [f64; 3], freq: [f64; 3]) -> Self {
        Self {
            amp,
            freq,
            phase: 0.5 * PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationMode {
    Inner,
    Outer,
}

/// `ℓ^p` norm of shell suprema from `tail_start`, with the per-shell
/// estimates retained.
#[derive(Debug, Clone)]
pub struct ShellNormReport {
    pub p: f64,
    pub tail_start: usize,
    pub per_shell: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
struct RandomBump {
    center: [f64; 3],
    coeff: f64,
}

#[derive(Debug)]
enum Kernel {
    Oscillating {
        gamma: f64,
        terms: Vec<TrigTerm>,
    },
    Random {
        bumps: Vec<RandomBump>,
        /// Cumulative mass `m(r) = 4π ∫_0^r φ(s) s² ds` on a fine table.
        mass_table: Vec<f64>,
        mass_total: f64,
    },
    SharpnessRadial {
        centers: Vec<f64>,
        amps: Vec<f64>,
    },
    Truncated {
        inner: Arc<DivergenceFormPotential>,
        rho: f64,
        mode: TruncationMode,
    },
    Shifted {
        inner: Arc<DivergenceFormPotential>,
        y: [f64; 3],
    },
    Scaled {
        inner: Arc<DivergenceFormPotential>,
        c: f64,
    },
}

/// A potential `V = div Q` with analytic `V`, `Q` and (where available)
/// derivatives; immutable and safe to evaluate concurrently.
#[derive(Debug)]
pub struct DivergenceFormPotential {
    kernel: Kernel,
    family: String,
    params: Vec<(String, String)>,
    smoothness: u8,
}

const MASS_TABLE_LEN: usize = 2048;

fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Standard mollifier normalized to `φ(0) = 1`: `exp(1 - 1/(1-s²))` on
/// `(-1, 1)`, zero outside.
pub fn mollifier(s: f64) -> f64 {
    let s2 = s * s;
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

pub fn mollifier_deriv(s: f64) -> f64 {
    let s2 = s * s;
    if s2 >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s2;
        mollifier(s) * (-2.0 * s / (d * d))
    }
}

impl DivergenceFormPotential {
    pub fn zero() -> Self {
        Self {
            kernel: Kernel::Oscillating {
                gamma: 1.0,
                terms: Vec::new(),
            },
            family: "zero".into(),
            params: Vec::new(),
            smoothness: 2,
        }
    }

    /// `Q(x) = q(|x|) P(x)` with `q(r) = (r²+1)^{-γ}` and trigonometric `P`.
    pub fn make_oscillating(gamma: f64, terms: Vec<TrigTerm>) -> Result<Self> {
        if !(gamma > 0.25) {
            return Err(Error::InvalidParameter(format!(
                "decay exponent gamma = {gamma} must exceed 1/4 (shell norms diverge otherwise)"
            )));
        }
        let params = vec![
            ("gamma".into(), format!("{gamma}")),
            ("terms".into(), format!("{}", terms.len())),
        ];
        Ok(Self {
            kernel: Kernel::Oscillating { gamma, terms },
            family: "oscillating".into(),
            params,
            smoothness: 2,
        })
    }

    /// Finite sum of disjointly supported mollifier bumps on the lattice
    /// `2Z³`, signs drawn Rademacher from a counter-based generator, decay
    /// `a_j = (1+|x_j|)^{-1/2-ε}`; `Q` is the Newtonian field of `V`.
    pub fn make_random(epsilon: f64, seed: u64, box_radius: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay margin epsilon = {epsilon} must be positive"
            )));
        }
        if box_radius < 2.0 {
            return Err(Error::InvalidParameter(format!(
                "box radius {box_radius} too small, no bumps fit"
            )));
        }
        let reach = box_radius.floor() as i64 / 2;
        let mut bumps = Vec::new();
        for ix in -reach..=reach {
            for iy in -reach..=reach {
                for iz in -reach..=reach {
                    let center = [2.0 * ix as f64, 2.0 * iy as f64, 2.0 * iz as f64];
                    let r = norm3(center);
                    if r > box_radius {
                        continue;
                    }
                    let key = pack_lattice(ix, iy, iz);
                    let sign = if hashed_unit(seed, key) < 0.5 { -1.0 } else { 1.0 };
                    let amp = (1.0 + r).powf(-0.5 - epsilon);
                    bumps.push(RandomBump {
                        center,
                        coeff: sign * amp,
                    });
                }
            }
        }
        // Deterministic order independent of construction loops.
        bumps.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
        let mut mass_table = vec![0.0; MASS_TABLE_LEN + 1];
        let mut acc = 0.0;
        let dr = 1.0 / MASS_TABLE_LEN as f64;
        for i in 0..MASS_TABLE_LEN {
            let (xs, ws) = gauss_legendre_on(4, i as f64 * dr, (i + 1) as f64 * dr);
            acc += 4.0
                * PI
                * kahan_sum(xs.iter().zip(&ws).map(|(s, w)| w * mollifier(*s) * s * s));
            mass_table[i + 1] = acc;
        }
        let params = vec![
            ("epsilon".into(), format!("{epsilon}")),
            ("seed".into(), format!("{seed}")),
            ("box_radius".into(), format!("{box_radius}")),
            ("bumps".into(), format!("{}", bumps.len())),
        ];
        Ok(Self {
            kernel: Kernel::Random {
                bumps,
                mass_total: acc,
                mass_table,
            },
            family: "random".into(),
            params,
            smoothness: 2,
        })
    }

    /// Radial `Q = q(|x|) x̂` with `q(r) = Σ_n a_n φ(r - c_n)`, `a_n = n^{-γ}`
    /// and widely separated bump centers (factorials, truncated at `n_max`).
    pub fn make_sharpness_radial(gamma: f64, n_max: u32) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sharpness exponent gamma = {gamma} outside (0, 1)"
            )));
        }
        if n_max < 2 {
            return Err(Error::InvalidParameter(
                "need at least one bump (n_max >= 2)".into(),
            ));
        }
        let mut centers = Vec::new();
        let mut amps = Vec::new();
        for n in 2..=n_max {
            let c = (1..=n).fold(1.0f64, |acc, j| acc * j as f64);
            centers.push(c);
            amps.push((n as f64).powf(-gamma));
        }
        let params = vec![
            ("gamma".into(), format!("{gamma}")),
            ("n_max".into(), format!("{n_max}")),
        ];
        Ok(Self {
            kernel: Kernel::SharpnessRadial { centers, amps },
            family: "sharpness_radial".into(),
            params,
            smoothness: 2,
        })
    }

    /// `Q_(ρ) = α_ρ(|x|) Q` (inner) or the complementary tail (outer), with a
    /// quintic-smoothstep transition on `[ρ, ρ+1]`.
    pub fn truncate(self: &Arc<Self>, rho: f64, mode: TruncationMode) -> Result<Self> {
        if !(rho > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation radius {rho} must exceed 1"
            )));
        }
        let params = vec![
            ("rho".into(), format!("{rho}")),
            ("mode".into(), format!("{mode:?}")),
            ("inner_family".into(), self.family.clone()),
        ];
        Ok(Self {
            kernel: Kernel::Truncated {
                inner: Arc::clone(self),
                rho,
                mode,
            },
            family: format!("{}:{}", self.family, match mode {
                TruncationMode::Inner => "truncated",
                TruncationMode::Outer => "tail",
            }),
            params,
            smoothness: self.smoothness,
        })
    }

    /// `Q_[y](x) = Q(x - y)`.
    pub fn shift(self: &Arc<Self>, y: [f64; 3]) -> Self {
        Self {
            kernel: Kernel::Shifted {
                inner: Arc::clone(self),
                y,
            },
            family: format!("{}:shifted", self.family),
            params: vec![("y".into(), format!("{y:?}"))],
            smoothness: self.smoothness,
        }
    }

    /// Coupling scale `Q -> c Q`, `V -> c V`.
    pub fn scaled(self: &Arc<Self>, c: f64) -> Self {
        Self {
            kernel: Kernel::Scaled {
                inner: Arc::clone(self),
                c,
            },
            family: self.family.clone(),
            params: vec![("scale".into(), format!("{c}"))],
            smoothness: self.smoothness,
        }
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }

    pub fn smoothness(&self) -> u8 {
        self.smoothness
    }

    pub fn v(&self, x: [f64; 3]) -> f64 {
        match &self.kernel {
            Kernel::Oscillating { gamma, terms } => {
                let r = norm3(x);
                // q'(r)/r is smooth; no origin guard needed.
                let g = qprime_over_r(*gamma, r);
                let q = radial_q(*gamma, r);
                let mut v = 0.0;
                for t in terms {
                    let (s, c) = (dot3(t.freq, x) + t.phase).sin_cos();
                    v += g * dot3(x, t.amp) * s + q * dot3(t.amp, t.freq) * c;
                }
                v
            }
            Kernel::Random { bumps, .. } => {
                let mut v = 0.0;
                for b in bumps {
                    let d = [x[0] - b.center[0], x[1] - b.center[1], x[2] - b.center[2]];
                    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    if r2 < 1.0 {
                        v += b.coeff * mollifier(r2.sqrt());
                    }
                }
                v
            }
            Kernel::SharpnessRadial { centers, amps } => {
                let r = norm3(x);
                // V = q'(r) + 2 q(r)/r.
                let mut v = 0.0;
                for (c, a) in centers.iter().zip(amps) {
                    let s = r - c;
                    if s.abs() < 1.0 {
                        v += a * (mollifier_deriv(s) + 2.0 * mollifier(s) / r);
                    }
                }
                v
            }
            Kernel::Truncated { inner, rho, mode } => {
                let r = norm3(x);
                let (alpha, dalpha, _) = cutoff(r, *rho);
                let inner_v = inner.v(x);
                let inner_q = inner.q(x);
                let radial = if r > 0.0 { dot3(x, inner_q) / r } else { 0.0 };
                let v_in = dalpha * radial + alpha * inner_v;
                match mode {
                    TruncationMode::Inner => v_in,
                    TruncationMode::Outer => inner_v - v_in,
                }
            }
            Kernel::Shifted { inner, y } => inner.v([x[0] - y[0], x[1] - y[1], x[2] - y[2]]),
            Kernel::Scaled { inner, c } => c * inner.v(x),
        }
    }

    pub fn q(&self, x: [f64; 3]) -> [f64; 3] {
        match &self.kernel {
            Kernel::Oscillating { gamma, terms } => {
                let r = norm3(x);
                let q = radial_q(*gamma, r);
                let mut out = [0.0; 3];
                for t in terms {
                    let s = (dot3(t.freq, x) + t.phase).sin();
                    for a in 0..3 {
                        out[a] += q * t.amp[a] * s;
                    }
                }
                out
            }
            Kernel::Random {
                bumps,
                mass_table,
                mass_total,
            } => {
                let mut out = [0.0; 3];
                for b in bumps {
                    let d = [x[0] - b.center[0], x[1] - b.center[1], x[2] - b.center[2]];
                    let r = norm3(d);
                    let f = radial_newton_field(r, mass_table, *mass_total);
                    // f(r) r̂; as r -> 0, f/r -> φ(0)/3.
                    let scale = if r > 1e-9 { f / r } else { mollifier(0.0) / 3.0 };
                    for a in 0..3 {
                        out[a] += b.coeff * scale * d[a];
                    }
                }
                out
            }
            Kernel::SharpnessRadial { centers, amps } => {
                let r = norm3(x);
                let mut q = 0.0;
                for (c, a) in centers.iter().zip(amps) {
                    let s = r - c;
                    if s.abs() < 1.0 {
                        q += a * mollifier(s);
                    }
                }
                if r > 1e-12 {
                    [q * x[0] / r, q * x[1] / r, q * x[2] / r]
                } else {
                    [0.0; 3]
                }
            }
            Kernel::Truncated { inner, rho, mode } => {
                let r = norm3(x);
                let (alpha, _, _) = cutoff(r, *rho);
                let inner_q = inner.q(x);
                let factor = match mode {
                    TruncationMode::Inner => alpha,
                    TruncationMode::Outer => 1.0 - alpha,
                };
                [factor * inner_q[0], factor * inner_q[1], factor * inner_q[2]]
            }
            Kernel::Shifted { inner, y } => inner.q([x[0] - y[0], x[1] - y[1], x[2] - y[2]]),
            Kernel::Scaled { inner, c } => {
                let q = inner.q(x);
                [c * q[0], c * q[1], c * q[2]]
            }
        }
    }

    /// Gradient of `V`, needed by the divergence-form resolvent.
    pub fn grad_v(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        match &self.kernel {
            Kernel::Oscillating { gamma, terms } => {
                let r = norm3(x);
                let q = radial_q(*gamma, r);
                let g = qprime_over_r(*gamma, r);
                let dg = dqprime_over_r_dr_over_r(*gamma, r);
                let mut out = [0.0; 3];
                for t in terms {
                    let arg = dot3(t.freq, x) + t.phase;
                    let (s, c) = arg.sin_cos();
                    let xp = dot3(x, t.amp);
                    let af = dot3(t.amp, t.freq);
                    for j in 0..3 {
                        // d/dx_j [ g <x,A> sin + q <A,ω> cos ]
                        out[j] += dg * x[j] * xp * s
                            + g * (t.amp[j] * s + xp * t.freq[j] * c)
                            + g * x[j] * af * c
                            - q * af * t.freq[j] * s;
                    }
                }
                Ok(out)
            }
            Kernel::Random { bumps, .. } => {
                let mut out = [0.0; 3];
                for b in bumps {
                    let d = [x[0] - b.center[0], x[1] - b.center[1], x[2] - b.center[2]];
                    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    if r2 < 1.0 && r2 > 1e-18 {
                        let r = r2.sqrt();
                        let dphi = mollifier_deriv(r);
                        for a in 0..3 {
                            out[a] += b.coeff * dphi * d[a] / r;
                        }
                    }
                }
                Ok(out)
            }
            Kernel::SharpnessRadial { centers, amps } => {
                let r = norm3(x);
                if r < 1e-12 {
                    return Ok([0.0; 3]);
                }
                let mut dv = 0.0;
                for (c, a) in centers.iter().zip(amps) {
                    let s = r - c;
                    if s.abs() < 1.0 {
                        dv += a
                            * (mollifier_second_deriv(s) + 2.0 * mollifier_deriv(s) / r
                                - 2.0 * mollifier(s) / (r * r));
                    }
                }
                Ok([dv * x[0] / r, dv * x[1] / r, dv * x[2] / r])
            }
            Kernel::Truncated { inner, rho, mode } => {
                let r = norm3(x);
                let (alpha, dalpha, ddalpha) = cutoff(r, *rho);
                let inner_v = inner.v(x);
                let inner_gv = inner.grad_v(x)?;
                if dalpha == 0.0 && ddalpha == 0.0 {
                    // Away from the transition shell the chain rule collapses.
                    let gv_in = match mode {
                        TruncationMode::Inner => {
                            [alpha * inner_gv[0], alpha * inner_gv[1], alpha * inner_gv[2]]
                        }
                        TruncationMode::Outer => {
                            let b = 1.0 - alpha;
                            [b * inner_gv[0], b * inner_gv[1], b * inner_gv[2]]
                        }
                    };
                    return Ok(gv_in);
                }
                let inner_q = inner.q(x);
                let dq = inner.dq(x)?;
                let xhat = [x[0] / r, x[1] / r, x[2] / r];
                let radial = dot3(xhat, inner_q);
                let mut out = [0.0; 3];
                for j in 0..3 {
                    // d<x̂,Q>/dx_j = (Q_j - x̂_j <x̂,Q>)/r + Σ_i x̂_i ∂_j Q_i
                    let mut dqj = (inner_q[j] - xhat[j] * radial) / r;
                    for i in 0..3 {
                        dqj += xhat[i] * dq[i][j];
                    }
                    let grad_in = ddalpha * xhat[j] * radial
                        + dalpha * dqj
                        + dalpha * xhat[j] * inner_v
                        + alpha * inner_gv[j];
                    out[j] = match mode {
                        TruncationMode::Inner => grad_in,
                        TruncationMode::Outer => inner_gv[j] - grad_in,
                    };
                }
                Ok(out)
            }
            Kernel::Shifted { inner, y } => {
                inner.grad_v([x[0] - y[0], x[1] - y[1], x[2] - y[2]])
            }
            Kernel::Scaled { inner, c } => {
                let g = inner.grad_v(x)?;
                Ok([c * g[0], c * g[1], c * g[2]])
            }
        }
    }

    /// Jacobian `∂_j Q_i`.
    pub fn dq(&self, x: [f64; 3]) -> Result<[[f64; 3]; 3]> {
        match &self.kernel {
            Kernel::Oscillating { gamma, terms } => {
                let r = norm3(x);
                let q = radial_q(*gamma, r);
                let g = qprime_over_r(*gamma, r);
                let mut out = [[0.0; 3]; 3];
                for t in terms {
                    let arg = dot3(t.freq, x) + t.phase;
                    let (s, c) = arg.sin_cos();
                    for i in 0..3 {
                        for j in 0..3 {
                            out[i][j] +=
                                g * x[j] * t.amp[i] * s + q * t.amp[i] * t.freq[j] * c;
                        }
                    }
                }
                Ok(out)
            }
            Kernel::Random {
                bumps,
                mass_table,
                mass_total,
            } => {
                let mut out = [[0.0; 3]; 3];
                for b in bumps {
                    let d = [x[0] - b.center[0], x[1] - b.center[1], x[2] - b.center[2]];
                    let r = norm3(d);
                    if r < 1e-9 {
                        let c = b.coeff * mollifier(0.0) / 3.0;
                        for i in 0..3 {
                            out[i][i] += c;
                        }
                        continue;
                    }
                    let f = radial_newton_field(r, mass_table, *mass_total);
                    let fp = if r < 1.0 { mollifier(r) - 2.0 * f / r } else { -2.0 * f / r };
                    let xh = [d[0] / r, d[1] / r, d[2] / r];
                    for i in 0..3 {
                        for j in 0..3 {
                            let delta = if i == j { 1.0 } else { 0.0 };
                            out[i][j] +=
                                b.coeff * (fp * xh[i] * xh[j] + f * (delta - xh[i] * xh[j]) / r);
                        }
                    }
                }
                Ok(out)
            }
            Kernel::SharpnessRadial { centers, amps } => {
                let r = norm3(x);
                if r < 1e-12 {
                    return Ok([[0.0; 3]; 3]);
                }
                let mut qv = 0.0;
                let mut qp = 0.0;
                for (c, a) in centers.iter().zip(amps) {
                    let s = r - c;
                    if s.abs() < 1.0 {
                        qv += a * mollifier(s);
                        qp += a * mollifier_deriv(s);
                    }
                }
                let xh = [x[0] / r, x[1] / r, x[2] / r];
                let mut out = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        out[i][j] = qp * xh[i] * xh[j] + qv * (delta - xh[i] * xh[j]) / r;
                    }
                }
                Ok(out)
            }
            Kernel::Truncated { inner, rho, mode } => {
                let r = norm3(x);
                let (alpha, dalpha, _) = cutoff(r, *rho);
                let inner_q = inner.q(x);
                let dq = inner.dq(x)?;
                let xh = if r > 1e-12 {
                    [x[0] / r, x[1] / r, x[2] / r]
                } else {
                    [0.0; 3]
                };
                let mut out = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        let d_in = dalpha * xh[j] * inner_q[i] + alpha * dq[i][j];
                        out[i][j] = match mode {
                            TruncationMode::Inner => d_in,
                            TruncationMode::Outer => dq[i][j] - d_in,
                        };
                    }
                }
                Ok(out)
            }
            Kernel::Shifted { inner, y } => inner.dq([x[0] - y[0], x[1] - y[1], x[2] - y[2]]),
            Kernel::Scaled { inner, c } => {
                let mut d = inner.dq(x)?;
                for row in &mut d {
                    for v in row {
                        *v *= c;
                    }
                }
                Ok(d)
            }
        }
    }

    /// Frobenius magnitude of the Jacobian, for shell-norm reports.
    pub fn dq_magnitude(&self, x: [f64; 3]) -> Result<f64> {
        let d = self.dq(x)?;
        Ok(d.iter()
            .flat_map(|row| row.iter().map(|v| v * v))
            .sum::<f64>()
            .sqrt())
    }

    /// Sampled estimate of `‖V‖_∞` over `|x| <= r_max` (1.05 safety factor).
    pub fn sup_v_estimate(&self, r_max: f64) -> f64 {
        let dirs = fib_directions(256);
        let radii: Vec<f64> = (0..200).map(|i| r_max * (i as f64 + 0.5) / 200.0).collect();
        let sup = radii
            .par_iter()
            .map(|r| {
                let mut m: f64 = 0.0;
                for d in &dirs {
                    m = m.max(self.v([r * d[0], r * d[1], r * d[2]]).abs());
                }
                m
            })
            .reduce(|| 0.0, f64::max)
            .max(self.v([0.0, 0.0, 0.0]).abs());
        1.05 * sup
    }

    pub fn shell_norm_v(&self, p: f64, tail_start: usize, shell_cap: usize) -> Result<ShellNormReport> {
        shell_norm(|x| self.v(x), p, tail_start, shell_cap)
    }

    pub fn shell_norm_q(&self, p: f64, tail_start: usize, shell_cap: usize) -> Result<ShellNormReport> {
        shell_norm(|x| norm3(self.q(x)), p, tail_start, shell_cap)
    }
}

fn pack_lattice(ix: i64, iy: i64, iz: i64) -> u64 {
    let enc = |v: i64| (v + (1 << 20)) as u64 & 0x3f_ffff;
    (enc(ix) << 42) | (enc(iy) << 21) | enc(iz)
}

fn radial_q(gamma: f64, r: f64) -> f64 {
    (r * r + 1.0).powf(-gamma)
}

/// `q'(r)/r = -2γ (r²+1)^{-γ-1}`, smooth through the origin.
fn qprime_over_r(gamma: f64, r: f64) -> f64 {
    -2.0 * gamma * (r * r + 1.0).powf(-gamma - 1.0)
}

/// `(d/dr [q'(r)/r]) / r = 4γ(γ+1) (r²+1)^{-γ-2}`, also smooth.
fn dqprime_over_r_dr_over_r(gamma: f64, r: f64) -> f64 {
    4.0 * gamma * (gamma + 1.0) * (r * r + 1.0).powf(-gamma - 2.0)
}

fn mollifier_second_deriv(s: f64) -> f64 {
    let s2 = s * s;
    if s2 >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - s2;
    // φ'' = φ [ (2s/d²)² - 2/d² - 8s²/d³ ]
    mollifier(s) * ((2.0 * s / (d * d)).powi(2) - 2.0 / (d * d) - 8.0 * s2 / (d * d * d))
}

/// Gauss-law field `f(r)` with `Q_bump = f(r) r̂` and `div Q_bump = φ`.
fn radial_newton_field(r: f64, mass_table: &[f64], mass_total: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let mass = if r >= 1.0 {
        mass_total
    } else {
        let pos = r * (MASS_TABLE_LEN as f64);
        let i = (pos.floor() as usize).min(MASS_TABLE_LEN - 1);
        let frac = pos - i as f64;
        mass_table[i] * (1.0 - frac) + mass_table[i + 1] * frac
    };
    mass / (4.0 * PI * r * r)
}

/// Quintic smoothstep cutoff: `α = 1` on `[0, ρ]`, `0` beyond `ρ+1`;
/// returns `(α, α', α'')`.
fn cutoff(r: f64, rho: f64) -> (f64, f64, f64) {
    if r <= rho {
        (1.0, 0.0, 0.0)
    } else if r >= rho + 1.0 {
        (0.0, 0.0, 0.0)
    } else {
        let t = r - rho;
        let s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
        let ds = t * t * (30.0 + t * (-60.0 + 30.0 * t));
        let dds = t * (60.0 + t * (-180.0 + 120.0 * t));
        (1.0 - s, -ds, -dds)
    }
}

fn fib_directions(m: usize) -> Vec<[f64; 3]> {
    let golden_angle = PI * (3.0 - 5.0f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// `ℓ^p[tail_start, shell_cap]` norm of per-shell suprema, the suprema
/// estimated on a deterministic Fibonacci-sphere × radial sampling
/// (512 directions × 8 radii per shell).
pub fn shell_norm(
    f: impl Fn([f64; 3]) -> f64 + Sync,
    p: f64,
    tail_start: usize,
    shell_cap: usize,
) -> Result<ShellNormReport> {
    if shell_cap < tail_start {
        return Err(Error::InvalidParameter(
            "shell_cap must be >= tail_start".into(),
        ));
    }
    let dirs = fib_directions(512);
    let shells: Vec<usize> = (tail_start..=shell_cap).collect();
    let per_shell: Vec<f64> = shells
        .par_iter()
        .map(|n| {
            let mut sup: f64 = 0.0;
            for j in 0..8 {
                let r = *n as f64 + (j as f64 + 0.5) / 8.0;
                for d in &dirs {
                    let v = f([r * d[0], r * d[1], r * d[2]]).abs();
                    sup = sup.max(v);
                }
            }
            sup
        })
        .collect();
    if per_shell.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    let value = kahan_sum(per_shell.iter().map(|s| s.powf(p))).powf(1.0 / p);
    Ok(ShellNormReport {
        p,
        tail_start,
        per_shell,
        value,
    })
}
