use super::*;
use crate::fields::BoxGrid;
use crate::potentials::{DivergenceFormPotential, TrigTerm, TruncationMode};
use crate::resolvent::solve_schrodinger_green;
use num_complex::Complex64;
use std::sync::Arc;

fn kp(re: f64, im: f64) -> SpectralPoint {
    SpectralPoint::new(Complex64::new(re, im)).unwrap()
}

fn oscillating(scale: f64, rho: f64) -> DivergenceFormPotential {
    let base = Arc::new(
        DivergenceFormPotential::make_oscillating(
            0.3,
            vec![TrigTerm::sin([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])],
        )
        .unwrap(),
    );
    let t = Arc::new(base.truncate(rho, TruncationMode::Inner).unwrap());
    t.scaled(scale)
}

fn gaussian_bump(grid: BoxGrid, center: [f64; 3], sigma: f64) -> GridField {
    GridField::from_fn_physical(grid, move |x| {
        let d2 = (x[0] - center[0]).powi(2)
            + (x[1] - center[1]).powi(2)
            + (x[2] - center[2]).powi(2);
        Complex64::from((-d2 / (2.0 * sigma * sigma)).exp())
    })
}

/// Concentrated oscillating member shifted so the potential vanishes at the
/// origin; placing the source at a zero of V removes the kink of the grid
/// correction there and with it the dominant trace noise floor.
fn concentrated_shifted(gamma: f64, scale: f64) -> DivergenceFormPotential {
    let base = Arc::new(
        DivergenceFormPotential::make_oscillating(
            gamma,
            vec![TrigTerm::sin([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])],
        )
        .unwrap(),
    );
    let g = |c: f64| base.v([c, 0.0, 0.0]);
    let (mut lo, mut hi) = (0.05, 2.0);
    assert!(g(lo) * g(hi) < 0.0, "no sign change for the axis zero");
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) * g(lo) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let shifted = Arc::new(base.shift([-c, 0.0, 0.0]));
    shifted.scaled(scale)
}

#[test]
fn free_amplitude_is_one_on_every_sphere() {
    let grid = BoxGrid::new(32, 16.0).unwrap();
    let zero = DivergenceFormPotential::zero();
    let k = kp(1.0, 0.8);
    let sol =
        solve_schrodinger_green([0.4, -0.2, 0.0], k, &zero, grid, &SolveOptions::default())
            .unwrap();
    let quad = Arc::new(SphereQuadrature::fibonacci(256));
    for r in [1.0, 2.5, 5.0] {
        let tr = amplitude_trace(&sol, r, &quad).unwrap();
        for v in &tr.values {
            assert!((v - Complex64::from(1.0)).norm() < 1e-8, "A = {v} at r = {r}");
        }
        assert!((tr.l2_norm_sq() - 4.0 * std::f64::consts::PI).abs() < 1e-7);
    }
}

#[test]
fn amplitude_conjugation_pairs() {
    let grid = BoxGrid::new(48, 16.0).unwrap();
    let pot = oscillating(0.5, 4.0);
    let k = kp(1.0, 0.7);
    let y = [0.3, 0.1, -0.2];
    let opts = SolveOptions::default();
    let s = solve_schrodinger_green(y, k, &pot, grid, &opts).unwrap();
    let s_ref = solve_schrodinger_green(y, k.reflected(), &pot, grid, &opts).unwrap();
    let quad = Arc::new(SphereQuadrature::fibonacci(128));
    let t = amplitude_trace(&s, 3.0, &quad).unwrap();
    let t_ref = amplitude_trace(&s_ref, 3.0, &quad).unwrap();
    let mismatch = conjugate_trace_mismatch(&t, &t_ref);
    assert!(mismatch < 1e-6, "conjugation mismatch {mismatch}");
}

#[test]
fn amplitude_norm_stabilizes_along_radius() {
    let grid = BoxGrid::new(48, 20.0).unwrap();
    let pot = oscillating(0.5, 4.0);
    let k = kp(1.0, 0.5);
    let sol =
        solve_schrodinger_green([0.0; 3], k, &pot, grid, &SolveOptions::default()).unwrap();
    let quad = Arc::new(SphereQuadrature::fibonacci(256));
    let radii = [5.0, 6.5, 8.0];
    let norms: Vec<f64> = radii
        .iter()
        .map(|r| amplitude_trace(&sol, *r, &quad).unwrap().l2_norm_sq())
        .collect();
    let r1 = norms[1] / norms[0];
    let r2 = norms[2] / norms[1];
    assert!((r1 - 1.0).abs() < 0.02 && (r2 - 1.0).abs() < 0.02, "{norms:?}");
}

#[test]
fn extract_limit_free_case_both_methods() {
    let grid = BoxGrid::new(32, 16.0).unwrap();
    let zero = DivergenceFormPotential::zero();
    let k = kp(1.0, 0.8);
    let sol =
        solve_schrodinger_green([0.0; 3], k, &zero, grid, &SolveOptions::default()).unwrap();
    let quad = Arc::new(SphereQuadrature::fibonacci(128));
    let ladder = RadiusLadder {
        r0: 1.0,
        ratio: 1.35,
        rungs: 6,
    };
    for method in [
        ExtractionMethod::SphereExtrapolation,
        ExtractionMethod::IntegralFormula,
    ] {
        let lim = extract_limit(&sol, &zero, &quad, method, &ladder).unwrap();
        let dist = lim.l2_distance_to_constant(Complex64::from(1.0));
        assert!(dist < 1e-9, "{method:?}: ‖A_inf - 1‖ = {dist}");
    }
}

#[test]
fn extract_limit_methods_agree_for_concentrated_oscillating_family() {
    // The two-point 1/r extrapolation carries an O(1/r²) residual whose
    // coefficient scales with the potential's coupling and spread; a
    // concentrated weakly-coupled member keeps both routes within 1e-3.
    let grid = BoxGrid::new(64, 24.0).unwrap();
    let pot = concentrated_shifted(4.0, 0.25);
    let k = kp(1.0, 0.7);
    let opts = SolveOptions {
        tol: 1e-10,
        ..Default::default()
    };
    let sol = solve_schrodinger_green([0.0; 3], k, &pot, grid, &opts).unwrap();
    let quad = Arc::new(SphereQuadrature::fibonacci(256));
    // Keep the top rung below the trace noise floor (it grows like
    // e^{Im k r}); the ladder health guard fires otherwise.
    let ladder = RadiusLadder {
        r0: 1.0,
        ratio: 1.3,
        rungs: 7,
    };
    let a = extract_limit(
        &sol,
        &pot,
        &quad,
        ExtractionMethod::SphereExtrapolation,
        &ladder,
    )
    .unwrap();
    let b = extract_limit(&sol, &pot, &quad, ExtractionMethod::IntegralFormula, &ladder).unwrap();
    let dist = a
        .values
        .iter()
        .zip(&b.values)
        .zip(quad.weights())
        .map(|((x, y), w)| w * (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    // The two-point 1/r extrapolation leaves an O(1/r²) residual; at desk
    // scale the routes agree to about a percent.
    assert!(dist < 2e-2, "cross-method disagreement {dist}");
    assert!(a.error_bar < 0.05, "ladder error bar {}", a.error_bar);
}

#[test]
fn small_amplitude_phase_relation() {
    // a_inf(σ,y,k) = e^{-ik<σ,y>} A_inf(σ,y,k): the y-centered limit with
    // the phase applied must match an independent extrapolation of the
    // origin-centered traces; the two-point extrapolation residual caps the
    // agreement at the percent level.
    let grid = BoxGrid::new(48, 20.0).unwrap();
    let pot = concentrated_shifted(4.0, 0.3);
    let k = kp(1.0, 0.7);
    let y = [0.5, 0.25, -0.3];
    let opts = SolveOptions {
        tol: 1e-10,
        ..Default::default()
    };
    let sol = solve_schrodinger_green(y, k, &pot, grid, &opts).unwrap();
    let quad = Arc::new(SphereQuadrature::fibonacci(128));
    let lim = extract_limit(
        &sol,
        &pot,
        &quad,
        ExtractionMethod::IntegralFormula,
        &RadiusLadder::default(),
    )
    .unwrap();
    let a_small = lim.small_amplitude_values();
    // Independent route: a(rσ) traces extrapolated on origin-centered
    // spheres (two-point extrapolation residual caps the agreement).
    let radii = [6.0, 8.0];
    let t1 = small_amplitude_trace(&sol, radii[0], &quad).unwrap();
    let t2 = small_amplitude_trace(&sol, radii[1], &quad).unwrap();
    let mut dist2 = 0.0;
    for i in 0..quad.len() {
        let extrap = (radii[1] * t2.values[i] - radii[0] * t1.values[i]) / (radii[1] - radii[0]);
        dist2 += quad.weights()[i] * (extrap - a_small[i]).norm_sqr();
    }
    let dist = dist2.sqrt();
    assert!(dist < 2e-2, "phase relation mismatch {dist}");
}

#[test]
fn high_energy_scan_free_case_is_zero() {
    let grid = BoxGrid::new(32, 16.0).unwrap();
    let zero = DivergenceFormPotential::zero();
    let quad = Arc::new(SphereQuadrature::fibonacci(64));
    let ks = [kp(0.0, 1.0), kp(0.0, 2.0)];
    let scan = high_energy_scan(&zero, [0.0; 3], &quad, &ks, grid, &SolveOptions::default())
        .unwrap();
    for v in scan {
        assert!(v < 1e-12, "free scan entry {v}");
    }
}

#[test]
fn high_energy_scan_decreases_for_oscillating_family() {
    // A concentrated member keeps the limiting integral conditioned at
    // larger Im k (the integrand's growth along the σ-ray stays inside the
    // effective support).
    let grid = BoxGrid::new(48, 20.0).unwrap();
    let base = Arc::new(
        DivergenceFormPotential::make_oscillating(
            4.0,
            vec![TrigTerm::sin([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])],
        )
        .unwrap(),
    );
    let pot = base.scaled(0.5);
    let quad = Arc::new(SphereQuadrature::fibonacci(128));
    let ks = [kp(0.0, 1.0), kp(0.0, 2.0), kp(0.0, 4.0)];
    let opts = SolveOptions {
        margin_tol: 0.5,
        ..Default::default()
    };
    let scan = high_energy_scan(&pot, [0.0; 3], &quad, &ks, grid, &opts).unwrap();
    assert!(
        scan[1] < scan[0] && scan[2] < scan[1],
        "not decreasing: {scan:?}"
    );
}

#[test]
fn h_f_free_case_matches_complex_ray_transform() {
    // V = 0: h_f(σ,k) = ∫ e^{-ik<σ,y>} f(y) dy; for a Gaussian the closed
    // form is (2πs²)^{3/2} e^{-k² s²/2} independent of σ.
    let grid = BoxGrid::new(32, 16.0).unwrap();
    let zero = DivergenceFormPotential::zero();
    let k = kp(0.9, 0.9);
    let quad = Arc::new(SphereQuadrature::fibonacci(64));
    let s = 0.8;
    let f = gaussian_bump(grid, [0.0; 3], s);
    let got = h_f(&f, k, &quad, &zero, 3, 5.75, &SolveOptions::default()).unwrap();
    let kk = k.k();
    let exact = Complex64::from((2.0 * std::f64::consts::PI * s * s).powf(1.5))
        * (-kk * kk * s * s / 2.0).exp();
    for v in &got {
        assert!(
            (v - exact).norm() / exact.norm() < 1e-6,
            "h_f = {v} vs {exact}"
        );
    }
}

#[test]
fn h_f_concentrated_bump_recovers_phase() {
    let grid = BoxGrid::new(48, 16.0).unwrap();
    let zero = DivergenceFormPotential::zero();
    let k = kp(1.1, 0.6);
    let quad = Arc::new(SphereQuadrature::fibonacci(32));
    let y0 = [1.0, 0.5, -0.5];
    let s = 0.25;
    let f = gaussian_bump(grid, y0, s);
    let got = h_f(&f, k, &quad, &zero, 3, 3.5, &SolveOptions::default()).unwrap();
    let kk = k.k();
    let mass = Complex64::from((2.0 * std::f64::consts::PI * s * s).powf(1.5))
        * (-kk * kk * s * s / 2.0).exp();
    for (v, sigma) in got.iter().zip(quad.nodes()) {
        let proj = sigma[0] * y0[0] + sigma[1] * y0[1] + sigma[2] * y0[2];
        let expected = (-Complex64::i() * kk * proj).exp() * mass;
        assert!(
            (v - expected).norm() / expected.norm() < 2e-2,
            "{v} vs {expected}"
        );
    }
}

#[test]
fn h_f_lattice_route_agrees_with_transpose_route() {
    // Dual-route consistency for V != 0: coarse-lattice interpolation of
    // A_inf against the single-solve transpose identity.
    let grid = BoxGrid::new(48, 20.0).unwrap();
    let pot = oscillating(0.4, 4.0);
    let k = kp(1.0, 0.8);
    let quad = Arc::new(SphereQuadrature::fibonacci(32));
    let f = gaussian_bump(grid, [0.5, 0.0, 0.0], 0.7);
    let opts = SolveOptions::default();
    let lattice = h_f(&f, k, &quad, &pot, 4, 3.8, &opts).unwrap();
    let transpose = distorted_transform(&f, k, &quad, OperatorKind::Schrodinger, &pot, &opts)
        .unwrap();
    // The 4³ trilinear y-lattice resolves A_inf's y-dependence to several
    // percent at desk scale; the transpose route is the precise one.
    let scale = transpose.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (a, b) in lattice.iter().zip(&transpose) {
        assert!(
            (a - b).norm() < 0.1 * scale,
            "lattice {a} vs transpose {b}"
        );
    }
}

#[test]
fn h_f_rejects_support_leak() {
    let grid = BoxGrid::new(32, 16.0).unwrap();
    let zero = DivergenceFormPotential::zero();
    let f = gaussian_bump(grid, [0.0; 3], 2.0);
    let quad = Arc::new(SphereQuadrature::fibonacci(16));
    let r = h_f(&f, kp(1.0, 1.0), &quad, &zero, 3, 1.0, &SolveOptions::default());
    assert!(matches!(r, Err(Error::Unsupported(_))));
}

#[test]
fn energy_functionals_free_case() {
    let grid = BoxGrid::new(32, 16.0).unwrap();
    let zero = DivergenceFormPotential::zero();
    let k = kp(1.0, 0.8);
    let sol =
        solve_schrodinger_green([0.0; 3], k, &zero, grid, &SolveOptions::default()).unwrap();
    let amp = AmplitudeField::new(sol);
    let quad = Arc::new(SphereQuadrature::fibonacci(128));
    let r_grid = [1.0, 2.0, 3.0, 4.0];
    let e = energy_functionals(&amp, &r_grid, 6.0, &quad).unwrap();
    for (m, m1) in e.m.iter().zip(&e.m1) {
        assert!((m - 1.0).abs() < 1e-10, "free m = {m}");
        assert!(*m1 < 1e-10, "free m1 = {m1}");
    }
    for a in &e.a_tail {
        assert!(*a < 1e-9, "free Dirichlet tail {a}");
    }
}

#[test]
fn energy_functionals_are_nonnegative_and_dominated() {
    let grid = BoxGrid::new(48, 20.0).unwrap();
    let pot = oscillating(0.5, 4.0);
    let k = kp(1.0, 0.6);
    let sol =
        solve_schrodinger_green([0.0; 3], k, &pot, grid, &SolveOptions::default()).unwrap();
    let amp = AmplitudeField::new(sol);
    let quad = Arc::new(SphereQuadrature::fibonacci(128));
    let r_grid = [1.5, 2.5, 3.5, 5.0, 7.0];
    let e = energy_functionals(&amp, &r_grid, 8.0, &quad).unwrap();
    for i in 0..r_grid.len() {
        assert!(e.m[i] >= 0.0 && e.m1[i] >= 0.0 && e.a_tail[i] >= 0.0);
        assert!(e.m_hat[i] + 1e-12 >= e.m[i], "M̂ must dominate m at the rung");
    }
    // A(r) decreasing in r (tail integrals shrink).
    for w in e.a_tail.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn energy_identity_balances() {
    // The trace amplification e^{Im k · r} sets the noise floor; a modest
    // Im k and annulus keep the assembled identity at the 1e-3 level.
    let grid = BoxGrid::new(64, 20.0).unwrap();
    let pot = concentrated_shifted(0.3, 0.5);
    let k = kp(1.0, 0.4);
    let opts = SolveOptions {
        tol: 1e-10,
        ..Default::default()
    };
    let sol = solve_schrodinger_green([0.0; 3], k, &pot, grid, &opts).unwrap();
    let amp = AmplitudeField::new(sol);
    let quad = Arc::new(SphereQuadrature::gauss_product(12, 24));
    let res = energy_identity_residual(&amp, &pot, 2.0, 5.0, &quad, 24).unwrap();
    assert!(res < 1e-3, "energy identity residual {res}");
}

mod model_ops_tests {
    use super::super::model_ops::*;
    use super::*;

    #[test]
    fn radial_invariance_of_limit_operator() {
        // f radial, V radial: B∞³ output is constant in σ up to the cubic
        // lattice's anisotropic quadrature error, which refinement drives
        // down.
        let k = kp(1.0, 0.8);
        let pot_base =
            Arc::new(DivergenceFormPotential::make_sharpness_radial(0.4, 3).unwrap());
        let pot = pot_base.scaled(0.8);
        let quad = Arc::new(SphereQuadrature::fibonacci(64));
        let spread = |n: usize| -> f64 {
            let grid = BoxGrid::new(n, 16.0).unwrap();
            let f = gaussian_bump(grid, [0.0; 3], 1.2);
            let out = model_operator(
                3,
                ModelOperatorMode::Limit,
                &ModelOperatorInput::Scalar(&f),
                Some(&pot),
                k,
                &quad,
            )
            .unwrap();
            let mean = out.values.iter().sum::<Complex64>() / out.values.len() as f64;
            out.values
                .iter()
                .map(|v| (v - mean).norm())
                .fold(0.0, f64::max)
                / mean.norm()
        };
        let coarse = spread(32);
        let fine = spread(48);
        // The mollifier bump is smooth but far from band-limited; the
        // anisotropy shrinks steadily rather than spectrally.
        assert!(fine < 2e-3, "σ-dependence at fine grid: {fine}");
        assert!(fine < 0.75 * coarse, "no refinement gain: {coarse} -> {fine}");
    }

    /// Smooth annular window and its radial derivative, shared by the
    /// identity tests.
    fn annulus_window(r: f64) -> (f64, f64) {
        if r <= 1.0 || r >= 4.0 {
            return (0.0, 0.0);
        }
        let t = (r - 1.0) / 3.0;
        let g = 4.0 * t * (1.0 - t);
        let dg = 4.0 * (1.0 - 2.0 * t) / 3.0;
        (g.powi(5), 5.0 * g.powi(4) * dg)
    }

    #[test]
    fn chetvert_identity_for_annular_source() {
        // B⁴(f) = B¹(f) + B²(f·ŷ) for a smooth field supported away from
        // the origin, with the divergence supplied in closed form so the
        // residual is pure quadrature error.
        let grid = BoxGrid::new(96, 16.0).unwrap();
        let comp = |x: [f64; 3], a: usize| -> f64 {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            annulus_window(r).0 * (1.0 + 0.3 * (x[a] * 0.9).sin())
        };
        let vec_field: [GridField; 3] = std::array::from_fn(|a| {
            GridField::from_fn_physical(grid, move |x| Complex64::from(comp(x, a)))
        });
        let div_field = GridField::from_fn_physical(grid, |x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if r < 1e-12 {
                return Complex64::ZERO;
            }
            let (w, dw) = annulus_window(r);
            let mut acc = 0.0;
            for a in 0..3 {
                let g = 1.0 + 0.3 * (x[a] * 0.9).sin();
                let dg = 0.3 * 0.9 * (x[a] * 0.9).cos();
                acc += dw * x[a] / r * g + w * dg;
            }
            Complex64::from(acc)
        });
        let radial_comp = GridField::from_fn_physical(grid, |x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if r < 1e-9 {
                return Complex64::ZERO;
            }
            let mut acc = 0.0;
            for a in 0..3 {
                acc += comp(x, a) * x[a] / r;
            }
            Complex64::from(acc)
        });
        let quad = Arc::new(SphereQuadrature::fibonacci(32));
        let k = kp(0.6, 1.2);
        let r = 6.0;
        let b4 = model_operator(
            4,
            ModelOperatorMode::FiniteRadius(r),
            &ModelOperatorInput::VectorWithDiv(&vec_field, &div_field),
            None,
            k,
            &quad,
        )
        .unwrap();
        let b1 = model_operator(
            1,
            ModelOperatorMode::FiniteRadius(r),
            &ModelOperatorInput::VectorWithDiv(&vec_field, &div_field),
            None,
            k,
            &quad,
        )
        .unwrap();
        let b2 = model_operator(
            2,
            ModelOperatorMode::FiniteRadius(r),
            &ModelOperatorInput::Scalar(&radial_comp),
            None,
            k,
            &quad,
        )
        .unwrap();
        let mut residual_sq = 0.0;
        for i in 0..quad.len() {
            let d = b4.values[i] - b1.values[i] - b2.values[i];
            residual_sq += quad.weights()[i] * d.norm_sqr();
        }
        let residual = residual_sq.sqrt();
        assert!(residual < 3e-6, "chetvert residual {residual}");
    }

    #[test]
    fn strong_convergence_to_limit_operator() {
        let grid = BoxGrid::new(32, 16.0).unwrap();
        let f = gaussian_bump(grid, [0.6, -0.3, 0.2], 0.8);
        let quad = Arc::new(SphereQuadrature::fibonacci(64));
        let k = kp(1.0, 0.8);
        let limit = model_operator(
            2,
            ModelOperatorMode::Limit,
            &ModelOperatorInput::Scalar(&f),
            None,
            k,
            &quad,
        )
        .unwrap();
        let mut dists = Vec::new();
        for r in [4.0, 6.0, 9.0, 13.0] {
            let fin = model_operator(
                2,
                ModelOperatorMode::FiniteRadius(r),
                &ModelOperatorInput::Scalar(&f),
                None,
                k,
                &quad,
            )
            .unwrap();
            let mut d2 = 0.0;
            for i in 0..quad.len() {
                d2 += quad.weights()[i] * (fin.values[i] - limit.values[i]).norm_sqr();
            }
            dists.push(d2.sqrt());
        }
        for w in dists.windows(2) {
            assert!(w[1] < w[0], "B_r -> B_inf distances {dists:?}");
        }
    }

    #[test]
    fn bound_audit_trivial_and_linear() {
        let grid = BoxGrid::new(24, 12.0).unwrap();
        let quad = Arc::new(SphereQuadrature::fibonacci(32));
        let k = kp(1.0, 1.0);
        // f = 0 gives no rows (zero norm is skipped).
        let zero = GridField::zeros(grid, crate::fields::Side::Physical);
        let tr = model_operator(
            2,
            ModelOperatorMode::FiniteRadius(4.0),
            &ModelOperatorInput::Scalar(&zero),
            None,
            k,
            &quad,
        )
        .unwrap();
        assert!(tr.l2_norm() == 0.0);
        // Linearity: doubling f doubles the output, ratio invariant.
        let f = audit_sample_scalar(grid, 3, 3.0);
        let mut f2 = f.clone();
        f2.scale(Complex64::from(2.0));
        let t1 = model_operator(
            2,
            ModelOperatorMode::FiniteRadius(4.0),
            &ModelOperatorInput::Scalar(&f),
            None,
            k,
            &quad,
        )
        .unwrap();
        let t2 = model_operator(
            2,
            ModelOperatorMode::FiniteRadius(4.0),
            &ModelOperatorInput::Scalar(&f2),
            None,
            k,
            &quad,
        )
        .unwrap();
        for (a, b) in t1.values.iter().zip(&t2.values) {
            assert!((2.0 * a - b).norm() < 1e-12 * b.norm().max(1e-15));
        }
    }

    #[test]
    fn bound_audit_ratios_finite_and_stable_under_refinement() {
        let quad = Arc::new(SphereQuadrature::fibonacci(32));
        let ks = [kp(0.5, 0.5), kp(1.0, 1.0), kp(2.0, 0.3)];
        let radii = [4.0, 5.5];
        let coarse = bound_audit(
            2,
            &ks,
            BoxGrid::new(24, 12.0).unwrap(),
            4,
            &radii,
            None,
            &quad,
        )
        .unwrap();
        let fine = bound_audit(
            2,
            &ks,
            BoxGrid::new(48, 12.0).unwrap(),
            4,
            &radii,
            None,
            &quad,
        )
        .unwrap();
        assert!(coarse.max_ratio.is_finite() && coarse.max_ratio > 0.0);
        let rel = (fine.max_ratio - coarse.max_ratio).abs() / fine.max_ratio;
        assert!(
            rel < 0.1,
            "audit ratio drift {rel} ({} vs {})",
            coarse.max_ratio,
            fine.max_ratio
        );
    }
}
