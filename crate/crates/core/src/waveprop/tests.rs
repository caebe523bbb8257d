use super::*;
use crate::fields::SphereQuadrature;
use crate::potentials::{DivergenceFormPotential, TrigTerm};
use crate::quad::hashed_unit;
use num_complex::Complex64;
use std::sync::Arc;

fn grid16() -> BoxGrid {
    BoxGrid::new(32, 16.0).unwrap()
}

fn band_state(grid: BoxGrid) -> BandLimitedState {
    BandLimitedState::radial(grid, 1.0, 2.6, [0.0; 3]).unwrap()
}

fn weak_potential(scale: f64) -> DivergenceFormPotential {
    let base = Arc::new(
        DivergenceFormPotential::make_oscillating(
            2.0,
            vec![TrigTerm::sin([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])],
        )
        .unwrap(),
    );
    base.scaled(scale)
}

#[test]
fn filter_polynomial_and_band_support() {
    let filt = ContourFilter::new(0.6, 3.0, 3).unwrap();
    assert!(filt.p(Complex64::from(0.6)).norm() < 1e-300);
    assert!(filt.p(Complex64::from(3.0)).norm() < 1e-300);
    assert_eq!(filt.q(0.59), 0.0);
    assert_eq!(filt.q(3.01), 0.0);
    assert!(filt.q(1.5) != 0.0);
    assert!(ContourFilter::new(2.0, 1.0, 3).is_err());
    assert!(ContourFilter::new(0.0, 1.0, 3).is_err());
}

#[test]
fn band_limited_state_stays_in_annulus() {
    let state = band_state(grid16());
    assert!(state.annulus_leak().unwrap() < 1e-12);
    assert!(state.field.l2_norm() > 0.0);
}

#[test]
fn free_evolution_identity_unitarity_group_law() {
    let state = band_state(grid16());
    let f = &state.field;
    let u0 = free_evolve(f, 0.0).unwrap();
    let mut d = u0.clone();
    d.axpy(Complex64::from(-1.0), f).unwrap();
    assert!(d.l2_norm() < 1e-12 * f.l2_norm());
    for t in [0.7, 2.3, -1.9] {
        let ut = free_evolve(f, t).unwrap();
        assert!((ut.l2_norm() - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
    }
    let two_step = free_evolve(&free_evolve(f, 1.1).unwrap(), 2.2).unwrap();
    let one_step = free_evolve(f, 3.3).unwrap();
    let mut diff = two_step.clone();
    diff.axpy(Complex64::from(-1.0), &one_step).unwrap();
    assert!(diff.l2_norm() < 1e-12 * f.l2_norm());
}

#[test]
fn kirchhoff_matches_free_evolution_and_improves_with_time() {
    let grid = BoxGrid::new(48, 24.0).unwrap();
    let state = BandLimitedState::radial(grid, 1.0, 2.6, [0.0; 3]).unwrap();
    let probe_set = |t: f64| -> Vec<[f64; 3]> {
        (0..6)
            .map(|i| {
                let s = -1.5 + 0.6 * i as f64;
                let dir = [
                    hashed_unit(71, i) - 0.5,
                    hashed_unit(72, i) - 0.5,
                    hashed_unit(73, i) - 0.5,
                ];
                let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
                let r = t + s;
                [r * dir[0] / n, r * dir[1] / n, r * dir[2] / n]
            })
            .collect()
    };
    let mut errors = Vec::new();
    for t in [4.5, 9.0] {
        let probes = probe_set(t);
        let exact_field = free_evolve(&state.field, t).unwrap();
        let exact = exact_field.interpolate(&probes).unwrap();
        let asym = kirchhoff_asymptotic(&state, t, &probes).unwrap();
        let peak = exact.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = exact
            .iter()
            .zip(&asym)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / peak;
        errors.push(err);
    }
    assert!(
        errors[1] < errors[0] / 1.5,
        "main-term error should shrink with t: {errors:?}"
    );
    assert!(errors[1] < 0.35, "asymptotic error too large: {errors:?}");
}

#[test]
fn kirchhoff_radial_state_is_direction_independent() {
    let grid = BoxGrid::new(48, 24.0).unwrap();
    let state = BandLimitedState::radial(grid, 1.0, 2.6, [0.0; 3]).unwrap();
    let t = 5.0;
    let dirs: [[f64; 3]; 3] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.577350, 0.577350, 0.577350],
    ];
    let offset = 0.4;
    let probes: Vec<[f64; 3]> = dirs
        .iter()
        .map(|d| {
            let r = t + offset;
            [r * d[0], r * d[1], r * d[2]]
        })
        .collect();
    let vals = kirchhoff_asymptotic(&state, t, &probes).unwrap();
    for v in &vals[1..] {
        // The cubic lattice's ray interpolation sets the anisotropy floor.
        assert!(
            (v - vals[0]).norm() < 5e-3 * vals[0].norm(),
            "direction dependence {v} vs {}",
            vals[0]
        );
    }
}

#[test]
fn kirchhoff_localizes_around_the_light_cone() {
    let grid = BoxGrid::new(48, 24.0).unwrap();
    let state = BandLimitedState::radial(grid, 1.0, 2.6, [0.0; 3]).unwrap();
    // The asymptotic value depends on the probe only through |x| - t and
    // x̂, so large t just slides the offset; the Radon profile must have
    // decayed far from the light cone.
    let t = 50.0;
    let on_cone = kirchhoff_asymptotic(&state, t, &[[t + 0.2, 0.0, 0.0]]).unwrap()[0];
    let far = kirchhoff_asymptotic(&state, t, &[[t + 20.0, 0.0, 0.0]]).unwrap()[0];
    assert!(
        far.norm() < 0.05 * on_cone.norm(),
        "no localization: {far} vs {on_cone}"
    );
}

#[test]
fn contour_matches_exact_multiplier_for_free_wave() {
    let grid = grid16();
    let state = band_state(grid);
    let filt = ContourFilter::new(0.6, 3.0, 3).unwrap();
    let opts = SolveOptions::default();
    let copts = ContourOptions {
        nodes_per_edge: 16,
        tol: 1e-7,
        max_doublings: 3,
    };
    for t in [0.0, 1.0, 5.0] {
        let via_contour = contour_propagate(
            &state.field,
            t,
            &filt,
            &PropagatorOperator::FreeWave,
            &opts,
            &copts,
        )
        .unwrap();
        let reference = filtered_free_reference(&state.field, t, &filt).unwrap();
        let mut diff = via_contour.clone();
        diff.axpy(Complex64::from(-1.0), &reference).unwrap();
        let rel = diff.l2_norm() / reference.l2_norm();
        assert!(rel < 1e-4, "t = {t}: contour vs multiplier {rel}");
    }
}

#[test]
fn contour_annihilates_out_of_band_states() {
    let grid = grid16();
    // State supported at 2π|ξ| in (3.3, 4.3), outside the filter band.
    let state = BandLimitedState::radial(grid, 3.3, 4.3, [0.0; 3]).unwrap();
    let filt = ContourFilter::new(0.6, 3.0, 3).unwrap();
    let out = contour_propagate(
        &state.field,
        1.0,
        &filt,
        &PropagatorOperator::FreeWave,
        &SolveOptions::default(),
        &ContourOptions::default(),
    )
    .unwrap();
    assert!(
        out.l2_norm() < 1e-6 * state.field.l2_norm(),
        "filter leak {}",
        out.l2_norm() / state.field.l2_norm()
    );
}

#[test]
fn contour_node_doubling_is_stable() {
    let grid = grid16();
    let state = band_state(grid);
    let filt = ContourFilter::new(0.6, 3.0, 3).unwrap();
    let opts = SolveOptions::default();
    let a = contour_pass(
        &state.field,
        1.0,
        &filt,
        &PropagatorOperator::FreeWave,
        &opts,
        24,
    )
    .unwrap();
    let b = contour_pass(
        &state.field,
        1.0,
        &filt,
        &PropagatorOperator::FreeWave,
        &opts,
        48,
    )
    .unwrap();
    let mut d = a.clone();
    d.axpy(Complex64::from(-1.0), &b).unwrap();
    assert!(d.l2_norm() / state.field.l2_norm() < 1e-6);
}

#[test]
fn contour_endpoint_integrand_is_negligible_for_n3() {
    // The order-3 zeros of p_n dominate the resolvent blow-up near the
    // spectrum crossings k = a, b.
    let grid = grid16();
    let state = band_state(grid);
    let filt = ContourFilter::new(0.6, 3.0, 3).unwrap();
    let eval_at = |k: Complex64| -> f64 {
        let r = crate::resolvent::free_resolvent_z(&state.field, k * k).unwrap();
        (filt.p(k) * Complex64::from(r.l2_norm())).norm()
    };
    let near_corner = eval_at(Complex64::new(0.6, 1e-5));
    let peak = eval_at(Complex64::new(1.8, 1.0));
    assert!(
        near_corner < 1e-10 * peak,
        "endpoint contribution {near_corner} vs peak {peak}"
    );
}

#[test]
fn contour_unitarity_proxy_for_divergence_operator() {
    let grid = grid16();
    let state = band_state(grid);
    let pot = weak_potential(0.3);
    let filt = ContourFilter::new(0.6, 3.0, 3).unwrap();
    let opts = SolveOptions::default();
    let copts = ContourOptions {
        nodes_per_edge: 16,
        tol: 1e-6,
        max_doublings: 2,
    };
    let at0 = contour_propagate(
        &state.field,
        0.0,
        &filt,
        &PropagatorOperator::Divergence(&pot),
        &opts,
        &copts,
    )
    .unwrap();
    let at_t = contour_propagate(
        &state.field,
        2.0,
        &filt,
        &PropagatorOperator::Divergence(&pot),
        &opts,
        &copts,
    )
    .unwrap();
    let rel = (at_t.l2_norm() - at0.l2_norm()).abs() / at0.l2_norm();
    assert!(rel < 1e-4, "unitarity proxy violation {rel}");
}

#[test]
fn duhamel_residual_and_dt_scaling() {
    let grid = grid16();
    let state = band_state(grid);
    let filt = ContourFilter::new(0.6, 3.0, 3).unwrap();
    let opts = SolveOptions::default();
    let copts = ContourOptions {
        nodes_per_edge: 24,
        tol: 1e-9,
        max_doublings: 2,
    };
    let op = PropagatorOperator::FreeWave;
    let r1 = duhamel_check(&state.field, 1.0, 1e-2, &filt, &op, &opts, &copts).unwrap();
    assert!(r1.residual_rel < 1e-4, "residual {}", r1.residual_rel);
    let r2 = duhamel_check(&state.field, 1.0, 2e-2, &filt, &op, &opts, &copts).unwrap();
    let order = (r2.residual_rel / r1.residual_rel).log2();
    assert!(
        (order - 2.0).abs() < 0.3,
        "central-difference order {order} (residuals {} vs {})",
        r1.residual_rel,
        r2.residual_rel
    );
}

#[test]
fn wave_operator_free_case_is_time_independent() {
    let grid = grid16();
    let state = band_state(grid);
    let zero = DivergenceFormPotential::zero();
    let filt = ContourFilter::new(0.6, 3.0, 3).unwrap();
    let opts = SolveOptions::default();
    let copts = ContourOptions {
        nodes_per_edge: 24,
        tol: 1e-9,
        max_doublings: 2,
    };
    let table = wave_operator_cauchy(
        &state,
        &filt,
        &zero,
        &[0.5, 1.5, 3.0],
        &[4.0],
        &opts,
        &copts,
    )
    .unwrap();
    for d in &table.deltas {
        assert!(*d < 1e-8 * state.field.l2_norm(), "free deltas {:?}", table.deltas);
    }
}

#[test]
fn wave_operator_rejects_times_beyond_the_box_cap() {
    let grid = grid16();
    let state = band_state(grid);
    let zero = DivergenceFormPotential::zero();
    let filt = ContourFilter::new(0.6, 3.0, 3).unwrap();
    let r = wave_operator_cauchy(
        &state,
        &filt,
        &zero,
        &[2.0, 8.0],
        &[],
        &SolveOptions::default(),
        &ContourOptions::default(),
    );
    assert!(matches!(r, Err(Error::InvalidParameter(_))));
}

#[test]
fn stationary_free_case_inverts_fourier() {
    // A periodization-clean state on a box large enough for its envelope;
    // both signs must reproduce the data by Fourier inversion.
    let grid = BoxGrid::new(64, 32.0).unwrap();
    let state = BandLimitedState::radial(grid, 0.75, 2.85, [0.0; 3]).unwrap();
    let zero = DivergenceFormPotential::zero();
    let quad = Arc::new(SphereQuadrature::gauss_product(24, 48));
    // Small ε's are safe in the free case (no solves); the extrapolation
    // error carries an e^{ε|y|} factor that the box corners amplify.
    let sopts = StationaryOptions {
        eps_ladder: vec![0.08, 0.05, 0.03, 0.015],
        kappa_nodes: 20,
        solve: SolveOptions::default(),
    };
    for sign in [WaveOperatorSign::Minus, WaveOperatorSign::Plus] {
        let w = stationary_wave_operator(&state, sign, &zero, &quad, &sopts).unwrap();
        let mut d = w.clone();
        d.axpy(Complex64::from(-1.0), &state.field).unwrap();
        let rel = d.l2_norm() / state.field.l2_norm();
        assert!(rel < 1e-3, "{sign:?}: free inversion error {rel}");
    }
}

#[test]
fn stationary_free_case_handles_displaced_states() {
    // Fourier inversion must also hold for a state carrying a nontrivial
    // displacement phase.
    let grid = BoxGrid::new(64, 32.0).unwrap();
    let zero = DivergenceFormPotential::zero();
    let quad = Arc::new(SphereQuadrature::gauss_product(24, 48));
    let sopts = StationaryOptions {
        eps_ladder: vec![0.08, 0.05, 0.03, 0.015],
        kappa_nodes: 20,
        solve: SolveOptions::default(),
    };
    let state = BandLimitedState::radial(grid, 0.75, 2.85, [0.8, -0.4, 0.3]).unwrap();
    let w = stationary_wave_operator(&state, WaveOperatorSign::Minus, &zero, &quad, &sopts)
        .unwrap();
    let mut d = w.clone();
    d.axpy(Complex64::from(-1.0), &state.field).unwrap();
    let rel = d.l2_norm() / state.field.l2_norm();
    assert!(rel < 2e-3, "displaced free inversion error {rel}");
}

#[test]
fn ballistic_projection_positive_for_bumps() {
    let grid = grid16();
    let zero = DivergenceFormPotential::zero();
    let quad = Arc::new(SphereQuadrature::fibonacci(64));
    let f = crate::fields::GridField::from_fn_physical(grid, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        Complex64::from((-r2).exp())
    });
    let opts = SolveOptions::default();
    let free = ballistic_projection(&f, 1.0, Complex64::new(1.5, 0.3), &zero, &quad, &opts)
        .unwrap();
    assert!(free.min_real_part > 0.0, "free F min {}", free.min_real_part);
    assert!(free.near_axis_norm > 0.0);
    let pot = weak_potential(0.3);
    let perturbed =
        ballistic_projection(&f, 1.0, Complex64::new(1.5, 0.3), &pot, &quad, &opts).unwrap();
    assert!(
        perturbed.min_real_part > 0.0,
        "perturbed F min {}",
        perturbed.min_real_part
    );
    let zero_data = crate::fields::GridField::zeros(grid, crate::fields::Side::Physical);
    let nothing =
        ballistic_projection(&zero_data, 1.0, Complex64::new(1.5, 0.3), &zero, &quad, &opts)
            .unwrap();
    for v in &nothing.values_imaginary_axis {
        assert_eq!(*v, Complex64::ZERO);
    }
}

#[test]
fn weak_coupling_cauchy_deltas_shrink_with_epsilon() {
    let grid = grid16();
    let state = band_state(grid);
    let filt = ContourFilter::new(0.6, 3.0, 3).unwrap();
    let opts = SolveOptions {
        tol: 1e-9,
        ..Default::default()
    };
    let copts = ContourOptions {
        nodes_per_edge: 12,
        tol: 1e-6,
        max_doublings: 2,
    };
    let ladder = [1.0, 2.0, 3.5];
    let mut maxima = Vec::new();
    for eps in [0.2, 0.1] {
        let pot = weak_potential(eps);
        let table = wave_operator_cauchy(
            &state,
            &filt,
            &pot,
            &ladder,
            &[],
            &opts,
            &copts,
        )
        .unwrap();
        maxima.push(table.deltas.iter().cloned().fold(0.0, f64::max));
    }
    let ratio = maxima[0] / maxima[1];
    assert!(
        (ratio - 2.0).abs() < 0.6,
        "coupling scan not linear: {maxima:?} (ratio {ratio})"
    );
}
