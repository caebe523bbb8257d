//! 3D FFT bridging the storage-order DFT and the continuum convention.
//!
//! With origin-centered nodes `x_j = -L/2 + j h` and frequencies `ξ_m = m/L`,
//! the half-box shift contributes exactly `(-1)^m` per axis (N even), so
//!
//!   f̂(ξ_m) = h³ (-1)^{m1+m2+m3} DFT[f]_m,
//!   f(x_j) = (1/L³) IDFT[(-1)^m f̂]_j  (IDFT unnormalized).

use super::BoxGrid;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (
                planner.plan_fft(n, FftDirection::Forward),
                planner.plan_fft(n, FftDirection::Inverse),
            )
        })
        .clone()
}

/// In-place 1D transforms along every axis of the row-major cube.
fn transform_axes(n: usize, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
    // z axis: contiguous lines.
    data.par_chunks_mut(n).for_each_init(
        || vec![Complex64::ZERO; plan.get_inplace_scratch_len()],
        |scratch, line| {
            plan.process_with_scratch(line, scratch);
        },
    );
    // y axis: stride n within each x-slab.
    data.par_chunks_mut(n * n).for_each_init(
        || {
            (
                vec![Complex64::ZERO; n],
                vec![Complex64::ZERO; plan.get_inplace_scratch_len()],
            )
        },
        |(line, scratch), slab| {
            for iz in 0..n {
                for iy in 0..n {
                    line[iy] = slab[iy * n + iz];
                }
                plan.process_with_scratch(line, scratch);
                for iy in 0..n {
                    slab[iy * n + iz] = line[iy];
                }
            }
        },
    );
    // x axis: stride n². Work on independent (iy, iz) pencils in parallel by
    // processing chunks of the flattened (iy, iz) plane.
    let plane = n * n;
    let data_ptr = SendPtr(data.as_mut_ptr());
    (0..plane).into_par_iter().for_each_init(
        || {
            (
                vec![Complex64::ZERO; n],
                vec![Complex64::ZERO; plan.get_inplace_scratch_len()],
            )
        },
        |(line, scratch), yz| {
            let ptr = data_ptr;
            for ix in 0..n {
                line[ix] = unsafe { *ptr.0.add(ix * plane + yz) };
            }
            plan.process_with_scratch(line, scratch);
            for ix in 0..n {
                unsafe { *ptr.0.add(ix * plane + yz) = line[ix] };
            }
        },
    );
}

#[derive(Clone, Copy)]
struct SendPtr(*mut Complex64);
// Pencils indexed by distinct yz never alias.
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

fn checkerboard_sign(n: usize, flat: usize) -> f64 {
    let iz = flat % n;
    let iy = (flat / n) % n;
    let ix = flat / (n * n);
    if (ix + iy + iz) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn forward(grid: BoxGrid, input: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n();
    let mut data = input.to_vec();
    let (fwd, _) = plans(n);
    transform_axes(n, &mut data, &fwd);
    let scale = grid.cell_volume();
    data.par_iter_mut().enumerate().for_each(|(flat, v)| {
        *v *= scale * checkerboard_sign(n, flat);
    });
    data
}

pub fn inverse(grid: BoxGrid, input: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n();
    let mut data: Vec<Complex64> = input
        .par_iter()
        .enumerate()
        .map(|(flat, v)| v * checkerboard_sign(n, flat))
        .collect();
    let (_, inv) = plans(n);
    transform_axes(n, &mut data, &inv);
    let scale = grid.len().powi(-3);
    data.par_iter_mut().for_each(|v| *v *= scale);
    data
}
