//! Independent reference computations for verification. These integrate
//! defining formulas directly (1D quadrature in spherical coordinates) and
//! never touch the grid or multiplier machinery they are used to check.

use crate::quad::gauss_legendre_on;
use num_complex::Complex64;

fn j0(z: Complex64) -> Complex64 {
    if z.norm() < 1e-8 {
        Complex64::from(1.0) - z * z / 6.0
    } else {
        z.sin() / z
    }
}

fn h0(z: Complex64) -> Complex64 {
    -Complex64::i() * (Complex64::i() * z).exp() / z
}

/// Convolution of the free Green's kernel with a radial source, evaluated in
/// spherical coordinates:
/// `(R⁰f)(r) = ik [ h₀(kr) ∫_0^r j₀(ks) f(s) s² ds + j₀(kr) ∫_r^∞ h₀(ks) f(s) s² ds ]`.
///
/// `r_cut` truncates the outer integral; pick it where `f` has decayed to
/// well below the target accuracy.
pub fn radial_free_resolvent(
    f: impl Fn(f64) -> f64,
    r: f64,
    k: Complex64,
    r_cut: f64,
) -> Complex64 {
    assert!(r > 0.0 && r_cut > r);
    let panels_inner = (r * 8.0).ceil().max(8.0) as usize;
    let panels_outer = ((r_cut - r) * 8.0).ceil().max(8.0) as usize;
    let mut inner = Complex64::ZERO;
    {
        let (xs, ws) = gauss_legendre_on(panels_inner.min(400), 0.0, r);
        for (s, w) in xs.iter().zip(&ws) {
            inner += Complex64::from(w * f(*s) * s * s) * j0(k * *s);
        }
    }
    let mut outer = Complex64::ZERO;
    {
        let (xs, ws) = gauss_legendre_on(panels_outer.min(400), r, r_cut);
        for (s, w) in xs.iter().zip(&ws) {
            outer += Complex64::from(w * f(*s) * s * s) * h0(k * *s);
        }
    }
    Complex64::i() * k * (h0(k * r) * inner + j0(k * r) * outer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_to_plain_integral_at_small_radius() {
        // As r -> 0: u(r) -> ∫ e^{iks} s f(s) ds.
        let k = Complex64::new(0.0, 1.0);
        let f = |s: f64| (-2.0 * s * s).exp();
        let got = radial_free_resolvent(f, 1e-4, k, 12.0);
        let (xs, ws) = crate::quad::gauss_legendre_on(200, 0.0, 12.0);
        let mut direct = Complex64::ZERO;
        for (s, w) in xs.iter().zip(&ws) {
            direct += Complex64::from(w * f(*s) * s) * (Complex64::i() * k * *s).exp();
        }
        assert!(
            (got - direct).norm() < 1e-6 * direct.norm(),
            "{got} vs {direct}"
        );
    }
}
