//! Continuum Dirichlet ground-state eigenvalue of an ellipse via Mathieu functions.
//!
//! In elliptic coordinates the ground state is `Ce₀(ξ, q) ce₀(η, q)`;
//! the boundary ξ₀ = atanh(b/a) is a zero of the modified function, and
//! `E₁ = 4q / c²` with focal distance `c = √(a² − b²)`.

use crate::linalg::SymTridiag;

const TERMS: usize = 30;

/// Fourier coefficients A₀, A₂, … of ce₀(·, q), normalised by A₀ = 1.
///
/// The characteristic value comes from the symmetric recurrence matrix;
/// the coefficients from the backward (minimal-solution) recurrence, which
/// keeps the tiny high-order terms accurate relative to each other.
fn ce0_coefficients(q: f64) -> Vec<f64> {
    let s2 = std::f64::consts::SQRT_2;
    let diag: Vec<f64> = (0..TERMS).map(|k| (2 * k * 2 * k) as f64).collect();
    let mut off = vec![q; TERMS - 1];
    off[0] = s2 * q;
    let a = SymTridiag::new(diag, off).eigenvalue(0);
    // ratios v_k = A_{2k} / A_{2k-2}
    let mut v = vec![0.0; TERMS + 1];
    for k in (1..TERMS).rev() {
        let four_k2 = (4 * k * k) as f64;
        let num = if k == 1 { 2.0 * q } else { q };
        v[k] = num / (a - four_k2 - q * v[k + 1]);
    }
    let mut coef = vec![1.0; TERMS];
    for k in 1..TERMS {
        coef[k] = coef[k - 1] * v[k];
    }
    coef
}

/// Modified Mathieu function Ce₀(ξ, q) up to normalisation.
pub fn modified_ce0(xi: f64, q: f64) -> f64 {
    let a = ce0_coefficients(q);
    a.iter().enumerate().map(|(k, &ak)| ak * (2.0 * k as f64 * xi).cosh()).sum()
}

/// Lowest Dirichlet eigenvalue of the ellipse with semi-axes a ≠ b.
pub fn ellipse_ground_eigenvalue(a: f64, b: f64) -> f64 {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    assert!(a > b && b > 0.0, "non-circular ellipse required");
    let c = (a * a - b * b).sqrt();
    let xi0 = (b / a).atanh();
    let f = |q: f64| modified_ce0(xi0, q);
    // E₁ lies between the eigenvalues of the inscribed and circumscribed discs
    let j01 = 2.404_825_557_695_773f64;
    let q_lo = 0.99 * j01 * j01 * c * c / (4.0 * a * a);
    let q_hi = 1.01 * j01 * j01 * c * c / (4.0 * b * b);
    let f0 = f(q_lo);
    let steps = 400;
    let mut lo = q_lo;
    let mut hi = q_lo;
    for i in 1..=steps {
        hi = q_lo + (q_hi - q_lo) * i as f64 / steps as f64;
        if f(hi).signum() != f0.signum() {
            break;
        }
        lo = hi;
    }
    assert!(f(hi).signum() != f0.signum(), "no Mathieu root in the disc bracket");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == f0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    4.0 * 0.5 * (lo + hi) / (c * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearly_circular_ellipse_matches_disc() {
        // j_{0,1}² / r²
        let j01 = 2.404_825_557_695_773f64;
        let e = ellipse_ground_eigenvalue(0.5 + 1e-3, 0.5);
        let disc = j01 * j01 / 0.25;
        // first-order area correction: E ≈ j²/(ab)
        let area_corrected = j01 * j01 / (0.501 * 0.5);
        assert!((e - area_corrected).abs() / disc < 1e-5, "{e} {disc}");
    }

    #[test]
    fn default_ellipse_value_is_plausible() {
        let e = ellipse_ground_eigenvalue(0.7, 0.5);
        // bracketed by the inscribed and circumscribed discs
        let j01 = 2.404_825_557_695_773f64;
        assert!(e < j01 * j01 / 0.25 && e > j01 * j01 / 0.49);
    }
}
