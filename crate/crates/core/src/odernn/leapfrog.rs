//! Leapfrog propagation with a conjugate half-step variable `Z`.

use crate::error::{Error, Result};
use crate::numerics::{Activation, Matrix};

fn check(y: &[f64], z: &[f64], w: &Matrix, b: &[f64]) -> Result<()> {
    let s = y.len();
    if z.len() != s {
        return Err(Error::dims("leapfrog Z", s, z.len()));
    }
    if w.shape() != (s, s) {
        return Err(Error::dims("leapfrog W", format!("{s}x{s}"), format!("{}x{}", w.rows(), w.cols())));
    }
    if b.len() != s {
        return Err(Error::dims("leapfrog b", s, b.len()));
    }
    Ok(())
}

/// `Z_{l+1/2} = Z_{l−1/2} − h·σ(Wᵀ·Y_l + b)`, then `Y_{l+1} = Y_l + σ(W·Z_{l+1/2} + b)`.
pub fn leapfrog_step(y: &[f64], z_half: &[f64], w: &Matrix, b: &[f64], h: f64, sigma: Activation) -> Result<(Vec<f64>, Vec<f64>)> {
    check(y, z_half, w, b)?;
    let wt = w.transpose();
    let mut u = b.to_vec();
    wt.matvec_add_into(y, &mut u);
    sigma.apply_in_place(&mut u);
    let z_next: Vec<f64> = z_half.iter().zip(&u).map(|(z, v)| z - h * v).collect();
    let mut v = b.to_vec();
    w.matvec_add_into(&z_next, &mut v);
    sigma.apply_in_place(&mut v);
    let y_next = y.iter().zip(&v).map(|(a, c)| a + c).collect();
    Ok((y_next, z_next))
}

/// Exact inverse of [`leapfrog_step`]: undo the `Y` update, then the `Z` update.
pub fn leapfrog_inverse(y_next: &[f64], z_next: &[f64], w: &Matrix, b: &[f64], h: f64, sigma: Activation) -> Result<(Vec<f64>, Vec<f64>)> {
    check(y_next, z_next, w, b)?;
    let mut v = b.to_vec();
    w.matvec_add_into(z_next, &mut v);
    sigma.apply_in_place(&mut v);
    let y: Vec<f64> = y_next.iter().zip(&v).map(|(a, c)| a - c).collect();
    let mut u = b.to_vec();
    w.transpose().matvec_add_into(&y, &mut u);
    sigma.apply_in_place(&mut u);
    let z = z_next.iter().zip(&u).map(|(zn, c)| zn + h * c).collect();
    Ok((y, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{gaussian_matrix, gaussian_vec, rng_from_seed};
    use crate::numerics::vector;
    use proptest::prelude::*;

    #[test]
    fn zero_field_keeps_state() {
        let (y, z) = leapfrog_step(&[1.0, 2.0], &[3.0, 4.0], &Matrix::zeros(2, 2), &[0.0, 0.0], 0.5, Activation::Tanh).unwrap();
        assert_eq!((y, z), (vec![1.0, 2.0], vec![3.0, 4.0]));
    }

    /// Scalar identity case with `u = w·z` and `ω² = h·w²`: `u' = u − ω²·y`,
    /// `y' = y + u'`. The map has determinant 1 and conserves
    /// `ω²·y² + u² − ω²·y·u`, which is positive definite for `ω < 2`, so the
    /// plain energy `w²·y² + z²` stays inside a fixed band.
    #[test]
    fn harmonic_energy_stays_bounded() {
        let (w, h) = (1.3, 0.5);
        let om2 = h * w * w;
        assert!(om2 < 4.0);
        let wm = Matrix::scaled_identity(1, w);
        let (mut y, mut z) = (vec![1.0], vec![0.0]);
        let modified = |y: f64, z: f64| om2 * y * y + (w * z).powi(2) - om2 * y * w * z;
        let plain = |y: f64, z: f64| w * w * y * y + z * z;
        let (m0, e0) = (modified(1.0, 0.0), plain(1.0, 0.0));
        let (mut lo, mut hi) = (e0, e0);
        for _ in 0..10_000 {
            let (y2, z2) = leapfrog_step(&y, &z, &wm, &[0.0], h, Activation::Identity).unwrap();
            y = y2;
            z = z2;
            assert!((modified(y[0], z[0]) - m0).abs() <= 1e-10 * m0);
            let e = plain(y[0], z[0]);
            lo = lo.min(e);
            hi = hi.max(e);
        }
        assert!(hi / lo < 10.0, "energy band {lo}..{hi}");
    }

    #[test]
    fn diverges_beyond_stability_limit() {
        let (w, h) = (3.0, 1.0);
        let wm = Matrix::scaled_identity(1, w);
        let (mut y, mut z) = (vec![1.0], vec![0.0]);
        for _ in 0..200 {
            let (y2, z2) = leapfrog_step(&y, &z, &wm, &[0.0], h, Activation::Identity).unwrap();
            y = y2;
            z = z2;
        }
        assert!(y[0].abs() > 1e6);
    }

    #[test]
    fn inverse_recovers_identity_activation() {
        let mut rng = rng_from_seed(11);
        let w = gaussian_matrix(&mut rng, 4, 4).scale(0.3);
        let b = gaussian_vec(&mut rng, 4);
        let (y0, z0) = (gaussian_vec(&mut rng, 4), gaussian_vec(&mut rng, 4));
        let (y1, z1) = leapfrog_step(&y0, &z0, &w, &b, 0.2, Activation::Identity).unwrap();
        let (y, z) = leapfrog_inverse(&y1, &z1, &w, &b, 0.2, Activation::Identity).unwrap();
        assert!(vector::max_abs_diff(&y, &y0) < 1e-12 && vector::max_abs_diff(&z, &z0) < 1e-12);
    }

    proptest! {
        #[test]
        fn inverse_recovers_for_any_activation(seed in any::<u64>(), h in 0.0f64..2.0, which in 0usize..4) {
            let sigma = [Activation::Identity, Activation::Tanh, Activation::Relu, Activation::Sigmoid][which];
            let mut rng = rng_from_seed(seed);
            let w = gaussian_matrix(&mut rng, 3, 3);
            let b = gaussian_vec(&mut rng, 3);
            let (y0, z0) = (gaussian_vec(&mut rng, 3), gaussian_vec(&mut rng, 3));
            let (y1, z1) = leapfrog_step(&y0, &z0, &w, &b, h, sigma).unwrap();
            let (y, z) = leapfrog_inverse(&y1, &z1, &w, &b, h, sigma).unwrap();
            prop_assert!(vector::max_abs_diff(&y, &y0) < 1e-11);
            prop_assert!(vector::max_abs_diff(&z, &z0) < 1e-11);
        }
    }
}
