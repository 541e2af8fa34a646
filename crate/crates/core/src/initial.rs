//! Initial data: ABC (Beltrami) flows and seeded random solenoidal fields.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::spectral_field::{GridSpec, SpectralVectorField};

/// `u = (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)`, which
/// satisfies `curl u = u` and lives on the shell `|k| = 1`.
pub fn abc_field(grid: GridSpec, a: f64, b: f64, c: f64) -> SpectralVectorField {
    let z = Complex64::new(0.0, 0.0);
    let re = |v: f64| Complex64::new(v / 2.0, 0.0);
    // sin has coefficient −i/2 at +1
    let sin = |v: f64| Complex64::new(0.0, -v / 2.0);
    let mut f = SpectralVectorField::zeros(grid);
    f.set_pair([1, 0, 0], [z, sin(b), re(b)]).expect("shell |k|=1 is retained");
    f.set_pair([0, 1, 0], [re(c), z, sin(c)]).expect("shell |k|=1 is retained");
    f.set_pair([0, 0, 1], [sin(a), re(a), z]).expect("shell |k|=1 is retained");
    f
}

/// Seeded Gaussian modes with `|c_k| ∝ |k|^slope` for `band.0 ≤ |k| ≤ band.1`,
/// Leray-projected and scaled to `‖v‖₂ = amplitude`.
pub fn random_solenoidal(
    grid: GridSpec,
    seed: u64,
    slope: f64,
    band: (f64, f64),
    amplitude: f64,
) -> SpectralVectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralVectorField::zeros(grid);
    let (lo, hi) = (band.0 * band.0, band.1 * band.1);
    let modes: Vec<_> = grid.modes().filter(|m| is_upper_half(m.k)).collect();
    for m in modes {
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let c: [Complex64; 3] = std::array::from_fn(|_| Complex64::new(draw(), draw()));
        if m.k_sq < lo || m.k_sq > hi {
            continue;
        }
        let s = m.k_sq.powf(slope / 2.0);
        f.set_pair(m.k, [c[0] * s, c[1] * s, c[2] * s]).expect("retained mode");
    }
    let mut f = f.leray_project();
    let norm = f.l2_norm();
    if norm > 0.0 {
        f.scale(amplitude / norm);
    }
    f
}

/// One representative of each `±k` pair.
fn is_upper_half(k: [i64; 3]) -> bool {
    k[0] > 0 || (k[0] == 0 && (k[1] > 0 || (k[1] == 0 && k[2] > 0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{PhysicalVectorField, SpectralTransform};

    #[test]
    fn abc_matches_closed_form_samples() {
        let g = GridSpec::with_default_padding(8).unwrap();
        let t = SpectralTransform::new(g);
        let f = abc_field(g, 1.0, 0.5, 0.25);
        let p = t.inverse_transform(&f).unwrap();
        let oracle = PhysicalVectorField::from_fn(12, |x| {
            [
                x[2].sin() + 0.25 * x[1].cos(),
                0.5 * x[0].sin() + x[2].cos(),
                0.25 * x[1].sin() + 0.5 * x[0].cos(),
            ]
        });
        for c in 0..3 {
            for (a, b) in p.comps[c].iter().zip(&oracle.comps[c]) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        assert!(f.is_solenoidal());
    }

    #[test]
    fn random_field_is_deterministic_and_valid() {
        let g = GridSpec::with_default_padding(8).unwrap();
        let a = random_solenoidal(g, 11, -1.0, (1.0, 3.0), 1.0);
        let b = random_solenoidal(g, 11, -1.0, (1.0, 3.0), 1.0);
        assert_eq!(a, b);
        assert_ne!(a, random_solenoidal(g, 12, -1.0, (1.0, 3.0), 1.0));
        assert!((a.l2_norm() - 1.0).abs() < 1e-14);
        assert!(a.is_solenoidal());
        assert_eq!(a.symmetry_defect(), 0.0);
        assert!(g.modes().all(|m| m.k_sq <= 9.0 || a.get(m.k) == [Complex64::new(0.0, 0.0); 3]));
    }
}
