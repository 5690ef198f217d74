//! Seeded random fields, paths and protected vectors for the property suites.

use crate::annulus::MobiusFamily;
use crate::field::{inward_margin, FieldPath, Interp, VectorField};
use crate::linalg::{CMat, C64};
use crate::virmod::ModuleData;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type CaseRng = ChaCha8Rng;

pub fn rng(seed: u64) -> CaseRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Gaussian coefficients of size `amp` on the listed modes.
pub fn random_field<R: Rng>(rng: &mut R, modes: &[i32], amp: f64) -> VectorField {
    let pairs: Vec<(i32, C64)> = modes.iter().map(|&n| (n, complex_normal(rng) * amp)).collect();
    VectorField::from_modes(&pairs)
}

/// Random field on the nonzero `modes`, made inward by the choice of a_0:
/// Re a_0 = −max_θ Re Σ a_n e^{inθ} − margin, with margin drawn in
/// [0.05, 0.5]·amp; Im a_0 (a rotation) is Gaussian.
pub fn random_inward_field<R: Rng>(rng: &mut R, modes: &[i32], amp: f64) -> VectorField {
    let nonzero: Vec<i32> = modes.iter().copied().filter(|&n| n != 0).collect();
    let mut x = random_field(rng, &nonzero, amp);
    let peak = -inward_margin(&x, 1024);
    let margin = amp * rng.random_range(0.05..0.5);
    let rot: f64 = rng.sample::<f64, _>(StandardNormal) * amp;
    x.set(0, C64::new(-peak - margin, rot));
    x
}

/// Two-mode field: ℓ_0 plus one mode drawn from {±1, ±2}.
pub fn random_two_mode_field<R: Rng>(rng: &mut R, amp: f64) -> VectorField {
    let choices = [-2, -1, 1, 2];
    let m = choices[rng.random_range(0..choices.len())];
    random_inward_field(rng, &[m], amp)
}

/// Path with independent inward fields at `pieces + 1` uniform knots.
pub fn random_inward_path<R: Rng>(rng: &mut R, modes: &[i32], pieces: usize, amp: f64, interp: Interp) -> FieldPath {
    let knots: Vec<f64> = (0..=pieces).map(|i| i as f64 / pieces as f64).collect();
    let fields = knots.iter().map(|_| random_inward_field(rng, modes, amp)).collect();
    FieldPath::new(knots, fields, interp).expect("uniform knots are valid")
}

/// Two-mode path: a fixed pair of modes {0, m} along the path.
pub fn random_two_mode_path<R: Rng>(rng: &mut R, pieces: usize, amp: f64, interp: Interp) -> FieldPath {
    let choices = [-2, -1, 1, 2];
    let m = choices[rng.random_range(0..choices.len())];
    random_inward_path(rng, &[m], pieces, amp, interp)
}

/// `count` random unit vectors supported on levels ≤ `max_level`, as columns.
pub fn random_protected_vectors<R: Rng>(rng: &mut R, module: &ModuleData, max_level: usize, count: usize) -> CMat {
    let d = module.dim();
    let p = module.dim_through(max_level);
    let mut v = CMat::zeros(d, count);
    for j in 0..count {
        let mut norm = 0.0;
        for i in 0..p {
            let z = complex_normal(rng);
            norm += z.norm_sqr();
            v[(i, j)] = z;
        }
        let s = 1.0 / norm.sqrt();
        for i in 0..p {
            v[(i, j)] *= s;
        }
    }
    v
}

/// Möbius-type framing homotopy on z^p with end radius r and deformation
/// coefficients of size `amp` (δ kept below 1/π so the framings stay inward).
pub fn random_mobius_family<R: Rng>(rng: &mut R, power: u32, r: f64, amp: f64) -> MobiusFamily {
    let normal = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
    MobiusFamily {
        power,
        r,
        b1: complex_normal(rng) * amp,
        alpha1: normal(rng) * amp,
        beta: complex_normal(rng) * amp,
        gamma: normal(rng) * amp,
        delta: rng.random_range(-0.3..0.3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::is_inward;

    #[test]
    fn inward_fields_are_inward_and_reproducible() {
        let mut r = rng(7);
        for _ in 0..50 {
            let x = random_inward_field(&mut r, &[-2, -1, 1, 2, 3], 0.4);
            assert!(is_inward(&x, 2048, 0.0));
            assert!(inward_margin(&x, 2048) > 0.0);
        }
        let a = random_inward_path(&mut rng(3), &[1, -1], 4, 0.5, Interp::Linear);
        let b = random_inward_path(&mut rng(3), &[1, -1], 4, 0.5, Interp::Linear);
        assert_eq!(a, b);
    }
}
