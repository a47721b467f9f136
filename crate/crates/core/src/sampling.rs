//! Seeded random fields and states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::State;
use crate::spectral::{BasisSpec, SpectralField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which norm a random state is normalized in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ball {
    /// `H¹₀ × L₂`
    Energy,
    /// `(H² ∩ H¹₀) × H¹₀`
    Regular,
}

/// Gaussian coefficients damped by `λ^{−decay/2}`.
pub fn random_field<R: Rng>(basis: BasisSpec, decay: f64, rng: &mut R) -> SpectralField {
    let coeffs = basis
        .eigenvalues()
        .iter()
        .map(|&l| rng.sample::<f64, _>(StandardNormal) * l.powf(-decay / 2.0))
        .collect();
    SpectralField::from_coeffs(basis, coeffs).expect("finite by construction")
}

/// Smooth random direction with unit norm in `ball`.
pub fn random_direction<R: Rng>(basis: BasisSpec, ball: Ball, rng: &mut R) -> State {
    let w = random_field(basis, 2.0, rng);
    let v = random_field(basis, 1.0, rng);
    let s = State::new(w, v).expect("shared basis");
    let norm = match ball {
        Ball::Energy => s.h_norm(),
        Ball::Regular => s.h1_norm(),
    };
    s.scaled(1.0 / norm)
}

/// Random state of norm at most `radius`, radius drawn uniformly.
pub fn random_state<R: Rng>(basis: BasisSpec, ball: Ball, radius: f64, rng: &mut R) -> State {
    let dir = random_direction(basis, ball, rng);
    let r: f64 = rng.random::<f64>() * radius;
    dir.scaled(r)
}

/// `count` states drawn serially from one seeded stream, so that the ensemble
/// does not depend on how its members are later scheduled.
pub fn ensemble(basis: BasisSpec, ball: Ball, radius: f64, count: usize, seed: u64) -> Vec<State> {
    let mut rng = rng(seed);
    (0..count).map(|_| random_state(basis, ball, radius, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn states_lie_in_the_ball() {
        let b = BasisSpec::new(2, 4).unwrap();
        for s in ensemble(b, Ball::Energy, 0.7, 20, 3) {
            assert!(s.h_norm() <= 0.7 + 1e-12);
        }
        for s in ensemble(b, Ball::Regular, 2.0, 20, 3) {
            assert!(s.h1_norm() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn seeded_streams_repeat() {
        let b = BasisSpec::new(1, 8).unwrap();
        assert_eq!(ensemble(b, Ball::Energy, 1.0, 5, 11), ensemble(b, Ball::Energy, 1.0, 5, 11));
        assert_ne!(ensemble(b, Ball::Energy, 1.0, 5, 11), ensemble(b, Ball::Energy, 1.0, 5, 12));
    }

    #[test]
    fn directions_are_unit() {
        let b = BasisSpec::new(3, 3).unwrap();
        let mut r = rng(1);
        assert!((random_direction(b, Ball::Energy, &mut r).h_norm() - 1.0).abs() < 1e-14);
        assert!((random_direction(b, Ball::Regular, &mut r).h1_norm() - 1.0).abs() < 1e-14);
    }
}
