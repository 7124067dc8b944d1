//! Seeded samplers for every analytic family.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64`; its output stream is specified independently
//! of platform and word size, so identical seeds give bit-identical samples
//! everywhere.

use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::copula::{
    make_clayton, make_m, make_mtheta, make_pi, make_w, mixture, ClaytonParams, Copula, Family,
    MThetaParams,
};
use crate::empirical::SampleSet;
use crate::error::{CopulaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed(pub u64);

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        Self(seed)
    }
}

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: RngSeed) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed.0)
}

fn draw<R: Rng + ?Sized>(c: &Copula, rng: &mut R) -> (f64, f64) {
    match c.family() {
        Family::Pi => (rng.gen(), rng.gen()),
        Family::M => {
            let u: f64 = rng.gen();
            (u, u)
        }
        Family::W => {
            let u: f64 = rng.gen();
            (u, 1.0 - u)
        }
        // Uniform mass 1−θ on the segment (t(1−θ), θ + t(1−θ)) and mass θ on
        // ((1−θ) + tθ, tθ), t ∈ [0, 1).
        Family::MTheta(p) => {
            let theta = p.theta();
            let long: bool = rng.gen::<f64>() < 1.0 - theta;
            let t: f64 = rng.gen();
            if long {
                (t * (1.0 - theta), theta + t * (1.0 - theta))
            } else {
                ((1.0 - theta) + t * theta, t * theta)
            }
        }
        // Conditional inversion: V = ((W^{−δ/(1+δ)} − 1)·U^{−δ} + 1)^{−1/δ}.
        Family::Clayton(p) => {
            let d = p.delta();
            let u: f64 = Open01.sample(rng);
            let w: f64 = Open01.sample(rng);
            let v = ((w.powf(-d / (1.0 + d)) - 1.0) * u.powf(-d) + 1.0).powf(-1.0 / d);
            (u, v)
        }
        Family::Transpose(inner) => {
            let (u, v) = draw(inner, rng);
            (v, u)
        }
        Family::Symmetrized(inner) => {
            let (u, v) = draw(inner, rng);
            if rng.gen::<bool>() {
                (v, u)
            } else {
                (u, v)
            }
        }
        Family::Mixture {
            lambda,
            left,
            right,
        } => {
            if rng.gen::<f64>() < *lambda {
                draw(left, rng)
            } else {
                draw(right, rng)
            }
        }
        Family::GridBacked(_) => unreachable!("checked by Sampler::new"),
    }
}

/// An endless stream of i.i.d. draws from one copula.
#[derive(Debug, Clone)]
pub struct Sampler {
    copula: Copula,
    rng: SeededRng,
}

impl Sampler {
    pub fn new(copula: &Copula, seed: RngSeed) -> Result<Self> {
        if !copula.has_sampler() {
            return Err(CopulaError::NoSampler(copula.to_string()));
        }
        Ok(Self {
            copula: copula.clone(),
            rng: seeded_rng(seed),
        })
    }

    pub fn next_pair(&mut self) -> (f64, f64) {
        draw(&self.copula, &mut self.rng)
    }

    pub fn take_set(&mut self, n: usize) -> SampleSet {
        let pairs = (0..n).map(|_| self.next_pair()).collect();
        SampleSet::from_copula_draws(pairs)
    }
}

impl Iterator for Sampler {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_pair())
    }
}

/// `n` i.i.d. draws from any copula that has a sampler.
pub fn sample(c: &Copula, n: usize, seed: RngSeed) -> Result<SampleSet> {
    Ok(Sampler::new(c, seed)?.take_set(n))
}

pub fn sample_mtheta(params: MThetaParams, n: usize, seed: RngSeed) -> SampleSet {
    Sampler::new(&make_mtheta(params), seed)
        .expect("M_theta has a sampler")
        .take_set(n)
}

pub fn sample_clayton(params: ClaytonParams, n: usize, seed: RngSeed) -> SampleSet {
    Sampler::new(&make_clayton(params), seed)
        .expect("Clayton has a sampler")
        .take_set(n)
}

pub fn sample_pi(n: usize, seed: RngSeed) -> SampleSet {
    Sampler::new(&make_pi(), seed)
        .expect("infallible")
        .take_set(n)
}

pub fn sample_m(n: usize, seed: RngSeed) -> SampleSet {
    Sampler::new(&make_m(), seed)
        .expect("infallible")
        .take_set(n)
}

pub fn sample_w(n: usize, seed: RngSeed) -> SampleSet {
    Sampler::new(&make_w(), seed)
        .expect("infallible")
        .take_set(n)
}

/// Each draw comes from `left` with probability λ, else from `right`.
pub fn sample_mixture(
    lambda: f64,
    left: &Copula,
    right: &Copula,
    n: usize,
    seed: RngSeed,
) -> Result<SampleSet> {
    sample(&mixture(lambda, left, right)?, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::transpose;

    #[test]
    fn comonotone_and_countermonotone_supports() {
        let m = sample_m(1000, RngSeed(3));
        assert!(m.pairs().iter().all(|&(u, v)| u == v));
        let w = sample_w(1000, RngSeed(3));
        assert!(w.pairs().iter().all(|&(u, v)| u + v == 1.0));
        let m0 = sample_mtheta(MThetaParams::new(0.0).unwrap(), 1000, RngSeed(5));
        assert!(m0.pairs().iter().all(|&(u, v)| u == v));
    }

    #[test]
    fn mtheta_points_lie_on_support() {
        let theta = 0.2;
        let s = sample_mtheta(MThetaParams::new(theta).unwrap(), 2000, RngSeed(11));
        for &(u, v) in s.pairs() {
            let on_long = (v - u - theta).abs() < 1e-12;
            let on_short = (u - v - (1.0 - theta)).abs() < 1e-12;
            assert!(on_long || on_short, "({u}, {v})");
        }
    }

    #[test]
    fn mtheta_short_segment_mass() {
        let s = sample_mtheta(MThetaParams::new(0.2).unwrap(), 100_000, RngSeed(1));
        let frac = s.pairs().iter().filter(|p| p.0 > 0.8).count() as f64 / 1e5;
        assert!((frac - 0.2).abs() <= 0.004, "{frac}");
    }

    #[test]
    fn determinism() {
        let c = mixture(
            0.4,
            &transpose(&make_mtheta(MThetaParams::new(0.3).unwrap())),
            &make_clayton(ClaytonParams::new(2.0).unwrap()),
        )
        .unwrap();
        let a = sample(&c, 500, RngSeed(42)).unwrap();
        let b = sample(&c, 500, RngSeed(42)).unwrap();
        assert_eq!(a, b);
        let c2 = sample(&c, 500, RngSeed(43)).unwrap();
        assert_ne!(a, c2);
    }

    #[test]
    fn pinned_stream() {
        // Guards the documented generator: ChaCha8 seeded via seed_from_u64.
        let s = sample_pi(2, RngSeed(0));
        let again = sample_pi(2, RngSeed(0));
        assert_eq!(s.pairs()[0].0.to_bits(), again.pairs()[0].0.to_bits());
        let mut rng = seeded_rng(RngSeed(0));
        let u: f64 = rng.gen();
        assert_eq!(s.pairs()[0].0, u);
    }

    #[test]
    fn grid_copula_has_no_sampler() {
        use crate::copula::{make_grid, GridCopula};
        let g = make_grid(GridCopula::from_knots(1, vec![0.0, 0.0, 0.0, 1.0]).unwrap());
        assert!(matches!(
            sample(&g, 3, RngSeed(0)),
            Err(CopulaError::NoSampler(_))
        ));
    }
}
