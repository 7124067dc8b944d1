//! Seeded random copulas for property checks.
//!
//! Members are mixtures λ·A + (1−λ)·B of atoms drawn from M_θ, Clayton, Π, M
//! and W, each atom transposed with probability ½. Parameters are uniform:
//! λ on [0, 1], θ on [0, 1/3], δ on [0.5, 5]. The first atom is an M_θ with
//! probability 0.6 so that most members are genuinely asymmetric.

use rand::Rng;

use crate::copula::{
    make_clayton, make_m, make_mtheta, make_pi, make_w, mixture, transpose, ClaytonParams, Copula,
    MThetaParams,
};
use crate::sampling::{seeded_rng, RngSeed};

fn random_mtheta<R: Rng>(rng: &mut R) -> Copula {
    let theta = rng.gen_range(0.0..=MThetaParams::MAX_THETA);
    make_mtheta(MThetaParams::new(theta).expect("theta drawn in range"))
}

fn random_atom<R: Rng>(rng: &mut R) -> Copula {
    let atom = match rng.gen_range(0..5) {
        0 => random_mtheta(rng),
        1 => {
            let delta = rng.gen_range(0.5..=5.0);
            make_clayton(ClaytonParams::new(delta).expect("delta drawn in range"))
        }
        2 => make_pi(),
        3 => make_m(),
        _ => make_w(),
    };
    maybe_transpose(rng, atom)
}

fn maybe_transpose<R: Rng>(rng: &mut R, c: Copula) -> Copula {
    if rng.gen::<bool>() {
        transpose(&c)
    } else {
        c
    }
}

pub fn random_copula<R: Rng>(rng: &mut R) -> Copula {
    let lambda = rng.gen_range(0.0..=1.0);
    let left = if rng.gen_bool(0.6) {
        let c = random_mtheta(rng);
        maybe_transpose(rng, c)
    } else {
        random_atom(rng)
    };
    let right = random_atom(rng);
    mixture(lambda, &left, &right).expect("lambda drawn in [0, 1]")
}

pub fn random_pool(count: usize, seed: RngSeed) -> Vec<Copula> {
    let mut rng = seeded_rng(seed);
    (0..count).map(|_| random_copula(&mut rng)).collect()
}
