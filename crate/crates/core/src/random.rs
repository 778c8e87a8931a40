//! Seeded random operator models, half-plane points and nilpotent arguments.

use rand::Rng;

use crate::alg::{self, Mat, C64};
use crate::distribution::{kraus_amplified, state_expectation, DistPair, Functional, OVDistribution, OperatorModel};
use crate::error::Result;

/// Size of the auxiliary matrix factor: models live in `M_3 ⊗ M_d`.
pub const AMBIENT: usize = 3;

/// How θ is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaKind {
    /// A second vector-state expectation onto `B`.
    State,
    /// `(V ⊗ 1)^*(·)(V ⊗ 1)` for a random `3 × 2` isometry `V`, landing in `M_2 ⊗ B`.
    Amplified,
}

fn gaussian_like<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| gaussian_like(rng))
}

/// Random selfadjoint matrix with operator norm `scale`.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Mat {
    let a = random_matrix(rng, n, n);
    let h = &a + a.adjoint();
    let norm = alg::op_norm(&h).max(1e-12);
    h.map(|z| z * (scale / norm))
}

/// Random density matrix with full rank.
pub fn random_density<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let a = random_matrix(rng, n, n);
    let p = &a * a.adjoint() + alg::scalar(n, C64::new(0.1, 0.0));
    let tr = p.trace();
    p.map(|z| z / tr)
}

/// Random `r × s` isometry (`V^*V = 1_s`).
pub fn random_isometry<R: Rng>(rng: &mut R, r: usize, s: usize) -> Mat {
    random_matrix(rng, r, s).qr().q()
}

/// Random model over `B = M_d` with `‖X‖ ≤ 1`.
pub fn random_model<R: Rng>(rng: &mut R, d: usize, theta: ThetaKind) -> Result<OperatorModel> {
    let m = AMBIENT * d;
    let scale = rng.random_range(0.5..1.0);
    let x = random_hermitian(rng, m, scale);
    let e_b = state_expectation(&random_density(rng, AMBIENT), d)?;
    let theta = match theta {
        ThetaKind::State => state_expectation(&random_density(rng, AMBIENT), d)?,
        ThetaKind::Amplified => kraus_amplified(&[random_isometry(rng, AMBIENT, 2)], d)?,
    };
    OperatorModel::new(x, e_b, theta, d)
}

/// `E_B`-distribution of a random model.
pub fn random_dist<R: Rng>(rng: &mut R, d: usize, order: usize) -> Result<OVDistribution> {
    random_model(rng, d, ThetaKind::State)?.moments(Functional::Expectation, order)
}

/// `(θ, E_B)` pair of a random model.
pub fn random_pair<R: Rng>(rng: &mut R, d: usize, order: usize, theta: ThetaKind) -> Result<DistPair> {
    random_model(rng, d, theta)?.pair(order)
}

/// Random point of the upper half-plane of `M_n`, with `Im b ⪰ floor`.
pub fn random_half_plane<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Mat {
    let scale = rng.random_range(0.0..3.0);
    let re = random_hermitian(rng, n, scale);
    let c = random_matrix(rng, n, n);
    let im = &c * c.adjoint() + alg::scalar(n, C64::new(floor, 0.0));
    re + im * C64::i()
}

/// Random strictly block-upper-triangular element of `M_n(M_d)`.
pub fn random_nilpotent<R: Rng>(rng: &mut R, n: usize, d: usize) -> Mat {
    let mut a = alg::zeros(n * d);
    for r in 0..n {
        for s in r + 1..n {
            alg::set_block(&mut a, d, r, s, &random_matrix(rng, d, d));
        }
    }
    a
}

/// Random invertible scalar matrix `S ∈ GL_n(ℂ)`, well conditioned.
pub fn random_similarity<R: Rng>(rng: &mut R, n: usize) -> Mat {
    random_matrix(rng, n, n).map(|z| z * 0.3) + alg::eye(n)
}
