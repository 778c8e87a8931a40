//! M, 𝔥, B, R and ᶜR series, their inverses, and generating pairs.

use crate::alg::{self, Inclusion, Mat, C64};
use crate::distribution::{self, DistPair, OVDistribution, PositivityReport};
use crate::error::{Error, Result};
use crate::multimap::MultiMap;
use crate::series::{solve_triangular, NCSeries, Shape};

/// Residual above which a coefficient is not considered to factor with a free trailing slot.
pub const FACTOR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    M,
    B,
    R,
    CR,
}

impl TransformKind {
    pub fn name(&self) -> &'static str {
        match self {
            TransformKind::M => "M",
            TransformKind::B => "B",
            TransformKind::R => "R",
            TransformKind::CR => "cR",
        }
    }
}

/// Split `c(b_1..b_k) = s(b_1..b_{k−1})·ι(b_k)` in the least-squares sense.
pub(crate) fn split_trailing(c: &MultiMap, inc: &Inclusion) -> (MultiMap, f64) {
    let k = c.arity();
    debug_assert!(k >= 1);
    let d = inc.d_b;
    let nb = d * d;
    let units: Vec<Mat> = (0..nb).map(|w| inc.apply(&alg::unit(d, w))).collect();
    let scale = C64::new(1.0 / d as f64, 0.0);
    let head = MultiMap::from_fn(k - 1, d, inc.d_d, |t| {
        let mut acc = alg::zeros(inc.d_d);
        let mut tuple = t.to_vec();
        tuple.push(0);
        for (w, e) in units.iter().enumerate() {
            tuple[k - 1] = w;
            acc += c.at(&tuple) * e.adjoint();
        }
        acc * scale
    });
    let rebuilt = head.concat_mul(&MultiMap::embedded_identity(inc));
    let res = rebuilt.max_diff(c);
    (head, res)
}

/// `M(b) = 1 + Σ_k μ(X b X ⋯ X b)`; the order-k coefficient is `m_k(b_1..b_{k−1})·ι(b_k)`.
pub fn m_series(d: &OVDistribution) -> NCSeries {
    let inc = *d.inclusion();
    let tail = MultiMap::embedded_identity(&inc);
    let mut coeffs = vec![MultiMap::constant(inc.d_b, &alg::eye(inc.d_d))];
    for k in 1..=d.order() {
        coeffs.push(d.moment(k).concat_mul(&tail));
    }
    NCSeries::from_parts(inc, coeffs)
}

/// Inverse of [`m_series`]; fails if a coefficient does not factor with a trailing slot.
pub fn moments_from_m_series(m: &NCSeries) -> Result<OVDistribution> {
    let inc = *m.inclusion();
    let c0 = m.constant_term();
    let dev = alg::max_diff(&c0, &alg::eye(inc.d_d));
    if dev > FACTOR_TOL {
        return Err(Error::Structure {
            msg: "moment series must have constant term 1".into(),
            residual: dev,
        });
    }
    let mut moments = Vec::with_capacity(m.order());
    for k in 1..=m.order() {
        let (head, res) = split_trailing(m.coeff(k), &inc);
        if res > FACTOR_TOL * (1.0 + m.coeff(k).max_abs()) {
            return Err(Error::Structure {
                msg: format!("order-{k} coefficient is not of the form m_k(..)·b_k"),
                residual: res,
            });
        }
        moments.push(head);
    }
    OVDistribution::new(inc, moments)
}

/// `𝔥(b) = b·M(b)`, so that `𝔥(b) = G(b^{-1})`.
pub fn frak_h_series(d: &OVDistribution) -> NCSeries {
    let inc = *d.inclusion();
    let m = m_series(d);
    let head = MultiMap::embedded_identity(&inc);
    let mut coeffs = vec![MultiMap::zeros(0, inc.d_b, inc.d_d)];
    for k in 1..=d.order() {
        coeffs.push(head.concat_mul(m.coeff(k - 1)));
    }
    NCSeries::from_parts(inc, coeffs)
}

/// Solution of `M − 1 = B·M`.
pub fn b_series(d: &OVDistribution) -> Result<NCSeries> {
    solve_triangular(Shape::BInverse, &[&m_series(d)])
}

/// Solution of `M − 1 = R(b·M(b))`; needs `D = B`.
pub fn r_series(d: &OVDistribution) -> Result<NCSeries> {
    d.require_b_valued("the R-transform")?;
    solve_triangular(Shape::RInverse, &[&m_series(d)])
}

/// Solution of `(M_μ − 1)·M_ν = M_μ·ᶜR(b·M_ν(b))`.
pub fn cr_series(pair: &DistPair) -> Result<NCSeries> {
    solve_triangular(Shape::CRInverse, &[&m_series(&pair.mu), &m_series(&pair.nu)])
}

/// Moments whose B- or R-transform is `t`.
pub fn moments_from_transform(kind: TransformKind, t: &NCSeries) -> Result<OVDistribution> {
    let m = match kind {
        TransformKind::B => solve_triangular(Shape::BForward, &[t])?,
        TransformKind::R => solve_triangular(Shape::RForward, &[t])?,
        TransformKind::M => t.clone(),
        TransformKind::CR => {
            return Err(Error::Usage(
                "the cR-transform needs the second coordinate; use pair_first_from_cr".into(),
            ))
        }
    };
    moments_from_m_series(&m)
}

/// First coordinate of the pair with `ᶜR_{μ,ν} = cr` and given `ν`.
pub fn pair_first_from_cr(cr: &NCSeries, nu: &OVDistribution) -> Result<OVDistribution> {
    let m = solve_triangular(Shape::CRForward, &[cr, &m_series(nu)])?;
    moments_from_m_series(&m)
}

/// `(γ, σ)` with `B(b) = [γ + σ̃(b(1 − Xb)^{-1})]·b`; `sigma[k−1] = σ(b_1 X ⋯ X b_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingPair {
    pub inclusion: Inclusion,
    pub gamma: Mat,
    pub sigma: Vec<MultiMap>,
    /// Factorization residual reported by extraction.
    pub residual: f64,
}

impl GeneratingPair {
    /// Block-PSD test of `σ` on the word family of degree ≤ `cutoff`.
    pub fn cp_report(&self, cutoff: usize) -> Result<PositivityReport> {
        distribution::check_sigma_positivity(&self.sigma, &self.inclusion, cutoff)
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.sigma
            .iter()
            .fold(alg::max_diff(&self.gamma, &self.gamma.adjoint()), |m, s| {
                m.max(s.hermitian_residual())
            })
    }
}

pub fn extract_generating_pair(b: &NCSeries) -> Result<GeneratingPair> {
    let inc = *b.inclusion();
    if b.coeff(0).max_abs() > 0.0 {
        return Err(Error::Precondition(
            "a B-transform has zero constant term".into(),
        ));
    }
    let mut residual: f64 = 0.0;
    let mut gamma = alg::zeros(inc.d_d);
    let mut sigma = Vec::new();
    for k in 1..=b.order() {
        let (head, res) = split_trailing(b.coeff(k), &inc);
        let rel = res / (1.0 + b.coeff(k).max_abs());
        residual = residual.max(rel);
        if k == 1 {
            gamma = head.block_mat(0);
        } else {
            sigma.push(head);
        }
    }
    if residual > FACTOR_TOL {
        return Err(Error::Structure {
            msg: "series does not factor as [γ + σ̃(b(1−Xb)⁻¹)]·b".into(),
            residual,
        });
    }
    Ok(GeneratingPair {
        inclusion: inc,
        gamma,
        sigma,
        residual,
    })
}

/// Rebuild the series `[γ + σ̃(b(1 − Xb)^{-1})]·b` to order `n`.
pub fn b_from_pair(p: &GeneratingPair, n: usize) -> Result<NCSeries> {
    let inc = p.inclusion;
    if n > p.sigma.len() + 1 {
        return Err(Error::Dimension(format!(
            "pair carries σ up to {} arguments, order {n} needs {}",
            p.sigma.len(),
            n - 1
        )));
    }
    let tail = MultiMap::embedded_identity(&inc);
    let mut s = NCSeries::zero(inc, n)?;
    if n >= 1 {
        s.set_coeff(1, MultiMap::constant(inc.d_b, &p.gamma).concat_mul(&tail))?;
    }
    for k in 2..=n {
        s.set_coeff(k, p.sigma[k - 2].concat_mul(&tail))?;
    }
    Ok(s)
}
