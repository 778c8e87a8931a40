//! Truncated noncommutative power series `c_0 + Σ_{k≤N} c_k(b, …, b)`.

use std::str::FromStr;

use crate::alg::{self, Inclusion, Mat, C64};
use crate::error::{Error, Result};
use crate::guard;
use crate::multimap::MultiMap;

pub const SERIES_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NCSeries {
    inclusion: Inclusion,
    coeffs: Vec<MultiMap>,
}

impl NCSeries {
    pub fn new(inclusion: Inclusion, coeffs: Vec<MultiMap>) -> Result<Self> {
        inclusion.validate()?;
        if coeffs.is_empty() {
            return Err(Error::Dimension("a series needs at least a constant term".into()));
        }
        guard::check_shape(inclusion.d_b, inclusion.d_d, coeffs.len() - 1)?;
        for (k, c) in coeffs.iter().enumerate() {
            if c.arity() != k || c.d_src() != inclusion.d_b || c.d_tgt() != inclusion.d_d {
                return Err(Error::Dimension(format!(
                    "coefficient {k} has arity {} and dims ({}, {}), expected ({k}, {}, {})",
                    c.arity(),
                    c.d_src(),
                    c.d_tgt(),
                    inclusion.d_b,
                    inclusion.d_d
                )));
            }
        }
        Ok(NCSeries { inclusion, coeffs })
    }

    pub(crate) fn from_parts(inclusion: Inclusion, coeffs: Vec<MultiMap>) -> Self {
        NCSeries { inclusion, coeffs }
    }

    pub fn zero(inclusion: Inclusion, order: usize) -> Result<Self> {
        inclusion.validate()?;
        guard::check_shape(inclusion.d_b, inclusion.d_d, order)?;
        Ok(Self::zero_unchecked(inclusion, order))
    }

    pub(crate) fn zero_unchecked(inclusion: Inclusion, order: usize) -> Self {
        let coeffs = (0..=order)
            .map(|k| MultiMap::zeros(k, inclusion.d_b, inclusion.d_d))
            .collect();
        NCSeries { inclusion, coeffs }
    }

    /// The constant series `1`.
    pub fn one(inclusion: Inclusion, order: usize) -> Result<Self> {
        let mut s = Self::zero(inclusion, order)?;
        s.coeffs[0] = MultiMap::constant(inclusion.d_b, &alg::eye(inclusion.d_d));
        Ok(s)
    }

    /// The series `b ↦ ι(b)`.
    pub fn variable(inclusion: Inclusion, order: usize) -> Result<Self> {
        let mut s = Self::zero(inclusion, order)?;
        if order >= 1 {
            s.coeffs[1] = MultiMap::embedded_identity(&inclusion);
        }
        Ok(s)
    }

    pub fn inclusion(&self) -> &Inclusion {
        &self.inclusion
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &MultiMap {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[MultiMap] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, k: usize, c: MultiMap) -> Result<()> {
        if k > self.order() || !c.same_shape(&self.coeffs[k]) {
            return Err(Error::Dimension(format!("coefficient {k} has the wrong shape")));
        }
        self.coeffs[k] = c;
        Ok(())
    }

    pub fn constant_term(&self) -> Mat {
        self.coeffs[0].block_mat(0)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.inclusion != other.inclusion {
            return Err(Error::Dimension(format!(
                "inclusions differ: {:?} vs {:?}",
                self.inclusion, other.inclusion
            )));
        }
        if self.order() != other.order() {
            return Err(Error::Dimension(format!(
                "truncation orders differ: {} vs {}",
                self.order(),
                other.order()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect();
        Ok(Self::from_parts(self.inclusion, coeffs))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.sub(b)).collect();
        Ok(Self::from_parts(self.inclusion, coeffs))
    }

    pub fn scale(&self, t: f64) -> Self {
        let z = C64::new(t, 0.0);
        Self::from_parts(self.inclusion, self.coeffs.iter().map(|c| c.scale(z)).collect())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let n = self.order();
        let coeffs = (0..=n)
            .map(|k| {
                let mut acc = MultiMap::zeros(k, self.inclusion.d_b, self.inclusion.d_d);
                for i in 0..=k {
                    acc.add_assign(&self.coeffs[i].concat_mul(&other.coeffs[k - i]));
                }
                acc
            })
            .collect();
        Ok(Self::from_parts(self.inclusion, coeffs))
    }

    pub fn reciprocal(&self) -> Result<Self> {
        let c0_inv = alg::inverse(&self.constant_term())
            .map_err(|e| Error::Singular(format!("constant term is not invertible ({e})")))?;
        let d_b = self.inclusion.d_b;
        let mut out: Vec<MultiMap> = vec![MultiMap::constant(d_b, &c0_inv)];
        let minus = -c0_inv;
        for k in 1..=self.order() {
            let mut acc = MultiMap::zeros(k, d_b, self.inclusion.d_d);
            for i in 1..=k {
                acc.add_assign(&self.coeffs[i].concat_mul(&out[k - i]));
            }
            out.push(acc.left_mul(&minus));
        }
        Ok(Self::from_parts(self.inclusion, out))
    }

    /// Push a B-valued series into D.
    pub fn embed(&self, inc: &Inclusion) -> Result<Self> {
        if !self.inclusion.is_identity() || self.inclusion.d_b != inc.d_b {
            return Err(Error::Type(
                "only B-valued series can be embedded into D".into(),
            ));
        }
        Ok(Self::from_parts(*inc, self.coeffs.iter().map(|c| c.embed(inc)).collect()))
    }

    /// The same series viewed as B-valued; fails unless every coefficient lies in ι(B).
    pub fn into_b(&self) -> Result<Self> {
        if self.inclusion.is_identity() {
            return Ok(self.clone());
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            let (p, res) = c.pull_back(&self.inclusion);
            if res > SERIES_TOL * (1.0 + c.max_abs()) {
                return Err(Error::Type(format!(
                    "series is not B-valued (distance to ι(B) = {res:.3e})"
                )));
            }
            coeffs.push(p);
        }
        Ok(Self::from_parts(self.inclusion.base(), coeffs))
    }

    /// `F ∘ W`; `W` must have zero constant term and be B-valued.
    pub fn compose(&self, w: &Self) -> Result<Self> {
        if self.order() != w.order() {
            return Err(Error::Dimension("truncation orders differ".into()));
        }
        if w.inclusion.d_b != self.inclusion.d_b {
            return Err(Error::Dimension("source algebras differ".into()));
        }
        if w.coeffs[0].max_abs() > 0.0 {
            return Err(Error::Precondition(
                "inner series must have zero constant term".into(),
            ));
        }
        let w = w.into_b()?;
        let n = self.order();
        let coeffs = (0..=n)
            .map(|k| {
                if k == 0 {
                    return self.coeffs[0].clone();
                }
                let mut acc = MultiMap::zeros(k, self.inclusion.d_b, self.inclusion.d_d);
                for j in 1..=k {
                    acc.add_assign(&compose_term(&self.coeffs[j], &w.coeffs, k));
                }
                acc
            })
            .collect();
        Ok(Self::from_parts(self.inclusion, coeffs))
    }

    /// Largest entrywise difference over all coefficients.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| m.max(a.max_diff(b)))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.check_compatible(other).is_ok()
            && self.max_diff(other) <= tol * (1.0 + self.max_abs().max(other.max_abs()))
    }

    /// Partial sum `Σ_k c_k(b, …, b)` at level one.
    pub fn eval(&self, b: &Mat) -> Mat {
        self.eval_amplified(b, 1)
    }

    /// Partial sum of the canonical fully matricial extension at level `n`.
    pub fn eval_amplified(&self, a: &Mat, n: usize) -> Mat {
        let mut out = alg::zeros(n * self.inclusion.d_d);
        for (k, c) in self.coeffs.iter().enumerate() {
            let args = vec![a.clone(); k];
            out += c.eval_amplified(&args, n);
        }
        out
    }
}

fn for_each_composition(k: usize, j: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(rem: usize, parts: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if parts == 0 {
            if rem == 0 {
                f(cur);
            }
            return;
        }
        for l in 1..=rem.saturating_sub(parts - 1) {
            cur.push(l);
            rec(rem - l, parts - 1, cur, f);
            cur.pop();
        }
    }
    rec(k, j, &mut Vec::with_capacity(j), f);
}

/// Order-`k` part of `c_j(W(b), …, W(b))` where `w[l]` is the order-`l` coefficient of W.
pub(crate) fn compose_term(c_j: &MultiMap, w: &[MultiMap], k: usize) -> MultiMap {
    let j = c_j.arity();
    let mut acc = MultiMap::zeros(k, c_j.d_src(), c_j.d_tgt());
    if j == 0 {
        if k == 0 {
            acc.add_assign(c_j);
        }
        return acc;
    }
    for_each_composition(k, j, &mut |parts| {
        if parts.iter().any(|&l| l >= w.len()) {
            return;
        }
        let ws: Vec<&MultiMap> = parts.iter().map(|&l| &w[l]).collect();
        acc.add_assign(&c_j.substitute(&ws));
    });
    acc
}

/// The registered functional-equation shapes; `Inverse` solves for the transform given the
/// moment series, `Forward` for the moment series given the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `M − 1 = H(b·M(b))`, knowns `[M]`.
    RInverse,
    /// same equation, knowns `[H]`.
    RForward,
    /// `M − 1 = H·M`, knowns `[M]`.
    BInverse,
    /// same equation, knowns `[H]`.
    BForward,
    /// `(M_μ − 1)·M_ν = M_μ·H(b·M_ν(b))`, knowns `[M_μ, M_ν]`.
    CRInverse,
    /// same equation solved for `M_μ`, knowns `[H, M_ν]`.
    CRForward,
}

impl Shape {
    pub fn arity(&self) -> usize {
        match self {
            Shape::CRInverse | Shape::CRForward => 2,
            _ => 1,
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "r-inverse" => Shape::RInverse,
            "r-forward" => Shape::RForward,
            "b-inverse" => Shape::BInverse,
            "b-forward" => Shape::BForward,
            "cr-inverse" => Shape::CRInverse,
            "cr-forward" => Shape::CRForward,
            other => {
                return Err(Error::Usage(format!(
                    "unregistered equation shape '{other}'"
                )))
            }
        })
    }
}

fn require_unit_constant(m: &NCSeries) -> Result<()> {
    let d = m.inclusion.d_d;
    if alg::max_diff(&m.constant_term(), &alg::eye(d)) > SERIES_TOL {
        return Err(Error::Precondition(
            "moment series must have constant term 1".into(),
        ));
    }
    Ok(())
}

fn require_zero_constant(h: &NCSeries) -> Result<()> {
    if h.coeffs[0].max_abs() > 0.0 {
        return Err(Error::Precondition(
            "transform must have zero constant term".into(),
        ));
    }
    Ok(())
}

/// `W(b) = b·M(b)` for a B-valued `M`.
fn b_times(m: &NCSeries) -> Vec<MultiMap> {
    let d = m.inclusion.d_b;
    let id = MultiMap::identity(d);
    let mut w = vec![MultiMap::zeros(0, d, d)];
    for l in 1..=m.order() {
        w.push(id.concat_mul(&m.coeffs[l - 1]));
    }
    w
}

/// Solve one of the registered triangular functional equations to the knowns' order.
pub fn solve_triangular(shape: Shape, knowns: &[&NCSeries]) -> Result<NCSeries> {
    if knowns.len() != shape.arity() {
        return Err(Error::Usage(format!(
            "{shape:?} takes {} known series, got {}",
            shape.arity(),
            knowns.len()
        )));
    }
    let first = knowns[0];
    let inc = first.inclusion;
    let n = first.order();
    let (d_b, d_d) = (inc.d_b, inc.d_d);
    let one_d = MultiMap::constant(d_b, &alg::eye(d_d));
    match shape {
        Shape::RInverse | Shape::RForward => {
            if !inc.is_identity() {
                return Err(Error::Type(
                    "the R-equation needs a B-valued series (D = B)".into(),
                ));
            }
        }
        _ => {}
    }
    match shape {
        Shape::RInverse => {
            let m = first;
            require_unit_constant(m)?;
            let w = b_times(m);
            let mut h = vec![MultiMap::zeros(0, d_b, d_d)];
            for k in 1..=n {
                let mut acc = m.coeffs[k].clone();
                for (j, hj) in h.iter().enumerate().skip(1) {
                    acc = acc.sub(&compose_term(hj, &w, k));
                    debug_assert!(j < k);
                }
                h.push(acc);
            }
            Ok(NCSeries::from_parts(inc, h))
        }
        Shape::RForward => {
            let h = first;
            require_zero_constant(h)?;
            let id = MultiMap::identity(d_b);
            let mut m = vec![one_d];
            let mut w = vec![MultiMap::zeros(0, d_b, d_b)];
            for k in 1..=n {
                w.push(id.concat_mul(&m[k - 1]));
                let mut acc = MultiMap::zeros(k, d_b, d_d);
                for j in 1..=k {
                    acc.add_assign(&compose_term(&h.coeffs[j], &w, k));
                }
                m.push(acc);
            }
            Ok(NCSeries::from_parts(inc, m))
        }
        Shape::BInverse => {
            let m = first;
            require_unit_constant(m)?;
            let mut h = vec![MultiMap::zeros(0, d_b, d_d)];
            for k in 1..=n {
                let mut acc = m.coeffs[k].clone();
                for i in 1..k {
                    acc = acc.sub(&h[i].concat_mul(&m.coeffs[k - i]));
                }
                h.push(acc);
            }
            Ok(NCSeries::from_parts(inc, h))
        }
        Shape::BForward => {
            let h = first;
            require_zero_constant(h)?;
            let mut m = vec![one_d];
            for k in 1..=n {
                let mut acc = MultiMap::zeros(k, d_b, d_d);
                for i in 1..=k {
                    acc.add_assign(&h.coeffs[i].concat_mul(&m[k - i]));
                }
                m.push(acc);
            }
            Ok(NCSeries::from_parts(inc, m))
        }
        Shape::CRInverse => {
            let (mu, nu) = (first, knowns[1]);
            check_pair_shapes(mu, nu)?;
            require_unit_constant(mu)?;
            require_unit_constant(nu)?;
            let w = b_times(nu);
            let nu_d = nu.embed(&inc)?;
            let mut h = vec![MultiMap::zeros(0, d_b, d_d)];
            let mut p = vec![MultiMap::zeros(0, d_b, d_d)];
            for k in 1..=n {
                let mut partial = MultiMap::zeros(k, d_b, d_d);
                for hj in h.iter().skip(1) {
                    partial.add_assign(&compose_term(hj, &w, k));
                }
                let mut acc = MultiMap::zeros(k, d_b, d_d);
                for i in 1..=k {
                    acc.add_assign(&mu.coeffs[i].concat_mul(&nu_d.coeffs[k - i]));
                }
                for i in 1..k {
                    acc = acc.sub(&mu.coeffs[i].concat_mul(&p[k - i]));
                }
                let hk = acc.sub(&partial);
                p.push(partial.add(&hk));
                h.push(hk);
            }
            Ok(NCSeries::from_parts(inc, h))
        }
        Shape::CRForward => {
            let (h, nu) = (first, knowns[1]);
            check_pair_shapes(h, nu)?;
            require_zero_constant(h)?;
            require_unit_constant(nu)?;
            let w = b_times(nu);
            let nu_d = nu.embed(&inc)?;
            let p: Vec<MultiMap> = (0..=n)
                .map(|k| {
                    let mut acc = MultiMap::zeros(k, d_b, d_d);
                    for j in 1..=k {
                        acc.add_assign(&compose_term(&h.coeffs[j], &w, k));
                    }
                    acc
                })
                .collect();
            let mut m = vec![one_d];
            for k in 1..=n {
                let mut acc = p[k].clone();
                for i in 1..k {
                    acc.add_assign(&m[i].concat_mul(&p[k - i].sub(&nu_d.coeffs[k - i])));
                }
                m.push(acc);
            }
            Ok(NCSeries::from_parts(inc, m))
        }
    }
}

fn check_pair_shapes(d_valued: &NCSeries, b_valued: &NCSeries) -> Result<()> {
    if !b_valued.inclusion.is_identity() {
        return Err(Error::Type("second coordinate must be B-valued".into()));
    }
    if b_valued.inclusion.d_b != d_valued.inclusion.d_b {
        return Err(Error::Dimension("coordinates have different B".into()));
    }
    if b_valued.order() != d_valued.order() {
        return Err(Error::Dimension("coordinates have different orders".into()));
    }
    Ok(())
}

/// Value of the fully matricial extension of `f` at a nilpotent `a ∈ M_n(B)`.
pub fn eval_nilpotent(f: &NCSeries, a: &Mat) -> Result<Mat> {
    let d_b = f.inclusion.d_b;
    if !alg::is_square(a) || a.nrows() % d_b != 0 {
        return Err(Error::Dimension(format!(
            "argument of size {}x{} is not in M_n(M_{d_b})",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows() / d_b;
    let mut p = a.clone();
    for _ in 0..f.order() {
        p = &p * a;
    }
    let scale = alg::max_abs(a).max(1.0).powi(f.order() as i32 + 1);
    if alg::max_abs(&p) > 1e-9 * scale {
        return Err(Error::Precondition(format!(
            "argument is not nilpotent of order ≤ {} (‖a^(N+1)‖ = {:.3e})",
            f.order() + 1,
            alg::max_abs(&p)
        )));
    }
    Ok(f.eval_amplified(a, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alg::{c, from_real};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_series(vals: &[f64]) -> NCSeries {
        let inc = Inclusion::identity(1);
        let coeffs = vals
            .iter()
            .enumerate()
            .map(|(k, &v)| MultiMap::from_fn(k, 1, 1, |_| from_real(1, &[v])))
            .collect();
        NCSeries::new(inc, coeffs).unwrap()
    }

    fn scalar_coeffs(s: &NCSeries) -> Vec<f64> {
        s.coeffs().iter().map(|c| c.data()[0].re).collect()
    }

    fn random_series(rng: &mut ChaCha8Rng, d: usize, n: usize, c0: Option<Mat>) -> NCSeries {
        let inc = Inclusion::identity(d);
        let coeffs = (0..=n)
            .map(|k| {
                if k == 0 {
                    if let Some(m) = &c0 {
                        return MultiMap::constant(d, m);
                    }
                }
                MultiMap::from_fn(k, d, d, |_| {
                    Mat::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                })
            })
            .collect();
        NCSeries::new(inc, coeffs).unwrap()
    }

    #[test]
    fn product_of_variables() {
        let b = scalar_series(&[0.0, 1.0, 0.0]);
        let p = b.mul(&b).unwrap();
        assert_eq!(scalar_coeffs(&p), vec![0.0, 0.0, 1.0]);
        let one = NCSeries::one(Inclusion::identity(1), 2).unwrap();
        assert_eq!(one.mul(&one).unwrap(), one);
    }

    #[test]
    fn left_constant_times_variable() {
        let d = 2;
        let inc = Inclusion::identity(d);
        let beta = from_real(2, &[0.0, 1.0, 0.0, 0.0]);
        let mut f = NCSeries::zero(inc, 2).unwrap();
        f.set_coeff(1, MultiMap::identity(d).left_mul(&beta)).unwrap();
        let g = NCSeries::variable(inc, 2).unwrap();
        let fg = f.mul(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let b1 = Mat::from_fn(2, 2, |_, _| c(rng.random_range(-1.0..1.0), 0.0));
            let b2 = Mat::from_fn(2, 2, |_, _| c(0.0, rng.random_range(-1.0..1.0)));
            let lhs = fg.coeff(2).eval(&[b1.clone(), b2.clone()]);
            assert!(alg::max_diff(&lhs, &(&beta * &b1 * &b2)) < 1e-14);
        }
    }

    #[test]
    fn reciprocal_geometric() {
        let f = scalar_series(&[1.0, -1.0, 0.0, 0.0, 0.0]);
        assert_eq!(scalar_coeffs(&f.reciprocal().unwrap()), vec![1.0; 5]);
        let zero_c0 = scalar_series(&[0.0, 1.0]);
        assert!(matches!(zero_c0.reciprocal(), Err(Error::Singular(_))));
    }

    #[test]
    fn reciprocal_random_matrix_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = random_series(&mut rng, 2, 4, Some(alg::eye(2)));
        let r = f.reciprocal().unwrap();
        let one = NCSeries::one(Inclusion::identity(2), 4).unwrap();
        assert!(f.mul(&r).unwrap().max_diff(&one) < 1e-10);
        assert!(r.mul(&f).unwrap().max_diff(&one) < 1e-10);
    }

    #[test]
    fn composition_polynomial_case() {
        let f = scalar_series(&[0.0, 0.0, 1.0, 0.0]);
        let w = scalar_series(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(scalar_coeffs(&f.compose(&w).unwrap()), vec![0.0, 0.0, 1.0, 2.0]);
        let id = scalar_series(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(f.compose(&id).unwrap(), f);
    }

    #[test]
    fn composition_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random_series(&mut rng, 2, 4, None);
        let mut w = random_series(&mut rng, 2, 4, None);
        let mut v = random_series(&mut rng, 2, 4, None);
        w.coeffs[0] = MultiMap::zeros(0, 2, 2);
        v.coeffs[0] = MultiMap::zeros(0, 2, 2);
        let lhs = f.compose(&w).unwrap().compose(&v).unwrap();
        let rhs = f.compose(&w.compose(&v).unwrap()).unwrap();
        assert!(lhs.max_diff(&rhs) < 1e-9);
    }

    #[test]
    fn composition_preconditions() {
        let f = scalar_series(&[0.0, 1.0]);
        let w = scalar_series(&[1.0, 1.0]);
        assert!(matches!(f.compose(&w), Err(Error::Precondition(_))));
        let inc = Inclusion::amplify(1, 2);
        let mut wd = NCSeries::zero(inc, 1).unwrap();
        wd.set_coeff(1, MultiMap::from_fn(1, 1, 2, |_| alg::unit(2, 1))).unwrap();
        let fd = NCSeries::zero(inc, 1).unwrap();
        assert!(matches!(fd.compose(&wd), Err(Error::Type(_))));
    }

    #[test]
    fn b_equation_point_mass() {
        // M = (1 − βb)^{-1} forces H(b) = βb
        let beta = 0.7;
        let m = scalar_series(&[1.0, beta, beta * beta, beta.powi(3), beta.powi(4)]);
        let h = solve_triangular(Shape::BInverse, &[&m]).unwrap();
        let expect = scalar_series(&[0.0, beta, 0.0, 0.0, 0.0]);
        assert!(h.max_diff(&expect) < 1e-15);
        let back = solve_triangular(Shape::BForward, &[&h]).unwrap();
        assert!(back.max_diff(&m) < 1e-15);
    }

    #[test]
    fn r_equation_scalar_semicircle() {
        // independent recursion for M = 1 + z²M²
        let n = 8;
        let mut m = vec![0.0; n + 1];
        m[0] = 1.0;
        for k in 1..=n {
            if k >= 2 {
                m[k] = (0..=k - 2).map(|i| m[i] * m[k - 2 - i]).sum();
            }
        }
        let ms = scalar_series(&m);
        let h = solve_triangular(Shape::RInverse, &[&ms]).unwrap();
        let mut expect = vec![0.0; n + 1];
        expect[2] = 1.0;
        assert!(h.max_diff(&scalar_series(&expect)) < 1e-12);
        // re-substitute: M − 1 = H(bM)
        let b = NCSeries::variable(Inclusion::identity(1), n).unwrap();
        let rhs = h.compose(&b.mul(&ms).unwrap()).unwrap();
        let lhs = ms.sub(&NCSeries::one(Inclusion::identity(1), n).unwrap()).unwrap();
        assert!(lhs.max_diff(&rhs) < 1e-12);
    }

    #[test]
    fn unregistered_shape_and_arity() {
        assert!(matches!("x-inverse".parse::<Shape>(), Err(Error::Usage(_))));
        let m = scalar_series(&[1.0, 0.0]);
        assert!(matches!(
            solve_triangular(Shape::CRInverse, &[&m]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn nilpotent_evaluation_of_zero_and_non_nilpotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let f = random_series(&mut rng, 2, 3, None);
        let z = alg::zeros(6);
        let v = eval_nilpotent(&f, &z).unwrap();
        assert!(alg::max_diff(&v, &alg::kron(&alg::eye(3), &f.constant_term())) < 1e-15);
        assert!(matches!(eval_nilpotent(&f, &alg::eye(6)), Err(Error::Precondition(_))));
    }
}
