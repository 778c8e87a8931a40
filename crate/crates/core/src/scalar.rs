//! Scalar distributions: T- and ᶜT-transforms, multiplicative free and c-free convolution,
//! and the Bercovici-Pata map as a homomorphism for `⊠_c`.
//!
//! Conventions: `𝓜(z) = Σ_{k≥1} m_k z^k`, `M = 1 + 𝓜`, `𝓜 = R(z(1 + 𝓜))`, `𝓜 = B·M`,
//! `(M_μ − 1)M_ν = M_μ·ᶜR(zM_ν)`, `T = z / R^{<-1>}` and `ᶜT = ᶜR(R_ν^{<-1>}) / R_ν^{<-1>}`.

use rand::Rng;

use crate::alg::C64;
use crate::error::{Error, Result};

/// Means below this are treated as zero when a T-transform needs `m_1 ≠ 0`.
pub const MEAN_TOL: f64 = 1e-12;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// Truncated power series `Σ_{k≤N} c_k z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    c: Vec<C64>,
}

impl PowerSeries {
    pub fn new(c: Vec<C64>) -> Self {
        assert!(!c.is_empty(), "a power series needs at least a constant term");
        PowerSeries { c }
    }

    pub fn from_real(c: &[f64]) -> Self {
        Self::new(c.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zero(order: usize) -> Self {
        Self::new(vec![zero(); order + 1])
    }

    pub fn constant(z: C64, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.c[0] = z;
        s
    }

    /// The series `z`.
    pub fn z(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order >= 1 {
            s.c[1] = one();
        }
        s
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.c
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.c.get(k).copied().unwrap_or_else(zero)
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::new((0..=order).map(|k| self.coeff(k)).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new((0..=self.order()).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new((0..=self.order()).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }

    pub fn scale(&self, z: C64) -> Self {
        Self::new(self.c.iter().map(|&x| x * z).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.order();
        Self::new(
            (0..=n)
                .map(|k| (0..=k).map(|i| self.coeff(i) * o.coeff(k - i)).sum())
                .collect(),
        )
    }

    pub fn reciprocal(&self) -> Result<Self> {
        let c0 = self.c[0];
        if c0.norm() < MEAN_TOL {
            return Err(Error::Singular("series with zero constant term has no reciprocal".into()));
        }
        let mut out = vec![one() / c0];
        for k in 1..=self.order() {
            let s: C64 = (1..=k).map(|i| self.c[i] * out[k - i]).sum();
            out.push(-s / c0);
        }
        Ok(Self::new(out))
    }

    /// `self / z`, dropping the (required zero) constant term; the order drops by one.
    pub fn div_z(&self) -> Result<Self> {
        if self.c[0].norm() > MEAN_TOL {
            return Err(Error::Domain("series is not divisible by z".into()));
        }
        Ok(Self::new(self.c[1..].to_vec()))
    }

    /// `z · self`, the order grows by one.
    pub fn mul_z(&self) -> Self {
        let mut c = vec![zero()];
        c.extend_from_slice(&self.c);
        Self::new(c)
    }

    /// `self ∘ w` for `w(0) = 0`, by Horner's rule.
    pub fn compose(&self, w: &Self) -> Result<Self> {
        if w.c[0].norm() > 0.0 {
            return Err(Error::Precondition("inner series must vanish at 0".into()));
        }
        let n = self.order();
        let w = w.truncate(n);
        let mut acc = Self::constant(self.c[n], n);
        for k in (0..n).rev() {
            acc = acc.mul(&w);
            acc.c[0] += self.c[k];
        }
        Ok(acc)
    }

    pub fn derivative(&self) -> Self {
        let n = self.order();
        Self::new(
            (0..=n)
                .map(|k| self.coeff(k + 1) * C64::new((k + 1) as f64, 0.0))
                .collect(),
        )
    }

    /// Compositional inverse of `f` with `f(0) = 0`, `f'(0) ≠ 0`, by Newton's method.
    pub fn inverse(&self) -> Result<Self> {
        if self.c[0].norm() > 0.0 {
            return Err(Error::Precondition("compositional inverse needs f(0) = 0".into()));
        }
        let a1 = self.coeff(1);
        if a1.norm() < MEAN_TOL {
            return Err(Error::Domain(
                "linear coefficient vanishes: no compositional inverse near 0".into(),
            ));
        }
        let n = self.order();
        let z = Self::z(n);
        let df = self.derivative();
        let mut g = z.scale(one() / a1);
        let mut correct = 2usize;
        while correct <= 2 * n + 2 {
            let fg = self.compose(&g)?;
            let dfg = df.compose(&g)?;
            g = g.sub(&fg.sub(&z).mul(&dfg.reciprocal()?));
            correct *= 2;
        }
        Ok(g)
    }

    /// `self(z / (1 − z))`.
    pub fn shift(&self) -> Result<Self> {
        let n = self.order();
        let geo = Self::new((0..=n).map(|k| if k == 0 { zero() } else { one() }).collect());
        self.compose(&geo)
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        (0..=self.order().max(o.order()))
            .map(|k| (self.coeff(k) - o.coeff(k)).norm())
            .fold(0.0, f64::max)
    }
}

/// Moments `m_1..m_N` of a scalar distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarDist {
    moments: Vec<C64>,
}

impl ScalarDist {
    pub fn new(moments: Vec<C64>) -> Result<Self> {
        if moments.is_empty() {
            return Err(Error::Dimension("a distribution needs at least its mean".into()));
        }
        if moments.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("moments must be finite".into()));
        }
        Ok(ScalarDist { moments })
    }

    pub fn from_real(m: &[f64]) -> Result<Self> {
        Self::new(m.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn order(&self) -> usize {
        self.moments.len()
    }

    pub fn moments(&self) -> &[C64] {
        &self.moments
    }

    pub fn mean(&self) -> C64 {
        self.moments[0]
    }

    /// Point mass `δ_c`.
    pub fn delta(c: f64, order: usize) -> Self {
        Self::from_real(&(1..=order).map(|k| c.powi(k as i32)).collect::<Vec<_>>()).unwrap()
    }

    /// Finitely supported measure `Σ w_i δ_{x_i}` (weights are normalized).
    pub fn atomic(points: &[(f64, f64)], order: usize) -> Result<Self> {
        let total: f64 = points.iter().map(|p| p.1).sum();
        if points.is_empty() || total <= 0.0 || points.iter().any(|p| p.1 < 0.0) {
            return Err(Error::Domain("weights must be nonnegative with positive sum".into()));
        }
        Self::from_real(
            &(1..=order)
                .map(|k| points.iter().map(|(x, w)| w * x.powi(k as i32)).sum::<f64>() / total)
                .collect::<Vec<_>>(),
        )
    }

    /// `c + X` for `X` with the given moments.
    pub fn shifted(&self, c: f64) -> Self {
        let n = self.order();
        let m = |k: usize| if k == 0 { one() } else { self.moments[k - 1] };
        let moments = (1..=n)
            .map(|k| {
                (0..=k)
                    .map(|j| m(j) * C64::new(binom(k, j) * c.powi((k - j) as i32), 0.0))
                    .sum()
            })
            .collect();
        ScalarDist { moments }
    }

    pub fn rademacher(order: usize) -> Self {
        Self::from_real(&(1..=order).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect::<Vec<_>>())
            .unwrap()
    }

    /// Standard semicircle (Catalan even moments).
    pub fn semicircle(order: usize) -> Self {
        Self::from_real(
            &(1..=order)
                .map(|k| if k % 2 == 0 { binom(k, k / 2) / (k / 2 + 1) as f64 } else { 0.0 })
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    /// Free Poisson law with rate `λ`.
    pub fn free_poisson(lambda: f64, order: usize) -> Self {
        Self::from_real(
            &(1..=order)
                .map(|k| {
                    (1..=k)
                        .map(|j| binom(k, j) * binom(k, j - 1) / k as f64 * lambda.powi(j as i32))
                        .sum()
                })
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    /// `𝓜(z) = Σ m_k z^k`.
    pub fn m_script(&self) -> PowerSeries {
        let mut c = vec![zero()];
        c.extend_from_slice(&self.moments);
        PowerSeries::new(c)
    }

    pub fn m_series(&self) -> PowerSeries {
        let mut m = self.m_script();
        m.c[0] = one();
        m
    }

    pub fn from_m_script(m: &PowerSeries) -> Result<Self> {
        Self::new(m.c[1..].to_vec())
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        self.moments
            .iter()
            .zip(&o.moments)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn require_mean(&self, what: &str) -> Result<()> {
        if self.mean().norm() < MEAN_TOL {
            return Err(Error::Domain(format!("{what} needs a nonzero mean")));
        }
        Ok(())
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `R` with `𝓜 = R(z(1 + 𝓜))`.
pub fn r_transform(d: &ScalarDist) -> Result<PowerSeries> {
    let m = d.m_script();
    let w = m.mul_z().add(&PowerSeries::z(d.order() + 1)).truncate(d.order());
    m.compose(&w.inverse()?)
}

/// Solve `𝓜 = R(z(1 + 𝓜))` order by order.
pub fn moments_from_r(r: &PowerSeries) -> Result<ScalarDist> {
    let n = r.order();
    let z = PowerSeries::z(n);
    let mut m = PowerSeries::zero(n);
    for _ in 0..n {
        let w = z.add(&z.mul(&m));
        m = r.compose(&w)?;
    }
    ScalarDist::from_m_script(&m)
}

/// `B = 𝓜 / (1 + 𝓜)`.
pub fn b_transform(d: &ScalarDist) -> Result<PowerSeries> {
    Ok(d.m_script().mul(&d.m_series().reciprocal()?))
}

/// `𝓜 = B / (1 − B)`.
pub fn moments_from_b(b: &PowerSeries) -> Result<ScalarDist> {
    let n = b.order();
    let denom = PowerSeries::constant(one(), n).sub(b);
    ScalarDist::from_m_script(&b.mul(&denom.reciprocal()?))
}

/// Ordered pair `(μ, ν)` with shared truncation order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPair {
    pub mu: ScalarDist,
    pub nu: ScalarDist,
}

impl ScalarPair {
    pub fn new(mu: ScalarDist, nu: ScalarDist) -> Result<Self> {
        if mu.order() != nu.order() {
            return Err(Error::Dimension("pair coordinates need equal orders".into()));
        }
        Ok(ScalarPair { mu, nu })
    }

    pub fn diagonal(d: &ScalarDist) -> Self {
        ScalarPair { mu: d.clone(), nu: d.clone() }
    }

    pub fn order(&self) -> usize {
        self.mu.order()
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        self.mu.max_diff(&o.mu).max(self.nu.max_diff(&o.nu))
    }
}

/// `ᶜR` with `(M_μ − 1)M_ν = M_μ·ᶜR(zM_ν)`.
pub fn cr_transform(p: &ScalarPair) -> Result<PowerSeries> {
    let (mm, mn) = (p.mu.m_series(), p.nu.m_series());
    let lhs = p.mu.m_script().mul(&mn).mul(&mm.reciprocal()?);
    let w = PowerSeries::z(p.order()).mul(&mn);
    lhs.compose(&w.inverse()?)
}

/// First coordinate from `ᶜR` and `ν`: `𝓜_μ = C / (M_ν − C)` with `C = ᶜR(zM_ν)`.
pub fn first_from_cr(cr: &PowerSeries, nu: &ScalarDist) -> Result<ScalarDist> {
    let mn = nu.m_series();
    let c = cr.compose(&PowerSeries::z(nu.order()).mul(&mn))?;
    ScalarDist::from_m_script(&c.mul(&mn.sub(&c).reciprocal()?))
}

/// `T_ν(z) = z / R_ν^{<-1>}(z)`, orders `0..N−1`.
pub fn t_transform(nu: &ScalarDist) -> Result<PowerSeries> {
    nu.require_mean("the T-transform")?;
    let rinv = r_transform(nu)?.inverse()?;
    rinv.div_z()?.reciprocal()
}

/// Inverse of [`t_transform`]: `R^{<-1>} = z / T`.
pub fn moments_from_t(t: &PowerSeries) -> Result<ScalarDist> {
    let rinv = t.reciprocal()?.mul_z();
    moments_from_r(&rinv.inverse()?)
}

/// `ᶜT(z) = ᶜR(R_ν^{<-1>}(z)) / R_ν^{<-1>}(z)`.
pub fn ct_transform(p: &ScalarPair) -> Result<PowerSeries> {
    p.nu.require_mean("the cT-transform")?;
    let rinv = r_transform(&p.nu)?.inverse()?;
    cr_transform(p)?.compose(&rinv)?.div_z()?.mul(&rinv.div_z()?.reciprocal()?).truncate_checked(p.order())
}

impl PowerSeries {
    fn truncate_checked(&self, order: usize) -> Result<Self> {
        Ok(self.truncate(order.saturating_sub(1)))
    }
}

/// First coordinate from `ᶜT` and `ν`: `ᶜR(w) = w·ᶜT(R_ν(w))`.
pub fn first_from_ct(ct: &PowerSeries, nu: &ScalarDist) -> Result<ScalarDist> {
    let n = nu.order();
    let r = r_transform(nu)?;
    let cr = ct.truncate(n).compose(&r)?.mul_z().truncate(n);
    first_from_cr(&cr, nu)
}

/// The identity `ᶜT(z) = B_μ(𝓜_ν^{<-1>}(z)) / 𝓜_ν^{<-1>}(z)`, evaluated as a series.
pub fn ct_via_boolean(p: &ScalarPair) -> Result<PowerSeries> {
    p.nu.require_mean("the cT-transform")?;
    let minv = p.nu.m_script().inverse()?;
    let num = b_transform(&p.mu)?.compose(&minv)?.div_z()?;
    Ok(num.mul(&minv.div_z()?.reciprocal()?).truncate(p.order() - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultKind {
    Free,
    CFree,
}

/// `x ⊠ y` through `T_{x⊠y} = T_x T_y`.
pub fn mult_free(x: &ScalarDist, y: &ScalarDist) -> Result<ScalarDist> {
    if x.order() != y.order() {
        return Err(Error::Dimension("orders differ".into()));
    }
    moments_from_t(&t_transform(x)?.mul(&t_transform(y)?))
}

/// `(μ_1, ν_1) ⊠_c (μ_2, ν_2)`: `ν` by `⊠`, `μ` through `ᶜT` multiplicativity.
pub fn mult_cfree(x: &ScalarPair, y: &ScalarPair) -> Result<ScalarPair> {
    if x.order() != y.order() {
        return Err(Error::Dimension("orders differ".into()));
    }
    let nu = mult_free(&x.nu, &y.nu)?;
    let ct = ct_transform(x)?.mul(&ct_transform(y)?);
    ScalarPair::new(first_from_ct(&ct, &nu)?, nu)
}

/// Scalar BP: `R_{ν′} = B_ν`.
pub fn bp(nu: &ScalarDist) -> Result<ScalarDist> {
    moments_from_r(&b_transform(nu)?)
}

/// Scalar c-free BP: `ᶜR_{μ′,ν′} = B_μ`, `R_{ν′} = B_ν`.
pub fn bp_pair(p: &ScalarPair) -> Result<ScalarPair> {
    let nu = bp(&p.nu)?;
    ScalarPair::new(first_from_cr(&b_transform(&p.mu)?, &nu)?, nu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomomorphismReport {
    /// `‖ᶜT_{BP(μ,ν)}(z) − ᶜT_{(μ,ν)}(z/(1−z))‖` over both input pairs.
    pub shift_residual: f64,
    /// `‖T_{BP(ν)}(z) − T_ν(z/(1−z))‖`.
    pub t_shift_residual: f64,
    /// `‖BP(x ⊠_c y) − BP(x) ⊠_c BP(y)‖` on moments.
    pub homomorphism_residual: f64,
}

impl HomomorphismReport {
    pub fn max(&self) -> f64 {
        self.shift_residual.max(self.t_shift_residual).max(self.homomorphism_residual)
    }
}

/// Residual of the shift lemma for one pair.
pub fn shift_lemma_residual(p: &ScalarPair) -> Result<f64> {
    let lhs = ct_transform(&bp_pair(p)?)?;
    let rhs = ct_transform(p)?.shift()?;
    let t_lhs = t_transform(&bp(&p.nu)?)?;
    let t_rhs = t_transform(&p.nu)?.shift()?;
    Ok(lhs.max_diff(&rhs).max(t_lhs.max_diff(&t_rhs)))
}

pub fn verify_bp_homomorphism(x: &ScalarPair, y: &ScalarPair) -> Result<HomomorphismReport> {
    for p in [x, y] {
        p.mu.require_mean("the BP homomorphism check")?;
        p.nu.require_mean("the BP homomorphism check")?;
    }
    let mut shift: f64 = 0.0;
    let mut t_shift: f64 = 0.0;
    for p in [x, y] {
        shift = shift.max(ct_transform(&bp_pair(p)?)?.max_diff(&ct_transform(p)?.shift()?));
        t_shift = t_shift.max(t_transform(&bp(&p.nu)?)?.max_diff(&t_transform(&p.nu)?.shift()?));
    }
    let lhs = bp_pair(&mult_cfree(x, y)?)?;
    let rhs = mult_cfree(&bp_pair(x)?, &bp_pair(y)?)?;
    Ok(HomomorphismReport {
        shift_residual: shift,
        t_shift_residual: t_shift,
        homomorphism_residual: lhs.max_diff(&rhs),
    })
}

/// A random finitely supported probability measure on `[lo, hi]` with `atoms` atoms.
pub fn random_atomic<R: Rng>(rng: &mut R, atoms: usize, lo: f64, hi: f64, order: usize) -> ScalarDist {
    let points: Vec<(f64, f64)> = (0..atoms)
        .map(|_| (rng.random_range(lo..hi), rng.random_range(0.1..1.0)))
        .collect();
    ScalarDist::atomic(&points, order).expect("positive weights")
}

/// A random pair of measures with means bounded away from zero.
pub fn random_pair<R: Rng>(rng: &mut R, order: usize) -> ScalarPair {
    let mu = random_atomic(rng, 3, 0.5, 1.5, order);
    let nu = random_atomic(rng, 3, 0.5, 1.5, order);
    ScalarPair { mu, nu }
}
