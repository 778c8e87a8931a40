//! Truncated B-valued distributions, operator models and standard families.

use crate::alg::{self, Inclusion, LinearMap, Mat, C64};
use crate::error::{Error, Result};
use crate::guard;
use crate::multimap::MultiMap;
use crate::series::{solve_triangular, NCSeries, Shape};
use crate::transforms;

pub const MODEL_TOL: f64 = 1e-10;
pub const POSITIVITY_SLACK: f64 = 1e-8;

/// Moment data `m_k(b_1..b_{k-1}) = μ(X b_1 X ⋯ b_{k-1} X)` for `k = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct OVDistribution {
    inclusion: Inclusion,
    moments: Vec<MultiMap>,
    /// Set for distributions obtained by formal operations (e.g. fractional free powers)
    /// whose positivity is not certified.
    pub formal: bool,
}

impl OVDistribution {
    /// `moments[j]` is `m_{j+1}` and must have arity `j`.
    pub fn new(inclusion: Inclusion, moments: Vec<MultiMap>) -> Result<Self> {
        inclusion.validate()?;
        if moments.is_empty() {
            return Err(Error::Dimension("a distribution needs at least its mean".into()));
        }
        guard::check_shape(inclusion.d_b, inclusion.d_d, moments.len())?;
        for (j, m) in moments.iter().enumerate() {
            if m.arity() != j || m.d_src() != inclusion.d_b || m.d_tgt() != inclusion.d_d {
                return Err(Error::Dimension(format!(
                    "moment m_{} has arity {} and dims ({}, {}), expected ({j}, {}, {})",
                    j + 1,
                    m.arity(),
                    m.d_src(),
                    m.d_tgt(),
                    inclusion.d_b,
                    inclusion.d_d
                )));
            }
        }
        Ok(OVDistribution {
            inclusion,
            moments,
            formal: false,
        })
    }

    pub(crate) fn from_parts(inclusion: Inclusion, moments: Vec<MultiMap>) -> Self {
        OVDistribution {
            inclusion,
            moments,
            formal: false,
        }
    }

    pub fn inclusion(&self) -> &Inclusion {
        &self.inclusion
    }

    pub fn order(&self) -> usize {
        self.moments.len()
    }

    pub fn d_b(&self) -> usize {
        self.inclusion.d_b
    }

    pub fn d_d(&self) -> usize {
        self.inclusion.d_d
    }

    pub fn mean(&self) -> Mat {
        self.moments[0].block_mat(0)
    }

    /// `m_k`, `1 ≤ k ≤ N`.
    pub fn moment(&self, k: usize) -> &MultiMap {
        &self.moments[k - 1]
    }

    pub fn moments(&self) -> &[MultiMap] {
        &self.moments
    }

    /// `μ(X^k)`: the k-th moment evaluated at `b_i = 1`.
    pub fn scalar_moment(&self, k: usize) -> Mat {
        let args = vec![alg::eye(self.d_b()); k - 1];
        self.moment(k).eval(&args)
    }

    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order == 0 || order > self.order() {
            return Err(Error::Dimension(format!(
                "cannot truncate order {} to {order}",
                self.order()
            )));
        }
        let mut out = self.clone();
        out.moments.truncate(order);
        Ok(out)
    }

    /// Largest violation of `m_k(b_1..)* = m_k(..b_1*)` and of selfadjointness of the mean.
    pub fn hermitian_residual(&self) -> f64 {
        self.moments
            .iter()
            .fold(0.0, |m, t| m.max(t.hermitian_residual()))
    }

    /// The distribution of `λX`.
    pub fn dilate(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        for (j, m) in out.moments.iter_mut().enumerate() {
            *m = m.scale(C64::new(lambda.powi(j as i32 + 1), 0.0));
        }
        out
    }

    /// Compose a B-valued distribution with ι (the distribution `ι∘μ` over `(B, D)`).
    pub fn embed(&self, inc: &Inclusion) -> Result<Self> {
        if !self.inclusion.is_identity() || inc.d_b != self.d_b() {
            return Err(Error::Type("only B-valued distributions can be embedded".into()));
        }
        inc.validate()?;
        guard::check_shape(inc.d_b, inc.d_d, self.order())?;
        let mut out = Self::from_parts(*inc, self.moments.iter().map(|m| m.embed(inc)).collect());
        out.formal = self.formal;
        Ok(out)
    }

    pub fn require_b_valued(&self, what: &str) -> Result<()> {
        if self.inclusion.is_identity() {
            Ok(())
        } else {
            Err(Error::Type(format!("{what} requires a B-valued distribution (D = B)")))
        }
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.inclusion != other.inclusion {
            return Err(Error::Dimension(format!(
                "inclusions differ: {:?} vs {:?}",
                self.inclusion, other.inclusion
            )));
        }
        if self.order() != other.order() {
            return Err(Error::Dimension(format!(
                "orders differ: {} vs {}",
                self.order(),
                other.order()
            )));
        }
        Ok(())
    }

    /// Max over unit tuples of the block norm difference, one entry per order `k = 1..=N`.
    pub fn moment_distance(&self, other: &Self) -> Result<Vec<f64>> {
        self.check_compatible(other)?;
        Ok(self
            .moments
            .iter()
            .zip(&other.moments)
            .map(|(a, b)| tensor_distance(a, b))
            .collect())
    }

    /// Largest block norm of `m_k` over unit tuples.
    pub fn moment_norms(&self) -> Vec<f64> {
        self.moments
            .iter()
            .map(|m| tensor_distance(m, &MultiMap::zeros(m.arity(), m.d_src(), m.d_tgt())))
            .collect()
    }

    /// The truncated form of the exponential bound `‖m_k‖ ≤ M^k`.
    pub fn satisfies_bound(&self, bound: f64) -> bool {
        self.moment_norms()
            .iter()
            .enumerate()
            .all(|(j, &n)| n <= bound.powi(j as i32 + 1) * (1.0 + 1e-9))
    }
}

fn tensor_distance(a: &MultiMap, b: &MultiMap) -> f64 {
    let diff = a.sub(b);
    if diff.d_tgt() == 1 {
        return diff.max_abs();
    }
    (0..diff.num_tuples()).fold(0.0, |m, i| m.max(alg::op_norm(&diff.block_mat(i))))
}

pub fn moment_distance(x: &OVDistribution, y: &OVDistribution) -> Result<Vec<f64>> {
    x.moment_distance(y)
}

/// A pair `(μ, ν)` with `μ` over `(B, D)` and `ν` over `(B, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistPair {
    pub mu: OVDistribution,
    pub nu: OVDistribution,
}

impl DistPair {
    pub fn new(mu: OVDistribution, nu: OVDistribution) -> Result<Self> {
        nu.require_b_valued("the second coordinate of a pair")?;
        if mu.d_b() != nu.d_b() {
            return Err(Error::Dimension("pair coordinates have different B".into()));
        }
        if mu.order() != nu.order() {
            return Err(Error::Dimension("pair coordinates have different orders".into()));
        }
        Ok(DistPair { mu, nu })
    }

    /// `(ι∘μ, μ)`: the pair of a B-valued distribution, for which c-free reduces to free.
    pub fn diagonal(mu: &OVDistribution) -> Result<Self> {
        Self::new(mu.clone(), mu.clone())
    }

    pub fn order(&self) -> usize {
        self.mu.order()
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        self.mu.check_compatible(&other.mu)?;
        self.nu.check_compatible(&other.nu)
    }

    pub fn distance(&self, other: &Self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.mu.moment_distance(&other.mu)?, self.nu.moment_distance(&other.nu)?))
    }
}

/// Which functional of an operator model to read moments from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// The conditional expectation `E_B`, giving a distribution over `(B, B)`.
    Expectation,
    /// The map `θ`, giving a distribution over `(B, D)`.
    Theta,
}

/// A finite-dimensional realization: `X ∈ M_m` selfadjoint, `ι_A(b) = 1_r ⊗ b`,
/// `E_B: M_m → B` and `θ: M_m → D`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorModel {
    pub m: usize,
    pub x: Mat,
    pub e_b: LinearMap,
    pub theta: LinearMap,
    pub iota_a: Inclusion,
    pub inclusion: Inclusion,
}

/// `a ↦ Σ_{ij} ρ_{ji} a_{[ij]}` on `M_r ⊗ M_d`: a B-bimodule map from a density `ρ`.
pub fn state_expectation(rho: &Mat, d: usize) -> Result<LinearMap> {
    let r = rho.nrows();
    let (vals, vecs) = alg::hermitian_eigen(rho);
    let mut kraus = Vec::new();
    for (l, &lam) in vals.iter().enumerate() {
        if lam < -MODEL_TOL {
            return Err(Error::Model(format!("density has negative eigenvalue {lam:.3e}")));
        }
        if lam <= 0.0 {
            continue;
        }
        let v = vecs.column(l).map(|z| z.conj() * lam.sqrt());
        let vmat = Mat::from_fn(r, 1, |i, _| v[i]);
        kraus.push(alg::kron(&vmat, &alg::eye(d)));
    }
    LinearMap::from_kraus(r * d, d, &kraus)
}

/// `θ = Σ (V_l ⊗ 1_d)^* (·) (V_l ⊗ 1_d)` with `V_l: r × s`; a B-bimodule map into `M_s ⊗ M_d`.
pub fn kraus_amplified(kraus: &[Mat], d: usize) -> Result<LinearMap> {
    let (r, s) = kraus
        .first()
        .map(|k| k.shape())
        .ok_or_else(|| Error::Model("empty Kraus family".into()))?;
    let lifted: Vec<Mat> = kraus.iter().map(|k| alg::kron(k, &alg::eye(d))).collect();
    LinearMap::from_kraus(r * d, s * d, &lifted)
}

impl OperatorModel {
    pub fn new(x: Mat, e_b: LinearMap, theta: LinearMap, d_b: usize) -> Result<Self> {
        let m = x.nrows();
        if !alg::is_square(&x) || m % d_b != 0 {
            return Err(Error::Model(format!(
                "X must be square with size divisible by d_B = {d_b}"
            )));
        }
        if e_b.d_in != m || e_b.d_out != d_b {
            return Err(Error::Model("E_B must map M_m to M_{d_B}".into()));
        }
        if theta.d_in != m || theta.d_out % d_b != 0 {
            return Err(Error::Model("θ must map M_m to M_{r·d_B}".into()));
        }
        let model = OperatorModel {
            m,
            x,
            e_b,
            iota_a: Inclusion::amplify(d_b, m / d_b),
            inclusion: Inclusion::amplify(d_b, theta.d_out / d_b),
            theta,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn d_b(&self) -> usize {
        self.inclusion.d_b
    }

    pub fn validate(&self) -> Result<()> {
        if !alg::is_selfadjoint(&self.x, MODEL_TOL) {
            return Err(Error::Model("X is not selfadjoint".into()));
        }
        for (name, map, inc) in [
            ("E_B", &self.e_b, Inclusion::identity(self.d_b())),
            ("θ", &self.theta, self.inclusion),
        ] {
            let unital = map.unital_residual();
            if unital > MODEL_TOL {
                return Err(Error::Model(format!("{name} is not unital (residual {unital:.3e})")));
            }
            let cp = map.cp_min_eigenvalue();
            if cp < -MODEL_TOL {
                return Err(Error::Model(format!(
                    "{name} is not completely positive (Choi eigenvalue {cp:.3e})"
                )));
            }
            let bim = self.bimodule_residual(map, &inc);
            if bim > MODEL_TOL {
                return Err(Error::Model(format!(
                    "{name} is not a B-bimodule map (residual {bim:.3e})"
                )));
            }
        }
        Ok(())
    }

    fn bimodule_residual(&self, map: &LinearMap, inc: &Inclusion) -> f64 {
        let d = self.d_b();
        let mut res: f64 = 0.0;
        // a spread of matrix units of M_m keeps this cheap for large ambient algebras
        let total = self.m * self.m;
        let stride = (total / 37).max(1);
        for a_idx in (0..total).step_by(stride) {
            let a = alg::unit(self.m, a_idx);
            let fa = map.apply(&a);
            for u in 0..d * d {
                let b1 = alg::unit(d, u);
                for v in 0..d * d {
                    let b2 = alg::unit(d, v);
                    let lhs = map.apply(&(self.iota_a.apply(&b1) * &a * self.iota_a.apply(&b2)));
                    let rhs = inc.apply(&b1) * &fa * inc.apply(&b2);
                    res = res.max(alg::max_diff(&lhs, &rhs));
                }
            }
        }
        res
    }

    pub fn map(&self, which: Functional) -> &LinearMap {
        match which {
            Functional::Expectation => &self.e_b,
            Functional::Theta => &self.theta,
        }
    }

    pub fn target_inclusion(&self, which: Functional) -> Inclusion {
        match which {
            Functional::Expectation => Inclusion::identity(self.d_b()),
            Functional::Theta => self.inclusion,
        }
    }

    pub fn x_norm(&self) -> f64 {
        alg::op_norm(&self.x)
    }

    /// Replace θ, keeping X and E_B.
    pub fn with_theta(&self, theta: LinearMap) -> Result<Self> {
        Self::new(self.x.clone(), self.e_b.clone(), theta, self.d_b())
    }

    /// `X = ι_A(β)`: the point mass at a selfadjoint `β`.
    pub fn point_mass(beta: &Mat) -> Result<Self> {
        let d = beta.nrows();
        Self::new(beta.clone(), LinearMap::identity(d), LinearMap::identity(d), d)
    }

    /// `X = σ_x ⊗ 1_d` with `E_B = tr_2 ⊗ id`: the symmetric Bernoulli law.
    pub fn rademacher(d: usize) -> Result<Self> {
        let sx = alg::from_real(2, &[0.0, 1.0, 1.0, 0.0]);
        let x = alg::kron(&sx, &alg::eye(d));
        let e = state_expectation(&alg::scalar(2, C64::new(0.5, 0.0)), d)?;
        Self::new(x, e.clone(), e, d)
    }

    /// `X = J_K ⊗ h` with `J_K` the free Jacobi matrix and `E_B` the `e_1` vector state;
    /// moments agree with the B-valued semicircle of variance `η(b) = h b h` up to order `2K−1`.
    pub fn semicircle(h: &Mat, k: usize) -> Result<Self> {
        let d = h.nrows();
        let j = Mat::from_fn(k, k, |a, b| {
            if a.abs_diff(b) == 1 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let x = alg::kron(&j, h);
        let mut rho = alg::zeros(k);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        let e = state_expectation(&rho, d)?;
        Self::new(x, e.clone(), e, d)
    }

    /// The 2x2 semicircle model used by the subordination suites: `h = diag(1, 2)/4`.
    pub fn semicircle_d2() -> Result<Self> {
        Self::semicircle(&alg::from_real(2, &[0.25, 0.0, 0.0, 0.5]), 16)
    }

    pub fn moments(&self, which: Functional, order: usize) -> Result<OVDistribution> {
        moments_from_model(self, which, order)
    }

    pub fn pair(&self, order: usize) -> Result<DistPair> {
        DistPair::new(
            self.moments(Functional::Theta, order)?,
            self.moments(Functional::Expectation, order)?,
        )
    }
}

/// Moments `m_k(E_{u_1}..) = map(X ι_A(E_{u_1}) X ⋯ X)` by direct matrix products.
pub fn moments_from_model(
    model: &OperatorModel,
    which: Functional,
    order: usize,
) -> Result<OVDistribution> {
    model.validate()?;
    let inc = model.target_inclusion(which);
    guard::check_shape(inc.d_b, inc.d_d, order)?;
    let map = model.map(which);
    let d = model.d_b();
    let nb = d * d;
    let spaced: Vec<Mat> = (0..nb)
        .map(|u| model.iota_a.apply(&alg::unit(d, u)) * &model.x)
        .collect();
    let mut words = vec![model.x.clone()];
    let mut moments = Vec::with_capacity(order);
    for k in 1..=order {
        if k > 1 {
            let mut next = Vec::with_capacity(words.len() * nb);
            for w in &words {
                for s in &spaced {
                    next.push(w * s);
                }
            }
            words = next;
        }
        let mut data = Vec::with_capacity(words.len() * inc.d_d * inc.d_d);
        for w in &words {
            data.extend(alg::to_row_major(&map.apply(w)));
        }
        moments.push(MultiMap::from_raw(k - 1, d, inc.d_d, data));
    }
    Ok(OVDistribution::from_parts(inc, moments))
}

/// Built-in families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    PointMass(Mat),
    Rademacher,
    /// Semicircle with covariance map `η`, which must be completely positive.
    OvSemicircle(LinearMap),
    ScalarArcsine,
    ScalarFreePoisson(f64),
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `m_k(b_1..b_{k−1}) = c_k · b_1⋯b_{k−1}`: the law of `x ⊗ 1` for a scalar variable `x`.
pub fn scalar_type(d: usize, scalar_moments: &[f64]) -> Result<OVDistribution> {
    let inc = Inclusion::identity(d);
    guard::check_shape(d, d, scalar_moments.len())?;
    let id = MultiMap::identity(d);
    let mut prod = MultiMap::constant(d, &alg::eye(d));
    let mut moments = Vec::with_capacity(scalar_moments.len());
    for (j, &ck) in scalar_moments.iter().enumerate() {
        if j > 0 {
            prod = prod.concat_mul(&id);
        }
        moments.push(prod.scale(C64::new(ck, 0.0)));
    }
    OVDistribution::new(inc, moments)
}

pub fn make_standard(family: &Family, inclusion: &Inclusion, order: usize) -> Result<OVDistribution> {
    inclusion.validate()?;
    let d = inclusion.d_b;
    let base = match family {
        Family::PointMass(beta) => {
            if beta.nrows() != d || !alg::is_selfadjoint(beta, MODEL_TOL) {
                return Err(Error::Dimension(
                    "point mass needs a selfadjoint element of B".into(),
                ));
            }
            guard::check_shape(d, d, order)?;
            let id = MultiMap::identity(d);
            let bm = MultiMap::constant(d, beta);
            let mut cur = bm.clone();
            let mut moments = vec![cur.clone()];
            for _ in 1..order {
                cur = cur.concat_mul(&id).concat_mul(&bm);
                moments.push(cur.clone());
            }
            OVDistribution::new(Inclusion::identity(d), moments)?
        }
        Family::Rademacher => {
            let c: Vec<f64> = (1..=order).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect();
            scalar_type(d, &c)?
        }
        Family::ScalarArcsine => {
            let c: Vec<f64> = (1..=order)
                .map(|k| if k % 2 == 0 { binomial(k as u64, k as u64 / 2) } else { 0.0 })
                .collect();
            scalar_type(d, &c)?
        }
        Family::ScalarFreePoisson(lambda) => {
            let c: Vec<f64> = (1..=order as u64)
                .map(|k| {
                    (1..=k)
                        .map(|j| binomial(k, j) * binomial(k, j - 1) / k as f64 * lambda.powi(j as i32))
                        .sum()
                })
                .collect();
            scalar_type(d, &c)?
        }
        Family::OvSemicircle(eta) => {
            if eta.d_in != d || eta.d_out != d {
                return Err(Error::Dimension("η must map B to B".into()));
            }
            let cp = eta.cp_min_eigenvalue();
            if cp < -MODEL_TOL {
                return Err(Error::Positivity(format!(
                    "η is not completely positive (Choi eigenvalue {cp:.3e})"
                )));
            }
            let inc = Inclusion::identity(d);
            let mut r = NCSeries::zero(inc, order)?;
            if order >= 2 {
                let c2 = MultiMap::from_linear_map(eta).concat_mul(&MultiMap::identity(d));
                r.set_coeff(2, c2)?;
            }
            let m = solve_triangular(Shape::RForward, &[&r])?;
            transforms::moments_from_m_series(&m)?
        }
    };
    if inclusion.is_identity() {
        Ok(base)
    } else {
        base.embed(inclusion)
    }
}

/// `b ↦ a* b a`.
pub fn conjugation_map(a: &Mat) -> LinearMap {
    LinearMap::from_fn(a.nrows(), a.nrows(), |b| a.adjoint() * b * a)
}

/// Outcome of a block-matrix positivity test.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub cutoff: usize,
    pub size: usize,
    pub min_eigenvalue: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Spacer {
    One,
    Unit(usize),
}

enum Token {
    X,
    B(Spacer),
}

fn unit_product(d: usize, a: Spacer, b: Spacer) -> Option<Spacer> {
    match (a, b) {
        (Spacer::One, s) | (s, Spacer::One) => Some(s),
        (Spacer::Unit(u), Spacer::Unit(v)) => {
            let (p, q) = (u / d, u % d);
            let (p2, q2) = (v / d, v % d);
            (q == p2).then_some(Spacer::Unit(p * d + q2))
        }
    }
}

fn unit_adjoint(d: usize, s: Spacer) -> Spacer {
    match s {
        Spacer::One => Spacer::One,
        Spacer::Unit(u) => Spacer::Unit((u % d) * d + u / d),
    }
}

/// `f^* g` normalized to `c_0 X c_1 ⋯ X c_L`; `None` if a unit product vanishes.
fn normalize_word(d: usize, f: &[Token], g: &[Token]) -> Option<Vec<Spacer>> {
    let mut tokens: Vec<&Token> = Vec::new();
    let fstar: Vec<Token> = f
        .iter()
        .rev()
        .map(|t| match t {
            Token::X => Token::X,
            Token::B(s) => Token::B(unit_adjoint(d, *s)),
        })
        .collect();
    tokens.extend(fstar.iter());
    tokens.extend(g.iter());
    let mut spacers = vec![Spacer::One];
    for t in tokens {
        match t {
            Token::X => spacers.push(Spacer::One),
            Token::B(s) => {
                let last = spacers.last_mut().unwrap();
                *last = unit_product(d, *last, *s)?;
            }
        }
    }
    Some(spacers)
}

/// Value of a multilinear map on spacer arguments, expanding `1 = Σ_p E_pp`.
pub(crate) fn value_on_spacers(map: &MultiMap, d: usize, spacers: &[Spacer]) -> Mat {
    fn rec(map: &MultiMap, d: usize, spacers: &[Spacer], tuple: &mut Vec<usize>, acc: &mut Mat) {
        match spacers.first() {
            None => *acc += map.at(tuple),
            Some(Spacer::Unit(u)) => {
                tuple.push(*u);
                rec(map, d, &spacers[1..], tuple, acc);
                tuple.pop();
            }
            Some(Spacer::One) => {
                for p in 0..d {
                    tuple.push(p * d + p);
                    rec(map, d, &spacers[1..], tuple, acc);
                    tuple.pop();
                }
            }
        }
    }
    let mut acc = alg::zeros(map.d_tgt());
    rec(map, d, spacers, &mut Vec::with_capacity(spacers.len()), &mut acc);
    acc
}

fn spacer_mat(inc: &Inclusion, s: Spacer) -> Mat {
    match s {
        Spacer::One => alg::eye(inc.d_d),
        Spacer::Unit(u) => inc.apply(&alg::unit(inc.d_b, u)),
    }
}

/// The family `{1} ∪ {E_{a_0} X E_{a_1} ⋯ E_{a_{r−1}} X : 1 ≤ r ≤ cutoff}`.
fn word_family(d: usize, cutoff: usize) -> Vec<Vec<Token>> {
    let nb = d * d;
    let mut out: Vec<Vec<Token>> = vec![vec![]];
    let mut level: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..cutoff {
        let mut next = Vec::new();
        for w in &level {
            for u in 0..nb {
                let mut v = w.clone();
                v.push(u);
                next.push(v);
            }
        }
        for w in &next {
            let mut toks = Vec::new();
            for &u in w {
                toks.push(Token::B(Spacer::Unit(u)));
                toks.push(Token::X);
            }
            out.push(toks);
        }
        level = next;
    }
    out
}

fn block_psd_report(
    family: &[Vec<Token>],
    d_b: usize,
    d_out: usize,
    cutoff: usize,
    value: impl Fn(&[Spacer]) -> Mat,
) -> PositivityReport {
    let n = family.len();
    let mut big = alg::zeros(n * d_out);
    for i in 0..n {
        for j in 0..n {
            if let Some(sp) = normalize_word(d_b, &family[i], &family[j]) {
                alg::set_block(&mut big, d_out, i, j, &value(&sp));
            }
        }
    }
    let min_eigenvalue = alg::least_eigenvalue(&big);
    PositivityReport {
        cutoff,
        size: n * d_out,
        min_eigenvalue,
        pass: min_eigenvalue >= -POSITIVITY_SLACK,
    }
}

/// Least eigenvalue of the block matrix `[μ(f_i^* f_j)]` over the word family of degree ≤ cutoff.
pub fn check_moment_positivity(dist: &OVDistribution, cutoff: usize) -> Result<PositivityReport> {
    if 2 * cutoff > dist.order() {
        return Err(Error::Precondition(format!(
            "cutoff {cutoff} needs order ≥ {}, have {}",
            2 * cutoff,
            dist.order()
        )));
    }
    let inc = *dist.inclusion();
    let d = inc.d_b;
    let family = word_family(d, cutoff);
    Ok(block_psd_report(&family, d, inc.d_d, cutoff, |sp| {
        let l = sp.len() - 1;
        if l == 0 {
            return spacer_mat(&inc, sp[0]);
        }
        let inner = value_on_spacers(dist.moment(l), d, &sp[1..l]);
        spacer_mat(&inc, sp[0]) * inner * spacer_mat(&inc, sp[l])
    }))
}

/// Same test for a linear map `σ` on `B⟨X⟩` given by `sigma[k−1] = σ(b_1 X ⋯ X b_k)`.
pub(crate) fn check_sigma_positivity(
    sigma: &[MultiMap],
    inc: &Inclusion,
    cutoff: usize,
) -> Result<PositivityReport> {
    if 2 * cutoff + 1 > sigma.len() {
        return Err(Error::Precondition(format!(
            "cutoff {cutoff} needs σ up to {} arguments, have {}",
            2 * cutoff + 1,
            sigma.len()
        )));
    }
    let d = inc.d_b;
    let family = word_family(d, cutoff);
    Ok(block_psd_report(&family, d, inc.d_d, cutoff, |sp| {
        value_on_spacers(&sigma[sp.len() - 1], d, sp)
    }))
}

/// The invalid fixture: `d = 1`, `m_2 = −1`, everything else zero.
pub fn invalid_fixture(order: usize) -> Result<OVDistribution> {
    let mut c = vec![0.0; order];
    if order >= 2 {
        c[1] = -1.0;
    }
    scalar_type(1, &c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alg::from_real;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rademacher_model_moments() {
        let model = OperatorModel::rademacher(1).unwrap();
        let dist = model.moments(Functional::Expectation, 6).unwrap();
        let vals: Vec<f64> = (1..=6).map(|k| dist.scalar_moment(k)[(0, 0)].re).collect();
        for (v, e) in vals.iter().zip([0.0, 1.0, 0.0, 1.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-14);
        }
        let fam = make_standard(&Family::Rademacher, &Inclusion::identity(1), 6).unwrap();
        assert!(dist.moment_distance(&fam).unwrap().iter().all(|&x| x < 1e-14));
    }

    #[test]
    fn rademacher_model_matches_family_in_d2() {
        let model = OperatorModel::rademacher(2).unwrap();
        let dist = model.moments(Functional::Expectation, 5).unwrap();
        let fam = make_standard(&Family::Rademacher, &Inclusion::identity(2), 5).unwrap();
        let dists = dist.moment_distance(&fam).unwrap();
        assert!(dists.iter().all(|&x| x < 1e-15));
    }

    #[test]
    fn point_mass_model_and_family() {
        let beta = from_real(2, &[1.0, 0.5, 0.5, -1.0]);
        let model = OperatorModel::point_mass(&beta).unwrap();
        let dist = model.moments(Functional::Expectation, 4).unwrap();
        let fam = make_standard(&Family::PointMass(beta.clone()), &Inclusion::identity(2), 4).unwrap();
        assert!(dist.moment_distance(&fam).unwrap().iter().all(|&x| x < 1e-14));
        let b1 = from_real(2, &[0.0, 1.0, 2.0, 3.0]);
        let b2 = from_real(2, &[1.0, 0.0, -1.0, 1.0]);
        let m3 = fam.moment(3).eval(&[b1.clone(), b2.clone()]);
        assert!(alg::max_diff(&m3, &(&beta * &b1 * &beta * &b2 * &beta)) < 1e-14);
    }

    #[test]
    fn order_one_is_the_mean() {
        let model = OperatorModel::semicircle_d2().unwrap();
        let dist = model.moments(Functional::Expectation, 1).unwrap();
        assert_eq!(dist.order(), 1);
        assert!(alg::max_abs(&dist.mean()) < 1e-15);
    }

    #[test]
    fn scalar_semicircle_is_catalan() {
        let eta = LinearMap::identity(1);
        let s = make_standard(&Family::OvSemicircle(eta), &Inclusion::identity(1), 6).unwrap();
        let vals: Vec<f64> = (1..=6).map(|k| s.scalar_moment(k)[(0, 0)].re).collect();
        for (v, e) in vals.iter().zip([0.0, 1.0, 0.0, 2.0, 0.0, 5.0]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn arcsine_and_free_poisson_moments() {
        let a = make_standard(&Family::ScalarArcsine, &Inclusion::identity(1), 6).unwrap();
        let vals: Vec<f64> = (1..=6).map(|k| a.scalar_moment(k)[(0, 0)].re).collect();
        assert_eq!(vals, vec![0.0, 2.0, 0.0, 6.0, 0.0, 20.0]);
        let p = make_standard(&Family::ScalarFreePoisson(1.0), &Inclusion::identity(1), 4).unwrap();
        let vals: Vec<f64> = (1..=4).map(|k| p.scalar_moment(k)[(0, 0)].re).collect();
        for (v, e) in vals.iter().zip([1.0, 2.0, 5.0, 14.0]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_cp_eta_is_rejected() {
        let transpose = LinearMap::from_fn(2, 2, |a| a.transpose());
        assert!(matches!(
            make_standard(&Family::OvSemicircle(transpose), &Inclusion::identity(2), 4),
            Err(Error::Positivity(_))
        ));
    }

    #[test]
    fn positivity_of_families_and_invalid_fixture() {
        let inc = Inclusion::identity(2);
        let beta = from_real(2, &[1.0, 0.3, 0.3, -0.5]);
        for fam in [Family::PointMass(beta), Family::Rademacher] {
            let d = make_standard(&fam, &inc, 6).unwrap();
            let rep = check_moment_positivity(&d, 3).unwrap();
            assert!(rep.pass, "{fam:?}: {}", rep.min_eigenvalue);
        }
        let bad = invalid_fixture(6).unwrap();
        let rep = check_moment_positivity(&bad, 3).unwrap();
        assert!(!rep.pass);
        assert_abs_diff_eq!(rep.min_eigenvalue, -1.0, epsilon = 1e-9);
        assert!(matches!(check_moment_positivity(&bad, 4), Err(Error::Precondition(_))));
    }

    #[test]
    fn moment_distance_examples() {
        let inc = Inclusion::identity(1);
        let zero = make_standard(&Family::PointMass(alg::zeros(1)), &inc, 4).unwrap();
        let rad = make_standard(&Family::Rademacher, &inc, 4).unwrap();
        assert_eq!(rad.moment_distance(&rad).unwrap(), vec![0.0; 4]);
        assert_eq!(zero.moment_distance(&rad).unwrap()[1], 1.0);
        let short = rad.truncate(3).unwrap();
        assert!(matches!(short.moment_distance(&rad), Err(Error::Dimension(_))));
    }

    #[test]
    fn invalid_models_are_rejected() {
        let x = from_real(2, &[0.0, 1.0, 0.0, 0.0]);
        let e = LinearMap::identity(2);
        assert!(matches!(
            OperatorModel::new(x, e.clone(), e, 2),
            Err(Error::Model(_))
        ));
        let half = LinearMap::from_fn(1, 1, |a| a * C64::new(0.5, 0.0));
        assert!(matches!(
            OperatorModel::new(alg::eye(1), half.clone(), half, 1),
            Err(Error::Model(_))
        ));
    }
}
