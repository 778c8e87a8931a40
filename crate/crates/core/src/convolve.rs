//! Convolutions through linearizing transforms, convolution powers, the Bercovici-Pata map
//! and triangular-array limit harnesses.

use crate::alg::{self, Inclusion, Mat, C64};
use crate::distribution::{make_standard, DistPair, Family, OVDistribution, PositivityReport};
use crate::error::{Error, Result};
use crate::multimap::MultiMap;
use crate::oracle::Kind;
use crate::series::NCSeries;
use crate::transforms::{
    b_series, cr_series, extract_generating_pair, m_series, moments_from_transform,
    pair_first_from_cr, r_series, TransformKind,
};

/// Largest row length a limit harness may request.
pub const MAX_ROW_LENGTH: usize = 1 << 10;

fn sum_transform(kind: TransformKind, x: &OVDistribution, y: &OVDistribution) -> Result<OVDistribution> {
    x.check_compatible(y)?;
    let (tx, ty) = match kind {
        TransformKind::R => (r_series(x)?, r_series(y)?),
        _ => (b_series(x)?, b_series(y)?),
    };
    moments_from_transform(kind, &tx.add(&ty)?)
}

/// `x ⊞ y` by adding R-transforms; needs `D = B`.
pub fn free(x: &OVDistribution, y: &OVDistribution) -> Result<OVDistribution> {
    sum_transform(TransformKind::R, x, y)
}

/// `x ⊎ y` by adding B-transforms.
pub fn boolean(x: &OVDistribution, y: &OVDistribution) -> Result<OVDistribution> {
    sum_transform(TransformKind::B, x, y)
}

/// `x ⊞_c y`: second coordinate by R-addition, first by ᶜR-addition.
pub fn cfree(x: &DistPair, y: &DistPair) -> Result<DistPair> {
    x.check_compatible(y)?;
    let nu = free(&x.nu, &y.nu)?;
    let cr = cr_series(x)?.add(&cr_series(y)?)?;
    DistPair::new(pair_first_from_cr(&cr, &nu)?, nu)
}

/// Free or Boolean convolution of single distributions.
pub fn convolve(kind: Kind, x: &OVDistribution, y: &OVDistribution) -> Result<OVDistribution> {
    match kind {
        Kind::Free => free(x, y),
        Kind::Boolean => boolean(x, y),
        Kind::CFree => Err(Error::Usage(
            "c-free convolution acts on pairs (μ, ν)".into(),
        )),
    }
}

/// Convolution of pairs: Boolean acts coordinatewise, free needs `μ = ν`-shaped input.
pub fn convolve_pairs(kind: Kind, x: &DistPair, y: &DistPair) -> Result<DistPair> {
    match kind {
        Kind::CFree => cfree(x, y),
        Kind::Boolean => DistPair::new(boolean(&x.mu, &y.mu)?, boolean(&x.nu, &y.nu)?),
        Kind::Free => DistPair::new(free(&x.mu, &y.mu)?, free(&x.nu, &y.nu)?),
    }
}

fn is_integer(t: f64) -> bool {
    (t - t.round()).abs() < 1e-12
}

/// `x^{⊞t}` or `x^{⊎t}` by scaling the linearizing transform.
pub fn power(kind: Kind, x: &OVDistribution, t: f64) -> Result<OVDistribution> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("convolution powers need t >= 0, got {t}")));
    }
    let mut out = match kind {
        Kind::Free => moments_from_transform(TransformKind::R, &r_series(x)?.scale(t))?,
        Kind::Boolean => moments_from_transform(TransformKind::B, &b_series(x)?.scale(t))?,
        Kind::CFree => {
            return Err(Error::Usage("use pair_power for c-free powers".into()));
        }
    };
    out.formal = x.formal || (kind == Kind::Free && !is_integer(t));
    Ok(out)
}

/// `(μ, ν)^{⊞_c t}` or `(μ, ν)^{⊎t}`.
pub fn pair_power(kind: Kind, x: &DistPair, t: f64) -> Result<DistPair> {
    match kind {
        Kind::Boolean => DistPair::new(power(kind, &x.mu, t)?, power(kind, &x.nu, t)?),
        Kind::Free => DistPair::new(power(kind, &x.mu, t)?, power(kind, &x.nu, t)?),
        Kind::CFree => {
            let nu = power(Kind::Free, &x.nu, t)?;
            let mut mu = pair_first_from_cr(&cr_series(x)?.scale(t), &nu)?;
            mu.formal = nu.formal;
            DistPair::new(mu, nu)
        }
    }
}

/// Boolean-to-free BP: the distribution whose R-transform is `B_x`.
pub fn bp_map(x: &OVDistribution) -> Result<OVDistribution> {
    x.require_b_valued("the Boolean-to-free bijection")?;
    moments_from_transform(TransformKind::R, &b_series(x)?)
}

/// Boolean-to-c-free BP: `ᶜR_{μ′,ν′} = B_μ` and `R_{ν′} = B_ν`.
pub fn bp_map_pair(x: &DistPair) -> Result<DistPair> {
    let nu = bp_map(&x.nu)?;
    let mu = pair_first_from_cr(&b_series(&x.mu)?, &nu)?;
    DistPair::new(mu, nu)
}

/// Series residual of `F_ρ(b) = ½(b + F_ν(F_ρ(b)))` for `ρ = BP(ν)`, read at `b^{-1}`:
/// `(2M_ρ^{-1} − 1) − (1 − B_ν(b M_ρ(b))) M_ρ^{-1}`.
pub fn verify_bbp_identity(nu: &OVDistribution) -> Result<f64> {
    let rho = bp_map(nu)?;
    let inc = *nu.inclusion();
    let n = nu.order();
    let m_rho = m_series(&rho);
    let m_inv = m_rho.reciprocal()?;
    let one = NCSeries::one(inc, n)?;
    let w = NCSeries::variable(inc, n)?.mul(&m_rho)?;
    let b_comp = b_series(nu)?.compose(&w)?;
    let lhs = m_inv.scale(2.0).sub(&one)?;
    let rhs = one.sub(&b_comp)?.mul(&m_inv)?;
    Ok(lhs.max_diff(&rhs))
}

/// Series residual of `h_{μ′}(b) = h_μ(F_{BP(ν)}(b))` for `μ′` the first coordinate of
/// `BP(μ, ν)`, read at `b^{-1}`: `B_{μ′}(b) − B_μ(b M_ρ(b))·ι(M_ρ(b))^{-1}` with `ρ = BP(ν)`.
pub fn verify_cfree_bbp_identity(pair: &DistPair) -> Result<f64> {
    let image = bp_map_pair(pair)?;
    let rho = &image.nu;
    let inc = *pair.mu.inclusion();
    let base = inc.base();
    let n = pair.order();
    let m_rho = m_series(rho);
    let w = NCSeries::variable(base, n)?.mul(&m_rho)?;
    let rhs = b_series(&pair.mu)?
        .compose(&w)?
        .mul(&m_rho.reciprocal()?.embed(&inc)?)?;
    let lhs = b_series(&image.mu)?;
    Ok(lhs.max_diff(&rhs))
}

/// Neville extrapolation of samples `(h_i, v_i)` to `h = 0`.
pub fn neville(hs: &[f64], vals: &[C64]) -> C64 {
    let mut p = vals.to_vec();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            let (hi, hj) = (hs[i], hs[i + m]);
            p[i] = (p[i + 1] * hi - p[i] * hj) / (hi - hj);
        }
    }
    p[0]
}

fn extrapolate_maps(hs: &[f64], maps: &[&MultiMap]) -> MultiMap {
    let first = maps[0];
    let len = first.data().len();
    let mut out = Vec::with_capacity(len);
    let mut column = vec![C64::new(0.0, 0.0); maps.len()];
    for e in 0..len {
        for (c, m) in column.iter_mut().zip(maps) {
            *c = m.data()[e];
        }
        out.push(neville(hs, &column));
    }
    MultiMap::from_raw(first.arity(), first.d_src(), first.d_tgt(), out)
}

/// Extrapolate a sequence of distributions sampled at `hs` to `h = 0`.
pub fn extrapolate(hs: &[f64], dists: &[&OVDistribution]) -> Result<OVDistribution> {
    let first = dists[0];
    for d in dists {
        first.check_compatible(d)?;
    }
    let moments = (1..=first.order())
        .map(|k| {
            let maps: Vec<&MultiMap> = dists.iter().map(|d| d.moment(k)).collect();
            extrapolate_maps(hs, &maps)
        })
        .collect();
    OVDistribution::new(*first.inclusion(), moments)
}

fn extrapolate_pairs(hs: &[f64], pairs: &[&DistPair]) -> Result<DistPair> {
    let mus: Vec<&OVDistribution> = pairs.iter().map(|p| &p.mu).collect();
    let nus: Vec<&OVDistribution> = pairs.iter().map(|p| &p.nu).collect();
    DistPair::new(extrapolate(hs, &mus)?, extrapolate(hs, &nus)?)
}

fn pair_distance(x: &DistPair, y: &DistPair) -> Result<Vec<f64>> {
    let (a, b) = x.distance(y)?;
    Ok(a.iter().zip(&b).map(|(u, v)| u.max(*v)).collect())
}

/// A triangular array with identically distributed rows: row `n` has `k_n` copies of
/// the pair produced by the generator.
pub struct ArraySpec {
    pub name: String,
    /// `Free` and `Boolean` mean single distributions (diagonal pairs), `CFree` genuine pairs.
    pub kind: Kind,
    /// Uniform bound `M` of the surrogate infinitesimality check.
    pub bound: f64,
    pub row_lengths: Vec<usize>,
    generator: Box<dyn Fn(usize) -> Result<DistPair> + Send + Sync>,
    /// Known limits `(Boolean, free or c-free)`, if any.
    pub targets: Option<(DistPair, DistPair)>,
}

impl std::fmt::Debug for ArraySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ArraySpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("bound", &self.bound)
            .field("row_lengths", &self.row_lengths)
            .finish()
    }
}

/// `k_n = n` sampled at `n = 1, 2, 4, …, n_max`.
pub fn doubling_lengths(n_max: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |k| Some(k * 2))
        .take_while(|&k| k <= n_max)
        .collect()
}

impl ArraySpec {
    pub fn new(
        name: &str,
        kind: Kind,
        bound: f64,
        row_lengths: Vec<usize>,
        generator: impl Fn(usize) -> Result<DistPair> + Send + Sync + 'static,
    ) -> Result<Self> {
        if row_lengths.len() < 2 || row_lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition(
                "row lengths must be strictly increasing with at least two rows".into(),
            ));
        }
        if row_lengths[0] == 0 {
            return Err(Error::Precondition("row lengths must be positive".into()));
        }
        if let Some(&k) = row_lengths.iter().find(|&&k| k > MAX_ROW_LENGTH) {
            return Err(Error::Resource(format!(
                "row length {k} exceeds the cap {MAX_ROW_LENGTH}"
            )));
        }
        Ok(ArraySpec {
            name: name.into(),
            kind,
            bound,
            row_lengths,
            generator: Box::new(generator),
            targets: None,
        })
    }

    pub fn with_targets(mut self, boolean: DistPair, free: DistPair) -> Self {
        self.targets = Some((boolean, free));
        self
    }

    pub fn row(&self, k: usize) -> Result<DistPair> {
        (self.generator)(k)
    }

    /// Free central limit array: rows of `k` copies of the Rademacher law dilated by `k^{-1/2}`.
    pub fn clt(d: usize, order: usize, n_max: usize) -> Result<Self> {
        let inc = Inclusion::identity(d);
        let rad = make_standard(&Family::Rademacher, &inc, order)?;
        let semi = make_standard(&Family::OvSemicircle(alg::LinearMap::identity(d)), &inc, order)?;
        let spec = ArraySpec::new("clt", Kind::Free, 2.0, doubling_lengths(n_max), move |k| {
            DistPair::diagonal(&rad.dilate(1.0 / (k as f64).sqrt()))
        })?;
        let rad = make_standard(&Family::Rademacher, &inc, order)?;
        Ok(spec.with_targets(DistPair::diagonal(&rad)?, DistPair::diagonal(&semi)?))
    }

    /// Degenerate array `point_mass(β / k)`: both limits are `point_mass(β)`.
    pub fn point_mass(beta: &Mat, order: usize, n_max: usize) -> Result<Self> {
        let d = beta.nrows();
        let inc = Inclusion::identity(d);
        let target = DistPair::diagonal(&make_standard(&Family::PointMass(beta.clone()), &inc, order)?)?;
        let b = beta.clone();
        let bound = 1.0 + alg::op_norm(beta);
        let spec = ArraySpec::new("point-mass", Kind::Free, bound, doubling_lengths(n_max), move |k| {
            let m = make_standard(&Family::PointMass(&b / C64::new(k as f64, 0.0)), &inc, order)?;
            DistPair::diagonal(&m)
        })?;
        Ok(spec.with_targets(target.clone(), target))
    }

    /// c-free central limit array: `μ_n` Rademacher and `ν_n` half-variance Rademacher,
    /// both dilated by `k^{-1/2}`.
    pub fn cfree_clt(d: usize, order: usize, n_max: usize) -> Result<Self> {
        let inc = Inclusion::identity(d);
        let rad = make_standard(&Family::Rademacher, &inc, order)?;
        ArraySpec::new("cfree-clt", Kind::CFree, 2.0, doubling_lengths(n_max), move |k| {
            let s = 1.0 / (k as f64).sqrt();
            DistPair::new(rad.dilate(s), rad.dilate(s / 2f64.sqrt()))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessRow {
    pub n: usize,
    pub k: usize,
    pub order: usize,
    pub boolean_distance: f64,
    pub free_distance: f64,
    pub bp_residual: f64,
    pub cp_min_eigenvalue: f64,
}

/// The four equivalent conditions of the c-free limit theorem, as observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scoreboard {
    pub boolean_converges: bool,
    pub free_converges: bool,
    pub free_limit_is_bp_of_boolean: bool,
    pub scaled_moments_converge: bool,
}

#[derive(Debug, Clone)]
pub struct LimitReport {
    pub name: String,
    pub rows: Vec<HarnessRow>,
    pub boolean_limit: DistPair,
    pub free_limit: DistPair,
    /// `max_k ‖BP(Boolean limit) − free limit‖`.
    pub bp_limit_residual: f64,
    /// Distances of the extrapolated limits to the declared targets, per order.
    pub boolean_target_distance: Option<Vec<f64>>,
    pub free_target_distance: Option<Vec<f64>>,
    /// Change of the extrapolated limits when the sampling window moves back one row.
    pub extrapolation_drift: f64,
    /// `k_n μ_n(X b_1 ⋯ b_j X) → σ(b_1 X ⋯ X b_j)` and `k_n μ_n(X) → γ`, on extrapolated values.
    pub condition4_residual: f64,
    pub limit_cp: PositivityReport,
    pub limit_cp_nu: PositivityReport,
    pub scoreboard: Scoreboard,
}

impl LimitReport {
    /// Rows at one truncation order.
    pub fn at_order(&self, order: usize) -> Vec<&HarnessRow> {
        self.rows.iter().filter(|r| r.order == order).collect()
    }

    /// Successive ratios of the free distance at `order`.
    pub fn free_decay_ratios(&self, order: usize) -> Vec<f64> {
        self.at_order(order)
            .windows(2)
            .map(|w| w[1].free_distance / w[0].free_distance)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,k_n,order,boolean_distance,free_distance,bp_residual,cp_min_eigenvalue\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.n,
                r.k,
                r.order,
                crate::io::fmt_f64(r.boolean_distance),
                crate::io::fmt_f64(r.free_distance),
                crate::io::fmt_f64(r.bp_residual),
                crate::io::fmt_f64(r.cp_min_eigenvalue)
            ));
        }
        s
    }
}

const EXTRAPOLATION_WINDOW: usize = 5;
const CONVERGENCE_TOL: f64 = 1e-6;

fn scaled_moments(d: &OVDistribution, k: usize) -> Vec<MultiMap> {
    let z = C64::new(k as f64, 0.0);
    d.moments().iter().map(|m| m.scale(z)).collect()
}

fn condition4(
    hs: &[f64],
    rows: &[&OVDistribution],
    ks: &[usize],
    limit_b: &NCSeries,
) -> Result<f64> {
    let pair = extract_generating_pair(limit_b)?;
    let scaled: Vec<Vec<MultiMap>> = rows.iter().zip(ks).map(|(d, &k)| scaled_moments(d, k)).collect();
    let mut res: f64 = 0.0;
    for j in 0..rows[0].order() {
        let maps: Vec<&MultiMap> = scaled.iter().map(|s| &s[j]).collect();
        let lim = extrapolate_maps(hs, &maps);
        let expected = if j == 0 {
            MultiMap::constant(pair.inclusion.d_b, &pair.gamma)
        } else if j - 1 < pair.sigma.len() {
            pair.sigma[j - 1].clone()
        } else {
            continue;
        };
        res = res.max(lim.max_diff(&expected));
    }
    Ok(res)
}

fn monotone_tail(vals: &[f64]) -> bool {
    let tail = &vals[vals.len().saturating_sub(EXTRAPOLATION_WINDOW)..];
    tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14)
}

/// Run a triangular array through Boolean and (c-)free `k_n`-fold convolution and tabulate
/// convergence, the BP relation and the generating-pair positivity of the limits.
pub fn limit_harness(spec: &ArraySpec) -> Result<LimitReport> {
    let ks = &spec.row_lengths;
    let mut boolean_rows = Vec::with_capacity(ks.len());
    let mut free_rows = Vec::with_capacity(ks.len());
    let mut inputs = Vec::with_capacity(ks.len());
    for &k in ks {
        let x = spec.row(k)?;
        let t = k as f64;
        let bool_k = pair_power(Kind::Boolean, &x, t)?;
        let free_k = pair_power(Kind::CFree, &x, t)?;
        for d in [&bool_k.mu, &bool_k.nu, &free_k.mu, &free_k.nu] {
            if !d.satisfies_bound(spec.bound) {
                return Err(Error::Precondition(format!(
                    "array '{}' violates the uniform bound M = {} at k = {k}",
                    spec.name, spec.bound
                )));
            }
        }
        boolean_rows.push(bool_k);
        free_rows.push(free_k);
        inputs.push(x);
    }
    let order = inputs[0].order();
    let hs: Vec<f64> = ks.iter().map(|&k| 1.0 / (k as f64).sqrt()).collect();
    let w = EXTRAPOLATION_WINDOW.min(ks.len());
    let last = ks.len() - w..ks.len();
    let window = |rows: &[DistPair], r: std::ops::Range<usize>| -> Result<DistPair> {
        let sel: Vec<&DistPair> = rows[r.clone()].iter().collect();
        extrapolate_pairs(&hs[r], &sel)
    };
    let boolean_limit = window(&boolean_rows, last.clone())?;
    let free_limit = window(&free_rows, last.clone())?;
    let extrapolation_drift = if ks.len() > w {
        let prev = last.start - 1..last.end - 1;
        let db = pair_distance(&window(&boolean_rows, prev.clone())?, &boolean_limit)?;
        let df = pair_distance(&window(&free_rows, prev)?, &free_limit)?;
        db.iter().chain(&df).fold(0.0f64, |m, &v| m.max(v))
    } else {
        f64::INFINITY
    };

    let (bool_ref, free_ref) = match &spec.targets {
        Some((b, f)) => (b.clone(), f.clone()),
        None => (boolean_limit.clone(), free_limit.clone()),
    };
    let cutoff = order.saturating_sub(2) / 2;
    let mut rows = Vec::new();
    let mut bool_track = Vec::new();
    let mut free_track = Vec::new();
    for (i, &k) in ks.iter().enumerate() {
        let db = pair_distance(&boolean_rows[i], &bool_ref)?;
        let df = pair_distance(&free_rows[i], &free_ref)?;
        let bp = pair_distance(&bp_map_pair(&boolean_rows[i])?, &free_rows[i])?;
        let cp = if cutoff >= 1 {
            extract_generating_pair(&b_series(&boolean_rows[i].mu)?)?
                .cp_report(cutoff)?
                .min_eigenvalue
        } else {
            f64::NAN
        };
        bool_track.push(db.iter().fold(0.0f64, |m, &v| m.max(v)));
        free_track.push(df.iter().fold(0.0f64, |m, &v| m.max(v)));
        for o in 0..order {
            rows.push(HarnessRow {
                n: k,
                k,
                order: o + 1,
                boolean_distance: db[o],
                free_distance: df[o],
                bp_residual: bp[o],
                cp_min_eigenvalue: cp,
            });
        }
    }

    let bp_limit = bp_map_pair(&boolean_limit)?;
    let bp_limit_residual = pair_distance(&bp_limit, &free_limit)?
        .into_iter()
        .fold(0.0, f64::max);
    let (boolean_target_distance, free_target_distance) = match &spec.targets {
        Some((b, f)) => (
            Some(pair_distance(&boolean_limit, b)?),
            Some(pair_distance(&free_limit, f)?),
        ),
        None => (None, None),
    };

    let sel = |rows: &[DistPair], mu: bool| -> Vec<OVDistribution> {
        rows[last.clone()]
            .iter()
            .map(|p| if mu { p.mu.clone() } else { p.nu.clone() })
            .collect()
    };
    let in_mu = sel(&inputs, true);
    let in_nu = sel(&inputs, false);
    let hs_w = &hs[last.clone()];
    let ks_w = &ks[last.clone()];
    let c4_mu = condition4(hs_w, &in_mu.iter().collect::<Vec<_>>(), ks_w, &b_series(&boolean_limit.mu)?)?;
    let c4_nu = condition4(hs_w, &in_nu.iter().collect::<Vec<_>>(), ks_w, &b_series(&boolean_limit.nu)?)?;
    let condition4_residual = c4_mu.max(c4_nu);

    let limit_cp = cp_of_limit(&b_series(&boolean_limit.mu)?, cutoff)?;
    let limit_cp_nu = cp_of_limit(&b_series(&boolean_limit.nu)?, cutoff)?;

    let stable = extrapolation_drift < CONVERGENCE_TOL;
    let scoreboard = Scoreboard {
        boolean_converges: stable && monotone_tail(&bool_track),
        free_converges: stable && monotone_tail(&free_track),
        free_limit_is_bp_of_boolean: bp_limit_residual < 1e-8,
        scaled_moments_converge: condition4_residual < CONVERGENCE_TOL,
    };
    Ok(LimitReport {
        name: spec.name.clone(),
        rows,
        boolean_limit,
        free_limit,
        bp_limit_residual,
        boolean_target_distance,
        free_target_distance,
        extrapolation_drift,
        condition4_residual,
        limit_cp,
        limit_cp_nu,
        scoreboard,
    })
}

fn cp_of_limit(b: &NCSeries, cutoff: usize) -> Result<PositivityReport> {
    if cutoff == 0 {
        return Err(Error::Precondition(
            "order too small for a generating-pair positivity test".into(),
        ));
    }
    extract_generating_pair(b)?.cp_report(cutoff)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivisibilityReport {
    pub n: usize,
    /// Truncated CP test of the R-transform generating pair of `μ^{⊎(1−1/n)}`.
    pub cp: PositivityReport,
    /// `‖(μ^{⊞1/n})^{⊞n} − μ‖`, formally zero.
    pub root_residual: f64,
}

/// `μ` is an `n`-th free convolution power iff `μ^{⊎(1−1/n)}` is freely infinitely divisible;
/// the latter is tested on the generating pair of its R-transform.
pub fn free_power_divisibility_check(mu: &OVDistribution, n: usize, cutoff: usize) -> Result<DivisibilityReport> {
    if n < 2 {
        return Err(Error::Domain("divisibility needs n >= 2".into()));
    }
    mu.require_b_valued("the divisibility check")?;
    let boolean_part = power(Kind::Boolean, mu, 1.0 - 1.0 / n as f64)?;
    let cp = extract_generating_pair(&r_series(&boolean_part)?)?.cp_report(cutoff)?;
    let root = power(Kind::Free, mu, 1.0 / n as f64)?;
    let back = power(Kind::Free, &root, n as f64)?;
    let root_residual = back.moment_distance(mu)?.into_iter().fold(0.0, f64::max);
    Ok(DivisibilityReport { n, cp, root_residual })
}

/// `true` if every `k`-fold sum in the list satisfies `‖m_j‖ ≤ M^j`.
pub fn infinitesimality_check(spec: &ArraySpec) -> Result<bool> {
    for &k in &spec.row_lengths {
        let x = spec.row(k)?;
        let sum = pair_power(Kind::CFree, &x, k as f64)?;
        if !sum.mu.satisfies_bound(spec.bound) || !sum.nu.satisfies_bound(spec.bound) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alg::from_real;
    use crate::distribution::OperatorModel;
    use crate::oracle;

    fn max_of(v: Vec<f64>) -> f64 {
        v.into_iter().fold(0.0, f64::max)
    }

    fn scalar(d: &OVDistribution) -> Vec<f64> {
        (1..=d.order()).map(|k| d.scalar_moment(k)[(0, 0)].re).collect()
    }

    #[test]
    fn free_and_boolean_rademacher() {
        let inc = Inclusion::identity(1);
        let r = make_standard(&Family::Rademacher, &inc, 6).unwrap();
        let f = free(&r, &r).unwrap();
        let b = boolean(&r, &r).unwrap();
        for (x, e) in scalar(&f).iter().zip([0.0, 2.0, 0.0, 6.0, 0.0, 20.0]) {
            assert!((x - e).abs() < 1e-12);
        }
        for (x, e) in scalar(&b).iter().zip([0.0, 2.0, 0.0, 4.0, 0.0, 8.0]) {
            assert!((x - e).abs() < 1e-12);
        }
        assert!(max_of(f.moment_distance(&oracle::oracle_free(&r, &r).unwrap()).unwrap()) < 1e-12);
    }

    #[test]
    fn zero_is_neutral_for_every_kind() {
        let model = OperatorModel::semicircle_d2().unwrap();
        let x = model.moments(crate::Functional::Expectation, 5).unwrap();
        let z = make_standard(&Family::PointMass(alg::zeros(2)), &Inclusion::identity(2), 5).unwrap();
        for kind in [Kind::Free, Kind::Boolean] {
            let s = convolve(kind, &x, &z).unwrap();
            assert!(max_of(s.moment_distance(&x).unwrap()) < 1e-12);
        }
        let px = DistPair::diagonal(&x).unwrap();
        let pz = DistPair::diagonal(&z).unwrap();
        let c = cfree(&px, &pz).unwrap();
        assert!(max_of(c.mu.moment_distance(&x).unwrap()) < 1e-12);
    }

    #[test]
    fn powers() {
        let inc = Inclusion::identity(1);
        let r = make_standard(&Family::Rademacher, &inc, 6).unwrap();
        let two = power(Kind::Boolean, &r, 2.0).unwrap();
        assert!(max_of(two.moment_distance(&boolean(&r, &r).unwrap()).unwrap()) < 1e-12);
        let zero = power(Kind::Boolean, &r, 0.0).unwrap();
        assert!(zero.moment_norms().iter().all(|&v| v < 1e-15));
        let half = power(Kind::Free, &r, 0.5).unwrap();
        assert!(half.formal);
        let back = power(Kind::Free, &half, 2.0).unwrap();
        assert!(max_of(back.moment_distance(&r).unwrap()) < 1e-12);
        assert!(matches!(power(Kind::Free, &r, -1.0), Err(Error::Domain(_))));
        let three = power(Kind::Free, &r, 3.0).unwrap();
        let iter = free(&free(&r, &r).unwrap(), &r).unwrap();
        assert!(max_of(three.moment_distance(&iter).unwrap()) < 1e-9);
    }

    #[test]
    fn bp_examples() {
        let inc = Inclusion::identity(1);
        let r = make_standard(&Family::Rademacher, &inc, 6).unwrap();
        let semi = make_standard(&Family::OvSemicircle(alg::LinearMap::identity(1)), &inc, 6).unwrap();
        assert!(max_of(bp_map(&r).unwrap().moment_distance(&semi).unwrap()) < 1e-12);
        let beta = from_real(2, &[0.3, 0.2, 0.2, -0.1]);
        let pm = make_standard(&Family::PointMass(beta), &Inclusion::identity(2), 5).unwrap();
        assert!(max_of(bp_map(&pm).unwrap().moment_distance(&pm).unwrap()) < 1e-12);
        // ν = δ_0: the first coordinate keeps its B-transform as ᶜR
        let z = make_standard(&Family::PointMass(alg::zeros(1)), &inc, 6).unwrap();
        let pair = DistPair::new(r.clone(), z).unwrap();
        let image = bp_map_pair(&pair).unwrap();
        assert!(max_of(image.mu.moment_distance(&r).unwrap()) < 1e-12);
    }

    #[test]
    fn bp_is_a_morphism() {
        let inc = Inclusion::identity(2);
        let model = OperatorModel::semicircle_d2().unwrap();
        let x = model.moments(crate::Functional::Expectation, 5).unwrap();
        let y = make_standard(&Family::Rademacher, &inc, 5).unwrap();
        let lhs = bp_map(&boolean(&x, &y).unwrap()).unwrap();
        let rhs = free(&bp_map(&x).unwrap(), &bp_map(&y).unwrap()).unwrap();
        assert!(max_of(lhs.moment_distance(&rhs).unwrap()) < 1e-10);
    }

    #[test]
    fn bbp_identities() {
        let inc = Inclusion::identity(1);
        let r = make_standard(&Family::Rademacher, &inc, 6).unwrap();
        assert!(verify_bbp_identity(&r).unwrap() < 1e-10);
        let pm = make_standard(&Family::PointMass(alg::scalar(1, C64::new(0.7, 0.0))), &inc, 6).unwrap();
        assert!(verify_bbp_identity(&pm).unwrap() < 1e-14);
        let semi = OperatorModel::semicircle_d2().unwrap().moments(crate::Functional::Expectation, 5).unwrap();
        assert!(verify_bbp_identity(&semi).unwrap() < 1e-9);
        let arc = make_standard(&Family::ScalarArcsine, &inc, 6).unwrap();
        let pair = DistPair::new(arc.dilate(0.5), r.clone()).unwrap();
        assert!(verify_cfree_bbp_identity(&pair).unwrap() < 1e-9);
        assert!(verify_cfree_bbp_identity(&DistPair::diagonal(&r).unwrap()).unwrap() < 1e-10);
    }

    #[test]
    fn neville_is_exact_on_polynomials() {
        let hs = [1.0, 0.5, 0.25, 0.125];
        let vals: Vec<C64> = hs.iter().map(|h| C64::new(2.0 + 3.0 * h - h * h * h, 0.0)).collect();
        assert!((neville(&hs, &vals) - C64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn clt_harness() {
        let spec = ArraySpec::clt(1, 6, 256).unwrap();
        let rep = limit_harness(&spec).unwrap();
        for r in rep.free_decay_ratios(4) {
            assert!((r - 0.5).abs() < 0.1, "{r}");
        }
        assert!(rep.bp_limit_residual < 1e-8);
        assert!(max_of(rep.free_target_distance.clone().unwrap()) < 1e-8);
        assert!(rep.limit_cp.pass);
        assert!(rep.condition4_residual < 1e-8);
        assert!(rep.scoreboard.free_converges && rep.scoreboard.boolean_converges);
        assert!(rep.to_csv().lines().count() == 1 + 9 * 6);
    }

    #[test]
    fn point_mass_harness() {
        let beta = from_real(2, &[0.5, 0.1, 0.1, -0.2]);
        let spec = ArraySpec::point_mass(&beta, 4, 64).unwrap();
        let rep = limit_harness(&spec).unwrap();
        assert!(rep.rows.iter().all(|r| r.free_distance < 1e-10 && r.boolean_distance < 1e-10));
    }

    #[test]
    fn cfree_harness() {
        let spec = ArraySpec::cfree_clt(1, 6, 128).unwrap();
        let rep = limit_harness(&spec).unwrap();
        assert!(rep.bp_limit_residual < 1e-8, "{}", rep.bp_limit_residual);
        assert!(rep.condition4_residual < 1e-8);
        assert!(rep.scoreboard.free_limit_is_bp_of_boolean);
    }

    #[test]
    fn harness_rejects_bad_specs() {
        let f = |_k: usize| -> Result<DistPair> { unreachable!() };
        assert!(matches!(
            ArraySpec::new("x", Kind::Free, 1.0, vec![1, 1], f),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            ArraySpec::new("x", Kind::Free, 1.0, vec![1, 4096], f),
            Err(Error::Resource(_))
        ));
        // a non-infinitesimal array: every row is the unscaled Rademacher law
        let inc = Inclusion::identity(1);
        let r = make_standard(&Family::Rademacher, &inc, 4).unwrap();
        let spec = ArraySpec::new("bad", Kind::Free, 2.0, vec![1, 2, 64], move |_| DistPair::diagonal(&r)).unwrap();
        assert!(!infinitesimality_check(&spec).unwrap());
        assert!(matches!(limit_harness(&spec), Err(Error::Precondition(_))));
    }

    #[test]
    fn divisibility() {
        let inc = Inclusion::identity(1);
        let r = make_standard(&Family::Rademacher, &inc, 6).unwrap();
        let arc = free(&r, &r).unwrap();
        let rep = free_power_divisibility_check(&arc, 2, 2).unwrap();
        assert!(rep.cp.pass, "{}", rep.cp.min_eigenvalue);
        assert!(rep.root_residual < 1e-9);
        let semi = make_standard(&Family::OvSemicircle(alg::LinearMap::identity(1)), &inc, 6).unwrap();
        assert!(free_power_divisibility_check(&semi, 2, 2).unwrap().cp.pass);
        let pm = make_standard(&Family::PointMass(alg::scalar(1, C64::new(0.4, 0.0))), &inc, 6).unwrap();
        assert!(free_power_divisibility_check(&pm, 3, 2).unwrap().cp.pass);
    }
}
