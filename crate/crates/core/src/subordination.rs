//! Matrix-valued Cauchy transforms of operator models, subordination fixed points on the
//! matrix upper half-plane and the numeric identity suite.

use crate::alg::{self, Inclusion, Mat, C64};
use crate::convolve;
use crate::distribution::{Functional, OVDistribution, OperatorModel};
use crate::error::{Error, Result};
use crate::oracle::Kind;
use crate::transforms::{frak_h_series, m_series};

/// Eigenvalue slack for half-plane checks.
pub const HALF_PLANE_SLACK: f64 = 1e-10;
/// Largest amplification level used by the fully matricial checks.
pub const MAX_LEVEL: usize = 3;
/// Extra allowance added to every analytic bound to absorb rounding and solver error.
pub const NUMERIC_SLACK: f64 = 1e-9;
/// Target tail bound for [`auto_grid`].
pub const GRID_TARGET: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    /// `ω₀ = b`.
    B,
    /// `ω₀ = i·t·1`.
    ITimes(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    pub damping: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub start: Start,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            damping: 0.5,
            max_iters: 200,
            tol: 1e-12,
            start: Start::B,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Precondition(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Precondition(format!("tol must be positive, got {}", self.tol)));
        }
        if let Start::ITimes(t) = self.start {
            if !(t > 0.0) {
                return Err(Error::Precondition("start i·t·1 needs t > 0".into()));
            }
        }
        Ok(())
    }
}

fn level_of(model: &OperatorModel, b: &Mat) -> Result<usize> {
    let d = model.d_b();
    if !alg::is_square(b) || b.nrows() % d != 0 || b.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "argument must be a square matrix over M_{d}, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let n = b.nrows() / d;
    if n > MAX_LEVEL {
        return Err(Error::Resource(format!(
            "amplification level {n} exceeds {MAX_LEVEL}"
        )));
    }
    Ok(n)
}

/// Blockwise `ι^{(n)}`.
pub fn amplify_inclusion(inc: &Inclusion, b: &Mat, n: usize) -> Mat {
    let (ds, dt) = (inc.d_b, inc.d_d);
    let mut out = alg::zeros(n * dt);
    for r in 0..n {
        for s in 0..n {
            alg::set_block(&mut out, dt, r, s, &inc.apply(&alg::block(b, ds, r, s)));
        }
    }
    out
}

/// `(φ ⊗ id_n)[(ι_A^{(n)}(b) − X ⊗ 1_n)^{-1}]` without the half-plane check.
fn resolvent(model: &OperatorModel, which: Functional, b: &Mat, n: usize) -> Result<Mat> {
    let m = model.m;
    let mut a = amplify_inclusion(&model.iota_a, b, n);
    for r in 0..n {
        let blk = alg::block(&a, m, r, r) - &model.x;
        alg::set_block(&mut a, m, r, r, &blk);
    }
    let inv = alg::inverse(&a)?;
    let map = model.map(which);
    let dt = map.d_out;
    let mut out = alg::zeros(n * dt);
    for r in 0..n {
        for s in 0..n {
            alg::set_block(&mut out, dt, r, s, &map.apply(&alg::block(&inv, m, r, s)));
        }
    }
    Ok(out)
}

fn require_half_plane(b: &Mat, what: &str) -> Result<()> {
    if !alg::in_upper_half_plane(b, 0.0)? || alg::least_eigenvalue(&alg::im_part(b)) <= 0.0 {
        return Err(Error::Precondition(format!(
            "{what}: argument is not in the upper half-plane (Im b must be positive definite)"
        )));
    }
    Ok(())
}

/// Cauchy transform at amplification level `n = b.nrows() / d_B`.
pub fn cauchy_g(model: &OperatorModel, which: Functional, b: &Mat) -> Result<Mat> {
    let n = level_of(model, b)?;
    require_half_plane(b, "cauchy_g")?;
    resolvent(model, which, b, n)
}

/// `F = G^{-1}`, inverted on the lower half-plane.
pub fn reciprocal_f(g: &Mat) -> Result<Mat> {
    Ok(-alg::invert_half_plane(&(-g))?)
}

pub fn cauchy_f(model: &OperatorModel, which: Functional, b: &Mat) -> Result<Mat> {
    reciprocal_f(&cauchy_g(model, which, b)?)
}

/// `h(b) = F(b) − ι(b)`.
pub fn cauchy_h(model: &OperatorModel, which: Functional, b: &Mat) -> Result<Mat> {
    let n = level_of(model, b)?;
    let f = cauchy_f(model, which, b)?;
    Ok(f - amplify_inclusion(&model.target_inclusion(which), b, n))
}

/// Least eigenvalues of `−Im G(b)` and `Im F(b) − Im ι(b)`; both must be nonnegative.
pub fn half_plane_margins(model: &OperatorModel, which: Functional, b: &Mat) -> Result<(f64, f64)> {
    let n = level_of(model, b)?;
    let g = cauchy_g(model, which, b)?;
    let f = reciprocal_f(&g)?;
    let ib = amplify_inclusion(&model.target_inclusion(which), b, n);
    Ok((
        alg::least_eigenvalue(&(-alg::im_part(&g))),
        alg::least_eigenvalue(&(alg::im_part(&f) - alg::im_part(&ib))),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub omega: Mat,
    pub iterations: usize,
    pub residual: f64,
    /// Least eigenvalue of `Im ω − Im b`.
    pub min_im_gap: f64,
}

fn start_point(b: &Mat, cfg: &FixedPointConfig) -> Mat {
    match cfg.start {
        Start::B => b.clone(),
        Start::ITimes(t) => alg::scalar(b.nrows(), C64::new(0.0, t)),
    }
}

fn damped_iteration(
    b: &Mat,
    cfg: &FixedPointConfig,
    map: impl Fn(&Mat) -> Result<Mat>,
) -> Result<FixedPoint> {
    cfg.validate()?;
    let mut omega = start_point(b, cfg);
    let mut residual = f64::INFINITY;
    for it in 0..=cfg.max_iters {
        let target = map(&omega)?;
        residual = alg::op_norm(&(&target - &omega));
        if residual < cfg.tol {
            let min_im_gap = alg::least_eigenvalue(&(alg::im_part(&omega) - alg::im_part(b)));
            return Ok(FixedPoint {
                omega,
                iterations: it,
                residual,
                min_im_gap,
            });
        }
        if it == cfg.max_iters {
            break;
        }
        let lam = C64::new(cfg.damping, 0.0);
        omega = omega.map(|z| z * (1.0 - cfg.damping)) + target * lam;
    }
    Err(Error::Convergence {
        iters: cfg.max_iters,
        residual,
    })
}

/// Subordination function of the `n`-fold free self-convolution of the `E_B`-distribution:
/// `ω = b/n + (1 − 1/n) F(ω)`.
pub fn omega_fixed_point(
    model: &OperatorModel,
    n_fold: usize,
    b: &Mat,
    cfg: &FixedPointConfig,
) -> Result<FixedPoint> {
    if n_fold < 2 {
        return Err(Error::Precondition(format!("n_fold must be at least 2, got {n_fold}")));
    }
    level_of(model, b)?;
    require_half_plane(b, "omega_fixed_point")?;
    let nf = n_fold as f64;
    let head = b.map(|z| z / nf);
    damped_iteration(b, cfg, |w| {
        let f = cauchy_f(model, Functional::Expectation, w)?;
        Ok(&head + f.map(|z| z * (1.0 - 1.0 / nf)))
    })
}

/// Both subordination functions of `X + Y` for free `X`, `Y` (`E_B`-distributions):
/// `ω₁ = b + h_Y(b + h_X(ω₁))`, `ω₂ = b + h_X(ω₁)`.
pub fn omega_pair(
    x: &OperatorModel,
    y: &OperatorModel,
    b: &Mat,
    cfg: &FixedPointConfig,
) -> Result<(FixedPoint, Mat)> {
    if x.d_b() != y.d_b() {
        return Err(Error::Dimension("models must share B".into()));
    }
    level_of(x, b)?;
    require_half_plane(b, "omega_pair")?;
    let fp = damped_iteration(b, cfg, |w1| {
        let w2 = b + cauchy_h(x, Functional::Expectation, w1)?;
        Ok(b + cauchy_h(y, Functional::Expectation, &w2)?)
    })?;
    let w2 = b + cauchy_h(x, Functional::Expectation, &fp.omega)?;
    Ok((fp, w2))
}

/// Truncated `G(b) = ι(w)·M(w)`, `w = b^{-1}`, at level one.
pub fn g_series(d: &OVDistribution, b: &Mat) -> Result<Mat> {
    let w = alg::inverse(b)?;
    Ok(d.inclusion().apply(&w) * m_series(d).eval(&w))
}

/// Truncated `𝔥(b^{-1})`.
pub fn frak_h_at_inverse(d: &OVDistribution, b: &Mat) -> Result<Mat> {
    Ok(frak_h_series(d).eval(&alg::inverse(b)?))
}

/// `‖w‖(M‖w‖)^{p}/(1 − M‖w‖)` with `w = b^{-1}`: the tail of the G-series past the
/// terms kept, `p = N + 1` for [`g_series`] and `p = N` for [`frak_h_at_inverse`].
pub fn g_tail_bound(norm_bound: f64, b: &Mat, power: usize) -> Result<f64> {
    let wn = alg::op_norm(&alg::inverse(b)?);
    let q = norm_bound * wn;
    if q >= 1.0 {
        return Err(Error::Grid(format!(
            "M·‖b^-1‖ = {q:.3} >= 1: the truncated series diverges here; use a larger Im b"
        )));
    }
    Ok(wn * q.powi(power as i32) / (1.0 - q))
}

/// Perturbation bound for `F = G^{-1}` when `G` is known to within `delta`.
pub fn f_bound(g_approx: &Mat, delta: f64) -> Result<f64> {
    let a = alg::op_norm(&alg::inverse(g_approx)?);
    if a * delta >= 1.0 {
        return Err(Error::Grid(
            "G-series error too large to bound F; use a larger Im b".into(),
        ));
    }
    Ok(a * a * delta / (1.0 - a * delta))
}

/// Smallest `y` on a doubling ladder from `y0` such that `b = iy·1` keeps the order-`n` G-series
/// tail below [`GRID_TARGET`].
pub fn auto_grid(norm_bound: f64, d: usize, order: usize, y0: f64) -> f64 {
    let mut y = y0.max(2.0 * norm_bound).max(1e-3);
    loop {
        let b = alg::scalar(d, C64::new(0.0, y));
        match g_tail_bound(norm_bound, &b, order + 1) {
            Ok(t) if t < GRID_TARGET => return y,
            _ => y *= 1.25,
        }
    }
}

/// `b = iy·1_d` for each `y`.
pub fn imaginary_grid(ys: &[f64], d: usize) -> Vec<Mat> {
    ys.iter().map(|&y| alg::scalar(d, C64::new(0.0, y))).collect()
}

/// Coefficients `c_k = φ(X^k)` of `G(z·1) = Σ_k c_k z^{-(k+1)}` for `k = 0..=order`, read off by
/// the trapezoidal rule on the circle `|1/z| = 1/(2‖X‖)`.
pub fn asymptotic_coefficients(
    model: &OperatorModel,
    which: Functional,
    order: usize,
    points: usize,
) -> Result<Vec<Mat>> {
    let d = model.d_b();
    let r = 0.5 / model.x_norm().max(1e-3);
    let dt = model.map(which).d_out;
    let mut out = vec![alg::zeros(dt); order + 1];
    for p in 0..points {
        let w = C64::from_polar(r, 2.0 * std::f64::consts::PI * p as f64 / points as f64);
        let g = resolvent(model, which, &alg::scalar(d, w.inv()), 1)?;
        let mut wp = w.inv();
        for c in out.iter_mut() {
            *c += g.map(|z| z * wp / points as f64);
            wp *= w.inv();
        }
    }
    Ok(out)
}

/// Largest deviation of [`asymptotic_coefficients`] from the model's moments `m_k(1, …, 1)`.
pub fn series_bridge_residual(model: &OperatorModel, which: Functional, order: usize) -> Result<f64> {
    let dist = model.moments(which, order)?;
    let coeffs = asymptotic_coefficients(model, which, order, 64)?;
    let mut res = alg::max_diff(&coeffs[0], &alg::eye(coeffs[0].nrows()));
    for k in 1..=order {
        res = res.max(alg::max_diff(&coeffs[k], &dist.scalar_moment(k)));
    }
    Ok(res)
}

/// `‖ω(b ⊕ b′) − ω(b) ⊕ ω(b′)‖` for the `n`-fold subordination function.
pub fn direct_sum_residual(
    model: &OperatorModel,
    n_fold: usize,
    b1: &Mat,
    b2: &Mat,
    cfg: &FixedPointConfig,
) -> Result<f64> {
    let joint = omega_fixed_point(model, n_fold, &alg::direct_sum(b1, b2), cfg)?;
    let w1 = omega_fixed_point(model, n_fold, b1, cfg)?;
    let w2 = omega_fixed_point(model, n_fold, b2, cfg)?;
    Ok(alg::max_diff(&joint.omega, &alg::direct_sum(&w1.omega, &w2.omega)))
}

/// A residual together with the bound it must respect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub residual: f64,
    pub bound: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.residual <= self.bound + NUMERIC_SLACK
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub b: Mat,
    pub n_fold: usize,
    pub iterations: usize,
    pub residual: f64,
    pub min_im_gap: f64,
    /// `G_μ(ω(b))` against the series of `μ^{⊞n}`.
    pub free_g: Check,
    /// `h_{μ_n}` from the series of `(μ, ν)^{⊞_c n}` against `n·h_μ(ω_n(b))`.
    pub cfree_h: Check,
    /// `F_{X+Y}` from the series against `ω₁ + ω₂ − b`.
    pub bv: Check,
    /// `h_{μ_X ⊞_c μ_Y}` from the series against `h_{μ_X}(ω₁) + h_{μ_Y}(ω₂)`.
    pub cfree_bv: Check,
    /// `𝔥(b^{-1})` against `G(b)`, both functionals.
    pub frak_h: Check,
}

impl SuiteRow {
    pub fn checks(&self) -> [(&'static str, Check); 5] {
        let cs = [self.free_g, self.cfree_h, self.bv, self.cfree_bv, self.frak_h];
        let mut out = [("", ZERO_CHECK); 5];
        for (o, (name, c)) in out.iter_mut().zip(CHECK_NAMES.iter().zip(cs)) {
            *o = (name, c);
        }
        out
    }

    pub fn pass(&self, tol: f64) -> bool {
        self.residual < tol.max(1e-10)
            && self.min_im_gap > -HALF_PLANE_SLACK
            && self.checks().iter().all(|(_, c)| c.pass())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub order: usize,
    pub rows: Vec<SuiteRow>,
    pub tol: f64,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass(self.tol))
    }

    pub fn max_iterations(&self) -> usize {
        self.rows.iter().map(|r| r.iterations).max().unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec![
            "b".to_string(),
            "n_fold".into(),
            "iterations".into(),
            "residual".into(),
            "min_eig_im_gap".into(),
        ];
        for name in CHECK_NAMES {
            header.push(name.to_string());
            header.push(format!("{name}_bound"));
        }
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![
                    crate::io::mat_label(&r.b),
                    r.n_fold.to_string(),
                    r.iterations.to_string(),
                    crate::io::fmt_f64(r.residual),
                    crate::io::fmt_f64(r.min_im_gap),
                ];
                for (_, c) in r.checks() {
                    row.push(crate::io::fmt_f64(c.residual));
                    row.push(crate::io::fmt_f64(c.bound));
                }
                row
            })
            .collect();
        crate::io::csv(&header, &rows)
    }
}

pub const CHECK_NAMES: [&str; 5] = ["free_g", "cfree_h", "bv", "cfree_bv", "frak_h"];

const ZERO_CHECK: Check = Check {
    residual: 0.0,
    bound: 0.0,
};

/// Inputs for [`verify_subordination_suite`]: `x` supplies `μ` (θ) and `ν` (`E_B`); `y` is the
/// free partner for the two-variable identities.
pub struct SuiteSpec<'a> {
    pub x: &'a OperatorModel,
    pub y: &'a OperatorModel,
    pub grid: Vec<Mat>,
    pub order: usize,
    pub n_fold: usize,
    pub cfg: FixedPointConfig,
}

fn max_check(a: Check, b: Check) -> Check {
    Check {
        residual: a.residual.max(b.residual),
        bound: a.bound.max(b.bound),
    }
}

/// Series value of `F` and its bound given the G-series of `d` at `b`.
fn f_series(d: &OVDistribution, b: &Mat, norm_bound: f64) -> Result<(Mat, f64)> {
    let g = g_series(d, b)?;
    let tail = g_tail_bound(norm_bound, b, d.order() + 1)?;
    Ok((reciprocal_f(&g)?, f_bound(&g, tail)?))
}

/// Residuals of the subordination identities on a grid of level-one points.
pub fn verify_subordination_suite(spec: &SuiteSpec) -> Result<SuiteReport> {
    let (x, y) = (spec.x, spec.y);
    if x.d_b() != y.d_b() {
        return Err(Error::Dimension("models must share B".into()));
    }
    let n = spec.order;
    let nf = spec.n_fold;
    let pair_x = x.pair(n)?;
    let pair_y = y.pair(n)?;
    let (mu, nu) = (&pair_x.mu, &pair_x.nu);
    let nu_n = convolve::power(Kind::Free, nu, nf as f64)?;
    let pair_n = convolve::pair_power(Kind::CFree, &pair_x, nf as f64)?;
    let nu_xy = convolve::free(&pair_x.nu, &pair_y.nu)?;
    let cfree_xy = if x.inclusion == y.inclusion {
        Some(convolve::cfree(&pair_x, &pair_y)?)
    } else {
        None
    };
    let (mx, my) = (x.x_norm(), y.x_norm());
    let inc = x.inclusion;

    let mut rows = Vec::with_capacity(spec.grid.len());
    for b in &spec.grid {
        if b.nrows() != x.d_b() {
            return Err(Error::Dimension("grid points must be level-one elements of B".into()));
        }
        let fp = omega_fixed_point(x, nf, b, &spec.cfg)?;
        let w = &fp.omega;

        let g_series_n = g_series(&nu_n, b)?;
        let free_g = Check {
            residual: alg::op_norm(&(cauchy_g(x, Functional::Expectation, w)? - &g_series_n)),
            bound: g_tail_bound(nf as f64 * mx, b, n + 1)?,
        };

        let (f_mu_n, fb) = f_series(&pair_n.mu, b, nf as f64 * mx)?;
        let h_series = f_mu_n - inc.apply(b);
        let h_numeric = cauchy_h(x, Functional::Theta, w)?.map(|z| z * nf as f64);
        let cfree_h = Check {
            residual: alg::op_norm(&(h_series - h_numeric)),
            bound: fb,
        };

        let (w1, w2) = omega_pair(x, y, b, &spec.cfg)?;
        let (f_xy, fb_xy) = f_series(&nu_xy, b, mx + my)?;
        let bv = Check {
            residual: alg::op_norm(&(f_xy - (&w1.omega + &w2 - b))),
            bound: fb_xy,
        };
        let cfree_bv = match &cfree_xy {
            Some(p) => {
                let (f, fb) = f_series(&p.mu, b, mx + my)?;
                let lhs = f - inc.apply(b);
                let rhs = cauchy_h(x, Functional::Theta, &w1.omega)?
                    + cauchy_h(y, Functional::Theta, &w2)?;
                Check {
                    residual: alg::op_norm(&(lhs - rhs)),
                    bound: fb,
                }
            }
            None => ZERO_CHECK,
        };

        let mut frak_h = ZERO_CHECK;
        for (d, which) in [(nu, Functional::Expectation), (mu, Functional::Theta)] {
            let c = Check {
                residual: alg::op_norm(&(frak_h_at_inverse(d, b)? - cauchy_g(x, which, b)?)),
                bound: g_tail_bound(mx, b, n)?,
            };
            frak_h = max_check(frak_h, c);
        }

        rows.push(SuiteRow {
            b: b.clone(),
            n_fold: nf,
            iterations: fp.iterations.max(w1.iterations),
            residual: fp.residual.max(w1.residual),
            min_im_gap: fp.min_im_gap.min(w1.min_im_gap),
            free_g,
            cfree_h,
            bv,
            cfree_bv,
            frak_h,
        });
    }
    Ok(SuiteReport {
        order: n,
        rows,
        tol: spec.cfg.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ib(d: usize, y: f64) -> Mat {
        alg::scalar(d, C64::new(0.0, y))
    }

    #[test]
    fn point_mass_resolvent() {
        let beta = alg::from_real(2, &[1.0, 0.5, 0.5, -1.0]);
        let model = OperatorModel::point_mass(&beta).unwrap();
        let b = ib(2, 3.0);
        let g = cauchy_g(&model, Functional::Expectation, &b).unwrap();
        let expect = alg::inverse(&(&b - beta.map(|z| z))).unwrap();
        assert!(alg::max_diff(&g, &expect) < 1e-14);
    }

    #[test]
    fn rademacher_resolvent_by_hand() {
        let model = OperatorModel::rademacher(1).unwrap();
        for y in [0.5, 2.0, 7.0] {
            let z = C64::new(0.0, y);
            let g = cauchy_g(&model, Functional::Expectation, &ib(1, y)).unwrap();
            let expect = ((z - 1.0).inv() + (z + 1.0).inv()) * 0.5;
            assert!((g[(0, 0)] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn large_y_asymptotics() {
        let model = OperatorModel::semicircle_d2().unwrap();
        for y in [10.0, 100.0, 1000.0] {
            let g = cauchy_g(&model, Functional::Expectation, &ib(2, y)).unwrap();
            let lead = ib(2, y).try_inverse().unwrap();
            assert!(alg::op_norm(&(g - lead)) * y * y < 1.0);
        }
    }

    #[test]
    fn half_plane_violation_is_rejected() {
        let model = OperatorModel::rademacher(1).unwrap();
        let err = cauchy_g(&model, Functional::Expectation, &ib(1, -1.0)).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(matches!(
            omega_fixed_point(&model, 2, &ib(1, 0.0), &FixedPointConfig::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn point_mass_zero_fixed_point_is_b() {
        let model = OperatorModel::point_mass(&alg::zeros(2)).unwrap();
        let b = alg::from_rows(&[
            &[C64::new(0.3, 1.0), C64::new(0.1, 0.0)],
            &[C64::new(0.1, 0.0), C64::new(-0.2, 2.0)],
        ]);
        let fp = omega_fixed_point(&model, 2, &b, &FixedPointConfig::default()).unwrap();
        assert_eq!(fp.iterations, 0);
        assert!(alg::max_diff(&fp.omega, &b) < 1e-14);
    }

    #[test]
    fn rademacher_omega_solves_quadratic() {
        // ω = b − 1/ω for the symmetric Bernoulli law
        let model = OperatorModel::rademacher(1).unwrap();
        let fp = omega_fixed_point(&model, 2, &ib(1, 2.0), &FixedPointConfig::default()).unwrap();
        assert!(fp.iterations <= 100 && fp.residual < 1e-12);
        let w = fp.omega[(0, 0)];
        assert!((w - (C64::new(0.0, 2.0) - w.inv())).norm() < 1e-11);
        assert!(fp.min_im_gap > -HALF_PLANE_SLACK);
    }

    #[test]
    fn semicircle_three_fold_converges() {
        let model = OperatorModel::semicircle_d2().unwrap();
        let fp = omega_fixed_point(&model, 3, &ib(2, 3.0), &FixedPointConfig::default()).unwrap();
        assert!(fp.residual < 1e-12);
        assert!(fp.min_im_gap > -HALF_PLANE_SLACK);
    }

    #[test]
    fn convergence_error_carries_residual() {
        let model = OperatorModel::rademacher(1).unwrap();
        let cfg = FixedPointConfig {
            max_iters: 2,
            ..FixedPointConfig::default()
        };
        match omega_fixed_point(&model, 2, &ib(1, 0.3), &cfg) {
            Err(Error::Convergence { iters, residual }) => {
                assert_eq!(iters, 2);
                assert!(residual > 0.0 && residual.is_finite());
            }
            other => panic!("expected a convergence error, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = FixedPointConfig {
            damping: 1.5,
            ..FixedPointConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FixedPointConfig {
            tol: 0.0,
            ..FixedPointConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn omega_respects_direct_sums() {
        let model = OperatorModel::rademacher(1).unwrap();
        let b1 = ib(1, 1.5);
        let b2 = alg::scalar(1, C64::new(0.7, 2.5));
        let res = direct_sum_residual(&model, 2, &b1, &b2, &FixedPointConfig::default()).unwrap();
        assert!(res < 1e-10);
        let too_big = alg::scalar(4, C64::new(0.0, 1.0));
        assert!(matches!(
            omega_fixed_point(&model, 2, &too_big, &FixedPointConfig::default()),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn series_bridge_matches_moments() {
        for model in [OperatorModel::rademacher(1).unwrap(), OperatorModel::semicircle_d2().unwrap()] {
            assert!(series_bridge_residual(&model, Functional::Expectation, 6).unwrap() < 1e-6);
        }
    }

    #[test]
    fn tail_bound_formula() {
        // ‖X‖ = 1, b = 4i, N = 6: Σ_{k>6} 4^{-(k+1)}
        let t = g_tail_bound(1.0, &ib(1, 4.0), 7).unwrap();
        let direct: f64 = (7..200).map(|k| 0.25f64.powi(k + 1)).sum();
        assert!((t - direct).abs() < 1e-15);
        assert!(matches!(g_tail_bound(1.0, &ib(1, 0.5), 7), Err(Error::Grid(_))));
        let y = auto_grid(1.0, 1, 6, 1.0);
        assert!(g_tail_bound(1.0, &ib(1, y), 7).unwrap() < GRID_TARGET);
    }

    #[test]
    fn point_mass_suite_is_exact() {
        let beta = alg::from_real(2, &[0.5, 0.0, 0.0, -0.25]);
        let x = OperatorModel::point_mass(&beta).unwrap();
        let spec = SuiteSpec {
            x: &x,
            y: &x,
            grid: imaginary_grid(&[4.0, 6.0], 2),
            order: 5,
            n_fold: 2,
            cfg: FixedPointConfig::default(),
        };
        let report = verify_subordination_suite(&spec).unwrap();
        assert!(report.pass());
        for row in &report.rows {
            for (_, c) in row.checks() {
                // point masses have no tail beyond rounding of the geometric series
                assert!(c.residual <= c.bound + 1e-12);
            }
        }
    }

    #[test]
    fn rademacher_suite_within_tail_bounds() {
        let x = OperatorModel::rademacher(1).unwrap();
        let spec = SuiteSpec {
            x: &x,
            y: &x,
            grid: imaginary_grid(&[4.0, 6.0, 8.0], 1),
            order: 6,
            n_fold: 2,
            cfg: FixedPointConfig::default(),
        };
        let report = verify_subordination_suite(&spec).unwrap();
        assert!(report.pass(), "{}", report.to_csv());
        // geometric tail Σ_{k≥7} 4^{-k} at b = 4i for the one-variable 𝔥 identity
        let row = &report.rows[0];
        assert!(row.frak_h.residual < (7..200).map(|k| 0.25f64.powi(k)).sum::<f64>());
        assert!(report.to_csv().lines().count() == 4);
    }
}
