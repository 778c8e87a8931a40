//! The invariant suite: fixed-protocol acceptance criteria and parameterized residual sweeps.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alg::{self, Inclusion, LinearMap, C64};
use crate::convolve::{self, ArraySpec};
use crate::distribution::{
    check_moment_positivity, conjugation_map, invalid_fixture, make_standard, DistPair, Family,
    Functional, OVDistribution, OperatorModel,
};
use crate::error::{Error, Result};
use crate::oracle::{self, Kind};
use crate::random::{self, ThetaKind};
use crate::scalar::{self, ScalarDist, ScalarPair};
use crate::series::eval_nilpotent;
use crate::subordination::{self, FixedPointConfig, SuiteReport, SuiteSpec};
use crate::transforms::{b_series, cr_series, m_series, r_series};

pub const DEFAULT_SEED: u64 = 20240607;

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn dist_residual(x: &OVDistribution, y: &OVDistribution) -> Result<f64> {
    Ok(max_of(x.moment_distance(y)?))
}

fn pair_residual(x: &DistPair, y: &DistPair) -> Result<f64> {
    let (a, b) = x.distance(y)?;
    Ok(max_of(a).max(max_of(b)))
}

/// One acceptance criterion: `value` is compared with `threshold` in the direction the
/// criterion states, and `detail` records secondary quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {:>2} {}: value {:.3e} threshold {:.3e}{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.value,
            self.threshold,
            if self.detail.is_empty() { String::new() } else { format!(" ({})", self.detail) }
        )
    }
}

fn below(id: usize, name: &'static str, value: f64, threshold: f64, detail: String) -> Criterion {
    Criterion {
        id,
        name,
        value,
        threshold,
        pass: value < threshold,
        detail,
    }
}

fn oracle_trials(
    seed: u64,
    trials: usize,
    order: usize,
    kind: Kind,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res: f64 = 0.0;
    for t in 0..trials {
        let d = 1 + t % 2;
        let x = random::random_dist(&mut rng, d, order)?;
        let y = random::random_dist(&mut rng, d, order)?;
        let (fast, slow) = match kind {
            Kind::Free => (convolve::free(&x, &y)?, oracle::oracle_free(&x, &y)?),
            _ => (convolve::boolean(&x, &y)?, oracle::oracle_boolean(&x, &y)?),
        };
        res = res.max(dist_residual(&fast, &slow)?);
    }
    Ok(res)
}

fn theta_kind(t: usize) -> ThetaKind {
    if t % 3 == 2 {
        ThetaKind::State
    } else {
        ThetaKind::Amplified
    }
}

fn cfree_trials(seed: u64, trials: usize, order: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res: f64 = 0.0;
    for t in 0..trials {
        let d = 1 + t % 2;
        let kind = theta_kind(t);
        let x = random::random_pair(&mut rng, d, order, kind)?;
        let y = random::random_pair(&mut rng, d, order, kind)?;
        res = res.max(pair_residual(&convolve::cfree(&x, &y)?, &oracle::oracle_cfree(&x, &y)?)?);
    }
    Ok(res)
}

/// Transforms of oracle-convolved outputs against sums of input transforms.
fn linearization_trials(seed: u64, trials: usize, order: usize) -> Result<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut rr, mut rb, mut rc): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for t in 0..trials {
        let d = 1 + t % 2;
        let x = random::random_pair(&mut rng, d, order, theta_kind(t))?;
        let y = random::random_pair(&mut rng, d, order, theta_kind(t))?;
        let free = oracle::oracle_free(&x.nu, &y.nu)?;
        rr = rr.max(r_series(&free)?.max_diff(&r_series(&x.nu)?.add(&r_series(&y.nu)?)?));
        let boolean = oracle::oracle_boolean(&x.mu, &y.mu)?;
        rb = rb.max(b_series(&boolean)?.max_diff(&b_series(&x.mu)?.add(&b_series(&y.mu)?)?));
        let c = oracle::oracle_cfree(&x, &y)?;
        rc = rc.max(cr_series(&c)?.max_diff(&cr_series(&x)?.add(&cr_series(&y)?)?));
    }
    Ok((rr, rb, rc))
}

/// BP residuals: `R_{BP(ν)} = B_ν`, `ᶜR_{BP(μ,ν)} = B_μ` and the two series identities.
fn bp_trials(seed: u64, trials: usize, order: usize) -> Result<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [0.0f64; 4];
    for t in 0..trials {
        let d = 1 + t % 2;
        let p = random::random_pair(&mut rng, d, order, theta_kind(t))?;
        let image = convolve::bp_map_pair(&p)?;
        let vals = [
            r_series(&image.nu)?.max_diff(&b_series(&p.nu)?),
            cr_series(&image)?.max_diff(&b_series(&p.mu)?),
            convolve::verify_bbp_identity(&p.nu)?,
            convolve::verify_cfree_bbp_identity(&p)?,
        ];
        for (o, v) in out.iter_mut().zip(vals) {
            *o = o.max(v);
        }
    }
    Ok(out)
}

fn criterion_1(seed: u64) -> Result<Criterion> {
    let start = Instant::now();
    let res = oracle_trials(seed, 50, 6, Kind::Free)?;
    let secs = start.elapsed().as_secs_f64();
    let mut c = below(1, "oracle equivalence (free)", res, 1e-9, format!("50 trials, N = 6, {secs:.1} s"));
    c.pass &= secs < 60.0;
    Ok(c)
}

fn criterion_2(seed: u64) -> Result<Criterion> {
    let res = oracle_trials(seed.wrapping_add(1), 50, 8, Kind::Boolean)?;
    Ok(below(2, "oracle equivalence (Boolean)", res, 1e-9, "50 trials, N = 8".into()))
}

fn criterion_3(seed: u64) -> Result<Criterion> {
    let res = cfree_trials(seed.wrapping_add(2), 30, 5)?;
    Ok(below(3, "oracle equivalence (c-free)", res, 1e-9, "30 pairs, N = 5".into()))
}

fn criterion_4(seed: u64) -> Result<Criterion> {
    let (rr, rb, rc) = linearization_trials(seed.wrapping_add(3), 10, 5)?;
    Ok(below(
        4,
        "linearization closure",
        rr.max(rb).max(rc),
        1e-9,
        format!("R {rr:.1e}, B {rb:.1e}, cR {rc:.1e}"),
    ))
}

fn criterion_5() -> Result<Criterion> {
    let rep = convolve::limit_harness(&ArraySpec::clt(1, 6, 256)?)?;
    let ratios = rep.free_decay_ratios(4);
    let worst = max_of(ratios.iter().map(|r| (r - 0.5).abs()));
    let final4 = rep.at_order(4).last().map(|r| r.free_distance).unwrap_or(f64::NAN);
    let final6 = rep.at_order(6).last().map(|r| r.free_distance).unwrap_or(f64::NAN);
    Ok(Criterion {
        id: 5,
        name: "free CLT decay",
        value: worst,
        threshold: 0.1,
        pass: worst <= 0.1 && final4 < 1e-2,
        detail: format!(
            "ratio deviation from 0.5; final distance {final4:.2e} at order 4, {final6:.2e} at order 6"
        ),
    })
}

fn criterion_6() -> Result<Criterion> {
    let mut res: f64 = 0.0;
    for spec in [ArraySpec::clt(1, 6, 256)?, ArraySpec::clt(2, 5, 128)?, ArraySpec::cfree_clt(1, 6, 256)?] {
        res = res.max(convolve::limit_harness(&spec)?.bp_limit_residual);
    }
    Ok(below(6, "Boolean-free BP on limits", res, 1e-8, "scalar and d = 2 CLT, c-free CLT".into()))
}

fn criterion_7(seed: u64) -> Result<Criterion> {
    let r = bp_trials(seed.wrapping_add(4), 20, 6)?;
    Ok(below(
        7,
        "BP identities",
        max_of(r),
        1e-9,
        format!(
            "R=B {:.1e}, cR=B {:.1e}, F-identity {:.1e}, h-identity {:.1e}",
            r[0], r[1], r[2], r[3]
        ),
    ))
}

const CRITERION_GRID: [f64; 3] = [4.0, 6.0, 8.0];

fn builtin_suites(order: usize, grid: &[f64]) -> Result<Vec<SuiteReport>> {
    let mut out = Vec::new();
    for model in [OperatorModel::rademacher(1)?, OperatorModel::semicircle_d2()?] {
        out.push(subordination::verify_subordination_suite(&SuiteSpec {
            x: &model,
            y: &model,
            grid: subordination::imaginary_grid(grid, model.d_b()),
            order,
            n_fold: 2,
            cfg: FixedPointConfig::default(),
        })?);
    }
    Ok(out)
}

fn criterion_8() -> Result<Criterion> {
    let reports = builtin_suites(6, &CRITERION_GRID)?;
    let rows = || reports.iter().flat_map(|r| r.rows.iter());
    let residual = max_of(rows().map(|r| r.residual));
    let iterations = rows().map(|r| r.iterations).max().unwrap_or(0);
    let gap = rows().map(|r| r.min_im_gap).fold(f64::INFINITY, f64::min);
    let g_ok = rows().all(|r| r.free_g.pass());
    let g_ratio = max_of(rows().map(|r| r.free_g.residual / r.free_g.bound.max(f64::MIN_POSITIVE)));
    Ok(Criterion {
        id: 8,
        name: "subordination numerics",
        value: residual,
        threshold: 1e-10,
        pass: residual < 1e-10 && iterations <= 200 && gap > -1e-10 && g_ok,
        detail: format!(
            "max iterations {iterations}, min eig(Im ω − Im b) {gap:.3e}, G residual/bound {g_ratio:.3}"
        ),
    })
}

fn suite_ratio(reports: &[SuiteReport]) -> (f64, bool) {
    let mut ratio: f64 = 0.0;
    let mut ok = true;
    for r in reports.iter().flat_map(|r| r.rows.iter()) {
        for (_, c) in r.checks() {
            ratio = ratio.max(c.residual / (c.bound + subordination::NUMERIC_SLACK));
            ok &= c.pass();
        }
    }
    (ratio, ok)
}

fn criterion_9(seed: u64) -> Result<Criterion> {
    let mut reports = builtin_suites(6, &CRITERION_GRID)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(5));
    for d in 1..=2 {
        let x = random::random_model(&mut rng, d, ThetaKind::Amplified)?;
        let y = random::random_model(&mut rng, d, ThetaKind::Amplified)?;
        reports.push(subordination::verify_subordination_suite(&SuiteSpec {
            x: &x,
            y: &y,
            grid: subordination::imaginary_grid(&CRITERION_GRID, d),
            order: 6,
            n_fold: 3,
            cfg: FixedPointConfig::default(),
        })?);
    }
    let (ratio, ok) = suite_ratio(&reports);
    Ok(Criterion {
        id: 9,
        name: "identity suite",
        value: ratio,
        threshold: 1.0,
        pass: ok,
        detail: "largest residual / (tail bound + slack)".into(),
    })
}

/// Least half-plane margins over random models and points at levels 1 and 2.
fn half_plane_sweep(seed: u64, points: usize) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut g_margin, mut f_margin) = (f64::INFINITY, f64::INFINITY);
    let mut done = 0;
    while done < points {
        let d = 1 + done % 2;
        let model = random::random_model(&mut rng, d, theta_kind(done))?;
        for level in 1..=2 {
            let b = random::random_half_plane(&mut rng, level * d, 0.05);
            for which in [Functional::Expectation, Functional::Theta] {
                let (g, f) = subordination::half_plane_margins(&model, which, &b)?;
                g_margin = g_margin.min(g);
                f_margin = f_margin.min(f);
            }
            done += 1;
        }
    }
    Ok((g_margin, f_margin))
}

fn criterion_10(seed: u64) -> Result<Criterion> {
    let (g, f) = half_plane_sweep(seed.wrapping_add(6), 200)?;
    let value = g.min(f);
    Ok(Criterion {
        id: 10,
        name: "half-plane invariants",
        value,
        threshold: -subordination::HALF_PLANE_SLACK,
        pass: value > -subordination::HALF_PLANE_SLACK,
        detail: format!("min eig(−Im G) {g:.3e}, min eig(Im F − Im b) {f:.3e}"),
    })
}

/// Direct-sum and scalar-similarity residuals of the amplified M-series on nilpotents.
fn nc_sweep(seed: u64, trials: usize, order: usize) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ds, mut sim): (f64, f64) = (0.0, 0.0);
    for t in 0..trials {
        let d = 1 + t % 2;
        let p = random::random_pair(&mut rng, d, order, theta_kind(t))?;
        for dist in [&p.mu, &p.nu] {
            let m = m_series(dist);
            let dd = dist.d_d();
            let a = random::random_nilpotent(&mut rng, 2, d);
            let a2 = random::random_nilpotent(&mut rng, 2, d);
            let joint = eval_nilpotent(&m, &alg::direct_sum(&a, &a2))?;
            let split = alg::direct_sum(&eval_nilpotent(&m, &a)?, &eval_nilpotent(&m, &a2)?);
            ds = ds.max(alg::max_diff(&joint, &split));
            let n = 3;
            let a3 = random::random_nilpotent(&mut rng, n, d);
            let s = random::random_similarity(&mut rng, n);
            let s_inv = alg::inverse(&s)?;
            let conj = alg::kron(&s, &alg::eye(d)) * &a3 * alg::kron(&s_inv, &alg::eye(d));
            let lhs = eval_nilpotent(&m, &conj)?;
            let rhs = alg::kron(&s, &alg::eye(dd)) * eval_nilpotent(&m, &a3)? * alg::kron(&s_inv, &alg::eye(dd));
            sim = sim.max(alg::max_diff(&lhs, &rhs));
        }
    }
    Ok((ds, sim))
}

fn criterion_11(seed: u64) -> Result<Criterion> {
    let (ds, sim) = nc_sweep(seed.wrapping_add(7), 10, 5)?;
    Ok(below(
        11,
        "NC-function axioms",
        ds.max(sim),
        1e-9,
        format!("direct sums {ds:.1e}, similarity {sim:.1e}"),
    ))
}

/// Least eigenvalues of the positivity test for each built-in family.
pub fn positivity_sweep(cutoff: usize) -> Result<Vec<(String, f64)>> {
    let order = 2 * cutoff;
    let eta = conjugation_map(&alg::from_real(2, &[1.0, 0.5, 0.0, 0.7]));
    let fams: Vec<(&str, Family, usize)> = vec![
        ("point-mass", Family::PointMass(alg::from_real(2, &[0.5, 0.2, 0.2, -0.3])), 2),
        ("rademacher", Family::Rademacher, 2),
        ("semicircle", Family::OvSemicircle(LinearMap::identity(2)), 2),
        ("semicircle-conj", Family::OvSemicircle(eta), 2),
        ("arcsine", Family::ScalarArcsine, 1),
        ("free-poisson", Family::ScalarFreePoisson(0.6), 1),
    ];
    let mut out = Vec::new();
    for (name, fam, d) in fams {
        let dist = make_standard(&fam, &Inclusion::identity(d), order)?;
        out.push((name.to_string(), check_moment_positivity(&dist, cutoff)?.min_eigenvalue));
    }
    let model = OperatorModel::semicircle_d2()?;
    let dist = model.moments(Functional::Expectation, order)?;
    out.push(("semicircle-d2-model".into(), check_moment_positivity(&dist, cutoff)?.min_eigenvalue));
    Ok(out)
}

fn criterion_12() -> Result<Criterion> {
    let sweep = positivity_sweep(3)?;
    let least = sweep.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let bad = check_moment_positivity(&invalid_fixture(6)?, 3)?.min_eigenvalue;
    Ok(Criterion {
        id: 12,
        name: "positivity pipeline",
        value: least,
        threshold: -1e-8,
        pass: least >= -1e-8 && (bad + 1.0).abs() < 1e-6,
        detail: format!("invalid fixture least eigenvalue {bad:.6}"),
    })
}

/// Homomorphism and shift-lemma residuals over seeded pairs with nonzero means.
fn scalar_sweep(seed: u64, pairs: usize, order: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res: f64 = 0.0;
    for _ in 0..pairs / 2 {
        let x = scalar::random_pair(&mut rng, order);
        let y = scalar::random_pair(&mut rng, order);
        res = res.max(scalar::verify_bp_homomorphism(&x, &y)?.max());
    }
    Ok(res)
}

fn delta_fixture_residual(order: usize) -> Result<f64> {
    let mut res: f64 = 0.0;
    for (a, b) in [(2.0, -1.5), (0.5, 3.0), (1.0, 1.0)] {
        let (da, db) = (ScalarDist::delta(a, order), ScalarDist::delta(b, order));
        let t = scalar::t_transform(&da)?;
        res = res.max(t.max_diff(&scalar::PowerSeries::constant(C64::new(a, 0.0), order - 1)));
        let prod = scalar::mult_free(&da, &db)?;
        let expect = ScalarDist::delta(a * b, order);
        res = res.max(
            prod.moments()
                .iter()
                .zip(expect.moments())
                .map(|(x, y)| (x - y).norm() / y.norm().max(1.0))
                .fold(0.0, f64::max),
        );
        let pair = ScalarPair::diagonal(&da);
        let bp = scalar::bp_pair(&pair)?;
        res = res.max(bp.max_diff(&pair));
    }
    Ok(res)
}

fn criterion_13(seed: u64) -> Result<Criterion> {
    let res = scalar_sweep(seed.wrapping_add(8), 20, 8)?;
    let delta = delta_fixture_residual(8)?;
    Ok(Criterion {
        id: 13,
        name: "scalar multiplicative BP",
        value: res,
        threshold: 1e-9,
        pass: res < 1e-9 && delta < 1e-13,
        detail: format!("δ fixtures {delta:.1e}"),
    })
}

fn criterion_14() -> Result<Criterion> {
    let inc = Inclusion::identity(1);
    let arc = make_standard(&Family::ScalarArcsine, &inc, 6)?;
    let rep = convolve::free_power_divisibility_check(&arc, 2, 2)?;
    Ok(Criterion {
        id: 14,
        name: "Boolean half-power divisibility",
        value: rep.cp.min_eigenvalue,
        threshold: -1e-8,
        pass: rep.cp.pass,
        detail: format!("root residual {:.1e}", rep.root_residual),
    })
}

/// Run acceptance criterion `id` (1–14).
pub fn criterion(id: usize, seed: u64) -> Result<Criterion> {
    match id {
        1 => criterion_1(seed),
        2 => criterion_2(seed),
        3 => criterion_3(seed),
        4 => criterion_4(seed),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(seed),
        8 => criterion_8(),
        9 => criterion_9(seed),
        10 => criterion_10(seed),
        11 => criterion_11(seed),
        12 => criterion_12(),
        13 => criterion_13(seed),
        14 => criterion_14(),
        _ => Err(Error::Usage(format!("no criterion {id}; valid ids are 1-14"))),
    }
}

pub const CRITERIA: std::ops::RangeInclusive<usize> = 1..=14;

/// Parameterized residual sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Oracle,
    Linearization,
    Bp,
    Subordination,
    HalfPlane,
    Nc,
    Positivity,
    Scalar,
    Limits,
    All,
}

impl Suite {
    pub const EACH: [Suite; 9] = [
        Suite::Oracle,
        Suite::Linearization,
        Suite::Bp,
        Suite::Subordination,
        Suite::HalfPlane,
        Suite::Nc,
        Suite::Positivity,
        Suite::Scalar,
        Suite::Limits,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Oracle => "oracle",
            Suite::Linearization => "linearization",
            Suite::Bp => "bp",
            Suite::Subordination => "subordination",
            Suite::HalfPlane => "half-plane",
            Suite::Nc => "nc",
            Suite::Positivity => "positivity",
            Suite::Scalar => "scalar",
            Suite::Limits => "limits",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .iter()
            .chain(std::iter::once(&Suite::All))
            .find(|x| x.name() == s)
            .copied()
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown suite '{s}'; expected one of all, oracle, linearization, bp, subordination, half-plane, nc, positivity, scalar, limits"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub order: usize,
    pub dim: usize,
    pub seed: u64,
    pub trials: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            order: 5,
            dim: 1,
            seed: DEFAULT_SEED,
            trials: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub suite: &'static str,
    pub check: String,
    pub residual: f64,
    pub threshold: f64,
}

impl ResidualRow {
    pub fn pass(&self) -> bool {
        self.residual <= self.threshold
    }
}

fn row(suite: Suite, check: &str, residual: f64, threshold: f64) -> ResidualRow {
    ResidualRow {
        suite: suite.name(),
        check: check.into(),
        residual,
        threshold,
    }
}

const SUITE_TOL: f64 = 1e-8;

fn dist_rng<R: Rng>(rng: &mut R, o: &VerifyOptions, t: usize) -> Result<DistPair> {
    random::random_pair(rng, o.dim, o.order, theta_kind(t))
}

fn run_one(suite: Suite, o: &VerifyOptions) -> Result<Vec<ResidualRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut rows = Vec::new();
    match suite {
        Suite::Oracle => {
            let (mut f, mut b, mut c): (f64, f64, f64) = (0.0, 0.0, 0.0);
            for t in 0..o.trials {
                let x = dist_rng(&mut rng, o, t)?;
                let y = dist_rng(&mut rng, o, t)?;
                f = f.max(dist_residual(&convolve::free(&x.nu, &y.nu)?, &oracle::oracle_free(&x.nu, &y.nu)?)?);
                b = b.max(dist_residual(&convolve::boolean(&x.mu, &y.mu)?, &oracle::oracle_boolean(&x.mu, &y.mu)?)?);
                c = c.max(pair_residual(&convolve::cfree(&x, &y)?, &oracle::oracle_cfree(&x, &y)?)?);
            }
            rows.push(row(suite, "free", f, SUITE_TOL));
            rows.push(row(suite, "boolean", b, SUITE_TOL));
            rows.push(row(suite, "cfree", c, SUITE_TOL));
        }
        Suite::Linearization => {
            let mut r = [0.0f64; 3];
            for t in 0..o.trials {
                let x = dist_rng(&mut rng, o, t)?;
                let y = dist_rng(&mut rng, o, t)?;
                let free = oracle::oracle_free(&x.nu, &y.nu)?;
                r[0] = r[0].max(r_series(&free)?.max_diff(&r_series(&x.nu)?.add(&r_series(&y.nu)?)?));
                let boolean = oracle::oracle_boolean(&x.mu, &y.mu)?;
                r[1] = r[1].max(b_series(&boolean)?.max_diff(&b_series(&x.mu)?.add(&b_series(&y.mu)?)?));
                let c = oracle::oracle_cfree(&x, &y)?;
                r[2] = r[2].max(cr_series(&c)?.max_diff(&cr_series(&x)?.add(&cr_series(&y)?)?));
            }
            for (name, v) in ["r_additive", "b_additive", "cr_additive"].iter().zip(r) {
                rows.push(row(suite, name, v, SUITE_TOL));
            }
        }
        Suite::Bp => {
            let mut out = [0.0f64; 4];
            for t in 0..o.trials {
                let p = dist_rng(&mut rng, o, t)?;
                let image = convolve::bp_map_pair(&p)?;
                let vals = [
                    r_series(&image.nu)?.max_diff(&b_series(&p.nu)?),
                    cr_series(&image)?.max_diff(&b_series(&p.mu)?),
                    convolve::verify_bbp_identity(&p.nu)?,
                    convolve::verify_cfree_bbp_identity(&p)?,
                ];
                for (a, v) in out.iter_mut().zip(vals) {
                    *a = a.max(v);
                }
            }
            for (name, v) in ["r_of_bp", "cr_of_bp", "f_identity", "h_identity"].iter().zip(out) {
                rows.push(row(suite, name, v, SUITE_TOL));
            }
        }
        Suite::Subordination => {
            let x = random::random_model(&mut rng, o.dim, ThetaKind::Amplified)?;
            let y = random::random_model(&mut rng, o.dim, ThetaKind::Amplified)?;
            let m = x.x_norm() + y.x_norm();
            let y0 = subordination::auto_grid(m, o.dim, o.order, 1.0);
            let report = subordination::verify_subordination_suite(&SuiteSpec {
                x: &x,
                y: &y,
                grid: subordination::imaginary_grid(&[y0, 1.5 * y0], o.dim),
                order: o.order,
                n_fold: 2,
                cfg: FixedPointConfig::default(),
            })?;
            let fp = max_of(report.rows.iter().map(|r| r.residual));
            rows.push(row(suite, "fixed_point", fp, 1e-10));
            let gap = report.rows.iter().map(|r| r.min_im_gap).fold(f64::INFINITY, f64::min);
            rows.push(row(suite, "im_gap", -gap, subordination::HALF_PLANE_SLACK));
            for (i, name) in subordination::CHECK_NAMES.iter().enumerate() {
                let (res, bound) = report
                    .rows
                    .iter()
                    .map(|r| r.checks()[i].1)
                    .fold((0.0f64, 0.0f64), |(a, b), c| (a.max(c.residual), b.max(c.bound)));
                rows.push(row(suite, name, res, bound + subordination::NUMERIC_SLACK));
            }
            let bridge = subordination::series_bridge_residual(&x, Functional::Expectation, o.order)?
                .max(subordination::series_bridge_residual(&x, Functional::Theta, o.order)?);
            rows.push(row(suite, "series_bridge", bridge, 1e-6));
            let b1 = random::random_half_plane(&mut rng, o.dim, 0.5);
            let b2 = random::random_half_plane(&mut rng, o.dim, 0.5);
            let ds = subordination::direct_sum_residual(&x, 2, &b1, &b2, &FixedPointConfig::default())?;
            rows.push(row(suite, "omega_direct_sum", ds, SUITE_TOL));
        }
        Suite::HalfPlane => {
            let (g, f) = half_plane_sweep(o.seed, 20 * o.trials)?;
            rows.push(row(suite, "im_g_negative", -g, subordination::HALF_PLANE_SLACK));
            rows.push(row(suite, "im_f_dominates", -f, subordination::HALF_PLANE_SLACK));
        }
        Suite::Nc => {
            let (ds, sim) = nc_sweep(o.seed, o.trials, o.order)?;
            rows.push(row(suite, "direct_sum", ds, 1e-9));
            rows.push(row(suite, "similarity", sim, 1e-9));
        }
        Suite::Positivity => {
            let cutoff = (o.order / 2).clamp(1, 3);
            for (name, v) in positivity_sweep(cutoff)? {
                rows.push(row(suite, &name, -v, SUITE_TOL));
            }
            for t in 0..o.trials {
                let p = dist_rng(&mut rng, o, t)?;
                if 2 * cutoff <= o.order {
                    let v = check_moment_positivity(&p.mu, cutoff)?
                        .min_eigenvalue
                        .min(check_moment_positivity(&p.nu, cutoff)?.min_eigenvalue);
                    rows.push(row(suite, &format!("random_model_{t}"), -v, SUITE_TOL));
                }
            }
        }
        Suite::Scalar => {
            let n = o.order.max(2);
            rows.push(row(suite, "homomorphism", scalar_sweep(o.seed, 2 * o.trials, n)?, 1e-9));
            rows.push(row(suite, "delta_fixtures", delta_fixture_residual(n)?, 1e-13));
            rows.push(row(suite, "operator_agreement", scalar_agreement(o.seed, o.trials, n)?, 1e-10));
        }
        Suite::Limits => {
            let rep = convolve::limit_harness(&ArraySpec::clt(o.dim, o.order, 256)?)?;
            rows.push(row(suite, "bp_limit", rep.bp_limit_residual, SUITE_TOL));
            rows.push(row(suite, "condition4", rep.condition4_residual, 1e-6));
            rows.push(row(suite, "limit_cp", -rep.limit_cp.min_eigenvalue, SUITE_TOL));
            if let Some(dist) = &rep.free_target_distance {
                rows.push(row(suite, "free_target", max_of(dist.iter().copied()), 1e-6));
            }
        }
        Suite::All => unreachable!("expanded by run_suite"),
    }
    Ok(rows)
}

/// Scalar layer against the operator layer at `d = 1`: free and Boolean convolution and BP.
pub fn scalar_agreement(seed: u64, trials: usize, order: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let to_op = |s: &ScalarDist| -> Result<OVDistribution> {
        let m: Vec<f64> = s.moments().iter().map(|z| z.re).collect();
        crate::distribution::scalar_type(1, &m)
    };
    let cmp = |s: &ScalarDist, d: &OVDistribution| -> f64 {
        (1..=order)
            .map(|k| (s.moments()[k - 1] - d.scalar_moment(k)[(0, 0)]).norm())
            .fold(0.0, f64::max)
    };
    let mut res: f64 = 0.0;
    for _ in 0..trials {
        let x = scalar::random_atomic(&mut rng, 3, -1.0, 1.0, order);
        let y = scalar::random_atomic(&mut rng, 3, -1.0, 1.0, order);
        let (ox, oy) = (to_op(&x)?, to_op(&y)?);
        let free_s = scalar::moments_from_r(&scalar::r_transform(&x)?.add(&scalar::r_transform(&y)?))?;
        res = res.max(cmp(&free_s, &convolve::free(&ox, &oy)?));
        let bool_s = scalar::moments_from_b(&scalar::b_transform(&x)?.add(&scalar::b_transform(&y)?))?;
        res = res.max(cmp(&bool_s, &convolve::boolean(&ox, &oy)?));
        res = res.max(cmp(&scalar::bp(&x)?, &convolve::bp_map(&ox)?));
    }
    Ok(res)
}

/// Run a suite (or all of them) and return one row per check.
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<ResidualRow>> {
    if opts.dim == 0 || opts.order == 0 || opts.trials == 0 {
        return Err(Error::Usage("order, dim and trials must be positive".into()));
    }
    match suite {
        Suite::All => {
            let mut rows = Vec::new();
            for s in Suite::EACH {
                rows.extend(run_one(s, opts)?);
            }
            Ok(rows)
        }
        s => run_one(s, opts),
    }
}

pub fn rows_to_csv(rows: &[ResidualRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.suite.to_string(),
                r.check.clone(),
                crate::io::fmt_f64(r.residual),
                crate::io::fmt_f64(r.threshold),
                if r.pass() { "pass".into() } else { "fail".into() },
            ]
        })
        .collect();
    crate::io::csv(&["suite", "check", "residual", "threshold", "status"], &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!(matches!("nope".parse::<Suite>(), Err(Error::Usage(_))));
    }

    #[test]
    fn quick_suites_pass() {
        let opts = VerifyOptions {
            order: 4,
            dim: 1,
            seed: 3,
            trials: 2,
        };
        for s in [Suite::Oracle, Suite::Bp, Suite::Nc, Suite::Scalar, Suite::Positivity] {
            let rows = run_suite(s, &opts).unwrap();
            assert!(rows.iter().all(|r| r.pass()), "{}", rows_to_csv(&rows));
        }
    }

    #[test]
    fn cheap_criteria() {
        for id in [12, 14] {
            let c = criterion(id, DEFAULT_SEED).unwrap();
            assert!(c.pass, "{c}");
        }
        assert!(criterion(15, 0).is_err());
    }

    #[test]
    fn scalar_layer_agrees_with_operator_layer() {
        assert!(scalar_agreement(1, 3, 6).unwrap() < 1e-10);
    }
}
