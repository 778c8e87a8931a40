//! Cross-checks against brute-force partition sums written independently of the library.

use ovfree::alg::{self, Inclusion, LinearMap};
use ovfree::convolve;
use ovfree::distribution::{make_standard, scalar_type};
use ovfree::scalar::{self, ScalarDist, ScalarPair};
use ovfree::{oracle, DistPair, Family, OVDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All set partitions of `{0..n}` as block lists, by restricted growth strings.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn go(i: usize, n: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            let k = labels.iter().max().map_or(0, |m| m + 1);
            let mut blocks = vec![Vec::new(); k];
            for (pos, &l) in labels.iter().enumerate() {
                blocks[l].push(pos);
            }
            out.push(blocks);
            return;
        }
        let next = labels.iter().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            labels.push(l);
            go(i + 1, n, labels, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), &mut out);
    out
}

fn crossing(v: &[usize], w: &[usize]) -> bool {
    v.iter().any(|&a| {
        v.iter().any(|&c| a < c && w.iter().any(|&b| a < b && b < c) && w.iter().any(|&d| d < a || d > c))
    })
}

fn noncrossing(p: &[Vec<usize>]) -> bool {
    (0..p.len()).all(|i| (0..p.len()).all(|j| i == j || !crossing(&p[i], &p[j])))
}

fn interval(p: &[Vec<usize>]) -> bool {
    p.iter().all(|b| b.last().unwrap() - b[0] + 1 == b.len())
}

/// Outer blocks are not nested under any other block.
fn is_outer(p: &[Vec<usize>], v: &[usize]) -> bool {
    !p.iter().any(|w| w[0] < v[0] && w.iter().any(|&x| x > *v.last().unwrap()))
}

/// Moments `m_1..m_n` from cumulants via a weighted partition sum.
fn moments_from<F>(n: usize, keep: fn(&[Vec<usize>]) -> bool, weight: F) -> Vec<f64>
where
    F: Fn(&[Vec<usize>], &[usize]) -> f64,
{
    (1..=n)
        .map(|k| {
            set_partitions(k)
                .iter()
                .filter(|p| keep(p))
                .map(|p| p.iter().map(|v| weight(p, v)).product::<f64>())
                .sum()
        })
        .collect()
}

/// Inverts a moment-cumulant formula in which the one-block partition contributes `c_n`.
fn cumulants_of<F>(m: &[f64], keep: fn(&[Vec<usize>]) -> bool, weight: F) -> Vec<f64>
where
    F: Fn(&[f64], &[Vec<usize>], &[usize]) -> f64,
{
    let mut c: Vec<f64> = Vec::new();
    for k in 1..=m.len() {
        let rest: f64 = set_partitions(k)
            .iter()
            .filter(|p| p.len() > 1 && keep(p))
            .map(|p| p.iter().map(|v| weight(&c, p, v)).product::<f64>())
            .sum();
        c.push(m[k - 1] - rest);
    }
    c
}

fn free_cumulants(m: &[f64]) -> Vec<f64> {
    cumulants_of(m, noncrossing, |c, _, v| c[v.len() - 1])
}

fn boolean_cumulants(m: &[f64]) -> Vec<f64> {
    cumulants_of(m, interval, |c, _, v| c[v.len() - 1])
}

/// c-free cumulants of `μ` given the free cumulants `kappa` of `ν`.
fn cfree_cumulants(mu: &[f64], kappa: &[f64]) -> Vec<f64> {
    cumulants_of(mu, noncrossing, |c, p, v| {
        if is_outer(p, v) {
            c[v.len() - 1]
        } else {
            kappa[v.len() - 1]
        }
    })
}

fn random_moments(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let atoms: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.random_range(-1.5..1.5), rng.random_range(0.2..1.0)))
        .collect();
    let d = ScalarDist::atomic(&atoms, n).unwrap();
    d.moments().iter().map(|z| z.re).collect()
}

fn scalar_moments(d: &OVDistribution) -> Vec<f64> {
    (1..=d.order()).map(|k| d.scalar_moment(k)[(0, 0)].re).collect()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol * (1.0 + y.abs()), "m{}: {x} vs {y}", k + 1);
    }
}

const ORDER: usize = 6;

#[test]
fn partition_counts() {
    let nc = |n| set_partitions(n).iter().filter(|p| noncrossing(p)).count();
    let int = |n| set_partitions(n).iter().filter(|p| interval(p)).count();
    assert_eq!((1..=6).map(nc).collect::<Vec<_>>(), [1, 2, 5, 14, 42, 132]);
    assert_eq!((1..=6).map(int).collect::<Vec<_>>(), [1, 2, 4, 8, 16, 32]);
}

#[test]
fn free_convolution_matches_noncrossing_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..4 {
        let (mx, my) = (random_moments(&mut rng, ORDER), random_moments(&mut rng, ORDER));
        let k: Vec<f64> = free_cumulants(&mx).iter().zip(free_cumulants(&my)).map(|(a, b)| a + b).collect();
        let expected = moments_from(ORDER, noncrossing, |_, v| k[v.len() - 1]);
        let x = scalar_type(1, &mx).unwrap();
        let y = scalar_type(1, &my).unwrap();
        assert_close(&scalar_moments(&convolve::free(&x, &y).unwrap()), &expected, 1e-10);
    }
}

#[test]
fn boolean_convolution_matches_interval_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..4 {
        let (mx, my) = (random_moments(&mut rng, ORDER), random_moments(&mut rng, ORDER));
        let k: Vec<f64> =
            boolean_cumulants(&mx).iter().zip(boolean_cumulants(&my)).map(|(a, b)| a + b).collect();
        let expected = moments_from(ORDER, interval, |_, v| k[v.len() - 1]);
        let x = scalar_type(1, &mx).unwrap();
        let y = scalar_type(1, &my).unwrap();
        assert_close(&scalar_moments(&convolve::boolean(&x, &y).unwrap()), &expected, 1e-10);
    }
}

#[test]
fn cfree_convolution_matches_nested_partition_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let m: Vec<Vec<f64>> = (0..4).map(|_| random_moments(&mut rng, ORDER)).collect();
        let (k1, k2) = (free_cumulants(&m[1]), free_cumulants(&m[3]));
        let (c1, c2) = (cfree_cumulants(&m[0], &k1), cfree_cumulants(&m[2], &k2));
        let kappa: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| a + b).collect();
        let rc: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
        let expected_mu = moments_from(ORDER, noncrossing, |p, v| {
            if is_outer(p, v) {
                rc[v.len() - 1]
            } else {
                kappa[v.len() - 1]
            }
        });
        let expected_nu = moments_from(ORDER, noncrossing, |_, v| kappa[v.len() - 1]);

        let pair = |a: usize| {
            DistPair::new(scalar_type(1, &m[a]).unwrap(), scalar_type(1, &m[a + 1]).unwrap()).unwrap()
        };
        let out = convolve::cfree(&pair(0), &pair(2)).unwrap();
        assert_close(&scalar_moments(&out.mu), &expected_mu, 1e-10);
        assert_close(&scalar_moments(&out.nu), &expected_nu, 1e-10);
    }
}

#[test]
fn bp_map_turns_boolean_cumulants_into_free_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = random_moments(&mut rng, ORDER);
    let b = boolean_cumulants(&m);
    let expected = moments_from(ORDER, noncrossing, |_, v| b[v.len() - 1]);
    let out = convolve::bp_map(&scalar_type(1, &m).unwrap()).unwrap();
    assert_close(&scalar_moments(&out), &expected, 1e-10);
}

#[test]
fn scalar_layer_matches_partition_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mx, my) = (random_moments(&mut rng, ORDER), random_moments(&mut rng, ORDER));
    let r = scalar::r_transform(&ScalarDist::from_real(&mx).unwrap()).unwrap();
    let k = free_cumulants(&mx);
    for n in 1..=ORDER {
        assert!((r.coeff(n).re - k[n - 1]).abs() < 1e-10, "κ{n}");
    }
    let py = ScalarPair::diagonal(&ScalarDist::from_real(&my).unwrap());
    let kk: Vec<f64> = k.iter().zip(free_cumulants(&my)).map(|(a, b)| a + b).collect();
    let expected = moments_from(ORDER, noncrossing, |_, v| kk[v.len() - 1]);
    let sum = scalar::moments_from_r(&r.add(&scalar::r_transform(&py.mu).unwrap())).unwrap();
    let got: Vec<f64> = sum.moments().iter().map(|z| z.re).collect();
    assert_close(&got, &expected, 1e-10);
    let mult = scalar::mult_cfree(&py, &py).unwrap();
    assert!(mult.mu.max_diff(&mult.nu) < 1e-12);
}

#[test]
fn matrix_semicircle_sum_has_doubled_covariance() {
    let inc = Inclusion::identity(2);
    let s = make_standard(&Family::OvSemicircle(LinearMap::identity(2)), &inc, 4).unwrap();
    let ss = convolve::free(&s, &s).unwrap();
    // η = 2·id: m2 = η(1) = 2, m4 = η(η(1)) + η(1)² = 8
    assert!(alg::max_diff(&ss.scalar_moment(2), &alg::scalar(2, 2.0.into())) < 1e-12);
    assert!(alg::max_diff(&ss.scalar_moment(4), &alg::scalar(2, 8.0.into())) < 1e-12);
    assert!(alg::max_abs(&ss.scalar_moment(3)) < 1e-12);
}

#[test]
fn linearized_convolution_agrees_with_library_oracle_at_d2() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..2 {
        let x = ovfree::random::random_dist(&mut rng, 2, 4).unwrap();
        let y = ovfree::random::random_dist(&mut rng, 2, 4).unwrap();
        let fast = convolve::free(&x, &y).unwrap();
        let slow = oracle::oracle_free(&x, &y).unwrap();
        assert!(fast.moment_distance(&slow).unwrap().iter().all(|&e| e < 1e-10));
        let fast = convolve::boolean(&x, &y).unwrap();
        let slow = oracle::oracle_boolean(&x, &y).unwrap();
        assert!(fast.moment_distance(&slow).unwrap().iter().all(|&e| e < 1e-10));
    }
}
