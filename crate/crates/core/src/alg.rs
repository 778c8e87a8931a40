//! Dense complex matrix algebra, unital inclusions and half-plane utilities.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// An element of `M_d`, used for both the coefficient algebra B and the target D.
pub type Mat = DMatrix<C64>;

pub const DEFAULT_TOL: f64 = 1e-10;
/// Inverses with a larger condition number are reported as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(d: usize) -> Mat {
    Mat::zeros(d, d)
}

pub fn eye(d: usize) -> Mat {
    Mat::identity(d, d)
}

pub fn scalar(d: usize, z: C64) -> Mat {
    Mat::from_diagonal_element(d, d, z)
}

/// Matrix unit `E_{pq}` with flat index `u = p*d + q`.
pub fn unit(d: usize, u: usize) -> Mat {
    let mut m = zeros(d);
    m[(u / d, u % d)] = C64::new(1.0, 0.0);
    m
}

pub fn from_rows(rows: &[&[C64]]) -> Mat {
    let n = rows.len();
    Mat::from_fn(n, rows.first().map_or(0, |r| r.len()), |i, j| rows[i][j])
}

pub fn from_real(d: usize, vals: &[f64]) -> Mat {
    Mat::from_fn(d, d, |i, j| C64::new(vals[i * d + j], 0.0))
}

/// Row-major flattening; `unit(d, u)` has a single one at position `u`.
pub fn to_row_major(a: &Mat) -> Vec<C64> {
    let (r, cdim) = a.shape();
    let mut out = Vec::with_capacity(r * cdim);
    for i in 0..r {
        for j in 0..cdim {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub fn from_row_major(d: usize, v: &[C64]) -> Mat {
    Mat::from_row_slice(d, d, v)
}

pub fn adjoint(a: &Mat) -> Mat {
    a.adjoint()
}

pub fn re_part(a: &Mat) -> Mat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn im_part(a: &Mat) -> Mat {
    (a - a.adjoint()) * C64::new(0.0, -0.5)
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Operator (spectral) norm.
pub fn op_norm(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

pub fn is_square(a: &Mat) -> bool {
    a.nrows() == a.ncols()
}

fn ensure_square(a: &Mat, what: &str) -> Result<()> {
    if is_square(a) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what}: expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// Eigen-decomposition of the Hermitian part of `h` by cyclic complex Jacobi rotations:
/// eigenvalues ascending, eigenvectors as matching columns.
pub fn hermitian_eigen(h: &Mat) -> (Vec<f64>, Mat) {
    let n = h.nrows();
    let mut a = re_part(h);
    let mut v = eye(n);
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let mut off = 0.0;
        for q in 0..n {
            for p in 0..q {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off <= 1e-32 * scale {
            break;
        }
        for q in 1..n {
            for p in 0..q {
                let c = a[(p, q)];
                let r = c.norm();
                if r <= 1e-300 {
                    continue;
                }
                let ph = (c / r).conj();
                let (app, aqq) = (a[(p, p)].re, a[(q, q)].re);
                let theta = 0.5 * (2.0 * r).atan2(app - aqq);
                let (sn, cs) = theta.sin_cos();
                // U = diag(…, ph at q) · rotation(p, q)
                let u_pp = C64::new(cs, 0.0);
                let u_pq = C64::new(-sn, 0.0);
                let u_qp = ph * sn;
                let u_qq = ph * cs;
                for k in 0..n {
                    let (hp, hq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = hp * u_pp + hq * u_qp;
                    a[(k, q)] = hp * u_pq + hq * u_qq;
                    let (vp, vq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vp * u_pp + vq * u_qp;
                    v[(k, q)] = vp * u_pq + vq * u_qq;
                }
                for k in 0..n {
                    let (hp, hq) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = u_pp.conj() * hp + u_qp.conj() * hq;
                    a[(q, k)] = u_pq.conj() * hp + u_qq.conj() * hq;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let vals = idx.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = Mat::from_fn(n, n, |r, c| v[(r, idx[c])]);
    (vals, vecs)
}

/// Eigenvalues of the Hermitian part of `h`, ascending.
pub fn hermitian_eigenvalues(h: &Mat) -> Vec<f64> {
    hermitian_eigen(h).0
}

pub fn least_eigenvalue(h: &Mat) -> f64 {
    hermitian_eigenvalues(h).first().copied().unwrap_or(0.0)
}

pub fn greatest_eigenvalue(h: &Mat) -> f64 {
    hermitian_eigenvalues(h).last().copied().unwrap_or(0.0)
}

pub fn is_selfadjoint(a: &Mat, tol: f64) -> bool {
    max_diff(a, &a.adjoint()) <= tol * (1.0 + max_abs(a))
}

pub fn in_upper_half_plane(a: &Mat, eps: f64) -> Result<bool> {
    ensure_square(a, "in_upper_half_plane")?;
    Ok(least_eigenvalue(&im_part(a)) >= eps)
}

/// Inverse with a condition-number guard.
pub fn inverse(a: &Mat) -> Result<Mat> {
    ensure_square(a, "inverse")?;
    let sv = a.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) || smax / smin > MAX_CONDITION {
        return Err(Error::Singular(format!(
            "condition number {:.3e} exceeds {MAX_CONDITION:.0e}",
            smax / smin
        )));
    }
    a.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("LU factorization failed".into()))
}

/// Inverse of an element of the upper half-plane; the result lies in the lower half-plane.
pub fn invert_half_plane(a: &Mat) -> Result<Mat> {
    ensure_square(a, "invert_half_plane")?;
    if least_eigenvalue(&im_part(a)) <= 0.0 {
        return Err(Error::Singular(
            "imaginary part is not positive definite".into(),
        ));
    }
    inverse(a)
}

/// Inverse through `a = sqrt(v) (s + i) sqrt(v)` with `v = Im a` and
/// `s = v^{-1/2} Re a v^{-1/2}`; only defined on the upper half-plane.
pub fn invert_half_plane_via_sqrt(a: &Mat) -> Result<Mat> {
    ensure_square(a, "invert_half_plane_via_sqrt")?;
    let n = a.nrows();
    let v = im_part(a);
    let (vals, q) = hermitian_eigen(&v);
    if vals.iter().any(|&l| l <= 0.0) {
        return Err(Error::Singular(
            "imaginary part is not positive definite".into(),
        ));
    }
    let inv_sqrt_diag = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        vals.iter().map(|l| C64::new(1.0 / l.sqrt(), 0.0)),
    ));
    let v_inv_sqrt = &q * inv_sqrt_diag * q.adjoint();
    let s = &v_inv_sqrt * re_part(a) * &v_inv_sqrt;
    // (s + i)^{-1} = (s - i)(s^2 + 1)^{-1} for selfadjoint s
    let s2p1 = &s * &s + eye(n);
    let inner = (&s - scalar(n, C64::i())) * inverse(&s2p1)?;
    Ok(&v_inv_sqrt * inner * &v_inv_sqrt)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Block `(r, s)` of size `d` of a matrix viewed as an `n x n` block matrix.
pub fn block(a: &Mat, d: usize, r: usize, s: usize) -> Mat {
    a.view((r * d, s * d), (d, d)).into_owned()
}

pub fn set_block(a: &mut Mat, d: usize, r: usize, s: usize, b: &Mat) {
    a.view_mut((r * d, s * d), (d, d)).copy_from(b);
}

pub fn direct_sum(a: &Mat, b: &Mat) -> Mat {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = Mat::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

/// How B = M_{d_B} sits inside D = M_{d_D}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    Identity,
    /// `b ↦ 1_r ⊗ b`, block-diagonal with `r` copies.
    Amplify(usize),
}

/// A unital *-inclusion `ι: M_{d_B} → M_{d_D}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inclusion {
    pub d_b: usize,
    pub d_d: usize,
    pub embed: Embedding,
}

impl Inclusion {
    pub fn identity(d: usize) -> Self {
        Inclusion {
            d_b: d,
            d_d: d,
            embed: Embedding::Identity,
        }
    }

    pub fn amplify(d: usize, r: usize) -> Self {
        if r == 1 {
            return Self::identity(d);
        }
        Inclusion {
            d_b: d,
            d_d: d * r,
            embed: Embedding::Amplify(r),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.embed {
            Embedding::Identity => self.d_b,
            Embedding::Amplify(r) => self.d_b * r,
        };
        if self.d_b == 0 || self.d_d != expected {
            return Err(Error::Dimension(format!(
                "inclusion {:?} is inconsistent with d_B = {}, d_D = {}",
                self.embed, self.d_b, self.d_d
            )));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.d_b == self.d_d
    }

    /// The identity inclusion of B into itself.
    pub fn base(&self) -> Self {
        Self::identity(self.d_b)
    }

    pub fn apply(&self, b: &Mat) -> Mat {
        match self.embed {
            Embedding::Identity => b.clone(),
            Embedding::Amplify(r) => {
                let d = self.d_b;
                let mut out = zeros(d * r);
                for k in 0..r {
                    set_block(&mut out, d, k, k, b);
                }
                out
            }
        }
    }

    /// Inverse of `apply` on the range of ι; reports how far `m` is from that range.
    pub fn pull_back(&self, m: &Mat) -> (Mat, f64) {
        match self.embed {
            Embedding::Identity => (m.clone(), 0.0),
            Embedding::Amplify(_) => {
                let b = block(m, self.d_b, 0, 0);
                let res = max_diff(&self.apply(&b), m);
                (b, res)
            }
        }
    }

    /// Largest defect of ι(1) = 1, ι(xy) = ι(x)ι(y), ι(x*) = ι(x)* over matrix units.
    pub fn homomorphism_residual(&self) -> f64 {
        let d = self.d_b;
        let mut res = max_diff(&self.apply(&eye(d)), &eye(self.d_d));
        for u in 0..d * d {
            let eu = unit(d, u);
            res = res.max(max_diff(&self.apply(&eu.adjoint()), &self.apply(&eu).adjoint()));
            for v in 0..d * d {
                let ev = unit(d, v);
                res = res.max(max_diff(
                    &self.apply(&(&eu * &ev)),
                    &(self.apply(&eu) * self.apply(&ev)),
                ));
            }
        }
        res
    }
}

/// A linear map `M_{d_in} → M_{d_out}` stored as a `d_out² × d_in²` matrix acting on
/// row-major vectorizations.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub d_in: usize,
    pub d_out: usize,
    pub matrix: Mat,
}

impl LinearMap {
    pub fn new(d_in: usize, d_out: usize, matrix: Mat) -> Result<Self> {
        if matrix.nrows() != d_out * d_out || matrix.ncols() != d_in * d_in {
            return Err(Error::Dimension(format!(
                "linear map matrix must be {}x{}, got {}x{}",
                d_out * d_out,
                d_in * d_in,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(LinearMap {
            d_in,
            d_out,
            matrix,
        })
    }

    pub fn from_fn(d_in: usize, d_out: usize, f: impl Fn(&Mat) -> Mat) -> Self {
        let mut matrix = Mat::zeros(d_out * d_out, d_in * d_in);
        for u in 0..d_in * d_in {
            let img = to_row_major(&f(&unit(d_in, u)));
            for (r, z) in img.into_iter().enumerate() {
                matrix[(r, u)] = z;
            }
        }
        LinearMap {
            d_in,
            d_out,
            matrix,
        }
    }

    /// `a ↦ Σ K_l^* a K_l` with each `K_l` of shape `d_in × d_out`.
    pub fn from_kraus(d_in: usize, d_out: usize, kraus: &[Mat]) -> Result<Self> {
        for k in kraus {
            if k.shape() != (d_in, d_out) {
                return Err(Error::Dimension(format!(
                    "Kraus operator must be {d_in}x{d_out}, got {}x{}",
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        Ok(Self::from_fn(d_in, d_out, |a| {
            kraus
                .iter()
                .fold(zeros(d_out), |acc, k| acc + k.adjoint() * a * k)
        }))
    }

    pub fn identity(d: usize) -> Self {
        LinearMap {
            d_in: d,
            d_out: d,
            matrix: eye(d * d),
        }
    }

    pub fn apply(&self, a: &Mat) -> Mat {
        let v = nalgebra::DVector::from_vec(to_row_major(a));
        let w = &self.matrix * v;
        from_row_major(self.d_out, w.as_slice())
    }

    /// Choi matrix `Σ_{ij} e_ij ⊗ Φ(e_ij)`; PSD iff the map is completely positive.
    pub fn choi(&self) -> Mat {
        let (n, m) = (self.d_in, self.d_out);
        let mut out = zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let img = self.apply(&unit(n, i * n + j));
                set_block(&mut out, m, i, j, &img);
            }
        }
        out
    }

    pub fn cp_min_eigenvalue(&self) -> f64 {
        least_eigenvalue(&self.choi())
    }

    pub fn unital_residual(&self) -> f64 {
        max_diff(&self.apply(&eye(self.d_in)), &eye(self.d_out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn half_plane_membership() {
        let i1 = scalar(2, C64::i());
        assert!(in_upper_half_plane(&i1, 0.5).unwrap());
        assert!(!in_upper_half_plane(&eye(2), 1e-6).unwrap());
        let a = from_rows(&[&[c(0.0, 1.0), c(10.0, 0.0)], &[c(0.0, 0.0), c(0.0, 1.0)]]);
        // Im a = [[1, -5i], [5i, 1]] has eigenvalues 1 ± 5
        assert_abs_diff_eq!(least_eigenvalue(&im_part(&a)), -4.0, epsilon = 1e-12);
        assert!(!in_upper_half_plane(&a, 0.5).unwrap());
        let rect = Mat::zeros(2, 3);
        assert!(matches!(
            in_upper_half_plane(&rect, 0.1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn inverse_scalar_cases() {
        let inv = invert_half_plane(&scalar(2, C64::i())).unwrap();
        assert!(max_diff(&inv, &scalar(2, -C64::i())) < 1e-15);
        let inv = invert_half_plane(&scalar(2, c(1.0, 1.0))).unwrap();
        assert!(max_diff(&inv, &scalar(2, c(0.5, -0.5))) < 1e-15);
        assert_abs_diff_eq!(greatest_eigenvalue(&im_part(&inv)), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn inverse_two_paths_agree() {
        let a = from_rows(&[&[c(0.0, 2.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(0.0, 1.0)]]);
        let direct = invert_half_plane(&a).unwrap();
        let formula = invert_half_plane_via_sqrt(&a).unwrap();
        assert!(max_diff(&direct, &formula) < 1e-12);
        assert!(max_diff(&(&a * &direct), &eye(2)) < 1e-12);
        assert!(greatest_eigenvalue(&im_part(&direct)) < 0.0);
    }

    #[test]
    fn singular_input_is_reported() {
        let a = from_rows(&[&[c(1.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(1.0, 0.0)]]);
        assert!(matches!(inverse(&a), Err(Error::Singular(_))));
        assert!(matches!(invert_half_plane(&eye(2)), Err(Error::Singular(_))));
    }

    #[test]
    fn amplification_is_a_unital_homomorphism() {
        let inc = Inclusion::amplify(2, 3);
        inc.validate().unwrap();
        assert!(inc.homomorphism_residual() < 1e-12);
        let b = from_real(2, &[1.0, 2.0, 3.0, 4.0]);
        let (back, res) = inc.pull_back(&inc.apply(&b));
        assert_eq!(back, b);
        assert_eq!(res, 0.0);
        let (_, res) = inc.pull_back(&unit(6, 1));
        assert!(res > 0.5);
    }

    #[test]
    fn re_im_reconstruct() {
        let a = from_rows(&[&[c(1.0, 2.0), c(-3.0, 0.5)], &[c(0.25, -1.0), c(0.0, 4.0)]]);
        let back = re_part(&a) + im_part(&a) * C64::i();
        assert!(max_diff(&back, &a) < 1e-15);
        assert!(is_selfadjoint(&re_part(&a), 1e-15));
        assert!(is_selfadjoint(&im_part(&a), 1e-15));
    }

    #[test]
    fn kraus_map_choi_and_unitality() {
        let k = vec![scalar(2, c(std::f64::consts::FRAC_1_SQRT_2, 0.0)); 2];
        let phi = LinearMap::from_kraus(2, 2, &k).unwrap();
        assert!(phi.unital_residual() < 1e-15);
        assert!(phi.cp_min_eigenvalue() > -1e-12);
        let transpose = LinearMap::from_fn(2, 2, |a| a.transpose());
        assert_abs_diff_eq!(transpose.cp_min_eigenvalue(), -1.0, epsilon = 1e-12);
    }
}
