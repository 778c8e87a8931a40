//! k-linear maps `M_{d_src}^k → M_{d_tgt}` stored densely over matrix-unit tuples.
//!
//! Layout: the entry for the argument tuple `(E_{u_1}, …, E_{u_k})` is a `d_tgt × d_tgt`
//! block stored row-major; tuples are ordered lexicographically with `u_1` most significant
//! and `u = p*d_src + q` for `E_{pq}`.

use crate::alg::{self, Inclusion, LinearMap, Mat, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiMap {
    arity: usize,
    d_src: usize,
    d_tgt: usize,
    data: Vec<C64>,
}

const ZERO: C64 = C64::new(0.0, 0.0);

/// `out += a * b` for row-major `d × d` blocks.
#[inline]
fn mul_add_block(a: &[C64], b: &[C64], out: &mut [C64], d: usize) {
    for i in 0..d {
        for l in 0..d {
            let x = a[i * d + l];
            if x == ZERO {
                continue;
            }
            let brow = &b[l * d..(l + 1) * d];
            let orow = &mut out[i * d..(i + 1) * d];
            for (o, y) in orow.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
}

impl MultiMap {
    pub fn zeros(arity: usize, d_src: usize, d_tgt: usize) -> Self {
        let len = (d_src * d_src).pow(arity as u32) * d_tgt * d_tgt;
        MultiMap {
            arity,
            d_src,
            d_tgt,
            data: vec![ZERO; len],
        }
    }

    pub fn constant(d_src: usize, value: &Mat) -> Self {
        MultiMap {
            arity: 0,
            d_src,
            d_tgt: value.nrows(),
            data: alg::to_row_major(value),
        }
    }

    pub fn from_fn(
        arity: usize,
        d_src: usize,
        d_tgt: usize,
        mut f: impl FnMut(&[usize]) -> Mat,
    ) -> Self {
        let mut out = Self::zeros(arity, d_src, d_tgt);
        let nb = d_src * d_src;
        let blk = d_tgt * d_tgt;
        let mut tuple = vec![0usize; arity];
        for idx in 0..out.num_tuples() {
            let mut rem = idx;
            for slot in (0..arity).rev() {
                tuple[slot] = rem % nb;
                rem /= nb;
            }
            let m = f(&tuple);
            out.data[idx * blk..(idx + 1) * blk].copy_from_slice(&alg::to_row_major(&m));
        }
        out
    }

    pub(crate) fn from_raw(arity: usize, d_src: usize, d_tgt: usize, data: Vec<C64>) -> Self {
        assert_eq!(
            data.len(),
            (d_src * d_src).pow(arity as u32) * d_tgt * d_tgt,
            "tensor length does not match its shape"
        );
        MultiMap {
            arity,
            d_src,
            d_tgt,
            data,
        }
    }

    /// `b ↦ b` on `M_d`.
    pub fn identity(d: usize) -> Self {
        Self::from_fn(1, d, d, |t| alg::unit(d, t[0]))
    }

    /// `b ↦ ι(b)`.
    pub fn embedded_identity(inc: &Inclusion) -> Self {
        Self::from_fn(1, inc.d_b, inc.d_d, |t| inc.apply(&alg::unit(inc.d_b, t[0])))
    }

    pub fn from_linear_map(map: &LinearMap) -> Self {
        Self::from_fn(1, map.d_in, map.d_out, |t| map.apply(&alg::unit(map.d_in, t[0])))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn d_src(&self) -> usize {
        self.d_src
    }

    pub fn d_tgt(&self) -> usize {
        self.d_tgt
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn basis_len(&self) -> usize {
        self.d_src * self.d_src
    }

    pub fn block_len(&self) -> usize {
        self.d_tgt * self.d_tgt
    }

    pub fn num_tuples(&self) -> usize {
        self.basis_len().pow(self.arity as u32)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.arity == other.arity && self.d_src == other.d_src && self.d_tgt == other.d_tgt
    }

    pub fn tuple_index(&self, tuple: &[usize]) -> usize {
        debug_assert_eq!(tuple.len(), self.arity);
        tuple.iter().fold(0, |acc, &u| acc * self.basis_len() + u)
    }

    pub fn block(&self, idx: usize) -> &[C64] {
        let b = self.block_len();
        &self.data[idx * b..(idx + 1) * b]
    }

    pub fn block_mat(&self, idx: usize) -> Mat {
        alg::from_row_major(self.d_tgt, self.block(idx))
    }

    /// Value on a tuple of matrix units.
    pub fn at(&self, tuple: &[usize]) -> Mat {
        self.block_mat(self.tuple_index(tuple))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "max_diff on tensors of different shape");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn scale(&self, z: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= z);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other);
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.axpy(C64::new(1.0, 0.0), other);
    }

    /// `self += z * other`.
    pub fn axpy(&mut self, z: C64, other: &Self) {
        assert!(self.same_shape(other), "adding tensors of different shape");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += z * b;
        }
    }

    /// `(b_1..b_{k+l}) ↦ self(b_1..b_k) · other(b_{k+1}..b_{k+l})`.
    pub fn concat_mul(&self, other: &Self) -> Self {
        assert_eq!(self.d_src, other.d_src, "source dimensions differ");
        assert_eq!(self.d_tgt, other.d_tgt, "target dimensions differ");
        let d = self.d_tgt;
        let blk = self.block_len();
        let (na, nb) = (self.num_tuples(), other.num_tuples());
        let mut data = vec![ZERO; na * nb * blk];
        for i in 0..na {
            let a = self.block(i);
            if a.iter().all(|z| *z == ZERO) {
                continue;
            }
            for j in 0..nb {
                let out = &mut data[(i * nb + j) * blk..(i * nb + j + 1) * blk];
                mul_add_block(a, other.block(j), out, d);
            }
        }
        MultiMap::from_raw(self.arity + other.arity, self.d_src, self.d_tgt, data)
    }

    pub fn left_mul(&self, c: &Mat) -> Self {
        self.map_blocks(|b| c * b)
    }

    pub fn right_mul(&self, c: &Mat) -> Self {
        self.map_blocks(|b| b * c)
    }

    fn map_blocks(&self, mut f: impl FnMut(&Mat) -> Mat) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        let mut d_tgt = self.d_tgt;
        for idx in 0..self.num_tuples() {
            let m = f(&self.block_mat(idx));
            d_tgt = m.nrows();
            data.extend(alg::to_row_major(&m));
        }
        MultiMap::from_raw(self.arity, self.d_src, d_tgt, data)
    }

    /// Push every value through ι.
    pub fn embed(&self, inc: &Inclusion) -> Self {
        assert_eq!(self.d_tgt, inc.d_b, "embedding a tensor not valued in B");
        if inc.is_identity() {
            return self.clone();
        }
        self.map_blocks(|b| inc.apply(b))
    }

    /// Pull values in ι(B) back to B; the residual measures the distance to ι(B).
    pub fn pull_back(&self, inc: &Inclusion) -> (Self, f64) {
        assert_eq!(self.d_tgt, inc.d_d, "pull-back of a tensor not valued in D");
        if inc.is_identity() {
            return (self.clone(), 0.0);
        }
        let mut res: f64 = 0.0;
        let out = self.map_blocks(|b| {
            let (p, r) = inc.pull_back(b);
            res = res.max(r);
            p
        });
        (out, res)
    }

    /// Fix the first argument: `(b_2..b_k) ↦ self(Σ_u coeffs[u] E_u, b_2, …)`.
    pub fn contract_first(&self, coeffs: &[C64]) -> Self {
        assert!(self.arity > 0, "contracting a constant");
        let nb = self.basis_len();
        assert_eq!(coeffs.len(), nb);
        let chunk = self.data.len() / nb;
        let mut data = vec![ZERO; chunk];
        for (u, &z) in coeffs.iter().enumerate() {
            if z == ZERO {
                continue;
            }
            for (o, x) in data.iter_mut().zip(&self.data[u * chunk..(u + 1) * chunk]) {
                *o += z * x;
            }
        }
        MultiMap::from_raw(self.arity - 1, self.d_src, self.d_tgt, data)
    }

    /// Substitute the `B`-valued map `w` into argument `slot`; the result has arity
    /// `arity - 1 + w.arity` with `w`'s arguments occupying the old slot position.
    pub fn contract_slot(&self, slot: usize, w: &Self) -> Self {
        assert!(slot < self.arity, "slot out of range");
        assert_eq!(w.d_src, self.d_src, "source dimensions differ");
        assert_eq!(w.d_tgt, self.d_src, "substituted map must be B-valued");
        let nb = self.basis_len();
        let pre_n = nb.pow(slot as u32);
        let post_n = nb.pow((self.arity - slot - 1) as u32) * self.block_len();
        let wn = w.num_tuples();
        let mut data = vec![ZERO; pre_n * wn * post_n];
        for p in 0..pre_n {
            for v in 0..wn {
                let dst_off = (p * wn + v) * post_n;
                for e in 0..nb {
                    let z = w.data[v * nb + e];
                    if z == ZERO {
                        continue;
                    }
                    let src = &self.data[(p * nb + e) * post_n..(p * nb + e + 1) * post_n];
                    for (o, x) in data[dst_off..dst_off + post_n].iter_mut().zip(src) {
                        *o += z * x;
                    }
                }
            }
        }
        MultiMap::from_raw(self.arity - 1 + w.arity, self.d_src, self.d_tgt, data)
    }

    /// Substitute `ws[i]` into slot `i` for every slot.
    pub fn substitute(&self, ws: &[&Self]) -> Self {
        assert_eq!(ws.len(), self.arity);
        let mut out = self.clone();
        for (slot, w) in ws.iter().enumerate().rev() {
            out = out.contract_slot(slot, w);
        }
        out
    }

    pub fn eval(&self, args: &[Mat]) -> Mat {
        assert_eq!(args.len(), self.arity, "wrong number of arguments");
        let mut cur = self.clone();
        for a in args {
            assert_eq!(a.nrows(), self.d_src);
            cur = cur.contract_first(&alg::to_row_major(a));
        }
        cur.block_mat(0)
    }

    /// Canonical extension to `M_n(B)`: arguments are `n·d_src` square matrices viewed as
    /// `n × n` block matrices; the value is the `n·d_tgt` matrix whose `(r_0, r_k)` block is
    /// `Σ self(a_1[r_0 r_1], a_2[r_1 r_2], …, a_k[r_{k-1} r_k])`.
    pub fn eval_amplified(&self, args: &[Mat], n: usize) -> Mat {
        assert_eq!(args.len(), self.arity, "wrong number of arguments");
        let (ds, dt) = (self.d_src, self.d_tgt);
        if self.arity == 0 {
            return alg::kron(&alg::eye(n), &self.block_mat(0));
        }
        let coords = |a: &Mat, r: usize, s: usize| -> Option<Vec<C64>> {
            let v = alg::to_row_major(&alg::block(a, ds, r, s));
            if v.iter().all(|z| *z == ZERO) {
                None
            } else {
                Some(v)
            }
        };
        let mut states: Vec<Option<MultiMap>> = vec![None; n * n];
        for r0 in 0..n {
            for r1 in 0..n {
                if let Some(cf) = coords(&args[0], r0, r1) {
                    states[r0 * n + r1] = Some(self.contract_first(&cf));
                }
            }
        }
        for a in &args[1..] {
            let blocks: Vec<Option<Vec<C64>>> = (0..n * n).map(|i| coords(a, i / n, i % n)).collect();
            let mut next: Vec<Option<MultiMap>> = vec![None; n * n];
            for r0 in 0..n {
                for s in 0..n {
                    let mut acc: Option<MultiMap> = None;
                    for r in 0..n {
                        if let (Some(st), Some(cf)) = (&states[r0 * n + r], &blocks[r * n + s]) {
                            let term = st.contract_first(cf);
                            match acc.as_mut() {
                                Some(x) => x.add_assign(&term),
                                None => acc = Some(term),
                            }
                        }
                    }
                    next[r0 * n + s] = acc;
                }
            }
            states = next;
        }
        let mut out = alg::zeros(n * dt);
        for r0 in 0..n {
            for s in 0..n {
                if let Some(st) = &states[r0 * n + s] {
                    alg::set_block(&mut out, dt, r0, s, &st.block_mat(0));
                }
            }
        }
        out
    }

    /// `(b_1..b_k) ↦ self(b_k*, …, b_1*)*`; Hermitian symmetric maps are fixed by this.
    pub fn reversed_adjoint(&self) -> Self {
        let ds = self.d_src;
        let k = self.arity;
        Self::from_fn(k, ds, self.d_tgt, |t| {
            let rev: Vec<usize> = t
                .iter()
                .rev()
                .map(|&u| (u % ds) * ds + u / ds)
                .collect();
            self.at(&rev).adjoint()
        })
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.max_diff(&self.reversed_adjoint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alg::{c, from_real};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, d: usize) -> Mat {
        Mat::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn rand_map(rng: &mut ChaCha8Rng, k: usize, ds: usize, dt: usize) -> MultiMap {
        MultiMap::from_fn(k, ds, dt, |_| rand_mat(rng, dt))
    }

    #[test]
    fn eval_is_multilinear_basis_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = rand_map(&mut rng, 3, 2, 2);
        let args: Vec<Mat> = (0..3).map(|_| rand_mat(&mut rng, 2)).collect();
        // brute force over all unit tuples
        let mut expect = alg::zeros(2);
        for u in 0..4 {
            for v in 0..4 {
                for w in 0..4 {
                    let z = args[0][(u / 2, u % 2)] * args[1][(v / 2, v % 2)] * args[2][(w / 2, w % 2)];
                    expect += f.at(&[u, v, w]) * z;
                }
            }
        }
        assert!(alg::max_diff(&f.eval(&args), &expect) < 1e-12);
    }

    #[test]
    fn identity_and_concat() {
        let id = MultiMap::identity(2);
        let b1 = from_real(2, &[1.0, 2.0, 3.0, 4.0]);
        let b2 = from_real(2, &[0.0, 1.0, -1.0, 0.5]);
        assert_eq!(id.eval(&[b1.clone()]), b1);
        let prod = id.concat_mul(&id);
        assert!(alg::max_diff(&prod.eval(&[b1.clone(), b2.clone()]), &(&b1 * &b2)) < 1e-14);
    }

    #[test]
    fn substitution_matches_composition_of_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = rand_map(&mut rng, 2, 2, 2);
        let w = rand_map(&mut rng, 2, 2, 2);
        let g = f.contract_slot(1, &w);
        let a: Vec<Mat> = (0..3).map(|_| rand_mat(&mut rng, 2)).collect();
        let inner = w.eval(&a[1..3]);
        let expect = f.eval(&[a[0].clone(), inner]);
        assert!(alg::max_diff(&g.eval(&a), &expect) < 1e-12);
    }

    #[test]
    fn amplified_eval_level_one_is_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = rand_map(&mut rng, 3, 2, 2);
        let a: Vec<Mat> = (0..3).map(|_| rand_mat(&mut rng, 2)).collect();
        assert!(alg::max_diff(&f.eval_amplified(&a, 1), &f.eval(&a)) < 1e-12);
    }

    #[test]
    fn amplified_eval_scalar_case_is_matrix_product() {
        // over B = C, f(b1,b2) = b1 b2 amplifies to the matrix product
        let id = MultiMap::identity(1);
        let f = id.concat_mul(&id);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = rand_mat(&mut rng, 3);
        let b = rand_mat(&mut rng, 3);
        assert!(alg::max_diff(&f.eval_amplified(&[a.clone(), b.clone()], 3), &(&a * &b)) < 1e-12);
    }

    #[test]
    fn embed_pull_back_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = rand_map(&mut rng, 2, 2, 2);
        let inc = Inclusion::amplify(2, 2);
        let (back, res) = f.embed(&inc).pull_back(&inc);
        assert_eq!(res, 0.0);
        assert_eq!(back, f);
    }

    #[test]
    fn reversed_adjoint_is_involutive() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = rand_map(&mut rng, 3, 2, 2);
        assert!(f.reversed_adjoint().reversed_adjoint().max_diff(&f) < 1e-15);
        let id = MultiMap::identity(2);
        assert!(id.hermitian_residual() < 1e-15);
    }
}
