//! Moments of `X + Y` straight from the independence definitions, without transforms.
//!
//! Every word `L_1 b_1 L_2 ⋯ b_{k−1} L_k` in the letters `X, Y` is split into maximal
//! single-letter blocks. Centering each block against `E_B` and expanding gives a signed sum
//! over nonempty block subsets whose expectations are pulled out into the spacer slots; the
//! remaining shorter word is handled recursively. Values are tensors over the spacer slots,
//! memoized on the letter pattern.

use std::collections::HashMap;

use crate::alg::{Inclusion, C64};
use crate::distribution::{DistPair, OVDistribution};
use crate::error::{Error, Result};
use crate::guard;
use crate::multimap::MultiMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Free,
    Boolean,
    CFree,
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Kind::Free),
            "boolean" => Ok(Kind::Boolean),
            "cfree" | "c-free" => Ok(Kind::CFree),
            other => Err(Error::Usage(format!("unknown convolution kind '{other}'"))),
        }
    }
}

/// A letter pattern: bit `i` of `mask` set means position `i` holds `Y`.
type Pattern = (usize, u32);

fn blocks_of(len: usize, mask: u32) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for i in 0..len {
        let letter = ((mask >> i) & 1) as usize;
        match out.last_mut() {
            Some((l, n)) if *l == letter => *n += 1,
            _ => out.push((letter, 1)),
        }
    }
    out
}

/// Word left after pulling the blocks in `s` out to the spacers.
struct Reduced {
    pattern: Pattern,
    /// `(slot, C)`: substitute `C` into the given spacer slot of the reduced word.
    junctions: Vec<(usize, MultiMap)>,
    lead: Option<MultiMap>,
    trail: Option<MultiMap>,
}

/// `e_moment(letter, len)` is the B-valued block expectation (arity `len − 1`).
fn reduce(
    blocks: &[(usize, usize)],
    s: u32,
    d: usize,
    e_moment: &dyn Fn(usize, usize) -> MultiMap,
) -> Reduced {
    let id = MultiMap::identity(d);
    let mut chain: Option<MultiMap> = None;
    let mut seen = false;
    let (mut len, mut mask) = (0usize, 0u32);
    let mut junctions = Vec::new();
    let mut lead = None;
    for (i, &(letter, l)) in blocks.iter().enumerate() {
        if (s >> i) & 1 == 1 {
            let phi = e_moment(letter, l);
            chain = Some(match chain {
                None if !seen => phi,
                None => id.concat_mul(&phi),
                Some(c) => c.concat_mul(&id).concat_mul(&phi),
            });
        } else {
            if let Some(c) = chain.take() {
                let c = c.concat_mul(&id);
                if seen {
                    junctions.push((len - 1, c));
                } else {
                    lead = Some(c);
                }
            }
            seen = true;
            if letter == 1 {
                mask |= ((1u32 << l) - 1) << len;
            }
            len += l;
        }
    }
    Reduced {
        pattern: (len, mask),
        junctions,
        lead,
        trail: chain,
    }
}

/// `Φ_{A_1} ⊙ I ⊙ Φ_{A_2} ⊙ ⋯ ⊙ I ⊙ Φ_{A_n}`.
fn interleave(parts: &[MultiMap], spacer: &MultiMap) -> MultiMap {
    let mut acc = parts[0].clone();
    for p in &parts[1..] {
        acc = acc.concat_mul(spacer).concat_mul(p);
    }
    acc
}

fn sign(s: u32) -> C64 {
    // (−1)^{|S|+1}
    if s.count_ones() % 2 == 1 {
        C64::new(1.0, 0.0)
    } else {
        C64::new(-1.0, 0.0)
    }
}

fn assemble(
    red: &Reduced,
    inner: &MultiMap,
    inc: &Inclusion,
) -> MultiMap {
    let mut term = inner.clone();
    for (slot, c) in red.junctions.iter().rev() {
        term = term.contract_slot(*slot, c);
    }
    if let Some(l) = &red.lead {
        term = l.embed(inc).concat_mul(&term);
    }
    if let Some(r) = &red.trail {
        term = term.concat_mul(&r.embed(inc));
    }
    term
}

struct FreeOracle<'a> {
    x: &'a [MultiMap],
    y: &'a [MultiMap],
    d: usize,
    memo: HashMap<Pattern, MultiMap>,
}

impl<'a> FreeOracle<'a> {
    fn pure(&self, letter: usize, len: usize) -> MultiMap {
        if letter == 0 {
            self.x[len - 1].clone()
        } else {
            self.y[len - 1].clone()
        }
    }

    fn word(&mut self, pat: Pattern) -> MultiMap {
        if let Some(v) = self.memo.get(&pat) {
            return v.clone();
        }
        let (len, mask) = pat;
        let blocks = blocks_of(len, mask);
        let value = if blocks.len() == 1 {
            self.pure(blocks[0].0, len)
        } else {
            let inc = Inclusion::identity(self.d);
            let full = (1u32 << blocks.len()) - 1;
            let mut acc = MultiMap::zeros(len - 1, self.d, self.d);
            let (x, y) = (self.x, self.y);
            let e_moment = |letter: usize, l: usize| -> MultiMap {
                if letter == 0 { x[l - 1].clone() } else { y[l - 1].clone() }
            };
            for s in 1..=full {
                let term = if s == full {
                    let parts: Vec<MultiMap> = blocks.iter().map(|&(a, l)| e_moment(a, l)).collect();
                    interleave(&parts, &MultiMap::identity(self.d))
                } else {
                    let red = reduce(&blocks, s, self.d, &e_moment);
                    let inner = self.word(red.pattern);
                    assemble(&red, &inner, &inc)
                };
                acc.axpy(sign(s), &term);
            }
            acc
        };
        self.memo.insert(pat, value.clone());
        value
    }
}

fn check_oracle_inputs(x: &OVDistribution, y: &OVDistribution) -> Result<()> {
    x.check_compatible(y)?;
    if x.order() > guard::MAX_ORACLE_ORDER {
        return Err(Error::Resource(format!(
            "word-expansion oracle is limited to order {} (2^N patterns)",
            guard::MAX_ORACLE_ORDER
        )));
    }
    Ok(())
}

fn sum_over_patterns(order: usize, mut word: impl FnMut(Pattern) -> MultiMap) -> Vec<MultiMap> {
    (1..=order)
        .map(|k| {
            let mut acc: Option<MultiMap> = None;
            for mask in 0..(1u32 << k) {
                let w = word((k, mask));
                match acc.as_mut() {
                    Some(a) => a.add_assign(&w),
                    None => acc = Some(w),
                }
            }
            acc.unwrap()
        })
        .collect()
}

/// Free additive convolution over B from the definition of freeness with amalgamation.
pub fn oracle_free(x: &OVDistribution, y: &OVDistribution) -> Result<OVDistribution> {
    check_oracle_inputs(x, y)?;
    x.require_b_valued("free convolution")?;
    let mut oracle = FreeOracle {
        x: x.moments(),
        y: y.moments(),
        d: x.d_b(),
        memo: HashMap::new(),
    };
    let moments = sum_over_patterns(x.order(), |p| oracle.word(p));
    OVDistribution::new(*x.inclusion(), moments)
}

/// Boolean convolution: θ factorizes over alternating products of nonunital block algebras.
pub fn oracle_boolean(x: &OVDistribution, y: &OVDistribution) -> Result<OVDistribution> {
    check_oracle_inputs(x, y)?;
    let inc = *x.inclusion();
    let spacer = MultiMap::embedded_identity(&inc);
    let moments = sum_over_patterns(x.order(), |(len, mask)| {
        let parts: Vec<MultiMap> = blocks_of(len, mask)
            .iter()
            .map(|&(a, l)| if a == 0 { x.moment(l).clone() } else { y.moment(l).clone() })
            .collect();
        interleave(&parts, &spacer)
    });
    OVDistribution::new(inc, moments)
}

struct CFreeOracle<'a> {
    mu: [&'a [MultiMap]; 2],
    nu: [&'a [MultiMap]; 2],
    inc: Inclusion,
    memo: HashMap<Pattern, MultiMap>,
}

impl<'a> CFreeOracle<'a> {
    fn word(&mut self, pat: Pattern) -> MultiMap {
        if let Some(v) = self.memo.get(&pat) {
            return v.clone();
        }
        let (len, mask) = pat;
        let blocks = blocks_of(len, mask);
        let inc = self.inc;
        let d = inc.d_b;
        let value = if blocks.len() == 1 {
            self.mu[blocks[0].0][len - 1].clone()
        } else {
            let nu = self.nu;
            let e_moment = |letter: usize, l: usize| -> MultiMap { nu[letter][l - 1].clone() };
            // θ of the alternating product of E_B-centered blocks factorizes
            let centered: Vec<MultiMap> = blocks
                .iter()
                .map(|&(a, l)| self.mu[a][l - 1].sub(&nu[a][l - 1].embed(&inc)))
                .collect();
            let mut acc = interleave(&centered, &MultiMap::embedded_identity(&inc));
            let full = (1u32 << blocks.len()) - 1;
            for s in 1..=full {
                let term = if s == full {
                    let parts: Vec<MultiMap> = blocks.iter().map(|&(a, l)| e_moment(a, l)).collect();
                    interleave(&parts, &MultiMap::identity(d)).embed(&inc)
                } else {
                    let red = reduce(&blocks, s, d, &e_moment);
                    let inner = self.word(red.pattern);
                    assemble(&red, &inner, &inc)
                };
                acc.axpy(sign(s), &term);
            }
            acc
        };
        self.memo.insert(pat, value.clone());
        value
    }
}

/// Conditionally free convolution of pairs: `ν` by freeness under `E_B`, `μ` by θ-factorization
/// of alternating `E_B`-centered products.
pub fn oracle_cfree(x: &DistPair, y: &DistPair) -> Result<DistPair> {
    x.check_compatible(y)?;
    check_oracle_inputs(&x.mu, &y.mu)?;
    let nu = oracle_free(&x.nu, &y.nu)?;
    let mut oracle = CFreeOracle {
        mu: [x.mu.moments(), y.mu.moments()],
        nu: [x.nu.moments(), y.nu.moments()],
        inc: *x.mu.inclusion(),
        memo: HashMap::new(),
    };
    let moments = sum_over_patterns(x.order(), |p| oracle.word(p));
    DistPair::new(OVDistribution::new(*x.mu.inclusion(), moments)?, nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alg::{self, from_real};
    use crate::distribution::{make_standard, Family, OperatorModel, Functional};

    fn scalar_moments(d: &OVDistribution) -> Vec<f64> {
        (1..=d.order()).map(|k| d.scalar_moment(k)[(0, 0)].re).collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn free_rademacher_square_is_arcsine() {
        let inc = Inclusion::identity(1);
        let r = make_standard(&Family::Rademacher, &inc, 6).unwrap();
        let s = oracle_free(&r, &r).unwrap();
        assert!(close(&scalar_moments(&s), &[0.0, 2.0, 0.0, 6.0, 0.0, 20.0], 1e-12));
    }

    #[test]
    fn boolean_rademacher_square() {
        let inc = Inclusion::identity(1);
        let r = make_standard(&Family::Rademacher, &inc, 6).unwrap();
        let s = oracle_boolean(&r, &r).unwrap();
        assert!(close(&scalar_moments(&s), &[0.0, 2.0, 0.0, 4.0, 0.0, 8.0], 1e-12));
    }

    #[test]
    fn zero_is_neutral() {
        let model = OperatorModel::semicircle_d2().unwrap();
        let x = model.moments(Functional::Expectation, 5).unwrap();
        let zero = make_standard(&Family::PointMass(alg::zeros(2)), &Inclusion::identity(2), 5).unwrap();
        let f = oracle_free(&x, &zero).unwrap();
        assert!(f.moment_distance(&x).unwrap().iter().all(|&v| v < 1e-14));
        let b = oracle_boolean(&x, &zero).unwrap();
        assert!(b.moment_distance(&x).unwrap().iter().all(|&v| v < 1e-14));
        let px = DistPair::diagonal(&x).unwrap();
        let pz = DistPair::diagonal(&zero).unwrap();
        let c = oracle_cfree(&px, &pz).unwrap();
        assert!(c.mu.moment_distance(&x).unwrap().iter().all(|&v| v < 1e-14));
    }

    #[test]
    fn cfree_on_diagonal_pairs_is_free() {
        let beta = from_real(2, &[0.5, 0.1, 0.1, 0.0]);
        let x = make_standard(&Family::Rademacher, &Inclusion::identity(2), 5).unwrap();
        let y = make_standard(&Family::PointMass(beta), &Inclusion::identity(2), 5).unwrap();
        let free = oracle_free(&x, &y).unwrap();
        let c = oracle_cfree(&DistPair::diagonal(&x).unwrap(), &DistPair::diagonal(&y).unwrap()).unwrap();
        assert!(c.mu.moment_distance(&free).unwrap().iter().all(|&v| v < 1e-13));
        assert!(c.nu.moment_distance(&free).unwrap().iter().all(|&v| v < 1e-13));
    }

    #[test]
    fn free_sum_with_point_mass_is_a_shift() {
        // X + β for a central scalar β: moments of a shifted variable
        let x = make_standard(&Family::Rademacher, &Inclusion::identity(1), 5).unwrap();
        let pm = make_standard(&Family::PointMass(alg::scalar(1, C64::new(2.0, 0.0))), &Inclusion::identity(1), 5).unwrap();
        let s = oracle_free(&x, &pm).unwrap();
        // (±1 + 2) with probability ½: moments (3^k + 1)/2
        let expect: Vec<f64> = (1..=5).map(|k| (3f64.powi(k) + 1.0) / 2.0).collect();
        assert!(close(&scalar_moments(&s), &expect, 1e-10));
    }

    #[test]
    fn oracle_order_guardrail() {
        crate::guard::set_max_order(12);
        let x = make_standard(&Family::Rademacher, &Inclusion::identity(1), 11).unwrap();
        crate::guard::set_max_order(crate::guard::DEFAULT_MAX_ORDER);
        assert!(matches!(oracle_boolean(&x, &x), Err(Error::Resource(_))));
    }
}
