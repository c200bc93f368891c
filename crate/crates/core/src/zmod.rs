//! Subsets of the cyclic group Z_v and the action of its unit group.
//!
//! A [`ResidueSet`] is a bit-vector indexed by residue, so negation, translation
//! and the set predicates run a machine word at a time. [`UnitSubgroup`] holds a
//! multiplicative subgroup H of Z_v^* and expands orbit representatives into the
//! H-invariant sets they encode.

use std::fmt;

use crate::error::{Error, Result};

const WORD: usize = 64;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[inline]
pub fn mul_mod(a: u32, b: u32, v: u32) -> u32 {
    ((a as u64 * b as u64) % v as u64) as u32
}

/// Reduces a signed residue (for example `-2`) into `[0, v)`.
pub fn reduce(x: i64, v: u32) -> u32 {
    x.rem_euclid(v as i64) as u32
}

pub fn check_modulus(v: u32) -> Result<()> {
    if v == 0 || v.is_multiple_of(2) {
        return Err(Error::InvalidModulus(v));
    }
    Ok(())
}

fn check_unit(v: u32, mu: u32) -> Result<()> {
    if gcd(mu as u64 % v as u64, v as u64) != 1 {
        return Err(Error::NotInvertible { mu, modulus: v });
    }
    Ok(())
}

pub fn is_unit(v: u32, mu: u32) -> bool {
    gcd(mu as u64 % v as u64, v as u64) == 1
}

/// All units of Z_v in ascending order.
pub fn units(v: u32) -> Vec<u32> {
    if v == 1 {
        return vec![0];
    }
    (1..v).filter(|&m| is_unit(v, m)).collect()
}

/// Multiplicative inverse of `mu` modulo `v`.
pub fn inverse(v: u32, mu: u32) -> Result<u32> {
    check_unit(v, mu)?;
    if v == 1 {
        return Ok(0);
    }
    let (mut r0, mut r1) = (v as i64, (mu % v) as i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    Ok(reduce(t0, v))
}

/// Smallest `t >= 1` with `mu^t = 1 (mod v)`.
pub fn unit_order(v: u32, mu: u32) -> Result<u32> {
    check_modulus(v)?;
    check_unit(v, mu)?;
    if v == 1 {
        return Ok(1);
    }
    let mu = mu % v;
    let mut x = mu;
    let mut t = 1;
    while x != 1 {
        x = mul_mod(x, mu, v);
        t += 1;
    }
    Ok(t)
}

/// A subset of Z_v.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ResidueSet {
    modulus: u32,
    words: Vec<u64>,
}

impl ResidueSet {
    pub fn empty(modulus: u32) -> Result<Self> {
        check_modulus(modulus)?;
        Ok(Self::empty_unchecked(modulus))
    }

    pub(crate) fn empty_unchecked(modulus: u32) -> Self {
        let n = (modulus as usize).div_ceil(WORD);
        ResidueSet { modulus, words: vec![0; n] }
    }

    pub fn full(modulus: u32) -> Result<Self> {
        let mut s = Self::empty(modulus)?;
        for w in s.words.iter_mut() {
            *w = !0;
        }
        s.clear_tail();
        Ok(s)
    }

    /// Builds a set from residues already in `[0, modulus)`. Duplicates collapse.
    pub fn from_residues<I: IntoIterator<Item = u32>>(modulus: u32, residues: I) -> Result<Self> {
        let mut s = Self::empty(modulus)?;
        for r in residues {
            if r >= modulus {
                return Err(Error::ResidueOutOfRange { residue: r as u64, modulus });
            }
            s.insert(r);
        }
        Ok(s)
    }

    /// Builds a set from arbitrary signed integers, reducing each modulo `modulus`.
    pub fn from_signed<I: IntoIterator<Item = i64>>(modulus: u32, residues: I) -> Result<Self> {
        let mut s = Self::empty(modulus)?;
        for r in residues {
            s.insert(reduce(r, modulus));
        }
        Ok(s)
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn contains(&self, r: u32) -> bool {
        r < self.modulus && (self.words[r as usize / WORD] >> (r as usize % WORD)) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, r: u32) {
        debug_assert!(r < self.modulus);
        self.words[r as usize / WORD] |= 1 << (r as usize % WORD);
    }

    #[inline]
    pub fn remove(&mut self, r: u32) {
        debug_assert!(r < self.modulus);
        self.words[r as usize / WORD] &= !(1 << (r as usize % WORD));
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros();
                w &= w - 1;
                Some((wi * WORD) as u32 + b)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.iter().collect()
    }

    fn clear_tail(&mut self) {
        let rem = self.modulus as usize % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    fn same_modulus(&self, other: &Self) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch(self.modulus, other.modulus));
        }
        Ok(())
    }

    /// `{ (v - m) mod v : m in X }`.
    pub fn negate(&self) -> Self {
        let v = self.modulus;
        let mut out = Self::empty_unchecked(v);
        for m in self.iter() {
            out.insert(if m == 0 { 0 } else { v - m });
        }
        out
    }

    /// `Z_v \ X`.
    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for w in out.words.iter_mut() {
            *w = !*w;
        }
        out.clear_tail();
        out
    }

    /// `X + t`, computed as a cyclic rotation of the bit-vector.
    pub fn translate(&self, t: u32) -> Self {
        let v = self.modulus as usize;
        let t = t as usize % v;
        if t == 0 {
            return self.clone();
        }
        // bits [0, v-t) move up by t; bits [v-t, v) wrap down to [0, t).
        let mut out = shl(&self.words, t);
        let low = shr(&self.words, v - t);
        for (o, l) in out.iter_mut().zip(low) {
            *o |= l;
        }
        let mut s = ResidueSet { modulus: self.modulus, words: out };
        s.clear_tail();
        s
    }

    /// `{ mu * m mod v : m in X }` for a unit `mu`.
    pub fn scale(&self, mu: u32) -> Result<Self> {
        check_unit(self.modulus, mu)?;
        Ok(self.scale_unchecked(mu % self.modulus.max(1)))
    }

    pub(crate) fn scale_unchecked(&self, mu: u32) -> Self {
        let v = self.modulus;
        let mut out = Self::empty_unchecked(v);
        for m in self.iter() {
            out.insert(mul_mod(m, mu, v));
        }
        out
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.same_modulus(other)?;
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect();
        Ok(ResidueSet { modulus: self.modulus, words })
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.negate() == *self
    }

    /// True iff `Z_v` is the disjoint union of `X`, `-X` and `{0}`.
    pub fn is_skew(&self) -> bool {
        let v = self.modulus as usize;
        !self.contains(0) && self.len() == (v - 1) / 2 && self.intersection_len(&self.negate()) == 0
    }
}

fn shl(words: &[u64], t: usize) -> Vec<u64> {
    let n = words.len();
    let mut out = vec![0u64; n];
    let (ws, bs) = (t / WORD, t % WORD);
    for i in (ws..n).rev() {
        let src = i - ws;
        let mut w = words[src] << bs;
        if bs != 0 && src > 0 {
            w |= words[src - 1] >> (WORD - bs);
        }
        out[i] = w;
    }
    out
}

fn shr(words: &[u64], t: usize) -> Vec<u64> {
    let n = words.len();
    let mut out = vec![0u64; n];
    let (ws, bs) = (t / WORD, t % WORD);
    for i in 0..n.saturating_sub(ws) {
        let src = i + ws;
        let mut w = words[src] >> bs;
        if bs != 0 && src + 1 < n {
            w |= words[src + 1] << (WORD - bs);
        }
        out[i] = w;
    }
    out
}

impl fmt::Debug for ResidueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z{}{:?}", self.modulus, self.to_vec())
    }
}

impl PartialOrd for ResidueSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Orders by modulus, then lexicographically by ascending member list.
impl Ord for ResidueSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.modulus.cmp(&other.modulus).then_with(|| self.iter().cmp(other.iter()))
    }
}

/// A subgroup H of the unit group Z_v^*.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UnitSubgroup {
    modulus: u32,
    elements: Vec<u32>,
}

impl UnitSubgroup {
    pub fn trivial(modulus: u32) -> Result<Self> {
        check_modulus(modulus)?;
        Ok(UnitSubgroup { modulus, elements: vec![1 % modulus] })
    }

    /// Multiplicative closure of `generators` together with 1. Accepts either a
    /// generator list or a full element list.
    pub fn closure(modulus: u32, generators: &[u32]) -> Result<Self> {
        check_modulus(modulus)?;
        for &g in generators {
            check_unit(modulus, g)?;
        }
        let v = modulus;
        let mut member = vec![false; v as usize];
        let mut elements = vec![1 % v];
        member[(1 % v) as usize] = true;
        let mut i = 0;
        while i < elements.len() {
            let h = elements[i];
            for &g in generators {
                let x = mul_mod(h, g % v, v);
                if !member[x as usize] {
                    member[x as usize] = true;
                    elements.push(x);
                }
            }
            i += 1;
        }
        elements.sort_unstable();
        Ok(UnitSubgroup { modulus, elements })
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn elements(&self) -> &[u32] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    pub fn contains(&self, x: u32) -> bool {
        self.elements.binary_search(&(x % self.modulus.max(1))).is_ok()
    }

    /// The subgroup generated by `self` and `extra`.
    pub fn join(&self, extra: &[u32]) -> Result<Self> {
        let mut gens = self.elements.clone();
        gens.extend_from_slice(extra);
        Self::closure(self.modulus, &gens)
    }

    /// `H * r`, ascending and without repeats.
    pub fn orbit(&self, r: u32) -> Vec<u32> {
        let v = self.modulus;
        let mut o: Vec<u32> = self.elements.iter().map(|&h| mul_mod(h, r, v)).collect();
        o.sort_unstable();
        o.dedup();
        o
    }

    /// Smallest residue in the orbit of `r`.
    pub fn canonical_rep(&self, r: u32) -> u32 {
        let v = self.modulus;
        self.elements.iter().map(|&h| mul_mod(h, r, v)).min().unwrap_or(r)
    }

    /// Partition of `Z_v` into H-orbits, ordered by minimum representative.
    pub fn orbits(&self) -> Vec<Vec<u32>> {
        let v = self.modulus;
        let mut seen = vec![false; v as usize];
        let mut out = Vec::new();
        for r in 0..v {
            if seen[r as usize] {
                continue;
            }
            let o = self.orbit(r);
            for &x in &o {
                seen[x as usize] = true;
            }
            out.push(o);
        }
        out
    }

    /// Union of the orbits `H * r` over the representatives.
    pub fn expand_orbits(&self, reps: &[u32]) -> Result<ResidueSet> {
        let mut s = ResidueSet::empty(self.modulus)?;
        for &r in reps {
            if r >= self.modulus {
                return Err(Error::ResidueOutOfRange { residue: r as u64, modulus: self.modulus });
            }
            for x in self.orbit(r) {
                s.insert(x);
            }
        }
        Ok(s)
    }

    /// Minimum representatives of the H-orbits making up `set`, or `None` if
    /// `set` is not H-invariant.
    pub fn orbit_reps(&self, set: &ResidueSet) -> Option<Vec<u32>> {
        let mut reps = Vec::new();
        for x in set.iter() {
            let orbit = self.orbit(x);
            if orbit.iter().any(|&y| !set.contains(y)) {
                return None;
            }
            if orbit[0] == x {
                reps.push(x);
            }
        }
        Some(reps)
    }
}

/// Free-function form of [`ResidueSet::negate`].
pub fn negate(x: &ResidueSet) -> ResidueSet {
    x.negate()
}

pub fn complement(x: &ResidueSet) -> ResidueSet {
    x.complement()
}

pub fn is_symmetric(x: &ResidueSet) -> bool {
    x.is_symmetric()
}

pub fn is_skew(x: &ResidueSet) -> bool {
    x.is_skew()
}

pub fn scale(x: &ResidueSet, mu: u32) -> Result<ResidueSet> {
    x.scale(mu)
}

pub fn subgroup_closure(v: u32, generators: &[u32]) -> Result<UnitSubgroup> {
    UnitSubgroup::closure(v, generators)
}

pub fn expand_orbits(h: &UnitSubgroup, reps: &[u32]) -> Result<ResidueSet> {
    h.expand_orbits(reps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: u32, xs: &[u32]) -> ResidueSet {
        ResidueSet::from_residues(v, xs.iter().copied()).unwrap()
    }

    #[test]
    fn negate_examples() {
        assert_eq!(set(7, &[1, 6]).negate(), set(7, &[1, 6]));
        assert_eq!(set(5, &[]).negate(), set(5, &[]));
        assert_eq!(set(7, &[1, 2, 4]).negate(), set(7, &[3, 5, 6]));
    }

    #[test]
    fn complement_examples() {
        assert_eq!(set(3, &[0]).complement(), set(3, &[1, 2]));
        assert_eq!(set(7, &[1, 2, 4]).complement(), set(7, &[0, 3, 5, 6]));
        let big = set(131, &[0, 64, 65, 127, 128, 130]);
        assert_eq!(big.complement().len(), 125);
        assert_eq!(big.complement().complement(), big);
    }

    #[test]
    fn symmetry_predicates() {
        assert!(set(7, &[1, 6]).is_symmetric());
        assert!(set(13, &[0, 4, 6, 7, 9]).is_symmetric());
        assert!(!set(7, &[1, 2, 4]).is_symmetric());
        assert!(set(7, &[1, 2, 4]).is_skew());
        assert!(set(19, &[2, 3, 4, 6, 8, 9, 12, 14, 18]).is_skew());
        assert!(!set(3, &[0]).is_skew());
        // v = 1: only the empty set is skew.
        assert!(set(1, &[]).is_skew());
        assert!(set(1, &[0]).is_symmetric());
    }

    #[test]
    fn scale_examples() {
        assert_eq!(set(7, &[1, 6]).scale(2).unwrap(), set(7, &[2, 5]));
        assert_eq!(set(7, &[2, 5]).scale(2).unwrap(), set(7, &[3, 4]));
        assert_eq!(set(7, &[3, 4]).scale(2).unwrap(), set(7, &[1, 6]));
        assert_eq!(
            set(9, &[1]).scale(3).unwrap_err(),
            Error::NotInvertible { mu: 3, modulus: 9 }
        );
    }

    #[test]
    fn translate_wraps() {
        let x = set(67, &[0, 1, 63, 64, 66]);
        assert_eq!(x.translate(3), set(67, &[3, 4, 66, 0, 2]));
        assert_eq!(x.translate(67), x);
        let y = set(129, &[0, 63, 64, 127, 128]);
        assert_eq!(y.translate(65), set(129, &[65, 128, 0, 63, 64]));
    }

    #[test]
    fn unit_orders() {
        assert_eq!(unit_order(7, 2).unwrap(), 3);
        assert_eq!(unit_order(25, 7).unwrap(), 4);
        assert_eq!(unit_order(127, 19).unwrap(), 3);
        assert!(unit_order(9, 6).is_err());
        assert_eq!(inverse(7, 2).unwrap(), 4);
        assert_eq!(inverse(631, 2).unwrap(), 316);
    }

    #[test]
    fn closure_examples() {
        let h = UnitSubgroup::closure(127, &[2]).unwrap();
        assert_eq!(h.elements(), &[1, 2, 4, 8, 16, 32, 64]);
        let h = UnitSubgroup::closure(31, &[5]).unwrap();
        assert_eq!(h.elements(), &[1, 5, 25]);
        let h = UnitSubgroup::closure(45, &[]).unwrap();
        assert_eq!(h.elements(), &[1]);
        assert!(UnitSubgroup::closure(45, &[3]).is_err());
        // full element lists normalize to the same group
        let a = UnitSubgroup::closure(61, &[1, 9, 20, 34, 58]).unwrap();
        let b = UnitSubgroup::closure(61, &[9]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn orbit_expansion_sizes() {
        let h = UnitSubgroup::closure(127, &[2]).unwrap();
        assert_eq!(h.expand_orbits(&[1, 3, 7, 9, 11, 19, 21, 23, 47]).unwrap().len(), 63);
        assert_eq!(h.expand_orbits(&[0, 3, 7, 9, 11, 15, 29, 31, 55]).unwrap().len(), 57);
        let h = UnitSubgroup::closure(61, &[1, 9, 20, 34, 58]).unwrap();
        assert_eq!(h.expand_orbits(&[3, 4, 5, 6, 8, 10]).unwrap().len(), 30);
    }

    #[test]
    fn orbit_reps_are_minimal() {
        let h = UnitSubgroup::closure(31, &[5]).unwrap();
        let x = h.expand_orbits(&[0, 3, 11, 12]).unwrap();
        assert_eq!(h.orbit_reps(&x).unwrap(), vec![0, 3, 11, 12]);
        let y = h.expand_orbits(&[15, 24]).unwrap();
        assert_eq!(h.orbit_reps(&y).unwrap(), vec![3, 11]);
        assert!(h.orbit_reps(&set(31, &[1])).is_none());
    }
}
