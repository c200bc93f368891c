//! Four-block difference families over Z_v.
//!
//! Differences are counted over ordered pairs `(x, y)` with `x != y`, so a block
//! of size k contributes exactly `k(k-1)` differences and a family with index
//! λ satisfies `sum k_i(k_i - 1) = λ(v - 1)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zmod::{self, ResidueSet};

/// `(v; k0, k1, k2, k3; λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParameterSet {
    pub v: u32,
    pub k: [u32; 4],
    pub lambda: u32,
}

impl ParameterSet {
    pub fn new(v: u32, k: [u32; 4], lambda: u32) -> Self {
        ParameterSet { v, k, lambda }
    }

    /// Special set `(v; k0, k, k, k; λ)`.
    pub fn special(v: u32, k0: u32, k: u32, lambda: u32) -> Self {
        ParameterSet { v, k: [k0, k, k, k], lambda }
    }

    /// The order `n = k0 + k1 + k2 + k3 - λ`.
    pub fn order(&self) -> i64 {
        self.k.iter().map(|&k| k as i64).sum::<i64>() - self.lambda as i64
    }

    pub fn is_special(&self) -> bool {
        self.k[1] == self.k[2] && self.k[2] == self.k[3]
    }

    /// `1 + 2(k0 + 3k) - 3(k0 - k)^2` for a special set.
    pub fn square_value(&self) -> Option<i64> {
        if !self.is_special() {
            return None;
        }
        let (k0, k) = (self.k[0] as i64, self.k[1] as i64);
        Some(1 + 2 * (k0 + 3 * k) - 3 * (k0 - k) * (k0 - k))
    }
}

impl fmt::Display for ParameterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.k;
        write!(f, "({}; {},{},{},{}; {})", self.v, a, b, c, d, self.lambda)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParameterCheck {
    pub well_formed: bool,
    pub gs_type: bool,
    pub special: bool,
    pub square_value: Option<i64>,
    /// `None` when the set is not special.
    pub square_ok: Option<bool>,
    pub spin_capable: bool,
}

pub fn is_perfect_square(x: i64) -> bool {
    if x < 0 {
        return false;
    }
    let r = (x as f64).sqrt() as i64;
    (r.saturating_sub(1)..=r + 1).any(|s| s >= 0 && s * s == x)
}

/// True iff the unit group of Z_v has an element of order 3.
pub fn spin_capable(v: u32) -> bool {
    // Cauchy: an element of order 3 exists iff 3 divides |Z_v^*|.
    v > 1 && zmod::units(v).len().is_multiple_of(3)
}

pub fn check_parameters(p: &ParameterSet) -> ParameterCheck {
    let v = p.v as i64;
    let identity = p.k.iter().map(|&k| k as i64 * (k as i64 - 1)).sum::<i64>()
        == p.lambda as i64 * (v - 1);
    let in_range = p.k.iter().all(|&k| k <= p.v);
    let special = p.is_special();
    let square_value = p.square_value();
    ParameterCheck {
        well_formed: identity && in_range && p.v % 2 == 1,
        gs_type: p.order() == v,
        special,
        square_value,
        square_ok: square_value.map(is_perfect_square),
        spin_capable: spin_capable(p.v),
    }
}

/// `count[d] = #{(x, y) in X^2 : x != y, x - y = d}`; `count[0]` is always 0.
pub fn difference_counts(x: &ResidueSet) -> Vec<u32> {
    let v = x.modulus();
    let mut counts = vec![0u32; v as usize];
    if x.len() < 2 {
        return counts;
    }
    // |X ∩ (X + d)| counts the pairs with x - y = d.
    for d in 1..v {
        counts[d as usize] = x.intersection_len(&x.translate(d)) as u32;
    }
    counts
}

/// Periodic autocorrelation of the ±1 sequence of `x` (−1 on members).
pub fn paf(x: &ResidueSet) -> Vec<i64> {
    let v = x.modulus() as usize;
    let k = x.len() as i64;
    let counts = difference_counts(x);
    (0..v)
        .map(|s| if s == 0 { v as i64 } else { v as i64 - 4 * k + 4 * counts[s] as i64 })
        .collect()
}

/// Four blocks `(X0, X1, X2, X3)` over a common Z_v.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DifferenceFamily {
    v: u32,
    blocks: [ResidueSet; 4],
}

impl DifferenceFamily {
    pub fn new(blocks: [ResidueSet; 4]) -> Result<Self> {
        let v = blocks[0].modulus();
        for b in &blocks[1..] {
            if b.modulus() != v {
                return Err(Error::ModulusMismatch(v, b.modulus()));
            }
        }
        Ok(DifferenceFamily { v, blocks })
    }

    /// `(X0, X1, mu X1, mu^2 X1)`.
    pub fn from_multiplier(x0: ResidueSet, x1: ResidueSet, mu: u32) -> Result<Self> {
        let x2 = x1.scale(mu)?;
        let x3 = x2.scale(mu)?;
        Self::new([x0, x1, x2, x3])
    }

    pub fn modulus(&self) -> u32 {
        self.v
    }

    pub fn blocks(&self) -> &[ResidueSet; 4] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &ResidueSet {
        &self.blocks[i]
    }

    pub fn sizes(&self) -> [u32; 4] {
        [0, 1, 2, 3].map(|i| self.blocks[i].len() as u32)
    }

    /// Summed difference counts over the four blocks.
    pub fn combined_counts(&self) -> Vec<u32> {
        let per_block: Vec<Vec<u32>> = self.blocks.iter().map(difference_counts).collect();
        let mut total = vec![0u32; self.v as usize];
        for c in per_block {
            for (t, x) in total.iter_mut().zip(c) {
                *t += x;
            }
        }
        total
    }

    /// The family with X1 and X3 interchanged.
    pub fn swap_outer(&self) -> Self {
        let [x0, x1, x2, x3] = self.blocks.clone();
        DifferenceFamily { v: self.v, blocks: [x0, x3, x2, x1] }
    }
}

impl fmt::Debug for DifferenceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DifferenceFamily")
            .field("v", &self.v)
            .field("X0", &self.blocks[0].to_vec())
            .field("X1", &self.blocks[1].to_vec())
            .field("X2", &self.blocks[2].to_vec())
            .field("X3", &self.blocks[3].to_vec())
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verification {
    pub valid: bool,
    /// Realized parameters; present only when valid.
    pub params: Option<ParameterSet>,
    /// Summed difference counts indexed by d (entry 0 unused).
    pub per_d: Vec<u32>,
}

impl Verification {
    pub fn is_gs_type(&self) -> bool {
        self.params.is_some_and(|p| p.order() == p.v as i64)
    }
}

pub fn verify(f: &DifferenceFamily) -> Verification {
    let per_d = f.combined_counts();
    let lambda = per_d.get(1).copied().unwrap_or(0);
    let valid = per_d.iter().skip(1).all(|&c| c == lambda);
    let params = valid.then(|| ParameterSet::new(f.v, f.sizes(), lambda));
    Verification { valid, params, per_d }
}

/// Replaces block `i` by its complement. A valid `(λ, k_i)` family becomes a
/// valid family with `λ + v - 2k_i` and `v - k_i`.
pub fn complement_block(f: &DifferenceFamily, i: usize) -> Result<DifferenceFamily> {
    if i > 3 {
        return Err(Error::BlockIndex(i));
    }
    let mut blocks = f.blocks.clone();
    blocks[i] = blocks[i].complement();
    Ok(DifferenceFamily { v: f.v, blocks })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Spin,
    Slide,
    None,
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructureKind::Spin => "spin",
            StructureKind::Slide => "slide",
            StructureKind::None => "none",
        })
    }
}

impl FromStr for StructureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spin" => Ok(StructureKind::Spin),
            "slide" => Ok(StructureKind::Slide),
            "none" => Ok(StructureKind::None),
            _ => Err(Error::Parse(format!("unknown structure {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymmetryType {
    Symmetric,
    Skew,
    Neither,
}

impl SymmetryType {
    pub fn of(x: &ResidueSet) -> Self {
        if x.is_symmetric() {
            SymmetryType::Symmetric
        } else if x.is_skew() {
            SymmetryType::Skew
        } else {
            SymmetryType::Neither
        }
    }

    pub fn letter(self) -> char {
        match self {
            SymmetryType::Symmetric => 's',
            SymmetryType::Skew => 'k',
            SymmetryType::Neither => '*',
        }
    }
}

/// Symmetry letters of `(X0, X1)`: `s`, `k`, or `*` for neither.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SymmetrySymbol(pub SymmetryType, pub SymmetryType);

impl fmt::Display for SymmetrySymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0.letter(), self.1.letter())
    }
}

/// A claimed symbol where `*` means "no claim".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymbolPattern(pub Option<SymmetryType>, pub Option<SymmetryType>);

impl SymbolPattern {
    pub fn matches(&self, s: &SymmetrySymbol) -> bool {
        self.0.is_none_or(|t| t == s.0) && self.1.is_none_or(|t| t == s.1)
    }
}

impl FromStr for SymbolPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let letter = |c: char| match c {
            's' => Ok(Some(SymmetryType::Symmetric)),
            'k' => Ok(Some(SymmetryType::Skew)),
            '*' => Ok(None),
            _ => Err(Error::Parse(format!("bad symmetry letter {c:?} in {s:?}"))),
        };
        let cs: Vec<char> = s.chars().collect();
        if cs.len() != 2 {
            return Err(Error::Parse(format!("symmetry symbol must have two letters, got {s:?}")));
        }
        Ok(SymbolPattern(letter(cs[0])?, letter(cs[1])?))
    }
}

impl fmt::Display for SymbolPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = |t: Option<SymmetryType>| t.map_or('*', SymmetryType::letter);
        write!(f, "{}{}", l(self.0), l(self.1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedClass {
    Williamson,
    Good,
    Best,
}

impl fmt::Display for NamedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NamedClass::Williamson => "williamson",
            NamedClass::Good => "good",
            NamedClass::Best => "best",
        })
    }
}

impl FromStr for NamedClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "williamson" => Ok(NamedClass::Williamson),
            "good" => Ok(NamedClass::Good),
            "best" => Ok(NamedClass::Best),
            _ => Err(Error::Parse(format!("unknown class {s:?}"))),
        }
    }
}

pub fn named_classes(f: &DifferenceFamily) -> Vec<NamedClass> {
    let t = f.blocks.clone().map(|b| SymmetryType::of(&b));
    let outer = |want: SymmetryType| t[1..].iter().all(|&x| x == want);
    let mut out = Vec::new();
    if t[0] == SymmetryType::Symmetric && outer(SymmetryType::Symmetric) {
        out.push(NamedClass::Williamson);
    }
    if t[0] == SymmetryType::Skew && outer(SymmetryType::Symmetric) {
        out.push(NamedClass::Good);
    }
    if t[0] == SymmetryType::Symmetric && outer(SymmetryType::Skew) {
        out.push(NamedClass::Best);
    }
    out
}

/// Classification of a `(family, multiplier)` pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureReport {
    pub kind: StructureKind,
    pub mu: u32,
    pub mu_order: u32,
    pub fixes_x0: bool,
    pub symbol: SymmetrySymbol,
    pub classes: Vec<NamedClass>,
    /// `X3 = -X1`, which lets X3 be replaced by a repeated X1.
    pub x3_is_neg_x1: bool,
}

pub fn classify(f: &DifferenceFamily, mu: u32) -> Result<StructureReport> {
    let v = f.v;
    let mu_order = zmod::unit_order(v, mu)?;
    let mu = mu % v;
    let [x0, x1, x2, x3] = &f.blocks;
    let chained = x1.scale_unchecked(mu) == *x2 && x2.scale_unchecked(mu) == *x3;
    let closes = x3.scale_unchecked(mu) == *x1;
    let kind = match (chained && mu_order != 1, closes) {
        (true, true) => StructureKind::Spin,
        (true, false) => StructureKind::Slide,
        (false, _) => StructureKind::None,
    };
    Ok(StructureReport {
        kind,
        mu,
        mu_order,
        fixes_x0: x0.scale_unchecked(mu) == *x0,
        symbol: SymmetrySymbol(SymmetryType::of(x0), SymmetryType::of(x1)),
        classes: named_classes(f),
        x3_is_neg_x1: *x3 == x1.negate(),
    })
}

/// Every unit μ ≠ 1 under which the family has spin or slide structure, ascending.
pub fn find_multipliers(f: &DifferenceFamily) -> Vec<StructureReport> {
    zmod::units(f.v)
        .into_iter()
        .filter(|&m| m != 1 % f.v.max(1))
        .filter_map(|m| classify(f, m).ok())
        .filter(|r| r.kind != StructureKind::None)
        .collect()
}
