//! Prime chains under `σ(p) = 2p + 1` (when prime) and the head/trivial census.
//!
//! A chain head is a prime p with `(p - 1)/2` not prime; the chain from p is
//! `p, σ(p), σ²(p), ...` up to the σ-fixed point. These are the complete
//! Cunningham chains of the first kind, and they partition the primes.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin; the first twelve prime bases are exact for all u64.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for p in BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n + 1;
    while !is_prime(c) {
        c += 1;
    }
    c
}

const SEGMENT_BITS: usize = 1 << 18;

/// Primality table for all `n <= limit`, one bit per odd number.
pub struct Sieve {
    limit: u64,
    odd: Vec<u64>,
}

impl Sieve {
    /// Segmented sieve of Eratosthenes; segments are filled in parallel.
    pub fn new(limit: u64) -> Self {
        let n_odd = (limit as usize).div_ceil(2); // odd numbers 1, 3, ..., <= limit
        let words = n_odd.div_ceil(64).max(1);
        let mut odd = vec![!0u64; words];
        let root = (limit as f64).sqrt() as u64 + 1;
        let base = small_primes(root);
        let seg_words = SEGMENT_BITS / 64;
        odd.par_chunks_mut(seg_words).enumerate().for_each(|(si, chunk)| {
            let lo = (si * SEGMENT_BITS) as u64; // index of first odd in segment
            let hi = lo + chunk.len() as u64 * 64;
            for &p in base.iter().skip(1) {
                // odd multiples of p starting at p*p; index of m is (m - 1)/2
                let start = p * p;
                let first_idx = (start - 1) / 2;
                let mut idx = if first_idx >= lo {
                    first_idx
                } else {
                    let off = (lo - first_idx) % p;
                    if off == 0 {
                        lo
                    } else {
                        lo + p - off
                    }
                };
                while idx < hi {
                    let local = (idx - lo) as usize;
                    chunk[local / 64] &= !(1u64 << (local % 64));
                    idx += p;
                }
            }
        });
        // 1 is not prime
        odd[0] &= !1;
        let mut s = Sieve { limit, odd };
        s.clear_beyond(n_odd);
        s
    }

    fn clear_beyond(&mut self, n_odd: usize) {
        let total = self.odd.len() * 64;
        for idx in n_odd..total {
            self.odd[idx / 64] &= !(1u64 << (idx % 64));
        }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Primality of `n`, answered from the table when in range.
    pub fn is_prime(&self, n: u64) -> bool {
        if n > self.limit {
            return is_prime(n);
        }
        if n == 2 {
            return true;
        }
        if n < 2 || n.is_multiple_of(2) {
            return false;
        }
        let idx = (n / 2) as usize;
        (self.odd[idx / 64] >> (idx % 64)) & 1 == 1
    }

    /// Primes up to the limit in ascending order.
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        let two = (self.limit >= 2).then_some(2u64);
        two.into_iter().chain(self.odd.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as u64;
                w &= w - 1;
                Some(2 * (wi as u64 * 64 + b) + 1)
            })
        }))
    }

    pub fn count_up_to(&self, n: u64) -> u64 {
        self.primes().take_while(|&p| p <= n).count() as u64
    }
}

fn small_primes(n: u64) -> Vec<u64> {
    let n = n as usize;
    let mut comp = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !comp[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                comp[j] = true;
                j += i;
            }
        }
    }
    out
}

fn require_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::NotPrime(p))
    }
}

fn double_plus_one(p: u64) -> Option<u64> {
    p.checked_mul(2).and_then(|x| x.checked_add(1))
}

/// `2p + 1` if that is prime, else `p`.
pub fn sigma(p: u64) -> Result<u64> {
    require_prime(p)?;
    Ok(match double_plus_one(p) {
        Some(q) if is_prime(q) => q,
        _ => p,
    })
}

/// True iff `(p - 1)/2` is not a prime integer.
pub fn is_head(p: u64) -> Result<bool> {
    require_prime(p)?;
    Ok(head_unchecked(p, is_prime))
}

fn head_unchecked(p: u64, prime: impl Fn(u64) -> bool) -> bool {
    p.is_multiple_of(2) || !prime((p - 1) / 2)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrimeChain {
    elements: Vec<u64>,
}

impl PrimeChain {
    pub fn head(&self) -> u64 {
        self.elements[0]
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }
}

/// The full chain headed by `p`.
pub fn chain(p: u64) -> Result<PrimeChain> {
    if !is_head(p)? {
        return Err(Error::NotChainHead(p));
    }
    let mut elements = vec![p];
    let mut cur = p;
    loop {
        let next = sigma(cur)?;
        if next == cur {
            break;
        }
        elements.push(next);
        cur = next;
    }
    Ok(PrimeChain { elements })
}

/// One census line: `N` is the smallest prime above `10^e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CensusRow {
    pub e: u32,
    pub n: u64,
    /// Primes `<= N`.
    pub pi: u64,
    /// Chain heads `<= N`.
    pub pi_head: u64,
    /// Heads `<= N` whose chain is trivial.
    pub pi_trivial: u64,
}

impl CensusRow {
    /// `pi_trivial / pi_head` to ten places, round-half-even; exactly `0` when
    /// no head is trivial.
    pub fn ratio(&self) -> String {
        format_ratio(self.pi_trivial, self.pi_head, 10)
    }
}

impl fmt::Display for CensusRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.e,
            self.n,
            self.pi,
            self.pi_head,
            self.pi_trivial,
            self.ratio()
        )
    }
}

pub const CENSUS_HEADER: &str = "e\tN\tpi\tpi_head\tpi_trivial\tratio";

/// Exact decimal rendering of `num/den`, rounded half-to-even.
pub fn format_ratio(num: u64, den: u64, places: u32) -> String {
    if num == 0 || den == 0 {
        return "0".to_string();
    }
    let scale = 10u128.pow(places);
    let n = num as u128 * scale;
    let d = den as u128;
    let (mut q, r) = (n / d, n % d);
    match (2 * r).cmp(&d) {
        std::cmp::Ordering::Greater => q += 1,
        std::cmp::Ordering::Equal if q % 2 == 1 => q += 1,
        _ => {}
    }
    let int = q / scale;
    let frac = q % scale;
    format!("{int}.{frac:0width$}", width = places as usize)
}

pub const DEFAULT_EMAX: u32 = 6;
pub const MAX_EMAX: u32 = 8;

/// Census rows for `e = 1..=e_max`. Heads are counted up to N even when their
/// chains run past it.
pub fn census(e_max: u32) -> Result<Vec<CensusRow>> {
    if !(1..=MAX_EMAX).contains(&e_max) {
        return Err(Error::Parse(format!("e_max must be in 1..={MAX_EMAX}, got {e_max}")));
    }
    let bounds: Vec<(u32, u64)> =
        (1..=e_max).map(|e| (e, next_prime(10u64.pow(e)))).collect();
    let n_max = bounds.last().map(|b| b.1).unwrap_or(2);
    // 2p + 1 for p <= N must be answerable from the table.
    let sieve = Sieve::new(2 * n_max + 1);
    let (mut pi, mut heads, mut trivial) = (0u64, 0u64, 0u64);
    let mut rows = Vec::with_capacity(bounds.len());
    let mut next = bounds.iter().peekable();
    for p in sieve.primes() {
        while let Some(&&(e, n)) = next.peek() {
            if p > n {
                rows.push(CensusRow { e, n, pi, pi_head: heads, pi_trivial: trivial });
                next.next();
            } else {
                break;
            }
        }
        if next.peek().is_none() {
            break;
        }
        pi += 1;
        if head_unchecked(p, |q| sieve.is_prime(q)) {
            heads += 1;
            if !sieve.is_prime(2 * p + 1) {
                trivial += 1;
            }
        }
    }
    Ok(rows)
}

pub fn census_tsv(rows: &[CensusRow]) -> String {
    let mut s = String::from(CENSUS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}
