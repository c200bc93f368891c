//! The Goethals-Seidel array and bit-packed ±1 matrices.
//!
//! Rows are packed one bit per entry with bit = 1 meaning −1, so the inner
//! product of two rows of length N is `N - 2 * popcount(a XOR b)`.
//!
//! With `A_i = circ(pm_row(X_i))` and `R[i][j] = 1` iff `i + j ≡ 0 (mod v)`,
//! the assembled matrix is
//!
//! ```text
//!  A0     A1 R    A2 R    A3 R
//! -A1 R   A0     -R A3    R A2
//! -A2 R   R A3    A0     -R A1
//! -A3 R  -R A2    R A1    A0
//! ```

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::DifferenceFamily;
use crate::zmod::ResidueSet;

const WORD: usize = 64;

/// A square matrix with entries in {+1, −1}.
#[derive(Clone, PartialEq, Eq)]
pub struct PmMatrix {
    order: usize,
    stride: usize,
    bits: Vec<u64>,
}

impl PmMatrix {
    /// The all-(+1) matrix.
    pub fn ones(order: usize) -> Self {
        let stride = order.div_ceil(WORD).max(1);
        PmMatrix { order, stride, bits: vec![0; stride * order] }
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::ones(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse(format!("row {i} has length {}, expected {n}", row.len())));
            }
            for (j, &e) in row.iter().enumerate() {
                match e {
                    1 => {}
                    -1 => m.set(i, j, -1),
                    _ => return Err(Error::Parse(format!("entry ({i},{j}) is {e}, expected ±1"))),
                }
            }
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    fn row_words(&self, i: usize) -> &[u64] {
        &self.bits[i * self.stride..(i + 1) * self.stride]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        if (self.bits[i * self.stride + j / WORD] >> (j % WORD)) & 1 == 1 {
            -1
        } else {
            1
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, e: i8) {
        let w = &mut self.bits[i * self.stride + j / WORD];
        if e < 0 {
            *w |= 1 << (j % WORD);
        } else {
            *w &= !(1 << (j % WORD));
        }
    }

    pub fn row(&self, i: usize) -> Vec<i8> {
        (0..self.order).map(|j| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::ones(self.order);
        for i in 0..self.order {
            for j in 0..self.order {
                if self.get(i, j) < 0 {
                    t.set(j, i, -1);
                }
            }
        }
        t
    }

    pub fn negated(&self) -> Self {
        let mut m = self.clone();
        for i in 0..m.order {
            for j in 0..m.order {
                let e = m.get(i, j);
                m.set(i, j, -e);
            }
        }
        m
    }

    /// Inner product of rows `i` and `j`.
    #[inline]
    pub fn row_dot(&self, i: usize, j: usize) -> i64 {
        let diff: u32 = self
            .row_words(i)
            .iter()
            .zip(self.row_words(j))
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        self.order as i64 - 2 * diff as i64
    }

    /// `M Mᵀ = N I`, checked over all row pairs.
    pub fn is_hadamard(&self) -> bool {
        (0..self.order)
            .into_par_iter()
            .all(|i| ((i + 1)..self.order).all(|j| self.row_dot(i, j) == 0))
    }

    /// `M + Mᵀ = 2I`: unit diagonal and `M[i][j] = -M[j][i]` elsewhere.
    pub fn is_skew_type(&self) -> bool {
        (0..self.order).into_par_iter().all(|i| {
            self.get(i, i) == 1 && ((i + 1)..self.order).all(|j| self.get(i, j) == -self.get(j, i))
        })
    }

    /// `A P` for the permutation matrix with `P[k][j] = 1` iff `k = perm[j]`.
    pub fn permute_columns(&self, perm: &Permutation) -> Self {
        let mut out = Self::ones(self.order);
        for i in 0..self.order {
            for j in 0..self.order {
                out.set(i, j, self.get(i, perm.image(j)));
            }
        }
        out
    }

    /// `P A` for the permutation matrix with `P[i][k] = 1` iff `k = perm[i]`.
    pub fn permute_rows(&self, perm: &Permutation) -> Self {
        let mut out = Self::ones(self.order);
        for i in 0..self.order {
            for j in 0..self.order {
                out.set(i, j, self.get(perm.image(i), j));
            }
        }
        out
    }

    /// Text form: `order N`, then N lines over `{+,-}`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.order * (self.order + 1) + 16);
        let _ = writeln!(s, "order {}", self.order);
        for i in 0..self.order {
            for j in 0..self.order {
                s.push(if self.get(i, j) < 0 { '-' } else { '+' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let n: usize = header
            .strip_prefix("order ")
            .and_then(|x| x.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        let mut m = Self::ones(n);
        let mut count = 0;
        for (i, line) in lines.enumerate() {
            if i >= n {
                return Err(Error::Parse(format!("more than {n} rows")));
            }
            if line.len() != n {
                return Err(Error::Parse(format!("row {i} has length {}, expected {n}", line.len())));
            }
            for (j, c) in line.chars().enumerate() {
                match c {
                    '+' => {}
                    '-' => m.set(i, j, -1),
                    _ => return Err(Error::Parse(format!("row {i}: unexpected {c:?}"))),
                }
            }
            count += 1;
        }
        if count != n {
            return Err(Error::Parse(format!("expected {n} rows, found {count}")));
        }
        Ok(m)
    }
}

impl std::fmt::Debug for PmMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PmMatrix({})\n{}", self.order, self.to_text())
    }
}

/// `+1` off the set, `−1` on it.
pub fn pm_row(x: &ResidueSet) -> Vec<i8> {
    (0..x.modulus()).map(|j| if x.contains(j) { -1 } else { 1 }).collect()
}

/// Row `i` is `first_row` cyclically shifted right by `i`.
pub fn circulant(first_row: &[i8]) -> PmMatrix {
    let v = first_row.len();
    let mut m = PmMatrix::ones(v);
    for i in 0..v {
        for j in 0..v {
            if first_row[(j + v - i) % v] < 0 {
                m.set(i, j, -1);
            }
        }
    }
    m
}

/// A permutation of `0..n`, used for the 0/1 back-identity matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { images: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, i: usize) -> usize {
        self.images[i]
    }

    /// `(self ∘ other)`, i.e. the matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        Permutation { images: other.images.iter().map(|&k| self.images[k]).collect() }
    }

    /// Dense 0/1 form: entry `(i, j)` is 1 iff `j = image(i)`.
    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let n = self.images.len();
        (0..n)
            .map(|i| (0..n).map(|j| u8::from(self.images[i] == j)).collect())
            .collect()
    }
}

/// `R[i][j] = 1` iff `i + j ≡ 0 (mod v)`.
pub fn back_identity(v: usize) -> Permutation {
    Permutation { images: (0..v).map(|i| (v - i) % v).collect() }
}

#[derive(Clone, Copy)]
enum Tile {
    /// `A_i`
    Plain(usize),
    /// `A_i R`
    Right(usize),
    /// `R A_i`
    Left(usize),
}

const LAYOUT: [[(i8, Tile); 4]; 4] = {
    use Tile::*;
    [
        [(1, Plain(0)), (1, Right(1)), (1, Right(2)), (1, Right(3))],
        [(-1, Right(1)), (1, Plain(0)), (-1, Left(3)), (1, Left(2))],
        [(-1, Right(2)), (1, Left(3)), (1, Plain(0)), (-1, Left(1))],
        [(-1, Right(3)), (-1, Left(2)), (1, Left(1)), (1, Plain(0))],
    ]
};

/// The `4v × 4v` Goethals-Seidel matrix of a family.
pub fn assemble_gs(f: &DifferenceFamily) -> PmMatrix {
    let v = f.modulus() as usize;
    let rows: Vec<Vec<i8>> = f.blocks().iter().map(pm_row).collect();
    let mut m = PmMatrix::ones(4 * v);
    for (bi, tiles) in LAYOUT.iter().enumerate() {
        for (bj, &(sign, tile)) in tiles.iter().enumerate() {
            for r in 0..v {
                for c in 0..v {
                    // circ(a)[r][c] = a[c - r]; (A R)[r][c] = a[-c - r]; (R A)[r][c] = a[r + c]
                    let e = match tile {
                        Tile::Plain(i) => rows[i][(c + v - r) % v],
                        Tile::Right(i) => rows[i][(2 * v - c - r) % v],
                        Tile::Left(i) => rows[i][(r + c) % v],
                    };
                    if sign * e < 0 {
                        m.set(bi * v + r, bj * v + c, -1);
                    }
                }
            }
        }
    }
    m
}

pub fn is_hadamard(m: &PmMatrix) -> bool {
    m.is_hadamard()
}

pub fn is_skew_type(m: &PmMatrix) -> bool {
    m.is_skew_type()
}
