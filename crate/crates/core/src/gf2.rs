//! Dense linear algebra over GF(2).
//!
//! Bits are packed little-endian into `u64` words: bit `i` lives in word
//! `i / 64` at position `i % 64`. Bits past `len` in the last word are always
//! zero, which lets parity and equality work on whole words.
//!
//! [`Eliminator`] is the workhorse of the decoders. It accepts equations one at
//! a time and keeps them in echelon form, so the rank is known after every
//! insertion without re-running elimination.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Gf2Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("underdetermined system: rank {rank} < {cols} unknowns")]
    Underdetermined { rank: usize, cols: usize },
    #[error("inconsistent system")]
    Inconsistent,
    #[error("invalid bit string: {0:?}")]
    Parse(String),
}

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[inline]
fn tail_mask(bits: usize) -> u64 {
    match bits % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

#[inline]
fn parity_of_and(a: &[u64], b: &[u64]) -> bool {
    let mut acc = 0u64;
    for (x, y) in a.iter().zip(b) {
        acc ^= x & y;
    }
    acc.count_ones() & 1 == 1
}

/// A fixed-length vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = BitVector {
            len,
            words: vec![u64::MAX; words_for(len)],
        };
        v.clear_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = BitVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Builds a vector from packed words; bits beyond `len` are discarded.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Self {
        words.resize(words_for(len), 0);
        let mut v = BitVector { len, words };
        v.clear_tail();
        v
    }

    /// Uniformly random vector; consumes `ceil(len / 64)` words from `rng`.
    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let words = (0..words_for(len)).map(|_| rng.next_u64()).collect();
        BitVector::from_words(len, words)
    }

    fn clear_tail(&mut self) {
        if let Some(last) = self.words.last_mut() {
            *last &= tail_mask(self.len);
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn all(&self) -> bool {
        self.count_ones() == self.len
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn and(&self, other: &BitVector) -> BitVector {
        assert_eq!(self.len, other.len, "length mismatch in and");
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect();
        BitVector { len: self.len, words }
    }

    /// `self & !other`.
    pub fn and_not(&self, other: &BitVector) -> BitVector {
        assert_eq!(self.len, other.len, "length mismatch in and_not");
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect();
        BitVector { len: self.len, words }
    }

    /// GF(2) inner product. Panics on length mismatch; see [`encode`] for the
    /// checked version.
    #[inline]
    pub fn dot(&self, other: &BitVector) -> bool {
        assert_eq!(self.len, other.len, "length mismatch in dot");
        parity_of_and(&self.words, &other.words)
    }

    /// Gathers the bits at `indices` into a new vector.
    pub fn gather(&self, indices: &[u32]) -> BitVector {
        let mut out = BitVector::zeros(indices.len());
        for (j, &i) in indices.iter().enumerate() {
            if self.get(i as usize) {
                out.words[j / 64] |= 1u64 << (j % 64);
            }
        }
        out
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitVector {
    type Err = Gf2Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Gf2Error::Parse(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BitVector::from_bools(&bits))
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Dense row-major matrix over GF(2).
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        BitMatrix {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BitMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(cols: usize, rows: &[BitVector]) -> Result<Self, Gf2Error> {
        let mut m = BitMatrix::zeros(0, cols);
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &BitVector) -> Result<(), Gf2Error> {
        if row.len() != self.cols {
            return Err(Gf2Error::InvalidDimension(format!(
                "row has {} bits, matrix has {} columns",
                row.len(),
                self.cols
            )));
        }
        self.data.extend_from_slice(row.words());
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols);
        (self.data[r * self.stride + c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, bit: bool) {
        assert!(r < self.rows && c < self.cols);
        let w = &mut self.data[r * self.stride + c / 64];
        let mask = 1u64 << (c % 64);
        if bit {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row(&self, r: usize) -> BitVector {
        BitVector::from_words(self.cols, self.row_words(r).to_vec())
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.stride {
            self.data.swap(a * self.stride + w, b * self.stride + w);
        }
    }

    /// Row `dst` ^= row `src`.
    pub fn add_row(&mut self, dst: usize, src: usize) {
        assert_ne!(dst, src);
        for w in 0..self.stride {
            let v = self.data[src * self.stride + w];
            self.data[dst * self.stride + w] ^= v;
        }
    }

    /// Matrix-vector product over GF(2).
    pub fn mul_vec(&self, x: &BitVector) -> Result<BitVector, Gf2Error> {
        if x.len() != self.cols {
            return Err(Gf2Error::InvalidDimension(format!(
                "vector has {} bits, matrix has {} columns",
                x.len(),
                self.cols
            )));
        }
        let mut out = BitVector::zeros(self.rows);
        for r in 0..self.rows {
            out.set(r, parity_of_and(self.row_words(r), x.words()));
        }
        Ok(out)
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {}", self.row(r))?;
        }
        Ok(())
    }
}

/// Outcome of inserting one equation into an [`Eliminator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    /// The equation raised the rank by one.
    Innovative,
    /// The coefficient row reduced to zero with a zero right-hand side.
    Redundant,
    /// The coefficient row reduced to zero but the right-hand side did not.
    Inconsistent,
}

const NO_ROW: u32 = u32::MAX;

/// Incremental Gaussian elimination over GF(2).
///
/// Stored rows are in echelon form: every row has a distinct leading column
/// and no stored row has a set bit below its own leading column. Pivots are
/// chosen as the first nonzero column of the reduced incoming row.
#[derive(Clone, Debug)]
pub struct Eliminator {
    cols: usize,
    stride: usize,
    rows: Vec<u64>,
    rhs: Vec<bool>,
    row_of_col: Vec<u32>,
    scratch: Vec<u64>,
    inconsistent: bool,
}

impl Eliminator {
    pub fn new(cols: usize) -> Self {
        let stride = words_for(cols);
        Eliminator {
            cols,
            stride,
            rows: Vec::new(),
            rhs: Vec::new(),
            row_of_col: vec![NO_ROW; cols],
            scratch: vec![0; stride],
            inconsistent: false,
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rank(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.cols
    }

    pub fn is_consistent(&self) -> bool {
        !self.inconsistent
    }

    pub fn has_pivot(&self, col: usize) -> bool {
        self.row_of_col[col] != NO_ROW
    }

    /// Inserts the equation `row · x = rhs`.
    ///
    /// Panics if `row` does not have `cols` bits.
    pub fn insert(&mut self, row: &BitVector, rhs: bool) -> Insertion {
        assert_eq!(row.len(), self.cols, "equation width mismatch");
        self.insert_words(row.words(), rhs)
    }

    pub fn insert_words(&mut self, row: &[u64], mut rhs: bool) -> Insertion {
        debug_assert_eq!(row.len(), self.stride);
        let stride = self.stride;
        self.scratch.copy_from_slice(row);
        for w in 0..stride {
            loop {
                let word = self.scratch[w];
                if word == 0 {
                    break;
                }
                let col = w * 64 + word.trailing_zeros() as usize;
                let r = self.row_of_col[col];
                if r == NO_ROW {
                    self.row_of_col[col] = self.rhs.len() as u32;
                    self.rows.extend_from_slice(&self.scratch);
                    self.rhs.push(rhs);
                    return Insertion::Innovative;
                }
                let base = r as usize * stride;
                let pivot = &self.rows[base + w..base + stride];
                for (dst, src) in self.scratch[w..].iter_mut().zip(pivot) {
                    *dst ^= src;
                }
                rhs ^= self.rhs[r as usize];
            }
        }
        if rhs {
            self.inconsistent = true;
            Insertion::Inconsistent
        } else {
            Insertion::Redundant
        }
    }

    /// Back-substitution over the pivot columns.
    ///
    /// Columns without a pivot are reported as zero, which is the correct
    /// value only when every stored row is zero on those columns (for example
    /// when they were masked out before insertion).
    pub fn back_substitute(&self) -> BitVector {
        let mut x = BitVector::zeros(self.cols);
        for col in (0..self.cols).rev() {
            let r = self.row_of_col[col];
            if r == NO_ROW {
                continue;
            }
            let base = r as usize * self.stride;
            let row = &self.rows[base..base + self.stride];
            let value = self.rhs[r as usize] ^ parity_of_and(row, x.words());
            if value {
                x.set(col, true);
            }
        }
        x
    }

    /// The unique solution, once the system has full column rank.
    pub fn solution(&self) -> Result<BitVector, Gf2Error> {
        if self.inconsistent {
            return Err(Gf2Error::Inconsistent);
        }
        if !self.is_full_rank() {
            return Err(Gf2Error::Underdetermined {
                rank: self.rank(),
                cols: self.cols,
            });
        }
        Ok(self.back_substitute())
    }
}

/// Uniformly random generator row of `cols` bits.
pub fn random_row<R: RngCore + ?Sized>(cols: usize, rng: &mut R) -> Result<BitVector, Gf2Error> {
    if cols == 0 {
        return Err(Gf2Error::InvalidDimension("generator row needs at least one column".into()));
    }
    Ok(BitVector::random(cols, rng))
}

/// One coded bit: the GF(2) inner product of a generator row and a message.
pub fn encode(generator_row: &BitVector, message: &BitVector) -> Result<bool, Gf2Error> {
    if generator_row.len() != message.len() {
        return Err(Gf2Error::InvalidDimension(format!(
            "generator row has {} bits, message has {}",
            generator_row.len(),
            message.len()
        )));
    }
    Ok(generator_row.dot(message))
}

pub fn rank(m: &BitMatrix) -> usize {
    let mut elim = Eliminator::new(m.cols());
    for r in 0..m.rows() {
        elim.insert_words(m.row_words(r), false);
    }
    elim.rank()
}

/// Solves `coefficients · x = rhs`.
///
/// Overdetermined systems are accepted as long as they are consistent.
/// Inconsistency is reported in preference to rank deficiency.
pub fn solve(coefficients: &BitMatrix, rhs: &BitVector) -> Result<BitVector, Gf2Error> {
    if coefficients.rows() != rhs.len() {
        return Err(Gf2Error::InvalidDimension(format!(
            "{} equations but {} right-hand-side bits",
            coefficients.rows(),
            rhs.len()
        )));
    }
    let mut elim = Eliminator::new(coefficients.cols());
    for r in 0..coefficients.rows() {
        elim.insert_words(coefficients.row_words(r), rhs.get(r));
    }
    elim.solution()
}
