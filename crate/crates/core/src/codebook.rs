//! Permutation-matrix codebooks with dimming control.
//!
//! A message `m < 2^k`, `k = floor(log2(n_t!))`, is ranked into factoradic (Lehmer) digits and
//! unranked into an `n_t x n_t` permutation matrix. Rows are transmit antennas, columns are time
//! slots. Positions are counted from the rightmost column (position 0) to the leftmost one
//! (position `n_t - 1`). Higher dimming levels are reached either by extending every row's single
//! one into a cyclic run to its right ([`Method::Fill`]) or, for `(n_t - 1) / n_t`, by
//! complementing the permutation matrix ([`Method::Complement`]).

use std::cell::Cell;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported number of transmit antennas (`34!` is the largest factorial below `2^128`).
pub const MAX_TX: usize = 34;

/// Largest message length for which a codebook may be materialized.
pub const ENUMERATION_LIMIT_K: u32 = 24;

thread_local! {
    static ENUMERATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of codebook enumerations started on the current thread.
pub fn enumeration_count() -> u64 {
    ENUMERATIONS.with(Cell::get)
}

fn check_tx(n_t: usize) -> Result<()> {
    if n_t < 2 {
        return Err(invalid(format!("n_t must be at least 2, got {n_t}")));
    }
    if n_t > MAX_TX {
        return Err(invalid(format!("n_t must be at most {MAX_TX}, got {n_t}")));
    }
    Ok(())
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Message length `k = floor(log2(n_t!))`.
pub fn message_length(n_t: usize) -> Result<u32> {
    check_tx(n_t)?;
    Ok(127 - factorial(n_t).leading_zeros())
}

/// Code rate in bits per time slot, `k / n_t`.
pub fn code_rate(n_t: usize) -> Result<f64> {
    Ok(f64::from(message_length(n_t)?) / n_t as f64)
}

/// How dimming levels above `1 / n_t` are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Extend each row's one into a cyclic run of `M` ones to its right.
    Fill,
    /// Complement the permutation matrix; only for `M = n_t - 1`.
    Complement,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fill => "fill",
            Method::Complement => "complement",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fill" => Ok(Method::Fill),
            "complement" => Ok(Method::Complement),
            other => Err(invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Parses a dimming factor given as `p/q` or as a decimal and returns the number of ones per
/// row, `M = gamma * n_t`.
pub fn parse_gamma(text: &str, n_t: usize) -> Result<usize> {
    let text = text.trim();
    let gamma = match text.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| invalid(format!("bad gamma '{text}'")))?;
            let q: f64 = q.trim().parse().map_err(|_| invalid(format!("bad gamma '{text}'")))?;
            if q == 0.0 {
                return Err(invalid(format!("bad gamma '{text}'")));
            }
            p / q
        }
        None => text.parse().map_err(|_| invalid(format!("bad gamma '{text}'")))?,
    };
    ones_for_gamma(gamma, n_t)
}

fn ones_for_gamma(gamma: f64, n_t: usize) -> Result<usize> {
    let scaled = gamma * n_t as f64;
    let ones = scaled.round();
    if !scaled.is_finite() || (scaled - ones).abs() > 1e-9 {
        return Err(invalid(format!("gamma * n_t = {scaled} is not an integer")));
    }
    if ones < 1.0 || ones > (n_t - 1) as f64 {
        return Err(invalid(format!("gamma * n_t = {ones} outside [1, {}]", n_t - 1)));
    }
    Ok(ones as usize)
}

/// Identifies one codebook: antenna count, ones per row and construction method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodebookSpec {
    n_t: usize,
    ones: usize,
    method: Method,
}

impl CodebookSpec {
    /// `ones` is `M = gamma * n_t`, the weight of every row and column.
    pub fn new(n_t: usize, ones: usize, method: Method) -> Result<Self> {
        check_tx(n_t)?;
        if ones < 1 || ones > n_t - 1 {
            return Err(invalid(format!("ones per row must lie in [1, {}], got {ones}", n_t - 1)));
        }
        if method == Method::Complement && ones != n_t - 1 {
            return Err(invalid(format!(
                "complement method only reaches gamma = {}/{n_t}",
                n_t - 1
            )));
        }
        Ok(Self { n_t, ones, method })
    }

    pub fn from_gamma(n_t: usize, gamma: f64, method: Method) -> Result<Self> {
        check_tx(n_t)?;
        Self::new(n_t, ones_for_gamma(gamma, n_t)?, method)
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// Ones per row and per column.
    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn gamma(&self) -> f64 {
        self.ones as f64 / self.n_t as f64
    }

    pub fn k(&self) -> u32 {
        127 - factorial(self.n_t).leading_zeros()
    }

    pub fn size(&self) -> u128 {
        1u128 << self.k()
    }

    pub fn encode(&self, message: u128) -> Result<CodeMatrix> {
        let k = self.k();
        if message >= self.size() {
            return Err(Error::InvalidMessage { message, k });
        }
        let digits = LehmerDigits::from_message(self.n_t, message);
        let perm = CodeMatrix::from_positions(&digits.positions());
        Ok(match self.method {
            Method::Fill => dim_expand_unchecked(&perm, self.ones - 1),
            Method::Complement => complement(&perm),
        })
    }

    pub fn decode(&self, matrix: &CodeMatrix) -> Result<u128> {
        if matrix.n() != self.n_t {
            return Err(Error::NotACodeword(format!(
                "matrix is {0}x{0}, codebook needs {1}x{1}",
                matrix.n(),
                self.n_t
            )));
        }
        let perm = match self.method {
            Method::Fill => dim_contract(matrix, self.ones - 1)?,
            Method::Complement => dim_contract(&complement(matrix), 0)?,
        };
        let digits = LehmerDigits::from_positions(&perm.positions())?;
        let message = digits.to_message();
        if message >= self.size() {
            return Err(Error::NotACodeword(format!("rank {message} is not below 2^{}", self.k())));
        }
        Ok(message)
    }

    /// Codebook membership test in `O(n_t^2)`; never enumerates the codebook.
    pub fn validate(&self, matrix: &CodeMatrix) -> bool {
        if matrix.n() != self.n_t {
            return false;
        }
        let n = self.n_t;
        if (0..n).any(|i| matrix.row_weight(i) != self.ones || matrix.col_weight(i) != self.ones) {
            return false;
        }
        match self.decode(matrix) {
            Ok(m) => self.encode(m).is_ok_and(|x| &x == matrix),
            Err(_) => false,
        }
    }

    /// Iterates over `encode(m)` for `m = 0 .. 2^k` in order.
    pub fn enumerate(&self) -> Result<Codewords> {
        let k = self.k();
        if k > ENUMERATION_LIMIT_K {
            return Err(Error::CapacityExceeded { k, limit: ENUMERATION_LIMIT_K });
        }
        ENUMERATIONS.with(|c| c.set(c.get() + 1));
        Ok(Codewords { spec: *self, next: 0, end: self.size() })
    }

    pub fn codewords(&self) -> Result<Vec<CodeMatrix>> {
        Ok(self.enumerate()?.collect())
    }

    /// Exhaustive minimum pairwise Hamming distance.
    pub fn min_hamming_distance(&self) -> Result<MinDistance> {
        let masks: Vec<Vec<u64>> = self.enumerate()?.map(|x| x.row_masks()).collect();
        let distance = |a: &[u64], b: &[u64]| -> usize {
            a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as usize).sum()
        };
        let best_from = |i: usize| -> usize {
            masks[i + 1..].iter().map(|b| distance(&masks[i], b)).min().unwrap_or(usize::MAX)
        };
        #[cfg(feature = "parallel")]
        let hamming = {
            use rayon::prelude::*;
            (0..masks.len()).into_par_iter().map(best_from).min()
        };
        #[cfg(not(feature = "parallel"))]
        let hamming = (0..masks.len()).map(best_from).min();
        let hamming = hamming.unwrap_or(usize::MAX);
        Ok(MinDistance { hamming, euclidean_per_sqrt_es: (hamming as f64).sqrt() })
    }

    /// Worst-case zero run per antenna across consecutive codewords, `2 n_t (1 - gamma)`.
    pub fn max_run_length(&self) -> usize {
        2 * (self.n_t - self.ones)
    }

    /// Worst-case zero run per antenna measured on the codebook itself.
    ///
    /// Every row holds at least one 1, so a run spans at most two codewords: it is either inside
    /// a row or the trailing zeros of one codeword's row followed by the leading zeros of the
    /// next codeword's row on the same antenna. Maximizing those two independently over the
    /// codebook equals the scan over all ordered codeword pairs.
    pub fn max_run_length_scan(&self) -> Result<usize> {
        let n = self.n_t;
        let mut inner = vec![0usize; n];
        let mut leading = vec![0usize; n];
        let mut trailing = vec![0usize; n];
        for x in self.enumerate()? {
            for i in 0..n {
                let row = x.row(i);
                inner[i] = inner[i].max(longest_zero_run(row));
                leading[i] = leading[i].max(row.iter().take_while(|&&b| b == 0).count());
                trailing[i] = trailing[i].max(row.iter().rev().take_while(|&&b| b == 0).count());
            }
        }
        Ok((0..n).map(|i| inner[i].max(trailing[i] + leading[i])).max().unwrap_or(0))
    }

    /// Header line of the text dump format.
    pub fn dump_header(&self) -> String {
        format!(
            "# n_t={} gamma={}/{} method={} k={}",
            self.n_t,
            self.ones,
            self.n_t,
            self.method,
            self.k()
        )
    }

    /// Text dump: header, then one block per codeword with rows as space-separated bits.
    pub fn dump_text(&self) -> Result<String> {
        let mut out = self.dump_header();
        out.push('\n');
        for (i, x) in self.enumerate()?.enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for r in 0..self.n_t {
                let row: Vec<&str> =
                    x.row(r).iter().map(|&b| if b == 1 { "1" } else { "0" }).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        Ok(out)
    }

    /// JSON dump: an array of matrices, each an array of row strings such as `"0010"`.
    pub fn dump_json(&self) -> Result<String> {
        let all: Vec<Vec<String>> = self.enumerate()?.map(|x| x.row_strings()).collect();
        Ok(serde_json::to_string_pretty(&all).expect("string arrays always serialize"))
    }
}

/// A materialized codebook: the binary codewords and their real-valued copies for detection.
#[derive(Clone, Debug)]
pub struct Codebook {
    spec: CodebookSpec,
    words: Vec<CodeMatrix>,
    real: Vec<nalgebra::DMatrix<f64>>,
}

impl Codebook {
    pub fn new(spec: CodebookSpec) -> Result<Self> {
        let words = spec.codewords()?;
        let real = words.iter().map(CodeMatrix::to_dmatrix).collect();
        Ok(Self { spec, words, real })
    }

    pub fn spec(&self) -> &CodebookSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[CodeMatrix] {
        &self.words
    }

    pub fn real(&self) -> &[nalgebra::DMatrix<f64>] {
        &self.real
    }
}

fn longest_zero_run(row: &[u8]) -> usize {
    let (mut best, mut cur) = (0, 0);
    for &b in row {
        if b == 0 {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Minimum distance of a codebook.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinDistance {
    pub hamming: usize,
    /// Minimum Euclidean distance in units of `sqrt(E_s)`.
    pub euclidean_per_sqrt_es: f64,
}

/// Iterator over a codebook in message order.
#[derive(Clone, Debug)]
pub struct Codewords {
    spec: CodebookSpec,
    next: u128,
    end: u128,
}

impl Iterator for Codewords {
    type Item = CodeMatrix;

    fn next(&mut self) -> Option<CodeMatrix> {
        if self.next >= self.end {
            return None;
        }
        let x = self.spec.encode(self.next).expect("message below 2^k");
        self.next += 1;
        Some(x)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Codewords {}

/// Factoradic digits of a message and the residues they were peeled from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LehmerDigits {
    /// `P_i` with `0 <= P_i <= n_t - i` (1-based `i`).
    pub digits: Vec<usize>,
    /// `R_i`, with `R_1` the message itself.
    pub residues: Vec<u128>,
}

impl LehmerDigits {
    /// Peels `P_i = floor(R_i / (n_t - i)!)`, `R_i = R_{i-1} mod (n_t - i + 1)!`.
    pub fn from_message(n_t: usize, message: u128) -> Self {
        let mut digits = Vec::with_capacity(n_t);
        let mut residues = Vec::with_capacity(n_t);
        let mut residue = message;
        for i in 1..=n_t {
            if i > 1 {
                residue %= factorial(n_t - i + 1);
            }
            residues.push(residue);
            digits.push((residue / factorial(n_t - i)) as usize);
        }
        Self { digits, residues }
    }

    /// Digits of a permutation given by the positions of its ones, row by row: each position is
    /// lowered by the number of earlier rows holding a smaller position.
    pub fn from_positions(positions: &[usize]) -> Result<Self> {
        let n = positions.len();
        let mut digits = Vec::with_capacity(n);
        for (r, &p) in positions.iter().enumerate() {
            let below = positions[..r].iter().filter(|&&q| q < p).count();
            digits.push(p - below);
        }
        let message =
            digits.iter().enumerate().map(|(i, &d)| d as u128 * factorial(n - 1 - i)).sum();
        Ok(Self::from_message(n, message))
    }

    pub fn to_message(&self) -> u128 {
        let n = self.digits.len();
        self.digits.iter().enumerate().map(|(i, &d)| d as u128 * factorial(n - 1 - i)).sum()
    }

    /// Row-by-row positions: row `i` takes the `P_i`-th smallest position not used above it.
    pub fn positions(&self) -> Vec<usize> {
        let mut free: Vec<usize> = (0..self.digits.len()).collect();
        self.digits.iter().map(|&d| free.remove(d)).collect()
    }
}

/// An `n x n` binary code matrix, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CodeMatrix {
    n: usize,
    bits: Vec<u8>,
}

impl CodeMatrix {
    pub fn new(n: usize, bits: Vec<u8>) -> Result<Self> {
        if n == 0 || n > 64 || bits.len() != n * n {
            return Err(invalid(format!("need {n}x{n} entries, got {}", bits.len())));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(invalid("code matrix entries must be 0 or 1"));
        }
        Ok(Self { n, bits })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, bits: vec![0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut x = Self::zeros(n);
        for i in 0..n {
            x.set(i, i, 1);
        }
        x
    }

    /// Parses rows such as `"0010"`; whitespace inside a row is ignored.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let n = rows.len();
        let mut bits = Vec::with_capacity(n * n);
        for row in rows {
            for ch in row.as_ref().chars().filter(|c| !c.is_whitespace()) {
                match ch {
                    '0' => bits.push(0),
                    '1' => bits.push(1),
                    other => return Err(invalid(format!("unexpected character '{other}'"))),
                }
            }
        }
        Self::new(n, bits)
    }

    /// Permutation matrix with row `i` holding its one at position `positions[i]`.
    pub fn from_positions(positions: &[usize]) -> Self {
        let n = positions.len();
        let mut x = Self::zeros(n);
        for (i, &p) in positions.iter().enumerate() {
            x.set(i, n - 1 - p, 1);
        }
        x
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, bit: u8) {
        self.bits[row * self.n + col] = bit;
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.bits[row * self.n..(row + 1) * self.n]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn row_weight(&self, row: usize) -> usize {
        self.row(row).iter().map(|&b| b as usize).sum()
    }

    pub fn col_weight(&self, col: usize) -> usize {
        (0..self.n).map(|r| self.get(r, col) as usize).sum()
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn hamming_distance(&self, other: &CodeMatrix) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    /// Position (right-to-left column index) of the first one in each row. Panics on an
    /// all-zero row.
    pub fn positions(&self) -> Vec<usize> {
        (0..self.n)
            .map(|r| {
                let col = self.row(r).iter().position(|&b| b == 1).expect("row has a one");
                self.n - 1 - col
            })
            .collect()
    }

    pub fn is_permutation(&self) -> bool {
        (0..self.n).all(|i| self.row_weight(i) == 1 && self.col_weight(i) == 1)
    }

    /// Bit `c` of row mask `r` is entry `(r, c)`.
    pub fn row_masks(&self) -> Vec<u64> {
        (0..self.n)
            .map(|r| {
                self.row(r).iter().enumerate().fold(0u64, |m, (c, &b)| m | (u64::from(b) << c))
            })
            .collect()
    }

    pub fn row_strings(&self) -> Vec<String> {
        (0..self.n)
            .map(|r| self.row(r).iter().map(|&b| if b == 1 { '1' } else { '0' }).collect())
            .collect()
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |r, c| f64::from(self.get(r, c)))
    }
}

impl fmt::Debug for CodeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CodeMatrix[{}]", self.row_strings().join(";"))
    }
}

impl fmt::Display for CodeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.n {
            writeln!(f, "{}", self.row_strings()[r])?;
        }
        Ok(())
    }
}

/// Sets the `fill` cyclic right-hand neighbours of every row's one.
pub fn dim_expand(perm: &CodeMatrix, fill: usize) -> Result<CodeMatrix> {
    if !perm.is_permutation() {
        return Err(invalid("dimming expansion needs a permutation matrix"));
    }
    if fill >= perm.n() {
        return Err(invalid(format!("fill {fill} must be below n_t = {}", perm.n())));
    }
    Ok(dim_expand_unchecked(perm, fill))
}

fn dim_expand_unchecked(perm: &CodeMatrix, fill: usize) -> CodeMatrix {
    let n = perm.n();
    let mut out = perm.clone();
    for r in 0..n {
        let col = perm.row(r).iter().position(|&b| b == 1).expect("permutation row");
        for step in 1..=fill {
            out.set(r, (col + step) % n, 1);
        }
    }
    out
}

/// Inverse of [`dim_expand`]: keeps the start of every row's cyclic run of `fill + 1` ones.
pub fn dim_contract(matrix: &CodeMatrix, fill: usize) -> Result<CodeMatrix> {
    let n = matrix.n();
    if fill + 1 >= n {
        return Err(invalid(format!("run length {} must be below n_t = {n}", fill + 1)));
    }
    let mut out = CodeMatrix::zeros(n);
    let mut used = vec![false; n];
    for r in 0..n {
        let row = matrix.row(r);
        if matrix.row_weight(r) != fill + 1 {
            return Err(Error::NotACodeword(format!(
                "row {r} has weight {}, expected {}",
                matrix.row_weight(r),
                fill + 1
            )));
        }
        let mut starts = (0..n).filter(|&c| row[c] == 1 && row[(c + n - 1) % n] == 0);
        let start = match (starts.next(), starts.next()) {
            (Some(s), None) => s,
            _ => return Err(Error::NotACodeword(format!("row {r} is not a single cyclic run"))),
        };
        if used[start] {
            return Err(Error::NotACodeword(format!("run start of row {r} repeats a column")));
        }
        used[start] = true;
        out.set(r, start, 1);
    }
    Ok(out)
}

/// Entrywise `1 - x`.
pub fn complement(matrix: &CodeMatrix) -> CodeMatrix {
    CodeMatrix { n: matrix.n, bits: matrix.bits.iter().map(|&b| 1 - b).collect() }
}

/// Largest `n_t` whose worst-case zero run `(2 n_t - 2) T_b` fits the maximum flickering time
/// period: `floor((mftp + 2 T_b) / (2 T_b))`.
pub fn max_nt_for_flicker(t_b: f64, mftp: f64) -> Result<u64> {
    if !(t_b > 0.0 && t_b.is_finite() && mftp > 0.0 && mftp.is_finite()) {
        return Err(invalid("bit period and flicker period must be positive"));
    }
    let ratio = (mftp + 2.0 * t_b) / (2.0 * t_b);
    // Decimal inputs such as 1e-4 land a hair below exact integer ratios.
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= 1e-9 * nearest { nearest } else { ratio.floor() };
    Ok(n as u64)
}

/// Dimming factors and weights of the plain and complemented codes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DimmingWeights {
    pub gamma_actual: f64,
    pub gamma_complement: f64,
    pub weight_actual: usize,
    pub weight_complement: usize,
}

pub fn dimming_weight_table(n_t: usize) -> Result<DimmingWeights> {
    if n_t < 2 {
        return Err(invalid(format!("n_t must be at least 2, got {n_t}")));
    }
    Ok(DimmingWeights {
        gamma_actual: 1.0 / n_t as f64,
        gamma_complement: 1.0 - 1.0 / n_t as f64,
        weight_actual: n_t,
        weight_complement: n_t * (n_t - 1),
    })
}
