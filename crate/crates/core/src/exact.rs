//! Dense exact linear algebra over arbitrary-precision integers and rationals.
//!
//! Everything here is exact: no floating point, no rounding, no overflow.
//! Rationals are kept in lowest terms with positive denominator, so equality
//! is plain structural equality. Matrices are small (tens of rows at most) and
//! dense; elimination uses the first nonzero pivot, which is always exact.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense matrix of arbitrary-precision integers, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct ExactMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

/// Dense matrix of exact rationals in lowest terms, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl ExactMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<BigInt>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidDiagram(format!(
                "matrix shape {rows}x{cols} does not match {} entries",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        assert!(r > 0 && c > 0, "matrix must be non-empty");
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row.iter().map(|&x| BigInt::from(x)));
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![BigInt::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = BigInt::one();
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    /// Column vector with every entry one; `A * ones` gives the row sums.
    pub fn ones_column(rows: usize) -> Self {
        Self {
            rows,
            cols: 1,
            data: vec![BigInt::one(); rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, r: usize, c: usize) -> &BigInt {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: BigInt) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[BigInt] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Exact matrix product.
    pub fn mul(&self, rhs: &ExactMatrix) -> Result<ExactMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "mat_mul",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: rhs.rows,
                rhs_cols: rhs.cols,
            });
        }
        let mut data = vec![BigInt::zero(); self.rows * rhs.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.entry(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.entry(k, j);
                    if !b.is_zero() {
                        data[i * rhs.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(ExactMatrix {
            rows: self.rows,
            cols: rhs.cols,
            data,
        })
    }

    pub fn transpose(&self) -> ExactMatrix {
        let mut data = Vec::with_capacity(self.rows * self.cols);
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.entry(r, c).clone());
            }
        }
        ExactMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn row_sums(&self) -> Vec<BigInt> {
        (0..self.rows).map(|r| self.row(r).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<BigInt> {
        let mut sums = vec![BigInt::zero(); self.cols];
        for r in 0..self.rows {
            for (c, x) in self.row(r).iter().enumerate() {
                sums[c] += x;
            }
        }
        sums
    }

    pub fn min_entry(&self) -> &BigInt {
        self.data.iter().min().expect("matrix is non-empty")
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|x| x.is_positive())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|x| !x.is_negative())
    }

    /// Equal-row-sum check. Returns the common row sum when all rows agree.
    pub fn is_ers(&self) -> (bool, Option<BigInt>) {
        let sums = self.row_sums();
        let first = sums[0].clone();
        if sums.iter().all(|s| *s == first) {
            (true, Some(first))
        } else {
            (false, None)
        }
    }

    /// True iff every entry is divisible by `k`.
    pub fn is_divisible(&self, k: u64) -> Result<bool> {
        if k == 0 {
            return Err(Error::InvalidModulus("0".into()));
        }
        Ok(self.is_divisible_big(&BigInt::from(k)))
    }

    pub fn is_divisible_big(&self, k: &BigInt) -> bool {
        assert!(!k.is_zero(), "modulus must be nonzero");
        self.data.iter().all(|x| (x % k).is_zero())
    }

    pub fn to_rational(&self) -> RationalMatrix {
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|x| BigRational::from_integer(x.clone()))
                .collect(),
        }
    }
}

impl RationalMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<BigRational>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidDiagram(format!(
                "matrix shape {rows}x{cols} does not match {} entries",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![BigRational::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = BigRational::one();
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn diagonal(entries: Vec<BigRational>) -> Self {
        let n = entries.len();
        let mut data = vec![BigRational::zero(); n * n];
        for (i, e) in entries.into_iter().enumerate() {
            data[i * n + i] = e;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, r: usize, c: usize) -> &BigRational {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: BigRational) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, rhs: &RationalMatrix) -> Result<RationalMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "mat_mul",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: rhs.rows,
                rhs_cols: rhs.cols,
            });
        }
        let mut data = vec![BigRational::zero(); self.rows * rhs.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.entry(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.entry(k, j);
                    if !b.is_zero() {
                        data[i * rhs.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(RationalMatrix {
            rows: self.rows,
            cols: rhs.cols,
            data,
        })
    }

    pub fn row_sums(&self) -> Vec<BigRational> {
        (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].iter().sum())
            .collect()
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|x| x.is_positive())
    }

    /// Exact inverse by Gauss-Jordan elimination, pivoting on the first
    /// nonzero entry in each column. The product `self * inverse` is checked
    /// against the identity before returning.
    pub fn invert(&self) -> Result<RationalMatrix> {
        if self.rows != self.cols {
            return Err(Error::NotSquare {
                op: "invert_rational",
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut work = self.clone();
        let mut inv = RationalMatrix::identity(n);
        for col in 0..n {
            let pivot_row = (col..n)
                .find(|&r| !work.entry(r, col).is_zero())
                .ok_or(Error::Singular)?;
            if pivot_row != col {
                for c in 0..n {
                    let a = work.entry(pivot_row, c).clone();
                    let b = work.entry(col, c).clone();
                    work.set(pivot_row, c, b);
                    work.set(col, c, a);
                    let a = inv.entry(pivot_row, c).clone();
                    let b = inv.entry(col, c).clone();
                    inv.set(pivot_row, c, b);
                    inv.set(col, c, a);
                }
            }
            let pivot = work.entry(col, col).clone();
            for c in 0..n {
                let w = work.entry(col, c) / &pivot;
                work.set(col, c, w);
                let v = inv.entry(col, c) / &pivot;
                inv.set(col, c, v);
            }
            for r in 0..n {
                if r == col || work.entry(r, col).is_zero() {
                    continue;
                }
                let factor = work.entry(r, col).clone();
                for c in 0..n {
                    let w = work.entry(r, c) - &factor * work.entry(col, c);
                    work.set(r, c, w);
                    let v = inv.entry(r, c) - &factor * inv.entry(col, c);
                    inv.set(r, c, v);
                }
            }
        }
        debug_assert_eq!(self.mul(&inv).unwrap(), RationalMatrix::identity(n));
        Ok(inv)
    }

    /// Least positive integer `s` such that `s * self` has integer entries.
    pub fn lcm_denominators(&self) -> BigInt {
        let mut l = BigInt::one();
        for x in &self.data {
            l = l.lcm(x.denom());
        }
        l.abs()
    }

    pub fn is_integral(&self) -> bool {
        self.data.iter().all(|x| x.is_integer())
    }

    /// Converts to an integer matrix; `None` if any entry has a denominator.
    pub fn to_exact(&self) -> Option<ExactMatrix> {
        if !self.is_integral() {
            return None;
        }
        Some(ExactMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.numer().clone()).collect(),
        })
    }

    pub fn scale(&self, s: &BigRational) -> RationalMatrix {
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }
}

impl fmt::Debug for ExactMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ExactMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RationalMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|c| format_rational(self.entry(r, c)))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

pub(crate) fn format_rational(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn parse_rational(s: &str) -> Option<BigRational> {
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(BigRational::new(p, q))
        }
        None => {
            let p: BigInt = s.trim().parse().ok()?;
            Some(BigRational::from_integer(p))
        }
    }
}

// Matrices serialize as arrays-of-arrays of decimal strings ("p/q" for
// rationals) so that arbitrary-precision values survive JSON round trips.

impl Serialize for ExactMatrix {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|r| self.row(r).iter().map(|x| x.to_string()).collect())
            .collect();
        rows.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ExactMatrix {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<String>> = Vec::deserialize(de)?;
        if rows.is_empty() || rows[0].is_empty() {
            return Err(D::Error::custom("matrix must be non-empty"));
        }
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            if row.len() != c {
                return Err(D::Error::custom("ragged matrix rows"));
            }
            for s in row {
                let v: BigInt = s
                    .trim()
                    .parse()
                    .map_err(|_| D::Error::custom(format!("bad integer entry {s:?}")))?;
                data.push(v);
            }
        }
        Ok(ExactMatrix {
            rows: r,
            cols: c,
            data,
        })
    }
}

impl Serialize for RationalMatrix {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .map(|c| format_rational(self.entry(r, c)))
                    .collect()
            })
            .collect();
        rows.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for RationalMatrix {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<String>> = Vec::deserialize(de)?;
        if rows.is_empty() || rows[0].is_empty() {
            return Err(D::Error::custom("matrix must be non-empty"));
        }
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            if row.len() != c {
                return Err(D::Error::custom("ragged matrix rows"));
            }
            for s in row {
                let v = parse_rational(s)
                    .ok_or_else(|| D::Error::custom(format!("bad rational entry {s:?}")))?;
                data.push(v);
            }
        }
        Ok(RationalMatrix {
            rows: r,
            cols: c,
            data,
        })
    }
}
