//! Complexity targets: the sequence `p_n` a construction must outgrow.
//!
//! Targets are evaluated through exact comparisons only. `n^(a/b)` never gets
//! rounded: `n^(a/b) > p/q` is decided as `n^a * q^b > p^b` over big
//! integers, so threshold scans and ratio comparisons are exact even for
//! irrational target values. Floating point appears solely in CSV output.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetKind {
    /// `p_n = n^(num/den)`.
    Power { num: u32, den: u32 },
    /// `p_n = n * ceil(log2 n)^beta` (value 0 at n = 1 is clamped to 1).
    NLogPow { beta: u32 },
    /// Explicit table `p_1..p_N`.
    Table { values: Vec<BigInt> },
}

/// Evaluator for a target sequence, with a monotonicity hint: the caller
/// asserts `p_n / n` is nondecreasing from `monotone_from` on. Threshold
/// results are scan-verified up to the scan limit and rely on the hint
/// beyond it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexityTarget {
    kind: TargetKind,
    monotone_from: u64,
}

impl ComplexityTarget {
    pub fn power(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::TargetParse("exponent must be positive".into()));
        }
        Ok(Self {
            kind: TargetKind::Power { num, den },
            monotone_from: 1,
        })
    }

    pub fn n_log_pow(beta: u32) -> Result<Self> {
        if beta == 0 {
            return Err(Error::TargetParse("log exponent must be positive".into()));
        }
        Ok(Self {
            kind: TargetKind::NLogPow { beta },
            monotone_from: 1,
        })
    }

    pub fn from_table(values: Vec<BigInt>, monotone_from: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TargetParse("table is empty".into()));
        }
        if values.iter().any(|v| !v.is_positive()) {
            return Err(Error::TargetParse("table values must be positive".into()));
        }
        Ok(Self {
            kind: TargetKind::Table { values },
            monotone_from,
        })
    }

    /// Parses `n`, `n^2`, `n^1.5`, `n^3/2`, `n*log2(n)^2`.
    pub fn parse(expr: &str) -> Result<Self> {
        let s = expr.trim();
        if s == "n" {
            return Self::power(1, 1);
        }
        if let Some(rest) = s.strip_prefix("n*log2(n)") {
            let beta = match rest.strip_prefix('^') {
                None if rest.is_empty() => 1,
                Some(b) => b
                    .parse::<u32>()
                    .map_err(|_| Error::TargetParse(format!("bad log exponent in {expr:?}")))?,
                None => return Err(Error::TargetParse(format!("cannot parse {expr:?}"))),
            };
            return Self::n_log_pow(beta);
        }
        if let Some(exp) = s.strip_prefix("n^") {
            let (num, den) = parse_exponent(exp)
                .ok_or_else(|| Error::TargetParse(format!("bad exponent in {expr:?}")))?;
            return Self::power(num, den);
        }
        Err(Error::TargetParse(format!("cannot parse {expr:?}")))
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn monotone_from(&self) -> u64 {
        self.monotone_from
    }

    pub fn with_monotone_from(mut self, n0: u64) -> Self {
        self.monotone_from = n0;
        self
    }

    /// Exact integer value when the target is integer-valued.
    fn integer_value(&self, n: u64) -> Result<Option<BigInt>> {
        if n == 0 {
            return Err(Error::TargetDomain(0));
        }
        match &self.kind {
            TargetKind::Power { num, den } if den == &1 => Ok(Some(BigInt::from(n).pow(*num))),
            TargetKind::Power { .. } => Ok(None),
            TargetKind::NLogPow { beta } => {
                let l = ceil_log2(n).max(1);
                Ok(Some(BigInt::from(n) * BigInt::from(l).pow(*beta)))
            }
            TargetKind::Table { values } => {
                let idx = usize::try_from(n - 1).map_err(|_| Error::TargetDomain(n))?;
                let v = values.get(idx).ok_or(Error::TargetDomain(n))?;
                Ok(Some(v.clone()))
            }
        }
    }

    /// Decides `p_n > bound` exactly.
    pub fn exceeds(&self, n: u64, bound: &BigRational) -> Result<bool> {
        if n == 0 {
            return Err(Error::TargetDomain(0));
        }
        if !bound.is_positive() {
            return Ok(true);
        }
        if let Some(v) = self.integer_value(n)? {
            return Ok(BigRational::from_integer(v) > *bound);
        }
        let TargetKind::Power { num, den } = self.kind else {
            unreachable!()
        };
        // n^(a/b) > p/q  <=>  n^a * q^b > p^b
        let lhs = BigInt::from(n).pow(num) * bound.denom().pow(den);
        let rhs = bound.numer().pow(den);
        Ok(lhs > rhs)
    }

    /// Compares `x / p_m` against `y / p_n` exactly, for nonnegative `x, y`.
    pub fn ratio_cmp(&self, x: &BigInt, m: u64, y: &BigInt, n: u64) -> Result<Ordering> {
        match &self.kind {
            TargetKind::Power { num, den } => {
                // x/m^(a/b) vs y/n^(a/b)  <=>  x^b * n^a vs y^b * m^a
                let lhs = x.pow(*den) * BigInt::from(n).pow(*num);
                let rhs = y.pow(*den) * BigInt::from(m).pow(*num);
                Ok(lhs.cmp(&rhs))
            }
            _ => {
                let pm = self.integer_value(m)?.expect("integer-valued");
                let pn = self.integer_value(n)?.expect("integer-valued");
                Ok((x * pn).cmp(&(y * pm)))
            }
        }
    }

    /// Approximate value for reporting.
    pub fn value_f64(&self, n: u64) -> f64 {
        match &self.kind {
            TargetKind::Power { num, den } => (n as f64).powf(*num as f64 / *den as f64),
            _ => self
                .integer_value(n)
                .ok()
                .flatten()
                .and_then(|v| v.to_f64())
                .unwrap_or(f64::NAN),
        }
    }

    /// Largest `n` the target is defined at, when tabulated.
    pub fn domain_limit(&self) -> Option<u64> {
        match &self.kind {
            TargetKind::Table { values } => Some(values.len() as u64),
            _ => None,
        }
    }
}

impl fmt::Display for ComplexityTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TargetKind::Power { num, den: 1 } => write!(f, "n^{num}"),
            TargetKind::Power { num, den } => write!(f, "n^{num}/{den}"),
            TargetKind::NLogPow { beta } => write!(f, "n*log2(n)^{beta}"),
            TargetKind::Table { values } => write!(f, "@table[{}]", values.len()),
        }
    }
}

fn parse_exponent(s: &str) -> Option<(u32, u32)> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let num = p.trim().parse().ok()?;
        let den = q.trim().parse().ok()?;
        return reduce(num, den);
    }
    if let Some((int, frac)) = s.split_once('.') {
        let int: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
        if frac.is_empty() || frac.len() > 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let den = 10u64.pow(frac.len() as u32);
        let num = int.checked_mul(den)? + frac.parse::<u64>().ok()?;
        return reduce(num.try_into().ok()?, den.try_into().ok()?);
    }
    let num = s.parse().ok()?;
    Some((num, 1))
}

fn reduce(num: u32, den: u32) -> Option<(u32, u32)> {
    if den == 0 {
        return None;
    }
    let g = num_integer::gcd(num, den);
    if g == 0 {
        return None;
    }
    Some((num / g, den / g))
}

fn ceil_log2(n: u64) -> u64 {
    (64 - (n - 1).leading_zeros()) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn parse_forms() {
        assert_eq!(ComplexityTarget::parse("n").unwrap().to_string(), "n^1");
        assert_eq!(ComplexityTarget::parse("n^2").unwrap().to_string(), "n^2");
        assert_eq!(
            ComplexityTarget::parse("n^1.5").unwrap().to_string(),
            "n^3/2"
        );
        assert_eq!(
            ComplexityTarget::parse("n^3/2").unwrap().to_string(),
            "n^3/2"
        );
        assert_eq!(
            ComplexityTarget::parse("n*log2(n)^2").unwrap().to_string(),
            "n*log2(n)^2"
        );
        assert_eq!(
            ComplexityTarget::parse("n*log2(n)").unwrap().to_string(),
            "n*log2(n)^1"
        );
        assert!(ComplexityTarget::parse("2^n").is_err());
        assert!(ComplexityTarget::parse("n^0").is_err());
    }

    #[test]
    fn exact_power_comparison() {
        let t = ComplexityTarget::parse("n^1.5").unwrap();
        // 64^1.5 = 512 exactly.
        assert!(!t.exceeds(64, &rat(512, 1)).unwrap());
        assert!(t.exceeds(64, &rat(511, 1)).unwrap());
        assert!(t.exceeds(64, &rat(1023, 2)).unwrap());
        // 65^1.5 = sqrt(274625) which is strictly above 524.
        assert!(t.exceeds(65, &rat(524, 1)).unwrap());
        assert!(!t.exceeds(65, &rat(525, 1)).unwrap());
    }

    #[test]
    fn nlog_values() {
        let t = ComplexityTarget::parse("n*log2(n)^2").unwrap();
        // ceil(log2 8) = 3, so p_8 = 8 * 9 = 72.
        assert!(t.exceeds(8, &rat(71, 1)).unwrap());
        assert!(!t.exceeds(8, &rat(72, 1)).unwrap());
        // p_1 clamps the log factor to 1.
        assert!(!t.exceeds(1, &rat(1, 1)).unwrap());
        assert!(t.exceeds(1, &rat(1, 2)).unwrap());
    }

    #[test]
    fn table_domain() {
        let t = ComplexityTarget::from_table(
            vec![BigInt::from(1), BigInt::from(4), BigInt::from(9)],
            1,
        )
        .unwrap();
        assert!(t.exceeds(2, &rat(3, 1)).unwrap());
        assert!(matches!(
            t.exceeds(4, &rat(1, 1)),
            Err(Error::TargetDomain(4))
        ));
        assert_eq!(t.domain_limit(), Some(3));
    }

    #[test]
    fn ratio_order_is_exact() {
        let t = ComplexityTarget::parse("n^3/2").unwrap();
        // 10/4^1.5 = 10/8 vs 27/9^1.5 = 1: 10/8 > 1.
        assert_eq!(
            t.ratio_cmp(&BigInt::from(10), 4, &BigInt::from(27), 9)
                .unwrap(),
            Ordering::Greater
        );
        assert_eq!(
            t.ratio_cmp(&BigInt::from(8), 4, &BigInt::from(27), 9)
                .unwrap(),
            Ordering::Equal
        );
        assert_eq!(
            t.ratio_cmp(&BigInt::from(7), 4, &BigInt::from(27), 9)
                .unwrap(),
            Ordering::Less
        );
    }
}
