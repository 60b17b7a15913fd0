//! Small exact-arithmetic helpers shared by the rest of the crate.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

/// Exact rational numbers used throughout the crate.
pub type Rational = Ratio<i128>;

pub fn rat(n: i128, d: i128) -> Rational {
    Ratio::new(n, d)
}

pub fn int(n: i128) -> Rational {
    Ratio::from_integer(n)
}

pub fn is_prime(n: i64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 || n % 3 == 0 {
        return false;
    }
    let mut i = 5i64;
    while i * i <= n {
        if n % i == 0 || n % (i + 2) == 0 {
            return false;
        }
        i += 6;
    }
    true
}

/// Odd primes in increasing order, starting at 3.
pub fn odd_primes() -> impl Iterator<Item = i64> {
    (3i64..).step_by(2).filter(|&n| is_prime(n))
}

/// Distinct prime divisors of `n`, ascending. `n = 0` has none by convention.
pub fn prime_divisors(n: i128) -> Vec<i64> {
    let mut n = n.abs();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut p: i128 = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p as i64);
            while n % p == 0 {
                n /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n as i64);
    }
    out
}

/// p-adic valuation; `None` stands for +infinity (n = 0).
pub fn valuation(n: i128, p: i64) -> Option<u32> {
    if n == 0 {
        return None;
    }
    let p = p as i128;
    let mut n = n;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    Some(v)
}

/// Valuation of a rational; `None` for zero.
pub fn valuation_rat(r: &Rational, p: i64) -> Option<i64> {
    if r.is_zero() {
        return None;
    }
    let num = valuation(*r.numer(), p).unwrap_or(0) as i64;
    let den = valuation(*r.denom(), p).unwrap_or(0) as i64;
    Some(num - den)
}

pub fn ipow(base: i128, exp: u32) -> Result<i128> {
    base.checked_pow(exp)
        .ok_or_else(|| Error::invalid(format!("{base}^{exp} overflows")))
}

/// `a mod m` in `[0, m)`.
pub fn modp(a: i128, m: i128) -> i128 {
    a.rem_euclid(m)
}

pub fn mod_pow(mut base: i128, mut exp: u128, m: i128) -> i128 {
    let mut acc = 1 % m;
    base = modp(base, m);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, if `gcd(a, m) = 1`.
pub fn mod_inv(a: i128, m: i128) -> Option<i128> {
    let e = modp(a, m).extended_gcd(&m);
    if e.gcd != 1 {
        return None;
    }
    Some(modp(e.x, m))
}

/// Reduces a rational with denominator prime to `m` into `[0, m)`.
pub fn rat_mod(r: &Rational, m: i128) -> Option<i128> {
    let inv = mod_inv(*r.denom(), m)?;
    Some(modp(modp(*r.numer(), m) * inv, m))
}

/// Chinese remaindering of `x = r_i mod m_i` for pairwise coprime moduli.
pub fn crt(residues: &[(i128, i128)]) -> Option<(i128, i128)> {
    let mut x = 0i128;
    let mut m = 1i128;
    for &(r, mi) in residues {
        let inv = mod_inv(m, mi)?;
        let t = modp((r - x) % mi * inv, mi);
        x += m * t;
        m = m.checked_mul(mi)?;
        x = modp(x, m);
    }
    Some((x, m))
}

pub fn isqrt(n: i128) -> i128 {
    if n < 0 {
        return -1;
    }
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as i128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub fn is_square(n: i128) -> bool {
    n >= 0 && {
        let r = isqrt(n);
        r * r == n
    }
}

pub fn triangular(k: i128) -> i128 {
    k * (k + 1) / 2
}

/// Whether `m` equals `k(k+1)/2` for some integer `k`.
pub fn is_triangular(m: i128) -> bool {
    m >= 0 && is_square(8 * m + 1)
}

/// Floor of a rational.
pub fn floor(r: &Rational) -> i128 {
    Integer::div_floor(r.numer(), r.denom())
}

pub fn ceil(r: &Rational) -> i128 {
    -Integer::div_floor(&(-r.numer()), r.denom())
}

pub fn abs(r: &Rational) -> Rational {
    r.abs()
}

/// Determinant of a small integer matrix by fraction-free elimination.
pub fn det(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m.to_vec();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Leading principal minors of a symmetric matrix, all positive.
pub fn is_positive_definite(m: &[Vec<i128>]) -> bool {
    (1..=m.len()).all(|k| {
        let sub: Vec<Vec<i128>> = m[..k].iter().map(|row| row[..k].to_vec()).collect();
        det(&sub) > 0
    })
}

pub fn mat_mul(a: &[Vec<i128>], b: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &[Vec<i128>]) -> Vec<Vec<i128>> {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

pub fn identity(n: usize) -> Vec<Vec<i128>> {
    (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect()
}

/// Inverse of a unimodular integer matrix via the adjugate.
pub fn unimodular_inverse(m: &[Vec<i128>]) -> Result<Vec<Vec<i128>>> {
    let n = m.len();
    let d = det(m);
    if d.abs() != 1 {
        return Err(Error::NotUnimodular(d));
    }
    let mut inv = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i128>> = (0..n)
                .filter(|&r| r != j)
                .map(|r| (0..n).filter(|&c| c != i).map(|c| m[r][c]).collect())
                .collect();
            let cof = if (i + j) % 2 == 0 { det(&minor) } else { -det(&minor) };
            inv[i][j] = cof * d;
        }
    }
    Ok(inv)
}

/// Solves `a x = b` exactly over the rationals for nonsingular `a`.
pub fn solve_rational(a: &[Vec<i128>], b: &[Rational]) -> Option<Vec<Rational>> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| row.iter().map(|&x| int(x)).chain(std::iter::once(bi)).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        let p = m[col][col];
        for x in m[col].iter_mut() {
            *x /= p;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col];
                for c in col..=n {
                    let t = m[col][c] * f;
                    m[r][c] -= t;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n]).collect())
}

/// Limits for exhaustive enumerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Budget {
    /// Maximum number of lattice points or residue vectors visited by one call.
    pub max_points: u64,
    /// Largest sieve length.
    pub max_sieve: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_points: 100_000_000, max_sieve: 10_000_000 }
    }
}

impl Budget {
    pub fn with_points(max_points: u64) -> Self {
        Budget { max_points, ..Budget::default() }
    }
}

/// Counts visited points against a budget.
#[derive(Debug)]
pub(crate) struct Meter {
    left: u64,
    what: &'static str,
}

impl Meter {
    pub(crate) fn new(limit: u64, what: &'static str) -> Self {
        Meter { left: limit, what }
    }

    #[inline]
    pub(crate) fn tick(&mut self) -> Result<()> {
        if self.left == 0 {
            return Err(Error::BudgetExceeded(self.what.to_string()));
        }
        self.left -= 1;
        Ok(())
    }
}
