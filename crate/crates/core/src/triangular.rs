//! Triangular forms `Δ(α₁, …, αₙ) = Σ αᵢ·xᵢ(xᵢ + 1)/2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::{self, int, Budget};
use crate::error::{Error, Result};
use crate::lattice::{half, Coset, IntegralLattice};
use crate::local::{self, LocalOptions, LocalVerdict};
use crate::poly::QuadPoly;

/// Integers that `Δ(1,1,1)`-style forms must represent to be universal.
pub const EIGHT_TARGETS: [i128; 5] = [1, 2, 4, 5, 8];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i128>", into = "Vec<i128>")]
pub struct TriangularForm {
    coeffs: Vec<i128>,
}

impl TryFrom<Vec<i128>> for TriangularForm {
    type Error = Error;
    fn try_from(v: Vec<i128>) -> Result<Self> {
        TriangularForm::new(v)
    }
}

impl From<TriangularForm> for Vec<i128> {
    fn from(t: TriangularForm) -> Self {
        t.coeffs
    }
}

impl TriangularForm {
    /// Coefficients are stored sorted ascending.
    pub fn new(mut coeffs: Vec<i128>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > crate::poly::MAX_VARS {
            return Err(Error::UnsupportedDimension(coeffs.len()));
        }
        if let Some(&bad) = coeffs.iter().find(|&&a| a < 1) {
            return Err(Error::invalid(format!("coefficient {bad} is not positive")));
        }
        if let Some(&big) = coeffs.iter().find(|&&a| a > 1 << 30) {
            return Err(Error::CoefficientTooLarge(big));
        }
        coeffs.sort_unstable();
        Ok(TriangularForm { coeffs })
    }

    pub fn coeffs(&self) -> &[i128] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_primitive(&self) -> bool {
        self.coeffs.iter().fold(0i128, |g, &a| num_integer::gcd(g, a)) == 1
    }

    /// `d(Δ) = α₁⋯αₙ`.
    pub fn discriminant(&self) -> i128 {
        self.coeffs.iter().product()
    }

    pub fn coeff_sum(&self) -> i128 {
        self.coeffs.iter().sum()
    }

    /// `Σ αᵢ (xᵢ² + xᵢ)/2` as a [`QuadPoly`].
    pub fn to_poly(&self) -> QuadPoly {
        let n = self.dim();
        let g = (0..n)
            .map(|i| (0..n).map(|j| if i == j { self.coeffs[i] } else { 0 }).collect())
            .collect();
        QuadPoly::new(g, self.coeffs.clone(), 0).expect("validated coefficients")
    }

    /// `Σ αᵢ (2xᵢ + 1)²`, which equals `8Δ(x) + Σ αᵢ`.
    pub fn odd_square_model(&self) -> QuadPoly {
        let n = self.dim();
        let g = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 8 * self.coeffs[i] } else { 0 }).collect())
            .collect();
        let l = self.coeffs.iter().map(|a| 8 * a).collect();
        QuadPoly::new(g, l, self.coeff_sum()).expect("validated coefficients")
    }

    /// Value at `x`.
    pub fn eval(&self, x: &[i128]) -> i128 {
        self.coeffs.iter().zip(x).map(|(a, &t)| a * arith::triangular(t)).sum()
    }

    /// The coset `⟨4α₁, …, 4αₙ⟩ + (½, …, ½)`: `Δ` represents `m` iff the
    /// coset represents `8m + Σ αᵢ`.
    pub fn to_coset(&self) -> Result<Coset> {
        let diag: Vec<i128> = self.coeffs.iter().map(|a| 4 * a).collect();
        Coset::new(IntegralLattice::diagonal(&diag)?, vec![half(); self.dim()])
    }

    /// Exact representation test. Returns nonnegative `x` with `Δ(x) = m`.
    pub fn represents(&self, m: i128) -> Option<Vec<i128>> {
        if m < 0 {
            return None;
        }
        let n = self.dim();
        let mut x = vec![0i128; n];
        if self.search(n - 1, m, &mut x) {
            Some(x)
        } else {
            None
        }
    }

    // Largest coefficients first; the smallest one is solved directly.
    fn search(&self, i: usize, rem: i128, x: &mut [i128]) -> bool {
        let a = self.coeffs[i];
        if i == 0 {
            if rem % a != 0 || !arith::is_triangular(rem / a) {
                return false;
            }
            x[0] = (arith::isqrt(8 * (rem / a) + 1) - 1) / 2;
            return true;
        }
        let mut k = 0i128;
        loop {
            let used = a * arith::triangular(k);
            if used > rem {
                break;
            }
            x[i] = k;
            if self.search(i - 1, rem - used, x) {
                return true;
            }
            k += 1;
        }
        x[i] = 0;
        false
    }

    /// Exact membership for every `m <= bound`.
    pub fn represented_set(&self, bound: u64, budget: &Budget) -> Result<RepresentedSet> {
        if bound > budget.max_sieve {
            return Err(Error::BudgetExceeded(format!("sieve length {bound} > {}", budget.max_sieve)));
        }
        let mut set = RepresentedSet::singleton_zero(bound);
        for &a in &self.coeffs {
            let mut next = RepresentedSet::empty(bound);
            let mut k = 0i128;
            loop {
                let shift = a * arith::triangular(k);
                if shift > bound as i128 {
                    break;
                }
                next.or_shifted(&set, shift as u64);
                k += 1;
            }
            set = next;
        }
        Ok(set)
    }

    /// Smallest unrepresented integer not exceeding `limit`.
    pub fn truant(&self, limit: i128) -> Option<i128> {
        (0..=limit).find(|&m| self.represents(m).is_none())
    }

    /// Universality by the criterion "represents 1, 2, 4, 5 and 8".
    pub fn theorem_of_eight(&self) -> bool {
        self.eight_failures().is_empty()
    }

    pub fn eight_failures(&self) -> Vec<i128> {
        EIGHT_TARGETS.iter().copied().filter(|&m| self.represents(m).is_none()).collect()
    }

    pub fn first_unrepresented(&self, bound: u64, budget: &Budget) -> Result<Option<i128>> {
        Ok(self.represented_set(bound, budget)?.first_missing())
    }

    pub fn is_universal_up_to(&self, bound: u64, budget: &Budget) -> Result<bool> {
        Ok(self.first_unrepresented(bound, budget)?.is_none())
    }

    /// Primes at which the local test for `m` is not automatic.
    ///
    /// For three or more variables these are the primes of `2·d(Δ)`. Binary
    /// forms also need the odd primes dividing `8m + α + β`.
    pub fn relevant_primes(&self, m: i128) -> Vec<i64> {
        let mut primes = local::local_obstruction_primes(self);
        if self.dim() == 2 {
            primes.extend(arith::prime_divisors(8 * m + self.coeff_sum()));
            primes.sort_unstable();
            primes.dedup();
        }
        primes
    }

    /// Regularity sweep over `1..=bound`.
    pub fn is_regular_up_to(&self, bound: u64, opts: &LocalOptions) -> Result<RegularityVerdict> {
        let set = self.represented_set(bound, &opts.budget)?;
        for m in 1..=bound {
            if set.contains(m) {
                continue;
            }
            let m = m as i128;
            if self.dim() == 1 {
                // A single square: solubility everywhere locally forces a
                // rational, hence integral, solution.
                continue;
            }
            let mut verdicts = Vec::new();
            let mut all_soluble = true;
            for p in self.relevant_primes(m) {
                let v = local::triangular_locally_represents(self, m, p, opts)?;
                all_soluble &= v.soluble;
                verdicts.push(v);
                if !all_soluble {
                    break;
                }
            }
            if all_soluble {
                if let Some(x) = self.represents(m) {
                    return Err(Error::Internal(format!("sieve missed {m} = Δ{x:?}")));
                }
                return Ok(RegularityVerdict {
                    status: RegularityStatus::Counterexample,
                    bound,
                    witness: Some(Counterexample {
                        m,
                        local: verdicts,
                        search: GlobalSearch::for_target(self, m),
                    }),
                });
            }
        }
        Ok(RegularityVerdict { status: RegularityStatus::RegularUpToN, bound, witness: None })
    }

    /// Whether at most one coefficient is divisible by the odd prime `p`.
    pub fn behaves_well(&self, p: i64) -> Result<bool> {
        if p == 2 || !arith::is_prime(p) {
            return Err(Error::NotOddPrime(p));
        }
        if self.dim() != 3 {
            return Err(Error::UnsupportedDimension(self.dim()));
        }
        Ok(self.coeffs.iter().filter(|&&a| a % p as i128 == 0).count() <= 1)
    }

    /// Splits `Δ = Δ(a, qʳb, qˢc)` with `q ∤ abc` and `1 <= r <= s`.
    pub fn descent_shape(&self, q: i64) -> Result<DescentShape> {
        if q == 2 || !arith::is_prime(q) {
            return Err(Error::NotOddPrime(q));
        }
        if self.dim() != 3 {
            return Err(Error::UnsupportedDimension(self.dim()));
        }
        let qq = q as i128;
        let split = |a: i128| {
            let v = arith::valuation(a, q).unwrap_or(0);
            (v, a / arith::ipow(qq, v).unwrap_or(1))
        };
        let mut parts: Vec<(u32, i128)> = self.coeffs.iter().map(|&a| split(a)).collect();
        parts.sort();
        let units = parts.iter().filter(|(v, _)| *v == 0).count();
        match units {
            0 => Err(Error::invalid(format!("{q} divides every coefficient"))),
            1 => Ok(DescentShape { q, a: parts[0].1, b: parts[1].1, r: parts[1].0, c: parts[2].1, s: parts[2].0 }),
            _ => Err(Error::invalid(format!("{q} divides at most one coefficient (r = 0)"))),
        }
    }

    /// `Δ(q^{2−δ}a, q^{r−δ}b, q^{s−δ}c)` with `δ = min(2, r)`.
    pub fn descend(&self, q: i64) -> Result<TriangularForm> {
        let s = self.descent_shape(q)?;
        let qq = q as i128;
        let delta = s.r.min(2);
        TriangularForm::new(vec![
            arith::ipow(qq, 2 - delta)? * s.a,
            arith::ipow(qq, s.r - delta)? * s.b,
            arith::ipow(qq, s.s - delta)? * s.c,
        ])
    }

    /// Odd primes `q` for which [`descend`](Self::descend) applies.
    pub fn descent_primes(&self) -> Vec<i64> {
        if self.dim() != 3 {
            return Vec::new();
        }
        arith::prime_divisors(self.discriminant())
            .into_iter()
            .filter(|&q| q != 2 && self.descent_shape(q).is_ok())
            .collect()
    }
}

/// `Δ(a, qʳb, qˢc)` decomposition used by descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentShape {
    pub q: i64,
    pub a: i128,
    pub b: i128,
    pub r: u32,
    pub c: i128,
    pub s: u32,
}

impl fmt::Display for TriangularForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tri ")?;
        for (i, a) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for TriangularForm {
    type Err = Error;

    /// Comma separated coefficients, e.g. `1,2,3`.
    fn from_str(s: &str) -> Result<Self> {
        let mut coeffs = Vec::new();
        let mut pos = 0;
        for part in s.split(',') {
            let lead = part.len() - part.trim_start().len();
            let v = part
                .trim()
                .parse::<i128>()
                .map_err(|e| Error::parse(pos + lead, format!("bad coefficient `{}`: {e}", part.trim())))?;
            coeffs.push(v);
            pos += part.len() + 1;
        }
        TriangularForm::new(coeffs)
    }
}

/// Bitset over `[0, bound]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepresentedSet {
    words: Vec<u64>,
    bound: u64,
}

impl RepresentedSet {
    fn empty(bound: u64) -> Self {
        RepresentedSet { words: vec![0; (bound / 64 + 1) as usize], bound }
    }

    fn singleton_zero(bound: u64) -> Self {
        let mut s = RepresentedSet::empty(bound);
        s.words[0] = 1;
        s
    }

    fn or_shifted(&mut self, src: &RepresentedSet, shift: u64) {
        let ws = (shift / 64) as usize;
        let bs = (shift % 64) as u32;
        for i in ws..self.words.len() {
            let mut w = src.words[i - ws] << bs;
            if bs > 0 && i > ws {
                w |= src.words[i - ws - 1] >> (64 - bs);
            }
            self.words[i] |= w;
        }
        self.mask_tail();
    }

    fn mask_tail(&mut self) {
        let tail = (self.bound % 64) + 1;
        if tail < 64 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << tail) - 1;
        }
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn contains(&self, m: u64) -> bool {
        m <= self.bound && self.words[(m / 64) as usize] >> (m % 64) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..=self.bound).filter(|&m| self.contains(m))
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn first_missing(&self) -> Option<i128> {
        (0..=self.bound).find(|&m| !self.contains(m)).map(|m| m as i128)
    }

    /// Restriction to `[0, bound]`.
    pub fn truncate(&self, bound: u64) -> RepresentedSet {
        let mut s = RepresentedSet::empty(bound.min(self.bound));
        let n = s.words.len();
        s.words.copy_from_slice(&self.words[..n]);
        s.mask_tail();
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityStatus {
    RegularUpToN,
    Counterexample,
}

/// The global search that failed for a counterexample: every odd vector with
/// `αᵢ(2xᵢ+1)² <= 8m + Σαᵢ` was examined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalSearch {
    pub target: i128,
    /// Largest `|2xᵢ + 1|` examined per coordinate.
    pub odd_bounds: Vec<i128>,
}

impl GlobalSearch {
    fn for_target(d: &TriangularForm, m: i128) -> Self {
        let target = 8 * m + d.coeff_sum();
        let odd_bounds = d.coeffs().iter().map(|a| arith::isqrt(target / a)).collect();
        GlobalSearch { target, odd_bounds }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub m: i128,
    pub local: Vec<LocalVerdict>,
    pub search: GlobalSearch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub status: RegularityStatus,
    pub bound: u64,
    pub witness: Option<Counterexample>,
}

impl RegularityVerdict {
    pub fn is_regular_up_to_bound(&self) -> bool {
        self.status == RegularityStatus::RegularUpToN
    }
}

/// Checks the odd-square identity `Σ αᵢ(2xᵢ+1)² = 8Δ(x) + Σαᵢ` at `x`.
pub fn odd_square_identity(d: &TriangularForm, x: &[i128]) -> bool {
    let lhs: i128 = d.coeffs().iter().zip(x).map(|(a, &t)| a * (2 * t + 1) * (2 * t + 1)).sum();
    lhs == 8 * d.eval(x) + d.coeff_sum()
}

/// `8m + Σαᵢ` as a rational target for coset tests.
pub fn coset_target(d: &TriangularForm, m: i128) -> arith::Rational {
    int(8 * m + d.coeff_sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(s: &str) -> TriangularForm {
        s.parse().unwrap()
    }

    fn budget() -> Budget {
        Budget::default()
    }

    #[test]
    fn construction() {
        let d = tri("3, 1,2");
        assert_eq!(d.coeffs(), &[1, 2, 3]);
        assert_eq!(d.discriminant(), 6);
        assert!(d.is_primitive());
        assert!(!tri("2,2,2").is_primitive());
        assert!(TriangularForm::new(vec![1, 0]).is_err());
        assert!(matches!("1,x".parse::<TriangularForm>(), Err(Error::Parse { pos: 2, .. })));
        assert_eq!(d.to_string(), "tri 1,2,3");
    }

    #[test]
    fn represents_examples() {
        let d = tri("1,1,1");
        let x = d.represents(5).unwrap();
        assert_eq!(d.eval(&x), 5);
        assert_eq!(tri("1,1,3").represents(8), None);
        let x = d.represents(10_000).unwrap();
        assert_eq!(d.eval(&x), 10_000);
        assert_eq!(d.represents(-1), None);
    }

    #[test]
    fn represented_set_examples() {
        let s = tri("1").represented_set(10, &budget()).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 1, 3, 6, 10]);
        let s = tri("1,1").represented_set(5, &budget()).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        let s = tri("1,1,1").represented_set(1000, &budget()).unwrap();
        assert_eq!(s.count(), 1001);
        let small = Budget { max_sieve: 10, ..Budget::default() };
        assert!(matches!(tri("1").represented_set(11, &small), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn sieve_agrees_with_search_across_word_boundaries() {
        for d in ["1,3,7", "2,5", "1,1,11", "4,6,9"] {
            let d = tri(d);
            let s = d.represented_set(300, &budget()).unwrap();
            for m in 0..=300u64 {
                assert_eq!(s.contains(m), d.represents(m as i128).is_some(), "{d} m={m}");
            }
        }
    }

    #[test]
    fn eight_examples() {
        assert!(tri("1,1,1").theorem_of_eight());
        assert!(!tri("1,1,3").theorem_of_eight());
        assert_eq!(tri("1,1,3").eight_failures(), vec![8]);
        assert!(!tri("2,2,2").theorem_of_eight());
    }

    #[test]
    fn universality_examples() {
        assert!(tri("1,1,1").is_universal_up_to(2000, &budget()).unwrap());
        assert!(tri("1,1,5").is_universal_up_to(2000, &budget()).unwrap());
        assert!(!tri("1,1,3").is_universal_up_to(2000, &budget()).unwrap());
        assert_eq!(tri("1,1,3").first_unrepresented(2000, &budget()).unwrap(), Some(8));
        assert_eq!(tri("1").truant(100), Some(2));
        assert_eq!(tri("1,1").truant(100), Some(5));
        assert_eq!(tri("1,2").truant(100), Some(4));
    }

    #[test]
    fn descend_examples() {
        assert_eq!(tri("1,3,9").descend(3).unwrap(), tri("1,3,3"));
        assert_eq!(tri("2,9,9").descend(3).unwrap(), tri("1,1,2"));
        assert_eq!(tri("1,5,5").descend(5).unwrap(), tri("1,1,5"));
        assert!(tri("1,2,3").descend(3).is_err());
        assert!(tri("3,6,9").descend(3).is_err());
        assert_eq!(tri("1,5,5").descend(2).unwrap_err(), Error::NotOddPrime(2));
        let d = tri("1,3,9");
        assert_eq!(d.discriminant() % d.descend(3).unwrap().discriminant(), 0);
    }

    #[test]
    fn behaves_well_examples() {
        assert!(tri("1,2,3").behaves_well(3).unwrap());
        assert!(!tri("1,3,9").behaves_well(3).unwrap());
        for p in [3, 5, 7, 11] {
            assert!(tri("1,1,1").behaves_well(p).unwrap());
        }
        assert_eq!(tri("1,1,1").behaves_well(2).unwrap_err(), Error::NotOddPrime(2));
    }

    #[test]
    fn coset_examples() {
        let c = tri("1,1,1").to_coset().unwrap();
        assert_eq!(c.lattice, IntegralLattice::diagonal(&[4, 4, 4]).unwrap());
        assert_eq!(c.value(&[0, 0, 0]), int(3));
        let c = tri("1,2").to_coset().unwrap();
        assert_eq!(c.value(&[1, -1]), int(11));
        assert!(c.represents(coset_target(&tri("1,2"), 1)).unwrap().is_some());
    }

    #[test]
    fn regularity_examples() {
        let opts = LocalOptions::default();
        assert!(tri("1,1,1").is_regular_up_to(1000, &opts).unwrap().is_regular_up_to_bound());
        assert!(tri("1,1,5").is_regular_up_to(1000, &opts).unwrap().is_regular_up_to_bound());
    }

    #[test]
    fn truncation_is_monotone() {
        let d = tri("1,2,7");
        let big = d.represented_set(500, &budget()).unwrap();
        for n in [0u64, 63, 64, 65, 200] {
            assert_eq!(big.truncate(n), d.represented_set(n, &budget()).unwrap());
        }
    }
}
