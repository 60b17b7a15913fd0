//! Search harnesses: escalation of universal ternary triangular forms,
//! regularity sweeps, and two constructive counting devices.

use std::ops::ControlFlow;
use std::time::Instant;

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{self, int, Budget, Rational};
use crate::enumerate::quad_value;
use crate::error::{Error, Result};
use crate::local::{self, LocalOptions};
use crate::poly::QuadPoly;
use crate::triangular::{RegularityStatus, TriangularForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub coeff_bound: i128,
    pub disc_bound: i128,
    pub verify_n: u64,
    pub budget: Budget,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { coeff_bound: 30, disc_bound: 100, verify_n: 5000, budget: Budget::default(), jobs: 0 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coeff_bound < 1 || self.disc_bound < 1 || self.budget.max_points == 0 {
            return Err(Error::invalid("search bounds must be positive"));
        }
        if self.verify_n < 8 {
            return Err(Error::invalid("verify_n must be at least 8"));
        }
        Ok(())
    }

    fn run<T: Send>(&self, work: impl FnOnce() -> T + Send) -> Result<T> {
        if self.jobs == 0 {
            return Ok(work());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(pool.install(work))
    }
}

/// One node of the escalator tree: forms extending `prefix` must take their
/// next coefficient from `next_range` in order to represent `truant`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalatorNode {
    pub prefix: Vec<i128>,
    pub truant: i128,
    pub next_range: (i128, i128),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentCheck {
    pub q: i64,
    pub descended: TriangularForm,
    pub survives: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub form: TriangularForm,
    pub discriminant: i128,
    /// Theorem-of-Eight outcome (universality searches).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eight: Option<bool>,
    /// Whether the sieve found every integer up to `verify_n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub universal_up_to_n: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularityStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<i128>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub descents: Vec<DescentCheck>,
}

impl Candidate {
    fn new(form: TriangularForm) -> Self {
        Candidate {
            discriminant: form.discriminant(),
            form,
            eight: None,
            universal_up_to_n: None,
            regularity: None,
            counterexample: None,
            descents: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchKind {
    Universal,
    Regular,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    /// Every primitive ternary form is covered (escalator), or every one with
    /// discriminant at most this bound (sweep).
    pub exhaustive: bool,
    pub disc_bound: Option<i128>,
    pub verify_n: u64,
    pub forms_examined: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchReport {
    pub kind: SearchKind,
    pub config: SearchConfig,
    /// Accepted forms: universal ones, or sweep survivors.
    pub candidates: Vec<Candidate>,
    /// Every form examined, including rejected ones (sweeps only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected: Vec<Candidate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tree: Vec<EscalatorNode>,
    pub coverage: Coverage,
    /// Wall-clock time; excluded from reproducibility comparisons.
    pub elapsed_ms: u64,
}

const TRUANT_LIMIT: i128 = 1_000_000;

fn truant_of(prefix: &[i128]) -> Result<i128> {
    if prefix.is_empty() {
        return Ok(1);
    }
    TriangularForm::new(prefix.to_vec())?
        .truant(TRUANT_LIMIT)
        .ok_or_else(|| Error::BudgetExceeded(format!("no truant below {TRUANT_LIMIT} for {prefix:?}")))
}

/// Escalator enumeration of universal ternary triangular forms.
pub fn escalate_universal_ternary(cfg: &SearchConfig) -> Result<SearchReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut tree = Vec::new();
    let mut leaves: Vec<Vec<i128>> = Vec::new();
    let mut exhaustive = true;
    let mut frontier: Vec<Vec<i128>> = vec![Vec::new()];
    for _ in 0..3 {
        let mut next = Vec::new();
        for prefix in frontier {
            let truant = truant_of(&prefix)?;
            let lo = prefix.last().copied().unwrap_or(1);
            let hi = truant.min(cfg.coeff_bound);
            exhaustive &= truant <= cfg.coeff_bound;
            tree.push(EscalatorNode { prefix: prefix.clone(), truant, next_range: (lo, hi) });
            for a in lo..=hi {
                let mut child = prefix.clone();
                child.push(a);
                next.push(child);
            }
        }
        frontier = next;
    }
    leaves.extend(frontier);
    let budget = cfg.budget;
    let verify_n = cfg.verify_n;
    let examined = leaves.len();
    let mut candidates: Vec<Candidate> = cfg.run(|| {
        leaves
            .into_par_iter()
            .map(|coeffs| -> Result<Option<Candidate>> {
                let form = TriangularForm::new(coeffs)?;
                if !form.is_primitive() || !form.theorem_of_eight() {
                    return Ok(None);
                }
                let mut c = Candidate::new(form);
                c.eight = Some(true);
                c.universal_up_to_n = Some(c.form.is_universal_up_to(verify_n, &budget)?);
                Ok(Some(c))
            })
            .collect::<Result<Vec<_>>>()
    })??
    .into_iter()
    .flatten()
    .collect();
    sort_candidates(&mut candidates);
    Ok(SearchReport {
        kind: SearchKind::Universal,
        config: *cfg,
        candidates,
        rejected: Vec::new(),
        tree,
        coverage: Coverage { exhaustive, disc_bound: None, verify_n, forms_examined: examined },
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

fn sort_candidates(c: &mut [Candidate]) {
    c.sort_by(|a, b| (a.discriminant, a.form.coeffs()).cmp(&(b.discriminant, b.form.coeffs())));
}

/// Sorted primitive triples with product at most `disc_bound`.
pub fn primitive_ternary_forms(disc_bound: i128) -> Vec<TriangularForm> {
    let mut out = Vec::new();
    let mut a = 1;
    while a * a * a <= disc_bound {
        let mut b = a;
        while a * b * b <= disc_bound {
            let mut c = b;
            while a * b * c <= disc_bound {
                let f = TriangularForm::new(vec![a, b, c]).expect("positive");
                if f.is_primitive() {
                    out.push(f);
                }
                c += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
}

/// Classifies every primitive ternary triangular form with discriminant at
/// most `disc_bound` by a regularity sweep up to `verify_n`, and cross-checks
/// the descended form of each survivor.
pub fn enumerate_regular_ternary(cfg: &SearchConfig) -> Result<SearchReport> {
    cfg.validate()?;
    let start = Instant::now();
    let forms = primitive_ternary_forms(cfg.disc_bound);
    let examined = forms.len();
    let opts = LocalOptions { max_exp: None, budget: cfg.budget };
    let n = cfg.verify_n;
    let classified: Vec<Candidate> = cfg.run(|| {
        forms
            .into_par_iter()
            .map(|form| -> Result<Candidate> {
                let verdict = form.is_regular_up_to(n, &opts)?;
                let mut c = Candidate::new(form);
                c.regularity = Some(verdict.status);
                c.counterexample = verdict.witness.as_ref().map(|w| w.m);
                if verdict.is_regular_up_to_bound() {
                    for q in c.form.descent_primes() {
                        let descended = c.form.descend(q)?;
                        let survives = descended.is_regular_up_to(n, &opts)?.is_regular_up_to_bound();
                        c.descents.push(DescentCheck { q, descended, survives });
                    }
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let (mut candidates, mut rejected): (Vec<_>, Vec<_>) =
        classified.into_iter().partition(|c| c.regularity == Some(RegularityStatus::RegularUpToN));
    sort_candidates(&mut candidates);
    sort_candidates(&mut rejected);
    Ok(SearchReport {
        kind: SearchKind::Regular,
        config: *cfg,
        candidates,
        rejected,
        tree: Vec::new(),
        coverage: Coverage { exhaustive: true, disc_bound: Some(cfg.disc_bound), verify_n: n, forms_examined: examined },
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

/// A positive definite binary form `q(x) = x·G·xᵀ/2`, doubled Gram matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryForm {
    pub gram2: [[i128; 2]; 2],
}

impl BinaryForm {
    pub fn new(gram2: [[i128; 2]; 2]) -> Result<Self> {
        let rows: Vec<Vec<i128>> = gram2.iter().map(|r| r.to_vec()).collect();
        if gram2[0][1] != gram2[1][0] {
            return Err(Error::NotSymmetric);
        }
        if !arith::is_positive_definite(&rows) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(BinaryForm { gram2 })
    }

    /// `ax² + bxy + cy²`.
    pub fn from_coeffs(a: i128, b: i128, c: i128) -> Result<Self> {
        BinaryForm::new([[2 * a, b], [b, 2 * c]])
    }

    fn rows(&self) -> Vec<Vec<i128>> {
        self.gram2.iter().map(|r| r.to_vec()).collect()
    }

    /// `4·det(B)`, i.e. the determinant of the doubled Gram matrix.
    pub fn det2(&self) -> i128 {
        self.gram2[0][0] * self.gram2[1][1] - self.gram2[0][1] * self.gram2[1][0]
    }

    pub fn value(&self, y: &[Rational]) -> Rational {
        quad_value(&self.rows(), y)
    }
}

/// `f(x) = q(x) + 2b(w, x) + c = q(x + w) − q(w) + c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offset {
    pub w: [Rational; 2],
    pub c: i128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unrepresented {
    pub n: i128,
    pub primes: Vec<i64>,
    /// `Π pᵢ²`.
    pub modulus: i128,
}

/// Builds `N >= k` represented by none of the polynomials
/// `q(x) + 2b(wᵢ, x) + cᵢ`, then confirms it by enumeration.
pub fn find_unrepresented(q: &BinaryForm, polys: &[Offset], k: i128) -> Result<Unrepresented> {
    let t = polys.len();
    if t > 8 {
        return Err(Error::invalid(format!("at most 8 polynomials, got {t}")));
    }
    if k < 0 {
        return Err(Error::invalid("k must be nonnegative"));
    }
    let neg_d = -q.det2();
    let primes: Vec<i64> = local_nonresidue_primes(neg_d, t);
    let mut residues = Vec::with_capacity(t);
    for (poly, &p) in polys.iter().zip(&primes) {
        let p2 = (p as i128) * (p as i128);
        let qw = q.value(&poly.w);
        if poly.w.iter().any(|w| w.denom() % p as i128 == 0) {
            return Err(Error::invalid(format!("w = {:?} is not {p}-integral", poly.w)));
        }
        let qw = arith::rat_mod(&qw, p2).ok_or_else(|| Error::invalid(format!("q(w) is not {p}-integral")))?;
        residues.push((arith::modp(p as i128 + poly.c - qw, p2), p2));
    }
    let (r, modulus) = arith::crt(&residues).ok_or_else(|| Error::Internal("CRT failed".into()))?;
    let floor = k.max(1);
    let n = floor + arith::modp(r - floor, modulus);
    for poly in polys {
        if represents_offset(q, poly, n)? {
            return Err(Error::Internal(format!("constructed N = {n} is represented")));
        }
    }
    Ok(Unrepresented { n, primes, modulus })
}

/// The first `t` odd primes `p` with `(D | p) = −1`.
fn local_nonresidue_primes(d: i128, t: usize) -> Vec<i64> {
    arith::odd_primes()
        .filter(|&p| local::legendre(d, p) == Ok(-1))
        .take(t)
        .collect()
}

/// Exact test of `q(x + w) − q(w) + c = n`.
///
/// With `D` the common denominator of `w` and `Y = D(x + w)`, the equation is
/// `A·Y₁² + 2B·Y₁Y₂ + C·Y₂² = S`; multiplying by `A` turns it into
/// `(A·Y₁ + B·Y₂)² = A·S − (AC − B²)·Y₂²`, so each `Y₂` needs one square root.
pub fn represents_offset(q: &BinaryForm, poly: &Offset, n: i128) -> Result<bool> {
    let [[a, b], [_, c]] = q.gram2;
    let den = num_integer::lcm(*poly.w[0].denom(), *poly.w[1].denom());
    let shift = [(poly.w[0] * den).to_integer(), (poly.w[1] * den).to_integer()];
    // S = 2D²·(n − c + q(w)).
    let s = (int(n - poly.c) + q.value(&poly.w)) * (2 * den * den);
    if !s.is_integer() {
        return Err(Error::Internal("non-integral scaled target".into()));
    }
    let s = s.to_integer();
    if s < 0 {
        return Ok(false);
    }
    let det = a * c - b * b;
    let y2_max = arith::isqrt(a * s / det) + 1;
    let mut y2 = -y2_max + arith::modp(shift[1] + y2_max, den);
    while y2 <= y2_max {
        let r = a * s - det * y2 * y2;
        if r >= 0 && arith::is_square(r) {
            let root = arith::isqrt(r);
            for t in [root, -root] {
                let num = t - b * y2;
                if num % a == 0 && arith::modp(num / a - shift[0], den) == 0 {
                    return Ok(true);
                }
            }
        }
        y2 += den;
    }
    Ok(false)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KkoCount {
    pub count: u64,
    pub bound: Rational,
}

/// Counts terms of `d, a + d, …, (n−1)a + d` free of the primes in `primes`,
/// alongside the lower bound `n(p̃−1)/(p̃+t−1) − 2ᵗ + 1`.
pub fn kko_lower_bound(primes: &[i64], a: i128, d: i128, n: u64) -> Result<KkoCount> {
    for &p in primes {
        if !arith::is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if a % p as i128 == 0 {
            return Err(Error::invalid(format!("{p} divides a = {a}")));
        }
    }
    let count = (0..n as i128)
        .filter(|j| primes.iter().all(|&p| (j * a + d) % p as i128 != 0))
        .count() as u64;
    let bound = match primes.iter().min() {
        None => int(n as i128),
        Some(&smallest) => {
            let t = primes.len() as i128;
            let pt = smallest as i128;
            int(n as i128) * Rational::new(pt - 1, pt + t - 1) - int(1 << t) + int(1)
        }
    };
    Ok(KkoCount { count, bound })
}

/// `min{3μ₃/2, 7μ₂/2, 31μ₁}` for the quadratic part of a ternary polynomial.
pub fn gamma(f: &QuadPoly) -> Rational {
    let mu = |i: usize| Rational::new(f.gram2()[i][i], 2);
    let cands = [mu(2) * Rational::new(3, 2), mu(1) * Rational::new(7, 2), mu(0) * 31];
    cands.into_iter().min().unwrap_or_else(Rational::zero)
}

/// The box `|x₁| <= 30, |x₂| <= 21, |x₃| <= 8`.
pub const GAMMA_BOX: [i128; 3] = [30, 21, 8];

/// Integer vectors outside [`GAMMA_BOX`] with `f(x) < gamma(f)`.
pub fn gamma_box_violations(f: &QuadPoly, max_points: u64) -> Result<Vec<Vec<i128>>> {
    if f.dim() != 3 {
        return Err(Error::UnsupportedDimension(f.dim()));
    }
    let g = gamma(f);
    // f is integer-valued, so f(x) < γ means f(x) <= ⌈γ⌉ − 1.
    let bound = int(arith::ceil(&g) - 1);
    let mut out = Vec::new();
    f.for_each_at_most(bound, max_points, |x, _| {
        if x.iter().zip(GAMMA_BOX).any(|(xi, b)| xi.abs() > b) {
            out.push(x.to_vec());
        }
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    #[test]
    fn escalator_finds_seven() {
        let r = escalate_universal_ternary(&SearchConfig::default()).unwrap();
        let found: Vec<Vec<i128>> = r.candidates.iter().map(|c| c.form.coeffs().to_vec()).collect();
        assert_eq!(found.len(), 7);
        assert!(found.contains(&vec![1, 1, 1]));
        assert!(r.coverage.exhaustive);
        assert!(r.candidates.iter().all(|c| c.universal_up_to_n == Some(true)));
    }

    #[test]
    fn tiny_regular_sweep() {
        let cfg = SearchConfig { disc_bound: 1, verify_n: 500, ..SearchConfig::default() };
        let r = enumerate_regular_ternary(&cfg).unwrap();
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.candidates[0].form.coeffs(), &[1, 1, 1]);
    }

    #[test]
    fn config_validation() {
        let cfg = SearchConfig { verify_n: 7, ..SearchConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn find_unrepresented_examples() {
        let sq = BinaryForm::from_coeffs(1, 0, 1).unwrap();
        let zero = Offset { w: [int(0), int(0)], c: 0 };
        let u = find_unrepresented(&sq, std::slice::from_ref(&zero), 0).unwrap();
        assert_eq!((u.n, u.primes.clone()), (3, vec![3]));
        assert_eq!(find_unrepresented(&sq, std::slice::from_ref(&zero), 10).unwrap().n, 12);
        let q = BinaryForm::from_coeffs(1, 0, 2).unwrap();
        let u = find_unrepresented(&q, &[zero], 0).unwrap();
        assert_eq!((u.n, u.primes), (5, vec![5]));
    }

    #[test]
    fn find_unrepresented_rejects_bad_offsets() {
        let sq = BinaryForm::from_coeffs(1, 0, 1).unwrap();
        let bad = Offset { w: [rat(1, 3), int(0)], c: 0 };
        assert!(find_unrepresented(&sq, &[bad], 0).is_err());
    }

    #[test]
    fn offset_representation_matches_box_search() {
        let q = BinaryForm::from_coeffs(2, 1, 3).unwrap();
        for (w, c) in [([int(0), int(0)], 0), ([rat(1, 2), int(0)], 3), ([rat(1, 2), rat(1, 2)], -2)] {
            let poly = Offset { w, c };
            // The offsets above keep the polynomial integer valued.
            for n in -5..60 {
                let mut hit = false;
                for x1 in -12i128..=12 {
                    for x2 in -12i128..=12 {
                        let y = [int(x1) + poly.w[0], int(x2) + poly.w[1]];
                        hit |= q.value(&y) - q.value(&poly.w) + int(c) == int(n);
                    }
                }
                assert_eq!(represents_offset(&q, &poly, n).unwrap(), hit, "{poly:?} n={n}");
            }
        }
    }

    #[test]
    fn kko_examples() {
        let r = kko_lower_bound(&[3], 1, 0, 9).unwrap();
        assert_eq!((r.count, r.bound), (6, int(5)));
        let r = kko_lower_bound(&[], 7, 3, 12).unwrap();
        assert_eq!((r.count, r.bound), (12, int(12)));
        let r = kko_lower_bound(&[3, 5], 2, 1, 15).unwrap();
        assert_eq!(r.bound, rat(9, 2));
        assert!(int(r.count as i128) >= r.bound);
        assert!(kko_lower_bound(&[3], 6, 0, 9).is_err());
    }

    #[test]
    fn gamma_box_on_sum_of_squares() {
        let f = QuadPoly::diagonal(&[1, 1, 1]).unwrap();
        assert_eq!(gamma(&f), rat(3, 2));
        assert!(gamma_box_violations(&f, 1_000_000).unwrap().is_empty());
    }
}
