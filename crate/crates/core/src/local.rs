//! p-adic solubility of `f(x) = a`.
//!
//! The general decider walks the tree of residue solutions of
//! `F(x) = 2(f(x) − a) ≡ 0 (mod pᵏ)` level by level. A node is accepted once
//! its integer representative satisfies the Newton condition
//! `v_p(F(x₀)) > 2·minᵢ v_p(∂F/∂xᵢ(x₀))`, which guarantees a p-adic root by
//! Hensel lifting in one coordinate. The search rejects as soon as a level
//! has no residue solutions at all. Working with the doubled polynomial keeps
//! every coefficient integral, including at `p = 2`.

use serde::{Deserialize, Serialize};

use crate::arith::{self, Budget, Meter};
use crate::error::{Error, Result};
use crate::poly::QuadPoly;
use crate::triangular::TriangularForm;

/// How a local verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalMethod {
    ClosedForm2adic,
    ClosedFormOddUnit,
    HenselLift,
    /// Recursion over the Jordan components of a diagonal form.
    JordanSplit,
    Exhausted,
}

/// A residue vector `x₀` with `v_p(f(x₀) − a) >= exponent` whose Newton
/// condition certifies a p-adic solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalWitness {
    pub residue: Vec<i128>,
    /// `x₀` is taken modulo `p^exponent` (`2^(exponent+1)` when `p = 2`).
    pub exponent: u32,
    /// `v_p(2(f(x₀) − a))`; `None` means the value is exactly zero.
    pub value_valuation: Option<u32>,
    /// `minᵢ v_p(2·∂f/∂xᵢ(x₀))`.
    pub gradient_valuation: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalVerdict {
    pub p: i64,
    pub soluble: bool,
    pub witness: Option<LocalWitness>,
    pub method: LocalMethod,
    /// Deepest level examined by the residue search, if one ran.
    pub depth: Option<u32>,
}

/// Options for [`represents_locally`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LocalOptions {
    /// Maximum exponent examined; defaults to the decisive level.
    pub max_exp: Option<u32>,
    pub budget: Budget,
}

fn require_prime(p: i64) -> Result<()> {
    if arith::is_prime(p) {
        Ok(())
    } else {
        Err(Error::NotPrime(p))
    }
}

/// Legendre symbol `(a | p)` for an odd prime `p`.
pub fn legendre(a: i128, p: i64) -> Result<i8> {
    if p == 2 || !arith::is_prime(p) {
        return Err(Error::NotOddPrime(p));
    }
    let p = p as i128;
    let r = arith::modp(a, p);
    if r == 0 {
        return Ok(0);
    }
    Ok(if arith::mod_pow(r, ((p - 1) / 2) as u128, p) == 1 { 1 } else { -1 })
}

/// Modulus needed on `x` so that `f(x) mod pᵉ` is well defined.
fn residue_modulus(p: i64, e: u32) -> Result<i128> {
    let m = arith::ipow(p as i128, e)?;
    Ok(if p == 2 { 2 * m } else { m })
}

/// Brute force: the first residue vector `x₀` (lexicographic) with
/// `f(x₀) ≡ a (mod pᵉ)`.
pub fn represents_mod(f: &QuadPoly, a: i128, p: i64, e: u32, budget: &Budget) -> Result<Option<Vec<i128>>> {
    require_prime(p)?;
    if e == 0 {
        return Err(Error::invalid("exponent must be positive"));
    }
    let m = residue_modulus(p, e)?;
    let n = f.dim() as u32;
    let total = (m as f64).powi(n as i32);
    if total > budget.max_points as f64 {
        return Err(Error::BudgetExceeded(format!("{m}^{n} residue vectors")));
    }
    // f(x) − a ≡ 0 mod p^e  <=>  2f(x) − 2a ≡ 0 mod 2p^e
    let target = 2 * arith::ipow(p as i128, e)?;
    let mut x = vec![0i128; n as usize];
    loop {
        if arith::modp(f.eval2(&x) - 2 * a, target) == 0 {
            return Ok(Some(x));
        }
        if !next_residue(&mut x, m) {
            return Ok(None);
        }
    }
}

/// Odometer step over `[0, m)ⁿ`, last coordinate fastest.
fn next_residue(x: &mut [i128], m: i128) -> bool {
    for xi in x.iter_mut().rev() {
        *xi += 1;
        if *xi < m {
            return true;
        }
        *xi = 0;
    }
    false
}

/// `v_p(F(x₀))` and `minᵢ v_p(∂F/∂xᵢ(x₀))` for `F = 2(f − a)`.
pub fn newton_data(f: &QuadPoly, a: i128, p: i64, x: &[i128]) -> (Option<u32>, Option<u32>) {
    let value = arith::valuation(f.eval2(x) - 2 * a, p);
    let grad = f.gradient2(x).into_iter().filter_map(|g| arith::valuation(g, p)).min();
    (value, grad)
}

/// Newton's condition `v(F) > 2·v(∇F)`, with `v(0) = ∞`.
pub fn newton_certified(value: Option<u32>, grad: Option<u32>) -> bool {
    match (value, grad) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(v), Some(g)) => v > 2 * g,
    }
}

/// Residue level at which the search is decisive, or `None` when
/// `a` equals the real minimum.
///
/// With `y = x + v` the shift to the critical point, `2(f − a) = y·G·y − 2N`
/// where `N = a − min_ℝ f`. Every solution has `v_p(y) <= v_p(2N)/2`, and the
/// gradient `2·G·y` then has valuation at most `v_p(2) + v_p(det G) + v_p(y)`.
/// Past twice that level the truncation of any solution is certified.
pub fn decisive_level(f: &QuadPoly, a: i128, p: i64) -> Result<Option<u32>> {
    let c = f.complete()?;
    let two_n = (arith::int(a) - c.real_min) * 2;
    let Some(vn) = arith::valuation_rat(&two_n, p) else {
        return Ok(None);
    };
    let vd = arith::valuation(arith::det(f.gram2()), p).unwrap_or(0) as i64;
    let v2 = i64::from(p == 2);
    let g = (v2 + vd + vn.div_euclid(2)).max(0);
    Ok(Some(2 * g as u32 + 1))
}

/// Default cap `v_p(det G) + v_p(a − c) + 2·v_p(2) + 3`, used only when no
/// decisive level exists.
fn fallback_exponent(f: &QuadPoly, a: i128, p: i64) -> u32 {
    let det = arith::det(f.gram2());
    let vd = arith::valuation(det, p).unwrap_or(0);
    let va = arith::valuation(a - f.constant(), p).unwrap_or(0);
    let v2 = u32::from(p == 2);
    vd + va + 2 * v2 + 3
}

/// Decides whether `f(x) = a` is soluble over the p-adic integers.
pub fn represents_locally(f: &QuadPoly, a: i128, p: i64, opts: &LocalOptions) -> Result<LocalVerdict> {
    require_prime(p)?;
    if !f.is_integer_valued() {
        return Err(Error::NotIntegerValued);
    }
    let n = f.dim();
    // Levels index F = 2(f − a) modulo p^k; for p = 2 level k is f modulo 2^(k−1).
    let shift = u32::from(p == 2);
    let decisive = decisive_level(f, a, p)?;
    let max_exp = match (opts.max_exp, decisive) {
        (Some(e), _) => e,
        (None, Some(d)) => d.saturating_sub(shift),
        (None, None) => fallback_exponent(f, a, p),
    };
    let last_level = max_exp + shift;
    let pp = p as i128;
    let mut meter = Meter::new(opts.budget.max_points, "p-adic residue tree");

    let verdict_for = |x: &[i128], level: u32, value, grad| LocalVerdict {
        p,
        soluble: true,
        witness: Some(LocalWitness {
            residue: x.to_vec(),
            exponent: level - shift,
            value_valuation: value,
            gradient_valuation: grad,
        }),
        method: LocalMethod::HenselLift,
        depth: Some(level - shift),
    };

    // An exact zero needs no search.
    let zero = vec![0i128; n];
    if a == f.constant() {
        return Ok(verdict_for(&zero, 1 + shift, None, newton_data(f, a, p, &zero).1));
    }

    let mut level = 1u32;
    let mut modulus = pp;
    let mut nodes: Vec<Vec<i128>> = Vec::new();
    let mut x = zero.clone();
    loop {
        meter.tick()?;
        if arith::modp(f.eval2(&x) - 2 * a, modulus) == 0 {
            nodes.push(x.clone());
        }
        if !next_residue(&mut x, pp) {
            break;
        }
    }
    loop {
        for x in &nodes {
            let (value, grad) = newton_data(f, a, p, x);
            if newton_certified(value, grad) {
                return Ok(verdict_for(x, level, value, grad));
            }
        }
        if nodes.is_empty() || decisive.is_some_and(|d| level >= d) {
            return Ok(LocalVerdict {
                p,
                soluble: false,
                witness: None,
                method: LocalMethod::Exhausted,
                depth: Some(level.saturating_sub(shift)),
            });
        }
        if level >= last_level.max(1) {
            return Err(Error::BudgetExceeded(format!(
                "p = {p}: {} uncertified residue classes remain at exponent {max_exp}",
                nodes.len()
            )));
        }
        let next_modulus = modulus * pp;
        let mut next = Vec::new();
        for base in &nodes {
            let mut y = vec![0i128; n];
            loop {
                meter.tick()?;
                let cand: Vec<i128> = base.iter().zip(&y).map(|(b, t)| b + modulus * t).collect();
                if arith::modp(f.eval2(&cand) - 2 * a, next_modulus) == 0 {
                    next.push(cand);
                }
                if !next_residue(&mut y, pp) {
                    break;
                }
            }
        }
        next.sort();
        nodes = next;
        modulus = next_modulus;
        level += 1;
    }
}

/// Real solubility: a positive polynomial takes every value at or above its
/// real minimum.
pub fn represents_over_reals(f: &QuadPoly, a: i128) -> Result<bool> {
    let c = f.complete()?;
    Ok(arith::int(a) >= c.real_min)
}

/// Primes dividing `2·d(Δ)`; outside these every `m` is locally represented
/// by a form in three or more variables.
pub fn local_obstruction_primes(d: &TriangularForm) -> Vec<i64> {
    arith::prime_divisors(2 * d.discriminant())
}

/// A solution of `Σ cᵢ zᵢ² ≡ t (mod p)` over the unit coefficients `units`
/// (indices into `coeffs`) with some `zᵢ` nonzero, or `None`.
fn unit_solution_mod_p(coeffs: &[i128], units: &[usize], t: i128, p: i128) -> Option<Vec<i128>> {
    let mut sqrt = vec![None; p as usize];
    for z in 0..p {
        sqrt[(z * z % p) as usize].get_or_insert(z);
    }
    let (&last, rest) = units.split_last()?;
    let mut z = vec![0i128; rest.len()];
    loop {
        let partial: i128 = rest.iter().zip(&z).map(|(&i, zi)| coeffs[i] * zi * zi).sum();
        let inv = arith::mod_inv(coeffs[last], p)?;
        let need = arith::modp((t - partial) * inv, p);
        if let Some(r) = sqrt[need as usize] {
            if r != 0 || z.iter().any(|&v| v != 0) {
                let mut out = vec![0i128; coeffs.len()];
                for (&i, &zi) in rest.iter().zip(&z) {
                    out[i] = zi;
                }
                out[last] = r;
                return Some(out);
            }
        }
        if !next_residue(&mut z, p) {
            return None;
        }
    }
}

/// Lifts `r` with `r² ≡ c (mod p)`, `p ∤ 2rc`, to a root modulo `p^e`.
fn lift_sqrt(mut r: i128, c: i128, p: i128, e: u32) -> Result<i128> {
    let mut m = p;
    for _ in 1..e {
        m = m.checked_mul(p).ok_or_else(|| Error::BudgetExceeded("p-adic precision overflow".into()))?;
        let inv = arith::mod_inv(2 * r, m).ok_or_else(|| Error::Internal("non-unit root".into()))?;
        r = arith::modp(r - arith::modp(r * r - c, m) * inv, m);
    }
    Ok(r)
}

/// Solubility of `Σ αᵢ yᵢ² = t` over the p-adic integers for odd `p`, with
/// an integer solution of the congruence modulo a power of `p` that Newton's
/// condition certifies.
///
/// Either some variable with unit coefficient is a unit, which is detected
/// modulo `p`, or all such variables are divisible by `p` and the equation
/// drops to `Σ α'ᵢ zᵢ² = t/p`.
pub fn diagonal_solution(alpha: &[i128], t: i128, p: i64) -> Result<Option<Vec<i128>>> {
    if p == 2 || !arith::is_prime(p) {
        return Err(Error::NotOddPrime(p));
    }
    if alpha.contains(&0) {
        return Err(Error::invalid("diagonal coefficients must be nonzero"));
    }
    let pp = p as i128;
    let n = alpha.len();
    if t == 0 {
        return Ok(Some(vec![0; n]));
    }
    let mut coeffs = alpha.to_vec();
    let mut target = t;
    // yᵢ = p^scale[i]·zᵢ.
    let mut scale = vec![0u32; n];
    loop {
        let units: Vec<usize> = (0..n).filter(|&i| coeffs[i] % pp != 0).collect();
        if units.is_empty() {
            if target % pp != 0 {
                return Ok(None);
            }
            coeffs.iter_mut().for_each(|c| *c /= pp);
            target /= pp;
            continue;
        }
        if let Some(z0) = unit_solution_mod_p(&coeffs, &units, target, pp) {
            let j = *units.iter().find(|&&i| z0[i] % pp != 0).expect("a unit coordinate");
            let g = arith::valuation(alpha[j], p).unwrap_or(0) + scale[j];
            let prec = 2 * g + 2;
            let modulus = arith::ipow(pp, prec)?;
            let rest: i128 = (0..n).filter(|&i| i != j).map(|i| coeffs[i] * z0[i] * z0[i]).sum();
            let inv = arith::mod_inv(coeffs[j], modulus).expect("unit coefficient");
            let c = arith::modp((target - rest) * inv, modulus);
            let mut z = z0;
            z[j] = lift_sqrt(z[j], c, pp, prec)?;
            let y = (0..n)
                .map(|i| Ok(z[i] * arith::ipow(pp, scale[i])?))
                .collect::<Result<Vec<i128>>>()?;
            return Ok(Some(y));
        }
        if target % pp != 0 {
            return Ok(None);
        }
        for i in 0..n {
            if units.contains(&i) {
                coeffs[i] *= pp;
                scale[i] += 1;
            } else {
                coeffs[i] /= pp;
            }
        }
        target /= pp;
    }
}

/// Local solubility of `Δ(x) = m` at an odd prime through the model
/// `Σ αᵢ(2xᵢ + 1)² = 8m + Σαᵢ`, in which `2x + 1` ranges over all of `Z_p`.
fn triangular_odd_prime(d: &TriangularForm, m: i128, p: i64) -> Result<LocalVerdict> {
    let target = 8 * m + d.coeff_sum();
    let Some(y) = diagonal_solution(d.coeffs(), target, p)? else {
        return Ok(LocalVerdict { p, soluble: false, witness: None, method: LocalMethod::JordanSplit, depth: None });
    };
    let pp = p as i128;
    let gmax = y
        .iter()
        .zip(d.coeffs())
        .filter_map(|(&yi, &a)| arith::valuation(a * yi, p))
        .min()
        .unwrap_or(0);
    let exponent = 2 * gmax + 2;
    let modulus = arith::ipow(pp, exponent)?;
    let inv2 = arith::mod_inv(2, modulus).expect("odd prime");
    let x: Vec<i128> = y.iter().map(|&yi| arith::modp((yi - 1) * inv2, modulus)).collect();
    let f = d.to_poly();
    let (value, grad) = newton_data(&f, m, p, &x);
    if !newton_certified(value, grad) {
        return Err(Error::Internal(format!("uncertified witness {x:?} for Δ{:?} = {m} at {p}", d.coeffs())));
    }
    Ok(LocalVerdict {
        p,
        soluble: true,
        witness: Some(LocalWitness { residue: x, exponent, value_valuation: value, gradient_valuation: grad }),
        method: LocalMethod::JordanSplit,
        depth: None,
    })
}

/// Local solubility of `Δ(x) = m` with closed-form shortcuts.
pub fn triangular_locally_represents(d: &TriangularForm, m: i128, p: i64, opts: &LocalOptions) -> Result<LocalVerdict> {
    require_prime(p)?;
    let closed = closed_form(d, m, p);
    let search = |m| {
        if p == 2 {
            represents_locally(&d.to_poly(), m, p, opts)
        } else {
            triangular_odd_prime(d, m, p)
        }
    };
    let Some(method) = closed else {
        return search(m);
    };
    // Closed forms decide the verdict; a witness is attached when the
    // search finds one within budget.
    match search(m) {
        Ok(v) if v.soluble => Ok(LocalVerdict { method, ..v }),
        Ok(v) => Err(Error::Internal(format!(
            "closed form says Δ{:?} represents {m} over Z_{p} but residue search found none at depth {:?}",
            d.coeffs(),
            v.depth
        ))),
        Err(Error::BudgetExceeded(_)) => Ok(LocalVerdict { p, soluble: true, witness: None, method, depth: None }),
        Err(e) => Err(e),
    }
}

/// The closed-form criteria for triangular forms; `None` when none applies.
pub fn closed_form(d: &TriangularForm, m: i128, p: i64) -> Option<LocalMethod> {
    if p == 2 {
        return d.is_primitive().then_some(LocalMethod::ClosedForm2adic);
    }
    let pp = p as i128;
    let units = d.coeffs().iter().all(|a| a % pp != 0);
    if !units {
        return None;
    }
    match d.coeffs() {
        [a, b] => {
            let s = a + b;
            ((8 * m + s) % pp != 0 || s % pp == 0).then_some(LocalMethod::ClosedFormOddUnit)
        }
        c if c.len() >= 3 => Some(LocalMethod::ClosedFormOddUnit),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> LocalOptions {
        LocalOptions::default()
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre(1, 3).unwrap(), 1);
        assert_eq!(legendre(2, 3).unwrap(), -1);
        assert_eq!(legendre(-1, 5).unwrap(), 1);
        assert_eq!(legendre(10, 5).unwrap(), 0);
        assert_eq!(legendre(1, 2).unwrap_err(), Error::NotOddPrime(2));
        assert_eq!(legendre(1, 9).unwrap_err(), Error::NotOddPrime(9));
    }

    #[test]
    fn represents_mod_examples() {
        let sq = QuadPoly::diagonal(&[1]).unwrap();
        let b = Budget::default();
        assert_eq!(represents_mod(&sq, 2, 3, 1, &b).unwrap(), None);
        assert_eq!(represents_mod(&sq, 4, 3, 2, &b).unwrap(), Some(vec![2]));
        let tri: QuadPoly = "tri 1,1".parse().unwrap();
        let w = represents_mod(&tri, 1, 5, 3, &b).unwrap().unwrap();
        assert_eq!(arith::modp(tri.eval2(&w) - 2, 250), 0);
        assert!(matches!(represents_mod(&tri, 1, 5, 20, &b), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn two_adic_residues_need_an_extra_bit() {
        // x(x+1)/2 mod 2 depends on x mod 4.
        let tri: QuadPoly = "tri 1".parse().unwrap();
        let b = Budget::default();
        assert_eq!(represents_mod(&tri, 1, 2, 1, &b).unwrap(), Some(vec![1]));
        assert_eq!(represents_mod(&tri, 0, 2, 2, &b).unwrap(), Some(vec![0]));
    }

    #[test]
    fn local_examples() {
        let t: QuadPoly = "tri 1,1,1".parse().unwrap();
        for a in 0..=50 {
            assert!(represents_locally(&t, a, 2, &opts()).unwrap().soluble, "a = {a}");
        }
        let s2 = QuadPoly::diagonal(&[1, 1]).unwrap();
        let v = represents_locally(&s2, 3, 3, &opts()).unwrap();
        assert!(!v.soluble);
        assert_eq!(v.method, LocalMethod::Exhausted);
        let v = represents_locally(&s2, 2, 3, &opts()).unwrap();
        assert!(v.soluble);
        let w = v.witness.unwrap();
        assert!(newton_certified(w.value_valuation, w.gradient_valuation));
        // 9 = 3^2 + 0^2 needs a deeper level.
        assert!(represents_locally(&s2, 9, 3, &opts()).unwrap().soluble);
        assert!(!represents_locally(&s2, 3 * 4, 3, &opts()).unwrap().soluble);
    }

    #[test]
    fn triangular_examples() {
        let d11: TriangularForm = "1,1".parse().unwrap();
        let v = triangular_locally_represents(&d11, 3, 5, &opts()).unwrap();
        assert!(v.soluble);
        assert_eq!(v.method, LocalMethod::ClosedFormOddUnit);
        let d111: TriangularForm = "1,1,1".parse().unwrap();
        for m in 0..=50 {
            assert!(triangular_locally_represents(&d111, m, 7, &opts()).unwrap().soluble);
        }
        // 8·1 + 2 = 10 ≡ 0 mod 5 and 1 + 1 ≢ 0: falls back to the search.
        assert_eq!(closed_form(&d11, 1, 5), None);
        let v = triangular_locally_represents(&d11, 1, 5, &opts()).unwrap();
        assert!(v.soluble);
        assert_eq!(v.method, LocalMethod::JordanSplit);
        // y² + 3z² = 3·(unit nonresidue) has no 3-adic solution.
        assert_eq!(diagonal_solution(&[1, 3], 6, 3).unwrap(), None);
        assert!(diagonal_solution(&[1, 3], 4, 3).unwrap().is_some());
        assert!(diagonal_solution(&[1, 1, 9], 81 * 7, 3).unwrap().is_some());
    }

    #[test]
    fn obstruction_primes() {
        let p = |s: &str| local_obstruction_primes(&s.parse().unwrap());
        assert_eq!(p("1,1,1"), vec![2]);
        assert_eq!(p("1,2,3"), vec![2, 3]);
        assert_eq!(p("1,4,25"), vec![2, 5]);
    }

    #[test]
    fn real_place() {
        let f = QuadPoly::new(vec![vec![2]], vec![-4], 0).unwrap();
        assert!(represents_over_reals(&f, -1).unwrap());
        assert!(!represents_over_reals(&f, -2).unwrap());
    }

    #[test]
    fn rejects_non_primes() {
        let t: QuadPoly = "tri 1,1,1".parse().unwrap();
        assert_eq!(represents_locally(&t, 1, 4, &opts()).unwrap_err(), Error::NotPrime(4));
    }
}
